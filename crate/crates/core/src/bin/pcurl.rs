use std::process::ExitCode;

fn main() -> ExitCode {
    pcurl_core::cli::main()
}
