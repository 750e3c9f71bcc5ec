//! Distribution function, non-increasing rearrangement and Lorentz
//! quasi-norms of step functions.
//!
//! A [`MeasuredSample`] is a finite list of `(value, weight)` pairs, i.e. a
//! simple function on a measure space. Everything here is evaluated in closed
//! form on its rearrangement, so there is no quadrature error.

use crate::error::{Error, Result};
use crate::grid::{BoxDomain, CellField};

#[derive(Clone, Debug, PartialEq)]
pub struct MeasuredSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl MeasuredSample {
    /// Values must be finite and nonnegative (callers pass `|f|`), weights
    /// finite and strictly positive.
    pub fn new(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (values, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        for (n, (&v, &w)) in values.iter().zip(&weights).enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "value #{n} = {v} is not a finite nonnegative number"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(format!(
                    "weight #{n} = {w} is not finite and positive"
                )));
            }
        }
        Ok(MeasuredSample { values, weights })
    }

    /// Piecewise-constant cell function, each cell weighted by its volume.
    pub fn from_cells(field: &CellField, g: &BoxDomain) -> Result<Self> {
        field.check(g)?;
        let v = g.cell_volume();
        Self::new(field.values.data().iter().map(|&x| (x, v)))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Multiply every value by `lambda >= 0`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(
            self.values
                .iter()
                .map(|v| v * lambda)
                .zip(self.weights.iter().copied()),
        )
    }
}

/// `μ({|f| > level})`
pub fn distribution_function(s: &MeasuredSample, level: f64) -> Result<f64> {
    if !(level >= 0.0) {
        return Err(Error::invalid(format!("level must be >= 0, got {level}")));
    }
    Ok(s.values
        .iter()
        .zip(&s.weights)
        .filter(|(v, _)| **v > level)
        .map(|(_, w)| w)
        .sum())
}

/// One constancy interval `[start, end)` of a rearrangement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub value: f64,
    pub start: f64,
    pub end: f64,
}

/// Non-increasing rearrangement `f*` as a right-open step function on
/// `[0, total measure)`; zero beyond.
#[derive(Clone, Debug, PartialEq)]
pub struct Rearrangement {
    steps: Vec<Step>,
}

impl Rearrangement {
    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn total_measure(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.end)
    }

    /// `f*(t)`
    pub fn eval(&self, t: f64) -> f64 {
        // first step whose end exceeds t
        let n = self.steps.partition_point(|s| s.end <= t);
        self.steps.get(n).map_or(0.0, |s| s.value)
    }

    /// Distribution function of the rearranged function.
    pub fn distribution(&self, level: f64) -> f64 {
        // values are decreasing, so the super-level set is a prefix
        let n = self.steps.partition_point(|s| s.value > level);
        if n == 0 {
            0.0
        } else {
            self.steps[n - 1].end
        }
    }
}

pub fn rearrangement(s: &MeasuredSample) -> Result<Rearrangement> {
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s.values[b].total_cmp(&s.values[a]));

    let mut steps: Vec<Step> = Vec::new();
    let mut t = 0.0;
    let mut n = 0;
    while n < order.len() {
        let value = s.values[order[n]];
        let mut mass = 0.0;
        while n < order.len() && s.values[order[n]] == value {
            mass += s.weights[order[n]];
            n += 1;
        }
        let start = t;
        t += mass;
        steps.push(Step {
            value,
            start,
            end: t,
        });
    }
    Ok(Rearrangement { steps })
}

fn check_m(m: f64) -> Result<()> {
    if !(m.is_finite() && m >= 1.0) {
        return Err(Error::invalid(format!(
            "Lorentz index m must satisfy 1 <= m < inf, got {m}"
        )));
    }
    Ok(())
}

/// `‖f‖_{L(m,p)} = (∫_0^∞ (t^{1/m} f*(t))^p dt/t)^{1/p}` for `1 <= p < ∞`.
pub fn lorentz_norm(s: &MeasuredSample, m: f64, p: f64) -> Result<f64> {
    check_m(m)?;
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::invalid(format!(
            "Lorentz index p must satisfy 1 <= p < inf, got {p}"
        )));
    }
    let r = rearrangement(s)?;
    let e = p / m;
    let sum: f64 = r
        .steps
        .iter()
        .filter(|st| st.value > 0.0)
        .map(|st| st.value.powf(p) * (m / p) * (st.end.powf(e) - st.start.powf(e)))
        .sum();
    Ok(sum.powf(1.0 / p))
}

/// `‖f‖_{L(m,∞)} = sup_t t^{1/m} f*(t)`, attained at right ends of the steps.
pub fn lorentz_norm_inf(s: &MeasuredSample, m: f64) -> Result<f64> {
    check_m(m)?;
    let r = rearrangement(s)?;
    Ok(r.steps
        .iter()
        .map(|st| st.end.powf(1.0 / m) * st.value)
        .fold(0.0, f64::max))
}

/// Exponent of an Lebesgue norm; `Inf` is the essential supremum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Inf,
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Inf" => Ok(Exponent::Inf),
            t => t
                .parse::<f64>()
                .map(Exponent::Finite)
                .map_err(|_| Error::invalid(format!("cannot parse exponent {t:?}"))),
        }
    }
}

/// `(Σ v^p w)^{1/p}`, or `max v` for `p = ∞`.
pub fn lp_norm(s: &MeasuredSample, p: Exponent) -> Result<f64> {
    match p {
        Exponent::Inf => Ok(s.values.iter().copied().fold(0.0, f64::max)),
        Exponent::Finite(p) => {
            if !(p.is_finite() && p >= 1.0) {
                return Err(Error::invalid(format!(
                    "L^p exponent must be >= 1, got {p}"
                )));
            }
            let sum: f64 = s
                .values
                .iter()
                .zip(&s.weights)
                .map(|(v, w)| v.powf(p) * w)
                .sum();
            Ok(sum.powf(1.0 / p))
        }
    }
}
