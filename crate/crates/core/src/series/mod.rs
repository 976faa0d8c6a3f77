//! Evaluators for the Bose-weighted lattice series `f(x, y; w)`, its
//! one-dimensional slice, and the grouped radical correction sums.
//!
//! Every evaluator returns an [`EvalResult`] whose budget bounds (real
//! parameters) or estimates (complex parameters) the distance to the
//! infinite sum.

mod correction;
mod grouped;
mod lattice;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{principal_sqrt, radical, real, serde_scalar, ErrorBudget, Scalar};

pub use correction::{
    eval_bracket21, eval_corr1d, eval_corr2d, sum_brackets21, sum_brackets23,
};
pub use grouped::{GroupedSeries, RadicalTerm};
pub use lattice::{eval_f, eval_f_ordered, eval_s1d, SumOrder};

/// Rows and columns checked explicitly by the convergence guard.
const GUARD_WINDOW: u64 = 16;

/// Arguments of `f(x, y; w)`: lattice stretch, exponential rate, mass shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesParams {
    #[serde(with = "serde_scalar")]
    pub x: Scalar,
    #[serde(with = "serde_scalar")]
    pub y: Scalar,
    #[serde(with = "serde_scalar")]
    pub w: Scalar,
}

impl SeriesParams {
    pub fn new(x: Scalar, y: Scalar, w: Scalar) -> Self {
        SeriesParams { x, y, w }
    }

    pub fn real(x: f64, y: f64, w: f64) -> Self {
        SeriesParams::new(real(x), real(y), real(w))
    }

    pub fn is_real(&self) -> bool {
        self.x.im == 0.0 && self.y.im == 0.0 && self.w.im == 0.0
    }

    /// Sufficient convergence condition: `Re y > 0`, `Re(y sqrt(x^2)) > 0`
    /// and `Re(y rho(n, r)) > 0` on the first 16 rows and columns.
    pub fn check_guard(&self) -> Result<()> {
        let xhat = principal_sqrt(self.x * self.x);
        if !(self.y.re > 0.0) {
            return Err(Error::domain(format!("guard: Re(y) = {} is not positive", self.y.re)));
        }
        if !((self.y * xhat).re > 0.0) {
            return Err(Error::domain(format!(
                "guard: Re(y*sqrt(x^2)) is not positive at x = {}, y = {}",
                self.x, self.y
            )));
        }
        for r in 1..=GUARD_WINDOW {
            for n in 1..=GUARD_WINDOW {
                let rho = radical(self.x, n, r, self.w)?;
                if !((self.y * rho).re > 0.0) {
                    return Err(Error::domain(format!(
                        "guard: Re(y*rho) <= 0 at n = {n}, r = {r}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Accuracy request and hard caps for every truncated sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Requested absolute accuracy.
    pub eps_target: f64,
    /// Largest inner index any evaluator may reach.
    pub n_cap: u64,
    /// Largest outer index any evaluator may reach.
    pub r_cap: u64,
    /// Euler–Maclaurin tail corrections on the slowly convergent sums.
    pub accel: bool,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            eps_target: 1e-12,
            n_cap: 1 << 20,
            r_cap: 1 << 14,
            accel: true,
        }
    }
}

impl TruncationPolicy {
    pub fn with_eps(eps_target: f64) -> Self {
        TruncationPolicy {
            eps_target,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_target > 0.0) || !self.eps_target.is_finite() {
            return Err(Error::invalid(format!(
                "eps_target must be positive, got {}",
                self.eps_target
            )));
        }
        if self.n_cap < 8 || self.r_cap < 8 {
            return Err(Error::invalid(format!(
                "n_cap and r_cap must be at least 8, got {} and {}",
                self.n_cap, self.r_cap
            )));
        }
        Ok(())
    }

    pub fn with_doubled_caps(self) -> Self {
        TruncationPolicy {
            n_cap: self.n_cap.saturating_mul(2),
            r_cap: self.r_cap.saturating_mul(2),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    #[serde(with = "serde_scalar")]
    pub value: Scalar,
    pub budget: ErrorBudget,
    pub n_used: u64,
    pub r_used: u64,
    /// Set when `budget.total <= eps_target`.
    pub converged: bool,
}

impl EvalResult {
    pub(crate) fn new(value: Scalar, budget: ErrorBudget, n_used: u64, r_used: u64, eps: f64) -> Self {
        EvalResult {
            value,
            budget,
            n_used,
            r_used,
            converged: budget.total <= eps,
        }
    }

    /// Exact zero with an empty budget, used for the degenerate `x1 = x2`
    /// short circuits.
    pub(crate) fn exact_zero() -> Self {
        EvalResult {
            value: real(0.0),
            budget: ErrorBudget::ZERO,
            n_used: 0,
            r_used: 0,
            converged: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_accepts_positive_reals() {
        assert!(SeriesParams::real(1.0, 1.0, 0.0).check_guard().is_ok());
        assert!(SeriesParams::real(-2.0, 0.5, 3.0).check_guard().is_ok());
    }

    #[test]
    fn guard_rejects_bad_rates() {
        assert!(SeriesParams::real(1.0, 0.0, 0.0).check_guard().is_err());
        assert!(SeriesParams::real(1.0, -1.0, 0.0).check_guard().is_err());
        // y sqrt(x^2) = i: no decay along n
        let p = SeriesParams::new(Scalar::new(0.0, 1.0), Scalar::new(1.0, 0.0), real(0.0));
        assert!(p.check_guard().is_err());
    }

    #[test]
    fn guard_accepts_mild_complex() {
        let p = SeriesParams::new(Scalar::new(1.0, 0.2), Scalar::new(1.0, -0.1), Scalar::new(0.3, 0.1));
        assert!(p.check_guard().is_ok());
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::default().validate().is_ok());
        assert!(TruncationPolicy::with_eps(0.0).validate().is_err());
        let p = TruncationPolicy {
            n_cap: 4,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
