//! Correction sums: differences of reciprocal radicals that only converge
//! when summed as groups.

use super::grouped::{adaptive_inner, GroupedSeries, Member, RadicalTerm};
use super::{EvalResult, TruncationPolicy};
use crate::error::{Error, Result};
use crate::numerics::{real, ErrorBudget, Scalar};

fn require_nonzero(x1: Scalar, x2: Scalar) -> Result<()> {
    if x1 == Scalar::new(0.0, 0.0) || x2 == Scalar::new(0.0, 0.0) {
        return Err(Error::domain("x1 and x2 must be nonzero"));
    }
    Ok(())
}

fn term(coef: Scalar, n2: Scalar, r2: Scalar) -> RadicalTerm {
    RadicalTerm::new(coef, n2, r2, real(1.0))
}

/// `sum_{n>=1} [1/(x1 sqrt(x2^2 n^2 + w^2)) - 1/(x2 sqrt(x1^2 n^2 + w^2))]`.
///
/// Each half diverges harmonically; the pair decays like `w^2/n^3`.
pub fn eval_corr1d(x1: Scalar, x2: Scalar, w: Scalar, pol: &TruncationPolicy) -> Result<EvalResult> {
    pol.validate()?;
    require_nonzero(x1, x2)?;
    if x1 == x2 || w == Scalar::new(0.0, 0.0) {
        return Ok(EvalResult::exact_zero());
    }
    let w_sq = w * w;
    let members = [
        Member { coef: x1.inv(), a: x2 * x2, b: w_sq },
        Member { coef: -x2.inv(), a: x1 * x1, b: w_sq },
    ];
    let eps = pol.eps_target;
    let (s, ok) = adaptive_inner(&members, eps / 2.0, pol)?;
    let result = EvalResult::new(s.value, ErrorBudget::new(s.truncation, s.rounding), s.n_cut, 0, eps);
    if !ok {
        return Err(Error::not_converged("corr1d: n_cap reached", Some(result)));
    }
    Ok(result)
}

/// Per-row unit obtained by shifting `w -> sqrt(r^2 + w^2)` in the
/// one-dimensional transformation: half the pair sum, the log constants and
/// the two `1/sqrt(r^2 + w^2)` terms.
pub(crate) fn bracket21_series(x1: Scalar, x2: Scalar) -> GroupedSeries {
    let one = real(1.0);
    let p = x1 * x2;
    GroupedSeries {
        inner: vec![term(x1.inv(), x2 * x2, one), term(-x2.inv(), x1 * x1, one)],
        inner_weight: real(0.5),
        outer: vec![term(0.25 * x1.inv(), one, one), term(-0.25 * x2.inv(), one, one)],
        constant: x1.ln() / (2.0 * p) - x2.ln() / (2.0 * p),
    }
}

/// The eight-member family of the two-variable relation, weighted by 1/2.
/// Members are ordered in the pairs that swap into each other under
/// `x1 <-> x2`.
pub(crate) fn corr2d_series(x1: Scalar, x2: Scalar) -> GroupedSeries {
    let one = real(1.0);
    let p = x1 * x2;
    let pp = p * p;
    let (s1, s2) = (x1 * x1, x2 * x2);
    GroupedSeries {
        inner: vec![
            term(x2, s2, one),
            term(-x1, s1, one),
            term(-p, pp, s1),
            term(p, pp, s2),
            term(one, one, s1),
            term(-one, one, s2),
            term(x1, s1, pp),
            term(-x2, s2, pp),
        ],
        inner_weight: real(0.5),
        outer: vec![],
        constant: real(0.0),
    }
}

/// Per-row unit of the second elimination step: four radicals, the
/// constant `ln x1/(x1 x2)` and two boundary radicals.
pub(crate) fn bracket23_series(x1: Scalar, x2: Scalar) -> GroupedSeries {
    let one = real(1.0);
    let p = x1 * x2;
    let s1 = x1 * x1;
    GroupedSeries {
        inner: vec![
            term(x1.inv(), x2 * x2, one),
            term(-x2.inv(), s1, one),
            term(-one, p * p, s1),
            term(p.inv(), one, s1),
        ],
        inner_weight: real(0.5),
        outer: vec![term(-0.25 * x2.inv(), one, one), term(0.25 * p.inv(), one, s1)],
        constant: x1.ln() / p,
    }
}

/// One row `r` of the shifted-transformation bracket.
pub fn eval_bracket21(x1: Scalar, x2: Scalar, w: Scalar, r: u64, pol: &TruncationPolicy) -> Result<EvalResult> {
    pol.validate()?;
    require_nonzero(x1, x2)?;
    if r == 0 {
        return Err(Error::invalid("bracket row index must be at least 1"));
    }
    if x1 == x2 {
        return Ok(EvalResult::exact_zero());
    }
    bracket21_series(x1, x2).row_value(r, w, pol)
}

/// `sum_{r>=1}` of [`eval_bracket21`].
pub fn sum_brackets21(x1: Scalar, x2: Scalar, w: Scalar, pol: &TruncationPolicy) -> Result<EvalResult> {
    pol.validate()?;
    require_nonzero(x1, x2)?;
    if x1 == x2 {
        return Ok(EvalResult::exact_zero());
    }
    bracket21_series(x1, x2).sum_rows(w, pol)
}

/// `sum_{r>=1}` of the second-step bracket; rows decay like `w^2/r^3`.
pub fn sum_brackets23(x1: Scalar, x2: Scalar, w: Scalar, pol: &TruncationPolicy) -> Result<EvalResult> {
    pol.validate()?;
    require_nonzero(x1, x2)?;
    bracket23_series(x1, x2).sum_rows(w, pol)
}

/// `(1/2) sum_r sum_n` of the eight-member group, inner index first.
pub fn eval_corr2d(x1: Scalar, x2: Scalar, w: Scalar, pol: &TruncationPolicy) -> Result<EvalResult> {
    pol.validate()?;
    require_nonzero(x1, x2)?;
    if x1 == x2 {
        return Ok(EvalResult::exact_zero());
    }
    corr2d_series(x1, x2).sum_rows(w, pol)
}
