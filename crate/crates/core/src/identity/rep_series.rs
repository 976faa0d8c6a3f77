//! Sums over representation counts:
//! `R(s) = sum_N r_{a,b}(N)/sqrt(N) * bose(2 pi s sqrt N)`.
//!
//! Summing over `N` is the same as summing over the lattice points
//! `(x, y)` with `N = a x^2 + b y^2`, which gives `f(sqrt(a/b), y; 0) =
//! sqrt(b) R(y / sqrt(b))`.

use crate::error::{Error, Result};
use crate::numerics::{bose, CompensatedSum, ErrorBudget, Scalar, TWO_PI};
use crate::reps::{FormCoeffs, RepCache, RepTable};
use crate::series::{EvalResult, TruncationPolicy};

const TERM_ROUNDING: f64 = 4.0 * f64::EPSILON;

#[inline]
fn geometric(decay: f64, start: f64) -> f64 {
    (-decay * start).exp() / -(-decay).exp_m1()
}

/// Bound on the part of `R(s)` with `N > m`.
///
/// Points with `N > m` have `x > sqrt(m/(2a))` or `y > sqrt(m/(2b))`, and
/// `sqrt N >= max(sqrt m, (sqrt(a) x + sqrt(b) y)/sqrt 2)`.
pub(crate) fn tail_bound(c: FormCoeffs, s: Scalar, m: u64) -> f64 {
    let k = TWO_PI * s.re;
    let mf = m as f64;
    let (sa, sb) = ((c.a as f64).sqrt(), (c.b as f64).sqrt());
    let kp = k / std::f64::consts::SQRT_2;
    let x0 = (mf / (2.0 * c.a as f64)).sqrt().floor() + 1.0;
    let y0 = (mf / (2.0 * c.b as f64)).sqrt().floor() + 1.0;
    let lattice = geometric(kp * sa, x0) * geometric(kp * sb, 1.0) + geometric(kp * sa, 1.0) * geometric(kp * sb, y0);
    let sm = mf.sqrt();
    lattice / (sm * -(-k * sm).exp_m1())
}

/// Smallest `N_max` whose tail bound is at most `eps`.
pub(crate) fn required_nmax(c: FormCoeffs, s: Scalar, eps: f64, limit: u64) -> Result<u64> {
    if !(s.re > 0.0) {
        return Err(Error::domain(format!("representation series needs Re(s) > 0, got s = {s}")));
    }
    let start = (c.a + c.b).max(16);
    let mut hi = start;
    while tail_bound(c, s, hi) > eps {
        if hi >= limit {
            return Err(Error::Capacity {
                requested: hi.saturating_mul(2),
                limit,
            });
        }
        hi = hi.saturating_mul(2).min(limit);
    }
    let mut lo = if hi == start { 0 } else { hi / 2 };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if tail_bound(c, s, mid) <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `R(s)` over `N <= n_max` of `table`, with the tail bound as truncation.
pub(crate) fn rep_sum(table: &RepTable, s: Scalar, n_max: u64, eps: f64) -> Result<EvalResult> {
    debug_assert!(n_max <= table.n_max);
    let mut acc = CompensatedSum::new();
    for (n, count) in table.nonzero().take_while(|&(n, _)| n <= n_max) {
        let sn = (n as f64).sqrt();
        let t = count as f64 * bose(TWO_PI * s * sn)? / sn;
        acc.add_with_error(t, TERM_ROUNDING * t.norm());
    }
    let budget = ErrorBudget::new(tail_bound(table.coeffs, s, n_max), acc.rounding());
    Ok(EvalResult::new(acc.value(), budget, n_max, 0, eps))
}

/// `R(s)` to within `eps`, with the table taken from `cache`.
pub(crate) fn rep_series(cache: &RepCache, c: FormCoeffs, s: Scalar, eps: f64) -> Result<EvalResult> {
    let m = required_nmax(c, s, eps / 2.0, cache.limit())?;
    let table = cache.get(c, m)?;
    rep_sum(&table, s, m, eps)
}

/// `f(sqrt(a/b), y; 0)` through the representation counts of `a x^2 + b y^2`.
pub fn bridge_rep_series(cache: &RepCache, c: FormCoeffs, y: Scalar, pol: &TruncationPolicy) -> Result<EvalResult> {
    pol.validate()?;
    FormCoeffs::new(c.a, c.b)?;
    if !(y.re > 0.0) {
        return Err(Error::domain(format!("bridge needs Re(y) > 0, got {y}")));
    }
    let sb = (c.b as f64).sqrt();
    let eps = pol.eps_target;
    let r = rep_series(cache, c, y / sb, eps / sb)?;
    Ok(EvalResult::new(sb * r.value, r.budget.scaled(sb), r.n_used, 0, eps))
}
