//! The exponentially convergent Bose-weighted sums: the double series
//! `f(x, y; w) = sum_{n,r>=1} bose(2 pi y rho)/rho` with
//! `rho = sqrt(x^2 n^2 + r^2 + w^2)`, and its one-index slice.

use std::f64::consts::{PI, SQRT_2};

use super::{EvalResult, SeriesParams, TruncationPolicy, GUARD_WINDOW};
use crate::error::{Error, Result};
use crate::numerics::{bose, principal_sqrt, radical, CompensatedSum, ErrorBudget, Scalar, TWO_PI};

/// Loop nesting used when summing the rectangle `n <= N, r <= R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SumOrder {
    /// `r` outer, `n` inner.
    #[default]
    RowMajor,
    /// `n` outer, `r` inner.
    ColumnMajor,
}

/// Relative error charged to the evaluation of one kernel term.
const TERM_ROUNDING: f64 = 4.0 * f64::EPSILON;

#[inline]
fn f_term(p: &SeriesParams, n: u64, r: u64) -> Result<Scalar> {
    let rho = radical(p.x, n, r, p.w)?;
    Ok(bose(TWO_PI * p.y * rho)? / rho)
}

/// `1 / (rho (1 - e^{-2 pi y rho}))`: the non-exponential part of a term.
#[inline]
fn envelope(rho: f64, y: f64) -> f64 {
    1.0 / (rho * -(-TWO_PI * y * rho).exp_m1())
}

/// `q^start / (1 - q)` with `q = e^{-decay}`.
#[inline]
fn geometric(decay: f64, start: u64) -> f64 {
    (-decay * start as f64).exp() / -(-decay).exp_m1()
}

/// Smallest cutoffs `(N, R)` whose omitted region is bounded by `eps/2`,
/// using `rho >= (|x| n + r)/sqrt 2` and the monotone envelope.
fn real_cutoffs(p: &SeriesParams, eps: f64, pol: &TruncationPolicy) -> (u64, u64, f64, bool) {
    let (x, y, w) = (p.x.re.abs(), p.y.re, p.w.re);
    let a = SQRT_2 * PI * y * x;
    let b = SQRT_2 * PI * y;
    let rho = |n: u64, r: u64| ((x * n as f64).powi(2) + (r * r) as f64 + w * w).sqrt();
    let tail_n = |n: u64| envelope(rho(n + 1, 1), y) * geometric(a, n + 1) * geometric(b, 1);
    let tail_r = |r: u64| envelope(rho(1, r + 1), y) * geometric(a, 1) * geometric(b, r + 1);

    let mut within_caps = true;
    let mut n_cut = 1;
    while tail_n(n_cut) > eps / 4.0 {
        if n_cut >= pol.n_cap {
            within_caps = false;
            break;
        }
        n_cut += 1;
    }
    let mut r_cut = 1;
    while tail_r(r_cut) > eps / 4.0 {
        if r_cut >= pol.r_cap {
            within_caps = false;
            break;
        }
        r_cut += 1;
    }
    (n_cut, r_cut, tail_n(n_cut) + tail_r(r_cut), within_caps)
}

fn sum_rectangle(p: &SeriesParams, n_cut: u64, r_cut: u64, order: SumOrder) -> Result<CompensatedSum> {
    let mut acc = CompensatedSum::new();
    let (outer, inner) = match order {
        SumOrder::RowMajor => (r_cut, n_cut),
        SumOrder::ColumnMajor => (n_cut, r_cut),
    };
    for i in 1..=outer {
        for j in 1..=inner {
            let (n, r) = match order {
                SumOrder::RowMajor => (j, i),
                SumOrder::ColumnMajor => (i, j),
            };
            let t = f_term(p, n, r)?;
            acc.add_with_error(t, TERM_ROUNDING * t.norm());
        }
    }
    Ok(acc)
}

/// Complex parameters: rows and columns are cut once the asymptotic decay
/// ratios predict a tail below the target. The truncation is an estimate.
fn eval_f_complex(p: &SeriesParams, pol: &TruncationPolicy) -> Result<EvalResult> {
    let eps = pol.eps_target;
    let xhat = principal_sqrt(p.x * p.x);
    let qn = (-TWO_PI * (p.y * xhat).re).exp();
    let qr = (-TWO_PI * p.y.re).exp();
    let mut acc = CompensatedSum::new();
    let mut truncation = 0.0;
    let mut n_used = 0;
    let mut r = 0;
    loop {
        r += 1;
        if r > pol.r_cap {
            let partial = EvalResult::new(acc.value(), ErrorBudget::new(f64::INFINITY, acc.rounding()), n_used, pol.r_cap, eps);
            return Err(Error::not_converged("f: r_cap reached", Some(partial)));
        }
        let mut n = 0;
        let mut first = 0.0;
        loop {
            n += 1;
            if n > pol.n_cap {
                let partial = EvalResult::new(acc.value(), ErrorBudget::new(f64::INFINITY, acc.rounding()), pol.n_cap, r, eps);
                return Err(Error::not_converged("f: n_cap reached", Some(partial)));
            }
            let t = f_term(p, n, r)?;
            acc.add_with_error(t, TERM_ROUNDING * t.norm());
            if n == 1 {
                first = t.norm();
            }
            let tail = t.norm() * qn / (1.0 - qn);
            if n > GUARD_WINDOW && tail <= eps * 1e-3 {
                truncation += tail;
                break;
            }
        }
        n_used = n_used.max(n);
        let row_tail = first * qr / ((1.0 - qr) * (1.0 - qn));
        if r > GUARD_WINDOW && row_tail <= eps / 4.0 {
            truncation += row_tail;
            break;
        }
    }
    let budget = ErrorBudget::new(truncation, acc.rounding());
    Ok(EvalResult::new(acc.value(), budget, n_used, r, eps))
}

/// Evaluates `f(x, y; w)` with row-major summation.
pub fn eval_f(p: &SeriesParams, pol: &TruncationPolicy) -> Result<EvalResult> {
    eval_f_ordered(p, pol, SumOrder::RowMajor)
}

/// Evaluates `f(x, y; w)` summing the cut rectangle in the given order.
///
/// For real parameters the cutoffs come from a geometric majorant and the
/// reported truncation is a bound on the omitted region.
pub fn eval_f_ordered(p: &SeriesParams, pol: &TruncationPolicy, order: SumOrder) -> Result<EvalResult> {
    pol.validate()?;
    p.check_guard()?;
    if !p.is_real() {
        return eval_f_complex(p, pol);
    }
    let eps = pol.eps_target;
    let (n_cut, r_cut, truncation, within_caps) = real_cutoffs(p, eps, pol);
    let acc = sum_rectangle(p, n_cut, r_cut, order)?;
    let result = EvalResult::new(
        acc.value(),
        ErrorBudget::new(truncation, acc.rounding()),
        n_cut,
        r_cut,
        eps,
    );
    if !within_caps {
        return Err(Error::not_converged(
            format!("f: caps ({}, {}) reached before the tail bound met {eps:e}", pol.n_cap, pol.r_cap),
            Some(result),
        ));
    }
    Ok(result)
}

/// Evaluates `S(x, beta, w) = sum_{n>=1} bose(2 pi beta rho_n)/rho_n` with
/// `rho_n = sqrt(x^2 n^2 + w^2)`.
pub fn eval_s1d(x: Scalar, beta: Scalar, w: Scalar, pol: &TruncationPolicy) -> Result<EvalResult> {
    pol.validate()?;
    let eps = pol.eps_target;
    let xhat = principal_sqrt(x * x);
    if !((beta * xhat).re > 0.0) {
        return Err(Error::domain(format!(
            "guard: Re(beta*sqrt(x^2)) is not positive at x = {x}, beta = {beta}"
        )));
    }
    for n in 1..=GUARD_WINDOW {
        let rho = radical(x, n, 0, w)?;
        if !((beta * rho).re > 0.0) {
            return Err(Error::domain(format!("guard: Re(beta*rho) <= 0 at n = {n}")));
        }
    }
    let term = |n: u64| -> Result<Scalar> {
        let rho = radical(x, n, 0, w)?;
        Ok(bose(TWO_PI * beta * rho)? / rho)
    };

    let real_params = x.im == 0.0 && beta.im == 0.0 && w.im == 0.0;
    let mut acc = CompensatedSum::new();
    let (n_cut, truncation, within_caps) = if real_params {
        let (ax, b, wr) = (x.re.abs(), beta.re, w.re);
        let decay = TWO_PI * b * ax;
        let tail = |n: u64| {
            let rho = ((ax * (n + 1) as f64).powi(2) + wr * wr).sqrt();
            envelope(rho, b) * geometric(decay, n + 1)
        };
        let mut n_cut = 1;
        let mut ok = true;
        while tail(n_cut) > eps / 2.0 {
            if n_cut >= pol.n_cap {
                ok = false;
                break;
            }
            n_cut += 1;
        }
        for n in 1..=n_cut {
            let t = term(n)?;
            acc.add_with_error(t, TERM_ROUNDING * t.norm());
        }
        (n_cut, tail(n_cut), ok)
    } else {
        let q = (-TWO_PI * (beta * xhat).re).exp();
        let mut n = 0;
        let mut est;
        loop {
            n += 1;
            let t = term(n)?;
            acc.add_with_error(t, TERM_ROUNDING * t.norm());
            est = t.norm() * q / (1.0 - q);
            if (n > GUARD_WINDOW && est <= eps / 2.0) || n >= pol.n_cap {
                break;
            }
        }
        (n, est, est <= eps / 2.0)
    };
    let result = EvalResult::new(acc.value(), ErrorBudget::new(truncation, acc.rounding()), n_cut, 0, eps);
    if !within_caps {
        return Err(Error::not_converged("s1d: n_cap reached", Some(result)));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::real;

    fn direct_f(x: f64, y: f64, w: f64, cut: u64) -> f64 {
        let mut s = 0.0;
        for r in 1..=cut {
            for n in 1..=cut {
                let rho = ((x * n as f64).powi(2) + (r * r) as f64 + w * w).sqrt();
                s += 1.0 / (rho * (TWO_PI * y * rho).exp_m1());
            }
        }
        s
    }

    #[test]
    fn matches_direct_sum_at_unit_point() {
        let pol = TruncationPolicy::default();
        let v = eval_f(&SeriesParams::real(1.0, 1.0, 0.0), &pol).unwrap();
        assert!(v.converged);
        assert!((v.value.re - direct_f(1.0, 1.0, 0.0, 40)).abs() < 1e-15);
        assert!(v.budget.total < 1e-12);
    }

    #[test]
    fn large_rate_is_first_term() {
        let pol = TruncationPolicy::default();
        let v = eval_f(&SeriesParams::real(1.0, 20.0, 0.0), &pol).unwrap();
        let s2 = 2f64.sqrt();
        let first = bose(real(TWO_PI * 20.0 * s2)).unwrap() / s2;
        assert_eq!(v.value, first);
    }

    #[test]
    fn loop_orders_agree() {
        let pol = TruncationPolicy::default();
        for &(x, y, w) in &[(1.0, 1.0, 0.0), (0.4, 0.7, 1.3), (2.5, 0.3, 0.0)] {
            let p = SeriesParams::real(x, y, w);
            let a = eval_f_ordered(&p, &pol, SumOrder::RowMajor).unwrap();
            let b = eval_f_ordered(&p, &pol, SumOrder::ColumnMajor).unwrap();
            assert!((a.value - b.value).norm() < 1e-13);
        }
    }

    #[test]
    fn caps_too_small_report_not_converged() {
        let pol = TruncationPolicy {
            n_cap: 8,
            r_cap: 8,
            ..Default::default()
        };
        let err = eval_f(&SeriesParams::real(1.0, 0.05, 0.0), &pol).unwrap_err();
        match err {
            Error::NotConverged { partial: Some(p), .. } => assert!(!p.converged),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn guard_failure_is_domain_error() {
        let pol = TruncationPolicy::default();
        assert!(matches!(
            eval_f(&SeriesParams::real(1.0, -1.0, 0.0), &pol),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn s1d_first_term_dominates() {
        let pol = TruncationPolicy::default();
        let v = eval_s1d(real(3.0), real(5.0), real(4.0), &pol).unwrap();
        let first = bose(TWO_PI * real(5.0) * real(5.0)).unwrap() / 5.0;
        assert!((v.value - first).norm() <= 4.0 * f64::EPSILON * first.norm());
    }

    #[test]
    fn s1d_complex_rate_converges() {
        let pol = TruncationPolicy::default();
        let z = eval_s1d(real(1.0), Scalar::new(1.0, 0.3), real(0.5), &pol).unwrap();
        let mut direct = Scalar::new(0.0, 0.0);
        for n in 1..=60u64 {
            let rho = ((n * n) as f64 + 0.25).sqrt();
            direct += bose(TWO_PI * Scalar::new(1.0, 0.3) * rho).unwrap() / rho;
        }
        assert!((z.value - direct).norm() < 1e-13);
    }

    #[test]
    fn complex_f_matches_direct() {
        let pol = TruncationPolicy::default();
        let p = SeriesParams::new(Scalar::new(1.0, 0.2), Scalar::new(0.9, -0.1), Scalar::new(0.3, 0.1));
        let v = eval_f(&p, &pol).unwrap();
        let mut direct = Scalar::new(0.0, 0.0);
        for r in 1..=40u64 {
            for n in 1..=40u64 {
                let rho = radical(p.x, n, r, p.w).unwrap();
                direct += bose(TWO_PI * p.y * rho).unwrap() / rho;
            }
        }
        assert!((v.value - direct).norm() < 1e-12);
    }
}
