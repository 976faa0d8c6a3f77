//! Grouped radical families.
//!
//! A family is a list of members `c / sqrt(A n^2 + B)` whose individual
//! sums over `n` diverge like `c/(sqrt(A) n)` but whose group converges
//! because `sum_i c_i / sqrt(A_i) = 0`. Members are always combined per
//! index before anything is added across indices.
//!
//! Inner tail: for `n > N` the group is replaced by its exact integral
//!
//! ```text
//! int_N^inf sum_i c_i (A_i t^2 + B_i)^(-1/2) dt = -sum_i s_i h(B_i / (A_i N^2)),
//! s_i = c_i / sqrt(A_i),   h(u) = ln((1 + sqrt(1 + u)) / 2)
//! ```
//!
//! plus Euler–Maclaurin boundary terms through `g'''`.
//!
//! Outer tail: with `B_i = alpha_i r^2 + beta_i w^2`, Poisson summation gives
//! the per-row sum as `int_0^inf g - g(0)/2` up to terms exponentially small
//! in `r`, which expands into a power series in `1/r` with closed-form
//! coefficients. Rows beyond the cut are summed from that series.

use std::collections::VecDeque;

use rayon::prelude::*;

use super::{EvalResult, TruncationPolicy};
use crate::error::{Error, Result};
use crate::numerics::{ln1p, principal_sqrt, CompensatedSum, ErrorBudget, Scalar};

const TERM_ROUNDING: f64 = 4.0 * f64::EPSILON;
/// Highest power of `1/r` kept in the outer asymptotic series.
const ASYMPTOTIC_ORDER: usize = 24;
/// Relative size below which a leading asymptotic coefficient counts as
/// cancelled.
const CANCELLATION_TOL: f64 = 1e-9;
const MIN_INNER_CUT: u64 = 64;
const ROW_BATCH: u64 = 32;

/// One member `coef / sqrt(n2 n^2 + r2 r^2 + w2 w^2)` of a radical family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadicalTerm {
    pub coef: Scalar,
    pub n2: Scalar,
    pub r2: Scalar,
    pub w2: Scalar,
}

impl RadicalTerm {
    pub fn new(coef: Scalar, n2: Scalar, r2: Scalar, w2: Scalar) -> Self {
        RadicalTerm { coef, n2, r2, w2 }
    }
}

/// Inner member at a fixed outer index: `coef / sqrt(a n^2 + b)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Member {
    pub coef: Scalar,
    pub a: Scalar,
    pub b: Scalar,
}

impl Member {
    #[inline]
    fn value(&self, t: f64) -> Result<Scalar> {
        let q = self.a * (t * t) + self.b;
        if q == Scalar::new(0.0, 0.0) {
            return Err(Error::domain(format!("vanishing radical at n = {t}")));
        }
        Ok(self.coef / principal_sqrt(q))
    }

    /// `coef / sqrt(a)`, the coefficient of the `1/n` asymptote.
    fn slope(&self) -> Scalar {
        self.coef / principal_sqrt(self.a)
    }
}

/// Group value at `t`, combining members pairwise, with the sum of member
/// magnitudes for the rounding estimate.
#[inline]
fn group_value(members: &[Member], t: f64) -> Result<(Scalar, f64)> {
    let mut total = Scalar::new(0.0, 0.0);
    let mut mag = 0.0;
    for pair in members.chunks(2) {
        let mut p = Scalar::new(0.0, 0.0);
        for m in pair {
            let v = m.value(t)?;
            mag += v.norm();
            p += v;
        }
        total += p;
    }
    Ok((total, mag))
}

fn pairwise_sum(values: impl Iterator<Item = Scalar>) -> Scalar {
    let v: Vec<Scalar> = values.collect();
    v.chunks(2)
        .map(|p| p.iter().fold(Scalar::new(0.0, 0.0), |acc, &x| acc + x))
        .fold(Scalar::new(0.0, 0.0), |acc, x| acc + x)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct InnerSum {
    pub value: Scalar,
    pub truncation: f64,
    pub rounding: f64,
    pub n_cut: u64,
}

/// `h(u) = asinh(z) - ln(2z)` with `u = 1/z^2`, cancellation-free.
#[inline]
fn asinh_excess(u: Scalar) -> Scalar {
    ln1p(u / (2.0 * (principal_sqrt(u + 1.0) + 1.0)))
}

fn check_cancellation(members: &[Member]) -> Result<()> {
    let total = pairwise_sum(members.iter().map(Member::slope));
    let scale: f64 = members.iter().map(|m| m.slope().norm()).sum();
    if total.norm() > CANCELLATION_TOL * scale {
        return Err(Error::domain(format!(
            "radical group does not cancel at order 1/n (residual slope {total})"
        )));
    }
    Ok(())
}

/// Sums the group for `n = 1..=n_cut` and accounts for `n > n_cut`.
pub(crate) fn inner_sum(members: &[Member], n_cut: u64, accel: bool) -> Result<InnerSum> {
    check_cancellation(members)?;
    let mut acc = CompensatedSum::new();
    for n in 1..=n_cut {
        let (g, mag) = group_value(members, n as f64)?;
        acc.add_with_error(g, TERM_ROUNDING * mag);
    }

    let t = n_cut as f64;
    let pieces: Vec<Scalar> = members
        .iter()
        .map(|m| m.slope() * asinh_excess(m.b / (m.a * (t * t))))
        .collect();
    let integral = -pairwise_sum(pieces.iter().copied());
    let integral_mag: f64 = pieces.iter().map(|p| p.norm()).sum();
    let (g0, g0_mag) = group_value(members, t)?;
    let mut g1 = Scalar::new(0.0, 0.0);
    let mut g3 = Scalar::new(0.0, 0.0);
    for m in members {
        let q = m.a * (t * t) + m.b;
        let sq = principal_sqrt(q);
        let q32 = q * sq;
        let q52 = q32 * q;
        let q72 = q52 * q;
        g1 -= m.coef * m.a * t / q32;
        g3 += 9.0 * m.coef * m.a * m.a * t / q52 - 15.0 * m.coef * m.a * m.a * m.a * (t * t * t) / q72;
    }
    let tail = integral - g0 / 2.0 - g1 / 12.0 + g3 / 720.0;
    let last_correction = g3.norm() / 720.0;
    let tail_rounding = TERM_ROUNDING * (g0_mag + integral_mag);

    let (value, truncation) = if accel {
        (acc.value() + tail, last_correction)
    } else {
        (acc.value(), tail.norm() + last_correction)
    };
    Ok(InnerSum {
        value,
        truncation,
        rounding: acc.rounding() + if accel { tail_rounding } else { 0.0 },
        n_cut,
    })
}

/// Starting inner cut: eight times past the knee `sqrt(|B/A|)` of the
/// widest member, and at least 64.
pub(crate) fn initial_cut(members: &[Member]) -> u64 {
    let knee = members
        .iter()
        .map(|m| (m.b.norm() / m.a.norm()).sqrt())
        .fold(0.0f64, f64::max);
    MIN_INNER_CUT.max(8 * knee.ceil() as u64)
}

/// Doubles the inner cut until the inner truncation drops below `eps`
/// or the cap is reached. The flag reports whether `eps` was met.
pub(crate) fn adaptive_inner(members: &[Member], eps: f64, pol: &TruncationPolicy) -> Result<(InnerSum, bool)> {
    let mut n_cut = initial_cut(members).min(pol.n_cap);
    loop {
        let s = inner_sum(members, n_cut, pol.accel)?;
        if s.truncation <= eps {
            return Ok((s, true));
        }
        if n_cut >= pol.n_cap {
            return Ok((s, false));
        }
        n_cut = n_cut.saturating_mul(2).min(pol.n_cap);
    }
}

/// A grouped double series
/// `sum_r [ weight * sum_n inner(n, r) + sum_j outer_j(r) + constant ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSeries {
    /// Summed over `n >= 1` as one group; listed in antisymmetric pairs.
    pub inner: Vec<RadicalTerm>,
    pub inner_weight: Scalar,
    /// Added once per row; the `n2` field is ignored.
    pub outer: Vec<RadicalTerm>,
    pub constant: Scalar,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Row {
    pub value: Scalar,
    pub truncation: f64,
    pub rounding: f64,
    pub n_cut: u64,
    pub within_caps: bool,
}

/// Power-series model of a row, `sum_{p>=3} coeffs[p] r^-p`.
#[derive(Debug, Clone)]
pub(crate) struct Asymptotics {
    coeffs: Vec<Scalar>,
    radius: f64,
}

/// `sum_{r > cut} r^-p`: 32 explicit terms, then Euler–Maclaurin.
fn power_tail(cut: u64, p: usize) -> f64 {
    let pf = p as f64;
    let mut s = 0.0;
    for r in (cut + 1)..=(cut + 32) {
        s += (r as f64).powf(-pf);
    }
    let k = (cut + 32) as f64;
    s + k.powf(1.0 - pf) / (pf - 1.0) - 0.5 * k.powf(-pf) + pf * k.powf(-pf - 1.0) / 12.0
        - pf * (pf + 1.0) * (pf + 2.0) * k.powf(-pf - 3.0) / 720.0
        + pf * (pf + 1.0) * (pf + 2.0) * (pf + 3.0) * (pf + 4.0) * k.powf(-pf - 5.0) / 30240.0
}

impl Asymptotics {
    pub fn eval(&self, r: u64) -> Scalar {
        let inv = 1.0 / r as f64;
        let mut v = Scalar::new(0.0, 0.0);
        for p in (3..=ASYMPTOTIC_ORDER).rev() {
            v = (v + self.coeffs[p]) * inv;
        }
        v * inv * inv
    }

    /// Modelled sum over `r > cut` and a bound on the series remainder.
    pub fn tail(&self, cut: u64) -> (Scalar, f64, f64) {
        let mut acc = CompensatedSum::new();
        for p in 3..=ASYMPTOTIC_ORDER {
            acc.add(self.coeffs[p] * power_tail(cut, p));
        }
        let remainder = 2.0
            * (self.coeffs[ASYMPTOTIC_ORDER + 1].norm() * power_tail(cut, ASYMPTOTIC_ORDER + 1)
                + self.coeffs[ASYMPTOTIC_ORDER + 2].norm() * power_tail(cut, ASYMPTOTIC_ORDER + 2));
        (acc.value(), remainder, acc.rounding())
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[cfg(test)]
    pub fn coefficient(&self, p: usize) -> Scalar {
        self.coeffs[p]
    }
}

impl GroupedSeries {
    pub(crate) fn members_at(&self, r: u64, w_sq: Scalar) -> Vec<Member> {
        let rr = (r * r) as f64;
        self.inner
            .iter()
            .map(|t| Member {
                coef: t.coef,
                a: t.n2,
                b: t.r2 * rr + t.w2 * w_sq,
            })
            .collect()
    }

    pub(crate) fn row(&self, r: u64, w_sq: Scalar, eps_row: f64, pol: &TruncationPolicy) -> Result<Row> {
        let members = self.members_at(r, w_sq);
        let (inner, within_caps) = adaptive_inner(&members, eps_row / self.inner_weight.norm().max(1e-300), pol)?;
        let rr = (r * r) as f64;
        let mut outer_mag = 0.0;
        let outer = pairwise_sum(self.outer.iter().map(|t| {
            let v = t.coef / principal_sqrt(t.r2 * rr + t.w2 * w_sq);
            outer_mag += v.norm();
            v
        }));
        let weighted = self.inner_weight * inner.value;
        let value = weighted + outer + self.constant;
        let rounding = self.inner_weight.norm() * inner.rounding
            + TERM_ROUNDING * (weighted.norm() + outer_mag + self.constant.norm());
        Ok(Row {
            value,
            truncation: self.inner_weight.norm() * inner.truncation,
            rounding,
            n_cut: inner.n_cut,
            within_caps,
        })
    }

    /// Value of a single row `r` as an [`EvalResult`].
    pub fn row_value(&self, r: u64, w: Scalar, pol: &TruncationPolicy) -> Result<EvalResult> {
        pol.validate()?;
        let row = self.row(r, w * w, pol.eps_target, pol)?;
        let result = EvalResult::new(
            row.value,
            ErrorBudget::new(row.truncation, row.rounding),
            row.n_cut,
            r,
            pol.eps_target,
        );
        if !row.within_caps {
            return Err(Error::not_converged("inner n_cap reached", Some(result)));
        }
        Ok(result)
    }

    /// Coefficients of the `1/r` expansion of a row. Fails when the
    /// orders `r^0`, `ln r`, `r^-1`, `r^-2` do not cancel, i.e. when the
    /// outer sum would diverge.
    pub(crate) fn asymptotics(&self, w_sq: Scalar) -> Result<Asymptotics> {
        let len = ASYMPTOTIC_ORDER + 3;
        let mut coeffs = vec![Scalar::new(0.0, 0.0); len];
        let mut scales = vec![0.0f64; len];
        let half_w = self.inner_weight * 0.5;

        struct Prep {
            slope: Scalar,
            per_r: Scalar,
            log_ratio: Scalar,
            eps: Scalar,
        }
        let mut radius: f64 = 0.0;
        let mut inner = Vec::with_capacity(self.inner.len());
        for t in &self.inner {
            if t.r2 == Scalar::new(0.0, 0.0) {
                return Err(Error::domain("row asymptotics need every member to depend on r"));
            }
            let eps = t.w2 * w_sq / t.r2;
            radius = radius.max(eps.norm().sqrt());
            inner.push(Prep {
                slope: t.coef / principal_sqrt(t.n2),
                per_r: t.coef / principal_sqrt(t.r2),
                log_ratio: (t.n2 / t.r2).ln(),
                eps,
            });
        }
        let mut outer = Vec::with_capacity(self.outer.len());
        for t in &self.outer {
            if t.r2 == Scalar::new(0.0, 0.0) {
                return Err(Error::domain("row asymptotics need every outer term to depend on r"));
            }
            let eta = t.w2 * w_sq / t.r2;
            radius = radius.max(eta.norm().sqrt());
            outer.push((t.coef / principal_sqrt(t.r2), eta));
        }

        // r^0 and ln r
        let c0 = half_w * pairwise_sum(inner.iter().map(|p| p.slope * p.log_ratio)) + self.constant;
        let s0 = half_w.norm() * inner.iter().map(|p| (p.slope * p.log_ratio).norm()).sum::<f64>()
            + self.constant.norm();
        let clog = -self.inner_weight * pairwise_sum(inner.iter().map(|p| p.slope));
        let slog = self.inner_weight.norm() * inner.iter().map(|p| p.slope.norm()).sum::<f64>();

        let mut binom = 1.0; // binom(-1/2, k)
        for k in 0..=len / 2 {
            if k > 0 {
                binom *= (-0.5 - (k as f64 - 1.0)) / k as f64;
            }
            let odd = 2 * k + 1;
            if odd < len {
                let a = -half_w * pairwise_sum(inner.iter().map(|p| p.per_r * p.eps.powu(k as u32)));
                let b = pairwise_sum(outer.iter().map(|(d, eta)| d * eta.powu(k as u32)));
                coeffs[odd] = binom * (a + b);
                scales[odd] = binom.abs()
                    * (half_w.norm() * inner.iter().map(|p| (p.per_r * p.eps.powu(k as u32)).norm()).sum::<f64>()
                        + outer.iter().map(|(d, eta)| (d * eta.powu(k as u32)).norm()).sum::<f64>());
            }
            let even = 2 * k;
            if k >= 1 && even < len {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                let kf = k as f64;
                coeffs[even] = -half_w * sign / kf * pairwise_sum(inner.iter().map(|p| p.slope * p.eps.powu(k as u32)));
                scales[even] = half_w.norm() / kf
                    * inner.iter().map(|p| (p.slope * p.eps.powu(k as u32)).norm()).sum::<f64>();
            }
        }

        let leading = [("r^0", c0, s0), ("ln r", clog, slog), ("r^-1", coeffs[1], scales[1]), ("r^-2", coeffs[2], scales[2])];
        for (label, c, s) in leading {
            if c.norm() > CANCELLATION_TOL * s.max(f64::MIN_POSITIVE) {
                return Err(Error::domain(format!(
                    "outer sum diverges: {label} coefficient {c} does not cancel"
                )));
            }
        }
        coeffs[0] = Scalar::new(0.0, 0.0);
        coeffs[1] = Scalar::new(0.0, 0.0);
        coeffs[2] = Scalar::new(0.0, 0.0);
        Ok(Asymptotics { coeffs, radius })
    }

    /// Sums all rows `r >= 1`.
    ///
    /// With `accel`, rows are compared with their asymptotic model and the
    /// sum stops once three consecutive rows match it to
    /// `max(eps/(10 r), 4 * row rounding)`; the modelled tail is added.
    /// Without `accel`, the sum stops once three consecutive rows are below
    /// that threshold and the remaining tail is only estimated from an
    /// `r^-3` model.
    pub fn sum_rows(&self, w: Scalar, pol: &TruncationPolicy) -> Result<EvalResult> {
        pol.validate()?;
        let eps = pol.eps_target;
        let w_sq = w * w;
        let model = if pol.accel { Some(self.asymptotics(w_sq)?) } else { None };
        let r_min = match &model {
            Some(m) => 8u64.max((2.0 * m.radius()).ceil() as u64 + 1),
            None => 8,
        };

        let mut acc = CompensatedSum::new();
        let mut trunc_inner = 0.0;
        let mut n_used = 0;
        let mut streak = 0;
        let mut recent: VecDeque<f64> = VecDeque::with_capacity(3);
        let mut last_row = Scalar::new(0.0, 0.0);
        let mut next = 1u64;
        let mut stop_at = None;

        'outer: while next <= pol.r_cap {
            let hi = (next + ROW_BATCH - 1).min(pol.r_cap);
            let rows: Vec<Result<Row>> = (next..=hi)
                .into_par_iter()
                .map(|r| self.row(r, w_sq, eps / (8.0 * (r * r) as f64), pol))
                .collect();
            for (r, row) in (next..=hi).zip(rows) {
                let row = row?;
                n_used = n_used.max(row.n_cut);
                acc.add_with_error(row.value, row.rounding);
                trunc_inner += row.truncation;
                if !row.within_caps {
                    let partial = EvalResult::new(
                        acc.value(),
                        ErrorBudget::new(f64::INFINITY, acc.rounding()),
                        n_used,
                        r,
                        eps,
                    );
                    return Err(Error::not_converged(format!("row {r}: inner n_cap reached"), Some(partial)));
                }
                last_row = row.value;
                if r >= r_min {
                    let m = model.as_ref().map_or(Scalar::new(0.0, 0.0), |m| m.eval(r));
                    let dev = (row.value - m).norm();
                    let threshold = (eps / (10.0 * r as f64)).max(4.0 * row.rounding);
                    streak = if dev <= threshold { streak + 1 } else { 0 };
                    if recent.len() == 3 {
                        recent.pop_front();
                    }
                    recent.push_back(dev);
                    if streak >= 3 {
                        stop_at = Some(r);
                        break 'outer;
                    }
                }
            }
            next = hi + 1;
        }

        let Some(cut) = stop_at else {
            let partial = EvalResult::new(
                acc.value(),
                ErrorBudget::new(f64::INFINITY, acc.rounding()),
                n_used,
                pol.r_cap,
                eps,
            );
            return Err(Error::not_converged("outer sum: r_cap reached", Some(partial)));
        };
        let max_dev = recent.iter().copied().fold(0.0, f64::max);
        let (value, truncation, rounding) = match &model {
            Some(m) => {
                let (tail, remainder, tail_rounding) = m.tail(cut);
                (
                    acc.value() + tail,
                    trunc_inner + remainder + 3.0 * max_dev,
                    acc.rounding() + tail_rounding,
                )
            }
            None => (
                acc.value(),
                trunc_inner + last_row.norm() * cut as f64 / 2.0,
                acc.rounding(),
            ),
        };
        Ok(EvalResult::new(
            value,
            ErrorBudget::new(truncation, rounding),
            n_used,
            cut,
            eps,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::real;

    fn pair(x1: f64, x2: f64, w: f64) -> Vec<Member> {
        vec![
            Member { coef: real(1.0 / x1), a: real(x2 * x2), b: real(w * w) },
            Member { coef: real(-1.0 / x2), a: real(x1 * x1), b: real(w * w) },
        ]
    }

    fn direct(members: &[Member], n_max: u64) -> f64 {
        let mut acc = CompensatedSum::new();
        for n in 1..=n_max {
            acc.add(group_value(members, n as f64).unwrap().0);
        }
        acc.value().re
    }

    #[test]
    fn inner_tail_matches_long_direct_sum() {
        let m = pair(1.1, 0.8, 0.3);
        let fast = inner_sum(&m, 64, true).unwrap();
        // remainder beyond 2e5 is about c3/(2 N^2) ~ 1e-13
        let slow = direct(&m, 200_000);
        assert!((fast.value.re - slow).abs() < 1e-12, "{} vs {}", fast.value.re, slow);
        assert!(fast.truncation < 1e-13);
    }

    #[test]
    fn unaccelerated_truncation_covers_tail() {
        let m = pair(1.1, 0.8, 0.3);
        let plain = inner_sum(&m, 64, false).unwrap();
        let fast = inner_sum(&m, 64, true).unwrap();
        assert!((plain.value - fast.value).norm() <= plain.truncation);
    }

    #[test]
    fn non_cancelling_group_is_rejected() {
        let m = vec![Member { coef: real(1.0), a: real(1.0), b: real(1.0) }];
        assert!(matches!(inner_sum(&m, 64, true), Err(Error::Domain(_))));
    }

    #[test]
    fn power_tail_matches_direct() {
        for &p in &[3usize, 5, 12] {
            let direct: f64 = (11..2_000_000u64).map(|r| (r as f64).powf(-(p as f64))).sum();
            let rest = (2_000_000f64).powf(1.0 - p as f64) / (p as f64 - 1.0);
            assert!(((power_tail(10, p) - direct - rest) / power_tail(10, p)).abs() < 1e-9);
        }
    }

    #[test]
    fn asymptotics_reject_divergent_rows() {
        // one unpaired outer term leaves an r^-1 order
        let g = GroupedSeries {
            inner: vec![],
            inner_weight: real(1.0),
            outer: vec![RadicalTerm::new(real(1.0), real(0.0), real(1.0), real(1.0))],
            constant: real(0.0),
        };
        assert!(g.asymptotics(real(0.25)).is_err());
    }

    #[test]
    fn asymptotic_model_tracks_rows() {
        // 8-member family
        let (x1, x2) = (1.1f64, 0.9f64);
        let t = |c: f64, n2: f64, r2: f64| RadicalTerm::new(real(c), real(n2), real(r2), real(1.0));
        let g = GroupedSeries {
            inner: vec![
                t(x2, x2 * x2, 1.0),
                t(-x1, x1 * x1, 1.0),
                t(-x1 * x2, x1 * x1 * x2 * x2, x1 * x1),
                t(x1 * x2, x1 * x1 * x2 * x2, x2 * x2),
                t(1.0, 1.0, x1 * x1),
                t(-1.0, 1.0, x2 * x2),
                t(x1, x1 * x1, x1 * x1 * x2 * x2),
                t(-x2, x2 * x2, x1 * x1 * x2 * x2),
            ],
            inner_weight: real(0.5),
            outer: vec![],
            constant: real(0.0),
        };
        let w_sq = real(0.0625);
        let model = g.asymptotics(w_sq).unwrap();
        // closed form: (1/8) w^2 sum c r2^-3/2 = -6.425e-7
        assert!((model.coefficient(3).re + 6.4252e-7).abs() < 1e-10);
        let pol = TruncationPolicy::default();
        for r in [10u64, 20, 40] {
            let row = g.row(r, w_sq, 1e-16, &pol).unwrap();
            assert!((row.value - model.eval(r)).norm() < 1e-14, "r = {r}");
        }
    }
}
