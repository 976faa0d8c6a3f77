//! Brute-force reference sums: literal truncated summation with compensated
//! accumulation, no tail estimates and no acceleration.
//!
//! Nothing here calls into [`crate::series`]; only the kernel, the radical
//! and the accumulator are shared.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{bose, principal_sqrt, radical, CompensatedSum, Scalar, TWO_PI};
use crate::series::{SeriesParams, SumOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub n_cut: u64,
    pub r_cut: u64,
}

impl OracleConfig {
    pub fn new(n_cut: u64, r_cut: u64) -> Result<Self> {
        if n_cut == 0 || r_cut == 0 {
            return Err(Error::invalid("oracle cuts must be at least 1"));
        }
        Ok(OracleConfig { n_cut, r_cut })
    }

    pub fn square(cut: u64) -> Result<Self> {
        OracleConfig::new(cut, cut)
    }
}

/// `sum_{n <= n_cut, r <= r_cut} bose(2 pi y rho)/rho`.
pub fn oracle_f(p: &SeriesParams, c: OracleConfig, order: SumOrder) -> Result<Scalar> {
    let term = |n: u64, r: u64| -> Result<Scalar> {
        let rho = radical(p.x, n, r, p.w)?;
        Ok(bose(TWO_PI * p.y * rho)? / rho)
    };
    let mut acc = CompensatedSum::new();
    match order {
        SumOrder::RowMajor => {
            for r in 1..=c.r_cut {
                for n in 1..=c.n_cut {
                    acc.add(term(n, r)?);
                }
            }
        }
        SumOrder::ColumnMajor => {
            for n in 1..=c.n_cut {
                for r in 1..=c.r_cut {
                    acc.add(term(n, r)?);
                }
            }
        }
    }
    Ok(acc.value())
}

/// `sum_{n <= n_cut} bose(2 pi beta sqrt(x^2 n^2 + w^2))/sqrt(x^2 n^2 + w^2)`.
pub fn oracle_s1d(x: Scalar, beta: Scalar, w: Scalar, n_cut: u64) -> Result<Scalar> {
    let mut acc = CompensatedSum::new();
    for n in 1..=n_cut {
        let rho = radical(x, n, 0, w)?;
        acc.add(bose(TWO_PI * beta * rho)? / rho);
    }
    Ok(acc.value())
}

#[inline]
fn inv_sqrt(q: Scalar) -> Scalar {
    principal_sqrt(q).inv()
}

/// `sum_{n <= n_cut} [1/(x1 sqrt(x2^2 n^2 + w^2)) - 1/(x2 sqrt(x1^2 n^2 + w^2))]`.
pub fn oracle_corr1d(x1: Scalar, x2: Scalar, w: Scalar, n_cut: u64) -> Scalar {
    let (s1, s2, w2) = (x1 * x1, x2 * x2, w * w);
    let mut acc = CompensatedSum::new();
    for n in 1..=n_cut {
        let nn = (n * n) as f64;
        acc.add(inv_sqrt(s2 * nn + w2) / x1 - inv_sqrt(s1 * nn + w2) / x2);
    }
    acc.value()
}

/// The eight-term brace of the two-variable correction at one `(n, r)`.
#[inline]
fn corr2d_brace(x1: Scalar, x2: Scalar, w2: Scalar, n: u64, r: u64) -> Scalar {
    let (nn, rr) = ((n * n) as f64, (r * r) as f64);
    let (s1, s2) = (x1 * x1, x2 * x2);
    let p = x1 * x2;
    let pp = p * p;
    let t12 = x2 * inv_sqrt(s2 * nn + rr + w2) - x1 * inv_sqrt(s1 * nn + rr + w2);
    let t36 = p * inv_sqrt(pp * nn + s2 * rr + w2) - p * inv_sqrt(pp * nn + s1 * rr + w2);
    let t45 = inv_sqrt(nn + s1 * rr + w2) - inv_sqrt(nn + s2 * rr + w2);
    let t78 = x1 * inv_sqrt(s1 * nn + pp * rr + w2) - x2 * inv_sqrt(s2 * nn + pp * rr + w2);
    (t12 + t36) + (t45 + t78)
}

/// `(1/2) sum_{r <= r_cut} sum_{n <= n_cut}` of the eight-term brace.
/// Rows run in parallel and are reduced in index order.
pub fn oracle_corr2d(x1: Scalar, x2: Scalar, w: Scalar, c: OracleConfig) -> Scalar {
    let w2 = w * w;
    let rows: Vec<Scalar> = (1..=c.r_cut)
        .into_par_iter()
        .map(|r| {
            let mut acc = CompensatedSum::new();
            for n in 1..=c.n_cut {
                acc.add(corr2d_brace(x1, x2, w2, n, r));
            }
            acc.value()
        })
        .collect();
    let mut total = CompensatedSum::new();
    total.extend(rows);
    0.5 * total.value()
}

/// One row of the shifted-transformation bracket with the inner sum cut at
/// `n_cut`: half the pair sum, the log constants and the two boundary
/// radicals.
pub fn oracle_bracket21(x1: Scalar, x2: Scalar, w: Scalar, r: u64, n_cut: u64) -> Scalar {
    let shift = principal_sqrt(Scalar::new((r * r) as f64, 0.0) + w * w);
    let p = x1 * x2;
    0.5 * oracle_corr1d(x1, x2, shift, n_cut) + (x1.ln() - x2.ln()) / (2.0 * p) + 0.25 / (x1 * shift)
        - 0.25 / (x2 * shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::real;

    #[test]
    fn single_term() {
        let p = SeriesParams::real(1.5, 0.7, 0.4);
        let v = oracle_f(&p, OracleConfig::square(1).unwrap(), SumOrder::RowMajor).unwrap();
        let rho = (1.5f64 * 1.5 + 1.0 + 0.16).sqrt();
        let expected = 1.0 / (rho * (TWO_PI * 0.7 * rho).exp_m1());
        assert!((v.re - expected).abs() <= 4.0 * f64::EPSILON * expected);
    }

    #[test]
    fn doubling_cuts_is_invisible() {
        let p = SeriesParams::real(1.0, 1.0, 0.0);
        let a = oracle_f(&p, OracleConfig::square(20).unwrap(), SumOrder::RowMajor).unwrap();
        let b = oracle_f(&p, OracleConfig::square(40).unwrap(), SumOrder::RowMajor).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loop_orders_agree() {
        let p = SeriesParams::real(0.6, 0.9, 0.3);
        let c = OracleConfig::square(40).unwrap();
        let a = oracle_f(&p, c, SumOrder::RowMajor).unwrap();
        let b = oracle_f(&p, c, SumOrder::ColumnMajor).unwrap();
        assert!((a - b).norm() <= 1e-15);
    }

    #[test]
    fn corrections_vanish_on_diagonal() {
        let t = real(1.3);
        assert_eq!(oracle_corr1d(t, t, real(0.4), 1000), real(0.0));
        assert_eq!(oracle_corr2d(t, t, real(0.4), OracleConfig::square(64).unwrap()), real(0.0));
    }

    #[test]
    fn zero_cut_rejected() {
        assert!(OracleConfig::new(0, 3).is_err());
    }
}
