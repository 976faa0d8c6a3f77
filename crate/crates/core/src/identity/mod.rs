//! Residual checks for the functional relations satisfied by `f(x, y; w)`.
//!
//! Each check evaluates both sides from independently truncated
//! constituents and returns an [`IdentityReport`]. A report passes when
//! `|lhs - rhs| <= max(tol_abs, 4 * budget)`, where `budget` is the sum of
//! the constituents' error budgets weighted by their coefficients.
//!
//! | id | relation |
//! |----|----------|
//! | `EQ11` | one-dimensional transformation of the `S` series |
//! | `EQ12` | `x^-1 f(x^-1, y; w x^-1) = f(x, y x^-1; w)` |
//! | `EQ13` | eight-term relation with the two-variable correction |
//! | `EQ14` | the `w = 0` relation written with representation counts |
//! | `EQ21` | the row-summed one-dimensional transformation |
//! | `EQ23` | the intermediate four-term relation |
//! | `EQ25` | the eight-term relation at `w = 0` |
//! | `BRIDGE` | `f(sqrt(a/b), y; 0)` through `r_{a,b}` |

mod rep_series;
mod report;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{bose, real, Scalar, TWO_PI};
use crate::reps::{FormCoeffs, RepCache};
use crate::series::{
    eval_corr1d, eval_corr2d, eval_f, eval_s1d, sum_brackets21, sum_brackets23, EvalResult, SeriesParams,
    TruncationPolicy,
};

pub use rep_series::bridge_rep_series;
pub use report::{Component, IdentityId, IdentityReport, NamedValue, Side, SAFETY};

use report::{assemble, SideBuilder};

/// Default absolute tolerance of the pass rule.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Exponent convention for the representation-count relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Eq14Form {
    /// Rates obtained by substituting `x2 = sqrt(a/b)`, `x1 = sqrt(c/d)`
    /// into the `w = 0` relation.
    #[default]
    Substituted,
    /// The `sqrt(b)` and `sqrt(d)` terms carry an extra factor `b` resp.
    /// `d` in the rate. Kept only to show that it breaks the relation.
    Printed,
}

/// A named `f` evaluation entering one side with a coefficient.
struct FTerm {
    name: String,
    coef: Scalar,
    params: SeriesParams,
}

impl FTerm {
    fn new(name: &str, coef: Scalar, x: Scalar, y: Scalar, w: Scalar) -> Self {
        FTerm {
            name: name.to_string(),
            coef,
            params: SeriesParams::new(x, y, w),
        }
    }
}

fn eval_all(terms: &[FTerm], pol: &TruncationPolicy) -> Result<Vec<EvalResult>> {
    terms.par_iter().map(|t| eval_f(&t.params, pol)).collect()
}

/// Adds evaluated terms in consecutive pairs, one group per pair.
fn add_pairs(side: &mut SideBuilder, terms: &[FTerm], values: &[EvalResult]) {
    for (pair, vals) in terms.chunks(2).zip(values.chunks(2)) {
        for (t, v) in pair.iter().zip(vals) {
            side.series(t.name.as_str(), t.coef, v);
        }
        side.group();
    }
}

/// The eight `f` instances of the two-variable relation, in the pairs that
/// swap into each other under `x1 <-> x2`.
fn eight_terms(x1: Scalar, x2: Scalar, w: Scalar) -> Vec<FTerm> {
    let one = real(1.0);
    let inv_p = (x1 * x2).inv();
    vec![
        FTerm::new("x1 f(x1, 1/x2; w)", x1, x1, x2.inv(), w),
        FTerm::new("x2 f(x2, 1/x1; w)", -x2, x2, x1.inv(), w),
        FTerm::new("f(x1, 1/(x1 x2); w)", -one, x1, inv_p, w),
        FTerm::new("f(x2, 1/(x1 x2); w)", one, x2, inv_p, w),
        FTerm::new("x2 f(x2, x1; w/x1)", x2, x2, x1, w / x1),
        FTerm::new("x1 f(x1, x2; w/x2)", -x1, x1, x2, w / x2),
        FTerm::new("f(x1, x2/x1; w/x2)", one, x1, x2 / x1, w / x2),
        FTerm::new("f(x2, x1/x2; w/x1)", -one, x2, x1 / x2, w / x1),
    ]
}

/// `(1/4)(x1 - 1/x1) ln x2 - (1/4)(x2 - 1/x2) ln x1`.
fn log_block(side: &mut SideBuilder, x1: Scalar, x2: Scalar) {
    side.closed("(x1 - 1/x1) ln(x2)/4", 0.25 * (x1 - x1.inv()) * x2.ln())
        .closed("(x2 - 1/x2) ln(x1)/4", -0.25 * (x2 - x2.inv()) * x1.ln())
        .group();
}

fn require_nonzero(name: &str, v: Scalar) -> Result<()> {
    if v == Scalar::new(0.0, 0.0) {
        return Err(Error::domain(format!("{name} must be nonzero")));
    }
    Ok(())
}

fn require_positive_integer(name: &str, v: Scalar) -> Result<u64> {
    if v.im != 0.0 || !(v.re >= 1.0) || v.re.fract() != 0.0 || v.re > 1e15 {
        return Err(Error::invalid(format!("{name} must be a positive integer, got {v}")));
    }
    Ok(v.re as u64)
}

fn params(names: &[&str], values: &[Scalar]) -> Vec<NamedValue> {
    names.iter().zip(values).map(|(n, &v)| NamedValue::new(*n, v)).collect()
}

/// Evaluates residuals with a shared truncation policy, tolerance and
/// representation-count cache.
#[derive(Debug, Clone)]
pub struct IdentitySuite {
    pub policy: TruncationPolicy,
    pub tol_abs: f64,
    cache: Arc<RepCache>,
}

impl IdentitySuite {
    pub fn new(policy: TruncationPolicy, tol_abs: f64) -> Result<Self> {
        policy.validate()?;
        if !(tol_abs > 0.0) || !tol_abs.is_finite() {
            return Err(Error::invalid(format!("tolerance must be positive, got {tol_abs}")));
        }
        Ok(IdentitySuite {
            policy,
            tol_abs,
            cache: Arc::new(RepCache::in_memory()),
        })
    }

    pub fn with_cache(mut self, cache: Arc<RepCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn cache(&self) -> &RepCache {
        &self.cache
    }

    /// Runs `id` with parameters in the order of [`IdentityId::param_names`].
    pub fn run(&self, id: IdentityId, values: &[Scalar]) -> Result<IdentityReport> {
        let names = id.param_names();
        if values.len() != names.len() {
            return Err(Error::invalid(format!(
                "{id} takes {} parameters ({}), got {}",
                names.len(),
                names.join(", "),
                values.len()
            )));
        }
        let v = values;
        match id {
            IdentityId::Eq11 => self.residual_eq11(v[0], v[1], v[2]),
            IdentityId::Eq12 => self.check_symmetry(v[0], v[1], v[2]),
            IdentityId::Eq13 => self.residual_eq13(v[0], v[1], v[2]),
            IdentityId::Eq21 => self.residual_eq21(v[0], v[1], v[2]),
            IdentityId::Eq23 => self.residual_eq23(v[0], v[1], v[2]),
            IdentityId::Eq25 => self.residual_eq25(v[0], v[1]),
            IdentityId::Eq14 => {
                let n: Vec<u64> = names
                    .iter()
                    .zip(v)
                    .map(|(name, &x)| require_positive_integer(name, x))
                    .collect::<Result<_>>()?;
                self.residual_eq14(n[0], n[1], n[2], n[3])
            }
            IdentityId::Bridge => {
                let a = require_positive_integer("a", v[0])?;
                let b = require_positive_integer("b", v[1])?;
                self.residual_bridge(FormCoeffs::new(a, b)?, v[2])
            }
        }
    }

    /// One-dimensional transformation; `w = 0` is rejected.
    pub fn residual_eq11(&self, x1: Scalar, x2: Scalar, w: Scalar) -> Result<IdentityReport> {
        require_nonzero("x1", x1)?;
        require_nonzero("x2", x2)?;
        require_nonzero("w", w)?;
        let pol = &self.policy;
        let ((s1, s2), corr) = rayon::join(
            || rayon::join(|| eval_s1d(x1, x2.inv(), w, pol), || eval_s1d(x2, x1.inv(), w, pol)),
            || eval_corr1d(x1, x2, w, pol),
        );
        let (s1, s2, corr) = (s1?, s2?, corr?);

        let mut lhs = SideBuilder::new(Side::Lhs);
        lhs.series("S(x1, 1/x2, w)/x2", x2.inv(), &s1)
            .series("S(x2, 1/x1, w)/x1", -x1.inv(), &s2)
            .group();

        let mut rhs = SideBuilder::new(Side::Rhs);
        let b1 = bose(TWO_PI * w / x1)? / (2.0 * w * x1);
        let b2 = bose(TWO_PI * w / x2)? / (2.0 * w * x2);
        rhs.closed("bose(2 pi w/x1)/(2 w x1)", b1)
            .closed("bose(2 pi w/x2)/(2 w x2)", -b2)
            .group()
            .series("corr1d(x1, x2, w)/2", real(0.5), &corr)
            .group()
            .closed("(ln x1 - ln x2)/(2 x1 x2)", (x1.ln() - x2.ln()) / (2.0 * x1 * x2))
            .group()
            .closed("1/(4 w x1)", (4.0 * w * x1).inv())
            .closed("1/(4 w x2)", -(4.0 * w * x2).inv())
            .group();

        Ok(assemble(IdentityId::Eq11, params(&["x1", "x2", "w"], &[x1, x2, w]), lhs, rhs, self.tol_abs))
    }

    /// `x^-1 f(x^-1, y; w x^-1)` against `f(x, y x^-1; w)`.
    pub fn check_symmetry(&self, x: Scalar, y: Scalar, w: Scalar) -> Result<IdentityReport> {
        require_nonzero("x", x)?;
        let xi = x.inv();
        let pol = &self.policy;
        let (a, b) = rayon::join(
            || eval_f(&SeriesParams::new(xi, y, w * xi), pol),
            || eval_f(&SeriesParams::new(x, y * xi, w), pol),
        );
        let (a, b) = (a?, b?);
        let mut lhs = SideBuilder::new(Side::Lhs);
        lhs.series("f(1/x, y; w/x)/x", xi, &a);
        let mut rhs = SideBuilder::new(Side::Rhs);
        rhs.series("f(x, y/x; w)", real(1.0), &b);
        Ok(assemble(IdentityId::Eq12, params(&["x", "y", "w"], &[x, y, w]), lhs, rhs, self.tol_abs))
    }

    /// Eight `f` values against the logarithmic terms plus the
    /// two-variable correction.
    pub fn residual_eq13(&self, x1: Scalar, x2: Scalar, w: Scalar) -> Result<IdentityReport> {
        require_nonzero("x1", x1)?;
        require_nonzero("x2", x2)?;
        let terms = eight_terms(x1, x2, w);
        let pol = &self.policy;
        let (values, corr) = rayon::join(|| eval_all(&terms, pol), || eval_corr2d(x1, x2, w, pol));
        let (values, corr) = (values?, corr?);

        let mut lhs = SideBuilder::new(Side::Lhs);
        add_pairs(&mut lhs, &terms, &values);
        let mut rhs = SideBuilder::new(Side::Rhs);
        log_block(&mut rhs, x1, x2);
        rhs.series("corr2d(x1, x2, w)", real(1.0), &corr).group();
        Ok(assemble(IdentityId::Eq13, params(&["x1", "x2", "w"], &[x1, x2, w]), lhs, rhs, self.tol_abs))
    }

    /// The eight-term relation at `w = 0`, where only the logarithms remain.
    pub fn residual_eq25(&self, x1: Scalar, x2: Scalar) -> Result<IdentityReport> {
        require_nonzero("x1", x1)?;
        require_nonzero("x2", x2)?;
        let terms = eight_terms(x1, x2, real(0.0));
        let values = eval_all(&terms, &self.policy)?;
        let mut lhs = SideBuilder::new(Side::Lhs);
        add_pairs(&mut lhs, &terms, &values);
        let mut rhs = SideBuilder::new(Side::Rhs);
        log_block(&mut rhs, x1, x2);
        Ok(assemble(IdentityId::Eq25, params(&["x1", "x2"], &[x1, x2]), lhs, rhs, self.tol_abs))
    }

    /// Row-summed one-dimensional transformation; `w = 0` is allowed.
    pub fn residual_eq21(&self, x1: Scalar, x2: Scalar, w: Scalar) -> Result<IdentityReport> {
        require_nonzero("x1", x1)?;
        require_nonzero("x2", x2)?;
        let terms = [
            FTerm::new("f(x1, 1/x2; w)/x2", x2.inv(), x1, x2.inv(), w),
            FTerm::new("f(x2, 1/x1; w)/x1", -x1.inv(), x2, x1.inv(), w),
        ];
        let pol = &self.policy;
        let one = real(1.0);
        let (values, (rows, brackets)) = rayon::join(
            || eval_all(&terms, pol),
            || {
                rayon::join(
                    || -> Result<_> { Ok((eval_s1d(one, x1.inv(), w, pol)?, eval_s1d(one, x2.inv(), w, pol)?)) },
                    || sum_brackets21(x1, x2, w, pol),
                )
            },
        );
        let (values, (s1, s2), brackets) = (values?, rows?, brackets?);

        let mut lhs = SideBuilder::new(Side::Lhs);
        add_pairs(&mut lhs, &terms, &values);
        let mut rhs = SideBuilder::new(Side::Rhs);
        rhs.series("S(1, 1/x1, w)/(2 x1)", (2.0 * x1).inv(), &s1)
            .series("S(1, 1/x2, w)/(2 x2)", -(2.0 * x2).inv(), &s2)
            .group()
            .series("sum_r bracket21(r)", one, &brackets)
            .group();
        Ok(assemble(IdentityId::Eq21, params(&["x1", "x2", "w"], &[x1, x2, w]), lhs, rhs, self.tol_abs))
    }

    /// Intermediate four-term relation; `w = 0` is rejected.
    pub fn residual_eq23(&self, x1: Scalar, x2: Scalar, w: Scalar) -> Result<IdentityReport> {
        require_nonzero("x1", x1)?;
        require_nonzero("x2", x2)?;
        require_nonzero("w", w)?;
        let terms = [
            FTerm::new("f(x1, 1/x2; w)/x2", x2.inv(), x1, x2.inv(), w),
            FTerm::new("f(x2, 1/x1; w)/x1", -x1.inv(), x2, x1.inv(), w),
            FTerm::new("f(1/x1, 1/x2; w/x1)/(x2 x1^2)", -(x2 * x1 * x1).inv(), x1.inv(), x2.inv(), w / x1),
            FTerm::new("f(x2, x1; w/x1)/x1", x1.inv(), x2, x1, w / x1),
        ];
        let pol = &self.policy;
        let one = real(1.0);
        let (values, (rows, brackets)) = rayon::join(
            || eval_all(&terms, pol),
            || {
                rayon::join(
                    || -> Result<_> {
                        Ok((eval_s1d(one, x2.inv(), w, pol)?, eval_s1d(x1, (x1 * x2).inv(), w, pol)?))
                    },
                    || sum_brackets23(x1, x2, w, pol),
                )
            },
        );
        let (values, (s2, s12), brackets) = (values?, rows?, brackets?);

        let mut lhs = SideBuilder::new(Side::Lhs);
        add_pairs(&mut lhs, &terms, &values);

        let mut rhs = SideBuilder::new(Side::Rhs);
        rhs.closed("bose(2 pi w)/(4 w)", bose(TWO_PI * w)? / (4.0 * w))
            .closed("bose(2 pi w/x1)/(4 w x1)", -bose(TWO_PI * w / x1)? / (4.0 * w * x1))
            .group()
            .closed("ln(x1)/(4 x1)", -x1.ln() / (4.0 * x1))
            .group()
            .closed("1/(8 w)", (8.0 * w).inv())
            .closed("1/(8 w x1)", -(8.0 * w * x1).inv())
            .group()
            .series("S(1, 1/x2, w)/(2 x2)", -(2.0 * x2).inv(), &s2)
            .series("S(x1, 1/(x1 x2), w)/(2 x1 x2)", (2.0 * x1 * x2).inv(), &s12)
            .group()
            .series("sum_r bracket23(r)", one, &brackets)
            .group();
        Ok(assemble(IdentityId::Eq23, params(&["x1", "x2", "w"], &[x1, x2, w]), lhs, rhs, self.tol_abs))
    }

    /// Representation-count form of the `w = 0` relation.
    pub fn residual_eq14(&self, a: u64, b: u64, c: u64, d: u64) -> Result<IdentityReport> {
        self.residual_eq14_form(a, b, c, d, Eq14Form::Substituted)
    }

    pub fn residual_eq14_form(&self, a: u64, b: u64, c: u64, d: u64, form: Eq14Form) -> Result<IdentityReport> {
        let ab = FormCoeffs::new(a, b)?;
        let cd = FormCoeffs::new(c, d)?;
        let (sa, sb, sc, sd) = ((a as f64).sqrt(), (b as f64).sqrt(), (c as f64).sqrt(), (d as f64).sqrt());
        let rate = |num: u64, den: u64| num as f64 / den as f64;
        // (name, coef, rate) for each table; pairs form groups
        let (b_rates, d_rates) = match form {
            Eq14Form::Substituted => ((rate(d, c * a), rate(c, d * a)), (rate(b, c * a), rate(a, b * c))),
            Eq14Form::Printed => ((rate(d * b, c * a), rate(c * b, d * a)), (rate(d * b, c * a), rate(a * d, b * c))),
        };
        let first: [(&str, f64, f64); 4] = [
            ("sqrt(a) R_ab(c/(b d))", sa, rate(c, b * d)),
            ("sqrt(a) R_ab(d/(c b))", -sa, rate(d, c * b)),
            ("sqrt(b) R_ab(d/(c a))", sb, b_rates.0),
            ("sqrt(b) R_ab(c/(d a))", -sb, b_rates.1),
        ];
        let second: [(&str, f64, f64); 4] = [
            ("sqrt(c) R_cd(a/(b d))", -sc, rate(a, b * d)),
            ("sqrt(c) R_cd(b/(a d))", sc, rate(b, a * d)),
            ("sqrt(d) R_cd(b/(c a))", -sd, d_rates.0),
            ("sqrt(d) R_cd(a/(b c))", sd, d_rates.1),
        ];
        let eps = self.policy.eps_target;
        let eval_table = |form: FormCoeffs, block: &[(&str, f64, f64); 4]| -> Result<Vec<EvalResult>> {
            let per_term = eps / 8.0;
            let cuts: Vec<u64> = block
                .iter()
                .map(|&(_, k, r)| rep_series::required_nmax(form, real(r.sqrt()), per_term / (2.0 * k.abs()), self.cache.limit()))
                .collect::<Result<_>>()?;
            let table = self.cache.get(form, *cuts.iter().max().unwrap())?;
            block
                .iter()
                .zip(&cuts)
                .map(|(&(_, _, r), &m)| rep_series::rep_sum(&table, real(r.sqrt()), m, per_term))
                .collect()
        };
        let (v1, v2) = rayon::join(|| eval_table(ab, &first), || eval_table(cd, &second));
        let (v1, v2) = (v1?, v2?);

        let mut lhs = SideBuilder::new(Side::Lhs);
        for (block, vals) in [(&first, &v1), (&second, &v2)] {
            for (pair, pv) in block.chunks(2).zip(vals.chunks(2)) {
                for (&(name, k, _), v) in pair.iter().zip(pv) {
                    lhs.series(name, real(k), v);
                }
                lhs.group();
            }
        }
        let mut rhs = SideBuilder::new(Side::Rhs);
        let (rab, rcd) = (rate(a, b), rate(c, d));
        rhs.closed("(sqrt(c/d) - sqrt(d/c)) ln(a/b)/8", real((rcd.sqrt() - rcd.recip().sqrt()) * rab.ln() / 8.0))
            .closed("(sqrt(a/b) - sqrt(b/a)) ln(c/d)/8", real(-(rab.sqrt() - rab.recip().sqrt()) * rcd.ln() / 8.0))
            .group();
        let vals: Vec<Scalar> = [a, b, c, d].iter().map(|&n| real(n as f64)).collect();
        Ok(assemble(IdentityId::Eq14, params(&["a", "b", "c", "d"], &vals), lhs, rhs, self.tol_abs))
    }

    /// `f(sqrt(a/b), y; 0)` from the lattice sum against the
    /// representation-count series.
    pub fn residual_bridge(&self, c: FormCoeffs, y: Scalar) -> Result<IdentityReport> {
        let x = real((c.a as f64 / c.b as f64).sqrt());
        let pol = &self.policy;
        let (f, r) = rayon::join(
            || eval_f(&SeriesParams::new(x, y, real(0.0)), pol),
            || bridge_rep_series(&self.cache, c, y, pol),
        );
        let (f, r) = (f?, r?);
        let mut lhs = SideBuilder::new(Side::Lhs);
        lhs.series("f(sqrt(a/b), y; 0)", real(1.0), &f);
        let mut rhs = SideBuilder::new(Side::Rhs);
        rhs.series("sqrt(b) R_ab(y/sqrt(b))", real(1.0), &r);
        let vals = [real(c.a as f64), real(c.b as f64), y];
        Ok(assemble(IdentityId::Bridge, params(&["a", "b", "y"], &vals), lhs, rhs, self.tol_abs))
    }
}

impl Default for IdentitySuite {
    fn default() -> Self {
        IdentitySuite::new(TruncationPolicy::default(), DEFAULT_TOL).expect("default policy is valid")
    }
}
