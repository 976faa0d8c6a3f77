//! Scalar conventions, the Bose kernel `1/(e^z - 1)`, lattice radicals and
//! the error-budget bookkeeping shared by every evaluator.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Add;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex double-width value. Square roots are always principal branch.
pub type Scalar = Complex64;

pub const TWO_PI: f64 = 2.0 * PI;

/// Below this modulus the kernel is evaluated through `expm1`.
const SMALL_ARG: f64 = 0.25;

#[inline]
pub fn real(x: f64) -> Scalar {
    Scalar::new(x, 0.0)
}

#[inline]
pub fn is_real(z: Scalar) -> bool {
    z.im == 0.0
}

/// `e^z - 1` without cancellation near the origin.
pub fn expm1(z: Scalar) -> Scalar {
    if z.im == 0.0 {
        return real(z.re.exp_m1());
    }
    let em1 = z.re.exp_m1();
    let (s, c) = z.im.sin_cos();
    let h = (0.5 * z.im).sin();
    // e^x cos y - 1 = expm1(x) cos y - 2 sin^2(y/2)
    Scalar::new(em1 * c - 2.0 * h * h, (em1 + 1.0) * s)
}

/// `ln(1 + z)` accurate for small `|z|`.
pub fn ln1p(z: Scalar) -> Scalar {
    if z.im == 0.0 && z.re > -1.0 {
        return real(z.re.ln_1p());
    }
    // |1+z|^2 - 1 = 2x + x^2 + y^2
    let m = 2.0 * z.re + z.re * z.re + z.im * z.im;
    Scalar::new(0.5 * m.ln_1p(), z.im.atan2(1.0 + z.re))
}

/// Principal square root. A real negative argument maps onto the positive
/// imaginary axis regardless of the sign of its zero imaginary part.
pub fn principal_sqrt(z: Scalar) -> Scalar {
    if z.im == 0.0 {
        if z.re >= 0.0 {
            real(z.re.sqrt())
        } else {
            Scalar::new(0.0, (-z.re).sqrt())
        }
    } else {
        z.sqrt()
    }
}

fn is_pole(z: Scalar) -> bool {
    if z.re != 0.0 {
        return false;
    }
    let k = (z.im / TWO_PI).round();
    let target = k * TWO_PI;
    (z.im - target).abs() <= 4.0 * f64::EPSILON * target.abs().max(f64::MIN_POSITIVE)
}

/// The Bose kernel `1/(e^z - 1)`.
///
/// Three regimes: `|z| < 1/4` goes through `expm1`, `Re z > 0` uses
/// `e^{-z}/(1 - e^{-z})` so large exponents underflow instead of
/// overflowing, everything else is direct.
pub fn bose(z: Scalar) -> Result<Scalar> {
    if is_pole(z) {
        return Err(Error::domain(format!("Bose kernel pole at z = {z}")));
    }
    let v = if z.norm() < SMALL_ARG {
        expm1(z).inv()
    } else if z.re > 0.0 {
        if z.im == 0.0 {
            let e = (-z.re).exp();
            real(e / -(-z.re).exp_m1())
        } else {
            (-z).exp() / -expm1(-z)
        }
    } else {
        expm1(z).inv()
    };
    if !v.is_finite() {
        return Err(Error::domain(format!("Bose kernel pole at z = {z}")));
    }
    Ok(v)
}

/// `sqrt(x^2 n^2 + r^2 + w^2)`, principal branch. With `r = 0` this is the
/// one-dimensional radical `sqrt(x^2 n^2 + w^2)`.
pub fn radical(x: Scalar, n: u64, r: u64, w: Scalar) -> Result<Scalar> {
    let nf = n as f64;
    let rf = r as f64;
    let arg = x * x * (nf * nf) + rf * rf + w * w;
    if arg == Scalar::new(0.0, 0.0) {
        return Err(Error::domain(format!(
            "vanishing radical at x = {x}, n = {n}, r = {r}, w = {w}"
        )));
    }
    Ok(principal_sqrt(arg))
}

/// Truncation plus rounding estimate attached to every evaluated value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub truncation: f64,
    pub rounding: f64,
    pub total: f64,
}

impl ErrorBudget {
    pub const ZERO: ErrorBudget = ErrorBudget {
        truncation: 0.0,
        rounding: 0.0,
        total: 0.0,
    };

    pub fn new(truncation: f64, rounding: f64) -> Self {
        let truncation = truncation.abs();
        let rounding = rounding.abs();
        ErrorBudget {
            truncation,
            rounding,
            total: truncation + rounding,
        }
    }

    pub fn scaled(self, k: f64) -> Self {
        ErrorBudget::new(self.truncation * k.abs(), self.rounding * k.abs())
    }

    pub fn with_rounding(self, extra: f64) -> Self {
        ErrorBudget::new(self.truncation, self.rounding + extra.abs())
    }
}

impl Add for ErrorBudget {
    type Output = ErrorBudget;

    fn add(self, rhs: ErrorBudget) -> ErrorBudget {
        ErrorBudget::new(
            self.truncation + rhs.truncation,
            self.rounding + rhs.rounding,
        )
    }
}

impl fmt::Display for ErrorBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.3e} (truncation {:.3e}, rounding {:.3e})",
            self.total, self.truncation, self.rounding
        )
    }
}

#[inline]
fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

/// Neumaier-compensated complex accumulator with a running rounding tally
/// of one ulp of the partial sum per addition.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: f64,
    re_comp: f64,
    im: f64,
    im_comp: f64,
    rounding: f64,
    count: u64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, t: Scalar) {
        neumaier(&mut self.re, &mut self.re_comp, t.re);
        neumaier(&mut self.im, &mut self.im_comp, t.im);
        self.rounding += f64::EPSILON * self.re.hypot(self.im);
        self.count += 1;
    }

    /// Adds a term whose own evaluation carries an error estimate `err`.
    #[inline]
    pub fn add_with_error(&mut self, t: Scalar, err: f64) {
        self.add(t);
        self.rounding += err.abs();
    }

    pub fn value(&self) -> Scalar {
        Scalar::new(self.re + self.re_comp, self.im + self.im_comp)
    }

    pub fn rounding(&self) -> f64 {
        self.rounding
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

impl Extend<Scalar> for CompensatedSum {
    fn extend<I: IntoIterator<Item = Scalar>>(&mut self, iter: I) {
        for t in iter {
            self.add(t);
        }
    }
}

/// Serde adapter writing a [`Scalar`] as `{"re": .., "im": ..}`.
pub mod serde_scalar {
    use super::Scalar;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &Scalar, s: S) -> Result<S::Ok, S::Error> {
        Repr { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Scalar, D::Error> {
        let r = Repr::deserialize(d)?;
        Ok(Scalar::new(r.re, r.im))
    }
}

/// Parses `re`, `re+imJ`, `re-imJ` or `imJ` (`j` also accepted).
pub fn parse_scalar(s: &str) -> Result<Scalar> {
    let t = s.trim();
    let bad = || Error::invalid(format!("cannot parse scalar {s:?}; expected re or re+imJ"));
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix(['j', 'J']) else {
        return t.parse::<f64>().map(real).map_err(|_| bad());
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("0", body),
    };
    let im = match im {
        "+" | "" => "1",
        "-" => "-1",
        other => other,
    };
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = im.trim_start_matches('+').parse().map_err(|_| bad())?;
    Ok(Scalar::new(re, im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bose_at_log_two() {
        let v = bose(real(2f64.ln())).unwrap();
        assert!((v.re - 1.0).abs() < 1e-15 && v.im == 0.0);
        let v = bose(real(-(2f64.ln()))).unwrap();
        assert!((v.re + 2.0).abs() < 1e-15);
    }

    #[test]
    fn bose_near_origin_matches_laurent() {
        let z = 1e-8;
        let expected = 1.0 / z - 0.5 + z / 12.0;
        let v = bose(real(z)).unwrap().re;
        assert!(((v - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn bose_rejects_poles() {
        assert!(matches!(bose(real(0.0)), Err(Error::Domain(_))));
        assert!(bose(Scalar::new(0.0, TWO_PI)).is_err());
        assert!(bose(Scalar::new(0.0, -3.0 * TWO_PI)).is_err());
        assert!(bose(Scalar::new(0.0, 1.0)).is_ok());
    }

    #[test]
    fn bose_large_argument_underflows() {
        let v = bose(real(900.0)).unwrap();
        assert_eq!(v, real(0.0));
        let v = bose(real(-900.0)).unwrap();
        assert_eq!(v, real(-1.0));
    }

    #[test]
    fn radical_examples() {
        assert_eq!(radical(real(1.0), 3, 4, real(0.0)).unwrap(), real(5.0));
        assert_eq!(radical(real(1.0), 1, 0, real(0.0)).unwrap(), real(1.0));
        assert_eq!(radical(real(2.0), 1, 1, real(2.0)).unwrap(), real(3.0));
        assert!(radical(real(0.0), 1, 0, real(0.0)).is_err());
    }

    #[test]
    fn radical_negative_argument_is_positive_imaginary() {
        // x^2 n^2 + w^2 = 1 - 4 = -3
        let v = radical(real(1.0), 1, 0, Scalar::new(0.0, 2.0)).unwrap();
        assert_eq!(v.re, 0.0);
        assert!((v.im - 3f64.sqrt()).abs() < 1e-15);
        let v = principal_sqrt(Scalar::new(-4.0, -0.0));
        assert_eq!(v, Scalar::new(0.0, 2.0));
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(real(1.0));
        for _ in 0..1000 {
            acc.add(real(1e-17));
        }
        acc.add(real(-1.0));
        assert!((acc.value().re - 1e-14).abs() < 1e-26);
        assert_eq!(acc.count(), 1002);
    }

    #[test]
    fn budget_invariants() {
        let b = ErrorBudget::new(1e-12, 3e-15) + ErrorBudget::new(2e-13, 1e-16);
        assert!(b.total >= b.truncation && b.truncation >= 0.0);
        assert!(b.total >= b.rounding && b.rounding >= 0.0);
        assert_eq!(b.total, b.truncation + b.rounding);
    }

    #[test]
    fn ln1p_small_complex() {
        let z = Scalar::new(1e-10, 2e-10);
        let v = ln1p(z);
        let series = z - z * z / 2.0;
        assert!((v - series).norm() < 1e-25);
    }

    #[test]
    fn parses_scalars() {
        assert_eq!(parse_scalar("1.5").unwrap(), real(1.5));
        assert_eq!(parse_scalar("1.5+0.25J").unwrap(), Scalar::new(1.5, 0.25));
        assert_eq!(parse_scalar("-1e-3-2e-2j").unwrap(), Scalar::new(-1e-3, -2e-2));
        assert_eq!(parse_scalar("2e+1+1e+0J").unwrap(), Scalar::new(20.0, 1.0));
        assert_eq!(parse_scalar("0.5J").unwrap(), Scalar::new(0.0, 0.5));
        assert!(parse_scalar("abc").is_err());
        assert!(parse_scalar("").is_err());
    }

    fn arb_z() -> impl Strategy<Value = Scalar> {
        (1e-3f64..10.0, 0.0..TWO_PI).prop_map(|(m, t)| Scalar::from_polar(m, t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn bose_reflection(z in arb_z()) {
            let s = bose(z).unwrap() + bose(-z).unwrap();
            let scale = bose(z).unwrap().norm().max(1.0);
            prop_assert!((s + 1.0).norm() <= 1e-13 * scale);
        }

        #[test]
        fn bose_laurent_remainder(m in 1e-6f64..0.5, t in 0.0..TWO_PI) {
            let z = Scalar::from_polar(m, t);
            let laurent = z.inv() - 0.5 + z / 12.0;
            prop_assert!((bose(z).unwrap() - laurent).norm() <= m.powi(3) / 300.0 + 8.0 * f64::EPSILON / m);
        }

        #[test]
        fn radical_squares_back(x in -5.0f64..5.0, xi in -1.0f64..1.0, n in 1u64..200, r in 0u64..200, w in -3.0f64..3.0) {
            let xs = Scalar::new(x, xi);
            let ws = real(w);
            let arg = xs * xs * ((n * n) as f64) + ((r * r) as f64) + ws * ws;
            prop_assume!(arg.norm() > 1e-6);
            let v = radical(xs, n, r, ws).unwrap();
            prop_assert!(v.re >= 0.0);
            prop_assert!((v * v - arg).norm() <= 1e-14 * arg.norm());
        }
    }
}
