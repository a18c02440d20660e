//! Scalar special-function primitives: q-Pochhammer symbols, multiplicative
//! theta functions, theta-Pochhammer products, and sign-tracked log-domain
//! accumulation used by every other module.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Relative tail bound for the truncated theta product.
const THETA_TAIL: f64 = 1e-17;

/// q-Pochhammer symbol (a; q)_n = prod_{i=0}^{n-1} (1 - a q^i).
pub fn q_pochhammer(a: f64, q: f64, n: u32) -> f64 {
    let mut prod = 1.0;
    let mut aq = a;
    for _ in 0..n {
        prod *= 1.0 - aq;
        aq *= q;
    }
    prod
}

/// Same as [`q_pochhammer`] but accumulated as a [`LogSigned`] value, for
/// products whose magnitude overflows a double.
pub fn q_pochhammer_ls(a: f64, q: f64, n: u32) -> LogSigned {
    let mut prod = LogSigned::one();
    let mut aq = a;
    for _ in 0..n {
        prod = prod * LogSigned::from_f64(1.0 - aq);
        aq *= q;
    }
    prod
}

/// Nome of the multiplicative theta function; requires 0 <= p < 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticNome(f64);

impl EllipticNome {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain(format!("nome p = {p} must satisfy 0 <= p < 1")));
        }
        Ok(EllipticNome(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// theta_p(x) = prod_{i>=0} (1 - p^i x)(1 - p^{i+1}/x), truncated once the
/// dropped tail perturbs the result by less than 1e-14 relative.
pub fn theta_p(x: f64, p: EllipticNome) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::Domain("theta_p requires x != 0".into()));
    }
    let p = p.value();
    let mut prod = 1.0 - x;
    if p == 0.0 {
        return Ok(prod);
    }
    let scale = x.abs().max(1.0 / x.abs()).max(1.0);
    let mut pk = p; // p^k for k >= 1
    loop {
        prod *= (1.0 - pk * x) * (1.0 - pk / x);
        pk *= p;
        if pk * scale < THETA_TAIL {
            break;
        }
    }
    Ok(prod)
}

/// Complex-argument variant of [`theta_p`].
pub fn theta_p_c(x: Complex64, p: EllipticNome) -> Result<Complex64> {
    if x.norm() == 0.0 {
        return Err(Error::Domain("theta_p requires x != 0".into()));
    }
    let p = p.value();
    let mut prod = Complex64::new(1.0, 0.0) - x;
    if p == 0.0 {
        return Ok(prod);
    }
    let scale = x.norm().max(1.0 / x.norm()).max(1.0);
    let mut pk = p;
    loop {
        prod *= (Complex64::new(1.0, 0.0) - pk * x) * (Complex64::new(1.0, 0.0) - pk / x);
        pk *= p;
        if pk * scale < THETA_TAIL {
            break;
        }
    }
    Ok(prod)
}

/// theta-Pochhammer theta_p(x; q)_k = prod_{0 <= i < k} theta_p(q^i x).
pub fn theta_pochhammer(x: f64, p: EllipticNome, q: f64, k: u32) -> Result<f64> {
    let mut prod = 1.0;
    let mut arg = x;
    for _ in 0..k {
        if arg == 0.0 {
            return Err(Error::Domain("theta_pochhammer hit a zero argument".into()));
        }
        prod *= theta_p(arg, p)?;
        arg *= q;
    }
    Ok(prod)
}

/// A real number stored as (sign, ln|value|); multiplication never overflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSigned {
    pub ln_abs: f64,
    pub sign: i8,
}

impl LogSigned {
    pub fn zero() -> Self {
        LogSigned { ln_abs: f64::NEG_INFINITY, sign: 0 }
    }

    pub fn one() -> Self {
        LogSigned { ln_abs: 0.0, sign: 1 }
    }

    pub fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            LogSigned::zero()
        } else {
            LogSigned { ln_abs: v.abs().ln(), sign: if v > 0.0 { 1 } else { -1 } }
        }
    }

    /// exp(l) with sign +1; `l` may be any real.
    pub fn from_ln(l: f64) -> Self {
        LogSigned { ln_abs: l, sign: 1 }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn value(self) -> f64 {
        self.sign as f64 * self.ln_abs.exp()
    }

    pub fn abs(self) -> Self {
        LogSigned { ln_abs: self.ln_abs, sign: if self.sign == 0 { 0 } else { 1 } }
    }

    pub fn neg(self) -> Self {
        LogSigned { ln_abs: self.ln_abs, sign: -self.sign }
    }

    pub fn recip(self) -> Self {
        LogSigned { ln_abs: -self.ln_abs, sign: self.sign }
    }

    pub fn powi(self, k: i32) -> Self {
        if self.sign == 0 {
            return if k == 0 { LogSigned::one() } else { LogSigned::zero() };
        }
        let sign = if k % 2 == 0 { 1 } else { self.sign };
        LogSigned { ln_abs: self.ln_abs * k as f64, sign }
    }

    /// Ratio self/other as f64; caller must ensure other != 0.
    pub fn ratio(self, other: Self) -> f64 {
        (self * other.recip()).value()
    }
}

impl std::ops::Mul for LogSigned {
    type Output = LogSigned;
    fn mul(self, rhs: LogSigned) -> LogSigned {
        if self.sign == 0 || rhs.sign == 0 {
            return LogSigned::zero();
        }
        LogSigned { ln_abs: self.ln_abs + rhs.ln_abs, sign: self.sign * rhs.sign }
    }
}

impl std::ops::Div for LogSigned {
    type Output = LogSigned;
    fn div(self, rhs: LogSigned) -> LogSigned {
        self * rhs.recip()
    }
}

impl std::ops::MulAssign for LogSigned {
    fn mul_assign(&mut self, rhs: LogSigned) {
        *self = *self * rhs;
    }
}

/// Normalize a family of log-domain weights into probabilities.
///
/// All nonzero entries must share the same sign (a global constant is
/// stripped); mixed signs indicate inadmissible parameters upstream.
pub fn normalize_log_weights(weights: &[LogSigned]) -> Result<Vec<f64>> {
    let mut sign = 0i8;
    let mut max_ln = f64::NEG_INFINITY;
    for w in weights {
        if w.sign != 0 {
            if sign == 0 {
                sign = w.sign;
            } else if sign != w.sign {
                return Err(Error::InadmissibleParameters(
                    "mixed signs in weight family; measure is not positive".into(),
                ));
            }
            if w.ln_abs > max_ln {
                max_ln = w.ln_abs;
            }
        }
    }
    if sign == 0 {
        return Err(Error::DegenerateParameters("all weights vanish".into()));
    }
    let mut vals: Vec<f64> = weights.iter().map(|w| {
        if w.sign == 0 { 0.0 } else { (w.ln_abs - max_ln).exp() }
    }).collect();
    let total: f64 = vals.iter().sum();
    for v in &mut vals {
        *v /= total;
    }
    Ok(vals)
}
