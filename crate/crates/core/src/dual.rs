//! Forward-mode dual numbers and the scalar trait every field is generic over.
//!
//! `Dual<T>` is generic in its component type, so nesting (`Dual<Dual<f64>>`,
//! `Dual<Dual<Dual<f64>>>`, ...) gives exact higher derivatives. Any quantity
//! written against [`Real`] can be differentiated again by evaluating it at
//! `Dual<S>`.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Scalar arithmetic shared by `f64` and all nested dual numbers.
pub trait Real:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    /// The innermost real part.
    fn re(&self) -> f64;
    /// True when every component is finite.
    fn is_finite(&self) -> bool;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn atan2(self, x: Self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
}

/// `re + eps·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Real> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }
    pub fn constant(re: T) -> Self {
        Dual { re, eps: T::zero() }
    }
    pub fn variable(re: T) -> Self {
        Dual { re, eps: T::one() }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}
impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}
impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}
impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Dual::new(q, (self.eps - q * o.eps) / o.re)
    }
}
impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}
impl<T: Real> AddAssign for Dual<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}
impl<T: Real> SubAssign for Dual<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}
impl<T: Real> MulAssign for Dual<T> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}
impl<T: Real> Add<f64> for Dual<T> {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        Dual::new(self.re + o, self.eps)
    }
}
impl<T: Real> Sub<f64> for Dual<T> {
    type Output = Self;
    fn sub(self, o: f64) -> Self {
        Dual::new(self.re - o, self.eps)
    }
}
impl<T: Real> Mul<f64> for Dual<T> {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        Dual::new(self.re * o, self.eps * o)
    }
}
impl<T: Real> Div<f64> for Dual<T> {
    type Output = Self;
    fn div(self, o: f64) -> Self {
        Dual::new(self.re / o, self.eps / o)
    }
}

impl<T: Real> Real for Dual<T> {
    fn cst(v: f64) -> Self {
        Dual::constant(T::cst(v))
    }
    fn re(&self) -> f64 {
        self.re.re()
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.eps.is_finite()
    }
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.re.cos() * self.eps)
    }
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -(self.re.sin() * self.eps))
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.eps / (s * 2.0))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, e * self.eps)
    }
    fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.eps / self.re)
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        Dual::new(self.re.powi(n), self.re.powi(n - 1) * (n as f64) * self.eps)
    }
    fn atan2(self, x: Self) -> Self {
        let r2 = x.re * x.re + self.re * self.re;
        Dual::new(
            self.re.atan2(x.re),
            (x.re * self.eps - self.re * x.eps) / r2,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Dual::variable(3.0);
        let y = x * x;
        assert_eq!(y.re, 9.0);
        assert_eq!(y.eps, 6.0);
    }

    #[test]
    fn nested_second_derivative_of_sin() {
        // d²/dx² sin x = -sin x
        let x0 = 0.7;
        let x = Dual::new(Dual::new(x0, 1.0), Dual::new(1.0, 0.0));
        let y = x.sin();
        assert!((y.re.re - x0.sin()).abs() < 1e-15);
        assert!((y.eps.re - x0.cos()).abs() < 1e-15);
        assert!((y.eps.eps + x0.sin()).abs() < 1e-15);
    }

    #[test]
    fn atan2_matches_derivative() {
        let (y0, x0) = (0.3, -1.2);
        let y = Dual::variable(y0);
        let x = Dual::constant(x0);
        let d = y.atan2(x).eps;
        assert!((d - x0 / (x0 * x0 + y0 * y0)).abs() < 1e-14);
    }

    #[test]
    fn quotient_and_powers() {
        let x = Dual::variable(2.0);
        let y = Real::powi(x, 3) / (x + 1.0);
        // (x³/(x+1))' = (3x²(x+1) - x³)/(x+1)²
        let expect = (3.0 * 4.0 * 3.0 - 8.0) / 9.0;
        assert!((y.eps - expect).abs() < 1e-14);
        assert!((Real::sqrt(x).eps - 0.5 / 2f64.sqrt()).abs() < 1e-15);
        assert!((Real::ln(x).eps - 0.5).abs() < 1e-15);
        assert!((Real::exp(x).eps - 2f64.exp()).abs() < 1e-12);
    }
}
