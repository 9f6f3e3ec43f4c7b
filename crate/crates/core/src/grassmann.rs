//! Grassmann algebra with real coefficients, Berezin integration and
//! Pfaffians.
//!
//! A monomial is a bitmask of generators; its coefficient multiplies the
//! ordered product `θ_{i1} θ_{i2} ⋯` with `i1 < i2 < ⋯`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{GeomError, Result};
use crate::linalg::Matrix;

/// Largest supported number of generators.
pub const MAX_GENERATORS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannElement {
    n: usize,
    coeffs: BTreeMap<u32, f64>,
}

/// Sign of moving the monomial `b` past `a`: the parity of pairs
/// `(i ∈ a, j ∈ b)` with `i > j`.
fn product_sign(a: u32, b: u32) -> f64 {
    let mut swaps = 0;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        rest &= rest - 1;
        swaps += (a >> (j + 1)).count_ones();
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl GrassmannElement {
    pub fn zero(n: usize) -> Self {
        assert!(n <= MAX_GENERATORS, "at most {MAX_GENERATORS} generators");
        GrassmannElement {
            n,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn scalar(n: usize, c: f64) -> Self {
        let mut e = Self::zero(n);
        if c != 0.0 {
            e.coeffs.insert(0, c);
        }
        e
    }

    pub fn one(n: usize) -> Self {
        Self::scalar(n, 1.0)
    }

    /// The generator `θ_i`.
    pub fn generator(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(GeomError::UnknownGenerator(i));
        }
        let mut e = Self::zero(n);
        e.coeffs.insert(1 << i, 1.0);
        Ok(e)
    }

    /// `c · θ_{i1} ⋯ θ_{ik}` in the given (not necessarily sorted) order.
    pub fn monomial(n: usize, c: f64, gens: &[usize]) -> Result<Self> {
        let mut e = Self::scalar(n, c);
        for &g in gens {
            e = &e * &Self::generator(n, g)?;
        }
        Ok(e)
    }

    pub fn generators(&self) -> usize {
        self.n
    }

    /// Coefficient of the sorted monomial `mask`.
    pub fn coeff(&self, mask: u32) -> f64 {
        self.coeffs.get(&mask).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.coeffs.iter().map(|(&m, &c)| (m, c))
    }

    /// Degree-0 part.
    pub fn body(&self) -> f64 {
        self.coeff(0)
    }

    /// Part of exact degree `k`.
    pub fn degree_part(&self, k: u32) -> Self {
        GrassmannElement {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(m, _)| m.count_ones() == k)
                .map(|(&m, &c)| (m, c))
                .collect(),
        }
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Largest absolute coefficient among odd monomials.
    pub fn odd_part_max(&self) -> f64 {
        self.coeffs
            .iter()
            .filter(|(m, _)| m.count_ones() % 2 == 1)
            .fold(0.0, |a, (_, c)| a.max(c.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.n);
        if s != 0.0 {
            for (&m, &c) in &self.coeffs {
                out.coeffs.insert(m, c * s);
            }
        }
        out
    }

    /// `self += c·o`.
    pub fn add_scaled(&mut self, o: &Self, c: f64) {
        self.check_same(o);
        if c != 0.0 {
            for (&m, &v) in &o.coeffs {
                self.add_term(m, c * v);
            }
        }
    }

    fn add_term(&mut self, m: u32, c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.coeffs.entry(m).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.coeffs.remove(&m);
        }
    }

    fn check_same(&self, o: &Self) {
        assert_eq!(
            self.n, o.n,
            "Grassmann elements over different generator sets"
        );
    }

    /// `exp` of a nilpotent element (the body must vanish) or of an even
    /// element with arbitrary body.
    pub fn exp(&self) -> Self {
        let body = self.body();
        let mut nil = self.clone();
        nil.coeffs.remove(&0);
        let mut sum = Self::one(self.n);
        let mut term = Self::one(self.n);
        for k in 1..=self.n + 1 {
            term = (&term * &nil).scale(1.0 / k as f64);
            if term.coeffs.is_empty() {
                break;
            }
            sum = &sum + &term;
        }
        sum.scale(body.exp())
    }

    /// Inverse of an even element with invertible body, by the terminating
    /// Neumann series `b⁻¹ Σ (−u)^k` where `self = b(1 + u)`.
    pub fn inverse(&self) -> Result<Self> {
        let b = self.body();
        if b.abs() < 1e-14 {
            return Err(GeomError::SingularBody);
        }
        let mut u = self.scale(1.0 / b);
        u.coeffs.remove(&0);
        let minus_u = -&u;
        let mut sum = Self::one(self.n);
        let mut term = Self::one(self.n);
        loop {
            term = &term * &minus_u;
            if term.coeffs.is_empty() {
                break;
            }
            sum = &sum + &term;
        }
        Ok(sum.scale(1.0 / b))
    }

    /// Left derivative `∂/∂θ_j`.
    pub fn left_derivative(&self, j: usize) -> Result<Self> {
        if j >= self.n {
            return Err(GeomError::UnknownGenerator(j));
        }
        let bit = 1u32 << j;
        let mut out = Self::zero(self.n);
        for (&m, &c) in &self.coeffs {
            if m & bit != 0 {
                let sign = if (m & (bit - 1)).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                out.add_term(m & !bit, sign * c);
            }
        }
        Ok(out)
    }

    /// `∫ dθ_{g1} ⋯ dθ_{gk} e`: derivatives are applied rightmost first, so
    /// that `∫ dθ_a dθ_b θ_b θ_a = 1`.
    pub fn berezin_integral(&self, generators: &[usize]) -> Result<Self> {
        for (i, g) in generators.iter().enumerate() {
            if *g >= self.n {
                return Err(GeomError::UnknownGenerator(*g));
            }
            if generators[..i].contains(g) {
                return Err(GeomError::UnknownGenerator(*g));
            }
        }
        let mut e = self.clone();
        for &g in generators.iter().rev() {
            e = e.left_derivative(g)?;
        }
        Ok(e)
    }
}

impl fmt::Display for GrassmannElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&m, &c) in &self.coeffs {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for i in 0..self.n {
                if m & (1 << i) != 0 {
                    write!(f, "·θ{i}")?;
                }
            }
        }
        Ok(())
    }
}

impl Add for &GrassmannElement {
    type Output = GrassmannElement;
    fn add(self, o: &GrassmannElement) -> GrassmannElement {
        self.check_same(o);
        let mut out = self.clone();
        for (&m, &c) in &o.coeffs {
            out.add_term(m, c);
        }
        out
    }
}

impl Sub for &GrassmannElement {
    type Output = GrassmannElement;
    fn sub(self, o: &GrassmannElement) -> GrassmannElement {
        self.check_same(o);
        let mut out = self.clone();
        for (&m, &c) in &o.coeffs {
            out.add_term(m, -c);
        }
        out
    }
}

impl Mul for &GrassmannElement {
    type Output = GrassmannElement;
    fn mul(self, o: &GrassmannElement) -> GrassmannElement {
        self.check_same(o);
        let mut out = GrassmannElement::zero(self.n);
        for (&ma, &ca) in &self.coeffs {
            for (&mb, &cb) in &o.coeffs {
                if ma & mb == 0 {
                    out.add_term(ma | mb, product_sign(ma, mb) * ca * cb);
                }
            }
        }
        out
    }
}

impl Neg for &GrassmannElement {
    type Output = GrassmannElement;
    fn neg(self) -> GrassmannElement {
        self.scale(-1.0)
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr for GrassmannElement {
            type Output = GrassmannElement;
            fn $m(self, o: GrassmannElement) -> GrassmannElement {
                (&self).$m(&o)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl Neg for GrassmannElement {
    type Output = GrassmannElement;
    fn neg(self) -> GrassmannElement {
        self.scale(-1.0)
    }
}

fn check_antisymmetric(a: &Matrix<f64>) -> Result<()> {
    if a.rows != a.cols {
        return Err(GeomError::Degree("Pfaffian of a non-square matrix".into()));
    }
    if a.rows % 2 == 1 {
        return Err(GeomError::OddDimension(a.rows));
    }
    let scale = a.max_abs().max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..a.rows {
        for j in 0..a.rows {
            worst = worst.max((a.at(i, j) + a.at(j, i)).abs());
        }
    }
    if worst > 1e-8 * scale {
        return Err(GeomError::Asymmetry(worst));
    }
    Ok(())
}

fn pfaffian_expansion(a: &Matrix<f64>, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    let first = idx[0];
    let mut s = 0.0;
    for (k, &j) in idx.iter().enumerate().skip(1) {
        let rest: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| i != first && i != j)
            .collect();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        s += sign * a.at(first, j) * pfaffian_expansion(a, &rest);
    }
    s
}

/// Pfaffian by skew-symmetric Gaussian elimination with pivoting.
fn pfaffian_elimination(a: &Matrix<f64>) -> f64 {
    let n = a.rows;
    let mut m = a.clone();
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        // pivot: largest entry in column k below the diagonal
        let mut p = k + 1;
        for i in k + 2..n {
            if m.at(i, k).abs() > m.at(p, k).abs() {
                p = i;
            }
        }
        if p != k + 1 {
            // swap rows/cols k+1 and p
            for j in 0..n {
                m.data.swap((k + 1) * n + j, p * n + j);
            }
            for i in 0..n {
                m.data.swap(i * n + k + 1, i * n + p);
            }
            pf = -pf;
        }
        let piv = m.at(k, k + 1);
        if piv == 0.0 {
            return 0.0;
        }
        pf *= piv;
        // eliminate rows/cols k+2.. against the (k, k+1) block
        for i in k + 2..n {
            let tau = m.at(k, i) / piv;
            for j in 0..n {
                let v = m.at(i, j) - tau * m.at(k + 1, j);
                m.set(i, j, v);
            }
            for j in 0..n {
                let v = m.at(j, i) - tau * m.at(j, k + 1);
                m.set(j, i, v);
            }
        }
        k += 2;
    }
    pf
}

/// `Pf(A)`, by recursive expansion up to `n = 8` and elimination above.
pub fn pfaffian(a: &Matrix<f64>) -> Result<f64> {
    check_antisymmetric(a)?;
    let n = a.rows;
    if n <= 8 {
        let idx: Vec<usize> = (0..n).collect();
        Ok(pfaffian_expansion(a, &idx))
    } else {
        Ok(pfaffian_elimination(a))
    }
}

/// `∫ exp(½ ψᵀ A ψ) dψ_n ⋯ dψ_1`, evaluated exactly in the Grassmann
/// algebra; equals `Pf(A)`.
pub fn fermionic_gaussian(a: &Matrix<f64>) -> Result<f64> {
    check_antisymmetric(a)?;
    let n = a.rows;
    if n > MAX_GENERATORS {
        return pfaffian(a);
    }
    let mut q = GrassmannElement::zero(n);
    for i in 0..n {
        for j in i + 1..n {
            // ½(A_ij ψ_i ψ_j + A_ji ψ_j ψ_i) = A_ij ψ_i ψ_j
            q.add_term((1 << i) | (1 << j), a.at(i, j));
        }
    }
    let measure: Vec<usize> = (0..n).rev().collect();
    Ok(q.exp().berezin_integral(&measure)?.body())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g(n: usize, i: usize) -> GrassmannElement {
        GrassmannElement::generator(n, i).unwrap()
    }

    #[test]
    fn anticommutation_and_nilpotency() {
        let (a, b) = (g(3, 0), g(3, 2));
        assert_eq!(&a * &b, -(&b * &a));
        assert_eq!(&a * &a, GrassmannElement::zero(3));
    }

    #[test]
    fn associativity_on_random_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rand_el = |rng: &mut ChaCha8Rng| {
            let mut e = GrassmannElement::zero(5);
            for m in 0..32u32 {
                if rng.gen_bool(0.4) {
                    e.add_term(m, rng.gen_range(-1.0..1.0));
                }
            }
            e
        };
        for _ in 0..20 {
            let (x, y, z) = (rand_el(&mut rng), rand_el(&mut rng), rand_el(&mut rng));
            let d = &(&(&x * &y) * &z) - &(&x * &(&y * &z));
            assert!(d.max_abs() < 1e-14);
        }
    }

    #[test]
    fn berezin_conventions() {
        let t = g(1, 0);
        assert_eq!(t.berezin_integral(&[0]).unwrap().body(), 1.0);
        assert_eq!(
            GrassmannElement::one(1)
                .berezin_integral(&[0])
                .unwrap()
                .body(),
            0.0
        );
        // θ⁺ = generator 0, θ⁻ = generator 1: ∫dθ⁺dθ⁻ θ⁻θ⁺ = 1
        let e = &g(2, 1) * &g(2, 0);
        assert_eq!(e.berezin_integral(&[0, 1]).unwrap().body(), 1.0);
        assert!(matches!(
            t.berezin_integral(&[3]),
            Err(GeomError::UnknownGenerator(3))
        ));
    }

    #[test]
    fn small_pfaffians() {
        let a = Matrix::from_vec(2, 2, vec![0.0, 2.5, -2.5, 0.0]);
        assert_eq!(pfaffian(&a).unwrap(), 2.5);
        assert_eq!(fermionic_gaussian(&a).unwrap(), 2.5);
        let mut b = Matrix::zeros(4, 4);
        b.set(0, 1, 2.0);
        b.set(1, 0, -2.0);
        b.set(2, 3, 3.0);
        b.set(3, 2, -3.0);
        assert_eq!(pfaffian(&b).unwrap(), 6.0);
        assert_eq!(fermionic_gaussian(&b).unwrap(), 6.0);
    }

    #[test]
    fn pfaffian_errors() {
        assert_eq!(
            pfaffian(&Matrix::zeros(3, 3)),
            Err(GeomError::OddDimension(3))
        );
        let a = Matrix::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(pfaffian(&a), Err(GeomError::Asymmetry(_))));
    }

    fn random_antisymmetric(n: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.gen_range(-1.0..1.0);
                a.set(i, j, v);
                a.set(j, i, -v);
            }
        }
        a
    }

    #[test]
    fn pfaffian_routes_agree_and_square_to_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [2, 4, 6, 8] {
            for _ in 0..20 {
                let a = random_antisymmetric(n, &mut rng);
                let p = pfaffian(&a).unwrap();
                let f = fermionic_gaussian(&a).unwrap();
                let e = pfaffian_elimination(&a);
                let d = a.det();
                assert!((p - f).abs() < 1e-12 * p.abs().max(1.0));
                assert!((p - e).abs() < 1e-12 * p.abs().max(1.0));
                assert!((p * p - d).abs() < 1e-10 * d.abs().max(1.0));
            }
        }
        let a = random_antisymmetric(10, &mut rng);
        let p = pfaffian(&a).unwrap();
        assert!((p * p - a.det()).abs() < 1e-10 * a.det().abs().max(1.0));
    }

    #[test]
    fn inverse_of_even_element() {
        let x = &(&g(4, 0) * &g(4, 1)) + &(&g(4, 2) * &g(4, 3)).scale(2.0);
        let a = &GrassmannElement::scalar(4, 3.0) + &x;
        let inv = a.inverse().unwrap();
        let id = &a * &inv;
        assert!((&id - &GrassmannElement::one(4)).max_abs() < 1e-15);
        assert_eq!(x.inverse(), Err(GeomError::SingularBody));
    }
}
