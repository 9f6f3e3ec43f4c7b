//! Coordinate tensor calculus: Christoffel symbols, curvature, exterior
//! calculus and Lie brackets.
//!
//! The `*_at` functions are generic over the scalar so that derived
//! quantities can themselves be differentiated. Component layouts:
//! `Γ[i·n² + j·n + k] = Γ^i_{jk}` (j is the differentiating direction),
//! `R[i·n³ + j·n² + k·n + l] = R_{ijkl} = g(R(∂_i, ∂_j)∂_k, ∂_l)` with
//! `R(X, Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_{[X,Y]}`, and forms are stored as full
//! antisymmetric arrays of length `n^k`.

use crate::chart::{jacobian, ChartField, Smooth};
use crate::dual::Real;
use crate::error::{GeomError, Result};
use crate::linalg::Matrix;

/// Flat index of a multi-index in `n^len` row-major layout.
pub fn flat(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

/// Inverse of [`flat`].
pub fn unflat(mut f: usize, n: usize, len: usize) -> Vec<usize> {
    let mut idx = vec![0; len];
    for slot in (0..len).rev() {
        idx[slot] = f % n;
        f /= n;
    }
    idx
}

/// Sign of the permutation sorting `idx`, or 0 if an index repeats.
pub fn perm_sign(idx: &[usize]) -> f64 {
    let mut s = 1.0;
    for a in 0..idx.len() {
        for b in a + 1..idx.len() {
            if idx[a] == idx[b] {
                return 0.0;
            }
            if idx[a] > idx[b] {
                s = -s;
            }
        }
    }
    s
}

/// Fully antisymmetric `k`-form array from components on increasing index
/// tuples.
pub fn form_from_entries<S: Real>(n: usize, k: usize, entries: &[(&[usize], S)]) -> Vec<S> {
    let mut out = vec![S::zero(); n.pow(k as u32)];
    for (idx, v) in entries {
        for f in 0..out.len() {
            let perm = unflat(f, n, k);
            let mut sorted = perm.clone();
            sorted.sort_unstable();
            if sorted.as_slice() == *idx {
                let s = perm_sign(&perm);
                if s != 0.0 {
                    out[f] += *v * s;
                }
            }
        }
    }
    out
}

/// Diagonal metric components.
pub fn diagonal<S: Real>(d: &[S]) -> Vec<S> {
    let n = d.len();
    let mut g = vec![S::zero(); n * n];
    for i in 0..n {
        g[i * n + i] = d[i];
    }
    g
}

pub fn metric_matrix<S: Real>(values: &[S], n: usize) -> Matrix<S> {
    Matrix::from_vec(n, n, values[..n * n].to_vec())
}

/// Levi-Civita Christoffel symbols at `x`, or `None` if `g` is singular.
pub fn christoffel_at<S: Real, G: Smooth + ?Sized>(g: &G, x: &[S]) -> Option<Vec<S>> {
    let n = x.len();
    let (gv, dg) = jacobian(g, x);
    let ginv = metric_matrix(&gv, n).inverse()?;
    // dg[(a*n+b)*n + c] = ∂_c g_ab
    let d = |a: usize, b: usize, c: usize| dg[(a * n + b) * n + c];
    let mut lowered = vec![S::zero(); n * n * n];
    for l in 0..n {
        for j in 0..n {
            for k in j..n {
                let v = (d(l, k, j) + d(j, l, k) - d(j, k, l)) * 0.5;
                lowered[(l * n + j) * n + k] = v;
                lowered[(l * n + k) * n + j] = v;
            }
        }
    }
    let mut gam = vec![S::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let mut s = S::zero();
                for l in 0..n {
                    s += ginv.at(i, l) * lowered[(l * n + j) * n + k];
                }
                gam[(i * n + j) * n + k] = s;
                gam[(i * n + k) * n + j] = s;
            }
        }
    }
    Some(gam)
}

/// The Christoffel symbols of a metric as a field in their own right.
/// Singular points evaluate to NaN.
pub struct Christoffel<'a, G: ?Sized>(pub &'a G);

impl<G: Smooth + ?Sized> Smooth for Christoffel<'_, G> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = x.len();
        christoffel_at(self.0, x).unwrap_or_else(|| vec![S::cst(f64::NAN); n * n * n])
    }
}

/// Curvature of an arbitrary connection given its symbols as a field.
/// `(R(∂_i, ∂_j)∂_k)^m = ∂_iΓ^m_{jk} − ∂_jΓ^m_{ik} + Γ^m_{ip}Γ^p_{jk} − Γ^m_{jp}Γ^p_{ik}`,
/// returned with the upper index last: `out[i,j,k,m]`.
pub fn connection_curvature_at<S: Real, C: Smooth + ?Sized>(conn: &C, x: &[S]) -> Vec<S> {
    let n = x.len();
    let (gam, dgam) = jacobian(conn, x);
    let g3 = |m: usize, j: usize, k: usize| gam[(m * n + j) * n + k];
    let dg3 = |m: usize, j: usize, k: usize, i: usize| dgam[((m * n + j) * n + k) * n + i];
    let mut out = vec![S::zero(); n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for k in 0..n {
                for m in 0..n {
                    let mut s = dg3(m, j, k, i) - dg3(m, i, k, j);
                    for p in 0..n {
                        s += g3(m, i, p) * g3(p, j, k) - g3(m, j, p) * g3(p, i, k);
                    }
                    out[((i * n + j) * n + k) * n + m] = s;
                }
            }
        }
    }
    out
}

/// Lowers the last (upper) index of `R(∂_i,∂_j)∂_k` with `g`.
pub fn lower_last<S: Real>(t: &[S], g: &Matrix<S>, n: usize) -> Vec<S> {
    let mut out = vec![S::zero(); t.len()];
    let blocks = t.len() / n;
    for b in 0..blocks {
        for l in 0..n {
            let mut s = S::zero();
            for m in 0..n {
                s += t[b * n + m] * g.at(m, l);
            }
            out[b * n + l] = s;
        }
    }
    out
}

/// Fully lowered Riemann tensor at `x`.
pub fn riemann_at<S: Real, G: Smooth + ?Sized>(g: &G, x: &[S]) -> Vec<S> {
    let n = x.len();
    let up = connection_curvature_at(&Christoffel(g), x);
    let gm = metric_matrix(&g.eval(x), n);
    lower_last(&up, &gm, n)
}

fn checked_metric<G: ChartField + ?Sized>(g: &G, p: &[f64]) -> Result<Matrix<f64>> {
    g.chart().check(p)?;
    let vals = g.eval(p);
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(GeomError::Evaluation);
    }
    let m = metric_matrix(&vals, p.len());
    if m.inverse().is_none() {
        return Err(GeomError::SingularMetric(p.to_vec()));
    }
    Ok(m)
}

fn finite(v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(GeomError::Evaluation)
    }
}

/// Levi-Civita symbols `Γ^i_{jk}` of `g` at `p`.
pub fn christoffel<G: ChartField + ?Sized>(g: &G, p: &[f64]) -> Result<Vec<f64>> {
    checked_metric(g, p)?;
    finite(christoffel_at(g, p).ok_or_else(|| GeomError::SingularMetric(p.to_vec()))?)
}

/// Fully lowered Riemann tensor `R_{ijkl}` of `g` at `p`.
pub fn riemann<G: ChartField + ?Sized>(g: &G, p: &[f64]) -> Result<Vec<f64>> {
    checked_metric(g, p)?;
    finite(riemann_at(g, p))
}

/// Largest violation of antisymmetry among all adjacent slot exchanges of a
/// `k`-slot array.
pub fn antisymmetry_residual(t: &[f64], k: usize, n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for f in 0..t.len() {
        let idx = unflat(f, n, k);
        for s in 0..k.saturating_sub(1) {
            let mut sw = idx.clone();
            sw.swap(s, s + 1);
            worst = worst.max((t[f] + t[flat(&sw, n)]).abs());
        }
    }
    worst
}

/// Symmetry defects of a lowered 4-slot curvature array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureResiduals {
    /// `max |R_{ijkl} + R_{jikl}|`
    pub first_pair: f64,
    /// `max |R_{ijkl} + R_{ijlk}|`
    pub second_pair: f64,
    /// `max |R_{ijkl} − R_{klij}|`
    pub pair_exchange: f64,
    /// `max |R_{ijkl} + R_{jkil} + R_{kijl}|`
    pub bianchi: f64,
}

pub fn curvature_residuals(r: &[f64], n: usize) -> CurvatureResiduals {
    let at = |i: usize, j: usize, k: usize, l: usize| r[((i * n + j) * n + k) * n + l];
    let mut out = CurvatureResiduals {
        first_pair: 0.0,
        second_pair: 0.0,
        pair_exchange: 0.0,
        bianchi: 0.0,
    };
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let v = at(i, j, k, l);
                    out.first_pair = out.first_pair.max((v + at(j, i, k, l)).abs());
                    out.second_pair = out.second_pair.max((v + at(i, j, l, k)).abs());
                    out.pair_exchange = out.pair_exchange.max((v - at(k, l, i, j)).abs());
                    out.bianchi = out.bianchi.max((v + at(j, k, i, l) + at(k, i, j, l)).abs());
                }
            }
        }
    }
    out
}

/// `(dω)_{i0..ik} = Σ_j (−1)^j ∂_{i_j} ω_{i0..î_j..ik}` for a `k`-form field.
pub fn exterior_derivative_at<S: Real, F: Smooth + ?Sized>(omega: &F, k: usize, x: &[S]) -> Vec<S> {
    let n = x.len();
    let (_, d) = jacobian(omega, x);
    let len = n.pow(k as u32 + 1);
    let mut out = vec![S::zero(); len];
    for f in 0..len {
        let idx = unflat(f, n, k + 1);
        if perm_sign(&idx) == 0.0 {
            continue;
        }
        let mut s = S::zero();
        for j in 0..=k {
            let mut rest = idx.clone();
            let dir = rest.remove(j);
            let term = d[flat(&rest, n) * n + dir];
            if j % 2 == 0 {
                s += term;
            } else {
                s -= term;
            }
        }
        out[f] = s;
    }
    out
}

/// The exterior derivative of a form field as a field.
pub struct ExteriorDerivative<'a, F: ?Sized> {
    pub form: &'a F,
    pub degree: usize,
}

impl<F: Smooth + ?Sized> Smooth for ExteriorDerivative<'_, F> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        exterior_derivative_at(self.form, self.degree, x)
    }
}

/// Wedge product of a `p`-form and a `q`-form given as component arrays:
/// the sum over `(p, q)`-shuffles, so `dx ∧ dy` has component 1 at `(x, y)`.
pub fn wedge<S: Real>(a: &[S], p: usize, b: &[S], q: usize, n: usize) -> Result<Vec<S>> {
    if a.len() != n.pow(p as u32) || b.len() != n.pow(q as u32) {
        return Err(GeomError::Degree(
            "component array length does not match degree".into(),
        ));
    }
    if p + q > n {
        return Err(GeomError::Degree(format!(
            "wedge of degrees {p} and {q} exceeds dimension {n}"
        )));
    }
    let k = p + q;
    // all p-subsets of positions 0..k
    let shuffles: Vec<(Vec<usize>, Vec<usize>, f64)> = (0u32..(1 << k))
        .filter(|m| m.count_ones() as usize == p)
        .map(|m| {
            let first: Vec<usize> = (0..k).filter(|i| m & (1 << i) != 0).collect();
            let second: Vec<usize> = (0..k).filter(|i| m & (1 << i) == 0).collect();
            let order: Vec<usize> = first.iter().chain(&second).copied().collect();
            (first, second, perm_sign(&order))
        })
        .collect();
    let len = n.pow(k as u32);
    let mut out = vec![S::zero(); len];
    for f in 0..len {
        let idx = unflat(f, n, k);
        if perm_sign(&idx) == 0.0 {
            continue;
        }
        let mut s = S::zero();
        for (first, second, sign) in &shuffles {
            let ia: Vec<usize> = first.iter().map(|&i| idx[i]).collect();
            let ib: Vec<usize> = second.iter().map(|&i| idx[i]).collect();
            s += a[flat(&ia, n)] * b[flat(&ib, n)] * *sign;
        }
        out[f] = s;
    }
    Ok(out)
}

/// Contraction of a vector into the first slot of a `k`-form.
pub fn interior<S: Real>(v: &[S], omega: &[S], k: usize, n: usize) -> Result<Vec<S>> {
    if k == 0 {
        return Err(GeomError::Degree("interior product of a 0-form".into()));
    }
    if omega.len() != n.pow(k as u32) || v.len() != n {
        return Err(GeomError::Degree(
            "component array length does not match degree".into(),
        ));
    }
    let rest = n.pow(k as u32 - 1);
    let mut out = vec![S::zero(); rest];
    for j in 0..n {
        for r in 0..rest {
            out[r] += v[j] * omega[j * rest + r];
        }
    }
    Ok(out)
}

/// `[X, Y]^i = X^j ∂_j Y^i − Y^j ∂_j X^i`.
pub fn lie_bracket_at<S: Real, X: Smooth + ?Sized, Y: Smooth + ?Sized>(
    xf: &X,
    yf: &Y,
    x: &[S],
) -> Vec<S> {
    let n = x.len();
    let (xv, dx) = jacobian(xf, x);
    let (yv, dy) = jacobian(yf, x);
    (0..n)
        .map(|i| {
            let mut s = S::zero();
            for j in 0..n {
                s += xv[j] * dy[i * n + j] - yv[j] * dx[i * n + j];
            }
            s
        })
        .collect()
}

/// The Lie bracket of two vector fields as a field.
pub struct LieBracket<'a, X: ?Sized, Y: ?Sized>(pub &'a X, pub &'a Y);

impl<X: Smooth + ?Sized, Y: Smooth + ?Sized> Smooth for LieBracket<'_, X, Y> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        lie_bracket_at(self.0, self.1, x)
    }
}

/// Levi-Civita covariant derivative of a `k`-covariant tensor field:
/// `out[i, j1..jk] = ∇_i T_{j1..jk}`.
pub fn covariant_derivative_covariant_at<S: Real, T: Smooth + ?Sized>(
    gam: &[S],
    t: &T,
    k: usize,
    x: &[S],
) -> Vec<S> {
    let n = x.len();
    let (tv, dt) = jacobian(t, x);
    let len = n.pow(k as u32);
    let mut out = vec![S::zero(); n * len];
    for i in 0..n {
        for f in 0..len {
            let idx = unflat(f, n, k);
            let mut s = dt[f * n + i];
            for slot in 0..k {
                let mut sw = idx.clone();
                for p in 0..n {
                    sw[slot] = p;
                    s -= gam[(p * n + i) * n + idx[slot]] * tv[flat(&sw, n)];
                }
            }
            out[i * len + f] = s;
        }
    }
    out
}

/// `(∇_X Y)^i = X^j (∂_j Y^i + Γ^i_{jk} Y^k)` for a vector field `Y`.
pub fn covariant_derivative_vector_at<S: Real, Y: Smooth + ?Sized>(
    gam: &[S],
    xv: &[S],
    yf: &Y,
    x: &[S],
) -> Vec<S> {
    let n = x.len();
    let (yv, dy) = jacobian(yf, x);
    (0..n)
        .map(|i| {
            let mut s = S::zero();
            for j in 0..n {
                let mut inner = dy[i * n + j];
                for k in 0..n {
                    inner += gam[(i * n + j) * n + k] * yv[k];
                }
                s += xv[j] * inner;
            }
            s
        })
        .collect()
}

/// Lie derivative of a `k`-covariant tensor field along `v`:
/// `(L_V T)_{i1..ik} = V^j ∂_j T_{i1..ik} + Σ_slots T_{..j..} ∂_{i_slot} V^j`.
pub fn lie_derivative_covariant_at<S: Real, V: Smooth + ?Sized, T: Smooth + ?Sized>(
    v: &V,
    t: &T,
    k: usize,
    x: &[S],
) -> Vec<S> {
    let n = x.len();
    let (vv, dv) = jacobian(v, x);
    let (tv, dt) = jacobian(t, x);
    let len = n.pow(k as u32);
    (0..len)
        .map(|f| {
            let idx = unflat(f, n, k);
            let mut s = S::zero();
            for j in 0..n {
                s += vv[j] * dt[f * n + j];
            }
            for slot in 0..k {
                let mut sw = idx.clone();
                for j in 0..n {
                    sw[slot] = j;
                    s += tv[flat(&sw, n)] * dv[j * n + idx[slot]];
                }
            }
            s
        })
        .collect()
}

/// Operations accepted by [`form_calculus`].
#[derive(Debug, Clone)]
pub enum FormOp<'a> {
    D,
    Wedge { eta: &'a [f64], degree: usize },
    Interior(&'a [f64]),
}

/// Applies `d`, `∧ η` or `ι_X` to the `k`-form field `omega` at `p`.
pub fn form_calculus<F: ChartField + ?Sized>(
    omega: &F,
    op: FormOp<'_>,
    p: &[f64],
) -> Result<Vec<f64>> {
    omega.chart().check(p)?;
    let v = omega.valence();
    let k = v.covariant;
    if v.contravariant != 0 || (k > 1 && !v.antisymmetric) {
        return Err(GeomError::Degree(
            "operand is not a differential form".into(),
        ));
    }
    let n = p.len();
    let out = match op {
        FormOp::D => {
            if k + 1 > n {
                return Err(GeomError::Degree(format!(
                    "d of a {k}-form in dimension {n}"
                )));
            }
            exterior_derivative_at(omega, k, p)
        }
        FormOp::Wedge { eta, degree } => wedge(&omega.eval(p), k, eta, degree, n)?,
        FormOp::Interior(x) => interior(x, &omega.eval(p), k, n)?,
    };
    finite(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Chart, PolynomialField, Valence};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Polar(Chart);
    impl Smooth for Polar {
        fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
            vec![S::one(), S::zero(), S::zero(), x[0] * x[0]]
        }
    }
    impl ChartField for Polar {
        fn chart(&self) -> &Chart {
            &self.0
        }
        fn valence(&self) -> Valence {
            Valence::SYMMETRIC2
        }
    }

    struct Sphere(Chart);
    impl Smooth for Sphere {
        fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
            let s = x[0].sin();
            vec![S::one(), S::zero(), S::zero(), s * s]
        }
    }
    impl ChartField for Sphere {
        fn chart(&self) -> &Chart {
            &self.0
        }
        fn valence(&self) -> Valence {
            Valence::SYMMETRIC2
        }
    }

    struct XDy(Chart);
    impl Smooth for XDy {
        fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
            vec![S::zero(), x[0]]
        }
    }
    impl ChartField for XDy {
        fn chart(&self) -> &Chart {
            &self.0
        }
        fn valence(&self) -> Valence {
            Valence::COVECTOR
        }
    }

    fn plane() -> Chart {
        Chart::new("plane", vec![-3.0, -3.0], vec![3.0, 3.0]).unwrap()
    }

    #[test]
    fn polar_christoffel() {
        let c = Chart::new("polar", vec![0.5, -1.0], vec![3.0, 1.0]).unwrap();
        let gam = christoffel(&Polar(c), &[2.0, 0.0]).unwrap();
        assert!((gam[0 * 4 + 1 * 2 + 1] + 2.0).abs() < 1e-14);
        assert!((gam[1 * 4 + 0 * 2 + 1] - 0.5).abs() < 1e-14);
        assert!((gam[1 * 4 + 1 * 2 + 0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn flat_polar_has_zero_curvature() {
        let c = Chart::new("polar", vec![0.5, -1.0], vec![3.0, 1.0]).unwrap();
        let r = riemann(&Polar(c), &[1.3, 0.2]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn round_sphere_curvature() {
        let c = Chart::new("s2", vec![0.1, -3.0], vec![3.0, 3.0]).unwrap();
        let th = std::f64::consts::FRAC_PI_3;
        let r = riemann(&Sphere(c), &[th, 0.0]).unwrap();
        // R(∂θ,∂φ,∂φ,∂θ) = K |∂θ ∧ ∂φ|² with K = 1
        assert!((r[flat(&[0, 1, 1, 0], 2)] - 0.75).abs() < 1e-12);
        assert!((r[flat(&[0, 1, 0, 1], 2)] + 0.75).abs() < 1e-12);
        let res = curvature_residuals(&r, 2);
        assert!(res.first_pair < 1e-14 && res.second_pair < 1e-14 && res.pair_exchange < 1e-14);
    }

    #[test]
    fn singular_metric_is_reported() {
        let c = Chart::new("polar", vec![-1.0, -1.0], vec![3.0, 1.0]).unwrap();
        assert!(matches!(
            christoffel(&Polar(c), &[0.0, 0.0]),
            Err(GeomError::SingularMetric(_))
        ));
    }

    #[test]
    fn d_of_x_dy() {
        let dw = form_calculus(&XDy(plane()), FormOp::D, &[0.4, 0.1]).unwrap();
        assert_eq!(dw, vec![0.0, 1.0, -1.0, 0.0]);
    }

    #[test]
    fn interior_sign() {
        let dxdy = [0.0, 1.0, -1.0, 0.0];
        assert_eq!(interior(&[0.0, 1.0], &dxdy, 2, 2).unwrap(), vec![-1.0, 0.0]);
    }

    #[test]
    fn wedge_of_coordinate_covectors() {
        let w = wedge(&[1.0, 0.0, 0.0], 1, &[0.0, 1.0, 0.0], 1, 3).unwrap();
        assert_eq!(w[flat(&[0, 1], 3)], 1.0);
        assert_eq!(w[flat(&[1, 0], 3)], -1.0);
        assert!(wedge(&[1.0, 0.0], 1, &[0.0; 4], 2, 2).is_err());
        assert!(interior(&[1.0, 0.0], &[1.0], 0, 2).is_err());
    }

    #[test]
    fn d_squared_vanishes_on_random_polynomials() {
        let c = Chart::new("box", vec![-1.0; 4], vec![1.0; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 0..3 {
            let f =
                PolynomialField::random(&c, Valence::form(k), 4usize.pow(k as u32), 4, &mut rng);
            // antisymmetrize the raw polynomial components
            let anti = Antisym { f: &f, k };
            let d1 = ExteriorDerivative {
                form: &anti,
                degree: k,
            };
            for p in c.sample(5, k as u64) {
                let dd = exterior_derivative_at(&d1, k + 1, &p);
                assert!(dd.iter().all(|v| v.abs() < 1e-10), "k={k}");
            }
        }
    }

    struct Antisym<'a> {
        f: &'a PolynomialField,
        k: usize,
    }
    impl Smooth for Antisym<'_> {
        fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
            let n = x.len();
            let raw = self.f.eval(x);
            (0..raw.len())
                .map(|f| {
                    let idx = unflat(f, n, self.k);
                    if perm_sign(&idx) == 0.0 && self.k > 1 {
                        return S::zero();
                    }
                    let mut s = S::zero();
                    permutations(&idx, &mut |p, sign| s += raw[flat(p, n)] * sign);
                    s
                })
                .collect()
        }
    }

    fn permutations(idx: &[usize], f: &mut impl FnMut(&[usize], f64)) {
        fn rec(
            cur: &mut Vec<usize>,
            rest: &mut Vec<usize>,
            f: &mut dyn FnMut(&[usize], f64),
            orig: &[usize],
        ) {
            if rest.is_empty() {
                let pos: Vec<usize> = cur
                    .iter()
                    .map(|c| orig.iter().position(|o| o == c).unwrap())
                    .collect();
                f(cur, perm_sign(&pos));
                return;
            }
            for i in 0..rest.len() {
                let v = rest.remove(i);
                cur.push(v);
                rec(cur, rest, f, orig);
                cur.pop();
                rest.insert(i, v);
            }
        }
        rec(&mut Vec::new(), &mut idx.to_vec(), f, idx);
    }

    #[test]
    fn lie_brackets() {
        struct XDyVec;
        impl Smooth for XDyVec {
            fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
                vec![S::zero(), x[0]]
            }
        }
        struct Dx;
        impl Smooth for Dx {
            fn eval<S: Real>(&self, _x: &[S]) -> Vec<S> {
                vec![S::one(), S::zero()]
            }
        }
        let b = lie_bracket_at(&XDyVec, &Dx, &[0.3, 0.9]);
        assert_eq!(b, vec![0.0, -1.0]);
        assert_eq!(lie_bracket_at(&Dx, &Dx, &[0.3, 0.9]), vec![0.0, 0.0]);
    }

    #[test]
    fn jacobi_identity_on_random_fields() {
        let c = Chart::new("box", vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = PolynomialField::random(&c, Valence::VECTOR, 3, 3, &mut rng);
        let y = PolynomialField::random(&c, Valence::VECTOR, 3, 3, &mut rng);
        let z = PolynomialField::random(&c, Valence::VECTOR, 3, 3, &mut rng);
        let yz = LieBracket(&y, &z);
        let zx = LieBracket(&z, &x);
        let xy = LieBracket(&x, &y);
        for p in c.sample(10, 3) {
            let a = lie_bracket_at(&x, &yz, &p);
            let b = lie_bracket_at(&y, &zx, &p);
            let cc = lie_bracket_at(&z, &xy, &p);
            for i in 0..3 {
                assert!((a[i] + b[i] + cc[i]).abs() < 1e-10);
            }
        }
    }
}
