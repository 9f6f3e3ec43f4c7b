//! Generalized tangent bundle `TM ⊕ T*M`: pairing, the H-twisted Courant
//! bracket, the metric splitting `V±`, Bismut connections and their
//! curvatures.

use crate::calculus::{
    christoffel_at, connection_curvature_at, covariant_derivative_covariant_at,
    exterior_derivative_at, lower_last, metric_matrix,
};
use crate::chart::{jacobian, Chart, ChartField, Smooth};
use crate::dual::Real;
use crate::error::{GeomError, Result};
use crate::linalg::Matrix;

/// Which of the two Bismut connections `∇± = ∇ ± ½ g⁻¹H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// A metric `g` and closed 3-form `H` on one chart.
pub trait Background: Sync {
    fn chart(&self) -> &Chart;
    /// `g_{ij}`, row-major.
    fn metric<S: Real>(&self, x: &[S]) -> Vec<S>;
    /// `H_{ijk}`, fully antisymmetric.
    fn flux<S: Real>(&self, x: &[S]) -> Vec<S>;

    fn dim(&self) -> usize {
        self.chart().dim()
    }
}

/// The metric of a background as a field.
pub struct MetricField<'a, B: ?Sized>(pub &'a B);

impl<B: Background + ?Sized> Smooth for MetricField<'_, B> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.0.metric(x)
    }
}

/// The flux of a background as a field.
pub struct FluxField<'a, B: ?Sized>(pub &'a B);

impl<B: Background + ?Sized> Smooth for FluxField<'_, B> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.0.flux(x)
    }
}

/// A background assembled from two chart fields.
pub struct FieldBackground<G, H> {
    pub g: G,
    pub h: H,
}

impl<G: ChartField, H: ChartField> FieldBackground<G, H> {
    pub fn new(g: G, h: H) -> Result<Self> {
        if g.valence().covariant != 2 || g.valence().contravariant != 0 {
            return Err(GeomError::Degree(
                "metric must be a symmetric 2-tensor".into(),
            ));
        }
        let v = h.valence();
        if v.covariant != 3 || v.contravariant != 0 || !v.antisymmetric {
            return Err(GeomError::Degree("flux must be a 3-form".into()));
        }
        if g.chart() != h.chart() {
            return Err(GeomError::InvalidChart(
                "metric and flux live on different charts".into(),
            ));
        }
        Ok(FieldBackground { g, h })
    }
}

impl<G: ChartField, H: ChartField> Background for FieldBackground<G, H> {
    fn chart(&self) -> &Chart {
        self.g.chart()
    }
    fn metric<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.g.eval(x)
    }
    fn flux<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.h.eval(x)
    }
}

/// A section `X + ξ` of `TM ⊕ T*M` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedVector {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub at: Vec<f64>,
}

impl GeneralizedVector {
    /// `⟨X + ξ, Y + η⟩ = ξ(Y) + η(X)`.
    pub fn pairing(&self, other: &GeneralizedVector) -> f64 {
        crate::linalg::dot(&self.xi, &other.x) + crate::linalg::dot(&other.xi, &self.x)
    }

    /// The element `X ± g(X)` of `V±`.
    pub fn from_v<B: Background + ?Sized>(bg: &B, sign: Sign, x: Vec<f64>, at: Vec<f64>) -> Self {
        let n = x.len();
        let g = metric_matrix(&bg.metric(&at), n);
        let xi = g
            .mat_vec(&x)
            .into_iter()
            .map(|v| v * sign.value())
            .collect();
        GeneralizedVector { x, xi, at }
    }
}

/// `X± = ½(X ± g⁻¹ξ)`, so that `A = (X₊ + g X₊) + (X₋ − g X₋)`.
pub fn split_pm<B: Background + ?Sized>(
    a: &GeneralizedVector,
    bg: &B,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.x.len();
    let g = metric_matrix(&bg.metric(&a.at), n);
    let u = g
        .solve(&a.xi)
        .ok_or_else(|| GeomError::SingularMetric(a.at.clone()))?;
    let plus = (0..n).map(|i| 0.5 * (a.x[i] + u[i])).collect();
    let minus = (0..n).map(|i| 0.5 * (a.x[i] - u[i])).collect();
    Ok((plus, minus))
}

/// The H-twisted Courant bracket of two generalized vector fields, each a
/// field with `2n` components (vector part, then covector part):
/// `[X, Y] + L_X η − ι_Y dξ + ι_Y ι_X H`.
pub fn courant_bracket_at<S: Real, A: Smooth + ?Sized, C: Smooth + ?Sized, H: Smooth + ?Sized>(
    a: &A,
    b: &C,
    h: &H,
    x: &[S],
) -> (Vec<S>, Vec<S>) {
    let n = x.len();
    let (av, da) = jacobian(a, x);
    let (bv, db) = jacobian(b, x);
    let hv = h.eval(x);
    // da[c*n + k] = ∂_k a_c ; vector part c < n, covector part c = n + i
    let mut vec_part = vec![S::zero(); n];
    let mut co_part = vec![S::zero(); n];
    for i in 0..n {
        for j in 0..n {
            vec_part[i] += av[j] * db[i * n + j] - bv[j] * da[i * n + j];
        }
    }
    for k in 0..n {
        let mut s = S::zero();
        for j in 0..n {
            // ι_X dη
            s += av[j] * (db[(n + k) * n + j] - db[(n + j) * n + k]);
            // d(η(X))
            s += db[(n + j) * n + k] * av[j] + bv[n + j] * da[j * n + k];
            // −ι_Y dξ
            s -= bv[j] * (da[(n + k) * n + j] - da[(n + j) * n + k]);
            // H(X, Y, ·)
            for i in 0..n {
                s += hv[(j * n + i) * n + k] * av[j] * bv[i];
            }
        }
        co_part[k] = s;
    }
    (vec_part, co_part)
}

/// [`courant_bracket_at`] at a checked point of `bg`'s chart.
pub fn courant_bracket<B: Background + ?Sized, A: Smooth + ?Sized, C: Smooth + ?Sized>(
    a: &A,
    b: &C,
    bg: &B,
    p: &[f64],
) -> Result<GeneralizedVector> {
    bg.chart().check(p)?;
    let (x, xi) = courant_bracket_at(a, b, &FluxField(bg), p);
    if x.iter().chain(&xi).any(|v| !v.is_finite()) {
        return Err(GeomError::Evaluation);
    }
    Ok(GeneralizedVector {
        x,
        xi,
        at: p.to_vec(),
    })
}

/// Connection symbols of `∇± = ∇ ± ½ g⁻¹H`:
/// `Γ±^i_{jk} = Γ^i_{jk} ± ½ g^{il} H_{ljk}`, so `(∇±_X Y)^i = X^j(∂_j Y^i + Γ±^i_{jk} Y^k)`.
pub fn bismut_symbols_at<S: Real, B: Background + ?Sized>(
    bg: &B,
    sign: Sign,
    x: &[S],
) -> Option<Vec<S>> {
    let n = x.len();
    let mf = MetricField(bg);
    let gam = christoffel_at(&mf, x)?;
    let ginv = metric_matrix(&bg.metric(x), n).inverse()?;
    let h = bg.flux(x);
    let half = 0.5 * sign.value();
    let mut out = gam;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = S::zero();
                for l in 0..n {
                    s += ginv.at(i, l) * h[(l * n + j) * n + k];
                }
                out[(i * n + j) * n + k] += s * half;
            }
        }
    }
    Some(out)
}

/// Bismut symbols as a field (NaN where `g` is singular).
pub struct BismutSymbols<'a, B: ?Sized> {
    pub bg: &'a B,
    pub sign: Sign,
}

impl<B: Background + ?Sized> Smooth for BismutSymbols<'_, B> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = x.len();
        bismut_symbols_at(self.bg, self.sign, x)
            .unwrap_or_else(|| vec![S::cst(f64::NAN); n * n * n])
    }
}

/// `∇_X Y` for symbols `gam`, a vector `xv` and a vector field `y`.
pub fn connection_derivative_at<S: Real, Y: Smooth + ?Sized>(
    gam: &[S],
    xv: &[S],
    y: &Y,
    x: &[S],
) -> Vec<S> {
    crate::calculus::covariant_derivative_vector_at(gam, xv, y, x)
}

/// `∇±_X Y` at `x` (NaN where `g` is singular).
pub fn bismut_derivative_at<
    S: Real,
    B: Background + ?Sized,
    X: Smooth + ?Sized,
    Y: Smooth + ?Sized,
>(
    bg: &B,
    sign: Sign,
    xf: &X,
    yf: &Y,
    x: &[S],
) -> Vec<S> {
    let n = x.len();
    match bismut_symbols_at(bg, sign, x) {
        Some(gam) => connection_derivative_at(&gam, &xf.eval(x), yf, x),
        None => vec![S::cst(f64::NAN); n],
    }
}

fn checked<B: Background + ?Sized>(bg: &B, p: &[f64]) -> Result<Matrix<f64>> {
    bg.chart().check(p)?;
    let g = metric_matrix(&bg.metric(p), p.len());
    if g.data.iter().any(|v| !v.is_finite()) {
        return Err(GeomError::Evaluation);
    }
    if g.inverse().is_none() {
        return Err(GeomError::SingularMetric(p.to_vec()));
    }
    Ok(g)
}

fn finite(v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(GeomError::Evaluation)
    }
}

/// `∇±_X Y` at a checked point.
pub fn bismut_derivative<B: Background + ?Sized, X: Smooth + ?Sized, Y: Smooth + ?Sized>(
    x: &X,
    y: &Y,
    sign: Sign,
    bg: &B,
    p: &[f64],
) -> Result<Vec<f64>> {
    checked(bg, p)?;
    finite(bismut_derivative_at(bg, sign, x, y, p))
}

/// The generalized vector field `X + s·g(X)` for a vector field `X`.
pub struct Graph<'a, B: ?Sized, F: ?Sized> {
    pub bg: &'a B,
    pub field: &'a F,
    pub sign: f64,
}

impl<B: Background + ?Sized, F: Smooth + ?Sized> Smooth for Graph<'_, B, F> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = x.len();
        let v = self.field.eval(x);
        let g = metric_matrix(&self.bg.metric(x), n);
        let gv = g.mat_vec(&v);
        v.into_iter()
            .chain(gv.into_iter().map(|c| c * self.sign))
            .collect()
    }
}

/// `∇±_X Y` recovered from the bracket: the `V±` component of
/// `[X ∓ g(X), Y ± g(Y)]_H`, returned as its vector part.
pub fn bismut_via_courant_at<
    S: Real,
    B: Background + ?Sized,
    X: Smooth + ?Sized,
    Y: Smooth + ?Sized,
>(
    bg: &B,
    sign: Sign,
    xf: &X,
    yf: &Y,
    x: &[S],
) -> Vec<S> {
    let n = x.len();
    let s = sign.value();
    let a = Graph {
        bg,
        field: xf,
        sign: -s,
    };
    let b = Graph {
        bg,
        field: yf,
        sign: s,
    };
    let (z, zeta) = courant_bracket_at(&a, &b, &FluxField(bg), x);
    let g = metric_matrix(&bg.metric(x), n);
    match g.solve(&zeta) {
        Some(u) => (0..n).map(|i| (z[i] + u[i] * s) * 0.5).collect(),
        None => vec![S::cst(f64::NAN); n],
    }
}

pub fn bismut_via_courant<B: Background + ?Sized, X: Smooth + ?Sized, Y: Smooth + ?Sized>(
    x: &X,
    y: &Y,
    sign: Sign,
    bg: &B,
    p: &[f64],
) -> Result<Vec<f64>> {
    checked(bg, p)?;
    finite(bismut_via_courant_at(bg, sign, x, y, p))
}

/// `R±_{ijkl}` from the closed formula
/// `R_{ijkl} ± ½(∇_i H_{jkl} − ∇_j H_{ikl}) + ¼(H_{ipl} H_{jk}{}^p − H_{jpl} H_{ik}{}^p)`
/// with Levi-Civita `∇H`.
pub fn bismut_curvature_formula_at<S: Real, B: Background + ?Sized>(
    bg: &B,
    sign: Sign,
    x: &[S],
) -> Vec<S> {
    let n = x.len();
    let mf = MetricField(bg);
    let nan = || vec![S::cst(f64::NAN); n.pow(4)];
    let Some(gam) = christoffel_at(&mf, x) else {
        return nan();
    };
    let g = metric_matrix(&bg.metric(x), n);
    let Some(ginv) = g.inverse() else {
        return nan();
    };
    let r = crate::calculus::riemann_at(&mf, x);
    let h = bg.flux(x);
    let dh = covariant_derivative_covariant_at(&gam, &FluxField(bg), 3, x);
    // H_{jk}^p
    let mut hup = vec![S::zero(); n * n * n];
    for j in 0..n {
        for k in 0..n {
            for p in 0..n {
                let mut s = S::zero();
                for q in 0..n {
                    s += ginv.at(p, q) * h[(j * n + k) * n + q];
                }
                hup[(j * n + k) * n + p] = s;
            }
        }
    }
    let h3 = |a: usize, b: usize, c: usize| h[(a * n + b) * n + c];
    let dh4 = |i: usize, a: usize, b: usize, c: usize| dh[((i * n + a) * n + b) * n + c];
    let sv = sign.value();
    let mut out = r;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut quad = S::zero();
                    for p in 0..n {
                        quad += h3(i, p, l) * hup[(j * n + k) * n + p]
                            - h3(j, p, l) * hup[(i * n + k) * n + p];
                    }
                    let lin = dh4(i, j, k, l) - dh4(j, i, k, l);
                    out[((i * n + j) * n + k) * n + l] += lin * (0.5 * sv) + quad * 0.25;
                }
            }
        }
    }
    out
}

/// `R±_{ijkl}` from the commutator `∇_X∇_Y − ∇_Y∇_X − ∇_{[X,Y]}` on
/// coordinate fields, lowered with `g`.
pub fn bismut_curvature_commutator_at<S: Real, B: Background + ?Sized>(
    bg: &B,
    sign: Sign,
    x: &[S],
) -> Vec<S> {
    let n = x.len();
    let up = connection_curvature_at(&BismutSymbols { bg, sign }, x);
    lower_last(&up, &metric_matrix(&bg.metric(x), n), n)
}

/// `R±_{ijkl}` at a checked point.
pub fn bismut_curvature<B: Background + ?Sized>(sign: Sign, bg: &B, p: &[f64]) -> Result<Vec<f64>> {
    checked(bg, p)?;
    finite(bismut_curvature_formula_at(bg, sign, p))
}

/// `max |dH|` at `p`.
pub fn flux_closure_residual<B: Background + ?Sized>(bg: &B, p: &[f64]) -> f64 {
    exterior_derivative_at(&FluxField(bg), 3, p)
        .iter()
        .fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::lie_bracket_at;
    use crate::chart::{PolynomialField, Valence};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Flat R³ with `H = c dx∧dy∧dz`.
    struct FlatFlux {
        chart: Chart,
        c: f64,
    }
    impl Background for FlatFlux {
        fn chart(&self) -> &Chart {
            &self.chart
        }
        fn metric<S: Real>(&self, _x: &[S]) -> Vec<S> {
            let mut g = vec![S::zero(); 9];
            for i in 0..3 {
                g[i * 4] = S::one();
            }
            g
        }
        fn flux<S: Real>(&self, _x: &[S]) -> Vec<S> {
            levi_civita3(self.c)
        }
    }

    fn levi_civita3<S: Real>(c: f64) -> Vec<S> {
        (0..27)
            .map(|f| {
                let idx = crate::calculus::unflat(f, 3, 3);
                S::cst(c * crate::calculus::perm_sign(&idx))
            })
            .collect()
    }

    /// A curved metric with non-constant flux on R³.
    struct Curved {
        chart: Chart,
    }
    impl Background for Curved {
        fn chart(&self) -> &Chart {
            &self.chart
        }
        fn metric<S: Real>(&self, x: &[S]) -> Vec<S> {
            let a = (x[0] * 0.3).exp() + x[1] * x[1] * 0.2;
            let b = x[0].sin() * 0.1;
            let c = S::one() + x[2] * x[0] * 0.1;
            vec![
                a,
                b,
                S::zero(),
                b,
                S::one() + x[2] * x[2] * 0.3,
                S::cst(0.05),
                S::zero(),
                S::cst(0.05),
                c,
            ]
        }
        fn flux<S: Real>(&self, x: &[S]) -> Vec<S> {
            // any top form on R³ is closed
            let f = S::one() + x[0] * x[1] - x[2].cos() * 0.5;
            levi_civita3::<S>(1.0).into_iter().map(|e| e * f).collect()
        }
    }

    fn box3() -> Chart {
        Chart::new("box", vec![-1.0; 3], vec![1.0; 3]).unwrap()
    }

    struct Const(Vec<f64>);
    impl Smooth for Const {
        fn eval<S: Real>(&self, _x: &[S]) -> Vec<S> {
            self.0.iter().map(|&v| S::cst(v)).collect()
        }
    }

    #[test]
    fn bracket_of_coordinate_fields_in_flux() {
        let bg = FlatFlux {
            chart: box3(),
            c: 1.0,
        };
        let a = Const(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = Const(vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let r = courant_bracket(&a, &b, &bg, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(r.x, vec![0.0; 3]);
        assert_eq!(r.xi, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn untwisted_bracket_of_vectors_is_lie_bracket() {
        let c = box3();
        let bg = FlatFlux {
            chart: c.clone(),
            c: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = PolynomialField::random(&c, Valence::VECTOR, 3, 2, &mut rng);
        let mut y = PolynomialField::random(&c, Valence::VECTOR, 3, 2, &mut rng);
        x.components.extend(vec![vec![]; 3]);
        y.components.extend(vec![vec![]; 3]);
        for p in c.sample(5, 1) {
            let r = courant_bracket(&x, &y, &bg, &p).unwrap();
            let l: Vec<f64> = lie_bracket_at(&x, &y, &p);
            assert_eq!(r.x, l);
            assert!(r.xi.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn split_reconstructs_and_pairs() {
        let bg = Curved { chart: box3() };
        let p = vec![0.2, -0.3, 0.5];
        let a = GeneralizedVector {
            x: vec![0.3, -1.0, 2.0],
            xi: vec![1.5, 0.2, -0.7],
            at: p.clone(),
        };
        let (xp, xm) = split_pm(&a, &bg).unwrap();
        let vp = GeneralizedVector::from_v(&bg, Sign::Plus, xp.clone(), p.clone());
        let vm = GeneralizedVector::from_v(&bg, Sign::Minus, xm.clone(), p.clone());
        for i in 0..3 {
            assert!((vp.x[i] + vm.x[i] - a.x[i]).abs() < 1e-14);
            assert!((vp.xi[i] + vm.xi[i] - a.xi[i]).abs() < 1e-14);
        }
        let g = metric_matrix(&bg.metric(&p), 3);
        let expect =
            2.0 * crate::linalg::inner(&g, &xp, &xp) - 2.0 * crate::linalg::inner(&g, &xm, &xm);
        assert!((a.pairing(&a) - expect).abs() < 1e-13);
        let (xp2, xm2) = split_pm(&vp, &bg).unwrap();
        assert!(xm2.iter().all(|v| v.abs() < 1e-14));
        assert!(xp2.iter().zip(&xp).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn courant_route_matches_bismut_derivative() {
        let c = box3();
        let bg = Curved { chart: c.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (t, p) in c.sample(20, 2).into_iter().enumerate() {
            let x = PolynomialField::random(&c, Valence::VECTOR, 3, 2, &mut rng);
            let y = PolynomialField::random(&c, Valence::VECTOR, 3, 2, &mut rng);
            for sign in [Sign::Plus, Sign::Minus] {
                let a = bismut_derivative(&x, &y, sign, &bg, &p).unwrap();
                let b = bismut_via_courant(&x, &y, sign, &bg, &p).unwrap();
                for i in 0..3 {
                    assert!(
                        (a[i] - b[i]).abs() < 1e-10,
                        "sample {t} {sign:?}: {a:?} vs {b:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn torsion_and_metric_compatibility() {
        let c = box3();
        let bg = Curved { chart: c.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = PolynomialField::random(&c, Valence::VECTOR, 3, 2, &mut rng);
        let y = PolynomialField::random(&c, Valence::VECTOR, 3, 2, &mut rng);
        let z = PolynomialField::random(&c, Valence::VECTOR, 3, 2, &mut rng);
        for p in c.sample(10, 4) {
            let g = metric_matrix(&bg.metric(&p), 3);
            let h = bg.flux(&p);
            let xv: Vec<f64> = x.eval(&p);
            let yv: Vec<f64> = y.eval(&p);
            let zv: Vec<f64> = z.eval(&p);
            let ginv = g.inverse().unwrap();
            let mut hxy = vec![0.0; 3];
            for l in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        hxy[l] += h[(j * 3 + k) * 3 + l] * xv[j] * yv[k];
                    }
                }
            }
            let hxy_up = ginv.mat_vec(&hxy);
            let br: Vec<f64> = lie_bracket_at(&x, &y, &p);
            for sign in [Sign::Plus, Sign::Minus] {
                let a: Vec<f64> = bismut_derivative_at(&bg, sign, &x, &y, &p);
                let b: Vec<f64> = bismut_derivative_at(&bg, sign, &y, &x, &p);
                for i in 0..3 {
                    let t = a[i] - b[i] - br[i];
                    assert!((t - sign.value() * hxy_up[i]).abs() < 1e-10);
                }
                // X g(Y, Z) = g(∇_X Y, Z) + g(Y, ∇_X Z)
                struct Gyz<'a>(&'a Curved, &'a PolynomialField, &'a PolynomialField);
                impl Smooth for Gyz<'_> {
                    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
                        let g = metric_matrix(&self.0.metric(x), 3);
                        vec![crate::linalg::inner(&g, &self.1.eval(x), &self.2.eval(x))]
                    }
                }
                let (_, d) = jacobian(&Gyz(&bg, &y, &z), &p);
                let lhs: f64 = (0..3).map(|k| d[k] * xv[k]).sum();
                let dy: Vec<f64> = bismut_derivative_at(&bg, sign, &x, &y, &p);
                let dz: Vec<f64> = bismut_derivative_at(&bg, sign, &x, &z, &p);
                let rhs = crate::linalg::inner(&g, &dy, &zv) + crate::linalg::inner(&g, &yv, &dz);
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn curvature_formula_matches_commutator_and_pair_symmetry() {
        let c = box3();
        let bg = Curved { chart: c.clone() };
        for p in c.sample(5, 6) {
            let rp = bismut_curvature(Sign::Plus, &bg, &p).unwrap();
            let rm = bismut_curvature(Sign::Minus, &bg, &p).unwrap();
            for sign in [Sign::Plus, Sign::Minus] {
                let f: Vec<f64> = bismut_curvature_formula_at(&bg, sign, &p);
                let cm: Vec<f64> = bismut_curvature_commutator_at(&bg, sign, &p);
                for (a, b) in f.iter().zip(&cm) {
                    assert!((a - b).abs() < 1e-9, "{sign:?}: {a} vs {b}");
                }
            }
            let n = 3;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let a = rm[((i * n + j) * n + k) * n + l];
                            let b = rp[((k * n + l) * n + i) * n + j];
                            assert!((a - b).abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn closed_flux_on_r3() {
        let bg = Curved { chart: box3() };
        assert_eq!(flux_closure_residual(&bg, &[0.1, 0.2, 0.3]), 0.0);
    }
}
