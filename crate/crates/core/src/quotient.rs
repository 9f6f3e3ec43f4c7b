//! Reduction by a free group action carrying an isotropic trivially extended
//! action `{V_a + ξ_a}`: validity checks, the horizontal distributions
//! `τ± = {Y : g(Y, V_a) ± ξ_a(Y) = 0}`, their curvatures, and the reduced
//! metric, flux, Bismut connection and curvature on the quotient.
//!
//! The quotient is described by explicit `project`/`lift` coordinate maps.
//! Lifts of quotient vectors are obtained by solving `dπ(Y) = v` together
//! with the `τ±` constraints (and `dσ(Y) = 0` when the action is restricted
//! to a zero locus). The solve is done at every ambient point, so lifted
//! fields are invariant and can be differentiated like any other field.

use crate::calculus::{
    curvature_residuals, exterior_derivative_at, flat, lie_derivative_covariant_at, metric_matrix,
};
use crate::chart::{jacobian, Chart, Smooth};
use crate::dual::Real;
use crate::error::{GeomError, Result};
use crate::generalized::{
    bismut_curvature, bismut_curvature_formula_at, bismut_derivative_at, bismut_symbols_at,
    Background, FluxField, MetricField, Sign,
};
use crate::linalg::{constrained_basis, gram_schmidt, inner, Matrix};

/// Generators `V_a` and 1-forms `ξ_a`, `a = 0..s`, stored `[a·n + i]`.
pub trait ExtendedAction: Background {
    fn generators(&self) -> usize;
    fn vectors<S: Real>(&self, x: &[S]) -> Vec<S>;
    fn forms<S: Real>(&self, x: &[S]) -> Vec<S>;
}

/// An explicit quotient: coordinate maps to and from a quotient chart, and
/// optionally sections `σ^α` whose common zero locus is the invariant
/// submanifold being reduced.
pub trait QuotientMap: ExtendedAction {
    fn quotient_chart(&self) -> &Chart;
    fn project<S: Real>(&self, x: &[S]) -> Vec<S>;
    fn lift<S: Real>(&self, u: &[S]) -> Vec<S>;
    fn sections(&self) -> usize {
        0
    }
    fn section<S: Real>(&self, _x: &[S]) -> Vec<S> {
        Vec::new()
    }
}

/// The single generator `V_a` as a field.
pub struct Generator<'a, E: ?Sized> {
    pub ea: &'a E,
    pub a: usize,
}

impl<E: ExtendedAction + ?Sized> Smooth for Generator<'_, E> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = x.len();
        self.ea.vectors(x)[self.a * n..(self.a + 1) * n].to_vec()
    }
}

/// The single form `ξ_a` as a field.
pub struct GeneratorForm<'a, E: ?Sized> {
    pub ea: &'a E,
    pub a: usize,
}

impl<E: ExtendedAction + ?Sized> Smooth for GeneratorForm<'_, E> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = x.len();
        self.ea.forms(x)[self.a * n..(self.a + 1) * n].to_vec()
    }
}

/// All forms `ξ±_a = g(V_a) ± ξ_a`, stored `[a·n + i]`.
pub struct XiPm<'a, E: ?Sized> {
    pub ea: &'a E,
    pub sign: Sign,
}

impl<E: ExtendedAction + ?Sized> Smooth for XiPm<'_, E> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        xi_pm_at(self.ea, self.sign, x)
    }
}

pub fn xi_pm_at<S: Real, E: ExtendedAction + ?Sized>(ea: &E, sign: Sign, x: &[S]) -> Vec<S> {
    let n = x.len();
    let g = metric_matrix(&ea.metric(x), n);
    let v = ea.vectors(x);
    let xi = ea.forms(x);
    let sv = sign.value();
    let mut out = vec![S::zero(); xi.len()];
    for a in 0..ea.generators() {
        let gv = g.mat_vec(&v[a * n..(a + 1) * n]);
        for i in 0..n {
            out[a * n + i] = gv[i] + xi[a * n + i] * sv;
        }
    }
    out
}

/// All vectors `V±_a = V_a ± g⁻¹ξ_a`, stored `[a·n + i]`.
pub struct VPm<'a, E: ?Sized> {
    pub ea: &'a E,
    pub sign: Sign,
}

impl<E: ExtendedAction + ?Sized> Smooth for VPm<'_, E> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = x.len();
        let s = self.ea.generators();
        let g = metric_matrix(&self.ea.metric(x), n);
        let v = self.ea.vectors(x);
        let xi = self.ea.forms(x);
        let Some(ginv) = g.inverse() else {
            return vec![S::cst(f64::NAN); s * n];
        };
        let sv = self.sign.value();
        let mut out = v;
        for a in 0..s {
            let u = ginv.mat_vec(&xi[a * n..(a + 1) * n]);
            for i in 0..n {
                out[a * n + i] += u[i] * sv;
            }
        }
        out
    }
}

/// `G_ab = g(V_a, V_b)`, `K_ab = G_ab − ξ_a(V_b)`, `T_ab = g(V⁺_a, V⁺_b)`.
#[derive(Debug, Clone)]
pub struct ReductionMatrices<S> {
    pub g: Matrix<S>,
    pub k: Matrix<S>,
    pub t: Matrix<S>,
}

pub fn reduction_matrices_at<S: Real, E: ExtendedAction + ?Sized>(
    ea: &E,
    x: &[S],
) -> Option<ReductionMatrices<S>> {
    let n = x.len();
    let s = ea.generators();
    let g = metric_matrix(&ea.metric(x), n);
    let ginv = g.inverse()?;
    let v = ea.vectors(x);
    let xi = ea.forms(x);
    let va = |a: usize| &v[a * n..(a + 1) * n];
    let xa = |a: usize| &xi[a * n..(a + 1) * n];
    let mut gm = Matrix::zeros(s, s);
    let mut k = Matrix::zeros(s, s);
    let mut t = Matrix::zeros(s, s);
    for a in 0..s {
        for b in 0..s {
            let gab = inner(&g, va(a), va(b));
            gm.set(a, b, gab);
            k.set(a, b, gab - crate::linalg::dot(xa(a), va(b)));
            t.set(a, b, gab + inner(&ginv, xa(a), xa(b)));
        }
    }
    Some(ReductionMatrices { g: gm, k, t })
}

/// `θ₊^a = K^{ba} ξ⁺_b` and `θ₋^a = K^{ab} ξ⁻_b`, stored `[a·n + i]`.
pub struct Theta<'a, E: ?Sized> {
    pub ea: &'a E,
    pub sign: Sign,
}

impl<E: ExtendedAction + ?Sized> Smooth for Theta<'_, E> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = x.len();
        let s = self.ea.generators();
        let Some(kinv) = reduction_matrices_at(self.ea, x).and_then(|m| m.k.inverse()) else {
            return vec![S::cst(f64::NAN); s * n];
        };
        let xi = xi_pm_at(self.ea, self.sign, x);
        let mut out = vec![S::zero(); s * n];
        for a in 0..s {
            for b in 0..s {
                let c = match self.sign {
                    Sign::Plus => kinv.at(b, a),
                    Sign::Minus => kinv.at(a, b),
                };
                for i in 0..n {
                    out[a * n + i] += c * xi[b * n + i];
                }
            }
        }
        out
    }
}

/// Maximum residual of each defining condition of an extended action.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActionValidation {
    /// `max |ξ_a(V_b) + ξ_b(V_a)|`
    pub isotropy: f64,
    /// `max |dξ_a − ι_{V_a} H|`
    pub closure: f64,
    /// `max |L_{V_a} g|`
    pub metric_invariance: f64,
    /// `max |L_{V_a} H|`
    pub flux_invariance: f64,
    /// Smallest `det G / Π G_aa` seen (1 for orthogonal generators, 0 when
    /// the generators are dependent).
    pub independence: f64,
}

impl ActionValidation {
    pub const ISOTROPY: &'static str = "isotropy xi_a(V_b) + xi_b(V_a) = 0";
    pub const CLOSURE: &'static str = "closure d xi_a = i_{V_a} H";
    pub const METRIC_INVARIANCE: &'static str = "invariance L_{V_a} g = 0";
    pub const FLUX_INVARIANCE: &'static str = "invariance L_{V_a} H = 0";
    pub const FREENESS: &'static str = "free action (independent V_a)";

    /// Names of the conditions whose residual exceeds `tol`.
    pub fn failures(&self, tol: f64) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !(self.isotropy <= tol) {
            out.push(Self::ISOTROPY);
        }
        if !(self.closure <= tol) {
            out.push(Self::CLOSURE);
        }
        if !(self.metric_invariance <= tol) {
            out.push(Self::METRIC_INVARIANCE);
        }
        if !(self.flux_invariance <= tol) {
            out.push(Self::FLUX_INVARIANCE);
        }
        if !(self.independence > 1e-8) {
            out.push(Self::FREENESS);
        }
        out
    }

    pub fn max_residual(&self) -> f64 {
        self.isotropy
            .max(self.closure)
            .max(self.metric_invariance)
            .max(self.flux_invariance)
    }
}

/// Evaluates every extended-action condition at each point.
pub fn validate_extended_action<E: ExtendedAction + ?Sized>(
    ea: &E,
    points: &[Vec<f64>],
) -> Result<ActionValidation> {
    let s = ea.generators();
    let mut out = ActionValidation {
        independence: f64::INFINITY,
        ..Default::default()
    };
    for p in points {
        ea.chart().check(p)?;
        let n = p.len();
        let v: Vec<f64> = ea.vectors(p);
        let xi: Vec<f64> = ea.forms(p);
        for a in 0..s {
            for b in 0..s {
                let r = crate::linalg::dot(&xi[a * n..(a + 1) * n], &v[b * n..(b + 1) * n])
                    + crate::linalg::dot(&xi[b * n..(b + 1) * n], &v[a * n..(a + 1) * n]);
                out.isotropy = out.isotropy.max(r.abs());
            }
            let va = Generator { ea, a };
            let dxi = exterior_derivative_at(&GeneratorForm { ea, a }, 1, p);
            let h: Vec<f64> = ea.flux(p);
            let iv = crate::calculus::interior(&v[a * n..(a + 1) * n], &h, 3, n)?;
            for (d, i) in dxi.iter().zip(&iv) {
                out.closure = out.closure.max((d - i).abs());
            }
            let lg = lie_derivative_covariant_at(&va, &MetricField(ea), 2, p);
            out.metric_invariance = out
                .metric_invariance
                .max(lg.iter().fold(0.0, |m, x| m.max(x.abs())));
            let lh = lie_derivative_covariant_at(&va, &FluxField(ea), 3, p);
            out.flux_invariance = out
                .flux_invariance
                .max(lh.iter().fold(0.0, |m, x| m.max(x.abs())));
        }
        let m = reduction_matrices_at(ea, p).ok_or_else(|| GeomError::SingularMetric(p.clone()))?;
        let diag: f64 = (0..s).map(|a| m.g.at(a, a)).product();
        let ratio = if diag > 0.0 { m.g.det() / diag } else { 0.0 };
        out.independence = out.independence.min(ratio);
    }
    Ok(out)
}

/// `g`-orthonormal frames of `τ₊` and `τ₋` at `p`. `extra` covectors (for
/// example `dσ^α`) are imposed on both.
pub fn horizontal_frames<E: ExtendedAction + ?Sized>(
    ea: &E,
    p: &[f64],
    extra: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    ea.chart().check(p)?;
    let n = p.len();
    let s = ea.generators();
    let g = metric_matrix(&ea.metric(p), n);
    let expected = n - s - extra.len();
    let mut frames = Vec::new();
    for sign in [Sign::Plus, Sign::Minus] {
        let xi: Vec<f64> = xi_pm_at(ea, sign, p);
        let mut cov: Vec<Vec<f64>> = (0..s).map(|a| xi[a * n..(a + 1) * n].to_vec()).collect();
        cov.extend(extra.iter().cloned());
        let basis =
            constrained_basis(&g, &cov).ok_or_else(|| GeomError::SingularMetric(p.to_vec()))?;
        if basis.len() != expected {
            return Err(GeomError::Rank {
                expected,
                found: basis.len(),
            });
        }
        frames.push(basis);
    }
    let minus = frames.pop().unwrap();
    let plus = frames.pop().unwrap();
    Ok((plus, minus))
}

/// Largest `|g(Y, V_a) ± ξ_a(Y)|` over a frame.
pub fn frame_defect<E: ExtendedAction + ?Sized>(
    ea: &E,
    sign: Sign,
    p: &[f64],
    frame: &[Vec<f64>],
) -> f64 {
    let n = p.len();
    let xi: Vec<f64> = xi_pm_at(ea, sign, p);
    let mut worst: f64 = 0.0;
    for y in frame {
        for a in 0..ea.generators() {
            worst = worst.max(crate::linalg::dot(&xi[a * n..(a + 1) * n], y).abs());
        }
    }
    worst
}

struct Projection<'a, Q: ?Sized>(&'a Q);
impl<Q: QuotientMap + ?Sized> Smooth for Projection<'_, Q> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.0.project(x)
    }
}

struct Sections<'a, Q: ?Sized>(&'a Q);
impl<Q: QuotientMap + ?Sized> Smooth for Sections<'_, Q> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.0.section(x)
    }
}

/// Lifts into `τ±` of the quotient coordinate vectors `∂_{u_i}` at the
/// ambient point `x`, or `None` when the lift system is singular.
pub fn horizontal_basis_at<S: Real, Q: QuotientMap + ?Sized>(
    q: &Q,
    sign: Sign,
    x: &[S],
) -> Option<Vec<Vec<S>>> {
    let n = x.len();
    let m = q.quotient_chart().dim();
    let s = q.generators();
    let r = q.sections();
    if m + s + r != n {
        return None;
    }
    let (_, dp) = jacobian(&Projection(q), x);
    let xi = xi_pm_at(q, sign, x);
    let mut a = Matrix::zeros(n, n);
    for c in 0..m {
        for k in 0..n {
            a.set(c, k, dp[c * n + k]);
        }
    }
    for b in 0..s {
        for k in 0..n {
            a.set(m + b, k, xi[b * n + k]);
        }
    }
    if r > 0 {
        let (_, ds) = jacobian(&Sections(q), x);
        for al in 0..r {
            for k in 0..n {
                a.set(m + s + al, k, ds[al * n + k]);
            }
        }
    }
    let inv = a.inverse()?;
    Some((0..m).map(|c| inv.column(c)).collect())
}

/// The invariant `τ±` lift of a quotient vector field, as an ambient field.
pub struct HorizontalLift<'a, Q: ?Sized, F: ?Sized> {
    pub q: &'a Q,
    pub sign: Sign,
    pub field: &'a F,
}

impl<Q: QuotientMap + ?Sized, F: Smooth + ?Sized> Smooth for HorizontalLift<'_, Q, F> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = x.len();
        let u = self.q.project(x);
        let v = self.field.eval(&u);
        let Some(basis) = horizontal_basis_at(self.q, self.sign, x) else {
            return vec![S::cst(f64::NAN); n];
        };
        let mut out = vec![S::zero(); n];
        for (vi, h) in v.iter().zip(&basis) {
            for k in 0..n {
                out[k] += *vi * h[k];
            }
        }
        out
    }
}

/// The metric obtained by restricting `g` to `τ±` lifts, as a quotient field.
pub struct ReducedMetric<'a, Q: ?Sized> {
    pub q: &'a Q,
    pub sign: Sign,
}

impl<Q: QuotientMap + ?Sized> Smooth for ReducedMetric<'_, Q> {
    fn eval<S: Real>(&self, u: &[S]) -> Vec<S> {
        reduced_metric_at(self.q, self.sign, u)
    }
}

fn reduced_metric_at<S: Real, Q: QuotientMap + ?Sized>(q: &Q, sign: Sign, u: &[S]) -> Vec<S> {
    let m = u.len();
    let x = q.lift(u);
    let n = x.len();
    let Some(h) = horizontal_basis_at(q, sign, &x) else {
        return vec![S::cst(f64::NAN); m * m];
    };
    let g = metric_matrix(&q.metric(&x), n);
    let mut out = vec![S::zero(); m * m];
    for i in 0..m {
        for j in i..m {
            let v = inner(&g, &h[i], &h[j]);
            out[i * m + j] = v;
            out[j * m + i] = v;
        }
    }
    out
}

/// `dξ±_a` at `x` as 2-form components `[a][j·n + k]`.
fn d_xi_pm_at<S: Real, E: ExtendedAction + ?Sized>(ea: &E, sign: Sign, x: &[S]) -> Vec<Vec<S>> {
    let n = x.len();
    let (_, d) = jacobian(&XiPm { ea, sign }, x);
    (0..ea.generators())
        .map(|a| {
            let mut w = vec![S::zero(); n * n];
            for j in 0..n {
                for k in 0..n {
                    w[j * n + k] = d[(a * n + k) * n + j] - d[(a * n + j) * n + k];
                }
            }
            w
        })
        .collect()
}

fn two_form<S: Real>(w: &[S], x: &[S], y: &[S]) -> S {
    let n = x.len();
    let mut s = S::zero();
    for j in 0..n {
        for k in 0..n {
            s += w[j * n + k] * x[j] * y[k];
        }
    }
    s
}

fn three_form<S: Real>(h: &[S], x: &[S], y: &[S], z: &[S]) -> S {
    let n = x.len();
    let mut s = S::zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                s += h[(i * n + j) * n + k] * x[i] * y[j] * z[k];
            }
        }
    }
    s
}

/// `H̃ = (H + Ω₊^a ∧ ξ_a)` on `τ₊` lifts, with `Ω₊^a = K^{ba} dξ⁺_b`.
fn reduced_flux_at<S: Real, Q: QuotientMap + ?Sized>(q: &Q, u: &[S]) -> Vec<S> {
    let m = u.len();
    let x = q.lift(u);
    let n = x.len();
    let s = q.generators();
    let nan = || vec![S::cst(f64::NAN); m * m * m];
    let Some(h) = horizontal_basis_at(q, Sign::Plus, &x) else {
        return nan();
    };
    let Some(kinv) = reduction_matrices_at(q, &x).and_then(|r| r.k.inverse()) else {
        return nan();
    };
    let flux = q.flux(&x);
    let dxi = d_xi_pm_at(q, Sign::Plus, &x);
    let xi = q.forms(&x);
    // Ω^a(h_i, h_j) and ξ_a(h_i)
    let mut omega = vec![S::zero(); s * m * m];
    let mut xih = vec![S::zero(); s * m];
    for a in 0..s {
        for i in 0..m {
            xih[a * m + i] = crate::linalg::dot(&xi[a * n..(a + 1) * n], &h[i]);
            for j in 0..m {
                let mut v = S::zero();
                for b in 0..s {
                    v += kinv.at(b, a) * two_form(&dxi[b], &h[i], &h[j]);
                }
                omega[(a * m + i) * m + j] = v;
            }
        }
    }
    let mut out = vec![S::zero(); m * m * m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                if i == j || j == k || i == k {
                    continue;
                }
                let mut v = three_form(&flux, &h[i], &h[j], &h[k]);
                for a in 0..s {
                    let om = |p: usize, r: usize| omega[(a * m + p) * m + r];
                    v += om(i, j) * xih[a * m + k]
                        + om(j, k) * xih[a * m + i]
                        + om(k, i) * xih[a * m + j];
                }
                out[(i * m + j) * m + k] = v;
            }
        }
    }
    out
}

/// The reduced generalized metric `(g̃, H̃)` on the quotient chart.
pub struct ReducedBackground<'a, Q: ?Sized>(pub &'a Q);

impl<Q: QuotientMap + ?Sized> Background for ReducedBackground<'_, Q> {
    fn chart(&self) -> &Chart {
        self.0.quotient_chart()
    }
    fn metric<S: Real>(&self, u: &[S]) -> Vec<S> {
        reduced_metric_at(self.0, Sign::Plus, u)
    }
    fn flux<S: Real>(&self, u: &[S]) -> Vec<S> {
        reduced_flux_at(self.0, u)
    }
}

/// `(g̃, H̃)` components at a quotient point.
pub fn reduce_metric_flux<Q: QuotientMap + ?Sized>(
    q: &Q,
    u: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = checked_lift(q, u)?;
    if horizontal_basis_at(q, Sign::Plus, &x).is_none() {
        return Err(GeomError::Lift(format!("singular lift system at {x:?}")));
    }
    let bg = ReducedBackground(q);
    Ok((bg.metric(u), bg.flux(u)))
}

fn checked_lift<Q: QuotientMap + ?Sized>(q: &Q, u: &[f64]) -> Result<Vec<f64>> {
    q.quotient_chart().check(u)?;
    let x: Vec<f64> = q.lift(u);
    q.chart().check(&x)?;
    Ok(x)
}

/// Values on frame pairs: `formula[a][p·k + q]` is `K^{ba}dξ⁺_b`
/// (resp. `K^{ab}dξ⁻_b`), `direct` is `dθ±^a`.
#[derive(Debug, Clone)]
pub struct OmegaValues {
    pub formula: Vec<Vec<f64>>,
    pub direct: Vec<Vec<f64>>,
}

impl OmegaValues {
    pub fn residual(&self) -> f64 {
        self.formula
            .iter()
            .flatten()
            .zip(self.direct.iter().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Curvature of `τ±` on pairs of `frame` vectors, from `K⁻¹dξ±` and directly.
pub fn omega_curvature<E: ExtendedAction + ?Sized>(
    ea: &E,
    sign: Sign,
    p: &[f64],
    frame: &[Vec<f64>],
) -> Result<OmegaValues> {
    ea.chart().check(p)?;
    let n = p.len();
    let s = ea.generators();
    let kinv = reduction_matrices_at(ea, p)
        .and_then(|r| r.k.inverse())
        .ok_or_else(|| GeomError::Rank {
            expected: s,
            found: 0,
        })?;
    let dxi = d_xi_pm_at(ea, sign, p);
    let (_, dth) = jacobian(&Theta { ea, sign }, p);
    let k = frame.len();
    let mut formula = Vec::new();
    let mut direct = Vec::new();
    for a in 0..s {
        let mut w = vec![0.0; n * n];
        for b in 0..s {
            let c = match sign {
                Sign::Plus => kinv.at(b, a),
                Sign::Minus => kinv.at(a, b),
            };
            for (wi, d) in w.iter_mut().zip(&dxi[b]) {
                *wi += c * d;
            }
        }
        let mut dt = vec![0.0; n * n];
        for j in 0..n {
            for l in 0..n {
                dt[j * n + l] = dth[(a * n + l) * n + j] - dth[(a * n + j) * n + l];
            }
        }
        let mut f = vec![0.0; k * k];
        let mut d = vec![0.0; k * k];
        for p1 in 0..k {
            for p2 in 0..k {
                f[p1 * k + p2] = two_form(&w, &frame[p1], &frame[p2]);
                d[p1 * k + p2] = two_form(&dt, &frame[p1], &frame[p2]);
            }
        }
        formula.push(f);
        direct.push(d);
    }
    Ok(OmegaValues { formula, direct })
}

/// All ambient data at `x = lift(u)` consumed by the reduced-curvature
/// formula and by the localization chain.
#[derive(Debug, Clone)]
pub struct QuotientFrame {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub g: Matrix<f64>,
    pub ginv: Matrix<f64>,
    /// `H_{ijk}`
    pub h: Vec<f64>,
    /// Levi-Civita `Γ^i_{jk}`
    pub gamma: Vec<f64>,
    /// `R⁻_{ijkl}`
    pub r_minus: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    /// `∇_j V_a^i` at `[a][j·n + i]` (Levi-Civita)
    pub nabla_v: Vec<Vec<f64>>,
    /// `∇_j ξ_{ai}` at `[a][j·n + i]` (Levi-Civita)
    pub nabla_xi: Vec<Vec<f64>>,
    /// `(∇⁻_j V⁻_a)^i` at `[a][j·n + i]`
    pub nabla_minus_v_minus: Vec<Vec<f64>>,
    pub d_xi_plus: Vec<Vec<f64>>,
    pub d_xi_minus: Vec<Vec<f64>>,
    pub mats: ReductionMatrices<f64>,
    pub kinv: Matrix<f64>,
    pub tinv: Matrix<f64>,
    /// `g̃` in quotient coordinates.
    pub reduced_metric: Matrix<f64>,
    /// Columns: a `g̃`-orthonormal frame in quotient coordinates.
    pub frame: Matrix<f64>,
    /// `τ₊` lifts of the orthonormal frame (zero modes of `ψ₊`).
    pub frame_plus: Vec<Vec<f64>>,
    /// `τ₋` lifts of the orthonormal frame (zero modes of `ψ₋`).
    pub frame_minus: Vec<Vec<f64>>,
}

fn finite_or(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(GeomError::Evaluation)
    }
}

/// `g`-orthonormal frame of the quotient tangent space in coordinates.
pub fn orthonormal_columns(g: &Matrix<f64>) -> Result<Matrix<f64>> {
    let m = g.rows;
    let coords: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let e = gram_schmidt(g, &coords, 1e-10);
    if e.len() != m {
        return Err(GeomError::Rank {
            expected: m,
            found: e.len(),
        });
    }
    Ok(Matrix::from_columns(&e))
}

impl QuotientFrame {
    pub fn new<Q: QuotientMap + ?Sized>(q: &Q, u: &[f64]) -> Result<Self> {
        let x = checked_lift(q, u)?;
        let n = x.len();
        let m = u.len();
        let s = q.generators();
        let g = metric_matrix(&q.metric(&x), n);
        let ginv = g
            .inverse()
            .ok_or_else(|| GeomError::SingularMetric(x.clone()))?;
        let h: Vec<f64> = q.flux(&x);
        let mf = MetricField(q);
        let gamma = crate::calculus::christoffel_at(&mf, &x)
            .ok_or_else(|| GeomError::SingularMetric(x.clone()))?;
        let r_minus = bismut_curvature_formula_at(q, Sign::Minus, &x);
        finite_or(&r_minus)?;
        let (vv, dv) = jacobian(&VectorsField(q), &x);
        let (xv, dx) = jacobian(&FormsField(q), &x);
        let mut v = Vec::new();
        let mut xi = Vec::new();
        let mut nabla_v = Vec::new();
        let mut nabla_xi = Vec::new();
        for a in 0..s {
            v.push(vv[a * n..(a + 1) * n].to_vec());
            xi.push(xv[a * n..(a + 1) * n].to_vec());
            let mut nv = vec![0.0; n * n];
            let mut nx = vec![0.0; n * n];
            for j in 0..n {
                for i in 0..n {
                    let mut a1 = dv[(a * n + i) * n + j];
                    let mut a2 = dx[(a * n + i) * n + j];
                    for k in 0..n {
                        a1 += gamma[(i * n + j) * n + k] * vv[a * n + k];
                        a2 -= gamma[(k * n + j) * n + i] * xv[a * n + k];
                    }
                    nv[j * n + i] = a1;
                    nx[j * n + i] = a2;
                }
            }
            nabla_v.push(nv);
            nabla_xi.push(nx);
        }
        let gam_minus = bismut_symbols_at(q, Sign::Minus, &x)
            .ok_or_else(|| GeomError::SingularMetric(x.clone()))?;
        let (vm, dvm) = jacobian(
            &VPm {
                ea: q,
                sign: Sign::Minus,
            },
            &x,
        );
        let nabla_minus_v_minus = (0..s)
            .map(|a| {
                let mut out = vec![0.0; n * n];
                for j in 0..n {
                    for i in 0..n {
                        let mut t = dvm[(a * n + i) * n + j];
                        for k in 0..n {
                            t += gam_minus[(i * n + j) * n + k] * vm[a * n + k];
                        }
                        out[j * n + i] = t;
                    }
                }
                out
            })
            .collect();
        let d_xi_plus = d_xi_pm_at(q, Sign::Plus, &x);
        let d_xi_minus = d_xi_pm_at(q, Sign::Minus, &x);
        let mats =
            reduction_matrices_at(q, &x).ok_or_else(|| GeomError::SingularMetric(x.clone()))?;
        let kinv = mats.k.inverse().ok_or(GeomError::Rank {
            expected: s,
            found: 0,
        })?;
        let tinv = mats.t.inverse().ok_or(GeomError::Rank {
            expected: s,
            found: 0,
        })?;
        let lp = horizontal_basis_at(q, Sign::Plus, &x)
            .ok_or_else(|| GeomError::Lift(format!("singular τ₊ lift at {x:?}")))?;
        let lm = horizontal_basis_at(q, Sign::Minus, &x)
            .ok_or_else(|| GeomError::Lift(format!("singular τ₋ lift at {x:?}")))?;
        let mut gt = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                gt.set(i, j, inner(&g, &lp[i], &lp[j]));
            }
        }
        let frame = orthonormal_columns(&gt)
            .map_err(|_| GeomError::Lift("degenerate lifted frame".into()))?;
        let combine = |lifts: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..m)
                .map(|c| {
                    let mut y = vec![0.0; n];
                    for i in 0..m {
                        for k in 0..n {
                            y[k] += frame.at(i, c) * lifts[i][k];
                        }
                    }
                    y
                })
                .collect()
        };
        let frame_plus = combine(&lp);
        let frame_minus = combine(&lm);
        Ok(QuotientFrame {
            n,
            m,
            s,
            u: u.to_vec(),
            x,
            g,
            ginv,
            h,
            gamma,
            r_minus,
            v,
            xi,
            nabla_v,
            nabla_xi,
            nabla_minus_v_minus,
            d_xi_plus,
            d_xi_minus,
            mats,
            kinv,
            tinv,
            reduced_metric: gt,
            frame,
            frame_plus,
            frame_minus,
        })
    }

    /// `(Z, ∇⁻_Y V⁻_a)`
    fn p(&self, a: usize, y: &[f64], z: &[f64]) -> f64 {
        let n = self.n;
        let mut w = vec![0.0; n];
        for j in 0..n {
            for i in 0..n {
                w[i] += y[j] * self.nabla_minus_v_minus[a][j * n + i];
            }
        }
        inner(&self.g, z, &w)
    }

    fn r_minus_on(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let xy = x[i] * y[j];
                if xy == 0.0 {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        s += self.r_minus[((i * n + j) * n + k) * n + l] * xy * z[k] * w[l];
                    }
                }
            }
        }
        s
    }

    /// The reduced-curvature formula evaluated on ambient vectors
    /// `X⁺, Y⁺ ∈ τ₊` and `Z⁻, W⁻ ∈ τ₋`.
    pub fn curvature_formula(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let s = self.s;
        let mut val = self.r_minus_on(x, y, z, w);
        for a in 0..s {
            for b in 0..s {
                val -= 0.5
                    * self.kinv.at(a, b)
                    * two_form(&self.d_xi_plus[a], x, y)
                    * two_form(&self.d_xi_minus[b], z, w);
                val += self.tinv.at(a, b)
                    * (self.p(a, y, z) * self.p(b, x, w) - self.p(a, x, z) * self.p(b, y, w));
            }
        }
        val
    }

    /// The formula on the orthonormal frame: `out[((A·m + B)·m + C)·m + D]`.
    pub fn curvature_formula_frame(&self) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m.pow(4)];
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        out[flat(&[a, b, c, d], m)] = self.curvature_formula(
                            &self.frame_plus[a],
                            &self.frame_plus[b],
                            &self.frame_minus[c],
                            &self.frame_minus[d],
                        );
                    }
                }
            }
        }
        out
    }
}

struct VectorsField<'a, E: ?Sized>(&'a E);
impl<E: ExtendedAction + ?Sized> Smooth for VectorsField<'_, E> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.0.vectors(x)
    }
}

struct FormsField<'a, E: ?Sized>(&'a E);
impl<E: ExtendedAction + ?Sized> Smooth for FormsField<'_, E> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.0.forms(x)
    }
}

/// Transforms a 4-slot coordinate array to the frame whose columns are `e`.
pub fn to_frame(r: &[f64], e: &Matrix<f64>) -> Vec<f64> {
    let m = e.rows;
    let mut cur = r.to_vec();
    // contract one slot at a time
    for slot in 0..4 {
        let mut next = vec![0.0; cur.len()];
        for f in 0..cur.len() {
            let idx = crate::calculus::unflat(f, m, 4);
            let mut s = 0.0;
            for i in 0..m {
                let mut src = idx.clone();
                src[slot] = i;
                s += cur[flat(&src, m)] * e.at(i, idx[slot]);
            }
            next[f] = s;
        }
        cur = next;
    }
    cur
}

/// `R̃` from the reduced-curvature formula (ambient data only) and from the
/// Bismut curvature of `(g̃, H̃)` on the quotient chart, both on the same
/// `g̃`-orthonormal frame.
#[derive(Debug, Clone)]
pub struct ReducedCurvature {
    pub formula: Vec<f64>,
    pub direct: Vec<f64>,
    pub m: usize,
}

impl ReducedCurvature {
    pub fn residual(&self) -> f64 {
        self.formula
            .iter()
            .zip(&self.direct)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `R̃(e_1, e_2, e_2, e_1)`
    pub fn sectional_12(&self) -> f64 {
        self.direct[flat(&[0, 1, 1, 0], self.m)]
    }
}

pub fn reduced_curvature_quotient<Q: QuotientMap + ?Sized>(
    q: &Q,
    u: &[f64],
) -> Result<ReducedCurvature> {
    let frame = QuotientFrame::new(q, u)?;
    let formula = frame.curvature_formula_frame();
    let direct = to_frame(
        &bismut_curvature(Sign::Minus, &ReducedBackground(q), u)?,
        &frame.frame,
    );
    Ok(ReducedCurvature {
        formula,
        direct,
        m: frame.m,
    })
}

/// `(∇̃_{[X]}[Y], [Z])` by the ambient formula `g(∇⁻_{X⁺} Y⁻, Z⁻)` and
/// directly from `(g̃, H̃)`.
pub fn reduced_bismut<
    Q: QuotientMap + ?Sized,
    X: Smooth + ?Sized,
    Y: Smooth + ?Sized,
    Z: Smooth + ?Sized,
>(
    q: &Q,
    xf: &X,
    yf: &Y,
    zf: &Z,
    u: &[f64],
) -> Result<(f64, f64)> {
    let x = checked_lift(q, u)?;
    let n = x.len();
    let xp: Vec<f64> = HorizontalLift {
        q,
        sign: Sign::Plus,
        field: xf,
    }
    .eval(&x);
    let zm: Vec<f64> = HorizontalLift {
        q,
        sign: Sign::Minus,
        field: zf,
    }
    .eval(&x);
    let ym = HorizontalLift {
        q,
        sign: Sign::Minus,
        field: yf,
    };
    let d: Vec<f64> = bismut_derivative_at(q, Sign::Minus, &ConstVector(&xp), &ym, &x);
    let g = metric_matrix(&q.metric(&x), n);
    let ambient = inner(&g, &d, &zm);
    let red = ReducedBackground(q);
    let dq: Vec<f64> = bismut_derivative_at(&red, Sign::Minus, xf, yf, u);
    let gq = metric_matrix(&red.metric(u), u.len());
    let direct = inner(&gq, &dq, &zf.eval(u));
    if !ambient.is_finite() || !direct.is_finite() {
        return Err(GeomError::Lift(format!("non-finite lift at {x:?}")));
    }
    Ok((ambient, direct))
}

/// A constant vector field; only its value enters first-order formulas.
pub struct ConstVector<'a>(pub &'a [f64]);

impl Smooth for ConstVector<'_> {
    fn eval<S: Real>(&self, _x: &[S]) -> Vec<S> {
        self.0.iter().map(|&v| S::cst(v)).collect()
    }
}

/// `((∇⁻_{V_a} Z⁻, W⁻), ½ dξ⁻_a(Z⁻, W⁻))` for the invariant `τ₋` lift of
/// the quotient field `z` and a `τ₋` vector `w`.
pub fn vertical_derivative_check<Q: QuotientMap + ?Sized, Z: Smooth + ?Sized>(
    q: &Q,
    a: usize,
    zf: &Z,
    w: &[f64],
    u: &[f64],
) -> Result<(f64, f64)> {
    let x = checked_lift(q, u)?;
    let n = x.len();
    let zl = HorizontalLift {
        q,
        sign: Sign::Minus,
        field: zf,
    };
    let va: Vec<f64> = Generator { ea: q, a }.eval(&x);
    let d: Vec<f64> = bismut_derivative_at(q, Sign::Minus, &ConstVector(&va), &zl, &x);
    let g = metric_matrix(&q.metric(&x), n);
    let lhs = inner(&g, &d, w);
    let dxi = d_xi_pm_at(q, Sign::Minus, &x);
    let rhs = 0.5 * two_form(&dxi[a], &zl.eval(&x), w);
    Ok((lhs, rhs))
}

/// Pair symmetry and antisymmetry defects of the reduced curvature.
pub fn reduced_curvature_symmetries<Q: QuotientMap + ?Sized>(
    q: &Q,
    u: &[f64],
) -> Result<crate::calculus::CurvatureResiduals> {
    let r = bismut_curvature(Sign::Minus, &ReducedBackground(q), u)?;
    Ok(curvature_residuals(&r, u.len()))
}
