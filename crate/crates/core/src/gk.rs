//! BiHermitian (generalized Kähler) checks and their reduction to a
//! quotient.

use serde::Serialize;

use crate::calculus::metric_matrix;
use crate::chart::{jacobian, Smooth};
use crate::dual::Real;
use crate::error::{GeomError, Result};
use crate::generalized::{bismut_symbols_at, Background, Sign};
use crate::linalg::{constrained_basis, gram_schmidt, Matrix};
use crate::quotient::{horizontal_basis_at, xi_pm_at, QuotientMap, ReducedBackground};

/// Almost complex structures `J±` as `(1,1)`-tensors `J^i_j` at `[i·n + j]`.
pub trait BiHermitian: Background {
    fn j_plus<S: Real>(&self, x: &[S]) -> Vec<S>;
    fn j_minus<S: Real>(&self, x: &[S]) -> Vec<S>;
}

fn j_of<B: BiHermitian + ?Sized, S: Real>(bh: &B, sign: Sign, x: &[S]) -> Vec<S> {
    match sign {
        Sign::Plus => bh.j_plus(x),
        Sign::Minus => bh.j_minus(x),
    }
}

struct JField<'a, B: ?Sized>(&'a B, Sign);
impl<B: BiHermitian + ?Sized> Smooth for JField<'_, B> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        j_of(self.0, self.1, x)
    }
}

/// Largest residual of each condition, `[J₊, J₋]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct GkValidation {
    pub square: [f64; 2],
    pub compatibility: [f64; 2],
    pub nijenhuis: [f64; 2],
    pub parallel: [f64; 2],
    pub flux_type: [f64; 2],
}

impl GkValidation {
    pub const SQUARE: &'static str = "J^2 = -1";
    pub const COMPATIBILITY: &'static str = "g(JX, JY) = g(X, Y)";
    pub const NIJENHUIS: &'static str = "Nijenhuis tensor vanishes";
    pub const PARALLEL: &'static str = "Bismut-parallel J";
    pub const FLUX_TYPE: &'static str = "H of type (2,1)+(1,2)";

    fn rows(&self) -> [(&'static str, [f64; 2]); 5] {
        [
            (Self::SQUARE, self.square),
            (Self::COMPATIBILITY, self.compatibility),
            (Self::NIJENHUIS, self.nijenhuis),
            (Self::PARALLEL, self.parallel),
            (Self::FLUX_TYPE, self.flux_type),
        ]
    }

    /// Failed conditions as `"J+: <name>"` / `"J-: <name>"`.
    pub fn failures(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (name, r) in self.rows() {
            for (label, v) in ["J+", "J-"].iter().zip(r) {
                if !(v <= tol) {
                    out.push(format!("{label}: {name}"));
                }
            }
        }
        out
    }

    pub fn max_residual(&self) -> f64 {
        self.rows().iter().flat_map(|(_, r)| r.iter().copied()).fold(0.0, f64::max)
    }

    fn merge(&mut self, o: &GkValidation) {
        for (a, b) in [
            (&mut self.square, o.square),
            (&mut self.compatibility, o.compatibility),
            (&mut self.nijenhuis, o.nijenhuis),
            (&mut self.parallel, o.parallel),
            (&mut self.flux_type, o.flux_type),
        ] {
            for k in 0..2 {
                a[k] = a[k].max(b[k]);
            }
        }
    }
}

/// Residuals of one complex structure at one point.
struct Residuals {
    square: f64,
    compatibility: f64,
    nijenhuis: f64,
    parallel: f64,
    flux_type: f64,
}

/// `J`, its first derivatives `dj[(i·n+j)·n+k] = ∂_k J^i_j`, the metric, the
/// flux and the Bismut symbols `Γ^i_{kl}` (direction `k`).
fn residuals(j: &[f64], dj: &[f64], g: &Matrix<f64>, h: &[f64], gam: &[f64], n: usize) -> Residuals {
    let jm = |i: usize, k: usize| j[i * n + k];
    let d = |i: usize, jj: usize, k: usize| dj[(i * n + jj) * n + k];
    let mut square: f64 = 0.0;
    let mut compatibility: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let mut s = if a == b { 1.0 } else { 0.0 };
            let mut c = -g.at(a, b);
            for k in 0..n {
                s += jm(a, k) * jm(k, b);
                for l in 0..n {
                    c += jm(k, a) * g.at(k, l) * jm(l, b);
                }
            }
            square = square.max(s.abs());
            compatibility = compatibility.max(c.abs());
        }
    }
    // N^k_{ab} = J^l_a ∂_l J^k_b − J^l_b ∂_l J^k_a − J^k_l (∂_a J^l_b − ∂_b J^l_a)
    let mut nijenhuis: f64 = 0.0;
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut v = 0.0;
                for l in 0..n {
                    v += jm(l, a) * d(k, b, l) - jm(l, b) * d(k, a, l);
                    v -= jm(k, l) * (d(l, b, a) - d(l, a, b));
                }
                nijenhuis = nijenhuis.max(v.abs());
            }
        }
    }
    // (∇_k J)^i_j = ∂_k J^i_j + Γ^i_{kl} J^l_j − Γ^l_{kj} J^i_l
    let mut parallel: f64 = 0.0;
    for k in 0..n {
        for i in 0..n {
            for jj in 0..n {
                let mut v = d(i, jj, k);
                for l in 0..n {
                    v += gam[(i * n + k) * n + l] * jm(l, jj) - gam[(l * n + k) * n + jj] * jm(i, l);
                }
                parallel = parallel.max(v.abs());
            }
        }
    }
    // H(JX,JY,Z) + H(JX,Y,JZ) + H(X,JY,JZ) − H(X,Y,Z)
    let hh = |a: usize, b: usize, c: usize| h[(a * n + b) * n + c];
    let mut flux_type: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut v = -hh(a, b, c);
                for p in 0..n {
                    for q in 0..n {
                        let jj = jm(p, a) * jm(q, b);
                        v += jj * hh(p, q, c) + jm(p, a) * jm(q, c) * hh(p, b, q) + jm(p, b) * jm(q, c) * hh(a, p, q);
                    }
                }
                flux_type = flux_type.max(v.abs());
            }
        }
    }
    Residuals { square, compatibility, nijenhuis, parallel, flux_type }
}

fn validate_at<B: Background + ?Sized, J: Smooth + ?Sized>(bg: &B, jf: [&J; 2], p: &[f64]) -> Result<GkValidation> {
    bg.chart().check(p)?;
    let n = p.len();
    let g = metric_matrix(&bg.metric(p), n);
    let h: Vec<f64> = bg.flux(p);
    let mut out = GkValidation::default();
    for (k, sign) in [Sign::Plus, Sign::Minus].into_iter().enumerate() {
        let gam = bismut_symbols_at(bg, sign, p).ok_or_else(|| GeomError::SingularMetric(p.to_vec()))?;
        let (j, dj) = jacobian(jf[k], p);
        if j.len() != n * n || j.iter().chain(&dj).any(|v| !v.is_finite()) {
            return Err(GeomError::Evaluation);
        }
        let r = residuals(&j, &dj, &g, &h, &gam, n);
        out.square[k] = r.square;
        out.compatibility[k] = r.compatibility;
        out.nijenhuis[k] = r.nijenhuis;
        out.parallel[k] = r.parallel;
        out.flux_type[k] = r.flux_type;
    }
    Ok(out)
}

/// Worst residuals of the biHermitian conditions over `points`.
pub fn validate_bihermitian<B: BiHermitian + ?Sized>(bh: &B, points: &[Vec<f64>]) -> Result<GkValidation> {
    let mut out = GkValidation::default();
    for p in points {
        out.merge(&validate_at(bh, [&JField(bh, Sign::Plus), &JField(bh, Sign::Minus)], p)?);
    }
    Ok(out)
}

struct Sections<'a, Q: ?Sized>(&'a Q);
impl<Q: QuotientMap + ?Sized> Smooth for Sections<'_, Q> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.0.section(x)
    }
}

/// `g`-orthonormal basis of `τ±`, cut down by `dσ^α` when the quotient
/// is taken inside a zero locus.
fn tau_basis<Q: QuotientMap + ?Sized>(q: &Q, sign: Sign, p: &[f64], g: &Matrix<f64>) -> Result<Vec<Vec<f64>>> {
    let n = p.len();
    let s = q.generators();
    let r = q.sections();
    let xi: Vec<f64> = xi_pm_at(q, sign, p);
    let mut cov: Vec<Vec<f64>> = (0..s).map(|a| xi[a * n..(a + 1) * n].to_vec()).collect();
    if r > 0 {
        let (_, ds) = jacobian(&Sections(q), p);
        cov.extend((0..r).map(|a| ds[a * n..(a + 1) * n].to_vec()));
    }
    let basis = constrained_basis(g, &cov).ok_or_else(|| GeomError::SingularMetric(p.to_vec()))?;
    if basis.len() != n - s - r {
        return Err(GeomError::Rank { expected: n - s - r, found: basis.len() });
    }
    Ok(gram_schmidt(g, &basis, 1e-12))
}

/// `‖(1 − P) J P‖` for the `g`-orthogonal projector `P` onto a subspace
/// with orthonormal basis `e`.
pub fn invariance_defect(j: &Matrix<f64>, g: &Matrix<f64>, e: &[Vec<f64>]) -> f64 {
    let n = g.rows;
    let mut p = Matrix::zeros(n, n);
    for v in e {
        let gv = g.mat_vec(v);
        for a in 0..n {
            for b in 0..n {
                p.set(a, b, p.at(a, b) + v[a] * gv[b]);
            }
        }
    }
    let mut q = Matrix::identity(n);
    for a in 0..n {
        for b in 0..n {
            q.set(a, b, q.at(a, b) - p.at(a, b));
        }
    }
    q.matmul(j).matmul(&p).norm()
}

/// `(defect₊, defect₋)` of `J±τ± ⊂ τ±` at `p`.
pub fn check_tau_invariance<Q: BiHermitian + QuotientMap + ?Sized>(bh: &Q, p: &[f64]) -> Result<(f64, f64)> {
    bh.chart().check(p)?;
    let n = p.len();
    let g = metric_matrix(&bh.metric(p), n);
    let mut d = [0.0; 2];
    for (k, sign) in [Sign::Plus, Sign::Minus].into_iter().enumerate() {
        let e = tau_basis(bh, sign, p, &g)?;
        let j = Matrix::from_vec(n, n, j_of(bh, sign, p));
        d[k] = invariance_defect(&j, &g, &e);
    }
    Ok((d[0], d[1]))
}

/// `J̃±` on the quotient chart: `J̃(∂_a) = dπ(J± h±_a)` with `h±_a` the
/// `τ±` lifts of `∂_a` at `lift(u)`.
pub struct ReducedComplex<'a, Q: ?Sized> {
    pub q: &'a Q,
    pub sign: Sign,
}

struct Projection<'a, Q: ?Sized>(&'a Q);
impl<Q: QuotientMap + ?Sized> Smooth for Projection<'_, Q> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.0.project(x)
    }
}

impl<Q: QuotientMap + BiHermitian + ?Sized> Smooth for ReducedComplex<'_, Q> {
    fn eval<S: Real>(&self, u: &[S]) -> Vec<S> {
        let m = u.len();
        let x = self.q.lift(u);
        let n = x.len();
        let Some(h) = horizontal_basis_at(self.q, self.sign, &x) else {
            return vec![S::cst(f64::NAN); m * m];
        };
        let j = j_of(self.q, self.sign, &x);
        let (_, dp) = jacobian(&Projection(self.q), &x);
        let mut out = vec![S::zero(); m * m];
        for a in 0..m {
            let mut jh = vec![S::zero(); n];
            for i in 0..n {
                for k in 0..n {
                    jh[i] += j[i * n + k] * h[a][k];
                }
            }
            for b in 0..m {
                let mut s = S::zero();
                for i in 0..n {
                    s += dp[b * n + i] * jh[i];
                }
                out[b * m + a] = s;
            }
        }
        out
    }
}

/// Reduced complex structures and their checks against `(g̃, H̃)`.
#[derive(Debug, Clone, Serialize)]
pub struct ReducedGk {
    pub j_plus: Vec<f64>,
    pub j_minus: Vec<f64>,
    pub defects: (f64, f64),
    pub validation: GkValidation,
}

/// Pushes `J±|τ±` to the quotient at `u` and validates the result with the
/// reduced Bismut connections. Fails if `J±` does not preserve `τ±`.
pub fn reduce_gk<Q: QuotientMap + BiHermitian + ?Sized>(q: &Q, u: &[f64], tol: f64) -> Result<ReducedGk> {
    q.quotient_chart().check(u)?;
    let x: Vec<f64> = q.lift(u);
    let defects = check_tau_invariance(q, &x)?;
    if defects.0 > tol || defects.1 > tol {
        return Err(GeomError::ReductionCondition(defects.0.max(defects.1)));
    }
    let jp = ReducedComplex { q, sign: Sign::Plus };
    let jm = ReducedComplex { q, sign: Sign::Minus };
    let validation = validate_at(&ReducedBackground(q), [&jp, &jm], u)?;
    Ok(ReducedGk { j_plus: jp.eval(u), j_minus: jm.eval(u), defects, validation })
}
