//! Reduction to the zero locus `N = σ⁻¹(0)` of a regular section
//! `σ: M → R^r`: the matrix `T^{αβ} = ∂_iσ^α ∂_jσ^β g^{ij}`, the reduced
//! Bismut connection and curvature from ambient data, and the induced
//! structure `(g|_N, H|_N)` on a parametrization of `N`.

use crate::calculus::{flat, metric_matrix};
use crate::chart::{hessian, jacobian, Chart, Smooth};
use crate::dual::Real;
use crate::error::{GeomError, Result};
use crate::generalized::{
    bismut_curvature, bismut_curvature_formula_at, bismut_derivative_at, bismut_symbols_at,
    Background, Sign,
};
use crate::linalg::{inner, Matrix};
use crate::quotient::{orthonormal_columns, to_frame, ConstVector};

/// Membership tolerance for the zero locus.
pub const EPS_LOCUS: f64 = 1e-8;

/// Sections `σ^α` and a parametrization `embed` of their zero locus.
pub trait Submanifold: Background {
    fn sections(&self) -> usize;
    fn section<S: Real>(&self, x: &[S]) -> Vec<S>;
    fn nchart(&self) -> &Chart;
    fn embed<S: Real>(&self, u: &[S]) -> Vec<S>;
}

struct SectionField<'a, N: ?Sized>(&'a N);
impl<N: Submanifold + ?Sized> Smooth for SectionField<'_, N> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.0.section(x)
    }
}

struct Embedding<'a, N: ?Sized>(&'a N);
impl<N: Submanifold + ?Sized> Smooth for Embedding<'_, N> {
    fn eval<S: Real>(&self, u: &[S]) -> Vec<S> {
        self.0.embed(u)
    }
}

/// `T^{αβ}` and its inverse `T_{αβ}` at a point of `N`.
pub fn t_matrix<N: Submanifold + ?Sized>(sd: &N, p: &[f64]) -> Result<(Matrix<f64>, Matrix<f64>)> {
    sd.chart().check(p)?;
    let sig: Vec<f64> = sd.section(p);
    let off = sig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if off > EPS_LOCUS {
        return Err(GeomError::OffLocus(off));
    }
    let n = p.len();
    let r = sd.sections();
    let ginv = metric_matrix(&sd.metric(p), n)
        .inverse()
        .ok_or_else(|| GeomError::SingularMetric(p.to_vec()))?;
    let (_, ds) = jacobian(&SectionField(sd), p);
    let t = t_from(&ginv, &ds, r, n);
    let tinv = t.inverse().ok_or(GeomError::Rank {
        expected: r,
        found: 0,
    })?;
    Ok((t, tinv))
}

fn t_from(ginv: &Matrix<f64>, ds: &[f64], r: usize, n: usize) -> Matrix<f64> {
    let mut t = Matrix::zeros(r, r);
    for a in 0..r {
        for b in 0..r {
            t.set(
                a,
                b,
                inner(ginv, &ds[a * n..(a + 1) * n], &ds[b * n..(b + 1) * n]),
            );
        }
    }
    t
}

/// `(g|_N, H|_N)` pulled back along `embed`, on the chart of `N`.
pub struct InducedBackground<'a, N: ?Sized>(pub &'a N);

impl<N: Submanifold + ?Sized> Background for InducedBackground<'_, N> {
    fn chart(&self) -> &Chart {
        self.0.nchart()
    }

    fn metric<S: Real>(&self, u: &[S]) -> Vec<S> {
        let m = u.len();
        let (x, d) = jacobian(&Embedding(self.0), u);
        let n = x.len();
        let g = metric_matrix(&self.0.metric(&x), n);
        let col = |a: usize| (0..n).map(|i| d[i * m + a]).collect::<Vec<S>>();
        let cols: Vec<Vec<S>> = (0..m).map(col).collect();
        let mut out = vec![S::zero(); m * m];
        for a in 0..m {
            for b in a..m {
                let v = inner(&g, &cols[a], &cols[b]);
                out[a * m + b] = v;
                out[b * m + a] = v;
            }
        }
        out
    }

    fn flux<S: Real>(&self, u: &[S]) -> Vec<S> {
        let m = u.len();
        let (x, d) = jacobian(&Embedding(self.0), u);
        let n = x.len();
        let h = self.0.flux(&x);
        let mut out = vec![S::zero(); m * m * m];
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    if a == b || b == c || a == c {
                        continue;
                    }
                    let mut s = S::zero();
                    for i in 0..n {
                        for j in 0..n {
                            for k in 0..n {
                                s += h[(i * n + j) * n + k]
                                    * d[i * m + a]
                                    * d[j * m + b]
                                    * d[k * m + c];
                            }
                        }
                    }
                    out[(a * m + b) * m + c] = s;
                }
            }
        }
        out
    }
}

/// Ambient data at `embed(u)` for the submanifold formulas and the
/// localization chain.
#[derive(Debug, Clone)]
pub struct SubmanifoldFrame {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub g: Matrix<f64>,
    pub ginv: Matrix<f64>,
    pub h: Vec<f64>,
    /// `Γ±^i_{jk}` (direction `j`)
    pub gamma_minus: Vec<f64>,
    pub gamma_plus: Vec<f64>,
    /// Levi-Civita `Γ^i_{jk}`
    pub gamma: Vec<f64>,
    pub r_minus: Vec<f64>,
    /// `∂_i σ^α` at `[α·n + i]`
    pub dsigma: Vec<f64>,
    /// `∂_i ∂_j σ^α` at `[α·n² + i·n + j]`
    pub ddsigma: Vec<f64>,
    pub t: Matrix<f64>,
    pub tinv: Matrix<f64>,
    /// `d embed` columns: ambient images of `∂_{u_a}`.
    pub tangent: Vec<Vec<f64>>,
    /// Induced metric in `N` coordinates.
    pub induced: Matrix<f64>,
    /// Columns: an induced-orthonormal frame in `N` coordinates.
    pub frame: Matrix<f64>,
    /// Ambient images of the orthonormal frame (zero modes of `ψ±`).
    pub frame_ambient: Vec<Vec<f64>>,
}

impl SubmanifoldFrame {
    pub fn new<N: Submanifold + ?Sized>(sd: &N, u: &[f64]) -> Result<Self> {
        sd.nchart().check(u)?;
        let m = u.len();
        let (x, d) = jacobian(&Embedding(sd), u);
        sd.chart().check(&x)?;
        let n = x.len();
        let r = sd.sections();
        if m + r != n {
            return Err(GeomError::Rank {
                expected: n - r,
                found: m,
            });
        }
        let (t, tinv) = t_matrix(sd, &x)?;
        let g = metric_matrix(&sd.metric(&x), n);
        let ginv = g
            .inverse()
            .ok_or_else(|| GeomError::SingularMetric(x.clone()))?;
        let h: Vec<f64> = sd.flux(&x);
        let gamma_minus = bismut_symbols_at(sd, Sign::Minus, &x)
            .ok_or_else(|| GeomError::SingularMetric(x.clone()))?;
        let gamma_plus = bismut_symbols_at(sd, Sign::Plus, &x)
            .ok_or_else(|| GeomError::SingularMetric(x.clone()))?;
        let gamma = crate::calculus::christoffel_at(&crate::generalized::MetricField(sd), &x)
            .ok_or_else(|| GeomError::SingularMetric(x.clone()))?;
        let r_minus = bismut_curvature_formula_at(sd, Sign::Minus, &x);
        let (_, dsigma, ddsigma) = hessian(&SectionField(sd), &x);
        let tangent: Vec<Vec<f64>> = (0..m)
            .map(|a| (0..n).map(|i| d[i * m + a]).collect())
            .collect();
        let mut induced = Matrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                induced.set(a, b, inner(&g, &tangent[a], &tangent[b]));
            }
        }
        let frame = orthonormal_columns(&induced)?;
        let frame_ambient = (0..m)
            .map(|c| {
                let mut y = vec![0.0; n];
                for a in 0..m {
                    for k in 0..n {
                        y[k] += frame.at(a, c) * tangent[a][k];
                    }
                }
                y
            })
            .collect();
        Ok(SubmanifoldFrame {
            n,
            m,
            r,
            u: u.to_vec(),
            x,
            g,
            ginv,
            h,
            gamma_minus,
            gamma_plus,
            gamma,
            r_minus,
            dsigma,
            ddsigma,
            t,
            tinv,
            tangent,
            induced,
            frame,
            frame_ambient,
        })
    }

    /// `(∇±_Y dσ^α)(Z) = Y^j Z^k (∂_j∂_k σ^α − Γ±^l_{jk} ∂_l σ^α)`.
    pub fn nabla_dsigma(&self, sign: Sign, alpha: usize, y: &[f64], z: &[f64]) -> f64 {
        let n = self.n;
        let gam = match sign {
            Sign::Plus => &self.gamma_plus,
            Sign::Minus => &self.gamma_minus,
        };
        let mut s = 0.0;
        for j in 0..n {
            for k in 0..n {
                let mut c = self.ddsigma[(alpha * n + j) * n + k];
                for l in 0..n {
                    c -= gam[(l * n + j) * n + k] * self.dsigma[alpha * n + l];
                }
                s += y[j] * z[k] * c;
            }
        }
        s
    }

    fn r_minus_on(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        s +=
                            self.r_minus[((i * n + j) * n + k) * n + l] * x[i] * y[j] * z[k] * w[l];
                    }
                }
            }
        }
        s
    }

    /// The reduced-curvature formula on tangent vectors of `N`.
    pub fn curvature_formula(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let mut v = self.r_minus_on(x, y, z, w);
        for a in 0..self.r {
            for b in 0..self.r {
                let zy = self.nabla_dsigma(Sign::Minus, b, y, z);
                let wx = self.nabla_dsigma(Sign::Minus, a, x, w);
                let zx = self.nabla_dsigma(Sign::Minus, b, x, z);
                let wy = self.nabla_dsigma(Sign::Minus, a, y, w);
                v += self.tinv.at(a, b) * (zy * wx - zx * wy);
            }
        }
        v
    }

    pub fn curvature_formula_frame(&self) -> Vec<f64> {
        let m = self.m;
        let f = &self.frame_ambient;
        let mut out = vec![0.0; m.pow(4)];
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        out[flat(&[a, b, c, d], m)] = self.curvature_formula(&f[a], &f[b], &f[c], &f[d]);
                    }
                }
            }
        }
        out
    }

    /// Largest `|(Z, ∇⁻_Y dσ^β) − (Y, ∇⁺_Z dσ^β)|` over frame pairs.
    pub fn swap_residual(&self) -> f64 {
        let f = &self.frame_ambient;
        let mut worst: f64 = 0.0;
        for b in 0..self.r {
            for y in f {
                for z in f {
                    let l = self.nabla_dsigma(Sign::Minus, b, y, z);
                    let r = self.nabla_dsigma(Sign::Plus, b, z, y);
                    worst = worst.max((l - r).abs());
                }
            }
        }
        worst
    }

    /// Largest `|dσ^α(Y)|` over `vectors`.
    pub fn tangency_defect(&self, vectors: &[Vec<f64>]) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for y in vectors {
            for a in 0..self.r {
                worst = worst.max(crate::linalg::dot(&self.dsigma[a * n..(a + 1) * n], y).abs());
            }
        }
        worst
    }
}

/// `R̃` on an induced-orthonormal frame of `TN`: from the ambient formula
/// and from the Bismut curvature of `(g|_N, H|_N)`.
pub fn reduced_curvature_sub<N: Submanifold + ?Sized>(
    sd: &N,
    u: &[f64],
) -> Result<crate::quotient::ReducedCurvature> {
    let f = SubmanifoldFrame::new(sd, u)?;
    let formula = f.curvature_formula_frame();
    let direct = to_frame(
        &bismut_curvature(Sign::Minus, &InducedBackground(sd), u)?,
        &f.frame,
    );
    Ok(crate::quotient::ReducedCurvature {
        formula,
        direct,
        m: f.m,
    })
}

/// First-order tubular extension of a tangent field of `N`:
/// `Y(x) = d embed(π(x)) · ȳ(π(x))` with
/// `π(x) = u₀ + (Jᵀ g J)⁻¹ Jᵀ g (x − embed(u₀))`, plus an optional
/// `σ`-proportional term `σ^0(x)·W(x)` that vanishes on `N`.
pub struct TubularExtension<'a, N: ?Sized, F: ?Sized, W: ?Sized> {
    pub sd: &'a N,
    pub field: &'a F,
    pub base: Vec<f64>,
    pub extra: Option<&'a W>,
}

impl<N: Submanifold + ?Sized, F: Smooth + ?Sized, W: Smooth + ?Sized> Smooth
    for TubularExtension<'_, N, F, W>
{
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = x.len();
        let u0: Vec<f64> = self.base.clone();
        let m = u0.len();
        let (e0, j0) = jacobian::<f64, _>(&Embedding(self.sd), &u0);
        let g0 = metric_matrix(&self.sd.metric(&e0), n);
        // P = (Jᵀ g J)⁻¹ Jᵀ g, constant
        let jm = Matrix::from_vec(n, m, j0);
        let jtg = jm.transpose().matmul(&g0);
        let p = jtg
            .matmul(&jm)
            .inverse()
            .expect("regular embedding")
            .matmul(&jtg);
        let u: Vec<S> = (0..m)
            .map(|a| {
                let mut s = S::cst(u0[a]);
                for i in 0..n {
                    s += (x[i] - e0[i]) * p.at(a, i);
                }
                s
            })
            .collect();
        let (_, d) = jacobian(&Embedding(self.sd), &u);
        let ybar = self.field.eval(&u);
        let mut y = vec![S::zero(); n];
        for i in 0..n {
            for a in 0..m {
                y[i] += d[i * m + a] * ybar[a];
            }
        }
        if let Some(w) = self.extra {
            let s0 = self.sd.section(x)[0];
            let wv = w.eval(x);
            for i in 0..n {
                y[i] += s0 * wv[i];
            }
        }
        y
    }
}

/// The three routes to `(∇̃_X̄ Ȳ, Z̄)` on `N`.
#[derive(Debug, Clone, Copy)]
pub struct ConnectionValues {
    /// `g(∇⁻_X Y, Z)` with tubular extensions.
    pub ambient: f64,
    /// The corrected on-shell coefficient `Γ⁻ + T_{αβ} g⁻¹dσ^α ∇⁺ dσ^β`
    /// paired with `Z`.
    pub onshell: f64,
    /// Bismut derivative of `(g|_N, H|_N)` on the chart of `N`.
    pub direct: f64,
    /// `max_α |dσ^α(∇⁻_X Y + T_{αβ}(Y, ∇⁻_X dσ^β) g⁻¹dσ^α)|`
    pub tangency: f64,
}

pub fn reduced_connection_sub<
    N: Submanifold + ?Sized,
    X: Smooth + ?Sized,
    Y: Smooth + ?Sized,
    Z: Smooth + ?Sized,
>(
    sd: &N,
    xf: &X,
    yf: &Y,
    zf: &Z,
    u: &[f64],
) -> Result<ConnectionValues> {
    let f = SubmanifoldFrame::new(sd, u)?;
    let n = f.n;
    let m = f.m;
    let push = |v: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; n];
        for a in 0..m {
            for i in 0..n {
                y[i] += f.tangent[a][i] * v[a];
            }
        }
        y
    };
    let xb: Vec<f64> = xf.eval(u);
    let yb: Vec<f64> = yf.eval(u);
    let zb: Vec<f64> = zf.eval(u);
    let (xa, ya, za) = (push(&xb), push(&yb), push(&zb));
    let tol = 1e-8
        * (1.0
            + xa.iter()
                .chain(&ya)
                .chain(&za)
                .fold(0.0f64, |m, v| m.max(v.abs())));
    let defect = f.tangency_defect(&[xa.clone(), ya.clone(), za.clone()]);
    if defect > tol {
        return Err(GeomError::Tangency(defect));
    }
    let ext = TubularExtension::<N, Y, ConstVector> {
        sd,
        field: yf,
        base: u.to_vec(),
        extra: None,
    };
    let d: Vec<f64> = bismut_derivative_at(sd, Sign::Minus, &ConstVector(&xa), &ext, &f.x);
    let ambient = inner(&f.g, &d, &za);
    // corrected on-shell connection applied to the same extension
    let (_, dy) = jacobian(&ext, &f.x);
    let mut corrected = vec![0.0; n];
    for i in 0..n {
        for k in 0..n {
            corrected[i] += xa[k] * dy[i * n + k];
            for j in 0..n {
                corrected[i] += f.gamma_minus[(i * n + k) * n + j] * xa[k] * ya[j];
            }
        }
    }
    for a in 0..f.r {
        let gds = f.ginv.mat_vec(&f.dsigma[a * n..(a + 1) * n]);
        for b in 0..f.r {
            let c = f.tinv.at(a, b) * f.nabla_dsigma(Sign::Plus, b, &ya, &xa);
            for i in 0..n {
                corrected[i] += c * gds[i];
            }
        }
    }
    let onshell = inner(&f.g, &corrected, &za);
    // the corrected derivative must be tangent to N
    let mut full = d.clone();
    for a in 0..f.r {
        let gds = f.ginv.mat_vec(&f.dsigma[a * n..(a + 1) * n]);
        for b in 0..f.r {
            let c = f.tinv.at(a, b) * f.nabla_dsigma(Sign::Minus, b, &xa, &ya);
            for i in 0..n {
                full[i] += c * gds[i];
            }
        }
    }
    let tangency = f.tangency_defect(&[full]);
    let ib = InducedBackground(sd);
    let dq: Vec<f64> = bismut_derivative_at(&ib, Sign::Minus, xf, yf, u);
    let direct = inner(&metric_matrix(&ib.metric(u), m), &dq, &zb);
    Ok(ConnectionValues {
        ambient,
        onshell,
        direct,
        tangency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::sphere_in_flat::{FlatSection, SectionShape};

    #[test]
    fn t_matrix_examples() {
        let plane = FlatSection::new(SectionShape::Plane, 0.0);
        let (t, _) = t_matrix(&plane, &[0.0, 0.3, 0.2]).unwrap();
        assert_eq!(t.data, vec![1.0]);
        let sphere = FlatSection::new(SectionShape::Sphere { radius: 1.0 }, 0.0);
        let (t, tinv) = t_matrix(&sphere, &[0.0, 0.6, 0.8]).unwrap();
        assert!((t.at(0, 0) - 4.0).abs() < 1e-14);
        assert!((tinv.at(0, 0) - 0.25).abs() < 1e-14);
        let line = FlatSection::new(SectionShape::Line, 0.0);
        let (t, _) = t_matrix(&line, &[0.0, 0.0, 0.2]).unwrap();
        assert_eq!(t.data, vec![1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            t_matrix(&sphere, &[0.0, 0.0, 0.5]),
            Err(GeomError::OffLocus(_))
        ));
    }

    fn check_formula(sd: &FlatSection, u: &[f64], tol: f64) {
        let rc = reduced_curvature_sub(sd, u).unwrap();
        assert!(rc.residual() < tol, "residual {}", rc.residual());
    }

    #[test]
    fn sphere_curvature_matches_induced() {
        for c in [0.0, 0.5, 2.0] {
            let sd = FlatSection::new(SectionShape::Sphere { radius: 1.0 }, c);
            check_formula(&sd, &[0.9, 0.4], 1e-8);
            // 2d: H|_N = 0, so the sectional curvature is that of the unit sphere
            let rc = reduced_curvature_sub(&sd, &[0.9, 0.4]).unwrap();
            assert!((rc.sectional_12() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn warped_ambient_matches_induced() {
        for shape in [
            SectionShape::Sphere { radius: 0.8 },
            SectionShape::Plane,
            SectionShape::Line,
        ] {
            let sd = FlatSection::new(shape, 1.3).with_warp(0.7);
            let u = if sd.sections() == 2 {
                vec![0.3]
            } else {
                vec![0.7, -0.4]
            };
            check_formula(&sd, &u, 1e-7);
            let f = SubmanifoldFrame::new(&sd, &u).unwrap();
            assert!(f.swap_residual() < 1e-12);
        }
    }

    struct Lin(Vec<f64>, Vec<f64>);
    impl Smooth for Lin {
        fn eval<S: Real>(&self, u: &[S]) -> Vec<S> {
            (0..self.0.len())
                .map(|a| S::cst(self.0[a]) + u[0] * self.1[a] + u[1] * u[1] * 0.3)
                .collect()
        }
    }

    #[test]
    fn connection_routes_agree() {
        let sd = FlatSection::new(SectionShape::Sphere { radius: 0.9 }, 1.1).with_warp(0.5);
        let (x, y, z) = (
            Lin(vec![0.4, -0.2], vec![0.1, 0.3]),
            Lin(vec![-0.3, 0.7], vec![0.5, -0.2]),
            Lin(vec![1.0, 0.2], vec![0.0, 0.1]),
        );
        let v = reduced_connection_sub(&sd, &x, &y, &z, &[1.0, 0.5]).unwrap();
        assert!((v.ambient - v.direct).abs() < 1e-9, "{v:?}");
        assert!((v.onshell - v.direct).abs() < 1e-9, "{v:?}");
        assert!(v.tangency < 1e-10, "{v:?}");
    }

    struct Wfield;
    impl Smooth for Wfield {
        fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
            vec![x[1] * x[2], S::cst(0.4) + x[0], x[0] * x[1] * 2.0]
        }
    }

    #[test]
    fn extension_does_not_matter() {
        let sd = FlatSection::new(SectionShape::Sphere { radius: 1.0 }, 0.5);
        let u = [0.8, 0.2];
        let f = SubmanifoldFrame::new(&sd, &u).unwrap();
        let yb = Lin(vec![0.2, 0.6], vec![0.3, 0.1]);
        let xa = f.tangent[0].clone();
        let zb = f.tangent[1].clone();
        let mut vals = Vec::new();
        for extra in [None, Some(&Wfield)] {
            let ext = TubularExtension {
                sd: &sd,
                field: &yb,
                base: u.to_vec(),
                extra,
            };
            let d: Vec<f64> = bismut_derivative_at(&sd, Sign::Minus, &ConstVector(&xa), &ext, &f.x);
            vals.push(inner(&f.g, &d, &zb));
        }
        assert!((vals[0] - vals[1]).abs() < 1e-10, "{vals:?}");
    }

    #[test]
    fn off_locus_point_is_rejected() {
        let sd = FlatSection::new(SectionShape::Plane, 0.0);
        let err = t_matrix(&sd, &[0.5, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, GeomError::OffLocus(_)));
    }
}
