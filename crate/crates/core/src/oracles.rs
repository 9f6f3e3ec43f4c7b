//! Classical curvature formulas used as independent references when the
//! flux and the forms `ξ_a` vanish: O'Neill for Riemannian submersions and
//! Gauss for submanifolds. Both return coordinate components.

use crate::calculus::{christoffel_at, flat, metric_matrix, riemann_at};
use crate::chart::{hessian, jacobian, Smooth};
use crate::dual::Real;
use crate::error::{GeomError, Result};
use crate::generalized::MetricField;
use crate::linalg::{inner, Matrix};
use crate::quotient::QuotientMap;
use crate::submanifold::Submanifold;

struct Projection<'a, Q: ?Sized>(&'a Q);
impl<Q: QuotientMap + ?Sized> Smooth for Projection<'_, Q> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.0.project(x)
    }
}

/// `g`-horizontal lift of `∂_{u_a}`: `dπ(X) = e_a` and `g(X, V_b) = 0`.
struct OrthogonalLift<'a, Q: ?Sized> {
    q: &'a Q,
    a: usize,
}

impl<Q: QuotientMap + ?Sized> Smooth for OrthogonalLift<'_, Q> {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = x.len();
        let m = self.q.quotient_chart().dim();
        let s = self.q.generators();
        let (_, dp) = jacobian(&Projection(self.q), x);
        let g = metric_matrix(&self.q.metric(x), n);
        let v = self.q.vectors(x);
        let mut a = Matrix::zeros(n, n);
        let mut rhs = vec![S::zero(); n];
        for c in 0..m {
            for k in 0..n {
                a.set(c, k, dp[c * n + k]);
            }
        }
        rhs[self.a] = S::one();
        for b in 0..s {
            let gv = g.mat_vec(&v[b * n..(b + 1) * n]);
            for k in 0..n {
                a.set(m + b, k, gv[k]);
            }
        }
        a.solve(&rhs).unwrap_or_else(|| vec![S::cst(f64::NAN); n])
    }
}

fn contract4(r: &[f64], vs: [&[f64]; 4], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    s += r[((i * n + j) * n + k) * n + l] * vs[0][i] * vs[1][j] * vs[2][k] * vs[3][l];
                }
            }
        }
    }
    s
}

/// Base curvature of a Riemannian submersion by O'Neill's formula
/// `R_B = R_M − 2g(A_XY, A_ZW) + g(A_YZ, A_XW) − g(A_XZ, A_YW)` with
/// `A_XY = ½[X̃, Ỹ]^V`, in the coordinates of the quotient chart.
pub fn oneill_curvature<Q: QuotientMap + ?Sized>(q: &Q, u: &[f64]) -> Result<Vec<f64>> {
    q.quotient_chart().check(u)?;
    if q.sections() != 0 {
        return Err(GeomError::InvalidChart("O'Neill oracle needs a free quotient".into()));
    }
    let x: Vec<f64> = q.lift(u);
    q.chart().check(&x)?;
    let n = x.len();
    let m = u.len();
    let s = q.generators();
    let g = metric_matrix(&q.metric(&x), n);
    let v: Vec<f64> = q.vectors(&x);
    let vs: Vec<Vec<f64>> = (0..s).map(|a| v[a * n..(a + 1) * n].to_vec()).collect();
    let mut gram = Matrix::zeros(s, s);
    for a in 0..s {
        for b in 0..s {
            gram.set(a, b, inner(&g, &vs[a], &vs[b]));
        }
    }
    let gram_inv = gram.inverse().ok_or(GeomError::Rank { expected: s, found: 0 })?;
    let vertical = |w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for a in 0..s {
            for b in 0..s {
                let c = gram_inv.at(a, b) * inner(&g, &vs[b], w);
                for i in 0..n {
                    out[i] += c * vs[a][i];
                }
            }
        }
        out
    };
    let lifts: Vec<OrthogonalLift<'_, Q>> = (0..m).map(|a| OrthogonalLift { q, a }).collect();
    let xs: Vec<Vec<f64>> = lifts.iter().map(|l| l.eval(&x)).collect();
    let mut a_t = vec![vec![0.0; n]; m * m];
    for a in 0..m {
        for b in 0..m {
            let br: Vec<f64> = crate::calculus::lie_bracket_at(&lifts[a], &lifts[b], &x);
            a_t[a * m + b] = vertical(&br).iter().map(|c| 0.5 * c).collect();
        }
    }
    let rm = riemann_at(&MetricField(q), &x);
    let aa = |p: usize, q2: usize, r: usize, s2: usize| inner(&g, &a_t[p * m + q2], &a_t[r * m + s2]);
    let mut out = vec![0.0; m.pow(4)];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    out[flat(&[a, b, c, d], m)] = contract4(&rm, [&xs[a], &xs[b], &xs[c], &xs[d]], n)
                        - 2.0 * aa(a, b, c, d)
                        + aa(b, c, a, d)
                        - aa(a, c, b, d);
                }
            }
        }
    }
    Ok(out)
}

struct Embedding<'a, N: ?Sized>(&'a N);
impl<N: Submanifold + ?Sized> Smooth for Embedding<'_, N> {
    fn eval<S: Real>(&self, u: &[S]) -> Vec<S> {
        self.0.embed(u)
    }
}

/// Induced curvature by the Gauss equation
/// `R_N(X,Y,Z,W) = R_M(X,Y,Z,W) + g(II(X,W), II(Y,Z)) − g(II(X,Z), II(Y,W))`
/// in the coordinates of the parametrization.
pub fn gauss_curvature<N: Submanifold + ?Sized>(sd: &N, u: &[f64]) -> Result<Vec<f64>> {
    sd.nchart().check(u)?;
    let m = u.len();
    let (x, d, dd) = hessian(&Embedding(sd), u);
    sd.chart().check(&x)?;
    let n = x.len();
    let g = metric_matrix(&sd.metric(&x), n);
    let gam = christoffel_at(&MetricField(sd), &x).ok_or_else(|| GeomError::SingularMetric(x.clone()))?;
    let jm = Matrix::from_vec(n, m, d.clone());
    let jtg = jm.transpose().matmul(&g);
    let induced_inv = jtg.matmul(&jm).inverse().ok_or(GeomError::Rank { expected: m, found: 0 })?;
    let proj = jm.matmul(&induced_inv).matmul(&jtg);
    let col = |a: usize| -> Vec<f64> { (0..n).map(|i| d[i * m + a]).collect() };
    let mut second = vec![vec![0.0; n]; m * m];
    for a in 0..m {
        for b in 0..m {
            let mut v: Vec<f64> = (0..n).map(|i| dd[(i * m + a) * m + b]).collect();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        v[i] += gam[(i * n + j) * n + k] * d[j * m + a] * d[k * m + b];
                    }
                }
            }
            let t = proj.mat_vec(&v);
            second[a * m + b] = v.iter().zip(&t).map(|(p, q)| p - q).collect();
        }
    }
    let rm = riemann_at(&MetricField(sd), &x);
    let cols: Vec<Vec<f64>> = (0..m).map(col).collect();
    let ii = |p: usize, q: usize, r: usize, s: usize| inner(&g, &second[p * m + q], &second[r * m + s]);
    let mut out = vec![0.0; m.pow(4)];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for e in 0..m {
                    out[flat(&[a, b, c, e], m)] =
                        contract4(&rm, [&cols[a], &cols[b], &cols[c], &cols[e]], n) + ii(a, e, b, c) - ii(a, c, b, e);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generalized::{bismut_curvature, Sign};
    use crate::quotient::{to_frame, QuotientFrame, ReducedBackground};
    use crate::scenarios::hopf::{Hopf, HopfParams};
    use crate::scenarios::product::SphereTorus;
    use crate::scenarios::sphere_in_flat::{FlatSection, SectionShape};
    use crate::submanifold::{InducedBackground, SubmanifoldFrame};

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn oneill_matches_the_reduction_formula() {
        let cases: Vec<(Hopf, Vec<f64>)> = vec![
            (Hopf::new(HopfParams::with_lambda(1.0, 0.0)), vec![0.7, 0.3]),
            (Hopf::new(HopfParams::with_lambda(1.7, 0.0)), vec![1.1, -0.5]),
            (Hopf::new(HopfParams::with_torus(1.0, 0.0, 0.0, 0.0)), vec![0.6, 0.1, 0.2, -0.4]),
        ];
        for (h, u) in cases {
            let o = oneill_curvature(&h, &u).unwrap();
            let f = QuotientFrame::new(&h, &u).unwrap();
            let formula = f.curvature_formula_frame();
            assert!(max_diff(&to_frame(&o, &f.frame), &formula) < 1e-8);
            let direct = bismut_curvature(Sign::Minus, &ReducedBackground(&h), &u).unwrap();
            assert!(max_diff(&o, &direct) < 1e-7);
        }
        let p = SphereTorus::new(2.0);
        let o = oneill_curvature(&p, &[0.9, 0.2]).unwrap();
        let direct = bismut_curvature(Sign::Minus, &ReducedBackground(&p), &[0.9, 0.2]).unwrap();
        assert!(max_diff(&o, &direct) < 1e-9);
    }

    #[test]
    fn gauss_matches_the_section_formula() {
        for shape in [SectionShape::Sphere { radius: 1.3 }, SectionShape::Plane, SectionShape::Line] {
            let sd = FlatSection::new(shape, 0.0).with_warp(0.8);
            let u = if sd.sections() == 2 { vec![0.4] } else { vec![0.8, 0.5] };
            let gc = gauss_curvature(&sd, &u).unwrap();
            let direct = bismut_curvature(Sign::Minus, &InducedBackground(&sd), &u).unwrap();
            assert!(max_diff(&gc, &direct) < 1e-8);
            let f = SubmanifoldFrame::new(&sd, &u).unwrap();
            assert!(max_diff(&to_frame(&gc, &f.frame), &f.curvature_formula_frame()) < 1e-8);
        }
    }
}
