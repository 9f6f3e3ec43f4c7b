//! Zero-dimensional localization done exactly in a Grassmann algebra.
//!
//! The component actions of the gauged model and of the section model are
//! assembled at one point as an [`AuxiliaryPolynomial`] in the even
//! auxiliary fields, with coefficients in the algebra generated by the
//! zero modes of `ψ±`. Eliminating the auxiliaries leaves a quartic
//! exponent that is compared with the reduced curvature.
//!
//! Generator layout: with `m` zero modes, `θ_0 … θ_{m−1}` carry `ψ₊` and
//! `θ_m … θ_{2m−1}` carry `ψ₋`. The curvature term is
//! `¼ R_{ijkl} ψ₊^i ψ₊^j ψ₋^k ψ₋^l`, so the coefficient of
//! `θ_A θ_B θ_{m+C} θ_{m+D}` (`A<B`, `C<D`) is `R(e_A, e_B, e_C, e_D)`.

use std::ops::Range;

use crate::calculus::flat;
use crate::grassmann::GrassmannElement;
use crate::error::{GeomError, Result};
use crate::linalg::Matrix;
use crate::quotient::QuotientFrame;
use crate::submanifold::SubmanifoldFrame;

/// Residual allowed on the frame conditions of the zero modes.
pub const FRAME_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxGroup {
    F,
    PhiPlusMinus,
    PhiPlusPlus,
    PhiMinusMinus,
    U,
}

/// `S = ½ zᵀ Q z + Lᵀ z + C` over even unknowns `z`, with even Grassmann
/// coefficients. `Q` is stored symmetric.
#[derive(Debug, Clone)]
pub struct AuxiliaryPolynomial {
    generators: usize,
    groups: Vec<(AuxGroup, usize)>,
    quadratic: Vec<GrassmannElement>,
    linear: Vec<GrassmannElement>,
    constant: GrassmannElement,
}

/// Stationary value `y = offset + slope · w` of the eliminated unknowns in
/// terms of the remaining ones.
#[derive(Debug, Clone)]
pub struct Stationary {
    pub offset: Vec<GrassmannElement>,
    /// `[k · remaining + j]`
    pub slope: Vec<GrassmannElement>,
}

type GMatrix = Vec<GrassmannElement>;

fn gmat_mul(a: &[GrassmannElement], b: &[GrassmannElement], r: usize, k: usize, c: usize, n: usize) -> GMatrix {
    let mut out = vec![GrassmannElement::zero(n); r * c];
    for i in 0..r {
        for j in 0..c {
            let mut s = GrassmannElement::zero(n);
            for l in 0..k {
                s = &s + &(&a[i * k + l] * &b[l * c + j]);
            }
            out[i * c + j] = s;
        }
    }
    out
}

/// Inverse of a square matrix of even elements with invertible body:
/// `Q⁻¹ = Σ (−B⁻¹N)^k B⁻¹` with `B` the body and `N` nilpotent.
fn gmat_inverse(q: &[GrassmannElement], k: usize, n: usize) -> Result<GMatrix> {
    let body = Matrix::from_vec(k, k, q.iter().map(|e| e.body()).collect());
    let binv = body.inverse().ok_or(GeomError::SingularBody)?;
    let binv_g: GMatrix = binv.data.iter().map(|&v| GrassmannElement::scalar(n, v)).collect();
    let nil: GMatrix = q
        .iter()
        .map(|e| {
            let mut e = e.clone();
            e.add_scaled(&GrassmannElement::one(n), -e.body());
            e
        })
        .collect();
    let step: GMatrix = gmat_mul(&binv_g, &nil, k, k, k, n).into_iter().map(|e| -e).collect();
    let mut sum = binv_g.clone();
    let mut term = binv_g;
    for _ in 0..=n {
        term = gmat_mul(&step, &term, k, k, k, n);
        if term.iter().all(|e| e.max_abs() == 0.0) {
            break;
        }
        for (s, t) in sum.iter_mut().zip(&term) {
            *s = &*s + t;
        }
    }
    Ok(sum)
}

impl AuxiliaryPolynomial {
    pub fn new(generators: usize, groups: &[(AuxGroup, usize)]) -> Self {
        let k: usize = groups.iter().map(|g| g.1).sum();
        let zero = GrassmannElement::zero(generators);
        AuxiliaryPolynomial {
            generators,
            groups: groups.to_vec(),
            quadratic: vec![zero.clone(); k * k],
            linear: vec![zero.clone(); k],
            constant: zero,
        }
    }

    pub fn unknowns(&self) -> usize {
        self.linear.len()
    }

    pub fn groups(&self) -> &[(AuxGroup, usize)] {
        &self.groups
    }

    pub fn range(&self, group: AuxGroup) -> Option<Range<usize>> {
        let mut start = 0;
        for &(g, len) in &self.groups {
            if g == group {
                return Some(start..start + len);
            }
            start += len;
        }
        None
    }

    fn index(&self, group: AuxGroup, k: usize) -> usize {
        let r = self.range(group).expect("group present");
        assert!(k < r.len(), "index {k} out of group {group:?}");
        r.start + k
    }

    /// Adds the monomial `c · z_i z_j`.
    pub fn add_term(&mut self, (gi, i): (AuxGroup, usize), (gj, j): (AuxGroup, usize), c: &GrassmannElement) {
        let (a, b) = (self.index(gi, i), self.index(gj, j));
        let k = self.unknowns();
        if a == b {
            self.quadratic[a * k + a].add_scaled(c, 2.0);
        } else {
            self.quadratic[a * k + b].add_scaled(c, 1.0);
            self.quadratic[b * k + a].add_scaled(c, 1.0);
        }
    }

    /// Adds `c · z_i`.
    pub fn add_linear(&mut self, (g, i): (AuxGroup, usize), c: &GrassmannElement) {
        let a = self.index(g, i);
        self.linear[a].add_scaled(c, 1.0);
    }

    pub fn add_constant(&mut self, c: &GrassmannElement) {
        self.constant.add_scaled(c, 1.0);
    }

    pub fn constant(&self) -> &GrassmannElement {
        &self.constant
    }

    pub fn linear(&self, group: AuxGroup) -> Vec<GrassmannElement> {
        self.range(group).map(|r| self.linear[r].to_vec()).unwrap_or_default()
    }

    /// Block `Q[group_a, group_b]`, row-major.
    pub fn quadratic(&self, a: AuxGroup, b: AuxGroup) -> Vec<GrassmannElement> {
        let (Some(ra), Some(rb)) = (self.range(a), self.range(b)) else {
            return Vec::new();
        };
        let k = self.unknowns();
        ra.flat_map(|i| rb.clone().map(move |j| (i, j))).map(|(i, j)| self.quadratic[i * k + j].clone()).collect()
    }

    /// `S(z)` for Grassmann-valued `z`.
    pub fn evaluate(&self, z: &[GrassmannElement]) -> GrassmannElement {
        let k = self.unknowns();
        let mut s = self.constant.clone();
        for i in 0..k {
            s = &s + &(&self.linear[i] * &z[i]);
            for j in 0..k {
                s = &s + &(&(&self.quadratic[i * k + j] * &z[i]) * &z[j]).scale(0.5);
            }
        }
        s
    }

    /// Splits indices into (eliminated, kept) and the reduced group list.
    fn split(&self, out: &[AuxGroup]) -> (Vec<usize>, Vec<usize>, Vec<(AuxGroup, usize)>) {
        let mut y = Vec::new();
        let mut w = Vec::new();
        let mut kept = Vec::new();
        let mut start = 0;
        for &(g, len) in &self.groups {
            if out.contains(&g) {
                y.extend(start..start + len);
            } else {
                w.extend(start..start + len);
                kept.push((g, len));
            }
            start += len;
        }
        (y, w, kept)
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> GMatrix {
        let k = self.unknowns();
        rows.iter().flat_map(|&i| cols.iter().map(move |&j| self.quadratic[i * k + j].clone())).collect()
    }

    /// Replaces the unknowns of `group` by their stationary value
    /// `y = −Q_yy⁻¹ (Q_yw w + L_y)` and returns the reduced polynomial.
    pub fn eliminate(&self, group: AuxGroup) -> Result<(AuxiliaryPolynomial, Stationary)> {
        let n = self.generators;
        if self.range(group).is_none() {
            return Err(GeomError::FrameMismatch(format!("no auxiliary group {group:?}")));
        }
        let (y, w, kept) = self.split(&[group]);
        let (ky, kw) = (y.len(), w.len());
        let qyy_inv = gmat_inverse(&self.block(&y, &y), ky, n)?;
        let qyw = self.block(&y, &w);
        let qwy = self.block(&w, &y);
        let ly: GMatrix = y.iter().map(|&i| self.linear[i].clone()).collect();
        // y = −Q⁻¹L − Q⁻¹Q_yw w
        let inv_l = gmat_mul(&qyy_inv, &ly, ky, ky, 1, n);
        let inv_qyw = gmat_mul(&qyy_inv, &qyw, ky, ky, kw, n);
        let offset: GMatrix = inv_l.iter().map(|e| -e).collect();
        let slope: GMatrix = inv_qyw.iter().map(|e| -e).collect();
        let schur = gmat_mul(&qwy, &inv_qyw, kw, ky, kw, n);
        let lw_shift = gmat_mul(&qwy, &inv_l, kw, ky, 1, n);
        let mut reduced = AuxiliaryPolynomial::new(n, &kept);
        for (a, &i) in w.iter().enumerate() {
            reduced.linear[a] = &self.linear[i] - &lw_shift[a];
            for (b, &j) in w.iter().enumerate() {
                reduced.quadratic[a * kw + b] = &self.quadratic[i * self.unknowns() + j] - &schur[a * kw + b];
            }
        }
        let mut c = self.constant.clone();
        for a in 0..ky {
            c.add_scaled(&(&ly[a] * &inv_l[a]), -0.5);
        }
        reduced.constant = c;
        Ok((reduced, Stationary { offset, slope }))
    }

    /// Integrates out a multiplier group `p` that enters only through
    /// `z_pᵀ Q_pt z_t + L_pᵀ z_p`: the resulting delta function sets
    /// `z_t = −Q_pt⁻¹ L_p`, which is substituted directly.
    pub fn eliminate_delta(&self, p: AuxGroup, t: AuxGroup) -> Result<(AuxiliaryPolynomial, Stationary)> {
        let n = self.generators;
        let (Some(rp), Some(rt)) = (self.range(p), self.range(t)) else {
            return Err(GeomError::FrameMismatch(format!("missing delta pair {p:?}/{t:?}")));
        };
        let (py, _, _) = self.split(&[p]);
        let (ty, w, kept) = self.split(&[p, t]);
        let ty: Vec<usize> = ty.into_iter().filter(|i| rt.contains(i)).collect();
        let k = self.unknowns();
        for &i in &py {
            for j in 0..k {
                if !rt.contains(&j) && self.quadratic[i * k + j].max_abs() > 0.0 {
                    return Err(GeomError::FrameMismatch(format!("{p:?} is not a pure multiplier for {t:?}")));
                }
            }
        }
        if rp.len() != rt.len() {
            return Err(GeomError::Rank { expected: rp.len(), found: rt.len() });
        }
        let m = rt.len();
        let qpt_inv = gmat_inverse(&self.block(&py, &ty), m, n)?;
        let lp: GMatrix = py.iter().map(|&i| self.linear[i].clone()).collect();
        let zt: GMatrix = gmat_mul(&qpt_inv, &lp, m, m, 1, n).into_iter().map(|e| -e).collect();
        let kw = w.len();
        let mut reduced = AuxiliaryPolynomial::new(n, &kept);
        let qwt = self.block(&w, &ty);
        let shift = gmat_mul(&qwt, &zt, kw, m, 1, n);
        for (a, &i) in w.iter().enumerate() {
            reduced.linear[a] = &self.linear[i] + &shift[a];
            for (b, &j) in w.iter().enumerate() {
                reduced.quadratic[a * kw + b] = self.quadratic[i * k + j].clone();
            }
        }
        let qtt = self.block(&ty, &ty);
        let mut c = self.constant.clone();
        for a in 0..m {
            c = &c + &(&self.linear[ty[a]] * &zt[a]);
            for b in 0..m {
                c.add_scaled(&(&(&qtt[a * m + b] * &zt[a]) * &zt[b]), 0.5);
            }
        }
        reduced.constant = c;
        Ok((reduced, Stationary { offset: zt, slope: vec![GrassmannElement::zero(n); m * kw] }))
    }
}

/// `ψ^i = Σ_A e_A^i θ_{offset + A}`.
fn psi(frame: &[Vec<f64>], n: usize, generators: usize, offset: usize) -> Vec<GrassmannElement> {
    (0..n)
        .map(|i| {
            let mut e = GrassmannElement::zero(generators);
            for (a, v) in frame.iter().enumerate() {
                if v[i] != 0.0 {
                    e.add_scaled(&GrassmannElement::generator(generators, offset + a).expect("generator"), v[i]);
                }
            }
            e
        })
        .collect()
}

/// All products `a^j b^i` at `[j·n + i]`.
fn products(a: &[GrassmannElement], b: &[GrassmannElement]) -> Vec<GrassmannElement> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// `Σ_{j,i} m[j·n+i] · prod[j·n+i]`.
fn contract(prod: &[GrassmannElement], m: &[f64], generators: usize) -> GrassmannElement {
    let mut s = GrassmannElement::zero(generators);
    for (p, &c) in prod.iter().zip(m) {
        s.add_scaled(p, c);
    }
    s
}

/// `¼ R_{ijkl} ψ₊^i ψ₊^j ψ₋^k ψ₋^l`.
fn curvature_term(r: &[f64], pp: &[GrassmannElement], mm: &[GrassmannElement], n: usize, generators: usize) -> GrassmannElement {
    let mut s = GrassmannElement::zero(generators);
    for ij in 0..n * n {
        if pp[ij].max_abs() == 0.0 {
            continue;
        }
        let mut inner = GrassmannElement::zero(generators);
        for kl in 0..n * n {
            let c = r[ij * n * n + kl];
            if c != 0.0 {
                inner.add_scaled(&mm[kl], c);
            }
        }
        s = &s + &(&pp[ij] * &inner);
    }
    s.scale(0.25)
}

/// `½ ψ₋^i ψ₊^j H_{ijk}` with the last index lowered.
fn flux_vector(h: &[f64], mp: &[GrassmannElement], n: usize, generators: usize) -> Vec<GrassmannElement> {
    (0..n)
        .map(|k| {
            let mut e = GrassmannElement::zero(generators);
            for i in 0..n {
                for j in 0..n {
                    e.add_scaled(&mp[i * n + j], 0.5 * h[(i * n + j) * n + k]);
                }
            }
            e
        })
        .collect()
}

/// Model I part `¼R⁻ψ₊ψ₊ψ₋ψ₋ + ½ g(F + h, F + h)` with `h^k = ½H_{ij}{}^k ψ₋^iψ₊^j`.
fn model_one(
    poly: &mut AuxiliaryPolynomial,
    r_minus: &[f64],
    h: &[f64],
    g: &Matrix<f64>,
    ginv: &Matrix<f64>,
    pp: &[GrassmannElement],
    mm: &[GrassmannElement],
    mp: &[GrassmannElement],
) {
    let n = g.rows;
    let gens = poly.generators;
    poly.add_constant(&curvature_term(r_minus, pp, mm, n, gens));
    let hl = flux_vector(h, mp, n, gens);
    for i in 0..n {
        poly.add_linear((AuxGroup::F, i), &hl[i]);
        for j in 0..n {
            poly.add_term((AuxGroup::F, i), (AuxGroup::F, j), &GrassmannElement::scalar(gens, 0.5 * g.at(i, j)));
            poly.add_constant(&(&hl[i] * &hl[j]).scale(0.5 * ginv.at(i, j)));
        }
    }
}

/// The gauged-model action at one point, after restricting `ψ±` to the
/// zero modes `τ±`.
pub fn quotient_polynomial(f: &QuotientFrame) -> Result<AuxiliaryPolynomial> {
    let (n, m, k) = (f.n, f.m, f.v.len());
    check_quotient_frames(f)?;
    let gens = 2 * m;
    let pp_psi = psi(&f.frame_plus, n, gens, 0);
    let mm_psi = psi(&f.frame_minus, n, gens, m);
    let pp = products(&pp_psi, &pp_psi);
    let mm = products(&mm_psi, &mm_psi);
    let mp = products(&mm_psi, &pp_psi);
    let pm = products(&pp_psi, &mm_psi);
    let groups = [(AuxGroup::F, n), (AuxGroup::PhiPlusMinus, k), (AuxGroup::PhiPlusPlus, k), (AuxGroup::PhiMinusMinus, k)];
    let mut poly = AuxiliaryPolynomial::new(gens, &groups);
    model_one(&mut poly, &f.r_minus, &f.h, &f.g, &f.ginv, &pp, &mm, &mp);
    let sc = |c: f64| GrassmannElement::scalar(gens, c);
    for a in 0..k {
        // ∇_j V_{ai}, lowered
        let nv: Vec<f64> = (0..n * n)
            .map(|ji| {
                let (j, i) = (ji / n, ji % n);
                (0..n).map(|l| f.g.at(i, l) * f.nabla_v[a][j * n + l]).sum()
            })
            .collect();
        let nx = &f.nabla_xi[a];
        for i in 0..n {
            poly.add_term((AuxGroup::F, i), (AuxGroup::PhiPlusMinus, a), &sc(-f.xi[a][i]));
        }
        for b in 0..k {
            poly.add_term((AuxGroup::PhiPlusMinus, a), (AuxGroup::PhiPlusMinus, b), &sc(-0.5 * f.mats.g.at(a, b)));
            let xi_v: f64 = (0..n).map(|i| f.xi[a][i] * f.v[b][i]).sum();
            // ½ ξ_a(V_b) φ₋₋^a φ₊₊^b + ½ G_ab φ₊₊^a φ₋₋^b
            poly.add_term((AuxGroup::PhiPlusPlus, b), (AuxGroup::PhiMinusMinus, a), &sc(0.5 * xi_v));
            poly.add_term((AuxGroup::PhiPlusPlus, a), (AuxGroup::PhiMinusMinus, b), &sc(0.5 * f.mats.g.at(a, b)));
        }
        // ½(ψ₊^j ∇_jξ_{ai} ψ₋^i − ψ₋^j ∇_jξ_{ai} ψ₊^i) + ψ₊^i ψ₋^j ∇_jV_{ai}
        let nv_t: Vec<f64> = (0..n * n).map(|ij| nv[(ij % n) * n + ij / n]).collect();
        let mut lin = contract(&pm, nx, gens).scale(0.5);
        lin.add_scaled(&contract(&mp, nx, gens), -0.5);
        lin.add_scaled(&contract(&pm, &nv_t, gens), 1.0);
        poly.add_linear((AuxGroup::PhiPlusMinus, a), &lin);
        // ½(∇₋V⁻_a, ψ₋) and ½(∇₊V⁺_a, ψ₊)
        let vm: Vec<f64> = nv.iter().zip(nx).map(|(v, x)| v - x).collect();
        let vp: Vec<f64> = nv.iter().zip(nx).map(|(v, x)| v + x).collect();
        poly.add_linear((AuxGroup::PhiPlusPlus, a), &contract(&mm, &vm, gens).scale(0.5));
        poly.add_linear((AuxGroup::PhiMinusMinus, a), &contract(&pp, &vp, gens).scale(0.5));
    }
    Ok(poly)
}

fn check_quotient_frames(f: &QuotientFrame) -> Result<()> {
    let n = f.n;
    let mut worst: f64 = 0.0;
    for a in 0..f.v.len() {
        let gv = f.g.mat_vec(&f.v[a]);
        for (sign, frame) in [(1.0, &f.frame_plus), (-1.0, &f.frame_minus)] {
            for e in frame.iter() {
                let s: f64 = (0..n).map(|i| (gv[i] + sign * f.xi[a][i]) * e[i]).sum();
                worst = worst.max(s.abs());
            }
        }
    }
    if f.frame_plus.len() != f.m || f.frame_minus.len() != f.m || worst > FRAME_TOL {
        return Err(GeomError::FrameMismatch(format!("zero modes violate the τ± conditions by {worst:e}")));
    }
    Ok(())
}

/// Elimination order for the gauged model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    /// delta pair, then `F`, then `φ₊₋`
    FirstF,
    /// delta pair, then `φ₊₋`, then `F`
    FirstPhi,
}

/// Result of a localization chain.
#[derive(Debug, Clone)]
pub struct Localized {
    pub exponent: GrassmannElement,
    /// `φ₊₋^a` at the stationary point (gauged model only).
    pub phi_plus_minus: Vec<GrassmannElement>,
    /// `φ₋₋^a` fixed by the delta function (gauged model only).
    pub phi_minus_minus: Vec<GrassmannElement>,
}

pub fn localize_quotient(f: &QuotientFrame, order: Order) -> Result<Localized> {
    let poly = quotient_polynomial(f)?;
    let (poly, delta) = poly.eliminate_delta(AuxGroup::PhiPlusPlus, AuxGroup::PhiMinusMinus)?;
    let (exponent, phi) = match order {
        Order::FirstF => {
            let (p, _) = poly.eliminate(AuxGroup::F)?;
            let (p, s) = p.eliminate(AuxGroup::PhiPlusMinus)?;
            (p.constant, s.offset)
        }
        Order::FirstPhi => {
            let (p, s) = poly.eliminate(AuxGroup::PhiPlusMinus)?;
            let (p2, sf) = p.eliminate(AuxGroup::F)?;
            // φ = offset + slope·F at the stationary F
            let kf = sf.offset.len();
            let phi = (0..s.offset.len())
                .map(|a| {
                    let mut e = s.offset[a].clone();
                    for i in 0..kf {
                        e = &e + &(&s.slope[a * kf + i] * &sf.offset[i]);
                    }
                    e
                })
                .collect();
            (p2.constant, phi)
        }
    };
    Ok(Localized { exponent, phi_plus_minus: phi, phi_minus_minus: delta.offset })
}

/// `−½ T^{ab} [(∇₊V⁻_a, ψ₋) + (∇₋V⁺_a, ψ₊) − H_{ij}{}^k ψ₋^iψ₊^j ξ_{ak}]`.
pub fn phi_plus_minus_closed_form(f: &QuotientFrame) -> Vec<GrassmannElement> {
    let (n, m, k) = (f.n, f.m, f.v.len());
    let gens = 2 * m;
    let p = psi(&f.frame_plus, n, gens, 0);
    let q = psi(&f.frame_minus, n, gens, m);
    let pm = products(&p, &q);
    let mp = products(&q, &p);
    let bracket: Vec<GrassmannElement> = (0..k)
        .map(|a| {
            let vm: Vec<f64> = (0..n * n)
                .map(|ji| {
                    let (j, i) = (ji / n, ji % n);
                    (0..n).map(|l| f.g.at(i, l) * f.nabla_v[a][j * n + l]).sum::<f64>() - f.nabla_xi[a][ji]
                })
                .collect();
            let vp: Vec<f64> = (0..n * n)
                .map(|ji| {
                    let (j, i) = (ji / n, ji % n);
                    (0..n).map(|l| f.g.at(i, l) * f.nabla_v[a][j * n + l]).sum::<f64>() + f.nabla_xi[a][ji]
                })
                .collect();
            let xi_up = f.ginv.mat_vec(&f.xi[a]);
            let hx: Vec<f64> = (0..n * n).map(|ij| (0..n).map(|l| f.h[ij * n + l] * xi_up[l]).sum()).collect();
            let mut e = contract(&pm, &vm, gens);
            e.add_scaled(&contract(&mp, &vp, gens), 1.0);
            e.add_scaled(&contract(&mp, &hx, gens), -1.0);
            e
        })
        .collect();
    (0..k)
        .map(|a| {
            let mut e = GrassmannElement::zero(gens);
            for b in 0..k {
                e.add_scaled(&bracket[b], -0.5 * f.tinv.at(a, b));
            }
            e
        })
        .collect()
}

/// `−K^{ab}(∇₋V⁻_b, ψ₋)`.
pub fn phi_minus_minus_closed_form(f: &QuotientFrame) -> Vec<GrassmannElement> {
    let (n, m, k) = (f.n, f.m, f.v.len());
    let gens = 2 * m;
    let q = psi(&f.frame_minus, n, gens, m);
    let mm = products(&q, &q);
    let terms: Vec<GrassmannElement> = (0..k)
        .map(|b| {
            let vm: Vec<f64> = (0..n * n)
                .map(|ji| {
                    let (j, i) = (ji / n, ji % n);
                    (0..n).map(|l| f.g.at(i, l) * f.nabla_v[b][j * n + l]).sum::<f64>() - f.nabla_xi[b][ji]
                })
                .collect();
            contract(&mm, &vm, gens)
        })
        .collect();
    (0..k)
        .map(|a| {
            let mut e = GrassmannElement::zero(gens);
            for b in 0..k {
                e.add_scaled(&terms[b], -f.kinv.at(a, b));
            }
            e
        })
        .collect()
}

/// The section-model action at a point of `N` after the multiplier and
/// `χ±` integrations, with the Wick-rotated `U = √−1·U'` so that all
/// coefficients are real.
pub fn submanifold_polynomial(f: &SubmanifoldFrame) -> Result<AuxiliaryPolynomial> {
    let (n, m, r) = (f.n, f.m, f.r);
    let defect = f.tangency_defect(&f.frame_ambient);
    if f.frame_ambient.len() != m || defect > FRAME_TOL {
        return Err(GeomError::FrameMismatch(format!("zero modes leave TN by {defect:e}")));
    }
    let gens = 2 * m;
    let p = psi(&f.frame_ambient, n, gens, 0);
    let q = psi(&f.frame_ambient, n, gens, m);
    let pp = products(&p, &p);
    let mm = products(&q, &q);
    let mp = products(&q, &p);
    let mut poly = AuxiliaryPolynomial::new(gens, &[(AuxGroup::F, n), (AuxGroup::U, r)]);
    model_one(&mut poly, &f.r_minus, &f.h, &f.g, &f.ginv, &pp, &mm, &mp);
    for a in 0..r {
        for l in 0..n {
            poly.add_term((AuxGroup::F, l), (AuxGroup::U, a), &GrassmannElement::scalar(gens, -f.dsigma[a * n + l]));
        }
        // −U'_α (∂_i∂_jσ^α − Γ^l_{ij}∂_lσ^α) ψ₋^iψ₊^j
        let c: Vec<f64> = (0..n * n)
            .map(|ij| {
                let mut v = f.ddsigma[a * n * n + ij];
                for l in 0..n {
                    v -= f.gamma[l * n * n + ij] * f.dsigma[a * n + l];
                }
                -v
            })
            .collect();
        poly.add_linear((AuxGroup::U, a), &contract(&mp, &c, gens));
    }
    Ok(poly)
}

/// Transverse `F`, then `U'`.
pub fn localize_submanifold(f: &SubmanifoldFrame) -> Result<Localized> {
    let (p, _) = submanifold_polynomial(f)?.eliminate(AuxGroup::F)?;
    let (p, _) = p.eliminate(AuxGroup::U)?;
    Ok(Localized { exponent: p.constant, phi_plus_minus: Vec::new(), phi_minus_minus: Vec::new() })
}

/// A point frame for either model.
#[derive(Debug, Clone, Copy)]
pub enum PointFrame<'a> {
    Quotient(&'a QuotientFrame),
    Submanifold(&'a SubmanifoldFrame),
}

pub fn localize_model(frame: PointFrame<'_>) -> Result<GrassmannElement> {
    match frame {
        PointFrame::Quotient(f) => Ok(localize_quotient(f, Order::FirstF)?.exponent),
        PointFrame::Submanifold(f) => Ok(localize_submanifold(f)?.exponent),
    }
}

/// `Σ_{A<B, C<D} R(e_A, e_B, e_C, e_D) θ_A θ_B θ_{m+C} θ_{m+D}` from a frame
/// array `r[((A·m+B)·m+C)·m+D]`.
pub fn curvature_exponent(r: &[f64], m: usize) -> GrassmannElement {
    let gens = 2 * m;
    let mut e = GrassmannElement::zero(gens);
    for a in 0..m {
        for b in a + 1..m {
            for c in 0..m {
                for d in c + 1..m {
                    let v = r[flat(&[a, b, c, d], m)];
                    if v != 0.0 {
                        e = &e + &GrassmannElement::monomial(gens, v, &[a, b, m + c, m + d]).expect("generators");
                    }
                }
            }
        }
    }
    e
}

/// Largest coefficient of `a − b`.
pub fn exponent_residual(a: &GrassmannElement, b: &GrassmannElement) -> f64 {
    (a - b).max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quotient::QuotientFrame;
    use crate::scenarios::hopf::{Hopf, HopfParams};
    use crate::scenarios::sphere_in_flat::{FlatSection, SectionShape};
    use crate::submanifold::SubmanifoldFrame;

    fn sc(c: f64) -> GrassmannElement {
        GrassmannElement::scalar(2, c)
    }

    #[test]
    fn completing_the_square() {
        let mut p = AuxiliaryPolynomial::new(2, &[(AuxGroup::F, 1)]);
        p.add_term((AuxGroup::F, 0), (AuxGroup::F, 0), &sc(1.5));
        p.add_linear((AuxGroup::F, 0), &sc(0.7));
        let (r, s) = p.eliminate(AuxGroup::F).unwrap();
        assert!((r.constant().body() + 0.49 / 6.0).abs() < 1e-15);
        assert!((s.offset[0].body() + 0.7 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn nilpotent_coefficients() {
        // ½(a + θ0θ1) z² + θ0θ1 z with stationary z = −θ0θ1/a
        let n = 2;
        let t = GrassmannElement::monomial(n, 1.0, &[0, 1]).unwrap();
        let mut p = AuxiliaryPolynomial::new(n, &[(AuxGroup::F, 1)]);
        p.add_term((AuxGroup::F, 0), (AuxGroup::F, 0), &(&sc(1.0) + &t).scale(0.5));
        p.add_linear((AuxGroup::F, 0), &t);
        let (r, s) = p.eliminate(AuxGroup::F).unwrap();
        assert!(r.constant().max_abs() < 1e-15);
        assert!((&s.offset[0] + &t).max_abs() < 1e-15);
        let mut q = AuxiliaryPolynomial::new(n, &[(AuxGroup::F, 1)]);
        q.add_term((AuxGroup::F, 0), (AuxGroup::F, 0), &t);
        assert!(matches!(q.eliminate(AuxGroup::F), Err(GeomError::SingularBody)));
    }

    #[test]
    fn stationary_point_is_stationary() {
        let h = Hopf::new(HopfParams::with_lambda(1.0, 0.8));
        let f = QuotientFrame::new(&h, &[0.7, 0.3]).unwrap();
        let p = quotient_polynomial(&f).unwrap();
        let (p, _) = p.eliminate_delta(AuxGroup::PhiPlusPlus, AuxGroup::PhiMinusMinus).unwrap();
        let (r, s) = p.eliminate(AuxGroup::F).unwrap();
        // S(y(w), w) equals the reduced polynomial at a few Grassmann-valued w
        let gens = 4;
        let w = vec![GrassmannElement::monomial(gens, 0.3, &[0, 2]).unwrap()];
        let kf = s.offset.len();
        let mut z: Vec<GrassmannElement> = (0..kf).map(|i| &s.offset[i] + &(&s.slope[i] * &w[0])).collect();
        z.push(w[0].clone());
        assert!((&p.evaluate(&z) - &r.evaluate(&w)).max_abs() < 1e-12);
    }

    #[test]
    fn flux_free_f_decouples() {
        let sd = FlatSection::new(SectionShape::Sphere { radius: 1.0 }, 0.0);
        let f = SubmanifoldFrame::new(&sd, &[0.9, 0.4]).unwrap();
        let p = submanifold_polynomial(&f).unwrap();
        let c0 = p.constant().clone();
        // with U' held at zero the F integral leaves the constant alone
        let mut only_f = AuxiliaryPolynomial::new(4, &[(AuxGroup::F, 3)]);
        for i in 0..3 {
            for j in 0..3 {
                only_f.add_term((AuxGroup::F, i), (AuxGroup::F, j), &GrassmannElement::scalar(4, 0.5 * f.g.at(i, j)));
            }
        }
        only_f.add_constant(&c0);
        let (r, _) = only_f.eliminate(AuxGroup::F).unwrap();
        assert!((r.constant() - &c0).max_abs() < 1e-14);
    }

    #[test]
    fn f_elimination_matches_hand_expansion() {
        let h = Hopf::new(HopfParams::with_torus(1.0, 0.9, 0.6, 0.4));
        let f = QuotientFrame::new(&h, &[0.8, 0.2, 0.1, -0.3]).unwrap();
        let (n, m, k) = (f.n, f.m, f.v.len());
        let p = quotient_polynomial(&f).unwrap();
        let (r, _) = p.eliminate(AuxGroup::F).unwrap();
        let q = r.quadratic(AuxGroup::PhiPlusMinus, AuxGroup::PhiPlusMinus);
        for a in 0..k {
            for b in 0..k {
                let want = -f.mats.g.at(a, b) - crate::linalg::inner(&f.ginv, &f.xi[a], &f.xi[b]);
                assert!((q[a * k + b].body() - want).abs() < 1e-12);
            }
        }
        // linear shift ½ H_{jk}{}^i ξ_{ai} ψ₋^j ψ₊^k
        let gens = 2 * m;
        let pl = psi(&f.frame_plus, n, gens, 0);
        let mi = psi(&f.frame_minus, n, gens, m);
        let mp = products(&mi, &pl);
        let before = p.linear(AuxGroup::PhiPlusMinus);
        let after = r.linear(AuxGroup::PhiPlusMinus);
        for a in 0..k {
            let xi_up = f.ginv.mat_vec(&f.xi[a]);
            let hx: Vec<f64> = (0..n * n).map(|jk| 0.5 * (0..n).map(|i| f.h[jk * n + i] * xi_up[i]).sum::<f64>()).collect();
            let want = &before[a] + &contract(&mp, &hx, gens);
            assert!((&after[a] - &want).max_abs() < 1e-12);
        }
    }

    fn hopf_cases() -> Vec<(Hopf, Vec<f64>)> {
        vec![
            (Hopf::new(HopfParams::with_lambda(1.0, 0.0)), vec![0.6, 0.4]),
            (Hopf::new(HopfParams::with_lambda(1.0, 1.3)), vec![0.9, -0.2]),
            (Hopf::new(HopfParams::with_torus(1.0, 1.1, 0.5, 0.7)), vec![0.5, 0.3, -0.2, 0.4]),
        ]
    }

    #[test]
    fn quotient_chain_reproduces_reduced_curvature() {
        for (h, u) in hopf_cases() {
            let f = QuotientFrame::new(&h, &u).unwrap();
            let want = curvature_exponent(&f.curvature_formula_frame(), f.m);
            for order in [Order::FirstF, Order::FirstPhi] {
                let got = localize_quotient(&f, order).unwrap();
                assert!(exponent_residual(&got.exponent, &want) < 1e-9, "{order:?}: {} vs {}", got.exponent, want);
                assert!(got.exponent.degree_part(2).max_abs() < 1e-12);
                assert!(got.exponent.body().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn auxiliary_solutions_match_closed_forms() {
        for (h, u) in hopf_cases() {
            let f = QuotientFrame::new(&h, &u).unwrap();
            let loc = localize_quotient(&f, Order::FirstF).unwrap();
            for (a, b) in loc.phi_plus_minus.iter().zip(phi_plus_minus_closed_form(&f)) {
                assert!((a - &b).max_abs() < 1e-10, "{a} vs {b}");
            }
            for (a, b) in loc.phi_minus_minus.iter().zip(phi_minus_minus_closed_form(&f)) {
                assert!((a - &b).max_abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn section_chain_reproduces_reduced_curvature() {
        for c in [0.0, 0.5, 2.0] {
            for warp in [0.0, 0.6] {
                let sd = FlatSection::new(SectionShape::Sphere { radius: 1.0 }, c).with_warp(warp);
                let f = SubmanifoldFrame::new(&sd, &[1.1, -0.7]).unwrap();
                let got = localize_submanifold(&f).unwrap();
                let want = curvature_exponent(&f.curvature_formula_frame(), f.m);
                assert!(exponent_residual(&got.exponent, &want) < 1e-9, "{} vs {}", got.exponent, want);
            }
        }
    }

    #[test]
    fn mismatched_frames_are_rejected() {
        let h = Hopf::new(HopfParams::with_lambda(1.0, 1.3));
        let mut f = QuotientFrame::new(&h, &[0.9, -0.2]).unwrap();
        f.frame_minus = f.frame_plus.clone();
        assert!(matches!(quotient_polynomial(&f), Err(GeomError::FrameMismatch(_))));
        let sd = FlatSection::new(SectionShape::Sphere { radius: 1.0 }, 0.5);
        let mut g = SubmanifoldFrame::new(&sd, &[0.9, 0.4]).unwrap();
        g.frame_ambient[0] = g.x.clone();
        assert!(matches!(submanifold_polynomial(&g), Err(GeomError::FrameMismatch(_))));
    }
}
