//! Chern–Gauss–Bonnet quadrature of the Pfaffian of `R⁻`.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::calculus::{metric_matrix, perm_sign};
use crate::error::{GeomError, Result};
use crate::generalized::{bismut_curvature, Background, Sign};
use crate::quotient::{orthonormal_columns, to_frame};

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Euler density of a frame curvature array `r` (slots: 2-form pair, then
/// endomorphism pair), normalized so that a unit round `S²` gives `1/(2π)`.
pub fn euler_density(r: &[f64], dim: usize) -> Result<f64> {
    if dim % 2 == 1 {
        return Err(GeomError::OddDimension(dim));
    }
    let m = dim / 2;
    let perms = permutations(dim);
    let signs: Vec<f64> = perms.iter().map(|p| perm_sign(p)).collect();
    let at = |a: usize, b: usize, c: usize, d: usize| r[((a * dim + b) * dim + c) * dim + d];
    let mut sum = 0.0;
    for (s, ss) in perms.iter().zip(&signs) {
        for (t, ts) in perms.iter().zip(&signs) {
            let mut prod = ss * ts;
            for k in 0..m {
                prod *= at(t[2 * k], t[2 * k + 1], s[2 * k], s[2 * k + 1]);
            }
            sum += prod;
        }
    }
    let fact: f64 = (1..=m).map(|i| i as f64).product();
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * sum / (4f64.powi(m as i32) * fact * (2.0 * std::f64::consts::PI).powi(m as i32)))
}

/// `Pf(R⁻)·√g` at a point, in coordinates.
pub fn euler_integrand<B: Background + ?Sized>(bg: &B, x: &[f64]) -> Result<f64> {
    let n = x.len();
    let g = metric_matrix(&bg.metric(x), n);
    let r = bismut_curvature(Sign::Minus, bg, x)?;
    let e = orthonormal_columns(&g)?;
    let vol = g.det().abs().sqrt();
    Ok(euler_density(&to_frame(&r, &e), n)? * vol)
}

/// Tensor-product Gauss–Legendre quadrature of the Euler density over the
/// chart box, with `order` nodes per direction.
pub fn euler_characteristic<B: Background + ?Sized>(bg: &B, order: usize) -> Result<f64> {
    let n = bg.dim();
    if n % 2 == 1 {
        return Err(GeomError::OddDimension(n));
    }
    let order = NonZeroUsize::new(order).ok_or_else(|| GeomError::Degree("quadrature order 0".into()))?;
    let rule = GaussLegendre::new(order);
    let pairs = rule.as_node_weight_pairs();
    let (lo, hi) = (bg.chart().lower(), bg.chart().upper());
    let k = pairs.len();
    let total = k.pow(n as u32);
    let point = |idx: usize| -> (Vec<f64>, f64) {
        let mut rest = idx;
        let mut x = vec![0.0; n];
        let mut w = 1.0;
        for d in 0..n {
            let (node, weight) = pairs[rest % k];
            rest /= k;
            let half = 0.5 * (hi[d] - lo[d]);
            x[d] = lo[d] + half * (node + 1.0);
            w *= weight * half;
        }
        (x, w)
    };
    let eval = |idx: usize| -> Result<f64> {
        let (x, w) = point(idx);
        Ok(w * euler_integrand(bg, &x)?)
    };
    #[cfg(feature = "parallel")]
    let values: Vec<Result<f64>> = {
        use rayon::prelude::*;
        (0..total).into_par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<Result<f64>> = (0..total).map(eval).collect();
    // fixed summation order
    let mut sum = 0.0;
    for v in values {
        sum += v?;
    }
    Ok(sum)
}
