//! `S³ × S¹` as `R⁴ ∖ 0` with `g = δ/|x|²` and `H = −2 vol(S³)`. The complex
//! structures are left and right multiplication by the quaternion `i`.

use crate::chart::Chart;
use crate::dual::Real;
use crate::generalized::Background;
use crate::gk::BiHermitian;

/// Left multiplication by `i` on `x₁ + x₂i + x₃j + x₄k`.
const LEFT_I: [f64; 16] = [
    0.0, -1.0, 0.0, 0.0, //
    1.0, 0.0, 0.0, 0.0, //
    0.0, 0.0, 0.0, -1.0, //
    0.0, 0.0, 1.0, 0.0,
];

/// Right multiplication by `i`.
const RIGHT_I: [f64; 16] = [
    0.0, -1.0, 0.0, 0.0, //
    1.0, 0.0, 0.0, 0.0, //
    0.0, 0.0, 0.0, 1.0, //
    0.0, 0.0, -1.0, 0.0,
];

#[derive(Debug, Clone)]
pub struct HopfSurface {
    /// Orientation of `H`; `−1` makes `J₊ = L_i`, `J₋ = R_i` Bismut-parallel.
    pub flux_sign: f64,
    /// Adds `perturb · E₁₂` to `J₊` (a constructed violation).
    pub perturb: f64,
    chart: Chart,
}

impl HopfSurface {
    pub fn new() -> Self {
        HopfSurface {
            flux_sign: -1.0,
            perturb: 0.0,
            chart: Chart::new("R4-0", vec![0.3, -2.0, -2.0, -2.0], vec![2.0; 4]).expect("static chart"),
        }
    }

    pub fn perturbed(perturb: f64) -> Self {
        HopfSurface { perturb, ..Self::new() }
    }
}

impl Default for HopfSurface {
    fn default() -> Self {
        Self::new()
    }
}

fn r2<S: Real>(x: &[S]) -> S {
    x.iter().fold(S::zero(), |s, v| s + *v * *v)
}

impl Background for HopfSurface {
    fn chart(&self) -> &Chart {
        &self.chart
    }

    fn metric<S: Real>(&self, x: &[S]) -> Vec<S> {
        let c = S::one() / r2(x);
        crate::calculus::diagonal(&[c, c, c, c])
    }

    fn flux<S: Real>(&self, x: &[S]) -> Vec<S> {
        // H_{ijk} = 2 ε_{ijkl} x^l / |x|⁴
        let c = S::one() / r2(x).powi(2) * (2.0 * self.flux_sign);
        let mut h = vec![S::zero(); 64];
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        let e = crate::calculus::perm_sign(&[i, j, k, l]);
                        let distinct = i != j && i != k && i != l && j != k && j != l && k != l;
                        if distinct {
                            h[(i * 4 + j) * 4 + k] += c * x[l] * e;
                        }
                    }
                }
            }
        }
        h
    }
}

impl BiHermitian for HopfSurface {
    fn j_plus<S: Real>(&self, _x: &[S]) -> Vec<S> {
        let mut j: Vec<S> = LEFT_I.iter().map(|&v| S::cst(v)).collect();
        j[1] += S::cst(self.perturb);
        j
    }

    fn j_minus<S: Real>(&self, _x: &[S]) -> Vec<S> {
        RIGHT_I.iter().map(|&v| S::cst(v)).collect()
    }
}
