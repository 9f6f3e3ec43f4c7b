//! Kähler reduction `S³ ⊂ C² → CP¹`: flat `C²`, the diagonal `U(1)`
//! action, the section `σ = |z|² − 1` and the affine coordinate
//! `w = z₂/z₁` on the quotient.

use crate::chart::Chart;
use crate::dual::Real;
use crate::generalized::Background;
use crate::gk::BiHermitian;
use crate::quotient::{ExtendedAction, QuotientMap};

/// `J` on `(x₁, y₁, x₂, y₂)` with `J ∂_x = ∂_y`.
const STANDARD_J: [f64; 16] = [
    0.0, -1.0, 0.0, 0.0, //
    1.0, 0.0, 0.0, 0.0, //
    0.0, 0.0, 0.0, -1.0, //
    0.0, 0.0, 1.0, 0.0,
];

#[derive(Debug, Clone)]
pub struct KahlerHopf {
    /// Adds `skew · x₁ (∂_{x₂} ⊗ dx₁)` to `J₊`, which breaks `J₊τ₊ = τ₊`.
    pub skew: f64,
    chart: Chart,
    quotient: Chart,
}

impl KahlerHopf {
    pub fn new() -> Self {
        KahlerHopf {
            skew: 0.0,
            chart: Chart::new("C2", vec![0.2, -1.5, -1.5, -1.5], vec![1.5; 4]).expect("static chart"),
            quotient: Chart::new("CP1", vec![-2.0; 2], vec![2.0; 2]).expect("static chart"),
        }
    }

    pub fn skewed(skew: f64) -> Self {
        KahlerHopf { skew, ..Self::new() }
    }
}

impl Default for KahlerHopf {
    fn default() -> Self {
        Self::new()
    }
}

impl Background for KahlerHopf {
    fn chart(&self) -> &Chart {
        &self.chart
    }

    fn metric<S: Real>(&self, _x: &[S]) -> Vec<S> {
        crate::calculus::diagonal(&[S::one(); 4])
    }

    fn flux<S: Real>(&self, _x: &[S]) -> Vec<S> {
        vec![S::zero(); 64]
    }
}

impl ExtendedAction for KahlerHopf {
    fn generators(&self) -> usize {
        1
    }

    fn vectors<S: Real>(&self, x: &[S]) -> Vec<S> {
        vec![-x[1], x[0], -x[3], x[2]]
    }

    fn forms<S: Real>(&self, _x: &[S]) -> Vec<S> {
        vec![S::zero(); 4]
    }
}

impl QuotientMap for KahlerHopf {
    fn quotient_chart(&self) -> &Chart {
        &self.quotient
    }

    fn project<S: Real>(&self, x: &[S]) -> Vec<S> {
        // z₂ / z₁
        let d = x[0] * x[0] + x[1] * x[1];
        vec![(x[2] * x[0] + x[3] * x[1]) / d, (x[3] * x[0] - x[2] * x[1]) / d]
    }

    fn lift<S: Real>(&self, u: &[S]) -> Vec<S> {
        let s = S::one() / (S::one() + u[0] * u[0] + u[1] * u[1]).sqrt();
        vec![s, S::zero(), u[0] * s, u[1] * s]
    }

    fn sections(&self) -> usize {
        1
    }

    fn section<S: Real>(&self, x: &[S]) -> Vec<S> {
        vec![x.iter().fold(S::cst(-1.0), |a, v| a + *v * *v)]
    }
}

impl BiHermitian for KahlerHopf {
    fn j_plus<S: Real>(&self, x: &[S]) -> Vec<S> {
        let mut j: Vec<S> = STANDARD_J.iter().map(|&v| S::cst(v)).collect();
        j[2 * 4] += x[0] * self.skew;
        j
    }

    fn j_minus<S: Real>(&self, _x: &[S]) -> Vec<S> {
        STANDARD_J.iter().map(|&v| S::cst(v)).collect()
    }
}
