//! Closed manifolds for the Euler-characteristic quadrature. Each comes
//! with a coordinate box that covers it up to a null set.

use std::f64::consts::PI;

use crate::calculus::{diagonal, form_from_entries};
use crate::chart::Chart;
use crate::dual::Real;
use crate::generalized::Background;

/// A background whose chart box covers a closed manifold up to measure
/// zero.
pub trait ClosedManifold: Background {
    /// Euler characteristic, for reporting.
    fn euler(&self) -> i64;
}

#[derive(Debug, Clone)]
pub struct RoundSphere {
    pub radius: f64,
    chart: Chart,
}

impl RoundSphere {
    pub fn new(radius: f64) -> Self {
        let chart = Chart::new("theta-phi", vec![0.0, -PI], vec![PI, PI]).expect("static chart");
        RoundSphere { radius, chart }
    }
}

impl Background for RoundSphere {
    fn chart(&self) -> &Chart {
        &self.chart
    }
    fn metric<S: Real>(&self, x: &[S]) -> Vec<S> {
        let r2 = self.radius * self.radius;
        let s = x[0].sin();
        diagonal(&[S::cst(r2), s * s * r2])
    }
    fn flux<S: Real>(&self, _x: &[S]) -> Vec<S> {
        vec![S::zero(); 8]
    }
}

impl ClosedManifold for RoundSphere {
    fn euler(&self) -> i64 {
        2
    }
}

/// Flat `T^n = R^n / 2πZ^n`.
#[derive(Debug, Clone)]
pub struct FlatTorus {
    chart: Chart,
}

impl FlatTorus {
    pub fn new(dim: usize) -> Self {
        FlatTorus { chart: Chart::new(format!("T{dim}"), vec![-PI; dim], vec![PI; dim]).expect("static chart") }
    }
}

impl Background for FlatTorus {
    fn chart(&self) -> &Chart {
        &self.chart
    }
    fn metric<S: Real>(&self, _x: &[S]) -> Vec<S> {
        diagonal(&vec![S::one(); self.chart.dim()])
    }
    fn flux<S: Real>(&self, _x: &[S]) -> Vec<S> {
        vec![S::zero(); self.chart.dim().pow(3)]
    }
}

impl ClosedManifold for FlatTorus {
    fn euler(&self) -> i64 {
        0
    }
}

/// `S²(r₁) × S²(r₂)` in `(θ₁, φ₁, θ₂, φ₂)`. A nonzero `flux` adds the
/// exact `H = d(c cos θ₂ · vol₁)`.
#[derive(Debug, Clone)]
pub struct SphereProduct {
    pub radii: (f64, f64),
    pub flux: f64,
    chart: Chart,
}

impl SphereProduct {
    pub fn new(r1: f64, r2: f64, flux: f64) -> Self {
        let chart = Chart::new("S2xS2", vec![0.0, -PI, 0.0, -PI], vec![PI, PI, PI, PI]).expect("static chart");
        SphereProduct { radii: (r1, r2), flux, chart }
    }
}

impl Background for SphereProduct {
    fn chart(&self) -> &Chart {
        &self.chart
    }
    fn metric<S: Real>(&self, x: &[S]) -> Vec<S> {
        let (a, b) = (self.radii.0 * self.radii.0, self.radii.1 * self.radii.1);
        let (s1, s2) = (x[0].sin(), x[2].sin());
        diagonal(&[S::cst(a), s1 * s1 * a, S::cst(b), s2 * s2 * b])
    }
    fn flux<S: Real>(&self, x: &[S]) -> Vec<S> {
        // d(c cos θ₂ sin θ₁ dθ₁∧dφ₁) = −c sin θ₂ sin θ₁ dθ₂∧dθ₁∧dφ₁
        let v = x[2].sin() * x[0].sin() * self.flux;
        form_from_entries(4, 3, &[(&[0, 1, 2], -v)])
    }
}

impl ClosedManifold for SphereProduct {
    fn euler(&self) -> i64 {
        4
    }
}
