//! Level sets in `R³` with `H = c·dx∧dy∧dz`. A nonzero `warp` replaces
//! the flat metric by `e^{2w}δ` and scales `H` accordingly, which gives a
//! curved ambient with a nonconstant flux.

use std::f64::consts::PI;

use crate::calculus::form_from_entries;
use crate::chart::Chart;
use crate::dual::Real;
use crate::generalized::Background;
use crate::submanifold::Submanifold;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SectionShape {
    /// `σ = |x|² − R²`, parametrized by `(θ, φ)`.
    Sphere { radius: f64 },
    /// `σ = x`, parametrized by `(y, z)`.
    Plane,
    /// `σ = (x, y)`, parametrized by `z`.
    Line,
}

#[derive(Debug, Clone)]
pub struct FlatSection {
    pub shape: SectionShape,
    pub flux: f64,
    pub warp: f64,
    chart: Chart,
    nchart: Chart,
}

impl FlatSection {
    pub fn new(shape: SectionShape, flux: f64) -> Self {
        let chart = Chart::new("R3", vec![-2.5; 3], vec![2.5; 3]).expect("static chart");
        let nchart = match shape {
            SectionShape::Sphere { .. } => {
                Chart::new("theta-phi", vec![0.1, -3.0], vec![PI - 0.1, 3.0]).expect("static chart")
            }
            SectionShape::Plane => {
                Chart::new("y-z", vec![-1.5; 2], vec![1.5; 2]).expect("static chart")
            }
            SectionShape::Line => Chart::new("z", vec![-1.5], vec![1.5]).expect("static chart"),
        };
        FlatSection {
            shape,
            flux,
            warp: 0.0,
            chart,
            nchart,
        }
    }

    pub fn with_warp(mut self, warp: f64) -> Self {
        self.warp = warp;
        self
    }

    fn w<S: Real>(&self, x: &[S]) -> S {
        (x[0] * 0.3 + x[1] * x[1] * 0.2 - x[2] * 0.1) * self.warp
    }
}

impl Background for FlatSection {
    fn chart(&self) -> &Chart {
        &self.chart
    }

    fn metric<S: Real>(&self, x: &[S]) -> Vec<S> {
        let e = (self.w(x) * 2.0).exp();
        let z = S::zero();
        vec![e, z, z, z, e, z, z, z, e]
    }

    fn flux<S: Real>(&self, x: &[S]) -> Vec<S> {
        let c = (self.w(x) * 3.0).exp() * (S::one() + x[0] * x[1] * self.warp) * self.flux;
        form_from_entries(3, 3, &[(&[0, 1, 2], c)])
    }
}

impl Submanifold for FlatSection {
    fn sections(&self) -> usize {
        match self.shape {
            SectionShape::Line => 2,
            _ => 1,
        }
    }

    fn section<S: Real>(&self, x: &[S]) -> Vec<S> {
        match self.shape {
            SectionShape::Sphere { radius } => {
                vec![x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - radius * radius]
            }
            SectionShape::Plane => vec![x[0]],
            SectionShape::Line => vec![x[0], x[1]],
        }
    }

    fn nchart(&self) -> &Chart {
        &self.nchart
    }

    fn embed<S: Real>(&self, u: &[S]) -> Vec<S> {
        match self.shape {
            SectionShape::Sphere { radius } => {
                let (st, ct) = (u[0].sin(), u[0].cos());
                vec![
                    st * u[1].cos() * radius,
                    st * u[1].sin() * radius,
                    ct * radius,
                ]
            }
            SectionShape::Plane => vec![S::zero(), u[0], u[1]],
            SectionShape::Line => vec![S::zero(), S::zero(), u[0]],
        }
    }
}
