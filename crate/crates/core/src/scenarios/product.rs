//! `Q × G` with `Q = S²(R)` and `G = T²` acting on the second factor,
//! `ξ = 0`, `H = 0`. `J₊` is the standard structure on both factors and
//! `J₋` its conjugate on `S²`.

use std::f64::consts::PI;

use crate::chart::Chart;
use crate::dual::Real;
use crate::generalized::Background;
use crate::gk::BiHermitian;
use crate::quotient::{ExtendedAction, QuotientMap};

#[derive(Debug, Clone)]
pub struct SphereTorus {
    pub radius: f64,
    chart: Chart,
    quotient: Chart,
}

impl SphereTorus {
    pub fn new(radius: f64) -> Self {
        SphereTorus {
            radius,
            chart: Chart::new("S2xT2", vec![0.05, -3.0, -PI, -PI], vec![PI - 0.05, 3.0, PI, PI]).expect("static chart"),
            quotient: Chart::new("S2", vec![0.05, -3.0], vec![PI - 0.05, 3.0]).expect("static chart"),
        }
    }

    /// `J` on `S²` in `(θ, φ)`: `J∂_θ = ∂_φ / sin θ`.
    pub fn sphere_j<S: Real>(&self, theta: S) -> [S; 4] {
        let s = theta.sin();
        [S::zero(), -s, S::one() / s, S::zero()]
    }

    fn j<S: Real>(&self, x: &[S], sphere_sign: f64) -> Vec<S> {
        let js = self.sphere_j(x[0]);
        let z = S::zero();
        let o = S::one();
        vec![
            js[0] * sphere_sign, js[1] * sphere_sign, z, z, //
            js[2] * sphere_sign, js[3] * sphere_sign, z, z, //
            z, z, z, -o, //
            z, z, o, z,
        ]
    }
}

impl Background for SphereTorus {
    fn chart(&self) -> &Chart {
        &self.chart
    }

    fn metric<S: Real>(&self, x: &[S]) -> Vec<S> {
        let r2 = self.radius * self.radius;
        let s = x[0].sin();
        crate::calculus::diagonal(&[S::cst(r2), s * s * r2, S::one(), S::one()])
    }

    fn flux<S: Real>(&self, _x: &[S]) -> Vec<S> {
        vec![S::zero(); 64]
    }
}

impl ExtendedAction for SphereTorus {
    fn generators(&self) -> usize {
        2
    }

    fn vectors<S: Real>(&self, _x: &[S]) -> Vec<S> {
        let (z, o) = (S::zero(), S::one());
        vec![z, z, o, z, z, z, z, o]
    }

    fn forms<S: Real>(&self, _x: &[S]) -> Vec<S> {
        vec![S::zero(); 8]
    }
}

impl QuotientMap for SphereTorus {
    fn quotient_chart(&self) -> &Chart {
        &self.quotient
    }

    fn project<S: Real>(&self, x: &[S]) -> Vec<S> {
        vec![x[0], x[1]]
    }

    fn lift<S: Real>(&self, u: &[S]) -> Vec<S> {
        vec![u[0], u[1], S::zero(), S::zero()]
    }
}

impl BiHermitian for SphereTorus {
    fn j_plus<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.j(x, 1.0)
    }

    fn j_minus<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.j(x, -1.0)
    }
}
