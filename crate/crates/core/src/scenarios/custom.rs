//! Flat `R^n` with the constant flux `H = c·dx⁰∧dx¹∧dx²`.

use crate::calculus::{diagonal, form_from_entries};
use crate::chart::Chart;
use crate::dual::Real;
use crate::error::{GeomError, Result};
use crate::generalized::Background;

#[derive(Debug, Clone)]
pub struct ConstantFlux {
    pub flux: f64,
    chart: Chart,
}

impl ConstantFlux {
    pub fn new(dim: usize, flux: f64) -> Result<Self> {
        if dim < 3 && flux != 0.0 {
            return Err(GeomError::InvalidChart(format!("a 3-form needs dimension >= 3, got {dim}")));
        }
        Ok(ConstantFlux { flux, chart: Chart::new(format!("R{dim}"), vec![-2.0; dim], vec![2.0; dim])? })
    }
}

impl Background for ConstantFlux {
    fn chart(&self) -> &Chart {
        &self.chart
    }

    fn metric<S: Real>(&self, _x: &[S]) -> Vec<S> {
        diagonal(&vec![S::one(); self.chart.dim()])
    }

    fn flux<S: Real>(&self, _x: &[S]) -> Vec<S> {
        let n = self.chart.dim();
        if n < 3 {
            return vec![S::zero(); n.pow(3)];
        }
        form_from_entries(n, 3, &[(&[0, 1, 2], S::cst(self.flux))])
    }
}
