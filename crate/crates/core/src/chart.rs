//! Coordinate charts, tensor-valued chart fields and their exact jets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::{Dual, Real};
use crate::error::{GeomError, Result};

/// Relative margin kept between sample points and the chart boundary.
pub const DOMAIN_MARGIN: f64 = 1e-3;

/// An axis-aligned coordinate box.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    name: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Chart {
    pub fn new(name: impl Into<String>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(GeomError::InvalidChart(format!(
                "{name}: bounds must have equal positive length"
            )));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(GeomError::InvalidChart(format!(
                "{name}: every lower bound must be below its upper bound"
            )));
        }
        Ok(Chart { name, lower, upper })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Strict interior membership.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| l < x && x < u)
    }

    pub fn check(&self, p: &[f64]) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(GeomError::Domain {
                chart: self.name.clone(),
                point: p.to_vec(),
            })
        }
    }

    /// `count` seeded uniform points in the box shrunk by [`DOMAIN_MARGIN`].
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                self.lower
                    .iter()
                    .zip(&self.upper)
                    .map(|(l, u)| {
                        let m = DOMAIN_MARGIN * (u - l);
                        l + m + rng.gen::<f64>() * (u - l - 2.0 * m)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Slot structure of a tensor field: `covariant` lower and `contravariant`
/// upper indices. Components are stored row-major, contravariant slots
/// first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Valence {
    pub covariant: usize,
    pub contravariant: usize,
    pub antisymmetric: bool,
}

impl Valence {
    pub const SCALAR: Valence = Valence {
        covariant: 0,
        contravariant: 0,
        antisymmetric: false,
    };
    pub const VECTOR: Valence = Valence {
        covariant: 0,
        contravariant: 1,
        antisymmetric: false,
    };
    pub const COVECTOR: Valence = Valence {
        covariant: 1,
        contravariant: 0,
        antisymmetric: true,
    };
    pub const SYMMETRIC2: Valence = Valence {
        covariant: 2,
        contravariant: 0,
        antisymmetric: false,
    };
    pub const ENDOMORPHISM: Valence = Valence {
        covariant: 1,
        contravariant: 1,
        antisymmetric: false,
    };

    pub fn form(degree: usize) -> Valence {
        Valence {
            covariant: degree,
            contravariant: 0,
            antisymmetric: true,
        }
    }

    pub fn rank(&self) -> usize {
        self.covariant + self.contravariant
    }
}

/// A pure function of coordinates, evaluable at any scalar type so that it
/// can be differentiated by nested dual numbers.
pub trait Smooth: Sync {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S>;
}

/// A tensor field on a chart.
pub trait ChartField: Smooth {
    fn chart(&self) -> &Chart;
    fn valence(&self) -> Valence;
}

/// Value and first partials: `d[c * n + k] = ∂_k f_c`.
pub fn jacobian<S: Real, F: Smooth + ?Sized>(f: &F, x: &[S]) -> (Vec<S>, Vec<S>) {
    let n = x.len();
    let mut value = Vec::new();
    let mut d = Vec::new();
    for k in 0..n {
        let xd: Vec<Dual<S>> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if i == k {
                    Dual::variable(v)
                } else {
                    Dual::constant(v)
                }
            })
            .collect();
        let out = f.eval(&xd);
        if k == 0 {
            value = out.iter().map(|o| o.re).collect();
            d = vec![S::zero(); out.len() * n];
        }
        for (c, o) in out.iter().enumerate() {
            d[c * n + k] = o.eps;
        }
    }
    if n == 0 {
        value = f.eval(x);
    }
    (value, d)
}

/// Value, first and second partials: `dd[c * n * n + k * n + l] = ∂_k ∂_l f_c`.
pub fn hessian<S: Real, F: Smooth + ?Sized>(f: &F, x: &[S]) -> (Vec<S>, Vec<S>, Vec<S>) {
    let n = x.len();
    let mut value = Vec::new();
    let mut d = Vec::new();
    let mut dd = Vec::new();
    for k in 0..n {
        for l in k..n {
            let xd: Vec<Dual<Dual<S>>> = x
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let inner = Dual::new(v, if i == l { S::one() } else { S::zero() });
                    let outer = if i == k {
                        Dual::new(S::one(), S::zero())
                    } else {
                        Dual::constant(S::zero())
                    };
                    Dual::new(inner, outer)
                })
                .collect();
            let out = f.eval(&xd);
            if k == 0 && l == 0 {
                let m = out.len();
                value = out.iter().map(|o| o.re.re).collect();
                d = vec![S::zero(); m * n];
                dd = vec![S::zero(); m * n * n];
            }
            for (c, o) in out.iter().enumerate() {
                if k == l {
                    d[c * n + k] = o.eps.re;
                }
                dd[c * n * n + k * n + l] = o.eps.eps;
                dd[c * n * n + l * n + k] = o.eps.eps;
            }
        }
    }
    (value, d, dd)
}

/// Field values and exact partial derivatives at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointJet {
    pub point: Vec<f64>,
    pub value: Vec<f64>,
    /// `first[c * dim + k] = ∂_k f_c`
    pub first: Vec<f64>,
    /// `second[c * dim² + k * dim + l] = ∂_k ∂_l f_c`, present for order 2.
    pub second: Option<Vec<f64>>,
}

impl PointJet {
    pub fn dim(&self) -> usize {
        self.point.len()
    }

    pub fn d(&self, c: usize, k: usize) -> f64 {
        self.first[c * self.dim() + k]
    }

    pub fn dd(&self, c: usize, k: usize, l: usize) -> Option<f64> {
        let n = self.dim();
        self.second.as_ref().map(|s| s[c * n * n + k * n + l])
    }
}

/// Exact first (or first and second) partial derivatives of `f` at `point`.
pub fn differentiate<F: ChartField + ?Sized>(f: &F, point: &[f64], order: u8) -> Result<PointJet> {
    f.chart().check(point)?;
    let (value, first, second) = match order {
        1 => {
            let (v, d) = jacobian(f, point);
            (v, d, None)
        }
        2 => {
            let (v, d, dd) = hessian(f, point);
            (v, d, Some(dd))
        }
        _ => {
            return Err(GeomError::Degree(format!(
                "derivative order {order} not supported (1 or 2)"
            )))
        }
    };
    let finite = value
        .iter()
        .chain(&first)
        .chain(second.iter().flatten())
        .all(|v| v.is_finite());
    if !finite {
        return Err(GeomError::Evaluation);
    }
    Ok(PointJet {
        point: point.to_vec(),
        value,
        first,
        second,
    })
}

/// A polynomial field: each component is `Σ coef · Π x_i^{e_i}`.
#[derive(Debug, Clone)]
pub struct PolynomialField {
    pub chart: Chart,
    pub valence: Valence,
    /// One term list per component.
    pub components: Vec<Vec<(f64, Vec<u32>)>>,
}

impl PolynomialField {
    /// Random polynomial field of total degree ≤ `degree` with `count` components.
    pub fn random(
        chart: &Chart,
        valence: Valence,
        count: usize,
        degree: u32,
        rng: &mut impl Rng,
    ) -> Self {
        let n = chart.dim();
        let mut monomials: Vec<Vec<u32>> = vec![vec![]];
        for _ in 0..n {
            monomials = monomials
                .into_iter()
                .flat_map(|m| {
                    let used: u32 = m.iter().sum();
                    (0..=degree - used).map(move |e| {
                        let mut m2 = m.clone();
                        m2.push(e);
                        m2
                    })
                })
                .collect();
        }
        let components = (0..count)
            .map(|_| {
                monomials
                    .iter()
                    .map(|m| (rng.gen_range(-1.0..1.0), m.clone()))
                    .collect()
            })
            .collect();
        PolynomialField {
            chart: chart.clone(),
            valence,
            components,
        }
    }
}

impl Smooth for PolynomialField {
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.components
            .iter()
            .map(|terms| {
                let mut s = S::zero();
                for (c, e) in terms {
                    let mut t = S::cst(*c);
                    for (xi, &ei) in x.iter().zip(e) {
                        if ei > 0 {
                            t *= xi.powi(ei as i32);
                        }
                    }
                    s += t;
                }
                s
            })
            .collect()
    }
}

impl ChartField for PolynomialField {
    fn chart(&self) -> &Chart {
        &self.chart
    }
    fn valence(&self) -> Valence {
        self.valence
    }
}

/// Values of `f` at a point, lifted into the scalar type `S`.
pub fn eval_at<S: Real, F: Smooth + ?Sized>(f: &F, x: &[f64]) -> Vec<S> {
    let xs: Vec<S> = x.iter().map(|&v| S::cst(v)).collect();
    f.eval(&xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Square(Chart);
    impl Smooth for Square {
        fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
            vec![x[0] * x[0]]
        }
    }
    impl ChartField for Square {
        fn chart(&self) -> &Chart {
            &self.0
        }
        fn valence(&self) -> Valence {
            Valence::SCALAR
        }
    }

    struct Sine(Chart);
    impl Smooth for Sine {
        fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
            vec![x[0].sin()]
        }
    }
    impl ChartField for Sine {
        fn chart(&self) -> &Chart {
            &self.0
        }
        fn valence(&self) -> Valence {
            Valence::SCALAR
        }
    }

    struct Mixed(Chart);
    impl Smooth for Mixed {
        fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
            vec![x[0].sin() * x[1].exp() + x[0] * x[1] * x[2], x[2].cos()]
        }
    }
    impl ChartField for Mixed {
        fn chart(&self) -> &Chart {
            &self.0
        }
        fn valence(&self) -> Valence {
            Valence::VECTOR
        }
    }

    fn line() -> Chart {
        Chart::new("line", vec![-5.0], vec![5.0]).unwrap()
    }

    #[test]
    fn derivative_of_square() {
        let j = differentiate(&Square(line()), &[3.0], 1).unwrap();
        assert_eq!(j.d(0, 0), 6.0);
    }

    #[test]
    fn derivatives_of_sine_at_zero() {
        let j = differentiate(&Sine(line()), &[0.0], 2).unwrap();
        assert_eq!(j.d(0, 0), 1.0);
        assert_eq!(j.dd(0, 0, 0), Some(0.0));
    }

    #[test]
    fn constant_field_has_zero_partials() {
        let c = Chart::new("box", vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let f = PolynomialField {
            chart: c,
            valence: Valence::SCALAR,
            components: vec![vec![(2.5, vec![0, 0, 0])]],
        };
        let j = differentiate(&f, &[0.1, 0.2, 0.3], 2).unwrap();
        assert!(j.first.iter().all(|&v| v == 0.0));
        assert!(j.second.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn outside_domain_is_rejected() {
        let err = differentiate(&Square(line()), &[7.0], 1).unwrap_err();
        assert!(matches!(err, GeomError::Domain { .. }));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        struct Log(Chart);
        impl Smooth for Log {
            fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
                vec![x[0].ln()]
            }
        }
        impl ChartField for Log {
            fn chart(&self) -> &Chart {
                &self.0
            }
            fn valence(&self) -> Valence {
                Valence::SCALAR
            }
        }
        assert_eq!(
            differentiate(&Log(line()), &[-1.0], 1).unwrap_err(),
            GeomError::Evaluation
        );
    }

    #[test]
    fn hessian_matches_central_differences() {
        let c = Chart::new("box", vec![-2.0; 3], vec![2.0; 3]).unwrap();
        let f = Mixed(c);
        let p = [0.3, -0.4, 0.9];
        let j = differentiate(&f, &p, 2).unwrap();
        let h = 1e-4;
        for comp in 0..2 {
            for k in 0..3 {
                let mut pp = p;
                let mut pm = p;
                pp[k] += h;
                pm[k] -= h;
                let fd = (eval_at::<f64, _>(&f, &pp)[comp] - eval_at::<f64, _>(&f, &pm)[comp])
                    / (2.0 * h);
                let ex = j.d(comp, k);
                assert!(
                    (fd - ex).abs() <= 1e-6 * ex.abs().max(1.0),
                    "first {comp} {k}"
                );
                for l in 0..3 {
                    // mixed partials symmetric
                    assert!((j.dd(comp, k, l).unwrap() - j.dd(comp, l, k).unwrap()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn chart_validation_and_sampling() {
        assert!(Chart::new("bad", vec![1.0], vec![0.0]).is_err());
        assert!(Chart::new("bad", vec![], vec![]).is_err());
        let c = Chart::new("sq", vec![0.0, 10.0], vec![1.0, 20.0]).unwrap();
        let pts = c.sample(200, 42);
        assert_eq!(pts, c.sample(200, 42));
        for p in &pts {
            assert!(p[0] >= 1e-3 && p[0] <= 1.0 - 1e-3);
            assert!(p[1] >= 10.0 + 1e-2 && p[1] <= 20.0 - 1e-2);
        }
    }
}
