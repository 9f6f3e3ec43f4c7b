//! The Hopf circle action on a round 3-sphere, optionally times a flat
//! 2-torus, with flux `H = λ·vol_{S³} (+ κ dη∧dt1∧dt2)`.
//!
//! Coordinates `(η, ξ1, ξ2[, t1, t2])` with
//! `g = r²(dη² + sin²η dξ1² + cos²η dξ2²) [+ dt1² + dt2²]`, generator
//! `V = ∂_{ξ1} + ∂_{ξ2}`. Solving `dξ = ι_V H` along the ansatz
//! `ξ = f(η)(dξ1 − dξ2)` gives `f' = λ r³ sin η cos η`, so
//! `f = (λ r³ / 2) sin²η`; the torus variant adds the closed invariant piece
//! `c·dt1`. The quotient chart is `(η, φ = ξ1 − ξ2[, t1, t2])` with section
//! `ξ2 = 0`.

use crate::calculus::{diagonal, form_from_entries};
use crate::chart::Chart;
use crate::dual::Real;
use crate::generalized::Background;
use crate::quotient::{ExtendedAction, QuotientMap};

/// Flux scale making both Bismut connections of the unit 3-sphere flat.
/// Found by minimizing `max |R⁻|` over `λ` (see the scenario tests); the
/// radius-`r` value is `BISMUT_FLAT_LAMBDA / r`.
pub const BISMUT_FLAT_LAMBDA: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HopfParams {
    pub radius: f64,
    pub lambda: f64,
    /// Flux scale used for `ξ`; equals `lambda` for a valid action.
    pub xi_lambda: f64,
    /// Adds `ε dξ1` to `ξ` (breaks isotropy).
    pub isotropy_break: f64,
    /// Adds `ε sin(ξ1) dη` to `ξ` (non-invariant, not closed).
    pub xi_perturb: f64,
    /// Adds `ε sin(ξ1)` to `g_{ηη}` (breaks invariance of `g`).
    pub metric_break: f64,
    /// Include the flat torus factor.
    pub torus: bool,
    /// `κ` in `κ dη∧dt1∧dt2` (torus only).
    pub kappa: f64,
    /// `c` in `ξ ⊃ c dt1` (torus only).
    pub torus_xi: f64,
}

impl Default for HopfParams {
    fn default() -> Self {
        HopfParams {
            radius: 1.0,
            lambda: 0.0,
            xi_lambda: 0.0,
            isotropy_break: 0.0,
            xi_perturb: 0.0,
            metric_break: 0.0,
            torus: false,
            kappa: 0.0,
            torus_xi: 0.0,
        }
    }
}

impl HopfParams {
    pub fn with_lambda(radius: f64, lambda: f64) -> Self {
        HopfParams {
            radius,
            lambda,
            xi_lambda: lambda,
            ..Default::default()
        }
    }

    pub fn with_torus(radius: f64, lambda: f64, kappa: f64, torus_xi: f64) -> Self {
        HopfParams {
            radius,
            lambda,
            xi_lambda: lambda,
            torus: true,
            kappa,
            torus_xi,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Hopf {
    pub params: HopfParams,
    chart: Chart,
    quotient: Chart,
}

impl Hopf {
    pub fn new(params: HopfParams) -> Self {
        let (mut lo, mut hi) = (vec![0.02, -4.0, -4.0], vec![1.55, 4.0, 4.0]);
        let (mut qlo, mut qhi) = (vec![0.1, -3.0], vec![1.47, 3.0]);
        if params.torus {
            lo.extend([-3.0, -3.0]);
            hi.extend([3.0, 3.0]);
            qlo.extend([-3.0, -3.0]);
            qhi.extend([3.0, 3.0]);
        }
        let name = if params.torus { "s3xt2" } else { "s3" };
        Hopf {
            chart: Chart::new(name, lo, hi).expect("static chart"),
            quotient: Chart::new(format!("{name}/u1"), qlo, qhi).expect("static chart"),
            params,
        }
    }

    fn n(&self) -> usize {
        if self.params.torus {
            5
        } else {
            3
        }
    }
}

impl Background for Hopf {
    fn chart(&self) -> &Chart {
        &self.chart
    }

    fn metric<S: Real>(&self, x: &[S]) -> Vec<S> {
        let p = &self.params;
        let r2 = p.radius * p.radius;
        let (s, c) = (x[0].sin(), x[0].cos());
        let mut d = vec![
            S::cst(r2) + x[1].sin() * p.metric_break,
            s * s * r2,
            c * c * r2,
        ];
        if p.torus {
            d.extend([S::one(), S::one()]);
        }
        diagonal(&d)
    }

    fn flux<S: Real>(&self, x: &[S]) -> Vec<S> {
        let p = &self.params;
        let n = self.n();
        let vol = x[0].sin() * x[0].cos() * (p.lambda * p.radius.powi(3));
        if p.torus {
            form_from_entries(n, 3, &[(&[0, 1, 2], vol), (&[0, 3, 4], S::cst(p.kappa))])
        } else {
            form_from_entries(n, 3, &[(&[0, 1, 2], vol)])
        }
    }
}

impl ExtendedAction for Hopf {
    fn generators(&self) -> usize {
        1
    }

    fn vectors<S: Real>(&self, _x: &[S]) -> Vec<S> {
        let mut v = vec![S::zero(), S::one(), S::one()];
        if self.params.torus {
            v.extend([S::zero(), S::zero()]);
        }
        v
    }

    fn forms<S: Real>(&self, x: &[S]) -> Vec<S> {
        let p = &self.params;
        let s = x[0].sin();
        let f = s * s * (0.5 * p.xi_lambda * p.radius.powi(3));
        let mut xi = vec![x[1].sin() * p.xi_perturb, f + p.isotropy_break, -f];
        if p.torus {
            xi.extend([S::cst(p.torus_xi), S::zero()]);
        }
        xi
    }
}

impl QuotientMap for Hopf {
    fn quotient_chart(&self) -> &Chart {
        &self.quotient
    }

    fn project<S: Real>(&self, x: &[S]) -> Vec<S> {
        let mut u = vec![x[0], x[1] - x[2]];
        if self.params.torus {
            u.extend([x[3], x[4]]);
        }
        u
    }

    fn lift<S: Real>(&self, u: &[S]) -> Vec<S> {
        let mut x = vec![u[0], u[1], S::zero()];
        if self.params.torus {
            x.extend([u[2], u[3]]);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::curvature_residuals;
    use crate::generalized::{bismut_curvature, Sign};
    use crate::quotient::{
        horizontal_frames, omega_curvature, reduced_curvature_quotient, validate_extended_action,
        ActionValidation,
    };

    fn max_r_minus(lambda: f64) -> f64 {
        let h = Hopf::new(HopfParams::with_lambda(1.0, lambda));
        let mut worst: f64 = 0.0;
        for p in h.chart().sample(4, 1) {
            let r = bismut_curvature(Sign::Minus, &h, &p).unwrap();
            worst = r.iter().fold(worst, |m, v| m.max(v.abs()));
        }
        worst
    }

    #[test]
    fn bismut_flat_scale_is_found_by_search() {
        // golden-section search of max|R⁻| over λ ∈ [0.5, 3.5]
        let (mut a, mut b) = (0.5, 3.5);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..80 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if max_r_minus(c) < max_r_minus(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let best = 0.5 * (a + b);
        assert!((best - BISMUT_FLAT_LAMBDA).abs() < 1e-6, "{best}");
        assert!(max_r_minus(BISMUT_FLAT_LAMBDA) < 1e-12);
        assert!(max_r_minus(-BISMUT_FLAT_LAMBDA) < 1e-12);
    }

    #[test]
    fn action_is_valid_for_any_lambda() {
        for lambda in [0.0, 0.7, 2.0] {
            let h = Hopf::new(HopfParams::with_lambda(1.3, lambda));
            let v = validate_extended_action(&h, &h.chart().sample(10, 2)).unwrap();
            assert!(v.failures(1e-10).is_empty(), "{v:?}");
        }
        let t = Hopf::new(HopfParams::with_torus(1.0, 0.8, 0.6, 0.4));
        let v = validate_extended_action(&t, &t.chart().sample(10, 2)).unwrap();
        assert!(v.failures(1e-10).is_empty(), "{v:?}");
    }

    #[test]
    fn constructed_violations_are_named() {
        let base = HopfParams::with_lambda(1.0, 0.8);
        let cases = [
            (
                HopfParams {
                    isotropy_break: 0.1,
                    ..base.clone()
                },
                ActionValidation::ISOTROPY,
            ),
            (
                HopfParams {
                    lambda: 0.0,
                    ..base.clone()
                },
                ActionValidation::CLOSURE,
            ),
            (
                HopfParams {
                    metric_break: 0.1,
                    ..base.clone()
                },
                ActionValidation::METRIC_INVARIANCE,
            ),
            (
                HopfParams {
                    xi_perturb: 0.1,
                    ..base.clone()
                },
                ActionValidation::CLOSURE,
            ),
        ];
        for (p, name) in cases {
            let h = Hopf::new(p);
            let v = validate_extended_action(&h, &h.chart().sample(10, 3)).unwrap();
            assert!(v.failures(1e-8).contains(&name), "{name}: {v:?}");
        }
    }

    #[test]
    fn frames_differ_when_flux_is_on() {
        let h = Hopf::new(HopfParams::with_lambda(1.0, 1.5));
        let p = [0.6, 0.3, -0.2];
        let (plus, minus) = horizontal_frames(&h, &p, &[]).unwrap();
        assert_eq!(plus.len(), 2);
        // τ₋ is not contained in τ₊: some τ₋ vector violates the τ₊ constraint
        let d = crate::quotient::frame_defect(&h, Sign::Plus, &p, &minus);
        assert!(d > 1e-3);
        assert!(crate::quotient::frame_defect(&h, Sign::Plus, &p, &plus) < 1e-12);
    }

    #[test]
    fn omega_formula_matches_direct_curvature() {
        for lambda in [0.0, 1.3] {
            let h = Hopf::new(HopfParams::with_lambda(1.0, lambda));
            for p in h.chart().sample(5, 4) {
                let (plus, minus) = horizontal_frames(&h, &p, &[]).unwrap();
                assert!(
                    omega_curvature(&h, Sign::Plus, &p, &plus)
                        .unwrap()
                        .residual()
                        < 1e-10
                );
                assert!(
                    omega_curvature(&h, Sign::Minus, &p, &minus)
                        .unwrap()
                        .residual()
                        < 1e-10
                );
            }
        }
    }

    #[test]
    fn untwisted_quotient_is_sphere_of_curvature_four() {
        let h = Hopf::new(HopfParams::with_lambda(1.0, 0.0));
        let rc = reduced_curvature_quotient(&h, &[0.7, 0.4]).unwrap();
        assert!(
            (rc.sectional_12() - 4.0).abs() < 1e-9,
            "{}",
            rc.sectional_12()
        );
        assert!(rc.residual() < 1e-8, "{rc:?}");
    }

    #[test]
    fn reduction_formula_matches_direct_with_flux() {
        for params in [
            HopfParams::with_lambda(1.0, 1.3),
            HopfParams::with_torus(1.0, 0.8, 0.6, 0.4),
        ] {
            let h = Hopf::new(params);
            for u in h.quotient_chart().sample(3, 5) {
                let rc = reduced_curvature_quotient(&h, &u).unwrap();
                assert!(rc.residual() < 1e-7, "{:?}: {}", h.params, rc.residual());
                let res = curvature_residuals(&rc.direct, rc.m);
                assert!(res.first_pair < 1e-9 && res.second_pair < 1e-9);
            }
        }
    }

    #[test]
    fn reduced_connection_and_vertical_derivative() {
        use crate::chart::{PolynomialField, Valence};
        use crate::quotient::{reduced_bismut, vertical_derivative_check, QuotientFrame};
        use rand::SeedableRng;
        let h = Hopf::new(HopfParams::with_torus(1.0, 0.8, 0.6, 0.4));
        let qc = h.quotient_chart().clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for u in qc.sample(3, 7) {
            let x = PolynomialField::random(&qc, Valence::VECTOR, 4, 2, &mut rng);
            let y = PolynomialField::random(&qc, Valence::VECTOR, 4, 2, &mut rng);
            let z = PolynomialField::random(&qc, Valence::VECTOR, 4, 2, &mut rng);
            let (a, d) = reduced_bismut(&h, &x, &y, &z, &u).unwrap();
            assert!((a - d).abs() < 1e-8, "{a} vs {d}");
            let f = QuotientFrame::new(&h, &u).unwrap();
            for w in &f.frame_minus {
                let (l, r) = vertical_derivative_check(&h, 0, &z, w, &u).unwrap();
                assert!((l - r).abs() < 1e-9, "{l} vs {r}");
            }
        }
    }

    #[test]
    fn torus_variant_has_reduced_flux() {
        let h = Hopf::new(HopfParams::with_torus(1.0, 0.8, 0.6, 0.4));
        let (_, ht) = crate::quotient::reduce_metric_flux(&h, &[0.7, 0.2, 0.1, -0.3]).unwrap();
        assert!(ht.iter().any(|v| v.abs() > 1e-2));
        let plain = Hopf::new(HopfParams::with_lambda(1.0, 1.1));
        let (_, h2) = crate::quotient::reduce_metric_flux(&plain, &[0.7, 0.2]).unwrap();
        assert!(h2.is_empty() || h2.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn tau_minus_restriction_is_isometric() {
        use crate::chart::Smooth;
        use crate::quotient::ReducedMetric;
        let h = Hopf::new(HopfParams::with_torus(1.0, 0.8, 0.6, 0.4));
        for u in h.quotient_chart().sample(5, 8) {
            let a: Vec<f64> = ReducedMetric {
                q: &h,
                sign: Sign::Plus,
            }
            .eval(&u);
            let b: Vec<f64> = ReducedMetric {
                q: &h,
                sign: Sign::Minus,
            }
            .eval(&u);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
