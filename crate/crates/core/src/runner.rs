//! Scenario configuration, the scenario registry, the numeric checks and
//! the report they produce. The `ggred` binary is a thin wrapper over
//! [`run`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{PolynomialField, Valence};
use crate::euler::euler_characteristic;
use crate::generalized::{bismut_curvature, bismut_derivative, bismut_via_courant, Background, Sign};
use crate::gk::{reduce_gk, validate_bihermitian, BiHermitian};
use crate::grassmann::{fermionic_gaussian, pfaffian};
use crate::linalg::Matrix;
use crate::localization::{
    curvature_exponent, exponent_residual, localize_model, localize_quotient, phi_minus_minus_closed_form,
    phi_plus_minus_closed_form, Order, PointFrame,
};
use crate::oracles::{gauss_curvature, oneill_curvature};
use crate::quotient::{
    horizontal_frames, omega_curvature, reduced_curvature_quotient, to_frame, validate_extended_action,
    ExtendedAction, QuotientFrame, QuotientMap, ReducedBackground,
};
use crate::scenarios::closed::{ClosedManifold, FlatTorus, RoundSphere, SphereProduct};
use crate::scenarios::custom::ConstantFlux;
use crate::scenarios::hopf::{Hopf, HopfParams};
use crate::scenarios::kahler_hopf::KahlerHopf;
use crate::scenarios::product::SphereTorus;
use crate::scenarios::s3xs1::HopfSurface;
use crate::scenarios::sphere_in_flat::{FlatSection, SectionShape};
use crate::submanifold::{reduced_curvature_sub, InducedBackground, Submanifold, SubmanifoldFrame};

pub const REPORT_VERSION: &str = "1";
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_IDENTITY_TOL: f64 = 1e-8;
pub const DEFAULT_CROSS_TOL: f64 = 1e-6;
const DEFAULT_SAMPLES: f64 = 8.0;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scenario setup failed: {0}")]
    Scenario(String),
}

impl RunError {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Scenario(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross: Option<f64>,
    /// Absolute; the default is 1e-10 when χ = 0 and 1% (2D) or 2% (4D) of |χ|.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub euler: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Empty means the scenario's default checks.
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl ScenarioConfig {
    pub fn new(scenario: impl Into<String>) -> Self {
        ScenarioConfig {
            scenario: scenario.into(),
            parameters: BTreeMap::new(),
            tolerances: Tolerances::default(),
            checks: Vec::new(),
            seed: DEFAULT_SEED,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks names, parameter keys, check ids and tolerances against the
    /// registry without building the scenario.
    pub fn validate(&self) -> Result<&'static ScenarioInfo, RunError> {
        let info = scenario_info(&self.scenario).ok_or_else(|| {
            RunError::Config(format!(
                "unknown scenario `{}` (known: {})",
                self.scenario,
                SCENARIOS.iter().map(|s| s.name).collect::<Vec<_>>().join(", ")
            ))
        })?;
        for (key, value) in &self.parameters {
            if !info.parameters.iter().any(|p| p.name == *key) && key != "samples" {
                return Err(RunError::Config(format!(
                    "unknown parameter `{key}` for scenario `{}` (known: {})",
                    info.name,
                    info.parameter_names().join(", ")
                )));
            }
            if !value.is_finite() {
                return Err(RunError::Config(format!("parameter `{key}` must be finite")));
            }
        }
        for id in &self.checks {
            if !CHECKS.iter().any(|c| c.id == id) {
                return Err(RunError::Config(format!("unknown check `{id}`")));
            }
            if !info.checks.contains(&id.as_str()) {
                return Err(RunError::Config(format!(
                    "check `{id}` does not apply to scenario `{}` (available: {})",
                    info.name,
                    info.checks.join(", ")
                )));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [("identity", t.identity), ("cross", t.cross), ("euler", t.euler)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(RunError::Config(format!("tolerance `{name}` must be positive, got {v}")));
                }
            }
        }
        Ok(info)
    }

    /// Parameters with defaults filled in.
    pub fn resolved_parameters(&self) -> Result<BTreeMap<String, f64>, RunError> {
        let info = self.validate()?;
        let mut out: BTreeMap<String, f64> = info.parameters.iter().map(|p| (p.name.to_string(), p.default)).collect();
        out.insert("samples".into(), DEFAULT_SAMPLES);
        out.extend(self.parameters.iter().map(|(k, v)| (k.clone(), *v)));
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterInfo {
    pub name: &'static str,
    pub default: f64,
    pub help: &'static str,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub parameters: &'static [ParameterInfo],
    /// Checks run when the configuration names none.
    pub checks: &'static [&'static str],
}

impl ScenarioInfo {
    pub fn parameter_names(&self) -> Vec<&'static str> {
        let mut v: Vec<_> = self.parameters.iter().map(|p| p.name).collect();
        v.push("samples");
        v
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CheckInfo {
    pub id: &'static str,
    pub description: &'static str,
}

pub const CHECKS: &[CheckInfo] = &[
    CheckInfo { id: "courant", description: "Bismut connections from the Courant bracket agree with Levi-Civita ± ½g⁻¹H" },
    CheckInfo { id: "pair_symmetry", description: "R⁺(X,Y,Z,W) = R⁻(Z,W,X,Y)" },
    CheckInfo { id: "action", description: "isotropy, closure and invariance of the extended action" },
    CheckInfo { id: "omega", description: "curvature of τ± from K⁻¹dξ± against direct computation" },
    CheckInfo { id: "thm63", description: "reduced curvature formula against the Bismut curvature of the quotient" },
    CheckInfo { id: "oneill", description: "reduced curvature against O'Neill's formula (H = 0, ξ = 0)" },
    CheckInfo { id: "thm65", description: "induced curvature formula against the Bismut curvature of the zero locus" },
    CheckInfo { id: "gauss", description: "induced curvature against the Gauss equation (H = 0)" },
    CheckInfo { id: "localization", description: "Gaussian elimination of the auxiliary fields reproduces the curvature term" },
    CheckInfo { id: "phi_closed_form", description: "stationary auxiliary fields match their closed forms" },
    CheckInfo { id: "euler", description: "Berezin-integrated curvature term integrates to the Euler characteristic" },
    CheckInfo { id: "pfaffian", description: "Berezin Gaussian equals the Pfaffian and Pf² = det" },
    CheckInfo { id: "gk", description: "generalized Kähler conditions on the ambient structure" },
    CheckInfo { id: "gk_reduce", description: "τ±-invariance of J± and generalized Kähler conditions on the quotient" },
    CheckInfo { id: "determinism", description: "a second evaluation reproduces every residual bit for bit" },
];

macro_rules! params {
    ($($name:literal = $default:expr, $help:literal);* $(;)?) => {
        &[$(ParameterInfo { name: $name, default: $default, help: $help }),*]
    };
}

pub const SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "flat_torus",
        description: "flat torus T^dim, H = 0",
        parameters: params!["dim" = 2.0, "torus dimension (even for euler)"; "order" = 4.0, "quadrature order per axis"],
        checks: &["euler", "courant", "pair_symmetry", "pfaffian", "determinism"],
    },
    ScenarioInfo {
        name: "round_sphere",
        description: "round 2-sphere, H = 0",
        parameters: params!["radius" = 1.0, "sphere radius"; "order" = 24.0, "quadrature order per axis"],
        checks: &["euler", "courant", "pair_symmetry", "pfaffian", "determinism"],
    },
    ScenarioInfo {
        name: "sphere_product",
        description: "S² × S² with H = d(flux · cos θ₂ vol₁)",
        parameters: params![
            "radius1" = 1.0, "first radius";
            "radius2" = 0.7, "second radius";
            "flux" = 0.0, "flux scale (euler is exploratory when nonzero)";
            "order" = 8.0, "quadrature order per axis"
        ],
        checks: &["euler", "courant", "pair_symmetry", "pfaffian", "determinism"],
    },
    ScenarioInfo {
        name: "hopf",
        description: "S³ → S² by the Hopf action, H = lambda · vol",
        parameters: params![
            "radius" = 1.0, "sphere radius";
            "lambda" = 0.0, "flux scale";
            "xi_shift" = 0.0, "added to the flux scale used for ξ (nonzero breaks closure)";
            "isotropy_break" = 0.0, "breaks isotropy of ξ";
            "xi_perturb" = 0.0, "non-invariant perturbation of ξ";
            "metric_break" = 0.0, "non-invariant perturbation of g"
        ],
        checks: &["action", "courant", "pair_symmetry", "omega", "thm63", "oneill", "localization", "phi_closed_form", "pfaffian", "determinism"],
    },
    ScenarioInfo {
        name: "hopf_flux",
        description: "S³ × T² → S² × T² with flux on both factors",
        parameters: params![
            "radius" = 1.0, "sphere radius";
            "lambda" = 1.3, "flux scale on S³";
            "kappa" = 0.5, "mixed flux dη∧dt1∧dt2";
            "torus_xi" = 0.7, "ξ component along dt1"
        ],
        checks: &["action", "courant", "pair_symmetry", "omega", "thm63", "localization", "phi_closed_form", "pfaffian", "determinism"],
    },
    ScenarioInfo {
        name: "product_qg",
        description: "S² × T² reduced by the torus, biHermitian",
        parameters: params!["radius" = 1.0, "sphere radius"],
        checks: &["action", "courant", "pair_symmetry", "omega", "thm63", "oneill", "localization", "phi_closed_form", "gk", "gk_reduce", "pfaffian", "determinism"],
    },
    ScenarioInfo {
        name: "sphere_in_flat",
        description: "zero locus of σ in conformally flat R³ with constant-type flux",
        parameters: params![
            "shape" = 0.0, "0 sphere, 1 plane, 2 line";
            "radius" = 1.0, "sphere radius";
            "flux" = 0.5, "flux scale";
            "warp" = 0.0, "conformal warp of the ambient metric"
        ],
        checks: &["courant", "pair_symmetry", "thm65", "gauss", "localization", "pfaffian", "determinism"],
    },
    ScenarioInfo {
        name: "s3xs1_gk",
        description: "S³ × S¹ as R⁴∖0 with the standard generalized Kähler structure",
        parameters: params!["perturb" = 0.0, "perturbation of J₊ (breaks integrability)"],
        checks: &["gk", "courant", "pair_symmetry", "pfaffian", "determinism"],
    },
    ScenarioInfo {
        name: "kahler_hopf",
        description: "flat C² with the circle action, reduced to CP¹ inside |z| = 1",
        parameters: params!["skew" = 0.0, "non-invariant deformation of J₊"],
        checks: &["action", "gk", "gk_reduce", "courant", "pair_symmetry", "pfaffian", "determinism"],
    },
    ScenarioInfo {
        name: "custom",
        description: "flat R^dim with H = flux · dx0∧dx1∧dx2",
        parameters: params!["dim" = 3.0, "dimension"; "flux" = 1.0, "constant flux"],
        checks: &["courant", "pair_symmetry", "pfaffian", "determinism"],
    },
];

pub fn scenario_info(name: &str) -> Option<&'static ScenarioInfo> {
    SCENARIOS.iter().find(|s| s.name == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Computed and reported, but with no established expected value.
    Exploratory,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Exploratory => "exploratory",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub points: usize,
    /// `null` in JSON when the check could not be evaluated.
    pub max_residual: Option<f64>,
    pub tolerance: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub version: String,
    pub scenario: String,
    pub parameters: BTreeMap<String, f64>,
    pub seed: u64,
    pub checks: Vec<CheckRecord>,
    pub status: Status,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let params: Vec<String> = self.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(s, "scenario {} ({}) seed {}", self.scenario, params.join(" "), self.seed);
        for c in &self.checks {
            let res = c.max_residual.map_or("n/a".to_string(), |r| format!("{r:.3e}"));
            let _ = write!(s, "  {:<16} {:<11} residual {:>10}  tol {:.1e}  points {}", c.id, c.status.as_str(), res, c.tolerance, c.points);
            if let Some(v) = c.value {
                let _ = write!(s, "  value {v:.8}");
            }
            if let Some(d) = &c.detail {
                let _ = write!(s, "  ({d})");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "status {}", self.status.as_str());
        s
    }
}

enum Instance {
    Torus(FlatTorus),
    Sphere(RoundSphere),
    SphereProduct(SphereProduct),
    Hopf(Hopf),
    Product(SphereTorus),
    Section(FlatSection),
    Surface(HopfSurface),
    Kahler(KahlerHopf),
    Custom(ConstantFlux),
}

macro_rules! with_background {
    ($inst:expr, $b:ident => $body:expr) => {
        match $inst {
            Instance::Torus($b) => $body,
            Instance::Sphere($b) => $body,
            Instance::SphereProduct($b) => $body,
            Instance::Hopf($b) => $body,
            Instance::Product($b) => $body,
            Instance::Section($b) => $body,
            Instance::Surface($b) => $body,
            Instance::Kahler($b) => $body,
            Instance::Custom($b) => $body,
        }
    };
}

fn positive(p: &BTreeMap<String, f64>, key: &str) -> Result<f64, RunError> {
    let v = p[key];
    if v > 0.0 {
        Ok(v)
    } else {
        Err(RunError::Config(format!("parameter `{key}` must be positive, got {v}")))
    }
}

fn count(p: &BTreeMap<String, f64>, key: &str, min: usize, max: usize) -> Result<usize, RunError> {
    let v = p[key];
    if v.fract() == 0.0 && v >= min as f64 && v <= max as f64 {
        Ok(v as usize)
    } else {
        Err(RunError::Config(format!("parameter `{key}` must be an integer in [{min}, {max}], got {v}")))
    }
}

fn build(name: &str, p: &BTreeMap<String, f64>) -> Result<Instance, RunError> {
    Ok(match name {
        "flat_torus" => Instance::Torus(FlatTorus::new(count(p, "dim", 1, 6)?)),
        "round_sphere" => Instance::Sphere(RoundSphere::new(positive(p, "radius")?)),
        "sphere_product" => {
            Instance::SphereProduct(SphereProduct::new(positive(p, "radius1")?, positive(p, "radius2")?, p["flux"]))
        }
        "hopf" => Instance::Hopf(Hopf::new(HopfParams {
            xi_lambda: p["lambda"] + p["xi_shift"],
            isotropy_break: p["isotropy_break"],
            xi_perturb: p["xi_perturb"],
            metric_break: p["metric_break"],
            ..HopfParams::with_lambda(positive(p, "radius")?, p["lambda"])
        })),
        "hopf_flux" => {
            Instance::Hopf(Hopf::new(HopfParams::with_torus(positive(p, "radius")?, p["lambda"], p["kappa"], p["torus_xi"])))
        }
        "product_qg" => Instance::Product(SphereTorus::new(positive(p, "radius")?)),
        "sphere_in_flat" => {
            let shape = match p["shape"] {
                s if s == 0.0 => {
                    let r = positive(p, "radius")?;
                    if r >= 2.0 {
                        return Err(RunError::Config(format!("radius {r} leaves the ambient chart (-2.5, 2.5)^3 margin")));
                    }
                    SectionShape::Sphere { radius: r }
                }
                s if s == 1.0 => SectionShape::Plane,
                s if s == 2.0 => SectionShape::Line,
                s => return Err(RunError::Config(format!("parameter `shape` must be 0, 1 or 2, got {s}"))),
            };
            Instance::Section(FlatSection::new(shape, p["flux"]).with_warp(p["warp"]))
        }
        "s3xs1_gk" => Instance::Surface(HopfSurface::perturbed(p["perturb"])),
        "kahler_hopf" => Instance::Kahler(KahlerHopf::skewed(p["skew"])),
        "custom" => Instance::Custom(
            ConstantFlux::new(count(p, "dim", 1, 6)?, p["flux"]).map_err(|e| RunError::Config(e.to_string()))?,
        ),
        other => return Err(RunError::Config(format!("unknown scenario `{other}`"))),
    })
}

/// Dry run of the extended-action conditions; a violated condition is a
/// setup error naming it.
fn setup<E: ExtendedAction>(ea: &E, seed: u64, tol: f64) -> Result<(), RunError> {
    let pts = ea.chart().sample(6, seed ^ 0x5e7u64);
    let v = validate_extended_action(ea, &pts).map_err(|e| RunError::Scenario(e.to_string()))?;
    let failed = v.failures(tol);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(RunError::Scenario(format!("extended action violates {}", failed.join("; "))))
    }
}

struct Ctx {
    samples: usize,
    seed: u64,
    identity: f64,
    cross: f64,
    euler: Option<f64>,
}

struct Outcome {
    points: usize,
    residual: f64,
    tolerance: f64,
    value: Option<f64>,
    detail: Option<String>,
    exploratory: bool,
}

impl Outcome {
    fn new(points: usize, residual: f64, tolerance: f64) -> Self {
        Outcome { points, residual, tolerance, value: None, detail: None, exploratory: false }
    }
}

type CheckResult = crate::Result<Outcome>;

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = 1.0 + a.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn check_courant<B: Background>(bg: &B, ctx: &Ctx) -> CheckResult {
    let n = bg.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let pts = bg.chart().sample(ctx.samples, ctx.seed);
    let mut worst: f64 = 0.0;
    for p in &pts {
        let x = PolynomialField::random(bg.chart(), Valence::VECTOR, n, 2, &mut rng);
        let y = PolynomialField::random(bg.chart(), Valence::VECTOR, n, 2, &mut rng);
        for sign in [Sign::Plus, Sign::Minus] {
            let a = bismut_derivative(&x, &y, sign, bg, p)?;
            let b = bismut_via_courant(&x, &y, sign, bg, p)?;
            worst = worst.max(rel(&a, &b));
        }
    }
    Ok(Outcome::new(pts.len(), worst, ctx.identity))
}

fn check_pair_symmetry<B: Background>(bg: &B, ctx: &Ctx) -> CheckResult {
    let n = bg.dim();
    let pts = bg.chart().sample(ctx.samples, ctx.seed);
    let mut worst: f64 = 0.0;
    for p in &pts {
        let plus = bismut_curvature(Sign::Plus, bg, p)?;
        let minus = bismut_curvature(Sign::Minus, bg, p)?;
        let swapped: Vec<f64> = (0..n.pow(4))
            .map(|f| {
                let (i, j, k, l) = (f / n.pow(3), f / (n * n) % n, f / n % n, f % n);
                minus[((k * n + l) * n + i) * n + j]
            })
            .collect();
        worst = worst.max(rel(&plus, &swapped));
    }
    Ok(Outcome::new(pts.len(), worst, ctx.identity))
}

fn check_action<E: ExtendedAction>(ea: &E, ctx: &Ctx) -> CheckResult {
    let pts = ea.chart().sample(ctx.samples, ctx.seed);
    let v = validate_extended_action(ea, &pts)?;
    let mut out = Outcome::new(pts.len(), v.max_residual(), ctx.identity);
    let failed = v.failures(ctx.identity);
    if !failed.is_empty() {
        out.detail = Some(failed.join("; "));
    }
    Ok(out)
}

fn check_omega<E: ExtendedAction>(ea: &E, ctx: &Ctx) -> CheckResult {
    let pts = ea.chart().sample(ctx.samples, ctx.seed);
    let mut worst: f64 = 0.0;
    for p in &pts {
        let (plus, minus) = horizontal_frames(ea, p, &[])?;
        for (sign, frame) in [(Sign::Plus, plus), (Sign::Minus, minus)] {
            worst = worst.max(omega_curvature(ea, sign, p, &frame)?.residual());
        }
    }
    Ok(Outcome::new(pts.len(), worst, ctx.identity))
}

fn check_thm63<Q: QuotientMap>(q: &Q, ctx: &Ctx, sectional: Option<f64>) -> CheckResult {
    let pts = q.quotient_chart().sample(ctx.samples, ctx.seed);
    let mut worst: f64 = 0.0;
    let mut value = None;
    for u in &pts {
        let rc = reduced_curvature_quotient(q, u)?;
        worst = worst.max(rc.residual());
        if let Some(k) = sectional {
            worst = worst.max((rc.sectional_12() - k).abs());
            value = Some(rc.sectional_12());
        }
    }
    let mut out = Outcome::new(pts.len(), worst, ctx.cross);
    out.value = value;
    Ok(out)
}

fn check_oneill<Q: QuotientMap>(q: &Q, ctx: &Ctx) -> CheckResult {
    let pts = q.quotient_chart().sample(ctx.samples, ctx.seed);
    let mut worst: f64 = 0.0;
    for u in &pts {
        let f = QuotientFrame::new(q, u)?;
        let o = to_frame(&oneill_curvature(q, u)?, &f.frame);
        worst = worst.max(rel(&o, &f.curvature_formula_frame()));
    }
    Ok(Outcome::new(pts.len(), worst, ctx.cross))
}

fn check_localization_quotient<Q: QuotientMap>(q: &Q, ctx: &Ctx) -> CheckResult {
    let pts = q.quotient_chart().sample(ctx.samples, ctx.seed);
    let mut worst: f64 = 0.0;
    for u in &pts {
        let f = QuotientFrame::new(q, u)?;
        let direct = to_frame(&bismut_curvature(Sign::Minus, &ReducedBackground(q), u)?, &f.frame);
        let target = curvature_exponent(&direct, f.m);
        for order in [Order::FirstF, Order::FirstPhi] {
            worst = worst.max(exponent_residual(&localize_quotient(&f, order)?.exponent, &target));
        }
    }
    Ok(Outcome::new(pts.len(), worst, ctx.cross))
}

fn check_phi_closed_form<Q: QuotientMap>(q: &Q, ctx: &Ctx) -> CheckResult {
    let pts = q.quotient_chart().sample(ctx.samples, ctx.seed);
    let mut worst: f64 = 0.0;
    for u in &pts {
        let f = QuotientFrame::new(q, u)?;
        let loc = localize_quotient(&f, Order::FirstF)?;
        let (pm, mm) = (phi_plus_minus_closed_form(&f), phi_minus_minus_closed_form(&f));
        let pairs = loc.phi_plus_minus.iter().zip(&pm).chain(loc.phi_minus_minus.iter().zip(&mm));
        for (a, b) in pairs {
            worst = worst.max(exponent_residual(a, b));
        }
    }
    Ok(Outcome::new(pts.len(), worst, ctx.identity))
}

fn check_thm65<N: Submanifold>(sd: &N, ctx: &Ctx, sectional: Option<f64>) -> CheckResult {
    let pts = sd.nchart().sample(ctx.samples, ctx.seed);
    let mut worst: f64 = 0.0;
    let mut value = None;
    for u in &pts {
        let rc = reduced_curvature_sub(sd, u)?;
        worst = worst.max(rc.residual());
        if let Some(k) = sectional {
            worst = worst.max((rc.sectional_12() - k).abs());
            value = Some(rc.sectional_12());
        }
    }
    let mut out = Outcome::new(pts.len(), worst, ctx.cross);
    out.value = value;
    Ok(out)
}

fn check_gauss<N: Submanifold>(sd: &N, ctx: &Ctx) -> CheckResult {
    let pts = sd.nchart().sample(ctx.samples, ctx.seed);
    let mut worst: f64 = 0.0;
    for u in &pts {
        let f = SubmanifoldFrame::new(sd, u)?;
        let g = to_frame(&gauss_curvature(sd, u)?, &f.frame);
        worst = worst.max(rel(&g, &f.curvature_formula_frame()));
    }
    Ok(Outcome::new(pts.len(), worst, ctx.cross))
}

fn check_localization_section<N: Submanifold>(sd: &N, ctx: &Ctx) -> CheckResult {
    let pts = sd.nchart().sample(ctx.samples, ctx.seed);
    let mut worst: f64 = 0.0;
    for u in &pts {
        let f = SubmanifoldFrame::new(sd, u)?;
        let direct = to_frame(&bismut_curvature(Sign::Minus, &InducedBackground(sd), u)?, &f.frame);
        let target = curvature_exponent(&direct, f.m);
        worst = worst.max(exponent_residual(&localize_model(PointFrame::Submanifold(&f))?, &target));
    }
    Ok(Outcome::new(pts.len(), worst, ctx.cross))
}

fn check_euler<B: ClosedManifold>(bg: &B, order: usize, exploratory: bool, ctx: &Ctx) -> CheckResult {
    let chi = euler_characteristic(bg, order)?;
    let expected = bg.euler() as f64;
    let tol = ctx.euler.unwrap_or(if expected == 0.0 {
        1e-10
    } else if bg.dim() == 2 {
        0.01 * expected.abs()
    } else {
        0.02 * expected.abs()
    });
    let mut out = Outcome::new(order.pow(bg.dim() as u32), (chi - expected).abs(), tol);
    out.value = Some(chi);
    out.detail = Some(format!("expected {expected}"));
    out.exploratory = exploratory;
    Ok(out)
}

fn check_pfaffian(ctx: &Ctx) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut worst: f64 = 0.0;
    let trials = ctx.samples.max(1);
    for t in 0..trials {
        let n = 2 * (1 + t % 4);
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a.set(i, j, v);
                a.set(j, i, -v);
            }
        }
        let pf = pfaffian(&a)?;
        let det = a.det();
        let gauss = fermionic_gaussian(&a)?;
        worst = worst.max((pf * pf - det).abs() / det.abs().max(1.0));
        worst = worst.max((gauss - pf).abs() / pf.abs().max(1.0));
    }
    Ok(Outcome::new(trials, worst, ctx.identity))
}

fn check_gk<B: BiHermitian>(bh: &B, ctx: &Ctx) -> CheckResult {
    let pts = bh.chart().sample(ctx.samples, ctx.seed);
    let v = validate_bihermitian(bh, &pts)?;
    let mut out = Outcome::new(pts.len(), v.max_residual(), ctx.identity);
    let failed = v.failures(ctx.identity);
    if !failed.is_empty() {
        out.detail = Some(failed.join("; "));
    }
    Ok(out)
}

fn check_gk_reduce<Q: QuotientMap + BiHermitian>(q: &Q, ctx: &Ctx) -> CheckResult {
    let pts = q.quotient_chart().sample(ctx.samples, ctx.seed);
    let mut worst: f64 = 0.0;
    for u in &pts {
        match reduce_gk(q, u, ctx.cross) {
            Ok(r) => worst = worst.max(r.validation.max_residual()).max(r.defects.0).max(r.defects.1),
            Err(crate::GeomError::ReductionCondition(d)) => {
                let mut out = Outcome::new(pts.len(), d, ctx.cross);
                out.detail = Some("J± does not preserve τ±".into());
                return Ok(out);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Outcome::new(pts.len(), worst, ctx.cross))
}

fn unsupported(id: &str) -> CheckResult {
    Err(crate::GeomError::InvalidChart(format!("check `{id}` is not available here")))
}

fn run_check(inst: &Instance, id: &str, p: &BTreeMap<String, f64>, ctx: &Ctx) -> CheckResult {
    let order = || count(p, "order", 1, 64).map_err(|e| crate::GeomError::InvalidChart(e.to_string()));
    match id {
        "courant" => with_background!(inst, b => check_courant(b, ctx)),
        "pair_symmetry" => with_background!(inst, b => check_pair_symmetry(b, ctx)),
        "pfaffian" => check_pfaffian(ctx),
        "euler" => match inst {
            Instance::Torus(b) => check_euler(b, order()?, false, ctx),
            Instance::Sphere(b) => check_euler(b, order()?, false, ctx),
            Instance::SphereProduct(b) => check_euler(b, order()?, b.flux != 0.0, ctx),
            _ => unsupported(id),
        },
        "action" => match inst {
            Instance::Hopf(q) => check_action(q, ctx),
            Instance::Product(q) => check_action(q, ctx),
            Instance::Kahler(q) => check_action(q, ctx),
            _ => unsupported(id),
        },
        "omega" => match inst {
            Instance::Hopf(q) => check_omega(q, ctx),
            Instance::Product(q) => check_omega(q, ctx),
            _ => unsupported(id),
        },
        "thm63" => match inst {
            Instance::Hopf(q) => {
                let hp = &q.params;
                let round = !hp.torus
                    && hp.lambda == 0.0
                    && hp.xi_lambda == 0.0
                    && hp.isotropy_break == 0.0
                    && hp.xi_perturb == 0.0
                    && hp.metric_break == 0.0;
                check_thm63(q, ctx, round.then(|| 4.0 / (hp.radius * hp.radius)))
            }
            Instance::Product(q) => check_thm63(q, ctx, Some(1.0 / (q.radius * q.radius))),
            _ => unsupported(id),
        },
        "oneill" => match inst {
            Instance::Hopf(q) => check_oneill(q, ctx),
            Instance::Product(q) => check_oneill(q, ctx),
            _ => unsupported(id),
        },
        "localization" => match inst {
            Instance::Hopf(q) => check_localization_quotient(q, ctx),
            Instance::Product(q) => check_localization_quotient(q, ctx),
            Instance::Section(sd) => check_localization_section(sd, ctx),
            _ => unsupported(id),
        },
        "phi_closed_form" => match inst {
            Instance::Hopf(q) => check_phi_closed_form(q, ctx),
            Instance::Product(q) => check_phi_closed_form(q, ctx),
            _ => unsupported(id),
        },
        "thm65" => match inst {
            Instance::Section(sd) => {
                let round = match sd.shape {
                    SectionShape::Sphere { radius } if sd.warp == 0.0 => Some(1.0 / (radius * radius)),
                    _ => None,
                };
                check_thm65(sd, ctx, round)
            }
            _ => unsupported(id),
        },
        "gauss" => match inst {
            Instance::Section(sd) => check_gauss(sd, ctx),
            _ => unsupported(id),
        },
        "gk" => match inst {
            Instance::Product(b) => check_gk(b, ctx),
            Instance::Surface(b) => check_gk(b, ctx),
            Instance::Kahler(b) => check_gk(b, ctx),
            _ => unsupported(id),
        },
        "gk_reduce" => match inst {
            Instance::Product(q) => check_gk_reduce(q, ctx),
            Instance::Kahler(q) => check_gk_reduce(q, ctx),
            _ => unsupported(id),
        },
        _ => unsupported(id),
    }
}

fn record(id: &str, outcome: CheckResult) -> CheckRecord {
    match outcome {
        Ok(o) => {
            let ok = o.residual.is_finite() && o.residual <= o.tolerance;
            let status = if o.exploratory {
                Status::Exploratory
            } else if ok {
                Status::Pass
            } else {
                Status::Fail
            };
            CheckRecord {
                id: id.into(),
                points: o.points,
                max_residual: o.residual.is_finite().then_some(o.residual),
                tolerance: o.tolerance,
                status,
                value: o.value,
                detail: o.detail,
            }
        }
        Err(e) => CheckRecord {
            id: id.into(),
            points: 0,
            max_residual: None,
            tolerance: 0.0,
            status: Status::Fail,
            value: None,
            detail: Some(e.to_string()),
        },
    }
}

/// Conditions that make a check meaningless for a parameter choice, as
/// opposed to failing it.
fn precondition(id: &str, inst: &Instance) -> Option<&'static str> {
    match (id, inst) {
        ("oneill", Instance::Hopf(q)) if q.params.lambda != 0.0 || q.params.xi_lambda != 0.0 || q.params.torus => {
            Some("O'Neill's formula needs H = 0 and ξ = 0")
        }
        ("gauss", Instance::Section(sd)) if sd.flux != 0.0 => Some("the Gauss equation needs H = 0"),
        ("euler", Instance::Torus(t)) if t.chart().dim() % 2 == 1 => Some("the Euler density needs even dimension"),
        _ => None,
    }
}

fn run_checks(inst: &Instance, ids: &[&str], p: &BTreeMap<String, f64>, ctx: &Ctx) -> Vec<CheckRecord> {
    let one = |(k, id): (usize, &&str)| {
        let sub = Ctx { seed: ctx.seed.wrapping_add(7919 * k as u64), ..*ctx };
        record(id, run_check(inst, id, p, &sub))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ids.par_iter().enumerate().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ids.iter().enumerate().map(one).collect()
    }
}

/// Schema validation plus the extended-action dry run, without running any
/// check.
pub fn validate(cfg: &ScenarioConfig) -> Result<(), RunError> {
    let info = cfg.validate()?;
    let params = cfg.resolved_parameters()?;
    let inst = build(info.name, &params)?;
    count(&params, "samples", 1, 10_000)?;
    for id in &cfg.checks {
        if let Some(why) = precondition(id, &inst) {
            return Err(RunError::Config(format!("check `{id}`: {why}")));
        }
    }
    setup_instance(&inst, cfg.seed, cfg.tolerances.identity.unwrap_or(DEFAULT_IDENTITY_TOL))
}

fn setup_instance(inst: &Instance, seed: u64, tol: f64) -> Result<(), RunError> {
    match inst {
        Instance::Hopf(q) => setup(q, seed, tol),
        Instance::Product(q) => setup(q, seed, tol),
        Instance::Kahler(q) => setup(q, seed, tol),
        _ => Ok(()),
    }
}

/// Caps the worker threads used for check evaluation. Results do not depend
/// on it. Only the first call has an effect.
pub fn configure_jobs(jobs: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
}

/// Builds the scenario, validates its action, runs the requested checks and
/// assembles the report. Check failures are reported, not returned as errors.
pub fn run(cfg: &ScenarioConfig) -> Result<ScenarioReport, RunError> {
    let info = cfg.validate()?;
    let params = cfg.resolved_parameters()?;
    let inst = build(info.name, &params)?;
    let ctx = Ctx {
        samples: count(&params, "samples", 1, 10_000)?,
        seed: cfg.seed,
        identity: cfg.tolerances.identity.unwrap_or(DEFAULT_IDENTITY_TOL),
        cross: cfg.tolerances.cross.unwrap_or(DEFAULT_CROSS_TOL),
        euler: cfg.tolerances.euler,
    };
    let explicit = !cfg.checks.is_empty();
    let requested: Vec<&str> =
        if explicit { cfg.checks.iter().map(String::as_str).collect() } else { info.checks.to_vec() };
    let mut ids = Vec::new();
    for id in requested {
        match precondition(id, &inst) {
            Some(why) if explicit => return Err(RunError::Config(format!("check `{id}`: {why}"))),
            Some(_) => {}
            None => ids.push(id),
        }
    }
    let determinism = ids.contains(&"determinism");
    ids.retain(|id| *id != "determinism");

    setup_instance(&inst, cfg.seed, ctx.identity)?;

    let mut checks = run_checks(&inst, &ids, &params, &ctx);
    if determinism {
        let again = run_checks(&inst, &ids, &params, &ctx);
        let mismatches = checks
            .iter()
            .zip(&again)
            .filter(|(a, b)| a.max_residual.map(f64::to_bits) != b.max_residual.map(f64::to_bits) || a.value.map(f64::to_bits) != b.value.map(f64::to_bits))
            .count();
        checks.push(CheckRecord {
            id: "determinism".into(),
            points: again.len(),
            max_residual: Some(mismatches as f64),
            tolerance: 0.0,
            status: if mismatches == 0 { Status::Pass } else { Status::Fail },
            value: None,
            detail: None,
        });
    }
    let status = if checks.iter().any(|c| c.status == Status::Fail) { Status::Fail } else { Status::Pass };
    Ok(ScenarioReport {
        version: REPORT_VERSION.into(),
        scenario: info.name.into(),
        parameters: params,
        seed: cfg.seed,
        checks,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(name: &str, params: &[(&str, f64)], checks: &[&str]) -> ScenarioConfig {
        let mut c = ScenarioConfig::new(name);
        c.parameters = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        c.checks = checks.iter().map(|s| s.to_string()).collect();
        c
    }

    fn only(report: &ScenarioReport, id: &str) -> CheckRecord {
        report.checks.iter().find(|c| c.id == id).cloned().unwrap()
    }

    #[test]
    fn registry_is_consistent() {
        for s in SCENARIOS {
            for id in s.checks {
                assert!(CHECKS.iter().any(|c| c.id == *id), "{} lists unknown check {id}", s.name);
            }
        }
        assert!(scenario_info("hopf").unwrap().checks.contains(&"thm63"));
        assert!(scenario_info("sphere_in_flat").unwrap().checks.contains(&"thm65"));
    }

    #[test]
    fn flat_torus_euler_is_zero() {
        let r = run(&cfg("flat_torus", &[], &["euler"])).unwrap();
        assert_eq!(r.status, Status::Pass);
        assert_eq!(only(&r, "euler").value, Some(0.0));
    }

    #[test]
    fn round_sphere_euler_at_order_24() {
        let r = run(&cfg("round_sphere", &[("order", 24.0)], &["euler"])).unwrap();
        let c = only(&r, "euler");
        assert_eq!(c.status, Status::Pass);
        assert!((c.value.unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn hopf_reduction_has_sectional_four() {
        let r = run(&cfg("hopf", &[("lambda", 0.0)], &["thm63"])).unwrap();
        let c = only(&r, "thm63");
        assert_eq!(c.status, Status::Pass);
        assert!((c.value.unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn unknown_names_are_config_errors() {
        let e = run(&cfg("hopf", &[("lamda", 1.0)], &[])).unwrap_err();
        assert!(matches!(e, RunError::Config(ref m) if m.contains("lamda")));
        assert_eq!(e.exit_code(), 2);
        assert!(matches!(run(&cfg("hopff", &[], &[])), Err(RunError::Config(_))));
        assert!(matches!(run(&cfg("hopf", &[], &["thm65"])), Err(RunError::Config(_))));
        assert!(matches!(run(&cfg("hopf", &[("lambda", 1.0)], &["oneill"])), Err(RunError::Config(_))));
        assert!(ScenarioConfig::from_json(r#"{"scenario": "hopf", "paramters": {}}"#).is_err());
        let e = ScenarioConfig::from_json("{\n  \"scenario\": 3\n}").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn broken_action_is_a_scenario_error() {
        assert!(validate(&cfg("hopf", &[("lambda", 1.3)], &[])).is_ok());
        assert!(matches!(validate(&cfg("hopf", &[("xi_shift", 0.3)], &[])), Err(RunError::Scenario(_))));
        let e = run(&cfg("hopf", &[("xi_shift", 0.3)], &[])).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("closure d xi_a = i_{V_a} H"), "{e}");
    }

    #[test]
    fn check_failures_are_reported_not_raised() {
        let r = run(&cfg("s3xs1_gk", &[("perturb", 0.1)], &["gk"])).unwrap();
        assert_eq!(r.status, Status::Fail);
        assert!(!r.passed());
        let r = run(&cfg("kahler_hopf", &[("skew", 0.3)], &["gk_reduce"])).unwrap();
        assert_eq!(only(&r, "gk_reduce").status, Status::Fail);
    }

    #[test]
    fn euler_with_flux_is_exploratory() {
        let r = run(&cfg("sphere_product", &[("flux", 0.4), ("order", 4.0)], &["euler"])).unwrap();
        assert_eq!(only(&r, "euler").status, Status::Exploratory);
        assert!(r.passed());
    }

    #[test]
    fn reports_are_reproducible_and_round_trip() {
        let c = cfg("hopf_flux", &[("samples", 3.0)], &[]);
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let back: ScenarioReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
        assert!(a.to_text().ends_with("status pass\n"));
        let other = run(&ScenarioConfig { seed: 7, ..c }).unwrap();
        assert_ne!(other.to_json(), a.to_json());
    }
}
