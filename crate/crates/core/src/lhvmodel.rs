//! Local hidden-variable models with two angular hidden variables.
//!
//! Each photon of a pair carries a polarization angle χ_j. A model is a pair
//! (ρ, P): the joint density `ρ(χ1 − χ2)` of the hidden angles and the
//! detection probability `P(χ − φ)` behind a polarizer at φ. Both are even
//! and π-periodic, `ρ ≥ 0` with `∫ρ(x)dx = 1/π` over one period, and
//! `0 ≤ P ≤ 1`. The detection probabilities are
//!
//! ```text
//! p12(φ1, φ2) = ∫∫ ρ(χ1 − χ2) P(χ1 − φ1) P(χ2 − φ2) dχ1 dχ2
//! p_j         = ∫∫ ρ(χ1 − χ2) P(χ_j − φ_j)       dχ1 dχ2
//! ```
//!
//! over `[0, π)²`. Substituting `x = χ1 − χ2` turns p12 into
//! `∫ ρ(x) K(x − φ) dx` with `φ = φ1 − φ2` and the autocorrelation
//! `K(y) = ∫ P(t) P(t − y) dt`, which is how it is evaluated here.

use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::Angle;
use crate::data::{CoincidenceDataset, ContextError, DataError, DataPoint, Family};
use crate::quadrature::{integrate, QuadError, DEFAULT_TOL};

/// Tolerance of the `∫ρ = 1/π` check.
pub const NORMALIZATION_TOL: f64 = 1e-8;
/// Tolerance of the evenness checks.
/// Rounding allowance for densities that touch zero.
pub const NONNEGATIVITY_TOL: f64 = 1e-15;

pub const EVENNESS_TOL: f64 = 1e-12;
pub const MIN_VALIDATION_POINTS: usize = 64;
/// Grid used when a model is validated on construction.
pub const DEFAULT_VALIDATION_POINTS: usize = 1025;

const INNER_TOL: f64 = 1e-11;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model failed validation: {0}")]
    Invalid(ValidationReport),
    #[error("{0}")]
    BadParameter(String),
    #[error("validation needs at least {MIN_VALIDATION_POINTS} grid points, got {0}")]
    GridTooSmall(usize),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Family(#[from] ContextError),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Maps `x` into one period `[−π/2, π/2)`.
fn wrap(x: f64) -> f64 {
    (x + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2
}

/// Reduces cuts of a π-periodic integrand into `[start, start + π)` and adds
/// the images one period either side, so a cut on either end of the range
/// marks both ends.
fn periodic_cuts(cuts: &[f64], start: f64) -> Vec<f64> {
    cuts.iter()
        .flat_map(|&c| {
            let r = start + (c - start).rem_euclid(PI);
            [r - PI, r, r + PI]
        })
        .collect()
}

/// Samples of a π-periodic function on `n` equally spaced points covering
/// `[−π/2, π/2]` (both ends included), linearly interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    samples: Vec<f64>,
}

impl GridFunction {
    pub fn new(samples: Vec<f64>) -> Result<Self, ModelError> {
        if samples.len() < 2 {
            return Err(ModelError::BadParameter("grid needs at least 2 samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::BadParameter("grid samples must be finite".into()));
        }
        Ok(GridFunction { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    fn step(&self) -> f64 {
        PI / (self.samples.len() - 1) as f64
    }

    pub fn value(&self, x: f64) -> f64 {
        // Both ends of the sampled range are kept, so π/2 reads the last sample.
        let x = if (-FRAC_PI_2..=FRAC_PI_2).contains(&x) { x } else { wrap(x) };
        let u = (x + FRAC_PI_2) / self.step();
        let last = self.samples.len() - 1;
        let i = (u.floor() as usize).min(last - 1);
        let t = u - i as f64;
        self.samples[i] * (1.0 - t) + self.samples[i + 1] * t
    }

    /// Interior nodes, where the interpolant has kinks.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.step();
        (1..self.samples.len() - 1).map(|i| -FRAC_PI_2 + i as f64 * h).collect()
    }

    fn scale(&mut self, factor: f64) {
        for s in &mut self.samples {
            *s *= factor;
        }
    }
}

/// The trigonometric density `(1/π²)[1 + (1 + ε) cos 2x + ε cos 4x]`.
/// It factors as `(1/π²)(1 + cos 2x)(1 − ε + 2ε cos 2x)` and is non-negative
/// exactly for ε in `[0, 1/3]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lhv4Density {
    epsilon: f64,
}

impl Lhv4Density {
    pub const MAX_EPSILON: f64 = 1.0 / 3.0;

    pub fn new(epsilon: f64) -> Result<Self, ModelError> {
        if !(0.0..=Self::MAX_EPSILON).contains(&epsilon) {
            return Err(ModelError::BadParameter(format!("LHV4 epsilon {epsilon} outside [0, 1/3]")));
        }
        Ok(Lhv4Density { epsilon })
    }

    /// The same functional form without the range check, for probing
    /// invalid parameters through validation.
    pub fn form(epsilon: f64) -> Self {
        Lhv4Density { epsilon }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn in_range(&self) -> bool {
        (0.0..=Self::MAX_EPSILON).contains(&self.epsilon)
    }

    pub fn value(&self, x: f64) -> f64 {
        let e = self.epsilon;
        (1.0 + (1.0 + e) * (2.0 * x).cos() + e * (4.0 * x).cos()) / (PI * PI)
    }

    /// Minimum over x, from the factored form (`c = cos 2x` in `[−1, 1]`).
    pub fn minimum(&self) -> f64 {
        let e = self.epsilon;
        let g = |c: f64| (1.0 + c) * (1.0 - e + 2.0 * e * c) / (PI * PI);
        let mut m = g(-1.0).min(g(1.0));
        if e != 0.0 {
            // Vertex of the quadratic in c.
            let c = -(1.0 + e) / (4.0 * e);
            if (-1.0..=1.0).contains(&c) {
                m = m.min(g(c));
            }
        }
        m
    }
}

/// Hidden-angle density ρ(x), x = χ1 − χ2.
#[derive(Clone, Debug, PartialEq)]
pub enum Density {
    /// `1/π²`.
    Uniform,
    Lhv4(Lhv4Density),
    Grid(GridFunction),
}

impl Density {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Density::Uniform => 1.0 / (PI * PI),
            Density::Lhv4(d) => d.value(x),
            Density::Grid(g) => g.value(x),
        }
    }

    /// Points in `[−π/2, π/2)` where ρ is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Density::Grid(g) => g.nodes(),
            _ => Vec::new(),
        }
    }

    /// `∫ρ` over one period.
    pub fn integral(&self) -> Result<f64, QuadError> {
        integrate(|x| self.value(x), -FRAC_PI_2, FRAC_PI_2, &self.breakpoints(), 1e-12)
    }
}

/// Detection probability P(χ − φ).
#[derive(Clone, Debug, PartialEq)]
pub enum Detection {
    /// `P ≡ q`.
    Constant {
        q: f64,
    },
    /// `P(x) = η_d cos² x`.
    Cos2 {
        eta_d: f64,
    },
    /// `P(x) = η_d` when the folded angle is within `half_width`, else 0.
    Window {
        eta_d: f64,
        half_width: Angle,
    },
    Grid(GridFunction),
}

impl Detection {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Detection::Constant { q } => *q,
            Detection::Cos2 { eta_d } => {
                let c = x.cos();
                eta_d * c * c
            }
            Detection::Window { eta_d, half_width } => {
                if wrap(x).abs() <= half_width.radians() {
                    *eta_d
                } else {
                    0.0
                }
            }
            Detection::Grid(g) => g.value(x),
        }
    }

    /// Points in `[−π/2, π/2)` where P jumps.
    pub fn jumps(&self) -> Vec<f64> {
        match self {
            Detection::Window { half_width, .. } if half_width.radians() < FRAC_PI_2 => {
                let w = half_width.radians();
                vec![-w, w]
            }
            _ => Vec::new(),
        }
    }

    /// Points in `[−π/2, π/2)` where P is not smooth (jumps and kinks).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Detection::Grid(g) => g.nodes(),
            _ => self.jumps(),
        }
    }
}

/// An unvalidated model description.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub rho: Density,
    pub detection: Detection,
    pub family: Family,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Size of the worst violation found (0 when passed).
    pub worst: f64,
    /// Where the worst violation occurred, in degrees.
    pub location_deg: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub grid_points: usize,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            return write!(f, "pass");
        }
        let msgs: Vec<String> = self
            .failures()
            .map(|c| match c.location_deg {
                Some(loc) => format!("{} failed ({}; worst {:e} at {:.3}°)", c.name, c.detail, c.worst, loc),
                None => format!("{} failed ({}; worst {:e})", c.name, c.detail, c.worst),
            })
            .collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Worst value of `score` (larger is worse) over the grid, with its location.
fn worst_on_grid(xs: &[f64], score: impl Fn(f64) -> f64) -> (f64, f64) {
    xs.iter().map(|&x| (score(x), x)).fold((f64::NEG_INFINITY, 0.0), |acc, s| if s.0 > acc.0 { s } else { acc })
}

/// Checks ρ ≥ 0, ρ even, `∫ρ = 1/π`, `0 ≤ P ≤ 1`, P even, and (for the
/// trigonometric density) the parameter range, on `grid_points` points
/// spanning `[−π/2, π/2]`.
pub fn validate_model(m: &ModelSpec, grid_points: usize) -> Result<ValidationReport, ModelError> {
    if grid_points < MIN_VALIDATION_POINTS {
        return Err(ModelError::GridTooSmall(grid_points));
    }
    let xs: Vec<f64> = (0..grid_points).map(|i| -FRAC_PI_2 + PI * i as f64 / (grid_points - 1) as f64).collect();
    let mut checks = Vec::new();
    let rho = |x: f64| m.rho.value(x);
    let p = |x: f64| m.detection.value(x);

    let (neg, at) = worst_on_grid(&xs, |x| -rho(x));
    checks.push(Check {
        name: "rho_nonnegative",
        passed: neg <= NONNEGATIVITY_TOL,
        worst: if neg > NONNEGATIVITY_TOL { neg } else { 0.0 },
        location_deg: (neg > NONNEGATIVITY_TOL).then(|| at.to_degrees()),
        detail: format!("rho(x) >= -{NONNEGATIVITY_TOL:e}"),
    });

    let (odd, at) = worst_on_grid(&xs, |x| (rho(x) - rho(-x)).abs());
    checks.push(Check {
        name: "rho_even",
        passed: odd <= EVENNESS_TOL,
        worst: if odd > EVENNESS_TOL { odd } else { 0.0 },
        location_deg: (odd > EVENNESS_TOL).then(|| at.to_degrees()),
        detail: format!("|rho(x) - rho(-x)| <= {EVENNESS_TOL:e}"),
    });

    let integral = m.rho.integral()?;
    let dev = (integral - 1.0 / PI).abs();
    checks.push(Check {
        name: "rho_normalized",
        passed: dev <= NORMALIZATION_TOL,
        worst: if dev > NORMALIZATION_TOL { dev } else { 0.0 },
        location_deg: None,
        detail: format!("integral {integral} vs 1/pi within {NORMALIZATION_TOL:e}"),
    });

    let (out, at) = worst_on_grid(&xs, |x| {
        let v = p(x);
        (-v).max(v - 1.0)
    });
    checks.push(Check {
        name: "detection_bounds",
        passed: out <= 0.0,
        worst: out.max(0.0),
        location_deg: (out > 0.0).then(|| at.to_degrees()),
        detail: "0 <= P(x) <= 1".into(),
    });

    let (odd, at) = worst_on_grid(&xs, |x| (p(x) - p(-x)).abs());
    checks.push(Check {
        name: "detection_even",
        passed: odd <= EVENNESS_TOL,
        worst: if odd > EVENNESS_TOL { odd } else { 0.0 },
        location_deg: (odd > EVENNESS_TOL).then(|| at.to_degrees()),
        detail: format!("|P(x) - P(-x)| <= {EVENNESS_TOL:e}"),
    });

    if let Density::Lhv4(d) = &m.rho {
        let e = d.epsilon();
        checks.push(Check {
            name: "lhv4_epsilon_range",
            passed: d.in_range(),
            worst: if d.in_range() { 0.0 } else { (e - Lhv4Density::MAX_EPSILON).max(-e) },
            location_deg: None,
            detail: format!("epsilon {e} in [0, 1/3]"),
        });
    }

    Ok(ValidationReport { grid_points, checks })
}

/// A model that has passed [`validate_model`].
#[derive(Clone, Debug, PartialEq)]
pub struct LhvModel {
    spec: ModelSpec,
}

impl LhvModel {
    pub fn new(spec: ModelSpec) -> Result<Self, ModelError> {
        let report = validate_model(&spec, DEFAULT_VALIDATION_POINTS)?;
        if !report.passed() {
            return Err(ModelError::Invalid(report));
        }
        Ok(LhvModel { spec })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn rho(&self) -> &Density {
        &self.spec.rho
    }

    pub fn detection(&self) -> &Detection {
        &self.spec.detection
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    /// `K(y) = ∫_0^π P(t) P(t − y) dt`.
    fn autocorrelation(&self, y: f64) -> Result<f64, QuadError> {
        let det = &self.spec.detection;
        let cuts: Vec<f64> = det.breakpoints().iter().flat_map(|&b| [b, y + b]).collect();
        integrate(|t| det.value(t) * det.value(t - y), 0.0, PI, &periodic_cuts(&cuts, 0.0), INNER_TOL)
    }

    /// Joint detection probability for polarizers at `phi1`, `phi2`.
    pub fn coincidence_probability(&self, phi1: Angle, phi2: Angle) -> Result<f64, ModelError> {
        let phi = phi1.radians() - phi2.radians();
        let mut cuts = self.spec.rho.breakpoints();
        // K has kinks where jumps of the two P factors line up.
        let jumps = self.spec.detection.jumps();
        for bi in &jumps {
            for bj in &jumps {
                cuts.push(phi + bi - bj);
            }
        }
        let cuts = periodic_cuts(&cuts, -FRAC_PI_2);
        let inner_error = RefCell::new(None);
        let value = integrate(
            |x| match self.autocorrelation(x - phi) {
                Ok(k) => self.spec.rho.value(x) * k,
                Err(e) => {
                    inner_error.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            },
            -FRAC_PI_2,
            FRAC_PI_2,
            &cuts,
            DEFAULT_TOL,
        );
        if let Some(e) = inner_error.into_inner() {
            return Err(e.into());
        }
        Ok(value?)
    }

    /// Single detection probability behind a polarizer at `phi`; the density
    /// integrates out, leaving `∫ρ · ∫P`.
    pub fn single_probability(&self, phi: Angle) -> Result<f64, ModelError> {
        let det = &self.spec.detection;
        let cuts: Vec<f64> = det.breakpoints().iter().map(|b| b + phi.radians()).collect();
        let p_int = integrate(|t| det.value(t - phi.radians()), 0.0, PI, &periodic_cuts(&cuts, 0.0), DEFAULT_TOL)?;
        Ok(self.spec.rho.integral()? * p_int)
    }
}

pub fn coincidence_probability(m: &LhvModel, phi1: Angle, phi2: Angle) -> Result<f64, ModelError> {
    m.coincidence_probability(phi1, phi2)
}

pub fn single_probability(m: &LhvModel, phi: Angle) -> Result<f64, ModelError> {
    m.single_probability(phi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AngleProbabilities {
    pub angle_deg: f64,
    pub p12: f64,
    pub p1: f64,
    pub p2: f64,
}

/// p12, p1, p2 at each polarizer difference, with Alice at φ and Bob at 0.
pub fn model_probabilities(m: &LhvModel, angles: &[Angle]) -> Result<Vec<AngleProbabilities>, ModelError> {
    angles
        .iter()
        .map(|&a| {
            Ok(AngleProbabilities {
                angle_deg: a.degrees(),
                p12: m.coincidence_probability(a, Angle::ZERO)?,
                p1: m.single_probability(a)?,
                p2: m.single_probability(Angle::ZERO)?,
            })
        })
        .collect()
}

/// Exact model rates `R0 · p12(φ_k)` with zero sigma.
pub fn model_dataset(m: &LhvModel, angles: &[Angle], production_rate: f64) -> Result<CoincidenceDataset, ModelError> {
    if !(production_rate > 0.0) {
        return Err(ModelError::BadParameter(format!("production rate must be positive, got {production_rate}")));
    }
    let points = angles
        .iter()
        .map(|&a| Ok(DataPoint::new(a, production_rate * m.coincidence_probability(a, Angle::ZERO)?, 0.0)))
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(CoincidenceDataset::new(points, format!("{} model", m.family()))?)
}

/// Exact cosine-law rates `mean [1 + v cos(2φ + ψ)]` with zero sigma.
pub fn quantum_dataset(v: f64, psi: Angle, mean: f64, angles: &[Angle]) -> Result<CoincidenceDataset, ModelError> {
    if v.abs() > 1.0 {
        return Err(ModelError::BadParameter(format!("|v| must not exceed 1, got {v}")));
    }
    if !(mean > 0.0) {
        return Err(ModelError::BadParameter(format!("mean rate must be positive, got {mean}")));
    }
    let points = angles
        .iter()
        .map(|&a| {
            let r = mean * (1.0 + v * (2.0 * a.radians() + psi.radians()).cos());
            DataPoint::new(a, r.max(0.0), 0.0)
        })
        .collect();
    Ok(CoincidenceDataset::new(points, "quantum cosine law")?)
}

/// `n` equally spaced angles `πk/n`.
pub fn uniform_grid(n: usize) -> Vec<Angle> {
    (0..n).map(|k| Angle::from_radians(PI * k as f64 / n as f64)).collect()
}

// ---------------------------------------------------------------------------
// JSON model files
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhoFile {
    Uniform,
    Lhv4 {
        epsilon: f64,
    },
    /// Equally spaced samples over [−90°, 90°].
    Grid {
        samples: Vec<f64>,
        #[serde(default)]
        normalize: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectionFile {
    Constant { q: f64 },
    Cos2 { eta_d: f64 },
    Window { eta_d: f64, w_deg: f64 },
    Grid { samples: Vec<f64> },
}

/// On-disk model description:
/// `{"rho": {"kind": ...}, "detection": {"kind": ...}, "family": "LHV4"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub rho: RhoFile,
    pub detection: DetectionFile,
    #[serde(default = "default_family")]
    pub family: String,
}

fn default_family() -> String {
    "LHV1".into()
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Builds the (unvalidated) spec. Grid densities marked `normalize` are
    /// rescaled to `∫ρ = 1/π` here.
    pub fn to_spec(&self) -> Result<ModelSpec, ModelError> {
        let rho = match &self.rho {
            RhoFile::Uniform => Density::Uniform,
            RhoFile::Lhv4 { epsilon } => Density::Lhv4(Lhv4Density::form(*epsilon)),
            RhoFile::Grid { samples, normalize } => {
                let mut g = GridFunction::new(samples.clone())?;
                if *normalize {
                    let total = Density::Grid(g.clone()).integral()?;
                    if !(total > 0.0) {
                        return Err(ModelError::BadParameter("cannot normalize a density with zero integral".into()));
                    }
                    g.scale(1.0 / (PI * total));
                }
                Density::Grid(g)
            }
        };
        let detection = match &self.detection {
            DetectionFile::Constant { q } => Detection::Constant { q: *q },
            DetectionFile::Cos2 { eta_d } => Detection::Cos2 { eta_d: *eta_d },
            DetectionFile::Window { eta_d, w_deg } => {
                if !(0.0..=90.0).contains(w_deg) {
                    return Err(ModelError::BadParameter(format!("window half-width {w_deg}° outside [0°, 90°]")));
                }
                Detection::Window { eta_d: *eta_d, half_width: Angle::from_degrees(*w_deg) }
            }
            DetectionFile::Grid { samples } => Detection::Grid(GridFunction::new(samples.clone())?),
        };
        Ok(ModelSpec { rho, detection, family: Family::from_str(&self.family)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model(rho: Density, detection: Detection) -> LhvModel {
        LhvModel::new(ModelSpec { rho, detection, family: Family::Lhv1 }).unwrap()
    }

    #[test]
    fn lhv4_validates_inside_range() {
        let spec = ModelSpec {
            rho: Density::Lhv4(Lhv4Density::new(0.2).unwrap()),
            detection: Detection::Cos2 { eta_d: 0.8 },
            family: Family::Lhv4,
        };
        let r = validate_model(&spec, 256).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.to_string(), "pass");
    }

    #[test]
    fn uniform_density_validates() {
        let spec = ModelSpec { rho: Density::Uniform, detection: Detection::Constant { q: 0.5 }, family: Family::Lhv1 };
        assert!(validate_model(&spec, 64).unwrap().passed());
        assert!(matches!(validate_model(&spec, 10), Err(ModelError::GridTooSmall(10))));
    }

    #[test]
    fn lhv4_outside_range_fails_nonnegativity() {
        let spec = ModelSpec {
            rho: Density::Lhv4(Lhv4Density::form(0.5)),
            detection: Detection::Cos2 { eta_d: 1.0 },
            family: Family::Lhv4,
        };
        let r = validate_model(&spec, 1025).unwrap();
        assert!(!r.passed());
        let neg = r.checks.iter().find(|c| c.name == "rho_nonnegative").unwrap();
        assert!(!neg.passed);
        let loc = neg.location_deg.unwrap().abs();
        // Minimum of (1 + c)(1 − ε + 2εc) at c = cos 2x = −3/4.
        assert_abs_diff_eq!(loc, (-0.75f64).acos().to_degrees() / 2.0, epsilon = 0.2);
        assert_abs_diff_eq!(neg.worst, 0.0625 / (PI * PI), epsilon = 1e-6);
        assert!(r.to_string().contains("rho_nonnegative"));
        assert!(matches!(LhvModel::new(spec), Err(ModelError::Invalid(_))));
        assert!(Lhv4Density::new(0.5).is_err());
    }

    #[test]
    fn lhv4_minimum_sign_boundary() {
        for e in [0.0, 0.1, 0.2, 1.0 / 3.0] {
            assert!(Lhv4Density::form(e).minimum() >= -1e-15, "{e}");
        }
        for e in [0.4, 0.5] {
            assert!(Lhv4Density::form(e).minimum() < 0.0, "{e}");
        }
        // Factored minimum against a dense scan.
        for e in [0.05, 0.25, 0.45] {
            let d = Lhv4Density::form(e);
            let scan =
                (0..=100_000).map(|i| d.value(-FRAC_PI_2 + PI * i as f64 / 100_000.0)).fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(d.minimum(), scan, epsilon = 1e-9);
        }
    }

    #[test]
    fn bad_detection_and_odd_density() {
        let spec = ModelSpec { rho: Density::Uniform, detection: Detection::Cos2 { eta_d: 1.3 }, family: Family::Lhv1 };
        let r = validate_model(&spec, 128).unwrap();
        assert!(!r.checks.iter().find(|c| c.name == "detection_bounds").unwrap().passed);

        let n = 65;
        let samples: Vec<f64> = (0..n).map(|i| 1.0 / (PI * PI) + 0.01 * (i as f64 / 64.0 - 0.5)).collect();
        let spec = ModelSpec {
            rho: Density::Grid(GridFunction::new(samples).unwrap()),
            detection: Detection::Constant { q: 1.0 },
            family: Family::Lhv1,
        };
        let r = validate_model(&spec, 128).unwrap();
        assert!(!r.checks.iter().find(|c| c.name == "rho_even").unwrap().passed);
    }

    #[test]
    fn unnormalized_grid_and_autonormalize() {
        let file = ModelFile {
            rho: RhoFile::Grid { samples: vec![0.0, 0.5, 1.0, 0.5, 0.0], normalize: false },
            detection: DetectionFile::Cos2 { eta_d: 0.9 },
            family: "LHV1".into(),
        };
        let spec = file.to_spec().unwrap();
        let r = validate_model(&spec, 64).unwrap();
        assert!(!r.checks.iter().find(|c| c.name == "rho_normalized").unwrap().passed);

        let file = ModelFile { rho: RhoFile::Grid { samples: vec![0.0, 0.5, 1.0, 0.5, 0.0], normalize: true }, ..file };
        let spec = file.to_spec().unwrap();
        assert!(validate_model(&spec, 64).unwrap().passed());
        assert_abs_diff_eq!(spec.rho.integral().unwrap(), 1.0 / PI, epsilon = 1e-14);
    }

    #[test]
    fn uniform_density_factorizes() {
        let m = model(Density::Uniform, Detection::Cos2 { eta_d: 0.7 });
        let p1 = m.single_probability(Angle::ZERO).unwrap();
        assert_abs_diff_eq!(p1, 0.35, epsilon = 1e-10);
        for deg in [0.0, 30.0, 90.0] {
            let p12 = m.coincidence_probability(Angle::from_degrees(deg), Angle::ZERO).unwrap();
            assert_abs_diff_eq!(p12, p1 * p1, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_probability_examples() {
        let m = model(Density::Uniform, Detection::Constant { q: 0.37 });
        assert_abs_diff_eq!(m.single_probability(Angle::from_degrees(12.0)).unwrap(), 0.37, epsilon = 1e-12);
        let m = model(Density::Lhv4(Lhv4Density::new(0.3).unwrap()), Detection::Constant { q: 1.0 });
        assert_abs_diff_eq!(m.single_probability(Angle::ZERO).unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            m.coincidence_probability(Angle::ZERO, Angle::from_degrees(33.0)).unwrap(),
            1.0,
            epsilon = 1e-9
        );
        let m = model(
            Density::Lhv4(Lhv4Density::new(0.1).unwrap()),
            Detection::Window { eta_d: 0.9, half_width: Angle::from_degrees(40.0) },
        );
        // (1/π) ∫P = η_d · 2w/π.
        let expected = 0.9 * 80.0 / 180.0;
        for deg in [0.0, 17.0, 95.0] {
            assert_abs_diff_eq!(m.single_probability(Angle::from_degrees(deg)).unwrap(), expected, epsilon = 1e-10);
        }
    }

    /// Uniform density and a window: K(y) is the overlap length of two
    /// windows, so p12 has a closed form.
    #[test]
    fn window_overlap_closed_form() {
        let w = 30f64.to_radians();
        let m = model(Density::Uniform, Detection::Window { eta_d: 1.0, half_width: Angle::from_radians(w) });
        for deg in [0.0, 20.0, 45.0, 60.0, 75.0, 90.0] {
            let p12 = m.coincidence_probability(Angle::from_degrees(deg), Angle::ZERO).unwrap();
            // Uniform ρ factorizes, p12 = p1² regardless of angle.
            assert_abs_diff_eq!(p12, (2.0 * w / PI).powi(2), epsilon = 1e-9);
        }
    }

    #[test]
    fn quantum_dataset_examples() {
        let grid = uniform_grid(8);
        let d = quantum_dataset(0.9897, Angle::from_degrees(0.31), 4976.06, &grid).unwrap();
        assert_abs_diff_eq!(d.point_at(Angle::RIGHT).unwrap().rate, 51.3, epsilon = 0.5);
        let d = quantum_dataset(0.0, Angle::from_degrees(10.0), 12.0, &grid).unwrap();
        assert!(d.rates().all(|r| (r - 12.0).abs() < 1e-12));
        let d = quantum_dataset(1.0, Angle::ZERO, 12.0, &grid).unwrap();
        assert!(d.point_at(Angle::RIGHT).unwrap().rate.abs() < 1e-12);
        assert!(quantum_dataset(1.1, Angle::ZERO, 1.0, &grid).is_err());
    }

    #[test]
    fn model_dataset_examples() {
        let grid = uniform_grid(8);
        let m = model(Density::Uniform, Detection::Cos2 { eta_d: 0.8 });
        let d = model_dataset(&m, &grid, 1000.0).unwrap();
        let first = d.points()[0].rate;
        assert!(d.rates().all(|r| (r - first).abs() < 1e-6));
        let m = model(Density::Lhv4(Lhv4Density::new(0.2).unwrap()), Detection::Cos2 { eta_d: 0.8 });
        let a = model_dataset(&m, &grid, 1000.0).unwrap();
        let b = model_dataset(&m, &grid, 2000.0).unwrap();
        for (x, y) in a.rates().zip(b.rates()) {
            assert_abs_diff_eq!(y, 2.0 * x, epsilon = 1e-9);
        }
        assert!(model_dataset(&m, &grid, 0.0).is_err());
    }

    #[test]
    fn model_file_parsing() {
        let text = r#"{"rho": {"kind": "lhv4", "epsilon": 0.25},
                       "detection": {"kind": "window", "eta_d": 0.62, "w_deg": 50},
                       "family": "LHV4"}"#;
        let spec = ModelFile::from_json(text).unwrap().to_spec().unwrap();
        assert_eq!(spec.family, Family::Lhv4);
        assert!(matches!(spec.detection, Detection::Window { .. }));
        assert!(
            ModelFile::from_json(r#"{"rho": {"kind": "blob"}, "detection": {"kind": "cos2", "eta_d": 1}}"#).is_err()
        );
        let bad_family = r#"{"rho": {"kind": "uniform"}, "detection": {"kind": "cos2", "eta_d": 1}, "family": "LHV9"}"#;
        assert!(ModelFile::from_json(bad_family).unwrap().to_spec().is_err());
    }
}
