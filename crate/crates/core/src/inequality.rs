//! The LHV1 inequality `Δ_exp ≥ D(η)`.
//!
//! `Δ_exp` is the RMS deviation of normalized coincidence data from the
//! cosine law. `D(η)` is the smallest deviation any model of the LHV1 family
//! with detection efficiency η can show. It depends on η and on an auxiliary
//! parameter ε fixed by the visibility; both are available in two forms:
//!
//! * low-order: `ε ≈ (1/√2)(V − s)₊^{1/2}` with `s = sin²(πη/2)/(πη/2)²`, and
//!   `D ≈ (8√2/3π) √(2/(3η) − 1/2 − s²) ε³`, valid while ε is small;
//! * exact: ε is the root of [`epsilon_equation_lhs`]`(ε) = V/s`, and
//!   `D ≥ √2 sin³2ε / (3[(π − 2ε) cos 2ε + sin 2ε]) · sin²(πη)/(πη)²` holds
//!   for every ε.
//!
//! The model of the LHV2 family closest to quantum mechanics deviates from
//! the best cosine fit by the profile δ(φ) of [`DeviationProfile`].

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::angle::Angle;
use crate::data::{CoincidenceDataset, DataError, EfficiencyContext, Family};
use crate::fit::{fit_cosine, mean_rate, CosineFit, FitError, Weighting};
use crate::roots::{find_root, RootError};

/// Largest ε admitted by the exact solver's bracket.
pub const EPSILON_BRACKET_MAX: f64 = FRAC_PI_4 - 1e-6;

/// Imbalance tolerance of the exact ε equation.
pub const EPSILON_ROOT_TOL: f64 = 1e-10;

/// Above this ε the low-order bound is reported but flagged.
pub const LOW_ORDER_VALIDITY_LIMIT: f64 = 0.3;

pub const DEFAULT_SIGNIFICANCE_K: f64 = 3.0;

/// Visibilities above this are rejected; fits slightly above 1 are legitimate.
pub const VISIBILITY_CAP: f64 = 1.05;

#[derive(Debug, Error)]
pub enum InequalityError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("efficiency must lie in (0, 1], got {0}")]
    EtaOutOfRange(f64),
    #[error("visibility must lie in [0, {VISIBILITY_CAP}], got {0}")]
    VisibilityOutOfRange(f64),
    #[error("epsilon must lie in [0, π/4), got {0}")]
    EpsilonOutOfRange(f64),
    #[error(
        "no root of the epsilon equation below π/4: right side {rhs} exceeds the left side's \
         supremum {sup} on the bracket"
    )]
    NoRoot { rhs: f64, sup: f64 },
    #[error("root finder failed: {0}")]
    Root(#[from] RootError),
    #[error(
        "low-order D(η) undefined at η = {eta}: radicand {radicand} is negative; \
         use the lower bound instead"
    )]
    NegativeRadicand { eta: f64, radicand: f64 },
    #[error("alpha = {0} must be below 1 for an effective visibility")]
    AlphaTooLarge(f64),
    #[error(transparent)]
    Data(#[from] DataError),
}

fn check_eta(eta: f64) -> Result<(), InequalityError> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(InequalityError::EtaOutOfRange(eta))
    }
}

/// `sin²(x)/x²`, continuous at 0.
fn sinc_sq(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0
    } else {
        let s = x.sin() / x;
        s * s
    }
}

/// `sin²(πη/2)/(πη/2)²`, the visibility ceiling below which ε vanishes.
pub fn visibility_threshold(eta: f64) -> f64 {
    sinc_sq(PI * eta / 2.0)
}

/// Root-mean-square deviation of `R(φ_k)/⟨R⟩` from `1 + v cos(2φ_k + ψ)`,
/// with `ψ = 0` unless a phase is supplied. Needs a uniform angle grid.
pub fn delta_exp(d: &CoincidenceDataset, v: f64, use_phase: Option<Angle>) -> Result<f64, InequalityError> {
    if !(0.0..=VISIBILITY_CAP).contains(&v) {
        return Err(InequalityError::VisibilityOutOfRange(v));
    }
    let n = d.uniform_grid_size().ok_or(FitError::NonUniformGrid)?;
    let mean = mean_rate(d);
    if mean <= 0.0 {
        return Err(FitError::Domain("mean rate is zero".into()).into());
    }
    let psi = use_phase.map_or(0.0, Angle::radians);
    let ss: f64 = d
        .points()
        .iter()
        .map(|p| {
            let r = p.rate / mean - 1.0 - v * (2.0 * p.angle.radians() + psi).cos();
            r * r
        })
        .sum();
    Ok((ss / n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonMethod {
    Approximate,
    ExactRoot,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpsilonSolution {
    pub value: f64,
    pub method: EpsilonMethod,
    /// `|lhs(ε) − rhs|` at the returned root; zero for the low-order form.
    pub residual: f64,
}

/// Low-order ε: `(1/√2) (V − sin²(πη/2)/(πη/2)²)₊^{1/2}`.
pub fn epsilon_approx(v: f64, eta: f64) -> Result<EpsilonSolution, InequalityError> {
    check_eta(eta)?;
    let value = ((v - visibility_threshold(eta)).max(0.0)).sqrt() / SQRT_2;
    if value >= FRAC_PI_4 {
        return Err(InequalityError::EpsilonOutOfRange(value));
    }
    Ok(EpsilonSolution { value, method: EpsilonMethod::Approximate, residual: 0.0 })
}

/// Left side of the exact ε equation,
/// `(π − 2ε + sin 2ε cos 2ε) / (cos 2ε [π − 2ε + tan 2ε])`.
///
/// Evaluated with the denominator multiplied out to
/// `(π − 2ε) cos 2ε + sin 2ε`, which stays finite at ε = π/4.
/// Equals 1 at ε = 0, increases strictly on `[0, π/4]` and reaches π/2.
pub fn epsilon_equation_lhs(eps: f64) -> f64 {
    let t = 2.0 * eps;
    let (s, c) = t.sin_cos();
    (PI - t + s * c) / ((PI - t) * c + s)
}

/// Right side of the exact ε equation, `V (πη/2)² / sin²(πη/2)`.
pub fn epsilon_equation_rhs(v: f64, eta: f64) -> f64 {
    v / visibility_threshold(eta)
}

/// Exact ε: the root in `[0, π/4)` of `lhs(ε) = V (πη/2)²/sin²(πη/2)`.
///
/// A right side at or below 1 means no deviation is forced and ε = 0. The
/// left side is bounded by π/2 on the bracket, so a larger right side has
/// no root and is reported as [`InequalityError::NoRoot`].
pub fn epsilon_exact(v: f64, eta: f64) -> Result<EpsilonSolution, InequalityError> {
    check_eta(eta)?;
    let rhs = epsilon_equation_rhs(v, eta);
    if rhs <= 1.0 {
        return Ok(EpsilonSolution { value: 0.0, method: EpsilonMethod::ExactRoot, residual: (1.0 - rhs).abs() });
    }
    let sup = epsilon_equation_lhs(EPSILON_BRACKET_MAX);
    if rhs > sup {
        return Err(InequalityError::NoRoot { rhs, sup });
    }
    let value = find_root(|e| epsilon_equation_lhs(e) - rhs, 0.0, EPSILON_BRACKET_MAX, EPSILON_ROOT_TOL)?;
    Ok(EpsilonSolution { value, method: EpsilonMethod::ExactRoot, residual: (epsilon_equation_lhs(value) - rhs).abs() })
}

/// Radicand `2/(3η) − 1/2 − sin⁴(πη/2)/(πη/2)⁴` of the low-order bound.
pub fn low_order_radicand(eta: f64) -> f64 {
    let s = visibility_threshold(eta);
    2.0 / (3.0 * eta) - 0.5 - s * s
}

/// Low-order bound `D(η) ≈ (8√2/3π) √(radicand) ε³`.
pub fn d_eta_approx(eta: f64, eps: f64) -> Result<f64, InequalityError> {
    check_eta(eta)?;
    if eps < 0.0 {
        return Err(InequalityError::EpsilonOutOfRange(eps));
    }
    let radicand = low_order_radicand(eta);
    if radicand < 0.0 {
        return Err(InequalityError::NegativeRadicand { eta, radicand });
    }
    Ok(8.0 * SQRT_2 / (3.0 * PI) * radicand.sqrt() * eps.powi(3))
}

/// Lower bound on `D(η)` valid at every ε in `[0, π/4)`.
pub fn d_eta_lower_bound(eta: f64, eps: f64) -> Result<f64, InequalityError> {
    check_eta(eta)?;
    if !(0.0..FRAC_PI_4).contains(&eps) {
        return Err(InequalityError::EpsilonOutOfRange(eps));
    }
    let t = 2.0 * eps;
    let (s, c) = t.sin_cos();
    Ok(SQRT_2 * s.powi(3) / (3.0 * ((PI - t) * c + s)) * sinc_sq(PI * eta))
}

/// Deviation `δ(φ) = α[β cos 2φ − 1] + γ(φ)` of the LHV2-optimal model from
/// the best cosine fit, relative to `⟨R⟩`, where
/// `α = 8ε³/(3π)`, `β = 2 sin²(πη/2)/(πη/2)²` and
/// `γ(φ) = (2α/η²)(η + (2/π)|φ| − 1)₊` for φ folded into `[0, π/2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviationProfile {
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl DeviationProfile {
    pub fn new(eta: f64, eps: f64) -> Result<Self, InequalityError> {
        check_eta(eta)?;
        if eps < 0.0 {
            return Err(InequalityError::EpsilonOutOfRange(eps));
        }
        Ok(DeviationProfile { eta, alpha: 8.0 * eps.powi(3) / (3.0 * PI), beta: 2.0 * visibility_threshold(eta) })
    }

    pub fn gamma(&self, phi: Angle) -> f64 {
        let x = phi.folded().radians();
        let ramp = (self.eta + x / FRAC_PI_2 - 1.0).max(0.0);
        2.0 * self.alpha / (self.eta * self.eta) * ramp
    }

    pub fn delta(&self, phi: Angle) -> f64 {
        let x = phi.folded().radians();
        self.alpha * (self.beta * (2.0 * x).cos() - 1.0) + self.gamma(phi)
    }

    /// Angle at which γ switches on, `(π/2)(1 − η)`.
    pub fn gamma_onset(&self) -> Angle {
        Angle::from_radians(FRAC_PI_2 * (1.0 - self.eta))
    }
}

pub fn deviation_profile(phi: Angle, eta: f64, eps: f64) -> Result<f64, InequalityError> {
    Ok(DeviationProfile::new(eta, eps)?.delta(phi))
}

/// Visibility the first two terms of δ(φ) imply, `(V + αβ)/(1 − α)`.
pub fn v_effective(v: f64, eta: f64, eps: f64) -> Result<f64, InequalityError> {
    let p = DeviationProfile::new(eta, eps)?;
    if p.alpha >= 1.0 {
        return Err(InequalityError::AlphaTooLarge(p.alpha));
    }
    Ok((v + p.alpha * p.beta) / (1.0 - p.alpha))
}

/// Cosine-fit rate plus `⟨R⟩ δ(φ)`: the rate the LHV2-optimal model predicts.
pub fn predicted_model_rate(f: &CosineFit, phi: Angle, eta: f64, eps: f64) -> Result<f64, InequalityError> {
    Ok(f.predict(phi) + f.mean_rate * deviation_profile(phi, eta, eps)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Violated,
    Satisfied,
    Inconclusive,
}

/// Three-valued comparison of a statistic with a bound at `k` sigma.
pub fn verdict(delta: f64, sigma: f64, bound: f64, k: f64) -> Verdict {
    if delta + k * sigma < bound {
        Verdict::Violated
    } else if delta - k * sigma >= bound {
        Verdict::Satisfied
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityConfig {
    /// Gaussian resamples of the rates used for `delta_exp_sigma`; 0 skips it.
    pub resamples: usize,
    pub seed: u64,
    pub significance_k: f64,
}

impl Default for InequalityConfig {
    fn default() -> Self {
        InequalityConfig { resamples: 10_000, seed: 0, significance_k: DEFAULT_SIGNIFICANCE_K }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    /// ψ = 0 statistic; the verdict uses this one.
    pub delta_exp: f64,
    /// Statistic with the fitted phase inside the cosine.
    pub delta_exp_phase_corrected: f64,
    pub delta_exp_sigma: Option<f64>,
    pub eps_approx: EpsilonSolution,
    pub eps_exact: EpsilonSolution,
    /// Low-order bound at the low-order ε; absent when its radicand is negative.
    pub d_eta_approx: Option<f64>,
    /// False when the low-order ε exceeds [`LOW_ORDER_VALIDITY_LIMIT`].
    pub d_eta_approx_in_validity: bool,
    /// Lower bound at the exact ε; the verdict compares against this.
    pub d_eta_lower_bound: f64,
    pub eta: f64,
    pub family: Family,
    pub verdict: Verdict,
    pub fit: CosineFit,
}

/// Runs the whole test on a uniform-grid dataset: unweighted cosine fit,
/// `Δ_exp` with and without the fitted phase, both ε solutions, both bound
/// forms, a resampled sigma of `Δ_exp`, and the verdict.
pub fn run_inequality_test(
    d: &CoincidenceDataset,
    ctx: EfficiencyContext,
    cfg: InequalityConfig,
) -> Result<InequalityReport, InequalityError> {
    if !d.is_uniform_grid() {
        return Err(FitError::NonUniformGrid.into());
    }
    let eta = ctx.eta();
    let fit = fit_cosine(d, &[], Weighting::Uniform)?;
    let v = fit.visibility;
    let delta = delta_exp(d, v, None)?;
    let delta_phase = delta_exp(d, v, Some(fit.phase))?;

    let eps_approx = epsilon_approx(v, eta)?;
    let eps_exact = epsilon_exact(v, eta)?;
    let d_approx = d_eta_approx(eta, eps_approx.value).ok();
    let d_lower = d_eta_lower_bound(eta, eps_exact.value)?;

    let sigma = if cfg.resamples > 0 { Some(resampled_delta_sigma(d, cfg.resamples, cfg.seed)?) } else { None };

    Ok(InequalityReport {
        delta_exp: delta,
        delta_exp_phase_corrected: delta_phase,
        delta_exp_sigma: sigma,
        eps_approx,
        eps_exact,
        d_eta_approx: d_approx,
        d_eta_approx_in_validity: eps_approx.value <= LOW_ORDER_VALIDITY_LIMIT,
        d_eta_lower_bound: d_lower,
        eta,
        family: ctx.family(),
        verdict: verdict(delta, sigma.unwrap_or(0.0), d_lower, cfg.significance_k),
        fit,
    })
}

/// `Δ_exp` of one Gaussian perturbation of the rates. Resample `index`
/// draws from ChaCha8 stream `index` under `seed`, so the result does not
/// depend on how resamples are scheduled.
fn resampled_delta(d: &CoincidenceDataset, seed: u64, index: u64) -> Result<f64, InequalityError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let rates: Vec<f64> = d
        .points()
        .iter()
        .map(|p| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (p.rate + p.sigma * z).max(0.0)
        })
        .collect();
    let perturbed = d.with_rates(&rates)?;
    let fit = fit_cosine(&perturbed, &[], Weighting::Uniform)?;
    delta_exp(&perturbed, fit.visibility.min(VISIBILITY_CAP), None)
}

/// Sample standard deviation of `Δ_exp` over `resamples` perturbations.
pub fn resampled_delta_sigma(d: &CoincidenceDataset, resamples: usize, seed: u64) -> Result<f64, InequalityError> {
    let values =
        (0..resamples as u64).into_par_iter().map(|i| resampled_delta(d, seed, i)).collect::<Result<Vec<f64>, _>>()?;
    if values.len() < 2 {
        return Ok(0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{builtin_reference_dataset, DataPoint};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cosine_dataset(a: f64, v: f64, n: usize) -> CoincidenceDataset {
        let points = (0..n)
            .map(|k| {
                let phi = PI * k as f64 / n as f64;
                DataPoint::new(Angle::from_radians(phi), a * (1.0 + v * (2.0 * phi).cos()), 0.0)
            })
            .collect();
        CoincidenceDataset::new(points, "cos").unwrap()
    }

    /// The tan form of the left side, as usually written.
    fn lhs_tan_form(e: f64) -> f64 {
        let t = 2.0 * e;
        (PI - t + t.sin() * t.cos()) / (t.cos() * (PI - t + t.tan()))
    }

    #[test]
    fn lhs_forms_agree_and_limits() {
        for i in 1..100 {
            let e = EPSILON_BRACKET_MAX * i as f64 / 100.0;
            assert_abs_diff_eq!(epsilon_equation_lhs(e), lhs_tan_form(e), epsilon = 1e-12);
        }
        assert_eq!(epsilon_equation_lhs(0.0), 1.0);
        assert_abs_diff_eq!(epsilon_equation_lhs(FRAC_PI_4), FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn lhs_is_strictly_increasing() {
        let n = 100_000;
        let mut prev = epsilon_equation_lhs(0.0);
        for i in 1..=n {
            let e = FRAC_PI_4 * i as f64 / n as f64;
            let cur = epsilon_equation_lhs(e);
            assert!(cur > prev, "not increasing at {e}");
            prev = cur;
        }
    }

    #[test]
    fn delta_exp_examples() {
        let d = builtin_reference_dataset();
        let v = crate::fit::visibility_discrete(&d).unwrap();
        let x = delta_exp(&d, v, None).unwrap();
        assert!((0.0060..=0.0080).contains(&x), "{x}");
        assert_abs_diff_eq!(delta_exp(&cosine_dataset(50.0, 0.8, 8), 0.8, None).unwrap(), 0.0, epsilon = 1e-14);
        assert!(matches!(delta_exp(&d, 1.2, None), Err(InequalityError::VisibilityOutOfRange(_))));
    }

    #[test]
    fn epsilon_examples() {
        assert_abs_diff_eq!(epsilon_approx(0.9897, 0.31).unwrap().value, 0.1820, epsilon = 0.0005);
        assert_abs_diff_eq!(epsilon_approx(0.9897, 0.62).unwrap().value, 0.366, epsilon = 0.001);
        assert_eq!(epsilon_approx(0.5, 0.31).unwrap().value, 0.0);

        let e = epsilon_exact(0.9897, 0.62).unwrap();
        assert_abs_diff_eq!(e.value, 0.578, epsilon = 0.001);
        assert!(e.residual <= EPSILON_ROOT_TOL);
        assert_eq!(e.method, EpsilonMethod::ExactRoot);
    }

    /// At η = 0.31 the exact root of the equation sits near 0.2138, not next
    /// to the low-order value; the two forms differ already at leading order
    /// because `lhs(ε) ≈ 1 + 2ε²` gives `ε² ≈ (V − s)/(2s)` against the
    /// low-order `(V − s)/2`.
    #[test]
    fn exact_epsilon_at_low_efficiency() {
        let e = epsilon_exact(0.9897, 0.31).unwrap().value;
        assert_abs_diff_eq!(e, 0.2138, epsilon = 0.0005);
        let s = visibility_threshold(0.31);
        let leading = ((0.9897 - s) / (2.0 * s)).sqrt();
        assert!((e - leading).abs() < 0.03);
    }

    #[test]
    fn exact_epsilon_edge_cases() {
        let eta = 0.4;
        let v = visibility_threshold(eta);
        let e = epsilon_exact(v, eta).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.residual < 1e-15);
        assert!(matches!(epsilon_exact(1.0, 0.95), Err(InequalityError::NoRoot { .. })));
        assert!(matches!(epsilon_exact(1.0, 0.0), Err(InequalityError::EtaOutOfRange(_))));
    }

    #[test]
    fn bound_examples() {
        assert_abs_diff_eq!(d_eta_approx(0.31, 0.1820).unwrap(), 0.0065, epsilon = 0.0002);
        assert_abs_diff_eq!(d_eta_approx(0.31, 0.1825).unwrap(), 0.00654, epsilon = 0.0001);
        assert_eq!(d_eta_approx(0.31, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(d_eta_lower_bound(0.62, 0.578).unwrap(), 0.048, epsilon = 0.001);
        assert_abs_diff_eq!(d_eta_lower_bound(0.31, 0.1825).unwrap(), 0.0052, epsilon = 0.0002);
        assert_eq!(d_eta_lower_bound(0.31, 0.0).unwrap(), 0.0);
        assert!(d_eta_lower_bound(0.31, 0.8).is_err());
    }

    #[test]
    fn radicand_stays_positive_but_shrinks() {
        // 2/3 − 1/2 − (4/π²)² ≈ 0.0025 at η = 1.
        assert_abs_diff_eq!(low_order_radicand(1.0), 2.0 / 3.0 - 0.5 - (4.0 / (PI * PI)).powi(2), epsilon = 1e-15);
        for i in 1..=100 {
            assert!(low_order_radicand(i as f64 / 100.0) > 0.0);
        }
        assert!(matches!(d_eta_approx(1.5, 0.1), Err(InequalityError::EtaOutOfRange(_))));
    }

    #[test]
    fn lower_bound_below_low_order_form() {
        for i in 0..=57 {
            let eta = 0.05 + 0.01 * i as f64;
            for j in 0..=24 {
                let eps = 0.01 + 0.01 * j as f64;
                let lo = d_eta_lower_bound(eta, eps).unwrap();
                let ap = d_eta_approx(eta, eps).unwrap();
                assert!(lo <= ap, "η={eta} ε={eps}: {lo} > {ap}");
            }
        }
    }

    #[test]
    fn profile_examples() {
        let p = DeviationProfile::new(0.31, 0.1820).unwrap();
        let right = Angle::from_degrees(90.0);
        assert_abs_diff_eq!(p.gamma(right), 0.0330, epsilon = 0.0003);
        assert_abs_diff_eq!(p.delta(right), 0.0184, epsilon = 0.0003);
        assert_eq!(p.gamma(Angle::ZERO), 0.0);
        assert_abs_diff_eq!(p.delta(Angle::ZERO), 0.00433, epsilon = 0.00001);
        assert_abs_diff_eq!(p.delta(Angle::from_degrees(112.5)), p.delta(Angle::from_degrees(67.5)), epsilon = 1e-15);
        assert_eq!(deviation_profile(right, 0.31, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn profile_is_continuous_at_gamma_onset() {
        let p = DeviationProfile::new(0.31, 0.2).unwrap();
        let x = p.gamma_onset().radians();
        for h in [1e-6, 1e-8, 1e-10] {
            let l = p.delta(Angle::from_radians(x - h));
            let r = p.delta(Angle::from_radians(x + h));
            assert!((l - r).abs() < 1e-3 * h.sqrt(), "jump at onset: {l} vs {r}");
        }
        assert_eq!(p.gamma(Angle::from_radians(x - 1e-9)), 0.0);
        assert!(p.gamma(Angle::from_radians(x + 1e-6)) > 0.0);
    }

    #[test]
    fn effective_visibility() {
        assert_abs_diff_eq!(v_effective(0.9897, 0.31, 0.1820).unwrap(), 1.003, epsilon = 0.002);
        assert_abs_diff_eq!(v_effective(0.9897, 0.31, 0.1825).unwrap(), 1.0044, epsilon = 0.0002);
        assert_eq!(v_effective(0.9897, 0.31, 0.0).unwrap(), 0.9897);
        assert!(matches!(v_effective(0.9, 0.31, 1.5), Err(InequalityError::AlphaTooLarge(_))));
    }

    #[test]
    fn model_rate_prediction() {
        let d = builtin_reference_dataset();
        let f = fit_cosine(&d, &[], Weighting::Uniform).unwrap();
        let right = Angle::from_degrees(90.0);
        assert_abs_diff_eq!(predicted_model_rate(&f, right, 0.31, 0.1820).unwrap(), 140.9, epsilon = 3.0);
        assert_eq!(predicted_model_rate(&f, right, 0.31, 0.0).unwrap(), f.predict(right));
        let shift = predicted_model_rate(&f, Angle::ZERO, 0.31, 0.1820).unwrap() - f.predict(Angle::ZERO);
        assert_abs_diff_eq!(shift, 21.5, epsilon = 0.2);
    }

    #[test]
    fn verdict_rule() {
        assert_eq!(verdict(0.01, 0.001, 0.05, 3.0), Verdict::Violated);
        assert_eq!(verdict(0.01, 0.001, 0.005, 3.0), Verdict::Satisfied);
        assert_eq!(verdict(0.01, 0.001, 0.009, 3.0), Verdict::Inconclusive);
        assert_eq!(verdict(0.01, 0.0, 0.01, 3.0), Verdict::Satisfied);
    }

    #[test]
    fn reference_lhv3_is_violated() {
        let ctx = EfficiencyContext::new(0.62, Family::Lhv3).unwrap();
        let cfg = InequalityConfig { resamples: 2000, seed: 11, significance_k: 3.0 };
        let r = run_inequality_test(&builtin_reference_dataset(), ctx, cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(!r.d_eta_approx_in_validity);
        assert_abs_diff_eq!(r.d_eta_lower_bound, 0.048, epsilon = 0.001);
    }

    #[test]
    fn perfect_quantum_data_violates() {
        let d = cosine_dataset(1000.0, 0.99, 8);
        let ctx = EfficiencyContext::new(0.31, Family::Lhv2).unwrap();
        let cfg = InequalityConfig { resamples: 0, seed: 0, significance_k: 3.0 };
        let r = run_inequality_test(&d, ctx, cfg).unwrap();
        assert!(r.delta_exp < 1e-12);
        assert!(r.eps_exact.value > 0.0);
        assert_eq!(r.delta_exp_sigma, None);
        assert_eq!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn resampling_is_reproducible() {
        let d = builtin_reference_dataset();
        let a = resampled_delta_sigma(&d, 500, 42).unwrap();
        let b = resampled_delta_sigma(&d, 500, 42).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a.to_bits(), resampled_delta_sigma(&d, 500, 43).unwrap().to_bits());
        assert!(a > 0.0 && a < 0.003, "{a}");
    }

    #[test]
    fn report_json_fields() {
        let ctx = EfficiencyContext::new(0.31, Family::Lhv2).unwrap();
        let cfg = InequalityConfig { resamples: 10, seed: 1, significance_k: 3.0 };
        let r = run_inequality_test(&builtin_reference_dataset(), ctx, cfg).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for k in [
            "delta_exp",
            "delta_exp_phase_corrected",
            "delta_exp_sigma",
            "eps_approx",
            "eps_exact",
            "d_eta_approx",
            "d_eta_lower_bound",
            "eta",
            "family",
            "verdict",
            "fit",
        ] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
        assert_eq!(v["family"], "LHV2");
        assert_eq!(v["eps_exact"]["method"], "exact_root");
    }

    proptest! {
        #[test]
        fn delta_exp_is_scale_invariant(s in 0.01f64..100.0) {
            let d = builtin_reference_dataset();
            let a = delta_exp(&d, 0.99, None).unwrap();
            let b = delta_exp(&d.scaled(s).unwrap(), 0.99, None).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn exact_root_meets_tolerance(v in 0.5f64..1.05, eta in 0.05f64..0.7) {
            match epsilon_exact(v, eta) {
                Ok(e) => {
                    prop_assert!(e.value >= 0.0 && e.value < FRAC_PI_4);
                    if e.value > 0.0 {
                        prop_assert!(e.residual <= EPSILON_ROOT_TOL);
                    }
                }
                Err(InequalityError::NoRoot { rhs, sup }) => prop_assert!(rhs > sup),
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn profile_is_even(phi in -3.0f64..3.0, eta in 0.05f64..1.0, eps in 0.0f64..0.7) {
            let p = DeviationProfile::new(eta, eps).unwrap();
            let a = p.delta(Angle::from_radians(phi));
            let b = p.delta(Angle::from_radians(-phi));
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
