//! The complete analysis of the built-in reference table as one document.

use std::fmt::Write as _;

use lhvbell::inequality::{DeviationProfile, Verdict};
use lhvbell::lhvmodel::{validate_model, Detection, DEFAULT_VALIDATION_POINTS};
use lhvbell::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::output::{sig, to_json, RunManifest, Sink};

/// Embedded so `--json` consumers can validate without the source tree.
pub const SCHEMA: &str = include_str!("../schema/reproduce.schema.json");

const ETA_LOW: f64 = 0.31;
const ETA_HIGH: f64 = 0.62;

/// A computed value next to the published one it reproduces.
#[derive(Serialize)]
struct Compared {
    computed: f64,
    published: f64,
}

fn cmp(computed: f64, published: f64) -> Compared {
    Compared { computed, published }
}

#[derive(Serialize)]
struct FitSummary {
    mean_rate: f64,
    visibility: f64,
    visibility_published: f64,
    visibility_sigma: f64,
    phase_deg: f64,
    phase_sigma_deg: f64,
    excluded_angles_deg: Vec<f64>,
}

#[derive(Serialize)]
struct DatasetSummary {
    label: String,
    points: usize,
    mean_rate: f64,
}

#[derive(Serialize)]
struct Fits {
    all_points: FitSummary,
    excluding_90: FitSummary,
    discrete_visibility: f64,
}

#[derive(Serialize)]
struct Predictions {
    r12_90_all_points: Compared,
    r12_90_excluding_90: Compared,
}

#[derive(Serialize)]
struct PairSummary {
    v_a: f64,
    v_b: f64,
    ratio: Compared,
    ratio_sigma: Compared,
    ratio_sigma_quadrature: f64,
}

#[derive(Serialize)]
struct DeltaSummary {
    published: f64,
    psi_zero: f64,
    fitted_phase: f64,
    excluding_90_visibility: f64,
    excluding_90_visibility_fitted_phase: f64,
    sigma: f64,
    resamples: usize,
    seed: u64,
}

#[derive(Serialize)]
struct EpsilonSummary {
    lhv2_low_order: Compared,
    lhv2_exact: Compared,
    lhv3_low_order: f64,
    lhv3_exact: Compared,
}

#[derive(Serialize)]
struct BoundSummary {
    lhv2_low_order: Compared,
    lhv2_lower_bound_at_published_epsilon: Compared,
    lhv2_lower_bound_at_exact_epsilon: f64,
    lhv3_lower_bound: Compared,
}

#[derive(Serialize)]
struct ProfileSummary {
    eta: f64,
    epsilon: f64,
    alpha: f64,
    beta: f64,
    gamma_onset_deg: f64,
    gamma_90: Compared,
    delta_90: Compared,
    delta_0: f64,
    v_effective: Compared,
    predicted_r12_90: Compared,
}

#[derive(Serialize)]
struct VerdictSummary {
    family: Family,
    eta: f64,
    delta_exp: f64,
    sigma: f64,
    k: f64,
    bound: f64,
    bound_form: &'static str,
    verdict: Verdict,
    published: Verdict,
    note: String,
}

#[derive(Serialize)]
struct RangeCheck {
    epsilon: f64,
    passed: bool,
    failed_checks: Vec<String>,
}

#[derive(Serialize)]
struct Report {
    dataset: DatasetSummary,
    fits: Fits,
    predictions: Predictions,
    visibility_pair: PairSummary,
    delta_exp: DeltaSummary,
    epsilon: EpsilonSummary,
    bounds: BoundSummary,
    deviation_profile: ProfileSummary,
    verdicts: Vec<VerdictSummary>,
    lhv4_range: Vec<RangeCheck>,
}

fn summarize(f: &CosineFit, published: f64) -> FitSummary {
    FitSummary {
        mean_rate: f.mean_rate,
        visibility: f.visibility,
        visibility_published: published,
        visibility_sigma: f.uncertainty.visibility,
        phase_deg: f.phase.degrees(),
        phase_sigma_deg: f.uncertainty.phase.to_degrees(),
        excluded_angles_deg: f.excluded_angles.iter().map(|a| a.degrees()).collect(),
    }
}

fn range_check(epsilon: f64) -> Result<RangeCheck, CliError> {
    let spec = ModelSpec {
        rho: Density::Lhv4(Lhv4Density::form(epsilon)),
        detection: Detection::Constant { q: 1.0 },
        family: Family::Lhv4,
    };
    let r = validate_model(&spec, DEFAULT_VALIDATION_POINTS)?;
    Ok(RangeCheck { epsilon, passed: r.passed(), failed_checks: r.failures().map(|c| c.name.to_string()).collect() })
}

fn build(resamples: usize, seed: u64) -> Result<Report, CliError> {
    let d = builtin_reference_dataset();
    let ninety = Angle::RIGHT;
    let full = fit_cosine(&d, &[], Weighting::Uniform)?;
    let excl = fit_cosine(&d, &[ninety], Weighting::Uniform)?;
    let pair = visibility_pair(&d)?;

    let cfg = InequalityConfig { resamples, seed, significance_k: 3.0 };
    let lhv2 = run_inequality_test(&d, EfficiencyContext::new(ETA_LOW, Family::Lhv2)?, cfg)?;
    let lhv3 = run_inequality_test(&d, EfficiencyContext::new(ETA_HIGH, Family::Lhv3)?, cfg)?;
    let sigma = lhv2.delta_exp_sigma.unwrap_or(0.0);

    let eps_low = lhv2.eps_approx.value;
    let profile = DeviationProfile::new(ETA_LOW, eps_low)?;

    let verdicts = vec![
        VerdictSummary {
            family: Family::Lhv2,
            eta: ETA_LOW,
            delta_exp: lhv2.delta_exp,
            sigma,
            k: cfg.significance_k,
            bound: lhv2.d_eta_lower_bound,
            bound_form: "lower bound at exact epsilon",
            verdict: lhv2.verdict,
            published: Verdict::Satisfied,
            note: format!(
                "low-order bound {} at epsilon {}; delta_exp - k sigma = {}",
                sig(lhv2.d_eta_approx.unwrap_or(f64::NAN)),
                sig(eps_low),
                sig(lhv2.delta_exp - cfg.significance_k * sigma)
            ),
        },
        VerdictSummary {
            family: Family::Lhv3,
            eta: ETA_HIGH,
            delta_exp: lhv3.delta_exp,
            sigma: lhv3.delta_exp_sigma.unwrap_or(0.0),
            k: cfg.significance_k,
            bound: lhv3.d_eta_lower_bound,
            bound_form: "lower bound at exact epsilon",
            verdict: lhv3.verdict,
            published: Verdict::Violated,
            note: "low-order epsilon is outside its range of validity".into(),
        },
        VerdictSummary {
            family: Family::Lhv4,
            eta: ETA_HIGH,
            delta_exp: lhv3.delta_exp,
            sigma: lhv3.delta_exp_sigma.unwrap_or(0.0),
            k: cfg.significance_k,
            bound: lhv3.d_eta_lower_bound,
            bound_form: "inherited from LHV3",
            verdict: lhv3.verdict,
            published: Verdict::Violated,
            note: "LHV4 is a subfamily of LHV3; its density is only valid for epsilon in [0, 1/3]".into(),
        },
    ];

    Ok(Report {
        dataset: DatasetSummary { label: d.label().into(), points: d.len(), mean_rate: mean_rate(&d) },
        fits: Fits {
            all_points: summarize(&full, 0.9897),
            excluding_90: summarize(&excl, 0.9966),
            discrete_visibility: visibility_discrete(&d)?,
        },
        predictions: Predictions {
            r12_90_all_points: cmp(full.predict(ninety), 51.3),
            r12_90_excluding_90: cmp(excl.predict(ninety), 17.0),
        },
        visibility_pair: PairSummary {
            v_a: pair.v_a,
            v_b: pair.v_b,
            ratio: cmp(pair.ratio, 1.0205),
            ratio_sigma: cmp(pair.ratio_sigma, 0.0048),
            ratio_sigma_quadrature: pair.ratio_sigma_quadrature,
        },
        delta_exp: DeltaSummary {
            published: 0.0074,
            psi_zero: lhv2.delta_exp,
            fitted_phase: lhv2.delta_exp_phase_corrected,
            excluding_90_visibility: delta_exp(&d, excl.visibility, None)?,
            excluding_90_visibility_fitted_phase: delta_exp(&d, excl.visibility, Some(excl.phase))?,
            sigma,
            resamples,
            seed,
        },
        epsilon: EpsilonSummary {
            lhv2_low_order: cmp(eps_low, 0.1820),
            lhv2_exact: cmp(lhv2.eps_exact.value, 0.1825),
            lhv3_low_order: lhv3.eps_approx.value,
            lhv3_exact: cmp(lhv3.eps_exact.value, 0.578),
        },
        bounds: BoundSummary {
            lhv2_low_order: cmp(d_eta_approx(ETA_LOW, eps_low)?, 0.0065),
            lhv2_lower_bound_at_published_epsilon: cmp(d_eta_lower_bound(ETA_LOW, 0.1825)?, 0.0052),
            lhv2_lower_bound_at_exact_epsilon: lhv2.d_eta_lower_bound,
            lhv3_lower_bound: cmp(lhv3.d_eta_lower_bound, 0.048),
        },
        deviation_profile: ProfileSummary {
            eta: ETA_LOW,
            epsilon: eps_low,
            alpha: profile.alpha,
            beta: profile.beta,
            gamma_onset_deg: profile.gamma_onset().degrees(),
            gamma_90: cmp(profile.gamma(ninety), 0.0330),
            delta_90: cmp(profile.delta(ninety), 0.0184),
            delta_0: profile.delta(Angle::ZERO),
            v_effective: cmp(v_effective(full.visibility, ETA_LOW, eps_low)?, 1.003),
            predicted_r12_90: cmp(predicted_model_rate(&full, ninety, ETA_LOW, eps_low)?, 140.9),
        },
        verdicts,
        lhv4_range: vec![range_check(0.2)?, range_check(1.0 / 3.0)?, range_check(0.5)?],
    })
}

fn verdict_name(v: Verdict) -> String {
    json!(v).as_str().unwrap_or_default().to_string()
}

fn render(r: &Report) -> String {
    let mut t = String::new();
    let row = |t: &mut String, name: &str, c: &Compared| {
        let _ = writeln!(t, "  {name:<40} {:>12}   published {}", sig(c.computed), sig(c.published));
    };
    let plain = |t: &mut String, name: &str, v: f64| {
        let _ = writeln!(t, "  {name:<40} {:>12}", sig(v));
    };

    let _ = writeln!(
        t,
        "dataset: {} ({} angles, mean rate {})",
        r.dataset.label,
        r.dataset.points,
        sig(r.dataset.mean_rate)
    );
    let _ = writeln!(t, "\ncosine fits");
    for (name, f) in [("all points", &r.fits.all_points), ("excluding 90°", &r.fits.excluding_90)] {
        row(&mut t, &format!("V ({name})"), &cmp(f.visibility, f.visibility_published));
        plain(&mut t, &format!("psi deg ({name})"), f.phase_deg);
    }
    plain(&mut t, "discrete visibility", r.fits.discrete_visibility);

    let _ = writeln!(t, "\npredicted R12(90°), measured 108");
    row(&mut t, "all-point fit", &r.predictions.r12_90_all_points);
    row(&mut t, "fit excluding 90°", &r.predictions.r12_90_excluding_90);

    let _ = writeln!(t, "\nvisibility pair");
    plain(&mut t, "V_A (0°, 90°)", r.visibility_pair.v_a);
    plain(&mut t, "V_B (22.5°, 67.5°)", r.visibility_pair.v_b);
    row(&mut t, "V_B / V_A", &r.visibility_pair.ratio);
    row(&mut t, "sigma, linear propagation", &r.visibility_pair.ratio_sigma);
    plain(&mut t, "sigma, quadrature propagation", r.visibility_pair.ratio_sigma_quadrature);

    let de = &r.delta_exp;
    let _ = writeln!(t, "\ndelta_exp (published {})", sig(de.published));
    plain(&mut t, "psi = 0", de.psi_zero);
    plain(&mut t, "fitted psi", de.fitted_phase);
    plain(&mut t, "V from fit excluding 90°", de.excluding_90_visibility);
    plain(&mut t, "V from fit excluding 90°, fitted psi", de.excluding_90_visibility_fitted_phase);
    plain(&mut t, &format!("sigma ({} resamples, seed {})", de.resamples, de.seed), de.sigma);

    let _ = writeln!(t, "\nepsilon");
    row(&mut t, "eta 0.31, low-order", &r.epsilon.lhv2_low_order);
    row(&mut t, "eta 0.31, exact root", &r.epsilon.lhv2_exact);
    plain(&mut t, "eta 0.62, low-order", r.epsilon.lhv3_low_order);
    row(&mut t, "eta 0.62, exact root", &r.epsilon.lhv3_exact);

    let _ = writeln!(t, "\nD(eta)");
    row(&mut t, "eta 0.31, low-order", &r.bounds.lhv2_low_order);
    row(&mut t, "eta 0.31, lower bound at eps 0.1825", &r.bounds.lhv2_lower_bound_at_published_epsilon);
    plain(&mut t, "eta 0.31, lower bound at exact eps", r.bounds.lhv2_lower_bound_at_exact_epsilon);
    row(&mut t, "eta 0.62, lower bound at exact eps", &r.bounds.lhv3_lower_bound);

    let p = &r.deviation_profile;
    let _ = writeln!(t, "\ndeviation profile (eta {}, eps {})", sig(p.eta), sig(p.epsilon));
    plain(&mut t, "alpha", p.alpha);
    plain(&mut t, "beta", p.beta);
    plain(&mut t, "gamma onset deg", p.gamma_onset_deg);
    row(&mut t, "gamma(90°)", &p.gamma_90);
    row(&mut t, "delta(90°)", &p.delta_90);
    plain(&mut t, "delta(0°)", p.delta_0);
    row(&mut t, "V_eff", &p.v_effective);
    row(&mut t, "predicted R12(90°)", &p.predicted_r12_90);

    let _ = writeln!(t, "\nverdicts");
    for v in &r.verdicts {
        let _ = writeln!(
            t,
            "  {} (eta {}): {}   published {}\n    delta_exp {} ± {} vs bound {} ({}, k = {})\n    {}",
            v.family,
            sig(v.eta),
            verdict_name(v.verdict),
            verdict_name(v.published),
            sig(v.delta_exp),
            sig(v.sigma),
            sig(v.bound),
            v.bound_form,
            sig(v.k),
            v.note
        );
    }
    let _ = writeln!(t, "\nLHV4 density range");
    for c in &r.lhv4_range {
        let status = if c.passed { "pass".to_string() } else { format!("rejected ({})", c.failed_checks.join(", ")) };
        let _ = writeln!(t, "  epsilon {:<10} {status}", sig(c.epsilon));
    }
    t
}

pub fn run(sink: &Sink, resamples: usize, seed: u64) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("reproduce", json!({ "resamples": resamples, "seed": seed }));
    manifest.seeds.push(seed);
    manifest.input("builtin", builtin_reference_dataset().to_csv().as_bytes());

    let report = build(resamples, seed)?;
    let doc = to_json(&report)?;
    let text = render(&report);
    sink.stdout(if sink.json { &doc } else { &text })?;
    sink.file("reproduce.json", &doc)?;
    sink.file("reproduce.txt", &text)?;
    sink.file("reproduce.schema.json", SCHEMA)?;
    sink.manifest(&manifest)
}
