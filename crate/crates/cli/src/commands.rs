use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use lhvbell::angle::format_degrees;
use lhvbell::lhvmodel::{model_probabilities, validate_model, ModelError, DEFAULT_VALIDATION_POINTS};
use lhvbell::montecarlo::{simulate as simulate_model, SimulationConfigFile};
use lhvbell::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::output::{round_sig, sig, to_json, RunManifest, Sink};
use crate::{AngleArgs, InputArgs, NoiseArg, WeightingArg};

const DEFAULT_GRID: usize = 16;

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).with_context(|| format!("reading {}", path.display())).map_err(CliError::Input)
}

/// Loads the dataset and records its digest in the manifest.
fn load_input(input: &InputArgs, manifest: &mut RunManifest) -> Result<CoincidenceDataset, CliError> {
    match &input.input {
        Some(path) => {
            let bytes = read_file(path)?;
            manifest.input(path.display().to_string(), &bytes);
            let label = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            Ok(load_dataset(bytes.as_slice(), DatasetFormat::Csv, label)?)
        }
        None => {
            let d = builtin_reference_dataset();
            manifest.input("builtin", d.to_csv().as_bytes());
            Ok(d)
        }
    }
}

fn input_name(input: &InputArgs) -> String {
    input.input.as_ref().map_or_else(|| "builtin".into(), |p| p.display().to_string())
}

fn resolve_angles(a: &AngleArgs) -> Result<Vec<Angle>, CliError> {
    match (&a.angles_deg, a.grid) {
        (Some(list), _) => {
            if list.is_empty() {
                return Err(CliError::input("--angles-deg needs at least one angle"));
            }
            Ok(list.iter().map(|&d| Angle::from_degrees(d)).collect())
        }
        (None, Some(0)) => Err(CliError::input("--grid needs at least one angle")),
        (None, Some(n)) => Ok(uniform_grid(n)),
        (None, None) => Ok(uniform_grid(DEFAULT_GRID)),
    }
}

fn degrees_list(angles: &[Angle]) -> Vec<f64> {
    angles.iter().map(|a| a.degrees()).collect()
}

/// Dataset CSV with rates rounded to six significant digits.
fn dataset_csv(d: &CoincidenceDataset) -> String {
    let mut out = String::from("angle_deg,rate,sigma\n");
    for p in d.points() {
        let _ = writeln!(out, "{},{},{}", format_degrees(p.angle.degrees()), sig(p.rate), sig(p.sigma));
    }
    out
}

/// Data, fitted curve and residuals on a 1° grid over [0°, 180°).
fn fit_series(d: &CoincidenceDataset, f: &CosineFit) -> String {
    let mut out = String::from("angle_deg,data_rate,data_sigma,fit_rate,residual\n");
    for deg in 0..180 {
        let phi = Angle::from_degrees(deg as f64);
        let model = f.predict(phi);
        match d.point_at(phi) {
            Some(p) => {
                let _ = writeln!(out, "{deg},{},{},{},{}", sig(p.rate), sig(p.sigma), sig(model), sig(p.rate - model));
            }
            None => {
                let _ = writeln!(out, "{deg},,,{},", sig(model));
            }
        }
    }
    // Data at non-integer angles go after the grid so no point is dropped.
    for p in d.points() {
        let deg = p.angle.degrees();
        if (deg - deg.round()).abs() > 1e-9 {
            let model = f.predict(p.angle);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                format_degrees(deg),
                sig(p.rate),
                sig(p.sigma),
                sig(model),
                sig(p.rate - model)
            );
        }
    }
    out
}

pub fn fit(sink: &Sink, input: &InputArgs, exclude_deg: &[f64], weighting: WeightingArg) -> Result<(), CliError> {
    let weighting = match weighting {
        WeightingArg::Uniform => Weighting::Uniform,
        WeightingArg::InverseVariance => Weighting::InverseVariance,
    };
    let mut manifest = RunManifest::new(
        "fit",
        json!({
            "input": input_name(input),
            "exclude_deg": exclude_deg,
            "weighting": format!("{weighting:?}").to_lowercase(),
        }),
    );
    let d = load_input(input, &mut manifest)?;
    let excluded: Vec<Angle> = exclude_deg.iter().map(|&x| Angle::from_degrees(x)).collect();
    let f = fit_cosine(&d, &excluded, weighting)?;
    let doc = to_json(&f)?;

    if sink.json {
        sink.stdout(&doc)?;
    } else {
        let mut text = String::new();
        let _ = writeln!(text, "dataset      {} ({} points)", d.label(), d.len());
        let _ = writeln!(text, "mean rate    {} ± {}", sig(f.mean_rate), sig(f.uncertainty.mean_rate));
        let _ = writeln!(text, "visibility   {} ± {}", sig(f.visibility), sig(f.uncertainty.visibility));
        let _ = writeln!(text, "phase        {}° ± {}°", sig(f.phase.degrees()), sig(f.uncertainty.phase.to_degrees()));
        if !f.excluded_angles.is_empty() {
            let list: Vec<String> = f.excluded_angles.iter().map(|a| format_degrees(a.degrees())).collect();
            let _ = writeln!(text, "excluded     {}°", list.join("°, "));
        }
        sink.stdout(&text)?;
    }
    sink.file("fit.json", &doc)?;
    sink.file("fit_series.csv", &fit_series(&d, &f))?;
    sink.manifest(&manifest)
}

pub fn inequality(
    sink: &Sink,
    input: &InputArgs,
    eta: Option<f64>,
    family: &str,
    resamples: usize,
    seed: u64,
    k: f64,
) -> Result<(), CliError> {
    let family: Family = family.parse()?;
    let eta = match eta.or_else(|| family.nominal_eta()) {
        Some(e) => e,
        None => {
            return Err(CliError::input(format!("--eta is required for {family}, which has no nominal efficiency")))
        }
    };
    if !(k >= 0.0) {
        return Err(CliError::input(format!("--k must be non-negative, got {k}")));
    }
    let ctx = EfficiencyContext::new(eta, family)?;
    let mut manifest = RunManifest::new(
        "inequality",
        json!({
            "input": input_name(input),
            "eta": eta,
            "family": family,
            "resamples": resamples,
            "seed": seed,
            "k": k,
        }),
    );
    manifest.seeds.push(seed);
    let d = load_input(input, &mut manifest)?;
    let cfg = InequalityConfig { resamples, seed, significance_k: k };
    let report = run_inequality_test(&d, ctx, cfg)?;
    let doc = to_json(&report)?;

    if sink.json {
        sink.stdout(&doc)?;
    } else {
        let mut t = String::new();
        let _ = writeln!(t, "family {family}, eta {}", sig(eta));
        let _ = writeln!(t, "visibility          {}", sig(report.fit.visibility));
        let _ = writeln!(t, "delta_exp           {}", sig(report.delta_exp));
        let _ = writeln!(t, "  with fitted phase {}", sig(report.delta_exp_phase_corrected));
        if let Some(s) = report.delta_exp_sigma {
            let _ = writeln!(t, "  sigma             {} ({resamples} resamples)", sig(s));
        }
        let _ = writeln!(t, "epsilon low-order   {}", sig(report.eps_approx.value));
        let _ = writeln!(t, "epsilon exact       {}", sig(report.eps_exact.value));
        match report.d_eta_approx {
            Some(v) => {
                let flag = if report.d_eta_approx_in_validity { "" } else { "  (epsilon beyond low-order range)" };
                let _ = writeln!(t, "D(eta) low-order    {}{flag}", sig(v));
            }
            None => {
                let _ = writeln!(t, "D(eta) low-order    undefined");
            }
        }
        let _ = writeln!(t, "D(eta) lower bound  {}", sig(report.d_eta_lower_bound));
        let _ = writeln!(t, "verdict             {} at k = {}", json!(report.verdict).as_str().unwrap_or(""), sig(k));
        sink.stdout(&t)?;
    }
    sink.file("inequality.json", &doc)?;
    sink.manifest(&manifest)
}

#[derive(Serialize)]
struct ModelOutput<'a> {
    family: Family,
    production_rate: f64,
    validation: &'a lhvbell::lhvmodel::ValidationReport,
    probabilities: Vec<lhvbell::lhvmodel::AngleProbabilities>,
}

pub fn model(sink: &Sink, path: &Path, angles: &AngleArgs, production_rate: f64) -> Result<(), CliError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let angles = resolve_angles(angles)?;
    let mut manifest = RunManifest::new(
        "model",
        json!({
            "model": path.display().to_string(),
            "angles_deg": degrees_list(&angles),
            "production_rate": production_rate,
        }),
    );
    manifest.input(path.display().to_string(), &bytes);

    let spec = ModelFile::from_json(&text)?.to_spec()?;
    let report = validate_model(&spec, DEFAULT_VALIDATION_POINTS)?;
    if !report.passed() {
        return Err(ModelError::Invalid(report).into());
    }
    let family = spec.family;
    let m = LhvModel::new(spec)?;
    let probabilities = model_probabilities(&m, &angles)?;
    let dataset = model_dataset(&m, &angles, production_rate)?;
    let doc = to_json(&ModelOutput { family, production_rate, validation: &report, probabilities })?;

    if sink.json {
        sink.stdout(&doc)?;
    } else {
        let mut t = format!("validation: {report}\n");
        let _ = writeln!(t, "{:>10} {:>12} {:>12} {:>12} {:>12}", "angle_deg", "p12", "p1", "p2", "rate");
        for (p, dp) in model_probabilities(&m, &angles)?.iter().zip(dataset.points()) {
            let _ = writeln!(
                t,
                "{:>10} {:>12} {:>12} {:>12} {:>12}",
                format_degrees(p.angle_deg),
                sig(p.p12),
                sig(p.p1),
                sig(p.p2),
                sig(dp.rate)
            );
        }
        sink.stdout(&t)?;
    }
    sink.file("model_dataset.csv", &dataset_csv(&dataset))?;
    sink.file("probabilities.json", &doc)?;
    sink.manifest(&manifest)
}

pub struct SimulateArgs {
    pub model: Option<PathBuf>,
    pub quantum: Option<Vec<f64>>,
    pub pairs: Option<u64>,
    pub seed: Option<u64>,
    pub angles: AngleArgs,
    pub noise: Option<NoiseArg>,
    pub config: Option<PathBuf>,
}

const DEFAULT_PAIRS: u64 = 100_000;

pub fn simulate(sink: &Sink, a: SimulateArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let base: Option<SimulationConfigFile> = match &a.config {
        Some(p) => {
            let bytes = read_file(p)?;
            let cfg = serde_json::from_slice(&bytes)
                .with_context(|| format!("parsing {}", p.display()))
                .map_err(CliError::Input)?;
            inputs.push((p.display().to_string(), bytes));
            Some(cfg)
        }
        None => None,
    };
    let angles = if a.angles.angles_deg.is_some() || a.angles.grid.is_some() {
        resolve_angles(&a.angles)?
    } else if let Some(b) = &base {
        b.angles_deg.iter().map(|&d| Angle::from_degrees(d)).collect()
    } else {
        uniform_grid(DEFAULT_GRID)
    };
    let noise = match a.noise {
        Some(NoiseArg::BernoulliCounts) => Noise::BernoulliCounts,
        Some(NoiseArg::PoissonRates) => Noise::PoissonRates,
        None => base.as_ref().map_or_else(Noise::default, |b| b.noise),
    };
    let cfg = SimulationConfig {
        pairs_per_angle: a.pairs.or(base.as_ref().map(|b| b.pairs_per_angle)).unwrap_or(DEFAULT_PAIRS),
        angles,
        seed: a.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0),
        noise,
    };

    let source = match (&a.model, &a.quantum) {
        (Some(p), None) => json!({ "model": p.display().to_string() }),
        (None, Some(q)) => json!({ "quantum": { "v": q[0], "psi_deg": q[1], "mean": q[2] } }),
        _ => return Err(CliError::input("give either a model file or --quantum V PSI_DEG MEAN")),
    };
    let mut manifest = RunManifest::new(
        "simulate",
        json!({
            "source": source,
            "pairs_per_angle": cfg.pairs_per_angle,
            "angles_deg": degrees_list(&cfg.angles),
            "seed": cfg.seed,
            "noise": cfg.noise,
        }),
    );
    manifest.seeds.push(cfg.seed);

    let out = match (&a.model, &a.quantum) {
        (Some(p), _) => {
            let bytes = read_file(p)?;
            let text =
                String::from_utf8(bytes.clone()).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            inputs.push((p.display().to_string(), bytes));
            let m = LhvModel::new(ModelFile::from_json(&text)?.to_spec()?)?;
            simulate_model(&m, &cfg)?
        }
        (_, Some(q)) => simulate_quantum(q[0], Angle::from_degrees(q[1]), q[2], &cfg)?,
        _ => unreachable!(),
    };
    for (name, bytes) in &inputs {
        manifest.input(name.clone(), bytes);
    }

    let csv = dataset_csv(&out.dataset);
    let sidecar = to_json(&out.sidecar)?;
    if sink.json {
        let doc = json!({
            "dataset": out.dataset.points().iter().map(|p| json!({
                "angle_deg": round_sig(p.angle.degrees()),
                "rate": p.rate,
                "sigma": p.sigma,
            })).collect::<Vec<_>>(),
            "sidecar": out.sidecar,
        });
        sink.stdout(&to_json(&doc)?)?;
    } else {
        sink.stdout(&csv)?;
    }
    sink.file("simulated.csv", &csv)?;
    sink.file("simulated.sidecar.json", &sidecar)?;
    sink.manifest(&manifest)
}
