//! Seeded event-level simulation of photon-pair runs.
//!
//! Every random draw comes from a ChaCha8 generator keyed by the run seed.
//! Work is cut into substreams: angle `a`, pair block `b` uses stream
//! `(a << 32) | b`, and the Poisson draw of an angle's pair count uses
//! stream `(a << 32) | 0xFFFF_FFFF`. Blocks are independent, so running them
//! in parallel gives the same counts as running them in order.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::Angle;
use crate::data::{CoincidenceDataset, DataError, DataPoint};
use crate::lhvmodel::LhvModel;

/// Pairs per substream block.
pub const BLOCK_PAIRS: u64 = 1 << 16;
/// Grid used to bound the hidden-angle density for rejection sampling.
pub const REJECTION_SCAN_POINTS: usize = 4096;
pub const REJECTION_SAFETY: f64 = 1.001;

const COUNT_STREAM: u64 = 0xFFFF_FFFF;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("rejection bound {0} is not positive; density is not a valid model")]
    BadBound(f64),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    /// Fixed number of emitted pairs per angle; counts are binomial.
    #[default]
    BernoulliCounts,
    /// Emitted pairs per angle are Poisson with mean `pairs_per_angle`.
    PoissonRates,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig {
    pub pairs_per_angle: u64,
    pub angles: Vec<Angle>,
    pub seed: u64,
    pub noise: Noise,
}

/// JSON form of [`SimulationConfig`], with angles in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfigFile {
    pub pairs_per_angle: u64,
    pub angles_deg: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub noise: Noise,
}

impl From<&SimulationConfigFile> for SimulationConfig {
    fn from(f: &SimulationConfigFile) -> Self {
        SimulationConfig {
            pairs_per_angle: f.pairs_per_angle,
            angles: f.angles_deg.iter().map(|&d| Angle::from_degrees(d)).collect(),
            seed: f.seed,
            noise: f.noise,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.pairs_per_angle == 0 {
            return Err(SimulationError::Config("pairs_per_angle must be at least 1".into()));
        }
        if self.angles.is_empty() {
            return Err(SimulationError::Config("angles must not be empty".into()));
        }
        if self.angles.len() as u64 >= 1 << 31 {
            return Err(SimulationError::Config("too many angles".into()));
        }
        Ok(())
    }
}

/// Generator for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws hidden-angle pairs from a model's density by rejection.
#[derive(Clone, Debug)]
pub struct HiddenPairSampler<'a> {
    model: &'a LhvModel,
    /// Bound on `π ρ(x)` over one period.
    bound: f64,
}

impl<'a> HiddenPairSampler<'a> {
    pub fn new(model: &'a LhvModel) -> Result<Self, SimulationError> {
        let max = (0..REJECTION_SCAN_POINTS)
            .map(|i| {
                let x = -FRAC_PI_2 + PI * i as f64 / (REJECTION_SCAN_POINTS - 1) as f64;
                PI * model.rho().value(x)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let bound = max * REJECTION_SAFETY;
        if !(bound > 0.0) {
            return Err(SimulationError::BadBound(bound));
        }
        Ok(HiddenPairSampler { model, bound })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Difference `x = χ1 − χ2` in `[−π/2, π/2)`, distributed as `π ρ(x)`.
    pub fn sample_difference<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x = -FRAC_PI_2 + PI * rng.random::<f64>();
            let u = self.bound * rng.random::<f64>();
            if u <= PI * self.model.rho().value(x) {
                return x;
            }
        }
    }

    /// `χ1` uniform on `[0, π)`, `χ2 = (χ1 − x) mod π`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Angle, Angle) {
        let chi1 = PI * rng.random::<f64>();
        let x = self.sample_difference(rng);
        (Angle::from_radians(chi1), Angle::from_radians((chi1 - x).rem_euclid(PI)))
    }
}

/// One hidden-angle pair. Builds the rejection bound on every call; use a
/// [`HiddenPairSampler`] for repeated draws.
pub fn sample_hidden_pair<R: Rng + ?Sized>(m: &LhvModel, rng: &mut R) -> Result<(Angle, Angle), SimulationError> {
    Ok(HiddenPairSampler::new(m)?.sample(rng))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub pairs: u64,
    pub singles1: u64,
    pub singles2: u64,
    pub coincidences: u64,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.pairs += o.pairs;
        self.singles1 += o.singles1;
        self.singles2 += o.singles2;
        self.coincidences += o.coincidences;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AngleCounts {
    pub angle_deg: f64,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationSidecar {
    pub seed: u64,
    pub pairs_per_angle: u64,
    pub noise: Noise,
    /// Per-angle event counts; absent for the cosine-law simulation.
    pub singles: Option<Vec<AngleCounts>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationOutput {
    pub dataset: CoincidenceDataset,
    pub sidecar: SimulationSidecar,
}

fn dataset_from_counts(angles: &[Angle], counts: &[u64], label: String) -> Result<CoincidenceDataset, DataError> {
    let points = angles.iter().zip(counts).map(|(&a, &c)| DataPoint::new(a, c as f64, (c as f64).sqrt())).collect();
    CoincidenceDataset::new(points, label)
}

/// Simulates each angle `φ_k` with Alice's polarizer at 0 and Bob's at
/// `−φ_k`. Each pair's sides are detected independently with
/// `P(χ1 − φ1)` and `P(χ2 − φ2)`. Rate is the coincidence count and sigma
/// its square root.
pub fn simulate(m: &LhvModel, cfg: &SimulationConfig) -> Result<SimulationOutput, SimulationError> {
    cfg.validate()?;
    let sampler = HiddenPairSampler::new(m)?;
    let det = m.detection();

    let pairs: Vec<u64> = (0..cfg.angles.len() as u64)
        .map(|a| match cfg.noise {
            Noise::BernoulliCounts => Ok(cfg.pairs_per_angle),
            Noise::PoissonRates => {
                let d = Poisson::new(cfg.pairs_per_angle as f64).map_err(|e| SimulationError::Domain(e.to_string()))?;
                Ok(d.sample(&mut substream(cfg.seed, (a << 32) | COUNT_STREAM)) as u64)
            }
        })
        .collect::<Result<_, SimulationError>>()?;

    let tasks: Vec<(usize, u64, u64)> = pairs
        .iter()
        .enumerate()
        .flat_map(|(a, &n)| {
            let blocks = n.div_ceil(BLOCK_PAIRS);
            (0..blocks).map(move |b| (a, b, BLOCK_PAIRS.min(n - b * BLOCK_PAIRS)))
        })
        .collect();

    let block_counts: Vec<(usize, Counts)> = tasks
        .par_iter()
        .map(|&(a, b, n)| {
            let mut rng = substream(cfg.seed, ((a as u64) << 32) | b);
            let phi1 = 0.0;
            let phi2 = -cfg.angles[a].radians();
            let mut c = Counts { pairs: n, ..Counts::default() };
            for _ in 0..n {
                let (chi1, chi2) = sampler.sample(&mut rng);
                let d1 = rng.random::<f64>() < det.value(chi1.radians() - phi1);
                let d2 = rng.random::<f64>() < det.value(chi2.radians() - phi2);
                c.singles1 += d1 as u64;
                c.singles2 += d2 as u64;
                c.coincidences += (d1 && d2) as u64;
            }
            (a, c)
        })
        .collect();

    let mut per_angle = vec![Counts::default(); cfg.angles.len()];
    for (a, c) in block_counts {
        per_angle[a] += c;
    }
    let coincidences: Vec<u64> = per_angle.iter().map(|c| c.coincidences).collect();
    let dataset = dataset_from_counts(&cfg.angles, &coincidences, format!("simulated {} model", m.family()))?;
    Ok(SimulationOutput {
        dataset,
        sidecar: SimulationSidecar {
            seed: cfg.seed,
            pairs_per_angle: cfg.pairs_per_angle,
            noise: cfg.noise,
            singles: Some(
                cfg.angles
                    .iter()
                    .zip(&per_angle)
                    .map(|(a, &counts)| AngleCounts { angle_deg: a.degrees(), counts })
                    .collect(),
            ),
        },
    })
}

/// Cosine-law counts with mean `mean (1 + v cos(2φ + ψ))` per angle.
/// Poisson noise draws the count directly; Bernoulli noise draws it as
/// binomial over `pairs_per_angle` trials.
pub fn simulate_quantum(
    v: f64,
    psi: Angle,
    mean: f64,
    cfg: &SimulationConfig,
) -> Result<SimulationOutput, SimulationError> {
    cfg.validate()?;
    if v.abs() > 1.0 {
        return Err(SimulationError::Domain(format!("|v| must not exceed 1, got {v}")));
    }
    if !(mean >= 0.0) {
        return Err(SimulationError::Domain(format!("mean rate must be non-negative, got {mean}")));
    }
    let counts = cfg
        .angles
        .iter()
        .enumerate()
        .map(|(a, phi)| {
            let mu = mean * (1.0 + v * (2.0 * phi.radians() + psi.radians()).cos());
            if mu < 0.0 {
                return Err(SimulationError::Domain(format!("negative expected count {mu} at {phi}")));
            }
            let mut rng = substream(cfg.seed, (a as u64) << 32);
            match cfg.noise {
                Noise::PoissonRates if mu == 0.0 => Ok(0),
                Noise::PoissonRates => {
                    let d = Poisson::new(mu).map_err(|e| SimulationError::Domain(e.to_string()))?;
                    Ok(d.sample(&mut rng) as u64)
                }
                Noise::BernoulliCounts => {
                    let p = mu / cfg.pairs_per_angle as f64;
                    if p > 1.0 {
                        return Err(SimulationError::Domain(format!(
                            "expected count {mu} exceeds pairs_per_angle {}",
                            cfg.pairs_per_angle
                        )));
                    }
                    let d =
                        Binomial::new(cfg.pairs_per_angle, p).map_err(|e| SimulationError::Domain(e.to_string()))?;
                    Ok(d.sample(&mut rng))
                }
            }
        })
        .collect::<Result<Vec<u64>, SimulationError>>()?;
    let dataset = dataset_from_counts(&cfg.angles, &counts, "simulated cosine law".into())?;
    Ok(SimulationOutput {
        dataset,
        sidecar: SimulationSidecar {
            seed: cfg.seed,
            pairs_per_angle: cfg.pairs_per_angle,
            noise: cfg.noise,
            singles: None,
        },
    })
}
