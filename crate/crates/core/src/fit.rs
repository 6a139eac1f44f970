//! Cosine-law fitting of coincidence data.
//!
//! The quantum prediction for the coincidence rate is
//! `R(φ) = A [1 + V cos(2φ + ψ)]`. In the basis `{1, cos 2φ, sin 2φ}` this is
//! linear, `R = a + b cos 2φ + c sin 2φ`, with `A = a`, `V = √(b² + c²)/a`
//! and `ψ = atan2(−c, b)`, so the fit is an exact 3×3 least-squares solve.

use std::f64::consts::SQRT_2;

use nalgebra::{Matrix3, Vector3};
use serde::ser::{Serialize, SerializeStruct, Serializer};
use thiserror::Error;

use crate::angle::Angle;
use crate::data::CoincidenceDataset;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("dataset angles are not a uniform grid φ_k = πk/n")]
    NonUniformGrid,
    #[error("need at least 3 points after exclusions, {0} remain")]
    TooFewPoints(usize),
    #[error("normal equations are singular for these angles")]
    Singular,
    #[error("inverse-variance weighting needs sigma > 0 (zero at {angle_deg}°)")]
    ZeroSigma { angle_deg: f64 },
    #[error("excluded angle {angle_deg}° is not in the dataset")]
    UnknownExclusion { angle_deg: f64 },
    #[error("dataset has no point at {angle_deg}°")]
    MissingAngle { angle_deg: f64 },
    #[error("{0}")]
    Domain(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Weighting {
    #[default]
    Uniform,
    InverseVariance,
}

/// First-order (linearized) 1σ uncertainties of the fitted parameters,
/// propagated from the per-point sigmas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitUncertainty {
    pub mean_rate: f64,
    pub visibility: f64,
    /// Radians. Infinite when the fitted visibility is exactly zero.
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CosineFit {
    pub mean_rate: f64,
    pub visibility: f64,
    pub phase: Angle,
    pub excluded_angles: Vec<Angle>,
    /// `(data − model)/mean_rate` for each point that took part in the fit,
    /// in dataset order.
    pub residuals: Vec<f64>,
    pub weighting: Weighting,
    pub uncertainty: FitUncertainty,
}

impl CosineFit {
    /// `⟨R⟩ [1 + V cos(2φ + ψ)]`.
    pub fn predict(&self, phi: Angle) -> f64 {
        self.mean_rate * (1.0 + self.visibility * (2.0 * phi.radians() + self.phase.radians()).cos())
    }
}

impl Serialize for CosineFit {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("CosineFit", 5)?;
        s.serialize_field("mean_rate", &self.mean_rate)?;
        s.serialize_field("visibility", &self.visibility)?;
        s.serialize_field("phase_deg", &self.phase.degrees())?;
        let excluded: Vec<f64> = self.excluded_angles.iter().map(|a| a.degrees()).collect();
        s.serialize_field("excluded_angles_deg", &excluded)?;
        s.serialize_field("residuals", &self.residuals)?;
        s.end()
    }
}

/// `(1/n) Σ R(φ_k)`.
pub fn mean_rate(d: &CoincidenceDataset) -> f64 {
    d.rates().sum::<f64>() / d.len() as f64
}

/// Discrete visibility `2 Σ R(φ_k) cos 2φ_k / (n ⟨R⟩)` on a uniform grid;
/// the ψ = 0 projection of the cosine fit.
pub fn visibility_discrete(d: &CoincidenceDataset) -> Result<f64, FitError> {
    let n = d.uniform_grid_size().ok_or(FitError::NonUniformGrid)? as f64;
    let mean = mean_rate(d);
    if mean <= 0.0 {
        return Err(FitError::Domain("mean rate is zero".into()));
    }
    let s: f64 = d.points().iter().map(|p| p.rate * (2.0 * p.angle.radians()).cos()).sum();
    Ok(2.0 * s / (n * mean))
}

/// Least-squares fit of `A [1 + V cos(2φ + ψ)]` over the points whose angle
/// is not in `exclude` (compared modulo π).
pub fn fit_cosine(d: &CoincidenceDataset, exclude: &[Angle], weighting: Weighting) -> Result<CosineFit, FitError> {
    for e in exclude {
        if d.point_at(*e).is_none() {
            return Err(FitError::UnknownExclusion { angle_deg: e.degrees() });
        }
    }
    let used: Vec<_> = d.points().iter().filter(|p| !exclude.iter().any(|e| e.same_polarization(p.angle))).collect();
    if used.len() < 3 {
        return Err(FitError::TooFewPoints(used.len()));
    }

    let mut weights = Vec::with_capacity(used.len());
    for p in &used {
        weights.push(match weighting {
            Weighting::Uniform => 1.0,
            Weighting::InverseVariance => {
                if p.sigma <= 0.0 {
                    return Err(FitError::ZeroSigma { angle_deg: p.angle.degrees() });
                }
                1.0 / (p.sigma * p.sigma)
            }
        });
    }

    let basis = |phi: Angle| {
        let t = 2.0 * phi.radians();
        Vector3::new(1.0, t.cos(), t.sin())
    };
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    // Middle of the sandwich covariance, Xᵀ W Σ W X.
    let mut meat = Matrix3::zeros();
    for (p, &w) in used.iter().zip(&weights) {
        let x = basis(p.angle);
        let outer = x * x.transpose();
        normal += outer * w;
        rhs += x * (w * p.rate);
        meat += outer * (w * w * p.sigma * p.sigma);
    }
    let scale = normal.trace();
    if normal.determinant().abs() <= 1e-12 * scale * scale * scale {
        return Err(FitError::Singular);
    }
    let inv = normal.try_inverse().ok_or(FitError::Singular)?;
    let beta = inv * rhs;
    let cov = inv * meat * inv;
    let (a, b, c) = (beta[0], beta[1], beta[2]);
    if a <= 0.0 {
        return Err(FitError::Domain(format!("fitted mean rate {a} is not positive")));
    }
    let r = b.hypot(c);
    let visibility = r / a;
    let phase = (-c).atan2(b);

    let grad_v =
        if r > 0.0 { Vector3::new(-visibility / a, b / (a * r), c / (a * r)) } else { Vector3::new(0.0, 0.0, 0.0) };
    let var_v = (grad_v.transpose() * cov * grad_v)[0];
    let phase_sigma = if r > 0.0 {
        let g = Vector3::new(0.0, c / (r * r), -b / (r * r));
        (g.transpose() * cov * g)[0].max(0.0).sqrt()
    } else {
        f64::INFINITY
    };

    let mut fit = CosineFit {
        mean_rate: a,
        visibility,
        phase: Angle::from_radians(phase),
        excluded_angles: exclude.to_vec(),
        residuals: Vec::new(),
        weighting,
        uncertainty: FitUncertainty {
            mean_rate: cov[(0, 0)].max(0.0).sqrt(),
            visibility: var_v.max(0.0).sqrt(),
            phase: phase_sigma,
        },
    };
    fit.residuals = used.iter().map(|p| (p.rate - fit.predict(p.angle)) / a).collect();
    Ok(fit)
}

/// Rate predicted by a fit at `phi`.
pub fn predict_rate(f: &CosineFit, phi: Angle) -> f64 {
    f.predict(phi)
}

/// Visibilities from the 0°/90° and 22.5°/67.5° pairs. Both equal V for a
/// cosine law with ψ = 0.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct VisibilityPair {
    pub v_a: f64,
    pub v_b: f64,
    /// `V_B / V_A`.
    pub ratio: f64,
    /// First-order propagated uncertainty of the ratio, summing the absolute
    /// contributions of the four rates (worst-case linear propagation).
    pub ratio_sigma: f64,
    /// Same propagation with contributions added in quadrature.
    pub ratio_sigma_quadrature: f64,
}

pub fn visibility_pair(d: &CoincidenceDataset) -> Result<VisibilityPair, FitError> {
    let rate =
        |deg: f64| d.point_at(Angle::from_degrees(deg)).copied().ok_or(FitError::MissingAngle { angle_deg: deg });
    let (p0, p22, p67, p90) = (rate(0.0)?, rate(22.5)?, rate(67.5)?, rate(90.0)?);

    let sa = p0.rate + p90.rate;
    let sb = p22.rate + p67.rate;
    if sa <= 0.0 || sb <= 0.0 {
        return Err(FitError::Domain("visibility pair needs positive rate sums".into()));
    }
    let v_a = (p0.rate - p90.rate) / sa;
    let v_b = SQRT_2 * (p22.rate - p67.rate) / sb;
    if v_a == 0.0 {
        return Err(FitError::Domain("V_A is zero; ratio undefined".into()));
    }
    let ratio = v_b / v_a;

    // d(ratio) = dV_B / V_A − V_B dV_A / V_A²
    let dva = [2.0 * p90.rate / (sa * sa), -2.0 * p0.rate / (sa * sa)];
    let dvb = [2.0 * SQRT_2 * p67.rate / (sb * sb), -2.0 * SQRT_2 * p22.rate / (sb * sb)];
    let contributions = [
        -v_b / (v_a * v_a) * dva[0] * p0.sigma,
        -v_b / (v_a * v_a) * dva[1] * p90.sigma,
        dvb[0] / v_a * p22.sigma,
        dvb[1] / v_a * p67.sigma,
    ];
    Ok(VisibilityPair {
        v_a,
        v_b,
        ratio,
        ratio_sigma: contributions.iter().map(|c| c.abs()).sum(),
        ratio_sigma_quadrature: contributions.iter().map(|c| c * c).sum::<f64>().sqrt(),
    })
}

/// Overall detection efficiency `4⟨R12⟩/(R1 + R2)` from the mean coincidence
/// rate and the two single rates.
pub fn eta_overall(mean_coincidence: f64, r1: f64, r2: f64) -> Result<f64, FitError> {
    let denom = r1 + r2;
    if !(denom > 0.0) {
        return Err(FitError::Domain(format!("single rates must sum to a positive value, got {denom}")));
    }
    Ok(4.0 * mean_coincidence / denom)
}
