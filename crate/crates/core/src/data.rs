//! Coincidence datasets, CSV ingestion, the bundled reference record, and the
//! efficiency context that selects a model family.

use std::f64::consts::PI;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::{format_degrees, Angle, ANGLE_EPS};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("missing column `{0}` in header (expected angle_deg,rate,sigma)")]
    MissingColumn(&'static str),
    #[error("fewer than 3 points ({0} given)")]
    TooFewPoints(usize),
    #[error("duplicate angle: {first_deg}° and {second_deg}° are the same polarization")]
    DuplicateAngle { first_deg: f64, second_deg: f64 },
    #[error("point {index}: negative {field} {value}")]
    Negative { index: usize, field: &'static str, value: f64 },
    #[error("point {index}: non-finite value")]
    NonFinite { index: usize },
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataPoint {
    pub angle: Angle,
    /// Coincidences per accumulation window.
    pub rate: f64,
    /// One standard deviation of `rate`. Zero means exact.
    pub sigma: f64,
}

impl DataPoint {
    pub fn new(angle: Angle, rate: f64, sigma: f64) -> Self {
        DataPoint { angle, rate, sigma }
    }

    pub fn from_degrees(angle_deg: f64, rate: f64, sigma: f64) -> Self {
        DataPoint::new(Angle::from_degrees(angle_deg), rate, sigma)
    }
}

/// Coincidence rate versus polarizer-difference angle.
///
/// Construction enforces: at least three points, finite non-negative rates
/// and sigmas, and pairwise distinct angles modulo π. Row order is kept.
#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceDataset {
    points: Vec<DataPoint>,
    label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
}

impl CoincidenceDataset {
    pub fn new(points: Vec<DataPoint>, label: impl Into<String>) -> Result<Self, DataError> {
        if points.len() < 3 {
            return Err(DataError::TooFewPoints(points.len()));
        }
        for (index, p) in points.iter().enumerate() {
            if !(p.angle.radians().is_finite() && p.rate.is_finite() && p.sigma.is_finite()) {
                return Err(DataError::NonFinite { index });
            }
            if p.rate < 0.0 {
                return Err(DataError::Negative { index, field: "rate", value: p.rate });
            }
            if p.sigma < 0.0 {
                return Err(DataError::Negative { index, field: "sigma", value: p.sigma });
            }
        }
        for (i, a) in points.iter().enumerate() {
            for b in &points[i + 1..] {
                if a.angle.same_polarization(b.angle) {
                    return Err(DataError::DuplicateAngle {
                        first_deg: a.angle.degrees(),
                        second_deg: b.angle.degrees(),
                    });
                }
            }
        }
        Ok(CoincidenceDataset { points, label: label.into() })
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn angles(&self) -> impl Iterator<Item = Angle> + '_ {
        self.points.iter().map(|p| p.angle)
    }

    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.rate)
    }

    /// The point measured at `angle` (mod π), if any.
    pub fn point_at(&self, angle: Angle) -> Option<&DataPoint> {
        self.points.iter().find(|p| p.angle.same_polarization(angle))
    }

    /// If the canonical angles are exactly `{πk/n : k = 0..n}` in some order,
    /// returns `n`.
    pub fn uniform_grid_size(&self) -> Option<usize> {
        let n = self.points.len();
        let step = PI / n as f64;
        let mut seen = vec![false; n];
        for p in &self.points {
            let c = p.angle.canonical().radians();
            let k = (c / step).round();
            if (c - k * step).abs() > ANGLE_EPS {
                return None;
            }
            let k = (k as usize) % n;
            if std::mem::replace(&mut seen[k], true) {
                return None;
            }
        }
        Some(n)
    }

    pub fn is_uniform_grid(&self) -> bool {
        self.uniform_grid_size().is_some()
    }

    /// Same angles and label, every rate and sigma multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, DataError> {
        let points = self.points.iter().map(|p| DataPoint::new(p.angle, p.rate * factor, p.sigma * factor)).collect();
        CoincidenceDataset::new(points, self.label.clone())
    }

    /// Same angles, new rates and sigmas.
    pub fn with_rates(&self, rates: &[f64]) -> Result<Self, DataError> {
        let points = self.points.iter().zip(rates).map(|(p, &r)| DataPoint::new(p.angle, r, p.sigma)).collect();
        CoincidenceDataset::new(points, self.label.clone())
    }

    /// Serializes as `angle_deg,rate,sigma` CSV with LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("angle_deg,rate,sigma\n");
        for p in &self.points {
            out.push_str(&format_degrees(p.angle.degrees()));
            out.push(',');
            out.push_str(&p.rate.to_string());
            out.push(',');
            out.push_str(&p.sigma.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_csv<R: Read>(reader: R, label: impl Into<String>) -> Result<Self, DataError> {
        load_dataset(reader, DatasetFormat::Csv, label)
    }
}

/// Reads a dataset. The CSV header must name `angle_deg`, `rate` and `sigma`
/// (any order). Parse errors carry the 1-based line number.
pub fn load_dataset<R: Read>(
    source: R,
    format: DatasetFormat,
    label: impl Into<String>,
) -> Result<CoincidenceDataset, DataError> {
    match format {
        DatasetFormat::Csv => load_csv(source, label.into()),
    }
}

fn load_csv<R: Read>(source: R, label: String) -> Result<CoincidenceDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).has_headers(true).from_reader(source);
    let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let column = |name: &'static str| {
        headers.iter().position(|h| h.trim_start_matches('\u{feff}') == name).ok_or(DataError::MissingColumn(name))
    };
    let (ia, ir, is) = (column("angle_deg")?, column("rate")?, column("sigma")?);

    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize, name: &str| -> Result<f64, DataError> {
            let raw =
                record.get(i).ok_or_else(|| DataError::Parse { line, message: format!("missing field `{name}`") })?;
            raw.parse::<f64>()
                .map_err(|_| DataError::Parse { line, message: format!("`{raw}` is not a number (column `{name}`)") })
        };
        points.push(DataPoint::from_degrees(field(ia, "angle_deg")?, field(ir, "rate")?, field(is, "sigma")?));
    }
    CoincidenceDataset::new(points, label)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> DataError {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    DataError::Parse { line, message: e.to_string() }
}

/// Angles (degrees), rates and 1σ errors of the reference coincidence table.
pub const REFERENCE_TABLE: [(f64, f64, f64); 8] = [
    (0.0, 9906.2, 21.0),
    (22.5, 8439.6, 18.6),
    (45.0, 4936.6, 13.6),
    (67.5, 1454.1, 9.0),
    (90.0, 108.0, 8.2),
    (112.5, 1481.3, 11.9),
    (135.0, 4983.5, 14.1),
    (157.5, 8499.2, 19.0),
];

pub const REFERENCE_LABEL: &str = "reference coincidence table";

/// The eight-angle reference measurement (22.5° grid).
pub fn builtin_reference_dataset() -> CoincidenceDataset {
    let points = REFERENCE_TABLE.iter().map(|&(a, r, s)| DataPoint::from_degrees(a, r, s)).collect();
    CoincidenceDataset::new(points, REFERENCE_LABEL).expect("reference table is valid")
}

/// Nested families of local hidden-variable models, from the most general
/// (`Lhv0`) to the most restricted (`Lhv4`). The derived ordering follows
/// restriction: `a <= b` means family `a` contains family `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "LHV0")]
    Lhv0,
    #[serde(rename = "LHV1")]
    Lhv1,
    #[serde(rename = "LHV2")]
    Lhv2,
    #[serde(rename = "LHV3")]
    Lhv3,
    #[serde(rename = "LHV4")]
    Lhv4,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Lhv0, Family::Lhv1, Family::Lhv2, Family::Lhv3, Family::Lhv4];

    /// True when every model of `other` is also a model of `self`.
    pub fn contains(self, other: Family) -> bool {
        self <= other
    }

    /// The efficiency the family is tested with for a post-selected source
    /// with 0.62 quantum-efficiency detectors, where one is fixed.
    pub fn nominal_eta(self) -> Option<f64> {
        match self {
            Family::Lhv2 => Some(0.31),
            Family::Lhv3 | Family::Lhv4 => Some(0.62),
            Family::Lhv0 | Family::Lhv1 => None,
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Family::Lhv0 => "general local hidden variables: any density and detection probabilities",
            Family::Lhv1 => "two angular hidden variables, difference-only density, common even detection function",
            Family::Lhv2 => "LHV1 with partial fair sampling, eta = half the detector quantum efficiency",
            Family::Lhv3 => "LHV2 restricted to cross-going pairs, eta = detector quantum efficiency",
            Family::Lhv4 => "LHV3 with the density (1/pi^2)[1 + (1+e)cos 2x + e cos 4x], e in [0, 1/3]",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = *self as u8;
        write!(f, "LHV{n}")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ContextError {
    #[error("efficiency must lie in (0, 1], got {0}")]
    EtaOutOfRange(f64),
    #[error("unknown family `{0}` (expected LHV0..LHV4)")]
    UnknownFamily(String),
    #[error("transmission factor must lie in (0, 1], got {0}")]
    BadTransmission(f64),
}

impl FromStr for Family {
    type Err = ContextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LHV0" => Ok(Family::Lhv0),
            "LHV1" => Ok(Family::Lhv1),
            "LHV2" => Ok(Family::Lhv2),
            "LHV3" => Ok(Family::Lhv3),
            "LHV4" => Ok(Family::Lhv4),
            _ => Err(ContextError::UnknownFamily(s.to_string())),
        }
    }
}

/// The efficiency plugged into the inequality together with the family it
/// encodes. Which η is appropriate depends on which auxiliary assumptions
/// the tested family carries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EfficiencyContext {
    eta: f64,
    family: Family,
}

impl EfficiencyContext {
    pub fn new(eta: f64, family: Family) -> Result<Self, ContextError> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(ContextError::EtaOutOfRange(eta));
        }
        Ok(EfficiencyContext { eta, family })
    }

    /// Context at the family's nominal efficiency.
    pub fn nominal(family: Family) -> Option<Self> {
        family.nominal_eta().map(|eta| EfficiencyContext { eta, family })
    }

    /// Partial fair sampling: the overall efficiency divided by the
    /// transmission of every passive device in the beam path.
    pub fn with_transmissions(overall_eta: f64, transmissions: &[f64], family: Family) -> Result<Self, ContextError> {
        let mut product = 1.0;
        for &f in transmissions {
            if !(f > 0.0 && f <= 1.0) {
                return Err(ContextError::BadTransmission(f));
            }
            product *= f;
        }
        EfficiencyContext::new(overall_eta / product, family)
    }

    /// From the detectors' quantum efficiency; a post-selected source halves it.
    pub fn from_detector_efficiency(
        quantum_efficiency: f64,
        post_selected: bool,
        family: Family,
    ) -> Result<Self, ContextError> {
        let eta = if post_selected { quantum_efficiency / 2.0 } else { quantum_efficiency };
        EfficiencyContext::new(eta, family)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn family(&self) -> Family {
        self.family
    }
}
