//! Plane angles for polarizer settings.
//!
//! An [`Angle`] stores radians. Polarization directions are only defined
//! modulo π, so most comparisons go through [`Angle::canonical`], which maps
//! into `[0, π)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

/// Canonical angles closer than this to π are snapped to 0.
const WRAP_SNAP: f64 = 1e-12;

/// Tolerance used when deciding that two polarizer angles coincide.
pub const ANGLE_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);
    pub const RIGHT: Angle = Angle(FRAC_PI_2);

    pub const fn from_radians(radians: f64) -> Self {
        Angle(radians)
    }

    pub fn from_degrees(degrees: f64) -> Self {
        Angle(degrees.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// Representative of the polarization direction in `[0, π)`.
    pub fn canonical(self) -> Angle {
        let r = self.0.rem_euclid(PI);
        if r >= PI - WRAP_SNAP {
            Angle(0.0)
        } else {
            Angle(r)
        }
    }

    /// Representative in `[0, π/2]`: canonicalize, then reflect anything
    /// above a right angle to `π - φ`. This is the range the deviation
    /// profile is defined on.
    pub fn folded(self) -> Angle {
        let c = self.canonical().0;
        if c > FRAC_PI_2 {
            Angle(PI - c)
        } else {
            Angle(c)
        }
    }

    /// Distance between two polarization directions, in `[0, π/2]`.
    pub fn polarization_distance(self, other: Angle) -> f64 {
        let d = (self.0 - other.0).rem_euclid(PI);
        d.min(PI - d)
    }

    /// True when both angles describe the same polarization direction.
    pub fn same_polarization(self, other: Angle) -> bool {
        self.polarization_distance(other) <= ANGLE_EPS
    }
}

/// Free-function form of [`Angle::folded`].
pub fn fold_angle(phi: Angle) -> Angle {
    phi.folded()
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}°", format_degrees(self.degrees()))
    }
}

/// Formats a degree value for files: rounded to 1e-9 degree and printed in
/// the shortest form, so `22.5f64.to_radians().to_degrees()` prints `22.5`.
pub fn format_degrees(degrees: f64) -> String {
    let rounded = (degrees * 1e9).round() / 1e9;
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded}")
}
