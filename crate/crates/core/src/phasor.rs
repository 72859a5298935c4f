//! Phasor arithmetic, symmetrical components and the positive-sequence
//! voltage-oriented dq frame.
//!
//! A phasor is a plain [`Complex64`] in per-unit. Angles are reported in
//! radians wrapped to (-pi, pi].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Phasor = Complex64;

/// Below this magnitude the positive-sequence voltage cannot define a frame.
pub const MIN_ORIENTATION_MAGNITUDE: f64 = 1e-9;

/// The Fortescue operator 1∠120°.
pub fn alpha() -> Phasor {
    Phasor::from_polar(1.0, 2.0 * PI / 3.0)
}

pub fn polar(magnitude: f64, angle_rad: f64) -> Phasor {
    Phasor::from_polar(magnitude, angle_rad)
}

pub fn polar_deg(magnitude: f64, angle_deg: f64) -> Phasor {
    Phasor::from_polar(magnitude, angle_deg.to_radians())
}

pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Angle of a phasor in (-pi, pi].
pub fn angle(p: Phasor) -> f64 {
    wrap_angle(p.arg())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SequenceSet {
    pub pos: Phasor,
    pub neg: Phasor,
    #[serde(default)]
    pub zero: Phasor,
}

impl SequenceSet {
    pub fn new(pos: Phasor, neg: Phasor, zero: Phasor) -> Self {
        Self { pos, neg, zero }
    }

    /// Positive and negative components only; zero-sequence is 0.
    pub fn pn(pos: Phasor, neg: Phasor) -> Self {
        Self {
            pos,
            neg,
            zero: Phasor::new(0.0, 0.0),
        }
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.pos * k, self.neg * k, self.zero * k)
    }
}

impl std::ops::Add for SequenceSet {
    type Output = SequenceSet;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.pos + rhs.pos, self.neg + rhs.neg, self.zero + rhs.zero)
    }
}

impl std::ops::Sub for SequenceSet {
    type Output = SequenceSet;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.pos - rhs.pos, self.neg - rhs.neg, self.zero - rhs.zero)
    }
}

impl std::ops::AddAssign for SequenceSet {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DqPair {
    pub d: f64,
    pub q: f64,
}

impl DqPair {
    pub const ZERO: DqPair = DqPair { d: 0.0, q: 0.0 };

    pub fn new(d: f64, q: f64) -> Self {
        Self { d, q }
    }

    pub fn norm(&self) -> f64 {
        self.d.hypot(self.q)
    }
}

/// Sequence voltages expressed in the frame aligned with the positive-sequence voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedVoltages {
    pub pos: DqPair,
    pub neg: DqPair,
    pub theta: f64,
}

impl OrientedVoltages {
    pub fn u_pos(&self) -> f64 {
        self.pos.d
    }

    pub fn u_neg(&self) -> f64 {
        self.neg.norm()
    }
}

pub fn abc_to_sequence(a: Phasor, b: Phasor, c: Phasor) -> SequenceSet {
    let al = alpha();
    let al2 = al * al;
    SequenceSet {
        pos: (a + al * b + al2 * c) / 3.0,
        neg: (a + al2 * b + al * c) / 3.0,
        zero: (a + b + c) / 3.0,
    }
}

pub fn sequence_to_abc(seq: SequenceSet) -> (Phasor, Phasor, Phasor) {
    let al = alpha();
    let al2 = al * al;
    let SequenceSet { pos, neg, zero } = seq;
    (
        zero + pos + neg,
        zero + al2 * pos + al * neg,
        zero + al * pos + al2 * neg,
    )
}

/// Aligns the d axis with the positive-sequence voltage. The positive q
/// component is zero by construction; the negative-sequence phasor is rotated
/// by the same angle.
pub fn orient_dq(seq: &SequenceSet) -> Result<OrientedVoltages> {
    let mag = seq.pos.norm();
    if !(mag >= MIN_ORIENTATION_MAGNITUDE) {
        return Err(Error::ZeroPositiveSequence(mag));
    }
    let theta = angle(seq.pos);
    let neg = seq.neg * Phasor::from_polar(1.0, -theta);
    Ok(OrientedVoltages {
        pos: DqPair::new(mag, 0.0),
        neg: DqPair::new(neg.re, neg.im),
        theta,
    })
}
