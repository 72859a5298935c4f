//! Critical pre-fault powers and the three-way classification of turbine
//! responses to a fault.
//!
//! * Cluster I: the converter can deliver the pre-fault power during the fault.
//! * Cluster II: power is capacity-limited during the fault, and the active
//!   current at clearance already exceeds its pre-fault value (overshoot).
//! * Cluster III: power is capacity-limited and the active current has to
//!   ramp back after clearance.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasor::DqPair;
use crate::pmsg::control::{SequenceControl, EPS_D, LVRT_THRESHOLD};
use crate::pmsg::params::{inverse_wind_power, wind_power, PmsgParams};

/// Positive-sequence voltage assumed before the fault.
pub const U_D0: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPowers {
    pub p_cri1: f64,
    /// May exceed 1.0; every feasible operating point then lies below it.
    pub p_cri2: f64,
    pub v_cri1: f64,
    pub v_cri2: f64,
    /// d current at clearance for a capacity-limited turbine.
    pub i_dcri2: f64,
}

impl CriticalPowers {
    fn with_speeds(p_cri1: f64, p_cri2: f64, i_dcri2: f64, params: &PmsgParams) -> Self {
        let v = |p: f64| inverse_wind_power(p.clamp(0.0, 1.0), params).expect("clamped into range");
        Self {
            p_cri1,
            p_cri2,
            v_cri1: v(p_cri1),
            v_cri2: v(p_cri2),
            i_dcri2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cluster {
    I,
    II,
    III,
}

impl Cluster {
    pub const ALL: [Cluster; 3] = [Cluster::I, Cluster::II, Cluster::III];

    pub fn label(self) -> &'static str {
        match self {
            Cluster::I => "I",
            Cluster::II => "II",
            Cluster::III => "III",
        }
    }
}

impl std::fmt::Display for Cluster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub turbine_id: String,
    pub cluster: Cluster,
    pub criticals: CriticalPowers,
    pub p0: f64,
}

/// Maximum positive-sequence d current left after the negative-sequence and
/// reactive obligations are met.
pub fn strategy1_i_dmax(u_pos: f64, u_neg: f64, params: &PmsgParams) -> f64 {
    let neg = (params.k_neg * u_neg * params.i_n).min(params.i_max);
    let remaining = (params.i_max - neg).max(0.0);
    let i_q = (params.k_pos * (LVRT_THRESHOLD - u_pos) * params.i_n)
        .max(0.0)
        .min(remaining);
    (remaining * remaining - i_q * i_q).max(0.0).sqrt()
}

pub fn critical_powers_strategy1(udq_pos: DqPair, u_neg_mag: f64, params: &PmsgParams) -> CriticalPowers {
    let i_dmax = strategy1_i_dmax(udq_pos.d, u_neg_mag, params);
    CriticalPowers::with_speeds(i_dmax * udq_pos.d, i_dmax * U_D0, i_dmax, params)
}

pub fn critical_powers_strategy2(u_pos_mag: f64, u_neg_mag: f64, params: &PmsgParams) -> Result<CriticalPowers> {
    if !(u_pos_mag - u_neg_mag >= EPS_D) {
        return Err(Error::DegenerateSequenceVoltages {
            u_pos: u_pos_mag,
            u_neg: u_neg_mag,
        });
    }
    let p_cri1 = (u_pos_mag - u_neg_mag) * params.i_max;
    let i_dcri2 = u_pos_mag * params.i_max / (u_pos_mag + u_neg_mag);
    Ok(CriticalPowers::with_speeds(p_cri1, i_dcri2 * U_D0, i_dcri2, params))
}

/// Boundary ties go to the more limited cluster.
pub fn classify(p0: f64, criticals: &CriticalPowers) -> Cluster {
    if p0 < criticals.p_cri1 {
        Cluster::I
    } else if p0 < criticals.p_cri2 {
        Cluster::II
    } else {
        Cluster::III
    }
}

pub fn assign_cluster(
    turbine_id: &str,
    v_w: f64,
    criticals: CriticalPowers,
    params: &PmsgParams,
) -> ClusterAssignment {
    let p0 = wind_power(v_w, params);
    ClusterAssignment {
        turbine_id: turbine_id.to_string(),
        cluster: classify(p0, &criticals),
        criticals,
        p0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub u_pos: f64,
    pub u_neg: f64,
    pub v_cri1: f64,
    pub v_cri2: f64,
    pub strategy: String,
}

/// `n` evenly spaced positive-sequence voltages on `(u_neg + EPS_D, 1]`.
pub fn u_pos_samples(u_neg: f64, n: usize) -> Vec<f64> {
    let lo = u_neg + EPS_D;
    (1..=n).map(|k| lo + (1.0 - lo) * k as f64 / n as f64).collect()
}

/// Critical wind speeds along `u_pos` for a fixed negative-sequence voltage.
pub fn boundary_surface(
    control: &dyn SequenceControl,
    u_neg: f64,
    u_pos: &[f64],
    params: &PmsgParams,
) -> Result<Vec<BoundaryPoint>> {
    u_pos
        .iter()
        .map(|&up| {
            if !(up > u_neg + EPS_D && up <= 1.0) {
                return Err(Error::OutOfRange {
                    value: up,
                    range: "(U- + 0.02, 1]",
                });
            }
            let c = control.critical_powers(up, u_neg, params)?;
            Ok(BoundaryPoint {
                u_pos: up,
                u_neg,
                v_cri1: c.v_cri1,
                v_cri2: c.v_cri2,
                strategy: control.name().to_string(),
            })
        })
        .collect()
}

pub fn write_boundary_csv<W: Write>(out: W, points: &[BoundaryPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
