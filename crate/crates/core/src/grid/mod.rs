//! External grid as a sequence-domain Thevenin source behind the farm
//! transformer, with shunt faults on the transformer's grid-side bus.
//!
//! ```text
//! E --z_k-- F --z_t-- PCC <-- farm
//!           |
//!         fault
//! ```

pub mod pcc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasor::{Phasor, SequenceSet};

pub use pcc::{iterate_pcc_voltage, PccIterationResult};

fn zero() -> Phasor {
    Phasor::new(0.0, 0.0)
}

fn default_frequency() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheveninGrid {
    pub emf: Phasor,
    pub z1: Phasor,
    pub z2: Phasor,
    pub z0: Phasor,
    /// Farm transformer leakage impedance.
    pub z_transformer: Phasor,
    /// Grid-side winding grounded (YNd); otherwise the transformer presents
    /// no zero-sequence path at F. The farm side is always delta.
    #[serde(default)]
    pub transformer_grounded_hv: bool,
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
}

impl TheveninGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.z1.norm() > 0.0) {
            return Err(Error::validation("source-impedance", "|z1| must be > 0"));
        }
        if !(self.frequency_hz > 0.0) {
            return Err(Error::validation("frequency", "frequency must be > 0"));
        }
        Ok(())
    }

    /// Sequence impedances seen from F with the farm open.
    fn thevenin(&self) -> [Phasor; 3] {
        let z0 = if self.transformer_grounded_hv {
            if self.z0.norm() == 0.0 || self.z_transformer.norm() == 0.0 {
                zero()
            } else {
                self.z0 * self.z_transformer / (self.z0 + self.z_transformer)
            }
        } else {
            self.z0
        };
        [self.z1, self.z2, z0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultKind {
    None,
    #[serde(rename = "LG")]
    Lg,
    #[serde(rename = "LL")]
    Ll,
    #[serde(rename = "LLG")]
    Llg,
    #[serde(rename = "3P")]
    ThreePhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub kind: FaultKind,
    #[serde(default = "zero")]
    pub z_fault: Phasor,
    #[serde(default = "zero")]
    pub z_ground: Phasor,
    pub t_start: f64,
    pub t_clear: f64,
}

impl FaultSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_start < self.t_clear) {
            return Err(Error::validation("fault-window", "t_start must precede t_clear"));
        }
        if self.z_fault.re < 0.0 || self.z_ground.re < 0.0 {
            return Err(Error::validation("fault-impedance", "fault resistances must be >= 0"));
        }
        Ok(())
    }

    /// The same fault description with the fault removed.
    pub fn cleared(&self) -> FaultSpec {
        FaultSpec {
            kind: FaultKind::None,
            ..self.clone()
        }
    }
}

fn checked_div(num: Phasor, den: Phasor) -> Result<Phasor> {
    if den.norm() < 1e-14 {
        return Err(Error::SingularNetwork);
    }
    Ok(num / den)
}

/// PCC sequence voltages for the farm's injected sequence currents (system
/// base, flowing into the PCC). The PCC zero sequence is blocked by the
/// delta winding and reported as 0.
pub fn fault_sequence_voltages(grid: &TheveninGrid, fault: &FaultSpec, farm_injection: &SequenceSet) -> Result<SequenceSet> {
    let z = grid.thevenin();
    let inj = [farm_injection.pos, farm_injection.neg, zero()];
    let vp = [grid.emf + z[0] * inj[0], z[1] * inj[1], zero()];
    let (zf, zg) = (fault.z_fault, fault.z_ground);
    let i: [Phasor; 3] = match fault.kind {
        FaultKind::None => [zero(); 3],
        FaultKind::ThreePhase => [checked_div(vp[0], z[0] + zf)?, checked_div(vp[1], z[1] + zf)?, zero()],
        FaultKind::Lg => {
            let i0 = checked_div(vp[0] + vp[1] + vp[2], z[0] + z[1] + z[2] + zf * 3.0)?;
            [i0; 3]
        }
        FaultKind::Ll => {
            let i1 = checked_div(vp[0] - vp[1], z[0] + z[1] + zf)?;
            [i1, -i1, zero()]
        }
        FaultKind::Llg => {
            let zp = [z[0] + zf, z[1] + zf, z[2] + zf + zg * 3.0];
            let mut num = zero();
            let mut den = zero();
            for k in 0..3 {
                let y = checked_div(Phasor::new(1.0, 0.0), zp[k])?;
                num += vp[k] * y;
                den += y;
            }
            let w = checked_div(num, den)?;
            [(vp[0] - w) / zp[0], (vp[1] - w) / zp[1], (vp[2] - w) / zp[2]]
        }
    };
    let vf = [vp[0] - z[0] * i[0], vp[1] - z[1] * i[1]];
    Ok(SequenceSet::pn(
        vf[0] + grid.z_transformer * inj[0],
        vf[1] + grid.z_transformer * inj[1],
    ))
}

/// `V_pcc = a + B [I+, I-]`, exact because the grid is linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineGrid {
    pub a: [Phasor; 2],
    pub b: [[Phasor; 2]; 2],
}

impl AffineGrid {
    pub fn new(grid: &TheveninGrid, fault: &FaultSpec) -> Result<Self> {
        let base = fault_sequence_voltages(grid, fault, &SequenceSet::default())?;
        let one = Phasor::new(1.0, 0.0);
        let vp = fault_sequence_voltages(grid, fault, &SequenceSet::pn(one, zero()))? - base;
        let vn = fault_sequence_voltages(grid, fault, &SequenceSet::pn(zero(), one))? - base;
        Ok(Self {
            a: [base.pos, base.neg],
            b: [[vp.pos, vn.pos], [vp.neg, vn.neg]],
        })
    }

    pub fn voltages(&self, injection: &SequenceSet) -> SequenceSet {
        let (ip, in_) = (injection.pos, injection.neg);
        SequenceSet::pn(
            self.a[0] + self.b[0][0] * ip + self.b[0][1] * in_,
            self.a[1] + self.b[1][0] * ip + self.b[1][1] * in_,
        )
    }
}
