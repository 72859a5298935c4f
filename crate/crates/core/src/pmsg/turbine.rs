//! Quasi-static turbine dynamics: DC-link energy balance with a hysteretic
//! chopper, the DC-voltage controller producing the active-power demand, and
//! the ramp-limited active-current recovery after a fault.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::aggregation::RampSchedule;
use crate::error::{Error, Result};
use crate::phasor::{orient_dq, OrientedVoltages, SequenceSet};
use crate::pmsg::control::{CurrentRefs, SequenceControl, LVRT_THRESHOLD};
use crate::pmsg::params::PmsgParams;

/// Negative-sequence magnitude above which the converter treats the grid as faulted.
pub const NEG_SEQ_DETECT: f64 = 0.01;

const CURRENT_TOL: f64 = 1e-9;


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Normal,
    Fault,
    Recovery,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmsgState {
    pub v_dc: f64,
    /// Last applied positive-sequence d current.
    pub i_d_pos: f64,
    pub pi_integral: f64,
    pub chopper_active: bool,
    /// Pre-fault active power.
    pub p0: f64,
    /// Pre-fault d current.
    pub i_d0: f64,
    pub mode: Mode,
    /// Time spent in the current recovery, s.
    pub recovery_time: f64,
}

/// Upward moves are limited to `rate * h`; downward moves are immediate.
pub fn ramp_limit(i_prev: f64, i_target: f64, rate: f64, h: f64) -> f64 {
    if i_target > i_prev {
        i_target.min(i_prev + rate * h)
    } else {
        i_target
    }
}

/// One explicit-Euler step of `c v dv/dt = p_in - p_chopper - p_out`.
pub fn dc_link_step(state: &PmsgState, p_in: f64, p_out: f64, h: f64, params: &PmsgParams) -> Result<PmsgState> {
    let mut next = state.clone();
    if next.v_dc >= params.chopper_on {
        next.chopper_active = true;
    } else if next.v_dc <= params.chopper_off {
        next.chopper_active = false;
    }
    let p_chopper = if next.chopper_active { (p_in - p_out).max(0.0) } else { 0.0 };
    let v = state.v_dc + h * (p_in - p_chopper - p_out) / (params.c_dc * state.v_dc);
    if !(v > 0.0 && v <= 10.0) {
        return Err(Error::NonFiniteState(v));
    }
    next.v_dc = v;
    Ok(next)
}

/// Rate limit applied to the d current while recovering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RampProfile {
    Constant { rate: f64 },
    /// Multi-segment schedule of an equivalent machine standing for `members`
    /// identical turbines; rates are converted to the machine's own base.
    Schedule { schedule: RampSchedule, members: usize },
}

impl RampProfile {
    pub fn rate_at(&self, elapsed: f64) -> f64 {
        match self {
            RampProfile::Constant { rate } => *rate,
            RampProfile::Schedule { schedule, members } => schedule.rate_at(elapsed) / *members as f64,
        }
    }
}

/// Result of evaluating the converter at a given terminal voltage.
#[derive(Debug, Clone, Copy)]
pub struct Injection {
    pub voltages: OrientedVoltages,
    pub refs: CurrentRefs,
    /// Network-frame sequence currents, machine base.
    pub currents: SequenceSet,
    pub mode: Mode,
    pub p_demand: f64,
    pub ramp_binding: bool,
}

impl Injection {
    pub fn active_power(&self) -> f64 {
        self.refs.active_power(&self.voltages)
    }
}

/// A turbine together with its control strategy and operating point.
#[derive(Debug, Clone)]
pub struct TurbineModel {
    pub params: PmsgParams,
    pub control: Arc<dyn SequenceControl>,
    /// Machine-side power, held constant over the simulated window.
    pub p_in: f64,
    pub ramp: RampProfile,
}

impl TurbineModel {
    pub fn new(params: PmsgParams, control: Arc<dyn SequenceControl>, p_in: f64) -> Self {
        let ramp = RampProfile::Constant { rate: params.ramp_k };
        Self { params, control, p_in, ramp }
    }

    fn next_mode(&self, state: &PmsgState, v: &OrientedVoltages) -> Mode {
        let disturbed = v.u_pos() < LVRT_THRESHOLD || v.u_neg() >= NEG_SEQ_DETECT;
        match (state.mode, disturbed) {
            (_, true) => Mode::Fault,
            (Mode::Normal, false) => Mode::Normal,
            (Mode::Fault, false) if state.i_d_pos < state.i_d0 - CURRENT_TOL => Mode::Recovery,
            (Mode::Fault, false) => Mode::Normal,
            (Mode::Recovery, false) => Mode::Recovery,
        }
    }

    /// Converter output at terminal voltage `voltage` for the given internal state.
    pub fn injection(&self, state: &PmsgState, voltage: &SequenceSet, h: f64) -> Result<Injection> {
        let v = orient_dq(voltage)?;
        let mode = self.next_mode(state, &v);
        let err = state.v_dc - self.params.v_dc_ref;
        let p_demand = self.p_in + self.params.pi_kp * err + state.pi_integral;
        let mut refs = self.control.current_refs(&v, p_demand, &self.params)?;
        let mut ramp_binding = false;
        if mode == Mode::Recovery {
            let rate = self.ramp.rate_at(state.recovery_time);
            let cap = ramp_limit(state.i_d_pos, refs.pos.d, rate, h);
            if cap < refs.pos.d {
                ramp_binding = true;
                refs = self.control.limit_active(refs, cap);
            }
        }
        Ok(Injection {
            voltages: v,
            refs,
            currents: refs.to_network(v.theta),
            mode,
            p_demand,
            ramp_binding,
        })
    }

    /// Advances the state by `h` using the converter output at `voltage`.
    pub fn step(&self, state: &PmsgState, voltage: &SequenceSet, h: f64) -> Result<(PmsgState, Injection)> {
        let inj = self.injection(state, voltage, h)?;
        let p_out = inj.active_power();
        let mut next = dc_link_step(state, self.p_in, p_out, h, &self.params)?;

        let err = state.v_dc - self.params.v_dc_ref;
        let sat_high = p_out < inj.p_demand - 1e-9;
        let sat_low = inj.p_demand < 0.0;
        if !((sat_high && err > 0.0) || (sat_low && err < 0.0)) {
            next.pi_integral += self.params.pi_ki * err * h;
        }

        next.i_d_pos = inj.refs.pos.d;
        next.mode = inj.mode;
        if inj.mode == Mode::Recovery {
            if !inj.ramp_binding && next.i_d_pos >= state.i_d0 - CURRENT_TOL {
                next.mode = Mode::Normal;
                next.recovery_time = 0.0;
            } else {
                next.recovery_time = state.recovery_time + h;
            }
        } else {
            next.recovery_time = 0.0;
        }
        Ok((next, inj))
    }

    /// Equilibrium state at `voltage`: DC link at its reference, controller
    /// settled, output equal to the machine-side power.
    pub fn steady_state(&self, voltage: &SequenceSet) -> Result<PmsgState> {
        let v = orient_dq(voltage)?;
        let refs = self.control.current_refs(&v, self.p_in, &self.params)?;
        Ok(PmsgState {
            v_dc: self.params.v_dc_ref,
            i_d_pos: refs.pos.d,
            pi_integral: 0.0,
            chopper_active: false,
            p0: self.p_in,
            i_d0: refs.pos.d,
            mode: Mode::Normal,
            recovery_time: 0.0,
        })
    }
}

/// Advances one turbine by one step. Returns the new state and the injected
/// sequence currents in the network frame (machine base).
pub fn turbine_step(
    model: &TurbineModel,
    state: &PmsgState,
    seq_voltage: &SequenceSet,
    h: f64,
) -> Result<(PmsgState, SequenceSet)> {
    let (next, inj) = model.step(state, seq_voltage, h)?;
    Ok((next, inj.currents))
}
