//! Grid-side converter current references under unbalanced voltages.
//!
//! Two negative-sequence control strategies are provided behind the
//! [`SequenceControl`] trait and looked up by name through a
//! [`ControlRegistry`]:
//!
//! * `unbalance`: positive-sequence reactive support plus negative-sequence
//!   absorption; the remaining converter capacity carries active current.
//! * `oscillation`: currents chosen so the double-frequency active power
//!   vanishes, with the active power capped by the converter limit.
//!
//! Frame convention: voltages are oriented with [`orient_dq`](crate::phasor::orient_dq).
//! The positive-sequence q current is the capacitive reactive current
//! (`Q+ = U_d+ i_q+`). Negative-sequence dq currents map to the network as
//! `(i_d + j i_q)` rotated by the frame angle, so the negative-sequence law
//! behaves as a shunt reactor `I- = j K- U-`.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use crate::clustering::{critical_powers_strategy1, critical_powers_strategy2, CriticalPowers};
use crate::error::{Error, Result};
use crate::phasor::{DqPair, OrientedVoltages, Phasor, SequenceSet};
use crate::pmsg::params::PmsgParams;

/// Positive-sequence voltage below which reactive support is injected.
pub const LVRT_THRESHOLD: f64 = 0.9;

/// Minimum `U+ - U-` accepted by the oscillation-mitigating strategy.
pub const EPS_D: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CurrentRefs {
    pub pos: DqPair,
    pub neg: DqPair,
}

impl CurrentRefs {
    pub fn magnitude_sum(&self) -> f64 {
        self.pos.norm() + self.neg.norm()
    }

    /// DC component of the active power delivered at the oriented voltages.
    pub fn active_power(&self, v: &OrientedVoltages) -> f64 {
        v.pos.d * self.pos.d + v.pos.q * self.pos.q + v.neg.d * self.neg.d + v.neg.q * self.neg.q
    }

    /// Sequence current phasors in the network frame.
    pub fn to_network(&self, theta: f64) -> SequenceSet {
        let rot = Phasor::from_polar(1.0, theta);
        SequenceSet::pn(
            Phasor::new(self.pos.d, -self.pos.q) * rot,
            Phasor::new(self.neg.d, self.neg.q) * rot,
        )
    }
}

/// References for the unbalance-mitigating strategy.
///
/// Capacity priority: negative-sequence current first, then the positive
/// reactive current, then active current with whatever is left.
pub fn current_refs_strategy1(
    udq_pos: DqPair,
    udq_neg: DqPair,
    i_dref1: f64,
    params: &PmsgParams,
) -> CurrentRefs {
    let u_pos = udq_pos.d;
    let k_neg = params.k_neg * params.i_n;
    let mut neg = DqPair::new(-k_neg * udq_neg.q, k_neg * udq_neg.d);
    let neg_mag = neg.norm();
    if neg_mag > params.i_max {
        let s = params.i_max / neg_mag;
        neg = DqPair::new(neg.d * s, neg.q * s);
    }
    let remaining = (params.i_max - neg.norm()).max(0.0);
    let i_q = (params.k_pos * (LVRT_THRESHOLD - u_pos) * params.i_n)
        .max(0.0)
        .min(remaining);
    let i_dmax = (remaining * remaining - i_q * i_q).max(0.0).sqrt();
    let i_d = i_dref1.max(0.0).min(i_dmax);
    CurrentRefs {
        pos: DqPair::new(i_d, i_q),
        neg,
    }
}

/// References for the oscillation-mitigating strategy with zero reactive
/// power demand.
pub fn current_refs_strategy2(
    udq_pos: DqPair,
    udq_neg: DqPair,
    p0: f64,
    params: &PmsgParams,
) -> Result<CurrentRefs> {
    let u_pos = udq_pos.norm();
    let u_neg = udq_neg.norm();
    if !(u_pos - u_neg >= EPS_D) {
        return Err(Error::DegenerateSequenceVoltages { u_pos, u_neg });
    }
    let d = u_pos * u_pos - u_neg * u_neg;
    let p_max = (u_pos - u_neg) * params.i_max;
    let p_ref = p0.max(0.0).min(p_max);
    let c = p_ref / d;
    Ok(CurrentRefs {
        pos: DqPair::new(c * udq_pos.d, c * udq_pos.q),
        neg: DqPair::new(-c * udq_neg.d, -c * udq_neg.q),
    })
}

/// A negative-sequence control strategy of the grid-side converter.
pub trait SequenceControl: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    /// Current references for an active-power demand `p_demand` (machine p.u.).
    fn current_refs(&self, v: &OrientedVoltages, p_demand: f64, params: &PmsgParams) -> Result<CurrentRefs>;

    /// Critical pre-fault powers separating the three response clusters.
    fn critical_powers(&self, u_pos: f64, u_neg: f64, params: &PmsgParams) -> Result<CriticalPowers>;

    /// Caps the positive-sequence d current at `i_d_cap`.
    fn limit_active(&self, refs: CurrentRefs, i_d_cap: f64) -> CurrentRefs {
        CurrentRefs {
            pos: DqPair::new(refs.pos.d.min(i_d_cap), refs.pos.q),
            neg: refs.neg,
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MitigateUnbalance;

impl SequenceControl for MitigateUnbalance {
    fn name(&self) -> &'static str {
        "unbalance"
    }

    fn current_refs(&self, v: &OrientedVoltages, p_demand: f64, params: &PmsgParams) -> Result<CurrentRefs> {
        let i_dref1 = p_demand.max(0.0) / v.pos.d;
        Ok(current_refs_strategy1(v.pos, v.neg, i_dref1, params))
    }

    fn critical_powers(&self, u_pos: f64, u_neg: f64, params: &PmsgParams) -> Result<CriticalPowers> {
        Ok(critical_powers_strategy1(DqPair::new(u_pos, 0.0), u_neg, params))
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MitigateOscillation;

impl SequenceControl for MitigateOscillation {
    fn name(&self) -> &'static str {
        "oscillation"
    }

    fn current_refs(&self, v: &OrientedVoltages, p_demand: f64, params: &PmsgParams) -> Result<CurrentRefs> {
        current_refs_strategy2(v.pos, v.neg, p_demand, params)
    }

    fn critical_powers(&self, u_pos: f64, u_neg: f64, params: &PmsgParams) -> Result<CriticalPowers> {
        critical_powers_strategy2(u_pos, u_neg, params)
    }

    // Scales every component so the oscillation-free ratio is preserved.
    fn limit_active(&self, refs: CurrentRefs, i_d_cap: f64) -> CurrentRefs {
        if refs.pos.d <= i_d_cap || refs.pos.d <= 0.0 {
            return refs;
        }
        let s = i_d_cap.max(0.0) / refs.pos.d;
        CurrentRefs {
            pos: DqPair::new(refs.pos.d * s, refs.pos.q * s),
            neg: DqPair::new(refs.neg.d * s, refs.neg.q * s),
        }
    }
}

/// Name → strategy lookup.
#[derive(Debug, Clone)]
pub struct ControlRegistry {
    entries: BTreeMap<String, Arc<dyn SequenceControl>>,
}

impl Default for ControlRegistry {
    fn default() -> Self {
        let mut r = Self { entries: BTreeMap::new() };
        r.register(Arc::new(MitigateUnbalance));
        r.register(Arc::new(MitigateOscillation));
        r
    }
}

impl ControlRegistry {
    pub fn register(&mut self, control: Arc<dyn SequenceControl>) {
        self.entries.insert(control.name().to_string(), control);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SequenceControl>> {
        self.entries.get(name).cloned().ok_or_else(|| Error::Unknown {
            kind: "control strategy",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Looks up one of the built-in strategies.
pub fn control_by_name(name: &str) -> Result<Arc<dyn SequenceControl>> {
    ControlRegistry::default().get(name)
}
