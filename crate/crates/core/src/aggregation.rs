//! Cluster equivalents: capacity-weighted machines and the multi-segment
//! recovery schedule of the ramp-limited cluster.

use serde::{Deserialize, Serialize};

use crate::clustering::{Cluster, ClusterAssignment, U_D0};
use crate::error::{Error, Result};
use crate::network::{equivalent_collector_impedance, Farm, VoltageSolution};
use crate::phasor::{Phasor, SequenceSet};
use crate::pmsg::control::SequenceControl;
use crate::pmsg::params::{inverse_wind_power, wind_power, PmsgParams};

/// Breakpoints closer than this are merged.
pub const BREAKPOINT_TOL: f64 = 1e-12;

const PARAM_TOL: f64 = 1e-9;

/// Piecewise-constant recovery-rate limit, time measured from clearance.
/// `rates[j]` applies on `[breakpoints[j-1], breakpoints[j])`, `tail_rate` after
/// the last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub breakpoints: Vec<f64>,
    pub rates: Vec<f64>,
    pub tail_rate: f64,
}

impl RampSchedule {
    pub fn rate_at(&self, t: f64) -> f64 {
        self.breakpoints
            .iter()
            .position(|&b| t < b)
            .map_or(self.tail_rate, |j| self.rates[j])
    }

    /// `∫₀ᵗ rate`
    pub fn integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        let mut start = 0.0;
        for (&b, &r) in self.breakpoints.iter().zip(&self.rates) {
            if t <= b {
                return acc + r * (t - start).max(0.0);
            }
            acc += r * (b - start);
            start = b;
        }
        acc + self.tail_rate * (t - start).max(0.0)
    }
}

pub fn ramp_schedule(t_sorted: &[f64], k: f64) -> RampSchedule {
    let mut breakpoints: Vec<f64> = Vec::new();
    let mut multiplicity: Vec<usize> = Vec::new();
    for &t in t_sorted {
        match breakpoints.last() {
            Some(&last) if (t - last).abs() <= BREAKPOINT_TOL => *multiplicity.last_mut().unwrap() += 1,
            _ => {
                breakpoints.push(t);
                multiplicity.push(1);
            }
        }
    }
    let mut active = t_sorted.len();
    let mut rates = Vec::with_capacity(breakpoints.len());
    for m in &multiplicity {
        rates.push(active as f64 * k);
        active -= m;
    }
    RampSchedule {
        breakpoints,
        rates,
        tail_rate: k,
    }
}

fn check_equal(members: &[PmsgParams], name: &'static str, f: impl Fn(&PmsgParams) -> f64) -> Result<()> {
    let first = f(&members[0]);
    if members.iter().any(|m| (f(m) - first).abs() > PARAM_TOL * first.abs().max(1.0)) {
        return Err(Error::HeterogeneousParams(name));
    }
    Ok(())
}

/// Parallel combination of member impedances.
fn parallel(z: impl Iterator<Item = Phasor>) -> Phasor {
    let mut y = Phasor::new(0.0, 0.0);
    for zi in z {
        if zi.norm() == 0.0 {
            return Phasor::new(0.0, 0.0);
        }
        y += zi.inv();
    }
    y.inv()
}

pub fn capacity_weighted_params(members: &[PmsgParams]) -> Result<PmsgParams> {
    if members.is_empty() {
        return Err(Error::EmptyCluster);
    }
    check_equal(members, "k_pos", |p| p.k_pos)?;
    check_equal(members, "k_neg", |p| p.k_neg)?;
    check_equal(members, "i_n", |p| p.i_n)?;
    check_equal(members, "i_max", |p| p.i_max)?;
    check_equal(members, "ramp_k", |p| p.ramp_k)?;

    let n = members.len() as f64;
    let s_eq: f64 = members.iter().map(|p| p.s_rated).sum();
    let z = parallel(members.iter().map(|p| Phasor::new(p.r_stator, p.x_stator)));
    let mut eq = members[0].clone();
    eq.s_rated = s_eq;
    eq.r_stator = z.re;
    eq.x_stator = z.im;
    eq.h_turbine = members.iter().map(|p| p.h_turbine).sum::<f64>() / n;
    eq.h_generator = members.iter().map(|p| p.h_generator).sum::<f64>() / n;
    eq.c_dc = members.iter().map(|p| p.c_dc * p.s_rated).sum::<f64>() / s_eq;
    Ok(eq)
}

/// Recovery durations `(i_d0 - i_dcri2) / k` of ramp-limited members, sorted.
/// Each member is `(wind speed, |U+|, |U-|)` at its terminal.
pub fn recovery_durations(members: &[(f64, f64, f64)], control: &dyn SequenceControl, params: &PmsgParams) -> Result<Vec<f64>> {
    let mut t = Vec::with_capacity(members.len());
    for (k, &(v_w, u_pos, u_neg)) in members.iter().enumerate() {
        let i_d0 = wind_power(v_w, params) / U_D0;
        let i_dcri2 = control.critical_powers(u_pos, u_neg, params)?.i_dcri2;
        if i_d0 <= i_dcri2 {
            return Err(Error::NotClusterThree(format!("#{k}")));
        }
        t.push((i_d0 - i_dcri2) / params.ramp_k);
    }
    t.sort_by(f64::total_cmp);
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalentMachine {
    pub id: String,
    /// `None` for the single-machine equivalent of the whole farm.
    pub cluster: Option<Cluster>,
    pub members: Vec<String>,
    pub params: PmsgParams,
    /// Pre-fault power, own base.
    pub p0: f64,
    /// Equilibrium wind speed, m/s.
    pub wind_speed: f64,
    /// Equivalent collector impedance, system base.
    pub z_eq: Phasor,
    pub ramp: Option<RampSchedule>,
    /// Clearance current of each member, own base (ramp-limited cluster only).
    #[serde(default)]
    pub member_i_dcri2: Vec<f64>,
    #[serde(default)]
    pub member_i_d0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalentFarm {
    pub s_base: f64,
    pub strategy: String,
    /// PCC voltages at which the equivalent was built.
    pub u_pcc: SequenceSet,
    pub machines: Vec<EquivalentMachine>,
}

impl EquivalentFarm {
    pub fn rating_mva(&self) -> f64 {
        self.machines.iter().map(|m| m.params.s_rated).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("equivalent farm serializes")
    }
}

fn aggregate(
    farm: &Farm,
    idx: &[usize],
    solution: &VoltageSolution,
    u_pcc: &SequenceSet,
    id: String,
    cluster: Option<Cluster>,
) -> Result<EquivalentMachine> {
    let params: Vec<PmsgParams> = idx.iter().map(|&k| farm.turbines[k].params.clone()).collect();
    let eq = capacity_weighted_params(&params)?;
    let p0 = idx
        .iter()
        .map(|&k| farm.turbines[k].p0() * farm.turbines[k].params.s_rated)
        .sum::<f64>()
        / eq.s_rated;
    let u: Vec<Phasor> = idx.iter().map(|&k| solution.voltages[k].pos).collect();
    let i: Vec<Phasor> = idx.iter().map(|&k| solution.currents[k].pos).collect();
    let z_eq = match equivalent_collector_impedance(&u, &i, u_pcc.pos) {
        Err(Error::ZeroAggregateCurrent) => {
            log::warn!("{id}: zero aggregate current, using mean path impedance");
            mean_path_impedance(farm, idx) / idx.len() as f64
        }
        other => other?,
    };
    Ok(EquivalentMachine {
        id,
        cluster,
        members: idx.iter().map(|&k| farm.turbines[k].id.clone()).collect(),
        wind_speed: inverse_wind_power(p0.clamp(0.0, 1.0), &eq)?,
        params: eq,
        p0,
        z_eq,
        ramp: None,
        member_i_dcri2: Vec::new(),
        member_i_d0: Vec::new(),
    })
}

fn mean_path_impedance(farm: &Farm, idx: &[usize]) -> Phasor {
    let mut path = Vec::with_capacity(farm.topology.len());
    for f in &farm.topology.feeders {
        let mut acc = Phasor::new(0.0, 0.0);
        for n in &f.nodes {
            acc += n.z_branch;
            path.push(acc + n.z_spur);
        }
    }
    idx.iter().map(|&k| path[k]).sum::<Phasor>() / idx.len() as f64
}

/// One equivalent machine per non-empty cluster. The ramp-limited cluster
/// carries the multi-segment recovery schedule.
pub fn build_equivalent_farm(
    farm: &Farm,
    assignments: &[ClusterAssignment],
    solution: &VoltageSolution,
    u_pcc: &SequenceSet,
    control: &dyn SequenceControl,
) -> Result<EquivalentFarm> {
    if assignments.len() != farm.turbines.len() {
        return Err(Error::validation("assignment-count", "one assignment per turbine required"));
    }
    let mut machines = Vec::new();
    for cluster in Cluster::ALL {
        let idx: Vec<usize> = (0..assignments.len()).filter(|&k| assignments[k].cluster == cluster).collect();
        if idx.is_empty() {
            continue;
        }
        let mut m = aggregate(farm, &idx, solution, u_pcc, format!("eq_{}", cluster.label()), Some(cluster))?;
        if cluster == Cluster::III {
            let mut t = Vec::with_capacity(idx.len());
            for &k in &idx {
                let a = &assignments[k];
                let i_d0 = a.p0 / U_D0;
                t.push(((i_d0 - a.criticals.i_dcri2) / m.params.ramp_k).max(0.0));
                m.member_i_d0.push(i_d0);
                m.member_i_dcri2.push(a.criticals.i_dcri2.min(i_d0));
            }
            t.sort_by(f64::total_cmp);
            m.ramp = Some(ramp_schedule(&t, m.params.ramp_k));
        }
        machines.push(m);
    }
    Ok(EquivalentFarm {
        s_base: farm.s_base,
        strategy: control.name().to_string(),
        u_pcc: *u_pcc,
        machines,
    })
}

/// The whole farm lumped into one machine with a constant recovery rate.
pub fn build_single_machine(
    farm: &Farm,
    solution: &VoltageSolution,
    u_pcc: &SequenceSet,
    control: &dyn SequenceControl,
) -> Result<EquivalentFarm> {
    let idx: Vec<usize> = (0..farm.turbines.len()).collect();
    let m = aggregate(farm, &idx, solution, u_pcc, "eq_all".into(), None)?;
    Ok(EquivalentFarm {
        s_base: farm.s_base,
        strategy: control.name().to_string(),
        u_pcc: *u_pcc,
        machines: vec![m],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmsg::control::{MitigateOscillation, MitigateUnbalance};
    use proptest::prelude::*;

    #[test]
    fn identical_members() {
        let p = PmsgParams { s_rated: 1.5, x_stator: 0.1, h_turbine: 4.0, ..PmsgParams::default() };
        let eq = capacity_weighted_params(&vec![p.clone(); 4]).unwrap();
        assert_eq!(eq.s_rated, 6.0);
        assert!((eq.x_stator - 0.025).abs() < 1e-15);
        assert_eq!(eq.h_turbine, 4.0);
        let one = capacity_weighted_params(std::slice::from_ref(&p)).unwrap();
        assert!((one.x_stator - p.x_stator).abs() < 1e-15 && (one.c_dc - p.c_dc).abs() < 1e-15);
        assert_eq!(PmsgParams { x_stator: p.x_stator, c_dc: p.c_dc, ..one }, p);
    }

    #[test]
    fn inertia_is_averaged_and_controls_must_match() {
        let a = PmsgParams { h_turbine: 3.0, ..PmsgParams::default() };
        let b = PmsgParams { h_turbine: 5.0, ..PmsgParams::default() };
        assert_eq!(capacity_weighted_params(&[a.clone(), b]).unwrap().h_turbine, 4.0);
        let c = PmsgParams { k_neg: 2.5, ..PmsgParams::default() };
        assert!(matches!(capacity_weighted_params(&[a, c]), Err(Error::HeterogeneousParams("k_neg"))));
        assert!(matches!(capacity_weighted_params(&[]), Err(Error::EmptyCluster)));
    }

    #[test]
    fn recovery_duration_examples() {
        let p = PmsgParams::default();
        let v = inverse_wind_power(0.8, &p).unwrap();
        let t = recovery_durations(&[(v, 0.6, 0.2)], &MitigateUnbalance, &p).unwrap();
        assert!((t[0] - 0.4394).abs() < 1e-4);

        let t = recovery_durations(&[(v, 0.6, 0.2), (v, 0.6, 0.2)], &MitigateUnbalance, &p).unwrap();
        assert_eq!(t[0], t[1]);
        assert_eq!(ramp_schedule(&t, 1.0).breakpoints.len(), 1);

        let fast = PmsgParams { ramp_k: 2.0, ..p.clone() };
        let t2 = recovery_durations(&[(v, 0.6, 0.2)], &MitigateUnbalance, &fast).unwrap();
        assert!((t2[0] - 0.4394 / 2.0).abs() < 1e-4);

        let low = inverse_wind_power(0.3, &p).unwrap();
        assert!(matches!(
            recovery_durations(&[(low, 0.6, 0.2)], &MitigateUnbalance, &p),
            Err(Error::NotClusterThree(_))
        ));
        assert!(recovery_durations(&[(v, 0.6, 0.2)], &MitigateOscillation, &p).is_err());
    }

    #[test]
    fn schedule_examples() {
        let s = ramp_schedule(&[0.1, 0.25, 0.4], 1.0);
        assert_eq!(s.rates, vec![3.0, 2.0, 1.0]);
        assert_eq!(s.tail_rate, 1.0);
        assert_eq!((s.rate_at(0.0), s.rate_at(0.1), s.rate_at(0.3), s.rate_at(0.4), s.rate_at(9.0)), (3.0, 2.0, 1.0, 1.0, 1.0));

        let s = ramp_schedule(&[0.2], 1.0);
        assert_eq!((s.rate_at(0.1), s.rate_at(0.3)), (1.0, 1.0));

        let s = ramp_schedule(&[0.1, 0.1, 0.3], 1.0);
        assert_eq!(s.breakpoints.len(), 2);
        assert_eq!(s.rates, vec![3.0, 1.0]);
        assert_eq!(ramp_schedule(&[0.1, 0.1 + 1e-7], 1.0).breakpoints.len(), 2);
    }

    proptest! {
        #[test]
        fn schedule_rates_non_increasing(mut t in prop::collection::vec(0.0..2.0f64, 1..50), k in 0.1..5.0f64) {
            t.sort_by(f64::total_cmp);
            let s = ramp_schedule(&t, k);
            for w in s.rates.windows(2) {
                prop_assert!(w[1] < w[0]);
            }
            prop_assert!(*s.rates.last().unwrap() >= k - 1e-12);
            prop_assert_eq!(s.tail_rate, k);
        }
    }
}
