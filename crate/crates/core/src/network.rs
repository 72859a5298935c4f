//! Radial collector network and terminal-voltage fixed-point solvers.
//!
//! Each feeder is a chain of junction buses starting at the PCC. Node `k`
//! of a feeder sits behind branch `k` (from bus `k-1`, or the PCC for
//! `k = 0`) and connects its turbine through an optional spur impedance
//! (box transformer). Injected currents flow from the turbines towards the
//! PCC, so terminal voltages are `U = U_pcc + (C Z Cᵀ + Z_spur) I`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasor::{orient_dq, Phasor, SequenceSet};
use crate::pmsg::control::SequenceControl;
use crate::pmsg::params::{wind_power, PmsgParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederNode {
    pub id: String,
    /// Impedance of the branch feeding this node from upstream.
    pub z_branch: Phasor,
    #[serde(default)]
    pub z_spur: Phasor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feeder {
    pub name: String,
    /// Ordered from the PCC outwards.
    pub nodes: Vec<FeederNode>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeederTopology {
    pub feeders: Vec<Feeder>,
}

impl FeederTopology {
    pub fn len(&self) -> usize {
        self.feeders.iter().map(|f| f.nodes.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node ids in global (feeder-major) order.
    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.feeders.iter().flat_map(|f| f.nodes.iter().map(|n| n.id.as_str()))
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for f in &self.feeders {
            if f.nodes.is_empty() {
                return Err(Error::NonRadialTopology(format!("feeder `{}` has no nodes", f.name)));
            }
            for n in &f.nodes {
                if !seen.insert(n.id.as_str()) {
                    return Err(Error::NonRadialTopology(format!(
                        "node `{}` is reachable through more than one path",
                        n.id
                    )));
                }
                let finite = |z: Phasor| z.re.is_finite() && z.im.is_finite();
                if !finite(n.z_branch) || !finite(n.z_spur) {
                    return Err(Error::validation("finite-impedance", format!("node `{}`", n.id)));
                }
            }
        }
        Ok(())
    }

    /// Terminal voltages for node injections `i` (system base).
    pub fn sweep(&self, u_pcc: Phasor, i: &[Phasor]) -> Vec<Phasor> {
        let mut out = vec![Phasor::new(0.0, 0.0); i.len()];
        let mut offset = 0;
        for f in &self.feeders {
            let n = f.nodes.len();
            let inj = &i[offset..offset + n];
            let mut downstream: Phasor = inj.iter().sum();
            let mut bus = u_pcc;
            for (k, node) in f.nodes.iter().enumerate() {
                bus += node.z_branch * downstream;
                out[offset + k] = bus + node.z_spur * inj[k];
                downstream -= inj[k];
            }
            offset += n;
        }
        out
    }

    /// Branch currents (downstream sums), one per node.
    pub fn branch_currents(&self, i: &[Phasor]) -> Vec<Phasor> {
        let mut out = Vec::with_capacity(i.len());
        let mut offset = 0;
        for f in &self.feeders {
            let n = f.nodes.len();
            let mut downstream: Phasor = i[offset..offset + n].iter().sum();
            for k in 0..n {
                out.push(downstream);
                downstream -= i[offset + k];
            }
            offset += n;
        }
        out
    }

    /// Complex power lost in branches and spurs.
    pub fn losses(&self, i: &[Phasor]) -> Phasor {
        let branch = self.branch_currents(i);
        self.feeders
            .iter()
            .flat_map(|f| f.nodes.iter())
            .zip(branch.iter().zip(i))
            .map(|(n, (b, inj))| n.z_branch * b.norm_sqr() + n.z_spur * inj.norm_sqr())
            .sum()
    }
}

/// Path matrix of a chain: `c[node][branch] = 1` iff the branch lies on the
/// path from the PCC to the node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    pub entries: Vec<Vec<u8>>,
}

impl IncidenceMatrix {
    /// `Cᵀ i`
    pub fn branch_currents(&self, i: &[Phasor]) -> Vec<Phasor> {
        let n = self.entries.len();
        (0..n)
            .map(|b| (0..n).filter(|&r| self.entries[r][b] == 1).map(|r| i[r]).sum())
            .collect()
    }

    /// `C diag(z) Cᵀ`
    pub fn impedance_matrix(&self, z: &[Phasor]) -> Vec<Vec<Phasor>> {
        let n = self.entries.len();
        let mut m = vec![vec![Phasor::new(0.0, 0.0); n]; n];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                for (b, zb) in z.iter().enumerate() {
                    if self.entries[r][b] == 1 && self.entries[c][b] == 1 {
                        *cell += zb;
                    }
                }
            }
        }
        m
    }
}

pub fn incidence_matrix(feeder: &Feeder) -> Result<IncidenceMatrix> {
    if feeder.nodes.is_empty() {
        return Err(Error::NonRadialTopology(format!("feeder `{}` has no nodes", feeder.name)));
    }
    let mut ids = HashSet::new();
    if !feeder.nodes.iter().all(|n| ids.insert(n.id.as_str())) {
        return Err(Error::NonRadialTopology(format!("feeder `{}` revisits a node", feeder.name)));
    }
    let n = feeder.nodes.len();
    let entries = (0..n).map(|r| (0..n).map(|b| u8::from(b <= r)).collect()).collect();
    Ok(IncidenceMatrix { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub sigma1: f64,
    /// Under-relaxation factor in (0, 1].
    pub relax: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            sigma1: 1e-6,
            relax: 1.0,
            max_iter: 100,
        }
    }
}

/// One sequence network solved by fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSolution {
    pub voltages: Vec<Phasor>,
    /// Injections at the solution, system base.
    pub currents: Vec<Phasor>,
    pub iterations: usize,
    pub residual: f64,
}

/// Fixed point of `U = sweep(U_pcc, injection(U))`, starting from a flat
/// profile at `u_pcc`.
pub fn solve_sequence<F>(topology: &FeederTopology, u_pcc: Phasor, mut injection: F, opts: &SolverOptions) -> Result<SequenceSolution>
where
    F: FnMut(usize, Phasor) -> Result<Phasor>,
{
    let n = topology.len();
    let mut u = vec![u_pcc; n];
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let i = u.iter().enumerate().map(|(k, &v)| injection(k, v)).collect::<Result<Vec<_>>>()?;
        let target = topology.sweep(u_pcc, &i);
        residual = 0.0;
        for (uk, tk) in u.iter_mut().zip(&target) {
            let step = (*tk - *uk) * opts.relax;
            residual = residual.max(step.norm());
            *uk += step;
        }
        if !residual.is_finite() {
            break;
        }
        if residual < opts.sigma1 {
            let currents = u.iter().enumerate().map(|(k, &v)| injection(k, v)).collect::<Result<Vec<_>>>()?;
            return Ok(SequenceSolution {
                voltages: u,
                currents,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Joint fixed point of both sequence networks for a coupled injection law.
pub fn solve_sequence_pair<F>(
    topology: &FeederTopology,
    u_pcc: &SequenceSet,
    mut injection: F,
    opts: &SolverOptions,
) -> Result<VoltageSolution>
where
    F: FnMut(usize, &SequenceSet) -> Result<SequenceSet>,
{
    let n = topology.len();
    let mut u = vec![SequenceSet::pn(u_pcc.pos, u_pcc.neg); n];
    solve_sequence_pair_from(topology, u_pcc, &mut u, &mut injection, opts)
}

/// As [`solve_sequence_pair`], warm-started from `u` (updated in place).
pub fn solve_sequence_pair_from<F>(
    topology: &FeederTopology,
    u_pcc: &SequenceSet,
    u: &mut [SequenceSet],
    injection: &mut F,
    opts: &SolverOptions,
) -> Result<VoltageSolution>
where
    F: FnMut(usize, &SequenceSet) -> Result<SequenceSet>,
{
    let n = u.len();
    let mut pos_i = vec![Phasor::new(0.0, 0.0); n];
    let mut neg_i = vec![Phasor::new(0.0, 0.0); n];
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        for k in 0..n {
            let i = injection(k, &u[k])?;
            pos_i[k] = i.pos;
            neg_i[k] = i.neg;
        }
        let tp = topology.sweep(u_pcc.pos, &pos_i);
        let tn = topology.sweep(u_pcc.neg, &neg_i);
        residual = 0.0;
        for k in 0..n {
            let dp = (tp[k] - u[k].pos) * opts.relax;
            let dn = (tn[k] - u[k].neg) * opts.relax;
            residual = residual.max(dp.norm()).max(dn.norm());
            u[k].pos += dp;
            u[k].neg += dn;
        }
        if !residual.is_finite() {
            break;
        }
        if residual < opts.sigma1 {
            let currents = (0..n).map(|k| injection(k, &u[k])).collect::<Result<Vec<_>>>()?;
            return Ok(VoltageSolution {
                voltages: u.to_vec(),
                currents,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turbine {
    pub id: String,
    pub params: PmsgParams,
    /// m/s
    pub wind_speed: f64,
}

impl Turbine {
    pub fn p0(&self) -> f64 {
        wind_power(self.wind_speed, &self.params)
    }
}

/// Collector network plus the turbines at its nodes, in node order.
#[derive(Debug, Clone, PartialEq)]
pub struct Farm {
    /// System power base, MVA.
    pub s_base: f64,
    pub topology: FeederTopology,
    pub turbines: Vec<Turbine>,
}

impl Farm {
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        if !(self.s_base > 0.0) {
            return Err(Error::validation("positive-base", "s_base must be > 0"));
        }
        if self.topology.len() != self.turbines.len() {
            return Err(Error::validation("turbine-count", "every node needs exactly one turbine"));
        }
        for (id, t) in self.topology.node_ids().zip(&self.turbines) {
            if id != t.id {
                return Err(Error::validation("turbine-order", format!("node `{id}` holds turbine `{}`", t.id)));
            }
            t.params.validate()?;
            if !(t.wind_speed >= 0.0 && t.wind_speed.is_finite()) {
                return Err(Error::validation("wind-speed", format!("turbine `{}`", t.id)));
            }
        }
        Ok(())
    }

    /// Machine-to-system current scaling of each turbine.
    pub fn scale(&self, k: usize) -> f64 {
        self.turbines[k].params.s_rated / self.s_base
    }

    /// Sum of ratings on the system base.
    pub fn rating(&self) -> f64 {
        self.turbines.iter().map(|t| t.params.s_rated).sum::<f64>() / self.s_base
    }
}

/// Negative-sequence injection of the unbalance-mitigating law, machine
/// base: a shunt reactor `j K- I_N U-`, capped at the converter limit.
pub fn negative_sequence_injection(u_neg: Phasor, params: &PmsgParams) -> Phasor {
    let i = Phasor::new(0.0, params.k_neg * params.i_n) * u_neg;
    let mag = i.norm();
    if mag > params.i_max {
        i * (params.i_max / mag)
    } else {
        i
    }
}

pub fn solve_negative_sequence_voltages(farm: &Farm, u_pcc_neg: Phasor, opts: &SolverOptions) -> Result<SequenceSolution> {
    solve_sequence(
        &farm.topology,
        u_pcc_neg,
        |k, u| Ok(negative_sequence_injection(u, &farm.turbines[k].params) * farm.scale(k)),
        opts,
    )
}

/// Positive-sequence solve with the negative-sequence terminal voltages held fixed.
pub fn solve_positive_sequence_voltages(
    farm: &Farm,
    u_pcc_pos: Phasor,
    u_neg: &[Phasor],
    control: &dyn SequenceControl,
    opts: &SolverOptions,
) -> Result<SequenceSolution> {
    let p0: Vec<f64> = farm.turbines.iter().map(Turbine::p0).collect();
    solve_sequence(
        &farm.topology,
        u_pcc_pos,
        |k, u| {
            let v = orient_dq(&SequenceSet::pn(u, u_neg[k]))?;
            let refs = control.current_refs(&v, p0[k], &farm.turbines[k].params)?;
            Ok(refs.to_network(v.theta).pos * farm.scale(k))
        },
        opts,
    )
}

/// Terminal voltages of every turbine at pre-fault power `p0` for given PCC
/// voltages.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageSolution {
    pub voltages: Vec<SequenceSet>,
    /// System base.
    pub currents: Vec<SequenceSet>,
    pub iterations: usize,
    pub residual: f64,
}

pub fn solve_terminal_voltages(
    farm: &Farm,
    u_pcc: &SequenceSet,
    control: &dyn SequenceControl,
    opts: &SolverOptions,
) -> Result<VoltageSolution> {
    let p0: Vec<f64> = farm.turbines.iter().map(Turbine::p0).collect();
    solve_sequence_pair(
        &farm.topology,
        u_pcc,
        |k, u| {
            let v = orient_dq(u)?;
            let refs = control.current_refs(&v, p0[k], &farm.turbines[k].params)?;
            Ok(refs.to_network(v.theta).scale(farm.scale(k)))
        },
        opts,
    )
}

/// Impedance through which the summed member current reproduces the
/// members' average voltage drop from the PCC.
pub fn equivalent_collector_impedance(voltages: &[Phasor], currents: &[Phasor], u_pcc: Phasor) -> Result<Phasor> {
    if voltages.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let total: Phasor = currents.iter().sum();
    if total.norm() < 1e-12 {
        return Err(Error::ZeroAggregateCurrent);
    }
    let u_ave = voltages.iter().sum::<Phasor>() / voltages.len() as f64;
    Ok((u_ave - u_pcc) / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::polar;
    use crate::pmsg::control::MitigateUnbalance;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Phasor {
        Phasor::new(re, im)
    }

    fn chain(zs: &[Phasor]) -> Feeder {
        Feeder {
            name: "f".into(),
            nodes: zs
                .iter()
                .enumerate()
                .map(|(k, &z)| FeederNode {
                    id: format!("t{k}"),
                    z_branch: z,
                    z_spur: c(0.0, 0.0),
                })
                .collect(),
        }
    }

    fn single_farm(z: Phasor, v_w: f64) -> Farm {
        Farm {
            s_base: 1.5,
            topology: FeederTopology { feeders: vec![chain(&[z])] },
            turbines: vec![Turbine {
                id: "t0".into(),
                params: PmsgParams::default(),
                wind_speed: v_w,
            }],
        }
    }

    #[test]
    fn incidence_examples() {
        let m = incidence_matrix(&chain(&[c(0.1, 0.0); 2])).unwrap();
        assert_eq!(m.entries, vec![vec![1, 0], vec![1, 1]]);
        assert_eq!(incidence_matrix(&chain(&[c(0.1, 0.0)])).unwrap().entries, vec![vec![1]]);

        let m3 = incidence_matrix(&chain(&[c(0.1, 0.0); 3])).unwrap();
        let b = m3.branch_currents(&[c(1.0, 0.0); 3]);
        assert_eq!(b, vec![c(3.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);

        let empty = Feeder { name: "e".into(), nodes: vec![] };
        assert!(matches!(incidence_matrix(&empty), Err(Error::NonRadialTopology(_))));
    }

    #[test]
    fn sweep_equals_path_matrix_product() {
        let zs = [c(0.01, 0.03), c(0.02, 0.01), c(0.005, 0.04), c(0.01, 0.0)];
        let f = chain(&zs);
        let topo = FeederTopology { feeders: vec![f.clone()] };
        let i = [c(0.3, -0.1), c(0.5, 0.2), c(-0.1, 0.4), c(0.2, 0.0)];
        let u_pcc = polar(0.9, 0.1);
        let m = incidence_matrix(&f).unwrap().impedance_matrix(&zs);
        let swept = topo.sweep(u_pcc, &i);
        for r in 0..4 {
            let expected = u_pcc + (0..4).map(|k| m[r][k] * i[k]).sum::<Phasor>();
            assert!((swept[r] - expected).norm() < 1e-14);
            assert!((0..4).all(|k| m[r][k] == m[k][r]));
        }
    }

    #[test]
    fn negative_sequence_examples() {
        let farm = single_farm(c(0.0, 0.05), 10.0);
        let s = solve_negative_sequence_voltages(&farm, c(0.0, 0.0), &SolverOptions::default()).unwrap();
        assert_eq!(s.iterations, 1);
        assert_eq!(s.voltages[0], c(0.0, 0.0));

        let s = solve_negative_sequence_voltages(&farm, c(0.2, 0.0), &SolverOptions::default()).unwrap();
        assert!((s.voltages[0] - c(0.2 / 1.1, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn negative_sequence_contracts_geometrically() {
        let farm = single_farm(c(0.0, 0.05), 10.0);
        let exact = c(0.2 / 1.1, 0.0);
        let mut prev = c(0.2, 0.0) - exact;
        for it in 1..6 {
            let opts = SolverOptions { sigma1: 0.0, max_iter: it, ..SolverOptions::default() };
            let err = match solve_negative_sequence_voltages(&farm, c(0.2, 0.0), &opts) {
                Err(Error::NoConvergence { .. }) => {
                    let mut u = c(0.2, 0.0);
                    for _ in 0..it {
                        u = c(0.2, 0.0) + c(0.0, 0.05) * negative_sequence_injection(u, &PmsgParams::default());
                    }
                    u - exact
                }
                other => panic!("{other:?}"),
            };
            assert!((err.norm() / prev.norm() - 0.1).abs() < 1e-9);
            prev = err;
        }
    }

    #[test]
    fn positive_sequence_example() {
        let v_w = 12.0 * 0.5f64.cbrt();
        let farm = single_farm(c(0.0, 0.05), v_w);
        let s = solve_positive_sequence_voltages(&farm, c(1.0, 0.0), &[c(0.0, 0.0)], &MitigateUnbalance, &SolverOptions::default())
            .unwrap();
        let u = s.voltages[0];
        assert!((u.re - 1.0).abs() < 2e-3 && (u.im - 0.025).abs() < 1e-3, "{u}");
        // one substitution from the flat start gives |U| = 1.0003; the fixed point sits slightly lower
        assert!((u.norm() - 1.0003).abs() < 1e-3);
        let resid = u - c(1.0, 0.0) - c(0.0, 0.05) * (c(0.5, 0.0) / u.conj());
        assert!(resid.norm() < 1e-5, "{resid}");
    }

    #[test]
    fn zero_impedance_gives_flat_profile() {
        let mut farm = single_farm(c(0.0, 0.0), 9.0);
        farm.topology.feeders.push(chain(&[c(0.0, 0.0)]));
        farm.topology.feeders[1].nodes[0].id = "t1".into();
        farm.turbines.push(Turbine { id: "t1".into(), ..farm.turbines[0].clone() });
        let s = solve_positive_sequence_voltages(&farm, c(1.0, 0.0), &[c(0.0, 0.0); 2], &MitigateUnbalance, &SolverOptions::default())
            .unwrap();
        assert_eq!(s.iterations, 1);
        assert!(s.voltages.iter().all(|&u| u == c(1.0, 0.0)));
    }

    #[test]
    fn impedance_examples() {
        let z = equivalent_collector_impedance(&[c(0.62, 0.0)], &[c(0.5, 0.0)], c(0.6, 0.0)).unwrap();
        assert!((z - c(0.04, 0.0)).norm() < 1e-12);
        let z = equivalent_collector_impedance(&[c(0.62, 0.0), c(0.64, 0.0)], &[c(0.5, 0.0); 2], c(0.6, 0.0)).unwrap();
        assert!((z - c(0.03, 0.0)).norm() < 1e-12);
        let z = equivalent_collector_impedance(&[c(0.6, 0.0); 3], &[c(0.5, 0.1); 3], c(0.6, 0.0)).unwrap();
        assert_eq!(z, c(0.0, 0.0));
        assert!(matches!(
            equivalent_collector_impedance(&[c(0.6, 0.0)], &[c(0.0, 0.0)], c(0.6, 0.0)),
            Err(Error::ZeroAggregateCurrent)
        ));
    }

    #[test]
    fn duplicate_node_is_not_radial() {
        let mut topo = FeederTopology { feeders: vec![chain(&[c(0.01, 0.0); 2]), chain(&[c(0.01, 0.0)])] };
        assert!(matches!(topo.validate(), Err(Error::NonRadialTopology(_))));
        topo.feeders[1].nodes[0].id = "x".into();
        topo.validate().unwrap();
    }

    fn feeder_farm() -> impl Strategy<Value = (Farm, f64, f64)> {
        (
            prop::collection::vec((2e-4..2e-3f64, 2e-4..2e-3f64, 0.04..0.08f64, 3.0..13.0f64), 1..=10),
            0.3..1.0f64,
            0.0..0.25f64,
        )
            .prop_map(|(nodes, up, un)| {
                let feeder = Feeder {
                    name: "f".into(),
                    nodes: nodes
                        .iter()
                        .enumerate()
                        .map(|(k, &(r, x, xs, _))| FeederNode {
                            id: format!("t{k}"),
                            z_branch: c(r, x),
                            z_spur: c(0.1 * xs, xs),
                        })
                        .collect(),
                };
                let turbines = nodes
                    .iter()
                    .enumerate()
                    .map(|(k, &(_, _, _, v))| Turbine {
                        id: format!("t{k}"),
                        params: PmsgParams::default(),
                        wind_speed: v,
                    })
                    .collect();
                (Farm { s_base: 1.5, topology: FeederTopology { feeders: vec![feeder] }, turbines }, up, un)
            })
    }

    proptest! {
        #[test]
        fn power_is_conserved_at_fixed_point((farm, up, un) in feeder_farm()) {
            let opts = SolverOptions { sigma1: 1e-13, max_iter: 400, ..SolverOptions::default() };
            let u_pcc = SequenceSet::pn(polar(up, 0.2), polar(un, -0.4));
            let s = solve_terminal_voltages(&farm, &u_pcc, &MitigateUnbalance, &opts).unwrap();
            for (pick_u, pick_i, upcc) in [
                (Box::new(|x: &SequenceSet| x.pos) as Box<dyn Fn(&SequenceSet) -> Phasor>, Box::new(|x: &SequenceSet| x.pos) as Box<dyn Fn(&SequenceSet) -> Phasor>, u_pcc.pos),
                (Box::new(|x: &SequenceSet| x.neg), Box::new(|x: &SequenceSet| x.neg), u_pcc.neg),
            ] {
                let i: Vec<Phasor> = s.currents.iter().map(pick_i).collect();
                let injected: Phasor = s.voltages.iter().zip(&i).map(|(u, i)| pick_u(u) * i.conj()).sum();
                let delivered = upcc * i.iter().sum::<Phasor>().conj();
                let loss = farm.topology.losses(&i);
                prop_assert!((injected - delivered - loss).norm() < 1e-9);
            }
        }

        #[test]
        fn average_drop_is_reproduced(
            v in prop::collection::vec((0.5..1.1f64, -0.3..0.3f64, 0.1..1.0f64, -0.5..0.5f64), 1..8),
            up in 0.5..1.0f64,
        ) {
            let u: Vec<Phasor> = v.iter().map(|&(m, a, _, _)| polar(m, a)).collect();
            let i: Vec<Phasor> = v.iter().map(|&(_, _, m, a)| polar(m, a)).collect();
            let u_pcc = c(up, 0.0);
            let z = equivalent_collector_impedance(&u, &i, u_pcc).unwrap();
            let u_ave = u.iter().sum::<Phasor>() / u.len() as f64;
            prop_assert!((u_pcc + z * i.iter().sum::<Phasor>() - u_ave).norm() < 1e-12);
        }
    }
}
