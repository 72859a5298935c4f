//! Outer iteration on the PCC voltage: the terminal-voltage solve, the
//! clustering and the equivalent all depend on the PCC voltage during the
//! fault, which in turn depends on what the farm injects.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::aggregation::{build_equivalent_farm, EquivalentFarm};
use crate::clustering::{assign_cluster, ClusterAssignment};
use crate::error::{Error, Result};
use crate::network::{solve_terminal_voltages, VoltageSolution};
use crate::phasor::{Phasor, SequenceSet};
use crate::sim::{simulate_plant, EngineOptions, Plant, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PccIterate {
    pub iteration: usize,
    /// Magnitudes assumed at the start of the iteration.
    pub u_pos_in: f64,
    pub u_neg_in: f64,
    /// Magnitudes read back from the simulation.
    pub u_pos: f64,
    pub u_neg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PccIterationResult {
    pub u_pcc_pos: f64,
    pub u_pcc_neg: f64,
    /// Phasors read at the pre-clearance sample of the last iteration.
    pub u_pcc: SequenceSet,
    pub iterations: usize,
    pub history: Vec<PccIterate>,
    pub converged: bool,
}

impl PccIterationResult {
    pub fn write_history_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for h in &self.history {
            w.serialize(h)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Terminal voltages and cluster labels for assumed PCC voltages.
pub fn cluster_farm(scenario: &Scenario, u_pcc: &SequenceSet) -> Result<(VoltageSolution, Vec<ClusterAssignment>)> {
    let control = scenario.control()?;
    let farm = &scenario.farm;
    let sol = solve_terminal_voltages(farm, u_pcc, control.as_ref(), &scenario.solver_options())?;
    let mut out = Vec::with_capacity(farm.turbines.len());
    for (t, u) in farm.turbines.iter().zip(&sol.voltages) {
        let crit = control.critical_powers(u.pos.norm(), u.neg.norm(), &t.params)?;
        out.push(assign_cluster(&t.id, t.wind_speed, crit, &t.params));
    }
    Ok((sol, out))
}

/// Equivalent farm for assumed PCC voltages.
pub fn equivalent_at(scenario: &Scenario, u_pcc: &SequenceSet) -> Result<EquivalentFarm> {
    let control = scenario.control()?;
    let (sol, assignments) = cluster_farm(scenario, u_pcc)?;
    build_equivalent_farm(&scenario.farm, &assignments, &sol, u_pcc, control.as_ref())
}

/// Starting from a flat PCC voltage, alternates between building the
/// equivalent at the assumed voltages and simulating it up to fault
/// clearance, until the pre-clearance PCC magnitudes move by less than
/// `sigma2`.
pub fn iterate_pcc_voltage(scenario: &Scenario, sigma2: f64, max_outer: usize) -> Result<(PccIterationResult, EquivalentFarm)> {
    let control = scenario.control()?;
    let pre_clear = (scenario.fault.t_clear / scenario.step).round() * scenario.step - scenario.step;
    let mut u = (1.0, 0.0);
    let mut history = Vec::new();
    for it in 1..=max_outer {
        let u_pcc = SequenceSet::pn(Phasor::new(u.0, 0.0), Phasor::new(u.1, 0.0));
        let eq = equivalent_at(scenario, &u_pcc)?;
        let plant = Plant::from_equivalent("tm", &eq, control.clone());
        let trace = simulate_plant(
            &plant,
            &scenario.grid,
            &scenario.fault,
            scenario.step,
            pre_clear.max(0.0),
            &EngineOptions::default(),
        )?;
        let snap = trace.pre_clear.ok_or_else(|| Error::validation("fault-window", "fault clears before the first step"))?;
        let next = (snap.u_pcc.pos.norm(), snap.u_pcc.neg.norm());
        history.push(PccIterate {
            iteration: it,
            u_pos_in: u.0,
            u_neg_in: u.1,
            u_pos: next.0,
            u_neg: next.1,
        });
        log::info!("PCC iteration {it}: U+ = {:.5}, U- = {:.5}", next.0, next.1);
        if (next.0 - u.0).abs() < sigma2 && (next.1 - u.1).abs() < sigma2 {
            let result = PccIterationResult {
                u_pcc_pos: next.0,
                u_pcc_neg: next.1,
                u_pcc: snap.u_pcc,
                iterations: it,
                history,
                converged: true,
            };
            return Ok((result, eq));
        }
        u = next;
    }
    let residual = history
        .last()
        .map_or(f64::INFINITY, |h| (h.u_pos - h.u_pos_in).abs().max((h.u_neg - h.u_neg_in).abs()));
    log::warn!("PCC iteration history: {history:?}");
    Err(Error::NoConvergence {
        iterations: max_outer,
        residual,
    })
}
