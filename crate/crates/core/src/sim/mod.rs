//! Fixed-step quasi-static simulation of a farm model against the grid.

pub mod compare;
pub mod engine;
pub mod trace;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::aggregation::{build_single_machine, EquivalentFarm};
use crate::error::{Error, Result};
use crate::grid::{iterate_pcc_voltage, FaultSpec, TheveninGrid};
use crate::network::{solve_terminal_voltages, Farm, Feeder, FeederNode, FeederTopology, SolverOptions};
use crate::phasor::{Phasor, SequenceSet};
use crate::pmsg::control::{ControlRegistry, SequenceControl};
use crate::pmsg::turbine::{RampProfile, TurbineModel};

pub use compare::{compare_models, ComparisonReport, ModelReport};
pub use engine::{simulate_imposed, simulate_plant, EngineOptions};
pub use trace::{dc_component, rmse_percent, rmse_percent_series, Field, Snapshot, Trace};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub farm: Farm,
    pub grid: TheveninGrid,
    pub fault: FaultSpec,
    pub strategy: String,
    /// s
    pub step: f64,
    pub t_end: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub max_outer: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.farm.validate()?;
        self.grid.validate()?;
        self.fault.validate()?;
        if !(self.step > 0.0) {
            return Err(Error::validation("step", "h must be > 0"));
        }
        if !(self.t_end > self.fault.t_clear) {
            return Err(Error::validation("t-end", "t_end must follow fault clearance"));
        }
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0) {
            return Err(Error::validation("tolerances", "sigma1 and sigma2 must be > 0"));
        }
        self.control()?;
        Ok(())
    }

    pub fn control(&self) -> Result<Arc<dyn SequenceControl>> {
        ControlRegistry::default().get(&self.strategy)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            sigma1: self.sigma1,
            ..SolverOptions::default()
        }
    }

    /// Total farm rating on the system base.
    pub fn rating(&self) -> f64 {
        self.farm.rating()
    }
}

#[derive(Debug, Clone)]
pub struct Machine {
    pub id: String,
    pub model: TurbineModel,
    /// Machine-to-system current scaling.
    pub scale: f64,
}

/// Machines on a collector network, ready to simulate.
#[derive(Debug, Clone)]
pub struct Plant {
    pub name: String,
    pub s_base: f64,
    pub topology: FeederTopology,
    pub machines: Vec<Machine>,
    /// Equivalent the plant was built from, if any.
    pub equivalent: Option<EquivalentFarm>,
}

impl Plant {
    pub fn detailed(farm: &Farm, control: Arc<dyn SequenceControl>) -> Plant {
        let machines = farm
            .turbines
            .iter()
            .map(|t| Machine {
                id: t.id.clone(),
                model: TurbineModel::new(t.params.clone(), control.clone(), t.p0()),
                scale: t.params.s_rated / farm.s_base,
            })
            .collect();
        Plant {
            name: "dm".into(),
            s_base: farm.s_base,
            topology: farm.topology.clone(),
            machines,
            equivalent: None,
        }
    }

    /// Each equivalent machine on its own single-branch feeder.
    pub fn from_equivalent(name: &str, eq: &EquivalentFarm, control: Arc<dyn SequenceControl>) -> Plant {
        let mut feeders = Vec::new();
        let mut machines = Vec::new();
        for m in &eq.machines {
            feeders.push(Feeder {
                name: m.id.clone(),
                nodes: vec![FeederNode {
                    id: m.id.clone(),
                    z_branch: m.z_eq,
                    z_spur: Phasor::new(0.0, 0.0),
                }],
            });
            let mut model = TurbineModel::new(m.params.clone(), control.clone(), m.p0);
            if let Some(schedule) = &m.ramp {
                model.ramp = RampProfile::Schedule {
                    schedule: schedule.clone(),
                    members: m.members.len(),
                };
            }
            machines.push(Machine {
                id: m.id.clone(),
                model,
                scale: m.params.s_rated / eq.s_base,
            });
        }
        Plant {
            name: name.to_string(),
            s_base: eq.s_base,
            topology: FeederTopology { feeders },
            machines,
            equivalent: Some(eq.clone()),
        }
    }
}

/// A way of representing the farm for simulation.
pub trait FarmModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn build(&self, scenario: &Scenario) -> Result<Plant>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct DetailedModel;

impl FarmModel for DetailedModel {
    fn name(&self) -> &'static str {
        "dm"
    }

    fn description(&self) -> &'static str {
        "every turbine on its own node"
    }

    fn build(&self, scenario: &Scenario) -> Result<Plant> {
        Ok(Plant::detailed(&scenario.farm, scenario.control()?))
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreeMachineModel;

impl FarmModel for ThreeMachineModel {
    fn name(&self) -> &'static str {
        "tm"
    }

    fn description(&self) -> &'static str {
        "one equivalent per response cluster, PCC voltage from the outer iteration"
    }

    fn build(&self, scenario: &Scenario) -> Result<Plant> {
        let (_, eq) = iterate_pcc_voltage(scenario, scenario.sigma2, scenario.max_outer)?;
        Ok(Plant::from_equivalent("tm", &eq, scenario.control()?))
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SingleMachineModel;

impl FarmModel for SingleMachineModel {
    fn name(&self) -> &'static str {
        "sm"
    }

    fn description(&self) -> &'static str {
        "whole farm as one machine at the pre-fault operating point"
    }

    fn build(&self, scenario: &Scenario) -> Result<Plant> {
        let control = scenario.control()?;
        let u_pcc = SequenceSet::pn(Phasor::new(1.0, 0.0), Phasor::new(0.0, 0.0));
        let sol = solve_terminal_voltages(&scenario.farm, &u_pcc, control.as_ref(), &scenario.solver_options())?;
        let eq = build_single_machine(&scenario.farm, &sol, &u_pcc, control.as_ref())?;
        Ok(Plant::from_equivalent("sm", &eq, control))
    }
}

/// Name → farm model lookup.
#[derive(Clone)]
pub struct ModelRegistry {
    entries: BTreeMap<String, Arc<dyn FarmModel>>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut r = Self { entries: BTreeMap::new() };
        r.register(Arc::new(DetailedModel));
        r.register(Arc::new(ThreeMachineModel));
        r.register(Arc::new(SingleMachineModel));
        r
    }
}

impl ModelRegistry {
    pub fn register(&mut self, model: Arc<dyn FarmModel>) {
        self.entries.insert(model.name().to_string(), model);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn FarmModel>> {
        self.entries.get(name).cloned().ok_or_else(|| Error::Unknown {
            kind: "farm model",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Builds the named model and runs the scenario on it.
pub fn simulate(model: &str, scenario: &Scenario) -> Result<Trace> {
    let plant = ModelRegistry::default().get(model)?.build(scenario)?;
    simulate_plant(&plant, &scenario.grid, &scenario.fault, scenario.step, scenario.t_end, &EngineOptions::default())
}
