use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::engine::{simulate_plant, EngineOptions};
use crate::sim::trace::{rmse_percent, Field, Trace};
use crate::sim::{ModelRegistry, Scenario};

pub const RMSE_NOTE: &str =
    "RMSE = sqrt(mean((model - dm)^2)) / (total farm rating) * 100, over [fault start, end of simulation]";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    /// Build plus simulation, s.
    pub wall_time_s: f64,
    pub build_time_s: f64,
    pub machines: usize,
    pub rmse_p: f64,
    pub rmse_q: f64,
    pub rmse_p_dc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub note: String,
    /// Normalization base, system p.u.
    pub rmse_base: f64,
    pub window: (f64, f64),
    pub models: Vec<ModelReport>,
}

impl ComparisonReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn run(registry: &ModelRegistry, name: &str, scenario: &Scenario) -> Result<(Trace, f64, f64, usize)> {
    let start = Instant::now();
    let plant = registry.get(name)?.build(scenario)?;
    let built = start.elapsed().as_secs_f64();
    let trace = simulate_plant(&plant, &scenario.grid, &scenario.fault, scenario.step, scenario.t_end, &EngineOptions::default())?;
    Ok((trace, start.elapsed().as_secs_f64(), built, plant.machines.len()))
}

/// Runs the detailed, three-machine and single-machine models on the same
/// scenario and scores the equivalents against the detailed model. With
/// `parallel` the three runs share the machine, which inflates wall times.
pub fn compare_models(scenario: &Scenario, parallel: bool) -> Result<(ComparisonReport, Vec<(String, Trace)>)> {
    scenario.validate()?;
    let registry = ModelRegistry::default();
    let names = ["dm", "tm", "sm"];
    let results: Vec<Result<(Trace, f64, f64, usize)>> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = names.iter().map(|n| s.spawn(|| run(&registry, n, scenario))).collect();
            handles.into_iter().map(|h| h.join().expect("model thread panicked")).collect()
        })
    } else {
        names.iter().map(|n| run(&registry, n, scenario)).collect()
    };
    let mut runs = Vec::with_capacity(3);
    for (name, r) in names.iter().zip(results) {
        runs.push((name.to_string(), r?));
    }

    let base = scenario.rating();
    let window = (scenario.fault.t_start, scenario.t_end);
    let reference = &runs[0].1 .0;
    let mut models = Vec::new();
    for (name, (trace, wall, built, machines)) in &runs {
        models.push(ModelReport {
            model: name.clone(),
            wall_time_s: *wall,
            build_time_s: *built,
            machines: *machines,
            rmse_p: rmse_percent(trace, reference, Field::P, window, base)?,
            rmse_q: rmse_percent(trace, reference, Field::Q, window, base)?,
            rmse_p_dc: rmse_percent(trace, reference, Field::PDc, window, base)?,
            trace_file: None,
        });
    }
    let report = ComparisonReport {
        scenario: scenario.name.clone(),
        note: RMSE_NOTE.to_string(),
        rmse_base: base,
        window,
        models,
    };
    Ok((report, runs.into_iter().map(|(n, r)| (n, r.0)).collect()))
}
