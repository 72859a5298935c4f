//! Farm and scenario files.
//!
//! A farm file lists feeders (nodes from the PCC outwards with branch and
//! spur impedances), turbine parameters as shared defaults plus per-turbine
//! overrides, and wind speeds keyed by turbine id, either inline or in a
//! two-column CSV file (`id,wind_speed`).

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clustering::{Cluster, ClusterAssignment};
use crate::error::{Error, Result};
use crate::grid::{FaultSpec, TheveninGrid};
use crate::network::{Farm, Feeder, FeederNode, FeederTopology, Turbine, VoltageSolution};
use crate::phasor::Phasor;
use crate::pmsg::params::PmsgParams;
use crate::sim::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: String,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub spur_r: f64,
    #[serde(default)]
    pub spur_x: f64,
    /// Upstream node id, or `pcc`. When given it must be the previous node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederEntry {
    pub name: String,
    pub nodes: Vec<NodeEntry>,
}

fn default_base() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FarmFile {
    #[serde(default = "default_base")]
    pub s_base_mva: f64,
    #[serde(default = "empty_object")]
    pub defaults: Value,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, Value>,
    pub feeders: Vec<FeederEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub wind_speeds: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wind_speed_file: Option<String>,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

fn parse_err(location: impl Into<String>, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        location: location.into(),
        message: e.to_string(),
    }
}

fn json_err(path: &Path, e: serde_json::Error) -> Error {
    parse_err(format!("{}:{}:{}", path.display(), e.line(), e.column()), e)
}

fn merge(base: &mut Value, patch: &Value) {
    if let (Value::Object(b), Value::Object(p)) = (base, patch) {
        for (k, v) in p {
            b.insert(k.clone(), v.clone());
        }
    }
}

fn read_wind_file(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let loc = || format!("{}:{}", path.display(), line + 2);
        if rec.len() != 2 {
            return Err(parse_err(loc(), "expected `id,wind_speed`"));
        }
        let v: f64 = rec[1].trim().parse().map_err(|e| parse_err(loc(), e))?;
        out.insert(rec[0].trim().to_string(), v);
    }
    Ok(out)
}

/// Resolves a parsed farm file. Relative wind-speed files are looked up
/// next to `dir`.
pub fn resolve_farm(file: &FarmFile, dir: &Path) -> Result<Farm> {
    let mut ids = HashSet::new();
    let mut feeders = Vec::with_capacity(file.feeders.len());
    for f in &file.feeders {
        let mut nodes = Vec::with_capacity(f.nodes.len());
        for (k, n) in f.nodes.iter().enumerate() {
            if !ids.insert(n.id.clone()) {
                return Err(Error::validation("duplicate turbine id", n.id.clone()));
            }
            if let Some(parent) = &n.parent {
                let expected = if k == 0 { "pcc" } else { f.nodes[k - 1].id.as_str() };
                if parent != expected {
                    return Err(Error::NonRadialTopology(format!(
                        "node `{}` hangs off `{parent}`, but feeders are chains (expected `{expected}`)",
                        n.id
                    )));
                }
            }
            nodes.push(FeederNode {
                id: n.id.clone(),
                z_branch: Phasor::new(n.r, n.x),
                z_spur: Phasor::new(n.spur_r, n.spur_x),
            });
        }
        feeders.push(Feeder { name: f.name.clone(), nodes });
    }
    let topology = FeederTopology { feeders };
    topology.validate()?;

    let mut winds = file.wind_speeds.clone();
    if let Some(wf) = &file.wind_speed_file {
        for (k, v) in read_wind_file(&dir.join(wf))? {
            winds.insert(k, v);
        }
    }
    if let Some(unknown) = winds.keys().find(|k| !ids.contains(*k)) {
        return Err(Error::validation("unknown turbine id", format!("wind speed given for `{unknown}`")));
    }
    if let Some(unknown) = file.overrides.keys().find(|k| !ids.contains(*k)) {
        return Err(Error::validation("unknown turbine id", format!("override given for `{unknown}`")));
    }

    let mut turbines = Vec::with_capacity(ids.len());
    for id in topology.node_ids() {
        let mut value = file.defaults.clone();
        if let Some(o) = file.overrides.get(id) {
            merge(&mut value, o);
        }
        let params: PmsgParams = serde_json::from_value(value).map_err(|e| parse_err(format!("parameters of `{id}`"), e))?;
        let wind_speed = *winds
            .get(id)
            .ok_or_else(|| Error::validation("missing wind speed", format!("turbine `{id}`")))?;
        turbines.push(Turbine {
            id: id.to_string(),
            params,
            wind_speed,
        });
    }
    let farm = Farm {
        s_base: file.s_base_mva,
        topology,
        turbines,
    };
    farm.validate()?;
    Ok(farm)
}

pub fn load_farm(path: impl AsRef<Path>) -> Result<Farm> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let file: FarmFile = serde_json::from_str(&text).map_err(|e| json_err(path, e))?;
    resolve_farm(&file, path.parent().unwrap_or(Path::new(".")))
}

fn diff(base: &Value, full: &Value) -> Value {
    let mut out = serde_json::Map::new();
    if let (Value::Object(b), Value::Object(f)) = (base, full) {
        for (k, v) in f {
            if b.get(k) != Some(v) {
                out.insert(k.clone(), v.clone());
            }
        }
    }
    Value::Object(out)
}

/// Canonical file form: the first turbine's parameters as defaults, other
/// turbines as field-wise differences, wind speeds inline.
pub fn farm_to_file(farm: &Farm) -> FarmFile {
    let defaults = farm
        .turbines
        .first()
        .map(|t| serde_json::to_value(&t.params).expect("params serialize"))
        .unwrap_or_else(empty_object);
    let mut overrides = BTreeMap::new();
    for t in &farm.turbines {
        let d = diff(&defaults, &serde_json::to_value(&t.params).expect("params serialize"));
        if d.as_object().is_some_and(|o| !o.is_empty()) {
            overrides.insert(t.id.clone(), d);
        }
    }
    let feeders = farm
        .topology
        .feeders
        .iter()
        .map(|f| FeederEntry {
            name: f.name.clone(),
            nodes: f
                .nodes
                .iter()
                .map(|n| NodeEntry {
                    id: n.id.clone(),
                    r: n.z_branch.re,
                    x: n.z_branch.im,
                    spur_r: n.z_spur.re,
                    spur_x: n.z_spur.im,
                    parent: None,
                })
                .collect(),
        })
        .collect();
    FarmFile {
        s_base_mva: farm.s_base,
        defaults,
        overrides,
        feeders,
        wind_speeds: farm.turbines.iter().map(|t| (t.id.clone(), t.wind_speed)).collect(),
        wind_speed_file: None,
    }
}

pub fn farm_to_json(farm: &Farm) -> String {
    let mut s = serde_json::to_string_pretty(&farm_to_file(farm)).expect("farm serializes");
    s.push('\n');
    s
}

pub fn save_farm(farm: &Farm, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, farm_to_json(farm))?;
    Ok(())
}

fn default_strategy() -> String {
    "unbalance".into()
}
fn default_step() -> f64 {
    1e-3
}
fn default_sigma1() -> f64 {
    1e-6
}
fn default_sigma2() -> f64 {
    0.005
}
fn default_max_outer() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    /// Path of the farm file, relative to the scenario file.
    pub farm: String,
    pub grid: TheveninGrid,
    pub fault: FaultSpec,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default = "default_step")]
    pub step: f64,
    pub t_end: f64,
    #[serde(default = "default_sigma1")]
    pub sigma1: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
}

/// A scenario with its farm resolved.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub file: ScenarioFile,
    /// Resolved against the scenario's directory.
    pub output_dir: Option<PathBuf>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<LoadedScenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| json_err(path, e))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let farm_path = dir.join(&file.farm);
    if !farm_path.is_file() {
        return Err(Error::validation("farm-file", format!("{} does not exist", farm_path.display())));
    }
    let farm = load_farm(&farm_path)?;
    let name = file.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
    });
    let scenario = Scenario {
        name,
        farm,
        grid: file.grid.clone(),
        fault: file.fault.clone(),
        strategy: file.strategy.clone(),
        step: file.step,
        t_end: file.t_end,
        sigma1: file.sigma1,
        sigma2: file.sigma2,
        max_outer: file.max_outer,
    };
    scenario.validate()?;
    let output_dir = file.output_dir.as_ref().map(|o| dir.join(o));
    Ok(LoadedScenario {
        scenario,
        file,
        output_dir,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageRow {
    pub turbine_id: String,
    pub u_pos_re: f64,
    pub u_pos_im: f64,
    pub u_neg_re: f64,
    pub u_neg_im: f64,
    pub u_pos: f64,
    pub u_neg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub turbine_id: String,
    pub wind_speed: f64,
    pub p0: f64,
    pub u_pos: f64,
    pub u_neg: f64,
    pub p_cri1: f64,
    pub p_cri2: f64,
    pub v_cri1: f64,
    pub v_cri2: f64,
    pub cluster: Cluster,
}

pub fn voltage_rows(farm: &Farm, solution: &VoltageSolution) -> Vec<VoltageRow> {
    farm.turbines
        .iter()
        .zip(&solution.voltages)
        .map(|(t, u)| VoltageRow {
            turbine_id: t.id.clone(),
            u_pos_re: u.pos.re,
            u_pos_im: u.pos.im,
            u_neg_re: u.neg.re,
            u_neg_im: u.neg.im,
            u_pos: u.pos.norm(),
            u_neg: u.neg.norm(),
        })
        .collect()
}

pub fn cluster_rows(farm: &Farm, solution: &VoltageSolution, assignments: &[ClusterAssignment]) -> Vec<ClusterRow> {
    farm.turbines
        .iter()
        .zip(&solution.voltages)
        .zip(assignments)
        .map(|((t, u), a)| ClusterRow {
            turbine_id: t.id.clone(),
            wind_speed: t.wind_speed,
            p0: a.p0,
            u_pos: u.pos.norm(),
            u_neg: u.neg.norm(),
            p_cri1: a.criticals.p_cri1,
            p_cri2: a.criticals.p_cri2,
            v_cri1: a.criticals.v_cri1,
            v_cri2: a.criticals.v_cri2,
            cluster: a.cluster,
        })
        .collect()
}

pub fn write_rows<T: Serialize, W: std::io::Write>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: serde::de::DeserializeOwned, R: std::io::Read>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Randomized 20-turbine farm: four feeders of five turbines, short cable
/// sections, box transformers, wind speeds decreasing down each feeder.
pub fn desk_farm(seed: u64) -> Farm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feeders = Vec::new();
    let mut turbines = Vec::new();
    for f in 0..4 {
        let mut nodes = Vec::new();
        let free_stream = rng.gen_range(10.8..11.8);
        for k in 0..5 {
            let id = format!("wt{:02}", f * 5 + k + 1);
            nodes.push(FeederNode {
                id: id.clone(),
                z_branch: Phasor::new(rng.gen_range(1e-4..2e-4), rng.gen_range(2e-4..4e-4)),
                z_spur: Phasor::new(0.006, 0.056),
            });
            let wake: f64 = rng.gen_range(0.25..0.45);
            turbines.push(Turbine {
                id,
                params: PmsgParams::default(),
                wind_speed: (free_stream - wake * k as f64).max(9.0),
            });
        }
        feeders.push(Feeder {
            name: format!("F{}", f + 1),
            nodes,
        });
    }
    Farm {
        s_base: 1.5,
        topology: FeederTopology { feeders },
        turbines,
    }
}
