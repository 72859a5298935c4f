mod common;

use common::{c, scenario, scenario_path};
use wfeq_core::aggregation::EquivalentFarm;
use wfeq_core::clustering::Cluster;
use wfeq_core::grid::{iterate_pcc_voltage, pcc::cluster_farm};
use wfeq_core::io::{farm_to_json, load_farm};
use wfeq_core::sim::{simulate, Trace};
use wfeq_core::SequenceSet;

#[test]
fn bundled_farm_round_trips() {
    let farm = load_farm(scenario_path("farm20.json")).unwrap();
    assert_eq!(farm.turbines.len(), 20);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.json");
    std::fs::write(&p, farm_to_json(&farm)).unwrap();
    let back = load_farm(&p).unwrap();
    assert_eq!(back, farm);
    assert_eq!(farm_to_json(&back), std::fs::read_to_string(&p).unwrap());
}

#[test]
fn healthy_grid_leaves_everyone_in_cluster_one() {
    let s = scenario("case1.json").scenario;
    let (sol, assignments) = cluster_farm(&s, &SequenceSet::pn(c(1.0, 0.0), c(0.0, 0.0))).unwrap();
    assert!(sol.voltages.iter().all(|u| u.pos.norm() > 0.9));
    assert!(assignments.iter().all(|a| a.cluster == Cluster::I));
}

#[test]
fn severe_case_populates_all_clusters() {
    let s = scenario("case1.json").scenario;
    let (result, eq) = iterate_pcc_voltage(&s, s.sigma2, s.max_outer).unwrap();
    assert!(result.converged && result.iterations <= 5);
    let ids: Vec<_> = eq.machines.iter().map(|m| m.id.as_str()).collect();
    assert_eq!(ids, ["eq_I", "eq_II", "eq_III"]);
    assert_eq!(eq.machines.iter().map(|m| m.members.len()).sum::<usize>(), 20);
    assert!(eq.machines[2].ramp.is_some());
    let back: EquivalentFarm = serde_json::from_str(&eq.to_json()).unwrap();
    assert_eq!(back, eq);
}

#[test]
fn trace_csv_round_trips() {
    let s = scenario("case2.json").scenario;
    let trace = simulate("tm", &s).unwrap();
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let back = Trace::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.t, trace.t);
    assert_eq!(back.p, trace.p);
    assert_eq!(back.machine_ids, trace.machine_ids);
    assert_eq!(back.i_d, trace.i_d);
}

#[test]
fn equivalents_reproduce_prefault_power() {
    let s = scenario("case1.json").scenario;
    let dm = simulate("dm", &s).unwrap();
    let k = dm.index_at(s.fault.t_start) - 1;
    for model in ["tm", "sm"] {
        let t = simulate(model, &s).unwrap();
        assert!((t.p[k] - dm.p[k]).abs() / s.rating() < 5e-3, "{model}: {} vs {}", t.p[k], dm.p[k]);
    }
}
