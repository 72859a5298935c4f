#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use wfeq_core::io::{load_scenario, LoadedScenario};
use wfeq_core::network::{Farm, Feeder, FeederNode, FeederTopology, Turbine};
use wfeq_core::phasor::orient_dq;
use wfeq_core::pmsg::{PmsgParams, SequenceControl};
use wfeq_core::{Phasor, SequenceSet};

pub fn c(re: f64, im: f64) -> Phasor {
    Phasor::new(re, im)
}

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn scenario(name: &str) -> LoadedScenario {
    load_scenario(scenario_path(name)).expect("bundled scenario loads")
}

/// Random radial farm: one to three feeders, `nodes` turbines in total.
pub fn random_farm<R: Rng>(rng: &mut R, nodes: usize) -> Farm {
    let n_feeders = rng.gen_range(1..=3.min(nodes));
    let mut sizes = vec![1; n_feeders];
    for _ in n_feeders..nodes {
        sizes[rng.gen_range(0..n_feeders)] += 1;
    }
    let mut feeders = Vec::new();
    let mut turbines = Vec::new();
    let mut k = 0;
    for (f, &size) in sizes.iter().enumerate() {
        let mut ns = Vec::new();
        for _ in 0..size {
            let id = format!("n{k}");
            k += 1;
            ns.push(FeederNode {
                id: id.clone(),
                z_branch: c(rng.gen_range(0.0..3e-3), rng.gen_range(1e-4..6e-3)),
                z_spur: c(rng.gen_range(0.0..0.01), rng.gen_range(0.0..0.06)),
            });
            turbines.push(Turbine {
                id,
                params: PmsgParams::default(),
                wind_speed: rng.gen_range(4.0..12.5),
            });
        }
        feeders.push(Feeder { name: format!("f{f}"), nodes: ns });
    }
    Farm {
        s_base: 1.5,
        topology: FeederTopology { feeders },
        turbines,
    }
}

/// Transfer impedances built from shared path segments: entry (i, j) sums
/// the branches common to the PCC paths of both nodes, plus the spur on the
/// diagonal.
pub fn path_impedance_matrix(topology: &FeederTopology) -> Vec<Vec<Phasor>> {
    let mut paths: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut spurs = Vec::new();
    for (f, feeder) in topology.feeders.iter().enumerate() {
        for (k, node) in feeder.nodes.iter().enumerate() {
            paths.push((0..=k).map(|b| (f, b)).collect());
            spurs.push(node.z_spur);
        }
    }
    let n = paths.len();
    let mut z = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            for seg in &paths[i] {
                if paths[j].contains(seg) {
                    z[i][j] += topology.feeders[seg.0].nodes[seg.1].z_branch;
                }
            }
        }
        z[i][i] += spurs[i];
    }
    z
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        assert!(a[col][col].abs() > 1e-300, "singular Jacobian");
        let pivot_row = a[col].clone();
        for row in col + 1..n {
            let f = a[row][col] / pivot_row[col];
            for (v, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *v -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Dense Newton solve of U = U_pcc + Z I(U) over both sequences, with a
/// central-difference Jacobian.
pub fn newton_terminal_voltages(farm: &Farm, u_pcc: &SequenceSet, control: &dyn SequenceControl) -> Vec<SequenceSet> {
    let z = path_impedance_matrix(&farm.topology);
    let n = farm.turbines.len();
    let p0: Vec<f64> = farm.turbines.iter().map(Turbine::p0).collect();
    let unpack = |x: &[f64]| -> Vec<SequenceSet> {
        (0..n)
            .map(|k| SequenceSet::pn(c(x[4 * k], x[4 * k + 1]), c(x[4 * k + 2], x[4 * k + 3])))
            .collect()
    };
    let residual = |x: &[f64]| -> Vec<f64> {
        let u = unpack(x);
        let i: Vec<SequenceSet> = u
            .iter()
            .enumerate()
            .map(|(k, uk)| {
                let v = orient_dq(uk).expect("nonzero positive sequence");
                let refs = control.current_refs(&v, p0[k], &farm.turbines[k].params).expect("refs");
                refs.to_network(v.theta).scale(farm.turbines[k].params.s_rated / farm.s_base)
            })
            .collect();
        let mut r = Vec::with_capacity(4 * n);
        for a in 0..n {
            let mut pos = u_pcc.pos;
            let mut neg = u_pcc.neg;
            for b in 0..n {
                pos += z[a][b] * i[b].pos;
                neg += z[a][b] * i[b].neg;
            }
            let dp = u[a].pos - pos;
            let dn = u[a].neg - neg;
            r.extend([dp.re, dp.im, dn.re, dn.im]);
        }
        r
    };
    let mut x: Vec<f64> = (0..n).flat_map(|_| [u_pcc.pos.re, u_pcc.pos.im, u_pcc.neg.re, u_pcc.neg.im]).collect();
    for _ in 0..50 {
        let r = residual(&x);
        let norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm < 1e-13 {
            break;
        }
        let m = x.len();
        let mut jac = vec![vec![0.0; m]; m];
        let eps = 1e-7;
        for col in 0..m {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[col] += eps;
            xm[col] -= eps;
            let (rp, rm) = (residual(&xp), residual(&xm));
            for row in 0..m {
                jac[row][col] = (rp[row] - rm[row]) / (2.0 * eps);
            }
        }
        let dx = solve_dense(jac, r.iter().map(|v| -v).collect());
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    unpack(&x)
}
