use cspmp::analysis::{tau_recurrence, TauCalculator};
use cspmp::engine::{run, RunConfig};
use cspmp::instance::{is_treelike, sample_index_regular};
use cspmp::parisi::*;
use cspmp::predicate::Predicate;
use cspmp::rng::{standard_normal, stream_rng};
use rand::Rng;

fn maxcut_solution(delta: f64) -> ParisiSolution {
    let pred = Predicate::maxcut2().unwrap();
    let xi = pred.mixture();
    let mu = StepFunction::zero();
    let cfg = GridConfig::for_mixture(&xi, delta);
    let grid = solve_pde(&xi, &mu, &cfg).unwrap();
    let v = functional_value(&grid, &xi, &mu);
    ParisiSolution { mu, grid, functional_value: v, xi, eta: 0.05, warning: false }
}

fn main() {
    let pred = Predicate::maxcut2().unwrap();
    let delta = 0.1;
    let sol = maxcut_solution(delta);
    let stats = simulate_sde(&sol, delta, 20_000, 11).unwrap();
    let consts = nonlinearity_constants(&sol, &stats, delta, 2).unwrap();

    // base case: tau^1 squared = delta/4 = nu_1 exactly for the cut predicate
    let inst = sample_index_regular(512, 16, 2, 3).unwrap();
    let mut rc = RunConfig::new(delta, 5);
    rc.snapshot_levels = vec![0, 1];
    let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
    let diag1 = tau_recurrence(&inst, &pred, delta, &res.snapshots, 1, 10_000).unwrap();
    println!("base: mean tau^2 = {:.6} nu = {:.6} E[(t2-nu)^2] = {:.3e}", diag1.mean_tau_sq, diag1.nu, diag1.mean_sq_dev);

    // d-doubling decay of E[(tau^2 - nu)^2] at level 2
    for d in [128usize, 256] {
        let inst = sample_index_regular(4096, d, 2, 7).unwrap();
        let mut rc = RunConfig::new(delta, 9);
        rc.snapshot_levels = vec![0, 1];
        let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
        let diag = tau_recurrence(&inst, &pred, delta, &res.snapshots, 3, 2_000).unwrap();
        println!("d={d}: E[(tau^2-nu_3)^2] = {:.4e} (nu_3 = {:.4})", diag.mean_sq_dev, diag.nu);
    }

    // Lemma B.5: conditional resampling at a frozen radius-1 ball, level 2
    let n = 4000usize;
    let d = 6usize;
    let inst = sample_index_regular(n, d, 2, 21).unwrap();
    // pick a vertex with a treelike radius-3 neighborhood and one incidence
    let v0 = (0..n).find(|&v| is_treelike(&inst, v, 2)).unwrap();
    let e0 = inst.incidences(v0)[0] as usize;
    // frozen ball: variables within distance 1 of v0
    let mut frozen = vec![false; n];
    frozen[v0] = true;
    for &e in inst.incidences(v0) {
        let a = e as usize / 2;
        for k in 0..2 {
            frozen[inst.var_at(a * 2 + k)] = true;
        }
    }
    let base_seed = 4242u64;
    let mut rc = RunConfig::new(delta, base_seed);
    rc.snapshot_levels = vec![0];
    let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
    let mut calc = TauCalculator::new(&inst, &pred, delta, &res.snapshots);
    let tau2 = calc.tau_squared(e0, 2).unwrap();

    // resample unfrozen z0 and recompute u^2_{e0} by direct recursion
    let levels = 2usize;
    let mut mean_u2 = 0.0;
    let mut mean_u4 = 0.0;
    let trials = 10_000usize;
    let m = inst.m();
    let sqrt_d = (d as f64).sqrt();
    let sqrt_dm1 = ((d - 1) as f64).sqrt();
    for trial in 0..trials {
        let mut rng = stream_rng(777, trial as u64);
        let z0: Vec<f64> = (0..n)
            .map(|i| {
                if frozen[i] {
                    delta.sqrt() * standard_normal(base_seed, i as u64)
                } else {
                    delta.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal)
                }
            })
            .collect();
        // two-level directed recursion (maxcut closed form for D)
        let mut z_dir: Vec<f64> = (0..m * 2).map(|e| z0[inst.var_at(e)]).collect();
        let mut w_dir = vec![0.0f64; m * 2];
        let mut u_target = 0.0;
        for level in 0..levels {
            let t = level as f64 * delta;
            let c_l = consts[level];
            let mut g = vec![0.0f64; m * 2];
            for a in 0..m {
                let y0 = inst.sign_at(a * 2) * z_dir[a * 2];
                let y1 = inst.sign_at(a * 2 + 1) * z_dir[a * 2 + 1];
                g[a * 2] = inst.sign_at(a * 2) * (-0.5) * y1;
                g[a * 2 + 1] = inst.sign_at(a * 2 + 1) * (-0.5) * y0;
            }
            let mut w_node = vec![0.0f64; n];
            for v in 0..n {
                w_node[v] = inst.incidences(v).iter().map(|&e| g[e as usize]).sum::<f64>() / sqrt_d;
            }
            let mut new_w = vec![0.0f64; m * 2];
            let mut u_dir = vec![0.0f64; m * 2];
            for e in 0..m * 2 {
                let v = inst.var_at(e);
                new_w[e] = (sqrt_d * w_node[v] - g[e]) / sqrt_dm1;
                u_dir[e] = new_w[e] - w_dir[e];
            }
            if level == levels - 1 {
                u_target = u_dir[e0];
            }
            // x is irrelevant for mu = 0... but A multiplies z updates
            for e in 0..m * 2 {
                // A^0 is a constant (x = 0); at level 0 all A equal
                let a_val = if level == 0 {
                    sol.grid.sample_phi_xx(t, 0.0) * c_l
                } else {
                    0.0
                };
                z_dir[e] += a_val * u_dir[e];
                w_dir[e] = new_w[e];
            }
        }
        mean_u2 += u_target * u_target;
        mean_u4 += u_target.powi(4);
    }
    mean_u2 /= trials as f64;
    mean_u4 /= trials as f64;
    let se = ((mean_u4 - mean_u2 * mean_u2) / trials as f64).sqrt();
    println!(
        "B.5 oracle: resampled E[u^2] = {:.6e} vs tau^2 = {:.6e} ({:.2} sigma)",
        mean_u2, tau2, (mean_u2 - tau2).abs() / se
    );
}
