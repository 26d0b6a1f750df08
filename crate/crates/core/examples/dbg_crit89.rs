use cspmp::engine::{run, value_decomposition, RunConfig};
use cspmp::instance::sample_index_regular;
use cspmp::parisi::*;
use cspmp::predicate::Predicate;
use cspmp::rng::derive_seed;

fn main() {
    let pred = Predicate::maxcut2().unwrap();
    let xi = pred.mixture();
    let delta = 0.1f64;
    let mut mc = MinimizeConfig::for_mixture(&xi);
    mc.grid = GridConfig::for_mixture(&xi, delta);
    let out = minimize_alg(&xi, 3, &mc).unwrap();
    let grid = solve_pde(&xi, &out.mu, &mc.grid).unwrap();
    let fv = functional_value(&grid, &xi, &out.mu);
    let sol = ParisiSolution { mu: out.mu, grid, functional_value: fv, xi: xi.clone(), eta: 0.05, warning: false };
    let stats = simulate_sde(&sol, delta, 100_000, 4).unwrap();
    let consts = nonlinearity_constants(&sol, &stats, delta, 2).unwrap();

    // criterion 8: value-decomposition gap, d=256 vs 512
    let n8 = 1usize << 15;
    for d in [256usize, 512] {
        let mut gaps = Vec::new();
        for s in 0..5u64 {
            let inst = sample_index_regular(n8, d, 2, derive_seed(800, s)).unwrap();
            let mut rc = RunConfig::new(delta, derive_seed(900, s));
            rc.record_history = true;
            rc.history_cap = 1000; // keep memory small, only decomposition needed
            let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
            let vd = value_decomposition(&res, &pred).unwrap();
            gaps.push(vd.gap);
        }
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        println!("d={d}: gaps {:?} mean {:.5}", gaps.iter().map(|g| (g * 1e4).round() / 1e4).collect::<Vec<_>>(), mean);
    }

    // criterion 9: proximity ratios 128 -> 256
    let n9 = 1usize << 14;
    for d in [128usize, 256] {
        let mut pu = 0.0;
        let mut pa = 0.0;
        let seeds = 3u64;
        for s in 0..seeds {
            let inst = sample_index_regular(n9, d, 2, derive_seed(910, s)).unwrap();
            let rc = RunConfig::new(delta, derive_seed(920, s));
            let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
            pu += res.stats.prox_u.iter().sum::<f64>() / res.stats.prox_u.len() as f64;
            pa += res.stats.prox_a.iter().sum::<f64>() / res.stats.prox_a.len() as f64;
        }
        println!("d={d}: prox_u {:.6e} prox_a {:.6e}", pu / seeds as f64, pa / seeds as f64);
    }
}
