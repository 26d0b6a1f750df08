use cspmp::engine::{run, RunConfig};
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
    let sol = ParisiSolution { mu: out.mu, grid, functional_value: 0.0, xi: xi.clone(), eta: 0.05, warning: false };
    let stats = simulate_sde(&sol, delta, 100_000, 4).unwrap();
    let consts = nonlinearity_constants(&sol, &stats, delta, 2).unwrap();
    let n_seeds: u64 = std::env::args().nth(1).map(|v| v.parse().unwrap()).unwrap_or(10);
    let mut stds = Vec::new();
    for n in [1usize << 13, 1 << 15] {
        let mut fr = Vec::new();
        for s in 0..n_seeds {
            let inst = sample_index_regular(n, 256, 2, derive_seed(1300 + n as u64, s)).unwrap();
            let mut rc = RunConfig::new(delta, derive_seed(1400 + n as u64, s));
            rc.round_seed = derive_seed(1500 + n as u64, s);
            let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
            fr.push(res.satisfying_fraction);
        }
        let mean = fr.iter().sum::<f64>() / fr.len() as f64;
        let var = fr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (fr.len() - 1) as f64;
        println!("n={n}: mean {:.5} std {:.6}", mean, var.sqrt());
        stds.push(var.sqrt());
    }
    println!("ratio = {:.3}", stds[0] / stds[1]);
}
