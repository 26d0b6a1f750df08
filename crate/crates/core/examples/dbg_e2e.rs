use cspmp::engine::{run, RunConfig};
use cspmp::instance::sample_index_regular;
use cspmp::parisi::*;
use cspmp::predicate::Predicate;
use cspmp::rng::derive_seed;
use std::time::Instant;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "maxcut".into());
    let (pred, d, k) = match which.as_str() {
        "xor" => (Predicate::xor4even().unwrap(), 256usize, 3usize),
        _ => (Predicate::maxcut2().unwrap(), 256, 3),
    };
    let delta = 0.05;
    let xi = pred.mixture();
    let r = pred.arity();
    let mut mc = MinimizeConfig::for_mixture(&xi);
    mc.grid = GridConfig::for_mixture(&xi, delta);
    let t0 = Instant::now();
    let out = minimize_alg(&xi, k, &mc).unwrap();
    println!("minimize: value={:.6} elapsed {:?}", out.value, t0.elapsed());
    let grid = solve_pde(&xi, &out.mu, &mc.grid).unwrap();
    let fv = functional_value(&grid, &xi, &out.mu);
    println!("full-grid functional = {:.6}", fv);
    let sol = ParisiSolution { mu: out.mu, grid, functional_value: fv, xi, eta: 0.05, warning: false };
    let stats = simulate_sde(&sol, delta, 100_000, 4).unwrap();
    let consts = nonlinearity_constants(&sol, &stats, delta, r).unwrap();
    println!("energy integral = {:.6}", alg_energy_estimate(&sol, &stats, 0.05));
    let alpha = (d / r) as f64;
    let mut fractions = Vec::new();
    for s in 0..5u64 {
        let inst = sample_index_regular(1 << 15, d, r, derive_seed(100, s)).unwrap();
        let mut rc = RunConfig::new(delta, derive_seed(200, s));
        rc.round_seed = derive_seed(300, s);
        let t0 = Instant::now();
        let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
        println!(
            "seed {s}: fraction={:.5} mean_f_z={:.5} mean_f_trunc={:.5} clamp_hits={} [{:?}]",
            res.satisfying_fraction, res.mean_f_z, res.mean_f_truncated,
            res.stats.clamp_hits.iter().sum::<u64>(), t0.elapsed()
        );
        fractions.push(res.satisfying_fraction);
    }
    fractions.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = fractions[2];
    let asym = pred.mean() + fv / alpha.sqrt();
    println!("median = {:.5}; asymptote E[f]+ALG/sqrt(alpha) = {:.5}", median, asym);
    println!("efficiency = {:.3}", (median - pred.mean()) / (fv / alpha.sqrt()));
}
