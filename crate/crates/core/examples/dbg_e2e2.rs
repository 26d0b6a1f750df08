use cspmp::engine::{run, RunConfig};
use cspmp::instance::sample_index_regular;
use cspmp::parisi::*;
use cspmp::predicate::Predicate;

fn main() {
    let pred = Predicate::maxcut2().unwrap();
    let xi = pred.mixture();
    for delta in [0.1f64, 0.05, 0.025] {
        let mut mc = MinimizeConfig::for_mixture(&xi);
        mc.grid = GridConfig::for_mixture(&xi, delta);
        let out = minimize_alg(&xi, 3, &mc).unwrap();
        let grid = solve_pde(&xi, &out.mu, &mc.grid).unwrap();
        let fv = functional_value(&grid, &xi, &out.mu);
        let sol = ParisiSolution { mu: out.mu, grid, functional_value: fv, xi: xi.clone(), eta: 0.05, warning: false };
        let stats = simulate_sde(&sol, delta, 100_000, 4).unwrap();
        let consts = nonlinearity_constants(&sol, &stats, delta, 2).unwrap();
        let inst = sample_index_regular(1 << 15, 256, 2, 77).unwrap();
        let mut rc = RunConfig::new(delta, 55);
        rc.self_normalize = std::env::args().nth(1).as_deref() == Some("self");
        let res = run(&inst, &pred, &sol, &consts, &rc).unwrap();
        let n = res.z_final.len() as f64;
        let var_z: f64 = res.z_final.iter().map(|z| z * z).sum::<f64>() / n;
        let spill: f64 = res.z_final.iter().map(|z| {
            let t = z.abs() - 1.0;
            if t > 0.0 { t * t } else { 0.0 }
        }).sum::<f64>() / n;
        let excess = fv / 128.0f64.sqrt();
        println!(
            "delta={delta}: fraction={:.5} pre_trnc={:.5} var_zL={:.4} E[(z-trnc)^2]={:.5} eff={:.3} (asym {:.5})",
            res.satisfying_fraction, res.mean_f_z, var_z, spill,
            (res.satisfying_fraction - 0.5) / excess, 0.5 + excess
        );
        // engine-vs-SDE Phi_xx^2 second moment at a few levels
        let levels = (1.0 / delta) as usize;
        for l in [0usize, levels / 2, levels - 1] {
            // engine empirical E[Phi_xx(t, x_node)^2] is not recorded; infer from
            // A stats instead: E[A^2] * nu/delta should be 1 under Property 2
            let _ = l;
        }
    }
}
