// sequential replica of the engine recursion with per-level prints
use cspmp::instance::sample_index_regular;
use cspmp::parisi::*;
use cspmp::predicate::Predicate;
use cspmp::rng::standard_normal;

fn main() {
    let pred = Predicate::xor4even().unwrap();
    let xi = pred.mixture();
    let delta = 0.05f64;
    let r = 4usize;
    let mut mc = MinimizeConfig::for_mixture(&xi);
    mc.grid = GridConfig::for_mixture(&xi, delta);
    let out = minimize_alg(&xi, 3, &mc).unwrap();
    let grid = solve_pde(&xi, &out.mu, &mc.grid).unwrap();
    let sol = ParisiSolution { mu: out.mu, grid, functional_value: 0.0, xi: xi.clone(), eta: 0.05, warning: false };
    let stats = simulate_sde(&sol, delta, 50_000, 4).unwrap();
    let consts = nonlinearity_constants(&sol, &stats, delta, r).unwrap();

    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map(|v| v.parse().unwrap()).unwrap_or(8192);
    let d: usize = args.get(2).map(|v| v.parse().unwrap()).unwrap_or(256);
    let inst = sample_index_regular(n, d, r, 7).unwrap();
    let m = inst.m();
    let z0: Vec<f64> = (0..n).map(|i| delta.sqrt() * standard_normal(3, i as u64)).collect();
    let mut z_dir: Vec<f64> = (0..m * r).map(|e| z0[inst.var_at(e)]).collect();
    let mut w_dir = vec![0.0f64; m * r];
    let mut x_dir = vec![0.0f64; m * r];
    let mut g = vec![0.0f64; m * r];
    let sqrt_d = (d as f64).sqrt();
    let sqrt_dm1 = ((d - 1) as f64).sqrt();
    let levels = 20usize;
    for level in 0..levels {
        let t = level as f64 * delta;
        let c_l = consts[level];
        let drift = xi.xi_second(t) * sol.mu.eval(t) * delta;
        for a in 0..m {
            let mut y = [0.0f64; 4];
            for iota in 0..r {
                let e = a * r + iota;
                y[iota] = inst.sign_at(e) * z_dir[e];
            }
            for iota in 0..r {
                let prod: f64 = (0..r).filter(|&k| k != iota).map(|k| y[k]).product();
                g[a * r + iota] = inst.sign_at(a * r + iota) * 0.5 * prod;
            }
        }
        let mut max_z: f64 = 0.0;
        let mut max_u: f64 = 0.0;
        let mut max_a: f64 = 0.0;
        let mut sum_u2 = 0.0;
        let mut sum_a2 = 0.0;
        let mut sum_z2 = 0.0;
        for v in 0..n {
            let incs = inst.incidences(v);
            let sum_g: f64 = incs.iter().map(|&e| g[e as usize]).sum();
            let w_node = sum_g / sqrt_d;
            for &e in incs {
                let e = e as usize;
                let w_new = (sqrt_d * w_node - g[e]) / sqrt_dm1;
                let u = w_new - w_dir[e];
                let a_val = sol.grid.sample_phi_xx(t, x_dir[e]) * c_l;
                z_dir[e] += a_val * u;
                x_dir[e] += drift * sol.grid.sample_phi_x(t, x_dir[e]) + 2.0 * u;
                w_dir[e] = w_new;
                max_z = max_z.max(z_dir[e].abs());
                max_u = max_u.max(u.abs());
                max_a = max_a.max(a_val.abs());
                sum_u2 += u * u;
                sum_a2 += a_val * a_val;
                sum_z2 += z_dir[e] * z_dir[e];
            }
        }
        let nd = (m * r) as f64;
        let nu = cspmp::analysis::nu(&xi, delta, level + 1, r).unwrap();
        println!(
            "l={level:2} max|z|={max_z:8.2} max|u|={max_u:8.2} max|A|={max_a:7.2} E[u^2]/nu={:7.3} E[A^2]nu/d={:6.3} z2/(l+2)d={:6.3}",
            sum_u2 / nd / nu,
            sum_a2 / nd * nu / delta,
            sum_z2 / nd / ((level as f64 + 2.0) * delta)
        );
        if !max_z.is_finite() { break; }
    }
}
