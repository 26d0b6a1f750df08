//! Discretized drift-diffusion chain associated with a solved order
//! parameter, and the per-iteration normalization constants it yields.
//!
//! X evolves by Euler steps with exact Gaussian increment variances
//! xi'(d(l+1)) - xi'(dl); the normalized spin martingale Ztilde uses the
//! population estimate of E[Phi_xx^2] at each step.

use super::ParisiSolution;
use crate::error::{Error, Result};
use crate::rng::{standard_normal, stream};
use rayon::prelude::*;
use serde::Serialize;

const PATH_CHUNK: usize = 4096;
const LEVEL_SLOTS: u64 = 1 << 12;

#[derive(Debug, Clone, Serialize)]
pub struct SdeStats {
    pub delta: f64,
    pub n_paths: usize,
    /// E[Phi_xx(dl, X_l)] for l = 0..L-1.
    pub mean_phixx: Vec<f64>,
    /// E[Phi_xx(dl, X_l)^2] for l = 0..L-1.
    pub mean_phixx_sq: Vec<f64>,
    /// E[(Ztilde_l)^2] for l = 0..=L.
    pub martingale_sq: Vec<f64>,
    /// Mean martingale increment per step, with its standard error.
    pub incr_mean: Vec<f64>,
    pub incr_stderr: Vec<f64>,
    /// Var(X_l) for l = 0..=L.
    pub var_x: Vec<f64>,
    /// Sorted |Ztilde_L| over paths, for quantile checks.
    #[serde(skip)]
    pub final_abs_z: Vec<f64>,
}

pub fn simulate_sde(
    sol: &ParisiSolution,
    delta: f64,
    n_paths: usize,
    seed: u64,
) -> Result<SdeStats> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::BadParameter(format!("delta {delta} outside (0, 0.5]")));
    }
    if sol.grid.dt > delta + 1e-12 {
        return Err(Error::BadGrid(format!(
            "grid dt {} coarser than delta {delta}",
            sol.grid.dt
        )));
    }
    let levels = (1.0 / delta).floor() as usize;
    if levels as u64 + 1 >= LEVEL_SLOTS {
        return Err(Error::BadParameter(format!("{levels} levels exceed the stream budget")));
    }
    if n_paths == 0 {
        return Err(Error::BadParameter("need at least one path".into()));
    }
    let xi = &sol.xi;
    let grid = &sol.grid;
    let mu = &sol.mu;

    let mut x: Vec<f64> = vec![0.0; n_paths];
    let mut z: Vec<f64> = (0..n_paths)
        .map(|p| {
            delta.sqrt()
                * standard_normal(seed, stream::SDE + (p as u64) * LEVEL_SLOTS + (LEVEL_SLOTS - 1))
        })
        .collect();

    let mut stats = SdeStats {
        delta,
        n_paths,
        mean_phixx: Vec::with_capacity(levels),
        mean_phixx_sq: Vec::with_capacity(levels),
        martingale_sq: Vec::with_capacity(levels + 1),
        incr_mean: Vec::with_capacity(levels),
        incr_stderr: Vec::with_capacity(levels),
        var_x: Vec::with_capacity(levels + 1),
        final_abs_z: Vec::new(),
    };
    stats.var_x.push(0.0);
    stats.martingale_sq.push(moment2(&z));

    for level in 0..levels {
        let t = level as f64 * delta;
        let partial_pxx: Vec<(f64, f64)> = x
            .par_chunks(PATH_CHUNK)
            .map(|chunk| {
                let mut s = 0.0;
                let mut sq = 0.0;
                for &xv in chunk {
                    let v = grid.sample_phi_xx(t, xv);
                    s += v;
                    sq += v * v;
                }
                (s, sq)
            })
            .collect();
        let (sum, sum_sq) = partial_pxx
            .iter()
            .fold((0.0, 0.0), |acc, &(a, b)| (acc.0 + a, acc.1 + b));
        let mean = sum / n_paths as f64;
        let mean_sq = sum_sq / n_paths as f64;
        stats.mean_phixx.push(mean);
        stats.mean_phixx_sq.push(mean_sq);
        if mean_sq <= 0.0 {
            return Err(Error::BadParameter(format!(
                "E[Phi_xx^2] vanished at level {level}"
            )));
        }

        let drift_coeff = xi.xi_second(t) * mu.eval(t) * delta;
        let noise_sd = (xi.xi_prime((level + 1) as f64 * delta) - xi.xi_prime(t))
            .max(0.0)
            .sqrt();
        let z_scale = delta.sqrt() / mean_sq.sqrt();

        let partials: Vec<(f64, f64)> = x
            .par_chunks_mut(PATH_CHUNK)
            .zip(z.par_chunks_mut(PATH_CHUNK))
            .enumerate()
            .map(|(chunk_idx, (xs, zs))| {
                let base = chunk_idx * PATH_CHUNK;
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                for (off, (xv, zv)) in xs.iter_mut().zip(zs.iter_mut()).enumerate() {
                    let p = (base + off) as u64;
                    let b = standard_normal(seed, stream::SDE + p * LEVEL_SLOTS + level as u64);
                    let incr = b * z_scale * grid.sample_phi_xx(t, *xv);
                    *zv += incr;
                    *xv += drift_coeff * grid.sample_phi_x(t, *xv) + noise_sd * b;
                    s1 += incr;
                    s2 += incr * incr;
                }
                (s1, s2)
            })
            .collect();
        let (s1, s2) = partials
            .iter()
            .fold((0.0, 0.0), |acc, &(a, b)| (acc.0 + a, acc.1 + b));
        let n = n_paths as f64;
        let mean_incr = s1 / n;
        let var_incr = (s2 / n - mean_incr * mean_incr).max(0.0);
        stats.incr_mean.push(mean_incr);
        stats.incr_stderr.push((var_incr / n).sqrt());
        stats.var_x.push(variance(&x));
        stats.martingale_sq.push(moment2(&z));
    }

    let mut finals: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stats.final_abs_z = finals;
    Ok(stats)
}

/// Per-step multipliers c_l = sqrt(delta / (nu_{l+1} E[Phi_xx^2])) that
/// scale Phi_xx into the engine nonlinearity.
pub fn nonlinearity_constants(
    sol: &ParisiSolution,
    stats: &SdeStats,
    delta: f64,
    r: usize,
) -> Result<Vec<f64>> {
    if (stats.delta - delta).abs() > 1e-12 {
        return Err(Error::BadParameter("stats were computed at a different delta".into()));
    }
    let levels = stats.mean_phixx_sq.len();
    let mut consts = Vec::with_capacity(levels);
    for level in 0..levels {
        let nu = crate::analysis::nu(&sol.xi, delta, level + 1, r)?;
        let msq = stats.mean_phixx_sq[level];
        if msq <= 0.0 || nu <= 0.0 {
            return Err(Error::BadParameter(format!(
                "degenerate normalization at level {level}: nu={nu} E[Phi_xx^2]={msq}"
            )));
        }
        consts.push((delta / (nu * msq)).sqrt());
    }
    Ok(consts)
}

/// Trapezoidal estimate of int_0^{1-eta} xi''(t) E[Phi_xx(t, X_t)] dt.
pub fn alg_energy_estimate(sol: &ParisiSolution, stats: &SdeStats, eta: f64) -> f64 {
    let delta = stats.delta;
    let cutoff = 1.0 - eta;
    let integrand: Vec<f64> = stats
        .mean_phixx
        .iter()
        .enumerate()
        .take_while(|(l, _)| (*l as f64) * delta <= cutoff + 1e-12)
        .map(|(l, &m)| sol.xi.xi_second(l as f64 * delta) * m)
        .collect();
    if integrand.len() < 2 {
        return integrand.first().copied().unwrap_or(0.0) * delta;
    }
    let inner: f64 = integrand[1..integrand.len() - 1].iter().sum();
    delta * (0.5 * integrand[0] + inner + 0.5 * integrand[integrand.len() - 1])
}

fn moment2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parisi::{solve_pde, functional_value, GridConfig, StepFunction};
    use crate::predicate::MixturePolynomial;

    fn zero_mu_solution() -> ParisiSolution {
        let xi = MixturePolynomial::new(vec![0.0, 0.25]).unwrap();
        let mu = StepFunction::zero();
        let cfg = GridConfig::for_mixture(&xi, 0.1);
        let grid = solve_pde(&xi, &mu, &cfg).unwrap();
        let value = functional_value(&grid, &xi, &mu);
        ParisiSolution { mu, grid, functional_value: value, xi, eta: 0.05, warning: false }
    }

    #[test]
    fn pure_diffusion_variance_tracks_xi_prime() {
        let sol = zero_mu_solution();
        let n_paths = 100_000;
        let stats = simulate_sde(&sol, 0.1, n_paths, 77).unwrap();
        for level in 1..=10usize {
            let t = level as f64 * 0.1;
            let expect = sol.xi.xi_prime(t);
            let got = stats.var_x[level];
            // var stderr for a Gaussian: sigma^2 sqrt(2/n)
            let se = expect * (2.0 / n_paths as f64).sqrt();
            assert!(
                (got - expect).abs() <= 3.0 * se + 1e-9,
                "level {level}: var {got} vs {expect}"
            );
        }
        assert_eq!(stats.var_x[0], 0.0);
    }

    #[test]
    fn martingale_increments_centered() {
        let sol = zero_mu_solution();
        let stats = simulate_sde(&sol, 0.1, 50_000, 3).unwrap();
        for (l, (&m, &se)) in stats.incr_mean.iter().zip(&stats.incr_stderr).enumerate() {
            assert!(m.abs() <= 3.0 * se, "level {l}: increment mean {m} stderr {se}");
        }
        for w in stats.mean_phixx.iter().zip(&stats.mean_phixx_sq) {
            assert!(*w.1 >= w.0 * w.0 - 1e-12);
        }
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let sol = zero_mu_solution();
        let a = simulate_sde(&sol, 0.25, 2_000, 5).unwrap();
        let b = simulate_sde(&sol, 0.25, 2_000, 5).unwrap();
        assert_eq!(a.mean_phixx, b.mean_phixx);
        assert_eq!(a.martingale_sq, b.martingale_sq);
        let c = simulate_sde(&sol, 0.25, 2_000, 6).unwrap();
        assert_ne!(a.martingale_sq, c.martingale_sq);
    }

    #[test]
    fn constants_normalize_second_moment() {
        let sol = zero_mu_solution();
        let delta = 0.1;
        let stats = simulate_sde(&sol, delta, 20_000, 9).unwrap();
        let consts = nonlinearity_constants(&sol, &stats, delta, 2).unwrap();
        assert_eq!(consts.len(), 10);
        for (l, &c) in consts.iter().enumerate() {
            assert!(c.is_finite() && c > 0.0);
            let nu = crate::analysis::nu(&sol.xi, delta, l + 1, 2).unwrap();
            // (nu_{l+1}/delta) E[Phi_xx^2] c_l^2 = 1 exactly
            let check = nu / delta * stats.mean_phixx_sq[l] * c * c;
            assert!((check - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_estimate_matches_closed_form_at_zero_mu() {
        // xi = s^2/4, mu = 0: E[Phi_xx(t, X_t)] = 2/sqrt(2 pi (sig^2+v)) with
        // sig^2 + v = 1/2 for all t, so the integrand is constant 1/sqrt(pi)
        // and the integral to 1 - eta is (1-eta)/sqrt(pi).
        let sol = zero_mu_solution();
        let delta = 0.01;
        let stats = simulate_sde(&sol, delta, 100_000, 21).unwrap();
        let eta = 0.05;
        let got = alg_energy_estimate(&sol, &stats, eta);
        let expect = (1.0 - eta) / std::f64::consts::PI.sqrt();
        assert!((got - expect).abs() < 1e-2, "estimate {got} vs {expect}");
    }
}
