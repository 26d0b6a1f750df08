//! Minimization of the Parisi functional over piecewise-constant order
//! parameters on k equispaced pieces of [0, 1 - eta); the trailing
//! [1 - eta, 1) stretch is pinned to zero. Non-monotone values are allowed.

use super::{cole_hopf, correction_exact, GridConfig, StepFunction};
use crate::error::Result;
use crate::predicate::MixturePolynomial;

#[derive(Debug, Clone)]
pub struct MinimizeConfig {
    /// Time cutoff: mu lives on [0, 1 - eta).
    pub eta: f64,
    /// Search box for each piece value.
    pub mu_max: f64,
    /// Coordinate-descent sweep budget.
    pub sweeps: usize,
    /// Stop once a full sweep improves the value by less than this.
    pub tol: f64,
    pub grid: GridConfig,
}

impl MinimizeConfig {
    pub fn for_mixture(xi: &MixturePolynomial) -> MinimizeConfig {
        MinimizeConfig {
            eta: 0.05,
            mu_max: 16.0,
            sweeps: 10,
            tol: 1e-6,
            grid: GridConfig::for_mixture(xi, 0.05),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub mu: StepFunction,
    pub value: f64,
    pub warning: bool,
    pub evaluations: usize,
}

/// Step function with the k optimized pieces plus the pinned zero tail.
fn assemble(values: &[f64], eta: f64) -> StepFunction {
    let k = values.len();
    if k == 0 {
        return StepFunction::zero();
    }
    let width = (1.0 - eta) / k as f64;
    let mut breakpoints: Vec<f64> = (0..k).map(|j| j as f64 * width).collect();
    let mut vals = values.to_vec();
    breakpoints.push(1.0 - eta);
    vals.push(0.0);
    StepFunction::new(breakpoints, vals).expect("valid step function")
}

struct Objective<'a> {
    xi: &'a MixturePolynomial,
    cfg: &'a MinimizeConfig,
    evaluations: usize,
}

impl Objective<'_> {
    fn eval(&mut self, values: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let mu = assemble(values, self.cfg.eta);
        let phi0 = cole_hopf::value_at_origin(self.xi, &mu, &self.cfg.grid)?;
        Ok(phi0 - correction_exact(self.xi, &mu))
    }
}

/// Golden-section line minimum of f over [lo, hi] to the given x tolerance.
/// Returns the best (x, f(x)) probed, which includes both ends.
fn golden_min(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    x_tol: f64,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut best = (lo, f(lo)?);
    let f_hi = f(hi)?;
    if f_hi < best.1 {
        best = (hi, f_hi);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > x_tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        let (x, fx) = if fc < fd { (c, fc) } else { (d, fd) };
        if fx < best.1 {
            best = (x, fx);
        }
    }
    Ok(best)
}

/// Estimates ALG for the mixture: coordinate descent over the k piece
/// values, warm-started from the best constant order parameter (so the
/// estimate is monotone along 0 -> 1 -> k refinements).
pub fn minimize_alg(
    xi: &MixturePolynomial,
    k: usize,
    cfg: &MinimizeConfig,
) -> Result<MinimizeOutcome> {
    let mut obj = Objective { xi, cfg, evaluations: 0 };
    let zero_value = obj.eval(&[])?;
    if k == 0 {
        return Ok(MinimizeOutcome {
            mu: assemble(&[], cfg.eta),
            value: zero_value,
            warning: false,
            evaluations: obj.evaluations,
        });
    }

    let coarse_tol = 1e-3 * cfg.mu_max;
    let fine_tol = 2e-4 * cfg.mu_max;

    // Stage 1: best constant.
    let (const_best, const_value) = {
        let mut line = |v: f64| obj.eval(&[v]);
        golden_min(&mut line, 0.0, cfg.mu_max, fine_tol)?
    };
    let mut values = vec![const_best; k];
    let mut best_value = const_value.min(zero_value);
    if zero_value < const_value {
        values = vec![0.0; k];
    }

    // Stage 2: coordinate descent.
    let mut warning = true;
    for sweep in 0..cfg.sweeps {
        let before = best_value;
        let x_tol = if sweep == 0 { coarse_tol } else { fine_tol };
        for j in 0..k {
            let mut line = |v: f64| {
                let mut trial = values.clone();
                trial[j] = v;
                obj.eval(&trial)
            };
            let (v, fv) = golden_min(&mut line, 0.0, cfg.mu_max, x_tol)?;
            if fv < best_value {
                best_value = fv;
                values[j] = v;
            }
        }
        if before - best_value < cfg.tol {
            warning = false;
            break;
        }
    }

    Ok(MinimizeOutcome {
        mu: assemble(&values, cfg.eta),
        value: best_value,
        warning,
        evaluations: obj.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_zero_is_zero_mu() {
        let xi = MixturePolynomial::new(vec![0.0, 0.25]).unwrap();
        let cfg = MinimizeConfig::for_mixture(&xi);
        let out = minimize_alg(&xi, 0, &cfg).unwrap();
        assert_eq!(out.mu.values(), &[0.0]);
        // Phi(0,0) for the zero order parameter: sqrt(1/pi)
        assert!((out.value - (1.0 / std::f64::consts::PI).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn nested_refinements_never_worsen() {
        let xi = MixturePolynomial::new(vec![0.0, 0.25]).unwrap();
        let mut cfg = MinimizeConfig::for_mixture(&xi);
        cfg.sweeps = 4;
        let mut prev = f64::INFINITY;
        for k in [0usize, 1, 2, 4] {
            let out = minimize_alg(&xi, k, &cfg).unwrap();
            assert!(
                out.value <= prev + 1e-9,
                "k={k}: {} after {prev}",
                out.value
            );
            prev = out.value;
        }
    }
}
