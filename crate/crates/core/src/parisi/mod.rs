//! Parisi PDE machinery: the order parameter, the gridded solution of the
//! backward semilinear equation, the functional and its minimization, and
//! the discretized diffusion that calibrates the engine's nonlinearities.

mod cache;
mod cole_hopf;
mod finite_diff;
mod minimize;
mod sde;

pub use cache::{cache_key, load_solution, save_solution, solve_or_load};
pub use cole_hopf::{abs_gaussian_mean, solve_pde, value_at_origin};
pub use finite_diff::solve_pde_fd;
pub use minimize::{minimize_alg, MinimizeConfig, MinimizeOutcome};
pub use sde::{alg_energy_estimate, nonlinearity_constants, simulate_sde, SdeStats};

use crate::error::{Error, Result};
use crate::predicate::MixturePolynomial;
use serde::{Deserialize, Serialize};

/// Right-continuous piecewise-constant function on [0,1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    /// `breakpoints[0]` must be 0; breakpoints strictly increase within
    /// [0,1); `values[i]` holds on `[breakpoints[i], breakpoints[i+1])`.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<StepFunction> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::BadParameter("step function arity mismatch".into()));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::BadParameter("first breakpoint must be 0".into()));
        }
        for w in breakpoints.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::BadParameter("breakpoints must strictly increase".into()));
            }
        }
        if *breakpoints.last().unwrap() >= 1.0 {
            return Err(Error::BadParameter("breakpoints must lie in [0,1)".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::BadParameter("step values must be non-negative".into()));
        }
        Ok(StepFunction { breakpoints, values })
    }

    pub fn zero() -> StepFunction {
        StepFunction { breakpoints: vec![0.0], values: vec![0.0] }
    }

    pub fn constant(v: f64) -> StepFunction {
        StepFunction { breakpoints: vec![0.0], values: vec![v] }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return self.values[0];
        }
        match self.breakpoints.partition_point(|&b| b <= t) {
            0 => self.values[0],
            idx => self.values[idx - 1],
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Constant intervals as (lo, hi, value), covering [0, 1].
    pub fn intervals(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.values.len());
        for i in 0..self.values.len() {
            let hi = if i + 1 < self.breakpoints.len() { self.breakpoints[i + 1] } else { 1.0 };
            out.push((self.breakpoints[i], hi, self.values[i]));
        }
        out
    }
}

/// Uniform space-time grid discretization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub dt: f64,
    pub dx: f64,
    pub x_max: f64,
}

impl GridConfig {
    /// Defaults keyed to the mixture scale and the engine timestep:
    /// x_max = 6 sqrt(xi'(1)), dx = x_max/2000, dt = min(delta/4, 1e-3)
    /// rounded so that dt divides delta.
    pub fn for_mixture(xi: &MixturePolynomial, delta: f64) -> GridConfig {
        let x_max = 6.0 * xi.xi_prime(1.0).sqrt();
        let steps_per_delta = (delta / 1e-3_f64).ceil().max(4.0);
        GridConfig {
            dt: delta / steps_per_delta,
            dx: x_max / 2000.0,
            x_max,
        }
    }

    pub fn validate(&self, xi: &MixturePolynomial) -> Result<()> {
        if !(self.dt > 0.0) || !(self.dx > 0.0) {
            return Err(Error::BadGrid("dt and dx must be positive".into()));
        }
        let floor = 4.0 * xi.xi_prime(1.0).sqrt();
        if self.x_max < floor {
            return Err(Error::BadGrid(format!(
                "x_max {} below 4 sqrt(xi'(1)) = {floor}",
                self.x_max
            )));
        }
        Ok(())
    }

    pub(crate) fn n_t_steps(&self) -> usize {
        (1.0 / self.dt).round().max(1.0) as usize
    }

    pub(crate) fn n_x_half(&self) -> usize {
        (self.x_max / self.dx).round().max(1.0) as usize
    }
}

/// Solution of the backward PDE on a uniform grid, with first and second
/// x-derivatives precomputed for interpolation.
#[derive(Debug, Clone)]
pub struct PdeGrid {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
    pub x_max: f64,
    /// phi may be empty on cache-loaded grids; phi_x/phi_xx are always set.
    pub phi: Vec<f64>,
    pub phi_x: Vec<f64>,
    pub phi_xx: Vec<f64>,
}

impl PdeGrid {
    #[inline]
    pub fn idx(&self, j: usize, i: usize) -> usize {
        j * self.nx + i
    }

    pub fn t_of(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn x_of(&self, i: usize) -> f64 {
        -self.x_max + i as f64 * self.dx
    }

    pub fn center(&self) -> usize {
        (self.nx - 1) / 2
    }

    pub fn has_phi(&self) -> bool {
        !self.phi.is_empty()
    }

    pub fn phi_origin(&self) -> f64 {
        self.phi[self.center()]
    }

    /// Bilinear interpolation of phi_x; x outside the table clamps to the
    /// boundary column, t clamps to [0,1].
    #[inline]
    pub fn sample_phi_x(&self, t: f64, x: f64) -> f64 {
        self.sample(&self.phi_x, t, x)
    }

    #[inline]
    pub fn sample_phi_xx(&self, t: f64, x: f64) -> f64 {
        self.sample(&self.phi_xx, t, x)
    }

    #[inline]
    fn sample(&self, table: &[f64], t: f64, x: f64) -> f64 {
        let tj = (t / self.dt).clamp(0.0, (self.nt - 1) as f64);
        let j0 = (tj as usize).min(self.nt - 2);
        let ft = tj - j0 as f64;
        let xi = ((x + self.x_max) / self.dx).clamp(0.0, (self.nx - 1) as f64);
        let i0 = (xi as usize).min(self.nx - 2);
        let fx = xi - i0 as f64;
        let a = table[j0 * self.nx + i0];
        let b = table[j0 * self.nx + i0 + 1];
        let c = table[(j0 + 1) * self.nx + i0];
        let d = table[(j0 + 1) * self.nx + i0 + 1];
        a * (1.0 - ft) * (1.0 - fx) + b * (1.0 - ft) * fx + c * ft * (1.0 - fx) + d * ft * fx
    }

    /// Central differences in x for every stored slice, with boundary
    /// columns closed by the |x| + c asymptote.
    pub(crate) fn fill_derivatives(&mut self) {
        let (nt, nx, dx) = (self.nt, self.nx, self.dx);
        self.phi_x = vec![0.0; nt * nx];
        self.phi_xx = vec![0.0; nt * nx];
        for j in 0..nt {
            let row = &self.phi[j * nx..(j + 1) * nx];
            let c = row[nx - 1] - self.x_max;
            let ghost = self.x_max + dx + c;
            let px = &mut self.phi_x[j * nx..(j + 1) * nx];
            let pxx = &mut self.phi_xx[j * nx..(j + 1) * nx];
            for i in 1..nx - 1 {
                px[i] = (row[i + 1] - row[i - 1]) / (2.0 * dx);
                pxx[i] = (row[i + 1] - 2.0 * row[i] + row[i - 1]) / (dx * dx);
            }
            px[0] = (row[1] - ghost) / (2.0 * dx);
            pxx[0] = (row[1] - 2.0 * row[0] + ghost) / (dx * dx);
            px[nx - 1] = (ghost - row[nx - 2]) / (2.0 * dx);
            pxx[nx - 1] = (ghost - 2.0 * row[nx - 1] + row[nx - 2]) / (dx * dx);
        }
    }
}

/// Order parameter, solved grid and functional value for one mixture.
#[derive(Debug, Clone)]
pub struct ParisiSolution {
    pub mu: StepFunction,
    pub grid: PdeGrid,
    pub functional_value: f64,
    pub xi: MixturePolynomial,
    pub eta: f64,
    pub warning: bool,
}

/// P_xi(mu) = Phi(0,0) - 1/2 int_0^1 xi''(t) t mu(t) dt, the correction
/// integral taken as a trapezoid of xi''(t) t within each grid cell
/// weighted by the cell's (constant) mu value.
pub fn functional_value(grid: &PdeGrid, xi: &MixturePolynomial, mu: &StepFunction) -> f64 {
    let mut correction = 0.0;
    for j in 0..grid.nt - 1 {
        let t0 = grid.t_of(j);
        let t1 = grid.t_of(j + 1);
        let g0 = xi.xi_second(t0) * t0;
        let g1 = xi.xi_second(t1) * t1;
        correction += mu.eval(t0) * 0.5 * (g0 + g1) * (t1 - t0);
    }
    grid.phi_origin() - 0.5 * correction
}

/// Exact correction integral for piecewise-constant mu (used by the
/// minimizer's fast path; the grid route above is the reported one).
pub(crate) fn correction_exact(xi: &MixturePolynomial, mu: &StepFunction) -> f64 {
    let mut acc = 0.0;
    for (lo, hi, v) in mu.intervals() {
        acc += v * (xi.correction_antiderivative(hi) - xi.correction_antiderivative(lo));
    }
    0.5 * acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function_eval_right_continuous() {
        let f = StepFunction::new(vec![0.0, 0.25, 0.5], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.eval(0.0), 1.0);
        assert_eq!(f.eval(0.2499), 1.0);
        assert_eq!(f.eval(0.25), 2.0);
        assert_eq!(f.eval(0.5), 3.0);
        assert_eq!(f.eval(0.99), 3.0);
        assert_eq!(
            f.intervals(),
            vec![(0.0, 0.25, 1.0), (0.25, 0.5, 2.0), (0.5, 1.0, 3.0)]
        );
    }

    #[test]
    fn step_function_rejects_bad_shapes() {
        assert!(StepFunction::new(vec![0.1], vec![1.0]).is_err());
        assert!(StepFunction::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(StepFunction::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(StepFunction::new(vec![0.0], vec![-1.0]).is_err());
    }
}
