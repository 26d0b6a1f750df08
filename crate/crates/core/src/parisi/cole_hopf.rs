//! Cole-Hopf solver for the backward equation
//! `Phi_t = -(xi''/2) (Phi_xx + mu Phi_x^2)`, terminal `Phi(1,x) = |x|`.
//!
//! On an interval where mu = m > 0 is constant, `Psi = exp(m Phi)` solves
//! the backward heat equation with diffusivity xi''(t)/2, so advancing from
//! t_b down to t is one Gaussian convolution with variance
//! xi'(t_b) - xi'(t). For m = 0 the equation is linear and Phi convolves
//! directly. Outside the grid both representations are closed by the
//! asymptote Phi ~ |x| + c, whose Gaussian integrals have exact erf forms.

use super::{GridConfig, PdeGrid, StepFunction};
use crate::error::{Error, Result};
use crate::predicate::MixturePolynomial;
use rayon::prelude::*;
use statrs::function::erf::{erf, erfc};

const MU_EPS: f64 = 1e-8;
/// Accumulated standard deviation (in cells) before the walking anchor is
/// re-based. Each emission carries an O(dx^2 / sigma) boundary-quadrature
/// bias; keeping anchors sparse keeps that bias from compounding across
/// the time grid.
const ANCHOR_SPAN_RATIO: f64 = 40.0;

#[derive(Clone, Copy)]
enum Tail {
    /// f(v) ~ |v| + c beyond the grid.
    Linear { c: f64 },
    /// f(v) ~ exp(m (|v| + c)) beyond the grid.
    Exp { m: f64, c: f64 },
}

#[inline]
fn phi_std(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper Gaussian tail Q(z) = P(N(0,1) > z).
#[inline]
fn q_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// E|x + G| for G ~ N(0, sigma2); the exact solution of the mu = 0 PDE.
pub fn abs_gaussian_mean(x: f64, sigma2: f64) -> f64 {
    if sigma2 <= 0.0 {
        return x.abs();
    }
    let sigma = sigma2.sqrt();
    sigma * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * x * x / sigma2).exp()
        + x * erf(x / (sigma * std::f64::consts::SQRT_2))
}

/// Gaussian kernel weights at spacing dx: exact cell masses
/// integral_{(k-1/2)dx}^{(k+1/2)dx} phi_sigma. Together with the analytic
/// tails from the half-cell boundary this treats the input as piecewise
/// constant on cells, so the output is smooth in x (no cell-quantization
/// sawtooth in the second differences) and stays valid for any sigma.
fn kernel(sigma: f64, dx: f64, max_half: usize) -> Vec<f64> {
    let half = ((8.0 * sigma / dx).ceil() as usize).clamp(1, max_half);
    let mut w = vec![0.0; 2 * half + 1];
    let s = sigma * std::f64::consts::SQRT_2;
    for k in 0..=half {
        let hi = erf(((k as f64 + 0.5) * dx) / s);
        let lo = erf(((k as f64 - 0.5) * dx) / s);
        let v = 0.5 * (hi - lo);
        w[half + k] = v;
        w[half - k] = v;
    }
    w
}

/// One backward heat step: convolve `input` with a centered Gaussian of
/// variance sigma2, closing the ends with the analytic tail model.
fn convolve(input: &[f64], sigma2: f64, dx: f64, x_max: f64, tail: Tail) -> Vec<f64> {
    let nx = input.len();
    if sigma2 <= 0.0 {
        return input.to_vec();
    }
    let sigma = sigma2.sqrt();
    let w = kernel(sigma, dx, nx - 1);
    let half = (w.len() - 1) / 2;
    // grid samples represent cells of width dx; the analytic tails take over
    // half a cell beyond the outermost samples
    let edge = x_max + 0.5 * dx;
    let mut out = vec![0.0; nx];
    out.par_chunks_mut(512).enumerate().for_each(|(chunk, slot)| {
        for (off, o) in slot.iter_mut().enumerate() {
            let i = chunk * 512 + off;
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(nx - 1);
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += w[half + i - j] * input[j];
            }
            let x = -x_max + i as f64 * dx;
            let a_r = (edge - x) / sigma;
            let a_l = (edge + x) / sigma;
            acc += match tail {
                Tail::Linear { c } => {
                    (x + c) * q_tail(a_r) + sigma * phi_std(a_r)
                        + (c - x) * q_tail(a_l)
                        + sigma * phi_std(a_l)
                }
                Tail::Exp { m, c } => {
                    let boost = 0.5 * m * m * sigma2;
                    (m * (x + c) + boost).exp() * q_tail(a_r - m * sigma)
                        + (m * (c - x) + boost).exp() * q_tail(a_l - m * sigma)
                }
            };
            *o = acc;
        }
    });
    out
}

fn tail_for(m: f64, slice: &[f64], x_max: f64) -> Tail {
    let last = slice[slice.len() - 1];
    // Phi >= |x| pointwise (Jensen at mu = 0, and the drift term only
    // raises it), so the asymptote offset is never negative; clamping stops
    // boundary quadrature error from feeding back through the tails.
    if m > MU_EPS {
        Tail::Exp { m, c: (last.ln() / m - x_max).max(0.0) }
    } else {
        Tail::Linear { c: (last - x_max).max(0.0) }
    }
}

struct Geometry {
    n_steps: usize,
    nt: usize,
    nx: usize,
    dt: f64,
    dx: f64,
    half: usize,
}

fn geometry(cfg: &GridConfig) -> Geometry {
    let n_steps = cfg.n_t_steps();
    let half = cfg.n_x_half();
    Geometry {
        n_steps,
        nt: n_steps + 1,
        nx: 2 * half + 1,
        dt: 1.0 / n_steps as f64,
        dx: cfg.x_max / half as f64,
        half,
    }
}

fn terminal_slice(geo: &Geometry, x_max: f64) -> Vec<f64> {
    (0..geo.nx)
        .map(|i| (-x_max + i as f64 * geo.dx).abs())
        .collect()
}

/// Full backward solve on the configured grid. mu is read per time cell
/// (right-continuous), so breakpoints are effectively snapped to the grid.
pub fn solve_pde(xi: &MixturePolynomial, mu: &StepFunction, cfg: &GridConfig) -> Result<PdeGrid> {
    cfg.validate(xi)?;
    let geo = geometry(cfg);
    let x_max = cfg.x_max;
    let mut phi = vec![0.0; geo.nt * geo.nx];
    phi[(geo.nt - 1) * geo.nx..].copy_from_slice(&terminal_slice(&geo, x_max));

    let mu_cell: Vec<f64> = (0..geo.n_steps).map(|j| mu.eval(j as f64 * geo.dt)).collect();
    let reanchor_var = (ANCHOR_SPAN_RATIO * geo.dx).powi(2);

    // Anchor slice in the active representation (Psi when m > 0), plus the
    // variance accumulated since it was set.
    let mut anchor_m = mu_cell[geo.n_steps - 1];
    let mut anchor: Vec<f64> = if anchor_m > MU_EPS {
        phi[(geo.nt - 1) * geo.nx..].iter().map(|&p| (anchor_m * p).exp()).collect()
    } else {
        phi[(geo.nt - 1) * geo.nx..].to_vec()
    };
    let mut pending = 0.0;

    for j in (0..geo.n_steps).rev() {
        let m_j = mu_cell[j];
        if m_j != anchor_m {
            let prev = &phi[(j + 1) * geo.nx..(j + 2) * geo.nx];
            anchor = if m_j > MU_EPS {
                prev.iter().map(|&p| (m_j * p).exp()).collect()
            } else {
                prev.to_vec()
            };
            anchor_m = m_j;
            pending = 0.0;
        }
        let t0 = j as f64 * geo.dt;
        let t1 = (j + 1) as f64 * geo.dt;
        pending += xi.xi_prime(t1) - xi.xi_prime(t0);
        let out = convolve(&anchor, pending, geo.dx, x_max, tail_for(anchor_m, &anchor, x_max));
        let dst = &mut phi[j * geo.nx..(j + 1) * geo.nx];
        if anchor_m > MU_EPS {
            for (d, v) in dst.iter_mut().zip(out.iter()) {
                *d = v.ln() / anchor_m;
            }
        } else {
            dst.copy_from_slice(&out);
        }
        if pending >= reanchor_var {
            anchor = out;
            pending = 0.0;
        }
    }

    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PDE solution".into()));
    }
    let mut grid = PdeGrid {
        nt: geo.nt,
        nx: geo.nx,
        dt: geo.dt,
        dx: geo.dx,
        x_max,
        phi,
        phi_x: Vec::new(),
        phi_xx: Vec::new(),
    };
    grid.fill_derivatives();
    let _ = geo.half;
    Ok(grid)
}

/// Phi(0,0) only, jumping whole constant-mu intervals (exact breakpoints,
/// one convolution each). This is what the minimizer iterates on.
pub fn value_at_origin(xi: &MixturePolynomial, mu: &StepFunction, cfg: &GridConfig) -> Result<f64> {
    cfg.validate(xi)?;
    let geo = geometry(cfg);
    let x_max = cfg.x_max;
    let mut slice = terminal_slice(&geo, x_max);
    for &(lo, hi, m) in mu.intervals().iter().rev() {
        let s2 = xi.xi_prime(hi) - xi.xi_prime(lo);
        if s2 <= 0.0 {
            continue;
        }
        if m > MU_EPS {
            let mut psi: Vec<f64> = slice.iter().map(|&p| (m * p).exp()).collect();
            psi = convolve(&psi, s2, geo.dx, x_max, tail_for(m, &psi, x_max));
            for (s, v) in slice.iter_mut().zip(psi.iter()) {
                *s = v.ln() / m;
            }
        } else {
            slice = convolve(&slice, s2, geo.dx, x_max, tail_for(0.0, &slice, x_max));
        }
    }
    let v = slice[geo.nx / 2];
    if !v.is_finite() {
        return Err(Error::NonFinite("Phi(0,0)".into()));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parisi::functional_value;

    fn quarter_square() -> MixturePolynomial {
        // xi(s) = s^2/4
        MixturePolynomial::new(vec![0.0, 0.25]).unwrap()
    }

    #[test]
    fn matches_heat_kernel_closed_form() {
        let xi = quarter_square();
        let cfg = GridConfig::for_mixture(&xi, 0.1);
        let grid = solve_pde(&xi, &StepFunction::zero(), &cfg).unwrap();
        let mut worst = 0.0f64;
        for j in 0..grid.nt {
            let s2 = xi.xi_prime(1.0) - xi.xi_prime(grid.t_of(j));
            for i in 0..grid.nx {
                let err = (grid.phi[grid.idx(j, i)] - abs_gaussian_mean(grid.x_of(i), s2)).abs();
                worst = worst.max(err);
            }
        }
        assert!(worst <= 1e-3, "max deviation {worst}");
        let expect = (1.0 / std::f64::consts::PI).sqrt();
        assert!((grid.phi_origin() - expect).abs() <= 1e-3);
        // fast path agrees with the stored grid
        let quick = value_at_origin(&xi, &StepFunction::zero(), &cfg).unwrap();
        assert!((quick - expect).abs() <= 1e-3);
    }

    #[test]
    fn terminal_slice_is_exact() {
        let xi = quarter_square();
        let cfg = GridConfig::for_mixture(&xi, 0.25);
        let mu = StepFunction::new(vec![0.0, 0.4], vec![1.0, 0.5]).unwrap();
        let grid = solve_pde(&xi, &mu, &cfg).unwrap();
        for i in 0..grid.nx {
            assert_eq!(grid.phi[grid.idx(grid.nt - 1, i)], grid.x_of(i).abs());
        }
    }

    #[test]
    fn boundary_behaves_like_asymptote() {
        let xi = quarter_square();
        let cfg = GridConfig::for_mixture(&xi, 0.1);
        let grid = solve_pde(&xi, &StepFunction::zero(), &cfg).unwrap();
        // Phi - |x| decays to zero monotonically in |x| on each slice,
        // up to the boundary quadrature floor.
        for j in (0..grid.nt).step_by(100) {
            let mut prev = f64::INFINITY;
            for i in grid.center()..grid.nx {
                let gap = grid.phi[grid.idx(j, i)] - grid.x_of(i).abs();
                assert!(gap >= -1e-5, "phi below |x| at {j},{i}");
                assert!(gap <= prev + 1e-5);
                prev = gap;
            }
        }
        assert!(grid.sample_phi_x(0.0, grid.x_max).abs() >= 0.999);
        assert!(grid.sample_phi_x(0.0, -grid.x_max) <= -0.999);
    }

    #[test]
    fn derivative_bounds_hold() {
        let xi = quarter_square();
        let cfg = GridConfig::for_mixture(&xi, 0.1);
        let mu = StepFunction::new(vec![0.0, 0.3, 0.6], vec![0.5, 1.5, 2.5]).unwrap();
        let grid = solve_pde(&xi, &mu, &cfg).unwrap();
        let slack = 5.0 * grid.dx;
        for (i, (&px, &pxx)) in grid.phi_x.iter().zip(grid.phi_xx.iter()).enumerate() {
            assert!(px.abs() <= 1.0 + slack, "phi_x {px} at {i}");
            assert!(pxx >= -slack, "phi_xx {pxx} at {i}");
        }
        // Uniform derivative bound away from the terminal time.
        let eta = 0.05;
        let j_max = ((1.0 - eta) / grid.dt) as usize;
        let tail_var = xi.xi_prime(1.0) - xi.xi_prime(1.0 - eta);
        let cap = 3.0 / tail_var.sqrt();
        for j in 0..=j_max {
            for i in 0..grid.nx {
                assert!(grid.phi_xx[grid.idx(j, i)] <= cap);
            }
        }
    }

    #[test]
    fn scaling_covariance() {
        // value(c^2 xi, mu/c) = c * value(xi, mu)
        let xi = MixturePolynomial::new(vec![0.0, 0.5]).unwrap();
        let mu = StepFunction::new(vec![0.0, 0.45], vec![0.8, 1.7]).unwrap();
        for c in [0.5f64, 2.0] {
            let xi_c = xi.scaled(c * c);
            let mu_c = StepFunction::new(
                mu.breakpoints().to_vec(),
                mu.values().iter().map(|v| v / c).collect(),
            )
            .unwrap();
            let cfg = GridConfig::for_mixture(&xi, 0.1);
            let cfg_c = GridConfig::for_mixture(&xi_c, 0.1);
            let base = solve_pde(&xi, &mu, &cfg).unwrap();
            let scaled = solve_pde(&xi_c, &mu_c, &cfg_c).unwrap();
            let v0 = functional_value(&base, &xi, &mu);
            let v1 = functional_value(&scaled, &xi_c, &mu_c);
            assert!((v1 - c * v0).abs() < 1e-3, "c={c}: {v1} vs {}", c * v0);
        }
    }

    #[test]
    fn functional_value_zero_mu_is_phi_origin() {
        let xi = quarter_square();
        let cfg = GridConfig::for_mixture(&xi, 0.25);
        let grid = solve_pde(&xi, &StepFunction::zero(), &cfg).unwrap();
        let v = functional_value(&grid, &xi, &StepFunction::zero());
        assert_eq!(v, grid.phi_origin());
        assert!((v - 0.5642).abs() < 1e-3);
    }
}
