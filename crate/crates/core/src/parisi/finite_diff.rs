//! Semi-implicit finite-difference backend for the same backward equation:
//! diffusion treated implicitly (tridiagonal solve per step), the
//! mu Phi_x^2 source explicitly from the previous slice. Serves as the
//! independent discretization cross-checking the Cole-Hopf route.

use super::{GridConfig, PdeGrid, StepFunction};
use crate::error::{Error, Result};
use crate::predicate::MixturePolynomial;

pub fn solve_pde_fd(
    xi: &MixturePolynomial,
    mu: &StepFunction,
    cfg: &GridConfig,
) -> Result<PdeGrid> {
    cfg.validate(xi)?;
    let n_steps = cfg.n_t_steps();
    let nt = n_steps + 1;
    let dt = 1.0 / n_steps as f64;
    let half = cfg.n_x_half();
    let nx = 2 * half + 1;
    let dx = cfg.x_max / half as f64;
    let x_max = cfg.x_max;

    let mut phi = vec![0.0; nt * nx];
    for i in 0..nx {
        phi[(nt - 1) * nx + i] = (-x_max + i as f64 * dx).abs();
    }

    let mut diag = vec![0.0; nx];
    let mut upper = vec![0.0; nx];
    let mut lower = vec![0.0; nx];
    let mut rhs = vec![0.0; nx];
    let mut scratch = vec![0.0; nx];

    for j in (0..n_steps).rev() {
        let t0 = j as f64 * dt;
        let a = 0.5 * dt * xi.xi_second(t0 + 0.5 * dt);
        let m = mu.eval(t0);
        let lam = a / (dx * dx);
        let prev_off = (j + 1) * nx;

        for i in 0..nx {
            // explicit source from the previous slice, ghosts from the
            // |x| + c asymptote (slope +-1)
            let left = if i == 0 { phi[prev_off] + dx } else { phi[prev_off + i - 1] };
            let right = if i == nx - 1 { phi[prev_off + nx - 1] + dx } else { phi[prev_off + i + 1] };
            let d1 = (right - left) / (2.0 * dx);
            rhs[i] = phi[prev_off + i] + a * m * d1 * d1;
            diag[i] = 1.0 + 2.0 * lam;
            upper[i] = -lam;
            lower[i] = -lam;
        }
        // fold the ghost constants of the implicit operator into the rhs:
        // phi(-x_max - dx) = phi(-x_max) + dx, likewise on the right
        diag[0] = 1.0 + lam;
        rhs[0] += lam * dx;
        diag[nx - 1] = 1.0 + lam;
        rhs[nx - 1] += lam * dx;

        thomas(&lower, &mut diag, &upper, &mut rhs, &mut scratch);
        phi[j * nx..(j + 1) * nx].copy_from_slice(&rhs);
    }

    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("FD solution".into()));
    }
    let mut grid = PdeGrid {
        nt,
        nx,
        dt,
        dx,
        x_max,
        phi,
        phi_x: Vec::new(),
        phi_xx: Vec::new(),
    };
    grid.fill_derivatives();
    Ok(grid)
}

/// Tridiagonal solve; diag and rhs are clobbered, the solution lands in rhs.
fn thomas(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    scratch[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parisi::cole_hopf::abs_gaussian_mean;

    #[test]
    fn fd_matches_closed_form_at_zero_mu() {
        let xi = MixturePolynomial::new(vec![0.0, 0.25]).unwrap();
        let cfg = GridConfig::for_mixture(&xi, 0.1);
        let grid = solve_pde_fd(&xi, &StepFunction::zero(), &cfg).unwrap();
        let expect = (1.0 / std::f64::consts::PI).sqrt();
        assert!(
            (grid.phi_origin() - expect).abs() < 1e-3,
            "phi(0,0) = {}",
            grid.phi_origin()
        );
        let s2 = xi.xi_prime(1.0) - xi.xi_prime(0.5);
        let j = grid.nt / 2;
        for i in (0..grid.nx).step_by(97) {
            let err = (grid.phi[grid.idx(j, i)] - abs_gaussian_mean(grid.x_of(i), s2)).abs();
            assert!(err < 2e-3, "error {err} at x={}", grid.x_of(i));
        }
    }

    #[test]
    fn first_order_refinement() {
        // Halving (dt, dx) shifts Phi(0,0) by at most 4x the next halving.
        let xi = MixturePolynomial::new(vec![0.0, 0.5]).unwrap();
        let mu = StepFunction::new(vec![0.0, 0.5], vec![0.5, 1.5]).unwrap();
        let mut values = Vec::new();
        for lvl in 0..3 {
            let scale = 1 << lvl;
            let cfg = GridConfig {
                dt: 4e-3 / scale as f64,
                dx: 6.0 / 500.0 / scale as f64,
                x_max: 6.0,
            };
            values.push(solve_pde_fd(&xi, &mu, &cfg).unwrap().phi_origin());
        }
        let change1 = (values[0] - values[1]).abs();
        let change2 = (values[1] - values[2]).abs();
        assert!(change1 <= 4.0 * change2 + 1e-12, "{change1} vs {change2}");
    }
}
