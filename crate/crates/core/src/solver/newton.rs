//! Newton iteration for one implicit Euler step.

use serde::{Deserialize, Serialize};

use super::{deinterleave, Discretization, StateField};
use crate::error::{Error, Result};
use crate::estimators::{linearization_indicator, space_indicator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingMode {
    /// Stop once `||du||_{H1} + ||dw||_{L2} < tol`.
    IncrementTolerance,
    /// Stop once the linearization indicator is below `sigma` times the
    /// space indicator of the current iterate.
    EstimatorBalance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub mode: StoppingMode,
    pub tol: f64,
    pub sigma: f64,
    pub max_iterations: usize,
    /// Increments below this level that no longer halve are treated as
    /// converged: the iteration has hit the floating point floor.
    pub stall_floor: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            mode: StoppingMode::IncrementTolerance,
            tol: 1e-14,
            sigma: 0.1,
            max_iterations: 25,
            stall_floor: 1e-10,
        }
    }
}

impl NewtonConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        NewtonConfig {
            mode: StoppingMode::IncrementTolerance,
            tol,
            ..Self::default()
        }
    }

    pub fn with_sigma(sigma: f64) -> Self {
        NewtonConfig {
            mode: StoppingMode::EstimatorBalance,
            sigma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            StoppingMode::IncrementTolerance if !(self.tol > 0.0 && self.tol.is_finite()) => {
                return Err(Error::param("newton.tol", "must be positive"))
            }
            StoppingMode::EstimatorBalance if !(self.sigma > 0.0 && self.sigma.is_finite()) => {
                return Err(Error::param("newton.sigma", "must be positive"))
            }
            _ => {}
        }
        if self.max_iterations == 0 {
            return Err(Error::param("newton.max_iterations", "must be at least 1"));
        }
        if !(self.stall_floor >= 0.0) {
            return Err(Error::param("newton.stall_floor", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Space and linearization indicators of one Newton iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateIndicators {
    pub eta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonHistory {
    /// Number of Newton iterations `K_n` (at least one).
    pub iterations: usize,
    /// `||u_k - u_{k-1}||_{H1} + ||w_k - w_{k-1}||_{L2}` for `k = 1..=K_n`.
    pub increments: Vec<f64>,
    /// Per-iterate indicators; filled in estimator-balance mode only.
    pub indicators: Vec<IterateIndicators>,
    /// Iterate `K_n - 1`.
    pub penultimate: StateField,
    /// All iterates `0..=K_n` when requested.
    pub iterates: Vec<StateField>,
    /// Accepted on the stagnation rule rather than the configured criterion.
    pub stalled: bool,
}

/// Newton correction `(du, dw)` solving `J(iter) d = -F(iter)`.
pub(crate) fn newton_increment(
    disc: &Discretization,
    prev: &StateField,
    iter: &StateField,
    tau: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut rhs, jac) = disc.residual_and_jacobian(prev, iter, tau);
    rhs.iter_mut().for_each(|v| *v = -*v);
    let lu = disc.symbolic(&jac)?.factor(&jac)?;
    let delta = lu.solve_checked(&jac, &rhs)?;
    Ok(deinterleave(&delta))
}

/// One Newton-Galerkin iterate: linearize the step equations at `iter` and
/// solve the coupled `2N x 2N` system.
pub fn newton_step(
    disc: &Discretization,
    prev: &StateField,
    iter: &StateField,
    tau: f64,
) -> Result<StateField> {
    disc.check_state(prev)?;
    disc.check_state(iter)?;
    if !(tau > 0.0) {
        return Err(Error::param("time.tau", "must be positive"));
    }
    let (du, dw) = newton_increment(disc, prev, iter, tau)?;
    Ok(StateField {
        u: iter.u.iter().zip(&du).map(|(a, d)| a + d).collect(),
        w: iter.w.iter().zip(&dw).map(|(a, d)| a + d).collect(),
        time: iter.time,
    })
}

/// Run Newton from `(u_{n-1}, w_{n-1})` until the configured criterion
/// holds. Returns the accepted iterate `K_n` and the iteration history.
pub fn newton_solve(
    disc: &Discretization,
    prev: &StateField,
    tau: f64,
    cfg: &NewtonConfig,
    keep_iterates: bool,
) -> Result<(StateField, NewtonHistory)> {
    cfg.validate()?;
    disc.check_state(prev)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("time.tau", "must be positive"));
    }
    let mut current = StateField {
        u: prev.u.clone(),
        w: prev.w.clone(),
        time: prev.time + tau,
    };
    let mut increments = Vec::new();
    let mut indicators = Vec::new();
    let mut iterates = Vec::new();
    if keep_iterates {
        iterates.push(current.clone());
    }
    for k in 1..=cfg.max_iterations {
        let (du, dw) = newton_increment(disc, prev, &current, tau)?;
        let increment = disc.h1_norm(&du) + disc.l2_norm(&dw);
        if !increment.is_finite() {
            return Err(Error::NewtonDivergence {
                iterations: k,
                increment,
            });
        }
        let next = StateField {
            u: current.u.iter().zip(&du).map(|(a, d)| a + d).collect(),
            w: current.w.iter().zip(&dw).map(|(a, d)| a + d).collect(),
            time: current.time,
        };
        let previous_increment = increments.last().copied();
        increments.push(increment);
        if keep_iterates {
            iterates.push(next.clone());
        }

        let converged = match cfg.mode {
            StoppingMode::IncrementTolerance => increment < cfg.tol,
            StoppingMode::EstimatorBalance => {
                let eta = space_indicator(disc, prev, &current, &next, tau)?.eta;
                let gamma = linearization_indicator(disc, &current, &next)?.gamma;
                indicators.push(IterateIndicators { eta, gamma });
                gamma <= cfg.sigma * eta
            }
        };
        let stalled = !converged
            && increment < cfg.stall_floor
            && previous_increment.is_some_and(|p| increment > 0.5 * p);
        if converged || stalled {
            if stalled {
                log::debug!(
                    "Newton stagnated at increment {increment:e} after {k} iterations; accepting"
                );
            }
            let history = NewtonHistory {
                iterations: k,
                increments,
                indicators,
                penultimate: current,
                iterates,
                stalled,
            };
            return Ok((next, history));
        }
        current = next;
    }
    Err(Error::NewtonDivergence {
        iterations: cfg.max_iterations,
        increment: increments.last().copied().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ionic::{react, AlievPanfilovParams};
    use crate::mesh::unit_square_mesh;
    use std::sync::Arc;

    fn disc(n: usize) -> Discretization {
        Discretization::aliev_panfilov(
            Arc::new(unit_square_mesh(n).unwrap()),
            AlievPanfilovParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_converges_in_one_iteration() {
        let d = disc(4);
        let zero = StateField::zeros(d.num_vertices(), 0.0);
        let (next, hist) = newton_solve(&d, &zero, 0.1, &NewtonConfig::default(), false).unwrap();
        assert_eq!(hist.iterations, 1);
        assert!(next.u.iter().chain(&next.w).all(|v| *v == 0.0));
    }

    #[test]
    fn constant_state_matches_scalar_newton() {
        let d = disc(3);
        let p = AlievPanfilovParams::default();
        let n = d.num_vertices();
        let tau = 0.1;
        let (u0, w0) = (0.4, 0.0);
        let prev = StateField {
            u: vec![u0; n],
            w: vec![w0; n],
            time: 0.0,
        };
        let next = newton_step(&d, &prev, &prev, tau).unwrap();

        // Scalar Newton for (u - u0)/tau + f(u, w) = 0, (w - w0)/tau + g(u, w) = 0 at (u0, w0).
        let r = react(u0, w0, &p);
        let (a11, a12, a21, a22) = (1.0 / tau + r.f_u, r.f_w, r.g_u, 1.0 / tau + r.g_w);
        let det = a11 * a22 - a12 * a21;
        let du = (-r.f * a22 + r.g * a12) / det;
        let dw = (-a11 * r.g + a21 * r.f) / det;
        for i in 0..n {
            assert!(
                (next.u[i] - (u0 + du)).abs() < 1e-12,
                "{} vs {}",
                next.u[i],
                u0 + du
            );
            assert!((next.w[i] - (w0 + dw)).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_point_is_preserved() {
        let d = disc(4);
        let n = d.num_vertices();
        let prev = StateField {
            u: d.mesh()
                .vertices()
                .iter()
                .map(|x| (-((x[0] - 1.0).powi(2) + x[1] * x[1]) / 0.25).exp())
                .collect(),
            w: vec![0.0; n],
            time: 0.0,
        };
        let (accepted, _) =
            newton_solve(&d, &prev, 0.05, &NewtonConfig::with_tolerance(1e-14), false).unwrap();
        let again = newton_step(&d, &prev, &accepted, 0.05).unwrap();
        let diff: Vec<f64> = again
            .u
            .iter()
            .zip(&accepted.u)
            .map(|(a, b)| a - b)
            .collect();
        assert!(d.h1_norm(&diff) < 1e-12);
    }

    #[test]
    fn increments_contract_quadratically() {
        let d = disc(8);
        let prev = StateField {
            u: d.mesh()
                .vertices()
                .iter()
                .map(|x| (-((x[0] - 1.0).powi(2) + x[1] * x[1]) / 0.25).exp())
                .collect(),
            w: vec![0.0; d.num_vertices()],
            time: 0.0,
        };
        let (_, hist) =
            newton_solve(&d, &prev, 0.1, &NewtonConfig::with_tolerance(1e-14), false).unwrap();
        assert!(hist.iterations <= 10);
        for pair in hist.increments.windows(2) {
            if pair[0] < 0.1 && pair[1] > 1e-13 {
                assert!(pair[1] <= 10.0 * pair[0] * pair[0], "{:?}", hist.increments);
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(NewtonConfig {
            tol: 0.0,
            ..NewtonConfig::default()
        }
        .validate()
        .is_err());
        assert!(NewtonConfig {
            max_iterations: 0,
            ..NewtonConfig::default()
        }
        .validate()
        .is_err());
        assert!(NewtonConfig {
            sigma: -1.0,
            ..NewtonConfig::with_sigma(0.1)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn iteration_cap_reports_divergence() {
        let d = disc(4);
        let prev = StateField {
            u: vec![0.5; d.num_vertices()],
            w: vec![0.0; d.num_vertices()],
            time: 0.0,
        };
        let cfg = NewtonConfig {
            max_iterations: 1,
            stall_floor: 0.0,
            ..NewtonConfig::with_tolerance(1e-14)
        };
        assert!(matches!(
            newton_solve(&d, &prev, 0.1, &cfg, false),
            Err(Error::NewtonDivergence { .. })
        ));
    }
}
