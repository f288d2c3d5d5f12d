//! Implicit Euler time march.

use std::sync::Arc;

use super::newton::{newton_solve, IterateIndicators, NewtonConfig};
use super::{Discretization, StateField};
use crate::assembly::{l2_distance_sq, l2_project};
use crate::error::{Error, Result};
use crate::ionic::initial_data;
use crate::mesh::TriMesh;

/// Newton bookkeeping of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub iterations: usize,
    pub increments: Vec<f64>,
    pub indicators: Vec<IterateIndicators>,
    pub stalled: bool,
    /// Iterate `K_n - 1`, kept when [`MarchOptions::keep_penultimate`] is set.
    pub penultimate: Option<StateField>,
}

/// Accepted states `(u^n, w^n)` on a uniform time grid, together with what
/// the estimators need afterwards.
#[derive(Debug, Clone)]
pub struct TrajectorySolution {
    pub mesh: Arc<TriMesh>,
    /// `t_0 = 0 < t_1 < ... < t_N`.
    pub times: Vec<f64>,
    /// `N + 1` states, the first being the projected initial data.
    pub states: Vec<StateField>,
    /// `N` step records.
    pub steps: Vec<StepRecord>,
    /// `(||u_0 - P u_0||^2, ||w_0 - P w_0||^2)` for the L2 projection `P`.
    pub initial_terms: (f64, f64),
}

impl TrajectorySolution {
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn tau(&self, n: usize) -> f64 {
        self.times[n] - self.times[n - 1]
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("at least the initial state")
    }

    pub fn iteration_counts(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.iterations).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MarchOptions {
    /// Store iterate `K_n - 1` of every step (needed for the full indicators).
    pub keep_penultimate: bool,
}

/// Number of uniform steps of size `tau` covering `[0, t_end]`.
pub fn step_count(tau: f64, t_end: f64) -> Result<usize> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("time.tau", "must be positive"));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::param("time.t_end", "must be positive"));
    }
    let steps = (t_end / tau).round();
    if steps < 1.0 || (steps * tau - t_end).abs() > 1e-9 * t_end {
        return Err(Error::param(
            "time.tau",
            format!("{tau} does not divide t_end = {t_end}"),
        ));
    }
    Ok(steps as usize)
}

/// March from the L2 projection of the initial data to `t_end`.
pub fn time_march(
    disc: &Discretization,
    tau: f64,
    t_end: f64,
    cfg: &NewtonConfig,
    opts: &MarchOptions,
) -> Result<TrajectorySolution> {
    let mesh = disc.mesh();
    let u0 = l2_project(mesh, |x| initial_data(x).0)?;
    let w0 = l2_project(mesh, |x| initial_data(x).1)?;
    let initial_terms = (
        l2_distance_sq(mesh, |x| initial_data(x).0, &u0),
        l2_distance_sq(mesh, |x| initial_data(x).1, &w0),
    );
    let initial = StateField {
        u: u0,
        w: w0,
        time: 0.0,
    };
    let mut traj = time_march_from(disc, initial, tau, step_count(tau, t_end)?, cfg, opts)?;
    traj.initial_terms = initial_terms;
    Ok(traj)
}

/// March `steps` uniform steps of size `tau` from an arbitrary discrete
/// initial state. The initial projection terms are reported as zero.
pub fn time_march_from(
    disc: &Discretization,
    initial: StateField,
    tau: f64,
    steps: usize,
    cfg: &NewtonConfig,
    opts: &MarchOptions,
) -> Result<TrajectorySolution> {
    cfg.validate()?;
    disc.check_state(&initial)?;
    let t0 = initial.time;
    let t_end = t0 + tau * steps as f64;
    let times: Vec<f64> = (0..=steps)
        .map(|n| t0 + (n as f64 * (t_end - t0)) / steps.max(1) as f64)
        .collect();
    let mut states = Vec::with_capacity(steps + 1);
    let mut records = Vec::with_capacity(steps);
    states.push(initial);
    for n in 1..=steps {
        let prev = states.last().expect("initial state present");
        let step_tau = times[n] - times[n - 1];
        let (mut next, hist) =
            newton_solve(disc, prev, step_tau, cfg, false).map_err(|e| Error::TimeStep {
                step: n,
                source: Box::new(e),
            })?;
        next.time = times[n];
        log::debug!(
            "step {n}/{steps} t = {:.6} K_n = {}",
            times[n],
            hist.iterations
        );
        records.push(StepRecord {
            iterations: hist.iterations,
            increments: hist.increments,
            indicators: hist.indicators,
            stalled: hist.stalled,
            penultimate: opts.keep_penultimate.then_some(hist.penultimate),
        });
        states.push(next);
    }
    Ok(TrajectorySolution {
        mesh: Arc::clone(disc.mesh()),
        times,
        states,
        steps: records,
        initial_terms: (0.0, 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::ConductivityTensor;
    use crate::ionic::{AlievPanfilovParams, Reaction};
    use crate::mesh::unit_square_mesh;

    fn mesh(n: usize) -> Arc<TriMesh> {
        Arc::new(unit_square_mesh(n).unwrap())
    }

    #[test]
    fn step_count_checks_divisibility() {
        assert_eq!(step_count(0.1, 2.0).unwrap(), 20);
        assert_eq!(step_count(0.025, 16.0).unwrap(), 640);
        assert_eq!(step_count(2.0, 2.0).unwrap(), 1);
        assert!(step_count(0.3, 2.0).is_err());
        assert!(step_count(0.0, 2.0).is_err());
    }

    #[test]
    fn single_step_schedule() {
        let d = Discretization::aliev_panfilov(mesh(4), AlievPanfilovParams::default()).unwrap();
        let traj = time_march(
            &d,
            0.5,
            0.5,
            &NewtonConfig::default(),
            &MarchOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.states.len(), 2);
        assert_eq!(traj.times, vec![0.0, 0.5]);
        assert!(traj.initial_terms.0 > 0.0 && traj.initial_terms.1 == 0.0);
    }

    #[test]
    fn zero_data_stays_at_rest() {
        let d = Discretization::aliev_panfilov(mesh(4), AlievPanfilovParams::default()).unwrap();
        let zero = StateField::zeros(d.num_vertices(), 0.0);
        let traj = time_march_from(
            &d,
            zero,
            0.1,
            5,
            &NewtonConfig::default(),
            &MarchOptions::default(),
        )
        .unwrap();
        assert!(traj.steps.iter().all(|s| s.iterations == 1));
        assert!(traj
            .states
            .iter()
            .all(|s| s.u.iter().chain(&s.w).all(|v| *v == 0.0)));
    }

    #[test]
    fn reaction_off_keeps_constants_and_mass() {
        let d =
            Discretization::new(mesh(5), Reaction::Off, ConductivityTensor::identity()).unwrap();
        let n = d.num_vertices();
        let constant = StateField {
            u: vec![0.7; n],
            w: vec![0.2; n],
            time: 0.0,
        };
        let traj = time_march_from(
            &d,
            constant,
            0.1,
            4,
            &NewtonConfig::default(),
            &MarchOptions::default(),
        )
        .unwrap();
        for s in &traj.states {
            assert!(s.u.iter().all(|v| (v - 0.7).abs() < 1e-13));
            assert!(s.w.iter().all(|v| (v - 0.2).abs() < 1e-13));
        }

        // A non-constant field keeps its integral under pure Neumann diffusion.
        let bump: Vec<f64> = d
            .mesh()
            .vertices()
            .iter()
            .map(|x| initial_data(*x).0)
            .collect();
        let start = StateField {
            u: bump,
            w: vec![0.0; n],
            time: 0.0,
        };
        let traj = time_march_from(
            &d,
            start,
            0.05,
            6,
            &NewtonConfig::default(),
            &MarchOptions::default(),
        )
        .unwrap();
        let ones = vec![1.0; n];
        let integrals: Vec<f64> = traj
            .states
            .iter()
            .map(|s| d.mass().bilinear(&ones, &s.u))
            .collect();
        for v in &integrals {
            assert!((v - integrals[0]).abs() < 1e-13);
        }
    }

    #[test]
    fn penultimate_is_kept_on_request() {
        let d = Discretization::aliev_panfilov(mesh(4), AlievPanfilovParams::default()).unwrap();
        let opts = MarchOptions {
            keep_penultimate: true,
        };
        let traj = time_march(&d, 0.1, 0.2, &NewtonConfig::default(), &opts).unwrap();
        assert!(traj.steps.iter().all(|s| s.penultimate.is_some()));
    }

    #[test]
    fn runs_are_deterministic() {
        let d = Discretization::aliev_panfilov(mesh(6), AlievPanfilovParams::default()).unwrap();
        let a = time_march(
            &d,
            0.1,
            0.3,
            &NewtonConfig::default(),
            &MarchOptions::default(),
        )
        .unwrap();
        let b = time_march(
            &d,
            0.1,
            0.3,
            &NewtonConfig::default(),
            &MarchOptions::default(),
        )
        .unwrap();
        assert_eq!(a.states, b.states);
    }
}
