//! Reference solutions, space-time error norms and the verification studies.

mod studies;

pub use studies::{
    contraction_orders, convergence_study, fit_order, newton_study, upper_bound_study, CoarseRun,
    NewtonStudy, NewtonStudyRow, StudyResult, StudyRow, UpperBoundResult, UpperBoundRow,
};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ionic::AlievPanfilovParams;
use crate::mesh::{prolongation, MeshHierarchy, TriMesh};
use crate::solver::linear::{LuFactors, SparseLu};
use crate::solver::{
    time_march, Discretization, MarchOptions, NewtonConfig, StateField, TrajectorySolution,
};
use crate::sparse::{dot, SparseMatrix};

/// Error of a coarse trajectory against the reference over `(0, t)`.
///
/// With `e_u, e_w` the differences of the linear-in-time interpolants:
/// `l2h1 = ||e_u||_{L2(H1)}`, `linf_l2_* = max_t ||e||_{L2}`,
/// `dual_dt_u` the discrete H1-dual norm of `d/dt e_u` in `L2` in time,
/// `l2_dt_* = ||d/dt e||_{L2(L2)}`. `combined_xy` folds
/// `l2h1, linf_l2_u, dual_dt_u` (the X norm) and `linf_l2_w, l2_dt_w` (Y).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub time: f64,
    pub l2h1: f64,
    pub linf_l2_u: f64,
    pub linf_l2_w: f64,
    pub dual_dt_u: f64,
    pub l2_dt_u: f64,
    pub l2_dt_w: f64,
    pub combined_xy: f64,
}

/// A trajectory on the finest level of a mesh hierarchy, with what is needed
/// to measure other trajectories against it.
pub struct ReferenceSolution {
    hierarchy: MeshHierarchy,
    disc: Discretization,
    trajectory: TrajectorySolution,
    h1_lu: LuFactors,
}

impl std::fmt::Debug for ReferenceSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReferenceSolution")
            .field("cells", &self.disc.mesh().cells_per_side())
            .field("steps", &self.trajectory.num_steps())
            .finish_non_exhaustive()
    }
}

impl ReferenceSolution {
    /// Wrap an existing trajectory computed on `hierarchy.finest()`.
    pub fn from_trajectory(
        hierarchy: MeshHierarchy,
        params: AlievPanfilovParams,
        trajectory: TrajectorySolution,
    ) -> Result<Self> {
        if *trajectory.mesh != **hierarchy.finest() {
            return Err(Error::NotNested);
        }
        let disc = Discretization::aliev_panfilov(Arc::clone(hierarchy.finest()), params)?;
        let h1 = disc.h1_gram();
        let h1_lu = SparseLu::analyze(h1)?.factor(h1)?;
        Ok(ReferenceSolution {
            hierarchy,
            disc,
            trajectory,
            h1_lu,
        })
    }

    pub fn hierarchy(&self) -> &MeshHierarchy {
        &self.hierarchy
    }

    pub fn trajectory(&self) -> &TrajectorySolution {
        &self.trajectory
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    /// Mesh of the hierarchy with `n` cells per side.
    pub fn level(&self, n: usize) -> Result<&Arc<TriMesh>> {
        self.hierarchy.with_cells(n).ok_or(Error::NotNested)
    }

    /// `r^T H^{-1} r` for the H1 Gram matrix `H` of the reference mesh.
    fn dual_sq(&self, r: &[f64]) -> Result<f64> {
        let z = self.h1_lu.solve_checked(self.disc.h1_gram(), r)?;
        Ok(dot(r, &z).max(0.0))
    }
}

/// Hierarchy whose levels include every requested cell count. The coarsest
/// count is the base; every other must be a power-of-two multiple of it.
pub fn hierarchy_for(cells: &[usize]) -> Result<MeshHierarchy> {
    let base = *cells
        .iter()
        .min()
        .ok_or_else(|| Error::param("study.ladder", "no meshes requested"))?;
    let mut depth = 0;
    for &n in cells {
        if base == 0 || n % base != 0 || !(n / base).is_power_of_two() {
            return Err(Error::param(
                "study.ladder",
                format!("{n} cells is not {base} times a power of two"),
            ));
        }
        depth = depth.max((n / base).trailing_zeros() as usize);
    }
    MeshHierarchy::unit_square(base, depth)
}

/// Reference run on the finest level of `hierarchy` with a tight Newton
/// tolerance.
pub fn build_reference(
    hierarchy: MeshHierarchy,
    params: AlievPanfilovParams,
    tau_ref: f64,
    t_end: f64,
    tol: f64,
) -> Result<ReferenceSolution> {
    let disc = Discretization::aliev_panfilov(Arc::clone(hierarchy.finest()), params)?;
    let trajectory = time_march(
        &disc,
        tau_ref,
        t_end,
        &NewtonConfig::with_tolerance(tol),
        &MarchOptions::default(),
    )?;
    ReferenceSolution::from_trajectory(hierarchy, params, trajectory)
}

fn time_key_eq(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(1.0)
}

/// Value at time `t` of the piecewise linear interpolant of `states`.
fn interpolant_at(times: &[f64], states: &[(Vec<f64>, Vec<f64>)], t: f64) -> (Vec<f64>, Vec<f64>) {
    let scale = *times.last().expect("non-empty");
    if let Some(i) = times.iter().position(|&s| time_key_eq(s, t, scale)) {
        return states[i].clone();
    }
    let j = times.partition_point(|&s| s < t).clamp(1, times.len() - 1);
    let theta = (t - times[j - 1]) / (times[j] - times[j - 1]);
    let mix = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x + theta * (y - x))
            .collect::<Vec<f64>>()
    };
    (
        mix(&states[j - 1].0, &states[j].0),
        mix(&states[j - 1].1, &states[j].1),
    )
}

/// Error norms over `(0, t_n)` for every coarse grid time `t_n`.
///
/// The two time grids are merged, so the coarse grid need not be a subgrid of
/// the reference grid; on every merged cell both interpolants are linear in
/// time and all integrals are exact. `L-infinity` in time is attained at the
/// merged grid points because the norm of a linear-in-time field is convex.
pub fn xy_error_history(
    coarse: &TrajectorySolution,
    reference: &ReferenceSolution,
) -> Result<Vec<ErrorNorms>> {
    let ref_traj = &reference.trajectory;
    let t_final = coarse.final_time();
    if t_final > ref_traj.final_time() * (1.0 + 1e-12) {
        return Err(Error::param(
            "study.reference_tau",
            "reference trajectory ends before the coarse one",
        ));
    }
    let p = prolongation(&coarse.mesh, reference.disc.mesh())?;
    let lift = |s: &StateField| (p.mul_vec(&s.u), p.mul_vec(&s.w));
    let coarse_states: Vec<_> = coarse.states.iter().map(lift).collect();
    let ref_states: Vec<_> = ref_traj
        .states
        .iter()
        .map(|s| (s.u.clone(), s.w.clone()))
        .collect();

    let mut merged: Vec<f64> = coarse
        .times
        .iter()
        .chain(ref_traj.times.iter())
        .copied()
        .filter(|&t| t <= t_final * (1.0 + 1e-12))
        .collect();
    merged.sort_by(f64::total_cmp);
    merged.dedup_by(|a, b| time_key_eq(*a, *b, t_final));

    let mass = reference.disc.mass();
    let h1 = reference.disc.h1_gram();
    let error_at = |t: f64| {
        let (cu, cw) = interpolant_at(&coarse.times, &coarse_states, t);
        let (ru, rw) = interpolant_at(&ref_traj.times, &ref_states, t);
        let eu: Vec<f64> = cu.iter().zip(&ru).map(|(a, b)| a - b).collect();
        let ew: Vec<f64> = cw.iter().zip(&rw).map(|(a, b)| a - b).collect();
        (eu, ew)
    };

    let mut acc = Accumulator::default();
    let (mut eu0, mut ew0) = error_at(merged[0]);
    acc.observe(mass, &eu0, &ew0);
    let mut history = vec![acc.norms(0.0)];
    let mut next_coarse = 1;
    for window in merged.windows(2) {
        let (t0, t1) = (window[0], window[1]);
        let dt = t1 - t0;
        let (eu1, ew1) = error_at(t1);
        acc.l2h1_sq +=
            dt / 3.0 * (h1.quad_form(&eu0) + h1.bilinear(&eu0, &eu1) + h1.quad_form(&eu1));
        let du: Vec<f64> = eu1.iter().zip(&eu0).map(|(b, a)| b - a).collect();
        let dw: Vec<f64> = ew1.iter().zip(&ew0).map(|(b, a)| b - a).collect();
        let r = mass.mul_vec(&du);
        acc.dual_sq += reference.dual_sq(&r)? / dt;
        acc.l2_dt_u_sq += dot(&du, &r) / dt;
        acc.l2_dt_w_sq += mass.quad_form(&dw) / dt;
        acc.observe(mass, &eu1, &ew1);
        if next_coarse < coarse.times.len() && time_key_eq(t1, coarse.times[next_coarse], t_final) {
            history.push(acc.norms(coarse.times[next_coarse]));
            next_coarse += 1;
        }
        eu0 = eu1;
        ew0 = ew1;
    }
    debug_assert_eq!(history.len(), coarse.times.len());
    Ok(history)
}

/// Error norms over `(0, up_to)`; `up_to` must be a coarse grid time.
pub fn xy_error(
    coarse: &TrajectorySolution,
    reference: &ReferenceSolution,
    up_to: f64,
) -> Result<ErrorNorms> {
    let n = coarse
        .times
        .iter()
        .position(|&t| time_key_eq(t, up_to, coarse.final_time()))
        .ok_or_else(|| {
            Error::param("up_to", format!("{up_to} is not a time of the coarse grid"))
        })?;
    Ok(xy_error_history(coarse, reference)?[n])
}

#[derive(Debug, Default)]
struct Accumulator {
    l2h1_sq: f64,
    dual_sq: f64,
    l2_dt_u_sq: f64,
    l2_dt_w_sq: f64,
    linf_u: f64,
    linf_w: f64,
}

impl Accumulator {
    fn observe(&mut self, mass: &SparseMatrix, eu: &[f64], ew: &[f64]) {
        self.linf_u = self.linf_u.max(mass.quad_form(eu).max(0.0).sqrt());
        self.linf_w = self.linf_w.max(mass.quad_form(ew).max(0.0).sqrt());
    }

    fn norms(&self, time: f64) -> ErrorNorms {
        let combined = self.l2h1_sq
            + self.linf_u.powi(2)
            + self.dual_sq
            + self.linf_w.powi(2)
            + self.l2_dt_w_sq;
        ErrorNorms {
            time,
            l2h1: self.l2h1_sq.max(0.0).sqrt(),
            linf_l2_u: self.linf_u,
            linf_l2_w: self.linf_w,
            dual_dt_u: self.dual_sq.max(0.0).sqrt(),
            l2_dt_u: self.l2_dt_u_sq.max(0.0).sqrt(),
            l2_dt_w: self.l2_dt_w_sq.max(0.0).sqrt(),
            combined_xy: combined.max(0.0).sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::StepRecord;

    fn synthetic(
        mesh: &Arc<TriMesh>,
        times: &[f64],
        u: impl Fn(f64) -> f64,
        w: impl Fn(f64) -> f64,
    ) -> TrajectorySolution {
        let n = mesh.num_vertices();
        TrajectorySolution {
            mesh: Arc::clone(mesh),
            times: times.to_vec(),
            states: times
                .iter()
                .map(|&t| StateField {
                    u: vec![u(t); n],
                    w: vec![w(t); n],
                    time: t,
                })
                .collect(),
            steps: (1..times.len())
                .map(|_| StepRecord {
                    iterations: 1,
                    increments: vec![0.0],
                    indicators: vec![],
                    stalled: false,
                    penultimate: None,
                })
                .collect(),
            initial_terms: (0.0, 0.0),
        }
    }

    fn reference_of(h: &MeshHierarchy, traj: TrajectorySolution) -> ReferenceSolution {
        ReferenceSolution::from_trajectory(h.clone(), AlievPanfilovParams::default(), traj).unwrap()
    }

    #[test]
    fn hierarchy_for_checks_ratios() {
        let h = hierarchy_for(&[16, 8, 32]).unwrap();
        assert_eq!(h.levels().len(), 3);
        assert!(h.with_cells(32).is_some());
        assert!(hierarchy_for(&[8, 24]).is_err());
        assert!(hierarchy_for(&[]).is_err());
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let h = MeshHierarchy::unit_square(2, 1).unwrap();
        let times = [0.0, 0.5, 1.0];
        let r = synthetic(h.finest(), &times, |t| t * t, |t| 1.0 - t);
        let reference = reference_of(&h, r.clone());
        for e in xy_error_history(&r, &reference).unwrap() {
            assert_eq!(e.combined_xy, 0.0);
        }
    }

    #[test]
    fn constant_offset_norms() {
        // e_u = c on (0, t): l2h1 = c sqrt(t), linf = c, time derivatives vanish.
        let h = MeshHierarchy::unit_square(2, 2).unwrap();
        let c = 0.3;
        let coarse = synthetic(&h.levels()[0], &[0.0, 0.1, 0.2, 0.3], |_| c, |_| 0.0);
        let fine_times: Vec<f64> = (0..=12).map(|i| i as f64 * 0.025).collect();
        let reference = reference_of(&h, synthetic(h.finest(), &fine_times, |_| 0.0, |_| 0.0));
        let hist = xy_error_history(&coarse, &reference).unwrap();
        for e in &hist {
            assert!((e.l2h1 - c * e.time.sqrt()).abs() < 1e-13);
            assert!((e.linf_l2_u - c).abs() < 1e-13);
            assert!(e.dual_dt_u.abs() < 1e-13 && e.l2_dt_w == 0.0);
        }
    }

    #[test]
    fn non_nested_time_grids_are_merged() {
        // e_u(t) = t, constant in space; grids 0.1 and 1/8 interleave.
        let h = MeshHierarchy::unit_square(1, 1).unwrap();
        let coarse_times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let fine_times: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let coarse = synthetic(&h.levels()[0], &coarse_times, |t| t, |_| 0.0);
        let reference = reference_of(&h, synthetic(h.finest(), &fine_times, |_| 0.0, |_| 0.0));
        let last = *xy_error_history(&coarse, &reference)
            .unwrap()
            .last()
            .unwrap();
        assert!((last.l2h1 - (1.0f64 / 3.0).sqrt()).abs() < 1e-13);
        assert!((last.linf_l2_u - 1.0).abs() < 1e-13);
        assert!((last.l2_dt_u - 1.0).abs() < 1e-13);
        // The Riesz representer of a constant functional is a constant, so
        // the dual norm of the unit constant equals its L2 norm.
        assert!((last.dual_dt_u - 1.0).abs() < 1e-10);
    }

    #[test]
    fn xy_error_requires_grid_time() {
        let h = MeshHierarchy::unit_square(1, 0).unwrap();
        let t = synthetic(h.finest(), &[0.0, 1.0], |_| 0.0, |_| 0.0);
        let reference = reference_of(&h, t.clone());
        assert!(xy_error(&t, &reference, 0.5).is_err());
        assert!(xy_error(&t, &reference, 1.0).is_ok());
    }
}
