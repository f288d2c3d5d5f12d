//! The upper-bound, convergence and Newton studies.

use std::sync::Arc;

use super::{xy_error_history, ErrorNorms, ReferenceSolution};
use crate::assembly::l2_project;
use crate::error::{Error, Result};
use crate::estimators::{estimate_trajectory, linearization_indicator, EstimatorReport};
use crate::ionic::initial_data;
use crate::solver::march::step_count;
use crate::solver::{
    newton_solve, time_march, time_march_from, Discretization, MarchOptions, NewtonConfig,
    StateField, TrajectorySolution,
};

/// A coarse trajectory with its indicators and its error history against a
/// reference.
#[derive(Debug, Clone)]
pub struct CoarseRun {
    pub cells: usize,
    pub tau: f64,
    pub trajectory: TrajectorySolution,
    pub report: EstimatorReport,
    /// Error over `(0, t_n)` for every grid time.
    pub errors: Vec<ErrorNorms>,
}

impl CoarseRun {
    /// Run on the hierarchy level with `cells` cells per side and measure
    /// against `reference`.
    pub fn compute(
        reference: &ReferenceSolution,
        cells: usize,
        tau: f64,
        t_end: f64,
        cfg: &NewtonConfig,
    ) -> Result<Self> {
        let mesh = Arc::clone(reference.level(cells)?);
        let base = reference.discretization();
        let disc = Discretization::new(mesh, *base.reaction(), base.conductivity().clone())?;
        let trajectory = time_march(
            &disc,
            tau,
            t_end,
            cfg,
            &MarchOptions {
                keep_penultimate: true,
            },
        )?;
        let report = estimate_trajectory(&disc, &trajectory)?;
        let errors = xy_error_history(&trajectory, reference)?;
        Ok(CoarseRun {
            cells,
            tau,
            trajectory,
            report,
            errors,
        })
    }

    pub fn final_error(&self) -> f64 {
        self.errors.last().map_or(0.0, |e| e.combined_xy)
    }

    pub fn final_estimator(&self) -> f64 {
        self.report.cumulative.last().copied().unwrap_or(0.0)
    }
}

fn effectivity(estimator: f64, error: f64) -> Option<f64> {
    (error > 0.0).then(|| estimator / error)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBoundRow {
    pub time: f64,
    pub error: f64,
    pub estimator: f64,
    /// `estimator / error`; undefined when the error vanishes.
    pub effectivity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct UpperBoundResult {
    pub run: CoarseRun,
    pub rows: Vec<UpperBoundRow>,
}

impl UpperBoundResult {
    /// Whether the estimator dominates the error at every grid time.
    pub fn bound_holds(&self) -> bool {
        self.rows.iter().all(|r| r.estimator >= r.error)
    }

    pub fn final_effectivity(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.effectivity)
    }
}

/// Cumulative estimator against the error `{||e_u||_X^2 + ||e_w||_Y^2}^{1/2}`
/// at every time of a coarse run.
pub fn upper_bound_study(
    reference: &ReferenceSolution,
    cells: usize,
    tau: f64,
    t_end: f64,
    cfg: &NewtonConfig,
) -> Result<UpperBoundResult> {
    let run = CoarseRun::compute(reference, cells, tau, t_end, cfg)?;
    let rows = run
        .errors
        .iter()
        .zip(&run.report.cumulative)
        .map(|(e, &estimator)| UpperBoundRow {
            time: e.time,
            error: e.combined_xy,
            estimator,
            effectivity: effectivity(estimator, e.combined_xy),
        })
        .collect();
    Ok(UpperBoundResult { run, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub cells: usize,
    /// Cell width `1/n`.
    pub h: f64,
    /// Largest triangle diameter, `sqrt(2)/n` here.
    pub max_diameter: f64,
    pub tau: f64,
    pub error: f64,
    pub estimator: f64,
    pub effectivity: Option<f64>,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    /// Rows sorted by decreasing `h`.
    pub rows: Vec<StudyRow>,
    /// Least-squares slope of `log(error)` against `log(h)`; `None` with
    /// fewer than two rungs.
    pub error_order: Option<f64>,
    pub estimator_order: Option<f64>,
}

/// Least-squares slope of `log(values)` against `log(h)`.
pub fn fit_order(h: &[f64], values: &[f64]) -> Option<f64> {
    if h.len() != values.len()
        || h.len() < 2
        || h.iter().chain(values).any(|v| !(*v > 0.0 && v.is_finite()))
    {
        return None;
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Final-time error and estimator along a ladder of `(cells, tau)` rungs.
pub fn convergence_study(
    reference: &ReferenceSolution,
    ladder: &[(usize, f64)],
    t_end: f64,
    cfg: &NewtonConfig,
) -> Result<StudyResult> {
    if ladder.is_empty() {
        return Err(Error::param("study.ladder", "needs at least one rung"));
    }
    let mut rows = Vec::with_capacity(ladder.len());
    for &(cells, tau) in ladder {
        log::info!("convergence rung n = {cells}, tau = {tau}");
        let run = CoarseRun::compute(reference, cells, tau, t_end, cfg)?;
        let mesh = &run.trajectory.mesh;
        rows.push(StudyRow {
            cells,
            h: mesh.cell_width(),
            max_diameter: mesh.max_diameter(),
            tau,
            error: run.final_error(),
            estimator: run.final_estimator(),
            effectivity: effectivity(run.final_estimator(), run.final_error()),
            newton_iterations: run.trajectory.iteration_counts().iter().sum(),
        });
    }
    rows.sort_by(|a, b| b.h.total_cmp(&a.h));
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let error_order = fit_order(&h, &rows.iter().map(|r| r.error).collect::<Vec<_>>());
    let estimator_order = fit_order(&h, &rows.iter().map(|r| r.estimator).collect::<Vec<_>>());
    Ok(StudyResult {
        rows,
        error_order,
        estimator_order,
    })
}

/// One Newton iterate; `increment` and `gamma` are undefined for `k = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonStudyRow {
    pub k: usize,
    /// `||u_k - u_{k-1}||_{H1} + ||w_k - w_{k-1}||_{L2}`.
    pub increment: Option<f64>,
    pub gamma: Option<f64>,
    pub error_u_h1: f64,
    pub error_w_l2: f64,
    /// `(error_u_h1^2 + error_w_l2^2)^{1/2}`.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStudy {
    pub time: f64,
    pub tau: f64,
    pub rows: Vec<NewtonStudyRow>,
}

impl NewtonStudy {
    /// Iterates `k >= 1` whose error is resolvable above `floor` but exceeds
    /// the linearization indicator.
    pub fn gamma_violations(&self, floor: f64) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| r.k >= 1 && r.error >= floor && r.gamma.is_some_and(|g| g < r.error))
            .map(|r| r.k)
            .collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.gamma).collect()
    }
}

/// Successive contraction orders `log(x_{k+1}) / log(x_k)` of a sequence
/// tending to zero, for every `x_k` in `[floor, 1)`. Values below the floor
/// are raised to it, so each order is a lower bound of the unresolved one.
pub fn contraction_orders(values: &[f64], floor: f64) -> Vec<f64> {
    values
        .windows(2)
        .filter(|w| w[0] >= floor && w[0] < 1.0)
        .map(|w| w[1].max(floor).ln() / w[0].ln())
        .collect()
}

/// Newton iterates of the step ending at `t_n`: march to `t_n - tau` with
/// `march_cfg`, then iterate the last step to `truth_tol` and measure every
/// iterate against the converged one.
pub fn newton_study(
    disc: &Discretization,
    tau: f64,
    t_n: f64,
    march_cfg: &NewtonConfig,
    truth_tol: f64,
) -> Result<NewtonStudy> {
    let steps = step_count(tau, t_n)?;
    let mesh = disc.mesh();
    let initial = StateField {
        u: l2_project(mesh, |x| initial_data(x).0)?,
        w: l2_project(mesh, |x| initial_data(x).1)?,
        time: 0.0,
    };
    let traj = time_march_from(
        disc,
        initial,
        tau,
        steps - 1,
        march_cfg,
        &MarchOptions::default(),
    )?;
    let prev = traj.states.last().expect("initial state present");
    let truth_cfg = NewtonConfig {
        max_iterations: march_cfg.max_iterations.max(25),
        ..NewtonConfig::with_tolerance(truth_tol)
    };
    let (truth, hist) = newton_solve(disc, prev, tau, &truth_cfg, true)?;
    let mut rows = Vec::with_capacity(hist.iterations + 1);
    for (k, after) in hist.iterates.iter().enumerate() {
        let eu: Vec<f64> = truth.u.iter().zip(&after.u).map(|(a, b)| a - b).collect();
        let ew: Vec<f64> = truth.w.iter().zip(&after.w).map(|(a, b)| a - b).collect();
        let (error_u_h1, error_w_l2) = (disc.h1_norm(&eu), disc.l2_norm(&ew));
        let gamma = match k {
            0 => None,
            _ => Some(linearization_indicator(disc, &hist.iterates[k - 1], after)?.gamma),
        };
        rows.push(NewtonStudyRow {
            k,
            increment: k.checked_sub(1).map(|i| hist.increments[i]),
            gamma,
            error_u_h1,
            error_w_l2,
            error: error_u_h1.hypot(error_w_l2),
        });
    }
    Ok(NewtonStudy {
        time: t_n,
        tau,
        rows,
    })
}
