//! The four experiment commands. Each writes its artifacts below the
//! configured output directory and returns what it wrote.
//!
//! CSV columns (units are nondimensional throughout):
//!
//! | file | columns |
//! |------|---------|
//! | `probe.csv` | `step, t, u, w, newton_iterations` |
//! | `upperbound.csv` | `step, t, error, estimator, effectivity, eta, theta, gamma, newton_iterations` |
//! | `convergence.csv` | `n, h, max_diameter, tau, error, estimator, effectivity, newton_iterations` |
//! | `convergence_orders.csv` | `error_order, estimator_order` |
//! | `newton_study.csv` | `t, k, increment, gamma, error_u_h1, error_w_l2, error` |

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::cli::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{read_checkpoint, write_checkpoint, write_csv, write_vtk, Cell, Checkpoint, Table};
use crate::ionic::AlievPanfilovParams;
use crate::mesh::{MeshHierarchy, Point, TriMesh};
use crate::solver::{time_march, Discretization, MarchOptions, NewtonConfig};
use crate::verify::{
    build_reference, convergence_study, hierarchy_for, newton_study, upper_bound_study,
    NewtonStudy, ReferenceSolution, StudyResult, UpperBoundResult,
};

/// Directory where reference trajectories are cached between runs, if set.
pub const REF_CACHE_ENV: &str = "MONODOMAIN_REF_CACHE";

/// Files written by a command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandOutput {
    pub csv: Vec<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub vtk: Vec<PathBuf>,
}

fn prepare_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

/// Value of the P1 field at `x`.
pub fn probe_value(mesh: &TriMesh, field: &[f64], x: Point) -> Result<f64> {
    let k = mesh
        .locate(x)
        .ok_or_else(|| Error::param("study.probe", "outside the mesh"))?;
    let bary = mesh.barycentric(k, x);
    let t = mesh.triangles()[k];
    Ok((0..3).map(|i| bary[i] * field[t[i]]).sum())
}

/// March the configured run; write the checkpoint, the probe time series and
/// optional VTK frames.
pub fn solve(cfg: &RunConfig) -> Result<(CommandOutput, Checkpoint)> {
    let dir = prepare_dir(cfg)?;
    let params = cfg.params();
    let mesh = Arc::clone(MeshHierarchy::unit_square(cfg.mesh.n, 0)?.finest());
    let disc = Discretization::aliev_panfilov(Arc::clone(&mesh), params)?;
    log::info!(
        "solve: n = {}, tau = {}, t_end = {}",
        cfg.mesh.n,
        cfg.time.tau,
        cfg.time.t_end
    );
    let traj = time_march(
        &disc,
        cfg.time.tau,
        cfg.time.t_end,
        &cfg.newton_config(),
        &MarchOptions::default(),
    )?;
    let mut out = CommandOutput::default();

    let mut probe = Table::new(["step", "t", "u", "w", "newton_iterations"]);
    for (n, s) in traj.states.iter().enumerate() {
        let k = if n == 0 {
            Cell::Empty
        } else {
            Cell::from(traj.steps[n - 1].iterations)
        };
        probe.push(vec![
            n.into(),
            s.time.into(),
            probe_value(&mesh, &s.u, cfg.study.probe)?.into(),
            probe_value(&mesh, &s.w, cfg.study.probe)?.into(),
            k,
        ])?;
    }
    let path = dir.join("probe.csv");
    write_csv(&probe, &path)?;
    out.csv.push(path);

    if cfg.output.vtk_every > 0 {
        for (n, s) in traj.states.iter().enumerate().step_by(cfg.output.vtk_every) {
            let path = dir.join(format!("frame_{n:05}.vtk"));
            write_vtk(&path, &mesh, s)?;
            out.vtk.push(path);
        }
    }

    let checkpoint = Checkpoint::new(traj, cfg.time.tau, params)?;
    if cfg.output.checkpoint {
        let path = dir.join("trajectory.ckpt");
        write_checkpoint(&checkpoint, &path)?;
        out.checkpoint = Some(path);
    }
    Ok((out, checkpoint))
}

fn cache_name(
    h: &MeshHierarchy,
    tau: f64,
    t_end: f64,
    tol: f64,
    p: &AlievPanfilovParams,
) -> String {
    let base = h.levels()[0].cells_per_side().unwrap_or(0);
    format!(
        "reference_b{base}_d{}_tau{tau:e}_T{t_end:e}_tol{tol:e}_A{:e}_a{:e}_eps{:e}_M{:e}.ckpt",
        h.levels().len() - 1,
        p.a_strength,
        p.threshold,
        p.eps,
        p.conductivity
    )
}

/// Reference run on the finest level of `hierarchy`, read from `cache` when
/// a matching checkpoint is there and written to it otherwise.
pub fn load_or_build_reference(
    hierarchy: MeshHierarchy,
    params: AlievPanfilovParams,
    tau: f64,
    t_end: f64,
    tol: f64,
    cache: Option<&Path>,
) -> Result<ReferenceSolution> {
    let path = cache.map(|dir| dir.join(cache_name(&hierarchy, tau, t_end, tol, &params)));
    if let Some(path) = path.as_ref().filter(|p| p.exists()) {
        let c = read_checkpoint(path)?;
        if *c.trajectory.mesh == **hierarchy.finest()
            && c.params == params
            && c.tau == tau
            && c.t_end == t_end
        {
            log::info!("reference read from {}", path.display());
            return ReferenceSolution::from_trajectory(hierarchy, params, c.trajectory);
        }
        log::warn!("ignoring stale reference cache {}", path.display());
    }
    log::info!(
        "building reference: n = {:?}, tau = {tau}, t_end = {t_end}, tol = {tol:e}",
        hierarchy.finest().cells_per_side()
    );
    let reference = build_reference(hierarchy, params, tau, t_end, tol)?;
    if let Some(path) = path {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        write_checkpoint(
            &Checkpoint::new(reference.trajectory().clone(), tau, params)?,
            &path,
        )?;
    }
    Ok(reference)
}

/// Reference whose mesh chain contains every mesh in `cells`.
fn reference_for(cfg: &RunConfig, cells: &[usize]) -> Result<ReferenceSolution> {
    let s = &cfg.study;
    if cells.iter().any(|&n| n > s.reference_n) {
        return Err(Error::param(
            "study.reference_n",
            "must be at least as fine as every compared mesh",
        ));
    }
    let mut all = cells.to_vec();
    all.push(s.reference_n);
    let hierarchy = hierarchy_for(&all)?;
    let cache = std::env::var_os(REF_CACHE_ENV).map(PathBuf::from);
    load_or_build_reference(
        hierarchy,
        cfg.params(),
        s.reference_tau,
        cfg.time.t_end,
        s.reference_tol,
        cache.as_deref(),
    )
}

/// Cumulative estimator against the error at every step of the configured run.
pub fn upperbound(cfg: &RunConfig) -> Result<(CommandOutput, UpperBoundResult)> {
    cfg.validate_study()?;
    let dir = prepare_dir(cfg)?;
    let reference = reference_for(cfg, &[cfg.mesh.n])?;
    let result = upper_bound_study(
        &reference,
        cfg.mesh.n,
        cfg.time.tau,
        cfg.time.t_end,
        &cfg.newton_config(),
    )?;
    let mut table = Table::new([
        "step",
        "t",
        "error",
        "estimator",
        "effectivity",
        "eta",
        "theta",
        "gamma",
        "newton_iterations",
    ]);
    for (n, row) in result.rows.iter().enumerate() {
        let (eta, theta, gamma, k) = match n {
            0 => (Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty),
            _ => {
                let s = &result.run.report.steps[n - 1];
                (
                    s.eta.into(),
                    s.theta.into(),
                    s.gamma.into(),
                    result.run.trajectory.steps[n - 1].iterations.into(),
                )
            }
        };
        table.push(vec![
            n.into(),
            row.time.into(),
            row.error.into(),
            row.estimator.into(),
            row.effectivity.into(),
            eta,
            theta,
            gamma,
            k,
        ])?;
    }
    let path = dir.join("upperbound.csv");
    write_csv(&table, &path)?;
    log::info!(
        "upper bound {} at every step; final effectivity {:?}",
        if result.bound_holds() {
            "holds"
        } else {
            "FAILS"
        },
        result.final_effectivity()
    );
    Ok((
        CommandOutput {
            csv: vec![path],
            ..CommandOutput::default()
        },
        result,
    ))
}

/// Error and estimator orders along the configured ladder.
pub fn convergence(cfg: &RunConfig) -> Result<(CommandOutput, StudyResult)> {
    cfg.validate_study()?;
    let dir = prepare_dir(cfg)?;
    let ladder: Vec<(usize, f64)> = cfg.study.ladder.iter().map(|r| (r.n, r.tau)).collect();
    let cells: Vec<usize> = ladder.iter().map(|r| r.0).collect();
    let reference = reference_for(cfg, &cells)?;
    let result = convergence_study(&reference, &ladder, cfg.time.t_end, &cfg.newton_config())?;

    let mut rows = Table::new([
        "n",
        "h",
        "max_diameter",
        "tau",
        "error",
        "estimator",
        "effectivity",
        "newton_iterations",
    ]);
    for r in &result.rows {
        rows.push(vec![
            r.cells.into(),
            r.h.into(),
            r.max_diameter.into(),
            r.tau.into(),
            r.error.into(),
            r.estimator.into(),
            r.effectivity.into(),
            r.newton_iterations.into(),
        ])?;
    }
    let mut orders = Table::new(["error_order", "estimator_order"]);
    orders.push(vec![
        result.error_order.into(),
        result.estimator_order.into(),
    ])?;
    let (p_rows, p_orders) = (
        dir.join("convergence.csv"),
        dir.join("convergence_orders.csv"),
    );
    write_csv(&rows, &p_rows)?;
    write_csv(&orders, &p_orders)?;
    log::info!(
        "fitted orders: error {:?}, estimator {:?}",
        result.error_order,
        result.estimator_order
    );
    Ok((
        CommandOutput {
            csv: vec![p_rows, p_orders],
            ..CommandOutput::default()
        },
        result,
    ))
}

/// Newton iterates of the steps ending at each configured study time.
pub fn newton(cfg: &RunConfig) -> Result<(CommandOutput, Vec<NewtonStudy>)> {
    cfg.validate_study()?;
    let dir = prepare_dir(cfg)?;
    let s = &cfg.study;
    let mesh = Arc::clone(MeshHierarchy::unit_square(s.newton_n, 0)?.finest());
    let disc = Discretization::aliev_panfilov(mesh, cfg.params())?;
    let march_cfg: NewtonConfig = cfg.newton_config();
    let mut table = Table::new([
        "t",
        "k",
        "increment",
        "gamma",
        "error_u_h1",
        "error_w_l2",
        "error",
    ]);
    let mut studies = Vec::with_capacity(s.newton_times.len());
    for &t in &s.newton_times {
        log::info!(
            "newton study at t = {t} (n = {}, tau = {})",
            s.newton_n,
            s.newton_tau
        );
        let study = newton_study(&disc, s.newton_tau, t, &march_cfg, s.reference_tol)?;
        for r in &study.rows {
            table.push(vec![
                t.into(),
                r.k.into(),
                r.increment.into(),
                r.gamma.into(),
                r.error_u_h1.into(),
                r.error_w_l2.into(),
                r.error.into(),
            ])?;
        }
        studies.push(study);
    }
    let path = dir.join("newton_study.csv");
    write_csv(&table, &path)?;
    Ok((
        CommandOutput {
            csv: vec![path],
            ..CommandOutput::default()
        },
        studies,
    ))
}
