//! Residual a posteriori indicators for the space, time and linearization
//! errors of a Newton-Galerkin trajectory.
//!
//! For a step from the accepted state `p = (u_p, w_p)` with last two Newton
//! iterates `b` (iterate `K_n - 1`) and `a` (iterate `K_n`), let
//! `du = u_a - u_b`, `dw = w_a - w_b` and
//!
//! ```text
//! R_K  = -(u_a - u_p)/tau + div(M grad u_a) - [f(b) + f_u(b) du + f_w(b) dw]
//! R_E  = [M grad u_a . nu_E]   (full conormal derivative on boundary edges)
//! R_2  = -(w_a - w_p)/tau - [g(b) + g_u(b) du + g_w(b) dw]
//! eta^2 = sum_K h_K^2 |R_K|^2_K + sum_E h_E |R_E|^2_E + |R_2|^2
//! ```
//!
//! These are exactly the residuals the Newton equations annihilate on P1 test
//! functions. With `u(s) = u_p + s (u_a - u_p)`, `s` in `[0, 1]`:
//!
//! ```text
//! theta^2 = |M^1/2 grad(u_a - u_p)|^2 / 3 + int_0^1 |f(s) - f(a)|^2 + |g(s) - g(a)|^2 ds
//! gamma^2 = |f(a) - f(b) - f_u(b) du - f_w(b) dw|^2 + (same for g)
//! ```

use crate::assembly::{element_gradient, interpolate, local_values};
use crate::error::Result;
use crate::ionic::ReactionEval;
use crate::quadrature::{gauss_legendre_unit_4, quadrature_rule, QuadratureRule};
use crate::solver::{Discretization, StateField, TrajectorySolution};

const SPACE_DEGREE: usize = 6;

fn space_rule() -> QuadratureRule {
    quadrature_rule(SPACE_DEGREE).expect("degree 6 supported")
}

/// Space indicator with its squared contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceIndicator {
    pub eta: f64,
    /// `h_K^2 ||R_K||^2_{L2(K)}` per triangle.
    pub element_terms: Vec<f64>,
    /// `h_E ||R_E||^2_{L2(E)}` per edge.
    pub edge_terms: Vec<f64>,
    /// `||R_2||^2_{L2}`.
    pub ode_term: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeIndicator {
    pub theta: f64,
    /// `||M^1/2 grad(u_n - u_{n-1})||^2 / 3`.
    pub gradient_term: f64,
    /// `(1/tau) ||P_1||^2` over the time slab.
    pub p1_term: f64,
    pub p2_term: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizationIndicator {
    pub gamma: f64,
    pub q1_term: f64,
    pub q2_term: f64,
}

/// Linearized reaction values at one point: `f(b) + f_u(b) du + f_w(b) dw`
/// and its `g` analogue.
#[inline]
fn linearized(rb: &ReactionEval, du: f64, dw: f64) -> (f64, f64) {
    (
        rb.f + rb.f_u * du + rb.f_w * dw,
        rb.g + rb.g_u * du + rb.g_w * dw,
    )
}

fn check_all(disc: &Discretization, states: &[&StateField]) -> Result<()> {
    states.iter().try_for_each(|s| disc.check_state(s))
}

/// Edge jumps `R_E` (constant along each edge for P1) and edge lengths.
fn edge_jumps(disc: &Discretization, u: &[f64]) -> Vec<(f64, f64)> {
    let mesh = disc.mesh();
    let geos = disc.geometries();
    let tris = mesh.triangles();
    let cond = disc.conductivity();
    let flux = |k: usize| cond.apply(k, element_gradient(local_values(u, &tris[k]), &geos[k]));
    mesh.edges()
        .iter()
        .map(|e| {
            let (k1, l1) = (e.triangles[0], e.local[0]);
            let nu = geos[k1].outward_normals[l1];
            let f1 = flux(k1);
            let jump = if e.is_boundary() {
                f1[0] * nu[0] + f1[1] * nu[1]
            } else {
                let f2 = flux(e.triangles[1]);
                (f1[0] - f2[0]) * nu[0] + (f1[1] - f2[1]) * nu[1]
            };
            (jump, geos[k1].edge_lengths[l1])
        })
        .collect()
}

/// Space indicator of a step from `prev` whose last two Newton iterates are
/// `before` and `after`.
pub fn space_indicator(
    disc: &Discretization,
    prev: &StateField,
    before: &StateField,
    after: &StateField,
    tau: f64,
) -> Result<SpaceIndicator> {
    check_all(disc, &[prev, before, after])?;
    let rule = space_rule();
    let reaction = disc.reaction();
    let mesh = disc.mesh();
    let geos = disc.geometries();
    let mut element_terms = Vec::with_capacity(mesh.num_triangles());
    let mut ode_term = 0.0;
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let lv = |f: &[f64]| local_values(f, tri);
        let (up, wp, ub, wb, ua, wa) = (
            lv(&prev.u),
            lv(&prev.w),
            lv(&before.u),
            lv(&before.w),
            lv(&after.u),
            lv(&after.w),
        );
        let geo = &geos[k];
        // div(M grad u_h) vanishes on each element for P1 with element-constant M.
        let divergence = 0.0;
        let mut r1_sq = 0.0;
        let mut r2_sq = 0.0;
        for (bary, weight) in rule.iter() {
            let at = |v: [f64; 3]| interpolate(v, bary);
            let (ubq, wbq, uaq, waq) = (at(ub), at(wb), at(ua), at(wa));
            let rb = reaction.eval(ubq, wbq);
            let (lf, lg) = linearized(&rb, uaq - ubq, waq - wbq);
            let r1 = -(uaq - at(up)) / tau + divergence - lf;
            let r2 = -(waq - at(wp)) / tau - lg;
            r1_sq += weight * r1 * r1;
            r2_sq += weight * r2 * r2;
        }
        element_terms.push(geo.diameter * geo.diameter * geo.area * r1_sq);
        ode_term += geo.area * r2_sq;
    }
    let edge_terms: Vec<f64> = edge_jumps(disc, &after.u)
        .into_iter()
        .map(|(j, h)| h * h * j * j)
        .collect();
    let eta_sq = element_terms.iter().sum::<f64>() + edge_terms.iter().sum::<f64>() + ode_term;
    Ok(SpaceIndicator {
        eta: eta_sq.sqrt(),
        element_terms,
        edge_terms,
        ode_term,
    })
}

/// Time indicator between consecutive accepted states. The slab length
/// cancels against the `1/tau` weight, so `_tau` only documents the step.
pub fn time_indicator(
    disc: &Discretization,
    prev: &StateField,
    accepted: &StateField,
    _tau: f64,
) -> Result<TimeIndicator> {
    check_all(disc, &[prev, accepted])?;
    let diff: Vec<f64> = accepted.u.iter().zip(&prev.u).map(|(a, b)| a - b).collect();
    let gradient_term = disc.stiffness().quad_form(&diff).max(0.0) / 3.0;
    let rule = space_rule();
    let reaction = disc.reaction();
    let gauss = gauss_legendre_unit_4();
    let mut p1_term = 0.0;
    let mut p2_term = 0.0;
    for (k, tri) in disc.mesh().triangles().iter().enumerate() {
        let lv = |f: &[f64]| local_values(f, tri);
        let (up, wp, ua, wa) = (lv(&prev.u), lv(&prev.w), lv(&accepted.u), lv(&accepted.w));
        let area = disc.geometries()[k].area;
        for (bary, weight) in rule.iter() {
            let (upq, wpq, uaq, waq) = (
                interpolate(up, bary),
                interpolate(wp, bary),
                interpolate(ua, bary),
                interpolate(wa, bary),
            );
            let ra = reaction.eval(uaq, waq);
            for &(s, ws) in &gauss {
                let rs = reaction.eval(upq + s * (uaq - upq), wpq + s * (waq - wpq));
                let (p1, p2) = (-(rs.f - ra.f), -(rs.g - ra.g));
                p1_term += ws * weight * area * p1 * p1;
                p2_term += ws * weight * area * p2 * p2;
            }
        }
    }
    Ok(TimeIndicator {
        theta: (gradient_term + p1_term + p2_term).sqrt(),
        gradient_term,
        p1_term,
        p2_term,
    })
}

/// Linearization indicator from the last two Newton iterates.
pub fn linearization_indicator(
    disc: &Discretization,
    before: &StateField,
    after: &StateField,
) -> Result<LinearizationIndicator> {
    check_all(disc, &[before, after])?;
    let rule = space_rule();
    let reaction = disc.reaction();
    let mut q1_term = 0.0;
    let mut q2_term = 0.0;
    for (k, tri) in disc.mesh().triangles().iter().enumerate() {
        let lv = |f: &[f64]| local_values(f, tri);
        let (ub, wb, ua, wa) = (lv(&before.u), lv(&before.w), lv(&after.u), lv(&after.w));
        let area = disc.geometries()[k].area;
        for (bary, weight) in rule.iter() {
            let (ubq, wbq, uaq, waq) = (
                interpolate(ub, bary),
                interpolate(wb, bary),
                interpolate(ua, bary),
                interpolate(wa, bary),
            );
            let rb = reaction.eval(ubq, wbq);
            let ra = reaction.eval(uaq, waq);
            let (lf, lg) = linearized(&rb, uaq - ubq, waq - wbq);
            let (q1, q2) = (-(ra.f - lf), -(ra.g - lg));
            q1_term += weight * area * q1 * q1;
            q2_term += weight * area * q2 * q2;
        }
    }
    Ok(LinearizationIndicator {
        gamma: (q1_term + q2_term).sqrt(),
        q1_term,
        q2_term,
    })
}

/// Indicators with the reaction evaluated at the accepted state only, i.e.
/// ignoring the linearization: `(eta_s, theta_s)`.
pub fn simplified_indicators(
    disc: &Discretization,
    prev: &StateField,
    accepted: &StateField,
    tau: f64,
) -> Result<(f64, f64)> {
    let eta = space_indicator(disc, prev, accepted, accepted, tau)?.eta;
    let theta = time_indicator(disc, prev, accepted, tau)?.theta;
    Ok((eta, theta))
}

/// The space residual of a Newton step as functionals on the P1 basis:
/// `r1_i = sum_K int_K R_K phi_i - sum_E int_E R_E phi_i` and
/// `r2_i = int R_2 phi_i`. Both vanish when the Newton equations are solved.
pub fn space_residual_functional(
    disc: &Discretization,
    prev: &StateField,
    before: &StateField,
    after: &StateField,
    tau: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_all(disc, &[prev, before, after])?;
    let n = disc.num_vertices();
    let rule = space_rule();
    let reaction = disc.reaction();
    let mesh = disc.mesh();
    let mut r1 = vec![0.0; n];
    let mut r2 = vec![0.0; n];
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let lv = |f: &[f64]| local_values(f, tri);
        let (up, wp, ub, wb, ua, wa) = (
            lv(&prev.u),
            lv(&prev.w),
            lv(&before.u),
            lv(&before.w),
            lv(&after.u),
            lv(&after.w),
        );
        let area = disc.geometries()[k].area;
        for (bary, weight) in rule.iter() {
            let at = |v: [f64; 3]| interpolate(v, bary);
            let (ubq, wbq, uaq, waq) = (at(ub), at(wb), at(ua), at(wa));
            let (lf, lg) = linearized(&reaction.eval(ubq, wbq), uaq - ubq, waq - wbq);
            let res1 = -(uaq - at(up)) / tau - lf;
            let res2 = -(waq - at(wp)) / tau - lg;
            for a in 0..3 {
                r1[tri[a]] += weight * area * res1 * bary[a];
                r2[tri[a]] += weight * area * res2 * bary[a];
            }
        }
    }
    for (e, (jump, h)) in mesh.edges().iter().zip(edge_jumps(disc, &after.u)) {
        for &v in &e.vertices {
            r1[v] -= 0.5 * h * jump;
        }
    }
    Ok((r1, r2))
}

/// All indicators of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEstimate {
    pub time: f64,
    pub tau: f64,
    pub eta: f64,
    pub theta: f64,
    pub gamma: f64,
    pub space: SpaceIndicator,
    pub time_parts: TimeIndicator,
    pub linearization: LinearizationIndicator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    /// `(||u_0 - P u_0||^2, ||w_0 - P w_0||^2)`.
    pub initial_terms: (f64, f64),
    pub steps: Vec<StepEstimate>,
    /// Running upper bound at `t_0, t_1, ..., t_N`.
    pub cumulative: Vec<f64>,
}

/// `sqrt(init_u + init_w + sum_{m <= n} tau_m (eta_m^2 + theta_m^2 + gamma_m^2))`
/// for `n = 0..=N`, from per-step `(tau, eta, theta, gamma)`.
pub fn cumulative_bound(initial_terms: (f64, f64), steps: &[(f64, f64, f64, f64)]) -> Vec<f64> {
    let mut acc = initial_terms.0 + initial_terms.1;
    let mut out = Vec::with_capacity(steps.len() + 1);
    out.push(acc.sqrt());
    for &(tau, eta, theta, gamma) in steps {
        acc += tau * (eta * eta + theta * theta + gamma * gamma);
        out.push(acc.sqrt());
    }
    out
}

/// Indicators of every step of a trajectory. Steps that kept their
/// penultimate Newton iterate get the full indicators; the others fall back
/// to the simplified ones with `gamma = 0`.
pub fn estimate_trajectory(
    disc: &Discretization,
    traj: &TrajectorySolution,
) -> Result<EstimatorReport> {
    let mut steps = Vec::with_capacity(traj.num_steps());
    for n in 1..=traj.num_steps() {
        let tau = traj.tau(n);
        let prev = &traj.states[n - 1];
        let accepted = &traj.states[n];
        let before = traj.steps[n - 1].penultimate.as_ref().unwrap_or(accepted);
        let space = space_indicator(disc, prev, before, accepted, tau)?;
        let time_parts = time_indicator(disc, prev, accepted, tau)?;
        let linearization = linearization_indicator(disc, before, accepted)?;
        steps.push(StepEstimate {
            time: traj.times[n],
            tau,
            eta: space.eta,
            theta: time_parts.theta,
            gamma: linearization.gamma,
            space,
            time_parts,
            linearization,
        });
    }
    let rows: Vec<_> = steps
        .iter()
        .map(|s| (s.tau, s.eta, s.theta, s.gamma))
        .collect();
    let cumulative = cumulative_bound(traj.initial_terms, &rows);
    Ok(EstimatorReport {
        initial_terms: traj.initial_terms,
        steps,
        cumulative,
    })
}
