//! Reachability analysis for quadratic x-independent Hamiltonians: a
//! terminal state is a forward image exactly when it is semiconcave with
//! the quadratic gauge `q(x) = <A^{-1} x, x> / (2T)`, i.e. `u_T - q` is
//! concave. This module tests that condition on the grid, projects onto the
//! (convex) discrete feasible set in L2, certifies semiconcave envelopes
//! through the associated obstacle problem, and describes the cone of
//! initial data that reach a given target.

use crate::geometry::{self, Point, SymMat};
use crate::grid::{Extension, GridFunction, GridSpec, StencilDir};
use crate::hamiltonian::HamiltonianModel;
use crate::solver::{backward_to_zero, SolverOptions};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

/// Default sweep budget for the projection.
pub const DEFAULT_MAX_SWEEPS: usize = 5000;
/// Default constraint-residual tolerance of the projection.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-8;
/// Default iterate-change tolerance of the projection.
pub const DEFAULT_CHANGE_TOL: f64 = 1e-10;
/// Squared Euclidean norm of the (1, -2, 1) constraint row.
const ROW_NORM_SQ: f64 = 6.0;

/// Default reachability tolerance: proportional to the exact second
/// difference of the quadratic gauge, plus a rounding floor.
pub fn default_reach_tolerance(spec: &GridSpec, a: &SymMat, t: f64) -> f64 {
    let h = spec.spacing();
    4.0 * h * h * a.inverse().op_norm() / t + 1e-10
}

fn validate_quadratic(u: &GridFunction, t: f64, a: &SymMat) -> Result<SymMat> {
    if a.dim() != u.spec().dim() {
        return Err(Error::InvalidArgument(format!(
            "matrix dimension {} does not match grid dimension {}",
            a.dim(),
            u.spec().dim()
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {t}"
        )));
    }
    if a.min_eig() <= 0.0 {
        return Err(Error::InvalidArgument(
            "kinetic matrix must be positive definite".into(),
        ));
    }
    Ok(a.inverse())
}

/// The gauge `q(x) = <A^{-1} x, x> / (2 t)` sampled on the grid.
fn quadratic_gauge(spec: &GridSpec, a_inv: &SymMat, t: f64) -> Result<GridFunction> {
    GridFunction::sample(*spec, Extension::Linear, |x| {
        a_inv.quad(x) / (2.0 * t)
    })
}

/// Verdict of the discrete reachability test.
#[derive(Clone, Debug)]
pub struct ReachabilityReport {
    /// Per-node maximal excess second difference of `u_T - q` over the
    /// stencil directions (zero on the boundary).
    pub violation: GridFunction,
    pub max_violation: f64,
    pub tolerance: f64,
    pub reachable: bool,
}

/// Test whether a terminal state lies in the discrete reachable set of the
/// quadratic model with kinetic matrix `A` over horizon `t`: concavity of
/// `u_T - q` along all stencil directions at all interior nodes. In two
/// dimensions the axis + diagonal stencil is an outer relaxation of true
/// concavity (a refinement path is to add directions).
pub fn is_reachable(
    u_t: &GridFunction,
    t: f64,
    a: &SymMat,
    tol: Option<f64>,
) -> Result<ReachabilityReport> {
    let a_inv = validate_quadratic(u_t, t, a)?;
    let spec = *u_t.spec();
    let gauge = quadratic_gauge(&spec, &a_inv, t)?;
    let diff = u_t.sub(&gauge)?;
    let dirs = StencilDir::all(spec.dim());
    let values: Vec<f64> = (0..spec.node_count())
        .map(|idx| {
            if spec.is_boundary(idx) {
                0.0
            } else {
                dirs.iter()
                    .map(|&d| {
                        diff.second_difference(idx, d)
                            .expect("interior stencils stay inside the grid")
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect();
    let max_violation = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tolerance = tol.unwrap_or_else(|| default_reach_tolerance(&spec, a, t));
    Ok(ReachabilityReport {
        violation: GridFunction::from_values(spec, values, Extension::Constant)?,
        max_violation,
        tolerance,
        reachable: max_violation <= tolerance,
    })
}

/// One concavity constraint: `phi[plus] + phi[minus] - 2 phi[center] <= bound`.
#[derive(Clone, Copy, Debug)]
struct Constraint {
    center: usize,
    plus: usize,
    minus: usize,
    bound: f64,
}

impl Constraint {
    fn residual(&self, phi: &[f64]) -> f64 {
        phi[self.plus] + phi[self.minus] - 2.0 * phi[self.center] - self.bound
    }

    /// Add `s` times the constraint row to `phi`.
    fn add_row(&self, phi: &mut [f64], s: f64) {
        phi[self.plus] += s;
        phi[self.minus] += s;
        phi[self.center] -= 2.0 * s;
    }
}

/// Concavity constraints at a fixed stencil stride, in deterministic
/// node-major, direction-minor order. Centers are interior nodes and both
/// stride endpoints must lie in the grid; under that rule every stride-k
/// stencil is a nonnegative combination of stride-1 stencils from the same
/// family, so wider strides never change the feasible set.
fn stride_constraints(spec: &GridSpec, gauge: &GridFunction, stride: usize) -> Vec<Constraint> {
    let dirs = StencilDir::all(spec.dim());
    let m = spec.points_per_axis() as isize;
    let k = stride as isize;
    let gv = gauge.values();
    let mut out = Vec::new();
    for idx in 0..spec.node_count() {
        if spec.is_boundary(idx) {
            continue;
        }
        let ij = spec.split(idx);
        for &d in dirs {
            let off = d.offset();
            let plus = [ij[0] as isize + k * off[0], ij[1] as isize + k * off[1]];
            let minus = [ij[0] as isize - k * off[0], ij[1] as isize - k * off[1]];
            let inside = (0..spec.dim())
                .all(|ax| (0..m).contains(&plus[ax]) && (0..m).contains(&minus[ax]));
            if !inside {
                continue;
            }
            let p = spec.flat([plus[0] as usize, plus[1] as usize]);
            let q = spec.flat([minus[0] as usize, minus[1] as usize]);
            out.push(Constraint {
                center: idx,
                plus: p,
                minus: q,
                bound: gv[p] + gv[q] - 2.0 * gv[idx],
            });
        }
    }
    out
}


/// Tuning knobs for `project_l2`.
#[derive(Clone, Copy, Debug)]
pub struct ProjectionParams {
    pub max_sweeps: usize,
    /// Accept when every constraint residual is at most this.
    pub feasibility_tol: f64,
    /// ... and the sup-change of one full sweep is at most this.
    pub change_tol: f64,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        ProjectionParams {
            max_sweeps: DEFAULT_MAX_SWEEPS,
            feasibility_tol: DEFAULT_FEASIBILITY_TOL,
            change_tol: DEFAULT_CHANGE_TOL,
        }
    }
}

/// Result of the L2 projection onto the discrete reachable set.
#[derive(Clone, Debug)]
pub struct ProjectionOutcome {
    pub projected: GridFunction,
    pub sweeps: usize,
    /// Largest remaining constraint residual.
    pub max_violation: f64,
    /// L2 distance moved, in the uniform node metric.
    pub l2_distance: f64,
}

/// Project a terminal state onto the discrete reachable set: minimize the
/// (uniform-metric) L2 distance subject to every interior concavity
/// constraint of `u_T - q`. Dykstra-with-half-spaces — cyclic sweeps, one
/// dual correction per constraint — converges to the exact projection onto
/// the intersection; sweeps run in a fixed order so results are
/// deterministic.
pub fn project_l2(
    u_t: &GridFunction,
    t: f64,
    a: &SymMat,
    params: &ProjectionParams,
) -> Result<ProjectionOutcome> {
    let a_inv = validate_quadratic(u_t, t, a)?;
    let spec = *u_t.spec();
    let gauge = quadratic_gauge(&spec, &a_inv, t)?;
    // Sweep over the base family plus redundant dyadic-stride copies.  A
    // stride-1-only cycle moves mass one cell per sweep and stalls on the
    // near-kernel of the squared-Laplacian normal matrix (spectral gap
    // ~ (h/L)^4); a wide stencil makes the same correction in one step.
    // The wide rows are nonnegative combinations of base rows, so the
    // feasible set -- hence the projection -- is unchanged.
    let mut families: Vec<Vec<Constraint>> = Vec::new();
    let mut stride = 1usize;
    loop {
        let fam = stride_constraints(&spec, &gauge, stride);
        if fam.is_empty() {
            break;
        }
        families.push(fam);
        stride *= 2;
    }
    // Coarsest first, so every sweep ends by polishing the base family.
    families.reverse();
    let base = families.last().expect("stride-1 family is nonempty").clone();
    let mut phi: Vec<f64> = u_t.values().to_vec();
    let mut lambda: Vec<Vec<f64>> = families.iter().map(|f| vec![0.0f64; f.len()]).collect();

    let mut sweeps = 0;
    let mut max_violation;
    loop {
        sweeps += 1;
        let mut sweep_change = 0.0f64;
        for (fam, lams) in families.iter().zip(lambda.iter_mut()) {
            for (c, lam) in fam.iter().zip(lams.iter_mut()) {
                // Re-add the stored correction, then project onto the
                // half-space; the new correction is the projection
                // multiplier.
                let theta = (*lam + c.residual(&phi) / ROW_NORM_SQ).max(0.0);
                let delta = *lam - theta;
                if delta != 0.0 {
                    c.add_row(&mut phi, delta);
                    sweep_change = sweep_change.max(2.0 * delta.abs());
                }
                *lam = theta;
            }
        }
        // Feasibility is decided on the base family alone: it implies every
        // wider stride.
        max_violation = base
            .iter()
            .map(|c| c.residual(&phi))
            .fold(0.0f64, f64::max);
        if max_violation <= params.feasibility_tol && sweep_change <= params.change_tol {
            break;
        }
        if sweeps >= params.max_sweeps {
            return Err(Error::NonConvergence {
                iterations: sweeps,
                residual: max_violation,
            });
        }
    }

    let cell = spec.spacing().powi(spec.dim() as i32);
    let l2_distance = phi
        .iter()
        .zip(u_t.values())
        .map(|(p, u)| (p - u) * (p - u) * cell)
        .sum::<f64>()
        .sqrt();
    Ok(ProjectionOutcome {
        projected: GridFunction::from_values(spec, phi, u_t.extension())?,
        sweeps,
        max_violation,
        l2_distance,
    })
}

/// The variational-inequality certificate of a projection:
/// `<u_T - phi*, psi - phi*>` in the uniform L2 metric. Nonpositive (up to
/// tolerance) for every feasible `psi` exactly when `phi*` is the
/// projection of `u_T`.
pub fn variational_inequality(
    u_t: &GridFunction,
    phi_star: &GridFunction,
    psi: &GridFunction,
) -> Result<f64> {
    if u_t.spec() != phi_star.spec() || u_t.spec() != psi.spec() {
        return Err(Error::InvalidArgument(
            "variational inequality requires a common grid".into(),
        ));
    }
    let cell = u_t.spec().spacing().powi(u_t.spec().dim() as i32);
    Ok((0..u_t.spec().node_count())
        .map(|i| (u_t.value(i) - phi_star.value(i)) * (psi.value(i) - phi_star.value(i)))
        .sum::<f64>()
        * cell)
}

/// Residual of the obstacle-problem characterization of the semiconcave
/// envelope: nodewise `min(phi - u_T, -lambda_max(D^2_h phi - A^{-1}/t))`,
/// zero on the boundary. A near-zero field certifies `phi` as the envelope:
/// `phi` touches the obstacle wherever the concavity constraint is slack.
pub fn obstacle_residual(
    phi: &GridFunction,
    u_t: &GridFunction,
    t: f64,
    a: &SymMat,
) -> Result<GridFunction> {
    if phi.spec() != u_t.spec() {
        return Err(Error::InvalidArgument(
            "envelope and target live on different grids".into(),
        ));
    }
    let a_inv = validate_quadratic(u_t, t, a)?;
    let spec = *u_t.spec();
    let h2 = spec.spacing() * spec.spacing();
    let values: Vec<f64> = (0..spec.node_count())
        .map(|idx| {
            if spec.is_boundary(idx) {
                return 0.0;
            }
            let gap = phi.value(idx) - u_t.value(idx);
            let dxx = phi
                .second_difference(idx, StencilDir::Axis0)
                .expect("interior stencil")
                / h2;
            let lambda_max = if spec.dim() == 1 {
                dxx - a_inv.entry(0, 0) / t
            } else {
                let dyy = phi
                    .second_difference(idx, StencilDir::Axis1)
                    .expect("interior stencil")
                    / h2;
                let dup = phi
                    .second_difference(idx, StencilDir::DiagUp)
                    .expect("interior stencil")
                    / h2;
                // The diagonal second difference carries uxx + 2uxy + uyy.
                let dxy = (dup - dxx - dyy) / 2.0;
                geometry::sym_max_eig(
                    2,
                    dxx - a_inv.entry(0, 0) / t,
                    dxy - a_inv.entry(0, 1) / t,
                    dyy - a_inv.entry(1, 1) / t,
                )
            };
            gap.min(-lambda_max)
        })
        .collect();
    GridFunction::from_values(spec, values, Extension::Constant)
}

/// The cone of initial data reaching a given (reachable) target.
#[derive(Clone, Debug)]
pub struct ConeDescription {
    /// The minimal element: the backward solution of the target.
    pub apex: GridFunction,
    /// Sampled contact points `z - t A grad phi*(z)` over differentiability
    /// nodes.
    pub contact_points: Vec<Point>,
    /// Nodes within `dilation` of some contact point; members must agree
    /// with the apex there.
    pub contact_mask: Vec<bool>,
    /// Dilation radius of the sampled contact set.
    pub dilation: f64,
}

/// Membership verdict for a candidate initial condition.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MembershipReport {
    pub member: bool,
    /// Smallest nodewise `u0 - apex` (must be >= -tol).
    pub min_slack: f64,
    /// Largest |u0 - apex| over the dilated contact set (must be <= tol).
    pub max_contact_gap: f64,
}

impl ConeDescription {
    /// Check whether `u0` belongs to the cone: it must dominate the apex
    /// everywhere and coincide with it on the dilated contact set.
    pub fn membership(&self, u0: &GridFunction, tol: f64) -> Result<MembershipReport> {
        if u0.spec() != self.apex.spec() {
            return Err(Error::InvalidArgument(
                "candidate grid does not match the cone grid".into(),
            ));
        }
        let mut min_slack = f64::INFINITY;
        let mut max_contact_gap = 0.0f64;
        for idx in 0..u0.spec().node_count() {
            let diff = u0.value(idx) - self.apex.value(idx);
            min_slack = min_slack.min(diff);
            if self.contact_mask[idx] {
                max_contact_gap = max_contact_gap.max(diff.abs());
            }
        }
        Ok(MembershipReport {
            member: min_slack >= -tol && max_contact_gap <= tol,
            min_slack,
            max_contact_gap,
        })
    }
}

/// Describe the cone of inverse designs of a reachable target: its apex is
/// the backward solution, and any nonnegative perturbation supported away
/// from the contact set `X_t = {z - t A grad phi*(z)}` stays in the cone.
/// Unreachable targets are a domain error.
pub fn inverse_design_cone(
    phi_star: &GridFunction,
    t: f64,
    a: &SymMat,
    opts: &SolverOptions,
    tol: Option<f64>,
) -> Result<ConeDescription> {
    let report = is_reachable(phi_star, t, a, tol)?;
    if !report.reachable {
        return Err(Error::Hypothesis(format!(
            "target is not reachable (max concavity violation {:.3e} > tol {:.3e}); \
             the inverse-design cone is empty",
            report.max_violation, report.tolerance
        )));
    }
    let spec = *phi_star.spec();
    let model = HamiltonianModel::quadratic(*a);
    let apex = backward_to_zero(&model, phi_star, t, opts)?;

    let grad = phi_star.gradient();
    let dim = spec.dim();
    let mut contact_points = Vec::new();
    for idx in 0..spec.node_count() {
        if grad.kink_mask()[idx] {
            continue;
        }
        let z = spec.node(idx);
        let step = a.apply(grad.at(idx));
        contact_points.push(geometry::sub(z, geometry::scale(step, t)));
    }
    let h = spec.spacing();
    let dilation = 2.0 * h + t * a.op_norm() * h;
    let contact_mask: Vec<bool> = (0..spec.node_count())
        .into_par_iter()
        .map(|idx| {
            let x = spec.node(idx);
            contact_points
                .iter()
                .any(|&p| geometry::norm(dim, geometry::sub(x, p)) <= dilation)
        })
        .collect();
    Ok(ConeDescription {
        apex,
        contact_points,
        contact_mask,
        dilation,
    })
}
