//! Backward characteristics, the foot map, and the derivative of the
//! forward operator with respect to its initial condition.
//!
//! Along a solution `u(t, .)`, the characteristic system
//!
//! ```text
//! d/ds xi = H_p(xi, p),    d/ds p = -H_x(xi, p),
//! xi(t) = x,               p(t) = grad u(t, x)
//! ```
//!
//! is integrated backward from every differentiability node. The foot map
//! `Phi(x) = xi(0)` encodes where information at `(t, x)` originated, and
//! the directional derivative of the forward operator along a perturbation
//! `w` of the initial data is the composition `w(Phi(x))`. Nodes where the
//! numerical gradient carries a kink, and nodes whose trajectory leaves the
//! truncated box, are flagged invalid and filled from the nearest valid node
//! (the derivative is an almost-everywhere class, so any measure-zero fill
//! is admissible; nearest-neighbor fill keeps it deterministic).

use crate::geometry::{self, Point};
use crate::grid::{window_quadrature, GridFunction, GridSpec, Window};
use crate::hamiltonian::HamiltonianModel;
use crate::solver::{forward_solve, SolveResult, SolverOptions};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;

/// One backward characteristic: times ascending from `0` to `t`, with the
/// state and costate at each time (`states[0]` is the foot).
#[derive(Clone, Debug)]
pub struct TrajectoryPair {
    times: Vec<f64>,
    states: Vec<Point>,
    costates: Vec<Point>,
}

impl TrajectoryPair {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Point] {
        &self.states
    }

    pub fn costates(&self) -> &[Point] {
        &self.costates
    }

    /// Position at time 0 — the value of the foot map at this trajectory's
    /// terminal point.
    pub fn foot(&self) -> Point {
        self.states[0]
    }

    pub fn foot_costate(&self) -> Point {
        self.costates[0]
    }

    pub fn terminal(&self) -> (Point, Point) {
        (
            *self.states.last().expect("trajectories are nonempty"),
            *self.costates.last().expect("trajectories are nonempty"),
        )
    }

    /// Linearly interpolated state and costate at an intermediate time.
    pub fn sample(&self, s: f64) -> (Point, Point) {
        let t_end = *self.times.last().expect("trajectories are nonempty");
        let s = s.clamp(self.times[0], t_end);
        let k = self.times.partition_point(|&v| v < s).min(self.times.len() - 1);
        if k == 0 {
            return (self.states[0], self.costates[0]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let theta = if t1 > t0 { (s - t0) / (t1 - t0) } else { 0.0 };
        let lerp = |a: Point, b: Point| {
            [
                a[0] + theta * (b[0] - a[0]),
                a[1] + theta * (b[1] - a[1]),
            ]
        };
        (
            lerp(self.states[k - 1], self.states[k]),
            lerp(self.costates[k - 1], self.costates[k]),
        )
    }

    /// Largest drift of `H` along the trajectory relative to its terminal
    /// value; for spatially independent models this is conserved exactly up
    /// to integrator round-off.
    pub fn hamiltonian_drift(&self, model: &HamiltonianModel) -> f64 {
        let (x, p) = self.terminal();
        let h_end = model.eval(x, p);
        self.states
            .iter()
            .zip(&self.costates)
            .map(|(&xi, &q)| (model.eval(xi, q) - h_end).abs())
            .fold(0.0, f64::max)
    }
}

/// Default backward-integration step count for duration `t` on spacing `h`:
/// enough steps that the ODE error sits far below the grid error.
pub fn default_backtrack_steps(t: f64, h: f64) -> usize {
    ((t / h).ceil() as usize).max(32)
}

/// Integrate the characteristic system backward from `(x, grad)` at time `t`
/// down to time 0 with `n_steps` RK4 steps. Errors if the trajectory leaves
/// the box `|xi|_inf <= escape_bound` (the grid cannot support it).
pub fn backtrack(
    model: &HamiltonianModel,
    x: Point,
    grad: Point,
    t: f64,
    n_steps: usize,
    escape_bound: f64,
) -> Result<TrajectoryPair> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "backtrack duration must be positive, got {t}"
        )));
    }
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    let ds = t / n_steps as f64;
    let dim = model.dim();
    let rhs = |xi: Point, p: Point| -> (Point, Point) {
        (
            model.grad_p(xi, p),
            geometry::scale(model.grad_x(xi, p), -1.0),
        )
    };
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut costates = Vec::with_capacity(n_steps + 1);
    let mut xi = x;
    let mut p = grad;
    times.push(t);
    states.push(xi);
    costates.push(p);
    for k in 0..n_steps {
        let step = -ds;
        let (k1x, k1p) = rhs(xi, p);
        let (k2x, k2p) = rhs(
            geometry::add(xi, geometry::scale(k1x, 0.5 * step)),
            geometry::add(p, geometry::scale(k1p, 0.5 * step)),
        );
        let (k3x, k3p) = rhs(
            geometry::add(xi, geometry::scale(k2x, 0.5 * step)),
            geometry::add(p, geometry::scale(k2p, 0.5 * step)),
        );
        let (k4x, k4p) = rhs(
            geometry::add(xi, geometry::scale(k3x, step)),
            geometry::add(p, geometry::scale(k3p, step)),
        );
        let combine = |y: Point, a: Point, b: Point, c: Point, d: Point| {
            [
                y[0] + step / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0]),
                y[1] + step / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1]),
            ]
        };
        xi = combine(xi, k1x, k2x, k3x, k4x);
        p = combine(p, k1p, k2p, k3p, k4p);
        if !(geometry::is_finite(dim, xi) && geometry::is_finite(dim, p)) {
            return Err(Error::NonConvergence {
                iterations: k + 1,
                residual: f64::INFINITY,
            });
        }
        let reach = geometry::inf_norm(dim, xi);
        if reach > escape_bound + 1e-9 {
            return Err(Error::Escape {
                reach,
                bound: escape_bound,
            });
        }
        times.push(t - (k + 1) as f64 * ds);
        states.push(xi);
        costates.push(p);
    }
    times.reverse();
    states.reverse();
    costates.reverse();
    // Pin the endpoint time exactly.
    times[0] = 0.0;
    Ok(TrajectoryPair {
        times,
        states,
        costates,
    })
}

/// Why a foot-map node is invalid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiInvalidReason {
    /// Valid node (no defect).
    None,
    /// The numerical gradient of the slice has a kink at this node.
    Kink,
    /// The backward trajectory left the truncated box.
    Escape,
}

/// The foot map `Phi` on a grid: per-node trajectory feet, with validity
/// flags. Invalid nodes carry the foot of their nearest valid neighbor.
#[derive(Clone, Debug)]
pub struct PhiMap {
    spec: GridSpec,
    targets: Vec<Point>,
    valid: Vec<bool>,
    reasons: Vec<PhiInvalidReason>,
}

impl PhiMap {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn targets(&self) -> &[Point] {
        &self.targets
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn reasons(&self) -> &[PhiInvalidReason] {
        &self.reasons
    }

    pub fn target(&self, idx: usize) -> Point {
        self.targets[idx]
    }

    pub fn is_valid(&self, idx: usize) -> bool {
        self.valid[idx]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// The identity foot map (duration 0).
    pub fn identity(spec: GridSpec) -> Self {
        let n = spec.node_count();
        PhiMap {
            spec,
            targets: (0..n).map(|i| spec.node(i)).collect(),
            valid: vec![true; n],
            reasons: vec![PhiInvalidReason::None; n],
        }
    }
}

/// Build the foot map of a solved slice `u(t, .)`.
///
/// Kink nodes (flagged by the discrete gradient) and escaping trajectories
/// are recorded invalid with a reason, then filled from the nearest valid
/// node by multi-source breadth-first search (deterministic: sources in
/// ascending index order, axis-ordered neighbor visits).
pub fn phi_map(model: &HamiltonianModel, u_t: &GridFunction, t: f64) -> Result<PhiMap> {
    let spec = *u_t.spec();
    if model.dim() != spec.dim() {
        return Err(Error::InvalidArgument(format!(
            "model dimension {} does not match grid dimension {}",
            model.dim(),
            spec.dim()
        )));
    }
    if t <= 1e-12 {
        return Ok(PhiMap::identity(spec));
    }
    let grad = u_t.gradient();
    let n_steps = default_backtrack_steps(t, spec.spacing());
    let bound = spec.half_width();
    let rows: Vec<(Point, bool, PhiInvalidReason)> = (0..spec.node_count())
        .into_par_iter()
        .map(|idx| {
            let x = spec.node(idx);
            if grad.kink_mask()[idx] {
                return Ok((x, false, PhiInvalidReason::Kink));
            }
            match backtrack(model, x, grad.at(idx), t, n_steps, bound) {
                Ok(traj) => Ok((traj.foot(), true, PhiInvalidReason::None)),
                Err(Error::Escape { .. }) => Ok((x, false, PhiInvalidReason::Escape)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut targets = Vec::with_capacity(rows.len());
    let mut valid = Vec::with_capacity(rows.len());
    let mut reasons = Vec::with_capacity(rows.len());
    for (tgt, ok, reason) in rows {
        targets.push(tgt);
        valid.push(ok);
        reasons.push(reason);
    }
    fill_invalid_from_nearest(&spec, &mut targets, &valid)?;
    Ok(PhiMap {
        spec,
        targets,
        valid,
        reasons,
    })
}

/// Overwrite entries at invalid nodes with the target of the nearest valid
/// node in grid distance (multi-source BFS, deterministic order).
fn fill_invalid_from_nearest(
    spec: &GridSpec,
    targets: &mut [Point],
    valid: &[bool],
) -> Result<()> {
    if valid.iter().all(|v| *v) {
        return Ok(());
    }
    if !valid.iter().any(|v| *v) {
        return Err(Error::ValidityDomain(
            "the slice has no differentiability nodes to seed the foot map".into(),
        ));
    }
    let m = spec.points_per_axis() as isize;
    let dim = spec.dim();
    let mut assigned: Vec<bool> = valid.to_vec();
    let mut queue: VecDeque<usize> = (0..valid.len()).filter(|&i| valid[i]).collect();
    while let Some(i) = queue.pop_front() {
        let ij = spec.split(i);
        let (i0, i1) = (ij[0] as isize, ij[1] as isize);
        let mut neighbors: [Option<usize>; 4] = [None; 4];
        neighbors[0] = (i0 > 0).then(|| spec.flat([(i0 - 1) as usize, i1 as usize]));
        neighbors[1] = (i0 + 1 < m).then(|| spec.flat([(i0 + 1) as usize, i1 as usize]));
        if dim == 2 {
            neighbors[2] = (i1 > 0).then(|| spec.flat([i0 as usize, (i1 - 1) as usize]));
            neighbors[3] = (i1 + 1 < m).then(|| spec.flat([i0 as usize, (i1 + 1) as usize]));
        }
        for n in neighbors.into_iter().flatten() {
            if !assigned[n] {
                assigned[n] = true;
                targets[n] = targets[i];
                queue.push_back(n);
            }
        }
    }
    Ok(())
}

/// Solve forward to time `t` and build the foot map of the final slice.
/// Returns the slice alongside the map.
pub fn phi_map_from_initial(
    model: &HamiltonianModel,
    u0: &GridFunction,
    t: f64,
    opts: &SolverOptions,
) -> Result<(GridFunction, PhiMap)> {
    let u_t = if t <= 1e-12 {
        u0.clone()
    } else {
        forward_solve(model, u0, &[0.0, t], opts)?.into_last()
    };
    let phi = phi_map(model, &u_t, t)?;
    Ok((u_t, phi))
}

/// The derivative of the forward operator along an initial-condition
/// perturbation `w`: the composition `w(Phi(x))` nodewise.
pub fn gateaux_derivative(phi: &PhiMap, w: &GridFunction) -> Result<GridFunction> {
    if w.spec() != phi.spec() {
        return Err(Error::InvalidArgument(
            "perturbation grid does not match the foot map grid".into(),
        ));
    }
    let values: Vec<f64> = phi
        .targets()
        .par_iter()
        .map(|&target| w.interpolate(target))
        .collect();
    GridFunction::from_values(*phi.spec(), values, w.extension())
}

/// Finite-difference directional derivative,
/// `(S_t(u0 + delta w) - S_t(u0)) / delta`, both solves under the same
/// scheme. The reference oracle for [`gateaux_derivative`].
pub fn fd_directional(
    model: &HamiltonianModel,
    u0: &GridFunction,
    w: &GridFunction,
    t: f64,
    delta: f64,
    opts: &SolverOptions,
) -> Result<GridFunction> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "perturbation size must be positive, got {delta}"
        )));
    }
    let perturbed = u0.zip_with(w, |a, b| a + delta * b)?;
    let base = forward_solve(model, u0, &[0.0, t], opts)?.into_last();
    let moved = forward_solve(model, &perturbed, &[0.0, t], opts)?.into_last();
    moved.zip_with(&base, |a, b| (a - b) / delta)
}

/// Finite-difference-versus-composition convergence study.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub deltas: Vec<f64>,
    /// `L1(window)` distance between the difference quotient at each delta
    /// and the composed derivative.
    pub distances: Vec<f64>,
    /// Smallest observed distance — the resolution floor of the scheme.
    pub scheme_floor: f64,
    /// Distances nonincreasing (5% slack) until the floor is reached.
    pub monotone: bool,
    /// Final distance within 1.5x of the floor.
    pub plateau: bool,
}

/// Compare difference quotients against the composed derivative over a list
/// of perturbation sizes (descending), measuring `L1` distance on `window`.
pub fn convergence_report(
    model: &HamiltonianModel,
    u0: &GridFunction,
    w: &GridFunction,
    t: f64,
    deltas: &[f64],
    window: &Window,
    opts: &SolverOptions,
) -> Result<ConvergenceReport> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("empty delta list".into()));
    }
    for pair in deltas.windows(2) {
        if pair[1].partial_cmp(&pair[0]) != Some(std::cmp::Ordering::Less) {
            return Err(Error::InvalidArgument(
                "delta list must be strictly decreasing".into(),
            ));
        }
    }
    let (u_t, phi) = phi_map_from_initial(model, u0, t, opts)?;
    let _ = &u_t;
    let derivative = gateaux_derivative(&phi, w)?;
    let quad = window_quadrature(u0.spec(), window)?;
    let mut distances = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let fd = fd_directional(model, u0, w, t, delta, opts)?;
        let dist: f64 = quad
            .iter()
            .map(|&(idx, weight)| weight * (fd.value(idx) - derivative.value(idx)).abs())
            .sum();
        distances.push(dist);
    }
    let scheme_floor = distances.iter().cloned().fold(f64::INFINITY, f64::min);
    let floor_at = distances
        .iter()
        .position(|&d| d == scheme_floor)
        .unwrap_or(0);
    let monotone = distances[..=floor_at]
        .windows(2)
        .all(|p| p[1] <= p[0] * 1.05 + 1e-12);
    let plateau = *distances.last().expect("nonempty") <= 1.5 * scheme_floor + 1e-12;
    Ok(ConvergenceReport {
        deltas: deltas.to_vec(),
        distances,
        scheme_floor,
        monotone,
        plateau,
    })
}

/// Convenience: derivative of the forward operator directly from initial
/// data (solve, map, compose).
pub fn gateaux_derivative_from_initial(
    model: &HamiltonianModel,
    u0: &GridFunction,
    w: &GridFunction,
    t: f64,
    opts: &SolverOptions,
) -> Result<GridFunction> {
    let (_, phi) = phi_map_from_initial(model, u0, t, opts)?;
    gateaux_derivative(&phi, w)
}

/// Re-export for callers assembling multi-slice pipelines.
pub fn solve_for_slices(
    model: &HamiltonianModel,
    u0: &GridFunction,
    schedule: &[f64],
    opts: &SolverOptions,
) -> Result<SolveResult> {
    forward_solve(model, u0, schedule, opts)
}
