//! Linearized transport along a solved Hamilton-Jacobi flow: the transport
//! coefficient `a(t, x) = H_p(x, grad u(t, x))`, one-sided Lipschitz
//! estimation, grid duality solutions, backward particle transport, and the
//! measure extension at time zero where characteristics collapse into atoms.
//!
//! The well-posedness theory behind these operations covers one spatial
//! dimension with a general convex model, or any dimension for the
//! shifted-quadratic family `|p|^2 + f(x)`; every entry point enforces that
//! validity domain as a hard error rather than silently computing outside it.

use crate::characteristics::{backtrack, default_backtrack_steps, phi_map, TrajectoryPair};
use crate::geometry::{self, Point};
use crate::grid::{Extension, GridFunction, GridSpec, VectorField};
use crate::hamiltonian::{FamilyKind, HamiltonianModel};
use crate::solver::{forward_solve, SolverOptions};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

/// Particles closer than this fraction of `h` are linked into one cluster.
pub const ATOM_LINK_FACTOR: f64 = 0.5;
/// A linked cluster becomes an atom only if its bounding-box diagonal stays
/// within this many grid cells (collapsed characteristics land together;
/// regularly spaced feet never qualify).
pub const ATOM_DIAMETER_FACTOR: f64 = 2.0;
/// Minimum number of collapsed particles that form an atom.
pub const ATOM_MIN_PARTICLES: usize = 3;
/// Default number of random node pairs sampled by the 2D OSLC estimate.
pub const DEFAULT_OSLC_SAMPLES: usize = 100_000;

/// A signed measure represented by weighted particles plus atoms.
///
/// Particles carry signed weights (densities times cell volume); atoms are
/// accumulation points produced by collapsing characteristics.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    dim: usize,
    particles: Vec<(Point, f64)>,
    atoms: Vec<(Point, f64)>,
}

impl DiscreteMeasure {
    pub fn new(
        dim: usize,
        particles: Vec<(Point, f64)>,
        atoms: Vec<(Point, f64)>,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        for (pos, w) in particles.iter().chain(&atoms) {
            if !(geometry::is_finite(dim, *pos) && w.is_finite()) {
                return Err(Error::InvalidArgument(
                    "measure entries must be finite".into(),
                ));
            }
        }
        Ok(DiscreteMeasure {
            dim,
            particles,
            atoms,
        })
    }

    pub fn empty(dim: usize) -> Self {
        DiscreteMeasure {
            dim,
            particles: Vec::new(),
            atoms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particles(&self) -> &[(Point, f64)] {
        &self.particles
    }

    pub fn atoms(&self) -> &[(Point, f64)] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty() && self.atoms.is_empty()
    }

    /// Signed total mass: sum of weights plus atom masses.
    pub fn total_mass(&self) -> f64 {
        self.particles
            .iter()
            .chain(&self.atoms)
            .map(|(_, w)| *w)
            .sum()
    }

    /// Total variation: sum of absolute weights and masses.
    pub fn total_variation(&self) -> f64 {
        self.particles
            .iter()
            .chain(&self.atoms)
            .map(|(_, w)| w.abs())
            .sum()
    }

    /// Deposit onto a grid as a density through the linear hat
    /// (cloud-in-cell) kernel: mass is conserved exactly, first moments to
    /// second order. Positions outside the box are clamped to its edge.
    /// Deposition is sequential in storage order, so results are
    /// bit-reproducible.
    pub fn deposit(&self, spec: &GridSpec) -> Result<GridFunction> {
        if spec.dim() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "measure dimension {} does not match grid dimension {}",
                self.dim,
                spec.dim()
            )));
        }
        let m = spec.points_per_axis();
        let h = spec.spacing();
        let inv_cell = 1.0 / h.powi(spec.dim() as i32);
        let mut values = vec![0.0f64; spec.node_count()];
        let locate = |coord: f64| -> (usize, f64) {
            let xi = ((coord + spec.half_width()) / h).clamp(0.0, (m - 1) as f64);
            let i = (xi.floor() as usize).min(m - 2);
            (i, xi - i as f64)
        };
        for &(pos, w) in self.particles.iter().chain(&self.atoms) {
            let (i, ti) = locate(pos[0]);
            match self.dim {
                1 => {
                    values[i] += w * (1.0 - ti) * inv_cell;
                    values[i + 1] += w * ti * inv_cell;
                }
                _ => {
                    let (j, tj) = locate(pos[1]);
                    values[i * m + j] += w * (1.0 - ti) * (1.0 - tj) * inv_cell;
                    values[i * m + j + 1] += w * (1.0 - ti) * tj * inv_cell;
                    values[(i + 1) * m + j] += w * ti * (1.0 - tj) * inv_cell;
                    values[(i + 1) * m + j + 1] += w * ti * tj * inv_cell;
                }
            }
        }
        GridFunction::from_values(*spec, values, Extension::Constant)
    }
}

/// Whether the duality-transport theory covers this model: one dimension, or
/// the shifted-quadratic family (including the standard `|p|^2`).
pub fn check_duality_validity(model: &HamiltonianModel) -> Result<()> {
    if model.dim() == 1 {
        return Ok(());
    }
    match model.family_kind() {
        FamilyKind::QuadraticShifted => Ok(()),
        FamilyKind::QuadraticXIndep => {
            let a = model
                .quadratic_matrix()
                .expect("x-independent quadratic models carry their matrix");
            let is_standard = (0..model.dim()).all(|i| {
                (0..model.dim()).all(|j| {
                    let want = if i == j { 2.0 } else { 0.0 };
                    (a.entry(i, j) - want).abs() <= 1e-12
                })
            });
            if is_standard {
                Ok(())
            } else {
                Err(Error::ValidityDomain(
                    "duality transport in several dimensions requires the Hamiltonian \
                     |p|^2 + f(x); anisotropic quadratic models are outside the \
                     well-posedness theory"
                        .into(),
                ))
            }
        }
        FamilyKind::Custom => Err(Error::ValidityDomain(
            "duality transport in several dimensions requires the Hamiltonian \
             |p|^2 + f(x); custom models are only covered in one dimension"
                .into(),
        )),
    }
}

/// The transport coefficient of the linearized equation:
/// `a(x) = H_p(x, grad u(x))` nodewise, kink mask inherited from the
/// discrete gradient.
pub fn transport_coefficient(
    model: &HamiltonianModel,
    u: &GridFunction,
) -> Result<VectorField> {
    let spec = *u.spec();
    if model.dim() != spec.dim() {
        return Err(Error::InvalidArgument(format!(
            "model dimension {} does not match grid dimension {}",
            model.dim(),
            spec.dim()
        )));
    }
    let grad = u.gradient();
    let dim = spec.dim();
    let per_node: Vec<Point> = (0..spec.node_count())
        .into_par_iter()
        .map(|idx| model.grad_p(spec.node(idx), grad.at(idx)))
        .collect();
    let mut comps = vec![Vec::with_capacity(per_node.len()); dim];
    for v in &per_node {
        for k in 0..dim {
            comps[k].push(v[k]);
        }
    }
    VectorField::new(spec, comps, grad.kink_mask().to_vec())
}

/// Estimate the one-sided Lipschitz constant of a velocity field: the
/// largest `<a(y) - a(x), y - x> / |y - x|^2` over node pairs. In one
/// dimension every pair is checked; in two dimensions all adjacent pairs
/// plus `extra_samples` seeded random pairs.
pub fn oslc_estimate(a: &VectorField, extra_samples: usize, seed: u64) -> f64 {
    let spec = *a.spec();
    let dim = spec.dim();
    let n = spec.node_count();
    let ratio = |i: usize, j: usize| -> f64 {
        let (xi, xj) = (spec.node(i), spec.node(j));
        let d = geometry::sub(xj, xi);
        let dd = geometry::norm_sq(dim, d);
        if dd == 0.0 {
            return f64::NEG_INFINITY;
        }
        geometry::dot(dim, geometry::sub(a.at(j), a.at(i)), d) / dd
    };
    let mut best = f64::NEG_INFINITY;
    match dim {
        1 => {
            for i in 0..n {
                for j in (i + 1)..n {
                    best = best.max(ratio(i, j));
                }
            }
        }
        _ => {
            let m = spec.points_per_axis();
            for i in 0..m {
                for j in 0..m {
                    let idx = i * m + j;
                    if i + 1 < m {
                        best = best.max(ratio(idx, (i + 1) * m + j));
                    }
                    if j + 1 < m {
                        best = best.max(ratio(idx, idx + 1));
                    }
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..extra_samples {
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(0..n);
                if i != j {
                    best = best.max(ratio(i, j));
                }
            }
        }
    }
    best
}

/// Duality solution slices `v(t, .)` on the schedule times.
#[derive(Clone, Debug)]
pub struct DualityField {
    pub times: Vec<f64>,
    pub slices: Vec<GridFunction>,
}

impl DualityField {
    /// The slice at schedule time `t` (matched within 1e-9).
    pub fn at_time(&self, t: f64) -> Option<&GridFunction> {
        self.times
            .iter()
            .position(|&v| (v - t).abs() <= 1e-9)
            .map(|k| &self.slices[k])
    }
}

/// The duality solution of the linearized transport equation with initial
/// data `w`: at each schedule time, the composition of `w` with the foot map
/// of the solved slice. Schedules start at 0, where the slice is `w` itself.
pub fn forward_duality_solution(
    model: &HamiltonianModel,
    u0: &GridFunction,
    w: &GridFunction,
    schedule: &[f64],
    opts: &SolverOptions,
) -> Result<DualityField> {
    check_duality_validity(model)?;
    if w.spec() != u0.spec() {
        return Err(Error::InvalidArgument(
            "initial perturbation grid does not match the solution grid".into(),
        ));
    }
    let solved = forward_solve(model, u0, schedule, opts)?;
    let mut times = Vec::with_capacity(schedule.len());
    let mut slices = Vec::with_capacity(schedule.len());
    for (t, u_t) in &solved.slices {
        let v = if *t <= 1e-12 {
            w.clone()
        } else {
            let phi = phi_map(model, u_t, *t)?;
            crate::characteristics::gateaux_derivative(&phi, w)?
        };
        times.push(*t);
        slices.push(v);
    }
    Ok(DualityField { times, slices })
}

/// Shared backbone of the backward-transport operations: solve to `tau`,
/// seed one particle per support node of `pi_t` (weight `density * h^dim`),
/// and integrate every characteristic back to time zero.
fn backward_trajectories(
    model: &HamiltonianModel,
    u0: &GridFunction,
    tau: f64,
    pi_t: &GridFunction,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<TrajectoryPair>)> {
    check_duality_validity(model)?;
    if pi_t.spec() != u0.spec() {
        return Err(Error::InvalidArgument(
            "terminal density grid does not match the solution grid".into(),
        ));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "transport horizon must be positive, got {tau}"
        )));
    }
    let spec = *u0.spec();
    let h = spec.spacing();
    let u_tau = forward_solve(model, u0, &[0.0, tau], opts)?.into_last();
    // Support must sit deep enough inside the box that no characteristic
    // reaches the truncation boundary.
    let margin = model.p_speed_bound(u_tau.lip_bound()) * tau + 2.0 * h;
    let window = spec.inner_window(margin)?;
    let cell = h.powi(spec.dim() as i32);
    let mut seeds = Vec::new();
    for idx in 0..spec.node_count() {
        let weight = pi_t.value(idx) * cell;
        if weight != 0.0 {
            if !window.contains(spec.node(idx)) {
                return Err(Error::InvalidArgument(format!(
                    "terminal density must vanish within distance {margin:.4} of the \
                     boundary (support node at {:?})",
                    spec.node(idx)
                )));
            }
            seeds.push((idx, weight));
        }
    }
    let grad = u_tau.gradient();
    let n_steps = default_backtrack_steps(tau, h);
    // Kink nodes still transport: the central-difference gradient at a
    // symmetric shock is the generalized (Filippov) velocity, which carries
    // the shock trajectory itself.
    let trajectories: Vec<TrajectoryPair> = seeds
        .par_iter()
        .map(|&(idx, _)| {
            backtrack(
                model,
                spec.node(idx),
                grad.at(idx),
                tau,
                n_steps,
                spec.half_width(),
            )
        })
        .collect::<Result<_>>()?;
    let weights = seeds.iter().map(|&(_, w)| w).collect();
    Ok((weights, trajectories))
}

/// Backward reversible transport: the terminal density `pi_t` at time `tau`
/// carried to each earlier sample time `s` by the characteristic flow.
/// Sample times must be strictly increasing inside `(0, tau]`. Total mass is
/// conserved exactly (weights never change).
pub fn backward_reversible(
    model: &HamiltonianModel,
    u0: &GridFunction,
    tau: f64,
    pi_t: &GridFunction,
    sample_times: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<(f64, DiscreteMeasure)>> {
    if sample_times.is_empty() {
        return Err(Error::InvalidArgument("empty sample schedule".into()));
    }
    for w in sample_times.windows(2) {
        if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidArgument(
                "sample times must be strictly increasing".into(),
            ));
        }
    }
    if sample_times[0] <= 0.0 || sample_times[sample_times.len() - 1] > tau + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "sample times must lie in (0, {tau}]"
        )));
    }
    let (weights, trajectories) = backward_trajectories(model, u0, tau, pi_t, opts)?;
    let dim = u0.spec().dim();
    let mut out = Vec::with_capacity(sample_times.len());
    for &s in sample_times {
        let particles: Vec<(Point, f64)> = trajectories
            .iter()
            .zip(&weights)
            .map(|(traj, &w)| (traj.sample(s).0, w))
            .collect();
        out.push((s, DiscreteMeasure::new(dim, particles, Vec::new())?));
    }
    Ok(out)
}

/// The measure extension at time zero: particle feet of the backward
/// transport, with collapsed characteristic clusters converted to atoms.
///
/// Clustering links feet within [`ATOM_LINK_FACTOR`]` * h` of each other; a
/// linked cluster becomes an atom only if it contains at least
/// [`ATOM_MIN_PARTICLES`] feet inside a bounding box of diagonal at most
/// [`ATOM_DIAMETER_FACTOR`]` * h` (position: magnitude-weighted mean; mass:
/// signed sum). Everything else stays particulate.
pub fn extend_measure_at_zero(
    model: &HamiltonianModel,
    u0: &GridFunction,
    tau: f64,
    pi_t: &GridFunction,
    opts: &SolverOptions,
) -> Result<DiscreteMeasure> {
    let (weights, trajectories) = backward_trajectories(model, u0, tau, pi_t, opts)?;
    let feet: Vec<Point> = trajectories.iter().map(|t| t.foot()).collect();
    let spec = u0.spec();
    cluster_into_atoms(spec.dim(), &feet, &weights, spec.spacing())
}

/// Union-find clustering of feet into atoms (see `extend_measure_at_zero`).
fn cluster_into_atoms(
    dim: usize,
    positions: &[Point],
    weights: &[f64],
    h: f64,
) -> Result<DiscreteMeasure> {
    let n = positions.len();
    let link = ATOM_LINK_FACTOR * h;
    // Spatial hash with cell size `link`: only neighbor cells can hold
    // linkable partners.
    let key = |p: Point| -> (i64, i64) {
        (
            (p[0] / link).floor() as i64,
            if dim == 2 {
                (p[1] / link).floor() as i64
            } else {
                0
            },
        )
    };
    let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in positions.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i);
    }
    // Union-find with minimum-index roots for determinism.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let j_range = if dim == 2 { -1..=1 } else { 0..=0 };
    for (i, &p) in positions.iter().enumerate() {
        let (ci, cj) = key(p);
        for di in -1..=1 {
            for dj in j_range.clone() {
                if let Some(bucket) = cells.get(&(ci + di, cj + dj)) {
                    for &other in bucket {
                        if other <= i {
                            continue;
                        }
                        if geometry::norm(dim, geometry::sub(positions[other], p)) <= link {
                            let (a, b) = (find(&mut parent, i), find(&mut parent, other));
                            if a != b {
                                let (lo, hi) = (a.min(b), a.max(b));
                                parent[hi] = lo;
                            }
                        }
                    }
                }
            }
        }
    }
    // Collect clusters by root, in ascending root order.
    let mut clusters: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut root_slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_slot.get(&r) {
            Some(&slot) => clusters[slot].1.push(i),
            None => {
                root_slot.insert(r, clusters.len());
                clusters.push((r, vec![i]));
            }
        }
    }
    clusters.sort_by_key(|(root, _)| *root);

    let mut particles = Vec::new();
    let mut atoms = Vec::new();
    for (_, members) in clusters {
        let is_atom = members.len() >= ATOM_MIN_PARTICLES && {
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            for &i in &members {
                for k in 0..dim {
                    lo[k] = lo[k].min(positions[i][k]);
                    hi[k] = hi[k].max(positions[i][k]);
                }
            }
            let mut diag = 0.0;
            for k in 0..dim {
                diag += (hi[k] - lo[k]) * (hi[k] - lo[k]);
            }
            diag.sqrt() <= ATOM_DIAMETER_FACTOR * h * (1.0 + 1e-9)
        };
        if is_atom {
            let mut mass = 0.0;
            let mut abs_mass = 0.0;
            let mut center = [0.0f64, 0.0];
            for &i in &members {
                mass += weights[i];
                abs_mass += weights[i].abs();
                for k in 0..dim {
                    center[k] += weights[i].abs() * positions[i][k];
                }
            }
            if abs_mass > 0.0 {
                for c in center.iter_mut() {
                    *c /= abs_mass;
                }
            } else {
                center = positions[members[0]];
            }
            atoms.push((center, mass));
        } else {
            for &i in &members {
                particles.push((positions[i], weights[i]));
            }
        }
    }
    DiscreteMeasure::new(dim, particles, atoms)
}

/// Pairing of a measure against a grid function: weighted evaluation at
/// every particle and atom position.
pub fn measure_pairing(m: &DiscreteMeasure, v: &GridFunction) -> f64 {
    m.particles()
        .iter()
        .chain(m.atoms())
        .map(|&(pos, w)| w * v.interpolate(pos))
        .sum()
}

/// The duality pairing series and its drift.
#[derive(Clone, Debug, Serialize)]
pub struct PairingSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `(max - min) / max|value|`; zero when all values are negligible.
    pub max_relative_drift: f64,
}

/// Pair a duality field against transported measures at matching times.
/// The pairing is constant in exact arithmetic; the reported drift measures
/// how far the discretization strays.
pub fn duality_pairing(
    v: &DualityField,
    measures: &[(f64, DiscreteMeasure)],
) -> Result<PairingSeries> {
    let mut times = Vec::with_capacity(measures.len());
    let mut values = Vec::with_capacity(measures.len());
    for (s, m) in measures {
        let slice = v.at_time(*s).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "no duality slice at time {s} (schedule mismatch)"
            ))
        })?;
        times.push(*s);
        values.push(measure_pairing(m, slice));
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_relative_drift = if scale < 1e-14 {
        0.0
    } else {
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        (hi - lo) / scale
    };
    Ok(PairingSeries {
        times,
        values,
        max_relative_drift,
    })
}
