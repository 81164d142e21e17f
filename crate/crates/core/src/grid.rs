//! Truncated uniform grids, sampled functions, interpolation and norms.
//!
//! The computational domain is the box `[-L, L]^dim` with `M` nodes per axis
//! (spacing `h = 2L / (M - 1)`), stored row-major. A [`GridFunction`] carries
//! its own Lipschitz bound and an off-grid extension rule so every consumer
//! (schemes, characteristics, quadrature) evaluates out-of-box queries the
//! same way.

use crate::geometry::{self, Point};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// How a grid function is evaluated outside the box.
///
/// `Linear` continues the boundary cell's multilinear patch (preserving the
/// Lipschitz class), `Constant` clamps the query to the box first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extension {
    Constant,
    Linear,
}

impl Extension {
    pub fn as_str(&self) -> &'static str {
        match self {
            Extension::Constant => "constant",
            Extension::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Extension::Constant),
            "linear" => Ok(Extension::Linear),
            other => Err(Error::Parse(format!("unknown extension rule '{other}'"))),
        }
    }
}

/// Geometry of a truncated uniform grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
}

impl GridSpec {
    /// `dim` in {1, 2}, `half_width > 0`, at least 3 points per axis.
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "half-width must be positive and finite, got {half_width}"
            )));
        }
        if points_per_axis < 3 {
            return Err(Error::InvalidArgument(format!(
                "need at least 3 points per axis, got {points_per_axis}"
            )));
        }
        Ok(GridSpec {
            dim,
            half_width,
            points_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Grid spacing `h = 2L / (M - 1)`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points_per_axis - 1) as f64
    }

    /// Total number of nodes (`M^dim`).
    pub fn node_count(&self) -> usize {
        match self.dim {
            1 => self.points_per_axis,
            _ => self.points_per_axis * self.points_per_axis,
        }
    }

    /// Coordinate of the `i`-th node along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Per-axis indices of a flat node index.
    #[inline]
    pub fn split(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.points_per_axis, idx % self.points_per_axis],
        }
    }

    /// Flat index from per-axis indices (second ignored in 1-D).
    #[inline]
    pub fn flat(&self, i: [usize; 2]) -> usize {
        match self.dim {
            1 => i[0],
            _ => i[0] * self.points_per_axis + i[1],
        }
    }

    /// Coordinates of a node given its flat index.
    #[inline]
    pub fn node(&self, idx: usize) -> Point {
        let ij = self.split(idx);
        match self.dim {
            1 => [self.coord(ij[0]), 0.0],
            _ => [self.coord(ij[0]), self.coord(ij[1])],
        }
    }

    /// True if the node lies on the boundary of the box.
    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        let ij = self.split(idx);
        let last = self.points_per_axis - 1;
        (0..self.dim).any(|k| ij[k] == 0 || ij[k] == last)
    }

    /// The full box as a window.
    pub fn full_window(&self) -> Window {
        Window {
            dim: self.dim,
            lo: [-self.half_width, -self.half_width],
            hi: [self.half_width, self.half_width],
        }
    }

    /// The box shrunk by `margin` on every side. Errors if the margin eats
    /// the whole box.
    pub fn inner_window(&self, margin: f64) -> Result<Window> {
        if !margin.is_finite() || margin < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "window margin must be nonnegative, got {margin}"
            )));
        }
        let l = self.half_width - margin;
        if l <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "margin {margin} leaves an empty window (half-width {})",
                self.half_width
            )));
        }
        Ok(Window {
            dim: self.dim,
            lo: [-l, -l],
            hi: [l, l],
        })
    }
}

/// Axis-aligned sub-box used to window norms and quadrature away from the
/// truncation boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    dim: usize,
    lo: Point,
    hi: Point,
}

impl Window {
    pub fn new(dim: usize, lo: Point, hi: Point) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!(
                "window dimension must be 1 or 2, got {dim}"
            )));
        }
        for k in 0..dim {
            if !(lo[k].is_finite() && hi[k].is_finite()) || lo[k] > hi[k] {
                return Err(Error::InvalidArgument(format!(
                    "window bounds [{}, {}] on axis {k} are empty or non-finite",
                    lo[k], hi[k]
                )));
            }
        }
        Ok(Window { dim, lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> Point {
        self.lo
    }

    pub fn hi(&self) -> Point {
        self.hi
    }

    pub fn contains(&self, x: Point) -> bool {
        (0..self.dim).all(|k| x[k] >= self.lo[k] && x[k] <= self.hi[k])
    }

    /// Intersection with another window on the same dimension; errors if the
    /// intersection is empty.
    pub fn intersect(&self, other: &Window) -> Result<Window> {
        let lo = [self.lo[0].max(other.lo[0]), self.lo[1].max(other.lo[1])];
        let hi = [self.hi[0].min(other.hi[0]), self.hi[1].min(other.hi[1])];
        Window::new(self.dim, lo, hi)
    }
}

/// Finite-difference stencil directions for second differences.
///
/// Axis directions step by `h` along a coordinate; the two diagonal
/// directions (2-D only) step by `h * (1, +-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StencilDir {
    Axis0,
    Axis1,
    DiagUp,
    DiagDown,
}

impl StencilDir {
    /// All directions applicable in the given dimension.
    pub fn all(dim: usize) -> &'static [StencilDir] {
        match dim {
            1 => &[StencilDir::Axis0],
            _ => &[
                StencilDir::Axis0,
                StencilDir::Axis1,
                StencilDir::DiagUp,
                StencilDir::DiagDown,
            ],
        }
    }

    /// Index offsets of the stencil step.
    pub fn offset(&self) -> [isize; 2] {
        match self {
            StencilDir::Axis0 => [1, 0],
            StencilDir::Axis1 => [0, 1],
            StencilDir::DiagUp => [1, 1],
            StencilDir::DiagDown => [1, -1],
        }
    }

    /// The step vector scaled by the grid spacing.
    pub fn step(&self, h: f64) -> Point {
        let o = self.offset();
        [h * o[0] as f64, h * o[1] as f64]
    }

    pub fn name(&self) -> &'static str {
        match self {
            StencilDir::Axis0 => "axis0",
            StencilDir::Axis1 => "axis1",
            StencilDir::DiagUp => "diag+",
            StencilDir::DiagDown => "diag-",
        }
    }
}

/// Relative slack allowed between the declared Lipschitz bound and the
/// measured maximal edge slope.
const LIP_SLACK: f64 = 1e-9;

/// A scalar function sampled on a [`GridSpec`], together with a declared
/// Lipschitz bound and an off-grid extension rule.
#[derive(Clone, Debug)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
    lip_bound: f64,
    extension: Extension,
}

impl GridFunction {
    /// Build from node values with a declared Lipschitz bound. Fails if any
    /// value is non-finite, the length is wrong, or the measured edge slope
    /// exceeds the declared bound beyond slack.
    pub fn new(
        spec: GridSpec,
        values: Vec<f64>,
        lip_bound: f64,
        extension: Extension,
    ) -> Result<Self> {
        let f = Self::from_values(spec, values, extension)?;
        if !lip_bound.is_finite() || lip_bound < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "Lipschitz bound must be nonnegative, got {lip_bound}"
            )));
        }
        if f.lip_bound > lip_bound * (1.0 + LIP_SLACK) + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "measured edge slope {:.6e} exceeds declared Lipschitz bound {lip_bound:.6e}",
                f.lip_bound
            )));
        }
        Ok(GridFunction { lip_bound, ..f })
    }

    /// Build from node values, measuring the Lipschitz bound as the maximal
    /// edge slope.
    pub fn from_values(spec: GridSpec, values: Vec<f64>, extension: Extension) -> Result<Self> {
        if values.len() != spec.node_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} node values, got {}",
                spec.node_count(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid values must be finite, found {v}"
            )));
        }
        let mut f = GridFunction {
            spec,
            values,
            lip_bound: 0.0,
            extension,
        };
        f.lip_bound = f.measured_lip();
        Ok(f)
    }

    /// Sample an analytic function at the nodes (Lipschitz bound measured).
    pub fn sample(
        spec: GridSpec,
        extension: Extension,
        f: impl Fn(Point) -> f64,
    ) -> Result<Self> {
        let values = (0..spec.node_count()).map(|i| f(spec.node(i))).collect();
        Self::from_values(spec, values, extension)
    }

    /// Replace the measured Lipschitz bound by a (larger) declared one.
    pub fn with_lip_bound(mut self, lip_bound: f64) -> Result<Self> {
        if !lip_bound.is_finite() || lip_bound + 1e-12 < self.measured_lip() / (1.0 + LIP_SLACK) {
            return Err(Error::InvalidArgument(format!(
                "declared bound {lip_bound} is below the measured edge slope {:.6e}",
                self.measured_lip()
            )));
        }
        self.lip_bound = lip_bound.max(self.lip_bound);
        Ok(self)
    }

    /// Constant function.
    pub fn constant(spec: GridSpec, c: f64) -> Result<Self> {
        Self::from_values(spec, vec![c; spec.node_count()], Extension::Linear)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn lip_bound(&self) -> f64 {
        self.lip_bound
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    /// Maximal absolute slope over grid edges (axis-aligned neighbor pairs).
    pub fn measured_lip(&self) -> f64 {
        let m = self.spec.points_per_axis;
        let h = self.spec.spacing();
        let mut lip = 0.0f64;
        match self.spec.dim {
            1 => {
                for i in 1..m {
                    lip = lip.max((self.values[i] - self.values[i - 1]).abs());
                }
            }
            _ => {
                for i in 0..m {
                    for j in 0..m {
                        let idx = i * m + j;
                        if i + 1 < m {
                            lip = lip.max((self.values[idx + m] - self.values[idx]).abs());
                        }
                        if j + 1 < m {
                            lip = lip.max((self.values[idx + 1] - self.values[idx]).abs());
                        }
                    }
                }
            }
        }
        lip / h
    }

    /// Locate the cell and local coordinate along one axis. For the linear
    /// extension the local coordinate is allowed outside `[0, 1]`, which
    /// continues the boundary cell's linear patch.
    #[inline]
    fn locate_axis(&self, x: f64) -> (usize, f64) {
        let l = self.spec.half_width;
        let h = self.spec.spacing();
        let xq = match self.extension {
            Extension::Constant => x.clamp(-l, l),
            Extension::Linear => x,
        };
        let raw = (xq + l) / h;
        let cell = (raw.floor() as isize).clamp(0, self.spec.points_per_axis as isize - 2) as usize;
        let theta = raw - cell as f64;
        match self.extension {
            Extension::Constant => (cell, theta.clamp(0.0, 1.0)),
            Extension::Linear => (cell, theta),
        }
    }

    /// Multilinear interpolation with the configured off-grid extension.
    pub fn interpolate(&self, x: Point) -> f64 {
        debug_assert!(geometry::is_finite(self.spec.dim, x));
        let (c0, t0) = self.locate_axis(x[0]);
        match self.spec.dim {
            1 => {
                let a = self.values[c0];
                let b = self.values[c0 + 1];
                a + t0 * (b - a)
            }
            _ => {
                let (c1, t1) = self.locate_axis(x[1]);
                let m = self.spec.points_per_axis;
                let v00 = self.values[c0 * m + c1];
                let v01 = self.values[c0 * m + c1 + 1];
                let v10 = self.values[(c0 + 1) * m + c1];
                let v11 = self.values[(c0 + 1) * m + c1 + 1];
                let lo = v00 + t1 * (v01 - v00);
                let hi = v10 + t1 * (v11 - v10);
                lo + t0 * (hi - lo)
            }
        }
    }

    /// Nodewise gradient: central differences in the interior, one-sided at
    /// the boundary. Nodes where the one-sided slopes along some axis
    /// disagree by more than `kappa = 10 h lip_bound` are flagged as kinks.
    pub fn gradient(&self) -> VectorField {
        let spec = self.spec;
        let m = spec.points_per_axis;
        let h = spec.spacing();
        let kappa = 10.0 * h * self.lip_bound + 1e-12;
        let n = spec.node_count();
        let mut comps = vec![vec![0.0f64; n]; spec.dim];
        let mut kink = vec![false; n];
        for idx in 0..n {
            let ij = spec.split(idx);
            for k in 0..spec.dim {
                let stride = if spec.dim == 1 {
                    1
                } else if k == 0 {
                    m
                } else {
                    1
                };
                let i = ij[k];
                let (slope, is_kink) = if i == 0 {
                    ((self.values[idx + stride] - self.values[idx]) / h, false)
                } else if i == m - 1 {
                    ((self.values[idx] - self.values[idx - stride]) / h, false)
                } else {
                    let fwd = (self.values[idx + stride] - self.values[idx]) / h;
                    let bwd = (self.values[idx] - self.values[idx - stride]) / h;
                    (0.5 * (fwd + bwd), (fwd - bwd).abs() > kappa)
                };
                comps[k][idx] = slope;
                kink[idx] |= is_kink;
            }
        }
        VectorField { spec, comps, kink }
    }

    /// Raw second difference `f(x + he) + f(x - he) - 2 f(x)` at a node.
    /// Errors when the stencil leaves the grid.
    pub fn second_difference(&self, idx: usize, dir: StencilDir) -> Result<f64> {
        let spec = self.spec;
        if spec.dim == 1 && dir != StencilDir::Axis0 {
            return Err(Error::InvalidArgument(format!(
                "direction {} is not available in one dimension",
                dir.name()
            )));
        }
        let m = spec.points_per_axis as isize;
        let ij = spec.split(idx);
        let off = dir.offset();
        let plus = [ij[0] as isize + off[0], ij[1] as isize + off[1]];
        let minus = [ij[0] as isize - off[0], ij[1] as isize - off[1]];
        let inside = |p: [isize; 2]| (0..spec.dim).all(|k| p[k] >= 0 && p[k] < m);
        if !inside(plus) || !inside(minus) {
            return Err(Error::Stencil {
                node: idx,
                dir: dir.name(),
            });
        }
        let at = |p: [isize; 2]| self.values[spec.flat([p[0] as usize, p[1] as usize])];
        Ok(at(plus) + at(minus) - 2.0 * self.values[idx])
    }

    /// Nodewise map; the result's Lipschitz bound is re-measured.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridFunction> {
        GridFunction::from_values(
            self.spec,
            self.values.iter().map(|&v| f(v)).collect(),
            self.extension,
        )
    }

    /// Nodewise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        if self.spec != other.spec {
            return Err(Error::InvalidArgument(
                "grid functions live on different grids".into(),
            ));
        }
        GridFunction::from_values(
            self.spec,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            self.extension,
        )
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Result<GridFunction> {
        self.map(|v| s * v)
    }

    pub fn negate(&self) -> Result<GridFunction> {
        self.scale(-1.0)
    }
}

/// Gradient-like vector field on a grid, one value vector per axis, plus a
/// shared kink mask (true where one-sided differences disagree along some
/// axis).
#[derive(Clone, Debug)]
pub struct VectorField {
    spec: GridSpec,
    comps: Vec<Vec<f64>>,
    kink: Vec<bool>,
}

impl VectorField {
    pub fn new(spec: GridSpec, comps: Vec<Vec<f64>>, kink: Vec<bool>) -> Result<Self> {
        if comps.len() != spec.dim() || kink.len() != spec.node_count() {
            return Err(Error::InvalidArgument(
                "vector field component/mask lengths do not match the grid".into(),
            ));
        }
        for c in &comps {
            if c.len() != spec.node_count() {
                return Err(Error::InvalidArgument(
                    "vector field component length does not match the grid".into(),
                ));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "vector field values must be finite".into(),
                ));
            }
        }
        Ok(VectorField { spec, comps, kink })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.comps[k]
    }

    pub fn kink_mask(&self) -> &[bool] {
        &self.kink
    }

    /// Vector value at a node.
    #[inline]
    pub fn at(&self, idx: usize) -> Point {
        match self.spec.dim() {
            1 => [self.comps[0][idx], 0.0],
            _ => [self.comps[0][idx], self.comps[1][idx]],
        }
    }

    /// Multilinear interpolation of each component (queries clamped to the
    /// box; gradient fields carry no meaningful extension).
    pub fn interpolate(&self, x: Point) -> Point {
        let spec = self.spec;
        let l = spec.half_width();
        let h = spec.spacing();
        let m = spec.points_per_axis();
        let mut cell = [0usize; 2];
        let mut theta = [0.0f64; 2];
        for k in 0..spec.dim() {
            let raw = ((x[k].clamp(-l, l)) + l) / h;
            cell[k] = (raw.floor() as isize).clamp(0, m as isize - 2) as usize;
            theta[k] = (raw - cell[k] as f64).clamp(0.0, 1.0);
        }
        let mut out = [0.0f64; 2];
        for k in 0..spec.dim() {
            let c = &self.comps[k];
            out[k] = match spec.dim() {
                1 => {
                    let a = c[cell[0]];
                    let b = c[cell[0] + 1];
                    a + theta[0] * (b - a)
                }
                _ => {
                    let v00 = c[cell[0] * m + cell[1]];
                    let v01 = c[cell[0] * m + cell[1] + 1];
                    let v10 = c[(cell[0] + 1) * m + cell[1]];
                    let v11 = c[(cell[0] + 1) * m + cell[1] + 1];
                    let lo = v00 + theta[1] * (v01 - v00);
                    let hi = v10 + theta[1] * (v11 - v10);
                    lo + theta[0] * (hi - lo)
                }
            };
        }
        out
    }
}

/// Sup, L1 and L2 norms over a window (trapezoidal quadrature).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Norms {
    pub sup: f64,
    pub l1: f64,
    pub l2: f64,
}

/// Nodes of `spec` inside the window, each with its trapezoidal quadrature
/// weight (already scaled by `h^dim`). Boundary-of-window nodes get half
/// weight per axis. Errors if the window contains no node or is not a subset
/// of the box.
pub fn window_quadrature(spec: &GridSpec, w: &Window) -> Result<Vec<(usize, f64)>> {
    if w.dim() != spec.dim() {
        return Err(Error::InvalidArgument(
            "window dimension does not match the grid".into(),
        ));
    }
    let l = spec.half_width();
    let h = spec.spacing();
    let tol = 1e-9 * h;
    for k in 0..spec.dim() {
        if w.lo()[k] < -l - tol || w.hi()[k] > l + tol {
            return Err(Error::InvalidArgument(format!(
                "window [{}, {}] exceeds the box [-{l}, {l}] on axis {k}",
                w.lo()[k],
                w.hi()[k]
            )));
        }
    }
    let m = spec.points_per_axis();
    let mut ranges = [(0usize, 0usize); 2];
    for k in 0..spec.dim() {
        let a = ((w.lo()[k] + l) / h - 1e-9).ceil().max(0.0) as usize;
        let b = (((w.hi()[k] + l) / h + 1e-9).floor() as isize).min(m as isize - 1);
        if b < a as isize {
            return Err(Error::InvalidArgument(format!(
                "window contains no grid node on axis {k}"
            )));
        }
        ranges[k] = (a, b as usize);
    }
    let axis_weight = |range: (usize, usize), i: usize| -> f64 {
        if range.0 == range.1 {
            // Degenerate (single-node) axis: zero measure.
            0.0
        } else if i == range.0 || i == range.1 {
            0.5
        } else {
            1.0
        }
    };
    let cell = h.powi(spec.dim() as i32);
    let mut out = Vec::new();
    match spec.dim() {
        1 => {
            for i in ranges[0].0..=ranges[0].1 {
                out.push((i, axis_weight(ranges[0], i) * cell));
            }
        }
        _ => {
            for i in ranges[0].0..=ranges[0].1 {
                let wi = axis_weight(ranges[0], i);
                for j in ranges[1].0..=ranges[1].1 {
                    out.push((spec.flat([i, j]), wi * axis_weight(ranges[1], j) * cell));
                }
            }
        }
    }
    Ok(out)
}

/// Norms of a grid function over a window.
pub fn norms(f: &GridFunction, w: &Window) -> Result<Norms> {
    let quad = window_quadrature(f.spec(), w)?;
    let mut sup = 0.0f64;
    let mut l1 = 0.0;
    let mut l2_sq = 0.0;
    for (idx, weight) in quad {
        let v = f.value(idx);
        sup = sup.max(v.abs());
        l1 += weight * v.abs();
        l2_sq += weight * v * v;
    }
    Ok(Norms {
        sup,
        l1,
        l2: l2_sq.sqrt(),
    })
}

/// Windowed L2 inner product of two grid functions on the same grid.
pub fn inner_product(f: &GridFunction, g: &GridFunction, w: &Window) -> Result<f64> {
    if f.spec() != g.spec() {
        return Err(Error::InvalidArgument(
            "inner product requires a common grid".into(),
        ));
    }
    let quad = window_quadrature(f.spec(), w)?;
    Ok(quad
        .into_iter()
        .map(|(idx, weight)| weight * f.value(idx) * g.value(idx))
        .sum())
}

/// Sup distance between two grid functions over a window.
pub fn sup_distance(f: &GridFunction, g: &GridFunction, w: &Window) -> Result<f64> {
    if f.spec() != g.spec() {
        return Err(Error::InvalidArgument(
            "sup distance requires a common grid".into(),
        ));
    }
    let quad = window_quadrature(f.spec(), w)?;
    Ok(quad
        .into_iter()
        .map(|(idx, _)| (f.value(idx) - g.value(idx)).abs())
        .fold(0.0f64, f64::max))
}
