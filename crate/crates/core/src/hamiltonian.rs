//! Hamiltonian families, their derivatives, and the Legendre transform.
//!
//! Three families are supported:
//!
//! * `QuadraticXIndep`: `H(p) = <A p, p> / 2` with `A` symmetric positive
//!   definite — closed-form conjugate `H*(q) = <A^-1 q, q> / 2`;
//! * `QuadraticShifted`: `H(x, p) = |p|^2 + f(x)` with a bounded Lipschitz
//!   potential `f` — closed-form conjugate `|q|^2 / 4 - f(x)`;
//! * `Custom`: user-supplied evaluator, optional analytic derivatives
//!   (central finite differences with step `1e-5` otherwise), numeric
//!   conjugate by lattice search plus golden-section refinement.
//!
//! A model also carries its structural constants — the uniform convexity
//! lower bound `c0`, the boundedness constant `C0` (`H >= -C0`,
//! `H(x, 0) <= C0`), the spatial Lipschitz bound on `H_x`, and an affine
//! gradient-speed bound `R -> slope * R + offset` dominating `|H_p|` on
//! `{|p| <= R}`. [`HamiltonianModel::check_hypotheses`] verifies the declared
//! constants against sampled values.

use crate::geometry::{self, Point, SymMat};
use crate::grid::{Extension, GridFunction, VectorField};
use crate::{Error, Result};
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// Finite-difference step for fallback derivatives of custom Hamiltonians.
pub const FD_STEP: f64 = 1e-5;

/// Value tolerance targeted by the numeric Legendre transform.
pub const LEGENDRE_TOL: f64 = 1e-5;

/// Golden-section iterations used by one-dimensional refinements; enough to
/// shrink a bracket by ~1e-10.
const GOLDEN_ITERS: usize = 48;

type HFn = Arc<dyn Fn(Point, Point) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(Point, Point) -> Point + Send + Sync>;

/// Spatial potential `f` for the shifted-quadratic family.
#[derive(Clone)]
pub enum Potential {
    Zero,
    /// `f(x) = amplitude * prod_k cos(frequency * x_k)`.
    Cosine { amplitude: f64, frequency: f64 },
    /// `f(x) = -depth * exp(-|x|^2 / (2 width^2))`.
    GaussianWell { depth: f64, width: f64 },
    /// Sampled potential; must use the constant off-grid extension so the
    /// boundedness constant stays meaningful. The gradient field is
    /// precomputed at construction.
    Sampled {
        values: GridFunction,
        gradient: VectorField,
    },
}

impl Potential {
    pub fn sampled(values: GridFunction) -> Result<Self> {
        if values.extension() != Extension::Constant {
            return Err(Error::InvalidArgument(
                "sampled potentials must use the constant extension".into(),
            ));
        }
        let gradient = values.gradient();
        Ok(Potential::Sampled { values, gradient })
    }

    pub fn eval(&self, dim: usize, x: Point) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Cosine {
                amplitude,
                frequency,
            } => {
                let mut v = *amplitude;
                for xk in &x[..dim] {
                    v *= (frequency * xk).cos();
                }
                v
            }
            Potential::GaussianWell { depth, width } => {
                -depth * (-geometry::norm_sq(dim, x) / (2.0 * width * width)).exp()
            }
            Potential::Sampled { values, .. } => values.interpolate(x),
        }
    }

    pub fn grad(&self, dim: usize, x: Point) -> Point {
        match self {
            Potential::Zero => [0.0, 0.0],
            Potential::Cosine {
                amplitude,
                frequency,
            } => {
                let mut g = [0.0, 0.0];
                for k in 0..dim {
                    let mut v = -amplitude * frequency * (frequency * x[k]).sin();
                    for j in 0..dim {
                        if j != k {
                            v *= (frequency * x[j]).cos();
                        }
                    }
                    g[k] = v;
                }
                g
            }
            Potential::GaussianWell { depth, width } => {
                let w2 = width * width;
                let e = (-geometry::norm_sq(dim, x) / (2.0 * w2)).exp();
                let mut g = [0.0, 0.0];
                for k in 0..dim {
                    g[k] = depth * x[k] / w2 * e;
                }
                g
            }
            Potential::Sampled { gradient, .. } => gradient.interpolate(x),
        }
    }

    /// Upper bound on `|f|`.
    pub fn sup_abs(&self, dim: usize) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Cosine { amplitude, .. } => amplitude.abs(),
            Potential::GaussianWell { depth, .. } => depth.abs(),
            Potential::Sampled { values, .. } => {
                let _ = dim;
                values.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
        }
    }

    /// Upper bound on `|grad f|`.
    pub fn lip(&self, dim: usize) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Cosine {
                amplitude,
                frequency,
            } => amplitude.abs() * frequency.abs() * (dim as f64).sqrt(),
            Potential::GaussianWell { depth, width } => {
                // max over r of depth * r / w^2 * exp(-r^2 / 2w^2), at r = w.
                depth.abs() / width * (-0.5f64).exp()
            }
            Potential::Sampled { values, .. } => {
                let _ = dim;
                // Edge slopes bound each gradient component; the Euclidean
                // norm is bounded by sqrt(dim) times that.
                values.lip_bound() * (values.spec().dim() as f64).sqrt()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::Cosine {
                amplitude,
                frequency,
            } => write!(f, "Cosine(amplitude={amplitude}, frequency={frequency})"),
            Potential::GaussianWell { depth, width } => {
                write!(f, "GaussianWell(depth={depth}, width={width})")
            }
            Potential::Sampled { values, .. } => {
                write!(f, "Sampled(M={})", values.spec().points_per_axis())
            }
        }
    }
}

/// Ingredients for a custom Hamiltonian.
#[derive(Clone)]
pub struct CustomSpec {
    pub hamiltonian: HFn,
    /// Analytic `H_p`; central finite differences when absent.
    pub grad_p: Option<GradFn>,
    /// Analytic `H_x`; central finite differences when absent.
    pub grad_x: Option<GradFn>,
    /// Declared spatial independence (enables the direct solution formula).
    pub x_independent: bool,
    /// Uniform convexity lower bound `c0 > 0` on the `p`-Hessian.
    pub convexity_lower: f64,
    /// Boundedness constant `C0 >= 0`.
    pub bound_constant: f64,
    /// Bound on `|H_x|`.
    pub x_lipschitz: f64,
    /// Affine gradient-speed bound: `|H_p| <= slope * R + offset` on `|p| <= R`.
    pub p_speed_slope: f64,
    pub p_speed_offset: f64,
}

#[derive(Clone)]
enum Family {
    QuadraticXIndep { a: SymMat, a_inv: SymMat },
    QuadraticShifted { potential: Potential },
    Custom(CustomSpec),
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::QuadraticXIndep { a, .. } => write!(f, "QuadraticXIndep(A={:?})", a),
            Family::QuadraticShifted { potential } => {
                write!(f, "QuadraticShifted(f={potential:?})")
            }
            Family::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Which family a model belongs to (shape only, no payload).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    QuadraticXIndep,
    QuadraticShifted,
    Custom,
}

/// Structural constants carried by every model.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ModelConstants {
    /// Uniform convexity lower bound `c0 > 0`.
    pub convexity_lower: f64,
    /// `C0` with `H >= -C0` and `H(x, 0) <= C0`.
    pub bound_constant: f64,
    /// Bound on `|H_x|`.
    pub x_lipschitz: f64,
    /// `|H_p| <= p_speed_slope * R + p_speed_offset` for `|p| <= R`.
    pub p_speed_slope: f64,
    pub p_speed_offset: f64,
}

/// A convex, coercive Hamiltonian on `R^dim x R^dim`.
///
/// Immutable after construction and safe to share across threads.
#[derive(Clone, Debug)]
pub struct HamiltonianModel {
    dim: usize,
    family: Family,
    constants: ModelConstants,
}

impl HamiltonianModel {
    /// `H(p) = <A p, p> / 2`.
    pub fn quadratic(a: SymMat) -> Self {
        let constants = ModelConstants {
            convexity_lower: a.min_eig(),
            bound_constant: 0.0,
            x_lipschitz: 0.0,
            p_speed_slope: a.op_norm(),
            p_speed_offset: 0.0,
        };
        HamiltonianModel {
            dim: a.dim(),
            family: Family::QuadraticXIndep {
                a,
                a_inv: a.inverse(),
            },
            constants,
        }
    }

    /// The canonical `H(p) = |p|^2` (i.e. `A = 2I`).
    pub fn standard_quadratic(dim: usize) -> Result<Self> {
        Ok(Self::quadratic(SymMat::scaled_identity(dim, 2.0)?))
    }

    /// `H(x, p) = |p|^2 + f(x)`.
    pub fn quadratic_shifted(dim: usize, potential: Potential) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if let Potential::Sampled { values, .. } = &potential {
            if values.spec().dim() != dim {
                return Err(Error::InvalidArgument(
                    "sampled potential dimension does not match the model".into(),
                ));
            }
        }
        let sup = potential.sup_abs(dim);
        let constants = ModelConstants {
            convexity_lower: 2.0,
            bound_constant: sup,
            x_lipschitz: potential.lip(dim),
            p_speed_slope: 2.0,
            p_speed_offset: 0.0,
        };
        Ok(HamiltonianModel {
            dim,
            family: Family::QuadraticShifted { potential },
            constants,
        })
    }

    /// Custom Hamiltonian from evaluator handles and declared constants.
    pub fn custom(dim: usize, spec: CustomSpec) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(spec.convexity_lower.is_finite() && spec.convexity_lower > 0.0) {
            return Err(Error::Hypothesis(format!(
                "uniform convexity bound must be positive, got {}",
                spec.convexity_lower
            )));
        }
        for (name, v) in [
            ("bound constant", spec.bound_constant),
            ("x-Lipschitz bound", spec.x_lipschitz),
            ("gradient speed slope", spec.p_speed_slope),
            ("gradient speed offset", spec.p_speed_offset),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Hypothesis(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        let constants = ModelConstants {
            convexity_lower: spec.convexity_lower,
            bound_constant: spec.bound_constant,
            x_lipschitz: spec.x_lipschitz,
            p_speed_slope: spec.p_speed_slope,
            p_speed_offset: spec.p_speed_offset,
        };
        Ok(HamiltonianModel {
            dim,
            family: Family::Custom(spec),
            constants,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constants(&self) -> &ModelConstants {
        &self.constants
    }

    pub fn family_kind(&self) -> FamilyKind {
        match &self.family {
            Family::QuadraticXIndep { .. } => FamilyKind::QuadraticXIndep,
            Family::QuadraticShifted { .. } => FamilyKind::QuadraticShifted,
            Family::Custom(_) => FamilyKind::Custom,
        }
    }

    /// The coefficient matrix of a quadratic x-independent model.
    pub fn quadratic_matrix(&self) -> Option<SymMat> {
        match &self.family {
            Family::QuadraticXIndep { a, .. } => Some(*a),
            _ => None,
        }
    }

    /// The potential of a shifted-quadratic model.
    pub fn potential(&self) -> Option<&Potential> {
        match &self.family {
            Family::QuadraticShifted { potential } => Some(potential),
            _ => None,
        }
    }

    /// Whether `H` has no explicit `x` dependence (enables the direct
    /// solution formula and exact straight-line characteristics).
    pub fn is_x_independent(&self) -> bool {
        match &self.family {
            Family::QuadraticXIndep { .. } => true,
            Family::QuadraticShifted { potential } => potential.is_zero(),
            Family::Custom(spec) => spec.x_independent,
        }
    }

    /// Evaluate `H(x, p)`.
    pub fn eval(&self, x: Point, p: Point) -> f64 {
        match &self.family {
            Family::QuadraticXIndep { a, .. } => 0.5 * a.quad(p),
            Family::QuadraticShifted { potential } => {
                geometry::norm_sq(self.dim, p) + potential.eval(self.dim, x)
            }
            Family::Custom(spec) => (spec.hamiltonian)(x, p),
        }
    }

    /// `H_p(x, p)`: analytic where available, central differences otherwise.
    pub fn grad_p(&self, x: Point, p: Point) -> Point {
        match &self.family {
            Family::QuadraticXIndep { a, .. } => a.apply(p),
            Family::QuadraticShifted { .. } => geometry::scale(p, 2.0),
            Family::Custom(spec) => {
                if let Some(g) = &spec.grad_p {
                    g(x, p)
                } else {
                    let mut g = [0.0, 0.0];
                    for k in 0..self.dim {
                        let mut hi = p;
                        let mut lo = p;
                        hi[k] += FD_STEP;
                        lo[k] -= FD_STEP;
                        g[k] = ((spec.hamiltonian)(x, hi) - (spec.hamiltonian)(x, lo))
                            / (2.0 * FD_STEP);
                    }
                    g
                }
            }
        }
    }

    /// `H_x(x, p)`.
    pub fn grad_x(&self, x: Point, p: Point) -> Point {
        match &self.family {
            Family::QuadraticXIndep { .. } => [0.0, 0.0],
            Family::QuadraticShifted { potential } => potential.grad(self.dim, x),
            Family::Custom(spec) => {
                if let Some(g) = &spec.grad_x {
                    g(x, p)
                } else {
                    let mut g = [0.0, 0.0];
                    for k in 0..self.dim {
                        let mut hi = x;
                        let mut lo = x;
                        hi[k] += FD_STEP;
                        lo[k] -= FD_STEP;
                        g[k] = ((spec.hamiltonian)(hi, p) - (spec.hamiltonian)(lo, p))
                            / (2.0 * FD_STEP);
                    }
                    g
                }
            }
        }
    }

    /// Legendre transform `H*(x, q) = max_p { <p, q> - H(x, p) }`.
    ///
    /// Closed forms for the quadratic families; for custom models a lattice
    /// search over `|p|_inf <= R_max` with `R_max = (|q| + C_Lip) / c0 + 1`,
    /// refined by per-axis golden sections. Errors if the lattice maximum
    /// sits on the search boundary (declared constants too small).
    pub fn legendre(&self, x: Point, q: Point) -> Result<f64> {
        match &self.family {
            Family::QuadraticXIndep { a_inv, .. } => Ok(0.5 * a_inv.quad(q)),
            Family::QuadraticShifted { potential } => {
                Ok(0.25 * geometry::norm_sq(self.dim, q) - potential.eval(self.dim, x))
            }
            Family::Custom(spec) => self.numeric_legendre(spec, x, q),
        }
    }

    fn numeric_legendre(&self, spec: &CustomSpec, x: Point, q: Point) -> Result<f64> {
        let q_norm = geometry::norm(self.dim, q);
        let r_max = (q_norm + self.constants.x_lipschitz) / self.constants.convexity_lower + 1.0;
        let n: usize = 33;
        let dq = 2.0 * r_max / (n - 1) as f64;
        let value = |p: Point| geometry::dot(self.dim, p, q) - (spec.hamiltonian)(x, p);
        // Lattice scan.
        let mut best = (f64::NEG_INFINITY, [0usize; 2]);
        let mut p = [0.0f64, 0.0];
        match self.dim {
            1 => {
                for i in 0..n {
                    p[0] = -r_max + i as f64 * dq;
                    let v = value(p);
                    if v > best.0 {
                        best = (v, [i, 0]);
                    }
                }
            }
            _ => {
                for i in 0..n {
                    for j in 0..n {
                        let pt = [-r_max + i as f64 * dq, -r_max + j as f64 * dq];
                        let v = value(pt);
                        if v > best.0 {
                            best = (v, [i, j]);
                        }
                    }
                }
            }
        }
        if (0..self.dim).any(|k| best.1[k] == 0 || best.1[k] == n - 1) {
            return Err(Error::BoundarySaturation {
                radius: r_max,
                q_norm,
            });
        }
        // Coordinate golden-section refinement around the lattice argmax.
        let mut p_star = [0.0f64, 0.0];
        for k in 0..self.dim {
            p_star[k] = -r_max + best.1[k] as f64 * dq;
        }
        let passes = if self.dim == 1 { 1 } else { 2 };
        for _ in 0..passes {
            for k in 0..self.dim {
                let (s, _) = golden_max(
                    |t| {
                        let mut pt = p_star;
                        pt[k] = t;
                        value(pt)
                    },
                    p_star[k] - dq,
                    p_star[k] + dq,
                    GOLDEN_ITERS,
                );
                p_star[k] = s;
            }
        }
        Ok(value(p_star))
    }

    /// Gradient-speed bound `C_R`: `|H_p(x, p)| <= C_R` whenever `|p| <= R`.
    pub fn p_speed_bound(&self, r: f64) -> f64 {
        self.constants.p_speed_slope * r + self.constants.p_speed_offset
    }

    /// The model with `p` reflected: `H~(x, p) = H(x, -p)`. Quadratic
    /// families are even in `p`, so they return a clone; custom evaluators
    /// are wrapped. Backward solution operators reduce to forward ones under
    /// this reflection.
    pub fn reflect_p(&self) -> HamiltonianModel {
        match &self.family {
            Family::QuadraticXIndep { .. } | Family::QuadraticShifted { .. } => self.clone(),
            Family::Custom(spec) => {
                let h = spec.hamiltonian.clone();
                let reflected = CustomSpec {
                    hamiltonian: Arc::new(move |x, p| h(x, geometry::scale(p, -1.0))),
                    grad_p: spec.grad_p.clone().map(|g| -> GradFn {
                        Arc::new(move |x, p| {
                            geometry::scale(g(x, geometry::scale(p, -1.0)), -1.0)
                        })
                    }),
                    grad_x: spec.grad_x.clone().map(|g| -> GradFn {
                        Arc::new(move |x, p| g(x, geometry::scale(p, -1.0)))
                    }),
                    ..spec.clone()
                };
                HamiltonianModel {
                    dim: self.dim,
                    family: Family::Custom(reflected),
                    constants: self.constants,
                }
            }
        }
    }

    /// Sample the structural hypotheses over `[-L, L]^dim` in `x` and the
    /// given momentum radii, comparing observed quantities against the
    /// declared constants.
    pub fn check_hypotheses(&self, sample_half_width: f64, radii: &[f64]) -> HypothesisReport {
        let dim = self.dim;
        let nx = 7usize;
        let np = 9usize;
        let x_samples = sample_box(dim, sample_half_width, nx);
        let tol = 1e-6;

        let mut min_eig = f64::INFINITY;
        let mut max_hx = 0.0f64;
        let mut max_h0 = f64::NEG_INFINITY;
        let mut min_h = f64::INFINITY;
        let r_all = radii.iter().cloned().fold(1.0f64, f64::max);
        for &x in &x_samples {
            max_h0 = max_h0.max(self.eval(x, [0.0, 0.0]));
            for &p in &sample_box(dim, r_all, np) {
                min_h = min_h.min(self.eval(x, p));
                max_hx = max_hx.max(geometry::norm(dim, self.grad_x(x, p)));
                min_eig = min_eig.min(self.hessian_p_min_eig(x, p));
            }
        }

        let p_speed = radii
            .iter()
            .map(|&r| {
                let mut observed = 0.0f64;
                for &x in &x_samples {
                    for &p in &sample_box(dim, r, np) {
                        if geometry::norm(dim, p) <= r + 1e-12 {
                            observed = observed.max(geometry::norm(dim, self.grad_p(x, p)));
                        }
                    }
                }
                let bound = self.p_speed_bound(r);
                RadiusCheck {
                    radius: r,
                    observed,
                    bound,
                    pass: observed <= bound * (1.0 + tol) + tol,
                }
            })
            .collect::<Vec<_>>();

        let c = &self.constants;
        let convexity = HypothesisCheck {
            observed: min_eig,
            declared: c.convexity_lower,
            // FD Hessians carry O(FD_STEP) noise; allow a matching slack.
            pass: min_eig >= c.convexity_lower - 1e-4 * (1.0 + c.convexity_lower),
        };
        let lower_bound = HypothesisCheck {
            observed: min_h,
            declared: -c.bound_constant,
            pass: min_h >= -c.bound_constant - tol,
        };
        let zero_slice = HypothesisCheck {
            observed: max_h0,
            declared: c.bound_constant,
            pass: max_h0 <= c.bound_constant + tol,
        };
        let x_lipschitz = HypothesisCheck {
            observed: max_hx,
            declared: c.x_lipschitz,
            pass: max_hx <= c.x_lipschitz * (1.0 + tol) + tol,
        };
        let pass = convexity.pass
            && lower_bound.pass
            && zero_slice.pass
            && x_lipschitz.pass
            && p_speed.iter().all(|r| r.pass);
        HypothesisReport {
            convexity,
            lower_bound,
            zero_slice,
            x_lipschitz,
            p_speed,
            pass,
        }
    }

    /// Smallest eigenvalue of the finite-difference `p`-Hessian.
    fn hessian_p_min_eig(&self, x: Point, p: Point) -> f64 {
        let h = 1e-4; // larger than FD_STEP: second differences lose more digits
        let f = |p: Point| self.eval(x, p);
        let d2 = |k: usize| {
            let mut hi = p;
            let mut lo = p;
            hi[k] += h;
            lo[k] -= h;
            (f(hi) - 2.0 * f(p) + f(lo)) / (h * h)
        };
        match self.dim {
            1 => d2(0),
            _ => {
                let a11 = d2(0);
                let a22 = d2(1);
                let pp = f([p[0] + h, p[1] + h]);
                let pm = f([p[0] + h, p[1] - h]);
                let mp = f([p[0] - h, p[1] + h]);
                let mm = f([p[0] - h, p[1] - h]);
                let a12 = (pp - pm - mp + mm) / (4.0 * h * h);
                geometry::sym_min_eig(2, a11, a12, a22)
            }
        }
    }
}

fn sample_box(dim: usize, half_width: f64, n: usize) -> Vec<Point> {
    let step = 2.0 * half_width / (n - 1) as f64;
    match dim {
        1 => (0..n).map(|i| [-half_width + i as f64 * step, 0.0]).collect(),
        _ => {
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    out.push([
                        -half_width + i as f64 * step,
                        -half_width + j as f64 * step,
                    ]);
                }
            }
            out
        }
    }
}

/// Golden-section maximization of a unimodal-near-the-peak function on
/// `[lo, hi]`; returns the bracket midpoint and its value.
pub fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Golden-section minimization on `[lo, hi]`.
pub fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let (x, neg) = golden_max(|t| -f(t), lo, hi, iters);
    (x, -neg)
}

/// One observed-vs-declared comparison in a hypothesis report.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HypothesisCheck {
    pub observed: f64,
    pub declared: f64,
    pub pass: bool,
}

/// Gradient-speed check for one momentum radius.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RadiusCheck {
    pub radius: f64,
    pub observed: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Sampled verification of the structural hypotheses.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    /// Smallest sampled eigenvalue of the `p`-Hessian vs. `c0`.
    pub convexity: HypothesisCheck,
    /// Smallest sampled `H` vs. `-C0`.
    pub lower_bound: HypothesisCheck,
    /// Largest sampled `H(x, 0)` vs. `C0`.
    pub zero_slice: HypothesisCheck,
    /// Largest sampled `|H_x|` vs. the declared Lipschitz bound.
    pub x_lipschitz: HypothesisCheck,
    /// Largest sampled `|H_p|` per momentum radius vs. the affine bound.
    pub p_speed: Vec<RadiusCheck>,
    pub pass: bool,
}
