//! Inverse design of initial data: the squared-distance functional between
//! the forward solution and a target, its gradient as a transported measure
//! (primal and dual evaluators), mollified gradient descent, and the
//! semiconvex regularization of iterates.

use crate::grid::{Extension, GridFunction, Window};
use crate::hamiltonian::HamiltonianModel;
use crate::solver::{backward_to_zero, forward_solve, SolverOptions};
use crate::transport::{
    check_duality_validity, extend_measure_at_zero, measure_pairing, DiscreteMeasure,
};
use crate::{Error, Result};
use serde::Serialize;

/// Why a descent run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Objective reached the absolute or relative tolerance.
    Tolerance,
    /// Gradient-measure total variation fell below its tolerance.
    TvTolerance,
    /// Iteration budget exhausted.
    MaxIter,
    /// No acceptable step or descent direction could be produced.
    Stall,
}

/// Tuning knobs for `descend`.
#[derive(Clone, Debug)]
pub struct DescentParams {
    pub max_iter: usize,
    /// Initial trial step.
    pub gamma0: f64,
    /// Armijo sufficient-decrease factor.
    pub armijo_c: f64,
    /// Smallest step tried before declaring a stall.
    pub gamma_floor: f64,
    /// Mollification width; `None` means `4h`.
    pub eta: Option<f64>,
    /// Stop when `J <= tol_rel * J(initial iterate)`.
    pub tol_rel: f64,
    /// Stop when `J <= tol_abs` outright.
    pub tol_abs: f64,
    /// Stop when the gradient measure's total variation is at most this.
    pub tol_tv: f64,
}

impl Default for DescentParams {
    fn default() -> Self {
        DescentParams {
            max_iter: 30,
            gamma0: 0.5,
            armijo_c: 1e-4,
            gamma_floor: 1e-6,
            eta: None,
            tol_rel: 1e-4,
            tol_abs: 1e-8,
            tol_tv: 0.0,
        }
    }
}

/// Full record of a descent run.
#[derive(Clone, Debug)]
pub struct DescentState {
    /// Final iterate.
    pub iterate: GridFunction,
    /// Objective at every visited iterate (length = accepted steps + 1).
    pub j_history: Vec<f64>,
    /// Accepted step sizes.
    pub gamma_history: Vec<f64>,
    /// Measured Lipschitz constant of every visited iterate.
    pub lip_history: Vec<f64>,
    /// Gradient measure at the final iterate.
    pub grad_measure: DiscreteMeasure,
    /// Last mollified descent direction (zero function if none was built).
    pub direction: GridFunction,
    pub stop_reason: StopReason,
}

impl DescentState {
    pub fn accepted_steps(&self) -> usize {
        self.gamma_history.len()
    }

    pub fn final_objective(&self) -> f64 {
        *self
            .j_history
            .last()
            .expect("descent always records the initial objective")
    }
}

/// The spatial window over which the fidelity functional integrates:
/// far enough inside the box that the forward solution at time `t` is
/// untouched by the truncation. Depends only on the target and horizon so
/// every descent iterate is scored on the same region.
pub fn fidelity_window(
    model: &HamiltonianModel,
    target: &GridFunction,
    t: f64,
) -> Result<Window> {
    let spec = target.spec();
    let margin = model.p_speed_bound(target.lip_bound() + 1.0) * t + 2.0 * spec.spacing();
    spec.inner_window(margin)
}

fn require_zero_bound_constant(model: &HamiltonianModel) -> Result<()> {
    if model.constants().bound_constant != 0.0 {
        return Err(Error::Hypothesis(format!(
            "inverse design requires a Hamiltonian with zero lower/zero-slice bound \
             (so values cannot drift); this model declares {}",
            model.constants().bound_constant
        )));
    }
    Ok(())
}

/// The forward slice at the horizon, shared by the evaluators below.
fn forward_at(
    model: &HamiltonianModel,
    u0: &GridFunction,
    t: f64,
    opts: &SolverOptions,
) -> Result<GridFunction> {
    Ok(forward_solve(model, u0, &[0.0, t], opts)?.into_last())
}

/// Squared L2 distance (over the fidelity window) between the forward
/// solution of `u0` at time `t` and the target.
pub fn evaluate_j(
    model: &HamiltonianModel,
    u0: &GridFunction,
    target: &GridFunction,
    t: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    require_zero_bound_constant(model)?;
    if u0.spec() != target.spec() {
        return Err(Error::InvalidArgument(
            "iterate and target live on different grids".into(),
        ));
    }
    let u_final = forward_at(model, u0, t, opts)?;
    objective_of_slice(model, &u_final, target, t)
}

/// The objective given an already-computed forward slice.
fn objective_of_slice(
    model: &HamiltonianModel,
    u_final: &GridFunction,
    target: &GridFunction,
    t: f64,
) -> Result<f64> {
    let window = fidelity_window(model, target, t)?;
    let spec = target.spec();
    Ok(crate::grid::window_quadrature(spec, &window)?
        .into_iter()
        .map(|(idx, wq)| {
            let r = u_final.value(idx) - target.value(idx);
            wq * r * r
        })
        .sum())
}

/// The residual `S_t u0 - target`, masked to the region where both the
/// fidelity window and the backward-transport support condition hold.
/// Everything outside is zeroed so the residual is admissible terminal data
/// for the measure extension.
fn masked_residual(
    model: &HamiltonianModel,
    u_final: &GridFunction,
    target: &GridFunction,
    t: f64,
) -> Result<GridFunction> {
    let spec = *target.spec();
    let fidelity = fidelity_window(model, target, t)?;
    let transport_margin =
        model.p_speed_bound(u_final.lip_bound()) * t + 2.0 * spec.spacing();
    let window = fidelity.intersect(&spec.inner_window(transport_margin)?)?;
    let values = (0..spec.node_count())
        .map(|idx| {
            if window.contains(spec.node(idx)) {
                u_final.value(idx) - target.value(idx)
            } else {
                0.0
            }
        })
        .collect();
    GridFunction::from_values(spec, values, Extension::Constant)
}

/// The gradient of the fidelity functional as a measure at time zero: twice
/// the extension of the terminal residual transported backward along the
/// solved characteristics.
pub fn gradient_measure(
    model: &HamiltonianModel,
    u0: &GridFunction,
    target: &GridFunction,
    t: f64,
    opts: &SolverOptions,
) -> Result<DiscreteMeasure> {
    require_zero_bound_constant(model)?;
    check_duality_validity(model)?;
    let u_final = forward_at(model, u0, t, opts)?;
    gradient_measure_of_slice(model, u0, &u_final, target, t, opts)
}

fn gradient_measure_of_slice(
    model: &HamiltonianModel,
    u0: &GridFunction,
    u_final: &GridFunction,
    target: &GridFunction,
    t: f64,
    opts: &SolverOptions,
) -> Result<DiscreteMeasure> {
    let residual = masked_residual(model, u_final, target, t)?;
    let measure = extend_measure_at_zero(model, u0, t, &residual, opts)?;
    let scaled: Vec<_> = measure
        .particles()
        .iter()
        .map(|&(p, w)| (p, 2.0 * w))
        .collect();
    let atoms: Vec<_> = measure.atoms().iter().map(|&(p, w)| (p, 2.0 * w)).collect();
    DiscreteMeasure::new(measure.dim(), scaled, atoms)
}

/// Both evaluations of the directional derivative of the fidelity
/// functional along `w`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DirectionalDerivative {
    /// `2 * integral of residual * (w o Phi)` over the window.
    pub primal: f64,
    /// The gradient measure paired against `w`.
    pub dual: f64,
}

/// Directional derivative along `w`, evaluated two independent ways (a
/// change of variables makes them the same integral in exact arithmetic).
pub fn directional_derivative(
    model: &HamiltonianModel,
    u0: &GridFunction,
    target: &GridFunction,
    t: f64,
    w: &GridFunction,
    opts: &SolverOptions,
) -> Result<DirectionalDerivative> {
    require_zero_bound_constant(model)?;
    check_duality_validity(model)?;
    if w.spec() != u0.spec() {
        return Err(Error::InvalidArgument(
            "direction grid does not match the iterate grid".into(),
        ));
    }
    let u_final = forward_at(model, u0, t, opts)?;
    let residual = masked_residual(model, &u_final, target, t)?;
    let spec = *u0.spec();

    // Primal: compose the direction with the foot map of the solved slice.
    let phi = crate::characteristics::phi_map(model, &u_final, t)?;
    let w_composed = crate::characteristics::gateaux_derivative(&phi, w)?;
    let primal = 2.0
        * (0..spec.node_count())
            .map(|idx| residual.value(idx) * w_composed.value(idx))
            .sum::<f64>()
        * spec.spacing().powi(spec.dim() as i32);

    // Dual: pair the transported gradient measure against the direction.
    let measure = gradient_measure_of_slice(model, u0, &u_final, target, t, opts)?;
    let dual = measure_pairing(&measure, w);
    Ok(DirectionalDerivative { primal, dual })
}

/// Mollify a gradient measure into a Lipschitz descent direction through a
/// normalized triangular kernel of width `eta`, then verify it is an ascent
/// direction for the functional (the self-pairing is nonnegative). A failed
/// check widens `eta` once; a second failure is a stall error.
pub fn mollify_gradient(
    measure: &DiscreteMeasure,
    spec: &crate::grid::GridSpec,
    eta: f64,
) -> Result<GridFunction> {
    let h = spec.spacing();
    if eta < h {
        return Err(Error::InvalidArgument(format!(
            "mollification width {eta} must be at least the grid spacing {h}"
        )));
    }
    let mut width = eta;
    for attempt in 0..2 {
        let direction = triangular_deposit(measure, spec, width)?;
        let slope = measure_pairing(measure, &direction);
        if slope >= 0.0 {
            return Ok(direction);
        }
        if attempt == 0 {
            width *= 2.0;
        }
    }
    Err(Error::Stall(
        "mollified gradient is not a descent direction even after widening the kernel"
            .into(),
    ))
}

/// Kernel deposition: `v(node) = sum_i w_i * K_eta(node - pos_i)` with the
/// normalized triangular (product) kernel, so the grid integral of `v`
/// approximates the measure's total mass.
fn triangular_deposit(
    measure: &DiscreteMeasure,
    spec: &crate::grid::GridSpec,
    eta: f64,
) -> Result<GridFunction> {
    let dim = spec.dim();
    let m = spec.points_per_axis();
    let h = spec.spacing();
    let mut values = vec![0.0f64; spec.node_count()];
    let kernel = |r: f64| -> f64 { (1.0 - r.abs() / eta).max(0.0) / eta };
    let axis_range = |c: f64| -> (usize, usize) {
        let lo = ((c - eta + spec.half_width()) / h).ceil().max(0.0) as usize;
        let hi = (((c + eta + spec.half_width()) / h).floor() as usize).min(m - 1);
        (lo, hi)
    };
    for &(pos, w) in measure.particles().iter().chain(measure.atoms()) {
        let (i_lo, i_hi) = axis_range(pos[0]);
        match dim {
            1 => {
                for i in i_lo..=i_hi {
                    values[i] += w * kernel(spec.coord(i) - pos[0]);
                }
            }
            _ => {
                let (j_lo, j_hi) = axis_range(pos[1]);
                for i in i_lo..=i_hi {
                    let ki = kernel(spec.coord(i) - pos[0]);
                    for j in j_lo..=j_hi {
                        values[i * m + j] += w * ki * kernel(spec.coord(j) - pos[1]);
                    }
                }
            }
        }
    }
    GridFunction::from_values(*spec, values, Extension::Constant)
}

/// Mollified approximate gradient descent from the backward solution of the
/// target. Steps follow `u -> u - gamma * v / sup|v|` with Armijo
/// backtracking; stalls are recorded in the stop reason, never raised.
pub fn descend(
    model: &HamiltonianModel,
    target: &GridFunction,
    t: f64,
    params: &DescentParams,
    opts: &SolverOptions,
) -> Result<DescentState> {
    require_zero_bound_constant(model)?;
    check_duality_validity(model)?;
    let spec = *target.spec();
    let eta = params.eta.unwrap_or(4.0 * spec.spacing());

    let mut iterate = backward_to_zero(model, target, t, opts)?;
    let mut u_final = forward_at(model, &iterate, t, opts)?;
    let mut j = objective_of_slice(model, &u_final, target, t)?;
    let j_initial = j;
    let mut j_history = vec![j];
    let mut lip_history = vec![iterate.measured_lip()];
    let mut gamma_history = Vec::new();
    let mut direction = GridFunction::constant(spec, 0.0)?;
    let mut grad_measure =
        gradient_measure_of_slice(model, &iterate, &u_final, target, t, opts)?;

    let stop_reason = loop {
        if j <= params.tol_abs || j <= params.tol_rel * j_initial {
            break StopReason::Tolerance;
        }
        if grad_measure.total_variation() <= params.tol_tv {
            break StopReason::TvTolerance;
        }
        if gamma_history.len() >= params.max_iter {
            break StopReason::MaxIter;
        }
        let v_hat = match mollify_gradient(&grad_measure, &spec, eta) {
            Ok(v) => v,
            Err(Error::Stall(_)) => break StopReason::Stall,
            Err(e) => return Err(e),
        };
        let sup = v_hat.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup <= 0.0 {
            break StopReason::Stall;
        }
        let step_dir = v_hat.scale(1.0 / sup)?;
        let slope = measure_pairing(&grad_measure, &step_dir);
        if slope <= 0.0 {
            break StopReason::Stall;
        }
        direction = step_dir.clone();

        // Armijo backtracking from gamma0.
        let mut gamma = params.gamma0;
        let mut accepted = None;
        while gamma >= params.gamma_floor {
            let trial = iterate.zip_with(&step_dir, |u, d| u - gamma * d)?;
            let trial_final = forward_at(model, &trial, t, opts)?;
            let j_trial = objective_of_slice(model, &trial_final, target, t)?;
            if j_trial <= j - params.armijo_c * gamma * slope {
                accepted = Some((trial, trial_final, j_trial, gamma));
                break;
            }
            gamma *= 0.5;
        }
        match accepted {
            None => break StopReason::Stall,
            Some((trial, trial_final, j_trial, gamma)) => {
                iterate = trial;
                u_final = trial_final;
                j = j_trial;
                j_history.push(j);
                lip_history.push(iterate.measured_lip());
                gamma_history.push(gamma);
                grad_measure =
                    gradient_measure_of_slice(model, &iterate, &u_final, target, t, opts)?;
            }
        }
    };

    Ok(DescentState {
        iterate,
        j_history,
        gamma_history,
        lip_history,
        grad_measure,
        direction,
        stop_reason,
    })
}

/// The semiconvex regularization: ride the solution forward and back.
/// The objective is invariant because a forward-backward-forward sweep
/// reproduces the forward image.
pub fn regularize(
    model: &HamiltonianModel,
    u0: &GridFunction,
    t: f64,
    opts: &SolverOptions,
) -> Result<GridFunction> {
    let forward = forward_at(model, u0, t, opts)?;
    backward_to_zero(model, &forward, t, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::Fixture;
    use crate::grid::GridSpec;
    use crate::solver::{scheme_tolerance, Scheme};

    fn model1() -> HamiltonianModel {
        HamiltonianModel::standard_quadratic(1).unwrap()
    }

    fn opts() -> SolverOptions {
        SolverOptions::new(Scheme::HopfLax)
    }

    #[test]
    fn objective_vanishes_on_forward_images_and_zero_data() {
        let spec = GridSpec::new(1, 3.0, 257).unwrap();
        let model = model1();
        let t = 0.25;
        let zero = GridFunction::constant(spec, 0.0).unwrap();
        assert_eq!(evaluate_j(&model, &zero, &zero, t, &opts()).unwrap(), 0.0);

        let u0 = Fixture::GaussianBump.sample(&spec).unwrap();
        let image = forward_solve(&model, &u0, &[0.0, t], &opts())
            .unwrap()
            .into_last();
        let j = evaluate_j(&model, &u0, &image, t, &opts()).unwrap();
        assert!(j < 1e-12, "J on own forward image: {j}");
    }

    #[test]
    fn objective_matches_closed_form_quadrature_for_the_cone() {
        // u0 = |x|, target 0: J = integral of the closed-form slice squared.
        let spec = GridSpec::new(1, 3.0, 513).unwrap();
        let model = model1();
        let t = 0.25;
        let u0 = Fixture::AbsKink.sample(&spec).unwrap();
        let zero = GridFunction::constant(spec, 0.0).unwrap();
        let j = evaluate_j(&model, &u0, &zero, t, &opts()).unwrap();
        let window = fidelity_window(&model, &zero, t).unwrap();
        let exact: f64 = crate::grid::window_quadrature(&spec, &window)
            .unwrap()
            .into_iter()
            .map(|(idx, wq)| {
                let x: f64 = spec.node(idx)[0];
                let u = if x.abs() <= 2.0 * t {
                    x * x / (4.0 * t)
                } else {
                    x.abs() - t
                };
                wq * u * u
            })
            .sum();
        let budget = 2.0 * scheme_tolerance(Scheme::HopfLax, spec.spacing(), 0.0);
        assert!(
            (j - exact).abs() <= budget * exact.max(1.0),
            "J {j} vs quadrature {exact}"
        );
    }

    #[test]
    fn hypothesis_gate_rejects_shifted_models() {
        let spec = GridSpec::new(1, 3.0, 65).unwrap();
        let model = HamiltonianModel::quadratic_shifted(
            1,
            crate::hamiltonian::Potential::Cosine {
                amplitude: 0.3,
                frequency: 1.0,
            },
        )
        .unwrap();
        let zero = GridFunction::constant(spec, 0.0).unwrap();
        assert!(matches!(
            evaluate_j(&model, &zero, &zero, 0.2, &opts()),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn gradient_measure_is_zero_on_forward_images() {
        let spec = GridSpec::new(1, 3.0, 257).unwrap();
        let model = model1();
        let t = 0.25;
        let u0 = Fixture::GaussianBump.sample(&spec).unwrap();
        let image = forward_solve(&model, &u0, &[0.0, t], &opts())
            .unwrap()
            .into_last();
        let m = gradient_measure(&model, &u0, &image, t, &opts()).unwrap();
        assert!(
            m.total_variation() < 1e-10,
            "tv = {}",
            m.total_variation()
        );
    }

    #[test]
    fn identity_flow_reduces_the_gradient_to_the_residual_density() {
        // u0 = 0: Phi is the identity, so the dual derivative along w is
        // -2 * integral of target * w.
        let spec = GridSpec::new(1, 3.0, 257).unwrap();
        let model = model1();
        let t = 0.25;
        let u0 = GridFunction::constant(spec, 0.0).unwrap();
        let target = Fixture::GaussianBump.sample(&spec).unwrap();
        let w = GridFunction::sample(spec, Extension::Constant, |x| {
            (1.0 - x[0] * x[0]).max(0.0)
        })
        .unwrap();
        let d = directional_derivative(&model, &u0, &target, t, &w, &opts()).unwrap();
        let h = spec.spacing();
        let exact: f64 = (0..spec.node_count())
            .map(|i| -2.0 * target.value(i) * w.value(i) * h)
            .sum();
        assert!(
            (d.primal - exact).abs() <= 1e-2 * exact.abs(),
            "primal {} vs {exact}",
            d.primal
        );
        assert!(
            (d.dual - exact).abs() <= 1e-2 * exact.abs(),
            "dual {} vs {exact}",
            d.dual
        );
        // Zero direction pairs to zero.
        let zero_w = GridFunction::constant(spec, 0.0).unwrap();
        let d0 =
            directional_derivative(&model, &u0, &target, t, &zero_w, &opts()).unwrap();
        assert_eq!(d0.primal, 0.0);
        assert_eq!(d0.dual, 0.0);
    }

    #[test]
    fn cone_gradient_carries_the_fan_atom() {
        // u0 = |x|, target 0: the measure's atom mass is twice the integral
        // of the residual across the fan, 2 * (2/3) * t.  Fine grid: the
        // junction cells at the fan edge add an O(h) mass error that must
        // stay inside the 5% budget.
        let spec = GridSpec::new(1, 3.0, 1025).unwrap();
        let model = model1();
        let t = 0.25;
        let u0 = Fixture::AbsKink.sample(&spec).unwrap();
        let zero = GridFunction::constant(spec, 0.0).unwrap();
        let m = gradient_measure(&model, &u0, &zero, t, &opts()).unwrap();
        assert_eq!(m.atoms().len(), 1, "atoms: {:?}", m.atoms());
        let (pos, mass) = m.atoms()[0];
        // integral of x^2/(4t) over [-2t, 2t] = (4/3) t^2; atom collects
        // 2 * that from the fan.
        let expect = 2.0 * (4.0 / 3.0) * t * t;
        assert!(pos[0].abs() <= 2.0 * spec.spacing());
        assert!(
            (mass - expect).abs() <= 0.05 * expect,
            "atom mass {mass} vs {expect}"
        );
    }

    #[test]
    fn mollified_direction_integrates_the_mass_and_is_ascent() {
        let spec = GridSpec::new(1, 3.0, 257).unwrap();
        let h = spec.spacing();
        let m = DiscreteMeasure::new(1, vec![], vec![([0.0, 0.0], 0.7)]).unwrap();
        let v = mollify_gradient(&m, &spec, 4.0 * h).unwrap();
        let integral: f64 = v.values().iter().map(|x| x * h).sum();
        assert!((integral - 0.7).abs() < 1e-10, "integral {integral}");
        // Peak at the atom, zero beyond the kernel width.
        let mid = spec.node_count() / 2;
        assert!(v.value(mid) > 0.0);
        assert_eq!(v.interpolate([1.0, 0.0]), 0.0);
        // Self-pairing (the descent check) is nonnegative.
        assert!(measure_pairing(&m, &v) >= 0.0);
        // Zero measure mollifies to zero.
        let z = mollify_gradient(&DiscreteMeasure::empty(1), &spec, 4.0 * h).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
        // eta below h is rejected.
        assert!(mollify_gradient(&m, &spec, 0.5 * h).is_err());
    }

    #[test]
    fn descent_stops_immediately_on_reachable_targets() {
        let spec = GridSpec::new(1, 3.0, 257).unwrap();
        let model = model1();
        let t = 0.25;
        let v0 = Fixture::GaussianBump.sample(&spec).unwrap();
        let target = forward_solve(&model, &v0, &[0.0, t], &opts())
            .unwrap()
            .into_last();
        let mut params = DescentParams::default();
        let eps = scheme_tolerance(Scheme::HopfLax, spec.spacing(), 0.0);
        params.tol_abs = eps * eps;
        let state = descend(&model, &target, t, &params, &opts()).unwrap();
        assert_eq!(state.stop_reason, StopReason::Tolerance);
        assert_eq!(state.accepted_steps(), 0, "J history {:?}", state.j_history);
        assert!(state.final_objective() <= eps * eps);
        // Zero target: initial iterate is zero, J = 0.
        let zero = GridFunction::constant(spec, 0.0).unwrap();
        let state0 = descend(&model, &zero, t, &params, &opts()).unwrap();
        assert_eq!(state0.accepted_steps(), 0);
        assert!(state0.final_objective() <= 1e-14);
    }

    #[test]
    fn descent_strictly_decreases_on_the_two_bump_target() {
        let spec = GridSpec::new(1, 4.0, 513).unwrap();
        let model = model1();
        let t = 0.25;
        let target = Fixture::TwoBump.sample(&spec).unwrap();
        let params = DescentParams {
            max_iter: 8,
            ..DescentParams::default()
        };
        let state = descend(&model, &target, t, &params, &opts()).unwrap();
        assert!(
            state.accepted_steps() >= 3,
            "accepted {} steps, stop {:?}, J {:?}",
            state.accepted_steps(),
            state.stop_reason,
            state.j_history
        );
        for pair in state.j_history.windows(2) {
            assert!(pair[1] < pair[0], "J must strictly decrease: {:?}", state.j_history);
        }
        let j0 = state.j_history[0];
        assert!(
            state.final_objective() <= 0.9 * j0,
            "final J {} vs initial {j0}",
            state.final_objective()
        );
    }

    #[test]
    fn regularization_preserves_the_objective() {
        let spec = GridSpec::new(1, 3.0, 257).unwrap();
        let model = model1();
        let t = 0.25;
        let u0 = Fixture::GaussianBump.sample(&spec).unwrap();
        let target = Fixture::TwoBump.sample(&spec).unwrap();
        let j_before = evaluate_j(&model, &u0, &target, t, &opts()).unwrap();
        let smooth = regularize(&model, &u0, t, &opts()).unwrap();
        let j_after = evaluate_j(&model, &smooth, &target, t, &opts()).unwrap();
        let eps = scheme_tolerance(Scheme::HopfLax, spec.spacing(), 0.0);
        assert!(
            (j_before - j_after).abs() <= eps,
            "J changed under regularization: {j_before} vs {j_after}"
        );
        // Constants are fixed points.
        let c = GridFunction::constant(spec, 0.4).unwrap();
        let rc = regularize(&model, &c, t, &opts()).unwrap();
        assert!(rc.values().iter().all(|v| (v - 0.4).abs() < 1e-10));
    }
}
