//! Acceptance battery: every test exercises one externally meaningful
//! guarantee of the library end to end and prints a single
//! `ACCEPTANCE <id>: PASS/FAIL (<measured numbers>)` line.
//!
//! All tolerances are pinned here, each next to the reasoning that produced
//! it, so a future failure is a real regression rather than a loose bound.

use std::time::Instant;

use hjinv_core::characteristics;
use hjinv_core::fixtures::{random_lipschitz, Fixture};
use hjinv_core::geometry::SymMat;
use hjinv_core::grid::{sup_distance, Extension, GridFunction, GridSpec, StencilDir};
use hjinv_core::hamiltonian::{HamiltonianModel, Potential};
use hjinv_core::inverse::{self, DescentParams, StopReason};
use hjinv_core::reachability::{self, ProjectionParams};
use hjinv_core::solver::{
    backward_to_zero, calibrated_tolerance, forward_solve, scheme_tolerance, semigroup_defect,
    Scheme, SolverOptions,
};
use hjinv_core::transport;

// -------------------------------------------------------------------------
// Pinned tolerances
// -------------------------------------------------------------------------

/// Desk-scale one-dimensional grid: 1025 nodes on [-3, 3].
const DESK_POINTS: usize = 1025;

/// Direct-formula budget against closed forms: the node-quantized
/// inf-convolution is exact off the fan and snaps parabola minima to the
/// nearest node inside it, so two spacings is a generous ceiling.
const CLOSED_FORM_DIRECT_FACTOR: f64 = 2.0;

/// Marching-scheme budget against closed forms, as a multiple of `h + dt`:
/// first-order schemes carry O(h + dt) error with a kink-dependent constant;
/// ten covers the measured constants (semi-Lagrangian ~0.25, Lax-Friedrichs
/// ~4.4 at desk scale) with room for parameter drift.
const CLOSED_FORM_MARCHING_FACTOR: f64 = 10.0;

/// Wall-clock ceiling for the closed-form comparison across all schemes.
const CLOSED_FORM_RUNTIME_SECS: f64 = 5.0;

/// A scheme participates in the sharp contraction / round-trip bounds only
/// if its measured accuracy sits below this at desk scale. Hopf-Lax
/// (4.3e-6) and semi-Lagrangian (2.5e-3) qualify; Lax-Friedrichs (3.6e-2)
/// does not — its artificial viscosity smears kinks at first order in `h`,
/// which no resolution inside the desk budget repairs.
const ACCURACY_GATE: f64 = 5e-3;

/// Number of seeded random Lipschitz pairs for the operator-property sweep.
const RANDOM_PAIRS: u64 = 20;

/// Floating round-off cushion for comparisons that land exactly on the
/// quantization floor: the Hopf-Lax round trip reproduces its input up to
/// one half-cell parabola snap (h^2/8 = 4.29e-6 at desk scale), which is
/// the same quantity the calibration measures, so the two sides agree to
/// round-off (observed gap ~2e-16) and the comparison needs an ulp-scale
/// cushion. Six orders of magnitude below the tolerance being enforced.
const ROUND_OFF_SLACK: f64 = 1e-12;

/// Horizon for the directional-derivative ladder. Short enough that part of
/// the trusted window lies outside the cone fixture's rarefaction fan, so
/// the difference quotients trace a genuine first-order ladder instead of
/// collapsing onto the exact pinned value.
const LADDER_HORIZON: f64 = 0.3;

/// Increment ladder for the directional-derivative study.
const LADDER_DELTAS: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];

/// The last ladder distance may exceed the observed floor by at most this
/// factor (the quotient stops improving once scheme error dominates).
const LADDER_FLOOR_FACTOR: f64 = 3.0;

/// Single semiconcavity constant: the discrete forward image satisfies
/// second differences <= C h^2 / t with C = 0.5 along axes and C = 1.0
/// along plane diagonals (step length sqrt(2) h), and the transport
/// coefficient's one-sided slope is at most 1/t; 1.1 covers the sharpest
/// of these with 10% headroom for interpolation noise.
const SEMICONCAVITY_C: f64 = 1.1;

/// Rounding slack for second-difference comparisons near machine precision.
const SECOND_DIFF_ABS_SLACK: f64 = 1e-8;

/// Relative drift ceiling for the duality pairing over a transport run.
const PAIRING_DRIFT_TOL: f64 = 1e-2;

/// Atom mass must match the fan-collapse prediction to this relative error.
const ATOM_MASS_REL_TOL: f64 = 2e-2;

/// Primal and dual directional derivatives must agree to this relative gap.
const GRADIENT_GAP_TOL: f64 = 1e-2;

/// Increment for the finite-difference check of the tracking objective.
const FD_DELTA: f64 = 1e-3;

/// Curvature bound for the finite-difference check: the second derivative
/// of the objective along a fixed direction is about 2 ||w o Phi||^2 <= 3
/// for slope-0.5 directions on this box, so |quotient - derivative| stays
/// below (curvature/2) * delta; 5 leaves a 3x margin over the measured
/// worst case (1.4e-3 at delta = 1e-3).
const FD_CURVATURE: f64 = 5.0;

/// Descent must cut the objective to at most this fraction of its seed value.
const DESCENT_IMPROVEMENT: f64 = 0.9;

/// Minimum accepted Armijo steps on the genuinely unattainable target.
const DESCENT_MIN_STEPS: usize = 3;

/// Wall-clock ceiling for the full descent study.
const DESCENT_RUNTIME_SECS: f64 = 120.0;

/// The cyclic-projection result must match the dense active-set solution of
/// the same quadratic program to this L2 distance (uniform node metric).
const QP_MATCH_TOL: f64 = 1e-6;

/// Feasible inputs must pass through the projection unchanged to this L2
/// distance, and variational-inequality certificates must stay below it.
const PROJECTION_FIXED_TOL: f64 = 1e-6;

// -------------------------------------------------------------------------
// Helpers
// -------------------------------------------------------------------------

fn gate(label: &str, outcome: Result<String, String>) {
    match outcome {
        Ok(detail) => println!("ACCEPTANCE {label}: PASS ({detail})"),
        Err(detail) => {
            println!("ACCEPTANCE {label}: FAIL ({detail})");
            panic!("ACCEPTANCE {label}: FAIL ({detail})");
        }
    }
}

fn fail<T: std::fmt::Display>(what: &'static str) -> impl Fn(T) -> String {
    move |e| format!("{what}: {e}")
}

fn model1() -> HamiltonianModel {
    HamiltonianModel::standard_quadratic(1).expect("standard 1D model")
}

fn hopf() -> SolverOptions {
    SolverOptions::new(Scheme::HopfLax)
}

fn forward_at(
    model: &HamiltonianModel,
    u0: &GridFunction,
    t: f64,
    opts: &SolverOptions,
) -> Result<GridFunction, String> {
    Ok(forward_solve(model, u0, &[0.0, t], opts)
        .map_err(fail("forward solve"))?
        .into_last())
}

/// L2 distance in the uniform node metric (the metric the projection
/// minimizes).
fn l2_uniform(a: &GridFunction, b: &GridFunction) -> f64 {
    let cell = a.spec().spacing().powi(a.spec().dim() as i32);
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y) * cell)
        .sum::<f64>()
        .sqrt()
}

// -------------------------------------------------------------------------
// 01 — closed-form accuracy
// -------------------------------------------------------------------------

#[test]
fn acceptance_01_closed_form_accuracy() {
    gate("01 closed-form accuracy", run_closed_form());
}

fn run_closed_form() -> Result<String, String> {
    let t = 0.5;
    let spec = GridSpec::new(1, 3.0, DESK_POINTS).map_err(fail("grid"))?;
    let h = spec.spacing();
    let model = model1();
    let u0 = Fixture::AbsKink.sample(&spec).map_err(fail("fixture"))?;
    // Forward image of the cone: a parabolic fan inside |x| <= 2t, the
    // translated cone outside.
    let exact = GridFunction::sample(spec, Extension::Linear, |x| {
        let r = x[0].abs();
        if r <= 2.0 * t {
            r * r / (4.0 * t)
        } else {
            r - t
        }
    })
    .map_err(fail("closed form"))?;
    let full = spec.full_window();

    let start = Instant::now();
    let mut details = Vec::new();
    for scheme in Scheme::all() {
        let opts = SolverOptions::new(scheme);
        let res = forward_solve(&model, &u0, &[0.0, t], &opts).map_err(fail("solve"))?;
        let dt = res
            .diagnostics
            .last()
            .map(|d| d.dt_max)
            .unwrap_or_default();
        let got = res.into_last();
        let err = sup_distance(&got, &exact, &full).map_err(fail("sup"))?;
        let budget = match scheme {
            Scheme::HopfLax => CLOSED_FORM_DIRECT_FACTOR * h,
            _ => CLOSED_FORM_MARCHING_FACTOR * (h + dt),
        };
        if err > budget {
            return Err(format!(
                "{scheme:?} sup error {err:.3e} exceeds budget {budget:.3e}"
            ));
        }
        details.push(format!("{scheme:?} {err:.2e}<={budget:.2e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > CLOSED_FORM_RUNTIME_SECS {
        return Err(format!(
            "runtime {secs:.1}s exceeds {CLOSED_FORM_RUNTIME_SECS}s"
        ));
    }
    Ok(format!("{}; {secs:.2}s", details.join(", ")))
}

// -------------------------------------------------------------------------
// 02 — contraction and forward/backward round trip on random data
// -------------------------------------------------------------------------

#[test]
fn acceptance_02_contraction_and_round_trip() {
    gate("02 contraction & round trip", run_contraction());
}

fn run_contraction() -> Result<String, String> {
    let t = 0.5;
    let spec = GridSpec::new(1, 3.0, DESK_POINTS).map_err(fail("grid"))?;
    let model = model1();
    let full = spec.full_window();

    // Only schemes whose measured accuracy clears the gate take part in the
    // sharp bounds; the rest are reported so the exclusion stays visible.
    let mut participants = Vec::new();
    let mut excluded = Vec::new();
    for scheme in Scheme::all() {
        let cal = calibrated_tolerance(scheme, &spec, t).map_err(fail("calibration"))?;
        if cal < ACCURACY_GATE {
            participants.push((scheme, cal));
        } else {
            excluded.push(format!("{scheme:?} {cal:.1e}"));
        }
    }
    let names: Vec<_> = participants.iter().map(|(s, _)| *s).collect();
    if !(names.contains(&Scheme::HopfLax) && names.contains(&Scheme::SemiLagrangian)) {
        return Err(format!(
            "expected Hopf-Lax and semi-Lagrangian to clear the {ACCURACY_GATE:.0e} gate, got {names:?}"
        ));
    }

    let mut details = Vec::new();
    for (scheme, eps) in &participants {
        let opts = SolverOptions::new(*scheme);
        let mut worst_excess = f64::NEG_INFINITY;
        let mut worst_round = 0.0f64;
        for i in 0..RANDOM_PAIRS {
            let u0 = random_lipschitz(&spec, 100 + i, 1.0).map_err(fail("random data"))?;
            let u1 = random_lipschitz(&spec, 200 + i, 1.0).map_err(fail("random data"))?;
            let lip = u0.lip_bound().max(u1.lip_bound());
            let margin = model.p_speed_bound(lip + 1.0) * t + 2.0 * spec.spacing();
            let window = spec.inner_window(margin).map_err(fail("window"))?;
            let s0 = forward_at(&model, &u0, t, &opts)?;
            let s1 = forward_at(&model, &u1, t, &opts)?;

            // Non-expansiveness: the images are no farther apart than the data.
            let image_gap = sup_distance(&s0, &s1, &window).map_err(fail("sup"))?;
            let data_gap = sup_distance(&u0, &u1, &full).map_err(fail("sup"))?;
            worst_excess = worst_excess.max(image_gap - data_gap);
            if image_gap > data_gap + eps {
                return Err(format!(
                    "{scheme:?} pair {i}: image gap {image_gap:.6} exceeds data gap {data_gap:.6} + {eps:.1e}"
                ));
            }

            // Round trip: pulling the image back and pushing it forward again
            // must reproduce the image (it is itself a forward image).
            let back = backward_to_zero(&model, &s0, t, &opts).map_err(fail("backward"))?;
            let again = forward_at(&model, &back, t, &opts)?;
            let defect = sup_distance(&again, &s0, &window).map_err(fail("sup"))?;
            worst_round = worst_round.max(defect);
            if defect > *eps + ROUND_OFF_SLACK {
                return Err(format!(
                    "{scheme:?} pair {i}: round-trip defect {defect:.3e} exceeds {eps:.3e}"
                ));
            }
        }
        details.push(format!(
            "{scheme:?} eps {eps:.1e}, worst excess {worst_excess:.1e}, worst round trip {worst_round:.1e}"
        ));
    }
    Ok(format!(
        "{} pairs; {}; over gate: {}",
        RANDOM_PAIRS,
        details.join("; "),
        excluded.join(", ")
    ))
}

// -------------------------------------------------------------------------
// 03 — semigroup law
// -------------------------------------------------------------------------

#[test]
fn acceptance_03_semigroup_law() {
    gate("03 semigroup law", run_semigroup());
}

fn run_semigroup() -> Result<String, String> {
    let (t1, t2) = (0.2, 0.3);
    let spec = GridSpec::new(1, 3.0, DESK_POINTS).map_err(fail("grid"))?;
    let model = model1();
    let mut details = Vec::new();
    for scheme in Scheme::all() {
        let opts = SolverOptions::new(scheme);
        // The comparison runs three discrete solves (one direct, two staged)
        // and the solution operator is non-expansive, so the defect is
        // bounded by the sum of the three per-solve accuracies.
        let budget = calibrated_tolerance(scheme, &spec, t1).map_err(fail("calibration"))?
            + calibrated_tolerance(scheme, &spec, t2).map_err(fail("calibration"))?
            + calibrated_tolerance(scheme, &spec, t1 + t2).map_err(fail("calibration"))?;
        let mut worst = 0.0f64;
        for &fixture in Fixture::all() {
            let u0 = fixture.sample(&spec).map_err(fail("fixture"))?;
            let (defect, _) =
                semigroup_defect(&model, &u0, t1, t2, &opts).map_err(fail("defect"))?;
            worst = worst.max(defect);
            if defect > budget {
                return Err(format!(
                    "{scheme:?} on {}: defect {defect:.3e} exceeds {budget:.3e}",
                    fixture.name()
                ));
            }
        }
        details.push(format!("{scheme:?} worst {worst:.1e}<={budget:.1e}"));
    }
    Ok(format!(
        "{} fixtures, split {t1}+{t2}; {}",
        Fixture::all().len(),
        details.join("; ")
    ))
}

// -------------------------------------------------------------------------
// 04 — directional-derivative ladder
// -------------------------------------------------------------------------

#[test]
fn acceptance_04_directional_derivative_ladder() {
    gate("04 directional-derivative ladder", run_ladder());
}

fn run_ladder() -> Result<String, String> {
    let spec = GridSpec::new(1, 3.0, DESK_POINTS).map_err(fail("grid"))?;
    let model = model1();
    let w = Fixture::GaussianBump.sample(&spec).map_err(fail("direction"))?;
    let mut details = Vec::new();
    for fixture in [Fixture::AbsKink, Fixture::Linear] {
        let u0 = fixture.sample(&spec).map_err(fail("fixture"))?;
        let margin = model.p_speed_bound(u0.lip_bound() + 1.0) * LADDER_HORIZON
            + 2.0 * spec.spacing();
        let window = spec.inner_window(margin).map_err(fail("window"))?;
        let report = characteristics::convergence_report(
            &model,
            &u0,
            &w,
            LADDER_HORIZON,
            &LADDER_DELTAS,
            &window,
            &hopf(),
        )
        .map_err(fail("ladder"))?;
        let last = *report
            .distances
            .last()
            .ok_or_else(|| "empty ladder".to_string())?;
        if !report.monotone {
            return Err(format!(
                "{}: distances not monotone: {:?}",
                fixture.name(),
                report.distances
            ));
        }
        if last > LADDER_FLOOR_FACTOR * report.scheme_floor {
            return Err(format!(
                "{}: final distance {last:.3e} exceeds {LADDER_FLOOR_FACTOR} x floor {:.3e}",
                fixture.name(),
                report.scheme_floor
            ));
        }
        details.push(format!(
            "{}: {:.2e}->{:.2e}, floor {:.2e}",
            fixture.name(),
            report.distances.first().unwrap(),
            last,
            report.scheme_floor
        ));
    }
    Ok(details.join("; "))
}

// -------------------------------------------------------------------------
// 05 — semiconcavity and one-sided Lipschitz bounds
// -------------------------------------------------------------------------

#[test]
fn acceptance_05_semiconcavity_and_oslc() {
    gate("05 semiconcavity & one-sided slope", run_semiconcavity());
}

fn run_semiconcavity() -> Result<String, String> {
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut worst_oslc = f64::NEG_INFINITY;
    for (dim, points) in [(1usize, DESK_POINTS), (2usize, 129)] {
        let spec = GridSpec::new(dim, 3.0, points).map_err(fail("grid"))?;
        let h = spec.spacing();
        let model = HamiltonianModel::standard_quadratic(dim).map_err(fail("model"))?;
        let dirs = StencilDir::all(dim);
        let fixtures: &[Fixture] = if dim == 1 {
            Fixture::all()
        } else {
            &[Fixture::AbsKink, Fixture::GaussianBump, Fixture::TwoBump]
        };
        for &t in &[0.1, 0.25, 0.5] {
            let bound = SEMICONCAVITY_C / t * h * h + SECOND_DIFF_ABS_SLACK;
            for &fixture in fixtures {
                let u0 = fixture.sample(&spec).map_err(fail("fixture"))?;
                let ut = forward_at(&model, &u0, t, &hopf())?;
                for idx in 0..spec.node_count() {
                    if spec.is_boundary(idx) {
                        continue;
                    }
                    for &d in dirs {
                        let d2 = ut.second_difference(idx, d).map_err(fail("stencil"))?;
                        worst_ratio = worst_ratio.max(d2 * t / (h * h));
                        if d2 > bound {
                            return Err(format!(
                                "{dim}D {} t={t}: second difference {d2:.3e} exceeds {bound:.3e}",
                                fixture.name()
                            ));
                        }
                    }
                }
                let coeff =
                    transport::transport_coefficient(&model, &ut).map_err(fail("coefficient"))?;
                let oslc = transport::oslc_estimate(&coeff, 4096, 7);
                worst_oslc = worst_oslc.max(oslc * t);
                if oslc > SEMICONCAVITY_C / t {
                    return Err(format!(
                        "{dim}D {} t={t}: one-sided slope {oslc:.4} exceeds {:.4}",
                        fixture.name(),
                        SEMICONCAVITY_C / t
                    ));
                }
            }
        }
    }
    Ok(format!(
        "worst d2*t/h^2 {worst_ratio:.3}, worst oslc*t {worst_oslc:.3}, ceiling {SEMICONCAVITY_C}"
    ))
}

// -------------------------------------------------------------------------
// 06 — duality-pairing conservation
// -------------------------------------------------------------------------

#[test]
fn acceptance_06_pairing_conservation() {
    gate("06 duality-pairing conservation", run_pairing());
}

fn run_pairing() -> Result<String, String> {
    let mut details = Vec::new();

    // One-dimensional runs under the standard model.
    let spec = GridSpec::new(1, 3.0, DESK_POINTS).map_err(fail("grid"))?;
    let model = model1();
    let tau = 0.5;
    let samples = [0.1, 0.2, 0.3, 0.4, 0.5];
    let mut schedule = vec![0.0];
    schedule.extend_from_slice(&samples);
    let w = Fixture::GaussianBump.sample(&spec).map_err(fail("direction"))?;
    // The terminal density must be compactly supported away from the
    // boundary so every backward trajectory stays inside the box.
    let pi = Fixture::TwoBump.sample(&spec).map_err(fail("density"))?;
    for fixture in [Fixture::AbsKink, Fixture::NegAbs, Fixture::GaussianBump] {
        let u0 = fixture.sample(&spec).map_err(fail("fixture"))?;
        let v = transport::forward_duality_solution(&model, &u0, &w, &schedule, &hopf())
            .map_err(fail("duality field"))?;
        let measures = transport::backward_reversible(&model, &u0, tau, &pi, &samples, &hopf())
            .map_err(fail("reversible transport"))?;
        let series = transport::duality_pairing(&v, &measures).map_err(fail("pairing"))?;
        if series.max_relative_drift > PAIRING_DRIFT_TOL {
            return Err(format!(
                "1D {}: drift {:.3e} exceeds {PAIRING_DRIFT_TOL:.0e}",
                fixture.name(),
                series.max_relative_drift
            ));
        }
        details.push(format!(
            "1D {} {:.1e}",
            fixture.name(),
            series.max_relative_drift
        ));
    }

    // Two-dimensional run under the shifted quadratic model.
    let spec2 = GridSpec::new(2, 3.0, 129).map_err(fail("grid"))?;
    let shifted = HamiltonianModel::quadratic_shifted(
        2,
        Potential::Cosine {
            amplitude: 0.3,
            frequency: 1.0,
        },
    )
    .map_err(fail("model"))?;
    let opts2 = SolverOptions::new(Scheme::SemiLagrangian);
    let tau2 = 0.25;
    let samples2 = [0.125, 0.25];
    let u0 = Fixture::GaussianBump.sample(&spec2).map_err(fail("fixture"))?;
    let w2 = Fixture::GaussianBump.sample(&spec2).map_err(fail("direction"))?;
    let pi2 = Fixture::TwoBump.sample(&spec2).map_err(fail("density"))?;
    let v2 = transport::forward_duality_solution(&shifted, &u0, &w2, &[0.0, 0.125, 0.25], &opts2)
        .map_err(fail("duality field"))?;
    let m2 = transport::backward_reversible(&shifted, &u0, tau2, &pi2, &samples2, &opts2)
        .map_err(fail("reversible transport"))?;
    let series2 = transport::duality_pairing(&v2, &m2).map_err(fail("pairing"))?;
    if series2.max_relative_drift > PAIRING_DRIFT_TOL {
        return Err(format!(
            "2D shifted: drift {:.3e} exceeds {PAIRING_DRIFT_TOL:.0e}",
            series2.max_relative_drift
        ));
    }
    details.push(format!("2D shifted {:.1e}", series2.max_relative_drift));
    Ok(details.join(", "))
}

// -------------------------------------------------------------------------
// 07 — atom formation in the fan
// -------------------------------------------------------------------------

#[test]
fn acceptance_07_fan_atom_formation() {
    gate("07 fan atom formation", run_atom());
}

fn run_atom() -> Result<String, String> {
    let tau = 0.5;
    let b = 1.5; // plateau half-width; wide enough to feed the whole fan
    let spec = GridSpec::new(1, 3.0, DESK_POINTS).map_err(fail("grid"))?;
    let h = spec.spacing();
    let model = model1();
    let u0 = Fixture::AbsKink.sample(&spec).map_err(fail("fixture"))?;
    let pi = GridFunction::sample(spec, Extension::Constant, |x| {
        if x[0].abs() <= b {
            1.0
        } else {
            0.0
        }
    })
    .map_err(fail("density"))?;
    let measure = transport::extend_measure_at_zero(&model, &u0, tau, &pi, &hopf())
        .map_err(fail("measure extension"))?;
    if measure.atoms().len() != 1 {
        return Err(format!(
            "expected exactly one atom, got {}",
            measure.atoms().len()
        ));
    }
    let (pos, mass) = measure.atoms()[0];
    if pos[0].abs() > 2.0 * h {
        return Err(format!(
            "atom at {:.3e}, more than 2h = {:.3e} from the collapse point",
            pos[0],
            2.0 * h
        ));
    }
    // Backward characteristics from the fan sweep the interval [-2 tau, 2 tau]
    // of unit density into the single collapse point.
    let expected = 4.0 * tau;
    if (mass - expected).abs() > ATOM_MASS_REL_TOL * expected {
        return Err(format!(
            "atom mass {mass:.4} deviates from {expected} by more than {:.0}%",
            ATOM_MASS_REL_TOL * 100.0
        ));
    }
    Ok(format!(
        "one atom at {:.1e} (<=2h), mass {mass:.4} = {expected} +{:.2}%",
        pos[0],
        (mass / expected - 1.0) * 100.0
    ))
}

// -------------------------------------------------------------------------
// 08 — gradient correctness (primal/dual agreement + finite differences)
// -------------------------------------------------------------------------

#[test]
fn acceptance_08_gradient_correctness() {
    gate("08 gradient correctness", run_gradient());
}

fn run_gradient() -> Result<String, String> {
    let t = 0.4;
    let spec = GridSpec::new(1, 3.0, DESK_POINTS).map_err(fail("grid"))?;
    let model = model1();
    let probe = Fixture::GaussianBump.sample(&spec).map_err(fail("direction"))?;

    // Primal vs dual evaluation of the same directional derivative.
    let mut worst_gap = 0.0f64;
    for (u0f, targetf) in [
        (Fixture::GaussianBump, Fixture::Zero),
        (Fixture::TwoBump, Fixture::Zero),
        (Fixture::GaussianBump, Fixture::NegAbs),
    ] {
        let u0 = u0f.sample(&spec).map_err(fail("fixture"))?;
        let target = targetf.sample(&spec).map_err(fail("target"))?;
        let d = inverse::directional_derivative(&model, &u0, &target, t, &probe, &hopf())
            .map_err(fail("derivative"))?;
        let denom = d.primal.abs().max(d.dual.abs());
        let gap = if denom < 1e-14 {
            0.0
        } else {
            (d.primal - d.dual).abs() / denom
        };
        worst_gap = worst_gap.max(gap);
        if gap > GRADIENT_GAP_TOL {
            return Err(format!(
                "{} -> {}: primal {:.6e} vs dual {:.6e}, gap {gap:.3e}",
                u0f.name(),
                targetf.name(),
                d.primal,
                d.dual
            ));
        }
    }

    // Finite-difference check of the objective along random directions.
    let u0 = Fixture::GaussianBump.sample(&spec).map_err(fail("fixture"))?;
    let target = Fixture::Zero.sample(&spec).map_err(fail("target"))?;
    let j0 = inverse::evaluate_j(&model, &u0, &target, t, &hopf()).map_err(fail("objective"))?;
    let eps = calibrated_tolerance(Scheme::HopfLax, &spec, t).map_err(fail("calibration"))?;
    let fd_budget = FD_CURVATURE * FD_DELTA + eps;
    let mut worst_fd = 0.0f64;
    for seed in 11..=15u64 {
        let w = random_lipschitz(&spec, seed, 0.5).map_err(fail("direction"))?;
        let d = inverse::directional_derivative(&model, &u0, &target, t, &w, &hopf())
            .map_err(fail("derivative"))?;
        let bumped = u0
            .add(&w.scale(FD_DELTA).map_err(fail("scale"))?)
            .map_err(fail("perturb"))?;
        let j1 =
            inverse::evaluate_j(&model, &bumped, &target, t, &hopf()).map_err(fail("objective"))?;
        let quotient = (j1 - j0) / FD_DELTA;
        let err = (quotient - d.dual).abs();
        worst_fd = worst_fd.max(err);
        if err > fd_budget {
            return Err(format!(
                "seed {seed}: |fd quotient - derivative| = {err:.3e} exceeds {fd_budget:.3e}"
            ));
        }
    }
    Ok(format!(
        "worst primal/dual gap {worst_gap:.1e}<= {GRADIENT_GAP_TOL:.0e}; worst fd error {worst_fd:.1e} <= {:.1e}",
        FD_CURVATURE * FD_DELTA + eps
    ))
}

// -------------------------------------------------------------------------
// 09 — descent behavior on attainable and unattainable targets
// -------------------------------------------------------------------------

#[test]
fn acceptance_09_descent_behavior() {
    gate("09 descent behavior", run_descent());
}

fn run_descent() -> Result<String, String> {
    let t = 0.25;
    let spec = GridSpec::new(1, 4.0, 513).map_err(fail("grid"))?;
    let model = model1();
    let start = Instant::now();

    // Unattainable target: the bumps curve upward faster than any forward
    // image can, so the best-approximation residual is genuinely positive
    // and descent has real work to do.
    let target = Fixture::TwoBump.sample(&spec).map_err(fail("target"))?;
    let params = DescentParams {
        max_iter: 8,
        ..DescentParams::default()
    };
    let state = inverse::descend(&model, &target, t, &params, &hopf()).map_err(fail("descent"))?;
    let j0 = state.j_history[0];
    let j_final = state.final_objective();
    if state.accepted_steps() < DESCENT_MIN_STEPS {
        return Err(format!(
            "only {} accepted steps, wanted >= {DESCENT_MIN_STEPS}",
            state.accepted_steps()
        ));
    }
    if let Some(w) = state
        .j_history
        .windows(2)
        .find(|w| w[1] >= w[0])
    {
        return Err(format!(
            "objective not strictly decreasing: {:.6e} -> {:.6e}",
            w[0], w[1]
        ));
    }
    if j_final > DESCENT_IMPROVEMENT * j0 {
        return Err(format!(
            "final objective {j_final:.3e} not below {DESCENT_IMPROVEMENT} x seed {j0:.3e}"
        ));
    }

    // Attainable target: a forward image round-trips to itself, so the seed
    // already sits at the squared scheme accuracy and no step is needed.
    let g = Fixture::GaussianBump.sample(&spec).map_err(fail("fixture"))?;
    let reachable = forward_at(&model, &g, t, &hopf())?;
    let seed = backward_to_zero(&model, &reachable, t, &hopf()).map_err(fail("backward"))?;
    let j_seed =
        inverse::evaluate_j(&model, &seed, &reachable, t, &hopf()).map_err(fail("objective"))?;
    let eps = calibrated_tolerance(Scheme::HopfLax, &spec, t).map_err(fail("calibration"))?;
    if j_seed > eps * eps {
        return Err(format!(
            "attainable seed objective {j_seed:.3e} exceeds squared accuracy {:.3e}",
            eps * eps
        ));
    }
    let easy = DescentParams {
        max_iter: 8,
        tol_abs: eps * eps,
        ..DescentParams::default()
    };
    let state2 =
        inverse::descend(&model, &reachable, t, &easy, &hopf()).map_err(fail("descent"))?;
    if state2.accepted_steps() != 0 || !matches!(state2.stop_reason, StopReason::Tolerance) {
        return Err(format!(
            "attainable target took {} steps, stop {:?}; expected immediate tolerance stop",
            state2.accepted_steps(),
            state2.stop_reason
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > DESCENT_RUNTIME_SECS {
        return Err(format!("runtime {secs:.1}s exceeds {DESCENT_RUNTIME_SECS}s"));
    }
    Ok(format!(
        "unattainable: {} steps, J {j0:.2e}->{j_final:.2e} ({:.0}%); attainable: J {j_seed:.1e} <= {:.1e}, 0 steps; {secs:.1}s",
        state.accepted_steps(),
        j_final / j0 * 100.0,
        eps * eps
    ))
}

// -------------------------------------------------------------------------
// 10 — projection against a dense QP oracle, plus certificates
// -------------------------------------------------------------------------

/// One concavity constraint row `phi[c-1] - 2 phi[c] + phi[c+1] <= bound`
/// for the dense oracle.
struct OracleRow {
    center: usize,
    bound: f64,
}

/// Dense active-set solve of: minimize ||phi - u||^2 subject to every
/// interior second difference of `phi - gauge` being nonpositive. Gram
/// matrices stay tiny (one row per active constraint), so plain Cholesky
/// is enough. Returns the exact minimizer up to feasibility round-off.
fn dense_projection(u: &[f64], rows: &[OracleRow]) -> Result<Vec<f64>, String> {
    let dot_rows = |a: usize, b: usize| -> f64 {
        match rows[a].center.abs_diff(rows[b].center) {
            0 => 6.0,
            1 => -4.0,
            2 => 1.0,
            _ => 0.0,
        }
    };
    let residual = |phi: &[f64], r: &OracleRow| -> f64 {
        phi[r.center - 1] + phi[r.center + 1] - 2.0 * phi[r.center] - r.bound
    };

    let mut working: Vec<usize> = Vec::new();
    for _step in 0..(8 * rows.len() + 8) {
        // Multipliers on the working set: G lambda = R u - b.
        let k = working.len();
        let mut lambda = vec![0.0f64; k];
        if k > 0 {
            let mut gram = vec![0.0f64; k * k];
            let mut rhs = vec![0.0f64; k];
            for (i, &wi) in working.iter().enumerate() {
                for (j, &wj) in working.iter().enumerate() {
                    gram[i * k + j] = dot_rows(wi, wj);
                }
                rhs[i] = residual(u, &rows[wi]);
            }
            // Cholesky factorization in place.
            for i in 0..k {
                for j in 0..=i {
                    let mut s = gram[i * k + j];
                    for p in 0..j {
                        s -= gram[i * k + p] * gram[j * k + p];
                    }
                    if i == j {
                        if s <= 0.0 {
                            return Err("oracle working set degenerate".into());
                        }
                        gram[i * k + i] = s.sqrt();
                    } else {
                        gram[i * k + j] = s / gram[j * k + j];
                    }
                }
            }
            for i in 0..k {
                let mut s = rhs[i];
                for p in 0..i {
                    s -= gram[i * k + p] * lambda[p];
                }
                lambda[i] = s / gram[i * k + i];
            }
            for i in (0..k).rev() {
                let mut s = lambda[i];
                for p in (i + 1)..k {
                    s -= gram[p * k + i] * lambda[p];
                }
                lambda[i] = s / gram[i * k + i];
            }
        }

        // Drop the most negative multiplier, if any.
        if let Some((slot, &worst)) = lambda
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite multipliers"))
        {
            if worst < -1e-12 {
                working.remove(slot);
                continue;
            }
        }

        // Candidate iterate for this working set.
        let mut phi = u.to_vec();
        for (i, &wi) in working.iter().enumerate() {
            let c = rows[wi].center;
            phi[c - 1] -= lambda[i];
            phi[c + 1] -= lambda[i];
            phi[c] += 2.0 * lambda[i];
        }

        // Add the worst violated constraint, or finish.
        let mut worst_idx = None;
        let mut worst_val = 1e-10;
        for (idx, r) in rows.iter().enumerate() {
            if working.contains(&idx) {
                continue;
            }
            let v = residual(&phi, r);
            if v > worst_val {
                worst_val = v;
                worst_idx = Some(idx);
            }
        }
        match worst_idx {
            Some(idx) => working.push(idx),
            None => return Ok(phi),
        }
    }
    Err("oracle active-set iteration budget exhausted".into())
}

#[test]
fn acceptance_10_projection_oracle_and_certificates() {
    gate("10 projection vs dense oracle", run_projection());
}

fn run_projection() -> Result<String, String> {
    let t = 0.5;
    let a = SymMat::new_1d(2.0).map_err(fail("matrix"))?;
    let a_inv = a.inverse();
    let mut details = Vec::new();

    // (a) The cyclic projection matches a dense active-set solve of the same
    // quadratic program on small grids.
    let mut worst_match = 0.0f64;
    for points in [33usize, 48, 64] {
        let spec = GridSpec::new(1, 3.0, points).map_err(fail("grid"))?;
        let gauge = GridFunction::sample(spec, Extension::Linear, |x| a_inv.quad(x) / (2.0 * t))
            .map_err(fail("gauge"))?;
        let rows: Vec<OracleRow> = (1..points - 1)
            .map(|c| OracleRow {
                center: c,
                bound: gauge.value(c - 1) + gauge.value(c + 1) - 2.0 * gauge.value(c),
            })
            .collect();
        let two_bump = Fixture::TwoBump.sample(&spec).map_err(fail("fixture"))?;
        let random = random_lipschitz(&spec, 5, 1.0).map_err(fail("random data"))?;
        for (label, target) in [("two-bump", &two_bump), ("random", &random)] {
            let outcome = reachability::project_l2(target, t, &a, &ProjectionParams::default())
                .map_err(fail("projection"))?;
            let oracle = dense_projection(target.values(), &rows)?;
            let oracle_fn = GridFunction::from_values(spec, oracle, Extension::Constant)
                .map_err(fail("oracle values"))?;
            let gap = l2_uniform(&outcome.projected, &oracle_fn);
            worst_match = worst_match.max(gap);
            if gap > QP_MATCH_TOL {
                return Err(format!(
                    "M={points} {label}: cyclic vs dense oracle differ by {gap:.3e} > {QP_MATCH_TOL:.0e}"
                ));
            }
        }
    }
    details.push(format!("oracle match worst {worst_match:.1e}"));

    // (b) Feasible inputs pass through unchanged.
    let spec = GridSpec::new(1, 3.0, 257).map_err(fail("grid"))?;
    let model = model1();
    let g = Fixture::GaussianBump.sample(&spec).map_err(fail("fixture"))?;
    let image = forward_at(&model, &g, t, &hopf())?;
    let fixed = reachability::project_l2(&image, t, &a, &ProjectionParams::default())
        .map_err(fail("projection"))?;
    if fixed.l2_distance > PROJECTION_FIXED_TOL {
        return Err(format!(
            "feasible input moved by {:.3e} > {PROJECTION_FIXED_TOL:.0e}",
            fixed.l2_distance
        ));
    }
    details.push(format!("feasible input moved {:.1e}", fixed.l2_distance));

    // (c) Variational inequality against sampled feasible competitors.
    let target = Fixture::TwoBump.sample(&spec).map_err(fail("target"))?;
    let projected = reachability::project_l2(&target, t, &a, &ProjectionParams::default())
        .map_err(fail("projection"))?;
    let mut worst_vi = f64::NEG_INFINITY;
    for seed in 30..40u64 {
        let data = random_lipschitz(&spec, seed, 0.8).map_err(fail("random data"))?;
        let psi = forward_at(&model, &data, t, &hopf())?; // forward images are feasible
        let vi = reachability::variational_inequality(&target, &projected.projected, &psi)
            .map_err(fail("certificate"))?;
        worst_vi = worst_vi.max(vi);
        if vi > PROJECTION_FIXED_TOL {
            return Err(format!(
                "seed {seed}: variational inequality {vi:.3e} > {PROJECTION_FIXED_TOL:.0e}"
            ));
        }
    }
    details.push(format!("worst VI {worst_vi:.1e}"));

    // (d) The pullback-pushforward envelope dominates the target and can do
    // no better (in L2) than the true projection.
    for fixture in [Fixture::TwoBump, Fixture::AbsKink] {
        let u_t = fixture.sample(&spec).map_err(fail("fixture"))?;
        let env = hjinv_core::solver::semiconcave_envelope(&model, &u_t, t, &hopf())
            .map_err(fail("envelope"))?;
        let slack_budget = scheme_tolerance(Scheme::HopfLax, spec.spacing(), 0.0);
        let min_slack = env
            .values()
            .iter()
            .zip(u_t.values())
            .map(|(e, u)| e - u)
            .fold(f64::INFINITY, f64::min);
        if min_slack < -slack_budget {
            return Err(format!(
                "{}: envelope dips {min_slack:.3e} below the target (budget {slack_budget:.1e})",
                fixture.name()
            ));
        }
        let proj = reachability::project_l2(&u_t, t, &a, &ProjectionParams::default())
            .map_err(fail("projection"))?;
        let env_dist = l2_uniform(&env, &u_t);
        if env_dist < proj.l2_distance - QP_MATCH_TOL {
            return Err(format!(
                "{}: envelope distance {env_dist:.4e} beats the projection {:.4e}",
                fixture.name(),
                proj.l2_distance
            ));
        }
        details.push(format!(
            "{}: envelope {env_dist:.2e} >= projection {:.2e}",
            fixture.name(),
            proj.l2_distance
        ));
    }
    Ok(details.join("; "))
}

// -------------------------------------------------------------------------
// 11 — deterministic artifacts
// -------------------------------------------------------------------------

#[test]
fn acceptance_11_selftest_determinism() {
    gate("11 selftest determinism", run_determinism());
}

fn run_determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(fail("tempdir"))?;
    let mut manifests = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}"));
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_hjinv"))
            .args(["selftest", "--output-dir"])
            .arg(&out)
            .output()
            .map_err(fail("spawn"))?;
        if !status.status.success() {
            return Err(format!(
                "selftest run {run} failed:\n{}",
                String::from_utf8_lossy(&status.stdout)
            ));
        }
        let manifest = std::fs::read(out.join("manifest.json")).map_err(fail("manifest"))?;
        let report = std::fs::read(out.join("selftest_report.json")).map_err(fail("report"))?;
        manifests.push((manifest, report));
    }
    if manifests[0].0 != manifests[1].0 {
        return Err("manifests differ between identical runs".into());
    }
    if manifests[0].1 != manifests[1].1 {
        return Err("reports differ between identical runs".into());
    }
    Ok(format!(
        "two runs, manifests byte-identical ({} bytes)",
        manifests[0].0.len()
    ))
}
