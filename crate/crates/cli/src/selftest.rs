//! Built-in property battery: a dozen deterministic checks that exercise
//! every pipeline at reduced resolution. All parameters are fixed constants,
//! so two runs produce identical artifacts and identical manifests.

use serde::Serialize;

use hjinv_core::fixtures::{random_lipschitz, Fixture};
use hjinv_core::geometry::SymMat;
use hjinv_core::grid::{sup_distance, Extension, GridFunction, GridSpec};
use hjinv_core::hamiltonian::HamiltonianModel;
use hjinv_core::inverse::{self, DescentParams};
use hjinv_core::reachability::{self, ProjectionParams};
use hjinv_core::solver::{
    forward_solve, scheme_tolerance, semiconcave_envelope, semigroup_defect, Scheme,
    SolverOptions,
};
use hjinv_core::transport::{
    backward_reversible, duality_pairing, extend_measure_at_zero, forward_duality_solution,
};
use hjinv_core::{characteristics, io};

use crate::artifacts::RunWriter;
use crate::config::{RawConfig, RawData, RawRun, SectionNeeds};
use crate::CliError;

#[derive(Serialize)]
struct CheckRecord {
    name: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct SelftestReport {
    passed: usize,
    total: usize,
    checks: Vec<CheckRecord>,
}

type CheckFn = fn() -> Result<String, String>;

fn hopf() -> SolverOptions {
    SolverOptions::new(Scheme::HopfLax)
}

fn model1() -> HamiltonianModel {
    HamiltonianModel::standard_quadratic(1).expect("dimension 1 is valid")
}

fn fail<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> String + '_ {
    move |e| format!("{context}: {e}")
}

// --------------------------------------------------------------------------
// The checks
// --------------------------------------------------------------------------

/// Forward solution of the cone against its closed form, direct scheme.
fn check_closed_form_cone() -> Result<String, String> {
    let t = 0.5;
    let spec = GridSpec::new(1, 3.0, 257).map_err(fail("grid"))?;
    let u0 = Fixture::AbsKink.sample(&spec).map_err(fail("fixture"))?;
    let got = forward_solve(&model1(), &u0, &[0.0, t], &hopf())
        .map_err(fail("solve"))?
        .into_last();
    let exact = GridFunction::sample(spec, Extension::Linear, |x| {
        let r = x[0].abs();
        if r <= 2.0 * t {
            r * r / (4.0 * t)
        } else {
            r - t
        }
    })
    .map_err(fail("closed form"))?;
    let err = sup_distance(&got, &exact, &spec.full_window()).map_err(fail("norm"))?;
    let budget = 2.0 * spec.spacing();
    if err <= budget {
        Ok(format!("sup error {err:.3e} <= {budget:.3e}"))
    } else {
        Err(format!("sup error {err:.3e} exceeds {budget:.3e}"))
    }
}

/// Sup-norm contraction of the forward operator on a random pair.
fn check_contraction() -> Result<String, String> {
    let t = 0.4;
    let spec = GridSpec::new(1, 3.0, 257).map_err(fail("grid"))?;
    let u0 = random_lipschitz(&spec, 1, 1.0).map_err(fail("fixture"))?;
    let u1 = random_lipschitz(&spec, 2, 1.0).map_err(fail("fixture"))?;
    let s0 = forward_solve(&model1(), &u0, &[0.0, t], &hopf())
        .map_err(fail("solve"))?
        .into_last();
    let s1 = forward_solve(&model1(), &u1, &[0.0, t], &hopf())
        .map_err(fail("solve"))?
        .into_last();
    let full = spec.full_window();
    let after = sup_distance(&s0, &s1, &full).map_err(fail("norm"))?;
    let before = sup_distance(&u0, &u1, &full).map_err(fail("norm"))?;
    let h = spec.spacing();
    let eps = scheme_tolerance(Scheme::HopfLax, h, h);
    if after <= before + eps {
        Ok(format!("{after:.6} <= {before:.6} + {eps:.1e}"))
    } else {
        Err(format!("{after:.6} > {before:.6} + {eps:.1e}"))
    }
}

/// Backward-forward-backward round trip reproduces the forward image.
fn check_ping_pong() -> Result<String, String> {
    let t = 0.5;
    let spec = GridSpec::new(1, 3.0, 257).map_err(fail("grid"))?;
    let u0 = Fixture::AbsKink.sample(&spec).map_err(fail("fixture"))?;
    let fwd = forward_solve(&model1(), &u0, &[0.0, t], &hopf())
        .map_err(fail("solve"))?
        .into_last();
    let again = semiconcave_envelope(&model1(), &fwd, t, &hopf()).map_err(fail("envelope"))?;
    let err = sup_distance(&fwd, &again, &spec.full_window()).map_err(fail("norm"))?;
    let h = spec.spacing();
    let eps = scheme_tolerance(Scheme::HopfLax, h, h);
    if err <= eps {
        Ok(format!("round-trip defect {err:.3e} <= {eps:.1e}"))
    } else {
        Err(format!("round-trip defect {err:.3e} exceeds {eps:.1e}"))
    }
}

/// Two-leg versus one-leg evolution agree.
fn check_semigroup() -> Result<String, String> {
    let spec = GridSpec::new(1, 3.0, 257).map_err(fail("grid"))?;
    let u0 = Fixture::GaussianBump.sample(&spec).map_err(fail("fixture"))?;
    let (defect, _) =
        semigroup_defect(&model1(), &u0, 0.2, 0.3, &hopf()).map_err(fail("defect"))?;
    let h = spec.spacing();
    let eps = scheme_tolerance(Scheme::HopfLax, h, h);
    if defect <= eps {
        Ok(format!("defect {defect:.3e} <= {eps:.1e}"))
    } else {
        Err(format!("defect {defect:.3e} exceeds {eps:.1e}"))
    }
}

/// Difference quotients approach the composed derivative monotonically.
fn check_gateaux_convergence() -> Result<String, String> {
    // A short horizon keeps part of the trusted window outside the kink's
    // rarefaction fan, so the difference quotients trace a genuine
    // first-order ladder instead of collapsing to the exact pinned value.
    let t = 0.3;
    let spec = GridSpec::new(1, 3.0, 257).map_err(fail("grid"))?;
    let u0 = Fixture::AbsKink.sample(&spec).map_err(fail("fixture"))?;
    let w = Fixture::GaussianBump.sample(&spec).map_err(fail("fixture"))?;
    let model = model1();
    let margin = model.p_speed_bound(u0.lip_bound() + 1.0) * t + 2.0 * spec.spacing();
    let window = spec.inner_window(margin).map_err(fail("window"))?;
    let report = characteristics::convergence_report(
        &model,
        &u0,
        &w,
        t,
        &[1e-1, 1e-2, 1e-3],
        &window,
        &hopf(),
    )
    .map_err(fail("report"))?;
    if report.monotone && report.plateau {
        Ok(format!(
            "distances {:?}, floor {:.3e}",
            report
                .distances
                .iter()
                .map(|d| format!("{d:.2e}"))
                .collect::<Vec<_>>(),
            report.scheme_floor
        ))
    } else {
        Err(format!(
            "monotone={}, plateau={}, distances {:?}",
            report.monotone, report.plateau, report.distances
        ))
    }
}

/// The duality pairing is conserved along the fan transport.
fn check_pairing_drift() -> Result<String, String> {
    let tau = 0.5;
    let spec = GridSpec::new(1, 3.0, 513).map_err(fail("grid"))?;
    let u0 = Fixture::AbsKink.sample(&spec).map_err(fail("fixture"))?;
    let w = GridFunction::sample(spec, Extension::Constant, |x| {
        0.7 * (-(x[0] - 0.2) * (x[0] - 0.2)).exp()
    })
    .map_err(fail("direction"))?;
    let pi_t = GridFunction::sample(spec, Extension::Constant, |x| {
        (1.5 - x[0].abs()).max(0.0) * 0.5
    })
    .map_err(fail("density"))?;
    let sample_times = [0.1, 0.2, 0.3, 0.4, tau];
    let mut schedule = vec![0.0];
    schedule.extend_from_slice(&sample_times);
    let model = model1();
    let field = forward_duality_solution(&model, &u0, &w, &schedule, &hopf())
        .map_err(fail("duality field"))?;
    let measures = backward_reversible(&model, &u0, tau, &pi_t, &sample_times, &hopf())
        .map_err(fail("backward transport"))?;
    let series = duality_pairing(&field, &measures).map_err(fail("pairing"))?;
    if series.max_relative_drift <= 0.01 {
        Ok(format!("drift {:.4e} <= 1e-2", series.max_relative_drift))
    } else {
        Err(format!(
            "drift {:.4e} exceeds 1e-2 (values {:?})",
            series.max_relative_drift, series.values
        ))
    }
}

/// The fan of the cone collapses a uniform density into a single atom.
fn check_atom_formation() -> Result<String, String> {
    let tau = 0.5;
    let spec = GridSpec::new(1, 3.0, 513).map_err(fail("grid"))?;
    let u0 = Fixture::AbsKink.sample(&spec).map_err(fail("fixture"))?;
    let pi_t = GridFunction::sample(spec, Extension::Constant, |x| {
        if x[0].abs() <= 1.5 {
            1.0
        } else {
            0.0
        }
    })
    .map_err(fail("density"))?;
    let measure = extend_measure_at_zero(&model1(), &u0, tau, &pi_t, &hopf())
        .map_err(fail("extension"))?;
    let h = spec.spacing();
    if measure.atoms().len() != 1 {
        return Err(format!("expected one atom, got {}", measure.atoms().len()));
    }
    let (pos, mass) = measure.atoms()[0];
    if pos[0].abs() > 2.0 * h {
        return Err(format!("atom at {:.4}, expected |x| <= {:.4}", pos[0], 2.0 * h));
    }
    let expected = 4.0 * tau;
    if (mass - expected).abs() <= 0.02 * expected {
        Ok(format!("one atom at {:.2e} with mass {mass:.4} ~ {expected}", pos[0]))
    } else {
        Err(format!("atom mass {mass:.4} vs expected {expected} (2% budget)"))
    }
}

/// Projection fixes reachable inputs and satisfies the variational
/// inequality against a sampled reachable competitor.
fn check_projection() -> Result<String, String> {
    let t = 0.5;
    let spec = GridSpec::new(1, 3.0, 129).map_err(fail("grid"))?;
    let a = SymMat::new_1d(2.0).map_err(fail("matrix"))?;
    let model = model1();
    let u0 = random_lipschitz(&spec, 3, 1.0).map_err(fail("fixture"))?;
    let reachable = forward_solve(&model, &u0, &[0.0, t], &hopf())
        .map_err(fail("solve"))?
        .into_last();
    let params = ProjectionParams::default();
    let outcome =
        reachability::project_l2(&reachable, t, &a, &params).map_err(fail("project"))?;
    if outcome.l2_distance > 1e-6 {
        return Err(format!(
            "reachable input moved by {:.3e} (> 1e-6)",
            outcome.l2_distance
        ));
    }
    // Project an unreachable target and test optimality.
    let target = Fixture::TwoBump.sample(&spec).map_err(fail("fixture"))?;
    let projected =
        reachability::project_l2(&target, t, &a, &params).map_err(fail("project"))?;
    let vi = reachability::variational_inequality(&target, &projected.projected, &reachable)
        .map_err(fail("vi"))?;
    if vi <= 1e-6 {
        Ok(format!(
            "reachable fixed ({:.1e}); VI {vi:.3e} <= 1e-6",
            outcome.l2_distance
        ))
    } else {
        Err(format!("variational inequality violated: {vi:.3e} > 1e-6"))
    }
}

/// The inverse-design cone accepts its apex and an off-contact bump.
fn check_cone_membership() -> Result<String, String> {
    let t = 0.5;
    let spec = GridSpec::new(1, 3.0, 257).map_err(fail("grid"))?;
    let a = SymMat::new_1d(2.0).map_err(fail("matrix"))?;
    let model = model1();
    let kink = Fixture::AbsKink.sample(&spec).map_err(fail("fixture"))?;
    let phi_star = semiconcave_envelope(&model, &kink, t, &hopf()).map_err(fail("envelope"))?;
    let cone =
        reachability::inverse_design_cone(&phi_star, t, &a, &hopf(), None).map_err(fail("cone"))?;
    let eps = 3.0 * scheme_tolerance(Scheme::HopfLax, spec.spacing(), 0.0);
    let apex_ok = cone
        .membership(&cone.apex, eps)
        .map_err(fail("membership"))?
        .member;
    if !apex_ok {
        return Err("apex rejected from its own cone".into());
    }
    let bump = GridFunction::sample(spec, Extension::Constant, |x| {
        let s = (x[0] - 2.55).abs();
        if s < 0.25 {
            0.15 * (1.0 + (std::f64::consts::PI * s / 0.25).cos())
        } else {
            0.0
        }
    })
    .map_err(fail("bump"))?;
    let member = cone.apex.add(&bump).map_err(fail("add"))?;
    let verdict = cone.membership(&member, eps).map_err(fail("membership"))?;
    if verdict.member {
        Ok("apex and off-contact perturbation both accepted".into())
    } else {
        Err(format!("off-contact perturbation rejected: {verdict:?}"))
    }
}

/// Gradient descent strictly decreases the objective on an unreachable
/// target.
fn check_descent_progress() -> Result<String, String> {
    let t = 0.25;
    let spec = GridSpec::new(1, 4.0, 257).map_err(fail("grid"))?;
    let target = Fixture::TwoBump.sample(&spec).map_err(fail("fixture"))?;
    let params = DescentParams {
        max_iter: 2,
        ..DescentParams::default()
    };
    let state =
        inverse::descend(&model1(), &target, t, &params, &hopf()).map_err(fail("descend"))?;
    let strictly_decreasing = state.j_history.windows(2).all(|p| p[1] < p[0]);
    if state.accepted_steps() >= 1 && strictly_decreasing {
        Ok(format!(
            "objective {:?} over {} accepted steps",
            state
                .j_history
                .iter()
                .map(|j| format!("{j:.4e}"))
                .collect::<Vec<_>>(),
            state.accepted_steps()
        ))
    } else {
        Err(format!(
            "no strict progress: history {:?}, stop {:?}",
            state.j_history, state.stop_reason
        ))
    }
}

/// The primal and dual directional derivatives agree.
fn check_gradient_agreement() -> Result<String, String> {
    // The primal/dual gap shrinks with the spacing; the finer grid keeps the
    // agreement comfortably inside the 1e-2 budget.
    let t = 0.4;
    let spec = GridSpec::new(1, 3.0, 1025).map_err(fail("grid"))?;
    let u0 = Fixture::GaussianBump.sample(&spec).map_err(fail("fixture"))?;
    let target = Fixture::Zero.sample(&spec).map_err(fail("fixture"))?;
    let w = Fixture::GaussianBump.sample(&spec).map_err(fail("fixture"))?;
    let d = inverse::directional_derivative(&model1(), &u0, &target, t, &w, &hopf())
        .map_err(fail("derivative"))?;
    let denom = d.primal.abs().max(d.dual.abs());
    let gap = if denom < 1e-14 {
        0.0
    } else {
        (d.primal - d.dual).abs() / denom
    };
    if gap <= 1e-2 {
        Ok(format!(
            "primal {:.6e} vs dual {:.6e} (gap {gap:.2e})",
            d.primal, d.dual
        ))
    } else {
        Err(format!(
            "primal {:.6e} vs dual {:.6e} disagree (gap {gap:.2e})",
            d.primal, d.dual
        ))
    }
}

/// Serializing the same derivative twice yields identical bytes.
fn check_determinism() -> Result<String, String> {
    let t = 0.5;
    let spec = GridSpec::new(1, 3.0, 257).map_err(fail("grid"))?;
    let u0 = Fixture::AbsKink.sample(&spec).map_err(fail("fixture"))?;
    let w = Fixture::GaussianBump.sample(&spec).map_err(fail("fixture"))?;
    let model = model1();
    let once = characteristics::gateaux_derivative_from_initial(&model, &u0, &w, t, &hopf())
        .map_err(fail("derivative"))?;
    let twice = characteristics::gateaux_derivative_from_initial(&model, &u0, &w, t, &hopf())
        .map_err(fail("derivative"))?;
    let a = io::grid_function_to_string(&once);
    let b = io::grid_function_to_string(&twice);
    if a == b {
        Ok(format!("{} bytes, byte-identical across runs", a.len()))
    } else {
        Err("repeated derivative serializations differ".into())
    }
}

// --------------------------------------------------------------------------
// Driver
// --------------------------------------------------------------------------

const CHECKS: &[(&str, CheckFn)] = &[
    ("closed-form-cone", check_closed_form_cone),
    ("contraction", check_contraction),
    ("ping-pong", check_ping_pong),
    ("semigroup", check_semigroup),
    ("gateaux-convergence", check_gateaux_convergence),
    ("pairing-drift", check_pairing_drift),
    ("atom-formation", check_atom_formation),
    ("projection", check_projection),
    ("cone-membership", check_cone_membership),
    ("descent-progress", check_descent_progress),
    ("gradient-agreement", check_gradient_agreement),
    ("determinism", check_determinism),
];

pub fn run(output_dir: &std::path::Path) -> Result<(), CliError> {
    let mut writer = RunWriter::create(output_dir, "selftest", 0)?;

    // The battery's scenario is fixed; echo the built-in defaults it grew
    // from so every run carries a resolved-config record.
    let raw = RawConfig {
        run: Some(RawRun {
            horizon: Some(0.5),
            ..RawRun::default()
        }),
        initial: Some(RawData {
            fixture: Some("abs-kink".into()),
            ..RawData::default()
        }),
        ..RawConfig::default()
    };
    let needs = SectionNeeds {
        initial: true,
        ..SectionNeeds::default()
    };
    let scenario = crate::config::resolve(&raw, needs, Some(output_dir))?;
    writer.write_resolved_config(&scenario.resolved)?;

    let mut checks = Vec::new();
    let mut passed = 0;
    for (name, check) in CHECKS {
        let (pass, detail) = match check() {
            Ok(detail) => (true, detail),
            Err(detail) => (false, detail),
        };
        if pass {
            passed += 1;
        }
        println!("{}: {name} — {detail}", if pass { "PASS" } else { "FAIL" });
        checks.push(CheckRecord {
            name,
            pass,
            detail,
        });
    }
    let total = checks.len();
    let report = SelftestReport {
        passed,
        total,
        checks,
    };
    writer.write_json("selftest_report.json", &report)?;
    writer.finish()?;

    println!("selftest: {passed}/{total} checks passed");
    if passed == total {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "selftest failed: {}/{total} checks passed",
            passed
        )))
    }
}
