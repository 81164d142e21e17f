//! One function per run subcommand. Each takes the resolved scenario and an
//! artifact writer, performs the pipeline, writes its artifacts, and prints a
//! short summary to stdout.

use serde::Serialize;

use hjinv_core::grid::{norms, GridFunction, Window};
use hjinv_core::solver::{
    backward_solve, backward_to_zero, forward_solve, scheme_tolerance, semiconcave_envelope,
    SolveResult,
};
use hjinv_core::transport::{
    backward_reversible, duality_pairing, extend_measure_at_zero, forward_duality_solution,
    DiscreteMeasure,
};
use hjinv_core::{characteristics, inverse, reachability};

use crate::artifacts::{
    descent_plot_script, profile_plot_script, projection_plot_script, RunWriter,
};
use crate::config::{reachability_matrix, Scenario};
use crate::CliError;

/// Spatial window on which derived quantities are trustworthy: far enough
/// from the truncation boundary that nothing propagated from it by time `t`.
fn trusted_window(s: &Scenario, data: &GridFunction, t: f64) -> Result<Window, CliError> {
    let margin = s.model.p_speed_bound(data.lip_bound() + 1.0) * t + 2.0 * s.spec.spacing();
    s.spec.inner_window(margin).map_err(CliError::from)
}

fn require_data<'a>(
    data: &'a Option<GridFunction>,
    what: &str,
) -> Result<&'a GridFunction, CliError> {
    data.as_ref().ok_or_else(|| {
        CliError::Config(format!("internal: section `{what}` was not resolved"))
    })
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs());
    if denom < 1e-14 {
        0.0
    } else {
        (a - b).abs() / denom
    }
}

fn write_slices(
    writer: &mut RunWriter,
    prefix: &str,
    result: &SolveResult,
) -> Result<Vec<(String, String)>, CliError> {
    let mut curves = Vec::new();
    for (i, (t, slice)) in result.slices.iter().enumerate() {
        let name = format!("{prefix}_{i:03}.csv");
        writer.write_grid_function(&name, slice)?;
        curves.push((name, format!("t={t:.4}")));
    }
    Ok(curves)
}

#[derive(Serialize)]
struct SliceIndexEntry {
    file: String,
    time: f64,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    slices: Vec<SliceIndexEntry>,
    diagnostics: &'a [hjinv_core::solver::StepDiagnostics],
}

fn write_solve_report(
    writer: &mut RunWriter,
    prefix: &str,
    result: &SolveResult,
) -> Result<(), CliError> {
    let report = SolveReport {
        slices: result
            .slices
            .iter()
            .enumerate()
            .map(|(i, (t, _))| SliceIndexEntry {
                file: format!("{prefix}_{i:03}.csv"),
                time: *t,
            })
            .collect(),
        diagnostics: &result.diagnostics,
    };
    writer.write_json("diagnostics.json", &report)
}

fn plot_profiles(
    writer: &mut RunWriter,
    s: &Scenario,
    title: &str,
    curves: &[(String, String)],
) -> Result<(), CliError> {
    let script = profile_plot_script(
        title,
        s.spec.half_width(),
        s.spec.spacing(),
        s.spec.dim(),
        s.spec.points_per_axis(),
        curves,
    );
    writer.write_string("plot.gp", &script)
}

// ---------------------------------------------------------------------------
// solve / backward / envelope
// ---------------------------------------------------------------------------

pub fn solve(s: &Scenario, writer: &mut RunWriter) -> Result<(), CliError> {
    let u0 = require_data(&s.initial, "initial")?;
    let schedule = &s.resolved.run.schedule;
    let result = forward_solve(&s.model, u0, schedule, &s.options)?;
    let curves = write_slices(writer, "slice", &result)?;
    write_solve_report(writer, "slice", &result)?;
    plot_profiles(writer, s, "Forward solution", &curves)?;
    let last = result.last();
    println!(
        "forward solution at t={:.4}: range [{:.6}, {:.6}], Lipschitz {:.4}",
        schedule.last().expect("validated nonempty"),
        last.values().iter().cloned().fold(f64::INFINITY, f64::min),
        last.values()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max),
        last.measured_lip(),
    );
    Ok(())
}

pub fn backward(s: &Scenario, writer: &mut RunWriter) -> Result<(), CliError> {
    let target = require_data(&s.target, "target")?;
    // Slice at schedule time s is the target carried backward for s units.
    let schedule = &s.resolved.run.schedule;
    let result = backward_solve(&s.model, target, schedule, &s.options)?;
    let curves = write_slices(writer, "backward", &result)?;
    write_solve_report(writer, "backward", &result)?;
    plot_profiles(writer, s, "Backward reconstruction", &curves)?;
    let last = result.last();
    println!(
        "backward reconstruction after {:.4} time units: range [{:.6}, {:.6}]",
        schedule.last().expect("validated nonempty"),
        last.values().iter().cloned().fold(f64::INFINITY, f64::min),
        last.values()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max),
    );
    Ok(())
}

#[derive(Serialize)]
struct EnvelopeReport {
    horizon: f64,
    /// Smallest nodewise `envelope - target`; the envelope majorizes the
    /// target up to scheme error, with equality exactly on reachable targets.
    min_slack: f64,
    sup_gap: f64,
    l2_gap: f64,
    scheme_budget: f64,
}

pub fn envelope(s: &Scenario, writer: &mut RunWriter) -> Result<(), CliError> {
    let target = require_data(&s.target, "target")?;
    let env = semiconcave_envelope(&s.model, target, s.horizon, &s.options)?;
    writer.write_grid_function("envelope.csv", &env)?;
    writer.write_grid_function("target.csv", target)?;

    let window = trusted_window(s, target, s.horizon)?;
    let diff = env.sub(target)?;
    let min_slack = diff.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let gap_norms = norms(&diff, &window)?;
    let h = s.spec.spacing();
    let report = EnvelopeReport {
        horizon: s.horizon,
        min_slack,
        sup_gap: gap_norms.sup,
        l2_gap: gap_norms.l2,
        scheme_budget: scheme_tolerance(s.scheme, h, s.options.dt.unwrap_or(h)),
    };
    writer.write_json("report.json", &report)?;
    plot_profiles(
        writer,
        s,
        "Reachable envelope",
        &[
            ("target.csv".into(), "target".into()),
            ("envelope.csv".into(), "envelope".into()),
        ],
    )?;
    println!(
        "envelope gap over trusted window: sup {:.3e}, L2 {:.3e} (min slack {:.3e})",
        report.sup_gap, report.l2_gap, report.min_slack
    );
    println!("a gap of zero (within scheme error) means the target is reachable");
    Ok(())
}

// ---------------------------------------------------------------------------
// gateaux
// ---------------------------------------------------------------------------

pub fn gateaux(s: &Scenario, writer: &mut RunWriter) -> Result<(), CliError> {
    let u0 = require_data(&s.initial, "initial")?;
    let w = require_data(&s.direction, "direction")?;
    let t = s.horizon;

    let (u_t, phi) = characteristics::phi_map_from_initial(&s.model, u0, t, &s.options)?;
    let derivative = characteristics::gateaux_derivative(&phi, w)?;
    writer.write_grid_function("solution.csv", &u_t)?;
    writer.write_string("phi_map.csv", &hjinv_core::io::phi_map_to_string(&phi))?;
    writer.write_grid_function("derivative.csv", &derivative)?;

    let window = trusted_window(s, u0, t)?;
    let report =
        characteristics::convergence_report(&s.model, u0, w, t, &s.deltas, &window, &s.options)?;
    writer.write_json("convergence_report.json", &report)?;

    let smallest = *s.deltas.last().expect("validated nonempty");
    let fd = characteristics::fd_directional(&s.model, u0, w, t, smallest, &s.options)?;
    writer.write_grid_function("fd_best.csv", &fd)?;
    plot_profiles(
        writer,
        s,
        "Directional derivative",
        &[
            ("derivative.csv".into(), "composed derivative".into()),
            (
                "fd_best.csv".into(),
                format!("difference quotient, delta={smallest:.1e}"),
            ),
        ],
    )?;

    println!("difference-quotient convergence (L1 over trusted window):");
    for (d, dist) in report.deltas.iter().zip(&report.distances) {
        println!("  delta {d:.3e} -> distance {dist:.6e}");
    }
    println!(
        "scheme floor {:.3e}; monotone: {}; plateau reached: {}",
        report.scheme_floor, report.monotone, report.plateau
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// transport
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TransportReport<'a> {
    tau: f64,
    pairing: &'a hjinv_core::transport::PairingSeries,
    measure_files: Vec<SliceIndexEntry>,
    duality_files: Vec<SliceIndexEntry>,
    atoms_at_zero: usize,
    mass_at_zero: f64,
}

fn measure_summary(m: &DiscreteMeasure) -> String {
    format!(
        "{} particles, {} atoms, total mass {:.6}",
        m.particles().len(),
        m.atoms().len(),
        m.total_mass()
    )
}

pub fn transport(s: &Scenario, writer: &mut RunWriter) -> Result<(), CliError> {
    let u0 = require_data(&s.initial, "initial")?;
    let pi = require_data(&s.transport_pi, "transport.pi")?;
    let w = require_data(&s.transport_w, "transport.w")?;
    let tau = s.transport_tau;

    // Duality field of the perturbation w along the flow, sampled at 0 and
    // at every measure sample time.
    let mut schedule = vec![0.0];
    schedule.extend_from_slice(&s.sample_times);
    let field = forward_duality_solution(&s.model, u0, w, &schedule, &s.options)?;
    let mut duality_files = Vec::new();
    for (i, (t, slice)) in field.times.iter().zip(&field.slices).enumerate() {
        let name = format!("v_{i:03}.csv");
        writer.write_grid_function(&name, slice)?;
        duality_files.push(SliceIndexEntry {
            file: name,
            time: *t,
        });
    }

    // The terminal density carried backward to each sample time...
    let measures = backward_reversible(&s.model, u0, tau, pi, &s.sample_times, &s.options)?;
    let mut measure_files = Vec::new();
    for (i, (t, m)) in measures.iter().enumerate() {
        let name = format!("measure_{i:03}.csv");
        writer.write_measure(&name, m)?;
        measure_files.push(SliceIndexEntry {
            file: name,
            time: *t,
        });
    }
    // ... and all the way to time zero, where crossings become atoms.
    let at_zero = extend_measure_at_zero(&s.model, u0, tau, pi, &s.options)?;
    writer.write_measure("measure_zero.csv", &at_zero)?;

    let pairing = duality_pairing(&field, &measures)?;
    let mut pairing_csv = String::from("time,pairing\n");
    for (t, v) in pairing.times.iter().zip(&pairing.values) {
        pairing_csv.push_str(&format!("{t},{v}\n"));
    }
    writer.write_string("pairing.csv", &pairing_csv)?;

    let report = TransportReport {
        tau,
        pairing: &pairing,
        measure_files,
        duality_files,
        atoms_at_zero: at_zero.atoms().len(),
        mass_at_zero: at_zero.total_mass(),
    };
    writer.write_json("pairing.json", &report)?;

    println!(
        "duality pairing over {} sample times: max relative drift {:.4e}",
        pairing.times.len(),
        pairing.max_relative_drift
    );
    println!("measure at time zero: {}", measure_summary(&at_zero));
    Ok(())
}

// ---------------------------------------------------------------------------
// grad
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct AgreementReport {
    objective: f64,
    primal: f64,
    dual: f64,
    rel_gap: f64,
    gradient_total_variation: f64,
    gradient_atoms: usize,
}

pub fn grad(s: &Scenario, writer: &mut RunWriter) -> Result<(), CliError> {
    let u0 = require_data(&s.initial, "initial")?;
    let target = require_data(&s.target, "target")?;
    let w = require_data(&s.direction, "direction")?;
    let t = s.horizon;

    let objective = inverse::evaluate_j(&s.model, u0, target, t, &s.options)?;
    let measure = inverse::gradient_measure(&s.model, u0, target, t, &s.options)?;
    writer.write_measure("gradient.csv", &measure)?;

    let derivative =
        inverse::directional_derivative(&s.model, u0, target, t, w, &s.options)?;
    let report = AgreementReport {
        objective,
        primal: derivative.primal,
        dual: derivative.dual,
        rel_gap: rel_gap(derivative.primal, derivative.dual),
        gradient_total_variation: measure.total_variation(),
        gradient_atoms: measure.atoms().len(),
    };
    writer.write_json("agreement.json", &report)?;

    // A plottable mollified representative of the gradient (optional: the
    // mollifier refuses measures it cannot turn into a descent direction).
    let eta = s.descent.eta.unwrap_or(4.0 * s.spec.spacing());
    match inverse::mollify_gradient(&measure, &s.spec, eta) {
        Ok(direction) => {
            writer.write_grid_function("mollified.csv", &direction)?;
            plot_profiles(
                writer,
                s,
                "Mollified gradient",
                &[("mollified.csv".into(), "mollified gradient".into())],
            )?;
        }
        Err(hjinv_core::Error::Stall(msg)) => {
            println!("note: no mollified gradient written ({msg})");
        }
        Err(e) => return Err(e.into()),
    }

    println!(
        "objective {:.6e}; directional derivative primal {:.6e} vs dual {:.6e} \
         (relative gap {:.3e})",
        objective, report.primal, report.dual, report.rel_gap
    );
    println!("gradient measure: {}", measure_summary(&measure));
    Ok(())
}

// ---------------------------------------------------------------------------
// invert
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DescentLog {
    objective_history: Vec<f64>,
    accepted_steps: usize,
    step_sizes: Vec<f64>,
    lipschitz_history: Vec<f64>,
    stop_reason: inverse::StopReason,
    gradient_total_variation: f64,
    initial_objective: f64,
    final_objective: f64,
}

pub fn invert(s: &Scenario, writer: &mut RunWriter) -> Result<(), CliError> {
    let target = require_data(&s.target, "target")?;
    let t = s.horizon;

    let seed_iterate = backward_to_zero(&s.model, target, t, &s.options)?;
    let state = inverse::descend(&s.model, target, t, &s.descent, &s.options)?;
    let regularized = inverse::regularize(&s.model, &state.iterate, t, &s.options)?;
    let terminal = forward_solve(&s.model, &state.iterate, &[0.0, t], &s.options)?.into_last();

    writer.write_grid_function("target.csv", target)?;
    writer.write_grid_function("u0_initial.csv", &seed_iterate)?;
    writer.write_grid_function("u0_final.csv", &state.iterate)?;
    writer.write_grid_function("u0_regularized.csv", &regularized)?;
    writer.write_grid_function("terminal_final.csv", &terminal)?;
    writer.write_measure("gradient_final.csv", &state.grad_measure)?;

    let log = DescentLog {
        objective_history: state.j_history.clone(),
        accepted_steps: state.accepted_steps(),
        step_sizes: state.gamma_history.clone(),
        lipschitz_history: state.lip_history.clone(),
        stop_reason: state.stop_reason,
        gradient_total_variation: state.grad_measure.total_variation(),
        initial_objective: state.j_history[0],
        final_objective: state.final_objective(),
    };
    writer.write_json("descent_log.json", &log)?;

    let mut history_csv = String::from("step,objective,step_size\n");
    for (i, j) in state.j_history.iter().enumerate() {
        if i == 0 {
            history_csv.push_str(&format!("0,{j},\n"));
        } else {
            history_csv.push_str(&format!("{i},{j},{}\n", state.gamma_history[i - 1]));
        }
    }
    writer.write_string("descent_history.csv", &history_csv)?;
    writer.write_string(
        "fig1.gp",
        &descent_plot_script(
            s.spec.half_width(),
            s.spec.spacing(),
            s.spec.dim(),
            s.spec.points_per_axis(),
        ),
    )?;

    println!(
        "descent: J {:.6e} -> {:.6e} in {} accepted steps (stopped: {:?})",
        log.initial_objective,
        log.final_objective,
        log.accepted_steps,
        state.stop_reason
    );
    if log.accepted_steps == 0 && log.initial_objective <= s.descent.tol_abs {
        println!("the backward reconstruction already attains the target (reachable)");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// project / check / cone
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ProjectReport {
    sweeps: usize,
    max_violation: f64,
    l2_distance: f64,
    reachable_after: bool,
    min_obstacle_residual: f64,
}

pub fn project(s: &Scenario, writer: &mut RunWriter) -> Result<(), CliError> {
    let target = require_data(&s.target, "target")?;
    let a = reachability_matrix(s)?;
    let t = s.horizon;

    let outcome = reachability::project_l2(target, t, &a, &s.projection)?;
    writer.write_grid_function("target.csv", target)?;
    writer.write_grid_function("projected.csv", &outcome.projected)?;

    let post = reachability::is_reachable(&outcome.projected, t, &a, None)?;
    let obstacle = reachability::obstacle_residual(&outcome.projected, target, t, &a)?;
    writer.write_grid_function("obstacle_residual.csv", &obstacle)?;
    let min_obstacle = obstacle
        .values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);

    let report = ProjectReport {
        sweeps: outcome.sweeps,
        max_violation: outcome.max_violation,
        l2_distance: outcome.l2_distance,
        reachable_after: post.reachable,
        min_obstacle_residual: min_obstacle,
    };
    writer.write_json("report.json", &report)?;
    writer.write_string(
        "fig2.gp",
        &projection_plot_script(
            s.spec.half_width(),
            s.spec.spacing(),
            s.spec.dim(),
            s.spec.points_per_axis(),
        ),
    )?;

    println!(
        "projection moved the target by {:.6e} (L2) in {} sweeps; \
         residual {:.3e}; projected target reachable: {}",
        report.l2_distance, report.sweeps, report.max_violation, report.reachable_after
    );
    Ok(())
}

#[derive(Serialize)]
struct CheckReport {
    reachable: bool,
    max_violation: f64,
    tolerance: f64,
}

pub fn check(s: &Scenario, writer: &mut RunWriter) -> Result<(), CliError> {
    let target = require_data(&s.target, "target")?;
    let a = reachability_matrix(s)?;
    let report = reachability::is_reachable(target, s.horizon, &a, None)?;
    writer.write_grid_function("violation.csv", &report.violation)?;
    writer.write_json(
        "report.json",
        &CheckReport {
            reachable: report.reachable,
            max_violation: report.max_violation,
            tolerance: report.tolerance,
        },
    )?;
    println!(
        "target {} reachable at t={}: max concavity violation {:.6e} vs tolerance {:.3e}",
        if report.reachable { "IS" } else { "is NOT" },
        s.horizon,
        report.max_violation,
        report.tolerance
    );
    Ok(())
}

#[derive(Serialize)]
struct ConeReport {
    contact_points: usize,
    contact_nodes: usize,
    dilation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    candidate_membership: Option<reachability::MembershipReport>,
}

pub fn cone(s: &Scenario, writer: &mut RunWriter) -> Result<(), CliError> {
    let target = require_data(&s.target, "target")?;
    let a = reachability_matrix(s)?;
    let t = s.horizon;

    let description = reachability::inverse_design_cone(target, t, &a, &s.options, None)?;
    writer.write_grid_function("apex.csv", &description.apex)?;
    let mask_values: Vec<f64> = description
        .contact_mask
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    let mask = GridFunction::from_values(
        s.spec,
        mask_values,
        hjinv_core::grid::Extension::Constant,
    )?;
    writer.write_grid_function("contact_mask.csv", &mask)?;

    // Membership check for the optional candidate initial condition; the
    // tolerance gives the scheme's a-priori budget threefold slack (the
    // apex itself is a solver output carrying its own error).
    let h = s.spec.spacing();
    let tol = 3.0 * scheme_tolerance(s.scheme, h, s.options.dt.unwrap_or(h));
    let candidate_membership = match &s.initial {
        Some(u0) => Some(description.membership(u0, tol)?),
        None => None,
    };

    let report = ConeReport {
        contact_points: description.contact_points.len(),
        contact_nodes: description.contact_mask.iter().filter(|&&b| b).count(),
        dilation: description.dilation,
        candidate_membership,
    };
    writer.write_json("report.json", &report)?;
    plot_profiles(
        writer,
        s,
        "Inverse-design cone",
        &[
            ("apex.csv".into(), "apex (minimal element)".into()),
            ("contact_mask.csv".into(), "contact set (0/1)".into()),
        ],
    )?;

    println!(
        "cone of initial data: apex written; {} contact points dilated to {} nodes",
        report.contact_points, report.contact_nodes
    );
    if let Some(m) = &report.candidate_membership {
        println!(
            "candidate initial condition {} in the cone \
             (min slack {:.3e}, contact gap {:.3e}, tol {:.3e})",
            if m.member { "IS" } else { "is NOT" },
            m.min_slack,
            m.max_contact_gap,
            tol
        );
    }
    Ok(())
}
