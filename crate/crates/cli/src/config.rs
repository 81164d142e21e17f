//! Scenario configuration: TOML on disk, schema-checked, resolved to a
//! fully explicit form that is echoed as JSON next to every run's outputs.
//!
//! The raw schema keeps every field optional so that defaults can be filled
//! in one place; validation failures name the offending field by its full
//! path (`run.horizon`, `hamiltonian.matrix`, ...). The resolved echo is the
//! normative record of what actually ran.

use hjinv_core::fixtures::{random_lipschitz, Fixture};
use hjinv_core::geometry::SymMat;
use hjinv_core::grid::{GridFunction, GridSpec};
use hjinv_core::hamiltonian::{HamiltonianModel, Potential};
use hjinv_core::inverse::DescentParams;
use hjinv_core::reachability::ProjectionParams;
use hjinv_core::solver::{Scheme, SolverOptions};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::CliError;

// ---------------------------------------------------------------------------
// Raw (on-disk) schema
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub grid: Option<RawGrid>,
    pub hamiltonian: Option<RawHamiltonian>,
    pub run: Option<RawRun>,
    pub initial: Option<RawData>,
    pub target: Option<RawData>,
    pub direction: Option<RawData>,
    pub transport: Option<RawTransport>,
    pub gateaux: Option<RawGateaux>,
    pub descent: Option<RawDescent>,
    pub projection: Option<RawProjection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub dim: Option<usize>,
    pub half_width: Option<f64>,
    pub points_per_axis: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHamiltonian {
    /// "quadratic" (H = <Ap, p>/2) or "quadratic-shifted" (H = |p|^2 + f(x)).
    pub family: Option<String>,
    /// 1D: [a]; 2D: [a11, a12, a22]. Defaults to 2*I (H = |p|^2).
    pub matrix: Option<Vec<f64>>,
    pub potential: Option<RawPotential>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPotential {
    /// "cosine" or "gaussian-well".
    pub kind: String,
    pub amplitude: Option<f64>,
    pub frequency: Option<f64>,
    pub depth: Option<f64>,
    pub width: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    pub horizon: Option<f64>,
    pub scheme: Option<String>,
    /// Explicit output times; empty means [0, horizon].
    pub schedule: Option<Vec<f64>>,
    pub dt: Option<f64>,
    pub cfl: Option<f64>,
    pub seed: Option<u64>,
    pub output_dir: Option<String>,
    /// 0 = one worker per hardware thread.
    pub threads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawData {
    pub fixture: Option<String>,
    pub file: Option<String>,
    pub random_seed: Option<u64>,
    pub slope: Option<f64>,
    pub scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTransport {
    /// Transport horizon; defaults to run.horizon.
    pub tau: Option<f64>,
    /// Terminal density pi^T carried backwards.
    pub pi: Option<RawData>,
    /// Initial perturbation w carried forwards.
    pub w: Option<RawData>,
    /// Strictly increasing sample times in (0, tau].
    pub sample_times: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGateaux {
    /// Strictly decreasing perturbation sizes.
    pub deltas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDescent {
    pub max_iter: Option<usize>,
    pub gamma0: Option<f64>,
    pub armijo_c: Option<f64>,
    pub gamma_floor: Option<f64>,
    pub eta: Option<f64>,
    pub tol_rel: Option<f64>,
    pub tol_abs: Option<f64>,
    pub tol_tv: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProjection {
    pub max_sweeps: Option<usize>,
    pub feasibility_tol: Option<f64>,
    pub change_tol: Option<f64>,
}

// ---------------------------------------------------------------------------
// Resolved (echoed) schema
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedConfig {
    pub grid: ResolvedGrid,
    pub hamiltonian: ResolvedHamiltonian,
    pub run: ResolvedRun,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<ResolvedData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<ResolvedData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<ResolvedData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transport: Option<ResolvedTransport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gateaux: Option<ResolvedGateaux>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub descent: Option<ResolvedDescent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection: Option<ResolvedProjection>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedGrid {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
    pub spacing: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedHamiltonian {
    pub family: String,
    pub matrix: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<ResolvedPotential>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedPotential {
    pub kind: String,
    pub parameters: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedRun {
    pub horizon: f64,
    pub scheme: String,
    pub schedule: Vec<f64>,
    /// `null` means scheme-chosen (h for semi-Lagrangian, CFL limit for
    /// Lax-Friedrichs, unused by the direct formula).
    pub dt: Option<f64>,
    pub cfl: f64,
    pub seed: u64,
    pub output_dir: String,
    pub threads: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedData {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_seed: Option<u64>,
    pub slope: f64,
    pub scale: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedTransport {
    pub tau: f64,
    pub pi: ResolvedData,
    pub w: ResolvedData,
    pub sample_times: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedGateaux {
    pub deltas: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedDescent {
    pub max_iter: usize,
    pub gamma0: f64,
    pub armijo_c: f64,
    pub gamma_floor: f64,
    /// `null` means the grid default (four cells).
    pub eta: Option<f64>,
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub tol_tv: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolvedProjection {
    pub max_sweeps: usize,
    pub feasibility_tol: f64,
    pub change_tol: f64,
}

// ---------------------------------------------------------------------------
// Loading and resolution
// ---------------------------------------------------------------------------

/// Which optional sections a subcommand consumes; the resolved echo only
/// carries the sections the run actually used.
#[derive(Clone, Copy, Debug, Default)]
pub struct SectionNeeds {
    pub initial: bool,
    pub target: bool,
    pub direction: bool,
    pub transport: bool,
    pub gateaux: bool,
    pub descent: bool,
    pub projection: bool,
}

/// Everything a subcommand needs, constructed once from the resolved config.
pub struct Scenario {
    pub resolved: ResolvedConfig,
    pub spec: GridSpec,
    pub model: HamiltonianModel,
    pub scheme: Scheme,
    pub options: SolverOptions,
    pub horizon: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threads: usize,
    pub initial: Option<GridFunction>,
    pub target: Option<GridFunction>,
    pub direction: Option<GridFunction>,
    pub transport_tau: f64,
    pub transport_pi: Option<GridFunction>,
    pub transport_w: Option<GridFunction>,
    pub sample_times: Vec<f64>,
    pub deltas: Vec<f64>,
    pub descent: DescentParams,
    pub projection: ProjectionParams,
    /// Paths of input files read while resolving (hashed into the manifest).
    pub input_files: Vec<PathBuf>,
}

pub fn load_raw(path: &Path) -> Result<RawConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read config '{}': {e}", path.display()))
    })?;
    toml::from_str(&text).map_err(|e| {
        // toml errors carry line/column context in their Display form.
        CliError::Config(format!("config '{}': {e}", path.display()))
    })
}

fn require<T>(v: Option<T>, field: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("field `{field}` is required")))
}

fn positive(v: f64, field: &str) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!(
            "field `{field}` must be positive and finite, got {v}"
        )))
    }
}

fn resolve_data(
    raw: &RawData,
    field: &str,
    spec: &GridSpec,
    inputs: &mut Vec<PathBuf>,
) -> Result<(ResolvedData, GridFunction), CliError> {
    let chosen = [
        raw.fixture.is_some(),
        raw.file.is_some(),
        raw.random_seed.is_some(),
    ]
    .iter()
    .filter(|b| **b)
    .count();
    if chosen != 1 {
        return Err(CliError::Config(format!(
            "field `{field}` must set exactly one of `fixture`, `file`, `random_seed`"
        )));
    }
    let slope = raw.slope.unwrap_or(1.0);
    let scale = raw.scale.unwrap_or(1.0);
    if !scale.is_finite() {
        return Err(CliError::Config(format!(
            "field `{field}.scale` must be finite"
        )));
    }
    let (kind, g) = if let Some(name) = &raw.fixture {
        let fixture = Fixture::parse(name).map_err(|e| {
            CliError::Config(format!("field `{field}.fixture`: {e}"))
        })?;
        let g = fixture
            .sample(spec)
            .map_err(|e| CliError::Config(format!("field `{field}.fixture`: {e}")))?;
        ("fixture".to_string(), g)
    } else if let Some(file) = &raw.file {
        let path = PathBuf::from(file);
        let g = hjinv_core::io::read_grid_function(&path).map_err(|e| {
            CliError::Config(format!("field `{field}.file` ('{file}'): {e}"))
        })?;
        if g.spec() != spec {
            return Err(CliError::Config(format!(
                "field `{field}.file`: grid in '{file}' (dim {}, L {}, M {}) does not match \
                 the configured grid (dim {}, L {}, M {})",
                g.spec().dim(),
                g.spec().half_width(),
                g.spec().points_per_axis(),
                spec.dim(),
                spec.half_width(),
                spec.points_per_axis()
            )));
        }
        inputs.push(path);
        ("file".to_string(), g)
    } else {
        let seed = raw.random_seed.expect("guarded above");
        positive(slope, &format!("{field}.slope"))?;
        let g = random_lipschitz(spec, seed, slope)
            .map_err(|e| CliError::Config(format!("field `{field}`: {e}")))?;
        ("random".to_string(), g)
    };
    let g = if scale != 1.0 {
        g.scale(scale)
            .map_err(|e| CliError::Config(format!("field `{field}.scale`: {e}")))?
    } else {
        g
    };
    Ok((
        ResolvedData {
            kind,
            fixture: raw.fixture.clone(),
            file: raw.file.clone(),
            random_seed: raw.random_seed,
            slope,
            scale,
        },
        g,
    ))
}

fn resolve_model(
    raw: &RawHamiltonian,
    dim: usize,
) -> Result<(ResolvedHamiltonian, HamiltonianModel), CliError> {
    let family = raw
        .family
        .clone()
        .unwrap_or_else(|| "quadratic".to_string());
    let matrix_entries = raw.matrix.clone().unwrap_or_else(|| match dim {
        1 => vec![2.0],
        _ => vec![2.0, 0.0, 2.0],
    });
    let matrix = match (dim, matrix_entries.len()) {
        (1, 1) => SymMat::new_1d(matrix_entries[0]),
        (2, 3) => SymMat::new_2d(matrix_entries[0], matrix_entries[1], matrix_entries[2]),
        (d, n) => {
            return Err(CliError::Config(format!(
                "field `hamiltonian.matrix` needs {} entries in {d}D, got {n}",
                if d == 1 { 1 } else { 3 }
            )))
        }
    }
    .map_err(|e| CliError::Config(format!("field `hamiltonian.matrix`: {e}")))?;

    match family.as_str() {
        "quadratic" => {
            if raw.potential.is_some() {
                return Err(CliError::Config(
                    "field `hamiltonian.potential` is only valid for family \
                     \"quadratic-shifted\""
                        .into(),
                ));
            }
            Ok((
                ResolvedHamiltonian {
                    family,
                    matrix: matrix_entries,
                    potential: None,
                },
                HamiltonianModel::quadratic(matrix),
            ))
        }
        "quadratic-shifted" => {
            let pot = require(raw.potential.as_ref(), "hamiltonian.potential")?;
            let standard: &[f64] = if dim == 1 { &[2.0] } else { &[2.0, 0.0, 2.0] };
            let is_standard = matrix_entries
                .iter()
                .zip(standard)
                .all(|(a, b)| (a - b).abs() <= 1e-12);
            if !is_standard {
                return Err(CliError::Config(
                    "field `hamiltonian.matrix`: the shifted family fixes the kinetic part \
                     to |p|^2 (matrix 2*I); drop `matrix` or use family \"quadratic\""
                        .into(),
                ));
            }
            let (potential, resolved) = match pot.kind.as_str() {
                "cosine" => {
                    let amplitude = pot.amplitude.unwrap_or(0.3);
                    let frequency = pot.frequency.unwrap_or(1.0);
                    (
                        Potential::Cosine {
                            amplitude,
                            frequency,
                        },
                        ResolvedPotential {
                            kind: "cosine".into(),
                            parameters: vec![
                                ("amplitude".into(), amplitude),
                                ("frequency".into(), frequency),
                            ],
                        },
                    )
                }
                "gaussian-well" => {
                    let depth = pot.depth.unwrap_or(0.5);
                    let width = positive(
                        pot.width.unwrap_or(1.0),
                        "hamiltonian.potential.width",
                    )?;
                    (
                        Potential::GaussianWell { depth, width },
                        ResolvedPotential {
                            kind: "gaussian-well".into(),
                            parameters: vec![("depth".into(), depth), ("width".into(), width)],
                        },
                    )
                }
                other => {
                    return Err(CliError::Config(format!(
                        "field `hamiltonian.potential.kind`: unknown kind '{other}' \
                         (expected \"cosine\" or \"gaussian-well\")"
                    )))
                }
            };
            let model = HamiltonianModel::quadratic_shifted(dim, potential)
                .map_err(|e| CliError::Config(format!("field `hamiltonian.potential`: {e}")))?;
            Ok((
                ResolvedHamiltonian {
                    family,
                    matrix: matrix_entries,
                    potential: Some(resolved),
                },
                model,
            ))
        }
        other => Err(CliError::Config(format!(
            "field `hamiltonian.family`: unknown family '{other}' \
             (expected \"quadratic\" or \"quadratic-shifted\")"
        ))),
    }
}

/// Resolve a raw config for a subcommand, constructing grid, model, data and
/// parameter blocks, and validating everything the run will rely on.
pub fn resolve(
    raw: &RawConfig,
    needs: SectionNeeds,
    output_override: Option<&Path>,
) -> Result<Scenario, CliError> {
    let grid_raw = raw.grid.as_ref();
    let dim = grid_raw.and_then(|g| g.dim).unwrap_or(1);
    if !(dim == 1 || dim == 2) {
        return Err(CliError::Config(format!(
            "field `grid.dim` must be 1 or 2, got {dim}"
        )));
    }
    let half_width = positive(
        grid_raw.and_then(|g| g.half_width).unwrap_or(3.0),
        "grid.half_width",
    )?;
    let points = grid_raw
        .and_then(|g| g.points_per_axis)
        .unwrap_or(if dim == 1 { 1025 } else { 129 });
    let spec = GridSpec::new(dim, half_width, points)
        .map_err(|e| CliError::Config(format!("field `grid`: {e}")))?;

    let run_raw = raw.run.as_ref();
    let horizon = positive(
        require(run_raw.and_then(|r| r.horizon), "run.horizon")?,
        "run.horizon",
    )?;
    let scheme_name = run_raw
        .and_then(|r| r.scheme.clone())
        .unwrap_or_else(|| "hopf-lax".to_string());
    let scheme = Scheme::parse(&scheme_name)
        .map_err(|e| CliError::Config(format!("field `run.scheme`: {e}")))?;
    let schedule_given = run_raw.and_then(|r| r.schedule.clone()).unwrap_or_default();
    let schedule = if schedule_given.is_empty() {
        vec![0.0, horizon]
    } else {
        schedule_given
    };
    for w in schedule.windows(2) {
        // partial_cmp so NaN entries fail validation too.
        if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) {
            return Err(CliError::Config(
                "field `run.schedule` must be strictly increasing".into(),
            ));
        }
    }
    if schedule[0] < 0.0 {
        return Err(CliError::Config(
            "field `run.schedule` must start at or after 0".into(),
        ));
    }
    let dt = run_raw.and_then(|r| r.dt);
    if let Some(v) = dt {
        positive(v, "run.dt")?;
    }
    let cfl = run_raw
        .and_then(|r| r.cfl)
        .unwrap_or(hjinv_core::solver::DEFAULT_CFL);
    positive(cfl, "run.cfl")?;
    let seed = run_raw.and_then(|r| r.seed).unwrap_or(0);
    let threads = run_raw.and_then(|r| r.threads).unwrap_or(0);
    // The echoed scenario records the configured destination; the CLI
    // `--output-dir` flag only overrides placement, leaving the scenario
    // (and hence the emitted artifacts) untouched.
    let configured_dir = run_raw
        .and_then(|r| r.output_dir.clone())
        .unwrap_or_else(|| "out".to_string());
    let output_dir = output_override
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from(&configured_dir));

    let default_hamiltonian = RawHamiltonian::default();
    let (ham_resolved, model) =
        resolve_model(raw.hamiltonian.as_ref().unwrap_or(&default_hamiltonian), dim)?;

    let mut options = SolverOptions::new(scheme);
    options.dt = dt;
    options.cfl = cfl;

    let mut input_files = Vec::new();
    let resolve_section = |section: &Option<RawData>,
                               needed: bool,
                               field: &str,
                               inputs: &mut Vec<PathBuf>|
     -> Result<(Option<ResolvedData>, Option<GridFunction>), CliError> {
        if !needed {
            return Ok((None, None));
        }
        let raw_data = require(section.as_ref(), field)?;
        let (r, g) = resolve_data(raw_data, field, &spec, inputs)?;
        Ok((Some(r), Some(g)))
    };
    let (initial_resolved, initial) =
        resolve_section(&raw.initial, needs.initial, "initial", &mut input_files)?;
    let (target_resolved, target) =
        resolve_section(&raw.target, needs.target, "target", &mut input_files)?;
    // The direction defaults to the gaussian bump when the section is absent.
    let default_direction = RawData {
        fixture: Some("gaussian-bump".into()),
        ..RawData::default()
    };
    let (direction_resolved, direction) = if needs.direction {
        let raw_data = raw.direction.as_ref().unwrap_or(&default_direction);
        let (r, g) = resolve_data(raw_data, "direction", &spec, &mut input_files)?;
        (Some(r), Some(g))
    } else {
        (None, None)
    };

    // Transport block. The density carried backward must vanish near the
    // boundary, so its default is the compactly supported two-bump profile;
    // the forward-transported direction has no such restriction.
    let default_pi = RawData {
        fixture: Some("two-bump".into()),
        ..RawData::default()
    };
    let default_w = RawData {
        fixture: Some("gaussian-bump".into()),
        ..RawData::default()
    };
    let (transport_resolved, transport_tau, transport_pi, transport_w, sample_times) =
        if needs.transport {
            let t_raw = raw.transport.as_ref();
            let tau = positive(
                t_raw.and_then(|t| t.tau).unwrap_or(horizon),
                "transport.tau",
            )?;
            let (pi_r, pi_g) = resolve_data(
                t_raw.and_then(|t| t.pi.as_ref()).unwrap_or(&default_pi),
                "transport.pi",
                &spec,
                &mut input_files,
            )?;
            let (w_r, w_g) = resolve_data(
                t_raw.and_then(|t| t.w.as_ref()).unwrap_or(&default_w),
                "transport.w",
                &spec,
                &mut input_files,
            )?;
            let times = t_raw
                .and_then(|t| t.sample_times.clone())
                .unwrap_or_else(|| (1..=8).map(|k| tau * k as f64 / 8.0).collect());
            for w in times.windows(2) {
                if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) {
                    return Err(CliError::Config(
                        "field `transport.sample_times` must be strictly increasing".into(),
                    ));
                }
            }
            if times.is_empty() || times[0] <= 0.0 || times[times.len() - 1] > tau + 1e-12 {
                return Err(CliError::Config(
                    "field `transport.sample_times` must lie inside (0, tau]".into(),
                ));
            }
            (
                Some(ResolvedTransport {
                    tau,
                    pi: pi_r,
                    w: w_r,
                    sample_times: times.clone(),
                }),
                tau,
                Some(pi_g),
                Some(w_g),
                times,
            )
        } else {
            (None, horizon, None, None, Vec::new())
        };

    // Gateaux block.
    let (gateaux_resolved, deltas) = if needs.gateaux {
        let deltas = raw
            .gateaux
            .as_ref()
            .and_then(|g| g.deltas.clone())
            .unwrap_or_else(|| vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3]);
        for w in deltas.windows(2) {
            if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Less) {
                return Err(CliError::Config(
                    "field `gateaux.deltas` must be strictly decreasing".into(),
                ));
            }
        }
        if deltas.is_empty() || deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(CliError::Config(
                "field `gateaux.deltas` must be nonempty and positive".into(),
            ));
        }
        (Some(ResolvedGateaux { deltas: deltas.clone() }), deltas)
    } else {
        (None, Vec::new())
    };

    // Descent block.
    let descent_defaults = DescentParams::default();
    let d_raw = raw.descent.as_ref();
    let descent = DescentParams {
        max_iter: d_raw.and_then(|d| d.max_iter).unwrap_or(descent_defaults.max_iter),
        gamma0: d_raw.and_then(|d| d.gamma0).unwrap_or(descent_defaults.gamma0),
        armijo_c: d_raw.and_then(|d| d.armijo_c).unwrap_or(descent_defaults.armijo_c),
        gamma_floor: d_raw
            .and_then(|d| d.gamma_floor)
            .unwrap_or(descent_defaults.gamma_floor),
        eta: d_raw.and_then(|d| d.eta).or(descent_defaults.eta),
        tol_rel: d_raw.and_then(|d| d.tol_rel).unwrap_or(descent_defaults.tol_rel),
        tol_abs: d_raw.and_then(|d| d.tol_abs).unwrap_or(descent_defaults.tol_abs),
        tol_tv: d_raw.and_then(|d| d.tol_tv).unwrap_or(descent_defaults.tol_tv),
    };
    let descent_resolved = needs.descent.then_some(ResolvedDescent {
        max_iter: descent.max_iter,
        gamma0: descent.gamma0,
        armijo_c: descent.armijo_c,
        gamma_floor: descent.gamma_floor,
        eta: descent.eta,
        tol_rel: descent.tol_rel,
        tol_abs: descent.tol_abs,
        tol_tv: descent.tol_tv,
    });

    // Projection block.
    let projection_defaults = ProjectionParams::default();
    let p_raw = raw.projection.as_ref();
    let projection = ProjectionParams {
        max_sweeps: p_raw
            .and_then(|p| p.max_sweeps)
            .unwrap_or(projection_defaults.max_sweeps),
        feasibility_tol: p_raw
            .and_then(|p| p.feasibility_tol)
            .unwrap_or(projection_defaults.feasibility_tol),
        change_tol: p_raw
            .and_then(|p| p.change_tol)
            .unwrap_or(projection_defaults.change_tol),
    };
    let projection_resolved = needs.projection.then_some(ResolvedProjection {
        max_sweeps: projection.max_sweeps,
        feasibility_tol: projection.feasibility_tol,
        change_tol: projection.change_tol,
    });

    let resolved = ResolvedConfig {
        grid: ResolvedGrid {
            dim,
            half_width,
            points_per_axis: points,
            spacing: spec.spacing(),
        },
        hamiltonian: ham_resolved,
        run: ResolvedRun {
            horizon,
            scheme: scheme.as_str().to_string(),
            schedule,
            dt,
            cfl,
            seed,
            output_dir: configured_dir,
            threads,
        },
        initial: initial_resolved,
        target: target_resolved,
        direction: direction_resolved,
        transport: transport_resolved,
        gateaux: gateaux_resolved,
        descent: descent_resolved,
        projection: projection_resolved,
    };

    Ok(Scenario {
        resolved,
        spec,
        model,
        scheme,
        options,
        horizon,
        seed,
        output_dir,
        threads,
        initial,
        target,
        direction,
        transport_tau,
        transport_pi,
        transport_w,
        sample_times,
        deltas,
        descent,
        projection,
        input_files,
    })
}

/// The quadratic matrix for reachability operations; requires the pure
/// quadratic family.
pub fn reachability_matrix(scenario: &Scenario) -> Result<SymMat, CliError> {
    scenario.model.quadratic_matrix().ok_or_else(|| {
        CliError::Domain(
            "reachability operations need the x-independent quadratic family \
             (hamiltonian.family = \"quadratic\")"
                .to_string(),
        )
    })
}
