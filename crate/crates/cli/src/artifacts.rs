//! Output plumbing shared by every subcommand: an artifact writer that
//! records name, size, and SHA-256 of each file it emits, plus the final
//! manifest. Wall time is printed to stdout rather than recorded in the
//! manifest so that identical runs produce bit-identical manifests.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use hjinv_core::grid::GridFunction;
use hjinv_core::transport::DiscreteMeasure;

use crate::config::ResolvedConfig;
use crate::CliError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write;
        write!(out, "{b:02x}").expect("writing to a String cannot fail");
    }
    out
}

#[derive(Clone, Debug, Serialize)]
struct ArtifactRecord {
    name: String,
    bytes: usize,
    sha256: String,
}

#[derive(Clone, Debug, Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool: ToolInfo<'a>,
    command: &'a str,
    seed: u64,
    inputs: &'a [InputRecord],
    artifacts: &'a [ArtifactRecord],
}

#[derive(Serialize)]
struct ToolInfo<'a> {
    name: &'a str,
    version: &'a str,
    core_version: &'a str,
}

/// Writes a run's artifacts under one directory and accumulates the
/// manifest records. `finish` seals the run.
pub struct RunWriter {
    dir: PathBuf,
    command: String,
    seed: u64,
    records: Vec<ArtifactRecord>,
    inputs: Vec<InputRecord>,
}

impl RunWriter {
    pub fn create(dir: &Path, command: &str, seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| {
            CliError::Config(format!(
                "cannot create output directory '{}': {e}",
                dir.display()
            ))
        })?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            seed,
            records: Vec::new(),
            inputs: Vec::new(),
        })
    }

    /// Record an input file (config, data files) by path-as-given and hash.
    pub fn record_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| {
            CliError::Config(format!("cannot read input '{}': {e}", path.display()))
        })?;
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| {
            CliError::Io(format!("cannot write '{}': {e}", path.display()))
        })?;
        self.records.push(ArtifactRecord {
            name: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_string(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Io(format!("cannot serialize '{name}': {e}")))?;
        text.push('\n');
        self.write_string(name, &text)
    }

    pub fn write_grid_function(
        &mut self,
        name: &str,
        f: &GridFunction,
    ) -> Result<(), CliError> {
        self.write_string(name, &hjinv_core::io::grid_function_to_string(f))
    }

    pub fn write_measure(&mut self, name: &str, m: &DiscreteMeasure) -> Result<(), CliError> {
        self.write_string(name, &hjinv_core::io::measure_to_string(m))
    }

    /// Echo the resolved configuration (the normative record of the run).
    pub fn write_resolved_config(&mut self, resolved: &ResolvedConfig) -> Result<(), CliError> {
        self.write_json("resolved_config.json", resolved)
    }

    /// Write the manifest and return the output directory.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.records.sort_by(|a, b| a.name.cmp(&b.name));
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool: ToolInfo {
                name: "hjinv",
                version: env!("CARGO_PKG_VERSION"),
                core_version: hjinv_core::VERSION,
            },
            command: &self.command,
            seed: self.seed,
            inputs: &self.inputs,
            artifacts: &self.records,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Io(format!("cannot serialize manifest: {e}")))?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| {
            CliError::Io(format!("cannot write '{}': {e}", path.display()))
        })?;
        Ok(self.dir)
    }
}

// ---------------------------------------------------------------------------
// Plot scripts (gnuplot, consuming the CSVs with relative paths)
// ---------------------------------------------------------------------------

/// Value rows of a grid-function CSV start after the five metadata rows and
/// the `values` marker, i.e. at gnuplot's `every ::6`.
const VALUE_ROW_SKIP: &str = "::6";

fn profile_expr(half_width: f64, spacing: f64, dim: usize, points: usize) -> String {
    if dim == 1 {
        format!("every {VALUE_ROW_SKIP} using ($0*{spacing:.17}-{half_width:.17}):1")
    } else {
        // 2-D files hold M*M row-major values; plot the central row.
        let mid = points / 2;
        let start = 6 + mid * points;
        let end = start + points - 1;
        format!("every ::{start}::{end} using ($0*{spacing:.17}-{half_width:.17}):1")
    }
}

/// A line-plot script for a set of grid-function CSVs (the solution slices or
/// any other profile family).
pub fn profile_plot_script(
    title: &str,
    half_width: f64,
    spacing: f64,
    dim: usize,
    points: usize,
    curves: &[(String, String)],
) -> String {
    let expr = profile_expr(half_width, spacing, dim, points);
    let mut s = String::new();
    s.push_str("# gnuplot script; run from this directory: gnuplot -p <script>\n");
    s.push_str(&format!("set title \"{title}\"\n"));
    s.push_str("set grid\nset xlabel \"x\"\nset key outside\n");
    if dim == 2 {
        s.push_str("# 2-D data: the central row (y = 0) is plotted as a profile.\n");
    }
    s.push_str("plot \\\n");
    let lines: Vec<String> = curves
        .iter()
        .map(|(file, label)| format!("  \"{file}\" {expr} with lines title \"{label}\""))
        .collect();
    s.push_str(&lines.join(", \\\n"));
    s.push('\n');
    s
}

/// The inverse-design triptych: candidate initial data, terminal match, and
/// the objective trace.
pub fn descent_plot_script(
    half_width: f64,
    spacing: f64,
    dim: usize,
    points: usize,
) -> String {
    let expr = profile_expr(half_width, spacing, dim, points);
    format!(
        "# gnuplot script; run from this directory: gnuplot -p <script>\n\
         set multiplot layout 1,3 title \"Inverse design\"\n\
         set grid\n\
         set xlabel \"x\"\n\
         set title \"initial data\"\n\
         plot \\\n\
         \x20 \"u0_initial.csv\" {expr} with lines title \"backward seed\", \\\n\
         \x20 \"u0_final.csv\" {expr} with lines title \"final iterate\", \\\n\
         \x20 \"u0_regularized.csv\" {expr} with lines title \"regularized\"\n\
         set title \"terminal state\"\n\
         plot \\\n\
         \x20 \"target.csv\" {expr} with lines title \"target\", \\\n\
         \x20 \"terminal_final.csv\" {expr} with lines title \"achieved\"\n\
         set title \"objective\"\n\
         set xlabel \"accepted step\"\n\
         set logscale y\n\
         set datafile separator \",\"\n\
         plot \"descent_history.csv\" every ::1 using 1:2 with linespoints title \"J\"\n\
         unset multiplot\n"
    )
}

/// The projection pair: the target against its reachable projection.
pub fn projection_plot_script(
    half_width: f64,
    spacing: f64,
    dim: usize,
    points: usize,
) -> String {
    let expr = profile_expr(half_width, spacing, dim, points);
    format!(
        "# gnuplot script; run from this directory: gnuplot -p <script>\n\
         set title \"Reachable projection\"\n\
         set grid\n\
         set xlabel \"x\"\n\
         set key outside\n\
         plot \\\n\
         \x20 \"target.csv\" {expr} with lines title \"target\", \\\n\
         \x20 \"projected.csv\" {expr} with lines title \"projection\"\n"
    )
}
