//! On-disk exchange formats.
//!
//! Grid functions travel as CSV with five metadata header rows (`dim`, `L`,
//! `M`, `extension`, `lip_bound`), a `values` separator, and one node value
//! per line in row-major order. Floats are printed with Rust's shortest
//! round-trip formatting, so write-then-read reproduces every value
//! bit-exactly. Discrete measures and characteristic-target maps use plain
//! one-record-per-line CSV with a single header row.

use crate::geometry::Point;
use crate::grid::{Extension, GridFunction, GridSpec};
use crate::transport::DiscreteMeasure;
use crate::characteristics::{PhiInvalidReason, PhiMap};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::io::{BufReader, Write};
use std::path::Path;

/// Shortest round-trip decimal form of an `f64` (Rust's `Display` guarantees
/// parse-back equality).
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("cannot parse {what} from '{s}'")))
}

/// Serialize a grid function to its CSV exchange form.
pub fn grid_function_to_string(f: &GridFunction) -> String {
    let spec = f.spec();
    let mut out = String::new();
    let _ = writeln!(out, "dim,{}", spec.dim());
    let _ = writeln!(out, "L,{}", fmt_f64(spec.half_width()));
    let _ = writeln!(out, "M,{}", spec.points_per_axis());
    let _ = writeln!(out, "extension,{}", f.extension().as_str());
    let _ = writeln!(out, "lip_bound,{}", fmt_f64(f.lip_bound()));
    out.push_str("values\n");
    for v in f.values() {
        let _ = writeln!(out, "{}", fmt_f64(*v));
    }
    out
}

/// Write a grid function CSV to a file.
pub fn write_grid_function(path: &Path, f: &GridFunction) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(grid_function_to_string(f).as_bytes())?;
    Ok(())
}

/// Parse a grid function from its CSV exchange form.
pub fn grid_function_from_str(text: &str) -> Result<GridFunction> {
    let mut lines = text.lines();
    let mut header = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing header row '{key}'")))?;
        let (k, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("malformed header row '{line}'")))?;
        if k != key {
            return Err(Error::Parse(format!(
                "expected header row '{key}', found '{k}'"
            )));
        }
        Ok(v.to_string())
    };
    let dim: usize = header("dim")?
        .trim()
        .parse()
        .map_err(|_| Error::Parse("cannot parse dim".into()))?;
    let l = parse_f64(&header("L")?, "L")?;
    let m: usize = header("M")?
        .trim()
        .parse()
        .map_err(|_| Error::Parse("cannot parse M".into()))?;
    let extension = Extension::parse(header("extension")?.trim())?;
    let lip_bound = parse_f64(&header("lip_bound")?, "lip_bound")?;
    match lines.next() {
        Some("values") => {}
        other => {
            return Err(Error::Parse(format!(
                "expected 'values' separator, found {other:?}"
            )))
        }
    }
    let spec = GridSpec::new(dim, l, m)?;
    let mut values = Vec::with_capacity(spec.node_count());
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        values.push(parse_f64(line, "node value")?);
    }
    GridFunction::new(spec, values, lip_bound, extension)
}

/// Read a grid function CSV from a file.
pub fn read_grid_function(path: &Path) -> Result<GridFunction> {
    let mut text = String::new();
    BufReader::new(std::fs::File::open(path)?).read_to_string(&mut text)?;
    grid_function_from_str(&text)
}

use std::io::Read as _;

/// Serialize a discrete measure: one `kind,x0,x1,mass` record per particle
/// and atom (particles first, preserving order).
pub fn measure_to_string(m: &DiscreteMeasure) -> String {
    let mut out = String::from("kind,x0,x1,mass\n");
    for (pos, w) in m.particles() {
        let _ = writeln!(
            out,
            "particle,{},{},{}",
            fmt_f64(pos[0]),
            fmt_f64(pos[1]),
            fmt_f64(*w)
        );
    }
    for (pos, w) in m.atoms() {
        let _ = writeln!(
            out,
            "atom,{},{},{}",
            fmt_f64(pos[0]),
            fmt_f64(pos[1]),
            fmt_f64(*w)
        );
    }
    out
}

pub fn write_measure(path: &Path, m: &DiscreteMeasure) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(measure_to_string(m).as_bytes())?;
    Ok(())
}

pub fn measure_from_str(dim: usize, text: &str) -> Result<DiscreteMeasure> {
    let mut lines = text.lines();
    match lines.next() {
        Some("kind,x0,x1,mass") => {}
        other => {
            return Err(Error::Parse(format!(
                "expected measure header, found {other:?}"
            )))
        }
    }
    let mut particles: Vec<(Point, f64)> = Vec::new();
    let mut atoms: Vec<(Point, f64)> = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("malformed measure record '{line}'")));
        }
        let pos = [parse_f64(fields[1], "x0")?, parse_f64(fields[2], "x1")?];
        let mass = parse_f64(fields[3], "mass")?;
        match fields[0] {
            "particle" => particles.push((pos, mass)),
            "atom" => atoms.push((pos, mass)),
            other => return Err(Error::Parse(format!("unknown measure kind '{other}'"))),
        }
    }
    DiscreteMeasure::new(dim, particles, atoms)
}

pub fn read_measure(path: &Path, dim: usize) -> Result<DiscreteMeasure> {
    let mut text = String::new();
    BufReader::new(std::fs::File::open(path)?).read_to_string(&mut text)?;
    measure_from_str(dim, &text)
}

/// Serialize a characteristic-target map: node coordinates, target
/// coordinates, validity flag and reason per node.
pub fn phi_map_to_string(phi: &PhiMap) -> String {
    let mut out = String::from("x0,x1,phi0,phi1,valid,reason\n");
    let spec = phi.spec();
    for idx in 0..spec.node_count() {
        let x = spec.node(idx);
        let t = phi.targets()[idx];
        let reason = match phi.reasons()[idx] {
            PhiInvalidReason::None => "none",
            PhiInvalidReason::Kink => "kink",
            PhiInvalidReason::Escape => "escape",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(x[0]),
            fmt_f64(x[1]),
            fmt_f64(t[0]),
            fmt_f64(t[1]),
            u8::from(phi.valid()[idx]),
            reason
        );
    }
    out
}

pub fn write_phi_map(path: &Path, phi: &PhiMap) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(phi_map_to_string(phi).as_bytes())?;
    Ok(())
}
