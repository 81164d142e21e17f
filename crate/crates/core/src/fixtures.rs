//! Bundled initial-condition fixtures shared by the test suite and the CLI,
//! plus seeded random Lipschitz data for property tests.

use crate::geometry;
use crate::grid::{Extension, GridFunction, GridSpec};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Amplitude of the two-bump target.
pub const TWO_BUMP_AMPLITUDE: f64 = 0.5;
/// Half-width of each bump in the two-bump target.
pub const TWO_BUMP_WIDTH: f64 = 0.8;
/// Bump centers of the two-bump target (mirrored on the first axis).
pub const TWO_BUMP_CENTER: f64 = 1.0;

/// Named initial conditions available everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fixture {
    /// Identically zero.
    Zero,
    /// The linear ramp `x_1 + ... + x_N`.
    Linear,
    /// The cone `|x|` (downward kink at the origin).
    AbsKink,
    /// The concave cone `-|x|`.
    NegAbs,
    /// A smooth Gaussian bump of unit amplitude and width `L/4`.
    GaussianBump,
    /// Two narrow raised-cosine bumps; too curved to be a forward image,
    /// so it serves as the canonical unreachable target.
    TwoBump,
}

impl Fixture {
    pub fn all() -> &'static [Fixture] {
        &[
            Fixture::Zero,
            Fixture::Linear,
            Fixture::AbsKink,
            Fixture::NegAbs,
            Fixture::GaussianBump,
            Fixture::TwoBump,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Fixture::Zero => "zero",
            Fixture::Linear => "linear",
            Fixture::AbsKink => "abs-kink",
            Fixture::NegAbs => "neg-abs",
            Fixture::GaussianBump => "gaussian-bump",
            Fixture::TwoBump => "two-bump",
        }
    }

    pub fn parse(name: &str) -> Result<Fixture> {
        Fixture::all()
            .iter()
            .copied()
            .find(|f| f.name() == name)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown fixture '{name}' (expected one of {})",
                    Fixture::all()
                        .iter()
                        .map(|f| f.name())
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })
    }

    /// Evaluate at a point, given the box half-width (the Gaussian width
    /// scales with the box).
    pub fn eval(&self, dim: usize, half_width: f64, x: geometry::Point) -> f64 {
        match self {
            Fixture::Zero => 0.0,
            Fixture::Linear => (0..dim).map(|k| x[k]).sum(),
            Fixture::AbsKink => geometry::norm(dim, x),
            Fixture::NegAbs => -geometry::norm(dim, x),
            Fixture::GaussianBump => {
                let w = half_width / 4.0;
                (-geometry::norm_sq(dim, x) / (2.0 * w * w)).exp()
            }
            Fixture::TwoBump => {
                let bump = |c: f64| -> f64 {
                    let s = (x[0] - c).abs();
                    if s < TWO_BUMP_WIDTH {
                        let phase = std::f64::consts::PI * s / TWO_BUMP_WIDTH;
                        TWO_BUMP_AMPLITUDE * 0.5 * (1.0 + phase.cos())
                    } else {
                        0.0
                    }
                };
                let profile = bump(-TWO_BUMP_CENTER) + bump(TWO_BUMP_CENTER);
                if dim == 2 {
                    // Localize along the second axis with the same profile
                    // shape so the 2D target is compactly supported too.
                    let s = x[1].abs();
                    if s < TWO_BUMP_WIDTH {
                        let phase = std::f64::consts::PI * s / TWO_BUMP_WIDTH;
                        profile * 0.5 * (1.0 + phase.cos())
                    } else {
                        0.0
                    }
                } else {
                    profile
                }
            }
        }
    }

    /// Sample onto a grid with the natural extension for the shape.
    pub fn sample(&self, spec: &GridSpec) -> Result<GridFunction> {
        let ext = match self {
            Fixture::Linear | Fixture::AbsKink | Fixture::NegAbs => Extension::Linear,
            _ => Extension::Constant,
        };
        GridFunction::sample(*spec, ext, |x| {
            self.eval(spec.dim(), spec.half_width(), x)
        })
    }
}

/// Seeded random Lipschitz data for property tests: a piecewise-linear
/// random walk per axis (separable in 2D), Lipschitz constant at most
/// `slope` per axis. Deterministic in the seed.
pub fn random_lipschitz(spec: &GridSpec, seed: u64, slope: f64) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = spec.points_per_axis();
    let h = spec.spacing();
    let walk = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut vals = Vec::with_capacity(m);
        let mut v = rng.gen_range(-0.5..0.5);
        for _ in 0..m {
            vals.push(v);
            v += rng.gen_range(-1.0..1.0) * slope * h;
        }
        vals
    };
    let values = match spec.dim() {
        1 => walk(&mut rng),
        _ => {
            let a = walk(&mut rng);
            let b = walk(&mut rng);
            let mut vals = Vec::with_capacity(spec.node_count());
            for ai in &a {
                for bj in &b {
                    vals.push(ai + bj);
                }
            }
            vals
        }
    };
    GridFunction::from_values(*spec, values, Extension::Constant)
}
