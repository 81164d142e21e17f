//! Fixed-capacity vector and symmetric-matrix helpers.
//!
//! The library only handles one- and two-dimensional domains, so points are
//! plain `[f64; 2]` with the convention that the second component is zero
//! whenever the active dimension is 1. Functions that depend on the active
//! dimension take it explicitly.

use crate::{Error, Result};

/// A point (or vector) in the computational domain. In one dimension the
/// second component is identically zero.
pub type Point = [f64; 2];

/// Origin in either dimension.
pub const ORIGIN: Point = [0.0, 0.0];

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(dim: usize, a: Point, b: Point) -> f64 {
    let mut s = 0.0;
    for k in 0..dim {
        s += a[k] * b[k];
    }
    s
}

#[inline]
pub fn norm_sq(dim: usize, a: Point) -> f64 {
    dot(dim, a, a)
}

#[inline]
pub fn norm(dim: usize, a: Point) -> f64 {
    norm_sq(dim, a).sqrt()
}

#[inline]
pub fn inf_norm(dim: usize, a: Point) -> f64 {
    a[..dim].iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[inline]
pub fn is_finite(dim: usize, a: Point) -> bool {
    a[..dim].iter().all(|v| v.is_finite())
}

/// Symmetric positive-definite matrix of size `dim x dim`, `dim` in {1, 2}.
///
/// Used both as the coefficient of quadratic Hamiltonians `H(p) = <Ap, p>/2`
/// and for the curvature bounds appearing in reachability tests. Positive
/// definiteness is enforced at construction so downstream code can invert and
/// take square roots without re-checking.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat {
    dim: usize,
    m: [[f64; 2]; 2],
}

impl SymMat {
    /// 1x1 matrix `[a]`; requires `a > 0`.
    pub fn new_1d(a: f64) -> Result<Self> {
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "1x1 matrix must be positive and finite, got {a}"
            )));
        }
        Ok(SymMat {
            dim: 1,
            m: [[a, 0.0], [0.0, 0.0]],
        })
    }

    /// Symmetric 2x2 matrix `[[a11, a12], [a12, a22]]`; must be positive
    /// definite (`a11 > 0` and `det > 0`).
    pub fn new_2d(a11: f64, a12: f64, a22: f64) -> Result<Self> {
        let det = a11 * a22 - a12 * a12;
        if ![a11, a12, a22].iter().all(|v| v.is_finite()) || a11 <= 0.0 || det <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "2x2 matrix [[{a11}, {a12}], [{a12}, {a22}]] is not positive definite"
            )));
        }
        Ok(SymMat {
            dim: 2,
            m: [[a11, a12], [a12, a22]],
        })
    }

    /// `c * I` in the given dimension; requires `c > 0`.
    pub fn scaled_identity(dim: usize, c: f64) -> Result<Self> {
        match dim {
            1 => Self::new_1d(c),
            2 => Self::new_2d(c, 0.0, c),
            _ => Err(Error::InvalidArgument(format!(
                "dimension must be 1 or 2, got {dim}"
            ))),
        }
    }

    /// Build from a row-major slice of `dim * dim` entries, checking symmetry.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        match (dim, entries.len()) {
            (1, 1) => Self::new_1d(entries[0]),
            (2, 4) => {
                if (entries[1] - entries[2]).abs() > 1e-12 * entries[1].abs().max(1.0) {
                    return Err(Error::InvalidArgument(
                        "matrix entries are not symmetric".into(),
                    ));
                }
                Self::new_2d(entries[0], entries[1], entries[3])
            }
            _ => Err(Error::InvalidArgument(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    /// Row-major entries (length `dim * dim`).
    pub fn row_major(&self) -> Vec<f64> {
        match self.dim {
            1 => vec![self.m[0][0]],
            _ => vec![self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]],
        }
    }

    /// Matrix-vector product `A p`.
    #[inline]
    pub fn apply(&self, p: Point) -> Point {
        match self.dim {
            1 => [self.m[0][0] * p[0], 0.0],
            _ => [
                self.m[0][0] * p[0] + self.m[0][1] * p[1],
                self.m[1][0] * p[0] + self.m[1][1] * p[1],
            ],
        }
    }

    /// Quadratic form `<A p, p>`.
    #[inline]
    pub fn quad(&self, p: Point) -> f64 {
        dot(self.dim, self.apply(p), p)
    }

    /// Inverse matrix; always exists by the SPD construction invariant.
    pub fn inverse(&self) -> SymMat {
        match self.dim {
            1 => SymMat {
                dim: 1,
                m: [[1.0 / self.m[0][0], 0.0], [0.0, 0.0]],
            },
            _ => {
                let det = self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0];
                SymMat {
                    dim: 2,
                    m: [
                        [self.m[1][1] / det, -self.m[0][1] / det],
                        [-self.m[1][0] / det, self.m[0][0] / det],
                    ],
                }
            }
        }
    }

    /// Smallest eigenvalue (positive by construction).
    pub fn min_eig(&self) -> f64 {
        match self.dim {
            1 => self.m[0][0],
            _ => {
                let half_tr = 0.5 * (self.m[0][0] + self.m[1][1]);
                let half_gap = 0.5 * (self.m[0][0] - self.m[1][1]);
                half_tr - (half_gap * half_gap + self.m[0][1] * self.m[0][1]).sqrt()
            }
        }
    }

    /// Largest eigenvalue; for an SPD matrix this is the operator norm.
    pub fn max_eig(&self) -> f64 {
        match self.dim {
            1 => self.m[0][0],
            _ => {
                let half_tr = 0.5 * (self.m[0][0] + self.m[1][1]);
                let half_gap = 0.5 * (self.m[0][0] - self.m[1][1]);
                half_tr + (half_gap * half_gap + self.m[0][1] * self.m[0][1]).sqrt()
            }
        }
    }

    /// Operator norm (alias of [`SymMat::max_eig`] for SPD matrices).
    pub fn op_norm(&self) -> f64 {
        self.max_eig()
    }
}

/// Largest eigenvalue of a (not necessarily definite) symmetric matrix given
/// by its entries; used for curvature tests on finite-difference Hessians.
pub fn sym_max_eig(dim: usize, a11: f64, a12: f64, a22: f64) -> f64 {
    match dim {
        1 => a11,
        _ => {
            let half_tr = 0.5 * (a11 + a22);
            let half_gap = 0.5 * (a11 - a22);
            half_tr + (half_gap * half_gap + a12 * a12).sqrt()
        }
    }
}

/// Smallest eigenvalue of a symmetric matrix given by its entries.
pub fn sym_min_eig(dim: usize, a11: f64, a12: f64, a22: f64) -> f64 {
    match dim {
        1 => a11,
        _ => {
            let half_tr = 0.5 * (a11 + a22);
            let half_gap = 0.5 * (a11 - a22);
            half_tr - (half_gap * half_gap + a12 * a12).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_construction_rejects_indefinite() {
        assert!(SymMat::new_1d(0.0).is_err());
        assert!(SymMat::new_1d(-1.0).is_err());
        assert!(SymMat::new_2d(1.0, 2.0, 1.0).is_err(), "det = -3 rejected");
        assert!(SymMat::new_2d(2.0, 0.5, 1.0).is_ok());
    }

    #[test]
    fn inverse_and_quad_agree_with_hand_computation() {
        // A = [[2, 1], [1, 3]], det = 5, A^-1 = [[3, -1], [-1, 2]]/5.
        let a = SymMat::new_2d(2.0, 1.0, 3.0).unwrap();
        let inv = a.inverse();
        assert!((inv.entry(0, 0) - 0.6).abs() < 1e-15);
        assert!((inv.entry(0, 1) + 0.2).abs() < 1e-15);
        assert!((inv.entry(1, 1) - 0.4).abs() < 1e-15);
        // <A p, p> with p = (1, -2): A p = (0, -5), dot = 10.
        assert!((a.quad([1.0, -2.0]) - 10.0).abs() < 1e-15);
        // A * A^-1 * p = p.
        let p = [0.3, -1.7];
        let back = a.apply(inv.apply(p));
        assert!((back[0] - p[0]).abs() < 1e-14 && (back[1] - p[1]).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_match_characteristic_polynomial() {
        // A = [[2, 1], [1, 3]]: eigenvalues (5 +- sqrt(5))/2.
        let a = SymMat::new_2d(2.0, 1.0, 3.0).unwrap();
        let lo = (5.0 - 5.0f64.sqrt()) / 2.0;
        let hi = (5.0 + 5.0f64.sqrt()) / 2.0;
        assert!((a.min_eig() - lo).abs() < 1e-14);
        assert!((a.max_eig() - hi).abs() < 1e-14);
    }

    #[test]
    fn vector_helpers_respect_dim() {
        let a = [3.0, 4.0];
        assert_eq!(norm(1, a), 3.0, "1-D norm ignores the second component");
        assert_eq!(norm(2, a), 5.0);
        assert_eq!(inf_norm(2, [-3.0, 2.0]), 3.0);
        assert_eq!(dot(2, [1.0, 2.0], [3.0, -1.0]), 1.0);
    }
}
