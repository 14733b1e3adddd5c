//! Consistency rule over the `m` fringe maps.
//!
//! A correctly recognized boundary shows its fringe in exactly `m - 1`
//! measurements; the missing one names the edge ratio through the reference
//! library. Any other count marks the boundary invalid.
//!
//! Naming: `matrix_a` holds the boundaries between horizontally adjacent units
//! (shape `s1 x (s2 - 1)`, like `row_map`), `matrix_b` those between vertically
//! adjacent units (shape `(s1 - 1) x s2`, like `col_map`).

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::fringe_detect::{EdgeKind, FringeMaps};
use crate::patterns::ReferenceLibrary;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidBoundaryMaps {
    pub matrix_a: Array2<bool>,
    pub matrix_b: Array2<bool>,
}

impl InvalidBoundaryMaps {
    /// All boundaries valid.
    pub fn clear(rows: usize, cols: usize) -> Self {
        Self {
            matrix_a: Array2::from_elem((rows, cols.saturating_sub(1)), false),
            matrix_b: Array2::from_elem((rows.saturating_sub(1), cols), false),
        }
    }

    pub fn units(&self) -> (usize, usize) {
        (self.matrix_a.nrows(), self.matrix_b.ncols())
    }

    pub fn invalid_count(&self) -> usize {
        self.matrix_a.iter().chain(self.matrix_b.iter()).filter(|&&b| b).count()
    }

    pub fn edge_count(&self) -> usize {
        self.matrix_a.len() + self.matrix_b.len()
    }

    /// Swaps the roles of rows and columns: the transposed `matrix_b` becomes
    /// the new `matrix_a` and vice versa.
    pub fn transposed(&self) -> Self {
        Self {
            matrix_a: self.matrix_b.t().to_owned(),
            matrix_b: self.matrix_a.t().to_owned(),
        }
    }
}

/// Per-edge ratios; `None` where the boundary is invalid.
///
/// A horizontal ratio `rho` at `[[r, c]]` means
/// `phase(r, c + 1) - phase(r, c) = arg(rho)`; a vertical ratio at `[[r, c]]`
/// means `phase(r + 1, c) - phase(r, c) = arg(rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRatios {
    pub horizontal: Array2<Option<Complex64>>,
    pub vertical: Array2<Option<Complex64>>,
}

impl EdgeRatios {
    pub fn get(&self, kind: EdgeKind, row: usize, col: usize) -> Option<Complex64> {
        match kind {
            EdgeKind::Horizontal => self.horizontal[[row, col]],
            EdgeKind::Vertical => self.vertical[[row, col]],
        }
    }
}

pub fn mark_invalid_and_ratios(
    maps: &[FringeMaps],
    lib: &ReferenceLibrary,
) -> Result<(InvalidBoundaryMaps, EdgeRatios)> {
    let m = maps.len();
    if m < 2 {
        return Err(invalid(format!("need at least two fringe maps, got {m}")));
    }
    if lib.m() != m {
        return Err(Error::DimensionMismatch {
            expected: format!("{} maps for the reference library", lib.m()),
            actual: format!("{m} maps"),
        });
    }
    let first = &maps[0];
    first.validate()?;
    for other in &maps[1..] {
        if other.row_map.dim() != first.row_map.dim() || other.col_map.dim() != first.col_map.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?} / {:?}", first.row_map.dim(), first.col_map.dim()),
                actual: format!("{:?} / {:?}", other.row_map.dim(), other.col_map.dim()),
            });
        }
    }

    // Unique absent measurement, if exactly one.
    let judge = |present: &mut dyn Iterator<Item = bool>| -> Option<Complex64> {
        let mut absent = None;
        let mut count = 0;
        for (j, p) in present.enumerate() {
            if p {
                count += 1;
            } else {
                absent = Some(j + 1);
            }
        }
        if count + 1 == m {
            absent.and_then(|j| lib.ratio(j))
        } else {
            None
        }
    };

    let horizontal = Array2::from_shape_fn(first.row_map.dim(), |idx| {
        judge(&mut maps.iter().map(|mp| mp.row_map[idx]))
    });
    let vertical = Array2::from_shape_fn(first.col_map.dim(), |idx| {
        judge(&mut maps.iter().map(|mp| mp.col_map[idx]))
    });
    let invalid = InvalidBoundaryMaps {
        matrix_a: horizontal.mapv(|r| r.is_none()),
        matrix_b: vertical.mapv(|r| r.is_none()),
    };
    Ok((invalid, EdgeRatios { horizontal, vertical }))
}

/// With probability `sigma` per boundary, flips the presence bit of one
/// uniformly chosen measurement.
pub fn inject_misjudgment(truth: &[FringeMaps], sigma: f64, seed: u64) -> Result<Vec<FringeMaps>> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(invalid(format!("sigma must lie in [0, 1], got {sigma}")));
    }
    let mut out = truth.to_vec();
    if truth.is_empty() || sigma == 0.0 {
        return Ok(out);
    }
    let m = truth.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = truth[0].units();
    for r in 0..rows {
        for c in 0..cols.saturating_sub(1) {
            if rng.random_bool(sigma) {
                let j = rng.random_range(0..m);
                out[j].row_map[[r, c]] ^= true;
            }
        }
    }
    for r in 0..rows.saturating_sub(1) {
        for c in 0..cols {
            if rng.random_bool(sigma) {
                let j = rng.random_range(0..m);
                out[j].col_map[[r, c]] ^= true;
            }
        }
    }
    Ok(out)
}
