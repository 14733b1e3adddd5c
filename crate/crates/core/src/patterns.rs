//! Phase-modulation ramps and the reference library.
//!
//! Pattern `j` is the geometric ramp `M[c, d] = q_j^(c + d)` with `M[0, 0] = 1`,
//! so every horizontal and vertical neighbour pair differs by the same ratio
//! `q_j`. An object edge with ratio `rho` loses its fringe in measurement `j`
//! exactly when `rho * q_j = 1`, which makes `conj(q_j)` the library entry.

use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{invalid, Result};
use crate::ComplexField;

#[derive(Debug, Clone)]
pub struct PatternSet {
    /// Adjacent ratios `q_j`, `j = 1..=m` stored at index `j - 1`.
    pub ratios: Vec<Complex64>,
    /// Ramp phase step `theta_j` in `(0, 2pi]`, `q_j = e^{i theta_j}`.
    pub steps: Vec<f64>,
    pub patterns: Vec<ComplexField>,
    pub eight_bit: Vec<Array2<u8>>,
}

impl PatternSet {
    pub fn m(&self) -> usize {
        self.ratios.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.patterns[0].dim()
    }
}

/// Ramp steps for `m` patterns. `m = 4` uses `(pi/2, 3pi/2, pi, 2pi)`,
/// i.e. `q = (i, -i, -1, 1)`; other `m` use `2pi j / m`.
pub fn ramp_steps(m: usize) -> Vec<f64> {
    if m == 4 {
        vec![FRAC_PI_2, 3.0 * FRAC_PI_2, PI, TAU]
    } else {
        (1..=m).map(|j| TAU * j as f64 / m as f64).collect()
    }
}

/// `e^{i theta}` with exact components on the quarter turns.
fn phasor(theta: f64) -> Complex64 {
    let quarter = theta / FRAC_PI_2;
    if (quarter - quarter.round()).abs() < 1e-12 {
        match (quarter.round() as i64).rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    } else {
        Complex64::from_polar(1.0, theta)
    }
}

pub fn make_patterns(m: usize, rows: usize, cols: usize) -> Result<PatternSet> {
    if m < 2 {
        return Err(invalid(format!("at least two patterns are needed, got m = {m}")));
    }
    if rows == 0 || cols == 0 {
        return Err(invalid("pattern grid must be non-empty"));
    }
    let steps = ramp_steps(m);
    let ratios: Vec<Complex64> = steps.iter().map(|&t| phasor(t)).collect();
    let patterns: Vec<ComplexField> = steps
        .iter()
        .map(|&t| {
            Array2::from_shape_fn((rows, cols), |(c, d)| {
                // Reduce the step count first so large grids keep exact quarter turns.
                let n = (c + d) as f64;
                phasor((n * t).rem_euclid(TAU))
            })
        })
        .collect();
    let eight_bit = patterns.iter().map(encode_8bit).collect();
    Ok(PatternSet {
        ratios,
        steps,
        patterns,
        eight_bit,
    })
}

/// 8-bit SLM level of a phase: `floor(theta / 2pi * 255)` with `theta` in `[0, 2pi)`,
/// giving 63, 127 and 191 for the quarter turns.
pub fn phase_to_level(theta: f64) -> u8 {
    let t = theta.rem_euclid(TAU);
    // Snap values within rounding of a full turn back to zero.
    let t = if TAU - t < 1e-9 { 0.0 } else { t };
    ((t / TAU * 255.0 + 1e-9).floor() as i64).clamp(0, 255) as u8
}

pub fn encode_8bit(pattern: &ComplexField) -> Array2<u8> {
    pattern.mapv(|v| phase_to_level(v.arg()))
}

/// Map from the index of the measurement in which a fringe disappears to the
/// object's adjacent-phase ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLibrary {
    entries: Vec<Complex64>,
}

impl ReferenceLibrary {
    pub fn from_entries(entries: Vec<Complex64>) -> Self {
        Self { entries }
    }

    pub fn m(&self) -> usize {
        self.entries.len()
    }

    /// Ratio for a 1-based measurement index.
    pub fn ratio(&self, j: usize) -> Option<Complex64> {
        j.checked_sub(1).and_then(|i| self.entries.get(i)).copied()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// 1-based index of the measurement in which an edge of ratio `rho` goes dark-free.
    pub fn disappearance_index(&self, rho: Complex64) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| (e - rho).norm() < 1e-9)
            .map(|i| i + 1)
    }
}

pub fn reference_library(set: &PatternSet) -> ReferenceLibrary {
    ReferenceLibrary {
        entries: set.ratios.iter().map(|q| q.conj()).collect(),
    }
}

/// Expands a unit-resolution grid to physical pixels, `ppu x ppu` per unit.
pub fn expand_units<T: Clone>(grid: &Array2<T>, ppu: usize) -> Array2<T> {
    let (rows, cols) = grid.dim();
    Array2::from_shape_fn((rows * ppu, cols * ppu), |(y, x)| grid[[y / ppu, x / ppu]].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn canonical_m4_ratios() {
        let set = make_patterns(4, 3, 3).unwrap();
        let i = Complex64::i();
        let want = [i, -i, Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)];
        for (q, w) in set.ratios.iter().zip(want) {
            assert!(close(*q, w));
        }
        assert_eq!(set.steps[1], 3.0 * FRAC_PI_2);
    }

    #[test]
    fn ramp_value_at_unit() {
        let set = make_patterns(4, 4, 4).unwrap();
        let v = set.patterns[0][[2, 3]];
        assert!((v.arg().rem_euclid(TAU) - FRAC_PI_2).abs() < 1e-12);
        assert!(close(set.patterns[2][[0, 0]], Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn binary_patterns() {
        let set = make_patterns(2, 2, 2).unwrap();
        assert!(close(set.ratios[0], Complex64::new(-1.0, 0.0)));
        assert!(close(set.ratios[1], Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn rejects_single_pattern() {
        assert!(make_patterns(1, 4, 4).is_err());
        assert!(make_patterns(0, 4, 4).is_err());
    }

    #[test]
    fn slm_levels() {
        assert_eq!(phase_to_level(FRAC_PI_2), 63);
        assert_eq!(phase_to_level(3.0 * FRAC_PI_2), 191);
        assert_eq!(phase_to_level(PI), 127);
        assert_eq!(phase_to_level(0.0), 0);
        assert_eq!(phase_to_level(TAU), 0);
        assert_eq!(phase_to_level(-FRAC_PI_2), 191);
    }

    #[test]
    fn eight_bit_grid_of_first_pattern() {
        let set = make_patterns(4, 2, 2).unwrap();
        assert_eq!(set.eight_bit[0], ndarray::array![[0, 63], [63, 127]]);
        assert!(set.eight_bit[3].iter().all(|&v| v == 0));
    }

    #[test]
    fn library_is_conjugate_of_ratios() {
        let set = make_patterns(4, 2, 2).unwrap();
        let lib = reference_library(&set);
        let i = Complex64::i();
        assert!(close(lib.ratio(1).unwrap(), -i));
        assert!(close(lib.ratio(2).unwrap(), i));
        assert!(close(lib.ratio(3).unwrap(), Complex64::new(-1.0, 0.0)));
        assert!(close(lib.ratio(4).unwrap(), Complex64::new(1.0, 0.0)));
        assert_eq!(lib.ratio(0), None);
        assert_eq!(lib.ratio(5), None);
        assert_eq!(lib.disappearance_index(i), Some(2));
    }

    #[test]
    fn expansion_repeats_units() {
        let g = ndarray::array![[1u8, 2], [3, 4]];
        let e = expand_units(&g, 3);
        assert_eq!(e.dim(), (6, 6));
        assert_eq!(e[[5, 2]], 3);
        assert_eq!(e[[2, 3]], 2);
    }

    proptest! {
        #[test]
        fn adjacent_ratios_are_uniform(m in 2usize..9, rows in 1usize..7, cols in 1usize..7) {
            let set = make_patterns(m, rows, cols).unwrap();
            for (p, q) in set.patterns.iter().zip(&set.ratios) {
                prop_assert!((q.norm() - 1.0).abs() < 1e-12);
                for r in 0..rows {
                    for c in 0..cols {
                        if c + 1 < cols {
                            prop_assert!((p[[r, c + 1]] - q * p[[r, c]]).norm() < 1e-9);
                        }
                        if r + 1 < rows {
                            prop_assert!((p[[r + 1, c]] - q * p[[r, c]]).norm() < 1e-9);
                        }
                    }
                }
            }
            for a in 0..m {
                for b in a + 1..m {
                    prop_assert!((set.ratios[a] - set.ratios[b]).norm() > 1e-6);
                }
            }
        }
    }
}
