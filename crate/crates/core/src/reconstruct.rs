//! Phase accumulation along planned paths, amplitude estimate and scoring.
//!
//! Phases are carried as unit phasors while they are accumulated and fused,
//! so quantized ratios (quarter turns) compose without rounding drift.

use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

use crate::boundary_logic::{EdgeRatios, InvalidBoundaryMaps};
use crate::error::{invalid, Error, Result};
use crate::forward_model::IntensityImage;
use crate::fringe_detect::UnitGrid;
use crate::path_search::{crossed_edge, plan_with_retry, Move, PathPlan, Strategy};
use crate::{ComplexField, Unit};

/// Phase grid with `None` for units no path reaches.
pub type PhaseGrid = Array2<Option<f64>>;

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub phase: PhaseGrid,
    pub amplitude: Array2<f64>,
    pub complex_image: ComplexField,
    /// How the plan from the first origin reached each unit.
    pub provenance: Array2<Strategy>,
    /// Number of origins whose plan reached each unit.
    pub contributors: Array2<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub phase_rmse: f64,
    pub complex_l2: f64,
    pub unknown_frac: f64,
}

fn unit_phasor(z: Complex64) -> Complex64 {
    let n = z.norm();
    if n > 0.0 {
        z / n
    } else {
        Complex64::new(1.0, 0.0)
    }
}

fn wrap_2pi(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Wraps to `(-pi, pi]`.
fn wrap_pi(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(TAU) - PI;
    if t <= -PI {
        t + TAU
    } else {
        t
    }
}

/// Product of edge ratios along each planned path, as unit phasors
/// relative to the origin.
fn accumulate_phasors(plan: &PathPlan, ratios: &EdgeRatios) -> Result<Array2<Option<Complex64>>> {
    let (rows, cols) = plan.units();
    if ratios.horizontal.dim() != (rows, cols.saturating_sub(1)) || ratios.vertical.dim() != (rows.saturating_sub(1), cols) {
        return Err(Error::DimensionMismatch {
            expected: format!("edge ratios for a {rows}x{cols} grid"),
            actual: format!("{:?} / {:?}", ratios.horizontal.dim(), ratios.vertical.dim()),
        });
    }
    let mut out = Array2::from_elem((rows, cols), None);
    for r in 0..rows {
        for c in 0..cols {
            let Some(path) = plan.path((r, c)) else {
                continue;
            };
            let mut at = plan.origin;
            let mut z = Complex64::new(1.0, 0.0);
            for &mv in path {
                let next = mv
                    .apply(at, rows, cols)
                    .ok_or_else(|| invalid(format!("path to ({r}, {c}) leaves the grid at {at:?}")))?;
                let (horizontal, er, ec) = crossed_edge(at, mv).expect("in-grid move crosses a boundary");
                let (rho, kind) = if horizontal {
                    (ratios.horizontal[[er, ec]], "horizontal")
                } else {
                    (ratios.vertical[[er, ec]], "vertical")
                };
                let rho = rho.ok_or(Error::UnknownRatioOnPath { kind, row: er, col: ec })?;
                // Stored orientation points right/down; moving against it inverts the ratio.
                let forward = matches!(mv, Move::Right | Move::Down);
                z = unit_phasor(z * if forward { rho } else { rho.conj() });
                at = next;
            }
            out[[r, c]] = Some(z);
        }
    }
    Ok(out)
}

pub fn accumulate_phase(plan: &PathPlan, ratios: &EdgeRatios, origin_phase: f64) -> Result<PhaseGrid> {
    Ok(accumulate_phasors(plan, ratios)?.mapv(|z| z.map(|z| wrap_2pi(origin_phase + z.arg()))))
}

/// Per-unit circular mean over plans from every origin, each aligned to the
/// first origin's plan at the unit `origins[0]` (or over all common units
/// when the reference is not reached).
pub fn fuse_origins(
    invalid_maps: &InvalidBoundaryMaps,
    ratios: &EdgeRatios,
    origins: &[Unit],
    origin_phase: f64,
) -> Result<(PhaseGrid, Array2<Strategy>, Array2<usize>)> {
    let (&first, _) = origins
        .split_first()
        .ok_or_else(|| invalid("at least one origin is required"))?;
    let mut plans = Vec::with_capacity(origins.len());
    for i in 0..origins.len() {
        let mut order = origins.to_vec();
        order.swap(0, i);
        plans.push(plan_with_retry(invalid_maps, &order)?);
    }
    let provenance = {
        let p = &plans[0];
        let (rows, cols) = p.units();
        Array2::from_shape_fn((rows, cols), |u| p.strategy(u))
    };
    let phasors: Vec<Array2<Option<Complex64>>> = plans
        .iter()
        .map(|p| accumulate_phasors(p, ratios))
        .collect::<Result<_>>()?;
    let reference = &phasors[0];
    let dim = reference.dim();
    let mut sum = Array2::from_elem(dim, Complex64::new(0.0, 0.0));
    let mut count = Array2::from_elem(dim, 0usize);
    for z in &phasors {
        let align = match (reference[first], z[first]) {
            (Some(a), Some(b)) => a * b.conj(),
            _ => unit_phasor(
                reference
                    .iter()
                    .zip(z.iter())
                    .filter_map(|(a, b)| Some((*a)? * (*b)?.conj()))
                    .sum(),
            ),
        };
        for ((s, n), v) in sum.iter_mut().zip(count.iter_mut()).zip(z.iter()) {
            if let Some(v) = v {
                *s += align * v;
                *n += 1;
            }
        }
    }
    let base = Complex64::from_polar(1.0, origin_phase);
    let phase = Array2::from_shape_fn(dim, |u| (count[u] > 0).then(|| wrap_2pi((unit_phasor(sum[u]) * base).arg())));
    Ok((phase, provenance, count))
}

/// Amplitude per unit from the median intensity of its central block, pooled
/// over all images and normalized to a maximum of 1.
///
/// The block is eroded by `max(band_halfwidth + 1, 3 ppu / 8)` pixels on each
/// side, which keeps it clear of the fringe tails of wide PSFs.
pub fn estimate_amplitude(images: &[IntensityImage], grid: UnitGrid, band_halfwidth: usize) -> Result<Array2<f64>> {
    if images.is_empty() {
        return Err(invalid("no images to estimate amplitude from"));
    }
    for img in images {
        grid.check(img)?;
    }
    let ppu = grid.pixels_per_unit;
    let erosion = (band_halfwidth + 1).max(3 * ppu / 8);
    if 2 * erosion >= ppu {
        return Err(invalid(format!("erosion {erosion} leaves no interior in a {ppu}-pixel unit")));
    }
    let height = images[0].height();
    let mut amp = Array2::zeros((grid.rows, grid.cols));
    let mut pool = Vec::new();
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            pool.clear();
            for e in [erosion, 0] {
                let ys = (r * ppu + e..(r + 1) * ppu - e)
                    .filter_map(|y| y.checked_sub(grid.crop_rows))
                    .filter(|&y| y < height);
                for y in ys {
                    for x in c * ppu + e..(c + 1) * ppu - e {
                        pool.extend(images.iter().map(|img| img.data[[y, x]]));
                    }
                }
                // A unit whose interior is cropped falls back to its surviving pixels.
                if !pool.is_empty() {
                    break;
                }
            }
            if pool.is_empty() {
                return Err(Error::EmptyUnit { row: r, col: c });
            }
            amp[[r, c]] = median(&mut pool).max(0.0).sqrt();
        }
    }
    let peak = amp.fold(0.0f64, |m, &v| m.max(v));
    if peak > 0.0 {
        amp.mapv_inplace(|v| v / peak);
    }
    Ok(amp)
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let cmp = |a: &f64, b: &f64| a.total_cmp(b);
    let (_, &mut hi, _) = values.select_nth_unstable_by(n / 2, cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = values[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// `amplitude * e^{i phase}`; unknown units are NaN.
pub fn compose(phase: &PhaseGrid, amplitude: &Array2<f64>) -> Result<ComplexField> {
    if phase.dim() != amplitude.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", phase.dim()),
            actual: format!("{:?}", amplitude.dim()),
        });
    }
    Ok(Array2::from_shape_fn(phase.dim(), |u| match phase[u] {
        Some(p) => Complex64::from_polar(amplitude[u], p),
        None => Complex64::new(f64::NAN, f64::NAN),
    }))
}

/// Circular RMSE of known units after the best global offset.
///
/// Candidate offsets are the observed per-unit differences; the one with the
/// smallest RMSE wins. A single outlier therefore costs exactly its own error.
pub fn phase_rmse(phase: &PhaseGrid, truth: &ComplexField) -> Result<f64> {
    if phase.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", truth.dim()),
            actual: format!("{:?}", phase.dim()),
        });
    }
    let diffs: Vec<f64> = phase
        .iter()
        .zip(truth.iter())
        .filter_map(|(p, t)| p.map(|p| wrap_pi(p - t.arg())))
        .collect();
    if diffs.is_empty() {
        return Ok(0.0);
    }
    let mut candidates = diffs.clone();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let n = diffs.len() as f64;
    let best = candidates
        .iter()
        .map(|&alpha| diffs.iter().map(|&d| wrap_pi(d - alpha).powi(2)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok((best / n).sqrt())
}

/// `|| e^{i alpha} x_hat - x || / || x ||` with the optimal `alpha`; unknown
/// units count as zero in `x_hat`.
pub fn complex_l2(estimate: &ComplexField, truth: &ComplexField) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", truth.dim()),
            actual: format!("{:?}", estimate.dim()),
        });
    }
    let clean = |z: &Complex64| if z.is_nan() { Complex64::new(0.0, 0.0) } else { *z };
    let inner: Complex64 = estimate.iter().zip(truth.iter()).map(|(e, t)| clean(e).conj() * t).sum();
    let align = unit_phasor(inner);
    let err: f64 = estimate.iter().zip(truth.iter()).map(|(e, t)| (align * clean(e) - t).norm_sqr()).sum();
    let norm: f64 = truth.iter().map(|t| t.norm_sqr()).sum();
    Ok(if norm > 0.0 { (err / norm).sqrt() } else { err.sqrt() })
}

pub fn compose_and_score(phase: &PhaseGrid, amplitude: &Array2<f64>, truth: &ComplexField) -> Result<Metrics> {
    let estimate = compose(phase, amplitude)?;
    let unknown = phase.iter().filter(|p| p.is_none()).count();
    Ok(Metrics {
        phase_rmse: phase_rmse(phase, truth)?,
        complex_l2: complex_l2(&estimate, truth)?,
        unknown_frac: unknown as f64 / phase.len().max(1) as f64,
    })
}

/// Fuses phases over `origins` and attaches the amplitude estimate.
pub fn reconstruct(
    invalid_maps: &InvalidBoundaryMaps,
    ratios: &EdgeRatios,
    origins: &[Unit],
    images: &[IntensityImage],
    grid: UnitGrid,
    band_halfwidth: usize,
) -> Result<Reconstruction> {
    let (phase, provenance, contributors) = fuse_origins(invalid_maps, ratios, origins, 0.0)?;
    let amplitude = estimate_amplitude(images, grid, band_halfwidth)?;
    let complex_image = compose(&phase, &amplitude)?;
    Ok(Reconstruction {
        phase,
        amplitude,
        complex_image,
        provenance,
        contributors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_logic::mark_invalid_and_ratios;
    use crate::fringe_detect::analytic_maps;
    use crate::path_search::plan_paths;
    use crate::patterns::{make_patterns, reference_library};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn quarter_object(levels: &Array2<u8>) -> ComplexField {
        levels.mapv(|k| Complex64::from_polar(1.0, f64::from(k) * FRAC_PI_2))
    }

    fn ratios_for(object: &ComplexField) -> (InvalidBoundaryMaps, EdgeRatios) {
        let (rows, cols) = object.dim();
        let set = make_patterns(4, rows, cols).unwrap();
        let maps: Vec<_> = set
            .ratios
            .iter()
            .enumerate()
            .map(|(j, &q)| analytic_maps(object, q, j + 1))
            .collect();
        mark_invalid_and_ratios(&maps, &reference_library(&set)).unwrap()
    }

    #[test]
    fn origin_and_single_step() {
        let inv = InvalidBoundaryMaps::clear(1, 2);
        let ratios = EdgeRatios {
            horizontal: ndarray::array![[Some(Complex64::i())]],
            vertical: Array2::from_elem((0, 2), None),
        };
        let plan = plan_paths(&inv, (0, 0)).unwrap();
        let phase = accumulate_phase(&plan, &ratios, 0.25).unwrap();
        assert!((phase[[0, 0]].unwrap() - 0.25).abs() < 1e-12);
        assert!((phase[[0, 1]].unwrap() - (0.25 + FRAC_PI_2)).abs() < 1e-12);

        let back = plan_paths(&inv, (0, 1)).unwrap();
        assert_eq!(back.path((0, 0)).unwrap(), &[Move::Left]);
        let phase = accumulate_phase(&back, &ratios, 0.0).unwrap();
        assert!((phase[[0, 0]].unwrap() - 3.0 * FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn unknown_ratio_on_path_is_an_error() {
        let inv = InvalidBoundaryMaps::clear(1, 2);
        let ratios = EdgeRatios {
            horizontal: ndarray::array![[None]],
            vertical: Array2::from_elem((0, 2), None),
        };
        let plan = plan_paths(&inv, (0, 0)).unwrap();
        assert!(matches!(
            accumulate_phase(&plan, &ratios, 0.0),
            Err(Error::UnknownRatioOnPath { .. })
        ));
    }

    #[test]
    fn one_unit_off_by_quarter_turn() {
        let truth = Array2::from_elem((16, 16), Complex64::new(1.0, 0.0));
        let mut phase: PhaseGrid = Array2::from_elem((16, 16), Some(0.0));
        phase[[5, 7]] = Some(FRAC_PI_2);
        let m = compose_and_score(&phase, &Array2::ones((16, 16)), &truth).unwrap();
        assert!((m.phase_rmse - FRAC_PI_2 / 16.0).abs() < 1e-12);
        assert_eq!(m.unknown_frac, 0.0);
    }

    #[test]
    fn unknown_units_counted() {
        let truth = Array2::from_elem((2, 2), Complex64::new(1.0, 0.0));
        let mut phase: PhaseGrid = Array2::from_elem((2, 2), Some(1.0));
        phase[[1, 1]] = None;
        let m = compose_and_score(&phase, &Array2::ones((2, 2)), &truth).unwrap();
        assert_eq!(m.unknown_frac, 0.25);
        assert!(m.phase_rmse < 1e-12);
        assert!((m.complex_l2 - 0.5).abs() < 1e-12);
        assert!(compose(&phase, &Array2::ones((2, 2))).unwrap()[[1, 1]].is_nan());
    }

    #[test]
    fn fused_phase_matches_object() {
        let levels = Array2::from_shape_fn((6, 5), |(r, c)| ((r * 7 + c * 3 + r * c) % 4) as u8);
        let object = quarter_object(&levels);
        let (inv, ratios) = ratios_for(&object);
        assert_eq!(inv.invalid_count(), 0);
        let (phase, _, count) = fuse_origins(&inv, &ratios, &[(0, 0), (5, 4)], 0.0).unwrap();
        assert!(count.iter().all(|&n| n == 2));
        let m = compose_and_score(&phase, &Array2::ones((6, 5)), &object).unwrap();
        assert!(m.phase_rmse < 1e-12);
        assert!(m.complex_l2 < 1e-12);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    proptest! {
        #[test]
        fn global_phase_invariance(alpha in -10.0f64..10.0, seed in 0u64..1000) {
            let levels = Array2::from_shape_fn((4, 4), |(r, c)| ((seed as usize + r * 5 + c * 11 + r * c) % 4) as u8);
            let truth = quarter_object(&levels);
            let mut phase: PhaseGrid = truth.mapv(|z| Some(wrap_2pi(z.arg())));
            phase[[1, 2]] = Some(0.3);
            let amp = Array2::from_elem((4, 4), 0.9);
            let a = compose_and_score(&phase, &amp, &truth).unwrap();
            let rotated = truth.mapv(|z| z * Complex64::from_polar(1.0, alpha));
            let b = compose_and_score(&phase, &amp, &rotated).unwrap();
            prop_assert!((a.phase_rmse - b.phase_rmse).abs() < 1e-9);
            prop_assert!((a.complex_l2 - b.complex_l2).abs() < 1e-9);
        }

        #[test]
        fn accumulation_is_path_independent(seed in 0u64..500) {
            let levels = Array2::from_shape_fn((5, 5), |(r, c)| ((seed as usize * 13 + r * 3 + c * c + r * c) % 4) as u8);
            let object = quarter_object(&levels);
            let (inv, ratios) = ratios_for(&object);
            for origin in [(0, 0), (2, 3), (4, 4)] {
                let plan = plan_paths(&inv, origin).unwrap();
                let phase = accumulate_phase(&plan, &ratios, object[origin].arg()).unwrap();
                for (p, t) in phase.iter().zip(object.iter()) {
                    prop_assert!(wrap_pi(p.unwrap() - t.arg()).abs() < 1e-9);
                }
            }
        }
    }
}
