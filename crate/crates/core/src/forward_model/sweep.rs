//! Radius and PSF-kind sweeps of 1D fringe intensity.
//!
//! Relative intensities are normalized to the plateau of a unit-amplitude
//! field (`mass^2`) for the profile minima, and to the brightest detector
//! reading within half a unit of the axis for the radius sweep.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use super::{field_at_1d, unit_phasors, PsfKind, PsfModel, DEFAULT_QUADRATURE_STEP};
use crate::error::{invalid, Result};

/// Eight segments of 125 samples with phases `[0.5, 0, -0.5, 1, 0.5, 0, -0.5, 1] * pi`.
pub fn eq3_phase_vector() -> (Vec<f64>, usize) {
    let omega = [0.5, 0.0, -0.5, 1.0, 0.5, 0.0, -0.5, 1.0];
    (omega.iter().map(|w| w * PI).collect(), 125)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeMinimum {
    /// Index of the boundary (between units `boundary - 1` and `boundary`).
    pub boundary: usize,
    /// Wrapped phase step across the boundary, in `[0, 2pi)`.
    pub delta_phi: f64,
    pub position: f64,
    pub relative_intensity: f64,
}

/// Lowest intensity within half a unit of every interior boundary, relative
/// to the plateau of a unit-amplitude field.
pub fn fringe_minima(values: &[Complex64], unit_len: usize, model: &PsfModel) -> Result<Vec<FringeMinimum>> {
    if unit_len == 0 {
        return Err(invalid("unit_len must be positive"));
    }
    let plateau = model.mass().powi(2);
    let len = unit_len as f64;
    // Quarter-pixel grid; boundary coordinates are exact grid points.
    let half_steps = 2 * unit_len as i64;
    Ok((1..values.len())
        .map(|k| {
            let center = k as f64 * len;
            let (position, intensity) = (-half_steps..=half_steps)
                .map(|s| {
                    let x = center + s as f64 * 0.25;
                    (x, field_at_1d(values, unit_len, model, x).norm_sqr())
                })
                .fold((center, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            FringeMinimum {
                boundary: k,
                delta_phi: (values[k].arg() - values[k - 1].arg()).rem_euclid(2.0 * PI),
                position,
                relative_intensity: intensity / plateau,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisExtremum {
    Minimum,
    Maximum,
    Neither,
}

/// Classifies `x` as a local extremum of the 1D intensity by comparing it with
/// its neighbours at distance `delta`.
pub fn axis_extremum(values: &[Complex64], unit_len: usize, model: &PsfModel, x: f64, delta: f64) -> AxisExtremum {
    let at = |x: f64| field_at_1d(values, unit_len, model, x).norm_sqr();
    let (left, mid, right) = (at(x - delta), at(x), at(x + delta));
    if mid < left && mid < right {
        AxisExtremum::Minimum
    } else if mid > left && mid > right {
        AxisExtremum::Maximum
    } else {
        AxisExtremum::Neither
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Width of one detector pixel, in simulation samples. Intensities are
    /// averaged over this width before comparison.
    pub detector_width: f64,
    pub quadrature_step: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            detector_width: 8.0,
            quadrature_step: DEFAULT_QUADRATURE_STEP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub delta_phi: f64,
    pub radius: f64,
    pub relative_intensity: f64,
    pub extremum: AxisExtremum,
}

/// Central-axis fringe intensity of the alternating vector
/// `[w, 0, w, 0, w, 0, w, 0] * pi` for every `(delta_phi, radius)` pair,
/// rows grouped by `delta_phi` in input order.
pub fn fringe_radius_sweep(
    delta_phis: &[f64],
    radii: &[f64],
    unit_len: usize,
    kind: PsfKind,
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if delta_phis.is_empty() || radii.is_empty() {
        return Err(invalid("sweep needs at least one phase step and one radius"));
    }
    if unit_len == 0 {
        return Err(invalid("unit_len must be positive"));
    }
    if !(cfg.detector_width > 0.0) {
        return Err(invalid("detector_width must be positive"));
    }
    let models = radii
        .par_iter()
        .map(|&r| PsfModel::with_step(kind, r, cfg.quadrature_step))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(f64, usize)> = delta_phis
        .iter()
        .flat_map(|&d| (0..radii.len()).map(move |i| (d, i)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(delta_phi, i)| {
            let model = &models[i];
            let values = unit_phasors(&[delta_phi, 0.0, delta_phi, 0.0, delta_phi, 0.0, delta_phi, 0.0]);
            let axis = 4.0 * unit_len as f64;
            let reading = |x: f64| detector_reading(&values, unit_len, model, x, cfg.detector_width);
            let at_axis = reading(axis);
            let spacing = (cfg.detector_width / 2.0).max(1.0);
            let reach = unit_len as f64 / 2.0;
            let steps = (reach / spacing).floor() as i64;
            let brightest = (-steps..=steps)
                .map(|s| reading(axis + s as f64 * spacing))
                .fold(at_axis, f64::max);
            SweepRow {
                delta_phi,
                radius: model.radius(),
                relative_intensity: if brightest > 0.0 { at_axis / brightest } else { 1.0 },
                extremum: axis_extremum(&values, unit_len, model, axis, 1.0),
            }
        })
        .collect())
}

/// Mean intensity over a detector pixel of width `width` centered at `x`.
fn detector_reading(values: &[Complex64], unit_len: usize, model: &PsfModel, x: f64, width: f64) -> f64 {
    const SAMPLES: usize = 16;
    (0..SAMPLES)
        .map(|s| {
            let t = x - width / 2.0 + (s as f64 + 0.5) * width / SAMPLES as f64;
            field_at_1d(values, unit_len, model, t).norm_sqr()
        })
        .sum::<f64>()
        / SAMPLES as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eq3_vector_shape() {
        let (phases, len) = eq3_phase_vector();
        assert_eq!(phases.len() * len, 1000);
        assert_eq!(phases[3], PI);
    }

    #[test]
    fn minima_sit_on_boundaries_with_good_locality() {
        let (phases, len) = eq3_phase_vector();
        let model = PsfModel::new(PsfKind::Gaussian, 18.0).unwrap();
        let minima = fringe_minima(&unit_phasors(&phases), len, &model).unwrap();
        assert_eq!(minima.len(), 7);
        for m in &minima {
            assert!((m.position - m.boundary as f64 * 125.0).abs() < 1e-9);
            let expect = (1.0 + m.delta_phi.cos()) / 2.0;
            assert!((m.relative_intensity - expect).abs() < 1e-3, "{m:?}");
        }
    }

    #[test]
    fn sweep_rejects_empty_sets() {
        let cfg = SweepConfig::default();
        assert!(fringe_radius_sweep(&[], &[1.0], 64, PsfKind::Gaussian, &cfg).is_err());
        assert!(fringe_radius_sweep(&[0.1], &[], 64, PsfKind::Gaussian, &cfg).is_err());
    }

    #[test]
    fn sweep_rows_follow_input_order() {
        let cfg = SweepConfig::default();
        let rows = fringe_radius_sweep(&[0.1 * PI, 0.5 * PI], &[2.0, 8.0, 32.0], 64, PsfKind::Gaussian, &cfg).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[4].delta_phi, 0.5 * PI);
        assert_eq!(rows[4].radius, 8.0);
        assert!(rows.iter().all(|r| r.relative_intensity > 0.0 && r.relative_intensity <= 1.0));
    }
}
