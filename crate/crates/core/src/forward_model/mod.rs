//! Coherent image-plane synthesis for piecewise-constant fields.
//!
//! Every pixel-unit acts as a uniform patch of point sources. The image-plane
//! field at `x` is the sum over units of the unit's complex value times the
//! integral of the PSF across the unit, `P(x - left) - P(x - right)`. In 2D the
//! PSF is the separable product `p(x) p(y)`, so the weight factorizes into two
//! such primitive differences.

mod psf;
pub mod sweep;

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::ComplexField;

pub use psf::{psf_eval, PsfKind, PsfModel, DEFAULT_QUADRATURE_STEP};
pub use sweep::{
    axis_extremum, eq3_phase_vector, fringe_minima, fringe_radius_sweep, AxisExtremum, FringeMinimum,
    SweepConfig, SweepRow,
};

/// Measured intensity on the image plane.
///
/// Row `i` of `data` is physical image row `i + crop_rows`; the unit grid
/// spans `rows * pixels_per_unit` physical rows before cropping.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    pub data: Array2<f64>,
    pub pixels_per_unit: usize,
    pub crop_rows: usize,
}

impl IntensityImage {
    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub pixels_per_unit: usize,
    /// Additive Gaussian noise std as a fraction of the peak intensity.
    pub noise_sigma: f64,
    /// Rows removed from both the top and the bottom of the image.
    pub crop_rows: usize,
    pub quadrature_step: f64,
}

impl SimConfig {
    pub fn new(pixels_per_unit: usize) -> Self {
        Self {
            pixels_per_unit,
            noise_sigma: 0.0,
            crop_rows: default_crop_rows(pixels_per_unit),
            quadrature_step: DEFAULT_QUADRATURE_STEP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pixels_per_unit < 4 {
            return Err(invalid(format!(
                "pixels_per_unit must be at least 4, got {}",
                self.pixels_per_unit
            )));
        }
        if !(self.quadrature_step > 0.0 && self.quadrature_step <= 0.25) {
            return Err(invalid(format!(
                "quadrature_step must lie in (0, 0.25], got {}",
                self.quadrature_step
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid(format!("noise_sigma must be nonnegative, got {}", self.noise_sigma)));
        }
        Ok(())
    }
}

/// `ceil(2 * ppu / 32)` rows, i.e. two rows at the 32-pixel unit size.
pub fn default_crop_rows(pixels_per_unit: usize) -> usize {
    (2 * pixels_per_unit).div_ceil(32)
}

/// Field at an arbitrary coordinate `x` of a 1D row of units, unit `k`
/// spanning `[k * unit_len, (k + 1) * unit_len]`.
pub fn field_at_1d(values: &[Complex64], unit_len: usize, model: &PsfModel, x: f64) -> Complex64 {
    let len = unit_len as f64;
    let (first, last) = touching_units(x, len, model.support(), values.len());
    (first..last)
        .map(|k| values[k] * model.window(x, k as f64 * len, (k + 1) as f64 * len))
        .sum()
}

/// Image-plane field sampled at the pixel centers `x = i + 0.5`.
pub fn field_profile_1d(values: &[Complex64], unit_len: usize, model: &PsfModel) -> Result<Vec<Complex64>> {
    if unit_len == 0 {
        return Err(invalid("unit_len must be positive"));
    }
    if values.is_empty() {
        return Err(invalid("at least one unit is required"));
    }
    Ok((0..values.len() * unit_len)
        .map(|i| field_at_1d(values, unit_len, model, i as f64 + 0.5))
        .collect())
}

pub fn intensity_profile_1d(values: &[Complex64], unit_len: usize, model: &PsfModel) -> Result<Vec<f64>> {
    Ok(field_profile_1d(values, unit_len, model)?
        .into_iter()
        .map(|f| f.norm_sqr())
        .collect())
}

/// Unit-amplitude values `e^{i phi}` for a list of phases.
pub fn unit_phasors(phases: &[f64]) -> Vec<Complex64> {
    phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
}

/// Closed-form second derivative of the intensity across the boundary of two
/// equal-amplitude units of half-length `a1`, evaluated on the boundary:
///
/// `4 [ (1 - cos(phi1 - phi2)) (p(a1) - p(0))^2 + (1 + cos(phi1 - phi2)) P(a1) p'(a1) ]`
pub fn gamma_second_derivative(model: &PsfModel, a1: f64, phi1: f64, phi2: f64) -> Result<f64> {
    if !(a1 > 0.0) {
        return Err(invalid(format!("a1 must be positive, got {a1}")));
    }
    let c = (phi1 - phi2).cos();
    let dp = model.eval(a1) - model.eval(0.0);
    Ok(4.0 * ((1.0 - c) * dp * dp + (1.0 + c) * model.primitive(a1) * model.derivative(a1)))
}

/// Range of unit indices whose span lies within `support` of `x`.
fn touching_units(x: f64, len: f64, support: f64, count: usize) -> (usize, usize) {
    let lo = ((x - support) / len).floor() - 1.0;
    let hi = ((x + support) / len).ceil() + 1.0;
    let first = lo.max(0.0) as usize;
    let last = (hi.max(0.0) as usize).min(count);
    (first.min(last), last)
}

/// Sparse per-pixel weights `(unit index, P(x - left) - P(x - right))` along one axis.
fn axis_weights(pixels: usize, units: usize, unit_len: usize, model: &PsfModel) -> Vec<Vec<(usize, f64)>> {
    let len = unit_len as f64;
    (0..pixels)
        .map(|i| {
            let x = i as f64 + 0.5;
            let (first, last) = touching_units(x, len, model.support(), units);
            (first..last)
                .map(|k| (k, model.window(x, k as f64 * len, (k + 1) as f64 * len)))
                .filter(|&(_, w)| w != 0.0)
                .collect()
        })
        .collect()
}

/// Noiseless or noisy intensity image of `object * pattern`.
pub fn simulate_measurement_2d(
    object: &ComplexField,
    pattern: &ComplexField,
    model: &PsfModel,
    cfg: &SimConfig,
    seed: u64,
) -> Result<IntensityImage> {
    cfg.validate()?;
    if object.dim() != pattern.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", object.dim()),
            actual: format!("{:?}", pattern.dim()),
        });
    }
    let (rows, cols) = object.dim();
    if rows == 0 || cols == 0 {
        return Err(invalid("field must contain at least one unit"));
    }
    if object.iter().chain(pattern.iter()).any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(invalid("field contains non-finite values"));
    }
    let ppu = cfg.pixels_per_unit;
    if model.radius() >= ppu as f64 {
        log::warn!(
            "PSF radius {} is not below the unit size {}; fringes may be indistinguishable",
            model.radius(),
            ppu
        );
    }
    let height = rows * ppu;
    let width = cols * ppu;
    if 2 * cfg.crop_rows >= height {
        return Err(invalid(format!(
            "cropping {} rows from each side leaves no image of height {}",
            cfg.crop_rows, height
        )));
    }

    let combined: Array2<Complex64> = object * pattern;
    let model = if model.step() > cfg.quadrature_step {
        PsfModel::with_step(model.kind(), model.radius(), cfg.quadrature_step)?
    } else {
        model.clone()
    };
    let wy = axis_weights(height, rows, ppu, &model);
    let wx = axis_weights(width, cols, ppu, &model);

    let out_rows = height - 2 * cfg.crop_rows;
    let mut data = Array2::<f64>::zeros((out_rows, width));
    for (oi, y) in (cfg.crop_rows..height - cfg.crop_rows).enumerate() {
        // Collapse the row weights first: g[b] = sum_a Y[y, a] * C[a, b].
        let mut g = vec![Complex64::new(0.0, 0.0); cols];
        for &(a, w) in &wy[y] {
            for (b, gb) in g.iter_mut().enumerate() {
                *gb += combined[[a, b]] * w;
            }
        }
        for (x, weights) in wx.iter().enumerate() {
            let f: Complex64 = weights.iter().map(|&(b, w)| g[b] * w).sum();
            data[[oi, x]] = f.norm_sqr();
        }
    }

    if cfg.noise_sigma > 0.0 {
        let peak = data.iter().copied().fold(0.0, f64::max);
        let normal = Normal::new(0.0, cfg.noise_sigma * peak)
            .map_err(|e| invalid(format!("noise distribution: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in data.iter_mut() {
            *v = (*v + normal.sample(&mut rng)).max(0.0);
        }
    }

    Ok(IntensityImage {
        data,
        pixels_per_unit: ppu,
        crop_rows: cfg.crop_rows,
    })
}
