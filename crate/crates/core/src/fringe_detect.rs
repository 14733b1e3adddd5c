//! Dark-fringe recognition on measured intensity images.
//!
//! Preprocessing follows the usual chain: invert, subtract a Gaussian blur
//! (high-pass), take the central-difference gradient magnitude and threshold
//! it. A boundary is then declared to carry a fringe when both
//!
//! * the raw band straddling the boundary is darker than `alpha` times the
//!   mean of two flanking bands at the neighbouring unit centres, and
//! * the inverted high-pass image is brighter in that band than in the flanks.

use ndarray::{Array2, Axis};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::forward_model::IntensityImage;
use crate::ComplexField;

/// Fringe presence per boundary for one measurement.
///
/// `row_map[[r, c]]` is the boundary between units `(r, c)` and `(r, c + 1)`;
/// `col_map[[r, c]]` is the boundary between `(r, c)` and `(r + 1, c)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FringeMaps {
    /// 1-based measurement index.
    pub index: usize,
    pub row_map: Array2<bool>,
    pub col_map: Array2<bool>,
}

impl FringeMaps {
    pub fn new(index: usize, rows: usize, cols: usize) -> Self {
        Self {
            index,
            row_map: Array2::from_elem((rows, cols.saturating_sub(1)), false),
            col_map: Array2::from_elem((rows.saturating_sub(1), cols), false),
        }
    }

    /// Unit grid shape `(s1, s2)`.
    pub fn units(&self) -> (usize, usize) {
        (self.row_map.nrows(), self.col_map.ncols())
    }

    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = self.units();
        if self.row_map.dim() != (rows, cols.saturating_sub(1)) || self.col_map.dim() != (rows.saturating_sub(1), cols) {
            return Err(Error::DimensionMismatch {
                expected: format!("row map {rows}x{} and col map {}x{cols}", cols.saturating_sub(1), rows.saturating_sub(1)),
                actual: format!("{:?} and {:?}", self.row_map.dim(), self.col_map.dim()),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    /// Between horizontally adjacent units (a `row_map` / `matrix_a` entry).
    Horizontal,
    /// Between vertically adjacent units (a `col_map` / `matrix_b` entry).
    Vertical,
}

impl EdgeKind {
    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::Horizontal => "row",
            EdgeKind::Vertical => "col",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    pub highpass_sigma: f64,
    pub edge_threshold_frac: f64,
    pub band_halfwidth: usize,
    pub fringe_ratio_alpha: f64,
}

impl DetectConfig {
    pub fn for_unit(pixels_per_unit: usize) -> Self {
        Self {
            highpass_sigma: pixels_per_unit as f64 / 4.0,
            edge_threshold_frac: 0.2,
            band_halfwidth: 2,
            fringe_ratio_alpha: 0.6,
        }
    }

    pub fn validate(&self, pixels_per_unit: usize) -> Result<()> {
        if !(self.highpass_sigma > 0.0) {
            return Err(invalid("highpass_sigma must be positive"));
        }
        if !(self.edge_threshold_frac > 0.0 && self.edge_threshold_frac < 1.0) {
            return Err(invalid("edge_threshold_frac must lie in (0, 1)"));
        }
        if !(self.fringe_ratio_alpha > 0.0 && self.fringe_ratio_alpha < 1.0) {
            return Err(invalid("fringe_ratio_alpha must lie in (0, 1)"));
        }
        if self.band_halfwidth == 0 || 2 * self.band_halfwidth >= pixels_per_unit {
            return Err(invalid(format!(
                "band_halfwidth must be positive and below half the unit size ({pixels_per_unit})"
            )));
        }
        Ok(())
    }
}

/// Unit layout of a measured image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitGrid {
    pub rows: usize,
    pub cols: usize,
    pub pixels_per_unit: usize,
    pub crop_rows: usize,
}

impl UnitGrid {
    pub fn check(&self, img: &IntensityImage) -> Result<()> {
        let expected = (
            (self.rows * self.pixels_per_unit).saturating_sub(2 * self.crop_rows),
            self.cols * self.pixels_per_unit,
        );
        if img.data.dim() != expected || img.pixels_per_unit != self.pixels_per_unit {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} image at {} px/unit", expected.0, expected.1, self.pixels_per_unit),
                actual: format!("{}x{} image at {} px/unit", img.height(), img.width(), img.pixels_per_unit),
            });
        }
        Ok(())
    }
}

/// Intermediate images of the preprocessing chain.
#[derive(Debug, Clone)]
pub struct Stages {
    pub inverted: Array2<f64>,
    pub highpass: Array2<f64>,
    pub gradient: Array2<f64>,
    /// Gradient magnitude where it reaches the threshold, zero elsewhere.
    pub edges: Array2<f64>,
}

pub fn gaussian_blur(data: &Array2<f64>, sigma: f64) -> Array2<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= norm);

    let pass = |src: &Array2<f64>, axis: Axis| -> Array2<f64> {
        let mut out = Array2::zeros(src.dim());
        for (lane_in, mut lane_out) in src.lanes(axis).into_iter().zip(out.lanes_mut(axis)) {
            let n = lane_in.len() as isize;
            for i in 0..n {
                let mut acc = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    let j = (i + k as isize - radius).clamp(0, n - 1);
                    acc += w * lane_in[j as usize];
                }
                lane_out[i as usize] = acc;
            }
        }
        out
    };
    pass(&pass(data, Axis(1)), Axis(0))
}

/// Central-difference gradient magnitude (one-sided at the borders).
pub fn gradient_magnitude(data: &Array2<f64>) -> Array2<f64> {
    let (h, w) = data.dim();
    Array2::from_shape_fn((h, w), |(y, x)| {
        let diff = |lo: f64, hi: f64, span: usize| if span == 0 { 0.0 } else { (hi - lo) / span as f64 };
        let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
        let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
        let gx = diff(data[[y, x0]], data[[y, x1]], x1 - x0);
        let gy = diff(data[[y0, x]], data[[y1, x]], y1 - y0);
        gx.hypot(gy)
    })
}

pub fn preprocess(img: &IntensityImage, cfg: &DetectConfig) -> Stages {
    let peak = img.max();
    let inverted = img.data.mapv(|v| peak - v);
    let blurred = gaussian_blur(&inverted, cfg.highpass_sigma);
    let highpass = &inverted - &blurred;
    let gradient = gradient_magnitude(&highpass);
    let gmax = gradient.iter().copied().fold(0.0, f64::max);
    let threshold = cfg.edge_threshold_frac * gmax;
    let edges = if gmax > 0.0 {
        gradient.mapv(|g| if g >= threshold { g } else { 0.0 })
    } else {
        Array2::zeros(gradient.dim())
    };
    Stages {
        inverted,
        highpass,
        gradient,
        edges,
    }
}

/// Boundary whose flanking bands were entirely dark; it is reported present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroFlank {
    pub kind: EdgeKind,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone)]
pub struct Recognition {
    pub maps: FringeMaps,
    pub zero_flanks: Vec<ZeroFlank>,
    pub stages: Stages,
}

/// Rectangle in image coordinates, half-open on both axes.
#[derive(Clone, Copy)]
struct Rect {
    y0: usize,
    y1: usize,
    x0: usize,
    x1: usize,
}

fn mean(data: &Array2<f64>, r: Rect) -> Option<f64> {
    if r.y0 >= r.y1 || r.x0 >= r.x1 {
        return None;
    }
    let mut sum = 0.0;
    for y in r.y0..r.y1 {
        for x in r.x0..r.x1 {
            sum += data[[y, x]];
        }
    }
    Some(sum / ((r.y1 - r.y0) * (r.x1 - r.x0)) as f64)
}

pub fn recognize_fringes(img: &IntensityImage, grid: UnitGrid, cfg: &DetectConfig, index: usize) -> Result<FringeMaps> {
    Ok(recognize_with_diagnostics(img, grid, cfg, index)?.maps)
}

pub fn recognize_with_diagnostics(
    img: &IntensityImage,
    grid: UnitGrid,
    cfg: &DetectConfig,
    index: usize,
) -> Result<Recognition> {
    grid.check(img)?;
    cfg.validate(grid.pixels_per_unit)?;
    let stages = preprocess(img, cfg);

    let ppu = grid.pixels_per_unit;
    let hw = cfg.band_halfwidth;
    let margin = ppu / 4;
    let crop = grid.crop_rows;
    let height = img.height();
    // Physical row span -> surviving image rows.
    let rows_of = |p0: usize, p1: usize| -> (usize, usize) {
        let y0 = p0.saturating_sub(crop).min(height);
        let y1 = p1.saturating_sub(crop).min(height);
        (y0, y1)
    };

    let mut maps = FringeMaps::new(index, grid.rows, grid.cols);
    let mut zero_flanks = Vec::new();

    let decide = |band: Rect, flank_a: Rect, flank_b: Rect| -> (bool, bool) {
        let raw_band = mean(&img.data, band);
        let flanks = [mean(&img.data, flank_a), mean(&img.data, flank_b)];
        let flank_vals: Vec<f64> = flanks.iter().flatten().copied().collect();
        let (Some(raw_band), false) = (raw_band, flank_vals.is_empty()) else {
            return (true, true);
        };
        let flank = flank_vals.iter().sum::<f64>() / flank_vals.len() as f64;
        if flank <= 0.0 {
            return (true, true);
        }
        let dark = raw_band < cfg.fringe_ratio_alpha * flank;
        // The inverted high-pass image must peak in the band as well.
        let hp = &stages.highpass;
        let hp_flanks: Vec<f64> = [mean(hp, flank_a), mean(hp, flank_b)].into_iter().flatten().collect();
        let hp_band = mean(hp, band).unwrap_or(0.0);
        let hp_flank = hp_flanks.iter().sum::<f64>() / hp_flanks.len().max(1) as f64;
        (dark && hp_band > hp_flank, false)
    };

    for r in 0..grid.rows {
        let (y0, y1) = rows_of(r * ppu + margin, (r + 1) * ppu - margin);
        for c in 0..grid.cols.saturating_sub(1) {
            let line = (c + 1) * ppu;
            let band = Rect { y0, y1, x0: line - hw, x1: line + hw };
            let left = line - ppu / 2;
            let right = line + ppu / 2;
            let fa = Rect { y0, y1, x0: left - hw, x1: left + hw };
            let fb = Rect { y0, y1, x0: right - hw, x1: right + hw };
            let (present, zero) = decide(band, fa, fb);
            maps.row_map[[r, c]] = present;
            if zero {
                zero_flanks.push(ZeroFlank { kind: EdgeKind::Horizontal, row: r, col: c });
            }
        }
    }
    for r in 0..grid.rows.saturating_sub(1) {
        let line = (r + 1) * ppu;
        let band_rows = rows_of(line - hw, line + hw);
        let up = rows_of(line - ppu / 2 - hw, line - ppu / 2 + hw);
        let down = rows_of(line + ppu / 2 - hw, line + ppu / 2 + hw);
        for c in 0..grid.cols {
            let (x0, x1) = (c * ppu + margin, (c + 1) * ppu - margin);
            let band = Rect { y0: band_rows.0, y1: band_rows.1, x0, x1 };
            let fa = Rect { y0: up.0, y1: up.1, x0, x1 };
            let fb = Rect { y0: down.0, y1: down.1, x0, x1 };
            let (present, zero) = decide(band, fa, fb);
            maps.col_map[[r, c]] = present;
            if zero {
                zero_flanks.push(ZeroFlank { kind: EdgeKind::Vertical, row: r, col: c });
            }
        }
    }
    Ok(Recognition { maps, zero_flanks, stages })
}

/// Unit-modulus phase ratio `b / a` of two complex values (`1` if either vanishes).
pub fn phase_ratio(a: Complex64, b: Complex64) -> Complex64 {
    let z = b * a.conj();
    let n = z.norm();
    if n == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / n
    }
}

/// Exact presence maps for `object` under a ramp of ratio `q`: a fringe is
/// present wherever the combined adjacent ratio differs from 1.
pub fn analytic_maps(object: &ComplexField, q: Complex64, index: usize) -> FringeMaps {
    let (rows, cols) = object.dim();
    let mut maps = FringeMaps::new(index, rows, cols);
    let differs = |rho: Complex64| (rho * q - 1.0).norm() > 1e-9;
    for r in 0..rows {
        for c in 0..cols.saturating_sub(1) {
            maps.row_map[[r, c]] = differs(phase_ratio(object[[r, c]], object[[r, c + 1]]));
        }
    }
    for r in 0..rows.saturating_sub(1) {
        for c in 0..cols {
            maps.col_map[[r, c]] = differs(phase_ratio(object[[r, c]], object[[r + 1, c]]));
        }
    }
    maps
}

/// Per-boundary confusion counts of detected against true presence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl Confusion {
    pub fn add(&mut self, detected: &FringeMaps, truth: &FringeMaps) {
        let pairs = detected
            .row_map
            .iter()
            .zip(truth.row_map.iter())
            .chain(detected.col_map.iter().zip(truth.col_map.iter()));
        for (&d, &t) in pairs {
            match (d, t) {
                (true, true) => self.true_positive += 1,
                (true, false) => self.false_positive += 1,
                (false, true) => self.false_negative += 1,
                (false, false) => self.true_negative += 1,
            }
        }
    }

    /// F1 score; 1 when there is nothing to find and nothing was found.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.true_positive + self.false_positive + self.false_negative;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.true_positive as f64 / denom as f64
        }
    }
}
