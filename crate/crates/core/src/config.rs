//! Run configuration and its line-based `key = value` file format.
//!
//! ```text
//! # 16x16 units, 32 px each
//! rows = 16
//! cols = 16
//! psf_kind = gaussian
//! origins = 0,0;15,15
//! ```
//!
//! Keys left out keep their defaults. Parameters whose default depends on the
//! unit size (`psf_radius`, `highpass_sigma`, `crop_rows`) follow
//! `pixels_per_unit` unless set explicitly.

use std::path::{Path, PathBuf};

use crate::error::{invalid, Result};
use crate::forward_model::{default_crop_rows, PsfKind, PsfModel, SimConfig, DEFAULT_QUADRATURE_STEP};
use crate::fringe_detect::{DetectConfig, UnitGrid};
use crate::Unit;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub rows: usize,
    pub cols: usize,
    pub pixels_per_unit: usize,
    pub psf_kind: PsfKind,
    psf_radius: Option<f64>,
    pub m: usize,
    pub noise_sigma: f64,
    highpass_sigma: Option<f64>,
    pub edge_threshold_frac: f64,
    pub band_halfwidth: usize,
    pub fringe_ratio_alpha: f64,
    crop_rows: Option<usize>,
    pub quadrature_step: f64,
    origins: Option<Vec<Unit>>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let detect = DetectConfig::for_unit(32);
        Self {
            rows: 16,
            cols: 16,
            pixels_per_unit: 32,
            psf_kind: PsfKind::Gaussian,
            psf_radius: None,
            m: 4,
            noise_sigma: 0.0,
            highpass_sigma: None,
            edge_threshold_frac: detect.edge_threshold_frac,
            band_halfwidth: detect.band_halfwidth,
            fringe_ratio_alpha: detect.fringe_ratio_alpha,
            crop_rows: None,
            quadrature_step: DEFAULT_QUADRATURE_STEP,
            origins: None,
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Every key accepted by [`RunConfig::set`].
pub const KEYS: [&str; 16] = [
    "rows",
    "cols",
    "pixels_per_unit",
    "psf_kind",
    "psf_radius",
    "m",
    "noise_sigma",
    "highpass_sigma",
    "edge_threshold_frac",
    "band_halfwidth",
    "fringe_ratio_alpha",
    "crop_rows",
    "quadrature_step",
    "origins",
    "seed",
    "output_dir",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| invalid(format!("cannot parse `{value}` for key `{key}`")))
}

/// `r,c;r,c;...`
pub fn parse_origins(value: &str) -> Result<Vec<Unit>> {
    value
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (r, c) = pair
                .split_once(',')
                .ok_or_else(|| invalid(format!("origin `{pair}` is not `row,col`")))?;
            Ok((num("origins", r.trim())?, num("origins", c.trim())?))
        })
        .collect()
}

fn format_origins(origins: &[Unit]) -> String {
    origins.iter().map(|(r, c)| format!("{r},{c}")).collect::<Vec<_>>().join(";")
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.merge_str(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {}: expected `key = value`, found `{line}`", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| invalid(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "rows" => self.rows = num(key, value)?,
            "cols" => self.cols = num(key, value)?,
            "pixels_per_unit" => self.pixels_per_unit = num(key, value)?,
            "psf_kind" => self.psf_kind = value.parse()?,
            "psf_radius" => self.psf_radius = Some(num(key, value)?),
            "m" => self.m = num(key, value)?,
            "noise_sigma" => self.noise_sigma = num(key, value)?,
            "highpass_sigma" => self.highpass_sigma = Some(num(key, value)?),
            "edge_threshold_frac" => self.edge_threshold_frac = num(key, value)?,
            "band_halfwidth" => self.band_halfwidth = num(key, value)?,
            "fringe_ratio_alpha" => self.fringe_ratio_alpha = num(key, value)?,
            "crop_rows" => self.crop_rows = Some(num(key, value)?),
            "quadrature_step" => self.quadrature_step = num(key, value)?,
            "origins" => self.origins = Some(parse_origins(value)?),
            "seed" => self.seed = num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            other => return Err(invalid(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn psf_radius(&self) -> f64 {
        self.psf_radius.unwrap_or(self.pixels_per_unit as f64 / 4.0)
    }

    pub fn crop_rows(&self) -> usize {
        self.crop_rows.unwrap_or_else(|| default_crop_rows(self.pixels_per_unit))
    }

    /// Explicit origins, or the two opposite corners of the grid.
    pub fn origins(&self) -> Vec<Unit> {
        self.origins.clone().unwrap_or_else(|| {
            let far = (self.rows.saturating_sub(1), self.cols.saturating_sub(1));
            if far == (0, 0) {
                vec![(0, 0)]
            } else {
                vec![(0, 0), far]
            }
        })
    }

    pub fn detect(&self) -> DetectConfig {
        DetectConfig {
            highpass_sigma: self.highpass_sigma.unwrap_or(self.pixels_per_unit as f64 / 4.0),
            edge_threshold_frac: self.edge_threshold_frac,
            band_halfwidth: self.band_halfwidth,
            fringe_ratio_alpha: self.fringe_ratio_alpha,
        }
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            pixels_per_unit: self.pixels_per_unit,
            noise_sigma: self.noise_sigma,
            crop_rows: self.crop_rows(),
            quadrature_step: self.quadrature_step,
        }
    }

    pub fn grid(&self) -> UnitGrid {
        UnitGrid {
            rows: self.rows,
            cols: self.cols,
            pixels_per_unit: self.pixels_per_unit,
            crop_rows: self.crop_rows(),
        }
    }

    pub fn psf(&self) -> Result<PsfModel> {
        PsfModel::with_step(self.psf_kind, self.psf_radius(), self.quadrature_step)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(invalid("grid must have at least one unit"));
        }
        if self.m < 2 {
            return Err(invalid(format!("m must be at least 2, got {}", self.m)));
        }
        if 2 * self.crop_rows() >= self.rows * self.pixels_per_unit {
            return Err(invalid("crop_rows removes the whole image"));
        }
        self.sim().validate()?;
        self.detect().validate(self.pixels_per_unit)?;
        self.psf()?;
        let origins = self.origins();
        if origins.is_empty() {
            return Err(invalid("at least one origin is required"));
        }
        if let Some(o) = origins.iter().find(|o| o.0 >= self.rows || o.1 >= self.cols) {
            return Err(invalid(format!("origin {o:?} lies outside the {}x{} grid", self.rows, self.cols)));
        }
        Ok(())
    }

    /// Resolved `(key, value)` pairs, in [`KEYS`] order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        KEYS.iter()
            .map(|&k| {
                let v = match k {
                    "rows" => self.rows.to_string(),
                    "cols" => self.cols.to_string(),
                    "pixels_per_unit" => self.pixels_per_unit.to_string(),
                    "psf_kind" => self.psf_kind.to_string(),
                    "psf_radius" => self.psf_radius().to_string(),
                    "m" => self.m.to_string(),
                    "noise_sigma" => self.noise_sigma.to_string(),
                    "highpass_sigma" => self.detect().highpass_sigma.to_string(),
                    "edge_threshold_frac" => self.edge_threshold_frac.to_string(),
                    "band_halfwidth" => self.band_halfwidth.to_string(),
                    "fringe_ratio_alpha" => self.fringe_ratio_alpha.to_string(),
                    "crop_rows" => self.crop_rows().to_string(),
                    "quadrature_step" => self.quadrature_step.to_string(),
                    "origins" => format_origins(&self.origins()),
                    "seed" => self.seed.to_string(),
                    "output_dir" => self.output_dir.display().to_string(),
                    _ => unreachable!("every key is listed"),
                };
                (k, v)
            })
            .collect()
    }
}
