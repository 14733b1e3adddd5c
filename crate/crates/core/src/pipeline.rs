//! End-to-end runner: simulate, detect, mark invalid boundaries, plan,
//! reconstruct and score, with every intermediate written to disk.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::boundary_logic::{mark_invalid_and_ratios, EdgeRatios, InvalidBoundaryMaps};
use crate::config::RunConfig;
use crate::error::Error;
use crate::formats;
use crate::forward_model::{simulate_measurement_2d, IntensityImage};
use crate::fringe_detect::{recognize_with_diagnostics, FringeMaps, Stages, ZeroFlank};
use crate::path_search::{plan_with_retry, PathPlan};
use crate::patterns::{expand_units, make_patterns, reference_library, PatternSet, ReferenceLibrary};
use crate::reconstruct::{compose_and_score, reconstruct, Metrics, Reconstruction};
use crate::{derive_seed, ComplexField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Patterns,
    Simulate,
    Detect,
    MarkInvalid,
    Paths,
    Reconstruct,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Patterns => "patterns",
            Stage::Simulate => "simulate",
            Stage::Detect => "detect",
            Stage::MarkInvalid => "mark-invalid",
            Stage::Paths => "paths",
            Stage::Reconstruct => "reconstruct",
            Stage::Write => "write",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Uniform phases from the `m`-level set `{2 pi k / m}` at unit amplitude.
pub fn random_quantized_object(rows: usize, cols: usize, m: usize, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = std::f64::consts::TAU / m as f64;
    Array2::from_shape_fn((rows, cols), |_| {
        let k = rng.random_range(0..m);
        if m == 4 {
            // Exact quarter turns.
            [Complex64::new(1.0, 0.0), Complex64::i(), Complex64::new(-1.0, 0.0), -Complex64::i()][k]
        } else {
            Complex64::from_polar(1.0, k as f64 * step)
        }
    })
}

/// In-memory results of every stage.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub object: ComplexField,
    pub patterns: PatternSet,
    pub library: ReferenceLibrary,
    pub images: Vec<IntensityImage>,
    pub stages: Vec<Stages>,
    pub maps: Vec<FringeMaps>,
    pub zero_flanks: Vec<ZeroFlank>,
    pub invalid: InvalidBoundaryMaps,
    pub ratios: EdgeRatios,
    pub plan: PathPlan,
    pub reconstruction: Reconstruction,
    pub metrics: Metrics,
}

/// Runs every stage of `cfg` on `object` without touching the disk.
pub fn run_on_object(cfg: &RunConfig, object: ComplexField) -> Result<PipelineRun, StageError> {
    cfg.validate().at(Stage::Config)?;
    if object.dim() != (cfg.rows, cfg.cols) {
        return Err(StageError {
            stage: Stage::Config,
            source: Error::DimensionMismatch {
                expected: format!("{}x{} object", cfg.rows, cfg.cols),
                actual: format!("{:?}", object.dim()),
            },
        });
    }
    let patterns = make_patterns(cfg.m, cfg.rows, cfg.cols).at(Stage::Patterns)?;
    let library = reference_library(&patterns);
    let model = cfg.psf().at(Stage::Simulate)?;
    let sim = cfg.sim();
    let images: Vec<IntensityImage> = patterns
        .patterns
        .iter()
        .enumerate()
        .map(|(j, p)| simulate_measurement_2d(&object, p, &model, &sim, derive_seed(cfg.seed, &[1, j as u64])))
        .collect::<crate::Result<_>>()
        .at(Stage::Simulate)?;

    let detect = cfg.detect();
    let mut stages = Vec::with_capacity(cfg.m);
    let mut maps = Vec::with_capacity(cfg.m);
    let mut zero_flanks = Vec::new();
    for (j, img) in images.iter().enumerate() {
        let rec = recognize_with_diagnostics(img, cfg.grid(), &detect, j + 1).at(Stage::Detect)?;
        stages.push(rec.stages);
        maps.push(rec.maps);
        zero_flanks.extend(rec.zero_flanks);
    }

    let (invalid, ratios) = mark_invalid_and_ratios(&maps, &library).at(Stage::MarkInvalid)?;
    let origins = cfg.origins();
    let plan = plan_with_retry(&invalid, &origins).at(Stage::Paths)?;
    let reconstruction = reconstruct(&invalid, &ratios, &origins, &images, cfg.grid(), detect.band_halfwidth)
        .at(Stage::Reconstruct)?;
    let metrics =
        compose_and_score(&reconstruction.phase, &reconstruction.amplitude, &object).at(Stage::Reconstruct)?;
    Ok(PipelineRun {
        object,
        patterns,
        library,
        images,
        stages,
        maps,
        zero_flanks,
        invalid,
        ratios,
        plan,
        reconstruction,
        metrics,
    })
}

/// Runs the pipeline on a random quantized object seeded from `cfg.seed`.
pub fn run_in_memory(cfg: &RunConfig) -> Result<PipelineRun, StageError> {
    let object = random_quantized_object(cfg.rows, cfg.cols, cfg.m, derive_seed(cfg.seed, &[0]));
    run_on_object(cfg, object)
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestFile {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config: serde_json::Map<String, serde_json::Value>,
    pub phase_rmse: f64,
    pub complex_l2: f64,
    pub unknown_frac: f64,
    pub invalid_boundaries: usize,
    pub unreachable_units: usize,
    pub zero_flank_boundaries: usize,
    pub files: Vec<ManifestFile>,
}

/// Collects checksums of the files written into one directory.
pub struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<ManifestFile>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> crate::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    /// Writes `name` through `write` and records its checksum.
    pub fn write(&mut self, name: &str, write: impl FnOnce(&Path) -> crate::Result<()>) -> crate::Result<()> {
        let path = self.dir.join(name);
        write(&path)?;
        let digest = Sha256::digest(fs::read(&path)?);
        self.files.push(ManifestFile { name: name.to_string(), sha256: hex::encode(digest) });
        Ok(())
    }

    pub fn into_files(self) -> Vec<ManifestFile> {
        self.files
    }
}

/// Writes every artifact of `run` plus `manifest.json` into `dir`.
pub fn write_artifacts(cfg: &RunConfig, run: &PipelineRun, dir: &Path) -> crate::Result<Manifest> {
    let mut w = ArtifactWriter::new(dir)?;
    let ppu = cfg.pixels_per_unit;
    w.write("object.cf32", |p| formats::write_cf32(p, &run.object))?;
    w.write("reference_library.csv", |p| formats::write_library_csv(p, &run.library))?;
    for j in 0..run.patterns.m() {
        let n = j + 1;
        w.write(&format!("pattern_{n}.pgm"), |p| {
            formats::write_pgm8(p, &expand_units(&run.patterns.eight_bit[j], ppu))
        })?;
        w.write(&format!("image_{n}.pgm"), |p| formats::write_pgm16(p, &run.images[j]))?;
        let st = &run.stages[j];
        w.write(&format!("inverted_{n}.pgm"), |p| formats::write_pgm8(p, &formats::stretch_to_u8(&st.inverted)))?;
        w.write(&format!("highpass_{n}.pgm"), |p| formats::write_pgm8(p, &formats::stretch_to_u8(&st.highpass)))?;
        w.write(&format!("edges_{n}.pgm"), |p| formats::write_pgm8(p, &formats::stretch_to_u8(&st.edges)))?;
        w.write(&format!("fringe_maps_{n}.csv"), |p| formats::write_fringe_maps(p, &run.maps[j]))?;
    }
    w.write("matrix_a.csv", |p| formats::write_bool_matrix(p, &run.invalid.matrix_a))?;
    w.write("matrix_b.csv", |p| formats::write_bool_matrix(p, &run.invalid.matrix_b))?;
    w.write("edge_ratios.csv", |p| formats::write_edge_ratios(p, &run.ratios))?;
    w.write("paths.csv", |p| formats::write_path_plan(p, &run.plan))?;
    w.write("reconstruction.cf32", |p| formats::write_cf32(p, &run.reconstruction.complex_image))?;
    w.write("metrics.csv", |p| formats::write_metrics_csv(p, &run.metrics))?;

    // The output location is left out so identical runs match across directories.
    let config = cfg
        .to_pairs()
        .into_iter()
        .filter(|(k, _)| *k != "output_dir")
        .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
        .collect();
    let manifest = Manifest {
        config,
        phase_rmse: run.metrics.phase_rmse,
        complex_l2: run.metrics.complex_l2,
        unknown_frac: run.metrics.unknown_frac,
        invalid_boundaries: run.invalid.invalid_count(),
        unreachable_units: run.plan.unreachable().len(),
        zero_flank_boundaries: run.zero_flanks.len(),
        files: w.into_files(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format {
        format: "manifest",
        detail: e.to_string(),
    })?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(manifest)
}

/// Full run into `cfg.output_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<(PipelineRun, Manifest), StageError> {
    let run = run_in_memory(cfg)?;
    let manifest = write_artifacts(cfg, &run, &cfg.output_dir).at(Stage::Write)?;
    Ok((run, manifest))
}
