use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use darkfringe::boundary_logic::{mark_invalid_and_ratios, InvalidBoundaryMaps};
use darkfringe::config::RunConfig;
use darkfringe::formats;
use darkfringe::forward_model::{
    eq3_phase_vector, fringe_minima, fringe_radius_sweep, simulate_measurement_2d, unit_phasors, PsfKind,
    PsfModel, SweepConfig,
};
use darkfringe::fringe_detect::{recognize_with_diagnostics, UnitGrid};
use darkfringe::path_search::{blocking_montecarlo, loglog_slope, plan_with_retry};
use darkfringe::patterns::{expand_units, make_patterns, reference_library};
use darkfringe::pipeline::{random_quantized_object, run_pipeline, ArtifactWriter};
use darkfringe::reconstruct::{compose_and_score, reconstruct, PhaseGrid};
use darkfringe::{derive_seed, ComplexField};

#[derive(Parser)]
#[command(name = "darkfringe", version, about = "Phase retrieval by dark-fringe recognition")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Configuration sources; flags win over the file.
#[derive(Args)]
struct Overrides {
    /// Line-based `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `key=value` override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true)]
    rows: Option<String>,
    #[arg(long, global = true)]
    cols: Option<String>,
    #[arg(long = "ppu", global = true)]
    pixels_per_unit: Option<String>,
    #[arg(long = "psf", global = true)]
    psf_kind: Option<String>,
    #[arg(long, global = true)]
    psf_radius: Option<String>,
    #[arg(short, global = true)]
    m: Option<String>,
    #[arg(long = "noise", global = true)]
    noise_sigma: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Origins as `row,col;row,col`.
    #[arg(long, global = true)]
    origins: Option<String>,
    /// Output directory.
    #[arg(long = "out", global = true)]
    output_dir: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the m measurements of an object (random unless `--object`).
    Simulate {
        #[arg(long)]
        object: Option<PathBuf>,
    },
    /// Export 8-bit patterns and the reference library.
    Patterns,
    /// Recognize fringes in measured images, given in measurement order.
    Detect {
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Apply the consistency rule to fringe maps, given in measurement order.
    MarkInvalid {
        #[arg(required = true)]
        maps: Vec<PathBuf>,
        /// Reference library CSV; derived from `m` when absent.
        #[arg(long)]
        library: Option<PathBuf>,
    },
    /// Plan paths over invalid-boundary matrices.
    Paths {
        #[arg(long)]
        matrix_a: PathBuf,
        #[arg(long)]
        matrix_b: PathBuf,
    },
    /// Accumulate phases and estimate amplitudes.
    Reconstruct {
        #[arg(long)]
        matrix_a: PathBuf,
        #[arg(long)]
        matrix_b: PathBuf,
        #[arg(long)]
        ratios: PathBuf,
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// Ground-truth CF32 to score against.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// End-to-end run with every artifact and a manifest.
    Pipeline,
    /// PSF sweeps: fringe minima of the eight-segment vector, or the
    /// symmetry-axis intensity against radius.
    PsfSweep {
        #[arg(long, value_enum, default_value = "minima")]
        mode: SweepMode,
        /// PSF kinds; all three when absent.
        #[arg(long = "kind", value_delimiter = ',')]
        kinds: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "2,18,34")]
        radii: Vec<f64>,
        /// Phase steps in units of pi (valley mode).
        #[arg(long, value_delimiter = ',', default_value = "0.1")]
        delta_phis: Vec<f64>,
        /// Samples per unit (valley mode).
        #[arg(long, default_value_t = 512)]
        unit_len: usize,
        #[arg(long, default_value_t = 8.0)]
        detector_width: f64,
    },
    /// Blocking rates of single-pass and retry planning.
    MontecarloBlocking {
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Score a reconstruction against ground truth.
    Metrics {
        #[arg(long)]
        reconstruction: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SweepMode {
    Minima,
    Valley,
}

impl Overrides {
    fn resolve(&self) -> darkfringe::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("rows", &self.rows),
            ("cols", &self.cols),
            ("pixels_per_unit", &self.pixels_per_unit),
            ("psf_kind", &self.psf_kind),
            ("psf_radius", &self.psf_radius),
            ("m", &self.m),
            ("noise_sigma", &self.noise_sigma),
            ("seed", &self.seed),
            ("origins", &self.origins),
            ("output_dir", &self.output_dir),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| darkfringe::Error::InvalidParameter(format!("`--set {kv}` is not KEY=VALUE")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match cli.overrides.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn grid_of(img: &darkfringe::forward_model::IntensityImage) -> UnitGrid {
    let ppu = img.pixels_per_unit.max(1);
    UnitGrid {
        rows: (img.height() + 2 * img.crop_rows) / ppu,
        cols: img.width() / ppu,
        pixels_per_unit: ppu,
        crop_rows: img.crop_rows,
    }
}

fn read_images(paths: &[PathBuf]) -> anyhow::Result<Vec<darkfringe::forward_model::IntensityImage>> {
    paths
        .iter()
        .map(|p| formats::read_pgm16(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

fn read_invalid(a: &Path, b: &Path) -> anyhow::Result<InvalidBoundaryMaps> {
    let inv = InvalidBoundaryMaps {
        matrix_a: formats::read_bool_matrix(a).with_context(|| format!("reading {}", a.display()))?,
        matrix_b: formats::read_bool_matrix(b).with_context(|| format!("reading {}", b.display()))?,
    };
    let (rows, cols) = inv.units();
    if inv.matrix_b.dim() != (rows.saturating_sub(1), cols) {
        bail!("matrix shapes {:?} and {:?} do not describe one grid", inv.matrix_a.dim(), inv.matrix_b.dim());
    }
    Ok(inv)
}

fn run(command: &Command, cfg: &RunConfig) -> anyhow::Result<()> {
    let out = &cfg.output_dir;
    match command {
        Command::Simulate { object } => {
            let object: ComplexField = match object {
                Some(p) => formats::read_cf32(p)?,
                None => random_quantized_object(cfg.rows, cfg.cols, cfg.m, derive_seed(cfg.seed, &[0])),
            };
            let set = make_patterns(cfg.m, object.nrows(), object.ncols())?;
            let model = cfg.psf()?;
            let mut w = ArtifactWriter::new(out)?;
            w.write("object.cf32", |p| formats::write_cf32(p, &object))?;
            for (j, pat) in set.patterns.iter().enumerate() {
                let img = simulate_measurement_2d(&object, pat, &model, &cfg.sim(), derive_seed(cfg.seed, &[1, j as u64]))?;
                w.write(&format!("image_{}.pgm", j + 1), |p| formats::write_pgm16(p, &img))?;
            }
        }
        Command::Patterns => {
            let set = make_patterns(cfg.m, cfg.rows, cfg.cols)?;
            let mut w = ArtifactWriter::new(out)?;
            for (j, levels) in set.eight_bit.iter().enumerate() {
                w.write(&format!("pattern_{}.pgm", j + 1), |p| {
                    formats::write_pgm8(p, &expand_units(levels, cfg.pixels_per_unit))
                })?;
            }
            w.write("reference_library.csv", |p| formats::write_library_csv(p, &reference_library(&set)))?;
        }
        Command::Detect { images } => {
            let images = read_images(images)?;
            let mut w = ArtifactWriter::new(out)?;
            let detect = cfg.detect();
            for (j, img) in images.iter().enumerate() {
                let n = j + 1;
                let rec = recognize_with_diagnostics(img, grid_of(img), &detect, n)?;
                for z in &rec.zero_flanks {
                    eprintln!("warning: measurement {n}: zero flank at {} ({}, {})", z.kind.name(), z.row, z.col);
                }
                let st = &rec.stages;
                w.write(&format!("fringe_maps_{n}.csv"), |p| formats::write_fringe_maps(p, &rec.maps))?;
                w.write(&format!("inverted_{n}.pgm"), |p| formats::write_pgm8(p, &formats::stretch_to_u8(&st.inverted)))?;
                w.write(&format!("highpass_{n}.pgm"), |p| formats::write_pgm8(p, &formats::stretch_to_u8(&st.highpass)))?;
                w.write(&format!("edges_{n}.pgm"), |p| formats::write_pgm8(p, &formats::stretch_to_u8(&st.edges)))?;
            }
        }
        Command::MarkInvalid { maps, library } => {
            let maps = maps
                .iter()
                .map(|p| formats::read_fringe_maps(p).with_context(|| format!("reading {}", p.display())))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let lib = match library {
                Some(p) => formats::read_library_csv(p)?,
                None => {
                    let (rows, cols) = maps[0].units();
                    reference_library(&make_patterns(maps.len(), rows, cols)?)
                }
            };
            let (inv, ratios) = mark_invalid_and_ratios(&maps, &lib)?;
            let mut w = ArtifactWriter::new(out)?;
            w.write("matrix_a.csv", |p| formats::write_bool_matrix(p, &inv.matrix_a))?;
            w.write("matrix_b.csv", |p| formats::write_bool_matrix(p, &inv.matrix_b))?;
            w.write("edge_ratios.csv", |p| formats::write_edge_ratios(p, &ratios))?;
        }
        Command::Paths { matrix_a, matrix_b } => {
            let inv = read_invalid(matrix_a, matrix_b)?;
            let plan = plan_with_retry(&inv, &origins_for(cfg, inv.units())?)?;
            ArtifactWriter::new(out)?.write("paths.csv", |p| formats::write_path_plan(p, &plan))?;
        }
        Command::Reconstruct { matrix_a, matrix_b, ratios, images, truth } => {
            let inv = read_invalid(matrix_a, matrix_b)?;
            let (rows, cols) = inv.units();
            let ratios = formats::read_edge_ratios(ratios, rows, cols)?;
            let images = read_images(images)?;
            let grid = grid_of(&images[0]);
            if (grid.rows, grid.cols) != (rows, cols) {
                bail!("images describe a {}x{} grid, matrices a {rows}x{cols} grid", grid.rows, grid.cols);
            }
            let rec = reconstruct(&inv, &ratios, &origins_for(cfg, (rows, cols))?, &images, grid, cfg.band_halfwidth)?;
            let mut w = ArtifactWriter::new(out)?;
            w.write("reconstruction.cf32", |p| formats::write_cf32(p, &rec.complex_image))?;
            if let Some(t) = truth {
                let metrics = compose_and_score(&rec.phase, &rec.amplitude, &formats::read_cf32(t)?)?;
                w.write("metrics.csv", |p| formats::write_metrics_csv(p, &metrics))?;
            }
        }
        Command::Pipeline => {
            let (_, manifest) = run_pipeline(cfg)?;
            println!(
                "phase_rmse={} complex_l2={} unknown_frac={} ({} files in {})",
                manifest.phase_rmse,
                manifest.complex_l2,
                manifest.unknown_frac,
                manifest.files.len() + 1,
                out.display()
            );
        }
        Command::PsfSweep { mode, kinds, radii, delta_phis, unit_len, detector_width } => {
            let kinds: Vec<PsfKind> = if kinds.is_empty() {
                PsfKind::ALL.to_vec()
            } else {
                kinds.iter().map(|k| k.parse()).collect::<darkfringe::Result<_>>()?
            };
            let mut w = ArtifactWriter::new(out)?;
            for kind in kinds {
                let rows: Vec<(f64, f64, f64)> = match mode {
                    SweepMode::Minima => {
                        let (phases, len) = eq3_phase_vector();
                        let values = unit_phasors(&phases);
                        let mut rows = Vec::new();
                        for &r in radii {
                            let model = PsfModel::with_step(kind, r, cfg.quadrature_step)?;
                            rows.extend(
                                fringe_minima(&values, len, &model)?
                                    .into_iter()
                                    .map(|f| (f.delta_phi, r, f.relative_intensity)),
                            );
                        }
                        rows
                    }
                    SweepMode::Valley => {
                        let phis: Vec<f64> = delta_phis.iter().map(|d| d * std::f64::consts::PI).collect();
                        let sweep_cfg = SweepConfig { detector_width: *detector_width, quadrature_step: cfg.quadrature_step };
                        fringe_radius_sweep(&phis, radii, *unit_len, kind, &sweep_cfg)?
                            .into_iter()
                            .map(|row| (row.delta_phi, row.radius, row.relative_intensity))
                            .collect()
                    }
                };
                let name = match mode {
                    SweepMode::Minima => format!("fringe_minima_{kind}.csv"),
                    SweepMode::Valley => format!("radius_sweep_{kind}.csv"),
                };
                w.write(&name, |p| formats::write_sweep_csv(p, &rows))?;
            }
        }
        Command::MontecarloBlocking { sigmas, trials } => {
            let stats = blocking_montecarlo((cfg.rows, cfg.cols), sigmas, *trials, cfg.seed)?;
            ArtifactWriter::new(out)?.write("blocking.csv", |p| formats::write_blocking_csv(p, &stats))?;
            let pts: Vec<(f64, f64)> = stats.iter().map(|s| (s.sigma, s.single_pass_block_rate)).collect();
            if let Some(slope) = loglog_slope(&pts) {
                println!("log-log slope of single-pass blocking: {slope:.3}");
            }
        }
        Command::Metrics { reconstruction, truth } => {
            let recon = formats::read_cf32(reconstruction)?;
            let truth = formats::read_cf32(truth)?;
            let phase: PhaseGrid = recon.mapv(|z| (!z.is_nan()).then(|| z.arg().rem_euclid(std::f64::consts::TAU)));
            let amplitude: Array2<f64> = recon.mapv(|z| if z.is_nan() { 0.0 } else { z.norm() });
            let metrics = compose_and_score(&phase, &amplitude, &truth)?;
            ArtifactWriter::new(out)?.write("metrics.csv", |p| formats::write_metrics_csv(p, &metrics))?;
            println!("phase_rmse={} complex_l2={} unknown_frac={}", metrics.phase_rmse, metrics.complex_l2, metrics.unknown_frac);
        }
    }
    Ok(())
}

/// Configured origins when they fit the grid, else the corners of `dims`.
fn origins_for(cfg: &RunConfig, dims: (usize, usize)) -> anyhow::Result<Vec<(usize, usize)>> {
    let origins = cfg.origins();
    if origins.iter().all(|o| o.0 < dims.0 && o.1 < dims.1) {
        return Ok(origins);
    }
    let mut sized = cfg.clone();
    sized.rows = dims.0;
    sized.cols = dims.1;
    Ok(sized.origins())
}
