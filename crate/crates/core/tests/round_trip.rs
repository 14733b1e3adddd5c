use std::f64::consts::PI;

use darkfringe::boundary_logic::mark_invalid_and_ratios;
use darkfringe::config::RunConfig;
use darkfringe::forward_model::{simulate_measurement_2d, IntensityImage, PsfKind, PsfModel, SimConfig};
use darkfringe::fringe_detect::{phase_ratio, recognize_fringes, DetectConfig, EdgeKind, UnitGrid};
use darkfringe::path_search::plan_paths;
use darkfringe::patterns::{make_patterns, reference_library};
use darkfringe::pipeline::{random_quantized_object, run_in_memory};
use darkfringe::reconstruct::{accumulate_phase, estimate_amplitude};
use darkfringe::{Complex64, ComplexField};
use ndarray::array;

fn wrapped(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

fn simulate_all(object: &ComplexField, m: usize, ppu: usize) -> (Vec<IntensityImage>, UnitGrid) {
    let set = make_patterns(m, object.nrows(), object.ncols()).unwrap();
    let model = PsfModel::new(PsfKind::Gaussian, ppu as f64 / 4.0).unwrap();
    let cfg = SimConfig::new(ppu);
    let images = set
        .patterns
        .iter()
        .map(|p| simulate_measurement_2d(object, p, &model, &cfg, 0).unwrap())
        .collect();
    let grid = UnitGrid { rows: object.nrows(), cols: object.ncols(), pixels_per_unit: ppu, crop_rows: cfg.crop_rows };
    (images, grid)
}

/// The library entry for each measurement is found by simulating every
/// quantized ratio and seeing where its fringe vanishes.
#[test]
fn library_agrees_with_simulated_disappearance() {
    let m = 4;
    let set = make_patterns(m, 1, 2).unwrap();
    let library = reference_library(&set);
    for k in 0..m {
        let rho = Complex64::from_polar(1.0, k as f64 * PI / 2.0);
        let object = array![[Complex64::new(1.0, 0.0), rho]];
        let (images, grid) = simulate_all(&object, m, 32);
        let absent: Vec<usize> = images
            .iter()
            .enumerate()
            .filter(|(j, img)| !recognize_fringes(img, grid, &DetectConfig::for_unit(32), j + 1).unwrap().row_map[[0, 0]])
            .map(|(j, _)| j)
            .collect();
        assert_eq!(absent.len(), 1, "ratio {rho}: fringe must vanish exactly once");
        assert!((library.ratio(absent[0] + 1).unwrap() - rho).norm() < 1e-12);
    }
}

#[test]
fn noiseless_detection_recovers_true_ratios() {
    let object = random_quantized_object(16, 16, 4, 5);
    let (images, grid) = simulate_all(&object, 4, 32);
    let maps: Vec<_> = images
        .iter()
        .enumerate()
        .map(|(j, img)| recognize_fringes(img, grid, &DetectConfig::for_unit(32), j + 1).unwrap())
        .collect();
    // Each boundary disappears in exactly one of the four images.
    for r in 0..16 {
        for c in 0..15 {
            assert_eq!(maps.iter().filter(|m| !m.row_map[[r, c]]).count(), 1);
            assert_eq!(maps.iter().filter(|m| !m.col_map[[c, r]]).count(), 1);
        }
    }
    let set = make_patterns(4, 16, 16).unwrap();
    let (inv, ratios) = mark_invalid_and_ratios(&maps, &reference_library(&set)).unwrap();
    assert_eq!(inv.invalid_count(), 0);
    for r in 0..16 {
        for c in 0..15 {
            let h = ratios.get(EdgeKind::Horizontal, r, c).unwrap();
            assert!((h - phase_ratio(object[[r, c]], object[[r, c + 1]])).norm() < 1e-12);
            let v = ratios.get(EdgeKind::Vertical, c, r).unwrap();
            assert!((v - phase_ratio(object[[c, r]], object[[c + 1, r]])).norm() < 1e-12);
        }
    }
}

#[test]
fn origins_agree_on_relative_phases() {
    let mut cfg = RunConfig::default();
    cfg.seed = 21;
    let run = run_in_memory(&cfg).unwrap();
    let reference = (7, 9);
    let relative: Vec<_> = [(0, 0), (15, 15), (4, 11), (12, 2)]
        .iter()
        .map(|&origin| {
            let plan = plan_paths(&run.invalid, origin).unwrap();
            let phase = accumulate_phase(&plan, &run.ratios, 0.0).unwrap();
            let base = phase[reference].unwrap();
            phase.mapv(|p| wrapped(p.unwrap() - base))
        })
        .collect();
    for other in &relative[1..] {
        for (a, b) in relative[0].iter().zip(other.iter()) {
            assert!(wrapped(a - b).abs() < 1e-12);
        }
    }
    assert!(run.reconstruction.contributors.iter().all(|&n| n == 2));
}

#[test]
fn uniform_object_has_unit_amplitude() {
    let object = random_quantized_object(6, 6, 4, 8);
    let (images, grid) = simulate_all(&object, 4, 32);
    let amp = estimate_amplitude(&images, grid, DetectConfig::for_unit(32).band_halfwidth).unwrap();
    assert!(amp.iter().all(|&a| (a - 1.0).abs() <= 0.02), "{amp:?}");
}

#[test]
fn half_amplitude_unit_is_recovered() {
    let mut object = random_quantized_object(6, 6, 4, 9);
    object[[2, 3]] *= 0.5;
    let (images, grid) = simulate_all(&object, 4, 32);
    let bhw = DetectConfig::for_unit(32).band_halfwidth;
    let amp = estimate_amplitude(&images, grid, bhw).unwrap();
    assert!((amp[[2, 3]] - 0.5).abs() <= 0.025, "estimated {}", amp[[2, 3]]);

    // The same answer from any single measurement.
    for img in &images {
        let single = estimate_amplitude(std::slice::from_ref(img), grid, bhw).unwrap();
        assert!((single[[2, 3]] - 0.5).abs() <= 0.025);
    }
}
