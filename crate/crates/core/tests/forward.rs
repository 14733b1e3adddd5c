use std::f64::consts::PI;

use darkfringe::forward_model::{
    field_at_1d, gamma_second_derivative, intensity_profile_1d, simulate_measurement_2d, unit_phasors, PsfKind,
    PsfModel, SimConfig,
};
use darkfringe::fringe_detect::{recognize_fringes, DetectConfig, UnitGrid};
use darkfringe::{Complex64, ComplexField};
use ndarray::array;

/// Field of two adjacent units of length `a` meeting at the origin. Box and
/// exponential kernels are integrated in closed form, the Gaussian by the
/// composite trapezoid rule at step 0.01.
fn two_unit_field(kind: PsfKind, r: f64, a: f64, phi1: f64, phi2: f64, x: f64) -> Complex64 {
    let integral = |lo: f64, hi: f64| match kind {
        PsfKind::Box => (hi.min(x + r) - lo.max(x - r)).max(0.0),
        PsfKind::Exponential => {
            let f = |u: f64| u.signum() * 0.5 * r * (1.0 - (-2.0 * u.abs() / r).exp());
            f(x - lo) - f(x - hi)
        }
        PsfKind::Gaussian => {
            let p = |t: f64| (-((x - t) / r).powi(2)).exp();
            let step = 0.01;
            let n = ((hi - lo) / step).round() as usize;
            let mut sum = 0.5 * (p(lo) + p(hi));
            for k in 1..n {
                sum += p(lo + k as f64 * step);
            }
            sum * step
        }
    };
    Complex64::from_polar(integral(-a, 0.0), phi1) + Complex64::from_polar(integral(0.0, a), phi2)
}

#[test]
fn curvature_formula_holds_for_every_kernel() {
    let (r, a) = (18.0, 256.0);
    for kind in [PsfKind::Box, PsfKind::Exponential, PsfKind::Gaussian] {
        // The exponential cusp leaves an O(h / r) gap in the centered difference.
        let h = if kind == PsfKind::Exponential { 1e-3 } else { 0.5 };
        let model = PsfModel::new(kind, r).unwrap();
        for k in 1..=9 {
            let delta = k as f64 * 0.1 * PI;
            let g = |x: f64| two_unit_field(kind, r, a, delta, 0.0, x).norm_sqr();
            let numeric = (g(h) - 2.0 * g(0.0) + g(-h)) / (h * h);
            let analytic = gamma_second_derivative(&model, a, delta, 0.0).unwrap();
            let rel = ((analytic - numeric) / numeric).abs();
            assert!(rel <= 1e-3, "{kind:?} delta {delta}: analytic {analytic} numeric {numeric}");
        }
    }
}

#[test]
fn boundary_is_a_stationary_point() {
    let (r, a, h) = (18.0, 256.0, 0.5);
    for k in 1..=9 {
        let delta = k as f64 * 0.1 * PI;
        let g = |x: f64| two_unit_field(PsfKind::Gaussian, r, a, delta, 0.0, x).norm_sqr();
        assert!((g(h) - g(-h)).abs() <= 1e-9 * g(0.0), "delta {delta}");
    }
}

#[test]
fn fringe_deepens_with_phase_step() {
    let model = PsfModel::new(PsfKind::Gaussian, 4.0).unwrap();
    let unit_len = 64;
    let mut last = -1.0;
    for k in 0..=10 {
        let delta = k as f64 * 0.1 * PI;
        let profile = intensity_profile_1d(&unit_phasors(&[0.0, delta]), unit_len, &model).unwrap();
        let interior = profile[unit_len / 2];
        let floor = profile[unit_len - 8..unit_len + 8].iter().copied().fold(f64::INFINITY, f64::min);
        let depth = interior - floor;
        assert!(depth >= last - 1e-12, "depth {depth} after {last} at step {k}");
        last = depth;
    }
}

#[test]
fn mirror_symmetric_phases_give_symmetric_profile() {
    let model = PsfModel::new(PsfKind::Exponential, 5.0).unwrap();
    let values = unit_phasors(&[0.3, 1.1, 2.0, 1.1, 0.3]);
    let profile = intensity_profile_1d(&values, 40, &model).unwrap();
    let peak = profile.iter().copied().fold(0.0, f64::max);
    for (a, b) in profile.iter().zip(profile.iter().rev()) {
        assert!((a - b).abs() <= 1e-10 * peak);
    }
}

#[test]
fn field_is_continuous_across_pixel_grid() {
    let model = PsfModel::new(PsfKind::Gaussian, 3.0).unwrap();
    let values = unit_phasors(&[0.0, PI / 2.0]);
    let a = field_at_1d(&values, 32, &model, 31.999);
    let b = field_at_1d(&values, 32, &model, 32.001);
    assert!((a - b).norm() < 1e-2);
}

#[test]
fn quarter_phase_square_shows_all_four_fringes() {
    let object: ComplexField = array![[0.0, PI / 2.0], [PI / 2.0, PI]].mapv(|p| Complex64::from_polar(1.0, p));
    let identity = ComplexField::from_elem((2, 2), Complex64::new(1.0, 0.0));
    let model = PsfModel::new(PsfKind::Gaussian, 8.0).unwrap();
    let cfg = SimConfig::new(64);
    let img = simulate_measurement_2d(&object, &identity, &model, &cfg, 0).unwrap();
    let grid = UnitGrid { rows: 2, cols: 2, pixels_per_unit: 64, crop_rows: cfg.crop_rows };
    let maps = recognize_fringes(&img, grid, &DetectConfig::for_unit(64), 1).unwrap();
    assert!(maps.row_map.iter().chain(maps.col_map.iter()).all(|&b| b));

    // Along the middle of the top row the image follows the 1D two-unit profile.
    let row = 32 - cfg.crop_rows;
    let line = intensity_profile_1d(&unit_phasors(&[0.0, PI / 2.0]), 64, &model).unwrap();
    let scale = img.data[[row, 16]] / line[16];
    for x in 8..120 {
        let expect = scale * line[x];
        assert!((img.data[[row, x]] - expect).abs() <= 1e-6 * expect, "x = {x}");
    }
}

#[test]
fn identical_seeds_give_identical_images() {
    let object = ComplexField::from_shape_fn((3, 4), |(r, c)| Complex64::from_polar(1.0, (r + 2 * c) as f64));
    let pattern = ComplexField::from_elem((3, 4), Complex64::new(1.0, 0.0));
    let model = PsfModel::new(PsfKind::Gaussian, 4.0).unwrap();
    let cfg = SimConfig { noise_sigma: 0.05, ..SimConfig::new(16) };
    let a = simulate_measurement_2d(&object, &pattern, &model, &cfg, 9).unwrap();
    let b = simulate_measurement_2d(&object, &pattern, &model, &cfg, 9).unwrap();
    let c = simulate_measurement_2d(&object, &pattern, &model, &cfg, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
