use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use fedmr::config::{Config, DriveConditions, Electrode};
use fedmr::experiments::{beam_size_study, contrast_vs_voltage, frequency_grid, linear_grid, spectrum_scan};
use fedmr::io::cache::FieldCache;
use fedmr::io::commands::Args;
use fedmr::io::run_command;
use fedmr::io::table::read_numeric_csv;
use fedmr::model::Model;
use fedmr::transport::{calibrate_barrier, device_iv, thermionic_current, DiodePair, IvSample};

fn model() -> Model {
    Model::new(Config::default()).unwrap()
}

fn drive(m: &Model, power: f64, rf: bool) -> DriveConditions {
    let mut d = m.config.drive.clone();
    d.optical_power = power;
    d.rf_enabled = rf;
    d
}

fn args(pairs: &[(&str, &str)]) -> Args {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect::<BTreeMap<_, _>>()
}

fn file<'a>(files: &'a [(String, Vec<u8>)], name: &str) -> &'a [u8] {
    &files.iter().find(|(n, _)| n == name).unwrap_or_else(|| panic!("{name} missing")).1
}

#[test]
fn reruns_are_byte_identical() {
    let config = Config::default();
    for (cmd, a) in [
        ("iv", args(&[("power", "200"), ("u_range", "0:100:10")])),
        ("dr", args(&[("u_list", "20,80,140")])),
    ] {
        let (m1, o1) = run_command(cmd, &a, &config, None).unwrap();
        let (m2, o2) = run_command(cmd, &a, &config, None).unwrap();
        assert_eq!(m1.hash(), m2.hash(), "{cmd}");
        assert_eq!(o1.files, o2.files, "{cmd}");
    }
}

#[test]
fn persisted_contrast_matches_persisted_currents() {
    let a = args(&[("power", "400"), ("u_range", "0:150:10")]);
    let (_, out) = run_command("contrast", &a, &Config::default(), None).unwrap();
    let text = String::from_utf8(file(&out.files, "contrast.csv").to_vec()).unwrap();
    let (header, rows) = read_numeric_csv(&text).unwrap();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (off, on, c) = (col("I_off_A"), col("I_on_A"), col("C_PDMR"));
    assert_eq!(rows.len(), 16);
    for r in &rows {
        let expected = if r[off] > 0.0 { (r[off] - r[on]) / r[off] } else { 0.0 };
        assert!((r[c] - expected).abs() <= 1e-12, "U = {}: {} vs {expected}", r[0], r[c]);
    }
}

#[test]
fn calibration_recovers_barrier_from_noisy_curves() {
    let m = model();
    let mat = &m.config.material;
    let truth = DiodePair::from_config(mat, &m.config.transport, Electrode::A);
    let clean: Vec<IvSample> = (1..=30)
        .map(|k| {
            let u = 5.0 * k as f64;
            let e = 1.1e7 * (u / 55.0).sqrt().min(1.0);
            IvSample {
                u,
                i: thermionic_current(u, e, &truth, mat).unwrap(),
                e,
            }
        })
        .collect();
    let noise = Normal::new(0.0, 0.05).unwrap();
    let seed = DiodePair { phi1: 0.9, ..truth };
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let noisy: Vec<IvSample> = clean
            .iter()
            .map(|s| IvSample {
                i: s.i * (1.0 + noise.sample(&mut rng)),
                ..*s
            })
            .collect();
        let fit = calibrate_barrier(&noisy, &seed, mat).unwrap();
        assert!((fit.phi1 - truth.phi1).abs() < 0.05, "trial {trial}: phi1 = {}", fit.phi1);
    }
}

#[test]
fn currents_rise_with_bias_and_drop_under_rf() {
    let m = model();
    let sweep = linear_grid(0.0, 150.0, 10.0).unwrap();
    for power in [0.1, 0.4] {
        let off = device_iv(&m, &drive(&m, power, false), &sweep).unwrap();
        let on = device_iv(&m, &drive(&m, power, true), &sweep).unwrap();
        for w in off.points.windows(2).chain(on.points.windows(2)) {
            assert!(w[1].i >= w[0].i, "{} mW: I fell from {} to {} V", power * 1e3, w[0].u, w[1].u);
        }
        for (a, b) in off.points.iter().zip(&on.points) {
            assert!(b.i <= a.i, "{} mW, U = {}", power * 1e3, a.u);
        }
    }
}

#[test]
fn knee_moves_up_with_power() {
    let m = model();
    let sweep = linear_grid(0.0, 150.0, 5.0).unwrap();
    let knees: Vec<f64> = [0.1, 0.25, 0.4]
        .iter()
        .map(|&p| device_iv(&m, &drive(&m, p, false), &sweep).unwrap().inflection_voltage.unwrap())
        .collect();
    assert!(knees.windows(2).all(|w| w[1] >= w[0]), "{knees:?}");
}

#[test]
fn peak_follows_positive_electrode() {
    let m = model();
    let (b_axial, b_gradient) = fedmr::experiments::gradient_for_regions(&m, 1.98e9, 2.02e9);
    let freqs = frequency_grid(1.94e9, 2.06e9, 2e6).unwrap();
    for (positive, line) in [(Electrode::A, 1.98e9), (Electrode::B, 2.02e9)] {
        let mut d = drive(&m, 0.4, true);
        d.bias_voltage = 150.0;
        d.b_axial = b_axial;
        d.b_gradient = b_gradient;
        d.positive_electrode = positive;
        let s = spectrum_scan(&m, &d, &freqs).unwrap();
        assert_eq!(s.pdmr_peak(), s.odmr_peak(positive));
        assert!((s.pdmr_peak() - line).abs() < 1e6, "{positive:?}: {}", s.pdmr_peak());
    }
}

#[test]
fn zero_field_gives_one_line_at_zero_field_splitting() {
    let m = model();
    let mut d = drive(&m, 0.4, true);
    d.bias_voltage = 150.0;
    d.b_axial = 0.0;
    d.b_gradient = 0.0;
    let freqs = frequency_grid(2.80e9, 2.94e9, 2e6).unwrap();
    let s = spectrum_scan(&m, &d, &freqs).unwrap();
    assert!((s.pdmr_peak() - 2.87e9).abs() < 1e6);
    let c = &s.pdmr_contrast;
    let maxima = (1..c.len() - 1).filter(|&k| c[k] > c[k - 1] && c[k] >= c[k + 1]).count();
    assert_eq!(maxima, 1);
}

#[test]
fn identical_beam_entries_are_bit_identical() {
    let m = model();
    let sweep = linear_grid(0.0, 100.0, 20.0).unwrap();
    let study = beam_size_study(&m, &drive(&m, 0.1, true), &[5e-6, 5e-6], &[0.1, 0.1], &sweep).unwrap();
    assert_eq!(study[0], study[1]);
}

#[test]
fn no_rf_means_no_contrast() {
    let m = model();
    let sweep = linear_grid(0.0, 150.0, 10.0).unwrap();
    let c = contrast_vs_voltage(&m, &drive(&m, 0.4, false), &sweep).unwrap();
    assert!(c.c_pdmr.iter().all(|&x| x == 0.0));
    assert_eq!(c.c_odmr, 0.0);
    assert_eq!(c.band_count(), 1);
}

#[test]
fn cached_field_maps_reproduce_solved_ones() {
    let dir = tempfile::tempdir().unwrap();
    let cache = FieldCache::open(dir.path()).unwrap();
    let config = Config::default();
    let a = args(&[("u_list", "30,120"), ("field_maps", "true")]);
    let (_, fresh) = run_command("dr", &a, &config, None).unwrap();
    let (_, first) = run_command("dr", &a, &config, Some(&cache)).unwrap();
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    let (_, second) = run_command("dr", &a, &config, Some(&cache)).unwrap();
    assert_eq!(fresh.files, first.files);
    assert_eq!(first.files, second.files);
}
