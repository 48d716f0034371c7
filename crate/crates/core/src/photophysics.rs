//! Seven-level NV charge/spin rate model under continuous green pumping.
//!
//! Levels: NV⁻ ground m_S=0 and ±1, NV⁻ excited m_S=0 and ±1, the NV⁻
//! metastable singlet, NV⁰ ground and NV⁰ excited. Ionization promotes an
//! electron from the NV⁻ excited state to the conduction band, leaving NV⁰;
//! back-conversion from the NV⁰ excited state captures an electron from the
//! valence band. One full cycle therefore releases one electron-hole pair.

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

use crate::config::{DriveConditions, PhotophysicsParams};
use crate::constants::NV_GYRO;

pub const N_LEVELS: usize = 7;
pub const G0: usize = 0;
pub const G1: usize = 1;
pub const E0: usize = 2;
pub const E1: usize = 3;
pub const MS: usize = 4;
pub const Z_G: usize = 5;
pub const Z_E: usize = 6;

/// Fraction of back-conversion events landing in the m_S=0 ground level.
pub const BACK_CONVERSION_TO_MS0: f64 = 0.5;

/// Projections of a field along one crystal axis on the four NV families:
/// the aligned family sees the full field, the other three see cos(109.47°).
pub const FAMILY_PROJECTIONS: [f64; 4] = [1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

pub type RateMatrix = SMatrix<f64, N_LEVELS, N_LEVELS>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhotophysicsError {
    #[error("rate `{name}` must be finite and non-negative (got {value})")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("degenerate rate matrix: no unique steady state")]
    Degenerate,
    #[error("illuminated slab ({slab_depth:e} m) deeper than the simulation box ({box_depth:e} m)")]
    BeamTooLarge { slab_depth: f64, box_depth: f64 },
}

/// Transition rates (s⁻¹) at a given intensity and RF drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NVLevelRates {
    pub k_pump: f64,
    pub k_rad: f64,
    pub k_isc0: f64,
    pub k_isc1: f64,
    pub k_ms: f64,
    pub k_ion: f64,
    pub k_back: f64,
    pub k_rabi: f64,
    pub linewidth: f64,
}

impl NVLevelRates {
    /// Rates for intensity `intensity` (W/m²) and spin-mixing rate `k_rabi`.
    pub fn at_intensity(params: &PhotophysicsParams, intensity: f64, k_rabi: f64) -> NVLevelRates {
        NVLevelRates {
            k_pump: params.pump_per_intensity * intensity,
            k_rad: params.k_rad,
            k_isc0: params.k_isc0,
            k_isc1: params.k_isc1,
            k_ms: params.k_ms,
            k_ion: params.ionization_per_intensity * intensity,
            k_back: params.back_conversion_per_intensity * intensity,
            k_rabi,
            linewidth: params.linewidth,
        }
    }

    pub fn with_rabi(&self, k_rabi: f64) -> NVLevelRates {
        NVLevelRates { k_rabi, ..*self }
    }

    pub fn validate(&self) -> Result<(), PhotophysicsError> {
        let all = [
            ("k_pump", self.k_pump),
            ("k_rad", self.k_rad),
            ("k_isc0", self.k_isc0),
            ("k_isc1", self.k_isc1),
            ("k_ms", self.k_ms),
            ("k_ion", self.k_ion),
            ("k_back", self.k_back),
            ("k_rabi", self.k_rabi),
        ];
        for (name, value) in all {
            if !(value.is_finite() && value >= 0.0) {
                return Err(PhotophysicsError::InvalidRate { name, value });
            }
        }
        Ok(())
    }
}

/// Generator of the master equation dP/dt = M·P.
pub fn rate_matrix(r: &NVLevelRates) -> RateMatrix {
    let mut m = RateMatrix::zeros();
    let mut t = |from: usize, to: usize, rate: f64| {
        m[(to, from)] += rate;
        m[(from, from)] -= rate;
    };
    t(G0, E0, r.k_pump);
    t(G1, E1, r.k_pump);
    t(E0, G0, r.k_rad);
    t(E1, G1, r.k_rad);
    t(E0, MS, r.k_isc0);
    t(E1, MS, r.k_isc1);
    t(MS, G0, r.k_ms);
    t(E0, Z_G, r.k_ion);
    t(E1, Z_G, r.k_ion);
    t(Z_G, Z_E, r.k_pump);
    t(Z_E, Z_G, r.k_rad);
    t(Z_E, G0, r.k_back * BACK_CONVERSION_TO_MS0);
    t(Z_E, G1, r.k_back * (1.0 - BACK_CONVERSION_TO_MS0));
    t(G0, G1, r.k_rabi);
    t(G1, G0, r.k_rabi);
    m
}

/// Steady-state occupation and the observables derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinChargeState {
    pub populations: [f64; N_LEVELS],
    /// Electron-hole pairs per NV per second (ionization flux).
    pub pair_rate: f64,
    /// Back-conversion flux; equal to `pair_rate` at steady state.
    pub back_conversion_rate: f64,
    pub pl_nv_minus: f64,
    pub pl_nv_zero: f64,
}

impl SpinChargeState {
    /// The dark state: everything in the NV⁻ ground manifold, no emission.
    pub fn dark() -> SpinChargeState {
        let mut populations = [0.0; N_LEVELS];
        populations[G0] = 1.0;
        SpinChargeState {
            populations,
            pair_rate: 0.0,
            back_conversion_rate: 0.0,
            pl_nv_minus: 0.0,
            pl_nv_zero: 0.0,
        }
    }

    pub fn nv_minus_fraction(&self) -> f64 {
        self.populations[..Z_G].iter().sum()
    }
}

/// Largest entry of M·P, the steady-state residual.
pub fn master_residual(rates: &NVLevelRates, populations: &[f64; N_LEVELS]) -> f64 {
    let p = SVector::<f64, N_LEVELS>::from_column_slice(populations);
    (rate_matrix(rates) * p).amax()
}

/// Solves M·P = 0 with Σ P = 1.
///
/// Without pumping the ground manifold is closed, so the steady state is
/// taken as all-m_S=0 (or the equal mix of both ground levels under RF).
pub fn steady_state(rates: &NVLevelRates) -> Result<SpinChargeState, PhotophysicsError> {
    rates.validate()?;
    if rates.k_pump == 0.0 {
        return Ok(dark_state(rates));
    }
    let x = gth_stationary(&rate_matrix(rates)).ok_or(PhotophysicsError::Degenerate)?;
    Ok(observables(rates, x))
}

/// Stationary vector of a generator by Grassmann-Taksar-Heyman state
/// reduction. It uses no subtractions, so every component keeps full relative
/// accuracy even when rates span many decades.
fn gth_stationary(m: &RateMatrix) -> Option<[f64; N_LEVELS]> {
    // r[i][j] = rate i -> j
    let mut r = [[0.0; N_LEVELS]; N_LEVELS];
    for (i, row) in r.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = m[(j, i)];
            }
        }
    }
    for k in (1..N_LEVELS).rev() {
        let s: f64 = r[k][..k].iter().sum();
        if !(s > 0.0) {
            return None;
        }
        for row in r.iter_mut().take(k) {
            row[k] /= s;
        }
        for i in 0..k {
            let rik = r[i][k];
            if rik == 0.0 {
                continue;
            }
            for j in 0..k {
                if i != j {
                    r[i][j] += rik * r[k][j];
                }
            }
        }
    }
    let mut pi = [0.0; N_LEVELS];
    pi[0] = 1.0;
    for k in 1..N_LEVELS {
        pi[k] = (0..k).map(|i| pi[i] * r[i][k]).sum();
    }
    let total: f64 = pi.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return None;
    }
    for p in &mut pi {
        *p /= total;
    }
    Some(pi)
}

fn dark_state(rates: &NVLevelRates) -> SpinChargeState {
    if rates.k_rabi > 0.0 {
        let mut populations = [0.0; N_LEVELS];
        populations[G0] = 0.5;
        populations[G1] = 0.5;
        observables(rates, populations)
    } else {
        SpinChargeState::dark()
    }
}

fn observables(r: &NVLevelRates, populations: [f64; N_LEVELS]) -> SpinChargeState {
    let excited_minus = populations[E0] + populations[E1];
    SpinChargeState {
        populations,
        pair_rate: r.k_ion * excited_minus,
        back_conversion_rate: r.k_back * populations[Z_E],
        pl_nv_minus: r.k_rad * excited_minus,
        pl_nv_zero: r.k_rad * populations[Z_E],
    }
}

/// One magnetic-resonance line (Hz, peak amplitude, Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceLine {
    pub center: f64,
    pub amplitude: f64,
    pub fwhm: f64,
}

impl ResonanceLine {
    /// Peak-normalized Lorentzian evaluated at `f`.
    pub fn at(&self, f: f64) -> f64 {
        let x = 2.0 * (f - self.center) / self.fwhm;
        self.amplitude / (1.0 + x * x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceSpectrum {
    pub zfs: f64,
    pub lines: Vec<ResonanceLine>,
}

impl ResonanceSpectrum {
    /// Ensemble spectrum for a field `b` (T) along one NV axis: two lines per
    /// family at zfs ± γ·B_proj, each carrying 1/8 of the total amplitude.
    pub fn nv_ensemble(zfs: f64, b: f64, fwhm: f64) -> ResonanceSpectrum {
        let amplitude = 1.0 / (2.0 * FAMILY_PROJECTIONS.len() as f64);
        let lines = FAMILY_PROJECTIONS
            .iter()
            .flat_map(|proj| {
                let shift = NV_GYRO * b * proj;
                [-1.0, 1.0].map(|s| ResonanceLine {
                    center: zfs + s * shift,
                    amplitude,
                    fwhm,
                })
            })
            .collect();
        ResonanceSpectrum { zfs, lines }
    }

    /// Sum of line shapes at `f` (1 at peak when all lines coincide).
    pub fn line_sum(&self, f: f64) -> f64 {
        self.lines.iter().map(|l| l.at(f)).sum()
    }
}

/// Spin-mixing rate at 0 dBm scaled by RF amplitude.
pub fn rabi_rate(rabi_at_0dbm: f64, rf_power_dbm: f64) -> f64 {
    rabi_at_0dbm * 10f64.powf(rf_power_dbm / 20.0)
}

/// Mixing strength (s⁻¹) delivered by RF at `rf_frequency` and `rf_power_dbm`.
pub fn resonance_factor(spectrum: &ResonanceSpectrum, rf_frequency: f64, rf_power_dbm: f64, rabi_at_0dbm: f64) -> f64 {
    rabi_rate(rabi_at_0dbm, rf_power_dbm) * spectrum.line_sum(rf_frequency)
}

/// Mixing strength for a drive at local field `b_local`; zero with RF off.
pub fn drive_mixing(params: &PhotophysicsParams, drive: &DriveConditions, b_local: f64) -> f64 {
    if !drive.rf_enabled {
        return 0.0;
    }
    let spectrum = ResonanceSpectrum::nv_ensemble(params.zfs, b_local, params.linewidth);
    resonance_factor(&spectrum, drive.rf_frequency, drive.rf_power_dbm, params.rabi_at_0dbm)
}

/// Peak intensity proxy P/(π w²) (W/m²) of the top-hat beam.
pub fn beam_intensity(power: f64, waist: f64) -> f64 {
    power / (std::f64::consts::PI * waist * waist)
}

/// Steady state under `drive` with mixing rate `k_rabi`.
pub fn state_for_drive(
    params: &PhotophysicsParams,
    optical_power: f64,
    beam_waist: f64,
    k_rabi: f64,
) -> Result<SpinChargeState, PhotophysicsError> {
    let rates = NVLevelRates::at_intensity(params, beam_intensity(optical_power, beam_waist), k_rabi);
    steady_state(&rates)
}

/// Volumetric pair generation G (m⁻³ s⁻¹) inside the illuminated slab.
///
/// `scale` is the calibration constant linking the per-NV model rate to
/// carrier generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationField {
    pub slab_depth: f64,
    pub g_slab: f64,
}

impl GenerationField {
    /// G at depth `z` below the surface (top-hat along z, uniform along x).
    pub fn at_depth(&self, z: f64) -> f64 {
        if z <= self.slab_depth {
            self.g_slab
        } else {
            0.0
        }
    }
}

pub fn generation_field(
    geometry: &crate::config::DeviceGeometry,
    state: &SpinChargeState,
    nv_density: f64,
    scale: f64,
) -> Result<GenerationField, PhotophysicsError> {
    let slab_depth = 2.0 * geometry.beam_waist;
    if slab_depth > geometry.box_depth * (1.0 + 1e-12) {
        return Err(PhotophysicsError::BeamTooLarge {
            slab_depth,
            box_depth: geometry.box_depth,
        });
    }
    Ok(GenerationField {
        slab_depth: geometry.slab_depth.min(geometry.box_depth),
        g_slab: scale * nv_density * state.pair_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use approx::assert_relative_eq;

    fn defaults(intensity: f64, k_rabi: f64) -> NVLevelRates {
        NVLevelRates::at_intensity(&Config::default().photophysics, intensity, k_rabi)
    }

    /// Independent steady state from the null space of M via SVD.
    fn oracle(rates: &NVLevelRates) -> [f64; N_LEVELS] {
        let m = rate_matrix(rates);
        let svd = m.svd(false, true);
        let v_t = svd.v_t.unwrap();
        let (idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let row = v_t.row(idx);
        let s: f64 = row.iter().sum();
        let mut out = [0.0; N_LEVELS];
        for i in 0..N_LEVELS {
            out[i] = row[i] / s;
        }
        out
    }

    const I100: f64 = 0.1 / (std::f64::consts::PI * 25e-12);

    #[test]
    fn matches_null_space_oracle() {
        for rabi in [0.0, 1e5, 2e7] {
            let r = defaults(I100, rabi);
            let s = steady_state(&r).unwrap();
            let o = oracle(&r);
            for i in 0..N_LEVELS {
                assert_relative_eq!(s.populations[i], o[i], max_relative = 1e-9, epsilon = 1e-15);
            }
            assert!(master_residual(&r, &s.populations) < 1e-10 * r.k_rad);
        }
    }

    #[test]
    fn cycle_closes() {
        let s = steady_state(&defaults(I100, 0.0)).unwrap();
        assert_relative_eq!(s.pair_rate, s.back_conversion_rate, max_relative = 1e-9);
        let total: f64 = s.populations.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_spin_selectivity_no_contrast() {
        let mut r = defaults(I100, 0.0);
        r.k_isc1 = r.k_isc0;
        let off = steady_state(&r).unwrap();
        let on = steady_state(&r.with_rabi(2e7)).unwrap();
        assert_relative_eq!(off.pair_rate, on.pair_rate, max_relative = 1e-12);
    }

    #[test]
    fn strong_rf_lowers_pair_rate_and_pl() {
        let r = defaults(I100, 0.0);
        let off = steady_state(&r).unwrap();
        let on = steady_state(&r.with_rabi(2e7)).unwrap();
        assert!(on.pair_rate < off.pair_rate);
        assert!(on.pl_nv_minus < off.pl_nv_minus);
    }

    #[test]
    fn pair_and_pl_drops_coincide() {
        // Both observables are proportional to the NV⁻ excited population.
        let r = defaults(I100, 0.0);
        let off = steady_state(&r).unwrap();
        let on = steady_state(&r.with_rabi(1.96e7)).unwrap();
        let o_off = oracle(&r);
        let o_on = oracle(&r.with_rabi(1.96e7));
        let oracle_drop = 1.0 - (o_on[E0] + o_on[E1]) / (o_off[E0] + o_off[E1]);
        let pair_drop = 1.0 - on.pair_rate / off.pair_rate;
        let pl_drop = 1.0 - on.pl_nv_minus / off.pl_nv_minus;
        assert_relative_eq!(pair_drop, oracle_drop, max_relative = 1e-8);
        assert_relative_eq!(pair_drop, pl_drop, max_relative = 1e-12);
        assert_relative_eq!(pair_drop, 0.453766095487, max_relative = 1e-9);
    }

    #[test]
    fn dark_input() {
        let s = steady_state(&defaults(0.0, 0.0)).unwrap();
        assert_eq!(s.pair_rate, 0.0);
        assert_eq!(s.populations[G0], 1.0);
    }

    #[test]
    fn rejects_negative_rate() {
        let mut r = defaults(I100, 0.0);
        r.k_ms = -1.0;
        assert!(matches!(steady_state(&r), Err(PhotophysicsError::InvalidRate { name: "k_ms", .. })));
    }

    #[test]
    fn lines_coincide_at_zero_field() {
        let s = ResonanceSpectrum::nv_ensemble(2.87e9, 0.0, 10e6);
        assert_eq!(s.lines.len(), 8);
        assert!(s.lines.iter().all(|l| l.center == 2.87e9));
        assert_relative_eq!(s.line_sum(2.87e9), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn line_positions_follow_projection() {
        let b = 31.76e-3;
        let s = ResonanceSpectrum::nv_ensemble(2.87e9, b, 10e6);
        let low = s.lines.iter().map(|l| l.center).fold(f64::INFINITY, f64::min);
        assert_relative_eq!(low, 2.87e9 - 28.024e9 * b, max_relative = 1e-15);
        assert_relative_eq!(low, 1.98e9, max_relative = 1e-3);
    }

    #[test]
    fn lorentzian_normalization() {
        let l = ResonanceLine {
            center: 1.98e9,
            amplitude: 0.7,
            fwhm: 10e6,
        };
        assert_relative_eq!(l.at(1.98e9), 0.7, max_relative = 1e-15);
        assert!((l.at(1.98e9 + 5e6) - 0.35).abs() < 1e-9);
        assert!((l.at(1.98e9 - 5e6) - 0.35).abs() < 1e-9);
    }

    #[test]
    fn far_detuned_tail() {
        let s = ResonanceSpectrum::nv_ensemble(2.87e9, 0.0, 10e6);
        assert!(s.line_sum(2.87e9 + 100.0 * 10e6) < 1e-4);
    }

    #[test]
    fn two_line_probe_ratio() {
        let lines = vec![
            ResonanceLine {
                center: 1.98e9,
                amplitude: 1.0,
                fwhm: 10e6,
            },
            ResonanceLine {
                center: 2.02e9,
                amplitude: 1.0,
                fwhm: 10e6,
            },
        ];
        let s = ResonanceSpectrum { zfs: 2.87e9, lines };
        // The far line sits 8 half-widths from the probe; the midpoint is 4 from each.
        let at_line = 1.0 + 1.0 / (1.0 + 64.0);
        let at_mid = 2.0 / (1.0 + 16.0);
        assert_relative_eq!(
            resonance_factor(&s, 1.98e9, 0.0, 1.0) / resonance_factor(&s, 2.00e9, 0.0, 1.0),
            at_line / at_mid,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rabi_scales_with_amplitude() {
        assert_relative_eq!(rabi_rate(1.0, 20.0), 10.0, max_relative = 1e-15);
        let cfg = Config::default();
        let mut d = cfg.drive.clone();
        d.rf_enabled = false;
        assert_eq!(drive_mixing(&cfg.photophysics, &d, 0.0), 0.0);
    }

    #[test]
    fn generation_zero_without_light() {
        let cfg = Config::default();
        let s = state_for_drive(&cfg.photophysics, 0.0, cfg.geometry.beam_waist, 0.0).unwrap();
        let g = generation_field(&cfg.geometry, &s, cfg.material.nv_density(), 1.0).unwrap();
        assert_eq!(g.g_slab, 0.0);
        assert_eq!(g.at_depth(1e-6), 0.0);
    }

    #[test]
    fn generation_scaled_by_rf() {
        let cfg = Config::default();
        let p = &cfg.photophysics;
        let w = cfg.geometry.beam_waist;
        let off = state_for_drive(p, 0.1, w, 0.0).unwrap();
        let on = state_for_drive(p, 0.1, w, 2e7).unwrap();
        let g_off = generation_field(&cfg.geometry, &off, 1e20, 1.0).unwrap();
        let g_on = generation_field(&cfg.geometry, &on, 1e20, 1.0).unwrap();
        assert_relative_eq!(g_on.g_slab / g_off.g_slab, on.pair_rate / off.pair_rate, max_relative = 1e-15);
        assert_eq!(g_on.at_depth(11e-6), 0.0);
    }

    #[test]
    fn doubled_waist_at_fixed_power() {
        // Quarter intensity; sub-saturation two-step cycle gives ~1/16 per NV.
        let cfg = Config::default();
        let p = &cfg.photophysics;
        let a = state_for_drive(p, 0.1, 5e-6, 0.0).unwrap();
        let b = state_for_drive(p, 0.1, 10e-6, 0.0).unwrap();
        let ia = beam_intensity(0.1, 5e-6);
        let ib = beam_intensity(0.1, 10e-6);
        let oa = oracle(&NVLevelRates::at_intensity(p, ia, 0.0));
        let ob = oracle(&NVLevelRates::at_intensity(p, ib, 0.0));
        let expect = (ob[E0] + ob[E1]) * ib / ((oa[E0] + oa[E1]) * ia);
        assert_relative_eq!(b.pair_rate / a.pair_rate, expect, max_relative = 1e-9);
        assert!(b.pair_rate / a.pair_rate < 0.25);
        let geom = cfg.geometry.with_beam_waist(10e-6);
        let g = generation_field(&geom, &b, 1.0, 1.0).unwrap();
        assert_eq!(g.slab_depth, 20e-6);
    }

    #[test]
    fn beam_deeper_than_box_rejected() {
        let cfg = Config::default();
        let mut geom = cfg.geometry.clone();
        geom.beam_waist = 8e-6;
        let s = SpinChargeState::dark();
        assert!(matches!(
            generation_field(&geom, &s, 1.0, 1.0),
            Err(PhotophysicsError::BeamTooLarge { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn rates() -> impl Strategy<Value = NVLevelRates> {
            prop::array::uniform8(4.0f64..9.0)
                .prop_map(|e| {
                    let r: Vec<f64> = e.iter().map(|x| 10f64.powf(*x)).collect();
                    let (i0, i1) = if r[2] < r[3] { (r[2], r[3]) } else { (r[3], r[2] * 1.0001) };
                    NVLevelRates {
                        k_pump: r[0],
                        k_rad: r[1],
                        k_isc0: i0,
                        k_isc1: i1,
                        k_ms: r[4],
                        k_ion: r[5],
                        k_back: r[6],
                        k_rabi: r[7],
                        linewidth: 10e6,
                    }
                })
        }

        proptest! {
            #[test]
            fn residual_and_normalization(r in rates()) {
                let s = steady_state(&r).unwrap();
                let total: f64 = s.populations.iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(s.populations.iter().all(|p| (0.0..=1.0).contains(p)));
                let scale = [r.k_pump, r.k_rad, r.k_isc1, r.k_ms, r.k_ion, r.k_back, r.k_rabi]
                    .iter().cloned().fold(0.0, f64::max);
                prop_assert!(master_residual(&r, &s.populations) < 1e-10 * scale);
                prop_assert!((s.pair_rate - s.back_conversion_rate).abs() <= 1e-9 * s.pair_rate);
            }

            #[test]
            fn rf_never_raises_signals(r in rates()) {
                let off = steady_state(&r.with_rabi(0.0)).unwrap();
                let on = steady_state(&r).unwrap();
                prop_assert!(on.pair_rate <= off.pair_rate * (1.0 + 1e-9));
                prop_assert!(on.pl_nv_minus <= off.pl_nv_minus * (1.0 + 1e-9));
            }

            #[test]
            fn odmr_contrast_monotone_in_rabi(r in rates(), f in 1.05f64..10.0) {
                let off = steady_state(&r.with_rabi(0.0)).unwrap().pl_nv_minus;
                let c1 = 1.0 - steady_state(&r).unwrap().pl_nv_minus / off;
                let c2 = 1.0 - steady_state(&r.with_rabi(r.k_rabi * f)).unwrap().pl_nv_minus / off;
                prop_assert!((0.0 - 1e-9..1.0).contains(&c1));
                prop_assert!(c2 >= c1 - 1e-9);
            }
        }
    }
}
