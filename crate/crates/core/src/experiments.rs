//! Measurement campaigns built on the device model: resonance spectra under a
//! field gradient, contrast against bias, and optical power and beam-size
//! series.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{DriveConditions, Electrode};
use crate::constants::NV_GYRO;
use crate::electrostatics::{delta_pl_profile, depletion_width_1d, extract_metrics, DepletionMetrics, PlFilter, PlProfile, Stage};
use crate::model::{Model, ModelError};
use crate::photophysics::{beam_intensity, state_for_drive};
use crate::transport::{device_iv, iv_point, DiodePair, IVCurve, TransportError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("contrast baseline must be positive (got {0:e})")]
    ZeroBaseline(f64),
    #[error("waist/power pairs do not share one intensity: {0:e} vs {1:e} W/m^2")]
    IntensityMismatch(f64, f64),
    #[error("{0}")]
    BadInput(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Relative drop of the photocurrent under RF, (I_off − I_on)/I_off.
pub fn pdmr_contrast(i_off: f64, i_on: f64) -> Result<f64, ExperimentError> {
    if !(i_off > 0.0) {
        return Err(ExperimentError::ZeroBaseline(i_off));
    }
    Ok((i_off - i_on) / i_off)
}

/// Relative drop of the photoluminescence under RF.
pub fn odmr_contrast(pl_off: f64, pl_on: f64) -> Result<f64, ExperimentError> {
    if !(pl_off > 0.0) {
        return Err(ExperimentError::ZeroBaseline(pl_off));
    }
    Ok((pl_off - pl_on) / pl_off)
}

/// Uniform frequency grid from `start` to `stop` inclusive.
pub fn frequency_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, ExperimentError> {
    linear_grid(start, stop, step)
}

/// Inclusive grid `start, start + step, ...` up to `stop` (within 1e-9 step).
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, ExperimentError> {
    if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
        return Err(ExperimentError::BadInput(format!("bad range {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// Axial field and gradient that put the lower line of the aligned family at
/// `f_a` over electrode A and `f_b` over electrode B.
pub fn gradient_for_regions(model: &Model, f_a: f64, f_b: f64) -> (f64, f64) {
    let zfs = model.config.photophysics.zfs;
    let g = &model.grid;
    let b_a = (zfs - f_a) / NV_GYRO;
    let b_b = (zfs - f_b) / NV_GYRO;
    let xa = g.x(g.center_column(Electrode::A));
    let xb = g.x(g.center_column(Electrode::B));
    let gradient = (b_b - b_a) / (xb - xa);
    let mid = 0.5 * g.width();
    (b_a + gradient * (mid - xa), gradient)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub frequencies: Vec<f64>,
    pub pdmr_contrast: Vec<f64>,
    pub odmr_contrast_a: Vec<f64>,
    pub odmr_contrast_b: Vec<f64>,
    pub i_off: f64,
    pub i_on: Vec<f64>,
    pub bias: f64,
    pub positive: Electrode,
    pub field_a: f64,
    pub field_b: f64,
}

impl SpectrumResult {
    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, &c)| if c > acc.1 { (k, c) } else { acc })
            .0
    }

    pub fn pdmr_peak(&self) -> f64 {
        self.frequencies[Self::argmax(&self.pdmr_contrast)]
    }

    pub fn odmr_peak(&self, e: Electrode) -> f64 {
        let c = match e {
            Electrode::A => &self.odmr_contrast_a,
            Electrode::B => &self.odmr_contrast_b,
        };
        self.frequencies[Self::argmax(c)]
    }
}

/// RF frequency scan at bias `drive.bias_voltage` with the positive contact
/// `drive.positive_electrode`. RF is switched on for every frequency point
/// and compared to a single RF-off reference.
pub fn spectrum_scan(model: &Model, drive: &DriveConditions, frequencies: &[f64]) -> Result<SpectrumResult, ExperimentError> {
    let mut off = drive.clone();
    off.rf_enabled = false;
    let positive = drive.positive_electrode;
    let bias = drive.bias_voltage;
    let pair = DiodePair::from_config(&model.config.material, &model.config.transport, positive);
    let p_off = model.slab_state(&off)?.carriers.p;
    let i_off = iv_point(model, bias, p_off, &pair)?.i;
    let params = &model.config.photophysics;
    let waist = model.config.geometry.beam_waist;
    let pl_off = state_for_drive(params, drive.optical_power, waist, 0.0).map_err(ModelError::from)?.pl_nv_minus;

    let rows = frequencies
        .par_iter()
        .map(|&f| -> Result<(f64, f64, f64, f64), ExperimentError> {
            let mut on = drive.clone();
            on.rf_enabled = true;
            on.rf_frequency = f;
            let slab = model.slab_state(&on)?;
            let i_on = iv_point(model, bias, slab.carriers.p, &pair)?.i;
            let pl = |e: Electrode| -> Result<f64, ExperimentError> {
                let k = model.mixing(&on, e);
                let s = state_for_drive(params, drive.optical_power, waist, k).map_err(ModelError::from)?;
                odmr_contrast(pl_off, s.pl_nv_minus)
            };
            Ok((i_on, pdmr_contrast(i_off, i_on)?, pl(Electrode::A)?, pl(Electrode::B)?))
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(SpectrumResult {
        frequencies: frequencies.to_vec(),
        i_on: rows.iter().map(|r| r.0).collect(),
        pdmr_contrast: rows.iter().map(|r| r.1).collect(),
        odmr_contrast_a: rows.iter().map(|r| r.2).collect(),
        odmr_contrast_b: rows.iter().map(|r| r.3).collect(),
        i_off,
        bias,
        positive,
        field_a: model.region_field(drive, Electrode::A),
        field_b: model.region_field(drive, Electrode::B),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Rising,
    FastRise,
    Plateau,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Rising => "rising",
            Regime::FastRise => "fast-rise",
            Regime::Plateau => "plateau",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastSweep {
    pub voltages: Vec<f64>,
    pub i_off: Vec<f64>,
    pub i_on: Vec<f64>,
    pub c_pdmr: Vec<f64>,
    pub regimes: Vec<Regime>,
    pub knee_on: Option<f64>,
    pub knee_off: Option<f64>,
    /// Optical contrast at the positive electrode under the same drive.
    pub c_odmr: f64,
    pub drive: DriveConditions,
    pub waist: f64,
}

impl ContrastSweep {
    fn plateau_values(&self) -> Vec<f64> {
        self.c_pdmr
            .iter()
            .zip(&self.regimes)
            .filter(|(_, r)| **r == Regime::Plateau)
            .map(|(c, _)| *c)
            .collect()
    }

    /// Mean contrast over the plateau band.
    pub fn plateau_contrast(&self) -> Option<f64> {
        let v = self.plateau_values();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// (max − min)/mean over the plateau band.
    pub fn plateau_spread(&self) -> Option<f64> {
        let v = self.plateau_values();
        let mean = self.plateau_contrast()?;
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
        Some((hi - lo) / mean.abs())
    }

    /// Number of contiguous regime bands.
    pub fn band_count(&self) -> usize {
        if self.regimes.is_empty() {
            return 0;
        }
        1 + self.regimes.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// Regime of each bias. A missing knee lies beyond the sweep.
pub fn label_regimes(voltages: &[f64], knee_on: Option<f64>, knee_off: Option<f64>) -> Vec<Regime> {
    let on = knee_on.unwrap_or(f64::INFINITY);
    let off = knee_off.unwrap_or(f64::INFINITY);
    voltages
        .iter()
        .map(|&u| {
            if u >= off {
                Regime::Plateau
            } else if u >= on {
                Regime::FastRise
            } else {
                Regime::Rising
            }
        })
        .collect()
}

/// Paired RF-off and RF-on sweeps of `drive` and their contrast.
pub fn contrast_vs_voltage(model: &Model, drive: &DriveConditions, u_sweep: &[f64]) -> Result<ContrastSweep, ExperimentError> {
    let mut off = drive.clone();
    off.rf_enabled = false;
    let iv_off = device_iv(model, &off, u_sweep)?;
    let iv_on = if drive.rf_enabled {
        device_iv(model, drive, u_sweep)?
    } else {
        iv_off.clone()
    };
    contrast_from_curves(model, drive, &iv_off, &iv_on)
}

/// Contrast sweep assembled from existing RF-off and RF-on curves.
pub fn contrast_from_curves(
    model: &Model,
    drive: &DriveConditions,
    iv_off: &IVCurve,
    iv_on: &IVCurve,
) -> Result<ContrastSweep, ExperimentError> {
    let voltages = iv_off.voltages();
    if iv_on.voltages() != voltages {
        return Err(ExperimentError::BadInput("RF-on and RF-off sweeps differ".into()));
    }
    let i_off = iv_off.currents();
    let i_on = iv_on.currents();
    let c_pdmr = i_off
        .iter()
        .zip(&i_on)
        .map(|(&a, &b)| if a > 0.0 { pdmr_contrast(a, b) } else { Ok(0.0) })
        .collect::<Result<Vec<_>, _>>()?;
    let (knee_on, knee_off) = if drive.rf_enabled {
        (iv_on.inflection_voltage, iv_off.inflection_voltage)
    } else {
        (None, None)
    };
    let regimes = if drive.rf_enabled {
        label_regimes(&voltages, knee_on, knee_off)
    } else {
        vec![Regime::Rising; voltages.len()]
    };
    let params = &model.config.photophysics;
    let waist = model.config.geometry.beam_waist;
    let k = model.mixing(drive, drive.positive_electrode);
    let pl_off = state_for_drive(params, drive.optical_power, waist, 0.0).map_err(ModelError::from)?;
    let pl_on = state_for_drive(params, drive.optical_power, waist, k).map_err(ModelError::from)?;
    let c_odmr = if pl_off.pl_nv_minus > 0.0 {
        odmr_contrast(pl_off.pl_nv_minus, pl_on.pl_nv_minus)?
    } else {
        0.0
    };
    Ok(ContrastSweep {
        voltages,
        i_off,
        i_on,
        c_pdmr,
        regimes,
        knee_on,
        knee_off,
        c_odmr,
        drive: drive.clone(),
        waist,
    })
}

/// RF-off I-U curves for a series of optical powers.
pub fn power_series(model: &Model, drive: &DriveConditions, powers: &[f64], u_sweep: &[f64]) -> Result<Vec<IVCurve>, ExperimentError> {
    powers
        .iter()
        .map(|&p| {
            let mut d = drive.clone();
            d.optical_power = p;
            Ok(device_iv(model, &d, u_sweep)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamEntry {
    pub waist: f64,
    pub power: f64,
    pub intensity: f64,
    pub sweep: ContrastSweep,
    pub iv_off: IVCurve,
    pub iv_on: IVCurve,
}

/// Contrast sweeps for (waist, power) pairs at one intensity. The slab depth
/// follows each waist; the generation calibration stays that of `model`.
pub fn beam_size_study(
    model: &Model,
    drive: &DriveConditions,
    waists: &[f64],
    powers: &[f64],
    u_sweep: &[f64],
) -> Result<Vec<BeamEntry>, ExperimentError> {
    if waists.len() != powers.len() || waists.is_empty() {
        return Err(ExperimentError::BadInput("need one power per waist".into()));
    }
    let reference = beam_intensity(powers[0], waists[0]);
    for (&w, &p) in waists.iter().zip(powers) {
        let i = beam_intensity(p, w);
        if (i - reference).abs() > 1e-9 * reference {
            return Err(ExperimentError::IntensityMismatch(reference, i));
        }
    }
    waists
        .iter()
        .zip(powers)
        .map(|(&w, &p)| {
            let m = model.with_geometry(model.config.geometry.with_beam_waist(w))?;
            let mut d = drive.clone();
            d.optical_power = p;
            let mut off = d.clone();
            off.rf_enabled = false;
            let iv_off = device_iv(&m, &off, u_sweep)?;
            let iv_on = device_iv(&m, &d, u_sweep)?;
            let sweep = contrast_from_curves(&m, &d, &iv_off, &iv_on)?;
            Ok(BeamEntry {
                waist: w,
                power: p,
                intensity: reference,
                sweep,
                iv_off,
                iv_on,
            })
        })
        .collect()
}

/// Least-squares line y = slope·x + intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Some(LineFit { slope, intercept, r2, n })
}

/// One bias of a depletion-imaging series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepletionPoint {
    pub u: f64,
    pub metrics: DepletionMetrics,
    pub w_1d: f64,
    pub newton_iterations: usize,
    pub profile: PlProfile,
    /// Surface field |E| along x from the outer edge of the positive
    /// electrode (same order as `profile.x`).
    pub surface_field: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepletionStudy {
    pub p0: f64,
    pub positive: Electrode,
    pub filter: PlFilter,
    pub points: Vec<DepletionPoint>,
    /// L_lateral against √U over the stage-3 points.
    pub sqrt_fit: Option<LineFit>,
}

/// ΔPL imaging series: each bias is compared to the unbiased device under
/// the same illumination.
pub fn depletion_study(
    model: &Model,
    drive: &DriveConditions,
    u_list: &[f64],
    filter: PlFilter,
) -> Result<DepletionStudy, ExperimentError> {
    let p0 = model.slab_state(drive)?.carriers.p;
    let positive = drive.positive_electrode;
    let reference = model.solve(0.0, p0, positive).map_err(|source| TransportError::Solver { u: 0.0, source })?;
    let alpha = model.config.imaging.nv_zero_alpha;
    let g = &model.grid;
    let order: Vec<usize> = match positive {
        Electrode::A => (0..g.nx).collect(),
        Electrode::B => (0..g.nx).rev().collect(),
    };
    let points = u_list
        .par_iter()
        .map(|&u| -> Result<DepletionPoint, ExperimentError> {
            let sol = model.solve(u, p0, positive).map_err(|source| TransportError::Solver { u, source })?;
            let profile = delta_pl_profile(&sol, &reference, filter, alpha).map_err(ModelError::from)?;
            Ok(DepletionPoint {
                u,
                metrics: extract_metrics(&sol),
                w_1d: if p0 > 0.0 { depletion_width_1d(u, p0, &model.config.material) } else { 0.0 },
                newton_iterations: sol.iterations,
                surface_field: order.iter().map(|&i| sol.surface_field(i).abs()).collect(),
                profile,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.metrics.stage == Stage::Lateral)
        .map(|p| (p.u.sqrt(), p.metrics.l_lateral))
        .unzip();
    Ok(DepletionStudy {
        p0,
        positive,
        filter,
        sqrt_fit: line_fit(&x, &y),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use approx::assert_relative_eq;

    #[test]
    fn contrast_arithmetic() {
        assert_eq!(pdmr_contrast(1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(pdmr_contrast(1.0e-9, 0.9e-9).unwrap(), 0.1, max_relative = 1e-12);
        assert_relative_eq!(odmr_contrast(2.0, 1.5).unwrap(), 0.25, max_relative = 1e-15);
        assert!(matches!(pdmr_contrast(0.0, 1.0), Err(ExperimentError::ZeroBaseline(_))));
        assert!(matches!(odmr_contrast(-1.0, 1.0), Err(ExperimentError::ZeroBaseline(_))));
    }

    #[test]
    fn grids_are_inclusive() {
        let u = linear_grid(0.0, 150.0, 5.0).unwrap();
        assert_eq!(u.len(), 31);
        assert_eq!(*u.last().unwrap(), 150.0);
        assert!(linear_grid(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn labels_are_ordered() {
        let u = linear_grid(0.0, 150.0, 10.0).unwrap();
        let r = label_regimes(&u, Some(90.0), Some(120.0));
        assert_eq!(r[8], Regime::Rising);
        assert_eq!(r[9], Regime::FastRise);
        assert_eq!(r[12], Regime::Plateau);
        assert_eq!(label_regimes(&u, None, None), vec![Regime::Rising; u.len()]);
    }

    #[test]
    fn gradient_maps_regions() {
        let model = Model::new(Config::default()).unwrap();
        let (b, grad) = gradient_for_regions(&model, 1.98e9, 2.02e9);
        let mut d = model.config.drive.clone();
        d.b_axial = b;
        d.b_gradient = grad;
        let zfs = model.config.photophysics.zfs;
        assert_relative_eq!(zfs - NV_GYRO * model.region_field(&d, Electrode::A), 1.98e9, max_relative = 1e-12);
        assert_relative_eq!(zfs - NV_GYRO * model.region_field(&d, Electrode::B), 2.02e9, max_relative = 1e-12);
        assert_relative_eq!(b, 31.045e-3, max_relative = 1e-3);
    }

    #[test]
    fn line_fit_exact() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = line_fit(&x, &y).unwrap();
        assert_relative_eq!(f.slope, 2.0, max_relative = 1e-14);
        assert_relative_eq!(f.intercept, -1.0, max_relative = 1e-14);
        assert_eq!(f.r2, 1.0);
        assert!(line_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn unbiased_profile_is_zero() {
        let model = Model::new(Config::default()).unwrap();
        let d = model.config.drive.clone();
        let s = depletion_study(&model, &d, &[0.0], PlFilter::NvMinus).unwrap();
        assert!(s.points[0].profile.delta_pl.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mismatched_intensity_rejected() {
        let model = Model::new(Config::default()).unwrap();
        let d = model.config.drive.clone();
        let r = beam_size_study(&model, &d, &[5e-6, 10e-6], &[0.1, 0.2], &[0.0, 10.0]);
        assert!(matches!(r, Err(ExperimentError::IntensityMismatch(..))));
    }
}
