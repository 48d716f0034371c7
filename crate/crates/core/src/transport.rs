//! Thermionic emission over the reverse-biased contact and the device I-U
//! characteristic.
//!
//! With back-to-back contacts on a photo-induced p-type slab, the contact at
//! positive potential is reverse biased and limits the current. The forward
//! contact and the bulk are taken to drop no voltage (U1 = U) unless a series
//! resistance is configured.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Electrode, FieldMode, MaterialParams, TransportSettings};
use crate::config::DriveConditions;
use crate::constants::PhysicalConstants;
use crate::electrostatics::{extract_metrics, Stage};
use crate::model::{Model, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("field must be finite and non-negative (got {0:e} V/m)")]
    NegativeField(f64),
    #[error("junction voltage must be finite and non-negative (got {0} V)")]
    NegativeVoltage(f64),
    #[error("current is not finite for these parameters")]
    NonFinite,
    #[error("bias sweep must be ascending and non-negative")]
    BadSweep,
    #[error("{what} needs at least {need} points, got {got}")]
    TooFewPoints { what: &'static str, need: usize, got: usize },
    #[error("no knee detected: curvature maximum at the sweep boundary")]
    NoKnee,
    #[error("solver failed at U = {u} V: {source}")]
    Solver { u: f64, source: ModelError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("barrier fit did not converge after {iterations} iterations")]
    FitNoConvergence { iterations: usize },
    #[error("fitted {name} = {value} outside [{lo}, {hi}]")]
    FitBounds { name: &'static str, value: f64, lo: f64, hi: f64 },
}

/// The contact pair with the reverse-biased contact's emission parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodePair {
    pub phi1: f64,
    pub eta: f64,
    /// Effective emitting area (m²).
    pub a_eff: f64,
    pub reverse_contact: Electrode,
    /// Series resistance of the forward contact and bulk (ohm).
    pub series_resistance: f64,
}

impl DiodePair {
    /// For a p-type slab the reverse-biased contact is the positive one.
    pub fn from_config(mat: &MaterialParams, transport: &TransportSettings, positive: Electrode) -> DiodePair {
        DiodePair {
            phi1: mat.phi1,
            eta: mat.eta,
            a_eff: transport.contact_area,
            reverse_contact: positive,
            series_resistance: transport.series_resistance,
        }
    }

    /// Whether the whole bias is attributed to the reverse junction.
    pub fn u1_equals_u(&self) -> bool {
        self.series_resistance == 0.0
    }
}

/// Barrier lowering Δφ = √(qE/(4π ε₀ ε_s)) (V).
pub fn image_force_lowering(e: f64, mat: &MaterialParams) -> f64 {
    let c = PhysicalConstants::CODATA;
    (c.q() * e.max(0.0) / c.image_force_denominator(mat.eps_s)).sqrt()
}

/// Reverse thermionic current I = A·A*·T²·exp(−(φ₁−Δφ)/V_T)·(1 − exp(−U₁/(η V_T))).
pub fn thermionic_current(u1: f64, e: f64, pair: &DiodePair, mat: &MaterialParams) -> Result<f64, TransportError> {
    if !(u1.is_finite() && u1 >= 0.0) {
        return Err(TransportError::NegativeVoltage(u1));
    }
    if !(e.is_finite() && e >= 0.0) {
        return Err(TransportError::NegativeField(e));
    }
    let vt = PhysicalConstants::CODATA.thermal_voltage(mat.temperature);
    let barrier = (pair.phi1 - image_force_lowering(e, mat)) / vt;
    let saturation = pair.a_eff * mat.a_star * mat.temperature * mat.temperature * (-barrier).exp();
    let i = saturation * -(-u1 / (pair.eta * vt)).exp_m1();
    if !i.is_finite() {
        return Err(TransportError::NonFinite);
    }
    Ok(i)
}

/// Current with a series resistance: U₁ solves U₁ + I(U₁)·R = U.
pub fn series_current(u: f64, e: f64, pair: &DiodePair, mat: &MaterialParams) -> Result<(f64, f64), TransportError> {
    if pair.u1_equals_u() {
        return Ok((u, thermionic_current(u, e, pair, mat)?));
    }
    let mut lo = 0.0;
    let mut hi = u;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let i = thermionic_current(mid, e, pair, mat)?;
        if mid + i * pair.series_resistance > u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let u1 = 0.5 * (lo + hi);
    Ok((u1, thermionic_current(u1, e, pair, mat)?))
}

/// Field entering the barrier lowering.
pub fn effective_field(e_center: f64, e_edge: f64, transport: &TransportSettings) -> f64 {
    match transport.field_mode {
        FieldMode::Center => e_center,
        FieldMode::EdgeWeighted => (1.0 - transport.edge_weight) * e_center + transport.edge_weight * e_edge,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvPoint {
    pub u: f64,
    pub i: f64,
    pub u1: f64,
    pub e_center: f64,
    pub e_edge: f64,
    pub w_vertical: f64,
    pub l_lateral: f64,
    pub l_bottom: f64,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IVCurve {
    pub points: Vec<IvPoint>,
    pub rf_enabled: bool,
    pub drive: DriveConditions,
    /// Slab hole density (m⁻³) and RF mixing rate used for the sweep.
    pub p0: f64,
    pub k_rabi: f64,
    pub pair: DiodePair,
    pub inflection_voltage: Option<f64>,
}

impl IVCurve {
    pub fn voltages(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.u).collect()
    }

    pub fn currents(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.i).collect()
    }
}

fn check_sweep(u: &[f64]) -> Result<(), TransportError> {
    if u.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || u.windows(2).any(|w| w[1] <= w[0]) {
        return Err(TransportError::BadSweep);
    }
    Ok(())
}

/// Current for one bias point at slab density `p0`.
pub fn iv_point(model: &Model, u: f64, p0: f64, pair: &DiodePair) -> Result<IvPoint, TransportError> {
    let sol = model
        .solve(u, p0, pair.reverse_contact)
        .map_err(|source| TransportError::Solver { u, source })?;
    let m = extract_metrics(&sol);
    let mat = &model.config.material;
    let e = effective_field(m.e_center, m.e_edge, &model.config.transport);
    let (u1, i) = if p0 == 0.0 {
        // Without holes the slab is insulating and carries no current.
        (u, 0.0)
    } else {
        series_current(u, e, pair, mat)?
    };
    Ok(IvPoint {
        u,
        i,
        u1,
        e_center: m.e_center,
        e_edge: m.e_edge,
        w_vertical: m.w_vertical,
        l_lateral: m.l_lateral,
        l_bottom: m.l_bottom,
        stage: m.stage,
    })
}

/// I-U sweep under `drive`. Bias points are solved concurrently and returned
/// in sweep order.
pub fn device_iv(model: &Model, drive: &DriveConditions, u_sweep: &[f64]) -> Result<IVCurve, TransportError> {
    check_sweep(u_sweep)?;
    let slab = model.slab_state(drive)?;
    let pair = DiodePair::from_config(&model.config.material, &model.config.transport, drive.positive_electrode);
    let p0 = slab.carriers.p;
    let points = u_sweep
        .par_iter()
        .map(|&u| iv_point(model, u, p0, &pair))
        .collect::<Result<Vec<_>, _>>()?;
    let u: Vec<f64> = points.iter().map(|p| p.u).collect();
    let i: Vec<f64> = points.iter().map(|p| p.i).collect();
    let inflection_voltage = if p0 > 0.0 { find_inflection(&u, &i).ok() } else { None };
    Ok(IVCurve {
        points,
        rf_enabled: drive.rf_enabled,
        drive: drive.clone(),
        p0,
        k_rabi: slab.k_rabi,
        pair,
        inflection_voltage,
    })
}

/// Penalty weight of the second-difference smoother. Differences are taken
/// over the sweep index on the curve normalized to unit height.
pub const SMOOTHING: f64 = 0.1;

/// Minimum number of points for knee detection.
pub const MIN_KNEE_POINTS: usize = 7;

/// Whittaker smoother: minimizes Σ(y−s)² + λ Σ(Δ²s)².
fn smooth(y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    let mut a = nalgebra::DMatrix::<f64>::identity(n, n);
    for k in 0..n - 2 {
        let d = [1.0, -2.0, 1.0];
        for (p, dp) in d.iter().enumerate() {
            for (q, dq) in d.iter().enumerate() {
                a[(k + p, k + q)] += lambda * dp * dq;
            }
        }
    }
    let b = nalgebra::DVector::from_column_slice(y);
    let s = a.cholesky().expect("smoother matrix is SPD").solve(&b);
    s.iter().copied().collect()
}

/// Bias where the smoothed I(U) bends over most sharply.
///
/// The bend at a node is the drop of the smoothed slope across it relative to
/// the sum of the slopes on either side. It does not depend on the current scale and weighs a
/// slope halving equally at any bias. Points at zero bias are dropped: the
/// field rises as √U from the origin and that corner is not the knee. A
/// curve with no positive bend at any interior point has no knee.
pub fn find_inflection(u: &[f64], i: &[f64]) -> Result<f64, TransportError> {
    if i.len() != u.len() {
        return Err(TransportError::TooFewPoints {
            what: "knee detection",
            need: u.len(),
            got: i.len(),
        });
    }
    check_sweep(u)?;
    let start = u.iter().position(|&v| v > 0.0).unwrap_or(u.len());
    let (u, i) = (&u[start..], &i[start..]);
    if u.len() < MIN_KNEE_POINTS {
        return Err(TransportError::TooFewPoints {
            what: "knee detection",
            need: MIN_KNEE_POINTS,
            got: u.len(),
        });
    }
    let (imin, imax) = i
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(imax > imin) {
        return Err(TransportError::NoKnee);
    }
    let y: Vec<f64> = i.iter().map(|v| (v - imin) / (imax - imin)).collect();
    let s = smooth(&y, SMOOTHING);
    let slope: Vec<f64> = (1..u.len()).map(|k| (s[k] - s[k - 1]) / (u[k] - u[k - 1])).collect();
    let floor = 1e-9 / (u[u.len() - 1] - u[0]);
    // bend[k] belongs to node k; the end nodes have no slope on one side.
    let bend: Vec<f64> = (0..u.len())
        .map(|k| {
            if k == 0 || k == u.len() - 1 || slope[k - 1] <= floor {
                f64::NEG_INFINITY
            } else {
                (slope[k - 1] - slope[k]) / (slope[k - 1] + slope[k].max(0.0))
            }
        })
        .collect();
    let (best, bmax) = bend
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    if bmax <= 0.0 {
        return Err(TransportError::NoKnee);
    }
    Ok(u[best])
}

/// One calibration sample (V, A, V/m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvSample {
    pub u: f64,
    pub i: f64,
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierFit {
    pub phi1: f64,
    pub eta: f64,
    pub a_eff: f64,
    /// Covariance of (φ₁, η); η entries are zero when η was held fixed.
    pub covariance: [[f64; 2]; 2],
    /// ln I_model − ln I_measured per sample.
    pub residuals: Vec<f64>,
    pub rms: f64,
    pub iterations: usize,
    /// A_eff enters only through A_eff·e^{−φ₁/V_T} and is degenerate with φ₁.
    pub a_eff_fixed: bool,
    /// Set when the data carry no information on η (all U ≫ η V_T).
    pub eta_fixed: bool,
}

pub const MIN_FIT_POINTS: usize = 10;
const PHI1_BOUNDS: (f64, f64) = (0.0, 10.0);
const ETA_BOUNDS: (f64, f64) = (1.0, 20.0);

/// Levenberg-Marquardt fit of ln I to the thermionic model in (φ₁, η).
/// A_eff is held at the seed value.
pub fn calibrate_barrier(samples: &[IvSample], seed: &DiodePair, mat: &MaterialParams) -> Result<BarrierFit, TransportError> {
    let data: Vec<IvSample> = samples.iter().copied().filter(|s| s.u > 0.0 && s.i > 0.0).collect();
    if data.len() < MIN_FIT_POINTS {
        return Err(TransportError::TooFewPoints {
            what: "barrier calibration",
            need: MIN_FIT_POINTS,
            got: data.len(),
        });
    }
    let vt = PhysicalConstants::CODATA.thermal_voltage(mat.temperature);
    let prefactor = (seed.a_eff * mat.a_star * mat.temperature * mat.temperature).ln();
    let lowering: Vec<f64> = data.iter().map(|s| image_force_lowering(s.e, mat)).collect();

    let model = |theta: &Vector2<f64>, k: usize| -> f64 {
        let a = data[k].u / (theta[1] * vt);
        prefactor - (theta[0] - lowering[k]) / vt + (-(-a).exp_m1()).ln()
    };
    let residuals = |theta: &Vector2<f64>| -> Vec<f64> { (0..data.len()).map(|k| model(theta, k) - data[k].i.ln()).collect() };
    let jacobian = |theta: &Vector2<f64>| -> Vec<[f64; 2]> {
        (0..data.len())
            .map(|k| {
                let a = data[k].u / (theta[1] * vt);
                let d_eta = if a > 700.0 { 0.0 } else { -(a / theta[1]) / a.exp_m1() };
                [-1.0 / vt, d_eta]
            })
            .collect()
    };

    let mut theta = Vector2::new(seed.phi1, seed.eta);
    let eta_norm: f64 = jacobian(&theta).iter().map(|j| j[1] * j[1]).sum::<f64>().sqrt();
    let phi_norm = (data.len() as f64).sqrt() / vt;
    let eta_fixed = eta_norm < 1e-8 * phi_norm;

    let ssr = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut r = residuals(&theta);
    let mut cost = ssr(&r);
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 500 {
        iterations += 1;
        let jac = jacobian(&theta);
        let mut jtj = Matrix2::<f64>::zeros();
        let mut jtr = Vector2::<f64>::zeros();
        for (row, rk) in jac.iter().zip(&r) {
            for a in 0..2 {
                jtr[a] += row[a] * rk;
                for b in 0..2 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        if eta_fixed {
            jtj[(0, 1)] = 0.0;
            jtj[(1, 0)] = 0.0;
            jtj[(1, 1)] = 1.0;
            jtr[1] = 0.0;
        }
        let mut improved = false;
        for _ in 0..60 {
            let mut damped = jtj;
            for a in 0..2 {
                damped[(a, a)] *= 1.0 + mu;
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                mu *= 10.0;
                continue;
            };
            let mut trial = theta + step;
            trial[1] = trial[1].max(ETA_BOUNDS.0 * 0.5);
            let tr = residuals(&trial);
            let tc = ssr(&tr);
            if tc.is_finite() && tc <= cost {
                let rel = (step[0] / theta[0]).abs().max((step[1] / theta[1]).abs());
                theta = trial;
                r = tr;
                let drop = cost - tc;
                cost = tc;
                mu = (mu * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-13 || drop <= 1e-15 * cost.max(1e-300) || cost < 1e-28 {
                    converged = true;
                }
                break;
            }
            mu *= 10.0;
        }
        if converged || !improved {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(TransportError::FitNoConvergence { iterations });
    }
    let (phi1, eta) = (theta[0], theta[1]);
    if !(phi1 > PHI1_BOUNDS.0 && phi1 < PHI1_BOUNDS.1) {
        return Err(TransportError::FitBounds {
            name: "phi1",
            value: phi1,
            lo: PHI1_BOUNDS.0,
            hi: PHI1_BOUNDS.1,
        });
    }
    if !(ETA_BOUNDS.0..=ETA_BOUNDS.1).contains(&eta) {
        return Err(TransportError::FitBounds {
            name: "eta",
            value: eta,
            lo: ETA_BOUNDS.0,
            hi: ETA_BOUNDS.1,
        });
    }
    let dof = (data.len() - if eta_fixed { 1 } else { 2 }) as f64;
    let sigma2 = cost / dof;
    let jac = jacobian(&theta);
    let mut covariance = [[0.0; 2]; 2];
    if eta_fixed {
        covariance[0][0] = sigma2 / (data.len() as f64 / (vt * vt));
    } else {
        let mut jtj = Matrix2::<f64>::zeros();
        for row in &jac {
            for a in 0..2 {
                for b in 0..2 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        if let Some(inv) = jtj.try_inverse() {
            for a in 0..2 {
                for b in 0..2 {
                    covariance[a][b] = sigma2 * inv[(a, b)];
                }
            }
        }
    }
    Ok(BarrierFit {
        phi1,
        eta,
        a_eff: seed.a_eff,
        covariance,
        rms: (cost / data.len() as f64).sqrt(),
        residuals: r,
        iterations,
        a_eff_fixed: true,
        eta_fixed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use approx::assert_relative_eq;

    fn setup() -> (MaterialParams, DiodePair) {
        let cfg = Config::default();
        let pair = DiodePair::from_config(&cfg.material, &cfg.transport, Electrode::A);
        (cfg.material, pair)
    }

    #[test]
    fn lowering_closed_form() {
        let (mat, _) = setup();
        assert_eq!(image_force_lowering(0.0, &mat), 0.0);
        let hand = (1.602176634e-19f64 * 1e7 / (4.0 * std::f64::consts::PI * 8.8541878128e-12 * 5.7)).sqrt();
        assert_relative_eq!(image_force_lowering(1e7, &mat), hand, max_relative = 1e-14);
        assert_relative_eq!(image_force_lowering(1e7, &mat), 0.0503, max_relative = 1e-3);
        assert_relative_eq!(image_force_lowering(4e7, &mat), 2.0 * image_force_lowering(1e7, &mat), max_relative = 1e-14);
    }

    #[test]
    fn current_limits() {
        let (mat, pair) = setup();
        assert_eq!(thermionic_current(0.0, 1e7, &pair, &mat).unwrap(), 0.0);
        let vt = PhysicalConstants::CODATA.thermal_voltage(300.0);
        let sat = thermionic_current(1e3, 1e7, &pair, &mat).unwrap();
        let one = thermionic_current(1.0, 1e7, &pair, &mat).unwrap();
        assert_relative_eq!(one / sat, 1.0 - (-1.0 / (1.1 * vt)).exp(), max_relative = 1e-12);
        let with = thermionic_current(10.0, 1e7, &pair, &mat).unwrap();
        let without = thermionic_current(10.0, 0.0, &pair, &mat).unwrap();
        let dphi = image_force_lowering(1e7, &mat);
        assert_relative_eq!(with / without, (dphi / vt).exp(), max_relative = 1e-12);
        assert_relative_eq!(with / without, 7.0, max_relative = 0.02);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (mat, pair) = setup();
        assert!(thermionic_current(-1.0, 0.0, &pair, &mat).is_err());
        assert!(thermionic_current(1.0, -1.0, &pair, &mat).is_err());
        let mut p = pair;
        p.phi1 = -1e4;
        assert_eq!(thermionic_current(1.0, 0.0, &p, &mat), Err(TransportError::NonFinite));
    }

    #[test]
    fn series_resistance_reduces_current() {
        let (mat, mut pair) = setup();
        let u = 0.05;
        let ideal = thermionic_current(u, 1e7, &pair, &mat).unwrap();
        pair.series_resistance = 0.5 * u / ideal;
        let (u1, i) = series_current(u, 1e7, &pair, &mat).unwrap();
        assert!(i < ideal && u1 < u);
        assert_relative_eq!(u1 + i * pair.series_resistance, u, max_relative = 1e-12);
    }

    #[test]
    fn knee_of_piecewise_linear_curve() {
        let u: Vec<f64> = (0..=30).map(|k| 5.0 * k as f64).collect();
        let i: Vec<f64> = u.iter().map(|&v| if v <= 80.0 { v } else { 80.0 + 0.2 * (v - 80.0) }).collect();
        let knee = find_inflection(&u, &i).unwrap();
        assert!((knee - 80.0).abs() <= 5.0, "{knee}");
    }

    #[test]
    fn exponential_has_no_knee() {
        let u: Vec<f64> = (0..=30).map(|k| 5.0 * k as f64).collect();
        let i: Vec<f64> = u.iter().map(|&v| (v / 30.0).exp()).collect();
        assert_eq!(find_inflection(&u, &i), Err(TransportError::NoKnee));
        assert!(matches!(find_inflection(&u[..4], &i[..4]), Err(TransportError::TooFewPoints { .. })));
    }

    fn synthetic(phi1: f64, eta: f64) -> Vec<IvSample> {
        let (mat, mut pair) = setup();
        pair.phi1 = phi1;
        pair.eta = eta;
        (1..=20)
            .map(|k| {
                let u = 0.005 * k as f64 * k as f64;
                let e = 1e6 * (1.0 + u).sqrt();
                IvSample {
                    u,
                    i: thermionic_current(u, e, &pair, &mat).unwrap(),
                    e,
                }
            })
            .collect()
    }

    #[test]
    fn fit_recovers_exact_parameters() {
        let (mat, mut seed) = setup();
        let data = synthetic(1.2, 1.1);
        seed.phi1 = 1.0;
        seed.eta = 1.5;
        let fit = calibrate_barrier(&data, &seed, &mat).unwrap();
        assert_relative_eq!(fit.phi1, 1.2, max_relative = 1e-6);
        assert_relative_eq!(fit.eta, 1.1, max_relative = 1e-6);
        assert!(!fit.eta_fixed);
        assert!(fit.rms < 1e-8);
    }

    #[test]
    fn fit_needs_ten_points() {
        let (mat, seed) = setup();
        let data = synthetic(1.2, 1.1);
        assert!(matches!(
            calibrate_barrier(&data[..2], &seed, &mat),
            Err(TransportError::TooFewPoints { got: 2, .. })
        ));
    }

    #[test]
    fn high_bias_data_hold_eta() {
        let (mat, seed) = setup();
        let data: Vec<IvSample> = (1..=12)
            .map(|k| {
                let u = 10.0 * k as f64;
                let e = 1e7;
                IvSample {
                    u,
                    i: thermionic_current(u, e, &seed, &mat).unwrap() * 1.1,
                    e,
                }
            })
            .collect();
        let fit = calibrate_barrier(&data, &seed, &mat).unwrap();
        assert!(fit.eta_fixed);
        assert_eq!(fit.eta, seed.eta);
        let vt = PhysicalConstants::CODATA.thermal_voltage(300.0);
        assert_relative_eq!(fit.phi1, seed.phi1 - vt * 1.1f64.ln(), max_relative = 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn current_monotone(u in 0.0f64..200.0, e in 0.0f64..1e8, phi in 0.5f64..2.0) {
                let (mat, mut pair) = setup();
                pair.phi1 = phi;
                let base = thermionic_current(u, e, &pair, &mat).unwrap();
                prop_assert!(thermionic_current(u + 1e-3, e, &pair, &mat).unwrap() >= base);
                prop_assert!(thermionic_current(u, e * 1.01 + 1.0, &pair, &mat).unwrap() >= base);
                if u > 0.0 {
                    prop_assert!(thermionic_current(u, e * 1.01 + 1.0, &pair, &mat).unwrap() > base);
                    let mut higher = pair;
                    higher.phi1 = phi + 0.01;
                    prop_assert!(thermionic_current(u, e, &higher, &mat).unwrap() < base);
                }
            }
        }
    }
}
