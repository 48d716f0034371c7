//! Calibrated device model: light and RF drive to slab hole density to
//! field solution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::carriers::{calibrate_generation, steady_carriers, CarrierError, CarrierState};
use crate::config::{Config, DeviceGeometry, DriveConditions, Electrode};
use crate::electrostatics::{solve_poisson, ElectrostaticsError, FieldSolution, HoleMap};
use crate::grid::{Grid2D, GridError};
use crate::photophysics::{drive_mixing, state_for_drive, PhotophysicsError, SpinChargeState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Photophysics(#[from] PhotophysicsError),
    #[error(transparent)]
    Carriers(#[from] CarrierError),
    #[error(transparent)]
    Electrostatics(#[from] ElectrostaticsError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Link between the per-NV pair rate and volumetric generation, fixed once
/// at the reference power and reused for every other drive and beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub scale: f64,
    pub reference_power: f64,
    pub reference_waist: f64,
    pub target_hole_density: f64,
    pub reference_pair_rate: f64,
}

/// Slab state for one drive condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabState {
    pub nv: SpinChargeState,
    pub generation: f64,
    pub carriers: CarrierState,
    pub k_rabi: f64,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: Config,
    pub grid: Grid2D,
    pub calibration: Calibration,
}

impl Model {
    /// Builds the model and calibrates generation so that the slab holds the
    /// configured hole density at the reference power with RF off.
    pub fn new(config: Config) -> Result<Model, ModelError> {
        let grid = Grid2D::from_geometry(&config.geometry)?;
        let cal = &config.calibration;
        let waist = config.geometry.beam_waist;
        let reference = state_for_drive(&config.photophysics, cal.reference_power, waist, 0.0)?;
        let scale = calibrate_generation(
            cal.target_hole_density,
            reference.pair_rate,
            config.material.nv_density(),
            &config.material,
        )?;
        let calibration = Calibration {
            scale,
            reference_power: cal.reference_power,
            reference_waist: waist,
            target_hole_density: cal.target_hole_density,
            reference_pair_rate: reference.pair_rate,
        };
        Ok(Model {
            config,
            grid,
            calibration,
        })
    }

    /// Same calibration on a different device geometry.
    pub fn with_geometry(&self, geometry: DeviceGeometry) -> Result<Model, ModelError> {
        let grid = Grid2D::from_geometry(&geometry)?;
        let mut config = self.config.clone();
        config.geometry = geometry;
        Ok(Model {
            config,
            grid,
            calibration: self.calibration,
        })
    }

    /// Magnetic field at the centre of electrode `e` (T): the midpoint value
    /// plus the gradient times the offset along x.
    pub fn region_field(&self, drive: &DriveConditions, e: Electrode) -> f64 {
        let g = &self.grid;
        let offset = g.x(g.center_column(e)) - 0.5 * g.width();
        drive.b_axial + drive.b_gradient * offset
    }

    /// RF spin-mixing rate seen by NVs in the region of electrode `e`.
    pub fn mixing(&self, drive: &DriveConditions, e: Electrode) -> f64 {
        drive_mixing(&self.config.photophysics, drive, self.region_field(drive, e))
    }

    /// NV state and carriers in the slab for an explicit mixing rate.
    pub fn slab_state_with_mixing(&self, optical_power: f64, k_rabi: f64) -> Result<SlabState, ModelError> {
        let nv = state_for_drive(
            &self.config.photophysics,
            optical_power,
            self.config.geometry.beam_waist,
            k_rabi,
        )?;
        let generation = self.calibration.scale * self.config.material.nv_density() * nv.pair_rate;
        let carriers = steady_carriers(generation, &self.config.material)?;
        Ok(SlabState {
            nv,
            generation,
            carriers,
            k_rabi,
        })
    }

    /// Slab state under `drive`. The photocurrent is limited by the contact
    /// in reverse, so RF acts through the field at the positive electrode.
    pub fn slab_state(&self, drive: &DriveConditions) -> Result<SlabState, ModelError> {
        self.slab_state_with_mixing(drive.optical_power, self.mixing(drive, drive.positive_electrode))
    }

    pub fn hole_map(&self, p0: f64) -> HoleMap {
        HoleMap::uniform_slab(&self.grid, p0)
    }

    pub fn solve(&self, u: f64, p0: f64, positive: Electrode) -> Result<FieldSolution, ModelError> {
        Ok(solve_poisson(
            &self.grid,
            &self.hole_map(p0),
            u,
            positive,
            &self.config.material,
            &self.config.solver,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_power_gives_target_density() {
        let model = Model::new(Config::default()).unwrap();
        let mut drive = model.config.drive.clone();
        drive.optical_power = model.config.calibration.reference_power;
        drive.rf_enabled = false;
        let s = model.slab_state(&drive).unwrap();
        assert_relative_eq!(s.carriers.p, 3.5e20, max_relative = 1e-10);
    }

    #[test]
    fn dark_slab_has_no_holes() {
        let model = Model::new(Config::default()).unwrap();
        let s = model.slab_state_with_mixing(0.0, 0.0).unwrap();
        assert_eq!(s.carriers.p, 0.0);
    }

    #[test]
    fn region_fields_follow_gradient() {
        let model = Model::new(Config::default()).unwrap();
        let mut drive = model.config.drive.clone();
        drive.b_axial = 31.045e-3;
        drive.b_gradient = -5.709e-3 / 1e-6 * 1e-3;
        let ba = model.region_field(&drive, Electrode::A);
        let bb = model.region_field(&drive, Electrode::B);
        assert_relative_eq!(ba - bb, -drive.b_gradient * 250e-6, max_relative = 1e-12);
        assert!(ba > bb);
    }
}
