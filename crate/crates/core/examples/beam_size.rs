//! Doubling the beam waist at constant intensity deepens the hole slab,
//! pushing the knee to higher bias and raising the plateau contrast.

use fedmr::config::Config;
use fedmr::experiments::{beam_size_study, linear_grid};
use fedmr::model::Model;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = Model::new(Config::default())?;
    let mut drive = model.config.drive.clone();
    drive.rf_enabled = true;
    let sweep = linear_grid(0.0, 300.0, 10.0)?;
    let study = beam_size_study(&model, &drive, &[5e-6, 10e-6], &[0.1, 0.4], &sweep)?;
    for e in &study {
        println!(
            "waist {:>4.1} um, {:>3.0} mW: knee off {:?} V, knee on {:?} V, plateau C {:?}, spread {:?}",
            e.waist * 1e6,
            e.power * 1e3,
            e.sweep.knee_off,
            e.sweep.knee_on,
            e.sweep.plateau_contrast(),
            e.sweep.plateau_spread()
        );
    }
    Ok(())
}
