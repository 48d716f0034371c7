//! PDMR contrast against bias at 400 mW, labelled rising, fast-rise and
//! plateau by the RF-on and RF-off knees.

use fedmr::config::Config;
use fedmr::experiments::{contrast_vs_voltage, linear_grid};
use fedmr::model::Model;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = Model::new(Config::default())?;
    let mut drive = model.config.drive.clone();
    drive.optical_power = 0.4;
    drive.rf_enabled = true;
    let sweep = linear_grid(0.0, 150.0, 5.0)?;
    let c = contrast_vs_voltage(&model, &drive, &sweep)?;
    for k in 0..c.voltages.len() {
        println!("{:6.1} V  C = {:7.4}  {}", c.voltages[k], c.c_pdmr[k], c.regimes[k].label());
    }
    println!("knees: RF on {:?} V, RF off {:?} V", c.knee_on, c.knee_off);
    println!(
        "plateau C_PDMR {:?} (spread {:?}), C_ODMR {:.4}",
        c.plateau_contrast(),
        c.plateau_spread(),
        c.c_odmr
    );
    Ok(())
}
