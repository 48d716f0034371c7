//! I-U curves at 400 mW with RF off and on resonance, and their knees.

use fedmr::config::Config;
use fedmr::model::Model;
use fedmr::transport::device_iv;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = Model::new(Config::default())?;
    let sweep: Vec<f64> = (0..=30).map(|k| 5.0 * k as f64).collect();
    let mut drive = model.config.drive.clone();
    drive.optical_power = 0.4;
    drive.rf_enabled = false;
    let off = device_iv(&model, &drive, &sweep)?;
    drive.rf_enabled = true;
    let on = device_iv(&model, &drive, &sweep)?;
    println!("p0 off {:.4e} on {:.4e} m^-3, k_rabi {:.3e} 1/s", off.p0, on.p0, on.k_rabi);
    println!("{:>6} {:>12} {:>12} {:>8} {:>10}", "U (V)", "I_off (A)", "I_on (A)", "C (%)", "E (V/m)");
    for (a, b) in off.points.iter().zip(&on.points) {
        let c = if a.i > 0.0 { 100.0 * (a.i - b.i) / a.i } else { 0.0 };
        println!("{:6.1} {:12.4e} {:12.4e} {:8.3} {:10.4e}", a.u, a.i, b.i, c, a.e_center);
    }
    println!("knee RF off: {:?} V", off.inflection_voltage);
    println!("knee RF on:  {:?} V", on.inflection_voltage);
    Ok(())
}
