//! Generation scale fixed at the reference power, then the slab hole
//! density it implies for other powers and for resonant RF.

use fedmr::config::Config;
use fedmr::model::Model;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = Model::new(Config::default())?;
    let cal = model.calibration;
    println!(
        "reference {:.0} mW, waist {:.1} um: pair rate {:.4e} 1/s -> scale {:.4e}",
        cal.reference_power * 1e3,
        cal.reference_waist * 1e6,
        cal.reference_pair_rate,
        cal.scale
    );
    let mut drive = model.config.drive.clone();
    println!("P(mW)  G(1/m^3 s)   p0 off (m^-3)  p0 on (m^-3)  n (m^-3)    newton");
    for power in [0.05, 0.1, 0.2, 0.4] {
        drive.optical_power = power;
        drive.rf_enabled = false;
        let off = model.slab_state(&drive)?;
        drive.rf_enabled = true;
        let on = model.slab_state(&drive)?;
        println!(
            "{:5.0}  {:11.4e}  {:13.4e}  {:12.4e}  {:10.3e}  {:6}",
            power * 1e3,
            off.generation,
            off.carriers.p,
            on.carriers.p,
            off.carriers.n,
            off.carriers.iterations
        );
    }
    Ok(())
}
