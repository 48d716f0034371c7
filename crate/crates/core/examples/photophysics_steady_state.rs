//! Seven-level steady state against green intensity, with and without
//! resonant spin mixing.

use fedmr::config::Config;
use fedmr::photophysics::{beam_intensity, master_residual, steady_state, NVLevelRates};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = Config::default().photophysics;
    let k_rabi = 2e7;
    println!("P(mW)  I(W/m^2)   NV- frac  pairs/s     PL NV-     PL NV- (RF)  ODMR C   residual");
    for power in [0.01, 0.05, 0.1, 0.2, 0.4, 0.8] {
        let intensity = beam_intensity(power, 5e-6);
        let off = NVLevelRates::at_intensity(&params, intensity, 0.0);
        let on = off.with_rabi(k_rabi);
        let s_off = steady_state(&off)?;
        let s_on = steady_state(&on)?;
        println!(
            "{:5.0}  {:9.3e}  {:8.4}  {:10.4e}  {:9.4e}  {:11.4e}  {:7.4}  {:8.1e}",
            power * 1e3,
            intensity,
            s_off.nv_minus_fraction(),
            s_off.pair_rate,
            s_off.pl_nv_minus,
            s_on.pl_nv_minus,
            1.0 - s_on.pl_nv_minus / s_off.pl_nv_minus,
            master_residual(&on, &s_on.populations)
        );
    }
    Ok(())
}
