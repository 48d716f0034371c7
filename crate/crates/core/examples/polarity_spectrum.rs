//! PDMR and ODMR spectra under a field gradient for both bias polarities.
//! The PDMR resonance follows the ODMR line of the positive electrode.

use fedmr::config::{Config, Electrode};
use fedmr::experiments::{frequency_grid, gradient_for_regions, spectrum_scan};
use fedmr::model::Model;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = Model::new(Config::default())?;
    let (b, grad) = gradient_for_regions(&model, 1.98e9, 2.02e9);
    let freqs = frequency_grid(1.95e9, 2.05e9, 1e6)?;
    for positive in [Electrode::A, Electrode::B] {
        let mut drive = model.config.drive.clone();
        drive.b_axial = b;
        drive.b_gradient = grad;
        drive.positive_electrode = positive;
        drive.optical_power = 0.4;
        let s = spectrum_scan(&model, &drive, &freqs)?;
        let peak = s.pdmr_contrast.iter().cloned().fold(0.0, f64::max);
        println!(
            "+{} V on {positive}: PDMR peak {:.3} GHz ({:.2}%), ODMR A {:.3} GHz, ODMR B {:.3} GHz",
            s.bias,
            s.pdmr_peak() / 1e9,
            100.0 * peak,
            s.odmr_peak(Electrode::A) / 1e9,
            s.odmr_peak(Electrode::B) / 1e9
        );
        println!("  far-detuned PDMR contrast {:.2e}", s.pdmr_contrast[0]);
    }
    Ok(())
}
