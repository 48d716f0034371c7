//! Fit of barrier height and ideality to a simulated I-U curve with 5 %
//! multiplicative noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use fedmr::config::{Config, Electrode};
use fedmr::model::Model;
use fedmr::transport::{calibrate_barrier, device_iv, effective_field, DiodePair, IvSample};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = Model::new(Config::default())?;
    let mut drive = model.config.drive.clone();
    drive.optical_power = 0.4;
    drive.rf_enabled = false;
    let sweep: Vec<f64> = (0..=30).map(|k| 5.0 * k as f64).collect();
    let iv = device_iv(&model, &drive, &sweep)?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.05)?;
    let samples: Vec<IvSample> = iv
        .points
        .iter()
        .map(|p| IvSample {
            u: p.u,
            i: p.i * (1.0 + noise.sample(&mut rng)),
            e: effective_field(p.e_center, p.e_edge, &model.config.transport),
        })
        .collect();

    let mat = &model.config.material;
    let truth = DiodePair::from_config(mat, &model.config.transport, Electrode::A);
    let seed = DiodePair { phi1: 0.9, ..truth };
    let fit = calibrate_barrier(&samples, &seed, mat)?;
    println!("true  phi1 = {:.4} V, eta = {:.3}", truth.phi1, truth.eta);
    println!(
        "fit   phi1 = {:.4} +- {:.4} V, eta = {:.3}{}",
        fit.phi1,
        fit.covariance[0][0].sqrt(),
        fit.eta,
        if fit.eta_fixed { " (held at seed)" } else { "" }
    );
    println!("rms ln-residual {:.4} after {} iterations", fit.rms, fit.iterations);
    Ok(())
}
