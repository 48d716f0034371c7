//! Binary field-solution cache: the second lookup skips the solve.

use std::time::Instant;

use fedmr::config::{Config, Electrode};
use fedmr::io::cache::{cache_key, FieldCache};
use fedmr::model::Model;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = Model::new(Config::default())?;
    let dir = std::env::temp_dir().join("fedmr-field-cache-example");
    let cache = FieldCache::open(&dir)?;
    let (u, p0) = (120.0, model.calibration.target_hole_density);
    let c = &model.config;
    let key = cache_key(&model.grid, &model.hole_map(p0), u, Electrode::A, &c.material, &c.solver);

    let t = Instant::now();
    let solved = model.solve(u, p0, Electrode::A)?;
    println!("solved in {:?} ({} Newton steps)", t.elapsed(), solved.iterations);
    cache.store(&key, &solved)?;

    let t = Instant::now();
    let loaded = cache.load(&key).ok_or("cache miss")?;
    println!("loaded in {:?} from {}", t.elapsed(), dir.display());
    println!("potentials identical: {}", loaded.phi == solved.phi);
    Ok(())
}
