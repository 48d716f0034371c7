//! Depletion metrics under the positive electrode across a bias sweep,
//! with the 1D abrupt-junction width for comparison.

use fedmr::config::{Config, Electrode};
use fedmr::electrostatics::{depletion_width_1d, extract_metrics, solve_poisson, HoleMap};
use fedmr::grid::Grid2D;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = Config::default();
    let p0 = cfg.calibration.target_hole_density;
    let grid = Grid2D::from_geometry(&cfg.geometry)?;
    let holes = HoleMap::uniform_slab(&grid, p0);
    println!(" U(V) stage  W(um) W1d(um)  L(um) Lbot(um) E_center(V/m) E_edge(V/m) newton");
    for k in 1..=15 {
        let u = 10.0 * k as f64;
        let sol = solve_poisson(&grid, &holes, u, Electrode::A, &cfg.material, &cfg.solver)?;
        let m = extract_metrics(&sol);
        println!(
            "{u:5.0} {:5} {:6.2} {:7.2} {:6.2} {:8.2} {:13.4e} {:11.4e} {:6}",
            m.stage.number(),
            m.w_vertical * 1e6,
            depletion_width_1d(u, p0, &cfg.material) * 1e6,
            m.l_lateral * 1e6,
            m.l_bottom * 1e6,
            m.e_center,
            m.e_edge,
            sol.iterations
        );
    }
    Ok(())
}
