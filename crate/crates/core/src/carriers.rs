//! Local steady-state carrier balance in nitrogen-overcompensated diamond.
//!
//! Reconstructed two-trap balance (no published equation set exists for it):
//!
//! ```text
//! G = c_e · n · N_D⁺              electrons captured by ionized nitrogen
//! G = c_h · p · (N_B − N_D⁺)      holes captured by the photo-neutralized centres
//! p + N_D⁺ = n + N_A⁻,  N_A⁻ = N_B
//! ```
//!
//! In the dark the boron acceptors are fully compensated by nitrogen, so
//! N_D⁺ = N_A⁻ = N_B and no free carriers exist. Under generation a fraction
//! X = N_B − N_D⁺ = p − n of the ionized donors is neutralized; since
//! c_e ≫ c_h, the hole density must exceed the electron density to carry the
//! same recombination flux. NV⁻ is folded into the boron role.

use thiserror::Error;

use crate::config::MaterialParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CarrierError {
    #[error("generation rate must be finite and non-negative (got {0:e})")]
    BadGeneration(f64),
    #[error("carrier balance did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("target hole density {target:e} m^-3 is unreachable (ceiling {ceiling:e} m^-3)")]
    Unreachable { target: f64, ceiling: f64 },
    #[error("target hole density must be finite and non-negative (got {0:e})")]
    BadTarget(f64),
    #[error("pair rate must be positive to calibrate against a nonzero target (got {0:e})")]
    NoGeneration(f64),
}

/// Densities in m⁻³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierState {
    pub p: f64,
    pub n: f64,
    pub n_d_plus: f64,
    pub n_a_minus: f64,
    pub iterations: usize,
    /// Set when an iterate had to be pulled back inside the physical range.
    pub clamped: bool,
}

impl CarrierState {
    /// Relative charge-balance residual.
    pub fn neutrality_residual(&self) -> f64 {
        let scale = self.p + self.n + self.n_d_plus + self.n_a_minus;
        if scale == 0.0 {
            return 0.0;
        }
        (self.p + self.n_d_plus - self.n - self.n_a_minus).abs() / scale
    }
}

const MAX_ITER: usize = 200;
/// Relative change in X below which the iteration stops.
const STEP_TOL: f64 = 1e-15;

/// Hole-capture balance expressed through X = N_B − N_D⁺, scaled by G:
/// h(X) = c_e (p − X)(N_B − X)/G − 1 with p = G/(c_h X). Strictly decreasing
/// on (0, min(√(G/c_h), N_B)), from +∞ to −1.
fn reduced(x: f64, g: f64, mat: &MaterialParams) -> (f64, f64) {
    let nb = mat.n_boron;
    let p = g / (mat.c_h * x);
    let n = p - x;
    let d = nb - x;
    let h = mat.c_e * n * d / g - 1.0;
    // dh/d(ln X)
    let dh = mat.c_e / g * ((-p - x) * d - n * x);
    (h, dh)
}

/// Solves the balance for generation `g` (m⁻³ s⁻¹).
///
/// Charge neutrality and the hole-capture equation are eliminated exactly,
/// leaving one monotone equation in X that is solved by damped Newton in
/// ln X inside a shrinking bracket. Steps that leave the bracket are pulled
/// back to its geometric midpoint and flagged in `clamped`.
pub fn steady_carriers(g: f64, mat: &MaterialParams) -> Result<CarrierState, CarrierError> {
    if !(g.is_finite() && g >= 0.0) {
        return Err(CarrierError::BadGeneration(g));
    }
    let nb = mat.n_boron;
    if g == 0.0 {
        return Ok(CarrierState {
            p: 0.0,
            n: 0.0,
            n_d_plus: nb,
            n_a_minus: nb,
            iterations: 0,
            clamped: false,
        });
    }
    let x_max = (g / mat.c_h).sqrt().min(nb);
    let mut lo = 0.0f64;
    let mut hi = x_max;
    let mut x = 0.5 * x_max;
    let mut clamped = false;
    let mut last = f64::INFINITY;
    for it in 0..MAX_ITER {
        let (h, dh) = reduced(x, g, mat);
        if h == 0.0 || last < STEP_TOL {
            let p = g / (mat.c_h * x);
            return Ok(CarrierState {
                p,
                n: p - x,
                n_d_plus: nb - x,
                n_a_minus: nb,
                iterations: it,
                clamped,
            });
        }
        if h > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x * (-h / dh).clamp(-30.0, 30.0).exp();
        if !(next > lo && next < hi) {
            next = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi.min(x) };
            clamped = true;
        }
        last = ((next - x) / x).abs();
        x = next;
    }
    Err(CarrierError::NoConvergence {
        iterations: MAX_ITER,
        residual: reduced(x, g, mat).0.abs(),
    })
}

/// Highest hole density the calibration accepts: one hole per nitrogen.
pub fn hole_ceiling(mat: &MaterialParams) -> f64 {
    mat.n_nitrogen
}

/// Generation (m⁻³ s⁻¹) that yields hole density `p` at steady state.
pub fn generation_for_holes(p: f64, mat: &MaterialParams) -> f64 {
    if p == 0.0 {
        return 0.0;
    }
    let (ce, ch, nb) = (mat.c_e, mat.c_h, mat.n_boron);
    // Smaller root of c_e X² − (c_e(p + N_B) + c_h p) X + c_e p N_B = 0.
    let b = ce * (p + nb) + ch * p;
    let disc = (b * b - 4.0 * ce * ce * p * nb).max(0.0);
    let x = 2.0 * ce * p * nb / (b + disc.sqrt());
    ch * p * x
}

/// Scale on the per-NV pair rate such that `nv_density · pair_rate · scale`
/// drives the hole density to `target_p`.
pub fn calibrate_generation(
    target_p: f64,
    pair_rate: f64,
    nv_density: f64,
    mat: &MaterialParams,
) -> Result<f64, CarrierError> {
    if !(target_p.is_finite() && target_p >= 0.0) {
        return Err(CarrierError::BadTarget(target_p));
    }
    if target_p == 0.0 {
        return Ok(0.0);
    }
    let ceiling = hole_ceiling(mat);
    if target_p >= ceiling {
        return Err(CarrierError::Unreachable {
            target: target_p,
            ceiling,
        });
    }
    let per_volume = nv_density * pair_rate;
    if !(per_volume > 0.0) {
        return Err(CarrierError::NoGeneration(pair_rate));
    }
    Ok(generation_for_holes(target_p, mat) / per_volume)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use approx::assert_relative_eq;

    fn mat() -> MaterialParams {
        Config::default().material
    }

    /// Bisection on the one-variable reduction f(X) = 0, X = N_B − N_D⁺.
    fn bisect_p(g: f64, m: &MaterialParams) -> f64 {
        let f = |x: f64| m.c_e * (g / (m.c_h * x) - x) * (m.n_boron - x) - g;
        let mut lo = 0.0f64;
        let mut hi = (g / m.c_h).sqrt().min(m.n_boron);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        g / (m.c_h * 0.5 * (lo + hi))
    }

    #[test]
    fn dark_is_insulating() {
        let s = steady_carriers(0.0, &mat()).unwrap();
        assert_eq!((s.p, s.n), (0.0, 0.0));
        assert_eq!(s.n_a_minus, mat().n_boron);
    }

    #[test]
    fn reference_hole_density_reproduced() {
        let m = mat();
        let target = 3.5e20;
        let g = generation_for_holes(target, &m);
        let s = steady_carriers(g, &m).unwrap();
        assert_relative_eq!(s.p, target, max_relative = 1e-10);
        let scale = calibrate_generation(target, 1e4, m.nv_density(), &m).unwrap();
        let s = steady_carriers(scale * 1e4 * m.nv_density(), &m).unwrap();
        assert_relative_eq!(s.p, target, max_relative = 1e-10);
    }

    #[test]
    fn doubled_generation_matches_bisection() {
        let m = mat();
        let g = 2.0 * generation_for_holes(3.5e20, &m);
        let s = steady_carriers(g, &m).unwrap();
        assert_relative_eq!(s.p, bisect_p(g, &m), max_relative = 1e-8);
        // Frozen from the bisection oracle.
        assert_relative_eq!(s.p, 4.950196441337e20, max_relative = 1e-10);
    }

    #[test]
    fn zero_target_zero_scale() {
        assert_eq!(calibrate_generation(0.0, 1e4, 1e20, &mat()).unwrap(), 0.0);
    }

    #[test]
    fn unreachable_target_reported() {
        let m = mat();
        assert!(matches!(
            calibrate_generation(2.0 * m.n_nitrogen, 1e4, 1e20, &m),
            Err(CarrierError::Unreachable { .. })
        ));
    }

    #[test]
    fn negative_generation_rejected() {
        assert!(matches!(steady_carriers(-1.0, &mat()), Err(CarrierError::BadGeneration(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn material() -> impl Strategy<Value = MaterialParams> {
            (-7.0f64..-5.0, -9.0f64..-7.0, 20.0f64..23.0, 0.001f64..0.5).prop_map(|(ce, ch, nn, frac)| {
                let mut m = Config::default().material;
                m.c_e = 10f64.powf(ce) * 1e-6;
                m.c_h = 10f64.powf(ch) * 1e-6;
                m.n_nitrogen = 10f64.powf(nn) * 1e3;
                m.n_boron = m.n_nitrogen * frac;
                m
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn newton_matches_bisection(m in material(), lg in 18.0f64..32.0) {
                let g = 10f64.powf(lg);
                let s = steady_carriers(g, &m).unwrap();
                let b = bisect_p(g, &m);
                prop_assert!((s.p - b).abs() <= 1e-8 * b, "newton {} bisection {}", s.p, b);
                prop_assert!(s.neutrality_residual() < 1e-6);
                prop_assert!(s.p > s.n);
                prop_assert!(s.n_d_plus >= 0.0 && s.n_d_plus <= m.n_nitrogen);
                prop_assert!(s.n_a_minus <= m.n_boron);
            }

            #[test]
            fn holes_increase_with_generation(m in material(), lg in 18.0f64..32.0, f in 1.01f64..10.0) {
                let g = 10f64.powf(lg);
                let a = steady_carriers(g, &m).unwrap();
                let b = steady_carriers(g * f, &m).unwrap();
                prop_assert!(b.p > a.p);
            }

            #[test]
            fn calibration_round_trip(m in material(), lp in 17.0f64..21.0) {
                let target = 10f64.powf(lp).min(0.5 * m.n_nitrogen);
                let g = generation_for_holes(target, &m);
                let s = steady_carriers(g, &m).unwrap();
                prop_assert!((s.p - target).abs() <= 1e-10 * target);
            }
        }
    }
}
