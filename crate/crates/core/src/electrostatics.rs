//! Nonlinear Poisson solve of the biased contact pair over the hole slab.
//!
//! Holes in the illuminated slab follow a Boltzmann factor relative to the
//! quasi-neutral bulk held at 0 V, so a node with slab acceptor density N
//! carries ρ = q·N·(e^{−φ/V_T} − 1). Non-illuminated diamond is a perfect
//! dielectric. Positive electrode at +U, the other at 0, all remaining
//! boundaries Neumann. The discretization is finite-volume on the node grid
//! (per unit length along the illumination axis), solved by damped Newton
//! with a preconditioned conjugate-gradient inner solve.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Electrode, MaterialParams, SolverSettings};
use crate::constants::{PhysicalConstants, Q};
use crate::grid::{Grid2D, GridError};

/// Exponent cap for the Boltzmann factor, in units of V_T.
const EXP_CAP: f64 = 200.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElectrostaticsError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("Newton did not converge at U = {u} V after {iterations} iterations (residual {residual:e})")]
    Divergence { u: f64, iterations: usize, residual: f64 },
    #[error("linear solve stalled at U = {u} V (relative residual {residual:e} after {iterations} iterations)")]
    LinearSolve { u: f64, iterations: usize, residual: f64 },
    #[error("hole map has {got} entries, grid has {expected}")]
    MapSize { got: usize, expected: usize },
    #[error("hole map entries must be finite and non-negative")]
    BadMap,
    #[error("solutions live on different grids")]
    GridMismatch,
}

/// Abrupt-junction depletion width √(2 ε₀ ε_s U / (q p₀)) (m).
pub fn depletion_width_1d(u: f64, p0: f64, mat: &MaterialParams) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    (2.0 * PhysicalConstants::CODATA.permittivity(mat.eps_s) * u / (Q * p0)).sqrt()
}

/// Saturated contact field q·p₀·d/(ε₀ε_s) of a fully depleted slab of depth d.
pub fn slab_saturation_field(p0: f64, slab_depth: f64, mat: &MaterialParams) -> f64 {
    Q * p0 * slab_depth / PhysicalConstants::CODATA.permittivity(mat.eps_s)
}

/// Bias at which the 1D depletion width reaches the slab bottom.
pub fn slab_reach_voltage(p0: f64, slab_depth: f64, mat: &MaterialParams) -> f64 {
    Q * p0 * slab_depth * slab_depth / (2.0 * PhysicalConstants::CODATA.permittivity(mat.eps_s))
}

/// Per-node quasi-neutral hole density (m⁻³), already weighted by the slab
/// fraction of each control volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleMap {
    pub values: Vec<f64>,
}

impl HoleMap {
    /// Uniform density `p0` over the illuminated slab.
    pub fn uniform_slab(grid: &Grid2D, p0: f64) -> HoleMap {
        let mut values = vec![0.0; grid.len()];
        for j in 0..grid.nz {
            let f = grid.slab_fraction(j);
            for i in 0..grid.nx {
                values[grid.idx(i, j)] = p0 * f;
            }
        }
        HoleMap { values }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Converged potential with derived fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSolution {
    pub grid: Grid2D,
    pub phi: Vec<f64>,
    pub ex: Vec<f64>,
    pub ez: Vec<f64>,
    pub rho: Vec<f64>,
    /// Quasi-neutral density at each node (the input map).
    pub dopant: Vec<f64>,
    pub holes: Vec<f64>,
    pub depleted: Vec<bool>,
    pub u_applied: f64,
    pub positive: Electrode,
    pub eps: f64,
    pub thermal_voltage: f64,
    pub threshold: f64,
    pub iterations: usize,
    pub residual: f64,
}

struct Problem<'a> {
    grid: &'a Grid2D,
    eps: f64,
    vt: f64,
    dop: &'a [f64],
    vol: Vec<f64>,
    /// Coupling across the vertical face between (i, j) and (i+1, j), per row.
    cx: Vec<f64>,
    /// Coupling across the horizontal face between (i, j) and (i, j+1), per column.
    cz: Vec<f64>,
    dirichlet: Vec<bool>,
}

impl<'a> Problem<'a> {
    fn new(grid: &'a Grid2D, eps: f64, vt: f64, dop: &'a [f64]) -> Problem<'a> {
        let mut vol = vec![0.0; grid.len()];
        for j in 0..grid.nz {
            for i in 0..grid.nx {
                vol[grid.idx(i, j)] = grid.wx(i) * grid.wz(j);
            }
        }
        let cx = (0..grid.nz).map(|j| eps * grid.wz(j) / grid.h).collect();
        let cz = (0..grid.nx).map(|i| eps * grid.wx(i) / grid.h).collect();
        let mut dirichlet = vec![false; grid.len()];
        for e in [Electrode::A, Electrode::B] {
            let (a, b) = grid.electrode_nodes(e);
            for d in dirichlet.iter_mut().take(b + 1).skip(a) {
                *d = true;
            }
        }
        Problem {
            grid,
            eps,
            vt,
            dop,
            vol,
            cx,
            cz,
            dirichlet,
        }
    }

    #[inline]
    fn boltzmann(&self, phi: f64) -> f64 {
        (-(phi / self.vt).max(-EXP_CAP)).exp()
    }

    /// K·v for the full linear operator (Dirichlet rows included).
    fn laplacian_at(&self, v: &[f64], i: usize, j: usize) -> f64 {
        let g = self.grid;
        let n = g.idx(i, j);
        let mut s = 0.0;
        if i > 0 {
            s += self.cx[j] * (v[n] - v[n - 1]);
        }
        if i + 1 < g.nx {
            s += self.cx[j] * (v[n] - v[n + 1]);
        }
        if j > 0 {
            s += self.cz[i] * (v[n] - v[n - g.nx]);
        }
        if j + 1 < g.nz {
            s += self.cz[i] * (v[n] - v[n + g.nx]);
        }
        s
    }

    fn charge(&self, n: usize, phi: f64) -> f64 {
        Q * self.dop[n] * (self.boltzmann(phi) - 1.0)
    }

    /// F = K·φ − ρ(φ)·V on every node (zero on Dirichlet nodes).
    fn residual(&self, phi: &[f64], out: &mut [f64]) {
        let g = self.grid;
        for j in 0..g.nz {
            for i in 0..g.nx {
                let n = g.idx(i, j);
                out[n] = if self.dirichlet[n] {
                    0.0
                } else {
                    self.laplacian_at(phi, i, j) - self.charge(n, phi[n]) * self.vol[n]
                };
            }
        }
    }

    fn neighbour_sum(&self, i: usize, j: usize) -> f64 {
        let g = self.grid;
        let mut s = 0.0;
        if i > 0 {
            s += self.cx[j];
        }
        if i + 1 < g.nx {
            s += self.cx[j];
        }
        if j > 0 {
            s += self.cz[i];
        }
        if j + 1 < g.nz {
            s += self.cz[i];
        }
        s
    }
}

/// Jacobian J = K + diag(σ) restricted to free nodes, applied matrix-free.
struct Jacobian<'p, 'a> {
    p: &'p Problem<'a>,
    diag: Vec<f64>,
}

impl Jacobian<'_, '_> {
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let g = self.p.grid;
        for j in 0..g.nz {
            for i in 0..g.nx {
                let n = g.idx(i, j);
                out[n] = if self.p.dirichlet[n] {
                    0.0
                } else {
                    self.diag[n] * v[n] - self.offdiag_sum(v, i, j)
                };
            }
        }
    }

    /// Σ_nb c·v_nb over free neighbours.
    #[inline]
    fn offdiag_sum(&self, v: &[f64], i: usize, j: usize) -> f64 {
        let p = self.p;
        let g = p.grid;
        let n = g.idx(i, j);
        let mut s = 0.0;
        if i > 0 && !p.dirichlet[n - 1] {
            s += p.cx[j] * v[n - 1];
        }
        if i + 1 < g.nx && !p.dirichlet[n + 1] {
            s += p.cx[j] * v[n + 1];
        }
        if j > 0 && !p.dirichlet[n - g.nx] {
            s += p.cz[i] * v[n - g.nx];
        }
        if j + 1 < g.nz && !p.dirichlet[n + g.nx] {
            s += p.cz[i] * v[n + g.nx];
        }
        s
    }

    /// Symmetric Gauss-Seidel preconditioner: z = (D+U)⁻¹ D (D+L)⁻¹ r.
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        let p = self.p;
        let g = p.grid;
        z.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..g.nz {
            for i in 0..g.nx {
                let n = g.idx(i, j);
                if !p.dirichlet[n] {
                    z[n] = (r[n] + self.lower_sum(z, i, j)) / self.diag[n];
                }
            }
        }
        for j in (0..g.nz).rev() {
            for i in (0..g.nx).rev() {
                let n = g.idx(i, j);
                if !p.dirichlet[n] {
                    // Forward result y scaled by D, then back-substitute with U.
                    z[n] += self.upper_sum(z, i, j) / self.diag[n];
                }
            }
        }
    }

    #[inline]
    fn lower_sum(&self, v: &[f64], i: usize, j: usize) -> f64 {
        let p = self.p;
        let g = p.grid;
        let n = g.idx(i, j);
        let mut s = 0.0;
        if i > 0 && !p.dirichlet[n - 1] {
            s += p.cx[j] * v[n - 1];
        }
        if j > 0 && !p.dirichlet[n - g.nx] {
            s += p.cz[i] * v[n - g.nx];
        }
        s
    }

    #[inline]
    fn upper_sum(&self, v: &[f64], i: usize, j: usize) -> f64 {
        let p = self.p;
        let g = p.grid;
        let n = g.idx(i, j);
        let mut s = 0.0;
        if i + 1 < g.nx && !p.dirichlet[n + 1] {
            s += p.cx[j] * v[n + 1];
        }
        if j + 1 < g.nz && !p.dirichlet[n + g.nx] {
            s += p.cz[i] * v[n + g.nx];
        }
        s
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG; returns (iterations, relative residual).
fn pcg(jac: &Jacobian, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> (usize, f64) {
    let n = b.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return (0, 0.0);
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    jac.precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        jac.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rel = dot(&r, &r).sqrt() / b_norm;
        if rel < tol {
            return (it, rel);
        }
        jac.precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    (max_iter, dot(&r, &r).sqrt() / b_norm)
}

fn amax_free(v: &[f64], dirichlet: &[bool]) -> f64 {
    v.iter().zip(dirichlet).filter(|(_, d)| !**d).map(|(x, _)| x.abs()).fold(0.0, f64::max)
}

fn norm_free(v: &[f64], dirichlet: &[bool]) -> f64 {
    v.iter().zip(dirichlet).filter(|(_, d)| !**d).map(|(x, _)| x * x).sum::<f64>().sqrt()
}

/// Solves for the potential with `positive` held at `u` and the other
/// electrode grounded.
pub fn solve_poisson(
    grid: &Grid2D,
    holes: &HoleMap,
    u: f64,
    positive: Electrode,
    mat: &MaterialParams,
    settings: &SolverSettings,
) -> Result<FieldSolution, ElectrostaticsError> {
    if grid.slab_cells < crate::grid::MIN_SLAB_CELLS {
        return Err(GridError::TooCoarse { cells: grid.slab_cells }.into());
    }
    if holes.values.len() != grid.len() {
        return Err(ElectrostaticsError::MapSize {
            got: holes.values.len(),
            expected: grid.len(),
        });
    }
    if holes.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(ElectrostaticsError::BadMap);
    }
    let consts = PhysicalConstants::CODATA;
    let eps = consts.permittivity(mat.eps_s);
    let vt = consts.thermal_voltage(mat.temperature);
    let prob = Problem::new(grid, eps, vt, &holes.values);
    let n = grid.len();

    let mut phi = vec![0.0; n];
    let (pa, pb) = grid.electrode_nodes(positive);
    for v in phi.iter_mut().take(pb + 1).skip(pa) {
        *v = u;
    }
    let p_ref = holes.max();
    let scale = if p_ref > 0.0 {
        Q * p_ref * grid.h * grid.h
    } else {
        eps * u.abs().max(1.0)
    };

    let mut f = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut f_trial = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut step = vec![0.0; n];
    prob.residual(&phi, &mut f);
    let mut iterations = 0;
    let mut res = amax_free(&f, &prob.dirichlet) / scale;
    while res >= settings.newton_tolerance {
        if iterations >= settings.newton_max_iterations {
            return Err(ElectrostaticsError::Divergence {
                u,
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let mut diag = vec![0.0; n];
        for j in 0..grid.nz {
            for i in 0..grid.nx {
                let k = grid.idx(i, j);
                if !prob.dirichlet[k] {
                    let sigma = Q * prob.dop[k] * prob.vol[k] / vt * prob.boltzmann(phi[k]);
                    diag[k] = prob.neighbour_sum(i, j) + sigma;
                }
            }
        }
        let jac = Jacobian { p: &prob, diag };
        for k in 0..n {
            rhs[k] = -f[k];
        }
        let (lin_it, lin_res) = pcg(&jac, &rhs, &mut step, settings.linear_tolerance, settings.linear_max_iterations);
        if lin_res >= settings.linear_tolerance {
            return Err(ElectrostaticsError::LinearSolve {
                u,
                iterations: lin_it,
                residual: lin_res,
            });
        }
        let f_norm = norm_free(&f, &prob.dirichlet);
        let mut lambda = 1.0;
        loop {
            for k in 0..n {
                trial[k] = phi[k] + lambda * step[k];
            }
            prob.residual(&trial, &mut f_trial);
            if norm_free(&f_trial, &prob.dirichlet) < f_norm || lambda < 1e-8 {
                break;
            }
            lambda *= settings.damping;
        }
        std::mem::swap(&mut phi, &mut trial);
        std::mem::swap(&mut f, &mut f_trial);
        let new_res = amax_free(&f, &prob.dirichlet) / scale;
        if !new_res.is_finite() {
            return Err(ElectrostaticsError::Divergence {
                u,
                iterations,
                residual: new_res,
            });
        }
        res = new_res;
    }

    Ok(assemble(&prob, phi, u, positive, settings.depletion_threshold, iterations, res))
}

fn assemble(
    prob: &Problem,
    phi: Vec<f64>,
    u: f64,
    positive: Electrode,
    threshold: f64,
    iterations: usize,
    residual: f64,
) -> FieldSolution {
    let g = prob.grid;
    let n = g.len();
    let mut ex = vec![0.0; n];
    let mut ez = vec![0.0; n];
    let mut rho = vec![0.0; n];
    let mut holes = vec![0.0; n];
    let mut depleted = vec![false; n];
    for j in 0..g.nz {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            ex[k] = -derivative(&phi, g.nx, g.h, i, k, 1);
            ez[k] = -derivative(&phi, g.nz, g.h, j, k, g.nx);
            let dop = prob.dop[k];
            holes[k] = dop * prob.boltzmann(phi[k]);
            rho[k] = prob.charge(k, phi[k]);
            depleted[k] = dop > 0.0 && holes[k] < threshold * dop;
        }
    }
    // Surface field from the electrode charge on contact nodes.
    for i in 0..g.nx {
        let k = g.idx(i, 0);
        if prob.dirichlet[k] {
            ez[k] = contact_flux(prob, &phi, i) / (prob.eps * g.wx(i));
        }
    }
    FieldSolution {
        grid: g.clone(),
        phi,
        ex,
        ez,
        rho,
        dopant: prob.dop.to_vec(),
        holes,
        depleted,
        u_applied: u,
        positive,
        eps: prob.eps,
        thermal_voltage: prob.vt,
        threshold,
        iterations,
        residual,
    }
}

/// Net flux leaving the control volume of surface node `i`, i.e. the electrode
/// charge per unit length attributable to that node.
fn contact_flux(prob: &Problem, phi: &[f64], i: usize) -> f64 {
    let k = prob.grid.idx(i, 0);
    prob.laplacian_at(phi, i, 0) - prob.charge(k, phi[k]) * prob.vol[k]
}

fn derivative(v: &[f64], len: usize, h: f64, pos: usize, k: usize, stride: usize) -> f64 {
    if len < 2 {
        0.0
    } else if pos == 0 {
        (v[k + stride] - v[k]) / h
    } else if pos == len - 1 {
        (v[k] - v[k - stride]) / h
    } else {
        (v[k + stride] - v[k - stride]) / (2.0 * h)
    }
}

/// Depletion stage of the region under the positive electrode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    /// Growth towards the slab bottom.
    Vertical = 1,
    /// Slab bottom reached under the contact centre.
    SlabBottom = 2,
    /// Lateral growth beyond the contact edge.
    Lateral = 3,
}

impl Stage {
    pub fn number(self) -> u8 {
        self as u8
    }
}

/// Lengths in m, fields in V/m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepletionMetrics {
    /// Mask reach beyond the inner edge along the slab bottom.
    pub l_bottom: f64,
    /// Charge-equivalent depleted depth under the contact centre.
    pub w_vertical: f64,
    /// Charge-equivalent lateral extension beyond the inner contact edge.
    pub l_lateral: f64,
    pub e_center: f64,
    pub e_edge: f64,
    pub stage: Stage,
}

impl FieldSolution {
    fn hole_deficit(&self, k: usize) -> f64 {
        let d = self.dopant[k];
        if d > 0.0 {
            (1.0 - self.holes[k] / d).max(0.0)
        } else {
            0.0
        }
    }

    /// Depleted depth at column `i`, integrating the hole deficit over the
    /// slab so that a sharp-edged junction returns its exact depth.
    pub fn column_depletion(&self, i: usize) -> f64 {
        let g = &self.grid;
        (0..g.nz)
            .map(|j| self.hole_deficit(g.idx(i, j)) * g.slab_fraction(j) * g.wz(j))
            .sum()
    }

    /// Depth of the last depleted node under column `i`, by the mask.
    pub fn masked_depth(&self, i: usize) -> f64 {
        let g = &self.grid;
        (0..g.nz)
            .filter(|&j| self.depleted[g.idx(i, j)])
            .map(|j| g.z(j))
            .fold(0.0, f64::max)
    }

    /// Charge-equivalent depleted length along row `j`, beyond the inner
    /// edge of the positive electrode (the edge node counts half).
    pub fn depleted_reach(&self, j: usize) -> f64 {
        let g = &self.grid;
        let pos = self.positive;
        let edge = g.inner_edge_column(pos);
        let far = g.inner_edge_column(pos.other());
        let cols: Vec<usize> = match pos {
            Electrode::A => (edge..=far).collect(),
            Electrode::B => (far..=edge).rev().collect(),
        };
        cols.iter()
            .enumerate()
            .map(|(n, &i)| {
                let w = if n == 0 || n == cols.len() - 1 { 0.5 * g.h } else { g.h };
                w * self.hole_deficit(g.idx(i, j))
            })
            .sum()
    }

    /// Contact-normal field at surface node `i` of an electrode.
    pub fn surface_field(&self, i: usize) -> f64 {
        self.ez[self.grid.idx(i, 0)]
    }

    pub fn max_potential_error_on_contacts(&self) -> f64 {
        let g = &self.grid;
        let mut err: f64 = 0.0;
        for e in [Electrode::A, Electrode::B] {
            let target = if e == self.positive { self.u_applied } else { 0.0 };
            let (a, b) = g.electrode_nodes(e);
            for i in a..=b {
                err = err.max((self.phi[g.idx(i, 0)] - target).abs());
            }
        }
        err
    }

    /// Quasi-neutral density scale p₀ of the slab.
    pub fn p0(&self) -> f64 {
        self.dopant.iter().cloned().fold(0.0, f64::max)
    }
}

/// Depletion metrics of the region under the positive electrode.
pub fn extract_metrics(sol: &FieldSolution) -> DepletionMetrics {
    let g = &sol.grid;
    let pos = sol.positive;
    let ic = g.center_column(pos);
    let edge = g.inner_edge_column(pos);
    let outer = g.outer_edge_column(pos);
    let far_edge = g.inner_edge_column(pos.other());

    let w_vertical = sol.column_depletion(ic);
    let cols: Vec<usize> = match pos {
        Electrode::A => (edge..=far_edge).collect(),
        Electrode::B => (far_edge..=edge).rev().collect(),
    };
    let area: f64 = cols
        .iter()
        .enumerate()
        .map(|(n, &i)| {
            let w = if n == 0 || n == cols.len() - 1 { 0.5 * g.h } else { g.h };
            w * sol.column_depletion(i)
        })
        .sum();
    let l_lateral = area / g.slab_depth;

    let e_center = sol.surface_field(ic).abs();
    let e_edge = sol.surface_field(edge).abs().max(sol.surface_field(outer).abs());

    let bottom = g.slab_bottom_row();
    let stage = if !sol.depleted[g.idx(ic, bottom)] {
        Stage::Vertical
    } else if !sol.depleted[g.idx(edge, bottom)] {
        Stage::SlabBottom
    } else {
        Stage::Lateral
    };
    DepletionMetrics {
        l_bottom: sol.depleted_reach(bottom),
        w_vertical,
        l_lateral,
        e_center,
        e_edge,
        stage,
    }
}

/// Gauss-law check on the control-volume union of nodes [i0, i1] × [j0, j1]:
/// relative mismatch between the outward flux of εE and the enclosed charge.
pub fn gauss_residual(sol: &FieldSolution, i0: usize, i1: usize, j0: usize, j1: usize) -> f64 {
    let g = &sol.grid;
    let eps = sol.eps;
    let face = |a: usize, b: usize| -> f64 { (sol.phi[a] - sol.phi[b]) / g.h };
    let mut flux = 0.0;
    let mut magnitude = 0.0;
    let mut add = |v: f64| {
        flux += v;
        magnitude += v.abs();
    };
    for j in j0..=j1 {
        if i0 > 0 {
            add(eps * g.wz(j) * face(g.idx(i0, j), g.idx(i0 - 1, j)));
        }
        if i1 + 1 < g.nx {
            add(eps * g.wz(j) * face(g.idx(i1, j), g.idx(i1 + 1, j)));
        }
    }
    for i in i0..=i1 {
        if j0 > 0 {
            add(eps * g.wx(i) * face(g.idx(i, j0), g.idx(i, j0 - 1)));
        } else if sol.grid.electrode_at(i).is_some() {
            // Flux into a contact equals the electrode charge on that node.
            let k = g.idx(i, 0);
            let interior = {
                let mut s = 0.0;
                if i > 0 {
                    s += eps * g.wz(0) * face(k, k - 1);
                }
                if i + 1 < g.nx {
                    s += eps * g.wz(0) * face(k, k + 1);
                }
                s += eps * g.wx(i) * face(k, k + g.nx);
                s
            };
            let q_node = sol.rho[k] * g.wx(i) * g.wz(0);
            add(q_node - interior);
        }
        if j1 + 1 < g.nz {
            add(eps * g.wx(i) * face(g.idx(i, j1), g.idx(i, j1 + 1)));
        }
    }
    let mut charge = 0.0;
    let mut charge_mag = 0.0;
    for j in j0..=j1 {
        for i in i0..=i1 {
            let q = sol.rho[g.idx(i, j)] * g.wx(i) * g.wz(j);
            charge += q;
            charge_mag += q.abs();
        }
    }
    let denom = magnitude.max(charge_mag);
    if denom == 0.0 {
        0.0
    } else {
        (flux - charge).abs() / denom
    }
}

/// Optical filter for ΔPL imaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlFilter {
    NvMinus,
    NvZero,
}

impl std::str::FromStr for PlFilter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nvminus" | "nv-" | "NV-" => Ok(PlFilter::NvMinus),
            "nvzero" | "nv0" | "NV0" => Ok(PlFilter::NvZero),
            other => Err(format!("unknown filter `{other}` (nvminus|nvzero)")),
        }
    }
}

/// ΔPL line profile: x from the outer edge of the positive electrode (m),
/// positive towards the negative electrode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlProfile {
    pub x: Vec<f64>,
    pub delta_pl: Vec<f64>,
    pub filter: PlFilter,
}

/// Change in PL between two solves. Depletion stabilizes NV⁻, so the NV⁻
/// signal tracks the change of the depleted column height and the NV⁰
/// signal is its negative scaled by `nv_zero_alpha`. Normalized at the
/// positive-electrode midpoint.
pub fn delta_pl_profile(
    sol_on: &FieldSolution,
    sol_off: &FieldSolution,
    filter: PlFilter,
    nv_zero_alpha: f64,
) -> Result<PlProfile, ElectrostaticsError> {
    if sol_on.grid != sol_off.grid {
        return Err(ElectrostaticsError::GridMismatch);
    }
    let g = &sol_on.grid;
    let pos = sol_on.positive;
    let order: Vec<usize> = match pos {
        Electrode::A => (0..g.nx).collect(),
        Electrode::B => (0..g.nx).rev().collect(),
    };
    // Imaging averages a few pixel rows across the beam; the model is uniform
    // along that direction, so the band average is the column value itself.
    let raw: Vec<f64> = order
        .iter()
        .map(|&i| sol_on.column_depletion(i) - sol_off.column_depletion(i))
        .collect();
    let ic = g.center_column(pos);
    let reference = sol_on.column_depletion(ic) - sol_off.column_depletion(ic);
    let sign = match filter {
        PlFilter::NvMinus => 1.0,
        PlFilter::NvZero => -nv_zero_alpha,
    };
    let delta_pl = raw
        .iter()
        .map(|v| if reference != 0.0 { sign * v / reference } else { 0.0 })
        .collect();
    Ok(PlProfile {
        x: order.iter().map(|&i| g.x_from_outer_edge(pos, i)).collect(),
        delta_pl,
        filter,
    })
}

/// Writes the field map as CSV (x, z in µm; φ in V; E in V/m).
pub fn write_field_csv<W: Write>(sol: &FieldSolution, mut out: W) -> std::io::Result<()> {
    writeln!(out, "x_um,z_um,phi_V,Ex_V_per_m,Ez_V_per_m,depleted")?;
    let g = &sol.grid;
    for j in 0..g.nz {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{}",
                g.x(i) * 1e6,
                g.z(j) * 1e6,
                sol.phi[k],
                sol.ex[k],
                sol.ez[k],
                u8::from(sol.depleted[k])
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use approx::assert_relative_eq;

    const P0: f64 = 3.5e20;

    fn setup(h: f64) -> (Config, Grid2D, HoleMap) {
        let cfg = Config::default();
        let grid = Grid2D::from_geometry(&cfg.geometry.with_grid(h)).unwrap();
        let holes = HoleMap::uniform_slab(&grid, P0);
        (cfg, grid, holes)
    }

    fn solve(u: f64, pos: Electrode, h: f64) -> FieldSolution {
        let (cfg, grid, holes) = setup(h);
        solve_poisson(&grid, &holes, u, pos, &cfg.material, &cfg.solver).unwrap()
    }

    #[test]
    fn one_dimensional_width() {
        let mat = Config::default().material;
        // Hand evaluation: sqrt(2 * 8.8541878128e-12 * 5.7 * 50 / (1.602176634e-19 * 3.5e20)).
        let hand = (2.0f64 * 8.8541878128e-12 * 5.7 * 50.0 / (1.602176634e-19 * 3.5e20)).sqrt();
        let w = depletion_width_1d(50.0, P0, &mat);
        assert_relative_eq!(w, hand, max_relative = 1e-12);
        assert_relative_eq!(w, 9.49e-6, max_relative = 1e-3);
        assert_eq!(depletion_width_1d(0.0, P0, &mat), 0.0);
        assert_relative_eq!(depletion_width_1d(200.0, P0, &mat), 2.0 * w, max_relative = 1e-12);
    }

    #[test]
    fn zero_bias_is_trivial() {
        let s = solve(0.0, Electrode::A, 1e-6);
        assert!(s.phi.iter().all(|&v| v == 0.0));
        assert!(s.ex.iter().chain(&s.ez).all(|&v| v == 0.0));
        assert!(s.depleted.iter().all(|&d| !d));
    }

    #[test]
    fn low_bias_matches_1d() {
        let mat = Config::default().material;
        for u in [10.0, 20.0, 30.0] {
            let s = solve(u, Electrode::A, 1e-6);
            let m = extract_metrics(&s);
            let w1 = depletion_width_1d(u, P0, &mat);
            assert!((m.w_vertical - w1).abs() / w1 < 0.1, "U={u}: {} vs {}", m.w_vertical, w1);
            assert_eq!(m.stage, Stage::Vertical);
        }
    }

    #[test]
    fn full_bias_reaches_stage_three() {
        let s = solve(150.0, Electrode::A, 1e-6);
        let m = extract_metrics(&s);
        assert_eq!(m.stage, Stage::Lateral);
        assert!(m.l_lateral > 1e-6);
        assert_relative_eq!(m.w_vertical, 10e-6, max_relative = 0.01);
        assert!(m.e_edge > m.e_center);
    }

    #[test]
    fn dirichlet_values_exact() {
        let s = solve(80.0, Electrode::B, 1e-6);
        assert!(s.max_potential_error_on_contacts() <= 1e-12);
    }

    #[test]
    fn gauss_law_on_subregions() {
        let s = solve(100.0, Electrode::A, 1e-6);
        let g = &s.grid;
        for (i0, i1, j0, j1) in [(10, 40, 2, 6), (0, 80, 0, g.nz - 1), (45, 60, 0, 5), (0, g.nx - 1, 0, g.nz - 1)] {
            let r = gauss_residual(&s, i0, i1, j0, j1);
            assert!(r < 1e-6, "{i0}..{i1} x {j0}..{j1}: {r}");
        }
    }

    #[test]
    fn mirror_symmetry() {
        let a = solve(120.0, Electrode::A, 1e-6);
        let b = solve(120.0, Electrode::B, 1e-6);
        let g = &a.grid;
        let mut err: f64 = 0.0;
        for j in 0..g.nz {
            for i in 0..g.nx {
                err = err.max((a.phi[g.idx(i, j)] - b.phi[g.idx(g.mirror_column(i), j)]).abs());
            }
        }
        assert!(err < 1e-10 * 120.0, "{err}");
        let ma = extract_metrics(&a);
        let mb = extract_metrics(&b);
        assert_relative_eq!(ma.e_center, mb.e_center, max_relative = 1e-9);
        assert_relative_eq!(ma.l_lateral, mb.l_lateral, max_relative = 1e-9);
    }

    #[test]
    fn profile_conventions() {
        let (cfg, grid, holes) = setup(1e-6);
        let off = solve_poisson(&grid, &holes, 0.0, Electrode::A, &cfg.material, &cfg.solver).unwrap();
        let on = solve_poisson(&grid, &holes, 150.0, Electrode::A, &cfg.material, &cfg.solver).unwrap();
        let same = delta_pl_profile(&on, &on, PlFilter::NvMinus, 0.6).unwrap();
        assert!(same.delta_pl.iter().all(|&v| v == 0.0));
        let minus = delta_pl_profile(&on, &off, PlFilter::NvMinus, 0.6).unwrap();
        let zero = delta_pl_profile(&on, &off, PlFilter::NvZero, 0.6).unwrap();
        let mid = minus.x.iter().position(|&x| (x - 25e-6).abs() < 1e-12).unwrap();
        assert_eq!(minus.delta_pl[mid], 1.0);
        assert!(minus.delta_pl[..50].iter().all(|&v| v > 0.9));
        for (a, b) in minus.delta_pl.iter().zip(&zero.delta_pl) {
            assert_relative_eq!(*b, -0.6 * a, max_relative = 1e-15);
        }
    }
}
