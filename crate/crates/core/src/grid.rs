//! Node-centred rectangular grid over the device cross-section.
//!
//! x runs along the inter-electrode axis from the outer edge of electrode A
//! to the outer edge of electrode B; z runs down from the surface. Node (i, j)
//! sits at (i·h, j·h) and owns a control volume of width `wx(i)` and height
//! `wz(j)`, halved on the box boundary.

use serde::{Deserialize, Serialize};

use crate::config::{DeviceGeometry, Electrode};

/// Minimum number of cells across the illuminated slab.
pub const MIN_SLAB_CELLS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub nz: usize,
    /// Spacing (m).
    pub h: f64,
    /// Node index range [start, end] of electrode A on the surface.
    pub a_nodes: (usize, usize),
    pub b_nodes: (usize, usize),
    /// Number of cells in the illuminated slab.
    pub slab_cells: usize,
    pub slab_depth: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("grid too coarse: {cells} cells across the slab, need at least {MIN_SLAB_CELLS}")]
    TooCoarse { cells: usize },
    #[error("geometry lengths are not multiples of grid_h")]
    Misaligned,
}

fn cells(length: f64, h: f64) -> Result<usize, GridError> {
    let c = length / h;
    let r = c.round();
    if r < 1.0 || (c - r).abs() > 1e-3 * r {
        return Err(GridError::Misaligned);
    }
    Ok(r as usize)
}

impl Grid2D {
    pub fn from_geometry(g: &DeviceGeometry) -> Result<Grid2D, GridError> {
        let h = g.grid_h;
        let w = cells(g.electrode_width, h)?;
        let gap = cells(g.electrode_gap, h)?;
        let depth = cells(g.box_depth, h)?;
        let slab = cells(g.slab_depth, h)?;
        if slab < MIN_SLAB_CELLS {
            return Err(GridError::TooCoarse { cells: slab });
        }
        let nx = 2 * w + gap + 1;
        Ok(Grid2D {
            nx,
            nz: depth + 1,
            h,
            a_nodes: (0, w),
            b_nodes: (w + gap, nx - 1),
            slab_cells: slab,
            slab_depth: slab as f64 * h,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn width(&self) -> f64 {
        (self.nx - 1) as f64 * self.h
    }

    pub fn wx(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx - 1 {
            0.5 * self.h
        } else {
            self.h
        }
    }

    pub fn wz(&self, j: usize) -> f64 {
        if j == 0 || j == self.nz - 1 {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Fraction of the control volume of row `j` lying inside the slab.
    pub fn slab_fraction(&self, j: usize) -> f64 {
        let top = (self.z(j) - 0.5 * self.h).max(0.0);
        let bottom = (self.z(j) + 0.5 * self.h).min(self.z(self.nz - 1));
        let inside = (bottom.min(self.slab_depth) - top).max(0.0);
        inside / (bottom - top)
    }

    /// Last row carrying slab material.
    pub fn slab_bottom_row(&self) -> usize {
        self.slab_cells.min(self.nz - 1)
    }

    pub fn electrode_nodes(&self, e: Electrode) -> (usize, usize) {
        match e {
            Electrode::A => self.a_nodes,
            Electrode::B => self.b_nodes,
        }
    }

    /// Surface column under the middle of electrode `e`.
    pub fn center_column(&self, e: Electrode) -> usize {
        let (a, b) = self.electrode_nodes(e);
        (a + b) / 2
    }

    /// Edge of electrode `e` facing the other electrode.
    pub fn inner_edge_column(&self, e: Electrode) -> usize {
        match e {
            Electrode::A => self.a_nodes.1,
            Electrode::B => self.b_nodes.0,
        }
    }

    pub fn outer_edge_column(&self, e: Electrode) -> usize {
        match e {
            Electrode::A => self.a_nodes.0,
            Electrode::B => self.b_nodes.1,
        }
    }

    /// Column index mirrored about the device midplane.
    pub fn mirror_column(&self, i: usize) -> usize {
        self.nx - 1 - i
    }

    /// Distance of column `i` from the outer edge of electrode `e`, positive
    /// towards the other electrode.
    pub fn x_from_outer_edge(&self, e: Electrode, i: usize) -> f64 {
        match e {
            Electrode::A => self.x(i),
            Electrode::B => self.x(self.mirror_column(i)),
        }
    }

    /// Surface node belongs to an electrode.
    pub fn electrode_at(&self, i: usize) -> Option<Electrode> {
        if (self.a_nodes.0..=self.a_nodes.1).contains(&i) {
            Some(Electrode::A)
        } else if (self.b_nodes.0..=self.b_nodes.1).contains(&i) {
            Some(Electrode::B)
        } else {
            None
        }
    }
}
