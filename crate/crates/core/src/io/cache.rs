//! Binary cache of field solutions, keyed by the solve inputs.
//!
//! Layout (little endian): magic `FEDMRFS\0`, u32 version, 32-byte key,
//! grid (nx, nz: u64; h: f64; electrode node ranges and slab cells: u64;
//! slab depth: f64), solve scalars, then the node arrays φ, Ex, Ez, ρ,
//! dopant, holes as f64 and the depletion mask as u8.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{Electrode, MaterialParams, SolverSettings};
use crate::electrostatics::{FieldSolution, HoleMap};
use crate::grid::Grid2D;

pub const MAGIC: &[u8; 8] = b"FEDMRFS\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("not a field cache file")]
    BadMagic,
    #[error("cache version {0} unsupported (expected {VERSION})")]
    Version(u32),
    #[error("cache entry belongs to different inputs")]
    KeyMismatch,
    #[error("corrupt cache entry: {0}")]
    Corrupt(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Digest of everything that determines a solve.
pub fn cache_key(
    grid: &Grid2D,
    holes: &HoleMap,
    u: f64,
    positive: Electrode,
    mat: &MaterialParams,
    solver: &SolverSettings,
) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(VERSION.to_le_bytes());
    h.update(serde_json::to_vec(grid).expect("grid serializes"));
    for v in &holes.values {
        h.update(v.to_le_bytes());
    }
    h.update(u.to_le_bytes());
    h.update([positive as u8]);
    h.update(serde_json::to_vec(mat).expect("material serializes"));
    h.update(serde_json::to_vec(solver).expect("solver serializes"));
    h.finalize().into()
}

fn put_array<W: Write>(w: &mut W, v: &[f64]) -> io::Result<()> {
    v.iter().try_for_each(|x| w.write_f64::<LE>(*x))
}

fn get_array<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f64>> {
    (0..n).map(|_| r.read_f64::<LE>()).collect()
}

fn get_counts<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<usize>> {
    (0..n).map(|_| r.read_u64::<LE>().map(|v| v as usize)).collect()
}

pub fn write_solution<W: Write>(mut w: W, key: &[u8; 32], s: &FieldSolution) -> io::Result<()> {
    let g = &s.grid;
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_all(key)?;
    for n in [g.nx, g.nz] {
        w.write_u64::<LE>(n as u64)?;
    }
    w.write_f64::<LE>(g.h)?;
    for n in [g.a_nodes.0, g.a_nodes.1, g.b_nodes.0, g.b_nodes.1, g.slab_cells] {
        w.write_u64::<LE>(n as u64)?;
    }
    w.write_f64::<LE>(g.slab_depth)?;
    w.write_f64::<LE>(s.u_applied)?;
    w.write_u8(s.positive as u8)?;
    for x in [s.eps, s.thermal_voltage, s.threshold] {
        w.write_f64::<LE>(x)?;
    }
    w.write_u64::<LE>(s.iterations as u64)?;
    w.write_f64::<LE>(s.residual)?;
    for a in [&s.phi, &s.ex, &s.ez, &s.rho, &s.dopant, &s.holes] {
        put_array(&mut w, a)?;
    }
    w.write_all(&s.depleted.iter().map(|&d| u8::from(d)).collect::<Vec<_>>())?;
    w.flush()
}

pub fn read_solution<R: Read>(mut r: R, key: &[u8; 32]) -> Result<FieldSolution, CacheError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let version = r.read_u32::<LE>()?;
    if version != VERSION {
        return Err(CacheError::Version(version));
    }
    let mut stored = [0u8; 32];
    r.read_exact(&mut stored)?;
    if &stored != key {
        return Err(CacheError::KeyMismatch);
    }
    let dims = get_counts(&mut r, 2)?;
    let h = r.read_f64::<LE>()?;
    let nodes = get_counts(&mut r, 5)?;
    let slab_depth = r.read_f64::<LE>()?;
    let grid = Grid2D {
        nx: dims[0],
        nz: dims[1],
        h,
        a_nodes: (nodes[0], nodes[1]),
        b_nodes: (nodes[2], nodes[3]),
        slab_cells: nodes[4],
        slab_depth,
    };
    let n = grid.nx.checked_mul(grid.nz).ok_or(CacheError::Corrupt("grid size"))?;
    if n > 1 << 28 {
        return Err(CacheError::Corrupt("grid size"));
    }
    let u_applied = r.read_f64::<LE>()?;
    let positive = match r.read_u8()? {
        0 => Electrode::A,
        1 => Electrode::B,
        _ => return Err(CacheError::Corrupt("electrode")),
    };
    let eps = r.read_f64::<LE>()?;
    let thermal_voltage = r.read_f64::<LE>()?;
    let threshold = r.read_f64::<LE>()?;
    let iterations = r.read_u64::<LE>()? as usize;
    let residual = r.read_f64::<LE>()?;
    let phi = get_array(&mut r, n)?;
    let ex = get_array(&mut r, n)?;
    let ez = get_array(&mut r, n)?;
    let rho = get_array(&mut r, n)?;
    let dopant = get_array(&mut r, n)?;
    let holes = get_array(&mut r, n)?;
    let mut mask = vec![0u8; n];
    r.read_exact(&mut mask)?;
    Ok(FieldSolution {
        grid,
        phi,
        ex,
        ez,
        rho,
        dopant,
        holes,
        depleted: mask.into_iter().map(|b| b != 0).collect(),
        u_applied,
        positive,
        eps,
        thermal_voltage,
        threshold,
        iterations,
        residual,
    })
}

/// Directory of cache entries named by their hex key.
#[derive(Debug, Clone)]
pub struct FieldCache {
    pub dir: PathBuf,
}

impl FieldCache {
    pub fn open(dir: &Path) -> io::Result<FieldCache> {
        std::fs::create_dir_all(dir)?;
        Ok(FieldCache { dir: dir.to_path_buf() })
    }

    fn path(&self, key: &[u8; 32]) -> PathBuf {
        self.dir.join(format!("{}.fsc", hex::encode(key)))
    }

    pub fn load(&self, key: &[u8; 32]) -> Option<FieldSolution> {
        let f = File::open(self.path(key)).ok()?;
        read_solution(BufReader::new(f), key).ok()
    }

    pub fn store(&self, key: &[u8; 32], s: &FieldSolution) -> io::Result<()> {
        let tmp = self.path(key).with_extension("tmp");
        write_solution(BufWriter::new(File::create(&tmp)?), key, s)?;
        std::fs::rename(tmp, self.path(key))
    }
}
