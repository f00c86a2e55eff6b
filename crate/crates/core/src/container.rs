//! Binary snapshots of flow trajectories and small CSV helpers.
//!
//! Layout (little endian): magic `RFTRAJ01`, then `u32` dim, `u32` points per
//! axis, `dim × f64` side lengths, `u32` stored times, `u32` length of the
//! config TOML followed by its bytes, `u8` seed flag and `u64` seed, then the
//! initial metric, the background and every `(t, state)` as packed components.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::field::{MetricField, SymTensorField};
use crate::flow::{FlowConfig, FlowTrajectory};
use crate::grid::TorusGrid;

const MAGIC: &[u8; 8] = b"RFTRAJ01";

fn write_metric<W: Write>(w: &mut W, g: &MetricField) -> Result<()> {
    for comp in g.sym().packed() {
        for v in comp {
            w.write_f64::<LittleEndian>(*v)?;
        }
    }
    Ok(())
}

fn read_metric<R: Read>(r: &mut R, grid: &TorusGrid) -> Result<MetricField> {
    let mut packed = Vec::with_capacity(grid.sym_len());
    for _ in 0..grid.sym_len() {
        let mut c = vec![0.0; grid.len()];
        r.read_f64_into::<LittleEndian>(&mut c)?;
        packed.push(c);
    }
    MetricField::new(SymTensorField::from_packed(grid, packed)?)
}

/// Writes `traj` to `w`.
pub fn write_trajectory<W: Write>(mut w: W, traj: &FlowTrajectory) -> Result<()> {
    let grid = traj.grid();
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(grid.dim() as u32)?;
    w.write_u32::<LittleEndian>(grid.n() as u32)?;
    for l in grid.lengths() {
        w.write_f64::<LittleEndian>(*l)?;
    }
    w.write_u32::<LittleEndian>(traj.len() as u32)?;
    let cfg = toml::to_string(&traj.config).map_err(|e| Error::Format(e.to_string()))?;
    w.write_u32::<LittleEndian>(cfg.len() as u32)?;
    w.write_all(cfg.as_bytes())?;
    w.write_u8(traj.seed.is_some() as u8)?;
    w.write_u64::<LittleEndian>(traj.seed.unwrap_or(0))?;
    write_metric(&mut w, &traj.initial)?;
    write_metric(&mut w, &traj.background)?;
    for (t, g) in traj.times.iter().zip(&traj.states) {
        w.write_f64::<LittleEndian>(*t)?;
        write_metric(&mut w, g)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory written by [`write_trajectory`].
pub fn read_trajectory<R: Read>(mut r: R) -> Result<FlowTrajectory> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Format("file too short for a header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("not a trajectory container".into()));
    }
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let n = r.read_u32::<LittleEndian>()? as usize;
    if !(1..=3).contains(&dim) {
        return Err(Error::Format(format!("dimension {dim} in header")));
    }
    let mut lengths = vec![0.0; dim];
    r.read_f64_into::<LittleEndian>(&mut lengths)?;
    let grid = TorusGrid::with_lengths(dim, n, &lengths)?;
    let count = r.read_u32::<LittleEndian>()? as usize;
    let cfg_len = r.read_u32::<LittleEndian>()? as usize;
    let mut cfg = vec![0u8; cfg_len];
    r.read_exact(&mut cfg)?;
    let cfg = String::from_utf8(cfg).map_err(|e| Error::Format(e.to_string()))?;
    let config: FlowConfig = toml::from_str(&cfg).map_err(|e| Error::Format(e.to_string()))?;
    let has_seed = r.read_u8()? != 0;
    let seed = r.read_u64::<LittleEndian>()?;
    let initial = read_metric(&mut r, &grid)?;
    let background = read_metric(&mut r, &grid)?;
    let mut times = Vec::with_capacity(count);
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        times.push(r.read_f64::<LittleEndian>()?);
        states.push(read_metric(&mut r, &grid)?);
    }
    let traj = FlowTrajectory {
        times,
        states,
        initial,
        background,
        config,
        seed: has_seed.then_some(seed),
        contraction_ratios: Vec::new(),
    };
    traj.check_invariants()?;
    Ok(traj)
}

pub fn save_trajectory(path: &Path, traj: &FlowTrajectory) -> Result<()> {
    write_trajectory(BufWriter::new(File::create(path)?), traj)
}

pub fn load_trajectory(path: &Path) -> Result<FlowTrajectory> {
    read_trajectory(BufReader::new(File::open(path)?))
}
