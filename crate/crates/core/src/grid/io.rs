use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::MacGrid;
use crate::bake::io::{get_f64s, get_vecs, put_f64s, put_vecs};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"TVOFGRID";
const VERSION: u32 = 1;

/// Writes origin, spacing, dims, the three face arrays, φ_water, φ_solid and
/// pressure. Solid face flags are derived data and are not stored.
pub fn write_grid<W: Write>(w: &mut W, g: &MacGrid) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    put_vecs(w, &[g.origin])?;
    w.write_f64::<LE>(g.dx)?;
    for &d in &g.dims {
        w.write_u64::<LE>(d as u64)?;
    }
    for f in [&g.u, &g.v, &g.w, &g.phi_water, &g.phi_solid, &g.pressure] {
        put_f64s(w, &f.data)?;
    }
    Ok(())
}

pub fn read_grid<R: Read>(r: &mut R) -> Result<MacGrid> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::DumpFormat("not a grid dump".into()));
    }
    let version = r.read_u32::<LE>()?;
    if version != VERSION {
        return Err(Error::DumpFormat(format!("unsupported grid dump version {version}")));
    }
    let origin = get_vecs(r, 1)?[0];
    let dx = r.read_f64::<LE>()?;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = r.read_u64::<LE>()? as usize;
    }
    if dims.iter().any(|&d| d == 0 || d > 1 << 12) || !(dx > 0.0) {
        return Err(Error::DumpFormat(format!("bad grid header dims={dims:?} dx={dx}")));
    }
    let mut g = MacGrid::new(origin, dx, dims);
    for f in [
        &mut g.u,
        &mut g.v,
        &mut g.w,
        &mut g.phi_water,
        &mut g.phi_solid,
        &mut g.pressure,
    ] {
        f.data = get_f64s(r, f.data.len())?;
    }
    Ok(g)
}
