use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{WaterState, EPS_W};
use crate::bake::io::{get_f64s, get_vecs, put_f64s, put_vecs};
use crate::mesh::{tet_positions, TetMesh};
use crate::{Error, Result, Vec3};

const MAGIC: &[u8; 8] = b"TVOFWATR";
const VERSION: u32 = 1;

/// A wet tet with its geometry, enough to surface the frame on its own.
#[derive(Clone, Debug, PartialEq)]
pub struct WetTet {
    pub vertices: [Vec3; 4],
    pub water: f64,
    pub momentum: Vec3,
}

/// Full state arrays followed by the wet tets in the frame's pose.
pub fn write_water<W: Write>(w: &mut W, state: &WaterState, mesh: &TetMesh, pos: &[Vec3]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_u64::<LE>(state.n_tets() as u64)?;
    put_f64s(w, &state.water)?;
    put_vecs(w, &state.momentum)?;
    let wet: Vec<usize> = (0..state.n_tets()).filter(|&t| state.water[t] > EPS_W).collect();
    w.write_u64::<LE>(wet.len() as u64)?;
    for t in wet {
        put_vecs(w, &tet_positions(mesh.tet(t), pos))?;
        w.write_f64::<LE>(state.water[t])?;
        put_vecs(w, &[state.momentum[t]])?;
    }
    Ok(())
}

pub fn read_water<R: Read>(r: &mut R) -> Result<(WaterState, Vec<WetTet>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::DumpFormat("not a water dump".into()));
    }
    let version = r.read_u32::<LE>()?;
    if version != VERSION {
        return Err(Error::DumpFormat(format!("unsupported water dump version {version}")));
    }
    let n = r.read_u64::<LE>()? as usize;
    let water = get_f64s(r, n)?;
    let momentum = get_vecs(r, n)?;
    let n_wet = r.read_u64::<LE>()? as usize;
    let mut wet = Vec::with_capacity(n_wet);
    for _ in 0..n_wet {
        let v = get_vecs(r, 4)?;
        let water = r.read_f64::<LE>()?;
        let momentum = get_vecs(r, 1)?[0];
        wet.push(WetTet {
            vertices: [v[0], v[1], v[2], v[3]],
            water,
            momentum,
        });
    }
    Ok((WaterState { water, momentum }, wet))
}
