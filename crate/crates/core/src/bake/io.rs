use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{Bake, Escalation, FrameBake};
use crate::mesh::TetMesh;
use crate::{Error, Result, Vec3};

const MAGIC: &[u8; 8] = b"TVOFBAKE";
const VERSION: u32 = 1;

pub(crate) fn put_f64s<W: Write>(w: &mut W, v: &[f64]) -> std::io::Result<()> {
    for &x in v {
        w.write_f64::<LE>(x)?;
    }
    Ok(())
}

pub(crate) fn put_vecs<W: Write>(w: &mut W, v: &[Vec3]) -> std::io::Result<()> {
    for p in v {
        w.write_f64::<LE>(p.x)?;
        w.write_f64::<LE>(p.y)?;
        w.write_f64::<LE>(p.z)?;
    }
    Ok(())
}

pub(crate) fn get_f64s<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<f64>> {
    let mut v = vec![0.0; n];
    r.read_f64_into::<LE>(&mut v)?;
    Ok(v)
}

pub(crate) fn get_vecs<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<Vec3>> {
    let flat = get_f64s(r, 3 * n)?;
    Ok(flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
}

fn put_bools<W: Write>(w: &mut W, v: &[bool]) -> std::io::Result<()> {
    let bytes: Vec<u8> = v.iter().map(|&b| b as u8).collect();
    w.write_all(&bytes)
}

fn get_bools<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<bool>> {
    let mut bytes = vec![0u8; n];
    r.read_exact(&mut bytes)?;
    Ok(bytes.into_iter().map(|b| b != 0).collect())
}

fn get_u32s<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<u32>> {
    let mut v = vec![0u32; n];
    r.read_u32_into::<LE>(&mut v)?;
    Ok(v)
}

/// Writes the bake: header, mesh chunk, then one chunk per frame.
pub fn write_bake<W: Write>(w: &mut W, bake: &Bake) -> Result<()> {
    let mesh = &bake.mesh;
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_f64::<LE>(bake.dt)?;
    w.write_u64::<LE>(bake.first_frame as u64)?;
    w.write_u64::<LE>(mesh.n_nodes() as u64)?;
    w.write_u64::<LE>(mesh.n_tets() as u64)?;
    for t in mesh.tets() {
        for &n in t {
            w.write_u32::<LE>(n)?;
        }
    }
    put_vecs(w, &bake.rest)?;
    w.write_u64::<LE>(bake.frames.len() as u64)?;
    for f in &bake.frames {
        w.write_f64::<LE>(f.time)?;
        put_vecs(w, &f.positions)?;
        put_vecs(w, &f.velocities)?;
        for &r in &f.rank {
            w.write_i32::<LE>(r)?;
        }
        put_f64s(w, &f.solid_frac)?;
        put_f64s(w, &f.volume)?;
        put_f64s(w, &f.capacity)?;
        put_vecs(w, &f.surf_normal)?;
        put_vecs(w, &f.surf_velocity)?;
        put_f64s(w, &f.surf_phi)?;
        for &o in &f.escalation.offsets {
            w.write_u32::<LE>(o)?;
        }
        for &t in &f.escalation.targets {
            w.write_u32::<LE>(t)?;
        }
        put_f64s(w, &f.adhesion_alpha)?;
        put_vecs(w, &f.adhesion_dir)?;
        put_f64s(w, &f.hair_frac)?;
        put_vecs(w, &f.hair_dir)?;
        put_bools(w, &f.disabled)?;
        put_bools(w, &f.pocket)?;
    }
    Ok(())
}

pub fn read_bake<R: Read>(r: &mut R) -> Result<Bake> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BakeFormat("bad magic".into()));
    }
    let version = r.read_u32::<LE>()?;
    if version != VERSION {
        return Err(Error::BakeFormat(format!("unsupported version {version}")));
    }
    let dt = r.read_f64::<LE>()?;
    let first_frame = r.read_u64::<LE>()? as usize;
    let n_nodes = r.read_u64::<LE>()? as usize;
    let n_tets = r.read_u64::<LE>()? as usize;
    let flat = get_u32s(r, 4 * n_tets)?;
    let tets: Vec<[u32; 4]> = flat.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
    let mesh = TetMesh::from_tets(n_nodes, tets)?;
    let rest = get_vecs(r, n_nodes)?;
    let n_frames = r.read_u64::<LE>()? as usize;
    if n_frames == 0 {
        return Err(Error::BakeFormat("no frames".into()));
    }
    let mut frames = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let time = r.read_f64::<LE>()?;
        let positions = get_vecs(r, n_nodes)?;
        let velocities = get_vecs(r, n_nodes)?;
        let mut rank = vec![0i32; n_tets];
        r.read_i32_into::<LE>(&mut rank)?;
        let solid_frac = get_f64s(r, n_tets)?;
        let volume = get_f64s(r, n_tets)?;
        let capacity = get_f64s(r, n_tets)?;
        let surf_normal = get_vecs(r, n_tets)?;
        let surf_velocity = get_vecs(r, n_tets)?;
        let surf_phi = get_f64s(r, n_tets)?;
        let offsets = get_u32s(r, n_tets + 1)?;
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::BakeFormat("escalation offsets not monotone".into()));
        }
        let targets = get_u32s(r, *offsets.last().unwrap() as usize)?;
        if targets.iter().any(|&t| t as usize >= n_tets) {
            return Err(Error::BakeFormat("escalation target out of range".into()));
        }
        frames.push(FrameBake {
            time,
            positions,
            velocities,
            rank,
            solid_frac,
            volume,
            capacity,
            surf_normal,
            surf_velocity,
            surf_phi,
            escalation: Escalation { offsets, targets },
            adhesion_alpha: get_f64s(r, n_tets)?,
            adhesion_dir: get_vecs(r, n_tets)?,
            hair_frac: get_f64s(r, n_tets)?,
            hair_dir: get_vecs(r, n_tets)?,
            disabled: get_bools(r, n_tets)?,
            pocket: get_bools(r, n_tets)?,
        });
    }
    Ok(Bake {
        mesh,
        rest,
        frames,
        dt,
        first_frame,
    })
}

impl Bake {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_bake(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        read_bake(&mut r)
    }
}
