use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::SprayParticle;
use crate::bake::io::{get_vecs, put_vecs};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"TVOFPART";
const VERSION: u32 = 1;

pub fn write_particles<W: Write>(w: &mut W, ps: &[SprayParticle]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_u64::<LE>(ps.len() as u64)?;
    for p in ps {
        put_vecs(w, &[p.position, p.velocity])?;
        w.write_f64::<LE>(p.radius)?;
        w.write_u64::<LE>(p.id)?;
    }
    Ok(())
}

pub fn read_particles<R: Read>(r: &mut R) -> Result<Vec<SprayParticle>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::DumpFormat("not a particle dump".into()));
    }
    let version = r.read_u32::<LE>()?;
    if version != VERSION {
        return Err(Error::DumpFormat(format!(
            "unsupported particle dump version {version}"
        )));
    }
    let n = r.read_u64::<LE>()? as usize;
    let mut ps = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let v = get_vecs(r, 2)?;
        let radius = r.read_f64::<LE>()?;
        let id = r.read_u64::<LE>()?;
        ps.push(SprayParticle {
            position: v[0],
            velocity: v[1],
            radius,
            id,
        });
    }
    Ok(ps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    #[test]
    fn round_trip() {
        let ps = vec![SprayParticle {
            position: Vec3::new(1.0, 2.0, 3.0),
            velocity: Vec3::new(-1.0, 0.5, 0.0),
            radius: 0.01,
            id: 42,
        }];
        let mut buf = Vec::new();
        write_particles(&mut buf, &ps).unwrap();
        assert_eq!(read_particles(&mut buf.as_slice()).unwrap(), ps);
    }
}
