//! Per-frame binary dumps: tet water, spray particles and the grid.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use crate::grid::{read_grid, write_grid, MacGrid};
use crate::spray::{read_particles, write_particles, SprayParticle};
use crate::vof::{read_water, WaterState, WetTet};
use crate::{Error, Result};

pub struct DumpPaths {
    pub water: PathBuf,
    pub particles: PathBuf,
    pub grid: PathBuf,
}

pub fn paths(dir: &Path, frame: usize) -> DumpPaths {
    DumpPaths {
        water: dir.join(format!("water_{frame:05}.bin")),
        particles: dir.join(format!("particles_{frame:05}.bin")),
        grid: dir.join(format!("grid_{frame:05}.bin")),
    }
}

fn open(p: &Path) -> Result<BufReader<File>> {
    match File::open(p) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingDump(p.to_path_buf())),
        Err(e) => Err(e.into()),
    }
}

pub(crate) fn create(p: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(p)?))
}

pub fn load_water(p: &Path) -> Result<(WaterState, Vec<WetTet>)> {
    read_water(&mut open(p)?)
}

pub fn load_particles(p: &Path) -> Result<Vec<SprayParticle>> {
    read_particles(&mut open(p)?)
}

pub fn load_grid(p: &Path) -> Result<MacGrid> {
    read_grid(&mut open(p)?)
}

pub fn save_particles(p: &Path, ps: &[SprayParticle]) -> Result<()> {
    write_particles(&mut create(p)?, ps)
}

pub fn save_grid(p: &Path, g: &MacGrid) -> Result<()> {
    write_grid(&mut create(p)?, g)
}

pub fn save_water(p: &Path, s: &WaterState, mesh: &crate::mesh::TetMesh, pos: &[crate::Vec3]) -> Result<()> {
    crate::vof::write_water(&mut create(p)?, s, mesh, pos)
}
