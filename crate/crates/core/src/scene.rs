//! Scene description files (TOML).
//!
//! A scene names the grid domain, the tet mesh resolution, solids and their
//! motion, initial water, sources, physical constants and output toggles.
//! Everything but `[domain]`, `[mesh]` and `[time]` has defaults:
//!
//! | key | default |
//! |-----|---------|
//! | `time.dt` | 1/120 s |
//! | `time.frame_substeps` | 2 |
//! | `physics.gravity` | (0, −9.81, 0) |
//! | `coupling.beta` | 0 |
//! | `mesh.n_samples` | 10 |
//! | `spray.jitter_frac` | 0.5 |
//! | `spray.seed` | 0 |
//! | `adhesion.phi_a` | 0 (off) |
//! | `hair.k_drag` | 0 (off) |
//! | `solver.pressure_tol` | 1e-9 |
//! | `output.max_cons_error` | 2e-4 |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bake::{bake, Bake, PaintRegion};
use crate::bake::{AdhesionPaint, BakeSpec, FurPatch, HairStrand, MeshConfig, SkinningConfig};
use crate::grid::{Inlet, MacGrid, MarkerConfig};
use crate::mesh::{PointLocator, Shape, Solid, SolidField, SUPPORTED_SAMPLE_COUNTS};
use crate::vof::WaterState;
use crate::{Error, Result, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub domain: DomainConfig,
    pub mesh: MeshConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub skinning: SkinningConfig,
    #[serde(default)]
    pub solids: Vec<Solid>,
    #[serde(default)]
    pub water: WaterConfig,
    #[serde(default)]
    pub inlets: Vec<Inlet>,
    #[serde(default)]
    pub adhesion: AdhesionConfig,
    #[serde(default)]
    pub hair: HairConfig,
    #[serde(default)]
    pub spray: SprayConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// The background grid: `dims` cells of size `dx` from `origin`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default)]
    pub origin: Vec3,
    pub dx: f64,
    pub dims: [usize; 3],
}

impl DomainConfig {
    pub fn upper(&self) -> Vec3 {
        self.origin + Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.dx
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub steps: usize,
    /// Steps per output frame.
    #[serde(default = "default_substeps")]
    pub frame_substeps: usize,
}

fn default_dt() -> f64 {
    1.0 / 120.0
}

fn default_substeps() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub gravity: Vec3,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            gravity: Vec3::new(0.0, -9.81, 0.0),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingConfig {
    /// Weight of the VOF velocity when overwriting grid faces inside wet
    /// tets; 0 disables the transfer.
    pub beta: f64,
}

/// Initial water: level-set primitives for the grid, regions of pre-filled
/// tets for the mesh.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaterConfig {
    pub grid: Vec<GridWater>,
    pub vof: Vec<VofWater>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridWater {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default)]
    pub velocity: Vec3,
}

/// Fluid tets whose centroid lies in `region` start at `fill × capacity`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VofWater {
    #[serde(flatten)]
    pub region: PaintRegion,
    #[serde(default = "one")]
    pub fill: f64,
    #[serde(default)]
    pub velocity: Vec3,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdhesionConfig {
    /// Distance over which adhesion falls off to zero (m).
    pub phi_a: f64,
    pub paint: Vec<AdhesionPaint>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HairConfig {
    pub k_drag: f64,
    pub strands: Vec<HairStrand>,
    pub fur: Vec<FurPatch>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SprayConfig {
    /// Jitter radius as a fraction of the maximum tet edge.
    pub jitter_frac: f64,
    /// Radial impulse on grid reincorporation, relative to particle speed.
    pub expansion: f64,
    pub seed: u64,
}

impl Default for SprayConfig {
    fn default() -> Self {
        Self {
            jitter_frac: 0.5,
            expansion: 0.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub pressure_tol: f64,
    pub max_iterations: usize,
    pub markers: MarkerConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            pressure_tol: 1e-9,
            max_iterations: 2000,
            markers: MarkerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Wall-clock phase timings in diagnostics; off gives reproducible CSVs.
    pub record_timings: bool,
    /// Bound on the per-step relative conservation error used by `report`.
    pub max_cons_error: f64,
    pub dump_water: bool,
    pub dump_particles: bool,
    pub dump_grid: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            record_timings: true,
            max_cons_error: 2e-4,
            dump_water: true,
            dump_particles: true,
            dump_grid: true,
        }
    }
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Best-effort line of `path` (dotted) in `src`: the first `key =` after the
/// section header that owns it.
fn line_of_key(src: &str, path: &str) -> Option<usize> {
    let parts: Vec<&str> = path.split('.').collect();
    let (key, sections) = parts.split_last()?;
    let header = sections.join(".");
    let mut in_section = header.is_empty();
    for (i, line) in src.lines().enumerate() {
        let l = line.trim();
        if l.starts_with('[') {
            let name = l.trim_matches(|c| c == '[' || c == ']').trim();
            in_section = name == header;
            continue;
        }
        if in_section {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == *key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl SceneConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        let de = toml::Deserializer::new(src);
        let cfg: SceneConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config {
                line: inner.span().map(|s| line_of(src, s.start)),
                path,
                message: inner.message().to_string(),
            }
        })?;
        cfg.validate().map_err(|(path, message)| Error::Config {
            line: line_of_key(src, &path),
            path,
            message,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene config serializes")
    }

    fn validate(&self) -> std::result::Result<(), (String, String)> {
        let err = |p: &str, m: String| Err((p.to_string(), m));
        let finite = |p: &str, v: f64| -> std::result::Result<(), (String, String)> {
            if v.is_finite() {
                Ok(())
            } else {
                Err((p.to_string(), format!("must be finite, got {v}")))
            }
        };
        let positive = |p: &str, v: f64| -> std::result::Result<(), (String, String)> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err((p.to_string(), format!("must be positive, got {v}")))
            }
        };
        positive("domain.dx", self.domain.dx)?;
        if self.domain.dims.iter().any(|&d| d < 2) {
            return err(
                "domain.dims",
                format!("need at least 2 cells per axis, got {:?}", self.domain.dims),
            );
        }
        for a in 0..3 {
            finite("domain.origin", self.domain.origin[a])?;
            finite("physics.gravity", self.physics.gravity[a])?;
        }
        positive("mesh.dx", self.mesh.dx)?;
        if !SUPPORTED_SAMPLE_COUNTS.contains(&self.mesh.n_samples) {
            return err(
                "mesh.n_samples",
                format!("{} is not one of {:?}", self.mesh.n_samples, SUPPORTED_SAMPLE_COUNTS),
            );
        }
        let (lo, hi) = (self.domain.origin, self.domain.upper());
        let b = &self.mesh.bounds;
        for a in 0..3 {
            finite("mesh.bounds", b.min[a])?;
            finite("mesh.bounds", b.max[a])?;
            if b.min[a] >= b.max[a] {
                return err("mesh.bounds", "min must be below max on every axis".into());
            }
            if b.min[a] < lo[a] || b.max[a] > hi[a] {
                return err("mesh.bounds", "mesh must fit inside the grid domain".into());
            }
        }
        positive("time.dt", self.time.dt)?;
        if self.time.frame_substeps == 0 {
            return err("time.frame_substeps", "must be at least 1".into());
        }
        let beta = self.coupling.beta;
        if !(0.0..=1.0).contains(&beta) {
            return err("coupling.beta", format!("must lie in [0, 1], got {beta}"));
        }
        let jf = self.spray.jitter_frac;
        if !(0.0..=1.0).contains(&jf) {
            return err("spray.jitter_frac", format!("must lie in [0, 1], got {jf}"));
        }
        if !(self.spray.expansion >= 0.0 && self.spray.expansion.is_finite()) {
            return err("spray.expansion", "must be finite and non-negative".into());
        }
        if !(self.adhesion.phi_a >= 0.0 && self.adhesion.phi_a.is_finite()) {
            return err("adhesion.phi_a", "must be finite and non-negative".into());
        }
        if self
            .adhesion
            .paint
            .iter()
            .any(|p| !(p.alpha.is_finite() && p.alpha >= 0.0))
        {
            return err("adhesion.paint.alpha", "must be finite and non-negative".into());
        }
        if !(self.hair.k_drag >= 0.0 && self.hair.k_drag.is_finite()) {
            return err("hair.k_drag", "must be finite and non-negative".into());
        }
        positive("solver.pressure_tol", self.solver.pressure_tol)?;
        if self.solver.max_iterations == 0 {
            return err("solver.max_iterations", "must be at least 1".into());
        }
        for w in &self.water.vof {
            if !(0.0..=1.0).contains(&w.fill) {
                return err("water.vof.fill", format!("must lie in [0, 1], got {}", w.fill));
            }
        }
        for i in &self.inlets {
            positive("inlets.radius", i.radius)?;
            positive("inlets.length", i.length)?;
            finite("inlets.speed", i.speed)?;
            if i.axis.norm() == 0.0 {
                return err("inlets.axis", "must be non-zero".into());
            }
        }
        Ok(())
    }

    pub fn solid_field(&self) -> SolidField {
        SolidField::new(self.solids.clone())
    }

    pub fn strands(&self) -> Vec<HairStrand> {
        let mut s = self.hair.strands.clone();
        for f in &self.hair.fur {
            s.extend(f.strands());
        }
        s
    }

    pub fn bake_spec(&self) -> BakeSpec {
        BakeSpec {
            mesh: self.mesh.clone(),
            skinning: self.skinning.clone(),
            solids: self.solid_field(),
            paint: self.adhesion.paint.clone(),
            strands: self.strands(),
            dt: self.time.dt,
        }
    }

    /// Bakes every frame the configured run needs.
    pub fn bake(&self) -> Result<Bake> {
        bake(&self.bake_spec(), 0, self.time.steps)
    }

    /// The grid with initial water and solids at t = 0.
    pub fn initial_grid(&self) -> MacGrid {
        let mut g = MacGrid::new(self.domain.origin, self.domain.dx, self.domain.dims);
        g.set_solids(&self.solid_field(), 0.0);
        for w in &self.water.grid {
            g.add_water(|p| w.shape.eval(p).0);
            let (origin, dx) = (g.origin, g.dx);
            for a in 0..3 {
                let f = g.face(a).clone();
                let solid = g.solid_face[a].clone();
                for (n, u) in g.face_mut(a).data.iter_mut().enumerate() {
                    if !solid[n] && w.shape.eval(&f.position(&origin, dx, f.coords(n))).0 < 0.0 {
                        *u = w.velocity[a];
                    }
                }
            }
        }
        crate::grid::reinitialize(&mut g.phi_water, g.dx);
        g.seed_markers(&self.solver.markers, self.spray.seed);
        g
    }

    /// Initial VOF state on the first baked frame.
    pub fn initial_water(&self, bake: &Bake) -> WaterState {
        let f = bake.frame(0);
        let mut s = WaterState::new(bake.mesh.n_tets());
        let solids = self.solid_field();
        for w in &self.water.vof {
            for t in 0..bake.mesh.n_tets() {
                if !f.is_fluid(t) {
                    continue;
                }
                let c = f.centroid(&bake.mesh, t);
                if w.region.contains(&solids.to_rest(&c, 0.0)) {
                    s.water[t] = w.fill * f.capacity[t];
                    s.momentum[t] = w.velocity * s.water[t];
                }
            }
        }
        s
    }

    /// Point locator for frame `f` of `bake`.
    pub fn locator(bake: &Bake, f: usize) -> PointLocator {
        PointLocator::new(&bake.mesh, &bake.frame(f).positions)
    }
}
