//! The coupled step: tet water, spray and the background grid advanced
//! together in a fixed phase order, with conservation bookkeeping.

pub mod coupling;
pub mod diagnostics;
pub mod dumps;
pub mod surface;

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use log::debug;

pub use coupling::{transfer_grid_to_vof, transfer_vof_to_grid, Overwrite};
pub use diagnostics::{
    conservation_error, read_csv, summarize, write_csv, write_summary, DiagnosticsRow, Summary, CSV_HEADER,
};
pub use surface::{marching_tets, surface, surface_frame, ScalarGrid, Splat, SurfaceParams, TriMesh};

use crate::bake::{Bake, FrameBake};
use crate::grid::{MacGrid, ProjectStats};
use crate::mesh::{Aabb, PointLocator, QuadratureRule, SolidField};
use crate::scene::SceneConfig;
use crate::spray::{accelerate_particles, move_particles, reincorporate_to_grid, reincorporate_to_vof, Spray};
use crate::vof::{
    advect, apply_adhesion, apply_external_forces, apply_porosity_drag, pushout, rank_order, smear,
    velocity_correction, MeshFrame, PushoutStats, TransferLedger, WaterState,
};
use crate::{Error, Result};

/// The sub-steps of one step, in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    VofAdvect,
    ParticleAdvect,
    GridAdvect,
    VofToGrid,
    GridToVof,
    ParticlesToVof,
    Forces,
    AdhesionDrag,
    Conserve,
    ParticlesToGrid,
    Project,
    GridToVofAgain,
    Spawn,
}

impl Phase {
    pub const ORDER: [Phase; 13] = [
        Phase::VofAdvect,
        Phase::ParticleAdvect,
        Phase::GridAdvect,
        Phase::VofToGrid,
        Phase::GridToVof,
        Phase::ParticlesToVof,
        Phase::Forces,
        Phase::AdhesionDrag,
        Phase::Conserve,
        Phase::ParticlesToGrid,
        Phase::Project,
        Phase::GridToVofAgain,
        Phase::Spawn,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Phase::VofAdvect => "1a vof advect",
            Phase::ParticleAdvect => "1b particle advect",
            Phase::GridAdvect => "1c grid advect",
            Phase::VofToGrid => "2a vof to grid",
            Phase::GridToVof => "2b grid to vof",
            Phase::ParticlesToVof => "2c particles to vof",
            Phase::Forces => "3 external forces",
            Phase::AdhesionDrag => "3 adhesion and drag",
            Phase::Conserve => "4a volume conservation",
            Phase::ParticlesToGrid => "4b particles to grid",
            Phase::Project => "4b projection",
            Phase::GridToVofAgain => "4c grid to vof",
            Phase::Spawn => "spawn",
        }
    }
}

/// Whether `trace` visits phases in [`Phase::ORDER`], each at most once.
pub fn is_ordered(trace: &[Phase]) -> bool {
    let pos: Vec<usize> = trace
        .iter()
        .map(|p| Phase::ORDER.iter().position(|q| q == p).unwrap())
        .collect();
    pos.windows(2).all(|w| w[0] < w[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Coupled,
    /// The grid alone, for drift comparison.
    GridOnly,
}

/// What happened during the last step, beyond the diagnostics row.
#[derive(Clone, Debug, Default)]
pub struct StepReport {
    pub trace: Vec<Phase>,
    pub pushout: PushoutStats,
    /// Non-pocket tets above capacity after volume conservation.
    pub saturation_violations: Vec<usize>,
    pub overwrite: Overwrite,
    pub overwrite_again: Overwrite,
    pub project: Option<ProjectStats>,
    pub spawned: usize,
    pub inlet_volume: f64,
}

pub struct Simulation {
    pub scene: SceneConfig,
    pub mode: Mode,
    pub bake: Option<Arc<Bake>>,
    pub water: WaterState,
    pub spray: Spray,
    pub grid: MacGrid,
    /// Steps taken so far.
    pub steps: usize,
    /// Total level-set volume added by inlets.
    pub inlet_volume: f64,
    pub rows: Vec<DiagnosticsRow>,
    pub last: StepReport,
    disabled: Vec<Phase>,
    solids: SolidField,
    walls: Aabb,
    rule: QuadratureRule,
    max_edge: f64,
    locators: Option<(usize, Arc<PointLocator>)>,
}

/// Tets holding more than capacity (relative slack 1e-9) that are not
/// enclosed pockets.
pub fn saturation_violations(s: &WaterState, f: &FrameBake) -> Vec<usize> {
    (0..s.n_tets())
        .filter(|&t| f.is_fluid(t) && !f.pocket[t] && s.water[t] > f.capacity[t] * (1.0 + 1e-9))
        .collect()
}

impl Simulation {
    /// Coupled run over a bake made for `scene`.
    pub fn new(scene: SceneConfig, bake: Arc<Bake>) -> Result<Self> {
        if bake.dt != scene.time.dt {
            return Err(Error::Config {
                path: "time.dt".into(),
                line: None,
                message: format!("bake was made with dt = {}, scene has {}", bake.dt, scene.time.dt),
            });
        }
        if !bake.is_static() && (bake.first_frame > 0 || bake.last_frame() < scene.time.steps) {
            return Err(Error::Config {
                path: "time.steps".into(),
                line: None,
                message: format!(
                    "bake covers frames {}..={}, the run needs 0..={}",
                    bake.first_frame,
                    bake.last_frame(),
                    scene.time.steps
                ),
            });
        }
        let rule = QuadratureRule::new(scene.mesh.n_samples)?;
        let water = scene.initial_water(&bake);
        let max_edge = bake.max_edge();
        let mut sim = Self::base(scene, Mode::Coupled, rule);
        sim.water = water;
        sim.max_edge = max_edge;
        sim.bake = Some(bake);
        Ok(sim)
    }

    /// The grid alone, same scene.
    pub fn grid_only(scene: SceneConfig) -> Result<Self> {
        let rule = QuadratureRule::new(scene.mesh.n_samples)?;
        Ok(Self::base(scene, Mode::GridOnly, rule))
    }

    fn base(scene: SceneConfig, mode: Mode, rule: QuadratureRule) -> Self {
        let grid = scene.initial_grid();
        let walls = Aabb::new(grid.origin, grid.upper());
        Self {
            solids: scene.solid_field(),
            spray: Spray::new(scene.spray.seed),
            water: WaterState::new(0),
            grid,
            mode,
            bake: None,
            steps: 0,
            inlet_volume: 0.0,
            rows: Vec::new(),
            last: StepReport::default(),
            disabled: Vec::new(),
            walls,
            rule,
            max_edge: 0.0,
            locators: None,
            scene,
        }
    }

    /// Skips `phase` in every following step.
    pub fn disable(&mut self, phase: Phase) {
        if !self.disabled.contains(&phase) {
            self.disabled.push(phase);
        }
    }

    fn on(&self, p: Phase) -> bool {
        !self.disabled.contains(&p)
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.scene.time.dt
    }

    /// VOF plus particle volume.
    pub fn subsystem_volume(&self) -> f64 {
        self.water.total_water() + self.spray.total_volume()
    }

    fn locator(&mut self, frame: usize) -> Arc<PointLocator> {
        let bake = self.bake.as_ref().expect("coupled run");
        let key = if bake.is_static() { 0 } else { frame };
        if let Some((k, l)) = &self.locators {
            if *k == key {
                return l.clone();
            }
        }
        let l = Arc::new(PointLocator::new(&bake.mesh, &bake.frame(key).positions));
        self.locators = Some((key, l.clone()));
        l
    }

    /// Advances one step and appends its diagnostics row.
    pub fn step(&mut self) -> Result<&DiagnosticsRow> {
        match self.mode {
            Mode::Coupled => self.step_coupled()?,
            Mode::GridOnly => self.step_grid_only()?,
        }
        assert!(
            is_ordered(&self.last.trace),
            "phase order violated: {:?}",
            self.last.trace
        );
        self.steps += 1;
        Ok(self.rows.last().unwrap())
    }

    fn grid_phases(&mut self, t1: f64, dt: f64, r: &mut StepReport) {
        if !self.solids.is_static() {
            self.grid.set_solids(&self.solids, t1);
        }
        self.grid.advect(dt);
        self.grid.update_level_set();
        r.trace.push(Phase::GridAdvect);
    }

    fn grid_forces(&mut self, t0: f64, dt: f64, r: &mut StepReport) {
        self.grid.apply_gravity(&self.scene.physics.gravity, dt);
        for i in &self.scene.inlets {
            r.inlet_volume += self.grid.apply_inlet(i, t0);
        }
        self.inlet_volume += r.inlet_volume;
    }

    fn project(&mut self, dt: f64, r: &mut StepReport) -> Result<()> {
        let s = &self.scene.solver;
        let stats = self
            .grid
            .project(dt, s.pressure_tol, s.max_iterations)
            .map_err(|e| e.in_phase(Phase::Project.label()))?;
        r.project = Some(stats);
        r.trace.push(Phase::Project);
        Ok(())
    }

    fn step_grid_only(&mut self) -> Result<()> {
        let dt = self.scene.time.dt;
        let t0 = self.time();
        let mut r = StepReport::default();
        let clock = Instant::now();
        if self.on(Phase::GridAdvect) {
            self.grid_phases(t0 + dt, dt, &mut r);
        }
        let ms_advect = ms(clock);
        if self.on(Phase::Forces) {
            self.grid_forces(t0, dt, &mut r);
            r.trace.push(Phase::Forces);
        }
        let clock = Instant::now();
        if self.on(Phase::Project) {
            self.project(dt, &mut r)?;
        }
        let ms_project = ms(clock);
        let timings = self.scene.output.record_timings;
        self.rows.push(DiagnosticsRow {
            frame: self.steps + 1,
            vof_vol: 0.0,
            particle_vol: 0.0,
            grid_vol: self.grid.water_volume(),
            ledger_in: 0.0,
            ledger_out: 0.0,
            cons_err_rel: 0.0,
            mom_x: 0.0,
            mom_y: 0.0,
            mom_z: 0.0,
            ms_advect: if timings { ms_advect } else { 0.0 },
            ms_conserve: 0.0,
            ms_project: if timings { ms_project } else { 0.0 },
        });
        self.last = r;
        Ok(())
    }

    fn step_coupled(&mut self) -> Result<()> {
        let bake = self.bake.clone().expect("coupled run");
        let mesh = &bake.mesh;
        let dt = self.scene.time.dt;
        let s = self.steps;
        let (t0, t1) = (self.time(), self.time() + dt);
        let (old, new) = (bake.frame(s), bake.frame(s + 1));
        let loc_old = self.locator(s);
        let loc_new = self.locator(s + 1);
        let before = self.subsystem_volume();
        let mut r = StepReport::default();
        let mut ledger = TransferLedger::default();
        let (mut vin, mut vout) = (0.0, 0.0);

        // 1. advection
        let clock = Instant::now();
        if self.on(Phase::VofAdvect) {
            let (w, l) = advect(
                &self.water,
                mesh,
                MeshFrame {
                    bake: old,
                    locator: &loc_old,
                },
                MeshFrame {
                    bake: new,
                    locator: &loc_new,
                },
                &self.solids,
                dt,
                &self.rule,
                &self.grid,
            )
            .map_err(|e| e.in_phase(Phase::VofAdvect.label()))?;
            self.water = w;
            vin += l.from_grid;
            ledger.absorb(l);
            r.trace.push(Phase::VofAdvect);
        }
        if self.on(Phase::ParticleAdvect) {
            move_particles(&mut self.spray.particles, &self.solids, t1, dt, Some(&self.walls));
            r.trace.push(Phase::ParticleAdvect);
        }
        if self.on(Phase::GridAdvect) {
            self.grid_phases(t1, dt, &mut r);
        }
        let ms_advect = ms(clock);

        // 2. momentum transfer
        let beta = self.scene.coupling.beta;
        if beta > 0.0 && self.on(Phase::VofToGrid) {
            transfer_vof_to_grid(&self.water, new, &loc_new, &mut self.grid, beta);
            r.trace.push(Phase::VofToGrid);
        }
        if self.on(Phase::GridToVof) {
            r.overwrite = transfer_grid_to_vof(&mut self.water, mesh, new, &self.grid);
            vin += r.overwrite.volume;
            r.trace.push(Phase::GridToVof);
        }
        if self.on(Phase::ParticlesToVof) {
            reincorporate_to_vof(&mut self.spray.particles, &mut self.water, new, &loc_new);
            r.trace.push(Phase::ParticlesToVof);
        }

        // 3. external forces
        let g = self.scene.physics.gravity;
        if self.on(Phase::Forces) {
            apply_external_forces(&mut self.water, &g, dt);
            accelerate_particles(&mut self.spray.particles, &g, dt);
            self.grid_forces(t0, dt, &mut r);
            r.trace.push(Phase::Forces);
        }
        if self.on(Phase::AdhesionDrag) {
            if self.scene.adhesion.phi_a > 0.0 {
                apply_adhesion(&mut self.water, new, dt, self.scene.adhesion.phi_a);
            }
            if self.scene.hair.k_drag > 0.0 {
                apply_porosity_drag(&mut self.water, new, dt, self.scene.hair.k_drag);
            }
            r.trace.push(Phase::AdhesionDrag);
        }

        // 4. volume conservation
        let clock = Instant::now();
        if self.on(Phase::Conserve) {
            let order = rank_order(new);
            smear(&mut self.water, mesh, new);
            r.pushout = pushout(&mut self.water, mesh, new, &order, &mut ledger);
            velocity_correction(&mut self.water, mesh, new, &order);
            r.saturation_violations = saturation_violations(&self.water, new);
            r.trace.push(Phase::Conserve);
        }
        let ms_conserve = ms(clock);
        if self.on(Phase::ParticlesToGrid) {
            let d = reincorporate_to_grid(&mut self.spray.particles, &mut self.grid, self.scene.spray.expansion);
            vout += d.volume;
            r.trace.push(Phase::ParticlesToGrid);
        }
        let clock = Instant::now();
        if self.on(Phase::Project) {
            self.project(dt, &mut r)?;
        }
        let ms_project = ms(clock);
        if self.on(Phase::GridToVofAgain) {
            r.overwrite_again = transfer_grid_to_vof(&mut self.water, mesh, new, &self.grid);
            vin += r.overwrite_again.volume;
            r.trace.push(Phase::GridToVofAgain);
        }

        if self.on(Phase::Spawn) {
            let n0 = self.spray.particles.len();
            self.spray
                .spawn(&ledger.to_particles, self.scene.spray.jitter_frac, self.max_edge);
            r.spawned = self.spray.particles.len() - n0;
            r.trace.push(Phase::Spawn);
        }

        let after = self.subsystem_volume();
        let mom = self.water.total_momentum() + self.spray.total_momentum();
        let timings = self.scene.output.record_timings;
        let t = |v: f64| if timings { v } else { 0.0 };
        let row = DiagnosticsRow {
            frame: s + 1,
            vof_vol: self.water.total_water(),
            particle_vol: self.spray.total_volume(),
            grid_vol: self.grid.water_volume(),
            ledger_in: vin,
            ledger_out: vout,
            cons_err_rel: conservation_error(before, after, vin, vout),
            mom_x: mom.x,
            mom_y: mom.y,
            mom_z: mom.z,
            ms_advect: t(ms_advect),
            ms_conserve: t(ms_conserve),
            ms_project: t(ms_project),
        };
        debug!(
            "step {}: vof {:.4e} particles {} ({:.3e}) grid {:.4e} err {:.2e}",
            s + 1,
            row.vof_vol,
            self.spray.particles.len(),
            row.particle_vol,
            row.grid_vol,
            row.cons_err_rel
        );
        self.rows.push(row);
        self.last = r;
        Ok(())
    }

    /// Writes the enabled dumps for output frame `frame`.
    pub fn write_dumps(&self, dir: &Path, frame: usize) -> Result<()> {
        let out = &self.scene.output;
        let p = dumps::paths(dir, frame);
        if out.dump_water {
            if let Some(b) = &self.bake {
                dumps::save_water(&p.water, &self.water, &b.mesh, &b.frame(self.steps).positions)?;
            }
        }
        if out.dump_particles && self.mode == Mode::Coupled {
            dumps::save_particles(&p.particles, &self.spray.particles)?;
        }
        if out.dump_grid {
            dumps::save_grid(&p.grid, &self.grid)?;
        }
        Ok(())
    }

    /// Runs `steps` steps, dumping every `frame_substeps` steps when `dir` is
    /// given (frame 0 is the initial state).
    pub fn run(&mut self, steps: usize, dir: Option<&Path>) -> Result<()> {
        let sub = self.scene.time.frame_substeps;
        if let Some(d) = dir {
            if self.steps == 0 {
                self.write_dumps(d, 0)?;
            }
        }
        for _ in 0..steps {
            self.step()?;
            if let Some(d) = dir {
                if self.steps.is_multiple_of(sub) {
                    self.write_dumps(d, self.steps / sub)?;
                }
            }
        }
        Ok(())
    }
}

fn ms(clock: Instant) -> f64 {
    clock.elapsed().as_secs_f64() * 1e3
}
