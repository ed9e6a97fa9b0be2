use std::fs::{self, File};
use std::io::BufWriter;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use tetvof::bake::{bake, Bake};
use tetvof::scene::SceneConfig;
use tetvof::sim::{self, Mode, Simulation, SurfaceParams};

/// Volume-conserving tet-mesh water coupled to a level-set grid.
#[derive(Parser)]
#[command(name = "tetvof", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Precompute mesh motion and per-frame data.
    Bake(BakeCmd),
    /// Run a simulation.
    Sim(SimArgs),
    /// Turn frame dumps into OBJ meshes.
    Surface(SurfaceArgs),
    /// Summarize a diagnostics CSV.
    Report(ReportArgs),
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct BakeCmd {
    #[command(subcommand)]
    sub: Option<BakeSub>,
    #[command(flatten)]
    args: Option<BakeArgs>,
}

#[derive(Subcommand)]
enum BakeSub {
    /// Check every frame of a bake file.
    Verify { file: PathBuf },
}

#[derive(Args)]
struct BakeArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Inclusive frame range `A..B`; defaults to the scene's whole run.
    #[arg(long, value_parser = parse_range)]
    frames: Option<RangeInclusive<usize>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Bake file; baked on the fly when omitted.
    #[arg(long)]
    bake: Option<PathBuf>,
    /// Output directory for dumps and diagnostics.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    steps: Option<usize>,
    /// Overrides `spray.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Run the grid alone, without tet water or spray.
    #[arg(long)]
    compare_levelset_only: bool,
    /// Skip the per-frame dumps.
    #[arg(long)]
    no_dumps: bool,
}

#[derive(Args)]
struct SurfaceArgs {
    /// Directory with frame dumps.
    #[arg(long)]
    dir: PathBuf,
    /// Scene, for the per-tet sample count.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Inclusive frame range `A..B`; defaults to every dumped frame.
    #[arg(long, value_parser = parse_range)]
    frames: Option<RangeInclusive<usize>>,
    /// OBJ output directory; defaults to `--dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Polygonization cell size (m).
    #[arg(long)]
    cell: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    csv: PathBuf,
    /// Scene whose `output.max_cons_error` bounds the error.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Bound on the per-step relative error; overrides the scene.
    #[arg(long)]
    max_error: Option<f64>,
    /// Write the summary as a one-row CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got `{s}`"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("bad start `{a}`: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("bad end `{b}`: {e}"))?;
    if b < a {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(a..=b)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Ok(n) = std::env::var("TETVOF_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: TETVOF_THREADS: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("error: TETVOF_THREADS must be a positive integer, got `{n}`");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Bake(b) => match (b.sub, b.args) {
            (Some(BakeSub::Verify { file }), _) => verify(&file),
            (None, Some(a)) => run_bake(&a),
            (None, None) => Err(anyhow::anyhow!("bake needs --scene and --out, or `verify <file>`")),
        },
        Cmd::Sim(a) => run_sim(&a),
        Cmd::Surface(a) => run_surface(&a),
        Cmd::Report(a) => run_report(&a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_scene(p: &Path) -> Result<SceneConfig> {
    SceneConfig::load(p).with_context(|| format!("reading scene {}", p.display()))
}

fn run_bake(a: &BakeArgs) -> Result<ExitCode> {
    let scene = load_scene(&a.scene)?;
    let range = a.frames.clone().unwrap_or(0..=scene.time.steps);
    let b = bake(&scene.bake_spec(), *range.start(), *range.end())?;
    b.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    info!(
        "wrote {} frame(s), {} tets to {}",
        b.frames.len(),
        b.mesh.n_tets(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn verify(file: &Path) -> Result<ExitCode> {
    let b = Bake::load(file).with_context(|| format!("reading {}", file.display()))?;
    let errs = b.verify();
    for (f, e) in &errs {
        println!("frame {f}: {e}");
    }
    if errs.is_empty() {
        println!(
            "ok: {} frame(s) {}..={}, {} tets",
            b.frames.len(),
            b.first_frame,
            b.last_frame(),
            b.mesh.n_tets()
        );
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::FAILURE)
    }
}

fn run_sim(a: &SimArgs) -> Result<ExitCode> {
    let mut scene = load_scene(&a.scene)?;
    if let Some(s) = a.seed {
        scene.spray.seed = s;
    }
    let steps = a.steps.unwrap_or(scene.time.steps);
    scene.time.steps = scene.time.steps.max(steps);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut sim = if a.compare_levelset_only {
        Simulation::grid_only(scene)?
    } else {
        let b = match &a.bake {
            Some(p) => Bake::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => scene.bake()?,
        };
        Simulation::new(scene, Arc::new(b))?
    };
    let dumps = (!a.no_dumps).then_some(a.out.as_path());
    let result = sim.run(steps, dumps);
    let csv = a.out.join("diagnostics.csv");
    sim::write_csv(BufWriter::new(File::create(&csv)?), &sim.rows)?;
    result?;
    let s = sim::summarize(&sim.rows);
    println!("{s}");
    if sim.mode == Mode::GridOnly || sim.inlet_volume > 0.0 {
        let v0 = sim.rows.first().map_or(0.0, |r| r.grid_vol);
        println!("inlet volume:       {:.6e}", sim.inlet_volume);
        if let Some(last) = sim.rows.last() {
            println!("grid volume:        {:.6e} (first step {:.6e})", last.grid_vol, v0);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn dumped_frames(dir: &Path) -> Result<Vec<usize>> {
    let mut frames = Vec::new();
    for e in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let name = e?.file_name().to_string_lossy().into_owned();
        for prefix in ["water_", "particles_", "grid_"] {
            if let Some(n) = name.strip_prefix(prefix).and_then(|r| r.strip_suffix(".bin")) {
                if let Ok(f) = n.parse() {
                    frames.push(f);
                }
            }
        }
    }
    frames.sort_unstable();
    frames.dedup();
    Ok(frames)
}

fn run_surface(a: &SurfaceArgs) -> Result<ExitCode> {
    let mut params = SurfaceParams {
        cell: a.cell,
        ..Default::default()
    };
    if let Some(p) = &a.scene {
        params.n_samples = load_scene(p)?.mesh.n_samples;
    }
    let frames: Vec<usize> = match &a.frames {
        Some(r) => r.clone().collect(),
        None => dumped_frames(&a.dir)?,
    };
    if frames.is_empty() {
        bail!("no frame dumps in {}", a.dir.display());
    }
    let out = a.out.clone().unwrap_or_else(|| a.dir.clone());
    fs::create_dir_all(&out)?;
    for f in frames {
        let m = sim::surface_frame(&a.dir, f, &params)?;
        let path = out.join(format!("surface_{f:05}.obj"));
        m.write_obj(BufWriter::new(File::create(&path)?))?;
        info!("frame {f}: {} triangles -> {}", m.triangles.len(), path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn run_report(a: &ReportArgs) -> Result<ExitCode> {
    let bound = match (a.max_error, &a.scene) {
        (Some(b), _) => b,
        (None, Some(p)) => load_scene(p)?.output.max_cons_error,
        (None, None) => tetvof::scene::OutputConfig::default().max_cons_error,
    };
    let rows = sim::read_csv(File::open(&a.csv).with_context(|| format!("reading {}", a.csv.display()))?)
        .with_context(|| format!("parsing {}", a.csv.display()))?;
    let s = sim::summarize(&rows);
    println!("{s}");
    if let Some(p) = &a.out {
        sim::write_summary(File::create(p)?, &s)?;
    }
    if s.max_cons_err > bound {
        println!("FAIL: max error {:.3e} exceeds bound {:.3e}", s.max_cons_err, bound);
        Ok(ExitCode::FAILURE)
    } else {
        println!("ok: max error {:.3e} within bound {:.3e}", s.max_cons_err, bound);
        Ok(ExitCode::SUCCESS)
    }
}
