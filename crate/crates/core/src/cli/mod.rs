//! Command-line front end: configuration, one subcommand per method, map
//! evaluation and the bundled demo.

pub mod config;
pub mod export;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use crate::bench;
use crate::cells::{read_library_file, write_library_file, GaussianMixture};
use crate::error::{Error, Result};
use crate::fuse::{confusion, metrics, MetricsTable};
use crate::geo3d::write_points_file;
use crate::map::TraversabilityMap;
use crate::pipeline::{
    lidar_scan, run_cells_frame, run_fusion_sequence, run_ground_sequence, run_radar_frame, stereo_scan,
    thermal_cloud, train_cell_library, CellSetup, GroundSetup,
};
use crate::radar::{detect_obstacles, write_pgm, write_radar_image_file, RadarObstacle};
use crate::radarstereo::{write_obstacle_csv_file, Characterized};
use crate::rng::indexed_stream;
use crate::sim::scenarios::{drift_sequence, fusion_sequence, maize_field, open_field};
use crate::sim::{generate_scene, ground_truth, render_radar_image, GroundTruth, SceneSpec, SensorParams};
use crate::textio::fmt17;

pub use config::PipelineConfig;
pub use export::{export_map, write_ppm};

#[derive(Debug, Parser)]
#[command(name = "fieldsense", version, about = "Traversability and obstacle detection on simulated field scenes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Pipeline configuration file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the configured frame count.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Method variant: the ground sensor (`stereo`, `lidar`) or, for
    /// `demo`, the stage to run (`all`, `ground`, `fuse`, `radar`, `cells`).
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render sensor data and ground truth for the configured scene.
    Simulate(RunArgs),
    /// Self-learning ground classification over a frame sequence.
    Ground(RunArgs),
    /// LIDAR and stereo ground classification fused per frame.
    Fuse(RunArgs),
    /// Radar obstacle detection.
    Radar(RunArgs),
    /// Radar detection characterized with stereo points.
    Radarstereo(RunArgs),
    /// Cell classification against a trained traversable library.
    Cells(RunArgs),
    /// Compare a predicted map with a truth map.
    Eval {
        pred: PathBuf,
        truth: PathBuf,
        /// Directory for the metrics CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every method on built-in scenes.
    Demo(RunArgs),
}

/// Per-method metric tables, obstacle rows and stage timings of a run.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub tables: Vec<(String, MetricsTable)>,
    pub obstacles: Vec<String>,
    pub timings: Vec<(String, Duration)>,
}

impl RunReport {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage))?;
        self.timings.push((stage.to_string(), t.elapsed()));
        Ok(out)
    }

    /// Aggregate metric tables and obstacle rows; timings are left out so
    /// the text depends only on the inputs.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (name, table) in &self.tables {
            s.push_str(&metrics(&table.aggregate()).table(name));
            s.push('\n');
        }
        for row in &self.obstacles {
            let _ = writeln!(s, "{row}");
        }
        s
    }

    pub fn timing_lines(&self) -> String {
        self.timings.iter().map(|(n, d)| format!("{n}: {:.3} s\n", d.as_secs_f64())).collect()
    }
}

/// Loads the config named by `args` (or the defaults), applies the flag
/// overrides and validates the result.
pub fn load_config(args: &RunArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(f) = args.frames {
        cfg.frames = f;
    }
    if let Some(m) = &args.method {
        config::parse_sensor(m)?;
        cfg.ground.sensor = m.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn write_table(path: &Path, table: &MetricsTable) -> Result<()> {
    let mut w = create(path)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// The configured scene repeated for every frame, or `fallback`.
fn sequence(cfg: &PipelineConfig, fallback: impl FnOnce() -> Vec<SceneSpec>) -> Result<Vec<SceneSpec>> {
    Ok(match cfg.scene_spec()? {
        Some(s) => vec![s; cfg.frames],
        None => fallback(),
    })
}

pub fn simulate(cfg: &PipelineConfig, report: &mut RunReport) -> Result<()> {
    let spec = cfg.scene_spec()?.unwrap_or_else(|| maize_field(cfg.seed, true));
    let scene = generate_scene(&spec)?;
    let out = &cfg.out;
    std::fs::create_dir_all(out)?;
    write_text(&out.join("scene.toml"), &spec.to_toml()?)?;
    let truth = ground_truth(&scene, cfg.ground.grid.geometry()?);
    export_map(&truth.to_map(), out, "truth")?;
    for f in 0..cfg.frames as u64 {
        report.time("simulate", || {
            write_points_file(&stereo_scan(&scene, &cfg.sensors, cfg.seed, f).cloud, &out.join(format!("stereo_{f:03}.pts")))?;
            write_points_file(&lidar_scan(&scene, &cfg.sensors, cfg.seed, f).cloud, &out.join(format!("lidar_{f:03}.pts")))?;
            let cells = cfg.cells.setup()?;
            let thermal = thermal_cloud(&scene, &cfg.sensors, &cells.hdr, cfg.seed, f)?;
            write_points_file(&thermal, &out.join(format!("thermal_{f:03}.pts")))?;
            let img = render_radar_image(&scene, &cfg.sensors.radar, &mut indexed_stream(cfg.seed, "sim.radar", f))?;
            write_radar_image_file(&img, &out.join(format!("radar_{f:03}.rad")))
        })?;
    }
    Ok(())
}

pub fn ground(cfg: &PipelineConfig, report: &mut RunReport) -> Result<()> {
    let specs = sequence(cfg, || drift_sequence(cfg.seed, cfg.frames, bench::DRIFT_RISE))?;
    let which = config::parse_sensor(&cfg.ground.sensor)?;
    run_ground(&specs, &cfg.sensors, &cfg.ground.setup()?, which, cfg.seed, &cfg.out, report)
}

fn run_ground(
    specs: &[SceneSpec],
    sensors: &SensorParams,
    setup: &GroundSetup,
    which: crate::pipeline::GroundSensor,
    seed: u64,
    out: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let frames = report.time("ground", || run_ground_sequence(specs, sensors, setup, which, false, seed))?;
    let mut table = MetricsTable::default();
    for f in &frames {
        export_map(&f.map, out, &format!("ground_{:03}", f.frame))?;
        table.push(f.frame.to_string(), f.confusion);
    }
    write_table(&out.join("ground_metrics.csv"), &table)?;
    report.tables.push(("Ground".into(), table));
    Ok(())
}

pub fn fuse(cfg: &PipelineConfig, report: &mut RunReport) -> Result<()> {
    let specs = sequence(cfg, || fusion_sequence(cfg.seed, cfg.frames))?;
    let (wl, ws) = cfg.fusion.weights()?;
    run_fuse(&specs, &cfg.sensors, &cfg.ground.setup()?, wl, ws, cfg.seed, &cfg.out, report)
}

#[allow(clippy::too_many_arguments)]
fn run_fuse(
    specs: &[SceneSpec],
    sensors: &SensorParams,
    setup: &GroundSetup,
    wl: crate::fuse::ClassifierWeights,
    ws: crate::fuse::ClassifierWeights,
    seed: u64,
    out: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let frames = report.time("fuse", || run_fusion_sequence(specs, sensors, setup, wl, ws, seed))?;
    let (mut tl, mut ts, mut tf) = (MetricsTable::default(), MetricsTable::default(), MetricsTable::default());
    for f in &frames {
        let name = f.fused.frame.to_string();
        export_map(&f.fused.map, out, &format!("fused_{name:0>3}"))?;
        tl.push(name.clone(), f.confusion_lidar);
        ts.push(name.clone(), f.confusion_stereo);
        tf.push(name, f.confusion_fused);
    }
    for (label, file, table) in [("LIDAR", "lidar", tl), ("Stereo", "stereo", ts), ("Combined", "fused", tf)] {
        write_table(&out.join(format!("fuse_{file}_metrics.csv")), &table)?;
        report.tables.push((label.into(), table));
    }
    Ok(())
}

fn obstacle_row(frame: u64, id: usize, o: &RadarObstacle) -> String {
    format!(
        "{frame},{id},{},{},{},{},{}",
        fmt17(o.centroid.0),
        fmt17(o.centroid.1),
        fmt17(o.range()),
        fmt17(o.area),
        o.member_cells
    )
}

fn radar_scene(cfg: &PipelineConfig) -> Result<SceneSpec> {
    match cfg.scene_spec()? {
        Some(s) => Ok(s),
        None => Ok(bench::calibrated_pole_field(cfg.seed, &cfg.sensors)?.0),
    }
}

pub fn radar(cfg: &PipelineConfig, report: &mut RunReport) -> Result<()> {
    let spec = radar_scene(cfg)?;
    let scene = generate_scene(&spec)?;
    let params = cfg.radar.params();
    let out = &cfg.out;
    let mut rows = vec!["frame,id,cx,cy,range,area,cells".to_string()];
    for f in 0..cfg.frames as u64 {
        let det = report.time("radar", || {
            let img = render_radar_image(&scene, &cfg.sensors.radar, &mut indexed_stream(cfg.seed, "sim.radar", f))?;
            detect_obstacles(&img, &params)
        })?;
        let g = det.mask.geometry;
        let flipped: Vec<bool> = (0..g.n_rows).rev().flat_map(|r| (0..g.n_cols).map(move |c| (r, c))).map(|(r, c)| det.mask.cells[g.index(r, c)]).collect();
        let mut w = create(&out.join(format!("radar_mask_{f:03}.pgm")))?;
        write_pgm(&mut w, g.n_cols, g.n_rows, &flipped)?;
        w.flush()?;
        rows.extend(det.obstacles.iter().enumerate().map(|(i, o)| obstacle_row(f, i, o)));
    }
    report.obstacles.push(format!("radar obstacles: {}", rows.len() - 1));
    write_text(&out.join("radar_obstacles.csv"), &(rows.join("\n") + "\n"))
}

/// Matches characterized obstacles to the nearest true obstacle within
/// `radius` and returns `(centroid error, height error)` pairs.
fn localization_errors(found: &[Characterized], truth: &GroundTruth, radius: f64) -> Vec<(f64, f64)> {
    found
        .iter()
        .filter_map(|c| c.info.as_ref())
        .filter_map(|info| {
            let (cx, cy) = info.centroid_2d;
            truth
                .obstacles
                .iter()
                .map(|t| ((t.centroid.0 - cx).hypot(t.centroid.1 - cy), t))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .filter(|(d, _)| *d < radius)
                .map(|(d, t)| (d, (info.max_height - t.height).abs()))
        })
        .collect()
}

pub fn radarstereo(cfg: &PipelineConfig, report: &mut RunReport) -> Result<()> {
    let spec = radar_scene(cfg)?;
    run_radarstereo(&spec, &cfg.sensors, cfg, &cfg.ground.setup()?, report)
}

fn run_radarstereo(
    spec: &SceneSpec,
    sensors: &SensorParams,
    cfg: &PipelineConfig,
    setup: &GroundSetup,
    report: &mut RunReport,
) -> Result<()> {
    let (radar, rs) = (cfg.radar.params(), cfg.radarstereo.params());
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for f in 0..cfg.frames as u64 {
        let out = report.time("radarstereo", || run_radar_frame(spec, sensors, &radar, &rs, setup, cfg.seed, f))?;
        errors.extend(localization_errors(&out.characterized, &out.truth, bench::POLE_MATCH_RADIUS));
        rows.extend(out.characterized.iter().filter_map(|c| c.info.clone().map(|i| (f, c.obstacle, i))));
    }
    write_obstacle_csv_file(&cfg.out.join("radarstereo_obstacles.csv"), &rows)?;
    let n = errors.len();
    let mut line = format!("characterized obstacles: {}, matched to truth: {n}", rows.len());
    if n > 0 {
        let rms = (errors.iter().map(|e| e.0 * e.0).sum::<f64>() / n as f64).sqrt();
        let max_h = errors.iter().map(|e| e.1).fold(0.0, f64::max);
        let _ = write!(line, ", centroid RMS {rms:.3} m, max height error {max_h:.3} m");
    }
    report.obstacles.push(line);
    Ok(())
}

fn cell_library(cfg: &PipelineConfig, sensors: &SensorParams, setup: &CellSetup, report: &mut RunReport) -> Result<Vec<GaussianMixture>> {
    if let Some(p) = &cfg.cells.library {
        return read_library_file(p);
    }
    let specs = match cfg.training_specs()? {
        s if s.is_empty() => bench::cell_training_specs(),
        s => s,
    };
    let library = report.time("cells training", || train_cell_library(&specs, sensors, setup, cfg.seed))?;
    write_library_file(&library, &cfg.out.join("library.txt"))?;
    Ok(library)
}

pub fn cells(cfg: &PipelineConfig, report: &mut RunReport) -> Result<()> {
    let setup = cfg.cells.setup()?;
    let library = cell_library(cfg, &cfg.sensors, &setup, report)?;
    let spec = cfg.scene_spec()?.unwrap_or_else(|| maize_field(cfg.seed, true));
    run_cells(&spec, &library, &cfg.sensors, &setup, cfg.seed, cfg.frames, &cfg.out, report)
}

#[allow(clippy::too_many_arguments)]
fn run_cells(
    spec: &SceneSpec,
    library: &[GaussianMixture],
    sensors: &SensorParams,
    setup: &CellSetup,
    seed: u64,
    frames: usize,
    out: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let mut table = MetricsTable::default();
    for f in 0..frames as u64 {
        let o = report.time("cells", || run_cells_frame(spec, library, sensors, setup, seed, f))?;
        export_map(&o.grid.to_map(), out, &format!("cells_{f:03}"))?;
        table.push(f.to_string(), o.confusion);
    }
    write_table(&out.join("cells_metrics.csv"), &table)?;
    report.tables.push(("Cells".into(), table));
    Ok(())
}

/// Scores `pred` against `truth`; both must share a grid.
pub fn eval(pred: &TraversabilityMap, truth: &TraversabilityMap) -> Result<MetricsTable> {
    if pred.geometry != truth.geometry {
        return Err(Error::Configuration(format!(
            "map geometries differ: {:?} vs {:?}",
            pred.geometry, truth.geometry
        )));
    }
    let mut table = MetricsTable::default();
    table.push("map", confusion(&pred.labels(), &truth.labels())?);
    Ok(table)
}

pub const DEMO_STAGES: [&str; 4] = ["ground", "fuse", "radar", "cells"];

/// Small runs of every method on the benchmark scenes with their
/// calibrated settings. Everything written depends only on `seed`.
pub fn demo(seed: u64, out: &Path, stage: &str, report: &mut RunReport) -> Result<()> {
    if stage != "all" && !DEMO_STAGES.contains(&stage) {
        return Err(Error::Configuration(format!("unknown demo stage `{stage}`")));
    }
    let wants = |s: &str| stage == "all" || stage == s;
    std::fs::create_dir_all(out)?;
    if wants("ground") {
        let specs = drift_sequence(seed, 6, bench::DRIFT_RISE);
        let dir = out.join("ground");
        std::fs::create_dir_all(&dir)?;
        run_ground(&specs, &bench::wide_baseline_sensors(), &bench::drift_setup(), crate::pipeline::GroundSensor::Stereo, seed, &dir, report)?;
    }
    if wants("fuse") {
        let specs = fusion_sequence(seed, 2);
        let dir = out.join("fuse");
        std::fs::create_dir_all(&dir)?;
        let (wl, ws) = (crate::fuse::ClassifierWeights::LIDAR_DEFAULT, crate::fuse::ClassifierWeights::STEREO_DEFAULT);
        run_fuse(&specs, &bench::wide_baseline_sensors(), &bench::fusion_setup(), wl, ws, seed, &dir, report)?;
    }
    if wants("radar") {
        let sensors = bench::pole_sensors();
        let (spec, _) = bench::calibrated_pole_field(seed, &sensors)?;
        let dir = out.join("radar");
        std::fs::create_dir_all(&dir)?;
        let mut cfg = PipelineConfig { seed, frames: 1, out: dir, ..Default::default() };
        let r = bench::pole_radar_params();
        cfg.radar = config::RadarSection {
            n_train: r.cfar.n_train,
            n_guard: r.cfar.n_guard,
            p_fa: r.cfar.p_fa,
            cell_size: r.cell_size,
            extent: r.extent,
            open_radius: r.open_radius,
            min_area: r.min_area,
            close_radius: r.close_radius,
        };
        run_radarstereo(&spec, &sensors, &cfg, &bench::pole_ground_setup(), report)?;
    }
    if wants("cells") {
        let dir = out.join("cells");
        std::fs::create_dir_all(&dir)?;
        let sensors = SensorParams::default();
        let setup = bench::cell_setup();
        let library = report.time("cells training", || {
            train_cell_library(&[open_field(seed), maize_field(seed.wrapping_add(1), false)], &sensors, &setup, seed)
        })?;
        write_library_file(&library, &dir.join("library.txt"))?;
        run_cells(&maize_field(seed, true), &library, &sensors, &setup, seed, 1, &dir, report)?;
    }
    write_text(&out.join("report.txt"), &report.summary())
}

fn run_with(args: &RunArgs, f: fn(&PipelineConfig, &mut RunReport) -> Result<()>) -> Result<RunReport> {
    let cfg = load_config(args)?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut report = RunReport::default();
    f(&cfg, &mut report)?;
    write_text(&cfg.out.join("report.txt"), &report.summary())?;
    Ok(report)
}

/// Runs a parsed command line and returns the text to print.
pub fn execute(cli: Cli) -> Result<RunReport> {
    match cli.command {
        Command::Simulate(a) => run_with(&a, simulate),
        Command::Ground(a) => run_with(&a, ground),
        Command::Fuse(a) => run_with(&a, fuse),
        Command::Radar(a) => run_with(&a, radar),
        Command::Radarstereo(a) => run_with(&a, radarstereo),
        Command::Cells(a) => run_with(&a, cells),
        Command::Eval { pred, truth, out } => {
            let table = eval(&TraversabilityMap::read_csv_file(&pred)?, &TraversabilityMap::read_csv_file(&truth)?)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                write_table(&dir.join("eval.csv"), &table)?;
            }
            Ok(RunReport { tables: vec![("Evaluation".into(), table)], ..Default::default() })
        }
        Command::Demo(a) => {
            let seed = a.seed.unwrap_or(0);
            let out = a.out.clone().unwrap_or_else(|| PathBuf::from("demo_out"));
            let mut report = RunReport::default();
            demo(seed, &out, a.method.as_deref().unwrap_or("all"), &mut report)?;
            Ok(report)
        }
    }
}

/// Entry point for the binary: prints the summary, timings to stderr, and
/// maps errors to exit code 1.
pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(report) => {
            print!("{}", report.summary());
            eprint!("{}", report.timing_lines());
            std::process::ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}
