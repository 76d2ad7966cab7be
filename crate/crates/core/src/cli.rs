//! Batch front-end: `plan`, `synth`, `inspect`, `report-compare`.
//!
//! Progress goes to stderr, results to files under `--out`. Exit codes:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success                                   |
//! | 1    | any other failure                         |
//! | 2    | unreadable or malformed input, bad usage  |
//! | 3    | invalid geometry or defect placement      |
//! | 4    | output directory not writable             |
//! | 5    | missing or corrupt image                  |
//! | 6    | no truth defects or no trials to compare  |

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::config::{load_defects, Config};
use crate::error::Error;
use crate::inspect::{inspect_tiles, ThresholdMode};
use crate::locate::stitch_panorama;
use crate::manifest::{tile_file_name, RunManifest, MANIFEST_FILE};
use crate::pgm;
use crate::report::{compare_trials, trial_table, write_trial_csv, DefectReport};
use crate::scanplan::plan_scan;
use crate::synth::{add_noise_stream, build_texture, render_tile, TruthSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_GEOMETRY: i32 = 3;
pub const EXIT_OUTPUT: i32 = 4;
pub const EXIT_IMAGE: i32 = 5;
pub const EXIT_NO_TRUTH: i32 = 6;

pub const THREADS_ENV: &str = "BORESCAN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "borescan", version, about = "Inner-surface inspection of fine holes")]
pub struct Cli {
    /// Worker threads; falls back to BORESCAN_THREADS, then all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThresholdArg {
    Fixed,
    Otsu,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the capture schedule and write a plan-only manifest.
    Plan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Render a synthetic image stack with known defects.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// TOML defect list; omit for a blank surface.
        #[arg(long)]
        defects: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Noise standard deviation as a fraction of full scale.
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
    /// Correct, detect, locate and report defects for a stack.
    Inspect {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Detection settings; the manifest supplies the geometry.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        threshold: Option<ThresholdArg>,
        /// Skip writing corrected tiles and the panorama.
        #[arg(long)]
        no_images: bool,
    },
    /// Aggregate per-trial reports against the manifest's truth.
    ReportCompare {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report JSON files, one per trial.
        reports: Vec<PathBuf>,
    },
}

/// A failed command: exit code plus message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_) => EXIT_PARSE,
        Error::InvalidConfig(_)
        | Error::DegenerateOptics(_)
        | Error::Domain(_)
        | Error::ChordExceedsDiameter { .. }
        | Error::OutOfDomain { .. }
        | Error::DegeneratePlan(_)
        | Error::Placement(_) => EXIT_GEOMETRY,
        Error::Image { .. } | Error::Format(_) => EXIT_IMAGE,
        Error::NoTruth | Error::NoTrials => EXIT_NO_TRUTH,
        _ => EXIT_OTHER,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(exit_code(&e), e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn input_err(path: &Path, e: Error) -> Failure {
    match e {
        Error::Io(io) => Failure::new(EXIT_PARSE, format!("{}: {io}", path.display())),
        other => other.into(),
    }
}

fn output_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_OUTPUT, format!("cannot write {}: {e}", path.display()))
}

fn prepare_out(dir: &Path) -> std::result::Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| output_err(dir, e))?;
    // creating a directory that already exists says nothing about writability
    let probe = dir.join(".borescan-write-test");
    fs::write(&probe, b"").map_err(|e| output_err(dir, e))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes).map_err(|e| output_err(path, e))
}

fn load_config(path: &Path) -> std::result::Result<Config, Failure> {
    let cfg = Config::load(path).map_err(|e| input_err(path, e))?;
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_threads(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var(THREADS_ENV).ok()?.trim().parse().ok())
        .filter(|&n| n > 0)
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = resolve_threads(cli.threads) {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_OTHER;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::Plan { config, out } => cmd_plan(&config, &out),
        Command::Synth {
            config,
            defects,
            out,
            seed,
            noise_sigma,
        } => cmd_synth(&config, defects.as_deref(), &out, seed, noise_sigma),
        Command::Inspect {
            manifest,
            out,
            config,
            threshold,
            no_images,
        } => cmd_inspect(&manifest, &out, config.as_deref(), threshold, !no_images),
        Command::ReportCompare {
            manifest,
            out,
            reports,
        } => cmd_report_compare(&manifest, out.as_deref(), &reports),
    }
}

pub fn cmd_plan(config: &Path, out: &Path) -> CmdResult {
    let cfg = load_config(config)?;
    let plan = plan_scan(&cfg.hole, &cfg.region)?;
    println!(
        "n_rot={} n_depth={} alpha={} step={} captures={}",
        plan.n_rot,
        plan.n_depth,
        plan.alpha,
        plan.step,
        plan.len()
    );
    if plan.redundant_last_row {
        eprintln!("note: the top row only re-covers depth already covered");
    }
    prepare_out(out)?;
    let mut manifest = RunManifest::new(cfg.hole, cfg.optics, cfg.region, plan);
    manifest.seed = cfg.synth.seed;
    manifest.bit_depth = cfg.synth.bit_depth;
    let path = out.join(MANIFEST_FILE);
    write_file(&path, (manifest.to_json() + "\n").as_bytes())
}

pub fn cmd_synth(
    config: &Path,
    defects: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    noise_sigma: Option<f64>,
) -> CmdResult {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.synth.seed = s;
    }
    if let Some(n) = noise_sigma {
        if !(n >= 0.0 && n.is_finite()) {
            return Err(Failure::new(EXIT_PARSE, format!("--noise-sigma must be >= 0, got {n}")));
        }
        cfg.synth.noise_sigma = n;
    }
    let truth = match defects {
        Some(p) => load_defects(p).map_err(|e| input_err(p, e))?,
        None => TruthSet::default(),
    };
    let plan = plan_scan(&cfg.hole, &cfg.region)?;
    let texture = build_texture(
        &cfg.hole,
        &truth.defects,
        cfg.synth.background,
        cfg.optics.p_x,
        cfg.optics.p_y,
    )?;
    for w in &texture.warnings {
        eprintln!("warning: {w}");
    }
    prepare_out(out)?;

    let started = Instant::now();
    let sigma = cfg.synth.noise_sigma * cfg.synth.bit_depth.max_value() as f64;
    // one column at a time keeps memory bounded on deep holes
    for k in 0..plan.n_rot {
        let column: Vec<_> = plan.schedule.iter().filter(|e| e.k == k).collect();
        let tiles: Vec<_> = column
            .par_iter()
            .map(|ev| {
                let clean = render_tile(&texture, ev, &cfg.optics, &cfg.region, cfg.synth.bit_depth)?;
                Ok(add_noise_stream(&clean, sigma, cfg.synth.seed, ev.order as u64))
            })
            .collect::<crate::error::Result<_>>()?;
        for (ev, tile) in column.iter().zip(&tiles) {
            let path = out.join(tile_file_name(ev.index()));
            write_file(&path, &pgm::encode(tile))?;
        }
        eprintln!("synth: column {}/{} written", k + 1, plan.n_rot);
    }

    let mut manifest = RunManifest::new(cfg.hole, cfg.optics, cfg.region, plan).with_default_images();
    manifest.seed = cfg.synth.seed;
    manifest.noise_sigma = cfg.synth.noise_sigma;
    manifest.bit_depth = cfg.synth.bit_depth;
    manifest.truth = Some(truth);
    let path = out.join(MANIFEST_FILE);
    write_file(&path, (manifest.to_json() + "\n").as_bytes())?;
    eprintln!(
        "synth: {} images in {:.1} s",
        manifest.images.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

pub fn cmd_inspect(
    manifest_path: &Path,
    out: &Path,
    config: Option<&Path>,
    threshold: Option<ThresholdArg>,
    write_images: bool,
) -> CmdResult {
    let manifest = RunManifest::load(manifest_path).map_err(|e| input_err(manifest_path, e))?;
    let mut detect = match config {
        Some(p) => load_config(p)?.detect,
        None => Default::default(),
    };
    if let Some(t) = threshold {
        detect.threshold = match t {
            ThresholdArg::Fixed => ThresholdMode::Fixed,
            ThresholdArg::Otsu => ThresholdMode::Otsu,
        };
    }
    prepare_out(out)?;

    let started = Instant::now();
    let captures = manifest.load_images(manifest_path)?;
    eprintln!("inspect: {} images loaded", captures.len());
    let result = inspect_tiles(&captures, &manifest.plan, &manifest.hole, &manifest.optics, &detect)?;
    drop(captures);
    eprintln!(
        "inspect: {} defects after fusion ({:.1} s)",
        result.records.len(),
        started.elapsed().as_secs_f64()
    );

    let mut report = DefectReport::new(result.records);
    if let Some(truth) = &manifest.truth {
        report = report.with_truth(truth, &manifest.hole);
    }
    let json = out.join("report.json");
    write_file(&json, (report.to_json() + "\n").as_bytes())?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_file(&out.join("report.csv"), &csv)?;

    if write_images && !result.corrected.is_empty() {
        let dir = out.join("corrected");
        prepare_out(&dir)?;
        for tile in &result.corrected {
            write_file(&dir.join(tile_file_name(tile.tile_index)), &pgm::encode(tile))?;
        }
        let pano = stitch_panorama(&result.corrected, &manifest.plan, &manifest.hole, &manifest.optics)?;
        write_file(&out.join("panorama.pgm"), &pgm::encode(&pano.image))?;
        if pano.gap_pixels > 0 {
            eprintln!("inspect: panorama has {} uncovered pixels", pano.gap_pixels);
        }
    }
    eprintln!("inspect: done in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}

pub fn cmd_report_compare(manifest_path: &Path, out: Option<&Path>, reports: &[PathBuf]) -> CmdResult {
    let text = fs::read_to_string(manifest_path).map_err(|e| input_err(manifest_path, e.into()))?;
    let manifest = RunManifest::from_json(&text)
        .map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", manifest_path.display())))?;
    let truth = manifest
        .truth
        .as_ref()
        .filter(|t| !t.defects.is_empty())
        .ok_or_else(|| Failure::new(EXIT_NO_TRUTH, format!("{}: no truth defects", manifest_path.display())))?;
    if reports.is_empty() {
        return Err(Error::NoTrials.into());
    }
    let trials = reports
        .iter()
        .map(|p| DefectReport::load(p).map(|r| r.records).map_err(|e| input_err(p, e)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let rows = compare_trials(&trials, truth, &manifest.hole)?;
    print!("{}", trial_table(&rows));
    if let Some(dir) = out {
        prepare_out(dir)?;
        let mut csv = Vec::new();
        write_trial_csv(&rows, &mut csv)?;
        write_file(&dir.join("compare.csv"), &csv)?;
        let json = serde_json::to_string_pretty(&rows).expect("rows serialize");
        write_file(&dir.join("compare.json"), (json + "\n").as_bytes())?;
    }
    Ok(())
}
