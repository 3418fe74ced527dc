//! The `fishpair` command line.
//!
//! Every subcommand takes `--config FILE` (TOML with the same keys as the
//! flags, optionally under `[args]`), refuses to overwrite outputs without
//! `--force`, and writes a TOML sidecar next to its output holding the fully
//! resolved arguments. Feeding a sidecar back through `--config` reproduces
//! the outputs byte for byte.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::abc::{self, AbcConfig, InteractionParams, KickDistributions};
use crate::dli::{self, Architecture, DliModel, TrainConfig, DEFAULT_HIDDEN};
use crate::engine::{self, Containment, RolloutConfig};
use crate::exec::{with_threads, Exec};
use crate::geometry::ArenaSpec;
use crate::ingest::{self, CleanConfig, SPLIT_FRACTIONS};
use crate::metrics::{self, Battery, MetricsConfig, CURVE_NAMES, PDF_NAMES};
use crate::neural::AdamConfig;
use crate::trajectory::Trajectory;

#[derive(Debug, Parser)]
#[command(name = "fishpair", version, about = "Pairwise fish interaction models and validation")]
pub struct Cli {
    /// Worker threads for data-parallel stages.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean raw tracking CSVs and split them into train/validation/test.
    Ingest(Run<IngestArgs>),
    /// Simulate a pair with the burst-and-coast model.
    SimulateAbc(Run<SimulateArgs>),
    /// Train the interaction network on trajectory CSVs.
    Train(Run<TrainArgs>),
    /// Roll out a trained network in closed loop.
    Rollout(Run<RolloutArgs>),
    /// Compute the observable battery of one trajectory.
    Validate(Run<ValidateArgs>),
    /// Compare the observables of two trajectories.
    Compare(Run<CompareArgs>),
}

#[derive(Debug, Args)]
pub struct Run<T: Args> {
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
    /// Output file or directory.
    #[arg(long, short)]
    pub output: PathBuf,
    #[command(flatten)]
    pub args: T,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArenaArgs {
    /// Tank radius, cm.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Body length, cm.
    #[arg(long)]
    pub body_length: Option<f64>,
    /// Output time step, s.
    #[arg(long)]
    pub dt: Option<f64>,
}

impl ArenaArgs {
    fn resolve(&mut self) -> Result<ArenaSpec> {
        let d = ArenaSpec::default();
        let a = ArenaSpec::new(
            *self.radius.get_or_insert(d.radius),
            *self.body_length.get_or_insert(d.body_length),
            *self.dt.get_or_insert(d.dt),
        )?;
        Ok(a)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestArgs {
    /// Directory of raw `t,agent,x,y` CSV runs.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Source frame rate in Hz; inferred from the data when absent.
    #[arg(long)]
    pub source_rate: Option<f64>,
    /// Longest interior gap to interpolate, in source frames.
    #[arg(long)]
    pub max_gap: Option<usize>,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub arena: ArenaArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// Output ticks.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file of interaction parameters.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// CSV table `l_cm,tau_s,weight` replacing the parametric kick laws.
    #[arg(long)]
    pub kicks: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub arena: ArenaArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainArgs {
    /// Training trajectory CSV.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Validation trajectory CSV; when absent the training file is cut into
    /// chunks and split.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    /// Share of chunks held out when no validation file is given.
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Chunk length in s used for the held-out split.
    #[arg(long)]
    pub chunk_seconds: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    /// LSTM width (dense width for the ablation).
    #[arg(long)]
    pub hidden: Option<usize>,
    /// `dli` or the memoryless `mli` ablation.
    #[arg(long)]
    pub ablation: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub arena: ArenaArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub agents: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `reflect` or `clamp`.
    #[arg(long)]
    pub containment: Option<String>,
    /// Use the x deviation in the y noise term.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub strict_paper_noise: Option<bool>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateArgs {
    /// Trajectory CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Largest correlation lag, s.
    #[arg(long)]
    pub max_lag: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub arena: ArenaArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareArgs {
    /// Reference trajectory CSV.
    pub first: Option<PathBuf>,
    /// Trajectory CSV compared against the reference.
    pub second: Option<PathBuf>,
    #[arg(long)]
    pub max_lag: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub arena: ArenaArgs,
}

/// Parses and runs; returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let jobs = cli.jobs;
    with_threads(jobs, move || match cli.command {
        Command::Ingest(r) => cmd_ingest(r),
        Command::SimulateAbc(r) => cmd_simulate_abc(r),
        Command::Train(r) => cmd_train(r),
        Command::Rollout(r) => cmd_rollout(r),
        Command::Validate(r) => cmd_validate(r),
        Command::Compare(r) => cmd_compare(r),
    })
}

/// Flags override config-file values key by key.
fn merge_config<T: Serialize + DeserializeOwned + Args>(
    command: &str,
    cli: &T,
    config: Option<&Path>,
) -> Result<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(cli)?)?);
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut table: toml::Table =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(c) = table.get("command").and_then(|c| c.as_str()) {
        ensure!(
            c == command,
            "{} is a config for `{c}`, not `{command}`",
            path.display()
        );
    }
    let args = match table.remove("args") {
        Some(toml::Value::Table(t)) => t,
        Some(_) => bail!("{}: `args` must be a table", path.display()),
        None => {
            table.remove("command");
            table.remove("meta");
            table
        }
    };
    let file: T = args
        .try_into()
        .with_context(|| format!("invalid keys in {}", path.display()))?;
    let mut base = serde_json::to_value(&file)?;
    let over = serde_json::to_value(cli)?;
    if let (Some(b), Some(o)) = (base.as_object_mut(), over.as_object()) {
        for (k, v) in o {
            if !v.is_null() {
                b.insert(k.clone(), v.clone());
            }
        }
    }
    Ok(serde_json::from_value(base)?)
}

#[derive(Serialize)]
struct Sidecar<'a, T: Serialize> {
    command: &'a str,
    args: &'a T,
    meta: toml::Table,
}

fn write_sidecar<T: Serialize>(path: &Path, command: &str, args: &T, meta: toml::Table) -> Result<()> {
    let s = toml::to_string(&Sidecar {
        command,
        args,
        meta,
    })?;
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".run.toml");
    PathBuf::from(s)
}

fn check_outputs(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    for p in paths {
        if p.exists() {
            bail!("{} already exists (use --force to overwrite)", p.display());
        }
    }
    Ok(())
}

fn require<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone().with_context(|| format!("missing required --{flag}"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn meta_table(v: serde_json::Value) -> Result<toml::Table> {
    let s = serde_json::to_string(&v)?;
    let t: toml::Table = serde_json::from_str(&s)?;
    Ok(t)
}

fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    ensure!(traj.all_positions_finite(), "trajectory contains non-finite positions");
    traj.write_csv_file(path)?;
    Ok(())
}

fn cmd_ingest(r: Run<IngestArgs>) -> Result<()> {
    let mut a = merge_config("ingest", &r.args, r.config.as_deref())?;
    let input = require(&a.input, "input")?;
    let arena = a.arena.resolve()?;
    let seed = *a.seed.get_or_insert(0);
    let max_gap = *a.max_gap.get_or_insert(ingest::MAX_GAP_FRAMES);
    let fr = a.split.get_or_insert(SPLIT_FRACTIONS.to_vec()).clone();
    ensure!(fr.len() == 3, "--split needs three fractions");
    ensure!(input.is_dir(), "input directory {} does not exist", input.display());

    let out = &r.output;
    let files: Vec<PathBuf> = ["train.csv", "validation.csv", "test.csv", "run.toml"]
        .iter()
        .map(|f| out.join(f))
        .collect();
    check_outputs(&files, r.force)?;

    let raws = ingest::load_dir(&input, a.source_rate.map(|hz| 1.0 / hz))?;
    let clean = ingest::clean_runs(&raws, &CleanConfig { arena, max_gap }, Exec::Parallel)?;
    let prov = clean.provenance;
    ensure!(prov.balanced(), "frame accounting does not balance: {prov:?}");
    let split = ingest::split(clean.segments, [fr[0], fr[1], fr[2]], seed)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (segs, path) in [&split.train, &split.validation, &split.test].into_iter().zip(&files) {
        write_trajectory(&Trajectory::new(arena, segs.clone()), path)?;
    }
    println!(
        "input_frames={} output_frames={} removed_inactive={} removed_leap={} boundary_dropped={} decimated={} gap_filled={}",
        prov.input_frames,
        prov.output_frames,
        prov.removed_inactive,
        prov.removed_leap,
        prov.boundary_dropped,
        prov.decimated,
        prov.gap_filled
    );
    let meta = meta_table(serde_json::json!({
        "runs": raws.len(),
        "provenance": prov,
        "segments": {
            "train": split.train.len(),
            "validation": split.validation.len(),
            "test": split.test.len(),
        },
    }))?;
    write_sidecar(&files[3], "ingest", &a, meta)
}

fn cmd_simulate_abc(r: Run<SimulateArgs>) -> Result<()> {
    let mut a = merge_config("simulate-abc", &r.args, r.config.as_deref())?;
    let steps = *a.steps.get_or_insert(500_000);
    ensure!(steps > 0, "--steps must be positive");
    let seed = *a.seed.get_or_insert(0);
    let arena = a.arena.resolve()?;
    let params = match &a.params {
        Some(p) => InteractionParams::load(p)?,
        None => InteractionParams::default(),
    };
    let kicks = match &a.kicks {
        Some(p) => KickDistributions::load_table(p)?,
        None => KickDistributions::default(),
    };
    let side = sidecar_path(&r.output);
    check_outputs(&[r.output.clone(), side.clone()], r.force)?;
    let cfg = AbcConfig {
        arena,
        params,
        kicks,
    };
    let (traj, log) = abc::simulate_trajectory(steps, &cfg, seed)?;
    write_trajectory(&traj, &r.output)?;
    let meta = meta_table(serde_json::json!({
        "kicks": cfg.kicks.describe(),
        "interaction": serde_json::to_value(params)?,
        "containment": {
            "redraws": log.redraws,
            "reflections": log.reflections,
            "shortened": log.shortened,
        },
    }))?;
    write_sidecar(&side, "simulate-abc", &a, meta)
}

fn load_trajectory(path: &Path, arena: ArenaSpec) -> Result<Trajectory> {
    Trajectory::read_csv_file(path, arena).with_context(|| format!("loading {}", path.display()))
}

fn cmd_train(r: Run<TrainArgs>) -> Result<()> {
    let mut a = merge_config("train", &r.args, r.config.as_deref())?;
    let train_path = require(&a.train, "train")?;
    let arena = a.arena.resolve()?;
    let d = TrainConfig::default();
    let epochs = *a.epochs.get_or_insert(d.epochs);
    let batch = *a.batch_size.get_or_insert(d.batch_size);
    ensure!(batch > 0, "--batch-size must be positive");
    let lr = *a.learning_rate.get_or_insert(d.adam.learning_rate);
    let decay = *a.decay.get_or_insert(d.adam.decay);
    let hidden = *a.hidden.get_or_insert(DEFAULT_HIDDEN);
    let arch: Architecture = a
        .ablation
        .get_or_insert_with(|| "dli".into())
        .parse()
        .map_err(anyhow::Error::msg)?;
    let seed = *a.seed.get_or_insert(0);

    let last_path = {
        let mut s = r.output.as_os_str().to_owned();
        s.push(".last");
        PathBuf::from(s)
    };
    let log_path = {
        let mut s = r.output.as_os_str().to_owned();
        s.push(".log.csv");
        PathBuf::from(s)
    };
    let side = sidecar_path(&r.output);
    check_outputs(
        &[r.output.clone(), last_path.clone(), log_path.clone(), side.clone()],
        r.force,
    )?;

    let full = load_trajectory(&train_path, arena)?;
    let (train_traj, val_traj) = match &a.validation {
        Some(p) => (full, load_trajectory(p, arena)?),
        None => {
            let frac = *a.validation_fraction.get_or_insert(0.15);
            let secs = *a.chunk_seconds.get_or_insert(60.0);
            ensure!(secs > 0.0, "--chunk-seconds must be positive");
            let frames = ((secs / arena.dt).round() as usize).max(dli::HISTORY + 2);
            let chunked = full.chunked(frames);
            let s = ingest::split(chunked.segments, [1.0 - frac, frac, 0.0], seed)?;
            (Trajectory::new(arena, s.train), Trajectory::new(arena, s.validation))
        }
    };
    let train_set = dli::make_samples(&train_traj);
    let val_set = dli::make_samples(&val_traj);
    eprintln!(
        "{} training samples, {} validation samples, {} parameters",
        train_set.len(),
        val_set.len(),
        DliModel::new(arch, hidden, &arena, seed).net.n_params()
    );
    let cfg = TrainConfig {
        epochs,
        batch_size: batch,
        seed,
        adam: AdamConfig {
            learning_rate: lr,
            decay,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let model = DliModel::new(arch, hidden, &arena, seed);
    let out = dli::train(model, &train_set, &val_set, &cfg, |rec| {
        eprintln!(
            "epoch {:>3}  train_nll {:.6}  val_nll {:.6}",
            rec.epoch, rec.train_nll, rec.val_nll
        )
    })?;
    let extra = serde_json::json!({
        "seed": seed,
        "epochs": epochs,
        "best_epoch": out.best_epoch,
        "dt": arena.dt,
    });
    let best_bytes = out.best.to_bytes(extra.clone());
    fs::write(&r.output, &best_bytes).with_context(|| format!("writing {}", r.output.display()))?;
    fs::write(&last_path, out.last.to_bytes(extra))
        .with_context(|| format!("writing {}", last_path.display()))?;
    let log_file = fs::File::create(&log_path).with_context(|| format!("writing {}", log_path.display()))?;
    dli::write_training_log(&out.history, log_file)?;
    let meta = meta_table(serde_json::json!({
        "train_samples": train_set.len(),
        "validation_samples": val_set.len(),
        "best_epoch": out.best_epoch,
        "best_val_nll": out.best_epoch.map(|e| out.history[e - 1].val_nll),
        "model_sha256": sha256_hex(&best_bytes),
    }))?;
    write_sidecar(&side, "train", &a, meta)
}

fn cmd_rollout(r: Run<RolloutArgs>) -> Result<()> {
    let mut a = merge_config("rollout", &r.args, r.config.as_deref())?;
    let model_path = require(&a.model, "model")?;
    let bytes = fs::read(&model_path).with_context(|| format!("reading {}", model_path.display()))?;
    let (model, training) = DliModel::from_bytes(&bytes)?;
    let dt = *a
        .dt
        .get_or_insert(training.get("dt").and_then(|v| v.as_f64()).unwrap_or(ArenaSpec::default().dt));
    let containment: Containment = a.containment.get_or_insert_with(|| "reflect".into()).parse()?;
    let cfg = RolloutConfig {
        arena: ArenaSpec::new(model.radius, ArenaSpec::default().body_length, dt)?,
        steps: *a.steps.get_or_insert(500_000),
        agents: *a.agents.get_or_insert(2),
        seed: *a.seed.get_or_insert(0),
        containment,
        strict_paper_noise: *a.strict_paper_noise.get_or_insert(false),
    };
    cfg.validate()?;
    let side = sidecar_path(&r.output);
    check_outputs(&[r.output.clone(), side.clone()], r.force)?;
    let (traj, log) = engine::rollout_group(&model, &cfg)?;
    write_trajectory(&traj, &r.output)?;
    let meta = meta_table(serde_json::json!({
        "model_sha256": sha256_hex(&bytes),
        "containment_interventions": log.containment_per_agent,
    }))?;
    write_sidecar(&side, "rollout", &a, meta)
}

fn write_battery(b: &Battery, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for name in PDF_NAMES {
        if let Some(o) = b.pdfs.get(name) {
            let p = dir.join(format!("{name}.csv"));
            o.write_csv(fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?)?;
            written.push(p);
        }
    }
    for name in CURVE_NAMES {
        let p = dir.join(format!("{name}.csv"));
        b.curve(name)
            .unwrap()
            .write_csv(fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?)?;
        written.push(p);
    }
    let p = dir.join("summary.txt");
    fs::write(&p, b.report())?;
    written.push(p);
    Ok(written)
}

fn battery_outputs(dir: &Path) -> Vec<PathBuf> {
    PDF_NAMES
        .iter()
        .chain(CURVE_NAMES.iter())
        .map(|n| dir.join(format!("{n}.csv")))
        .chain([dir.join("summary.txt"), dir.join("run.toml")])
        .collect()
}

fn metrics_config(max_lag: &mut Option<f64>) -> MetricsConfig {
    let d = MetricsConfig::default();
    MetricsConfig {
        max_lag: *max_lag.get_or_insert(d.max_lag),
        ..d
    }
}

fn cmd_validate(r: Run<ValidateArgs>) -> Result<()> {
    let mut a = merge_config("validate", &r.args, r.config.as_deref())?;
    let input = require(&a.input, "input")?;
    let arena = a.arena.resolve()?;
    let cfg = metrics_config(&mut a.max_lag);
    check_outputs(&battery_outputs(&r.output), r.force)?;
    let traj = load_trajectory(&input, arena)?;
    let b = Battery::compute(&traj, &cfg, Exec::Parallel)?;
    fs::create_dir_all(&r.output).with_context(|| format!("creating {}", r.output.display()))?;
    let written = write_battery(&b, &r.output)?;
    print!("{}", b.report());
    let meta = meta_table(serde_json::json!({
        "files": written.len(),
        "frames": b.summary.frames,
    }))?;
    write_sidecar(&r.output.join("run.toml"), "validate", &a, meta)
}

fn cmd_compare(r: Run<CompareArgs>) -> Result<()> {
    let mut a = merge_config("compare", &r.args, r.config.as_deref())?;
    let first = require(&a.first, "first")?;
    let second = require(&a.second, "second")?;
    let arena = a.arena.resolve()?;
    let cfg = metrics_config(&mut a.max_lag);
    let side = sidecar_path(&r.output);
    check_outputs(&[r.output.clone(), side.clone()], r.force)?;
    let ta = load_trajectory(&first, arena)?;
    let tb = load_trajectory(&second, arena)?;
    let ba = Battery::compute(&ta, &cfg, Exec::Parallel)?;
    let bb = Battery::compute(&tb, &cfg, Exec::Parallel)?;
    let scores = metrics::compare_batteries(&ba, &bb, cfg.max_lag)?;
    let mut report = String::new();
    for (k, v) in &scores {
        report.push_str(&format!("{k} = {v}\n"));
    }
    for (tag, b) in [("first", &ba), ("second", &bb)] {
        for line in b.report().lines() {
            report.push_str(&format!("{tag}.{line}\n"));
        }
    }
    ensure!(scores.iter().all(|(_, v)| v.is_finite()), "non-finite comparison score");
    fs::write(&r.output, &report).with_context(|| format!("writing {}", r.output.display()))?;
    print!("{report}");
    write_sidecar(&side, "compare", &a, toml::Table::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_values() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        fs::write(&cfg, "steps = 10\nseed = 3\nradius = 30.0\n").unwrap();
        let cli = SimulateArgs {
            seed: Some(9),
            ..Default::default()
        };
        let m = merge_config("simulate-abc", &cli, Some(&cfg)).unwrap();
        assert_eq!(m.steps, Some(10));
        assert_eq!(m.seed, Some(9));
        assert_eq!(m.arena.radius, Some(30.0));

        fs::write(&cfg, "command = \"rollout\"\n[args]\nsteps = 1\n").unwrap();
        assert!(merge_config("simulate-abc", &cli, Some(&cfg)).is_err());
        fs::write(&cfg, "stepz = 1\n").unwrap();
        assert!(merge_config("simulate-abc", &cli, Some(&cfg)).is_err());
    }

    #[test]
    fn sidecar_round_trips_through_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = SimulateArgs {
            steps: Some(5),
            ..Default::default()
        };
        a.arena.resolve().unwrap();
        let p = dir.path().join("s.toml");
        write_sidecar(&p, "simulate-abc", &a, toml::Table::new()).unwrap();
        let back = merge_config("simulate-abc", &SimulateArgs::default(), Some(&p)).unwrap();
        assert_eq!(serde_json::to_value(&back).unwrap(), serde_json::to_value(&a).unwrap());
    }

    #[test]
    fn hex_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
