//! Command-line pipelines.
//!
//! Every subcommand takes an optional JSON [`PipelineConfig`] (`--config`)
//! whose values are overridden by flags. A `<output>.manifest.json` (or
//! `manifest.json` inside an output directory) records the resolved
//! configuration, its SHA-256, crate and format versions, stage timings
//! and output digests. Data goes to files, logs to stderr.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::RigidBodyModel;
use crate::imusynth::{synthesize, ImuConfig};
use crate::metrics::evaluate;
use crate::motion::{
    build_frames, frames_to_poses, gen_synthetic_motion, load_motion, load_skeleton, save_motion, MotionKind,
    PoseSequence, Skeleton,
};
use crate::physopt::{optimize_sequence, CheckSummary, OptTrace, PdGains, PhysParams};
use crate::vae::{augment_sequence, train, write_history, AugmentConfig, TrainConfig, VaeConfig, VaeModel};

/// Tolerance of the constraint post-checks run after physical optimization.
pub const CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Skeleton file; the built-in SMPL skeleton when absent.
    #[serde(default)]
    pub skeleton: Option<PathBuf>,
    #[serde(default)]
    pub vae: VaeConfig,
    /// Training schedule; `--profile` picks one when absent.
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub physopt: PhysParams,
    #[serde(default)]
    pub gains: PdGains,
    #[serde(default)]
    pub imu: ImuConfig,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_samples() -> usize {
    4
}

impl PipelineConfig {
    pub fn with_seed(seed: u64) -> Self {
        PipelineConfig {
            skeleton: None,
            vae: VaeConfig::default(),
            train: None,
            augment: AugmentConfig::default(),
            samples: default_samples(),
            physopt: PhysParams::default(),
            gains: PdGains::default(),
            imu: ImuConfig::default(),
            seed,
            output_dir: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if let Some(p) = &self.skeleton {
            if !p.is_file() {
                return Err(anyhow!("skeleton file {} does not exist", p.display()));
            }
        }
        self.vae.validate()?;
        if let Some(t) = &self.train {
            t.validate()?;
        }
        self.augment.validate()?;
        if self.samples == 0 {
            return Err(anyhow!("samples must be at least 1"));
        }
        self.physopt.validate()?;
        self.gains.validate()?;
        Ok(())
    }

    pub fn load_skeleton(&self) -> anyhow::Result<Skeleton> {
        match &self.skeleton {
            Some(p) => Ok(load_skeleton(p)?),
            None => Ok(Skeleton::smpl_default()),
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

#[derive(Parser, Debug)]
#[command(name = "kinaug", version, about = "Motion augmentation, physical correction and virtual IMU synthesis")]
struct Cli {
    /// Log level on stderr (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON pipeline configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed (required unless the configuration provides one).
    #[arg(long)]
    seed: Option<u64>,
    /// Skeleton file, overriding the configuration.
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic motion file at 60 fps.
    GenSynthetic {
        /// Motion kind: walk, wave, squat, mixed, stand or climb.
        #[arg(long)]
        kind: String,
        /// Duration in seconds.
        #[arg(long, default_value_t = 2.0)]
        seconds: f64,
        /// Output motion file.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train the motion VAE on one or more motion files.
    TrainVae {
        /// Training motion files.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Output model file; the loss history goes next to it.
        #[arg(short, long)]
        output: PathBuf,
        /// Schedule used when the configuration has no `train` section.
        #[arg(long, value_enum, default_value_t = Profile::Desk)]
        profile: Profile,
        #[command(flatten)]
        common: Common,
    },
    /// Generate variants of a motion with a trained VAE, optionally followed
    /// by physical optimization.
    Augment {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Ground-truth motion file.
        #[arg(long)]
        input: PathBuf,
        /// Number of variants (overrides the configuration).
        #[arg(long)]
        n: Option<usize>,
        /// Run physical optimization on every variant and write force traces.
        #[arg(long)]
        physopt: bool,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (overrides the configuration).
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Physically optimize a reference motion.
    Optimize {
        /// Reference motion file.
        #[arg(long)]
        input: PathBuf,
        /// Output motion file; force, torque and trace files go next to it.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Synthesize virtual IMU signals from a motion file.
    SynthImu {
        /// Motion file.
        #[arg(long)]
        input: PathBuf,
        /// Output IMU file.
        #[arg(short, long)]
        output: PathBuf,
        /// Add gravity to the accelerations.
        #[arg(long)]
        with_gravity: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Compare augmented motions against ground truth.
    Eval {
        /// Ground-truth motion file.
        #[arg(long)]
        gt: PathBuf,
        /// Augmented motion files, or directories searched for `*.motion.json`.
        #[arg(long, required = true, num_args = 1..)]
        aug: Vec<PathBuf>,
        /// Output JSON report.
        #[arg(short, long)]
        output: PathBuf,
        /// Also write a per-joint CSV table.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Profile {
    /// Short schedule for one machine.
    Desk,
    /// Full schedule.
    Full,
}

#[derive(Debug)]
enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

trait OrFail<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrFail<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Invalid(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

/// Parse `argv` (program name first) and run the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .parse_env("KINAUG_LOG")
        .try_init();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Invalid(e)) => {
            log::error!("{e:#}");
            1
        }
        Err(Failure::Runtime(e)) => {
            log::error!("{e:#}");
            2
        }
    }
}

fn resolve(common: &Common) -> Result<PipelineConfig, Failure> {
    let mut cfg = match (&common.config, common.seed) {
        (Some(path), _) => PipelineConfig::load(path).invalid()?,
        (None, Some(seed)) => PipelineConfig::with_seed(seed),
        (None, None) => return Err(Failure::Invalid(anyhow!("a seed is required (--seed or a config file)"))),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(s) = &common.skeleton {
        cfg.skeleton = Some(s.clone());
    }
    cfg.validate().invalid()?;
    Ok(cfg)
}

fn require_file(p: &Path) -> Result<(), Failure> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Failure::Invalid(anyhow!("{} does not exist", p.display())))
    }
}

/// `dir/walk.motion.json` + `.forces.csv` -> `dir/walk.forces.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name
        .strip_suffix(".motion.json")
        .or_else(|| name.rsplit_once('.').map(|(s, _)| s))
        .unwrap_or(&name);
    path.with_file_name(format!("{stem}{suffix}"))
}

fn ensure_parent(path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => std::fs::create_dir_all(d)
            .with_context(|| format!("creating {}", d.display()))
            .runtime(),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct OutputRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: String,
    config: &'a PipelineConfig,
    versions: BTreeMap<&'static str, String>,
    timings_s: BTreeMap<String, f64>,
    outputs: Vec<OutputRecord>,
    details: serde_json::Value,
}

struct Run {
    command: &'static str,
    start: Instant,
    timings: BTreeMap<String, f64>,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn new(command: &'static str) -> Self {
        Run {
            command,
            start: Instant::now(),
            timings: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.timings.entry(stage.to_string()).or_default() += t.elapsed().as_secs_f64();
        out
    }

    fn finish(mut self, cfg: &PipelineConfig, path: &Path, details: serde_json::Value) -> Result<(), Failure> {
        self.timings.insert("total".into(), self.start.elapsed().as_secs_f64());
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for p in &self.outputs {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display())).runtime()?;
            outputs.push(OutputRecord {
                path: p.display().to_string(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        let versions = BTreeMap::from([
            ("kinaug", env!("CARGO_PKG_VERSION").to_string()),
            ("vae_model", crate::vae::MODEL_VERSION.to_string()),
            ("params", crate::tensornet::PARAMS_VERSION.to_string()),
        ]);
        let manifest = Manifest {
            command: self.command,
            config_hash: cfg.hash(),
            config: cfg,
            versions,
            timings_s: self.timings,
            outputs,
            details,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))
            .runtime()?;
        log::info!("manifest written to {}", path.display());
        Ok(())
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::GenSynthetic {
            kind,
            seconds,
            output,
            common,
        } => gen_synthetic(&kind, seconds, &output, &common),
        Command::TrainVae {
            input,
            output,
            profile,
            common,
        } => train_vae(&input, &output, profile, &common),
        Command::Augment {
            model,
            input,
            n,
            physopt,
            jobs,
            output,
            common,
        } => augment(&model, &input, n, physopt, jobs, output, &common),
        Command::Optimize { input, output, common } => optimize(&input, &output, &common),
        Command::SynthImu {
            input,
            output,
            with_gravity,
            common,
        } => synth_imu(&input, &output, with_gravity, &common),
        Command::Eval {
            gt,
            aug,
            output,
            csv,
            common,
        } => eval(&gt, &aug, &output, csv.as_deref(), &common),
    }
}

fn gen_synthetic(kind: &str, seconds: f64, output: &Path, common: &Common) -> Result<(), Failure> {
    let cfg = resolve(common)?;
    let kind: MotionKind = kind.parse().invalid()?;
    if !(seconds > 0.0 && seconds.is_finite()) {
        return Err(Failure::Invalid(anyhow!("--seconds must be positive")));
    }
    let skel = cfg.load_skeleton().invalid()?;
    let mut run = Run::new("gen-synthetic");
    let seq = run.time("generate", || gen_synthetic_motion(kind, seconds, cfg.seed, &skel)).runtime()?;
    ensure_parent(output)?;
    save_motion(&seq, output).runtime()?;
    run.outputs.push(output.to_path_buf());
    log::info!("{} frames of {} written to {}", seq.len(), kind.as_str(), output.display());
    let details = serde_json::json!({ "kind": kind.as_str(), "seconds": seconds, "frames": seq.len() });
    run.finish(&cfg, &sibling(output, ".manifest.json"), details)
}

fn train_vae(inputs: &[PathBuf], output: &Path, profile: Profile, common: &Common) -> Result<(), Failure> {
    let mut cfg = resolve(common)?;
    for p in inputs {
        require_file(p)?;
    }
    let skel = cfg.load_skeleton().invalid()?;
    let mut tcfg = cfg.train.clone().unwrap_or_else(|| match profile {
        Profile::Desk => TrainConfig::desk(),
        Profile::Full => TrainConfig::default(),
    });
    tcfg.seed = cfg.seed;
    cfg.vae.seed = cfg.seed;
    cfg.train = Some(tcfg.clone());

    let mut dataset = Vec::with_capacity(inputs.len());
    for p in inputs {
        let seq = load_motion(p, &skel).invalid()?;
        dataset.push(build_frames(&skel, &seq).invalid()?);
    }
    let mut run = Run::new("train-vae");
    let mut model = VaeModel::new(cfg.vae.clone()).invalid()?;
    log::info!("training {} parameters for {} epochs", model.param_count(), tcfg.total_epochs());
    let history = run.time("train", || train(&mut model, &dataset, &tcfg)).runtime()?;
    ensure_parent(output)?;
    model.save(output).runtime()?;
    let hist = sibling(output, ".history.csv");
    write_history(&hist, &history).runtime()?;
    run.outputs.extend([output.to_path_buf(), hist]);
    let details = serde_json::json!({
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "epochs": history.len(),
        "final": history.last(),
    });
    run.finish(&cfg, &sibling(output, ".manifest.json"), details)
}

/// Independent generator for variant `i`, derived from the root seed.
pub fn sample_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 + 1);
    rng
}

struct Variant {
    motion: PoseSequence,
    trace: Option<OptTrace>,
    vae_s: f64,
    physopt_s: f64,
}

#[allow(clippy::too_many_arguments)]
fn augment(
    model_path: &Path,
    input: &Path,
    n: Option<usize>,
    physopt: bool,
    jobs: usize,
    output: Option<PathBuf>,
    common: &Common,
) -> Result<(), Failure> {
    let mut cfg = resolve(common)?;
    if let Some(n) = n {
        cfg.samples = n;
    }
    if let Some(o) = output {
        cfg.output_dir = Some(o);
    }
    cfg.validate().invalid()?;
    if jobs == 0 {
        return Err(Failure::Invalid(anyhow!("--jobs must be at least 1")));
    }
    let out_dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| Failure::Invalid(anyhow!("no output directory (-o or output_dir in the config)")))?;
    require_file(model_path)?;
    require_file(input)?;
    let skel = cfg.load_skeleton().invalid()?;
    let model = VaeModel::load(model_path).invalid()?;
    let reference = load_motion(input, &skel).invalid()?;
    let frames = build_frames(&skel, &reference).invalid()?;
    if physopt && ((reference.fps * cfg.physopt.dt) - 1.0).abs() > 1e-6 {
        return Err(Failure::Invalid(anyhow!(
            "input runs at {} fps but physopt.dt is {}",
            reference.fps,
            cfg.physopt.dt
        )));
    }
    let dyn_model = if physopt {
        Some(RigidBodyModel::from_skeleton(&skel).invalid()?)
    } else {
        None
    };

    let mut run = Run::new("augment");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building thread pool")
        .runtime()?;
    let one = |i: usize| -> anyhow::Result<Variant> {
        let t = Instant::now();
        let mut rng = sample_rng(cfg.seed, i);
        let gen = augment_sequence(&model, &frames, &cfg.augment, &mut rng)?;
        let motion = frames_to_poses(&gen, &reference)?;
        let vae_s = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let (motion, trace) = match &dyn_model {
            Some(m) => {
                let (m, tr) = optimize_sequence(m, &motion, &cfg.physopt, &cfg.gains)?;
                (m, Some(tr))
            }
            None => (motion, None),
        };
        log::info!("variant {i} done");
        Ok(Variant {
            motion,
            trace,
            vae_s,
            physopt_s: t.elapsed().as_secs_f64(),
        })
    };
    let variants: Vec<Variant> = pool
        .install(|| (0..cfg.samples).into_par_iter().map(one).collect::<anyhow::Result<Vec<_>>>())
        .runtime()?;

    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .runtime()?;
    let mut checks: Vec<CheckSummary> = Vec::new();
    for (i, v) in variants.iter().enumerate() {
        *run.timings.entry("vae".into()).or_default() += v.vae_s;
        let motion_path = out_dir.join(format!("sample_{i:03}.motion.json"));
        save_motion(&v.motion, &motion_path).runtime()?;
        run.outputs.push(motion_path.clone());
        if let Some(tr) = &v.trace {
            *run.timings.entry("physopt".into()).or_default() += v.physopt_s;
            let forces = sibling(&motion_path, ".forces.csv");
            let torques = sibling(&motion_path, ".torques.csv");
            let trace = sibling(&motion_path, ".trace.json");
            tr.write_forces_csv(&forces).runtime()?;
            tr.write_torques_csv(&torques).runtime()?;
            write_json(&trace, tr)?;
            run.outputs.extend([forces, torques, trace]);
            let s = tr.summary();
            if !s.passes(cfg.physopt.delta, CHECK_TOL) {
                log::warn!("variant {i} fails the constraint post-checks: {s:?}");
            }
            checks.push(s);
        }
    }
    log::info!("{} variants written to {}", variants.len(), out_dir.display());
    let details = serde_json::json!({
        "model": model_path.display().to_string(),
        "input": input.display().to_string(),
        "physopt": physopt,
        "jobs": jobs,
        "post_checks": checks,
        "post_checks_pass": checks.iter().all(|s| s.passes(cfg.physopt.delta, CHECK_TOL)),
    });
    run.finish(&cfg, &out_dir.join("manifest.json"), details)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string(value).expect("value serializes");
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .runtime()
}

fn optimize(input: &Path, output: &Path, common: &Common) -> Result<(), Failure> {
    let cfg = resolve(common)?;
    require_file(input)?;
    let skel = cfg.load_skeleton().invalid()?;
    let reference = load_motion(input, &skel).invalid()?;
    let model = RigidBodyModel::from_skeleton(&skel).invalid()?;
    let mut run = Run::new("optimize");
    let (motion, trace) = match run.time("physopt", || optimize_sequence(&model, &reference, &cfg.physopt, &cfg.gains)) {
        Ok(r) => r,
        Err(e @ crate::physopt::PhysError::FrameRate { .. }) => return Err(Failure::Invalid(e.into())),
        Err(e) => return Err(Failure::Runtime(e.into())),
    };
    ensure_parent(output)?;
    save_motion(&motion, output).runtime()?;
    let forces = sibling(output, ".forces.csv");
    let torques = sibling(output, ".torques.csv");
    let trace_path = sibling(output, ".trace.json");
    trace.write_forces_csv(&forces).runtime()?;
    trace.write_torques_csv(&torques).runtime()?;
    write_json(&trace_path, &trace)?;
    run.outputs.extend([output.to_path_buf(), forces, torques, trace_path]);
    let s = trace.summary();
    if !s.passes(cfg.physopt.delta, CHECK_TOL) {
        log::warn!("post-checks failed: {s:?}");
    }
    let details = serde_json::json!({
        "input": input.display().to_string(),
        "post_checks": s,
        "post_checks_pass": s.passes(cfg.physopt.delta, CHECK_TOL),
    });
    run.finish(&cfg, &sibling(output, ".manifest.json"), details)
}

fn synth_imu(input: &Path, output: &Path, with_gravity: bool, common: &Common) -> Result<(), Failure> {
    let mut cfg = resolve(common)?;
    if with_gravity {
        cfg.imu.with_gravity = true;
    }
    require_file(input)?;
    let skel = cfg.load_skeleton().invalid()?;
    cfg.imu.validate(&skel).invalid()?;
    let seq = load_motion(input, &skel).invalid()?;
    let mut run = Run::new("synth-imu");
    let imu = run.time("synthesize", || synthesize(&skel, &seq, &cfg.imu)).invalid()?;
    ensure_parent(output)?;
    imu.save(output).runtime()?;
    run.outputs.push(output.to_path_buf());
    let details = serde_json::json!({ "input": input.display().to_string(), "frames": imu.frames.len() });
    run.finish(&cfg, &sibling(output, ".manifest.json"), details)
}

fn collect_motions(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))
                .invalid()?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.to_string_lossy().ends_with(".motion.json"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            require_file(p)?;
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Failure::Invalid(anyhow!("no augmented motion files found")));
    }
    Ok(out)
}

fn eval(gt: &Path, aug: &[PathBuf], output: &Path, csv: Option<&Path>, common: &Common) -> Result<(), Failure> {
    let cfg = resolve(common)?;
    require_file(gt)?;
    let files = collect_motions(aug)?;
    let skel = cfg.load_skeleton().invalid()?;
    let gt_seq = load_motion(gt, &skel).invalid()?;
    let samples = files
        .iter()
        .map(|f| load_motion(f, &skel))
        .collect::<Result<Vec<_>, _>>()
        .invalid()?;
    let mut run = Run::new("eval");
    let report = run.time("evaluate", || evaluate(&skel, &gt_seq, &samples)).invalid()?;
    ensure_parent(output)?;
    report.save_json(output).runtime()?;
    run.outputs.push(output.to_path_buf());
    if let Some(c) = csv {
        ensure_parent(c)?;
        report.save_csv(c).runtime()?;
        run.outputs.push(c.to_path_buf());
    }
    log::info!(
        "e_pos {:.3} cm, e_rot {:.3} deg, jitter {:.3} (gt {:.3})",
        report.fidelity.e_pos,
        report.fidelity.e_rot,
        report.jitter_mean,
        report.jitter_gt
    );
    let details = serde_json::json!({
        "gt": gt.display().to_string(),
        "samples": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    run.finish(&cfg, &sibling(output, ".manifest.json"), details)
}
