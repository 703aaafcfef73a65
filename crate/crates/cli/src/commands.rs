use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use mixbridge::datasets::{standard_gaussian, swiss_roll};
use mixbridge::evaluation::{
    bw2_uvp, cbw2_uvp_at, energy_distance, kl_plan_mc, make_ground_truth_pair, McEstimate, MetricRecord,
    MomentMode, SourceSpec,
};
use mixbridge::io::{
    content_digest, file_digest, load_any, save_binary, save_csv, save_loss_csv, save_metrics_csv,
    save_trajectories, save_trajectories_csv, DatasetRecord, RunManifest,
};
use mixbridge::rng::{seeded, stream};
use mixbridge::{
    euler_maruyama, sample_bridge_trajectories, MeanInit, MixturePotential, SampleSet, SolverConfig,
};
use serde::Serialize;

use crate::args::{
    BenchmarkArgs, EvaluateArgs, Format, InitMeans, Metric, Mode, ReplayArgs, Resolve, SampleArgs, SwissRollArgs,
    TrainArgs, TrajectoryArgs,
};

const CHECKPOINT_ROLES: [&str; 2] = ["checkpoint", "reference"];

fn load_data(role: &str, path: &Path) -> Result<(SampleSet, DatasetRecord)> {
    let data = load_any(path).with_context(|| format!("reading {role} data from {}", path.display()))?;
    let record = DatasetRecord::new(role, path, &data);
    Ok((data, record))
}

fn load_checkpoint(role: &str, path: &Path) -> Result<(MixturePotential, DatasetRecord)> {
    let pot = MixturePotential::load(path).with_context(|| format!("reading {role} from {}", path.display()))?;
    let record = DatasetRecord {
        role: role.into(),
        path: path.into(),
        sha256: file_digest(path)?,
        n: pot.n_components(),
        dim: pot.dim(),
    };
    Ok((pot, record))
}

fn load_source(path: Option<&Path>) -> Result<SourceSpec> {
    match path {
        None => Ok(SourceSpec::StandardGaussian),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing source spec {}", p.display()))
        }
    }
}

fn save_set(out: &Path, stem: &str, format: Format, data: &SampleSet) -> Result<PathBuf> {
    let path = out.join(format.file_name(stem));
    match format {
        Format::Csv => save_csv(&path, data),
        Format::Bin => save_binary(&path, data),
    }
    .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

struct Run<'a, A: Serialize> {
    command: &'a str,
    args: &'a A,
    config: Option<SolverConfig>,
    datasets: Vec<DatasetRecord>,
    seed: u64,
    outputs: Vec<PathBuf>,
}

impl<A: Serialize> Run<'_, A> {
    fn finish(self, out: &Path) -> Result<()> {
        let path = out.join("manifest.json");
        let manifest = RunManifest {
            command: self.command.into(),
            args: serde_json::to_value(self.args)?,
            config: self.config,
            datasets: self.datasets,
            seed: self.seed,
            code_version: RunManifest::code_version(),
            outputs: self.outputs,
        };
        manifest.save(&path).with_context(|| format!("writing {}", path.display()))?;
        for p in &manifest.outputs {
            println!("wrote {}", p.display());
        }
        Ok(())
    }
}

fn prepare<A: Resolve>(args: &mut A) -> Result<()> {
    args.resolve().context("resolving paths")?;
    fs::create_dir_all(args.out_dir()).with_context(|| format!("creating {}", args.out_dir().display()))
}

fn solver_config(args: &TrainArgs) -> SolverConfig {
    SolverConfig {
        epsilon: args.eps,
        n_components: args.k,
        learning_rate: args.lr,
        batch_size_0: args.batch0.unwrap_or(args.batch),
        batch_size_1: args.batch1.unwrap_or(args.batch),
        n_iters: args.iters,
        seed: args.seed,
        init_scale: args.init_scale,
        init_means: match args.init_means {
            InitMeans::Uniform => MeanInit::Uniform,
            InitMeans::Spread => MeanInit::Spread,
        },
        eval_every: args.eval_every,
    }
}

pub fn train_cmd(mut args: TrainArgs) -> Result<()> {
    prepare(&mut args)?;
    let config = solver_config(&args);
    config.validate()?;
    let (x0, r0) = load_data("x0", &args.x0)?;
    let (x1, r1) = load_data("x1", &args.x1)?;
    ensure!(
        x0.dim() == x1.dim(),
        "dimension mismatch: x0 has {} columns, x1 has {}",
        x0.dim(),
        x1.dim()
    );
    let outcome = mixbridge::train_with_hook(&config, &x0, &x1, |it, _| {
        eprintln!("step {it}/{}", config.n_iters);
        Ok(Vec::new())
    })
    .context("training failed")?;
    if let Some(last) = outcome.trace.last() {
        eprintln!("final minibatch loss {:.6}", last.loss);
    }

    let checkpoint = args.out.join("checkpoint.json");
    let loss = args.out.join("loss.csv");
    outcome.potential.save(&checkpoint)?;
    save_loss_csv(&loss, &outcome.trace)?;
    Run {
        command: "train",
        args: &args,
        config: Some(config),
        datasets: vec![r0, r1],
        seed: args.seed,
        outputs: vec![checkpoint, loss],
    }
    .finish(&args.out)
}

pub fn sample_cmd(mut args: SampleArgs) -> Result<()> {
    prepare(&mut args)?;
    ensure!(args.n > 0, "--n must be at least 1");
    let (pot, rc) = load_checkpoint("checkpoint", &args.checkpoint)?;
    let (inputs, ri) = load_data("cond_input", &args.cond_input)?;
    inputs.check_dim(pot.dim()).context("conditioning input does not match the checkpoint")?;

    let mut rng = seeded(args.seed);
    let mut data = Vec::with_capacity(inputs.len() * args.n * pot.dim());
    for x in inputs.rows() {
        data.extend_from_slice(pot.sample_conditional(x, args.n, &mut rng)?.as_slice());
    }
    let samples = SampleSet::new(inputs.len() * args.n, pot.dim(), data)?;
    let path = save_set(&args.out, "samples", args.format, &samples)?;
    Run {
        command: "sample",
        args: &args,
        config: None,
        datasets: vec![rc, ri],
        seed: args.seed,
        outputs: vec![path],
    }
    .finish(&args.out)
}

fn bridge_times(args: &TrajectoryArgs) -> Result<Vec<f64>> {
    match (&args.times, args.steps) {
        (Some(times), None) => Ok(times.clone()),
        (None, Some(steps)) => {
            ensure!(steps > 0, "--steps must be at least 1");
            Ok((1..steps).map(|i| i as f64 / steps as f64).collect())
        }
        _ => bail!("bridge mode needs exactly one of --times or --steps"),
    }
}

pub fn trajectories_cmd(mut args: TrajectoryArgs) -> Result<()> {
    prepare(&mut args)?;
    let (pot, rc) = load_checkpoint("checkpoint", &args.checkpoint)?;
    let (x0, rx) = load_data("x0", &args.x0)?;
    x0.check_dim(pot.dim()).context("start points do not match the checkpoint")?;

    let mut rng = seeded(args.seed);
    let batch = match args.mode {
        Mode::Em => {
            ensure!(args.times.is_none(), "--times only applies to bridge mode; use --steps with em");
            let Some(steps) = args.steps else {
                bail!("em mode needs --steps");
            };
            euler_maruyama(&pot, &x0, steps, &mut rng)?
        }
        Mode::Bridge => sample_bridge_trajectories(&pot, &x0, &bridge_times(&args)?, &mut rng)?,
    };
    let path = args.out.join("trajectories.bin");
    save_trajectories(&path, &batch)?;
    let mut outputs = vec![path.clone(), mixbridge::io::times_sidecar_path(&path)];
    if args.csv {
        let csv = args.out.join("trajectories.csv");
        save_trajectories_csv(&csv, &batch)?;
        outputs.push(csv);
    }
    Run {
        command: "trajectories",
        args: &args,
        config: None,
        datasets: vec![rc, rx],
        seed: args.seed,
        outputs,
    }
    .finish(&args.out)
}

pub fn evaluate_cmd(mut args: EvaluateArgs) -> Result<()> {
    prepare(&mut args)?;
    let (pot, rc) = load_checkpoint("checkpoint", &args.checkpoint)?;
    let mut datasets = vec![rc];
    let mut rng = seeded(args.seed);

    let start_points = |datasets: &mut Vec<DatasetRecord>| -> Result<SampleSet> {
        let Some(path) = &args.x0 else {
            bail!("--metric {} needs --x0", args.metric.name());
        };
        let (x0, rx) = load_data("x0", path)?;
        x0.check_dim(pot.dim()).context("start points do not match the checkpoint")?;
        datasets.push(rx);
        match args.n_test {
            Some(n) if n < x0.len() => Ok(x0.slice_rows(0, n)?),
            _ => Ok(x0),
        }
    };

    let estimate = match args.metric {
        Metric::Energy | Metric::Bw2uvp => {
            let x0 = start_points(&mut datasets)?;
            let (target, rt) = load_data("against", &args.against)?;
            target.check_dim(pot.dim()).context("target samples do not match the checkpoint")?;
            datasets.push(rt);
            let pushed = pot.sample_conditional_batch(&x0, &mut rng)?;
            let value = if args.metric == Metric::Energy {
                energy_distance(&pushed, &target)?
            } else {
                bw2_uvp(&pushed, &target)?
            };
            McEstimate {
                value,
                stderr: f64::NAN,
                n: pushed.len(),
            }
        }
        Metric::Cbw2uvp => {
            let x0 = start_points(&mut datasets)?;
            let (truth, rt) = load_checkpoint("reference", &args.against)?;
            datasets.push(rt);
            let mode = match args.n_cond {
                Some(n_cond) => MomentMode::Sampled { n_cond },
                None => MomentMode::Exact,
            };
            cbw2_uvp_at(&pot, &truth, &x0, mode, &mut rng)?
        }
        Metric::Kl => {
            let (truth, rt) = load_checkpoint("reference", &args.against)?;
            datasets.push(rt);
            let source = load_source(args.source.as_deref())?;
            kl_plan_mc(&truth, &pot, &source, args.n_outer, args.n_inner, &mut rng)?
        }
    };
    println!(
        "{} = {:.6} (stderr {:.2e}, n {})",
        args.metric.name(),
        estimate.value,
        estimate.stderr,
        estimate.n
    );
    let path = args.out.join("metrics.csv");
    save_metrics_csv(&path, &[MetricRecord::new(args.metric.name(), estimate, args.seed)])?;
    Run {
        command: "evaluate",
        args: &args,
        config: None,
        datasets,
        seed: args.seed,
        outputs: vec![path],
    }
    .finish(&args.out)
}

pub fn make_benchmark_cmd(mut args: BenchmarkArgs) -> Result<()> {
    prepare(&mut args)?;
    let source = load_source(args.source.as_deref())?;
    let mut rng = seeded(args.seed);
    let pair = make_ground_truth_pair(args.dim, args.k, args.eps, source.clone(), args.n, &mut rng)?;
    let x0_test = source.sample(args.dim, args.n_test, &mut rng)?;

    let truth = args.out.join("truth.json");
    pair.potential.save(&truth)?;
    let source_path = args.out.join("source.json");
    fs::write(&source_path, serde_json::to_string_pretty(&source)?)?;
    let outputs = vec![
        save_set(&args.out, "x0", args.format, &pair.x0)?,
        save_set(&args.out, "x1", args.format, &pair.x1)?,
        save_set(&args.out, "x0_test", args.format, &x0_test)?,
        truth,
        source_path,
    ];
    Run {
        command: "make-benchmark",
        args: &args,
        config: None,
        datasets: Vec::new(),
        seed: args.seed,
        outputs,
    }
    .finish(&args.out)
}

pub fn make_swiss_roll_cmd(mut args: SwissRollArgs) -> Result<()> {
    prepare(&mut args)?;
    let x0 = standard_gaussian(args.n, 2, &mut stream(args.seed, 0))?;
    let x1 = swiss_roll(args.n, &mut stream(args.seed, 1))?;
    let outputs = vec![
        save_set(&args.out, "x0", args.format, &x0)?,
        save_set(&args.out, "x1", args.format, &x1)?,
    ];
    Run {
        command: "make-swiss-roll",
        args: &args,
        config: None,
        datasets: Vec::new(),
        seed: args.seed,
        outputs,
    }
    .finish(&args.out)
}

fn verify_inputs(manifest: &RunManifest) -> Result<()> {
    for d in &manifest.datasets {
        let digest = if CHECKPOINT_ROLES.contains(&d.role.as_str()) {
            file_digest(&d.path)?
        } else {
            content_digest(&load_any(&d.path).with_context(|| format!("reading {}", d.path.display()))?)
        };
        ensure!(
            digest == d.sha256,
            "input {} ({}) changed since the recorded run",
            d.role,
            d.path.display()
        );
    }
    Ok(())
}

fn recorded<A: serde::de::DeserializeOwned + Resolve>(manifest: &RunManifest, out: &Path) -> Result<A> {
    let mut args: A = serde_json::from_value(manifest.args.clone())
        .with_context(|| format!("manifest arguments do not match command {:?}", manifest.command))?;
    args.set_out_dir(out.to_path_buf());
    Ok(args)
}

pub fn replay_cmd(args: ReplayArgs) -> Result<()> {
    let manifest = RunManifest::load(&args.manifest)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    if manifest.code_version != RunManifest::code_version() {
        eprintln!(
            "warning: manifest written by {}, replaying with {}",
            manifest.code_version,
            RunManifest::code_version()
        );
    }
    verify_inputs(&manifest)?;
    let out = &args.out;
    match manifest.command.as_str() {
        "train" => train_cmd(recorded(&manifest, out)?),
        "sample" => sample_cmd(recorded(&manifest, out)?),
        "trajectories" => trajectories_cmd(recorded(&manifest, out)?),
        "evaluate" => evaluate_cmd(recorded(&manifest, out)?),
        "make-benchmark" => make_benchmark_cmd(recorded(&manifest, out)?),
        "make-swiss-roll" => make_swiss_roll_cmd(recorded(&manifest, out)?),
        other => bail!("unknown command {other:?} in manifest"),
    }
}
