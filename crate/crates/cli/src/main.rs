//! `exoplan`: gait generation, closed-loop simulation, stability maps and
//! solver benchmarks.
//!
//! Exit codes: 0 success, 2 usage or configuration error (including an
//! infeasible gait or an empty benchmark corpus), 3 instability detected.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use exoplan_core::config::RunConfig;
use exoplan_core::gait::save_gait;
use exoplan_core::sim::bench::{bench_solver, read_corpus, record_corpus, write_corpus, CorpusCase};
use exoplan_core::sim::map::{map_svg, stability_map, write_map_csv, CellStatus, StabilityMap};
use exoplan_core::sim::{run_walk, write_trace, PreparedGait, Strategy};

#[derive(Parser)]
#[command(
    name = "exoplan",
    version,
    about = "Patient-priority walking-pattern replanning for a lower-limb exoskeleton"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic nominal gait and write it as CSV.
    GaitGen(GaitGenArgs),
    /// Run a multi-step walk and write its trace.
    Simulate(SimulateArgs),
    /// Sweep square-wave magnitude × duration for both strategies.
    StabilityMap(MapArgs),
    /// Time the planner on a recorded corpus of boundary conditions.
    Bench(BenchArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file (unknown keys are rejected).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set planner.knots=128`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (`output_dir`).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Random seed (`seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Load the gait from this CSV instead of synthesizing it.
    #[arg(long)]
    gait: Option<PathBuf>,
}

#[derive(Args)]
struct GaitGenArgs {
    #[command(flatten)]
    common: Common,
    /// Forward step length, m (`gait.step_length`).
    #[arg(long)]
    step_length: Option<f64>,
    /// Full step period, s (`gait.step_duration`).
    #[arg(long)]
    step_duration: Option<f64>,
    /// Lateral foot spacing, m (`gait.step_width`).
    #[arg(long)]
    step_width: Option<f64>,
    /// Output file (default `<output_dir>/gait.csv`).
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// `op` (online planning) or `tr` (time rescaling).
    #[arg(long)]
    strategy: Option<String>,
    /// Wearer velocity profile(s): `nominal`, `constant:F`, `square:M,D[,ONSET]`;
    /// separate per-step profiles with `/`.
    #[arg(long)]
    profile: Option<String>,
    /// Number of steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Wearer model: `scripted` or `tangent_torque`.
    #[arg(long)]
    patient: Option<String>,
    /// Also write the planner boundary conditions as a replayable corpus.
    #[arg(long)]
    save_corpus: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    common: Common,
    /// Steps per cell (`map.steps`).
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Replay this corpus CSV instead of recording one (`bench.corpus`).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Number of cases to record (`bench.cases`).
    #[arg(long)]
    cases: Option<usize>,
    /// Write the corpus that was timed to this CSV.
    #[arg(long)]
    save_corpus: Option<PathBuf>,
}

/// A failure with a specific exit code.
#[derive(Debug)]
struct Exit(u8);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "exit {}", self.0)
    }
}

impl std::error::Error for Exit {}

fn quoted(s: &str) -> String {
    format!("{s:?}")
}

fn path_value(p: &Path) -> String {
    quoted(&p.to_string_lossy())
}

impl Common {
    /// Generic `--set` overrides first, then the dedicated flags.
    fn resolve(&self, extra: Vec<String>) -> Result<RunConfig> {
        let mut overrides = self.set.clone();
        if let Some(o) = &self.out {
            overrides.push(format!("output_dir={}", path_value(o)));
        }
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(g) = &self.gait {
            overrides.push("gait.source=\"file\"".into());
            overrides.push(format!("gait.file={}", path_value(g)));
        }
        overrides.extend(extra);
        RunConfig::resolve(self.config.as_deref(), &overrides).context("loading the configuration")
    }
}

fn push<T: std::fmt::Display>(v: &mut Vec<String>, key: &str, value: Option<T>, quote: bool) {
    if let Some(x) = value {
        let s = x.to_string();
        v.push(format!("{key}={}", if quote { quoted(&s) } else { s }));
    }
}

/// Create the output directory and write the resolved configuration.
fn prepare_output(cfg: &RunConfig, command: &str) -> Result<PathBuf> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let echo = dir.join(format!("{command}.config.toml"));
    fs::write(&echo, cfg.to_toml()).with_context(|| format!("writing {}", echo.display()))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn prepared_gait(cfg: &RunConfig) -> Result<PreparedGait> {
    let sim = cfg.sim_config()?;
    let gait = cfg.build_gait().context("building the gait")?;
    Ok(PreparedGait::new(gait, &sim)?)
}

fn gait_gen(a: GaitGenArgs) -> Result<ExitCode> {
    let mut extra = Vec::new();
    push(&mut extra, "gait.step_length", a.step_length, false);
    push(&mut extra, "gait.step_duration", a.step_duration, false);
    push(&mut extra, "gait.step_width", a.step_width, false);
    let cfg = a.common.resolve(extra)?;
    let gait = match cfg.build_gait() {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return Err(Exit(2).into());
        }
    };
    let dir = prepare_output(&cfg, "gait-gen")?;
    let file = a.file.unwrap_or_else(|| dir.join("gait.csv"));
    save_gait(&gait, &file).with_context(|| format!("writing {}", file.display()))?;
    println!(
        "wrote {} ({} samples, single support {:.3} s, next foot ({:.3}, {:.3}) m)",
        file.display(),
        gait.samples().len(),
        gait.single_support().duration(),
        gait.next_foot_offset()[0],
        gait.next_foot_offset()[1]
    );
    Ok(ExitCode::SUCCESS)
}

fn simulate(a: SimulateArgs) -> Result<ExitCode> {
    let mut extra = Vec::new();
    push(&mut extra, "strategy", a.strategy.as_deref(), true);
    push(&mut extra, "patient.profile", a.profile.as_deref(), true);
    push(&mut extra, "steps", a.steps, false);
    push(&mut extra, "patient.model", a.patient.as_deref(), true);
    let cfg = a.common.resolve(extra)?;
    let gait = prepared_gait(&cfg)?;
    let mut sim = cfg.sim_config()?;
    sim.record_trace = true;
    sim.record_planner = a.save_corpus.is_some();
    let patient = cfg.patient_model()?;
    let dir = prepare_output(&cfg, "simulate")?;
    let walk = run_walk(&gait, cfg.strategy, &patient, cfg.steps, &sim)?;

    let trace = dir.join("trace.csv");
    write_trace(&walk.ticks, &sim.params, create(&trace)?).with_context(|| format!("writing {}", trace.display()))?;
    let steps_file = dir.join("steps.jsonl");
    let mut w = create(&steps_file)?;
    for s in &walk.steps {
        writeln!(w, "{}", serde_json::to_string(s)?)?;
    }
    w.flush()?;
    if let Some(path) = &a.save_corpus {
        let cases: Vec<CorpusCase> = walk.planner.iter().map(CorpusCase::from_tick).collect();
        write_corpus(&cases, create(path)?)?;
    }

    println!(
        "strategy {}  profile {}  steps {}",
        cfg.strategy.label(),
        cfg.patient.profile,
        cfg.steps
    );
    println!(
        "{:>4}  {:<8}  {:<22}  {:>9}  {:>8}  {:>9}  {:>10}",
        "step", "class", "reason", "error_m", "dur_s", "respected", "u*_exit_m"
    );
    for s in &walk.steps {
        println!(
            "{:>4}  {:<8}  {:<22}  {:>9.5}  {:>8.3}  {:>9.3}  {:>10.5}",
            s.index,
            s.classification(),
            s.fall_reason.label(),
            s.terminal_error,
            s.duration,
            s.respected_fraction,
            s.max_reference_exit
        );
    }
    println!("trace: {}", trace.display());
    if walk.all_stable() && walk.steps.len() == cfg.steps {
        Ok(ExitCode::SUCCESS)
    } else {
        println!("instability detected: {} fall(s)", walk.falls());
        Ok(ExitCode::from(3))
    }
}

fn print_map(m: &StabilityMap) {
    println!(
        "{} (rows: magnitude, columns: duration ms; # stable, x fallen, . infeasible)",
        m.strategy.label()
    );
    print!("      ");
    for d in &m.durations {
        print!("{:>4}", (d * 1000.0).round());
    }
    println!();
    for i in (0..m.magnitudes.len()).rev() {
        print!("{:>5.0}%", m.magnitudes[i] * 100.0);
        for j in 0..m.durations.len() {
            let c = match m.cell(i, j).status {
                CellStatus::Stable => '#',
                CellStatus::Fallen => 'x',
                CellStatus::Infeasible => '.',
            };
            print!("{c:>4}");
        }
        println!();
    }
}

fn map(a: MapArgs) -> Result<ExitCode> {
    let mut extra = Vec::new();
    push(&mut extra, "map.steps", a.steps, false);
    let cfg = a.common.resolve(extra)?;
    let gait = prepared_gait(&cfg)?;
    let sim = cfg.sim_config()?;
    let dir = prepare_output(&cfg, "stability-map")?;
    let grid = |s| stability_map(&gait, s, &cfg.map.magnitudes, &cfg.map.durations, cfg.map.steps, &sim);
    let tr = grid(Strategy::TimeRescaling)?;
    let op = grid(Strategy::OnlinePlanning)?;
    let csv = dir.join("stability_map.csv");
    write_map_csv(&[&tr, &op], create(&csv)?)?;
    let svg = dir.join("stability_map.svg");
    fs::write(&svg, map_svg(&[&tr, &op]))?;
    print_map(&tr);
    print_map(&op);
    println!("stable cells: tr {}  op {}", tr.stable_count(), op.stable_count());
    println!(
        "op region strictly contains tr region: {}",
        tr.strictly_contained_in(&op)
    );
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(ExitCode::SUCCESS)
}

fn bench(a: BenchArgs) -> Result<ExitCode> {
    let mut extra = Vec::new();
    push(
        &mut extra,
        "bench.corpus",
        a.corpus.as_deref().map(|p| p.to_string_lossy().into_owned()),
        true,
    );
    push(&mut extra, "bench.cases", a.cases, false);
    let cfg = a.common.resolve(extra)?;
    let sim = cfg.sim_config()?;
    let cases = match &cfg.bench.corpus {
        Some(path) => read_corpus(File::open(path).with_context(|| format!("opening {}", path.display()))?)?,
        None => record_corpus(&prepared_gait(&cfg)?, &sim, cfg.steps, cfg.bench.cases, cfg.seed)?,
    };
    if cases.is_empty() {
        eprintln!("error: benchmark corpus is empty");
        return Err(Exit(2).into());
    }
    let dir = prepare_output(&cfg, "bench")?;
    if let Some(path) = &a.save_corpus {
        write_corpus(&cases, create(path)?)?;
    }
    let stats = bench_solver(&cases, &sim.params, &sim.planner)?;
    eprintln!("cases {}  failures {}", stats.cases, stats.failures);
    eprintln!(
        "{:>10} {:>10} {:>10} {:>10} {:>10}",
        "min_ms", "mean_ms", "p50_ms", "p99_ms", "max_ms"
    );
    eprintln!(
        "{:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
        stats.min_ms, stats.mean_ms, stats.p50_ms, stats.p99_ms, stats.max_ms
    );
    let line = stats.to_json_line();
    println!("{line}");
    // One line per run, appended so repeated runs build a history.
    let report = dir.join("bench.jsonl");
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(&report)
        .and_then(|mut f| writeln!(f, "{line}"))
        .with_context(|| format!("writing {}", report.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GaitGen(a) => gait_gen(a),
        Command::Simulate(a) => simulate(a),
        Command::StabilityMap(a) => map(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => match e.downcast_ref::<Exit>() {
            Some(Exit(code)) => ExitCode::from(*code),
            None => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
