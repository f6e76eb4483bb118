//! `atomboson`: batch front end for rate curves, sampling, mesh
//! decomposition, lossy simulation and HOM analysis.
//!
//! Every random draw derives from `--seed`; `--workers` only sizes the thread
//! pool and never changes an emitted value.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use atomboson::exactsim::{benchmark_vs_model, BenchmarkConfig, InitialPhases};
use atomboson::hom::{
    fit_bunching, hom_monte_carlo_with, HomParams, MeasuredCounts, ReconstructionFailure,
    SAMPLE_DATA,
};
use atomboson::interferometer::{clements_decompose, haar_random_unitary, ModeUnitary};
use atomboson::lossmodel::{crossover_with, rate_curve, Crossover, RateScenario, TwoBodyModel};
use atomboson::permanent::{draw_samples, output_distribution};
use atomboson::{seed, Error, FockState};

#[derive(Parser, Debug)]
#[command(name = "atomboson", version, about = "Atom boson sampling toolkit")]
struct Cli {
    /// Root seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Atomic, photonic and classical sampling rates versus N.
    Rates(RatesArgs),
    /// Draw boson-sampling outcomes from a Haar-random interferometer.
    Sample(SampleArgs),
    /// Decompose a unitary into a layered coupling plan.
    Decompose(DecomposeArgs),
    /// Exact lossy simulation against the step-survival model.
    Exactsim(ExactsimArgs),
    /// Monte Carlo of the two-atom interference sequence.
    HomSim(HomSimArgs),
    /// Fit the bunching probability to measured outcome counts.
    HomFit(HomFitArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TwoBody {
    Auto,
    Exact,
    Closed,
}

#[derive(Args, Debug)]
struct RatesArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Shipped scenario: conservative, state-of-the-art or lossless.
    #[arg(long, default_value = "state-of-the-art")]
    preset: String,
    #[arg(long, default_value_t = 2)]
    n_min: usize,
    #[arg(long, default_value_t = 200)]
    n_max: usize,
    #[arg(long, value_enum, default_value = "auto")]
    two_body: TwoBody,
    /// Largest N evaluated with the finite-N model under `auto`.
    #[arg(long, default_value_t = atomboson::lossmodel::DEFAULT_EXACT_MAX_N)]
    exact_max_n: usize,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 1000)]
    shots: usize,
    /// Condition on outcomes with at most one boson per mode.
    #[arg(long)]
    collision_free: bool,
    /// Input Fock state as a JSON array; one boson in each of the first N
    /// modes when absent.
    #[arg(long)]
    input: Option<String>,
    /// Where to write the drawn unitary; `<out>.unitary.json` by default.
    #[arg(long)]
    unitary_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    /// Unitary JSON file `{"m", "re", "im"}`.
    #[arg(long, conflicts_with = "m")]
    input: Option<PathBuf>,
    /// Decompose a Haar-random unitary of this size instead.
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args, Debug)]
struct ExactsimArgs {
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    m: usize,
    /// Two-body lifetime in units of the execution time `M · t_step`.
    #[arg(long, default_value_t = 1.0)]
    tau_tb: f64,
    #[arg(long, default_value_t = 30)]
    realizations: usize,
    /// Give the uniform initial state random phases.
    #[arg(long)]
    random_phases: bool,
    /// Where to write the summary; `<out>.summary.json` by default.
    #[arg(long)]
    summary_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HomSimArgs {
    /// HomParams JSON file; overrides the individual flags.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Single-atom survival probability.
    #[arg(long, default_value_t = 0.84)]
    s: f64,
    /// Bunching probability, in [0.5, 1].
    #[arg(long, default_value_t = 0.731)]
    p_bunch: f64,
    /// Probability that a doubly occupied site loses both atoms at imaging.
    #[arg(long, default_value_t = 0.71)]
    p_lic0: f64,
    /// Addressing success probability.
    #[arg(long, default_value_t = 1.0)]
    p_addr: f64,
    /// Reconstruction success probability.
    #[arg(long, default_value_t = 1.0)]
    p_rec: f64,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    /// Count failed reconstructions of two atoms as one atom.
    #[arg(long)]
    misclassify: bool,
}

#[derive(Args, Debug)]
struct HomFitArgs {
    /// Measured counts `{"n0", "n1", "n2"}`; the shipped sample when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Single-atom survival probability.
    #[arg(long, default_value_t = 0.84)]
    s: f64,
    /// Probability that a doubly occupied site loses both atoms at imaging.
    #[arg(long, default_value_t = 0.71)]
    p_lic0: f64,
    /// Monte Carlo events behind the model probabilities.
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
}

enum Failure {
    Validation(String),
    SizeCap(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::SizeCap(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::SizeCap(m) | Failure::Io(m) => m,
        }
    }
}

fn lib_err(context: &str) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| {
        let msg = format!("{context}: {e}");
        if e.is_size_cap() {
            Failure::SizeCap(msg)
        } else {
            Failure::Validation(msg)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("reading {}: {e}", path.display())))
}

/// Writes via a temporary file in the target directory and renames it into
/// place, so a failed run never leaves a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let io = |e: io::Error| Failure::Io(format!("writing {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Primary output plus any side files, written only once everything has
/// been computed.
struct Outputs {
    main: String,
    extra: Vec<(PathBuf, String)>,
}

fn emit(out: Option<&Path>, outputs: Outputs) -> Result<(), Failure> {
    for (path, text) in &outputs.extra {
        write_atomic(path, text)?;
    }
    match out {
        Some(path) => write_atomic(path, &outputs.main),
        None => io::stdout()
            .write_all(outputs.main.as_bytes())
            .map_err(|e| Failure::Io(format!("writing stdout: {e}"))),
    }
}

fn crossover_text(c: Crossover) -> String {
    match c {
        Crossover::At(n) => n.to_string(),
        Crossover::NotInRange { .. } => "none".into(),
    }
}

fn cmd_rates(args: &RatesArgs) -> Result<Outputs, Failure> {
    let sc = match &args.scenario {
        Some(path) => RateScenario::from_json(&read(path)?)
            .map_err(lib_err(&format!("scenario {}", path.display())))?,
        None => RateScenario::preset(&args.preset).ok_or_else(|| {
            Failure::Validation(format!(
                "unknown preset {:?}; expected one of {:?}",
                args.preset,
                atomboson::lossmodel::PRESET_NAMES
            ))
        })?,
    };
    if args.n_min == 0 || args.n_min > args.n_max {
        return Err(Failure::Validation(format!(
            "invalid N range {}..={}",
            args.n_min, args.n_max
        )));
    }
    let model = match args.two_body {
        TwoBody::Auto => TwoBodyModel::Auto {
            max_exact_n: args.exact_max_n,
        },
        TwoBody::Exact => TwoBodyModel::Exact,
        TwoBody::Closed => TwoBodyModel::ClosedForm,
    };
    let range = args.n_min..=args.n_max;
    let rows = rate_curve(&sc, range.clone(), model).map_err(lib_err("rate curve"))?;
    let mut csv = String::from("N,r_atomic,r_photonic,r_classical\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{:?},{:?},{:?}",
            r.n, r.r_atomic, r.r_photonic, r.r_classical
        )
        .unwrap();
    }
    let found = rows
        .iter()
        .find(|r| r.r_atomic > r.r_classical)
        .map_or(Crossover::NotInRange { max_n: args.n_max }, |r| {
            Crossover::At(r.n)
        });
    let closed = crossover_with(&sc.atomic, &sc.classical, range, TwoBodyModel::ClosedForm)
        .map_err(lib_err("crossover"))?;
    writeln!(
        csv,
        "# crossover N*={} closed_form_crossover N*={}",
        crossover_text(found),
        crossover_text(closed)
    )
    .unwrap();
    Ok(Outputs {
        main: csv,
        extra: Vec::new(),
    })
}

fn cmd_sample(args: &SampleArgs, root: u64, out: Option<&Path>) -> Result<Outputs, Failure> {
    let input = match &args.input {
        Some(text) => FockState::from_json(text).map_err(lib_err("input state"))?,
        None => {
            if args.n > args.m {
                return Err(Failure::Validation(format!(
                    "default input needs N <= M, got N = {}, M = {}",
                    args.n, args.m
                )));
            }
            FockState::from_modes(args.m, &(0..args.n).collect::<Vec<_>>())
                .map_err(lib_err("input state"))?
        }
    };
    if input.modes() != args.m || input.total() != args.n {
        return Err(Failure::Validation(format!(
            "input state has N = {}, M = {} but --n {} --m {} was given",
            input.total(),
            input.modes(),
            args.n,
            args.m
        )));
    }
    let u = haar_random_unitary(args.m, seed::derive(root, 0));
    let dist = output_distribution(&u, &input, args.collision_free)
        .map_err(lib_err("output distribution"))?;
    let samples = if args.shots == 0 {
        Vec::new()
    } else {
        draw_samples(&dist, args.shots, seed::derive(root, 1)).map_err(lib_err("sampling"))?
    };
    let mut csv = (0..args.m)
        .map(|i| format!("m{i}"))
        .collect::<Vec<_>>()
        .join(",");
    csv.push('\n');
    for s in &samples {
        let row: Vec<String> = s.occupations().iter().map(u32::to_string).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let unitary_path = args
        .unitary_out
        .clone()
        .or_else(|| out.map(|p| sibling(p, ".unitary.json")));
    let extra = unitary_path.map(|p| (p, u.to_json())).into_iter().collect();
    Ok(Outputs { main: csv, extra })
}

fn cmd_decompose(args: &DecomposeArgs, root: u64) -> Result<Outputs, Failure> {
    let u = match (&args.input, args.m) {
        (Some(path), _) => ModeUnitary::from_json(&read(path)?)
            .map_err(lib_err(&format!("unitary {}", path.display())))?,
        (None, Some(m)) if m > 0 => haar_random_unitary(m, seed::derive(root, 0)),
        _ => {
            return Err(Failure::Validation(
                "decompose needs --input <file> or --m <modes>".into(),
            ))
        }
    };
    let plan = clements_decompose(&u).map_err(lib_err("decomposition"))?;
    let mut text = plan.to_json();
    text.push('\n');
    Ok(Outputs {
        main: text,
        extra: Vec::new(),
    })
}

fn cmd_exactsim(args: &ExactsimArgs, root: u64, out: Option<&Path>) -> Result<Outputs, Failure> {
    let mut cfg = BenchmarkConfig::new(args.n, args.m, args.tau_tb, args.realizations, root);
    cfg.phases = if args.random_phases {
        InitialPhases::Random
    } else {
        InitialPhases::Zero
    };
    let bench = benchmark_vs_model(&cfg).map_err(lib_err("exact simulation"))?;
    cfg.phases = match cfg.phases {
        InitialPhases::Zero => InitialPhases::Random,
        InitialPhases::Random => InitialPhases::Zero,
    };
    let other = benchmark_vs_model(&cfg).map_err(lib_err("exact simulation"))?;
    let mut summary = json!({
        "mean_p_total": bench.mean_p_total,
        "model_p_step": bench.model_p_step,
        "model_p_step_pow_M": bench.model_p_step_pow_m,
    });
    if (other.mean_p_total - bench.mean_p_total).abs() > 0.01 {
        let key = match cfg.phases {
            InitialPhases::Random => "mean_p_total_random_phases",
            InitialPhases::Zero => "mean_p_total_zero_phases",
        };
        summary[key] = json!(other.mean_p_total);
    }
    let mut summary_text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    summary_text.push('\n');
    let extra = match args
        .summary_out
        .clone()
        .or_else(|| out.map(|p| sibling(p, ".summary.json")))
    {
        Some(p) => vec![(p, summary_text)],
        None => {
            eprint!("{summary_text}");
            Vec::new()
        }
    };
    Ok(Outputs {
        main: bench.to_csv(),
        extra,
    })
}

fn cmd_hom_sim(args: &HomSimArgs, root: u64) -> Result<Outputs, Failure> {
    let params = match &args.scenario {
        Some(path) => serde_json::from_str::<HomParams>(&read(path)?)
            .map_err(|e| Failure::Validation(format!("parameters {}: {e}", path.display())))?,
        None => {
            if !(0.5..=1.0).contains(&args.p_bunch) {
                return Err(Failure::Validation(format!(
                    "--p-bunch must lie in [0.5, 1], got {}",
                    args.p_bunch
                )));
            }
            let mut p = HomParams::with_bunching(args.s, args.p_bunch, args.p_lic0);
            p.p_addr = args.p_addr;
            p.p_rec = args.p_rec;
            p
        }
    };
    let mode = if args.misclassify {
        ReconstructionFailure::Misclassify
    } else {
        ReconstructionFailure::Discard
    };
    let outcomes =
        hom_monte_carlo_with(&params, args.trials, root, mode).map_err(lib_err("Monte Carlo"))?;
    let mut text = serde_json::to_string_pretty(&outcomes).expect("outcomes serialize");
    text.push('\n');
    Ok(Outputs {
        main: text,
        extra: Vec::new(),
    })
}

fn cmd_hom_fit(args: &HomFitArgs, root: u64) -> Result<Outputs, Failure> {
    let (text, source) = match &args.data {
        Some(path) => (read(path)?, path.display().to_string()),
        None => (SAMPLE_DATA.to_string(), "shipped sample".to_string()),
    };
    let counts = MeasuredCounts::from_json(&text).map_err(lib_err(&format!("data {source}")))?;
    let measured = counts
        .outcomes()
        .map_err(|_| Failure::Validation(format!("data {source}: all counts are zero")))?;
    let fit =
        fit_bunching(&measured, args.s, args.p_lic0, args.trials, root).map_err(lib_err("fit"))?;
    let mut text = fit.to_json();
    text.push('\n');
    Ok(Outputs {
        main: text,
        extra: Vec::new(),
    })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(k) = cli.workers {
        if k == 0 {
            return Err(Failure::Validation("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Validation(format!("thread pool: {e}")))?;
    }
    let out = cli.out.as_deref();
    let outputs = match &cli.command {
        Command::Rates(a) => cmd_rates(a)?,
        Command::Sample(a) => cmd_sample(a, cli.seed, out)?,
        Command::Decompose(a) => cmd_decompose(a, cli.seed)?,
        Command::Exactsim(a) => cmd_exactsim(a, cli.seed, out)?,
        Command::HomSim(a) => cmd_hom_sim(a, cli.seed)?,
        Command::HomFit(a) => cmd_hom_fit(a, cli.seed)?,
    };
    emit(out, outputs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
