use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fusioncs::bounds::{estimate, ComplexityInputs, TheoremId};
use fusioncs::certificate::{gram_conditions, golfing_build, verify_inexact, verify_robust, GolfingSchedule, RobustParams};
use fusioncs::experiments::{self, sparse_signal, ExperimentName, ExperimentSpec};
use fusioncs::rng::{derive_seed, seeded};
use fusioncs::solver::{solve_block_baseline, solve_l1_equality, solve_l1_noisy};
use fusioncs::{BlockSupport, Error, FusionFrame, MatrixKind, MeasurementEnsemble, Result, SolverConfig};

#[derive(Parser)]
#[command(name = "fusioncs", version, about = "Block-sparse recovery in fusion frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect a fusion frame.
    #[command(subcommand)]
    Frame(FrameCommand),
    /// Recover one random block-sparse signal.
    Solve(SolveArgs),
    /// Sample-complexity estimates for a frame and support.
    Bounds(BoundsArgs),
    /// Build and verify a golfing dual certificate for one instance.
    Certificate(InstanceArgs),
    /// Run a Monte-Carlo sweep described by a JSON spec.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum FrameCommand {
    /// Draw N random k-dimensional subspaces of R^d and write them as JSON.
    Gen {
        #[arg(short = 'N', long = "num-subspaces")]
        n: usize,
        #[arg(short, long)]
        d: usize,
        #[arg(short, long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print dimensions, frame bounds and incoherence of a frame file.
    Info {
        frame: PathBuf,
        /// Comma-separated support for the restricted norms.
        #[arg(long, value_delimiter = ',')]
        support: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Bernoulli,
    Gaussian,
}

impl From<Kind> for MatrixKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Bernoulli => MatrixKind::Bernoulli,
            Kind::Gaussian => MatrixKind::Gaussian,
        }
    }
}

#[derive(Args)]
struct InstanceArgs {
    /// Frame JSON written by `frame gen`.
    #[arg(long)]
    frame: PathBuf,
    #[arg(short, long)]
    m: usize,
    #[arg(short, long)]
    s: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Kind::Bernoulli)]
    kind: Kind,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProgramArg {
    Ff,
    Block,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum, default_value_t = ProgramArg::Ff)]
    program: ProgramArg,
    /// Noise norm; solves the noisy program with a normalized matrix when positive.
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iter: usize,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    frame: PathBuf,
    /// Comma-separated support; defaults to the first s blocks.
    #[arg(long, value_delimiter = ',')]
    support: Vec<usize>,
    #[arg(short, long)]
    s: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Universal constant multiplying the ln terms.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    name: String,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Append a wall_time column (output is then no longer byte-reproducible).
    #[arg(long)]
    timing: bool,
}

fn load_frame(path: &Path) -> Result<FusionFrame> {
    FusionFrame::from_json(&std::fs::read_to_string(path)?)
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn frame_cmd(cmd: FrameCommand) -> Result<()> {
    match cmd {
        FrameCommand::Gen { n, d, k, seed, out } => {
            let json = FusionFrame::random(n, d, k, seed)?.to_json()?;
            match out {
                Some(p) => std::fs::write(p, json + "\n")?,
                None => println!("{json}"),
            }
            Ok(())
        }
        FrameCommand::Info { frame, support } => {
            let f = load_frame(&frame)?;
            let (lo, hi) = f.frame_bounds();
            let mut info = json!({
                "N": f.num_subspaces(),
                "d": f.ambient_dim(),
                "k": f.subspace_dim(),
                "frame_bounds": [lo, hi],
                "lambda": f.incoherence().lambda_max(),
            });
            if !support.is_empty() {
                let s = BlockSupport::new(support)?;
                s.check_within(f.num_subspaces())?;
                info["norms"] = serde_json::to_value(f.incoherence().restricted_norms(&s)?)?;
                info["lambda_eff"] = json!(f.incoherence().lambda_eff(&s)?);
            }
            print_json(&info)
        }
    }
}

struct Instance {
    frame: Arc<FusionFrame>,
    x: fusioncs::BlockVector,
    support: BlockSupport,
    ensemble: MeasurementEnsemble,
}

fn draw_instance(a: &InstanceArgs, normalized: bool) -> Result<Instance> {
    let frame = Arc::new(load_frame(&a.frame)?);
    if a.s > frame.num_subspaces() {
        return Err(Error::Infeasible(format!("s = {} exceeds N = {}", a.s, frame.num_subspaces())));
    }
    if a.m == 0 {
        return Err(Error::Infeasible("m must be positive".into()));
    }
    let (x, support) = sparse_signal(&frame, a.s, &mut seeded(derive_seed(a.seed, 1)));
    let ensemble = MeasurementEnsemble::draw(a.kind.into(), a.m, frame.clone(), derive_seed(a.seed, 2), normalized)?;
    Ok(Instance {
        frame,
        x,
        support,
        ensemble,
    })
}

fn solve_cmd(a: SolveArgs) -> Result<()> {
    let inst = draw_instance(&a.instance, a.eta > 0.0)?;
    let cfg = SolverConfig {
        max_iter: a.max_iter,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    let clean = inst.ensemble.apply_ap(&inst.x)?;
    let (y, report) = match (a.program, a.eta > 0.0) {
        (ProgramArg::Ff, false) => {
            let r = solve_l1_equality(&inst.ensemble, &clean, &cfg)?;
            (clean, r)
        }
        (ProgramArg::Block, false) => {
            let r = solve_block_baseline(&inst.ensemble, &clean, &cfg)?;
            (clean, r)
        }
        (ProgramArg::Ff, true) => {
            let noisy = inst.ensemble.add_noise(&clean, a.eta, derive_seed(a.instance.seed, 3))?;
            let r = solve_l1_noisy(&inst.ensemble, &noisy.y, a.eta, &cfg)?;
            (noisy.y, r)
        }
        (ProgramArg::Block, true) => {
            return Err(Error::Precondition("the block baseline has no noisy variant".into()));
        }
    };
    let report = report.with_truth(&inst.x)?;
    let lambda_eff = if inst.support.is_empty() {
        0.0
    } else {
        inst.frame.incoherence().lambda_eff(&inst.support)?
    };
    print_json(&json!({
        "support": inst.support.indices(),
        "lambda_eff": lambda_eff,
        "y_hash": experiments::hash_measurements(&y),
        "objective": report.objective,
        "constraint_residual": report.constraint_residual,
        "iterations": report.iterations,
        "converged": report.converged,
        "rel_err": report.rel_err_vs_truth,
        "success": report.is_success(cfg.success_rel_err),
    }))
}

fn bounds_cmd(a: BoundsArgs) -> Result<()> {
    let f = load_frame(&a.frame)?;
    let support = if a.support.is_empty() {
        let s = a.s.ok_or_else(|| Error::Precondition("give --support or --s".into()))?;
        if s > f.num_subspaces() {
            return Err(Error::Infeasible(format!("s = {s} exceeds N = {}", f.num_subspaces())));
        }
        BlockSupport::new((0..s).collect())?
    } else {
        BlockSupport::new(a.support)?
    };
    support.check_within(f.num_subspaces())?;
    let inputs = ComplexityInputs {
        n: f.num_subspaces(),
        s: support.len(),
        k: f.subspace_dim(),
        eps: a.eps,
        lambda: f.incoherence().lambda_max(),
        norms: f.incoherence().restricted_norms(&support)?,
        c: a.c,
        delta: a.delta,
    };
    println!("theorem_id,N,s,k,eps,lambda,inf_s,two_inf_s,two_inf_ss,spec_ss,c,delta,m_required");
    let f = experiments::fmt_f64;
    for id in TheoremId::ALL {
        let e = estimate(id, &inputs)?;
        let i = &e.inputs;
        println!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e.theorem_id,
            i.n,
            i.s,
            i.k,
            f(i.eps),
            f(i.lambda),
            f(i.norms.inf_s),
            f(i.norms.two_inf_s),
            f(i.norms.two_inf_ss),
            f(i.norms.spec_ss),
            f(i.c),
            f(i.delta),
            f(e.m_required)
        );
    }
    Ok(())
}

fn certificate_cmd(a: InstanceArgs) -> Result<()> {
    let inst = draw_instance(&a, true)?;
    if inst.support.is_empty() {
        return Err(Error::Infeasible("a certificate needs s ≥ 1".into()));
    }
    let schedule = GolfingSchedule::default_for(a.m, inst.frame.num_subspaces(), a.s)?;
    let cert = golfing_build(&inst.ensemble, &inst.x, &schedule)?;
    let gram = gram_conditions(&inst.ensemble, &inst.support)?;
    let mut dump: serde_json::Value = serde_json::from_str(&cert.to_json(Some(&gram))?)?;
    dump["inexact"] = serde_json::to_value(verify_inexact(&cert, &gram))?;
    let params = RobustParams::from_measured(&cert, &gram);
    dump["robust_params"] = serde_json::to_value(params)?;
    dump["robust"] = match verify_robust(&cert, &gram, &params) {
        Ok(v) => serde_json::to_value(v)?,
        Err(e) => json!({ "error": e.to_string() }),
    };
    print_json(&dump)
}

fn experiment_cmd(a: ExperimentArgs) -> Result<()> {
    let name: ExperimentName = a.name.parse()?;
    let mut spec = ExperimentSpec::from_file(&a.spec)?;
    if spec.name != name {
        return Err(Error::Spec(format!("spec file describes {}, not {name}", spec.name)));
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    if let Some(s) = a.base_seed {
        spec.base_seed = s;
    }
    let timing = a.timing || spec.record_wall_time;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Precondition(e.to_string()))?;
    let result = pool.install(|| experiments::run(&spec))?;
    for note in &result.notes {
        eprintln!("note: {note}");
    }
    for path in result.write(&a.out, timing)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Spec(_) => 2,
        Error::Infeasible(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Frame(c) => frame_cmd(c),
        Command::Solve(a) => solve_cmd(a),
        Command::Bounds(a) => bounds_cmd(a),
        Command::Certificate(a) => certificate_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
