use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sigmoid_composite::experiment::{
    compare_optimizers, gen_data, run_experiment, ExperimentConfig, InitKind, Summary, TaskKind,
};
use sigmoid_composite::solvers::SolverKind;
use sigmoid_composite::subsolvers::DualResidual;
use sigmoid_composite::{Error, LossKind};

#[derive(Parser)]
#[command(
    name = "sigcomp",
    version,
    about = "Train sigmoid networks with proximal composite solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the task selected by --task.
    Run(RunArgs),
    /// Train on Franke's function sampled at Halton points.
    Franke(CommonArgs),
    /// Train a binary digits classifier.
    Digits(CommonArgs),
    /// Train on a `x0..,y` CSV given by --data.
    CustomCsv(CommonArgs),
    /// Write train.csv and test.csv for a task.
    GenData(RunArgs),
    /// Run GLPA, SGDM, RMSProp and Adam from the same start.
    Compare(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_task, default_value = "franke")]
    task: TaskKind,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, value_parser = parse_loss)]
    loss: Option<LossKind>,
    #[arg(long, value_parser = parse_solver)]
    solver: Option<SolverKind>,
    /// Hidden width; defaults to the adaptive size for the training set.
    #[arg(long)]
    q: Option<usize>,
    /// Proximal parameter.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    step_tol: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Sufficient-decrease constant of the line search.
    #[arg(long)]
    c: Option<f64>,
    /// Backtracking factor.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    max_backtracks: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    admm_max_iters: Option<usize>,
    #[arg(long, value_parser = parse_dual_residual)]
    dual_residual: Option<DualResidual>,
    /// Franke training noise level σ̃.
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_init)]
    init: Option<InitKind>,
    /// Half-width of the uniform initialization.
    #[arg(long)]
    init_scale: Option<f64>,
    /// Digit pair as `A,B`; A is the +1 class.
    #[arg(long, value_parser = parse_pair)]
    pair: Option<(u8, u8)>,
    #[arg(long)]
    train_frac: Option<f64>,
    /// Divide digit pixels by 16.
    #[arg(long)]
    scale_pixels: bool,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Baseline learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Baseline momentum (SGDM, RMSProp) or first-moment decay (Adam).
    #[arg(long)]
    momentum: Option<f64>,
    /// Baseline iteration count.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_init(s: &str) -> Result<InitKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_dual_residual(s: &str) -> Result<DualResidual, String> {
    match s {
        "literal" => Ok(DualResidual::Literal),
        "transposed" => Ok(DualResidual::Transposed),
        other => Err(format!("unknown dual residual '{other}' (literal|transposed)")),
    }
}

fn parse_pair(s: &str) -> Result<(u8, u8), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("pair '{s}' must look like A,B"))?;
    let digit = |p: &str| p.trim().parse::<u8>().map_err(|e| format!("bad digit '{p}': {e}"));
    Ok((digit(a)?, digit(b)?))
}

impl CommonArgs {
    fn into_config(self, task: TaskKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_task(task);
        let s = &mut cfg.solver_config;
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        set!(self.t => s.t);
        set!(self.step_tol => s.step_tol);
        set!(self.max_outer => s.max_outer);
        set!(self.c => s.c);
        set!(self.tau => s.tau);
        set!(self.max_backtracks => s.max_backtracks);
        set!(self.rho => s.admm.rho);
        set!(self.eps => s.admm.eps);
        set!(self.admm_max_iters => s.admm.max_iters);
        set!(self.dual_residual => s.admm.dual_residual);
        set!(self.lr => cfg.baseline.lr);
        set!(self.momentum => cfg.baseline.momentum);
        set!(self.iters => cfg.baseline.iters);
        set!(self.loss => cfg.loss);
        set!(self.solver => cfg.solver);
        set!(self.init => cfg.init);
        set!(self.init_scale => cfg.init_scale);
        set!(self.pair => cfg.pair);
        set!(self.train_frac => cfg.train_frac);
        set!(self.n_train => cfg.n_train);
        set!(self.n_test => cfg.n_test);
        cfg.q = self.q;
        cfg.noise_sigma = self.noise_sigma;
        cfg.seed = self.seed;
        cfg.scale_pixels = self.scale_pixels;
        cfg.data = self.data;
        cfg.out = self.out;
        cfg
    }
}

fn report(summary: &Summary) {
    print!(
        "{} {} {}: q={} iterations={} objective={:.6e} stop={:?}",
        summary.task,
        summary.loss,
        summary.solver,
        summary.q,
        summary.iterations,
        summary.final_objective,
        summary.stop_reason
    );
    if let Some(r) = &summary.regression {
        print!(" train_rms={:.6e} test_rms={:.6e}", r.train_rms_error, r.test_rms_error);
    }
    if let Some(c) = &summary.classification {
        print!(
            " train_errors={}/{} test_errors={}/{}",
            c.train_errors, c.train_size, c.test_errors, c.test_size
        );
    }
    println!(" rank={}/{}", summary.rank.rank, summary.rank.rows);
}

fn execute(command: Command) -> sigmoid_composite::Result<()> {
    match command {
        Command::Run(args) => report(&run_experiment(&args.common.into_config(args.task))?),
        Command::Franke(args) => report(&run_experiment(&args.into_config(TaskKind::Franke))?),
        Command::Digits(args) => report(&run_experiment(&args.into_config(TaskKind::Digits))?),
        Command::CustomCsv(args) => report(&run_experiment(&args.into_config(TaskKind::CustomCsv))?),
        Command::GenData(args) => {
            let cfg = args.common.into_config(args.task);
            let (train, test) = gen_data(&cfg, &cfg.out)?;
            println!("{}\n{}", train.display(), test.display());
        }
        Command::Compare(args) => {
            let comparison = compare_optimizers(&args.common.into_config(args.task))?;
            for run in &comparison.runs {
                report(run);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err @ Error::InvalidArgument(_)) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
