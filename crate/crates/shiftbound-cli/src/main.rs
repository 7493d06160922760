mod commands;
mod ctx;
mod emit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::CmdOut;
use ctx::{CliError, CliResult, Ctx};
use emit::{render, write_rendered, Format};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

/// Divergence regularity bounds for Markov processes: compute them, verify
/// them against exact laws, and stress them with coupled simulations.
#[derive(Parser, Debug)]
#[command(name = "shiftbound", version, about)]
struct Cli {
    /// JSON config file; explicit flags override its entries
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output format (default depends on the command)
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Write the result to a file instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    /// RNG seed (overrides config and SHIFTBOUND_SEED)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Size of the worker thread pool (results do not depend on it)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute a divergence bound
    #[command(subcommand)]
    Bound(BoundCmd),
    /// Verify bounds against exact laws and independent recomputations
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Run coupled simulations of the shifted pair construction
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Check Harnack-type inequalities implied by the bounds
    #[command(subcommand)]
    Harnack(HarnackCmd),
    /// Fisher-information tools for local limit bounds
    #[command(subcommand)]
    Clt(CltCmd),
}

#[derive(Subcommand, Debug)]
enum BoundCmd {
    /// Multi-step bound for an abstract contractive kernel
    MultiStep(commands::MultiStepArgs),
    /// Discrete Langevin (Euler) bound over N steps
    LangevinDiscrete(commands::LangevinDiscreteArgs),
    /// Continuous-time Langevin bound at horizon T
    LangevinContinuous(commands::LangevinContinuousArgs),
    /// KL bound for Euler schemes with state-dependent noise
    MultNoise(commands::MultNoiseArgs),
    /// Local limit bound from Fisher information
    Clt(commands::BoundCltArgs),
    /// Compose two bounds across the weak triangle inequality
    ComposeOrders(commands::ComposeOrdersArgs),
}

#[derive(Subcommand, Debug)]
enum VerifyCmd {
    /// Bound vs. exact divergence for the linear-drift Euler chain
    Ou(commands::VerifyOuArgs),
    /// Closed-form shift schedule vs. dynamic programming
    Shifts(commands::VerifyShiftsArgs),
    /// Discrete-to-continuous convergence as the step size halves
    SweepH(commands::VerifySweepHArgs),
    /// Harnack inequalities: extremal equality and random cases
    HarnackCheck(commands::VerifyHarnackArgs),
    /// Fisher information: dual forms, Cramer-Rao, convolution sweep
    CltCheck(commands::VerifyCltArgs),
}

#[derive(Subcommand, Debug)]
enum SimulateCmd {
    /// Synchronously coupled shifted pair under an Euler scheme
    Pair(commands::SimulatePairArgs),
    /// Coupled pair driven on a continuous-time grid
    Continuous(commands::SimulateContinuousArgs),
    /// Shifted pair started from matched Gaussian ensembles
    Wasserstein(commands::SimulateWassersteinArgs),
}

#[derive(Subcommand, Debug)]
enum HarnackCmd {
    /// Power-Harnack inequality (exponent p > 1)
    Power(commands::HarnackArgs),
    /// Log-Harnack inequality
    Log(commands::HarnackArgs),
    /// Reverse Harnack inequality (exponent p < 0)
    Reverse(commands::HarnackArgs),
}

#[derive(Subcommand, Debug)]
enum CltCmd {
    /// Fisher information and variance of an increment density
    Fisher(commands::CltFisherArgs),
    /// Scaled convolution KL against the Fisher limit
    Sweep(commands::CltSweepArgs),
}

fn dispatch(ctx: &Ctx, command: &Command) -> CliResult<CmdOut> {
    match command {
        Command::Bound(BoundCmd::MultiStep(a)) => commands::bound_multi_step(ctx, a),
        Command::Bound(BoundCmd::LangevinDiscrete(a)) => commands::bound_langevin_discrete(ctx, a),
        Command::Bound(BoundCmd::LangevinContinuous(a)) => {
            commands::bound_langevin_continuous(ctx, a)
        }
        Command::Bound(BoundCmd::MultNoise(a)) => commands::bound_mult_noise(ctx, a),
        Command::Bound(BoundCmd::Clt(a)) => commands::bound_clt(ctx, a),
        Command::Bound(BoundCmd::ComposeOrders(a)) => commands::bound_compose_orders(ctx, a),
        Command::Verify(VerifyCmd::Ou(a)) => commands::verify_ou(ctx, a),
        Command::Verify(VerifyCmd::Shifts(a)) => commands::verify_shifts(ctx, a),
        Command::Verify(VerifyCmd::SweepH(a)) => commands::verify_sweep_h(ctx, a),
        Command::Verify(VerifyCmd::HarnackCheck(a)) => commands::verify_harnack(ctx, a),
        Command::Verify(VerifyCmd::CltCheck(a)) => commands::verify_clt(ctx, a),
        Command::Simulate(SimulateCmd::Pair(a)) => commands::simulate_pair(ctx, a),
        Command::Simulate(SimulateCmd::Continuous(a)) => commands::simulate_continuous(ctx, a),
        Command::Simulate(SimulateCmd::Wasserstein(a)) => commands::simulate_wasserstein(ctx, a),
        Command::Harnack(HarnackCmd::Power(a)) => {
            commands::harnack(ctx, commands::HarnackKind::Power, a)
        }
        Command::Harnack(HarnackCmd::Log(a)) => {
            commands::harnack(ctx, commands::HarnackKind::Log, a)
        }
        Command::Harnack(HarnackCmd::Reverse(a)) => {
            commands::harnack(ctx, commands::HarnackKind::Reverse, a)
        }
        Command::Clt(CltCmd::Fisher(a)) => commands::clt_fisher(ctx, a),
        Command::Clt(CltCmd::Sweep(a)) => commands::clt_sweep(ctx, a),
    }
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    let ctx = Ctx::load(
        cli.config.as_deref(),
        cli.seed,
        cli.format.map(Into::into),
        cli.output,
        cli.threads,
    )?;
    if let Some(threads) = ctx.threads()? {
        if threads == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Failure(format!("could not size the thread pool: {e}")))?;
    }
    let out = dispatch(&ctx, &cli.command)?;
    let format = ctx.format(out.default_format)?;
    let text = render(&out.output, format);
    let path = ctx.output_path()?;
    write_rendered(&text, path.as_deref())
        .map_err(|e| CliError::Failure(format!("could not write the output: {e}")))?;
    if let Some((ok, summary)) = out.verdict {
        eprintln!("{summary}");
        if !ok {
            return Ok(ExitCode::from(1));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
