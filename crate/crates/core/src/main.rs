use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vcem::experiments::{self, Experiment, ExperimentConfig};
use vcem::Result;

#[derive(Parser)]
#[command(name = "vcem", version, about = "Variational coherent error mitigation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the stabilizer cost of a graph-state circuit from θ = 0.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        grad_tolerance: Option<f64>,
        /// adjoint or parameter_shift
        #[arg(long)]
        gradient: Option<String>,
    },
    /// Sweep ΔC̃(0) over coherent-error scale and register size on a line.
    DeltaScaling {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ε values.
        #[arg(long)]
        eps_values: Option<String>,
        /// Comma-separated sizes or a range such as 4-10.
        #[arg(long)]
        n_values: Option<String>,
        #[arg(long)]
        n_sweep_eps: Option<f64>,
        #[arg(long)]
        draws: Option<usize>,
        /// Permit registers of up to 12 qubits.
        #[arg(long)]
        allow_large: bool,
    },
    /// Analytic vs simulated GHZ cost landscapes.
    GhzLandscape {
        #[command(flatten)]
        common: Common,
        /// all, noiseless, end_pauli, per_moment_depol or per_moment_pauli
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Pauli and Clifford twirling of amplitude damping.
    TwirlDemo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gamma: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Key = value settings file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// line:N, grid:RxC or an edge-list file.
    #[arg(long)]
    graph: Option<String>,
    /// none, depol:p=P or pauli:m=M,mag=A (';' separates per-moment specs).
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    coh_mag: Option<f64>,
    #[arg(long)]
    seed_coh: Option<u64>,
    #[arg(long)]
    seed_inc: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn push<T: ToString>(v: &mut Vec<(&'static str, String)>, key: &'static str, value: Option<T>) {
    if let Some(x) = value {
        v.push((key, x.to_string()));
    }
}

fn resolve(experiment: Experiment, common: Common, mut extra: Vec<(&'static str, String)>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::defaults(experiment);
    if let Some(path) = &common.config {
        config.apply_file(path)?;
    }
    let mut overrides = Vec::new();
    push(&mut overrides, "graph", common.graph);
    push(&mut overrides, "noise", common.noise);
    push(&mut overrides, "coh_mag", common.coh_mag);
    push(&mut overrides, "seed_coh", common.seed_coh);
    push(&mut overrides, "seed_inc", common.seed_inc);
    push(&mut overrides, "out", common.out.map(|p| p.display().to_string()));
    overrides.append(&mut extra);
    for (k, v) in overrides {
        config.set(k, &v)?;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize {
            common,
            max_iters,
            learning_rate,
            grad_tolerance,
            gradient,
        } => {
            let mut extra = Vec::new();
            push(&mut extra, "max_iters", max_iters);
            push(&mut extra, "learning_rate", learning_rate);
            push(&mut extra, "grad_tolerance", grad_tolerance);
            push(&mut extra, "gradient", gradient);
            let config = resolve(Experiment::Optimize, common, extra)?;
            let out = experiments::run_optimize(&config)?;
            println!(
                "iterations {} converged {} final cost {:.12} grad norm {:.3e} max |θ+ε| {:.3e}",
                out.trace.num_iterations(),
                out.trace.converged,
                out.trace.final_cost(),
                out.trace.final_grad_norm(),
                out.max_residual
            );
        }
        Command::DeltaScaling {
            common,
            eps_values,
            n_values,
            n_sweep_eps,
            draws,
            allow_large,
        } => {
            let mut extra = Vec::new();
            push(&mut extra, "eps_values", eps_values);
            push(&mut extra, "n_values", n_values);
            push(&mut extra, "n_sweep_eps", n_sweep_eps);
            push(&mut extra, "draws", draws);
            if allow_large {
                extra.push(("allow_large", "true".into()));
            }
            let config = resolve(Experiment::DeltaScaling, common, extra)?;
            let out = experiments::run_delta_scaling(&config)?;
            println!("eps log-log slope {:.4} (R² {:.5})", out.eps_fit.slope, out.eps_fit.r_squared);
            if let Some(f) = out.n_fit {
                println!("n linear slope {:.4e} (R² {:.5})", f.slope, f.r_squared);
            }
        }
        Command::GhzLandscape {
            common,
            variant,
            epsilon,
            points,
        } => {
            let mut extra = Vec::new();
            push(&mut extra, "variant", variant);
            push(&mut extra, "ghz_epsilon", epsilon);
            push(&mut extra, "ghz_points", points);
            let config = resolve(Experiment::GhzLandscape, common, extra)?;
            for s in experiments::run_ghz_landscape(&config)? {
                print!("{}: max |analytic - simulated| {:.3e}, argmin θ {:.4}", s.variant, s.max_abs_diff, s.argmin_theta);
                match s.max_abs_delta {
                    Some(d) => println!(", max |ΔC̃| {d:.3e}"),
                    None => println!(),
                }
            }
        }
        Command::TwirlDemo { common, gamma } => {
            let mut extra = Vec::new();
            push(&mut extra, "gamma", gamma);
            let config = resolve(Experiment::TwirlDemo, common, extra)?;
            let r = experiments::run_twirl_demo(&config)?;
            println!(
                "residual before {:.3e} after {:.3e}; Clifford p {:.12} vs group average {:.12}",
                r.residual_before, r.residual_after, r.clifford_p, r.clifford_group_average_p
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiments::exit_code(&e) as u8)
        }
    }
}
