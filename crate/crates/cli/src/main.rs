use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nonlocal_heat_cli::{
    cmd_solve, cmd_sweep, cmd_verify, CliError, Overrides, EXIT_INVALID, OUT_ENV,
};

#[derive(Parser, Debug)]
#[command(
    name = "nonlocal-heat",
    version,
    about = "Fixed-point solver for the nonlocal-in-time semilinear heat equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the weighted time integral and reconstruct the trajectory.
    Solve(Common),
    /// Measure the semigroup estimates and the compactness probe.
    Verify(Common),
    /// Repeat the solve over a list of parameter values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of u0_scale, weight_scale, potential_scale, tau, n.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AcceleratorArg {
    Picard,
    Anderson,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; NONLOCAL_HEAT_OUT takes precedence.
    #[arg(long, default_value = "nonlocal-heat-out")]
    out: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long, value_enum)]
    accelerator: Option<AcceleratorArg>,
    /// Seed for the random probes.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            tol: self.tol,
            max_iter: self.max_iter,
            accelerator: self.accelerator.map(|a| match a {
                AcceleratorArg::Picard => "picard".to_string(),
                AcceleratorArg::Anderson => "anderson".to_string(),
            }),
            seed: self.seed,
        }
    }

    fn out_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.out.clone(),
        }
    }
}

fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--values: not a number: {s:?}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve(c) => {
            let out = c.out_dir();
            let o = cmd_solve(&c.config, &out, &c.overrides())?;
            let r = &o.report;
            println!(
                "{}: {} iterations, residual {:.3e}, R0 {:.6e}, bounds {}; wrote {}",
                r.verdict.as_str(),
                r.iterations,
                r.final_residual(),
                r.r0,
                if r.bounds.all_ok() { "ok" } else { "VIOLATED" },
                out.display()
            );
            Ok(o.exit_code)
        }
        Command::Verify(c) => {
            let out = c.out_dir();
            let o = cmd_verify(&c.config, &out, &c.overrides())?;
            for (name, ok, detail) in o.suite.checks() {
                println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
            }
            println!("wrote {}", out.display());
            Ok(o.exit_code)
        }
        Command::Sweep {
            common,
            param,
            values,
        } => {
            let values = parse_values(&values)?;
            let out = common.out_dir();
            let o = cmd_sweep(&common.config, &out, &common.overrides(), &param, &values)?;
            for r in &o.rows {
                println!(
                    "{param} = {}: R0 {:.4e}, {} iterations, {}",
                    r.value,
                    r.r0,
                    r.iterations,
                    r.verdict.as_str()
                );
            }
            println!("wrote {}", out.display());
            Ok(o.exit_code)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
