use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pmsfwm_cli::commands::{
    cmd_fit, cmd_fringe, cmd_spectra, cmd_sweep, cmd_walkoff, read_fringe_csv, FringeArgs,
    SpectraArgs, SweepArgs,
};
use pmsfwm_cli::config::{parse_value, ConfigSource};
use pmsfwm_cli::{CliError, Result};

/// Spliced polarization-maintaining fiber photon-pair source simulator.
#[derive(Parser, Debug)]
#[command(name = "pmsfwm", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML configuration file; the built-in defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<String>,

    /// Override a config value, e.g. `--set pump.peak_power_w=1.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Remove an optional config key, e.g. `--unset fiber.lv_override_m`. Repeatable.
    #[arg(long, value_name = "KEY", global = true)]
    unset: Vec<String>,

    /// Pump polarization angle in degrees (pump.theta_deg).
    #[arg(long, global = true, allow_negative_numbers = true)]
    theta: Option<f64>,

    /// Effective vector-process length in m (fiber.lv_override_m).
    #[arg(long, global = true)]
    lv_override: Option<f64>,

    /// Monte Carlo seed (run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Treat analyzer angles as half-wave-plate angles and double them.
    #[arg(long, global = true)]
    hwp_angles: bool,

    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    dump_config: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// PFSD components over a detuning grid.
    Spectra {
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        from_thz: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        to_thz: f64,
        #[arg(long, default_value_t = 0.001)]
        step_thz: f64,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Pump H-V group delay along the fiber line.
    Walkoff {
        #[arg(long, default_value_t = 301)]
        samples: usize,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Simulated coincidence fringes.
    Fringe {
        /// Signal analyzer angles in degrees (default: fringe.theta_s_deg).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta_s: Option<Vec<f64>>,
        /// Idler analyzer angles in degrees (default: the fringe range).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta_i: Option<Vec<f64>>,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Fit visibility per signal basis in a fringe CSV (`-` reads stdin).
    Fit {
        input: String,
        /// Subtract the accidental estimate before fitting.
        #[arg(long)]
        subtract_accidentals: bool,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Suppression ratio and signal-band pair number over a parameter range.
    Sweep {
        /// Config path such as `filters.signal_detuning_thz`, or `fiber.total_length_m`.
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        points: usize,
        #[arg(short, long)]
        output: Option<String>,
    },
}

fn config_source(g: &GlobalArgs) -> Result<ConfigSource> {
    let mut src = match &g.config {
        Some(path) => ConfigSource::load(path)?,
        None => ConfigSource::defaults(),
    };
    for key in &g.unset {
        src.unset(key)?;
    }
    src.apply_overrides(&g.overrides)?;
    if let Some(t) = g.theta {
        src.set("pump.theta_deg", toml::Value::Float(t))?;
    }
    if let Some(lv) = g.lv_override {
        src.set("fiber.lv_override_m", toml::Value::Float(lv))?;
    }
    if let Some(seed) = g.seed {
        src.set("run.seed", parse_value(&seed.to_string()))?;
    }
    Ok(src)
}

fn with_output<T>(path: &Option<String>, f: impl FnOnce(&mut dyn Write) -> Result<T>) -> Result<T> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::io(p, e))?;
            let mut w = BufWriter::new(file);
            let value = f(&mut w)?;
            w.flush().map_err(|e| CliError::io(p, e))?;
            Ok(value)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let src = config_source(&cli.global)?;
    if cli.global.dump_config {
        let cfg = src.config()?;
        cfg.validate()?;
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Usage("no command given; see --help".into()));
    };
    match command {
        Command::Spectra {
            from_thz,
            to_thz,
            step_thz,
            output,
        } => {
            let cfg = src.config()?;
            let args = SpectraArgs {
                from_thz,
                to_thz,
                step_thz,
            };
            let ratio = with_output(&output, |w| cmd_spectra(&cfg, &args, w))?;
            eprintln!(
                "suppression ratio at {} THz: {ratio:?}",
                cfg.filters.signal_detuning_thz
            );
        }
        Command::Walkoff { samples, output } => {
            let cfg = src.config()?;
            with_output(&output, |w| cmd_walkoff(&cfg, samples, w))?;
        }
        Command::Fringe {
            theta_s,
            theta_i,
            output,
        } => {
            let cfg = src.config()?;
            let args = FringeArgs {
                theta_s,
                theta_i,
                hwp_angles: cli.global.hwp_angles,
            };
            with_output(&output, |w| cmd_fringe(&cfg, &args, w))?;
        }
        Command::Fit {
            input,
            subtract_accidentals,
            output,
        } => {
            let rows = if input == "-" {
                read_fringe_csv(io::stdin().lock(), "stdin")?
            } else {
                let file = File::open(&input).map_err(|e| CliError::io(&input, e))?;
                read_fringe_csv(file, &input)?
            };
            let (_, text) = with_output(&output, |w| cmd_fit(&rows, subtract_accidentals, w))?;
            eprint!("{text}");
        }
        Command::Sweep {
            param,
            from,
            to,
            points,
            output,
        } => {
            let args = SweepArgs {
                param,
                from,
                to,
                points,
            };
            with_output(&output, |w| cmd_sweep(&src, &args, w))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
