//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args as ClapArgs, Parser, Subcommand};

use fedmr::config::{load_config_file, parse_set_arg};
use fedmr::io::cache::FieldCache;
use fedmr::io::commands::{run_command, verify, write_failure, write_outputs, Args, CliError};

#[derive(Parser)]
#[command(name = "fedmr", version, about = "Photocurrent-detected magnetic resonance of NV ensembles between graphitic contacts")]
struct Cli {
    /// TOML configuration; unset keys take the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set drive.rf_power="20 dBm"`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Ignore FEDMR_<SECTION>__<KEY> environment overrides.
    #[arg(long, global = true)]
    no_env: bool,
    /// Output directory.
    #[arg(long, short, default_value = "fedmr-out", global = true)]
    out: PathBuf,
    /// Worker threads for sweep points (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapArgs, Default)]
struct DriveOpts {
    /// Optical power (mW).
    #[arg(long)]
    power: Option<f64>,
    /// Electrode held at positive potential.
    #[arg(long, value_parser = ["A", "B"])]
    polarity: Option<String>,
    /// RF frequency (GHz).
    #[arg(long)]
    rf_frequency: Option<f64>,
    /// RF power (dBm).
    #[arg(long)]
    rf_power: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// I-U sweep.
    Iv {
        #[command(flatten)]
        drive: DriveOpts,
        #[arg(long, value_parser = ["on", "off"])]
        rf: Option<String>,
        /// Bias range start:stop:step (V).
        #[arg(long)]
        u_range: Option<String>,
    },
    /// Depletion-region imaging: ΔPL profiles and metrics against bias.
    Dr {
        #[command(flatten)]
        drive: DriveOpts,
        /// Comma-separated biases (V).
        #[arg(long)]
        u_list: Option<String>,
        #[arg(long, value_parser = ["nvminus", "nvzero"])]
        filter: Option<String>,
        /// Also write the full field map of every bias.
        #[arg(long)]
        field_maps: bool,
        /// Directory of cached field solutions used for the field maps.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// RF frequency scan under a field gradient.
    Spectrum {
        #[command(flatten)]
        drive: DriveOpts,
        /// Bias on the positive electrode (V).
        #[arg(long)]
        bias: Option<f64>,
        /// Frequency range start:stop:step (GHz).
        #[arg(long)]
        f_range: Option<String>,
        /// Aligned-family line over electrode A (GHz).
        #[arg(long)]
        line_a: Option<f64>,
        /// Aligned-family line over electrode B (GHz).
        #[arg(long)]
        line_b: Option<f64>,
        /// Keep the configured field instead of the two-line gradient.
        #[arg(long)]
        no_gradient: bool,
    },
    /// PDMR contrast against bias with regime labels.
    Contrast {
        #[command(flatten)]
        drive: DriveOpts,
        #[arg(long, value_parser = ["on", "off"])]
        rf: Option<String>,
        #[arg(long)]
        u_range: Option<String>,
    },
    /// Contrast sweeps for several beam waists at one intensity.
    Beamstudy {
        #[command(flatten)]
        drive: DriveOpts,
        /// Comma-separated waists (um).
        #[arg(long)]
        waists: Option<String>,
        /// Comma-separated optical powers (mW), one per waist.
        #[arg(long)]
        powers: Option<String>,
        #[arg(long)]
        u_range: Option<String>,
    },
    /// Fit barrier height and ideality to measured I-U data.
    Calibrate {
        /// CSV with U (V) and I (A) columns, optionally a field column (V/m).
        #[arg(long)]
        data: PathBuf,
        /// Starting barrier height (V).
        #[arg(long)]
        phi1: Option<f64>,
        /// Starting ideality factor.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Data files for every figure of the campaign.
    FigurePack {
        /// Campaign TOML (default: built-in campaign).
        #[arg(long)]
        campaign: Option<PathBuf>,
    },
    /// Replay a recorded run and compare its files byte for byte.
    Verify {
        /// Directory holding manifest.json.
        dir: PathBuf,
    },
}

fn put<T: ToString>(args: &mut Args, key: &str, v: Option<T>) {
    if let Some(v) = v {
        args.insert(key.to_string(), v.to_string());
    }
}

fn put_drive(args: &mut Args, d: DriveOpts) {
    put(args, "power", d.power);
    put(args, "polarity", d.polarity);
    put(args, "rf_frequency", d.rf_frequency);
    put(args, "rf_power", d.rf_power);
}

fn path_arg(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn command_args(cmd: Command) -> (String, Args, Option<PathBuf>) {
    let mut a = Args::new();
    let mut cache = None;
    let name = match cmd {
        Command::Iv { drive, rf, u_range } => {
            put_drive(&mut a, drive);
            put(&mut a, "rf", rf);
            put(&mut a, "u_range", u_range);
            "iv"
        }
        Command::Dr {
            drive,
            u_list,
            filter,
            field_maps,
            cache: c,
        } => {
            put_drive(&mut a, drive);
            put(&mut a, "u_list", u_list);
            put(&mut a, "filter", filter);
            if field_maps {
                a.insert("field_maps".into(), "true".into());
            }
            cache = c;
            "dr"
        }
        Command::Spectrum {
            drive,
            bias,
            f_range,
            line_a,
            line_b,
            no_gradient,
        } => {
            put_drive(&mut a, drive);
            put(&mut a, "bias", bias);
            put(&mut a, "f_range", f_range);
            put(&mut a, "line_a", line_a);
            put(&mut a, "line_b", line_b);
            if no_gradient {
                a.insert("gradient".into(), "off".into());
            }
            "spectrum"
        }
        Command::Contrast { drive, rf, u_range } => {
            put_drive(&mut a, drive);
            put(&mut a, "rf", rf);
            put(&mut a, "u_range", u_range);
            "contrast"
        }
        Command::Beamstudy {
            drive,
            waists,
            powers,
            u_range,
        } => {
            put_drive(&mut a, drive);
            put(&mut a, "waists", waists);
            put(&mut a, "powers", powers);
            put(&mut a, "u_range", u_range);
            "beamstudy"
        }
        Command::Calibrate { data, phi1, eta } => {
            a.insert("data".into(), path_arg(&data));
            put(&mut a, "phi1", phi1);
            put(&mut a, "eta", eta);
            "calibrate"
        }
        Command::FigurePack { campaign } => {
            put(&mut a, "campaign", campaign.as_deref().map(path_arg));
            "figure-pack"
        }
        Command::Verify { .. } => unreachable!("handled before"),
    };
    (name.to_string(), a, cache)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    if let Command::Verify { dir } = &cli.command {
        for line in verify(dir)? {
            println!("{line}");
        }
        println!("verified {}", dir.display());
        return Ok(());
    }
    let overrides = cli.set.iter().map(|s| parse_set_arg(s)).collect::<Result<Vec<_>, _>>()?;
    let config = load_config_file(cli.config.as_deref(), &overrides, !cli.no_env)?;
    let out_dir = cli.out.clone();
    let (name, args, cache_dir) = command_args(cli.command);
    let cache = cache_dir.as_deref().map(FieldCache::open).transpose()?;
    match run_command(&name, &args, &config, cache.as_ref()) {
        Ok((manifest, out)) => {
            let manifest = write_outputs(&out_dir, manifest, &out)?;
            for line in &out.summary {
                println!("{line}");
            }
            println!("wrote {} files to {} (manifest {})", out.files.len(), out_dir.display(), &manifest.hash()[..12]);
            Ok(())
        }
        Err(e) => {
            if matches!(e, CliError::Solver { .. }) {
                write_failure(&out_dir, &name, &args, &e)?;
                eprintln!("diagnostic written to {}", out_dir.join(fedmr::io::commands::FAILURE_FILE).display());
            }
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fedmr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
