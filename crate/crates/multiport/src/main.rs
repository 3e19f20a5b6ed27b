//! Command-line surface: simulate devices, fit parameters from measurement
//! files, sweep couplings, synthesize test data, and build comparison
//! reports.
//!
//! Exit codes: 0 success, 1 computational failure, 2 usage or schema error.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use multiport::characterize::{add_intensity_noise, predict_intensities};
use multiport::devices::{fourport_closed_form, tritter_unitary, FourPortParams, TritterCoupling};
use multiport::hom::synthesize_all_scans;
use multiport::io::{
    magnitudes_csv, run_fit_stage, run_report, sweep_csv, visibility_csv, DeviceKind, FitStage,
    MeasurementFile, ReportBundle, SCHEMA_VERSION,
};
use multiport::linop::TransferMatrix;
use multiport::two_photon::{visibility_matrix, visibility_sweep, PortPair, VisibilityMatrix};
use multiport::{Error, Result};

#[derive(Parser)]
#[command(
    name = "multiport",
    version,
    about = "Simulate and characterize 3- and 4-port linear-optical multiports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a device's transfer matrix, splitting ratios, and visibilities
    Simulate {
        #[command(subcommand)]
        device: DeviceArgs,
    },
    /// Fit device parameters from a measurement file
    Fit {
        /// Path to a measurement JSON file
        #[arg(long)]
        input: PathBuf,
        /// Which fit to run
        #[arg(long, value_enum)]
        stage: StageArg,
        /// Input pair whose visibilities constrain the 4-port phase
        #[arg(long, default_value = "2,3", value_parser = parse_port_pair)]
        input_pair: PortPair,
        /// Output path for the report JSON
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
    /// Tritter visibilities versus effective coupling
    Sweep {
        /// Outer-to-adjacent coupling ratio held fixed along the sweep
        #[arg(long)]
        ratio: f64,
        /// Largest adjacent coupling on the grid
        #[arg(long)]
        g_max: f64,
        /// Number of grid points (endpoints included)
        #[arg(long)]
        points: usize,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
    /// Synthesize a measurement file from a known device
    Synth {
        #[command(subcommand)]
        device: DeviceArgs,
    },
    /// Full chain: fit parameters, predict visibilities, compare with dips
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Input pair whose visibilities constrain the 4-port phase
        #[arg(long, default_value = "2,3", value_parser = parse_port_pair)]
        input_pair: PortPair,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum DeviceArgs {
    /// Three-waveguide single-coupling-region device
    Tritter {
        /// Effective coupling of the adjacent pairs (1,2) and (2,3)
        #[arg(long = "g-bar")]
        g_bar: f64,
        /// Effective coupling of the outer pair (1,3)
        #[arg(long = "G-bar")]
        g_bar_outer: f64,
        /// Common propagation phase (global phase only)
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Four directional couplers with an inner crossing
    Fourport {
        /// Directional-coupler reflectivity in [0, 1]
        #[arg(long)]
        eta: f64,
        /// Inner-arm phase in radians
        #[arg(long, conflicts_with = "phi_pi")]
        phi: Option<f64>,
        /// Inner-arm phase in multiples of pi
        #[arg(long = "phi-pi")]
        phi_pi: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Output path prefix (simulate) or file (synth)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Both)]
    format: FormatArg,
    /// Base seed for synthesized data
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Photon-pair rate for synthesized dip scans, Hz
    #[arg(long, default_value_t = 20_000.0)]
    pair_rate: f64,
    /// Dip width for synthesized scans, ps
    #[arg(long, default_value_t = 1.5)]
    width_ps: f64,
    /// Half-span of the synthesized delay grid, ps
    #[arg(long, default_value_t = 8.0)]
    delay_span: f64,
    /// Number of delay points per synthesized scan
    #[arg(long, default_value_t = 41)]
    delay_points: usize,
    /// Accumulation time per delay point, s
    #[arg(long, default_value_t = 1.0)]
    accumulation_time: f64,
    /// Relative intensity noise for synthesized intensities
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Both,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum StageArg {
    Tritter,
    FourportEta,
    FourportPhi,
    Dips,
}

impl From<StageArg> for FitStage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Tritter => FitStage::Tritter,
            StageArg::FourportEta => FitStage::FourportEta,
            StageArg::FourportPhi => FitStage::FourportPhi,
            StageArg::Dips => FitStage::Dips,
        }
    }
}

fn parse_port_pair(s: &str) -> std::result::Result<PortPair, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected \"a,b\", got {s:?}"));
    }
    let a: usize = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    PortPair::new(a, b).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests land here with exit code 0; real
            // usage errors carry clap's exit code 2.
            let code = e.exit_code().clamp(0, 2) as u8;
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

struct BuiltDevice {
    kind: DeviceKind,
    u: TransferMatrix,
    parameters: BTreeMap<String, f64>,
    common: CommonArgs,
}

fn build_device(args: DeviceArgs) -> Result<BuiltDevice> {
    match args {
        DeviceArgs::Tritter {
            g_bar,
            g_bar_outer,
            beta,
            common,
        } => {
            let coupling = TritterCoupling::with_beta(g_bar, g_bar_outer, beta)?;
            let mut parameters = BTreeMap::new();
            parameters.insert("g_bar".to_string(), g_bar);
            parameters.insert("g_bar_outer".to_string(), g_bar_outer);
            parameters.insert("beta".to_string(), beta);
            Ok(BuiltDevice {
                kind: DeviceKind::Tritter,
                u: tritter_unitary(&coupling)?,
                parameters,
                common,
            })
        }
        DeviceArgs::Fourport {
            eta,
            phi,
            phi_pi,
            common,
        } => {
            let phi = match (phi, phi_pi) {
                (Some(rad), None) => rad,
                (None, Some(mult)) => mult * PI,
                (None, None) => 0.0,
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            let params = FourPortParams::new(eta, phi)?;
            let mut parameters = BTreeMap::new();
            parameters.insert("eta".to_string(), eta);
            parameters.insert("phi".to_string(), params.phi);
            Ok(BuiltDevice {
                kind: DeviceKind::Fourport,
                u: fourport_closed_form(&params)?,
                parameters,
                common,
            })
        }
    }
}

#[derive(serde::Serialize)]
struct SimulationOutput<'a> {
    schema_version: &'a str,
    device: DeviceKind,
    parameters: &'a BTreeMap<String, f64>,
    transfer_matrix: &'a TransferMatrix,
    magnitudes_squared: Vec<Vec<f64>>,
    visibilities: &'a VisibilityMatrix,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { device } => {
            let built = build_device(device)?;
            let vm = visibility_matrix(&built.u)?;
            let prefix = built
                .common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(built.kind.to_string()));

            let n = built.u.n_modes();
            let mags: Vec<Vec<f64>> = (1..=n)
                .map(|j| {
                    (1..=n)
                        .map(|k| built.u.amplitude(j, k).expect("in range").norm_sqr())
                        .collect()
                })
                .collect();

            if matches!(built.common.format, FormatArg::Json | FormatArg::Both) {
                let out = SimulationOutput {
                    schema_version: SCHEMA_VERSION,
                    device: built.kind,
                    parameters: &built.parameters,
                    transfer_matrix: &built.u,
                    magnitudes_squared: mags,
                    visibilities: &vm,
                };
                let path = prefix.with_extension("json");
                std::fs::write(&path, serde_json::to_string_pretty(&out)?)?;
                println!("wrote {}", path.display());
            }
            if matches!(built.common.format, FormatArg::Csv | FormatArg::Both) {
                let mag_path = with_suffix(&prefix, "_magnitudes.csv");
                std::fs::write(&mag_path, magnitudes_csv(&built.u))?;
                println!("wrote {}", mag_path.display());
                let vis_path = with_suffix(&prefix, "_visibilities.csv");
                std::fs::write(&vis_path, visibility_csv(&vm))?;
                println!("wrote {}", vis_path.display());
            }
            Ok(())
        }
        Command::Fit {
            input,
            stage,
            input_pair,
            out,
        } => {
            let file = MeasurementFile::load(&input)?;
            let bundle = run_fit_stage(&file, stage.into(), input_pair)?;
            finish_report(&bundle, &out)
        }
        Command::Report {
            input,
            input_pair,
            out,
        } => {
            let file = MeasurementFile::load(&input)?;
            let bundle = run_report(&file, input_pair)?;
            finish_report(&bundle, &out)
        }
        Command::Sweep {
            ratio,
            g_max,
            points,
            out,
            format,
        } => {
            let sweep = visibility_sweep(ratio, g_max, points)?;
            if matches!(format, FormatArg::Csv | FormatArg::Both) {
                let path = out.with_extension("csv");
                std::fs::write(&path, sweep_csv(&sweep))?;
                println!("wrote {}", path.display());
            }
            if matches!(format, FormatArg::Json | FormatArg::Both) {
                let path = out.with_extension("json");
                std::fs::write(&path, serde_json::to_string_pretty(&sweep)?)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Synth { device } => {
            let built = build_device(device)?;
            let c = &built.common;
            if c.delay_points < 2 {
                return Err(Error::InvalidParameter {
                    name: "delay_points",
                    reason: format!("need at least 2, got {}", c.delay_points),
                });
            }
            let n = built.u.n_modes();
            let clean = predict_intensities(&built.u, &vec![1.0; n], &vec![1.0; n], 1.0)?;
            let intensities = if c.noise > 0.0 {
                add_intensity_noise(&clean, c.noise, c.seed)
            } else {
                clean
            };
            let delays: Vec<f64> = (0..c.delay_points)
                .map(|i| {
                    -c.delay_span + 2.0 * c.delay_span * i as f64 / (c.delay_points - 1) as f64
                })
                .collect();
            let scans = synthesize_all_scans(
                &built.u,
                c.pair_rate,
                c.width_ps,
                &delays,
                c.accumulation_time,
                c.seed,
            )?;
            let mut metadata = BTreeMap::new();
            metadata.insert("generator".to_string(), "multiport synth".to_string());
            metadata.insert("seed".to_string(), c.seed.to_string());
            for (name, value) in &built.parameters {
                metadata.insert(format!("true_{name}"), format!("{value}"));
            }
            let file = MeasurementFile {
                schema_version: SCHEMA_VERSION.to_string(),
                device: built.kind,
                intensities: Some(intensities),
                scans: Some(scans),
                metadata,
            };
            let path = c
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("measurement.json"));
            file.save(&path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn finish_report(bundle: &ReportBundle, out: &Path) -> Result<()> {
    bundle.save(out)?;
    if let Some(fit) = &bundle.fitted {
        for (name, value) in &fit.parameters {
            println!("{name} = {value:.6}");
        }
        println!(
            "objective = {:.6e}, converged = {}",
            fit.objective_value, fit.converged
        );
        for w in &fit.warnings {
            println!("note: {w}");
        }
    }
    if let Some(measured) = &bundle.measured_visibilities {
        let defined = measured
            .entries
            .iter()
            .filter(|e| e.value.is_some())
            .count();
        println!(
            "measured visibilities: {defined}/{} fitted",
            measured.entries.len()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}
