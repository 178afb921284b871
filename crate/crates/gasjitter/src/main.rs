use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gasjitter::format::read_network;
use gasjitter::quantity::{parse, Dimension, Quantity};
use gasjitter::report;
use gasjitter::scenario::{
    run_on_network, run_scenario, Exceedance, JitterSettings, MethodName, RunOptions, Scenario,
    ScenarioFile, SimulationSettings, Stage, StageError, StrengthSource,
};
use gasjitter_core::dispatch::dispatch;
use gasjitter_core::steady::{compute_tree_flows, solve_steady};
use gasjitter_core::units::DEFAULT_SAMPLES;
use gasjitter_core::Network;

#[derive(Parser)]
#[command(
    name = "gasjitter",
    version,
    about = "Stationary gas flow, compressor dispatch and pressure jitter on tree networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMethod {
    Greedy,
    Gp,
    Sp,
}

impl From<CliMethod> for MethodName {
    fn from(m: CliMethod) -> Self {
        match m {
            CliMethod::Greedy => MethodName::Greedy,
            CliMethod::Gp => MethodName::Gp,
            CliMethod::Sp => MethodName::Sp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Strength {
    Network,
    Estimate,
}

#[derive(Args)]
struct Common {
    /// Network file (TOML).
    #[arg(long)]
    network: PathBuf,
    /// Directory for the CSV output.
    #[arg(long, default_value = "gasjitter-out")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Samples per pipe.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
}

#[derive(Args)]
struct JitterArgs {
    /// Reference pressure for D/D0, e.g. "800 psi".
    #[arg(long, default_value = "800 psi")]
    p0: String,
    /// Reference time for D/D0, e.g. "15 min".
    #[arg(long, default_value = "15 min")]
    t0: String,
    /// Noise strength from the nodes' parameters or from the phi0/N estimate.
    #[arg(long, value_enum, default_value = "network")]
    strength: Strength,
    #[arg(long, default_value = "20 kg/s")]
    phi0: String,
    #[arg(long, default_value_t = 70)]
    nodes: usize,
    #[arg(long, default_value = "15 min")]
    tau_eff: String,
}

impl JitterArgs {
    fn settings(&self, exceedance: Vec<Exceedance>) -> JitterSettings {
        JitterSettings {
            p0: Quantity::Text(self.p0.clone()),
            t0: Quantity::Text(self.t0.clone()),
            strength: match self.strength {
                Strength::Network => StrengthSource::Network,
                Strength::Estimate => StrengthSource::Estimate,
            },
            phi0: Quantity::Text(self.phi0.clone()),
            nodes: self.nodes,
            tau_eff: Quantity::Text(self.tau_eff.clone()),
            exceedance,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Node pressures and pipe profiles for fixed compression ratios.
    Steady {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ratios in compressor order; all 1 if omitted.
        #[arg(long, value_delimiter = ',')]
        ratios: Vec<f64>,
    },
    /// Compression ratios, node pressures and total power.
    Dispatch {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "gp")]
        method: CliMethod,
        /// Also write the solver iteration trace.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Zero mode and diffusion coefficient along every pipe.
    Jitter {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "gp")]
        method: CliMethod,
        #[command(flatten)]
        jitter: JitterArgs,
        /// Per-node exceedance probability, e.g. "t=1 h,margin=50 psi". Repeatable.
        #[arg(long)]
        exceedance: Vec<String>,
    },
    /// Monte-Carlo ensemble of the transient model and its variance growth.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "gp")]
        method: CliMethod,
        /// Simulated time; 100 x 15 min if omitted.
        #[arg(long)]
        horizon: Option<String>,
        /// Time step; the CFL limit of the grid if omitted.
        #[arg(long)]
        dt: Option<String>,
        #[arg(long, default_value = "5 km")]
        dx: String,
        #[arg(long, default_value_t = 200)]
        trajectories: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Record every this many steps.
        #[arg(long, default_value_t = 10)]
        stride: usize,
        /// "node:<id>" or "pipe:<id>@<x>". Repeatable; the jitter peak if omitted.
        #[arg(long)]
        probe: Vec<String>,
        /// Fit window "t_min,t_max".
        #[arg(long, value_delimiter = ',', num_args = 2)]
        window: Vec<String>,
    },
    /// Run a scenario file end to end.
    Scenario {
        #[arg(long)]
        scenario: PathBuf,
        /// Output goes to <out-dir>/<scenario name>.
        #[arg(long, default_value = "gasjitter-out")]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Overrides the simulation seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        diagnostics: bool,
        /// Skip the Monte-Carlo stage.
        #[arg(long)]
        no_simulate: bool,
    },
}

fn load(path: &Path) -> Result<Network, StageError> {
    let parsed = read_network(path).map_err(|e| StageError {
        stage: Stage::Load,
        message: format!("{}: {e}", path.display()),
    })?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed.network)
}

fn parse_exceedance(text: &str) -> Result<Exceedance, StageError> {
    let bad = |m: String| StageError {
        stage: Stage::Load,
        message: m,
    };
    let (mut t, mut margin) = (None, None);
    for part in text.split(',') {
        match part.split_once('=') {
            Some(("t", v)) => t = Some(v.trim().to_string()),
            Some(("margin", v)) => margin = Some(v.trim().to_string()),
            _ => return Err(bad(format!("`{text}` is not `t=<time>,margin=<pressure>`"))),
        }
    }
    match (t, margin) {
        (Some(t), Some(m)) => {
            parse(&t, Dimension::Time).map_err(bad)?;
            parse(&m, Dimension::Pressure).map_err(bad)?;
            Ok(Exceedance {
                t: Quantity::Text(t),
                margin: Quantity::Text(m),
            })
        }
        _ => Err(bad(format!("`{text}` needs both t= and margin="))),
    }
}

fn scenario_for(name: &str, method: CliMethod, samples: usize) -> Scenario {
    Scenario {
        name: name.to_string(),
        network: PathBuf::new(),
        method: method.into(),
        compare: Vec::new(),
        samples,
        aggregate: false,
        transforms: Vec::new(),
        jitter: JitterSettings::default(),
        simulation: None,
    }
}

fn write_tables(tables: &[(String, report::Table)], dir: &Path) -> Result<(), StageError> {
    let fail = |path: &Path, e: std::io::Error| StageError {
        stage: Stage::Write,
        message: format!("{}: {e}", path.display()),
    };
    std::fs::create_dir_all(dir).map_err(|e| fail(dir, e))?;
    for (name, table) in tables {
        let path = dir.join(name);
        table.write(&path).map_err(|e| fail(&path, e))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn write_selected(
    report: &gasjitter::scenario::ScenarioReport,
    dir: &Path,
    keep: impl Fn(&str) -> bool,
) -> Result<(), StageError> {
    let tables: Vec<_> = report
        .tables
        .iter()
        .filter(|(n, _)| keep(n))
        .cloned()
        .collect();
    write_tables(&tables, dir)
}

fn run(cli: Cli) -> Result<(), StageError> {
    match cli.command {
        Command::Steady { common, ratios } => {
            let net = load(&common.network)?;
            let ratios = if ratios.is_empty() {
                vec![1.0; net.compressors().len()]
            } else {
                ratios
            };
            if ratios.len() != net.compressors().len() {
                return Err(StageError {
                    stage: Stage::Steady,
                    message: format!(
                        "{} ratios given for {} compressors",
                        ratios.len(),
                        net.compressors().len()
                    ),
                });
            }
            let ss = solve_steady(&net, &ratios).map_err(|e| StageError {
                stage: Stage::Steady,
                message: e.to_string(),
            })?;
            let tables = vec![
                (
                    "steady_nodes.csv".to_string(),
                    report::steady_nodes(&net, &ss),
                ),
                (
                    "steady_profile.csv".to_string(),
                    report::steady_profile(&net, &ss, common.samples),
                ),
            ];
            write_tables(&tables, &common.out_dir)
        }
        Command::Dispatch {
            common,
            method,
            diagnostics,
        } => {
            let net = load(&common.network)?;
            let stage = |stage| {
                move |e: gasjitter_core::Error| StageError {
                    stage,
                    message: e.to_string(),
                }
            };
            let flows = compute_tree_flows(&net).map_err(stage(Stage::Steady))?;
            let res = dispatch(&net, &flows, MethodName::from(method).into())
                .map_err(stage(Stage::Dispatch))?;
            eprintln!(
                "{} dispatch: power {} W",
                res.method,
                report::num(res.power)
            );
            let mut tables = vec![
                (
                    "dispatch_compressors.csv".to_string(),
                    report::dispatch_compressors(&net, &res),
                ),
                (
                    "dispatch_nodes.csv".to_string(),
                    report::steady_nodes(&net, &res.steady),
                ),
                (
                    "dispatch_summary.csv".to_string(),
                    report::dispatch_summary(&res),
                ),
            ];
            if diagnostics {
                tables.push((
                    "dispatch_trace.csv".to_string(),
                    report::dispatch_trace(&res),
                ));
            }
            write_tables(&tables, &common.out_dir)
        }
        Command::Jitter {
            common,
            method,
            jitter,
            exceedance,
        } => {
            let net = load(&common.network)?;
            let mut sc = scenario_for("jitter", method, common.samples);
            let exceedance = exceedance
                .iter()
                .map(|e| parse_exceedance(e))
                .collect::<Result<_, _>>()?;
            sc.jitter = jitter.settings(exceedance);
            let rep = run_on_network(net, Vec::new(), &sc, &RunOptions::default())?;
            print_warnings(&rep.warnings);
            write_selected(&rep, &common.out_dir, |n| {
                n.starts_with("jitter") || n.starts_with("exceedance")
            })
        }
        Command::Simulate {
            common,
            method,
            horizon,
            dt,
            dx,
            trajectories,
            seed,
            stride,
            probe,
            window,
        } => {
            let net = load(&common.network)?;
            let mut sc = scenario_for("simulate", method, common.samples);
            sc.simulation = Some(SimulationSettings {
                horizon: horizon.map(Quantity::Text),
                dt: dt.map(Quantity::Text),
                dx: Quantity::Text(dx),
                trajectories,
                seed,
                stride,
                probes: probe,
                window: match window.as_slice() {
                    [a, b] => Some([Quantity::Text(a.clone()), Quantity::Text(b.clone())]),
                    _ => None,
                },
            });
            let rep = run_on_network(net, Vec::new(), &sc, &RunOptions::default())?;
            print_warnings(&rep.warnings);
            write_selected(&rep, &common.out_dir, |n| {
                n == "trajectories.csv" || n == "variance.csv"
            })
        }
        Command::Scenario {
            scenario,
            out_dir,
            format: _,
            seed,
            diagnostics,
            no_simulate,
        } => {
            let file = ScenarioFile::read(&scenario)?;
            let opts = RunOptions {
                seed,
                diagnostics,
                skip_simulation: no_simulate,
            };
            let rep = run_scenario(&file, &opts)?;
            print_warnings(&rep.warnings);
            let dir = out_dir.join(&rep.name);
            rep.write(&dir)?;
            eprintln!("wrote {} tables to {}", rep.tables.len(), dir.display());
            Ok(())
        }
    }
}

fn print_warnings(ws: &[String]) {
    for w in ws {
        eprintln!("warning: {w}");
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
