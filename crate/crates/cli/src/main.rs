use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use flowshadow::estimate::{estimate_single_flow, DEFAULT_MAGNITUDE_FLOOR};
use flowshadow::eval::{
    evaluate_grid, reference_grid, summarize, sweep_occlusion, trial_seed, EvalConfig, SweepConfig,
};
use flowshadow::geometry::{DEFAULT_DIAMETER_MM, DEFAULT_SPACING_MM};
use flowshadow::signal::DEFAULT_WINDOW;
use flowshadow::{
    io as fio, method1, method2, process_window, simulate_trial, ArrayLayout, Calibration, Error,
    EstimateReport, LayoutPreset, Method1Options, Method2Options, NoiseModel, ResponseModel,
    Scenario, WhiskerId,
};

#[derive(Parser)]
#[command(
    name = "flowshadow",
    version,
    about = "Simulate whisker-array flow sensing and estimate two flow headings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trial of a scenario and write its sample log.
    Simulate {
        scenario: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Trial index; each index draws from its own derived seed.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Calibrate, filter and summarize a sample log per whisker.
    Process {
        log: PathBuf,
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        /// Require a reading for every whisker of this layout.
        #[command(flatten)]
        layout: LayoutArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Estimate flow headings from processed readings.
    Estimate {
        processed: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Known heading of flow 1 in degrees; required by method 1.
        #[arg(long, allow_hyphen_values = true)]
        phi1: Option<f64>,
        /// Method 2 refinement passes.
        #[arg(long, default_value_t = 1)]
        refine: usize,
        #[command(flatten)]
        layout: LayoutArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo RMSE of both methods over a grid of flow pairs.
    Evaluate {
        /// Grid CSV (phi1_deg,alpha_deg,v1_mps,v2_mps) or `builtin` for the built-in 24-point grid.
        grid: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum)]
        noise: Option<NoiseLevel>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 1)]
        refine: usize,
        #[command(flatten)]
        layout: LayoutArgs,
        /// Summary CSV; stdout if omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Per-trial CSV for plotting.
        #[arg(long)]
        detail: Option<PathBuf>,
    },
    /// Sweep a single flow across a whisker pair and fit magnitude ratio against occlusion.
    SweepOcclusion {
        #[arg(long, default_value_t = DEFAULT_SPACING_MM)]
        spacing: f64,
        #[arg(long, default_value_t = DEFAULT_DIAMETER_MM)]
        diameter: f64,
        /// `start:stop:step` or a comma-separated list, in degrees.
        #[arg(long, default_value = "-30:30:5", allow_hyphen_values = true)]
        headings: String,
        #[arg(long, default_value_t = 5.5)]
        speed: f64,
        #[arg(long, value_enum, default_value_t = NoiseLevel::None)]
        noise: NoiseLevel,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Single,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseLevel {
    None,
    Default,
}

impl NoiseLevel {
    fn model(self) -> NoiseModel {
        match self {
            NoiseLevel::None => NoiseModel::none(),
            NoiseLevel::Default => NoiseModel::default(),
        }
    }
}

#[derive(Args)]
struct LayoutArgs {
    /// Layout preset: grid2x2, pair or single.
    #[arg(long)]
    layout: Option<LayoutPreset>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    diameter: Option<f64>,
    /// Take layout, response model and noise from a scenario file.
    #[arg(long, conflicts_with = "layout")]
    scenario: Option<PathBuf>,
}

impl LayoutArgs {
    fn scenario(&self) -> Result<Option<Scenario>, Error> {
        self.scenario.as_deref().map(load_scenario).transpose()
    }

    /// Layout from the flags, falling back to the scenario, then `fallback`.
    fn resolve(
        &self,
        scenario: Option<&Scenario>,
        fallback: Option<LayoutPreset>,
    ) -> Result<Option<ArrayLayout>, Error> {
        let spacing = self.spacing.unwrap_or(DEFAULT_SPACING_MM);
        let diameter = self.diameter.unwrap_or(DEFAULT_DIAMETER_MM);
        if let Some(s) = scenario {
            if self.spacing.is_some() || self.diameter.is_some() {
                return Err(Error::Config(
                    "--spacing/--diameter cannot be combined with --scenario".into(),
                ));
            }
            return s.layout.build().map(Some);
        }
        match self.layout.or(fallback) {
            Some(p) => p.build(spacing, diameter).map(Some),
            None if self.spacing.is_some() || self.diameter.is_some() => {
                Err(Error::Config("--spacing/--diameter need --layout".into()))
            }
            None => Ok(None),
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Scenario::parse(&text)
}

fn open(path: &Path) -> Result<BufReader<File>, Error> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn warn_layout(layout: &ArrayLayout) {
    for w in layout.warnings() {
        eprintln!("warning: {w}");
    }
}

fn parse_headings(text: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::Config(format!("--headings: cannot parse '{text}'"));
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let (start, stop, step) = (v[0], v[1], v[2]);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(Error::Config(
                "--headings: need start <= stop and a positive step".into(),
            ));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|k| start + k as f64 * step).collect());
    }
    text.split(',')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect()
}

fn print_report(method: &str, r: &EstimateReport) {
    match r.phi1_hat {
        Some(p1) => eprintln!(
            "method {method}: phi1 = {p1:.2} deg, phi2 = {:.2} deg",
            r.phi2_hat
        ),
        None => eprintln!("method {method}: phi2 = {:.2} deg", r.phi2_hat),
    }
    if r.single_flow {
        eprintln!("note: readings look like a single uniform flow");
    }
    if r.low_confidence {
        eprintln!("note: residual is weak; the flow 2 heading is low confidence");
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Simulate {
            scenario,
            out,
            seed,
            trial,
        } => {
            let sc = load_scenario(&scenario)?;
            let layout = sc.layout.build()?;
            warn_layout(&layout);
            let base = seed.unwrap_or(sc.noise.seed);
            let noise = sc.noise.with_seed(trial_seed(base, 0, trial));
            let samples = simulate_trial(
                &layout,
                &sc.flows,
                &sc.response,
                &noise,
                sc.n_samples,
                sc.rate_hz,
            )?;
            fio::write_sample_log(sink(out.as_deref())?, &samples)
        }
        Command::Process {
            log,
            calibration,
            window,
            layout,
            out,
        } => {
            let samples = fio::read_sample_log(open(&log)?)?;
            let cal = match calibration {
                Some(p) => fio::read_calibration(open(&p)?)?,
                None => Calibration::identity(),
            };
            let scenario = layout.scenario()?;
            let expected: Vec<WhiskerId> = match layout.resolve(scenario.as_ref(), None)? {
                Some(l) => l.ids().collect(),
                None => {
                    let mut ids: Vec<WhiskerId> = samples.iter().map(|s| s.whisker_id).collect();
                    ids.sort();
                    ids.dedup();
                    ids
                }
            };
            if expected.is_empty() {
                return Err(Error::MissingData(Vec::new()));
            }
            let readings = process_window(&samples, &expected, &cal, window)?;
            fio::write_processed(sink(out.as_deref())?, &readings)
        }
        Command::Estimate {
            processed,
            method,
            phi1,
            refine,
            layout,
            out,
        } => {
            if method == Method::One && phi1.is_none() {
                Cli::command()
                    .error(
                        ErrorKind::MissingRequiredArgument,
                        "--phi1 <DEG> is required with --method 1",
                    )
                    .exit();
            }
            let readings = fio::read_processed(open(&processed)?)?;
            let scenario = layout.scenario()?;
            let response = scenario
                .as_ref()
                .map_or_else(ResponseModel::default, |s| s.response);
            let lay = layout
                .resolve(scenario.as_ref(), Some(LayoutPreset::Grid2x2))?
                .expect("fallback preset always resolves");
            let (name, report) = match method {
                Method::One => (
                    "1",
                    method1(
                        &readings,
                        &lay,
                        phi1.unwrap_or_default(),
                        &response,
                        &Method1Options::default(),
                    )?,
                ),
                Method::Two => (
                    "2",
                    method2(
                        &readings,
                        &lay,
                        &response,
                        &Method2Options {
                            refine_iters: refine,
                        },
                    )?,
                ),
                Method::Single => {
                    let heading = estimate_single_flow(&readings, DEFAULT_MAGNITUDE_FLOOR)?;
                    let report = EstimateReport {
                        phi1_hat: Some(heading),
                        phi2_hat: heading,
                        per_whisker_residuals: Vec::new(),
                        iterations: 0,
                        low_confidence: false,
                        single_flow: true,
                    };
                    ("single", report)
                }
            };
            print_report(name, &report);
            fio::write_report(sink(out.as_deref())?, name, &report)
        }
        Command::Evaluate {
            grid,
            seed,
            trials,
            noise,
            samples,
            refine,
            layout,
            out,
            detail,
        } => {
            let points = if grid == "builtin" {
                reference_grid()
            } else {
                fio::read_grid(open(Path::new(&grid))?)?
            };
            if points.is_empty() {
                return Err(Error::Config(format!("grid '{grid}' has no points")));
            }
            let scenario = layout.scenario()?;
            let mut cfg = EvalConfig::default();
            if let Some(s) = &scenario {
                cfg.response = s.response;
                cfg.noise = s.noise;
                cfg.n_samples = s.n_samples;
                cfg.rate_hz = s.rate_hz;
                cfg.trials = s.trials;
            }
            if let Some(l) = layout.resolve(scenario.as_ref(), None)? {
                cfg.layout = l;
            }
            warn_layout(&cfg.layout);
            if let Some(n) = noise {
                cfg.noise = n.model().with_seed(cfg.noise.seed);
            }
            if let Some(s) = seed {
                cfg.noise.seed = s;
            }
            cfg.trials = trials.unwrap_or(cfg.trials);
            cfg.n_samples = samples.unwrap_or(cfg.n_samples);
            cfg.method2.refine_iters = refine;
            if cfg.trials == 0 {
                return Err(Error::Config("--trials must be at least 1".into()));
            }
            let records = evaluate_grid(&points, &cfg)?;
            if let Some(p) = detail {
                fio::write_detail(sink(Some(&p))?, &records)?;
            }
            fio::write_summary(sink(out.as_deref())?, &summarize(&records)?)
        }
        Command::SweepOcclusion {
            spacing,
            diameter,
            headings,
            speed,
            noise,
            seed,
            trials,
            out,
        } => {
            let cfg = SweepConfig {
                spacing_mm: spacing,
                diameter_mm: diameter,
                headings_deg: parse_headings(&headings)?,
                speed_mps: speed,
                noise: noise.model().with_seed(seed),
                trials,
                ..SweepConfig::default()
            };
            warn_layout(&ArrayLayout::pair(spacing, diameter)?);
            let res = sweep_occlusion(&cfg)?;
            eprintln!("fit: ratio = {} * occ% + {}", res.slope, res.intercept);
            fio::write_sweep(sink(out.as_deref())?, &res.rows)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 3 } else { 2 })
        }
    }
}
