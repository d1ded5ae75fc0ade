//! Command-line front end: one JSON config, one subcommand, content-addressed
//! output files.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crone_reset::crone::CroneDesignSpec;
use crone_reset::design::{design_pipeline, CroneResetDesign, DesignReport, PipelineOptions};
use crone_reset::df::gdf_star;
use crone_reset::error::Error;
use crone_reset::export;
use crone_reset::lti::{ComplexResponse, FrequencyGrid, Zpk};
use crone_reset::plant::Plant;
use crone_reset::reset::{convex_combine, ResetStrategy};
use crone_reset::sim::sensitivity::{estimate_sensitivity, SweepSpec};
use crone_reset::sim::{simulate, Metrics, SimulationConfig};
use crone_reset::stability::{build_closed_loop, certify, default_spr_grid, ClosedLoop, SearchOptions, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_UNCERTIFIED: i32 = 4;
pub const EXIT_DIVERGENCE: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "crone-reset", version, about = "CRONE reset controller design and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the three-step design and write its report.
    Design(CommonArgs),
    /// Plant, linear open loop and describing-function open loop.
    Bode(CommonArgs),
    /// Describing function of the designed controller.
    Df(CommonArgs),
    /// Flow test and H_β certificate of the closed loop.
    Stability(CommonArgs),
    /// Time-domain run of the `simulation` section.
    Simulate(CommonArgs),
    /// Metrics over the (γ, p) grid of the `sweep` section.
    Sweep(CommonArgs),
    /// Stepped-sine estimate of S and T.
    Sensitivity(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created when missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Frequency grid density, points per decade.
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    /// Refuse to simulate, and fail, without a stability certificate.
    #[arg(long)]
    pub strict: bool,
    /// Worker threads for sweeps; defaults to all cores.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Design(_) => "design",
            Command::Bode(_) => "bode",
            Command::Df(_) => "df",
            Command::Stability(_) => "stability",
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
            Command::Sensitivity(_) => "sensitivity",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Design(a)
            | Command::Bode(a)
            | Command::Df(a)
            | Command::Stability(a)
            | Command::Simulate(a)
            | Command::Sweep(a)
            | Command::Sensitivity(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyBand {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Default for FrequencyBand {
    fn default() -> Self {
        Self { lo_hz: 0.1, hi_hz: 1e4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub gamma: Vec<f64>,
    pub p: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        let v = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        Self { gamma: v.clone(), p: v }
    }
}

fn default_prune() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub plant: Plant,
    pub design: CroneDesignSpec,
    pub strategy: ResetStrategy,
    #[serde(default)]
    pub pipeline: PipelineOptions,
    /// Drop reset copies whose weight is zero.
    #[serde(default = "default_prune")]
    pub prune: bool,
    #[serde(default)]
    pub frequency: FrequencyBand,
    #[serde(default)]
    pub search: SearchOptions,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
    #[serde(default)]
    pub sensitivity: Option<SweepSpec>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Infeasible(String),
    Uncertified,
    Divergence(f64),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Uncertified => EXIT_UNCERTIFIED,
            CliError::Divergence(_) => EXIT_DIVERGENCE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Infeasible(m) => write!(f, "design infeasible: {m}"),
            CliError::Uncertified => write!(f, "no stability certificate found (--strict)"),
            CliError::Divergence(t) => write!(f, "simulation diverged at t = {t} s"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Profile(_) | Error::Serialization(_) => CliError::Config(e.to_string()),
            Error::Infeasible { .. } | Error::NonInvertiblePlant(_) | Error::Normalization(_) => {
                CliError::Infeasible(e.to_string())
            }
            Error::Divergence { time } => CliError::Divergence(time),
            other => CliError::Failure(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Failure(format!("{}: {e}", path.display()))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks every section, whether or not the subcommand uses it.
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: Error| CliError::Config(e.to_string());
        self.plant.validate().map_err(cfg)?;
        self.design.validate().map_err(cfg)?;
        self.strategy.validate().map_err(cfg)?;
        let FrequencyBand { lo_hz, hi_hz } = self.frequency;
        if !(lo_hz > 0.0 && hi_hz > lo_hz && hi_hz.is_finite()) {
            return Err(CliError::Config(format!("frequency band needs 0 < lo_hz < hi_hz, got {lo_hz}, {hi_hz}")));
        }
        if self.pipeline.phase_check_deg.is_nan() || self.pipeline.phase_check_deg <= 0.0 {
            return Err(CliError::Config("pipeline.phase_check_deg must be positive".into()));
        }
        let s = &self.search;
        if !(s.beta_max > 0.0 && s.beta_points >= 2 && s.p_min > 0.0 && s.p_max > s.p_min && s.p_points >= 1) {
            return Err(CliError::Config("search needs beta_max > 0, beta_points ≥ 2, 0 < p_min < p_max, p_points ≥ 1".into()));
        }
        if let Some(sim) = &self.simulation {
            sim.validate().map_err(cfg)?;
        }
        if let Some(sweep) = &self.sweep {
            if sweep.gamma.is_empty() || sweep.p.is_empty() {
                return Err(CliError::Config("sweep needs at least one gamma and one p".into()));
            }
            for &g in &sweep.gamma {
                for &p in &sweep.p {
                    ResetStrategy { gamma: g, p, ..self.strategy }.validate().map_err(cfg)?;
                }
            }
        }
        if let Some(sens) = &self.sensitivity {
            sens.validate().map_err(cfg)?;
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form plus the
    /// grid density.
    pub fn hash(&self, grid: usize) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        h.update(format!("\ngrid={grid}").as_bytes());
        hex::encode(h.finalize())[..16].to_string()
    }
}

/// Files written by a run.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
}

struct Run<'a> {
    cfg: Config,
    args: &'a CommonArgs,
    stem: String,
    outputs: Outputs,
}

impl Run<'_> {
    fn path(&self, suffix: &str, ext: &str) -> PathBuf {
        self.args.out.join(format!("{}{suffix}.{ext}", self.stem))
    }

    fn create(&mut self, suffix: &str, ext: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.path(suffix, ext);
        let f = File::create(&path).map_err(|e| io_err(&path, e))?;
        self.outputs.files.push(path);
        Ok(BufWriter::new(f))
    }

    fn write_json<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<(), CliError> {
        let w = self.create(suffix, "json")?;
        serde_json::to_writer_pretty(w, value).map_err(|e| CliError::Failure(e.to_string()))
    }

    fn grid(&self) -> Result<FrequencyGrid, CliError> {
        let FrequencyBand { lo_hz, hi_hz } = self.cfg.frequency;
        Ok(FrequencyGrid::logspace_hz(lo_hz, hi_hz, self.args.grid)?)
    }

    fn plant_zpk(&self) -> Result<Zpk, CliError> {
        Ok(self.cfg.plant.zpk()?)
    }

    /// Runs the pipeline; an infeasible design still leaves its report behind.
    fn design_with(&mut self, strategy: ResetStrategy, write: bool) -> Result<CroneResetDesign, CliError> {
        let plant = self.plant_zpk()?;
        match design_pipeline(&self.cfg.design, &plant, strategy, &self.cfg.pipeline) {
            Ok(d) => {
                if write {
                    self.write_json("", &d.report())?;
                }
                Ok(d)
            }
            Err(e) => {
                let err = CliError::from(e.clone());
                if matches!(err, CliError::Infeasible(_)) {
                    let report = DesignReport::infeasible(&self.cfg.design, strategy, &e);
                    self.write_json("", &report)?;
                }
                Err(err)
            }
        }
    }

    fn design(&mut self, write: bool) -> Result<CroneResetDesign, CliError> {
        self.design_with(self.cfg.strategy, write)
    }

    fn closed_loop(&self, design: &CroneResetDesign) -> Result<ClosedLoop, CliError> {
        let hybrid = convex_combine(&design.model, self.cfg.prune)?;
        Ok(build_closed_loop(&hybrid, &self.cfg.plant.realize()?)?)
    }

    fn gate(&mut self, cl: &ClosedLoop) -> Result<(), CliError> {
        let report = certify(cl, &default_spr_grid(), &self.cfg.search)?;
        if report.verdict == Verdict::Certified {
            return Ok(());
        }
        if self.args.strict {
            return Err(CliError::Uncertified);
        }
        eprintln!("warning: no stability certificate found, simulating anyway");
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.args.workers {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::Failure(e.to_string()))
    }

    fn cmd_design(&mut self) -> Result<(), CliError> {
        let d = self.design(true)?;
        self.write_json("-model", &d.model)
    }

    fn cmd_bode(&mut self) -> Result<(), CliError> {
        let d = self.design(false)?;
        let plant = self.plant_zpk()?;
        let grid = self.grid()?;
        let p = response_on(&grid, |w| plant.response_at(w))?;
        let lin = response_on(&grid, |w| d.linear.open_loop_approx(&plant, w))?;
        let df = response_on(&grid, |w| d.open_loop_df(&plant, w))?;
        for (suffix, r) in [("-plant", &p), ("-linear", &lin), ("-df", &df)] {
            let w = self.create(suffix, "csv")?;
            export::write_bode(r, w)?;
        }
        Ok(())
    }

    fn cmd_df(&mut self) -> Result<(), CliError> {
        let d = self.design(false)?;
        let df = gdf_star(&d.model, &self.grid()?)?;
        let w = self.create("", "csv")?;
        export::write_df(&df, w)?;
        Ok(())
    }

    fn cmd_stability(&mut self) -> Result<(), CliError> {
        let d = self.design(false)?;
        let cl = self.closed_loop(&d)?;
        let report = certify(&cl, &default_spr_grid(), &self.cfg.search)?;
        self.write_json("", &report)?;
        if report.verdict == Verdict::Uncertified {
            if self.args.strict {
                return Err(CliError::Uncertified);
            }
            eprintln!("warning: no stability certificate found");
        }
        Ok(())
    }

    fn simulation(&self) -> Result<SimulationConfig, CliError> {
        self.cfg
            .simulation
            .clone()
            .ok_or_else(|| CliError::Config(format!("`{}` needs a simulation section", self.stem_command())))
    }

    fn stem_command(&self) -> &str {
        self.stem.split('-').next().unwrap_or("")
    }

    fn cmd_simulate(&mut self) -> Result<(), CliError> {
        let sim = self.simulation()?;
        let d = self.design(false)?;
        let cl = self.closed_loop(&d)?;
        self.gate(&cl)?;
        let trace = simulate(&cl, &sim)?;
        let w = self.create("", "csv")?;
        export::write_trace(&trace, w)?;
        self.write_json("-metrics", &trace.metrics)
    }

    fn cmd_sweep(&mut self) -> Result<(), CliError> {
        let sim = self.simulation()?;
        let grid = self.cfg.sweep.clone().unwrap_or_default();
        let strategies: Vec<ResetStrategy> = grid
            .gamma
            .iter()
            .flat_map(|&gamma| grid.p.iter().map(move |&p| (gamma, p)))
            .map(|(gamma, p)| ResetStrategy { gamma, p, ..self.cfg.strategy })
            .collect();
        let plant = self.plant_zpk()?;
        let realized = self.cfg.plant.realize()?;
        let (cfg, prune) = (&self.cfg, self.cfg.prune);
        let rows: Vec<SweepRow> = self.pool()?.install(|| {
            strategies
                .par_iter()
                .map(|&s| sweep_point(cfg, &plant, &realized, s, &sim, prune))
                .collect()
        });
        let mut w = csv::Writer::from_writer(self.create("", "csv")?);
        w.write_record(["gamma", "p", "status", "nu_star", "hurwitz", "rms_error", "avg_power", "peak", "settling_time", "events"])
            .map_err(csv_err)?;
        for r in rows {
            w.write_record(r.record()).map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::Failure(e.to_string()))
    }

    fn cmd_sensitivity(&mut self) -> Result<(), CliError> {
        let spec = self
            .cfg
            .sensitivity
            .clone()
            .ok_or_else(|| CliError::Config("`sensitivity` needs a sensitivity section".into()))?;
        let d = self.design(false)?;
        let cl = self.closed_loop(&d)?;
        let est = self.pool()?.install(|| estimate_sensitivity(&cl, &spec))?;
        let unsettled = est.points.iter().filter(|p| !p.settled).count();
        if unsettled > 0 {
            eprintln!("warning: {unsettled} frequencies did not settle and were left out");
        }
        let w = self.create("", "csv")?;
        export::write_sensitivity(&est, w)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Failure(e.to_string())
}

fn response_on(
    grid: &FrequencyGrid,
    f: impl Fn(f64) -> crone_reset::error::Result<Complex64>,
) -> Result<ComplexResponse, CliError> {
    let values = grid.omegas().iter().map(|&w| f(w)).collect::<crone_reset::error::Result<Vec<_>>>()?;
    Ok(ComplexResponse::new(grid.clone(), values)?)
}

struct SweepRow {
    strategy: ResetStrategy,
    status: &'static str,
    nu_star: Option<f64>,
    hurwitz: Option<bool>,
    metrics: Option<Metrics>,
}

impl SweepRow {
    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let m = self.metrics;
        vec![
            self.strategy.gamma.to_string(),
            self.strategy.p.to_string(),
            self.status.to_string(),
            opt(self.nu_star),
            self.hurwitz.map(|h| h.to_string()).unwrap_or_default(),
            opt(m.map(|m| m.rms_error)),
            opt(m.map(|m| m.avg_power)),
            opt(m.map(|m| m.peak)),
            opt(m.and_then(|m| m.settling_time)),
            m.map(|m| m.events.to_string()).unwrap_or_default(),
        ]
    }
}

fn sweep_point(
    cfg: &Config,
    plant: &Zpk,
    realized: &crone_reset::lti::StateSpaceModel,
    strategy: ResetStrategy,
    sim: &SimulationConfig,
    prune: bool,
) -> SweepRow {
    let mut row = SweepRow {
        strategy,
        status: "ok",
        nu_star: None,
        hurwitz: None,
        metrics: None,
    };
    let design = match design_pipeline(&cfg.design, plant, strategy, &cfg.pipeline) {
        Ok(d) => d,
        Err(Error::Infeasible { nu, .. }) => {
            row.status = "infeasible";
            row.nu_star = Some(nu);
            return row;
        }
        Err(_) => {
            row.status = "error";
            return row;
        }
    };
    row.nu_star = Some(design.nu_star());
    let cl = match convex_combine(&design.model, prune).and_then(|h| build_closed_loop(&h, realized)) {
        Ok(cl) => cl,
        Err(_) => {
            row.status = "error";
            return row;
        }
    };
    row.hurwitz = Some(cl.is_hurwitz());
    match simulate(&cl, sim) {
        Ok(trace) => row.metrics = Some(trace.metrics),
        Err(Error::Divergence { .. }) => row.status = "diverged",
        Err(_) => row.status = "error",
    }
    row
}

/// Parses, validates and runs one command. The files written are returned
/// even when the command fails part way.
pub fn run(command: &Command) -> (Outputs, Result<(), CliError>) {
    let args = command.args();
    let setup = || -> Result<Config, CliError> {
        let cfg = Config::load(&args.config)?;
        cfg.validate()?;
        if args.grid == 0 {
            return Err(CliError::Config("--grid must be positive".into()));
        }
        if args.workers == Some(0) {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
        Ok(cfg)
    };
    let cfg = match setup() {
        Ok(cfg) => cfg,
        Err(e) => return (Outputs::default(), Err(e)),
    };
    for w in cfg.design.ordering_warnings() {
        eprintln!("warning: {w}");
    }
    let stem = format!("{}-{}", command.name(), cfg.hash(args.grid));
    let mut run = Run {
        cfg,
        args,
        stem,
        outputs: Outputs::default(),
    };
    let result = match command {
        Command::Design(_) => run.cmd_design(),
        Command::Bode(_) => run.cmd_bode(),
        Command::Df(_) => run.cmd_df(),
        Command::Stability(_) => run.cmd_stability(),
        Command::Simulate(_) => run.cmd_simulate(),
        Command::Sweep(_) => run.cmd_sweep(),
        Command::Sensitivity(_) => run.cmd_sensitivity(),
    };
    (run.outputs, result)
}

/// Entry point shared by the binary: prints the written files and maps the
/// outcome to an exit code.
pub fn main_with(cli: Cli) -> i32 {
    let (outputs, result) = run(&cli.command);
    for f in outputs.files {
        println!("{}", f.display());
    }
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
