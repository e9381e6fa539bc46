//! Command-line front end. Every command writes plain CSV/JSON artifacts plus
//! a JSON manifest that can be replayed with `mlcouple replay`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    cumulative_power, default_span_grid, ols_line, DataFeatures, LikelihoodConfig, PowerCurve,
    SpanChoice,
};
use crate::mcmc::{pool_summaries, run_chains, summarize, BurnIn, McmcConfig, Truth};
use crate::params::{MLParams, NetworkState};
use crate::region::FeasibleRegion;
use crate::sim::{
    classify_dynamics, simulate_deterministic, simulate_stochastic, ClassifierConfig,
    DynamicsLabel, SimConfig,
};
use crate::smooth::{gcv_select_channels, LocalPolySmoother, LwprConfig};
use crate::trace::VoltageTrace;

#[derive(Debug, Parser)]
#[command(name = "mlcouple", version, about = "Coupled Morris-Lecar simulation and estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the coupled system and classify its dynamics.
    Simulate(SimulateArgs),
    /// Cumulative power of each voltage channel of a trace.
    Power(PowerArgs),
    /// Feasible-region area and membership queries.
    Region(RegionArgs),
    /// MCMC estimation of theta from a voltage trace.
    Estimate(EstimateArgs),
    /// Smooth one channel and report fit diagnostics.
    SmoothCheck(SmoothCheckArgs),
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model parameters as JSON; flags override individual fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iapp: Option<f64>,
    #[arg(long)]
    pub gsyn: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Initial state `v1,v2,w1,w2,s1,s2`.
    #[arg(long, allow_hyphen_values = true)]
    pub ic: Option<String>,
    /// Also write w1,w2,s1,s2.
    #[arg(long)]
    pub gates: bool,
    #[arg(long)]
    pub literal_leak: bool,
    #[arg(long, default_value = "trace.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, conflicts_with = "gcv")]
    pub span: Option<f64>,
    /// Select the span by GCV (default when no span is given).
    #[arg(long)]
    pub gcv: bool,
    /// Comma-separated GCV candidates.
    #[arg(long, value_delimiter = ',')]
    pub spans: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    /// Writes `<prefix>_v1.csv` and `<prefix>_v2.csv`.
    #[arg(long, default_value = "power")]
    pub out_prefix: String,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Boundary CSV `gsyn,Iapp`; the built-in region otherwise.
    #[arg(long)]
    pub boundary: Option<PathBuf>,
    /// Query point `gsyn,Iapp` (repeatable).
    #[arg(long, allow_hyphen_values = true)]
    pub point: Vec<String>,
    #[arg(long)]
    pub area: bool,
    /// Write the boundary to CSV.
    #[arg(long)]
    pub export: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// JSON with optional `likelihood` and `mcmc` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Short-window likelihood defaults.
    #[arg(long)]
    pub fast: bool,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// A count or `auto`.
    #[arg(long)]
    pub burn_in: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub init_iapp: Option<f64>,
    #[arg(long)]
    pub init_gsyn: Option<f64>,
    #[arg(long)]
    pub no_region: bool,
    #[arg(long)]
    pub region: Option<PathBuf>,
    #[arg(long)]
    pub greedy: bool,
    #[arg(long)]
    pub no_jacobian: bool,
    /// Fixed LWPR span for data and model.
    #[arg(long)]
    pub span: Option<f64>,
    /// Known `Iapp,gsyn` for percent errors.
    #[arg(long, value_delimiter = ',')]
    pub truth: Option<Vec<f64>>,
    #[arg(long, default_value = "estimate_out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothCheckArgs {
    /// Trace CSV; without it a random quadratic is smoothed and compared
    /// against its exact derivatives.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub channel: usize,
    #[arg(long)]
    pub span: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub spans: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "smooth.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Record of one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name; replay parses these again.
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub spans: Vec<f64>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<PathBuf>,
    pub report: serde_json::Value,
}

impl RunManifest {
    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&s)?)
    }
}

/// Error plus the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: Error,
}

impl CliError {
    fn with_code(code: i32) -> impl FnOnce(Error) -> Self {
        move |error| Self { code, error }
    }
}

/// 2 config or malformed input, 3 diverged integration, 4 initial guess
/// outside the region, 1 anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonFinite { .. } => 3,
        Error::SimulationFailed(inner) => exit_code(inner),
        Error::InitialOutsideRegion { .. } => 4,
        Error::InvalidParams(_)
        | Error::Malformed(_)
        | Error::LengthMismatch(_)
        | Error::DegenerateTimes
        | Error::DegeneratePolygon(_)
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => 2,
        _ => 1,
    }
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        Self {
            code: exit_code(&error),
            error,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

struct Run {
    command: &'static str,
    config: serde_json::Value,
    seed: Option<u64>,
    spans: Vec<f64>,
    outputs: Vec<PathBuf>,
    report: serde_json::Value,
    manifest: PathBuf,
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn default_manifest(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Parse and run; returns the process exit code. Reports go to `out`,
/// errors to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let argv = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(cli.command, argv, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.error);
            e.code
        }
    }
}

fn execute(command: Command, argv: Vec<String>, out: &mut dyn Write) -> CliResult<()> {
    let started = now_ms();
    let run = match command {
        Command::Simulate(a) => cmd_simulate(a, out)?,
        Command::Power(a) => cmd_power(a, out)?,
        Command::Region(a) => cmd_region(a, out)?,
        Command::Estimate(a) => cmd_estimate(a, out)?,
        Command::SmoothCheck(a) => cmd_smooth_check(a, out)?,
        Command::Replay { manifest } => return cmd_replay(&manifest, out),
    };
    write_manifest(run, argv, started)
}

fn write_manifest(run: Run, argv: Vec<String>, started: u128) -> CliResult<()> {
    let manifest = RunManifest {
        command: run.command.to_string(),
        argv,
        config: run.config,
        seed: run.seed,
        spans: run.spans,
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        outputs: run.outputs,
        report: run.report,
    };
    let mut w = create(&run.manifest)?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(Error::from)?;
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn cmd_replay(path: &Path, out: &mut dyn Write) -> CliResult<()> {
    let manifest = RunManifest::read_file(path)?;
    let args = std::iter::once("mlcouple".to_string()).chain(manifest.argv.iter().cloned());
    let cli = Cli::try_parse_from(args)
        .map_err(|e| Error::Malformed(format!("manifest arguments: {e}")))?;
    if matches!(cli.command, Command::Replay { .. }) {
        return Err(Error::Malformed("a manifest cannot replay another manifest".into()).into());
    }
    execute(cli.command, manifest.argv, out)
}

fn io(e: std::io::Error) -> CliError {
    Error::from(e).into()
}

/// Classify a trace, extending the run if the window holds too few periods.
pub fn label_dynamics(
    params: &MLParams,
    ic: NetworkState,
    sim: &SimConfig,
    seed: u64,
    trace: &VoltageTrace,
) -> Result<DynamicsLabel> {
    let cfg = ClassifierConfig::default();
    match classify_dynamics(trace, &cfg) {
        Err(Error::TooShort(_)) if sim.t_end < 4000.0 => {
            let longer = SimConfig {
                t_end: 4000.0,
                record_gates: false,
                ..*sim
            };
            let trace = if params.delta == 0.0 {
                simulate_deterministic(params, ic, &longer)?
            } else {
                simulate_stochastic(params, ic, &longer, seed)?
            };
            classify_dynamics(&trace, &cfg)
        }
        other => other,
    }
}

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write) -> CliResult<Run> {
    let mut params = match &a.config {
        Some(p) => MLParams::from_json_file(p)?,
        None => MLParams::default(),
    };
    if let Some(v) = a.iapp {
        params.iapp = v;
    }
    if let Some(v) = a.gsyn {
        params.gsyn = v;
    }
    if let Some(v) = a.delta {
        params.delta = v;
    }
    if a.literal_leak {
        params.paper_literal_leak = true;
    }
    params.validate()?;
    let mut sim = SimConfig {
        record_gates: a.gates,
        ..SimConfig::default()
    };
    if let Some(v) = a.t_end {
        sim.t_end = v;
    }
    if let Some(v) = a.dt {
        sim.dt = v;
    }
    if let Some(v) = a.record_every {
        sim.record_every = v;
    }
    let ic = match &a.ic {
        Some(s) => NetworkState::parse_csv(s)?,
        None => NetworkState::default(),
    };
    let trace = if params.delta == 0.0 {
        simulate_deterministic(&params, ic, &sim)?
    } else {
        simulate_stochastic(&params, ic, &sim, a.seed)?
    };
    trace.write_csv(create(&a.out)?)?;
    let label = label_dynamics(&params, ic, &sim, a.seed, &trace);
    let report = match &label {
        Ok(l) => {
            writeln!(
                out,
                "label: {} amplitudes {:.3} {:.3} phase {}",
                l.kind, l.amplitudes[0], l.amplitudes[1], l.phase_relation
            )
            .map_err(io)?;
            to_json(l)
        }
        Err(e) => {
            writeln!(out, "label: undetermined ({e})").map_err(io)?;
            serde_json::Value::Null
        }
    };
    writeln!(out, "wrote {} samples to {}", trace.len(), a.out.display()).map_err(io)?;
    Ok(Run {
        command: "simulate",
        config: serde_json::json!({ "params": params, "sim": sim, "ic": ic.to_array() }),
        seed: (params.delta != 0.0).then_some(a.seed),
        spans: Vec::new(),
        manifest: a.manifest.unwrap_or_else(|| default_manifest(&a.out)),
        outputs: vec![a.out],
        report,
    })
}

fn suffixed(prefix: &str, k: usize) -> PathBuf {
    PathBuf::from(format!("{prefix}_v{}.csv", k + 1))
}

fn cmd_power(a: PowerArgs, out: &mut dyn Write) -> CliResult<Run> {
    let trace = VoltageTrace::read_csv_file(&a.input)?;
    let channels = [trace.v1.as_slice(), trace.v2.as_slice()];
    let (span, gcv) = match a.span {
        Some(s) => (s, None),
        None => {
            let grid = a.spans.clone().unwrap_or_else(default_span_grid);
            let sel = gcv_select_channels(&trace.times, &channels, &grid, a.degree)?;
            (sel.span, Some(sel))
        }
    };
    let smoother = LocalPolySmoother::new(&trace.times, LwprConfig::new(a.degree, span))?;
    let mut outputs = Vec::new();
    let mut fits = Vec::new();
    for (k, ch) in channels.iter().enumerate() {
        let d2 = smoother.second_derivative(ch)?;
        let curve = cumulative_power(&trace.times, &d2, k)?;
        let path = suffixed(&a.out_prefix, k);
        curve.write_csv(create(&path)?)?;
        let fit = ols_line(&curve.times, &curve.power).ok();
        match fit {
            Some(f) => writeln!(
                out,
                "v{}: P(end) = {:.6} slope {:.6} R^2 {:.6}",
                k + 1,
                curve.power.last().copied().unwrap_or(0.0),
                f.slope,
                f.r_squared
            ),
            None => writeln!(out, "v{}: P(end) = 0", k + 1),
        }
        .map_err(io)?;
        fits.push(fit.map(|f| {
            serde_json::json!({
                "channel": k + 1,
                "slope": f.slope,
                "intercept": f.intercept,
                "rmse": f.rmse,
                "r_squared": f.r_squared,
            })
        }));
        outputs.push(path);
    }
    writeln!(out, "span: {span}").map_err(io)?;
    Ok(Run {
        command: "power",
        config: serde_json::json!({
            "input": a.input,
            "degree": a.degree,
            "span": a.span,
            "spans": a.spans,
        }),
        seed: None,
        spans: vec![span],
        manifest: a
            .manifest
            .unwrap_or_else(|| PathBuf::from(format!("{}.manifest.json", a.out_prefix))),
        outputs,
        report: serde_json::json!({ "fits": fits, "gcv": gcv.map(|g| g.scores) }),
    })
}

fn parse_pair(s: &str) -> Result<[f64; 2]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidParams(format!("point {s:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    match v.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::InvalidParams(format!("point {s:?} needs two values"))),
    }
}

fn cmd_region(a: RegionArgs, out: &mut dyn Write) -> CliResult<Run> {
    let region = match &a.boundary {
        Some(p) => FeasibleRegion::read_csv_file(p)?,
        None => FeasibleRegion::builtin(),
    };
    writeln!(
        out,
        "vertices: {} triangles: {}",
        region.boundary().len(),
        region.triangles().len()
    )
    .map_err(io)?;
    if a.area || a.point.is_empty() {
        writeln!(out, "area: {:.4}", region.area()).map_err(io)?;
    }
    let mut verdicts = Vec::new();
    let mut inside = 0;
    for p in &a.point {
        let [g, i] = parse_pair(p)?;
        let c = region.contains(g, i);
        inside += usize::from(c);
        writeln!(out, "{g},{i} {}", if c { "inside" } else { "outside" }).map_err(io)?;
        verdicts.push(serde_json::json!({ "gsyn": g, "iapp": i, "inside": c }));
    }
    if !a.point.is_empty() {
        writeln!(out, "inside: {inside} outside: {}", a.point.len() - inside).map_err(io)?;
    }
    let mut outputs = Vec::new();
    if let Some(path) = &a.export {
        region.write_csv(create(path)?)?;
        outputs.push(path.clone());
    }
    Ok(Run {
        command: "region",
        config: serde_json::json!({ "boundary": a.boundary }),
        seed: None,
        spans: Vec::new(),
        manifest: a
            .manifest
            .unwrap_or_else(|| PathBuf::from("region.manifest.json")),
        outputs,
        report: serde_json::json!({
            "area": region.area(),
            "vertices": region.boundary().len(),
            "points": verdicts,
        }),
    })
}

/// JSON accepted by `estimate --config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub likelihood: Option<LikelihoodConfig>,
    pub mcmc: McmcConfig,
}

/// Recover a simulation grid that reproduces the data's sample times.
fn grid_for(data: &VoltageTrace, base: &SimConfig) -> SimConfig {
    if data.len() < 2 {
        return *base;
    }
    let step = data.times[1] - data.times[0];
    let every = (step / base.dt).round().max(1.0) as usize;
    SimConfig {
        t_end: *data.times.last().unwrap_or(&base.t_end),
        record_every: every,
        ..*base
    }
}

fn parse_burn_in(s: &str) -> Result<BurnIn> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(BurnIn::auto());
    }
    s.parse::<usize>()
        .map(BurnIn::Fixed)
        .map_err(|e| Error::InvalidParams(format!("burn-in {s:?}: {e}")))
}

fn cmd_estimate(a: EstimateArgs, out: &mut dyn Write) -> CliResult<Run> {
    let cfg: EstimateConfig = match &a.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p).map_err(io)?)
            .map_err(|e| CliError::from(Error::from(e)))?,
        None => EstimateConfig::default(),
    };
    let data = VoltageTrace::read_csv_file(&a.data)?;
    let mut likelihood = cfg.likelihood.clone().unwrap_or_else(|| {
        let base = if a.fast {
            LikelihoodConfig::fast()
        } else {
            LikelihoodConfig::default()
        };
        LikelihoodConfig {
            sim: grid_for(&data, &base.sim),
            ..base
        }
    });
    if let Some(s) = a.span {
        likelihood.data_span = SpanChoice::Fixed(s);
        likelihood.model_span = SpanChoice::SameAsData;
    }
    let mut mcmc = cfg.mcmc.clone();
    if let Some(v) = a.iterations {
        mcmc.iterations = v;
        if let BurnIn::Fixed(b) = mcmc.burn_in {
            if v > 0 && b >= v {
                mcmc.burn_in = BurnIn::Fixed(v * 9 / 20);
            } else if v == 0 {
                mcmc.burn_in = BurnIn::Fixed(0);
            }
        }
    }
    if let Some(s) = &a.burn_in {
        mcmc.burn_in = parse_burn_in(s)?;
    }
    if let Some(v) = a.seed {
        mcmc.seed = v;
    }
    if let Some(v) = a.init_iapp {
        mcmc.initial_theta.iapp = v;
    }
    if let Some(v) = a.init_gsyn {
        mcmc.initial_theta.gsyn = v;
    }
    if a.no_region {
        mcmc.use_rejection_region = false;
    }
    if a.greedy {
        mcmc.greedy = true;
    }
    if a.no_jacobian {
        mcmc.jacobian = false;
    }
    mcmc.validate()?;
    let truth = match a.truth.as_deref() {
        None => Truth::default(),
        Some([i, g]) => Truth::drive(*i, *g),
        Some(_) => return Err(Error::InvalidParams("--truth takes Iapp,gsyn".into()).into()),
    };
    let seeds: Vec<u64> = match (&a.seeds, a.chains) {
        (Some(s), _) => s.clone(),
        (None, Some(n)) => (0..n as u64).map(|i| mcmc.seed + i).collect(),
        (None, None) => vec![mcmc.seed],
    };
    if seeds.is_empty() {
        return Err(Error::InvalidParams("no seeds given".into()).into());
    }
    let region = match &a.region {
        Some(p) => FeasibleRegion::read_csv_file(p)?,
        None => FeasibleRegion::builtin(),
    };
    let init = mcmc.initial_theta;
    if mcmc.use_rejection_region && !region.contains(init.gsyn, init.iapp) {
        return Err(Error::InitialOutsideRegion {
            gsyn: init.gsyn,
            iapp: init.iapp,
        }
        .into());
    }
    let features = match DataFeatures::new(&data, likelihood.clone()) {
        Ok(f) => f,
        Err(e @ (Error::InvalidParams(_) | Error::LengthMismatch(_))) => return Err(e.into()),
        Err(e) => return Err(CliError::with_code(5)(e)),
    };
    let chains = run_chains(&features, &mcmc, &region, &seeds)?;
    std::fs::create_dir_all(&a.out_dir).map_err(io)?;
    let mut outputs = Vec::new();
    let mut summaries = Vec::new();
    for (seed, chain) in seeds.iter().zip(&chains) {
        let path = a.out_dir.join(format!("chain_seed{seed}.csv"));
        chain.write_csv(create(&path)?)?;
        outputs.push(path);
        let s = summarize(chain, chain.burn_in_index, &truth)?;
        let i = s.param("Iapp").expect("Iapp summary");
        let g = s.param("gsyn").expect("gsyn summary");
        let pct = |p: Option<f64>| p.map(|v| format!(" ({v:.2}%)")).unwrap_or_default();
        writeln!(
            out,
            "seed {seed}: Iapp {:.3} ± {:.3}{} gsyn {:.4} ± {:.4}{} acceptance {:.3}",
            i.mean,
            i.sd,
            pct(i.percent_error),
            g.mean,
            g.sd,
            pct(g.percent_error),
            s.acceptance_rate
        )
        .map_err(io)?;
        summaries.push(s);
    }
    let pooled = pool_summaries(&summaries);
    if seeds.len() > 1 {
        for p in pooled.iter().take(2) {
            let pct = p
                .percent_error
                .map(|v| format!(" ({v:.2}%)"))
                .unwrap_or_default();
            writeln!(out, "overall {}: {:.4}{}", p.name, p.mean, pct).map_err(io)?;
        }
    }
    let summary_path = a.out_dir.join("summary.json");
    let summary = serde_json::json!({
        "seeds": seeds,
        "chains": summaries,
        "overall": pooled,
        "data_span": features.data_span,
        "model_span": features.model_span,
        "p0": features.p0,
    });
    {
        let mut w = create(&summary_path)?;
        serde_json::to_writer_pretty(&mut w, &summary).map_err(Error::from)?;
        w.flush().map_err(io)?;
    }
    outputs.push(summary_path);
    Ok(Run {
        command: "estimate",
        config: serde_json::json!({ "likelihood": likelihood, "mcmc": mcmc, "data": a.data }),
        seed: Some(seeds[0]),
        spans: vec![features.data_span, features.model_span],
        manifest: a
            .manifest
            .unwrap_or_else(|| a.out_dir.join("manifest.json")),
        outputs,
        report: summary,
    })
}

fn cmd_smooth_check(a: SmoothCheckArgs, out: &mut dyn Write) -> CliResult<Run> {
    let (times, values, exact) = match &a.input {
        Some(p) => {
            let trace = VoltageTrace::read_csv_file(p)?;
            if !(1..=2).contains(&a.channel) {
                return Err(Error::InvalidParams("channel must be 1 or 2".into()).into());
            }
            let v = trace.voltage(a.channel - 1).to_vec();
            (trace.times, v, None)
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let c: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let mut t = 0.0;
            let times: Vec<f64> = (0..200)
                .map(|_| {
                    t += rng.random_range(0.01..0.1);
                    t
                })
                .collect();
            let values = times.iter().map(|&t| c[0] + c[1] * t + c[2] * t * t).collect();
            (times, values, Some(c))
        }
    };
    let (span, scores) = match a.span {
        Some(s) => (s, None),
        None => {
            let grid = a.spans.clone().unwrap_or_else(|| {
                if exact.is_some() {
                    vec![0.05, 0.1, 0.2, 0.4]
                } else {
                    default_span_grid()
                }
            });
            let sel = gcv_select_channels(&times, &[&values], &grid, a.degree)?;
            (sel.span, Some(sel.scores))
        }
    };
    let smoother = LocalPolySmoother::new(&times, LwprConfig::new(a.degree, span))?;
    let s = smoother.smooth(&values)?;
    let gcv = smoother.gcv(&values)?;
    let rss: f64 = values
        .iter()
        .zip(&s.y_hat)
        .map(|(y, f)| (y - f) * (y - f))
        .sum();
    {
        let mut w = csv::Writer::from_writer(create(&a.out)?);
        w.write_record(["t", "y", "y_hat", "dy_hat", "d2y_hat"])
            .map_err(Error::from)?;
        for i in 0..times.len() {
            w.write_record(&[
                times[i].to_string(),
                values[i].to_string(),
                s.y_hat[i].to_string(),
                s.dy_hat[i].to_string(),
                s.d2y_hat[i].to_string(),
            ])
            .map_err(Error::from)?;
        }
        w.flush().map_err(io)?;
    }
    writeln!(out, "span: {span} rss: {rss:.6e} gcv: {gcv:?}").map_err(io)?;
    let mut report = serde_json::json!({ "rss": rss, "gcv": gcv, "scores": scores });
    if let Some(c) = exact {
        let mut worst = [0.0f64; 3];
        for (i, &t) in times.iter().enumerate() {
            let truth = [c[0] + c[1] * t + c[2] * t * t, c[1] + 2.0 * c[2] * t, 2.0 * c[2]];
            let got = [s.y_hat[i], s.dy_hat[i], s.d2y_hat[i]];
            for k in 0..3 {
                worst[k] = worst[k].max((got[k] - truth[k]).abs() / truth[k].abs().max(1.0));
            }
        }
        writeln!(
            out,
            "quadratic {:.4} {:+.4} t {:+.4} t^2: max rel error y {:.2e} dy {:.2e} d2y {:.2e}",
            c[0], c[1], c[2], worst[0], worst[1], worst[2]
        )
        .map_err(io)?;
        report["max_rel_error"] = to_json(&worst);
    }
    Ok(Run {
        command: "smooth-check",
        config: serde_json::json!({
            "input": a.input,
            "channel": a.channel,
            "degree": a.degree,
            "span": a.span,
            "spans": a.spans,
        }),
        seed: a.input.is_none().then_some(a.seed),
        spans: vec![span],
        manifest: a.manifest.unwrap_or_else(|| default_manifest(&a.out)),
        outputs: vec![a.out],
        report,
    })
}

/// Read the two per-channel power files written by `power`.
pub fn read_power_pair(prefix: &str) -> Result<[PowerCurve; 2]> {
    let read = |k: usize| -> Result<PowerCurve> {
        PowerCurve::read_csv(File::open(suffixed(prefix, k))?, k)
    };
    Ok([read(0)?, read(1)?])
}
