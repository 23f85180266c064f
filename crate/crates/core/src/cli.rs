//! Command-line front end. Every subcommand reads a population config and writes a JSON or CSV
//! report to stdout or `--output`.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use crate::continuous::{flow, ContinuousError, FlowOptions, Perturb, DEFAULT_EQ_TOL, DEFAULT_T_END};
use crate::discrete::{
    random_state, rng_from_seed, simulate_with, DiscreteError, DiscreteState, Kernel, DEFAULT_STATE_CAP,
};
use crate::equilibria::{analyze, EquilibriumError, EquilibriumPoint, EquilibriumSet};
use crate::experiments::{
    compare_discrete_continuous, concentration_check, drift_consistency_check, fluctuation_sweep, DriftReport,
    ExperimentError, SweepConfig,
};
use crate::model::{format_rational, parse_rational, to_f64, ModelError, PopulationProfile, Rational, TieRule};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("ConfigUnreadable: {path}: {source}")]
    ConfigUnreadable { path: PathBuf, source: std::io::Error },
    #[error("OutputUnwritable: {path}: {source}")]
    OutputUnwritable { path: PathBuf, source: std::io::Error },
    #[error("ValidationFailed: the profile violates the genericity condition (rerun with --allow-degenerate to continue)")]
    ValidationFailed,
    #[error("DriftViolations: {0} states disagree with the mean-dynamics field")]
    DriftViolations(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Discrete(#[from] DiscreteError),
    #[error(transparent)]
    Continuous(#[from] ContinuousError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

#[derive(Debug, Parser)]
#[command(name = "brdyn", version, about = "Binary best-response dynamics of coordinators and anticoordinators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TieArg {
    PreferA,
    PreferB,
    Uniform,
    SelfInclusive,
}

impl From<TieArg> for TieRule {
    fn from(t: TieArg) -> Self {
        match t {
            TieArg::PreferA => TieRule::PreferA,
            TieArg::PreferB => TieRule::PreferB,
            TieArg::Uniform => TieRule::UniformRandom,
            TieArg::SelfInclusive => TieRule::SelfInclusivePreferA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PerturbArg {
    None,
    Up,
    Down,
}

#[derive(Debug, Args)]
struct Common {
    /// Population config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print rationals as 12-significant-digit decimals instead of num/den.
    #[arg(long)]
    decimal: bool,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the genericity condition on thresholds and cumulative proportions.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Report failures without a non-zero exit.
        #[arg(long)]
        allow_degenerate: bool,
    },
    /// Enumerate and classify equilibria of the mean dynamics.
    Equilibria {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        allow_degenerate: bool,
    },
    /// Run the finite-population chain from one initial state.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        size: u64,
        /// Initial A-player counts per subpopulation; random when omitted.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<u64>>,
        #[arg(long)]
        steps: u64,
        /// Steps excluded from the min/max window (default: half of `steps`).
        #[arg(long)]
        burn_in: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "prefer-a")]
        tie: TieArg,
        /// CSV trajectory: keep every k-th step.
        #[arg(long, default_value_t = 1)]
        every: u64,
    },
    /// Integrate the mean dynamics from one initial state.
    Flow {
        #[command(flatten)]
        common: Common,
        /// Initial state, one proportion per subpopulation.
        #[arg(long, value_delimiter = ',', conflicts_with = "fraction")]
        x0: Option<Vec<String>>,
        /// Start from this fraction of every subpopulation playing A.
        #[arg(long)]
        fraction: Option<String>,
        #[arg(long, default_value_t = DEFAULT_T_END)]
        t_end: f64,
        #[arg(long, default_value_t = DEFAULT_EQ_TOL)]
        eq_tol: f64,
        #[arg(long, value_enum, default_value = "none")]
        perturb: PerturbArg,
        /// Extra samples between consecutive breakpoints in CSV output.
        #[arg(long, default_value_t = 10)]
        samples: usize,
    },
    /// Fluctuation amplitude over population sizes and replicates.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<u64>,
        #[arg(long, default_value_t = 10)]
        replicates: u64,
        #[arg(long, default_value_t = 30)]
        steps_per_agent: u64,
        #[arg(long, default_value_t = 0.5)]
        burn_in_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "prefer-a")]
        tie: TieArg,
    },
    /// Distance of every closed class of the chain to the equilibria.
    Concentration {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<u64>,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, value_enum, default_value = "prefer-a")]
        tie: TieArg,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        cap: u64,
    },
    /// Compare the chain's exact drift with the mean-dynamics field at every state.
    DriftCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        size: u64,
        /// Check a single tie rule (all four when omitted).
        #[arg(long, value_enum)]
        tie: Option<TieArg>,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        cap: u64,
    },
    /// Overlay one chain run on the mean-dynamics solution from the same start.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        size: u64,
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<u64>>,
        /// Chain steps (default: 10 per agent).
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "prefer-a")]
        tie: TieArg,
        #[arg(long, default_value_t = DEFAULT_EQ_TOL)]
        eq_tol: f64,
    },
}

/// Runs the command line `argv` (program name first) and returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Report text plus whether it represents a domain failure that still gets printed.
struct Report {
    text: String,
    failure: Option<CliError>,
}

impl Report {
    fn ok(text: String) -> Self {
        Self { text, failure: None }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    let (common, report) = match command {
        Command::Validate { common, allow_degenerate } => {
            let profile = load(&common)?;
            let rep = profile.validate_assumption1();
            let mut out = Report::ok(pretty(&rep.to_json()));
            if !rep.passed() && !allow_degenerate {
                out.failure = Some(CliError::ValidationFailed);
            }
            (common, out)
        }
        Command::Equilibria { common, allow_degenerate } => {
            let profile = load(&common)?;
            let set = analyze(&profile, allow_degenerate)?;
            let fmt = Fmt::new(&common);
            let text = match common.format.unwrap_or(Format::Json) {
                Format::Json => pretty(&equilibria_json(&set, &fmt)),
                Format::Csv => equilibria_csv(&set, &fmt),
            };
            (common, Report::ok(text))
        }
        Command::Simulate { common, size, counts, steps, burn_in, seed, tie, every } => {
            let profile = load(&common)?;
            let kernel = Kernel::new(&profile, size, tie.into())?;
            let mut rng = rng_from_seed(seed);
            let start = match counts {
                Some(c) => DiscreteState::new(size, c),
                None => random_state(&kernel, &mut rng),
            };
            let burn_in = burn_in.unwrap_or(steps / 2);
            let fmt = Fmt::new(&common);
            let csv = common.format == Some(Format::Csv);
            let mut table = String::new();
            if csv {
                let cols: Vec<String> = (0..profile.len()).map(|k| format!("subpop_{k}")).collect();
                let _ = writeln!(table, "step,{},total_x", cols.join(","));
            }
            let every = every.max(1);
            let stats = simulate_with(&kernel, &start, steps, burn_in, &mut rng, seed, |k, c, total| {
                if csv && (k % every == 0 || k == steps) {
                    let cells: Vec<String> = c.iter().map(|v| fmt.rational(&ratio(*v, size))).collect();
                    let _ = writeln!(table, "{k},{},{}", cells.join(","), fmt.rational(&ratio(total, size)));
                }
            })?;
            let text = if csv {
                table
            } else {
                pretty(&json!({
                    "N": size,
                    "tie": tie_name(tie.into()),
                    "seed": stats.seed,
                    "steps": stats.steps,
                    "burn_in": stats.burn_in,
                    "initial_counts": start.counts,
                    "final_counts": stats.final_state.counts,
                    "visited_min_total": fmt.rational(&stats.visited_min_total),
                    "visited_max_total": fmt.rational(&stats.visited_max_total),
                    "amplitude": fmt.rational(&stats.amplitude),
                }))
            };
            (common, Report::ok(text))
        }
        Command::Flow { common, x0, fraction, t_end, eq_tol, perturb, samples } => {
            let profile = load(&common)?;
            let x0: Vec<f64> = match (x0, fraction) {
                (Some(values), _) => {
                    values.iter().map(|s| parse_rational(s).map(|r| to_f64(&r))).collect::<Result<_, _>>()?
                }
                (None, f) => {
                    let f = match f {
                        Some(s) => parse_rational(&s)?,
                        None => Rational::new(1, 2),
                    };
                    profile.flat_rho().iter().map(|rho| to_f64(&(rho * f))).collect()
                }
            };
            let perturb = match perturb {
                PerturbArg::None => Perturb::None,
                PerturbArg::Up => Perturb::Up,
                PerturbArg::Down => Perturb::Down,
            };
            let traj = flow(&profile, &x0, FlowOptions { t_end, eq_tol, perturb })?;
            let fmt = Fmt::new(&common);
            let text = match common.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let cols: Vec<String> = (0..profile.len()).map(|k| format!("x_{k}")).collect();
                    let mut out = format!("t,{},total,segment_kind\n", cols.join(","));
                    for bp in traj.sample(samples) {
                        let cells: Vec<String> = bp.x.iter().map(|v| fmt.real(*v)).collect();
                        let total: f64 = bp.x.iter().sum();
                        let _ = writeln!(
                            out,
                            "{},{},{},{}",
                            fmt.real(bp.t),
                            cells.join(","),
                            fmt.real(total),
                            bp.kind.label()
                        );
                    }
                    out
                }
                Format::Json => {
                    let bps: Vec<Value> = traj
                        .breakpoints()
                        .iter()
                        .map(|bp| json!({"t": bp.t, "x": bp.x, "segment_kind": bp.kind.label()}))
                        .collect();
                    pretty(&json!({
                        "t_end": traj.t_end,
                        "converged_at": traj.converged_at,
                        "limit": traj.limit,
                        "final_state": traj.final_state(),
                        "breakpoints": bps,
                    }))
                }
            };
            (common, Report::ok(text))
        }
        Command::Sweep { common, sizes, replicates, steps_per_agent, burn_in_fraction, seed, tie } => {
            let profile = load(&common)?;
            let cfg = SweepConfig {
                sizes,
                replicates,
                steps_per_agent,
                burn_in_fraction,
                master_seed: seed,
                tie: tie.into(),
            };
            let rows = fluctuation_sweep(&profile, &cfg)?;
            let fmt = Fmt::new(&common);
            let text = match common.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut out = String::from("N,replicate,seed,min_total,max_total,amplitude\n");
                    for r in &rows {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{}",
                            r.n,
                            r.replicate,
                            r.seed,
                            fmt.rational(&r.min_total),
                            fmt.rational(&r.max_total),
                            fmt.rational(&r.amplitude)
                        );
                    }
                    out
                }
                Format::Json => pretty(&Value::Array(
                    rows.iter()
                        .map(|r| {
                            json!({
                                "N": r.n,
                                "replicate": r.replicate,
                                "seed": r.seed,
                                "min_total": fmt.rational(&r.min_total),
                                "max_total": fmt.rational(&r.max_total),
                                "amplitude": fmt.rational(&r.amplitude),
                            })
                        })
                        .collect(),
                )),
            };
            (common, Report::ok(text))
        }
        Command::Concentration { common, sizes, eps, tie, cap } => {
            let profile = load(&common)?;
            let rows = concentration_check(&profile, &sizes, eps, tie.into(), cap)?;
            let fmt = Fmt::new(&common);
            let text = match common.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut out = String::from("N,class_id,abs_lo,abs_hi,hausdorff,mass_within_eps\n");
                    for r in &rows {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{}",
                            r.n,
                            r.class_id,
                            fmt.rational(&r.abs_lo),
                            fmt.rational(&r.abs_hi),
                            fmt.real(r.hausdorff),
                            fmt.real(r.mass_within_eps)
                        );
                    }
                    out
                }
                Format::Json => pretty(&Value::Array(
                    rows.iter()
                        .map(|r| {
                            json!({
                                "N": r.n,
                                "class_id": r.class_id,
                                "abs_lo": fmt.rational(&r.abs_lo),
                                "abs_hi": fmt.rational(&r.abs_hi),
                                "class_size": r.class_size,
                                "hausdorff": r.hausdorff,
                                "mass_within_eps": r.mass_within_eps,
                            })
                        })
                        .collect(),
                )),
            };
            (common, Report::ok(text))
        }
        Command::DriftCheck { common, size, tie, cap } => {
            let profile = load(&common)?;
            let ties: Vec<TieRule> = match tie {
                Some(t) => vec![t.into()],
                None => TieRule::ALL.to_vec(),
            };
            let reports =
                ties.iter().map(|t| drift_consistency_check(&profile, size, *t, cap)).collect::<Result<Vec<_>, _>>()?;
            let fmt = Fmt::new(&common);
            let violations: usize = reports.iter().map(|r| r.violations.len()).sum();
            let mut out =
                Report::ok(pretty(&Value::Array(reports.iter().map(|r| drift_json(r, &fmt)).collect())));
            if violations > 0 {
                out.failure = Some(CliError::DriftViolations(violations));
            }
            (common, out)
        }
        Command::Compare { common, size, counts, steps, seed, tie, eq_tol } => {
            let profile = load(&common)?;
            let kernel = Kernel::new(&profile, size, tie.into())?;
            let counts = match counts {
                Some(c) => c,
                None => random_state(&kernel, &mut rng_from_seed(seed)).counts,
            };
            let steps = steps.unwrap_or(10 * size);
            let overlay = compare_discrete_continuous(&profile, size, &counts, steps, seed, tie.into(), eq_tol)?;
            let fmt = Fmt::new(&common);
            let text = match common.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut out = String::from("t,discrete_total,continuous_total\n");
                    for r in &overlay.rows {
                        let _ = writeln!(
                            out,
                            "{},{},{}",
                            fmt.real(r.t),
                            fmt.real(r.discrete_total),
                            fmt.real(r.continuous_total)
                        );
                    }
                    out
                }
                Format::Json => pretty(&json!({
                    "N": size,
                    "initial_counts": counts,
                    "steps": steps,
                    "seed": seed,
                    "sup_gap": overlay.sup_gap,
                })),
            };
            (common, Report::ok(text))
        }
    };
    emit(&common, &report.text)?;
    match report.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn load(common: &Common) -> Result<PopulationProfile, CliError> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|source| CliError::ConfigUnreadable { path: common.config.clone(), source })?;
    Ok(PopulationProfile::from_json_str(&text)?)
}

fn emit(common: &Common, text: &str) -> Result<(), CliError> {
    match &common.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|source| CliError::OutputUnwritable { path: path.clone(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialise");
    s.push('\n');
    s
}

fn ratio(count: u64, n: u64) -> Rational {
    Rational::new(count as i64, n as i64)
}

fn tie_name(t: TieRule) -> &'static str {
    match t {
        TieRule::PreferA => "prefer-a",
        TieRule::PreferB => "prefer-b",
        TieRule::UniformRandom => "uniform",
        TieRule::SelfInclusivePreferA => "self-inclusive",
    }
}

/// Number formatting shared by all reports.
struct Fmt {
    decimal: bool,
}

impl Fmt {
    fn new(common: &Common) -> Self {
        Self { decimal: common.decimal }
    }

    fn rational(&self, r: &Rational) -> String {
        if self.decimal {
            significant(to_f64(r))
        } else {
            format_rational(r)
        }
    }

    fn real(&self, v: f64) -> String {
        if self.decimal {
            significant(v)
        } else {
            v.to_string()
        }
    }
}

/// `v` rounded to 12 significant digits, without trailing zeros.
fn significant(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let magnitude = v.abs().log10().floor() as i32;
    let places = (11 - magnitude).max(0) as usize;
    let s = format!("{v:.places$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn point_json(e: &EquilibriumPoint, fmt: &Fmt) -> Value {
    let (i, j) = e.kind.indices();
    json!({
        "label": e.kind.label(),
        "kind": e.kind.name(),
        "i": i,
        "j": j,
        "state": e.state.iter().map(|r| fmt.rational(r)).collect::<Vec<_>>(),
        "abstract_value": fmt.rational(&e.abstract_value),
        "stability": e.stability.name(),
        "basin": e.basin.map(|b| if fmt.decimal {
            format!(
                "{}{}, {}{}",
                if b.lo_closed { '[' } else { '(' },
                fmt.rational(&b.lo),
                fmt.rational(&b.hi),
                if b.hi_closed { ']' } else { ')' }
            )
        } else {
            b.to_string()
        }),
        "globally_stable": e.globally_stable,
        "merged": e.merged.iter().map(|k| k.label()).collect::<Vec<_>>(),
        "degenerate_case": e.degenerate_case.map(|c| c.name()),
    })
}

fn equilibria_json(set: &EquilibriumSet, fmt: &Fmt) -> Value {
    let continua: Vec<Value> = set
        .continua
        .iter()
        .map(|c| {
            json!({
                "anti_label": c.anti_label,
                "coord_label": c.coord_label,
                "tau": fmt.rational(&c.tau),
                "is_equilibrium": c.is_equilibrium,
                "attracting": c.attracting,
            })
        })
        .collect();
    json!({
        "degenerate": set.degenerate,
        "equilibria": set.all.iter().map(|e| point_json(e, fmt)).collect::<Vec<_>>(),
        "continua": continua,
    })
}

fn equilibria_csv(set: &EquilibriumSet, fmt: &Fmt) -> String {
    let mut out = String::from("label,kind,abstract_value,stability,globally_stable,basin,state\n");
    for e in &set.all {
        let state: Vec<String> = e.state.iter().map(|r| fmt.rational(r)).collect();
        let basin = point_json(e, fmt)["basin"].as_str().unwrap_or("").to_string();
        let _ = writeln!(
            out,
            "{},{},{},{},{},\"{}\",\"{}\"",
            e.kind.label(),
            e.kind.name(),
            fmt.rational(&e.abstract_value),
            e.stability.name(),
            e.globally_stable,
            basin,
            state.join(" ")
        );
    }
    out
}

fn drift_json(r: &DriftReport, fmt: &Fmt) -> Value {
    let violations: Vec<Value> = r
        .violations
        .iter()
        .map(|v| {
            json!({
                "counts": v.counts,
                "component": v.component,
                "drift": fmt.rational(&v.drift),
                "lo": fmt.rational(&v.lo),
                "hi": fmt.rational(&v.hi),
            })
        })
        .collect();
    json!({
        "N": r.n,
        "tie": tie_name(r.tie),
        "states": r.states,
        "singleton_matched": r.singleton_matched,
        "band_states": r.band_states,
        "violations": violations,
    })
}
