//! Command-line front end for the validate, collect, check, synthesize,
//! simulate and report pipeline.
//!
//! Exit codes: 0 success, 1 a named condition or assumption fails, 2 the
//! input could not be read or is inconsistent.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::closedloop::{metrics, run as simulate_run, AgentSeries, ConvergenceMetrics, SignalTable, SimState, Trajectory};
use crate::datagen::{collect, default_horizon, DataSet, ExcitationConfig};
use crate::error::Error;
use crate::formats::{load_scenario, read_json, write_atomic, write_json, LoadError};
use crate::informativity::assess;
use crate::matops::Tolerances;
use crate::plant::{validate_scenario, Scenario, Violation};
use crate::synthesis::{synthesize, ControllerSet, Mode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "outsync", version, about = "Data-driven cooperative output regulation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario against the standing assumptions.
    Validate { scenario: PathBuf },
    /// Excite every agent and record input/state/output data.
    Collect { scenario: PathBuf },
    /// Evaluate the informativity conditions of a data file.
    Check { scenario: PathBuf, data: PathBuf },
    /// Design gains, regulator solutions and observers.
    Synthesize {
        scenario: PathBuf,
        /// Data file; required in data mode.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the closed loop and write a trajectory CSV.
    Simulate { scenario: PathBuf, controllers: PathBuf },
    /// Summarize a trajectory CSV.
    Report { trajectory: PathBuf },
}

/// Options shared by all subcommands.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Seed for excitation data and random initial conditions.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Data horizon T; defaults to max(n_i + m_i + p) + 2.
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    #[arg(long, global = true, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, global = true, default_value_t = 100)]
    pub tail_window: usize,
    #[arg(long, global = true, value_enum, default_value_t = Mode::Data)]
    pub mode: Mode,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tol_rank: Option<f64>,
    #[arg(long, global = true)]
    pub tol_schur: Option<f64>,
    #[arg(long, global = true)]
    pub tol_residual: Option<f64>,
    /// Largest acceptable tail of ||e_i||inf in `report`.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub threshold: f64,
    /// Standard deviation of random initial states; 0 starts at rest.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub init_scale: f64,
}

impl RunConfig {
    pub fn tolerances(&self) -> Tolerances {
        let mut t = Tolerances::default();
        if let Some(v) = self.tol_rank {
            t.rank_rel = v;
        }
        if let Some(v) = self.tol_schur {
            t.schur_margin = v;
        }
        if let Some(v) = self.tol_residual {
            t.residual_abs = v;
        }
        t
    }

    pub fn validate(&self) -> Result<(), String> {
        self.tolerances().validate().map_err(|e| e.to_string())?;
        if self.steps == 0 {
            return Err("--steps must be at least 1".into());
        }
        if self.tail_window == 0 {
            return Err("--tail-window must be at least 1".into());
        }
        if self.horizon == Some(0) {
            return Err("--horizon must be at least 1".into());
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err("--threshold must be positive".into());
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err("--init-scale must be finite and nonnegative".into());
        }
        Ok(())
    }
}

/// A command outcome: exit code plus message for stderr.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn domain(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DOMAIN,
            message: message.into(),
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotStabilizable(_)
        | Error::NotInformative { .. }
        | Error::Infeasible { .. }
        | Error::Synthesis { .. }
        | Error::DesignFailed(_)
        | Error::Observer { .. }
        | Error::RankPrecondition(_) => EXIT_DOMAIN,
        Error::Dimension(_)
        | Error::NotSquare { .. }
        | Error::InvalidInput(_)
        | Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_) => EXIT_INPUT,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_INPUT;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    if let Err(msg) = cli.config.validate() {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_INPUT;
    }
    let cfg = &cli.config;
    let result = match &cli.command {
        Command::Validate { scenario } => cmd_validate(scenario, cfg, out),
        Command::Collect { scenario } => cmd_collect(scenario, cfg, out),
        Command::Check { scenario, data } => cmd_check(scenario, data, cfg, out),
        Command::Synthesize { scenario, data } => cmd_synthesize(scenario, data.as_deref(), cfg, out),
        Command::Simulate { scenario, controllers } => cmd_simulate(scenario, controllers, cfg, out),
        Command::Report { trajectory } => cmd_report(trajectory, cfg, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn io(e: std::io::Error) -> Failure {
    Failure::input(e.to_string())
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    match load_scenario(path) {
        Ok(s) => Ok(s),
        Err(e @ LoadError::Parse(_)) => Err(Failure::input(e.to_string())),
        Err(e @ LoadError::Structural(_)) => Err(Failure::domain(e.to_string())),
    }
}

/// Loads a scenario and refuses to continue past any violation.
fn load_valid(path: &Path, tol: &Tolerances) -> Result<Scenario, Failure> {
    let s = load(path)?;
    let v = validate_scenario(&s, tol);
    if v.is_empty() {
        Ok(s)
    } else {
        let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        Err(Failure::domain(format!("scenario is invalid: {}", parts.join("; "))))
    }
}

fn load_data(path: &Path, s: &Scenario) -> Result<DataSet, Failure> {
    let data: DataSet = read_json(path)?;
    data.check_against(s)?;
    Ok(data)
}

fn emit(cfg: &RunConfig, out: &mut dyn Write, bytes: &[u8], what: &str) -> Result<(), Failure> {
    match &cfg.out {
        Some(p) => {
            write_atomic(p, bytes)?;
            writeln!(out, "wrote {what} to {}", p.display()).map_err(io)
        }
        None => out.write_all(bytes).map_err(io),
    }
}

fn emit_json<T: serde::Serialize>(cfg: &RunConfig, out: &mut dyn Write, value: &T, what: &str) -> Result<(), Failure> {
    match &cfg.out {
        Some(p) => {
            write_json(p, value)?;
            writeln!(out, "wrote {what} to {}", p.display()).map_err(io)
        }
        None => {
            let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
            text.push('\n');
            out.write_all(text.as_bytes()).map_err(io)
        }
    }
}

const ASSUMPTIONS: [(&str, &str); 4] = [
    ("structure", "dimensions, roles and leader ordering"),
    ("Assumption 1", "S has simple eigenvalues on the unit circle"),
    ("Assumption 2", "(R, S) is observable"),
    ("Assumption 3", "every agent is reachable from the exosystem"),
];

fn cmd_validate(path: &Path, cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let violations = match load_scenario(path) {
        Ok(s) => validate_scenario(&s, &cfg.tolerances()),
        Err(e @ LoadError::Parse(_)) => return Err(Failure::input(e.to_string())),
        Err(LoadError::Structural(v)) => v,
    };
    let structural_only = violations
        .iter()
        .all(|v| matches!(v, Violation::Structural { .. }));
    for (name, what) in ASSUMPTIONS {
        let hits: Vec<&Violation> = violations.iter().filter(|v| v.assumption() == name).collect();
        let verdict = if !hits.is_empty() {
            "FAIL"
        } else if name != "structure" && !violations.is_empty() && structural_only {
            // structural failures can stop the later checks from running
            "SKIP"
        } else {
            "PASS"
        };
        writeln!(out, "{name:<13} {verdict:<5} {what}").map_err(io)?;
        for v in hits {
            writeln!(out, "    {v}").map_err(io)?;
        }
    }
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_DOMAIN })
}

fn cmd_collect(path: &Path, cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let tol = cfg.tolerances();
    let s = load_valid(path, &tol)?;
    let horizon = cfg.horizon.unwrap_or_else(|| default_horizon(&s));
    let data = collect(&s, &ExcitationConfig::new(cfg.seed, horizon), &tol)?;
    emit_json(cfg, out, &data, "data")?;
    if cfg.out.is_some() {
        writeln!(out, "seed {}, horizon T = {horizon}, {} agents", data.seed, data.records.len()).map_err(io)?;
    }
    Ok(EXIT_OK)
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn cmd_check(scenario: &Path, data: &Path, cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let tol = cfg.tolerances();
    let s = load_valid(scenario, &tol)?;
    let data = load_data(data, &s)?;
    writeln!(
        out,
        "{:<6} {:<9} {:<12} {:<12} {:<12} {:>12}",
        "agent", "role", "ia/iia", "ib/iib", "ic/iic", "residual"
    )
    .map_err(io)?;
    let mut reports = Vec::new();
    for r in &data.records {
        let rep = assess(r, &s.exo, &tol)?;
        writeln!(
            out,
            "{:<6} {:<9} {:<12} {:<12} {:<12} {:>12.3e}",
            rep.agent_index,
            rep.role.to_string(),
            mark(rep.rank_ok),
            mark(rep.stab_ok),
            mark(rep.regulator_ok),
            rep.residual
        )
        .map_err(io)?;
        reports.push(rep);
    }
    let mut code = EXIT_OK;
    for rep in &reports {
        for d in &rep.details {
            writeln!(out, "  agent {}: {d}", rep.agent_index).map_err(io)?;
        }
        if let Some(c) = rep.failed_condition() {
            writeln!(out, "agent {}: condition {c} fails", rep.agent_index).map_err(io)?;
            code = EXIT_DOMAIN;
        }
    }
    Ok(code)
}

fn cmd_synthesize(scenario: &Path, data: Option<&Path>, cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let tol = cfg.tolerances();
    let s = load_valid(scenario, &tol)?;
    let records = match (cfg.mode, data) {
        (Mode::Data, None) => return Err(Failure::input("data mode needs --data")),
        (Mode::Data, Some(p)) => Some(load_data(p, &s)?.records),
        (Mode::Model, _) => None,
    };
    let c = synthesize(&s, records.as_deref(), cfg.mode, &tol)?;
    emit_json(cfg, out, &c, "controllers")?;
    if cfg.out.is_some() {
        writeln!(
            out,
            "mode {}, observer radii {:.4} (L) {:.4} (H), worst certified radius {:.4}",
            c.mode,
            c.observer_l_radius,
            c.observer_h_radius(),
            c.worst_margin()
        )
        .map_err(io)?;
    }
    Ok(EXIT_OK)
}

/// CSV header: `t`, then per agent its `e` components and the two norms.
pub fn csv_header(tr: &Trajectory) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 0..tr.n_agents() {
        let p = tr.e(0, i).len();
        h.extend((1..=p).map(|k| format!("e{}_{k}", i + 1)));
        h.push(format!("delta{}_inf", i + 1));
        h.push(format!("eps{}_inf", i + 1));
    }
    h
}

pub fn trajectory_csv(tr: &Trajectory) -> Result<Vec<u8>, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(csv_header(tr))?;
    for t in 0..tr.len() {
        let mut row = vec![tr.states[t].t.to_string()];
        for i in 0..tr.n_agents() {
            row.extend(tr.e(t, i).iter().map(|v| format!("{v:.15e}")));
            row.push(format!("{:.15e}", tr.delta(t, i).amax()));
            row.push(format!("{:.15e}", tr.eps(t, i).amax()));
        }
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn cmd_simulate(scenario: &Path, controllers: &Path, cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let s = load(scenario)?;
    let c: ControllerSet = read_json(controllers)?;
    c.check_against(&s)?;
    let init = SimState::random(&s, cfg.seed, cfg.init_scale);
    let tr = simulate_run(&s, &c, &init, cfg.steps)?;
    emit(cfg, out, &trajectory_csv(&tr)?, "trajectory")?;
    Ok(EXIT_OK)
}

enum Column {
    Time,
    E(usize),
    Delta(usize),
    Eps(usize),
}

fn classify(name: &str) -> Option<Column> {
    let agent = |s: &str| s.parse::<usize>().ok().filter(|&i| i >= 1);
    if name == "t" {
        return Some(Column::Time);
    }
    if let Some(rest) = name.strip_prefix("delta").and_then(|r| r.strip_suffix("_inf")) {
        return agent(rest).map(Column::Delta);
    }
    if let Some(rest) = name.strip_prefix("eps").and_then(|r| r.strip_suffix("_inf")) {
        return agent(rest).map(Column::Eps);
    }
    let (i, k) = name.strip_prefix('e')?.split_once('_')?;
    agent(k)?;
    agent(i).map(Column::E)
}

/// Reads a trajectory CSV back into per-agent norm series.
pub fn parse_trajectory_csv(text: &str) -> Result<SignalTable, String> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| e.to_string())?.clone();
    let mut cols = Vec::with_capacity(header.len());
    let mut n_agents = 0;
    for name in header.iter() {
        let c = classify(name).ok_or_else(|| format!("unrecognized column {name:?}"))?;
        if let Column::E(i) | Column::Delta(i) | Column::Eps(i) = c {
            n_agents = n_agents.max(i);
        }
        cols.push(c);
    }
    if !matches!(cols.first(), Some(Column::Time)) {
        return Err("first column must be t".into());
    }
    let mut present = vec![[false; 3]; n_agents];
    for c in &cols[1..] {
        match c {
            Column::Time => return Err("duplicate t column".into()),
            Column::E(i) => present[i - 1][0] = true,
            Column::Delta(i) => present[i - 1][1] = true,
            Column::Eps(i) => present[i - 1][2] = true,
        }
    }
    if n_agents == 0 {
        return Err("no agent columns".into());
    }
    if let Some(i) = present.iter().position(|p| !p.iter().all(|&b| b)) {
        return Err(format!("agent {} lacks e, delta or eps columns", i + 1));
    }
    let mut table = SignalTable {
        agents: vec![AgentSeries::default(); n_agents],
    };
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let mut e_norm = vec![0.0_f64; n_agents];
        let mut delta = vec![0.0; n_agents];
        let mut eps = vec![0.0; n_agents];
        for (c, field) in cols.iter().zip(rec.iter()) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| format!("row {}: {field:?} is not a number", line + 1))?;
            match c {
                Column::Time => {}
                // NaN compares false in max, so fold it in as infinity
                Column::E(i) => e_norm[i - 1] = if v.is_nan() { f64::INFINITY } else { e_norm[i - 1].max(v.abs()) },
                Column::Delta(i) => delta[i - 1] = v,
                Column::Eps(i) => eps[i - 1] = v,
            }
        }
        for (i, a) in table.agents.iter_mut().enumerate() {
            a.e.push(e_norm[i]);
            a.delta.push(delta[i]);
            a.eps.push(eps[i]);
        }
    }
    if table.steps() == 0 {
        return Err("trajectory has no rows".into());
    }
    Ok(table)
}

fn fmt_decay(d: Option<f64>) -> String {
    d.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

fn print_metrics(m: &ConvergenceMetrics, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<6} {:>12} {:>12} {:>12} {:>9} {:>9} {:>9}",
        "agent", "e_tail", "delta_tail", "eps_tail", "e_decay", "d_decay", "eps_decay"
    )?;
    for a in &m.agents {
        writeln!(
            out,
            "{:<6} {:>12.3e} {:>12.3e} {:>12.3e} {:>9} {:>9} {:>9}",
            a.agent_index,
            a.e_tail,
            a.delta_tail,
            a.eps_tail,
            fmt_decay(a.e_decay),
            fmt_decay(a.delta_decay),
            fmt_decay(a.eps_decay)
        )?;
    }
    Ok(())
}

fn cmd_report(path: &Path, cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let table = parse_trajectory_csv(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let window = cfg.tail_window.min(table.steps());
    let m = metrics(&table, window)?;
    writeln!(out, "{} steps, tail window {window}", m.steps).map_err(io)?;
    print_metrics(&m, out).map_err(io)?;
    let worst = m.max_e_tail();
    let ok = worst <= cfg.threshold;
    writeln!(
        out,
        "{}: max e tail {worst:.3e} {} threshold {:.1e}",
        if ok { "PASS" } else { "FAIL" },
        if ok { "<=" } else { ">" },
        cfg.threshold
    )
    .map_err(io)?;
    Ok(if ok { EXIT_OK } else { EXIT_DOMAIN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::EXAMPLE_SCENARIO_JSON;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["outsync"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn scenario_file(dir: &Path, text: &str) -> String {
        let p = dir.join("scenario.json");
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    }

    #[test]
    fn validate_example_passes() {
        let dir = tempfile::tempdir().unwrap();
        let sc = scenario_file(dir.path(), EXAMPLE_SCENARIO_JSON);
        let (code, out, _) = call(&["validate", &sc]);
        assert_eq!(code, 0, "{out}");
        assert_eq!(out.matches("PASS").count(), 4);
    }

    #[test]
    fn validate_repeated_eigenvalue_names_assumption_one() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"{"exosystem": {"S": [[1.0, 0.0], [0.0, 1.0]], "R": [[1.0, 1.0]]},
            "agents": [{"role": "leader", "A": [[0.5]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]],
                        "E": [[0.0]], "F": [[0.0]]}],
            "graph": {"n_leaders": 1, "adjacency": [[0.0]]}}"#;
        let sc = scenario_file(dir.path(), text);
        let (code, out, _) = call(&["validate", &sc]);
        assert_eq!(code, 1);
        assert!(out.lines().any(|l| l.starts_with("Assumption 1") && l.contains("FAIL")), "{out}");
        assert!(out.contains("repeated"));
    }

    #[test]
    fn validate_malformed_rows_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let sc = scenario_file(dir.path(), &EXAMPLE_SCENARIO_JSON.replace("[[-1.0, 1.0]]", "[[-1.0, 1.0], [1.0]]"));
        assert_eq!(call(&["validate", &sc]).0, 2);
        assert_eq!(call(&["validate", "/nonexistent/scenario.json"]).0, 2);
    }

    #[test]
    fn bad_flags_are_input_errors() {
        assert_eq!(call(&["report", "x.csv", "--tail-window", "0"]).0, 2);
        assert_eq!(call(&["simulate", "a", "b", "--mode", "nonsense"]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn csv_parse_accepts_written_format() {
        let text = "t,e1_1,e1_2,delta1_inf,eps1_inf\n0,1e0,-2e0,3e0,4e0\n1,0.5,0.25,1,1\n";
        let t = parse_trajectory_csv(text).unwrap();
        assert_eq!(t.agents[0].e, vec![2.0, 0.5]);
        assert_eq!(t.agents[0].eps, vec![4.0, 1.0]);
    }

    #[test]
    fn csv_parse_rejects_malformed() {
        assert!(parse_trajectory_csv("").is_err());
        assert!(parse_trajectory_csv("t,e1_1,delta1_inf,eps1_inf\n").is_err());
        assert!(parse_trajectory_csv("t,e1_1,delta1_inf\n0,1,1\n").is_err());
        assert!(parse_trajectory_csv("t,e1_1,delta1_inf,eps1_inf\n0,x,1,1\n").is_err());
        assert!(parse_trajectory_csv("t,e1_1,delta1_inf,eps1_inf\n0,1,1\n").is_err());
        assert!(parse_trajectory_csv("e1_1,t,delta1_inf,eps1_inf\n0,1,1,1\n").is_err());
        assert!(parse_trajectory_csv("t,foo\n0,1\n").is_err());
    }

    #[test]
    fn report_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let zero = dir.path().join("zero.csv");
        std::fs::write(&zero, "t,e1_1,delta1_inf,eps1_inf\n0,0,0,0\n1,0,0,0\n").unwrap();
        let (code, out, _) = call(&["report", zero.to_str().unwrap()]);
        assert_eq!(code, 0, "{out}");
        let growing = dir.path().join("grow.csv");
        let rows: String = (0..50).map(|t| format!("{t},{},0,0\n", 1.1f64.powi(t))).collect();
        std::fs::write(&growing, format!("t,e1_1,delta1_inf,eps1_inf\n{rows}")).unwrap();
        let (code, out, _) = call(&["report", growing.to_str().unwrap(), "--tail-window", "10"]);
        assert_eq!(code, 1);
        assert!(out.contains("1.1000"), "{out}");
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "t,e1_1\n0,zz\n").unwrap();
        assert_eq!(call(&["report", bad.to_str().unwrap()]).0, 2);
    }
}
