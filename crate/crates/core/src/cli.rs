//! Command-line front end.
//!
//! Every command reads one spec JSON file. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | structural or parse error |
//! | 2 | completion infeasible (a certificate is written when one exists) |
//! | 3 | a hypothesis or identity check fails beyond `--tol` |
//! | 4 | the simulation verdict is fail |
//!
//! Outputs depend only on the input file and the flags, so identical runs
//! produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::entropy::{entropy_full, EntropyReport};
use crate::feasibility::FeasibilityOutcome;
use crate::labyrinths::{self, BlockReport};
use crate::maxent::{self, ConstrainedOptions, MaxentSolution, ParryMeasure};
use crate::model::{validate_hypotheses, CompletedChain, PartialChainSpec, ValidationReport};
use crate::qsd::{qsd_report_hidden, qsd_report_visible, QsdReport};
use crate::sim::{compare_laws, simulate_splice, Comparison, SimVerdict};
use crate::{tol, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "labyrinth", version, about = "Maximum-entropy completion of partially observed Markov chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Check the standing hypotheses on the visible data.
    Validate(Options),
    /// Decide whether the communication constraints admit a completion.
    Feasibility(Options),
    /// Fill in the hidden block and write the completed chain.
    Complete(Options),
    /// Quasi-stationarity residuals of the completed chain.
    Qsd(Options),
    /// Rebuild the chain by splicing and compare it with the completion.
    Simulate(Options),
    /// Run everything and write a Markdown summary.
    Report(Options),
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Spec JSON file.
    pub input: PathBuf,
    /// Main artifact (JSON, Markdown, or the trace CSV for `simulate`); stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    pub mode: Mode,
    #[arg(long, default_value_t = tol::IDENTITY)]
    pub tol: f64,
    #[arg(long, default_value_t = tol::SCALING_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = tol::QSD_HORIZON)]
    pub horizon: usize,
    /// Statistics JSON for `simulate`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Auto,
    Bernoulli,
    Constrained,
    Parry,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Feasibility,
    Complete,
    Qsd,
    Simulate,
    Report,
}

/// Everything one invocation needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub mode: Mode,
    pub tol: f64,
    pub max_iter: usize,
    pub steps: usize,
    pub seed: u64,
    pub horizon: usize,
    pub report: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command, input: impl Into<PathBuf>) -> Self {
        RunConfig {
            command,
            input: input.into(),
            output: None,
            mode: Mode::Auto,
            tol: tol::IDENTITY,
            max_iter: tol::SCALING_MAX_ITER,
            steps: 1_000_000,
            seed: 0,
            horizon: tol::QSD_HORIZON,
            report: None,
        }
    }

    fn constrained_options(&self) -> ConstrainedOptions {
        ConstrainedOptions {
            max_iter: self.max_iter,
            ..Default::default()
        }
    }
}

impl From<Cli> for RunConfig {
    fn from(cli: Cli) -> Self {
        let (command, o) = match cli.command {
            CliCommand::Validate(o) => (Command::Validate, o),
            CliCommand::Feasibility(o) => (Command::Feasibility, o),
            CliCommand::Complete(o) => (Command::Complete, o),
            CliCommand::Qsd(o) => (Command::Qsd, o),
            CliCommand::Simulate(o) => (Command::Simulate, o),
            CliCommand::Report(o) => (Command::Report, o),
        };
        RunConfig {
            command,
            input: o.input,
            output: o.output,
            mode: o.mode,
            tol: o.tol,
            max_iter: o.max_iter,
            steps: o.steps,
            seed: o.seed,
            horizon: o.horizon,
            report: o.report,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitStatus {
    Success = 0,
    Structural = 1,
    Infeasible = 2,
    Hypothesis = 3,
    SimulationFail = 4,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Which completion applies, resolved from `--mode` and the spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolved {
    Bernoulli,
    Constrained,
    Parry,
    Uniform,
    /// One problem per partition block, each Bernoulli or constrained.
    MultiLabyrinth,
}

pub fn resolve_mode(spec: &PartialChainSpec, mode: Mode) -> Result<Resolved> {
    let empty_i = spec.is_hidden_only();
    let has_l = spec.comm().is_some();
    let partitioned = spec.partition().is_some();
    let need_visible = |name: &str| {
        if empty_i {
            Err(Error::spec(format!("{name} completion needs visible states")))
        } else {
            Ok(())
        }
    };
    match mode {
        Mode::Auto => Ok(match (empty_i, has_l) {
            (true, false) => Resolved::Uniform,
            (true, true) => Resolved::Parry,
            _ if partitioned => Resolved::MultiLabyrinth,
            (false, false) => Resolved::Bernoulli,
            (false, true) => Resolved::Constrained,
        }),
        Mode::Parry if !empty_i => Err(Error::spec("parry mode requires an empty visible set")),
        Mode::Parry if !has_l => Err(Error::spec("parry mode requires a communication matrix L")),
        Mode::Parry => Ok(Resolved::Parry),
        Mode::Uniform if !empty_i => Err(Error::spec("uniform mode requires an empty visible set")),
        Mode::Uniform => Ok(Resolved::Uniform),
        Mode::Constrained if !has_l => Err(Error::spec("constrained mode requires a communication matrix L")),
        Mode::Constrained => {
            need_visible("constrained")?;
            Ok(if partitioned { Resolved::MultiLabyrinth } else { Resolved::Constrained })
        }
        Mode::Bernoulli => {
            need_visible("bernoulli")?;
            Ok(if partitioned { Resolved::MultiLabyrinth } else { Resolved::Bernoulli })
        }
    }
}

/// A completed chain with whatever the chosen solver reports alongside it.
#[derive(Debug, Clone)]
pub struct Completion {
    pub resolved: Resolved,
    pub chain: CompletedChain,
    pub solution: Option<MaxentSolution>,
    pub parry: Option<ParryMeasure>,
    pub blocks: Option<BTreeMap<usize, BlockReport>>,
}

/// Runs the completion selected by `mode`.
pub fn complete_with_mode(spec: &PartialChainSpec, mode: Mode, opts: &ConstrainedOptions) -> Result<Completion> {
    let resolved = resolve_mode(spec, mode)?;
    let mut out = Completion {
        resolved,
        chain: match resolved {
            Resolved::Bernoulli => maxent::complete_bernoulli(spec)?,
            Resolved::Constrained => {
                let (chain, sol) = maxent::complete_constrained_chain(spec, opts)?;
                return Ok(Completion {
                    resolved,
                    chain,
                    solution: Some(sol),
                    parry: None,
                    blocks: None,
                });
            }
            Resolved::Parry | Resolved::Uniform => maxent::complete_hidden_only(spec)?,
            Resolved::MultiLabyrinth => {
                let problems = labyrinths::decompose(spec)?;
                let modes = match mode {
                    Mode::Bernoulli => vec![crate::model::CompletionMode::Bernoulli; problems.len()],
                    Mode::Constrained => vec![crate::model::CompletionMode::Constrained; problems.len()],
                    _ => labyrinths::auto_modes(&problems),
                };
                let multi = labyrinths::complete_blocks(spec, &problems, &modes, opts)?;
                return Ok(Completion {
                    resolved,
                    chain: multi.chain,
                    solution: None,
                    parry: None,
                    blocks: Some(multi.blocks),
                });
            }
        },
        solution: None,
        parry: None,
        blocks: None,
    };
    if resolved == Resolved::Parry {
        out.parry = spec.comm().map(maxent::complete_parry).transpose()?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct CompletionJson<'a> {
    mode: Resolved,
    chain: crate::model::ChainReport<'a>,
    entropy: EntropyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    solution: Option<&'a MaxentSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parry: Option<&'a ParryMeasure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    blocks: Option<&'a BTreeMap<usize, BlockReport>>,
}

impl Completion {
    pub fn to_json(&self) -> Result<String> {
        let json = CompletionJson {
            mode: self.resolved,
            chain: self.chain.report(),
            entropy: entropy_full(&self.chain),
            solution: self.solution.as_ref(),
            parry: self.parry.as_ref(),
            blocks: self.blocks.as_ref(),
        };
        Ok(serde_json::to_string_pretty(&json)? + "\n")
    }
}

/// Feasibility of every constrained block: the whole of `E` without a partition.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum FeasibilityReport {
    Single(FeasibilityOutcome),
    Blocks { blocks: BTreeMap<usize, FeasibilityOutcome> },
}

impl FeasibilityReport {
    pub fn all_feasible(&self) -> bool {
        match self {
            FeasibilityReport::Single(o) => o.is_feasible(),
            FeasibilityReport::Blocks { blocks } => blocks.values().all(|o| o.is_feasible()),
        }
    }
}

pub fn feasibility_report(spec: &PartialChainSpec) -> Result<FeasibilityReport> {
    if spec.comm().is_none() {
        return Err(Error::spec("feasibility needs a communication matrix L"));
    }
    if spec.is_hidden_only() {
        return Err(Error::spec(
            "without visible states there is no prescribed stationary law, so every irreducible L is feasible",
        ));
    }
    let problems = labyrinths::decompose(spec)?;
    let mut blocks = labyrinths::block_feasibility(&problems)?;
    Ok(match spec.partition() {
        None => FeasibilityReport::Single(blocks.remove(&0).expect("one block")),
        Some(_) => FeasibilityReport::Blocks { blocks },
    })
}

fn load(path: &Path) -> Result<PartialChainSpec> {
    PartialChainSpec::from_json_str(&std::fs::read_to_string(path)?)
}

fn emit(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn status_of(err: &Error) -> ExitStatus {
    match err.root() {
        Error::Infeasible { .. } | Error::InfeasibleOrDegenerate { .. } | Error::DegenerateSupport { .. } => {
            ExitStatus::Infeasible
        }
        Error::CompletionInvalid { .. } => ExitStatus::Hypothesis,
        _ => ExitStatus::Structural,
    }
}

/// Runs one command. Errors are printed to `stderr` and turned into the exit status.
pub fn run(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitStatus {
    match dispatch(config, stdout, stderr) {
        Ok(status) => status,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            status_of(&e)
        }
    }
}

fn dispatch(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<ExitStatus> {
    let spec = load(&config.input)?;
    let out = config.output.as_deref();
    let validation = validate_hypotheses(&spec, config.tol);

    if config.command == Command::Validate {
        emit(out, &(serde_json::to_string_pretty(&validation)? + "\n"), stdout)?;
        return Ok(if validation.all_passed() {
            ExitStatus::Success
        } else {
            ExitStatus::Hypothesis
        });
    }
    if config.command == Command::Report {
        let (text, status) = report(&spec, &validation, config)?;
        emit(out, &text, stdout)?;
        return Ok(status);
    }
    if !validation.all_passed() {
        for c in validation.failures() {
            writeln!(stderr, "hypothesis {} fails: {}", c.name, describe(c))?;
        }
        return Ok(ExitStatus::Hypothesis);
    }

    match config.command {
        Command::Feasibility => {
            let rep = feasibility_report(&spec)?;
            emit(out, &(serde_json::to_string_pretty(&rep)? + "\n"), stdout)?;
            Ok(if rep.all_feasible() {
                ExitStatus::Success
            } else {
                ExitStatus::Infeasible
            })
        }
        Command::Complete => {
            if let Some(status) = precheck_feasibility(&spec, config, stdout)? {
                return Ok(status);
            }
            let completion = complete_with_mode(&spec, config.mode, &config.constrained_options())?;
            emit(out, &completion.to_json()?, stdout)?;
            Ok(ExitStatus::Success)
        }
        Command::Qsd => {
            if let Some(status) = infeasible_without_certificate(&spec, config, stderr)? {
                return Ok(status);
            }
            let completion = complete_with_mode(&spec, config.mode, &config.constrained_options())?;
            let reports = [
                qsd_report_visible(&completion.chain, config.horizon)?,
                qsd_report_hidden(&completion.chain, config.horizon)?,
            ];
            match out {
                Some(p) => std::fs::write(p, serde_json::to_string_pretty(&reports)? + "\n")?,
                None => stdout.write_all(qsd_table(&reports).as_bytes())?,
            }
            Ok(if reports.iter().all(|r| r.max_residual() <= config.tol) {
                ExitStatus::Success
            } else {
                ExitStatus::Hypothesis
            })
        }
        Command::Simulate => {
            if let Some(status) = infeasible_without_certificate(&spec, config, stderr)? {
                return Ok(status);
            }
            let completion = complete_with_mode(&spec, config.mode, &config.constrained_options())?;
            let chain = &completion.chain;
            let trace = simulate_splice(chain, config.steps, config.seed)?;
            let cmp = compare_laws(&trace, chain)?;
            if let Some(p) = out {
                trace.write_csv_path(chain.states(), p)?;
            }
            if let Some(p) = &config.report {
                std::fs::write(p, serde_json::to_string_pretty(&cmp)? + "\n")?;
            }
            stdout.write_all(simulation_summary(&cmp, config).as_bytes())?;
            Ok(if cmp.verdict == SimVerdict::Fail {
                ExitStatus::SimulationFail
            } else {
                ExitStatus::Success
            })
        }
        Command::Validate | Command::Report => unreachable!(),
    }
}

/// The LP verdict when the resolved completion is support-constrained.
fn constrained_feasibility(spec: &PartialChainSpec, config: &RunConfig) -> Result<Option<FeasibilityReport>> {
    let constrained = match resolve_mode(spec, config.mode)? {
        Resolved::Constrained => true,
        Resolved::MultiLabyrinth => spec.comm().is_some() && config.mode != Mode::Bernoulli,
        _ => false,
    };
    if constrained {
        feasibility_report(spec).map(Some)
    } else {
        Ok(None)
    }
}

/// Writes the certificate and returns exit 2 when a constrained completion is infeasible.
fn precheck_feasibility(
    spec: &PartialChainSpec,
    config: &RunConfig,
    stdout: &mut dyn Write,
) -> Result<Option<ExitStatus>> {
    match constrained_feasibility(spec, config)? {
        Some(rep) if !rep.all_feasible() => {
            emit(config.output.as_deref(), &(serde_json::to_string_pretty(&rep)? + "\n"), stdout)?;
            Ok(Some(ExitStatus::Infeasible))
        }
        _ => Ok(None),
    }
}

fn infeasible_without_certificate(
    spec: &PartialChainSpec,
    config: &RunConfig,
    stderr: &mut dyn Write,
) -> Result<Option<ExitStatus>> {
    match constrained_feasibility(spec, config)? {
        Some(rep) if !rep.all_feasible() => {
            writeln!(stderr, "error: support constraints are infeasible; run `feasibility` for the certificate")?;
            Ok(Some(ExitStatus::Infeasible))
        }
        _ => Ok(None),
    }
}

fn describe(c: &crate::model::Check) -> String {
    match (c.residual, c.detail.is_empty()) {
        (Some(r), true) => format!("residual {r:.3e}"),
        (Some(r), false) => format!("residual {r:.3e}, {}", c.detail),
        (None, _) => c.detail.clone(),
    }
}

fn qsd_table(reports: &[QsdReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:>8} {:>12} {:>12} {:>12} {:>12}", "side", "rho", "geometric", "exit law", "independence", "conditional");
    for r in reports {
        let side = match r.side {
            crate::qsd::Side::Visible => "visible",
            crate::qsd::Side::Hidden => "hidden",
        };
        let _ = writeln!(
            s,
            "{:<8} {:>8.4} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}",
            side, r.rho, r.geometric_residual, r.exit_law_residual, r.independence_residual, r.conditional_residual
        );
    }
    s
}

fn simulation_summary(cmp: &Comparison, config: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "steps {} seed {}: {}", config.steps, config.seed, cmp.verdict);
    for c in &cmp.criteria {
        let _ = writeln!(
            s,
            "  {:<26} {:<4} {:.4} (threshold {}) {}",
            c.name,
            if c.passed { "ok" } else { "FAIL" },
            c.statistic,
            c.threshold,
            c.detail
        );
    }
    s
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn matrix_table(s: &mut String, labels: &[String], m: &ndarray::Array2<f64>) {
    let _ = writeln!(s, "| | {} |", labels.join(" | "));
    let _ = writeln!(s, "|---|{}", "---|".repeat(labels.len()));
    for (a, row) in m.outer_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.6}")).collect();
        let _ = writeln!(s, "| {} | {} |", labels[a], cells.join(" | "));
    }
}

/// Full pipeline as Markdown, with the first failing stage's exit status.
fn report(spec: &PartialChainSpec, validation: &ValidationReport, config: &RunConfig) -> Result<(String, ExitStatus)> {
    let mut s = String::new();
    let name = config.input.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let _ = writeln!(s, "# Labyrinth report: {name}\n");

    let _ = writeln!(s, "## Hypotheses\n");
    let _ = writeln!(s, "| check | result | residual |\n|---|---|---|");
    for c in &validation.checks {
        let res = c.residual.map(|r| format!("{r:.3e}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "| {} | {} | {} |", c.name, pass(c.passed), res);
    }
    s.push('\n');
    if !validation.all_passed() {
        let _ = writeln!(s, "Hypotheses fail; later stages skipped.");
        return Ok((s, ExitStatus::Hypothesis));
    }

    let _ = writeln!(s, "## Feasibility\n");
    if spec.comm().is_some() && !spec.is_hidden_only() {
        let rep = feasibility_report(spec)?;
        let verdict = if rep.all_feasible() { "feasible" } else { "infeasible" };
        let _ = writeln!(s, "Support constraints: {verdict}.\n");
        if !rep.all_feasible() {
            let _ = writeln!(s, "```json\n{}\n```\n", serde_json::to_string_pretty(&rep)?);
            return Ok((s, ExitStatus::Infeasible));
        }
    } else {
        let _ = writeln!(s, "No support constraints to check.\n");
    }

    let completion = match complete_with_mode(spec, config.mode, &config.constrained_options()) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(s, "## Completion\n\nFailed: {e}");
            return Ok((s, status_of(&e)));
        }
    };
    let chain = &completion.chain;
    let mode = serde_json::to_value(completion.resolved)?;
    let _ = writeln!(s, "## Completion\n\nMode: {}.\n", mode.as_str().unwrap_or_default());
    let labels: Vec<String> = (0..chain.states().len()).map(|k| chain.states().label(k).to_string()).collect();
    matrix_table(&mut s, &labels, &chain.full_matrix());
    s.push('\n');
    let pi: Vec<String> = chain.pi().iter().map(|x| format!("{x:.6}")).collect();
    let _ = writeln!(s, "Stationary law: ({}).\n", pi.join(", "));
    for (name, r) in chain.identity_residuals() {
        let _ = writeln!(s, "- {name}: {r:.3e}");
    }
    s.push('\n');

    let e = entropy_full(chain);
    let _ = writeln!(s, "## Entropy\n");
    let _ = writeln!(s, "| quantity | value |\n|---|---|");
    let _ = writeln!(s, "| h(X) | {:.9} |", e.h_x);
    let _ = writeln!(s, "| h(Z) | {:.9} |", e.h_z);
    let _ = writeln!(s, "| H' | {:.9} |", e.h_prime);
    let _ = writeln!(s, "| H' identity residual | {:.3e} |", e.identity_residual);
    let _ = writeln!(s, "| decomposition residual | {:.3e} |\n", e.decomposition_residual);

    if spec.is_hidden_only() {
        let _ = writeln!(s, "No visible states: quasi-stationarity and simulation do not apply.");
        return Ok((s, ExitStatus::Success));
    }

    let reports = [
        qsd_report_visible(chain, config.horizon)?,
        qsd_report_hidden(chain, config.horizon)?,
    ];
    let qsd_ok = reports.iter().all(|r| r.max_residual() <= config.tol);
    let _ = writeln!(s, "## Quasi-stationarity (horizon {})\n", config.horizon);
    let _ = writeln!(s, "```\n{}```\n", qsd_table(&reports));
    let _ = writeln!(s, "Result: {}.\n", pass(qsd_ok));

    let trace = simulate_splice(chain, config.steps, config.seed)?;
    let cmp = compare_laws(&trace, chain)?;
    let _ = writeln!(s, "## Simulation\n");
    let _ = writeln!(s, "{} steps, seed {}: **{}**.\n", config.steps, config.seed, cmp.verdict);
    let _ = writeln!(s, "| criterion | result | statistic | threshold |\n|---|---|---|---|");
    for c in &cmp.criteria {
        let _ = writeln!(s, "| {} | {} | {:.4} | {} |", c.name, pass(c.passed), c.statistic, c.threshold);
    }

    let status = if !qsd_ok {
        ExitStatus::Hypothesis
    } else if cmp.verdict == SimVerdict::Fail {
        ExitStatus::SimulationFail
    } else {
        ExitStatus::Success
    };
    Ok((s, status))
}

/// Parses `args` and runs; the entry point of the binary.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli.into(), stdout, stderr),
        Err(e) if e.use_stderr() => {
            let _ = write!(stderr, "{e}");
            ExitStatus::Structural
        }
        Err(e) => {
            let _ = write!(stdout, "{e}");
            ExitStatus::Success
        }
    }
}
