//! `opspace`: run operator-space criteria on space files, verify the norm
//! identity suites, and regress the example corpus.
//!
//! Exit codes: 0 holds (or all suites/entries pass), 1 violated (or a
//! mismatch), 2 inconclusive or unsupported, 3 input error.

mod io;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use opspace::corpus::{default_corpus, emit_space_definitions, run_corpus};
use opspace::criteria::{run_check, CheckReport, CheckRequest, CriterionId, Verdict};
use opspace::formulas::{verify_formulas, FormulaOptions};
use opspace::opspace::DEFAULT_RANK_TOL;
use opspace::{Error, SearchConfig, Space, C64};
use serde::{Deserialize, Serialize};

use crate::io::{Envelope, RunManifest};

const EXIT_INPUT: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
}

#[derive(Parser)]
#[command(name = "opspace", version, about = "Decision procedures for concrete operator spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one criterion on a space-definition file.
    Check(CheckArgs),
    /// Like `check`, keeping the per-restart search trace in the report.
    Search(CheckArgs),
    /// Run the block-matrix norm identity suites.
    VerifyFormulas(FormulaArgs),
    /// Run every corpus entry and compare against its expected verdicts.
    Corpus(CorpusArgs),
}

#[derive(Args, Clone)]
struct Budget {
    /// Violation tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Highest matrix level searched.
    #[arg(long)]
    levels: Option<usize>,
    /// Search ball radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Random restarts per level.
    #[arg(long)]
    restarts: Option<usize>,
    /// Ascent steps per restart.
    #[arg(long)]
    ascent_steps: Option<usize>,
    /// Master seed.
    #[arg(long, env = "OPSPACE_SEED")]
    seed: Option<u64>,
}

impl Budget {
    fn config(&self) -> SearchConfig {
        let mut c = SearchConfig::default();
        if let Some(v) = self.tolerance {
            c.tolerance = v;
        }
        if let Some(v) = self.levels {
            c.max_level = v;
        }
        if let Some(v) = self.radius {
            c.radius = v;
        }
        if let Some(v) = self.restarts {
            c.restarts = v;
        }
        if let Some(v) = self.ascent_steps {
            c.ascent_steps = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c
    }
}

#[derive(Args, Clone)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Clone)]
struct CheckArgs {
    /// Space-definition JSON file.
    space: PathBuf,
    /// Criterion id, e.g. `unitary-four-rotation`.
    criterion: String,
    /// Use the normalized basis element with this index as the unit.
    #[arg(long)]
    unit_index: Option<usize>,
    /// Matrix file: `x` for positive/adjoint, `w` for the multiplier checks.
    #[arg(long)]
    element: Option<PathBuf>,
    /// Matrix file: `z` for the adjoint check.
    #[arg(long)]
    partner: Option<PathBuf>,
    /// Matrix file: coefficient matrix of a linear map on the space.
    #[arg(long)]
    map: Option<PathBuf>,
    /// JSON structure tensor `[i][j] = coeffs(m(B_i, B_j))`.
    #[arg(long)]
    tensor: Option<PathBuf>,
    /// Relative rank tolerance for the basis.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    rank_tol: f64,
    #[command(flatten)]
    budget: Budget,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Clone)]
struct FormulaArgs {
    /// Trials per suite (default 200 pairs, 100 elements).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, env = "OPSPACE_SEED")]
    seed: Option<u64>,
    #[arg(long, hide = true)]
    inject_sign_bug: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Clone)]
struct CorpusArgs {
    /// Run only the named entries (repeatable).
    #[arg(long)]
    only: Vec<String>,
    /// Also write each entry's space definition into this directory.
    #[arg(long)]
    emit_dir: Option<PathBuf>,
    #[command(flatten)]
    budget: Budget,
    #[command(flatten)]
    output: Output,
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::HoldsWithinBudget => 0,
        Verdict::Violated => 1,
        Verdict::Inconclusive | Verdict::UnsupportedLevel => 2,
    }
}

fn set_threads(n: Option<usize>) -> Result<(), Error> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn emit<R: Serialize>(manifest: RunManifest, report: R, text: impl FnOnce(&R) -> String) -> Result<(), Error> {
    let out = manifest.output.clone();
    let body = match manifest.format {
        Format::Json => Envelope::new(manifest, report).to_json(),
        Format::Text => text(&report),
    };
    io::write_output(out.as_deref(), &body)
}

fn unit_from_index(space: &Space, i: usize) -> Result<Vec<C64>, Error> {
    if i >= space.dim() {
        return Err(Error::InvalidInput(format!("unit index {i} out of range for dimension {}", space.dim())));
    }
    let mut v = vec![C64::new(0.0, 0.0); space.dim()];
    v[i] = C64::new(1.0, 0.0);
    let n = space.element_norm(&v)?;
    v[i] = C64::new(1.0 / n, 0.0);
    Ok(v)
}

fn build_request(
    a: &CheckArgs,
    space: &Space,
    criterion: CriterionId,
    keep_trace: bool,
) -> Result<CheckRequest, Error> {
    let mut req = CheckRequest::new(criterion);
    req.keep_trace = keep_trace;
    if let Some(i) = a.unit_index {
        req = req.with_unit(unit_from_index(space, i)?);
    }
    if let Some(p) = &a.element {
        req = req.with_element(io::load_matrix(p)?);
    }
    if let Some(p) = &a.partner {
        req = req.with_partner(io::load_matrix(p)?);
    }
    if let Some(p) = &a.map {
        req = req.with_map(io::load_map(p)?);
    }
    if let Some(p) = &a.tensor {
        req = req.with_tensor(io::load_tensor(p)?);
    }
    Ok(req)
}

fn inputs(a: &CheckArgs) -> Vec<PathBuf> {
    let mut v = vec![a.space.clone()];
    v.extend([&a.element, &a.partner, &a.map, &a.tensor].into_iter().flatten().cloned());
    v
}

fn cmd_check(a: &CheckArgs, keep_trace: bool) -> Result<u8, Error> {
    set_threads(a.output.threads)?;
    let criterion: CriterionId = a.criterion.parse()?;
    let space = io::load_space_file(&a.space, a.rank_tol)?;
    let req = build_request(a, &space, criterion, keep_trace)?;
    let cfg = a.budget.config();
    let report: CheckReport = run_check(&space, &req, &cfg)?;
    let code = verdict_code(report.verdict);
    let manifest = RunManifest {
        command: if keep_trace { "search" } else { "check" }.into(),
        inputs: inputs(a),
        config: Some(cfg),
        output: a.output.out.clone(),
        format: a.output.format,
    };
    emit(manifest, report, render::check)?;
    Ok(code)
}

fn cmd_verify_formulas(a: &FormulaArgs) -> Result<u8, Error> {
    set_threads(a.output.threads)?;
    let mut opts = FormulaOptions::default();
    if let Some(n) = a.trials {
        opts = opts.with_trials(n);
    }
    if let Some(s) = a.seed {
        opts.seed = s;
    }
    opts.inject_sign_bug = a.inject_sign_bug;
    let report = verify_formulas(&opts)?;
    let code = if report.passed { 0 } else { 1 };
    let manifest = RunManifest {
        command: "verify-formulas".into(),
        inputs: Vec::new(),
        config: None,
        output: a.output.out.clone(),
        format: a.output.format,
    };
    emit(manifest, report, render::formulas)?;
    Ok(code)
}

fn cmd_corpus(a: &CorpusArgs) -> Result<u8, Error> {
    set_threads(a.output.threads)?;
    let mut entries = default_corpus()?;
    if !a.only.is_empty() {
        for name in &a.only {
            if !entries.iter().any(|e| &e.name == name) {
                let known: Vec<&str> = entries.iter().map(|e| e.name.as_str()).collect();
                return Err(Error::InvalidInput(format!("unknown corpus entry `{name}`; known: {}", known.join(", "))));
            }
        }
        entries.retain(|e| a.only.contains(&e.name));
    }
    if let Some(dir) = &a.emit_dir {
        emit_space_definitions(&entries, dir).map_err(|e| Error::InvalidInput(format!("{}: {e}", dir.display())))?;
    }
    let cfg = a.budget.config();
    let report = run_corpus(&entries, &cfg);
    let code = if report.all_match { 0 } else { 1 };
    let manifest = RunManifest {
        command: "corpus".into(),
        inputs: Vec::new(),
        config: Some(cfg),
        output: a.output.out.clone(),
        format: a.output.format,
    };
    emit(manifest, report, render::corpus)?;
    Ok(code)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match &cli.command {
        Command::Check(a) => cmd_check(a, false),
        Command::Search(a) => cmd_check(a, true),
        Command::VerifyFormulas(a) => cmd_verify_formulas(a),
        Command::Corpus(a) => cmd_corpus(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
