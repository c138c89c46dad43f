//! `planc`: batch front end for the planning-model pipeline.
//!
//! Subcommands cover the full path from annotated model to checked
//! plan: `validate` runs the profile rules, `generate` compiles a
//! model (and optional instance) to PDDL files, `solve` finds a
//! cost-optimal plan, `check` replays a plan file, `fmt` reprints PDDL
//! canonically, and `parse` is a bare syntax check.
//!
//! Exit codes, fixed for scripting: 0 success, 1 I/O or parse failure,
//! 2 findings (diagnostics with the input loaded), 3 unsolvable,
//! 4 search resource limit. Diagnostics go to standard error;
//! machine-consumable results (costs, formatted text, JSON) go to
//! standard output.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use planc_core::compile::{compile_domain, compile_problem, load_instance};
use planc_core::diag::{has_errors, Diagnostic};
use planc_core::ingest::load_model;
use planc_core::pddl::{
    fmt_number, parse_domain, parse_problem, parse_problem_standalone, print_domain,
    print_problem, PddlDomain, PddlProblem,
};
use planc_core::planner::{
    ground, parse_plan, print_plan, solve, validate_plan, GroundTask, PlanReport, SolveOutcome,
    DEFAULT_EXPANSION_CAP,
};
use planc_core::validate::{validate, RuleId, RuleSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_FAILURE: u8 = 1;
const EXIT_FINDINGS: u8 = 2;
const EXIT_UNSOLVABLE: u8 = 3;
const EXIT_LIMIT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "planc",
    version,
    about = "Validate planning-annotated models, generate PDDL, solve and check plans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file against the profile rules.
    Validate(ValidateArgs),
    /// Compile a model (and optional instance) to PDDL files.
    Generate(GenerateArgs),
    /// Find a cost-optimal plan for a domain/problem pair.
    Solve(SolveArgs),
    /// Replay a plan file against a domain/problem pair.
    Check(CheckArgs),
    /// Reprint PDDL files in canonical form on standard output.
    Fmt(FilesArgs),
    /// Syntax-check PDDL files and report problems only.
    Parse(FilesArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Model file (`.pm1`).
    model: PathBuf,
    /// `modeling` (P01-P09), `generation` (all rules), or a
    /// comma-separated list such as `P01,P07`.
    #[arg(long, default_value = "modeling")]
    rules: String,
    /// `text` prints findings to standard error; `json` prints them as
    /// a JSON array on standard output.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct GenerateArgs {
    /// Model file (`.pm1`).
    model: PathBuf,
    /// Instance file (`.pi1`); adds `problem.pddl` to the output.
    instance: Option<PathBuf>,
    /// Output directory for `domain.pddl` (and `problem.pddl`).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Domain file (`.pddl`).
    domain: PathBuf,
    /// Problem file (`.pddl`).
    problem: PathBuf,
    /// Where to write the plan.
    #[arg(long, default_value = "plan.txt")]
    out: PathBuf,
    /// Search expansion budget.
    #[arg(long, default_value_t = DEFAULT_EXPANSION_CAP, value_parser = parse_cap)]
    cap: usize,
    /// Shell command template run instead of the built-in solver;
    /// `{domain}`, `{problem}` and `{plan}` expand to the three paths.
    /// The plan the command leaves at `{plan}` is checked, not trusted.
    #[arg(long)]
    external_planner: Option<String>,
}

#[derive(Args)]
struct CheckArgs {
    /// Domain file (`.pddl`).
    domain: PathBuf,
    /// Problem file (`.pddl`).
    problem: PathBuf,
    /// Plan file, one `(action args…)` step per line.
    plan: PathBuf,
}

#[derive(Args)]
struct FilesArgs {
    /// PDDL files; domain or problem is detected per file.
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Generate(args) => cmd_generate(&args),
        Command::Solve(args) => cmd_solve(&args),
        Command::Check(args) => cmd_check(&args),
        Command::Fmt(args) => cmd_fmt(&args),
        Command::Parse(args) => cmd_parse(&args),
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn report(diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{d}");
    }
}

/// Replaces `path` in one rename so readers never observe a half-written
/// file; the temporary lives in the target directory to stay on one
/// filesystem.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(text.as_bytes())
        .with_context(|| format!("writing {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

fn parse_rules(spec: &str) -> Result<RuleSet> {
    match spec {
        "modeling" => Ok(RuleSet::modeling()),
        "generation" => Ok(RuleSet::generation()),
        list => {
            let ids = list
                .split(',')
                .map(|part| part.parse::<RuleId>())
                .collect::<Result<Vec<_>, _>>()?;
            Ok(RuleSet::from_ids(ids))
        }
    }
}

fn parse_cap(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("the expansion cap must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(err) => Err(err.to_string()),
    }
}

fn cmd_validate(args: &ValidateArgs) -> Result<u8> {
    let rules = parse_rules(&args.rules)?;
    let text = read_file(&args.model)?;
    let diags = match load_model(&text) {
        Ok(model) => validate(&model, &rules),
        Err(diags) => {
            // The file never became a model; that is a load failure,
            // not a finding about one.
            report(&diags);
            return Ok(EXIT_FAILURE);
        }
    };
    match args.format {
        Format::Text => report(&diags),
        Format::Json => println!("{}", serde_json::to_string_pretty(&diags)?),
    }
    Ok(if has_errors(&diags) {
        EXIT_FINDINGS
    } else {
        EXIT_OK
    })
}

fn cmd_generate(args: &GenerateArgs) -> Result<u8> {
    let text = read_file(&args.model)?;
    let model = match load_model(&text) {
        Ok(model) => model,
        Err(diags) => {
            report(&diags);
            return Ok(EXIT_FAILURE);
        }
    };
    let diags = validate(&model, &RuleSet::generation());
    if has_errors(&diags) {
        report(&diags);
        return Ok(EXIT_FINDINGS);
    }
    let domains = model.domains();
    let domain_el = match domains.as_slice() {
        [one] => *one,
        many => {
            let names: Vec<&str> = many.iter().map(|e| e.name.as_str()).collect();
            eprintln!(
                "error: the model annotates {} packages as domains ({}); generation needs exactly one",
                names.len(),
                names.join(", ")
            );
            return Ok(EXIT_FINDINGS);
        }
    };
    let domain = match compile_domain(&model, &domain_el.id) {
        Ok(domain) => domain,
        Err(diags) => {
            report(&diags);
            return Ok(EXIT_FINDINGS);
        }
    };
    // Compile everything before writing anything: a failure after the
    // first file would leave the output directory half-updated.
    let problem = match &args.instance {
        None => None,
        Some(path) => {
            let text = read_file(path)?;
            let (name, data) = match load_instance(&text) {
                Ok(loaded) => loaded,
                Err(diags) => {
                    report(&diags);
                    return Ok(EXIT_FAILURE);
                }
            };
            match compile_problem(&domain, &data, &name) {
                Ok(problem) => Some(problem),
                Err(diags) => {
                    report(&diags);
                    return Ok(EXIT_FINDINGS);
                }
            }
        }
    };
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    write_atomic(&args.out.join("domain.pddl"), &print_domain(&domain))?;
    if let Some(problem) = &problem {
        write_atomic(&args.out.join("problem.pddl"), &print_problem(problem))?;
    }
    Ok(EXIT_OK)
}

/// Parses a domain/problem pair and grounds it. Parse failures exit 1
/// via `Err`-like early returns; grounding findings exit 2.
fn load_task(domain_path: &Path, problem_path: &Path) -> Result<Result<GroundTask, u8>> {
    let domain_text = read_file(domain_path)?;
    let domain = match parse_domain(&domain_text) {
        Ok(domain) => domain,
        Err(diags) => {
            report(&diags);
            return Ok(Err(EXIT_FAILURE));
        }
    };
    let problem_text = read_file(problem_path)?;
    let problem = match parse_problem(&problem_text, &domain) {
        Ok(problem) => problem,
        Err(diags) => {
            report(&diags);
            return Ok(Err(EXIT_FAILURE));
        }
    };
    match ground(&domain, &problem) {
        Ok(task) => Ok(Ok(task)),
        Err(diags) => {
            report(&diags);
            Ok(Err(EXIT_FINDINGS))
        }
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    if let Some(template) = &args.external_planner {
        return solve_external(args, template);
    }
    let task = match load_task(&args.domain, &args.problem)? {
        Ok(task) => task,
        Err(code) => return Ok(code),
    };
    match solve(&task, args.cap) {
        SolveOutcome::Solved(plan) => {
            write_atomic(&args.out, &print_plan(&task, &plan))?;
            println!("{}", fmt_number(plan.total_cost));
            Ok(EXIT_OK)
        }
        SolveOutcome::Unsolvable => {
            eprintln!("no plan exists: the goal is unreachable from the initial state");
            Ok(EXIT_UNSOLVABLE)
        }
        SolveOutcome::ResourceLimit => {
            eprintln!(
                "search stopped at the expansion cap ({}); raise --cap to search further",
                args.cap
            );
            Ok(EXIT_LIMIT)
        }
    }
}

/// Single-quotes `text` for `sh -c`, closing and reopening around any
/// embedded quote.
fn sh_quote(text: &str) -> String {
    format!("'{}'", text.replace('\'', r"'\''"))
}

fn external_command(template: &str, domain: &Path, problem: &Path, plan: &Path) -> String {
    template
        .replace("{domain}", &sh_quote(&domain.display().to_string()))
        .replace("{problem}", &sh_quote(&problem.display().to_string()))
        .replace("{plan}", &sh_quote(&plan.display().to_string()))
}

fn solve_external(args: &SolveArgs, template: &str) -> Result<u8> {
    let task = match load_task(&args.domain, &args.problem)? {
        Ok(task) => task,
        Err(code) => return Ok(code),
    };
    let command = external_command(template, &args.domain, &args.problem, &args.out);
    let status = std::process::Command::new("sh")
        .arg("-c")
        .arg(&command)
        .status()
        .with_context(|| format!("running external planner `{command}`"))?;
    if !status.success() {
        eprintln!("external planner failed with {status}");
        return Ok(EXIT_FAILURE);
    }
    let text = read_file(&args.out).context("external planner left no plan file")?;
    let steps = match parse_plan(&text) {
        Ok(steps) => steps,
        Err(diags) => {
            report(&diags);
            return Ok(EXIT_FAILURE);
        }
    };
    check_steps(&task, &steps)
}

fn check_steps(task: &GroundTask, steps: &[String]) -> Result<u8> {
    match validate_plan(task, steps) {
        PlanReport::Accepted { cost } => {
            println!("{}", fmt_number(cost));
            Ok(EXIT_OK)
        }
        PlanReport::UnknownAction { step, name } => {
            eprintln!("step {step}: no ground action named `{name}`");
            Ok(EXIT_FINDINGS)
        }
        PlanReport::RejectedStep {
            step,
            action,
            unmet,
        } => {
            eprintln!(
                "step {step}: `{action}` is not applicable; unmet: {}",
                unmet.join(", ")
            );
            Ok(EXIT_FINDINGS)
        }
        PlanReport::RejectedGoal { unmet } => {
            eprintln!("plan executes but the goal is not satisfied; unmet: {}", unmet.join(", "));
            Ok(EXIT_FINDINGS)
        }
    }
}

fn cmd_check(args: &CheckArgs) -> Result<u8> {
    let task = match load_task(&args.domain, &args.problem)? {
        Ok(task) => task,
        Err(code) => return Ok(code),
    };
    let text = read_file(&args.plan)?;
    let steps = match parse_plan(&text) {
        Ok(steps) => steps,
        Err(diags) => {
            report(&diags);
            return Ok(EXIT_FAILURE);
        }
    };
    check_steps(&task, &steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PddlKind {
    Domain,
    Problem,
}

/// Guesses which grammar a PDDL file uses from whichever of
/// `(domain`/`(problem` appears first; the parser still has the final
/// word on whether the file is well-formed.
fn detect_kind(text: &str) -> PddlKind {
    let lower = text.to_ascii_lowercase();
    match (lower.find("(domain"), lower.find("(problem")) {
        (Some(d), Some(p)) if p < d => PddlKind::Problem,
        (Some(_), _) => PddlKind::Domain,
        (None, Some(_)) => PddlKind::Problem,
        (None, None) => PddlKind::Domain,
    }
}

enum Parsed {
    Domain(Box<PddlDomain>),
    Problem(Box<PddlProblem>),
}

fn parse_any(text: &str) -> Result<Parsed, Vec<Diagnostic>> {
    match detect_kind(text) {
        PddlKind::Domain => parse_domain(text).map(|d| Parsed::Domain(Box::new(d))),
        PddlKind::Problem => {
            parse_problem_standalone(text).map(|p| Parsed::Problem(Box::new(p)))
        }
    }
}

fn cmd_fmt(args: &FilesArgs) -> Result<u8> {
    let mut out = String::new();
    for path in &args.files {
        let text = read_file(path)?;
        match parse_any(&text) {
            Ok(Parsed::Domain(d)) => out.push_str(&print_domain(&d)),
            Ok(Parsed::Problem(p)) => out.push_str(&print_problem(&p)),
            Err(diags) => {
                eprintln!("{}:", path.display());
                report(&diags);
                return Ok(EXIT_FAILURE);
            }
        }
    }
    print!("{out}");
    Ok(EXIT_OK)
}

fn cmd_parse(args: &FilesArgs) -> Result<u8> {
    let mut code = EXIT_OK;
    for path in &args.files {
        let text = read_file(path)?;
        if let Err(diags) = parse_any(&text) {
            eprintln!("{}:", path.display());
            report(&diags);
            code = EXIT_FAILURE;
        }
    }
    Ok(code)
}
