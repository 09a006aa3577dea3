//! `casecred`: validate, lint, score, assess, roll up and report on an
//! assurance case from the command line.

use std::fs::OpenOptions;
use std::io::{self, BufRead, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use casecred_core::assessment::{
    assessment_prompts, check_assessment, rubric_text, AssessmentLog, ClaimAssessment, Dimension, LogEntry,
};
use casecred_core::evidence::{level_label, score_evidence, score_library};
use casecred_core::io::{
    export_tabular, import_tabular, parse_case, parse_document, read_csv, serialize_case, to_canonical_json,
    to_canonical_line, write_csv, ParseError,
};
use casecred_core::lifecycle::{
    apply_staleness, classify, diff_cases, mark_stale, ChangeSet, TriggerEvent, TriggerKind, TriggerLog,
};
use casecred_core::lint::lint_case_with;
use casecred_core::radar::render_radar_svg;
use casecred_core::report::{analyze, format_score, render_json, render_markdown, SuggestedAction};
use casecred_core::rollup::{rollup, spoke_values, RollupOptions, Strategy};
use casecred_core::{traverse, validate_case, PersonRef, SafetyCase, TraversalOrder};

#[derive(Parser, Debug)]
#[command(name = "casecred", version, about = "Assurance case assessment toolkit")]
struct Cli {
    /// Case document (.case.json).
    #[arg(long, global = true)]
    case: Option<PathBuf>,
    /// Evaluation date for evidence scoring and reports (YYYY-MM-DD). Defaults to today.
    #[arg(long, global = true)]
    as_of: Option<NaiveDate>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Exit with status 2 when validation or lint errors are present.
    #[arg(long, global = true)]
    strict: bool,
    /// Assessment log (JSON lines, append-only).
    #[arg(long, global = true)]
    assessments: Option<PathBuf>,
    /// Trigger log (JSON lines, append-only).
    #[arg(long, global = true)]
    triggers: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Jsonl,
    Markdown,
    Svg,
    Csv,
}

#[derive(Args, Debug, Clone)]
struct RollupArgs {
    /// conservative_min or weighted_mean.
    #[arg(long, default_value = "conservative_min")]
    strategy: String,
    /// Scores below this are reported as findings.
    #[arg(long, default_value_t = 2)]
    threshold: u8,
    /// JSON file with `weights` and `overrides`.
    #[arg(long)]
    options: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the case against its structural rules.
    Validate,
    /// Print the case in canonical form.
    Fmt {
        /// Rewrite the case file in place.
        #[arg(long)]
        write: bool,
    },
    /// Report argument-quality findings.
    Lint,
    /// Score every evidence record for recency, ownership and control.
    ScoreEvidence,
    /// Record claim assessments.
    Assess {
        /// JSON lines (or a JSON array) of assessment records.
        #[arg(long)]
        from_file: Option<PathBuf>,
        /// Claim to assess interactively.
        #[arg(long)]
        claim: Option<String>,
    },
    /// Aggregate assessments up the claim tree.
    Rollup(RollupArgs),
    /// Build the assessment report.
    Report {
        #[command(flatten)]
        rollup: RollupArgs,
        /// JSON array of {location, text} suggested actions.
        #[arg(long)]
        actions: Option<PathBuf>,
    },
    /// Render family spoke values as SVG.
    Radar(RollupArgs),
    /// Compare two case versions and classify the changes.
    Diff {
        old: PathBuf,
        new: PathBuf,
        /// Append the resulting stale marks to the assessment log.
        #[arg(long)]
        apply: bool,
    },
    /// Record an external event that calls for re-assessment.
    Trigger {
        /// hardware, software, odd or use_case.
        #[arg(long)]
        kind: String,
        /// Claim ids or family tags, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        claims: Vec<String>,
        #[arg(long, default_value = "")]
        description: String,
        #[arg(long)]
        id: Option<String>,
    },
    /// Export the case as a seven-column table.
    Export,
    /// Build a case from a seven-column table.
    Import {
        csv: PathBuf,
        /// Creation date given to imported evidence records.
        #[arg(long)]
        evidence_created: NaiveDate,
    },
    /// Serve the case over HTTP on loopback.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[command(flatten)]
        rollup: RollupArgs,
        #[arg(long)]
        actions: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn read_text_or_empty(path: &Path) -> Result<String> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(String::new()),
        Err(e) => Err(CliError::Io(format!("cannot read {}: {e}", path.display()))),
    }
}

fn append_lines(path: &Path, lines: &[String]) -> Result<()> {
    let io_err = |e: io::Error| CliError::Io(format!("cannot append to {}: {e}", path.display()));
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
    for line in lines {
        writeln!(f, "{line}").map_err(io_err)?;
    }
    Ok(())
}

fn parse_err(path: &Path, e: ParseError) -> CliError {
    CliError::Invalid(format!("{}: {e}", path.display()))
}

fn load_case_at(path: &Path) -> Result<SafetyCase> {
    parse_case(&read_bytes(path)?).map_err(|e| parse_err(path, e))
}

impl Cli {
    fn case_path(&self) -> Result<&Path> {
        self.case.as_deref().ok_or_else(|| CliError::Usage("--case <path> is required for this command".into()))
    }

    fn load_case(&self) -> Result<SafetyCase> {
        load_case_at(self.case_path()?)
    }

    fn as_of(&self) -> NaiveDate {
        self.as_of.unwrap_or_else(|| chrono::Local::now().date_naive())
    }

    fn log_path(&self) -> Result<&Path> {
        self.assessments
            .as_deref()
            .ok_or_else(|| CliError::Usage("--assessments <path> is required for this command".into()))
    }

    /// The assessment log, empty when no path was given or the file is absent.
    fn load_log(&self) -> Result<AssessmentLog> {
        match &self.assessments {
            None => Ok(AssessmentLog::new()),
            Some(p) => AssessmentLog::from_jsonl(&read_text_or_empty(p)?)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", p.display()))),
        }
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.output {
            Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
            None => {
                let mut out = io::stdout().lock();
                out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::Io(e.to_string()))
            }
        }
    }

    fn format_or(&self, default: Format, allowed: &[Format]) -> Result<Format> {
        let f = self.format.unwrap_or(default);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(CliError::Usage(format!("--format {f:?} is not supported by this command").to_lowercase()))
        }
    }
}

fn rollup_options(args: &RollupArgs) -> Result<RollupOptions> {
    let strategy: Strategy = args.strategy.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
    let mut opts = match &args.options {
        Some(p) => parse_document::<RollupOptionsFile>(&read_bytes(p)?).map_err(|e| parse_err(p, e))?.into_options(),
        None => RollupOptions::default(),
    };
    opts.strategy = strategy;
    opts.threshold = args.threshold;
    Ok(opts)
}

/// Weights and overrides read from `--options`.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RollupOptionsFile {
    #[serde(default)]
    weights: Vec<casecred_core::rollup::Weighting>,
    #[serde(default)]
    overrides: Vec<casecred_core::rollup::Override>,
}

impl RollupOptionsFile {
    fn into_options(self) -> RollupOptions {
        RollupOptions { weights: self.weights, overrides: self.overrides, ..RollupOptions::default() }
    }
}

fn load_actions(path: Option<&Path>) -> Result<Vec<SuggestedAction>> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => parse_document(&read_bytes(p)?).map_err(|e| parse_err(p, e)),
    }
}

fn cmd_validate(cli: &Cli) -> Result<()> {
    let path = cli.case_path()?;
    let bytes = read_bytes(path)?;
    let format = cli.format_or(Format::Text, &[Format::Text, Format::Json])?;
    let outcome = parse_case(&bytes).map(|case| (case.clone(), validate_case(&case)));
    let (valid, text, json) = match &outcome {
        Ok((case, report)) if report.is_empty() => (
            true,
            format!(
                "valid: {} claims, {} evidence items, {} links, version {}\n",
                case.claims.len(),
                case.evidence.len(),
                case.links.len(),
                case.version
            ),
            serde_json::json!({"valid": true, "version": case.version, "violations": []}),
        ),
        Ok((_, report)) | Err(ParseError::Semantic(report)) => {
            let lines: String = report.violations.iter().map(|v| format!("{} {}: {}\n", v.code.as_str(), v.location, v.message)).collect();
            (false, format!("invalid:\n{lines}"), serde_json::json!({"valid": false, "violations": report.violations}))
        }
        Err(e) => (false, format!("invalid: {e}\n"), serde_json::json!({"valid": false, "error": e.to_string()})),
    };
    cli.emit(&match format {
        Format::Json => to_canonical_json(&json),
        _ => text,
    })?;
    if !valid && cli.strict {
        return Err(CliError::Invalid("case is invalid".into()));
    }
    Ok(())
}

fn cmd_fmt(cli: &Cli, write: bool) -> Result<()> {
    let case = cli.load_case()?;
    let bytes = serialize_case(&case);
    if write {
        let path = cli.case_path()?;
        std::fs::write(path, &bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    } else {
        cli.emit(&String::from_utf8(bytes).expect("canonical output is UTF-8"))
    }
}

fn cmd_lint(cli: &Cli) -> Result<()> {
    let case = cli.load_case()?;
    let log = cli.load_log()?;
    let report = lint_case_with(&case, &log.current_list());
    let text: String = match cli.format_or(Format::Text, &[Format::Text, Format::Jsonl, Format::Json])? {
        Format::Jsonl => report.findings.iter().map(|f| to_canonical_line(f) + "\n").collect(),
        Format::Json => to_canonical_json(&report),
        _ if report.findings.is_empty() => "no lint findings\n".into(),
        _ => report.findings.iter().map(|f| format!("{f}\n")).collect(),
    };
    cli.emit(&text)?;
    if cli.strict && report.has_errors() {
        return Err(CliError::Invalid("lint errors present".into()));
    }
    Ok(())
}

fn cmd_score_evidence(cli: &Cli) -> Result<()> {
    let case = cli.load_case()?;
    let report = score_library(&case, cli.as_of()).map_err(|e| CliError::Invalid(e.to_string()))?;
    let text = match cli.format_or(Format::Text, &[Format::Text, Format::Json, Format::Jsonl])? {
        Format::Json => to_canonical_json(&report),
        Format::Jsonl => report.scores.iter().map(|s| to_canonical_line(s) + "\n").collect(),
        _ => {
            let mut out = format!("evidence status as of {}\n", report.as_of);
            for s in &report.scores {
                let trace: Vec<&str> = s.rule_trace.iter().map(|r| r.id()).collect();
                out += &format!("{}\t{}\t{}\t{}\n", s.evidence_id, s.score, level_label(s.score), trace.join(" > "));
            }
            for (level, n) in report.counts.iter().rev() {
                out += &format!("level {level} ({}): {n}\n", level_label(*level));
            }
            out
        }
    };
    cli.emit(&text)
}

/// Reads records from JSON lines or a single JSON array.
fn read_records(path: &Path) -> Result<Vec<ClaimAssessment>> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::Invalid(format!("{}: not UTF-8", path.display())))?;
    if text.trim_start().starts_with('[') {
        return parse_document(text.as_bytes()).map_err(|e| parse_err(path, e));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_document(l.as_bytes()).map_err(|e| CliError::Invalid(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

fn commit_log(cli: &Cli, before: u64, log: &AssessmentLog) -> Result<()> {
    let lines: Vec<String> = log.entries()[before as usize..].iter().map(LogEntry::to_line).collect();
    append_lines(cli.log_path()?, &lines)
}

fn cmd_assess(cli: &Cli, from_file: Option<&Path>, claim: Option<&str>) -> Result<()> {
    let case = cli.load_case()?;
    cli.log_path()?;
    let mut log = cli.load_log()?;
    let before = log.head();
    let records = match (from_file, claim) {
        (Some(p), None) => read_records(p)?,
        (None, Some(c)) => vec![interactive_assessment(&case, c, cli.as_of(), &mut io::stdin().lock(), &mut io::stderr())?],
        _ => return Err(CliError::Usage("assess needs exactly one of --from-file or --claim".into())),
    };
    // Check everything first so a bad record leaves the log untouched.
    for r in &records {
        check_assessment(&case, r).map_err(|e| CliError::Invalid(format!("{}: {e}", r.claim_id)))?;
    }
    for r in records {
        casecred_core::assessment::record_assessment(&case, &mut log, r).map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    commit_log(cli, before, &log)?;
    cli.emit(&format!("recorded {} assessment(s); log version {}\n", log.head() - before, log.head()))
}

fn prompt_line(input: &mut dyn BufRead, out: &mut dyn Write, question: &str) -> Result<String> {
    write!(out, "{question}").and_then(|_| out.flush()).map_err(|e| CliError::Io(e.to_string()))?;
    let mut line = String::new();
    let n = input.read_line(&mut line).map_err(|e| CliError::Io(e.to_string()))?;
    if n == 0 {
        return Err(CliError::Usage("input ended before the assessment was complete".into()));
    }
    Ok(line.trim().to_string())
}

fn ask_score(input: &mut dyn BufRead, out: &mut dyn Write, dim: Dimension) -> Result<Option<u8>> {
    loop {
        let answer = prompt_line(input, out, &format!("{dim} score (0-3 or na): "))?;
        match answer.to_ascii_lowercase().as_str() {
            "na" | "n/a" => return Ok(None),
            s => match s.parse::<u8>() {
                Ok(v) if v <= 3 => return Ok(Some(v)),
                _ => {
                    let _ = writeln!(out, "enter 0, 1, 2, 3 or na");
                }
            },
        }
    }
}

/// Walks an assessor through one claim: context, evidence status, prompts
/// and rubric, then the scores and summary.
fn interactive_assessment(
    case: &SafetyCase,
    claim_id: &str,
    as_of: NaiveDate,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<ClaimAssessment> {
    let claim = case.claim(claim_id).ok_or_else(|| CliError::Usage(format!("unknown claim `{claim_id}`")))?;
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(|e| CliError::Io(e.to_string()));
    w(out, format!("Claim {}: {}", claim.id, claim.text))?;
    if let Some(n) = &claim.justification_narrative {
        w(out, format!("Narrative: {n}"))?;
    }
    for l in &claim.limitations {
        w(out, format!("Limitation: {l}"))?;
    }
    for ca in &claim.counter_arguments {
        w(out, format!("Counter-argument: {} / Rejection: {}", ca.text, ca.rejection.as_deref().unwrap_or("(none)")))?;
    }
    for ev_id in case.linked_evidence(claim_id) {
        if let Some(ev) = case.evidence_item(ev_id.as_str()) {
            let status = score_evidence(ev, as_of).map(|s| s.score.to_string()).unwrap_or_else(|e| e.to_string());
            w(out, format!("Evidence {} ({}) status {}: {}", ev.id, ev.kind, status, ev.title))?;
        }
    }
    let prompts = assessment_prompts(case, claim_id).map_err(|e| CliError::Invalid(e.to_string()))?;
    for p in prompts {
        w(out, format!("- {}", p.text))?;
    }
    for dim in Dimension::ALL {
        w(out, format!("{dim} rubric:"))?;
        for level in 0..=3 {
            let cell = rubric_text(dim, level).expect("levels 0..=3 exist");
            w(out, format!("  {level} {}: {}", cell.title, cell.guidance.replace("\n\n", " ")))?;
        }
    }
    let procedural = ask_score(input, out, Dimension::Procedural)?;
    let implementation = ask_score(input, out, Dimension::Implementation)?;
    let na_justification = if procedural.is_none() || implementation.is_none() {
        Some(prompt_line(input, out, "N/A justification: ")?)
    } else {
        None
    };
    let summary = prompt_line(input, out, "Summary: ")?;
    let names = prompt_line(input, out, "Assessor name(s), comma separated: ")?;
    Ok(ClaimAssessment {
        claim_id: claim.id.clone(),
        procedural,
        implementation,
        procedural_na: procedural.is_none(),
        implementation_na: implementation.is_none(),
        na_justification,
        summary,
        assessors: names.split(',').map(str::trim).filter(|n| !n.is_empty()).map(PersonRef::new).collect(),
        assessed_at: as_of,
        case_version: case.version,
        stale: false,
    })
}

fn cmd_rollup(cli: &Cli, args: &RollupArgs) -> Result<()> {
    let case = cli.load_case()?;
    let opts = rollup_options(args)?;
    let result = rollup(&case, &cli.load_log()?.current_list(), &opts).map_err(|e| CliError::Invalid(e.to_string()))?;
    let text = match cli.format_or(Format::Text, &[Format::Text, Format::Json])? {
        Format::Json => to_canonical_json(&result),
        _ => {
            let mut out = format!("strategy {} threshold {}\n", result.strategy, result.threshold);
            for id in traverse(&case, TraversalOrder::Pre).map_err(|e| CliError::Invalid(e.to_string()))? {
                let node = &result.nodes[&id];
                out += &format!(
                    "{}\tP {}\tI {}\n",
                    id,
                    format_score(node.procedural_eff.as_ref()),
                    format_score(node.implementation_eff.as_ref())
                );
            }
            for l in &result.low_score_register {
                out += &format!("below threshold: {} {} {}\n", l.claim_id, l.dimension, l.score);
            }
            out
        }
    };
    cli.emit(&text)
}

fn cmd_report(cli: &Cli, args: &RollupArgs, actions: Option<&Path>) -> Result<()> {
    let case = cli.load_case()?;
    let opts = rollup_options(args)?;
    let actions = load_actions(actions)?;
    let report = analyze(&case, &cli.load_log()?, cli.as_of(), &opts, &actions).map_err(|e| CliError::Invalid(e.to_string()))?;
    let text = match cli.format_or(Format::Markdown, &[Format::Markdown, Format::Json, Format::Text])? {
        Format::Json => render_json(&report),
        _ => render_markdown(&report),
    };
    cli.emit(&text)
}

fn cmd_radar(cli: &Cli, args: &RollupArgs) -> Result<()> {
    let case = cli.load_case()?;
    let opts = rollup_options(args)?;
    let result = rollup(&case, &cli.load_log()?.current_list(), &opts).map_err(|e| CliError::Invalid(e.to_string()))?;
    let radar = spoke_values(&case, &result).map_err(|e| CliError::Invalid(e.to_string()))?;
    let text = match cli.format_or(Format::Svg, &[Format::Svg, Format::Json])? {
        Format::Json => to_canonical_json(&radar),
        _ => render_radar_svg(&radar).map_err(|e| CliError::Invalid(e.to_string()))?,
    };
    cli.emit(&text)
}

fn cmd_diff(cli: &Cli, old: &Path, new: &Path, apply: bool) -> Result<()> {
    let old_case = load_case_at(old)?;
    let new_case = load_case_at(new)?;
    let changes = diff_cases(&old_case, &new_case);
    let mut log = cli.load_log()?;
    let outcome =
        mark_stale(&old_case, &new_case, &log.current_list(), &changes, &[]).map_err(|e| CliError::Invalid(e.to_string()))?;
    if apply {
        cli.log_path()?;
        let before = log.head();
        apply_staleness(&mut log, &outcome);
        commit_log(cli, before, &log)?;
    }
    let text = match cli.format_or(Format::Text, &[Format::Text, Format::Json])? {
        Format::Json => {
            let items: Vec<serde_json::Value> = changes
                .items
                .iter()
                .map(|i| {
                    let mut v = serde_json::to_value(i).expect("change items serialize");
                    v["class"] = serde_json::to_value(classify(i)).expect("class serializes");
                    v
                })
                .collect();
            to_canonical_json(&serde_json::json!({"items": items, "outcome": outcome}))
        }
        _ => {
            let mut out = String::new();
            if changes.is_empty() {
                out += "no changes\n";
            }
            for i in &changes.items {
                let class = match classify(i) {
                    casecred_core::lifecycle::ChangeClass::Substantial => "substantial",
                    casecred_core::lifecycle::ChangeClass::Minor => "minor",
                };
                out += &format!("{}\t{}\t{}\n", i.kind, i.location, class);
            }
            for id in &outcome.newly_stale {
                out += &format!("stale: {id}\n");
            }
            out
        }
    };
    cli.emit(&text)
}

fn cmd_trigger(cli: &Cli, kind: &str, claims: &[String], description: &str, id: Option<&str>) -> Result<()> {
    let case = cli.load_case()?;
    let kind: TriggerKind = kind.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
    let trigger_path =
        cli.triggers.as_deref().ok_or_else(|| CliError::Usage("--triggers <path> is required for this command".into()))?;
    let mut triggers = TriggerLog::from_jsonl(&read_text_or_empty(trigger_path)?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", trigger_path.display())))?;
    let event = TriggerEvent {
        id: id.map(str::to_string).unwrap_or_else(|| triggers.next_id()),
        kind,
        description: description.to_string(),
        affected: claims.iter().map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect(),
        raised_at: cli.as_of(),
    };
    let mut log = cli.load_log()?;
    let outcome = mark_stale(&case, &case, &log.current_list(), &ChangeSet::default(), std::slice::from_ref(&event))
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    triggers.append(&case, event.clone()).map_err(|e| CliError::Invalid(e.to_string()))?;
    append_lines(trigger_path, &[to_canonical_line(&event)])?;
    if cli.assessments.is_some() {
        let before = log.head();
        apply_staleness(&mut log, &outcome);
        commit_log(cli, before, &log)?;
    }
    let mut out = format!("trigger {} recorded\n", event.id);
    for id in &outcome.newly_stale {
        out += &format!("stale: {id}\n");
    }
    cli.emit(&out)
}

fn cmd_export(cli: &Cli) -> Result<()> {
    cli.format_or(Format::Csv, &[Format::Csv])?;
    let case = cli.load_case()?;
    let rows = export_tabular(&case);
    cli.emit(&write_csv(&rows))
}

fn cmd_import(cli: &Cli, csv: &Path, created: NaiveDate) -> Result<()> {
    let rows = read_csv(&read_bytes(csv)?).map_err(|e| CliError::Invalid(format!("{}: {e}", csv.display())))?;
    let case = import_tabular(&rows, created).map_err(|e| CliError::Invalid(format!("{}: {e}", csv.display())))?;
    cli.emit(&String::from_utf8(serialize_case(&case)).expect("canonical output is UTF-8"))
}

fn cmd_serve(cli: &Cli, host: IpAddr, port: u16, args: &RollupArgs, actions: Option<&Path>) -> Result<()> {
    let mut config = casecred_service::ServiceConfig::new(cli.as_of());
    config.options = rollup_options(args)?;
    config.log_path = cli.assessments.clone();
    config.trigger_path = cli.triggers.clone();
    config.suggested_actions = load_actions(actions)?;
    let state = casecred_service::AppState::load(cli.case_path()?, config).map_err(|e| match e {
        casecred_service::LoadError::Io { .. } => CliError::Io(e.to_string()),
        other => CliError::Invalid(other.to_string()),
    })?;
    let addr = SocketAddr::new(host, port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    eprintln!("serving {} on http://{addr}", cli.case_path()?.display());
    runtime
        .block_on(casecred_service::serve(Arc::new(state), addr))
        .map_err(|e| CliError::Io(format!("cannot serve on {addr}: {e}")))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Validate => cmd_validate(cli),
        Command::Fmt { write } => cmd_fmt(cli, *write),
        Command::Lint => cmd_lint(cli),
        Command::ScoreEvidence => cmd_score_evidence(cli),
        Command::Assess { from_file, claim } => cmd_assess(cli, from_file.as_deref(), claim.as_deref()),
        Command::Rollup(args) => cmd_rollup(cli, args),
        Command::Report { rollup, actions } => cmd_report(cli, rollup, actions.as_deref()),
        Command::Radar(args) => cmd_radar(cli, args),
        Command::Diff { old, new, apply } => cmd_diff(cli, old, new, *apply),
        Command::Trigger { kind, claims, description, id } => cmd_trigger(cli, kind, claims, description, id.as_deref()),
        Command::Export => cmd_export(cli),
        Command::Import { csv, evidence_created } => cmd_import(cli, csv, *evidence_created),
        Command::Serve { port, host, rollup, actions } => cmd_serve(cli, *host, *port, rollup, actions.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
