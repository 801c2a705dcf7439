//! The `dfpo` command line: verify, train, eval, probe and report.
//!
//! Exit status is 0 on success, 1 when a property or integrity check fails,
//! and 2 for usage and configuration errors.

pub mod eval;
pub mod report;

use std::ffi::OsString;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::metrics::{
    probe_transcript, read_transcript, score_transcript, EfficiencyReport, ExactUcbAgent, GreedyDoingAgent,
    KnowingDoingMatrix, NoisyKnowingAgent, ProbeAgent, ProbeConfig,
};
use crate::policy::{run_pipeline, Algorithm, PipelineConfig, PolicyEval, TrainingRecord};
use crate::router::{AnswerValue, EvalKind, HttpJudge, JudgeClient, JudgeConfig, RouterTable, StubJudge};
use crate::verify::{run_battery, VerifyConfig, VerifyReport};
use report::{fmt_f, fmt_opt, RunReport, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_USAGE
    }
}

#[derive(Debug, Parser)]
#[command(name = "dfpo", version, about = "Draft-and-follow policy optimization lab")]
pub struct Cli {
    /// TOML configuration for the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for the JSON report, text tables and curve files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Score judge-based evaluations with the offline stub.
    #[arg(long, global = true)]
    pub stub_judge: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte-Carlo property battery.
    Verify,
    /// Imitation then reinforcement learning on DraftWorld.
    Train,
    /// Score a line-delimited trajectory log.
    Eval {
        /// Trajectory log, one JSON record per line.
        log: PathBuf,
    },
    /// Run the knowing-doing bandit probe.
    Probe,
    /// Check and print saved run reports.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

/// A finished command: report, printable text, extra files, exit status.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub report: Option<RunReport>,
    pub text: String,
    /// Paths relative to the output directory.
    pub files: Vec<(PathBuf, String)>,
    pub exit: i32,
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base.and_then(Path::parent) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn render(tables: &[Table]) -> String {
    tables.iter().map(|t| t.to_string()).collect::<Vec<_>>().join("\n")
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyFile {
    pub seed: u64,
    pub verify: VerifyConfig,
}

pub fn cmd_verify(config: &VerifyFile) -> Result<CommandOutput, CliError> {
    config.verify.validate().map_err(CliError::Config)?;
    let result: VerifyReport = run_battery(&config.verify, config.seed);
    let report = RunReport::new("verify", config, Some(config.seed), &result)?;
    let mut t = Table::new("property battery", &["suite", "trials", "violations", "worst", "statistic"]);
    for s in &result.suites {
        t.row(vec![
            s.name.clone(),
            s.trials.to_string(),
            s.violations.to_string(),
            format!("{:.3e}", s.worst),
            s.statistic.clone(),
        ]);
        for (part, n) in &s.parts {
            t.row(vec![format!("  {part}"), String::new(), n.to_string(), String::new(), String::new()]);
        }
    }
    let mut text = render(&[t]);
    text.push_str(&format!(
        "\n{} trials, {} violations: {}\n",
        result.total_trials,
        result.total_violations,
        if result.passed() { "PASS" } else { "FAIL" }
    ));
    Ok(CommandOutput {
        report: Some(report),
        text,
        files: Vec::new(),
        exit: if result.passed() { EXIT_OK } else { EXIT_VIOLATION },
    })
}

// ----------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub pipeline: PipelineConfig,
}

impl Default for TrainFile {
    fn default() -> Self {
        Self { seeds: (0..10).collect(), algorithms: vec![Algorithm::Dfpo], pipeline: PipelineConfig::default() }
    }
}

// One entry per run in a report; size is irrelevant next to the JSON.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunEntry {
    Ok {
        algorithm: Algorithm,
        seed: u64,
        baseline: PolicyEval,
        trained: Option<PolicyEval>,
        final_record: Option<TrainingRecord>,
    },
    Failed {
        algorithm: Algorithm,
        seed: u64,
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub algorithm: Algorithm,
    pub runs_ok: usize,
    pub runs_failed: usize,
    pub baseline: Option<EfficiencyReport>,
    pub trained: Option<EfficiencyReport>,
    /// Runs whose trained policy used no more turns than its baseline.
    pub turns_not_worse: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPayload {
    pub runs: Vec<RunEntry>,
    pub arms: Vec<ArmSummary>,
}

const CURVE_HEADER: [&str; 10] = [
    "step",
    "objective",
    "mean_reward",
    "mean_turns",
    "valid_rate",
    "draft_entropy",
    "solution_entropy_correct",
    "solution_entropy_wrong",
    "repetition_score",
    "update_norm",
];

fn curve_table(records: &[TrainingRecord]) -> Table {
    let mut t = Table::new("", &CURVE_HEADER);
    for r in records {
        t.row(vec![
            r.step.to_string(),
            format!("{}", r.objective),
            format!("{}", r.mean_reward),
            format!("{}", r.mean_turns),
            format!("{}", r.valid_rate),
            format!("{}", r.draft_entropy),
            r.solution_entropy_correct.map_or_else(String::new, |x| format!("{x}")),
            r.solution_entropy_wrong.map_or_else(String::new, |x| format!("{x}")),
            format!("{}", r.repetition_score),
            format!("{}", r.update_norm),
        ]);
    }
    t
}

pub fn cmd_train(config: &TrainFile) -> Result<CommandOutput, CliError> {
    if config.seeds.is_empty() || config.algorithms.is_empty() {
        return Err(CliError::Config("train needs at least one seed and one algorithm".into()));
    }
    config.pipeline.world.validate().map_err(|e| CliError::Config(e.to_string()))?;
    config.pipeline.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let jobs: Vec<(Algorithm, u64)> =
        config.algorithms.iter().flat_map(|&a| config.seeds.iter().map(move |&s| (a, s))).collect();
    let results: Vec<_> = jobs.par_iter().map(|&(a, s)| ((a, s), run_pipeline(&config.pipeline, a, s))).collect();

    let mut runs = Vec::new();
    let mut files = Vec::new();
    for ((algorithm, seed), r) in results {
        match r {
            Ok(run) => {
                if let Some(log) = &run.log {
                    files.push((
                        PathBuf::from(format!("curves/{algorithm}_seed{seed}.tsv")),
                        curve_table(&log.records).to_tsv(),
                    ));
                }
                runs.push(RunEntry::Ok {
                    algorithm,
                    seed,
                    final_record: run.log.as_ref().and_then(|l| l.records.last().cloned()),
                    baseline: run.baseline,
                    trained: run.trained,
                });
            }
            Err(e) => runs.push(RunEntry::Failed { algorithm, seed, error: e.to_string() }),
        }
    }

    let arms = config
        .algorithms
        .iter()
        .map(|&alg| {
            let ok: Vec<(&PolicyEval, Option<&PolicyEval>)> = runs
                .iter()
                .filter_map(|r| match r {
                    RunEntry::Ok { algorithm, baseline, trained, .. } if *algorithm == alg => {
                        Some((baseline, trained.as_ref()))
                    }
                    _ => None,
                })
                .collect();
            let merge = |v: Vec<EfficiencyReport>| EfficiencyReport::merge(&v).ok();
            ArmSummary {
                algorithm: alg,
                runs_ok: ok.len(),
                runs_failed: runs
                    .iter()
                    .filter(|r| matches!(r, RunEntry::Failed { algorithm, .. } if *algorithm == alg))
                    .count(),
                baseline: merge(ok.iter().map(|(b, _)| b.efficiency.clone()).collect()),
                trained: merge(ok.iter().filter_map(|(_, t)| t.map(|t| t.efficiency.clone())).collect()),
                turns_not_worse: ok.iter().filter(|(b, t)| t.is_some_and(|t| t.mean_turns <= b.mean_turns)).count(),
            }
        })
        .collect();
    let payload = TrainPayload { runs, arms };

    let mut per_run = Table::new(
        "runs",
        &["algorithm", "seed", "status", "base turns", "base success", "trained turns", "trained success", "valid"],
    );
    for r in &payload.runs {
        match r {
            RunEntry::Ok { algorithm, seed, baseline, trained, .. } => per_run.row(vec![
                algorithm.to_string(),
                seed.to_string(),
                "ok".into(),
                fmt_f(baseline.mean_turns),
                fmt_f(baseline.success_rate),
                fmt_opt(trained.as_ref().map(|t| t.mean_turns)),
                fmt_opt(trained.as_ref().map(|t| t.success_rate)),
                fmt_opt(trained.as_ref().map(|t| t.valid_rate)),
            ]),
            RunEntry::Failed { algorithm, seed, error } => {
                per_run.row(vec![algorithm.to_string(), seed.to_string(), format!("failed: {error}")])
            }
        }
    }
    let mut arms_t =
        Table::new("arms", &["algorithm", "ok", "failed", "avg", "mean turns", "I-Avg", "valid", "turns <= baseline"]);
    for a in &payload.arms {
        let e = a.trained.as_ref().or(a.baseline.as_ref());
        arms_t.row(vec![
            a.algorithm.to_string(),
            a.runs_ok.to_string(),
            a.runs_failed.to_string(),
            fmt_opt(e.map(|e| e.avg)),
            fmt_opt(e.map(|e| e.mean_turns)),
            fmt_opt(e.map(|e| e.i_avg)),
            fmt_opt(e.map(|e| e.valid_answer_rate)),
            format!("{}/{}", a.turns_not_worse, a.runs_ok),
        ]);
    }
    let mut tables = vec![per_run, arms_t];
    if config.algorithms.len() > 1 {
        let mut headers = vec!["seed".to_string()];
        for a in &config.algorithms {
            headers.push(format!("{a} turns"));
            headers.push(format!("{a} success"));
        }
        let mut paired = Table { title: "paired final metrics".into(), headers, rows: Vec::new() };
        for &s in &config.seeds {
            let mut row = vec![s.to_string()];
            for &alg in &config.algorithms {
                let t = payload.runs.iter().find_map(|r| match r {
                    RunEntry::Ok { algorithm, seed, trained, baseline, .. } if *algorithm == alg && *seed == s => {
                        Some(trained.clone().unwrap_or_else(|| baseline.clone()))
                    }
                    _ => None,
                });
                row.push(fmt_opt(t.as_ref().map(|t| t.mean_turns)));
                row.push(fmt_opt(t.as_ref().map(|t| t.success_rate)));
            }
            paired.row(row);
        }
        tables.push(paired);
    }
    let report = RunReport::new("train", config, config.seeds.first().copied(), &payload)?;
    Ok(CommandOutput { report: Some(report), text: render(&tables), files, exit: EXIT_OK })
}

// ------------------------------------------------------------------ eval

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubVerdict {
    pub kind: EvalKind,
    pub predicted: AnswerValue,
    pub golden: AnswerValue,
    /// Judge scale, 0–10.
    pub verdict: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalFile {
    pub max_turns: usize,
    pub router_table: Option<PathBuf>,
    pub judge: Option<JudgeConfig>,
    /// Verdicts the offline stub returns, and its fallback for anything else.
    pub stub_verdicts: Vec<StubVerdict>,
    pub stub_default_verdict: Option<f64>,
}

impl Default for EvalFile {
    fn default() -> Self {
        Self { max_turns: 10, router_table: None, judge: None, stub_verdicts: Vec::new(), stub_default_verdict: None }
    }
}

pub fn cmd_eval(log: &Path, config: &EvalFile, stub_judge: bool) -> Result<CommandOutput, CliError> {
    if config.max_turns == 0 {
        return Err(CliError::Config("max_turns must be >= 1".into()));
    }
    let table = match &config.router_table {
        Some(p) => RouterTable::load(p).map_err(|e| CliError::Config(e.to_string()))?,
        None => RouterTable::builtin(),
    };
    let judge: Option<Box<dyn JudgeClient>> = if stub_judge {
        let mut stub = StubJudge::new();
        if let Some(d) = config.stub_default_verdict {
            stub = stub.with_default(d);
        }
        for v in &config.stub_verdicts {
            stub.script(v.kind, &v.predicted, &v.golden, v.verdict);
        }
        Some(Box::new(stub))
    } else {
        config.judge.clone().map(|j| Box::new(HttpJudge::new(j)) as Box<dyn JudgeClient>)
    };
    let file = File::open(log).map_err(|e| CliError::Config(format!("{}: {e}", log.display())))?;
    let (lines, records, skipped) =
        eval::parse_log(BufReader::new(file)).map_err(|e| CliError::Config(format!("{}: {e}", log.display())))?;
    if records.is_empty() {
        return Err(CliError::Config(format!("{}: no parseable records ({lines} lines)", log.display())));
    }
    let result = eval::score_records(lines, &records, skipped, &table, judge.as_deref(), config.max_turns)
        .map_err(CliError::Config)?;

    let s = &result.summary;
    let mut summary = Table::new(
        "summary",
        &["lines", "parsed", "skipped", "evaluated", "errors", "avg", "mean turns", "I-Avg", "valid"],
    );
    summary.row(vec![
        s.input_lines.to_string(),
        s.parsed.to_string(),
        s.skipped.to_string(),
        s.evaluated.to_string(),
        s.errors.to_string(),
        fmt_f(s.avg),
        fmt_f(s.mean_turns),
        fmt_f(s.i_avg),
        fmt_f(s.valid_answer_rate),
    ]);
    let mut per = Table::new("records", &["line", "id", "eval", "score", "reward", "turns", "repetition", "error"]);
    for r in &result.records {
        per.row(vec![
            r.line.to_string(),
            r.question_id.clone(),
            r.eval_kind.clone(),
            fmt_opt(r.score),
            r.reward.map_or_else(|| "-".into(), |b| b.to_string()),
            r.turns.to_string(),
            r.repetition_score.map_or_else(|| "-".into(), |x| format!("{x:.1}")),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    let mut tables = vec![summary, per];
    if !result.skipped.is_empty() {
        let mut sk = Table::new("skipped lines", &["line", "reason"]);
        for l in &result.skipped {
            sk.row(vec![l.line.to_string(), l.reason.clone()]);
        }
        tables.push(sk);
    }
    let report = RunReport::new("eval", config, None, &result)?;
    Ok(CommandOutput { report: Some(report), text: render(&tables), files: Vec::new(), exit: EXIT_OK })
}

// ----------------------------------------------------------------- probe

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentChoice {
    ExactUcb,
    NoisyKnowing,
    GreedyDoing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeFile {
    pub seed: u64,
    pub agent: AgentChoice,
    /// Noise scale of the noisy-knowing agent.
    pub sigma: f64,
    /// Replay this transcript instead of running an agent.
    pub transcript: Option<PathBuf>,
    pub probe: ProbeConfig,
}

impl Default for ProbeFile {
    fn default() -> Self {
        Self { seed: 0, agent: AgentChoice::ExactUcb, sigma: 0.1, transcript: None, probe: ProbeConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePayload {
    pub source: String,
    pub n_envs: usize,
    pub steps: usize,
    pub n_arms: usize,
    pub c: f64,
    pub matrix: KnowingDoingMatrix,
}

pub fn cmd_probe(config: &ProbeFile) -> Result<CommandOutput, CliError> {
    let (source, matrix, files) = match &config.transcript {
        Some(path) => {
            let f = File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let records = read_transcript(BufReader::new(f)).map_err(|e| CliError::Config(e.to_string()))?;
            let m = score_transcript(&records).map_err(|e| CliError::Config(e.to_string()))?;
            (format!("transcript {}", path.display()), m, Vec::new())
        }
        None => {
            let noisy = NoisyKnowingAgent { sigma: config.sigma };
            let agent: &dyn ProbeAgent = match config.agent {
                AgentChoice::ExactUcb => &ExactUcbAgent,
                AgentChoice::NoisyKnowing => &noisy,
                AgentChoice::GreedyDoing => &GreedyDoingAgent,
            };
            let records =
                probe_transcript(agent, &config.probe, config.seed).map_err(|e| CliError::Config(e.to_string()))?;
            let m = score_transcript(&records).map_err(|e| CliError::Config(e.to_string()))?;
            let jsonl: String = records.iter().map(|r| serde_json::to_string(r).unwrap_or_default() + "\n").collect();
            let name =
                serde_json::to_value(config.agent).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            (format!("agent {name}"), m, vec![(PathBuf::from("probe_transcript.jsonl"), jsonl)])
        }
    };
    let payload = ProbePayload {
        source,
        n_envs: matrix.n_envs,
        steps: matrix.steps,
        n_arms: config.probe.n_arms,
        c: config.probe.c,
        matrix,
    };
    let m = &payload.matrix;
    let mut header = Table::new("probe", &["source", "n_envs", "steps", "c"]);
    header.row(vec![
        payload.source.clone(),
        payload.n_envs.to_string(),
        payload.steps.to_string(),
        format!("{}", payload.c),
    ]);
    let mut cm = Table::new("knowing x doing", &["", "doing", "not doing"]);
    cm.row(vec!["knowing".into(), m.counts.knowing_doing.to_string(), m.counts.knowing_not_doing.to_string()]);
    cm.row(vec![
        "not knowing".into(),
        m.counts.not_knowing_doing.to_string(),
        m.counts.not_knowing_not_doing.to_string(),
    ]);
    let mut rates = Table::new("rates", &["knowing", "doing", "doing | knowing"]);
    rates.row(vec![fmt_f(m.knowing_rate), fmt_f(m.doing_rate), fmt_opt(m.doing_given_knowing)]);
    let seed = config.transcript.is_none().then_some(config.seed);
    let report = RunReport::new("probe", config, seed, &payload)?;
    Ok(CommandOutput { report: Some(report), text: render(&[header, cm, rates]), files, exit: EXIT_OK })
}

// ---------------------------------------------------------------- report

pub fn cmd_report(paths: &[PathBuf]) -> Result<CommandOutput, CliError> {
    let mut t = Table::new("reports", &["file", "command", "seed", "config hash", "hash check", "timestamp"]);
    let mut bad = 0;
    let mut details = String::new();
    for p in paths {
        let r = RunReport::load(p)?;
        let ok = r.hash_ok();
        bad += usize::from(!ok);
        t.row(vec![
            p.display().to_string(),
            r.meta.command.clone(),
            r.meta.seed.map_or_else(|| "-".into(), |s| s.to_string()),
            r.meta.config_hash.chars().take(12).collect(),
            if ok { "ok".into() } else { "MISMATCH".into() },
            r.timestamp.clone(),
        ]);
        details.push_str(&format!("\n{}\n{}\n", p.display(), summarize_payload(&r)));
    }
    let text = format!("{t}{details}");
    Ok(CommandOutput { report: None, text, files: Vec::new(), exit: if bad == 0 { EXIT_OK } else { EXIT_VIOLATION } })
}

fn summarize_payload(r: &RunReport) -> String {
    let p = &r.payload;
    match r.meta.command.as_str() {
        "verify" => format!(
            "  {} trials, {} violations",
            p["total_trials"].as_u64().unwrap_or(0),
            p["total_violations"].as_u64().unwrap_or(0)
        ),
        "probe" => format!(
            "  knowing {:.4}, doing {:.4}, doing|knowing {}",
            p["matrix"]["knowing_rate"].as_f64().unwrap_or(0.0),
            p["matrix"]["doing_rate"].as_f64().unwrap_or(0.0),
            p["matrix"]["doing_given_knowing"].as_f64().map_or_else(|| "-".into(), |x| format!("{x:.4}"))
        ),
        "eval" => format!(
            "  avg {:.2}, I-Avg {:.2}, mean turns {:.3}",
            p["summary"]["avg"].as_f64().unwrap_or(0.0),
            p["summary"]["i_avg"].as_f64().unwrap_or(0.0),
            p["summary"]["mean_turns"].as_f64().unwrap_or(0.0)
        ),
        "train" => format!("  {} runs", p["runs"].as_array().map_or(0, |a| a.len())),
        _ => String::new(),
    }
}

// ------------------------------------------------------------------ main

fn write_outputs(dir: &Path, out: &CommandOutput, command: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    if let Some(r) = &out.report {
        std::fs::write(dir.join(format!("{command}.report.json")), r.to_json()).map_err(io)?;
    }
    std::fs::write(dir.join(format!("{command}.txt")), &out.text).map_err(io)?;
    for (rel, contents) in &out.files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        std::fs::write(path, contents).map_err(io)?;
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<CommandOutput, CliError> {
    let cfg_path = cli.config.as_deref();
    match &cli.command {
        Command::Verify => {
            let mut c: VerifyFile = read_config(cfg_path)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            cmd_verify(&c)
        }
        Command::Train => {
            let mut c: TrainFile = read_config(cfg_path)?;
            if let Some(s) = cli.seed {
                c.seeds = vec![s];
            }
            cmd_train(&c)
        }
        Command::Eval { log } => {
            let mut c: EvalFile = read_config(cfg_path)?;
            c.router_table = c.router_table.map(|p| resolve(cfg_path, &p));
            cmd_eval(log, &c, cli.stub_judge)
        }
        Command::Probe => {
            let mut c: ProbeFile = read_config(cfg_path)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            c.transcript = c.transcript.map(|p| resolve(cfg_path, &p));
            cmd_probe(&c)
        }
        Command::Report { reports } => cmd_report(reports),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Verify => "verify",
        Command::Train => "train",
        Command::Eval { .. } => "eval",
        Command::Probe => "probe",
        Command::Report { .. } => "report",
    }
}

/// Parses arguments, runs the command, prints its tables and writes any
/// requested files. Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{}", out.text);
            if let Some(dir) = &cli.out {
                if let Err(e) = write_outputs(dir, &out, command_name(&cli.command)) {
                    eprintln!("dfpo: {e}");
                    return e.exit_code();
                }
            }
            out.exit
        }
        Err(e) => {
            eprintln!("dfpo: {e}");
            e.exit_code()
        }
    }
}
