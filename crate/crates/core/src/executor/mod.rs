//! Syntax checking and execution of test scripts through an external runner,
//! plus the bug tally over failed cases.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Stdio;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::process::Command;

use crate::spec_model::{ApiSpecification, HttpMethod};

/// pytest plugin that produces the JSON report and captures HTTP traffic.
pub const PYTEST_ADAPTER: &str = include_str!("conftest.py");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("invalid runner configuration: {0}")]
    Config(String),
    #[error("could not start {program}: {reason}")]
    Spawn { program: String, reason: String },
    #[error("i/o failure in run directory: {0}")]
    Io(String),
    #[error("no test cases to score")]
    NoCases,
}

/// Commands are shell-style templates; `{script}`, `{report}` and `{workdir}`
/// are substituted per token after splitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct RunnerConfig {
    pub syntax_check_command: String,
    pub run_command: String,
    pub timeout_seconds: f64,
    /// Environment variables passed through to the runner; everything else
    /// is cleared.
    pub env_allow: Vec<String>,
    /// Parent directory for per-run directories; the system temp dir if unset.
    pub work_root: Option<PathBuf>,
    pub script_file_name: String,
    /// Write the pytest adapter into each run directory.
    pub install_adapter: bool,
    /// Keep run directories after the result is collected.
    pub keep_runs: bool,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            syntax_check_command: r#"python3 -c "import ast,sys;ast.parse(open(sys.argv[1]).read())" {script}"#
                .into(),
            run_command: "python3 -m pytest -q -p no:cacheprovider --confcutdir {workdir} {script} \
                          --restbench-report={report}"
                .into(),
            timeout_seconds: 120.0,
            env_allow: ["PATH", "HOME", "LANG", "LC_ALL", "PYTHONPATH", "SYSTEMROOT", "TMPDIR"]
                .into_iter()
                .map(String::from)
                .collect(),
            work_root: None,
            script_file_name: "script.py".into(),
            install_adapter: true,
            keep_runs: false,
        }
    }
}

impl RunnerConfig {
    pub fn validate(&self) -> Result<(), ExecError> {
        if !self.syntax_check_command.contains("{script}") {
            return Err(ExecError::Config("syntax-check-command needs a {script} placeholder".into()));
        }
        for placeholder in ["{script}", "{report}"] {
            if !self.run_command.contains(placeholder) {
                return Err(ExecError::Config(format!("run-command needs a {placeholder} placeholder")));
            }
        }
        if self.timeout_seconds.is_nan() || self.timeout_seconds <= 0.0 {
            return Err(ExecError::Config("timeout must be positive".into()));
        }
        for command in [&self.syntax_check_command, &self.run_command] {
            if shlex::split(command).is_none_or(|argv| argv.is_empty()) {
                return Err(ExecError::Config(format!("cannot split command {command:?}")));
            }
        }
        Ok(())
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_seconds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseOutcome {
    Passed,
    Failed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapturedResponse {
    pub method: String,
    pub path: String,
    pub status: u16,
    pub body_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCaseResult {
    pub name: String,
    pub outcome: CaseOutcome,
    pub message: String,
    pub responses: Vec<CapturedResponse>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BugCategory {
    FunctionalError,
    SpecInconsistency,
    UndefinedStatusCode,
}

impl BugCategory {
    pub const ALL: [BugCategory; 3] =
        [BugCategory::FunctionalError, BugCategory::SpecInconsistency, BugCategory::UndefinedStatusCode];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugItem {
    pub case_name: String,
    pub category: BugCategory,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugTally {
    pub total: u64,
    pub by_category: BTreeMap<BugCategory, u64>,
    pub items: Vec<BugItem>,
}

impl Default for BugTally {
    fn default() -> Self {
        BugTally { total: 0, by_category: BugCategory::ALL.into_iter().map(|c| (c, 0)).collect(), items: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub id: String,
    pub script_id: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub duration_ms: u64,
    /// `None` when the runner was killed or never started.
    pub runner_exit_code: Option<i32>,
    pub timed_out: bool,
    pub cases: Vec<TestCaseResult>,
    pub observed_status_codes: BTreeMap<String, BTreeSet<String>>,
    pub bug_tally: BugTally,
    pub raw_runner_output: String,
    /// Runner-level problem such as a missing report.
    pub error: Option<String>,
}

impl ExecutionResult {
    pub fn all_passed(&self) -> bool {
        !self.cases.is_empty() && self.cases.iter().all(|c| c.outcome == CaseOutcome::Passed)
    }

    pub fn any_failed(&self) -> bool {
        self.cases.is_empty() || self.cases.iter().any(|c| c.outcome != CaseOutcome::Passed)
    }

    pub fn count(&self, outcome: CaseOutcome) -> usize {
        self.cases.iter().filter(|c| c.outcome == outcome).count()
    }

    /// Plain-text summary bound into the execution-results checker prompt.
    pub fn summary_text(&self) -> String {
        let mut out = format!(
            "exit code: {}\npassed: {}, failed: {}, errors: {}\n",
            self.runner_exit_code.map_or_else(|| "none".to_string(), |c| c.to_string()),
            self.count(CaseOutcome::Passed),
            self.count(CaseOutcome::Failed),
            self.count(CaseOutcome::Error)
        );
        for case in &self.cases {
            let outcome = match case.outcome {
                CaseOutcome::Passed => "passed",
                CaseOutcome::Failed => "failed",
                CaseOutcome::Error => "error",
            };
            out.push_str(&format!("- {}: {outcome}", case.name));
            if !case.message.is_empty() {
                out.push_str(&format!(" ({})", case.message.lines().next().unwrap_or_default()));
            }
            out.push('\n');
            for r in &case.responses {
                out.push_str(&format!("  {} {} -> {}\n", r.method, r.path, r.status));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum SyntaxVerdict {
    Valid,
    Invalid { output: String },
    /// The checker did not finish; neither valid nor invalid.
    Unknown { reason: String },
}

impl SyntaxVerdict {
    pub fn as_option(&self) -> Option<bool> {
        match self {
            SyntaxVerdict::Valid => Some(true),
            SyntaxVerdict::Invalid { .. } => Some(false),
            SyntaxVerdict::Unknown { .. } => None,
        }
    }
}

struct RunDir {
    path: PathBuf,
    _guard: Option<tempfile::TempDir>,
}

impl RunDir {
    fn create(config: &RunnerConfig) -> Result<RunDir, ExecError> {
        let root = config.work_root.clone().unwrap_or_else(std::env::temp_dir);
        std::fs::create_dir_all(&root).map_err(|e| ExecError::Io(e.to_string()))?;
        let dir = tempfile::Builder::new()
            .prefix("restbench-run-")
            .tempdir_in(&root)
            .map_err(|e| ExecError::Io(e.to_string()))?;
        if config.keep_runs {
            let path = dir.keep();
            Ok(RunDir { path, _guard: None })
        } else {
            Ok(RunDir { path: dir.path().to_path_buf(), _guard: Some(dir) })
        }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}

struct ProcessOutcome {
    exit_code: Option<i32>,
    output: String,
    timed_out: bool,
}

fn expand(template: &str, substitutions: &[(&str, &Path)]) -> Result<Vec<String>, ExecError> {
    let argv = shlex::split(template).ok_or_else(|| ExecError::Config(format!("cannot split {template:?}")))?;
    Ok(argv
        .into_iter()
        .map(|mut token| {
            for (key, value) in substitutions {
                token = token.replace(key, &value.to_string_lossy());
            }
            token
        })
        .collect())
}

async fn run_process(
    argv: &[String],
    workdir: &Path,
    config: &RunnerConfig,
) -> Result<ProcessOutcome, ExecError> {
    let (program, args) = argv.split_first().ok_or_else(|| ExecError::Config("empty command".into()))?;
    let mut command = Command::new(program);
    command
        .args(args)
        .current_dir(workdir)
        .env_clear()
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .kill_on_drop(true);
    for key in &config.env_allow {
        if let Ok(value) = std::env::var(key) {
            command.env(key, value);
        }
    }
    command.env("PYTHONDONTWRITEBYTECODE", "1");
    let child = command.spawn().map_err(|e| ExecError::Spawn { program: program.clone(), reason: e.to_string() })?;
    match tokio::time::timeout(config.timeout(), child.wait_with_output()).await {
        Ok(Ok(output)) => {
            let mut text = String::from_utf8_lossy(&output.stdout).into_owned();
            text.push_str(&String::from_utf8_lossy(&output.stderr));
            Ok(ProcessOutcome { exit_code: output.status.code(), output: text, timed_out: false })
        }
        Ok(Err(e)) => Err(ExecError::Io(e.to_string())),
        // Dropping the future drops the child, which kills it.
        Err(_) => Ok(ProcessOutcome { exit_code: None, output: String::new(), timed_out: true }),
    }
}

/// Writes the script to a fresh directory and runs the syntax checker on it.
pub async fn syntax_check(script_text: &str, config: &RunnerConfig) -> Result<SyntaxVerdict, ExecError> {
    config.validate()?;
    let dir = RunDir::create(config)?;
    let script = dir.file(&config.script_file_name);
    std::fs::write(&script, script_text).map_err(|e| ExecError::Io(e.to_string()))?;
    let argv = expand(&config.syntax_check_command, &[("{script}", &script), ("{workdir}", &dir.path)])?;
    let outcome = run_process(&argv, &dir.path, config).await?;
    Ok(match (outcome.timed_out, outcome.exit_code) {
        (true, _) => SyntaxVerdict::Unknown { reason: format!("syntax check exceeded {} s", config.timeout_seconds) },
        (false, Some(0)) => SyntaxVerdict::Valid,
        (false, Some(_)) => SyntaxVerdict::Invalid { output: outcome.output },
        (false, None) => SyntaxVerdict::Unknown { reason: "syntax checker was terminated by a signal".into() },
    })
}

/// What the executor needs besides the script itself.
pub struct ExecutionRequest<'a> {
    pub execution_id: String,
    pub script_id: String,
    pub script_text: &'a str,
    pub spec: &'a ApiSpecification,
}

#[derive(Debug, Deserialize)]
struct ReportCase {
    name: String,
    outcome: CaseOutcome,
    #[serde(default)]
    message: String,
    #[serde(default)]
    responses: Vec<CapturedResponse>,
}

/// Parses the runner's JSON report: an array of
/// `{name, outcome, message, responses: [{method, path, status, body_digest}]}`.
pub fn parse_runner_report(text: &str) -> Result<Vec<TestCaseResult>, String> {
    let cases: Vec<ReportCase> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    Ok(cases
        .into_iter()
        .map(|c| {
            let message = if c.outcome == CaseOutcome::Failed && c.message.trim().is_empty() {
                "failed".to_string()
            } else {
                c.message
            };
            TestCaseResult { name: c.name, outcome: c.outcome, message, responses: c.responses }
        })
        .collect())
}

pub async fn execute(request: ExecutionRequest<'_>, config: &RunnerConfig) -> Result<ExecutionResult, ExecError> {
    config.validate()?;
    let started_at = Utc::now();
    let clock = Instant::now();
    let dir = RunDir::create(config)?;
    let script = dir.file(&config.script_file_name);
    let report = dir.file("report.json");
    std::fs::write(&script, request.script_text).map_err(|e| ExecError::Io(e.to_string()))?;
    if config.install_adapter {
        std::fs::write(dir.file("conftest.py"), PYTEST_ADAPTER).map_err(|e| ExecError::Io(e.to_string()))?;
    }
    let argv = expand(
        &config.run_command,
        &[("{script}", &script), ("{report}", &report), ("{workdir}", &dir.path)],
    )?;
    let outcome = run_process(&argv, &dir.path, config).await?;
    std::fs::write(dir.file("stdout.txt"), &outcome.output).map_err(|e| ExecError::Io(e.to_string()))?;

    let mut error = None;
    let mut cases = match std::fs::read_to_string(&report) {
        Ok(text) => match parse_runner_report(&text) {
            Ok(cases) => cases,
            Err(reason) => {
                error = Some(format!("runner report is malformed: {reason}"));
                Vec::new()
            }
        },
        Err(_) => {
            error = Some("runner produced no report".to_string());
            Vec::new()
        }
    };
    if outcome.timed_out {
        error = Some(format!("runner exceeded {} s and was killed", config.timeout_seconds));
        for case in cases.iter_mut().filter(|c| c.outcome != CaseOutcome::Passed && c.outcome != CaseOutcome::Failed) {
            case.outcome = CaseOutcome::Error;
            if case.message.is_empty() {
                case.message = "not finished".into();
            }
        }
    }

    let observed_status_codes = observed_codes(&cases, request.spec);
    let bug_tally = tally_bugs(&cases, request.spec);
    Ok(ExecutionResult {
        id: request.execution_id,
        script_id: request.script_id,
        started_at,
        finished_at: Utc::now(),
        duration_ms: clock.elapsed().as_millis() as u64,
        runner_exit_code: outcome.exit_code,
        timed_out: outcome.timed_out,
        cases,
        observed_status_codes,
        bug_tally,
        raw_runner_output: outcome.output,
        error,
    })
}

/// `"METHOD /template"` for a captured response, or its raw path when no
/// declared operation matches.
fn endpoint_of(response: &CapturedResponse, spec: &ApiSpecification) -> String {
    HttpMethod::parse(&response.method)
        .and_then(|m| spec.match_request(m, &response.path))
        .map(|op| op.key())
        .unwrap_or_else(|| format!("{} {}", response.method.to_ascii_uppercase(), response.path))
}

pub fn observed_codes(cases: &[TestCaseResult], spec: &ApiSpecification) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for response in cases.iter().flat_map(|c| &c.responses) {
        out.entry(endpoint_of(response, spec)).or_default().insert(response.status.to_string());
    }
    out
}

const SCHEMA_HINTS: [&str; 12] = [
    "keyerror",
    "schema",
    "field",
    "property",
    "missing",
    "isinstance",
    "typeerror",
    "validationerror",
    "not in",
    " in {",
    " in [",
    "required",
];

/// One bug per failed case. A captured code the endpoint does not declare
/// (and no `default` covers) makes it an undefined status code; a failure
/// message about fields or schema makes it a spec inconsistency; anything
/// else is a functional error.
pub fn tally_bugs(cases: &[TestCaseResult], spec: &ApiSpecification) -> BugTally {
    let mut tally = BugTally::default();
    for case in cases.iter().filter(|c| c.outcome == CaseOutcome::Failed) {
        let undeclared = case.responses.iter().find_map(|r| {
            let op = HttpMethod::parse(&r.method).and_then(|m| spec.match_request(m, &r.path))?;
            let status = r.status.to_string();
            (!op.declares_status(&status)).then(|| {
                let declared: Vec<&str> = op.responses.iter().map(|x| x.status_code.as_str()).collect();
                format!("{} returned {status}; declared {}", op.key(), declared.join(", "))
            })
        });
        let lowered = case.message.to_lowercase();
        let (category, evidence) = match undeclared {
            Some(evidence) => (BugCategory::UndefinedStatusCode, evidence),
            None if SCHEMA_HINTS.iter().any(|h| lowered.contains(h)) => {
                (BugCategory::SpecInconsistency, first_line(&case.message))
            }
            None => (BugCategory::FunctionalError, first_line(&case.message)),
        };
        *tally.by_category.entry(category).or_default() += 1;
        tally.total += 1;
        tally.items.push(BugItem { case_name: case.name.clone(), category, evidence });
    }
    tally
}

fn first_line(text: &str) -> String {
    text.lines().next().unwrap_or_default().chars().take(500).collect()
}

/// Pass rate over executed cases; errors are not passes.
pub fn correctness_score(result: &ExecutionResult) -> Result<f64, ExecError> {
    if result.cases.is_empty() {
        return Err(ExecError::NoCases);
    }
    Ok(result.count(CaseOutcome::Passed) as f64 / result.cases.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_model::parse_spec;

    fn items_spec() -> ApiSpecification {
        let text = std::fs::read_to_string(format!(
            "{}/../testkit/fixtures/specs/items.json",
            env!("CARGO_MANIFEST_DIR")
        ))
        .unwrap();
        parse_spec(&text, "items.json").unwrap()
    }

    fn case(name: &str, outcome: CaseOutcome, message: &str, responses: &[(&str, &str, u16)]) -> TestCaseResult {
        TestCaseResult {
            name: name.into(),
            outcome,
            message: message.into(),
            responses: responses
                .iter()
                .map(|(m, p, s)| CapturedResponse {
                    method: m.to_string(),
                    path: p.to_string(),
                    status: *s,
                    body_digest: String::new(),
                })
                .collect(),
        }
    }

    #[test]
    fn tally_categories() {
        let spec = items_spec();
        let cases = vec![
            case("a", CaseOutcome::Failed, "AssertionError: assert 418 == 200", &[("GET", "/items", 418)]),
            case("b", CaseOutcome::Failed, "AssertionError: assert 'category' in {'id': 1}", &[("GET", "/items", 200)]),
            case("c", CaseOutcome::Failed, "AssertionError: assert 2 == 3", &[("GET", "/items/1", 200)]),
            case("d", CaseOutcome::Passed, "", &[("GET", "/items", 200)]),
            case("e", CaseOutcome::Error, "ConnectionError", &[]),
        ];
        let tally = tally_bugs(&cases, &spec);
        assert_eq!(tally.total, 3);
        assert_eq!(tally.by_category[&BugCategory::UndefinedStatusCode], 1);
        assert_eq!(tally.by_category[&BugCategory::SpecInconsistency], 1);
        assert_eq!(tally.by_category[&BugCategory::FunctionalError], 1);
        assert_eq!(tally.items[0].evidence, "GET /items returned 418; declared 200, 404");
        assert_eq!(tally.total, tally.by_category.values().sum::<u64>());
    }

    #[test]
    fn empty_tally_has_zero_categories() {
        let tally = tally_bugs(&[], &items_spec());
        assert_eq!(tally.total, 0);
        assert!(BugCategory::ALL.iter().all(|c| tally.by_category[c] == 0));
    }

    #[test]
    fn observed_codes_use_templates() {
        let cases = vec![case("a", CaseOutcome::Passed, "", &[("GET", "/items/7", 404), ("get", "/other", 200)])];
        let observed = observed_codes(&cases, &items_spec());
        assert_eq!(observed["GET /items/{itemId}"], BTreeSet::from(["404".to_string()]));
        assert!(observed.contains_key("GET /other"));
    }

    fn result_with(outcomes: &[CaseOutcome]) -> ExecutionResult {
        ExecutionResult {
            id: "e".into(),
            script_id: "t".into(),
            started_at: Utc::now(),
            finished_at: Utc::now(),
            duration_ms: 0,
            runner_exit_code: Some(0),
            timed_out: false,
            cases: outcomes.iter().map(|o| case("x", *o, "m", &[])).collect(),
            observed_status_codes: BTreeMap::new(),
            bug_tally: BugTally::default(),
            raw_runner_output: String::new(),
            error: None,
        }
    }

    #[test]
    fn scores() {
        use CaseOutcome::*;
        assert_eq!(correctness_score(&result_with(&[Passed, Passed, Passed, Failed])).unwrap(), 0.75);
        assert_eq!(correctness_score(&result_with(&[Passed])).unwrap(), 1.0);
        assert_eq!(correctness_score(&result_with(&[Error, Error])).unwrap(), 0.0);
        assert_eq!(correctness_score(&result_with(&[])), Err(ExecError::NoCases));
    }

    #[test]
    fn report_parsing() {
        let text = r#"[{"name": "t1", "outcome": "failed", "message": "", "responses": [{"method": "GET", "path": "/items", "status": 500, "body_digest": "ab"}]}]"#;
        let cases = parse_runner_report(text).unwrap();
        assert_eq!(cases[0].message, "failed");
        assert_eq!(cases[0].responses[0].status, 500);
        assert!(parse_runner_report("{}").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(RunnerConfig::default().validate().is_ok());
        let bad = RunnerConfig { run_command: "pytest {script}".into(), ..Default::default() };
        assert!(matches!(bad.validate(), Err(ExecError::Config(_))));
        let bad = RunnerConfig { timeout_seconds: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[tokio::test]
    async fn syntax_verdicts() {
        let config = RunnerConfig::default();
        let ok = syntax_check("import requests\n\ndef test_a():\n    assert (1 + 2) == 3\n", &config).await.unwrap();
        assert_eq!(ok, SyntaxVerdict::Valid);
        let bad = syntax_check("def test_a(:\n    assert [1, 2\n", &config).await.unwrap();
        assert_eq!(bad.as_option(), Some(false));
        let missing = RunnerConfig { syntax_check_command: "no-such-binary-xyz {script}".into(), ..Default::default() };
        assert!(matches!(syntax_check("x = 1", &missing).await, Err(ExecError::Spawn { .. })));
    }

    #[tokio::test]
    async fn timeout_marks_unfinished_cases() {
        let config = RunnerConfig { timeout_seconds: 3.0, ..Default::default() };
        let script = "import time\n\ndef test_fast():\n    assert True\n\ndef test_slow():\n    time.sleep(30)\n";
        let spec = items_spec();
        let started = Instant::now();
        let result = execute(
            ExecutionRequest { execution_id: "e1".into(), script_id: "t1".into(), script_text: script, spec: &spec },
            &config,
        )
        .await
        .unwrap();
        assert!(started.elapsed() < Duration::from_secs(15));
        assert!(result.timed_out);
        assert_eq!(result.runner_exit_code, None);
        assert_eq!(result.cases.len(), 2);
        assert_eq!(result.cases[0].outcome, CaseOutcome::Passed);
        assert_eq!(result.cases[1].outcome, CaseOutcome::Error);
    }

    #[tokio::test]
    async fn crash_without_report() {
        let config = RunnerConfig { run_command: "python3 {script} {report}".into(), ..Default::default() };
        let spec = items_spec();
        let result = execute(
            ExecutionRequest { execution_id: "e".into(), script_id: "t".into(), script_text: "raise SystemExit(3)\n", spec: &spec },
            &config,
        )
        .await
        .unwrap();
        assert_eq!(result.runner_exit_code, Some(3));
        assert!(result.cases.is_empty());
        assert_eq!(result.error.as_deref(), Some("runner produced no report"));
    }

    #[tokio::test]
    async fn runs_stay_inside_their_directory() {
        let root = tempfile::tempdir().unwrap();
        let config = RunnerConfig { work_root: Some(root.path().into()), keep_runs: true, ..Default::default() };
        let spec = items_spec();
        let script = "import os\n\ndef test_cwd():\n    open('artifact.txt', 'w').write('x')\n    assert os.path.exists('script.py')\n";
        let result = execute(
            ExecutionRequest { execution_id: "e".into(), script_id: "t".into(), script_text: script, spec: &spec },
            &config,
        )
        .await
        .unwrap();
        assert!(result.all_passed(), "{}", result.raw_runner_output);
        let runs: Vec<_> = std::fs::read_dir(root.path()).unwrap().map(|e| e.unwrap().path()).collect();
        assert_eq!(runs.len(), 1);
        for name in ["script.py", "report.json", "stdout.txt", "artifact.txt"] {
            assert!(runs[0].join(name).exists(), "{name}");
        }
    }
}
