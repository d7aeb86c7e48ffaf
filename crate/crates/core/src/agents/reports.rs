//! Checker report types and their parsers. Every percentage is recomputed from
//! the counts; the number the model stated is kept only for audit.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::spec_model::HttpMethod;

/// Stated and recomputed percentages may differ by this much before a
/// warning is raised.
pub const STATED_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("checker output is not JSON: {reason}")]
    NotJson { reason: String, raw: String },
    #[error("checker JSON has the wrong shape: {reason}")]
    Shape { reason: String, raw: String },
}

impl ReportError {
    pub fn raw(&self) -> &str {
        match self {
            ReportError::NotJson { raw, .. } | ReportError::Shape { raw, .. } => raw,
        }
    }
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// `num / den * 100` rounded to 2 decimals, `None` when `den` is zero.
pub fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| round2(num as f64 * 100.0 / den as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointTypeCoverage {
    pub matched: u64,
    pub total: u64,
    pub coverage_percent: f64,
    pub stated_percent: Option<f64>,
    pub mismatches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTypeReport {
    pub coverage_percent: f64,
    pub stated_coverage: Option<f64>,
    pub per_endpoint: BTreeMap<String, EndpointTypeCoverage>,
    pub warnings: Vec<String>,
}

impl DataTypeReport {
    /// The checker's proposed verdict: every scenario-required parameter
    /// matched. A human confirms it before it counts.
    pub fn proposes_correct(&self) -> bool {
        self.per_endpoint.values().all(|e| e.matched == e.total) && self.coverage_percent >= 100.0
    }

    pub fn recompute(&mut self) {
        let (mut matched, mut total) = (0u64, 0u64);
        for e in self.per_endpoint.values_mut() {
            e.coverage_percent = percent(e.matched as usize, e.total as usize).unwrap_or(100.0);
            matched += e.matched;
            total += e.total;
        }
        self.coverage_percent = percent(matched as usize, total as usize).unwrap_or(100.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCoverageReport {
    /// `None` when the scenario names no operations.
    pub coverage_percent: Option<f64>,
    pub stated_coverage: Option<f64>,
    pub expected: Vec<String>,
    pub used_in_script: Vec<String>,
    pub warnings: Vec<String>,
}

impl MethodCoverageReport {
    pub fn recompute(&mut self) {
        self.coverage_percent = percent(self.used_in_script.len(), self.expected.len());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatusCodeMode {
    Static,
    Dynamic,
}

impl StatusCodeMode {
    fn observed_key(self) -> &'static str {
        match self {
            StatusCodeMode::Static => "used_in_script",
            StatusCodeMode::Dynamic => "covered_after_execution",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointStatusCoverage {
    pub expected: Vec<String>,
    pub observed: Vec<String>,
    pub coverage_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusCodeReport {
    pub mode: StatusCodeMode,
    /// Summed ratio over all endpoints; `None` when nothing is expected.
    pub coverage_percent: Option<f64>,
    pub stated_coverage: Option<f64>,
    pub per_endpoint: BTreeMap<String, EndpointStatusCoverage>,
    /// Whether `observed` came from captured responses rather than the model.
    pub observed_from_capture: bool,
    pub warnings: Vec<String>,
}

impl StatusCodeReport {
    pub fn recompute(&mut self) {
        let (mut observed, mut expected) = (0, 0);
        for e in self.per_endpoint.values_mut() {
            e.coverage_percent = percent(e.observed.len(), e.expected.len());
            observed += e.observed.len();
            expected += e.expected.len();
        }
        self.coverage_percent = percent(observed, expected);
    }

    /// Replaces every endpoint's observed list with the codes that were
    /// actually captured during execution, filtered to the expected ones.
    pub fn apply_captured(&mut self, captured: &BTreeMap<String, BTreeSet<String>>) {
        for (endpoint, entry) in self.per_endpoint.iter_mut() {
            let seen = captured.get(endpoint);
            entry.observed = entry
                .expected
                .iter()
                .filter(|code| seen.is_some_and(|s| s.contains(*code)))
                .cloned()
                .collect();
        }
        self.observed_from_capture = true;
        self.recompute();
    }
}

/// Strips one surrounding code fence, if any, and parses the rest as a JSON
/// object.
fn parse_object(raw: &str) -> Result<Map<String, Value>, ReportError> {
    let body = strip_code_fence(raw);
    match serde_json::from_str::<Value>(body.trim()) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(ReportError::Shape { reason: "top level is not an object".into(), raw: raw.into() }),
        Err(e) => Err(ReportError::NotJson { reason: e.to_string(), raw: raw.into() }),
    }
}

/// Removes a leading ```` ```lang ```` line and a trailing ```` ``` ```` line.
/// Text without a leading fence is returned unchanged.
pub fn strip_code_fence(raw: &str) -> &str {
    let trimmed = raw.trim();
    if !trimmed.starts_with("```") {
        return raw;
    }
    let after_open = match trimmed.find('\n') {
        Some(idx) => &trimmed[idx + 1..],
        None => return "",
    };
    match after_open.trim_end().strip_suffix("```") {
        Some(inner) => inner,
        None => after_open,
    }
}

fn shape(reason: impl Into<String>, raw: &str) -> ReportError {
    ReportError::Shape { reason: reason.into(), raw: raw.into() }
}

/// Accepts `66.67`, `"66.67"`, `"66.67%"`.
fn stated_percent(value: Option<&Value>) -> Option<f64> {
    match value? {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().trim_end_matches('%').trim().parse().ok(),
        _ => None,
    }
}

fn count(value: Option<&Value>, field: &str, endpoint: &str, raw: &str) -> Result<u64, ReportError> {
    let v = value.ok_or_else(|| shape(format!("{endpoint}: missing \"{field}\""), raw))?;
    let n = match v {
        Value::Number(n) => n.as_u64().or_else(|| {
            n.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64)
        }),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    };
    n.ok_or_else(|| shape(format!("{endpoint}: \"{field}\" is not a non-negative integer"), raw))
}

/// `"get /pet/{petId}"` and `"GET pet/{petId}"` both become `"GET /pet/{petId}"`.
pub fn normalize_endpoint_key(key: &str) -> Option<String> {
    let mut parts = key.split_whitespace();
    let method = HttpMethod::parse(parts.next()?)?;
    let path = parts.next()?;
    if parts.next().is_some() {
        return None;
    }
    let path = path.trim_matches('`');
    let path = if path.starts_with('/') { path.to_string() } else { format!("/{path}") };
    Some(format!("{method} {path}"))
}

fn status_code(value: &Value) -> Option<String> {
    let text = match value {
        Value::Number(n) => match n.as_u64() {
            Some(u) => u.to_string(),
            None => {
                let f = n.as_f64()?;
                if f.fract() != 0.0 {
                    return None;
                }
                (f as u64).to_string()
            }
        },
        Value::String(s) => s.trim().to_string(),
        _ => return None,
    };
    (text.len() == 3 && text.bytes().all(|b| b.is_ascii_digit())).then_some(text)
}

fn code_list(value: Option<&Value>, field: &str, endpoint: &str, raw: &str) -> Result<Vec<String>, ReportError> {
    let items = value
        .and_then(Value::as_array)
        .ok_or_else(|| shape(format!("{endpoint}: \"{field}\" must be a list"), raw))?;
    let mut out: Vec<String> = Vec::new();
    for item in items {
        let code = status_code(item)
            .ok_or_else(|| shape(format!("{endpoint}: {item} in \"{field}\" is not a status code"), raw))?;
        if !out.contains(&code) {
            out.push(code);
        }
    }
    Ok(out)
}

fn detail_object<'a>(map: &'a Map<String, Value>, raw: &str) -> Result<&'a Map<String, Value>, ReportError> {
    map.get("detail")
        .and_then(Value::as_object)
        .ok_or_else(|| shape("missing \"detail\" object", raw))
}

fn check_stated(stated: Option<f64>, recomputed: Option<f64>, label: &str, warnings: &mut Vec<String>) {
    match (stated, recomputed) {
        (Some(s), Some(r)) if (s - r).abs() > STATED_TOLERANCE => {
            warnings.push(format!("{label}: stated {s} but counts give {r:.2}"));
        }
        (Some(s), None) => warnings.push(format!("{label}: stated {s} but the value is undefined")),
        _ => {}
    }
}

fn endpoint_key(key: &str, raw: &str) -> Result<String, ReportError> {
    normalize_endpoint_key(key).ok_or_else(|| shape(format!("endpoint key {key:?} is not \"METHOD /path\""), raw))
}

pub fn parse_data_type_report(raw: &str) -> Result<DataTypeReport, ReportError> {
    let map = parse_object(raw)?;
    let detail = detail_object(&map, raw)?;
    let mut warnings = Vec::new();
    let mut per_endpoint = BTreeMap::new();
    for (key, entry) in detail {
        let endpoint = endpoint_key(key, raw)?;
        let entry = entry
            .as_object()
            .ok_or_else(|| shape(format!("{endpoint}: entry is not an object"), raw))?;
        let matched = count(entry.get("matched"), "matched", &endpoint, raw)?;
        let total = count(entry.get("total"), "total", &endpoint, raw)?;
        if matched > total {
            return Err(shape(format!("{endpoint}: matched {matched} exceeds total {total}"), raw));
        }
        let mismatches = match entry.get("mismatches") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect(),
            Some(_) => return Err(shape(format!("{endpoint}: \"mismatches\" must be a list"), raw)),
        };
        let stated = stated_percent(entry.get("coverage_percent"));
        if per_endpoint.contains_key(&endpoint) {
            return Err(shape(format!("{endpoint} listed twice"), raw));
        }
        per_endpoint.insert(
            endpoint,
            EndpointTypeCoverage { matched, total, coverage_percent: 0.0, stated_percent: stated, mismatches },
        );
    }
    let stated_coverage = stated_percent(map.get("coverage"));
    if stated_coverage.is_none() {
        warnings.push("no usable \"coverage\" value stated".into());
    }
    let mut report = DataTypeReport { coverage_percent: 0.0, stated_coverage, per_endpoint, warnings };
    report.recompute();
    let mut warnings = std::mem::take(&mut report.warnings);
    for (endpoint, e) in &report.per_endpoint {
        check_stated(e.stated_percent, Some(e.coverage_percent), endpoint, &mut warnings);
    }
    check_stated(stated_coverage, Some(report.coverage_percent), "coverage", &mut warnings);
    report.warnings = warnings;
    Ok(report)
}

fn endpoint_list(value: Option<&Value>, field: &str, raw: &str) -> Result<Vec<String>, ReportError> {
    let items = value
        .and_then(Value::as_array)
        .ok_or_else(|| shape(format!("\"{field}\" must be a list"), raw))?;
    let mut out: Vec<String> = Vec::new();
    for item in items {
        let text = item
            .as_str()
            .ok_or_else(|| shape(format!("{item} in \"{field}\" is not text"), raw))?;
        let key = endpoint_key(text, raw)?;
        if !out.contains(&key) {
            out.push(key);
        }
    }
    Ok(out)
}

pub fn parse_method_coverage_report(raw: &str) -> Result<MethodCoverageReport, ReportError> {
    let map = parse_object(raw)?;
    let expected = endpoint_list(map.get("expected"), "expected", raw)?;
    let listed = endpoint_list(map.get("used_in_script"), "used_in_script", raw)?;
    let mut warnings = Vec::new();
    let mut used_in_script = Vec::new();
    for op in listed {
        if expected.contains(&op) {
            used_in_script.push(op);
        } else {
            warnings.push(format!("{op} is used in the script but not expected; dropped"));
        }
    }
    let stated_coverage = stated_percent(map.get("coverage"));
    let mut report = MethodCoverageReport { coverage_percent: None, stated_coverage, expected, used_in_script, warnings };
    report.recompute();
    check_stated(stated_coverage, report.coverage_percent, "coverage", &mut report.warnings);
    Ok(report)
}

pub fn parse_status_code_report(raw: &str, mode: StatusCodeMode) -> Result<StatusCodeReport, ReportError> {
    let map = parse_object(raw)?;
    let detail = detail_object(&map, raw)?;
    let observed_key = mode.observed_key();
    let mut warnings = Vec::new();
    let mut per_endpoint = BTreeMap::new();
    for (key, entry) in detail {
        let endpoint = endpoint_key(key, raw)?;
        let entry = entry
            .as_object()
            .ok_or_else(|| shape(format!("{endpoint}: entry is not an object"), raw))?;
        let expected = code_list(entry.get("expected"), "expected", &endpoint, raw)?;
        let listed = code_list(entry.get(observed_key), observed_key, &endpoint, raw)?;
        let mut observed = Vec::new();
        for code in listed {
            if expected.contains(&code) {
                observed.push(code);
            } else {
                warnings.push(format!("{endpoint}: {code} is not expected; ignored"));
            }
        }
        if per_endpoint.contains_key(&endpoint) {
            return Err(shape(format!("{endpoint} listed twice"), raw));
        }
        per_endpoint.insert(endpoint, EndpointStatusCoverage { expected, observed, coverage_percent: None });
    }
    let stated_coverage = stated_percent(map.get("coverage"));
    let mut report = StatusCodeReport {
        mode,
        coverage_percent: None,
        stated_coverage,
        per_endpoint,
        observed_from_capture: false,
        warnings,
    };
    report.recompute();
    check_stated(stated_coverage, report.coverage_percent, "coverage", &mut report.warnings);
    if report.coverage_percent.is_none() {
        report.warnings.push("no expected status codes; coverage undefined".into());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn data_type_recomputes_stated_value() {
        let raw = r#"{"coverage": 37, "detail": {"GET /items": {"matched": 1, "total": 2, "coverage_percent": 37, "mismatches": ["category: expected string, got int"]}}}"#;
        let report = parse_data_type_report(raw).unwrap();
        assert_eq!(report.coverage_percent, 50.0);
        assert_eq!(report.per_endpoint["GET /items"].coverage_percent, 50.0);
        assert_eq!(report.stated_coverage, Some(37.0));
        assert_eq!(report.warnings.len(), 2);
        assert!(!report.proposes_correct());
    }

    #[test]
    fn data_type_zero_total_is_full_coverage() {
        let raw = r#"{"coverage": 100, "detail": {"GET /fact": {"matched": 0, "total": 0, "coverage_percent": 100, "mismatches": []}}}"#;
        let report = parse_data_type_report(raw).unwrap();
        assert_eq!(report.coverage_percent, 100.0);
        assert!(report.warnings.is_empty());
        assert!(report.proposes_correct());
    }

    #[test]
    fn data_type_prose_and_shape_errors() {
        assert!(matches!(parse_data_type_report("Looks fine to me."), Err(ReportError::NotJson { .. })));
        assert!(matches!(parse_data_type_report(r#"{"coverage": 10}"#), Err(ReportError::Shape { .. })));
        let over = r#"{"coverage": 100, "detail": {"GET /a": {"matched": 3, "total": 2}}}"#;
        assert!(matches!(parse_data_type_report(over), Err(ReportError::Shape { .. })));
        let err = parse_data_type_report("nope").unwrap_err();
        assert_eq!(err.raw(), "nope");
    }

    #[test]
    fn fenced_json_is_accepted() {
        let raw = "```json\n{\"coverage\": 100, \"expected\": [\"GET /a\"], \"used_in_script\": [\"get /a\"]}\n```\n";
        let report = parse_method_coverage_report(raw).unwrap();
        assert_eq!(report.coverage_percent, Some(100.0));
    }

    #[test]
    fn method_coverage_cases() {
        let both = r#"{"coverage": 100, "expected": ["GET /a", "POST /b"], "used_in_script": ["GET /a", "POST /b"]}"#;
        assert_eq!(parse_method_coverage_report(both).unwrap().coverage_percent, Some(100.0));

        let half = r#"{"coverage": 50, "expected": ["GET /a", "POST /b"], "used_in_script": ["GET /a"]}"#;
        let report = parse_method_coverage_report(half).unwrap();
        assert_eq!(report.coverage_percent, Some(50.0));
        assert_eq!(report.used_in_script, vec!["GET /a"]);
        assert!(report.warnings.is_empty());

        let extra = r#"{"coverage": 100, "expected": ["GET /a"], "used_in_script": ["GET /a", "DELETE /c"]}"#;
        let report = parse_method_coverage_report(extra).unwrap();
        assert_eq!(report.used_in_script, vec!["GET /a"]);
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("DELETE /c"));
    }

    #[test]
    fn static_status_codes_two_thirds() {
        let raw = r#"{"coverage": 66.67, "detail": {"GET /pet/{petId}": {"expected": ["200", "400", "404"], "used_in_script": ["200", "404"], "coverage_percent": 66.67}}}"#;
        let report = parse_status_code_report(raw, StatusCodeMode::Static).unwrap();
        assert_eq!(report.coverage_percent, Some(66.67));
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn summed_ratio_beats_mean_of_endpoints() {
        // 2/2 and 1/3: summed 3/5 = 60, per-endpoint mean (100 + 33.33) / 2 = 66.67.
        let raw = r#"{"coverage": 66.67, "detail": {
            "POST /pet": {"expected": ["200", "400"], "used_in_script": ["200", "400"]},
            "GET /pet/{petId}": {"expected": ["200", "400", "404"], "used_in_script": ["200"]}}}"#;
        let report = parse_status_code_report(raw, StatusCodeMode::Static).unwrap();
        assert_eq!(report.coverage_percent, Some(60.0));
        let mean = report
            .per_endpoint
            .values()
            .map(|e| e.observed.len() as f64 / e.expected.len() as f64 * 100.0)
            .sum::<f64>()
            / 2.0;
        assert_eq!(round2(mean), 66.67);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn empty_expected_is_undefined() {
        let raw = r#"{"coverage": 0, "detail": {"GET /a": {"expected": [], "used_in_script": []}}}"#;
        let report = parse_status_code_report(raw, StatusCodeMode::Static).unwrap();
        assert_eq!(report.coverage_percent, None);
        assert!(report.warnings.iter().any(|w| w.contains("undefined")));
    }

    #[test]
    fn dynamic_ignores_unexpected_codes_and_takes_numbers() {
        let raw = r#"{"coverage": 50, "detail": {"GET /items": {"expected": [200, "400"], "covered_after_execution": ["200", 418]}}}"#;
        let report = parse_status_code_report(raw, StatusCodeMode::Dynamic).unwrap();
        assert_eq!(report.per_endpoint["GET /items"].observed, vec!["200"]);
        assert_eq!(report.coverage_percent, Some(50.0));
    }

    #[test]
    fn dynamic_template_format_block_parses_cleanly() {
        // Same layout as the format block of the execution-results template.
        let raw = "{\n  \"coverage\": 50,\n  \"detail\":{\n    \"GET /items\": {\n      \"expected\": [\"200\", \"404\"],\n      \"covered_after_execution\": [\"200\"]\n    },\n      \"POST /items\": {\n        \"expected\": [\"201\", \"400\"],\n        \"covered_after_execution\": [\"201\"]\n      }\n  } \n}";
        let report = parse_status_code_report(raw, StatusCodeMode::Dynamic).unwrap();
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
        assert_eq!(report.coverage_percent, Some(50.0));
    }

    #[test]
    fn captured_codes_override_model_claims() {
        let raw = r#"{"coverage": 100, "detail": {"GET /items": {"expected": ["200", "404"], "covered_after_execution": ["200", "404"]}}}"#;
        let mut report = parse_status_code_report(raw, StatusCodeMode::Dynamic).unwrap();
        let captured = BTreeMap::from([("GET /items".to_string(), BTreeSet::from(["200".to_string(), "500".to_string()]))]);
        report.apply_captured(&captured);
        assert_eq!(report.per_endpoint["GET /items"].observed, vec!["200"]);
        assert_eq!(report.coverage_percent, Some(50.0));
        assert!(report.observed_from_capture);
    }

    #[test]
    fn endpoint_keys_normalize() {
        assert_eq!(normalize_endpoint_key("get pet/{petId}").as_deref(), Some("GET /pet/{petId}"));
        assert_eq!(normalize_endpoint_key("FETCH /x"), None);
        assert_eq!(normalize_endpoint_key("GET"), None);
    }

    #[test]
    fn fence_stripping() {
        assert_eq!(strip_code_fence("```python\nprint(1)\n```"), "print(1)\n");
        assert_eq!(strip_code_fence("print(1)\n"), "print(1)\n");
        assert_eq!(strip_code_fence("```\nx\n```\n\n"), "x\n");
        assert_eq!(strip_code_fence("```py\na\n```inner```\nb\n```"), "a\n```inner```\nb\n");
    }

    proptest! {
        #[test]
        fn status_global_is_summed_ratio(
            endpoints in prop::collection::vec((1usize..6, 0usize..6), 1..5)
        ) {
            let mut detail = Map::new();
            let (mut num, mut den) = (0, 0);
            for (i, (expected, observed)) in endpoints.iter().enumerate() {
                let observed = (*observed).min(*expected);
                let codes: Vec<String> = (0..*expected).map(|c| format!("{}", 200 + c)).collect();
                detail.insert(
                    format!("GET /e{i}"),
                    serde_json::json!({"expected": codes, "used_in_script": codes[..observed].to_vec()}),
                );
                num += observed;
                den += expected;
            }
            let raw = serde_json::json!({"coverage": 0, "detail": detail}).to_string();
            let report = parse_status_code_report(&raw, StatusCodeMode::Static).unwrap();
            let oracle = ((num as f64 / den as f64) * 10000.0).round() / 100.0;
            prop_assert_eq!(report.coverage_percent, Some(oracle));
            for e in report.per_endpoint.values() {
                prop_assert!(e.observed.iter().all(|c| e.expected.contains(c)));
            }
        }

        #[test]
        fn data_type_global_is_recomputed(
            endpoints in prop::collection::vec((0u64..8, 0u64..8), 1..5),
            stated in 0.0f64..100.0
        ) {
            let mut detail = Map::new();
            let (mut m, mut t) = (0u64, 0u64);
            for (i, (a, b)) in endpoints.iter().enumerate() {
                let (matched, total) = (*a.min(b), *a.max(b));
                detail.insert(format!("POST /d{i}"), serde_json::json!({"matched": matched, "total": total}));
                m += matched;
                t += total;
            }
            let raw = serde_json::json!({"coverage": stated, "detail": detail}).to_string();
            let report = parse_data_type_report(&raw).unwrap();
            let oracle = if t == 0 { 100.0 } else { ((m as f64 / t as f64) * 10000.0).round() / 100.0 };
            prop_assert_eq!(report.coverage_percent, oracle);
        }
    }
}
