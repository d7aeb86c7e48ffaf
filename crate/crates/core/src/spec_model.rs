//! Loading OpenAPI 3.x and Swagger 2.0 JSON documents into operation-level
//! records.
//!
//! Both document eras are normalized into the same [`ApiOperation`] shape.
//! Every schema reachable from an operation is inlined by [`resolve_refs`], so
//! downstream consumers (prompt rendering, metrics, the review UI) never have to
//! chase `$ref` pointers themselves.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Key inserted in place of a `$ref` that would re-enter a schema already
/// being expanded.
pub const CYCLE_MARKER_KEY: &str = "$cycle";

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("specification source {source_ref} is unreachable: {reason}")]
    Unreachable { source_ref: String, reason: String },
    #[error("specification body is not valid JSON: {0}")]
    NotJson(String),
    #[error("document has no paths section")]
    MissingPaths,
    #[error("no operations found in document")]
    NoOperations,
    #[error("dangling reference {pointer}")]
    DanglingRef { pointer: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HttpMethod {
    Get,
    Put,
    Post,
    Delete,
    Patch,
    Head,
    Options,
}

impl HttpMethod {
    pub const ALL: [HttpMethod; 7] = [
        HttpMethod::Get,
        HttpMethod::Put,
        HttpMethod::Post,
        HttpMethod::Delete,
        HttpMethod::Patch,
        HttpMethod::Head,
        HttpMethod::Options,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HttpMethod::Get => "GET",
            HttpMethod::Put => "PUT",
            HttpMethod::Post => "POST",
            HttpMethod::Delete => "DELETE",
            HttpMethod::Patch => "PATCH",
            HttpMethod::Head => "HEAD",
            HttpMethod::Options => "OPTIONS",
        }
    }

    /// Case-insensitive lookup, as used for both document keys and free text.
    pub fn parse(text: &str) -> Option<HttpMethod> {
        HttpMethod::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(text))
    }
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParameterLocation {
    Path,
    Query,
    Header,
    Cookie,
    Body,
}

impl ParameterLocation {
    fn parse(text: &str) -> Option<ParameterLocation> {
        match text {
            "path" => Some(ParameterLocation::Path),
            "query" => Some(ParameterLocation::Query),
            "header" => Some(ParameterLocation::Header),
            "cookie" => Some(ParameterLocation::Cookie),
            // Swagger 2.0 form fields travel in the request body.
            "body" | "formData" => Some(ParameterLocation::Body),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParameterLocation::Path => "path",
            ParameterLocation::Query => "query",
            ParameterLocation::Header => "header",
            ParameterLocation::Cookie => "cookie",
            ParameterLocation::Body => "body",
        }
    }
}

/// A JSON-schema tree with every internal `$ref` inlined. Reference cycles are
/// cut with an object of the form `{"$cycle": "<pointer>"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResolvedSchema(pub Value);

impl ResolvedSchema {
    pub fn as_value(&self) -> &Value {
        &self.0
    }

    pub fn cycle_markers(&self) -> usize {
        fn walk(v: &Value) -> usize {
            match v {
                Value::Object(map) => {
                    usize::from(map.contains_key(CYCLE_MARKER_KEY))
                        + map.values().map(walk).sum::<usize>()
                }
                Value::Array(items) => items.iter().map(walk).sum(),
                _ => 0,
            }
        }
        walk(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub location: ParameterLocation,
    pub required: bool,
    pub declared_type: String,
    pub resolved_schema: Option<ResolvedSchema>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpec {
    pub status_code: String,
    pub description: String,
    pub resolved_schema: Option<ResolvedSchema>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiOperation {
    pub id: String,
    pub path: String,
    pub method: HttpMethod,
    pub summary: String,
    pub description: String,
    pub parameters: Vec<ParameterSpec>,
    pub request_body_schema: Option<ResolvedSchema>,
    /// Declared responses in document order.
    pub responses: Vec<ResponseSpec>,
}

impl ApiOperation {
    /// The `"METHOD /path"` form used throughout prompts and checker reports.
    pub fn key(&self) -> String {
        format!("{} {}", self.method, self.path)
    }

    pub fn response(&self, status: &str) -> Option<&ResponseSpec> {
        self.responses.iter().find(|r| r.status_code == status)
    }

    /// Whether `status` is declared, either literally or through `default`.
    pub fn declares_status(&self, status: &str) -> bool {
        self.responses
            .iter()
            .any(|r| r.status_code == status || r.status_code == "default")
    }
}

/// Enumerable status codes of an operation; `default` is reported by flag only.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExpectedCodes {
    pub codes: BTreeSet<String>,
    pub has_default: bool,
}

pub fn expected_status_codes(op: &ApiOperation) -> ExpectedCodes {
    let mut out = ExpectedCodes::default();
    for response in &op.responses {
        if response.status_code == "default" {
            out.has_default = true;
        } else {
            out.codes.insert(response.status_code.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSpecification {
    pub title: String,
    pub source: String,
    pub version_tag: String,
    pub host_url: String,
    pub operations: Vec<ApiOperation>,
    pub warnings: Vec<String>,
    pub raw_document: Value,
}

impl ApiSpecification {
    pub fn operation(&self, id: &str) -> Option<&ApiOperation> {
        self.operations.iter().find(|op| op.id == id)
    }

    pub fn operation_by_key(&self, method: HttpMethod, path: &str) -> Option<&ApiOperation> {
        self.operations
            .iter()
            .find(|op| op.method == method && op.path == path)
    }

    /// Path prefix of the target host (`/api/v3` for petstore), without a
    /// trailing slash. Empty when the host URL has no path.
    pub fn base_path(&self) -> String {
        let rest = match self.host_url.split_once("://") {
            Some((_, rest)) => match rest.find('/') {
                Some(idx) => &rest[idx..],
                None => "",
            },
            None => self.host_url.as_str(),
        };
        rest.trim_end_matches('/').to_string()
    }

    /// Maps a concrete request (`GET /api/v3/pet/12`) onto its declared
    /// operation. Literal segments win over template segments on ties.
    pub fn match_request(&self, method: HttpMethod, request_path: &str) -> Option<&ApiOperation> {
        let path = request_path.split(['?', '#']).next().unwrap_or_default();
        let base = self.base_path();
        let local = if !base.is_empty() && path.starts_with(&base) {
            &path[base.len()..]
        } else {
            path
        };
        let local = if local.is_empty() { "/" } else { local };

        let mut best: Option<(&ApiOperation, usize)> = None;
        for op in self.operations.iter().filter(|op| op.method == method) {
            if let Some(hits) = path_template_match(&op.path, local) {
                if best.is_none_or(|(_, best_hits)| hits > best_hits) {
                    best = Some((op, hits));
                }
            }
        }
        best.map(|(op, _)| op)
    }
}

/// Matches a concrete path against a URI template such as `/pet/{petId}`.
/// Returns the number of literal segments that matched, or `None`.
pub fn path_template_match(template: &str, concrete: &str) -> Option<usize> {
    let template = split_segments(template);
    let concrete = split_segments(concrete);
    if template.len() != concrete.len() {
        return None;
    }
    let mut literal_hits = 0;
    for (t, c) in template.iter().zip(&concrete) {
        if t.starts_with('{') && t.ends_with('}') {
            if c.is_empty() {
                return None;
            }
        } else if t.eq_ignore_ascii_case(c) {
            literal_hits += 1;
        } else {
            return None;
        }
    }
    Some(literal_hits)
}

fn split_segments(path: &str) -> Vec<&str> {
    let trimmed = path.trim_matches('/');
    if trimmed.is_empty() {
        Vec::new()
    } else {
        trimmed.split('/').collect()
    }
}

fn is_url(source: &str) -> bool {
    source.starts_with("http://") || source.starts_with("https://")
}

/// Fetches a JSON document from an HTTP(S) URL or reads it from disk, then
/// parses it.
pub async fn load_spec(source: &str) -> Result<ApiSpecification, SpecError> {
    let body = if is_url(source) {
        let unreachable = |e: reqwest::Error| SpecError::Unreachable {
            source_ref: source.to_string(),
            reason: e.to_string(),
        };
        let response = reqwest::get(source).await.map_err(unreachable)?;
        if !response.status().is_success() {
            return Err(SpecError::Unreachable {
                source_ref: source.to_string(),
                reason: format!("HTTP {}", response.status()),
            });
        }
        response.text().await.map_err(unreachable)?
    } else {
        std::fs::read_to_string(Path::new(source)).map_err(|e| SpecError::Unreachable {
            source_ref: source.to_string(),
            reason: e.to_string(),
        })?
    };
    parse_spec(&body, source)
}

pub fn parse_spec(body: &str, source: &str) -> Result<ApiSpecification, SpecError> {
    let raw: Value = serde_json::from_str(body).map_err(|e| SpecError::NotJson(e.to_string()))?;
    if !raw.is_object() {
        return Err(SpecError::NotJson("top-level value is not an object".into()));
    }
    let (operations, warnings) = extract_operations(&raw)?;
    if operations.is_empty() {
        return Err(SpecError::NoOperations);
    }
    let title = raw
        .pointer("/info/title")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let version_tag = raw
        .get("openapi")
        .or_else(|| raw.get("swagger"))
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let host_url = host_url(&raw, source);
    Ok(ApiSpecification {
        title,
        source: source.to_string(),
        version_tag,
        host_url,
        operations,
        warnings,
        raw_document: raw,
    })
}

fn host_url(raw: &Value, source: &str) -> String {
    if let Some(server) = raw.pointer("/servers/0/url").and_then(Value::as_str) {
        if is_url(server) || !is_url(source) {
            return server.trim_end_matches('/').to_string();
        }
        // Relative server URL: anchor it at the origin the document came from.
        let origin = source
            .split_once("://")
            .map(|(scheme, rest)| {
                let host = rest.split('/').next().unwrap_or_default();
                format!("{scheme}://{host}")
            })
            .unwrap_or_default();
        return format!("{origin}/{}", server.trim_matches('/'))
            .trim_end_matches('/')
            .to_string();
    }
    let scheme = raw
        .pointer("/schemes/0")
        .and_then(Value::as_str)
        .unwrap_or("https");
    let base_path = raw
        .get("basePath")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .trim_end_matches('/');
    match raw.get("host").and_then(Value::as_str) {
        Some(host) => format!("{scheme}://{host}{base_path}"),
        None => base_path.to_string(),
    }
}

/// One operation per `(path, method)` pair, in document order. Malformed path
/// items are skipped and reported in the returned warnings.
pub fn extract_operations(raw: &Value) -> Result<(Vec<ApiOperation>, Vec<String>), SpecError> {
    let paths = raw
        .get("paths")
        .and_then(Value::as_object)
        .ok_or(SpecError::MissingPaths)?;
    let mut operations = Vec::new();
    let mut warnings = Vec::new();
    for (path, item) in paths {
        let Some(item) = item.as_object() else {
            warnings.push(format!("path item {path} is not an object; skipped"));
            continue;
        };
        if !path.starts_with('/') {
            warnings.push(format!("path {path} does not begin with '/'; skipped"));
            continue;
        }
        let shared_params = item
            .get("parameters")
            .and_then(Value::as_array)
            .cloned()
            .unwrap_or_default();
        for (key, body) in item {
            let Some(method) = HttpMethod::parse(key) else {
                continue;
            };
            let Some(body) = body.as_object() else {
                warnings.push(format!("{method} {path} is not an object; skipped"));
                continue;
            };
            let id = format!("op{}", operations.len() + 1);
            match build_operation(raw, id, path, method, body, &shared_params, &mut warnings)? {
                Some(op) => operations.push(op),
                None => warnings.push(format!("{method} {path} declares no responses; skipped")),
            }
        }
    }
    Ok((operations, warnings))
}

fn text_field(obj: &Map<String, Value>, key: &str) -> String {
    obj.get(key)
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string()
}

fn build_operation(
    raw: &Value,
    id: String,
    path: &str,
    method: HttpMethod,
    body: &Map<String, Value>,
    shared_params: &[Value],
    warnings: &mut Vec<String>,
) -> Result<Option<ApiOperation>, SpecError> {
    // Operation-level parameters override path-level ones with the same (name, in).
    let mut merged: Vec<Value> = Vec::new();
    let own = body
        .get("parameters")
        .and_then(Value::as_array)
        .cloned()
        .unwrap_or_default();
    for param in shared_params.iter().chain(own.iter()) {
        let resolved = resolve_refs(raw, param)?.0;
        let ident = |p: &Value| {
            (
                p.get("name").and_then(Value::as_str).map(str::to_string),
                p.get("in").and_then(Value::as_str).map(str::to_string),
            )
        };
        let key = ident(&resolved);
        merged.retain(|existing| ident(existing) != key);
        merged.push(resolved);
    }

    let mut parameters = Vec::new();
    let mut request_body_schema = None;
    for param in &merged {
        let name = param.get("name").and_then(Value::as_str).unwrap_or_default();
        let location_text = param.get("in").and_then(Value::as_str).unwrap_or_default();
        let Some(location) = ParameterLocation::parse(location_text) else {
            warnings.push(format!(
                "{method} {path}: parameter {name} has unknown location {location_text:?}; skipped"
            ));
            continue;
        };
        // Swagger 2.0 keeps type information on the parameter itself.
        let schema = match param.get("schema") {
            Some(schema) => Some(schema.clone()),
            None => {
                let mut inline = Map::new();
                for key in [
                    "type", "format", "items", "enum", "default", "minimum", "maximum",
                    "minLength", "maxLength", "pattern",
                ] {
                    if let Some(v) = param.get(key) {
                        inline.insert(key.to_string(), v.clone());
                    }
                }
                (!inline.is_empty()).then_some(Value::Object(inline))
            }
        };
        let declared_type = schema.as_ref().map(describe_type).unwrap_or_else(|| "unspecified".into());
        let required = location == ParameterLocation::Path
            || param.get("required").and_then(Value::as_bool).unwrap_or(false);
        let resolved_schema = schema.map(ResolvedSchema);
        if location_text == "body" && request_body_schema.is_none() {
            request_body_schema = resolved_schema.clone();
        }
        parameters.push(ParameterSpec {
            name: name.to_string(),
            location,
            required,
            declared_type,
            resolved_schema,
        });
    }

    if let Some(request_body) = body.get("requestBody") {
        let request_body = resolve_refs(raw, request_body)?.0;
        request_body_schema = pick_content_schema(&request_body).map(ResolvedSchema);
    }

    let mut responses = Vec::new();
    if let Some(declared) = body.get("responses").and_then(Value::as_object) {
        for (code, response) in declared {
            if !(code == "default" || (code.len() == 3 && code.chars().all(|c| c.is_ascii_digit()))) {
                warnings.push(format!(
                    "{method} {path}: response key {code:?} is neither a status code nor default; skipped"
                ));
                continue;
            }
            let response = resolve_refs(raw, response)?.0;
            let schema = response
                .get("schema")
                .cloned()
                .or_else(|| pick_content_schema(&response));
            responses.push(ResponseSpec {
                status_code: code.clone(),
                description: response
                    .get("description")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_string(),
                resolved_schema: schema.map(ResolvedSchema),
            });
        }
    }
    if responses.is_empty() {
        return Ok(None);
    }

    Ok(Some(ApiOperation {
        id,
        path: path.to_string(),
        method,
        summary: text_field(body, "summary"),
        description: text_field(body, "description"),
        parameters,
        request_body_schema,
        responses,
    }))
}

/// JSON content is preferred; otherwise the first declared media type wins.
fn pick_content_schema(holder: &Value) -> Option<Value> {
    let content = holder.get("content")?.as_object()?;
    content
        .iter()
        .find(|(mime, _)| mime.contains("json"))
        .or_else(|| content.iter().next())
        .and_then(|(_, media)| media.get("schema").cloned())
}

fn describe_type(schema: &Value) -> String {
    let mut text = match schema.get("type").and_then(Value::as_str) {
        Some("array") => {
            let inner = schema
                .get("items")
                .map(describe_type)
                .unwrap_or_else(|| "any".into());
            format!("array of {inner}")
        }
        Some(t) => t.to_string(),
        None if schema.get(CYCLE_MARKER_KEY).is_some() => "recursive object".into(),
        None if schema.get("properties").is_some() => "object".into(),
        None => "unspecified".into(),
    };
    if let Some(format) = schema.get("format").and_then(Value::as_str) {
        text.push_str(&format!(" ({format})"));
    }
    if let Some(values) = schema.get("enum").and_then(Value::as_array) {
        let values: Vec<String> = values.iter().map(plain).collect();
        text.push_str(&format!(" enum[{}]", values.join(", ")));
    }
    for key in ["default", "minimum", "maximum", "minLength", "maxLength", "pattern"] {
        if let Some(v) = schema.get(key) {
            text.push_str(&format!(" {key}={}", plain(v)));
        }
    }
    text
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Inlines every internal `$ref` reachable from `node`.
///
/// A reference that is already being expanded higher up the current branch is
/// replaced with a cycle marker instead of being followed again. External
/// references (not starting with `#`) are left untouched.
pub fn resolve_refs(raw: &Value, node: &Value) -> Result<ResolvedSchema, SpecError> {
    let mut stack = Vec::new();
    resolve_node(raw, node, &mut stack).map(ResolvedSchema)
}

fn resolve_node(raw: &Value, node: &Value, stack: &mut Vec<String>) -> Result<Value, SpecError> {
    match node {
        Value::Object(map) => {
            if let Some(Value::String(pointer)) = map.get("$ref") {
                if let Some(fragment) = pointer.strip_prefix('#') {
                    if stack.iter().any(|p| p == pointer) {
                        let mut marker = Map::new();
                        marker.insert(CYCLE_MARKER_KEY.into(), Value::String(pointer.clone()));
                        return Ok(Value::Object(marker));
                    }
                    let target = raw.pointer(fragment).ok_or_else(|| SpecError::DanglingRef {
                        pointer: pointer.clone(),
                    })?;
                    stack.push(pointer.clone());
                    let mut resolved = resolve_node(raw, target, stack)?;
                    stack.pop();
                    // Sibling keys next to a $ref refine the referenced schema.
                    if let Value::Object(target_map) = &mut resolved {
                        for (key, value) in map.iter().filter(|(k, _)| k.as_str() != "$ref") {
                            target_map.insert(key.clone(), resolve_node(raw, value, stack)?);
                        }
                    }
                    return Ok(resolved);
                }
            }
            let mut out = Map::with_capacity(map.len());
            for (key, value) in map {
                out.insert(key.clone(), resolve_node(raw, value, stack)?);
            }
            Ok(Value::Object(out))
        }
        Value::Array(items) => items
            .iter()
            .map(|item| resolve_node(raw, item, stack))
            .collect::<Result<Vec<_>, _>>()
            .map(Value::Array),
        other => Ok(other.clone()),
    }
}

/// Deterministic text block describing one operation: path, method, summary,
/// description, parameters and responses, always in that order.
pub fn render_operation_detail(op: &ApiOperation) -> String {
    let mut out = String::new();
    out.push_str(&format!("URI path: {}\n", op.path));
    out.push_str(&format!("Method: {}\n", op.method));
    out.push_str(&labelled("Summary", &op.summary));
    out.push_str(&labelled("Description", &op.description));
    if op.parameters.is_empty() {
        out.push_str("Input parameters: none\n");
    } else {
        out.push_str("Input parameters:\n");
        for p in &op.parameters {
            out.push_str(&format!(
                "- {} (in: {}, required: {}, type: {})\n",
                p.name,
                p.location.as_str(),
                p.required,
                p.declared_type
            ));
            if let Some(schema) = &p.resolved_schema {
                out.push_str(&format!("  schema: {}\n", schema.0));
            }
        }
    }
    match &op.request_body_schema {
        Some(schema) => out.push_str(&format!("Request body schema: {}\n", schema.0)),
        None => out.push_str("Request body schema: none\n"),
    }
    out.push_str("Responses:\n");
    for r in &op.responses {
        out.push_str(&format!("- {}: {}\n", r.status_code, r.description));
        if let Some(schema) = &r.resolved_schema {
            out.push_str(&format!("  schema: {}\n", schema.0));
        }
    }
    out
}

fn labelled(label: &str, text: &str) -> String {
    if text.is_empty() {
        format!("{label}:\n")
    } else {
        format!("{label}: {text}\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn fixture(name: &str) -> String {
        let path = format!(
            "{}/../testkit/fixtures/specs/{name}",
            env!("CARGO_MANIFEST_DIR")
        );
        std::fs::read_to_string(path).unwrap()
    }

    fn petstore() -> ApiSpecification {
        parse_spec(&fixture("petstore3.json"), "https://petstore3.swagger.io/api/v3/openapi.json")
            .unwrap()
    }

    #[test]
    fn petstore_has_nineteen_operations() {
        let spec = petstore();
        assert_eq!(spec.operations.len(), 19);
        assert_eq!(spec.version_tag, "3.0.4");
        assert_eq!(spec.host_url, "https://petstore3.swagger.io/api/v3");
        assert_eq!(spec.base_path(), "/api/v3");
    }

    #[test]
    fn catfact_has_three_get_operations() {
        let spec = parse_spec(&fixture("catfact.json"), "catfact.json").unwrap();
        assert_eq!(spec.operations.len(), 3);
        assert!(spec.operations.iter().all(|op| op.method == HttpMethod::Get));
        assert_eq!(spec.host_url, "https://catfact.ninja");
    }

    #[test]
    fn swagger2_body_parameter_becomes_request_body() {
        let spec = parse_spec(&fixture("items.json"), "items.json").unwrap();
        assert_eq!(spec.version_tag, "2.0");
        assert_eq!(spec.host_url, "http://127.0.0.1");
        let post = spec.operation_by_key(HttpMethod::Post, "/items").unwrap();
        let body = post.request_body_schema.as_ref().unwrap();
        assert_eq!(body.0["required"], json!(["name", "category"]));
        let get = spec.operation_by_key(HttpMethod::Get, "/items/{itemId}").unwrap();
        assert_eq!(get.parameters[0].declared_type, "integer (int64)");
    }

    #[test]
    fn empty_paths_is_no_operations() {
        let err = parse_spec(r#"{"openapi":"3.0.0","paths":{}}"#, "x").unwrap_err();
        assert!(matches!(err, SpecError::NoOperations));
        assert_eq!(err.to_string(), "no operations found in document");
    }

    #[test]
    fn missing_paths_and_non_json_are_errors() {
        assert!(matches!(parse_spec(r#"{"openapi":"3.0.0"}"#, "x"), Err(SpecError::MissingPaths)));
        assert!(matches!(parse_spec("openapi: 3.0.0\n", "x"), Err(SpecError::NotJson(_))));
    }

    #[test]
    fn get_and_post_on_one_path() {
        let doc = json!({"paths": {"/a": {
            "get": {"responses": {"200": {"description": "ok"}}},
            "post": {"responses": {"201": {"description": "made"}}}
        }}});
        let (ops, warnings) = extract_operations(&doc).unwrap();
        assert_eq!(ops.len(), 2);
        assert!(warnings.is_empty());
        assert_eq!(ops[0].key(), "GET /a");
        assert_eq!(ops[1].key(), "POST /a");
    }

    #[test]
    fn parameters_only_path_item_yields_nothing() {
        let doc = json!({"paths": {"/a": {"parameters": [{"name": "x", "in": "query"}]}}});
        let (ops, _) = extract_operations(&doc).unwrap();
        assert!(ops.is_empty());
    }

    #[test]
    fn malformed_path_item_is_skipped_with_warning() {
        let doc = json!({"paths": {
            "/bad": 7,
            "/good": {"get": {"responses": {"200": {"description": "ok"}}}}
        }});
        let (ops, warnings) = extract_operations(&doc).unwrap();
        assert_eq!(ops.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("/bad"));
    }

    #[test]
    fn pet_by_id_has_get_post_delete() {
        let spec = petstore();
        let methods: Vec<HttpMethod> = spec
            .operations
            .iter()
            .filter(|op| op.path == "/pet/{petId}")
            .map(|op| op.method)
            .collect();
        assert_eq!(methods, vec![HttpMethod::Get, HttpMethod::Post, HttpMethod::Delete]);
    }

    #[test]
    fn path_parameters_are_always_required() {
        let doc = json!({"paths": {"/a/{id}": {"get": {
            "parameters": [{"name": "id", "in": "path", "schema": {"type": "string"}}],
            "responses": {"200": {"description": "ok"}}
        }}}});
        let (ops, _) = extract_operations(&doc).unwrap();
        assert!(ops[0].parameters[0].required);
    }

    #[test]
    fn path_level_parameters_are_merged_and_overridden() {
        let doc = json!({"paths": {"/a/{id}": {
            "parameters": [
                {"name": "id", "in": "path", "schema": {"type": "string"}},
                {"name": "q", "in": "query", "schema": {"type": "string"}}
            ],
            "get": {
                "parameters": [{"name": "q", "in": "query", "required": true, "schema": {"type": "integer"}}],
                "responses": {"200": {"description": "ok"}}
            }
        }}});
        let (ops, _) = extract_operations(&doc).unwrap();
        let params = &ops[0].parameters;
        assert_eq!(params.len(), 2);
        assert_eq!(params[1].declared_type, "integer");
        assert!(params[1].required);
    }

    #[test]
    fn resolve_without_refs_is_identity() {
        let doc = json!({});
        let node = json!({"type": "object", "properties": {"a": {"type": "string"}}});
        assert_eq!(resolve_refs(&doc, &node).unwrap().0, node);
    }

    #[test]
    fn resolve_inlines_two_levels() {
        let doc = json!({"definitions": {
            "Outer": {"type": "object", "properties": {"inner": {"$ref": "#/definitions/Inner"}}},
            "Inner": {"type": "integer"}
        }});
        let node = json!({"$ref": "#/definitions/Outer"});
        let expected = json!({"type": "object", "properties": {"inner": {"type": "integer"}}});
        assert_eq!(resolve_refs(&doc, &node).unwrap().0, expected);
    }

    #[test]
    fn self_reference_is_cut_with_one_marker() {
        let doc = json!({"components": {"schemas": {"Node": {
            "type": "object",
            "properties": {"next": {"$ref": "#/components/schemas/Node"}}
        }}}});
        let resolved = resolve_refs(&doc, &json!({"$ref": "#/components/schemas/Node"})).unwrap();
        assert_eq!(resolved.cycle_markers(), 1);
        assert_eq!(
            resolved.0["properties"]["next"],
            json!({"$cycle": "#/components/schemas/Node"})
        );
    }

    #[test]
    fn dangling_ref_names_pointer() {
        let err = resolve_refs(&json!({}), &json!({"$ref": "#/definitions/Nope"})).unwrap_err();
        assert_eq!(err.to_string(), "dangling reference #/definitions/Nope");
    }

    #[test]
    fn shared_definition_used_twice_is_not_a_cycle() {
        let doc = json!({"definitions": {"Tag": {"type": "string"}}});
        let node = json!({"a": {"$ref": "#/definitions/Tag"}, "b": {"$ref": "#/definitions/Tag"}});
        let resolved = resolve_refs(&doc, &node).unwrap();
        assert_eq!(resolved.cycle_markers(), 0);
        assert_eq!(resolved.0["b"], json!({"type": "string"}));
    }

    #[test]
    fn fact_detail_has_none_parameters_when_empty() {
        let doc = json!({"paths": {"/fact": {"get": {
            "summary": "Get Random Fact",
            "responses": {"200": {"description": "ok"}}
        }}}});
        let (ops, _) = extract_operations(&doc).unwrap();
        let text = render_operation_detail(&ops[0]);
        assert!(text.contains("Input parameters: none\n"), "{text}");
        assert_eq!(text, render_operation_detail(&ops[0]));
    }

    #[test]
    fn pet_by_id_detail_lists_parameter_and_statuses() {
        let spec = petstore();
        let op = spec.operation_by_key(HttpMethod::Get, "/pet/{petId}").unwrap();
        let text = render_operation_detail(op);
        assert!(text.starts_with("URI path: /pet/{petId}\nMethod: GET\nSummary: Find pet by ID.\n"));
        assert!(text.contains("- petId (in: path, required: true, type: integer (int64))"));
        for status in ["- 200: ", "- 400: ", "- 404: "] {
            assert!(text.contains(status), "missing {status} in {text}");
        }
        assert!(!text.contains("$ref"));
    }

    #[test]
    fn expected_codes_exclude_default() {
        let spec = petstore();
        let op = spec.operation_by_key(HttpMethod::Get, "/pet/{petId}").unwrap();
        let codes = expected_status_codes(op);
        assert_eq!(codes.codes, ["200", "400", "404"].map(String::from).into());
        assert!(codes.has_default);

        let only_default = ApiOperation {
            responses: vec![ResponseSpec {
                status_code: "default".into(),
                description: String::new(),
                resolved_schema: None,
            }],
            ..op.clone()
        };
        let codes = expected_status_codes(&only_default);
        assert!(codes.codes.is_empty());
        assert!(codes.has_default);
    }

    #[test]
    fn match_request_prefers_literal_segments() {
        let spec = petstore();
        let op = spec.match_request(HttpMethod::Get, "/api/v3/pet/findByStatus?status=sold").unwrap();
        assert_eq!(op.path, "/pet/findByStatus");
        let op = spec.match_request(HttpMethod::Get, "/api/v3/pet/12").unwrap();
        assert_eq!(op.path, "/pet/{petId}");
        assert!(spec.match_request(HttpMethod::Patch, "/api/v3/pet/12").is_none());
    }

    #[test]
    fn operation_count_matches_raw_method_keys() {
        for name in ["petstore3.json", "catfact.json", "items.json"] {
            let spec = parse_spec(&fixture(name), name).unwrap();
            let raw_count: usize = spec.raw_document["paths"]
                .as_object()
                .unwrap()
                .values()
                .map(|item| {
                    item.as_object()
                        .unwrap()
                        .keys()
                        .filter(|k| HttpMethod::parse(k).is_some())
                        .count()
                })
                .sum();
            assert_eq!(spec.operations.len(), raw_count, "{name}");
            let mut seen = BTreeSet::new();
            for op in &spec.operations {
                assert!(seen.insert(op.key()), "duplicate {}", op.key());
                assert!(expected_status_codes(op)
                    .codes
                    .iter()
                    .all(|c| op.response(c).is_some()));
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_json() -> impl Strategy<Value = Value> {
            let leaf = prop_oneof![
                Just(Value::Null),
                any::<bool>().prop_map(Value::Bool),
                "[a-z]{0,4}".prop_map(Value::String),
                Just(json!({"$ref": "#/definitions/A"})),
                Just(json!({"$ref": "#/definitions/B"})),
            ];
            leaf.prop_recursive(3, 24, 4, |inner| {
                prop_oneof![
                    prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
                    prop::collection::btree_map("[a-c]", inner, 0..4)
                        .prop_map(|m| Value::Object(m.into_iter().collect())),
                ]
            })
        }

        proptest! {
            #[test]
            fn resolving_twice_changes_nothing(node in arb_json()) {
                let doc = json!({"definitions": {
                    "A": {"type": "object", "properties": {"self": {"$ref": "#/definitions/A"}, "b": {"$ref": "#/definitions/B"}}},
                    "B": {"type": "array", "items": {"$ref": "#/definitions/A"}}
                }});
                let once = resolve_refs(&doc, &node).unwrap();
                let twice = resolve_refs(&doc, &once.0).unwrap();
                prop_assert_eq!(once, twice);
            }
        }
    }
}
