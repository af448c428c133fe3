//! Prompt templates and the output schemas judge responses must satisfy.
//!
//! Templates use `{{name}}` placeholders. Every placeholder is a required
//! binding. Schemas are checked locally on every response by deserializing
//! into the expected shape.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{JudgeRequest, ProviderError, Result};

pub const PAGE_FILTER: &str = "page_filter";
pub const EXTRACT_CHALLENGES: &str = "extract_challenges";
pub const PAIR_MATCH: &str = "pair_match";
pub const VALIDATE_RESULTS: &str = "validate_results";

const REFORMAT: &str = include_str!("../../prompts/reformat.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaId {
    /// `{"score": 0..=10}`
    LikelihoodScore,
    /// `[{"title", "description", "wish", "daily_action"}, ...]`, all strings.
    ChallengeList,
    /// `{"duplicate": bool}`
    DuplicateVerdict,
    /// `[bool, ...]`
    RelevanceList,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LikelihoodShape {
    score: i64,
}

#[derive(Deserialize)]
struct ChallengeItemShape {
    #[serde(default)]
    #[allow(dead_code)]
    title: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    wish: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    daily_action: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DuplicateShape {
    #[allow(dead_code)]
    duplicate: bool,
}

impl SchemaId {
    /// Returns a description of the first problem found, if any.
    pub fn check(&self, value: &Value) -> std::result::Result<(), String> {
        let shape_err = |e: serde_json::Error| e.to_string();
        match self {
            SchemaId::LikelihoodScore => {
                let s: LikelihoodShape = serde_json::from_value(value.clone()).map_err(shape_err)?;
                if !(0..=10).contains(&s.score) {
                    return Err(format!("score {} outside 0..=10", s.score));
                }
            }
            SchemaId::ChallengeList => {
                let _: Vec<ChallengeItemShape> =
                    serde_json::from_value(value.clone()).map_err(shape_err)?;
            }
            SchemaId::DuplicateVerdict => {
                let _: DuplicateShape = serde_json::from_value(value.clone()).map_err(shape_err)?;
            }
            SchemaId::RelevanceList => {
                let _: Vec<bool> = serde_json::from_value(value.clone()).map_err(shape_err)?;
            }
        }
        Ok(())
    }

    /// JSON Schema document sent to remote providers that support
    /// constrained decoding.
    pub fn json_schema(&self) -> Value {
        match self {
            SchemaId::LikelihoodScore => json!({
                "type": "object",
                "properties": {"score": {"type": "integer", "minimum": 0, "maximum": 10}},
                "required": ["score"],
                "additionalProperties": false
            }),
            SchemaId::ChallengeList => json!({
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "title": {"type": "string"},
                        "description": {"type": "string"},
                        "wish": {"type": "string"},
                        "daily_action": {"type": "string"}
                    },
                    "required": ["title", "description", "wish", "daily_action"]
                }
            }),
            SchemaId::DuplicateVerdict => json!({
                "type": "object",
                "properties": {"duplicate": {"type": "boolean"}},
                "required": ["duplicate"],
                "additionalProperties": false
            }),
            SchemaId::RelevanceList => json!({
                "type": "array",
                "items": {"type": "boolean"}
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: String,
    pub text: String,
    pub schema: SchemaId,
}

impl Template {
    pub fn new(id: impl Into<String>, text: impl Into<String>, schema: SchemaId) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            schema,
        }
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<String> {
        let mut names = Vec::new();
        let mut rest = self.text.as_str();
        while let Some(start) = rest.find("{{") {
            let after = &rest[start + 2..];
            let Some(end) = after.find("}}") else { break };
            let name = after[..end].trim().to_string();
            if !names.contains(&name) {
                names.push(name);
            }
            rest = &after[end + 2..];
        }
        names
    }

    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<String> {
        let mut out = String::with_capacity(self.text.len());
        let mut rest = self.text.as_str();
        while let Some(start) = rest.find("{{") {
            let after = &rest[start + 2..];
            let Some(end) = after.find("}}") else { break };
            let name = after[..end].trim();
            let value = bindings
                .get(name)
                .ok_or_else(|| ProviderError::MissingBinding {
                    template: self.id.clone(),
                    name: name.to_string(),
                })?;
            out.push_str(&rest[..start]);
            out.push_str(value);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct PromptRegistry {
    templates: BTreeMap<String, Template>,
}

impl Default for PromptRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register(Template::new(
            PAGE_FILTER,
            include_str!("../../prompts/page_filter.txt"),
            SchemaId::LikelihoodScore,
        ));
        reg.register(Template::new(
            EXTRACT_CHALLENGES,
            include_str!("../../prompts/extract_challenges.txt"),
            SchemaId::ChallengeList,
        ));
        reg.register(Template::new(
            PAIR_MATCH,
            include_str!("../../prompts/pair_match.txt"),
            SchemaId::DuplicateVerdict,
        ));
        reg.register(Template::new(
            VALIDATE_RESULTS,
            include_str!("../../prompts/validate_results.txt"),
            SchemaId::RelevanceList,
        ));
        reg
    }
}

impl PromptRegistry {
    pub fn empty() -> Self {
        Self {
            templates: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, template: Template) {
        self.templates.insert(template.id.clone(), template);
    }

    pub fn get(&self, id: &str) -> Result<&Template> {
        self.templates
            .get(id)
            .ok_or_else(|| ProviderError::UnknownTemplate(id.to_string()))
    }

    /// Looks up the template, checks the requested schema matches it and fills
    /// in every placeholder.
    pub fn render(&self, request: &JudgeRequest) -> Result<String> {
        let template = self.get(&request.template)?;
        if template.schema != request.schema {
            return Err(ProviderError::SchemaViolation {
                template: request.template.clone(),
                schema: request.schema,
                detail: format!("template expects schema {:?}", template.schema),
            });
        }
        template.render(&request.bindings)
    }
}

/// Follow-up prompt asking the model to restate `previous` as conforming
/// JSON.
pub fn reformat_prompt(schema: SchemaId, previous: &str, problem: &str) -> String {
    REFORMAT
        .replace("{{problem}}", problem)
        .replace("{{schema}}", &schema.json_schema().to_string())
        .replace("{{previous}}", previous)
}

/// Pulls a JSON value out of model text: tolerates code fences and leading
/// or trailing prose around a single JSON object or array.
pub fn parse_model_json(raw: &str) -> std::result::Result<Value, String> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str(trimmed) {
        return Ok(v);
    }
    let unfenced = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|s| s.trim_end().strip_suffix("```"))
        .map(str::trim);
    if let Some(inner) = unfenced {
        if let Ok(v) = serde_json::from_str(inner) {
            return Ok(v);
        }
    }
    let start = trimmed.find(['{', '[']);
    let end = trimmed.rfind(['}', ']']);
    if let (Some(s), Some(e)) = (start, end) {
        if s < e {
            if let Ok(v) = serde_json::from_str(&trimmed[s..=e]) {
                return Ok(v);
            }
        }
    }
    Err("no JSON value found in response".into())
}
