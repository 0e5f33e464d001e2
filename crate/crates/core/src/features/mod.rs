//! Fixed-schema feature vectors for the acceptance predictors.

mod dataset;
mod hashing;
mod lexer;
mod schema;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::{ActionKind, TelemetryEvent};

pub use dataset::{build_dataset, RowMeta, TrainingDataset};
pub use hashing::hash_ngrams;
pub use lexer::{keyword_index, lexical_scan, LexicalSummary, Token, TokenKind, PYTHON_KEYWORDS};
pub use schema::{
    FeatureKind, FeatureSchema, FeatureSpec, FeatureStage, Stage, DEFAULT_HASH_DIMENSIONS, PREVIOUS_ACTIONS,
    SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("schema mismatch: expected {expected}, got {actual}")]
    SchemaMismatch { expected: String, actual: String },
    #[error("event {0} is not a shown event")]
    NotShown(u64),
    #[error("context event {context_id} is later than event {event_id}")]
    FutureContext { event_id: u64, context_id: u64 },
    #[error("feature `{0}` is not finite")]
    NonFinite(String),
    #[error("no labeled events to build a dataset from")]
    EmptyDataset,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Dense values laid out by a schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema_id: String,
}

/// Tokens of the prompt tail that feed the hashed n-gram buckets.
const PROMPT_TAIL_TOKENS: usize = 32;
const MAX_GAP_SECONDS: f64 = 30.0 * 60.0;

/// Extracts feature vectors for one schema. Pure and stateless.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureExtractor {
    schema: FeatureSchema,
    schema_id: String,
}

impl FeatureExtractor {
    pub fn new(schema: FeatureSchema) -> Result<Self, FeatureError> {
        schema.validate()?;
        let schema_id = schema.schema_id();
        Ok(Self { schema, schema_id })
    }

    pub fn for_stage(stage: Stage) -> Self {
        Self::new(FeatureSchema::new(stage, DEFAULT_HASH_DIMENSIONS)).expect("built-in schema is valid")
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn schema_id(&self) -> &str {
        &self.schema_id
    }

    pub fn stage(&self) -> Stage {
        self.schema.stage
    }

    /// Features of a shown `event` given the events before it in its session.
    pub fn extract(&self, event: &TelemetryEvent, context: &[TelemetryEvent]) -> Result<FeatureVector, FeatureError> {
        let mut values = Vec::with_capacity(self.schema.arity());
        self.extract_into(event, context, &mut values)?;
        Ok(FeatureVector {
            values,
            schema_id: self.schema_id.clone(),
        })
    }

    pub(crate) fn extract_into(
        &self,
        event: &TelemetryEvent,
        context: &[TelemetryEvent],
        v: &mut Vec<f64>,
    ) -> Result<(), FeatureError> {
        if event.action != ActionKind::Shown {
            return Err(FeatureError::NotShown(event.event_id));
        }
        if let Some(late) = context.iter().find(|c| c.timestamp_ms > event.timestamp_ms) {
            return Err(FeatureError::FutureContext {
                event_id: event.event_id,
                context_id: late.event_id,
            });
        }
        let start = v.len();
        let prompt = &event.prompt;
        let lex = lexical_scan(prompt);

        v.push(prompt.chars().count() as f64);
        v.push(prompt.lines().count() as f64);
        v.push(lex.tokens.len() as f64);
        v.push(lex.keyword_count() as f64);
        let mut kw = [0.0; PYTHON_KEYWORDS.len()];
        for t in &lex.tokens {
            if t.kind == TokenKind::Keyword {
                if let Some(i) = keyword_index(t.text) {
                    kw[i] += 1.0;
                }
            }
        }
        v.extend_from_slice(&kw);
        v.push(f64::from(lex.paren_balance));
        v.push(f64::from(lex.bracket_balance));
        v.push(f64::from(lex.brace_balance));
        let last_line = prompt.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
        v.push(flag(last_line.trim_start().starts_with('#')));
        v.push(flag(ends_alnum(prompt)));
        let tail = prompt.rsplit('\n').next().unwrap_or("");
        v.push(flag(prompt.contains('\n') && tail.trim().is_empty()));

        let mut recent = context.iter().rev();
        for _ in 0..PREVIOUS_ACTIONS {
            let prev = recent.next().map(|e| e.action);
            for a in ActionKind::ALL {
                v.push(flag(prev == Some(a)));
            }
            v.push(flag(prev.is_none()));
        }
        let since = context.last().map_or(0.0, |last| {
            let s = (event.timestamp_ms - last.timestamp_ms) as f64 / 1000.0;
            s.min(MAX_GAP_SECONDS).ln_1p()
        });
        v.push(since);
        v.push(context.len() as f64);
        let accepts = context.iter().filter(|e| e.action == ActionKind::Accepted).count() as f64;
        let rejects = context.iter().filter(|e| e.action == ActionKind::Rejected).count() as f64;
        v.push((accepts + 1.0) / (accepts + rejects + 2.0));

        let dims = self.schema.hash_dimensions;
        let tail_tokens: Vec<&str> = lex
            .tokens
            .iter()
            .skip(lex.tokens.len().saturating_sub(PROMPT_TAIL_TOKENS))
            .map(|t| t.text)
            .collect();
        let at = v.len();
        v.resize(at + dims, 0.0);
        hash_ngrams(&tail_tokens, &mut v[at..]);

        if self.schema.stage == Stage::WithSuggestion {
            let s = &event.suggestion;
            let slex = lexical_scan(s);
            v.push(s.chars().count() as f64);
            v.push(slex.tokens.len() as f64);
            v.push(s.lines().count().max(1) as f64);
            v.push(event.suggestion_confidence);
            v.push(slex.keyword_count() as f64);
            v.push(f64::from(slex.paren_balance));
            v.push(flag(has_comment_char(s)));
            v.push(flag(single_char_nonalpha(s)));
            v.push(flag(is_mid_word(prompt, s)));
            let toks: Vec<&str> = slex.tokens.iter().map(|t| t.text).collect();
            let at = v.len();
            v.resize(at + dims, 0.0);
            hash_ngrams(&toks, &mut v[at..]);
        }

        debug_assert_eq!(v.len() - start, self.schema.arity());
        if let Some(i) = v[start..].iter().position(|x| !x.is_finite()) {
            return Err(FeatureError::NonFinite(self.schema.features[i].name.clone()));
        }
        Ok(())
    }

    /// Errors unless `vector` was produced under this extractor's schema.
    pub fn check(&self, vector: &FeatureVector) -> Result<(), FeatureError> {
        if vector.schema_id != self.schema_id || vector.values.len() != self.schema.arity() {
            return Err(FeatureError::SchemaMismatch {
                expected: self.schema_id.clone(),
                actual: vector.schema_id.clone(),
            });
        }
        Ok(())
    }
}

/// Convenience wrapper: extracts with the default schema of `stage`.
pub fn extract(event: &TelemetryEvent, context: &[TelemetryEvent], stage: Stage) -> Result<FeatureVector, FeatureError> {
    FeatureExtractor::for_stage(stage).extract(event, context)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn ends_alnum(prompt: &str) -> bool {
    prompt.trim_end().chars().last().is_some_and(char::is_alphanumeric)
}

pub fn has_comment_char(suggestion: &str) -> bool {
    suggestion.contains('#')
}

/// Exactly one character, and not a letter.
pub fn single_char_nonalpha(suggestion: &str) -> bool {
    let mut it = suggestion.chars();
    matches!((it.next(), it.next()), (Some(c), None) if !c.is_alphabetic())
}

/// The prompt's last non-whitespace character and the suggestion's first
/// character are both alphanumeric.
pub fn is_mid_word(prompt: &str, suggestion: &str) -> bool {
    ends_alnum(prompt) && suggestion.chars().next().is_some_and(char::is_alphanumeric)
}
