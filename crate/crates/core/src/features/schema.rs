use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::lexer::PYTHON_KEYWORDS;
use super::FeatureError;
use crate::telemetry::ActionKind;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_HASH_DIMENSIONS: usize = 64;
/// Number of previous actions encoded one-hot.
pub const PREVIOUS_ACTIONS: usize = 4;

/// Which predictor a schema feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Prompt and session context only; runs before a suggestion exists.
    PromptOnly,
    /// Prompt, context and the generated suggestion.
    WithSuggestion,
}

impl Stage {
    pub fn number(self) -> u8 {
        match self {
            Stage::PromptOnly => 1,
            Stage::WithSuggestion => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Stage::PromptOnly),
            2 => Some(Stage::WithSuggestion),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Boolean,
    HashedBucket,
}

/// Stages a feature is available in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureStage {
    Both,
    SuggestionOnly,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub stage: FeatureStage,
}

/// Ordered feature manifest. Stored next to every trained model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: u32,
    pub stage: Stage,
    pub hash_dimensions: usize,
    pub features: Vec<FeatureSpec>,
}

fn spec(name: impl Into<String>, kind: FeatureKind, stage: FeatureStage) -> FeatureSpec {
    FeatureSpec {
        name: name.into(),
        kind,
        stage,
    }
}

impl FeatureSchema {
    pub fn new(stage: Stage, hash_dimensions: usize) -> Self {
        use FeatureKind::*;
        use FeatureStage::*;
        let mut f = vec![
            spec("prompt_chars", Numeric, Both),
            spec("prompt_lines", Numeric, Both),
            spec("document_tokens", Numeric, Both),
            spec("prompt_keyword_count", Numeric, Both),
        ];
        f.extend(PYTHON_KEYWORDS.iter().map(|k| spec(format!("prompt_kw_{k}"), Numeric, Both)));
        f.extend([
            spec("prompt_paren_balance", Numeric, Both),
            spec("prompt_bracket_balance", Numeric, Both),
            spec("prompt_brace_balance", Numeric, Both),
            spec("prompt_last_line_comment", Boolean, Both),
            spec("prompt_ends_alnum", Boolean, Both),
            spec("prompt_ends_newline", Boolean, Both),
        ]);
        for k in 1..=PREVIOUS_ACTIONS {
            for a in ActionKind::ALL {
                f.push(spec(format!("prev{k}_{a}"), Boolean, Both));
            }
            f.push(spec(format!("prev{k}_none"), Boolean, Both));
        }
        f.extend([
            spec("log_seconds_since_prev", Numeric, Both),
            spec("session_event_index", Numeric, Both),
            spec("session_accept_rate", Numeric, Both),
        ]);
        f.extend((0..hash_dimensions).map(|i| spec(format!("prompt_hash_{i}"), HashedBucket, Both)));
        if stage == Stage::WithSuggestion {
            f.extend([
                spec("suggestion_chars", Numeric, SuggestionOnly),
                spec("suggestion_tokens", Numeric, SuggestionOnly),
                spec("suggestion_lines", Numeric, SuggestionOnly),
                spec("suggestion_confidence", Numeric, SuggestionOnly),
                spec("suggestion_keyword_count", Numeric, SuggestionOnly),
                spec("suggestion_paren_balance", Numeric, SuggestionOnly),
                spec("has_comment_char", Boolean, SuggestionOnly),
                spec("single_char_nonalpha", Boolean, SuggestionOnly),
                spec("mid_word", Boolean, SuggestionOnly),
            ]);
            f.extend(
                (0..hash_dimensions).map(|i| spec(format!("suggestion_hash_{i}"), HashedBucket, SuggestionOnly)),
            );
        }
        Self {
            version: SCHEMA_VERSION,
            stage,
            hash_dimensions,
            features: f,
        }
    }

    pub fn arity(&self) -> usize {
        self.features.len()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Truncated SHA-256 of the manifest.
    pub fn schema_id(&self) -> String {
        let json = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(FeatureError::InvalidSchema(format!("duplicate feature `{}`", f.name)));
            }
            if self.stage == Stage::PromptOnly && f.stage == FeatureStage::SuggestionOnly {
                return Err(FeatureError::InvalidSchema(format!(
                    "stage-1 schema contains suggestion feature `{}`",
                    f.name
                )));
            }
        }
        if self.version != SCHEMA_VERSION {
            return Err(FeatureError::InvalidSchema(format!("unsupported version {}", self.version)));
        }
        if *self != Self::new(self.stage, self.hash_dimensions) {
            return Err(FeatureError::InvalidSchema("manifest does not match the built-in layout".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_schemas_validate() {
        for stage in [Stage::PromptOnly, Stage::WithSuggestion] {
            FeatureSchema::new(stage, 64).validate().unwrap();
        }
        let s1 = FeatureSchema::new(Stage::PromptOnly, 64);
        let s2 = FeatureSchema::new(Stage::WithSuggestion, 64);
        assert!(s2.arity() > s1.arity());
        assert_ne!(s1.schema_id(), s2.schema_id());
        assert!(s1.features.iter().all(|f| f.stage == FeatureStage::Both));
        assert_eq!(s2.features[..s1.arity()], s1.features[..]);
    }

    #[test]
    fn suggestion_feature_in_stage1_rejected() {
        let mut s = FeatureSchema::new(Stage::PromptOnly, 8);
        s.features.push(spec("mid_word", FeatureKind::Boolean, FeatureStage::SuggestionOnly));
        assert!(s.validate().is_err());
        let mut d = FeatureSchema::new(Stage::PromptOnly, 8);
        d.features.push(d.features[0].clone());
        assert!(d.validate().is_err());
    }
}
