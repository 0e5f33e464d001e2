//! Code-like prompt and suggestion text.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::LatentState;

const IDENTS: &[&str] = &[
    "data", "value", "result", "items", "model", "config", "index", "count", "total", "path",
    "name", "args", "kwargs", "buffer", "matrix", "diagonal", "numpy", "pandas", "frame", "row",
    "column", "weights", "labels", "scores", "loss", "batch", "epoch", "logger", "client", "request",
    "response", "payload", "header", "token", "parser", "reader", "writer", "cache", "queue", "graph",
    "node", "edge", "parent", "child", "left", "right", "offset", "length", "width", "height",
    "image", "pixel", "vector", "scalar", "tensor", "device", "session", "cursor", "record", "schema",
];

const VERBS: &[&str] = &[
    "compute", "load", "parse", "update", "check", "build", "normalize", "filter", "sort", "merge",
];

const SINGLE_CHARS: &[&str] = &[")", "]", "}", ":", ",", ".", ";", "(", "="];

/// Parameters of the text sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextConfig {
    /// Number of identifiers drawn from the built-in pool (4..=60).
    pub vocab_size: usize,
    /// Mean number of statements in a multi-token code suggestion.
    pub mean_statements: f64,
    /// Mean number of lines of prompt context.
    pub mean_prompt_lines: f64,
    /// Probability that the prompt ends with the latent state's typical line.
    pub state_cue_rate: f64,
    pub comment_rate: f64,
    pub single_char_rate: f64,
    pub mid_word_rate: f64,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self {
            vocab_size: 60,
            mean_statements: 1.5,
            mean_prompt_lines: 8.0,
            state_cue_rate: 0.5,
            comment_rate: 0.06,
            single_char_rate: 0.05,
            mid_word_rate: 0.08,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionKind {
    Code,
    Comment,
    SingleChar,
    MidWord,
}

pub(crate) struct TextSampler<'a> {
    cfg: &'a TextConfig,
}

impl<'a> TextSampler<'a> {
    pub fn new(cfg: &'a TextConfig) -> Self {
        Self { cfg }
    }

    fn ident<R: Rng + ?Sized>(&self, rng: &mut R) -> &'static str {
        let n = self.cfg.vocab_size.clamp(4, IDENTS.len());
        IDENTS[rng.random_range(0..n)]
    }

    fn verb<R: Rng + ?Sized>(rng: &mut R) -> &'static str {
        VERBS[rng.random_range(0..VERBS.len())]
    }

    fn statement<R: Rng + ?Sized>(&self, rng: &mut R) -> String {
        let (a, b, c) = (self.ident(rng), self.ident(rng), self.ident(rng));
        match rng.random_range(0..9) {
            0 => format!("{a} = {b}({c})"),
            1 => format!("return {a}"),
            2 => format!("{a}.{b}({c})"),
            3 => format!("if {a} is None:\n    return {b}"),
            4 => format!("for {a} in {b}:\n    {c}.append({a})"),
            5 => format!("{a} = [{b} for {b} in {c}]"),
            6 => format!("{a} += {b}[{c}]"),
            7 => format!("try:\n    {a} = {b}[{c}]\nexcept KeyError:\n    pass"),
            _ => format!("{a} = {{\"{b}\": {c}}}"),
        }
    }

    fn context_line<R: Rng + ?Sized>(&self, rng: &mut R) -> String {
        match rng.random_range(0..6) {
            0 => format!("import {}", self.ident(rng)),
            1 => format!("def {}({}):", self.ident(rng), self.ident(rng)),
            2 => format!("class {}:", self.ident(rng)),
            3 => format!("# {} {}", Self::verb(rng), self.ident(rng)),
            _ => self.statement(rng).replace('\n', " "),
        }
    }

    /// The cursor-side ending of a prompt. All endings finish on a
    /// non-alphanumeric character so that only explicit mid-word prompts end
    /// inside an identifier.
    fn ending<R: Rng + ?Sized>(&self, state: LatentState, rng: &mut R) -> String {
        let cue = rng.random::<f64>() < self.cfg.state_cue_rate;
        let kind = if cue { state.index() } else { rng.random_range(0..LatentState::COUNT) };
        let (a, b) = (self.ident(rng), self.ident(rng));
        match LatentState::from_index(kind).unwrap_or(state) {
            LatentState::PromptCrafting => format!("# {} the {a} from {b}\n", Self::verb(rng)),
            LatentState::WritingDocumentation => format!("    \"\"\"{} {a}.\n    ", Self::verb(rng)),
            LatentState::LookingUpDocumentation => format!("from {a} import ("),
            LatentState::DebuggingTestingCode => format!("assert {a} == "),
            LatentState::WritingNewFunctionality | LatentState::ThinkingAboutNewCode => {
                format!("def {a}({b}):\n    ")
            }
            LatentState::EditingWrittenCode | LatentState::EditingLastSuggestion => format!("{a} = {b}("),
            LatentState::WaitingForSuggestion => format!("{a}.{b}("),
            LatentState::ThinkingVerifyingSuggestion | LatentState::DeferringThoughtForLater => {
                format!("for {a} in {b}:\n        ")
            }
        }
    }

    pub fn prompt<R: Rng + ?Sized>(&self, state: LatentState, rng: &mut R) -> String {
        let lines = 1 + Poisson::new(self.cfg.mean_prompt_lines.max(0.1))
            .expect("positive mean")
            .sample(rng) as usize;
        let mut s = String::new();
        for _ in 0..lines {
            s.push_str(&self.context_line(rng));
            s.push('\n');
        }
        s.push_str(&self.ending(state, rng));
        s
    }

    /// Samples a suggestion whose shape depends on the latent quality `q`:
    /// low quality makes comment, single-character and mid-word suggestions
    /// more likely and code suggestions shorter. A mid-word suggestion also
    /// appends the identifier prefix to `prompt`.
    pub fn suggestion<R: Rng + ?Sized>(&self, q: f64, prompt: &mut String, rng: &mut R) -> (String, SuggestionKind) {
        let w = 2.0 / (1.0 + (1.5 * q).exp());
        let u: f64 = rng.random();
        let single = self.cfg.single_char_rate * w;
        let mid = single + self.cfg.mid_word_rate * w;
        let comment = mid + self.cfg.comment_rate * w;
        if u < single {
            let c = SINGLE_CHARS[rng.random_range(0..SINGLE_CHARS.len())];
            (c.to_string(), SuggestionKind::SingleChar)
        } else if u < mid {
            let word = loop {
                let w = self.ident(rng);
                if w.len() >= 3 {
                    break w;
                }
            };
            let cut = rng.random_range(1..word.len() - 1);
            prompt.push_str(&word[..cut]);
            let tail = if rng.random::<bool>() { "()" } else { "" };
            (format!("{}{tail}", &word[cut..]), SuggestionKind::MidWord)
        } else if u < comment {
            (
                format!("# {} {} {}", Self::verb(rng), self.ident(rng), self.ident(rng)),
                SuggestionKind::Comment,
            )
        } else {
            let mean = (self.cfg.mean_statements * (0.35 * q).exp()).max(0.05);
            let n = 1 + Poisson::new(mean).expect("positive mean").sample(rng) as usize;
            let body: Vec<String> = (0..n).map(|_| self.statement(rng)).collect();
            (body.join("\n"), SuggestionKind::Code)
        }
    }

    /// A different suggestion for the same prompt, used for browse events.
    pub fn alternative<R: Rng + ?Sized>(&self, current: &str, rng: &mut R) -> String {
        loop {
            let s = self.statement(rng);
            if s != current {
                return s;
            }
        }
    }
}
