use std::fmt;

use serde::{Deserialize, Serialize};

/// The programmer's unobserved activity at the moment a suggestion appears.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentState {
    ThinkingVerifyingSuggestion,
    PromptCrafting,
    LookingUpDocumentation,
    WritingNewFunctionality,
    ThinkingAboutNewCode,
    EditingLastSuggestion,
    WaitingForSuggestion,
    EditingWrittenCode,
    WritingDocumentation,
    DebuggingTestingCode,
    DeferringThoughtForLater,
}

impl LatentState {
    pub const COUNT: usize = 11;

    pub const ALL: [LatentState; Self::COUNT] = [
        LatentState::ThinkingVerifyingSuggestion,
        LatentState::PromptCrafting,
        LatentState::LookingUpDocumentation,
        LatentState::WritingNewFunctionality,
        LatentState::ThinkingAboutNewCode,
        LatentState::EditingLastSuggestion,
        LatentState::WaitingForSuggestion,
        LatentState::EditingWrittenCode,
        LatentState::WritingDocumentation,
        LatentState::DebuggingTestingCode,
        LatentState::DeferringThoughtForLater,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Observed probability of acceptance in this state (user-study table).
    pub fn observed_acceptance(self) -> f64 {
        match self {
            LatentState::ThinkingVerifyingSuggestion => 0.70,
            LatentState::PromptCrafting => 0.16,
            LatentState::LookingUpDocumentation => 0.25,
            LatentState::WritingNewFunctionality => 0.19,
            LatentState::ThinkingAboutNewCode => 0.21,
            LatentState::EditingLastSuggestion => 0.16,
            LatentState::WaitingForSuggestion => 0.42,
            LatentState::EditingWrittenCode => 0.11,
            LatentState::WritingDocumentation => 0.36,
            LatentState::DebuggingTestingCode => 0.25,
            LatentState::DeferringThoughtForLater => 0.98,
        }
    }

    /// Whether the programmer is actively waiting on a suggestion and so pays
    /// the generation latency.
    pub fn expects_suggestion_by_default(self) -> bool {
        matches!(
            self,
            LatentState::ThinkingVerifyingSuggestion
                | LatentState::PromptCrafting
                | LatentState::WaitingForSuggestion
                | LatentState::DeferringThoughtForLater
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            LatentState::ThinkingVerifyingSuggestion => "Thinking/Verifying Suggestion",
            LatentState::PromptCrafting => "Prompt Crafting",
            LatentState::LookingUpDocumentation => "Looking up Documentation",
            LatentState::WritingNewFunctionality => "Writing New Functionality",
            LatentState::ThinkingAboutNewCode => "Thinking About New Code To Write",
            LatentState::EditingLastSuggestion => "Editing Last Suggestion",
            LatentState::WaitingForSuggestion => "Waiting For Suggestion",
            LatentState::EditingWrittenCode => "Editing Written Code",
            LatentState::WritingDocumentation => "Writing Documentation",
            LatentState::DebuggingTestingCode => "Debugging/Testing Code",
            LatentState::DeferringThoughtForLater => "Deferring Thought For Later",
        }
    }
}

impl fmt::Display for LatentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleven_states_round_trip_index() {
        assert_eq!(LatentState::ALL.len(), 11);
        for (i, s) in LatentState::ALL.iter().enumerate() {
            assert_eq!(s.index(), i);
            assert_eq!(LatentState::from_index(i), Some(*s));
        }
        assert_eq!(LatentState::from_index(11), None);
    }

    #[test]
    fn uniform_mix_matches_overall_rate() {
        let mean: f64 = LatentState::ALL.iter().map(|s| s.observed_acceptance()).sum::<f64>() / 11.0;
        assert!((mean - 0.3445).abs() < 1e-3);
    }
}
