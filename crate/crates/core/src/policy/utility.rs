use serde::{Deserialize, Serialize};

use super::PolicyError;

/// Expected durations (seconds) that determine whether showing a suggestion
/// saves time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityParameters {
    pub verification_s: f64,
    pub editing_given_accept_s: f64,
    pub writing_given_reject_s: f64,
    pub writing_not_shown_s: f64,
    pub latency_s: f64,
}

/// The acceptance probability at which showing and hiding cost the same.
/// `out_of_range` marks values above 1, where no suggestion is ever worth
/// showing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakEven {
    pub value: f64,
    pub out_of_range: bool,
}

impl BreakEven {
    fn new(value: f64) -> Self {
        Self {
            value,
            out_of_range: value > 1.0,
        }
    }

    pub fn never_show(&self) -> bool {
        self.out_of_range
    }

    /// Show iff the acceptance probability strictly exceeds the break-even.
    pub fn should_show(&self, p_accept: f64) -> bool {
        p_accept > self.value
    }
}

/// Maximum allowed gap between the two writing-time expectations for the
/// simplified break-even formula.
pub const EQUAL_WRITING_TOLERANCE: f64 = 1e-9;

fn check_p(p: f64) -> Result<(), PolicyError> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(PolicyError::ProbabilityOutOfRange(p))
    }
}

impl UtilityParameters {
    pub fn new(
        verification_s: f64,
        editing_given_accept_s: f64,
        writing_given_reject_s: f64,
        writing_not_shown_s: f64,
        latency_s: f64,
    ) -> Result<Self, PolicyError> {
        let p = Self {
            verification_s,
            editing_given_accept_s,
            writing_given_reject_s,
            writing_not_shown_s,
            latency_s,
        };
        p.validate()?;
        Ok(p)
    }

    /// All durations finite and non-negative, and writing after a reject
    /// strictly slower than editing after an accept.
    pub fn validate(&self) -> Result<(), PolicyError> {
        for (name, v) in [
            ("verification_s", self.verification_s),
            ("editing_given_accept_s", self.editing_given_accept_s),
            ("writing_given_reject_s", self.writing_given_reject_s),
            ("writing_not_shown_s", self.writing_not_shown_s),
            ("latency_s", self.latency_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PolicyError::InvalidParameter(format!("{name} = {v}")));
            }
        }
        if self.writing_given_reject_s <= self.editing_given_accept_s {
            return Err(PolicyError::EditingNotFaster {
                writing_given_reject_s: self.writing_given_reject_s,
                editing_given_accept_s: self.editing_given_accept_s,
            });
        }
        Ok(())
    }

    /// Expected time once the suggestion is shown, excluding latency.
    pub fn expected_time_shown(&self, p_accept: f64) -> Result<f64, PolicyError> {
        check_p(p_accept)?;
        Ok(self.verification_s
            + p_accept * self.editing_given_accept_s
            + (1.0 - p_accept) * self.writing_given_reject_s)
    }

    /// Time saved by showing: writing without the suggestion, minus the
    /// expected shown time, minus latency if the programmer is waiting.
    pub fn suggestion_utility(&self, p_accept: f64, programmer_expecting: bool) -> Result<f64, PolicyError> {
        let shown = self.expected_time_shown(p_accept)?;
        let latency = if programmer_expecting { self.latency_s } else { 0.0 };
        Ok(self.writing_not_shown_s - shown - latency)
    }

    /// Break-even probability with latency included, under the assumption
    /// that a rejected suggestion does not speed up writing (both writing
    /// expectations equal).
    pub fn pstar(&self) -> Result<BreakEven, PolicyError> {
        self.pstar_with(true)
    }

    pub fn pstar_with(&self, programmer_expecting: bool) -> Result<BreakEven, PolicyError> {
        self.validate()?;
        let gap = (self.writing_given_reject_s - self.writing_not_shown_s).abs();
        if gap > EQUAL_WRITING_TOLERANCE {
            return Err(PolicyError::UnequalWritingTimes {
                writing_given_reject_s: self.writing_given_reject_s,
                writing_not_shown_s: self.writing_not_shown_s,
            });
        }
        let latency = if programmer_expecting { self.latency_s } else { 0.0 };
        Ok(BreakEven::new(
            (self.verification_s + latency) / (self.writing_given_reject_s - self.editing_given_accept_s),
        ))
    }

    /// Exact zero of the utility without the equal-writing assumption:
    /// `(verification + writing_reject - writing_not_shown + latency) /
    /// (writing_reject - editing_accept)`. Equals [`Self::pstar_with`]
    /// when the writing times agree. May be negative.
    pub fn break_even(&self, programmer_expecting: bool) -> Result<BreakEven, PolicyError> {
        self.validate()?;
        let latency = if programmer_expecting { self.latency_s } else { 0.0 };
        let numerator =
            self.verification_s + self.writing_given_reject_s - self.writing_not_shown_s + latency;
        Ok(BreakEven::new(
            numerator / (self.writing_given_reject_s - self.editing_given_accept_s),
        ))
    }
}

pub fn expected_time_shown(params: &UtilityParameters, p_accept: f64) -> Result<f64, PolicyError> {
    params.expected_time_shown(p_accept)
}

pub fn suggestion_utility(
    params: &UtilityParameters,
    p_accept: f64,
    programmer_expecting: bool,
) -> Result<f64, PolicyError> {
    params.suggestion_utility(p_accept, programmer_expecting)
}

pub fn pstar(params: &UtilityParameters) -> Result<BreakEven, PolicyError> {
    params.pstar()
}
