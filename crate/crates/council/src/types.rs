//! Core domain types and their invariants.
//!
//! Everything in this module is a plain immutable value: cheap to clone,
//! safe to share between threads, and serializable to JSON without losing
//! floating-point precision.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Width of the guard band that keeps success probabilities strictly inside
/// (0, 1).
///
/// Reference reports scale with 1/(1 - p), which diverges at p = 1.
/// Validation snaps probabilities at or within this distance of a boundary
/// to the nearest interior point instead of rejecting them.
pub const PROBABILITY_CLAMP: f64 = 1e-9;

/// Absolute tolerance for utility, payoff, and identity comparisons.
pub const UTILITY_TOLERANCE: f64 = 1e-9;

/// Validation failures for expert types, profiles, budgets, and scenarios.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("{field} = {value} is outside [0, 1]")]
    ProbabilityOutOfRange { field: &'static str, value: f64 },
    #[error("{field} = {value} is not finite")]
    NonFinite { field: &'static str, value: f64 },
    #[error(
        "both utilities are negative (theta_a = {theta_a}, theta_b = {theta_b}); \
         shift both by the same constant so the larger one is non-negative"
    )]
    NegativeUtilities { theta_a: f64, theta_b: f64 },
    #[error("a profile needs at least one expert")]
    EmptyProfile,
    #[error("budget c = {0} must be non-negative")]
    NegativeBudget(f64),
    #[error("budget is sized for {budget_n} experts, profile has {profile_n}")]
    ExpertCountMismatch { budget_n: usize, profile_n: usize },
}

/// One expert's private information: the personal utility they derive from
/// each alternative and their subjective probability that each alternative
/// leads to a positive outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertType {
    pub theta_a: f64,
    pub theta_b: f64,
    pub p_a: f64,
    pub p_b: f64,
}

impl ExpertType {
    pub fn new(theta_a: f64, theta_b: f64, p_a: f64, p_b: f64) -> Self {
        ExpertType {
            theta_a,
            theta_b,
            p_a,
            p_b,
        }
    }

    /// Checks the type invariants.
    ///
    /// Probabilities must lie in [0, 1]; values at the boundary are snapped
    /// into [`PROBABILITY_CLAMP`, 1 - `PROBABILITY_CLAMP`] so downstream
    /// 1/(1 - p) terms stay finite. At least one utility must be
    /// non-negative: exactly one alternative will be implemented, so an
    /// expert can always shift both utilities by the same constant.
    pub fn validated(mut self) -> Result<Self, ValidationError> {
        for (field, value) in [("theta_a", self.theta_a), ("theta_b", self.theta_b)] {
            if !value.is_finite() {
                return Err(ValidationError::NonFinite { field, value });
            }
        }
        if self.theta_a < 0.0 && self.theta_b < 0.0 {
            return Err(ValidationError::NegativeUtilities {
                theta_a: self.theta_a,
                theta_b: self.theta_b,
            });
        }
        for (field, value) in [("p_a", self.p_a), ("p_b", self.p_b)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ValidationError::ProbabilityOutOfRange { field, value });
            }
        }
        self.p_a = self.p_a.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
        self.p_b = self.p_b.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
        Ok(self)
    }

    /// Utility and success probability for one alternative.
    pub fn for_alternative(&self, a: Allocation) -> (f64, f64) {
        match a {
            Allocation::A => (self.theta_a, self.p_a),
            Allocation::B => (self.theta_b, self.p_b),
        }
    }

    /// Success probability of the expert's preferred alternative.
    ///
    /// Preference ties count as preferring A. The reference report and the
    /// aggregate decomposition both use this grouping, which keeps the two
    /// consistent.
    pub fn preferred_success_prob(&self) -> f64 {
        if self.theta_a >= self.theta_b {
            self.p_a
        } else {
            self.p_b
        }
    }
}

/// An ordered council of experts; the index is the expert's identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeProfile(Vec<ExpertType>);

impl TypeProfile {
    pub fn new(experts: Vec<ExpertType>) -> Result<Self, ValidationError> {
        if experts.is_empty() {
            return Err(ValidationError::EmptyProfile);
        }
        Ok(TypeProfile(experts))
    }

    /// Validates every expert, preserving order.
    pub fn validated(self) -> Result<Self, ValidationError> {
        if self.0.is_empty() {
            return Err(ValidationError::EmptyProfile);
        }
        self.0
            .into_iter()
            .map(ExpertType::validated)
            .collect::<Result<Vec<_>, _>>()
            .map(TypeProfile)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn experts(&self) -> &[ExpertType] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<&ExpertType> {
        self.0.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ExpertType> {
        self.0.iter()
    }
}

/// The scalar reports submitted to the mechanism, one per expert.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageProfile(Vec<f64>);

impl MessageProfile {
    pub fn new(messages: Vec<f64>) -> Self {
        MessageProfile(messages)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn messages(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.0.get(i).copied()
    }

    /// Plain left-to-right sum of all reports.
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

impl From<Vec<f64>> for MessageProfile {
    fn from(messages: Vec<f64>) -> Self {
        MessageProfile(messages)
    }
}

impl FromIterator<f64> for MessageProfile {
    fn from_iter<T: IntoIterator<Item = f64>>(iter: T) -> Self {
        MessageProfile(iter.into_iter().collect())
    }
}

/// The total subsidy c, split evenly across the n council members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    pub c: f64,
    pub n: usize,
}

impl BudgetConfig {
    pub fn new(c: f64, n: usize) -> Result<Self, ValidationError> {
        if !c.is_finite() {
            return Err(ValidationError::NonFinite {
                field: "budget_c",
                value: c,
            });
        }
        if c < 0.0 {
            return Err(ValidationError::NegativeBudget(c));
        }
        if n == 0 {
            return Err(ValidationError::EmptyProfile);
        }
        Ok(BudgetConfig { c, n })
    }

    /// Per-expert share c/n.
    pub fn share(&self) -> f64 {
        self.c / self.n as f64
    }
}

/// The two mutually exclusive alternatives the council decides between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Allocation {
    A,
    B,
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Allocation::A => write!(f, "A"),
            Allocation::B => write!(f, "B"),
        }
    }
}

/// The realized boolean state of the world reported by the evaluation tool
/// after the decision has run its course: +1 on success, -1 on failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Positive,
    Negative,
}

impl Outcome {
    pub fn delta(self) -> i8 {
        match self {
            Outcome::Positive => 1,
            Outcome::Negative => -1,
        }
    }

    pub fn from_delta(delta: i64) -> Option<Outcome> {
        match delta {
            1 => Some(Outcome::Positive),
            -1 => Some(Outcome::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Positive => write!(f, "+1"),
            Outcome::Negative => write!(f, "-1"),
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_i8(self.delta())
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let delta = i64::deserialize(deserializer)?;
        Outcome::from_delta(delta)
            .ok_or_else(|| serde::de::Error::custom(format!("outcome must be 1 or -1, got {delta}")))
    }
}

/// Everything the mechanism produced for one realized outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismResult {
    pub allocation: Allocation,
    /// Pivotal transfers; non-positive by construction.
    pub transfers: Vec<f64>,
    /// Outcome-contingent rewards.
    pub rewards: Vec<f64>,
    /// Per-expert totals, always transfer + reward.
    pub payoffs: Vec<f64>,
    /// True where removing the expert's report flips the allocation.
    #[serde(rename = "pivotal")]
    pub pivotal_flags: Vec<bool>,
}

impl MechanismResult {
    /// Assembles a result, deriving each payoff as transfer + reward.
    ///
    /// Panics if a transfer is positive or the vector lengths disagree;
    /// either indicates a bug in the caller, not bad input.
    pub fn assemble(
        allocation: Allocation,
        transfers: Vec<f64>,
        rewards: Vec<f64>,
        pivotal_flags: Vec<bool>,
    ) -> Self {
        assert_eq!(transfers.len(), rewards.len());
        assert_eq!(transfers.len(), pivotal_flags.len());
        assert!(
            transfers.iter().all(|&t| t <= 0.0),
            "pivotal transfers are taxes; got a positive transfer"
        );
        let payoffs = transfers.iter().zip(&rewards).map(|(t, r)| t + r).collect();
        MechanismResult {
            allocation,
            transfers,
            rewards,
            payoffs,
            pivotal_flags,
        }
    }
}

/// The alternative favored by the weighted belief signal, or a tie when the
/// signal is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignerChoice {
    Alternative(Allocation),
    Tie,
}

impl DesignerChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            DesignerChoice::Alternative(Allocation::A) => "A",
            DesignerChoice::Alternative(Allocation::B) => "B",
            DesignerChoice::Tie => "tie",
        }
    }
}

impl fmt::Display for DesignerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl Serialize for DesignerChoice {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DesignerChoice {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        match s.as_str() {
            "A" => Ok(DesignerChoice::Alternative(Allocation::A)),
            "B" => Ok(DesignerChoice::Alternative(Allocation::B)),
            "tie" => Ok(DesignerChoice::Tie),
            other => Err(serde::de::Error::custom(format!(
                "designer choice must be A, B, or tie, got {other:?}"
            ))),
        }
    }
}

/// Split of the aggregate reference report into preference noise and a
/// weighted belief signal, with the budget threshold that separates correct
/// from incorrect classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// What idiosyncratic preferences alone contribute to the aggregate.
    pub noise: f64,
    /// The weighted sum of belief differences.
    pub belief_signal: f64,
    /// Endogenous per-expert weights 1/(1 - p of the preferred alternative).
    pub weights: Vec<f64>,
    /// Per-expert budget share above which the mechanism's choice matches
    /// the designer's. Zero when noise and signal already agree in sign;
    /// infinite (JSON null) when the belief signal is exactly zero but the
    /// noise is not, in which case no finite budget classifies.
    #[serde(with = "extended_real")]
    pub threshold: f64,
    pub designer_choice: DesignerChoice,
    /// Predicted aggregate report at the configured budget:
    /// noise + share * belief_signal.
    pub aggregate: f64,
}

/// Serializes a possibly-infinite threshold: finite values as numbers,
/// infinity as null (JSON has no infinity literal).
mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            serializer.serialize_f64(*value)
        } else {
            serializer.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(deserializer)?.unwrap_or(f64::INFINITY))
    }
}

/// How a scenario's realized outcome is produced.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeSpec {
    /// Pinned in the scenario file.
    Fixed(Outcome),
    /// Sampled from the weight-normalized aggregate belief in whichever
    /// alternative the mechanism selects. A simulation convenience, not a
    /// mechanism rule.
    Bernoulli,
    /// Supplied by the caller at run time.
    #[default]
    External,
}

/// A complete runnable instance: the council, the subsidy, and the outcome
/// model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub experts: TypeProfile,
    pub budget_c: f64,
    #[serde(default)]
    pub outcome: OutcomeSpec,
}

impl Scenario {
    pub fn new(experts: TypeProfile, budget_c: f64, outcome: OutcomeSpec) -> Self {
        Scenario {
            experts,
            budget_c,
            outcome,
        }
    }

    /// Validates the profile and the budget together.
    pub fn validated(self) -> Result<Self, ValidationError> {
        let experts = self.experts.validated()?;
        BudgetConfig::new(self.budget_c, experts.len())?;
        Ok(Scenario {
            experts,
            budget_c: self.budget_c,
            outcome: self.outcome,
        })
    }

    pub fn budget(&self) -> Result<BudgetConfig, ValidationError> {
        BudgetConfig::new(self.budget_c, self.experts.len())
    }
}
