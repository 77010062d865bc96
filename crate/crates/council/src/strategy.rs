//! Expert-side analysis: alignment, the closed-form reference report, the
//! two expected-utility routes, a brute-force best-response oracle, and
//! deviation classification.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanism::{allocation_from_sum, reward, transfer_given_others};
use crate::types::{Allocation, BudgetConfig, ExpertType, MessageProfile, Outcome, TypeProfile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("report grid is empty (lo {lo}, hi {hi}, step {step})")]
    EmptyGrid { lo: f64, hi: f64, step: f64 },
}

/// Whether an expert's preferences and beliefs point the same way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentClass {
    /// Preference and belief favor the same alternative.
    Aligned,
    /// Preference and belief favor different alternatives.
    Unaligned,
    /// The preference gap or the belief gap is exactly zero.
    Indifferent,
}

pub fn alignment(e: &ExpertType) -> AlignmentClass {
    let product = (e.theta_a - e.theta_b) * (e.p_a - e.p_b);
    if product > 0.0 {
        AlignmentClass::Aligned
    } else if product < 0.0 {
        AlignmentClass::Unaligned
    } else {
        AlignmentClass::Indifferent
    }
}

/// The closed-form reference report.
///
/// Weakly dominant for aligned experts, and the anchor that everyone else's
/// deviations are measured against. The preference term scales the utility
/// gap by 1/(2(1 - p)) and the belief term scales the belief gap by the
/// budget share over (1 - p), where p is the success probability of the
/// preferred alternative (preference ties grouped with A, matching
/// [`ExpertType::preferred_success_prob`] and the aggregate decomposition).
pub fn reference_report(e: &ExpertType, budget: &BudgetConfig) -> f64 {
    let p = e.preferred_success_prob();
    debug_assert!(p < 1.0, "validated probabilities stay strictly below 1");
    (e.theta_a - e.theta_b) / (2.0 * (1.0 - p)) + budget.share() * (e.p_a - e.p_b) / (1.0 - p)
}

/// Reference reports for a whole profile, in expert order.
pub fn reference_profile(profile: &TypeProfile, budget: &BudgetConfig) -> MessageProfile {
    profile.iter().map(|e| reference_report(e, budget)).collect()
}

/// Expected utility of living under allocation `a` with one's own transfer
/// `t_i`: the closed form theta + 2 t (1 - p) + (2p - 1) c/n.
pub fn expected_utility(e: &ExpertType, a: Allocation, t_i: f64, budget: &BudgetConfig) -> f64 {
    let (theta, p) = e.for_alternative(a);
    theta + 2.0 * t_i * (1.0 - p) + (2.0 * p - 1.0) * budget.share()
}

/// Expected utility of submitting `m_i` against the others' reports,
/// composed mechanically: allocation, then transfer, then the
/// belief-weighted expectation of the reward.
///
/// Agrees with [`expected_utility`] everywhere; the two routes are kept
/// separate so tests can compare them.
pub fn expected_utility_of_report(
    e: &ExpertType,
    m_i: f64,
    others: &MessageProfile,
    budget: &BudgetConfig,
) -> f64 {
    expected_utility_against_sum(e, m_i, others.total(), budget)
}

/// Same as [`expected_utility_of_report`] with the others' reports already
/// summed.
pub fn expected_utility_against_sum(
    e: &ExpertType,
    m_i: f64,
    others_sum: f64,
    budget: &BudgetConfig,
) -> f64 {
    let a = allocation_from_sum(others_sum + m_i);
    let t = transfer_given_others(m_i, others_sum);
    let (theta, p) = e.for_alternative(a);
    let expected_reward =
        p * reward(t, budget, Outcome::Positive) + (1.0 - p) * reward(t, budget, Outcome::Negative);
    theta + t + expected_reward
}

/// A closed report interval scanned at a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl ReportGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        ReportGrid { lo, hi, step }
    }

    /// Default oracle grid: spans the pivot boundary at -others_sum and the
    /// reference report itself with ten units of slack on each side. The
    /// step never exceeds 0.01 and shrinks further when the reference
    /// report is small.
    ///
    /// The lower endpoint is nudged off the decimal lattice. A grid point
    /// landing exactly on the pivot boundary would hit the untaxed
    /// removal-pivot tie, a measure-zero knife edge that a continuous
    /// report space never sees and that would make grid maxima
    /// unrepresentative.
    pub fn covering(e: &ExpertType, others_sum: f64, budget: &BudgetConfig) -> Self {
        let m_star = reference_report(e, budget);
        let half = others_sum.abs() + m_star.abs() + 10.0;
        let step = (m_star.abs() / 1000.0 + 1e-4).min(0.01);
        // Fractional part of 1/phi: keeps lo + k * step away from decimal
        // boundary coincidences for any decimal step.
        let guard = step * 0.618_033_988_749_894_8;
        ReportGrid {
            lo: -half - guard,
            hi: half,
            step,
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let count = if self.step > 0.0 && self.hi >= self.lo {
            ((self.hi - self.lo) / self.step).floor() as usize + 1
        } else {
            0
        };
        let lo = self.lo;
        let step = self.step;
        (0..count).map(move |k| lo + k as f64 * step)
    }
}

/// Grid argmax of the report utility; ties break toward the lowest report.
///
/// Deliberately brute force. This is the independent check the closed-form
/// report is measured against, so it must not share that derivation.
pub fn best_response_oracle(
    e: &ExpertType,
    others_sum: f64,
    budget: &BudgetConfig,
    grid: &ReportGrid,
) -> Result<f64, StrategyError> {
    let mut best: Option<(f64, f64)> = None;
    for m in grid.points() {
        let eu = expected_utility_against_sum(e, m, others_sum, budget);
        match best {
            Some((_, best_eu)) if eu <= best_eu => {}
            _ => best = Some((m, eu)),
        }
    }
    best.map(|(m, _)| m).ok_or(StrategyError::EmptyGrid {
        lo: grid.lo,
        hi: grid.hi,
        step: grid.step,
    })
}

/// How a candidate report relates to the reference report's allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviationVerdict {
    /// Same allocation either way; the two reports are payoff-equivalent.
    NotFlipping { delta_eu: f64 },
    /// Flips the outcome toward the alternative the expert believes is at
    /// most as likely to succeed. Never profitable.
    FlipTowardLowerBelief { delta_eu: f64 },
    /// Flips the outcome toward the alternative the expert believes is more
    /// likely to succeed. Can be strictly profitable for unaligned experts.
    FlipTowardHigherBelief { delta_eu: f64 },
}

impl DeviationVerdict {
    pub fn delta_eu(&self) -> f64 {
        match self {
            DeviationVerdict::NotFlipping { delta_eu }
            | DeviationVerdict::FlipTowardLowerBelief { delta_eu }
            | DeviationVerdict::FlipTowardHigherBelief { delta_eu } => *delta_eu,
        }
    }
}

/// Classifies a deviation from the reference report and reports the
/// expected-utility change it causes.
pub fn check_safe_deviation(
    e: &ExpertType,
    others: &MessageProfile,
    m_prime: f64,
    budget: &BudgetConfig,
) -> DeviationVerdict {
    let s = others.total();
    let m_star = reference_report(e, budget);
    let a_star = allocation_from_sum(s + m_star);
    let a_prime = allocation_from_sum(s + m_prime);
    let delta_eu = expected_utility_against_sum(e, m_prime, s, budget)
        - expected_utility_against_sum(e, m_star, s, budget);
    if a_prime == a_star {
        return DeviationVerdict::NotFlipping { delta_eu };
    }
    let (_, p_star) = e.for_alternative(a_star);
    let (_, p_prime) = e.for_alternative(a_prime);
    if p_prime <= p_star {
        DeviationVerdict::FlipTowardLowerBelief { delta_eu }
    } else {
        DeviationVerdict::FlipTowardHigherBelief { delta_eu }
    }
}
