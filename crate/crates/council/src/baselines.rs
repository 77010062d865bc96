//! Five standard decision rules the main mechanism is measured against,
//! each implemented at the fidelity its accountability counterexample
//! needs, plus the counterexamples themselves.
//!
//! Weak accountability asks that a pivotal expert end up at least as well
//! off as a non-pivotal one when the decision succeeds and strictly worse
//! off when it fails. None of these baselines can deliver both; each
//! witness below is a concrete population where the required inequality
//! breaks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanism::{self, run_mechanism};
use crate::types::{Allocation, BudgetConfig, MessageProfile, Outcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("forecast {0} is outside [0, 1]")]
    ForecastOutOfRange(f64),
    #[error("share count {0} must be non-negative")]
    NegativeShares(f64),
    #[error("cost {0} must be non-negative")]
    NegativeCost(f64),
    #[error("unknown baseline {0:?}; expected one of MV, QV, VCG, DSR, DM")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    #[serde(rename = "MV")]
    MajorityVote,
    #[serde(rename = "QV")]
    QuadraticVote,
    #[serde(rename = "VCG")]
    PivotalVcg,
    #[serde(rename = "DSR")]
    DecisionScoringRule,
    #[serde(rename = "DM")]
    DecisionMarket,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::MajorityVote,
        BaselineKind::QuadraticVote,
        BaselineKind::PivotalVcg,
        BaselineKind::DecisionScoringRule,
        BaselineKind::DecisionMarket,
    ];

    pub fn id(self) -> &'static str {
        match self {
            BaselineKind::MajorityVote => "MV",
            BaselineKind::QuadraticVote => "QV",
            BaselineKind::PivotalVcg => "VCG",
            BaselineKind::DecisionScoringRule => "DSR",
            BaselineKind::DecisionMarket => "DM",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::MajorityVote => "majority voting",
            BaselineKind::QuadraticVote => "quadratic voting",
            BaselineKind::PivotalVcg => "pivotal mechanism without rewards",
            BaselineKind::DecisionScoringRule => "decision scoring rule",
            BaselineKind::DecisionMarket => "decision market",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

impl FromStr for BaselineKind {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MV" => Ok(BaselineKind::MajorityVote),
            "QV" => Ok(BaselineKind::QuadraticVote),
            "VCG" => Ok(BaselineKind::PivotalVcg),
            "DSR" => Ok(BaselineKind::DecisionScoringRule),
            "DM" => Ok(BaselineKind::DecisionMarket),
            _ => Err(BaselineError::Unknown(s.to_string())),
        }
    }
}

/// Transfers, rewards, and pivotality under one baseline rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub mechanism_name: BaselineKind,
    pub allocation: Option<Allocation>,
    pub transfers: Vec<f64>,
    pub rewards: Vec<f64>,
    #[serde(rename = "pivotal")]
    pub pivotal_flags: Vec<bool>,
}

impl BaselineResult {
    /// Per-expert total: upfront transfer plus outcome-contingent reward.
    pub fn totals(&self) -> Vec<f64> {
        self.transfers
            .iter()
            .zip(&self.rewards)
            .map(|(t, r)| t + r)
            .collect()
    }
}

fn majority_of(votes: impl Iterator<Item = Allocation>) -> Allocation {
    let mut for_a: i64 = 0;
    let mut for_b: i64 = 0;
    for v in votes {
        match v {
            Allocation::A => for_a += 1,
            Allocation::B => for_b += 1,
        }
    }
    if for_a >= for_b {
        Allocation::A
    } else {
        Allocation::B
    }
}

/// One expert, one vote; ties go to A like the main rule. No money moves.
pub fn majority_vote(votes: &[Allocation]) -> Result<BaselineResult, BaselineError> {
    if votes.is_empty() {
        return Err(BaselineError::EmptyPopulation);
    }
    let allocation = majority_of(votes.iter().copied());
    let pivotal = (0..votes.len())
        .map(|i| {
            let without = majority_of(
                votes
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, v)| *v),
            );
            without != allocation
        })
        .collect();
    Ok(BaselineResult {
        mechanism_name: BaselineKind::MajorityVote,
        allocation: Some(allocation),
        transfers: vec![0.0; votes.len()],
        rewards: vec![0.0; votes.len()],
        pivotal_flags: pivotal,
    })
}

fn qv_tally<'a>(purchases: impl Iterator<Item = &'a (Allocation, u32)>) -> (u64, u64) {
    let mut for_a: u64 = 0;
    let mut for_b: u64 = 0;
    for (side, v) in purchases {
        match side {
            Allocation::A => for_a += u64::from(*v),
            Allocation::B => for_b += u64::from(*v),
        }
    }
    (for_a, for_b)
}

/// Experts buy votes at quadratic cost; the bigger stack of votes wins, ties
/// to A. The purchase cost is the only money that ever moves.
pub fn quadratic_vote(purchases: &[(Allocation, u32)]) -> Result<BaselineResult, BaselineError> {
    if purchases.is_empty() {
        return Err(BaselineError::EmptyPopulation);
    }
    let decide = |(a, b): (u64, u64)| if a >= b { Allocation::A } else { Allocation::B };
    let allocation = decide(qv_tally(purchases.iter()));
    let pivotal = (0..purchases.len())
        .map(|i| {
            let without = decide(qv_tally(
                purchases
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, p)| p),
            ));
            without != allocation
        })
        .collect();
    let transfers = purchases
        .iter()
        .map(|(_, v)| -((f64::from(*v)).powi(2)))
        .collect();
    Ok(BaselineResult {
        mechanism_name: BaselineKind::QuadraticVote,
        allocation: Some(allocation),
        transfers,
        rewards: vec![0.0; purchases.len()],
        pivotal_flags: pivotal,
    })
}

/// The plain pivotal mechanism: same transfers as the main rule, but no
/// outcome-contingent rewards at all.
pub fn pivotal_vcg(m: &MessageProfile) -> Result<BaselineResult, BaselineError> {
    if m.is_empty() {
        return Err(BaselineError::EmptyPopulation);
    }
    let allocation = mechanism::allocate(m).expect("non-empty profile");
    let transfers = mechanism::transfers(m);
    let pivotal = (0..m.len())
        .map(|i| mechanism::is_pivotal(m, i).expect("index in range"))
        .collect();
    Ok(BaselineResult {
        mechanism_name: BaselineKind::PivotalVcg,
        allocation: Some(allocation),
        transfers,
        rewards: vec![0.0; m.len()],
        pivotal_flags: pivotal,
    })
}

/// Brier-style reward for a probability forecast of a positive outcome:
/// 1 - (forecast - observed)^2.
pub fn brier_reward(forecast: f64, delta: Outcome) -> f64 {
    let observed = match delta {
        Outcome::Positive => 1.0,
        Outcome::Negative => 0.0,
    };
    1.0 - (forecast - observed).powi(2)
}

/// Scores forecasts with a proper scoring rule (Brier, pinned for
/// reproducibility). Who counts as pivotal is a property of the decision
/// process around the scores, not of the scores themselves, so the flags
/// start out all false; witnesses set them explicitly.
pub fn dsr_score(forecasts: &[f64], delta: Outcome) -> Result<BaselineResult, BaselineError> {
    if forecasts.is_empty() {
        return Err(BaselineError::EmptyPopulation);
    }
    for &p in forecasts {
        if !(0.0..=1.0).contains(&p) {
            return Err(BaselineError::ForecastOutOfRange(p));
        }
    }
    Ok(BaselineResult {
        mechanism_name: BaselineKind::DecisionScoringRule,
        allocation: None,
        transfers: vec![0.0; forecasts.len()],
        rewards: forecasts.iter().map(|&p| brier_reward(p, delta)).collect(),
        pivotal_flags: vec![false; forecasts.len()],
    })
}

/// Stylized decision-market position: `(shares, cost)` pairs where each
/// share pays one unit on success and expires worthless on failure.
/// Pivotality comes from trade timing against the execution threshold,
/// outside this accounting, so the flags start out all false.
pub fn dm_trade(
    positions: &[(f64, f64)],
    delta: Outcome,
) -> Result<BaselineResult, BaselineError> {
    if positions.is_empty() {
        return Err(BaselineError::EmptyPopulation);
    }
    for &(k, cost) in positions {
        if k < 0.0 {
            return Err(BaselineError::NegativeShares(k));
        }
        if cost < 0.0 {
            return Err(BaselineError::NegativeCost(cost));
        }
    }
    let payout = match delta {
        Outcome::Positive => 1.0,
        Outcome::Negative => 0.0,
    };
    Ok(BaselineResult {
        mechanism_name: BaselineKind::DecisionMarket,
        allocation: None,
        transfers: positions.iter().map(|&(_, cost)| -cost).collect(),
        rewards: positions.iter().map(|&(k, _)| k * payout).collect(),
        pivotal_flags: vec![false; positions.len()],
    })
}

/// First (pivotal, non-pivotal) pair whose totals break the weak
/// accountability inequalities, if any.
pub fn weak_accountability_violation(
    totals: &[f64],
    pivotal: &[bool],
    delta: Outcome,
) -> Option<(usize, usize)> {
    for i in 0..totals.len() {
        if !pivotal[i] {
            continue;
        }
        for j in 0..totals.len() {
            if pivotal[j] {
                continue;
            }
            let ok = match delta {
                Outcome::Positive => totals[i] >= totals[j],
                Outcome::Negative => totals[i] < totals[j],
            };
            if !ok {
                return Some((i, j));
            }
        }
    }
    None
}

/// A concrete population on which a baseline breaks weak accountability,
/// paired with a message-form population with the same pivotal structure on
/// which the main mechanism can be checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountabilityWitness {
    pub kind: BaselineKind,
    pub summary: String,
    pub delta: Outcome,
    pub pivotal_index: usize,
    pub nonpivotal_index: usize,
    pub result: BaselineResult,
    pub total_pivotal: f64,
    pub total_nonpivotal: f64,
    /// The inequality weak accountability demands in this configuration.
    pub requirement: String,
    /// Whether the baseline meets it. Expected: false.
    pub requirement_met: bool,
    pub adapted_messages: MessageProfile,
    pub adapted_budget_c: f64,
    pub adapted_pivotal_index: usize,
    pub adapted_nonpivotal_index: usize,
}

#[allow(clippy::too_many_arguments)]
fn build_witness(
    summary: &str,
    delta: Outcome,
    result: BaselineResult,
    pivotal_index: usize,
    nonpivotal_index: usize,
    adapted_messages: Vec<f64>,
    adapted_budget_c: f64,
    adapted_pivotal_index: usize,
    adapted_nonpivotal_index: usize,
) -> AccountabilityWitness {
    debug_assert!(result.pivotal_flags[pivotal_index]);
    debug_assert!(!result.pivotal_flags[nonpivotal_index]);
    let totals = result.totals();
    let total_pivotal = totals[pivotal_index];
    let total_nonpivotal = totals[nonpivotal_index];
    let (requirement, requirement_met) = match delta {
        Outcome::Positive => (
            "pivotal total >= non-pivotal total on success",
            total_pivotal >= total_nonpivotal,
        ),
        Outcome::Negative => (
            "pivotal total < non-pivotal total on failure",
            total_pivotal < total_nonpivotal,
        ),
    };
    AccountabilityWitness {
        kind: result.mechanism_name,
        summary: summary.to_string(),
        delta,
        pivotal_index,
        nonpivotal_index,
        result,
        total_pivotal,
        total_nonpivotal,
        requirement: requirement.to_string(),
        requirement_met,
        adapted_messages: MessageProfile::new(adapted_messages),
        adapted_budget_c,
        adapted_pivotal_index,
        adapted_nonpivotal_index,
    }
}

/// Builds the counterexample population for one baseline, runs it, and
/// records whether the weak-accountability inequality survived.
pub fn accountability_witness(kind: BaselineKind) -> AccountabilityWitness {
    match kind {
        BaselineKind::MajorityVote => {
            let result =
                majority_vote(&[Allocation::A, Allocation::B, Allocation::B]).expect("non-empty");
            build_witness(
                "no money ever moves, so a pivotal failure costs nothing extra",
                Outcome::Negative,
                result,
                1,
                0,
                vec![1.5, -1.0, -1.0],
                3.0,
                1,
                0,
            )
        }
        BaselineKind::QuadraticVote => {
            // One pivotal vote for A, a losing three-vote stack for B, and a
            // two-vote stack for A: removing the single vote flips the
            // outcome, removing the opposition does not.
            let result = quadratic_vote(&[
                (Allocation::A, 1),
                (Allocation::B, 3),
                (Allocation::A, 2),
            ])
            .expect("non-empty");
            build_witness(
                "costs are fixed up front, so a large losing stake is punished \
                 harder than the decisive single vote",
                Outcome::Negative,
                result,
                0,
                1,
                vec![1.5, -3.0, 2.0],
                6.0,
                0,
                1,
            )
        }
        BaselineKind::PivotalVcg => {
            let result =
                pivotal_vcg(&MessageProfile::new(vec![12.0, -10.0, -3.0])).expect("non-empty");
            build_witness(
                "the tax hits pivotal experts even when their decision succeeds",
                Outcome::Positive,
                result,
                1,
                0,
                vec![12.0, -10.0, -3.0],
                24.0,
                1,
                0,
            )
        }
        BaselineKind::DecisionScoringRule => {
            let mut result = dsr_score(&[0.9, 0.9], Outcome::Negative).expect("non-empty");
            // Pivotality is exogenous here: the first forecaster carried the
            // decision, the second did not.
            result.pivotal_flags = vec![true, false];
            build_witness(
                "identical forecasts earn identical scores no matter who drove \
                 the decision",
                Outcome::Negative,
                result,
                0,
                1,
                vec![-2.0, 0.5],
                2.0,
                0,
                1,
            )
        }
        BaselineKind::DecisionMarket => {
            let mut result =
                dm_trade(&[(2.0, 0.8), (2.0, 0.8)], Outcome::Negative).expect("non-empty");
            // The first trade crossed the execution threshold, the earlier
            // identical one did not.
            result.pivotal_flags = vec![true, false];
            build_witness(
                "identical positions lose the same amount whether or not the \
                 trade tipped the decision",
                Outcome::Negative,
                result,
                0,
                1,
                vec![3.0, -4.0],
                4.0,
                1,
                0,
            )
        }
    }
}

/// Runs the main mechanism on a witness's adapted population for both
/// outcomes and checks that weak accountability holds throughout and that
/// the designated pair keeps its pivotal/non-pivotal roles.
pub fn main_mechanism_accountable(w: &AccountabilityWitness) -> bool {
    let budget = BudgetConfig::new(w.adapted_budget_c, w.adapted_messages.len())
        .expect("witness budgets are fixed constants");
    let mut roles_ok = false;
    for delta in [Outcome::Positive, Outcome::Negative] {
        let r = run_mechanism(&w.adapted_messages, &budget, delta)
            .expect("witness messages are non-empty");
        if weak_accountability_violation(&r.payoffs, &r.pivotal_flags, delta).is_some() {
            return false;
        }
        roles_ok = r.pivotal_flags[w.adapted_pivotal_index]
            && !r.pivotal_flags[w.adapted_nonpivotal_index];
    }
    roles_ok
}
