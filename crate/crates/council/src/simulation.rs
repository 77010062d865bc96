//! Deterministic sampling, budget sweeps, the Monte Carlo property suite,
//! and the scenario runner behind the CLI.
//!
//! # Determinism
//!
//! Every stochastic entry point takes an explicit seed. Trial k draws from
//! stream k of a counter-based generator (ChaCha8) seeded with it, so each
//! report is a pure function of its inputs: rerunning produces bit-identical
//! output, and trials could be farmed out across threads without changing
//! results. Nothing here reads ambient randomness or the clock.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::aggregation::{classify, decompose, weights, Classification};
use crate::mechanism::{
    allocation_from_sum, reward, run_mechanism, transfer_given_others, MechanismError,
};
use crate::strategy::{
    alignment, best_response_oracle, check_safe_deviation, expected_utility,
    expected_utility_against_sum, reference_profile, reference_report, AlignmentClass,
    DeviationVerdict, ReportGrid,
};
use crate::types::{
    Allocation, BudgetConfig, DesignerChoice, ExpertType, MechanismResult, MessageProfile,
    Outcome, OutcomeSpec, Scenario, TypeProfile, ValidationError, UTILITY_TOLERANCE,
};

pub const DEFAULT_THETA_MAX: f64 = 10.0;
pub const DEFAULT_BELIEF_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("at least one trial is required")]
    ZeroTrials,
    #[error("budget grid is empty")]
    EmptyBudgetGrid,
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// Sampling model for expert types.
///
/// The families and their defaults are simulation choices with no claim to
/// realism; reports carry a note saying so.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    #[serde(default = "default_theta_dist")]
    pub theta_dist: ThetaDist,
    #[serde(default = "default_belief_dist")]
    pub p_dist: BeliefDist,
    /// Belief-convergence knob in [0, 1]: 0 leaves beliefs independent
    /// across experts, 1 gives everyone the same belief pair.
    #[serde(default)]
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaDist {
    /// Uniform on [-max, max] per coordinate, re-drawn until at least one
    /// utility is non-negative.
    Uniform { max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeliefDist {
    /// Uniform on [margin, 1 - margin] per coordinate.
    Uniform { margin: f64 },
}

fn default_theta_dist() -> ThetaDist {
    ThetaDist::Uniform {
        max: DEFAULT_THETA_MAX,
    }
}

fn default_belief_dist() -> BeliefDist {
    BeliefDist::Uniform {
        margin: DEFAULT_BELIEF_MARGIN,
    }
}

impl Default for DistributionSpec {
    fn default() -> Self {
        DistributionSpec {
            theta_dist: default_theta_dist(),
            p_dist: default_belief_dist(),
            kappa: 0.0,
        }
    }
}

impl DistributionSpec {
    pub fn with_kappa(kappa: f64) -> Self {
        DistributionSpec {
            kappa,
            ..Default::default()
        }
    }

    pub fn validated(self) -> Result<Self, SimulationError> {
        let ThetaDist::Uniform { max } = self.theta_dist;
        if !(max.is_finite() && max > 0.0) {
            return Err(SimulationError::InvalidParameter(format!(
                "theta max must be finite and positive, got {max}"
            )));
        }
        let BeliefDist::Uniform { margin } = self.p_dist;
        if !(margin.is_finite() && margin > 0.0 && margin < 0.5) {
            return Err(SimulationError::InvalidParameter(format!(
                "belief margin must lie in (0, 0.5), got {margin}"
            )));
        }
        if !(self.kappa.is_finite() && (0.0..=1.0).contains(&self.kappa)) {
            return Err(SimulationError::InvalidParameter(format!(
                "kappa must lie in [0, 1], got {}",
                self.kappa
            )));
        }
        Ok(self)
    }

    fn theta_max(&self) -> f64 {
        let ThetaDist::Uniform { max } = self.theta_dist;
        max
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn draw_belief(rng: &mut ChaCha8Rng, margin: f64) -> f64 {
    rng.gen_range(margin..(1.0 - margin))
}

fn sample_profile_with(spec: &DistributionSpec, n: usize, rng: &mut ChaCha8Rng) -> TypeProfile {
    let max = spec.theta_max();
    let BeliefDist::Uniform { margin } = spec.p_dist;
    // The common pair is drawn unconditionally so the stream position does
    // not depend on kappa; matched-seed comparisons across kappa values
    // then see identical per-expert draws.
    let common = (draw_belief(rng, margin), draw_belief(rng, margin));
    let mut experts = Vec::with_capacity(n);
    for _ in 0..n {
        let (theta_a, theta_b) = loop {
            let a = rng.gen_range(-max..max);
            let b = rng.gen_range(-max..max);
            if a >= 0.0 || b >= 0.0 {
                break (a, b);
            }
        };
        let p_a = (1.0 - spec.kappa) * draw_belief(rng, margin) + spec.kappa * common.0;
        let p_b = (1.0 - spec.kappa) * draw_belief(rng, margin) + spec.kappa * common.1;
        experts.push(ExpertType::new(theta_a, theta_b, p_a, p_b));
    }
    TypeProfile::new(experts).expect("n >= 1")
}

/// Draws one profile; deterministic in (spec, n, seed).
pub fn sample_profile(
    spec: &DistributionSpec,
    n: usize,
    seed: u64,
) -> Result<TypeProfile, SimulationError> {
    let spec = spec.clone().validated()?;
    if n == 0 {
        return Err(SimulationError::InvalidParameter(
            "profile size must be at least 1".into(),
        ));
    }
    Ok(sample_profile_with(&spec, n, &mut trial_rng(seed, 0)))
}

/// Draws `count` independent profiles, one per trial stream.
pub fn sample_profiles(
    spec: &DistributionSpec,
    n: usize,
    count: u64,
    seed: u64,
) -> Result<Vec<TypeProfile>, SimulationError> {
    let spec = spec.clone().validated()?;
    if n == 0 {
        return Err(SimulationError::InvalidParameter(
            "profile size must be at least 1".into(),
        ));
    }
    Ok((0..count)
        .map(|t| sample_profile_with(&spec, n, &mut trial_rng(seed, t)))
        .collect())
}

// ---------------------------------------------------------------------------
// Budget sweeps
// ---------------------------------------------------------------------------

/// Misclassification rates over a budget grid plus summary statistics of
/// the per-profile thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Budget grid, sorted ascending.
    pub budgets: Vec<f64>,
    /// Fraction of non-tie profiles misclassified at each budget. Computed
    /// over one fixed sample set, so it is non-increasing in c exactly, not
    /// just in expectation.
    pub misclassification: Vec<f64>,
    pub profiles: u64,
    /// Profiles whose designer choice is a tie; excluded from the rates.
    pub ties: u64,
    /// Mean finite threshold among profiles where noise and signal disagree
    /// in sign.
    pub mean_threshold_conflict: Option<f64>,
    /// Profiles with an infinite threshold (zero signal, non-zero noise).
    pub unbounded_thresholds: u64,
    /// Fraction of profiles that classify correctly at any budget.
    pub zero_threshold_fraction: f64,
    pub notes: Vec<String>,
}

/// Sweeps an explicit set of profiles across a grid of total budgets.
pub fn sweep_profiles(
    profiles: &[TypeProfile],
    budgets: &[f64],
) -> Result<SweepReport, SimulationError> {
    if budgets.is_empty() {
        return Err(SimulationError::EmptyBudgetGrid);
    }
    if profiles.is_empty() {
        return Err(SimulationError::ZeroTrials);
    }
    let mut grid: Vec<f64> = budgets.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("budgets must not be NaN"));

    let mut ties = 0u64;
    let mut conflict_sum = 0.0;
    let mut conflict_count = 0u64;
    let mut unbounded = 0u64;
    let mut zero_threshold = 0u64;
    for profile in profiles {
        let d = decompose(profile, &BudgetConfig { c: 0.0, n: profile.len() });
        if d.designer_choice == DesignerChoice::Tie {
            ties += 1;
        }
        if d.threshold == 0.0 {
            zero_threshold += 1;
        } else if d.threshold.is_finite() {
            conflict_sum += d.threshold;
            conflict_count += 1;
        } else {
            unbounded += 1;
        }
    }

    let mut misclassification = Vec::with_capacity(grid.len());
    for &c in &grid {
        let mut wrong = 0u64;
        let mut judged = 0u64;
        for profile in profiles {
            let budget = BudgetConfig::new(c, profile.len())?;
            if let Some(ok) = classify(profile, &budget).correct {
                judged += 1;
                if !ok {
                    wrong += 1;
                }
            }
        }
        misclassification.push(if judged == 0 {
            0.0
        } else {
            wrong as f64 / judged as f64
        });
    }

    Ok(SweepReport {
        budgets: grid,
        misclassification,
        profiles: profiles.len() as u64,
        ties,
        mean_threshold_conflict: (conflict_count > 0)
            .then(|| conflict_sum / conflict_count as f64),
        unbounded_thresholds: unbounded,
        zero_threshold_fraction: zero_threshold as f64 / profiles.len() as f64,
        notes: vec![
            "rates are computed over one fixed sample set and are exactly monotone in c".into(),
        ],
    })
}

/// Samples `trials` profiles of size `n` and sweeps them across the budget
/// grid.
pub fn sweep_budget(
    spec: &DistributionSpec,
    n: usize,
    budgets: &[f64],
    trials: u64,
    seed: u64,
) -> Result<SweepReport, SimulationError> {
    if trials == 0 {
        return Err(SimulationError::ZeroTrials);
    }
    let profiles = sample_profiles(spec, n, trials, seed)?;
    let mut report = sweep_profiles(&profiles, budgets)?;
    report
        .notes
        .push("distribution families and their defaults are arbitrary simulation choices".into());
    Ok(report)
}

pub const SWEEP_CSV_HEADER: &str = "budget_c,share,misclassification_rate";

/// Per-budget rows of a sweep as CSV.
pub fn write_sweep_csv<W: std::io::Write>(
    w: &mut W,
    report: &SweepReport,
    n: usize,
) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for (c, rate) in report.budgets.iter().zip(&report.misclassification) {
        writeln!(w, "{},{},{}", c, c / n as f64, rate)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Monte Carlo property suite
// ---------------------------------------------------------------------------

/// Harness self-check hooks: deliberately corrupt one rule to verify the
/// suite notices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteMutation {
    #[default]
    None,
    /// Flip the sign of every ex-post reward.
    RewardSignFlip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyOutcome {
    pub name: String,
    /// Trials where the property applied.
    pub checked: u64,
    pub violations: u64,
    pub first_failure: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub seed: u64,
    pub trials: u64,
    pub n_min: usize,
    pub n_max: usize,
    pub mutation: SuiteMutation,
    pub all_passed: bool,
    pub properties: Vec<PropertyOutcome>,
    pub notes: Vec<String>,
}

const PROPERTY_NAMES: [&str; 16] = [
    "budget_constraint",
    "weak_accountability",
    "transfer_nonpositive",
    "nonpivotal_zero_transfer",
    "payoff_identity",
    "reward_zero_sum",
    "utility_consistency",
    "decomposition_identity",
    "threshold_sufficiency",
    "interim_ir",
    "strict_ir_interior",
    "symmetry",
    "safe_deviation",
    "aligned_dsic",
    "critical_point",
    "budget_monotonicity",
];

struct Recorder {
    outcomes: Vec<PropertyOutcome>,
}

impl Recorder {
    fn new() -> Self {
        Recorder {
            outcomes: PROPERTY_NAMES
                .iter()
                .map(|name| PropertyOutcome {
                    name: (*name).to_string(),
                    checked: 0,
                    violations: 0,
                    first_failure: None,
                })
                .collect(),
        }
    }

    fn record(&mut self, index: usize, pass: bool, witness: impl FnOnce() -> Value) {
        let outcome = &mut self.outcomes[index];
        outcome.checked += 1;
        if !pass {
            outcome.violations += 1;
            if outcome.first_failure.is_none() {
                outcome.first_failure = Some(witness());
            }
        }
    }
}

fn result_with_mutation(
    m: &MessageProfile,
    budget: &BudgetConfig,
    delta: Outcome,
    mutation: SuiteMutation,
) -> MechanismResult {
    let base = run_mechanism(m, budget, delta).expect("suite profiles are well-formed");
    match mutation {
        SuiteMutation::None => base,
        SuiteMutation::RewardSignFlip => {
            let rewards: Vec<f64> = base.rewards.iter().map(|r| -r).collect();
            MechanismResult::assemble(
                base.allocation,
                base.transfers.clone(),
                rewards,
                base.pivotal_flags.clone(),
            )
        }
    }
}

fn witness_base(trial: u64, n: usize, budget: &BudgetConfig, profile: &TypeProfile) -> Value {
    json!({
        "trial": trial,
        "n": n,
        "budget_c": budget.c,
        "share": budget.share(),
        "profile": profile,
    })
}

/// Runs every mechanism, strategy, and aggregation invariant over freshly
/// sampled profiles, messages, and budgets.
///
/// Returns per-property pass counts and, for the first violation of each
/// property, a fully serialized witness.
pub fn run_property_suite(
    spec: &DistributionSpec,
    n_range: RangeInclusive<usize>,
    trials: u64,
    seed: u64,
    mutation: SuiteMutation,
) -> Result<PropertyReport, SimulationError> {
    let spec = spec.clone().validated()?;
    if trials == 0 {
        return Err(SimulationError::ZeroTrials);
    }
    let (n_min, n_max) = (*n_range.start(), *n_range.end());
    if n_min == 0 || n_min > n_max {
        return Err(SimulationError::InvalidParameter(format!(
            "expert count range {n_min}..{n_max} is invalid"
        )));
    }

    let theta_max = spec.theta_max();
    let mut rec = Recorder::new();

    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let n = rng.gen_range(n_min..=n_max);
        let profile = sample_profile_with(&spec, n, &mut rng);
        let share = rng.gen_range(0.0..(2.0 * theta_max));
        let budget = BudgetConfig::new(share * n as f64, n).expect("share >= 0");
        let message_span = theta_max + share;
        let random_messages: MessageProfile = (0..n)
            .map(|_| rng.gen_range(-message_span..message_span))
            .collect();

        // Draws used by the conditional checks happen unconditionally so the
        // stream stays aligned across trials regardless of which checks run.
        let expert_idx = rng.gen_range(0..n);
        let consistency_report = rng.gen_range(-3.0 * message_span..3.0 * message_span);
        let deviation_offset = rng.gen_range(-10.0f64..10.0);
        let dsic_others_sum = rng.gen_range(-20.0f64..20.0);
        let symmetry_theta = rng.gen_range(-theta_max..theta_max);
        let symmetry_p = {
            let BeliefDist::Uniform { margin } = spec.p_dist;
            draw_belief(&mut rng, margin)
        };

        let reports = reference_profile(&profile, &budget);
        let decomposition = decompose(&profile, &budget);

        // budget_constraint: totals never exceed c, with equality on success.
        {
            let mut pass = true;
            let mut detail = json!(null);
            for delta in [Outcome::Positive, Outcome::Negative] {
                let r = result_with_mutation(&random_messages, &budget, delta, mutation);
                let total: f64 = r.payoffs.iter().sum();
                let ok = total <= budget.c + UTILITY_TOLERANCE
                    && (delta == Outcome::Negative
                        || (total - budget.c).abs() <= UTILITY_TOLERANCE);
                if !ok {
                    pass = false;
                    detail = json!({
                        "delta": delta,
                        "messages": &random_messages,
                        "payoff_sum": total,
                    });
                    break;
                }
            }
            rec.record(0, pass, || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("budget_constraint");
                w["detail"] = detail;
                w
            });
        }

        // weak_accountability on random messages, both outcomes.
        {
            let mut failure: Option<Value> = None;
            for delta in [Outcome::Positive, Outcome::Negative] {
                let r = result_with_mutation(&random_messages, &budget, delta, mutation);
                for i in 0..n {
                    if !(r.pivotal_flags[i] && r.transfers[i] < 0.0) {
                        continue;
                    }
                    for j in 0..n {
                        if r.pivotal_flags[j] {
                            continue;
                        }
                        let ok = match delta {
                            Outcome::Positive => {
                                r.payoffs[i] >= r.payoffs[j] - UTILITY_TOLERANCE
                            }
                            Outcome::Negative => r.payoffs[i] < r.payoffs[j],
                        };
                        if !ok && failure.is_none() {
                            failure = Some(json!({
                                "delta": delta,
                                "messages": &random_messages,
                                "pivotal_index": i,
                                "nonpivotal_index": j,
                                "payoffs": &r.payoffs,
                            }));
                        }
                    }
                }
            }
            let pass = failure.is_none();
            rec.record(1, pass, || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("weak_accountability");
                w["detail"] = failure.unwrap_or(json!(null));
                w
            });
        }

        // transfer_nonpositive and nonpivotal_zero_transfer on the real rule.
        {
            let r = run_mechanism(&random_messages, &budget, Outcome::Positive)
                .expect("well-formed");
            rec.record(2, r.transfers.iter().all(|&t| t <= 0.0), || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("transfer_nonpositive");
                w["detail"] = json!({ "messages": &random_messages, "transfers": &r.transfers });
                w
            });
            let zero_ok = r
                .pivotal_flags
                .iter()
                .zip(&r.transfers)
                .all(|(&piv, &t)| piv || t == 0.0);
            rec.record(3, zero_ok, || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("nonpivotal_zero_transfer");
                w["detail"] = json!({ "messages": &random_messages, "transfers": &r.transfers });
                w
            });
        }

        // payoff_identity on the unmutated mechanism.
        {
            let up = run_mechanism(&random_messages, &budget, Outcome::Positive)
                .expect("well-formed");
            let down = run_mechanism(&random_messages, &budget, Outcome::Negative)
                .expect("well-formed");
            let ok_up = up
                .payoffs
                .iter()
                .all(|pi| (pi - budget.share()).abs() <= UTILITY_TOLERANCE);
            let ok_down = down
                .payoffs
                .iter()
                .zip(&down.transfers)
                .all(|(pi, t)| (pi - (2.0 * t - budget.share())).abs() <= UTILITY_TOLERANCE);
            rec.record(4, ok_up && ok_down, || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("payoff_identity");
                w["detail"] = json!({ "messages": &random_messages });
                w
            });
        }

        // reward_zero_sum: r(t, +1) = -r(t, -1) bit for bit.
        {
            let ts = crate::mechanism::transfers(&random_messages);
            let ok = ts
                .iter()
                .all(|&t| reward(t, &budget, Outcome::Positive)
                    == -reward(t, &budget, Outcome::Negative));
            rec.record(5, ok, || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("reward_zero_sum");
                w["detail"] = json!({ "transfers": ts });
                w
            });
        }

        // utility_consistency: the mechanical route equals the closed form.
        {
            let e = &profile.experts()[expert_idx];
            let others_sum = reports.total() - reports.get(expert_idx).unwrap();
            let mechanical =
                expected_utility_against_sum(e, consistency_report, others_sum, &budget);
            let a = allocation_from_sum(others_sum + consistency_report);
            let t = transfer_given_others(consistency_report, others_sum);
            let closed = expected_utility(e, a, t, &budget);
            rec.record(6, (mechanical - closed).abs() <= UTILITY_TOLERANCE, || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("utility_consistency");
                w["detail"] = json!({
                    "expert": expert_idx,
                    "report": consistency_report,
                    "others_sum": others_sum,
                    "mechanical": mechanical,
                    "closed_form": closed,
                });
                w
            });
        }

        // decomposition_identity: summed reports equal noise + share * signal.
        {
            let direct = reports.total();
            rec.record(
                7,
                (direct - decomposition.aggregate).abs() <= UTILITY_TOLERANCE,
                || {
                    let mut w = witness_base(trial, n, &budget, &profile);
                    w["property"] = json!("decomposition_identity");
                    w["detail"] = json!({
                        "reports_total": direct,
                        "decomposition": &decomposition,
                    });
                    w
                },
            );
        }

        // threshold_sufficiency: share above the threshold classifies right.
        if decomposition.designer_choice != DesignerChoice::Tie
            && budget.share() > decomposition.threshold + UTILITY_TOLERANCE
        {
            let cls = classify(&profile, &budget);
            rec.record(8, cls.correct == Some(true), || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("threshold_sufficiency");
                w["detail"] = json!({ "classification": cls, "threshold": decomposition.threshold });
                w
            });
        }

        // interim_ir and its strict interior form.
        {
            let mut weak_ok = true;
            let mut strict_ok = true;
            let mut strict_checked = false;
            let mut detail = json!(null);
            for (i, e) in profile.iter().enumerate() {
                let m_i = reports.get(i).unwrap();
                let others_sum = reports.total() - m_i;
                let participate = expected_utility_against_sum(e, m_i, others_sum, &budget);
                // Abstaining still leaves the expert exposed to the outcome
                // and to the unconditional reward share.
                let abstain =
                    expected_utility(e, allocation_from_sum(others_sum), 0.0, &budget);
                if participate < abstain - UTILITY_TOLERANCE {
                    weak_ok = false;
                    detail = json!({
                        "expert": i,
                        "participate": participate,
                        "abstain": abstain,
                    });
                    break;
                }
                let pivotal = allocation_from_sum(others_sum + m_i)
                    != allocation_from_sum(others_sum);
                let t = transfer_given_others(m_i, others_sum);
                if pivotal && t > -m_i.abs() + UTILITY_TOLERANCE {
                    strict_checked = true;
                    if participate <= abstain {
                        strict_ok = false;
                        detail = json!({
                            "expert": i,
                            "participate": participate,
                            "abstain": abstain,
                            "transfer": t,
                        });
                        break;
                    }
                }
            }
            rec.record(9, weak_ok, || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("interim_ir");
                w["detail"] = detail.clone();
                w
            });
            if strict_checked || !strict_ok {
                rec.record(10, strict_ok, || {
                    let mut w = witness_base(trial, n, &budget, &profile);
                    w["property"] = json!("strict_ir_interior");
                    w["detail"] = detail;
                    w
                });
            }
        }

        // symmetry: a fully indifferent expert reports zero and leaves the
        // allocation untouched.
        {
            let indifferent =
                ExpertType::new(symmetry_theta, symmetry_theta, symmetry_p, symmetry_p);
            let m_star = reference_report(&indifferent, &budget);
            let s = reports.total();
            let ok = m_star == 0.0
                && allocation_from_sum(s + m_star) == allocation_from_sum(s);
            rec.record(11, ok, || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("symmetry");
                w["detail"] = json!({ "indifferent": indifferent, "report": m_star });
                w
            });
        }

        // safe_deviation: flips toward the lower-belief side never pay.
        {
            let e = &profile.experts()[expert_idx];
            let others: MessageProfile = reports
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != expert_idx)
                .map(|(_, m)| m)
                .collect();
            let m_prime = -others.total() + deviation_offset;
            let verdict = check_safe_deviation(e, &others, m_prime, &budget);
            let ok = match verdict {
                DeviationVerdict::FlipTowardLowerBelief { delta_eu } => {
                    delta_eu <= UTILITY_TOLERANCE
                }
                _ => true,
            };
            rec.record(12, ok, || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("safe_deviation");
                w["detail"] = json!({
                    "expert": expert_idx,
                    "deviation": m_prime,
                    "verdict": verdict,
                });
                w
            });
        }

        // aligned_dsic: a coarse grid never beats the reference report.
        if let Some(e) = profile
            .iter()
            .find(|e| alignment(e) == AlignmentClass::Aligned)
        {
            let m_star = reference_report(e, &budget);
            let half = dsic_others_sum.abs() + m_star.abs() + 10.0;
            let grid = ReportGrid::new(-half, half, (2.0 * half / 2000.0).max(1e-3));
            let best = best_response_oracle(e, dsic_others_sum, &budget, &grid)
                .expect("grid is non-empty");
            let eu_star = expected_utility_against_sum(e, m_star, dsic_others_sum, &budget);
            let eu_best = expected_utility_against_sum(e, best, dsic_others_sum, &budget);
            rec.record(13, eu_best <= eu_star + UTILITY_TOLERANCE, || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("aligned_dsic");
                w["detail"] = json!({
                    "expert": e,
                    "others_sum": dsic_others_sum,
                    "reference": m_star,
                    "grid_best": best,
                    "eu_reference": eu_star,
                    "eu_best": eu_best,
                });
                w
            });
        }

        // critical_point: the preference between pivoting and staying flips
        // exactly where the closed form says it does; found by bisection.
        if let Some(e) = profile
            .iter()
            .find(|e| e.theta_a > e.theta_b && e.p_a > e.p_b)
        {
            let m_star = reference_report(e, &budget);
            let f = |t: f64| {
                expected_utility(e, Allocation::A, t, &budget)
                    - expected_utility(e, Allocation::B, 0.0, &budget)
            };
            let mut lo = -m_star - 10.0;
            let mut hi = 0.0;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            let ok = (root + m_star).abs() <= 1e-6 * m_star.abs().max(1.0);
            rec.record(14, ok, || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("critical_point");
                w["detail"] = json!({ "expert": e, "root": root, "reference": m_star });
                w
            });
        }

        // budget_monotonicity: once the budget classifies correctly, more
        // budget never breaks it.
        if decomposition.designer_choice != DesignerChoice::Tie
            && decomposition.threshold.is_finite()
            && decomposition.threshold > 0.0
        {
            let mut seen_correct = false;
            let mut ok = true;
            for factor in [0.0, 0.5, 1.0, 1.5, 3.0] {
                let c = decomposition.threshold * factor * n as f64;
                let correct = classify(&profile, &BudgetConfig::new(c, n).expect("c >= 0"))
                    .correct
                    == Some(true);
                if seen_correct && !correct {
                    ok = false;
                    break;
                }
                seen_correct = correct;
            }
            rec.record(15, ok, || {
                let mut w = witness_base(trial, n, &budget, &profile);
                w["property"] = json!("budget_monotonicity");
                w["detail"] = json!({ "threshold": decomposition.threshold });
                w
            });
        }
    }

    let all_passed = rec.outcomes.iter().all(|o| o.violations == 0);
    let mut notes = vec![
        "distribution families and their defaults are arbitrary simulation choices".to_string(),
    ];
    if mutation != SuiteMutation::None {
        notes.push("a deliberate mutation is active; failures are expected".to_string());
    }
    Ok(PropertyReport {
        seed,
        trials,
        n_min,
        n_max,
        mutation,
        all_passed,
        properties: rec.outcomes,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Scenario runner
// ---------------------------------------------------------------------------

/// Samples the realized outcome for a chosen alternative from the council's
/// weight-normalized aggregate belief in it. Simulation plumbing: the
/// mechanism itself never computes this.
pub fn resolve_outcome(profile: &TypeProfile, allocation: Allocation, seed: u64) -> (Outcome, f64) {
    let ws = weights(profile);
    let total: f64 = ws.iter().sum();
    let mut acc = 0.0;
    for (e, w) in profile.iter().zip(&ws) {
        let (_, p) = e.for_alternative(allocation);
        acc += w * p;
    }
    let q = acc / total;
    let mut rng = trial_rng(seed, 0);
    let outcome = if rng.gen_range(0.0..1.0) < q {
        Outcome::Positive
    } else {
        Outcome::Negative
    };
    (outcome, q)
}

/// What to use for the realized outcome when running a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaRequest {
    /// Follow the scenario: a fixed outcome is used directly, anything else
    /// leaves the outcome unresolved and reports both payoff tables.
    Auto,
    /// Force a specific outcome.
    Use(Outcome),
    /// Resolve through the scenario's outcome spec, sampling if required.
    Resolve,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error("resolving a sampled outcome requires a seed")]
    SeedRequired,
    #[error("the scenario's outcome is external; pass an explicit delta")]
    ExternalOutcome,
}

/// Payoff tables for both outcome realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable {
    pub positive: MechanismResult,
    pub negative: MechanismResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedOutcome {
    pub delta: Outcome,
    /// "fixed", "forced", or "sampled".
    pub resolution: String,
    /// Success probability used when sampled.
    pub success_probability: Option<f64>,
}

/// The full walkthrough for one scenario: reports, allocation, transfers,
/// decomposition, classification, and payoffs under both outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub share: f64,
    pub alignments: Vec<AlignmentClass>,
    pub reports: MessageProfile,
    pub aggregate_report: f64,
    pub allocation: Allocation,
    pub decomposition: crate::types::Decomposition,
    pub classification: Classification,
    pub outcomes: OutcomeTable,
    pub realized: Option<RealizedOutcome>,
    pub notes: Vec<String>,
}

pub fn run_scenario(
    scenario: Scenario,
    request: DeltaRequest,
    seed: Option<u64>,
) -> Result<ScenarioRun, RunError> {
    let scenario = scenario.validated()?;
    let budget = scenario.budget()?;
    let profile = &scenario.experts;

    let alignments = profile.iter().map(alignment).collect();
    let reports = reference_profile(profile, &budget);
    let aggregate_report = reports.total();
    let allocation = allocation_from_sum(aggregate_report);
    let decomposition = decompose(profile, &budget);
    let classification = classify(profile, &budget);
    let outcomes = OutcomeTable {
        positive: run_mechanism(&reports, &budget, Outcome::Positive)?,
        negative: run_mechanism(&reports, &budget, Outcome::Negative)?,
    };

    let mut notes = Vec::new();
    let realized = match request {
        DeltaRequest::Use(delta) => Some(RealizedOutcome {
            delta,
            resolution: "forced".into(),
            success_probability: None,
        }),
        DeltaRequest::Auto => match scenario.outcome {
            OutcomeSpec::Fixed(delta) => Some(RealizedOutcome {
                delta,
                resolution: "fixed".into(),
                success_probability: None,
            }),
            _ => None,
        },
        DeltaRequest::Resolve => match scenario.outcome {
            OutcomeSpec::Fixed(delta) => Some(RealizedOutcome {
                delta,
                resolution: "fixed".into(),
                success_probability: None,
            }),
            OutcomeSpec::Bernoulli => {
                let seed = seed.ok_or(RunError::SeedRequired)?;
                let (delta, q) = resolve_outcome(profile, allocation, seed);
                notes.push(
                    "outcome sampled from the weight-normalized aggregate belief in the \
                     chosen alternative; a simulation convenience, not a mechanism rule"
                        .into(),
                );
                Some(RealizedOutcome {
                    delta,
                    resolution: "sampled".into(),
                    success_probability: Some(q),
                })
            }
            OutcomeSpec::External => return Err(RunError::ExternalOutcome),
        },
    };
    if classification.correct == Some(false) {
        notes.push(
            "misclassified: the aggregate follows preference noise against the \
             belief-weighted choice at this budget"
                .into(),
        );
    }

    Ok(ScenarioRun {
        scenario,
        share: budget.share(),
        alignments,
        reports,
        aggregate_report,
        allocation,
        decomposition,
        classification,
        outcomes,
        realized,
        notes,
    })
}
