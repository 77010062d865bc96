//! The decision mechanism itself: the sign allocation rule, pivotal
//! transfers, and outcome-contingent rewards.
//!
//! A full run is a single pass: compute the global sum S once, then treat
//! each expert's view of the others as S - m_i. Everything downstream is
//! O(1) per expert, so the whole mechanism is O(n).

use thiserror::Error;

use crate::types::{Allocation, BudgetConfig, MechanismResult, MessageProfile, Outcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanismError {
    #[error("message profile is empty")]
    EmptyProfile,
    #[error("expert index {index} out of range for {len} messages")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("budget is sized for {budget_n} experts, got {messages} messages")]
    LengthMismatch { budget_n: usize, messages: usize },
}

/// Allocation as a function of the aggregate report: A when the sum is
/// non-negative, B otherwise. The tie at exactly zero goes to A.
pub fn allocation_from_sum(sum: f64) -> Allocation {
    if sum >= 0.0 {
        Allocation::A
    } else {
        Allocation::B
    }
}

/// Collective decision for a full message profile.
pub fn allocate(m: &MessageProfile) -> Result<Allocation, MechanismError> {
    if m.is_empty() {
        return Err(MechanismError::EmptyProfile);
    }
    Ok(allocation_from_sum(m.total()))
}

/// Pivotal transfer for a report `m_i` facing the other experts' aggregate
/// `others_sum`: the externality the report imposes when it flips the
/// outcome, zero otherwise. Never positive.
///
/// The comparisons are strict, so an expert sitting exactly on a boundary
/// pays nothing even when removing their report would flip the allocation.
pub fn transfer_given_others(m_i: f64, others_sum: f64) -> f64 {
    if -m_i > others_sum && others_sum > 0.0 {
        -others_sum
    } else if -m_i < others_sum && others_sum < 0.0 {
        others_sum
    } else {
        0.0
    }
}

/// Transfer for expert `i` within a full profile.
pub fn vcg_transfer(m: &MessageProfile, i: usize) -> Result<f64, MechanismError> {
    let m_i = m.get(i).ok_or(MechanismError::IndexOutOfRange {
        index: i,
        len: m.len(),
    })?;
    Ok(transfer_given_others(m_i, m.total() - m_i))
}

/// True when removing expert `i`'s report changes the allocation.
pub fn is_pivotal(m: &MessageProfile, i: usize) -> Result<bool, MechanismError> {
    let m_i = m.get(i).ok_or(MechanismError::IndexOutOfRange {
        index: i,
        len: m.len(),
    })?;
    let total = m.total();
    Ok(allocation_from_sum(total) != allocation_from_sum(total - m_i))
}

/// All transfers in one pass over the profile.
pub fn transfers(m: &MessageProfile) -> Vec<f64> {
    let total = m.total();
    m.iter()
        .map(|m_i| transfer_given_others(m_i, total - m_i))
        .collect()
}

/// Outcome-contingent reward: on success the tax is refunded and the budget
/// share paid on top; on failure the tax is levied a second time and the
/// share withheld.
pub fn reward(t_i: f64, budget: &BudgetConfig, delta: Outcome) -> f64 {
    debug_assert!(t_i <= 0.0, "reward expects a non-positive transfer");
    match delta {
        Outcome::Positive => -t_i + budget.share(),
        Outcome::Negative => t_i - budget.share(),
    }
}

/// Runs the full mechanism for one realized outcome.
///
/// Per-expert totals come out as c/n for everyone on success and
/// 2 t_i - c/n on failure.
pub fn run_mechanism(
    m: &MessageProfile,
    budget: &BudgetConfig,
    delta: Outcome,
) -> Result<MechanismResult, MechanismError> {
    if m.is_empty() {
        return Err(MechanismError::EmptyProfile);
    }
    if m.len() != budget.n {
        return Err(MechanismError::LengthMismatch {
            budget_n: budget.n,
            messages: m.len(),
        });
    }
    let total = m.total();
    let allocation = allocation_from_sum(total);
    let n = m.len();
    let mut transfers = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    let mut pivotal = Vec::with_capacity(n);
    for m_i in m.iter() {
        let others = total - m_i;
        let t = transfer_given_others(m_i, others);
        transfers.push(t);
        rewards.push(reward(t, budget, delta));
        pivotal.push(allocation != allocation_from_sum(others));
    }
    Ok(MechanismResult::assemble(
        allocation, transfers, rewards, pivotal,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::UTILITY_TOLERANCE;
    use proptest::prelude::*;

    fn worked_messages() -> MessageProfile {
        MessageProfile::new(vec![12.0, -10.0, -3.0])
    }

    #[test]
    fn allocate_follows_the_sign_of_the_sum() {
        assert_eq!(allocate(&worked_messages()).unwrap(), Allocation::B);
        assert_eq!(
            allocate(&MessageProfile::new(vec![0.0])).unwrap(),
            Allocation::A
        );
        assert_eq!(
            allocate(&MessageProfile::new(vec![8.0, -6.0, -1.0])).unwrap(),
            Allocation::A
        );
        assert_eq!(
            allocate(&MessageProfile::default()).unwrap_err(),
            MechanismError::EmptyProfile
        );
    }

    #[test]
    fn worked_example_transfers() {
        let m = worked_messages();
        assert_eq!(vcg_transfer(&m, 0).unwrap(), 0.0);
        assert_eq!(vcg_transfer(&m, 1).unwrap(), -9.0);
        assert_eq!(vcg_transfer(&m, 2).unwrap(), -2.0);
        assert!(matches!(
            vcg_transfer(&m, 3),
            Err(MechanismError::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn singleton_expert_pays_nothing() {
        // The others' sum is zero, so neither strict inequality holds.
        let m = MessageProfile::new(vec![5.0]);
        assert_eq!(vcg_transfer(&m, 0).unwrap(), 0.0);
    }

    #[test]
    fn worked_example_pivotality() {
        let m = worked_messages();
        assert!(!is_pivotal(&m, 0).unwrap());
        assert!(is_pivotal(&m, 1).unwrap());
        assert!(is_pivotal(&m, 2).unwrap());
        assert!(!is_pivotal(&MessageProfile::new(vec![1.0, 1.0]), 0).unwrap());
    }

    #[test]
    fn reward_cases() {
        let b = BudgetConfig::new(24.0, 3).unwrap();
        assert_eq!(reward(-9.0, &b, Outcome::Positive), 17.0);
        assert_eq!(reward(0.0, &b, Outcome::Negative), -8.0);
        let zero = BudgetConfig::new(0.0, 3).unwrap();
        assert_eq!(reward(0.0, &zero, Outcome::Positive), 0.0);
    }

    #[test]
    fn worked_example_full_run() {
        let m = worked_messages();
        let b = BudgetConfig::new(24.0, 3).unwrap();

        let up = run_mechanism(&m, &b, Outcome::Positive).unwrap();
        assert_eq!(up.allocation, Allocation::B);
        assert_eq!(up.transfers, vec![0.0, -9.0, -2.0]);
        assert_eq!(up.rewards, vec![8.0, 17.0, 10.0]);
        assert_eq!(up.payoffs, vec![8.0, 8.0, 8.0]);
        assert_eq!(up.pivotal_flags, vec![false, true, true]);

        let down = run_mechanism(&m, &b, Outcome::Negative).unwrap();
        assert_eq!(down.rewards, vec![-8.0, -17.0, -10.0]);
        assert_eq!(down.payoffs, vec![-8.0, -26.0, -12.0]);
    }

    #[test]
    fn zero_messages_zero_budget_pay_nothing() {
        let m = MessageProfile::new(vec![0.0, 0.0]);
        let b = BudgetConfig::new(0.0, 2).unwrap();
        for delta in [Outcome::Positive, Outcome::Negative] {
            let r = run_mechanism(&m, &b, delta).unwrap();
            assert_eq!(r.payoffs, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn run_rejects_length_mismatch() {
        let b = BudgetConfig::new(10.0, 2).unwrap();
        assert!(matches!(
            run_mechanism(&worked_messages(), &b, Outcome::Positive),
            Err(MechanismError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn boundary_tie_is_pivotal_but_untaxed() {
        // Removing the first report flips A to B, yet the strict transfer
        // conditions fail: a measure-zero case the transfer rule leaves at
        // zero on purpose.
        let m = MessageProfile::new(vec![1.0, -1.0]);
        assert_eq!(allocate(&m).unwrap(), Allocation::A);
        assert!(is_pivotal(&m, 0).unwrap());
        assert_eq!(vcg_transfer(&m, 0).unwrap(), 0.0);
    }

    fn message_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-15.0f64..15.0, 1..10)
    }

    proptest! {
        #[test]
        fn transfers_are_never_positive(msgs in message_vec()) {
            let m = MessageProfile::new(msgs);
            for t in transfers(&m) {
                prop_assert!(t <= 0.0);
            }
        }

        #[test]
        fn non_pivotal_experts_pay_exactly_zero(msgs in message_vec()) {
            let m = MessageProfile::new(msgs);
            for (i, t) in transfers(&m).into_iter().enumerate() {
                if !is_pivotal(&m, i).unwrap() {
                    prop_assert_eq!(t, 0.0);
                }
                // Pivotal with zero transfer only happens on exact boundaries.
                if is_pivotal(&m, i).unwrap() && t == 0.0 {
                    let total = m.total();
                    prop_assert!(total == 0.0 || total - m.get(i).unwrap() == 0.0);
                }
            }
        }

        #[test]
        fn budget_constraint_holds(
            msgs in message_vec(),
            c in 0.0f64..50.0,
        ) {
            let n = msgs.len();
            let m = MessageProfile::new(msgs);
            let b = BudgetConfig::new(c, n).unwrap();

            let up = run_mechanism(&m, &b, Outcome::Positive).unwrap();
            let sum_up: f64 = up.payoffs.iter().sum();
            // Success: the totals consume the budget exactly.
            prop_assert!((sum_up - c).abs() <= UTILITY_TOLERANCE);

            let down = run_mechanism(&m, &b, Outcome::Negative).unwrap();
            let sum_down: f64 = down.payoffs.iter().sum();
            let transfer_sum: f64 = down.transfers.iter().sum();
            prop_assert!(sum_down <= c + UTILITY_TOLERANCE);
            prop_assert!((sum_down - (2.0 * transfer_sum - c)).abs() <= UTILITY_TOLERANCE);
            prop_assert!(sum_down <= -c + UTILITY_TOLERANCE);
        }

        #[test]
        fn payoffs_take_the_closed_forms(
            msgs in message_vec(),
            c in 0.0f64..50.0,
        ) {
            let n = msgs.len();
            let m = MessageProfile::new(msgs);
            let b = BudgetConfig::new(c, n).unwrap();
            let share = b.share();

            let up = run_mechanism(&m, &b, Outcome::Positive).unwrap();
            for pi in &up.payoffs {
                prop_assert!((pi - share).abs() <= UTILITY_TOLERANCE);
            }
            let down = run_mechanism(&m, &b, Outcome::Negative).unwrap();
            for (pi, t) in down.payoffs.iter().zip(&down.transfers) {
                prop_assert!((pi - (2.0 * t - share)).abs() <= UTILITY_TOLERANCE);
            }
        }

        #[test]
        fn weak_accountability_on_random_profiles(
            msgs in message_vec(),
            c in 0.0f64..50.0,
        ) {
            let n = msgs.len();
            let m = MessageProfile::new(msgs);
            let b = BudgetConfig::new(c, n).unwrap();
            for delta in [Outcome::Positive, Outcome::Negative] {
                let r = run_mechanism(&m, &b, delta).unwrap();
                for i in 0..n {
                    if !(r.pivotal_flags[i] && r.transfers[i] < 0.0) {
                        continue;
                    }
                    for j in 0..n {
                        if r.pivotal_flags[j] {
                            continue;
                        }
                        match delta {
                            Outcome::Positive => {
                                prop_assert!(r.payoffs[i] >= r.payoffs[j] - UTILITY_TOLERANCE)
                            }
                            Outcome::Negative => prop_assert!(r.payoffs[i] < r.payoffs[j]),
                        }
                    }
                }
            }
        }

        #[test]
        fn rewards_are_zero_sum_across_outcomes(
            t in -20.0f64..0.0,
            c in 0.0f64..50.0,
            n in 1usize..10,
        ) {
            let b = BudgetConfig::new(c, n).unwrap();
            prop_assert_eq!(
                reward(t, &b, Outcome::Positive),
                -reward(t, &b, Outcome::Negative)
            );
        }
    }
}
