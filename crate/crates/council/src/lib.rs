//! Outcome-accountable decision-making for expert councils choosing between
//! two alternatives.
//!
//! Each expert submits one scalar report. The sign of the aggregate picks
//! the alternative, pivotal experts pay the externality their report
//! imposes, and once the decision's real-world outcome is observed an
//! ex-post reward refunds the tax plus a budget share on success or doubles
//! the tax and withholds the share on failure. The result: experts who flip
//! the decision profit with it when it works and pay for it when it does
//! not, and the aggregate report splits cleanly into preference noise plus
//! a budget-scaled belief signal.
//!
//! The crate provides the mechanism itself ([`mechanism`]), expert-side
//! strategy analysis ([`strategy`]), the aggregate decomposition and budget
//! threshold ([`aggregation`]), five baseline rules with accountability
//! counterexamples ([`baselines`]), and a deterministic Monte Carlo
//! verification harness ([`simulation`]).
//!
//! ```
//! use council::mechanism::run_mechanism;
//! use council::types::{BudgetConfig, MessageProfile, Outcome};
//!
//! let reports = MessageProfile::new(vec![12.0, -10.0, -3.0]);
//! let budget = BudgetConfig::new(24.0, 3)?;
//!
//! // On success every expert nets the budget share...
//! let up = run_mechanism(&reports, &budget, Outcome::Positive)?;
//! assert_eq!(up.payoffs, vec![8.0, 8.0, 8.0]);
//!
//! // ...on failure the pivotal experts pay double their tax on top.
//! let down = run_mechanism(&reports, &budget, Outcome::Negative)?;
//! assert_eq!(down.payoffs, vec![-8.0, -26.0, -12.0]);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! The `book/` directory holds a longer guide; its code blocks compile and
//! run as part of `cargo test --doc` (see the module at the bottom of this
//! file).

pub mod aggregation;
pub mod baselines;
pub mod mechanism;
pub mod simulation;
pub mod strategy;
pub mod types;

pub use types::{
    Allocation, BudgetConfig, Decomposition, DesignerChoice, ExpertType, MechanismResult,
    MessageProfile, Outcome, OutcomeSpec, Scenario, TypeProfile, ValidationError,
};

// Book chapters double as doctests so the guide can never drift from the
// library: `cargo test --doc` compiles and runs every ```rust block in
// book/src/.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/mechanism.md")]
    pub mod mechanism {}
    #[doc = include_str!("../../../book/src/strategies.md")]
    pub mod strategies {}
    #[doc = include_str!("../../../book/src/aggregation.md")]
    pub mod aggregation {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    pub mod baselines {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub mod simulation {}
}
