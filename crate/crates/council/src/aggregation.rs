//! Aggregate-signal analysis: how the sum of reference reports splits into
//! preference noise and a weighted belief signal, and what budget makes the
//! mechanism's choice match the belief-weighted optimum.

use std::io;

use serde::{Deserialize, Serialize};

use crate::mechanism::allocation_from_sum;
use crate::strategy::reference_profile;
use crate::types::{
    Allocation, BudgetConfig, Decomposition, DesignerChoice, ExpertType, TypeProfile,
};

/// Endogenous weight of one expert in the belief signal.
pub fn weight(e: &ExpertType) -> f64 {
    1.0 / (1.0 - e.preferred_success_prob())
}

/// All weights, in expert order.
pub fn weights(profile: &TypeProfile) -> Vec<f64> {
    profile.iter().map(weight).collect()
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Splits the aggregate reference report into noise and belief signal.
///
/// Each expert contributes (theta_a - theta_b) / (2 (1 - p)) to the noise
/// and (p_a - p_b) / (1 - p) to the signal, where p is the success
/// probability of their preferred alternative. Summing a profile's
/// reference reports therefore gives exactly noise + share * signal, which
/// the returned `aggregate` field records.
pub fn decompose(profile: &TypeProfile, budget: &BudgetConfig) -> Decomposition {
    let mut noise = 0.0;
    let mut belief = 0.0;
    let mut ws = Vec::with_capacity(profile.len());
    for e in profile.iter() {
        let p = e.preferred_success_prob();
        noise += (e.theta_a - e.theta_b) / (2.0 * (1.0 - p));
        belief += (e.p_a - e.p_b) / (1.0 - p);
        ws.push(1.0 / (1.0 - p));
    }
    let designer_choice = match sign(belief) {
        1 => DesignerChoice::Alternative(Allocation::A),
        -1 => DesignerChoice::Alternative(Allocation::B),
        _ => DesignerChoice::Tie,
    };
    let threshold = if sign(noise) == sign(belief) {
        0.0
    } else if belief == 0.0 {
        // Pure noise with no signal: no finite budget classifies.
        f64::INFINITY
    } else {
        (noise / belief).abs()
    };
    let aggregate = noise + budget.share() * belief;
    Decomposition {
        noise,
        belief_signal: belief,
        weights: ws,
        threshold,
        designer_choice,
        aggregate,
    }
}

/// Mechanism choice versus designer choice at a given budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub mechanism_choice: Allocation,
    pub designer_choice: DesignerChoice,
    /// None when the designer is indifferent (zero belief signal).
    pub correct: Option<bool>,
}

/// Runs the reference-report profile through the allocation rule and
/// compares the result with the sign of the belief signal.
pub fn classify(profile: &TypeProfile, budget: &BudgetConfig) -> Classification {
    let reports = reference_profile(profile, budget);
    let mechanism_choice = allocation_from_sum(reports.total());
    let d = decompose(profile, budget);
    let correct = match d.designer_choice {
        DesignerChoice::Alternative(a) => Some(a == mechanism_choice),
        DesignerChoice::Tie => None,
    };
    Classification {
        mechanism_choice,
        designer_choice: d.designer_choice,
        correct,
    }
}

/// The (noise, belief-signal) coordinates of a profile on the
/// classification plane. Budget-independent.
pub fn plane_point(profile: &TypeProfile) -> (f64, f64) {
    let d = decompose(profile, &BudgetConfig { c: 0.0, n: profile.len() });
    (d.noise, d.belief_signal)
}

/// Slope of the decision boundary in the (N, B) plane at a given budget:
/// the aggregate vanishes along B = -(n/c) N. Infinite when c = 0 (the
/// boundary degenerates to the signal axis).
pub fn boundary_slope(budget: &BudgetConfig) -> f64 {
    -(budget.n as f64) / budget.c
}

/// One profile's row of the classification-plane export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneRow {
    pub noise: f64,
    pub belief_signal: f64,
    #[serde(with = "plane_threshold")]
    pub threshold: f64,
    pub designer: DesignerChoice,
    pub mechanism: Allocation,
    pub correct: Option<bool>,
}

mod plane_threshold {
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

pub fn plane_row(profile: &TypeProfile, budget: &BudgetConfig) -> PlaneRow {
    let d = decompose(profile, budget);
    let cls = classify(profile, budget);
    PlaneRow {
        noise: d.noise,
        belief_signal: d.belief_signal,
        threshold: d.threshold,
        designer: cls.designer_choice,
        mechanism: cls.mechanism_choice,
        correct: cls.correct,
    }
}

pub const PLANE_CSV_HEADER: &str = "N,B,c_bar,designer,mechanism,correct";

/// Writes plane rows as CSV with full float precision. `correct` is "na"
/// for ties; an infinite threshold prints as "inf".
pub fn write_plane_csv<W: io::Write>(w: &mut W, rows: &[PlaneRow]) -> io::Result<()> {
    writeln!(w, "{PLANE_CSV_HEADER}")?;
    for r in rows {
        let correct = match r.correct {
            Some(true) => "true",
            Some(false) => "false",
            None => "na",
        };
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.noise, r.belief_signal, r.threshold, r.designer, r.mechanism, correct
        )?;
    }
    Ok(())
}
