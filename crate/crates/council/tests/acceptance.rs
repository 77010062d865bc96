//! Acceptance suite: end-to-end checks of the worked walkthrough, the
//! decomposition, deviation safety, the Monte Carlo property suite, oracle
//! equivalence for aligned experts, the baseline counterexamples, linear
//! scaling, and the belief-convergence effect.
//!
//! Each criterion prints one PASS/FAIL line; run with `--nocapture` to see
//! them all:
//!
//! ```text
//! cargo test -p council --test acceptance -- --nocapture
//! ```

use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use council::aggregation::{classify, decompose, plane_point};
use council::baselines::{
    accountability_witness, main_mechanism_accountable, weak_accountability_violation,
    BaselineKind,
};
use council::mechanism::run_mechanism;
use council::simulation::{
    run_property_suite, sample_profile, DistributionSpec, SuiteMutation,
};
use council::strategy::{
    alignment, best_response_oracle, check_safe_deviation, expected_utility_against_sum,
    expected_utility_of_report, reference_profile, reference_report, AlignmentClass,
    DeviationVerdict, ReportGrid,
};
use council::types::{
    Allocation, BudgetConfig, DesignerChoice, ExpertType, MessageProfile, Outcome, TypeProfile,
};

const TOL: f64 = 1e-9;

fn criterion(name: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("{name}: PASS"),
        Err(reason) => {
            println!("{name}: FAIL ({reason})");
            panic!("{name} failed: {reason}");
        }
    }
}

fn ensure(cond: bool, reason: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(reason.into())
    }
}

fn close(actual: f64, expected: f64) -> bool {
    (actual - expected).abs() <= TOL
}

fn close_all(actual: &[f64], expected: &[f64]) -> bool {
    actual.len() == expected.len()
        && actual.iter().zip(expected).all(|(a, e)| close(*a, *e))
}

fn worked_profile() -> TypeProfile {
    TypeProfile::new(vec![
        ExpertType::new(2.0, 0.0, 0.75, 0.50),
        ExpertType::new(0.0, 1.0, 0.50, 0.75),
        ExpertType::new(1.0, 0.0, 0.50, 0.75),
    ])
    .unwrap()
}

fn best_of<T>(reps: usize, mut f: impl FnMut() -> T) -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..reps {
        let start = Instant::now();
        black_box(f());
        best = best.min(start.elapsed());
    }
    best
}

#[test]
fn ac1_worked_example_reproduction() {
    criterion("AC1 worked-example reproduction", || {
        let profile = worked_profile();
        let budget = BudgetConfig::new(24.0, 3).unwrap();

        let reports = reference_profile(&profile, &budget);
        ensure(
            close_all(reports.messages(), &[12.0, -10.0, -3.0]),
            format!("reports {:?}", reports.messages()),
        )?;

        let up = run_mechanism(&reports, &budget, Outcome::Positive).unwrap();
        ensure(up.allocation == Allocation::B, "allocation should be B")?;
        ensure(
            close_all(&up.transfers, &[0.0, -9.0, -2.0]),
            format!("transfers {:?}", up.transfers),
        )?;
        ensure(
            close_all(&up.payoffs, &[8.0, 8.0, 8.0]),
            format!("success payoffs {:?}", up.payoffs),
        )?;
        let down = run_mechanism(&reports, &budget, Outcome::Negative).unwrap();
        ensure(
            close_all(&down.payoffs, &[-8.0, -26.0, -12.0]),
            format!("failure payoffs {:?}", down.payoffs),
        )?;

        let elapsed = best_of(100, || {
            let reports = reference_profile(&profile, &budget);
            let up = run_mechanism(&reports, &budget, Outcome::Positive).unwrap();
            let down = run_mechanism(&reports, &budget, Outcome::Negative).unwrap();
            (up, down)
        });
        ensure(
            elapsed < Duration::from_millis(1),
            format!("runtime {elapsed:?} exceeds 1 ms"),
        )
    });
}

#[test]
fn ac2_decomposition_reproduction() {
    criterion("AC2 decomposition reproduction", || {
        let profile = worked_profile();
        let budget = BudgetConfig::new(24.0, 3).unwrap();
        let d = decompose(&profile, &budget);
        ensure(close(d.noise, 3.0), format!("noise {}", d.noise))?;
        ensure(
            close(d.belief_signal, -0.5),
            format!("signal {}", d.belief_signal),
        )?;
        ensure(close(d.threshold, 6.0), format!("threshold {}", d.threshold))?;

        let reduced = BudgetConfig::new(12.0, 3).unwrap();
        let reports = reference_profile(&profile, &reduced);
        ensure(
            close_all(reports.messages(), &[8.0, -6.0, -1.0]),
            format!("reduced-budget reports {:?}", reports.messages()),
        )?;
        ensure(close(reports.total(), 1.0), format!("sum {}", reports.total()))?;
        let cls = classify(&profile, &reduced);
        ensure(
            cls.mechanism_choice == Allocation::A && cls.correct == Some(false),
            "reduced budget should misclassify toward A",
        )
    });
}

#[test]
fn ac3_safe_deviation_reproduction() {
    criterion("AC3 safe-deviation reproduction", || {
        let profile = worked_profile();
        let budget = BudgetConfig::new(24.0, 3).unwrap();
        let expert = profile.experts()[2];
        let others = MessageProfile::new(vec![12.0, -10.0]);

        let eu_star = expected_utility_of_report(&expert, -3.0, &others, &budget);
        let eu_dev = expected_utility_of_report(&expert, 5.0, &others, &budget);
        ensure(close(eu_star, 3.0), format!("reference utility {eu_star}"))?;
        ensure(close(eu_dev, 1.0), format!("deviation utility {eu_dev}"))?;

        match check_safe_deviation(&expert, &others, 5.0, &budget) {
            DeviationVerdict::FlipTowardLowerBelief { delta_eu } => ensure(
                close(delta_eu, -2.0),
                format!("delta EU {delta_eu}, expected -2"),
            ),
            v => Err(format!("expected a lower-belief flip, got {v:?}")),
        }
    });
}

#[test]
fn ac4_property_suite_clean() {
    criterion("AC4 property suites (10^4 profiles, n in 1..12)", || {
        let start = Instant::now();
        let report = run_property_suite(
            &DistributionSpec::default(),
            1..=12,
            10_000,
            42,
            SuiteMutation::None,
        )
        .unwrap();
        let elapsed = start.elapsed();
        for p in &report.properties {
            ensure(
                p.violations == 0,
                format!(
                    "{} violated {} times; first witness: {:?}",
                    p.name, p.violations, p.first_failure
                ),
            )?;
        }
        ensure(report.all_passed, "suite reported failure")?;
        ensure(
            elapsed < Duration::from_secs(30),
            format!("suite took {elapsed:?}, limit 30 s"),
        )
    });
}

#[test]
fn ac5_aligned_dsic_oracle_equivalence() {
    criterion("AC5 aligned-DSIC oracle equivalence (200 x 50)", || {
        let start = Instant::now();
        let spec = DistributionSpec::default();
        let budget = BudgetConfig::new(8.0, 1).unwrap();

        let mut aligned = Vec::with_capacity(200);
        let mut seed = 0u64;
        while aligned.len() < 200 {
            let profile = sample_profile(&spec, 1, seed).unwrap();
            let e = profile.experts()[0];
            if alignment(&e) == AlignmentClass::Aligned {
                aligned.push(e);
            }
            seed += 1;
        }

        let others_sums: Vec<f64> = (0..50).map(|k| -20.0 + k as f64 * (40.0 / 49.0)).collect();
        for (i, e) in aligned.iter().enumerate() {
            let m_star = reference_report(e, &budget);
            for &s in &others_sums {
                let mut grid = ReportGrid::covering(e, s, &budget);
                grid.step = 0.01;
                let best = best_response_oracle(e, s, &budget, &grid).unwrap();
                let eu_best = expected_utility_against_sum(e, best, s, &budget);
                let eu_star = expected_utility_against_sum(e, m_star, s, &budget);
                ensure(
                    eu_best <= eu_star + 1e-6,
                    format!(
                        "expert {i} at others_sum {s}: grid report {best} beats \
                         reference {m_star} by {}",
                        eu_best - eu_star
                    ),
                )?;
            }
        }
        let elapsed = start.elapsed();
        ensure(
            elapsed < Duration::from_secs(60),
            format!("oracle sweep took {elapsed:?}, limit 60 s"),
        )
    });
}

#[test]
fn ac6_safe_deviation_at_scale() {
    criterion("AC6 safe deviation over 10^5 sampled triples", || {
        let spec = DistributionSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(777);
        let mut flips_down = 0u64;
        for t in 0..100_000u64 {
            let e = sample_profile(&spec, 1, t).unwrap().experts()[0];
            let n_others = rng.gen_range(1..=8);
            let others: MessageProfile =
                (0..n_others).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let share = rng.gen_range(0.0..20.0);
            let budget = BudgetConfig::new(share * (n_others + 1) as f64, n_others + 1).unwrap();
            let m_prime = if rng.gen_bool(0.8) {
                -others.total() + rng.gen_range(-10.0..10.0)
            } else {
                rng.gen_range(-40.0..40.0)
            };
            if let DeviationVerdict::FlipTowardLowerBelief { delta_eu } =
                check_safe_deviation(&e, &others, m_prime, &budget)
            {
                flips_down += 1;
                ensure(
                    delta_eu <= TOL,
                    format!("triple {t}: lower-belief flip gained {delta_eu}"),
                )?;
            }
        }
        // Sanity: the sampler must actually exercise the interesting region.
        ensure(
            flips_down > 1_000,
            format!("only {flips_down} lower-belief flips sampled"),
        )
    });
}

#[test]
fn ac7_baseline_counterexamples() {
    criterion("AC7 baseline accountability counterexamples", || {
        for kind in BaselineKind::ALL {
            let w = accountability_witness(kind);
            ensure(
                !w.requirement_met,
                format!("{kind} unexpectedly satisfied weak accountability"),
            )?;
            ensure(
                weak_accountability_violation(&w.result.totals(), &w.result.pivotal_flags, w.delta)
                    .is_some(),
                format!("{kind} witness shows no violating pair"),
            )?;
            ensure(
                main_mechanism_accountable(&w),
                format!("main mechanism failed on the {kind} population"),
            )?;
        }

        // The exact numeric gaps.
        let qv = accountability_witness(BaselineKind::QuadraticVote);
        ensure(
            close(qv.total_pivotal, -1.0) && close(qv.total_nonpivotal, -9.0),
            format!("QV gap ({}, {})", qv.total_pivotal, qv.total_nonpivotal),
        )?;
        let mv = accountability_witness(BaselineKind::MajorityVote);
        ensure(
            close(mv.total_pivotal, 0.0) && close(mv.total_nonpivotal, 0.0),
            "MV totals should both be zero",
        )?;
        let vcg = accountability_witness(BaselineKind::PivotalVcg);
        ensure(
            close(vcg.total_pivotal, -9.0) && close(vcg.total_nonpivotal, 0.0),
            format!("VCG gap ({}, {})", vcg.total_pivotal, vcg.total_nonpivotal),
        )?;
        let dsr = accountability_witness(BaselineKind::DecisionScoringRule);
        ensure(
            close(dsr.total_pivotal, 0.19) && close(dsr.total_nonpivotal, 0.19),
            format!("DSR totals ({}, {})", dsr.total_pivotal, dsr.total_nonpivotal),
        )?;
        let dm = accountability_witness(BaselineKind::DecisionMarket);
        ensure(
            close(dm.total_pivotal, -0.8) && close(dm.total_nonpivotal, -0.8),
            format!("DM totals ({}, {})", dm.total_pivotal, dm.total_nonpivotal),
        )
    });
}

#[test]
fn ac8_linear_scaling() {
    criterion("AC8 mechanism scaling (10^5 vs 10^4 messages)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let small: MessageProfile = (0..10_000).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let large: MessageProfile = (0..100_000).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let small_budget = BudgetConfig::new(100.0, small.len()).unwrap();
        let large_budget = BudgetConfig::new(100.0, large.len()).unwrap();

        let t_small = best_of(9, || {
            run_mechanism(&small, &small_budget, Outcome::Negative).unwrap()
        });
        let t_large = best_of(9, || {
            run_mechanism(&large, &large_budget, Outcome::Negative).unwrap()
        });
        let ratio = t_large.as_secs_f64() / t_small.as_secs_f64();
        ensure(
            ratio <= 20.0,
            format!("10x input cost {ratio:.1}x time ({t_small:?} -> {t_large:?})"),
        )
    });
}

#[test]
fn ac9_convergence_lowers_the_threshold() {
    criterion("AC9 belief convergence lowers the mean threshold", || {
        let independent = DistributionSpec::default();
        let convergent = DistributionSpec::with_kappa(0.9);
        let trials = 10_000u64;
        let mut means = [0.0f64; 2];
        for (slot, spec) in [(0, &independent), (1, &convergent)] {
            let mut sum = 0.0;
            for seed_stream in 0..trials {
                // Matched seeds: stream k sees identical raw draws under
                // both specs; only the kappa mixing differs.
                let profile = sample_profiles_stream(spec, 5, seed_stream);
                let d = decompose(&profile, &BudgetConfig { c: 0.0, n: 5 });
                ensure(d.threshold.is_finite(), "unexpected infinite threshold")?;
                sum += d.threshold;
                // Spot-check the plane export stays consistent with the
                // decomposition route.
                if seed_stream % 2_500 == 0 {
                    let (n_coord, b_coord) = plane_point(&profile);
                    ensure(
                        n_coord == d.noise && b_coord == d.belief_signal,
                        "plane point disagrees with decomposition",
                    )?;
                }
            }
            means[slot] = sum / trials as f64;
        }
        ensure(
            means[1] < means[0],
            format!(
                "mean threshold at kappa 0.9 ({}) not below kappa 0 ({})",
                means[1], means[0]
            ),
        )
    });
}

fn sample_profiles_stream(spec: &DistributionSpec, n: usize, stream: u64) -> TypeProfile {
    // sample_profile seeds stream 0; vary the seed instead to get matched
    // per-trial draws across the two specs.
    sample_profile(spec, n, stream).unwrap()
}

#[test]
fn acceptance_threshold_tie_goes_to_a_exactly() {
    // Boundary tightness on the dyadic worked profile: at share = threshold
    // the aggregate cancels exactly and the tie-break picks A.
    criterion("AC2b threshold boundary exactness", || {
        let profile = worked_profile();
        let boundary = BudgetConfig::new(18.0, 3).unwrap();
        let total = reference_profile(&profile, &boundary).total();
        ensure(total == 0.0, format!("aggregate at the boundary is {total}"))?;
        let cls = classify(&profile, &boundary);
        ensure(
            cls.mechanism_choice == Allocation::A
                && cls.designer_choice == DesignerChoice::Alternative(Allocation::B),
            "tie should break toward A against a B-leaning designer",
        )
    });
}
