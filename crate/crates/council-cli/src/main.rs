//! `council`: scenario walkthroughs, property verification, budget sweeps,
//! baseline counterexamples, and classification-plane export.
//!
//! Exit codes are CI-friendly: 0 on success, 1 when a property or
//! validation check fails, 2 on usage or schema errors.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand};

use council::aggregation::{boundary_slope, plane_row, write_plane_csv, PlaneRow};
use council::baselines::{accountability_witness, main_mechanism_accountable, BaselineKind};
use council::simulation::{
    run_property_suite, run_scenario, sample_profiles, sweep_budget, sweep_profiles,
    DeltaRequest, DistributionSpec, PropertyReport, RunError, ScenarioRun, SuiteMutation,
};
use council::types::{BudgetConfig, Outcome, Scenario, ValidationError};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "council",
    version,
    about = "Outcome-accountable council decisions: run scenarios, verify properties, sweep budgets"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run one scenario end to end and print the full walkthrough.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Realized outcome: +1, -1, or "resolve" to use the scenario's
        /// outcome model. Omit to follow the scenario (or show both).
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<String>,
        /// Override the scenario's total budget c.
        #[arg(long)]
        budget: Option<f64>,
        /// Seed for sampled outcome resolution.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Run the randomized property suite; exit 0 only if every property holds.
    Verify {
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        /// Council sizes to sample, inclusive (e.g. 1..12).
        #[arg(long, default_value = "1..12", value_parser = parse_range)]
        n_range: (usize, usize),
        /// Distribution spec JSON file (defaults to the built-in families).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Deliberately corrupt one rule to prove the harness notices
        /// (harness self-check; forces exit 1).
        #[arg(long, value_parser = parse_mutation)]
        mutate: Option<SuiteMutation>,
        #[arg(long)]
        json: bool,
    },
    /// Misclassification rates across a budget grid.
    Sweep {
        /// Sweep this fixed scenario's profile instead of sampling.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Distribution spec JSON file for sampled sweeps.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Total budgets c, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        budgets: Vec<f64>,
        /// Experts per sampled profile.
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 1_000)]
        trials: u64,
        /// Seed; required unless --scenario pins the profile.
        #[arg(long)]
        seed: Option<u64>,
        /// Write per-budget rows as CSV to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Demonstrate the accountability counterexamples for the five baseline
    /// rules and re-check the main mechanism on the same populations.
    Baselines {
        /// Baseline ids (MV, QV, VCG, DSR, DM); all five when omitted.
        names: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Sample profiles and export their classification-plane coordinates.
    Plane {
        /// Distribution spec JSON file (defaults to the built-in families).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000)]
        samples: u64,
        #[arg(long)]
        seed: u64,
        /// Total budget c used for the mechanism/designer comparison.
        #[arg(long)]
        budget: f64,
        /// Experts per sampled profile.
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected lo..hi (inclusive), got {s:?}"))?;
    let lo: usize = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("range {lo}..{hi} is empty or starts at zero"));
    }
    Ok((lo, hi))
}

fn parse_mutation(s: &str) -> Result<SuiteMutation, String> {
    match s {
        "reward-sign-flip" => Ok(SuiteMutation::RewardSignFlip),
        other => Err(format!("unknown mutation {other:?}; try reward-sign-flip")),
    }
}

/// A command error carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_USAGE,
            error,
        }
    }

    fn check(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_FAILURE,
            error,
        }
    }
}

trait UsageContext<T> {
    fn or_usage(self, what: &str) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> UsageContext<T> for Result<T, E> {
    fn or_usage(self, what: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure::usage(e.into().context(what.to_string())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}

fn dispatch(command: Commands) -> Result<u8, Failure> {
    match command {
        Commands::Run {
            scenario,
            delta,
            budget,
            seed,
            out,
            json,
        } => cmd_run(&scenario, delta.as_deref(), budget, seed, out.as_deref(), json),
        Commands::Verify {
            trials,
            seed,
            n_range,
            spec,
            mutate,
            json,
        } => cmd_verify(trials, seed, n_range, spec.as_deref(), mutate, json),
        Commands::Sweep {
            scenario,
            spec,
            budgets,
            n,
            trials,
            seed,
            csv,
            json,
        } => cmd_sweep(
            scenario.as_deref(),
            spec.as_deref(),
            &budgets,
            n,
            trials,
            seed,
            csv.as_deref(),
            json,
        ),
        Commands::Baselines { names, json } => cmd_baselines(&names, json),
        Commands::Plane {
            spec,
            samples,
            seed,
            budget,
            n,
            csv,
        } => cmd_plane(spec.as_deref(), samples, seed, budget, n, csv.as_deref()),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).or_usage(&format!("reading {}", path.display()))?;
    let scenario: Scenario =
        serde_json::from_str(&text).or_usage(&format!("parsing {}", path.display()))?;
    if scenario.experts.is_empty() {
        return Err(Failure::usage(anyhow!(
            "{}: the experts list is empty",
            path.display()
        )));
    }
    Ok(scenario)
}

fn load_spec(path: Option<&Path>) -> Result<DistributionSpec, Failure> {
    match path {
        None => Ok(DistributionSpec::default()),
        Some(p) => {
            let text = fs::read_to_string(p).or_usage(&format!("reading {}", p.display()))?;
            serde_json::from_str(&text).or_usage(&format!("parsing {}", p.display()))
        }
    }
}

/// Formats a float with nine significant digits, then trims trailing
/// zeros via the shortest round-trip of the rounded value. Keeps table
/// output diff-stable.
fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float");
    format!("{rounded}")
}

fn sig9_vec(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| sig9(*v)).collect();
    format!("[{}]", parts.join(", "))
}

fn cmd_run(
    path: &Path,
    delta: Option<&str>,
    budget_override: Option<f64>,
    seed: Option<u64>,
    out: Option<&Path>,
    json: bool,
) -> Result<u8, Failure> {
    let mut scenario = load_scenario(path)?;
    if let Some(c) = budget_override {
        scenario.budget_c = c;
    }
    let request = match delta {
        None => DeltaRequest::Auto,
        Some("resolve") => DeltaRequest::Resolve,
        Some(raw) => {
            let value: i64 = raw
                .parse()
                .map_err(|_| Failure::usage(anyhow!("--delta must be +1, -1, or resolve")))?;
            let outcome = Outcome::from_delta(value)
                .ok_or_else(|| Failure::usage(anyhow!("--delta must be +1, -1, or resolve")))?;
            DeltaRequest::Use(outcome)
        }
    };

    let run = run_scenario(scenario, request, seed).map_err(|e| match e {
        RunError::Validation(v) => Failure::check(anyhow::Error::new(v).context("validation")),
        RunError::Mechanism(m) => Failure::check(anyhow::Error::new(m)),
        RunError::SeedRequired | RunError::ExternalOutcome => Failure::usage(e.into()),
    })?;

    let report = serde_json::to_string_pretty(&run).expect("report serializes");
    if let Some(out_path) = out {
        fs::write(out_path, &report).or_usage(&format!("writing {}", out_path.display()))?;
    }
    if json {
        println!("{report}");
    } else {
        print_run(&run);
    }
    Ok(0)
}

fn print_run(run: &ScenarioRun) {
    let n = run.scenario.experts.len();
    println!(
        "scenario: {} experts, budget c = {} (share c/n = {})",
        n,
        sig9(run.scenario.budget_c),
        sig9(run.share)
    );
    println!("#  theta_a      theta_b      p_a    p_b    alignment    weight       report");
    for (i, e) in run.scenario.experts.iter().enumerate() {
        let alignment = serde_json::to_value(run.alignments[i]).expect("plain enum");
        println!(
            "{:<2} {:<12} {:<12} {:<6} {:<6} {:<12} {:<12} {}",
            i + 1,
            sig9(e.theta_a),
            sig9(e.theta_b),
            sig9(e.p_a),
            sig9(e.p_b),
            alignment.as_str().expect("string enum"),
            sig9(run.decomposition.weights[i]),
            sig9(run.reports.get(i).expect("aligned lengths"))
        );
    }
    println!(
        "aggregate report: {} -> allocation {}",
        sig9(run.aggregate_report),
        run.allocation
    );
    println!(
        "decomposition: noise N = {}, belief signal B = {}, threshold c/n = {}, designer choice {}",
        sig9(run.decomposition.noise),
        sig9(run.decomposition.belief_signal),
        sig9(run.decomposition.threshold),
        run.decomposition.designer_choice
    );
    match run.classification.correct {
        Some(true) => println!(
            "classification: mechanism {} vs designer {} -> correct",
            run.classification.mechanism_choice, run.classification.designer_choice
        ),
        Some(false) => println!(
            "classification: mechanism {} vs designer {} -> MISCLASSIFIED (share {} <= threshold {})",
            run.classification.mechanism_choice,
            run.classification.designer_choice,
            sig9(run.share),
            sig9(run.decomposition.threshold)
        ),
        None => println!("classification: designer is indifferent (zero belief signal)"),
    }
    println!(
        "transfers: {}   pivotal: {:?}",
        sig9_vec(&run.outcomes.positive.transfers),
        run.outcomes.positive.pivotal_flags
    );
    println!(
        "payoffs if delta = +1: {}   (rewards {})",
        sig9_vec(&run.outcomes.positive.payoffs),
        sig9_vec(&run.outcomes.positive.rewards)
    );
    println!(
        "payoffs if delta = -1: {}   (rewards {})",
        sig9_vec(&run.outcomes.negative.payoffs),
        sig9_vec(&run.outcomes.negative.rewards)
    );
    if let Some(realized) = &run.realized {
        let table = match realized.delta {
            Outcome::Positive => &run.outcomes.positive,
            Outcome::Negative => &run.outcomes.negative,
        };
        let mut line = format!(
            "realized delta = {} ({}) -> payoffs {}",
            realized.delta,
            realized.resolution,
            sig9_vec(&table.payoffs)
        );
        if let Some(q) = realized.success_probability {
            line.push_str(&format!("   [success probability {}]", sig9(q)));
        }
        println!("{line}");
    }
    for note in &run.notes {
        println!("note: {note}");
    }
}

fn cmd_verify(
    trials: u64,
    seed: u64,
    (n_min, n_max): (usize, usize),
    spec: Option<&Path>,
    mutate: Option<SuiteMutation>,
    json: bool,
) -> Result<u8, Failure> {
    let spec = load_spec(spec)?;
    let mutation = mutate.unwrap_or(SuiteMutation::None);
    let report = run_property_suite(&spec, n_min..=n_max, trials, seed, mutation)
        .or_usage("running the property suite")?;

    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report"));
    } else {
        print_verify(&report);
    }
    if report.all_passed {
        Ok(0)
    } else {
        let first = report
            .properties
            .iter()
            .find_map(|p| p.first_failure.as_ref());
        if let Some(witness) = first {
            eprintln!("{}", serde_json::to_string(witness).expect("witness"));
        }
        Err(Failure::check(anyhow!(
            "{} of {} properties violated",
            report.properties.iter().filter(|p| p.violations > 0).count(),
            report.properties.len()
        )))
    }
}

fn print_verify(report: &PropertyReport) {
    println!(
        "property suite: {} trials, n in {}..{}, seed {}",
        report.trials, report.n_min, report.n_max, report.seed
    );
    for p in &report.properties {
        let status = if p.violations == 0 { "ok" } else { "FAIL" };
        println!(
            "{:<28} checked {:>7}   violations {:>5}   {}",
            p.name, p.checked, p.violations, status
        );
    }
    for note in &report.notes {
        println!("note: {note}");
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    scenario: Option<&Path>,
    spec: Option<&Path>,
    budgets: &[f64],
    n: usize,
    trials: u64,
    seed: Option<u64>,
    csv: Option<&Path>,
    json: bool,
) -> Result<u8, Failure> {
    let (report, n_for_share) = match scenario {
        Some(path) => {
            let scenario = load_scenario(path)?;
            let scenario = scenario
                .validated()
                .map_err(|e| Failure::check(anyhow::Error::new(e).context("validation")))?;
            let n = scenario.experts.len();
            let report =
                sweep_profiles(&[scenario.experts], budgets).or_usage("sweeping the profile")?;
            (report, n)
        }
        None => {
            let seed = seed.ok_or_else(|| {
                Failure::usage(anyhow!("--seed is required for sampled sweeps"))
            })?;
            let spec = load_spec(spec)?;
            let report = sweep_budget(&spec, n, budgets, trials, seed)
                .or_usage("running the budget sweep")?;
            (report, n)
        }
    };

    if let Some(path) = csv {
        let mut file = fs::File::create(path).or_usage(&format!("creating {}", path.display()))?;
        council::simulation::write_sweep_csv(&mut file, &report, n_for_share)
            .or_usage("writing CSV")?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report"));
    } else {
        println!("budget_c      share        misclassification");
        for (c, rate) in report.budgets.iter().zip(&report.misclassification) {
            println!(
                "{:<13} {:<12} {}",
                sig9(*c),
                sig9(c / n_for_share as f64),
                sig9(*rate)
            );
        }
        println!(
            "profiles {} (ties excluded: {}), zero-threshold fraction {}, mean conflict threshold {}",
            report.profiles,
            report.ties,
            sig9(report.zero_threshold_fraction),
            report
                .mean_threshold_conflict
                .map(sig9)
                .unwrap_or_else(|| "n/a".to_string())
        );
        for note in &report.notes {
            println!("note: {note}");
        }
    }
    Ok(0)
}

fn cmd_baselines(names: &[String], json: bool) -> Result<u8, Failure> {
    let kinds: Vec<BaselineKind> = if names.is_empty() {
        BaselineKind::ALL.to_vec()
    } else {
        names
            .iter()
            .map(|s| s.parse::<BaselineKind>())
            .collect::<Result<_, _>>()
            .or_usage("parsing baseline names")?
    };

    let mut all_demonstrated = true;
    let mut rows = Vec::new();
    for kind in kinds {
        let witness = accountability_witness(kind);
        let main_ok = main_mechanism_accountable(&witness);
        all_demonstrated &= !witness.requirement_met && main_ok;
        rows.push((witness, main_ok));
    }

    if json {
        let value: Vec<serde_json::Value> = rows
            .iter()
            .map(|(w, main_ok)| {
                let mut v = serde_json::to_value(w).expect("witness serializes");
                v["main_mechanism_accountable"] = serde_json::json!(main_ok);
                v
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&value).expect("rows"));
    } else {
        println!(
            "{:<5} {:<6} {:<14} {:<18} {:<44} {:<10} main mechanism",
            "id", "delta", "pivotal total", "non-pivotal total", "required", "violated"
        );
        for (w, main_ok) in &rows {
            println!(
                "{:<5} {:<6} {:<14} {:<18} {:<44} {:<10} {}",
                w.kind.id(),
                w.delta.to_string(),
                sig9(w.total_pivotal),
                sig9(w.total_nonpivotal),
                w.requirement,
                if w.requirement_met { "no" } else { "yes" },
                if *main_ok { "accountable" } else { "VIOLATED" }
            );
        }
    }

    if all_demonstrated {
        Ok(0)
    } else {
        Err(Failure::check(anyhow!(
            "a baseline unexpectedly satisfied weak accountability, or the main mechanism failed"
        )))
    }
}

fn cmd_plane(
    spec: Option<&Path>,
    samples: u64,
    seed: u64,
    budget_c: f64,
    n: usize,
    csv: Option<&Path>,
) -> Result<u8, Failure> {
    let spec = load_spec(spec)?;
    let profiles = sample_profiles(&spec, n, samples, seed).or_usage("sampling profiles")?;
    let budget = BudgetConfig::new(budget_c, n)
        .map_err(|e: ValidationError| Failure::usage(e.into()))?;
    let rows: Vec<PlaneRow> = profiles.iter().map(|p| plane_row(p, &budget)).collect();

    let slope_line = format!(
        "decision boundary N + (c/n) B = 0: slope dB/dN = -n/c = {}",
        sig9(boundary_slope(&budget))
    );
    match csv {
        Some(path) => {
            let mut file =
                fs::File::create(path).or_usage(&format!("creating {}", path.display()))?;
            write_plane_csv(&mut file, &rows).or_usage("writing CSV")?;
            println!("wrote {} rows to {}", rows.len(), path.display());
            println!("{slope_line}");
        }
        None => {
            // Keep stdout pure CSV; metadata goes to stderr.
            let mut stdout = std::io::stdout().lock();
            write_plane_csv(&mut stdout, &rows).or_usage("writing CSV")?;
            stdout.flush().ok();
            eprintln!("{slope_line}");
        }
    }
    Ok(0)
}
