//! Acceptance gate: one check per shipped guarantee, each printing a
//! single pass/fail line. Run with `--nocapture` to see the lines; every
//! inequality behind them is an exact rational comparison.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use famlab_core::boolalg::Element;
use famlab_core::cylinder::DyadicAlgebra;
use famlab_core::fam::{IndexPartition, PeriodicFam};
use famlab_core::famlimit::{
    self, build_tree, fam_linked_witness, grid_refine, BlockFamily, ConditionSequence,
    LimitContext, SearchMode, TreeParams,
};
use famlab_core::rat::{self, Rat};

use famlab::config::ExperimentSpec;
use famlab::runner::{self, Overrides};
use famlab::suite;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn report(criterion: usize, name: &str, pass: bool, elapsed: Duration, budget: Duration) {
    let verdict = if pass && elapsed <= budget { "pass" } else { "fail" };
    println!(
        "criterion {criterion} ({name}): {verdict} [{:.2?} of {:.0?} budget]",
        elapsed, budget
    );
    assert!(pass, "criterion {criterion} ({name}) failed");
    assert!(
        elapsed <= budget,
        "criterion {criterion} ({name}) overran its time budget: {elapsed:.2?}"
    );
}

#[test]
fn criterion_1_atom_partitions() {
    let start = Instant::now();
    let outcome = suite::atoms_suite(500, 1);
    let pass = matches!(outcome, Ok(500));
    report(1, "atom partitions", pass, start.elapsed(), Duration::from_secs(5));
}

#[test]
fn criterion_2_integration_laws() {
    let start = Instant::now();
    let outcome = suite::integration_suite(200, 2);
    let pass = matches!(outcome, Ok(200));
    report(2, "integration laws", pass, start.elapsed(), Duration::from_secs(2));
}

#[test]
fn criterion_3_tree_calculus() {
    let start = Instant::now();
    let outcome = suite::trees_suite(100, 3);
    let pass = matches!(outcome, Ok(100));
    report(3, "probability-tree calculus", pass, start.elapsed(), Duration::from_secs(10));
}

#[test]
fn criterion_4_chebyshev_binomial() {
    let start = Instant::now();
    let outcome = suite::moments_suite(20, 4);
    let pass = matches!(outcome, Ok(20));
    report(4, "binomial moments and Chebyshev", pass, start.elapsed(), Duration::from_secs(2));
}

#[test]
fn criterion_5_kelley_sandwich() {
    let start = Instant::now();
    let outcome = suite::kelley_suite(50, 5);
    let pass = matches!(outcome, Ok(n) if n == 50);
    report(5, "Kelley sandwich", pass, start.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_6_limit_exhaustive() {
    let start = Instant::now();
    let outcome = suite::limits_suite(20, 6);
    let pass = matches!(outcome, Ok(20));
    report(6, "limit construction, exhaustive", pass, start.elapsed(), Duration::from_secs(30));
}

fn run_fixture(name: &str, overrides: &Overrides) -> runner::RunOutput {
    let text = std::fs::read_to_string(fixture(name)).expect("fixture exists");
    let spec = ExperimentSpec::from_json(&text).expect("fixture parses");
    runner::run(&spec, overrides).expect("fixture runs")
}

#[test]
fn criterion_7_witness_pipeline() {
    let start = Instant::now();
    // shipped sampled instance: budget 10^5 paths, exact certificate
    let sampled = run_fixture("fam_limit_run.json", &Overrides::default());
    let cert_ok = sampled
        .files
        .iter()
        .any(|(name, body)| name == "report.csv" && !body.contains("fail"));
    // tiny exhaustive companion: exact positive event probability
    let exhaustive = run_fixture("fam_limit_exhaustive.json", &Overrides::default());
    let pr_ok = exhaustive.files.iter().any(|(name, body)| {
        name == "report.csv"
            && body
                .lines()
                .any(|l| l.starts_with("event probability") && l.ends_with("pass"))
    });
    report(
        7,
        "witness search end to end",
        cert_ok && pr_ok,
        start.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_8_linked_family_assembly() {
    let start = Instant::now();
    let coords: Vec<u64> = (0..3).collect();
    let algebra = DyadicAlgebra::new(&coords).unwrap();
    let space = algebra.space();
    // S = every basic cylinder of the algebra, embedded as elements
    let family: Vec<Element> = algebra
        .all_cylinders()
        .iter()
        .map(|c| algebra.embed_cylinder(c).unwrap())
        .collect();
    let grid = [rat::frac(1, 2), rat::frac(1, 4), rat::frac(1, 8)];
    let witness = fam_linked_witness(algebra.backing(), &family, &grid).unwrap();
    let mut pass = !witness.entries.is_empty();
    for entry in &witness.entries {
        pass &= entry.kelley >= rat::one() - &entry.eps;
    }

    // a certificate produced against a Q_{s,eps} input must pass the
    // characterization checks
    let eps_q = rat::frac(1, 8);
    let s = Element::from_atoms(space, &[0, 1, 2, 3]).unwrap();
    let above_s = s.join(&Element::from_atoms(space, &[4]).unwrap()).unwrap();
    let blocks = BlockFamily::new(vec![1]).unwrap();
    let seq = ConditionSequence::new(vec![vec![s.clone()], vec![above_s]], &blocks).unwrap();
    let ctx = LimitContext::new(
        algebra.backing().clone(),
        PeriodicFam::uniform(2).unwrap(),
        IndexPartition::new(2, &[vec![0], vec![1]]).unwrap(),
        blocks,
        vec![seq],
        vec![rat::one() - &eps_q],
    )
    .unwrap();
    let params = TreeParams::empirical(&rat::frac(1, 4), 4, &rat::frac(1, 4)).unwrap();
    let quarter = &params.eps_star / rat::int(4);
    let refined = grid_refine(&ctx, &s, &quarter).unwrap();
    let mut wt = build_tree(&ctx, &refined, BTreeSet::new(), params).unwrap();
    let outcome = wt.witness_search(SearchMode::Exhaustive).unwrap();
    let reportable = famlimit::verify_characterization(
        &ctx,
        &outcome.certificate,
        &[eps_q],
        &rat::frac(1, 4),
    )
    .unwrap();
    pass &= reportable.all_pass();
    report(
        8,
        "linked-family assembly",
        pass,
        start.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_9_determinism() {
    let start = Instant::now();
    let first = run_fixture("fam_limit_run.json", &Overrides::default());
    let second = run_fixture("fam_limit_run.json", &Overrides::default());
    let cert = |out: &runner::RunOutput| -> String {
        out.files
            .iter()
            .find(|(n, _)| n == "certificate.json")
            .map(|(_, b)| b.clone())
            .expect("certificate emitted")
    };
    let pass = cert(&first) == cert(&second);
    report(9, "seeded determinism", pass, start.elapsed(), Duration::from_secs(300));
}

/// The exact event probability of the tiny exhaustive instance, frozen as
/// a regression oracle: a fair two-block pick at height two is balanced
/// with probability one under tolerance 3/4, so Pr(E) = 1.
#[test]
fn exhaustive_event_probability_oracle() {
    let text = std::fs::read_to_string(fixture("fam_limit_exhaustive.json")).unwrap();
    let ExperimentSpec::FamLimitRun { instance, params, .. } =
        ExperimentSpec::from_json(&text).unwrap()
    else {
        panic!("fixture kind changed");
    };
    let built = instance.build().unwrap();
    let params = params.build(&built).unwrap();
    let quarter = &params.eps_star / rat::int(4);
    let grid = grid_refine(&built.ctx, &built.root, &quarter).unwrap();
    let mut wt = build_tree(&built.ctx, &grid, built.forbidden.clone(), params).unwrap();
    let outcome = wt.witness_search(SearchMode::Exhaustive).unwrap();
    let pr: Rat = outcome.event_probability.unwrap();
    assert_eq!(pr, rat::one());
}
