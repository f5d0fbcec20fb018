//! Experiment runners: one function per experiment kind, each returning a
//! deterministic set of output files.

use std::collections::BTreeSet;

use famlab_core::boolalg::Element;
use famlab_core::cylinder::DyadicAlgebra;
use famlab_core::famlimit::{
    self, build_tree, grid_refine, LimitError, SearchMode, SearchOutcome, TreeParams,
};
use famlab_core::intnum::{self, IntersectionQuery};
use famlab_core::rat;

use crate::certificate::CertificateFile;
use crate::config::{
    parse_rat, parse_rats, BuiltInstance, ConfigError, ExperimentSpec, InstanceSpec, ModeSpec,
    ParamsSpec,
};
use crate::report::{check_row, Csv};

/// Failures ranked by exit code: parse = 2, missing input = 3, exhausted
/// search budget = 4, anything else = 1.
#[derive(Debug)]
pub enum RunError {
    Parse(String),
    MissingInput(String),
    Budget(String),
    Internal(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Parse(m) => write!(f, "parse error: {m}"),
            RunError::MissingInput(m) => write!(f, "missing input: {m}"),
            RunError::Budget(m) => write!(f, "budget exhausted: {m}"),
            RunError::Internal(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Parse(_) => 2,
            RunError::MissingInput(_) => 3,
            RunError::Budget(_) => 4,
            RunError::Internal(_) => 1,
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Parse(m) => RunError::Parse(m),
            ConfigError::Semantic(m) => RunError::Internal(m),
        }
    }
}

fn internal(e: impl std::fmt::Display) -> RunError {
    RunError::Internal(e.to_string())
}

/// Command-line overrides applied on top of the spec file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget: Option<u64>,
    pub threads: Option<usize>,
}

/// Everything a run produces: named files plus a one-line summary.
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub summary: String,
}

pub fn run(spec: &ExperimentSpec, overrides: &Overrides) -> Result<RunOutput, RunError> {
    match spec {
        ExperimentSpec::DensitySweep { depth, eps } => density_sweep(*depth, eps),
        ExperimentSpec::IntnumSandwich {
            algebra,
            delta,
            elements,
            max_len,
            budget,
        } => intnum_sandwich(
            algebra,
            delta.as_deref(),
            elements.as_deref(),
            *max_len,
            overrides.budget.or(*budget),
        ),
        ExperimentSpec::TreeAudit { instance, params } => tree_audit(instance, params),
        ExperimentSpec::FamLimitRun {
            instance,
            params,
            mode,
        } => fam_limit_run(instance, params, mode, overrides),
        ExperimentSpec::VerifyCertificate { certificate } => {
            let text = std::fs::read_to_string(certificate)
                .map_err(|e| RunError::MissingInput(format!("{certificate}: {e}")))?;
            let file = CertificateFile::from_json(&text)?;
            verify_certificate_file(&file)
        }
    }
}

fn density_sweep(depth: usize, eps: &[String]) -> Result<RunOutput, RunError> {
    if depth == 0 || depth > 4 {
        return Err(RunError::Internal(format!(
            "density sweep supports depth 1..=4, got {depth}"
        )));
    }
    let coords: Vec<u64> = (0..depth as u64).collect();
    let algebra = DyadicAlgebra::new(&coords).map_err(internal)?;
    let eps = parse_rats(eps).map_err(RunError::from)?;
    let space = algebra.space();
    let n = space.size();
    let mut csv = Csv::new(&["element_atoms", "eps", "cylinder", "relative_measure", "target"]);
    for mask in 1u64..(1u64 << n) {
        let atoms: Vec<usize> = (0..n).filter(|a| mask & (1 << a) != 0).collect();
        let b = Element::from_atoms(space, &atoms).map_err(internal)?;
        for e in &eps {
            let cyl = algebra.density_search(&b, e).map_err(internal)?;
            let s = algebra.embed_cylinder(&cyl).map_err(internal)?;
            let rel = algebra.leb(&b.meet(&s).map_err(internal)?) / algebra.leb(&s);
            let fixed: Vec<String> = cyl
                .fixed()
                .iter()
                .map(|(c, bit)| format!("{c}={}", u8::from(*bit)))
                .collect();
            csv.row(&[
                format!("{atoms:?}"),
                rat::format(e),
                fixed.join(";"),
                rat::format(&rel),
                rat::format(&(rat::one() - e)),
            ]);
        }
    }
    let rows = ((1u64 << n) - 1) * eps.len() as u64;
    Ok(RunOutput {
        files: vec![("density.csv".into(), csv.finish())],
        summary: format!("density sweep: {rows} rows, all at or above target"),
    })
}

fn intnum_sandwich(
    algebra: &crate::config::AlgebraSpec,
    delta: Option<&str>,
    elements: Option<&[Vec<usize>]>,
    max_len: usize,
    budget: Option<u64>,
) -> Result<RunOutput, RunError> {
    let algebra = algebra.build().map_err(RunError::from)?;
    let space = algebra.space();
    let q: Vec<Element> = match (delta, elements) {
        (Some(d), None) => {
            let d = parse_rat(d).map_err(RunError::from)?;
            intnum::threshold_set(&algebra, &d)
        }
        (None, Some(els)) => els
            .iter()
            .map(|atoms| Element::from_atoms(space, atoms).map_err(internal))
            .collect::<Result<_, _>>()?,
        _ => {
            return Err(RunError::Parse(
                "exactly one of delta / elements required".into(),
            ))
        }
    };
    let query = IntersectionQuery::new(q, max_len).map_err(internal)?;
    let result = intnum::sandwich(&query, budget).map_err(internal)?;
    let mut csv = Csv::new(&["check", "lhs", "relation", "rhs", "verdict"]);
    csv.row(&check_row(
        "kelley_lower <= int_upper",
        &result.lower.value,
        "<=",
        &result.upper.value,
        result.lower.value <= result.upper.value,
    ));
    let witness: Vec<Vec<usize>> = result
        .upper
        .witness
        .iter()
        .map(|e| e.atoms().collect())
        .collect();
    let body = serde_json::json!({
        "lower": rat::format(&result.lower.value),
        "upper": rat::format(&result.upper.value),
        "partial": result.upper.partial,
        "sequences_examined": result.upper.sequences_examined,
        "witness": witness,
    });
    let mut json = serde_json::to_string_pretty(&body).expect("serializable");
    json.push('\n');
    let summary = format!(
        "intersection number in [{}, {}]{}",
        rat::format(&result.lower.value),
        rat::format(&result.upper.value),
        if result.upper.partial { " (upper partial)" } else { "" },
    );
    Ok(RunOutput {
        files: vec![
            ("sandwich.json".into(), json),
            ("report.csv".into(), csv.finish()),
        ],
        summary,
    })
}

fn tree_audit(instance: &InstanceSpec, params: &ParamsSpec) -> Result<RunOutput, RunError> {
    let built = instance.build().map_err(RunError::from)?;
    let params = params.build(&built).map_err(RunError::from)?;
    if params.h_star > 8 {
        return Err(RunError::Internal(format!(
            "tree audit materializes every level; height {} is too large",
            params.h_star
        )));
    }
    let quarter = &params.eps_star / rat::int(4);
    let grid = grid_refine(&built.ctx, &built.root, &quarter).map_err(internal)?;
    let mut wt = build_tree(&built.ctx, &grid, built.forbidden.clone(), params.clone())
        .map_err(internal)?;
    wt.materialize_full().map_err(internal)?;
    let tree = wt.tree();
    let h = params.h_star as usize;
    let mut csv = Csv::new(&["check", "lhs", "relation", "rhs", "verdict"]);
    for level in 0..=h {
        let total = tree.level_measure(level, |_, _| true).map_err(internal)?;
        csv.row(&check_row(
            &format!("level {level} probability"),
            &total,
            "==",
            &rat::one(),
            total == rat::one(),
        ));
    }
    // tower identity for the final index count of each block
    for m in 0..built.ctx.partition().blocks().len() {
        for cond in (0..h).step_by(2) {
            let (direct, towered) = tree
                .tower_check(cond, h, |_, data| {
                    let hits = data
                        .k_hist
                        .iter()
                        .filter(|&&k| built.ctx.partition().blocks()[m].contains(k))
                        .count();
                    rat::int(hits as i64)
                })
                .map_err(internal)?;
            csv.row(&check_row(
                &format!("tower block {m} at level {cond}"),
                &direct,
                "==",
                &towered,
                direct == towered,
            ));
        }
    }
    // Chebyshev audit of each block count at tolerance h·ε/2
    let masses = built.ctx.partition().block_masses(built.ctx.fam());
    for (m, _) in masses.iter().enumerate() {
        let t = rat::int(h as i64) * &built.eps / rat::int(2);
        let report = tree
            .chebyshev_audit(
                h,
                |_, data| {
                    let hits = data
                        .k_hist
                        .iter()
                        .filter(|&&k| built.ctx.partition().blocks()[m].contains(k))
                        .count();
                    rat::int(hits as i64)
                },
                &t,
            )
            .map_err(internal)?;
        csv.row(&check_row(
            &format!("chebyshev block {m} tail"),
            &report.tail_probability,
            "<=",
            &report.bound,
            report.holds(),
        ));
    }
    Ok(RunOutput {
        files: vec![("audit.csv".into(), csv.finish())],
        summary: format!("tree audit: height {h}, all identities exact"),
    })
}

/// Runs the sampled search across `threads` workers with consecutive
/// seeds and an even budget split; the lowest-seed success wins, so the
/// outcome is independent of scheduling.
fn sampled_search_parallel(
    built: &BuiltInstance,
    grid: &famlab_core::famlimit::GridResult,
    params: &TreeParams,
    seed: u64,
    budget: u64,
    threads: usize,
) -> Result<SearchOutcome, RunError> {
    let threads = threads.max(1).min(budget.max(1) as usize);
    let share = budget.div_ceil(threads as u64);
    let results: Vec<Result<SearchOutcome, LimitError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let params = params.clone();
                let forbidden = built.forbidden.clone();
                scope.spawn(move || {
                    let mut wt = build_tree(&built.ctx, grid, forbidden, params)?;
                    wt.witness_search(SearchMode::Sampled {
                        seed: seed + w as u64,
                        budget: share,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("no panics")).collect()
    });
    let mut exhausted_paths = 0u64;
    for r in results {
        match r {
            Ok(outcome) => return Ok(outcome),
            Err(LimitError::BudgetExhausted { paths, .. }) => exhausted_paths += paths,
            Err(e) => return Err(internal(e)),
        }
    }
    Err(RunError::Budget(format!(
        "no witness in {exhausted_paths} sampled paths"
    )))
}

fn fam_limit_run(
    instance: &InstanceSpec,
    params: &ParamsSpec,
    mode: &ModeSpec,
    overrides: &Overrides,
) -> Result<RunOutput, RunError> {
    let built = instance.build().map_err(RunError::from)?;
    let params = params.build(&built).map_err(RunError::from)?;
    let quarter = &params.eps_star / rat::int(4);
    let grid = grid_refine(&built.ctx, &built.root, &quarter).map_err(internal)?;
    let outcome = match mode {
        ModeSpec::Exhaustive => {
            let mut wt =
                build_tree(&built.ctx, &grid, built.forbidden.clone(), params.clone())
                    .map_err(internal)?;
            wt.witness_search(SearchMode::Exhaustive).map_err(internal)?
        }
        ModeSpec::Sampled { seed, budget } => {
            let seed = overrides.seed.unwrap_or(*seed);
            let budget = overrides.budget.unwrap_or(*budget);
            sampled_search_parallel(
                &built,
                &grid,
                &params,
                seed,
                budget,
                overrides.threads.unwrap_or(1),
            )?
        }
    };
    let cert = &outcome.certificate;
    if !famlimit::verify_certificate(&built.ctx, cert).map_err(internal)? {
        return Err(RunError::Internal(
            "certificate failed exact re-verification".into(),
        ));
    }
    let file = CertificateFile::from_parts(instance, cert);
    let mut csv = Csv::new(&["check", "lhs", "relation", "rhs", "verdict"]);
    for (m, dev) in cert.block_deviations.iter().enumerate() {
        csv.row(&check_row(
            &format!("block {m} deviation"),
            dev,
            "<",
            &cert.eps,
            dev < &cert.eps,
        ));
    }
    for (i, avg) in cert.success_averages.iter().enumerate() {
        let floor = &cert.deltas[i] - &cert.eps;
        csv.row(&check_row(
            &format!("sequence {i} average"),
            avg,
            ">",
            &floor,
            avg > &floor,
        ));
    }
    if let Some(pr) = &outcome.event_probability {
        csv.row(&check_row(
            "event probability",
            pr,
            ">",
            &rat::zero(),
            pr > &rat::zero(),
        ));
    }
    let summary = format!(
        "witness found after {} paths; |u| = {}",
        outcome.paths_tried,
        cert.u.len()
    );
    Ok(RunOutput {
        files: vec![
            ("certificate.json".into(), file.to_json()),
            ("report.csv".into(), csv.finish()),
        ],
        summary,
    })
}

pub fn verify_certificate_file(file: &CertificateFile) -> Result<RunOutput, RunError> {
    let built = file.instance.build().map_err(RunError::from)?;
    let cert = file.to_core(&built).map_err(RunError::from)?;
    let mut csv = Csv::new(&["check", "lhs", "relation", "rhs", "verdict"]);
    let total = rat::int(cert.u.len() as i64);
    let mut all = !cert.u.is_empty() && !cert.r_plus.is_zero();
    let masses = built.ctx.partition().block_masses(built.ctx.fam());
    for (m, a) in masses.iter().enumerate() {
        let hits = cert
            .u
            .iter()
            .filter(|&&k| built.ctx.partition().blocks()[m].contains(k))
            .count();
        let dev = rat::abs(&(rat::int(hits as i64) / &total - a));
        let pass = dev < cert.eps && dev == cert.block_deviations[m];
        all &= pass;
        csv.row(&check_row(
            &format!("block {m} deviation"),
            &dev,
            "<",
            &cert.eps,
            pass,
        ));
    }
    for (i, seq) in built.ctx.sequences().iter().enumerate() {
        let mut sum = rat::zero();
        for &k in &cert.u {
            sum += built
                .ctx
                .success_fraction(seq, &cert.r_plus, k)
                .map_err(internal)?;
        }
        let avg = sum / &total;
        let floor = &cert.deltas[i] - &cert.eps;
        let pass = avg > floor && avg == cert.success_averages[i];
        all &= pass;
        csv.row(&check_row(
            &format!("sequence {i} average"),
            &avg,
            ">",
            &floor,
            pass,
        ));
    }
    // forbidden indices must not appear in u
    let clash: BTreeSet<u64> = cert
        .u
        .intersection(&built.forbidden)
        .copied()
        .collect();
    if !clash.is_empty() {
        all = false;
    }
    if !all {
        return Err(RunError::Internal("certificate verification failed".into()));
    }
    Ok(RunOutput {
        files: vec![("verify.csv".into(), csv.finish())],
        summary: "certificate verified: all checks pass".into(),
    })
}
