//! Built-in randomized property suites with fixed seeds. Each suite runs
//! a batch of exact checks and reports the case count; any failure names
//! the offending case. The acceptance tests drive these directly.

use rand_core::{RngCore, SeedableRng};

use famlab_core::boolalg::{generated_atoms, AtomSpace, Element, MeasuredAlgebra};
use famlab_core::fam::{
    integrate, partition_decompose, IndexPartition, PeriodicFam, PeriodicSet,
    PeriodicSimpleFunction,
};
use famlab_core::famlimit::{limit_construct, BlockFamily, ConditionSequence, LimitContext};
use famlab_core::intnum::{self, IntersectionQuery};
use famlab_core::ptree::ProbTree;
use famlab_core::rat::{self, Rat};

type Rng = rand_chacha::ChaCha8Rng;

fn pick(rng: &mut Rng, bound: u64) -> u64 {
    rng.next_u64() % bound
}

fn random_weights(rng: &mut Rng, len: usize) -> Vec<Rat> {
    let raw: Vec<i64> = (0..len).map(|_| 1 + pick(rng, 9) as i64).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|w| rat::frac(w, total)).collect()
}

/// Generated-subalgebra atoms partition the space: pairwise disjoint,
/// join to one, and refine every generator.
pub fn atoms_suite(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = Rng::seed_from_u64(seed);
    for case in 0..cases {
        let size = 1 + pick(&mut rng, 1024) as usize;
        let space = AtomSpace::new(size).map_err(|e| e.to_string())?;
        let gens = pick(&mut rng, 11) as usize;
        let generators: Vec<Element> = (0..gens)
            .map(|_| {
                let atoms: Vec<usize> =
                    (0..size).filter(|_| rng.next_u64().is_multiple_of(2)).collect();
                Element::from_atoms(space, &atoms).expect("in range")
            })
            .collect();
        let atoms = generated_atoms(space, &generators).map_err(|e| e.to_string())?;
        let mut join = Element::zero(space);
        for (i, a) in atoms.iter().enumerate() {
            if a.is_zero() {
                return Err(format!("case {case}: zero generated atom"));
            }
            for b in atoms.iter().skip(i + 1) {
                if !a.disjoint_from(b).expect("same space") {
                    return Err(format!("case {case}: overlapping generated atoms"));
                }
            }
            join = join.join(a).expect("same space");
        }
        if join != Element::one(space) {
            return Err(format!("case {case}: atoms do not cover the space"));
        }
        for g in &generators {
            for a in &atoms {
                let below = a.leq(g).expect("same space");
                let apart = a.disjoint_from(g).expect("same space");
                if !below && !apart {
                    return Err(format!("case {case}: atom splits a generator"));
                }
            }
        }
    }
    Ok(cases)
}

/// Integration laws: linearity, monotonicity, the indicator identity and
/// partition additivity, all as exact equalities.
pub fn integration_suite(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = Rng::seed_from_u64(seed);
    for case in 0..cases {
        let period = 1 + pick(&mut rng, 12);
        let fam = PeriodicFam::new(random_weights(&mut rng, period as usize))
            .map_err(|e| e.to_string())?;
        let value = |rng: &mut Rng| rat::frac(pick(rng, 13) as i64, 1 + pick(rng, 12) as i64);
        let f = PeriodicSimpleFunction::new(
            (0..period).map(|_| value(&mut rng)).collect(),
        )
        .map_err(|e| e.to_string())?;
        let g = PeriodicSimpleFunction::new(
            (0..period).map(|_| value(&mut rng)).collect(),
        )
        .map_err(|e| e.to_string())?;
        let everything = PeriodicSet::everything();
        let c = value(&mut rng);
        let lhs = integrate(&f.scale(&c).add(&g), &fam, &everything);
        let rhs = &c * integrate(&f, &fam, &everything) + integrate(&g, &fam, &everything);
        if lhs != rhs {
            return Err(format!("case {case}: linearity broke"));
        }
        if integrate(&f, &fam, &everything) > integrate(&f.add(&g), &fam, &everything) {
            return Err(format!("case {case}: monotonicity broke"));
        }
        let cut = pick(&mut rng, period);
        let e = PeriodicSet::new(period, &(0..=cut).collect::<Vec<_>>())
            .map_err(|e| e.to_string())?;
        if integrate(&PeriodicSimpleFunction::indicator(&e), &fam, &everything) != fam.xi(&e) {
            return Err(format!("case {case}: indicator identity broke"));
        }
        let split = cut + 1;
        let blocks: Vec<Vec<u64>> = if split >= period {
            vec![(0..period).collect()]
        } else {
            vec![(0..split).collect(), (split..period).collect()]
        };
        let partition = IndexPartition::new(period, &blocks).map_err(|e| e.to_string())?;
        let total: Rat = partition_decompose(&f, &fam, &partition).into_iter().sum();
        if total != integrate(&f, &fam, &everything) {
            return Err(format!("case {case}: partition additivity broke"));
        }
    }
    Ok(cases)
}

/// Probability-tree laws on random trees: level measures, the product
/// decomposition of path probabilities, and the tower identity.
pub fn trees_suite(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = Rng::seed_from_u64(seed);
    for case in 0..cases {
        let depth = 1 + pick(&mut rng, 6) as usize;
        // random branching spec per level, 1..=4 children
        let shape: Vec<Vec<i64>> = (0..depth)
            .map(|_| {
                (0..1 + pick(&mut rng, 4))
                    .map(|_| 1 + pick(&mut rng, 5) as i64)
                    .collect()
            })
            .collect();
        let mut tree = ProbTree::new(rat::zero());
        let mut seq = rng.next_u64();
        tree.materialize(depth, |path, score| {
            let spec = &shape[path.len()];
            let total: i64 = spec.iter().sum();
            seq = seq.wrapping_mul(6364136223846793005).wrapping_add(path.len() as u64);
            Ok(spec
                .iter()
                .enumerate()
                .map(|(c, w)| {
                    (
                        c,
                        rat::frac(*w, total),
                        score + rat::int((seq as i64 % 7).abs() + c as i64),
                    )
                })
                .collect())
        })
        .map_err(|e| e.to_string())?;
        if tree.level_measure(depth, |_, _| true).map_err(|e| e.to_string())? != rat::one() {
            return Err(format!("case {case}: level probabilities do not sum to one"));
        }
        for path in tree.level_paths(depth).map_err(|e| e.to_string())? {
            let mut prod = rat::one();
            for h in 0..path.len() {
                let children = tree.children(&path[..h]).map_err(|e| e.to_string())?;
                let (_, p) = children
                    .iter()
                    .find(|(l, _)| *l == path[h])
                    .expect("edge exists");
                prod *= p;
            }
            if prod != tree.path_probability(path).map_err(|e| e.to_string())? {
                return Err(format!("case {case}: product decomposition broke"));
            }
        }
        let cond = pick(&mut rng, depth as u64 + 1) as usize;
        let (direct, towered) = tree
            .tower_check(cond, depth, |_, s| s.clone())
            .map_err(|e| e.to_string())?;
        if direct != towered {
            return Err(format!("case {case}: tower identity broke"));
        }
    }
    Ok(cases)
}

/// The exact Bin(n, p) distribution as (value, probability) pairs.
fn binomial_pmf(n: usize, p: &Rat) -> Vec<(usize, Rat)> {
    let q = rat::one() - p;
    let mut coeff = rat::one();
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            coeff = coeff * rat::int((n - k + 1) as i64) / rat::int(k as i64);
        }
        let mut mass = coeff.clone();
        for _ in 0..k {
            mass *= p;
        }
        for _ in 0..(n - k) {
            mass *= &q;
        }
        out.push((k, mass));
    }
    out
}

/// Binomial moments and the Chebyshev tail bound, exactly, against the
/// closed forms; small cases are cross-checked on the path tree.
pub fn moments_suite(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = Rng::seed_from_u64(seed);
    for case in 0..cases {
        let n = 1 + pick(&mut rng, 20) as usize;
        let den = 2 + pick(&mut rng, 11) as i64;
        let num = 1 + pick(&mut rng, den as u64 - 1) as i64;
        let p = rat::frac(num, den);
        let q = rat::one() - &p;
        let pmf = binomial_pmf(n, &p);
        let total: Rat = pmf.iter().map(|(_, m)| m.clone()).sum();
        if total != rat::one() {
            return Err(format!("case {case}: pmf does not sum to one"));
        }
        let mean: Rat = pmf.iter().map(|(k, m)| rat::int(*k as i64) * m).sum();
        let second: Rat = pmf
            .iter()
            .map(|(k, m)| rat::int((*k * *k) as i64) * m)
            .sum();
        let var = second - &mean * &mean;
        let n_rat = rat::int(n as i64);
        if mean != &n_rat * &p || var != &n_rat * &p * &q {
            return Err(format!("case {case}: binomial moments wrong"));
        }
        let t = rat::frac(1 + pick(&mut rng, 8) as i64, 2);
        let tail: Rat = pmf
            .iter()
            .filter(|(k, _)| rat::abs(&(rat::int(*k as i64) - &mean)) >= t)
            .map(|(_, m)| m.clone())
            .sum();
        if tail > &var / (&t * &t) {
            return Err(format!("case {case}: Chebyshev bound violated"));
        }
        // cross-check against the path tree while it is still small
        if n <= 10 {
            let mut tree = ProbTree::new(0i64);
            tree.materialize(n, |_, hits| {
                Ok(vec![(0usize, q.clone(), *hits), (1usize, p.clone(), *hits + 1)])
            })
            .map_err(|e| e.to_string())?;
            let (tmean, tvar) = tree
                .moments(n, |_, hits| rat::int(*hits))
                .map_err(|e| e.to_string())?;
            let report = tree
                .chebyshev_audit(n, |_, hits| rat::int(*hits), &t)
                .map_err(|e| e.to_string())?;
            if tmean != mean || tvar != var || report.tail_probability != tail {
                return Err(format!("case {case}: tree disagrees with closed form"));
            }
            if !report.holds() {
                return Err(format!("case {case}: tree Chebyshev violated"));
            }
        }
    }
    Ok(cases)
}

/// Kelley sandwich on threshold sets of random measured algebras.
pub fn kelley_suite(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let deltas = [rat::frac(1, 4), rat::frac(1, 2), rat::frac(3, 4)];
    let mut done = 0;
    for case in 0..cases {
        let atoms = 2 + pick(&mut rng, 9) as usize;
        let algebra =
            MeasuredAlgebra::new(random_weights(&mut rng, atoms)).map_err(|e| e.to_string())?;
        let delta = &deltas[pick(&mut rng, 3) as usize];
        let q = intnum::threshold_set(&algebra, delta);
        if q.is_empty() {
            continue;
        }
        let query = IntersectionQuery::new(q, 6).map_err(|e| e.to_string())?;
        let lower = intnum::kelley_lower(&query).map_err(|e| e.to_string())?;
        let upper = intnum::int_upper(&query, Some(20_000)).map_err(|e| e.to_string())?;
        if lower.value < *delta {
            return Err(format!("case {case}: Kelley bound below threshold"));
        }
        if upper.value < *delta {
            return Err(format!("case {case}: upper bound below threshold"));
        }
        if lower.value > upper.value {
            return Err(format!("case {case}: sandwich inverted"));
        }
        done += 1;
    }
    Ok(done)
}

/// Limit construction checked exhaustively: every element below the
/// returned limit clears the threshold.
pub fn limits_suite(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = Rng::seed_from_u64(seed);
    let mut done = 0;
    let mut case = 0;
    while done < cases && case < cases * 20 {
        case += 1;
        let atoms = 2 + pick(&mut rng, 9) as usize;
        let algebra =
            MeasuredAlgebra::new(random_weights(&mut rng, atoms)).map_err(|e| e.to_string())?;
        let space = algebra.space();
        let fam = PeriodicFam::new(random_weights(&mut rng, 2)).map_err(|e| e.to_string())?;
        let partition = IndexPartition::new(2, &[vec![0], vec![1]]).map_err(|e| e.to_string())?;
        let blocks = BlockFamily::new(vec![1]).map_err(|e| e.to_string())?;
        let entry = |rng: &mut Rng| {
            let picked: Vec<usize> =
                (0..atoms).filter(|_| rng.next_u64().is_multiple_of(2)).collect();
            Element::from_atoms(space, &picked).expect("in range")
        };
        let mut e0 = entry(&mut rng);
        let mut e1 = entry(&mut rng);
        if e0.is_zero() {
            e0 = Element::one(space);
        }
        if e1.is_zero() {
            e1 = Element::one(space);
        }
        let seq = ConditionSequence::new(vec![vec![e0], vec![e1]], &blocks)
            .map_err(|e| e.to_string())?;
        let ctx = LimitContext::new(algebra, fam, partition, blocks, vec![], vec![])
            .map_err(|e| e.to_string())?;
        let delta = rat::frac(pick(&mut rng, 3) as i64, 4);
        let r = Element::one(space);
        let Ok(limit) = limit_construct(&ctx, &seq, &r, &delta) else {
            // precondition failures are legitimate for random entries
            continue;
        };
        for mask in 1u64..(1u64 << atoms) {
            let picked: Vec<usize> = (0..atoms).filter(|a| mask & (1 << a) != 0).collect();
            let q = Element::from_atoms(space, &picked).expect("in range");
            if !q.leq(&limit).expect("same space") {
                continue;
            }
            let f = ctx.averaged_function(&seq, &q).map_err(|e| e.to_string())?;
            if integrate(&f, ctx.fam(), &PeriodicSet::everything()) < delta {
                return Err(format!("case {case}: element below limit misses threshold"));
            }
        }
        done += 1;
    }
    Ok(done)
}

/// All suite names in run order.
pub const SUITES: &[&str] = &[
    "atoms",
    "integration",
    "trees",
    "moments",
    "kelley",
    "limits",
];

/// Runs a named suite (or `all`) with its default case count; returns the
/// lines to print.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<String>, String> {
    let one = |name: &str, seed: u64| -> Result<String, String> {
        let cases = match name {
            "atoms" => atoms_suite(500, seed)?,
            "integration" => integration_suite(200, seed)?,
            "trees" => trees_suite(100, seed)?,
            "moments" => moments_suite(20, seed)?,
            "kelley" => kelley_suite(50, seed)?,
            "limits" => limits_suite(20, seed)?,
            other => return Err(format!("unknown suite {other:?}")),
        };
        Ok(format!("suite {name}: pass ({cases} cases)"))
    };
    if name == "all" {
        SUITES.iter().map(|n| one(n, seed)).collect()
    } else {
        Ok(vec![one(name, seed)?])
    }
}
