//! Experiment configuration files and their translation into core objects.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use famlab_core::boolalg::{Element, MeasuredAlgebra};
use famlab_core::fam::{IndexPartition, PeriodicFam};
use famlab_core::famlimit::{BlockFamily, ConditionSequence, LimitContext, TreeParams};
use famlab_core::rat::{self, Rat};

/// Anything that can go wrong while turning a config into core objects.
#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    Semantic(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "parse error: {m}"),
            ConfigError::Semantic(m) => write!(f, "config error: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn parse_rat(s: &str) -> Result<Rat, ConfigError> {
    rat::parse(s).ok_or_else(|| ConfigError::Parse(format!("bad rational {s:?}")))
}

pub fn parse_rats(xs: &[String]) -> Result<Vec<Rat>, ConfigError> {
    xs.iter().map(|s| parse_rat(s)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgebraSpec {
    /// Uniform weights on `n` atoms.
    Uniform(usize),
    /// Explicit strictly positive weights, one per atom.
    Weights(Vec<String>),
    /// Dyadic cylinder algebra of the given depth (2^depth uniform atoms).
    DyadicDepth(usize),
}

impl AlgebraSpec {
    pub fn build(&self) -> Result<MeasuredAlgebra, ConfigError> {
        match self {
            AlgebraSpec::Uniform(n) => MeasuredAlgebra::uniform(*n)
                .map_err(|e| ConfigError::Semantic(e.to_string())),
            AlgebraSpec::Weights(w) => MeasuredAlgebra::new(parse_rats(w)?)
                .map_err(|e| ConfigError::Semantic(e.to_string())),
            AlgebraSpec::DyadicDepth(d) => {
                if *d > 16 {
                    return Err(ConfigError::Semantic(format!("depth {d} too large")));
                }
                MeasuredAlgebra::uniform(1usize << d)
                    .map_err(|e| ConfigError::Semantic(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub modulus: u64,
    pub blocks: Vec<Vec<u64>>,
}

/// One condition sequence: `table[k][j]` lists the atoms of the element
/// assigned to label `(k, j)`; the table repeats periodically in `k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub table: Vec<Vec<Vec<usize>>>,
}

/// A complete limit instance: everything `LimitContext` needs plus the
/// root condition, forbidden indices and the target tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub algebra: AlgebraSpec,
    /// Periodic index weights, one per residue.
    pub fam: Vec<String>,
    pub partition: PartitionSpec,
    /// Label-block sizes, repeating periodically.
    pub blocks: Vec<usize>,
    pub sequences: Vec<SequenceSpec>,
    pub deltas: Vec<String>,
    pub eps: String,
    /// Atoms of the starting condition; omitted means the top element.
    #[serde(default)]
    pub root: Option<Vec<usize>>,
    /// Indices excluded from every candidate set.
    #[serde(default)]
    pub forbidden: Vec<u64>,
}

/// The instance compiled to core objects.
pub struct BuiltInstance {
    pub ctx: LimitContext,
    pub root: Element,
    pub forbidden: BTreeSet<u64>,
    pub eps: Rat,
}

impl InstanceSpec {
    pub fn build(&self) -> Result<BuiltInstance, ConfigError> {
        let semantic = |e: &dyn std::fmt::Display| ConfigError::Semantic(e.to_string());
        let algebra = self.algebra.build()?;
        let space = algebra.space();
        let fam = PeriodicFam::new(parse_rats(&self.fam)?).map_err(|e| semantic(&e))?;
        let partition = IndexPartition::new(
            self.partition.modulus,
            &self.partition.blocks,
        )
        .map_err(|e| semantic(&e))?;
        let blocks = BlockFamily::new(self.blocks.clone()).map_err(|e| semantic(&e))?;
        let sequences = self
            .sequences
            .iter()
            .map(|s| {
                let table = s
                    .table
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|atoms| {
                                Element::from_atoms(space, atoms).map_err(|e| semantic(&e))
                            })
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                ConditionSequence::new(table, &blocks).map_err(|e| semantic(&e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let deltas = parse_rats(&self.deltas)?;
        let ctx = LimitContext::new(algebra, fam, partition, blocks, sequences, deltas)
            .map_err(|e| semantic(&e))?;
        let root = match &self.root {
            Some(atoms) => Element::from_atoms(space, atoms).map_err(|e| semantic(&e))?,
            None => Element::one(space),
        };
        Ok(BuiltInstance {
            ctx,
            root,
            forbidden: self.forbidden.iter().copied().collect(),
            eps: parse_rat(&self.eps)?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamsSpec {
    /// Height and grid tolerance from the variance bounds.
    Derived,
    /// Hand-picked height and grid tolerance.
    Empirical { h_star: u64, eps_star: String },
}

impl ParamsSpec {
    pub fn build(&self, instance: &BuiltInstance) -> Result<TreeParams, ConfigError> {
        let out = match self {
            ParamsSpec::Derived => {
                let masses = instance
                    .ctx
                    .partition()
                    .block_masses(instance.ctx.fam());
                TreeParams::derive(&instance.eps, &masses, instance.ctx.sequences().len())
            }
            ParamsSpec::Empirical { h_star, eps_star } => {
                TreeParams::empirical(&instance.eps, *h_star, &parse_rat(eps_star)?)
            }
        };
        out.map_err(|e| ConfigError::Semantic(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    Exhaustive,
    Sampled { seed: u64, budget: u64 },
}

/// The top-level experiment file, dispatched on `kind`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    /// For every nonzero element and every tolerance, find a cylinder on
    /// which the element has conditional Lebesgue measure at least 1 − ε.
    DensitySweep { depth: usize, eps: Vec<String> },
    /// Intersection-number bounds for a threshold set or explicit family.
    IntnumSandwich {
        algebra: AlgebraSpec,
        #[serde(default)]
        delta: Option<String>,
        #[serde(default)]
        elements: Option<Vec<Vec<usize>>>,
        max_len: usize,
        #[serde(default)]
        budget: Option<u64>,
    },
    /// Materialize a witness tree and report its exact probability laws.
    TreeAudit {
        instance: InstanceSpec,
        params: ParamsSpec,
    },
    /// The full pipeline: grid refinement, witness search, certificate.
    FamLimitRun {
        instance: InstanceSpec,
        params: ParamsSpec,
        mode: ModeSpec,
    },
    /// Re-verify a previously emitted certificate file.
    VerifyCertificate { certificate: String },
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn uses_sampling(&self) -> bool {
        matches!(
            self,
            ExperimentSpec::FamLimitRun {
                mode: ModeSpec::Sampled { .. },
                ..
            }
        )
    }
}
