//! Tabular synthesizers: sequential CART, Bayesian network, bootstrap
//! resampling and an adapter for external programs.
//!
//! All generators are schema-preserving and deterministic given a seed.

mod bn;
mod bootstrap;
mod cart;
mod external;
mod seq;

use serde::{Deserialize, Serialize};

pub use bn::{fit_bn, generate_bn, BayesNetModel, BnConfig, Cpt, StateMap};
pub use bootstrap::bootstrap;
pub use cart::{Rule, Tree};
pub use external::{external_generate, ExternalConfig};
pub use seq::{fit_seq, generate_seq, SeqConfig, SeqTreeModel};

use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::tabular::{Dataset, QuantileBins};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SynthKind {
    Seq(SeqConfig),
    Bn(BnConfig),
    Bootstrap,
    External(ExternalConfig),
}

impl SynthKind {
    /// Parse `seq`, `bn`, `bootstrap` or `NAME=COMMAND [ARGS..]`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "seq" => Ok(SynthKind::Seq(SeqConfig::default())),
            "bn" => Ok(SynthKind::Bn(BnConfig::default())),
            "bootstrap" => Ok(SynthKind::Bootstrap),
            other => {
                let (name, cmd) = other.split_once('=').ok_or_else(|| {
                    Error::invalid(format!("unknown synthesizer {other:?}; expected seq, bn, bootstrap or NAME=COMMAND"))
                })?;
                let mut parts = cmd.split_whitespace();
                let command = parts.next().unwrap_or("");
                let mut config = ExternalConfig::new(name.trim(), command);
                config.args = parts.map(str::to_string).collect();
                config.validate()?;
                Ok(SynthKind::External(config))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SynthKind::Seq(c) => c.validate(),
            SynthKind::Bn(c) => c.validate(),
            SynthKind::Bootstrap => Ok(()),
            SynthKind::External(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizerSpec {
    pub kind: SynthKind,
    pub seed: u64,
}

impl SynthesizerSpec {
    pub fn new(kind: SynthKind, seed: u64) -> Result<Self> {
        kind.validate()?;
        Ok(Self { kind, seed })
    }

    /// Short name used in reports.
    pub fn tag(&self) -> &str {
        match &self.kind {
            SynthKind::Seq(_) => "seq",
            SynthKind::Bn(_) => "bn",
            SynthKind::Bootstrap => "bootstrap",
            SynthKind::External(c) => &c.name,
        }
    }

    pub fn is_resampler(&self) -> bool {
        matches!(self.kind, SynthKind::Bootstrap)
    }

    /// Fit on `train`. `stream` separates independent fits that share a spec,
    /// such as one per cross-validation fold.
    pub fn fit(&self, train: &Dataset, stream: u64) -> Result<FittedSynth> {
        self.kind.validate()?;
        let seed = derive_seed(self.seed, &[stream]);
        let model = match &self.kind {
            SynthKind::Seq(c) => Fitted::Seq(fit_seq(train, c)?),
            SynthKind::Bn(c) => Fitted::Bn(fit_bn(train, c, derive_seed(seed, &[0]))?),
            SynthKind::Bootstrap | SynthKind::External(_) => {
                if train.is_empty() {
                    return Err(Error::NoRows);
                }
                Fitted::Source(train.clone())
            }
        };
        Ok(FittedSynth {
            spec: self.clone(),
            model,
            seed,
        })
    }

    pub fn synthesize(&self, train: &Dataset, n_prime: usize, stream: u64) -> Result<Dataset> {
        self.fit(train, stream)?.generate(n_prime, 0)
    }
}

#[derive(Debug, Clone)]
enum Fitted {
    Seq(SeqTreeModel),
    Bn(BayesNetModel),
    Source(Dataset),
}

/// A synthesizer fitted once, ready to generate any number of rows.
#[derive(Debug, Clone)]
pub struct FittedSynth {
    spec: SynthesizerSpec,
    model: Fitted,
    seed: u64,
}

impl FittedSynth {
    pub fn spec(&self) -> &SynthesizerSpec {
        &self.spec
    }

    /// Draw `n_prime` rows. Different `draw` values give independent samples.
    pub fn generate(&self, n_prime: usize, draw: u64) -> Result<Dataset> {
        let seed = derive_seed(self.seed, &[1, draw]);
        match (&self.model, &self.spec.kind) {
            (Fitted::Seq(m), _) => Ok(generate_seq(m, n_prime, seed)),
            (Fitted::Bn(m), _) => Ok(generate_bn(m, n_prime, seed)),
            (Fitted::Source(train), SynthKind::External(c)) => external_generate(c, train, n_prime, seed),
            (Fitted::Source(train), _) => bootstrap(train, n_prime, seed),
        }
    }
}

/// Total-variation distance between the marginals of column `col` in `a`
/// and `b`. Numeric columns are cut into ten equal-frequency bins fitted on
/// `a`; missing is a category of its own.
pub fn tv_distance(a: &Dataset, b: &Dataset, col: usize) -> f64 {
    let spec = &a.schema().columns[col];
    let (slots, code): (usize, Box<dyn Fn(crate::tabular::Cell) -> usize>) = if spec.is_numeric() {
        let values: Vec<f64> = a.column(col).filter_map(|c| c.as_num()).collect();
        let bins = QuantileBins::fit(&values, 10);
        let nb = bins.n_bins();
        (nb + 1, Box::new(move |c| c.as_num().map_or(nb, |v| bins.bin(v))))
    } else {
        let n = spec.n_levels().max(b.schema().columns[col].n_levels());
        (n + 1, Box::new(move |c| c.as_cat().map_or(n, |l| l as usize)))
    };
    let freq = |ds: &Dataset| {
        let mut f = vec![0.0; slots];
        for c in ds.column(col) {
            f[code(c)] += 1.0;
        }
        let n = ds.len().max(1) as f64;
        f.iter_mut().for_each(|v| *v /= n);
        f
    };
    let (fa, fb) = (freq(a), freq(b));
    fa.iter().zip(&fb).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
}
