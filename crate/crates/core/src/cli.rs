//! The `augmentor` command.
//!
//! Every subcommand writes its outputs and a `manifest.json` into `--out`.
//! Exit codes: 0 success, 1 domain error, 2 usage error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::complexity::{profile, ComplexityProfile};
use crate::decision::{loocv_by_group, published_model, recommend, train_decision, DecisionModel, Recommendation};
use crate::diversity::{diversity_of_augmentation, EifConfig, Extension};
use crate::error::{Error, Result};
use crate::harness::{
    benchmark_generator, curves_csv, exact_permutation_test, geometric_series_with_sd, run_sweep, simulate_part1,
    summary_csv, synth_table_csv, PopulationSpec, SimulationConfig, SweepConfig, Tail, BASE_SD, SERIES_LEN,
};
use crate::rng::derive_seed;
use crate::synth::{SynthKind, SynthesizerSpec};
use crate::tabular::{concat, load_csv, read_csv_with_schema, save_schema, write_csv, Dataset, LoadOptions, RowId};
use crate::workload::{nested_cv_auc, CvOptions, GbdtHyper, HyperMode, HyperRanges, OUTER_FOLDS};

#[derive(Debug, Parser, Serialize)]
#[command(name = "augmentor", version, about = "Synthetic-data augmentation for small tabular datasets")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "AUGMENTOR_THREADS", value_parser = clap::value_parser!(u32).range(1..))]
    #[serde(skip)]
    pub threads: Option<u32>,
    /// JSON object of flag defaults, keyed by long flag name.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Reject undeclared categorical levels.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct OutArgs {
    #[arg(long, default_value = "augmentor-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CvArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = OUTER_FOLDS)]
    pub folds: usize,
    /// Random-search trials per tuning; 0 uses the default hyperparameters.
    #[arg(long, default_value_t = crate::workload::DEFAULT_BUDGET)]
    pub budget: usize,
}

impl CvArgs {
    fn hyper(&self) -> HyperMode {
        if self.budget == 0 {
            HyperMode::Fixed(GbdtHyper::default())
        } else {
            HyperMode::Tune { ranges: HyperRanges::default(), budget: self.budget }
        }
    }

    fn options(&self) -> CvOptions {
        CvOptions { seed: self.seed, folds: self.folds, hyper: self.hyper(), leakage: false }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailArg {
    Greater,
    Less,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Complexity profile of a dataset.
    Profile {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        cv: CvArgs,
        /// Use this baseline AUC instead of running nested CV.
        #[arg(long)]
        baseline_auc: Option<f64>,
        /// Skip the baseline AUC.
        #[arg(long, conflicts_with = "baseline_auc")]
        no_baseline: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Whether augmentation is expected to help.
    Recommend {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        cv: CvArgs,
        #[arg(long)]
        baseline_auc: Option<f64>,
        /// Decision model JSON (default: the published coefficients).
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Generate synthetic rows.
    Synth {
        #[command(flatten)]
        data: DataArgs,
        /// seq, bn, bootstrap or NAME=COMMAND.
        #[arg(long, default_value = "seq")]
        synth: String,
        #[arg(long)]
        nprime: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Append synthetic rows to the data.
    Augment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "seq")]
        synth: String,
        #[arg(long)]
        nprime: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Search synthesizers and augmentation sizes.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        cv: CvArgs,
        /// Repeatable; default seq and bn.
        #[arg(long)]
        synth: Vec<String>,
        #[arg(long, default_value_t = 0)]
        series_seed: u64,
        #[arg(long, default_value_t = BASE_SD)]
        series_sd: f64,
        /// Largest augmentation size tried.
        #[arg(long, default_value_t = 5000, conflicts_with = "full_series")]
        max_nprime: usize,
        /// Try all sizes of the series, up to about a million rows.
        #[arg(long)]
        full_series: bool,
        /// Explicit comma-separated sizes instead of a series.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Sweep even when augmentation is not recommended.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "dataset")]
        name: String,
        #[arg(long, default_value_t = 100)]
        eif_trees: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Nested-CV AUC, optionally with augmentation.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        cv: CvArgs,
        #[arg(long)]
        synth: Option<String>,
        #[arg(long, default_value_t = 0)]
        nprime: usize,
        /// Fit the synthesizer on all rows before folding (leaks; for testing).
        #[arg(long)]
        leakage: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Diversity added by an augmentation.
    Diversity {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        augmented: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long, default_value_t = 256)]
        subsample: usize,
        /// Axis-parallel cuts instead of random hyperplanes.
        #[arg(long)]
        axis_parallel: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Exact paired permutation test.
    Permtest {
        /// Two-column CSV of pairs; a header line is optional.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_enum, default_value = "greater")]
        tail: TailArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Simulate base samples to produce decision-model training records.
    Simulate {
        #[arg(long, required_unless_present = "benchmark", requires = "schema")]
        data: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Population description JSON; a population is generated from it.
        #[arg(long, conflicts_with = "data")]
        benchmark: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        synth: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = [50, 100, 200, 400])]
        n0: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        #[arg(long, default_value_t = 2)]
        series: usize,
        #[arg(long, default_value_t = SERIES_LEN)]
        sizes_per_series: usize,
        #[arg(long, default_value_t = 5000)]
        max_nprime: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = crate::workload::DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long, default_value = "population")]
        dataset_id: String,
        /// Also fit a decision model to the records.
        #[arg(long)]
        fit_model: bool,
        #[command(flatten)]
        out: OutArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Profile { .. } => "profile",
            Command::Recommend { .. } => "recommend",
            Command::Synth { .. } => "synth",
            Command::Augment { .. } => "augment",
            Command::Sweep { .. } => "sweep",
            Command::Evaluate { .. } => "evaluate",
            Command::Diversity { .. } => "diversity",
            Command::Permtest { .. } => "permtest",
            Command::Simulate { .. } => "simulate",
        }
    }

    fn out(&self) -> &Path {
        match self {
            Command::Profile { out, .. }
            | Command::Recommend { out, .. }
            | Command::Synth { out, .. }
            | Command::Augment { out, .. }
            | Command::Sweep { out, .. }
            | Command::Evaluate { out, .. }
            | Command::Diversity { out, .. }
            | Command::Permtest { out, .. }
            | Command::Simulate { out, .. } => &out.out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command_line: Vec<String>,
    pub subcommand: String,
    /// Every option after config-file and default resolution.
    pub options: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub timings: Vec<Timing>,
}

/// A run in progress: collects the manifest while writing outputs.
struct Run {
    out: PathBuf,
    manifest: RunManifest,
}

fn sha256_file(path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(InputDigest { path: path.to_path_buf(), sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() as u64 })
}

impl Run {
    fn new(cli: &Cli, argv: &[String]) -> Result<Self> {
        let out = cli.command.out().to_path_buf();
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        Ok(Self {
            out,
            manifest: RunManifest {
                version: env!("CARGO_PKG_VERSION").into(),
                command_line: argv.to_vec(),
                subcommand: cli.command.name().into(),
                options: serde_json::to_value(&cli.command)?,
                seeds: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings: Vec::new(),
            },
        })
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.manifest.inputs.push(digest);
        Ok(())
    }

    fn seed(&mut self, name: &str, value: u64) {
        self.manifest.seeds.insert(name.into(), value);
    }

    fn phase<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let r = f();
        self.manifest.timings.push(Timing { phase: name.into(), seconds: start.elapsed().as_secs_f64() });
        r
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.manifest.outputs.push(name.into());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, serde_json::to_string_pretty(value)? + "\n")
    }

    fn write_dataset(&mut self, name: &str, ds: &Dataset) -> Result<()> {
        let mut buf = Vec::new();
        write_csv(ds, &mut buf)?;
        self.write(name, buf)
    }

    fn finish(self) -> Result<()> {
        let path = self.out.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

fn load(run: &mut Run, data: &Path, schema: &Path, strict: bool) -> Result<Dataset> {
    run.input(data)?;
    run.input(schema)?;
    let (ds, report) = load_csv(data, schema, LoadOptions { strict })?;
    if report.dropped_missing_outcome > 0 {
        eprintln!("dropped {} rows with a missing outcome", report.dropped_missing_outcome);
    }
    for (col, level) in &report.added_levels {
        eprintln!("added level {level:?} to {col}");
    }
    Ok(ds)
}

fn synth_spec(text: &str, seed: u64) -> Result<SynthesizerSpec> {
    let kind = SynthKind::parse(text).map_err(|e| Error::Usage(e.to_string()))?;
    SynthesizerSpec::new(kind, seed)
}

fn synth_specs(texts: &[String], seed: u64, fallback: &[&str]) -> Result<Vec<SynthesizerSpec>> {
    let texts: Vec<&str> = if texts.is_empty() { fallback.to_vec() } else { texts.iter().map(String::as_str).collect() };
    texts.iter().enumerate().map(|(i, t)| synth_spec(t, derive_seed(seed, &[10, i as u64]))).collect()
}

fn decision_model(run: &mut Run, path: Option<&Path>) -> Result<DecisionModel> {
    match path {
        None => Ok(published_model()),
        Some(p) => {
            run.input(p)?;
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

fn profile_with_baseline(run: &mut Run, ds: &Dataset, cv: &CvArgs, baseline: Option<f64>) -> Result<ComplexityProfile> {
    let baseline = match baseline {
        Some(b) => b,
        None => {
            run.seed("cv", cv.seed);
            run.phase("baseline", || nested_cv_auc(ds, None, 0, &cv.options()))?.mean_auc
        }
    };
    run.phase("profile", || profile(ds, Some(baseline)))
}

#[derive(Serialize)]
struct Provenance<'a> {
    provenance: crate::tabular::Provenance,
    rows: usize,
    original_rows: usize,
    synthetic_rows: usize,
    synthesizer: &'a str,
    /// Source row index per output row; null for synthetic rows.
    sources: Vec<Option<u64>>,
}

fn provenance<'a>(ds: &Dataset, synthesizer: &'a str) -> Provenance<'a> {
    let sources: Vec<Option<u64>> = ds.ids().iter().map(|id| (*id != RowId::SYNTHETIC).then_some(id.0)).collect();
    let original = sources.iter().filter(|s| s.is_some()).count();
    Provenance {
        provenance: ds.provenance(),
        rows: ds.len(),
        original_rows: original,
        synthetic_rows: ds.len() - original,
        synthesizer,
        sources,
    }
}

fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => pairs.push((v[0], v[1])),
            None if i == 0 => continue,
            _ => {
                return Err(Error::Csv { line: i as u64 + 1, message: "expected two numeric columns".into() });
            }
        }
    }
    Ok(pairs)
}

fn execute(cli: &Cli, argv: &[String]) -> Result<()> {
    let mut run = Run::new(cli, argv)?;
    if let Some(c) = &cli.config {
        run.input(c)?;
    }
    match &cli.command {
        Command::Profile { data, cv, baseline_auc, no_baseline, .. } => {
            let ds = load(&mut run, &data.data, &data.schema, data.strict)?;
            let p = if *no_baseline {
                run.phase("profile", || profile(&ds, None))?
            } else {
                profile_with_baseline(&mut run, &ds, cv, *baseline_auc)?
            };
            println!(
                "n0={} dof={} imbalance={:.4} std_entropy={:.4} mi_cov={:.4} separability={:.4}",
                p.n0, p.dof, p.imbalance, p.std_entropy, p.mi_cov, p.separability
            );
            run.write_json("profile.json", &p)?;
        }
        Command::Recommend { data, cv, baseline_auc, model, .. } => {
            let ds = load(&mut run, &data.data, &data.schema, data.strict)?;
            let model = decision_model(&mut run, model.as_deref())?;
            let p = profile_with_baseline(&mut run, &ds, cv, *baseline_auc)?;
            let r = recommend(&model, &p)?;
            println!("probability={:.4} recommend={}", r.probability, r.recommend);
            run.write_json("recommendation.json", &serde_json::json!({ "profile": p, "recommendation": r }))?;
        }
        Command::Synth { data, synth, nprime, seed, .. } | Command::Augment { data, synth, nprime, seed, .. } => {
            let ds = load(&mut run, &data.data, &data.schema, data.strict)?;
            let spec = synth_spec(synth, *seed)?;
            run.seed("synth", *seed);
            let synthetic = run.phase("generate", || spec.synthesize(&ds, *nprime, 0))?;
            let n_synthetic = synthetic.len();
            let (name, out) = if matches!(cli.command, Command::Synth { .. }) {
                ("synthetic", synthetic)
            } else {
                ("augmented", concat(&ds, &synthetic)?)
            };
            run.write_dataset(&format!("{name}.csv"), &out)?;
            run.write_json(&format!("{name}.provenance.json"), &provenance(&out, spec.tag()))?;
            println!("wrote {} rows ({} synthetic)", out.len(), n_synthetic);
        }
        Command::Sweep {
            data,
            cv,
            synth,
            series_seed,
            series_sd,
            max_nprime,
            full_series,
            sizes,
            force,
            model,
            name,
            eif_trees,
            ..
        } => {
            let ds = load(&mut run, &data.data, &data.schema, data.strict)?;
            let model = decision_model(&mut run, model.as_deref())?;
            let synths = synth_specs(synth, cv.seed, &["seq", "bn"])?;
            let p = profile_with_baseline(&mut run, &ds, cv, None)?;
            let rec: Recommendation = recommend(&model, &p)?;
            if !rec.recommend && !force {
                return Err(Error::NotRecommended { probability: rec.probability });
            }
            let sizes = if sizes.is_empty() {
                run.seed("series", *series_seed);
                let series = geometric_series_with_sd(*series_seed, *series_sd)?;
                series.truncated((!full_series).then_some(*max_nprime))
            } else {
                sizes.clone()
            };
            let cfg = SweepConfig {
                seed: cv.seed,
                folds: cv.folds,
                hyper: cv.hyper(),
                eif: EifConfig { trees: *eif_trees, ..Default::default() },
            };
            // cells from an earlier run are reused only if every input and
            // option that affects them is unchanged
            let key = {
                let mut h = Sha256::new();
                for i in &run.manifest.inputs {
                    h.update(i.sha256.as_bytes());
                }
                let mut options = run.manifest.options.clone();
                if let Some(o) = options.get_mut("sweep").and_then(|v| v.as_object_mut()) {
                    o.remove("out");
                }
                h.update(serde_json::to_string(&options)?.as_bytes());
                hex::encode(h.finalize())
            };
            let cells = run.out.join("cells.csv");
            let key_path = run.out.join("cells.key");
            if fs::read_to_string(&key_path).ok().as_deref() != Some(key.as_str()) && cells.exists() {
                fs::remove_file(&cells).map_err(|e| Error::io(&cells, e))?;
            }
            fs::write(&key_path, &key).map_err(|e| Error::io(&key_path, e))?;
            let result = run.phase("sweep", || run_sweep(&ds, &synths, &sizes, &cfg, Some(&cells)))?;
            run.manifest.outputs.push("cells.csv".into());
            let b = &result.best;
            println!(
                "baseline={:.4} best={} n_prime={} augmented={:.4} relative={:.2}% resampled={:.4}",
                result.baseline_auc, b.synthesizer, b.n_prime_max, b.augmented_auc, b.relative_auc_percent, result.resampled_auc
            );
            run.write_json("summary.json", &serde_json::json!({ "recommendation": rec, "result": result }))?;
            run.write("summary.csv", summary_csv(name, &result))?;
            run.write("synthesizers.csv", synth_table_csv(&result))?;
            run.write("curves.csv", curves_csv(&result))?;
        }
        Command::Evaluate { data, cv, synth, nprime, leakage, .. } => {
            let ds = load(&mut run, &data.data, &data.schema, data.strict)?;
            let spec = synth.as_deref().map(|s| synth_spec(s, derive_seed(cv.seed, &[10, 0]))).transpose()?;
            run.seed("cv", cv.seed);
            let opts = CvOptions { leakage: *leakage, ..cv.options() };
            let report = run.phase("nested-cv", || nested_cv_auc(&ds, spec.as_ref(), *nprime, &opts))?;
            println!("auc={:.4}", report.mean_auc);
            run.write_json(
                "evaluation.json",
                &serde_json::json!({
                    "mean_auc": report.mean_auc,
                    "fold_aucs": report.fold_aucs,
                    "hyperparameters": report.hypers,
                }),
            )?;
        }
        Command::Diversity { base, augmented, schema, strict, seed, trees, subsample, axis_parallel, .. } => {
            let b = load(&mut run, base, schema, *strict)?;
            run.input(augmented)?;
            let (a, _) = read_csv_with_schema(augmented, b.schema(), LoadOptions { strict: true })?;
            let cfg = EifConfig {
                trees: *trees,
                subsample: *subsample,
                extension: if *axis_parallel { Extension::AxisParallel } else { Extension::Full },
                ..Default::default()
            };
            run.seed("forest", *seed);
            let r = run.phase("diversity", || diversity_of_augmentation(&b, &a, &cfg, *seed))?;
            println!("diversity={:.4}", r.diversity);
            let mut curves = String::from("threshold,base,augmented\n");
            for (i, t) in r.base.thresholds.iter().enumerate() {
                curves.push_str(&format!("{t},{},{}\n", r.base.rates[i], r.augmented.rates[i]));
            }
            run.write_json("diversity.json", &r)?;
            run.write("curves.csv", curves)?;
        }
        Command::Permtest { pairs, tail, .. } => {
            run.input(pairs)?;
            let pairs = read_pairs(pairs)?;
            let tail = match tail {
                TailArg::Greater => Tail::Greater,
                TailArg::Less => Tail::Less,
            };
            let r = exact_permutation_test(&pairs, tail)?;
            let (num, den) = r.fraction();
            println!("p = {} ({num}/{den}), displayed {:.4}", r.p_value, r.p_value);
            run.write_json("permtest.json", &serde_json::json!({ "result": r, "fraction": format!("{num}/{den}") }))?;
        }
        Command::Simulate {
            data,
            schema,
            benchmark,
            strict,
            synth,
            n0,
            replicates,
            series,
            sizes_per_series,
            max_nprime,
            seed,
            budget,
            dataset_id,
            fit_model,
            ..
        } => {
            let population = match (data, benchmark) {
                (Some(d), _) => load(&mut run, d, schema.as_deref().expect("clap requires --schema"), *strict)?,
                (None, Some(spec_path)) => {
                    run.input(spec_path)?;
                    let text = fs::read_to_string(spec_path).map_err(|e| Error::io(spec_path, e))?;
                    let spec: PopulationSpec = serde_json::from_str(&text)?;
                    run.seed("population", *seed);
                    let ds = run.phase("population", || benchmark_generator(&spec, derive_seed(*seed, &[20])))?;
                    run.write_dataset("population.csv", &ds)?;
                    save_schema(ds.schema(), &run.out.join("population.schema.json"))?;
                    run.manifest.outputs.push("population.schema.json".into());
                    ds
                }
                (None, None) => return Err(Error::Usage("one of --data or --benchmark is required".into())),
            };
            let synths = synth_specs(synth, *seed, &["seq", "bn"])?;
            let cfg = SimulationConfig {
                dataset_id: dataset_id.clone(),
                n0_grid: n0.clone(),
                replicates: *replicates,
                series_count: *series,
                sizes_per_series: *sizes_per_series,
                max_nprime: Some(*max_nprime),
                hyper: CvArgs { seed: *seed, folds: OUTER_FOLDS, budget: *budget }.hyper(),
                seed: *seed,
                ..Default::default()
            };
            run.seed("simulation", *seed);
            let result = run.phase("simulate", || simulate_part1(&population, &synths, &cfg))?;
            let mut records = String::from("dataset_id,generative_model,n0,imbalance,dof,baseline_auc,label\n");
            for r in &result.records {
                let f = &r.features;
                records.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.dataset_id, r.generative_model, f.n0, f.imbalance, f.dof, f.baseline_auc, r.label as u8
                ));
            }
            let mut evals = String::from("n0,replicate,synthesizer,series,n_prime,auc\n");
            for e in &result.evaluations {
                evals.push_str(&format!("{},{},{},{},{},{}\n", e.n0, e.replicate, e.synthesizer, e.series, e.n_prime, e.auc));
            }
            println!("{} evaluations, {} records", result.total_evaluations(), result.records.len());
            run.write("records.csv", records)?;
            run.write("evaluations.csv", evals)?;
            run.write_json("simulation.json", &result)?;
            if *fit_model {
                match run.phase("decision-model", || train_decision(&result.records)) {
                    Ok(trained) => {
                        let loocv = loocv_by_group(&result.records).ok();
                        run.write_json("decision_model.json", &trained.model)?;
                        run.write_json("decision_fit.json", &serde_json::json!({ "fit": trained, "loocv": loocv }))?;
                    }
                    Err(Error::Degenerate(m)) => eprintln!("no decision model fitted: {m}"),
                    Err(e) => return Err(e),
                }
            }
        }
    }
    run.finish()
}

/// Insert `--flag value` pairs from the `--config` file for flags not given
/// on the command line. Keys are long flag names without dashes; `true`
/// sets a switch and arrays repeat the flag.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>> {
    let pos = argv.iter().position(|a| a == "--config" || a.starts_with("--config="));
    let Some(pos) = pos else { return Ok(argv) };
    let path = match argv[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => argv.get(pos + 1).cloned().ok_or_else(|| Error::Usage("--config needs a file".into()))?,
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let map: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("config {path}: {e}")))?;
    let sub = argv
        .iter()
        .enumerate()
        .skip(1)
        .find(|(i, a)| !a.starts_with('-') && (*i == 1 || !argv[*i - 1].starts_with("--") || argv[*i - 1].contains('=')))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Usage("no subcommand".into()))?;
    let given = |k: &str| argv.iter().any(|a| a == &format!("--{k}") || a.starts_with(&format!("--{k}=")));
    let scalar = |v: &serde_json::Value| match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    let mut extra = Vec::new();
    for (k, v) in &map {
        if given(k) || k == "config" {
            continue;
        }
        match v {
            serde_json::Value::Bool(true) => extra.push(format!("--{k}")),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Array(items) => {
                for item in items {
                    extra.push(format!("--{k}={}", scalar(item)));
                }
            }
            other => extra.push(format!("--{k}={}", scalar(other))),
        }
    }
    let mut out = argv[..=sub].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[sub + 1..]);
    Ok(out)
}

/// Run the command line and return the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(Error::Usage(m)) => {
            eprintln!("usage: {m}");
            return 2;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let threads = cli.threads.map(|t| t as usize);
    match crate::par::with_threads(threads, || execute(&cli, &argv)) {
        Ok(()) => 0,
        Err(Error::Usage(m)) => {
            eprintln!("usage: {m}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
