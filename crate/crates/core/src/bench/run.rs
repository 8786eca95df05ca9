use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{BiasSpec, DatasetConfig, DatasetSource, ExperimentConfig, Technique};
use crate::data::{apply_cuts, discretize_mdl, load_table, Dataset, LabeledSplit};
use crate::eval::auc_normalized;
use crate::rng::{derive_seed, hash_bytes};
use crate::ssl::{
    assemble_fit, cc_fit, cotrain_fit, reweight_expand, sample_select_fit, AssembleConfig, CCConfig, CoTrainConfig,
};
use crate::synth::{generate_artificial, split_mar, split_mcar, split_mnar, SynthSpec};
use crate::{Error, ProbabilisticModel, Result};

/// One (dataset, labeled fraction, run) cell. Every technique is fitted on
/// the split this descriptor produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunDescriptor {
    pub dataset: String,
    /// `None` for datasets with a fixed split.
    pub labeled_fraction: Option<f64>,
    pub run: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub descriptors: Vec<RunDescriptor>,
    pub techniques: Vec<Technique>,
}

impl RunPlan {
    pub fn n_records(&self) -> usize {
        self.descriptors.len() * self.techniques.len()
    }
}

/// Stable 64-bit seed of a run: FNV-1a over the dataset name, the bit
/// pattern of the fraction and the run number, keyed by the master seed and
/// finalized with SplitMix64.
pub fn child_seed(master_seed: u64, dataset: &str, fraction: Option<f64>, run: usize) -> u64 {
    let mut bytes = Vec::with_capacity(dataset.len() + 17);
    bytes.extend_from_slice(dataset.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(&fraction.map_or(u64::MAX, f64::to_bits).to_le_bytes());
    bytes.extend_from_slice(&(run as u64).to_le_bytes());
    hash_bytes(master_seed, &bytes)
}

/// Datasets × fractions × runs, in config order. A fixed-split dataset
/// contributes a single descriptor.
pub fn plan_runs(cfg: &ExperimentConfig) -> Result<RunPlan> {
    cfg.validate()?;
    let mut descriptors = Vec::new();
    for d in &cfg.datasets {
        if d.fixed_split {
            descriptors.push(RunDescriptor {
                dataset: d.name.clone(),
                labeled_fraction: None,
                run: 0,
                seed: child_seed(cfg.master_seed, &d.name, None, 0),
            });
            continue;
        }
        for &f in &cfg.splits {
            for run in 0..cfg.n_runs {
                descriptors.push(RunDescriptor {
                    dataset: d.name.clone(),
                    labeled_fraction: Some(f),
                    run,
                    seed: child_seed(cfg.master_seed, &d.name, Some(f), run),
                });
            }
        }
    }
    Ok(RunPlan {
        descriptors,
        techniques: cfg.resolved_techniques()?,
    })
}

/// One technique scored on one descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub dataset: String,
    pub technique: String,
    pub labeled_fraction: f64,
    pub run: usize,
    pub seed: u64,
    /// Normalized AUC on the test set; NaN (written as `null`) when the fit
    /// failed.
    #[serde(with = "nan_as_null")]
    pub auc: f64,
    pub wall_time: f64,
    pub model_meta: BTreeMap<String, Value>,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl ResultRecord {
    fn key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dataset
            .cmp(&other.dataset)
            .then_with(|| self.technique.cmp(&other.technique))
            .then_with(|| self.labeled_fraction.total_cmp(&other.labeled_fraction))
            .then_with(|| self.run.cmp(&other.run))
    }
}

pub fn sort_records(records: &mut [ResultRecord]) {
    records.sort_by(ResultRecord::key_cmp);
}

pub fn write_jsonl(records: &[ResultRecord], mut out: impl Write) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<results>", e))?;
    }
    Ok(())
}

pub fn save_jsonl(records: &[ResultRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_jsonl(records, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(input: impl BufRead) -> Result<Vec<ResultRecord>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<results>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(std::io::BufReader::new(f))
}

/// A dataset's training and test tables.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub config: DatasetConfig,
    pub train: Dataset,
    pub test: Dataset,
}

pub fn load_dataset(d: &DatasetConfig) -> Result<LoadedDataset> {
    let (train, test) = match &d.source {
        DatasetSource::Generated {
            generate,
            train_size,
            test_size,
            seed,
        } => {
            let spec = SynthSpec::from_name(generate)?
                .with_sizes(*train_size, *test_size)
                .with_seed(*seed);
            let a = generate_artificial(&spec)?;
            (a.train, a.test)
        }
        DatasetSource::Files { train, test } => (load_table(train)?, load_table(test)?),
    };
    if train.meta() != test.meta() || train.n_classes() != test.n_classes() {
        return Err(Error::InvalidDataset(format!(
            "dataset `{}`: training and test schemas differ (fix nominal arities with `cat:N`)",
            d.name
        )));
    }
    if !test.is_fully_labeled() {
        return Err(Error::InvalidDataset(format!(
            "dataset `{}`: unlabeled test rows",
            d.name
        )));
    }
    if !d.fixed_split && !train.is_fully_labeled() {
        return Err(Error::InvalidDataset(format!(
            "dataset `{}`: unlabeled training rows need `fixed_split = true`",
            d.name
        )));
    }
    Ok(LoadedDataset {
        config: d.clone(),
        train: train.with_name(d.name.clone()),
        test: test.with_name(d.name.clone()),
    })
}

fn make_split(ds: &LoadedDataset, desc: &RunDescriptor) -> Result<LabeledSplit> {
    let data = &ds.train;
    let Some(f) = desc.labeled_fraction else {
        return Ok(LabeledSplit::from_labels(data));
    };
    let seed = derive_seed(desc.seed, "split");
    match &ds.config.bias {
        None | Some(BiasSpec::Mcar) => split_mcar(data, f, seed),
        Some(BiasSpec::Mar { features: (i, j) }) => split_mar(data, *i, *j, 1.0 - f),
        Some(BiasSpec::Mnar { rho }) => split_mnar(data, *rho, f, seed),
    }
}

/// Training data with unlabeled rows masked, discretized on the labeled
/// rows, plus the identically binned test set.
struct Prepared {
    raw: Dataset,
    binned: Dataset,
    test_raw: Dataset,
    test_binned: Dataset,
    split: LabeledSplit,
}

fn prepare(ds: &LoadedDataset, desc: &RunDescriptor) -> Result<Prepared> {
    let split = make_split(ds, desc)?;
    let raw = split.mask(&ds.train)?;
    let map = discretize_mdl(&raw, split.labeled())?;
    let binned = apply_cuts(&raw, &map)?;
    let test_binned = apply_cuts(&ds.test, &map)?;
    Ok(Prepared {
        raw,
        binned,
        test_raw: ds.test.clone(),
        test_binned,
        split,
    })
}

fn score(model: &dyn ProbabilisticModel, test: &Dataset) -> Result<f64> {
    let scores = test.rows().map(|r| model.score(r)).collect::<Result<Vec<_>>>()?;
    let positive: Vec<bool> = (0..test.n_rows()).map(|i| test.label(i) == Some(1)).collect();
    auc_normalized(&scores, &positive)
}

fn fit_and_score(t: &Technique, p: &Prepared, seed: u64, meta: &mut BTreeMap<String, Value>) -> Result<f64> {
    let (data, split, test) = (&p.binned, &p.split, &p.test_binned);
    match t {
        Technique::Supervised { base } => score(&base.fit_labeled(data, split.labeled())?, test),
        Technique::Assemble { init, alpha, base } => {
            let cfg = AssembleConfig {
                alpha: *alpha,
                init: *init,
                base: *base,
                seed,
                ..Default::default()
            };
            let m = assemble_fit(data, split, &cfg)?;
            meta.insert("iterations".into(), json!(m.models.len()));
            score(&m, test)
        }
        Technique::SampleSelect { base } => score(&sample_select_fit(data, split, base)?, test),
        Technique::Reweight { base, n_bins } => {
            let r = reweight_expand(data, split, base, *n_bins, seed)?;
            meta.insert("added".into(), json!(r.added.len()));
            score(&r, test)
        }
        Technique::CoTrain { confidence } => {
            let cfg = CoTrainConfig {
                confidence: *confidence,
                seed,
                ..Default::default()
            };
            let m = cotrain_fit(data, split, &cfg)?;
            meta.insert("rounds".into(), json!(m.n_rounds()));
            score(&m, test)
        }
        Technique::Cc { m } => {
            let c = CCConfig {
                m: *m,
                seed,
                ..Default::default()
            };
            let model = cc_fit(&p.raw, split, c.m, c.max_iter, c.tol, c.seed)?;
            meta.insert("iterations".into(), json!(model.iterations));
            meta.insert("converged".into(), json!(model.converged));
            score(&model, &p.test_raw)
        }
    }
}

/// Runs every technique on one descriptor. Failures become NaN records with
/// an `error` note.
pub fn execute_descriptor(
    ds: &LoadedDataset,
    desc: &RunDescriptor,
    techniques: &[Technique],
    timing: bool,
) -> Vec<ResultRecord> {
    let prepared = prepare(ds, desc);
    let fraction = match (&prepared, desc.labeled_fraction) {
        (_, Some(f)) => f,
        (Ok(p), None) => p.split.labeled_fraction(),
        (Err(_), None) => f64::NAN,
    };
    techniques
        .iter()
        .map(|t| {
            let label = t.label();
            let mut meta = BTreeMap::new();
            let start = Instant::now();
            let outcome = match &prepared {
                Ok(p) => {
                    meta.insert("labeled".into(), json!(p.split.labeled().len()));
                    meta.insert("unlabeled".into(), json!(p.split.unlabeled().len()));
                    fit_and_score(t, p, derive_seed(desc.seed, &label), &mut meta).map_err(|e| e.to_string())
                }
                Err(e) => Err(format!("split: {e}")),
            };
            let wall_time = if timing { start.elapsed().as_secs_f64() } else { 0.0 };
            let auc = outcome.unwrap_or_else(|e| {
                meta.insert("error".into(), json!(e));
                f64::NAN
            });
            ResultRecord {
                dataset: desc.dataset.clone(),
                technique: label,
                labeled_fraction: fraction,
                run: desc.run,
                seed: desc.seed,
                auc,
                wall_time,
                model_meta: meta,
            }
        })
        .collect()
}

/// How descriptors are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Serial,
    /// Rayon pool with the given worker count (all cores when `None`).
    /// Without the `parallel` feature this runs serially.
    Parallel {
        threads: Option<usize>,
    },
}

impl Execution {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        match cfg.threads {
            Some(1) => Execution::Serial,
            threads => Execution::Parallel { threads },
        }
    }
}

/// Loads every dataset named in the plan once.
pub fn load_datasets(cfg: &ExperimentConfig) -> Result<BTreeMap<String, LoadedDataset>> {
    cfg.datasets
        .iter()
        .map(|d| Ok((d.name.clone(), load_dataset(d)?)))
        .collect()
}

/// Executes the plan and returns the records sorted by
/// (dataset, technique, labeled_fraction, run).
pub fn execute_plan(plan: &RunPlan, cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    execute_plan_with(plan, cfg, Execution::from_config(cfg))
}

pub fn execute_plan_with(plan: &RunPlan, cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<ResultRecord>> {
    let datasets = load_datasets(cfg)?;
    execute_loaded(plan, &datasets, cfg.timing, exec)
}

pub fn execute_loaded(
    plan: &RunPlan,
    datasets: &BTreeMap<String, LoadedDataset>,
    timing: bool,
    exec: Execution,
) -> Result<Vec<ResultRecord>> {
    for d in &plan.descriptors {
        if !datasets.contains_key(&d.dataset) {
            return Err(Error::Config(format!("dataset `{}` is not loaded", d.dataset)));
        }
    }
    let one = |d: &RunDescriptor| execute_descriptor(&datasets[&d.dataset], d, &plan.techniques, timing);
    let nested: Vec<Vec<ResultRecord>> = match exec {
        Execution::Serial => plan.descriptors.iter().map(one).collect(),
        Execution::Parallel { threads } => run_parallel(&plan.descriptors, threads, one)?,
    };
    let mut records: Vec<ResultRecord> = nested.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}

#[cfg(feature = "parallel")]
fn run_parallel<F>(descriptors: &[RunDescriptor], threads: Option<usize>, f: F) -> Result<Vec<Vec<ResultRecord>>>
where
    F: Fn(&RunDescriptor) -> Vec<ResultRecord> + Sync + Send,
{
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| descriptors.par_iter().map(&f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<F>(descriptors: &[RunDescriptor], _threads: Option<usize>, f: F) -> Result<Vec<Vec<ResultRecord>>>
where
    F: Fn(&RunDescriptor) -> Vec<ResultRecord> + Sync + Send,
{
    Ok(descriptors.iter().map(f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::TechniqueConfig;

    fn cfg(datasets: usize, splits: Vec<f64>, runs: usize) -> ExperimentConfig {
        ExperimentConfig {
            master_seed: 11,
            n_runs: runs,
            splits,
            threads: None,
            timing: false,
            datasets: (0..datasets)
                .map(|i| DatasetConfig {
                    name: format!("d{i}"),
                    source: DatasetSource::Generated {
                        generate: "30_80_00_20".into(),
                        train_size: 300,
                        test_size: 200,
                        seed: i as u64,
                    },
                    bias: None,
                    fixed_split: false,
                })
                .collect(),
            techniques: vec![TechniqueConfig::named("cc")],
        }
    }

    #[test]
    fn plan_is_cartesian_and_deterministic() {
        let c = cfg(10, crate::bench::config::DEFAULT_SPLITS.to_vec(), 10);
        let p = plan_runs(&c).unwrap();
        assert_eq!(p.descriptors.len(), 500);
        assert_eq!(p, plan_runs(&c).unwrap());
        let mut seeds: Vec<u64> = p.descriptors.iter().map(|d| d.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 500);
        let single = plan_runs(&cfg(1, vec![0.5], 1)).unwrap();
        assert_eq!(single.descriptors.len(), 1);
        assert_eq!(single.techniques.len(), 2);
    }

    #[test]
    fn seeds_do_not_depend_on_order() {
        let mut c = cfg(3, vec![0.1, 0.5], 2);
        let a = plan_runs(&c).unwrap();
        c.datasets.reverse();
        c.splits.reverse();
        let b = plan_runs(&c).unwrap();
        for d in &a.descriptors {
            assert!(b.descriptors.contains(d));
        }
    }

    #[test]
    fn nan_round_trips_as_null() {
        let r = ResultRecord {
            dataset: "d".into(),
            technique: "cc:m=6".into(),
            labeled_fraction: 0.1,
            run: 0,
            seed: 1,
            auc: f64::NAN,
            wall_time: 0.0,
            model_meta: BTreeMap::new(),
        };
        let mut buf = Vec::new();
        write_jsonl(std::slice::from_ref(&r), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"auc\":null"), "{text}");
        let back = read_jsonl(&buf[..]).unwrap();
        assert!(back[0].auc.is_nan());
        assert_eq!(back[0].technique, r.technique);
    }
}
