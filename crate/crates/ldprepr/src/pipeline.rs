//! Experiment orchestration: split, encode, randomize, train, evaluate.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use ldprepr_core::codec::{encode_vector, zscore_normalize};
use ldprepr_core::ldp::{
    audit_max_log_ratio, ome_params, oue_params, paired_product_epsilon, sue_params, Perturbed,
    Protocol, Randomizer,
};
use ldprepr_core::model::{Features, Mlp, MlpConfig};
use ldprepr_core::{BitVector, CodecLayout, EmbeddingVector, RngSeed};

use crate::config::{ExperimentConfig, Mode};
use crate::error::{PipelineError, Result};
use crate::formats::{load_embeddings, write_atomically, Dataset};
use crate::report::Report;

/// Shuffles `0..n` with `seed` and cuts after `⌊n·ratio⌋` indices.
pub fn split_indices(n: usize, ratio: f64, seed: RngSeed) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(PipelineError::Config(format!("cannot split {n} records")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(PipelineError::Config(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.rng());
    let cut = (n as f64 * ratio).floor() as usize;
    let test = order.split_off(cut);
    Ok((order, test))
}

pub fn split<T: Clone>(records: &[T], ratio: f64, seed: RngSeed) -> Result<(Vec<T>, Vec<T>)> {
    let (train, test) = split_indices(records.len(), ratio, seed)?;
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| records[i].clone()).collect();
    Ok((pick(train), pick(test)))
}

/// Resolves a protocol name and budget into a ready randomizer.
///
/// OME uses sensitivity `r·l`; the baselines use `delta_f`, defaulting to `2r`.
pub fn resolve_randomizer(
    protocol: Protocol,
    epsilon: f64,
    lambda: f64,
    layout: &CodecLayout,
    delta_f: Option<usize>,
) -> Result<Randomizer> {
    let r = layout.dim();
    let delta_f = delta_f.unwrap_or(2 * r);
    Ok(match protocol {
        Protocol::Ome => ome_params(epsilon, lambda, r, layout.element_bits())?.into(),
        Protocol::Sue => sue_params(epsilon, delta_f)?.into(),
        Protocol::Oue => oue_params(epsilon, delta_f)?.into(),
    })
}

/// What crossed into the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Real,
    CleanBits,
    Perturbed(Option<Protocol>),
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Representation::Real => f.write_str("real"),
            Representation::CleanBits => f.write_str("clean-bits"),
            Representation::Perturbed(Some(p)) => write!(f, "perturbed-{p}"),
            Representation::Perturbed(None) => f.write_str("perturbed-custom"),
        }
    }
}

/// One run's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub accuracy: f64,
    pub handoffs: Vec<String>,
}

/// Seeds of run `k`: split, perturbation, weight init, shuffling.
#[derive(Debug, Clone, Copy)]
struct RunSeeds {
    split: RngSeed,
    perturb: RngSeed,
    init: RngSeed,
    shuffle: RngSeed,
}

impl RunSeeds {
    fn new(base_seed: u64, run: usize) -> Self {
        let run_seed = RngSeed::from_seed(base_seed).derive(run as u64);
        Self {
            split: run_seed.derive(0),
            perturb: run_seed.derive(1),
            init: run_seed.derive(2),
            shuffle: run_seed.derive(3),
        }
    }
}

/// Loads `config.input_path` and runs every repeat.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    let data = load_embeddings(&config.input_path)?;
    run_on_dataset(config, &data)
}

pub fn run_on_dataset(
    config: &ExperimentConfig,
    data: &Dataset<EmbeddingVector>,
) -> Result<Report> {
    config.validate()?;
    let start = Instant::now();
    let r = data.dim();
    let layout = config.layout(r)?;
    let randomizer = match config.mode {
        Mode::Ldpnn => Some(resolve_randomizer(
            config.protocol,
            config.epsilon,
            config.lambda,
            &layout,
            config.delta_f,
        )?),
        _ => None,
    };

    let outcomes = (0..config.runs)
        .into_par_iter()
        .map(|k| {
            run_once(config, data, &layout, randomizer.as_ref(), k).map_err(|e| {
                PipelineError::Run {
                    run: k,
                    source: Box::new(e),
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (train_n, test_n) = split_indices(data.len(), config.split_ratio, RngSeed::from_seed(0))
        .map(|(a, b)| (a.len(), b.len()))?;
    let mut resolved = vec![
        ("records".to_string(), data.len().to_string()),
        ("classes".into(), data.classes.to_string()),
        ("dim".into(), r.to_string()),
        ("bits".into(), layout.total_bits().to_string()),
        ("train_records".into(), train_n.to_string()),
        ("test_records".into(), test_n.to_string()),
    ];
    if let Some(rz) = &randomizer {
        resolved.extend(channel_summary(rz, layout.total_bits())?);
    }

    let mut accuracies = Vec::with_capacity(outcomes.len());
    let mut handoffs = Vec::new();
    for o in outcomes {
        accuracies.push(o.accuracy);
        handoffs.extend(o.handoffs);
    }
    Ok(Report {
        config: config
            .echo()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        resolved,
        accuracies,
        handoffs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

/// `p1/p2/q`, sensitivity and both privacy accountings of a channel applied
/// to `bits`-long vectors.
pub fn channel_summary(rz: &Randomizer, bits: usize) -> Result<Vec<(String, String)>> {
    let (p1, p2, q) = rz.probabilities();
    let mut out = vec![
        ("p1".to_string(), p1.to_string()),
        ("p2".into(), p2.to_string()),
        ("q".into(), q.to_string()),
        ("sensitivity".into(), rz.sensitivity().to_string()),
    ];
    if let Randomizer::Ome(p) = rz {
        out.push((
            "paired_product_epsilon".into(),
            paired_product_epsilon(p).to_string(),
        ));
    }
    let audit = audit_max_log_ratio(|i| rz.keep_one(i), q, bits)?;
    out.push(("max_log_ratio".into(), audit.to_string()));
    Ok(out)
}

fn run_once(
    config: &ExperimentConfig,
    data: &Dataset<EmbeddingVector>,
    layout: &CodecLayout,
    randomizer: Option<&Randomizer>,
    k: usize,
) -> Result<RunOutcome> {
    let seeds = RunSeeds::new(config.base_seed, k);
    let (train_idx, test_idx) = split_indices(data.len(), config.split_ratio, seeds.split)?;
    if train_idx.is_empty() {
        return Err(PipelineError::Config(
            "split leaves no training records".into(),
        ));
    }
    let mlp = |input_dim| config.mlp_config(input_dim, data.classes);

    match (config.mode, randomizer) {
        (Mode::Npnn, _) => {
            let prep = |idx: &[usize]| -> Result<Vec<EmbeddingVector>> {
                idx.iter()
                    .map(|&i| {
                        let rec = &data.records[i];
                        Ok(EmbeddingVector::new(
                            rec.label,
                            zscore_normalize(&rec.values)?,
                        ))
                    })
                    .collect()
            };
            fit(
                mlp(layout.dim()),
                &prep(&train_idx)?,
                &prep(&test_idx)?,
                seeds,
                k,
                Representation::Real,
            )
        }
        (Mode::NpnnBits, _) => {
            let prep = |idx: &[usize]| -> Result<Vec<BitVector>> {
                idx.iter()
                    .map(|&i| Ok(encode_vector(&data.records[i], layout)?))
                    .collect()
            };
            fit(
                mlp(layout.total_bits()),
                &prep(&train_idx)?,
                &prep(&test_idx)?,
                seeds,
                k,
                Representation::CleanBits,
            )
        }
        (Mode::Ldpnn, Some(rz)) => {
            // Each record is encoded and randomized on its own stream; the
            // clean bits never outlive this closure.
            let release = |idx: &[usize]| -> Result<Vec<Perturbed>> {
                idx.par_iter()
                    .map(|&i| {
                        let clean = encode_vector(&data.records[i], layout)?;
                        Ok(rz.perturb(&clean, seeds.perturb.with_stream(i as u64))?)
                    })
                    .collect()
            };
            let (train, test) = (release(&train_idx)?, release(&test_idx)?);
            fit_private(
                mlp(layout.total_bits()),
                &train,
                &test,
                seeds,
                k,
                rz.protocol(),
            )
        }
        (Mode::Ldpnn, None) => unreachable!("ldpnn always resolves a randomizer"),
    }
}

/// The only training entry for private runs: it accepts randomized bits and
/// nothing else.
fn fit_private(
    cfg: MlpConfig,
    train: &[Perturbed],
    test: &[Perturbed],
    seeds: RunSeeds,
    k: usize,
    protocol: Option<Protocol>,
) -> Result<RunOutcome> {
    fit(
        cfg,
        train,
        test,
        seeds,
        k,
        Representation::Perturbed(protocol),
    )
}

fn fit<T: Features>(
    cfg: MlpConfig,
    train: &[T],
    test: &[T],
    seeds: RunSeeds,
    k: usize,
    repr: Representation,
) -> Result<RunOutcome> {
    if test.is_empty() {
        return Err(PipelineError::Config("split leaves no test records".into()));
    }
    let width = cfg.input_dim;
    let handoffs = [("train", train.len()), ("test", test.len())]
        .map(|(part, n)| format!("run={k} split={part} kind={repr} records={n} width={width}"))
        .to_vec();
    let mut model = Mlp::new(cfg, seeds.init)?;
    model.train(train, seeds.shuffle)?;
    let accuracy = model.evaluate(test)?;
    Ok(RunOutcome { accuracy, handoffs })
}

/// One row of the probability-curve table.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub protocol: Protocol,
    pub epsilon: f64,
    /// `None` for the baselines.
    pub lambda: Option<f64>,
    pub p1: f64,
    pub p2: f64,
    pub q: f64,
}

/// OME rows over the full `epsilons × lambdas` grid; SUE/OUE rows per epsilon
/// with `Δf = 2r` and `p` reported in both `p1` and `p2`.
pub fn probability_curves(
    protocols: &[Protocol],
    epsilons: &[f64],
    lambdas: &[f64],
    r: usize,
    l: usize,
) -> Result<Vec<CurveRow>> {
    if protocols.is_empty() || epsilons.is_empty() {
        return Err(PipelineError::Config(
            "protocol and epsilon grids must be non-empty".into(),
        ));
    }
    let mut rows = Vec::new();
    for &protocol in protocols {
        for &epsilon in epsilons {
            match protocol {
                Protocol::Ome => {
                    if lambdas.is_empty() {
                        return Err(PipelineError::Config(
                            "OME needs a non-empty lambda grid".into(),
                        ));
                    }
                    for &lambda in lambdas {
                        let p = ome_params(epsilon, lambda, r, l)?;
                        rows.push(CurveRow {
                            protocol,
                            epsilon,
                            lambda: Some(lambda),
                            p1: p.p1(),
                            p2: p.p2(),
                            q: p.q(),
                        });
                    }
                }
                Protocol::Sue | Protocol::Oue => {
                    let p = if protocol == Protocol::Sue {
                        sue_params(epsilon, 2 * r)?
                    } else {
                        oue_params(epsilon, 2 * r)?
                    };
                    rows.push(CurveRow {
                        protocol,
                        epsilon,
                        lambda: None,
                        p1: p.p(),
                        p2: p.p(),
                        q: p.q(),
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn curves_to_tsv(rows: &[CurveRow]) -> String {
    let mut out = String::from("protocol\tepsilon\tlambda\tp1\tp2\tq\n");
    for row in rows {
        let lambda = row
            .lambda
            .map_or_else(|| "-".to_string(), |l| l.to_string());
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            row.protocol, row.epsilon, lambda, row.p1, row.p2, row.q
        ));
    }
    out
}

pub fn emit_probability_curves(
    protocols: &[Protocol],
    epsilons: &[f64],
    lambdas: &[f64],
    r: usize,
    l: usize,
    out_path: impl AsRef<Path>,
) -> Result<Vec<CurveRow>> {
    let rows = probability_curves(protocols, epsilons, lambdas, r, l)?;
    let text = curves_to_tsv(&rows);
    write_atomically(out_path.as_ref(), |w| {
        std::io::Write::write_all(w, text.as_bytes())
    })?;
    Ok(rows)
}
