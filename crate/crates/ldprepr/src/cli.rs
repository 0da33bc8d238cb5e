//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use ldprepr_core::codec::{encode_vector, zscore_normalize};
use ldprepr_core::ldp::{
    empirical_flip_rates, ome_params, oue_params, sue_params, Protocol, Randomizer,
};
use ldprepr_core::model::{Mlp, MlpConfig};
use ldprepr_core::{BitVector, CodecLayout, EmbeddingVector, RngSeed};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, SEED_ENV};
use crate::error::PipelineError;
use crate::formats::{self, FileKind};
use crate::pipeline::{channel_summary, emit_probability_curves, run_experiment, split};
use crate::synth::{generate, SynthSpec};

#[derive(Debug, Parser)]
#[command(
    name = "ldprepr",
    version,
    about = "Locally private text representations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the randomization probabilities of a protocol.
    Probs(ChannelArgs),
    /// Z-score and fixed-point encode an embedding file into a bit file.
    Encode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        integer_bits: u32,
        #[arg(long, default_value_t = 5)]
        fraction_bits: u32,
    },
    /// Randomize every record of a bit file.
    Perturb {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        channel: ChannelArgs,
        /// Base seed; record i uses stream i.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the classifier on an embedding or bit file and report test accuracy.
    Train(TrainArgs),
    /// Run a configured experiment and write its report.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Report path; overrides output_path from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the probability table over epsilon and lambda grids.
    Curves {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [Protocol::Ome, Protocol::Sue, Protocol::Oue])]
        protocols: Vec<Protocol>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 5.0, 10.0])]
        epsilons: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 10.0, 50.0, 100.0])]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        r: usize,
        #[arg(long, default_value_t = 10)]
        l: usize,
    },
    /// Privacy accounting of a channel, optionally with Monte Carlo flip rates.
    Audit {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Bernoulli trials per transition probability.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate the synthetic two-class embedding file.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        records: usize,
        #[arg(long, default_value_t = 50)]
        dim: usize,
        #[arg(long, default_value_t = SynthSpec::default().seed)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct ChannelArgs {
    #[arg(long)]
    protocol: Protocol,
    #[arg(long)]
    epsilon: f64,
    /// OME randomization factor.
    #[arg(long, default_value_t = 100.0)]
    lambda: f64,
    /// Embedding dimension.
    #[arg(long)]
    r: Option<usize>,
    /// Bits per coordinate.
    #[arg(long)]
    l: Option<usize>,
    /// Baseline sensitivity; defaults to 2r.
    #[arg(long)]
    delta_f: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    /// Held-out file; without it the training file is split.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    split_ratio: f64,
    #[arg(long, default_value_t = 128)]
    hidden_units: usize,
    #[arg(long, default_value_t = 0.5)]
    dropout_rate: f64,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1e-6)]
    decay: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Usage(String),
    Runtime(PipelineError),
}

impl<E: Into<PipelineError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

/// Runs the CLI and returns the process exit code: 0 on success, 1 on a
/// runtime error, 2 on a usage error.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "ldprepr: usage error: {msg}");
            2
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "ldprepr: error: {}", one_line(&e));
            1
        }
    }
}

fn one_line(e: &dyn std::error::Error) -> String {
    let mut msg = e.to_string();
    // Io and Run variants carry their cause in source(); keep it on the same line.
    let mut cause = e.source();
    while let Some(c) = cause {
        let s = c.to_string();
        if !msg.contains(&s) {
            msg.push_str(": ");
            msg.push_str(&s);
        }
        cause = c.source();
    }
    msg.replace('\n', " ")
}

fn seed_or_env(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={v:?} is not a u64"))),
        Err(_) => Ok(0),
    }
}

/// Resolves the channel for vectors of `bits` length (when known).
fn channel(args: &ChannelArgs, bits: Option<usize>) -> CliResult<Randomizer> {
    match args.protocol {
        Protocol::Ome => {
            let rl = match (args.r, args.l, bits) {
                (Some(r), Some(l), _) => r * l,
                (_, _, Some(n)) => n,
                _ => return Err(Failure::Usage("ome needs --r and --l".into())),
            };
            Ok(ome_params(args.epsilon, args.lambda, rl, 1)?.into())
        }
        Protocol::Sue | Protocol::Oue => {
            let delta_f = match (args.delta_f, args.r) {
                (Some(d), _) => d,
                (None, Some(r)) => 2 * r,
                (None, None) => {
                    return Err(Failure::Usage(format!(
                        "{} needs --delta-f or --r (delta_f = 2r)",
                        args.protocol
                    )))
                }
            };
            let params = if args.protocol == Protocol::Sue {
                sue_params(args.epsilon, delta_f)?
            } else {
                oue_params(args.epsilon, delta_f)?
            };
            Ok(params.into())
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> CliResult {
    match command {
        Command::Probs(args) => {
            let rz = channel(&args, None)?;
            let (p1, p2, q) = rz.probabilities();
            writeln!(out, "protocol = {}", args.protocol).map_err(io_out)?;
            writeln!(out, "p1 = {p1}\np2 = {p2}\nq = {q}").map_err(io_out)?;
        }
        Command::Encode {
            input,
            out: path,
            integer_bits,
            fraction_bits,
        } => {
            let data = formats::load_embeddings(&input)?;
            let layout = CodecLayout::new(integer_bits, fraction_bits, data.dim())
                .map_err(PipelineError::from)?;
            let bits = data
                .records
                .par_iter()
                .map(|rec| encode_vector(rec, &layout))
                .collect::<Result<Vec<BitVector>, _>>()?;
            formats::write_bits(&path, data.classes, &bits)?;
            writeln!(
                out,
                "encoded {} records into {} bits each",
                bits.len(),
                layout.total_bits()
            )
            .map_err(io_out)?;
        }
        Command::Perturb {
            input,
            out: path,
            channel: args,
            seed,
        } => {
            let seed = RngSeed::from_seed(seed_or_env(seed)?);
            // Baseline flags are checked before any file is touched.
            let early = match args.protocol {
                Protocol::Ome => None,
                _ => Some(channel(&args, None)?),
            };
            let data = formats::load_bits(&input)?;
            let rz = match early {
                Some(rz) => rz,
                None => channel(&args, Some(data.bit_len()))?,
            };
            let noisy = data
                .records
                .par_iter()
                .enumerate()
                .map(|(i, rec)| {
                    rz.perturb(rec, seed.with_stream(i as u64))
                        .map(|p| p.into_bits())
                })
                .collect::<Result<Vec<BitVector>, _>>()?;
            formats::write_bits(&path, data.classes, &noisy)?;
            writeln!(
                out,
                "perturbed {} records with {}",
                noisy.len(),
                args.protocol
            )
            .map_err(io_out)?;
        }
        Command::Train(args) => train(args, out)?,
        Command::Experiment {
            config,
            out: report_path,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?.with_env_overrides()?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(p) = report_path {
                cfg.output_path = Some(p);
            }
            let report = run_experiment(&cfg)?;
            match &cfg.output_path {
                Some(p) => report.write(p)?,
                None => out.write_all(report.to_text().as_bytes()).map_err(io_out)?,
            }
            writeln!(
                out,
                "mean_accuracy = {} std_accuracy = {} runs = {}",
                report.mean_accuracy(),
                report.std_accuracy(),
                report.accuracies.len()
            )
            .map_err(io_out)?;
        }
        Command::Curves {
            out: path,
            protocols,
            epsilons,
            lambdas,
            r,
            l,
        } => {
            let rows = emit_probability_curves(&protocols, &epsilons, &lambdas, r, l, &path)?;
            writeln!(out, "wrote {} rows to {}", rows.len(), path.display()).map_err(io_out)?;
        }
        Command::Audit {
            channel: args,
            trials,
            seed,
        } => {
            let rz = channel(&args, None)?;
            let bits = match (args.r, args.l) {
                (Some(r), Some(l)) => r * l,
                _ => rz.sensitivity(),
            };
            for (k, v) in channel_summary(&rz, bits)? {
                writeln!(out, "{k} = {v}").map_err(io_out)?;
            }
            if let Some(trials) = trials {
                let rates = empirical_flip_rates(&rz, trials, RngSeed::from_seed(seed))?;
                for r in &rates.rates {
                    writeln!(
                        out,
                        "empirical_{} = {} (analytic {}, stderr {}, z {:.3})",
                        r.name,
                        r.estimate(),
                        r.analytic,
                        r.analytic_std_error(),
                        r.z_score()
                    )
                    .map_err(io_out)?;
                }
            }
        }
        Command::Synth {
            out: path,
            records,
            dim,
            seed,
        } => {
            let spec = SynthSpec {
                records,
                dim,
                seed,
                ..SynthSpec::default()
            };
            if records < 2 || dim < 2 {
                return Err(Failure::Usage(
                    "synth needs --records >= 2 and --dim >= 2".into(),
                ));
            }
            let data = generate(&spec);
            formats::write_embeddings(&path, &data)?;
            writeln!(
                out,
                "wrote {} records of dim {dim} to {}",
                data.len(),
                path.display()
            )
            .map_err(io_out)?;
        }
    }
    Ok(())
}

fn io_out(e: std::io::Error) -> Failure {
    Failure::Runtime(PipelineError::io("<stdout>", e))
}

enum Loaded {
    Real(formats::Dataset<EmbeddingVector>),
    Bits(formats::Dataset<BitVector>),
}

fn load_any(path: &std::path::Path) -> CliResult<Loaded> {
    Ok(match formats::sniff(path)? {
        FileKind::Embeddings => {
            let mut d = formats::load_embeddings(path)?;
            for rec in &mut d.records {
                rec.values = zscore_normalize(&rec.values).map_err(PipelineError::from)?;
            }
            Loaded::Real(d)
        }
        FileKind::Bits => Loaded::Bits(formats::load_bits(path)?),
    })
}

fn train(args: TrainArgs, out: &mut dyn Write) -> CliResult {
    let seed = RngSeed::from_seed(seed_or_env(args.seed)?);
    let train = load_any(&args.train)?;
    let test = args.test.as_deref().map(load_any).transpose()?;
    let mlp = |input_dim, num_classes| MlpConfig {
        input_dim,
        hidden_units: args.hidden_units,
        num_classes,
        dropout_rate: args.dropout_rate,
        learning_rate: args.learning_rate,
        decay: args.decay,
        momentum: args.momentum,
        batch_size: args.batch_size,
        epochs: args.epochs,
    };
    let accuracy = match (train, test) {
        (Loaded::Real(a), Some(Loaded::Real(b))) => fit_eval(
            mlp(a.dim(), a.classes.max(b.classes)),
            &a.records,
            &b.records,
            seed,
        )?,
        (Loaded::Bits(a), Some(Loaded::Bits(b))) => fit_eval(
            mlp(a.bit_len(), a.classes.max(b.classes)),
            &a.records,
            &b.records,
            seed,
        )?,
        (Loaded::Real(a), None) => {
            let (tr, te) = split_records(&a.records, args.split_ratio, seed)?;
            fit_eval(mlp(a.dim(), a.classes), &tr, &te, seed)?
        }
        (Loaded::Bits(a), None) => {
            let (tr, te) = split_records(&a.records, args.split_ratio, seed)?;
            fit_eval(mlp(a.bit_len(), a.classes), &tr, &te, seed)?
        }
        _ => {
            return Err(Failure::Usage(
                "--train and --test must both be embedding files or both bit files".into(),
            ))
        }
    };
    writeln!(out, "accuracy = {accuracy}").map_err(io_out)?;
    Ok(())
}

fn split_records<T: Clone>(
    records: &[T],
    ratio: f64,
    seed: RngSeed,
) -> CliResult<(Vec<T>, Vec<T>)> {
    Ok(split(records, ratio, seed.derive(0))?)
}

fn fit_eval<T: ldprepr_core::model::Features>(
    cfg: MlpConfig,
    train: &[T],
    test: &[T],
    seed: RngSeed,
) -> CliResult<f64> {
    let mut model = Mlp::new(cfg, seed.derive(2)).map_err(PipelineError::from)?;
    model
        .train(train, seed.derive(3))
        .map_err(PipelineError::from)?;
    Ok(model.evaluate(test).map_err(PipelineError::from)?)
}
