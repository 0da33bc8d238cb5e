//! Experiment configuration files.
//!
//! Flat `key = value` lines, `#` starts a comment. Unknown keys are errors.
//! Relative paths resolve against the directory holding the config file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ldprepr_core::ldp::Protocol;
use ldprepr_core::model::MlpConfig;
use ldprepr_core::CodecLayout;

use crate::error::{PipelineError, Result};

/// Overrides `base_seed` when set.
pub const SEED_ENV: &str = "LDPREPR_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Non-private baseline on z-scored real embeddings.
    Npnn,
    /// Non-private baseline on the clean fixed-point bits.
    NpnnBits,
    /// Encode, randomize, then train on the randomized bits only.
    Ldpnn,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Npnn => "npnn",
            Mode::NpnnBits => "npnn-bits",
            Mode::Ldpnn => "ldpnn",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "npnn" => Ok(Mode::Npnn),
            "npnn-bits" => Ok(Mode::NpnnBits),
            "ldpnn" => Ok(Mode::Ldpnn),
            other => Err(PipelineError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub protocol: Protocol,
    pub epsilon: f64,
    pub lambda: f64,
    /// SUE/OUE sensitivity; `2r` when unset.
    pub delta_f: Option<usize>,
    pub integer_bits: u32,
    pub fraction_bits: u32,
    /// `input_dim` and `num_classes` are ignored; they come from the data.
    pub mlp: MlpConfig,
    pub split_ratio: f64,
    pub runs: usize,
    pub base_seed: u64,
    pub input_path: PathBuf,
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Ldpnn,
            protocol: Protocol::Ome,
            epsilon: 1.0,
            lambda: 100.0,
            delta_f: None,
            integer_bits: 4,
            fraction_bits: 5,
            mlp: MlpConfig::sentiment(0, 0),
            split_ratio: 0.8,
            runs: 20,
            base_seed: 0,
            input_path: PathBuf::new(),
            output_path: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base, path)
    }

    /// Parses config text; relative paths are joined onto `base_dir` and
    /// `origin` labels error messages.
    pub fn parse(text: &str, base_dir: &Path, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut saw_input = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::parse(origin, i + 1, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value, base_dir)
                .map_err(|msg| PipelineError::parse(origin, i + 1, msg))?;
            saw_input |= key == "input_path";
        }
        if !saw_input {
            return Err(PipelineError::Config(format!(
                "{}: input_path is required",
                origin.display()
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, base_dir: &Path) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("bad value for {key}: {value:?}"))
        }
        match key {
            "mode" => self.mode = value.parse().map_err(|e: PipelineError| e.to_string())?,
            "protocol" => {
                self.protocol = value
                    .parse()
                    .map_err(|e: ldprepr_core::Error| e.to_string())?
            }
            "epsilon" => self.epsilon = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "delta_f" => self.delta_f = Some(num(key, value)?),
            "integer_bits" => self.integer_bits = num(key, value)?,
            "fraction_bits" => self.fraction_bits = num(key, value)?,
            "hidden_units" => self.mlp.hidden_units = num(key, value)?,
            "dropout_rate" => self.mlp.dropout_rate = num(key, value)?,
            "learning_rate" => self.mlp.learning_rate = num(key, value)?,
            "decay" => self.mlp.decay = num(key, value)?,
            "momentum" => self.mlp.momentum = num(key, value)?,
            "batch_size" => self.mlp.batch_size = num(key, value)?,
            "epochs" => self.mlp.epochs = num(key, value)?,
            "split_ratio" => self.split_ratio = num(key, value)?,
            "runs" => self.runs = num(key, value)?,
            "base_seed" => self.base_seed = num(key, value)?,
            "input_path" => self.input_path = base_dir.join(value),
            "output_path" => self.output_path = Some(base_dir.join(value)),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Applies [`SEED_ENV`] if it is set.
    pub fn with_env_overrides(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.base_seed = v
                .trim()
                .parse()
                .map_err(|_| PipelineError::Config(format!("{SEED_ENV}={v:?} is not a u64")))?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!(
                "split_ratio must lie in (0, 1), got {}",
                self.split_ratio
            ));
        }
        if self.runs == 0 {
            return bad("runs must be >= 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!(
                "epsilon must be finite and > 0, got {}",
                self.epsilon
            ));
        }
        if !(self.lambda >= 1.0 && self.lambda.is_finite()) {
            return bad(format!(
                "lambda must be finite and >= 1, got {}",
                self.lambda
            ));
        }
        if self.delta_f == Some(0) {
            return bad("delta_f must be > 0".into());
        }
        // Shape checks need the data; probe the rest with placeholder dims.
        self.mlp_config(1, 1).validate()?;
        CodecLayout::new(self.integer_bits, self.fraction_bits, 2)?;
        Ok(())
    }

    pub fn mlp_config(&self, input_dim: usize, num_classes: usize) -> MlpConfig {
        MlpConfig {
            input_dim,
            num_classes,
            ..self.mlp.clone()
        }
    }

    pub fn layout(&self, r: usize) -> Result<CodecLayout> {
        Ok(CodecLayout::new(self.integer_bits, self.fraction_bits, r)?)
    }

    /// Every setting as `(key, value)` in file order, for report headers.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let m = &self.mlp;
        vec![
            ("mode", self.mode.to_string()),
            ("protocol", self.protocol.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("lambda", self.lambda.to_string()),
            (
                "delta_f",
                self.delta_f.map_or_else(|| "2r".into(), |d| d.to_string()),
            ),
            ("integer_bits", self.integer_bits.to_string()),
            ("fraction_bits", self.fraction_bits.to_string()),
            ("hidden_units", m.hidden_units.to_string()),
            ("dropout_rate", m.dropout_rate.to_string()),
            ("learning_rate", m.learning_rate.to_string()),
            ("decay", m.decay.to_string()),
            ("momentum", m.momentum.to_string()),
            ("batch_size", m.batch_size.to_string()),
            ("epochs", m.epochs.to_string()),
            ("split_ratio", self.split_ratio.to_string()),
            ("runs", self.runs.to_string()),
            ("base_seed", self.base_seed.to_string()),
            ("input_path", self.input_path.display().to_string()),
            (
                "output_path",
                self.output_path
                    .as_ref()
                    .map_or_else(|| "-".into(), |p| p.display().to_string()),
            ),
        ]
    }
}
