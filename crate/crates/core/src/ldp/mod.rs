//! Bit-level randomizers and their privacy accounting.
//!
//! Three channels are provided: the multiple-encoding protocol (OME), with
//! parity-dependent survival probabilities for ones, and the symmetric and
//! optimized unary-encoding baselines (SUE/OUE). Every bit is resampled
//! independently; a record's randomness comes from its own [`RngSeed`]
//! stream so perturbation is reproducible and order independent.

mod audit;
mod params;

use alloc::format;

use rand::Rng;

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::rng::RngSeed;

pub use audit::{
    audit_max_log_ratio, empirical_flip_rates, paired_product_epsilon, FlipRates, RateEstimate,
    MIN_FLIP_TRIALS,
};
pub use params::{ome_params, oue_params, sue_params, OmeParams, UeParams, UeVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Ome,
    Sue,
    Oue,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Ome => "ome",
            Protocol::Sue => "sue",
            Protocol::Oue => "oue",
        }
    }
}

impl core::fmt::Display for Protocol {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ome" => Ok(Protocol::Ome),
            "sue" => Ok(Protocol::Sue),
            "oue" => Ok(Protocol::Oue),
            other => Err(Error::param(format!("unknown protocol {other:?}"))),
        }
    }
}

/// A randomized bit vector.
///
/// Only the randomizers in this module construct values of this type, so
/// code that accepts `Perturbed` cannot be handed clean bits by mistake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Perturbed {
    bits: BitVector,
    protocol: Option<Protocol>,
}

impl Perturbed {
    pub fn bits(&self) -> &BitVector {
        &self.bits
    }

    pub fn into_bits(self) -> BitVector {
        self.bits
    }

    pub fn label(&self) -> usize {
        self.bits.label()
    }

    /// `None` when produced by a custom-probability channel.
    pub fn protocol(&self) -> Option<Protocol> {
        self.protocol
    }
}

/// Either randomizer, resolved and ready to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Randomizer {
    Ome(OmeParams),
    Ue(UeParams),
}

impl Randomizer {
    pub fn protocol(&self) -> Option<Protocol> {
        match self {
            Randomizer::Ome(p) if !p.lambda().is_nan() => Some(Protocol::Ome),
            Randomizer::Ome(_) => None,
            Randomizer::Ue(p) => p.variant().map(|v| match v {
                UeVariant::Sue => Protocol::Sue,
                UeVariant::Oue => Protocol::Oue,
            }),
        }
    }

    pub fn sensitivity(&self) -> usize {
        match self {
            Randomizer::Ome(p) => p.sensitivity(),
            Randomizer::Ue(p) => p.sensitivity(),
        }
    }

    /// `(p1, p2, q)`; the baselines report their single `p` twice.
    pub fn probabilities(&self) -> (f64, f64, f64) {
        match self {
            Randomizer::Ome(p) => (p.p1(), p.p2(), p.q()),
            Randomizer::Ue(p) => (p.p(), p.p(), p.q()),
        }
    }

    #[inline]
    pub fn keep_one(&self, index: usize) -> f64 {
        match self {
            Randomizer::Ome(p) => p.keep_one(index),
            Randomizer::Ue(p) => p.p(),
        }
    }

    pub fn q(&self) -> f64 {
        self.probabilities().2
    }

    pub fn perturb(&self, bits: &BitVector, seed: RngSeed) -> Result<Perturbed> {
        match self {
            Randomizer::Ome(p) => perturb_ome(bits, p, seed),
            Randomizer::Ue(p) => perturb_ue(bits, p, seed),
        }
    }
}

impl From<OmeParams> for Randomizer {
    fn from(p: OmeParams) -> Self {
        Randomizer::Ome(p)
    }
}

impl From<UeParams> for Randomizer {
    fn from(p: UeParams) -> Self {
        Randomizer::Ue(p)
    }
}

/// Applies the OME channel bit by bit.
///
/// The input length must equal the channel's sensitivity `r * l`.
pub fn perturb_ome(bits: &BitVector, params: &OmeParams, seed: RngSeed) -> Result<Perturbed> {
    check_len(bits, params.sensitivity())?;
    let out = resample(bits, |i| params.keep_one(i), params.q(), seed);
    Ok(Perturbed {
        bits: out,
        protocol: Randomizer::Ome(*params).protocol(),
    })
}

/// Applies a unary-encoding channel (one `p` for every position).
///
/// Any length is accepted: `Δf` only calibrates the probabilities.
pub fn perturb_ue(bits: &BitVector, params: &UeParams, seed: RngSeed) -> Result<Perturbed> {
    let p = params.p();
    let out = resample(bits, |_| p, params.q(), seed);
    Ok(Perturbed {
        bits: out,
        protocol: Randomizer::Ue(*params).protocol(),
    })
}

fn check_len(bits: &BitVector, expected: usize) -> Result<()> {
    if bits.len() != expected {
        return Err(Error::Shape {
            expected,
            found: bits.len(),
        });
    }
    Ok(())
}

/// One uniform draw per position, in index order.
fn resample(bits: &BitVector, keep_one: impl Fn(usize) -> f64, q: f64, seed: RngSeed) -> BitVector {
    let mut rng = seed.rng();
    let mut out = BitVector::zeros(bits.len(), bits.label());
    for i in 0..bits.len() {
        let threshold = if bits.get(i) { keep_one(i) } else { q };
        let u: f64 = rng.random();
        if u < threshold {
            out.set(i, true);
        }
    }
    out
}
