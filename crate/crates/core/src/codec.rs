//! Fixed-point encoding of embedding vectors.
//!
//! Every coordinate becomes `1 + m + n` bits: a sign bit (1 = negative), the
//! integer part in `m` bits and the fraction part truncated to `n` bits, both
//! big-endian. Magnitudes beyond `2^m - 2^-n` saturate. A vector's codes are
//! concatenated in coordinate order into one [`BitVector`].

use alloc::format;
use alloc::vec::Vec;

use crate::bits::BitVector;
use crate::error::{Error, Result};

/// One user's real-valued representation and its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub label: usize,
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(label: usize, values: Vec<f64>) -> Self {
        Self { label, values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Bit widths of the fixed-point code and the number of coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecLayout {
    m: u32,
    n: u32,
    r: usize,
}

impl CodecLayout {
    /// Integer and fraction widths are limited so a code fits in a `u64`
    /// and every representable value is exact in an `f64`.
    pub const MAX_PART_BITS: u32 = 26;

    pub fn new(m: u32, n: u32, r: usize) -> Result<Self> {
        if m < 1 || n < 1 {
            return Err(Error::param(format!(
                "integer and fraction widths must be >= 1 (m={m}, n={n})"
            )));
        }
        if m > Self::MAX_PART_BITS || n > Self::MAX_PART_BITS {
            return Err(Error::param(format!(
                "integer and fraction widths must be <= {} (m={m}, n={n})",
                Self::MAX_PART_BITS
            )));
        }
        if r < 1 {
            return Err(Error::param("vector length r must be >= 1"));
        }
        let layout = Self { m, n, r };
        if !layout.total_bits().is_multiple_of(2) {
            return Err(Error::param(format!(
                "r*l = {} must be even",
                layout.total_bits()
            )));
        }
        Ok(layout)
    }

    /// 4 integer bits and 5 fraction bits (10 bits per coordinate).
    pub fn standard(r: usize) -> Result<Self> {
        Self::new(4, 5, r)
    }

    pub fn integer_bits(&self) -> u32 {
        self.m
    }

    pub fn fraction_bits(&self) -> u32 {
        self.n
    }

    /// Bits per coordinate, `l = 1 + m + n`.
    pub fn element_bits(&self) -> usize {
        (1 + self.m + self.n) as usize
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    /// Length of an encoded vector, `r * l`.
    pub fn total_bits(&self) -> usize {
        self.r * self.element_bits()
    }

    /// Largest representable magnitude, `2^m - 2^-n`.
    pub fn max_magnitude(&self) -> f64 {
        (1u64 << self.m) as f64 - self.resolution()
    }

    /// Quantization step, `2^-n`.
    pub fn resolution(&self) -> f64 {
        1.0 / (1u64 << self.n) as f64
    }

    /// Saturates `x` to the representable range.
    pub fn clamp(&self, x: f64) -> f64 {
        let max = self.max_magnitude();
        x.clamp(-max, max)
    }
}

/// An `l`-bit code stored in the low bits of a word, sign bit highest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointCode {
    word: u64,
    width: u32,
}

impl FixedPointCode {
    pub fn word(&self) -> u64 {
        self.word
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Bits in transmission order (sign first).
    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.width)
            .rev()
            .map(|k| self.word >> k & 1 == 1)
            .collect()
    }
}

impl core::fmt::Display for FixedPointCode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for b in self.to_bools() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Z-scores one vector against its own mean and population standard deviation.
///
/// A constant vector maps to all zeros.
pub fn zscore_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "z-score needs at least 2 values, got {}",
            values.len()
        )));
    }
    check_finite(values)?;
    let len = values.len() as f64;
    let mean = values.iter().sum::<f64>() / len;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len;
    let std = libm::sqrt(var);
    if std == 0.0 {
        return Ok(alloc::vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - mean) / std).collect())
}

pub fn encode_value(x: f64, layout: &CodecLayout) -> Result<FixedPointCode> {
    if !x.is_finite() {
        return Err(Error::InvalidValue { index: 0, value: x });
    }
    Ok(encode_finite(x, layout))
}

fn encode_finite(x: f64, layout: &CodecLayout) -> FixedPointCode {
    let (m, n) = (layout.m, layout.n);
    // -0.0 < 0.0 is false, so negative zero takes sign 0.
    let sign = u64::from(x < 0.0);
    let magnitude = libm::fabs(x).min(layout.max_magnitude());
    let int_part = libm::floor(magnitude);
    // Both steps are exact: the fractional remainder of a double and a
    // power-of-two scaling lose no bits.
    let frac_part = libm::floor((magnitude - int_part) * (1u64 << n) as f64);
    let word = sign << (m + n) | (int_part as u64) << n | frac_part as u64;
    FixedPointCode {
        word,
        width: 1 + m + n,
    }
}

pub fn decode_value(bits: &[bool], layout: &CodecLayout) -> Result<f64> {
    let l = layout.element_bits();
    if bits.len() != l {
        return Err(Error::Shape {
            expected: l,
            found: bits.len(),
        });
    }
    let word = bits.iter().fold(0u64, |acc, &b| acc << 1 | u64::from(b));
    Ok(decode_word(word, layout))
}

fn decode_word(word: u64, layout: &CodecLayout) -> f64 {
    let (m, n) = (layout.m, layout.n);
    let int_part = (word >> n) & ((1u64 << m) - 1);
    let frac_part = word & ((1u64 << n) - 1);
    let magnitude = int_part as f64 + frac_part as f64 * layout.resolution();
    if word >> (m + n) & 1 == 1 {
        -magnitude
    } else {
        magnitude
    }
}

/// Normalizes `vec`, encodes every coordinate and concatenates the codes.
pub fn encode_vector(vec: &EmbeddingVector, layout: &CodecLayout) -> Result<BitVector> {
    if vec.values.len() != layout.r {
        return Err(Error::Shape {
            expected: layout.r,
            found: vec.values.len(),
        });
    }
    let normalized = zscore_normalize(&vec.values)?;
    encode_normalized(&normalized, vec.label, layout)
}

/// Concatenates codes of already-normalized values without re-normalizing.
pub fn encode_normalized(values: &[f64], label: usize, layout: &CodecLayout) -> Result<BitVector> {
    if values.len() != layout.r {
        return Err(Error::Shape {
            expected: layout.r,
            found: values.len(),
        });
    }
    check_finite(values)?;
    let width = layout.element_bits() as u32;
    let mut out = BitVector::with_capacity(layout.total_bits(), label);
    for &v in values {
        out.push_msb_first(encode_finite(v, layout).word, width);
    }
    Ok(out)
}

/// Decodes each `l`-bit slice of an encoded vector.
pub fn decode_vector(bits: &BitVector, layout: &CodecLayout) -> Result<EmbeddingVector> {
    if bits.len() != layout.total_bits() {
        return Err(Error::Shape {
            expected: layout.total_bits(),
            found: bits.len(),
        });
    }
    let l = layout.element_bits();
    let values = (0..layout.r)
        .map(|i| {
            let word = (i * l..(i + 1) * l).fold(0u64, |acc, k| acc << 1 | u64::from(bits.get(k)));
            decode_word(word, layout)
        })
        .collect();
    Ok(EmbeddingVector::new(bits.label(), values))
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::InvalidValue {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}
