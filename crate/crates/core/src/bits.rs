//! Packed, labelled bit vectors.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

/// A labelled bit vector of fixed length, packed LSB-first into `u64` words.
///
/// Bits past `len` in the last word are always zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    label: usize,
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize, label: usize) -> Self {
        Self {
            label,
            len,
            words: vec![0; len.div_ceil(WORD_BITS)],
        }
    }

    pub fn ones(len: usize, label: usize) -> Self {
        let mut v = Self {
            label,
            len,
            words: vec![u64::MAX; len.div_ceil(WORD_BITS)],
        };
        v.clear_tail();
        v
    }

    pub fn from_bools(bits: &[bool], label: usize) -> Self {
        let mut v = Self::zeros(bits.len(), label);
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
            }
        }
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn label(&self) -> usize {
        self.label
    }

    pub fn set_label(&mut self, label: usize) {
        self.label = label;
    }

    #[inline]
    pub fn get(&self, index: usize) -> bool {
        assert!(
            index < self.len,
            "bit index {index} out of range {}",
            self.len
        );
        self.words[index / WORD_BITS] >> (index % WORD_BITS) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, index: usize, value: bool) {
        assert!(
            index < self.len,
            "bit index {index} out of range {}",
            self.len
        );
        let mask = 1u64 << (index % WORD_BITS);
        let word = &mut self.words[index / WORD_BITS];
        if value {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    /// Appends the low `width` bits of `code`, most significant first.
    pub(crate) fn push_msb_first(&mut self, code: u64, width: u32) {
        for k in (0..width).rev() {
            let index = self.len;
            self.len += 1;
            if self.words.len() * WORD_BITS < self.len {
                self.words.push(0);
            }
            if code >> k & 1 == 1 {
                self.words[index / WORD_BITS] |= 1 << (index % WORD_BITS);
            }
        }
    }

    pub(crate) fn with_capacity(len: usize, label: usize) -> Self {
        Self {
            label,
            len: 0,
            words: Vec::with_capacity(len.div_ceil(WORD_BITS)),
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Indices of set bits in increasing order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            core::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * WORD_BITS + bit)
            })
        })
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.iter().collect()
    }

    /// Copies bits `[start, start + width)` out as a bool vector.
    pub fn slice(&self, start: usize, width: usize) -> Vec<bool> {
        (start..start + width).map(|i| self.get(i)).collect()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

/// Renders the bits as `0`/`1` characters (the label is not included).
impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Parses a string of `0`/`1` characters into an unlabelled (label 0) vector.
impl FromStr for BitVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut v = Self::zeros(s.len(), 0);
        for (i, c) in s.bytes().enumerate() {
            match c {
                b'0' => {}
                b'1' => v.words[i / WORD_BITS] |= 1 << (i % WORD_BITS),
                _ => {
                    return Err(Error::param(alloc::format!(
                        "bit string contains {:?} at offset {i}",
                        c as char
                    )))
                }
            }
        }
        Ok(v)
    }
}
