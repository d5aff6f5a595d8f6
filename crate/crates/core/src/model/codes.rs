use nalgebra::DMatrix;

use crate::{DphError, Result};

/// Sign with `sgn(0) = +1`.
#[inline]
pub fn sgn(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// Hamming distance between two packed codes of equal word length.
#[inline]
pub fn hamming(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Bit-packed `±1` codes, one code of `r` bits per entity.
///
/// Bit 1 encodes `+1`, bit 0 encodes `-1`. Each code occupies
/// `ceil(r / 64)` words; padding bits past `r` are always zero so they never
/// contribute to a Hamming distance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodeMatrix {
    r: usize,
    count: usize,
    words_per_code: usize,
    words: Vec<u64>,
}

impl CodeMatrix {
    /// All codes set to `+1`.
    pub fn new(r: usize, count: usize) -> Self {
        assert!(r >= 1, "code length must be positive");
        let words_per_code = r.div_ceil(64);
        let mut words = vec![0u64; words_per_code * count];
        for e in 0..count {
            for k in 0..r {
                words[e * words_per_code + k / 64] |= 1 << (k % 64);
            }
        }
        Self {
            r,
            count,
            words_per_code,
            words,
        }
    }

    /// Packs entity-major signs (`count` codes of `r` entries each).
    pub fn from_signs(r: usize, count: usize, signs: &[i8]) -> Result<Self> {
        if signs.len() != r * count {
            return Err(DphError::Dimension(format!(
                "expected {} signs, got {}",
                r * count,
                signs.len()
            )));
        }
        let mut m = Self::new(r, count);
        for (e, code) in signs.chunks(r).enumerate() {
            for (k, &s) in code.iter().enumerate() {
                m.set(e, k, s);
            }
        }
        Ok(m)
    }

    /// Packs the signs of an `r x count` real matrix (columns are entities).
    pub fn from_dense(dense: &DMatrix<f64>) -> Self {
        let (r, count) = dense.shape();
        let mut m = Self::new(r, count);
        for e in 0..count {
            for k in 0..r {
                m.set(e, k, sgn(dense[(k, e)]));
            }
        }
        m
    }

    /// Rebuilds a matrix from raw words, validating the padding.
    pub fn from_words(r: usize, count: usize, words: Vec<u64>) -> Result<Self> {
        let words_per_code = r.div_ceil(64);
        if r == 0 || words.len() != words_per_code * count {
            return Err(DphError::Format(format!(
                "code block of {} words does not fit r={r}, count={count}",
                words.len()
            )));
        }
        if r % 64 != 0 {
            let mask = !((1u64 << (r % 64)) - 1);
            for e in 0..count {
                if words[e * words_per_code + words_per_code - 1] & mask != 0 {
                    return Err(DphError::Format(format!("padding bits set in code {e}")));
                }
            }
        }
        Ok(Self {
            r,
            count,
            words_per_code,
            words,
        })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn words_per_code(&self) -> usize {
        self.words_per_code
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Packed words of one entity's code.
    #[inline]
    pub fn code(&self, entity: usize) -> &[u64] {
        let start = entity * self.words_per_code;
        &self.words[start..start + self.words_per_code]
    }

    #[inline]
    pub fn get(&self, entity: usize, k: usize) -> i8 {
        let w = self.words[entity * self.words_per_code + k / 64];
        if (w >> (k % 64)) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn set(&mut self, entity: usize, k: usize, sign: i8) {
        let w = &mut self.words[entity * self.words_per_code + k / 64];
        if sign >= 0 {
            *w |= 1 << (k % 64);
        } else {
            *w &= !(1 << (k % 64));
        }
    }

    /// Overwrites one entity's code from `±1` signs.
    pub fn set_code(&mut self, entity: usize, signs: &[i8]) {
        debug_assert_eq!(signs.len(), self.r);
        for (k, &s) in signs.iter().enumerate() {
            self.set(entity, k, s);
        }
    }

    pub fn signs(&self, entity: usize) -> Vec<i8> {
        (0..self.r).map(|k| self.get(entity, k)).collect()
    }

    /// Entity-major signs for the whole matrix.
    pub fn to_signs(&self) -> Vec<i8> {
        (0..self.count).flat_map(|e| self.signs(e)).collect()
    }

    /// `r x count` matrix of `±1.0`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.r, self.count, |k, e| f64::from(self.get(e, k)))
    }

    /// Hamming distance between entity `a` of `self` and entity `b` of `other`.
    pub fn hamming_to(&self, a: usize, other: &CodeMatrix, b: usize) -> u32 {
        hamming(self.code(a), other.code(b))
    }

    /// Inner product of the `±1` codes: `r - 2 * hamming`.
    pub fn dot_to(&self, a: usize, other: &CodeMatrix, b: usize) -> i64 {
        self.r as i64 - 2 * i64::from(self.hamming_to(a, other, b))
    }

    /// Copies the listed entities (in order) into a new matrix.
    pub fn select(&self, entities: &[usize]) -> CodeMatrix {
        let mut words = Vec::with_capacity(entities.len() * self.words_per_code);
        for &e in entities {
            words.extend_from_slice(self.code(e));
        }
        CodeMatrix {
            r: self.r,
            count: entities.len(),
            words_per_code: self.words_per_code,
            words,
        }
    }

    /// Bytes of packed storage (one bit per dimension, rounded up to words).
    pub fn storage_bytes(&self) -> usize {
        self.words.len() * 8
    }
}
