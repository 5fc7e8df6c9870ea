//! Probability vectors, label vectors and the descending ranking shared by
//! every classifier family.
//!
//! Labels are indexed from 0; index `i` corresponds to label `i + 1` in the
//! usual one-based notation. Ranking ties are broken by ascending index.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regression vector `eta(x)` (or an estimate of it) at one feature point.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbVector {
    values: Vec<f64>,
}

impl ProbVector {
    /// Validates that `values` is non-empty, finite and inside `[0, 1]`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::InvalidProbability { index, value });
        }
        Ok(Self { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    /// All-zero vector of `labels` entries, used as a reusable buffer.
    pub fn zeros(labels: usize) -> Result<Self> {
        if labels == 0 {
            return Err(Error::EmptyVector);
        }
        Ok(Self {
            values: vec![0.0; labels],
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Mutable access for in-crate writers that uphold the `[0, 1]` invariant.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

impl<'de> Deserialize<'de> for ProbVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        ProbVector::new(values).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Binary prediction or label vector in `{0, 1}^L`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelVector {
    bits: Vec<bool>,
}

impl LabelVector {
    pub fn zeros(labels: usize) -> Self {
        Self {
            bits: vec![false; labels],
        }
    }

    pub fn ones(labels: usize) -> Self {
        Self {
            bits: vec![true; labels],
        }
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Builds a vector from 0/1 integers, rejecting anything else.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .enumerate()
            .map(|(index, &b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                value => Err(Error::InvalidLabel { index, value }),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bools)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, label: usize) -> bool {
        self.bits[label]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| u8::from(b)).collect()
    }

    /// Number of predicted labels, the l0 norm.
    pub fn sparsity(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// True when every label set in `other` is also set in `self`.
    pub fn dominates(&self, other: &LabelVector) -> bool {
        self.len() == other.len() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| a || !b)
    }
}

impl fmt::Display for LabelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &b) in self.bits.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Permutation of label indices sorting a [`ProbVector`] in non-increasing
/// order; `order()[0]` is the most probable label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    order: Vec<usize>,
}

impl Ranking {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The `k` highest-ranked labels.
    pub fn top(&self, k: usize) -> &[usize] {
        &self.order[..k.min(self.order.len())]
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.order
    }
}

/// Descending-value order with ties resolved towards the smaller index.
#[inline]
pub(crate) fn descending(values: &[f64], a: usize, b: usize) -> Ordering {
    values[b].total_cmp(&values[a]).then(a.cmp(&b))
}

/// Writes the full descending ranking of `values` into `order`.
pub(crate) fn rank_into(values: &[f64], order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..values.len());
    order.sort_unstable_by(|&a, &b| descending(values, a, b));
}

/// Ranks the labels of `v` by decreasing probability.
pub fn rank_descending(v: &ProbVector) -> Ranking {
    let mut order = Vec::with_capacity(v.len());
    rank_into(v.as_slice(), &mut order);
    Ranking { order }
}
