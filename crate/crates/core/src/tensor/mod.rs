//! Dense complex tensors over binary indices.
//!
//! Data is stored last-index-fastest: the element for multi-index
//! `(i_0, ..., i_{r-1})` sits at offset `sum_k i_k << (r - 1 - k)`. Complex
//! values are interleaved `(re, im)` pairs of `f32`.

mod dump;
mod kernel;
mod permute;

use std::fmt;

use half::f16;
use num_complex::Complex32;
use rand::Rng;
use thiserror::Error;

pub use dump::{read_tensor, write_tensor};
pub use kernel::{
    contract_fused, contract_fused_with_stats, contract_naive, KernelConfig, KernelStats,
};

/// Largest rank a tensor may have.
pub const MAX_RANK: usize = 34;

/// Identifier of a binary tensor index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(pub u32);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Precision {
    /// `f32` storage; products accumulate in `f64`.
    #[default]
    Single,
    /// Intermediate tensors stored as scaled `f16`.
    Mixed,
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Precision::Single),
            "mixed" => Ok(Precision::Mixed),
            other => Err(format!(
                "unknown precision `{other}` (expected single or mixed)"
            )),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Single => "single",
            Precision::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("data length {len} does not match rank {rank}")]
    LengthMismatch { rank: usize, len: usize },
    #[error("label {0} appears twice")]
    DuplicateLabel(Label),
    #[error("label {0} not present")]
    MissingLabel(Label),
    #[error("new label order is not a permutation of the tensor labels")]
    LabelMismatch,
    #[error("contraction output rank {rank} exceeds the maximum {max}; slice more indices")]
    RankTooLarge { rank: usize, max: usize },
    #[error("batch of 2^{batch_log2} elements cannot hold the 2^{shared} shared block")]
    BatchTooSmall { batch_log2: usize, shared: usize },
    #[error("slice value must be 0 or 1, got {0}")]
    BadSliceValue(u8),
    #[error("tensor dump: {0}")]
    Dump(String),
}

#[derive(Clone, Debug, PartialEq)]
enum Storage {
    Single(Vec<Complex32>),
    /// Entries divided by `scale` and rounded to half precision.
    Half {
        scale: f32,
        data: Vec<[f16; 2]>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    labels: Vec<Label>,
    storage: Storage,
}

fn check_labels(labels: &[Label]) -> Result<(), TensorError> {
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(TensorError::DuplicateLabel(*l));
        }
    }
    Ok(())
}

impl Tensor {
    pub fn new(labels: Vec<Label>, data: Vec<Complex32>) -> Result<Self, TensorError> {
        check_labels(&labels)?;
        if labels.len() > MAX_RANK || data.len() != 1usize << labels.len() {
            return Err(TensorError::LengthMismatch {
                rank: labels.len(),
                len: data.len(),
            });
        }
        Ok(Self {
            labels,
            storage: Storage::Single(data),
        })
    }

    pub fn scalar(value: Complex32) -> Self {
        Self {
            labels: Vec::new(),
            storage: Storage::Single(vec![value]),
        }
    }

    pub fn from_fn(
        labels: Vec<Label>,
        f: impl FnMut(usize) -> Complex32,
    ) -> Result<Self, TensorError> {
        let len = 1usize << labels.len();
        Self::new(labels, (0..len).map(f).collect())
    }

    /// Entries with independent standard-uniform real and imaginary parts in `[-1, 1)`.
    pub fn random(labels: Vec<Label>, rng: &mut impl Rng) -> Result<Self, TensorError> {
        Self::from_fn(labels, |_| {
            Complex32::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        1 << self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn precision(&self) -> Precision {
        match self.storage {
            Storage::Single(_) => Precision::Single,
            Storage::Half { .. } => Precision::Mixed,
        }
    }

    /// Single-precision data, if the tensor is stored that way.
    pub fn data(&self) -> Option<&[Complex32]> {
        match &self.storage {
            Storage::Single(d) => Some(d),
            Storage::Half { .. } => None,
        }
    }

    pub fn to_vec(&self) -> Vec<Complex32> {
        match &self.storage {
            Storage::Single(d) => d.clone(),
            Storage::Half { scale, data } => data.iter().map(|h| widen(*h, *scale)).collect(),
        }
    }

    pub fn get(&self, offset: usize) -> Complex32 {
        match &self.storage {
            Storage::Single(d) => d[offset],
            Storage::Half { scale, data } => widen(data[offset], *scale),
        }
    }

    /// Copies `out.len()` consecutive entries starting at `offset` as `f32`.
    pub(crate) fn read_run(&self, offset: usize, out: &mut [Complex32]) {
        match &self.storage {
            Storage::Single(d) => out.copy_from_slice(&d[offset..offset + out.len()]),
            Storage::Half { scale, data } => {
                let n = out.len();
                for (o, h) in out.iter_mut().zip(&data[offset..offset + n]) {
                    *o = widen(*h, *scale);
                }
            }
        }
    }

    pub fn position(&self, label: Label) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Value of a rank-0 tensor.
    pub fn scalar_value(&self) -> Option<Complex32> {
        (self.rank() == 0).then(|| self.get(0))
    }

    /// Converts storage to the given precision.
    pub fn with_precision(self, precision: Precision) -> Tensor {
        match (precision, self.storage) {
            (Precision::Single, Storage::Half { scale, data }) => Tensor {
                labels: self.labels,
                storage: Storage::Single(data.iter().map(|h| widen(*h, scale)).collect()),
            },
            (Precision::Mixed, Storage::Single(d)) => {
                let max = d
                    .iter()
                    .fold(0.0f32, |m, z| m.max(z.re.abs()).max(z.im.abs()));
                let scale = if max > 0.0 { max } else { 1.0 };
                let inv = 1.0 / scale;
                let data = d
                    .iter()
                    .map(|z| [f16::from_f32(z.re * inv), f16::from_f32(z.im * inv)])
                    .collect();
                Tensor {
                    labels: self.labels,
                    storage: Storage::Half { scale, data },
                }
            }
            (_, storage) => Tensor {
                labels: self.labels,
                storage,
            },
        }
    }

    pub fn relabel(&mut self, from: Label, to: Label) -> Result<(), TensorError> {
        let pos = self.position(from).ok_or(TensorError::MissingLabel(from))?;
        if from != to && self.labels.contains(&to) {
            return Err(TensorError::DuplicateLabel(to));
        }
        self.labels[pos] = to;
        Ok(())
    }

    pub fn scaled(&self, alpha: Complex32) -> Tensor {
        let data = self.to_vec().into_iter().map(|z| z * alpha).collect();
        Tensor {
            labels: self.labels.clone(),
            storage: Storage::Single(data),
        }
    }

    /// Entrywise sum of two tensors with identical label order.
    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        if self.labels != other.labels {
            return Err(TensorError::LabelMismatch);
        }
        let data = self
            .to_vec()
            .into_iter()
            .zip(other.to_vec())
            .map(|(x, y)| x + y)
            .collect();
        Ok(Tensor {
            labels: self.labels.clone(),
            storage: Storage::Single(data),
        })
    }

    pub fn norm(&self) -> f64 {
        self.to_vec()
            .iter()
            .map(|z| norm_sqr64(*z))
            .sum::<f64>()
            .sqrt()
    }

    /// `||self - other|| / ||other||` after aligning `self` to `other`'s label order.
    pub fn relative_distance(&self, other: &Tensor) -> Result<f64, TensorError> {
        let aligned = self.permute(other.labels())?;
        let diff: f64 = aligned
            .to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(x, y)| norm_sqr64(x - y))
            .sum::<f64>()
            .sqrt();
        let scale = other.norm();
        Ok(if scale == 0.0 { diff } else { diff / scale })
    }

    /// Consumes the tensor, returning its entries as `f32`.
    pub fn into_vec(self) -> Vec<Complex32> {
        match self.storage {
            Storage::Single(d) => d,
            Storage::Half { .. } => self.to_vec(),
        }
    }

    /// Reorders indices so that `new_order[i]` becomes index `i`.
    pub fn permute(&self, new_order: &[Label]) -> Result<Tensor, TensorError> {
        if new_order.len() != self.rank() {
            return Err(TensorError::LabelMismatch);
        }
        let mut source = Vec::with_capacity(new_order.len());
        for l in new_order {
            let pos = self.position(*l).ok_or(TensorError::LabelMismatch)?;
            if source.contains(&pos) {
                return Err(TensorError::LabelMismatch);
            }
            source.push(pos);
        }
        if source.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let data = permute::permute_data(self, &source);
        Ok(Tensor {
            labels: new_order.to_vec(),
            storage: Storage::Single(data),
        })
    }

    /// Fixes `label` to `value`, dropping it from the tensor.
    pub fn slice(&self, label: Label, value: u8) -> Result<Tensor, TensorError> {
        if value > 1 {
            return Err(TensorError::BadSliceValue(value));
        }
        let idx = self
            .position(label)
            .ok_or(TensorError::MissingLabel(label))?;
        let bit = self.rank() - 1 - idx;
        let low = 1usize << bit;
        let mut data = vec![Complex32::new(0.0, 0.0); self.len() / 2];
        for (h, chunk) in data.chunks_mut(low).enumerate() {
            self.read_run((h << (bit + 1)) | ((value as usize) << bit), chunk);
        }
        let mut labels = self.labels.clone();
        labels.remove(idx);
        Ok(Tensor {
            labels,
            storage: Storage::Single(data),
        })
    }

    /// Slices several labels at once; `values[i]` applies to `labels[i]`.
    /// Labels not carried by the tensor are ignored.
    pub fn slice_many(&self, labels: &[Label], values: &[u8]) -> Result<Tensor, TensorError> {
        let mut out: Option<Tensor> = None;
        for (l, v) in labels.iter().zip(values) {
            let cur = out.as_ref().unwrap_or(self);
            if cur.position(*l).is_some() {
                out = Some(cur.slice(*l, *v)?);
            }
        }
        Ok(out.unwrap_or_else(|| self.clone()))
    }
}

#[inline]
fn widen(h: [f16; 2], scale: f32) -> Complex32 {
    Complex32::new(h[0].to_f32() * scale, h[1].to_f32() * scale)
}

fn norm_sqr64(z: Complex32) -> f64 {
    let (re, im) = (z.re as f64, z.im as f64);
    re * re + im * im
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn labels(ids: &[u32]) -> Vec<Label> {
        ids.iter().map(|&i| Label(i)).collect()
    }

    fn c(re: f32, im: f32) -> Complex32 {
        Complex32::new(re, im)
    }

    #[test]
    fn constructor_checks() {
        assert!(Tensor::new(labels(&[1, 1]), vec![c(0.0, 0.0); 4]).is_err());
        assert!(Tensor::new(labels(&[1, 2]), vec![c(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn identity_permutation() {
        let t = Tensor::random(labels(&[3, 1, 2]), &mut CounterRng::new(1)).unwrap();
        assert_eq!(t.permute(&labels(&[3, 1, 2])).unwrap(), t);
    }

    #[test]
    fn rank2_swap_is_transpose() {
        let t = Tensor::new(
            labels(&[0, 1]),
            vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)],
        )
        .unwrap();
        let p = t.permute(&labels(&[1, 0])).unwrap();
        assert_eq!(
            p.data().unwrap(),
            &[c(1.0, 0.0), c(3.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]
        );
    }

    #[test]
    fn permute_rejects_mismatch() {
        let t = Tensor::random(labels(&[0, 1]), &mut CounterRng::new(1)).unwrap();
        assert_eq!(t.permute(&labels(&[0, 2])), Err(TensorError::LabelMismatch));
        assert_eq!(t.permute(&labels(&[0, 0])), Err(TensorError::LabelMismatch));
        assert_eq!(t.permute(&labels(&[0])), Err(TensorError::LabelMismatch));
    }

    #[test]
    fn permutation_matches_index_oracle() {
        let mut rng = CounterRng::new(5);
        let t = Tensor::random(labels(&[0, 1, 2, 3, 4, 5]), &mut rng).unwrap();
        let order = labels(&[4, 0, 5, 2, 1, 3]);
        let p = t.permute(&order).unwrap();
        for out in 0..64usize {
            // bit of output index i -> label order[i] -> input index position
            let mut src = 0usize;
            for (i, l) in order.iter().enumerate() {
                let bit = (out >> (5 - i)) & 1;
                src |= bit << (5 - l.0 as usize);
            }
            assert_eq!(p.get(out), t.get(src));
        }
    }

    #[test]
    fn slice_sums() {
        let t = Tensor::new(labels(&[7]), vec![c(2.0, 1.0), c(3.0, -1.0)]).unwrap();
        let s0 = t.slice(Label(7), 0).unwrap().scalar_value().unwrap();
        let s1 = t.slice(Label(7), 1).unwrap().scalar_value().unwrap();
        assert_eq!(s0 + s1, c(5.0, 0.0));
    }

    #[test]
    fn slice_of_ones_sums_to_twos() {
        let t = Tensor::from_fn(labels(&[0, 1, 2]), |_| c(1.0, 0.0)).unwrap();
        let s = t
            .slice(Label(1), 0)
            .unwrap()
            .add(&t.slice(Label(1), 1).unwrap())
            .unwrap();
        assert!(s.to_vec().iter().all(|z| *z == c(2.0, 0.0)));
        assert_eq!(s.labels(), &labels(&[0, 2])[..]);
    }

    #[test]
    fn slices_reconstruct_tensor() {
        let t = Tensor::random(labels(&[0, 1, 2, 3, 4]), &mut CounterRng::new(9)).unwrap();
        let label = Label(2);
        let parts = [t.slice(label, 0).unwrap(), t.slice(label, 1).unwrap()];
        for off in 0..32usize {
            let bit = (off >> 2) & 1;
            let rest = ((off >> 3) << 2) | (off & 3);
            assert_eq!(parts[bit].get(rest), t.get(off));
        }
    }

    #[test]
    fn slice_errors() {
        let t = Tensor::random(labels(&[0]), &mut CounterRng::new(1)).unwrap();
        assert_eq!(
            t.slice(Label(4), 0),
            Err(TensorError::MissingLabel(Label(4)))
        );
        assert_eq!(t.slice(Label(0), 2), Err(TensorError::BadSliceValue(2)));
    }

    #[test]
    fn half_storage_round_trip() {
        let t = Tensor::random(labels(&[0, 1, 2, 3]), &mut CounterRng::new(2)).unwrap();
        let h = t.clone().with_precision(Precision::Mixed);
        assert_eq!(h.precision(), Precision::Mixed);
        assert!(h.relative_distance(&t).unwrap() < 1e-3);
        let back = h.with_precision(Precision::Single);
        assert!(back.relative_distance(&t).unwrap() < 1e-3);
    }
}
