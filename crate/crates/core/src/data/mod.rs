//! MNIST IDX loading, binary-task preparation, stratified splits and a
//! binary sample cache.

mod cache;
mod idx;

pub use cache::{read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};
pub use idx::{
    encode_idx, load_idx, parse_images, parse_labels, RawDataset, IMAGE_MAGIC, IMAGE_PIXELS,
    IMAGE_SIDE, LABEL_MAGIC,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

use crate::circuit::{amplitude_encode, EncodedSample};
use crate::error::{QcnnError, Result};

pub const DATA_DIR_ENV: &str = "QCNN_MNIST_DIR";
pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";

/// Picks the data directory from an explicit flag, then `QCNN_MNIST_DIR`.
pub fn resolve_data_dir(flag: Option<&Path>) -> Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p.to_path_buf());
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(v) if !v.is_empty() => Ok(PathBuf::from(v)),
        _ => Err(QcnnError::Config(format!(
            "no dataset directory: pass --data or set {DATA_DIR_ENV}"
        ))),
    }
}

/// Loads the training IDX pair from a directory.
pub fn load_train_dir(dir: &Path) -> Result<RawDataset> {
    load_idx(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS))
}

/// Encoded two-class task. `ids` holds each sample's index in the source
/// [`RawDataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    pub samples: Vec<EncodedSample>,
    pub ids: Vec<usize>,
    pub class_pair: (u8, u8),
    pub split_seed: u64,
}

impl BinaryDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.samples.iter().filter(|s| s.label == 1).count();
        [self.samples.len() - ones, ones]
    }

    /// First `n` samples (all when `n` exceeds the length).
    pub fn take(&self, n: usize) -> BinaryDataset {
        let n = n.min(self.len());
        BinaryDataset {
            samples: self.samples[..n].to_vec(),
            ids: self.ids[..n].to_vec(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> BinaryDataset {
        BinaryDataset {
            samples: Vec::new(),
            ids: Vec::new(),
            class_pair: self.class_pair,
            split_seed: self.split_seed,
        }
    }

    fn select(&self, idx: &[usize]) -> BinaryDataset {
        BinaryDataset {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            ids: idx.iter().map(|&i| self.ids[i]).collect(),
            ..self.clone_meta()
        }
    }
}

/// Keeps digits `a` (label 0) and `b` (label 1), encodes each row-major image
/// into `num_qubits` qubits and shuffles with `seed`.
pub fn make_binary(raw: &RawDataset, a: u8, b: u8, num_qubits: usize, seed: u64) -> Result<BinaryDataset> {
    if a == b {
        return Err(QcnnError::Config(format!("class pair needs two digits, got {a} twice")));
    }
    for d in [a, b] {
        if !raw.labels.contains(&d) {
            return Err(QcnnError::MissingClass(d));
        }
    }
    let mut ids: Vec<usize> = (0..raw.len()).filter(|&i| raw.labels[i] == a || raw.labels[i] == b).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut samples = Vec::with_capacity(ids.len());
    for &i in &ids {
        let pixels: Vec<f64> = raw.images[i].iter().map(|&p| f64::from(p)).collect();
        let label = u8::from(raw.labels[i] == b);
        samples.push(amplitude_encode(&pixels, num_qubits)?.with_label(label));
    }
    Ok(BinaryDataset {
        samples,
        ids,
        class_pair: (a, b),
        split_seed: seed,
    })
}

/// Per-split sizes from fractions: rounded, with the remainder going to the
/// test split.
pub fn split_sizes(len: usize, fractions: (f64, f64, f64)) -> Result<[usize; 3]> {
    let f = [fractions.0, fractions.1, fractions.2];
    if f.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(QcnnError::InvalidSplit(format!("fractions must be positive, got {f:?}")));
    }
    let sum: f64 = f.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(QcnnError::InvalidSplit(format!("fractions sum to {sum}, expected 1")));
    }
    let train = (f[0] * len as f64).round() as usize;
    let val = ((f[1] * len as f64).round() as usize).min(len - train.min(len));
    let train = train.min(len);
    Ok([train, val, len - train - val])
}

/// Stratified, order-preserving partition into train/validation/test.
/// Each split takes its share of each class in the dataset's existing
/// (seeded) order.
pub fn split(ds: &BinaryDataset, fractions: (f64, f64, f64)) -> Result<[BinaryDataset; 3]> {
    let sizes = split_sizes(ds.len(), fractions)?;
    let by_class: [Vec<usize>; 2] = [0u8, 1].map(|c| (0..ds.len()).filter(|&i| ds.samples[i].label == c).collect());
    let n0 = by_class[0].len();
    // class-0 quota per split: proportional, rounded, fixed up to sum to n0
    let mut q0: [usize; 3] = sizes.map(|s| ((s * n0) as f64 / ds.len().max(1) as f64).round() as usize);
    for (q, &s) in q0.iter_mut().zip(&sizes) {
        *q = (*q).min(s);
    }
    let mut total: usize = q0.iter().sum();
    let mut k = 0;
    while total != n0 {
        let s = k % 3;
        if total < n0 && q0[s] < sizes[s] {
            q0[s] += 1;
            total += 1;
        } else if total > n0 && q0[s] > 0 {
            q0[s] -= 1;
            total -= 1;
        }
        k += 1;
    }
    let mut cursor = [0usize; 2];
    let mut out: Vec<BinaryDataset> = Vec::with_capacity(3);
    for s in 0..3 {
        let take = [q0[s], sizes[s] - q0[s]];
        let mut idx = Vec::with_capacity(sizes[s]);
        for c in 0..2 {
            idx.extend_from_slice(&by_class[c][cursor[c]..cursor[c] + take[c]]);
            cursor[c] += take[c];
        }
        idx.sort_unstable();
        out.push(ds.select(&idx));
    }
    let test = out.pop().expect("three splits");
    let val = out.pop().expect("three splits");
    let train = out.pop().expect("three splits");
    Ok([train, val, test])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn synthetic(counts: &[(u8, usize)]) -> RawDataset {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for &(d, n) in counts {
            for k in 0..n {
                let mut img = vec![0u8; IMAGE_PIXELS];
                img[(k * 7 + d as usize) % IMAGE_PIXELS] = 200;
                img[(k * 13 + 1) % IMAGE_PIXELS] = 17 + d;
                images.push(img);
                labels.push(d);
            }
        }
        RawDataset { images, labels }
    }

    #[test]
    fn binary_filter_and_labels() {
        let raw = synthetic(&[(0, 30), (3, 10), (7, 25)]);
        let ds = make_binary(&raw, 0, 7, 10, 1).unwrap();
        assert_eq!(ds.len(), 55);
        assert_eq!(ds.class_counts(), [30, 25]);
        for (s, &id) in ds.samples.iter().zip(&ds.ids) {
            assert_eq!(s.label, u8::from(raw.labels[id] == 7));
            assert_eq!(s.amplitudes.len(), 1024);
            let norm: f64 = s.amplitudes.iter().map(|a| a * a).sum();
            assert!((norm - 1.0).abs() < 1e-10);
        }
        assert_eq!(ds, make_binary(&raw, 0, 7, 10, 1).unwrap());
        assert_ne!(ds.ids, make_binary(&raw, 0, 7, 10, 2).unwrap().ids);
    }

    #[test]
    fn binary_errors() {
        let mut raw = synthetic(&[(0, 3), (7, 3)]);
        assert!(make_binary(&raw, 0, 0, 10, 1).is_err());
        assert!(matches!(make_binary(&raw, 0, 5, 10, 1), Err(QcnnError::MissingClass(5))));
        raw.images[0] = vec![0; IMAGE_PIXELS];
        assert!(matches!(make_binary(&raw, 0, 7, 10, 1), Err(QcnnError::ZeroNorm)));
    }

    #[test]
    fn split_examples() {
        let raw = synthetic(&[(0, 480), (7, 520)]);
        let ds = make_binary(&raw, 0, 7, 10, 4).unwrap();
        let [tr, va, te] = split(&ds, (0.8, 0.1, 0.1)).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (800, 100, 100));
        let all: HashSet<usize> = tr.ids.iter().chain(&va.ids).chain(&te.ids).copied().collect();
        assert_eq!(all.len(), 1000);
        assert_eq!(all, ds.ids.iter().copied().collect());
        assert!(split(&ds, (0.8, 0.1, 0.2)).is_err());
        assert!(split(&ds, (1.0, 0.0, 0.0)).is_err());
        assert_eq!(split(&ds, (0.8, 0.1, 0.1)).unwrap(), [tr, va, te]);
    }

    proptest! {
        #[test]
        fn stratified_disjoint_covering(
            n0 in 1usize..120,
            n1 in 1usize..120,
            a in 0.1f64..0.8,
            b in 0.05f64..0.5,
            seed in 0u64..1000,
        ) {
            prop_assume!(a + b < 0.95);
            let raw = synthetic(&[(0, n0), (7, n1)]);
            let ds = make_binary(&raw, 0, 7, 10, seed).unwrap();
            let fr = (a, b, 1.0 - a - b);
            let sizes = split_sizes(ds.len(), fr).unwrap();
            let parts = split(&ds, fr).unwrap();
            let mut seen = HashSet::new();
            for (p, &size) in parts.iter().zip(&sizes) {
                prop_assert_eq!(p.len(), size);
                for &id in &p.ids {
                    prop_assert!(seen.insert(id));
                }
                let expect0 = size as f64 * n0 as f64 / (n0 + n1) as f64;
                prop_assert!((p.class_counts()[0] as f64 - expect0).abs() <= 2.0);
            }
            prop_assert_eq!(seen.len(), n0 + n1);
        }
    }
}
