//! Synthetic classification tasks, mini-batching and input jitter.

use std::f64::consts::PI;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

/// Row-major `n × dim` inputs with integer labels in `0..n_classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    n_classes: usize,
    split: Split,
}

impl Dataset {
    pub fn new(
        inputs: Vec<f64>,
        labels: Vec<usize>,
        dim: usize,
        n_classes: usize,
        split: Split,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("dataset must contain at least one example"));
        }
        if dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if inputs.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                found: inputs.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset inputs must be finite"));
        }
        Ok(Self {
            inputs,
            labels,
            dim,
            n_classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    /// Copies the rows at `indices` into a batch.
    pub fn batch(&self, indices: &[usize]) -> Result<Batch> {
        let mut seen = vec![false; self.len()];
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!(
                    "batch index {i} out of range for {} examples",
                    self.len()
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("duplicate batch index {i}")));
            }
            inputs.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Ok(Batch {
            indices: indices.to_vec(),
            inputs,
            labels,
            dim: self.dim,
        })
    }

    /// The whole dataset as one batch, in row order.
    pub fn full_batch(&self) -> Batch {
        Batch {
            indices: (0..self.len()).collect(),
            inputs: self.inputs.clone(),
            labels: self.labels.clone(),
            dim: self.dim,
        }
    }

    /// Reads a CSV with a header row. The column named `label` holds class
    /// indices; every other column is a numeric feature.
    pub fn from_csv_reader<R: Read>(reader: R, split: Split) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Csv {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let label_col = headers
            .iter()
            .position(|h| h == "label")
            .ok_or_else(|| Error::Csv {
                line: 1,
                message: "header has no `label` column".into(),
            })?;
        let dim = headers.len() - 1;
        if dim == 0 {
            return Err(Error::Csv {
                line: 1,
                message: "no feature columns".into(),
            });
        }
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Csv {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.len() != headers.len() {
                return Err(Error::Csv {
                    line,
                    message: format!("expected {} fields, found {}", headers.len(), record.len()),
                });
            }
            for (col, field) in record.iter().enumerate() {
                if col == label_col {
                    let label: usize = field.parse().map_err(|_| Error::Csv {
                        line,
                        message: format!("label `{field}` is not a non-negative integer"),
                    })?;
                    labels.push(label);
                } else {
                    let v: f64 = field.parse().map_err(|_| Error::Csv {
                        line,
                        message: format!("column `{}`: `{field}` is not a number", &headers[col]),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Csv {
                            line,
                            message: format!("column `{}`: non-finite value", &headers[col]),
                        });
                    }
                    inputs.push(v);
                }
            }
        }
        if labels.is_empty() {
            return Err(Error::Csv {
                line: 1,
                message: "no data rows".into(),
            });
        }
        let n_classes = labels.iter().max().copied().unwrap_or(0) + 1;
        if n_classes > 1 << 20 {
            return Err(Error::Csv {
                line: 1,
                message: format!("implausible class count {n_classes}"),
            });
        }
        Self::new(inputs, labels, dim, n_classes.max(2), split)
    }

    pub fn from_csv_str(text: &str, split: Split) -> Result<Self> {
        Self::from_csv_reader(text.as_bytes(), split)
    }

    pub fn from_csv_path(path: &std::path::Path, split: Split) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(std::io::BufReader::new(file), split)
    }
}

/// A materialized subset of a dataset. Mutating a batch never touches the
/// dataset it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    indices: Vec<usize>,
    inputs: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
}

impl Batch {
    /// Builds a batch directly from rows; indices are `0..n`.
    pub fn from_rows(inputs: Vec<f64>, labels: Vec<usize>, dim: usize) -> Result<Self> {
        if dim == 0 || inputs.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                found: inputs.len(),
            });
        }
        Ok(Self {
            indices: (0..labels.len()).collect(),
            inputs,
            labels,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }
}

/// `k` unit-variance Gaussian blobs in `d` dimensions, labels assigned
/// round-robin. When `d >= k` the class means are the simplex vertices
/// `separation / √2 · e_c`, so every pair of means is `separation` apart.
/// With fewer dimensions than classes the means wrap onto `±e_{c mod d}`.
pub fn make_gaussians(
    n: usize,
    k: usize,
    d: usize,
    separation: f64,
    stream: &mut RngStream,
    split: Split,
) -> Result<Dataset> {
    if n == 0 || k == 0 || d == 0 {
        return Err(Error::invalid("n, k and d must be positive"));
    }
    let scale = separation / std::f64::consts::SQRT_2;
    let mean = |c: usize| -> Vec<f64> {
        let mut m = vec![0.0; d];
        let wrap = c / d;
        let sign = if wrap.is_multiple_of(2) { 1.0 } else { -1.0 };
        m[c % d] = sign * scale * (1 + wrap / 2) as f64;
        m
    };
    let means: Vec<Vec<f64>> = (0..k).map(mean).collect();
    let mut inputs = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        for &mu in &means[c] {
            inputs.push(stream.gaussian(mu, 1.0)?);
        }
        labels.push(c);
    }
    Dataset::new(inputs, labels, d, k.max(2), split)
}

/// Radius of a spiral arm at fractional position `s ∈ [0, 1]`.
pub const SPIRAL_INNER_RADIUS: f64 = 0.05;

/// Point on arm `arm` (0 or 1) at fractional position `s`. The arms are
/// Archimedean spirals rotated by π relative to each other.
pub fn spiral_point(s: f64, arm: usize, turns: f64) -> (f64, f64) {
    let angle = 2.0 * PI * turns * s + arm as f64 * PI;
    let radius = SPIRAL_INNER_RADIUS + (1.0 - SPIRAL_INNER_RADIUS) * s;
    (radius * angle.cos(), radius * angle.sin())
}

/// Two interleaved spirals; label = arm. Positions along each arm are
/// uniform draws, and `noise` adds isotropic Gaussian jitter.
pub fn make_spirals(
    n: usize,
    turns: f64,
    noise: f64,
    stream: &mut RngStream,
    split: Split,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if !(turns > 0.0) || !(noise >= 0.0) {
        return Err(Error::invalid("turns must be > 0 and noise >= 0"));
    }
    let mut inputs = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let arm = i % 2;
        let s = stream.uniform01();
        let (x, y) = spiral_point(s, arm, turns);
        inputs.push(x + stream.gaussian(0.0, noise)?);
        inputs.push(y + stream.gaussian(0.0, noise)?);
        labels.push(arm);
    }
    Dataset::new(inputs, labels, 2, 2, split)
}

/// Adds N(0, sigma²) noise to every input entry of a copy of `batch`.
pub fn augment_jitter(batch: &Batch, sigma: f64, stream: &mut RngStream) -> Result<Batch> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("jitter sigma must be >= 0, got {sigma}")));
    }
    let mut out = batch.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    for v in &mut out.inputs {
        *v += stream.gaussian(0.0, sigma)?;
    }
    Ok(out)
}

/// One epoch of mini-batches over a deterministic shuffle. The final partial
/// batch is kept; `batch_size >= n` yields a single full batch.
pub fn batches(data: &Dataset, batch_size: usize, stream: &mut RngStream) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be >= 1"));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    stream.shuffle(&mut order);
    order.chunks(batch_size).map(|idx| data.batch(idx)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nearest_mean_accuracy(data: &Dataset, means: &[Vec<f64>]) -> f64 {
        let mut correct = 0;
        for i in 0..data.len() {
            let x = data.row(i);
            let best = means
                .iter()
                .enumerate()
                .map(|(c, m)| {
                    let d: f64 = x.iter().zip(m).map(|(a, b)| (a - b).powi(2)).sum();
                    (c, d)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap()
                .0;
            if best == data.labels()[i] {
                correct += 1;
            }
        }
        correct as f64 / data.len() as f64
    }

    fn class_means(data: &Dataset) -> Vec<Vec<f64>> {
        let mut sums = vec![vec![0.0; data.dim()]; data.n_classes()];
        let mut counts = vec![0usize; data.n_classes()];
        for i in 0..data.len() {
            let c = data.labels()[i];
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(data.row(i)) {
                *s += v;
            }
        }
        sums.into_iter()
            .zip(counts)
            .map(|(s, c)| s.into_iter().map(|v| v / c.max(1) as f64).collect())
            .collect()
    }

    #[test]
    fn separated_gaussians_are_linearly_separable() {
        let mut s = RngStream::new(1, "g");
        let data = make_gaussians(600, 3, 3, 100.0, &mut s, Split::Train).unwrap();
        let means = class_means(&data);
        assert_eq!(nearest_mean_accuracy(&data, &means), 1.0);
    }

    #[test]
    fn zero_separation_is_chance() {
        let k = 4;
        let train = make_gaussians(20_000, k, 3, 0.0, &mut RngStream::new(2, "a"), Split::Train)
            .unwrap();
        let test = make_gaussians(20_000, k, 3, 0.0, &mut RngStream::new(2, "b"), Split::Train)
            .unwrap();
        let acc = nearest_mean_accuracy(&test, &class_means(&train));
        assert!((acc - 1.0 / k as f64).abs() < 0.02, "acc {acc}");
    }

    #[test]
    fn generators_are_deterministic() {
        let a = make_gaussians(50, 3, 4, 2.0, &mut RngStream::new(3, "d"), Split::Train).unwrap();
        let b = make_gaussians(50, 3, 4, 2.0, &mut RngStream::new(3, "d"), Split::Train).unwrap();
        assert_eq!(a, b);
        let a = make_spirals(50, 2.0, 0.1, &mut RngStream::new(3, "d"), Split::Train).unwrap();
        let b = make_spirals(50, 2.0, 0.1, &mut RngStream::new(3, "d"), Split::Train).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_spirals_lie_on_arms() {
        let data = make_spirals(200, 2.0, 0.0, &mut RngStream::new(4, "s"), Split::Train).unwrap();
        for i in 0..data.len() {
            let (x, y) = (data.row(i)[0], data.row(i)[1]);
            let arm = data.labels()[i];
            let r = (x * x + y * y).sqrt();
            // invert radius → s, then the angle must match the arm's parametric angle
            let s = (r - SPIRAL_INNER_RADIUS) / (1.0 - SPIRAL_INNER_RADIUS);
            assert!((0.0..=1.0 + 1e-12).contains(&s));
            let (px, py) = spiral_point(s, arm, 2.0);
            assert!((px - x).abs() < 1e-9 && (py - y).abs() < 1e-9);
        }
        // radius is monotone in the arm parameter
        let mut prev = 0.0;
        for j in 0..=100 {
            let (x, y) = spiral_point(j as f64 / 100.0, 0, 2.0);
            let r = (x * x + y * y).sqrt();
            assert!(r > prev);
            prev = r;
        }
    }

    #[test]
    fn jitter_identity_and_labels() {
        let data = make_spirals(10, 1.0, 0.0, &mut RngStream::new(5, "s"), Split::Train).unwrap();
        let batch = data.full_batch();
        let mut s = RngStream::new(5, "j");
        assert_eq!(augment_jitter(&batch, 0.0, &mut s).unwrap(), batch);
        let noisy = augment_jitter(&batch, 3.0, &mut s).unwrap();
        assert_eq!(noisy.labels(), batch.labels());
        assert_ne!(noisy.inputs(), batch.inputs());
        assert_eq!(data.full_batch(), batch);
        assert!(augment_jitter(&batch, -1.0, &mut s).is_err());
    }

    #[test]
    fn jitter_stddev_matches_sigma() {
        let sigma = 0.3;
        let inputs = vec![1.0; 100_000];
        let labels = vec![0; 100_000];
        let batch = Batch::from_rows(inputs, labels, 1).unwrap();
        let noisy = augment_jitter(&batch, sigma, &mut RngStream::new(6, "j")).unwrap();
        let d: Vec<f64> = noisy.inputs().iter().map(|v| v - 1.0).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
        assert!((sd - sigma).abs() < 0.02 * sigma, "sd {sd}");
    }

    #[test]
    fn batches_partition_each_epoch() {
        let data = make_spirals(103, 1.0, 0.0, &mut RngStream::new(7, "s"), Split::Train).unwrap();
        let bs = batches(&data, 10, &mut RngStream::new(7, "shuffle")).unwrap();
        assert_eq!(bs.len(), 11);
        assert_eq!(bs.last().unwrap().len(), 3);
        let mut all: Vec<usize> = bs.iter().flat_map(|b| b.indices().to_vec()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());

        let again = batches(&data, 10, &mut RngStream::new(7, "shuffle")).unwrap();
        assert_eq!(bs, again);

        let full = batches(&data, 1000, &mut RngStream::new(7, "shuffle")).unwrap();
        assert_eq!(full.len(), 1);
        assert_eq!(full[0].len(), 103);
        assert!(batches(&data, 0, &mut RngStream::new(7, "x")).is_err());
    }

    #[test]
    fn batch_rejects_bad_indices() {
        let data = make_spirals(4, 1.0, 0.0, &mut RngStream::new(8, "s"), Split::Train).unwrap();
        assert!(data.batch(&[0, 0]).is_err());
        assert!(data.batch(&[4]).is_err());
    }

    #[test]
    fn csv_ingestion() {
        let text = "x,label,y\n0.5,1,2\n-1,0,3.5\n";
        let d = Dataset::from_csv_str(text, Split::Validation).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.labels(), &[1, 0]);
        assert_eq!(d.row(1), &[-1.0, 3.5]);
        assert_eq!(d.split(), Split::Validation);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = Dataset::from_csv_str("x,label\n1,0\n2,zero\n", Split::Train).unwrap_err();
        assert!(matches!(err, Error::Csv { line: 3, .. }), "{err:?}");
        let err = Dataset::from_csv_str("x,label\n1,0\nfoo,1\n", Split::Train).unwrap_err();
        assert!(matches!(err, Error::Csv { line: 3, .. }), "{err:?}");
        let err = Dataset::from_csv_str("x,y\n1,0\n", Split::Train).unwrap_err();
        assert!(matches!(err, Error::Csv { line: 1, .. }));
        let err = Dataset::from_csv_str("x,label\n1,0\n1,2,3\n", Split::Train).unwrap_err();
        assert!(matches!(err, Error::Csv { line: 3, .. }), "{err:?}");
        assert!(Dataset::from_csv_str("x,label\n", Split::Train).is_err());
        assert!(Dataset::from_csv_str("x,label\ninf,0\n", Split::Train).is_err());
    }
}
