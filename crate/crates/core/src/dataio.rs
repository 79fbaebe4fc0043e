//! Synthetic finite tasks with known ground truth, sampling, and IDX (MNIST) ingestion.

use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::FinitePD;
use crate::error::{invalid, Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTaskSpec {
    pub card_x: usize,
    pub card_y: usize,
    pub embed_dim: usize,
    /// Symmetric Dirichlet concentration of each conditional; 0 gives one-hot rows.
    pub conditional_sharpness: f64,
    pub seed: u64,
}

/// Uniform q_X, Dirichlet conditionals, and a random unit-vector embedding per feature.
pub fn make_synthetic(spec: &SyntheticTaskSpec) -> Result<FinitePD> {
    if spec.card_x < 2 || spec.card_y < 2 {
        return Err(invalid("synthetic tasks need at least two features and two labels"));
    }
    if spec.embed_dim == 0 {
        return Err(invalid("embedding dimension must be positive"));
    }
    let sharp = spec.conditional_sharpness;
    if !(sharp >= 0.0) || !sharp.is_finite() {
        return Err(invalid(format!("conditional sharpness must be >= 0, got {sharp}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let px = 1.0 / spec.card_x as f64;
    let gamma = if sharp > 0.0 {
        Some(Gamma::new(sharp, 1.0).map_err(|e| invalid(e.to_string()))?)
    } else {
        None
    };
    let mut joint = Vec::with_capacity(spec.card_x);
    for _ in 0..spec.card_x {
        let draws: Vec<f64> = match &gamma {
            Some(g) => (0..spec.card_y).map(|_| g.sample(&mut rng)).collect(),
            None => (0..spec.card_y).map(|_| rng.random::<f64>()).collect(),
        };
        let sum: f64 = draws.iter().sum();
        let row: Vec<f64> = if gamma.is_some() && sum > 0.0 {
            draws.iter().map(|d| px * d / sum).collect()
        } else {
            // one-hot at the argmax (also the fallback when every gamma draw underflows)
            let arg = argmax(&draws);
            (0..spec.card_y).map(|y| if y == arg { px } else { 0.0 }).collect()
        };
        joint.push(row);
    }
    let embedding = (0..spec.card_x)
        .map(|_| {
            let v: Vec<f64> = (0..spec.embed_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.into_iter().map(|a| a / n).collect()
        })
        .collect();
    FinitePD::new(joint, embedding)
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(i, _)| i)
}

/// `n` i.i.d. `(x, y)` pairs by inverse-CDF sampling of the flattened joint.
pub fn sample(q: &FinitePD, n: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(JointSampler::new(q).draw(n, &mut rng))
}

/// Precomputed cumulative table for repeated sampling from one distribution.
#[derive(Debug, Clone)]
pub struct JointSampler {
    cdf: Vec<f64>,
    card_y: usize,
    last_nonzero: usize,
}

impl JointSampler {
    pub fn new(q: &FinitePD) -> Self {
        let mut acc = 0.0;
        let cdf: Vec<f64> = q
            .joint_flat()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last_nonzero = q.joint_flat().iter().rposition(|p| *p > 0.0).unwrap_or(0);
        Self { cdf, card_y: q.card_y(), last_nonzero }
    }

    pub fn draw<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<(usize, usize)> {
        (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * self.cdf.last().copied().unwrap_or(1.0);
                let cell = self.cdf.partition_point(|c| *c <= u).min(self.last_nonzero);
                (cell / self.card_y, cell % self.card_y)
            })
            .collect()
    }
}

/// Labelled real-valued inputs for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// Embeds sampled feature indices through `q`'s feature embedding.
    pub fn from_samples(q: &FinitePD, samples: &[(usize, usize)]) -> Self {
        Self {
            inputs: samples.iter().map(|&(x, _)| q.embedding(x).to_vec()).collect(),
            labels: samples.iter().map(|&(_, y)| y).collect(),
            num_classes: q.card_y(),
        }
    }

    pub fn from_idx(ds: &IdxDataset) -> Self {
        Self {
            inputs: ds.images.clone(),
            labels: ds.labels.iter().map(|&l| l as usize).collect(),
            num_classes: 10,
        }
    }
}

/// Images scaled to [0, 1] with their byte labels.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxDataset {
    pub rows: usize,
    pub cols: usize,
    /// One flattened `rows × cols` image per entry.
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl IdxDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format { offset, message: "truncated header".into() })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let found = read_u32(bytes, 0)?;
    if found != expected {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic: expected {expected:#010x}, found {found:#010x}"),
        });
    }
    Ok(())
}

fn payload(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8]> {
    match bytes.get(offset..offset + len) {
        Some(p) if bytes.len() == offset + len => Ok(p),
        Some(_) => Err(Error::Format {
            offset: offset + len,
            message: format!("{} trailing bytes after payload", bytes.len() - offset - len),
        }),
        None => Err(Error::Format {
            offset: bytes.len(),
            message: format!("truncated payload: expected {len} bytes from offset {offset}"),
        }),
    }
}

/// Parses an IDX3 image file: `(count, rows, cols, raw pixel bytes)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    check_magic(bytes, IDX_IMAGES_MAGIC)?;
    let n = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    Ok((n, rows, cols, payload(bytes, 16, n * rows * cols)?))
}

/// Parses an IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    check_magic(bytes, IDX_LABELS_MAGIC)?;
    let n = read_u32(bytes, 4)? as usize;
    let labels = payload(bytes, 8, n)?;
    if let Some(i) = labels.iter().position(|&l| l >= 10) {
        return Err(Error::Format {
            offset: 8 + i,
            message: format!("label {} out of range 0..10", labels[i]),
        });
    }
    Ok(labels)
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<IdxDataset> {
    let img_bytes = fs::read(images_path)?;
    let lbl_bytes = fs::read(labels_path)?;
    let (n, rows, cols, pixels) = parse_idx_images(&img_bytes)?;
    let labels = parse_idx_labels(&lbl_bytes)?;
    if labels.len() != n {
        return Err(Error::Format {
            offset: 4,
            message: format!("image count {n} does not match label count {}", labels.len()),
        });
    }
    let size = rows * cols;
    let images = (0..n)
        .map(|i| pixels[i * size..(i + 1) * size].iter().map(|&b| b as f64 / 255.0).collect())
        .collect();
    Ok(IdxDataset { rows, cols, images, labels: labels.to_vec() })
}

pub fn encode_idx_images(ds: &IdxDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + ds.len() * ds.rows * ds.cols);
    out.extend(IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend((ds.len() as u32).to_be_bytes());
    out.extend((ds.rows as u32).to_be_bytes());
    out.extend((ds.cols as u32).to_be_bytes());
    for img in &ds.images {
        out.extend(img.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend(IDX_LABELS_MAGIC.to_be_bytes());
    out.extend((labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_idx(ds: &IdxDataset, images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<()> {
    fs::write(images_path, encode_idx_images(ds))?;
    fs::write(labels_path, encode_idx_labels(&ds.labels))?;
    Ok(())
}

/// Seeded choice of `per_class` items for each of the ten labels, in original order.
pub fn subsample(ds: &IdxDataset, per_class: usize, seed: u64) -> Result<IdxDataset> {
    if per_class == 0 {
        return Err(invalid("per-class sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::with_capacity(10 * per_class);
    for class in 0..10u8 {
        let members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
        if members.len() < per_class {
            return Err(invalid(format!(
                "class {class} has {} items, fewer than the requested {per_class}",
                members.len()
            )));
        }
        let mut chosen: Vec<usize> =
            index::sample(&mut rng, members.len(), per_class).into_iter().map(|k| members[k]).collect();
        chosen.sort_unstable();
        keep.extend(chosen);
    }
    Ok(IdxDataset {
        rows: ds.rows,
        cols: ds.cols,
        images: keep.iter().map(|&i| ds.images[i].clone()).collect(),
        labels: keep.iter().map(|&i| ds.labels[i]).collect(),
    })
}
