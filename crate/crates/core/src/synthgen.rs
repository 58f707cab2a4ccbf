//! Synthetic labeled features with controlled spectral structure.
//!
//! Features are Gaussian class mixtures laid out in blocks of columns. Each
//! block has isotropic noise of its own scale and carries class means in its
//! first `signal_dims` columns. A high-variance "main" block dominates the
//! singular-value sum, so its informative directions land in the top-energy
//! subspace; a low-variance "residual" block sits below the energy cut.
//!
//! A planted trajectory varies the class-mean scale of each block per
//! checkpoint: unimodal in the main block, increasing in the residual block.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::{load_manifest, write_ftrx, CheckpointRecord, FeatureMatrix, Manifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Training rows.
    pub n: usize,
    /// Test rows, drawn from the same mixture.
    pub n_test: usize,
    pub d: usize,
    pub classes: u32,
    /// Columns carrying class means.
    pub signal_dim: usize,
    /// Norm of each class mean.
    pub signal_scale: f64,
    /// Per-coordinate noise std.
    pub noise_scale: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 || self.n_test == 0 {
            return Err(Error::invalid("synthetic spec needs n, n_test, d >= 1"));
        }
        if self.classes < 2 {
            return Err(Error::invalid("synthetic spec needs at least 2 classes"));
        }
        if self.n < self.classes as usize || self.n_test < self.classes as usize {
            return Err(Error::invalid("need at least one row per class"));
        }
        if self.signal_dim > self.d {
            return Err(Error::invalid("signal_dim exceeds d"));
        }
        if !(self.signal_scale >= 0.0 && self.noise_scale >= 0.0) {
            return Err(Error::invalid("scales must be non-negative"));
        }
        Ok(())
    }
}

/// A contiguous range of columns sharing noise and signal scale.
#[derive(Debug, Clone, PartialEq)]
struct Block {
    dims: usize,
    noise_std: f64,
    signal_dims: usize,
    signal_scale: f64,
}

/// Unit class-mean directions within `signal_dims` columns: axis vectors
/// while they last, then signed axis vectors, then random directions.
fn mean_directions(classes: usize, signal_dims: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|c| {
            let mut v = vec![0.0; signal_dims];
            if signal_dims == 0 {
                return v;
            }
            if c < signal_dims {
                v[c] = 1.0;
            } else if c < 2 * signal_dims {
                v[c - signal_dims] = -1.0;
            } else {
                for x in v.iter_mut() {
                    *x = StandardNormal.sample(rng);
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.iter_mut().for_each(|x| *x /= norm);
            }
            v
        })
        .collect()
}

fn balanced_labels(n: usize, classes: u32, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut labels: Vec<u32> = (0..n).map(|i| (i % classes as usize) as u32).collect();
    labels.shuffle(rng);
    labels
}

fn sample(
    n: usize,
    classes: u32,
    blocks: &[Block],
    directions: &[Vec<Vec<f64>>],
    rng: &mut ChaCha8Rng,
) -> Result<FeatureMatrix> {
    let d: usize = blocks.iter().map(|b| b.dims).sum();
    let labels = balanced_labels(n, classes, rng);
    let mut data = Vec::with_capacity(n * d);
    for &label in &labels {
        for (block, dirs) in blocks.iter().zip(directions) {
            let mean = &dirs[label as usize];
            for j in 0..block.dims {
                let noise: f64 = StandardNormal.sample(rng);
                let m = mean.get(j).map_or(0.0, |v| block.signal_scale * v);
                data.push((m + block.noise_std * noise) as f32);
            }
        }
    }
    FeatureMatrix::new(n, d, classes, data, labels)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const DIRECTION_STREAM: u64 = u64::MAX;

/// Train and test splits from one mixture.
pub fn gen_features(spec: &SynthSpec) -> Result<(FeatureMatrix, FeatureMatrix)> {
    spec.validate()?;
    let block = Block {
        dims: spec.d,
        noise_std: spec.noise_scale,
        signal_dims: spec.signal_dim,
        signal_scale: spec.signal_scale,
    };
    let dirs = vec![mean_directions(
        spec.classes as usize,
        spec.signal_dim,
        &mut rng_for(spec.seed, DIRECTION_STREAM),
    )];
    let mut rng = rng_for(spec.seed, 0);
    let train = sample(spec.n, spec.classes, std::slice::from_ref(&block), &dirs, &mut rng)?;
    let test = sample(spec.n_test, spec.classes, std::slice::from_ref(&block), &dirs, &mut rng)?;
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub checkpoints: usize,
    pub peak_index: usize,
    /// Sizes, class count, seed and main-block noise. `signal_dim` is used
    /// in both blocks; `signal_scale` is the main block's peak mean norm.
    pub base: SynthSpec,
    /// Width of the high-variance block; the remaining `d - main_dims`
    /// columns form the residual block.
    pub main_dims: usize,
    pub residual_noise_scale: f64,
    /// Per checkpoint `(main, residual)` class-mean norms.
    pub schedule: Vec<(f64, f64)>,
}

impl TrajectorySpec {
    /// Default geometry and schedules. The main-block signal rises linearly
    /// from 0.9× to 1× `base.signal_scale` at the peak, then falls as
    /// `1 − 0.75·√frac` to 0.25× at the last checkpoint; residual signal grows
    /// linearly from 0 to 1.5× the residual noise scale.
    pub fn planted(checkpoints: usize, peak_index: usize, base: SynthSpec) -> Self {
        let main_dims = (base.d * 3 / 8).max(base.signal_dim).min(base.d);
        let residual_noise_scale = 0.1 * base.noise_scale;
        let peak = base.signal_scale;
        let last = checkpoints.saturating_sub(1).max(1) as f64;
        let schedule = (0..checkpoints)
            .map(|t| {
                let main = if t <= peak_index {
                    let frac = if peak_index == 0 {
                        1.0
                    } else {
                        t as f64 / peak_index as f64
                    };
                    peak * (0.9 + 0.1 * frac)
                } else {
                    let span = (checkpoints - 1 - peak_index).max(1) as f64;
                    let frac = (t - peak_index) as f64 / span;
                    peak * (1.0 - 0.75 * frac.sqrt())
                };
                let residual = 1.5 * residual_noise_scale * t as f64 / last;
                (main, residual)
            })
            .collect();
        Self {
            checkpoints,
            peak_index,
            base,
            main_dims,
            residual_noise_scale,
            schedule,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.checkpoints == 0 {
            return Err(Error::invalid("trajectory needs at least one checkpoint"));
        }
        if self.peak_index >= self.checkpoints {
            return Err(Error::invalid("peak_index must be < checkpoints"));
        }
        if self.schedule.len() != self.checkpoints {
            return Err(Error::invalid("schedule length must equal checkpoints"));
        }
        if self.schedule.iter().any(|&(m, r)| !(m >= 0.0 && r >= 0.0)) {
            return Err(Error::invalid("schedule values must be non-negative"));
        }
        if self.main_dims == 0 || self.main_dims > self.base.d {
            return Err(Error::invalid("main_dims must be in 1..=d"));
        }
        if self.base.signal_dim > self.main_dims {
            return Err(Error::invalid("signal_dim exceeds main_dims"));
        }
        if self.residual_noise_scale.is_nan() || self.residual_noise_scale < 0.0 {
            return Err(Error::invalid("residual_noise_scale must be non-negative"));
        }
        Ok(())
    }

    pub fn epoch(&self, index: usize) -> u64 {
        index as u64 + 1
    }

    /// Synthetic source accuracy, strictly increasing and saturating.
    pub fn source_accuracy(&self, index: usize) -> f64 {
        let last = self.checkpoints.saturating_sub(1).max(1) as f64;
        0.30 + 0.65 * (1.0 - (-3.0 * index as f64 / last).exp())
    }

    fn blocks(&self, index: usize) -> Vec<Block> {
        let (main, residual) = self.schedule[index];
        let resid_dims = self.base.d - self.main_dims;
        let mut blocks = vec![Block {
            dims: self.main_dims,
            noise_std: self.base.noise_scale,
            signal_dims: self.base.signal_dim,
            signal_scale: main,
        }];
        if resid_dims > 0 {
            blocks.push(Block {
                dims: resid_dims,
                noise_std: self.residual_noise_scale,
                signal_dims: self.base.signal_dim.min(resid_dims),
                signal_scale: residual,
            });
        }
        blocks
    }

    /// Train and test features for one checkpoint.
    pub fn checkpoint_features(&self, index: usize) -> Result<(FeatureMatrix, FeatureMatrix)> {
        self.validate()?;
        if index >= self.checkpoints {
            return Err(Error::invalid("checkpoint index out of range"));
        }
        let blocks = self.blocks(index);
        let mut dir_rng = rng_for(self.base.seed, DIRECTION_STREAM);
        let dirs: Vec<_> = blocks
            .iter()
            .map(|b| mean_directions(self.base.classes as usize, b.signal_dims, &mut dir_rng))
            .collect();
        let mut rng = rng_for(self.base.seed, index as u64);
        let train = sample(self.base.n, self.base.classes, &blocks, &dirs, &mut rng)?;
        let test = sample(self.base.n_test, self.base.classes, &blocks, &dirs, &mut rng)?;
        Ok((train, test))
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes every checkpoint's features plus `manifest.json` into `out_dir`
/// and returns the manifest as loaded back from disk.
pub fn gen_trajectory(tspec: &TrajectorySpec, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    tspec.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut checkpoints = Vec::with_capacity(tspec.checkpoints);
    for t in 0..tspec.checkpoints {
        let (train, test) = tspec.checkpoint_features(t)?;
        let epoch = tspec.epoch(t);
        let train_name = format!("ckpt_{epoch:04}.train.ftrx");
        let test_name = format!("ckpt_{epoch:04}.test.ftrx");
        write_ftrx(&train, out_dir.join(&train_name))?;
        write_ftrx(&test, out_dir.join(&test_name))?;
        checkpoints.push(CheckpointRecord {
            epoch,
            source_accuracy: tspec.source_accuracy(t),
            train_features: train_name.into(),
            test_features: test_name.into(),
            ft_accuracy: None,
        });
    }
    let manifest = Manifest {
        name: format!(
            "synthetic trajectory (T={}, peak={}, seed={})",
            tspec.checkpoints, tspec.peak_index, tspec.base.seed
        ),
        checkpoints,
    };
    let path = out_dir.join(MANIFEST_FILE);
    manifest.save(&path)?;
    load_manifest(&path)
}
