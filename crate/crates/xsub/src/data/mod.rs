//! Dataset ingestion (IDX, CIFAR-10 binary, synthetic Gaussians), splitting,
//! Z-score normalization, and netpbm export of perturbed samples.

mod cifar;
mod idx;
mod netpbm;
mod synth;

pub use cifar::load_cifar10_binary;
pub use idx::load_idx;
pub use netpbm::write_netpbm;
pub use synth::synth_gaussians;

use serde::{Deserialize, Serialize};

use crate::core::{Sample, Tensor};
use crate::error::{Result, XsubError};

/// Which side of the train/test split a dataset holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Shape, class count, and per-channel Z-score constants for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub shape: Vec<usize>,
    pub classes: usize,
    pub channel_means: Vec<f64>,
    pub channel_stds: Vec<f64>,
}

impl DatasetDescriptor {
    pub fn new(
        name: impl Into<String>,
        shape: Vec<usize>,
        classes: usize,
        channel_means: Vec<f64>,
        channel_stds: Vec<f64>,
    ) -> Result<Self> {
        let desc = DatasetDescriptor {
            name: name.into(),
            shape,
            classes,
            channel_means,
            channel_stds,
        };
        desc.validate()?;
        Ok(desc)
    }

    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(XsubError::invalid("descriptor needs at least 2 classes"));
        }
        let channels = self.channels();
        if self.channel_means.len() != channels || self.channel_stds.len() != channels {
            return Err(XsubError::invalid(format!(
                "descriptor has {} channels but {} means / {} stds",
                channels,
                self.channel_means.len(),
                self.channel_stds.len()
            )));
        }
        if !self.channel_stds.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(XsubError::invalid("channel stds must be strictly positive"));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        if self.shape.len() == 3 {
            self.shape[2]
        } else {
            1
        }
    }

    pub fn feature_count(&self) -> usize {
        self.shape.iter().product()
    }

    /// CIFAR-10 constants: means {0.4914, 0.4822, 0.4465},
    /// stds {0.2023, 0.1994, 0.2010} for R, G, B.
    pub fn cifar10() -> Self {
        DatasetDescriptor {
            name: "cifar10".into(),
            shape: vec![32, 32, 3],
            classes: 10,
            channel_means: vec![0.4914, 0.4822, 0.4465],
            channel_stds: vec![0.2023, 0.1994, 0.2010],
        }
    }

    /// Imagenette constants: means {0.485, 0.456, 0.406},
    /// stds {0.229, 0.224, 0.225} for R, G, B.
    pub fn imagenette() -> Self {
        DatasetDescriptor {
            name: "imagenette".into(),
            shape: vec![128, 128, 3],
            classes: 10,
            channel_means: vec![0.485, 0.456, 0.406],
            channel_stds: vec![0.229, 0.224, 0.225],
        }
    }

    /// Identity normalization (mean 0, std 1) for every channel.
    pub fn identity(name: impl Into<String>, shape: Vec<usize>, classes: usize) -> Result<Self> {
        let channels = if shape.len() == 3 { shape[2] } else { 1 };
        DatasetDescriptor::new(name, shape, classes, vec![0.0; channels], vec![1.0; channels])
    }
}

/// An immutable collection of samples with a shared descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub descriptor: DatasetDescriptor,
    pub split: Split,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, descriptor: DatasetDescriptor, split: Split) -> Result<Self> {
        descriptor.validate()?;
        for (i, s) in samples.iter().enumerate() {
            if s.data.shape() != descriptor.shape.as_slice() {
                return Err(XsubError::invalid(format!(
                    "sample {} shape {:?} does not match descriptor shape {:?}",
                    i,
                    s.data.shape(),
                    descriptor.shape
                )));
            }
            if s.label >= descriptor.classes {
                return Err(XsubError::invalid(format!(
                    "sample {} label {} out of range for {} classes",
                    i, s.label, descriptor.classes
                )));
            }
        }
        Ok(Dataset {
            samples,
            descriptor,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Deterministic split by stream order: the first `round(frac * n)`
    /// samples become the train set, the rest the test set.
    pub fn split_train_test(&self, train_fraction: f64) -> Result<(Dataset, Dataset)> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(XsubError::invalid("train_fraction must be in [0, 1]"));
        }
        let cut = ((self.len() as f64) * train_fraction).round() as usize;
        let cut = cut.min(self.len());
        let train = Dataset {
            samples: self.samples[..cut].to_vec(),
            descriptor: self.descriptor.clone(),
            split: Split::Train,
        };
        let test = Dataset {
            samples: self.samples[cut..].to_vec(),
            descriptor: self.descriptor.clone(),
            split: Split::Test,
        };
        Ok((train, test))
    }

    /// Reinterpret every sample under a new shape with equal element count.
    /// Normalization constants carry over when the channel count is
    /// unchanged, otherwise they reset to identity.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Dataset> {
        let new_channels = if shape.len() == 3 { shape[2] } else { 1 };
        let descriptor = if new_channels == self.descriptor.channels() {
            DatasetDescriptor {
                shape: shape.clone(),
                ..self.descriptor.clone()
            }
        } else {
            DatasetDescriptor::identity(
                self.descriptor.name.clone(),
                shape.clone(),
                self.descriptor.classes,
            )?
        };
        let samples = self
            .samples
            .iter()
            .map(|s| Ok(Sample::new(s.data.reshape(shape.clone())?, s.label)))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples, descriptor, self.split)
    }

    /// Apply `normalize` to every sample.
    pub fn normalized(&self) -> Result<Dataset> {
        let samples = self
            .samples
            .iter()
            .map(|s| Ok(Sample::new(normalize(&s.data, &self.descriptor)?, s.label)))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples, self.descriptor.clone(), self.split)
    }
}

/// Per-channel Z-score: `(v - mean_c) / std_c`.
pub fn normalize(x: &Tensor, desc: &DatasetDescriptor) -> Result<Tensor> {
    transform(x, desc, |v, mean, std| (v - mean) / std)
}

/// Inverse of [`normalize`]: `v * std_c + mean_c`.
pub fn denormalize(x: &Tensor, desc: &DatasetDescriptor) -> Result<Tensor> {
    transform(x, desc, |v, mean, std| v * std + mean)
}

fn transform(
    x: &Tensor,
    desc: &DatasetDescriptor,
    f: impl Fn(f64, f64, f64) -> f64,
) -> Result<Tensor> {
    if x.shape() != desc.shape.as_slice() {
        return Err(XsubError::invalid(format!(
            "tensor shape {:?} does not match descriptor shape {:?}",
            x.shape(),
            desc.shape
        )));
    }
    let channels = desc.channels();
    let out: Vec<f64> = x
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = i % channels;
            f(v, desc.channel_means[c], desc.channel_stds[c])
        })
        .collect();
    Tensor::new(x.shape().to_vec(), out)
}
