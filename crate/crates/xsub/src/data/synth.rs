use rand_distr::{Distribution, StandardNormal};

use crate::core::{RngStream, Sample, Tensor};
use crate::data::{Dataset, DatasetDescriptor, Split};
use crate::error::{Result, XsubError};

/// Deterministic Gaussian-blob dataset: class `c` is an isotropic unit-variance
/// Gaussian centered at `separation` along the `c`-th axis. Samples are
/// emitted round-robin across classes so a prefix split stays balanced.
pub fn synth_gaussians(
    n_per_class: usize,
    d: usize,
    classes: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if d == 0 {
        return Err(XsubError::invalid("d must be >= 1"));
    }
    if classes < 2 {
        return Err(XsubError::invalid("classes must be >= 2"));
    }
    if classes > d {
        return Err(XsubError::invalid(format!(
            "classes ({classes}) must not exceed d ({d}): each class sits on its own axis"
        )));
    }
    if !(separation > 0.0) {
        return Err(XsubError::invalid("separation must be > 0"));
    }
    if n_per_class == 0 {
        return Err(XsubError::invalid("n_per_class must be >= 1"));
    }
    let mut rng = RngStream::new(seed, "synth").rng();
    let normal = StandardNormal;
    let mut samples = Vec::with_capacity(n_per_class * classes);
    for _ in 0..n_per_class {
        for class in 0..classes {
            let values: Vec<f64> = (0..d)
                .map(|j| {
                    let noise: f64 = normal.sample(&mut rng);
                    if j == class {
                        separation + noise
                    } else {
                        noise
                    }
                })
                .collect();
            samples.push(Sample::new(Tensor::new(vec![d], values)?, class));
        }
    }
    let descriptor = DatasetDescriptor::identity("synth", vec![d], classes)?;
    Dataset::new(samples, descriptor, Split::Train)
}
