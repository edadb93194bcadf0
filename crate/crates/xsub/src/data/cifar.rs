use std::fs;
use std::path::Path;

use crate::core::{Sample, Tensor};
use crate::data::{Dataset, DatasetDescriptor, Split};
use crate::error::{Result, XsubError};

const RECORD_BYTES: usize = 3073; // 1 label byte + 32*32*3 pixel bytes
const PLANE: usize = 1024;

/// Load a CIFAR-10 binary batch file.
///
/// Each 3073-byte record is one label byte followed by channel-planar
/// R, G, B pixel bytes; output tensors are `[32, 32, 3]` row-major with
/// interleaved channels, scaled into `[0, 1]`.
pub fn load_cifar10_binary(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.is_empty() || bytes.len() % RECORD_BYTES != 0 {
        return Err(XsubError::format(format!(
            "{}: size {} is not a positive multiple of {}",
            path.display(),
            bytes.len(),
            RECORD_BYTES
        )));
    }
    let descriptor = DatasetDescriptor::cifar10();
    let mut samples = Vec::with_capacity(bytes.len() / RECORD_BYTES);
    for (i, record) in bytes.chunks(RECORD_BYTES).enumerate() {
        let label = record[0] as usize;
        if label > 9 {
            return Err(XsubError::format(format!(
                "{}: record {} has label byte {} > 9",
                path.display(),
                i,
                label
            )));
        }
        let pixels = &record[1..];
        let mut values = vec![0.0f64; 3072];
        for pos in 0..PLANE {
            for c in 0..3 {
                values[pos * 3 + c] = f64::from(pixels[c * PLANE + pos]) / 255.0;
            }
        }
        samples.push(Sample::new(Tensor::new(vec![32, 32, 3], values)?, label));
    }
    Dataset::new(samples, descriptor, Split::Train)
}
