use std::fs;
use std::io::Write;
use std::path::Path;

use crate::core::Tensor;
use crate::data::{denormalize, DatasetDescriptor};
use crate::error::{Result, XsubError};

/// Export a (possibly normalized) sample as binary PGM (one channel) or
/// PPM (three channels). Values are denormalized with the descriptor,
/// scaled by 255, and clipped into `[0, 255]`.
pub fn write_netpbm(x: &Tensor, desc: &DatasetDescriptor, path: impl AsRef<Path>) -> Result<()> {
    if x.shape().len() != 3 {
        return Err(XsubError::invalid(
            "netpbm export needs an [H, W, C] shaped tensor",
        ));
    }
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let magic = match c {
        1 => "P5",
        3 => "P6",
        other => {
            return Err(XsubError::invalid(format!(
                "netpbm export supports 1 or 3 channels, got {other}"
            )))
        }
    };
    let raw = denormalize(x, desc)?;
    let bytes: Vec<u8> = raw
        .values()
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let mut f = fs::File::create(path)?;
    write!(f, "{magic}\n{w} {h}\n255\n")?;
    f.write_all(&bytes)?;
    Ok(())
}
