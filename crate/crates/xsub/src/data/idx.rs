use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};

use crate::core::{Sample, Tensor};
use crate::data::{Dataset, DatasetDescriptor, Split};
use crate::error::{Result, XsubError};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Load an IDX image/label file pair (the MNIST container format).
///
/// Pixel bytes are scaled into `[0, 1]`; images come out shaped `[H, W, 1]`.
pub fn load_idx(image_path: impl AsRef<Path>, label_path: impl AsRef<Path>) -> Result<Dataset> {
    let images = read_images(image_path.as_ref())?;
    let labels = read_labels(label_path.as_ref())?;
    if images.len() != labels.len() {
        return Err(XsubError::format(format!(
            "IDX image count {} does not match label count {}",
            images.len(),
            labels.len()
        )));
    }
    let (h, w) = images
        .first()
        .map(|t| (t.shape()[0], t.shape()[1]))
        .unwrap_or((0, 0));
    if h == 0 || w == 0 {
        return Err(XsubError::format("IDX file contains no images"));
    }
    let classes = labels.iter().copied().max().unwrap_or(0).max(1) + 1;
    let descriptor = DatasetDescriptor::identity("idx", vec![h, w, 1], classes)?;
    let samples = images
        .into_iter()
        .zip(labels)
        .map(|(data, label)| Sample::new(data, label))
        .collect();
    Dataset::new(samples, descriptor, Split::Train)
}

fn read_images(path: &Path) -> Result<Vec<Tensor>> {
    let mut cur = Cursor::new(fs::read(path)?);
    let magic = read_u32(&mut cur, path)?;
    if magic != IMAGE_MAGIC {
        return Err(XsubError::format(format!(
            "{}: bad IDX image magic {magic:#010x}",
            path.display()
        )));
    }
    let count = read_u32(&mut cur, path)? as usize;
    let h = read_u32(&mut cur, path)? as usize;
    let w = read_u32(&mut cur, path)? as usize;
    let mut pixels = vec![0u8; count * h * w];
    cur.read_exact(&mut pixels)
        .map_err(|_| XsubError::format(format!("{}: truncated IDX image file", path.display())))?;
    pixels
        .chunks(h * w)
        .map(|chunk| {
            let values = chunk.iter().map(|b| f64::from(*b) / 255.0).collect();
            Tensor::new(vec![h, w, 1], values)
        })
        .collect()
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut cur = Cursor::new(fs::read(path)?);
    let magic = read_u32(&mut cur, path)?;
    if magic != LABEL_MAGIC {
        return Err(XsubError::format(format!(
            "{}: bad IDX label magic {magic:#010x}",
            path.display()
        )));
    }
    let count = read_u32(&mut cur, path)? as usize;
    let mut labels = vec![0u8; count];
    cur.read_exact(&mut labels)
        .map_err(|_| XsubError::format(format!("{}: truncated IDX label file", path.display())))?;
    Ok(labels.into_iter().map(usize::from).collect())
}

fn read_u32(cur: &mut Cursor<Vec<u8>>, path: &Path) -> Result<u32> {
    cur.read_u32::<BigEndian>()
        .map_err(|_| XsubError::format(format!("{}: truncated IDX header", path.display())))
}
