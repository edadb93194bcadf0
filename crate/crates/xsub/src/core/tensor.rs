use serde::{Deserialize, Serialize};

use crate::error::{Result, XsubError};

/// Dense row-major tensor of finite `f64` values.
///
/// Shapes are either `[H, W, C]` for image-like data or `[d]` for flat
/// feature vectors. A "position" is a spatial site covering all channels:
/// `H*W` positions for images, `d` for flat vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let count: usize = shape.iter().product();
        if shape.is_empty() || count == 0 {
            return Err(XsubError::invalid("tensor shape must be non-empty"));
        }
        if values.len() != count {
            return Err(XsubError::invalid(format!(
                "tensor shape {:?} needs {} values, got {}",
                shape,
                count,
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(XsubError::invalid("tensor values must be finite"));
        }
        Ok(Tensor { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let count: usize = shape.iter().product();
        Tensor::new(shape, vec![0.0; count])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Channels per position: `C` for `[H, W, C]` shapes, 1 otherwise.
    pub fn channels(&self) -> usize {
        if self.shape.len() == 3 {
            self.shape[2]
        } else {
            1
        }
    }

    /// Number of spatial positions (`H*W` for images, `d` for flat vectors).
    pub fn positions(&self) -> usize {
        self.len() / self.channels()
    }

    /// Value at a (position, channel) site.
    pub fn at(&self, position: usize, channel: usize) -> f64 {
        self.values[position * self.channels() + channel]
    }

    /// Reinterpret the same values under a new shape with equal element count.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Tensor> {
        Tensor::new(shape, self.values.clone())
    }
}

/// One data point: a feature tensor with its ground-truth class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub data: Tensor,
    pub label: usize,
}

impl Sample {
    pub fn new(data: Tensor, label: usize) -> Self {
        Sample { data, label }
    }
}

/// Flat index into the channel-aggregated spatial grid. For multi-channel
/// data one position covers every channel at that pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Position(pub usize);

impl Position {
    pub fn index(self) -> usize {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_value_count_must_match() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![0.0; 4]).is_ok());
    }

    #[test]
    fn rejects_non_finite_values() {
        assert!(Tensor::new(vec![2], vec![1.0, f64::NAN]).is_err());
        assert!(Tensor::new(vec![2], vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn positions_and_channels_for_image_shape() {
        let t = Tensor::zeros(vec![4, 4, 3]).unwrap();
        assert_eq!(t.positions(), 16);
        assert_eq!(t.channels(), 3);
    }

    #[test]
    fn positions_for_flat_shape() {
        let t = Tensor::zeros(vec![8]).unwrap();
        assert_eq!(t.positions(), 8);
        assert_eq!(t.channels(), 1);
    }

    #[test]
    fn at_indexes_position_then_channel() {
        let t = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.at(0, 1), 2.0);
        assert_eq!(t.at(1, 0), 3.0);
    }
}
