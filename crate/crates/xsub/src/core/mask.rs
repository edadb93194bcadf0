use serde::{Deserialize, Serialize};

use crate::core::tensor::{Position, Tensor};
use crate::error::{Result, XsubError};

/// A tensor that is zero everywhere except at a declared set of positions.
///
/// Entries are given per position across all channels, so a mask touching
/// `k` positions of a `C`-channel tensor has at most `k*C` non-zero values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    values: Tensor,
    positions: Vec<Position>,
}

impl Mask {
    /// All-zero mask with an empty position set.
    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        Ok(Mask {
            values: Tensor::zeros(shape)?,
            positions: Vec::new(),
        })
    }

    /// Build a mask from `(position, per-channel values)` entries.
    pub fn from_entries(shape: Vec<usize>, entries: &[(Position, Vec<f64>)]) -> Result<Self> {
        let mut values = Tensor::zeros(shape)?;
        let channels = values.channels();
        let positions_total = values.positions();
        let mut raw = values.values().to_vec();
        let mut positions = Vec::with_capacity(entries.len());
        for (pos, channel_values) in entries {
            if pos.index() >= positions_total {
                return Err(XsubError::invalid(format!(
                    "mask position {} out of range (have {} positions)",
                    pos.index(),
                    positions_total
                )));
            }
            if channel_values.len() != channels {
                return Err(XsubError::invalid(format!(
                    "mask entry at position {} has {} channel values, expected {}",
                    pos.index(),
                    channel_values.len(),
                    channels
                )));
            }
            for (c, v) in channel_values.iter().enumerate() {
                raw[pos.index() * channels + c] = *v;
            }
            positions.push(*pos);
        }
        positions.sort_unstable();
        positions.dedup();
        values = Tensor::new(values.shape().to_vec(), raw)?;
        Ok(Mask { values, positions })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    /// Declared support, sorted ascending and duplicate-free.
    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn shape(&self) -> &[usize] {
        self.values.shape()
    }
}
