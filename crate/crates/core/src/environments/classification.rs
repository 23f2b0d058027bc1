use std::path::Path;

use rand::seq::SliceRandom;

use super::idx;
use super::{Environment, Round};
use crate::error::{Error, IdxError, Result};
use crate::rng::{stream, Stream};
use crate::types::ContextPoint;

/// Classification recast as a bandit: classes are arms, images are contexts,
/// and the reward is 1 for the true label and 0 otherwise.
#[derive(Debug, Clone)]
pub struct ClassificationEnv {
    features: Vec<f32>,
    dim: usize,
    labels: Vec<u8>,
    num_classes: usize,
    order: Vec<usize>,
    cursor: usize,
}

impl ClassificationEnv {
    pub fn new(features: Vec<f32>, dim: usize, labels: Vec<u8>, num_classes: usize) -> Result<Self> {
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(Error::InvalidValue(format!(
                "{} feature values do not form {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some((index, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= num_classes)
        {
            return Err(Error::InvalidValue(
                IdxError::BadLabel { index, label }.to_string(),
            ));
        }
        let order = (0..labels.len()).collect();
        Ok(Self {
            features,
            dim,
            labels,
            num_classes,
            order,
            cursor: 0,
        })
    }

    /// Loads an IDX image/label pair; pixels are scaled to `[0, 1]`.
    pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<Self> {
        let images = idx::read_images(image_path)?;
        let labels = idx::read_labels(label_path)?;
        if images.count != labels.len() {
            return Err(Error::Idx {
                path: label_path.to_path_buf(),
                source: IdxError::CountMismatch {
                    images: images.count,
                    labels: labels.len(),
                },
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= 10) {
            return Err(Error::Idx {
                path: label_path.to_path_buf(),
                source: IdxError::BadLabel { index, label },
            });
        }
        let features = images.pixels.iter().map(|&p| p as f32 / 255.0).collect();
        Self::new(features, images.rows * images.cols, labels, 10)
    }

    /// Visits images in an order shuffled by the seed's order stream.
    pub fn shuffled(mut self, seed: u64) -> Self {
        self.order.shuffle(&mut stream(seed, Stream::Order));
        self.cursor = 0;
        self
    }

    /// Keeps only the first `n` images of the current order.
    pub fn truncated(mut self, n: usize) -> Self {
        self.order.truncate(n);
        self
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn round_for(&self, i: usize) -> Round {
        let row = &self.features[i * self.dim..(i + 1) * self.dim];
        let context = ContextPoint::new(row.iter().map(|&v| v as f64).collect())
            .expect("pixel features are finite");
        let label = self.labels[i] as usize;
        let means = (0..self.num_classes)
            .map(|c| if c == label { 1.0 } else { 0.0 })
            .collect();
        Round { context, means }
    }
}

impl Environment for ClassificationEnv {
    fn num_arms(&self) -> usize {
        self.num_classes
    }

    fn context_dim(&self) -> usize {
        self.dim
    }

    fn next_round(&mut self) -> Result<Round> {
        let &i = self
            .order
            .get(self.cursor)
            .ok_or(Error::Exhausted(self.cursor))?;
        self.cursor += 1;
        Ok(self.round_for(i))
    }

    fn observe(&mut self, round: &Round, arm: usize) -> Result<f64> {
        round.means.get(arm).copied().ok_or(Error::ArmOutOfRange {
            arm,
            num_arms: self.num_classes,
        })
    }

    /// Up to `count` images the training stream has not reached yet.
    fn holdout(&mut self, count: usize) -> Result<Vec<Round>> {
        Ok(self.order[self.cursor..]
            .iter()
            .take(count)
            .map(|&i| self.round_for(i))
            .collect())
    }
}
