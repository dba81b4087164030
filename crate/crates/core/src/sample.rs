use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// One encoded training or test example: feature values, class index and
/// its entry in the current boosting distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    pub class: usize,
    pub weight: T,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(values: Vec<T>, class: usize) -> Self {
        Self {
            values,
            class,
            weight: T::one(),
        }
    }

    pub fn with_weight(mut self, weight: T) -> Self {
        self.weight = weight;
        self
    }

    pub fn width(&self) -> usize {
        self.values.len()
    }
}

/// One-hot target vector of length `classes`.
pub fn one_hot<T: Scalar>(class: usize, classes: usize) -> Vec<T> {
    let mut y = vec![T::zero(); classes];
    y[class] = T::one();
    y
}
