//! Finite reference distributions built from training data.

use std::collections::HashMap;

use crate::bounds::FinitePD;
use crate::dataio::Dataset;
use crate::error::{invalid, Result};

/// Empirical distribution over the distinct inputs of `data`, and the
/// `(feature, label)` index of every example. Features are numbered in order
/// of first appearance; inputs are matched bit for bit.
pub fn empirical_support(data: &Dataset) -> Result<(FinitePD, Vec<(usize, usize)>)> {
    if data.is_empty() {
        return Err(invalid("dataset is empty"));
    }
    let mut ids: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut embedding = Vec::new();
    let mut samples = Vec::with_capacity(data.len());
    for (x, &y) in data.inputs.iter().zip(&data.labels) {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let next = ids.len();
        let id = *ids.entry(key).or_insert_with(|| {
            embedding.push(x.clone());
            next
        });
        samples.push((id, y));
    }
    let n = data.len() as f64;
    let mut joint = vec![vec![0.0; data.num_classes]; embedding.len()];
    for &(x, y) in &samples {
        joint[x][y] += 1.0 / n;
    }
    // renormalize so rounding in 1/n cannot push the total outside tolerance
    let total: f64 = joint.iter().flatten().sum();
    joint.iter_mut().flatten().for_each(|v| *v /= total);
    Ok((FinitePD::new(joint, embedding)?, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_identical_inputs() {
        let data = Dataset {
            inputs: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 0.0]],
            labels: vec![0, 1, 1, 0],
            num_classes: 2,
        };
        let (q, samples) = empirical_support(&data).unwrap();
        assert_eq!(q.card_x(), 2);
        assert_eq!(samples, vec![(0, 0), (1, 1), (0, 1), (0, 0)]);
        assert!((q.joint(0, 0) - 0.5).abs() < 1e-15);
        assert!((q.joint(0, 1) - 0.25).abs() < 1e-15);
        assert!((q.joint(1, 1) - 0.25).abs() < 1e-15);
    }
}
