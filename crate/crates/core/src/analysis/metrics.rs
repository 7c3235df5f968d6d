use crate::error::{Error, Result};

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), actual: pred.len() });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("r_squared of empty vectors".into()));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InvalidArgument("r_squared undefined for constant truth".into()));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub confusion: Confusion,
}

/// Accuracy of `prob > threshold` against 0/1 labels.
pub fn classification_metrics(prob: &[f64], labels: &[f64], threshold: f64) -> Result<ClassificationMetrics> {
    if prob.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), actual: prob.len() });
    }
    if prob.is_empty() {
        return Err(Error::InvalidArgument("no predictions to score".into()));
    }
    let mut c = Confusion::default();
    for (&p, &l) in prob.iter().zip(labels) {
        match (p > threshold, l == 1.0) {
            (true, true) => c.true_pos += 1,
            (false, false) => c.true_neg += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    Ok(ClassificationMetrics { accuracy: (c.true_pos + c.true_neg) as f64 / prob.len() as f64, confusion: c })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean silhouette coefficient with Euclidean distances. Points in
/// singleton clusters score 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), actual: labels.len() });
    }
    let mut clusters: Vec<usize> = labels.to_vec();
    clusters.sort_unstable();
    clusters.dedup();
    if clusters.len() < 2 {
        return Err(Error::InvalidArgument("silhouette needs at least two clusters".into()));
    }
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mut sums = vec![0.0; clusters.len()];
        let mut counts = vec![0usize; clusters.len()];
        for (j, q) in points.iter().enumerate() {
            if i != j {
                let c = clusters.binary_search(&labels[j]).expect("label listed");
                sums[c] += dist(p, q);
                counts[c] += 1;
            }
        }
        let own = clusters.binary_search(&labels[i]).expect("label listed");
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..clusters.len())
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_squared_cases() {
        let t = [1.0, 2.0, 3.0];
        assert_eq!(r_squared(&t, &t).unwrap(), 1.0);
        assert_eq!(r_squared(&[2.0; 3], &t).unwrap(), 0.0);
        assert!((r_squared(&[1.0, 2.0, 4.0], &t).unwrap() - 0.5).abs() < 1e-15);
        assert!(r_squared(&[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(r_squared(&[1.0], &t).is_err());
    }

    #[test]
    fn classification_cases() {
        let labels = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(classification_metrics(&[0.9, 0.1, 0.8, 0.3], &labels, 0.5).unwrap().accuracy, 1.0);
        assert_eq!(classification_metrics(&[0.1, 0.9, 0.2, 0.7], &labels, 0.5).unwrap().accuracy, 0.0);
        let m = classification_metrics(&[0.9, 0.2, 0.6, 0.4], &[1.0, 0.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(m.accuracy, 0.75);
        let m = classification_metrics(&[0.9, 0.2, 0.6, 0.4], &[1.0, 0.0, 0.0, 1.0], 0.5).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.confusion, Confusion { true_pos: 1, true_neg: 1, false_pos: 1, false_neg: 1 });
        assert!(classification_metrics(&[], &[], 0.5).is_err());
    }

    #[test]
    fn silhouette_of_separated_pairs() {
        let pts = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
        // a = 1, b = mean(10, 11) or mean(9, 10)
        let expected = ((10.5 - 1.0) / 10.5 + (9.5 - 1.0) / 9.5) / 2.0;
        assert!((silhouette(&pts, &[0, 0, 1, 1]).unwrap() - expected).abs() < 1e-12);
        assert!(silhouette(&pts, &[0, 0, 0, 0]).is_err());
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let pred = [0.3, 1.2, 2.2, 2.9, 4.4];
        let truth = [0.0, 1.0, 2.0, 3.0, 4.0];
        let perm = [3, 0, 4, 1, 2];
        let p2: Vec<f64> = perm.iter().map(|&i| pred[i]).collect();
        let t2: Vec<f64> = perm.iter().map(|&i| truth[i]).collect();
        assert_eq!(r_squared(&pred, &truth).unwrap(), r_squared(&p2, &t2).unwrap());
    }
}
