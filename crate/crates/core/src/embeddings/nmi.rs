//! Normalized mutual information between a clustering and ground-truth labels.
//!
//! NMI = I(C;L) / sqrt(H(C) * H(L)) with natural logarithms. Either side
//! having zero entropy is defined as NMI = 0 (avoids 0/0). Identical
//! partitions score exactly 1.0: the mutual-information terms reduce to the
//! same floating-point operations as the entropy terms, and
//! sqrt(h * h) == h in IEEE round-to-nearest.

use std::collections::BTreeMap;

use super::{ClusterAssignment, EmbeddingError};

/// NMI over two parallel index sequences (positions pair up).
pub fn nmi_partitions(a: &[usize], b: &[usize]) -> Result<f64, EmbeddingError> {
    if a.is_empty() || b.is_empty() || a.len() != b.len() {
        return Err(EmbeddingError::Empty);
    }
    let n = a.len() as f64;

    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut count_a: BTreeMap<usize, f64> = BTreeMap::new();
    let mut count_b: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0;
        *count_a.entry(x).or_default() += 1.0;
        *count_b.entry(y).or_default() += 1.0;
    }

    let entropy = |counts: &BTreeMap<usize, f64>| -> f64 {
        counts.values().map(|&c| (c / n) * (n / c).ln()).sum()
    };
    let h_a = entropy(&count_a);
    let h_b = entropy(&count_b);
    if h_a == 0.0 || h_b == 0.0 {
        return Ok(0.0);
    }

    let mut mi = 0.0;
    for (&(x, y), &c) in &joint {
        // (c/n) * ln(c*n / (n_x*n_y)); written so the identical-partition
        // case reproduces the entropy terms bit-for-bit.
        mi += (c / n) * ((c * n) / (count_a[&x] * count_b[&y])).ln();
    }
    Ok((mi / (h_a * h_b).sqrt()).clamp(0.0, 1.0))
}

/// NMI of a cluster assignment against per-frame labels. Both sides must
/// cover exactly the same frame set.
pub fn nmi(
    assignment: &ClusterAssignment,
    labels: &BTreeMap<u64, String>,
) -> Result<f64, EmbeddingError> {
    if assignment.clusters.is_empty() || labels.is_empty() {
        return Err(EmbeddingError::Empty);
    }
    if assignment.clusters.len() != labels.len()
        || !assignment.clusters.keys().eq(labels.keys())
    {
        return Err(EmbeddingError::FrameSetMismatch);
    }
    let mut label_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut a = Vec::with_capacity(labels.len());
    let mut b = Vec::with_capacity(labels.len());
    for (frame_id, cluster) in &assignment.clusters {
        let label = labels[frame_id].as_str();
        let next = label_ids.len();
        let id = *label_ids.entry(label).or_insert(next);
        a.push(*cluster);
        b.push(id);
    }
    nmi_partitions(&a, &b)
}
