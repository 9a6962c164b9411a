//! Sliding-window pairwise cosine similarity over recent embeddings.
//!
//! A [`SimilarityWindow`] keeps the last `T` embeddings, the pairwise cosine
//! matrix among them, and a ring of the last `T` rolling means `w_j`. Each
//! `w_j` is the mean of the full similarity submatrix (diagonal included)
//! over the window as it stood when frame `j` arrived, so the incremental
//! values match a batch recomputation from the full stream matrix.

use std::collections::VecDeque;

use thiserror::Error;

use crate::embeddings::Embedding;

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("index {0} is not in the window")]
    OutOfWindow(u64),
    #[error("window is empty")]
    Empty,
}

/// Cosine similarity of two unit vectors, clamped to [-1, 1] against rounding.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, SimilarityError> {
    let (x, y) = (a.values(), b.values());
    if x.len() != y.len() {
        return Err(SimilarityError::Dimension(x.len(), y.len()));
    }
    let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct SimilarityWindow {
    capacity: usize,
    /// Embeddings for the most recent absolute indices, oldest first.
    entries: VecDeque<Embedding>,
    /// Pairwise cosine matrix among `entries`, rows parallel to them.
    matrix: VecDeque<VecDeque<f64>>,
    /// Rolling means w_j for the most recent indices, oldest first.
    means: VecDeque<f64>,
    /// Absolute index of the newest entry; `None` before the first push.
    newest: Option<u64>,
}

impl SimilarityWindow {
    /// `capacity` is the window parameter T.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be at least 1");
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
            matrix: VecDeque::with_capacity(capacity),
            means: VecDeque::with_capacity(capacity),
            newest: None,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Absolute index of the newest pushed embedding.
    pub fn current_index(&self) -> Option<u64> {
        self.newest
    }

    /// Push the next embedding, evicting the oldest entry at capacity and
    /// computing the new row of the cosine matrix plus the new rolling mean.
    pub fn push(&mut self, embedding: Embedding) -> Result<(), SimilarityError> {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
            self.matrix.pop_front();
            for row in &mut self.matrix {
                row.pop_front();
            }
        }
        let mut row: VecDeque<f64> = VecDeque::with_capacity(self.entries.len() + 1);
        for (i, existing) in self.entries.iter().enumerate() {
            let sim = cosine(existing, &embedding)?;
            self.matrix[i].push_back(sim);
            row.push_back(sim);
        }
        row.push_back(1.0);
        self.matrix.push_back(row);
        self.entries.push_back(embedding);

        let m = self.entries.len() as f64;
        let sum: f64 = self.matrix.iter().flatten().sum();
        let mean = sum / (m * m);
        if self.means.len() == self.capacity {
            self.means.pop_front();
        }
        self.means.push_back(mean);
        self.newest = Some(self.newest.map_or(0, |i| i + 1));
        Ok(())
    }

    fn mean_slot(&self, index: u64) -> Result<usize, SimilarityError> {
        let newest = self.newest.ok_or(SimilarityError::Empty)?;
        let oldest = newest + 1 - self.means.len() as u64;
        if index < oldest || index > newest {
            return Err(SimilarityError::OutOfWindow(index));
        }
        Ok((index - oldest) as usize)
    }

    /// Rolling mean w_j for an in-window absolute index, as computed when
    /// that frame was the newest.
    pub fn rolling_mean(&self, index: u64) -> Result<f64, SimilarityError> {
        Ok(self.means[self.mean_slot(index)?])
    }

    /// Min-max-normalized score r_i of an in-window index against all
    /// in-window rolling means.
    ///
    /// When the spread of means is below `epsilon` the window is degenerate
    /// (no ranking is meaningful) and the score is 0; otherwise the division
    /// is exact, so the window minimum scores 0 and the maximum scores 1.
    pub fn normalized_score(&self, index: u64, epsilon: f64) -> Result<f64, SimilarityError> {
        let w_i = self.rolling_mean(index)?;
        let (min, max) = self.means_range().ok_or(SimilarityError::Empty)?;
        if max - min < epsilon {
            return Ok(0.0);
        }
        Ok((w_i - min) / (max - min))
    }

    /// (min, max) over the in-window rolling means.
    pub fn means_range(&self) -> Option<(f64, f64)> {
        let mut it = self.means.iter();
        let first = *it.next()?;
        let (mut min, mut max) = (first, first);
        for &w in it {
            min = min.min(w);
            max = max.max(w);
        }
        Some((min, max))
    }

    /// Similarity matrix as CSV rows, newest entry last (debug/plotting aid).
    pub fn matrix_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.matrix {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn matrix_at(&self, a: usize, b: usize) -> f64 {
        self.matrix[a][b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EMBEDDING_DIM;

    fn unit(axis: usize) -> Embedding {
        let mut v = vec![0.0; EMBEDDING_DIM];
        v[axis] = 1.0;
        Embedding::normalized(axis as u64, v).unwrap()
    }

    fn mixed(axis: usize, other: usize, w: f64) -> Embedding {
        let mut v = vec![0.0; EMBEDDING_DIM];
        v[axis] = (1.0 - w * w).sqrt();
        v[other] = w;
        Embedding::normalized(0, v).unwrap()
    }

    #[test]
    #[allow(clippy::approx_constant)] // 0.70710678 is the documented expected value
    fn cosine_identity_orthogonal_and_analytic() {
        let a = unit(0);
        let b = unit(1);
        assert_eq!(cosine(&a, &a).unwrap(), 1.0);
        assert_eq!(cosine(&a, &b).unwrap(), 0.0);
        let c = mixed(0, 1, std::f64::consts::FRAC_1_SQRT_2);
        assert!((cosine(&a, &c).unwrap() - 0.70710678).abs() < 1e-8);
    }

    #[test]
    fn push_into_empty_window() {
        let mut w = SimilarityWindow::new(4);
        w.push(unit(0)).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.matrix_at(0, 0), 1.0);
        assert_eq!(w.rolling_mean(0).unwrap(), 1.0);
    }

    #[test]
    fn eviction_keeps_last_t() {
        let mut w = SimilarityWindow::new(3);
        for i in 0..4 {
            w.push(unit(i)).unwrap();
        }
        assert_eq!(w.len(), 3);
        assert_eq!(w.current_index(), Some(3));
        assert!(w.rolling_mean(0).is_err());
        assert!(w.rolling_mean(1).is_ok());
    }

    #[test]
    fn duplicate_push_gives_unit_off_diagonal() {
        let mut w = SimilarityWindow::new(3);
        w.push(unit(5)).unwrap();
        w.push(unit(5)).unwrap();
        assert_eq!(w.matrix_at(0, 1), 1.0);
        assert_eq!(w.matrix_at(1, 0), 1.0);
    }

    #[test]
    fn rolling_mean_closed_forms() {
        // 2x2 submatrix with off-diagonal c: mean = (2 + 2c) / 4.
        let mut w = SimilarityWindow::new(8);
        w.push(unit(0)).unwrap();
        let c: f64 = 0.6;
        w.push(mixed(0, 1, (1.0 - c * c).sqrt())).unwrap();
        let expected = (2.0 + 2.0 * c) / 4.0;
        assert!((w.rolling_mean(1).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn three_entry_mean_enumerates_nine_cells() {
        // Off-diagonals {0.9, 0.8, 0.7} -> (3 + 2*(0.9+0.8+0.7)) / 9.
        let mut w = SimilarityWindow::new(4);
        let dims = 3;
        // Build three vectors with prescribed pairwise dot products via
        // Cholesky of the Gram matrix.
        let gram = [[1.0, 0.9, 0.8], [0.9, 1.0, 0.7], [0.8, 0.7, 1.0]];
        let mut l = [[0.0f64; 3]; 3];
        for i in 0..dims {
            for j in 0..=i {
                let mut s = gram[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    l[i][j] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        for row in &l {
            let mut v = vec![0.0; EMBEDDING_DIM];
            v[..3].copy_from_slice(row);
            w.push(Embedding::normalized(0, v).unwrap()).unwrap();
        }
        let expected = (3.0 + 2.0 * (0.9 + 0.8 + 0.7)) / 9.0;
        assert!((w.rolling_mean(2).unwrap() - expected).abs() < 1e-4);
        assert!((expected - 0.8667).abs() < 1e-4);
    }

    #[test]
    fn normalized_score_min_is_zero_and_all_equal_is_zero() {
        let mut w = SimilarityWindow::new(3);
        for _ in 0..3 {
            w.push(unit(2)).unwrap();
        }
        // All means equal 1.0: degenerate, score 0.
        assert_eq!(w.normalized_score(2, 1e-8).unwrap(), 0.0);

        let mut w = SimilarityWindow::new(8);
        w.push(unit(0)).unwrap();
        w.push(unit(1)).unwrap();
        w.push(unit(2)).unwrap();
        // Means are strictly decreasing, so the newest index is the minimum.
        let score = w.normalized_score(w.current_index().unwrap(), 1e-8).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn matrix_symmetry_and_unit_diagonal_after_pushes() {
        let mut w = SimilarityWindow::new(5);
        for i in 0..9 {
            w.push(mixed(i % 4, (i + 1) % 4, 0.3)).unwrap();
            let m = w.len();
            for a in 0..m {
                assert!((w.matrix_at(a, a) - 1.0).abs() < 1e-6);
                for b in 0..m {
                    assert_eq!(w.matrix_at(a, b), w.matrix_at(b, a));
                }
            }
        }
    }
}
