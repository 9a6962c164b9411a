//! Thermal-frame embeddings: the built-in block-mean extractor, CSV ingestion
//! for externally produced vectors, and the clustering/NMI validation tools.

mod kmeans;
mod nmi;

pub use kmeans::{kmeans, kmeans_objective, save_assignments_csv, ClusterAssignment};
pub use nmi::{nmi, nmi_partitions};

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::frames::ThermalFrame;

/// Every embedding is 64-dimensional, matching the 8x8 block grid of the
/// built-in extractor.
pub const EMBEDDING_DIM: usize = 64;

const BLOCK_GRID: usize = 8;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("frame {width}x{height} does not tile into an 8x8 block grid")]
    NotTileable { width: usize, height: usize },
    #[error("degenerate embedding: zero variance input cannot be normalized")]
    Degenerate,
    #[error("expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("csv row {row}: {msg}")]
    Csv { row: usize, msg: String },
    #[error("k must be in [1, point count]: k={k}, n={n}")]
    BadK { k: usize, n: usize },
    #[error("empty input")]
    Empty,
    #[error("assignment and labels cover different frame sets")]
    FrameSetMismatch,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A unit-L2-norm 64-vector tied to the frame it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub frame_id: u64,
    values: Vec<f64>,
}

impl Embedding {
    /// Normalize `values` to unit length. Fails on a zero (or non-finite) vector.
    pub fn normalized(frame_id: u64, values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.len() != EMBEDDING_DIM {
            return Err(EmbeddingError::Dimension {
                expected: EMBEDDING_DIM,
                got: values.len(),
            });
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(EmbeddingError::Degenerate);
        }
        let values = values.into_iter().map(|v| v / norm).collect();
        Ok(Self { frame_id, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Built-in stand-in extractor: 8x8 block means, mean-centered, L2-normalized.
///
/// Adding a constant to every pixel or scaling all deviations by c > 0 leaves
/// the embedding unchanged, so it responds to pose layout, not absolute
/// temperature.
pub fn embed_blockmean(frame: &ThermalFrame) -> Result<Embedding, EmbeddingError> {
    if !frame.width.is_multiple_of(BLOCK_GRID) || !frame.height.is_multiple_of(BLOCK_GRID) {
        return Err(EmbeddingError::NotTileable {
            width: frame.width,
            height: frame.height,
        });
    }
    let bw = frame.width / BLOCK_GRID;
    let bh = frame.height / BLOCK_GRID;
    let mut means = vec![0.0f64; EMBEDDING_DIM];
    for (bi, mean) in means.iter_mut().enumerate() {
        let bx = bi % BLOCK_GRID;
        let by = bi / BLOCK_GRID;
        let mut sum = 0.0;
        for y in by * bh..(by + 1) * bh {
            for x in bx * bw..(bx + 1) * bw {
                sum += frame.temp_at(x, y);
            }
        }
        *mean = sum / (bw * bh) as f64;
    }
    let grand = means.iter().sum::<f64>() / EMBEDDING_DIM as f64;
    for m in &mut means {
        *m -= grand;
    }
    Embedding::normalized(0, means)
}

/// Same as [`embed_blockmean`] but binding the embedding to an explicit frame id.
pub fn embed_blockmean_for(frame: &ThermalFrame, frame_id: u64) -> Result<Embedding, EmbeddingError> {
    let mut e = embed_blockmean(frame)?;
    e.frame_id = frame_id;
    Ok(e)
}

/// Load `frame_id, v0..v63` CSV rows, normalizing each to unit length.
pub fn load_embeddings(path: &Path) -> Result<BTreeMap<u64, Embedding>, EmbeddingError> {
    let text = std::fs::read_to_string(path)?;
    parse_embeddings_csv(&text)
}

pub fn parse_embeddings_csv(text: &str) -> Result<BTreeMap<u64, Embedding>, EmbeddingError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| EmbeddingError::Csv {
            row: idx + 1,
            msg: e.to_string(),
        })?;
        if row.len() != EMBEDDING_DIM + 1 {
            return Err(EmbeddingError::Csv {
                row: idx + 1,
                msg: format!("expected {} columns, got {}", EMBEDDING_DIM + 1, row.len()),
            });
        }
        let frame_id: u64 = row[0].parse().map_err(|_| EmbeddingError::Csv {
            row: idx + 1,
            msg: format!("bad frame_id {:?}", &row[0]),
        })?;
        let mut values = Vec::with_capacity(EMBEDDING_DIM);
        for field in row.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| EmbeddingError::Csv {
                row: idx + 1,
                msg: format!("bad value {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(EmbeddingError::Csv {
                    row: idx + 1,
                    msg: format!("non-finite value {v}"),
                });
            }
            values.push(v);
        }
        out.insert(frame_id, Embedding::normalized(frame_id, values)?);
    }
    Ok(out)
}

/// Write embeddings in the same `frame_id, v0..v63` layout that
/// [`load_embeddings`] reads.
pub fn save_embeddings_csv(
    embeddings: &BTreeMap<u64, Embedding>,
    path: &Path,
) -> Result<(), EmbeddingError> {
    let mut out = String::new();
    for (id, e) in embeddings {
        out.push_str(&id.to_string());
        for v in e.values() {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
