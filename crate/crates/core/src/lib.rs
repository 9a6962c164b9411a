//! Thermal-guided adaptive spatio-temporal RGB sampling.
//!
//! A low-resolution thermal stream drives two decisions about its paired RGB
//! stream: *when* to sample frames (a dynamic frame rate derived from the
//! similarity of recent thermal embeddings, raised around activity
//! transitions and lowered during sustained activity) and *where* to crop
//! them (a patch around the heat signature of the hands). The crates here
//! implement that sampling engine end to end, plus the evaluation harness
//! (coverage, pixel usage, recognition scoring, energy accounting) and a
//! seeded synthetic corpus generator to run it all against.
//!
//! Module map:
//! - [`frames`]: stream data model, JSONL manifests, PGM/PPM codecs
//! - [`embeddings`]: block-mean embedder, embedding CSV, k-means, NMI
//! - [`similarity`]: sliding-window pairwise cosine matrix and rolling stats
//! - [`temporal`]: dynamic-FPS controller, credit scheduler, presets, traces
//! - [`spatial`]: Otsu threshold, heat mask, directional crop expansion
//! - [`segments`]: length binning, coverage and pixel-usage metrics
//! - [`recognition`]: keyword-bag caption matching and PRF scoring
//! - [`energy`]: duty-cycle energy model over measured component powers
//! - [`synth`]: seeded synthetic corpus generator
//! - [`pipeline`]: corpus-level runs tying the above together

pub mod embeddings;
pub mod energy;
pub mod frames;
pub mod pipeline;
pub mod recognition;
pub mod segments;
pub mod similarity;
pub mod spatial;
pub mod synth;
pub mod temporal;
