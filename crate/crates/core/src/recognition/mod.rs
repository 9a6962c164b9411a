//! Caption-to-activity matching and recognition scoring.
//!
//! Captions are matched against per-activity keyword bags: a phrase matches
//! when its words appear as a contiguous, word-boundary-aligned run in the
//! normalized caption (so "read" never fires inside "bread"). A caption may
//! match several activities; a prediction is correct when the ground truth
//! is in the match set.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecognitionError {
    #[error("keyword map: {0}")]
    KeywordMap(String),
    #[error("caption file line {line}: {msg}")]
    Captions { line: usize, msg: String },
    #[error("ground truth {0:?} is not in the keyword map")]
    UnknownTruth(String),
    #[error("empty text after normalization")]
    EmptyText,
    #[error("no records to evaluate")]
    NoRecords,
    #[error("no embedding for text hash {0}")]
    MissingEmbedding(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

const DEFAULT_KEYWORDS_CSV: &str = include_str!("keywords_default.csv");

/// Lowercase, strip punctuation, collapse whitespace, split into words.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Activity -> keyword phrases, phrases stored as normalized token lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordMap {
    phrases: BTreeMap<String, Vec<Vec<String>>>,
}

impl KeywordMap {
    /// The bundled default map covering the 30 benchmark activities.
    pub fn bundled() -> Self {
        Self::from_csv(DEFAULT_KEYWORDS_CSV).expect("bundled keyword map parses")
    }

    /// Parse `activity,keyword` CSV rows.
    pub fn from_csv(text: &str) -> Result<Self, RecognitionError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut phrases: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
        for (idx, row) in reader.records().enumerate() {
            let row = row.map_err(|e| RecognitionError::KeywordMap(e.to_string()))?;
            if row.len() != 2 {
                return Err(RecognitionError::KeywordMap(format!(
                    "row {}: expected activity,keyword",
                    idx + 1
                )));
            }
            let tokens = normalize_tokens(&row[1]);
            if tokens.is_empty() {
                return Err(RecognitionError::KeywordMap(format!(
                    "row {}: empty keyword phrase",
                    idx + 1
                )));
            }
            let entry = phrases.entry(row[0].to_string()).or_default();
            if !entry.contains(&tokens) {
                entry.push(tokens);
            }
        }
        if phrases.is_empty() || phrases.values().any(|p| p.is_empty()) {
            return Err(RecognitionError::KeywordMap(
                "every activity needs at least one phrase".into(),
            ));
        }
        Ok(Self { phrases })
    }

    pub fn load(path: &Path) -> Result<Self, RecognitionError> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn activities(&self) -> impl Iterator<Item = &str> {
        self.phrases.keys().map(String::as_str)
    }

    pub fn contains_activity(&self, activity: &str) -> bool {
        self.phrases.contains_key(activity)
    }

    pub fn phrases_of(&self, activity: &str) -> Option<&[Vec<String>]> {
        self.phrases.get(activity).map(Vec::as_slice)
    }
}

fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return false;
    }
    tokens.windows(phrase.len()).any(|w| w == phrase)
}

/// All activities whose keyword bag matches the caption.
pub fn match_caption(caption: &str, map: &KeywordMap) -> BTreeSet<String> {
    let tokens = normalize_tokens(caption);
    map.phrases
        .iter()
        .filter(|(_, phrases)| phrases.iter().any(|p| contains_phrase(&tokens, p)))
        .map(|(activity, _)| activity.clone())
        .collect()
}

/// One generated caption with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub segment: u64,
    pub participant: String,
    pub caption: String,
    pub truth: String,
}

/// Parse caption JSONL: `{segment, participant, caption, truth}` per line.
pub fn parse_captions(text: &str) -> Result<Vec<CaptionRecord>, RecognitionError> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: CaptionRecord =
            serde_json::from_str(line).map_err(|e| RecognitionError::Captions {
                line: idx + 1,
                msg: e.to_string(),
            })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn load_captions(path: &Path) -> Result<Vec<CaptionRecord>, RecognitionError> {
    parse_captions(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Per-class and macro precision/recall/F1 plus accuracy, averaged both over
/// activity classes and over participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfReport {
    pub per_class: BTreeMap<String, ClassScores>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Fraction of records whose ground truth is in the match set.
    pub accuracy: f64,
    /// Mean per-class correctness (equals macro recall under set semantics).
    pub accuracy_by_class: f64,
    /// participant -> (accuracy, macro F1 over that participant's classes)
    pub per_participant: BTreeMap<String, (f64, f64)>,
    pub accuracy_by_participant: f64,
    pub f1_by_participant: f64,
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn tally(
    records: &[&CaptionRecord],
    matches: &[BTreeSet<String>],
) -> (BTreeMap<String, ClassScores>, f64) {
    #[derive(Default)]
    struct Counts {
        tp: usize,
        fp: usize,
        fn_: usize,
    }
    let mut counts: BTreeMap<&str, Counts> = BTreeMap::new();
    let mut correct = 0usize;
    for (rec, matched) in records.iter().zip(matches) {
        counts.entry(rec.truth.as_str()).or_default();
        if matched.contains(&rec.truth) {
            correct += 1;
            counts.get_mut(rec.truth.as_str()).unwrap().tp += 1;
        } else {
            counts.get_mut(rec.truth.as_str()).unwrap().fn_ += 1;
        }
        for m in matched {
            if m != &rec.truth {
                counts.entry(m.as_str()).or_default().fp += 1;
            }
        }
    }
    let per_class = counts
        .into_iter()
        .map(|(class, c)| {
            let precision = if c.tp + c.fp == 0 {
                0.0
            } else {
                c.tp as f64 / (c.tp + c.fp) as f64
            };
            let recall = if c.tp + c.fn_ == 0 {
                0.0
            } else {
                c.tp as f64 / (c.tp + c.fn_) as f64
            };
            (
                class.to_string(),
                ClassScores {
                    precision,
                    recall,
                    f1: f1_of(precision, recall),
                    support: c.tp + c.fn_,
                },
            )
        })
        .collect();
    let accuracy = if records.is_empty() {
        0.0
    } else {
        correct as f64 / records.len() as f64
    };
    (per_class, accuracy)
}

fn macro_mean<F: Fn(&ClassScores) -> f64>(per_class: &BTreeMap<String, ClassScores>, f: F) -> f64 {
    if per_class.is_empty() {
        return 0.0;
    }
    per_class.values().map(f).sum::<f64>() / per_class.len() as f64
}

/// Score caption records against the keyword map.
pub fn evaluate(records: &[CaptionRecord], map: &KeywordMap) -> Result<PrfReport, RecognitionError> {
    if records.is_empty() {
        return Err(RecognitionError::NoRecords);
    }
    for rec in records {
        if !map.contains_activity(&rec.truth) {
            return Err(RecognitionError::UnknownTruth(rec.truth.clone()));
        }
    }
    let matches: Vec<BTreeSet<String>> =
        records.iter().map(|r| match_caption(&r.caption, map)).collect();
    let refs: Vec<&CaptionRecord> = records.iter().collect();
    let (per_class, accuracy) = tally(&refs, &matches);

    let mut per_participant = BTreeMap::new();
    let participants: BTreeSet<&str> =
        records.iter().map(|r| r.participant.as_str()).collect();
    for pid in participants {
        let (recs, mats): (Vec<&CaptionRecord>, Vec<BTreeSet<String>>) = records
            .iter()
            .zip(&matches)
            .filter(|(r, _)| r.participant == pid)
            .map(|(r, m)| (r, m.clone()))
            .unzip();
        let (classes, acc) = tally(&recs, &mats);
        per_participant.insert(pid.to_string(), (acc, macro_mean(&classes, |c| c.f1)));
    }
    let n_p = per_participant.len() as f64;
    Ok(PrfReport {
        macro_precision: macro_mean(&per_class, |c| c.precision),
        macro_recall: macro_mean(&per_class, |c| c.recall),
        macro_f1: macro_mean(&per_class, |c| c.f1),
        accuracy,
        accuracy_by_class: macro_mean(&per_class, |c| c.recall),
        accuracy_by_participant: per_participant.values().map(|v| v.0).sum::<f64>() / n_p,
        f1_by_participant: per_participant.values().map(|v| v.1).sum::<f64>() / n_p,
        per_class,
        per_participant,
    })
}

/// Term-frequency unigram vector over normalized tokens, L2-normalized.
fn tf_vector(text: &str) -> Result<BTreeMap<String, f64>, RecognitionError> {
    let tokens = normalize_tokens(text);
    if tokens.is_empty() {
        return Err(RecognitionError::EmptyText);
    }
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t).or_default() += 1.0;
    }
    let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
    for v in counts.values_mut() {
        *v /= norm;
    }
    Ok(counts)
}

/// How caption texts get vectorized for similarity scoring.
pub enum Vectorizer {
    /// Built-in stand-in: L2-normalized unigram term frequencies.
    TermFrequency,
    /// Lookup into a user-supplied `text_hash,v0..vN` table keyed by the
    /// SHA-256 of the normalized text.
    External(BTreeMap<String, Vec<f64>>),
}

/// Hex SHA-256 of the normalized (lowercased, punctuation-stripped,
/// space-joined) text: the key of the external embedding table.
pub fn text_hash(text: &str) -> String {
    let normalized = normalize_tokens(text).join(" ");
    let mut hasher = Sha256::new();
    hasher.update(normalized.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Parse an external `text_hash,v0..vN` embedding CSV.
pub fn parse_text_embeddings(text: &str) -> Result<BTreeMap<String, Vec<f64>>, RecognitionError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| RecognitionError::Captions {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if row.len() < 2 {
            return Err(RecognitionError::Captions {
                line: idx + 1,
                msg: "expected text_hash,v0..vN".into(),
            });
        }
        let mut values = Vec::with_capacity(row.len() - 1);
        for field in row.iter().skip(1) {
            values.push(field.parse().map_err(|_| RecognitionError::Captions {
                line: idx + 1,
                msg: format!("bad value {field:?}"),
            })?);
        }
        out.insert(row[0].to_string(), values);
    }
    Ok(out)
}

/// Cosine similarity between two caption texts under the chosen vectorizer,
/// clamped to [0, 1].
pub fn caption_similarity(
    a: &str,
    b: &str,
    vectorizer: &Vectorizer,
) -> Result<f64, RecognitionError> {
    match vectorizer {
        Vectorizer::TermFrequency => {
            let va = tf_vector(a)?;
            let vb = tf_vector(b)?;
            let dot: f64 = va
                .iter()
                .filter_map(|(k, x)| vb.get(k).map(|y| x * y))
                .sum();
            Ok(dot.clamp(0.0, 1.0))
        }
        Vectorizer::External(table) => {
            let lookup = |text: &str| {
                let hash = text_hash(text);
                table
                    .get(&hash)
                    .ok_or(RecognitionError::MissingEmbedding(hash))
            };
            if normalize_tokens(a).is_empty() || normalize_tokens(b).is_empty() {
                return Err(RecognitionError::EmptyText);
            }
            let (va, vb) = (lookup(a)?, lookup(b)?);
            let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
            let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                return Err(RecognitionError::EmptyText);
            }
            Ok((dot / (na * nb)).clamp(0.0, 1.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn appendix_examples() {
        let map = KeywordMap::bundled();
        let m = match_caption("She is texting a friend", &map);
        assert_eq!(m.into_iter().collect::<Vec<_>>(), vec!["Using Phone"]);

        let m = match_caption("cutting onion on a board", &map);
        assert_eq!(m.into_iter().collect::<Vec<_>>(), vec!["Cutting Food"]);

        let m = match_caption("playing a video game", &map);
        assert_eq!(
            m.into_iter().collect::<Vec<_>>(),
            vec!["Playing Video Games", "Using Computer"]
        );

        assert!(match_caption("staring at the wall", &map).is_empty());
    }

    #[test]
    fn word_boundary_matching() {
        let map = KeywordMap::from_csv("Reading a Book,read\n").unwrap();
        assert!(match_caption("she read the letter", &map).contains("Reading a Book"));
        assert!(match_caption("she ate bread", &map).is_empty());
    }

    #[test]
    fn case_and_punctuation_invariance() {
        let map = KeywordMap::bundled();
        let a = match_caption("Cutting, ONION!", &map);
        let b = match_caption("cutting onion", &map);
        assert_eq!(a, b);
    }

    fn records_perfect(map: &KeywordMap) -> Vec<CaptionRecord> {
        map.activities()
            .enumerate()
            .map(|(i, activity)| CaptionRecord {
                segment: i as u64,
                participant: format!("p{:02}", i % 3),
                caption: map.phrases_of(activity).unwrap()[0].join(" "),
                truth: activity.to_string(),
            })
            .collect()
    }

    #[test]
    fn perfect_predictor_scores_one_everywhere() {
        let map = KeywordMap::bundled();
        let report = evaluate(&records_perfect(&map), &map).unwrap();
        assert_eq!(report.macro_precision, 1.0);
        assert_eq!(report.macro_recall, 1.0);
        assert_eq!(report.macro_f1, 1.0);
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.accuracy_by_participant, 1.0);
        assert_eq!(report.f1_by_participant, 1.0);
    }

    #[test]
    fn empty_captions_zero_recall() {
        let map = KeywordMap::bundled();
        let mut records = records_perfect(&map);
        for r in &mut records {
            r.caption = "...".into();
        }
        let report = evaluate(&records, &map).unwrap();
        assert_eq!(report.macro_recall, 0.0);
        assert_eq!(report.macro_f1, 0.0);
    }

    #[test]
    fn confusion_tally() {
        // 4 records, 3 correct, 1 matching class B while truth is A.
        let map = KeywordMap::from_csv("A,alpha\nB,beta\n").unwrap();
        let mk = |caption: &str, truth: &str| CaptionRecord {
            segment: 0,
            participant: "p00".into(),
            caption: caption.into(),
            truth: truth.into(),
        };
        let records = vec![
            mk("alpha", "A"),
            mk("alpha", "A"),
            mk("beta", "B"),
            mk("beta", "A"), // confusion A -> B
        ];
        let report = evaluate(&records, &map).unwrap();
        let a = &report.per_class["A"];
        let b = &report.per_class["B"];
        // A: tp 2, fn 1; B: tp 1, fp 1.
        assert!((a.recall - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.precision, 1.0);
        assert_eq!(b.recall, 1.0);
        assert_eq!(b.precision, 0.5);
        assert_eq!(report.accuracy, 0.75);
    }

    #[test]
    fn unknown_truth_is_config_error() {
        let map = KeywordMap::from_csv("A,alpha\n").unwrap();
        let records = vec![CaptionRecord {
            segment: 0,
            participant: "p".into(),
            caption: "alpha".into(),
            truth: "Z".into(),
        }];
        assert!(matches!(
            evaluate(&records, &map),
            Err(RecognitionError::UnknownTruth(_))
        ));
    }

    #[test]
    fn tf_similarity_values() {
        let v = Vectorizer::TermFrequency;
        let same = caption_similarity("cutting onion", "cutting onion", &v).unwrap();
        assert!((same - 1.0).abs() < 1e-12);
        assert_eq!(caption_similarity("alpha beta", "gamma delta", &v).unwrap(), 0.0);
        let half = caption_similarity("cutting onion", "cutting potato", &v).unwrap();
        assert!((half - 0.5).abs() < 1e-12);
        assert!(caption_similarity("", "x", &v).is_err());
    }

    #[test]
    fn similarity_is_symmetric() {
        let v = Vectorizer::TermFrequency;
        let ab = caption_similarity("peeling a potato", "washing a potato", &v).unwrap();
        let ba = caption_similarity("washing a potato", "peeling a potato", &v).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn external_vectorizer_lookup() {
        let a = "using phone";
        let b = "texting";
        let csv = format!(
            "{},1,0\n{},0.8,0.6\n",
            text_hash(a),
            text_hash(b)
        );
        let table = parse_text_embeddings(&csv).unwrap();
        let v = Vectorizer::External(table);
        let sim = caption_similarity(a, b, &v).unwrap();
        assert!((sim - 0.8).abs() < 1e-12);
        assert!(matches!(
            caption_similarity(a, "unknown text", &v),
            Err(RecognitionError::MissingEmbedding(_))
        ));
    }

    #[test]
    fn adding_keywords_never_shrinks_matches() {
        let base = KeywordMap::from_csv("A,alpha\nB,beta\n").unwrap();
        let extended = KeywordMap::from_csv("A,alpha\nA,gamma\nB,beta\n").unwrap();
        for caption in ["alpha beta", "gamma", "nothing here"] {
            let m1 = match_caption(caption, &base);
            let m2 = match_caption(caption, &extended);
            assert!(m1.is_subset(&m2));
        }
    }

    #[test]
    fn bundled_map_has_thirty_activities() {
        let map = KeywordMap::bundled();
        assert_eq!(map.activities().count(), 30);
    }
}
