//! Selection of region- and object-level grounding annotations for each QA
//! triplet.
//!
//! Region descriptions are scored by how many of their informative words
//! (nouns and verbs) match an informative word of the question or answer; the
//! best-scoring descriptions are kept when they reach `min_region_matches`.
//! Objects are kept when one of their names matches an informative noun, must
//! sit inside a selected region when one exists, and are deduplicated by IoU.
//! Counting questions drop the region part after the objects are extracted.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{BoundingBox, Dataset, ObjectAnnotation, QaTriplet, RegionAnnotation};
use crate::lexicon::{normalize_token, Lexicon, MatchCondition, Pos};

pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "the", "is", "are", "was", "were", "be", "been", "do", "does", "what", "which",
    "who", "how", "where", "there", "of", "on", "in", "to",
];

pub const DEFAULT_COUNTING_PREFIXES: &[&str] = &["how many", "what number of", "count"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Containment {
    /// The object's box center lies inside the region.
    #[default]
    Center,
    /// The whole object box lies inside the region.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerConfig {
    pub iou_threshold: f64,
    pub min_region_matches: usize,
    pub stopwords: BTreeSet<String>,
    pub counting_prefixes: Vec<String>,
    pub containment: Containment,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            iou_threshold: 0.5,
            min_region_matches: 2,
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            counting_prefixes: DEFAULT_COUNTING_PREFIXES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            containment: Containment::Center,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("iou_threshold must lie in (0, 1], got {0}")]
    IouThreshold(f64),
    #[error("min_region_matches must be at least 1")]
    MinRegionMatches,
}

impl MinerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(ConfigError::IouThreshold(self.iou_threshold));
        }
        if self.min_region_matches < 1 {
            return Err(ConfigError::MinRegionMatches);
        }
        Ok(())
    }
}

/// One (query word, annotation word) pair that satisfied a match condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordMatch {
    pub query: String,
    pub annotation: String,
    pub condition: MatchCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingLabel {
    pub qa_id: u64,
    pub image_id: u64,
    pub region_boxes: Vec<BoundingBox>,
    pub object_boxes: Vec<BoundingBox>,
    pub is_counting: bool,
    pub region_match_count: usize,
    pub matched_words: Vec<WordMatch>,
}

/// Query-side words for one triplet, computed once.
#[derive(Debug, Clone)]
pub struct QueryWords {
    pub informative: Vec<String>,
    pub nouns: Vec<String>,
}

pub struct Miner<'a> {
    lex: &'a Lexicon,
    cfg: &'a MinerConfig,
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(normalize_token)
        .filter(|t| !t.is_empty())
}

/// Question text with punctuation dropped and whitespace collapsed.
fn normalize_sentence(text: &str) -> String {
    tokens(text)
        .map(|t| t.replace('_', " "))
        .collect::<Vec<_>>()
        .join(" ")
}

impl<'a> Miner<'a> {
    pub fn new(lex: &'a Lexicon, cfg: &'a MinerConfig) -> Self {
        Miner { lex, cfg }
    }

    /// Lowercased non-stopword tokens that WordNet knows as a noun or verb,
    /// in first-occurrence order.
    pub fn informative_words(&self, text: &str) -> Vec<String> {
        let mut seen = BTreeSet::new();
        tokens(text)
            .filter(|t| !self.cfg.stopwords.contains(t))
            .filter(|t| Pos::ALL.iter().any(|&p| self.lex.is_known(t, p)))
            .filter(|t| seen.insert(t.clone()))
            .collect()
    }

    pub fn query_words(&self, question: &str, answer: &str) -> QueryWords {
        let mut informative = self.informative_words(question);
        for w in self.informative_words(answer) {
            if !informative.contains(&w) {
                informative.push(w);
            }
        }
        let nouns = informative
            .iter()
            .filter(|w| self.lex.is_known(w, Pos::Noun))
            .cloned()
            .collect();
        QueryWords { informative, nouns }
    }

    /// Best match of `word` against `candidates`: lowest condition rank, then
    /// earliest candidate.
    fn best_match(&self, word: &str, candidates: &[String], pos: Option<Pos>) -> Option<WordMatch> {
        candidates
            .iter()
            .filter_map(|q| {
                let m = self.lex.words_match(word, q, pos);
                m.matched.then(|| WordMatch {
                    query: q.clone(),
                    annotation: word.to_string(),
                    condition: m.condition,
                })
            })
            .min_by_key(|m| m.condition)
    }

    /// Number of distinct informative words of `annotation` matching some
    /// informative word of the query, and the matches themselves.
    pub fn match_count_with(&self, annotation: &str, query: &QueryWords) -> (usize, Vec<WordMatch>) {
        let matches: Vec<WordMatch> = self
            .informative_words(annotation)
            .iter()
            .filter_map(|w| self.best_match(w, &query.informative, None))
            .collect();
        (matches.len(), matches)
    }

    pub fn match_count(&self, annotation: &str, question: &str, answer: &str) -> (usize, Vec<WordMatch>) {
        self.match_count_with(annotation, &self.query_words(question, answer))
    }

    /// All regions achieving the maximal match count, provided it reaches the
    /// configured minimum, plus that maximum.
    pub fn select_regions<'r>(
        &self,
        query: &QueryWords,
        regions: &'r [RegionAnnotation],
    ) -> (Vec<(&'r RegionAnnotation, Vec<WordMatch>)>, usize) {
        let scored: Vec<(usize, Vec<WordMatch>)> = regions
            .iter()
            .map(|r| self.match_count_with(&r.phrase, query))
            .collect();
        let best = scored.iter().map(|(c, _)| *c).max().unwrap_or(0);
        if best < self.cfg.min_region_matches {
            return (Vec::new(), best);
        }
        let selected = regions
            .iter()
            .zip(scored)
            .filter(|(_, (c, _))| *c == best)
            .map(|(r, (_, m))| (r, m))
            .collect();
        (selected, best)
    }

    pub fn is_counting_question(&self, question: &str) -> bool {
        let q = normalize_sentence(question);
        self.cfg.counting_prefixes.iter().any(|prefix| {
            let p = normalize_sentence(prefix);
            !p.is_empty()
                && q.strip_prefix(&p)
                    .is_some_and(|rest| rest.is_empty() || rest.starts_with(' '))
        })
    }

    fn inside(&self, object: &BoundingBox, region: &BoundingBox) -> bool {
        match self.cfg.containment {
            Containment::Center => {
                let (cx, cy) = object.center();
                region.contains_point(cx, cy)
            }
            Containment::Full => region.contains_box(object),
        }
    }

    /// Objects whose name matches an informative noun, restricted to the
    /// selected regions when there are any, then IoU-deduplicated.
    pub fn select_objects<'o>(
        &self,
        query: &QueryWords,
        objects: &'o [ObjectAnnotation],
        selected_regions: &[BoundingBox],
    ) -> Vec<(&'o ObjectAnnotation, WordMatch)> {
        let mut kept: Vec<(&ObjectAnnotation, WordMatch)> = objects
            .iter()
            .filter_map(|o| {
                o.names
                    .iter()
                    .filter_map(|name| self.best_match(name, &query.nouns, Some(Pos::Noun)))
                    .min_by_key(|m| m.condition)
                    .map(|m| (o, m))
            })
            .filter(|(o, _)| {
                selected_regions.is_empty()
                    || selected_regions.iter().any(|r| self.inside(&o.bbox, r))
            })
            .collect();
        // Stable sort keeps input order among equal keys.
        kept.sort_by_key(|(o, m)| (m.condition.rank(), std::cmp::Reverse(o.bbox.area())));
        let mut out: Vec<(&ObjectAnnotation, WordMatch)> = Vec::new();
        for (o, m) in kept {
            if out
                .iter()
                .all(|(k, _)| k.bbox.iou(&o.bbox) < self.cfg.iou_threshold)
            {
                out.push((o, m));
            }
        }
        out
    }

    pub fn mine_triplet(
        &self,
        t: &QaTriplet,
        regions: &[RegionAnnotation],
        objects: &[ObjectAnnotation],
    ) -> Option<GroundingLabel> {
        let query = self.query_words(&t.question, &t.answer);
        let (selected, best) = self.select_regions(&query, regions);
        let region_boxes: Vec<BoundingBox> = selected.iter().map(|(r, _)| r.bbox).collect();
        let chosen = self.select_objects(&query, objects, &region_boxes);
        let is_counting = self.is_counting_question(&t.question);

        let mut matched_words = Vec::new();
        let mut push = |m: &WordMatch| {
            if !matched_words.contains(m) {
                matched_words.push(m.clone());
            }
        };
        if !is_counting {
            selected.iter().flat_map(|(_, ms)| ms).for_each(&mut push);
        }
        chosen.iter().for_each(|(_, m)| push(m));

        let label = GroundingLabel {
            qa_id: t.qa_id,
            image_id: t.image_id,
            region_boxes: if is_counting { Vec::new() } else { region_boxes },
            object_boxes: chosen.iter().map(|(o, _)| o.bbox).collect(),
            is_counting,
            region_match_count: best,
            matched_words,
        };
        (!label.region_boxes.is_empty() || !label.object_boxes.is_empty()).then_some(label)
    }

    /// Mine every triplet. Triplets are processed in parallel; the output keeps
    /// input order.
    pub fn mine(&self, d: &Dataset) -> Vec<GroundingLabel> {
        d.triplets
            .par_iter()
            .map(|t| self.mine_triplet(t, d.regions(t.image_id), d.objects(t.image_id)))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }
}

pub fn mine(d: &Dataset, lex: &Lexicon, cfg: &MinerConfig) -> Vec<GroundingLabel> {
    Miner::new(lex, cfg).mine(d)
}

/// One label per line, fields in declaration order.
pub fn labels_to_ndjson(labels: &[GroundingLabel]) -> String {
    let mut out = String::new();
    for l in labels {
        out.push_str(&serde_json::to_string(l).expect("label serializes"));
        out.push('\n');
    }
    out
}

pub fn labels_from_ndjson(text: &str) -> Result<Vec<GroundingLabel>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
