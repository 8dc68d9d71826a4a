//! WordNet index/exception parsing, morphy lemmatization and the pairwise
//! word-match predicate used when scoring annotations against QA text.
//!
//! Only the noun and verb parts of the WNDB database are read. The lexicon is
//! immutable once loaded apart from merging alias tables.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed license header in {} at line {line}", path.display())]
    MalformedHeader { path: PathBuf, line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pos {
    Noun,
    Verb,
}

impl Pos {
    pub const ALL: [Pos; 2] = [Pos::Noun, Pos::Verb];

    fn file_stem(self) -> &'static str {
        match self {
            Pos::Noun => "noun",
            Pos::Verb => "verb",
        }
    }
}

/// A synset is identified by its part of speech and byte offset in the
/// matching `data.*` file. Offsets are only unique within one POS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SynsetId {
    pub pos: Pos,
    pub offset: u32,
}

impl fmt::Display for SynsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.pos {
            Pos::Noun => 'n',
            Pos::Verb => 'v',
        };
        write!(f, "{:08}-{tag}", self.offset)
    }
}

/// Which of the four match conditions fired. The declaration order is the
/// reporting priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MatchCondition {
    Raw,
    Lemma,
    Synset,
    Alias,
    None,
}

impl MatchCondition {
    pub fn rank(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchResult {
    pub matched: bool,
    pub condition: MatchCondition,
}

impl MatchResult {
    const NO_MATCH: MatchResult = MatchResult {
        matched: false,
        condition: MatchCondition::None,
    };

    fn hit(condition: MatchCondition) -> Self {
        MatchResult {
            matched: true,
            condition,
        }
    }
}

/// Lines skipped while loading, per file name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub skipped: Vec<(String, usize)>,
}

impl LoadReport {
    pub fn total_skipped(&self) -> usize {
        self.skipped.iter().map(|(_, n)| n).sum()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    noun_index: HashMap<String, Vec<u32>>,
    verb_index: HashMap<String, Vec<u32>>,
    noun_exceptions: HashMap<String, String>,
    verb_exceptions: HashMap<String, String>,
    aliases: HashMap<String, BTreeSet<String>>,
    report: LoadReport,
}

/// Lowercase, trim, strip surrounding punctuation and join inner whitespace
/// with `_` (WordNet's collocation separator).
pub fn normalize_token(raw: &str) -> String {
    let lowered = raw.trim().to_lowercase();
    let stripped = lowered.trim_matches(|c: char| !c.is_alphanumeric());
    stripped.split_whitespace().collect::<Vec<_>>().join("_")
}

impl Lexicon {
    /// Load `index.noun`, `index.verb`, `noun.exc` and `verb.exc` from a WNDB
    /// dict directory.
    pub fn load_wordnet(dir: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let dir = dir.as_ref();
        let mut lex = Lexicon::default();
        for pos in Pos::ALL {
            let name = format!("index.{}", pos.file_stem());
            let path = dir.join(&name);
            let text = read_file(&path)?;
            let (index, skipped) = parse_index(&text, &path)?;
            lex.report.skipped.push((name, skipped));
            *lex.index_mut(pos) = index;
        }
        for pos in Pos::ALL {
            let name = format!("{}.exc", pos.file_stem());
            let path = dir.join(&name);
            let text = read_file(&path)?;
            let (exc, skipped) = parse_exceptions(&text);
            lex.report.skipped.push((name, skipped));
            *lex.exceptions_mut(pos) = exc;
        }
        Ok(lex)
    }

    /// Merge an alias file: each line is a comma-separated equivalence class.
    pub fn load_aliases(&mut self, path: impl AsRef<Path>) -> Result<(), LexiconError> {
        let text = read_file(path.as_ref())?;
        self.merge_aliases(&text);
        Ok(())
    }

    pub fn merge_aliases(&mut self, text: &str) {
        for line in text.lines() {
            let names: BTreeSet<String> = line
                .split(',')
                .map(normalize_token)
                .filter(|n| !n.is_empty())
                .collect();
            if names.len() < 2 {
                continue;
            }
            for name in &names {
                let entry = self.aliases.entry(name.clone()).or_default();
                entry.extend(names.iter().filter(|other| *other != name).cloned());
            }
        }
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    pub fn index_len(&self, pos: Pos) -> usize {
        self.index(pos).len()
    }

    pub fn contains(&self, word: &str, pos: Pos) -> bool {
        self.index(pos).contains_key(word)
    }

    pub fn exception(&self, word: &str, pos: Pos) -> Option<&str> {
        self.exceptions(pos).get(word).map(String::as_str)
    }

    pub fn exception_entries(&self, pos: Pos) -> impl Iterator<Item = (&str, &str)> {
        self.exceptions(pos)
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn index_words(&self, pos: Pos) -> impl Iterator<Item = &str> {
        self.index(pos).keys().map(String::as_str)
    }

    pub fn aliases_of(&self, word: &str) -> Option<&BTreeSet<String>> {
        self.aliases.get(word)
    }

    pub fn alias_table(&self) -> &HashMap<String, BTreeSet<String>> {
        &self.aliases
    }

    /// Synset offsets listed for `word` in the index, without lemmatization.
    pub fn index_offsets(&self, word: &str, pos: Pos) -> &[u32] {
        self.index(pos).get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    /// WordNet morphy: exception list, then the word itself if indexed, then
    /// the detachment rules for `pos`. The step repeats until the form stops
    /// changing, so exception chains such as furculae, furcula, furculum end
    /// at their last member and the result is its own lemma. A cycle resolves
    /// to its smallest member.
    pub fn morphy(&self, word: &str, pos: Pos) -> Option<String> {
        let mut cur = self.morphy_step(word, pos)?;
        let mut seen = vec![cur.clone()];
        while let Some(next) = self.morphy_step(&cur, pos) {
            if next == cur {
                break;
            }
            if let Some(at) = seen.iter().position(|s| *s == next) {
                return seen[at..].iter().min().cloned();
            }
            seen.push(next.clone());
            cur = next;
        }
        Some(cur)
    }

    fn morphy_step(&self, word: &str, pos: Pos) -> Option<String> {
        if word.is_empty() {
            return None;
        }
        if let Some(base) = self.exception(word, pos) {
            return Some(base.to_string());
        }
        if self.contains(word, pos) {
            return Some(word.to_string());
        }
        detachment_rules(pos)
            .iter()
            .filter_map(|(suffix, repl)| {
                word.strip_suffix(suffix)
                    .filter(|stem| !stem.is_empty())
                    .map(|stem| format!("{stem}{repl}"))
            })
            .find(|cand| self.contains(cand, pos))
    }

    /// Lemmas of `word` under each part of speech where morphy succeeds.
    pub fn lemmas(&self, word: &str) -> Vec<(Pos, String)> {
        Pos::ALL
            .iter()
            .filter_map(|&pos| self.morphy(word, pos).map(|l| (pos, l)))
            .collect()
    }

    pub fn synsets(&self, word: &str, pos: Pos) -> BTreeSet<SynsetId> {
        let mut out = BTreeSet::new();
        let mut add = |w: &str| {
            out.extend(
                self.index_offsets(w, pos)
                    .iter()
                    .map(|&offset| SynsetId { pos, offset }),
            );
        };
        add(word);
        if let Some(lemma) = self.morphy(word, pos) {
            if lemma != word {
                add(&lemma);
            }
        }
        out
    }

    /// Noun and verb synsets together, or only `pos` when given.
    pub fn synsets_any(&self, word: &str, pos: Option<Pos>) -> BTreeSet<SynsetId> {
        pos_list(pos)
            .iter()
            .flat_map(|&p| self.synsets(word, p))
            .collect()
    }

    /// True when `word` has a noun or verb entry directly or via morphy.
    pub fn is_known(&self, word: &str, pos: Pos) -> bool {
        self.morphy(word, pos).is_some()
    }

    /// Check the four match conditions in priority order and report the first
    /// that holds.
    pub fn words_match(&self, w1: &str, w2: &str, pos_hint: Option<Pos>) -> MatchResult {
        let a = normalize_token(w1);
        let b = normalize_token(w2);
        if a.is_empty() || b.is_empty() {
            return MatchResult::NO_MATCH;
        }
        if a == b {
            return MatchResult::hit(MatchCondition::Raw);
        }
        let positions = pos_list(pos_hint);
        let lemma_match = positions.iter().any(|&pos| {
            matches!((self.morphy(&a, pos), self.morphy(&b, pos)), (Some(x), Some(y)) if x == y)
        });
        if lemma_match {
            return MatchResult::hit(MatchCondition::Lemma);
        }
        let sa = self.synsets_any(&a, pos_hint);
        if !sa.is_empty() && !sa.is_disjoint(&self.synsets_any(&b, pos_hint)) {
            return MatchResult::hit(MatchCondition::Synset);
        }
        let forms_a = self.surface_and_lemmas(&a, positions);
        let forms_b = self.surface_and_lemmas(&b, positions);
        let alias_match = forms_a.iter().any(|fa| {
            self.aliases
                .get(fa)
                .is_some_and(|set| forms_b.iter().any(|fb| set.contains(fb)))
        });
        if alias_match {
            return MatchResult::hit(MatchCondition::Alias);
        }
        MatchResult::NO_MATCH
    }

    fn surface_and_lemmas(&self, word: &str, positions: &[Pos]) -> BTreeSet<String> {
        let mut forms = BTreeSet::from([word.to_string()]);
        forms.extend(positions.iter().filter_map(|&p| self.morphy(word, p)));
        forms
    }

    fn index(&self, pos: Pos) -> &HashMap<String, Vec<u32>> {
        match pos {
            Pos::Noun => &self.noun_index,
            Pos::Verb => &self.verb_index,
        }
    }

    fn index_mut(&mut self, pos: Pos) -> &mut HashMap<String, Vec<u32>> {
        match pos {
            Pos::Noun => &mut self.noun_index,
            Pos::Verb => &mut self.verb_index,
        }
    }

    fn exceptions(&self, pos: Pos) -> &HashMap<String, String> {
        match pos {
            Pos::Noun => &self.noun_exceptions,
            Pos::Verb => &self.verb_exceptions,
        }
    }

    fn exceptions_mut(&mut self, pos: Pos) -> &mut HashMap<String, String> {
        match pos {
            Pos::Noun => &mut self.noun_exceptions,
            Pos::Verb => &mut self.verb_exceptions,
        }
    }
}

fn pos_list(pos: Option<Pos>) -> &'static [Pos] {
    match pos {
        Some(Pos::Noun) => &[Pos::Noun],
        Some(Pos::Verb) => &[Pos::Verb],
        None => &Pos::ALL,
    }
}

fn detachment_rules(pos: Pos) -> &'static [(&'static str, &'static str)] {
    match pos {
        Pos::Noun => &[
            ("s", ""),
            ("ses", "s"),
            ("xes", "x"),
            ("zes", "z"),
            ("ches", "ch"),
            ("shes", "sh"),
            ("men", "man"),
            ("ies", "y"),
        ],
        Pos::Verb => &[
            ("s", ""),
            ("ies", "y"),
            ("es", "e"),
            ("es", ""),
            ("ed", "e"),
            ("ed", ""),
            ("ing", "e"),
            ("ing", ""),
        ],
    }
}

fn read_file(path: &Path) -> Result<String, LexiconError> {
    fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parse an `index.pos` file. Returns the lemma map and the number of data
/// lines that could not be parsed.
fn parse_index(
    text: &str,
    path: &Path,
) -> Result<(HashMap<String, Vec<u32>>, usize), LexiconError> {
    let mut index = HashMap::new();
    let mut skipped = 0;
    let mut in_header = true;
    for (lineno, line) in text.lines().enumerate() {
        if line.starts_with(' ') {
            // License lines look like "  12 text..." and only open the file.
            if !in_header || !is_header_line(line) {
                return Err(LexiconError::MalformedHeader {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                });
            }
            continue;
        }
        in_header = false;
        if line.trim().is_empty() {
            continue;
        }
        match parse_index_line(line) {
            Some((lemma, offsets)) => {
                index.insert(lemma, offsets);
            }
            None => skipped += 1,
        }
    }
    Ok((index, skipped))
}

fn is_header_line(line: &str) -> bool {
    line.strip_prefix("  ")
        .map(|rest| {
            let digits = rest.chars().take_while(char::is_ascii_digit).count();
            digits > 0 && rest[digits..].chars().next().is_none_or(|c| c == ' ')
        })
        .unwrap_or(false)
}

// lemma pos synset_cnt p_cnt [ptr_symbol...] sense_cnt tagsense_cnt synset_offset...
fn parse_index_line(line: &str) -> Option<(String, Vec<u32>)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let lemma = fields.first()?.to_lowercase();
    let synset_cnt: usize = fields.get(2)?.parse().ok()?;
    let p_cnt: usize = fields.get(3)?.parse().ok()?;
    let offsets_start = 4 + p_cnt + 2;
    let offsets = fields.get(offsets_start..offsets_start + synset_cnt)?;
    if fields.len() != offsets_start + synset_cnt {
        return None;
    }
    let offsets = offsets
        .iter()
        .map(|o| o.parse::<u32>().ok())
        .collect::<Option<Vec<_>>>()?;
    Some((lemma, offsets))
}

fn parse_exceptions(text: &str) -> (HashMap<String, String>, usize) {
    let mut exc = HashMap::new();
    let mut skipped = 0;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        match (fields.next(), fields.next()) {
            (Some(inflected), Some(base)) => {
                exc.entry(inflected.to_lowercase())
                    .or_insert_with(|| base.to_lowercase());
            }
            _ => skipped += 1,
        }
    }
    (exc, skipped)
}
