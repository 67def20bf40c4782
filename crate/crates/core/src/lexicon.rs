//! Word lists that drive the shallow prompt grammar.
//!
//! A lexicon is loaded from tab-separated text, one entry per line:
//! `lemma<TAB>class<TAB>category<TAB>hint`. Lines starting with `#` are
//! comments. Two `*` rows (one `verb`, one `noun`) are mandatory; they are
//! returned for words the lexicon does not list, which makes every lookup total.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{
    Direction, KinematicHint, MotionCategory, OscillationClass, PlacementHint, RelationKind, SpeedClass,
};

const BUILTIN: &str = include_str!("../data/lexicon.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerbEntry {
    pub category: MotionCategory,
    pub hint: KinematicHint,
    /// Predicate describes an interaction between the instances it attaches to.
    pub interactive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NounEntry {
    pub category: MotionCategory,
    pub hint: KinematicHint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelationEntry {
    pub kind: RelationKind,
    pub placement: PlacementHint,
}

/// Closed-class words recognised by the chunker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionWord {
    Determiner,
    Numeral(u32),
    Conjunction,
    Preposition,
    Auxiliary,
    Adverb { speed: Option<SpeedClass>, direction: Option<Direction> },
    Adjective,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LexiconError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "lexicon: {}", self.message)
        } else {
            write!(f, "lexicon line {}: {}", self.line, self.message)
        }
    }
}

impl core::error::Error for LexiconError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    verbs: BTreeMap<String, VerbEntry>,
    verb_fallback: VerbEntry,
    nouns: BTreeMap<String, NounEntry>,
    noun_fallback: NounEntry,
    plurals: BTreeMap<String, String>,
    relations: BTreeMap<String, RelationEntry>,
    /// Relation phrases split into words, longest first.
    relation_words: Vec<(Vec<String>, String)>,
    function_words: BTreeMap<String, FunctionWord>,
}

#[derive(Default)]
struct Hint {
    speed: Option<SpeedClass>,
    oscillation: Option<OscillationClass>,
    direction: Option<Direction>,
    placement: Option<PlacementHint>,
    plural: Option<String>,
    count: Option<u32>,
    interactive: bool,
}

fn parse_hint(raw: &str, line: usize) -> Result<Hint, LexiconError> {
    let err = |message: String| LexiconError { line, message };
    let mut hint = Hint::default();
    if raw == "-" || raw.is_empty() {
        return Ok(hint);
    }
    for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = match item.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => (item, ""),
        };
        let bad = || err(alloc::format!("bad value '{value}' for hint '{key}'"));
        match key {
            "speed" => hint.speed = Some(value.parse().map_err(|_| bad())?),
            "osc" => hint.oscillation = Some(value.parse().map_err(|_| bad())?),
            "dir" => hint.direction = Some(value.parse().map_err(|_| bad())?),
            "place" => hint.placement = Some(value.parse().map_err(|_| bad())?),
            "plural" if !value.is_empty() => hint.plural = Some(value.to_string()),
            "count" => hint.count = Some(value.parse().map_err(|_| bad())?),
            "interactive" => hint.interactive = true,
            _ => return Err(err(alloc::format!("unknown hint '{item}'"))),
        }
    }
    Ok(hint)
}

impl Hint {
    fn kinematic(&self) -> KinematicHint {
        let base = KinematicHint::default();
        KinematicHint {
            speed: self.speed.unwrap_or(base.speed),
            oscillation: self.oscillation.unwrap_or(base.oscillation),
            direction: self.direction.unwrap_or(base.direction),
        }
    }
}

impl Lexicon {
    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("builtin lexicon is well formed")
    }

    /// Raw text of the shipped lexicon, for writing an editable copy.
    pub fn builtin_source() -> &'static str {
        BUILTIN
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut verbs = BTreeMap::new();
        let mut nouns = BTreeMap::new();
        let mut plurals = BTreeMap::new();
        let mut relations = BTreeMap::new();
        let mut function_words = BTreeMap::new();
        let mut verb_fallback = None;
        let mut noun_fallback = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if fields.len() != 4 {
                return Err(LexiconError {
                    line,
                    message: alloc::format!("expected 4 tab-separated fields, found {}", fields.len()),
                });
            }
            let (lemma, class, category, hint) =
                (fields[0].trim(), fields[1].trim(), fields[2].trim(), fields[3].trim());
            if lemma.is_empty() {
                return Err(LexiconError { line, message: "empty lemma".into() });
            }
            if lemma.chars().any(char::is_uppercase) {
                return Err(LexiconError { line, message: alloc::format!("lemma '{lemma}' is not lowercase") });
            }
            let hint = parse_hint(hint, line)?;
            let motion = || {
                category.parse::<MotionCategory>().map_err(|_| LexiconError {
                    line,
                    message: alloc::format!("'{category}' is not a motion category"),
                })
            };
            let dup = || LexiconError { line, message: alloc::format!("duplicate {class} entry '{lemma}'") };

            match class {
                "verb" => {
                    let entry =
                        VerbEntry { category: motion()?, hint: hint.kinematic(), interactive: hint.interactive };
                    if lemma == "*" {
                        verb_fallback = Some(entry);
                    } else if verbs.insert(lemma.to_string(), entry).is_some() {
                        return Err(dup());
                    }
                }
                "noun" => {
                    let entry = NounEntry { category: motion()?, hint: hint.kinematic() };
                    if lemma == "*" {
                        noun_fallback = Some(entry);
                        continue;
                    }
                    if nouns.insert(lemma.to_string(), entry).is_some() {
                        return Err(dup());
                    }
                    if let Some(plural) = hint.plural {
                        plurals.insert(plural, lemma.to_string());
                    }
                }
                "relation" => {
                    let kind = category.parse::<RelationKind>().map_err(|_| LexiconError {
                        line,
                        message: alloc::format!("'{category}' is not a relation kind"),
                    })?;
                    let entry = RelationEntry { kind, placement: hint.placement.unwrap_or(PlacementHint::Near) };
                    let key = lemma.split_whitespace().collect::<Vec<_>>().join(" ");
                    if relations.insert(key, entry).is_some() {
                        return Err(dup());
                    }
                }
                "det" | "num" | "conj" | "prep" | "aux" | "adv" | "adj" => {
                    let word = match class {
                        "det" => FunctionWord::Determiner,
                        "num" => FunctionWord::Numeral(hint.count.unwrap_or(1).max(1)),
                        "conj" => FunctionWord::Conjunction,
                        "prep" => FunctionWord::Preposition,
                        "aux" => FunctionWord::Auxiliary,
                        "adv" => FunctionWord::Adverb { speed: hint.speed, direction: hint.direction },
                        _ => FunctionWord::Adjective,
                    };
                    if function_words.insert(lemma.to_string(), word).is_some() {
                        return Err(dup());
                    }
                }
                other => return Err(LexiconError { line, message: alloc::format!("unknown class '{other}'") }),
            }
        }

        let verb_fallback =
            verb_fallback.ok_or_else(|| LexiconError { line: 0, message: "missing '*' verb fallback".into() })?;
        let noun_fallback =
            noun_fallback.ok_or_else(|| LexiconError { line: 0, message: "missing '*' noun fallback".into() })?;

        let mut relation_words: Vec<(Vec<String>, String)> =
            relations.keys().map(|k: &String| (k.split(' ').map(ToString::to_string).collect(), k.clone())).collect();
        // Longest phrase first; BTreeMap order breaks ties.
        relation_words.sort_by_key(|w| core::cmp::Reverse(w.0.len()));

        Ok(Self { verbs, verb_fallback, nouns, noun_fallback, plurals, relations, relation_words, function_words })
    }

    pub fn len(&self) -> usize {
        self.verbs.len() + self.nouns.len() + self.relations.len() + self.function_words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn function_word(&self, word: &str) -> Option<FunctionWord> {
        self.function_words.get(word).copied()
    }

    pub fn verb_exact(&self, word: &str) -> Option<&VerbEntry> {
        self.verbs.get(word)
    }

    /// Verb lookup through simple inflection stripping (`-ing`, `-ed`, `-s`).
    pub fn verb(&self, word: &str) -> Option<(String, &VerbEntry)> {
        inflection_candidates(word).into_iter().find_map(|c| self.verbs.get(&c).map(|e| (c, e)))
    }

    /// Total verb lookup; unlisted verbs get the `*` row.
    pub fn verb_or_fallback(&self, word: &str) -> VerbEntry {
        self.verb(word).map(|(_, e)| *e).unwrap_or(self.verb_fallback)
    }

    pub fn noun_exact(&self, word: &str) -> Option<&NounEntry> {
        self.nouns.get(word)
    }

    /// Noun lookup through listed irregular plurals and regular `-s`/`-es`/`-ies`.
    pub fn noun(&self, word: &str) -> Option<(String, &NounEntry)> {
        if let Some(e) = self.nouns.get(word) {
            return Some((word.to_string(), e));
        }
        if let Some(lemma) = self.plurals.get(word) {
            return self.nouns.get(lemma).map(|e| (lemma.clone(), e));
        }
        plural_candidates(word).into_iter().find_map(|c| self.nouns.get(&c).map(|e| (c, e)))
    }

    /// Total noun lookup; unlisted nouns get the `*` row.
    pub fn noun_or_fallback(&self, word: &str) -> NounEntry {
        self.noun(word).map(|(_, e)| *e).unwrap_or(self.noun_fallback)
    }

    pub fn relation(&self, phrase: &str) -> Option<&RelationEntry> {
        self.relations.get(phrase)
    }

    /// Longest relation phrase starting at `words[start]`. The first word may
    /// be inflected ("passing by" matches "pass by"). Returns the number of
    /// words consumed and the canonical phrase.
    pub fn relation_at(&self, words: &[&str], start: usize) -> Option<(usize, &str, &RelationEntry)> {
        let rest = &words[start..];
        let first = rest.first()?;
        let first_forms = inflection_candidates(first);
        for (parts, key) in &self.relation_words {
            if parts.len() > rest.len() {
                continue;
            }
            if !first_forms.iter().any(|f| *f == parts[0]) {
                continue;
            }
            if parts[1..].iter().zip(&rest[1..]).all(|(p, w)| p == w) {
                let entry = &self.relations[key];
                return Some((parts.len(), key.as_str(), entry));
            }
        }
        None
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Candidate base forms for a possibly inflected verb, most literal first.
pub(crate) fn inflection_candidates(word: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |s: String| {
        if s.len() >= 2 && !out.contains(&s) {
            out.push(s);
        }
    };
    push(word.to_string());
    let undouble = |stem: &str| -> Option<String> {
        let b = stem.as_bytes();
        let n = b.len();
        (n >= 3 && b[n - 1] == b[n - 2]).then(|| stem[..n - 1].to_string())
    };
    if let Some(stem) = word.strip_suffix("ing") {
        push(stem.to_string());
        push(alloc::format!("{stem}e"));
        if let Some(s) = undouble(stem) {
            push(s);
        }
        if let Some(s) = stem.strip_suffix('y') {
            // lying -> lie
            push(alloc::format!("{s}ie"));
        }
    }
    if let Some(stem) = word.strip_suffix("ed") {
        push(stem.to_string());
        push(alloc::format!("{stem}e"));
        if let Some(s) = undouble(stem) {
            push(s);
        }
        if let Some(s) = stem.strip_suffix('i') {
            push(alloc::format!("{s}y"));
        }
    }
    for candidate in plural_candidates(word) {
        push(candidate);
    }
    out
}

fn plural_candidates(word: &str) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(stem) = word.strip_suffix("ies") {
        out.push(alloc::format!("{stem}y"));
    }
    if let Some(stem) = word.strip_suffix("es") {
        out.push(stem.to_string());
    }
    if let Some(stem) = word.strip_suffix('s') {
        if !stem.ends_with('s') {
            out.push(stem.to_string());
        }
    }
    out
}
