//! Shallow prompt grammar: noun-phrase chunking over lexicon tags.
//!
//! Tokens are tagged from the lexicon (closed classes, nouns, verbs,
//! relation phrases). A noun phrase is an optional determiner/numeral
//! followed by a run of adjectives, nouns and participles; its head is the
//! last noun of the leading noun/adjective cluster. Predicates after a
//! head attach to the current subject group (coordinated with "and" until a
//! predicate is seen). A noun phrase introduced by a plain preposition
//! ("down the street") is scenery and produces no instance.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{
    InstanceNode, KinematicHint, MotionCategory, MotionGraph, PlacementHint, RelationEdge, RelationKind,
};
use crate::lexicon::{FunctionWord, Lexicon, NounEntry, RelationEntry, VerbEntry};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    EmptyPrompt,
    /// No noun phrase matched; callers may fall back to a remote planner.
    NoInstanceFound,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyPrompt => f.write_str("prompt is empty"),
            Self::NoInstanceFound => f.write_str("no instance found in prompt"),
        }
    }
}

impl core::error::Error for ParseError {}

#[derive(Debug, Clone)]
enum Tag {
    Function(FunctionWord),
    Noun { lemma: String, entry: NounEntry },
    Verb { entry: VerbEntry },
    Relation { phrase: String, entry: RelationEntry },
}

#[derive(Debug, Clone)]
struct Token {
    surface: String,
    tag: Tag,
}

impl Token {
    fn is_noun(&self) -> bool {
        matches!(self.tag, Tag::Noun { .. })
    }
    fn is_adjective(&self) -> bool {
        matches!(self.tag, Tag::Function(FunctionWord::Adjective))
    }
    fn is_verb(&self) -> bool {
        matches!(self.tag, Tag::Verb { .. })
    }
}

fn split_words(prompt: &str) -> Vec<String> {
    let mut words = Vec::new();
    for raw in prompt.split_whitespace() {
        let mut current = String::new();
        for ch in raw.chars() {
            match ch {
                ',' | ';' | '.' => {
                    if !current.is_empty() {
                        words.push(core::mem::take(&mut current));
                    }
                    words.push(",".to_string());
                }
                c if c.is_alphanumeric() || c == '-' || c == '\'' => {
                    current.extend(c.to_lowercase());
                }
                _ => {}
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words
}

fn tag_word(word: &str, lexicon: &Lexicon) -> Tag {
    if let Some(fw) = lexicon.function_word(word) {
        return Tag::Function(fw);
    }
    if let Some(entry) = lexicon.noun_exact(word) {
        return Tag::Noun { lemma: word.to_string(), entry: *entry };
    }
    if let Some(entry) = lexicon.verb_exact(word) {
        return Tag::Verb { entry: *entry };
    }
    let participle = word.len() > 4 && (word.ends_with("ing") || word.ends_with("ed"));
    let verb = lexicon.verb(word);
    let noun = lexicon.noun(word);
    match (participle, verb, noun) {
        (true, Some((_, e)), _) => Tag::Verb { entry: *e },
        (_, _, Some((lemma, e))) => Tag::Noun { lemma, entry: *e },
        (_, Some((_, e)), None) => Tag::Verb { entry: *e },
        _ if word.len() > 3 && word.ends_with("ly") => {
            Tag::Function(FunctionWord::Adverb { speed: None, direction: None })
        }
        _ if participle => Tag::Verb { entry: lexicon.verb_or_fallback(word) },
        _ => Tag::Noun { lemma: word.to_string(), entry: lexicon.noun_or_fallback(word) },
    }
}

fn tokenize(prompt: &str, lexicon: &Lexicon) -> Vec<Token> {
    let words = split_words(prompt);
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    let mut tokens = Vec::with_capacity(words.len());
    let mut i = 0;
    while i < refs.len() {
        if let Some((len, phrase, entry)) = lexicon.relation_at(&refs, i) {
            tokens.push(Token {
                surface: refs[i..i + len].join(" "),
                tag: Tag::Relation { phrase: phrase.to_string(), entry: *entry },
            });
            i += len;
            continue;
        }
        tokens.push(Token { surface: words[i].clone(), tag: tag_word(refs[i], lexicon) });
        i += 1;
    }
    tokens
}

struct NounPhrase {
    count: u32,
    phrase: String,
    noun: NounEntry,
    attributes: Vec<String>,
}

/// Tries to read a noun phrase at `start`; returns it and the index after its head.
fn noun_phrase(tokens: &[Token], start: usize) -> Option<(NounPhrase, usize)> {
    let mut j = start;
    let mut count = 1;
    while let Some(tok) = tokens.get(j) {
        match tok.tag {
            Tag::Function(FunctionWord::Determiner) => {}
            Tag::Function(FunctionWord::Numeral(n)) => count = n,
            _ => break,
        }
        j += 1;
    }
    let run_start = j;
    let mut head = None;
    while let Some(tok) = tokens.get(j) {
        if !(tok.is_noun() || tok.is_adjective() || tok.is_verb()) {
            break;
        }
        if tok.is_noun() {
            let next_is_nominal = tokens.get(j + 1).is_some_and(|t| t.is_noun() || t.is_adjective());
            if !next_is_nominal {
                head = Some(j);
                break;
            }
        } else if tok.is_verb() && j > run_start && !tokens[j - 1].is_verb() {
            // a participle after a modifier ends the cluster: "a red ... dancing"
            if tokens[j - 1].is_noun() {
                head = Some(j - 1);
                break;
            }
        }
        j += 1;
    }
    let head = head?;
    let Tag::Noun { lemma, entry } = &tokens[head].tag else { unreachable!() };
    let mut words: Vec<&str> = Vec::new();
    let mut attributes = Vec::new();
    for tok in &tokens[run_start..head] {
        if tok.is_verb() {
            attributes.push(tok.surface.clone());
        } else {
            words.push(&tok.surface);
        }
    }
    words.push(lemma);
    Some((NounPhrase { count, phrase: words.join(" "), noun: *entry, attributes }, head + 1))
}

struct Draft {
    noun_phrase: String,
    noun: NounEntry,
    attributes: Vec<String>,
    speed: Option<crate::graph::SpeedClass>,
    direction: Option<crate::graph::Direction>,
}

/// Category of the strongest attribute (`NonRigid > Rigid > Motionless`);
/// with no attributes, the noun's default; unknown nouns are motionless.
pub fn classify_motion(attributes: &[String], noun: &str, lexicon: &Lexicon) -> MotionCategory {
    strongest_attribute(attributes, lexicon)
        .map(|(_, e)| e.category)
        .unwrap_or_else(|| lexicon.noun_or_fallback(noun).category)
}

fn attribute_entry(attribute: &str, lexicon: &Lexicon) -> VerbEntry {
    let head = attribute.split_whitespace().next().unwrap_or(attribute);
    lexicon.verb_or_fallback(head)
}

/// First attribute whose category has the highest priority.
fn strongest_attribute(attributes: &[String], lexicon: &Lexicon) -> Option<(usize, VerbEntry)> {
    let mut best: Option<(usize, VerbEntry)> = None;
    for (i, attr) in attributes.iter().enumerate() {
        let entry = attribute_entry(attr, lexicon);
        if best.is_none_or(|(_, b)| entry.category > b.category) {
            best = Some((i, entry));
        }
    }
    best
}

#[derive(Default)]
struct State {
    group: Vec<usize>,
    group_has_predicate: bool,
    after_conjunction: bool,
    /// The previous token left us right after a head or predicate.
    predicate_position: bool,
    pending_location: bool,
    pending_relation: Option<(String, RelationEntry, Vec<usize>)>,
}

pub fn parse_prompt(prompt: &str, lexicon: &Lexicon) -> Result<MotionGraph, ParseError> {
    if prompt.trim().is_empty() {
        return Err(ParseError::EmptyPrompt);
    }
    let tokens = tokenize(prompt, lexicon);
    let mut drafts: Vec<Draft> = Vec::new();
    let mut edges: Vec<RelationEdge> = Vec::new();
    let mut st = State::default();

    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        match &tok.tag {
            Tag::Relation { phrase, entry } => {
                if entry.kind == RelationKind::Dynamic {
                    for &n in &st.group {
                        drafts[n].attributes.push(tok.surface.clone());
                    }
                    st.group_has_predicate |= !st.group.is_empty();
                }
                st.pending_relation = Some((phrase.clone(), *entry, st.group.clone()));
                st.pending_location = false;
                st.predicate_position = false;
                i += 1;
            }
            Tag::Function(FunctionWord::Preposition) => {
                st.pending_location = true;
                st.predicate_position = false;
                i += 1;
            }
            Tag::Function(FunctionWord::Conjunction) => {
                st.after_conjunction = true;
                st.predicate_position = false;
                st.pending_location = false;
                i += 1;
            }
            Tag::Function(FunctionWord::Auxiliary) => i += 1,
            Tag::Function(FunctionWord::Adverb { speed, direction }) => {
                for &n in &st.group {
                    if speed.is_some() {
                        drafts[n].speed = *speed;
                    }
                    if direction.is_some() {
                        drafts[n].direction = *direction;
                    }
                }
                i += 1;
            }
            Tag::Verb { entry } if st.predicate_position && !st.group.is_empty() => {
                attach_predicate(&mut drafts, &mut edges, &st.group, &tok.surface, entry);
                st.group_has_predicate = true;
                i += 1;
            }
            _ => match noun_phrase(&tokens, i) {
                Some((np, next)) => {
                    i = next;
                    if st.pending_location {
                        st.pending_location = false;
                        st.predicate_position = true;
                        continue;
                    }
                    let first = drafts.len();
                    for _ in 0..np.count.max(1) {
                        drafts.push(Draft {
                            noun_phrase: np.phrase.clone(),
                            noun: np.noun,
                            attributes: np.attributes.clone(),
                            speed: None,
                            direction: None,
                        });
                    }
                    let new: Vec<usize> = (first..drafts.len()).collect();
                    if let Some((phrase, entry, sources)) = st.pending_relation.take() {
                        for &s in &sources {
                            for &d in &new {
                                edges.push(RelationEdge {
                                    src: s as u32,
                                    dst: d as u32,
                                    kind: entry.kind,
                                    phrase: phrase.clone(),
                                    placement: Some(entry.placement),
                                });
                            }
                        }
                        st.group = new;
                        st.group_has_predicate = false;
                    } else if st.after_conjunction && !st.group_has_predicate && !st.group.is_empty() {
                        st.group.extend(new);
                    } else {
                        st.group = new;
                        st.group_has_predicate = false;
                    }
                    st.after_conjunction = false;
                    st.predicate_position = true;
                }
                None => {
                    if let Tag::Verb { entry } = &tok.tag {
                        if !st.group.is_empty() {
                            attach_predicate(&mut drafts, &mut edges, &st.group, &tok.surface, entry);
                            st.group_has_predicate = true;
                            st.predicate_position = true;
                        }
                    }
                    i += 1;
                }
            },
        }
    }

    if drafts.is_empty() {
        return Err(ParseError::NoInstanceFound);
    }

    let nodes = drafts.into_iter().enumerate().map(|(id, d)| finish_node(id as u32, d, lexicon)).collect();
    Ok(MotionGraph { nodes, edges, source_prompt: prompt.to_string() })
}

fn attach_predicate(
    drafts: &mut [Draft],
    edges: &mut Vec<RelationEdge>,
    group: &[usize],
    surface: &str,
    entry: &VerbEntry,
) {
    // Members that already carry their own motion ("a parked car and a man
    // walking") keep it, unless every member does.
    let bare: Vec<usize> = group.iter().copied().filter(|&n| drafts[n].attributes.is_empty()).collect();
    let targets = if bare.is_empty() { group } else { &bare[..] };
    for &n in targets {
        drafts[n].attributes.push(surface.to_string());
    }
    if entry.interactive {
        for pair in targets.windows(2) {
            edges.push(RelationEdge {
                src: pair[0] as u32,
                dst: pair[1] as u32,
                kind: RelationKind::Dynamic,
                phrase: surface.to_string(),
                placement: Some(PlacementHint::Near),
            });
        }
    }
}

fn finish_node(id: u32, draft: Draft, lexicon: &Lexicon) -> InstanceNode {
    let (category, mut hint): (MotionCategory, KinematicHint) = match strongest_attribute(&draft.attributes, lexicon) {
        Some((_, e)) => (e.category, e.hint),
        None => (draft.noun.category, draft.noun.hint),
    };
    if let Some(speed) = draft.speed {
        hint.speed = speed;
    }
    if let Some(direction) = draft.direction {
        hint.direction = direction;
    }
    InstanceNode { id, noun_phrase: draft.noun_phrase, motion_attributes: draft.attributes, category, hint }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Direction, SpeedClass};

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parked_car_next_to_tree() {
        let lex = Lexicon::builtin();
        let g = parse_prompt("a parked car next to a tree", &lex).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.nodes[0].noun_phrase, "car");
        assert_eq!(g.nodes[0].motion_attributes, strings(&["parked"]));
        assert_eq!(g.nodes[0].category, MotionCategory::Motionless);
        assert_eq!(g.nodes[1].noun_phrase, "tree");
        assert!(g.nodes[1].motion_attributes.is_empty());
        assert_eq!(g.nodes[1].category, MotionCategory::Motionless);
        assert_eq!(g.edges.len(), 1);
        let e = &g.edges[0];
        assert_eq!((e.src, e.dst, e.kind, e.phrase.as_str()), (0, 1, RelationKind::Spatial, "next to"));
        assert_eq!(e.placement, Some(PlacementHint::LeftOf));
    }

    #[test]
    fn ambulance_driving_down_street() {
        let lex = Lexicon::builtin();
        let g = parse_prompt("an ambulance driving down the street", &lex).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.nodes[0].noun_phrase, "ambulance");
        assert_eq!(g.nodes[0].category, MotionCategory::Rigid);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn empty_prompt() {
        let lex = Lexicon::builtin();
        assert_eq!(parse_prompt("", &lex), Err(ParseError::EmptyPrompt));
        assert_eq!(parse_prompt("   ", &lex), Err(ParseError::EmptyPrompt));
        assert_eq!(parse_prompt("and the", &lex), Err(ParseError::NoInstanceFound));
    }

    #[test]
    fn classify_examples() {
        let lex = Lexicon::builtin();
        assert_eq!(classify_motion(&strings(&["dancing"]), "woman", &lex), MotionCategory::NonRigid);
        assert_eq!(classify_motion(&[], "building", &lex), MotionCategory::Motionless);
        assert_eq!(classify_motion(&strings(&["standing"]), "man", &lex), MotionCategory::Motionless);
        assert_eq!(classify_motion(&[], "zeppelin", &lex), MotionCategory::Motionless);
        assert_eq!(classify_motion(&strings(&["frobnicating"]), "man", &lex), MotionCategory::Rigid);
        assert_eq!(
            classify_motion(&strings(&["standing", "driving", "dancing"]), "man", &lex),
            MotionCategory::NonRigid
        );
    }

    #[test]
    fn numerals_and_interactive_verbs() {
        let lex = Lexicon::builtin();
        let g = parse_prompt("two men boxing", &lex).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert!(g.nodes.iter().all(|n| n.category == MotionCategory::NonRigid && n.noun_phrase == "man"));
        assert_eq!(g.edges.len(), 1);
        assert_eq!((g.edges[0].src, g.edges[0].dst, g.edges[0].kind), (0, 1, RelationKind::Dynamic));
    }

    #[test]
    fn coordination_shares_predicate() {
        let lex = Lexicon::builtin();
        let g = parse_prompt("a man and a woman standing", &lex).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert!(g.nodes.iter().all(|n| n.category == MotionCategory::Motionless));
        assert!(g.nodes.iter().all(|n| n.motion_attributes == strings(&["standing"])));

        let g = parse_prompt("a man walking and a dog running", &lex).unwrap();
        assert_eq!(g.nodes[0].motion_attributes, strings(&["walking"]));
        assert_eq!(g.nodes[1].motion_attributes, strings(&["running"]));
    }

    #[test]
    fn adverbs_override_hint() {
        let lex = Lexicon::builtin();
        let g = parse_prompt("a car driving slowly leftward", &lex).unwrap();
        assert_eq!(g.nodes[0].hint.speed, SpeedClass::Slow);
        assert_eq!(g.nodes[0].hint.direction, Direction::Left);
    }

    #[test]
    fn dynamic_relation_becomes_attribute() {
        let lex = Lexicon::builtin();
        let g = parse_prompt("a bus passing by a tree", &lex).unwrap();
        assert_eq!(g.nodes[0].motion_attributes, strings(&["passing by"]));
        assert_eq!(g.nodes[0].category, MotionCategory::Rigid);
        assert_eq!(g.edges[0].kind, RelationKind::Dynamic);
        assert_eq!(g.edges[0].phrase, "pass by");
    }

    #[test]
    fn deterministic() {
        let lex = Lexicon::builtin();
        let p = "a red car driving next to two dogs running while a flag waves";
        assert_eq!(parse_prompt(p, &lex), parse_prompt(p, &lex));
        let g = parse_prompt(p, &lex).unwrap();
        assert!(g.validate().is_empty());
        assert_eq!(g.nodes[0].noun_phrase, "red car");
        assert_eq!(g.nodes.len(), 4);
        assert_eq!(g.nodes[3].category, MotionCategory::NonRigid);
        assert_eq!(g.edges.len(), 2);
    }
}
