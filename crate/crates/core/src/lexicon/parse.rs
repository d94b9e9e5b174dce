use std::collections::{HashMap, HashSet};

use super::normalize_phrase;

/// Verb used when a phrase contains no recognisable verb.
pub const DEFAULT_VERB: &str = "doing";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerbSource {
    Parsed,
    DefaultDoing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NounSource {
    Parsed,
    OverrideTable,
    /// No listed noun and no override: the last content word was used.
    PhraseHead,
}

/// Verb (progressive form) and noun (lemma) extracted from an action phrase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbNounPair {
    pub verb: String,
    pub noun: String,
    pub verb_source: VerbSource,
    pub noun_source: NounSource,
}

/// Word lists and tables driving the rule-based verb/noun split.
#[derive(Debug, Clone)]
pub struct Lexicon {
    /// lemma -> progressive form
    verbs: HashMap<String, String>,
    /// progressive form -> lemma
    progressive: HashMap<String, String>,
    nouns: HashSet<String>,
    exceptions: HashMap<String, String>,
    noun_overrides: HashMap<String, String>,
    stopwords: HashSet<String>,
}

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn pairs(text: &str) -> impl Iterator<Item = (String, String)> + '_ {
    data_lines(text).filter_map(|l| {
        let (a, b) = l.split_once('\t')?;
        Some((normalize_phrase(a), normalize_phrase(b)))
    })
}

impl Lexicon {
    /// Builds a lexicon from table texts: `lemma<TAB>progressive` verbs, one
    /// noun per line, `surface<TAB>lemma` exceptions, `phrase<TAB>noun`
    /// overrides and one stopword per line. `#` starts a comment line.
    pub fn from_tables(verbs: &str, nouns: &str, exceptions: &str, overrides: &str, stopwords: &str) -> Self {
        let verbs: HashMap<String, String> = pairs(verbs).collect();
        let progressive = verbs.iter().map(|(l, p)| (p.clone(), l.clone())).collect();
        Self {
            verbs,
            progressive,
            nouns: data_lines(nouns).map(normalize_phrase).collect(),
            exceptions: pairs(exceptions).collect(),
            noun_overrides: pairs(overrides).collect(),
            stopwords: data_lines(stopwords).map(normalize_phrase).collect(),
        }
    }

    pub fn is_verb(&self, lemma: &str) -> bool {
        self.verbs.contains_key(lemma)
    }

    pub fn is_noun(&self, lemma: &str) -> bool {
        self.nouns.contains(lemma)
    }

    fn known(&self, w: &str) -> bool {
        self.is_verb(w) || self.is_noun(w)
    }

    /// Exceptions first, then known progressive forms, then the word itself
    /// if listed, then suffix rules in order. Each rule proposes candidate
    /// stems and the first listed one wins. Unknown words pass through.
    pub fn lemmatize(&self, token: &str) -> String {
        if let Some(l) = self.exceptions.get(token) {
            return l.clone();
        }
        if let Some(l) = self.progressive.get(token) {
            return l.clone();
        }
        if self.known(token) {
            return token.to_string();
        }
        for candidates in suffix_candidates(token) {
            if let Some(c) = candidates.into_iter().find(|c| self.known(c)) {
                return c;
            }
        }
        token.to_string()
    }

    /// Splits a phrase into a verb and a noun.
    ///
    /// The verb is the first content word ending in `-ing` whose lemma is a
    /// listed verb, else the first content word whose lemma is a verb but
    /// not also a noun. It is reported in progressive form, or `doing` if
    /// none is found. The noun is the first other content word whose lemma
    /// is a listed noun, else the override table entry for the phrase, else
    /// the last other content word.
    pub fn parse_action_phrase(&self, phrase: &str) -> VerbNounPair {
        let norm = normalize_phrase(phrase);
        let tokens: Vec<&str> = norm.split(' ').filter(|t| !t.is_empty()).collect();
        let content: Vec<(usize, &str, String)> = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| !self.stopwords.contains(**t))
            .map(|(i, t)| (i, *t, self.lemmatize(t)))
            .collect();

        let verb_at = content
            .iter()
            .find(|(_, t, l)| t.ends_with("ing") && self.is_verb(l))
            .or_else(|| content.iter().find(|(_, _, l)| self.is_verb(l) && !self.is_noun(l)));

        let (verb, verb_source, verb_idx) = match verb_at {
            Some((i, _, l)) => (self.verbs[l].clone(), VerbSource::Parsed, Some(*i)),
            None => (DEFAULT_VERB.to_string(), VerbSource::DefaultDoing, None),
        };

        let others = || content.iter().filter(|(i, _, _)| Some(*i) != verb_idx);
        let (noun, noun_source) = if let Some((_, _, l)) = others().find(|(_, _, l)| self.is_noun(l)) {
            (l.clone(), NounSource::Parsed)
        } else if let Some(n) = self.noun_overrides.get(&norm) {
            (n.clone(), NounSource::OverrideTable)
        } else if let Some((_, _, l)) = others().next_back() {
            (l.clone(), NounSource::PhraseHead)
        } else if let Some((_, _, l)) = content.last() {
            (l.clone(), NounSource::PhraseHead)
        } else {
            (
                tokens.last().map_or("unknown", |t| *t).to_string(),
                NounSource::PhraseHead,
            )
        };

        VerbNounPair {
            verb,
            noun,
            verb_source,
            noun_source,
        }
    }
}

fn suffix_candidates(token: &str) -> Vec<Vec<String>> {
    let mut rules = Vec::new();
    let undouble = |stem: &str| -> Option<String> {
        let b = stem.as_bytes();
        (b.len() >= 2 && b[b.len() - 1] == b[b.len() - 2]).then(|| stem[..stem.len() - 1].to_string())
    };
    if let Some(stem) = token.strip_suffix("ing").filter(|s| s.len() >= 2) {
        let mut c = vec![stem.to_string(), format!("{stem}e")];
        c.extend(undouble(stem));
        rules.push(c);
    }
    if let Some(stem) = token.strip_suffix("ies").filter(|s| s.len() >= 2) {
        rules.push(vec![format!("{stem}y")]);
    }
    if let Some(stem) = token.strip_suffix("ied").filter(|s| s.len() >= 2) {
        rules.push(vec![format!("{stem}y")]);
    }
    if let Some(stem) = token.strip_suffix("ed").filter(|s| s.len() >= 2) {
        let mut c = vec![stem.to_string(), format!("{stem}e")];
        c.extend(undouble(stem));
        rules.push(c);
    }
    if let Some(stem) = token.strip_suffix("es").filter(|s| s.len() >= 2) {
        rules.push(vec![stem.to_string(), format!("{stem}e")]);
    }
    if let Some(stem) = token.strip_suffix('s').filter(|s| s.len() >= 2 && !s.ends_with('s')) {
        rules.push(vec![stem.to_string()]);
    }
    rules
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Lexicon {
        Lexicon::from_tables(
            "play\tplaying\nrun\trunning\ndunk\tdunking\nride\triding\n",
            "sitar\nbasketball\nhorse\nbox\n",
            "",
            "clapping\tapplause\n",
            "a\nthe\n",
        )
    }

    #[test]
    fn suffix_rules() {
        let l = tiny();
        assert_eq!(l.lemmatize("sitars"), "sitar");
        assert_eq!(l.lemmatize("boxes"), "box");
        assert_eq!(l.lemmatize("ridden"), "ridden");
        assert_eq!(l.lemmatize("horses"), "horse");
        assert_eq!(l.lemmatize("dunked"), "dunk");
    }

    #[test]
    fn verb_then_noun() {
        let p = tiny().parse_action_phrase("Playing the Sitar");
        assert_eq!((p.verb.as_str(), p.noun.as_str()), ("playing", "sitar"));
        assert_eq!((p.verb_source, p.noun_source), (VerbSource::Parsed, NounSource::Parsed));
    }

    #[test]
    fn fallbacks_fire_in_order() {
        let l = tiny();
        let p = l.parse_action_phrase("clapping");
        assert_eq!((p.verb.as_str(), p.noun.as_str()), ("doing", "applause"));
        assert_eq!(p.noun_source, NounSource::OverrideTable);
        let p = l.parse_action_phrase("archery");
        assert_eq!((p.verb.as_str(), p.noun.as_str()), ("doing", "archery"));
        assert_eq!(
            (p.verb_source, p.noun_source),
            (VerbSource::DefaultDoing, NounSource::PhraseHead)
        );
        let p = l.parse_action_phrase("running");
        assert_eq!((p.verb.as_str(), p.noun.as_str()), ("running", "run"));
        let p = l.parse_action_phrase("the a");
        assert_eq!(p.noun, "a");
        let p = l.parse_action_phrase("");
        assert_eq!(p.noun, "unknown");
    }
}
