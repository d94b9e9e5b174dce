use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use super::{normalize_phrase, LexiconError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    /// One vector per whole phrase.
    PhraseLevel,
    /// One vector per word; phrases are averaged over their tokens.
    WordLevel,
}

impl FromStr for EmbeddingKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "phrase" | "sentence" => Ok(EmbeddingKind::PhraseLevel),
            "word" => Ok(EmbeddingKind::WordLevel),
            other => Err(format!("unknown embedding kind `{other}` (expected phrase or word)")),
        }
    }
}

/// A looked-up phrase vector plus the tokens that had to be skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseEmbedding {
    pub vector: Vec<f64>,
    pub missing_tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    kind: EmbeddingKind,
    keys: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
    warnings: Vec<String>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, kind: EmbeddingKind) -> Self {
        Self {
            dim,
            kind,
            keys: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
            warnings: Vec::new(),
        }
    }

    /// Inserts or replaces an entry. The key is normalised first.
    pub fn insert(&mut self, key: &str, vector: Vec<f64>) -> std::result::Result<(), String> {
        let key = normalize_phrase(&key.replace('_', " "));
        if key.is_empty() {
            return Err("empty key".into());
        }
        if vector.len() != self.dim {
            return Err(format!("expected {} values, found {}", self.dim, vector.len()));
        }
        if let Some(&i) = self.index.get(&key) {
            self.warnings.push(format!("duplicate key `{key}`: later entry wins"));
            self.vectors[i] = vector;
        } else {
            self.index.insert(key.clone(), self.keys.len());
            self.keys.push(key);
            self.vectors.push(vector);
        }
        Ok(())
    }

    /// Reads `key v1 .. vd` lines. A leading word2vec `count dim` header is
    /// accepted and ignored.
    pub fn read<R: BufRead>(reader: R, kind: EmbeddingKind, source_name: &str) -> Result<Self> {
        let mut table: Option<Self> = None;
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(key) = fields.next() else { continue };
            let values: Vec<&str> = fields.collect();
            if line_no == 1 && values.len() == 1 && key.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
                continue;
            }
            let vector = values
                .iter()
                .map(|v| match v.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(LexiconError::Format {
                        source_name: source_name.to_string(),
                        line: line_no,
                        message: format!("bad value `{v}`"),
                    }),
                })
                .collect::<Result<Vec<f64>>>()?;
            let t = table.get_or_insert_with(|| Self::new(vector.len(), kind));
            if vector.len() != t.dim {
                return Err(LexiconError::DimensionMismatch {
                    source_name: source_name.to_string(),
                    line: line_no,
                    expected: t.dim,
                    got: vector.len(),
                });
            }
            if vector.is_empty() {
                return Err(LexiconError::Format {
                    source_name: source_name.to_string(),
                    line: line_no,
                    message: "entry has no values".into(),
                });
            }
            t.insert(key, vector).map_err(|message| LexiconError::Format {
                source_name: source_name.to_string(),
                line: line_no,
                message,
            })?;
        }
        table.ok_or_else(|| LexiconError::EmptyFile {
            source_name: source_name.to_string(),
        })
    }

    pub fn load(path: &std::path::Path, kind: EmbeddingKind) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file), kind, &path.display().to_string())
    }

    /// Writes entries in insertion order, spaces in keys as underscores.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (key, v) in self.keys.iter().zip(&self.vectors) {
            write!(w, "{}", key.replace(' ', "_"))?;
            for x in v {
                write!(w, " {x:?}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    /// Load-time notes such as overwritten duplicate keys.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.index
            .get(&normalize_phrase(key))
            .map(|&i| self.vectors[i].as_slice())
    }

    /// Phrase tables look the phrase up directly. Word tables average the
    /// vectors of the tokens they know.
    pub fn embed_phrase(&self, phrase: &str) -> Result<PhraseEmbedding> {
        let norm = normalize_phrase(phrase);
        match self.kind {
            EmbeddingKind::PhraseLevel => self
                .get(&norm)
                .map(|v| PhraseEmbedding {
                    vector: v.to_vec(),
                    missing_tokens: Vec::new(),
                })
                .ok_or(LexiconError::MissingPhrase(norm)),
            EmbeddingKind::WordLevel => {
                let mut sum = vec![0.0; self.dim];
                let mut found = 0usize;
                let mut missing_tokens = Vec::new();
                for token in norm.split(' ').filter(|t| !t.is_empty()) {
                    match self.get(token) {
                        Some(v) => {
                            for (s, x) in sum.iter_mut().zip(v) {
                                *s += x;
                            }
                            found += 1;
                        }
                        None => missing_tokens.push(token.to_string()),
                    }
                }
                if found == 0 {
                    return Err(LexiconError::NoTokenFound(norm));
                }
                let vector = sum.into_iter().map(|s| s / found as f64).collect();
                Ok(PhraseEmbedding { vector, missing_tokens })
            }
        }
    }
}
