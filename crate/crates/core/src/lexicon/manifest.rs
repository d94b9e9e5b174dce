use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use super::{normalize_phrase, LexiconError, Result};
use crate::rng::SeedStreams;

/// Node label used for an auxiliary class, kept apart from dataset labels
/// that share the same name.
pub fn auxiliary_node_label(auxiliary_dataset: &str, class: &str) -> String {
    format!("{auxiliary_dataset}:{class}")
}

/// Which classes are seen, which are held out, and how they relate to the
/// auxiliary dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitManifest {
    pub dataset_name: String,
    /// Name of the appended class source, e.g. `kinetics`.
    pub auxiliary_name: Option<String>,
    pub multilabel: bool,
    pub train_classes: Vec<String>,
    pub test_classes: Vec<String>,
    /// `(dataset class, auxiliary class)` pairs naming the same action.
    pub overlap: Vec<(String, String)>,
    /// `(raw label, embedding key)` pairs.
    pub aliases: Vec<(String, String)>,
    pub auxiliary_classes: Vec<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Dataset,
    Train,
    Test,
    Overlap,
    Alias,
    Auxiliary,
}

impl SplitManifest {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut m = SplitManifest {
            dataset_name: String::new(),
            auxiliary_name: None,
            multilabel: false,
            train_classes: Vec::new(),
            test_classes: Vec::new(),
            overlap: Vec::new(),
            aliases: Vec::new(),
            auxiliary_classes: Vec::new(),
        };
        let mut section = None;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            let err = |message: String| LexiconError::Format {
                source_name: source_name.to_string(),
                line: line_no,
                message,
            };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(match name {
                    "dataset" => Section::Dataset,
                    "train" => Section::Train,
                    "test" => Section::Test,
                    "overlap" => Section::Overlap,
                    "alias" => Section::Alias,
                    "auxiliary" => Section::Auxiliary,
                    other => return Err(err(format!("unknown section [{other}]"))),
                });
                continue;
            }
            let pair = || {
                line.split_once('\t')
                    .map(|(a, b)| (normalize_phrase(a), normalize_phrase(b)))
                    .filter(|(a, b)| !a.is_empty() && !b.is_empty())
                    .ok_or_else(|| err("expected two tab-separated fields".into()))
            };
            let single = || {
                let c = normalize_phrase(line);
                if c.is_empty() {
                    Err(err("empty class name".into()))
                } else {
                    Ok(c)
                }
            };
            match section {
                None => return Err(err("entry before any section header".into())),
                Some(Section::Dataset) => {
                    let (key, value) = line
                        .split_once('\t')
                        .map(|(k, v)| (k.trim(), v.trim()))
                        .ok_or_else(|| err("expected `key<TAB>value`".into()))?;
                    match key {
                        "name" => m.dataset_name = value.to_string(),
                        "auxiliary" => m.auxiliary_name = Some(value.to_string()),
                        "multilabel" => {
                            m.multilabel = value.parse().map_err(|_| err(format!("bad boolean `{value}`")))?
                        }
                        other => return Err(err(format!("unknown dataset key `{other}`"))),
                    }
                }
                Some(Section::Train) => m.train_classes.push(single()?),
                Some(Section::Test) => m.test_classes.push(single()?),
                Some(Section::Auxiliary) => m.auxiliary_classes.push(single()?),
                Some(Section::Overlap) => m.overlap.push(pair()?),
                Some(Section::Alias) => m.aliases.push(pair()?),
            }
        }
        if m.dataset_name.is_empty() {
            m.dataset_name = source_name.to_string();
        }
        if !m.auxiliary_classes.is_empty() && m.auxiliary_name.is_none() {
            m.auxiliary_name = Some("auxiliary".into());
        }
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Checks disjointness, duplicates, and that no overlap class is tested.
    pub fn validate(&self) -> Result<()> {
        let unique = |section: &'static str, list: &[String]| -> Result<HashSet<String>> {
            let mut seen = HashSet::new();
            for c in list {
                if !seen.insert(c.clone()) {
                    return Err(LexiconError::DuplicateClass {
                        section,
                        class: c.clone(),
                    });
                }
            }
            Ok(seen)
        };
        let train = unique("train", &self.train_classes)?;
        let test = unique("test", &self.test_classes)?;
        unique("auxiliary", &self.auxiliary_classes)?;
        if let Some(c) = self.test_classes.iter().find(|c| train.contains(*c)) {
            return Err(LexiconError::TrainTestOverlap(c.clone()));
        }
        for (c, _) in &self.overlap {
            if test.contains(c) {
                return Err(LexiconError::TestInOverlap(c.clone()));
            }
            if !train.contains(c) {
                return Err(LexiconError::UnknownClass {
                    section: "overlap",
                    class: c.clone(),
                });
            }
        }
        let mut raw = HashSet::new();
        for (r, _) in &self.aliases {
            if !raw.insert(r) {
                return Err(LexiconError::DuplicateClass {
                    section: "alias",
                    class: r.clone(),
                });
            }
        }
        Ok(())
    }

    /// Train classes followed by test classes.
    pub fn dataset_classes(&self) -> Vec<String> {
        self.train_classes.iter().chain(&self.test_classes).cloned().collect()
    }

    pub fn alias_map(&self) -> HashMap<&str, &str> {
        self.aliases.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect()
    }

    /// Embedding key for a dataset or auxiliary class name.
    pub fn embedding_key<'a>(&'a self, class: &'a str) -> &'a str {
        self.aliases
            .iter()
            .find(|(raw, _)| raw == class)
            .map_or(class, |(_, key)| key.as_str())
    }

    pub fn overlap_classes(&self) -> HashSet<&str> {
        self.overlap.iter().map(|(c, _)| c.as_str()).collect()
    }

    /// Dataset classes that may be held out: those without an auxiliary
    /// counterpart, in manifest order.
    pub fn eligible_test_pool(&self) -> Vec<String> {
        let overlap = self.overlap_classes();
        self.dataset_classes()
            .into_iter()
            .filter(|c| !overlap.contains(c.as_str()))
            .collect()
    }

    pub fn auxiliary_node_labels(&self) -> Vec<String> {
        let name = self.auxiliary_name.as_deref().unwrap_or("auxiliary");
        self.auxiliary_classes
            .iter()
            .map(|c| auxiliary_node_label(name, c))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("[dataset]\n");
        let _ = writeln!(s, "name\t{}", self.dataset_name);
        if let Some(a) = &self.auxiliary_name {
            let _ = writeln!(s, "auxiliary\t{a}");
        }
        let _ = writeln!(s, "multilabel\t{}", self.multilabel);
        for (name, list) in [("train", &self.train_classes), ("test", &self.test_classes)] {
            let _ = writeln!(s, "\n[{name}]");
            for c in list {
                let _ = writeln!(s, "{c}");
            }
        }
        for (name, list) in [("overlap", &self.overlap), ("alias", &self.aliases)] {
            let _ = writeln!(s, "\n[{name}]");
            for (a, b) in list {
                let _ = writeln!(s, "{a}\t{b}");
            }
        }
        s.push_str("\n[auxiliary]\n");
        for c in &self.auxiliary_classes {
            let _ = writeln!(s, "{c}");
        }
        s
    }

    /// Digest of the canonical text form.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

/// Draws `n_splits` random held-out sets of `n_test` classes from the
/// eligible pool. Everything else, including overlap classes, is train.
pub fn generate_random_splits(
    manifest: &SplitManifest,
    n_test: usize,
    n_splits: usize,
    seed: u64,
) -> Result<Vec<SplitManifest>> {
    let pool = manifest.eligible_test_pool();
    if n_test > pool.len() || n_test == 0 {
        return Err(LexiconError::TooManyTestClasses {
            requested: n_test,
            available: pool.len(),
        });
    }
    let streams = SeedStreams::new(seed).child("splits");
    let mut out = Vec::with_capacity(n_splits);
    for k in 0..n_splits {
        let mut rng = streams.rng(&k.to_string());
        let mut picked: Vec<usize> = (0..pool.len())
            .collect::<Vec<_>>()
            .choose_multiple(&mut rng, n_test)
            .copied()
            .collect();
        picked.sort_unstable();
        let test: HashSet<&str> = picked.iter().map(|&i| pool[i].as_str()).collect();
        let mut m = manifest.clone();
        m.dataset_name = format!("{}-split{k}", manifest.dataset_name);
        m.test_classes = picked.iter().map(|&i| pool[i].clone()).collect();
        m.train_classes = manifest
            .dataset_classes()
            .into_iter()
            .filter(|c| !test.contains(c.as_str()))
            .collect();
        m.validate()?;
        out.push(m);
    }
    Ok(out)
}
