use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use super::{PipelineError, Result};
use crate::lexicon::normalize_phrase;
use crate::numerics::DenseMatrix;

const BINARY_MAGIC: &[u8; 4] = b"KGCB";
const BINARY_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankSource {
    /// Final-layer weights read from a trained recogniser.
    IngestedFromModel,
    /// Solved from features in closed form.
    ClosedForm,
    /// Predicted by a graph network for unseen classes.
    Predicted,
}

/// Classifier weight rows keyed by class id.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierBank {
    ids: Vec<String>,
    rows: DenseMatrix,
    index: HashMap<String, usize>,
    source: BankSource,
}

impl ClassifierBank {
    pub fn new(ids: Vec<String>, rows: DenseMatrix, source: BankSource) -> Result<Self> {
        if ids.len() != rows.rows() {
            return Err(PipelineError::Shape {
                what: "bank ids vs rows",
                expected: ids.len(),
                got: rows.rows(),
            });
        }
        rows.ensure_finite("classifier bank")?;
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(PipelineError::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            ids,
            rows,
            index,
            source,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> &DenseMatrix {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.rows.cols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn source(&self) -> BankSource {
        self.source
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.rows.row(i))
    }

    /// Rows for `ids` in order; the first missing id is an error.
    pub fn gather(&self, ids: &[&str]) -> Result<DenseMatrix> {
        let mut idx = Vec::with_capacity(ids.len());
        for id in ids {
            idx.push(
                *self
                    .index
                    .get(*id)
                    .ok_or_else(|| PipelineError::MissingBankRow((*id).to_string()))?,
            );
        }
        Ok(self.rows.select_rows(&idx))
    }

    /// `bank <count> <dim>` then `id<TAB>v1 ... vd` per row.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bank {} {}", self.len(), self.dim())?;
        for (id, row) in self.ids.iter().zip(self.rows.row_iter()) {
            write!(w, "{id}\t")?;
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    w.write_all(b" ")?;
                }
                write!(w, "{v:?}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R, source: BankSource) -> Result<Self> {
        let (ids, _, rows) = read_table(r, "bank", false)?;
        Self::new(ids, rows, source)
    }

    /// `KGCB`, version byte, id count as u64, each id as u64 length plus
    /// UTF-8 bytes, then the rows as a dense binary blob.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&[BINARY_VERSION])?;
        w.write_all(&(self.ids.len() as u64).to_le_bytes())?;
        for id in &self.ids {
            w.write_all(&(id.len() as u64).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
        }
        self.rows.write_binary(&mut w)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, source: BankSource) -> Result<Self> {
        let bad = |m: &str| PipelineError::Format {
            what: "binary bank",
            line: 0,
            message: m.to_string(),
        };
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic[..4] != BINARY_MAGIC || magic[4] != BINARY_VERSION {
            return Err(bad("missing KGCB header"));
        }
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let count = u64::from_le_bytes(buf) as usize;
        let mut ids = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            let len = u64::from_le_bytes(buf) as usize;
            if len > 1 << 20 {
                return Err(bad("id length out of range"));
            }
            let mut s = vec![0u8; len];
            r.read_exact(&mut s)?;
            ids.push(String::from_utf8(s).map_err(|_| bad("id is not UTF-8"))?);
        }
        let rows = DenseMatrix::read_binary(&mut r)?;
        Self::new(ids, rows, source)
    }

    /// Reads either form, sniffing the binary magic.
    pub fn load(path: &std::path::Path, source: BankSource) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(BINARY_MAGIC) {
            Self::read_binary(&bytes[..], source)
        } else {
            Self::read_text(&bytes[..], source)
        }
    }
}

/// Shared reader for `<kind> <count> <dim>` headed tables. With
/// `with_labels`, each line carries a comma-separated label field between
/// the id and the values.
pub(crate) fn read_table<R: BufRead>(
    r: R,
    kind: &'static str,
    with_labels: bool,
) -> Result<(Vec<String>, Vec<Vec<String>>, DenseMatrix)> {
    let mut lines = r.lines().enumerate();
    let fmt = |line: usize, message: String| PipelineError::Format {
        what: kind,
        line,
        message,
    };
    let (count, dim) = loop {
        let Some((n, line)) = lines.next() else {
            return Err(fmt(0, "empty file".into()));
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 || f[0] != kind {
            return Err(fmt(n + 1, format!("expected header `{kind} <count> <dim>`")));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| fmt(n + 1, format!("bad header number `{s}`")))
        };
        break (parse(f[1])?, parse(f[2])?);
    };
    let mut ids = Vec::with_capacity(count);
    let mut labels = Vec::new();
    let mut data = Vec::with_capacity(count * dim);
    for (n, line) in lines {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(if with_labels { 3 } else { 2 }, '\t').collect();
        if fields.len() != if with_labels { 3 } else { 2 } {
            return Err(fmt(line_no, "missing tab-separated field".into()));
        }
        let id = normalize_phrase(fields[0]);
        if id.is_empty() {
            return Err(fmt(line_no, "empty id".into()));
        }
        ids.push(id);
        if with_labels {
            let l: Vec<String> = fields[1]
                .split(',')
                .map(normalize_phrase)
                .filter(|s| !s.is_empty())
                .collect();
            if l.is_empty() {
                return Err(fmt(line_no, "sample has no labels".into()));
            }
            labels.push(l);
        }
        let values = fields[fields.len() - 1].split_whitespace();
        let before = data.len();
        for v in values {
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() => data.push(x),
                _ => return Err(fmt(line_no, format!("bad value `{v}`"))),
            }
        }
        if data.len() - before != dim {
            return Err(fmt(
                line_no,
                format!("expected {dim} values, found {}", data.len() - before),
            ));
        }
    }
    if ids.len() != count {
        return Err(fmt(0, format!("header promises {count} rows, found {}", ids.len())));
    }
    let rows = DenseMatrix::from_vec(count, dim, data)?;
    Ok((ids, labels, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank() -> ClassifierBank {
        ClassifierBank::new(
            vec!["archery".into(), "yo yo".into()],
            DenseMatrix::from_rows(&[[0.1, -2.0, 3.5], [1e-9, 0.0, 7.25]]).unwrap(),
            BankSource::IngestedFromModel,
        )
        .unwrap()
    }

    #[test]
    fn text_and_binary_roundtrip() {
        let b = bank();
        let mut t = Vec::new();
        b.write_text(&mut t).unwrap();
        assert!(t.starts_with(b"bank 2 3\n"));
        assert_eq!(
            ClassifierBank::read_text(&t[..], BankSource::IngestedFromModel).unwrap(),
            b
        );
        let mut bin = Vec::new();
        b.write_binary(&mut bin).unwrap();
        assert_eq!(
            ClassifierBank::read_binary(&bin[..], BankSource::IngestedFromModel).unwrap(),
            b
        );
    }

    #[test]
    fn short_row_reports_line() {
        let text = "bank 2 2\na\t1 2\nb\t3\n";
        let err = ClassifierBank::read_text(text.as_bytes(), BankSource::ClosedForm).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn gather_names_missing_id() {
        let err = bank().gather(&["archery", "bowling"]).unwrap_err();
        assert!(matches!(err, PipelineError::MissingBankRow(id) if id == "bowling"));
    }
}
