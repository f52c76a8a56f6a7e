//! Track embedding files.
//!
//! Line 1 is `E=<dim>`; each following line is `track_id<TAB>v1<TAB>...<TAB>vE`.
//! Values are written in shortest round-trip decimal form, so a write/read
//! cycle is bit-exact. Listening-based and externally produced (audio)
//! embeddings share this format.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("embedding file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Array2<f64>,
}

impl Embeddings {
    pub fn new(ids: Vec<String>, vectors: Array2<f64>) -> Result<Self, EmbeddingError> {
        if ids.len() != vectors.nrows() {
            return Err(EmbeddingError::Invalid(format!(
                "{} ids for {} vectors",
                ids.len(),
                vectors.nrows()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::Invalid("non-finite embedding value".into()));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(EmbeddingError::Invalid(format!("duplicate track id {id:?}")));
            }
        }
        Ok(Self { ids, index, vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn vector(&self, id: &str) -> Option<ArrayView1<'_, f64>> {
        self.position(id).map(|r| self.vectors.row(r))
    }

    /// Stacks the vectors of `rows` in order.
    pub fn gather(&self, rows: &[usize]) -> Array2<f64> {
        self.vectors.select(ndarray::Axis(0), rows)
    }

    pub fn write(&self, path: &Path) -> Result<(), EmbeddingError> {
        let io_err = |e| EmbeddingError::Io {
            path: path.display().to_string(),
            source: e,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        writeln!(out, "E={}", self.dim()).map_err(io_err)?;
        let mut line = String::new();
        for (id, row) in self.ids.iter().zip(self.vectors.rows()) {
            line.clear();
            line.push_str(id);
            for v in row {
                line.push('\t');
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }

    pub fn read(path: &Path) -> Result<Self, EmbeddingError> {
        let file = File::open(path).map_err(|e| EmbeddingError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::read_from(BufReader::new(file))
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) => l.map_err(|e| io_line(1, e))?,
            None => {
                return Err(EmbeddingError::Parse {
                    line: 1,
                    message: "missing E=<rank> header".into(),
                })
            }
        };
        let dim: usize = header
            .trim()
            .strip_prefix("E=")
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| EmbeddingError::Parse {
                line: 1,
                message: format!("expected E=<rank>, found {header:?}"),
            })?;

        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| io_line(line_no, e))?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default();
            let before = values.len();
            for f in fields {
                let v: f64 = f.parse().map_err(|_| EmbeddingError::Parse {
                    line: line_no,
                    message: format!("bad value {f:?}"),
                })?;
                values.push(v);
            }
            if values.len() - before != dim {
                return Err(EmbeddingError::Parse {
                    line: line_no,
                    message: format!("expected {dim} values, found {}", values.len() - before),
                });
            }
            ids.push(id.to_owned());
        }
        let vectors = Array2::from_shape_vec((ids.len(), dim), values)
            .map_err(|e| EmbeddingError::Invalid(e.to_string()))?;
        Self::new(ids, vectors)
    }
}

fn io_line(line: usize, e: std::io::Error) -> EmbeddingError {
    EmbeddingError::Io {
        path: format!("<line {line}>"),
        source: e,
    }
}
