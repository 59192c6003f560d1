//! Word-embedding spaces and the word2vec text format.
//!
//! ```text
//! <n> <d>
//! <token> <v1> ... <vd>
//! ```
//!
//! One row per token, UTF-8, `\n` line endings, single spaces between
//! fields. Values are written in their shortest exact decimal form, so a
//! save/load cycle reproduces every `f64` bit for bit.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::format;
use crate::{Error, Result};

/// Ordered, duplicate-free token list with a reverse index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, token) in tokens.iter().enumerate() {
            validate_token(token)?;
            if index.insert(token.clone(), i).is_some() {
                return Err(Error::DuplicateToken(token.clone()));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }
}

pub(crate) fn validate_token(token: &str) -> Result<()> {
    if token.is_empty() || token.chars().any(char::is_whitespace) {
        Err(Error::InvalidToken(token.to_string()))
    } else {
        Ok(())
    }
}

/// A vocabulary plus one dense `f64` row per token.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    vocab: Vocabulary,
    matrix: Array2<f64>,
}

impl EmbeddingSpace {
    pub fn new(vocab: Vocabulary, matrix: Array2<f64>) -> Result<Self> {
        if matrix.nrows() != vocab.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows for {} tokens",
                matrix.nrows(),
                vocab.len()
            )));
        }
        if matrix.ncols() == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be >= 1".into()));
        }
        if !matrix.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("embedding matrix"));
        }
        Ok(EmbeddingSpace { vocab, matrix })
    }

    /// Builds a space from `(token, vector)` rows.
    pub fn from_rows<S: Into<String>>(rows: Vec<(S, Vec<f64>)>) -> Result<Self> {
        let dim = rows.first().map_or(0, |(_, v)| v.len());
        let mut tokens = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (token, v) in rows {
            if v.len() != dim {
                return Err(Error::ShapeMismatch(format!("row width {} != {}", v.len(), dim)));
            }
            tokens.push(token.into());
            data.extend(v);
        }
        let n = tokens.len();
        let matrix = Array2::from_shape_vec((n, dim), data).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Self::new(Vocabulary::new(tokens)?, matrix)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(i)
    }

    /// Row for `token`; out-of-vocabulary tokens are an error the caller is
    /// expected to skip (see [`crate::lexicon::filter_by_vocab`]).
    pub fn lookup(&self, token: &str) -> Result<ArrayView1<'_, f64>> {
        self.vocab
            .index_of(token)
            .map(|i| self.matrix.row(i))
            .ok_or_else(|| Error::OutOfVocabulary(token.to_string()))
    }

    /// Scales every non-zero row to unit L2 norm.
    ///
    /// Returns the normalized space and the indices of all-zero rows, which
    /// are kept as zeros. Rows already within rounding of unit norm are left
    /// untouched, which makes the operation idempotent bit for bit.
    pub fn normalize_rows(&self) -> (EmbeddingSpace, Vec<usize>) {
        let mut matrix = self.matrix.clone();
        let mut zero_rows = Vec::new();
        for (i, mut row) in matrix.rows_mut().into_iter().enumerate() {
            let norm_sq = row.dot(&row);
            if norm_sq == 0.0 {
                zero_rows.push(i);
            } else if (norm_sq - 1.0).abs() > UNIT_NORM_SQ_TOL {
                let norm = norm_sq.sqrt();
                row.mapv_inplace(|v| v / norm);
            }
        }
        let space = EmbeddingSpace {
            vocab: self.vocab.clone(),
            matrix,
        };
        (space, zero_rows)
    }

    /// Whether every non-zero row is unit length within `tol`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.first_non_unit_row(tol).is_none()
    }

    pub(crate) fn first_non_unit_row(&self, tol: f64) -> Option<(usize, f64)> {
        self.matrix.rows().into_iter().enumerate().find_map(|(i, row)| {
            let norm = row.dot(&row).sqrt();
            (norm != 0.0 && (norm - 1.0).abs() > tol).then_some((i, norm))
        })
    }

    pub fn load_word2vec_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_word2vec_text(BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn read_word2vec_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();

        let (n, dim) = match lines.next() {
            None => return Err(Error::format(1, "missing header")),
            Some((_, line)) => {
                let line = line.map_err(|e| Error::io("<reader>", e))?;
                parse_header(&line)?
            }
        };

        let mut tokens = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * dim);
        let mut seen = HashMap::with_capacity(n);
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io("<reader>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            if tokens.len() == n {
                return Err(Error::format(line_no, format!("more than {n} rows")));
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-empty line has a field");
            let start = data.len();
            for field in fields {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::format(line_no, format!("invalid number {field:?}")))?;
                if !v.is_finite() {
                    return Err(Error::format(line_no, format!("non-finite value {field:?}")));
                }
                data.push(v);
            }
            let width = data.len() - start;
            if width != dim {
                return Err(Error::format(line_no, format!("row width {width} ≠ {dim}")));
            }
            if seen.insert(token.to_string(), tokens.len()).is_some() {
                return Err(Error::format(line_no, format!("duplicate token {token:?}")));
            }
            tokens.push(token.to_string());
        }
        if tokens.len() != n {
            return Err(Error::format(
                tokens.len() + 2,
                format!("expected {n} rows, found {}", tokens.len()),
            ));
        }

        let matrix = Array2::from_shape_vec((n, dim), data).expect("row widths checked");
        Self::new(Vocabulary::new(tokens)?, matrix)
    }

    pub fn save_word2vec_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_word2vec_text(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_word2vec_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim())?;
        for (token, row) in self.vocab.tokens.iter().zip(self.matrix.rows()) {
            w.write_all(token.as_bytes())?;
            for v in row {
                write!(w, " {}", format::roundtrip(*v))?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

// A row produced by `v / norm` lands within a few ulps of unit norm.
const UNIT_NORM_SQ_TOL: f64 = 1e-13;

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let parsed = match fields.as_slice() {
        [n, d] => n.parse::<usize>().ok().zip(d.parse::<usize>().ok()),
        _ => None,
    };
    match parsed {
        Some((_, 0)) => Err(Error::format(1, "dimension must be >= 1")),
        Some(header) => Ok(header),
        None => Err(Error::format(
            1,
            format!("malformed header {line:?}, expected \"<n> <d>\""),
        )),
    }
}
