//! Binary record matrices: dense CSV ingestion, code-list binarization and
//! holdout splitting.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Default number of most frequent codes kept by [`binarize_code_list`].
pub const DEFAULT_TOP_K: usize = 100;

/// An `n_rows × n_cols` matrix of bits with named columns.
///
/// Rows are packed into 64-bit words, least significant bit first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryDataset {
    n_rows: usize,
    n_cols: usize,
    words_per_row: usize,
    feature_names: Vec<String>,
    bits: Vec<u64>,
}

fn validate_names(names: &[String]) -> Result<()> {
    if names.is_empty() {
        return Err(Error::invalid("a dataset needs at least one feature"));
    }
    let mut seen = HashSet::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(Error::EmptyFeatureName(j));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateFeature(name.clone()));
        }
    }
    Ok(())
}

impl BinaryDataset {
    /// Builds a dataset whose entry `(i, j)` is `f(i, j)`.
    pub fn from_fn(
        feature_names: Vec<String>,
        n_rows: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        validate_names(&feature_names)?;
        if n_rows == 0 {
            return Err(Error::EmptyBody);
        }
        let n_cols = feature_names.len();
        let words_per_row = n_cols.div_ceil(64);
        let mut bits = vec![0u64; n_rows * words_per_row];
        for i in 0..n_rows {
            let row = &mut bits[i * words_per_row..(i + 1) * words_per_row];
            for j in 0..n_cols {
                if f(i, j) {
                    row[j / 64] |= 1 << (j % 64);
                }
            }
        }
        Ok(BinaryDataset {
            n_rows,
            n_cols,
            words_per_row,
            feature_names,
            bits,
        })
    }

    /// Builds a dataset from 0/1 rows. Any nonzero byte counts as 1.
    pub fn from_rows<R: AsRef<[u8]>>(feature_names: Vec<String>, rows: &[R]) -> Result<Self> {
        let d = feature_names.len();
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != d {
                return Err(Error::RaggedRow {
                    line: i + 2,
                    expected: d,
                    found: r.as_ref().len(),
                });
            }
        }
        Self::from_fn(feature_names, rows.len(), |i, j| rows[i].as_ref()[j] != 0)
    }

    /// Builds a dataset from packed rows, as produced by [`row_words`](Self::row_words).
    pub(crate) fn from_packed(feature_names: Vec<String>, bits: Vec<u64>) -> Self {
        let n_cols = feature_names.len();
        let words_per_row = n_cols.div_ceil(64);
        debug_assert_eq!(bits.len() % words_per_row, 0);
        BinaryDataset {
            n_rows: bits.len() / words_per_row,
            n_cols,
            words_per_row,
            feature_names,
            bits,
        }
    }

    /// Names `f0, f1, …` for anonymous data.
    pub fn default_names(d: usize) -> Vec<String> {
        (0..d).map(|j| format!("f{j}")).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        assert!(j < self.n_cols, "column {j} out of range");
        self.row_words(i)[j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn row_words(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    /// Column indices of the ones in row `i`, ascending.
    pub fn row_ones(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_words(i)
            .iter()
            .enumerate()
            .flat_map(|(w, &word)| BitIter(word).map(move |b| w * 64 + b))
    }

    pub fn row(&self, i: usize) -> Vec<u8> {
        (0..self.n_cols).map(|j| self.get(i, j) as u8).collect()
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.n_rows).map(|i| self.row(i)).collect()
    }

    /// Empirical mean of every column.
    pub fn column_means(&self) -> Vec<f64> {
        let mut counts = vec![0u64; self.n_cols];
        for i in 0..self.n_rows {
            for j in self.row_ones(i) {
                counts[j] += 1;
            }
        }
        counts
            .into_iter()
            .map(|c| c as f64 / self.n_rows as f64)
            .collect()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyBody);
        }
        let mut bits = Vec::with_capacity(indices.len() * self.words_per_row);
        for &i in indices {
            if i >= self.n_rows {
                return Err(Error::invalid(format!("row {i} out of range")));
            }
            bits.extend_from_slice(self.row_words(i));
        }
        Ok(Self::from_packed(self.feature_names.clone(), bits))
    }

    /// Stacks `other` below `self`. Feature names must agree.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        ensure_same_features(self, other)?;
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        Ok(Self::from_packed(self.feature_names.clone(), bits))
    }

    /// Writes the dense CSV format read by [`load_csv`].
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "{}", self.feature_names.join(","))?;
        let mut line = String::with_capacity(2 * self.n_cols);
        for i in 0..self.n_rows {
            line.clear();
            for j in 0..self.n_cols {
                if j > 0 {
                    line.push(',');
                }
                line.push(if self.get(i, j) { '1' } else { '0' });
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        out.flush()
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file).map_err(|e| Error::io(path, e))
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let b = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(b)
    }
}

/// Errors unless both datasets have identical feature names in the same order.
pub fn ensure_same_features(a: &BinaryDataset, b: &BinaryDataset) -> Result<()> {
    if a.n_cols != b.n_cols {
        return Err(Error::DimensionMismatch {
            expected: a.n_cols,
            found: b.n_cols,
        });
    }
    for (index, (l, r)) in a.feature_names.iter().zip(&b.feature_names).enumerate() {
        if l != r {
            return Err(Error::FeatureMismatch {
                index,
                left: l.clone(),
                right: r.clone(),
            });
        }
    }
    Ok(())
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Reads a dense 0/1 CSV with a header row of feature names.
pub fn read_csv<R: Read>(input: R) -> Result<BinaryDataset> {
    let mut reader = csv_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let names: Vec<String> = header.iter().map(str::to_owned).collect();
    validate_names(&names)?;
    let d = names.len();
    let words_per_row = d.div_ceil(64);
    let mut bits = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != d {
            return Err(Error::RaggedRow {
                line,
                expected: d,
                found: rec.len(),
            });
        }
        let start = bits.len();
        bits.resize(start + words_per_row, 0u64);
        for (j, tok) in rec.iter().enumerate() {
            match tok {
                "0" => {}
                "1" => bits[start + j / 64] |= 1 << (j % 64),
                _ => {
                    return Err(Error::NonBinaryToken {
                        line,
                        column: j + 1,
                        token: tok.to_owned(),
                    })
                }
            }
        }
    }
    if bits.is_empty() {
        return Err(Error::EmptyBody);
    }
    Ok(BinaryDataset::from_packed(names, bits))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<BinaryDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

/// One code occurrence for one record in long format.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeListRecord {
    pub record_id: String,
    pub code: String,
}

impl CodeListRecord {
    pub fn new(record_id: impl Into<String>, code: impl Into<String>) -> Self {
        CodeListRecord {
            record_id: record_id.into(),
            code: code.into(),
        }
    }
}

/// Reads a two-column `record_id,code` CSV with a header line.
pub fn read_code_list<R: Read>(input: R) -> Result<Vec<CodeListRecord>> {
    let mut out = Vec::new();
    for (n, rec) in csv_reader(input).records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if n == 0 {
            continue;
        }
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(n + 1);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::RaggedRow {
                line,
                expected: 2,
                found: rec.len(),
            });
        }
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(Error::Parse {
                line,
                message: "record_id and code must be non-empty".into(),
            });
        }
        out.push(CodeListRecord::new(&rec[0], &rec[1]));
    }
    if out.is_empty() {
        return Err(Error::EmptyBody);
    }
    Ok(out)
}

pub fn load_code_list(path: impl AsRef<Path>) -> Result<Vec<CodeListRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_code_list(file)
}

/// The codes kept by [`binarize_code_list`]: the `top_k` most frequent,
/// most frequent first, ties broken by code string. Frequency counts
/// occurrences, not distinct records.
pub fn top_codes(records: &[CodeListRecord], top_k: usize) -> Vec<(String, usize)> {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for r in records {
        *freq.entry(r.code.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(top_k);
    ranked.into_iter().map(|(c, n)| (c.to_owned(), n)).collect()
}

/// Turns long-format code occurrences into a record × code indicator matrix.
///
/// Rows follow the first appearance of each record id. Columns are the
/// `top_k` most frequent codes, sorted by code string. Records whose codes
/// were all dropped stay in the output as all-zero rows.
pub fn binarize_code_list(records: &[CodeListRecord], top_k: usize) -> Result<BinaryDataset> {
    if records.is_empty() {
        return Err(Error::EmptyBody);
    }
    if top_k == 0 {
        return Err(Error::invalid("top_k must be at least 1"));
    }
    let mut columns: Vec<String> = top_codes(records, top_k)
        .into_iter()
        .map(|(c, _)| c)
        .collect();
    columns.sort();
    let col_of: HashMap<&str, usize> = columns
        .iter()
        .enumerate()
        .map(|(j, c)| (c.as_str(), j))
        .collect();

    let mut row_of: HashMap<&str, usize> = HashMap::new();
    let mut hits: Vec<Vec<usize>> = Vec::new();
    for r in records {
        let next = row_of.len();
        let i = *row_of.entry(r.record_id.as_str()).or_insert(next);
        if i == hits.len() {
            hits.push(Vec::new());
        }
        if let Some(&j) = col_of.get(r.code.as_str()) {
            hits[i].push(j);
        }
    }
    let n = hits.len();
    BinaryDataset::from_fn(columns, n, |i, j| hits[i].contains(&j))
}

/// Splits rows into `(train, holdout)` with `floor(holdout_fraction·N)` rows
/// held out. Both parts keep the original relative row order.
pub fn split_holdout(
    data: &BinaryDataset,
    holdout_fraction: f64,
    seed: u64,
) -> Result<(BinaryDataset, BinaryDataset)> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "holdout fraction {holdout_fraction} outside (0, 1)"
        )));
    }
    let n = data.n_rows();
    let n_holdout = (holdout_fraction * n as f64).floor() as usize;
    if n_holdout == 0 || n_holdout >= n {
        return Err(Error::invalid(format!(
            "holdout fraction {holdout_fraction} leaves an empty part of {n} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(rng::derive_seed(seed, rng::tags::SPLIT), 0));
    let mut holdout = order[..n_holdout].to_vec();
    let mut train = order[n_holdout..].to_vec();
    holdout.sort_unstable();
    train.sort_unstable();
    Ok((data.select_rows(&train)?, data.select_rows(&holdout)?))
}
