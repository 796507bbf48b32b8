//! `.nbm` model files.
//!
//! Plain text, one item per line:
//!
//! ```text
//! nbm 1
//! kind mixture            # or `baseline`
//! k <components>          # mixture only
//! d <features>
//! feature <name>          # d lines, in column order
//! weights <w_1> … <w_k>   # mixture only
//! probs                   # followed by d lines of k values (mixture)
//!                         # or d lines of one value (baseline)
//! ```
//!
//! Reals are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::{BaselineModel, NaiveBayesModel};
use crate::error::{Error, Result};

const MAGIC: &str = "nbm";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum NbmFile {
    Mixture(NaiveBayesModel),
    Baseline(BaselineModel),
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_nbm<W: Write>(file: &NbmFile, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC} {VERSION}")?;
    let (names, k) = match file {
        NbmFile::Mixture(m) => {
            writeln!(out, "kind mixture")?;
            writeln!(out, "k {}", m.k())?;
            (m.feature_names(), m.k())
        }
        NbmFile::Baseline(b) => {
            writeln!(out, "kind baseline")?;
            (b.feature_names(), 1)
        }
    };
    writeln!(out, "d {}", names.len())?;
    for n in names {
        writeln!(out, "feature {n}")?;
    }
    if let NbmFile::Mixture(m) = file {
        let w: Vec<String> = m.weights().iter().map(|&x| real(x)).collect();
        writeln!(out, "weights {}", w.join(" "))?;
    }
    writeln!(out, "probs")?;
    for i in 0..names.len() {
        let row: Vec<String> = match file {
            NbmFile::Mixture(m) => (0..k).map(|j| real(m.cond_probs()[(i, j)])).collect(),
            NbmFile::Baseline(b) => vec![real(b.freqs()[i])],
        };
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::ModelFormat {
            line: self.line,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((n, l)) => {
                self.line = n + 1;
                Ok(l.trim_end_matches('\r'))
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next()?;
        match l.strip_prefix(key) {
            Some(rest) if rest.is_empty() => Ok(rest),
            Some(rest) if rest.starts_with(' ') => Ok(&rest[1..]),
            _ => Err(self.err(format!("expected `{key}`"))),
        }
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let v = self.keyed(key)?;
        v.trim()
            .parse()
            .map_err(|_| self.err(format!("bad {key} value {v:?}")))
    }

    fn reals(&self, s: &str) -> Result<Vec<f64>> {
        s.split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(format!("bad number {t:?}"))))
            .collect()
    }
}

pub fn read_nbm(text: &str) -> Result<NbmFile> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let version = lines.keyed(MAGIC)?;
    if version.trim() != VERSION.to_string() {
        return Err(lines.err(format!("unsupported version {version:?}")));
    }
    let kind = lines.keyed("kind")?;
    let mixture = match kind.trim() {
        "mixture" => true,
        "baseline" => false,
        other => return Err(lines.err(format!("unknown kind {other:?}"))),
    };
    let k = if mixture { lines.count("k")? } else { 1 };
    let d = lines.count("d")?;
    let mut names = Vec::with_capacity(d);
    for _ in 0..d {
        names.push(lines.keyed("feature")?.to_owned());
    }
    let weights = if mixture {
        let w = lines.keyed("weights")?;
        let w = lines.reals(w)?;
        if w.len() != k {
            return Err(lines.err(format!("expected {k} weights, found {}", w.len())));
        }
        w
    } else {
        vec![1.0]
    };
    lines.keyed("probs")?;
    let mut probs = Vec::with_capacity(d * k);
    for _ in 0..d {
        let l = lines.next()?;
        let row = lines.reals(l)?;
        if row.len() != k {
            return Err(lines.err(format!("expected {k} probabilities, found {}", row.len())));
        }
        probs.extend(row);
    }
    let at = lines.line;
    let wrap = |e: Error| match e {
        Error::InvalidArgument(message) => Error::ModelFormat { line: at, message },
        e => e,
    };
    if mixture {
        let p = DMatrix::from_row_slice(d, k, &probs);
        NaiveBayesModel::new(names, weights, p)
            .map(NbmFile::Mixture)
            .map_err(wrap)
    } else {
        BaselineModel::new(names, probs)
            .map(NbmFile::Baseline)
            .map_err(wrap)
    }
}

impl NbmFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        write_nbm(self, &mut buf).map_err(|e| Error::io(path, e))?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        read_nbm(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roundtrip(f: &NbmFile) -> NbmFile {
        let mut buf = Vec::new();
        write_nbm(f, &mut buf).unwrap();
        read_nbm(std::str::from_utf8(&buf).unwrap()).unwrap()
    }

    proptest! {
        #[test]
        fn mixture_roundtrips_bit_exact(
            raw_w in prop::collection::vec(1e-6f64..1.0, 1..6),
            seed in any::<u64>(),
            d in 1usize..8,
        ) {
            let total: f64 = raw_w.iter().sum();
            let w: Vec<f64> = raw_w.iter().map(|x| x / total).collect();
            let k = w.len();
            let mut s = seed;
            let p = DMatrix::from_fn(d, k, |_, _| {
                s = crate::rng::derive_seed(s, 1);
                (s >> 11) as f64 / (1u64 << 53) as f64
            });
            let names = (0..d).map(|i| format!("code {i}")).collect();
            if let Ok(m) = NaiveBayesModel::new(names, w, p) {
                let f = NbmFile::Mixture(m);
                prop_assert_eq!(roundtrip(&f), f);
            }
        }
    }

    #[test]
    fn baseline_roundtrips() {
        let b = BaselineModel::new(vec!["a".into(), "b".into()], vec![0.1, 1.0 / 3.0]).unwrap();
        let f = NbmFile::Baseline(b);
        assert_eq!(roundtrip(&f), f);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(read_nbm("nbm 2\nkind mixture\n").is_err());
        let bad = "nbm 1\nkind mixture\nk 1\nd 1\nfeature a\nweights 0.5\nprobs\n0.5\n";
        assert!(matches!(read_nbm(bad), Err(Error::ModelFormat { .. })));
        let short = "nbm 1\nkind baseline\nd 2\nfeature a\nfeature b\nprobs\n0.5\n";
        assert!(read_nbm(short).is_err());
    }
}
