//! Text file formats.
//!
//! Embedding file:
//!
//! ```text
//! #emb dim=<r> classes=<C>
//! <label>\t<v1>,<v2>,...,<vr>
//! ```
//!
//! Bit file:
//!
//! ```text
//! #bits len=<rl> classes=<C>
//! <label>\t<0/1 characters>
//! ```
//!
//! Both are UTF-8 with LF line endings. Labels are 0-based and must be below
//! the declared class count.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ldprepr_core::{BitVector, EmbeddingVector};

use crate::error::{PipelineError, Result};

/// Records of one file plus the header's class count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub classes: usize,
    pub records: Vec<T>,
}

impl<T> Dataset<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl Dataset<EmbeddingVector> {
    pub fn dim(&self) -> usize {
        self.records.first().map_or(0, |r| r.values.len())
    }
}

impl Dataset<BitVector> {
    pub fn bit_len(&self) -> usize {
        self.records.first().map_or(0, |r| r.len())
    }
}

/// Which of the two formats a file holds, judged by its first line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Embeddings,
    Bits,
}

pub fn sniff(path: &Path) -> Result<FileKind> {
    let file = File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| PipelineError::io(path, e))?;
    if first.starts_with("#emb") {
        Ok(FileKind::Embeddings)
    } else if first.starts_with("#bits") {
        Ok(FileKind::Bits)
    } else {
        Err(PipelineError::parse(
            path,
            1,
            "expected a #emb or #bits header",
        ))
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Dataset<EmbeddingVector>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| PipelineError::io(path, e))?;
    parse_embeddings(BufReader::new(file), path)
}

/// Parses an embedding file; `origin` only labels error messages.
pub fn parse_embeddings(reader: impl BufRead, origin: &Path) -> Result<Dataset<EmbeddingVector>> {
    let mut lines = numbered_lines(reader, origin);
    let (line_no, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| PipelineError::parse(origin, 1, "empty file"))?;
    let fields = parse_header(&header, "#emb", &["dim", "classes"], origin, line_no)?;
    let (dim, classes) = (fields[0], fields[1]);

    let mut records = Vec::new();
    for item in lines {
        let (line_no, line) = item?;
        let (label, body) = split_row(&line, classes, origin, line_no)?;
        let values = body
            .split(',')
            .map(|tok| {
                let v: f64 = tok.trim().parse().map_err(|_| {
                    PipelineError::parse(origin, line_no, format!("bad number {tok:?}"))
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(PipelineError::parse(
                        origin,
                        line_no,
                        format!("non-finite value {tok:?}"),
                    ))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(PipelineError::parse(
                origin,
                line_no,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        records.push(EmbeddingVector::new(label, values));
    }
    if records.is_empty() {
        return Err(PipelineError::parse(
            origin,
            line_no,
            "no records after header",
        ));
    }
    Ok(Dataset { classes, records })
}

pub fn write_embeddings(path: impl AsRef<Path>, data: &Dataset<EmbeddingVector>) -> Result<()> {
    let path = path.as_ref();
    write_atomically(path, |w| {
        writeln!(w, "#emb dim={} classes={}", data.dim(), data.classes)?;
        for rec in &data.records {
            write!(w, "{}\t", rec.label)?;
            for (i, v) in rec.values.iter().enumerate() {
                if i > 0 {
                    w.write_all(b",")?;
                }
                write!(w, "{v}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn load_bits(path: impl AsRef<Path>) -> Result<Dataset<BitVector>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| PipelineError::io(path, e))?;
    parse_bits(BufReader::new(file), path)
}

pub fn parse_bits(reader: impl BufRead, origin: &Path) -> Result<Dataset<BitVector>> {
    let mut lines = numbered_lines(reader, origin);
    let (line_no, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| PipelineError::parse(origin, 1, "empty file"))?;
    let fields = parse_header(&header, "#bits", &["len", "classes"], origin, line_no)?;
    let (len, classes) = (fields[0], fields[1]);

    let mut records = Vec::new();
    for item in lines {
        let (line_no, line) = item?;
        let (label, body) = split_row(&line, classes, origin, line_no)?;
        let mut bits: BitVector = body.parse().map_err(|e: ldprepr_core::Error| {
            PipelineError::parse(origin, line_no, e.to_string())
        })?;
        if bits.len() != len {
            return Err(PipelineError::parse(
                origin,
                line_no,
                format!("expected {len} bits, found {}", bits.len()),
            ));
        }
        bits.set_label(label);
        records.push(bits);
    }
    if records.is_empty() {
        return Err(PipelineError::parse(
            origin,
            line_no,
            "no records after header",
        ));
    }
    Ok(Dataset { classes, records })
}

pub fn write_bits<'a>(
    path: impl AsRef<Path>,
    classes: usize,
    records: impl IntoIterator<Item = &'a BitVector>,
) -> Result<()> {
    let path = path.as_ref();
    let mut records = records.into_iter().peekable();
    let len = records.peek().map_or(0, |r| r.len());
    write_atomically(path, |w| {
        writeln!(w, "#bits len={len} classes={classes}")?;
        for rec in records {
            writeln!(w, "{}\t{}", rec.label(), rec)?;
        }
        Ok(())
    })
}

fn numbered_lines<'a>(
    reader: impl BufRead + 'a,
    origin: &'a Path,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    reader.lines().enumerate().map(move |(i, line)| {
        line.map(|l| (i + 1, l))
            .map_err(|e| PipelineError::io(origin, e))
    })
    // a trailing newline yields no extra line; interior blank lines are errors
}

fn parse_header(
    line: &str,
    tag: &str,
    keys: &[&str],
    origin: &Path,
    line_no: usize,
) -> Result<Vec<usize>> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(tag) {
        return Err(PipelineError::parse(
            origin,
            line_no,
            format!("expected {tag} header"),
        ));
    }
    let mut values = vec![None; keys.len()];
    for tok in tokens {
        let (key, value) = tok.split_once('=').ok_or_else(|| {
            PipelineError::parse(origin, line_no, format!("bad header field {tok:?}"))
        })?;
        let slot = keys.iter().position(|k| *k == key).ok_or_else(|| {
            PipelineError::parse(origin, line_no, format!("unknown header key {key:?}"))
        })?;
        let n: usize = value.parse().map_err(|_| {
            PipelineError::parse(origin, line_no, format!("bad {key} value {value:?}"))
        })?;
        if n == 0 {
            return Err(PipelineError::parse(
                origin,
                line_no,
                format!("{key} must be > 0"),
            ));
        }
        values[slot] = Some(n);
    }
    keys.iter()
        .zip(values)
        .map(|(k, v)| {
            v.ok_or_else(|| PipelineError::parse(origin, line_no, format!("header lacks {k}=")))
        })
        .collect()
}

fn split_row<'l>(
    line: &'l str,
    classes: usize,
    origin: &Path,
    line_no: usize,
) -> Result<(usize, &'l str)> {
    let (label, body) = line
        .split_once('\t')
        .ok_or_else(|| PipelineError::parse(origin, line_no, "expected <label>\\t<data>"))?;
    let label: usize = label
        .parse()
        .map_err(|_| PipelineError::parse(origin, line_no, format!("bad label {label:?}")))?;
    if label >= classes {
        return Err(PipelineError::parse(
            origin,
            line_no,
            format!("label {label} outside classes={classes}"),
        ));
    }
    Ok((label, body))
}

/// Writes through a temp file in the same directory and renames it over `path`.
pub(crate) fn write_atomically(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(|e| PipelineError::io(path, e))
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}
