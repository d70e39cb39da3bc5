//! Text and binary file formats.
//!
//! - Edge lists: one edge per line, `u v` or `u v w`; `#` starts a comment line.
//! - Features: CSV (one row per node) or ATPF binary: `b"ATPF"`, `u32` version 1,
//!   `u64` rows, `u64` cols, then rows*cols little-endian `f64`, row-major.
//! - Labels: one integer per line, `-1` for unlabeled.
//! - Splits: lines `train: ids...`, `val: ids...`, `test: ids...`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, LabelVector, SparseGraph, Symmetry};
use crate::probe::SplitSpec;
use crate::scalar::Scalar;

pub const ATPF_MAGIC: &[u8; 4] = b"ATPF";
pub const ATPF_VERSION: u32 = 1;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_id(tok: &str, line: usize) -> Result<usize> {
    let id: i64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("invalid node id {tok:?}")))?;
    usize::try_from(id)
        .map_err(|_| Error::Validation(format!("negative node id {id} at line {line}")))
}

pub fn read_edge_list<T: Scalar, R: BufRead>(
    reader: R,
    n_hint: Option<usize>,
    symmetry: Symmetry,
) -> Result<SparseGraph<T>> {
    let mut edges = Vec::new();
    let mut max_id = None;
    let mut header_n: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let text = line.trim();
        if let Some(count) = text.strip_prefix("# nodes ") {
            header_n = count.trim().parse().ok();
            continue;
        }
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = text.split_whitespace().collect();
        if !(2..=3).contains(&toks.len()) {
            return Err(parse_err(lineno, format!("expected `u v [w]`, got {text:?}")));
        }
        let u = parse_id(toks[0], lineno)?;
        let v = parse_id(toks[1], lineno)?;
        let w = match toks.get(2) {
            Some(t) => t
                .parse::<f64>()
                .map_err(|_| parse_err(lineno, format!("invalid weight {t:?}")))?,
            None => 1.0,
        };
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Validation(format!(
                "invalid weight {w} at line {lineno}"
            )));
        }
        max_id = max_id.max(Some(u.max(v)));
        edges.push((u, v, T::lit(w)));
    }
    let n = max_id
        .map_or(0, |m| m + 1)
        .max(n_hint.unwrap_or(0))
        .max(header_n.unwrap_or(0));
    SparseGraph::from_edges(n, edges, symmetry)
}

pub fn load_edge_list<T: Scalar>(
    path: impl AsRef<Path>,
    n_hint: Option<usize>,
    symmetry: Symmetry,
) -> Result<SparseGraph<T>> {
    read_edge_list(BufReader::new(File::open(path)?), n_hint, symmetry)
}

/// Writes each undirected edge once. A `# nodes N` header records the node
/// count so trailing isolated nodes survive a round trip; readers honor it.
pub fn write_edge_list<T: Scalar, W: Write>(g: &SparseGraph<T>, mut out: W) -> Result<()> {
    writeln!(out, "# nodes {}", g.node_count())?;
    for (u, v, w) in g.edges() {
        if g.is_weighted() {
            writeln!(out, "{u} {v} {}", w.as_f64())?;
        } else {
            writeln!(out, "{u} {v}")?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_edge_list<T: Scalar>(g: &SparseGraph<T>, path: impl AsRef<Path>) -> Result<()> {
    write_edge_list(g, BufWriter::new(File::create(path)?))
}

pub fn read_features_csv<T: Scalar, R: BufRead>(reader: R) -> Result<FeatureMatrix<T>> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let row = text
            .split(',')
            .map(|t| {
                let x: f64 = t
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(i + 1, format!("invalid number {:?}", t.trim())))?;
                Ok(T::lit(x))
            })
            .collect::<Result<Vec<T>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    i + 1,
                    format!("expected {} columns, got {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    FeatureMatrix::from_rows(&rows)
}

pub fn write_features_csv<T: Scalar, W: Write>(x: &FeatureMatrix<T>, mut out: W) -> Result<()> {
    for i in 0..x.rows() {
        let line: Vec<String> = x.row(i).iter().map(|v| v.as_f64().to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_atpf<T: Scalar, R: Read>(mut reader: R) -> Result<FeatureMatrix<T>> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != ATPF_MAGIC {
        return Err(Error::validation("not an ATPF file (bad magic)"));
    }
    let mut b4 = [0u8; 4];
    reader.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != ATPF_VERSION {
        return Err(Error::validation(format!("unsupported ATPF version {version}")));
    }
    let mut b8 = [0u8; 8];
    reader.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    reader.read_exact(&mut b8)?;
    let f = u64::from_le_bytes(b8) as usize;
    let len = n
        .checked_mul(f)
        .ok_or_else(|| Error::validation("ATPF dimensions overflow"))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        reader.read_exact(&mut b8)?;
        data.push(T::lit(f64::from_le_bytes(b8)));
    }
    if reader.read(&mut b8)? != 0 {
        return Err(Error::validation("trailing bytes after ATPF payload"));
    }
    FeatureMatrix::new(n, f, data)
}

pub fn write_atpf<T: Scalar, W: Write>(x: &FeatureMatrix<T>, mut out: W) -> Result<()> {
    out.write_all(ATPF_MAGIC)?;
    out.write_all(&ATPF_VERSION.to_le_bytes())?;
    out.write_all(&(x.rows() as u64).to_le_bytes())?;
    out.write_all(&(x.cols() as u64).to_le_bytes())?;
    for v in x.as_slice() {
        out.write_all(&v.as_f64().to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Loads ATPF or CSV, sniffing the magic bytes.
pub fn load_features<T: Scalar>(path: impl AsRef<Path>) -> Result<FeatureMatrix<T>> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(ATPF_MAGIC) {
        read_atpf(bytes.as_slice())
    } else {
        read_features_csv(bytes.as_slice())
    }
}

pub fn save_atpf<T: Scalar>(x: &FeatureMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    write_atpf(x, BufWriter::new(File::create(path)?))
}

pub fn save_features_csv<T: Scalar>(x: &FeatureMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    write_features_csv(x, BufWriter::new(File::create(path)?))
}

pub fn read_labels<R: BufRead>(reader: R) -> Result<LabelVector> {
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let v: i64 = text
            .parse()
            .map_err(|_| parse_err(i + 1, format!("invalid label {text:?}")))?;
        values.push(match v {
            -1 => None,
            v if v >= 0 => Some(v as usize),
            v => {
                return Err(Error::Validation(format!(
                    "label {v} at line {} (only -1 marks unlabeled)",
                    i + 1
                )))
            }
        });
    }
    Ok(LabelVector::new(values))
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    read_labels(BufReader::new(File::open(path)?))
}

pub fn write_labels<W: Write>(labels: &LabelVector, mut out: W) -> Result<()> {
    for v in &labels.values {
        match v {
            Some(c) => writeln!(out, "{c}")?,
            None => writeln!(out, "-1")?,
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_labels(labels: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    write_labels(labels, BufWriter::new(File::create(path)?))
}

pub fn read_split<R: BufRead>(reader: R) -> Result<SplitSpec> {
    let mut split = SplitSpec::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let (name, ids) = text
            .split_once(':')
            .ok_or_else(|| parse_err(i + 1, "expected `train|val|test: ids...`"))?;
        let ids = ids
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| parse_id(t, i + 1))
            .collect::<Result<Vec<_>>>()?;
        match name.trim() {
            "train" => split.train = ids,
            "val" => split.val = ids,
            "test" => split.test = ids,
            other => return Err(parse_err(i + 1, format!("unknown split {other:?}"))),
        }
    }
    Ok(split)
}

pub fn load_split(path: impl AsRef<Path>) -> Result<SplitSpec> {
    read_split(BufReader::new(File::open(path)?))
}

pub fn write_split<W: Write>(split: &SplitSpec, mut out: W) -> Result<()> {
    for (name, ids) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        let ids: Vec<String> = ids.iter().map(usize::to_string).collect();
        writeln!(out, "{name}: {}", ids.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_split(split: &SplitSpec, path: impl AsRef<Path>) -> Result<()> {
    write_split(split, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    type G = SparseGraph<f64>;

    fn load(text: &str) -> Result<G> {
        read_edge_list(text.as_bytes(), None, Symmetry::Reject)
    }

    #[test]
    fn edge_list_examples() {
        let g = load("0 1\n1 2").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.degrees().values, vec![1.0, 2.0, 1.0]);

        let g = load("0 1\n1 0").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.degrees().values, vec![1.0, 1.0]);

        let g = load("0 1 0.5\n0 1 0.5").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.weight(0, 1), Some(1.0));
    }

    #[test]
    fn comments_and_hint() {
        let g = read_edge_list::<f64, _>("# hi\n\n0 1\n".as_bytes(), Some(5), Symmetry::Reject)
            .unwrap();
        assert_eq!(g.node_count(), 5);
    }

    #[test]
    fn edge_list_errors() {
        match load("0 1\n0 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(load("0 1 2 3"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load("-1 2"), Err(Error::Validation(_))));
    }

    #[test]
    fn edge_list_round_trip() {
        let g: G = read_edge_list("0 1 0.25\n1 2 3\n4 4 1\n2 3 0".as_bytes(), Some(7), Symmetry::Reject)
            .unwrap();
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back: G = read_edge_list(text.as_bytes(), None, Symmetry::Reject).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn atpf_layout() {
        let x = FeatureMatrix::new(2, 1, vec![1.5f64, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_atpf(&x, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"ATPF");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 1.5);
        assert_eq!(buf.len(), 24 + 16);
        assert_eq!(read_atpf::<f64, _>(buf.as_slice()).unwrap(), x);

        buf[0] = b'X';
        assert!(read_atpf::<f64, _>(buf.as_slice()).is_err());
    }

    #[test]
    fn csv_features() {
        let x: FeatureMatrix<f64> = read_features_csv("1,2\n3, 4\n".as_bytes()).unwrap();
        assert_eq!(x.row(1), &[3.0, 4.0]);
        assert!(read_features_csv::<f64, _>("1,2\n3\n".as_bytes()).is_err());
        assert!(read_features_csv::<f64, _>("1,nan\n".as_bytes()).is_err());
        let x32: FeatureMatrix<f32> = read_features_csv("0.5\n".as_bytes()).unwrap();
        assert_eq!(x32.get(0, 0), 0.5f32);
    }

    #[test]
    fn labels_and_split() {
        let l = read_labels("0\n-1\n2\n".as_bytes()).unwrap();
        assert_eq!(l.values, vec![Some(0), None, Some(2)]);
        assert!(read_labels("-2\n".as_bytes()).is_err());

        let s = read_split("train: 0 1\nval: 2\ntest: 3,4\n".as_bytes()).unwrap();
        assert_eq!(s.train, vec![0, 1]);
        assert_eq!(s.test, vec![3, 4]);
        let mut buf = Vec::new();
        write_split(&s, &mut buf).unwrap();
        assert_eq!(read_split(buf.as_slice()).unwrap(), s);
    }
}
