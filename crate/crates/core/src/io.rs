//! Matrix Market coordinate files and dataset manifests.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::CooMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Reads a coordinate-format Matrix Market file.
///
/// Symmetric and skew-symmetric storage is expanded to both triangles,
/// pattern entries become `1.0`. Complex, hermitian and dense (`array`)
/// files are rejected.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CooMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(BufReader::new(file), &path.display().to_string())
}

pub fn parse_matrix_market(reader: impl BufRead, source: &str) -> Result<CooMatrix> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        line,
        msg,
    };

    let mut lines = reader.lines().enumerate();
    let (field, symmetry) = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(|e| Error::io(source, e))?;
            parse_header(&line).map_err(|e| match e {
                Error::InvalidParameter(msg) => parse_err(1, msg),
                other => other,
            })?
        }
        None => return Err(parse_err(1, "empty file".into())),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut coo = CooMatrix::new(0, 0);
    let mut seen = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let Some((n_rows, n_cols, _)) = size else {
            if tokens.len() != 3 {
                return Err(parse_err(
                    lineno,
                    format!("expected `rows cols nnz`, got `{trimmed}`"),
                ));
            }
            let nums: Vec<usize> = tokens
                .iter()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(lineno, format!("bad size line: {e}")))?;
            size = Some((nums[0], nums[1], nums[2]));
            coo = CooMatrix::new(nums[0], nums[1]);
            continue;
        };

        let want = if field == Field::Pattern { 2 } else { 3 };
        if tokens.len() != want {
            return Err(parse_err(
                lineno,
                format!("expected {want} fields, found {}", tokens.len()),
            ));
        }
        let index = |t: &str, bound: usize| -> Result<usize> {
            let i: usize = t
                .parse()
                .map_err(|e| parse_err(lineno, format!("bad index `{t}`: {e}")))?;
            if i == 0 || i > bound {
                return Err(parse_err(lineno, format!("index {i} outside 1..={bound}")));
            }
            Ok(i - 1)
        };
        let row = index(tokens[0], n_rows)?;
        let col = index(tokens[1], n_cols)?;
        let value = match field {
            Field::Pattern => 1.0,
            Field::Real => tokens[2]
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("bad value `{}`: {e}", tokens[2])))?,
            Field::Integer => tokens[2]
                .parse::<i64>()
                .map_err(|e| parse_err(lineno, format!("bad integer `{}`: {e}", tokens[2])))?
                as f64,
        };
        coo.push(row, col, value)?;
        if row != col {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => coo.push(col, row, value)?,
                Symmetry::SkewSymmetric => coo.push(col, row, -value)?,
            }
        }
        seen += 1;
    }

    match size {
        None => Err(parse_err(1, "missing size line".into())),
        Some((_, _, nnz)) if nnz != seen => Err(parse_err(
            0,
            format!("size line declares {nnz} entries, file has {seen}"),
        )),
        Some(_) => Ok(coo),
    }
}

fn parse_header(line: &str) -> Result<(Field, Symmetry)> {
    let tokens: Vec<String> = line
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(Error::InvalidParameter(format!(
            "not a Matrix Market header: `{line}`"
        )));
    }
    if tokens[1] != "matrix" {
        return Err(Error::UnsupportedFormat(format!("object `{}`", tokens[1])));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::UnsupportedFormat(format!(
            "storage `{}` (only coordinate is supported)",
            tokens[2]
        )));
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(Error::UnsupportedFormat(format!("field `{other}`"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(Error::UnsupportedFormat(format!("symmetry `{other}`"))),
    };
    Ok((field, symmetry))
}

/// Writes a general real coordinate file. Values use the shortest decimal
/// form that parses back to the same `f64`.
pub fn write_matrix_market(m: &CooMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_matrix_market_to(m, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_matrix_market_to(m: &CooMatrix, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.n_rows(), m.n_cols(), m.len())?;
    for &(r, c, v) in m.entries() {
        writeln!(w, "{} {} {}", r + 1, c + 1, format_value(v))?;
    }
    Ok(())
}

fn format_value(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub path: PathBuf,
    pub group: String,
}

/// A list of named matrices for batch runs: one `name<TAB>path<TAB>group`
/// record per line. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut names = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Manifest(format!(
                    "line {}: expected 3 tab-separated fields, found {}",
                    i + 1,
                    fields.len()
                )));
            }
            let name = fields[0].to_string();
            if !names.insert(name.clone()) {
                return Err(Error::Manifest(format!(
                    "line {}: duplicate name `{name}`",
                    i + 1
                )));
            }
            let raw = Path::new(fields[1]);
            let path = if raw.is_absolute() {
                raw.to_path_buf()
            } else {
                base.join(raw)
            };
            if !path.exists() {
                return Err(Error::Manifest(format!(
                    "line {}: `{}` does not exist",
                    i + 1,
                    path.display()
                )));
            }
            entries.push(ManifestEntry {
                name,
                path,
                group: fields[2].to_string(),
            });
        }
        Ok(DatasetManifest { entries })
    }
}
