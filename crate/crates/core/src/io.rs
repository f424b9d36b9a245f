//! Matrix file formats (CSV, Matrix Market, PGM), mask files, and the
//! iteration-log CSV.

use crate::error::{Error, Result};
use crate::mask::ObservationMask;
use crate::matrix::DenseMatrix;
use crate::solver::IterationRecord;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Supported matrix file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    /// `%%MatrixMarket matrix array|coordinate real general`.
    MatrixMarket,
    /// Comma-separated values, `.` decimal, optional non-numeric header row.
    Csv,
    /// PGM grayscale, P2 (ASCII) or P5 (binary), maxval up to 65535.
    Pgm,
}

/// Guesses the format from the file extension.
pub fn detect_format(path: &Path) -> Result<MatrixFormat> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("mtx") | Some("mm") => Ok(MatrixFormat::MatrixMarket),
        Some("csv") => Ok(MatrixFormat::Csv),
        Some("pgm") => Ok(MatrixFormat::Pgm),
        other => Err(Error::config(format!(
            "cannot infer matrix format from extension {other:?}; expected .mtx/.mm, .csv, or .pgm"
        ))),
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Loads a dense matrix from a file in the given format.
pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DenseMatrix> {
    match format {
        MatrixFormat::Csv => load_csv(path),
        MatrixFormat::MatrixMarket => load_matrix_market(path),
        MatrixFormat::Pgm => load_pgm(path),
    }
}

fn load_csv(path: &Path) -> Result<DenseMatrix> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                if let Some(w) = width {
                    if vals.len() != w {
                        return Err(parse_err(
                            path,
                            lineno + 1,
                            format!("expected {w} columns, found {}", vals.len()),
                        ));
                    }
                } else {
                    width = Some(vals.len());
                }
                rows.push(vals);
            }
            Err(e) => {
                // a non-numeric first line is treated as a header
                if rows.is_empty() && width.is_none() {
                    continue;
                }
                return Err(parse_err(path, lineno + 1, format!("bad number: {e}")));
            }
        }
    }
    let width = width.ok_or_else(|| parse_err(path, 0, "no data rows"))?;
    let height = rows.len();
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    DenseMatrix::from_vec(height, width, data)
}

/// Writes CSV with full round-trip precision.
pub fn save_csv(x: &DenseMatrix, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for i in 0..x.rows() {
        let row: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn load_matrix_market(path: &Path) -> Result<DenseMatrix> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let header = header?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(path, 1, "expected '%%MatrixMarket matrix ...'"));
    }
    let coordinate = match tokens[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(path, 1, format!("unsupported layout '{other}'"))),
    };
    if tokens[3] != "real" || tokens[4] != "general" {
        return Err(parse_err(
            path,
            1,
            format!("unsupported qualifier '{} {}'", tokens[3], tokens[4]),
        ));
    }

    // gather all non-comment tokens with their line numbers
    let mut values: Vec<(usize, String)> = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        for tok in trimmed.split_whitespace() {
            values.push((lineno + 1, tok.to_string()));
        }
    }
    let mut cursor = values.into_iter();
    let mut next_num = |what: &str| -> Result<(usize, f64)> {
        let (lineno, tok) = cursor
            .next()
            .ok_or_else(|| parse_err(path, 0, format!("missing {what}")))?;
        let v: f64 = tok
            .parse()
            .map_err(|e| parse_err(path, lineno, format!("bad {what} '{tok}': {e}")))?;
        Ok((lineno, v))
    };

    let (_, m) = next_num("row count")?;
    let (_, n) = next_num("column count")?;
    let (m, n) = (m as usize, n as usize);
    if coordinate {
        let (_, nnz) = next_num("nonzero count")?;
        let mut mat = DenseMatrix::zeros(m, n);
        for _ in 0..(nnz as usize) {
            let (li, i) = next_num("row index")?;
            let (_, j) = next_num("column index")?;
            let (_, v) = next_num("value")?;
            let (i, j) = (i as usize, j as usize);
            if i < 1 || i > m || j < 1 || j > n {
                return Err(parse_err(
                    path,
                    li,
                    format!("index ({i}, {j}) out of range"),
                ));
            }
            mat.set(i - 1, j - 1, v);
        }
        Ok(mat)
    } else {
        // array format lists entries in column-major order
        let mut mat = DenseMatrix::zeros(m, n);
        for j in 0..n {
            for i in 0..m {
                let (_, v) = next_num("array entry")?;
                mat.set(i, j, v);
            }
        }
        Ok(mat)
    }
}

/// Writes the Matrix Market array format (column-major).
pub fn save_matrix_market(x: &DenseMatrix, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{} {}", x.rows(), x.cols())?;
    for j in 0..x.cols() {
        for i in 0..x.rows() {
            writeln!(out, "{}", x.get(i, j))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn load_pgm(path: &Path) -> Result<DenseMatrix> {
    let mut file = File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;

    let mut pos = 0usize;
    let mut next_token = |bytes: &[u8]| -> Result<String> {
        // skip whitespace and '#' comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err(path, 0, "unexpected end of PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = next_token(&bytes)?;
    let binary = match magic.as_str() {
        "P2" => false,
        "P5" => true,
        other => {
            return Err(parse_err(
                path,
                1,
                format!("unsupported PGM magic '{other}'"),
            ))
        }
    };
    let width: usize = next_token(&bytes)?
        .parse()
        .map_err(|e| parse_err(path, 0, format!("bad width: {e}")))?;
    let height: usize = next_token(&bytes)?
        .parse()
        .map_err(|e| parse_err(path, 0, format!("bad height: {e}")))?;
    let maxval: u32 = next_token(&bytes)?
        .parse()
        .map_err(|e| parse_err(path, 0, format!("bad maxval: {e}")))?;
    if maxval == 0 || maxval > 65_535 {
        return Err(parse_err(path, 0, format!("maxval {maxval} out of range")));
    }

    let count = width * height;
    let mut data = Vec::with_capacity(count);
    if binary {
        pos += 1; // single whitespace byte after maxval
        if maxval < 256 {
            if bytes.len() < pos + count {
                return Err(parse_err(path, 0, "truncated P5 payload"));
            }
            for k in 0..count {
                data.push(bytes[pos + k] as f64);
            }
        } else {
            if bytes.len() < pos + 2 * count {
                return Err(parse_err(path, 0, "truncated 16-bit P5 payload"));
            }
            for k in 0..count {
                let hi = bytes[pos + 2 * k] as u16;
                let lo = bytes[pos + 2 * k + 1] as u16;
                data.push(((hi << 8) | lo) as f64);
            }
        }
    } else {
        for _ in 0..count {
            let v: f64 = next_token(&bytes)?
                .parse()
                .map_err(|e| parse_err(path, 0, format!("bad sample: {e}")))?;
            data.push(v);
        }
    }
    DenseMatrix::from_vec(height, width, data)
}

/// Writes an ASCII (P2) PGM, rounding and clamping entries to
/// `[0, maxval]`.
pub fn save_pgm(x: &DenseMatrix, path: &Path, maxval: u32) -> Result<()> {
    if maxval == 0 || maxval > 65_535 {
        return Err(Error::config(format!("maxval {maxval} out of range")));
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "P2")?;
    writeln!(out, "{} {}", x.cols(), x.rows())?;
    writeln!(out, "{maxval}")?;
    for i in 0..x.rows() {
        let row: Vec<String> = x
            .row(i)
            .iter()
            .map(|&v| (v.round().clamp(0.0, maxval as f64) as u64).to_string())
            .collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

/// Loads a mask file: either a CSV of 0/1 with the expected shape or a
/// 1-based coordinate list with one `i j` pair per line.
pub fn load_mask(path: &Path, rows: usize, cols: usize) -> Result<ObservationMask> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let content: Vec<String> = reader.lines().collect::<std::result::Result<Vec<_>, _>>()?;
    let first_data = content
        .iter()
        .map(|l| l.trim())
        .find(|l| !l.is_empty() && !l.starts_with('%') && !l.starts_with('#'));
    let Some(first) = first_data else {
        return Err(parse_err(path, 0, "empty mask file"));
    };

    if first.contains(',') {
        let m = load_csv(path)?;
        if m.shape() != (rows, cols) {
            return Err(Error::shape(format!(
                "mask file is {:?}, expected {:?}",
                m.shape(),
                (rows, cols)
            )));
        }
        let mut observed = Vec::with_capacity(rows * cols);
        for &v in m.as_slice() {
            if v == 0.0 {
                observed.push(false);
            } else if v == 1.0 {
                observed.push(true);
            } else {
                return Err(Error::domain(format!(
                    "mask CSV entries must be 0 or 1, found {v}"
                )));
            }
        }
        ObservationMask::from_vec(rows, cols, observed)
    } else {
        let mut observed = vec![false; rows * cols];
        for (lineno, line) in content.iter().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') || trimmed.starts_with('#') {
                continue;
            }
            let mut it = trimmed.split_whitespace();
            let i: usize = it
                .next()
                .ok_or_else(|| parse_err(path, lineno + 1, "missing row index"))?
                .parse()
                .map_err(|e| parse_err(path, lineno + 1, format!("bad row index: {e}")))?;
            let j: usize = it
                .next()
                .ok_or_else(|| parse_err(path, lineno + 1, "missing column index"))?
                .parse()
                .map_err(|e| parse_err(path, lineno + 1, format!("bad column index: {e}")))?;
            if i < 1 || i > rows || j < 1 || j > cols {
                return Err(parse_err(
                    path,
                    lineno + 1,
                    format!("coordinate ({i}, {j}) out of range for {rows}x{cols}"),
                ));
            }
            observed[(i - 1) * cols + (j - 1)] = true;
        }
        ObservationMask::from_vec(rows, cols, observed)
    }
}

/// Writes a mask as a CSV of 0/1.
pub fn save_mask(mask: &ObservationMask, path: &Path) -> Result<()> {
    let (rows, cols) = mask.shape();
    let mut out = BufWriter::new(File::create(path)?);
    for i in 0..rows {
        let row: Vec<&str> = (0..cols)
            .map(|j| if mask.is_observed(i, j) { "1" } else { "0" })
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub const ITERATION_LOG_HEADER: &str = "iter,elapsed_s,objective,primal_res,dual_res,rho";

/// Formats one log row with 10 significant digits per float column.
pub fn format_record(r: &IterationRecord) -> String {
    format!(
        "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
        r.iter, r.elapsed_s, r.objective, r.primal_res, r.dual_res, r.rho
    )
}

/// Streaming writer for the iteration log CSV.
pub struct IterationLogWriter {
    out: BufWriter<File>,
}

impl IterationLogWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{ITERATION_LOG_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, record: &IterationRecord) -> Result<()> {
        writeln!(self.out, "{}", format_record(record))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Writes a complete iteration log in one call.
pub fn save_iteration_log(records: &[IterationRecord], path: &Path) -> Result<()> {
    let mut w = IterationLogWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}
