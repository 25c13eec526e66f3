//! Datasets with and without observed responses.
//!
//! Calibration data carries covariates *and* responses; test data carries
//! covariates only. Keeping those as two types means selection routines cannot
//! accidentally peek at test responses — a test point's response enters the
//! pipeline only through a region boundary substitute.
//!
//! The CSV layout is one header line `x1,...,xp[,y1,...,yd]` followed by one
//! row of numbers per observation. Files written by this crate parse back to
//! bit-identical arrays.

use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

fn csv_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Csv {
        line,
        column,
        message: message.into(),
    }
}

fn check_matrix_finite(what: &'static str, m: &Array2<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}

fn row_slice(m: &Array2<f64>, i: usize) -> &[f64] {
    m.row(i)
        .to_slice()
        .expect("matrix rows are stored contiguously")
}

/// Parse `x1,...,xp,y1,...,yd` and return `(p, d)`; `d` may be zero.
fn parse_header(line: &str) -> Result<(usize, usize)> {
    let tokens: Vec<&str> = line.split(',').map(str::trim).collect();
    let mut i = 0;
    let mut p = 0;
    while i < tokens.len() && tokens[i] == format!("x{}", p + 1) {
        p += 1;
        i += 1;
    }
    if p == 0 {
        return Err(csv_err(1, 1, "header must start with column x1"));
    }
    let mut d = 0;
    while i < tokens.len() && tokens[i] == format!("y{}", d + 1) {
        d += 1;
        i += 1;
    }
    if i != tokens.len() {
        return Err(csv_err(
            1,
            i + 1,
            format!("unexpected header column {:?}", tokens[i]),
        ));
    }
    Ok((p, d))
}

/// Read a CSV file into an `x` block and an optional `y` block.
fn read_csv(path: &Path) -> Result<(Array2<f64>, Option<Array2<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| csv_err(1, 1, "empty file"))?;
    let (p, d) = parse_header(header)?;

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut n = 0;
    for (idx, raw) in lines.enumerate() {
        let line_no = idx + 2;
        if raw.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split(',').map(str::trim).collect();
        if cells.len() != p + d {
            return Err(csv_err(
                line_no,
                cells.len().min(p + d),
                format!("expected {} columns, got {}", p + d, cells.len()),
            ));
        }
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| csv_err(line_no, j + 1, format!("bad number {cell:?}")))?;
            if !v.is_finite() {
                return Err(csv_err(line_no, j + 1, format!("non-finite value {cell:?}")));
            }
            if j < p {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
        n += 1;
    }

    let x = Array2::from_shape_vec((n, p), xs).expect("shape follows from construction");
    let y = if d == 0 {
        None
    } else {
        Some(Array2::from_shape_vec((n, d), ys).expect("shape follows from construction"))
    };
    Ok((x, y))
}

fn write_csv(path: &Path, x: &Array2<f64>, y: Option<&Array2<f64>>) -> Result<()> {
    let p = x.ncols();
    let d = y.map_or(0, Array2::ncols);
    let mut out = String::new();
    for j in 0..p {
        if j > 0 {
            out.push(',');
        }
        out.push_str(&format!("x{}", j + 1));
    }
    for j in 0..d {
        out.push_str(&format!(",y{}", j + 1));
    }
    out.push('\n');
    for i in 0..x.nrows() {
        for j in 0..p {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&x[[i, j]].to_string());
        }
        if let Some(y) = y {
            for j in 0..d {
                out.push(',');
                out.push_str(&y[[i, j]].to_string());
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Covariates paired with observed responses.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    x: Array2<f64>,
    y: Array2<f64>,
}

impl LabeledDataset {
    /// Pair an `n x p` covariate block with an `n x d` response block.
    pub fn new(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch {
                what: "response rows",
                expected: x.nrows(),
                got: y.nrows(),
            });
        }
        if x.ncols() == 0 {
            return Err(Error::Empty {
                what: "covariate columns",
            });
        }
        if y.ncols() == 0 {
            return Err(Error::Empty {
                what: "response columns",
            });
        }
        check_matrix_finite("covariates", &x)?;
        check_matrix_finite("responses", &y)?;
        Ok(Self { x, y })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Covariate dimension `p`.
    pub fn covariate_dim(&self) -> usize {
        self.x.ncols()
    }

    /// Response dimension `d`.
    pub fn response_dim(&self) -> usize {
        self.y.ncols()
    }

    /// Covariate block, one row per observation.
    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    /// Response block, one row per observation.
    pub fn y(&self) -> ArrayView2<'_, f64> {
        self.y.view()
    }

    /// Covariates of observation `i`.
    pub fn x_row(&self, i: usize) -> &[f64] {
        row_slice(&self.x, i)
    }

    /// Response of observation `i`.
    pub fn y_row(&self, i: usize) -> &[f64] {
        row_slice(&self.y, i)
    }

    /// The observations at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            if i >= self.n() {
                return Err(Error::InvalidArgument {
                    what: "subset index",
                    why: format!("{i} out of range for {} rows", self.n()),
                });
            }
        }
        let x = ndarray::stack(
            ndarray::Axis(0),
            &indices.iter().map(|&i| self.x.row(i)).collect::<Vec<_>>(),
        )
        .unwrap_or_else(|_| Array2::zeros((0, self.covariate_dim())));
        let y = ndarray::stack(
            ndarray::Axis(0),
            &indices.iter().map(|&i| self.y.row(i)).collect::<Vec<_>>(),
        )
        .unwrap_or_else(|_| Array2::zeros((0, self.response_dim())));
        Ok(Self { x, y })
    }

    /// Drop the responses.
    pub fn unlabeled(&self) -> UnlabeledDataset {
        UnlabeledDataset {
            x: self.x.clone(),
        }
    }

    /// Read `x1..xp,y1..yd` rows; the file must have at least one `y` column.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let (x, y) = read_csv(path.as_ref())?;
        let y = y.ok_or_else(|| csv_err(1, x.ncols() + 1, "missing response columns (y1...)"))?;
        Self::new(x, y)
    }

    /// Write the dataset back out in the same CSV layout.
    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(path.as_ref(), &self.x, Some(&self.y))
    }
}

/// Covariates only — the face a test set shows to selection routines.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledDataset {
    x: Array2<f64>,
}

impl UnlabeledDataset {
    /// Wrap an `n x p` covariate block.
    pub fn new(x: Array2<f64>) -> Result<Self> {
        if x.ncols() == 0 {
            return Err(Error::Empty {
                what: "covariate columns",
            });
        }
        check_matrix_finite("covariates", &x)?;
        Ok(Self { x })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Covariate dimension `p`.
    pub fn covariate_dim(&self) -> usize {
        self.x.ncols()
    }

    /// Covariate block, one row per observation.
    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    /// Covariates of observation `i`.
    pub fn x_row(&self, i: usize) -> &[f64] {
        row_slice(&self.x, i)
    }

    /// Read the `x` columns of a CSV file; any `y` columns are ignored, so
    /// files written for calibration can be reused as test inputs.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let (x, _) = read_csv(path.as_ref())?;
        Self::new(x)
    }

    /// Write the covariates with an `x1..xp` header.
    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_csv(path.as_ref(), &self.x, None)
    }
}
