//! Row-major `f64` matrices and their on-disk forms.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense row-major matrix, used for pairwise distance matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Submatrix with the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            let row = self.row(r);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        DenseMatrix {
            rows: rows.len(),
            cols: cols.len(),
            data,
        }
    }

    /// Binary form: `u64 rows, u64 cols`, then row-major `f64`, all
    /// little-endian.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        write_f64s(w, &self.data)
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let rows = read_u64(r, 0)? as usize;
        let cols = read_u64(r, 8)? as usize;
        let data = read_f64s(r, rows.checked_mul(cols).ok_or_else(|| Error::Binary {
            offset: 0,
            message: "matrix size overflows".into(),
        })?, 16)?;
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        with_writer(path, |w| self.write_binary(w))
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_binary(&mut BufReader::new(file))
    }

    /// One tab-separated line per row.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        write_tsv_rows(w, self.cols, &self.data)
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        with_writer(path, |w| self.write_tsv(w))
    }
}

pub(crate) fn with_writer(
    path: impl AsRef<Path>,
    f: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    f(&mut writer)?;
    writer.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn write_tsv_rows<W: Write>(w: &mut W, cols: usize, data: &[f64]) -> Result<()> {
    if cols == 0 {
        return Ok(());
    }
    for row in data.chunks_exact(cols) {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                w.write_all(b"\t")?;
            }
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub(crate) fn read_u64<R: Read>(r: &mut R, offset: u64) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| Error::Binary {
        offset,
        message: "truncated header".into(),
    })?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize, offset: u64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n.min(1 << 24));
    let mut b = [0u8; 8];
    for i in 0..n {
        r.read_exact(&mut b).map_err(|_| Error::Binary {
            offset: offset + 8 * i as u64,
            message: "truncated matrix body".into(),
        })?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}
