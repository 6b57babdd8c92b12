//! Word Mover's Embedding.
//!
//! A random document `omega` is `D ~ Uniform{1..D_max}` random words, each
//! coordinate drawn uniformly from `[v_min, v_max]`, with uniform weights
//! `1/D`. The feature of a document `x` against `omega` is
//! `phi(x) = exp(-gamma * WMD(x, omega))`, and the embedding of `x` is
//! `Z(x) = (phi_1(x), ..., phi_R(x)) / sqrt(R)`. Inner products of embeddings
//! are Monte-Carlo estimates of the Word Mover's Kernel.
//!
//! Random document `j` is generated from its own substream of `(seed, j)`,
//! so a basis of size `R` is a prefix of any larger basis with the same
//! spec.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rayon::prelude::*;

use crate::corpus::{used_word_ids, Document};
use crate::embeddings::{CoordinateExtrema, EmbeddingTable};
use crate::error::{Error, Result};
use crate::matrix::{read_f64s, read_u64, with_writer, write_f64s, write_tsv_rows};
use crate::rng::{substream, Domain};
use crate::transport::{point_distance, solve_transport, CostMatrix};

/// Default maximum random-document length.
pub const DEFAULT_D_MAX: usize = 6;

/// Parameters of the random-document distribution and embedding size.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomBasisSpec {
    /// Number of random documents `R`.
    pub r: usize,
    pub d_max: usize,
    pub gamma: f64,
    pub seed: u64,
    pub extrema: CoordinateExtrema,
    pub dim: usize,
    /// When set, the sampling box is shifted so its center is this point.
    pub center: Option<Vec<f64>>,
}

impl RandomBasisSpec {
    pub fn new(
        r: usize,
        d_max: usize,
        gamma: f64,
        seed: u64,
        extrema: CoordinateExtrema,
        dim: usize,
    ) -> Result<Self> {
        let spec = RandomBasisSpec {
            r,
            d_max,
            gamma,
            seed,
            extrema,
            dim,
            center: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec whose extrema (and optional center) come from the words used by
    /// `docs`.
    #[allow(clippy::too_many_arguments)]
    pub fn for_documents(
        table: &EmbeddingTable,
        docs: &[Document],
        r: usize,
        d_max: usize,
        gamma: f64,
        seed: u64,
        mean_centered: bool,
    ) -> Result<Self> {
        let words = used_word_ids(docs);
        let extrema = table.coordinate_extrema_ids(&words)?;
        let mut spec = RandomBasisSpec::new(r, d_max, gamma, seed, extrema, table.dim())?;
        if mean_centered {
            spec.center = Some(table.mean_vector(&words)?);
        }
        Ok(spec)
    }

    pub fn with_r(&self, r: usize) -> Self {
        RandomBasisSpec { r, ..self.clone() }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        RandomBasisSpec {
            gamma,
            ..self.clone()
        }
    }

    pub fn with_d_max(&self, d_max: usize) -> Self {
        RandomBasisSpec {
            d_max,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::InvalidParameter("R must be at least 1".into()));
        }
        if self.d_max == 0 {
            return Err(Error::InvalidParameter("D_max must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        CoordinateExtrema::new(self.extrema.v_min, self.extrema.v_max)?;
        if let Some(c) = &self.center {
            if c.len() != self.dim || c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(
                    "center must have `dim` finite coordinates".into(),
                ));
            }
        }
        Ok(())
    }

    /// Flat `key=value` text, one pair per line. Floats use the shortest
    /// round-trip representation.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("r={}\n", self.r));
        out.push_str("d_min=1\n");
        out.push_str(&format!("d_max={}\n", self.d_max));
        out.push_str(&format!("gamma={:?}\n", self.gamma));
        out.push_str(&format!("seed={}\n", self.seed));
        out.push_str(&format!("v_min={:?}\n", self.extrema.v_min));
        out.push_str(&format!("v_max={:?}\n", self.extrema.v_max));
        out.push_str(&format!("dim={}\n", self.dim));
        if let Some(c) = &self.center {
            let coords: Vec<String> = c.iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&format!("center={}\n", coords.join(",")));
        }
        out
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Text {
                line: i + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            kv.insert(k.trim().to_owned(), (i + 1, v.trim().to_owned()));
        }
        fn take<T: std::str::FromStr>(
            kv: &BTreeMap<String, (usize, String)>,
            key: &str,
        ) -> Result<T> {
            let (line, value) = kv.get(key).ok_or_else(|| Error::Text {
                line: 0,
                message: format!("missing key {key:?}"),
            })?;
            value.parse().map_err(|_| Error::Text {
                line: *line,
                message: format!("invalid value {value:?} for {key:?}"),
            })
        }
        let d_min: usize = take(&kv, "d_min").unwrap_or(1);
        if d_min != 1 {
            return Err(Error::InvalidParameter("D_min is fixed to 1".into()));
        }
        let extrema = CoordinateExtrema::new(take(&kv, "v_min")?, take(&kv, "v_max")?)?;
        let mut spec = RandomBasisSpec::new(
            take(&kv, "r")?,
            take(&kv, "d_max")?,
            take(&kv, "gamma")?,
            take(&kv, "seed")?,
            extrema,
            take(&kv, "dim")?,
        )?;
        if let Some((line, value)) = kv.get("center") {
            let center = value
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Text {
                    line: *line,
                    message: "invalid center coordinates".into(),
                })?;
            spec.center = Some(center);
            spec.validate()?;
        }
        Ok(spec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        with_writer(path, |w| Ok(w.write_all(self.to_config_string().as_bytes())?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text)
    }
}

/// A sampled random document: `len` points in `R^dim` with uniform weights.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomDocument {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl RandomDocument {
    /// Random document from explicit points, weighted uniformly.
    pub fn from_points(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates do not form points of dimension {dim}",
                points.len()
            )));
        }
        let len = points.len() / dim;
        Ok(RandomDocument {
            dim,
            points,
            weights: vec![1.0 / len as f64; len],
        })
    }

    /// Random document with the same vectors and weights as `doc`.
    pub fn from_document(table: &EmbeddingTable, doc: &Document) -> Self {
        let points = doc
            .word_ids()
            .iter()
            .flat_map(|&id| table.vector(id).iter().map(|&x| f64::from(x)))
            .collect();
        RandomDocument {
            dim: table.dim(),
            points,
            weights: doc.weights().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, l: usize) -> &[f64] {
        &self.points[l * self.dim..(l + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Draws random document `index` (zero-based) of `spec`. The result depends
/// only on `(spec, index)`.
pub fn sample_random_document(spec: &RandomBasisSpec, index: usize) -> RandomDocument {
    let mut rng = substream(spec.seed, Domain::RandomDocument, index as u64);
    let len = rng.gen_range(1..=spec.d_max);
    let CoordinateExtrema { v_min, v_max } = spec.extrema;
    let mut points = Vec::with_capacity(len * spec.dim);
    if v_min == v_max {
        points.resize(len * spec.dim, v_min);
    } else {
        let coord = Uniform::new_inclusive(v_min, v_max);
        points.extend((0..len * spec.dim).map(|_| coord.sample(&mut rng)));
    }
    if let Some(center) = &spec.center {
        let mid = 0.5 * (v_min + v_max);
        for point in points.chunks_exact_mut(spec.dim) {
            for (x, c) in point.iter_mut().zip(center) {
                *x += c - mid;
            }
        }
    }
    RandomDocument {
        dim: spec.dim,
        points,
        weights: vec![1.0 / len as f64; len],
    }
}

/// `R` random documents together with the spec that generated them.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomBasis {
    spec: RandomBasisSpec,
    docs: Vec<RandomDocument>,
}

impl RandomBasis {
    pub fn generate(spec: RandomBasisSpec) -> Result<Self> {
        spec.validate()?;
        let docs = (0..spec.r)
            .map(|j| sample_random_document(&spec, j))
            .collect();
        Ok(RandomBasis { spec, docs })
    }

    /// Basis with explicitly given random documents. The spec's `r` is set
    /// to the number of documents.
    pub fn from_documents(mut spec: RandomBasisSpec, docs: Vec<RandomDocument>) -> Result<Self> {
        spec.r = docs.len();
        spec.validate()?;
        if docs.iter().any(|d| d.dim() != spec.dim) {
            return Err(Error::DimensionMismatch(
                "random document dimension differs from the spec".into(),
            ));
        }
        Ok(RandomBasis { spec, docs })
    }

    pub fn spec(&self) -> &RandomBasisSpec {
        &self.spec
    }

    pub fn docs(&self) -> &[RandomDocument] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// Row-major `N x R` matrix of WME features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    pub seed: u64,
    pub gamma: f64,
    pub d_max: u32,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, spec: &RandomBasisSpec) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} feature matrix",
                data.len()
            )));
        }
        Ok(FeatureMatrix {
            rows,
            cols,
            data,
            seed: spec.seed,
            gamma: spec.gamma,
            d_max: spec.d_max as u32,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            rows: rows.len(),
            data,
            ..self.clone_header()
        }
    }

    /// Row-wise concatenation of two matrices over the same basis.
    pub fn vstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.cols != other.cols
            || self.seed != other.seed
            || self.gamma.to_bits() != other.gamma.to_bits()
            || self.d_max != other.d_max
        {
            return Err(Error::DimensionMismatch(
                "feature matrices come from different bases".into(),
            ));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(FeatureMatrix {
            rows: self.rows + other.rows,
            data,
            ..self.clone_header()
        })
    }

    fn clone_header(&self) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.rows,
            cols: self.cols,
            data: Vec::new(),
            seed: self.seed,
            gamma: self.gamma,
            d_max: self.d_max,
        }
    }

    /// Binary form: `u64 N, u64 R, u64 seed, f64 gamma, u32 D_max`, then
    /// row-major `f64`, all little-endian.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.gamma.to_le_bytes())?;
        w.write_all(&self.d_max.to_le_bytes())?;
        write_f64s(w, &self.data)
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let rows = read_u64(r, 0)? as usize;
        let cols = read_u64(r, 8)? as usize;
        let seed = read_u64(r, 16)?;
        let gamma = f64::from_bits(read_u64(r, 24)?);
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(|_| Error::Binary {
            offset: 32,
            message: "truncated header".into(),
        })?;
        let d_max = u32::from_le_bytes(b);
        let n = rows.checked_mul(cols).ok_or_else(|| Error::Binary {
            offset: 0,
            message: "matrix size overflows".into(),
        })?;
        let data = read_f64s(r, n, 36)?;
        Ok(FeatureMatrix {
            rows,
            cols,
            data,
            seed,
            gamma,
            d_max,
        })
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        with_writer(path, |w| self.write_binary(w))
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_binary(&mut BufReader::new(file))
    }

    pub fn write_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        write_tsv_rows(w, self.cols, &self.data)
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        with_writer(path, |w| self.write_tsv(w))
    }
}

fn document_cost(table: &EmbeddingTable, x: &Document, omega: &RandomDocument) -> Result<CostMatrix> {
    if omega.dim() != table.dim() {
        return Err(Error::DimensionMismatch(format!(
            "random document has dimension {}, table has {}",
            omega.dim(),
            table.dim()
        )));
    }
    if x.table_id() != table.fingerprint() {
        return Err(Error::TableMismatch {
            expected: table.fingerprint(),
            found: x.table_id(),
        });
    }
    let mut data = Vec::with_capacity(x.len() * omega.len());
    for &id in x.word_ids() {
        let v = table.vector(id);
        data.extend((0..omega.len()).map(|l| point_distance(v, omega.point(l))));
    }
    CostMatrix::new(x.len(), omega.len(), data)
}

fn feature_from_cost(x: &Document, omega: &RandomDocument, cost: &CostMatrix, gamma: f64) -> Result<f64> {
    let distance = solve_transport(x.weights(), omega.weights(), cost)?.objective();
    let phi = (-gamma * distance).exp();
    if !(phi > 0.0) {
        return Err(Error::Numerical(format!(
            "feature exp(-{gamma} * {distance}) underflows to zero"
        )));
    }
    Ok(phi)
}

/// `exp(-gamma * WMD(x, omega))`.
pub fn feature_value(
    table: &EmbeddingTable,
    x: &Document,
    omega: &RandomDocument,
    gamma: f64,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let cost = document_cost(table, x, omega)?;
    feature_from_cost(x, omega, &cost, gamma)
}

/// Distances from every random word of one random document to every word of
/// a fixed word set, computed once and reused for all documents.
struct OmegaDistances<'a> {
    local: &'a [u32],
    words: usize,
    /// `len(omega) x words`, row-major.
    distances: Vec<f64>,
}

impl<'a> OmegaDistances<'a> {
    fn new(table: &EmbeddingTable, words: &[usize], local: &'a [u32], omega: &RandomDocument) -> Self {
        let mut distances = Vec::with_capacity(omega.len() * words.len());
        for l in 0..omega.len() {
            let p = omega.point(l);
            distances.extend(words.iter().map(|&w| point_distance(table.vector(w), p)));
        }
        OmegaDistances {
            local,
            words: words.len(),
            distances,
        }
    }

    fn cost(&self, x: &Document, omega: &RandomDocument) -> Result<CostMatrix> {
        let mut data = Vec::with_capacity(x.len() * omega.len());
        for &id in x.word_ids() {
            let w = self.local[id] as usize;
            data.extend((0..omega.len()).map(|l| self.distances[l * self.words + w]));
        }
        CostMatrix::new(x.len(), omega.len(), data)
    }
}

/// Options for feature-matrix computation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EmbedOptions {
    /// Precompute random-word to vocabulary-word distances once per random
    /// document instead of once per (document, random document) pair.
    pub precompute: bool,
}

/// Samples a basis from `spec` and embeds `docs` with it.
pub fn embed_corpus(
    table: &EmbeddingTable,
    docs: &[Document],
    spec: &RandomBasisSpec,
    options: EmbedOptions,
) -> Result<(RandomBasis, FeatureMatrix)> {
    if docs.is_empty() {
        return Err(Error::NoData("cannot embed an empty corpus".into()));
    }
    let basis = RandomBasis::generate(spec.clone())?;
    let z = embed_with_basis(table, docs, &basis, options)?;
    Ok((basis, z))
}

/// Unscaled features `phi_j(x_i)` for a basis, row-major `N x R`.
///
/// Scaling by `1/sqrt(R)` is deferred so that sweeps over `R` can take
/// column prefixes and obtain exactly the matrix a smaller basis produces.
#[derive(Clone, Debug, PartialEq)]
pub struct RawFeatures {
    rows: usize,
    cols: usize,
    phi: Vec<f64>,
    spec: RandomBasisSpec,
}

impl RawFeatures {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn phi(&self, i: usize, j: usize) -> f64 {
        self.phi[i * self.cols + j]
    }

    /// Feature matrix of the first `r` random documents, scaled by
    /// `1/sqrt(r)`.
    pub fn scaled_prefix(&self, r: usize) -> Result<FeatureMatrix> {
        if r == 0 || r > self.cols {
            return Err(Error::InvalidParameter(format!(
                "prefix of {r} columns from {}",
                self.cols
            )));
        }
        let scale = 1.0 / (r as f64).sqrt();
        let mut data = Vec::with_capacity(self.rows * r);
        for row in self.phi.chunks_exact(self.cols) {
            data.extend(row[..r].iter().map(|&phi| scale * phi));
        }
        FeatureMatrix::new(self.rows, r, data, &self.spec.with_r(r))
    }

    pub fn scaled(&self) -> Result<FeatureMatrix> {
        self.scaled_prefix(self.cols)
    }
}

/// Computes `phi_j(x_i)` for every document and random document. Columns
/// are computed in parallel on the current rayon pool; the output does not
/// depend on the pool size.
pub fn raw_features(
    table: &EmbeddingTable,
    docs: &[Document],
    basis: &RandomBasis,
    options: EmbedOptions,
) -> Result<RawFeatures> {
    let spec = basis.spec();
    let r = basis.len();
    let n = docs.len();

    let words = used_word_ids(docs);
    let mut local = Vec::new();
    if options.precompute {
        local = vec![u32::MAX; table.len()];
        for (k, &w) in words.iter().enumerate() {
            local[w] = k as u32;
        }
    }

    let columns: Vec<Vec<f64>> = basis
        .docs()
        .par_iter()
        .map(|omega| {
            let pre = options
                .precompute
                .then(|| OmegaDistances::new(table, &words, &local, omega));
            docs.iter()
                .map(|x| {
                    let cost = match &pre {
                        Some(pre) => {
                            check_doc(table, x, omega)?;
                            pre.cost(x, omega)?
                        }
                        None => document_cost(table, x, omega)?,
                    };
                    feature_from_cost(x, omega, &cost, spec.gamma)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut phi = vec![0.0; n * r];
    for (j, column) in columns.iter().enumerate() {
        for (i, &z) in column.iter().enumerate() {
            phi[i * r + j] = z;
        }
    }
    Ok(RawFeatures {
        rows: n,
        cols: r,
        phi,
        spec: spec.clone(),
    })
}

/// Embeds `docs` against an existing basis.
pub fn embed_with_basis(
    table: &EmbeddingTable,
    docs: &[Document],
    basis: &RandomBasis,
    options: EmbedOptions,
) -> Result<FeatureMatrix> {
    raw_features(table, docs, basis, options)?.scaled()
}

fn check_doc(table: &EmbeddingTable, x: &Document, omega: &RandomDocument) -> Result<()> {
    if x.table_id() != table.fingerprint() {
        return Err(Error::TableMismatch {
            expected: table.fingerprint(),
            found: x.table_id(),
        });
    }
    if omega.dim() != table.dim() {
        return Err(Error::DimensionMismatch(
            "random document dimension differs from the table".into(),
        ));
    }
    Ok(())
}

/// Embedding of a single (possibly unseen) document.
pub fn embed_new(table: &EmbeddingTable, doc: &Document, basis: &RandomBasis) -> Result<Vec<f64>> {
    let scale = 1.0 / (basis.len() as f64).sqrt();
    basis
        .docs()
        .iter()
        .map(|omega| Ok(scale * feature_value(table, doc, omega, basis.spec().gamma)?))
        .collect()
}

/// `<Z(x), Z(y)>`, the Monte-Carlo kernel estimate.
pub fn approx_kernel(zx: &[f64], zy: &[f64]) -> Result<f64> {
    if zx.len() != zy.len() {
        return Err(Error::DimensionMismatch(format!(
            "feature vectors of length {} and {}",
            zx.len(),
            zy.len()
        )));
    }
    Ok(zx.iter().zip(zy).map(|(a, b)| a * b).sum())
}

/// Cosine of two embeddings.
pub fn cosine(zx: &[f64], zy: &[f64]) -> Result<f64> {
    let dot = approx_kernel(zx, zy)?;
    let nx = approx_kernel(zx, zx)?.sqrt();
    let ny = approx_kernel(zy, zy)?.sqrt();
    if !(nx > 0.0 && ny > 0.0) {
        return Err(Error::Numerical("zero-norm embedding".into()));
    }
    Ok((dot / (nx * ny)).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::new(
            2,
            vec![
                ("a", vec![0.0f32, 0.0]),
                ("b", vec![1.0, 1.0]),
                ("c", vec![-1.0, 0.5]),
            ],
        )
        .unwrap()
    }

    fn spec(r: usize, d_max: usize, v: (f64, f64)) -> RandomBasisSpec {
        RandomBasisSpec::new(r, d_max, 1.0, 42, CoordinateExtrema::new(v.0, v.1).unwrap(), 2)
            .unwrap()
    }

    #[test]
    fn d_max_one_gives_single_word() {
        let s = spec(10, 1, (-1.0, 1.0));
        for j in 0..10 {
            let d = sample_random_document(&s, j);
            assert_eq!(d.len(), 1);
            assert_eq!(d.weights(), &[1.0]);
            assert!(d.points().iter().all(|x| (-1.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn degenerate_interval() {
        let s = spec(5, 4, (0.0, 0.0));
        for j in 0..5 {
            assert!(sample_random_document(&s, j).points().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn mean_centering_shifts_box() {
        let mut s = spec(50, 3, (0.0, 2.0));
        s.center = Some(vec![10.0, -10.0]);
        for j in 0..50 {
            let d = sample_random_document(&s, j);
            for l in 0..d.len() {
                let p = d.point(l);
                assert!((9.0..=11.0).contains(&p[0]));
                assert!((-11.0..=-9.0).contains(&p[1]));
            }
        }
    }

    #[test]
    fn feature_of_own_vectors_is_one() {
        let t = table();
        let x = Document::new(t.fingerprint(), vec![0, 1, 2], vec![0.5, 0.25, 0.25]).unwrap();
        let omega = RandomDocument::from_document(&t, &x);
        assert_eq!(feature_value(&t, &x, &omega, 3.0).unwrap(), 1.0);
        let basis = RandomBasis::from_documents(spec(1, 3, (-1.0, 1.0)), vec![omega]).unwrap();
        assert_eq!(embed_new(&t, &x, &basis).unwrap(), vec![1.0]);
        let z = embed_with_basis(&t, &[x], &basis, EmbedOptions::default()).unwrap();
        assert_eq!(z.as_slice(), &[1.0]);
    }

    #[test]
    fn single_word_closed_form() {
        let t = table();
        let x = Document::new(t.fingerprint(), vec![1], vec![1.0]).unwrap();
        let omega = RandomDocument::from_points(2, vec![4.0, 5.0]).unwrap();
        let phi = feature_value(&t, &x, &omega, 0.5).unwrap();
        assert!((phi - (-0.5f64 * 5.0).exp()).abs() < 1e-15);
        assert!(feature_value(&t, &x, &omega, 0.0).is_err());
        let tiny = feature_value(&t, &x, &omega, 1e-8).unwrap();
        assert!((tiny - 1.0).abs() < 1e-6);
    }

    #[test]
    fn kernel_examples() {
        let z = vec![0.5; 4];
        assert_eq!(approx_kernel(&z, &z).unwrap(), 1.0);
        assert_eq!(approx_kernel(&[0.3], &[0.5]).unwrap(), 0.3 * 0.5);
        assert!(approx_kernel(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn config_round_trip() {
        let mut s = spec(64, 6, (-0.25, 0.75));
        s.gamma = 0.1 + 0.2;
        s.center = Some(vec![0.1, 1.0 / 3.0]);
        let back = RandomBasisSpec::from_config_str(&s.to_config_string()).unwrap();
        assert_eq!(back, s);
        assert!(RandomBasisSpec::from_config_str("r=1\n").is_err());
    }

    #[test]
    fn feature_matrix_binary_header() {
        let s = spec(2, 3, (0.0, 1.0));
        let z = FeatureMatrix::new(1, 2, vec![0.5, 0.25], &s).unwrap();
        let mut buf = Vec::new();
        z.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 * 4 + 4 + 16);
        assert_eq!(&buf[16..24], &42u64.to_le_bytes());
        assert_eq!(&buf[24..32], &1.0f64.to_le_bytes());
        assert_eq!(&buf[32..36], &3u32.to_le_bytes());
        assert_eq!(FeatureMatrix::read_binary(&mut &buf[..]).unwrap(), z);
    }

    #[test]
    fn precompute_is_transparent() {
        let t = table();
        let docs = vec![
            Document::new(t.fingerprint(), vec![0, 2], vec![0.5, 0.5]).unwrap(),
            Document::new(t.fingerprint(), vec![1], vec![1.0]).unwrap(),
        ];
        let s = RandomBasisSpec::for_documents(&t, &docs, 16, 4, 0.7, 9, false).unwrap();
        let (_, plain) = embed_corpus(&t, &docs, &s, EmbedOptions { precompute: false }).unwrap();
        let (_, pre) = embed_corpus(&t, &docs, &s, EmbedOptions { precompute: true }).unwrap();
        assert_eq!(plain, pre);
        let bound = 1.0 / 4.0;
        assert!(plain.as_slice().iter().all(|&z| z > 0.0 && z <= bound));
    }
}
