//! Pre-trained word vectors.
//!
//! Two on-disk formats are supported:
//!
//! - word2vec binary: an ASCII header `<vocab_size> <dim>\n`, then for every
//!   word the token bytes, a single `0x20`, `dim` little-endian `f32`s and an
//!   optional `0x0A`.
//! - text: one `token v1 v2 ... vd` line per word.
//!
//! Tokens are matched exactly (case-sensitive). Vectors are stored at 32-bit
//! precision; every accessor that does arithmetic widens to `f64`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Vocabulary to dense vector map.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    fingerprint: u64,
}

/// Coordinate-wise extrema over a set of word vectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoordinateExtrema {
    pub v_min: f64,
    pub v_max: f64,
}

impl CoordinateExtrema {
    pub fn new(v_min: f64, v_max: f64) -> Result<Self> {
        if !v_min.is_finite() || !v_max.is_finite() || v_min > v_max {
            return Err(Error::InvalidParameter(format!(
                "extrema must be finite with v_min <= v_max, got ({v_min}, {v_max})"
            )));
        }
        Ok(CoordinateExtrema { v_min, v_max })
    }
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` pairs, in order.
    pub fn new<I, S>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        if dim == 0 {
            return Err(Error::InvalidTable("dimension must be positive".into()));
        }
        let mut table = TableBuilder::new(dim);
        for (token, vector) in entries {
            let token = token.into();
            if vector.len() != dim {
                return Err(Error::InvalidTable(format!(
                    "vector for {token:?} has {} entries, expected {dim}",
                    vector.len()
                )));
            }
            table.push(token, &vector).map_err(Error::InvalidTable)?;
        }
        table.finish()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Content hash identifying this table; documents carry it so that
    /// distance computations can reject ids from a different table.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.vocab[id]
    }

    /// Vector for a word id. Panics on an out-of-range id.
    pub fn vector(&self, id: usize) -> &[f32] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    /// Case-sensitive exact lookup.
    pub fn lookup(&self, token: &str) -> Option<&[f32]> {
        self.id(token).map(|id| self.vector(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.vocab
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(t, v)| (t.as_str(), v))
    }

    /// Rescales every nonzero vector to unit Euclidean norm.
    pub fn unit_normalized(&self) -> Self {
        let mut data = self.data.clone();
        for v in data.chunks_exact_mut(self.dim) {
            let norm = v
                .iter()
                .map(|&x| f64::from(x) * f64::from(x))
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                for x in v.iter_mut() {
                    *x = (f64::from(*x) / norm) as f32;
                }
            }
        }
        let fingerprint = fingerprint(self.dim, &self.vocab, &data);
        EmbeddingTable {
            dim: self.dim,
            vocab: self.vocab.clone(),
            index: self.index.clone(),
            data,
            fingerprint,
        }
    }

    /// Minimum and maximum over all coordinates of the vectors of `ids`.
    pub fn coordinate_extrema_ids(&self, ids: &[usize]) -> Result<CoordinateExtrema> {
        if ids.is_empty() {
            return Err(Error::NoKnownTokens);
        }
        let mut v_min = f64::INFINITY;
        let mut v_max = f64::NEG_INFINITY;
        for &id in ids {
            for &x in self.vector(id) {
                v_min = v_min.min(f64::from(x));
                v_max = v_max.max(f64::from(x));
            }
        }
        CoordinateExtrema::new(v_min, v_max)
    }

    /// Extrema over the tokens of `tokens` that are in the vocabulary.
    /// Unknown tokens are ignored; an empty intersection is an error.
    pub fn coordinate_extrema<'a, I>(&self, tokens: I) -> Result<CoordinateExtrema>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let ids: Vec<usize> = tokens.into_iter().filter_map(|t| self.id(t)).collect();
        self.coordinate_extrema_ids(&ids)
    }

    /// Per-coordinate mean of the vectors of `ids`.
    pub fn mean_vector(&self, ids: &[usize]) -> Result<Vec<f64>> {
        if ids.is_empty() {
            return Err(Error::NoKnownTokens);
        }
        let mut mean = vec![0.0; self.dim];
        for &id in ids {
            for (m, &x) in mean.iter_mut().zip(self.vector(id)) {
                *m += f64::from(x);
            }
        }
        let n = ids.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(mean)
    }

    pub fn load_word2vec_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_word2vec_binary(&mut BufReader::new(file))
    }

    pub fn read_word2vec_binary<R: BufRead>(reader: &mut R) -> Result<Self> {
        let mut reader = OffsetReader { inner: reader, offset: 0 };

        let header_start = reader.offset;
        let mut header = Vec::new();
        reader.read_until(b'\n', &mut header)?;
        if header.last() != Some(&b'\n') {
            return Err(binary_err(header_start, "missing header line"));
        }
        header.pop();
        let header = std::str::from_utf8(&header)
            .map_err(|_| binary_err(header_start, "header is not ASCII"))?;
        let mut fields = header.split_ascii_whitespace();
        let (n_words, dim) = match (fields.next(), fields.next(), fields.next()) {
            (Some(n), Some(d), None) => {
                let n: usize = n
                    .parse()
                    .map_err(|_| binary_err(header_start, "vocabulary size is not an integer"))?;
                let d: usize = d
                    .parse()
                    .map_err(|_| binary_err(header_start, "dimension is not an integer"))?;
                (n, d)
            }
            _ => {
                return Err(binary_err(
                    header_start,
                    "header must be `<vocab_size> <dim>`",
                ))
            }
        };
        if n_words == 0 {
            return Err(Error::EmptyVocabulary);
        }
        if dim == 0 {
            return Err(binary_err(header_start, "dimension must be positive"));
        }

        let mut table = TableBuilder::new(dim);
        let mut token = Vec::new();
        let mut raw = vec![0u8; dim * 4];
        let mut vector = vec![0f32; dim];
        for _ in 0..n_words {
            // Skip the optional newline terminating the previous vector.
            while reader.peek()? == Some(b'\n') {
                reader.consume(1);
            }
            let token_start = reader.offset;
            token.clear();
            reader.read_until(b' ', &mut token)?;
            if token.last() != Some(&b' ') {
                return Err(binary_err(token_start, "truncated token"));
            }
            token.pop();
            if token.is_empty() {
                return Err(binary_err(token_start, "empty token"));
            }
            let word = String::from_utf8(token.clone())
                .map_err(|_| binary_err(token_start, "token is not valid UTF-8"))?;

            let vector_start = reader.offset;
            reader
                .read_exact(&mut raw)
                .map_err(|_| binary_err(vector_start, "truncated vector block"))?;
            for (i, (v, bytes)) in vector.iter_mut().zip(raw.chunks_exact(4)).enumerate() {
                *v = f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
                if !v.is_finite() {
                    return Err(binary_err(
                        vector_start + 4 * i as u64,
                        format!("non-finite value for token {word:?}"),
                    ));
                }
            }
            table
                .push(word, &vector)
                .map_err(|m| binary_err(token_start, m))?;
        }
        table.finish()
    }

    pub fn write_word2vec_binary<W: Write>(&self, writer: &mut W) -> Result<()> {
        writeln!(writer, "{} {}", self.len(), self.dim)?;
        for (token, vector) in self.iter() {
            writer.write_all(token.as_bytes())?;
            writer.write_all(b" ")?;
            for v in vector {
                writer.write_all(&v.to_le_bytes())?;
            }
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_word2vec_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = BufWriter::new(file);
        self.write_word2vec_binary(&mut writer)?;
        writer.flush()?;
        Ok(())
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(BufReader::new(file))
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut table: Option<TableBuilder> = None;
        let mut vector = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else {
                continue;
            };
            vector.clear();
            for field in fields {
                let v: f32 = field.parse().map_err(|_| Error::Text {
                    line: line_no,
                    message: format!("cannot parse {field:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Text {
                        line: line_no,
                        message: format!("non-finite value {field:?}"),
                    });
                }
                vector.push(v);
            }
            let builder = table.get_or_insert_with(|| TableBuilder::new(vector.len()));
            if vector.is_empty() {
                return Err(Error::Text {
                    line: line_no,
                    message: format!("token {token:?} has no values"),
                });
            }
            if vector.len() != builder.dim {
                return Err(Error::Text {
                    line: line_no,
                    message: format!(
                        "expected {} values, found {}",
                        builder.dim,
                        vector.len()
                    ),
                });
            }
            builder
                .push(token.to_owned(), &vector)
                .map_err(|message| Error::Text {
                    line: line_no,
                    message,
                })?;
        }
        table.ok_or(Error::EmptyVocabulary)?.finish()
    }

    pub fn write_text<W: Write>(&self, writer: &mut W) -> Result<()> {
        for (token, vector) in self.iter() {
            writer.write_all(token.as_bytes())?;
            for v in vector {
                // `Display` for f32 is the shortest string that round-trips.
                write!(writer, " {v}")?;
            }
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = BufWriter::new(file);
        self.write_text(&mut writer)?;
        writer.flush()?;
        Ok(())
    }
}

struct TableBuilder {
    dim: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl TableBuilder {
    fn new(dim: usize) -> Self {
        TableBuilder {
            dim,
            vocab: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    fn push(&mut self, token: String, vector: &[f32]) -> Result<(), String> {
        if let Some(bad) = vector.iter().find(|v| !v.is_finite()) {
            return Err(format!("non-finite value {bad} for token {token:?}"));
        }
        if self.index.contains_key(&token) {
            return Err(format!("duplicate token {token:?}"));
        }
        self.index.insert(token.clone(), self.vocab.len());
        self.vocab.push(token);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    fn finish(self) -> Result<EmbeddingTable> {
        if self.vocab.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let fingerprint = fingerprint(self.dim, &self.vocab, &self.data);
        Ok(EmbeddingTable {
            dim: self.dim,
            vocab: self.vocab,
            index: self.index,
            data: self.data,
            fingerprint,
        })
    }
}

fn binary_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Binary {
        offset,
        message: message.into(),
    }
}

/// 64-bit FNV-1a over the table contents.
fn fingerprint(dim: usize, vocab: &[String], data: &[f32]) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(PRIME);
        }
    };
    feed(&(dim as u64).to_le_bytes());
    for token in vocab {
        feed(&(token.len() as u64).to_le_bytes());
        feed(token.as_bytes());
    }
    for v in data {
        feed(&v.to_bits().to_le_bytes());
    }
    hash
}

/// Buffered reader that tracks the absolute byte offset for error messages.
struct OffsetReader<'a, R> {
    inner: &'a mut R,
    offset: u64,
}

impl<R: BufRead> OffsetReader<'_, R> {
    fn read_until(&mut self, delim: u8, buf: &mut Vec<u8>) -> std::io::Result<usize> {
        let n = self.inner.read_until(delim, buf)?;
        self.offset += n as u64;
        Ok(n)
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> std::io::Result<()> {
        self.inner.read_exact(buf)?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn peek(&mut self) -> std::io::Result<Option<u8>> {
        Ok(self.inner.fill_buf()?.first().copied())
    }

    fn consume(&mut self, n: usize) {
        self.inner.consume(n);
        self.offset += n as u64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w2v_bytes(header: &str, words: &[(&str, &[f32])]) -> Vec<u8> {
        let mut out = header.as_bytes().to_vec();
        for (w, v) in words {
            out.extend_from_slice(w.as_bytes());
            out.push(b' ');
            for x in *v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    #[test]
    fn reads_constructed_binary_fixture() {
        let bytes = w2v_bytes("2 3\n", &[("a", &[1.0, 2.0, 3.0]), ("b", &[-1.0, 0.5, 0.0])]);
        let table = EmbeddingTable::read_word2vec_binary(&mut &bytes[..]).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.dim(), 3);
        assert_eq!(table.lookup("b"), Some(&[-1.0, 0.5, 0.0][..]));
        assert_eq!(table.vocab(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn binary_empty_vocabulary() {
        let err = EmbeddingTable::read_word2vec_binary(&mut &b"0 3\n"[..]).unwrap_err();
        assert!(matches!(err, Error::EmptyVocabulary), "{err}");
    }

    #[test]
    fn binary_malformed_header() {
        for header in ["3\n", "a b\n", "2 3 4\n", "2 3"] {
            let err = EmbeddingTable::read_word2vec_binary(&mut header.as_bytes()).unwrap_err();
            assert!(matches!(err, Error::Binary { offset: 0, .. }), "{header:?}: {err}");
        }
    }

    #[test]
    fn binary_truncated_vector_reports_offset() {
        let mut bytes = w2v_bytes("2 2\n", &[("a", &[1.0, 2.0]), ("b", &[3.0, 4.0])]);
        bytes.truncate(bytes.len() - 3);
        let err = EmbeddingTable::read_word2vec_binary(&mut &bytes[..]).unwrap_err();
        // header 4 bytes, "a " 2, vector 8, "b " 2 => vector of b starts at 16.
        match err {
            Error::Binary { offset, .. } => assert_eq!(offset, 16),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn binary_duplicate_and_nonfinite() {
        let bytes = w2v_bytes("2 1\n", &[("a", &[1.0]), ("a", &[2.0])]);
        let err = EmbeddingTable::read_word2vec_binary(&mut &bytes[..]).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        assert!(matches!(err, Error::Binary { offset: 10, .. }));

        let bytes = w2v_bytes("1 2\n", &[("a", &[1.0, f32::NAN])]);
        let err = EmbeddingTable::read_word2vec_binary(&mut &bytes[..]).unwrap_err();
        assert!(matches!(err, Error::Binary { offset: 10, .. }), "{err}");
    }

    #[test]
    fn binary_accepts_newline_separators() {
        let table = EmbeddingTable::new(
            2,
            vec![("x", vec![0.25f32, -4.0]), ("y", vec![1e-30, 7.5])],
        )
        .unwrap();
        let mut buf = Vec::new();
        table.write_word2vec_binary(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 3);
        let back = EmbeddingTable::read_word2vec_binary(&mut &buf[..]).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn text_format_basics() {
        let table = EmbeddingTable::read_text(&b"a 1 0\nb 0 1\n"[..]).unwrap();
        assert_eq!(table.dim(), 2);
        assert_eq!(table.len(), 2);
        assert_eq!(table.lookup("a"), Some(&[1.0, 0.0][..]));
        assert_eq!(table.lookup("A"), None);
    }

    #[test]
    fn text_format_inconsistent_dimension() {
        let err = EmbeddingTable::read_text(&b"a 1 0 2\nb 0 1\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Text { line: 2, .. }), "{err}");
        let err = EmbeddingTable::read_text(&b"a 1 0\nb 0 x\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Text { line: 2, .. }), "{err}");
        let err = EmbeddingTable::read_text(&b""[..]).unwrap_err();
        assert!(matches!(err, Error::EmptyVocabulary));
    }

    #[test]
    fn extrema_examples() {
        let table = EmbeddingTable::new(
            3,
            vec![
                ("p", vec![1.0f32, 0.0, 0.0]),
                ("q", vec![0.0, 1.0, 0.0]),
                ("r", vec![-2.0, 3.0, 0.5]),
            ],
        )
        .unwrap();
        assert_eq!(
            table.coordinate_extrema(["p", "q"]).unwrap(),
            CoordinateExtrema { v_min: 0.0, v_max: 1.0 }
        );
        assert_eq!(
            table.coordinate_extrema(["r", "missing"]).unwrap(),
            CoordinateExtrema { v_min: -2.0, v_max: 3.0 }
        );
        assert!(matches!(
            table.coordinate_extrema(["missing"]),
            Err(Error::NoKnownTokens)
        ));
    }

    #[test]
    fn unit_normalization() {
        let table = EmbeddingTable::new(2, vec![("a", vec![3.0f32, 4.0]), ("z", vec![0.0, 0.0])])
            .unwrap();
        let unit = table.unit_normalized();
        assert_eq!(unit.lookup("a"), Some(&[0.6, 0.8][..]));
        assert_eq!(unit.lookup("z"), Some(&[0.0, 0.0][..]));
        assert_ne!(unit.fingerprint(), table.fingerprint());
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(EmbeddingTable::new(0, Vec::<(String, Vec<f32>)>::new()).is_err());
        assert!(EmbeddingTable::new(2, vec![("a", vec![1.0f32])]).is_err());
        assert!(EmbeddingTable::new(1, vec![("a", vec![1.0f32]), ("a", vec![2.0])]).is_err());
        assert!(EmbeddingTable::new(1, vec![("a", vec![f32::INFINITY])]).is_err());
    }
}
