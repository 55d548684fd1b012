use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: [u8; 8] = *b"MMREIDEM";
pub const EMBEDDING_VERSION: u32 = 1;
const TEXT_TAG: &str = "#embeddings";
const HEADER_LEN: usize = 8 + 4 + 8 + 4;

/// Visible features followed by infrared features.
pub fn concat_embeddings(visible: &[f32], infrared: &[f32]) -> Result<Vec<f32>> {
    if visible.iter().chain(infrared).any(|v| !v.is_finite()) {
        return Err(Error::invalid("embedding contains a non-finite value"));
    }
    Ok([visible, infrared].concat())
}

/// One feature row per pair, keyed by pair id, with the pair's identity.
///
/// Binary form (little-endian): the 8-byte magic, version `u32`, row count
/// `u64`, dim `u32`, then per row the pair id `u64`, identity `u64` and `dim`
/// `f32` values. Text form: a `#embeddings<TAB>dim=<n>` header, then rows
/// `pair_id<TAB>identity<TAB>v1 v2 ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    ids: Vec<u64>,
    identities: Vec<u64>,
    values: Vec<f32>,
    index: HashMap<u64, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ids: Vec::new(),
            identities: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn push(&mut self, pair_id: u64, identity: u64, row: &[f32]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::invalid(format!("row for pair {pair_id} has dim {}, expected {}", row.len(), self.dim)));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("row for pair {pair_id} has a non-finite value")));
        }
        if self.index.insert(pair_id, self.ids.len()).is_some() {
            return Err(Error::invalid(format!("duplicate pair id {pair_id}")));
        }
        self.ids.push(pair_id);
        self.identities.push(identity);
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn identity(&self, row: usize) -> u64 {
        self.identities[row]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.values[row * self.dim..(row + 1) * self.dim]
    }

    pub fn row_of(&self, pair_id: u64) -> Option<usize> {
        self.index.get(&pair_id).copied()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * (16 + 4 * self.dim));
        out.extend_from_slice(&EMBEDDING_MAGIC);
        out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for r in 0..self.len() {
            out.extend_from_slice(&self.ids[r].to_le_bytes());
            out.extend_from_slice(&self.identities[r].to_le_bytes());
            for v in self.row(r) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |offset: usize, message: String| Error::Decode {
            offset: offset as u64,
            message,
        };
        if bytes.len() < HEADER_LEN {
            return Err(err(bytes.len(), format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len())));
        }
        if bytes[..8] != EMBEDDING_MAGIC {
            return Err(err(0, "bad magic, not an embedding file".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(8);
        if version != EMBEDDING_VERSION {
            return Err(err(8, format!("unsupported version {version}")));
        }
        let rows = u64_at(12);
        let dim = u32_at(20) as usize;
        let row_len = 16 + 4 * dim;
        let expected = (rows as u128) * (row_len as u128) + HEADER_LEN as u128;
        if (bytes.len() as u128) < expected {
            let complete = (bytes.len() - HEADER_LEN) / row_len;
            return Err(err(
                HEADER_LEN + complete * row_len,
                format!("truncated: header declares {rows} rows, row {complete} is incomplete"),
            ));
        }
        if (bytes.len() as u128) > expected {
            return Err(err(expected as usize, "trailing bytes after the last row".into()));
        }
        let mut table = Self::new(dim);
        let mut row = vec![0f32; dim];
        for r in 0..rows as usize {
            let base = HEADER_LEN + r * row_len;
            for (c, v) in row.iter_mut().enumerate() {
                let o = base + 16 + 4 * c;
                *v = f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
                if !v.is_finite() {
                    return Err(err(o, format!("non-finite value in row {r}")));
                }
            }
            table
                .push(u64_at(base), u64_at(base + 8), &row)
                .map_err(|e| err(base, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{TEXT_TAG}\tdim={}\n", self.dim);
        for r in 0..self.len() {
            let values: Vec<String> = self.row(r).iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{}\t{}\t{}\n", self.ids[r], self.identities[r], values.join(" ")));
        }
        out
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.into(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let dim = match lines.next().map(|(_, l)| l.trim_end().split_once('\t')) {
            Some(Some((TEXT_TAG, d))) => d
                .strip_prefix("dim=")
                .and_then(|d| d.parse::<usize>().ok())
                .ok_or_else(|| err(1, format!("bad dim field `{d}`")))?,
            _ => return Err(err(1, format!("expected `{TEXT_TAG}<TAB>dim=<n>` header"))),
        };
        let mut table = Self::new(dim);
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.trim_end().splitn(3, '\t').collect();
            if cols.len() < 2 {
                return Err(err(i + 1, "expected pair_id, identity and values".into()));
            }
            let id = cols[0].parse::<u64>().map_err(|_| err(i + 1, format!("bad pair id `{}`", cols[0])))?;
            let identity = cols[1].parse::<u64>().map_err(|_| err(i + 1, format!("bad identity `{}`", cols[1])))?;
            let values = cols
                .get(2)
                .unwrap_or(&"")
                .split_whitespace()
                .map(|v| v.parse::<f32>().map_err(|_| err(i + 1, format!("bad value `{v}`"))))
                .collect::<Result<Vec<f32>>>()?;
            table.push(id, identity, &values).map_err(|e| err(i + 1, e.to_string()))?;
        }
        Ok(table)
    }

    /// Reads either form, recognized by the binary magic.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(&EMBEDDING_MAGIC) || !bytes.starts_with(TEXT_TAG.as_bytes()) {
            return Self::from_bytes(&bytes);
        }
        let text = String::from_utf8(bytes).map_err(|e| Error::Decode {
            offset: e.utf8_error().valid_up_to() as u64,
            message: "text embedding file is not UTF-8".into(),
        })?;
        Self::from_text(&text, &path.display().to_string())
    }

    /// Writes the text form for `.txt`/`.tsv` paths, binary otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = matches!(path.extension().and_then(|e| e.to_str()), Some("txt" | "tsv"));
        let bytes = if text { self.to_text().into_bytes() } else { self.to_bytes() };
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}
