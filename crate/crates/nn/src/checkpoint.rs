//! Parameter checkpoints: a plain-text header describing the layout and any
//! provenance metadata, followed by the raw little-endian `f64` payload.
//! Reload is bit-exact.
//!
//! ```text
//! orclab-params v1
//! meta seed 42
//! meta config_hash 9f2c...
//! tensor w0 300 6
//! tensor b0 300
//! data
//! <8 * n_params bytes>
//! ```

use crate::error::NnError;
use crate::flat::{Layout, TensorSpec};
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &str = "orclab-params v1";

pub fn save(
    path: &Path,
    layout: &Layout,
    data: &[f64],
    metas: &[(&str, String)],
) -> Result<(), NnError> {
    if layout.n_params() != data.len() {
        return Err(NnError::ShapeMismatch {
            what: "checkpoint payload",
            expected: layout.n_params().to_string(),
            got: data.len().to_string(),
        });
    }
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{MAGIC}")?;
    for (key, value) in metas {
        debug_assert!(!key.contains(char::is_whitespace), "meta keys are single tokens");
        writeln!(w, "meta {key} {value}")?;
    }
    for t in &layout.tensors {
        debug_assert!(!t.name.contains(char::is_whitespace), "tensor names are single tokens");
        let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
        writeln!(w, "tensor {} {}", t.name, dims.join(" "))?;
    }
    writeln!(w, "data")?;
    let mut bytes = Vec::with_capacity(8 * data.len());
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub type Loaded = (Layout, Vec<f64>, Vec<(String, String)>);

pub fn load(path: &Path) -> Result<Loaded, NnError> {
    let raw = fs::read(path)?;
    let malformed = |reason: &str| NnError::MalformedCheckpoint { reason: reason.to_string() };

    // The header is newline-delimited text up to and including the "data"
    // line; everything after it is the binary payload.
    let mut offset = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &raw[offset..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| malformed("header not terminated by a data line"))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| malformed("non-utf8 header line"))?
            .to_string();
        offset += nl + 1;
        if line == "data" {
            break;
        }
        lines.push(line);
    }

    let mut it = lines.into_iter();
    match it.next() {
        Some(first) if first == MAGIC => {}
        other => {
            return Err(malformed(&format!(
                "expected magic line {MAGIC:?}, found {other:?}"
            )))
        }
    }
    let mut metas = Vec::new();
    let mut tensors = Vec::new();
    for line in it {
        let mut parts = line.splitn(2, ' ');
        match parts.next() {
            Some("meta") => {
                let rest = parts.next().ok_or_else(|| malformed("empty meta line"))?;
                let (key, value) = rest
                    .split_once(' ')
                    .ok_or_else(|| malformed("meta line without a value"))?;
                metas.push((key.to_string(), value.to_string()));
            }
            Some("tensor") => {
                let rest = parts.next().ok_or_else(|| malformed("empty tensor line"))?;
                let mut toks = rest.split(' ');
                let name = toks.next().ok_or_else(|| malformed("tensor without a name"))?;
                let shape = toks
                    .map(|d| d.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| malformed("non-numeric tensor dimension"))?;
                tensors.push(TensorSpec::new(name, shape));
            }
            other => {
                return Err(malformed(&format!("unrecognized header line kind {other:?}")));
            }
        }
    }
    if tensors.is_empty() {
        return Err(malformed("no tensors declared"));
    }
    let layout = Layout { tensors };
    let n = layout.n_params();
    let payload = &raw[offset..];
    if payload.len() != 8 * n {
        return Err(malformed(&format!(
            "payload is {} bytes, layout wants {}",
            payload.len(),
            8 * n
        )));
    }
    let mut data = Vec::with_capacity(n);
    let mut chunk = [0u8; 8];
    let mut reader = payload;
    for _ in 0..n {
        reader.read_exact(&mut chunk)?;
        data.push(f64::from_le_bytes(chunk));
    }
    Ok((layout, data, metas))
}

/// Fetch a meta value by key from a loaded checkpoint.
pub fn meta<'a>(metas: &'a [(String, String)], key: &str) -> Option<&'a str> {
    metas.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}
