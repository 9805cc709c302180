//! Flat parameter vectors with a named-tensor layout.
//!
//! Every network stores its parameters contiguously; the layout maps tensor
//! names to slices of that vector. Checkpoints, the optimizer, and the
//! gradient checker all operate on the flat form.

use crate::error::NnError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    pub fn new(name: impl Into<String>, shape: Vec<usize>) -> Self {
        TensorSpec { name: name.into(), shape }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub tensors: Vec<TensorSpec>,
}

impl Layout {
    pub fn n_params(&self) -> usize {
        self.tensors.iter().map(TensorSpec::len).sum()
    }

    /// Byte-free description used in mismatch errors: `name(shape) ...`.
    pub fn describe(&self) -> String {
        self.tensors
            .iter()
            .map(|t| {
                let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
                format!("{}({})", t.name, dims.join("x"))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Start offset and length of a named tensor.
    pub fn span(&self, name: &str) -> Option<(usize, usize)> {
        let mut off = 0;
        for t in &self.tensors {
            if t.name == name {
                return Some((off, t.len()));
            }
            off += t.len();
        }
        None
    }

    pub fn expect_eq(&self, other: &Layout) -> Result<(), NnError> {
        if self == other {
            Ok(())
        } else {
            Err(NnError::LayoutMismatch {
                expected: self.describe(),
                got: other.describe(),
            })
        }
    }
}

/// A parameter vector bound to its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatParams {
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl FlatParams {
    pub fn new(layout: Layout, data: Vec<f64>) -> Result<Self, NnError> {
        if layout.n_params() != data.len() {
            return Err(NnError::ShapeMismatch {
                what: "flat parameter vector",
                expected: layout.n_params().to_string(),
                got: data.len().to_string(),
            });
        }
        Ok(FlatParams { layout, data })
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let (off, len) = self.layout.span(name)?;
        Some(&self.data[off..off + len])
    }
}
