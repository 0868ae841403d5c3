//! Flat parameter storage.
//!
//! Every tensor of a model lives in one contiguous `Vec<f64>`; a tensor is an
//! `(offset, rows, cols)` window into it. Gradients and optimizer moments use
//! the same layout, which keeps Adam, finite-difference checks and the
//! checkpoint format trivial.

use ndarray::{ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorId {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorId {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    pub fn view<'a>(&self, data: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.rows, self.cols), &data[self.range()]).unwrap()
    }

    pub fn view_mut<'a>(&self, data: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        ArrayViewMut2::from_shape((self.rows, self.cols), &mut data[self.range()]).unwrap()
    }
}

/// Named entry of the tensor index table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    #[serde(flatten)]
    pub id: TensorId,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    pub data: Vec<f64>,
    pub index: Vec<TensorEntry>,
}

impl ParamStore {
    pub fn alloc(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> TensorId {
        let id = TensorId {
            offset: self.data.len(),
            rows,
            cols,
        };
        self.data.resize(self.data.len() + rows * cols, 0.0);
        self.index.push(TensorEntry {
            name: name.into(),
            id,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn view(&self, id: TensorId) -> ArrayView2<'_, f64> {
        id.view(&self.data)
    }

    pub fn view_mut(&mut self, id: TensorId) -> ArrayViewMut2<'_, f64> {
        id.view_mut(&mut self.data)
    }

    /// Name of the tensor containing flat coordinate `i`.
    pub fn name_of(&self, i: usize) -> Option<&str> {
        self.index
            .iter()
            .find(|e| e.id.range().contains(&i))
            .map(|e| e.name.as_str())
    }
}
