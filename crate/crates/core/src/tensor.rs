//! Dense rank-4 tensor in batch-channel-height-width layout.
//!
//! This is the universal value type: contiguous row-major `(N, C, H, W)`
//! storage, immutable after construction. Channel split/concat and global
//! average pooling live here; everything heavier sits in the conv modules.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `(N, C, H, W)` dimensions.
///
/// `C == 0` (and, for weight tensors, `N == 0`) are legal degenerate values
/// so that channel groups produced by splits can be empty (a branch ratio can
/// floor to zero channels); spatial dimensions must be at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w }
    }

    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c + c) * self.h + h) * self.w + w
    }

    fn validate(&self) -> Result<()> {
        if self.h == 0 || self.w == 0 {
            return Err(Error::shape(format!(
                "spatial dimensions must be >= 1: got ({}, {}, {}, {})",
                self.n, self.c, self.h, self.w
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

/// Dense rank-4 tensor. Two tensors compare equal iff shape and every
/// element's bit pattern agree.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Scalar = f32> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.len() {
            return Err(Error::shape(format!(
                "data length {} != {} elements implied by shape {shape}",
                data.len(),
                shape.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, T::ZERO)
    }

    pub fn full(shape: Shape, value: T) -> Self {
        shape.validate().expect("invalid shape");
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.shape.index(n, c, h, w)]
    }

    /// Convert between element types (f32 <-> f64), rounding to nearest.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    /// Split along the channel axis into groups of the given channel counts.
    ///
    /// The counts must sum to `C`; zero counts yield empty-channel tensors
    /// that concatenate back losslessly.
    pub fn split_channels(&self, indexes: &[usize]) -> Result<Vec<Tensor<T>>> {
        let total: usize = indexes.iter().sum();
        if total != self.shape.c {
            return Err(Error::shape(format!(
                "split indexes sum to {total}, tensor has {} channels",
                self.shape.c
            )));
        }
        let Shape { n, h, w, .. } = self.shape;
        let mut parts = Vec::with_capacity(indexes.len());
        let mut start = 0usize;
        for &count in indexes {
            let shape = Shape::new(n, count, h, w);
            let mut data = Vec::with_capacity(shape.len());
            for ni in 0..n {
                for c in start..start + count {
                    let base = self.shape.index(ni, c, 0, 0);
                    data.extend_from_slice(&self.data[base..base + h * w]);
                }
            }
            parts.push(Tensor { shape, data });
            start += count;
        }
        Ok(parts)
    }

    /// Concatenate along the channel axis; parts must agree on N, H, W.
    pub fn concat_channels(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat_channels needs at least one part"))?;
        let Shape { n, h, w, .. } = first.shape;
        let mut c_total = 0usize;
        for p in parts {
            if p.shape.n != n || p.shape.h != h || p.shape.w != w {
                return Err(Error::shape(format!(
                    "concat part shape {} disagrees with {} on N/H/W",
                    p.shape, first.shape
                )));
            }
            c_total += p.shape.c;
        }
        let shape = Shape::new(n, c_total, h, w);
        let mut data = Vec::with_capacity(shape.len());
        for ni in 0..n {
            for p in parts {
                let base = p.shape.index(ni, 0, 0, 0);
                data.extend_from_slice(&p.data[base..base + p.shape.c * h * w]);
            }
        }
        Ok(Tensor { shape, data })
    }

    /// Global average pool to `(N, C, 1, 1)`.
    ///
    /// Each mean accumulates positions left-to-right, top-to-bottom, then
    /// divides once, so the result does not depend on worker count.
    pub fn global_avg_pool(&self) -> Tensor<T> {
        let Shape { n, c, h, w } = self.shape;
        let area = T::from_f64((h * w) as f64);
        let mut data = Vec::with_capacity(n * c);
        for ni in 0..n {
            for ci in 0..c {
                let base = self.shape.index(ni, ci, 0, 0);
                let mut acc = T::ZERO;
                for &v in &self.data[base..base + h * w] {
                    acc += v;
                }
                data.push(acc / area);
            }
        }
        Tensor {
            shape: Shape::new(n, c, 1, 1),
            data,
        }
    }
}
