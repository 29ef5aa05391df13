use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

use crate::error::{Error, Result};

/// Floating-point element type of the network: `f32` for training, `f64`
/// for gradient verification.
pub trait Real:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Send
    + Sync
    + Debug
    + Default
    + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Dense (rows, cols, channels) array with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor3<T> {
    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        Self {
            rows,
            cols,
            channels,
            data: vec![T::zero(); rows * cols * channels],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols * channels {
            return Err(Error::shape(
                "tensor data",
                rows * cols * channels,
                data.len(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            channels,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.channels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    fn offset(&self, row: usize, col: usize) -> usize {
        (row * self.cols + col) * self.channels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> T {
        self.data[self.offset(row, col) + channel]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: T) {
        let o = self.offset(row, col);
        self.data[o + channel] = value;
    }

    /// All channels at one spatial position.
    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[T] {
        let o = self.offset(row, col);
        &self.data[o..o + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [T] {
        let o = self.offset(row, col);
        let c = self.channels;
        &mut self.data[o..o + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Tensor3<U> {
        Tensor3 {
            rows: self.rows,
            cols: self.cols,
            channels: self.channels,
            data: self
                .data
                .iter()
                .map(|x| U::of(x.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dims() == other.dims()
    }
}
