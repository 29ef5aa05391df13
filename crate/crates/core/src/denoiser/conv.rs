//! Same-size 2-D cross-correlation over the (chip, re/im) grid.
//!
//! Rows are zero padded by `(kr-1)/2` on top and the remainder below, so a
//! 5-row kernel sees two chips on either side. Columns are padded either
//! with zeros on the right (`(kc-1)/2` on the left) or by wrapping around
//! the width-2 real/imaginary axis.

use rand::Rng;

use super::tensor::{Real, Tensor3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnPadding {
    Zero,
    Wrap,
}

/// Kernels are stored (row, col, in-channel, out-channel) with the
/// out-channel innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams<T> {
    pub kernel_rows: usize,
    pub kernel_cols: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernels: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Real> ConvLayerParams<T> {
    pub fn zeros(kernel_rows: usize, kernel_cols: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            kernel_rows,
            kernel_cols,
            in_channels,
            out_channels,
            kernels: vec![T::zero(); kernel_rows * kernel_cols * in_channels * out_channels],
            biases: vec![T::zero(); out_channels],
        }
    }

    /// Zero-mean Gaussian kernels with std √(2/fan_in), zero biases.
    /// Kernels and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn fan_in_uniform<R: Rng + ?Sized>(
        kernel_rows: usize,
        kernel_cols: usize,
        in_channels: usize,
        out_channels: usize,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(kernel_rows, kernel_cols, in_channels, out_channels);
        let bound = 1.0 / ((kernel_rows * kernel_cols * in_channels) as f64).sqrt();
        for v in p.kernels.iter_mut().chain(p.biases.iter_mut()) {
            *v = T::of(rng.random_range(-bound..bound));
        }
        p
    }

    #[inline]
    pub fn kernel_index(&self, row: usize, col: usize, cin: usize, cout: usize) -> usize {
        ((row * self.kernel_cols + col) * self.in_channels + cin) * self.out_channels + cout
    }

    pub fn cast<U: Real>(&self) -> ConvLayerParams<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::of(x.to_f64().unwrap())).collect();
        ConvLayerParams {
            kernel_rows: self.kernel_rows,
            kernel_cols: self.kernel_cols,
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            kernels: conv(&self.kernels),
            biases: conv(&self.biases),
        }
    }

    fn check(&self) -> Result<()> {
        let n = self.kernel_rows * self.kernel_cols * self.in_channels * self.out_channels;
        if self.kernels.len() != n || self.biases.len() != self.out_channels {
            return Err(Error::shape(
                "conv parameters",
                format!("{n} kernels, {} biases", self.out_channels),
                format!("{} kernels, {} biases", self.kernels.len(), self.biases.len()),
            ));
        }
        Ok(())
    }

    fn check_input(&self, input: &Tensor3<T>) -> Result<()> {
        self.check()?;
        if input.channels() != self.in_channels {
            return Err(Error::shape("conv input channels", self.in_channels, input.channels()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Tensor3<T>,
    pub kernels: Vec<T>,
    pub biases: Vec<T>,
}

/// Geometry shared by forward and backward: maps an output position and a
/// kernel tap to the input position it reads, if any.
struct Taps {
    rows: usize,
    cols: usize,
    pad_top: usize,
    pad_left: usize,
    padding: ColumnPadding,
}

impl Taps {
    fn new<T>(input: &Tensor3<T>, params: &ConvLayerParams<T>, padding: ColumnPadding) -> Self
    where
        T: Real,
    {
        Self {
            rows: input.rows(),
            cols: input.cols(),
            pad_top: (params.kernel_rows - 1) / 2,
            pad_left: (params.kernel_cols - 1) / 2,
            padding,
        }
    }

    #[inline]
    fn row(&self, out_row: usize, tap: usize) -> Option<usize> {
        let r = (out_row + tap).checked_sub(self.pad_top)?;
        (r < self.rows).then_some(r)
    }

    #[inline]
    fn col(&self, out_col: usize, tap: usize) -> Option<usize> {
        match self.padding {
            ColumnPadding::Zero => {
                let c = (out_col + tap).checked_sub(self.pad_left)?;
                (c < self.cols).then_some(c)
            }
            ColumnPadding::Wrap => {
                Some((out_col + tap + self.cols * self.pad_left - self.pad_left) % self.cols)
            }
        }
    }
}

#[inline]
fn axpy<T: Real>(acc: &mut [T], a: T, x: &[T]) {
    for (y, &v) in acc.iter_mut().zip(x) {
        *y += a * v;
    }
}

pub fn conv2d_forward<T: Real>(
    input: &Tensor3<T>,
    params: &ConvLayerParams<T>,
    padding: ColumnPadding,
) -> Result<Tensor3<T>> {
    params.check_input(input)?;
    let taps = Taps::new(input, params, padding);
    let (rows, cols, _) = input.dims();
    let cin = params.in_channels;
    let cout = params.out_channels;
    let mut out = Tensor3::zeros(rows, cols, cout);
    for r in 0..rows {
        for c in 0..cols {
            let acc = out.pixel_mut(r, c);
            acc.copy_from_slice(&params.biases);
            for kr in 0..params.kernel_rows {
                let Some(ir) = taps.row(r, kr) else { continue };
                for kc in 0..params.kernel_cols {
                    let Some(ic) = taps.col(c, kc) else { continue };
                    let base = params.kernel_index(kr, kc, 0, 0);
                    let w = &params.kernels[base..base + cin * cout];
                    for (x, wrow) in input.pixel(ir, ic).iter().zip(w.chunks_exact(cout)) {
                        if *x != T::zero() {
                            axpy(acc, *x, wrow);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Accumulates kernel and bias gradients into the given buffers and, when
/// `input_grad` is present, writes the gradient with respect to the input.
pub(crate) fn conv2d_backward_into<T: Real>(
    input: &Tensor3<T>,
    params: &ConvLayerParams<T>,
    upstream: &Tensor3<T>,
    padding: ColumnPadding,
    kernel_grad: &mut [T],
    bias_grad: &mut [T],
    input_grad: Option<&mut Tensor3<T>>,
) -> Result<()> {
    params.check_input(input)?;
    let (rows, cols, _) = input.dims();
    if upstream.dims() != (rows, cols, params.out_channels) {
        return Err(Error::shape(
            "conv upstream gradient",
            format!("{:?}", (rows, cols, params.out_channels)),
            format!("{:?}", upstream.dims()),
        ));
    }
    let taps = Taps::new(input, params, padding);
    let cin = params.in_channels;
    let cout = params.out_channels;

    for r in 0..rows {
        for c in 0..cols {
            let up = upstream.pixel(r, c);
            axpy(bias_grad, T::one(), up);
            for kr in 0..params.kernel_rows {
                let Some(ir) = taps.row(r, kr) else { continue };
                for kc in 0..params.kernel_cols {
                    let Some(ic) = taps.col(c, kc) else { continue };
                    let base = params.kernel_index(kr, kc, 0, 0);
                    let kg = &mut kernel_grad[base..base + cin * cout];
                    for (x, grow) in input.pixel(ir, ic).iter().zip(kg.chunks_exact_mut(cout)) {
                        if *x != T::zero() {
                            axpy(grow, *x, up);
                        }
                    }
                }
            }
        }
    }

    if let Some(ig) = input_grad {
        if ig.dims() != input.dims() {
            return Err(Error::shape(
                "conv input gradient",
                format!("{:?}", input.dims()),
                format!("{:?}", ig.dims()),
            ));
        }
        ig.data_mut().iter_mut().for_each(|v| *v = T::zero());
        // Kernels transposed to (row, col, out, in) so the input gradient is
        // an axpy over input channels.
        let mut wt = vec![T::zero(); params.kernels.len()];
        for kr in 0..params.kernel_rows {
            for kc in 0..params.kernel_cols {
                for i in 0..cin {
                    for o in 0..cout {
                        let t = ((kr * params.kernel_cols + kc) * cout + o) * cin + i;
                        wt[t] = params.kernels[params.kernel_index(kr, kc, i, o)];
                    }
                }
            }
        }
        for r in 0..rows {
            for c in 0..cols {
                let up = upstream.pixel(r, c);
                for kr in 0..params.kernel_rows {
                    let Some(ir) = taps.row(r, kr) else { continue };
                    for kc in 0..params.kernel_cols {
                        let Some(ic) = taps.col(c, kc) else { continue };
                        let base = (kr * params.kernel_cols + kc) * cout * cin;
                        let w = &wt[base..base + cout * cin];
                        let acc = ig.pixel_mut(ir, ic);
                        for (u, wrow) in up.iter().zip(w.chunks_exact(cin)) {
                            if *u != T::zero() {
                                axpy(acc, *u, wrow);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn conv2d_backward<T: Real>(
    input: &Tensor3<T>,
    params: &ConvLayerParams<T>,
    upstream: &Tensor3<T>,
    padding: ColumnPadding,
) -> Result<ConvGrads<T>> {
    let mut kernels = vec![T::zero(); params.kernels.len()];
    let mut biases = vec![T::zero(); params.out_channels];
    let (rows, cols, ch) = input.dims();
    let mut ig = Tensor3::zeros(rows, cols, ch);
    conv2d_backward_into(
        input,
        params,
        upstream,
        padding,
        &mut kernels,
        &mut biases,
        Some(&mut ig),
    )?;
    Ok(ConvGrads {
        input: ig,
        kernels,
        biases,
    })
}
