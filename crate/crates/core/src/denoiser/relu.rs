use super::tensor::{Real, Tensor3};
use crate::error::{Error, Result};

pub fn relu_forward<T: Real>(x: &Tensor3<T>) -> Tensor3<T> {
    let mut y = x.clone();
    relu_in_place(y.data_mut());
    y
}

pub(crate) fn relu_in_place<T: Real>(x: &mut [T]) {
    for v in x {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
}

/// Passes `upstream` where `x > 0`; the subgradient at exactly 0 is 0.
pub fn relu_backward<T: Real>(x: &Tensor3<T>, upstream: &Tensor3<T>) -> Result<Tensor3<T>> {
    if !x.same_shape(upstream) {
        return Err(Error::shape(
            "relu backward",
            format!("{:?}", x.dims()),
            format!("{:?}", upstream.dims()),
        ));
    }
    let mut g = upstream.clone();
    mask_in_place(x.data(), g.data_mut());
    Ok(g)
}

pub(crate) fn mask_in_place<T: Real>(pre: &[T], grad: &mut [T]) {
    for (g, &p) in grad.iter_mut().zip(pre) {
        if !(p > T::zero()) {
            *g = T::zero();
        }
    }
}
