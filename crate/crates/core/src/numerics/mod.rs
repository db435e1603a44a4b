//! Scalar primitives shared by every other module.

mod rng;
mod special;

pub use rng::{splitmix64, RandomStream};
pub use special::{digamma, sigmoid, softplus, stable_logistic, trigamma};

pub(crate) use special::{digamma_unchecked, trigamma_unchecked};

/// Neumaier-compensated sum; the result does not depend on how the
/// caller chunked the input.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}
