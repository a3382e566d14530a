//! Numerically stable logistic helpers.

/// Logistic sigmoid.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

/// Negative log-likelihood of a Bernoulli label under logit `z`.
#[inline]
pub fn log_loss(z: f64, clicked: bool) -> f64 {
    if clicked {
        softplus(-z)
    } else {
        softplus(z)
    }
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
