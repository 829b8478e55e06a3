pub fn sigmoid(margin: f64) -> f64 {
    if margin >= 0.0 {
        1.0 / (1.0 + (-margin).exp())
    } else {
        let e = margin.exp();
        e / (1.0 + e)
    }
}

/// First and second derivative of the logistic negative log-likelihood
/// with respect to the margin.
pub fn logistic_grad_hess(margin: f64, label: bool) -> (f64, f64) {
    let p = sigmoid(margin);
    let y = if label { 1.0 } else { 0.0 };
    // Keep the hessian strictly positive once p saturates.
    let h = (p * (1.0 - p)).max(1e-16);
    (p - y, h)
}

/// `-[y log p + (1 - y) log(1 - p)]` evaluated stably from the margin.
pub fn logistic_nll(margin: f64, label: bool) -> f64 {
    // log(1 + exp(-m)) for y = 1, log(1 + exp(m)) for y = 0
    let z = if label { -margin } else { margin };
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
