#[allow(unused_imports)]
use num_traits::Float;

/// Entropic mirror-descent multiplier: `λ = min(λ_max, λ_0 · exp(-η g))`.
///
/// `g` is the slack accumulated since the start of the run, so this is the
/// telescoped form of the per-step multiplicative update. Overflow saturates at `λ_max`.
pub fn update_multiplier(lambda0: f64, eta: f64, slack: f64, lambda_max: f64) -> f64 {
    if lambda0 == 0.0 {
        return 0.0;
    }
    let raw = lambda0 * (-eta * slack).exp();
    if raw.is_nan() {
        return lambda_max;
    }
    raw.min(lambda_max)
}

/// One multiplicative step `λ_t = λ_{t+1} · exp(-η δ_t)`, without clamping.
pub fn multiplicative_step(lambda_next: f64, eta: f64, delta: f64) -> f64 {
    lambda_next * (-eta * delta).exp()
}
