//! Small dense helpers shared by the numeric modules.

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators let the compiler keep independent FMA chains.
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let rem_a = chunks_a.remainder();
    let rem_b = chunks_b.remainder();
    for (x, y) in chunks_a.zip(chunks_b) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in rem_a.iter().zip(rem_b) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(sq_dist(a, b))
}

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Numerically stable `ln(mean(exp(values)))`.
pub(crate) fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values
        .iter()
        .filter(|v| v.is_finite())
        .map(|v| libm::exp(v - max))
        .sum();
    max + libm::log(sum / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_for_odd_lengths() {
        let a: alloc::vec::Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: alloc::vec::Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn log_mean_exp_handles_large_magnitudes() {
        let v = [-1000.0, -1000.0];
        assert!((log_mean_exp(&v) + 1000.0).abs() < 1e-12);
        let w = [f64::NEG_INFINITY, 0.0];
        assert!((log_mean_exp(&w) - libm::log(0.5)).abs() < 1e-12);
    }

    #[test]
    fn ln_2pi_constant() {
        assert!((LN_2PI - libm::log(2.0 * core::f64::consts::PI)).abs() < 1e-15);
    }
}
