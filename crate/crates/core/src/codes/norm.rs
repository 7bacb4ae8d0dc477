use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

/// Scales a block to unit average power: `out = x / sqrt(mean(x^2))`,
/// the mean taken over every entry. Errors on all-zero or non-finite input.
pub fn normalize_power<S: Scalar>(x: &Tensor<S>) -> Result<Tensor<S>> {
    if !x.is_finite() {
        return Err(Error::Degenerate("normalization input must be finite".into()));
    }
    let ms = x.mean_square();
    if ms <= S::zero() {
        return Err(Error::Degenerate(
            "cannot normalize a block with zero average power".into(),
        ));
    }
    let g = S::one() / ms.sqrt();
    let mut out = x.clone();
    out.scale(g);
    Ok(out)
}

/// Adjoint of [`normalize_power`]: given the raw input and the gradient of
/// some loss in the normalized output, returns the gradient in the input.
///
/// With `s = sqrt(mean(x^2))` and `y = x / s`, the chain rule gives
/// `dx = (dy - y * mean(y .* dy)) / s`.
pub fn normalize_power_backward<S: Scalar>(x: &Tensor<S>, upstream: &Tensor<S>) -> Result<Tensor<S>> {
    if x.positions() != upstream.positions() || x.depth() != upstream.depth() {
        return Err(Error::invalid("upstream gradient shape must match the input"));
    }
    let ms = x.mean_square();
    if ms <= S::zero() {
        return Err(Error::Degenerate(
            "cannot normalize a block with zero average power".into(),
        ));
    }
    let s = ms.sqrt();
    let m = S::of(x.data().len() as f64);
    let y: Vec<S> = x.data().iter().map(|&v| v / s).collect();
    let dot: S = y
        .iter()
        .zip(upstream.data())
        .map(|(&yi, &gi)| yi * gi)
        .sum::<S>()
        / m;
    let data: Vec<S> = y
        .iter()
        .zip(upstream.data())
        .map(|(&yi, &gi)| (gi - yi * dot) / s)
        .collect();
    Tensor::from_vec(data, x.positions(), x.depth())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_entry_example() {
        // [3, 4] has mean square 12.5.
        let x = Tensor::from_vec(vec![3.0, 4.0], 2, 1).unwrap();
        let y = normalize_power(&x).unwrap();
        let s = 12.5f64.sqrt();
        assert_relative_eq!(y.at(0, 0), 3.0 / s, max_relative = 1e-15);
        assert_relative_eq!(y.at(1, 0), 4.0 / s, max_relative = 1e-15);
        assert_relative_eq!(y.mean_square(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn already_unit_power_is_untouched() {
        let x = Tensor::from_vec(vec![1.0, -1.0, 1.0, -1.0], 4, 1).unwrap();
        let y = normalize_power(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn zero_block_is_degenerate() {
        let x = Tensor::<f64>::zeros(4, 1);
        assert!(matches!(normalize_power(&x), Err(crate::Error::Degenerate(_))));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let x = Tensor::from_vec(vec![0.7, -1.3, 2.1, 0.4, -0.9, 1.6], 3, 2).unwrap();
        let up = Tensor::from_vec(vec![0.3, -0.8, 1.1, 0.2, 0.5, -0.4], 3, 2).unwrap();
        let grad = normalize_power_backward(&x, &up).unwrap();

        let loss = |t: &Tensor<f64>| -> f64 {
            let y = normalize_power(t).unwrap();
            y.data()
                .iter()
                .zip(up.data())
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        let h = 1e-6;
        for i in 0..x.data().len() {
            let mut plus = x.clone();
            plus.data_mut()[i] += h;
            let mut minus = x.clone();
            minus.data_mut()[i] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert_relative_eq!(grad.data()[i], fd, max_relative = 1e-6, epsilon = 1e-9);
        }
    }
}
