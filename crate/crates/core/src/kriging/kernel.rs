const SQRT5: f64 = 2.236_067_977_499_79;

/// Matérn-5/2 correlation as a function of the scaled distance `d`.
#[inline]
pub fn matern52_distance(d: f64) -> f64 {
    let s = SQRT5 * d;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// Anisotropic Matérn-5/2 correlation with per-dimension length-scales.
///
/// `d = sqrt(sum(((x_i - y_i) / theta_i)^2))`, `R = (1 + √5 d + 5d²/3) exp(-√5 d)`.
pub fn matern52(x: &[f64], y: &[f64], theta: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    debug_assert_eq!(x.len(), theta.len());
    let d2: f64 = x
        .iter()
        .zip(y)
        .zip(theta)
        .map(|((a, b), t)| {
            let s = (a - b) / t;
            s * s
        })
        .sum();
    matern52_distance(d2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn unit_at_zero_distance() {
        assert_eq!(matern52(&[0.3, -1.0], &[0.3, -1.0], &[0.5, 2.0]), 1.0);
    }

    #[test]
    fn one_length_scale_apart() {
        let s5 = 5f64.sqrt();
        let expected = (1.0 + s5 + 5.0 / 3.0) * (-s5).exp();
        assert_relative_eq!(
            matern52(&[0.0], &[0.7], &[0.7]),
            expected,
            max_relative = 1e-14
        );
        assert_relative_eq!(expected, 0.5240, epsilon = 1e-4);
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            x in proptest::collection::vec(-5.0f64..5.0, 3),
            y in proptest::collection::vec(-5.0f64..5.0, 3),
            t in proptest::collection::vec(0.01f64..10.0, 3),
        ) {
            let a = matern52(&x, &y, &t);
            prop_assert_eq!(a, matern52(&y, &x, &t));
            prop_assert!(a > 0.0 || a == 0.0 && x != y);
            prop_assert!(a <= 1.0);
        }
    }
}
