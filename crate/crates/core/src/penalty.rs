//! Drift penalty `P(Y) = lambda * |mean_k p_k - p_id|^2` on the mean
//! parameter vector of the registered frames.

use crate::transform::{Affine, AffineStack};

fn mean_offset(y: &AffineStack) -> Vec<f64> {
    let id = Affine::identity(y.dim()).expect("stack dimension is valid").params();
    let mut mean = vec![0.0; id.len()];
    for (_, t) in y.iter() {
        for (m, p) in mean.iter_mut().zip(t.params()) {
            *m += p;
        }
    }
    let n = y.len() as f64;
    mean.iter_mut().zip(&id).for_each(|(m, i)| *m = *m / n - i);
    mean
}

pub fn penalty_value(y: &AffineStack, lambda: f64) -> f64 {
    assert!(!y.is_empty(), "penalty over an empty stack");
    lambda * mean_offset(y).iter().map(|v| v * v).sum::<f64>()
}

/// Per-frame gradient, identical for every frame of the stack.
pub fn penalty_gradient(y: &AffineStack, lambda: f64) -> Vec<Vec<f64>> {
    assert!(!y.is_empty(), "penalty over an empty stack");
    let scale = 2.0 * lambda / y.len() as f64;
    let g: Vec<f64> = mean_offset(y).iter().map(|v| scale * v).collect();
    vec![g; y.len()]
}

/// The affine map whose parameters are the mean parameters of the stack.
pub fn mean_transform(y: &AffineStack) -> Affine {
    assert!(!y.is_empty(), "mean of an empty stack");
    let id = Affine::identity(y.dim()).expect("stack dimension is valid").params();
    let mean: Vec<f64> = mean_offset(y).iter().zip(&id).map(|(m, i)| m + i).collect();
    Affine::from_params(y.dim(), &mean).expect("parameter count matches")
}

/// Right-composes every transform with a common map so that the mean
/// transform of the result equals `target`. Returns the stack unchanged
/// when its mean transform is singular.
pub fn recenter_to(y: &AffineStack, target: &Affine) -> AffineStack {
    if y.is_empty() {
        return y.clone();
    }
    let Some(inv) = mean_transform(y).inverse() else {
        return y.clone();
    };
    let c = inv.compose(target);
    let mut out = AffineStack::new(y.dim(), y.frame_count()).expect("valid shape");
    for (k, t) in y.iter() {
        out.insert(k, t.compose(&c)).expect("index in range");
    }
    out
}

/// Moves the gauge so the mean transform is the identity and `P` vanishes.
/// Relative transforms `y_i ∘ y_j^-1` are unchanged.
pub fn recenter(y: &AffineStack) -> AffineStack {
    recenter_to(y, &Affine::identity(y.dim()).expect("stack dimension is valid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn recenter_moves_the_mean() {
        let mut y = AffineStack::new(2, 3).unwrap();
        y.insert(1, Affine::new(2, vec![1.1, 0.2, -0.1, 0.9], vec![0.5, 1.0]).unwrap()).unwrap();
        y.insert(3, Affine::new(2, vec![1.0, 0.0, 0.3, 1.2], vec![-2.0, 0.25]).unwrap()).unwrap();
        let r = recenter(&y);
        assert_eq!(r.indices(), vec![1, 3]);
        assert!(penalty_value(&r, 1.0) < 1e-24);
        let target = Affine::new(2, vec![0.9, 0.1, 0.0, 1.1], vec![0.3, -0.2]).unwrap();
        for (a, b) in mean_transform(&recenter_to(&y, &target)).params().iter().zip(target.params()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        // relative transforms are unchanged
        let rel = |s: &AffineStack| s.get(1).unwrap().compose(&s.get(3).unwrap().inverse().unwrap()).params();
        for (a, b) in rel(&y).iter().zip(rel(&r)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn examples() {
        let id = AffineStack::identity_all(2, 4).unwrap();
        assert_eq!(penalty_value(&id, 3.0), 0.0);
        assert!(penalty_gradient(&id, 3.0).iter().flatten().all(|&v| v == 0.0));

        let mut shifted = AffineStack::new(2, 4).unwrap();
        for k in 1..=4 {
            shifted.insert(k, Affine::translation(&[3.0, 4.0]).unwrap()).unwrap();
        }
        assert_abs_diff_eq!(penalty_value(&shifted, 1.0), 25.0, epsilon = 1e-12);

        let mut balanced = id.clone();
        balanced.insert(1, Affine::rigid_2d(0.2, [1.0, -2.0])).unwrap();
        balanced.insert(3, Affine::rigid_2d(-0.2, [-1.0, 2.0])).unwrap();
        // rotations by +-0.2 leave a cos(0.2) - 1 offset in the diagonal
        let c = 0.2f64.cos() - 1.0;
        assert_abs_diff_eq!(penalty_value(&balanced, 1.0), 2.0 * (c / 2.0).powi(2), epsilon = 1e-15);
    }

    fn stack_from(params: &[f64], n: usize) -> AffineStack {
        let frames: Vec<usize> = (1..=n).collect();
        AffineStack::from_params(2, n, &frames, params).unwrap()
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            params in prop::collection::vec(-2.0f64..2.0, 24),
            lambda in 0.1f64..10.0,
        ) {
            let y = stack_from(&params, 4);
            let g: Vec<f64> = penalty_gradient(&y, lambda).concat();
            let h = 1e-5;
            let mut err = 0.0f64;
            let mut norm = 0.0f64;
            for i in 0..params.len() {
                let mut p = params.clone();
                p[i] += h;
                let fp = penalty_value(&stack_from(&p, 4), lambda);
                p[i] -= 2.0 * h;
                let fm = penalty_value(&stack_from(&p, 4), lambda);
                let fd = (fp - fm) / (2.0 * h);
                err += (fd - g[i]).powi(2);
                norm += fd * fd;
            }
            prop_assert!(err.sqrt() <= 1e-8 * norm.sqrt().max(1.0));
        }

        #[test]
        fn invariant_under_permutation_and_balanced_moves(
            params in prop::collection::vec(-2.0f64..2.0, 18),
            delta in prop::collection::vec(-1.0f64..1.0, 6),
        ) {
            let y = stack_from(&params, 3);
            let p0 = penalty_value(&y, 1.5);
            prop_assert!(p0 >= 0.0);

            let mut rotated = params[6..].to_vec();
            rotated.extend_from_slice(&params[..6]);
            prop_assert!((penalty_value(&stack_from(&rotated, 3), 1.5) - p0).abs() <= 1e-12 * (1.0 + p0));

            let mut moved = params.clone();
            for i in 0..6 {
                moved[i] += delta[i];
                moved[12 + i] -= delta[i];
            }
            prop_assert!((penalty_value(&stack_from(&moved, 3), 1.5) - p0).abs() <= 1e-12 * (1.0 + p0));
        }
    }
}
