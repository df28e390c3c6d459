//! Weight initialization.
//!
//! The recurrent matrix defaults to the identity-feedback scheme: scaled so
//! that the linearized one-step hidden transition at the origin is exactly
//! `gain * I`. With gain 1 the state neither decays nor explodes at the
//! operating point, which both preserves memorized information and carries
//! error gradients across time undiminished.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::activation::ActivationSpec;
use crate::error::{Error, Result};
use crate::linalg::Mat;

use super::NetworkWeights;

/// How to fill the recurrent matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecurrentInit {
    /// Linearized transition at the origin equals `gain * I`.
    IdentityFeedback { gain: f64 },
    /// All zeros: no memory at the start of training.
    Zero,
    /// Uniform in [-range, +range], like the feedforward weights.
    Uniform { range: f64 },
}

/// Recurrent matrix whose linearization at the zero state is `gain * I`.
///
/// The activation's slope at 0 multiplies the matrix in the Jacobian, so the
/// diagonal compensates with its reciprocal: slope 1/4 gives diagonal 4*gain.
pub fn init_identity_feedback(
    hidden_size: usize,
    gain: f64,
    activation: ActivationSpec,
) -> Mat {
    debug_assert!(hidden_size >= 1);
    debug_assert!(gain > 0.0 && gain.is_finite());
    Mat::scaled_identity(hidden_size, gain / activation.slope_at_zero())
}

/// Freshly initialized network: layer weights uniform in [-range, +range]
/// drawn row-major layer by layer from `rng`, biases zero, recurrent matrix
/// per `recurrent_init`. The draw order is fixed, so equal seeds give
/// bit-identical networks.
pub fn init_random(
    layer_sizes: &[usize],
    recurrent: Option<RecurrentInit>,
    activation: ActivationSpec,
    range: f64,
    rng: &mut ChaCha8Rng,
) -> Result<NetworkWeights> {
    if !(range.is_finite() && range >= 0.0) {
        return Err(Error::Config(format!(
            "init range must be non-negative and finite, got {range}"
        )));
    }
    let mut net = NetworkWeights::zeros(layer_sizes, recurrent.is_some(), activation)?;
    for l in 0..net.num_layers() {
        for v in net.weight_mut(l).data_mut() {
            *v = uniform_symmetric(rng, range);
        }
    }
    match recurrent {
        None => {}
        Some(RecurrentInit::IdentityFeedback { gain }) => {
            if !(gain.is_finite() && gain > 0.0) {
                return Err(Error::Config(format!(
                    "identity feedback gain must be positive, got {gain}"
                )));
            }
            *net.recurrent_mut().unwrap() =
                init_identity_feedback(net.hidden_size(), gain, activation);
        }
        Some(RecurrentInit::Zero) => {}
        Some(RecurrentInit::Uniform { range }) => {
            for v in net.recurrent_mut().unwrap().data_mut() {
                *v = uniform_symmetric(rng, range);
            }
        }
    }
    Ok(net)
}

fn uniform_symmetric(rng: &mut ChaCha8Rng, range: f64) -> f64 {
    // Always consume one draw so the stream position does not depend on the
    // range value.
    let u: f64 = rng.random();
    (2.0 * u - 1.0) * range
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::RnnState;
    use rand::SeedableRng;

    #[test]
    fn identity_feedback_with_linear_activation_is_exact_identity() {
        let m = init_identity_feedback(3, 1.0, ActivationSpec::linear());
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(m[(r, c)], if r == c { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn identity_feedback_compensates_sigmoid_slope() {
        // slope at 0 is 1/4, so the diagonal must be 4.
        let m = init_identity_feedback(2, 1.0, ActivationSpec::symmetric_sigmoid());
        assert_eq!(m[(0, 0)], 4.0);
        assert_eq!(m[(1, 1)], 4.0);
        assert_eq!(m[(0, 1)], 0.0);
    }

    #[test]
    fn diagonal_matrix_spectrum_is_the_gain() {
        // The linearized transition slope0 * M is diagonal, so its
        // eigenvalues are exactly its diagonal entries.
        let act = ActivationSpec::symmetric_sigmoid();
        let m = init_identity_feedback(4, 1.0, act);
        let s = act.slope_at_zero();
        for i in 0..4 {
            assert!((s * m[(i, i)] - 1.0).abs() < 1e-15);
        }
    }

    /// Numerically linearize rnn_step at the zero state and recover the
    /// identity within 1e-8.
    #[test]
    fn numerical_jacobian_at_origin_is_identity() {
        let act = ActivationSpec::symmetric_sigmoid();
        let hidden = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = init_random(
            &[3, hidden, 2],
            Some(RecurrentInit::IdentityFeedback { gain: 1.0 }),
            act,
            0.4,
            &mut rng,
        )
        .unwrap();
        // Zero the bias explicitly (init_random already leaves it zero).
        for v in net.bias_mut(0).iter_mut() {
            *v = 0.0;
        }
        let input = vec![0.0; 3];
        let eps = 1e-6;
        for j in 0..hidden {
            let mut plus = vec![0.0; hidden];
            plus[j] = eps;
            let mut minus = vec![0.0; hidden];
            minus[j] = -eps;
            let (hp, _) = net.rnn_step(&RnnState::new(plus), &input).unwrap();
            let (hm, _) = net.rnn_step(&RnnState::new(minus), &input).unwrap();
            for i in 0..hidden {
                let d = (hp.hidden()[i] - hm.hidden()[i]) / (2.0 * eps);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (d - want).abs() < 1e-8,
                    "jacobian[{i}][{j}] = {d}, want {want}"
                );
            }
        }
    }

    #[test]
    fn same_seed_gives_bit_identical_weights() {
        let make = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            init_random(
                &[4, 6, 3],
                Some(RecurrentInit::Uniform { range: 0.2 }),
                ActivationSpec::symmetric_sigmoid(),
                0.5,
                &mut rng,
            )
            .unwrap()
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn zero_range_gives_all_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = init_random(
            &[3, 4, 2],
            None,
            ActivationSpec::symmetric_sigmoid(),
            0.0,
            &mut rng,
        )
        .unwrap();
        for l in 0..net.num_layers() {
            assert!(net.weight(l).data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn sample_mean_is_consistent_with_uniform_moments() {
        // 10^4 draws from U[-r, r]: mean 0, std r/sqrt(3); the sample mean
        // must land within 3 standard errors of 0.
        let range = 0.8;
        let n = 10_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let net = init_random(
            &[100, 100],
            None,
            ActivationSpec::symmetric_sigmoid(),
            range,
            &mut rng,
        )
        .unwrap();
        let data = net.weight(0).data();
        assert_eq!(data.len(), n);
        let mean: f64 = data.iter().sum::<f64>() / n as f64;
        let se = range / 3f64.sqrt() / (n as f64).sqrt();
        assert!(
            mean.abs() < 3.0 * se,
            "sample mean {mean} exceeds 3 standard errors ({se})"
        );
    }
}
