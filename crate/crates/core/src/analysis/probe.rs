//! Linear decoding probes.
//!
//! Greedy rollouts record (hidden state, ground-truth label) pairs; a
//! ridge-regularized least-squares fit then measures how much of a world
//! quantity the hidden state linearly encodes. The held-out split is by
//! episode, not by step — consecutive steps are too correlated for a
//! step-level split to mean anything.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{make_task, TaskConfig};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::net::{NetworkWeights, RnnState};
use crate::rl::Learner;

/// Which steps contribute probe rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeFilter {
    All,
    /// Capture task only: steps where the object is hidden.
    InvisibleOnly,
}

/// Rows of (hidden state, label vector) with episode provenance.
#[derive(Debug, Clone)]
pub struct ProbeDataset {
    pub hidden: Vec<Vec<f64>>,
    pub labels: Vec<Vec<f64>>,
    /// Episode index each row came from; drives the held-out split.
    pub episodes: Vec<usize>,
    pub label_names: Vec<String>,
    pub filter: ProbeFilter,
}

impl ProbeDataset {
    pub fn len(&self) -> usize {
        self.hidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hidden.is_empty()
    }
}

/// Roll out greedy episodes and record the hidden state after each step
/// passing the filter, labeled with ground truth from the simulator
/// diagnostics.
pub fn collect_probe_data(
    net: &NetworkWeights,
    learner: &Learner,
    task: &TaskConfig,
    episodes: usize,
    filter: ProbeFilter,
    seed: u64,
) -> Result<ProbeDataset> {
    if filter == ProbeFilter::InvisibleOnly && !net.is_recurrent() {
        return Err(Error::Config(
            "a feedforward checkpoint has no memory; the invisible-steps filter needs a \
             recurrent network"
            .into(),
        ));
    }
    if filter == ProbeFilter::InvisibleOnly && !matches!(task, TaskConfig::Capture(_)) {
        return Err(Error::Config(
            "the invisible-steps filter only applies to the capture task".into(),
        ));
    }
    let label_names: Vec<String> = match task {
        TaskConfig::Capture(_) => vec!["object_x".into(), "object_y".into()],
        TaskConfig::MemoryCue(_) => vec!["cue".into()],
        TaskConfig::Reach1d(_) => vec!["position".into(), "target".into()],
        TaskConfig::ChainMdp(_) => vec!["state".into()],
    };

    let mut env = make_task(task)?;
    if env.observation_size() != net.input_size() {
        return Err(Error::Shape(format!(
            "checkpoint expects {} inputs but the task produces {}",
            net.input_size(),
            env.observation_size()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = ProbeDataset {
        hidden: Vec::new(),
        labels: Vec::new(),
        episodes: Vec::new(),
        label_names,
        filter,
    };
    for episode in 0..episodes {
        let env_seed: u64 = rng.random();
        let reset = env.reset(env_seed)?;
        let mut obs = reset.observation;
        let mut info = reset.info;
        let mut state = net.is_recurrent().then(|| RnnState::zeros(net.hidden_size()));
        loop {
            // Hidden representation after consuming the current observation.
            let (next_state, outputs, hidden) = match &state {
                Some(s) => {
                    let (h, o) = net.rnn_step(s, &obs)?;
                    let hv = h.hidden().to_vec();
                    (Some(h), o, hv)
                }
                None => {
                    let o = net.forward_layered(&obs)?;
                    let hv = net.hidden_activations(&obs)?;
                    (None, o, hv)
                }
            };
            let accepted = match filter {
                ProbeFilter::All => true,
                ProbeFilter::InvisibleOnly => info.visible == Some(false),
            };
            if accepted {
                let label: Vec<f64> = match task {
                    TaskConfig::Capture(_) => vec![
                        info.object_x.unwrap_or(f64::NAN),
                        info.object_y.unwrap_or(f64::NAN),
                    ],
                    TaskConfig::MemoryCue(_) => vec![f64::from(info.cue.unwrap_or(0))],
                    TaskConfig::Reach1d(_) => vec![
                        info.position.unwrap_or(f64::NAN),
                        info.target.unwrap_or(f64::NAN),
                    ],
                    TaskConfig::ChainMdp(_) => vec![info.state.unwrap_or(0) as f64],
                };
                data.hidden.push(hidden);
                data.labels.push(label);
                data.episodes.push(episode);
            }
            let decision = learner.decide_greedy(&outputs)?;
            let stepped = env.step(&decision.action)?;
            obs = stepped.observation;
            info = stepped.info;
            state = next_state;
            if stepped.terminated || stepped.truncated {
                break;
            }
        }
    }
    Ok(data)
}

/// Probe fit: per-label coefficients (hidden dim + intercept) and R^2 on the
/// training episodes and the held-out episodes.
#[derive(Debug, Clone)]
pub struct ProbeFit {
    /// (hidden_dim + 1) x labels; last row is the intercept.
    pub coefficients: Mat,
    pub r2_train: Vec<f64>,
    pub r2_holdout: Vec<f64>,
    pub label_names: Vec<String>,
    pub rows_train: usize,
    pub rows_holdout: usize,
}

/// Ridge-regularized least squares from hidden states to labels via the
/// normal equations (the intercept is not penalized). The held-out R^2 comes
/// from the last 20% of episodes.
pub fn linear_probe(data: &ProbeDataset, ridge: f64) -> Result<ProbeFit> {
    if data.is_empty() {
        return Err(Error::NoData(
            "probe dataset is empty (filter accepted no steps)".into(),
        ));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::Config(format!("ridge must be non-negative, got {ridge}")));
    }
    let mut unique_eps: Vec<usize> = data.episodes.clone();
    unique_eps.sort_unstable();
    unique_eps.dedup();
    if unique_eps.len() < 2 {
        return Err(Error::NoData(
            "need at least two episodes for an episode-level holdout split".into(),
        ));
    }
    let cut = ((unique_eps.len() as f64) * 0.8).ceil() as usize;
    let cut = cut.clamp(1, unique_eps.len() - 1);
    let holdout_start = unique_eps[cut];
    let is_train: Vec<bool> = data
        .episodes
        .iter()
        .map(|&e| e < holdout_start)
        .collect();

    let dim = data.hidden[0].len();
    let cols = dim + 1; // intercept
    let n_labels = data.labels[0].len();

    // Normal equations on the training rows: A = X'X + ridge*I, B = X'Y.
    let mut a = Mat::zeros(cols, cols);
    let mut b = Mat::zeros(cols, n_labels);
    let mut rows_train = 0usize;
    for (i, h) in data.hidden.iter().enumerate() {
        if !is_train[i] {
            continue;
        }
        rows_train += 1;
        let mut x = Vec::with_capacity(cols);
        x.extend_from_slice(h);
        x.push(1.0);
        for r in 0..cols {
            for c in 0..cols {
                a[(r, c)] += x[r] * x[c];
            }
            for (l, &y) in data.labels[i].iter().enumerate() {
                b[(r, l)] += x[r] * y;
            }
        }
    }
    for d in 0..dim {
        a[(d, d)] += ridge;
    }

    let coefficients = solve_spd(&a, &b).map_err(|_| {
        Error::Numerical(
            "normal equations are singular; rerun with ridge > 0".into(),
        )
    })?;

    let predict = |h: &[f64], l: usize| -> f64 {
        let mut y = coefficients[(dim, l)];
        for (d, &v) in h.iter().enumerate() {
            y += coefficients[(d, l)] * v;
        }
        y
    };

    let mut r2_train = Vec::with_capacity(n_labels);
    let mut r2_holdout = Vec::with_capacity(n_labels);
    let rows_holdout = data.len() - rows_train;
    for l in 0..n_labels {
        for train_split in [true, false] {
            let ys: Vec<f64> = data
                .labels
                .iter()
                .zip(is_train.iter())
                .filter(|(_, &t)| t == train_split)
                .map(|(row, _)| row[l])
                .collect();
            let preds: Vec<f64> = data
                .hidden
                .iter()
                .zip(is_train.iter())
                .filter(|(_, &t)| t == train_split)
                .map(|(h, _)| predict(h, l))
                .collect();
            let r2 = r_squared(&ys, &preds);
            if train_split {
                r2_train.push(r2);
            } else {
                r2_holdout.push(r2);
            }
        }
    }
    Ok(ProbeFit {
        coefficients,
        r2_train,
        r2_holdout,
        label_names: data.label_names.clone(),
        rows_train,
        rows_holdout,
    })
}

/// Coefficient of determination against the evaluation set's own mean.
fn r_squared(ys: &[f64], preds: &[f64]) -> f64 {
    if ys.is_empty() {
        return 0.0;
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let ss_res: f64 = ys
        .iter()
        .zip(preds.iter())
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    if ss_tot <= f64::EPSILON {
        return if ss_res <= f64::EPSILON { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

/// Cholesky solve of the symmetric positive-definite system A X = B.
/// Fails on non-positive pivots (singular or indefinite systems).
fn solve_spd(a: &Mat, b: &Mat) -> Result<Mat> {
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Numerical("non-positive Cholesky pivot".into()));
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    // Forward and back substitution per right-hand side.
    let m = b.cols();
    let mut x = Mat::zeros(n, m);
    for col in 0..m {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = b[(i, col)];
            for k in 0..i {
                sum -= l[(i, k)] * y[k];
            }
            y[i] = sum / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in i + 1..n {
                sum -= l[(k, i)] * x[(k, col)];
            }
            x[(i, col)] = sum / l[(i, i)];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_linear(rows_per_ep: usize, eps: usize, dim: usize) -> ProbeDataset {
        // Labels exactly linear in the hidden state: y = w.h + c.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = 0.37;
        let mut data = ProbeDataset {
            hidden: Vec::new(),
            labels: Vec::new(),
            episodes: Vec::new(),
            label_names: vec!["y".into()],
            filter: ProbeFilter::All,
        };
        for e in 0..eps {
            for _ in 0..rows_per_ep {
                let h: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
                let y = h.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>() + c;
                data.hidden.push(h);
                data.labels.push(vec![y]);
                data.episodes.push(e);
            }
        }
        data
    }

    #[test]
    fn realizable_labels_give_perfect_holdout_r2() {
        let data = synthetic_linear(30, 10, 5);
        let fit = linear_probe(&data, 0.0).unwrap();
        assert!(
            (fit.r2_holdout[0] - 1.0).abs() < 1e-8,
            "holdout R^2 {}",
            fit.r2_holdout[0]
        );
    }

    #[test]
    fn shuffled_labels_have_no_holdout_r2() {
        let mut data = synthetic_linear(30, 10, 5);
        // Permutation null: rotate labels across rows so they no longer
        // line up with their hidden states.
        let k = data.labels.len() / 2 + 3;
        data.labels.rotate_left(k);
        let fit = linear_probe(&data, 1e-6).unwrap();
        assert!(
            fit.r2_holdout[0] <= 0.05,
            "null probe leaked: R^2 {}",
            fit.r2_holdout[0]
        );
    }

    // Independent oracle: plain gradient descent on the same ridge
    // objective, no shared code with the Cholesky path.
    fn gd_least_squares(data: &ProbeDataset, ridge: f64, train_rows: usize) -> Vec<f64> {
        let dim = data.hidden[0].len();
        let mut w = vec![0.0; dim + 1];
        let lr = 0.05;
        for _ in 0..200_000 {
            let mut grad = vec![0.0; dim + 1];
            for i in 0..train_rows {
                let h = &data.hidden[i];
                let mut pred = w[dim];
                for d in 0..dim {
                    pred += w[d] * h[d];
                }
                let err = pred - data.labels[i][0];
                for d in 0..dim {
                    grad[d] += err * h[d];
                }
                grad[dim] += err;
            }
            for d in 0..dim {
                grad[d] += ridge * w[d];
            }
            let scale = lr / train_rows as f64;
            for d in 0..=dim {
                w[d] -= scale * grad[d];
            }
        }
        w
    }

    #[test]
    fn normal_equations_match_gradient_descent_oracle() {
        let data = synthetic_linear(20, 5, 5);
        let fit = linear_probe(&data, 1e-3).unwrap();
        let w = gd_least_squares(&data, 1e-3, fit.rows_train);
        for d in 0..6 {
            assert!(
                (fit.coefficients[(d, 0)] - w[d]).abs() < 1e-6,
                "coef {d}: cholesky {} vs gd {}",
                fit.coefficients[(d, 0)],
                w[d]
            );
        }
    }

    #[test]
    fn singular_system_without_ridge_advises_ridge() {
        // Duplicate a hidden dimension to make X'X exactly singular.
        let mut data = synthetic_linear(20, 4, 3);
        for h in data.hidden.iter_mut() {
            let v = h[0];
            h.push(v);
        }
        let err = linear_probe(&data, 0.0).unwrap_err();
        match err {
            Error::Numerical(msg) => assert!(msg.contains("ridge")),
            other => panic!("expected numerical error, got {other:?}"),
        }
        assert!(linear_probe(&data, 1e-6).is_ok());
    }

    #[test]
    fn empty_dataset_is_no_data() {
        let data = ProbeDataset {
            hidden: Vec::new(),
            labels: Vec::new(),
            episodes: Vec::new(),
            label_names: vec!["y".into()],
            filter: ProbeFilter::All,
        };
        assert!(matches!(linear_probe(&data, 0.0), Err(Error::NoData(_))));
    }

    #[test]
    fn single_episode_cannot_split() {
        let data = synthetic_linear(30, 1, 3);
        assert!(matches!(linear_probe(&data, 0.0), Err(Error::NoData(_))));
    }
}
