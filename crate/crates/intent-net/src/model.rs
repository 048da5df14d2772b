//! Batched forward and backward passes of the full network:
//! `[conv → conv → batch-norm → max-pool → LeakyReLU] × 2 → LSTM → dropout
//! → dense → softmax`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::layers::{self, BnCache, LstmCache};
use crate::params::{Grads, ModelParams};
use crate::IntentError;
use exo_core::Class;

pub const LEAKY_SLOPE: f64 = 0.01;

/// Softmax output over rest / onset / activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassProbs {
    pub p_rest: f64,
    pub p_onset: f64,
    pub p_activation: f64,
}

impl ClassProbs {
    pub fn from_slice(p: &[f64]) -> Self {
        Self {
            p_rest: p[0],
            p_onset: p[1],
            p_activation: p[2],
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_rest, self.p_onset, self.p_activation]
    }

    pub fn argmax(&self) -> Class {
        let a = self.as_array();
        let mut best = 0;
        for i in 1..3 {
            if a[i] > a[best] {
                best = i;
            }
        }
        Class::from_index(best).expect("three classes")
    }
}

/// Inverted-dropout multipliers on the LSTM output, `[sample, hidden]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(pub Vec<f64>);

impl DropoutMask {
    pub fn sample<R: Rng + ?Sized>(n: usize, hidden: usize, rate: f64, rng: &mut R) -> Self {
        let keep = 1.0 - rate;
        Self(
            (0..n * hidden)
                .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect(),
        )
    }

    pub fn identity(n: usize, hidden: usize) -> Self {
        Self(vec![1.0; n * hidden])
    }
}

/// How batch-norm and dropout behave in a forward pass.
#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    /// Running statistics, no dropout.
    Infer,
    /// Batch statistics, the given dropout multipliers.
    Train(&'a DropoutMask),
}

struct CellCache {
    input: Vec<f64>,
    a_out: Vec<f64>,
    bn: BnCache,
    pool_arg: Vec<usize>,
    pooled: Vec<f64>,
}

/// Intermediates of a training forward pass.
pub struct Cache {
    n: usize,
    cells: Vec<CellCache>,
    seq: Vec<f64>,
    lstm: Vec<LstmCache>,
    dropped: Vec<Vec<f64>>,
    mask: Vec<f64>,
    pub probs: Vec<Vec<f64>>,
}

impl Cache {
    /// Batch mean and variance of each batch-norm layer.
    pub fn bn_stats(&self) -> Vec<(&[f64], &[f64])> {
        self.cells
            .iter()
            .map(|c| (c.bn.mean.as_slice(), c.bn.var.as_slice()))
            .collect()
    }
}

fn check_batch(params: &ModelParams, xs: &[&[f64]]) -> Result<(), IntentError> {
    if xs.is_empty() {
        return Err(IntentError::EmptyBatch);
    }
    let len = params.arch.input_len;
    if let Some(bad) = xs.iter().find(|x| x.len() != len) {
        return Err(IntentError::Shape {
            layer: "input".into(),
            expected: vec![len],
            found: vec![bad.len()],
        });
    }
    Ok(())
}

/// Runs the network on a batch of epochs.
pub fn forward_batch(params: &ModelParams, xs: &[&[f64]], mode: Mode<'_>) -> Result<(Vec<ClassProbs>, Option<Cache>), IntentError> {
    check_batch(params, xs)?;
    let arch = params.arch;
    let n = xs.len();
    let h_dim = arch.hidden;
    if let Mode::Train(mask) = mode {
        if mask.0.len() != n * h_dim {
            return Err(IntentError::Shape {
                layer: "dropout".into(),
                expected: vec![n, h_dim],
                found: vec![mask.0.len()],
            });
        }
    }
    let mut x: Vec<f64> = xs.iter().flat_map(|s| s.iter().copied()).collect();
    let mut len = arch.input_len;
    let mut cell_caches = Vec::with_capacity(2);
    for (ci, cell) in params.cells.iter().enumerate() {
        let c = arch.filters[ci];
        let a = layers::conv_forward(&x, n, len, &cell.conv_a);
        let b = layers::conv_forward(&a, n, len, &cell.conv_b);
        let (normed, bn_cache) = match mode {
            Mode::Infer => (layers::bn_forward_infer(&b, n, c, len, &cell.bn), None),
            Mode::Train(_) => {
                let (y, cache) = layers::bn_forward_train(&b, n, c, len, &cell.bn);
                (y, Some(cache))
            }
        };
        let (pooled, arg) = layers::pool_forward(&normed, n * c, len, arch.pool);
        let mut out = pooled.clone();
        layers::leaky_forward(&mut out, LEAKY_SLOPE);
        if let Some(bn) = bn_cache {
            cell_caches.push(CellCache {
                input: std::mem::take(&mut x),
                a_out: a,
                bn,
                pool_arg: arg,
                pooled,
            });
        }
        x = out;
        len /= arch.pool;
    }

    let feat = arch.filters[1];
    let train = matches!(mode, Mode::Train(_));
    let mut lstm_caches = Vec::new();
    let mut dropped = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    for s in 0..n {
        let seq = &x[s * feat * len..][..feat * len];
        let (h, cache) = layers::lstm_forward(seq, feat, len, &params.lstm);
        let d: Vec<f64> = match mode {
            Mode::Train(mask) => h.iter().zip(&mask.0[s * h_dim..][..h_dim]).map(|(a, m)| a * m).collect(),
            Mode::Infer => h,
        };
        let p = layers::softmax(&layers::dense_forward(&d, &params.dense));
        if train {
            lstm_caches.push(cache);
            dropped.push(d);
        }
        probs.push(p);
    }
    let out: Vec<ClassProbs> = probs.iter().map(|p| ClassProbs::from_slice(p)).collect();
    let cache = match mode {
        Mode::Train(mask) => Some(Cache {
            n,
            cells: cell_caches,
            seq: x,
            lstm: lstm_caches,
            dropped,
            mask: mask.0.clone(),
            probs,
        }),
        Mode::Infer => None,
    };
    Ok((out, cache))
}

/// Single-epoch forward. In train mode batch-norm uses the statistics of
/// this one epoch and dropout is drawn from `rng`.
pub fn forward<R: Rng + ?Sized>(params: &ModelParams, epoch: &[f64], train_mode: bool, rng: &mut R) -> Result<ClassProbs, IntentError> {
    if train_mode {
        let mask = DropoutMask::sample(1, params.arch.hidden, crate::DEFAULT_DROPOUT, rng);
        Ok(forward_batch(params, &[epoch], Mode::Train(&mask))?.0[0])
    } else {
        Ok(forward_batch(params, &[epoch], Mode::Infer)?.0[0])
    }
}

/// Inference over many epochs, in chunks.
pub fn predict(params: &ModelParams, xs: &[&[f64]]) -> Result<Vec<ClassProbs>, IntentError> {
    let mut out = Vec::with_capacity(xs.len());
    for chunk in xs.chunks(64) {
        out.extend(forward_batch(params, chunk, Mode::Infer)?.0);
    }
    Ok(out)
}

/// Mean cross-entropy of `probs` against `labels`.
pub fn cross_entropy(probs: &[ClassProbs], labels: &[Class]) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, l)| -p.as_array()[l.index()].max(1e-300).ln())
        .sum();
    total / probs.len().max(1) as f64
}

/// Gradients of the mean cross-entropy over the batch, and that loss.
pub fn backward(params: &ModelParams, xs: &[&[f64]], labels: &[Class], mask: &DropoutMask) -> Result<(Grads, f64, Cache), IntentError> {
    if labels.len() != xs.len() {
        return Err(IntentError::Shape {
            layer: "labels".into(),
            expected: vec![xs.len()],
            found: vec![labels.len()],
        });
    }
    let (probs, cache) = forward_batch(params, xs, Mode::Train(mask))?;
    let cache = cache.expect("train mode caches");
    let loss = cross_entropy(&probs, labels);
    let grads = backward_from_cache(params, &cache, labels);
    Ok((grads, loss, cache))
}

fn backward_from_cache(params: &ModelParams, cache: &Cache, labels: &[Class]) -> Grads {
    let arch = params.arch;
    let n = cache.n;
    let h_dim = arch.hidden;
    let mut g = params.zero_grads();
    let [l1, l2] = arch.cell_lengths();
    let feat = arch.filters[1];

    let mut d_seq = vec![0.0; cache.seq.len()];
    for s in 0..n {
        let mut dl = cache.probs[s].clone();
        dl[labels[s].index()] -= 1.0;
        dl.iter_mut().for_each(|v| *v /= n as f64);
        let (gw, rest) = g.0[15..].split_at_mut(1);
        let dd = layers::dense_backward(&cache.dropped[s], &dl, &params.dense, &mut gw[0], &mut rest[0]);
        let dh: Vec<f64> = dd.iter().zip(&cache.mask[s * h_dim..][..h_dim]).map(|(a, m)| a * m).collect();
        let (gwx, rest) = g.0[12..15].split_at_mut(1);
        let (gwh, gb) = rest.split_at_mut(1);
        let seq = &cache.seq[s * feat * l2..][..feat * l2];
        let dx = layers::lstm_backward(seq, feat, l2, &params.lstm, &cache.lstm[s], &dh, &mut gwx[0], &mut gwh[0], &mut gb[0]);
        d_seq[s * feat * l2..][..feat * l2].copy_from_slice(&dx);
    }

    let mut d_out = d_seq;
    let lens = [arch.input_len, l1];
    for ci in (0..2).rev() {
        let cell = &params.cells[ci];
        let cc = &cache.cells[ci];
        let c = arch.filters[ci];
        let len = lens[ci];
        let base = ci * 6;
        layers::leaky_backward(&mut d_out, &cc.pooled, LEAKY_SLOPE);
        let d_norm = layers::pool_backward(&d_out, &cc.pool_arg, n * c * len);
        let (gg, gbeta) = g.0[base + 4..base + 6].split_at_mut(1);
        let d_b = layers::bn_backward(&d_norm, n, c, len, &cell.bn, &cc.bn, &mut gg[0], &mut gbeta[0]);
        let (gwb, gbb) = g.0[base + 2..base + 4].split_at_mut(1);
        let d_a = layers::conv_backward(&cc.a_out, &d_b, n, len, &cell.conv_b, &mut gwb[0], &mut gbb[0], true)
            .expect("dx requested");
        let (gwa, gba) = g.0[base..base + 2].split_at_mut(1);
        let d_in = layers::conv_backward(&cc.input, &d_a, n, len, &cell.conv_a, &mut gwa[0], &mut gba[0], ci > 0);
        if let Some(d) = d_in {
            d_out = d;
        }
    }
    g
}

/// Folds the batch statistics of a training step into the running
/// statistics: `running = momentum·running + (1 − momentum)·batch`.
pub fn update_running_stats(params: &mut ModelParams, cache: &Cache, momentum: f64) {
    for (cell, cc) in params.cells.iter_mut().zip(&cache.cells) {
        for (r, b) in cell.bn.running_mean.iter_mut().zip(&cc.bn.mean) {
            *r = momentum * *r + (1.0 - momentum) * b;
        }
        for (r, b) in cell.bn.running_var.iter_mut().zip(&cc.bn.var) {
            *r = momentum * *r + (1.0 - momentum) * b;
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::params::Arch;

    fn model(seed: u64) -> ModelParams {
        ModelParams::init(Arch::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn epoch(seed: u64) -> Vec<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..500).map(|_| r.random::<f64>()).collect()
    }

    #[test]
    fn zero_dense_gives_uniform() {
        let mut p = model(1);
        p.dense.w.data.fill(0.0);
        p.dense.b.data.fill(0.0);
        let out = forward(&p, &epoch(2), false, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for v in out.as_array() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let p = model(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for s in 0..5 {
            for train in [false, true] {
                let out = forward(&p, &epoch(s), train, &mut rng).unwrap();
                assert!((out.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn inference_is_repeatable() {
        let p = model(5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = epoch(1);
        assert_eq!(forward(&p, &e, false, &mut rng).unwrap(), forward(&p, &e, false, &mut rng).unwrap());
    }

    #[test]
    fn wrong_length_names_input() {
        let p = model(1);
        match forward_batch(&p, &[&[0.0; 499]], Mode::Infer) {
            Err(IntentError::Shape { layer, .. }) => assert_eq!(layer, "input"),
            other => panic!("unexpected {:?}", other.map(|r| r.0)),
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let p = model(1);
        let mask = DropoutMask::identity(0, 4);
        assert!(matches!(backward(&p, &[], &[], &mask), Err(IntentError::EmptyBatch)));
    }

    #[test]
    fn duplicated_batch_keeps_loss_and_grads() {
        let p = model(7);
        let (a, b) = (epoch(1), epoch(2));
        let labels = [Class::Rest, Class::Onset];
        let once: Vec<&[f64]> = vec![&a, &b];
        let twice: Vec<&[f64]> = vec![&a, &b, &a, &b];
        let m1 = DropoutMask::identity(2, 4);
        let m2 = DropoutMask::identity(4, 4);
        let (g1, l1, _) = backward(&p, &once, &labels, &m1).unwrap();
        let labels2 = [labels[0], labels[1], labels[0], labels[1]];
        let (g2, l2, _) = backward(&p, &twice, &labels2, &m2).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (x, y) in g1.flat().zip(g2.flat()) {
            assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn confident_correct_prediction_has_near_zero_loss() {
        let mut p = model(3);
        p.dense.w.data.fill(0.0);
        p.dense.b.data = vec![0.0, 0.0, 50.0];
        let e = epoch(0);
        let mask = DropoutMask::identity(1, 4);
        let (_, loss, _) = backward(&p, &[&e], &[Class::Activation], &mask).unwrap();
        assert!(loss < 1e-20);
    }
}
