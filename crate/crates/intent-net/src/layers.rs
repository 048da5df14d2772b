//! Layer kernels over batch-major buffers laid out `[sample, channel, time]`.
//!
//! Every forward has a matching backward that accumulates parameter
//! gradients into caller-provided buffers and returns the input gradient.

use crate::params::{BatchNorm, Conv1d, Dense, Lstm};

pub const BN_EPS: f64 = 1e-5;

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

/// Output range `[t0, t1)` for which tap `shift` reads inside the input.
#[inline]
fn tap_range(len: usize, shift: isize) -> (usize, usize) {
    let t0 = (-shift).max(0) as usize;
    let t1 = (len as isize - shift).min(len as isize).max(0) as usize;
    (t0, t1.max(t0))
}

pub fn conv_forward(x: &[f64], n: usize, len: usize, conv: &Conv1d) -> Vec<f64> {
    let (co, ci, k) = (conv.c_out(), conv.c_in(), conv.kernel());
    let pad = (k / 2) as isize;
    let mut y = vec![0.0; n * co * len];
    for s in 0..n {
        for o in 0..co {
            let yr = &mut y[(s * co + o) * len..][..len];
            yr.fill(conv.b.data[o]);
            for i in 0..ci {
                let xr = &x[(s * ci + i) * len..][..len];
                let wr = &conv.w.data[(o * ci + i) * k..][..k];
                for (kk, &w) in wr.iter().enumerate() {
                    let shift = kk as isize - pad;
                    let (t0, t1) = tap_range(len, shift);
                    let xs = (t0 as isize + shift) as usize;
                    axpy(w, &xr[xs..xs + (t1 - t0)], &mut yr[t0..t1]);
                }
            }
        }
    }
    y
}

/// Returns the input gradient when `need_dx` is set.
pub fn conv_backward(
    x: &[f64],
    dy: &[f64],
    n: usize,
    len: usize,
    conv: &Conv1d,
    gw: &mut [f64],
    gb: &mut [f64],
    need_dx: bool,
) -> Option<Vec<f64>> {
    let (co, ci, k) = (conv.c_out(), conv.c_in(), conv.kernel());
    let pad = (k / 2) as isize;
    let mut dx = need_dx.then(|| vec![0.0; n * ci * len]);
    for s in 0..n {
        for o in 0..co {
            let dyr = &dy[(s * co + o) * len..][..len];
            gb[o] += dyr.iter().sum::<f64>();
            for i in 0..ci {
                let xr = &x[(s * ci + i) * len..][..len];
                let base = (o * ci + i) * k;
                for kk in 0..k {
                    let shift = kk as isize - pad;
                    let (t0, t1) = tap_range(len, shift);
                    let xs = (t0 as isize + shift) as usize;
                    let m = t1 - t0;
                    gw[base + kk] += dot(&dyr[t0..t1], &xr[xs..xs + m]);
                    if let Some(dx) = dx.as_mut() {
                        let dxr = &mut dx[(s * ci + i) * len..][..len];
                        axpy(conv.w.data[base + kk], &dyr[t0..t1], &mut dxr[xs..xs + m]);
                    }
                }
            }
        }
    }
    dx
}

/// Per-channel batch statistics of one training forward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Normalizes over batch and time with the batch statistics.
pub fn bn_forward_train(x: &[f64], n: usize, c: usize, len: usize, bn: &BatchNorm) -> (Vec<f64>, BnCache) {
    let count = (n * len) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for s in 0..n {
        for ch in 0..c {
            mean[ch] += x[(s * c + ch) * len..][..len].iter().sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    for s in 0..n {
        for ch in 0..c {
            let m = mean[ch];
            var[ch] += x[(s * c + ch) * len..][..len]
                .iter()
                .map(|v| (v - m) * (v - m))
                .sum::<f64>();
        }
    }
    var.iter_mut().for_each(|v| *v /= count);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut xhat = vec![0.0; x.len()];
    let mut y = vec![0.0; x.len()];
    for s in 0..n {
        for ch in 0..c {
            let off = (s * c + ch) * len;
            let (m, is, g, b) = (mean[ch], inv_std[ch], bn.gamma.data[ch], bn.beta.data[ch]);
            for t in off..off + len {
                let h = (x[t] - m) * is;
                xhat[t] = h;
                y[t] = g * h + b;
            }
        }
    }
    (
        y,
        BnCache {
            xhat,
            inv_std,
            mean,
            var,
        },
    )
}

/// Normalizes with the running statistics.
pub fn bn_forward_infer(x: &[f64], n: usize, c: usize, len: usize, bn: &BatchNorm) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for s in 0..n {
        for ch in 0..c {
            let off = (s * c + ch) * len;
            let is = 1.0 / (bn.running_var[ch] + BN_EPS).sqrt();
            let (m, g, b) = (bn.running_mean[ch], bn.gamma.data[ch], bn.beta.data[ch]);
            for t in off..off + len {
                y[t] = g * (x[t] - m) * is + b;
            }
        }
    }
    y
}

pub fn bn_backward(
    dy: &[f64],
    n: usize,
    c: usize,
    len: usize,
    bn: &BatchNorm,
    cache: &BnCache,
    g_gamma: &mut [f64],
    g_beta: &mut [f64],
) -> Vec<f64> {
    let count = (n * len) as f64;
    let mut sum_dy = vec![0.0; c];
    let mut sum_dy_xhat = vec![0.0; c];
    for s in 0..n {
        for ch in 0..c {
            let off = (s * c + ch) * len;
            sum_dy[ch] += dy[off..off + len].iter().sum::<f64>();
            sum_dy_xhat[ch] += dot(&dy[off..off + len], &cache.xhat[off..off + len]);
        }
    }
    for ch in 0..c {
        g_gamma[ch] += sum_dy_xhat[ch];
        g_beta[ch] += sum_dy[ch];
    }
    let mut dx = vec![0.0; dy.len()];
    for s in 0..n {
        for ch in 0..c {
            let off = (s * c + ch) * len;
            let k = bn.gamma.data[ch] * cache.inv_std[ch] / count;
            let (sd, sdx) = (sum_dy[ch], sum_dy_xhat[ch]);
            for t in off..off + len {
                dx[t] = k * (count * dy[t] - sd - cache.xhat[t] * sdx);
            }
        }
    }
    dx
}

/// Non-overlapping max pooling; returns output and the flat argmax of each
/// output element.
pub fn pool_forward(x: &[f64], rows: usize, len: usize, p: usize) -> (Vec<f64>, Vec<usize>) {
    let out_len = len / p;
    let mut y = Vec::with_capacity(rows * out_len);
    let mut arg = Vec::with_capacity(rows * out_len);
    for r in 0..rows {
        let row = &x[r * len..][..len];
        for j in 0..out_len {
            let mut best = j * p;
            for i in j * p + 1..j * p + p {
                if row[i] > row[best] {
                    best = i;
                }
            }
            y.push(row[best]);
            arg.push(r * len + best);
        }
    }
    (y, arg)
}

pub fn pool_backward(dy: &[f64], arg: &[usize], in_size: usize) -> Vec<f64> {
    let mut dx = vec![0.0; in_size];
    for (g, &i) in dy.iter().zip(arg) {
        dx[i] += g;
    }
    dx
}

pub fn leaky_forward(x: &mut [f64], slope: f64) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
}

/// `pre` is the activation input.
pub fn leaky_backward(dy: &mut [f64], pre: &[f64], slope: f64) {
    for (g, &p) in dy.iter_mut().zip(pre) {
        if p < 0.0 {
            *g *= slope;
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-sample LSTM trace: gate activations `[t][4H]`, cell states and
/// hidden states `[t+1][H]` (index 0 is the zero initial state).
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub gates: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

/// Runs one sequence, `x` laid out `[feature, time]`; returns the final
/// hidden state and the trace.
pub fn lstm_forward(x: &[f64], feat: usize, len: usize, lstm: &Lstm) -> (Vec<f64>, LstmCache) {
    let h_dim = lstm.w_h.shape[1];
    let g_dim = 4 * h_dim;
    let mut cache = LstmCache {
        gates: Vec::with_capacity(len),
        c: vec![vec![0.0; h_dim]],
        h: vec![vec![0.0; h_dim]],
    };
    let mut xt = vec![0.0; feat];
    for t in 0..len {
        for (f, v) in xt.iter_mut().enumerate() {
            *v = x[f * len + t];
        }
        let h_prev = &cache.h[t];
        let c_prev = &cache.c[t];
        let mut z = lstm.b.data.clone();
        for (r, zr) in z.iter_mut().enumerate() {
            *zr += dot(&lstm.w_x.data[r * feat..][..feat], &xt);
            *zr += dot(&lstm.w_h.data[r * h_dim..][..h_dim], h_prev);
        }
        for j in 0..g_dim {
            z[j] = if (2 * h_dim..3 * h_dim).contains(&j) {
                z[j].tanh()
            } else {
                sigmoid(z[j])
            };
        }
        let mut c = vec![0.0; h_dim];
        let mut h = vec![0.0; h_dim];
        for j in 0..h_dim {
            let (i, f, g, o) = (z[j], z[h_dim + j], z[2 * h_dim + j], z[3 * h_dim + j]);
            c[j] = f * c_prev[j] + i * g;
            h[j] = o * c[j].tanh();
        }
        cache.gates.push(z);
        cache.c.push(c);
        cache.h.push(h);
    }
    (cache.h[len].clone(), cache)
}

/// Backpropagates `dh_last` through time; returns the input gradient in
/// the `[feature, time]` layout.
pub fn lstm_backward(
    x: &[f64],
    feat: usize,
    len: usize,
    lstm: &Lstm,
    cache: &LstmCache,
    dh_last: &[f64],
    g_wx: &mut [f64],
    g_wh: &mut [f64],
    g_b: &mut [f64],
) -> Vec<f64> {
    let h_dim = lstm.w_h.shape[1];
    let g_dim = 4 * h_dim;
    let mut dx = vec![0.0; feat * len];
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; h_dim];
    let mut dz = vec![0.0; g_dim];
    let mut xt = vec![0.0; feat];
    for t in (0..len).rev() {
        let z = &cache.gates[t];
        let c = &cache.c[t + 1];
        let c_prev = &cache.c[t];
        let h_prev = &cache.h[t];
        for j in 0..h_dim {
            let (i, f, g, o) = (z[j], z[h_dim + j], z[2 * h_dim + j], z[3 * h_dim + j]);
            let tc = c[j].tanh();
            let d_o = dh[j] * tc;
            dc[j] += dh[j] * o * (1.0 - tc * tc);
            let d_i = dc[j] * g;
            let d_g = dc[j] * i;
            let d_f = dc[j] * c_prev[j];
            dz[j] = d_i * i * (1.0 - i);
            dz[h_dim + j] = d_f * f * (1.0 - f);
            dz[2 * h_dim + j] = d_g * (1.0 - g * g);
            dz[3 * h_dim + j] = d_o * o * (1.0 - o);
            dc[j] *= f;
        }
        for (f, v) in xt.iter_mut().enumerate() {
            *v = x[f * len + t];
        }
        dh.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..g_dim {
            let d = dz[r];
            g_b[r] += d;
            axpy(d, &xt, &mut g_wx[r * feat..][..feat]);
            axpy(d, h_prev, &mut g_wh[r * h_dim..][..h_dim]);
            let wx = &lstm.w_x.data[r * feat..][..feat];
            for (fi, w) in wx.iter().enumerate() {
                dx[fi * len + t] += d * w;
            }
            axpy(d, &lstm.w_h.data[r * h_dim..][..h_dim], &mut dh);
        }
    }
    dx
}

pub fn dense_forward(h: &[f64], dense: &Dense) -> Vec<f64> {
    let hd = dense.w.shape[1];
    dense
        .b
        .data
        .iter()
        .enumerate()
        .map(|(r, b)| b + dot(&dense.w.data[r * hd..][..hd], h))
        .collect()
}

pub fn dense_backward(h: &[f64], dlogits: &[f64], dense: &Dense, gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
    let hd = dense.w.shape[1];
    let mut dh = vec![0.0; hd];
    for (r, &d) in dlogits.iter().enumerate() {
        gb[r] += d;
        axpy(d, h, &mut gw[r * hd..][..hd]);
        axpy(d, &dense.w.data[r * hd..][..hd], &mut dh);
    }
    dh
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
