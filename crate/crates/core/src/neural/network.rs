use rayon::prelude::*;

use super::lstm::{step, StepCache};
use super::NetworkWeights;
use crate::error::{Error, Result};
use crate::series::Window;

struct ConvCache {
    pre: Vec<Vec<f64>>,
    out: Vec<Vec<f64>>,
}

struct DenseCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    out: Vec<f64>,
}

struct ForwardCache {
    conv: ConvCache,
    lstm: Vec<Vec<StepCache>>,
    dense: Vec<DenseCache>,
}

/// Loss and gradient of a batch; `grad` mirrors the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub grad: Vec<f64>,
}

impl NetworkWeights {
    fn check_window(&self, window: &[f64]) -> Result<()> {
        if window.len() != self.spec.window {
            return Err(Error::Shape(format!(
                "window of length {} given to a network expecting {}",
                window.len(),
                self.spec.window
            )));
        }
        Ok(())
    }

    /// Causal convolution: `out[t][f] = act(b_f + Σ_k w[f][k]·x[t − (K−1) + k])`
    /// with zeros before the window start.
    fn conv_forward(&self, x: &[f64]) -> ConvCache {
        let spec = &self.spec;
        let (nf, k) = (spec.conv_filters, spec.conv_kernel);
        let w = &self.params[self.layout.conv_weights..];
        let b = &self.params[self.layout.conv_biases..];
        let mut pre = Vec::with_capacity(x.len());
        let mut out = Vec::with_capacity(x.len());
        for t in 0..x.len() {
            let mut p = Vec::with_capacity(nf);
            for f in 0..nf {
                let mut acc = b[f];
                for j in 0..k {
                    if let Some(src) = (t + j + 1).checked_sub(k) {
                        acc += w[f * k + j] * x[src];
                    }
                }
                p.push(acc);
            }
            out.push(p.iter().map(|v| spec.conv_activation.apply(*v)).collect());
            pre.push(p);
        }
        ConvCache { pre, out }
    }

    fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        let conv = self.conv_forward(x);
        let mut seq = conv.out.clone();
        let mut lstm = Vec::with_capacity(self.layout.lstm.len());
        for l in &self.layout.lstm {
            let w = &self.params[l.weights..l.weights + l.weight_len()];
            let b = &self.params[l.biases..l.biases + 4 * l.hidden];
            let mut h = vec![0.0; l.hidden];
            let mut c = vec![0.0; l.hidden];
            let mut steps = Vec::with_capacity(seq.len());
            for xt in &seq {
                let s = step(w, b, l.hidden, &h, &c, xt);
                h.clone_from(&s.h);
                c.clone_from(&s.c);
                steps.push(s);
            }
            seq = steps.iter().map(|s| s.h.clone()).collect();
            lstm.push(steps);
        }
        let mut input = seq.pop().expect("non-empty window");
        let mut dense = Vec::with_capacity(self.layout.dense.len());
        for d in &self.layout.dense {
            let w = &self.params[d.weights..d.weights + d.input * d.output];
            let pre: Vec<f64> = (0..d.output)
                .map(|o| {
                    self.params[d.biases + o]
                        + w[o * d.input..(o + 1) * d.input].iter().zip(&input).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            let out: Vec<f64> = pre.iter().map(|v| d.activation.apply(*v)).collect();
            let next = out.clone();
            dense.push(DenseCache { input, pre, out });
            input = next;
        }
        ForwardCache { conv, lstm, dense }
    }

    /// Prediction for one input window.
    pub fn forward(&self, window: &[f64]) -> Result<f64> {
        self.check_window(window)?;
        let cache = self.forward_cached(window);
        Ok(cache.dense.last().expect("dense stack").out_value())
    }

    /// Conv features for a window (one row per time step).
    pub fn conv_features(&self, window: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_window(window)?;
        Ok(self.conv_forward(window).out)
    }

    /// Accumulates `dL/dθ` for one sample into `grad`, given `dL/dŷ`.
    fn backward_sample(&self, x: &[f64], cache: &ForwardCache, dy: f64, grad: &mut [f64]) {
        let mut upstream = vec![dy];
        for (d, c) in self.layout.dense.iter().zip(&cache.dense).rev() {
            let dpre: Vec<f64> = (0..d.output)
                .map(|o| upstream[o] * d.activation.derivative(c.pre[o], c.out[o]))
                .collect();
            let mut dinput = vec![0.0; d.input];
            for o in 0..d.output {
                grad[d.biases + o] += dpre[o];
                let row = d.weights + o * d.input;
                for i in 0..d.input {
                    grad[row + i] += dpre[o] * c.input[i];
                    dinput[i] += dpre[o] * self.params[row + i];
                }
            }
            upstream = dinput;
        }

        let steps = self.spec.window;
        let mut dh_seq: Vec<Vec<f64>> = vec![Vec::new(); steps];
        dh_seq[steps - 1] = upstream;
        for (l, layer) in self.layout.lstm.iter().zip(&cache.lstm).rev() {
            let hd = l.hidden;
            let cols = hd + l.input;
            let mut dx_seq = vec![vec![0.0; l.input]; steps];
            let mut dh_next = vec![0.0; hd];
            let mut dc_next = vec![0.0; hd];
            let mut dpre = vec![0.0; 4 * hd];
            for t in (0..steps).rev() {
                let s = &layer[t];
                for j in 0..hd {
                    let dh = dh_next[j] + dh_seq[t].get(j).copied().unwrap_or(0.0);
                    let dc = dc_next[j] + dh * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
                    dpre[j] = dc * s.c_prev[j] * s.f[j] * (1.0 - s.f[j]);
                    dpre[hd + j] = dc * s.g[j] * s.i[j] * (1.0 - s.i[j]);
                    dpre[2 * hd + j] = dc * s.i[j] * (1.0 - s.g[j] * s.g[j]);
                    dpre[3 * hd + j] = dh * s.tanh_c[j] * s.o[j] * (1.0 - s.o[j]);
                    dc_next[j] = dc * s.f[j];
                }
                let mut dz = vec![0.0; cols];
                for (r, dp) in dpre.iter().enumerate() {
                    if *dp == 0.0 {
                        continue;
                    }
                    grad[l.biases + r] += dp;
                    let row = l.weights + r * cols;
                    for k in 0..cols {
                        grad[row + k] += dp * s.z[k];
                        dz[k] += dp * self.params[row + k];
                    }
                }
                dh_next.copy_from_slice(&dz[..hd]);
                dx_seq[t].copy_from_slice(&dz[hd..]);
            }
            dh_seq = dx_seq;
        }

        let (nf, k) = (self.spec.conv_filters, self.spec.conv_kernel);
        for t in 0..steps {
            for f in 0..nf {
                let pre = cache.conv.pre[t][f];
                let dp = dh_seq[t][f] * self.spec.conv_activation.derivative(pre, cache.conv.out[t][f]);
                if dp == 0.0 {
                    continue;
                }
                grad[self.layout.conv_biases + f] += dp;
                for j in 0..k {
                    if let Some(src) = (t + j + 1).checked_sub(k) {
                        grad[self.layout.conv_weights + f * k + j] += dp * x[src];
                    }
                }
            }
        }
    }

    /// Mean-squared-error loss over the batch and its full BPTT gradient.
    /// Per-sample work runs on the rayon pool; the reduction is in sample order.
    pub fn backward(&self, batch: &[Window]) -> Result<Gradients> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("batch must not be empty".into()));
        }
        for w in batch {
            self.check_window(&w.input)?;
        }
        let n = batch.len() as f64;
        let per_sample: Vec<(f64, Vec<f64>)> = batch
            .par_iter()
            .map(|w| {
                let cache = self.forward_cached(&w.input);
                let y = cache.dense.last().expect("dense stack").out_value();
                let err = y - w.target;
                let mut g = vec![0.0; self.params.len()];
                self.backward_sample(&w.input, &cache, 2.0 * err / n, &mut g);
                (err * err, g)
            })
            .collect();
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.params.len()];
        for (i, (l, g)) in per_sample.iter().enumerate() {
            if !l.is_finite() {
                return Err(Error::NonFinite(format!("loss of batch sample {i}")));
            }
            loss += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok(Gradients { loss: loss / n, grad })
    }

    /// Mean squared error without gradients.
    pub fn loss(&self, batch: &[Window]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("batch must not be empty".into()));
        }
        let errs: Vec<f64> = batch
            .par_iter()
            .map(|w| self.forward(&w.input).map(|y| (y - w.target).powi(2)))
            .collect::<Result<_>>()?;
        Ok(errs.iter().sum::<f64>() / batch.len() as f64)
    }
}

impl DenseCache {
    fn out_value(&self) -> f64 {
        self.out[0]
    }
}
