use crate::error::{Error, Result};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Weights of one cell. `weights` holds the four gate matrices (f, i, c, o),
/// each `hidden_dim × (hidden_dim + input_dim)` row-major over `[h, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LstmCellParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmCellParams {
            input_dim,
            hidden_dim,
            weights: vec![0.0; 4 * hidden_dim * (hidden_dim + input_dim)],
            biases: vec![0.0; 4 * hidden_dim],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmCellState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmCellState {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
        }
    }
}

/// Everything one step needs for its backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    /// `[h_{t−1}, x_t]`
    pub z: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn step(
    weights: &[f64],
    biases: &[f64],
    hidden: usize,
    h_prev: &[f64],
    c_prev: &[f64],
    x: &[f64],
) -> StepCache {
    let mut z = Vec::with_capacity(h_prev.len() + x.len());
    z.extend_from_slice(h_prev);
    z.extend_from_slice(x);
    let cols = z.len();
    let gate = |g: usize, j: usize| {
        let row = &weights[(g * hidden + j) * cols..(g * hidden + j + 1) * cols];
        biases[g * hidden + j] + row.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>()
    };
    let f: Vec<f64> = (0..hidden).map(|j| sigmoid(gate(0, j))).collect();
    let i: Vec<f64> = (0..hidden).map(|j| sigmoid(gate(1, j))).collect();
    let g: Vec<f64> = (0..hidden).map(|j| gate(2, j).tanh()).collect();
    let o: Vec<f64> = (0..hidden).map(|j| sigmoid(gate(3, j))).collect();
    let c: Vec<f64> = (0..hidden).map(|j| f[j] * c_prev[j] + i[j] * g[j]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = (0..hidden).map(|j| o[j] * tanh_c[j]).collect();
    StepCache {
        z,
        f,
        i,
        g,
        o,
        c_prev: c_prev.to_vec(),
        c,
        tanh_c,
        h,
    }
}

/// One LSTM step:
///
/// ```text
/// f = σ(W_f·[h,x] + b_f)    i = σ(W_i·[h,x] + b_i)    C̃ = tanh(W_c·[h,x] + b_c)
/// C = f∘C_prev + i∘C̃        o = σ(W_o·[h,x] + b_o)    h = o∘tanh(C)
/// ```
pub fn lstm_step(params: &LstmCellParams, prev: &LstmCellState, x: &[f64]) -> Result<LstmCellState> {
    let hd = params.hidden_dim;
    if x.len() != params.input_dim || prev.h.len() != hd || prev.c.len() != hd {
        return Err(Error::Shape(format!(
            "cell expects input {} and state {}, got {} and {}/{}",
            params.input_dim,
            hd,
            x.len(),
            prev.h.len(),
            prev.c.len()
        )));
    }
    let s = step(&params.weights, &params.biases, hd, &prev.h, &prev.c, x);
    Ok(LstmCellState { h: s.h, c: s.c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_cell_stays_zero() {
        let p = LstmCellParams::zeros(2, 3);
        let s = lstm_step(&p, &LstmCellState::zeros(3), &[0.7, -1.2]).unwrap();
        assert_eq!(s.c, vec![0.0; 3]);
        assert_eq!(s.h, vec![0.0; 3]);
    }

    #[test]
    fn saturated_forget_gate_remembers() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = LstmCellParams::zeros(2, 3);
        for w in p.weights.iter_mut() {
            *w = rng.random_range(-0.5..0.5);
        }
        p.biases[..3].fill(100.0);
        let prev = LstmCellState {
            h: vec![0.1, -0.2, 0.3],
            c: vec![1.5, -0.5, 2.0],
        };
        let x = [0.4, 0.9];
        let s = step(&p.weights, &p.biases, 3, &prev.h, &prev.c, &x);
        for j in 0..3 {
            assert!((s.f[j] - 1.0).abs() < 1e-12);
            assert!((s.c[j] - (prev.c[j] + s.i[j] * s.g[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (nx, nh) = (2, 3);
        let mut p = LstmCellParams::zeros(nx, nh);
        p.weights.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
        p.biases.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
        let prev = LstmCellState {
            h: (0..nh).map(|_| rng.random_range(-1.0..1.0)).collect(),
            c: (0..nh).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let x: Vec<f64> = (0..nx).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = lstm_step(&p, &prev, &x).unwrap();

        // Scalar evaluation, unit by unit, straight from the gate equations.
        let cols = nh + nx;
        let w = |g: usize, j: usize, k: usize| p.weights[g * nh * cols + j * cols + k];
        let logistic = |v: f64| 1.0 / (1.0 + (-v).exp());
        for j in 0..nh {
            let mut pre = [0.0; 4];
            for (g, slot) in pre.iter_mut().enumerate() {
                let mut acc = p.biases[g * nh + j];
                for k in 0..nh {
                    acc += w(g, j, k) * prev.h[k];
                }
                for k in 0..nx {
                    acc += w(g, j, nh + k) * x[k];
                }
                *slot = acc;
            }
            let c = logistic(pre[0]) * prev.c[j] + logistic(pre[1]) * pre[2].tanh();
            let h = logistic(pre[3]) * c.tanh();
            assert!((got.c[j] - c).abs() < 1e-12);
            assert!((got.h[j] - h).abs() < 1e-12);
        }
    }

    #[test]
    fn gates_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = LstmCellParams::zeros(4, 5);
        p.weights.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
        let mut prev = LstmCellState::zeros(5);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s = step(&p.weights, &p.biases, 5, &prev.h, &prev.c, &x);
            for j in 0..5 {
                assert!(s.f[j] > 0.0 && s.f[j] < 1.0 && s.i[j] > 0.0 && s.i[j] < 1.0 && s.o[j] > 0.0 && s.o[j] < 1.0);
                assert!(s.g[j].abs() < 1.0 && s.h[j].abs() < 1.0);
            }
            prev = LstmCellState { h: s.h, c: s.c };
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let p = LstmCellParams::zeros(2, 3);
        assert!(lstm_step(&p, &LstmCellState::zeros(3), &[1.0]).is_err());
    }
}
