//! Shared numerical machinery: a Nelder–Mead simplex minimizer, ridge-regularized
//! least squares via Cholesky, and a central-difference gradient checker.

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// XᵀX
    pub fn gram(&self) -> Matrix {
        let k = self.cols;
        let mut g = Matrix::zeros(k, k);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..k {
                let xi = row[i];
                if xi == 0.0 {
                    continue;
                }
                for j in i..k {
                    g.data[i * k + j] += xi * row[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                g.data[i * k + j] = g.data[j * k + i];
            }
        }
        g
    }

    /// Xᵀy
    pub fn t_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate().take(self.rows) {
            for (o, x) in out.iter_mut().zip(self.row(r)) {
                *o += x * yr;
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.rows;
        if a.cols != n {
            return Err(Error::Shape(format!("{}x{} is not square", a.rows, a.cols)));
        }
        let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > 1e-12 * scale) {
                return Err(Error::Singular(format!("pivot {j} is {diag:e}")));
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[(i, k)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[(k, i)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }

    /// Diagonal of A⁻¹.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let n = self.l.rows;
        (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                self.solve(&e)[i]
            })
            .collect()
    }
}

/// Ridge solution of (XᵀX + λI)β = Xᵀy with a single penalty on every column.
pub fn ridge_solve(design: &Matrix, targets: &[f64], penalty: f64) -> Result<Vec<f64>> {
    ridge_solve_weighted(design, targets, &vec![penalty; design.cols()])
}

/// Ridge solution with a per-column penalty; a zero entry leaves that column
/// unpenalized (e.g. an intercept).
pub fn ridge_solve_weighted(design: &Matrix, targets: &[f64], penalties: &[f64]) -> Result<Vec<f64>> {
    if design.rows() == 0 || design.cols() == 0 {
        return Err(Error::Shape("design matrix is empty".into()));
    }
    if targets.len() != design.rows() {
        return Err(Error::Shape(format!(
            "{} targets for {} rows",
            targets.len(),
            design.rows()
        )));
    }
    if penalties.len() != design.cols() {
        return Err(Error::Shape(format!(
            "{} penalties for {} columns",
            penalties.len(),
            design.cols()
        )));
    }
    if let Some(p) = penalties.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidArgument(format!("penalty must be finite and >= 0, got {p}")));
    }
    let mut a = design.gram();
    for (i, p) in penalties.iter().enumerate() {
        a[(i, i)] += p;
    }
    let chol = Cholesky::new(&a).map_err(|_| {
        if penalties.iter().all(|p| *p > 0.0) {
            Error::Singular("penalized normal equations are not positive definite".into())
        } else {
            Error::Singular("design is rank deficient; use a positive penalty".into())
        }
    })?;
    Ok(chol.solve(&design.t_mul_vec(targets)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub best: Vec<f64>,
    pub best_loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex minimization with reflection 1, expansion 2, contraction
/// 0.5 and shrink 0.5. The initial simplex steps each coordinate by 5% of its
/// value, or by 0.00025 when it is zero. Converges when the spread of vertex
/// losses drops below `tolerance`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], tolerance: f64, max_iter: usize) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot optimize a zero-dimensional function".into()));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] = if v[i] != 0.0 { v[i] * 1.05 } else { 0.00025 };
        simplex.push(v);
    }
    let mut losses: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    loop {
        // Stable sort keeps the earliest vertex among ties, so x0 wins a flat start.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        losses = order.iter().map(|&i| losses[i]).collect();

        if iterations >= max_iter {
            break;
        }
        let spread = losses[n] - losses[0];
        if spread < tolerance || losses[n] == losses[0] {
            // A simplex straddling the minimum can have equal vertex losses; the
            // centroid exposes that case.
            let centre: Vec<f64> = (0..n)
                .map(|j| simplex.iter().map(|v| v[j]).sum::<f64>() / (n + 1) as f64)
                .collect();
            let fc = eval(&centre);
            if fc >= losses[0] - tolerance {
                converged = true;
                break;
            }
            iterations += 1;
            simplex[n] = centre;
            losses[n] = fc;
            continue;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let fr = eval(&xr);
        if fr < losses[0] {
            let xe = along(2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                losses[n] = fe;
            } else {
                simplex[n] = xr;
                losses[n] = fr;
            }
            continue;
        }
        if fr < losses[n - 1] {
            simplex[n] = xr;
            losses[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < losses[n] {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < losses[n].min(fr) {
            simplex[n] = xc;
            losses[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            losses[i] = eval(&shrunk);
            simplex[i] = shrunk;
        }
    }
    Ok(OptimResult {
        best: simplex[0].clone(),
        best_loss: losses[0],
        iterations,
        converged,
    })
}

/// Central-difference step used by [`grad_check`] for coordinate value `x`.
pub fn default_step(x: f64) -> f64 {
    (1e-7 * x.abs()).max(1e-6)
}

/// Largest relative error between `analytic_grad(x)` and central differences of `f`.
pub fn grad_check<F, G>(f: F, analytic_grad: G, x: &[f64]) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
    G: FnOnce(&[f64]) -> Vec<f64>,
{
    grad_check_with(f, analytic_grad, x, default_step)
}

/// [`grad_check`] with a caller-chosen step rule.
pub fn grad_check_with<F, G, H>(mut f: F, analytic_grad: G, x: &[f64], step: H) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
    G: FnOnce(&[f64]) -> Vec<f64>,
    H: Fn(f64) -> f64,
{
    let analytic = analytic_grad(x);
    if analytic.len() != x.len() {
        return Err(Error::Shape(format!(
            "gradient has {} entries for {} coordinates",
            analytic.len(),
            x.len()
        )));
    }
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let h = step(x[i]);
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("objective near coordinate {i}")));
        }
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
        worst = worst.max(err);
    }
    Ok(worst)
}
