//! Small dense vector and matrix helpers. Everything here works on plain
//! slices; matrices are row-major.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| c * x).collect()
}

/// Euclidean distance between two vectors.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Forward difference `(v[i+1] - v[i])`, length `n - 1`.
pub fn diff(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Adjoint of [`diff`]: maps `R^{n-1}` back to `R^n`.
pub fn diff_adjoint(u: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(u.len() + 1, n.max(1));
    let mut out = vec![0.0; n];
    for (i, &ui) in u.iter().enumerate() {
        out[i] -= ui;
        out[i + 1] += ui;
    }
    out
}

/// Applies the forward difference `order` times.
pub fn diff_n(v: &[f64], order: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    for _ in 0..order {
        out = diff(&out);
    }
    out
}

pub fn diff_n_adjoint(u: &[f64], order: usize) -> Vec<f64> {
    let mut out = u.to_vec();
    for _ in 0..order {
        let n = out.len() + 1;
        out = diff_adjoint(&out, n);
    }
    out
}

/// Solves the symmetric positive definite system `a x = b` by Cholesky.
/// Returns `None` when a pivot is not positive.
pub fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Estimates the spectral norm of a linear map by power iteration on
/// `A^T A`, starting from a deterministic non-degenerate vector.
pub fn power_norm<F, G>(dim: usize, iterations: usize, apply: F, adjoint: G) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if dim == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..dim)
        .map(|i| 1.0 + 0.5 * ((i as f64 * 0.618_033_988_75).fract() - 0.5))
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let w = adjoint(&apply(&v));
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        estimate = nw.sqrt();
        v = w.into_iter().map(|x| x / nw).collect();
    }
    estimate
}
