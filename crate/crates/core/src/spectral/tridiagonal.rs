//! Symmetric tridiagonal eigenproblems: Sturm bisection for eigenvalues,
//! inverse iteration (pivoted elimination) for the lowest eigenvector, and
//! Householder reduction of small dense matrices to tridiagonal form.

/// Number of eigenvalues strictly below `x`.
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..alpha.len() {
        let off = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] / d };
        d = alpha[i] - x - off;
        if d == 0.0 {
            d = -tiny;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(alpha: &[f64], beta: &[f64]) -> (f64, f64) {
    let k = alpha.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < k { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    (lo, hi)
}

/// Smallest eigenvalue by bisection, to a few ulps.
pub fn lowest_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    kth_smallest(alpha, beta, 0)
}

/// Eigenvalue `k` (0-based, counting multiplicity) by bisection.
pub fn kth_smallest(alpha: &[f64], beta: &[f64], k: usize) -> f64 {
    let (mut lo, mut hi) = gershgorin(alpha, beta);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    lo -= 1e-12 * span;
    hi += 1e-12 * span;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(alpha, beta, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Reduce a dense symmetric matrix (row-major, overwritten) to tridiagonal
/// form by Householder reflections. Returns the diagonal and off-diagonal.
pub fn householder_tridiagonalize(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n {
        diag.push(a[k * n + k]);
        if k + 1 >= n {
            break;
        }
        let lo = k + 1;
        if lo + 1 == n {
            off.push(a[lo * n + k]);
            continue;
        }
        let xnorm = (lo..n).map(|i| a[i * n + k].powi(2)).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            off.push(0.0);
            continue;
        }
        let x0 = a[lo * n + k];
        let alpha = if x0 >= 0.0 { -xnorm } else { xnorm };
        for i in lo..n {
            v[i] = a[i * n + k];
        }
        v[lo] -= alpha;
        // Nonzero because alpha has the opposite sign of x0.
        let vnorm = (lo..n).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
        for vi in &mut v[lo..n] {
            *vi /= vnorm;
        }
        off.push(alpha);
        // p = A22 v, w = p − (vᵀp) v, A22 −= 2 (v wᵀ + w vᵀ).
        for i in lo..n {
            let row = &a[i * n + lo..i * n + n];
            p[i] = row.iter().zip(&v[lo..n]).map(|(x, y)| x * y).sum();
        }
        let kv: f64 = (lo..n).map(|i| v[i] * p[i]).sum();
        for i in lo..n {
            p[i] -= kv * v[i];
        }
        for i in lo..n {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut a[i * n + lo..i * n + n];
            for (j, x) in row.iter_mut().enumerate() {
                *x -= 2.0 * (vi * p[lo + j] + wi * v[lo + j]);
            }
        }
    }
    (diag, off)
}

/// Solve `(T − shift·I) y = rhs` by Gaussian elimination with partial
/// pivoting; `rhs` is overwritten with the solution.
fn solve_shifted(alpha: &[f64], beta: &[f64], shift: f64, rhs: &mut [f64]) {
    let k = alpha.len();
    if k == 1 {
        let d = alpha[0] - shift;
        rhs[0] /= if d == 0.0 { f64::EPSILON } else { d };
        return;
    }
    // Row i of U holds (d, u1, u2) on columns i, i+1, i+2.
    let mut d: Vec<f64> = alpha.iter().map(|a| a - shift).collect();
    let mut u1: Vec<f64> = beta.to_vec();
    u1.push(0.0);
    let mut u2 = vec![0.0; k];
    let mut sub: Vec<f64> = beta.to_vec();
    let scale = alpha
        .iter()
        .map(|a| a.abs())
        .chain(beta.iter().map(|b| b.abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let guard = f64::EPSILON * scale;
    for i in 0..k - 1 {
        if sub[i].abs() > d[i].abs() {
            // Swap rows i and i+1.
            let (ri0, ri1, ri2) = (d[i], u1[i], u2[i]);
            d[i] = sub[i];
            u1[i] = d[i + 1];
            u2[i] = if i + 1 < k - 1 { u1[i + 1] } else { 0.0 };
            let f = ri0 / d[i];
            d[i + 1] = ri1 - f * u1[i];
            if i + 1 < k - 1 {
                u1[i + 1] = ri2 - f * u2[i];
            }
            rhs.swap(i, i + 1);
            rhs[i + 1] -= f * rhs[i];
        } else {
            if d[i] == 0.0 {
                d[i] = guard;
            }
            let f = sub[i] / d[i];
            d[i + 1] -= f * u1[i];
            if i + 1 < k - 1 {
                u1[i + 1] -= f * u2[i];
            }
            rhs[i + 1] -= f * rhs[i];
        }
        sub[i] = 0.0;
    }
    if d[k - 1] == 0.0 {
        d[k - 1] = guard;
    }
    for i in (0..k).rev() {
        let mut s = rhs[i];
        if i + 1 < k {
            s -= u1[i] * rhs[i + 1];
        }
        if i + 2 < k {
            s -= u2[i] * rhs[i + 2];
        }
        rhs[i] = s / d[i];
    }
}

/// Lowest eigenvalue and a unit eigenvector.
pub fn lowest_eigenpair(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let theta = lowest_eigenvalue(alpha, beta);
    if k == 1 {
        return (theta, vec![1.0]);
    }
    let mut y: Vec<f64> = (0..k).map(|i| 1.0 + 0.1 * ((i * 7919 % 13) as f64)).collect();
    for _ in 0..3 {
        solve_shifted(alpha, beta, theta, &mut y);
        let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(nrm.is_finite() && nrm > 0.0) {
            break;
        }
        y.iter_mut().for_each(|v| *v /= nrm);
    }
    (theta, y)
}
