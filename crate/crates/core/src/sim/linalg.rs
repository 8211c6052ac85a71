//! Row-major dense kernels. Both products stream the matrix once in memory
//! order.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `out = scale * M v` for an `n x d` matrix `m`.
pub fn matvec(m: &[f64], d: usize, v: &[f64], scale: f64, out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m.chunks_exact(d)) {
        *o = scale * dot(row, v);
    }
}

/// `out = scale * M^T w`.
pub fn matvec_t(m: &[f64], d: usize, w: &[f64], scale: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (wi, row) in w.iter().zip(m.chunks_exact(d)) {
        if *wi != 0.0 {
            axpy(*wi, row, out);
        }
    }
    if scale != 1.0 {
        out.iter_mut().for_each(|o| *o *= scale);
    }
}

/// Weighted quadratic form `sum w_j a_j b_j`.
pub fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_match_naive() {
        let (n, d) = (5, 7);
        let m: Vec<f64> = (0..n * d).map(|i| (i as f64 * 0.37).sin()).collect();
        let v: Vec<f64> = (0..d).map(|i| i as f64 - 2.0).collect();
        let w: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let mut o = vec![0.0; n];
        matvec(&m, d, &v, 2.0, &mut o);
        for i in 0..n {
            let e: f64 = (0..d).map(|j| m[i * d + j] * v[j]).sum::<f64>() * 2.0;
            assert!((o[i] - e).abs() < 1e-12);
        }
        let mut t = vec![0.0; d];
        matvec_t(&m, d, &w, 0.5, &mut t);
        for j in 0..d {
            let e: f64 = (0..n).map(|i| m[i * d + j] * w[i]).sum::<f64>() * 0.5;
            assert!((t[j] - e).abs() < 1e-12);
        }
    }
}
