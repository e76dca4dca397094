//! Dense inner loops shared by the envelope convolution and the autoencoder.
//!
//! Accumulation order is fixed by the code (four interleaved partial sums),
//! so results are bit-identical across targets and vector widths.

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Four dot products sharing `a`; each equals `dot(a, b[k])` bit for bit.
#[inline]
pub(crate) fn dot4(a: &[f64], b: [&[f64]; 4]) -> [f64; 4] {
    let n = a.len();
    debug_assert!(b.iter().all(|x| x.len() == n));
    let b = [&b[0][..n], &b[1][..n], &b[2][..n], &b[3][..n]];
    let mut acc = [[0.0f64; 4]; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        let w = [a[i], a[i + 1], a[i + 2], a[i + 3]];
        for k in 0..4 {
            acc[k][0] += w[0] * b[k][i];
            acc[k][1] += w[1] * b[k][i + 1];
            acc[k][2] += w[2] * b[k][i + 2];
            acc[k][3] += w[3] * b[k][i + 3];
        }
    }
    let mut out = [0.0; 4];
    for k in 0..4 {
        let mut tail = 0.0;
        for i in 4 * chunks..n {
            tail += a[i] * b[k][i];
        }
        out[k] = (acc[k][0] + acc[k][1]) + (acc[k][2] + acc[k][3]) + tail;
    }
    out
}

/// `y += alpha[0] * x[0]; ...; y += alpha[3] * x[3]` in one sweep, with the
/// same rounding as four successive [`axpy`] calls.
#[inline]
pub(crate) fn axpy4(alpha: [f64; 4], x: [&[f64]; 4], y: &mut [f64]) {
    let n = y.len();
    debug_assert!(x.iter().all(|v| v.len() == n));
    let x = [&x[0][..n], &x[1][..n], &x[2][..n], &x[3][..n]];
    for i in 0..n {
        let mut v = y[i];
        v += alpha[0] * x[0][i];
        v += alpha[1] * x[1][i];
        v += alpha[2] * x[2][i];
        v += alpha[3] * x[3][i];
        y[i] = v;
    }
}
