//! Discrete Fourier transforms of arbitrary length.
//!
//! Powers of two use an iterative radix-2 Cooley-Tukey pass. Every other
//! length goes through Bluestein's chirp-z reformulation on top of a
//! power-of-two transform, so whole recordings of any size are O(n log n).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Precomputed transform of a fixed length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Radix2(Radix2),
    Bluestein {
        inner: Radix2,
        chirp: Vec<Complex64>,
        kernel: Vec<Complex64>,
    },
}

#[derive(Debug, Clone)]
struct Radix2 {
    n: usize,
    twiddles: Vec<Complex64>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddles = (0..n / 2).map(|k| unit(-2.0 * PI * k as f64 / n as f64)).collect();
        Self { n, twiddles }
    }

    fn forward(&self, a: &mut [Complex64]) {
        let n = self.n;
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                a.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for block in a.chunks_exact_mut(len) {
                let (lo, hi) = block.split_at_mut(half);
                for (j, (u, v)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let t = *v * self.twiddles[j * stride];
                    *v = *u - t;
                    *u += t;
                }
            }
            len <<= 1;
        }
    }

    fn inverse_unscaled(&self, a: &mut [Complex64]) {
        conj_all(a);
        self.forward(a);
        conj_all(a);
    }
}

fn unit(angle: f64) -> Complex64 {
    Complex64::new(libm::cos(angle), libm::sin(angle))
}

fn conj_all(a: &mut [Complex64]) {
    for z in a {
        z.im = -z.im;
    }
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("transform length must be positive"));
        }
        if n.is_power_of_two() {
            return Ok(Self {
                n,
                kind: Kind::Radix2(Radix2::new(n)),
            });
        }
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(m);
        // exp(-i*pi*k^2/n); k^2 is reduced mod 2n so the angle stays small
        let two_n = 2 * n as u128;
        let chirp: Vec<Complex64> = (0..n)
            .map(|k| {
                let r = (k as u128 * k as u128) % two_n;
                unit(-PI * r as f64 / n as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            let c = chirp[k].conj();
            kernel[k] = c;
            kernel[m - k] = c;
        }
        inner.forward(&mut kernel);
        Ok(Self {
            n,
            kind: Kind::Bluestein { inner, chirp, kernel },
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform in place. Panics if `data.len()` differs
    /// from the planned length.
    pub fn forward(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n, "fft length mismatch");
        match &self.kind {
            Kind::Radix2(r) => r.forward(data),
            Kind::Bluestein { inner, chirp, kernel } => {
                let m = inner.n;
                let mut work = vec![Complex64::new(0.0, 0.0); m];
                for ((w, x), c) in work.iter_mut().zip(data.iter()).zip(chirp) {
                    *w = x * c;
                }
                inner.forward(&mut work);
                for (w, k) in work.iter_mut().zip(kernel) {
                    *w *= k;
                }
                inner.inverse_unscaled(&mut work);
                let scale = 1.0 / m as f64;
                for ((x, w), c) in data.iter_mut().zip(&work).zip(chirp) {
                    *x = w * c * scale;
                }
            }
        }
    }

    /// Inverse transform in place, including the 1/n factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        conj_all(data);
        self.forward(data);
        let scale = 1.0 / self.n as f64;
        for z in data.iter_mut() {
            *z = z.conj() * scale;
        }
    }
}

/// Forward transform of a real sequence: X[k] = sum_j x[j] e^{-2 pi i jk/N}.
pub fn dft(samples: &[f64]) -> Result<Vec<Complex64>> {
    let plan = Fft::new(samples.len())?;
    let mut data: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    plan.forward(&mut data);
    Ok(data)
}

/// Inverse of [`dft`], scaled by 1/N.
pub fn inverse_dft(spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = Fft::new(spectrum.len())?;
    let mut data = spectrum.to_vec();
    plan.inverse(&mut data);
    Ok(data)
}
