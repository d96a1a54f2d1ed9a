//! Row/column 2-D FFT over row-major complex buffers.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform, normalized so `inverse(forward(x)) == x`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_inv, &self.col_inv);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn run(&self, data: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len());
        let (w, h) = (self.width, self.height);
        rows.process(data);
        let mut t = vec![Complex64::default(); w * h];
        transpose::transpose(data, &mut t, w, h);
        cols.process(&mut t);
        transpose::transpose(&t, data, h, w);
    }

    /// Forward transform of a real buffer.
    pub fn forward_real(&self, real: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = real.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Forward transforms of two real buffers with one complex transform.
    pub fn forward_real_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut z: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        self.forward(&mut z);
        let (w, h) = (self.width, self.height);
        let mut fa = Vec::with_capacity(w * h);
        let mut fb = Vec::with_capacity(w * h);
        for ky in 0..h {
            let my = ((h - ky) % h) * w;
            for kx in 0..w {
                let zk = z[ky * w + kx];
                let zm = z[my + (w - kx) % w].conj();
                fa.push((zk + zm) * 0.5);
                fb.push(Complex64::new(0.0, -0.5) * (zk - zm));
            }
        }
        (fa, fb)
    }

    /// For each frequency index, the index holding its complex conjugate
    /// when the input is real.
    pub fn conjugate_index(&self) -> Vec<usize> {
        let (w, h) = (self.width, self.height);
        (0..h)
            .flat_map(|ky| (0..w).map(move |kx| ((h - ky) % h) * w + (w - kx) % w))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_dft() {
        let (w, h) = (5, 3);
        let real: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 11) as f64 - 4.0).collect();
        let fft = Fft2::new(w, h);
        let got = fft.forward_real(&real);
        for ky in 0..h {
            for kx in 0..w {
                let mut acc = Complex64::default();
                for y in 0..h {
                    for x in 0..w {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * ((kx * x) as f64 / w as f64 + (ky * y) as f64 / h as f64);
                        acc += Complex64::from_polar(real[y * w + x], phase);
                    }
                }
                assert!((got[ky * w + kx] - acc).norm() < 1e-9);
            }
        }
        let mut back = got.clone();
        fft.inverse(&mut back);
        for (a, b) in back.iter().zip(&real) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
        let conj = fft.conjugate_index();
        for (k, &m) in conj.iter().enumerate() {
            assert!((got[k] - got[m].conj()).norm() < 1e-9);
        }
        let other: Vec<f64> = real.iter().map(|v| v * v - 3.0).collect();
        let (pa, pb) = fft.forward_real_pair(&real, &other);
        let ob = fft.forward_real(&other);
        for k in 0..w * h {
            assert!((pa[k] - got[k]).norm() < 1e-9 && (pb[k] - ob[k]).norm() < 1e-9);
        }
    }
}
