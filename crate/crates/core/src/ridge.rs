//! Weighted multi-channel ridge regression for circulant (correlation
//! filter) data matrices.
//!
//! For samples `x_i` with `C` feature planes, labels `y_i` and weights `w_i`
//! the filter `h` minimizes
//!
//! ```text
//! sum_i w_i || sum_c h_c (*) x_ic - y_i ||^2 + mu ||h||^2
//! ```
//!
//! where `(*)` is 2-D circular convolution. The DFT diagonalizes every
//! circulant block, so the normal equations split into one `C x C`
//! Hermitian system per frequency, which is solved directly.

use rustfft::num_complex::Complex64;

pub struct WeightedSample<'a> {
    /// Channel-major spectra, `C * n` values.
    pub features: &'a [Complex64],
    /// Label spectrum, `n` values.
    pub label: &'a [Complex64],
    pub weight: f64,
}

/// Returns the channel-major filter spectrum.
///
/// `conj_index[k]` must give the frequency whose value is the conjugate of
/// frequency `k` for real signals; only one of each pair is solved.
pub fn solve<const C: usize>(
    samples: &[WeightedSample<'_>],
    n: usize,
    mu: f64,
    conj_index: &[usize],
) -> Vec<Complex64> {
    assert!(mu > 0.0, "ridge parameter must be positive");
    assert_eq!(conj_index.len(), n);
    // Frequencies solved directly; their mirrors are conjugates.
    let keep: Vec<usize> = (0..n).filter(|&k| conj_index[k] >= k).collect();
    let m = keep.len();
    // Sample-major accumulation streams each spectrum once.
    let mut a = vec![Complex64::default(); m * C * C];
    let mut b = vec![Complex64::default(); m * C];
    for s in samples {
        for (q, &k) in keep.iter().enumerate() {
            let mut x = [Complex64::default(); C];
            for (c, xc) in x.iter_mut().enumerate() {
                *xc = s.features[c * n + k];
            }
            let y = s.label[k];
            let aq = &mut a[q * C * C..(q + 1) * C * C];
            let bq = &mut b[q * C..(q + 1) * C];
            for i in 0..C {
                let xi = x[i].conj() * s.weight;
                bq[i] += xi * y;
                for j in i..C {
                    aq[i * C + j] += xi * x[j];
                }
            }
        }
    }
    let mut filter = vec![Complex64::default(); C * n];
    for (q, &k) in keep.iter().enumerate() {
        let mut aq = [[Complex64::default(); C]; C];
        let mut bq = [Complex64::default(); C];
        for i in 0..C {
            bq[i] = b[q * C + i];
            for j in i..C {
                aq[i][j] = a[q * C * C + i * C + j];
            }
        }
        for i in 0..C {
            aq[i][i] += mu;
            for j in 0..i {
                aq[i][j] = aq[j][i].conj();
            }
        }
        let h = solve_dense(aq, bq);
        let mirror = conj_index[k];
        for c in 0..C {
            filter[c * n + k] = h[c];
            if mirror != k {
                filter[c * n + mirror] = h[c].conj();
            }
        }
    }
    filter
}

/// Gaussian elimination with partial pivoting.
fn solve_dense<const C: usize>(
    mut a: [[Complex64; C]; C],
    mut b: [Complex64; C],
) -> [Complex64; C] {
    for col in 0..C {
        let pivot = (col..C)
            .max_by(|&p, &q| a[p][col].norm().total_cmp(&a[q][col].norm()))
            .unwrap_or(col);
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        for row in col + 1..C {
            let f = a[row][col] / d;
            if f == Complex64::default() {
                continue;
            }
            for k in col..C {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [Complex64::default(); C];
    for row in (0..C).rev() {
        let mut acc = b[row];
        for k in row + 1..C {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Response `sum_c h_c (*) z_c` in the frequency domain.
pub fn response_spectrum<const C: usize>(filter: &[Complex64], z: &[Complex64], n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| (0..C).map(|c| filter[c * n + k] * z[c * n + k]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft2::Fft2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Spatial-domain normal-equation residual, computed with direct circular
    /// sums and no transforms.
    pub(crate) fn spatial_residual(
        w: usize,
        h: usize,
        xs: &[Vec<f64>],
        ys: &[Vec<f64>],
        weights: &[f64],
        mu: f64,
        filt: &[f64],
    ) -> (f64, f64) {
        let n = w * h;
        let c_count = xs[0].len() / n;
        let at = |v: &[f64], c: usize, x: isize, y: isize| {
            let xx = x.rem_euclid(w as isize) as usize;
            let yy = y.rem_euclid(h as isize) as usize;
            v[c * n + yy * w + xx]
        };
        let mut lhs = vec![0.0; c_count * n];
        let mut rhs = vec![0.0; c_count * n];
        for ((x, y), &wt) in xs.iter().zip(ys).zip(weights) {
            // r = X h - 0, then X^T W r and X^T W y
            let mut r = vec![0.0; n];
            for my in 0..h as isize {
                for mx in 0..w as isize {
                    let mut acc = 0.0;
                    for c in 0..c_count {
                        for ny in 0..h as isize {
                            for nx in 0..w as isize {
                                acc += at(filt, c, nx, ny) * at(x, c, mx - nx, my - ny);
                            }
                        }
                    }
                    r[my as usize * w + mx as usize] = acc;
                }
            }
            for c in 0..c_count {
                for ny in 0..h as isize {
                    for nx in 0..w as isize {
                        let (mut a, mut b) = (0.0, 0.0);
                        for my in 0..h as isize {
                            for mx in 0..w as isize {
                                let xv = at(x, c, mx - nx, my - ny);
                                let m = my as usize * w + mx as usize;
                                a += r[m] * xv;
                                b += y[m] * xv;
                            }
                        }
                        let i = c * n + ny as usize * w + nx as usize;
                        lhs[i] += wt * a;
                        rhs[i] += wt * b;
                    }
                }
            }
        }
        let res = lhs
            .iter()
            .zip(&rhs)
            .zip(filt)
            .map(|((l, r), f)| (l + mu * f - r).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        (res, norm)
    }

    #[test]
    fn satisfies_spatial_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..10 {
            let (w, h) = (rng.random_range(3..7), rng.random_range(3..6));
            let n = w * h;
            let fft = Fft2::new(w, h);
            let m = rng.random_range(1..5);
            let xs: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let ys: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
            let spectra: Vec<Vec<Complex64>> = xs
                .iter()
                .map(|x| x.chunks(n).flat_map(|p| fft.forward_real(p)).collect())
                .collect();
            let labels: Vec<Vec<Complex64>> = ys.iter().map(|y| fft.forward_real(y)).collect();
            let samples: Vec<_> = (0..m)
                .map(|i| WeightedSample {
                    features: &spectra[i],
                    label: &labels[i],
                    weight: weights[i],
                })
                .collect();
            let mu = 0.01;
            let hf = solve::<3>(&samples, n, mu, &fft.conjugate_index());
            let mut spatial = Vec::with_capacity(3 * n);
            for c in 0..3 {
                let mut buf = hf[c * n..(c + 1) * n].to_vec();
                fft.inverse(&mut buf);
                assert!(buf.iter().all(|v| v.im.abs() < 1e-9), "trial {trial}");
                spatial.extend(buf.iter().map(|v| v.re));
            }
            let (res, norm) = spatial_residual(w, h, &xs, &ys, &weights, mu, &spatial);
            assert!(res <= 1e-6 * norm, "trial {trial}: {res} vs {norm}");
        }
    }

    #[test]
    fn dense_solver_recovers_known_solution() {
        let a = [
            [Complex64::new(4.0, 0.0), Complex64::new(1.0, 1.0)],
            [Complex64::new(1.0, -1.0), Complex64::new(3.0, 0.0)],
        ];
        let x = [Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)];
        let b = [
            a[0][0] * x[0] + a[0][1] * x[1],
            a[1][0] * x[0] + a[1][1] * x[1],
        ];
        let got = solve_dense(a, b);
        for i in 0..2 {
            assert!((got[i] - x[i]).norm() < 1e-12);
        }
    }
}
