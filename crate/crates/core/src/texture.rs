//! Seeded value-noise textures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::Patch;

/// Two-octave value noise: lattice values every `cell` pixels (and every
/// `cell / 2` at half amplitude), smoothstep-interpolated and mapped to
/// `mean +- amplitude`, clamped to `[0, 1]`.
pub fn value_noise(width: usize, height: usize, cell: f64, seed: u64, mean: f64, amplitude: f64) -> Patch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let octaves = [(cell.max(1.0), 1.0), ((cell / 2.0).max(1.0), 0.5)];
    let lattices: Vec<(f64, usize, Vec<f64>)> = octaves
        .iter()
        .map(|&(c, _)| {
            let lw = (width as f64 / c).ceil() as usize + 2;
            let lh = (height as f64 / c).ceil() as usize + 2;
            let vals = (0..lw * lh).map(|_| rng.random_range(-1.0..1.0)).collect();
            (c, lw, vals)
        })
        .collect();
    let norm: f64 = octaves.iter().map(|o| o.1).sum();
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    Patch::from_fn(width, height, |x, y| {
        let mut v = 0.0;
        for ((c, lw, vals), &(_, amp)) in lattices.iter().zip(&octaves) {
            let gx = x as f64 / c;
            let gy = y as f64 / c;
            let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
            let (fx, fy) = (smooth(gx - ix as f64), smooth(gy - iy as f64));
            let at = |i: usize, j: usize| vals[j * lw + i];
            let top = at(ix, iy) * (1.0 - fx) + at(ix + 1, iy) * fx;
            let bot = at(ix, iy + 1) * (1.0 - fx) + at(ix + 1, iy + 1) * fx;
            v += amp * (top * (1.0 - fy) + bot * fy);
        }
        (mean + amplitude * v / norm).clamp(0.0, 1.0) as f32
    })
}

/// Zero-mean, unit-variance copy of a patch as f64 values (all zeros for a
/// flat patch).
pub fn standardize(p: &Patch) -> Vec<f64> {
    let n = p.data().len().max(1) as f64;
    let mean = p.sum() / n;
    let var = p.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    p.data()
        .iter()
        .map(|&v| if sd > 0.0 { (v as f64 - mean) / sd } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let a = value_noise(40, 30, 6.0, 11, 0.5, 0.4);
        let b = value_noise(40, 30, 6.0, 11, 0.5, 0.4);
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_ne!(a, value_noise(40, 30, 6.0, 12, 0.5, 0.4));
    }

    #[test]
    fn standardized_moments() {
        let z = standardize(&value_noise(16, 16, 4.0, 3, 0.5, 0.35));
        let m: f64 = z.iter().sum::<f64>() / 256.0;
        let v: f64 = z.iter().map(|x| x * x).sum::<f64>() / 256.0;
        assert!(m.abs() < 1e-9 && (v - 1.0).abs() < 1e-9);
        assert!(standardize(&Patch::filled(4, 4, 0.3)).iter().all(|&x| x == 0.0));
    }
}
