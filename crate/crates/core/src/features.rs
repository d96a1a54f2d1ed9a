//! Intensity + gradient feature maps used by the correlation filter.

use crate::geom::Patch;

pub const CHANNELS: usize = 3;

/// Channel-major feature planes: intensity, horizontal gradient, vertical
/// gradient, each `width * height` long.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }
}

/// Separable Tukey window: flat in the middle, cosine-tapered over the outer
/// `taper / 2` fraction on each side.
pub fn tukey_window(width: usize, height: usize, taper: f64) -> Vec<f64> {
    let axis = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|i| {
                if taper <= 0.0 || n < 2 {
                    return 1.0;
                }
                let t = i as f64 / (n - 1) as f64;
                let edge = taper / 2.0;
                let d = t.min(1.0 - t);
                if d >= edge {
                    1.0
                } else {
                    0.5 * (1.0 - (std::f64::consts::PI * d / edge).cos())
                }
            })
            .collect()
    };
    let (wx, wy) = (axis(width), axis(height));
    wy.iter()
        .flat_map(|&a| wx.iter().map(move |&b| a * b))
        .collect()
}

/// Builds features from a patch already resampled to the feature grid.
///
/// Intensities are normalized to zero mean and unit variance (standard
/// deviation floored at `std_floor`), gradients are central differences of
/// the normalized patch, and every plane is multiplied by `window`. A flat
/// patch yields all-zero features.
pub fn extract(patch: &Patch, window: &[f64], std_floor: f64) -> FeatureMap {
    let (w, h) = (patch.width(), patch.height());
    let n = w * h;
    assert_eq!(window.len(), n);
    let raw: Vec<f64> = patch.data().iter().map(|&v| v as f64).collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    let var = raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    let mut data = vec![0.0; CHANNELS * n];
    if std <= 1e-9 {
        return FeatureMap {
            width: w,
            height: h,
            data,
        };
    }
    let scale = 1.0 / std.max(std_floor);
    let norm: Vec<f64> = raw.iter().map(|v| (v - mean) * scale).collect();
    let at = |x: usize, y: usize| norm[y * w + x];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let gx = 0.5 * (at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y));
            let gy = 0.5 * (at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1)));
            data[i] = norm[i] * window[i];
            data[n + i] = gx * window[i];
            data[2 * n + i] = gy * window[i];
        }
    }
    FeatureMap {
        width: w,
        height: h,
        data,
    }
}
