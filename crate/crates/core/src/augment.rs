//! Background-swapped training samples: the target pasted onto crops taken
//! from outside the search region.

use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::{composite, resample_unchecked, BBox, Frame, Patch, Rect};
use crate::pgm;
use crate::tracker::{Localizer, Sample, TrackState};

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub n_first: usize,
    pub n_online: usize,
    pub tau_aug: f64,
    /// Optional directory of PGM images used when the frame itself has too
    /// little area outside the search region.
    pub bg_pool_dir: Option<PathBuf>,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            n_first: 5,
            n_online: 2,
            tau_aug: 0.5,
            bg_pool_dir: None,
            rng_seed: 23,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AugSample {
    /// Search-region-sized image with the target pasted in.
    pub image: Patch,
    pub sample: Sample,
}

/// Loads every `.pgm` file of `dir`, in file-name order.
pub fn load_pool(dir: &Path) -> Result<Vec<Patch>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    paths.iter().map(|p| pgm::read(p)).collect()
}

/// Crops of `search_region`'s size whose centers fall outside it. Centers
/// are rejection-sampled over the frame; when less than a tenth of the frame
/// lies outside the region, crops come from `pool` instead.
pub fn harvest_backgrounds<R: Rng + ?Sized>(
    frame: &Frame,
    search_region: &Rect,
    n: usize,
    pool: &[Patch],
    rng: &mut R,
) -> Result<Vec<Patch>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let (fw, fh) = (frame.width() as i64, frame.height() as i64);
    let inside = search_region.clip(frame.width(), frame.height()).map_or(0, |r| r.area());
    let exterior = fw * fh - inside;
    let (w, h) = (search_region.w.max(1) as usize, search_region.h.max(1) as usize);
    let fill = frame.image.mean();
    if exterior * 10 >= fw * fh {
        return Ok(exterior_centers((fw, fh), search_region, n, rng)
            .into_iter()
            .map(|(cx, cy)| {
                let region = BBox::new(
                    (cx - search_region.w / 2) as f64,
                    (cy - search_region.h / 2) as f64,
                    w as f64,
                    h as f64,
                );
                resample_unchecked(&frame.image, &region, w, h, fill)
            })
            .collect());
    }
    if pool.is_empty() {
        return Err(Error::NoBackgroundSource);
    }
    Ok((0..n)
        .map(|_| {
            let img = &pool[rng.random_range(0..pool.len())];
            let region = if img.width() >= w && img.height() >= h {
                let x = rng.random_range(0..=img.width() - w);
                let y = rng.random_range(0..=img.height() - h);
                BBox::new(x as f64, y as f64, w as f64, h as f64)
            } else {
                BBox::new(0.0, 0.0, img.width() as f64, img.height() as f64)
            };
            resample_unchecked(img, &region, w, h, img.mean())
        })
        .collect())
}

/// Pixel positions in the frame but outside `region`, uniformly by rejection.
fn exterior_centers<R: Rng + ?Sized>(dims: (i64, i64), region: &Rect, n: usize, rng: &mut R) -> Vec<(i64, i64)> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let c = (rng.random_range(0..dims.0), rng.random_range(0..dims.1));
        if !region.contains(c.0, c.1) {
            out.push(c);
        }
    }
    out
}

/// Pastes the target at its place inside the search region onto each
/// background and turns the result into a training sample. `search_region`
/// must match the backgrounds' size.
pub fn make_samples<L: Localizer + ?Sized>(
    frame: &Frame,
    target: &BBox,
    search_region: &Rect,
    backgrounds: &[Patch],
    first_frame: bool,
    localizer: &L,
) -> Result<Vec<AugSample>> {
    if backgrounds.is_empty() {
        return Ok(Vec::new());
    }
    let t = target
        .to_rect()
        .clip(frame.width(), frame.height())
        .ok_or_else(|| Error::TargetOutsideFrame(format!("{target:?}")))?;
    let pixels = Patch::from_fn(t.w as usize, t.h as usize, |x, y| {
        frame.image.get(t.x as usize + x, t.y as usize + y)
    });
    let at = Rect::new(t.x - search_region.x, t.y - search_region.y, t.w, t.h);
    backgrounds
        .iter()
        .map(|bg| {
            let image = composite(&pixels, bg, &at)?;
            let sample = localizer.prepare_sample(&image, first_frame);
            Ok(AugSample { image, sample })
        })
        .collect()
}

/// Online augmentation only on confident, clean frames.
pub fn online_gate(state: TrackState, peak: f64, cfg: &AugmentConfig) -> bool {
    state == TrackState::Normal && peak >= cfg.tau_aug
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::texture::value_noise;
    use crate::tracker::{DcfTracker, TrackerConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame() -> Frame {
        Frame::new(value_noise(200, 150, 12.0, 5, 0.5, 0.3), 0)
    }

    #[test]
    fn empty_requests() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = frame();
        assert!(harvest_backgrounds(&f, &Rect::new(0, 0, 200, 150), 0, &[], &mut rng)
            .unwrap()
            .is_empty());
        let t = DcfTracker::new(TrackerConfig::default());
        let target = BBox::new(50.0, 50.0, 10.0, 10.0);
        assert!(make_samples(&f, &target, &Rect::new(0, 0, 60, 60), &[], true, &t)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn full_frame_region_needs_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = frame();
        let full = Rect::new(-10, -10, 220, 170);
        assert!(matches!(
            harvest_backgrounds(&f, &full, 2, &[], &mut rng),
            Err(Error::NoBackgroundSource)
        ));
        let pool = vec![value_noise(300, 300, 10.0, 1, 0.5, 0.2)];
        let crops = harvest_backgrounds(&f, &full, 2, &pool, &mut rng).unwrap();
        assert_eq!(crops.len(), 2);
        assert_eq!((crops[0].width(), crops[0].height()), (220, 170));
    }

    #[test]
    fn crops_come_from_outside_the_region() {
        let f = frame();
        let region = Rect::new(60, 40, 50, 50);
        for seed in 0..20 {
            let centers = exterior_centers((200, 150), &region, 3, &mut ChaCha8Rng::seed_from_u64(seed));
            let crops = harvest_backgrounds(&f, &region, 3, &[], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            for (c, &(cx, cy)) in crops.iter().zip(&centers) {
                assert!(!region.contains(cx, cy));
                assert_eq!(c.get(25, 25), f.image.get(cx as usize, cy as usize));
            }
        }
    }

    #[test]
    fn composited_target_pixels_are_exact() {
        let f = frame();
        let target = BBox::new(80.0, 60.0, 12.0, 10.0);
        let region = Rect::new(60, 40, 50, 50);
        let bgs = vec![Patch::filled(50, 50, 0.1), value_noise(50, 50, 5.0, 9, 0.4, 0.2)];
        let t = DcfTracker::new(TrackerConfig::default());
        let out = make_samples(&f, &target, &region, &bgs, true, &t).unwrap();
        assert_eq!(out.len(), 2);
        for a in &out {
            assert!(a.sample.store_in_memory);
            for y in 0..10 {
                for x in 0..12 {
                    assert_eq!(a.image.get(20 + x, 20 + y), f.image.get(80 + x, 60 + y));
                }
            }
        }
        let online = make_samples(&f, &target, &region, &bgs, false, &t).unwrap();
        assert!(online.iter().all(|a| !a.sample.store_in_memory));
    }

    #[test]
    fn gate() {
        let cfg = AugmentConfig::default();
        assert!(!online_gate(TrackState::NotFound, 1.0, &cfg));
        assert!(online_gate(TrackState::Normal, cfg.tau_aug, &cfg));
        assert!(!online_gate(TrackState::Normal, cfg.tau_aug - 1e-9, &cfg));
        assert!(!online_gate(TrackState::HardNegative, 0.99, &cfg));
    }
}
