//! Erased-copy consensus: re-localize on copies of the frame with a small
//! random rectangle blanked out and downgrade the tracking state when the
//! copies disagree with the base prediction.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{erase_rect, iou, BBox, Frame, Point, Rect};
use crate::tracker::{Localization, Localizer, TrackState};

#[derive(Debug, Clone, PartialEq)]
pub struct ErasureConfig {
    pub k: usize,
    /// Rectangle edge range as fractions of the search-region side.
    pub size_range: (f64, f64),
    /// IoU at which a vote agrees with the base prediction.
    pub iou_agree: f64,
    pub agree_min: f64,
    pub rng_seed: u64,
    /// Lets full agreement lift Uncertain back to Normal. Off by default.
    pub allow_upgrade: bool,
}

impl Default for ErasureConfig {
    fn default() -> Self {
        Self {
            k: 8,
            size_range: (0.05, 0.15),
            iou_agree: 0.5,
            agree_min: 0.6,
            rng_seed: 17,
            allow_upgrade: false,
        }
    }
}

impl ErasureConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.size_range;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(Error::Config(format!(
                "erase size range must satisfy 0 < min <= max < 1, got ({lo}, {hi})"
            )));
        }
        if !(0.0 < self.iou_agree && self.iou_agree < 1.0) {
            return Err(Error::Config(format!(
                "agreement IoU must be in (0, 1), got {}",
                self.iou_agree
            )));
        }
        if !(0.0..=1.0).contains(&self.agree_min) {
            return Err(Error::Config(format!(
                "minimum agreement must be in [0, 1], got {}",
                self.agree_min
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ConsensusResult {
    pub agreement: f64,
    pub votes: Vec<(BBox, f64)>,
    pub corrected_state: TrackState,
}

/// Draws `k` erase rectangles. Edge lengths are uniform in
/// `size_range * side` (side = longer edge of `search_region`); positions are
/// uniform over the part of the search region inside the frame, so every
/// rectangle lands on real pixels.
pub fn sample_rects<R: Rng + ?Sized>(
    search_region: &Rect,
    frame_dims: (usize, usize),
    cfg: &ErasureConfig,
    rng: &mut R,
) -> Vec<Rect> {
    let side = search_region.w.max(search_region.h) as f64;
    let area = search_region
        .clip(frame_dims.0, frame_dims.1)
        .unwrap_or(*search_region);
    let (lo, hi) = cfg.size_range;
    let edge = |rng: &mut R| {
        let f = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        ((f * side).round() as i64).max(1)
    };
    (0..cfg.k)
        .map(|_| {
            let w = edge(rng);
            let h = edge(rng);
            let x = area.x + rng.random_range(0..=(area.w - w).max(0));
            let y = area.y + rng.random_range(0..=(area.h - h).max(0));
            let r = Rect::new(x, y, w, h);
            r.clip(frame_dims.0, frame_dims.1)
                .unwrap_or(Rect::new(r.x, r.y, 0, 0))
        })
        .collect()
}

/// Downgrades `prior` by one level when agreement is below `agree_min`.
pub fn correct_state(prior: TrackState, agreement: f64, cfg: &ErasureConfig) -> TrackState {
    if agreement < cfg.agree_min {
        match prior {
            TrackState::Normal | TrackState::HardNegative => TrackState::Uncertain,
            TrackState::Uncertain | TrackState::NotFound => TrackState::NotFound,
        }
    } else if cfg.allow_upgrade && prior == TrackState::Uncertain {
        TrackState::Normal
    } else {
        prior
    }
}

/// Fraction of votes whose box overlaps `base` by at least `threshold`.
pub fn agreement(votes: &[(BBox, f64)], base: &BBox, threshold: f64) -> f64 {
    if votes.is_empty() {
        return 1.0;
    }
    let agreeing = votes.iter().filter(|(b, _)| iou(b, base) >= threshold).count();
    agreeing as f64 / votes.len() as f64
}

/// Runs the erased-copy localizations at the base search center and scale.
/// The localizer is only read.
#[allow(clippy::too_many_arguments)]
pub fn evaluate<L: Localizer + ?Sized, R: Rng + ?Sized>(
    frame: &Frame,
    base: &Localization,
    prior: TrackState,
    localizer: &L,
    center: Point,
    search_scale: f64,
    cfg: &ErasureConfig,
    rng: &mut R,
) -> ConsensusResult {
    if cfg.k == 0 {
        return ConsensusResult {
            agreement: 1.0,
            votes: Vec::new(),
            corrected_state: prior,
        };
    }
    let region = localizer.search_region(center, search_scale).to_rect();
    let fill = frame.image.region_mean(&region);
    let rects = sample_rects(&region, (frame.width(), frame.height()), cfg, rng);
    let votes: Vec<(BBox, f64)> = rects
        .par_iter()
        .map(|r| {
            let erased = erase_rect(frame, r, fill);
            let loc = localizer.relocalize(&erased, center, search_scale, base);
            (loc.bbox, loc.peak())
        })
        .collect();
    let agreement = agreement(&votes, &base.bbox, cfg.iou_agree);
    ConsensusResult {
        agreement,
        corrected_state: correct_state(prior, agreement, cfg),
        votes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_k_gives_no_rects() {
        let cfg = ErasureConfig {
            k: 0,
            ..ErasureConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_rects(&Rect::new(0, 0, 100, 100), (200, 200), &cfg, &mut rng).is_empty());
    }

    #[test]
    fn degenerate_size_range_gives_fixed_edges() {
        let cfg = ErasureConfig {
            size_range: (0.1, 0.1),
            k: 50,
            ..ErasureConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let region = Rect::new(50, 50, 100, 100);
        for r in sample_rects(&region, (400, 400), &cfg, &mut rng) {
            assert_eq!((r.w, r.h), (10, 10));
            assert!(region.intersect(&r) == Some(r));
        }
    }

    #[test]
    fn rects_are_seed_deterministic_and_in_frame() {
        let cfg = ErasureConfig::default();
        let region = Rect::new(-40, -30, 120, 120);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_rects(&region, (64, 48), &cfg, &mut rng)
        };
        assert_eq!(draw(9), draw(9));
        for r in draw(9) {
            assert!(r.x >= 0 && r.y >= 0 && r.x + r.w <= 64 && r.y + r.h <= 48);
            assert!(r.area() > 0);
        }
    }

    #[test]
    fn correction_table() {
        let cfg = ErasureConfig::default();
        use TrackState::*;
        assert_eq!(correct_state(Normal, 1.0, &cfg), Normal);
        assert_eq!(correct_state(Normal, 0.0, &cfg), Uncertain);
        assert_eq!(correct_state(HardNegative, 0.0, &cfg), Uncertain);
        assert_eq!(correct_state(Uncertain, 0.0, &cfg), NotFound);
        assert_eq!(correct_state(NotFound, 0.0, &cfg), NotFound);
        assert_eq!(correct_state(Uncertain, 1.0, &cfg), Uncertain);
        let up = ErasureConfig {
            allow_upgrade: true,
            ..cfg
        };
        assert_eq!(correct_state(Uncertain, 1.0, &up), Normal);
    }

    #[test]
    fn correction_never_raises_confidence_by_default() {
        let cfg = ErasureConfig::default();
        for s in TrackState::ALL {
            for a in [0.0, 0.3, 0.59, 0.6, 0.9, 1.0] {
                assert!(correct_state(s, a, &cfg).rank() <= s.rank());
            }
        }
    }

    #[test]
    fn agreement_ignores_vote_order() {
        let base = BBox::new(0.0, 0.0, 10.0, 10.0);
        let mut votes = vec![
            (base, 1.0),
            (BBox::new(50.0, 0.0, 10.0, 10.0), 0.5),
            (BBox::new(1.0, 1.0, 10.0, 10.0), 0.9),
        ];
        let a = agreement(&votes, &base, 0.5);
        votes.reverse();
        assert_eq!(a, agreement(&votes, &base, 0.5));
        assert!((a - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(agreement(&[], &base, 0.5), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(ErasureConfig::default().validate().is_ok());
        let bad = ErasureConfig {
            size_range: (0.2, 0.1),
            ..ErasureConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
