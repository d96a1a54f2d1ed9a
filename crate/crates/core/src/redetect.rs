//! Global re-detection for a lost target: a grid of search tiles visited in a
//! shuffled order, and a spatio-temporal penalty on candidate scores.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{BBox, Frame, Point, Rect};
use crate::tracker::{Localization, Localizer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    pub w_b: f64,
    pub w_d: f64,
    pub w_t: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self {
            w_b: 0.99,
            w_d: 0.85,
            w_t: 0.02,
        }
    }
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w_b) || !(0.0..=1.0).contains(&self.w_d) || !(self.w_t >= 0.0) {
            return Err(Error::Config(format!(
                "penalty weights need 0 <= w_b <= 1, 0 <= w_d <= 1, w_t >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RedetectConfig {
    pub beta: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub tau_redet: f64,
    pub penalty: PenaltyParams,
}

impl Default for RedetectConfig {
    fn default() -> Self {
        Self {
            beta: 0.2,
            n_min: 2,
            n_max: 10,
            tau_redet: 0.25,
            penalty: PenaltyParams::default(),
        }
    }
}

impl RedetectConfig {
    pub fn validate(&self) -> Result<()> {
        self.penalty.validate()?;
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(Error::Config(format!(
                "search counts need 1 <= n_min <= n_max, got {}..{}",
                self.n_min, self.n_max
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!("search beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Where and when the target was last seen with confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LostContext {
    pub p_old: Point,
    pub t_old: u64,
    pub d_max: f64,
}

#[derive(Debug, Clone)]
pub struct SearchGrid {
    tiles: Vec<Rect>,
    tile_side: i64,
    stride: i64,
    visit_order: Vec<usize>,
    cursor: usize,
}

impl SearchGrid {
    pub fn tiles(&self) -> &[Rect] {
        &self.tiles
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn tile_side(&self) -> i64 {
        self.tile_side
    }

    pub fn stride(&self) -> i64 {
        self.stride
    }

    /// Returns the next `n` tile indices of the visit order (at most one full
    /// pass). An exhausted order is reshuffled; tiles already handed out in
    /// the same call are pushed to the back of the new order so a call never
    /// repeats a tile.
    pub fn next_indices<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> Vec<usize> {
        let n = n.min(self.tiles.len());
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.cursor == self.visit_order.len() {
                self.visit_order.shuffle(rng);
                let (mut fresh, taken): (Vec<usize>, Vec<usize>) =
                    self.visit_order.iter().partition(|i| !out.contains(*i));
                fresh.extend(taken);
                self.visit_order = fresh;
                self.cursor = 0;
            }
            out.push(self.visit_order[self.cursor]);
            self.cursor += 1;
        }
        out
    }

    pub fn next_tiles<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> Vec<Rect> {
        self.next_indices(n, rng)
            .into_iter()
            .map(|i| self.tiles[i])
            .collect()
    }
}

/// Tile origins along one axis: every `stride` while the tile still ends
/// short of `len`, then one tile flush with the far edge.
fn axis_positions(len: i64, tile: i64, stride: i64) -> Vec<i64> {
    let mut out = Vec::new();
    let mut p = 0;
    while p + tile < len {
        out.push(p);
        p += stride;
    }
    let last = (len - tile).max(0);
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

/// Builds the re-detection grid for a target of `target`'s size. Tile side
/// is `search_scale` times the target diagonal, clamped to the frame, with
/// half-tile stride.
pub fn build_grid<R: Rng + ?Sized>(
    frame_dims: (usize, usize),
    target: &BBox,
    search_scale: f64,
    rng: &mut R,
) -> SearchGrid {
    let (fw, fh) = (frame_dims.0 as i64, frame_dims.1 as i64);
    let side = ((search_scale * target.diagonal()).round() as i64).max(1);
    let stride = (side / 2).max(1);
    let (tw, th) = (side.min(fw), side.min(fh));
    let xs = axis_positions(fw, tw, stride);
    let ys = axis_positions(fh, th, stride);
    let tiles: Vec<Rect> = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| Rect::new(x, y, tw, th)))
        .collect();
    let mut visit_order: Vec<usize> = (0..tiles.len()).collect();
    visit_order.shuffle(rng);
    SearchGrid {
        tiles,
        tile_side: side,
        stride,
        visit_order,
        cursor: 0,
    }
}

/// Tiles to search per lost frame: `ceil(beta * sqrt(frame area / target
/// area))`, clamped to `[n_min, n_max]`.
pub fn num_searches(frame_dims: (usize, usize), target: &BBox, cfg: &RedetectConfig) -> usize {
    let af = (frame_dims.0 * frame_dims.1) as f64;
    let at = target.area();
    let raw = (cfg.beta * (af / at).sqrt()).ceil();
    let raw = if raw.is_finite() { raw.max(0.0) as usize } else { cfg.n_max };
    raw.clamp(cfg.n_min, cfg.n_max)
}

/// Distance- and time-penalized re-detection score.
pub fn penalize(s_new: f64, p_new: Point, ctx: &LostContext, t_new: u64, params: &PenaltyParams) -> Result<f64> {
    if !(ctx.d_max > 0.0) {
        return Err(Error::NonPositiveDiagonal(ctx.d_max));
    }
    let ratio = (p_new.distance(&ctx.p_old) / ctx.d_max).min(1.0);
    let dt = t_new.abs_diff(ctx.t_old) as f64;
    Ok(params.w_b * (1.0 - params.w_d * ratio * (-params.w_t * dt).exp()) * s_new)
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub tile: usize,
    pub localization: Localization,
    pub score: f64,
    pub penalized: f64,
}

#[derive(Debug, Clone)]
pub struct RedetectOutcome {
    /// Best candidate, present only when its penalized score beats the threshold.
    pub accepted: Option<Candidate>,
    pub evaluations: usize,
    pub best_s: f64,
    pub best_s_prime: f64,
}

/// Localizes in each listed tile and keeps the best penalized candidate.
/// `penalty = None` scores candidates by their raw peak.
#[allow(clippy::too_many_arguments)]
pub fn try_redetect<L: Localizer + ?Sized>(
    frame: &Frame,
    localizer: &L,
    grid: &SearchGrid,
    tiles: &[usize],
    ctx: &LostContext,
    penalty: Option<&PenaltyParams>,
    tau_redet: f64,
) -> Result<RedetectOutcome> {
    if !(ctx.d_max > 0.0) {
        return Err(Error::NonPositiveDiagonal(ctx.d_max));
    }
    let search_scale = localizer.search_scale();
    let candidates: Vec<Candidate> = tiles
        .par_iter()
        .map(|&i| {
            let loc = localizer.localize(frame, grid.tiles[i].center(), search_scale);
            let score = loc.peak();
            let penalized = match penalty {
                Some(p) => penalize(score.max(0.0), loc.bbox.center(), ctx, frame.index, p)
                    .expect("diagonal checked above"),
                None => score,
            };
            Candidate {
                tile: i,
                localization: loc,
                score,
                penalized,
            }
        })
        .collect();
    let best_s = candidates.iter().map(|c| c.score).fold(f64::NEG_INFINITY, f64::max);
    let best = candidates.into_iter().reduce(|a, b| {
        if b.penalized > a.penalized || (b.penalized == a.penalized && b.tile < a.tile) {
            b
        } else {
            a
        }
    });
    let best_s_prime = best.as_ref().map_or(f64::NEG_INFINITY, |c| c.penalized);
    Ok(RedetectOutcome {
        accepted: best.filter(|c| c.penalized > tau_redet),
        evaluations: tiles.len(),
        best_s,
        best_s_prime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn covers(grid: &SearchGrid, w: i64, h: i64) -> bool {
        (0..h).all(|y| (0..w).all(|x| grid.tiles().iter().any(|t| t.contains(x, y))))
    }

    #[test]
    fn grid_counts() {
        // Side 50 from a target of diagonal 10 at scale 5.
        let target = BBox::new(0.0, 0.0, 6.0, 8.0);
        let g = build_grid((100, 100), &target, 5.0, &mut rng(0));
        assert_eq!((g.tile_side(), g.stride()), (50, 25));
        assert_eq!(g.len(), 9);
        assert!(covers(&g, 100, 100));

        let big = BBox::new(0.0, 0.0, 60.0, 80.0);
        let g = build_grid((100, 90), &big, 5.0, &mut rng(0));
        assert_eq!(g.len(), 1);
        assert_eq!(g.tiles()[0], Rect::new(0, 0, 100, 90));
    }

    #[test]
    fn default_suite_grid() {
        let target = BBox::new(0.0, 0.0, 16.0, 16.0);
        let g = build_grid((320, 240), &target, 5.0, &mut rng(1));
        assert_eq!(g.len(), 20);
        assert_eq!(num_searches((320, 240), &target, &RedetectConfig::default()), 4);
        assert!(covers(&g, 320, 240));
        for t in g.tiles() {
            assert!(t.x >= 0 && t.y >= 0 && t.x + t.w <= 320 && t.y + t.h <= 240);
        }
    }

    #[test]
    fn search_counts() {
        let cfg = RedetectConfig::default();
        assert_eq!(num_searches((1280, 720), &BBox::new(0.0, 0.0, 64.0, 64.0), &cfg), 3);
        assert_eq!(num_searches((1280, 720), &BBox::new(0.0, 0.0, 8.0, 8.0), &cfg), 10);
        assert_eq!(num_searches((100, 100), &BBox::new(0.0, 0.0, 100.0, 100.0), &cfg), 2);
    }

    #[test]
    fn tiles_cycle_without_replacement() {
        let target = BBox::new(0.0, 0.0, 16.0, 16.0);
        let mut g = build_grid((320, 240), &target, 5.0, &mut rng(2));
        let mut r = rng(3);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..5 {
            seen.extend(g.next_indices(4, &mut r));
        }
        assert_eq!(seen.len(), 20);
        // Wrapping calls never repeat a tile.
        for _ in 0..50 {
            let call = g.next_indices(7, &mut r);
            let unique: std::collections::HashSet<_> = call.iter().collect();
            assert_eq!(unique.len(), 7);
        }
        let all = g.next_indices(100, &mut r);
        assert_eq!(all.len(), 20);
    }

    #[test]
    fn tile_order_is_seeded() {
        let target = BBox::new(0.0, 0.0, 16.0, 16.0);
        let run = |seed| {
            let mut g = build_grid((320, 240), &target, 5.0, &mut rng(seed));
            let mut r = rng(seed + 1);
            (0..12).flat_map(|_| g.next_indices(3, &mut r)).collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn penalty_examples() {
        let ctx = LostContext {
            p_old: Point::new(0.0, 0.0),
            t_old: 0,
            d_max: 600.0,
        };
        let no_base = PenaltyParams { w_b: 1.0, ..Default::default() };
        assert!((penalize(0.8, ctx.p_old, &ctx, 4, &no_base).unwrap() - 0.8).abs() < 1e-15);
        let off = PenaltyParams { w_b: 0.9, w_d: 0.0, w_t: 0.02 };
        assert!((penalize(1.0, Point::new(300.0, 0.0), &ctx, 4, &off).unwrap() - 0.9).abs() < 1e-15);
        let v = penalize(0.9, Point::new(300.0, 0.0), &ctx, 25, &PenaltyParams::default()).unwrap();
        assert!((v - 0.661322).abs() < 5e-7, "{v}");
        let bad = LostContext { d_max: 0.0, ..ctx };
        assert!(penalize(0.5, ctx.p_old, &bad, 1, &PenaltyParams::default()).is_err());
    }

    proptest! {
        #[test]
        fn penalty_bounds_and_monotonicity(
            s in 0.0f64..2.0, w_b in 0.0f64..=1.0, w_d in 0.0f64..=1.0, w_t in 0.0f64..0.5,
            d1 in 0.0f64..=1.0, d2 in 0.0f64..=1.0, t1 in 0u64..500, t2 in 0u64..500,
        ) {
            let p = PenaltyParams { w_b, w_d, w_t };
            let ctx = LostContext { p_old: Point::new(0.0, 0.0), t_old: 0, d_max: 100.0 };
            let at = |d: f64, t: u64| penalize(s, Point::new(d * 100.0, 0.0), &ctx, t, &p).unwrap();
            let v = at(d1, t1);
            prop_assert!(v <= w_b * s + 1e-12 && v >= w_b * (1.0 - w_d) * s - 1e-12);
            let (dn, df) = (d1.min(d2), d1.max(d2));
            prop_assert!(at(df, t1) <= at(dn, t1) + 1e-12);
            let (tn, tf) = (t1.min(t2), t1.max(t2));
            prop_assert!(at(d1, tf) >= at(d1, tn) - 1e-12);
        }
    }
}
