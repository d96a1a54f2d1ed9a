//! Short-term localization: the [`Localizer`] interface and the built-in
//! discriminative correlation filter ([`DcfTracker`]).

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::features::{self, FeatureMap, CHANNELS};
use crate::fft2::Fft2;
use crate::geom::{resample_unchecked, BBox, Frame, Patch, Point};
use crate::ridge::{self, WeightedSample};

/// Per-frame tracking state, ordered from most to least confident.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrackState {
    Normal,
    HardNegative,
    Uncertain,
    NotFound,
}

impl TrackState {
    pub const ALL: [TrackState; 4] = [
        TrackState::Normal,
        TrackState::HardNegative,
        TrackState::Uncertain,
        TrackState::NotFound,
    ];

    /// Normal and HardNegative predictions are trusted for learning.
    pub fn is_reliable(self) -> bool {
        matches!(self, TrackState::Normal | TrackState::HardNegative)
    }

    /// Confidence rank; higher is more confident. Normal and HardNegative
    /// share the top rank.
    pub fn rank(self) -> u8 {
        match self {
            TrackState::Normal | TrackState::HardNegative => 2,
            TrackState::Uncertain => 1,
            TrackState::NotFound => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrackState::Normal => "normal",
            TrackState::HardNegative => "hard_negative",
            TrackState::Uncertain => "uncertain",
            TrackState::NotFound => "not_found",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub tau_not_found: f64,
    pub tau_uncertain: f64,
    /// Second peak ratio that marks a hard negative.
    pub second_peak_ratio: f64,
    /// Minimum peak separation for the second peak, as a fraction of the
    /// target diagonal.
    pub peak_exclusion: f64,
    pub learning_rate: f64,
    pub capacity: usize,
    pub ridge: f64,
    /// Search region side as a multiple of the target diagonal.
    pub search_scale: f64,
    pub feature_size: usize,
    /// Label Gaussian sigma as a fraction of the target diagonal.
    pub label_sigma: f64,
    pub scale_steps: Vec<f64>,
    /// Multiplier applied to peaks found at a scale other than 1.
    pub scale_penalty: f64,
    pub window_taper: f64,
    pub feature_std_floor: f64,
    /// A peak displaced by more than this fraction of the search side
    /// triggers one re-centered pass.
    pub recenter_fraction: f64,
    /// Weight of each extra (non-stored) sample relative to a new sample.
    pub extra_sample_weight: f64,
    pub rotate_degrees: f64,
    pub blur_sigma: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            tau_not_found: 0.10,
            tau_uncertain: 0.25,
            second_peak_ratio: 0.80,
            peak_exclusion: 0.3,
            learning_rate: 0.01,
            capacity: 50,
            ridge: 0.01,
            search_scale: 5.0,
            feature_size: 128,
            label_sigma: 0.1,
            scale_steps: vec![0.98, 1.0, 1.02],
            scale_penalty: 0.97,
            window_taper: 1.0,
            feature_std_floor: 0.05,
            recenter_fraction: 0.1,
            extra_sample_weight: 0.5,
            rotate_degrees: 8.0,
            blur_sigma: 1.0,
        }
    }
}

/// A training sample ready for the filter solve.
#[derive(Debug, Clone)]
pub struct Sample {
    pub features: FeatureMap,
    /// Spatial regression target on the feature grid.
    pub label: Arc<Vec<f64>>,
    pub weight: f64,
    pub store_in_memory: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Response-grid coordinates (cells), sub-cell refined for the main peak.
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct ResponseMap {
    pub width: usize,
    pub height: usize,
    pub scores: Vec<f64>,
    pub peak: Peak,
    pub second_peak: Option<Peak>,
    /// Source pixels per response cell.
    pub cell: f64,
    pub scale: f64,
}

impl ResponseMap {
    pub fn second_value(&self) -> f64 {
        self.second_peak.map_or(0.0, |p| p.value)
    }
}

#[derive(Debug, Clone)]
pub struct Localization {
    pub bbox: BBox,
    pub response: ResponseMap,
}

impl Localization {
    pub fn peak(&self) -> f64 {
        self.response.peak.value
    }
}

/// A short-term localizer. `localize` must not change the model; `init` and
/// `update` are the only mutators.
pub trait Localizer: Send + Sync {
    fn init(&mut self, frame: &Frame, target: BBox, extra: &[Sample]) -> Result<()>;

    fn localize(&self, frame: &Frame, center: Point, search_scale: f64) -> Localization;

    /// Localizes again with the scale fixed to the one `like` chose.
    fn relocalize(&self, frame: &Frame, center: Point, search_scale: f64, like: &Localization) -> Localization {
        let _ = like;
        self.localize(frame, center, search_scale)
    }

    fn update(&mut self, frame: &Frame, predicted: BBox, state: TrackState, extra: &[Sample]);

    /// Turns a target-centered, search-region-sized image into a sample.
    fn prepare_sample(&self, image: &Patch, store_in_memory: bool) -> Sample;

    fn classify(&self, response: &ResponseMap) -> TrackState;

    fn target_size(&self) -> (f64, f64);

    fn search_scale(&self) -> f64;

    /// Square search region around `center` at the model's target size.
    fn search_region(&self, center: Point, search_scale: f64) -> BBox {
        let (w, h) = self.target_size();
        let side = search_scale * w.hypot(h);
        BBox::from_center(center, side, side)
    }

    /// Hash of the learned model, for purity checks.
    fn fingerprint(&self) -> u64;
}

pub fn classify_state(rm: &ResponseMap, cfg: &TrackerConfig) -> TrackState {
    let peak = rm.peak.value;
    if !(peak >= cfg.tau_not_found) {
        TrackState::NotFound
    } else if peak < cfg.tau_uncertain {
        TrackState::Uncertain
    } else if rm.second_value() >= cfg.second_peak_ratio * peak {
        TrackState::HardNegative
    } else {
        TrackState::Normal
    }
}

#[derive(Debug, Clone)]
pub struct MemoryEntry {
    pub id: u64,
    spectrum: Arc<Vec<Complex64>>,
    label: Arc<Vec<Complex64>>,
    pub weight: f64,
    pub augmented: bool,
}

/// Weighted training samples, bounded by `capacity`. Entries flagged
/// `augmented` are only ever added at initialization and are never evicted.
#[derive(Debug, Clone)]
pub struct SampleMemory {
    entries: Vec<MemoryEntry>,
    capacity: usize,
}

impl SampleMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: Vec::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn clear(&mut self) {
        self.entries.clear();
    }

    /// Initialization-phase insert; returns false once full.
    fn push_initial(&mut self, entry: MemoryEntry) -> bool {
        if self.entries.len() >= self.capacity {
            return false;
        }
        self.entries.push(entry);
        true
    }

    /// Decays existing weights by `1 - rate` and inserts `entry` with weight
    /// `rate`, evicting the lowest-weight non-augmented entry when full.
    fn push_online(&mut self, mut entry: MemoryEntry, rate: f64) {
        for e in &mut self.entries {
            e.weight *= 1.0 - rate;
        }
        entry.weight = rate;
        entry.augmented = false;
        if self.entries.len() >= self.capacity {
            let victim = self
                .entries
                .iter()
                .enumerate()
                .filter(|(_, e)| !e.augmented)
                .min_by(|(_, a), (_, b)| a.weight.total_cmp(&b.weight).then(a.id.cmp(&b.id)))
                .map(|(i, _)| i);
            match victim {
                Some(i) => {
                    self.entries.remove(i);
                }
                None => {
                    self.normalize();
                    return;
                }
            }
        }
        self.entries.push(entry);
        self.normalize();
    }

    fn normalize(&mut self) {
        let total: f64 = self.entries.iter().map(|e| e.weight).sum();
        if total > 0.0 {
            for e in &mut self.entries {
                e.weight /= total;
            }
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }
}

/// Multi-channel correlation filter trained by ridge regression over a
/// weighted sample memory.
#[derive(Debug, Clone)]
pub struct DcfTracker {
    cfg: TrackerConfig,
    fft: Fft2,
    conj: Vec<usize>,
    window: Vec<f64>,
    label: Arc<Vec<f64>>,
    label_spectrum: Arc<Vec<Complex64>>,
    memory: SampleMemory,
    filter: Vec<Complex64>,
    target_size: (f64, f64),
    next_id: u64,
}

impl DcfTracker {
    pub fn new(cfg: TrackerConfig) -> Self {
        let n = cfg.feature_size;
        let fft = Fft2::new(n, n);
        let conj = fft.conjugate_index();
        let window = features::tukey_window(n, n, cfg.window_taper);
        // Label sigma in feature cells does not depend on the target size.
        let sigma = cfg.label_sigma * n as f64 / cfg.search_scale;
        let c = (n / 2) as f64;
        let label: Vec<f64> = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as f64, (i / n) as f64);
                (-((x - c).powi(2) + (y - c).powi(2)) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let label_spectrum = Arc::new(fft.forward_real(&label));
        Self {
            memory: SampleMemory::new(cfg.capacity),
            cfg,
            fft,
            conj,
            window,
            label: Arc::new(label),
            label_spectrum,
            filter: Vec::new(),
            target_size: (0.0, 0.0),
            next_id: 0,
        }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn memory(&self) -> &SampleMemory {
        &self.memory
    }

    pub fn is_initialized(&self) -> bool {
        !self.filter.is_empty()
    }

    pub fn label(&self) -> &Arc<Vec<f64>> {
        &self.label
    }

    fn cells(&self) -> usize {
        self.cfg.feature_size * self.cfg.feature_size
    }

    fn sample_patch(&self, frame: &Frame, center: Point, side: f64) -> Patch {
        self.sample_patch_filled(frame, center, side, frame.image.mean())
    }

    fn sample_patch_filled(&self, frame: &Frame, center: Point, side: f64, fill: f32) -> Patch {
        let n = self.cfg.feature_size;
        let region = BBox::from_center(center, side, side);
        resample_unchecked(&frame.image, &region, n, n, fill)
    }

    fn features_of(&self, patch: &Patch) -> FeatureMap {
        features::extract(patch, &self.window, self.cfg.feature_std_floor)
    }

    /// Feature spectra, scaled by 1/sqrt(cells) so the ridge term is
    /// comparable to the mean per-frequency energy.
    fn spectrum(&self, f: &FeatureMap) -> Vec<Complex64> {
        let n = self.cells();
        let k = 1.0 / (n as f64).sqrt();
        let (a, b) = self.fft.forward_real_pair(f.plane(0), f.plane(1));
        let c = self.fft.forward_real(f.plane(2));
        a.into_iter().chain(b).chain(c).map(|v| v * k).collect()
    }

    fn label_spectrum_for(&self, label: &Arc<Vec<f64>>) -> Arc<Vec<Complex64>> {
        if Arc::ptr_eq(label, &self.label) {
            self.label_spectrum.clone()
        } else {
            Arc::new(self.fft.forward_real(label))
        }
    }

    fn new_entry(&mut self, spectrum: Vec<Complex64>, label: Arc<Vec<Complex64>>, augmented: bool) -> MemoryEntry {
        let id = self.next_id;
        self.next_id += 1;
        MemoryEntry {
            id,
            spectrum: Arc::new(spectrum),
            label,
            weight: 1.0,
            augmented,
        }
    }

    /// Re-solves the filter over memory plus transient `extra` samples.
    fn solve(&mut self, extra: &[(Vec<Complex64>, Arc<Vec<Complex64>>, f64)]) {
        let n = self.cells();
        let total: f64 =
            self.memory.total_weight() + extra.iter().map(|(_, _, w)| *w).sum::<f64>();
        let samples: Vec<WeightedSample<'_>> = self
            .memory
            .entries
            .iter()
            .map(|e| WeightedSample {
                features: &e.spectrum,
                label: &e.label,
                weight: e.weight / total,
            })
            .chain(extra.iter().map(|(s, l, w)| WeightedSample {
                features: s,
                label: l,
                weight: w / total,
            }))
            .collect();
        self.filter = ridge::solve::<CHANNELS>(&samples, n, self.cfg.ridge, &self.conj);
    }

    fn respond(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let n = self.cells();
        let mut r = ridge::response_spectrum::<CHANNELS>(&self.filter, spectrum, n);
        self.fft.inverse(&mut r);
        r.into_iter().map(|v| v.re).collect()
    }

    /// Response map for one search-region side length.
    fn respond_at(&self, frame: &Frame, center: Point, side: f64, fill: f32) -> (Vec<f64>, Peak, Option<Peak>) {
        let patch = self.sample_patch_filled(frame, center, side, fill);
        let scores = self.respond(&self.spectrum(&self.features_of(&patch)));
        let n = self.cfg.feature_size;
        let diag_cells = self.target_size.0.hypot(self.target_size.1) * n as f64 / side;
        let (peak, second) = find_peaks(&scores, n, n, self.cfg.peak_exclusion * diag_cells);
        (scores, peak, second)
    }

    /// Best response over the given scale steps, with a second look from
    /// the peak when it lands far off-center.
    fn localize_over(&self, frame: &Frame, center: Point, search_scale: f64, steps: &[f64]) -> Localization {
        assert!(self.is_initialized(), "localize called before init");
        let fill = frame.image.mean();
        let n = self.cfg.feature_size as f64;
        let base_side = search_scale * self.target_size.0.hypot(self.target_size.1);
        let mut best: Option<(f64, f64, Vec<f64>, Peak, Option<Peak>)> = None;
        for &s in steps {
            let side = base_side * s;
            let (scores, peak, second) = self.respond_at(frame, center, side, fill);
            let score = if s == 1.0 {
                peak.value
            } else {
                peak.value * self.cfg.scale_penalty
            };
            if best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, s, scores, peak, second));
            }
        }
        let (_, scale, mut scores, mut peak, mut second_peak) = best.expect("at least one scale step");
        let side = base_side * scale;
        let cell = side / n;
        let mut c = Point::new(
            center.x + (peak.x - n / 2.0) * cell,
            center.y + (peak.y - n / 2.0) * cell,
        );
        // The window attenuates off-center targets; look again from the peak.
        if c.distance(&center) > self.cfg.recenter_fraction * side {
            let (s2, p2, q2) = self.respond_at(frame, c, side, fill);
            if p2.value > peak.value {
                c = Point::new(c.x + (p2.x - n / 2.0) * cell, c.y + (p2.y - n / 2.0) * cell);
                scores = s2;
                peak = p2;
                second_peak = q2;
            }
        }
        let bbox = BBox::from_center(c, self.target_size.0 * scale, self.target_size.1 * scale);
        Localization {
            bbox,
            response: ResponseMap {
                width: self.cfg.feature_size,
                height: self.cfg.feature_size,
                scores,
                peak,
                second_peak,
                cell,
                scale,
            },
        }
    }

    /// Filter-only response at an arbitrary location, for diagnostics.
    pub fn response_at(&self, frame: &Frame, center: Point) -> f64 {
        let side = self.cfg.search_scale * self.target_size.0.hypot(self.target_size.1);
        let patch = self.sample_patch(frame, center, side);
        let scores = self.respond(&self.spectrum(&self.features_of(&patch)));
        let n = self.cfg.feature_size;
        scores[(n / 2) * n + n / 2]
    }
}

impl Localizer for DcfTracker {
    fn init(&mut self, frame: &Frame, target: BBox, extra: &[Sample]) -> Result<()> {
        if !target.is_valid() || !target.inside(frame.width(), frame.height()) {
            return Err(Error::TargetOutsideFrame(format!("{target:?}")));
        }
        self.target_size = (target.w, target.h);
        self.memory.clear();
        let side = self.cfg.search_scale * target.diagonal();
        let base = self.sample_patch(frame, target.center(), side);
        let fill = base.mean();
        let n = self.cfg.feature_size;
        let variants = [
            base.clone(),
            gaussian_blur(&base, self.cfg.blur_sigma),
            rotate(&base, self.cfg.rotate_degrees.to_radians(), fill),
            flip_horizontal(&base, fill),
        ];
        debug_assert!(variants.iter().all(|p| p.width() == n));
        for patch in &variants {
            let spec = self.spectrum(&self.features_of(patch));
            let entry = self.new_entry(spec, self.label_spectrum.clone(), false);
            if !self.memory.push_initial(entry) {
                break;
            }
        }
        for s in extra.iter().filter(|s| s.store_in_memory) {
            let spec = self.spectrum(&s.features);
            let label = self.label_spectrum_for(&s.label);
            let entry = self.new_entry(spec, label, true);
            if !self.memory.push_initial(entry) {
                break;
            }
        }
        self.memory.normalize();
        self.solve(&[]);
        Ok(())
    }

    fn localize(&self, frame: &Frame, center: Point, search_scale: f64) -> Localization {
        self.localize_over(frame, center, search_scale, &self.cfg.scale_steps)
    }

    fn relocalize(&self, frame: &Frame, center: Point, search_scale: f64, like: &Localization) -> Localization {
        self.localize_over(frame, center, search_scale, &[like.response.scale])
    }

    fn update(&mut self, frame: &Frame, predicted: BBox, state: TrackState, extra: &[Sample]) {
        if !state.is_reliable() || !self.is_initialized() || !predicted.is_valid() {
            return;
        }
        self.target_size = (predicted.w, predicted.h);
        let side = self.cfg.search_scale * predicted.diagonal();
        let patch = self.sample_patch(frame, predicted.center(), side);
        let spec = self.spectrum(&self.features_of(&patch));
        let entry = self.new_entry(spec, self.label_spectrum.clone(), false);
        let rate = self.cfg.learning_rate;
        self.memory.push_online(entry, rate);
        let extra_weight = self.cfg.extra_sample_weight * rate;
        let transient: Vec<_> = extra
            .iter()
            .map(|s| {
                (
                    self.spectrum(&s.features),
                    self.label_spectrum_for(&s.label),
                    extra_weight,
                )
            })
            .collect();
        self.solve(&transient);
    }

    fn prepare_sample(&self, image: &Patch, store_in_memory: bool) -> Sample {
        let n = self.cfg.feature_size;
        let region = BBox::new(0.0, 0.0, image.width() as f64, image.height() as f64);
        let patch = resample_unchecked(image, &region, n, n, image.mean());
        Sample {
            features: self.features_of(&patch),
            label: self.label.clone(),
            weight: 1.0,
            store_in_memory,
        }
    }

    fn classify(&self, response: &ResponseMap) -> TrackState {
        classify_state(response, &self.cfg)
    }

    fn target_size(&self) -> (f64, f64) {
        self.target_size
    }

    fn search_scale(&self) -> f64 {
        self.cfg.search_scale
    }

    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for v in &self.filter {
            v.re.to_bits().hash(&mut h);
            v.im.to_bits().hash(&mut h);
        }
        for e in &self.memory.entries {
            e.id.hash(&mut h);
            e.weight.to_bits().hash(&mut h);
            e.augmented.hash(&mut h);
        }
        self.target_size.0.to_bits().hash(&mut h);
        self.target_size.1.to_bits().hash(&mut h);
        h.finish()
    }
}

/// Global maximum (sub-cell refined) plus the best local maximum farther
/// than `exclusion` cells from it.
fn find_peaks(scores: &[f64], w: usize, h: usize, exclusion: f64) -> (Peak, Option<Peak>) {
    let (mut bi, mut bv) = (0usize, f64::NEG_INFINITY);
    for (i, &v) in scores.iter().enumerate() {
        if v > bv {
            bi = i;
            bv = v;
        }
    }
    let (px, py) = (bi % w, bi / w);
    let at = |x: isize, y: isize| {
        scores[(y.rem_euclid(h as isize) as usize) * w + x.rem_euclid(w as isize) as usize]
    };
    let refine = |l: f64, c: f64, r: f64| {
        let d = l - 2.0 * c + r;
        if d < 0.0 {
            (0.5 * (l - r) / d).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let (xi, yi) = (px as isize, py as isize);
    let dx = refine(at(xi - 1, yi), bv, at(xi + 1, yi));
    let dy = refine(at(xi, yi - 1), bv, at(xi, yi + 1));
    let peak = Peak {
        x: px as f64 + dx,
        y: py as f64 + dy,
        value: bv,
    };

    let mut second: Option<Peak> = None;
    let ex2 = exclusion * exclusion;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let v = at(x, y);
            if second.is_some_and(|s| v <= s.value) {
                continue;
            }
            let ddx = (x - xi) as f64;
            let ddy = (y - yi) as f64;
            if ddx * ddx + ddy * ddy <= ex2 {
                continue;
            }
            let is_max = (-1..=1)
                .flat_map(|oy| (-1..=1).map(move |ox| (ox, oy)))
                .filter(|&o| o != (0, 0))
                .all(|(ox, oy)| at(x + ox, y + oy) <= v);
            if is_max {
                second = Some(Peak {
                    x: x as f64,
                    y: y as f64,
                    value: v,
                });
            }
        }
    }
    (peak, second)
}

fn gaussian_blur(p: &Patch, sigma: f64) -> Patch {
    if sigma <= 0.0 {
        return p.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let (w, h) = (p.width() as isize, p.height() as isize);
    let pass = |src: &Patch, horizontal: bool| {
        Patch::from_fn(src.width(), src.height(), |x, y| {
            let mut acc = 0.0;
            for (k, wt) in kernel.iter().enumerate() {
                let o = k as isize - radius;
                let (sx, sy) = if horizontal {
                    ((x as isize + o).clamp(0, w - 1), y as isize)
                } else {
                    (x as isize, (y as isize + o).clamp(0, h - 1))
                };
                acc += wt * src.get(sx as usize, sy as usize) as f64;
            }
            (acc / norm) as f32
        })
    };
    pass(&pass(p, true), false)
}

fn rotate(p: &Patch, angle: f64, fill: f32) -> Patch {
    let (cx, cy) = ((p.width() / 2) as f64, (p.height() / 2) as f64);
    let (s, c) = angle.sin_cos();
    let src = p.clone();
    Patch::from_fn(p.width(), p.height(), |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let sx = c * dx + s * dy + cx;
        let sy = -s * dx + c * dy + cy;
        let region = BBox::new(sx, sy, 1.0, 1.0);
        resample_unchecked(&src, &region, 1, 1, fill).get(0, 0)
    })
}

/// Mirror about the feature-grid center column.
fn flip_horizontal(p: &Patch, fill: f32) -> Patch {
    let w = p.width();
    Patch::from_fn(w, p.height(), |x, y| {
        let m = w - x;
        if m < w {
            p.get(m, y)
        } else {
            fill
        }
    })
}
