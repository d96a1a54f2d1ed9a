//! Long-term tracking loop: short-term tracking while the target is in
//! sight, global re-detection once it is lost, and re-initialization on
//! reacquisition.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{self, AugSample};
use crate::config::Config;
use crate::consensus;
use crate::error::{Error, Result};
use crate::geom::{diagonal, BBox, Frame, Patch};
use crate::redetect::{self, LostContext, SearchGrid};
use crate::tracker::{DcfTracker, Localizer, Sample, TrackState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Tracking,
    Lost,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Tracking => "TRACK",
            Mode::Lost => "LOST",
        }
    }
}

/// Reported confidence: 1 for confident states, 0.5 for uncertain, 0 for
/// not found or while lost.
pub fn assign_confidence(state: TrackState, mode: Mode) -> f64 {
    match (mode, state) {
        (Mode::Lost, _) | (_, TrackState::NotFound) => 0.0,
        (_, TrackState::Uncertain) => 0.5,
        (_, TrackState::Normal | TrackState::HardNegative) => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub bbox: BBox,
    pub confidence: f64,
    pub state: TrackState,
    pub mode: Mode,
    /// Localizer calls made for this frame (consensus votes excluded).
    pub evaluations: usize,
    /// Best raw and penalized re-detection scores on lost frames.
    pub best_s: Option<f64>,
    pub best_s_prime: Option<f64>,
    /// Consensus agreement, when consensus ran.
    pub agreement: Option<f64>,
    /// State before the consensus correction.
    pub prior_state: TrackState,
    /// The tracker re-initialized on this frame after a re-detection.
    pub reinitialized: bool,
}

/// One tracked sequence. Frames must be fed in order.
pub struct LongTermTracker<L: Localizer = DcfTracker> {
    cfg: Config,
    localizer: L,
    pool: Vec<Patch>,
    mode: Mode,
    prev: BBox,
    last_confident: Option<(BBox, u64)>,
    grid: Option<SearchGrid>,
    consecutive_notfound: usize,
    frames_since_init: u64,
    search_rng: ChaCha8Rng,
}

/// Independent stream per (seed, frame) so results do not depend on how many
/// draws earlier frames made.
fn frame_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

impl LongTermTracker<DcfTracker> {
    pub fn new(cfg: Config) -> Result<Self> {
        let localizer = DcfTracker::new(cfg.tracker.clone());
        Self::with_localizer(cfg, localizer)
    }
}

impl<L: Localizer> LongTermTracker<L> {
    pub fn with_localizer(cfg: Config, localizer: L) -> Result<Self> {
        cfg.validate()?;
        let pool = match &cfg.augment.bg_pool_dir {
            Some(dir) if cfg.enable_bg_augment => augment::load_pool(dir)?,
            _ => Vec::new(),
        };
        let search_rng = ChaCha8Rng::seed_from_u64(cfg.search_seed);
        Ok(Self {
            cfg,
            localizer,
            pool,
            mode: Mode::Tracking,
            prev: BBox::new(0.0, 0.0, 0.0, 0.0),
            last_confident: None,
            grid: None,
            consecutive_notfound: 0,
            frames_since_init: 0,
            search_rng,
        })
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn localizer(&self) -> &L {
        &self.localizer
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn grid(&self) -> Option<&SearchGrid> {
        self.grid.as_ref()
    }

    pub fn last_confident(&self) -> Option<(BBox, u64)> {
        self.last_confident
    }

    fn augmented(&self, frame: &Frame, target: &BBox, n: usize, first: bool) -> Result<Vec<AugSample>> {
        if !self.cfg.enable_bg_augment || n == 0 {
            return Ok(Vec::new());
        }
        let side = self.cfg.tracker.search_scale * target.diagonal();
        let region = BBox::from_center(target.center(), side, side).to_rect();
        let mut rng = frame_rng(self.cfg.augment.rng_seed, frame.index);
        let bgs = match augment::harvest_backgrounds(frame, &region, n, &self.pool, &mut rng) {
            Ok(b) => b,
            // A target filling the frame leaves nothing to swap in.
            Err(Error::NoBackgroundSource) => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        augment::make_samples(frame, target, &region, &bgs, first, &self.localizer)
    }

    fn first_frame(&mut self, frame: &Frame, target: BBox) -> Result<()> {
        // Samples are prepared before init; their geometry only depends on
        // the search-region size, which init derives from `target` as well.
        let extra: Vec<Sample> = self
            .augmented(frame, &target, self.cfg.augment.n_first, true)?
            .into_iter()
            .map(|a| a.sample)
            .collect();
        self.localizer.init(frame, target, &extra)?;
        self.mode = Mode::Tracking;
        self.prev = target;
        self.last_confident = Some((target, frame.index));
        self.grid = None;
        self.consecutive_notfound = 0;
        self.frames_since_init = 0;
        Ok(())
    }

    /// Initializes on the first frame with the ground-truth box.
    pub fn init(&mut self, frame: &Frame, target: BBox) -> Result<FrameResult> {
        self.first_frame(frame, target)?;
        Ok(FrameResult {
            bbox: target,
            confidence: 1.0,
            state: TrackState::Normal,
            mode: Mode::Tracking,
            evaluations: 0,
            best_s: None,
            best_s_prime: None,
            agreement: None,
            prior_state: TrackState::Normal,
            reinitialized: false,
        })
    }

    pub fn step(&mut self, frame: &Frame) -> Result<FrameResult> {
        if self.last_confident.is_none() {
            return Err(Error::NotInitialized);
        }
        match self.mode {
            Mode::Tracking => self.track(frame),
            Mode::Lost => self.search(frame),
        }
    }

    fn track(&mut self, frame: &Frame) -> Result<FrameResult> {
        self.frames_since_init += 1;
        let scale = self.localizer.search_scale();
        let center = self.prev.center();
        let loc = self.localizer.localize(frame, center, scale);
        let prior = self.localizer.classify(&loc.response);
        let mut state = prior;
        let mut agreement = None;
        if self.cfg.enable_consensus
            && prior.is_reliable()
            && self.frames_since_init.is_multiple_of(self.cfg.consensus_every_n as u64)
        {
            let mut rng = frame_rng(self.cfg.erasure.rng_seed, frame.index);
            let c = consensus::evaluate(frame, &loc, prior, &self.localizer, center, scale, &self.cfg.erasure, &mut rng);
            agreement = Some(c.agreement);
            state = c.corrected_state;
        }

        let bbox = if state == TrackState::NotFound { self.prev } else { loc.bbox };
        if state.is_reliable() {
            let extra: Vec<Sample> = if augment::online_gate(state, loc.peak(), &self.cfg.augment)
                && loc.bbox.inside(frame.width(), frame.height())
            {
                self.augmented(frame, &loc.bbox, self.cfg.augment.n_online, false)?
                    .into_iter()
                    .map(|a| a.sample)
                    .collect()
            } else {
                Vec::new()
            };
            self.localizer.update(frame, loc.bbox, state, &extra);
            self.last_confident = Some((loc.bbox, frame.index));
        }
        if state == TrackState::NotFound {
            self.consecutive_notfound += 1;
        } else {
            self.consecutive_notfound = 0;
            self.prev = loc.bbox;
        }
        if self.consecutive_notfound >= self.cfg.lost_after {
            let (last, _) = self.last_confident.expect("initialized");
            self.grid = Some(redetect::build_grid(
                (frame.width(), frame.height()),
                &last,
                scale,
                &mut self.search_rng,
            ));
            self.mode = Mode::Lost;
        }
        Ok(FrameResult {
            bbox: if self.mode == Mode::Lost { self.last_confident.expect("initialized").0 } else { bbox },
            confidence: assign_confidence(state, self.mode),
            state,
            mode: self.mode,
            evaluations: 1,
            best_s: None,
            best_s_prime: None,
            agreement,
            prior_state: prior,
            reinitialized: false,
        })
    }

    fn search(&mut self, frame: &Frame) -> Result<FrameResult> {
        let (last, t_old) = self.last_confident.expect("initialized");
        let grid = self.grid.as_mut().expect("grid exists while lost");
        let tiles: Vec<usize> = if self.cfg.enable_random_search {
            let (w, h) = self.localizer.target_size();
            let n = redetect::num_searches(
                (frame.width(), frame.height()),
                &BBox::new(0.0, 0.0, w, h),
                &self.cfg.redetect,
            );
            grid.next_indices(n, &mut self.search_rng)
        } else {
            (0..grid.len()).collect()
        };
        let ctx = LostContext {
            p_old: last.center(),
            t_old,
            d_max: diagonal(frame),
        };
        let penalty = self.cfg.enable_penalty.then_some(&self.cfg.redetect.penalty);
        let grid = self.grid.as_ref().expect("grid exists while lost");
        let outcome = redetect::try_redetect(
            frame,
            &self.localizer,
            grid,
            &tiles,
            &ctx,
            penalty,
            self.cfg.redetect.tau_redet,
        )?;
        let (best_s, best_s_prime) = (Some(outcome.best_s), Some(outcome.best_s_prime));
        let Some(found) = outcome.accepted else {
            return Ok(FrameResult {
                bbox: last,
                confidence: 0.0,
                state: TrackState::NotFound,
                mode: Mode::Lost,
                evaluations: outcome.evaluations,
                best_s,
                best_s_prime,
                agreement: None,
                prior_state: TrackState::NotFound,
                reinitialized: false,
            });
        };
        let state = self.localizer.classify(&found.localization.response);
        let bbox = clamp_into(found.localization.bbox, frame.width(), frame.height());
        self.first_frame(frame, bbox)?;
        Ok(FrameResult {
            bbox,
            confidence: assign_confidence(state, Mode::Tracking),
            state,
            mode: Mode::Tracking,
            evaluations: outcome.evaluations,
            best_s,
            best_s_prime,
            agreement: None,
            prior_state: state,
            reinitialized: true,
        })
    }
}

/// Shifts (and if needed shrinks) a box so it lies inside the frame.
fn clamp_into(b: BBox, width: usize, height: usize) -> BBox {
    let w = b.w.min(width as f64);
    let h = b.h.min(height as f64);
    let x = b.x.clamp(0.0, width as f64 - w);
    let y = b.y.clamp(0.0, height as f64 - h);
    BBox::new(x, y, w, h)
}
