//! Suite-level runs: rendering the standard suite, ablation tables and the
//! search-budget benchmark.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::{self, MetricCurve, RunOutput, Sequence, OVERALL};
use crate::orchestrator::Mode;
use crate::synth::{self, SceneScript};

/// Thread pool with `jobs` workers (0 means one per core).
pub fn pool(jobs: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

/// Renders scripts under `root`, returning sequence directories in script
/// order.
pub fn render_scripts(scripts: &[SceneScript], root: &Path, pool: &ThreadPool) -> Result<Vec<PathBuf>> {
    pool.install(|| scripts.par_iter().map(|s| synth::render(s, root)).collect())
}

pub fn render_suite(seed: u64, root: &Path, pool: &ThreadPool) -> Result<Vec<PathBuf>> {
    render_scripts(&synth::standard_suite(seed), root, pool)
}

/// Runs every sequence once; outputs land in `out_dir`.
pub fn run_all(cfg: &Config, seqs: &[PathBuf], out_dir: &Path, pool: &ThreadPool) -> Result<Vec<RunOutput>> {
    pool.install(|| seqs.par_iter().map(|s| eval::run_protocol(cfg, s, out_dir)).collect())
}

#[derive(Debug, Clone)]
pub struct SequenceScore {
    pub name: String,
    pub attributes: Vec<String>,
    pub curve: MetricCurve,
}

pub fn score(cfg: &Config, seqs: &[PathBuf], runs: &[RunOutput]) -> Result<Vec<SequenceScore>> {
    let th = eval::thresholds(cfg.eval_thresholds);
    seqs.iter()
        .zip(runs)
        .map(|(dir, run)| {
            let seq = Sequence::open(dir)?;
            let curve = eval::compute_curve(&run.predictions(), &seq.annotation.gt, &th)?;
            Ok(SequenceScore {
                name: seq.name,
                attributes: seq.annotation.attributes,
                curve,
            })
        })
        .collect()
}

pub fn averages(scores: &[SequenceScore]) -> BTreeMap<String, f64> {
    eval::attribute_average(scores.iter().map(|s| (s.curve.f_max, s.attributes.as_slice())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Baseline,
    Consensus,
    RandomSearchPenalty,
    BgAugment,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Baseline,
        Variant::Consensus,
        Variant::RandomSearchPenalty,
        Variant::BgAugment,
        Variant::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Consensus => "baseline+consensus",
            Variant::RandomSearchPenalty => "baseline+random-search+penalty",
            Variant::BgAugment => "baseline+bg-augment",
            Variant::Full => "full",
        }
    }

    /// `cfg` with the toggles of this variant; everything else untouched.
    pub fn apply(self, cfg: &Config) -> Config {
        let mut c = cfg.baseline();
        match self {
            Variant::Baseline => {}
            Variant::Consensus => c.enable_consensus = true,
            Variant::RandomSearchPenalty => {
                c.enable_random_search = true;
                c.enable_penalty = true;
            }
            Variant::BgAugment => c.enable_bg_augment = true,
            Variant::Full => {
                c.enable_consensus = true;
                c.enable_random_search = true;
                c.enable_penalty = true;
                c.enable_bg_augment = true;
            }
        }
        c
    }
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub variant: Variant,
    pub scores: Vec<SequenceScore>,
    pub means: BTreeMap<String, f64>,
}

impl AblationRow {
    pub fn overall(&self) -> f64 {
        self.means.get(OVERALL).copied().unwrap_or(0.0)
    }
}

/// Runs all five variants over `seqs`. Per-variant tracker outputs go to
/// `out_dir/<variant>/`.
pub fn ablate(cfg: &Config, seqs: &[PathBuf], out_dir: &Path, pool: &ThreadPool) -> Result<Vec<AblationRow>> {
    Variant::ALL
        .iter()
        .map(|&v| {
            let c = v.apply(cfg);
            let runs = run_all(&c, seqs, &out_dir.join(v.name()), pool)?;
            let scores = score(&c, seqs, &runs)?;
            let means = averages(&scores);
            Ok(AblationRow {
                variant: v,
                scores,
                means,
            })
        })
        .collect()
}

/// `variant,overall,<attribute>...`; attributes in sorted order, blank where
/// no sequence carries the tag.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let attrs: BTreeSet<&String> = rows
        .iter()
        .flat_map(|r| r.means.keys())
        .filter(|k| k.as_str() != OVERALL)
        .collect();
    let mut out = String::from("variant,overall");
    for a in &attrs {
        let _ = write!(out, ",{a}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{:.6}", r.variant.name(), r.overall());
        for a in &attrs {
            match r.means.get(*a) {
                Some(v) => {
                    let _ = write!(out, ",{v:.6}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub name: &'static str,
    pub lost_frames: usize,
    pub lost_evaluations: usize,
    pub wall_seconds: f64,
}

impl BenchRow {
    pub fn evals_per_lost_frame(&self) -> f64 {
        if self.lost_frames == 0 {
            0.0
        } else {
            self.lost_evaluations as f64 / self.lost_frames as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub sliding: BenchRow,
    pub random: BenchRow,
}

impl BenchReport {
    pub fn eval_ratio(&self) -> f64 {
        let r = self.random.evals_per_lost_frame();
        if r == 0.0 {
            0.0
        } else {
            self.sliding.evals_per_lost_frame() / r
        }
    }

    pub fn wall_ratio(&self) -> f64 {
        if self.random.wall_seconds == 0.0 {
            0.0
        } else {
            self.sliding.wall_seconds / self.random.wall_seconds
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("search,lost_frames,lost_evaluations,evals_per_lost_frame,wall_seconds\n");
        for r in [&self.sliding, &self.random] {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.3}",
                r.name,
                r.lost_frames,
                r.lost_evaluations,
                r.evals_per_lost_frame(),
                r.wall_seconds
            );
        }
        let _ = writeln!(out, "eval_ratio,wall_ratio\n{:.6},{:.6}", self.eval_ratio(), self.wall_ratio());
        out
    }
}

/// Per-frame search log: `frame,mode,evals_this_frame,best_s,best_s_prime`.
/// `mode` is the mode the frame was processed in; scores are blank on
/// tracking frames.
pub fn frame_log_csv(run: &RunOutput) -> String {
    let mut out = String::from("frame,mode,evals_this_frame,best_s,best_s_prime\n");
    for (i, r) in run.results.iter().enumerate() {
        let mode = if r.best_s.is_some() { Mode::Lost } else { Mode::Tracking };
        let f = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        let _ = writeln!(
            out,
            "{i},{},{},{},{}",
            mode.as_str(),
            r.evaluations,
            f(r.best_s),
            f(r.best_s_prime)
        );
    }
    out
}

/// Frames processed by global search and the localizer calls they made.
pub fn lost_stats(runs: &[RunOutput]) -> (usize, usize) {
    runs.iter()
        .flat_map(|r| &r.results)
        .filter(|r| r.best_s.is_some())
        .fold((0, 0), |(n, e), r| (n + 1, e + r.evaluations))
}

/// Full pipeline with sliding-window search against random search.
/// Per-frame logs go to `out_dir/<search>/<seq>_frames.csv`.
pub fn bench(cfg: &Config, seqs: &[PathBuf], out_dir: &Path, pool: &ThreadPool) -> Result<BenchReport> {
    let mut rows = Vec::new();
    for (name, random) in [("sliding", false), ("random", true)] {
        let mut c = Variant::Full.apply(cfg);
        c.enable_random_search = random;
        let dir = out_dir.join(name);
        let start = Instant::now();
        let runs = run_all(&c, seqs, &dir, pool)?;
        let wall_seconds = start.elapsed().as_secs_f64();
        for run in &runs {
            let p = dir.join(format!("{}_frames.csv", run.sequence));
            std::fs::write(&p, frame_log_csv(run)).map_err(|e| Error::io(&p, e))?;
        }
        let (lost_frames, lost_evaluations) = lost_stats(&runs);
        rows.push(BenchRow {
            name,
            lost_frames,
            lost_evaluations,
            wall_seconds,
        });
    }
    let random = rows.pop().expect("two rows");
    let sliding = rows.pop().expect("two rows");
    Ok(BenchReport { sliding, random })
}
