//! No-reset evaluation: sequence I/O, tracking precision / recall /
//! F-measure over confidence thresholds, and per-attribute averages.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geom::{iou, BBox, Frame};
use crate::orchestrator::{FrameResult, LongTermTracker};
use crate::pgm;

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceAnnotation {
    pub gt: Vec<Option<BBox>>,
    pub attributes: Vec<String>,
}

/// A sequence directory: `frames/%08d.pgm`, `groundtruth.txt`,
/// `attributes.txt`.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub name: String,
    pub dir: PathBuf,
    pub annotation: SequenceAnnotation,
}

impl Sequence {
    pub fn open(dir: &Path) -> Result<Self> {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| Error::InvalidInput(format!("{} has no directory name", dir.display())))?;
        let gt_path = dir.join("groundtruth.txt");
        let gt = parse_boxes(&read(&gt_path)?, &gt_path)?;
        let attr_path = dir.join("attributes.txt");
        let attributes = if attr_path.exists() {
            parse_attributes(&read(&attr_path)?)
        } else {
            Vec::new()
        };
        let frames = dir.join("frames");
        let count = std::fs::read_dir(&frames)
            .map_err(|e| Error::io(&frames, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "pgm"))
            .count();
        if count != gt.len() {
            return Err(Error::LengthMismatch(format!(
                "{}: {count} frames but {} ground-truth lines",
                dir.display(),
                gt.len()
            )));
        }
        for i in 0..count {
            let p = frame_path(dir, i);
            if !p.is_file() {
                return Err(Error::InvalidInput(format!("missing frame {}", p.display())));
            }
        }
        Ok(Self {
            name,
            dir: dir.to_path_buf(),
            annotation: SequenceAnnotation { gt, attributes },
        })
    }

    pub fn len(&self) -> usize {
        self.annotation.gt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotation.gt.is_empty()
    }

    pub fn frame(&self, i: usize) -> Result<Frame> {
        Ok(Frame::new(pgm::read(&frame_path(&self.dir, i))?, i as u64))
    }
}

pub fn frame_path(seq_dir: &Path, i: usize) -> PathBuf {
    seq_dir.join("frames").join(format!("{i:08}.pgm"))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Sequence directories under `root` (those holding a `groundtruth.txt`),
/// sorted by name.
pub fn list_sequences(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("groundtruth.txt").is_file())
        .collect();
    out.sort();
    Ok(out)
}

/// One `x,y,w,h` box per line; `nan,nan,nan,nan` (any case) marks an absent
/// target. Trailing blank lines are ignored.
pub fn parse_boxes(text: &str, path: &Path) -> Result<Vec<Option<BBox>>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.trim_end()
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(Error::parse(path, i + 1, format!("expected 4 values, got {}", parts.len())));
            }
            if parts.iter().all(|p| p.eq_ignore_ascii_case("nan")) {
                return Ok(None);
            }
            let mut v = [0.0; 4];
            for (slot, p) in v.iter_mut().zip(&parts) {
                *slot = p
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(path, i + 1, format!("bad number {p:?}")))?;
            }
            let b = BBox::new(v[0], v[1], v[2], v[3]);
            if !b.is_valid() {
                return Err(Error::parse(path, i + 1, "box needs positive width and height"));
            }
            Ok(Some(b))
        })
        .collect()
}

pub fn format_boxes<'a>(boxes: impl IntoIterator<Item = Option<&'a BBox>>) -> String {
    let mut out = String::new();
    for b in boxes {
        match b {
            Some(b) => {
                let _ = writeln!(out, "{:.6},{:.6},{:.6},{:.6}", b.x, b.y, b.w, b.h);
            }
            None => out.push_str("nan,nan,nan,nan\n"),
        }
    }
    out
}

pub fn parse_confidences(text: &str, path: &Path) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.trim_end()
        .lines()
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(path, i + 1, format!("bad confidence {l:?}")))
        })
        .collect()
}

pub fn format_confidences(values: &[f64]) -> String {
    values.iter().map(|c| format!("{c:.6}\n")).collect()
}

pub fn parse_attributes(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricCurve {
    pub thresholds: Vec<f64>,
    pub pr: Vec<f64>,
    pub re: Vec<f64>,
    pub f: Vec<f64>,
    pub f_max: f64,
    /// Lowest threshold reaching `f_max`.
    pub tau_star: f64,
}

/// `n` evenly spaced thresholds from 0 to 1 inclusive.
pub fn thresholds(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

pub fn f_measure(pr: f64, re: f64) -> f64 {
    if pr + re == 0.0 {
        0.0
    } else {
        2.0 * pr * re / (pr + re)
    }
}

pub fn compute_curve(pred: &[(BBox, f64)], gt: &[Option<BBox>], thresholds: &[f64]) -> Result<MetricCurve> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions for {} ground-truth frames",
            pred.len(),
            gt.len()
        )));
    }
    let overlaps: Vec<f64> = pred
        .iter()
        .zip(gt)
        .map(|((b, _), g)| g.as_ref().map_or(0.0, |g| iou(b, g)))
        .collect();
    let present = gt.iter().filter(|g| g.is_some()).count();
    let (mut pr, mut re, mut f) = (Vec::new(), Vec::new(), Vec::new());
    for &tau in thresholds {
        let (mut sum_all, mut n_all, mut sum_present) = (0.0, 0usize, 0.0);
        for ((&(_, c), g), &o) in pred.iter().zip(gt).zip(&overlaps) {
            if c >= tau {
                sum_all += o;
                n_all += 1;
                if g.is_some() {
                    sum_present += o;
                }
            }
        }
        let p = if n_all == 0 { 0.0 } else { sum_all / n_all as f64 };
        let r = if present == 0 { 0.0 } else { sum_present / present as f64 };
        pr.push(p);
        re.push(r);
        f.push(f_measure(p, r));
    }
    let (mut f_max, mut tau_star) = (0.0, thresholds.first().copied().unwrap_or(0.0));
    for (&v, &t) in f.iter().zip(thresholds) {
        if v > f_max {
            f_max = v;
            tau_star = t;
        }
    }
    Ok(MetricCurve {
        thresholds: thresholds.to_vec(),
        pr,
        re,
        f,
        f_max,
        tau_star,
    })
}

pub fn metrics_csv(curve: &MetricCurve) -> String {
    let mut out = String::from("tau,precision,recall,f\n");
    for i in 0..curve.thresholds.len() {
        let _ = writeln!(
            out,
            "{:.2},{:.6},{:.6},{:.6}",
            curve.thresholds[i], curve.pr[i], curve.re[i], curve.f[i]
        );
    }
    let _ = writeln!(out, "f_max,tau_star\n{:.6},{:.2}", curve.f_max, curve.tau_star);
    out
}

/// Mean `f_max` per attribute tag, plus the mean over all sequences under
/// [`OVERALL`].
pub fn attribute_average<'a>(items: impl IntoIterator<Item = (f64, &'a [String])>) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let (mut total, mut n) = (0.0, 0usize);
    for (f, tags) in items {
        total += f;
        n += 1;
        for t in tags {
            let e = sums.entry(t.clone()).or_insert((0.0, 0));
            e.0 += f;
            e.1 += 1;
        }
    }
    let mut out: BTreeMap<String, f64> = sums.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect();
    if n > 0 {
        out.insert(OVERALL.to_string(), total / n as f64);
    }
    out
}

pub const OVERALL: &str = "overall";

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub sequence: String,
    pub results: Vec<FrameResult>,
    pub bbox_path: PathBuf,
    pub confidence_path: PathBuf,
}

impl RunOutput {
    pub fn predictions(&self) -> Vec<(BBox, f64)> {
        self.results.iter().map(|r| (r.bbox, r.confidence)).collect()
    }
}

pub fn output_paths(out_dir: &Path, seq: &str) -> (PathBuf, PathBuf) {
    (
        out_dir.join(format!("{seq}_bbox.txt")),
        out_dir.join(format!("{seq}_confidence.txt")),
    )
}

/// Tracks a sequence once from its first ground-truth box without resets
/// and writes `<seq>_bbox.txt` and `<seq>_confidence.txt` into `out_dir`.
pub fn run_protocol(cfg: &Config, seq_dir: &Path, out_dir: &Path) -> Result<RunOutput> {
    let seq = Sequence::open(seq_dir)?;
    let first = seq
        .annotation
        .gt
        .first()
        .copied()
        .flatten()
        .ok_or_else(|| Error::InvalidInput(format!("{}: no target in frame 0", seq_dir.display())))?;
    let mut tracker = LongTermTracker::new(cfg.clone())?;
    let mut results = Vec::with_capacity(seq.len());
    results.push(tracker.init(&seq.frame(0)?, first)?);
    for i in 1..seq.len() {
        results.push(tracker.step(&seq.frame(i)?)?);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (bbox_path, confidence_path) = output_paths(out_dir, &seq.name);
    let boxes = format_boxes(results.iter().map(|r| Some(&r.bbox)));
    let conf = format_confidences(&results.iter().map(|r| r.confidence).collect::<Vec<_>>());
    std::fs::write(&bbox_path, boxes).map_err(|e| Error::io(&bbox_path, e))?;
    std::fs::write(&confidence_path, conf).map_err(|e| Error::io(&confidence_path, e))?;
    Ok(RunOutput {
        sequence: seq.name,
        results,
        bbox_path,
        confidence_path,
    })
}

/// Reads a run's output files back and scores them against the sequence.
pub fn evaluate_outputs(seq_dir: &Path, pred_dir: &Path, thresholds: &[f64]) -> Result<(Sequence, MetricCurve)> {
    let seq = Sequence::open(seq_dir)?;
    let (bp, cp) = output_paths(pred_dir, &seq.name);
    let boxes = parse_boxes(&read(&bp)?, &bp)?;
    let conf = parse_confidences(&read(&cp)?, &cp)?;
    if boxes.len() != conf.len() {
        return Err(Error::LengthMismatch(format!(
            "{} boxes but {} confidences",
            boxes.len(),
            conf.len()
        )));
    }
    let pred: Vec<(BBox, f64)> = boxes
        .iter()
        .zip(&conf)
        .enumerate()
        .map(|(i, (b, &c))| {
            b.map(|b| (b, c))
                .ok_or_else(|| Error::parse(&bp, i + 1, "predictions may not be nan"))
        })
        .collect::<Result<_>>()?;
    let curve = compute_curve(&pred, &seq.annotation.gt, thresholds)?;
    Ok((seq, curve))
}
