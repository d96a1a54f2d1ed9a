//! Scripted synthetic sequences: a textured target on value-noise
//! background with absences, look-alike distractors, occluders, camera
//! jitter and sensor noise.
//!
//! Script files are flat `key = value` lines; list and object values use
//! JSON syntax:
//!
//! ```text
//! name = far-0
//! frames = 300
//! target = {"size": [16, 16], "texture_seed": 7, "path": [[0, 40, 40], [120, 60, 50]]}
//! absences = [[120, 160]]
//! distractors = [{"size": [16, 16], "similarity": 0.9, "texture_seed": 8, "path": [[0, 250, 60]]}]
//! occluders = [{"size": [12, 40], "intensity": 0.2, "path": [[0, 0, 120], [199, 320, 120]]}]
//! ```
//!
//! Paths are `[frame, center_x, center_y]` waypoints, linearly interpolated
//! and held constant past either end.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::eval::{format_boxes, frame_path};
use crate::geom::{diagonal, BBox, Frame, Patch, Rect};
use crate::tracker::Localizer;
use crate::pgm;
use crate::texture::{standardize, value_noise};

#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path2 {
    pub points: Vec<Waypoint>,
}

impl Path2 {
    pub fn fixed(x: f64, y: f64) -> Self {
        Self {
            points: vec![Waypoint { frame: 0, x, y }],
        }
    }

    pub fn at(&self, frame: usize) -> (f64, f64) {
        let p = &self.points;
        if frame <= p[0].frame {
            return (p[0].x, p[0].y);
        }
        for w in p.windows(2) {
            if frame <= w[1].frame {
                let t = (frame - w[0].frame) as f64 / (w[1].frame - w[0].frame).max(1) as f64;
                return (w[0].x + t * (w[1].x - w[0].x), w[0].y + t * (w[1].y - w[0].y));
            }
        }
        let last = p.last().expect("non-empty path");
        (last.x, last.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub size: (usize, usize),
    pub texture_seed: u64,
    pub path: Path2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistractorSpec {
    pub size: (usize, usize),
    /// Correlation of the distractor texture with the target texture.
    pub similarity: f64,
    pub texture_seed: u64,
    pub path: Path2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccluderSpec {
    pub size: (usize, usize),
    pub intensity: f64,
    pub path: Path2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneScript {
    pub name: String,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub background_seed: u64,
    pub background_contrast: f64,
    pub target_contrast: f64,
    pub noise_sigma: f64,
    /// Camera shake amplitude in pixels.
    pub jitter: f64,
    pub target: TargetSpec,
    pub absences: Vec<(usize, usize)>,
    pub distractors: Vec<DistractorSpec>,
    pub occluders: Vec<OccluderSpec>,
}

impl SceneScript {
    pub fn new(name: &str, frames: usize, target: TargetSpec) -> Self {
        Self {
            name: name.to_string(),
            frames,
            width: 320,
            height: 240,
            seed: 0,
            background_seed: 0,
            background_contrast: 0.05,
            target_contrast: 0.15,
            noise_sigma: 0.01,
            jitter: 0.0,
            target,
            absences: Vec::new(),
            distractors: Vec::new(),
            occluders: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(format!("script {}: {m}", self.name)));
        if self.frames == 0 || self.width == 0 || self.height == 0 {
            return bad("frames, width and height must be positive".into());
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be a plain directory name".into());
        }
        let mut spans = self.absences.clone();
        spans.sort();
        for (i, &(s, e)) in spans.iter().enumerate() {
            if s >= e || e > self.frames {
                return bad(format!("absence [{s}, {e}) outside [0, {})", self.frames));
            }
            if i > 0 && spans[i - 1].1 > s {
                return bad("absences overlap".into());
            }
        }
        if self.absences.iter().any(|&(s, _)| s == 0) {
            return bad("the target must be visible in frame 0".into());
        }
        let paths = std::iter::once(&self.target.path)
            .chain(self.distractors.iter().map(|d| &d.path))
            .chain(self.occluders.iter().map(|o| &o.path));
        for p in paths {
            if p.points.is_empty()
                || p.points.iter().any(|w| !w.x.is_finite() || !w.y.is_finite())
                || p.points.windows(2).any(|w| w[0].frame >= w[1].frame)
            {
                return bad("paths need finite waypoints with increasing frames".into());
            }
        }
        if self.distractors.iter().any(|d| !(0.0..=1.0).contains(&d.similarity)) {
            return bad("similarity must be in [0, 1]".into());
        }
        let sizes = std::iter::once(self.target.size)
            .chain(self.distractors.iter().map(|d| d.size))
            .chain(self.occluders.iter().map(|o| o.size));
        for (w, h) in sizes {
            if w == 0 || h == 0 {
                return bad("object sizes must be positive".into());
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let path = |p: &Path2| Value::from(p.points.iter().map(|w| json!([w.frame, w.x, w.y])).collect::<Vec<_>>());
        let lines = [
            ("name", Value::from(self.name.clone())),
            ("frames", json!(self.frames)),
            ("width", json!(self.width)),
            ("height", json!(self.height)),
            ("seed", json!(self.seed)),
            ("background_seed", json!(self.background_seed)),
            ("background_contrast", json!(self.background_contrast)),
            ("target_contrast", json!(self.target_contrast)),
            ("noise_sigma", json!(self.noise_sigma)),
            ("jitter", json!(self.jitter)),
            (
                "target",
                json!({"size": [self.target.size.0, self.target.size.1], "texture_seed": self.target.texture_seed, "path": path(&self.target.path)}),
            ),
            ("absences", json!(self.absences.iter().map(|&(s, e)| [s, e]).collect::<Vec<_>>())),
            (
                "distractors",
                Value::from(
                    self.distractors
                        .iter()
                        .map(|d| json!({"size": [d.size.0, d.size.1], "similarity": d.similarity, "texture_seed": d.texture_seed, "path": path(&d.path)}))
                        .collect::<Vec<_>>(),
                ),
            ),
            (
                "occluders",
                Value::from(
                    self.occluders
                        .iter()
                        .map(|o| json!({"size": [o.size.0, o.size.1], "intensity": o.intensity, "path": path(&o.path)}))
                        .collect::<Vec<_>>(),
                ),
            ),
        ];
        lines
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k} = {s}\n"),
                v => format!("{k} = {v}\n"),
            })
            .collect()
    }

    pub fn from_text(text: &str, source: &Path) -> Result<Self> {
        let mut s = SceneScript::new("", 0, TargetSpec {
            size: (0, 0),
            texture_seed: 0,
            path: Path2 { points: Vec::new() },
        });
        let mut have_target = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::parse(source, i + 1, m);
            let (key, raw) = line.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, raw) = (key.trim(), raw.trim());
            if key == "name" {
                s.name = raw.to_string();
                continue;
            }
            let v: Value = serde_json::from_str(raw).map_err(|e| err(format!("{key}: {e}")))?;
            let r = (|| -> std::result::Result<(), String> {
                match key {
                    "frames" => s.frames = as_usize(&v)?,
                    "width" => s.width = as_usize(&v)?,
                    "height" => s.height = as_usize(&v)?,
                    "seed" => s.seed = as_u64(&v)?,
                    "background_seed" => s.background_seed = as_u64(&v)?,
                    "background_contrast" => s.background_contrast = as_f64(&v)?,
                    "target_contrast" => s.target_contrast = as_f64(&v)?,
                    "noise_sigma" => s.noise_sigma = as_f64(&v)?,
                    "jitter" => s.jitter = as_f64(&v)?,
                    "target" => {
                        s.target = TargetSpec {
                            size: as_size(field(&v, "size")?)?,
                            texture_seed: as_u64(field(&v, "texture_seed")?)?,
                            path: as_path(field(&v, "path")?)?,
                        };
                        have_target = true;
                    }
                    "absences" => {
                        s.absences = as_list(&v)?
                            .iter()
                            .map(|p| {
                                let p = as_list(p)?;
                                if p.len() != 2 {
                                    return Err("absence must be [start, end]".to_string());
                                }
                                Ok((as_usize(&p[0])?, as_usize(&p[1])?))
                            })
                            .collect::<std::result::Result<_, _>>()?
                    }
                    "distractors" => {
                        s.distractors = as_list(&v)?
                            .iter()
                            .map(|d| {
                                Ok(DistractorSpec {
                                    size: as_size(field(d, "size")?)?,
                                    similarity: as_f64(field(d, "similarity")?)?,
                                    texture_seed: as_u64(field(d, "texture_seed")?)?,
                                    path: as_path(field(d, "path")?)?,
                                })
                            })
                            .collect::<std::result::Result<_, String>>()?
                    }
                    "occluders" => {
                        s.occluders = as_list(&v)?
                            .iter()
                            .map(|o| {
                                Ok(OccluderSpec {
                                    size: as_size(field(o, "size")?)?,
                                    intensity: as_f64(field(o, "intensity")?)?,
                                    path: as_path(field(o, "path")?)?,
                                })
                            })
                            .collect::<std::result::Result<_, String>>()?
                    }
                    other => return Err(format!("unknown key `{other}`")),
                }
                Ok(())
            })();
            r.map_err(|m| err(format!("{key}: {m}")))?;
        }
        if !have_target {
            return Err(Error::parse(source, 0, "missing `target`"));
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

fn field<'a>(v: &'a Value, k: &str) -> std::result::Result<&'a Value, String> {
    v.get(k).ok_or_else(|| format!("missing field `{k}`"))
}

fn as_f64(v: &Value) -> std::result::Result<f64, String> {
    v.as_f64().ok_or_else(|| format!("expected a number, got {v}"))
}

fn as_u64(v: &Value) -> std::result::Result<u64, String> {
    v.as_u64().ok_or_else(|| format!("expected a non-negative integer, got {v}"))
}

fn as_usize(v: &Value) -> std::result::Result<usize, String> {
    as_u64(v).map(|x| x as usize)
}

fn as_list(v: &Value) -> std::result::Result<&Vec<Value>, String> {
    v.as_array().ok_or_else(|| format!("expected a list, got {v}"))
}

fn as_size(v: &Value) -> std::result::Result<(usize, usize), String> {
    match as_list(v)?.as_slice() {
        [w, h] => Ok((as_usize(w)?, as_usize(h)?)),
        _ => Err("size must be [w, h]".into()),
    }
}

fn as_path(v: &Value) -> std::result::Result<Path2, String> {
    let points = as_list(v)?
        .iter()
        .map(|p| match as_list(p)?.as_slice() {
            [f, x, y] => Ok(Waypoint {
                frame: as_usize(f)?,
                x: as_f64(x)?,
                y: as_f64(y)?,
            }),
            _ => Err("waypoint must be [frame, x, y]".to_string()),
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if points.is_empty() {
        return Err("path needs at least one waypoint".into());
    }
    Ok(Path2 { points })
}

/// Textures and background prepared once per script.
pub struct Scene<'a> {
    script: &'a SceneScript,
    margin: usize,
    canvas: Patch,
    target_z: Vec<f64>,
    distractor_px: Vec<Patch>,
    target_px: Patch,
}

const MEAN: f64 = 0.5;

/// `MEAN + contrast * (s * a + sqrt(1 - s^2) * b)` for standardized,
/// uncorrelated `a`, `b`, so the result correlates with `a` at exactly `s`.
fn blend(w: usize, h: usize, a: &[f64], b: &[f64], s: f64, contrast: f64) -> Patch {
    let c = (1.0 - s * s).max(0.0).sqrt();
    Patch::from_fn(w, h, |x, y| {
        let i = y * w + x;
        (MEAN + contrast * (s * a[i] + c * b[i])).clamp(0.0, 1.0) as f32
    })
}

/// `b` with its projection onto `a` removed, restandardized.
fn orthogonal(b: &[f64], a: &[f64]) -> Vec<f64> {
    let n = a.len().max(1) as f64;
    let k = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n;
    let r: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - k * x).collect();
    let sd = (r.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        r.iter().map(|v| v / sd).collect()
    } else {
        vec![0.0; r.len()]
    }
}

fn texture(w: usize, h: usize, seed: u64) -> Vec<f64> {
    standardize(&value_noise(w, h, 4.0, seed, 0.5, 0.35))
}

/// Standardized target texture resampled to another object size.
fn resized(z: &[f64], from: (usize, usize), to: (usize, usize)) -> Vec<f64> {
    if from == to {
        return z.to_vec();
    }
    let src = Patch::from_fn(from.0, from.1, |x, y| z[y * from.0 + x] as f32);
    let region = BBox::new(0.0, 0.0, from.0 as f64, from.1 as f64);
    standardize(&crate::geom::resample_unchecked(&src, &region, to.0, to.1, 0.0))
}

impl<'a> Scene<'a> {
    pub fn new(script: &'a SceneScript) -> Result<Self> {
        script.validate()?;
        let margin = script.jitter.abs().ceil() as usize + 1;
        let canvas = value_noise(
            script.width + 2 * margin,
            script.height + 2 * margin,
            24.0,
            script.background_seed,
            MEAN,
            script.background_contrast,
        );
        let (tw, th) = script.target.size;
        let target_z = texture(tw, th, script.target.texture_seed);
        let target_px = blend(tw, th, &target_z, &target_z, 1.0, script.target_contrast);
        let distractor_px = script
            .distractors
            .iter()
            .map(|d| {
                let a = resized(&target_z, (tw, th), d.size);
                let b = orthogonal(&texture(d.size.0, d.size.1, d.texture_seed), &a);
                blend(d.size.0, d.size.1, &a, &b, d.similarity, script.target_contrast)
            })
            .collect();
        Ok(Self {
            script,
            margin,
            canvas,
            target_z,
            distractor_px,
            target_px,
        })
    }

    pub fn target_texture(&self) -> &Patch {
        &self.target_px
    }

    pub fn distractor_texture(&self, i: usize) -> &Patch {
        &self.distractor_px[i]
    }

    fn camera(&self, frame: usize) -> (i64, i64) {
        let j = self.script.jitter;
        if j == 0.0 {
            return (0, 0);
        }
        let f = frame as f64;
        let dx = j * (0.7 * (f * 0.21).sin() + 0.3 * (f * 0.53 + 1.0).sin());
        let dy = j * (0.7 * (f * 0.17 + 2.0).cos() + 0.3 * (f * 0.41).sin());
        (dx.round() as i64, dy.round() as i64)
    }

    fn place(&self, size: (usize, usize), path: &Path2, frame: usize, cam: (i64, i64)) -> Rect {
        let (cx, cy) = path.at(frame);
        let x = (cx - size.0 as f64 / 2.0).round() as i64 - cam.0;
        let y = (cy - size.1 as f64 / 2.0).round() as i64 - cam.1;
        Rect::new(x, y, size.0 as i64, size.1 as i64)
    }

    fn absent(&self, frame: usize) -> bool {
        self.script.absences.iter().any(|&(s, e)| (s..e).contains(&frame))
    }

    pub fn target_rect(&self, frame: usize) -> Rect {
        self.place(self.script.target.size, &self.script.target.path, frame, self.camera(frame))
    }

    pub fn occluder_rects(&self, frame: usize) -> Vec<Rect> {
        let cam = self.camera(frame);
        self.script
            .occluders
            .iter()
            .map(|o| self.place(o.size, &o.path, frame, cam))
            .collect()
    }

    pub fn distractor_rects(&self, frame: usize) -> Vec<Rect> {
        let cam = self.camera(frame);
        self.script
            .distractors
            .iter()
            .map(|d| self.place(d.size, &d.path, frame, cam))
            .collect()
    }

    /// Ground truth: absent during scripted absences and full occlusion.
    pub fn ground_truth(&self, frame: usize) -> Option<BBox> {
        if self.absent(frame) {
            return None;
        }
        let t = self.target_rect(frame);
        let hidden = self
            .occluder_rects(frame)
            .iter()
            .any(|o| o.intersect(&t) == Some(t));
        (!hidden).then(|| t.to_bbox())
    }

    pub fn render(&self, frame: usize) -> Patch {
        let s = self.script;
        let cam = self.camera(frame);
        let (ox, oy) = (self.margin as i64 + cam.0, self.margin as i64 + cam.1);
        let mut img = Patch::from_fn(s.width, s.height, |x, y| {
            self.canvas.get((x as i64 + ox) as usize, (y as i64 + oy) as usize)
        });
        let paste = |img: &mut Patch, r: &Rect, px: &dyn Fn(usize, usize) -> f32| {
            if let Some(c) = r.clip(s.width, s.height) {
                for y in c.y..c.y + c.h {
                    for x in c.x..c.x + c.w {
                        img.set(x as usize, y as usize, px((x - r.x) as usize, (y - r.y) as usize));
                    }
                }
            }
        };
        for (d, r) in self.distractor_px.iter().zip(self.distractor_rects(frame)) {
            paste(&mut img, &r, &|x, y| d.get(x, y));
        }
        if !self.absent(frame) {
            paste(&mut img, &self.target_rect(frame), &|x, y| self.target_px.get(x, y));
        }
        for (o, r) in s.occluders.iter().zip(self.occluder_rects(frame)) {
            let v = o.intensity.clamp(0.0, 1.0) as f32;
            paste(&mut img, &r, &|_, _| v);
        }
        if s.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            rng.set_stream(frame as u64);
            let normal = Normal::new(0.0, s.noise_sigma).expect("finite sigma");
            for v in img.data_mut() {
                *v = (*v as f64 + normal.sample(&mut rng)).clamp(0.0, 1.0) as f32;
            }
        }
        img
    }

    /// Attribute tags implied by the script.
    pub fn attributes(&self) -> Vec<String> {
        let s = self.script;
        let mut tags = Vec::new();
        let (mut full, mut partial, mut fast) = (false, false, false);
        let diag = (s.target.size.0 as f64).hypot(s.target.size.1 as f64);
        for f in 0..s.frames {
            if self.absent(f) {
                continue;
            }
            let t = self.target_rect(f);
            for o in self.occluder_rects(f) {
                match o.intersect(&t) {
                    Some(i) if i == t => full = true,
                    Some(_) => partial = true,
                    None => {}
                }
            }
            if f > 0 {
                let (a, b) = (s.target.path.at(f - 1), s.target.path.at(f));
                if (a.0 - b.0).hypot(a.1 - b.1) > 0.25 * diag {
                    fast = true;
                }
            }
        }
        if s.jitter > 0.0 {
            tags.push("camera-motion");
        }
        if fast {
            tags.push("fast-motion");
        }
        if full {
            tags.push("full-occlusion");
        }
        if !s.absences.is_empty() {
            tags.push("out-of-view");
        }
        if partial {
            tags.push("partial-occlusion");
        }
        if s.distractors.iter().any(|d| d.similarity >= 0.8) {
            tags.push("similar-objects");
        }
        tags.into_iter().map(String::from).collect()
    }

    /// Standardized target texture, for tests that need the exact pattern.
    pub fn target_pattern(&self) -> &[f64] {
        &self.target_z
    }
}

/// Writes `<root>/<name>/` with frames, ground truth, attributes and the
/// script itself.
pub fn render(script: &SceneScript, root: &Path) -> Result<PathBuf> {
    let scene = Scene::new(script)?;
    let dir = root.join(&script.name);
    let frames = dir.join("frames");
    std::fs::create_dir_all(&frames).map_err(|e| Error::io(&frames, e))?;
    (0..script.frames)
        .into_par_iter()
        .try_for_each(|f| pgm::write(&frame_path(&dir, f), &scene.render(f)))?;
    let gt: Vec<Option<BBox>> = (0..script.frames).map(|f| scene.ground_truth(f)).collect();
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("groundtruth.txt", format_boxes(gt.iter().map(|b| b.as_ref())))?;
    let attrs: String = scene.attributes().iter().map(|a| format!("{a}\n")).collect();
    write("attributes.txt", attrs)?;
    write("script.txt", script.to_text())?;
    Ok(dir)
}

/// Random waypoint walk inside `[lo, hi]` boxes, one waypoint every `step`
/// frames, each at most `reach` pixels from the previous one.
fn wander<R: Rng>(rng: &mut R, start: (f64, f64), from: usize, to: usize, step: usize, reach: f64, lo: (f64, f64), hi: (f64, f64)) -> Vec<Waypoint> {
    let mut pts = vec![Waypoint { frame: from, x: start.0, y: start.1 }];
    let (mut x, mut y) = start;
    let mut f = from;
    while f < to {
        f = (f + step).min(to);
        x = (x + rng.random_range(-reach..=reach)).clamp(lo.0, hi.0);
        y = (y + rng.random_range(-reach..=reach)).clamp(lo.1, hi.1);
        pts.push(Waypoint { frame: f, x, y });
    }
    pts
}

const CORNERS: [(f64, f64); 4] = [(32.0, 32.0), (288.0, 32.0), (288.0, 208.0), (32.0, 208.0)];

/// Wanders into corner `c0`, vanishes at frame `a` for `gap` frames and
/// reappears at the opposite corner `c1`, then wanders until `end`.
#[allow(clippy::too_many_arguments)]
fn corner_to_corner<R: Rng>(rng: &mut R, c0: (f64, f64), c1: (f64, f64), a: usize, gap: usize, end: usize, step: usize, reach: f64) -> Vec<Waypoint> {
    let (lo, hi) = ((30.0, 30.0), (290.0, 210.0));
    // Walk backwards in time from the corner so the last visible position
    // is exactly `c0`.
    let mut pts: Vec<Waypoint> = wander(rng, c0, 0, a - 1, step, reach, lo, hi)
        .into_iter()
        .map(|w| Waypoint { frame: a - 1 - w.frame, ..w })
        .collect();
    pts.reverse();
    pts.push(Waypoint { frame: a + gap, x: c1.0, y: c1.1 });
    pts.extend(wander(rng, c1, a + gap, end, step, reach, lo, hi).into_iter().skip(1));
    pts
}

/// Family names of [`standard_suite`], in order.
pub const FAMILIES: [&str; 5] = ["static", "near", "far", "clutter", "occlusion"];

/// Twenty scripts: five families with four seeded variants each.
pub fn standard_suite(seed: u64) -> Vec<SceneScript> {
    let mut out = Vec::with_capacity(20);
    for (fi, family) in FAMILIES.iter().enumerate() {
        for v in 0..4u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(fi as u64 * 16 + v);
            out.push(family_script(family, v, &mut rng));
        }
    }
    out
}

fn base_script<R: Rng>(name: String, frames: usize, rng: &mut R) -> SceneScript {
    let side = rng.random_range(16..=20usize);
    let mut s = SceneScript::new(&name, frames, TargetSpec {
        size: (side, side),
        texture_seed: rng.random(),
        path: Path2::fixed(0.0, 0.0),
    });
    s.seed = rng.random();
    s.background_seed = rng.random();
    s
}

fn family_script<R: Rng>(family: &str, variant: u64, rng: &mut R) -> SceneScript {
    let name = format!("{family}-{variant}");
    let (w, h) = (320.0, 240.0);
    let pad = 30.0;
    let lo = (pad, pad);
    let hi = (w - pad, h - pad);
    match family {
        "static" => {
            let mut s = base_script(name, 200, rng);
            let start = (rng.random_range(80.0..240.0), rng.random_range(60.0..180.0));
            s.target.path.points = wander(rng, start, 0, 199, 50, 4.0, lo, hi);
            s
        }
        "near" => {
            let mut s = base_script(name, 300, rng);
            let start = (rng.random_range(60.0..260.0), rng.random_range(50.0..190.0));
            s.target.path.points = wander(rng, start, 0, 299, 30, 20.0, lo, hi);
            let a = rng.random_range(70..100);
            let b = rng.random_range(180..210);
            s.absences = vec![(a, a + rng.random_range(25..40)), (b, b + rng.random_range(25..40))];
            if variant == 3 {
                s.jitter = 2.0;
            }
            s
        }
        "far" => {
            let mut s = base_script(name, 300, rng);
            let c0 = CORNERS[variant as usize % 4];
            let c1 = CORNERS[(variant as usize + 2) % 4];
            let a = rng.random_range(90..120);
            let gap = rng.random_range(30..50);
            s.target.path.points = corner_to_corner(rng, c0, c1, a, gap, 299, 30, 6.0);
            s.absences = vec![(a, a + gap)];
            s
        }
        "clutter" => {
            let mut s = base_script(name, 200, rng);
            let start = (rng.random_range(120.0..200.0), rng.random_range(90.0..150.0));
            s.target.path.points = wander(rng, start, 0, 199, 40, 25.0, lo, hi);
            let spots = [(60.0, 60.0), (260.0, 180.0), (260.0, 60.0), (60.0, 180.0)];
            for k in 0..2 {
                let p = spots[(variant as usize + 2 * k) % 4];
                s.distractors.push(DistractorSpec {
                    size: s.target.size,
                    similarity: 0.9,
                    texture_seed: rng.random(),
                    path: Path2 {
                        points: wander(rng, p, 0, 199, 40, 25.0, lo, hi),
                    },
                });
            }
            s
        }
        "occlusion" => {
            let mut s = base_script(name, 200, rng);
            let start = (rng.random_range(100.0..220.0), rng.random_range(80.0..160.0));
            s.target.path.points = wander(rng, start, 0, 199, 50, 10.0, lo, hi);
            let (tw, th) = (s.target.size.0 as f64, s.target.size.1 as f64);
            // A bar sweeps across the target, covering part of its height.
            let cover = rng.random_range(0.3..0.6);
            let (cx, cy) = s.target.path.at(100);
            let bar_h = (th * 2.0) as usize;
            let bar_cy = cy - th / 2.0 - th + cover * th;
            let from = rng.random_range(60..90);
            s.occluders.push(OccluderSpec {
                size: ((tw * 0.8) as usize, bar_h),
                intensity: rng.random_range(0.2..0.8),
                path: Path2 {
                    points: vec![
                        Waypoint { frame: from, x: cx - 60.0, y: bar_cy },
                        Waypoint { frame: from + 60, x: cx + 60.0, y: bar_cy },
                    ],
                },
            });
            s
        }
        _ => unreachable!("unknown family"),
    }
}

/// Far-reappearance scenes with one look-alike placed away from both the
/// disappearance and the reappearance points. The absence is short, so the
/// look-alike is in view for several lost frames before the target returns.
pub fn far_distractor_scripts(seed: u64, count: usize, similarity: f64) -> Vec<SceneScript> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1000 + i as u64);
            let mut s = base_script(format!("far-distractor-{i}"), 120, &mut rng);
            s.target.size = (16, 16);
            let k = i % 4;
            let (c0, c1, cd) = (CORNERS[k], CORNERS[(k + 2) % 4], CORNERS[(k + 1) % 4]);
            let a = 50;
            let gap = rng.random_range(6..10);
            s.target.path.points = corner_to_corner(&mut rng, c0, c1, a, gap, 119, 25, 4.0);
            s.absences = vec![(a, a + gap)];
            s.distractors.push(DistractorSpec {
                size: (16, 16),
                similarity,
                texture_seed: rng.random(),
                path: Path2::fixed(cd.0, cd.1),
            });
            s
        })
        .collect()
}

/// Straight-line distance from where a target disappears to where it
/// reappears, relative to the frame diagonal, for each absence.
pub fn reappearance_ratios(script: &SceneScript) -> Vec<f64> {
    let d = diagonal(&Frame::new(Patch::filled(script.width, script.height, 0.0), 0));
    script
        .absences
        .iter()
        .map(|&(s, e)| {
            let a = script.target.path.at(s.saturating_sub(1));
            let b = script.target.path.at(e);
            (a.0 - b.0).hypot(a.1 - b.1) / d
        })
        .collect()
}

/// Two-frame scene with a planted ambiguity for the consensus check.
///
/// The first frame shows a 16x16 pattern on a textured square the size of
/// the search region, centered in a flat 320x240 frame. The second frame
/// holds that whole appearance at the old place minus a copy moved by
/// `offset`, plus the pattern alone at the moved place scaled by a gain. The
/// old place then scores from context alone and the moved place from the
/// pattern alone, and any erased rectangle of the difference lowers the
/// first relative to the second.
#[derive(Debug, Clone)]
pub struct TwoBlob {
    pub init: Frame,
    pub target: BBox,
    pub offset: (i64, i64),
}

impl TwoBlob {
    pub fn new(seed: u64) -> Self {
        let target = BBox::new(152.0, 112.0, 16.0, 16.0);
        let side = (5.0 * target.diagonal()).round() as usize;
        let context = standardize(&value_noise(side, side, 8.0, 2 * seed, 0.5, 0.35));
        let pattern = standardize(&value_noise(16, 16, 4.0, 2 * seed + 1, 0.5, 0.35));
        let mut img = Patch::filled(320, 240, 0.5);
        let (x0, y0) = (160 - side / 2, 120 - side / 2);
        for j in 0..side {
            for i in 0..side {
                img.set(x0 + i, y0 + j, (0.5 + 0.045 * context[j * side + i]) as f32);
            }
        }
        for j in 0..16 {
            for i in 0..16 {
                img.set(152 + i, 112 + j, (0.5 + 0.15 * pattern[j * 16 + i]) as f32);
            }
        }
        Self {
            init: Frame::new(img, 0),
            target,
            offset: (24, 0),
        }
    }

    /// Where the pattern sits in the second frame.
    pub fn moved_target(&self) -> BBox {
        let t = self.target;
        BBox::new(t.x + self.offset.0 as f64, t.y + self.offset.1 as f64, t.w, t.h)
    }

    pub fn frame(&self, gain: f64) -> Frame {
        let img = &self.init.image;
        let (dx, dy) = self.offset;
        let (w, h) = (img.width() as i64, img.height() as i64);
        let at = |x: i64, y: i64| {
            if (0..w).contains(&x) && (0..h).contains(&y) {
                img.get(x as usize, y as usize) as f64 - 0.5
            } else {
                0.0
            }
        };
        let pattern = self.target.to_rect();
        let image = Patch::from_fn(img.width(), img.height(), |x, y| {
            let (x, y) = (x as i64, y as i64);
            let (sx, sy) = (x - dx, y - dy);
            let p = if pattern.contains(sx, sy) { at(sx, sy) } else { 0.0 };
            (0.5 + 0.3 * (at(x, y) - at(sx, sy)) + gain * p) as f32
        });
        Frame::new(image, 1)
    }

    /// Largest pattern gain (to 2^-30 of the bracket) at which `localizer`,
    /// trained on the first frame, still lands on the old place, together
    /// with that frame. `None` when no gain in `[0, 8]` flips the answer.
    pub fn tie<L: Localizer + ?Sized>(&self, localizer: &L, search_scale: f64) -> Option<(f64, Frame)> {
        let home = self.target.center();
        let stays = |g: f64| {
            let f = self.frame(g);
            localizer.localize(&f, home, search_scale).bbox.center().distance(&home) < 4.0
        };
        let (mut lo, mut hi) = (0.0, 8.0);
        if !stays(lo) || stays(hi) {
            return None;
        }
        for _ in 0..30 {
            let m = 0.5 * (lo + hi);
            if stays(m) {
                lo = m;
            } else {
                hi = m;
            }
        }
        Some((lo, self.frame(lo)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SceneScript {
        let mut s = SceneScript::new("t", 30, TargetSpec {
            size: (12, 10),
            texture_seed: 4,
            path: Path2 {
                points: vec![Waypoint { frame: 0, x: 40.0, y: 40.0 }, Waypoint { frame: 29, x: 60.0, y: 50.0 }],
            },
        });
        s.width = 96;
        s.height = 80;
        s.absences = vec![(10, 15)];
        s.distractors.push(DistractorSpec {
            size: (12, 10),
            similarity: 1.0,
            texture_seed: 9,
            path: Path2::fixed(20.0, 60.0),
        });
        s.occluders.push(OccluderSpec {
            size: (20, 20),
            intensity: 0.1,
            path: Path2 {
                points: vec![Waypoint { frame: 20, x: 0.0, y: 45.0 }, Waypoint { frame: 29, x: 90.0, y: 45.0 }],
            },
        });
        s.noise_sigma = 0.0;
        s
    }

    #[test]
    fn text_round_trip() {
        let s = small();
        let back = SceneScript::from_text(&s.to_text(), Path::new("x")).unwrap();
        assert_eq!(back, s);
        for (i, sc) in standard_suite(42).iter().enumerate() {
            let back = SceneScript::from_text(&sc.to_text(), Path::new("x")).unwrap();
            assert_eq!(&back, sc, "suite script {i}");
        }
    }

    #[test]
    fn rejects_bad_scripts() {
        let p = Path::new("x");
        assert!(SceneScript::from_text("frames = 10", p).is_err());
        let mut s = small();
        s.absences = vec![(5, 12), (10, 20)];
        assert!(SceneScript::from_text(&s.to_text(), p).is_err());
        let text = small().to_text() + "colour = 3\n";
        assert!(SceneScript::from_text(&text, p).is_err());
    }

    #[test]
    fn identical_distractor_pixels() {
        let s = small();
        let scene = Scene::new(&s).unwrap();
        assert_eq!(scene.distractor_texture(0), scene.target_texture());
        let img = scene.render(0);
        let t = scene.target_rect(0);
        let d = scene.distractor_rects(0)[0];
        for y in 0..10 {
            for x in 0..12 {
                assert_eq!(
                    img.get((t.x + x) as usize, (t.y + y) as usize),
                    img.get((d.x + x) as usize, (d.y + y) as usize)
                );
            }
        }
    }

    #[test]
    fn similarity_is_correlation() {
        let mut s = small();
        s.distractors[0].similarity = 0.6;
        let scene = Scene::new(&s).unwrap();
        let a = standardize(scene.target_texture());
        let b = standardize(scene.distractor_texture(0));
        let r: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64;
        assert!((r - 0.6).abs() < 0.02, "{r}");
    }

    #[test]
    fn ground_truth_and_attributes() {
        let s = small();
        let scene = Scene::new(&s).unwrap();
        for f in 10..15 {
            assert_eq!(scene.ground_truth(f), None);
        }
        assert!(scene.ground_truth(9).is_some());
        let attrs = scene.attributes();
        assert!(attrs.contains(&"out-of-view".to_string()));
        assert!(attrs.contains(&"similar-objects".to_string()));
        assert!(attrs.contains(&"full-occlusion".to_string()));
        let hidden = (15..30).filter(|&f| scene.ground_truth(f).is_none()).count();
        assert!(hidden > 0);
    }

    #[test]
    fn render_is_deterministic() {
        let mut s = small();
        s.noise_sigma = 0.02;
        s.jitter = 2.0;
        let a = Scene::new(&s).unwrap();
        let b = Scene::new(&s).unwrap();
        for f in [0, 7, 29] {
            assert_eq!(a.render(f), b.render(f));
        }
    }

    #[test]
    fn suite_shape() {
        let suite = standard_suite(42);
        assert_eq!(suite.len(), 20);
        assert_eq!(suite, standard_suite(42));
        assert_ne!(suite, standard_suite(43));
        for s in &suite {
            s.validate().unwrap();
            assert!((200..=400).contains(&s.frames));
            let family = s.name.split('-').next().unwrap();
            match family {
                "static" => assert!(s.absences.is_empty()),
                "far" => assert!(reappearance_ratios(s).iter().all(|&r| r >= 0.7), "{}", s.name),
                "clutter" => {
                    assert_eq!(s.distractors.len(), 2);
                    assert!(s.distractors.iter().all(|d| d.similarity == 0.9));
                }
                _ => {}
            }
        }
    }

    #[test]
    fn far_distractor_layout() {
        for s in far_distractor_scripts(5, 8, 0.5) {
            s.validate().unwrap();
            assert!(reappearance_ratios(&s)[0] >= 0.7);
        }
    }
}
