//! Frames, boxes and the small set of pixel operations every other module
//! builds on. Coordinates are real-valued with a top-left origin and y
//! pointing down.

use crate::error::{Error, Result};

/// A single-channel image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Patch {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "patch dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "patch {width}x{height} needs {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        assert!(width > 0 && height > 0, "patch dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        assert!(width > 0 && height > 0, "patch dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn mean(&self) -> f32 {
        (self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64) as f32
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    /// Mean over the part of `r` that lies inside the patch, or the global
    /// mean when the overlap is empty.
    pub fn region_mean(&self, r: &Rect) -> f32 {
        match r.clip(self.width, self.height) {
            Some(c) => {
                let mut acc = 0.0f64;
                for y in c.y..c.y + c.h {
                    for x in c.x..c.x + c.w {
                        acc += self.get(x as usize, y as usize) as f64;
                    }
                }
                (acc / c.area() as f64) as f32
            }
            None => self.mean(),
        }
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0, 0, self.width as i64, self.height as i64)
    }
}

/// A video frame: a [`Patch`] plus its position in the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub image: Patch,
    pub index: u64,
}

impl Frame {
    pub fn new(image: Patch, index: u64) -> Self {
        Self { image, index }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.image.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.image.height()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned box with real-valued coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(c: Point, w: f64, h: f64) -> Self {
        Self::new(c.x - w / 2.0, c.y - h / 2.0, w, h)
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0
            && self.h > 0.0
            && self.x.is_finite()
            && self.y.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn diagonal(&self) -> f64 {
        self.w.hypot(self.h)
    }

    /// Nearest integer-aligned rectangle (rounded corners).
    pub fn to_rect(&self) -> Rect {
        let x0 = self.x.round() as i64;
        let y0 = self.y.round() as i64;
        let x1 = (self.x + self.w).round() as i64;
        let y1 = (self.y + self.h).round() as i64;
        Rect::new(x0, y0, (x1 - x0).max(1), (y1 - y0).max(1))
    }

    pub fn inside(&self, width: usize, height: usize) -> bool {
        self.x >= 0.0
            && self.y >= 0.0
            && self.x + self.w <= width as f64
            && self.y + self.h <= height as f64
    }
}

/// Integer-aligned rectangle. May extend past a frame until clipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl Rect {
    pub const fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> i64 {
        self.w.max(0) * self.h.max(0)
    }

    pub fn center(&self) -> Point {
        Point::new(
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    pub fn contains_point(&self, p: Point) -> bool {
        p.x >= self.x as f64
            && p.x < (self.x + self.w) as f64
            && p.y >= self.y as f64
            && p.y < (self.y + self.h) as f64
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    /// The part of the rectangle inside a `width`x`height` frame.
    pub fn clip(&self, width: usize, height: usize) -> Option<Rect> {
        self.intersect(&Rect::new(0, 0, width as i64, height as i64))
    }

    pub fn to_bbox(&self) -> BBox {
        BBox::new(self.x as f64, self.y as f64, self.w as f64, self.h as f64)
    }
}

/// Intersection over union of two boxes; 0 when they are disjoint.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let iy = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

pub fn diagonal(frame: &Frame) -> f64 {
    (frame.width() as f64).hypot(frame.height() as f64)
}

/// Bilinear sample at real-valued source coordinates; taps outside the image
/// read `fill`.
#[inline]
fn bilinear(img: &Patch, x: f64, y: f64, fill: f32) -> f32 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = (x - x0) as f32;
    let fy = (y - y0) as f32;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let (w, h) = (img.width as i64, img.height as i64);
    let tap = |xx: i64, yy: i64| -> f32 {
        if xx >= 0 && yy >= 0 && xx < w && yy < h {
            img.data[(yy * w + xx) as usize]
        } else {
            fill
        }
    };
    let top = tap(x0, y0) * (1.0 - fx) + tap(x0 + 1, y0) * fx;
    let bottom = tap(x0, y0 + 1) * (1.0 - fx) + tap(x0 + 1, y0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resamples a real-valued region of `img` to `out_w`x`out_h`.
///
/// Output pixel centers are spread evenly over the region, so a region equal
/// to the whole image at native size reproduces it exactly. Source pixels
/// outside the image read as the image mean.
pub fn resample_region(img: &Patch, region: &BBox, out_w: usize, out_h: usize) -> Result<Patch> {
    let bounds = BBox::new(0.0, 0.0, img.width as f64, img.height as f64);
    if !region.is_valid() || iou(region, &bounds) <= 0.0 {
        return Err(Error::EmptyCrop);
    }
    Ok(resample_unchecked(img, region, out_w, out_h, img.mean()))
}

pub(crate) fn resample_unchecked(
    img: &Patch,
    region: &BBox,
    out_w: usize,
    out_h: usize,
    fill: f32,
) -> Patch {
    let sx = region.w / out_w as f64;
    let sy = region.h / out_h as f64;
    let (w, h) = (img.width as i64, img.height as i64);
    let xs: Vec<(f64, i64, f32)> = (0..out_w)
        .map(|i| {
            let x = region.x + (i as f64 + 0.5) * sx - 0.5;
            let x0 = x.floor();
            (x, x0 as i64, (x - x0) as f32)
        })
        .collect();
    let mut data = Vec::with_capacity(out_w * out_h);
    for j in 0..out_h {
        let y = region.y + (j as f64 + 0.5) * sy - 0.5;
        let y0 = y.floor();
        let fy = (y - y0) as f32;
        let y0 = y0 as i64;
        let rows_inside = y0 >= 0 && y0 + 1 < h;
        for &(x, x0, fx) in &xs {
            if rows_inside && x0 >= 0 && x0 + 1 < w {
                let i = (y0 * w + x0) as usize;
                let d = &img.data;
                let wi = w as usize;
                let top = d[i] * (1.0 - fx) + d[i + 1] * fx;
                let bottom = d[i + wi] * (1.0 - fx) + d[i + wi + 1] * fx;
                data.push(top * (1.0 - fy) + bottom * fy);
            } else {
                data.push(bilinear(img, x, y, fill));
            }
        }
    }
    Patch {
        width: out_w,
        height: out_h,
        data,
    }
}

/// Crops `r` out of the frame and resamples it to `out_size`.
pub fn extract_patch(frame: &Frame, r: &Rect, out_size: (usize, usize)) -> Result<Patch> {
    if r.w <= 0 || r.h <= 0 || r.clip(frame.width(), frame.height()).is_none() {
        return Err(Error::EmptyCrop);
    }
    resample_region(&frame.image, &r.to_bbox(), out_size.0, out_size.1)
}

/// Copy of `frame` with the pixels inside `r` set to `fill`.
pub fn erase_rect(frame: &Frame, r: &Rect, fill: f32) -> Frame {
    let mut out = frame.clone();
    if let Some(c) = r.clip(frame.width(), frame.height()) {
        for y in c.y..c.y + c.h {
            for x in c.x..c.x + c.w {
                out.image.set(x as usize, y as usize, fill);
            }
        }
    }
    out
}

/// Copy of `background` with `target` pasted with its top-left corner at
/// `at`. `at` must match the target's size and fit inside the background.
pub fn composite(target: &Patch, background: &Patch, at: &Rect) -> Result<Patch> {
    if at.w != target.width as i64 || at.h != target.height as i64 {
        return Err(Error::DimensionMismatch(format!(
            "paste rect {}x{} does not match patch {}x{}",
            at.w, at.h, target.width, target.height
        )));
    }
    if at.x < 0
        || at.y < 0
        || at.x + at.w > background.width as i64
        || at.y + at.h > background.height as i64
    {
        return Err(Error::DimensionMismatch(format!(
            "paste rect {at:?} exceeds background {}x{}",
            background.width, background.height
        )));
    }
    let mut out = background.clone();
    for ty in 0..target.height {
        let row = (at.y as usize + ty) * out.width + at.x as usize;
        out.data[row..row + target.width]
            .copy_from_slice(&target.data[ty * target.width..(ty + 1) * target.width]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(w: usize, h: usize) -> Frame {
        Frame::new(
            Patch::from_fn(w, h, |x, y| ((x * 7 + y * 13) % 17) as f32 / 16.0),
            0,
        )
    }

    #[test]
    fn iou_identity_and_disjoint() {
        let b = BBox::new(3.5, 2.0, 10.0, 4.0);
        assert_eq!(iou(&b, &b), 1.0);
        let a = BBox::new(0.0, 0.0, 1.0, 1.0);
        let c = BBox::new(5.0, 5.0, 1.0, 1.0);
        assert_eq!(iou(&a, &c), 0.0);
    }

    #[test]
    fn iou_matches_rasterized_count() {
        // Pixel-count oracle on a 10x upsampled grid.
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        let b = BBox::new(1.0, 1.0, 2.0, 2.0);
        let scale = 10;
        let (mut inter, mut uni) = (0u32, 0u32);
        for gy in 0..3 * scale {
            for gx in 0..3 * scale {
                let px = (gx as f64 + 0.5) / scale as f64;
                let py = (gy as f64 + 0.5) / scale as f64;
                let in_a = px < 2.0 && py < 2.0;
                let in_b = px >= 1.0 && py >= 1.0;
                inter += (in_a && in_b) as u32;
                uni += (in_a || in_b) as u32;
            }
        }
        let oracle = inter as f64 / uni as f64;
        assert!((oracle - 1.0 / 7.0).abs() < 1e-12);
        assert!((iou(&a, &b) - oracle).abs() < 1e-12);
    }

    #[test]
    fn diagonal_examples() {
        let f = |w, h| Frame::new(Patch::filled(w, h, 0.0), 0);
        assert_eq!(diagonal(&f(3, 4)), 5.0);
        assert!((diagonal(&f(1, 1)) - 2f64.sqrt()).abs() < 1e-15);
        assert!((diagonal(&f(1280, 720)) - 1468.6047806).abs() < 1e-6);
    }

    #[test]
    fn identity_crop_reproduces_frame() {
        let f = ramp(9, 6);
        let p = extract_patch(&f, &f.image.full_rect(), (9, 6)).unwrap();
        assert_eq!(p, f.image);
    }

    #[test]
    fn out_of_frame_half_is_mean() {
        let f = ramp(4, 4);
        let mean = f.image.mean();
        let p = extract_patch(&f, &Rect::new(-4, 0, 8, 4), (8, 4)).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(p.get(x, y), mean);
                assert_eq!(p.get(x + 4, y), f.image.get(x, y));
            }
        }
    }

    #[test]
    fn crop_fully_outside_is_error() {
        let f = ramp(4, 4);
        assert!(matches!(
            extract_patch(&f, &Rect::new(10, 10, 3, 3), (3, 3)),
            Err(Error::EmptyCrop)
        ));
    }

    #[test]
    fn upscale_matches_bilinear_formula() {
        let f = Frame::new(Patch::new(2, 2, vec![0.0, 1.0, 0.5, 0.25]).unwrap(), 0);
        let p = extract_patch(&f, &Rect::new(0, 0, 2, 2), (4, 4)).unwrap();
        let mean = 0.4375f64;
        let px = |x: i64, y: i64| -> f64 {
            if (0..2).contains(&x) && (0..2).contains(&y) {
                [[0.0, 1.0], [0.5, 0.25]][y as usize][x as usize]
            } else {
                mean
            }
        };
        for j in 0..4 {
            for i in 0..4 {
                // Output center (i + 0.5) * 0.5 - 0.5 in source pixels.
                let sx = (i as f64 + 0.5) * 0.5 - 0.5;
                let sy = (j as f64 + 0.5) * 0.5 - 0.5;
                let (x0, y0) = (sx.floor(), sy.floor());
                let (ax, ay) = (sx - x0, sy - y0);
                let (x0, y0) = (x0 as i64, y0 as i64);
                let expect = px(x0, y0) * (1.0 - ax) * (1.0 - ay)
                    + px(x0 + 1, y0) * ax * (1.0 - ay)
                    + px(x0, y0 + 1) * (1.0 - ax) * ay
                    + px(x0 + 1, y0 + 1) * ax * ay;
                assert!((p.get(i, j) as f64 - expect).abs() < 1e-6, "({i},{j})");
            }
        }
    }

    #[test]
    fn erase_examples() {
        let f = ramp(8, 5);
        assert_eq!(erase_rect(&f, &Rect::new(20, 20, 3, 3), 0.0), f);
        let full = erase_rect(&f, &f.image.full_rect(), 0.5);
        assert!(full.image.data().iter().all(|&v| v == 0.5));

        let r = Rect::new(2, 1, 3, 2);
        let inside: f64 = (1..3)
            .flat_map(|y| (2..5).map(move |x| (x, y)))
            .map(|(x, y)| f.image.get(x, y) as f64)
            .sum();
        let e = erase_rect(&f, &r, 0.25);
        let expect = f.image.sum() - (inside - 0.25 * 6.0);
        assert!((e.image.sum() - expect).abs() < 1e-9);
    }

    #[test]
    fn composite_examples() {
        let bg = ramp(6, 6).image;
        let r = Rect::new(1, 2, 3, 2);
        let piece = extract_patch(&Frame::new(bg.clone(), 0), &r, (3, 2)).unwrap();
        assert_eq!(composite(&piece, &bg, &r).unwrap(), bg);

        let black = Patch::filled(3, 3, 0.0);
        let white = Patch::filled(1, 1, 1.0);
        let out = composite(&white, &black, &Rect::new(1, 1, 1, 1)).unwrap();
        assert_eq!(out.data().iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(out.get(1, 1), 1.0);

        let patch = Patch::from_fn(2, 3, |x, y| 0.1 * (x + y) as f32);
        let at = Rect::new(3, 2, 2, 3);
        let covered: f64 = (2..5)
            .flat_map(|y| (3..5).map(move |x| (x, y)))
            .map(|(x, y)| bg.get(x, y) as f64)
            .sum();
        let out = composite(&patch, &bg, &at).unwrap();
        assert!((out.sum() - (bg.sum() - covered + patch.sum())).abs() < 1e-9);

        assert!(composite(&patch, &bg, &Rect::new(5, 5, 2, 3)).is_err());
        assert!(composite(&patch, &bg, &Rect::new(0, 0, 3, 3)).is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.1..40.0f64, 0.1..40.0f64)
            .prop_map(|(x, y, w, h)| BBox::new(x, y, w, h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            if ab == 1.0 {
                prop_assert!((a.x - b.x).abs() < 1e-9 && (a.w - b.w).abs() < 1e-9);
            }
        }

        #[test]
        fn erase_is_pure(x in -5i64..10, y in -5i64..10, w in 0i64..8, h in 0i64..8) {
            let f = ramp(7, 7);
            let before = f.clone();
            let _ = erase_rect(&f, &Rect::new(x, y, w, h), 0.3);
            prop_assert_eq!(f, before);
        }
    }
}
