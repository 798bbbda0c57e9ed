use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{FloatImage, GrayImage, ImagingError, RawImage};

/// Normalized 1-D Gaussian truncated at 3 sigma.
pub fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let r = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter().map(|v| (v / s) as f32).collect()
}

/// Separable Gaussian blur with edge replication.
pub fn gaussian_blur(img: &FloatImage, sigma: f64) -> FloatImage {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = (img.width, img.height);
    let mut tmp = FloatImage::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                acc += kv * img.get_clamped(x as isize + j as isize - r, y as isize);
            }
            tmp.data[y * w + x] = acc;
        }
    }
    let mut out = FloatImage::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                acc += kv * tmp.get_clamped(x as isize, y as isize + j as isize - r);
            }
            out.data[y * w + x] = acc;
        }
    }
    out
}

/// Grayscale conversion followed by Gaussian smoothing, kept in floating point.
pub fn preprocess_float(raw: &RawImage, sigma: f64) -> Result<FloatImage, ImagingError> {
    if !(sigma > 0.0) {
        return Err(ImagingError::InvalidParameter(format!("sigma {sigma} must be > 0")));
    }
    Ok(gaussian_blur(&raw.to_float_gray()?, sigma))
}

pub fn preprocess(raw: &RawImage, sigma: f64) -> Result<GrayImage, ImagingError> {
    Ok(preprocess_float(raw, sigma)?.to_gray_conserving())
}

pub fn sobel_magnitude(g: &GrayImage) -> Result<FloatImage, ImagingError> {
    sobel_magnitude_float(&g.to_float())
}

/// Gradient magnitude of the 3x3 Sobel pair, borders replicated.
pub fn sobel_magnitude_float(g: &FloatImage) -> Result<FloatImage, ImagingError> {
    if g.width < 3 || g.height < 3 {
        return Err(ImagingError::ImageTooSmall { width: g.width, height: g.height });
    }
    let mut out = FloatImage::zeros(g.width, g.height);
    for y in 0..g.height as isize {
        for x in 0..g.width as isize {
            let p = |dx: isize, dy: isize| g.get_clamped(x + dx, y + dy);
            let gx = p(1, -1) + 2.0 * p(1, 0) + p(1, 1) - p(-1, -1) - 2.0 * p(-1, 0) - p(-1, 1);
            let gy = p(-1, 1) + 2.0 * p(0, 1) + p(1, 1) - p(-1, -1) - 2.0 * p(0, -1) - p(1, -1);
            out.data[y as usize * g.width + x as usize] = gx.hypot(gy);
        }
    }
    Ok(out)
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub fn full(width: usize, height: usize) -> Self {
        Self { x: 0, y: 0, width, height }
    }

    fn fits(&self, width: usize, height: usize) -> bool {
        self.x + self.width <= width && self.y + self.height <= height
    }
}

/// Bounding box of the largest 8-connected region whose gradient exceeds
/// `fraction * max`, grown by `margin` of its size on every side, made square and kept
/// inside the image. The flag is set when the square had to be clipped.
pub fn locate_roi(grad: &FloatImage, fraction: f32, margin: f64) -> Result<(Roi, bool), ImagingError> {
    let (w, h) = (grad.width, grad.height);
    let thr = fraction * grad.max();
    if !(thr > 0.0) {
        return Err(ImagingError::NoForeground);
    }
    let mut label = vec![false; w * h];
    let mut best: Option<(usize, [usize; 4])> = None;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if label[start] || grad.data[start] < thr {
            continue;
        }
        label[start] = true;
        queue.push_back(start);
        let mut n = 0;
        let mut bb = [usize::MAX, usize::MAX, 0, 0];
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            n += 1;
            bb = [bb[0].min(x), bb[1].min(y), bb[2].max(x), bb[3].max(y)];
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !label[j] && grad.data[j] >= thr {
                        label[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if best.is_none_or(|(m, _)| n > m) {
            best = Some((n, bb));
        }
    }
    let (_, [x0, y0, x1, y1]) = best.ok_or(ImagingError::NoForeground)?;
    let (bw, bh) = ((x1 - x0 + 1) as f64, (y1 - y0 + 1) as f64);
    let side = (bw.max(bh) * (1.0 + 2.0 * margin)).ceil();
    let (cx, cy) = ((x0 + x1) as f64 / 2.0, (y0 + y1) as f64 / 2.0);
    let place = |c: f64, extent: usize| -> (usize, usize) {
        let len = (side as usize).min(extent);
        let start = (c - len as f64 / 2.0).round().max(0.0) as usize;
        (start.min(extent - len), len)
    };
    let (x, width) = place(cx, w);
    let (y, height) = place(cy, h);
    let clipped = width != side as usize || height != side as usize;
    Ok((Roi { x, y, width, height }, clipped))
}

pub fn crop_and_resize(g: &GrayImage, roi: Roi, size: usize) -> Result<GrayImage, ImagingError> {
    Ok(crop_and_resize_float(&g.to_float(), roi, size)?.to_gray())
}

/// Bilinear resample of `roi` onto a `size` x `size` grid, aligning pixel areas so an
/// equal-size crop is the identity.
pub fn crop_and_resize_float(g: &FloatImage, roi: Roi, size: usize) -> Result<FloatImage, ImagingError> {
    if !roi.fits(g.width, g.height) || roi.width * roi.height < 4 || roi.width == 0 || roi.height == 0 {
        return Err(ImagingError::RoiOutOfBounds);
    }
    let sx = roi.width as f64 / size as f64;
    let sy = roi.height as f64 / size as f64;
    let crop = |x: isize, y: isize| {
        let x = x.clamp(0, roi.width as isize - 1) as usize + roi.x;
        let y = y.clamp(0, roi.height as isize - 1) as usize + roi.y;
        f64::from(g.get(x, y))
    };
    let mut out = FloatImage::zeros(size, size);
    for j in 0..size {
        let v = (j as f64 + 0.5) * sy - 0.5;
        let (fy, ty) = (v.floor(), v - v.floor());
        for i in 0..size {
            let u = (i as f64 + 0.5) * sx - 0.5;
            let (fx, tx) = (u.floor(), u - u.floor());
            let (x0, y0) = (fx as isize, fy as isize);
            let top = crop(x0, y0) * (1.0 - tx) + crop(x0 + 1, y0) * tx;
            let bot = crop(x0, y0 + 1) * (1.0 - tx) + crop(x0 + 1, y0 + 1) * tx;
            out.data[j * size + i] = (top * (1.0 - ty) + bot * ty) as f32;
        }
    }
    Ok(out)
}

/// Maps a point of the resized crop back to source image coordinates.
pub fn resized_to_source(roi: Roi, size: usize, x: f64, y: f64) -> (f64, f64) {
    let sx = roi.width as f64 / size as f64;
    let sy = roi.height as f64 / size as f64;
    (roi.x as f64 + (x + 0.5) * sx - 0.5, roi.y as f64 + (y + 0.5) * sy - 0.5)
}
