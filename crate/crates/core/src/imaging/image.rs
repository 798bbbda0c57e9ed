use std::path::Path;

use super::ImagingError;

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(ImagingError::EmptyImage);
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, level: u8) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![level; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self, ImagingError> {
        let pixels = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Mirror left to right.
    pub fn flip_horizontal(&self) -> Self {
        let w = self.width;
        Self::from_fn(w, self.height, |x, y| self.get(w - 1 - x, y)).expect("same shape")
    }

    pub fn invert(&self) -> Self {
        Self { pixels: self.pixels.iter().map(|&p| 255 - p).collect(), ..self.clone() }
    }

    pub fn to_float(&self) -> FloatImage {
        FloatImage { width: self.width, height: self.height, data: self.pixels.iter().map(|&p| f32::from(p)).collect() }
    }

    /// Mean gray level of the outermost pixel ring.
    pub fn border_mean(&self) -> f64 {
        let (w, h) = (self.width, self.height);
        let mut sum = 0u64;
        let mut n = 0u64;
        for y in 0..h {
            for x in 0..w {
                if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                    sum += u64::from(self.get(x, y));
                    n += 1;
                }
            }
        }
        sum as f64 / n as f64
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ImagingError> {
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .ok_or(ImagingError::EmptyImage)?;
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).map_err(|e| ImagingError::Codec(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImagingError> {
        std::fs::write(path, self.encode_png()?).map_err(|e| ImagingError::Codec(e.to_string()))
    }
}

/// Floating point intensity raster used between filtering stages.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl FloatImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Value at an edge-replicated integer position.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    /// Bilinear sample with pixel centres at integer coordinates, edges replicated.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (fx, fy) = (x.floor(), y.floor());
        let (tx, ty) = (x - fx, y - fy);
        let (x0, y0) = (fx as isize, fy as isize);
        let p = |dx: isize, dy: isize| f64::from(self.get_clamped(x0 + dx, y0 + dy));
        let top = p(0, 0) * (1.0 - tx) + p(1, 0) * tx;
        let bottom = p(0, 1) * (1.0 - tx) + p(1, 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }

    /// Quantizes to gray levels keeping the total intensity: every pixel is floored, then the
    /// pixels with the largest remainders are raised until the rounded total is reached.
    pub fn to_gray_conserving(&self) -> GrayImage {
        let clamped: Vec<f64> = self.data.iter().map(|&v| f64::from(v).clamp(0.0, 255.0)).collect();
        let mut out: Vec<u8> = clamped.iter().map(|v| v.floor() as u8).collect();
        let total: f64 = clamped.iter().sum();
        let floored: u64 = out.iter().map(|&v| u64::from(v)).sum();
        let extra = (total.round() as u64).saturating_sub(floored) as usize;
        if extra > 0 {
            let mut order: Vec<usize> = (0..out.len()).filter(|&i| out[i] < 255).collect();
            let key = |i: &usize| clamped[*i] - clamped[*i].floor();
            order.sort_by(|a, b| key(b).partial_cmp(&key(a)).unwrap().then(a.cmp(b)));
            for &i in order.iter().take(extra) {
                out[i] += 1;
            }
        }
        GrayImage::new(self.width, self.height, out).expect("non-empty float image")
    }

    /// Rounds to the nearest gray level, saturating.
    pub fn to_gray(&self) -> GrayImage {
        let pixels = self.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect();
        GrayImage::new(self.width, self.height, pixels).expect("non-empty float image")
    }
}

/// Dark-is-foreground mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let data = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// False outside the raster.
    #[inline]
    pub fn get_or_false(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Decoded input photograph before grayscale conversion.
#[derive(Debug, Clone, PartialEq)]
pub enum RawImage {
    Gray(GrayImage),
    Rgb { width: usize, height: usize, data: Vec<u8> },
}

impl RawImage {
    pub fn width(&self) -> usize {
        match self {
            RawImage::Gray(g) => g.width(),
            RawImage::Rgb { width, .. } => *width,
        }
    }

    pub fn height(&self) -> usize {
        match self {
            RawImage::Gray(g) => g.height(),
            RawImage::Rgb { height, .. } => *height,
        }
    }

    /// Luma conversion with ITU-R BT.601 weights.
    pub fn to_float_gray(&self) -> Result<FloatImage, ImagingError> {
        match self {
            RawImage::Gray(g) => Ok(g.to_float()),
            RawImage::Rgb { width, height, data } => {
                if *width == 0 || *height == 0 || data.len() != width * height * 3 {
                    return Err(ImagingError::EmptyImage);
                }
                let data = data
                    .chunks_exact(3)
                    .map(|c| 0.299 * f32::from(c[0]) + 0.587 * f32::from(c[1]) + 0.114 * f32::from(c[2]))
                    .collect();
                Ok(FloatImage { width: *width, height: *height, data })
            }
        }
    }

    pub fn from_dynamic(img: &image::DynamicImage) -> Result<Self, ImagingError> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        if w == 0 || h == 0 {
            return Err(ImagingError::EmptyImage);
        }
        match img {
            image::DynamicImage::ImageLuma8(g) => Ok(RawImage::Gray(GrayImage::new(w, h, g.as_raw().clone())?)),
            image::DynamicImage::ImageLuma16(_) | image::DynamicImage::ImageLumaA8(_) => {
                Ok(RawImage::Gray(GrayImage::new(w, h, img.to_luma8().into_raw())?))
            }
            _ => Ok(RawImage::Rgb { width: w, height: h, data: img.to_rgb8().into_raw() }),
        }
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, ImagingError> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| ImagingError::Codec(e.to_string()))?;
        Self::from_dynamic(&img)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, ImagingError> {
        let bytes = std::fs::read(path.as_ref())
            .map_err(|e| ImagingError::Codec(format!("{}: {e}", path.as_ref().display())))?;
        Self::decode_png(&bytes)
    }
}

impl From<GrayImage> for RawImage {
    fn from(g: GrayImage) -> Self {
        RawImage::Gray(g)
    }
}
