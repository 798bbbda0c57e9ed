use super::{BinaryImage, GrayImage, ImagingError};

#[derive(Debug, Clone, PartialEq)]
pub struct Otsu {
    /// Pixels at or below this level are foreground.
    pub threshold: u8,
    pub binary: BinaryImage,
    pub foreground_mean: f64,
    pub background_mean: f64,
}

/// Between-class variance of splitting a 256-bin histogram after bin `t`, or `None` when
/// one class would be empty.
pub fn between_class_variance(hist: &[u64; 256], t: usize) -> Option<f64> {
    let n0: u64 = hist[..=t].iter().sum();
    let n: u64 = hist.iter().sum();
    let n1 = n - n0;
    if n0 == 0 || n1 == 0 {
        return None;
    }
    let s0: f64 = hist[..=t].iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let s: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (w0, w1) = (n0 as f64 / n as f64, n1 as f64 / n as f64);
    let (m0, m1) = (s0 / n0 as f64, (s - s0) / n1 as f64);
    Some(w0 * w1 * (m0 - m1) * (m0 - m1))
}

pub fn histogram(g: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &p in g.pixels() {
        h[p as usize] += 1;
    }
    h
}

/// Otsu threshold over the 256-bin histogram; the lowest level wins ties.
pub fn otsu_threshold(g: &GrayImage) -> Result<Otsu, ImagingError> {
    let hist = histogram(g);
    let n: u64 = hist.iter().sum();
    let total: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut n0, mut s0) = (0u64, 0.0f64);
    let mut best: Option<(usize, f64, f64, f64)> = None;
    for t in 0..255 {
        n0 += hist[t];
        s0 += t as f64 * hist[t] as f64;
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let (m0, m1) = (s0 / n0 as f64, (total - s0) / n1 as f64);
        let v = (n0 as f64 / n as f64) * (n1 as f64 / n as f64) * (m0 - m1) * (m0 - m1);
        if best.is_none_or(|(_, bv, ..)| v > bv) {
            best = Some((t, v, m0, m1));
        }
    }
    let (t, _, m0, m1) = best.ok_or(ImagingError::DegenerateHistogram)?;
    let t = t as u8;
    let binary =
        BinaryImage { width: g.width(), height: g.height(), data: g.pixels().iter().map(|&p| p <= t).collect() };
    Ok(Otsu { threshold: t, binary, foreground_mean: m0, background_mean: m1 })
}
