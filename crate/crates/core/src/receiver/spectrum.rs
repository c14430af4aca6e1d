use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Power spectral density on angular frequencies ω_k = 2πk/(segment·dt).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub power: Vec<f64>,
}

impl Spectrum {
    /// Mean power over ω ∈ [lo, hi].
    pub fn band_mean(&self, lo: f64, hi: f64) -> Option<f64> {
        let vals: Vec<f64> =
            self.omega.iter().zip(&self.power).filter(|(w, _)| **w >= lo && **w <= hi).map(|(_, p)| *p).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Welch estimate with Hann-windowed segments overlapping by half.
///
/// Normalized as a two-sided density in time units, so white noise with
/// per-sample variance σ² has flat power σ² dt.
pub fn welch_periodogram(samples: &[f64], dt: f64, segment: usize) -> Result<Spectrum> {
    if segment < 8 || samples.len() < segment {
        return Err(Error::InvalidParameter(format!(
            "need at least one segment of {segment} ≥ 8 samples, have {}",
            samples.len()
        )));
    }
    let window: Vec<f64> = (0..segment)
        .map(|i| {
            let s = (std::f64::consts::PI * i as f64 / segment as f64).sin();
            s * s
        })
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment);
    let bins = segment / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); segment];
    let hop = segment / 2;
    let mut count = 0usize;
    let mut start = 0;
    while start + segment <= samples.len() {
        let seg = &samples[start..start + segment];
        let mean = seg.iter().sum::<f64>() / segment as f64;
        for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = dt / (window_power * count as f64);
    let omega = (0..bins).map(|k| std::f64::consts::TAU * k as f64 / (segment as f64 * dt)).collect();
    Ok(Spectrum { omega, power: acc.into_iter().map(|a| a * scale).collect() })
}

/// First frequency at which the signal part S(ω) − floor drops to the floor,
/// i.e. S(ω) = 2·floor. The spectrum is smoothed with a centred moving
/// average of `smooth` bins and the crossing is interpolated in log–log.
pub fn noise_floor_crossing(spec: &Spectrum, floor: f64, smooth: usize) -> Option<f64> {
    let n = spec.power.len();
    let half = smooth / 2;
    let smoothed: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half).max(1);
            let hi = (i + half + 1).min(n);
            if lo >= hi {
                return spec.power[i];
            }
            spec.power[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let target = 2.0 * floor;
    for i in 2..n {
        if smoothed[i - 1] > target && smoothed[i] <= target {
            let (w0, w1) = (spec.omega[i - 1].ln(), spec.omega[i].ln());
            let (s0, s1) = ((smoothed[i - 1] - floor).ln(), (smoothed[i] - floor).max(1e-300).ln());
            let t = (s0 - floor.ln()) / (s0 - s1);
            return Some((w0 + t * (w1 - w0)).exp());
        }
    }
    None
}
