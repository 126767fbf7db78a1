//! Streaming concept-drift detection on a univariate signal (average flow
//! traffic rate) via a two-sample Kolmogorov-Smirnov test over a sliding
//! window: the most recent `stat_size` samples are compared against a
//! seeded random draw from the older part of the window.
//!
//! Comparisons run every `check_interval` updates, not on every sample.
//! Each comparison is a fresh hypothesis test with false-positive rate at
//! most `alpha`, so the expected number of spurious detections grows with
//! the comparison count; throttling keeps that product small while a drift
//! still cannot slip between two comparisons unnoticed, because the window
//! spans `check_interval` twice over.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DriftError {
    #[error("samples for the KS statistic must be non-empty")]
    EmptySample,
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("stat_size must be at least 5, got {0}")]
    StatSizeTooSmall(usize),
    #[error("window_size ({w}) must be at least twice stat_size ({r}) so a reference can be drawn from the older part")]
    WindowTooSmall { w: usize, r: usize },
    #[error("check_interval must be at least 1")]
    BadInterval,
}

/// Two-sample Kolmogorov-Smirnov statistic: the largest absolute gap
/// between the empirical CDFs of `a` and `b`, evaluated at the merged
/// sample points.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, DriftError> {
    if a.is_empty() || b.is_empty() {
        return Err(DriftError::EmptySample);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let n = sa.len() as f64;
    let m = sb.len() as f64;
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < sa.len() && j < sb.len() {
        let x = if sa[i] <= sb[j] { sa[i] } else { sb[j] };
        while i < sa.len() && sa[i] == x {
            i += 1;
        }
        while j < sb.len() && sb[j] == x {
            j += 1;
        }
        let gap = (i as f64 / n - j as f64 / m).abs();
        if gap > d {
            d = gap;
        }
    }
    Ok(d)
}

/// Asymptotic two-sample KS p-value:
/// p = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2) with
/// lambda = (sqrt(e) + 0.12 + 0.11/sqrt(e)) * D and e = n*m/(n+m).
/// The series is truncated once terms drop below 1e-12 and the result is
/// clamped to [0, 1].
pub fn ks_pvalue(d: f64, n: usize, m: usize) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    let e = (n as f64 * m as f64) / (n as f64 + m as f64);
    let sq = e.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=1000u32 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        if term < 1e-12 {
            break;
        }
        sum += sign * term;
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KswinConfig {
    /// Significance level of each window comparison.
    pub alpha: f64,
    /// Sliding window length in samples.
    pub window_size: usize,
    /// Size of the recent buffer and of the reference draw.
    pub stat_size: usize,
    /// Updates between window comparisons once the window is full.
    pub check_interval: usize,
    /// Seed for the reference draw.
    pub seed: u64,
}

impl Default for KswinConfig {
    fn default() -> Self {
        KswinConfig {
            alpha: 0.001,
            window_size: 300,
            stat_size: 60,
            check_interval: 150,
            seed: 0,
        }
    }
}

impl KswinConfig {
    /// Default configuration rescaled to window `w`: the comparison cadence
    /// tracks the window at w/2 while `stat_size` and `alpha` stay fixed.
    pub fn with_window_size(w: usize, seed: u64) -> Self {
        KswinConfig {
            window_size: w,
            check_interval: (w / 2).max(1),
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DriftError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(DriftError::BadAlpha(self.alpha));
        }
        if self.stat_size < 5 {
            return Err(DriftError::StatSizeTooSmall(self.stat_size));
        }
        if self.window_size < 2 * self.stat_size {
            return Err(DriftError::WindowTooSmall { w: self.window_size, r: self.stat_size });
        }
        if self.check_interval == 0 {
            return Err(DriftError::BadInterval);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEvent {
    /// Zero-based index of the sample whose arrival triggered the event.
    pub sample_index: u64,
    /// KS statistic of the triggering comparison.
    pub statistic: f64,
    /// Its p-value; at most `alpha` by construction.
    pub p_value: f64,
}

#[derive(Debug, Clone)]
pub struct KswinDetector {
    cfg: KswinConfig,
    window: VecDeque<f64>,
    rng: ChaCha8Rng,
    since_comparison: usize,
    samples_seen: u64,
    comparisons: u64,
    detections: u64,
}

impl KswinDetector {
    pub fn new(cfg: KswinConfig) -> Result<Self, DriftError> {
        cfg.validate()?;
        Ok(KswinDetector {
            since_comparison: cfg.check_interval,
            window: VecDeque::with_capacity(cfg.window_size + 1),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            samples_seen: 0,
            comparisons: 0,
            detections: 0,
            cfg,
        })
    }

    /// Consume one sample. Emits an event when a window comparison rejects
    /// the hypothesis that recent and older samples share a distribution;
    /// the window then restarts from the last `stat_size` samples, so a
    /// second event for the same drift cannot fire for at least
    /// `window_size - stat_size` further samples.
    pub fn update(&mut self, x: f64) -> Option<DriftEvent> {
        self.samples_seen += 1;
        self.window.push_back(x);
        if self.window.len() > self.cfg.window_size {
            self.window.pop_front();
        }
        if self.window.len() < self.cfg.window_size {
            return None;
        }
        if self.since_comparison < self.cfg.check_interval {
            self.since_comparison += 1;
            return None;
        }
        self.since_comparison = 1;
        self.comparisons += 1;

        let r = self.cfg.stat_size;
        let w = self.cfg.window_size;
        let recent: Vec<f64> = self.window.iter().skip(w - r).copied().collect();
        let mut pool: Vec<f64> = self.window.iter().take(w - r).copied().collect();
        // partial Fisher-Yates: the first r slots become the reference draw
        for i in 0..r {
            let j = self.rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        let reference = &pool[..r];

        let d = ks_statistic(reference, &recent).expect("both samples non-empty");
        let p = ks_pvalue(d, r, r);
        if p > self.cfg.alpha {
            return None;
        }
        self.detections += 1;
        self.window.clear();
        self.window.extend(recent);
        self.since_comparison = self.cfg.check_interval;
        Some(DriftEvent { sample_index: self.samples_seen - 1, statistic: d, p_value: p })
    }

    pub fn config(&self) -> &KswinConfig {
        &self.cfg
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    /// Window comparisons performed so far; detections/comparisons is the
    /// empirical false-positive rate on a stationary stream.
    pub fn comparisons(&self) -> u64 {
        self.comparisons
    }

    pub fn detections(&self) -> u64 {
        self.detections
    }
}
