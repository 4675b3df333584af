//! Per-frame latency measurement of the tracking update.

use std::time::Instant;

use crate::error::Result;
use crate::simulator::{generate, Layout, ScenarioConfig};
use crate::tracker::{Tracker, TrackerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyConfig {
    pub detections_per_frame: usize,
    pub frames: usize,
    pub reid_dim: usize,
    pub seed: u64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            detections_per_frame: 100,
            frames: 300,
            reid_dim: 128,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub frames: usize,
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub p99_ms: f64,
    pub mean_ms: f64,
    pub fps: f64,
}

impl LatencyReport {
    pub fn from_samples(mut samples_ms: Vec<f64>) -> Self {
        samples_ms.sort_by(f64::total_cmp);
        let n = samples_ms.len();
        // nearest-rank percentile
        let pct = |p: f64| {
            if n == 0 {
                return f64::NAN;
            }
            let rank = ((p / 100.0) * n as f64).ceil() as usize;
            samples_ms[rank.clamp(1, n) - 1]
        };
        let total: f64 = samples_ms.iter().sum();
        let mean = if n == 0 { f64::NAN } else { total / n as f64 };
        Self {
            frames: n,
            p50_ms: pct(50.0),
            p90_ms: pct(90.0),
            p99_ms: pct(99.0),
            mean_ms: mean,
            fps: if total > 0.0 { 1000.0 * n as f64 / total } else { f64::INFINITY },
        }
    }
}

impl std::fmt::Display for LatencyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "frames = {}", self.frames)?;
        writeln!(f, "p50_ms = {:.4}", self.p50_ms)?;
        writeln!(f, "p90_ms = {:.4}", self.p90_ms)?;
        writeln!(f, "p99_ms = {:.4}", self.p99_ms)?;
        writeln!(f, "mean_ms = {:.4}", self.mean_ms)?;
        write!(f, "fps = {:.1}", self.fps)
    }
}

/// Synthetic crowd: `detections_per_frame` people walking in a 1920x1080 arena.
pub fn load_scenario(cfg: &LatencyConfig) -> ScenarioConfig {
    ScenarioConfig {
        seed: cfg.seed,
        sequence: "bench".into(),
        n_persons: cfg.detections_per_frame,
        n_frames: cfg.frames,
        arena_w: 1920.0,
        arena_h: 1080.0,
        layout: Layout::Random,
        reid_dim: cfg.reid_dim,
        ..ScenarioConfig::default()
    }
}

/// Times [`Tracker::step`] on every frame of the synthetic load. Stream
/// generation is not timed.
pub fn measure(load: &LatencyConfig, tracker: &TrackerConfig) -> Result<LatencyReport> {
    let scenario = generate(&load_scenario(load))?;
    let mut cfg = *tracker;
    if cfg.history_limit == 0 {
        cfg.history_limit = 32;
    }
    let mut t = Tracker::new(cfg)?;
    let mut samples = Vec::with_capacity(scenario.detections.len());
    for frame in scenario.detections {
        let start = Instant::now();
        let out = t.step(frame)?;
        samples.push(start.elapsed().as_secs_f64() * 1000.0);
        std::hint::black_box(out);
    }
    Ok(LatencyReport::from_samples(samples))
}
