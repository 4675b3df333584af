//! Runs the three tracking modes on identical detections and compares
//! CLEAR-MOT counts.

use std::fmt::Write as _;

use crate::error::Result;
use crate::io::{track_all, FrameObservations, TrackedFrame};
use crate::metrics::{evaluate_streams, EvalConfig, MotCounts, MotReport};
use crate::simulator::{generate, ScenarioConfig};
use crate::tracker::{TrackerConfig, TrackingMode};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub mode: TrackingMode,
    pub report: MotReport,
}

/// Tracks `detections` once per mode (other settings from `base`) and
/// evaluates each against `gt`. Rows follow [`TrackingMode::ALL`].
pub fn ablate_stream(
    detections: &[FrameObservations],
    gt: &[TrackedFrame],
    base: &TrackerConfig,
    eval: &EvalConfig,
) -> Result<Vec<AblationRow>> {
    TrackingMode::ALL
        .iter()
        .map(|&mode| {
            let cfg = TrackerConfig { mode, ..*base };
            let hyp = track_all(detections, &cfg)?;
            let report = evaluate_streams(gt.to_vec(), hyp, eval)?;
            Ok(AblationRow { mode, report })
        })
        .collect()
}

/// Per-scenario rows plus per-mode totals.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationSummary {
    pub per_scenario: Vec<Vec<AblationRow>>,
    pub totals: Vec<AblationRow>,
}

impl AblationSummary {
    pub fn total(&self, mode: TrackingMode) -> &MotReport {
        &self
            .totals
            .iter()
            .find(|r| r.mode == mode)
            .expect("every mode has a total")
            .report
    }

    /// True when every scenario has identical FP and FN across modes.
    pub fn fp_fn_consistent(&self) -> bool {
        self.per_scenario.iter().all(|rows| {
            rows.windows(2)
                .all(|w| w[0].report.fp == w[1].report.fp && w[0].report.fn_ == w[1].report.fn_)
        })
    }
}

fn run_scenario(cfg: &ScenarioConfig, base: &TrackerConfig, eval: &EvalConfig) -> Result<Vec<AblationRow>> {
    let scenario = generate(cfg)?;
    ablate_stream(&scenario.detections, &scenario.ground_truth, base, eval)
}

/// Generates and ablates every scenario, in parallel when the `parallel`
/// feature is on. Totals are summed in scenario order either way.
pub fn ablate_scenarios(
    scenarios: &[ScenarioConfig],
    base: &TrackerConfig,
    eval: &EvalConfig,
) -> Result<AblationSummary> {
    #[cfg(feature = "parallel")]
    let results: Vec<Result<Vec<AblationRow>>> = {
        use rayon::prelude::*;
        scenarios.par_iter().map(|s| run_scenario(s, base, eval)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Vec<AblationRow>>> = scenarios.iter().map(|s| run_scenario(s, base, eval)).collect();

    let per_scenario = results.into_iter().collect::<Result<Vec<_>>>()?;
    let totals = TrackingMode::ALL
        .iter()
        .enumerate()
        .map(|(i, &mode)| {
            let mut counts = MotCounts::default();
            for rows in &per_scenario {
                counts.merge(&rows[i].report.counts());
            }
            AblationRow {
                mode,
                report: MotReport::from_counts(&counts, Vec::new()),
            }
        })
        .collect();
    Ok(AblationSummary { per_scenario, totals })
}

/// Strategy / MOTA / FP / FN / IDS table.
pub fn format_table(rows: &[AblationRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<16} {:>8} {:>8} {:>8} {:>8}", "strategy", "MOTA", "FP", "FN", "IDS");
    for row in rows {
        let r = &row.report;
        let _ = writeln!(
            s,
            "{:<16} {:>8.4} {:>8} {:>8} {:>8}",
            row.mode.as_str(),
            r.mota,
            r.fp,
            r.fn_,
            r.ids
        );
    }
    s
}
