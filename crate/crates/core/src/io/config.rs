//! Flat `key = value` configuration covering every tunable.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Command-line overrides go through [`Settings::set`] with
//! the same keys.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::StreamSchema;
use crate::metrics::EvalConfig;
use crate::sifp::SifpConfig;
use crate::simulator::ScenarioConfig;
use crate::tracker::TrackerConfig;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    pub tracker: TrackerConfig,
    pub sifp: SifpConfig,
    pub scenario: ScenarioConfig,
    pub schema: StreamSchema,
    pub eval: EvalConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse(key, v))
        .collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::default();
        s.apply_text(text)?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, e.to_string().trim_start_matches("config: "))))?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for pair in pairs {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{pair}` is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.tracker;
        let sc = &mut self.scenario;
        match key {
            "theta_pos" => t.theta_pos = parse(key, value)?,
            "sigma_max" => t.sigma_max = parse(key, value)?,
            "mode" => t.mode = parse(key, value)?,
            "cost_gate" => t.cost_gate = parse(key, value)?,
            "max_age" => t.max_age = parse(key, value)?,
            "min_score" => t.min_score = parse(key, value)?,
            "assignment" => t.assignment = parse(key, value)?,
            "appearance_blend" => t.appearance_blend = parse(key, value)?,
            "history_limit" => t.history_limit = parse(key, value)?,
            "gamma_valid" => t.occlusion.gamma_valid = parse(key, value)?,
            "theta_valid" => t.occlusion.theta_valid = parse(key, value)?,

            "num_keypoints" => {
                let n = parse(key, value)?;
                self.schema.num_keypoints = n;
                t.occlusion.num_keypoints = n;
                sc.num_keypoints = n;
            }
            "reid_dim" => {
                let d = parse(key, value)?;
                self.schema.reid_dim = d;
                sc.reid_dim = d;
            }

            "omegas" => self.sifp.omegas = parse_list(key, value)?,
            "s_lower" => self.sifp.s_lower = parse(key, value)?,
            "s_upper" => self.sifp.s_upper = parse(key, value)?,
            "fpn_areas" => {
                let areas = parse_list(key, value)?;
                self.sifp.fpn_areas = areas
                    .try_into()
                    .map_err(|_| Error::Config("`fpn_areas` needs exactly 5 values".into()))?;
            }

            "seed" => sc.seed = parse(key, value)?,
            "sequence" => sc.sequence = value.to_string(),
            "n_persons" => sc.n_persons = parse(key, value)?,
            "n_frames" => sc.n_frames = parse(key, value)?,
            "arena_w" => sc.arena_w = parse(key, value)?,
            "arena_h" => sc.arena_h = parse(key, value)?,
            "layout" => sc.layout = parse(key, value)?,
            "speed_min" => sc.speed_min = parse(key, value)?,
            "speed_max" => sc.speed_max = parse(key, value)?,
            "box_w_min" => sc.box_w_min = parse(key, value)?,
            "box_w_max" => sc.box_w_max = parse(key, value)?,
            "aspect" => sc.aspect = parse(key, value)?,
            "occlusion_iou_threshold" => sc.occlusion_iou_threshold = parse(key, value)?,
            "reid_noise_sigma" => sc.reid_noise_sigma = parse(key, value)?,
            "occluded_confidence_ceiling" => sc.occluded_confidence_ceiling = parse(key, value)?,
            "occluded_feature_blend" => sc.occluded_feature_blend = parse(key, value)?,
            "detector_fp_rate" => sc.detector_fp_rate = parse(key, value)?,
            "detector_fn_rate" => sc.detector_fn_rate = parse(key, value)?,
            "box_jitter" => sc.box_jitter = parse(key, value)?,
            "keypoint_jitter" => sc.keypoint_jitter = parse(key, value)?,

            "match_threshold" => self.eval.match_threshold = parse(key, value)?,
            "pckh_factor" => self.eval.pckh_factor = parse(key, value)?,
            "fallback_factor" => self.eval.fallback_factor = parse(key, value)?,
            "head_joints" => {
                self.eval.head_joints = if value == "none" {
                    None
                } else {
                    let (a, b) = value
                        .split_once(',')
                        .ok_or_else(|| Error::Config("`head_joints` expects `a,b` or `none`".into()))?;
                    Some((parse(key, a.trim())?, parse(key, b.trim())?))
                }
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        self.sifp.validate()?;
        if self.tracker.occlusion.num_keypoints != self.schema.num_keypoints {
            return Err(Error::Config("num_keypoints disagrees between schema and tracker".into()));
        }
        Ok(())
    }

    /// Every key with its current value; parsing the output reproduces `self`.
    pub fn to_text(&self) -> String {
        let t = &self.tracker;
        let sc = &self.scenario;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("theta_pos", t.theta_pos.to_string());
        put("sigma_max", t.sigma_max.to_string());
        put("mode", t.mode.to_string());
        put("cost_gate", t.cost_gate.to_string());
        put("max_age", t.max_age.to_string());
        put("min_score", t.min_score.to_string());
        put("assignment", t.assignment.to_string());
        put("appearance_blend", t.appearance_blend.to_string());
        put("history_limit", t.history_limit.to_string());
        put("gamma_valid", t.occlusion.gamma_valid.to_string());
        put("theta_valid", t.occlusion.theta_valid.to_string());
        put("num_keypoints", self.schema.num_keypoints.to_string());
        put("reid_dim", self.schema.reid_dim.to_string());
        put("omegas", join(&self.sifp.omegas));
        put("s_lower", self.sifp.s_lower.to_string());
        put("s_upper", self.sifp.s_upper.to_string());
        put("fpn_areas", join(&self.sifp.fpn_areas));
        put("seed", sc.seed.to_string());
        put("sequence", sc.sequence.clone());
        put("n_persons", sc.n_persons.to_string());
        put("n_frames", sc.n_frames.to_string());
        put("arena_w", sc.arena_w.to_string());
        put("arena_h", sc.arena_h.to_string());
        put("layout", sc.layout.to_string());
        put("speed_min", sc.speed_min.to_string());
        put("speed_max", sc.speed_max.to_string());
        put("box_w_min", sc.box_w_min.to_string());
        put("box_w_max", sc.box_w_max.to_string());
        put("aspect", sc.aspect.to_string());
        put("occlusion_iou_threshold", sc.occlusion_iou_threshold.to_string());
        put("reid_noise_sigma", sc.reid_noise_sigma.to_string());
        put("occluded_confidence_ceiling", sc.occluded_confidence_ceiling.to_string());
        put("occluded_feature_blend", sc.occluded_feature_blend.to_string());
        put("detector_fp_rate", sc.detector_fp_rate.to_string());
        put("detector_fn_rate", sc.detector_fn_rate.to_string());
        put("box_jitter", sc.box_jitter.to_string());
        put("keypoint_jitter", sc.keypoint_jitter.to_string());
        put("match_threshold", self.eval.match_threshold.to_string());
        put("pckh_factor", self.eval.pckh_factor.to_string());
        put("fallback_factor", self.eval.fallback_factor.to_string());
        put(
            "head_joints",
            self.eval
                .head_joints
                .map_or_else(|| "none".to_string(), |(a, b)| format!("{a},{b}")),
        );
        out
    }
}
