//! CLEAR-MOT tracking metrics and PCKh-matched per-joint pose AP.
//!
//! Ground truth and hypotheses are matched per frame on a pose distance:
//! one minus the fraction of annotated ground-truth joints that the
//! hypothesis places within the PCKh radius. Among all matchings within the
//! distance threshold the evaluator takes one with the most pairs, then the
//! most pairs carried over from earlier frames, then the smallest total
//! distance. Because the pair count never depends on hypothesis ids, FP and
//! FN are the same for any relabeling of a hypothesis stream.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, Pose};
use crate::io::TrackedFrame;
use crate::tracker::{hungarian, CostMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Largest pose distance at which a pair may match.
    pub match_threshold: f64,
    /// PCKh radius as a fraction of the head segment.
    pub pckh_factor: f64,
    /// Radius as a fraction of sqrt(box area) when the head segment is unavailable.
    pub fallback_factor: f64,
    /// Indices of the two joints spanning the head segment, if the schema has them.
    pub head_joints: Option<(usize, usize)>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            match_threshold: 0.5,
            pckh_factor: 0.5,
            fallback_factor: 0.2,
            // head_bottom and head_top in the 15-joint PoseTrack layout
            head_joints: Some((12, 14)),
        }
    }
}

/// A person in one frame, ground truth or hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotated {
    pub id: u64,
    pub pose: Pose,
    pub bbox: BBox,
    /// Confidence, used only by pose AP.
    pub score: f64,
}

impl Annotated {
    pub fn new(id: u64, pose: Pose, bbox: BBox) -> Self {
        Self {
            id,
            pose,
            bbox,
            score: 1.0,
        }
    }
}

fn annotated(c: f64) -> bool {
    c > 0.0
}

/// Correctness radius for joints of `gt`.
pub fn pckh_radius(gt: &Annotated, cfg: &EvalConfig) -> f64 {
    if let Some((a, b)) = cfg.head_joints {
        if let (Some(ka), Some(kb)) = (gt.pose.keypoints.get(a), gt.pose.keypoints.get(b)) {
            if annotated(ka.c) && annotated(kb.c) {
                let r = cfg.pckh_factor * ka.distance(kb);
                if r > 0.0 {
                    return r;
                }
            }
        }
    }
    cfg.fallback_factor * gt.bbox.area().max(0.0).sqrt()
}

/// Pose distance in `[0, 1]`; `1 - IoU` when `gt` has no annotated joints.
pub fn pose_distance(gt: &Annotated, hyp: &Annotated, cfg: &EvalConfig) -> f64 {
    let radius = pckh_radius(gt, cfg);
    let mut total = 0usize;
    let mut hits = 0usize;
    for (g, h) in gt.pose.keypoints.iter().zip(&hyp.pose.keypoints) {
        if annotated(g.c) {
            total += 1;
            hits += (g.distance(h) <= radius) as usize;
        }
    }
    if total == 0 {
        1.0 - iou(&gt.bbox, &hyp.bbox)
    } else {
        1.0 - hits as f64 / total as f64
    }
}

fn check_unique(people: &[Annotated], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(people.len());
    for p in people {
        if !seen.insert(p.id) {
            return Err(Error::Evaluation(format!("duplicate {what} id {}", p.id)));
        }
    }
    Ok(())
}

/// Matches and error counts for one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMatching {
    /// (gt id, hypothesis id, distance)
    pub pairs: Vec<(u64, u64, f64)>,
    pub fp: u64,
    pub fn_: u64,
    pub ids: u64,
    pub gt_count: u64,
}

/// Matches one frame. `previous` maps ground-truth ids to the hypothesis id
/// they were last matched with; it drives both persistence and switch
/// counting.
pub fn match_frame(
    gt: &[Annotated],
    hyp: &[Annotated],
    previous: &HashMap<u64, u64>,
    cfg: &EvalConfig,
) -> Result<FrameMatching> {
    check_unique(gt, "ground-truth")?;
    check_unique(hyp, "hypothesis")?;

    let distances = CostMatrix::from_fn(gt.len(), hyp.len(), |g, h| pose_distance(&gt[g], &hyp[h], cfg));
    // Non-persistent pairs carry a surcharge larger than any distance sum.
    let surcharge = gt.len().min(hyp.len()) as f64 + 1.0;
    let costs = CostMatrix::from_fn(gt.len(), hyp.len(), |g, h| {
        let d = distances.get(g, h);
        if d > cfg.match_threshold {
            f64::INFINITY
        } else if previous.get(&gt[g].id) == Some(&hyp[h].id) {
            d
        } else {
            d + surcharge
        }
    });
    let assignment = hungarian(&costs, f64::MAX);

    let mut out = FrameMatching {
        gt_count: gt.len() as u64,
        ..Default::default()
    };
    for &(g, h) in &assignment {
        let (gid, hid) = (gt[g].id, hyp[h].id);
        if previous.get(&gid).is_some_and(|&last| last != hid) {
            out.ids += 1;
        }
        out.pairs.push((gid, hid, distances.get(g, h)));
    }
    out.fn_ = (gt.len() - assignment.len()) as u64;
    out.fp = (hyp.len() - assignment.len()) as u64;
    Ok(out)
}

/// Raw CLEAR-MOT totals; additive across frames and sequences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MotCounts {
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub ids: u64,
    pub gt_count: u64,
    pub matches: u64,
    pub distance_sum: f64,
}

impl MotCounts {
    pub fn add_frame(&mut self, m: &FrameMatching) {
        self.fp += m.fp;
        self.fn_ += m.fn_;
        self.ids += m.ids;
        self.gt_count += m.gt_count;
        self.matches += m.pairs.len() as u64;
        self.distance_sum += m.pairs.iter().map(|p| p.2).sum::<f64>();
    }

    pub fn merge(&mut self, other: &MotCounts) {
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.ids += other.ids;
        self.gt_count += other.gt_count;
        self.matches += other.matches;
        self.distance_sum += other.distance_sum;
    }
}

/// Stateful CLEAR-MOT bookkeeping for one sequence.
#[derive(Debug, Clone, Default)]
pub struct MotAccumulator {
    cfg: EvalConfig,
    last_match: HashMap<u64, u64>,
    counts: MotCounts,
}

impl MotAccumulator {
    pub fn new(cfg: EvalConfig) -> Self {
        Self {
            cfg,
            ..Default::default()
        }
    }

    pub fn update(&mut self, gt: &[Annotated], hyp: &[Annotated]) -> Result<FrameMatching> {
        let m = match_frame(gt, hyp, &self.last_match, &self.cfg)?;
        for &(g, h, _) in &m.pairs {
            self.last_match.insert(g, h);
        }
        self.counts.add_frame(&m);
        Ok(m)
    }

    pub fn counts(&self) -> MotCounts {
        self.counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotReport {
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub ids: u64,
    pub gt_count: u64,
    pub matches: u64,
    /// NaN when `gt_count` is zero; see `mota_defined`.
    pub mota: f64,
    pub mota_defined: bool,
    /// Mean pose distance over matched pairs (lower is better).
    pub motp: f64,
    pub precision: f64,
    pub recall: f64,
    pub per_joint_ap: Vec<f64>,
    pub map: f64,
}

impl MotReport {
    pub fn from_counts(c: &MotCounts, per_joint_ap: Vec<f64>) -> Self {
        let mota_defined = c.gt_count > 0;
        let mota = if mota_defined {
            1.0 - (c.fp + c.fn_ + c.ids) as f64 / c.gt_count as f64
        } else {
            f64::NAN
        };
        let motp = if c.matches > 0 {
            c.distance_sum / c.matches as f64
        } else {
            f64::NAN
        };
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let map = if per_joint_ap.is_empty() {
            0.0
        } else {
            per_joint_ap.iter().sum::<f64>() / per_joint_ap.len() as f64
        };
        Self {
            fp: c.fp,
            fn_: c.fn_,
            ids: c.ids,
            gt_count: c.gt_count,
            matches: c.matches,
            mota,
            mota_defined,
            motp,
            precision: ratio(c.matches, c.matches + c.fp),
            recall: ratio(c.matches, c.gt_count),
            per_joint_ap,
            map,
        }
    }

    pub fn counts(&self) -> MotCounts {
        MotCounts {
            fp: self.fp,
            fn_: self.fn_,
            ids: self.ids,
            gt_count: self.gt_count,
            matches: self.matches,
            distance_sum: if self.matches > 0 { self.motp * self.matches as f64 } else { 0.0 },
        }
    }

    /// Flat `key = value` text, one entry per line.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("gt_count", self.gt_count.to_string());
        put("matches", self.matches.to_string());
        put("fp", self.fp.to_string());
        put("fn", self.fn_.to_string());
        put("ids", self.ids.to_string());
        put("mota", self.mota.to_string());
        put("mota_defined", self.mota_defined.to_string());
        put("motp", self.motp.to_string());
        put("precision", self.precision.to_string());
        put("recall", self.recall.to_string());
        put("map", self.map.to_string());
        for (j, ap) in self.per_joint_ap.iter().enumerate() {
            put(&format!("ap_joint_{j}"), ap.to_string());
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Sums per-frame matchings into a report (no pose AP).
pub fn accumulate<'a>(matchings: impl IntoIterator<Item = &'a FrameMatching>) -> MotReport {
    let mut counts = MotCounts::default();
    for m in matchings {
        counts.add_frame(m);
    }
    MotReport::from_counts(&counts, Vec::new())
}

/// Ground truth and scored hypotheses of one frame, for pose AP.
#[derive(Debug, Clone, Default)]
pub struct PoseFrame {
    pub gt: Vec<Annotated>,
    pub hyp: Vec<Annotated>,
}

/// Score-ranked joint detections for one joint; mergeable by concatenation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JointDetections {
    /// (score, is true positive)
    pub scored: Vec<(f64, bool)>,
    pub positives: usize,
}

impl JointDetections {
    pub fn merge(&mut self, other: &JointDetections) {
        self.scored.extend_from_slice(&other.scored);
        self.positives += other.positives;
    }

    /// Area under the precision/recall curve with the precision envelope
    /// (all-points interpolation). Ties in score keep insertion order.
    pub fn average_precision(&self) -> f64 {
        if self.positives == 0 || self.scored.is_empty() {
            return 0.0;
        }
        let mut order: Vec<usize> = (0..self.scored.len()).collect();
        order.sort_by(|&a, &b| self.scored[b].0.total_cmp(&self.scored[a].0));
        let mut tp = 0usize;
        let mut recall = Vec::with_capacity(order.len());
        let mut precision = Vec::with_capacity(order.len());
        for (rank, &i) in order.iter().enumerate() {
            tp += self.scored[i].1 as usize;
            recall.push(tp as f64 / self.positives as f64);
            precision.push(tp as f64 / (rank + 1) as f64);
        }
        for i in (0..precision.len().saturating_sub(1)).rev() {
            precision[i] = precision[i].max(precision[i + 1]);
        }
        let mut ap = 0.0;
        let mut prev_recall = 0.0;
        for (r, p) in recall.iter().zip(&precision) {
            ap += (r - prev_recall) * p;
            prev_recall = *r;
        }
        ap
    }
}

/// Collects joint detections of every joint from one frame. Hypotheses are
/// matched to ground truth persons by [`pose_distance`] first; a hypothesis
/// joint is a true positive when its person is matched and the joint lies
/// within the PCKh radius of the annotated ground-truth joint.
pub fn collect_joint_detections(frame: &PoseFrame, num_joints: usize, cfg: &EvalConfig, out: &mut [JointDetections]) {
    debug_assert_eq!(out.len(), num_joints);
    let distances = CostMatrix::from_fn(frame.gt.len(), frame.hyp.len(), |g, h| {
        pose_distance(&frame.gt[g], &frame.hyp[h], cfg)
    });
    let pairs = hungarian(&distances, cfg.match_threshold);
    let mut gt_of_hyp = vec![None; frame.hyp.len()];
    for &(g, h) in &pairs {
        gt_of_hyp[h] = Some(g);
    }
    for (j, joint) in out.iter_mut().enumerate() {
        joint.positives += frame
            .gt
            .iter()
            .filter(|g| g.pose.keypoints.get(j).is_some_and(|k| annotated(k.c)))
            .count();
        for (h, hyp) in frame.hyp.iter().enumerate() {
            match gt_of_hyp[h] {
                None => joint.scored.push((hyp.score, false)),
                Some(g) => {
                    let gt = &frame.gt[g];
                    let (Some(gk), Some(hk)) = (gt.pose.keypoints.get(j), hyp.pose.keypoints.get(j)) else {
                        continue;
                    };
                    if annotated(gk.c) {
                        joint.scored.push((hyp.score, gk.distance(hk) <= pckh_radius(gt, cfg)));
                    }
                }
            }
        }
    }
}

/// Per-joint average precision over a set of frames.
pub fn pose_ap(frames: &[PoseFrame], joint: usize, cfg: &EvalConfig) -> f64 {
    let num_joints = joint + 1;
    let mut acc = vec![JointDetections::default(); num_joints];
    for f in frames {
        collect_joint_detections(f, num_joints, cfg, &mut acc);
    }
    acc[joint].average_precision()
}

/// Evaluation state of one sequence: CLEAR-MOT counts plus joint detections.
#[derive(Debug, Clone, Default)]
pub struct SequenceEvaluation {
    pub counts: MotCounts,
    pub joints: Vec<JointDetections>,
}

impl SequenceEvaluation {
    pub fn merge(&mut self, other: &SequenceEvaluation) {
        self.counts.merge(&other.counts);
        if self.joints.len() < other.joints.len() {
            self.joints.resize(other.joints.len(), JointDetections::default());
        }
        for (a, b) in self.joints.iter_mut().zip(&other.joints) {
            a.merge(b);
        }
    }

    pub fn report(&self) -> MotReport {
        let ap = self.joints.iter().map(JointDetections::average_precision).collect();
        MotReport::from_counts(&self.counts, ap)
    }
}

fn to_annotated(frame: Option<&TrackedFrame>) -> Vec<Annotated> {
    frame.map_or_else(Vec::new, |f| {
        f.tracks
            .iter()
            .map(|t| Annotated {
                id: t.id,
                pose: t.detection.pose.clone(),
                bbox: t.detection.bbox,
                score: t.detection.score,
            })
            .collect()
    })
}

/// Evaluates one sequence. Frames are aligned by index; a frame missing on
/// either side counts as empty.
pub fn evaluate_sequence(gt: &[TrackedFrame], hyp: &[TrackedFrame], cfg: &EvalConfig) -> Result<SequenceEvaluation> {
    let gt_by_frame: BTreeMap<u64, &TrackedFrame> = gt.iter().map(|f| (f.frame, f)).collect();
    let hyp_by_frame: BTreeMap<u64, &TrackedFrame> = hyp.iter().map(|f| (f.frame, f)).collect();
    let num_joints = gt
        .iter()
        .chain(hyp)
        .flat_map(|f| f.tracks.first())
        .map(|t| t.detection.pose.len())
        .next()
        .unwrap_or(0);

    let mut frames: Vec<u64> = gt_by_frame.keys().chain(hyp_by_frame.keys()).copied().collect();
    frames.sort_unstable();
    frames.dedup();

    let mut acc = MotAccumulator::new(*cfg);
    let mut joints = vec![JointDetections::default(); num_joints];
    for f in frames {
        let pose_frame = PoseFrame {
            gt: to_annotated(gt_by_frame.get(&f).copied()),
            hyp: to_annotated(hyp_by_frame.get(&f).copied()),
        };
        acc.update(&pose_frame.gt, &pose_frame.hyp)
            .map_err(|e| Error::Evaluation(format!("frame {f}: {e}")))?;
        collect_joint_detections(&pose_frame, num_joints, cfg, &mut joints);
    }
    Ok(SequenceEvaluation {
        counts: acc.counts(),
        joints,
    })
}

fn group_by_sequence(frames: Vec<TrackedFrame>) -> BTreeMap<String, Vec<TrackedFrame>> {
    let mut out: BTreeMap<String, Vec<TrackedFrame>> = BTreeMap::new();
    for f in frames {
        out.entry(f.seq.clone()).or_default().push(f);
    }
    out
}

/// Evaluates every sequence present in either stream and merges the results
/// in sequence-name order.
pub fn evaluate_streams(gt: Vec<TrackedFrame>, hyp: Vec<TrackedFrame>, cfg: &EvalConfig) -> Result<MotReport> {
    let gt = group_by_sequence(gt);
    let mut hyp = group_by_sequence(hyp);
    let mut names: Vec<String> = gt.keys().chain(hyp.keys()).cloned().collect();
    names.sort();
    names.dedup();
    let jobs: Vec<(Vec<TrackedFrame>, Vec<TrackedFrame>)> = names
        .iter()
        .map(|n| (gt.get(n).cloned().unwrap_or_default(), hyp.remove(n).unwrap_or_default()))
        .collect();

    #[cfg(feature = "parallel")]
    let per_seq: Vec<Result<SequenceEvaluation>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(|(g, h)| evaluate_sequence(g, h, cfg)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_seq: Vec<Result<SequenceEvaluation>> =
        jobs.iter().map(|(g, h)| evaluate_sequence(g, h, cfg)).collect();

    let mut total = SequenceEvaluation::default();
    for r in per_seq {
        total.merge(&r?);
    }
    Ok(total.report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Keypoint;

    /// Pose whose joints sit on a 5x3 grid inside the box, all annotated.
    fn person(id: u64, x: f64, y: f64) -> Annotated {
        let bbox = BBox::from_xywh(x, y, 50.0, 100.0);
        let keypoints = (0..15)
            .map(|j| Keypoint::new(x + 10.0 + (j % 3) as f64 * 15.0, y + 10.0 + (j / 3) as f64 * 20.0, 1.0))
            .collect();
        Annotated::new(id, Pose::new(keypoints), bbox)
    }

    fn relabel(p: &Annotated, id: u64) -> Annotated {
        Annotated { id, ..p.clone() }
    }

    #[test]
    fn identical_frame_has_no_errors() {
        let gt = vec![person(1, 0.0, 0.0), person(2, 200.0, 0.0)];
        let m = match_frame(&gt, &gt, &HashMap::new(), &EvalConfig::default()).unwrap();
        assert_eq!((m.fp, m.fn_, m.ids), (0, 0, 0));
        assert_eq!(m.pairs.len(), 2);
        assert!(m.pairs.iter().all(|p| p.2 == 0.0));
    }

    #[test]
    fn empty_hypothesis_is_all_misses() {
        let gt = vec![person(1, 0.0, 0.0), person(2, 200.0, 0.0)];
        let m = match_frame(&gt, &[], &HashMap::new(), &EvalConfig::default()).unwrap();
        assert_eq!((m.fp, m.fn_, m.ids), (0, 2, 0));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let gt = vec![person(1, 0.0, 0.0), person(1, 200.0, 0.0)];
        let err = match_frame(&gt, &[], &HashMap::new(), &EvalConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Evaluation(_)));
    }

    /// Two people, three frames; the hypothesis swaps its labels from frame 2
    /// on. Bookkeeping by hand:
    ///   frame 1: A-1, B-2 matched, no history -> 0 switches
    ///   frame 2: A-2, B-1 (1 now sits on B) -> A and B both switch -> 2
    ///   frame 3: A-2, B-1 again, same as last match -> 0
    /// IDS = 2, GT = 6, FP = FN = 0, MOTA = 1 - 2/6.
    #[test]
    fn id_swap_fixture() {
        let mut acc = MotAccumulator::new(EvalConfig::default());
        let mut frames = Vec::new();
        for f in 0..3 {
            let a = person(10, 10.0 * f as f64, 0.0);
            let b = person(20, 300.0 - 10.0 * f as f64, 0.0);
            let hyp = if f == 0 {
                vec![relabel(&a, 1), relabel(&b, 2)]
            } else {
                vec![relabel(&a, 2), relabel(&b, 1)]
            };
            frames.push(acc.update(&[a, b], &hyp).unwrap());
        }
        assert_eq!(frames.iter().map(|m| m.ids).collect::<Vec<_>>(), vec![0, 2, 0]);
        let report = accumulate(&frames);
        assert_eq!((report.fp, report.fn_, report.ids, report.gt_count), (0, 0, 2, 6));
        assert_eq!(report.mota, 1.0 - 2.0 / 6.0);
    }

    #[test]
    fn fresh_id_every_frame_switches_every_frame() {
        let mut acc = MotAccumulator::new(EvalConfig::default());
        let frames = 7;
        for f in 0..frames {
            let a = person(1, f as f64, 0.0);
            acc.update(std::slice::from_ref(&a), &[relabel(&a, 100 + f)]).unwrap();
        }
        assert_eq!(acc.counts().ids, frames - 1);
    }

    #[test]
    fn persistence_keeps_previous_match() {
        // Two hypotheses both fit A; the one matched before is kept even
        // though the other is closer.
        let cfg = EvalConfig::default();
        let a = person(1, 0.0, 0.0);
        let mut near = relabel(&a, 8);
        let mut far = relabel(&a, 7);
        far.pose.keypoints[0].x += 1000.0;
        near.pose.keypoints[0].x += 0.1;
        let prev = HashMap::from([(1u64, 7u64)]);
        let m = match_frame(&[a], &[near, far], &prev, &cfg).unwrap();
        assert_eq!(m.pairs[0].1, 7);
        assert_eq!(m.ids, 0);
    }

    #[test]
    fn gt_without_annotations_falls_back_to_iou() {
        let cfg = EvalConfig::default();
        let mut g = person(1, 0.0, 0.0);
        g.pose.keypoints.iter_mut().for_each(|k| k.c = 0.0);
        let mut h = person(2, 25.0, 0.0);
        h.bbox = BBox::from_xywh(25.0, 0.0, 50.0, 100.0);
        assert!((pose_distance(&g, &h, &cfg) - (1.0 - 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn radius_uses_head_segment_or_box() {
        let cfg = EvalConfig::default();
        let g = person(1, 0.0, 0.0);
        // joints 12 and 14 are 30 px apart on the grid
        assert_eq!(pckh_radius(&g, &cfg), 15.0);
        let no_head = EvalConfig {
            head_joints: None,
            ..cfg
        };
        assert_eq!(pckh_radius(&g, &no_head), 0.2 * (5000f64).sqrt());
    }

    #[test]
    fn no_ground_truth_leaves_mota_undefined() {
        let r = MotReport::from_counts(&MotCounts::default(), vec![]);
        assert!(r.mota.is_nan());
        assert!(!r.mota_defined);
    }

    #[test]
    fn ap_perfect_and_empty() {
        let cfg = EvalConfig::default();
        let gt = vec![person(1, 0.0, 0.0), person(2, 200.0, 0.0)];
        let frames = vec![PoseFrame {
            gt: gt.clone(),
            hyp: gt.clone(),
        }];
        for j in 0..15 {
            assert_eq!(pose_ap(&frames, j, &cfg), 1.0);
        }
        let empty = vec![PoseFrame { gt, hyp: vec![] }];
        assert_eq!(pose_ap(&empty, 0, &cfg), 0.0);
    }

    /// Ten hypotheses ranked by score, three of them wrong (ranks 2, 5, 9),
    /// eight positives in total.
    ///
    /// rank: 1  2  3  4  5  6  7  8  9  10
    /// tp:   1  0  1  1  0  1  1  1  0  1
    /// cumulative tp: 1 1 2 3 3 4 5 6 6 7
    /// precision: 1, 1/2, 2/3, 3/4, 3/5, 4/6, 5/7, 6/8, 6/9, 7/10
    /// envelope at the recall steps (ranks 1,3,4,6,7,8,10):
    ///   1, 3/4, 3/4, 3/4, 3/4, 3/4, 7/10
    /// AP = (1/8)(1 + 5 * 3/4 + 7/10) = 0.68125
    #[test]
    fn ap_hand_fixture() {
        let tp = [true, false, true, true, false, true, true, true, false, true];
        let scored = tp.iter().enumerate().map(|(i, &t)| (1.0 - i as f64 * 0.05, t)).collect();
        let d = JointDetections { scored, positives: 8 };
        assert!((d.average_precision() - 0.68125).abs() < 1e-12);
    }

    #[test]
    fn ap_from_frames_counts_misses() {
        let cfg = EvalConfig::default();
        // Four people; hypothesis finds three, the fourth is far away.
        let gt: Vec<_> = (0..4).map(|i| person(i, i as f64 * 200.0, 0.0)).collect();
        let mut hyp: Vec<_> = gt[..3]
            .iter()
            .enumerate()
            .map(|(i, g)| Annotated {
                score: 0.9 - i as f64 * 0.1,
                ..g.clone()
            })
            .collect();
        hyp.push(Annotated {
            score: 0.95,
            ..person(9, 0.0, 500.0)
        });
        // ranked: fp, tp, tp, tp; positives 4
        // precision 0, 1/2, 2/3, 3/4; envelope 3/4 at every recall step
        let ap = pose_ap(&[PoseFrame { gt, hyp }], 0, &cfg);
        assert!((ap - 0.75 * 0.75).abs() < 1e-12, "{ap}");
    }
}
