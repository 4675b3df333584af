//! Newline-delimited frame records.
//!
//! One JSON object per line:
//!
//! ```text
//! {"seq":"s1","frame":0,"detections":[{"box":[x0,y0,x1,y1],"score":0.9,
//!   "keypoints":[[x,y,c],...],"reid":[...]}]}
//! ```
//!
//! Tracked and ground-truth streams use the same layout with an `id` on
//! every detection and, for ground truth, an optional `occluded` flag.
//! Numbers are written in shortest round-trip form, so a canonical stream
//! survives read-then-write byte for byte.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Keypoint, Pose};
use crate::occlusion::DEFAULT_NUM_KEYPOINTS;
use crate::tracker::{Detection, ReidFeature, DEFAULT_REID_DIM};

/// Shape every record in a stream must have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSchema {
    pub num_keypoints: usize,
    pub reid_dim: usize,
}

impl Default for StreamSchema {
    fn default() -> Self {
        Self {
            num_keypoints: DEFAULT_NUM_KEYPOINTS,
            reid_dim: DEFAULT_REID_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservations {
    pub seq: String,
    pub frame: u64,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedDetection {
    /// Track id for tracker output, true identity for ground truth.
    pub id: u64,
    pub detection: Detection,
    pub occluded: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedFrame {
    pub seq: String,
    pub frame: u64,
    pub tracks: Vec<TrackedDetection>,
}

impl TrackedFrame {
    /// Drops the ids.
    pub fn observations(&self) -> FrameObservations {
        FrameObservations {
            seq: self.seq.clone(),
            frame: self.frame,
            detections: self.tracks.iter().map(|t| t.detection.clone()).collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    score: f64,
    keypoints: Vec<[f64; 3]>,
    reid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    occluded: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameRecord {
    seq: String,
    frame: u64,
    detections: Vec<DetectionRecord>,
}

impl DetectionRecord {
    fn from_detection(d: &Detection, id: Option<u64>, occluded: Option<bool>) -> Self {
        Self {
            id,
            bbox: d.bbox.to_array(),
            score: d.score,
            keypoints: d.pose.keypoints.iter().map(|k| [k.x, k.y, k.c]).collect(),
            reid: d.reid.as_slice().to_vec(),
            occluded,
        }
    }

    fn into_detection(self, schema: &StreamSchema, index: usize) -> Result<Detection> {
        let field = |name: &str| format!("detections[{index}].{name}");
        let bbox = BBox::from_array(self.bbox);
        if !bbox.is_valid() {
            return Err(Error::stream(field("box"), "expected finite [x_min, y_min, x_max, y_max] with max >= min"));
        }
        if !(self.score.is_finite() && (0.0..=1.0).contains(&self.score)) {
            return Err(Error::stream(field("score"), format!("score {} outside [0, 1]", self.score)));
        }
        if self.keypoints.len() != schema.num_keypoints {
            return Err(Error::stream(
                field("keypoints"),
                format!("expected {} keypoints, found {}", schema.num_keypoints, self.keypoints.len()),
            ));
        }
        let mut keypoints = Vec::with_capacity(self.keypoints.len());
        for [x, y, c] in self.keypoints {
            if !(x.is_finite() && y.is_finite()) || !(0.0..=1.0).contains(&c) {
                return Err(Error::stream(
                    field("keypoints"),
                    format!("keypoint [{x}, {y}, {c}] needs finite coordinates and confidence in [0, 1]"),
                ));
            }
            keypoints.push(Keypoint::new(x, y, c));
        }
        if self.reid.len() != schema.reid_dim {
            return Err(Error::stream(
                field("reid"),
                format!("expected {} values, found {}", schema.reid_dim, self.reid.len()),
            ));
        }
        let reid = ReidFeature::normalized(self.reid).map_err(|e| match e {
            Error::StreamFormat { message, .. } => Error::stream(field("reid"), message),
            other => other,
        })?;
        Ok(Detection {
            bbox,
            pose: Pose::new(keypoints),
            reid,
            score: self.score,
        })
    }
}

fn parse_record(line: &str) -> Result<FrameRecord> {
    let de = &mut serde_json::Deserializer::from_str(line);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path.is_empty() || path == "." { "record".to_string() } else { path };
        Error::stream(field, e.into_inner().to_string())
    })
}

/// Iterator over the frames of a stream, validating as it goes.
///
/// Frame indices must strictly increase within each sequence. Unknown fields
/// are ignored and blank lines skipped.
pub struct StreamReader<R> {
    input: R,
    schema: StreamSchema,
    line_no: usize,
    last_frame: HashMap<String, u64>,
    buf: String,
    require_ids: bool,
}

impl<R: BufRead> StreamReader<R> {
    pub fn new(input: R, schema: StreamSchema) -> Self {
        Self {
            input,
            schema,
            line_no: 0,
            last_frame: HashMap::new(),
            buf: String::new(),
            require_ids: false,
        }
    }

    /// Reads tracked (id-labelled) frames instead of bare observations.
    pub fn tracked(self) -> TrackedStreamReader<R> {
        TrackedStreamReader(StreamReader {
            require_ids: true,
            ..self
        })
    }

    fn next_record(&mut self) -> Option<Result<TrackedFrame>> {
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            if self.buf.trim().is_empty() {
                continue;
            }
            let line = self.line_no;
            return Some(self.decode().map_err(|e| e.at_line(line)));
        }
    }

    fn decode(&mut self) -> Result<TrackedFrame> {
        let record = parse_record(self.buf.trim_end())?;
        if let Some(&last) = self.last_frame.get(&record.seq) {
            if record.frame <= last {
                return Err(Error::stream(
                    "frame",
                    format!("frame index {} in sequence `{}` does not follow {}", record.frame, record.seq, last),
                ));
            }
        }
        let mut tracks = Vec::with_capacity(record.detections.len());
        for (i, det) in record.detections.into_iter().enumerate() {
            let id = match (det.id, self.require_ids) {
                (Some(id), _) => id,
                (None, false) => 0,
                (None, true) => return Err(Error::stream(format!("detections[{i}].id"), "missing track id")),
            };
            let occluded = det.occluded;
            tracks.push(TrackedDetection {
                id,
                detection: det.into_detection(&self.schema, i)?,
                occluded,
            });
        }
        if self.require_ids {
            let mut ids: Vec<u64> = tracks.iter().map(|t| t.id).collect();
            ids.sort_unstable();
            if ids.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::stream("detections", "duplicate id within a frame"));
            }
        }
        self.last_frame.insert(record.seq.clone(), record.frame);
        Ok(TrackedFrame {
            seq: record.seq,
            frame: record.frame,
            tracks,
        })
    }
}

impl<R: BufRead> Iterator for StreamReader<R> {
    type Item = Result<FrameObservations>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().map(|r| {
            r.map(|f| FrameObservations {
                seq: f.seq,
                frame: f.frame,
                detections: f.tracks.into_iter().map(|t| t.detection).collect(),
            })
        })
    }
}

pub struct TrackedStreamReader<R>(StreamReader<R>);

impl<R: BufRead> Iterator for TrackedStreamReader<R> {
    type Item = Result<TrackedFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        self.0.next_record()
    }
}

pub fn read_stream<R: BufRead>(input: R, schema: StreamSchema) -> StreamReader<R> {
    StreamReader::new(input, schema)
}

pub fn read_tracked_stream<R: BufRead>(input: R, schema: StreamSchema) -> TrackedStreamReader<R> {
    StreamReader::new(input, schema).tracked()
}

pub fn frame_to_line(frame: &FrameObservations) -> String {
    let record = FrameRecord {
        seq: frame.seq.clone(),
        frame: frame.frame,
        detections: frame
            .detections
            .iter()
            .map(|d| DetectionRecord::from_detection(d, None, None))
            .collect(),
    };
    serde_json::to_string(&record).expect("frame records always serialize")
}

pub fn tracked_to_line(frame: &TrackedFrame) -> String {
    let record = FrameRecord {
        seq: frame.seq.clone(),
        frame: frame.frame,
        detections: frame
            .tracks
            .iter()
            .map(|t| DetectionRecord::from_detection(&t.detection, Some(t.id), t.occluded))
            .collect(),
    };
    serde_json::to_string(&record).expect("frame records always serialize")
}

pub fn write_frame<W: Write>(out: &mut W, frame: &FrameObservations) -> Result<()> {
    writeln!(out, "{}", frame_to_line(frame))?;
    Ok(())
}

pub fn write_tracked<W: Write>(out: &mut W, frame: &TrackedFrame) -> Result<()> {
    writeln!(out, "{}", tracked_to_line(frame))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_schema() -> StreamSchema {
        StreamSchema {
            num_keypoints: 3,
            reid_dim: 2,
        }
    }

    const LINE: &str = r#"{"seq":"a","frame":3,"detections":[{"box":[1.5,2.0,10.25,20.0],"score":0.875,"keypoints":[[1.0,2.0,0.5],[3.0,4.0,1.0],[5.0,6.0,0.0]],"reid":[0.6,0.8]}]}"#;

    #[test]
    fn empty_input_is_empty_stream() {
        let frames: Vec<_> = read_stream("".as_bytes(), small_schema()).collect();
        assert!(frames.is_empty());
    }

    #[test]
    fn parses_and_round_trips() {
        let frames: Vec<_> = read_stream(LINE.as_bytes(), small_schema())
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(frames.len(), 1);
        let f = &frames[0];
        assert_eq!(f.seq, "a");
        assert_eq!(f.frame, 3);
        assert_eq!(f.detections[0].bbox, BBox::new(1.5, 2.0, 10.25, 20.0));
        assert_eq!(f.detections[0].pose.keypoints[1], Keypoint::new(3.0, 4.0, 1.0));
        assert_eq!(frame_to_line(f), LINE);
    }

    #[test]
    fn reid_is_normalized_on_ingest() {
        let line = LINE.replace("[0.6,0.8]", "[3.0,4.0]");
        let f = read_stream(line.as_bytes(), small_schema()).next().unwrap().unwrap();
        assert!((f.detections[0].reid.norm() - 1.0).abs() < 1e-12);
        assert!((f.detections[0].reid.as_slice()[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn wrong_keypoint_count_names_field() {
        let schema = StreamSchema {
            num_keypoints: 4,
            reid_dim: 2,
        };
        let err = read_stream(LINE.as_bytes(), schema).next().unwrap().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "{msg}");
        assert!(msg.contains("keypoints"), "{msg}");
    }

    #[test]
    fn malformed_record_names_line_and_field() {
        let bad = LINE.replace("\"score\":0.875", "\"score\":\"high\"");
        let input = format!("{LINE}\n{bad}\n");
        let results: Vec<_> = read_stream(input.as_bytes(), small_schema()).collect();
        assert!(results[0].is_ok());
        let msg = results[1].as_ref().unwrap_err().to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("score"), "{msg}");
    }

    #[test]
    fn missing_field_is_reported() {
        let bad = LINE.replace(",\"reid\":[0.6,0.8]", "");
        let msg = read_stream(bad.as_bytes(), small_schema()).next().unwrap().unwrap_err().to_string();
        assert!(msg.contains("reid"), "{msg}");
    }

    #[test]
    fn non_monotone_frames_rejected() {
        let input = format!("{LINE}\n{LINE}\n");
        let results: Vec<_> = read_stream(input.as_bytes(), small_schema()).collect();
        let msg = results[1].as_ref().unwrap_err().to_string();
        assert!(msg.contains("line 2") && msg.contains("frame"), "{msg}");
    }

    #[test]
    fn sequences_are_independent() {
        let other = LINE.replace("\"seq\":\"a\"", "\"seq\":\"b\"");
        let input = format!("{LINE}\n{other}\n");
        assert!(read_stream(input.as_bytes(), small_schema()).all(|r| r.is_ok()));
    }

    #[test]
    fn unknown_fields_ignored() {
        let extra = LINE.replace("\"seq\":\"a\"", "\"seq\":\"a\",\"camera\":7");
        assert!(read_stream(extra.as_bytes(), small_schema()).next().unwrap().is_ok());
    }

    #[test]
    fn tracked_stream_requires_unique_ids() {
        let tracked = LINE.replace("{\"box\"", "{\"id\":4,\"box\"");
        let f = read_tracked_stream(tracked.as_bytes(), small_schema()).next().unwrap().unwrap();
        assert_eq!(f.tracks[0].id, 4);
        assert_eq!(tracked_to_line(&f), tracked);

        let dup = tracked.replace("]}]}", "]},") + &tracked[tracked.find("{\"id\"").unwrap()..];
        let err = read_tracked_stream(dup.as_bytes(), small_schema()).next().unwrap().unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        let err = read_tracked_stream(LINE.as_bytes(), small_schema()).next().unwrap().unwrap_err();
        assert!(err.to_string().contains("id"), "{err}");
    }

    fn arb_frame() -> impl Strategy<Value = FrameObservations> {
        let det = (
            (-1e3..1e3f64, -1e3..1e3f64, 0.0..500.0f64, 0.0..500.0f64),
            0.0..=1.0f64,
            prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64, 0.0..=1.0f64), 3),
            prop::collection::vec(-1.0..1.0f64, 2),
        )
            .prop_filter_map("zero feature", |((x, y, w, h), score, kps, reid)| {
                Some(Detection {
                    bbox: BBox::from_xywh(x, y, w, h),
                    pose: Pose::new(kps.into_iter().map(|(x, y, c)| Keypoint::new(x, y, c)).collect()),
                    reid: ReidFeature::normalized(reid).ok()?,
                    score,
                })
            });
        ("[a-z]{1,4}", 0u64..1000, prop::collection::vec(det, 0..4)).prop_map(|(seq, frame, detections)| {
            FrameObservations { seq, frame, detections }
        })
    }

    proptest! {
        #[test]
        fn write_read_write_is_identity(frame in arb_frame()) {
            let line = frame_to_line(&frame);
            let back = read_stream(line.as_bytes(), small_schema()).next().unwrap().unwrap();
            prop_assert_eq!(&back, &frame);
            prop_assert_eq!(frame_to_line(&back), line);
        }
    }
}
