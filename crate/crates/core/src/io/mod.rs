//! Stream formats and configuration.

pub mod coco;
pub mod config;
pub mod stream;

pub use coco::{AnnotatedImage, CocoDataset};
pub use config::Settings;
pub use stream::{
    frame_to_line, read_stream, read_tracked_stream, tracked_to_line, write_frame, write_tracked, FrameObservations,
    StreamReader, StreamSchema, TrackedDetection, TrackedFrame, TrackedStreamReader,
};

use std::collections::HashMap;

use crate::error::Result;
use crate::tracker::{Tracker, TrackerConfig};

/// Runs one tracker per sequence over a stream of frames, preserving frame
/// order. Each output frame is handed to `emit` as soon as it is tracked.
pub fn track_stream<I>(frames: I, cfg: &TrackerConfig, mut emit: impl FnMut(TrackedFrame) -> Result<()>) -> Result<()>
where
    I: IntoIterator<Item = Result<FrameObservations>>,
{
    let mut trackers: HashMap<String, Tracker> = HashMap::new();
    for frame in frames {
        let frame = frame?;
        let tracker = match trackers.get_mut(&frame.seq) {
            Some(t) => t,
            None => trackers.entry(frame.seq.clone()).or_insert(Tracker::new(*cfg)?),
        };
        emit(tracker.step(frame)?)?;
    }
    Ok(())
}

/// Tracks an in-memory stream.
pub fn track_all(frames: &[FrameObservations], cfg: &TrackerConfig) -> Result<Vec<TrackedFrame>> {
    let mut out = Vec::with_capacity(frames.len());
    track_stream(frames.iter().cloned().map(Ok), cfg, |f| {
        out.push(f);
        Ok(())
    })?;
    Ok(out)
}
