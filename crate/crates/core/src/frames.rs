//! Frame sharpness scoring and response-track frame selection.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec::Vec;

use crate::geometry::{FrameId, PixelPoint};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("no response-track frame has a camera pose")]
    NoPose,
}

/// Row-major luminance image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::Domain("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(FrameError::Domain("pixel count does not match dimensions"));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(FrameError::Domain("luminance outside [0, 1]"));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// Variance of the 4-neighbour Laplacian over interior pixels. Higher is
/// sharper; constant images score zero.
pub fn blur_score(img: &GrayImage) -> Result<f64, FrameError> {
    if img.width < 3 || img.height < 3 {
        return Err(FrameError::Domain("blur score needs at least a 3x3 image"));
    }
    let (w, h) = (img.width, img.height);
    let mut response = Vec::with_capacity((w - 2) * (h - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let lap = img.at(x, y - 1) + img.at(x - 1, y) + img.at(x + 1, y) + img.at(x, y + 1) - 4.0 * img.at(x, y);
            response.push(lap);
        }
    }
    let n = response.len() as f64;
    let mean = response.iter().sum::<f64>() / n;
    Ok(response.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n)
}

/// Inclusive frame-index range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRange {
    pub start: usize,
    pub end: usize,
}

/// The window of `window_len` consecutive frames whose weakest score is
/// largest, if that score reaches `threshold`. Ties go to the earliest start.
pub fn select_sharp_window(scores: &[f64], window_len: usize, threshold: f64) -> Result<Option<FrameRange>, FrameError> {
    if window_len == 0 {
        return Err(FrameError::Domain("window length must be at least 1"));
    }
    if window_len > scores.len() {
        return Err(FrameError::Domain("window longer than the frame list"));
    }
    // Sliding-window minimum with a monotone deque of indices.
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        while deque.back().is_some_and(|&j| scores[j] >= s) {
            deque.pop_back();
        }
        deque.push_back(i);
        if deque.front().is_some_and(|&j| j + window_len <= i) {
            deque.pop_front();
        }
        if i + 1 >= window_len {
            let start = i + 1 - window_len;
            let min = scores[*deque.front().expect("window is non-empty")];
            if best.is_none_or(|(_, m)| min > m) {
                best = Some((start, min));
            }
        }
    }
    Ok(best
        .filter(|&(_, min)| min >= threshold)
        .map(|(start, _)| FrameRange { start, end: start + window_len - 1 }))
}

/// Axis-aligned detection box in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, FrameError> {
        let b = Self { x_min, y_min, x_max, y_max };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<(), FrameError> {
        let all = [self.x_min, self.y_min, self.x_max, self.y_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(FrameError::Domain("non-finite box coordinate"));
        }
        if self.x_min > self.x_max || self.y_min > self.y_max {
            return Err(FrameError::Domain("box corners out of order"));
        }
        Ok(())
    }

    /// Real-valued center `((x_min + x_max) / 2, (y_min + y_max) / 2)`.
    pub fn center(&self) -> PixelPoint {
        PixelPoint::new((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn within(&self, width: u32, height: u32) -> bool {
        self.x_min >= 0.0 && self.y_min >= 0.0 && self.x_max <= f64::from(width) && self.y_max <= f64::from(height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrackFrame {
    pub frame_id: FrameId,
    #[cfg_attr(feature = "serde", serde(rename = "box"))]
    pub bbox: BoundingBox,
}

/// Temporally ordered detections of the query object. Non-empty, with
/// strictly increasing frame ids.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "Vec<TrackFrame>", into = "Vec<TrackFrame>")
)]
pub struct ResponseTrack {
    frames: Vec<TrackFrame>,
}

impl TryFrom<Vec<TrackFrame>> for ResponseTrack {
    type Error = FrameError;

    fn try_from(frames: Vec<TrackFrame>) -> Result<Self, Self::Error> {
        ResponseTrack::new(frames)
    }
}

impl From<ResponseTrack> for Vec<TrackFrame> {
    fn from(t: ResponseTrack) -> Self {
        t.frames
    }
}

impl ResponseTrack {
    pub fn new(frames: Vec<TrackFrame>) -> Result<Self, FrameError> {
        if frames.is_empty() {
            return Err(FrameError::Domain("response track is empty"));
        }
        if frames.windows(2).any(|w| w[0].frame_id >= w[1].frame_id) {
            return Err(FrameError::Domain("response track frame ids must be strictly increasing"));
        }
        for f in &frames {
            f.bbox.check()?;
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[TrackFrame] {
        &self.frames
    }

    pub fn first_frame(&self) -> FrameId {
        self.frames[0].frame_id
    }

    pub fn last_frame(&self) -> FrameId {
        self.frames[self.frames.len() - 1].frame_id
    }

    pub fn get(&self, frame: FrameId) -> Option<&TrackFrame> {
        self.frames
            .binary_search_by_key(&frame, |f| f.frame_id)
            .ok()
            .map(|i| &self.frames[i])
    }

    pub fn within(&self, width: u32, height: u32) -> bool {
        self.frames.iter().all(|f| f.bbox.within(width, height))
    }
}

/// How per-frame world predictions along a response track are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Aggregation {
    /// Most recent track frame with a pose.
    #[default]
    Last,
    /// Component-wise mean.
    Average,
    /// Component-wise median.
    Median,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackSelection {
    /// Posed track frames in increasing order; a single frame for `Last`.
    pub frames: Vec<FrameId>,
    pub aggregation: Aggregation,
}

pub fn select_track_frame(
    track: &ResponseTrack,
    posed: &BTreeSet<FrameId>,
    mode: Aggregation,
) -> Result<TrackSelection, FrameError> {
    let frames: Vec<FrameId> = track.frames.iter().map(|f| f.frame_id).filter(|f| posed.contains(f)).collect();
    let Some(&last) = frames.last() else {
        return Err(FrameError::NoPose);
    };
    let frames = match mode {
        Aggregation::Last => alloc::vec![last],
        Aggregation::Average | Aggregation::Median => frames,
    };
    Ok(TrackSelection { frames, aggregation: mode })
}
