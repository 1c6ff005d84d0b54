//! Landmark traces as JSON Lines: a header object on line 1, then one frame
//! object per line.
//!
//! ```text
//! {"version":1,"frame_width":1280,"frame_height":720,"focal_length_px":910.0}
//! {"t_ms":0,"landmarks":[[640.0,620.0], ...],"conf":0.98}
//! ```
//!
//! Writing uses shortest round-trip decimals, so a trace written by
//! [`write_trace`] reads back bit-identical and rewrites byte-identical.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Lines, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depth::AnchorProfile;
use crate::landmark::{augment, HandFrame, Keypoint, LandmarkError, RAW_KEYPOINTS};

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    pub frame_width: u32,
    pub frame_height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focal_length_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<AnchorProfile>,
    /// Landmarks are fractions of the frame size rather than pixels.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalized: bool,
}

impl TraceHeader {
    pub fn new(frame_width: u32, frame_height: u32) -> Self {
        Self {
            version: TRACE_VERSION,
            frame_width,
            frame_height,
            focal_length_px: None,
            profile: None,
            normalized: false,
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.frame_width, self.frame_height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFrame {
    pub t_ms: i64,
    pub landmarks: Vec<[f64; 2]>,
    pub conf: f64,
}

impl TraceFrame {
    pub fn from_keypoints(t_ms: i64, keypoints: &[Keypoint], conf: f64) -> Self {
        Self {
            t_ms,
            landmarks: keypoints.iter().map(|k| [k.u, k.v]).collect(),
            conf,
        }
    }

    pub fn keypoints(&self) -> Vec<Keypoint> {
        self.landmarks.iter().map(|&p| Keypoint::from(p)).collect()
    }

    /// Converts landmarks given as fractions of the frame size to pixels.
    pub fn denormalize(&mut self, (width, height): (u32, u32)) {
        let (w, h) = (f64::from(width), f64::from(height));
        for p in &mut self.landmarks {
            *p = [p[0] * w, p[1] * h];
        }
    }

    pub fn to_hand_frame(&self, dims: (u32, u32)) -> Result<HandFrame, LandmarkError> {
        augment(&self.keypoints(), self.t_ms, dims, self.conf)
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("trace is empty; line 1 must be the header")]
    MissingHeader,
    #[error("line 1: bad header: {0}")]
    Header(String),
    #[error("unsupported trace version {0}")]
    Version(u32),
    #[error("line 1: frame dimensions must be positive")]
    Dimensions,
    #[error("line {line}: {detail}")]
    Frame { line: usize, detail: String },
    #[error("line {line}: expected {RAW_KEYPOINTS} landmarks, found {count}")]
    LandmarkCount { line: usize, count: usize },
}

/// Single-pass frame iterator over a trace stream. The header is parsed on
/// construction; landmarks are converted to pixels when the header says
/// they are normalised.
pub struct TraceReader<R> {
    header: TraceHeader,
    lines: Lines<R>,
    line: usize,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R) -> Result<Self, TraceError> {
        let mut lines = reader.lines();
        let first = lines.next().ok_or(TraceError::MissingHeader)??;
        let header: TraceHeader =
            serde_json::from_str(&first).map_err(|e| TraceError::Header(e.to_string()))?;
        if header.version != TRACE_VERSION {
            return Err(TraceError::Version(header.version));
        }
        if header.frame_width == 0 || header.frame_height == 0 {
            return Err(TraceError::Dimensions);
        }
        Ok(Self {
            header,
            lines,
            line: 1,
        })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    fn parse(&self, text: &str) -> Result<TraceFrame, TraceError> {
        let mut frame: TraceFrame =
            serde_json::from_str(text).map_err(|e| TraceError::Frame {
                line: self.line,
                detail: e.to_string(),
            })?;
        if frame.landmarks.len() != RAW_KEYPOINTS {
            return Err(TraceError::LandmarkCount {
                line: self.line,
                count: frame.landmarks.len(),
            });
        }
        if self.header.normalized {
            frame.denormalize(self.header.dims());
        }
        Ok(frame)
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<TraceFrame, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => return Some(Err(e.into())),
            };
            self.line += 1;
            if !text.trim().is_empty() {
                return Some(self.parse(&text));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Always in pixel coordinates after reading.
    pub header: TraceHeader,
    /// Ordered by nondecreasing `t_ms`.
    pub frames: Vec<TraceFrame>,
    /// Timestamps were out of order in the source and have been sorted.
    pub resorted: bool,
}

impl Trace {
    pub fn new(header: TraceHeader, frames: Vec<TraceFrame>) -> Self {
        Self {
            header,
            frames,
            resorted: false,
        }
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, TraceError> {
        let reader = TraceReader::new(reader)?;
        let mut header = reader.header().clone();
        header.normalized = false;
        let mut frames = reader.collect::<Result<Vec<_>, _>>()?;
        let resorted = frames.windows(2).any(|w| w[1].t_ms < w[0].t_ms);
        if resorted {
            tracing::warn!("trace timestamps are not monotone; frames sorted by t_ms");
            frames.sort_by_key(|f| f.t_ms);
        }
        Ok(Self {
            header,
            frames,
            resorted,
        })
    }

    pub fn write_to(&self, w: impl Write) -> io::Result<()> {
        write_trace(w, &self.header, &self.frames)
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    Trace::from_reader(BufReader::new(File::open(path)?))
}

pub fn write_trace(
    mut w: impl Write,
    header: &TraceHeader,
    frames: &[TraceFrame],
) -> io::Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for f in frames {
        serde_json::to_writer(&mut w, f)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}
