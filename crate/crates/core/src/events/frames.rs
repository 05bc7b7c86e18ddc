use crate::error::{Error, Result};

/// Row-major grayscale image; `data[y * width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Standard-camera frames with their reference times and exposure lengths.
/// Frame `i` integrates over `[t_i - len_i / 2, t_i + len_i / 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    reference_times: Vec<f64>,
    exposures: Vec<f64>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, reference_times: Vec<f64>, exposures: Vec<f64>) -> Result<Self> {
        let n = frames.len();
        if n < 2 {
            return Err(Error::Validation(format!(
                "a frame sequence needs at least 2 frames, got {n}"
            )));
        }
        if reference_times.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: reference_times.len(),
            });
        }
        if exposures.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: exposures.len(),
            });
        }
        if let Some(f) = frames.iter().find(|f| !f.same_shape(&frames[0])) {
            return Err(Error::Validation(format!(
                "frame of size {}x{} differs from {}x{}",
                f.width(),
                f.height(),
                frames[0].width(),
                frames[0].height()
            )));
        }
        if reference_times.iter().any(|t| !t.is_finite())
            || reference_times.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Validation(
                "reference times must be finite and strictly increasing".into(),
            ));
        }
        if exposures.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Validation("exposure lengths must be positive".into()));
        }
        Ok(Self {
            frames,
            reference_times,
            exposures,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn reference_time(&self, i: usize) -> f64 {
        self.reference_times[i]
    }

    pub fn reference_times(&self) -> &[f64] {
        &self.reference_times
    }

    pub fn exposure(&self, i: usize) -> f64 {
        self.exposures[i]
    }

    pub fn exposures(&self) -> &[f64] {
        &self.exposures
    }

    /// Exposure interval `(start, end)` of frame `i`.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        let half = 0.5 * self.exposures[i];
        (self.reference_times[i] - half, self.reference_times[i] + half)
    }
}

/// Maps each frame affinely onto (0, 1) using the widened range
/// `[min - epsilon, max + epsilon]`. A constant frame maps to 0.5.
pub fn standardize_frames(raw: &[Frame], epsilon: f64) -> Result<Vec<Frame>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!(
            "standardization epsilon must be positive, got {epsilon}"
        )));
    }
    raw.iter()
        .map(|frame| {
            if frame.data().is_empty() {
                return Err(Error::Validation("cannot standardize an empty frame".into()));
            }
            if frame.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation("frame contains non-finite values".into()));
            }
            let (min, max) = frame.min_max();
            if min == max {
                return Ok(frame.map(|_| 0.5));
            }
            let lo = min - epsilon;
            let span = (max + epsilon) - lo;
            Ok(frame.map(|v| (v - lo) / span))
        })
        .collect()
}

/// Standardized frames together with their logarithms `d = ln B`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogFrames {
    standardized: Vec<Frame>,
    d: Vec<Frame>,
    epsilon: f64,
}

pub const DEFAULT_STANDARDIZE_EPSILON: f64 = 1e-3;

impl LogFrames {
    pub fn from_raw(raw: &[Frame], epsilon: f64) -> Result<Self> {
        let standardized = standardize_frames(raw, epsilon)?;
        let d = standardized.iter().map(|f| f.map(f64::ln)).collect();
        Ok(Self {
            standardized,
            d,
            epsilon,
        })
    }

    pub fn standardized(&self) -> &[Frame] {
        &self.standardized
    }

    pub fn d(&self) -> &[Frame] {
        &self.d
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Log values of one pixel across all frames.
    pub fn pixel(&self, x: usize, y: usize) -> Vec<f64> {
        self.d.iter().map(|f| f.get(x, y)).collect()
    }
}
