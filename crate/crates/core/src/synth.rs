//! Synthetic unit-bump benchmark: a white disk sliding diagonally over a black
//! background, the blurry average of its frames, and a contrast-threshold
//! event simulator driven by the same frames.

use crate::error::{Error, Result};
use crate::events::{Event, EventStream, Frame, FrameSequence, Polarity};

#[derive(Debug, Clone, PartialEq)]
pub struct BumpScene {
    pub width: usize,
    pub height: usize,
    pub disk_radius: f64,
    /// Displacement per frame in pixels, (right, down).
    pub step: (i64, i64),
    pub num_frames: usize,
    pub background: f64,
    pub foreground: f64,
    /// Seconds between consecutive sharp frames.
    pub frame_interval: f64,
}

impl Default for BumpScene {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            disk_radius: 8.0,
            step: (2, 2),
            num_frames: 9,
            background: 0.0,
            foreground: 1.0,
            frame_interval: 0.01,
        }
    }
}

impl BumpScene {
    /// Disk centres, arranged so the path is centred in the image.
    pub fn centers(&self) -> Vec<(f64, f64)> {
        let half = (self.num_frames as f64 - 1.0) / 2.0;
        let cx0 = (self.width / 2) as f64 - half * self.step.0 as f64;
        let cy0 = (self.height / 2) as f64 - half * self.step.1 as f64;
        (0..self.num_frames)
            .map(|j| {
                (
                    cx0 + j as f64 * self.step.0 as f64,
                    cy0 + j as f64 * self.step.1 as f64,
                )
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_frames < 3 || self.num_frames.is_multiple_of(2) {
            return Err(Error::Scene(format!(
                "need an odd number of frames >= 3, got {}",
                self.num_frames
            )));
        }
        if !(self.disk_radius > 0.0) || !(self.frame_interval > 0.0) {
            return Err(Error::Scene("radius and frame interval must be positive".into()));
        }
        let r = self.disk_radius;
        for (j, (cx, cy)) in self.centers().into_iter().enumerate() {
            let inside = cx - r >= 0.0
                && cy - r >= 0.0
                && cx + r <= (self.width - 1) as f64
                && cy + r <= (self.height - 1) as f64;
            if !inside {
                return Err(Error::Scene(format!(
                    "disk at frame {} (centre {cx}, {cy}) leaves the {}x{} image",
                    j + 1,
                    self.width,
                    self.height
                )));
            }
        }
        Ok(())
    }

    fn render(&self, center: (f64, f64)) -> Frame {
        let r2 = self.disk_radius * self.disk_radius;
        Frame::from_fn(self.width, self.height, |x, y| {
            let dx = x as f64 - center.0;
            let dy = y as f64 - center.1;
            if dx * dx + dy * dy <= r2 {
                self.foreground
            } else {
                self.background
            }
        })
    }
}

/// Sharp frames, their blurry average and the three-frame model input.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSequence {
    pub sharp: Vec<Frame>,
    pub times: Vec<f64>,
    pub blurry: Frame,
    /// The middle sharp frame, ground truth for the blurry one.
    pub baseline: Frame,
    /// Frames before the middle, the blurry frame, and after the middle.
    pub model_frames: FrameSequence,
}

pub fn generate_bump_sequence(scene: &BumpScene) -> Result<BumpSequence> {
    scene.validate()?;
    let n = scene.num_frames;
    let sharp: Vec<Frame> = scene.centers().into_iter().map(|c| scene.render(c)).collect();
    let times: Vec<f64> = (0..n).map(|j| j as f64 * scene.frame_interval).collect();

    let mut blurry = Frame::filled(scene.width, scene.height, 0.0);
    for f in &sharp {
        for (acc, v) in blurry.data_mut().iter_mut().zip(f.data()) {
            *acc += v;
        }
    }
    for v in blurry.data_mut() {
        *v /= n as f64;
    }

    let mid = n / 2;
    let baseline = sharp[mid].clone();
    let model_frames = FrameSequence::new(
        vec![sharp[mid - 1].clone(), blurry.clone(), sharp[mid + 1].clone()],
        vec![times[mid - 1], times[mid], times[mid + 1]],
        vec![
            scene.frame_interval,
            times[n - 1] - times[0],
            scene.frame_interval,
        ],
    )?;

    Ok(BumpSequence {
        sharp,
        times,
        blurry,
        baseline,
        model_frames,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorConfig {
    pub contrast_threshold: f64,
    /// Linear-interpolation steps between consecutive frames.
    pub substeps: usize,
    /// Intensity floor applied before taking logarithms.
    pub epsilon_log: f64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            contrast_threshold: 0.2,
            substeps: 20,
            epsilon_log: 1e-3,
        }
    }
}

/// Emits events whenever a pixel's log intensity moves by at least the
/// contrast threshold from its reference level. The reference moves by
/// exactly one threshold per event, so a large jump produces several events
/// with the same timestamp.
pub fn simulate_events(frames: &[Frame], times: &[f64], config: &SimulatorConfig) -> Result<EventStream> {
    if frames.len() < 2 || frames.len() != times.len() {
        return Err(Error::Parameter(
            "simulation needs >= 2 frames with one timestamp each".into(),
        ));
    }
    if !(config.contrast_threshold > 0.0) || config.substeps == 0 || !(config.epsilon_log > 0.0) {
        return Err(Error::Parameter(
            "threshold and floor must be positive, substeps >= 1".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return Err(Error::Parameter("frame times must be increasing and >= 0".into()));
    }
    let (width, height) = (frames[0].width(), frames[0].height());
    if frames.iter().any(|f| !f.same_shape(&frames[0])) {
        return Err(Error::Validation("frames differ in size".into()));
    }

    let c = config.contrast_threshold;
    let log_of = |v: f64| v.max(config.epsilon_log).ln();
    let mut reference: Vec<f64> = frames[0].data().iter().map(|&v| log_of(v)).collect();
    let mut events = Vec::new();

    for j in 0..frames.len() - 1 {
        let (a, b) = (frames[j].data(), frames[j + 1].data());
        for s in 1..=config.substeps {
            let frac = s as f64 / config.substeps as f64;
            let t = times[j] + frac * (times[j + 1] - times[j]);
            for (p, level) in reference.iter_mut().enumerate() {
                let current = log_of((1.0 - frac) * a[p] + frac * b[p]);
                let (x, y) = (p % width, p / width);
                while current - *level >= c {
                    *level += c;
                    events.push(Event::new(t, x, y, Polarity::Positive));
                }
                while current - *level <= -c {
                    *level -= c;
                    events.push(Event::new(t, x, y, Polarity::Negative));
                }
            }
        }
    }
    EventStream::new(events, width, height)
}

/// Events of the benchmark sequence, simulated over all sharp frames.
pub fn simulate_bump_events(sequence: &BumpSequence, config: &SimulatorConfig) -> Result<EventStream> {
    simulate_events(&sequence.sharp, &sequence.times, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_at(stream: &EventStream, x: usize, y: usize) -> (usize, usize) {
        stream.events().iter().filter(|e| e.x == x && e.y == y).fold((0, 0), |(p, n), e| match e.p {
            Polarity::Positive => (p + 1, n),
            Polarity::Negative => (p, n + 1),
        })
    }

    #[test]
    fn default_scene_fits() {
        let scene = BumpScene::default();
        scene.validate().unwrap();
        assert_eq!(scene.centers()[4], (32.0, 32.0));
        assert_eq!(scene.centers()[0], (24.0, 24.0));
    }

    #[test]
    fn disk_leaving_image_is_rejected() {
        let scene = BumpScene {
            disk_radius: 30.0,
            ..BumpScene::default()
        };
        assert!(matches!(generate_bump_sequence(&scene), Err(Error::Scene(_))));
    }

    #[test]
    fn blurry_frame_is_coverage_fraction() {
        let seq = generate_bump_sequence(&BumpScene::default()).unwrap();
        // centre of the middle disk lies within 8 px of centres 3..=7 (1-based)
        assert_eq!(seq.blurry.get(32, 32), 5.0 / 9.0);
        // (28, 28) is inside frames 1..=5 of 9 => distances 5.66*.. check by count
        let covered = seq.sharp.iter().filter(|f| f.get(28, 28) == 1.0).count();
        assert_eq!(seq.blurry.get(28, 28), covered as f64 / 9.0);
        assert_eq!(seq.blurry.get(0, 0), 0.0);
        assert_eq!(seq.baseline, seq.sharp[4]);
        assert_eq!(seq.model_frames.frames()[0], seq.sharp[3]);
        assert_eq!(seq.model_frames.frames()[1], seq.blurry);
        assert_eq!(seq.model_frames.frames()[2], seq.sharp[5]);
        assert_eq!(seq.model_frames.exposure(1), 0.08);
    }

    #[test]
    fn a_fully_covered_pixel_averages_to_one() {
        let scene = BumpScene {
            step: (0, 0),
            ..BumpScene::default()
        };
        let seq = generate_bump_sequence(&scene).unwrap();
        assert_eq!(seq.blurry.get(32, 32), 1.0);
    }

    #[test]
    fn a_pixel_covered_three_times_averages_to_a_third() {
        let seq = generate_bump_sequence(&BumpScene::default()).unwrap();
        let (mut found, mut checked) = (false, 0);
        for y in 0..64 {
            for x in 0..64 {
                let covered = seq.sharp.iter().filter(|f| f.get(x, y) == 1.0).count();
                if covered == 3 {
                    assert_eq!(seq.blurry.get(x, y), 3.0 / 9.0);
                    found = true;
                    checked += 1;
                }
            }
        }
        assert!(found && checked > 0);
    }

    #[test]
    fn static_scene_is_silent() {
        let f = Frame::from_fn(4, 4, |x, y| (x + y) as f64 / 6.0);
        let s = simulate_events(&[f.clone(), f.clone(), f], &[0.0, 0.1, 0.2], &SimulatorConfig::default()).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn dark_to_bright_step_event_count() {
        let dark = Frame::filled(1, 1, 0.0);
        let bright = Frame::filled(1, 1, 1.0);
        let s = simulate_events(&[dark, bright], &[0.0, 1.0], &SimulatorConfig::default()).unwrap();
        // floor(ln(1 / 1e-3) / 0.2) = floor(34.54)
        assert_eq!(count_at(&s, 0, 0), (34, 0));
    }

    #[test]
    fn pulse_is_balanced() {
        let dark = Frame::filled(1, 1, 0.0);
        let bright = Frame::filled(1, 1, 1.0);
        let s = simulate_events(&[dark.clone(), bright, dark], &[0.0, 1.0, 2.0], &SimulatorConfig::default())
            .unwrap();
        let (p, n) = count_at(&s, 0, 0);
        assert!((p as i64 - n as i64).abs() <= 1, "{p} vs {n}");
        assert!(s.events().windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn brightening_only_produces_positive_events() {
        let frames: Vec<Frame> = (0..5).map(|j| Frame::filled(2, 1, 0.05 + 0.2 * j as f64)).collect();
        let s = simulate_events(&frames, &[0.0, 1.0, 2.0, 3.0, 4.0], &SimulatorConfig::default()).unwrap();
        assert!(!s.is_empty());
        assert!(s.events().iter().all(|e| e.p == Polarity::Positive));
    }

    #[test]
    fn smaller_threshold_gives_more_events() {
        let seq = generate_bump_sequence(&BumpScene::default()).unwrap();
        let coarse = simulate_bump_events(&seq, &SimulatorConfig::default()).unwrap();
        let fine = simulate_bump_events(
            &seq,
            &SimulatorConfig {
                contrast_threshold: 0.1,
                ..SimulatorConfig::default()
            },
        )
        .unwrap();
        assert!(fine.len() >= 2 * coarse.len(), "{} vs {}", fine.len(), coarse.len());
    }

    #[test]
    fn return_to_start_nets_at_most_one_event() {
        let seq = generate_bump_sequence(&BumpScene::default()).unwrap();
        let mut frames = seq.sharp.clone();
        frames.extend(seq.sharp.iter().rev().skip(1).cloned());
        let times: Vec<f64> = (0..frames.len()).map(|j| j as f64 * 0.01).collect();
        let s = simulate_events(&frames, &times, &SimulatorConfig::default()).unwrap();
        let mut net = vec![0i64; 64 * 64];
        for e in s.events() {
            net[e.y * 64 + e.x] += e.p.sign() as i64;
        }
        assert!(net.iter().all(|v| v.abs() <= 1));
    }
}
