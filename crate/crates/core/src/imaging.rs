//! Turns per-pixel solutions back into images, and image quality metrics.

use crate::error::{Error, Result};
use crate::events::{Frame, LogFrames};
use crate::solver::PixelSolution;
use nalgebra::DVector;

/// One solved pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedPixel {
    pub x: usize,
    pub y: usize,
    pub solution: PixelSolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionSet {
    /// Deblurred images in [0, 1], one per input frame.
    pub v_frames: Vec<Frame>,
    /// Latent sharp-image estimates, min-max normalised per frame.
    pub u_frames: Vec<Frame>,
    /// Threshold vectors, row-major; `None` where no events fired.
    pub z_map: Vec<Option<DVector<f64>>>,
    /// `true` where a pixel had no events and was copied from the input.
    pub skipped: Vec<bool>,
}

impl ReconstructionSet {
    pub fn width(&self) -> usize {
        self.v_frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.v_frames[0].height()
    }

    pub fn solved_count(&self) -> usize {
        self.skipped.iter().filter(|s| !**s).count()
    }

    pub fn z_at(&self, x: usize, y: usize) -> Option<&DVector<f64>> {
        self.z_map[y * self.width() + x].as_ref()
    }
}

/// Builds the output images. `event_mask[y * width + x]` says whether the
/// pixel had events; exactly those pixels must appear in `solutions`.
/// Pixels without events keep the standardised input value.
pub fn assemble(logs: &LogFrames, event_mask: &[bool], solutions: &[SolvedPixel]) -> Result<ReconstructionSet> {
    let standardized = logs.standardized();
    let n = standardized.len();
    let (width, height) = (standardized[0].width(), standardized[0].height());
    if event_mask.len() != width * height {
        return Err(Error::Dimension {
            expected: width * height,
            actual: event_mask.len(),
        });
    }

    let mut by_pixel: Vec<Option<&PixelSolution>> = vec![None; width * height];
    for s in solutions {
        if s.x >= width || s.y >= height {
            return Err(Error::Validation(format!("solution at ({}, {}) is outside the image", s.x, s.y)));
        }
        let idx = s.y * width + s.x;
        if !event_mask[idx] {
            return Err(Error::Validation(format!("solution given for eventless pixel ({}, {})", s.x, s.y)));
        }
        if s.solution.v.len() != n || s.solution.u.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: s.solution.v.len(),
            });
        }
        by_pixel[idx] = Some(&s.solution);
    }
    for (idx, &has) in event_mask.iter().enumerate() {
        if has && by_pixel[idx].is_none() {
            return Err(Error::MissingSolution {
                x: idx % width,
                y: idx / width,
            });
        }
    }

    let mut v_frames = standardized.to_vec();
    for (idx, sol) in by_pixel.iter().enumerate() {
        if let Some(sol) = sol {
            for (i, frame) in v_frames.iter_mut().enumerate() {
                frame.data_mut()[idx] = sol.v[i].exp().clamp(f64::MIN_POSITIVE, 1.0);
            }
        }
    }

    let u_frames = (0..n)
        .map(|i| {
            let solved = by_pixel.iter().filter_map(|s| s.map(|s| s.u[i]));
            let (lo, hi) = solved.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            let mut frame = Frame::filled(width, height, 0.0);
            if hi > lo {
                for (idx, sol) in by_pixel.iter().enumerate() {
                    if let Some(sol) = sol {
                        frame.data_mut()[idx] = (sol.u[i] - lo) / (hi - lo);
                    }
                }
            }
            frame
        })
        .collect();

    Ok(ReconstructionSet {
        v_frames,
        u_frames,
        z_map: by_pixel.iter().map(|s| s.map(|s| s.z.clone())).collect(),
        skipped: by_pixel.iter().map(|s| s.is_none()).collect(),
    })
}

fn check_pair(a: &Frame, b: &Frame) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::Dimension {
            expected: a.width() * a.height(),
            actual: b.width() * b.height(),
        });
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB for images in [0, 1]. Identical images
/// give `f64::INFINITY`.
pub fn psnr(image: &Frame, reference: &Frame) -> Result<f64> {
    check_pair(image, reference)?;
    let mse = image
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / image.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

pub const SSIM_WINDOW: usize = 8;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn ssim_window(a: &Frame, b: &Frame, x0: usize, y0: usize, w: usize, h: usize) -> f64 {
    let count = (w * h) as f64;
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            let (p, q) = (a.get(x, y), b.get(x, y));
            sa += p;
            sb += q;
            saa += p * p;
            sbb += q * q;
            sab += p * q;
        }
    }
    let (ma, mb) = (sa / count, sb / count);
    let va = (saa / count - ma * ma).max(0.0);
    let vb = (sbb / count - mb * mb).max(0.0);
    let cov = sab / count - ma * mb;
    ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
        / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
}

/// Mean structural similarity over all 8x8 windows (stride 1, uniform
/// weights, dynamic range 1). Images smaller than a window are compared as a
/// single window.
pub fn ssim(image: &Frame, reference: &Frame) -> Result<f64> {
    check_pair(image, reference)?;
    let (w, h) = (image.width(), image.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Ok(ssim_window(image, reference, 0, 0, w, h));
    }
    let mut total = 0.0;
    let mut windows = 0usize;
    for y0 in 0..=h - SSIM_WINDOW {
        for x0 in 0..=w - SSIM_WINDOW {
            total += ssim_window(image, reference, x0, y0, SSIM_WINDOW, SSIM_WINDOW);
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn logs() -> LogFrames {
        let raw: Vec<Frame> = (0..3)
            .map(|i| Frame::from_fn(3, 2, |x, y| (x + 2 * y + i) as f64))
            .collect();
        LogFrames::from_raw(&raw, 1e-3).unwrap()
    }

    fn solution(v: [f64; 3], u: [f64; 3]) -> PixelSolution {
        PixelSolution {
            z: DVector::from_element(3, 0.2),
            u: DVector::from_row_slice(&u),
            v: DVector::from_row_slice(&v),
            grad_norm_trace: vec![0.0],
            objective_trace: vec![0.0],
            converged: true,
            iterations: 0,
        }
    }

    #[test]
    fn no_events_copies_standardized_input() {
        let logs = logs();
        let set = assemble(&logs, &[false; 6], &[]).unwrap();
        assert_eq!(set.v_frames, logs.standardized());
        assert_eq!(set.solved_count(), 0);
        assert!(set.u_frames.iter().all(|f| f.data().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn solved_pixels_are_exponentiated_and_clamped() {
        let logs = logs();
        let mut mask = [false; 6];
        mask[1] = true;
        mask[4] = true;
        let sols = vec![
            SolvedPixel {
                x: 1,
                y: 0,
                solution: solution([-1.0, 0.5, -0.1], [1.0, 2.0, 3.0]),
            },
            SolvedPixel {
                x: 1,
                y: 1,
                solution: solution([-2.0, -0.3, 0.0], [3.0, 2.0, 1.0]),
            },
        ];
        let set = assemble(&logs, &mask, &sols).unwrap();
        assert_abs_diff_eq!(set.v_frames[0].get(1, 0), (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(set.v_frames[1].get(1, 0), 1.0);
        assert_eq!(set.v_frames[0].get(0, 0), logs.standardized()[0].get(0, 0));
        assert_eq!(set.u_frames[0].get(1, 0), 0.0);
        assert_eq!(set.u_frames[0].get(1, 1), 1.0);
        assert_eq!(set.u_frames[1].data().iter().sum::<f64>(), 0.0);
        assert!(set.z_at(1, 0).is_some());
        assert!(set.z_at(0, 0).is_none());
        assert_eq!(set.solved_count(), 2);
    }

    #[test]
    fn missing_solution_is_an_error() {
        let mut mask = [false; 6];
        mask[5] = true;
        assert!(matches!(
            assemble(&logs(), &mask, &[]),
            Err(Error::MissingSolution { x: 2, y: 1 })
        ));
    }

    #[test]
    fn solution_for_silent_pixel_is_an_error() {
        let sols = vec![SolvedPixel {
            x: 0,
            y: 0,
            solution: solution([0.0; 3], [0.0; 3]),
        }];
        assert!(assemble(&logs(), &[false; 6], &sols).is_err());
    }

    #[test]
    fn psnr_values() {
        let a = Frame::filled(4, 4, 0.5);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = Frame::filled(4, 4, 0.6);
        assert_abs_diff_eq!(psnr(&a, &b).unwrap(), 20.0, epsilon = 1e-9);
        assert!(psnr(&a, &Frame::filled(3, 4, 0.5)).is_err());
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let a = Frame::from_fn(12, 10, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0);
        let b = Frame::from_fn(12, 10, |x, y| ((x * 5 + y * 2) % 7) as f64 / 6.0);
        assert_abs_diff_eq!(ssim(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap(), epsilon = 1e-12);
        assert!(ssim(&a, &b).unwrap() < 0.9);
    }

    #[test]
    fn ssim_small_image_uses_one_window() {
        let a = Frame::new(2, 1, vec![0.0, 1.0]).unwrap();
        let b = Frame::new(2, 1, vec![1.0, 0.0]).unwrap();
        // means 0.5, variances 0.25, covariance -0.25
        let expected = ((0.5 + SSIM_C1) * (-0.5 + SSIM_C2)) / ((0.5 + SSIM_C1) * (0.5 + SSIM_C2));
        assert_abs_diff_eq!(ssim(&a, &b).unwrap(), expected, epsilon = 1e-12);
    }
}
