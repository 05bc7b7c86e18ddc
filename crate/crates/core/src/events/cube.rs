use crate::error::{Error, Result};
use crate::events::frames::FrameSequence;
use crate::events::stream::EventStream;
use crate::events::trajectory::Trajectory;

/// Time-compressed event datacube: polarities of `k` consecutive events summed
/// per pixel into one bin, stamped with the mean time of its events.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedCube {
    width: usize,
    height: usize,
    compression: usize,
    bin_times: Vec<f64>,
    // bins * (height * width), bin-major
    values: Vec<i32>,
}

/// Builds the compressed cube. The final partial group forms its own bin.
/// A group whose mean time equals the previous bin's time (all events share
/// one timestamp) is folded into that bin, keeping bin times strictly
/// increasing.
pub fn build_compressed_cube(stream: &EventStream, k: usize) -> Result<CompressedCube> {
    if k == 0 {
        return Err(Error::Parameter("compression factor k must be >= 1".into()));
    }
    let (width, height) = (stream.width(), stream.height());
    let npix = width * height;
    let events = stream.events();

    let mut bin_times: Vec<f64> = Vec::with_capacity(events.len() / k + 1);
    let mut group_bin: Vec<usize> = Vec::with_capacity(events.len() / k + 1);
    for group in events.chunks(k) {
        let mean = group.iter().map(|e| e.t).sum::<f64>() / group.len() as f64;
        match bin_times.last() {
            Some(&last) if mean <= last => {}
            _ => bin_times.push(mean),
        }
        group_bin.push(bin_times.len() - 1);
    }

    let mut values = vec![0i32; bin_times.len() * npix];
    for (g, group) in events.chunks(k).enumerate() {
        let base = group_bin[g] * npix;
        for e in group {
            values[base + e.y * width + e.x] += e.p.sign();
        }
    }

    Ok(CompressedCube {
        width,
        height,
        compression: k,
        bin_times,
        values,
    })
}

impl CompressedCube {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn compression_factor(&self) -> usize {
        self.compression
    }

    pub fn num_bins(&self) -> usize {
        self.bin_times.len()
    }

    pub fn bin_times(&self) -> &[f64] {
        &self.bin_times
    }

    pub fn value(&self, bin: usize, x: usize, y: usize) -> i32 {
        self.values[bin * self.width * self.height + y * self.width + x]
    }

    /// Per-bin signed polarity sums at one pixel.
    pub fn pixel_bins(&self, x: usize, y: usize) -> Vec<i32> {
        let npix = self.width * self.height;
        let offset = y * self.width + x;
        (0..self.num_bins())
            .map(|b| self.values[b * npix + offset])
            .collect()
    }

    /// True iff some bin at `(x, y)` is nonzero.
    pub fn has_events(&self, x: usize, y: usize) -> bool {
        let npix = self.width * self.height;
        let offset = y * self.width + x;
        (0..self.num_bins()).any(|b| self.values[b * npix + offset] != 0)
    }

    /// Signed polarity sum of bins with `start < tau <= end`.
    pub fn event_sum_between(&self, x: usize, y: usize, start: f64, end: f64) -> f64 {
        let bins = self.pixel_bins(x, y);
        self.bin_times
            .iter()
            .zip(&bins)
            .filter(|(&t, _)| t > start && t <= end)
            .map(|(_, &v)| v as f64)
            .sum()
    }

    /// Samples `E(tau) = integral from t_ref to tau` of the pixel's event
    /// signal over `[start, end]`. Sample points are the interval ends, the
    /// reference time, and every bin time inside the interval. A bin at
    /// time `tau_b` counts for `tau >= tau_b` right of the reference and for
    /// `tau <= tau_b` left of it, so `E(t_ref) = 0`.
    pub fn trajectory(
        &self,
        x: usize,
        y: usize,
        start: f64,
        reference: f64,
        end: f64,
    ) -> Result<Trajectory> {
        if !(start < end) || reference < start || reference > end {
            return Err(Error::Parameter(format!(
                "reference time {reference} must lie in a non-empty interval [{start}, {end}]"
            )));
        }
        let bins = self.pixel_bins(x, y);
        let lo = self.bin_times.partition_point(|&t| t < start);
        let hi = self.bin_times.partition_point(|&t| t <= end);

        let mut times = Vec::with_capacity(hi - lo + 3);
        times.push(start);
        times.push(reference);
        times.push(end);
        times.extend_from_slice(&self.bin_times[lo..hi]);
        times.sort_by(f64::total_cmp);
        times.dedup();

        // cumulative[j] = sum of bins lo..lo+j
        let mut cumulative = Vec::with_capacity(hi - lo + 1);
        cumulative.push(0.0);
        for &v in &bins[lo..hi] {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + v as f64);
        }
        let window = &self.bin_times[lo..hi];
        // sum over bins with window time in [a_idx, b_idx)
        let range_sum = |a: usize, b: usize| cumulative[b] - cumulative[a];
        let at_ref = window.partition_point(|&t| t < reference);

        let values = times
            .iter()
            .map(|&tau| {
                if tau > reference {
                    // reference <= tau_b <= tau
                    let upto = window.partition_point(|&t| t <= tau);
                    range_sum(at_ref, upto)
                } else if tau < reference {
                    // tau <= tau_b < reference
                    let from = window.partition_point(|&t| t < tau);
                    -range_sum(from, at_ref)
                } else {
                    0.0
                }
            })
            .collect();
        Trajectory::new(times, values)
    }
}

/// Trajectory of pixel `(x, y)` over the exposure interval of frame `i`.
pub fn pixel_event_trajectory(
    cube: &CompressedCube,
    frames: &FrameSequence,
    x: usize,
    y: usize,
    i: usize,
) -> Result<Trajectory> {
    let (start, end) = frames.interval(i);
    cube.trajectory(x, y, start, frames.reference_time(i), end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::stream::{Event, Polarity};
    use proptest::prelude::*;

    fn pol(s: i32) -> Polarity {
        Polarity::from_sign(s).unwrap()
    }

    fn stream_at(pixel: (usize, usize), times: &[f64], signs: &[i32]) -> EventStream {
        let events = times
            .iter()
            .zip(signs)
            .map(|(&t, &s)| Event::new(t, pixel.0, pixel.1, pol(s)))
            .collect();
        EventStream::new(events, 4, 4).unwrap()
    }

    #[test]
    fn single_group_sums_signs() {
        let s = stream_at((1, 2), &[0.1, 0.2, 0.3, 0.4, 0.5], &[1, -1, 1, 1, -1]);
        let cube = build_compressed_cube(&s, 5).unwrap();
        assert_eq!(cube.num_bins(), 1);
        assert_eq!(cube.value(0, 1, 2), 1);
        assert!((cube.bin_times()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn pairs_of_events() {
        let s = stream_at((0, 0), &[0.1, 0.2, 0.3, 0.4], &[1, 1, -1, 1]);
        let cube = build_compressed_cube(&s, 2).unwrap();
        assert_eq!(cube.pixel_bins(0, 0), vec![2, 0]);
    }

    #[test]
    fn partial_final_group_is_kept() {
        let s = stream_at((0, 0), &[0.1, 0.2, 0.3], &[1, 1, 1]);
        let cube = build_compressed_cube(&s, 2).unwrap();
        assert_eq!(cube.pixel_bins(0, 0), vec![2, 1]);
    }

    #[test]
    fn bin_count_for_large_stream() {
        let events = (0..25_000)
            .map(|j| Event::new(j as f64 * 1e-5, j % 4, (j / 4) % 4, pol(1)))
            .collect();
        let s = EventStream::new(events, 4, 4).unwrap();
        assert_eq!(build_compressed_cube(&s, 200).unwrap().num_bins(), 125);
    }

    #[test]
    fn empty_stream_gives_empty_cube() {
        let cube = build_compressed_cube(&EventStream::empty(3, 3), 200).unwrap();
        assert_eq!(cube.num_bins(), 0);
        assert!(!cube.has_events(0, 0));
        let tr = cube.trajectory(0, 0, 0.0, 0.5, 1.0).unwrap();
        assert_eq!(tr.values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_k_rejected() {
        assert!(build_compressed_cube(&EventStream::empty(1, 1), 0).is_err());
    }

    #[test]
    fn simultaneous_groups_share_a_bin() {
        let s = stream_at((0, 0), &[0.5, 0.5, 0.5, 0.5, 0.7], &[1, 1, 1, -1, 1]);
        let cube = build_compressed_cube(&s, 2).unwrap();
        assert_eq!(cube.bin_times(), &[0.5, 0.7]);
        assert_eq!(cube.pixel_bins(0, 0), vec![2, 1]);
    }

    #[test]
    fn has_events_is_per_bin() {
        let s = stream_at((2, 2), &[0.1, 0.2], &[1, -1]);
        let cube = build_compressed_cube(&s, 1).unwrap();
        assert!(cube.has_events(2, 2));
        assert!(!cube.has_events(0, 0));
        let single = build_compressed_cube(&stream_at((2, 2), &[0.1], &[1]), 1).unwrap();
        assert!(single.has_events(2, 2));
    }

    #[test]
    fn step_after_reference() {
        let s = stream_at((0, 0), &[0.7, 0.7], &[1, 1]);
        let cube = build_compressed_cube(&s, 2).unwrap();
        let tr = cube.trajectory(0, 0, 0.0, 0.5, 1.0).unwrap();
        assert_eq!(tr.times(), &[0.0, 0.5, 0.7, 1.0]);
        assert_eq!(tr.values(), &[0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn bin_before_reference_is_negated() {
        let s = stream_at((0, 0), &[0.2], &[1]);
        let cube = build_compressed_cube(&s, 1).unwrap();
        let tr = cube.trajectory(0, 0, 0.0, 0.5, 1.0).unwrap();
        assert_eq!(tr.times(), &[0.0, 0.2, 0.5, 1.0]);
        assert_eq!(tr.values(), &[-1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn bins_outside_interval_ignored() {
        let s = stream_at((0, 0), &[0.05, 0.6, 2.0], &[1, -1, 1]);
        let cube = build_compressed_cube(&s, 1).unwrap();
        let tr = cube.trajectory(0, 0, 0.1, 0.5, 0.9).unwrap();
        assert_eq!(tr.times(), &[0.1, 0.5, 0.6, 0.9]);
        assert_eq!(tr.values(), &[0.0, 0.0, -1.0, -1.0]);
        assert_eq!(cube.event_sum_between(0, 0, 0.0, 1.0), 0.0);
        assert_eq!(cube.event_sum_between(0, 0, 0.5, 3.0), 0.0);
        assert_eq!(cube.event_sum_between(0, 0, 0.6, 3.0), 1.0);
    }

    /// Signed sum of raw polarities at a pixel, following the same
    /// orientation convention as the cube trajectory.
    fn brute_force_e(events: &[Event], x: usize, y: usize, reference: f64, tau: f64) -> f64 {
        events
            .iter()
            .filter(|e| e.x == x && e.y == y)
            .map(|e| {
                let s = e.p.sign() as f64;
                if tau > reference && e.t >= reference && e.t <= tau {
                    s
                } else if tau < reference && e.t >= tau && e.t < reference {
                    -s
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn arb_stream() -> impl Strategy<Value = EventStream> {
        prop::collection::vec((0u32..1000, 0usize..3, 0usize..3, prop::bool::ANY), 0..120).prop_map(
            |raw| {
                let events = raw
                    .into_iter()
                    .map(|(t, x, y, up)| {
                        Event::new(t as f64 * 1e-3, x, y, if up { Polarity::Positive } else { Polarity::Negative })
                    })
                    .collect();
                EventStream::new(events, 3, 3).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn bins_preserve_signed_mass(stream in arb_stream(), k in 1usize..40) {
            let cube = build_compressed_cube(&stream, k).unwrap();
            prop_assert!(cube.bin_times().windows(2).all(|w| w[0] < w[1]));
            for y in 0..3 {
                for x in 0..3 {
                    let raw: i32 = stream.events().iter()
                        .filter(|e| e.x == x && e.y == y)
                        .map(|e| e.p.sign()).sum();
                    let binned: i32 = cube.pixel_bins(x, y).iter().sum();
                    prop_assert_eq!(raw, binned);
                }
            }
        }

        #[test]
        fn unit_compression_matches_raw_cumulative_sum(
            stream in arb_stream(),
            a in 0.0f64..0.5,
            width in 0.05f64..0.6,
            frac in 0.0f64..1.0,
        ) {
            let cube = build_compressed_cube(&stream, 1).unwrap();
            let (start, end) = (a, a + width);
            let reference = start + frac * width;
            let tr = cube.trajectory(1, 1, start, reference, end).unwrap();
            prop_assert!(tr.times().windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(tr.times()[0], start);
            prop_assert_eq!(*tr.times().last().unwrap(), end);
            prop_assert!(tr.times().contains(&reference));
            for (&tau, &e) in tr.times().iter().zip(tr.values()) {
                prop_assert_eq!(e, brute_force_e(stream.events(), 1, 1, reference, tau));
            }
        }

        #[test]
        fn bin_count_close_to_ratio(n in 1usize..500, k in 1usize..50) {
            let events = (0..n).map(|j| Event::new(j as f64, 0, 0, Polarity::Positive)).collect();
            let s = EventStream::new(events, 1, 1).unwrap();
            let r = build_compressed_cube(&s, k).unwrap().num_bins() as f64;
            prop_assert!((r - n as f64 / k as f64).abs() <= 1.0);
        }
    }
}
