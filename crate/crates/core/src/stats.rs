//! Per-frame traffic statistics: vehicle count, density, mean speed and
//! directed counting-line crossings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TrackRecord;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("segment length must be positive, got {0} km")]
    NonPositiveSegment(f64),
    #[error("image extent must be positive, got {0} px")]
    NonPositiveExtent(f64),
    #[error("counting line `{0}` has identical endpoints")]
    DegenerateLine(String),
}

/// Which side of the directed line `p1 → p2` counts as inside.
///
/// Sides are taken from the sign of `(x2-x1)(y-y1) - (y2-y1)(x-x1)` on raw
/// image coordinates: `Left` is positive, `Right` negative. For a line drawn
/// from `(x, 0)` down to `(x, H)` the right side is the one with larger x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingLine {
    pub name: String,
    pub p1: (f64, f64),
    pub p2: (f64, f64),
    /// Crossing from the other side onto this one is an inflow.
    pub positive_side: Side,
}

fn cross(o: (f64, f64), a: (f64, f64), p: (f64, f64)) -> f64 {
    (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0)
}

impl CountingLine {
    pub fn new(name: impl Into<String>, p1: (f64, f64), p2: (f64, f64), positive_side: Side) -> Result<Self, StatsError> {
        let name = name.into();
        if p1 == p2 {
            return Err(StatsError::DegenerateLine(name));
        }
        Ok(Self {
            name,
            p1,
            p2,
            positive_side,
        })
    }

    /// Strictly on the positive side; points on the line are not.
    pub fn on_positive_side(&self, p: (f64, f64)) -> bool {
        let c = cross(self.p1, self.p2, p);
        match self.positive_side {
            Side::Left => c > 0.0,
            Side::Right => c < 0.0,
        }
    }

    /// +1 for an inflow, −1 for an outflow, 0 when the step `from → to`
    /// does not cross the line segment.
    pub fn crossing(&self, from: (f64, f64), to: (f64, f64)) -> i8 {
        let (a, b) = (self.on_positive_side(from), self.on_positive_side(to));
        if a == b {
            return 0;
        }
        // The segment's endpoints must straddle the motion step.
        let d1 = cross(from, to, self.p1);
        let d2 = cross(from, to, self.p2);
        if d1 * d2 > 0.0 {
            return 0;
        }
        if b {
            1
        } else {
            -1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub frame: u64,
    pub timestamp_s: f64,
    pub vehicle_count: u32,
    pub density_veh_per_km: f64,
    pub mean_speed_kmh: Option<f64>,
    pub inflow: u32,
    pub outflow: u32,
}

/// Statistics for one frame.
///
/// `records` are the rows emitted for this frame; only active and coasting
/// tracks count as vehicles. Crossings compare each track's center against
/// its position in `prev_positions`.
pub fn frame_stats(
    frame: u64,
    timestamp_s: f64,
    records: &[TrackRecord],
    segment_length_km: f64,
    lines: &[CountingLine],
    prev_positions: &BTreeMap<u64, (f64, f64)>,
) -> FrameStats {
    let vehicles: Vec<&TrackRecord> = records.iter().filter(|r| r.status.counts_as_vehicle()).collect();
    let speeds: Vec<f64> = vehicles.iter().filter_map(|r| r.velocity_kmh).collect();
    let mean_speed_kmh = (!speeds.is_empty()).then(|| speeds.iter().sum::<f64>() / speeds.len() as f64);

    let (mut inflow, mut outflow) = (0, 0);
    for r in records {
        let Some(&prev) = prev_positions.get(&r.track_id) else {
            continue;
        };
        for line in lines {
            match line.crossing(prev, r.center()) {
                1 => inflow += 1,
                -1 => outflow += 1,
                _ => {}
            }
        }
    }

    FrameStats {
        frame,
        timestamp_s,
        vehicle_count: vehicles.len() as u32,
        density_veh_per_km: vehicles.len() as f64 / segment_length_km,
        mean_speed_kmh,
        inflow,
        outflow,
    }
}

/// Records whose center lies strictly on the positive side of every line,
/// i.e. inside the region the lines enclose.
pub fn enclosed_count(records: &[TrackRecord], lines: &[CountingLine]) -> usize {
    records
        .iter()
        .filter(|r| lines.iter().all(|l| l.on_positive_side(r.center())))
        .count()
}

/// Road length covered by `extent_px` pixels at the given ground sample
/// distance.
pub fn segment_length_from_gsd(extent_px: f64, gsd_final: f64) -> Result<f64, StatsError> {
    if extent_px.is_nan() || extent_px <= 0.0 {
        return Err(StatsError::NonPositiveExtent(extent_px));
    }
    Ok(extent_px * gsd_final)
}

/// Consumes frames in order, carrying the previous track positions needed
/// for crossing detection.
#[derive(Debug, Clone)]
pub struct StatsAccumulator {
    segment_length_km: f64,
    lines: Vec<CountingLine>,
    prev: BTreeMap<u64, (f64, f64)>,
}

impl StatsAccumulator {
    pub fn new(segment_length_km: f64, lines: Vec<CountingLine>) -> Result<Self, StatsError> {
        if !(segment_length_km > 0.0 && segment_length_km.is_finite()) {
            return Err(StatsError::NonPositiveSegment(segment_length_km));
        }
        Ok(Self {
            segment_length_km,
            lines,
            prev: BTreeMap::new(),
        })
    }

    pub fn push_frame(&mut self, frame: u64, timestamp_s: f64, records: &[TrackRecord]) -> FrameStats {
        let stats = frame_stats(
            frame,
            timestamp_s,
            records,
            self.segment_length_km,
            &self.lines,
            &self.prev,
        );
        self.prev = records.iter().map(|r| (r.track_id, r.center())).collect();
        stats
    }
}

/// Frame statistics for a whole record stream, one row per frame in
/// `frame_range` (defaulting to the record extent). `fps` stamps frames
/// that carry no records.
pub fn compute_frame_stats(
    records: &[TrackRecord],
    segment_length_km: f64,
    lines: &[CountingLine],
    fps: f64,
    frame_range: Option<(u64, u64)>,
) -> Result<Vec<FrameStats>, StatsError> {
    let mut acc = StatsAccumulator::new(segment_length_km, lines.to_vec())?;
    let mut by_frame: BTreeMap<u64, Vec<TrackRecord>> = BTreeMap::new();
    for r in records {
        by_frame.entry(r.frame).or_default().push(r.clone());
    }
    let (first, last) = match frame_range {
        Some(range) => range,
        None => match (by_frame.keys().next(), by_frame.keys().next_back()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Ok(Vec::new()),
        },
    };
    let empty = Vec::new();
    Ok((first..=last)
        .map(|f| {
            let rows = by_frame.get(&f).unwrap_or(&empty);
            acc.push_frame(f, f as f64 / fps, rows)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrackStatus;
    use proptest::prelude::*;

    fn rec(id: u64, frame: u64, x: f64, y: f64, v: Option<f64>) -> TrackRecord {
        TrackRecord {
            track_id: id,
            frame,
            timestamp_s: frame as f64 / 25.0,
            center_x: x,
            center_y: y,
            width: 40.0,
            height: 20.0,
            velocity_kmh: v,
            direction: None,
            observed: true,
            status: TrackStatus::Active,
        }
    }

    fn vertical_line() -> CountingLine {
        CountingLine::new("mid", (50.0, 0.0), (50.0, 100.0), Side::Right).unwrap()
    }

    #[test]
    fn density_of_a_long_segment() {
        let records: Vec<_> = (0..13).map(|i| rec(i, 0, i as f64 * 10.0, 0.0, Some(50.0))).collect();
        let s = frame_stats(0, 0.0, &records, 0.13, &[], &BTreeMap::new());
        assert_eq!(s.vehicle_count, 13);
        assert!((s.density_veh_per_km - 100.0).abs() < 1e-9);
        assert_eq!(s.mean_speed_kmh, Some(50.0));
    }

    #[test]
    fn empty_frame() {
        let s = frame_stats(3, 0.12, &[], 0.13, &[], &BTreeMap::new());
        assert_eq!((s.vehicle_count, s.density_veh_per_km, s.mean_speed_kmh), (0, 0.0, None));
    }

    #[test]
    fn tentative_tracks_are_not_vehicles() {
        let mut r = rec(0, 0, 0.0, 0.0, Some(30.0));
        r.status = TrackStatus::Tentative;
        let mut c = rec(1, 0, 0.0, 0.0, Some(10.0));
        c.status = TrackStatus::Coasting;
        let s = frame_stats(0, 0.0, &[r, c], 1.0, &[], &BTreeMap::new());
        assert_eq!(s.vehicle_count, 1);
        assert_eq!(s.mean_speed_kmh, Some(10.0));
    }

    #[test]
    fn crossing_direction() {
        let line = vertical_line();
        // Sign-test oracle on raw coordinates.
        let side = |p: (f64, f64)| (50.0 - 50.0) * (p.1 - 0.0) - (100.0 - 0.0) * (p.0 - 50.0);
        assert!(side((40.0, 50.0)) > 0.0 && side((60.0, 50.0)) < 0.0);

        let prev = BTreeMap::from([(7, (40.0, 50.0))]);
        let s = frame_stats(1, 0.0, &[rec(7, 1, 60.0, 50.0, None)], 1.0, std::slice::from_ref(&line), &prev);
        assert_eq!((s.inflow, s.outflow), (1, 0));

        let prev = BTreeMap::from([(7, (60.0, 50.0))]);
        let s = frame_stats(1, 0.0, &[rec(7, 1, 40.0, 50.0, None)], 1.0, &[line], &prev);
        assert_eq!((s.inflow, s.outflow), (0, 1));
    }

    #[test]
    fn crossing_outside_segment_extent_is_ignored() {
        let line = vertical_line();
        assert_eq!(line.crossing((40.0, 150.0), (60.0, 150.0)), 0);
        assert_eq!(line.crossing((40.0, 50.0), (60.0, 50.0)), 1);
    }

    #[test]
    fn segment_length() {
        assert!((segment_length_from_gsd(3840.0, 3.4e-5).unwrap() - 0.13056).abs() < 1e-12);
        assert!(segment_length_from_gsd(0.0, 3.4e-5).is_err());
        assert_eq!(
            segment_length_from_gsd(200.0, 1e-5).unwrap(),
            2.0 * segment_length_from_gsd(100.0, 1e-5).unwrap()
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(StatsAccumulator::new(0.0, vec![]).is_err());
        assert!(CountingLine::new("x", (1.0, 1.0), (1.0, 1.0), Side::Left).is_err());
    }

    proptest! {
        #[test]
        fn identical_speeds_average_exactly(n in 1usize..40, v in 0.0f64..150.0) {
            let records: Vec<_> = (0..n).map(|i| rec(i as u64, 0, 0.0, 0.0, Some(v))).collect();
            let s = frame_stats(0, 0.0, &records, 1.0, &[], &BTreeMap::new());
            prop_assert!((s.mean_speed_kmh.unwrap() - v).abs() < 1e-9);
        }

        #[test]
        fn density_ignores_ids(ids in proptest::collection::btree_set(0u64..1000, 0..20), shift in 1u64..500) {
            let a: Vec<_> = ids.iter().map(|&i| rec(i, 0, 1.0, 1.0, None)).collect();
            let b: Vec<_> = ids.iter().map(|&i| rec(i + shift, 0, 1.0, 1.0, None)).collect();
            let sa = frame_stats(0, 0.0, &a, 0.2, &[], &BTreeMap::new());
            let sb = frame_stats(0, 0.0, &b, 0.2, &[], &BTreeMap::new());
            prop_assert_eq!(sa.density_veh_per_km, sb.density_veh_per_km);
        }

        /// Random walks between two gates: net crossings equal the change in
        /// the number of walkers between them.
        #[test]
        fn flow_is_conserved(walks in proptest::collection::vec(
            (0.0f64..200.0, proptest::collection::vec(-15.0f64..15.0, 1..40)), 1..8)
        ) {
            let lines = vec![
                CountingLine::new("west", (50.0, -1e3), (50.0, 1e3), Side::Right).unwrap(),
                CountingLine::new("east", (150.0, -1e3), (150.0, 1e3), Side::Left).unwrap(),
            ];
            let inside = |x: f64| lines.iter().all(|l| l.on_positive_side((x, 0.0)));
            let frames = walks.iter().map(|w| w.1.len()).max().unwrap() + 1;
            let mut records = Vec::new();
            for (id, (x0, steps)) in walks.iter().enumerate() {
                let mut x = *x0;
                records.push(rec(id as u64, 0, x, 0.0, None));
                for (f, dx) in steps.iter().enumerate() {
                    x += dx;
                    records.push(rec(id as u64, f as u64 + 1, x, 0.0, None));
                }
            }
            let stats = compute_frame_stats(&records, 1.0, &lines, 25.0, Some((0, frames as u64))).unwrap();
            let net: i64 = stats.iter().map(|s| s.inflow as i64 - s.outflow as i64).sum();
            // Walkers that stop early vanish, so compare each walker's own
            // first and last position.
            let mut expected = 0i64;
            for id in 0..walks.len() as u64 {
                let first = records.iter().find(|r| r.track_id == id).unwrap();
                let last = records.iter().rev().find(|r| r.track_id == id).unwrap();
                expected += inside(last.center_x) as i64 - inside(first.center_x) as i64;
            }
            prop_assert_eq!(net, expected);
        }
    }
}
