//! Result tables: tracks, per-frame statistics and the fundamental diagram.

use std::io::{Read, Write};
use std::str::FromStr;

use super::{fmt_num, fmt_opt, IoError};
use crate::fd::{FdBin, FdCurve};
use crate::model::{Direction, TrackRecord, TrackStatus};
use crate::stats::FrameStats;

pub const TRACKS_HEADER: [&str; 11] = [
    "track_id",
    "frame",
    "timestamp_s",
    "center_x",
    "center_y",
    "width",
    "height",
    "velocity_kmh",
    "direction",
    "observed",
    "status",
];

pub const FRAME_STATS_HEADER: [&str; 7] = [
    "frame",
    "timestamp_s",
    "vehicle_count",
    "density_veh_per_km",
    "mean_speed_kmh",
    "inflow",
    "outflow",
];

pub const FD_BINS_HEADER: [&str; 5] = ["bin_center", "density", "mean_speed_kmh", "sample_count", "flux"];

pub fn write_tracks<W: Write>(records: &[TrackRecord], out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACKS_HEADER)?;
    for r in records {
        w.write_record([
            r.track_id.to_string(),
            r.frame.to_string(),
            fmt_num(r.timestamp_s),
            fmt_num(r.center_x),
            fmt_num(r.center_y),
            fmt_num(r.width),
            fmt_num(r.height),
            fmt_opt(r.velocity_kmh),
            r.direction.map(|d| d.label().to_string()).unwrap_or_default(),
            r.observed.to_string(),
            r.status.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_frame_stats<W: Write>(stats: &[FrameStats], out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FRAME_STATS_HEADER)?;
    for s in stats {
        w.write_record([
            s.frame.to_string(),
            fmt_num(s.timestamp_s),
            s.vehicle_count.to_string(),
            fmt_num(s.density_veh_per_km),
            fmt_opt(s.mean_speed_kmh),
            s.inflow.to_string(),
            s.outflow.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fd_bins<W: Write>(curve: Option<&FdCurve>, out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FD_BINS_HEADER)?;
    for b in curve.map_or(&[][..], |c| &c.bins) {
        w.write_record([
            fmt_num(b.center),
            fmt_num(b.density),
            fmt_num(b.mean_speed),
            b.count.to_string(),
            fmt_num(b.flux),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Key/value table describing the fit and the critical density.
pub fn write_fd_fit<W: Write>(curve: Option<&FdCurve>, out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["key", "value"])?;
    if let Some(c) = curve {
        let mut rows: Vec<(&str, String)> = vec![
            ("model", c.fit.model.kind().as_str().into()),
            ("axis_mode", c.axis_mode.as_str().into()),
        ];
        match c.fit.model {
            crate::fd::SpeedModel::Greenshields { vf, slope } => {
                rows.push(("vf", fmt_num(vf)));
                rows.push(("slope", fmt_num(slope)));
                rows.push(("kj", c.fit.jam_density.map_or("unbounded".into(), fmt_num)));
            }
            crate::fd::SpeedModel::Quadratic { a, b, c } => {
                rows.push(("a", fmt_num(a)));
                rows.push(("b", fmt_num(b)));
                rows.push(("c", fmt_num(c)));
            }
        }
        rows.extend([
            ("residual_norm", fmt_num(c.fit.residual_norm)),
            ("critical_density", fmt_num(c.critical_density)),
            ("critical_range_low", fmt_num(c.critical_range.0)),
            ("critical_range_high", fmt_num(c.critical_range.1)),
            ("max_flux", fmt_num(c.max_flux)),
            ("interior_maximum", c.interior_maximum.to_string()),
            ("density_unit", c.axis_mode.density_unit().into()),
            ("flux_unit", c.flux_unit().into()),
        ]);
        for (k, v) in rows {
            w.write_record([k, v.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a table whose header must match `header` exactly.
fn read_table<R: Read, T>(
    input: R,
    header: &[&'static str],
    mut row: impl FnMut(&Cells) -> Result<T, IoError>,
) -> Result<Vec<T>, IoError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut out = Vec::new();
    let mut records = reader.records();
    match records.next() {
        None => return Ok(out),
        Some(first) => {
            let first = first?;
            if first.iter().ne(header.iter().copied()) {
                return Err(IoError::at(1, None, format!("expected header `{}`", header.join(","))));
            }
        }
    }
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(IoError::at(
                line,
                None,
                format!("expected {} columns, found {}", header.len(), rec.len()),
            ));
        }
        out.push(row(&Cells { rec, line, header })?);
    }
    Ok(out)
}

struct Cells<'a> {
    rec: csv::StringRecord,
    line: u64,
    header: &'a [&'static str],
}

impl Cells<'_> {
    fn get<T: FromStr>(&self, idx: usize) -> Result<T, IoError> {
        let raw = &self.rec[idx];
        raw.parse()
            .map_err(|_| IoError::at(self.line, Some(self.header[idx]), format!("cannot parse `{raw}`")))
    }

    fn opt(&self, idx: usize) -> Result<Option<f64>, IoError> {
        if self.rec[idx].is_empty() {
            Ok(None)
        } else {
            self.get(idx).map(Some)
        }
    }
}

pub fn read_tracks<R: Read>(input: R) -> Result<Vec<TrackRecord>, IoError> {
    read_table(input, &TRACKS_HEADER, |c| {
        let direction = match &c.rec[8] {
            "" => None,
            s => Some(Direction::from_str(s).map_err(|e| IoError::at(c.line, Some("direction"), e))?),
        };
        Ok(TrackRecord {
            track_id: c.get(0)?,
            frame: c.get(1)?,
            timestamp_s: c.get(2)?,
            center_x: c.get(3)?,
            center_y: c.get(4)?,
            width: c.get(5)?,
            height: c.get(6)?,
            velocity_kmh: c.opt(7)?,
            direction,
            observed: c.get(9)?,
            status: TrackStatus::from_str(&c.rec[10]).map_err(|e| IoError::at(c.line, Some("status"), e))?,
        })
    })
}

pub fn read_frame_stats<R: Read>(input: R) -> Result<Vec<FrameStats>, IoError> {
    read_table(input, &FRAME_STATS_HEADER, |c| {
        Ok(FrameStats {
            frame: c.get(0)?,
            timestamp_s: c.get(1)?,
            vehicle_count: c.get(2)?,
            density_veh_per_km: c.get(3)?,
            mean_speed_kmh: c.opt(4)?,
            inflow: c.get(5)?,
            outflow: c.get(6)?,
        })
    })
}

pub fn read_fd_bins<R: Read>(input: R) -> Result<Vec<FdBin>, IoError> {
    read_table(input, &FD_BINS_HEADER, |c| {
        Ok(FdBin {
            center: c.get(0)?,
            density: c.get(1)?,
            mean_speed: c.get(2)?,
            count: c.get(3)?,
            flux: c.get(4)?,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::{fit_speed_density, fundamental_diagram, AxisMode, FdBin, FitModel};
    use proptest::prelude::*;

    fn canonical(x: f64) -> f64 {
        fmt_num(x).parse().unwrap()
    }

    #[test]
    fn empty_tables_have_headers_only() {
        let mut buf = Vec::new();
        write_tracks(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), TRACKS_HEADER.join(",") + "\n");
        let mut buf = Vec::new();
        write_frame_stats(&[], &mut buf).unwrap();
        assert_eq!(read_frame_stats(&buf[..]).unwrap(), vec![]);
        let mut buf = Vec::new();
        write_fd_fit(None, &mut buf).unwrap();
        assert_eq!(buf, b"key,value\n");
    }

    #[test]
    fn wrong_header_is_rejected() {
        let e = read_frame_stats("frame,when\n1,2\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn bin_flux_reads_back_as_product() {
        let bins: Vec<FdBin> = (0..12)
            .map(|i| {
                let k = 3.3 + 7.1 * i as f64;
                let v = 97.0 * (1.0 - k / 103.0);
                FdBin {
                    center: k,
                    density: k,
                    mean_speed: v,
                    count: 5 + i,
                    flux: k * v,
                }
            })
            .collect();
        let fit = fit_speed_density(&bins, FitModel::Greenshields).unwrap();
        let curve = fundamental_diagram(&bins, &fit, 5.0, AxisMode::Density).unwrap();
        let mut buf = Vec::new();
        write_fd_bins(Some(&curve), &mut buf).unwrap();
        let rows = read_fd_bins(&buf[..]).unwrap();
        assert_eq!(rows.len(), 12);
        for FdBin { density: k, mean_speed: v, flux: q, .. } in rows {
            // Each printed value carries up to 5e-6 relative rounding.
            assert!((q - k * v).abs() <= 2e-5 * q.abs(), "{q} vs {}", k * v);
        }
    }

    #[test]
    fn fit_table_lists_parameters() {
        let bins: Vec<FdBin> = [10.0, 20.0, 30.0]
            .iter()
            .map(|&k| FdBin {
                center: k,
                density: k,
                mean_speed: 100.0 - k,
                count: 5,
                flux: k * (100.0 - k),
            })
            .collect();
        let fit = fit_speed_density(&bins, FitModel::Greenshields).unwrap();
        let curve = fundamental_diagram(&bins, &fit, 5.0, AxisMode::Density).unwrap();
        let mut buf = Vec::new();
        write_fd_fit(Some(&curve), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("model,greenshields\n"));
        assert!(text.contains("vf,100\n"));
        assert!(text.contains("kj,100\n"));
        assert!(text.contains("critical_density,30\n"));
        assert!(text.contains("interior_maximum,false\n"));
        assert!(text.contains("flux_unit,veh/h\n"));
    }

    fn status() -> impl Strategy<Value = TrackStatus> {
        prop_oneof![
            Just(TrackStatus::Tentative),
            Just(TrackStatus::Active),
            Just(TrackStatus::Coasting),
            Just(TrackStatus::Removed)
        ]
    }

    proptest! {
        #[test]
        fn frame_stats_round_trip(
            raw in proptest::collection::vec((0u64..10_000, 0u32..40, 0.0f64..300.0, proptest::option::of(0.0f64..150.0), 0u32..4, 0u32..4), 0..30)
        ) {
            let stats: Vec<FrameStats> = raw
                .into_iter()
                .map(|(frame, n, k, v, i, o)| FrameStats {
                    frame,
                    timestamp_s: canonical(frame as f64 / 25.0),
                    vehicle_count: n,
                    density_veh_per_km: canonical(k),
                    mean_speed_kmh: v.map(canonical),
                    inflow: i,
                    outflow: o,
                })
                .collect();
            let mut buf = Vec::new();
            write_frame_stats(&stats, &mut buf).unwrap();
            prop_assert_eq!(read_frame_stats(&buf[..]).unwrap(), stats);
        }

        #[test]
        fn tracks_round_trip(
            raw in proptest::collection::vec(
                (0u64..500, 0u64..10_000, -100.0f64..4000.0, -100.0f64..2200.0, 1.0f64..200.0, 1.0f64..100.0,
                 proptest::option::of(0.0f64..150.0), proptest::option::of(0usize..8), any::<bool>(), status()),
                0..30)
        ) {
            let recs: Vec<TrackRecord> = raw
                .into_iter()
                .map(|(id, frame, x, y, w, h, v, d, observed, status)| TrackRecord {
                    track_id: id,
                    frame,
                    timestamp_s: canonical(frame as f64 / 25.0),
                    center_x: canonical(x),
                    center_y: canonical(y),
                    width: canonical(w),
                    height: canonical(h),
                    velocity_kmh: v.map(canonical),
                    direction: d.map(|i| Direction::SECTORS[i]),
                    observed,
                    status,
                })
                .collect();
            let mut buf = Vec::new();
            write_tracks(&recs, &mut buf).unwrap();
            prop_assert_eq!(read_tracks(&buf[..]).unwrap(), recs);
        }
    }
}
