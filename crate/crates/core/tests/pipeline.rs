use aerofd_core::fd::{self, AxisMode, FdSettings};
use aerofd_core::io::{parse_detections, read_frame_stats, read_tracks, write_detections, write_frame_stats, write_tracks, DetectionRow};
use aerofd_core::sim::{generate, scenarios};
use aerofd_core::stats::{compute_frame_stats, CountingLine, Side};
use aerofd_core::tracker::{track_detections, Tracker};
use aerofd_core::TrackerConfig;

#[test]
fn files_carry_the_pipeline_without_losing_counts() {
    let mut sc = scenarios::standard_two_lane(9);
    sc.duration_frames = 400;
    let sim = generate(&sc).unwrap();

    let mut buf = Vec::new();
    let rows: Vec<DetectionRow> = sim.detections.iter().map(|d| DetectionRow::from_detection(d, -1)).collect();
    write_detections(&rows, &mut buf).unwrap();
    let parsed = parse_detections(buf.as_slice()).unwrap().detections();
    assert_eq!(parsed.len(), sim.detections.len());

    let range = Some((0, sc.duration_frames - 1));
    let mut tracker = Tracker::for_camera(TrackerConfig::default(), &sc.camera);
    let records = track_detections(&mut tracker, &parsed, range).unwrap();
    let lines = vec![CountingLine::new("west", (200.0, 0.0), (200.0, 2160.0), Side::Right).unwrap()];
    let stats = compute_frame_stats(&records, sc.segment_length_km(), &lines, 25.0, range).unwrap();

    let mut tbuf = Vec::new();
    write_tracks(&records, &mut tbuf).unwrap();
    let reread = read_tracks(tbuf.as_slice()).unwrap();
    assert_eq!(reread.len(), records.len());
    let again = compute_frame_stats(&reread, sc.segment_length_km(), &lines, 25.0, range).unwrap();
    for (a, b) in stats.iter().zip(&again) {
        assert_eq!((a.frame, a.vehicle_count, a.inflow, a.outflow), (b.frame, b.vehicle_count, b.inflow, b.outflow));
    }

    let mut sbuf = Vec::new();
    write_frame_stats(&stats, &mut sbuf).unwrap();
    let loaded = read_frame_stats(sbuf.as_slice()).unwrap();
    assert_eq!(loaded.len(), 400);
    for (a, b) in stats.iter().zip(&loaded) {
        assert!((a.density_veh_per_km - b.density_veh_per_km).abs() <= 1e-5 * a.density_veh_per_km.max(1.0));
    }
    assert!(stats.iter().map(|s| s.inflow).sum::<u32>() > 0);
}

#[test]
fn a_congested_ramp_yields_an_interior_maximum() {
    let sc = scenarios::fd_ramp(3);
    let sim = generate(&sc).unwrap();
    let range = Some((0, sc.duration_frames - 1));
    let mut tracker = Tracker::for_camera(TrackerConfig::default(), &sc.camera);
    let records = track_detections(&mut tracker, &sim.detections, range).unwrap();
    let stats = compute_frame_stats(&records, sc.segment_length_km(), &[], 25.0, range).unwrap();
    let samples = fd::samples_from_stats(&stats, AxisMode::Density);
    let curve = fd::build_curve(&samples, &FdSettings::default()).unwrap();
    assert!(curve.interior_maximum);
    assert!(curve.critical_density > 30.0 && curve.critical_density < 70.0, "{}", curve.critical_density);
}
