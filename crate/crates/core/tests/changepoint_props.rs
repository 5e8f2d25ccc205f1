use oog_core::geom::Vec3;
use oog_core::par::Parallelism;
use oog_core::tracks::{
    discover_keyframes, kernel_changepoint, CaptureMode, ChangepointConfig, KeypointTrack, Stopping,
};
use proptest::prelude::*;

fn track(speeds: &[f64]) -> KeypointTrack {
    let mut x = 0.0;
    let mut positions = vec![Vec3::zeros()];
    for s in speeds {
        x += s;
        positions.push(Vec3::new(x, 0.0, 0.0));
    }
    KeypointTrack::new(0, positions)
}

proptest! {
    #[test]
    fn constant_tail_adds_no_breakpoints(level in 0.0..1.0f64, n in 10usize..60, tail in 1usize..30) {
        let cfg = ChangepointConfig::default();
        let base = kernel_changepoint(&vec![level; n], &cfg).unwrap();
        let longer = kernel_changepoint(&vec![level; n + tail], &cfg).unwrap();
        prop_assert!(base.breakpoints.is_empty() && longer.breakpoints.is_empty());
    }

    #[test]
    fn keyframes_increase_within_bounds(speeds in prop::collection::vec(0.0..0.02f64, 1..150)) {
        let n = speeds.len() + 1;
        let frames = discover_keyframes(&[track(&speeds)], n, CaptureMode::Rgbd, &ChangepointConfig::default()).unwrap();
        prop_assert_eq!(frames[0], 0);
        prop_assert_eq!(*frames.last().unwrap(), n - 1);
        prop_assert!(frames.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn segments_respect_minimum_length(
        signal in prop::collection::vec(0.0..1.0f64, 20..120),
        m in 1usize..8,
        k in 1usize..5,
    ) {
        prop_assume!(signal.len() >= k * m);
        let cfg = ChangepointConfig { stopping: Stopping::Segments(k), min_segment_length: m, ..Default::default() };
        let seg = kernel_changepoint(&signal, &cfg).unwrap();
        prop_assert_eq!(seg.breakpoints.len() + 1, k);
        let bounds: Vec<usize> = std::iter::once(0).chain(seg.breakpoints.iter().copied()).chain([signal.len()]).collect();
        prop_assert!(bounds.windows(2).all(|w| w[1] - w[0] >= m));
    }

    #[test]
    fn parallelism_does_not_change_result(signal in prop::collection::vec(0.0..1.0f64, 10..200)) {
        let run = |parallelism| kernel_changepoint(&signal, &ChangepointConfig { parallelism, ..Default::default() }).unwrap();
        prop_assert_eq!(run(Parallelism::Sequential), run(Parallelism::Parallel));
    }
}
