//! Velocity statistics from keypoint tracks and exact kernel changepoint
//! detection for keyframe discovery.

use crate::geom::{Pose, Vec3};
use crate::par::{map_range, Parallelism};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("no tracks supplied")]
    EmptyTrackSet,
    #[error("track {index} has {got} frames, expected {expected}")]
    LengthMismatch { index: usize, got: usize, expected: usize },
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("signal of length {len} is too short for {segments} segment(s) of at least {min_len} samples")]
    SignalTooShort { len: usize, segments: usize, min_len: usize },
    #[error("invalid changepoint configuration: {0}")]
    Config(String),
}

/// Whether depth (and hence 3-D keypoint tracks) was available.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaptureMode {
    Rgbd,
    Rgb,
}

impl CaptureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CaptureMode::Rgbd => "rgbd",
            CaptureMode::Rgb => "rgb",
        }
    }
}

/// One tracked keypoint over all `N` frames. Invisible frames hold the last
/// known position and are ignored by the statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct KeypointTrack {
    pub keypoint_id: u32,
    pub positions: Vec<Vec3>,
    pub visible: Vec<bool>,
}

impl KeypointTrack {
    /// Fully visible track.
    pub fn new(keypoint_id: u32, positions: Vec<Vec3>) -> Self {
        let visible = vec![true; positions.len()];
        Self { keypoint_id, positions, visible }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Per-frame 6-DOF pose of one object.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseTrack {
    pub object_id: String,
    pub poses: Vec<Pose>,
}

/// Mean keypoint speed per frame step, `N - 1` non-negative samples.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocitySignal(pub Vec<f64>);

impl VelocitySignal {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Pooled mean speed over all tracks visible at both ends of each step.
/// Steps where no track is visible repeat the previous sample.
pub fn velocity_signal(tracks: &[KeypointTrack]) -> Result<VelocitySignal, TrackError> {
    let first = tracks.first().ok_or(TrackError::EmptyTrackSet)?;
    let n = first.len();
    for (index, t) in tracks.iter().enumerate() {
        if t.positions.len() != n || t.visible.len() != n {
            return Err(TrackError::LengthMismatch { index, got: t.positions.len().min(t.visible.len()), expected: n });
        }
    }
    if n < 2 {
        return Err(TrackError::TooFewFrames(n));
    }
    let mut out = Vec::with_capacity(n - 1);
    let mut prev = 0.0;
    for step in 0..n - 1 {
        let (sum, count) = tracks
            .iter()
            .filter(|t| t.visible[step] && t.visible[step + 1])
            .fold((0.0, 0usize), |(s, c), t| (s + (t.positions[step + 1] - t.positions[step]).norm(), c + 1));
        let sample = if count == 0 { prev } else { sum / count as f64 };
        out.push(sample);
        prev = sample;
    }
    Ok(VelocitySignal(out))
}

/// How the number of breakpoints is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stopping {
    /// Pay `beta` per breakpoint; `None` picks `3 ln(N)` times the kernel
    /// dispersion of the whole signal.
    Penalty(Option<f64>),
    /// Exactly this many segments.
    Segments(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChangepointConfig {
    /// RBF bandwidth; `None` uses the median heuristic.
    pub gamma: Option<f64>,
    pub stopping: Stopping,
    pub min_segment_length: usize,
    pub parallelism: Parallelism,
}

impl Default for ChangepointConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            stopping: Stopping::Penalty(None),
            min_segment_length: 5,
            parallelism: Parallelism::default(),
        }
    }
}

impl ChangepointConfig {
    pub fn validate(&self) -> Result<(), TrackError> {
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(TrackError::Config(format!("gamma must be finite and > 0, got {g}")));
            }
        }
        match self.stopping {
            Stopping::Penalty(Some(b)) if !(b.is_finite() && b >= 0.0) => {
                Err(TrackError::Config(format!("penalty must be finite and >= 0, got {b}")))
            }
            Stopping::Segments(0) => Err(TrackError::Config("segment count must be >= 1".into())),
            _ if self.min_segment_length == 0 => Err(TrackError::Config("min_segment_length must be >= 1".into())),
            _ => Ok(()),
        }
    }
}

/// `1 / median` of the positive pairwise squared distances, or `None` for a
/// constant signal.
pub fn median_heuristic_gamma(signal: &[f64]) -> Option<f64> {
    let mut d2: Vec<f64> = Vec::with_capacity(signal.len() * signal.len() / 2);
    for i in 0..signal.len() {
        for j in i + 1..signal.len() {
            let d = (signal[i] - signal[j]).powi(2);
            if d > 0.0 {
                d2.push(d);
            }
        }
    }
    if d2.is_empty() {
        return None;
    }
    let mid = d2.len() / 2;
    let (_, m, _) = d2.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    Some(1.0 / *m)
}

/// Segment costs of the RBF-kernel dispersion via 2-D prefix sums of the
/// Gram matrix.
pub struct KernelCost {
    n: usize,
    prefix: Vec<f64>,
}

impl KernelCost {
    pub fn new(signal: &[f64], gamma: f64, par: Parallelism) -> Self {
        let n = signal.len();
        let w = n + 1;
        // row i of the prefix table: sums over s < i, t < j
        let rows: Vec<Vec<f64>> = map_range(par, n, |s| {
            let mut acc = 0.0;
            let mut row = Vec::with_capacity(w);
            row.push(0.0);
            for t in 0..n {
                acc += (-gamma * (signal[s] - signal[t]).powi(2)).exp();
                row.push(acc);
            }
            row
        });
        let mut prefix = vec![0.0; w * w];
        for i in 1..w {
            for j in 0..w {
                prefix[i * w + j] = prefix[(i - 1) * w + j] + rows[i - 1][j];
            }
        }
        Self { n, prefix }
    }

    fn block(&self, a: usize, b: usize) -> f64 {
        let w = self.n + 1;
        self.prefix[b * w + b] - self.prefix[a * w + b] - self.prefix[b * w + a] + self.prefix[a * w + a]
    }

    /// Cost of samples `a..b` (exclusive end).
    pub fn cost(&self, a: usize, b: usize) -> f64 {
        let len = (b - a) as f64;
        (len - self.block(a, b) / len).max(0.0)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Segmentation returned by [`kernel_changepoint`].
#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation {
    /// Start index of every segment after the first, increasing.
    pub breakpoints: Vec<usize>,
    /// Sum of segment costs, excluding penalties.
    pub cost: f64,
    pub gamma: f64,
    /// Penalty per breakpoint actually used (0 in fixed-count mode).
    pub penalty: f64,
}

/// Exact optimal segmentation of `signal` under the RBF kernel cost.
pub fn kernel_changepoint(signal: &[f64], cfg: &ChangepointConfig) -> Result<Segmentation, TrackError> {
    cfg.validate()?;
    let n = signal.len();
    let m = cfg.min_segment_length;
    let segments_needed = match cfg.stopping {
        Stopping::Segments(k) => k,
        Stopping::Penalty(_) => 2,
    };
    if n < segments_needed * m || n < 2 * m {
        return Err(TrackError::SignalTooShort { len: n, segments: segments_needed, min_len: m });
    }
    let gamma = match cfg.gamma.or_else(|| median_heuristic_gamma(signal)) {
        Some(g) => g,
        None => {
            // constant signal: every segmentation of it costs nothing
            let breakpoints = match cfg.stopping {
                Stopping::Segments(k) => even_split(n, k),
                Stopping::Penalty(_) => Vec::new(),
            };
            return Ok(Segmentation { breakpoints, cost: 0.0, gamma: 1.0, penalty: 0.0 });
        }
    };
    let costs = KernelCost::new(signal, gamma, cfg.parallelism);
    match cfg.stopping {
        Stopping::Penalty(beta) => {
            let beta = beta.unwrap_or_else(|| default_penalty(&costs));
            let (breakpoints, cost) = penalized_dp(&costs, m, beta, cfg.parallelism);
            Ok(Segmentation { breakpoints, cost, gamma, penalty: beta })
        }
        Stopping::Segments(k) => {
            let (breakpoints, cost) = fixed_count_dp(&costs, m, k, cfg.parallelism);
            Ok(Segmentation { breakpoints, cost, gamma, penalty: 0.0 })
        }
    }
}

/// `3 ln(N)` times the per-sample kernel dispersion of the full signal.
pub fn default_penalty(costs: &KernelCost) -> f64 {
    let n = costs.len();
    let dispersion = costs.cost(0, n) / n as f64;
    3.0 * (n as f64).ln() * dispersion + 1e-9
}

fn even_split(n: usize, k: usize) -> Vec<usize> {
    (1..k).map(|i| i * n / k).collect()
}

// Best predecessor for each end index; ties keep the smallest start.
fn argmin_start(prev: &[f64], costs: &KernelCost, end: usize, min_len: usize, extra: f64) -> (f64, usize) {
    let mut best = (f64::INFINITY, usize::MAX);
    for (s, &p) in prev.iter().enumerate().take(end.saturating_sub(min_len) + 1) {
        if !p.is_finite() {
            continue;
        }
        let v = p + costs.cost(s, end) + extra;
        if v < best.0 {
            best = (v, s);
        }
    }
    best
}

fn penalized_dp(costs: &KernelCost, min_len: usize, beta: f64, par: Parallelism) -> (Vec<usize>, f64) {
    let n = costs.len();
    let mut f = vec![f64::INFINITY; n + 1];
    let mut back = vec![usize::MAX; n + 1];
    f[0] = 0.0;
    // f[t] depends on every f[s < t]; parallelize the inner scan instead.
    for t in min_len..=n {
        let (v, s) = if par.is_parallel() && t > 512 {
            let chunk = 128;
            let nchunks = (t - min_len + 1).div_ceil(chunk);
            let parts = map_range(par, nchunks, |c| {
                let lo = c * chunk;
                let hi = ((c + 1) * chunk).min(t - min_len + 1);
                let mut best = (f64::INFINITY, usize::MAX);
                for (s, &fs) in f.iter().enumerate().take(hi).skip(lo) {
                    if fs.is_finite() {
                        let v = fs + costs.cost(s, t) + beta;
                        if v < best.0 {
                            best = (v, s);
                        }
                    }
                }
                best
            });
            parts.into_iter().fold((f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 { b } else { a })
        } else {
            argmin_start(&f, costs, t, min_len, beta)
        };
        f[t] = v;
        back[t] = s;
    }
    let breakpoints = backtrack(&back, n);
    let cost = segments_cost(costs, &breakpoints);
    (breakpoints, cost)
}

fn fixed_count_dp(costs: &KernelCost, min_len: usize, k: usize, par: Parallelism) -> (Vec<usize>, f64) {
    let n = costs.len();
    let mut layer = vec![f64::INFINITY; n + 1];
    layer[0] = 0.0;
    let mut backs: Vec<Vec<usize>> = Vec::with_capacity(k);
    for _ in 0..k {
        let results = map_range(par, n + 1, |t| {
            if t < min_len {
                (f64::INFINITY, usize::MAX)
            } else {
                argmin_start(&layer, costs, t, min_len, 0.0)
            }
        });
        layer = results.iter().map(|r| r.0).collect();
        backs.push(results.iter().map(|r| r.1).collect());
    }
    let mut breakpoints = Vec::with_capacity(k.saturating_sub(1));
    let mut t = n;
    for back in backs.iter().rev() {
        let s = back[t];
        if s > 0 {
            breakpoints.push(s);
        }
        t = s;
    }
    breakpoints.reverse();
    let cost = segments_cost(costs, &breakpoints);
    (breakpoints, cost)
}

fn backtrack(back: &[usize], n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut t = n;
    while t > 0 {
        let s = back[t];
        if s > 0 {
            out.push(s);
        }
        t = s;
    }
    out.reverse();
    out
}

fn segments_cost(costs: &KernelCost, breakpoints: &[usize]) -> f64 {
    let mut bounds = Vec::with_capacity(breakpoints.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(breakpoints);
    bounds.push(costs.len());
    bounds.windows(2).map(|w| costs.cost(w[0], w[1])).sum()
}

/// Sorted keyframe indices including the first and last frame.
///
/// RGB captures use exactly the two end frames. RGB-D captures add the
/// changepoints of the pooled velocity signal; a signal too short to hold two
/// minimum-length segments yields only the end frames.
pub fn discover_keyframes(
    tracks: &[KeypointTrack],
    frame_count: usize,
    mode: CaptureMode,
    cfg: &ChangepointConfig,
) -> Result<Vec<usize>, TrackError> {
    if frame_count < 2 {
        return Err(TrackError::TooFewFrames(frame_count));
    }
    let last = frame_count - 1;
    if mode == CaptureMode::Rgb {
        return Ok(vec![0, last]);
    }
    let signal = velocity_signal(tracks)?;
    if signal.len() != last {
        return Err(TrackError::LengthMismatch { index: 0, got: signal.len() + 1, expected: frame_count });
    }
    let min_needed = match cfg.stopping {
        Stopping::Segments(k) => k.max(2),
        Stopping::Penalty(_) => 2,
    } * cfg.min_segment_length;
    let mut frames = vec![0];
    if signal.len() >= min_needed {
        let seg = kernel_changepoint(signal.as_slice(), cfg)?;
        frames.extend(seg.breakpoints.into_iter().filter(|&b| b > 0 && b < last));
    }
    frames.push(last);
    frames.dedup();
    Ok(frames)
}
