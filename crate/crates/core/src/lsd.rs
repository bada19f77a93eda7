//! Lightweight stagnation detection.
//!
//! Two independent detectors decide when an episode has stopped making
//! progress:
//!
//! * [`StaticDetector`] compares consecutive normalized scans by cosine
//!   similarity. Each comparison above `alpha` increments a run counter, any
//!   other comparison resets it; the flag is raised once the counter reaches
//!   `omega`. It catches motion failure (wheel slip, pushing against an
//!   obstacle) without odometry. By default the scans are mean-centered
//!   before comparison: range vectors are all positive, so their plain cosine
//!   stays above 0.99 for ordinary 0.1 m steps and the flag would end every
//!   episode after `omega` steps. Centering keeps a frozen robot at exactly 1
//!   while ordinary motion drops well below `alpha`.
//! * [`StagnationDetector`] watches the map expansion rate `ċ = Δc/Δt`. It
//!   fires when every sample in the trailing window `[t - T, t]` is below the
//!   adaptive threshold `ε = β·A_env/T_max` while a nonzero speed is being
//!   commanded, so deliberate pauses are never flagged.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::NormalizedScan;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsdConfig {
    /// Similarity threshold α.
    pub alpha: f64,
    /// Continuity threshold Ω (comparisons).
    pub omega: u32,
    /// Stagnation window T, seconds.
    pub window_t: f64,
    /// Empirical coefficient β of the adaptive threshold.
    pub beta: f64,
    #[serde(default)]
    pub comparison: ScanComparison,
}

/// What the static detector feeds to [`cosine_similarity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScanComparison {
    /// The normalized scans as they are.
    Raw,
    /// The normalized scans minus their means (Pearson correlation).
    #[default]
    Centered,
}

impl Default for LsdConfig {
    fn default() -> Self {
        Self {
            alpha: 0.98,
            omega: 10,
            window_t: 20.0,
            beta: 0.05,
            comparison: ScanComparison::Centered,
        }
    }
}

/// `⟨a, b⟩ / (‖a‖·‖b‖)`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Precondition(format!(
            "scan lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("cosine similarity of a zero vector".into()));
    }
    Ok(dot / (na * nb))
}

/// Similarity of two scans under `mode`. A centered scan with no spread
/// (every beam equal, e.g. nothing in range) carries no shape; such pairs
/// fall back to the raw cosine.
pub fn scan_similarity(a: &[f64], b: &[f64], mode: ScanComparison) -> Result<f64> {
    if mode == ScanComparison::Raw || a.len() != b.len() || a.is_empty() {
        return cosine_similarity(a, b);
    }
    let center = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| x - m).collect::<Vec<f64>>()
    };
    let (ca, cb) = (center(a), center(b));
    let spread = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if spread(&ca) < 1e-9 || spread(&cb) < 1e-9 {
        return cosine_similarity(a, b);
    }
    cosine_similarity(&ca, &cb)
}

/// `ε = β · A_env / T_max`.
pub fn compute_epsilon(a_env: f64, t_max: f64, beta: f64) -> Result<f64> {
    if !(a_env > 0.0 && t_max > 0.0 && beta > 0.0) {
        return Err(Error::Domain(format!(
            "epsilon needs positive inputs (A_env={a_env}, T_max={t_max}, beta={beta})"
        )));
    }
    Ok(beta * a_env / t_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticDetector {
    alpha: f64,
    omega: u32,
    comparison: ScanComparison,
    counter: u32,
    prev: Option<NormalizedScan>,
    last_similarity: Option<f64>,
}

impl StaticDetector {
    /// Detector comparing the scans as given.
    pub fn new(alpha: f64, omega: u32) -> Self {
        Self::with_comparison(alpha, omega, ScanComparison::Raw)
    }

    pub fn with_comparison(alpha: f64, omega: u32, comparison: ScanComparison) -> Self {
        assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
        assert!(omega > 0, "omega must be positive");
        Self {
            alpha,
            omega,
            comparison,
            counter: 0,
            prev: None,
            last_similarity: None,
        }
    }

    pub fn from_config(cfg: &LsdConfig) -> Self {
        Self::with_comparison(cfg.alpha, cfg.omega, cfg.comparison)
    }

    pub fn counter(&self) -> u32 {
        self.counter
    }

    pub fn flag(&self) -> bool {
        self.counter >= self.omega
    }

    pub fn last_similarity(&self) -> Option<f64> {
        self.last_similarity
    }

    pub fn reset(&mut self) {
        self.counter = 0;
        self.prev = None;
        self.last_similarity = None;
    }

    /// Feeds the newest scan and returns the static flag. The first scan only
    /// primes the detector.
    pub fn update(&mut self, scan: &NormalizedScan) -> Result<bool> {
        if let Some(prev) = &self.prev {
            let sim = scan_similarity(&scan.values, &prev.values, self.comparison)?;
            self.last_similarity = Some(sim);
            if sim > self.alpha {
                self.counter += 1;
            } else {
                self.counter = 0;
            }
        }
        self.prev = Some(scan.clone());
        Ok(self.flag())
    }
}

/// Summary of the samples currently inside the stagnation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub samples: usize,
    pub max_rate: f64,
    pub mean_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StagnationDetector {
    epsilon: f64,
    window_t: f64,
    start: f64,
    last_time: Option<f64>,
    history: VecDeque<(f64, f64)>,
}

impl StagnationDetector {
    /// `start` is the time from which history is considered to exist.
    pub fn new(epsilon: f64, window_t: f64, start: f64) -> Self {
        assert!(window_t > 0.0, "window must be positive");
        Self {
            epsilon,
            window_t,
            start,
            last_time: None,
            history: VecDeque::new(),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn window(&self) -> f64 {
        self.window_t
    }

    pub fn reset(&mut self, start: f64) {
        self.start = start;
        self.last_time = None;
        self.history.clear();
    }

    /// Records the expansion rate `c_dot` observed at time `now` and returns
    /// the stagnation state.
    pub fn update(&mut self, c_dot: f64, speed_cmd: f64, now: f64) -> Result<bool> {
        if let Some(last) = self.last_time {
            if now < last {
                return Err(Error::Precondition(format!(
                    "time went backwards ({now} < {last})"
                )));
            }
        }
        if now < self.start {
            return Err(Error::Precondition(format!(
                "sample at {now} precedes detector start {}",
                self.start
            )));
        }
        self.last_time = Some(now);
        self.history.push_back((now, c_dot));
        let lower = now - self.window_t - TIME_EPS;
        while self.history.front().is_some_and(|(t, _)| *t < lower) {
            self.history.pop_front();
        }
        let spanned = now - self.start >= self.window_t - TIME_EPS;
        let all_below = self.history.iter().all(|(_, r)| *r < self.epsilon);
        Ok(spanned && all_below && speed_cmd > 0.0)
    }

    pub fn window_stats(&self) -> WindowStats {
        let n = self.history.len();
        let max_rate = self
            .history
            .iter()
            .map(|(_, r)| *r)
            .fold(f64::NEG_INFINITY, f64::max);
        let mean_rate = if n == 0 {
            0.0
        } else {
            self.history.iter().map(|(_, r)| r).sum::<f64>() / n as f64
        };
        WindowStats {
            samples: n,
            max_rate: if n == 0 { 0.0 } else { max_rate },
            mean_rate,
        }
    }
}

/// One detector firing, as written to the JSONL event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DetectorEvent {
    Static {
        t: f64,
        counter: u32,
        similarity: f64,
    },
    Stagnation {
        t: f64,
        epsilon: f64,
        window_samples: usize,
        window_max_rate: f64,
        window_mean_rate: f64,
    },
}

impl DetectorEvent {
    pub fn time(&self) -> f64 {
        match self {
            DetectorEvent::Static { t, .. } | DetectorEvent::Stagnation { t, .. } => *t,
        }
    }
}

pub fn write_event_log(events: &[DetectorEvent], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for ev in events {
        let line = serde_json::to_string(ev)?;
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ns(v: &[f64]) -> NormalizedScan {
        NormalizedScan { values: v.to_vec() }
    }

    #[test]
    fn cosine_identity_and_orthogonal() {
        let a = [0.3, 0.7, 1.0, 0.2];
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let mut e0 = vec![0.0; 24];
        let mut e1 = vec![0.0; 24];
        e0[0] = 1.0;
        e1[1] = 1.0;
        assert_eq!(cosine_similarity(&e0, &e1).unwrap(), 0.0);
    }

    #[test]
    fn cosine_hand_computed() {
        let c = cosine_similarity(&[1.0, 1.0], &[1.0, 0.5]).unwrap();
        let oracle = 1.5 / (2f64.sqrt() * 1.25f64.sqrt());
        assert!((c - oracle).abs() < 1e-15);
        assert!((c - 0.94868).abs() < 1e-5);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(cosine_similarity(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn static_flag_on_eleventh_identical_scan() {
        let mut d = StaticDetector::new(0.98, 10);
        let s = ns(&[0.5; 24]);
        for k in 1..=11 {
            let flag = d.update(&s).unwrap();
            assert_eq!(flag, k == 11, "scan {k}");
        }
    }

    #[test]
    fn static_resets_on_change() {
        let mut d = StaticDetector::new(0.98, 10);
        let s = ns(&[0.5, 0.5, 0.5, 0.5]);
        let other = ns(&[1.0, 0.1, 1.0, 0.1]);
        for _ in 0..9 {
            d.update(&s).unwrap();
        }
        assert_eq!(d.counter(), 8);
        assert!(!d.update(&other).unwrap());
        assert_eq!(d.counter(), 0);
    }

    #[test]
    fn static_alternating_never_flags() {
        let mut d = StaticDetector::new(0.98, 10);
        let a = ns(&[0.5, 0.5, 0.5, 0.5]);
        let b = ns(&[1.0, 0.1, 1.0, 0.1]);
        for k in 0..50 {
            // pairs: a a b b a a ... gives one similar comparison per pair
            let s = if (k / 2) % 2 == 0 { &a } else { &b };
            assert!(!d.update(s).unwrap());
            assert!(d.counter() <= 1);
        }
    }

    #[test]
    fn centered_comparison() {
        let a = [0.2, 0.4, 0.9, 0.5];
        // a constant offset keeps the centered shape identical
        let b: Vec<f64> = a.iter().map(|x| x + 0.05).collect();
        let c = scan_similarity(&a, &b, ScanComparison::Centered).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        assert!(scan_similarity(&a, &b, ScanComparison::Raw).unwrap() < 1.0 - 1e-6);
        // featureless scans fall back to the raw cosine
        let flat = [1.0; 4];
        assert_eq!(scan_similarity(&flat, &flat, ScanComparison::Centered).unwrap(), 1.0);
        let s = scan_similarity(&flat, &a, ScanComparison::Centered).unwrap();
        assert_eq!(s, cosine_similarity(&flat, &a).unwrap());
    }

    #[test]
    fn centered_detector_flags_frozen_scans() {
        let mut d = StaticDetector::from_config(&LsdConfig::default());
        let scan = ns(&[0.3, 0.7, 1.0, 0.2, 0.5, 0.9]);
        let mut flags = vec![];
        for _ in 0..11 {
            flags.push(d.update(&scan).unwrap());
        }
        assert_eq!(flags.iter().position(|f| *f), Some(10));
    }

    #[test]
    fn epsilon_examples() {
        let e = compute_epsilon(45.0, 600.0, 0.05).unwrap();
        assert!((e - 0.00375).abs() < 1e-15);
        assert!(compute_epsilon(45.0, 600.0, 0.0).is_err());
        let e2 = compute_epsilon(90.0, 600.0, 0.05).unwrap();
        assert!((e2 - 2.0 * e).abs() < 1e-15);
    }

    #[test]
    fn stagnation_fires_at_window_end() {
        let mut d = StagnationDetector::new(0.00375, 20.0, 0.0);
        for k in 1..=40 {
            let t = k as f64 * 0.5;
            let s = d.update(0.0, 0.2, t).unwrap();
            assert_eq!(s, k == 40, "t = {t}");
        }
    }

    #[test]
    fn stagnation_velocity_gate() {
        let mut d = StagnationDetector::new(0.00375, 20.0, 0.0);
        for k in 1..=80 {
            assert!(!d.update(0.0, 0.0, k as f64 * 0.5).unwrap());
        }
    }

    #[test]
    fn stagnation_waits_for_clean_window() {
        let mut d = StagnationDetector::new(0.00375, 20.0, 0.0);
        let mut first = None;
        for k in 1..=100 {
            let t = k as f64 * 0.5;
            let rate = if k == 20 { 1.0 } else { 0.0 };
            if d.update(rate, 0.2, t).unwrap() && first.is_none() {
                first = Some(t);
            }
        }
        // the bad sample at t = 10 leaves the window just after t = 30
        assert_eq!(first, Some(30.5));
    }

    #[test]
    fn stagnation_rejects_time_regression() {
        let mut d = StagnationDetector::new(0.1, 20.0, 0.0);
        d.update(0.0, 0.2, 5.0).unwrap();
        assert!(matches!(d.update(0.0, 0.2, 4.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn event_log_is_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let events = vec![
            DetectorEvent::Static {
                t: 5.5,
                counter: 10,
                similarity: 1.0,
            },
            DetectorEvent::Stagnation {
                t: 20.0,
                epsilon: 0.001,
                window_samples: 41,
                window_max_rate: 0.0,
                window_mean_rate: 0.0,
            },
        ];
        write_event_log(&events, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(v["type"], "static");
        assert_eq!(v["t"], 5.5);
        let v: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(v["type"], "stagnation");
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            a in prop::collection::vec(0.01f64..1.0, 24),
            b in prop::collection::vec(0.01f64..1.0, 24),
            c in 0.01f64..100.0,
        ) {
            let ab = cosine_similarity(&a, &b).unwrap();
            let ba = cosine_similarity(&b, &a).unwrap();
            let ca: Vec<f64> = a.iter().map(|x| x * c).collect();
            let cab = cosine_similarity(&ca, &b).unwrap();
            prop_assert!((ab - ba).abs() < 1e-14);
            prop_assert!((ab - cab).abs() < 1e-12);
            prop_assert!(ab > 0.0 && ab <= 1.0 + 1e-12);
        }

        #[test]
        fn stagnation_never_before_window(rates in prop::collection::vec(0.0f64..1e-4, 1..39)) {
            let mut d = StagnationDetector::new(0.01, 20.0, 0.0);
            for (k, r) in rates.iter().enumerate() {
                prop_assert!(!d.update(*r, 0.2, (k + 1) as f64 * 0.5).unwrap());
            }
        }
    }
}
