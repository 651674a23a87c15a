//! Wall-clock timing with a confidence-interval stopping rule.
//!
//! A run repeats SpMV until the two-sided Student-t interval for the mean
//! repetition time is narrower than a fixed fraction of the mean, bounded
//! by a minimum and maximum repetition count.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Barrier;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::kernel::run_part;
use super::placement::pin_current_thread;
use super::{partition, Format, Operand, PartitionScheme, Placement};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub min_reps: usize,
    pub max_reps: usize,
    pub confidence: f64,
    /// Stop once `(upper - lower) / mean` falls below this.
    pub max_rel_width: f64,
    /// Timer resolution in seconds; a mean under 100 ticks is flagged.
    pub tick: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            min_reps: 5,
            max_reps: 1000,
            confidence: 0.95,
            max_rel_width: 0.05,
            tick: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ConfidenceInterval {
    pub fn rel_width(&self) -> f64 {
        let width = self.upper - self.lower;
        if width == 0.0 {
            0.0
        } else {
            width / self.mean
        }
    }
}

/// Two-sided Student-t interval for the mean; `None` with fewer than two samples.
pub fn confidence_interval(samples: &[f64], confidence: f64) -> Option<ConfidenceInterval> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let dist = StudentsT::new(0.0, 1.0, nf - 1.0).expect("positive degrees of freedom");
    let t = dist.inverse_cdf(0.5 + confidence / 2.0);
    let half = t * (var / nf).sqrt();
    Some(ConfidenceInterval {
        mean,
        lower: mean - half,
        upper: mean + half,
    })
}

/// The stopping rule as a pure function of the samples gathered so far.
pub fn should_stop(samples: &[f64], cfg: &TimingConfig) -> bool {
    if samples.len() >= cfg.max_reps {
        return true;
    }
    if samples.len() < cfg.min_reps.max(2) {
        return false;
    }
    confidence_interval(samples, cfg.confidence)
        .is_some_and(|ci| ci.rel_width() < cfg.max_rel_width)
}

/// Source of per-repetition durations.
pub trait RepTimer {
    /// Runs `rep` once and returns its duration in seconds.
    fn time(&mut self, rep: &mut dyn FnMut()) -> f64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct WallTimer;

impl RepTimer for WallTimer {
    fn time(&mut self, rep: &mut dyn FnMut()) -> f64 {
        let start = Instant::now();
        rep();
        start.elapsed().as_secs_f64()
    }
}

/// Replays a fixed list of durations cyclically; the work still runs.
#[derive(Debug, Clone)]
pub struct ScriptedTimer {
    script: Vec<f64>,
    next: usize,
}

impl ScriptedTimer {
    pub fn new(script: Vec<f64>) -> Self {
        assert!(!script.is_empty(), "script needs at least one duration");
        ScriptedTimer { script, next: 0 }
    }
}

impl RepTimer for ScriptedTimer {
    fn time(&mut self, rep: &mut dyn FnMut()) -> f64 {
        rep();
        let d = self.script[self.next % self.script.len()];
        self.next += 1;
        d
    }
}

/// What to run.
#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub matrix: String,
    pub n_threads: usize,
    pub scheme: Option<PartitionScheme>,
    pub placement: Placement,
    /// Core count and core-group size used to resolve the placement.
    pub cores: usize,
    pub group_size: usize,
    pub timing: TimingConfig,
    /// Mean time of a 1-thread run of the same matrix and format.
    pub baseline: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub matrix: String,
    pub format: Format,
    pub scheme: PartitionScheme,
    pub n_threads: usize,
    pub placement: Placement,
    pub nnz: usize,
    pub repetitions: usize,
    pub times: Vec<f64>,
    pub mean_time: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub gflops: f64,
    pub speedup: Option<f64>,
    /// Threads were pinned to their placement cores.
    pub affinity_applied: bool,
    /// Mean time under 100 timer ticks.
    pub coarse_timer: bool,
}

/// Times SpMV on `op` with `spec.n_threads` pinned workers.
///
/// Workers each own one part of the plan. Every repetition is bracketed by
/// a pair of barriers and the timer spans exactly that pair.
pub fn run_benchmark(
    op: Operand<'_>,
    spec: &BenchSpec,
    timer: &mut dyn RepTimer,
) -> Result<RunRecord> {
    let scheme = spec.scheme.unwrap_or_else(|| op.default_scheme());
    let plan = partition(op, scheme, spec.n_threads)?;
    let cores = spec
        .placement
        .core_ids(spec.n_threads, spec.cores, spec.group_size)?;
    if spec.timing.min_reps == 0 || spec.timing.max_reps < spec.timing.min_reps {
        return Err(Error::InvalidParameter(
            "repetition bounds are inconsistent".into(),
        ));
    }

    let x: Vec<f64> = (0..op.n_cols())
        .map(|i| 1.0 + (i % 7) as f64 * 0.125)
        .collect();
    let barrier = Barrier::new(spec.n_threads + 1);
    let stop = AtomicBool::new(false);
    let mut samples = Vec::new();

    let pinned = std::thread::scope(|s| {
        let workers: Vec<_> = plan
            .parts
            .iter()
            .zip(&cores)
            .map(|(part, &core)| {
                let (barrier, stop, x) = (&barrier, &stop, &x);
                s.spawn(move || {
                    let pinned = pin_current_thread(core);
                    let mut buf = Vec::new();
                    loop {
                        barrier.wait();
                        if stop.load(Ordering::Acquire) {
                            break;
                        }
                        run_part(op, x, part, &mut buf);
                        std::hint::black_box(&buf);
                        barrier.wait();
                    }
                    pinned
                })
            })
            .collect();

        while !should_stop(&samples, &spec.timing) {
            let d = timer.time(&mut || {
                barrier.wait();
                barrier.wait();
            });
            samples.push(d);
        }
        stop.store(true, Ordering::Release);
        barrier.wait();
        workers
            .into_iter()
            .map(|w| w.join().expect("benchmark worker panicked"))
            .collect::<Vec<bool>>()
            .into_iter()
            .all(|p| p)
    });

    let ci = confidence_interval(&samples, spec.timing.confidence).unwrap_or(ConfidenceInterval {
        mean: samples[0],
        lower: samples[0],
        upper: samples[0],
    });
    let mean = ci.mean;
    let speedup = match spec.baseline {
        Some(base) => Some(base / mean),
        None if spec.n_threads == 1 => Some(1.0),
        None => None,
    };
    Ok(RunRecord {
        matrix: spec.matrix.clone(),
        format: op.format(),
        scheme,
        n_threads: spec.n_threads,
        placement: spec.placement.clone(),
        nnz: op.nnz(),
        repetitions: samples.len(),
        gflops: 2.0 * op.nnz() as f64 / mean / 1e9,
        coarse_timer: mean < 100.0 * spec.timing.tick,
        times: samples,
        mean_time: mean,
        ci_lower: ci.lower,
        ci_upper: ci.upper,
        speedup,
        affinity_applied: pinned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::example_matrix;

    fn spec(threads: usize) -> BenchSpec {
        BenchSpec {
            matrix: "example".into(),
            n_threads: threads,
            scheme: None,
            placement: Placement::Compact,
            cores: 64,
            group_size: 4,
            timing: TimingConfig::default(),
            baseline: None,
        }
    }

    #[test]
    fn constant_timer_stops_at_min_reps() {
        let m = example_matrix();
        let mut timer = ScriptedTimer::new(vec![1.0]);
        let rec = run_benchmark(Operand::Csr(&m), &spec(2), &mut timer).unwrap();
        assert_eq!(rec.repetitions, 5);
        assert_eq!(rec.mean_time, 1.0);
        assert_eq!(rec.gflops, 16.0 / 1e9);
        assert!(!rec.coarse_timer);
    }

    #[test]
    fn alternating_timer_follows_the_rule() {
        // half-width t * 0.5*eps*sqrt(n/(n-1)) / sqrt(n); with eps = 0.2 the
        // relative width drops under 5% only after a few dozen samples
        let m = example_matrix();
        let mut timer = ScriptedTimer::new(vec![1.0, 1.2]);
        let rec = run_benchmark(Operand::Csr(&m), &spec(1), &mut timer).unwrap();
        let n = rec.repetitions;
        assert!(should_stop(&rec.times, &TimingConfig::default()));
        assert!(!should_stop(&rec.times[..n - 1], &TimingConfig::default()));
        assert!(n > 5 && n < 1000);
    }

    #[test]
    fn never_converging_timer_hits_max_reps() {
        let m = example_matrix();
        let mut s = spec(1);
        s.timing.max_reps = 40;
        let mut timer = ScriptedTimer::new(vec![1.0, 100.0]);
        let rec = run_benchmark(Operand::Csr(&m), &s, &mut timer).unwrap();
        assert_eq!(rec.repetitions, 40);
    }

    #[test]
    fn single_thread_speedup_is_one() {
        let m = example_matrix();
        let rec = run_benchmark(
            Operand::Csr(&m),
            &spec(1),
            &mut ScriptedTimer::new(vec![2.0]),
        )
        .unwrap();
        assert_eq!(rec.speedup, Some(1.0));
        let mut s = spec(1);
        s.baseline = Some(rec.mean_time);
        let rec = run_benchmark(Operand::Csr(&m), &s, &mut ScriptedTimer::new(vec![2.0])).unwrap();
        assert_eq!(rec.speedup, Some(1.0));
    }

    #[test]
    fn wall_timer_runs_csr5() {
        let m5 = example_matrix().to_csr5(2, 2).unwrap();
        let mut s = spec(2);
        s.timing.max_reps = 20;
        let rec = run_benchmark(Operand::Csr5(&m5), &s, &mut WallTimer).unwrap();
        assert_eq!(rec.scheme, PartitionScheme::Csr5Tiles);
        assert!(rec.repetitions >= 5 && rec.repetitions <= 20);
        assert!(rec.mean_time > 0.0);
    }

    #[test]
    fn coarse_timer_flagged() {
        let m = example_matrix();
        let rec = run_benchmark(
            Operand::Csr(&m),
            &spec(1),
            &mut ScriptedTimer::new(vec![5e-8]),
        )
        .unwrap();
        assert!(rec.coarse_timer);
    }

    #[test]
    fn interval_basics() {
        assert!(confidence_interval(&[1.0], 0.95).is_none());
        let ci = confidence_interval(&[3.0; 4], 0.95).unwrap();
        assert_eq!((ci.lower, ci.upper, ci.rel_width()), (3.0, 3.0, 0.0));
    }
}
