//! State comparison and readout analytics: trace distance, ensemble
//! averaging, logarithmic negativity, integrated-current histograms, and
//! threshold postselection.

use num_complex::Complex64;

use crate::hilbert::SpaceLayout;
use crate::moments::CMat;
use crate::sde::{standard_error, TrajectoryRecord};
use crate::{GaelError, Result};

/// Trace distance `(1/2) sum |eig(rho1 - rho2)|`.
pub fn trace_distance(rho1: &CMat, rho2: &CMat) -> Result<f64> {
    if rho1.nrows() != rho2.nrows() {
        return Err(GaelError::DimensionMismatch {
            context: "trace distance operands",
            expected: rho1.nrows(),
            got: rho2.nrows(),
        });
    }
    let diff = rho1 - rho2;
    let diff = (&diff + diff.adjoint()) * Complex64::from(0.5);
    Ok(0.5 * diff.symmetric_eigenvalues().iter().map(|w| w.abs()).sum::<f64>())
}

/// Qubit trace distance from Pauli expectation differences,
/// `(1/2) sqrt(dx^2 + dy^2 + dz^2)`.
pub fn trace_distance_qubit(rho1: &CMat, rho2: &CMat) -> Result<f64> {
    if rho1.nrows() != 2 || rho2.nrows() != 2 {
        return Err(GaelError::DimensionMismatch {
            context: "qubit trace distance",
            expected: 2,
            got: rho1.nrows().max(rho2.nrows()),
        });
    }
    let x = crate::hilbert::pauli_x();
    let y = crate::hilbert::pauli_y();
    let z = crate::hilbert::pauli_z();
    let mut acc = 0.0;
    for p in [&x, &y, &z] {
        let d = crate::hilbert::expect(p, rho1).re - crate::hilbert::expect(p, rho2).re;
        acc += d * d;
    }
    Ok(0.5 * acc.sqrt())
}

/// Ensemble trace-distance statistics over paired trajectories.
#[derive(Debug, Clone)]
pub struct DistanceSeries {
    pub times: Vec<f64>,
    /// Ensemble mean `D(t)` at each output time.
    pub mean: Vec<f64>,
    /// Standard error of the mean at each output time.
    pub stderr: Vec<f64>,
    /// Time-averaged distance per trajectory.
    pub per_traj: Vec<f64>,
    /// Time average of the ensemble mean.
    pub time_avg: f64,
    /// Standard error of `time_avg` across trajectories.
    pub time_avg_stderr: f64,
}

/// Computes `D(t)` for every paired trajectory and its ensemble/time
/// averages. Both records of a pair must share the output grid.
pub fn average_distance(pairs: &[(&TrajectoryRecord, &TrajectoryRecord)]) -> Result<DistanceSeries> {
    assert!(pairs.len() >= 2, "need at least two trajectory pairs");
    let times = pairs[0].0.times.clone();
    let nt = times.len();
    let mut per_time: Vec<Vec<f64>> = vec![Vec::with_capacity(pairs.len()); nt];
    let mut per_traj = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        if a.times.len() != nt || b.times.len() != nt {
            return Err(GaelError::PairingError { full: a.times.len(), reduced: b.times.len() });
        }
        let mut acc = 0.0;
        for k in 0..nt {
            let d = trace_distance(&a.states[k], &b.states[k])?;
            per_time[k].push(d);
            acc += d;
        }
        per_traj.push(acc / nt as f64);
    }
    let n = pairs.len() as f64;
    let mean: Vec<f64> = per_time.iter().map(|ds| ds.iter().sum::<f64>() / n).collect();
    let stderr: Vec<f64> = per_time.iter().map(|ds| standard_error(ds)).collect();
    let time_avg = mean.iter().sum::<f64>() / nt as f64;
    let time_avg_stderr = standard_error(&per_traj);
    Ok(DistanceSeries { times, mean, stderr, per_traj, time_avg, time_avg_stderr })
}

/// Logarithmic negativity `E_N = log2 |rho^{T_A}|_1` for the bipartition that
/// transposes `sites`.
pub fn log_negativity(layout: &SpaceLayout, rho: &CMat, sites: &[usize]) -> Result<f64> {
    if sites.is_empty() || sites.len() >= layout.n_sites() {
        return Err(GaelError::InvalidBipartition(format!(
            "transposing {} of {} sites is not a bipartition",
            sites.len(),
            layout.n_sites()
        )));
    }
    let pt = layout.partial_transpose(rho, sites)?;
    let pt = (&pt + pt.adjoint()) * Complex64::from(0.5);
    let norm: f64 = pt.symmetric_eigenvalues().iter().map(|w| w.abs()).sum();
    Ok(norm.log2().max(0.0))
}

/// Outcome of postselecting trajectories on the integrated current.
#[derive(Debug, Clone)]
pub struct PostselectionResult {
    pub threshold: f64,
    pub kept: usize,
    pub total: usize,
    /// Kept fraction (success probability of the protocol).
    pub success_probability: f64,
    /// Ensemble average of the kept final states.
    pub mean_state: CMat,
    /// Logarithmic negativity of `mean_state`, when a bipartition was given.
    pub log_neg: Option<f64>,
}

/// Keeps trajectories with `|J(t_m)| <= threshold` on channel `m`, averages
/// their final states, and optionally evaluates the logarithmic negativity of
/// the average for the given bipartition.
pub fn postselect(
    records: &[TrajectoryRecord],
    m: usize,
    t_m: f64,
    threshold: f64,
    bipartition: Option<(&SpaceLayout, &[usize])>,
) -> Result<PostselectionResult> {
    let mut kept_states: Vec<&CMat> = Vec::new();
    for rec in records {
        if rec.integrated_current(m, t_m).abs() <= threshold {
            kept_states.push(rec.states.last().expect("record without states"));
        }
    }
    if kept_states.is_empty() {
        return Err(GaelError::EmptySelection { threshold });
    }
    let mean_state = crate::sde::mean_state(&kept_states);
    let log_neg = match bipartition {
        Some((layout, sites)) => Some(log_negativity(layout, &mean_state, sites)?),
        None => None,
    };
    Ok(PostselectionResult {
        threshold,
        kept: kept_states.len(),
        total: records.len(),
        success_probability: kept_states.len() as f64 / records.len() as f64,
        mean_state,
        log_neg,
    })
}

/// Binned counts of the integrated current over an ensemble.
#[derive(Debug, Clone)]
pub struct Histogram {
    /// `edges.len() == counts.len() + 1`
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Number of prominent modes. A bin counts as a separate mode only when
    /// the smoothed counts dip below half its height between it and every
    /// taller mode already found; this ignores bin-level sampling noise.
    pub fn peak_count(&self) -> usize {
        let n = self.counts.len();
        if n == 0 {
            return 0;
        }
        let sm: Vec<f64> = (0..n)
            .map(|k| {
                let lo = k.saturating_sub(1);
                let hi = (k + 1).min(n - 1);
                self.counts[lo..=hi].iter().sum::<usize>() as f64 / (hi - lo + 1) as f64
            })
            .collect();
        let top = sm.iter().cloned().fold(0.0_f64, f64::max);
        let mut order: Vec<usize> = (0..n).filter(|&k| sm[k] > top / 10.0).collect();
        order.sort_by(|&a, &b| sm[b].total_cmp(&sm[a]));
        let mut peaks: Vec<usize> = Vec::new();
        for k in order {
            let separated = peaks.iter().all(|&p| {
                let (lo, hi) = (k.min(p), k.max(p));
                if hi - lo < 2 {
                    return false;
                }
                let valley = sm[lo + 1..hi].iter().cloned().fold(f64::INFINITY, f64::min);
                valley < 0.5 * sm[k]
            });
            if separated {
                peaks.push(k);
            }
        }
        peaks.len()
    }
}

/// Histogram of `J(t_m)` on channel `m`. Bin count defaults to the
/// Freedman-Diaconis rule.
pub fn current_histogram(
    records: &[TrajectoryRecord],
    m: usize,
    t_m: f64,
    bins: Option<usize>,
) -> Histogram {
    assert!(!records.is_empty());
    let mut js: Vec<f64> = records.iter().map(|r| r.integrated_current(m, t_m)).collect();
    js.sort_by(f64::total_cmp);
    let n = js.len();
    let (lo, hi) = (js[0], js[n - 1]);
    let nbins = bins.unwrap_or_else(|| {
        let q1 = js[n / 4];
        let q3 = js[(3 * n) / 4];
        let iqr = (q3 - q1).max(f64::EPSILON);
        let width = 2.0 * iqr / (n as f64).cbrt();
        (((hi - lo) / width).ceil() as usize).clamp(1, 200)
    });
    let span = (hi - lo).max(f64::EPSILON);
    let mut counts = vec![0usize; nbins];
    for &j in &js {
        let b = (((j - lo) / span) * nbins as f64) as usize;
        counts[b.min(nbins - 1)] += 1;
    }
    let edges = (0..=nbins).map(|k| lo + span * k as f64 / nbins as f64).collect();
    Histogram { edges, counts }
}
