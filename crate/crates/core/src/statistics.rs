//! Derived quantities of ensembles: moments, Cauchy rates, Wasserstein
//! distances, histograms, spreading rates and sign separation.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::{EnsembleAccumulator, ProbeRecord};
use crate::error::{Error, Result};
use crate::spectral::{l2_distance_sq, GridSpec, VelocityField};

/// Growth rate of the spreading bound `∫Var dx ≤ C t`.
pub const VARIANCE_BOUND_RATE: f64 = 5.700;
/// Relative slack allowed on top of the bound.
pub const VARIANCE_BOUND_SLACK: f64 = 0.05;
/// Default window for the spreading-rate fit.
pub const DEFAULT_SPREAD_WINDOW: (f64, f64) = (2.0, 4.0);

/// Pointwise first and second moments at one snapshot time.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentFields {
    pub phys_n: usize,
    pub count: usize,
    pub time: f64,
    pub mean: [Vec<f64>; 2],
    /// `xx`, `xy`, `yy`.
    pub second: [Vec<f64>; 3],
    /// Trace of the covariance.
    pub variance: Vec<f64>,
}

impl MomentFields {
    pub fn from_sums(phys_n: usize, count: usize, time: f64, sum_v: &[Vec<f64>; 2], sum_vv: &[Vec<f64>; 3]) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let len = phys_n * phys_n;
        if sum_v.iter().chain(sum_vv).any(|v| v.len() != len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: sum_v[0].len(),
            });
        }
        let m = count as f64;
        let mean = sum_v.clone().map(|v| v.into_iter().map(|x| x / m).collect::<Vec<_>>());
        let second = sum_vv.clone().map(|v| v.into_iter().map(|x| x / m).collect::<Vec<_>>());
        let variance = (0..len)
            .map(|i| {
                let var = (second[0][i] - mean[0][i] * mean[0][i]) + (second[2][i] - mean[1][i] * mean[1][i]);
                var.max(0.0)
            })
            .collect();
        Ok(Self {
            phys_n,
            count,
            time,
            mean,
            second,
            variance,
        })
    }

    /// Covariance entry `c ∈ {xx, xy, yy}` at every node.
    pub fn covariance(&self, c: usize) -> Vec<f64> {
        let (a, b) = [(0, 0), (0, 1), (1, 1)][c];
        (0..self.mean[0].len())
            .map(|i| self.second[c][i] - self.mean[a][i] * self.mean[b][i])
            .collect()
    }

    fn cell_area(&self) -> f64 {
        let h = 2.0 * PI / self.phys_n as f64;
        h * h
    }

    /// Monte Carlo standard error of the L2 norm of the mean of the given
    /// components: `sqrt(∫ Σ_c Var(v_c) dx / (M - 1))`.
    pub fn mean_standard_error(&self, components: &[usize]) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        let total: f64 = components
            .iter()
            .map(|&c| self.covariance(if c == 0 { 0 } else { 2 }).iter().map(|v| v.max(0.0)).sum::<f64>())
            .sum();
        (self.cell_area() * total / (self.count - 1) as f64).sqrt()
    }
}

/// Moments at snapshot `index` of an accumulator.
pub fn moments(acc: &EnsembleAccumulator, index: usize) -> Result<MomentFields> {
    let s = acc.snapshots.get(index).ok_or(Error::DimensionMismatch {
        expected: acc.snapshots.len(),
        actual: index,
    })?;
    MomentFields::from_sums(acc.grid.phys_n(), acc.count, s.time, &s.sum_v, &s.sum_vv)
}

pub fn all_moments(acc: &EnsembleAccumulator) -> Result<Vec<MomentFields>> {
    (0..acc.snapshots.len()).map(|i| moments(acc, i)).collect()
}

/// `‖a − b‖²_{L2}`, the coarser field zero-padded.
pub fn cauchy_rate(a: &VelocityField, b: &VelocityField) -> f64 {
    l2_distance_sq(a, b)
}

/// `sqrt((2π/n)² Σ v²)` for values on an `n × n` grid.
pub fn grid_l2_norm(values: &[f64], phys_n: usize) -> f64 {
    let h = 2.0 * PI / phys_n as f64;
    (h * h * values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Average over x1 of every row, broadcast back to the grid.
pub fn x1_average(values: &[f64], phys_n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for row in values.chunks(phys_n) {
        let avg = row.iter().sum::<f64>() / phys_n as f64;
        out.extend(std::iter::repeat_n(avg, phys_n));
    }
    out
}

/// Minimum-cost perfect matching on a square cost matrix (shortest augmenting
/// paths with potentials). Returns `assignment[row] = column`.
pub fn optimal_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    // 1-based arrays; column 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// 1-Wasserstein distance between two empirical measures with equal weights.
pub fn wasserstein1(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SampleCountMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let cost: Vec<f64> = a.iter().flat_map(|&p| b.iter().map(move |&q| dist(p, q))).collect();
    let assignment = optimal_assignment(&cost, n);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok(total / n as f64)
}

/// Samples at a set of points: `[point][sample] -> [v1, v2]`.
pub type PointSamples = Vec<Vec<[f64; 2]>>;

/// Every `stride`-th node of `grid` in both directions.
pub fn strided_points(grid: &GridSpec, stride: usize) -> Vec<(f64, f64)> {
    let p = grid.phys_n();
    let stride = stride.max(1);
    (0..p)
        .step_by(stride)
        .flat_map(|i| (0..p).step_by(stride).map(move |j| grid.node(i, j)))
        .collect()
}

/// Values of each field at the grid node nearest to each point.
pub fn point_samples(fields: &[VelocityField], points: &[(f64, f64)]) -> Result<PointSamples> {
    let mut out = vec![Vec::with_capacity(fields.len()); points.len()];
    for f in fields {
        let grid = f.grid();
        let p = grid.phys_n();
        let (u, v) = f.to_grid()?;
        for (slot, &(x1, x2)) in out.iter_mut().zip(points) {
            let (i, j) = grid.nearest_node(x1, x2);
            slot.push([u[i * p + j], v[i * p + j]]);
        }
    }
    Ok(out)
}

/// Probe records viewed as point samples at snapshot `time_index`.
pub fn probe_samples(probes: &[ProbeRecord], time_index: usize) -> PointSamples {
    probes
        .iter()
        .map(|r| r.values.iter().map(|row| row[time_index]).collect())
        .collect()
}

/// Spatial average of the pointwise 1-Wasserstein distance.
pub fn mean_wasserstein(a: &PointSamples, b: &PointSamples) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let each: Vec<f64> = a
        .par_iter()
        .zip(b.par_iter())
        .map(|(x, y)| wasserstein1(x, y))
        .collect::<Result<_>>()?;
    Ok(each.iter().sum::<f64>() / each.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width bins over `[min, max]` widened by 1% of the range.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::config("bins", "must be >= 2"));
    }
    if values.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { 0.01 * (hi - lo) } else { 0.01 * lo.abs().max(1.0) };
    let (lo, hi) = (lo - pad, hi + pad);
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|b| lo + width * b as f64).collect();
    let mut counts = vec![0; bins];
    for &x in values {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Histogram of velocity component `component` (1 or 2) at one probe and time.
pub fn histogram_at(probe: &ProbeRecord, time_index: usize, component: usize, bins: usize) -> Result<Histogram> {
    if !(1..=2).contains(&component) {
        return Err(Error::config("component", "must be 1 or 2"));
    }
    if time_index >= probe.times.len() {
        return Err(Error::DimensionMismatch {
            expected: probe.times.len(),
            actual: time_index,
        });
    }
    let values: Vec<f64> = probe.values.iter().map(|row| row[time_index][component - 1]).collect();
    histogram(&values, bins)
}

/// `t ↦ ∫ Var dx` with a least-squares line over a time window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpreadSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
}

impl SpreadSeries {
    pub fn from_values(times: Vec<f64>, values: Vec<f64>, window: (f64, f64)) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                actual: values.len(),
            });
        }
        if times.len() < 2 {
            return Err(Error::config("times", "a spreading series needs at least two times"));
        }
        let (ts, vs): (Vec<f64>, Vec<f64>) = times
            .iter()
            .zip(&values)
            .filter(|(t, _)| **t >= window.0 && **t <= window.1)
            .map(|(t, v)| (*t, *v))
            .unzip();
        if ts.len() < 2 {
            return Err(Error::WindowOutsideData {
                start: window.0,
                end: window.1,
            });
        }
        let (slope, intercept) = fit_line(&ts, &vs);
        Ok(Self {
            times,
            values,
            window,
            slope,
            intercept,
        })
    }
}

/// Least-squares `(slope, intercept)`.
pub fn fit_line(ts: &[f64], vs: &[f64]) -> (f64, f64) {
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let vm = vs.iter().sum::<f64>() / n;
    let sxy: f64 = ts.iter().zip(vs).map(|(t, v)| (t - tm) * (v - vm)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, vm - slope * tm)
}

/// `(2π/n)² Σ Var`.
pub fn integrated_variance(m: &MomentFields) -> f64 {
    m.cell_area() * m.variance.iter().sum::<f64>()
}

pub fn avg_variance_series(moments: &[MomentFields], window: (f64, f64)) -> Result<SpreadSeries> {
    SpreadSeries::from_values(
        moments.iter().map(|m| m.time).collect(),
        moments.iter().map(integrated_variance).collect(),
        window,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub passed: bool,
    /// `(t, value, bound)` with the largest `value / bound` among `t > 0`.
    pub worst: Option<(f64, f64, f64)>,
    pub violations: Vec<(f64, f64)>,
    pub slope: f64,
}

impl BoundReport {
    pub fn check(&self) -> Result<()> {
        match (self.passed, self.worst) {
            (false, Some((time, value, bound))) => Err(Error::BoundViolated { time, value, bound }),
            _ => Ok(()),
        }
    }
}

pub fn variance_bound(t: f64) -> f64 {
    VARIANCE_BOUND_RATE * t * (1.0 + VARIANCE_BOUND_SLACK)
}

/// Checks `∫Var dx ≤ 5.7 t` (plus 5%) at every positive time.
pub fn variance_bound_check(series: &SpreadSeries) -> BoundReport {
    let mut worst: Option<(f64, f64, f64)> = None;
    let mut violations = Vec::new();
    for (&t, &v) in series.times.iter().zip(&series.values) {
        if t <= 0.0 {
            continue;
        }
        let bound = variance_bound(t);
        if v > bound {
            violations.push((t, v));
        }
        if worst.is_none_or(|(_, wv, wb)| v / bound > wv / wb) {
            worst = Some((t, v, bound));
        }
    }
    BoundReport {
        passed: violations.is_empty(),
        worst,
        violations,
        slope: series.slope,
    }
}

/// `(x2, value)` along the grid column nearest to `x1`.
pub fn slice(values: &[f64], phys_n: usize, x1: f64) -> Vec<(f64, f64)> {
    let h = 2.0 * PI / phys_n as f64;
    let j = ((x1.rem_euclid(2.0 * PI) / h).round() as usize) % phys_n;
    (0..phys_n).map(|i| (h * i as f64, values[i * phys_n + j])).collect()
}

/// Reported separation when one of the signed sets is empty.
pub fn separation_sentinel() -> f64 {
    2.0 * PI * 2.0_f64.sqrt()
}

/// Squared distance transform along one periodic line (lower envelope of
/// parabolas over three copies of the line).
fn periodic_edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let len = 3 * n;
    let val = |q: usize| f[q % n];
    let mut v = vec![0usize; len];
    let mut z = vec![0.0; len + 1];
    let mut k = 0usize;
    let mut first = None;
    for q in 0..len {
        if val(q).is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(q0) = first else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    v[0] = q0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in q0 + 1..len {
        let fq = val(q);
        if !fq.is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((fq + (q * q) as f64) - (val(p) + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    let mut k = 0;
    for q in n..2 * n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        out[q - n] = d * d + val(v[k]);
    }
}

/// Squared periodic Euclidean distance (in grid units) from every node to the
/// nearest node of `mask`.
fn periodic_edt(mask: &[bool], n: usize) -> Vec<f64> {
    let mut rows = vec![0.0; n * n];
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            line[j] = if mask[i * n + j] { 0.0 } else { f64::INFINITY };
        }
        periodic_edt_1d(&line, &mut out);
        rows[i * n..(i + 1) * n].copy_from_slice(&out);
    }
    let mut result = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            line[i] = rows[i * n + j];
        }
        periodic_edt_1d(&line, &mut out);
        for i in 0..n {
            result[i * n + j] = out[i];
        }
    }
    result
}

/// Minimum periodic distance between nodes with `η > threshold` and nodes with
/// `η < −threshold`, for `η` on an `n × n` grid of `[0, 2π)²`.
pub fn sign_separation(eta: &[f64], phys_n: usize, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::config("threshold", "must be > 0"));
    }
    if eta.len() != phys_n * phys_n {
        return Err(Error::DimensionMismatch {
            expected: phys_n * phys_n,
            actual: eta.len(),
        });
    }
    let negative: Vec<bool> = eta.iter().map(|&x| x < -threshold).collect();
    if !negative.iter().any(|&b| b) || !eta.iter().any(|&x| x > threshold) {
        return Ok(separation_sentinel());
    }
    let d2 = periodic_edt(&negative, phys_n);
    let best = eta
        .iter()
        .zip(&d2)
        .filter(|(x, _)| **x > threshold)
        .map(|(_, d)| *d)
        .fold(f64::INFINITY, f64::min);
    Ok(2.0 * PI / phys_n as f64 * best.sqrt())
}
