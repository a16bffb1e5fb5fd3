//! Monte Carlo ensembles: many independently perturbed samples evolved in
//! parallel, reduced into streaming moment sums and per-point sample records.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initial::{realize, InitialDataSpec};
use crate::solver::{advance, FlowState, StepControl};
use crate::spectral::{biot_savart, GridSpec, VelocityField, ViscositySpec};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub base: InitialDataSpec,
    pub samples: usize,
    pub grid: GridSpec,
    pub visc: ViscositySpec,
    pub ctl: StepControl,
    pub request_times: Vec<f64>,
    pub probes: Vec<(f64, f64)>,
    pub base_seed: u64,
    /// Keep full velocity snapshots of every `s`-th sample.
    pub retain_stride: Option<usize>,
    /// Switching this off leaves only the (linear) viscous term.
    pub advection: bool,
}

impl EnsembleConfig {
    pub fn new(base: InitialDataSpec, samples: usize, grid: GridSpec, request_times: Vec<f64>) -> Self {
        let base_seed = base.seed;
        Self {
            base,
            samples,
            grid,
            visc: ViscositySpec::default(),
            ctl: StepControl::default(),
            request_times,
            probes: Vec::new(),
            base_seed,
            retain_stride: None,
            advection: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::config("M", "must be >= 1"));
        }
        self.base.validate()?;
        self.ctl.validate()?;
        ViscositySpec::new(self.visc.epsilon, self.visc.m, &self.grid)?;
        if self.request_times.is_empty() {
            return Err(Error::config("times", "at least one snapshot time is required"));
        }
        for (i, &t) in self.request_times.iter().enumerate() {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::config(format!("times[{i}]"), format!("must be finite and >= 0, got {t}")));
            }
            if i > 0 && t <= self.request_times[i - 1] {
                return Err(Error::config(format!("times[{i}]"), "times must be strictly increasing"));
            }
        }
        for (i, &(x1, x2)) in self.probes.iter().enumerate() {
            let inside = |x: f64| (0.0..2.0 * PI).contains(&x);
            if !inside(x1) || !inside(x2) {
                return Err(Error::config(format!("probes[{i}]"), "must lie in [0, 2π)²"));
            }
        }
        if self.retain_stride == Some(0) {
            return Err(Error::config("retain_stride", "must be >= 1"));
        }
        Ok(())
    }

    /// Initial-data description of sample `k` (its seed is `(base_seed, k)`).
    pub fn sample_spec(&self) -> InitialDataSpec {
        InitialDataSpec {
            seed: self.base_seed,
            ..self.base.clone()
        }
    }
}

/// Moment sums at one snapshot time, on the physical grid (row-major) and,
/// for the first moment, also in Fourier space.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSums {
    pub time: f64,
    pub sum_v: [Vec<f64>; 2],
    /// `v1 v1`, `v1 v2`, `v2 v2`.
    pub sum_vv: [Vec<f64>; 3],
    pub sum_spectral: VelocityField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleAccumulator {
    pub grid: GridSpec,
    pub count: usize,
    pub snapshots: Vec<SnapshotSums>,
}

impl EnsembleAccumulator {
    /// Sums over a single sample given by its velocity at each snapshot time.
    pub fn from_sample(times: &[f64], fields: &[VelocityField]) -> Result<Self> {
        if times.len() != fields.len() || fields.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                actual: fields.len(),
            });
        }
        let grid = *fields[0].grid();
        let mut snapshots = Vec::with_capacity(fields.len());
        for (&time, vel) in times.iter().zip(fields) {
            if *vel.grid() != grid {
                return Err(Error::GridMismatch("snapshots of one sample differ in grid".into()));
            }
            let (u, v) = vel.to_grid()?;
            let uu = u.iter().map(|a| a * a).collect();
            let uv = u.iter().zip(&v).map(|(a, b)| a * b).collect();
            let vv = v.iter().map(|b| b * b).collect();
            snapshots.push(SnapshotSums {
                time,
                sum_v: [u, v],
                sum_vv: [uu, uv, vv],
                sum_spectral: vel.clone(),
            });
        }
        Ok(Self {
            grid,
            count: 1,
            snapshots,
        })
    }

    /// `self += other`, elementwise.
    pub fn merge(&mut self, other: &EnsembleAccumulator) -> Result<()> {
        if self.grid != other.grid || self.snapshots.len() != other.snapshots.len() {
            return Err(Error::GridMismatch("accumulators are not compatible".into()));
        }
        for (a, b) in self.snapshots.iter_mut().zip(&other.snapshots) {
            for (x, y) in a.sum_v.iter_mut().chain(a.sum_vv.iter_mut()).zip(b.sum_v.iter().chain(&b.sum_vv)) {
                for (p, q) in x.iter_mut().zip(y) {
                    *p += q;
                }
            }
            a.sum_spectral.u.axpy(1.0, &b.sum_spectral.u);
            a.sum_spectral.v.axpy(1.0, &b.sum_spectral.v);
        }
        self.count += other.count;
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    /// Fourier coefficients of the ensemble-mean velocity at snapshot `index`.
    pub fn mean_velocity(&self, index: usize) -> Result<VelocityField> {
        if self.count == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let s = &self.snapshots[index];
        let scale = 1.0 / self.count as f64;
        Ok(s.sum_spectral.lincomb(scale, &s.sum_spectral, 0.0))
    }
}

/// Reduces accumulators pushed in sample order along a fixed binary tree: the
/// shape depends only on how many leaves were pushed, never on timing.
#[derive(Default)]
pub struct MergeTree {
    stack: Vec<(u32, EnsembleAccumulator)>,
}

impl MergeTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, leaf: EnsembleAccumulator) -> Result<()> {
        let mut node = (0, leaf);
        while let Some(top) = self.stack.last() {
            if top.0 != node.0 {
                break;
            }
            let (level, mut left) = self.stack.pop().expect("non-empty");
            left.merge(&node.1)?;
            node = (level + 1, left);
        }
        self.stack.push(node);
        Ok(())
    }

    pub fn finish(mut self) -> Result<Option<EnsembleAccumulator>> {
        let Some((_, mut acc)) = self.stack.pop() else {
            return Ok(None);
        };
        while let Some((_, mut left)) = self.stack.pop() {
            left.merge(&acc)?;
            acc = left;
        }
        Ok(Some(acc))
    }
}

/// Velocities of all samples at one point, sampled at the nearest grid node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub point: (f64, f64),
    pub node: (usize, usize),
    pub times: Vec<f64>,
    /// One row per completed sample, one `[v1, v2]` per snapshot time.
    pub values: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedSample {
    pub index: u64,
    pub seed: (u64, u64),
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleSummary {
    pub index: u64,
    pub steps: usize,
    pub energy_log: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetainedSample {
    pub index: u64,
    pub snapshots: Vec<VelocityField>,
}

#[derive(Clone, Debug)]
pub struct EnsembleOutput {
    pub accumulator: EnsembleAccumulator,
    pub probes: Vec<ProbeRecord>,
    pub summaries: Vec<SampleSummary>,
    pub retained: Vec<RetainedSample>,
    pub failed: Vec<FailedSample>,
}

struct SampleResult {
    leaf: EnsembleAccumulator,
    probe_rows: Vec<Vec<[f64; 2]>>,
    summary: SampleSummary,
    retained: Option<Vec<VelocityField>>,
}

/// Initial velocity of sample `k`.
pub fn sample_initial_velocity(cfg: &EnsembleConfig, k: u64) -> Result<VelocityField> {
    Ok(biot_savart(&realize(&cfg.sample_spec(), &cfg.grid, k)?.eta))
}

fn run_sample(cfg: &EnsembleConfig, k: u64) -> Result<SampleResult> {
    let init = realize(&cfg.sample_spec(), &cfg.grid, k)?;
    let mut state = FlowState::new(init.eta, 0.0, cfg.visc);
    state.advection = cfg.advection;
    let traj = advance(&state, &cfg.request_times, &cfg.ctl, None)?;
    let fields: Vec<VelocityField> = traj.snapshots.iter().map(|s| s.velocity()).collect();
    let leaf = EnsembleAccumulator::from_sample(&cfg.request_times, &fields)?;
    let p = cfg.grid.phys_n();
    let probe_rows = cfg
        .probes
        .iter()
        .map(|&(x1, x2)| {
            let (i, j) = cfg.grid.nearest_node(x1, x2);
            leaf.snapshots
                .iter()
                .map(|s| [s.sum_v[0][i * p + j], s.sum_v[1][i * p + j]])
                .collect()
        })
        .collect();
    let retained = match cfg.retain_stride {
        Some(s) if k % s as u64 == 0 => Some(fields),
        _ => None,
    };
    Ok(SampleResult {
        leaf,
        probe_rows,
        summary: SampleSummary {
            index: k,
            steps: traj.steps,
            energy_log: traj.energy_log,
        },
        retained,
    })
}

fn too_many_failures(failed: usize, total: usize) -> bool {
    failed * 100 > total
}

/// Runs all `cfg.samples` members on a pool of `workers` threads. Results are
/// bitwise independent of `workers`.
pub fn run_ensemble(cfg: &EnsembleConfig, workers: usize) -> Result<EnsembleOutput> {
    cfg.validate()?;
    if workers == 0 {
        return Err(Error::config("workers", "must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;

    let mut tree = MergeTree::new();
    let mut probes: Vec<ProbeRecord> = cfg
        .probes
        .iter()
        .map(|&(x1, x2)| ProbeRecord {
            point: (x1, x2),
            node: cfg.grid.nearest_node(x1, x2),
            times: cfg.request_times.clone(),
            values: Vec::new(),
        })
        .collect();
    let mut summaries = Vec::new();
    let mut retained = Vec::new();
    let mut failed = Vec::new();

    let total = cfg.samples as u64;
    let batch = workers as u64;
    let mut start = 0;
    while start < total {
        let end = (start + batch).min(total);
        let results: Vec<(u64, Result<SampleResult>)> =
            pool.install(|| (start..end).into_par_iter().map(|k| (k, run_sample(cfg, k))).collect());
        for (k, res) in results {
            match res {
                Ok(r) => {
                    tree.push(r.leaf)?;
                    for (rec, row) in probes.iter_mut().zip(r.probe_rows) {
                        rec.values.push(row);
                    }
                    summaries.push(r.summary);
                    if let Some(fields) = r.retained {
                        retained.push(RetainedSample {
                            index: k,
                            snapshots: fields,
                        });
                    }
                }
                Err(e @ Error::Diverged { .. }) => failed.push(FailedSample {
                    index: k,
                    seed: (cfg.base_seed, k),
                    reason: e.to_string(),
                }),
                Err(e) => return Err(e),
            }
        }
        if too_many_failures(failed.len(), cfg.samples) {
            return Err(Error::EnsembleAborted {
                failed: failed.len(),
                total: cfg.samples,
                first_failure: failed[0].index,
            });
        }
        start = end;
    }
    let accumulator = tree.finish()?.ok_or(Error::EmptyEnsemble)?;
    Ok(EnsembleOutput {
        accumulator,
        probes,
        summaries,
        retained,
        failed,
    })
}

/// One configuration per δ, all sharing `base_seed` so that sample `k` uses
/// the same underlying draw at every δ.
pub fn perturbed_family(cfg: &EnsembleConfig, deltas: &[f64]) -> Result<Vec<EnsembleConfig>> {
    if deltas.is_empty() {
        return Err(Error::config("deltas", "empty list"));
    }
    if deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::config("deltas", "must be positive"));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("deltas", "must be strictly decreasing"));
    }
    Ok(deltas
        .iter()
        .map(|&delta| {
            let mut c = cfg.clone();
            c.base.delta = delta;
            c
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::{draw_perturbation, DatumKind, DrawStream, SampleRng};
    use crate::spectral::Complex64;

    fn sheet_cfg(samples: usize) -> EnsembleConfig {
        let grid = GridSpec::with_cutoff(8).unwrap();
        let spec = InitialDataSpec::new(DatumKind::FlatSheet, 0.05, 0.3, 11);
        let mut cfg = EnsembleConfig::new(spec, samples, grid, vec![0.0, 0.1]);
        cfg.probes = vec![(0.5, 1.5), (2.0 * PI * 0.25, 2.0 * PI * 0.77)];
        cfg
    }

    #[test]
    fn single_sample_mean_is_that_sample() {
        let cfg = sheet_cfg(1);
        let out = run_ensemble(&cfg, 1).unwrap();
        assert_eq!(out.accumulator.count, 1);
        let init = sample_initial_velocity(&cfg, 0).unwrap();
        assert_eq!(out.accumulator.mean_velocity(0).unwrap(), init);
        let (u, _) = init.to_grid().unwrap();
        assert_eq!(out.accumulator.snapshots[0].sum_v[0], u);
        assert_eq!(out.probes[0].values.len(), 1);
    }

    #[test]
    fn mirrored_samples_cancel() {
        let cfg = sheet_cfg(1);
        let v = sample_initial_velocity(&cfg, 3).unwrap();
        let minus = v.lincomb(-1.0, &v, 0.0);
        let mut tree = MergeTree::new();
        tree.push(EnsembleAccumulator::from_sample(&[0.0], &[v.clone()]).unwrap()).unwrap();
        tree.push(EnsembleAccumulator::from_sample(&[0.0], &[minus]).unwrap()).unwrap();
        let acc = tree.finish().unwrap().unwrap();
        assert_eq!(acc.count, 2);
        let s = &acc.snapshots[0];
        assert!(s.sum_v.iter().flatten().all(|&x| x == 0.0));
        let (u, w) = v.to_grid().unwrap();
        for i in 0..u.len() {
            assert_eq!(s.sum_vv[0][i] / 2.0, u[i] * u[i]);
            assert_eq!(s.sum_vv[1][i] / 2.0, u[i] * w[i]);
            assert_eq!(s.sum_vv[2][i] / 2.0, w[i] * w[i]);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = EnsembleConfig {
            retain_stride: Some(2),
            ..sheet_cfg(7)
        };
        let one = run_ensemble(&cfg, 1).unwrap();
        let eight = run_ensemble(&cfg, 8).unwrap();
        assert_eq!(one.accumulator, eight.accumulator);
        assert_eq!(one.probes, eight.probes);
        assert_eq!(one.retained, eight.retained);
        assert_eq!(one.retained.iter().map(|r| r.index).collect::<Vec<_>>(), vec![0, 2, 4, 6]);
        assert!(one.failed.is_empty());
        assert!(one.probes.iter().all(|p| p.values.len() == 7));
    }

    #[test]
    fn merge_tree_shape_is_fixed() {
        // leaves with values that make addition order observable in floating point
        let grid = GridSpec::with_cutoff(4).unwrap();
        let leaf = |c: f64| {
            let mut f = VelocityField::zeros(grid);
            f.u.set_hermitian(1, 0, Complex64::new(c, 0.0));
            EnsembleAccumulator::from_sample(&[0.0], &[f]).unwrap()
        };
        let values = [1e16, 1.0, -1e16, 1.0, 3.0];
        let mut tree = MergeTree::new();
        for v in values {
            tree.push(leaf(v)).unwrap();
        }
        let acc = tree.finish().unwrap().unwrap();
        // ((1e16 + 1) + (-1e16 + 1)) + 3
        let expected = ((1e16 + 1.0) + (-1e16 + 1.0)) + 3.0;
        assert_eq!(acc.snapshots[0].sum_spectral.u.get(1, 0).re, expected);
        assert_eq!(acc.count, 5);
        assert!(MergeTree::new().finish().unwrap().is_none());
    }

    #[test]
    fn linear_dynamics_are_unbiased() {
        let grid = GridSpec::with_cutoff(8).unwrap();
        let spec = InitialDataSpec::new(DatumKind::VortexPatch, 0.0128, 1.0, 5);
        let t = 0.25;
        let mut cfg = EnsembleConfig::new(spec, 6, grid, vec![0.0, t]);
        cfg.visc = ViscositySpec::new(0.05, 0, &grid).unwrap();
        cfg.ctl = StepControl::fixed(1.0 / 8000.0);
        cfg.advection = false;
        let out = run_ensemble(&cfg, 3).unwrap();
        let m0 = out.accumulator.mean_velocity(0).unwrap();
        let m1 = out.accumulator.mean_velocity(1).unwrap();
        let mut worst: f64 = 0.0;
        for (k1, k2) in grid.wavevectors() {
            let decay = (-cfg.visc.epsilon * (k1 * k1 + k2 * k2) as f64 * t).exp();
            worst = worst.max((m1.u.get(k1, k2) - m0.u.get(k1, k2) * decay).norm());
            worst = worst.max((m1.v.get(k1, k2) - m0.v.get(k1, k2) * decay).norm());
        }
        assert!(worst < 1e-10, "worst {worst}");
    }

    #[test]
    fn family_is_coupled() {
        let cfg = sheet_cfg(4);
        let fam = perturbed_family(&cfg, &[0.1, 0.05, 0.025]).unwrap();
        assert_eq!(fam.len(), 3);
        for c in &fam {
            assert_eq!(EnsembleConfig { base: cfg.base.clone(), ..c.clone() }, cfg);
        }
        let draw = |c: &EnsembleConfig| {
            let mut rng = SampleRng::new(c.base_seed, 2, DrawStream::Amplitudes);
            draw_perturbation(&c.sample_spec(), &mut rng).unwrap()
        };
        let (a, b) = (draw(&fam[0]), draw(&fam[1]));
        for (x, y) in a.amplitudes.iter().zip(&b.amplitudes) {
            assert!((y - x * 0.5_f64.sqrt()).abs() <= 1e-15 * x.abs().max(1e-300));
        }
        assert_eq!(a.phases, b.phases);
        assert_eq!(perturbed_family(&cfg, &[0.1]).unwrap().len(), 1);
        assert!(perturbed_family(&cfg, &[0.1, 0.2]).is_err());
        assert!(perturbed_family(&cfg, &[0.0]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = sheet_cfg(0);
        assert!(run_ensemble(&cfg, 1).is_err());
        cfg.samples = 1;
        cfg.probes = vec![(7.0, 0.0)];
        assert!(cfg.validate().is_err());
        cfg.probes.clear();
        assert!(run_ensemble(&cfg, 0).is_err());
    }

    #[test]
    fn failure_policy() {
        assert!(!too_many_failures(0, 1));
        assert!(too_many_failures(1, 99));
        assert!(!too_many_failures(1, 100));
        assert!(too_many_failures(2, 100));
    }
}
