//! Command-line front end of the `mvs` binary.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::ensemble::{run_ensemble, EnsembleConfig, ProbeRecord};
use crate::error::{Error, Result};
use crate::initial::{realize, DatumKind, InitialDataSpec};
use crate::io::{read_config, read_field, read_manifest, read_series, ConfigDocument, FieldFile, FieldKind, RunManifest, RunWriter, Table};
use crate::solver::{advance, FlowState};
use crate::spectral::{biot_savart, forward_transform, forward_transform_pair, GridSpec, VelocityField};
use crate::statistics::{
    all_moments, avg_variance_series, cauchy_rate, grid_l2_norm, histogram_at, integrated_variance, mean_wasserstein,
    slice, variance_bound_check, x1_average, MomentFields, PointSamples, DEFAULT_SPREAD_WINDOW,
};

#[derive(Debug, Parser)]
#[command(name = "mvs", version, about = "Spectral Euler solver and Monte Carlo ensemble statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a single sample and write its snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also advect and write the passive tracer.
        #[arg(long)]
        tracer: bool,
        /// Which sample of the random initial datum to evolve.
        #[arg(long, default_value_t = 0)]
        sample: u64,
    },
    /// Run a Monte Carlo ensemble and write moment fields and probe records.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `M` from the config.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, env = "MVS_WORKERS", default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summaries of the moment fields of an ensemble run, plus slices at fixed x1.
    Stats {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        x1: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Squared L2 distance between two runs at every snapshot.
    Cauchy {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spatially averaged 1-Wasserstein distance between two ensembles.
    Wasserstein {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Grid stride used with retained sample fields.
        #[arg(long, default_value_t = 8)]
        stride: usize,
        /// Use probe records even if full sample fields were retained.
        #[arg(long)]
        probes: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Histogram of one velocity component at a probe point.
    Probe {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 0)]
        time_index: usize,
        #[arg(long, default_value_t = 1)]
        component: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrated variance over time, its fitted slope, and the spreading bound check.
    Spread {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, num_args = 2, value_names = ["START", "END"])]
        window: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the config documents of a predefined experiment.
    Preset {
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Scale::Desk)]
        scale: Scale,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Desk,
    Paper,
}

pub const PRESETS: [&str; 5] = ["vortex-patch", "sheet-single", "sheet-ensemble", "delta-family", "sign-separation"];
pub const DESK_MAX_N: usize = 128;
pub const DESK_MAX_M: usize = 50;
pub const DELTA_FAMILY: [f64; 5] = [0.1024, 0.0512, 0.0256, 0.0128, 0.0064];

pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Run {
            config,
            out,
            tracer,
            sample,
        } => cmd_run(&config, &out, tracer, sample),
        Command::Ensemble {
            config,
            samples,
            workers,
            out,
        } => cmd_ensemble(&config, samples, workers, &out),
        Command::Stats { run, x1, out } => cmd_stats(&run, x1, &out),
        Command::Cauchy { a, b, out } => cmd_cauchy(&a, &b, &out),
        Command::Wasserstein {
            a,
            b,
            stride,
            probes,
            out,
        } => cmd_wasserstein(&a, &b, stride, probes, &out),
        Command::Probe {
            run,
            index,
            time_index,
            component,
            bins,
            out,
        } => cmd_probe(&run, index, time_index, component, bins, &out),
        Command::Spread { run, window, out } => {
            let window = window.map_or(DEFAULT_SPREAD_WINDOW, |w| (w[0], w[1]));
            cmd_spread(&run, window, &out)
        }
        Command::Preset { name, out, scale } => cmd_preset(&name, &out, scale),
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(summary) => {
            if !summary.is_empty() {
                println!("{summary}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn load_config(path: &Path) -> Result<EnsembleConfig> {
    if !path.is_file() {
        return Err(Error::config("--config", format!("no such file: {}", path.display())));
    }
    read_config(path)
}

fn snapshot_name(kind: FieldKind, s: usize) -> String {
    format!("{kind}_{s:03}.mvsf")
}

fn retained_name(kind: FieldKind, k: u64, s: usize) -> String {
    format!("retained/{kind}_k{k:05}_{s:03}.mvsf")
}

fn cmd_run(config: &Path, out: &Path, with_tracer: bool, sample: u64) -> Result<String> {
    let cfg = load_config(config)?;
    let init = realize(&cfg.sample_spec(), &cfg.grid, sample)?;
    let state = FlowState::new(init.eta, 0.0, cfg.visc);
    let traj = advance(&state, &cfg.request_times, &cfg.ctl, with_tracer.then_some(&init.tracer))?;
    let mut w = RunWriter::create(out)?;
    let p = cfg.grid.phys_n();
    for (s, snap) in traj.snapshots.iter().enumerate() {
        let eta = crate::spectral::inverse_transform(&snap.eta)?;
        w.write_field(&snapshot_name(FieldKind::Vorticity, s), &FieldFile::square(FieldKind::Vorticity, p, snap.time, eta)?)?;
        if let Some(tr) = &snap.tracer {
            let values = crate::spectral::inverse_transform(tr)?;
            w.write_field(&snapshot_name(FieldKind::Tracer, s), &FieldFile::square(FieldKind::Tracer, p, snap.time, values)?)?;
        }
    }
    let (t, e): (Vec<f64>, Vec<f64>) = traj.energy_log.iter().copied().unzip();
    w.write_series("energy.csv", &Table::from_columns(&["t", "E"], &[t, e])?)?;
    let mut single = cfg.clone();
    single.samples = 1;
    w.finish("run", Some(&single), Vec::new())?;
    Ok(format!("{} snapshots, {} steps -> {}", traj.snapshots.len(), traj.steps, out.display()))
}

fn moment_files(m: &MomentFields) -> [(FieldKind, Vec<f64>); 6] {
    [
        (FieldKind::MeanX, m.mean[0].clone()),
        (FieldKind::MeanY, m.mean[1].clone()),
        (FieldKind::SecondXx, m.second[0].clone()),
        (FieldKind::SecondXy, m.second[1].clone()),
        (FieldKind::SecondYy, m.second[2].clone()),
        (FieldKind::Variance, m.variance.clone()),
    ]
}

fn cmd_ensemble(config: &Path, samples: Option<usize>, workers: usize, out: &Path) -> Result<String> {
    let mut cfg = load_config(config)?;
    if let Some(m) = samples {
        cfg.samples = m;
    }
    cfg.validate()?;
    let result = run_ensemble(&cfg, workers)?;
    let mut w = RunWriter::create(out)?;
    let p = cfg.grid.phys_n();
    for (s, m) in all_moments(&result.accumulator)?.iter().enumerate() {
        for (kind, data) in moment_files(m) {
            w.write_field(&snapshot_name(kind, s), &FieldFile::square(kind, p, m.time, data)?)?;
        }
    }
    let mut points = Table::new(&["probe", "x1", "x2", "i", "j"]);
    let mut values = Table::new(&["probe", "sample", "time", "v1", "v2"]);
    for (pi, rec) in result.probes.iter().enumerate() {
        points.push(vec![pi as f64, rec.point.0, rec.point.1, rec.node.0 as f64, rec.node.1 as f64])?;
        for (row, summary) in rec.values.iter().zip(&result.summaries) {
            for (t, v) in rec.times.iter().zip(row) {
                values.push(vec![pi as f64, summary.index as f64, *t, v[0], v[1]])?;
            }
        }
    }
    w.write_series("probe_points.csv", &points)?;
    w.write_series("probes.csv", &values)?;
    let mut energy = Table::new(&["sample", "t", "E"]);
    for s in &result.summaries {
        for &(t, e) in &s.energy_log {
            energy.push(vec![s.index as f64, t, e])?;
        }
    }
    w.write_series("sample_energy.csv", &energy)?;
    for r in &result.retained {
        for (s, f) in r.snapshots.iter().enumerate() {
            let (u, v) = f.to_grid()?;
            let t = cfg.request_times[s];
            w.write_field(&retained_name(FieldKind::VelocityX, r.index, s), &FieldFile::square(FieldKind::VelocityX, p, t, u)?)?;
            w.write_field(&retained_name(FieldKind::VelocityY, r.index, s), &FieldFile::square(FieldKind::VelocityY, p, t, v)?)?;
        }
    }
    let failed = result.failed.len();
    w.finish("ensemble", Some(&cfg), result.failed)?;
    Ok(format!(
        "{} samples ({} failed) on {} workers -> {}",
        result.accumulator.count,
        failed,
        workers,
        out.display()
    ))
}

struct RunDir {
    dir: PathBuf,
    manifest: RunManifest,
    cfg: EnsembleConfig,
}

impl RunDir {
    fn open(dir: &Path) -> Result<Self> {
        if !dir.join(crate::io::MANIFEST_NAME).is_file() {
            return Err(Error::Manifest(format!("{} has no manifest", dir.display())));
        }
        let manifest = read_manifest(dir)?;
        let cfg = manifest.ensemble_config()?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            cfg,
        })
    }

    fn require(&self, command: &str) -> Result<()> {
        if self.manifest.command != command {
            return Err(Error::Manifest(format!(
                "{} was produced by `{}`, expected `{command}`",
                self.dir.display(),
                self.manifest.command
            )));
        }
        Ok(())
    }

    fn field(&self, name: &str) -> Result<FieldFile> {
        if self.manifest.artifact(name).is_none() {
            return Err(Error::Manifest(format!("{} lists no artifact {name}", self.dir.display())));
        }
        let f = read_field(&self.dir.join(name))?;
        let p = self.cfg.grid.phys_n();
        if f.n1 != p || f.n2 != p {
            return Err(Error::GridMismatch(format!("{name} is {}x{}, expected {p}x{p}", f.n1, f.n2)));
        }
        Ok(f)
    }

    fn times(&self) -> &[f64] {
        &self.cfg.request_times
    }

    fn moments(&self, s: usize) -> Result<MomentFields> {
        let p = self.cfg.grid.phys_n();
        let get = |k: FieldKind| self.field(&snapshot_name(k, s)).map(|f| f.data);
        let mean = [get(FieldKind::MeanX)?, get(FieldKind::MeanY)?];
        let second = [get(FieldKind::SecondXx)?, get(FieldKind::SecondXy)?, get(FieldKind::SecondYy)?];
        Ok(MomentFields {
            phys_n: p,
            count: self.cfg.samples - self.manifest.failed.len(),
            time: self.times()[s],
            mean,
            second,
            variance: get(FieldKind::Variance)?,
        })
    }

    /// Velocity at snapshot `s`: the sample itself for single runs, the mean for ensembles.
    fn velocity(&self, s: usize) -> Result<VelocityField> {
        match self.manifest.command.as_str() {
            "run" => {
                let f = self.field(&snapshot_name(FieldKind::Vorticity, s))?;
                Ok(biot_savart(&forward_transform(&f.data, &self.cfg.grid)?))
            }
            "ensemble" => {
                let u = self.field(&snapshot_name(FieldKind::MeanX, s))?;
                let v = self.field(&snapshot_name(FieldKind::MeanY, s))?;
                let (u, v) = forward_transform_pair(&u.data, &v.data, &self.cfg.grid)?;
                VelocityField::new(u, v)
            }
            other => Err(Error::Manifest(format!("`{other}` directories carry no velocity snapshots"))),
        }
    }

    fn probes(&self) -> Result<Vec<ProbeRecord>> {
        let points = read_series(&self.dir.join("probe_points.csv"))?;
        let values = read_series(&self.dir.join("probes.csv"))?;
        let times = self.times().to_vec();
        let nt = times.len();
        let mut records: Vec<ProbeRecord> = points
            .rows
            .iter()
            .map(|r| ProbeRecord {
                point: (r[1], r[2]),
                node: (r[3] as usize, r[4] as usize),
                times: times.clone(),
                values: Vec::new(),
            })
            .collect();
        for chunk in values.rows.chunks(nt) {
            let probe = chunk[0][0] as usize;
            let rec = records
                .get_mut(probe)
                .ok_or_else(|| Error::Manifest(format!("probe index {probe} out of range")))?;
            rec.values.push(chunk.iter().map(|r| [r[3], r[4]]).collect());
        }
        Ok(records)
    }

    fn retained_indices(&self) -> Vec<u64> {
        let mut idx: Vec<u64> = self
            .manifest
            .artifacts
            .iter()
            .filter_map(|a| a.path.strip_prefix("retained/velocity_x_k"))
            .filter(|rest| rest.ends_with("_000.mvsf"))
            .filter_map(|rest| rest[..5].parse().ok())
            .collect();
        idx.sort_unstable();
        idx
    }
}

fn same_times(a: &RunDir, b: &RunDir) -> Result<()> {
    if a.times() != b.times() {
        return Err(Error::Manifest(format!(
            "snapshot times differ: {:?} vs {:?}",
            a.times(),
            b.times()
        )));
    }
    Ok(())
}

fn cmd_stats(run: &Path, x1: f64, out: &Path) -> Result<String> {
    let dir = RunDir::open(run)?;
    dir.require("ensemble")?;
    let mut w = RunWriter::create(out)?;
    let p = dir.cfg.grid.phys_n();
    let mut table = Table::new(&[
        "time",
        "integrated_variance",
        "mean_x_l2",
        "mean_y_l2",
        "mean_y_standard_error",
        "x1_deviation_l2",
        "mean_standard_error",
    ]);
    for s in 0..dir.times().len() {
        let m = dir.moments(s)?;
        let deviation: Vec<f64> = (0..2)
            .flat_map(|c| {
                let avg = x1_average(&m.mean[c], p);
                m.mean[c].iter().zip(avg).map(|(a, b)| a - b).collect::<Vec<_>>()
            })
            .collect();
        table.push(vec![
            m.time,
            integrated_variance(&m),
            grid_l2_norm(&m.mean[0], p),
            grid_l2_norm(&m.mean[1], p),
            m.mean_standard_error(&[1]),
            grid_l2_norm(&deviation, p),
            m.mean_standard_error(&[0, 1]),
        ])?;
        let cut = |v: &[f64]| slice(v, p, x1);
        let (mx, my, var) = (cut(&m.mean[0]), cut(&m.mean[1]), cut(&m.variance));
        let mut sl = Table::new(&["x2", "mean_x", "mean_y", "variance"]);
        for i in 0..p {
            sl.push(vec![mx[i].0, mx[i].1, my[i].1, var[i].1])?;
        }
        w.write_series(&format!("slice_{s:03}.csv"), &sl)?;
    }
    w.write_series("moments.csv", &table)?;
    w.finish("stats", Some(&dir.cfg), Vec::new())?;
    Ok(format!("moment summaries for {} snapshots -> {}", dir.times().len(), out.display()))
}

fn cmd_cauchy(a: &Path, b: &Path, out: &Path) -> Result<String> {
    let (da, db) = (RunDir::open(a)?, RunDir::open(b)?);
    if da.manifest.command != db.manifest.command {
        return Err(Error::Manifest(format!(
            "cannot compare a `{}` directory with a `{}` directory",
            da.manifest.command, db.manifest.command
        )));
    }
    same_times(&da, &db)?;
    let mut table = Table::new(&["time", "cauchy_rate"]);
    for (s, &t) in da.times().iter().enumerate() {
        table.push(vec![t, cauchy_rate(&da.velocity(s)?, &db.velocity(s)?)])?;
    }
    crate::io::write_series(out, &table)?;
    Ok(render_rows(&table))
}

fn render_rows(t: &Table) -> String {
    t.rows
        .iter()
        .map(|r| r.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join("  "))
        .collect::<Vec<_>>()
        .join("\n")
}

fn retained_samples(dir: &RunDir, indices: &[u64], s: usize, points: &[(f64, f64)]) -> Result<PointSamples> {
    let grid: GridSpec = dir.cfg.grid;
    let p = grid.phys_n();
    let mut out = vec![Vec::with_capacity(indices.len()); points.len()];
    for &k in indices {
        let u = dir.field(&retained_name(FieldKind::VelocityX, k, s))?;
        let v = dir.field(&retained_name(FieldKind::VelocityY, k, s))?;
        for (slot, &(x1, x2)) in out.iter_mut().zip(points) {
            let (i, j) = grid.nearest_node(x1, x2);
            slot.push([u.data[i * p + j], v.data[i * p + j]]);
        }
    }
    Ok(out)
}

fn cmd_wasserstein(a: &Path, b: &Path, stride: usize, force_probes: bool, out: &Path) -> Result<String> {
    let (da, db) = (RunDir::open(a)?, RunDir::open(b)?);
    da.require("ensemble")?;
    db.require("ensemble")?;
    same_times(&da, &db)?;
    let (ra, rb) = (da.retained_indices(), db.retained_indices());
    let use_fields = !force_probes && !ra.is_empty() && !rb.is_empty();
    let mut table = Table::new(&["time", "mean_w1"]);
    if use_fields {
        if ra.len() != rb.len() {
            return Err(Error::SampleCountMismatch(ra.len(), rb.len()));
        }
        let coarse = if da.cfg.grid.phys_n() <= db.cfg.grid.phys_n() { &da } else { &db };
        let points = crate::statistics::strided_points(&coarse.cfg.grid, stride);
        for (s, &t) in da.times().iter().enumerate() {
            let sa = retained_samples(&da, &ra, s, &points)?;
            let sb = retained_samples(&db, &rb, s, &points)?;
            table.push(vec![t, mean_wasserstein(&sa, &sb)?])?;
        }
    } else {
        let (pa, pb) = (da.probes()?, db.probes()?);
        if pa.is_empty() || pa.iter().map(|r| r.point).ne(pb.iter().map(|r| r.point)) {
            return Err(Error::Manifest("the runs have no common probe points and no retained fields".into()));
        }
        for (s, &t) in da.times().iter().enumerate() {
            let sa = crate::statistics::probe_samples(&pa, s);
            let sb = crate::statistics::probe_samples(&pb, s);
            table.push(vec![t, mean_wasserstein(&sa, &sb)?])?;
        }
    }
    crate::io::write_series(out, &table)?;
    Ok(render_rows(&table))
}

fn cmd_probe(run: &Path, index: usize, time_index: usize, component: usize, bins: usize, out: &Path) -> Result<String> {
    let dir = RunDir::open(run)?;
    dir.require("ensemble")?;
    let probes = dir.probes()?;
    let rec = probes
        .get(index)
        .ok_or_else(|| Error::config("--index", format!("run has {} probes", probes.len())))?;
    let h = histogram_at(rec, time_index, component, bins)?;
    let mut table = Table::new(&["lo", "hi", "count"]);
    for (b, &c) in h.counts.iter().enumerate() {
        table.push(vec![h.edges[b], h.edges[b + 1], c as f64])?;
    }
    crate::io::write_series(out, &table)?;
    Ok(format!("{} values in {} bins -> {}", rec.values.len(), bins, out.display()))
}

fn cmd_spread(run: &Path, window: (f64, f64), out: &Path) -> Result<String> {
    let dir = RunDir::open(run)?;
    dir.require("ensemble")?;
    let moments: Vec<MomentFields> = (0..dir.times().len()).map(|s| dir.moments(s)).collect::<Result<_>>()?;
    let series = avg_variance_series(&moments, window)?;
    let report = variance_bound_check(&series);
    let mut w = RunWriter::create(out)?;
    w.write_series(
        "spread.csv",
        &Table::from_columns(&["time", "integrated_variance"], &[series.times.clone(), series.values.clone()])?,
    )?;
    w.write_json(
        "spread_report.json",
        &serde_json::json!({
            "window": [series.window.0, series.window.1],
            "slope": series.slope,
            "intercept": series.intercept,
            "bound": report,
        }),
    )?;
    w.finish("spread", Some(&dir.cfg), Vec::new())?;
    Ok(format!(
        "slope {:.6} over [{}, {}]; bound check {}",
        series.slope,
        window.0,
        window.1,
        if report.passed { "passed" } else { "FAILED" }
    ))
}

/// Config documents of a named experiment, keyed by file stem.
pub fn preset_configs(name: &str, scale: Scale) -> Result<Vec<(String, ConfigDocument)>> {
    let paper = scale == Scale::Paper;
    let resolutions: Vec<usize> = if paper { vec![128, 256, 512, 1024] } else { vec![32, 64, 128] };
    let fine = if paper { 512 } else { DESK_MAX_N };
    let ensemble_m = if paper { 400 } else { DESK_MAX_M };
    let doc = |kind: DatumKind, n: usize, m: usize, delta: f64, rho: f64, times: Vec<f64>| {
        let mut spec = InitialDataSpec::new(kind, delta, rho, 1);
        if kind != DatumKind::FlatSheet {
            spec.rho = 0.0;
        }
        let grid = GridSpec::with_cutoff(n)?;
        let mut cfg = EnsembleConfig::new(spec, m, grid, times);
        cfg.probes = vec![(2.0 * PI * 0.25, 2.0 * PI * 0.77)];
        let mut d = ConfigDocument::from_config(&cfg);
        d.phys_n = None;
        Ok::<_, Error>(d)
    };
    let two = vec![0.0, 0.5, 1.0, 1.5, 2.0];
    let docs = match name {
        "vortex-patch" => resolutions
            .iter()
            .map(|&n| Ok((format!("{name}_N{n}"), doc(DatumKind::VortexPatch, n, 1, 0.0128, 0.0, two.clone())?)))
            .collect::<Result<Vec<_>>>()?,
        "sheet-single" => resolutions
            .iter()
            .map(|&n| Ok((format!("{name}_N{n}"), doc(DatumKind::FlatSheet, n, 1, 0.01, 0.001, two.clone())?)))
            .collect::<Result<Vec<_>>>()?,
        "sheet-ensemble" => resolutions
            .iter()
            .map(|&n| {
                Ok((
                    format!("{name}_N{n}"),
                    doc(DatumKind::FlatSheet, n, ensemble_m, 0.01, 0.001, two.clone())?,
                ))
            })
            .collect::<Result<Vec<_>>>()?,
        "delta-family" => DELTA_FAMILY
            .iter()
            .map(|&d| {
                Ok((
                    format!("{name}_delta{d}"),
                    doc(DatumKind::FlatSheet, fine, ensemble_m, d, 0.001, two.clone())?,
                ))
            })
            .collect::<Result<Vec<_>>>()?,
        "sign-separation" => DELTA_FAMILY
            .iter()
            .map(|&d| {
                Ok((
                    format!("{name}_delta{d}"),
                    doc(DatumKind::FlatSheet, fine, 1, d, 0.008, vec![0.0, 1.0, 2.0, 3.0, 4.0])?,
                ))
            })
            .collect::<Result<Vec<_>>>()?,
        _ => {
            return Err(Error::config(
                "preset",
                format!("unknown preset `{name}`; available: {}", PRESETS.join(", ")),
            ))
        }
    };
    Ok(docs)
}

fn cmd_preset(name: &str, out: &Path, scale: Scale) -> Result<String> {
    let docs = preset_configs(name, scale)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    for (stem, doc) in docs {
        let path = out.join(format!("{stem}.json"));
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        crate::io::write_atomic(&path, text.as_bytes())?;
        written.push(path.display().to_string());
    }
    Ok(written.join("\n"))
}
