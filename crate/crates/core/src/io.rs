//! On-disk formats: binary field files, CSV series, JSON run configs and run
//! manifests. All writes go through a temporary file that is renamed into place.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::{EnsembleConfig, FailedSample};
use crate::error::{Error, Result};
use crate::initial::{DatumKind, InitialDataSpec, PerturbationKind};
use crate::solver::StepControl;
use crate::spectral::{GridSpec, ViscositySpec};

pub const FIELD_MAGIC: &[u8] = b"MVSF1\n";
pub const MANIFEST_NAME: &str = "manifest.json";
pub const TOOL_NAME: &str = "mvs";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Vorticity,
    VelocityX,
    VelocityY,
    Tracer,
    MeanX,
    MeanY,
    SecondXx,
    SecondXy,
    SecondYy,
    Variance,
}

impl FieldKind {
    pub const ALL: [FieldKind; 10] = [
        FieldKind::Vorticity,
        FieldKind::VelocityX,
        FieldKind::VelocityY,
        FieldKind::Tracer,
        FieldKind::MeanX,
        FieldKind::MeanY,
        FieldKind::SecondXx,
        FieldKind::SecondXy,
        FieldKind::SecondYy,
        FieldKind::Variance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Vorticity => "vorticity",
            FieldKind::VelocityX => "velocity_x",
            FieldKind::VelocityY => "velocity_y",
            FieldKind::Tracer => "tracer",
            FieldKind::MeanX => "mean_x",
            FieldKind::MeanY => "mean_y",
            FieldKind::SecondXx => "second_xx",
            FieldKind::SecondXy => "second_xy",
            FieldKind::SecondYy => "second_yy",
            FieldKind::Variance => "variance",
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FieldKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// A real field on an `n1 × n2` grid; `data[i * n1 + j]` sits at
/// `x = (2πj/n1, 2πi/n2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub kind: FieldKind,
    pub n1: usize,
    pub n2: usize,
    pub time: f64,
    pub data: Vec<f64>,
}

impl FieldFile {
    pub fn square(kind: FieldKind, n: usize, time: f64, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: data.len(),
            });
        }
        Ok(Self {
            kind,
            n1: n,
            n2: n,
            time,
            data,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = format!("{} {} {} {}\n", self.kind, self.n1, self.n2, self.time);
        let mut out = Vec::with_capacity(FIELD_MAGIC.len() + header.len() + 8 * self.data.len());
        out.extend_from_slice(FIELD_MAGIC);
        out.extend_from_slice(header.as_bytes());
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let rest = bytes.strip_prefix(FIELD_MAGIC).ok_or(Error::BadMagic)?;
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::BadHeader("missing header line".into()))?;
        let header = std::str::from_utf8(&rest[..end]).map_err(|_| Error::BadHeader("header is not ASCII".into()))?;
        let tokens: Vec<&str> = header.split(' ').collect();
        let [kind, n1, n2, time] = tokens[..] else {
            return Err(Error::BadHeader(format!("expected `kind n1 n2 time`, got `{header}`")));
        };
        let kind: FieldKind = kind.parse()?;
        let parse_n = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::BadHeader(format!("bad dimension `{s}`")))
        };
        let (n1, n2) = (parse_n(n1)?, parse_n(n2)?);
        let time: f64 = time.parse().map_err(|_| Error::BadHeader(format!("bad time `{time}`")))?;
        let payload = &rest[end + 1..];
        let expected = n1
            .checked_mul(n2)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::BadHeader("dimensions overflow".into()))?;
        if payload.len() != expected {
            return Err(Error::Truncated {
                expected,
                found: payload.len(),
            });
        }
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Self {
            kind,
            n1,
            n2,
            time,
            data,
        })
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_field(path: &Path, field: &FieldFile) -> Result<()> {
    write_atomic(path, &field.encode())
}

pub fn read_field(path: &Path) -> Result<FieldFile> {
    FieldFile::decode(&read_bytes(path)?)
}

/// Labeled numeric columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn from_columns(headers: &[&str], columns: &[Vec<f64>]) -> Result<Self> {
        if headers.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: headers.len(),
                actual: columns.len(),
            });
        }
        let len = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: bad.len(),
            });
        }
        let rows = (0..len).map(|r| columns.iter().map(|c| c[r]).collect()).collect();
        Ok(Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows,
        })
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.headers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.headers.len(),
                actual: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Csv {
            line: 0,
            reason: e.to_string(),
        };
        w.write_record(&self.headers).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format_real(*x))).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Csv {
            line: 0,
            reason: e.to_string(),
        })
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let headers = r
            .headers()
            .map_err(|e| Error::Csv {
                line: 1,
                reason: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Csv {
                line: e.position().map_or(0, |p| p.line() as usize),
                reason: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::Csv {
                        line,
                        reason: format!("not a number: `{s}`"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }
}

/// 17 significant digits; parses back to the same `f64`.
pub fn format_real(x: f64) -> String {
    if x == 0.0 && x.is_sign_positive() {
        "0".to_string()
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn write_series(path: &Path, table: &Table) -> Result<()> {
    write_atomic(path, &table.encode()?)
}

pub fn read_series(path: &Path) -> Result<Table> {
    Table::decode(&read_bytes(path)?)
}

fn default_samples() -> usize {
    1
}

fn default_epsilon() -> f64 {
    ViscositySpec::default().epsilon
}

fn default_cfl() -> f64 {
    StepControl::default().cfl
}

fn default_perturbation() -> PerturbationKind {
    PerturbationKind::Sinusoidal
}

/// The JSON run-config document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub kind: DatumKind,
    #[serde(rename = "N")]
    pub cutoff: usize,
    #[serde(rename = "M", default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub times: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    #[serde(default = "default_perturbation")]
    pub perturbation: PerturbationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phys_n: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub m: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retain_stride: Option<usize>,
}

impl ConfigDocument {
    pub fn into_config(self) -> Result<EnsembleConfig> {
        let grid = match self.phys_n {
            Some(p) => GridSpec::new(self.cutoff, p).map_err(|e| Error::config("phys_n", e.to_string()))?,
            None => GridSpec::with_cutoff(self.cutoff).map_err(|e| Error::config("N", e.to_string()))?,
        };
        let rho = match (self.kind, self.rho) {
            (_, Some(r)) => r,
            (DatumKind::FlatSheet, None) => return Err(Error::config("rho", "required for flat_sheet")),
            (_, None) => 0.0,
        };
        let base = InitialDataSpec {
            kind: self.kind,
            delta: self.delta,
            rho,
            modes: self.modes.unwrap_or_else(|| self.kind.default_modes()),
            perturbation: self.perturbation,
            seed: self.seed,
        };
        let cfg = EnsembleConfig {
            base,
            samples: self.samples,
            grid,
            visc: ViscositySpec {
                epsilon: self.epsilon,
                m: self.m,
            },
            ctl: StepControl {
                cfl: self.cfl,
                dt_max: self.dt_max,
                dt_fixed: self.dt,
            },
            request_times: self.times,
            probes: self.probes.iter().map(|p| (p[0], p[1])).collect(),
            base_seed: self.seed,
            retain_stride: self.retain_stride,
            advection: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_config(cfg: &EnsembleConfig) -> Self {
        Self {
            kind: cfg.base.kind,
            cutoff: cfg.grid.cutoff(),
            samples: cfg.samples,
            delta: cfg.base.delta,
            rho: (cfg.base.kind == DatumKind::FlatSheet || cfg.base.rho != 0.0).then_some(cfg.base.rho),
            times: cfg.request_times.clone(),
            seed: cfg.base_seed,
            modes: Some(cfg.base.modes),
            perturbation: cfg.base.perturbation,
            phys_n: Some(cfg.grid.phys_n()),
            epsilon: cfg.visc.epsilon,
            m: cfg.visc.m,
            cfl: cfg.ctl.cfl,
            dt_max: cfg.ctl.dt_max,
            dt: cfg.ctl.dt_fixed,
            probes: cfg.probes.iter().map(|&(a, b)| [a, b]).collect(),
            retain_stride: cfg.retain_stride,
        }
    }
}

/// Parses and validates a JSON run config, applying defaults.
pub fn parse_config(text: &str) -> Result<EnsembleConfig> {
    let doc: ConfigDocument = serde_json::from_str(text)?;
    doc.into_config()
}

pub fn config_to_json(cfg: &EnsembleConfig) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ConfigDocument::from_config(cfg))?)
}

pub fn read_config(path: &Path) -> Result<EnsembleConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// `run`, `ensemble`, or the statistics subcommand that produced the directory.
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_seed: Option<u64>,
    #[serde(default)]
    pub sample_seeds: Vec<[u64; 2]>,
    #[serde(default)]
    pub failed: Vec<FailedSample>,
    pub artifacts: Vec<ArtifactEntry>,
    /// Seconds since the Unix epoch; the only non-reproducible entry.
    pub created: u64,
}

impl RunManifest {
    pub fn artifact(&self, name: &str) -> Option<&ArtifactEntry> {
        self.artifacts.iter().find(|a| a.path == name)
    }

    pub fn ensemble_config(&self) -> Result<EnsembleConfig> {
        self.config
            .clone()
            .ok_or_else(|| Error::Manifest("manifest carries no run config".into()))?
            .into_config()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects artifacts of a run directory; the manifest is written last.
pub struct RunWriter {
    dir: PathBuf,
    artifacts: Vec<ArtifactEntry>,
}

impl RunWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.artifacts.retain(|a| a.path != name);
        self.artifacts.push(ArtifactEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_field(&mut self, name: &str, field: &FieldFile) -> Result<()> {
        self.write_bytes(name, &field.encode())
    }

    pub fn write_series(&mut self, name: &str, table: &Table) -> Result<()> {
        self.write_bytes(name, &table.encode()?)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn finish(self, command: &str, cfg: Option<&EnsembleConfig>, failed: Vec<FailedSample>) -> Result<RunManifest> {
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let manifest = RunManifest {
            tool: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: cfg.map(ConfigDocument::from_config),
            base_seed: cfg.map(|c| c.base_seed),
            sample_seeds: cfg.map_or(Vec::new(), |c| (0..c.samples as u64).map(|k| [c.base_seed, k]).collect()),
            failed,
            artifacts: self.artifacts,
            created,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST_NAME), text.as_bytes())?;
        Ok(manifest)
    }
}

/// Reads a run manifest and checks every artifact against its checksum.
pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    for a in &manifest.artifacts {
        let p = dir.join(&a.path);
        let bytes = fs::read(&p).map_err(|_| Error::Manifest(format!("missing artifact {}", a.path)))?;
        if sha256_hex(&bytes) != a.sha256 {
            return Err(Error::Manifest(format!("checksum mismatch for {}", a.path)));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn field_round_trip_is_byte_exact() {
        let data: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin() * 1e-3 + f64::EPSILON * i as f64).collect();
        let f = FieldFile {
            kind: FieldKind::SecondXy,
            n1: 4,
            n2: 3,
            time: 0.1 + 0.2,
            data,
        };
        let bytes = f.encode();
        let back = FieldFile::decode(&bytes).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.encode(), bytes);
        assert!(bytes.starts_with(b"MVSF1\nsecond_xy 4 3 0.30000000000000004\n"));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.mvsf");
        write_field(&path, &f).unwrap();
        assert_eq!(fs::read(&path).unwrap(), bytes);
        assert_eq!(read_field(&path).unwrap(), f);
    }

    #[test]
    fn field_decode_errors() {
        let f = FieldFile::square(FieldKind::Vorticity, 2, 1.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = f.encode();
        assert!(matches!(
            FieldFile::decode(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated { expected: 32, found: 29 })
        ));
        assert!(matches!(FieldFile::decode(b"MVSF2\n"), Err(Error::BadMagic)));
        match FieldFile::decode(b"MVSF1\nvelocity_z 1 1 0\n\0\0\0\0\0\0\0\0") {
            Err(Error::UnknownKind(k)) => assert_eq!(k, "velocity_z"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(FieldFile::decode(b"MVSF1\nvorticity 1 1\n"), Err(Error::BadHeader(_))));
        assert!(FieldFile::square(FieldKind::Tracer, 3, 0.0, vec![0.0; 8]).is_err());
    }

    #[test]
    fn every_kind_parses() {
        for k in FieldKind::ALL {
            assert_eq!(k.as_str().parse::<FieldKind>().unwrap(), k);
        }
    }

    #[test]
    fn series_examples() {
        let t = Table::from_columns(&["t", "E"], &[vec![0.0], vec![1.0]]).unwrap();
        let text = String::from_utf8(t.encode().unwrap()).unwrap();
        assert_eq!(text, "t,E\n0,1.0000000000000000e0\n");
        assert_eq!(Table::decode(text.as_bytes()).unwrap(), t);
        let empty = Table::new(&["a", "b"]);
        assert_eq!(empty.encode().unwrap(), b"a,b\n");
        assert_eq!(Table::decode(b"a,b\n").unwrap(), empty);
        match Table::decode(b"a,b\n1,2\n3\n") {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(Table::from_columns(&["a", "b"], &[vec![1.0], vec![]]).is_err());
    }

    proptest! {
        #[test]
        fn series_round_trip(values in proptest::collection::vec(any::<f64>(), 0..40)) {
            let finite: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
            let t = Table::from_columns(&["x"], &[finite.clone()]).unwrap();
            let back = Table::decode(&t.encode().unwrap()).unwrap();
            let col = back.column("x").unwrap();
            prop_assert_eq!(col.len(), finite.len());
            for (a, b) in col.iter().zip(&finite) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn field_round_trip(data in proptest::collection::vec(any::<f64>(), 9), time in any::<f64>()) {
            let f = FieldFile::square(FieldKind::Variance, 3, time, data).unwrap();
            let back = FieldFile::decode(&f.encode()).unwrap();
            prop_assert_eq!(back.encode(), f.encode());
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(r#"{"kind":"flat_sheet","N":64,"M":10,"delta":0.05,"rho":0.01,"times":[2],"seed":7}"#)
            .unwrap();
        assert_eq!(cfg.grid.cutoff(), 64);
        assert_eq!(cfg.grid.phys_n(), 200);
        assert_eq!(cfg.samples, 10);
        assert_eq!(cfg.visc, ViscositySpec { epsilon: 1e-5, m: 0 });
        assert_eq!(cfg.ctl.cfl, 0.5);
        assert_eq!(cfg.base.modes, 10);
        assert_eq!(cfg.base_seed, 7);
        assert_eq!(cfg.request_times, vec![2.0]);
        let patch = parse_config(r#"{"kind":"vortex_patch","N":32,"times":[0,1]}"#).unwrap();
        assert_eq!(patch.base.modes, 20);
        assert_eq!(patch.samples, 1);
    }

    fn config_error_key(text: &str) -> String {
        match parse_config(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_errors_name_keys() {
        let base = r#""kind":"flat_sheet","N":64,"M":10,"rho":0.01,"seed":7"#;
        assert_eq!(config_error_key(&format!(r#"{{{base},"delta":-1,"times":[2]}}"#)), "delta");
        assert_eq!(config_error_key(&format!(r#"{{{base},"times":[2,1]}}"#)), "times[1]");
        assert_eq!(config_error_key(r#"{"kind":"flat_sheet","N":64,"times":[1]}"#), "rho");
        assert_eq!(config_error_key(r#"{"kind":"vortex_patch","N":64,"M":0,"times":[1]}"#), "M");
        assert_eq!(config_error_key(r#"{"kind":"vortex_patch","N":2,"times":[1]}"#), "N");
        assert_eq!(config_error_key(r#"{"kind":"vortex_patch","N":8,"m":9,"times":[1]}"#), "m");
        let unknown = parse_config(r#"{"kind":"vortex_patch","N":8,"times":[1],"colour":1}"#).unwrap_err();
        assert!(unknown.is_validation());
        assert!(unknown.to_string().contains("colour"));
    }

    #[test]
    fn config_round_trip() {
        let cfg = parse_config(
            r#"{"kind":"flat_sheet","N":32,"M":4,"delta":0.05,"rho":0.05,"times":[0.5,1],"seed":3,
                "perturbation":"gaussian_localized","phys_n":112,"dt_max":0.01,"probes":[[1.5,4.8]],"retain_stride":2}"#,
        )
        .unwrap();
        let text = config_to_json(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
        let patch = parse_config(r#"{"kind":"vortex_patch","N":32,"times":[0,1]}"#).unwrap();
        assert_eq!(parse_config(&config_to_json(&patch).unwrap()).unwrap(), patch);
    }

    #[test]
    fn manifest_checks_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(r#"{"kind":"vortex_patch","N":8,"M":2,"times":[1]}"#).unwrap();
        let mut w = RunWriter::create(dir.path()).unwrap();
        w.write_series("a.csv", &Table::from_columns(&["t"], &[vec![1.0]]).unwrap()).unwrap();
        w.write_field("b.mvsf", &FieldFile::square(FieldKind::Vorticity, 1, 0.0, vec![2.0]).unwrap())
            .unwrap();
        let m = w.finish("ensemble", Some(&cfg), Vec::new()).unwrap();
        assert_eq!(m.sample_seeds, vec![[0, 0], [0, 1]]);
        let back = read_manifest(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.ensemble_config().unwrap(), cfg);
        fs::write(dir.path().join("a.csv"), "t\n2\n").unwrap();
        assert!(matches!(read_manifest(dir.path()), Err(Error::Manifest(_))));
        fs::remove_file(dir.path().join("b.mvsf")).unwrap();
        assert!(read_manifest(dir.path()).is_err());
    }
}
