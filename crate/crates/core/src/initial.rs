//! Initial data and their random perturbations.
//!
//! Every generator is a pure function of `(spec, seed, sample index)`:
//! randomness comes from [`SampleRng`], a ChaCha stream keyed by the seed and
//! sample index, with one independent stream per kind of draw.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    biot_savart, curl, forward_transform, forward_transform_pair, leray_project, Complex64, GridSpec,
    SpectralField, VelocityField,
};

/// Patch side length, in mesh cells, of the piecewise-constant perturbations.
pub const PATCH_CELLS: usize = 16;
/// Width `w` of the Gaussian cutoffs localizing perturbations at the interfaces.
pub const LOCALIZATION_WIDTH: f64 = 0.2;
/// The localizing cutoffs are set to zero beyond this many widths.
pub const LOCALIZATION_SUPPORT: f64 = 5.0;

const PATCH_BASE_MODE: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatumKind {
    VortexPatch,
    FlatSheet,
    TaylorGreen,
}

impl DatumKind {
    pub fn default_modes(self) -> usize {
        match self {
            DatumKind::VortexPatch => 20,
            DatumKind::FlatSheet => 10,
            DatumKind::TaylorGreen => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Sinusoidal,
    Uncorrelated,
    UniformLocalized,
    GaussianLocalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellDistribution {
    Uniform,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    pub kind: DatumKind,
    pub delta: f64,
    pub rho: f64,
    pub modes: usize,
    pub perturbation: PerturbationKind,
    pub seed: u64,
}

impl InitialDataSpec {
    pub fn new(kind: DatumKind, delta: f64, rho: f64, seed: u64) -> Self {
        Self {
            kind,
            delta,
            rho,
            modes: kind.default_modes(),
            perturbation: PerturbationKind::Sinusoidal,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::config("delta", format!("must be >= 0, got {}", self.delta)));
        }
        if self.kind == DatumKind::FlatSheet && !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::config("rho", format!("must be > 0, got {}", self.rho)));
        }
        if self.modes == 0 {
            return Err(Error::config("K", "must be >= 1"));
        }
        if self.kind != DatumKind::FlatSheet && self.perturbation != PerturbationKind::Sinusoidal {
            return Err(Error::config(
                "perturbation",
                "cell perturbations are only defined for the flat sheet",
            ));
        }
        Ok(())
    }
}

/// Purposes of the independent random streams of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum DrawStream {
    Amplitudes = 0,
    Cells = 1,
}

/// ChaCha20 keyed by `(seed, sample_index)`, positioned on the stream of one draw.
pub struct SampleRng(ChaCha20Rng);

impl SampleRng {
    pub fn new(seed: u64, sample_index: u64, stream: DrawStream) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&sample_index.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(stream as u64);
        SampleRng(rng)
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.0
    }
}

/// Renormalized amplitudes and phases of a trigonometric perturbation.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationDraw {
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl PerturbationDraw {
    pub fn zero(modes: usize) -> Self {
        Self {
            amplitudes: vec![0.0; modes],
            phases: vec![0.0; modes],
        }
    }

    /// `Σ_k a_k sin(k_j θ + b_k)` with mode numbers `k_j = offset + j`, `j = 1..=K`.
    fn trig_sum(&self, offset: usize, theta: f64, sign: f64) -> f64 {
        self.amplitudes
            .iter()
            .zip(&self.phases)
            .enumerate()
            .map(|(j, (a, b))| a * ((offset + j + 1) as f64 * theta + sign * b).sin())
            .sum()
    }

    /// Patch radius offset `Σ a_k sin(b_k + (20 + k) θ)`.
    pub fn patch_offset(&self, theta: f64) -> f64 {
        self.trig_sum(PATCH_BASE_MODE, theta, 1.0)
    }

    /// Interface displacement `p_δ(x1) = Σ α_k sin(k x1 − β_k)`.
    pub fn interface_offset(&self, x1: f64) -> f64 {
        self.trig_sum(0, x1, -1.0)
    }
}

/// Draws `K` amplitudes and phases and rescales them so `Σ a_k² = δ`.
pub fn draw_perturbation(spec: &InitialDataSpec, rng: &mut SampleRng) -> Result<PerturbationDraw> {
    for _ in 0..2 {
        let raw = raw_draw(spec, rng.rng());
        let total: f64 = raw.amplitudes.iter().map(|a| a * a).sum();
        if total > 0.0 {
            let scale = (spec.delta / total).sqrt();
            return Ok(PerturbationDraw {
                amplitudes: raw.amplitudes.iter().map(|a| a * scale).collect(),
                phases: raw.phases,
            });
        }
    }
    Err(Error::DegenerateDraw)
}

fn raw_draw<R: Rng>(spec: &InitialDataSpec, rng: &mut R) -> PerturbationDraw {
    let k = spec.modes;
    let (lo, hi) = match spec.kind {
        DatumKind::FlatSheet => (-1.0, 1.0),
        _ => (0.0, 1.0),
    };
    let mut amplitudes = Vec::with_capacity(k);
    let mut phases = Vec::with_capacity(k);
    for _ in 0..k {
        amplitudes.push(rng.random_range(lo..hi));
        phases.push(rng.random_range(0.0..2.0 * PI));
    }
    PerturbationDraw { amplitudes, phases }
}

/// Indicator of the perturbed disk sampled on the physical grid.
pub fn patch_indicator(draw: &PerturbationDraw, grid: &GridSpec) -> Vec<f64> {
    let radius = FRAC_PI_2.sqrt();
    grid.sample(|x1, x2| {
        let (dx, dy) = (x1 - PI, x2 - PI);
        let r = (dx * dx + dy * dy).sqrt();
        let theta = dy.atan2(dx);
        if r <= radius + draw.patch_offset(theta) {
            1.0
        } else {
            0.0
        }
    })
}

/// Vorticity of the perturbed vortex patch, mean removed and truncated to the band.
pub fn vortex_patch(draw: &PerturbationDraw, grid: &GridSpec) -> Result<SpectralField> {
    let mut eta = forward_transform(&patch_indicator(draw, grid), grid)?;
    eta.remove_mean();
    Ok(eta)
}

/// Mollified sheet profile: `+1` outside `(π/2, 3π/2]`, `-1` inside.
pub fn sheet_profile(x2: f64, rho: f64) -> f64 {
    let y = x2.rem_euclid(2.0 * PI);
    if y <= PI {
        ((FRAC_PI_2 - y) / rho).tanh()
    } else {
        ((y - 3.0 * FRAC_PI_2) / rho).tanh()
    }
}

/// Leray-projected velocity of the mollified flat sheet with displaced interfaces.
pub fn flat_sheet_velocity(spec: &InitialDataSpec, draw: &PerturbationDraw, grid: &GridSpec) -> Result<VelocityField> {
    let samples = grid.sample(|x1, x2| sheet_profile(x2 - draw.interface_offset(x1), spec.rho));
    let u = forward_transform(&samples, grid)?;
    leray_project(&u, &SpectralField::zeros(*grid))
}

/// Banded tracer: `+1` between the displaced interfaces, `-1` outside.
pub fn sheet_tracer(spec: &InitialDataSpec, draw: &PerturbationDraw, grid: &GridSpec) -> Result<SpectralField> {
    let samples = grid.sample(|x1, x2| -sheet_profile(x2 - draw.interface_offset(x1), spec.rho));
    forward_transform(&samples, grid)
}

/// `exp(-d²/(2w²))` summed over both interfaces, zero beyond `5w`.
pub fn interface_cutoff(x2: f64) -> f64 {
    let w = LOCALIZATION_WIDTH;
    [FRAC_PI_2, 3.0 * FRAC_PI_2]
        .iter()
        .map(|c| {
            let d = x2 - c;
            if d.abs() > LOCALIZATION_SUPPORT * w {
                0.0
            } else {
                (-d * d / (2.0 * w * w)).exp()
            }
        })
        .sum()
}

/// Piecewise-constant random field on `16 × 16`-cell patches, before scaling.
pub fn cell_field(
    rng: &mut SampleRng,
    grid: &GridSpec,
    distribution: CellDistribution,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = grid.phys_n();
    if p % PATCH_CELLS != 0 {
        return Err(Error::config(
            "phys_n",
            format!("{p} is not divisible by the patch size {PATCH_CELLS}"),
        ));
    }
    let cells = p / PATCH_CELLS;
    let mut values = Vec::with_capacity(cells * cells);
    for _ in 0..cells * cells {
        let mut draw = || match distribution {
            CellDistribution::Uniform => rng.rng().random_range(-1.0..=1.0),
            CellDistribution::Gaussian => {
                let z: f64 = rng.rng().sample(StandardNormal);
                z.clamp(-3.0, 3.0)
            }
        };
        let a = draw();
        let b = draw();
        values.push([a, b]);
    }
    let mut x = Vec::with_capacity(p * p);
    let mut y = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            let cell = values[(i / PATCH_CELLS) * cells + j / PATCH_CELLS];
            x.push(cell[0]);
            y.push(cell[1]);
        }
    }
    Ok((x, y))
}

/// Unprojected cell perturbation `δ X` (optionally localized at the interfaces).
pub fn cell_perturbation(
    spec: &InitialDataSpec,
    rng: &mut SampleRng,
    grid: &GridSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (distribution, localized) = match spec.perturbation {
        PerturbationKind::Uncorrelated => (CellDistribution::Uniform, false),
        PerturbationKind::UniformLocalized => (CellDistribution::Uniform, true),
        PerturbationKind::GaussianLocalized => (CellDistribution::Gaussian, true),
        PerturbationKind::Sinusoidal => {
            return Err(Error::config("perturbation", "sinusoidal perturbations have no cell field"))
        }
    };
    let (mut x, mut y) = cell_field(rng, grid, distribution)?;
    let p = grid.phys_n();
    for i in 0..p {
        let (_, x2) = grid.node(i, 0);
        let scale = if localized { spec.delta * interface_cutoff(x2) } else { spec.delta };
        for j in 0..p {
            x[i * p + j] *= scale;
            y[i * p + j] *= scale;
        }
    }
    Ok((x, y))
}

/// Leray projection of the unperturbed mollified sheet plus a cell perturbation.
pub fn cell_perturbed_sheet(spec: &InitialDataSpec, rng: &mut SampleRng, grid: &GridSpec) -> Result<VelocityField> {
    let (mut x, y) = cell_perturbation(spec, rng, grid)?;
    let base = grid.sample(|_, x2| sheet_profile(x2, spec.rho));
    for (xi, b) in x.iter_mut().zip(&base) {
        *xi += b;
    }
    let (u, v) = forward_transform_pair(&x, &y, grid)?;
    leray_project(&u, &v)
}

/// `η = sin x1 sin x2`.
pub fn taylor_green(grid: &GridSpec) -> SpectralField {
    let mut eta = SpectralField::zeros(*grid);
    eta.set_hermitian(1, 1, Complex64::new(-0.25, 0.0));
    eta.set_hermitian(1, -1, Complex64::new(0.25, 0.0));
    eta
}

/// Initial vorticity of one sample and the passive tracer that goes with it.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialState {
    pub eta: SpectralField,
    pub tracer: SpectralField,
}

/// Builds sample `sample_index` of the random initial datum described by `spec`.
pub fn realize(spec: &InitialDataSpec, grid: &GridSpec, sample_index: u64) -> Result<InitialState> {
    spec.validate()?;
    let mut amp_rng = SampleRng::new(spec.seed, sample_index, DrawStream::Amplitudes);
    match spec.kind {
        DatumKind::TaylorGreen => {
            let eta = taylor_green(grid);
            Ok(InitialState {
                tracer: eta.clone(),
                eta,
            })
        }
        DatumKind::VortexPatch => {
            let draw = draw_perturbation(spec, &mut amp_rng)?;
            let tracer = forward_transform(&patch_indicator(&draw, grid), grid)?;
            let mut eta = tracer.clone();
            eta.remove_mean();
            Ok(InitialState { eta, tracer })
        }
        DatumKind::FlatSheet => match spec.perturbation {
            PerturbationKind::Sinusoidal => {
                let draw = draw_perturbation(spec, &mut amp_rng)?;
                let vel = flat_sheet_velocity(spec, &draw, grid)?;
                Ok(InitialState {
                    eta: curl(&vel),
                    tracer: sheet_tracer(spec, &draw, grid)?,
                })
            }
            _ => {
                let mut cell_rng = SampleRng::new(spec.seed, sample_index, DrawStream::Cells);
                let vel = cell_perturbed_sheet(spec, &mut cell_rng, grid)?;
                let zero = PerturbationDraw::zero(spec.modes);
                Ok(InitialState {
                    eta: curl(&vel),
                    tracer: sheet_tracer(spec, &zero, grid)?,
                })
            }
        },
    }
}

/// Initial velocity of one sample.
pub fn realize_velocity(spec: &InitialDataSpec, grid: &GridSpec, sample_index: u64) -> Result<VelocityField> {
    Ok(biot_savart(&realize(spec, grid, sample_index)?.eta))
}
