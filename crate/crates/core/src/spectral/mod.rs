//! Fourier representation of real periodic fields on `[0, 2π]²`.
//!
//! Coefficients follow `v̂_k = (2π)⁻² ∫ v e^{-ik·x} dx` and are kept on the
//! square band `max(|k1|, |k2|) ≤ N`. Physical samples live on a padded
//! `phys_n × phys_n` grid, row-major with `x2` as the slow index, so that
//! quadratic products of band-`N` fields are evaluated without aliasing.

mod transform;

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

pub use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI_SQ: f64 = 4.0 * PI * PI;
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Relative tolerance for the Hermitian check done before inverse transforms.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Spectral cutoff `N` and the size of the padded physical grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    cutoff: usize,
    phys_n: usize,
}

impl GridSpec {
    /// Validates `cutoff ≥ 4`, `phys_n` even and `phys_n > 3 * cutoff`.
    pub fn new(cutoff: usize, phys_n: usize) -> Result<Self> {
        if cutoff < 4 {
            return Err(Error::InvalidGrid(format!("cutoff {cutoff} < 4")));
        }
        if phys_n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("phys_n {phys_n} is odd")));
        }
        if phys_n <= 3 * cutoff {
            return Err(Error::InvalidGrid(format!(
                "phys_n {phys_n} must exceed 3 * cutoff = {} for alias-free products",
                3 * cutoff
            )));
        }
        Ok(Self { cutoff, phys_n })
    }

    /// Grid with the smallest even, 5-smooth `phys_n > 3 * cutoff`.
    pub fn with_cutoff(cutoff: usize) -> Result<Self> {
        Self::new(cutoff, default_phys_n(cutoff))
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn phys_n(&self) -> usize {
        self.phys_n
    }

    /// Number of modes per axis, `2N + 1`.
    pub fn modes(&self) -> usize {
        2 * self.cutoff + 1
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.phys_n as f64
    }

    pub fn grid_len(&self) -> usize {
        self.phys_n * self.phys_n
    }

    #[inline]
    pub fn index(&self, k1: i64, k2: i64) -> usize {
        let n = self.cutoff as i64;
        debug_assert!(k1.abs() <= n && k2.abs() <= n);
        ((k2 + n) as usize) * self.modes() + (k1 + n) as usize
    }

    /// Wavevectors of the band in storage order.
    pub fn wavevectors(&self) -> impl Iterator<Item = (i64, i64)> {
        let n = self.cutoff as i64;
        (-n..=n).flat_map(move |k2| (-n..=n).map(move |k1| (k1, k2)))
    }

    /// Physical coordinates `(x1, x2)` of grid node `(i, j)`; `i` indexes `x2`.
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.spacing();
        (h * j as f64, h * i as f64)
    }

    /// Nearest grid node `(i, j)` to a point, with periodic wrap.
    pub fn nearest_node(&self, x1: f64, x2: f64) -> (usize, usize) {
        let h = self.spacing();
        let p = self.phys_n as i64;
        let j = ((x1 / h).round() as i64).rem_euclid(p) as usize;
        let i = ((x2 / h).round() as i64).rem_euclid(p) as usize;
        (i, j)
    }

    /// Samples `f(x1, x2)` on the physical grid.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let p = self.phys_n;
        let mut out = Vec::with_capacity(p * p);
        for i in 0..p {
            for j in 0..p {
                let (x1, x2) = self.node(i, j);
                out.push(f(x1, x2));
            }
        }
        out
    }
}

fn default_phys_n(cutoff: usize) -> usize {
    let mut n = 3 * cutoff + 1;
    loop {
        if n % 2 == 0 && is_smooth(n) {
            return n;
        }
        n += 1;
    }
}

fn is_smooth(mut n: usize) -> bool {
    for f in [2, 3, 5] {
        while n % f == 0 {
            n /= f;
        }
    }
    n == 1
}

/// Low-mode cutoff `m` and amplitude `ε` of the spectral viscosity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViscositySpec {
    pub epsilon: f64,
    pub m: usize,
}

impl Default for ViscositySpec {
    fn default() -> Self {
        Self { epsilon: 1e-5, m: 0 }
    }
}

impl ViscositySpec {
    pub fn new(epsilon: f64, m: usize, grid: &GridSpec) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::config("epsilon", format!("must be a finite value >= 0, got {epsilon}")));
        }
        if m > grid.cutoff() {
            return Err(Error::config(
                "m",
                format!("low-mode cutoff {m} exceeds spectral cutoff {}", grid.cutoff()),
            ));
        }
        Ok(Self { epsilon, m })
    }

    pub fn inviscid() -> Self {
        Self { epsilon: 0.0, m: 0 }
    }

    /// `m = ⌊√N⌋`, `ε = 1/N`.
    pub fn tadmor(grid: &GridSpec) -> Self {
        let n = grid.cutoff();
        Self {
            epsilon: 1.0 / n as f64,
            m: (n as f64).sqrt().floor() as usize,
        }
    }

    /// Whether mode `k` is damped, i.e. lies outside the low band `|k|∞ ≤ m`.
    #[inline]
    pub fn acts_on(&self, k1: i64, k2: i64) -> bool {
        k1.unsigned_abs().max(k2.unsigned_abs()) as usize > self.m
    }
}

/// Fourier coefficients of a real scalar field on the band `|k|∞ ≤ N`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        let len = grid.modes() * grid.modes();
        Self {
            grid,
            coeffs: vec![ZERO; len],
        }
    }

    /// Wraps a coefficient vector in band storage order.
    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        let expected = grid.modes() * grid.modes();
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at `k`, zero outside the band.
    pub fn get(&self, k1: i64, k2: i64) -> Complex64 {
        let n = self.grid.cutoff as i64;
        if k1.abs() > n || k2.abs() > n {
            return ZERO;
        }
        self.coeffs[self.grid.index(k1, k2)]
    }

    /// Sets `coeff(k) = c` and `coeff(-k) = conj(c)`.
    pub fn set_hermitian(&mut self, k1: i64, k2: i64, c: Complex64) {
        let i = self.grid.index(k1, k2);
        let j = self.grid.index(-k1, -k2);
        if i == j {
            self.coeffs[i] = Complex64::new(c.re, 0.0);
        } else {
            self.coeffs[i] = c;
            self.coeffs[j] = c.conj();
        }
    }

    pub fn mean(&self) -> Complex64 {
        self.get(0, 0)
    }

    pub fn remove_mean(&mut self) {
        let i = self.grid.index(0, 0);
        self.coeffs[i] = ZERO;
    }

    /// `max_k |coeff(k) - conj(coeff(-k))|`.
    pub fn hermitian_asymmetry(&self) -> f64 {
        // storage order is point-symmetric: index(-k) = len - 1 - index(k)
        self.coeffs
            .iter()
            .zip(self.coeffs.iter().rev())
            .map(|(a, b)| (a - b.conj()).norm_sqr())
            .fold(0.0, f64::max)
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max).sqrt()
    }

    /// `∫ |f|² dx` by Parseval.
    pub fn l2_norm_sq(&self) -> f64 {
        TWO_PI_SQ * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Applies `f(k1, k2, coeff)` to every mode.
    pub fn map_modes(&self, f: impl Fn(i64, i64, Complex64) -> Complex64) -> Self {
        let n = self.grid.cutoff as i64;
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        let mut it = self.coeffs.iter();
        for k2 in -n..=n {
            for k1 in -n..=n {
                let c = *it.next().expect("band storage");
                coeffs.push(f(k1, k2, c));
            }
        }
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        debug_assert_eq!(self.grid, other.grid);
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &SpectralField, b: f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| x * a + y * b)
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map_modes(|_, _, c| c * a)
    }

    pub fn partial_x1(&self) -> Self {
        self.map_modes(|k1, _, c| c * Complex64::new(0.0, k1 as f64))
    }

    pub fn partial_x2(&self) -> Self {
        self.map_modes(|_, k2, c| c * Complex64::new(0.0, k2 as f64))
    }

    /// Re-expresses the field on another grid, zero-padding or truncating the band.
    pub fn resample(&self, grid: GridSpec) -> Self {
        let mut out = SpectralField::zeros(grid);
        let n = grid.cutoff.min(self.grid.cutoff) as i64;
        for k2 in -n..=n {
            for k1 in -n..=n {
                let i = grid.index(k1, k2);
                out.coeffs[i] = self.get(k1, k2);
            }
        }
        out
    }
}

impl Add<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.lincomb(1.0, rhs, 1.0)
    }
}

impl Sub<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.lincomb(1.0, rhs, -1.0)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

/// Two-component velocity in Fourier space.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub u: SpectralField,
    pub v: SpectralField,
}

impl VelocityField {
    pub fn new(u: SpectralField, v: SpectralField) -> Result<Self> {
        if u.grid != v.grid {
            return Err(Error::GridMismatch(
                "velocity components on different grids".into(),
            ));
        }
        Ok(Self { u, v })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            u: SpectralField::zeros(grid),
            v: SpectralField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.u.grid
    }

    /// `max_k |k · v̂_k|`.
    pub fn divergence_residual(&self) -> f64 {
        self.grid()
            .wavevectors()
            .map(|(k1, k2)| (self.u.get(k1, k2) * k1 as f64 + self.v.get(k1, k2) * k2 as f64).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.v.max_abs())
    }

    pub fn lincomb(&self, a: f64, other: &VelocityField, b: f64) -> Self {
        Self {
            u: self.u.lincomb(a, &other.u, b),
            v: self.v.lincomb(a, &other.v, b),
        }
    }

    pub fn resample(&self, grid: GridSpec) -> Self {
        Self {
            u: self.u.resample(grid),
            v: self.v.resample(grid),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// Both components on the physical grid.
    pub fn to_grid(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        inverse_transform_pair(&self.u, &self.v)
    }
}

/// Forward transform of real grid samples, truncated to the band of `grid`.
pub fn forward_transform(samples: &[f64], grid: &GridSpec) -> Result<SpectralField> {
    check_len(samples, grid)?;
    let packed = transform::grid_to_band(grid, samples, None);
    Ok(unpack_pair(grid, &packed).0)
}

/// Forward transform of two real fields sharing one complex FFT.
pub fn forward_transform_pair(
    f: &[f64],
    g: &[f64],
    grid: &GridSpec,
) -> Result<(SpectralField, SpectralField)> {
    check_len(f, grid)?;
    check_len(g, grid)?;
    let packed = transform::grid_to_band(grid, f, Some(g));
    Ok(unpack_pair(grid, &packed))
}

/// Grid values of a band-limited real field.
pub fn inverse_transform(field: &SpectralField) -> Result<Vec<f64>> {
    check_hermitian(field)?;
    let (f, _) = transform::band_to_grid(&field.grid, &field.coeffs);
    Ok(f)
}

/// Inverse transform of two fields sharing one complex FFT.
pub fn inverse_transform_pair(a: &SpectralField, b: &SpectralField) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch("pair transform on different grids".into()));
    }
    check_hermitian(a)?;
    check_hermitian(b)?;
    let packed: Vec<Complex64> = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| x + Complex64::new(0.0, 1.0) * y)
        .collect();
    Ok(transform::band_to_grid(&a.grid, &packed))
}

/// Grid values of `(∂1 f, ∂2 f)`, packed into one transform.
pub fn gradient_to_grid(field: &SpectralField) -> Result<(Vec<f64>, Vec<f64>)> {
    check_hermitian(field)?;
    // ∂1 f + i ∂2 f = (i k1 - k2) f
    let packed = field
        .map_modes(|k1, k2, c| c * Complex64::new(-(k2 as f64), k1 as f64))
        .coeffs;
    Ok(transform::band_to_grid(&field.grid, &packed))
}

/// Grid values of the Biot–Savart velocity of `eta` without forming it in Fourier space.
pub fn velocity_to_grid(eta: &SpectralField) -> Result<(Vec<f64>, Vec<f64>)> {
    check_hermitian(eta)?;
    // v1 + i v2 = -(k1 + i k2) ψ with ψ = -η / |k|²
    let packed = eta
        .map_modes(|k1, k2, c| {
            if k1 == 0 && k2 == 0 {
                ZERO
            } else {
                c * Complex64::new(k1 as f64, k2 as f64) / (k1 * k1 + k2 * k2) as f64
            }
        })
        .coeffs;
    Ok(transform::band_to_grid(&eta.grid, &packed))
}

fn check_len(samples: &[f64], grid: &GridSpec) -> Result<()> {
    if samples.len() != grid.grid_len() {
        return Err(Error::DimensionMismatch {
            expected: grid.grid_len(),
            actual: samples.len(),
        });
    }
    Ok(())
}

fn check_hermitian(field: &SpectralField) -> Result<()> {
    let asym = field.hermitian_asymmetry();
    let tol = HERMITIAN_TOL * field.max_abs().max(f64::MIN_POSITIVE);
    if asym > tol {
        return Err(Error::HermitianViolation {
            asymmetry: asym,
            tolerance: tol,
        });
    }
    Ok(())
}

/// Splits packed `Z = F + iG` into exactly Hermitian `F` and `G`.
fn unpack_pair(grid: &GridSpec, packed: &[Complex64]) -> (SpectralField, SpectralField) {
    let mut f = SpectralField::zeros(*grid);
    let mut g = SpectralField::zeros(*grid);
    let half = Complex64::new(0.5, 0.0);
    let minus_half_i = Complex64::new(0.0, -0.5);
    for (k1, k2) in grid.wavevectors() {
        let z = packed[grid.index(k1, k2)];
        let zc = packed[grid.index(-k1, -k2)].conj();
        let i = grid.index(k1, k2);
        f.coeffs[i] = (z + zc) * half;
        g.coeffs[i] = (z - zc) * minus_half_i;
    }
    (f, g)
}

/// Zeroes modes with `|k|∞ > new_cutoff`, keeping the grid.
pub fn truncate(field: &SpectralField, new_cutoff: usize) -> SpectralField {
    let n = new_cutoff as i64;
    field.map_modes(|k1, k2, c| if k1.abs() > n || k2.abs() > n { ZERO } else { c })
}

/// Removes the component of each coefficient along its wavevector; `k = 0` is zeroed.
pub fn leray_project(w1: &SpectralField, w2: &SpectralField) -> Result<VelocityField> {
    if w1.grid != w2.grid {
        return Err(Error::GridMismatch("leray_project components on different grids".into()));
    }
    let grid = w1.grid;
    let mut u = SpectralField::zeros(grid);
    let mut v = SpectralField::zeros(grid);
    for (k1, k2) in grid.wavevectors() {
        if k1 == 0 && k2 == 0 {
            continue;
        }
        let i = grid.index(k1, k2);
        let (a, b) = (w1.coeffs[i], w2.coeffs[i]);
        let (kf1, kf2) = (k1 as f64, k2 as f64);
        let along = (a * kf1 + b * kf2) / (kf1 * kf1 + kf2 * kf2);
        u.coeffs[i] = a - along * kf1;
        v.coeffs[i] = b - along * kf2;
    }
    Ok(VelocityField { u, v })
}

/// Applies `Q = I - P_m`: zeroes every mode with `|k|∞ ≤ m`.
pub fn high_mode_filter(field: &SpectralField, visc: &ViscositySpec) -> SpectralField {
    field.map_modes(|k1, k2, c| if visc.acts_on(k1, k2) { c } else { ZERO })
}

/// Velocity `∇⊥ψ` with `Δψ = η` and `ψ` mean-free.
pub fn biot_savart(eta: &SpectralField) -> VelocityField {
    let psi = stream_function(eta);
    VelocityField {
        u: psi.map_modes(|_, k2, c| c * Complex64::new(0.0, -(k2 as f64))),
        v: psi.map_modes(|k1, _, c| c * Complex64::new(0.0, k1 as f64)),
    }
}

/// Mean-free solution of `Δψ = η`.
pub fn stream_function(eta: &SpectralField) -> SpectralField {
    eta.map_modes(|k1, k2, c| {
        if k1 == 0 && k2 == 0 {
            ZERO
        } else {
            -c / (k1 * k1 + k2 * k2) as f64
        }
    })
}

/// `η = ∂1 v2 − ∂2 v1`.
pub fn curl(vel: &VelocityField) -> SpectralField {
    let grid = *vel.grid();
    let coeffs = grid
        .wavevectors()
        .map(|(k1, k2)| {
            let i = grid.index(k1, k2);
            Complex64::new(0.0, 1.0) * (vel.v.coeffs[i] * k1 as f64 - vel.u.coeffs[i] * k2 as f64)
        })
        .collect();
    SpectralField { grid, coeffs }
}

/// `½ ∫ |v|² dx`.
pub fn kinetic_energy(vel: &VelocityField) -> f64 {
    0.5 * (vel.u.l2_norm_sq() + vel.v.l2_norm_sq())
}

/// Squared distance `‖a − b‖²_{L²}`, with the coarser field zero-padded.
pub fn l2_distance_sq(a: &VelocityField, b: &VelocityField) -> f64 {
    let (fine, coarse) = if a.grid().cutoff() >= b.grid().cutoff() {
        (a, b)
    } else {
        (b, a)
    };
    let padded = coarse.resample(*fine.grid());
    kinetic_energy(&fine.lincomb(1.0, &padded, -1.0)) * 2.0
}
