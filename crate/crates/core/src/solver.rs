//! Semi-discrete spectral viscosity scheme in vorticity form, advanced with
//! the three-stage SSP Runge–Kutta method, plus the velocity-form twin used
//! for cross-checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    biot_savart, forward_transform, forward_transform_pair, gradient_to_grid, kinetic_energy, leray_project,
    velocity_to_grid, GridSpec, SpectralField, VelocityField, ViscositySpec,
};

/// Vorticity `η_N` at time `t` together with the viscosity it evolves under.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub eta: SpectralField,
    pub time: f64,
    pub visc: ViscositySpec,
    /// `false` drops the transport term, leaving the linear viscous dynamics.
    /// Only used to build exactly solvable ensembles in tests.
    pub advection: bool,
}

impl FlowState {
    /// The mean mode of `eta` is pinned to zero.
    pub fn new(mut eta: SpectralField, time: f64, visc: ViscositySpec) -> Self {
        eta.remove_mean();
        Self {
            eta,
            time,
            visc,
            advection: true,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.eta.grid()
    }

    pub fn velocity(&self) -> VelocityField {
        biot_savart(&self.eta)
    }

    pub fn energy(&self) -> f64 {
        kinetic_energy(&self.velocity())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub cfl: f64,
    pub dt_max: Option<f64>,
    pub dt_fixed: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            dt_max: None,
            dt_fixed: None,
        }
    }
}

impl StepControl {
    pub fn fixed(dt: f64) -> Self {
        Self {
            dt_fixed: Some(dt),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config("cfl", format!("must lie in (0, 1], got {}", self.cfl)));
        }
        for (key, value) in [("dt_max", self.dt_max), ("dt_fixed", self.dt_fixed)] {
            if let Some(dt) = value {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(Error::config(key, format!("must be positive, got {dt}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub eta: SpectralField,
    pub tracer: Option<SpectralField>,
}

impl Snapshot {
    pub fn velocity(&self) -> VelocityField {
        biot_savart(&self.eta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub request_times: Vec<f64>,
    /// `(t, E(t))` after every accepted step, starting with the initial state.
    pub energy_log: Vec<(f64, f64)>,
    pub steps: usize,
}

/// Linear structure needed by the Runge–Kutta stages.
pub trait RkState: Sized {
    /// `a * self + b * other`.
    fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self;
}

impl RkState for SpectralField {
    fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        SpectralField::lincomb(self, a, other, b)
    }
}

impl RkState for VelocityField {
    fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        VelocityField::lincomb(self, a, other, b)
    }
}

impl RkState for f64 {
    fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        a * self + b * other
    }
}

/// One Shu–Osher SSP-RK3 step. `first` may carry an already evaluated `L(u)`.
pub fn ssp_rk3<S, F>(u: &S, dt: f64, first: Option<S>, mut rhs: F) -> Result<S>
where
    S: RkState,
    F: FnMut(&S) -> Result<S>,
{
    let l0 = match first {
        Some(l) => l,
        None => rhs(u)?,
    };
    let u1 = u.lincomb(1.0, &l0, dt);
    let l1 = rhs(&u1)?;
    let u2 = u.lincomb(0.75, &u1.lincomb(1.0, &l1, dt), 0.25);
    let l2 = rhs(&u2)?;
    Ok(u.lincomb(1.0 / 3.0, &u2.lincomb(1.0, &l2, dt), 2.0 / 3.0))
}

#[derive(Clone, Debug)]
struct Coupled {
    eta: SpectralField,
    tracer: Option<SpectralField>,
}

impl RkState for Coupled {
    fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        Coupled {
            eta: self.eta.lincomb(a, &other.eta, b),
            tracer: match (&self.tracer, &other.tracer) {
                (Some(x), Some(y)) => Some(x.lincomb(a, y, b)),
                _ => None,
            },
        }
    }
}

/// `ε div(Q ∇f)`, i.e. `-ε |k|²` on modes outside the low band.
fn viscous_term(field: &SpectralField, visc: &ViscositySpec) -> SpectralField {
    let eps = visc.epsilon;
    field.map_modes(|k1, k2, c| {
        if eps > 0.0 && visc.acts_on(k1, k2) {
            c * (-eps * (k1 * k1 + k2 * k2) as f64)
        } else {
            c * 0.0
        }
    })
}

fn max_speed(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| a * a + b * b)
        .fold(0.0, f64::max)
        .sqrt()
}

/// Pointwise `u ∂1f + v ∂2f` on the padded grid.
fn transport_product(u: &[f64], v: &[f64], field: &SpectralField) -> Result<Vec<f64>> {
    let (fx, fy) = gradient_to_grid(field)?;
    Ok((0..u.len()).map(|i| u[i] * fx[i] + v[i] * fy[i]).collect())
}

/// Tendencies of `(η, φ)` and the maximum speed of the velocity they were built from.
fn coupled_tendency(state: &Coupled, visc: &ViscositySpec, advection: bool) -> Result<(Coupled, f64)> {
    let grid = *state.eta.grid();
    let (u, v) = velocity_to_grid(&state.eta)?;
    let vmax = max_speed(&u, &v);

    let mut eta_rhs = viscous_term(&state.eta, visc);
    let mut tracer_rhs = state.tracer.as_ref().map(|t| viscous_term(t, visc));

    if advection {
        let eta_adv = transport_product(&u, &v, &state.eta)?;
        let (mut adv_eta, adv_tracer) = match &state.tracer {
            Some(t) => {
                let tr_adv = transport_product(&u, &v, t)?;
                let (a, b) = forward_transform_pair(&eta_adv, &tr_adv, &grid)?;
                (a, Some(b))
            }
            None => (forward_transform(&eta_adv, &grid)?, None),
        };
        adv_eta.remove_mean();
        eta_rhs.axpy(-1.0, &adv_eta);
        if let (Some(rhs), Some(adv)) = (tracer_rhs.as_mut(), adv_tracer.as_ref()) {
            rhs.axpy(-1.0, adv);
        }
    }
    eta_rhs.remove_mean();
    Ok((
        Coupled {
            eta: eta_rhs,
            tracer: tracer_rhs,
        },
        vmax,
    ))
}

/// `-P_N(v_N · ∇η_N) + ε div(Q ∇η_N)` with `v_N` from the Biot–Savart law.
pub fn rhs_vorticity(state: &FlowState) -> Result<SpectralField> {
    let coupled = Coupled {
        eta: state.eta.clone(),
        tracer: None,
    };
    Ok(coupled_tendency(&coupled, &state.visc, state.advection)?.0.eta)
}

/// `-P_N(v · ∇v) + ε div(Q ∇v)` with `P_N` the Leray projection onto the band.
pub fn rhs_velocity(vel: &VelocityField, visc: &ViscositySpec) -> Result<VelocityField> {
    let grid = *vel.grid();
    let (u, v) = vel.to_grid()?;
    let a1 = transport_product(&u, &v, &vel.u)?;
    let a2 = transport_product(&u, &v, &vel.v)?;
    let (n1, n2) = forward_transform_pair(&a1, &a2, &grid)?;
    let projected = leray_project(&n1, &n2)?;
    let mut out = VelocityField {
        u: viscous_term(&vel.u, visc),
        v: viscous_term(&vel.v, visc),
    };
    out.u.axpy(-1.0, &projected.u);
    out.v.axpy(-1.0, &projected.v);
    out.u.remove_mean();
    out.v.remove_mean();
    Ok(out)
}

/// One SSP-RK3 step of the vorticity scheme.
pub fn ssp_rk3_step(state: &FlowState, dt: f64) -> Result<FlowState> {
    let coupled = Coupled {
        eta: state.eta.clone(),
        tracer: None,
    };
    let next = step_coupled(&coupled, state, dt, None)?;
    Ok(FlowState {
        eta: next.eta,
        time: state.time + dt,
        ..state.clone()
    })
}

fn step_coupled(u: &Coupled, state: &FlowState, dt: f64, first: Option<Coupled>) -> Result<Coupled> {
    let next = ssp_rk3(u, dt, first, |s| {
        Ok(coupled_tendency(s, &state.visc, state.advection)?.0)
    })?;
    let finite = next.eta.is_finite() && next.tracer.as_ref().is_none_or(|t| t.is_finite());
    if !finite {
        return Err(Error::Diverged {
            time: state.time + dt,
        });
    }
    Ok(next)
}

/// One SSP-RK3 step of the velocity-form scheme.
pub fn velocity_rk3_step(vel: &VelocityField, visc: &ViscositySpec, dt: f64) -> Result<VelocityField> {
    let next = ssp_rk3(vel, dt, None, |s| rhs_velocity(s, visc))?;
    if !next.is_finite() {
        return Err(Error::Diverged { time: f64::NAN });
    }
    Ok(next)
}

fn dt_from_bounds(
    grid: &GridSpec,
    visc: &ViscositySpec,
    ctl: &StepControl,
    vmax: f64,
    remaining: Option<f64>,
) -> f64 {
    let mut dt = match ctl.dt_fixed {
        Some(dt) => dt,
        None => {
            let h = grid.spacing();
            let mut dt = ctl.cfl * h / vmax.max(1e-8);
            if visc.epsilon > 0.0 {
                dt = dt.min(h * h / (4.0 * visc.epsilon));
            }
            if let Some(cap) = ctl.dt_max {
                dt = dt.min(cap);
            }
            dt
        }
    };
    if let Some(rem) = remaining {
        dt = dt.min(rem);
    }
    dt
}

/// Stable step size for `state`, capped by the time left to the next snapshot.
pub fn choose_dt(state: &FlowState, ctl: &StepControl, time_to_snapshot: Option<f64>) -> Result<f64> {
    let (u, v) = state.velocity().to_grid()?;
    Ok(dt_from_bounds(
        state.grid(),
        &state.visc,
        ctl,
        max_speed(&u, &v),
        time_to_snapshot,
    ))
}

/// Advances `state` (and an optional passive tracer), recording a snapshot at
/// each requested time. Steps are shortened to land exactly on those times.
pub fn advance(
    state: &FlowState,
    request_times: &[f64],
    ctl: &StepControl,
    tracer: Option<&SpectralField>,
) -> Result<Trajectory> {
    ctl.validate()?;
    validate_times(state.time, request_times)?;
    if let Some(t) = tracer {
        if t.grid() != state.grid() {
            return Err(Error::GridMismatch("tracer and vorticity grids differ".into()));
        }
    }

    let mut current = Coupled {
        eta: state.eta.clone(),
        tracer: tracer.cloned(),
    };
    let mut time = state.time;
    let mut snapshots = Vec::with_capacity(request_times.len());
    let mut energy_log = vec![(time, kinetic_energy(&biot_savart(&current.eta)))];
    let mut steps = 0;

    for &target in request_times {
        while time < target {
            let (l0, vmax) = coupled_tendency(&current, &state.visc, state.advection)?;
            let remaining = target - time;
            let mut dt = dt_from_bounds(state.grid(), &state.visc, ctl, vmax, Some(remaining));
            // avoid leaving a sliver that would force a needlessly tiny step
            let lands = dt >= remaining * (1.0 - 1e-12);
            if lands {
                dt = remaining;
            }
            let at = FlowState {
                eta: current.eta.clone(),
                time,
                ..state.clone()
            };
            current = step_coupled(&current, &at, dt, Some(l0))?;
            time = if lands { target } else { time + dt };
            steps += 1;
            energy_log.push((time, kinetic_energy(&biot_savart(&current.eta))));
        }
        snapshots.push(Snapshot {
            time: target,
            eta: current.eta.clone(),
            tracer: current.tracer.clone(),
        });
    }

    Ok(Trajectory {
        snapshots,
        request_times: request_times.to_vec(),
        energy_log,
        steps,
    })
}

fn validate_times(start: f64, times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::config("times", "at least one snapshot time is required"));
    }
    if !times.iter().all(|t| t.is_finite()) {
        return Err(Error::config("times", "snapshot times must be finite"));
    }
    if times[0] < start {
        return Err(Error::config(
            "times[0]",
            format!("{} precedes the initial time {start}", times[0]),
        ));
    }
    if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::config(
            format!("times[{}]", i + 1),
            "snapshot times must be strictly increasing",
        ));
    }
    Ok(())
}

/// Smooth divergence-free vector test function of space and time.
pub trait TestFunction: Sync {
    /// `φ(x, t)`.
    fn value(&self, x1: f64, x2: f64, t: f64) -> [f64; 2];
    /// `∂t φ(x, t)`.
    fn time_derivative(&self, x1: f64, x2: f64, t: f64) -> [f64; 2];
    /// `g[i][j] = ∂j φ_i(x, t)`.
    fn gradient(&self, x1: f64, x2: f64, t: f64) -> [[f64; 2]; 2];
}

/// `φ = χ(t) ∇⊥ζ(x)` with `ζ = exp(sin x1 + cos x2)` and `χ` a C^∞ bump on `(t0, t1)`.
#[derive(Clone, Copy, Debug)]
pub struct BumpStreamTest {
    pub t0: f64,
    pub t1: f64,
}

impl BumpStreamTest {
    fn chi(&self, t: f64) -> (f64, f64) {
        let len = self.t1 - self.t0;
        let s = (t - self.t0) / len;
        if s <= 0.0 || s >= 1.0 {
            return (0.0, 0.0);
        }
        let q = s * (1.0 - s);
        let chi = (1.0 - 1.0 / (4.0 * q)).exp();
        let dchi = chi * (1.0 - 2.0 * s) / (4.0 * q * q) / len;
        (chi, dchi)
    }

    fn zeta(x1: f64, x2: f64) -> f64 {
        (x1.sin() + x2.cos()).exp()
    }
}

impl TestFunction for BumpStreamTest {
    fn value(&self, x1: f64, x2: f64, t: f64) -> [f64; 2] {
        let (chi, _) = self.chi(t);
        let z = Self::zeta(x1, x2);
        [chi * x2.sin() * z, chi * x1.cos() * z]
    }

    fn time_derivative(&self, x1: f64, x2: f64, t: f64) -> [f64; 2] {
        let (_, dchi) = self.chi(t);
        let z = Self::zeta(x1, x2);
        [dchi * x2.sin() * z, dchi * x1.cos() * z]
    }

    fn gradient(&self, x1: f64, x2: f64, t: f64) -> [[f64; 2]; 2] {
        let (chi, _) = self.chi(t);
        let z = chi * Self::zeta(x1, x2);
        let (s1, c1, s2, c2) = (x1.sin(), x1.cos(), x2.sin(), x2.cos());
        [
            [s2 * c1 * z, (c2 - s2 * s2) * z],
            [(c1 * c1 - s1) * z, -c1 * s2 * z],
        ]
    }
}

/// `∫∫ ∂tφ · v_N + ∇φ : v_N ⊗ v_N dx dt`: exact grid quadrature in space,
/// trapezoid rule over the snapshot times.
pub fn weak_residual(traj: &Trajectory, test_fn: &dyn TestFunction) -> Result<f64> {
    let mut samples = Vec::with_capacity(traj.snapshots.len());
    for snap in &traj.snapshots {
        let grid = *snap.eta.grid();
        let (u, v) = snap.velocity().to_grid()?;
        let p = grid.phys_n();
        let h = grid.spacing();
        let t = snap.time;
        let mut acc = 0.0;
        for i in 0..p {
            for j in 0..p {
                let (x1, x2) = grid.node(i, j);
                let idx = i * p + j;
                let vel = [u[idx], v[idx]];
                let dt_phi = test_fn.time_derivative(x1, x2, t);
                let g = test_fn.gradient(x1, x2, t);
                acc += dt_phi[0] * vel[0] + dt_phi[1] * vel[1];
                for (a, row) in g.iter().enumerate() {
                    for (b, gab) in row.iter().enumerate() {
                        acc += gab * vel[a] * vel[b];
                    }
                }
            }
        }
        samples.push((t, acc * h * h));
    }
    Ok(samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::{curl, forward_transform, Complex64};

    fn grid(n: usize) -> GridSpec {
        GridSpec::with_cutoff(n).unwrap()
    }

    fn taylor_green(g: GridSpec) -> SpectralField {
        forward_transform(&g.sample(|x1, x2| x1.sin() * x2.sin()), &g).unwrap()
    }

    fn shear(g: GridSpec) -> SpectralField {
        // vorticity of v = (tanh-like smooth profile, 0) is -f'(x2)
        forward_transform(&g.sample(|_, x2| (x2.sin() * 2.0).tanh() + 0.3 * (2.0 * x2).cos()), &g).unwrap()
    }

    #[test]
    fn taylor_green_is_stationary() {
        let state = FlowState::new(taylor_green(grid(8)), 0.0, ViscositySpec::inviscid());
        assert!(rhs_vorticity(&state).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn shear_is_stationary() {
        let state = FlowState::new(shear(grid(16)), 0.0, ViscositySpec::inviscid());
        assert!(rhs_vorticity(&state).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn viscous_rhs_on_single_mode() {
        let eps = 0.01;
        let state = FlowState::new(taylor_green(grid(8)), 0.0, ViscositySpec { epsilon: eps, m: 0 });
        let rhs = rhs_vorticity(&state).unwrap();
        let expected = state.eta.scaled(-2.0 * eps);
        assert!((&rhs - &expected).max_abs() < 1e-16);
    }

    #[test]
    fn velocity_rhs_stationary_examples() {
        let g = grid(8);
        let tg = biot_savart(&taylor_green(g));
        assert!(rhs_velocity(&tg, &ViscositySpec::inviscid()).unwrap().max_abs() < 1e-15);
        let u = forward_transform(&g.sample(|_, x2| x2.cos()), &g).unwrap();
        let sh = VelocityField::new(u, SpectralField::zeros(g)).unwrap();
        assert!(rhs_velocity(&sh, &ViscositySpec::inviscid()).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn rk3_identity_dynamics() {
        let x = 3.5_f64;
        let out = ssp_rk3(&x, 0.1, None, |_| Ok(0.0)).unwrap();
        assert!((out - x).abs() <= 1e-15 * x);

        let state = FlowState::new(taylor_green(grid(8)), 1.0, ViscositySpec::inviscid());
        let next = ssp_rk3_step(&state, 0.25).unwrap();
        assert!((&next.eta - &state.eta).max_abs() < 1e-15);
        assert_eq!(next.time, 1.25);
    }

    #[test]
    fn rk3_stability_polynomial() {
        // z = λ dt = -1  ->  1 - 1 + 1/2 - 1/6 = 1/3
        let out = ssp_rk3(&1.0_f64, 1.0, None, |u| Ok(-u)).unwrap();
        assert!((out - 1.0 / 3.0).abs() < 1e-15);
        for z in [-0.3, 0.2, -2.0] {
            let out = ssp_rk3(&1.0_f64, 1.0, None, |u| Ok(z * u)).unwrap();
            let poly = 1.0 + z + z * z / 2.0 + z * z * z / 6.0;
            assert!((out - poly).abs() < 1e-15);
        }
    }

    #[test]
    fn rk3_is_third_order() {
        // error of one step on u' = -u scales like dt^4
        let err = |dt: f64| {
            let out = ssp_rk3(&1.0_f64, dt, None, |u| Ok(-u)).unwrap();
            (out - (-dt).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn choose_dt_examples() {
        let g = grid(16);
        let zero = FlowState::new(SpectralField::zeros(g), 0.0, ViscositySpec::inviscid());
        let ctl = StepControl {
            dt_max: Some(0.3),
            ..StepControl::default()
        };
        assert_eq!(choose_dt(&zero, &ctl, Some(0.7)).unwrap(), 0.3);
        assert_eq!(choose_dt(&zero, &ctl, Some(0.1)).unwrap(), 0.1);

        let visc = ViscositySpec::inviscid();
        let g128 = GridSpec::new(40, 128).unwrap();
        let dt = dt_from_bounds(&g128, &visc, &StepControl::default(), 2.0, None);
        assert!((dt - 0.5 * (2.0 * PI / 128.0) / 2.0).abs() < 1e-15);
        assert!((dt - 0.01227).abs() < 1e-5);
        let g256 = GridSpec::new(40, 256).unwrap();
        let dt2 = dt_from_bounds(&g256, &visc, &StepControl::default(), 2.0, None);
        assert!((dt2 - dt / 2.0).abs() < 1e-16);

        let viscous = ViscositySpec { epsilon: 10.0, m: 0 };
        let h = g128.spacing();
        let dtv = dt_from_bounds(&g128, &viscous, &StepControl::default(), 2.0, None);
        assert_eq!(dtv, h * h / 40.0);
    }

    #[test]
    fn advance_single_initial_snapshot() {
        let state = FlowState::new(taylor_green(grid(8)), 0.5, ViscositySpec::default());
        let traj = advance(&state, &[0.5], &StepControl::default(), None).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.snapshots[0].eta, state.eta);
        assert_eq!(traj.steps, 0);
    }

    #[test]
    fn advance_lands_on_request_times() {
        let state = FlowState::new(shear(grid(8)), 0.0, ViscositySpec::default());
        let times = [0.1, 0.25, 0.7];
        let traj = advance(&state, &times, &StepControl::default(), None).unwrap();
        let got: Vec<f64> = traj.snapshots.iter().map(|s| s.time).collect();
        assert_eq!(got, times);
        assert_eq!(traj.energy_log.last().unwrap().0, 0.7);
    }

    #[test]
    fn advance_rejects_bad_times() {
        let state = FlowState::new(shear(grid(8)), 1.0, ViscositySpec::default());
        let ctl = StepControl::default();
        assert!(advance(&state, &[0.5], &ctl, None).is_err());
        assert!(advance(&state, &[1.5, 1.5], &ctl, None).is_err());
        assert!(advance(&state, &[], &ctl, None).is_err());
    }

    #[test]
    fn taylor_green_viscous_decay() {
        let eps = 1e-3;
        let state = FlowState::new(taylor_green(grid(16)), 0.0, ViscositySpec { epsilon: eps, m: 0 });
        let traj = advance(&state, &[1.0], &StepControl::default(), None).unwrap();
        let exact = state.eta.scaled((-2.0 * eps).exp());
        let err = (&traj.snapshots[0].eta - &exact).l2_norm_sq().sqrt();
        assert!(err <= 1e-6 * state.eta.l2_norm_sq().sqrt(), "err {err}");
    }

    #[test]
    fn tracer_follows_vorticity_when_identical() {
        // a tracer equal to η obeys the same equation as η
        let g = grid(8);
        let mut eta = forward_transform(&g.sample(|x1, x2| (x1 + 0.3).sin() * x2.cos() + (2.0 * x1).cos()), &g).unwrap();
        eta.remove_mean();
        let state = FlowState::new(eta.clone(), 0.0, ViscositySpec::default());
        let traj = advance(&state, &[0.3], &StepControl::default(), Some(&eta)).unwrap();
        let snap = &traj.snapshots[0];
        let diff = (snap.tracer.as_ref().unwrap() - &snap.eta).max_abs();
        assert!(diff < 1e-14, "{diff}");
    }

    #[test]
    fn velocity_and_vorticity_rhs_agree() {
        let g = grid(16);
        let mut eta = SpectralField::zeros(g);
        for (k1, k2) in [(1, 2), (3, -1), (0, 4), (5, 5), (2, 0)] {
            eta.set_hermitian(k1, k2, Complex64::new(0.3 / (k1 + k2) as f64, 0.2));
        }
        let visc = ViscositySpec { epsilon: 0.01, m: 2 };
        let vel = biot_savart(&eta);
        let lhs = curl(&rhs_velocity(&vel, &visc).unwrap());
        let rhs = rhs_vorticity(&FlowState::new(eta, 0.0, visc)).unwrap();
        assert!((&lhs - &rhs).max_abs() < 1e-12);
    }

    #[test]
    fn diverged_step_reports_time() {
        let g = grid(8);
        let mut eta = taylor_green(g);
        eta.coeffs_mut()[g.index(1, 1)] = Complex64::new(f64::NAN, 0.0);
        let state = FlowState::new(eta, 0.0, ViscositySpec::inviscid());
        let err = ssp_rk3_step(&state, 0.5);
        assert!(err.is_err());
    }

    #[test]
    fn bump_test_function_is_divergence_free_and_consistent() {
        let f = BumpStreamTest { t0: 0.0, t1: 1.0 };
        let (x1, x2, t) = (0.7, 2.1, 0.4);
        let g = f.gradient(x1, x2, t);
        assert!((g[0][0] + g[1][1]).abs() < 1e-14);
        let d = 1e-6;
        let fd = |i: usize, j: usize| {
            let (p, m) = if j == 0 {
                (f.value(x1 + d, x2, t), f.value(x1 - d, x2, t))
            } else {
                (f.value(x1, x2 + d, t), f.value(x1, x2 - d, t))
            };
            (p[i] - m[i]) / (2.0 * d)
        };
        for i in 0..2 {
            for j in 0..2 {
                assert!((fd(i, j) - g[i][j]).abs() < 1e-8);
            }
            let dt = (f.value(x1, x2, t + d)[i] - f.value(x1, x2, t - d)[i]) / (2.0 * d);
            assert!((dt - f.time_derivative(x1, x2, t)[i]).abs() < 1e-7);
        }
        assert_eq!(f.value(x1, x2, 1.2), [0.0, 0.0]);
    }

    #[test]
    fn weak_residual_of_zero_flow() {
        let state = FlowState::new(SpectralField::zeros(grid(8)), 0.0, ViscositySpec::inviscid());
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let traj = advance(&state, &times, &StepControl::default(), None).unwrap();
        let r = weak_residual(&traj, &BumpStreamTest { t0: 0.0, t1: 1.0 }).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn weak_residual_of_steady_shear_is_quadrature_error() {
        // v steady: ∫∫ ∂tφ·v vanishes through the time integral, and ∇φ : v⊗v
        // integrates to zero in space for each t because v⊗v depends on x2 only.
        let g = grid(16);
        let u = forward_transform(&g.sample(|_, x2| (3.0 * (x2 - PI / 2.0).sin()).tanh()), &g).unwrap();
        let vel = VelocityField::new(u, SpectralField::zeros(g)).unwrap();
        let eta = curl(&vel);
        let state = FlowState::new(eta, 0.0, ViscositySpec::inviscid());
        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.025).collect();
        let traj = advance(&state, &times, &StepControl::default(), None).unwrap();
        let r = weak_residual(&traj, &BumpStreamTest { t0: 0.0, t1: 1.0 }).unwrap();
        assert!(r.abs() < 1e-8, "{r}");
    }
}
