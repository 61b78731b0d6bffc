//! The full PDE on the truncated channel `[-L, L] x T^{n-1}`.
//!
//! `u` starts from the background state `ubar(., 0)` (so `phi(., 0) = 0`),
//! the two `x1` ghost layers on each side carry `ubar(., t)`, and the two
//! cell problems advance in lockstep with the channel so `ubar` is always
//! available at the exact channel time.

use serde::{Deserialize, Serialize};

use crate::ansatz::{build_ansatz, AnsatzState};
use crate::cell::{make_perturbation, CellEvolver, CellField, CellModel, CellSnapshot, Mode};
use crate::decay::{lp_norm, nonzero_mode, q2_energy, zero_mode, EnergyQ2, Series};
use crate::error::{Error, Result};
use crate::flux::{DiffusionTensor, FluxLaw, TransverseFluxSet};
use crate::grid::ChannelGrid;
use crate::kernel::{Ghosts, Operator, Scheme, Source, Stepper};
use crate::par::Exec;
use crate::profiles::{PNorm, ProfileSet};

/// Field `u` at one time.
#[derive(Clone, Debug)]
pub struct ChannelState {
    pub t: f64,
    pub grid: ChannelGrid,
    pub u: Vec<f64>,
    pub last_dt: f64,
    pub steps: usize,
}

/// `u(., 0) = ubar(., 0)`.
pub fn initialize(grid: &ChannelGrid, ansatz: &AnsatzState) -> Result<ChannelState> {
    if ansatz.grid != *grid || ansatz.ubar.len() != grid.len() {
        return Err(Error::Shape { expected: grid.len(), got: ansatz.ubar.len() });
    }
    Ok(ChannelState {
        t: ansatz.t,
        grid: grid.clone(),
        u: ansatz.ubar.clone(),
        last_dt: 0.0,
        steps: 0,
    })
}

/// Ghost rows `(-2, -1)` and `(n1, n1 + 1)` filled with `ubar(., t)`.
pub fn ghost_rows(
    grid: &ChannelGrid,
    profiles: &ProfileSet,
    cell_minus: &dyn CellField,
    cell_plus: &dyn CellField,
    t: f64,
) -> (Vec<f64>, Vec<f64>) {
    let m = grid.row_len();
    let l = grid.layout();
    let fill = |rows: [isize; 2]| {
        let mut out = Vec::with_capacity(2 * m);
        for &r in &rows {
            let x1 = grid.x1_ext(r);
            let e = crate::ansatz::eta(x1, t, profiles);
            let uh = profiles.composite(x1, t);
            for j in 0..m {
                let (i2, i3) = (j / l.n3, j % l.n3);
                let x = [
                    x1,
                    if grid.transverse.is_empty() { 0.0 } else { grid.transverse_coord(0, i2) },
                    if grid.transverse.len() < 2 { 0.0 } else { grid.transverse_coord(1, i3) },
                ];
                let (vm, _) = cell_minus.sample(x, t);
                let (vp, _) = cell_plus.sample(x, t);
                out.push((1.0 - e) * vm + e * vp + uh);
            }
        }
        out
    };
    let n1 = grid.n1 as isize;
    (fill([-2, -1]), fill([n1, n1 + 1]))
}

/// Explicit solver for the channel with Dirichlet ghost layers.
#[derive(Clone, Debug)]
pub struct ChannelSolver {
    pub grid: ChannelGrid,
    stepper: Stepper,
    laws: Vec<FluxLaw>,
    a11: f64,
}

impl ChannelSolver {
    pub fn new(grid: &ChannelGrid, laws: Vec<FluxLaw>, diffusion: &DiffusionTensor, scheme: Scheme, exec: Exec) -> Result<Self> {
        if diffusion.dim() != grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "diffusion tensor is {}-dimensional, channel is {}-dimensional",
                diffusion.dim(),
                grid.dim()
            )));
        }
        let op = Operator::new(grid.layout(), grid.spacings3(), laws.clone(), 0.0, diffusion, scheme, exec)?;
        Ok(Self {
            grid: grid.clone(),
            stepper: Stepper::new(op),
            laws,
            a11: diffusion.a11(),
        })
    }

    pub fn stable_dt(&self, u: &[f64]) -> f64 {
        self.stepper.op.stable_dt(u)
    }

    pub fn step(
        &mut self,
        u: &mut [f64],
        t: f64,
        dt: f64,
        now: (&[f64], &[f64]),
        next: (&[f64], &[f64]),
        source: Option<Source>,
    ) {
        let g0 = Ghosts::Dirichlet { left: now.0, right: now.1 };
        let g1 = Ghosts::Dirichlet { left: next.0, right: next.1 };
        self.stepper.heun_step(u, t, dt, &g0, &g1, source);
    }

    pub fn rhs(&mut self, u: &[f64], ghosts: (&[f64], &[f64]), out: &mut [f64]) {
        let g = Ghosts::Dirichlet { left: ghosts.0, right: ghosts.1 };
        self.stepper.eval_rhs(u, &g, out);
    }

    /// Discrete mass `h1 * sum u * w'` and its rate of change predicted by
    /// the boundary fluxes alone (central scheme).
    pub fn mass_and_boundary_flux(&self, u: &[f64], ghosts: (&[f64], &[f64])) -> (f64, f64) {
        let m = self.grid.row_len();
        let n1 = self.grid.n1;
        let h1 = self.grid.h1();
        let w = self.grid.transverse_weight();
        let mass = u.iter().sum::<f64>() * w * h1;
        let g = |v: f64| self.laws[0].value(v) - self.laws[0].value(0.0);
        let mut flux = 0.0;
        for j in 0..m {
            let um1 = ghosts.0[m + j];
            let u0 = u[j];
            let un1 = u[(n1 - 1) * m + j];
            let un = ghosts.1[j];
            flux += -0.5 * (g(un) + g(un1) - g(u0) - g(um1)) + self.a11 * (un - un1 - u0 + um1) / h1;
        }
        (mass, flux * w)
    }
}

/// Extremes of `u` against the far-field bounds.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MonitorReport {
    pub pass: bool,
    pub min_u: f64,
    pub max_u: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `u_- - tol <= u <= u_+ + tol` with `tol = epsilon + 1e-6`.
pub fn max_principle_monitor(u: &[f64], u_minus: f64, u_plus: f64, epsilon: f64) -> MonitorReport {
    let (lo, hi) = u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let tol = epsilon + 1e-6;
    let lower = u_minus - tol;
    let upper = u_plus + tol;
    MonitorReport {
        pass: lo >= lower && hi <= upper && lo.is_finite() && hi.is_finite(),
        min_u: lo,
        max_u: hi,
        lower,
        upper,
    }
}

/// Everything `simulate` needs.
#[derive(Clone, Debug)]
pub struct SimulationSetup {
    pub profiles: ProfileSet,
    pub transverse: TransverseFluxSet,
    pub diffusion: DiffusionTensor,
    pub grid: ChannelGrid,
    /// `x1` points of the lockstep cells (1 when no mode depends on `x1`).
    pub cell_n1: usize,
    pub modes: Vec<Mode>,
    /// Surrogate norm of `V0`; `None` keeps the mode amplitudes.
    pub epsilon: Option<f64>,
    pub t_end: f64,
    /// Times at which norms are recorded.
    pub record_times: Vec<f64>,
    /// Times at which full fields are handed to the snapshot sink.
    pub snapshot_times: Vec<f64>,
    pub scheme: Scheme,
    pub exec: Exec,
    /// Multiplier on the stable time step (values above 1 are for
    /// instability injection only).
    pub dt_scale: f64,
    /// Once both cells and the transverse oscillation of `u` fall below
    /// this sup-norm, the channel continues on a single transverse point.
    /// The scheme maps `x'`-independent data to `x'`-independent data, so
    /// this only drops round-off.
    pub collapse_tol: Option<f64>,
}

/// Fields handed to the snapshot sink.
pub struct FieldSnapshot<'a> {
    pub t: f64,
    pub grid: &'a ChannelGrid,
    pub u: &'a [f64],
    pub phi: &'a [f64],
}

/// Named norm series recorded by `simulate`.
pub const SERIES_NAMES: [&str; 10] = [
    "u_minus_uhat_inf",
    "phi_inf",
    "phi_l1",
    "phi_l2",
    "d0phi_l2",
    "dnphi_l2",
    "ubar_minus_uhat_inf",
    "boundary_dx1",
    "cell_minus_sup",
    "cell_plus_sup",
];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub names: Vec<String>,
    pub series: Vec<Series>,
    pub q2: Vec<EnergyQ2>,
    pub monitor_min: f64,
    pub monitor_max: f64,
    pub monitor_lower: f64,
    pub monitor_upper: f64,
    pub steps: usize,
    pub epsilon: f64,
    pub t_final: f64,
    /// Time at which the transverse directions were collapsed.
    pub collapsed_at: Option<f64>,
}

impl SimulationTrace {
    pub fn get(&self, name: &str) -> Option<&Series> {
        self.names.iter().position(|n| n == name).map(|k| &self.series[k])
    }
}

fn record(
    trace: &mut SimulationTrace,
    state: &ChannelState,
    ansatz: &AnsatzState,
    cells: (&CellSnapshot, &CellSnapshot),
) -> Result<Vec<f64>> {
    let grid = &state.grid;
    let m = grid.row_len();
    let phi: Vec<f64> = state.u.iter().zip(&ansatz.ubar).map(|(u, b)| u - b).collect();
    let uhat = ansatz.u_hat();
    let dev = state
        .u
        .iter()
        .enumerate()
        .fold(0.0f64, |a, (k, &u)| a.max((u - uhat[k / m]).abs()));
    let d0 = zero_mode(&phi, grid)?;
    let dn = nonzero_mode(&phi, grid)?;
    let h1 = grid.h1();
    let n1 = grid.n1;
    let mut bdx = 0.0f64;
    for j in 0..m {
        bdx = bdx.max(((state.u[m + j] - state.u[j]) / h1).abs());
        bdx = bdx.max(((state.u[(n1 - 1) * m + j] - state.u[(n1 - 2) * m + j]) / h1).abs());
    }
    let values = [
        dev,
        lp_norm(&phi, PNorm::Inf, grid)?,
        lp_norm(&phi, PNorm::Finite(1.0), grid)?,
        lp_norm(&phi, PNorm::Finite(2.0), grid)?,
        lp_norm(&d0, PNorm::Finite(2.0), grid)?,
        lp_norm(&dn, PNorm::Finite(2.0), grid)?,
        ansatz.deviation_sup(),
        bdx,
        cells.0.sup(),
        cells.1.sup(),
    ];
    for (s, v) in trace.series.iter_mut().zip(values) {
        s.push(state.t, v);
    }
    let mut q = q2_energy(&phi, &ansatz.ubar, &ansatz.du_hat(), grid)?;
    q.t = state.t;
    trace.q2.push(q);
    Ok(phi)
}

/// Integrates the channel and its two cells to `t_end`, recording norms at
/// `record_times` and passing fields at `snapshot_times` to `sink`.
pub fn simulate(
    setup: &SimulationSetup,
    sink: &mut dyn FnMut(FieldSnapshot) -> Result<()>,
) -> Result<SimulationTrace> {
    let mut grid = setup.grid.clone();
    let profiles = &setup.profiles;
    let torus = setup.grid.matching_torus(setup.cell_n1)?;
    let v0 = make_perturbation(&torus, &setup.modes, setup.epsilon)?;
    let model = CellModel {
        flux: profiles.flux.clone(),
        transverse: setup.transverse.clone(),
        diffusion: setup.diffusion.clone(),
        scheme: setup.scheme,
        exec: setup.exec,
    };
    let mut cell_m = CellEvolver::new(&model, profiles.endpoints.u_minus, &v0)?;
    let mut cell_p = CellEvolver::new(&model, profiles.endpoints.u_plus, &v0)?;
    let mut laws = vec![profiles.flux.law().clone()];
    laws.extend(setup.transverse.laws().iter().cloned());
    let mut solver = ChannelSolver::new(&grid, laws.clone(), &setup.diffusion, setup.scheme, setup.exec)?;
    let mut snap_m = cell_m.snapshot();
    let mut snap_p = cell_p.snapshot();
    let ansatz0 = build_ansatz(0.0, profiles, &snap_m, &snap_p, &grid)?;
    let mut state = initialize(&grid, &ansatz0)?;
    let eps = v0.epsilon;
    let (um, up) = (profiles.endpoints.u_minus, profiles.endpoints.u_plus);
    let mut trace = SimulationTrace {
        names: SERIES_NAMES.iter().map(|s| s.to_string()).collect(),
        series: vec![Series::default(); SERIES_NAMES.len()],
        q2: Vec::new(),
        monitor_min: f64::INFINITY,
        monitor_max: f64::NEG_INFINITY,
        monitor_lower: um - eps - 1e-6,
        monitor_upper: up + eps + 1e-6,
        steps: 0,
        epsilon: eps,
        t_final: 0.0,
        collapsed_at: None,
    };
    let mut events: Vec<f64> = setup
        .record_times
        .iter()
        .chain(&setup.snapshot_times)
        .copied()
        .filter(|&t| t >= 0.0 && t <= setup.t_end)
        .collect();
    events.push(setup.t_end);
    events.sort_by(f64::total_cmp);
    events.dedup();
    let handle = |trace: &mut SimulationTrace,
                      state: &ChannelState,
                      ansatz: &AnsatzState,
                      sm: &CellSnapshot,
                      sp: &CellSnapshot,
                      sink: &mut dyn FnMut(FieldSnapshot) -> Result<()>|
     -> Result<()> {
        let t = state.t;
        let is_record = setup.record_times.contains(&t);
        let is_snap = setup.snapshot_times.contains(&t);
        if is_record || is_snap {
            let phi = if is_record {
                record(trace, state, ansatz, (sm, sp))?
            } else {
                state.u.iter().zip(&ansatz.ubar).map(|(u, b)| u - b).collect()
            };
            if is_snap {
                sink(FieldSnapshot { t, grid: &state.grid, u: &state.u, phi: &phi })?;
            }
        }
        Ok(())
    };
    let mon0 = max_principle_monitor(&state.u, um, up, eps);
    trace.monitor_min = mon0.min_u;
    trace.monitor_max = mon0.max_u;
    handle(&mut trace, &state, &ansatz0, &snap_m, &snap_p, sink)?;
    let mut ghosts = ghost_rows(&grid, profiles, &snap_m, &snap_p, 0.0);
    let guard = um.abs().max(up.abs()) + 10.0 * eps + 1e-6;
    for &target in events.iter().filter(|&&t| t > 0.0) {
        while state.t < target {
            let mut dt = (setup.dt_scale * solver.stable_dt(&state.u)).min(target - state.t);
            let rest = target - state.t - dt;
            if rest > 0.0 && rest < 1e-9 * dt {
                dt = target - state.t;
            }
            // the cells substep when their own limit is tighter
            let cell_dt = cell_m.stable_dt().min(cell_p.stable_dt());
            let sub = (dt / cell_dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            for _ in 0..sub {
                cell_m.step(dt / sub as f64)?;
                cell_p.step(dt / sub as f64)?;
            }
            snap_m = cell_m.snapshot();
            snap_p = cell_p.snapshot();
            let t_next = if (state.t + dt - target).abs() <= 1e-12 * target.max(1.0) {
                target
            } else {
                state.t + dt
            };
            let next = ghost_rows(&grid, profiles, &snap_m, &snap_p, t_next);
            solver.step(&mut state.u, state.t, dt, (&ghosts.0, &ghosts.1), (&next.0, &next.1), None);
            ghosts = next;
            state.t = t_next;
            state.last_dt = dt;
            state.steps += 1;
            let mon = max_principle_monitor(&state.u, um, up, eps);
            trace.monitor_min = trace.monitor_min.min(mon.min_u);
            trace.monitor_max = trace.monitor_max.max(mon.max_u);
            let sup = mon.min_u.abs().max(mon.max_u.abs());
            if !sup.is_finite() || sup > guard {
                return Err(Error::Instability {
                    step: state.steps,
                    time: state.t,
                    detail: format!("sup |u| = {sup:.3e} exceeds {guard:.3e}"),
                });
            }
            if !mon.pass {
                return Err(Error::MaximumPrinciple {
                    step: state.steps,
                    time: state.t,
                    min: mon.min_u,
                    max: mon.max_u,
                    lower: mon.lower,
                    upper: mon.upper,
                });
            }
            if let Some(tol) = setup.collapse_tol {
                if trace.collapsed_at.is_none()
                    && grid.row_len() > 1
                    && cell_m.sup() < tol
                    && cell_p.sup() < tol
                    && transverse_oscillation(&state.u, grid.row_len()) < tol
                {
                    let m = grid.row_len();
                    grid = ChannelGrid::new(grid.half_width, grid.n1, vec![1; grid.transverse.len()])?;
                    state.u = zero_mode(&state.u, &state.grid)?;
                    state.grid = grid.clone();
                    solver = ChannelSolver::new(&grid, laws.clone(), &setup.diffusion, setup.scheme, setup.exec)?;
                    let avg = |g: &[f64]| -> Vec<f64> { g.chunks(m).map(|r| r.iter().sum::<f64>() / m as f64).collect() };
                    ghosts = (avg(&ghosts.0), avg(&ghosts.1));
                    trace.collapsed_at = Some(state.t);
                }
            }
        }
        if setup.record_times.contains(&target) || setup.snapshot_times.contains(&target) {
            let ansatz = build_ansatz(state.t, profiles, &snap_m, &snap_p, &grid)?;
            handle(&mut trace, &state, &ansatz, &snap_m, &snap_p, sink)?;
        }
    }
    trace.steps = state.steps;
    trace.t_final = state.t;
    Ok(trace)
}

/// Largest deviation of `u` from its transverse average.
pub fn transverse_oscillation(u: &[f64], row_len: usize) -> f64 {
    u.chunks(row_len)
        .map(|r| {
            let mean = r.iter().sum::<f64>() / row_len as f64;
            r.iter().fold(0.0f64, |a, v| a.max((v - mean).abs()))
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::ZeroCell;
    use crate::flux::FluxSpec;
    use crate::profiles::WaveEndpoints;

    fn profiles() -> ProfileSet {
        ProfileSet::new(WaveEndpoints::new(-1.0, 1.0).unwrap(), FluxSpec::convex(), 1.0).unwrap()
    }

    #[test]
    fn constant_state_unchanged() {
        let g = ChannelGrid::new(5.0, 21, vec![4]).unwrap();
        let a = DiffusionTensor::new(&[vec![1.0, 0.1], vec![0.1, 1.0]]).unwrap();
        let mut s = ChannelSolver::new(&g, vec![FluxLaw::ConvexDegenerate, FluxLaw::Burgers], &a, Scheme::Central, Exec::Parallel).unwrap();
        let mut u = vec![0.3; g.len()];
        let gh = vec![0.3; 2 * g.row_len()];
        s.step(&mut u, 0.0, 1e-3, (&gh, &gh), (&gh, &gh), None);
        assert!(u.iter().all(|&v| v == 0.3));
    }

    #[test]
    fn rhs_mass_matches_boundary_flux() {
        let g = ChannelGrid::new(5.0, 41, vec![8]).unwrap();
        let a = DiffusionTensor::new(&[vec![1.0, 0.2], vec![0.1, 0.7]]).unwrap();
        let mut s = ChannelSolver::new(&g, vec![FluxLaw::ConvexDegenerate, FluxLaw::Burgers], &a, Scheme::Central, Exec::Parallel).unwrap();
        let m = g.row_len();
        let u: Vec<f64> = (0..g.len())
            .map(|k| (g.x1(k / m) * 0.7).sin() + 0.2 * ((k % m) as f64).cos())
            .collect();
        let left: Vec<f64> = (0..2 * m).map(|k| -0.9 + 0.01 * k as f64).collect();
        let right: Vec<f64> = (0..2 * m).map(|k| 0.8 - 0.02 * k as f64).collect();
        let mut out = vec![0.0; g.len()];
        s.rhs(&u, (&left, &right), &mut out);
        let rate = out.iter().sum::<f64>() * g.transverse_weight() * g.h1();
        let (_, flux) = s.mass_and_boundary_flux(&u, (&left, &right));
        assert!((rate - flux).abs() < 1e-12, "{rate} vs {flux}");
    }

    #[test]
    fn unperturbed_initial_state_is_composite() {
        let p = profiles();
        let g = ChannelGrid::new(40.0, 81, vec![4]).unwrap();
        let a = build_ansatz(0.0, &p, &ZeroCell, &ZeroCell, &g).unwrap();
        let s = initialize(&g, &a).unwrap();
        let m = g.row_len();
        for (k, &v) in s.u.iter().enumerate() {
            assert_eq!(v, p.composite(g.x1(k / m), 0.0));
        }
    }

    #[test]
    fn monitor_bounds() {
        let r = max_principle_monitor(&[-1.0, 0.5, 1.0], -1.0, 1.0, 0.0);
        assert!(r.pass);
        let r = max_principle_monitor(&[-1.0, 1.1], -1.0, 1.0, 0.01);
        assert!(!r.pass);
    }
}
