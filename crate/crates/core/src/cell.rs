//! Periodic cell problems on the unit torus: perturbations `V0`, the
//! evolution of `u~ = ubar_pm - u_pm`, and exponential decay fits.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::decay::{DecayOutcome, DecaySeries, Series};
use crate::error::{Error, Result};
use crate::flux::{DiffusionTensor, FluxLaw, FluxSpec, TransverseFluxSet};
use crate::grid::{Layout, TorusGrid};
use crate::kernel::{Ghosts, Operator, Scheme, Stepper};
use crate::par::{self, Exec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    #[default]
    Cos,
    Sin,
}

/// One Fourier term `amplitude * cos|sin(2 pi k . x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub kind: ModeKind,
}

impl Mode {
    pub fn cos(k: Vec<i64>, amplitude: f64) -> Self {
        Self { k, amplitude, kind: ModeKind::Cos }
    }

    pub fn sin(k: Vec<i64>, amplitude: f64) -> Self {
        Self { k, amplitude, kind: ModeKind::Sin }
    }
}

/// Zero-mean periodic initial perturbation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodicPerturbation {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
    /// Surrogate Sobolev norm of `values`.
    pub epsilon: f64,
}

impl PeriodicPerturbation {
    pub fn zero(grid: TorusGrid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n], epsilon: 0.0 }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Discrete `H^2` surrogate: `(sum_k (1 + |2 pi k|^2)^2 |c_k|^2)^{1/2}` with
/// `c_k` the normalized discrete Fourier coefficients.
pub fn surrogate_norm(grid: &TorusGrid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::Shape { expected: grid.len(), got: values.len() });
    }
    let l = grid.layout();
    let dims = [l.n1, l.n2, l.n3];
    let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    // transform along each axis in turn
    for axis in 0..3 {
        let n = dims[axis];
        if n == 1 {
            continue;
        }
        let fft = planner.plan_fft_forward(n);
        let stride: usize = dims[axis + 1..].iter().product();
        let outer: usize = dims[..axis].iter().product();
        let mut line = vec![Complex::new(0.0, 0.0); n];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * n * stride + s;
                for (j, c) in line.iter_mut().enumerate() {
                    *c = data[base + j * stride];
                }
                fft.process(&mut line);
                for (j, c) in line.iter().enumerate() {
                    data[base + j * stride] = *c;
                }
            }
        }
    }
    let total = values.len() as f64;
    let freq = |j: usize, n: usize| if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
    let mut acc = 0.0;
    for i1 in 0..l.n1 {
        for i2 in 0..l.n2 {
            for i3 in 0..l.n3 {
                let k2 = freq(i1, l.n1).powi(2) + freq(i2, l.n2).powi(2) + freq(i3, l.n3).powi(2);
                let w = 1.0 + 4.0 * PI * PI * k2;
                let c = data[l.index(i1, i2, i3)] / total;
                acc += w * w * c.norm_sqr();
            }
        }
    }
    Ok(acc.sqrt())
}

/// Builds `V0` from Fourier terms. With `epsilon = Some(e)` the field is
/// rescaled so its surrogate norm equals `e`; with `None` the amplitudes are
/// used as given.
pub fn make_perturbation(grid: &TorusGrid, modes: &[Mode], epsilon: Option<f64>) -> Result<PeriodicPerturbation> {
    let n = grid.dim();
    for m in modes {
        if m.k.len() != n {
            return Err(Error::InvalidArgument(format!(
                "wave-vector {:?} has {} components on a {n}-torus",
                m.k,
                m.k.len()
            )));
        }
        if m.k.iter().all(|&k| k == 0) {
            return Err(Error::InvalidArgument(
                "zero wave-vector: V0 must have zero mean (no constant component)".into(),
            ));
        }
        for (d, &k) in m.k.iter().enumerate() {
            if 2 * k.unsigned_abs() as usize >= grid.points()[d] {
                return Err(Error::InvalidArgument(format!(
                    "mode {:?} is not resolved by {} points in direction {}",
                    m.k,
                    grid.points()[d],
                    d + 1
                )));
            }
        }
        if !m.amplitude.is_finite() {
            return Err(Error::InvalidArgument("non-finite mode amplitude".into()));
        }
    }
    if let Some(e) = epsilon {
        if !(e >= 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {e}")));
        }
    }
    let l = grid.layout();
    let mut values = vec![0.0; grid.len()];
    for i1 in 0..l.n1 {
        for i2 in 0..l.n2 {
            for i3 in 0..l.n3 {
                let x = [
                    i1 as f64 / l.n1 as f64,
                    i2 as f64 / l.n2 as f64,
                    i3 as f64 / l.n3 as f64,
                ];
                let mut v = 0.0;
                for m in modes {
                    let phase: f64 = 2.0 * PI * m.k.iter().zip(&x).map(|(&k, &xd)| k as f64 * xd).sum::<f64>();
                    v += m.amplitude
                        * match m.kind {
                            ModeKind::Cos => phase.cos(),
                            ModeKind::Sin => phase.sin(),
                        };
                }
                values[l.index(i1, i2, i3)] = v;
            }
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    for v in &mut values {
        *v -= mean;
    }
    let norm = surrogate_norm(grid, &values)?;
    let eps = match epsilon {
        Some(e) if norm > 0.0 => {
            let s = e / norm;
            for v in &mut values {
                *v *= s;
            }
            surrogate_norm(grid, &values)?
        }
        _ => norm,
    };
    Ok(PeriodicPerturbation { grid: grid.clone(), values, epsilon: eps })
}

/// Analytic linear decay rate `(2 pi)^2 k^T A k` of a single mode.
pub fn linear_decay_rate(a: &DiffusionTensor, k: &[i64]) -> f64 {
    let kf: Vec<f64> = k.iter().map(|&v| v as f64).collect();
    4.0 * PI * PI * a.quadratic_form(&kf)
}

/// Physical setting shared by the two cell problems.
#[derive(Clone, Debug)]
pub struct CellModel {
    pub flux: FluxSpec,
    pub transverse: TransverseFluxSet,
    pub diffusion: DiffusionTensor,
    pub scheme: Scheme,
    pub exec: Exec,
}

impl CellModel {
    pub fn fluxes(&self) -> Vec<FluxLaw> {
        let mut v = vec![self.flux.law().clone()];
        v.extend(self.transverse.laws().iter().cloned());
        v
    }
}

/// 4th-order periodic derivative along storage axis `axis`.
pub fn periodic_gradient(grid: &TorusGrid, v: &[f64], axis: usize) -> Vec<f64> {
    let l = grid.layout();
    let dims = [l.n1, l.n2, l.n3];
    let n = dims[axis];
    if axis >= grid.dim() || n == 1 {
        return vec![0.0; v.len()];
    }
    let h = grid.spacing(axis);
    let mut out = vec![0.0; v.len()];
    for i1 in 0..l.n1 {
        for i2 in 0..l.n2 {
            for i3 in 0..l.n3 {
                let mut idx = [i1, i2, i3];
                let i = idx[axis];
                let mut at = |off: isize| {
                    idx[axis] = ((i as isize + off).rem_euclid(n as isize)) as usize;
                    v[l.index(idx[0], idx[1], idx[2])]
                };
                let d = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
                out[l.index(i1, i2, i3)] = d;
            }
        }
    }
    out
}

/// Time-stepping state of one cell problem; used directly when the cells
/// run in lockstep with the channel.
#[derive(Clone, Debug)]
pub struct CellEvolver {
    pub grid: TorusGrid,
    pub base: f64,
    pub t: f64,
    pub v: Vec<f64>,
    stepper: Stepper,
    initial_sup: f64,
    pub steps: usize,
}

impl CellEvolver {
    pub fn new(model: &CellModel, base: f64, v0: &PeriodicPerturbation) -> Result<Self> {
        let grid = v0.grid.clone();
        if model.diffusion.dim() != grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "diffusion tensor is {}-dimensional, torus is {}-dimensional",
                model.diffusion.dim(),
                grid.dim()
            )));
        }
        if model.transverse.len() + 1 != grid.dim() {
            return Err(Error::InvalidArgument("need one transverse flux per transverse direction".into()));
        }
        let op = Operator::new(
            grid.layout(),
            grid.spacings3(),
            model.fluxes(),
            base,
            &model.diffusion,
            model.scheme,
            model.exec,
        )?;
        Ok(Self {
            initial_sup: v0.sup(),
            grid,
            base,
            t: 0.0,
            v: v0.values.clone(),
            stepper: Stepper::new(op),
            steps: 0,
        })
    }

    pub fn layout(&self) -> Layout {
        self.grid.layout()
    }

    pub fn stable_dt(&self) -> f64 {
        self.stepper.op.stable_dt(&self.v)
    }

    pub fn sup(&self) -> f64 {
        self.v.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn step(&mut self, dt: f64) -> Result<()> {
        self.stepper
            .heun_step(&mut self.v, self.t, dt, &Ghosts::Periodic, &Ghosts::Periodic, None);
        self.t += dt;
        self.steps += 1;
        let s = self.sup();
        if !s.is_finite() || s > 10.0 * self.initial_sup {
            return Err(Error::Instability {
                step: self.steps,
                time: self.t,
                detail: format!(
                    "cell sup-norm {s:.3e} exceeds 10x initial {:.3e}",
                    self.initial_sup
                ),
            });
        }
        Ok(())
    }

    /// Current field with gradients.
    pub fn snapshot(&self) -> CellSnapshot {
        CellSnapshot::new(self.grid.clone(), self.t, self.v.clone())
    }
}

/// One time level of a cell solution with its gradient.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellSnapshot {
    pub grid: TorusGrid,
    pub t: f64,
    pub values: Vec<f64>,
    /// `grad[d]` is `d u~ / d x_{d+1}`.
    pub grad: Vec<Vec<f64>>,
}

impl CellSnapshot {
    pub fn new(grid: TorusGrid, t: f64, values: Vec<f64>) -> Self {
        let grad = (0..grid.dim()).map(|d| periodic_gradient(&grid, &values, d)).collect();
        Self { grid, t, values, grad }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn grad_sup(&self) -> f64 {
        self.grad
            .iter()
            .flat_map(|g| g.iter())
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Multilinear periodic interpolation of `(value, gradient)` at `x`.
    pub fn interpolate(&self, x: [f64; 3]) -> (f64, [f64; 3]) {
        let l = self.grid.layout();
        let dims = [l.n1, l.n2, l.n3];
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut w = [0.0f64; 3];
        for d in 0..3 {
            let n = dims[d];
            if n == 1 {
                continue;
            }
            let s = x[d].rem_euclid(1.0) * n as f64;
            let f = s.floor();
            let i = (f as usize) % n;
            lo[d] = i;
            hi[d] = (i + 1) % n;
            w[d] = s - f;
        }
        let mut val = 0.0;
        let mut grad = [0.0; 3];
        for corner in 0..8 {
            let mut idx = [0usize; 3];
            let mut weight = 1.0;
            for d in 0..3 {
                let up = corner >> d & 1 == 1;
                if dims[d] == 1 {
                    if up {
                        weight = 0.0;
                    }
                    continue;
                }
                idx[d] = if up { hi[d] } else { lo[d] };
                weight *= if up { w[d] } else { 1.0 - w[d] };
            }
            if weight == 0.0 {
                continue;
            }
            let k = l.index(idx[0], idx[1], idx[2]);
            val += weight * self.values[k];
            for (d, g) in self.grad.iter().enumerate() {
                grad[d] += weight * g[k];
            }
        }
        (val, grad)
    }
}

/// A periodic perturbation `u~(x, t)` with its spatial gradient, as seen by
/// the ansatz.
pub trait CellField: Sync {
    /// `(u~, grad u~)` at `x = (x1, x2, x3)` (unused coordinates ignored).
    fn sample(&self, x: [f64; 3], t: f64) -> (f64, [f64; 3]);
}

/// The trivial cell `u~ = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroCell;

impl CellField for ZeroCell {
    fn sample(&self, _x: [f64; 3], _t: f64) -> (f64, [f64; 3]) {
        (0.0, [0.0; 3])
    }
}

impl CellField for CellSnapshot {
    fn sample(&self, x: [f64; 3], _t: f64) -> (f64, [f64; 3]) {
        self.interpolate(x)
    }
}

/// Exact cell solution for `f2 = u^2/2` and data depending on `x2` only:
/// `u~(x, t) = W(x2 - base t, t)` with `W = -2 a22 theta_y / theta` and
/// `theta = 1 + delta exp(-a22 kappa^2 t) cos(kappa y)`, `kappa = 2 pi k`.
#[derive(Clone, Copy, Debug)]
pub struct ColeHopfCell {
    pub base: f64,
    pub a22: f64,
    pub delta: f64,
    pub k: i64,
}

impl ColeHopfCell {
    pub fn new(base: f64, a22: f64, delta: f64, k: i64) -> Result<Self> {
        if !(delta.abs() < 1.0) || k == 0 || !(a22 > 0.0) {
            return Err(Error::InvalidArgument(
                "need |delta| < 1, k != 0 and a22 > 0".into(),
            ));
        }
        Ok(Self { base, a22, delta, k })
    }

    /// `(W, W_y)` at shifted coordinate `y`.
    pub fn profile(&self, y: f64, t: f64) -> (f64, f64) {
        let kappa = 2.0 * PI * self.k as f64;
        let e = self.delta * (-self.a22 * kappa * kappa * t).exp();
        let (s, c) = (kappa * y).sin_cos();
        let theta = 1.0 + e * c;
        let theta_y = -e * kappa * s;
        let theta_yy = -e * kappa * kappa * c;
        let w = -2.0 * self.a22 * theta_y / theta;
        let wy = -2.0 * self.a22 * (theta_yy * theta - theta_y * theta_y) / (theta * theta);
        (w, wy)
    }
}

impl CellField for ColeHopfCell {
    fn sample(&self, x: [f64; 3], t: f64) -> (f64, [f64; 3]) {
        let (w, wy) = self.profile(x[1] - self.base * t, t);
        (w, [0.0, wy, 0.0])
    }
}

/// Single Fourier mode of the linear heat equation,
/// `delta exp(-(2 pi)^2 k^T A k t) cos(2 pi k . x)`. It solves the cell
/// problem exactly wherever the convective terms vanish, e.g. for `k` along
/// `x1` about a base state in the flat part of `f1`.
#[derive(Clone, Debug)]
pub struct HeatModeCell {
    pub delta: f64,
    pub k: [f64; 3],
    pub rate: f64,
}

impl HeatModeCell {
    pub fn new(a: &DiffusionTensor, delta: f64, k: &[i64]) -> Result<Self> {
        if k.len() != a.dim() || k.iter().all(|&v| v == 0) {
            return Err(Error::InvalidArgument("wave-vector must be nonzero and match A".into()));
        }
        let mut kk = [0.0; 3];
        for (d, &v) in k.iter().enumerate() {
            kk[d] = v as f64;
        }
        Ok(Self { delta, k: kk, rate: linear_decay_rate(a, k) })
    }
}

impl CellField for HeatModeCell {
    fn sample(&self, x: [f64; 3], t: f64) -> (f64, [f64; 3]) {
        let amp = self.delta * (-self.rate * t).exp();
        let phase = 2.0 * PI * (self.k[0] * x[0] + self.k[1] * x[1] + self.k[2] * x[2]);
        let (s, c) = phase.sin_cos();
        let g = self.k.map(|kd| -amp * 2.0 * PI * kd * s);
        (amp * c, g)
    }
}

/// Snapshots of a solved cell problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellSolution {
    pub base: f64,
    pub snapshots: Vec<CellSnapshot>,
    /// `||u~||_inf` at every time step (not only snapshots).
    pub sup_series: Series,
    pub grad_sup_series: Series,
    pub mean_series: Series,
    pub min_max: (f64, f64),
    pub steps: usize,
}

impl CellSolution {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Largest `|mean(u~)(t) - mean(u~)(0)|` over the run.
    pub fn mean_drift(&self) -> f64 {
        let m0 = self.mean_series.values.first().copied().unwrap_or(0.0);
        self.mean_series.values.iter().fold(0.0, |a, m| a.max((m - m0).abs()))
    }
}

impl CellField for CellSolution {
    /// Linear interpolation in time between snapshots; clamps outside the
    /// snapshot range.
    fn sample(&self, x: [f64; 3], t: f64) -> (f64, [f64; 3]) {
        let s = &self.snapshots;
        if t <= s[0].t {
            return s[0].interpolate(x);
        }
        let last = s.len() - 1;
        if t >= s[last].t {
            return s[last].interpolate(x);
        }
        let k = s.partition_point(|q| q.t <= t) - 1;
        let (a, b) = (&s[k], &s[k + 1]);
        let w = (t - a.t) / (b.t - a.t);
        let (va, ga) = a.interpolate(x);
        let (vb, gb) = b.interpolate(x);
        let mut g = [0.0; 3];
        for d in 0..3 {
            g[d] = (1.0 - w) * ga[d] + w * gb[d];
        }
        ((1.0 - w) * va + w * vb, g)
    }
}

/// Evolves `u~` from `V0` about `base` to `t_end`, recording snapshots at
/// `snapshot_times` (clamped steps land on them exactly) and the sup norms
/// after every step.
pub fn solve_cell(
    model: &CellModel,
    base: f64,
    v0: &PeriodicPerturbation,
    t_end: f64,
    snapshot_times: &[f64],
) -> Result<CellSolution> {
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {t_end}")));
    }
    if snapshot_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("snapshot times must increase".into()));
    }
    let mut ev = CellEvolver::new(model, base, v0)?;
    let mut targets: Vec<f64> = snapshot_times.iter().copied().filter(|&t| t > 0.0 && t <= t_end).collect();
    if targets.last() != Some(&t_end) {
        targets.push(t_end);
    }
    let mut snapshots = Vec::new();
    let first = ev.snapshot();
    let mut sup_series = Series::default();
    let mut grad_series = Series::default();
    let mut mean_series = Series::default();
    let mut lo = v0.values.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    let mut hi = v0.values.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    sup_series.push(0.0, first.sup());
    grad_series.push(0.0, first.grad_sup());
    mean_series.push(0.0, first.mean());
    if snapshot_times.first() == Some(&0.0) {
        snapshots.push(first);
    }
    for &target in &targets {
        while ev.t < target {
            let dt = ev.stable_dt().min(target - ev.t);
            let remaining = target - (ev.t + dt);
            // avoid a sliver step just before the target
            let dt = if remaining > 0.0 && remaining < 1e-9 * dt { target - ev.t } else { dt };
            ev.step(dt)?;
            if (ev.t - target).abs() <= 1e-12 * target.max(1.0) {
                ev.t = target;
            }
            let sup = ev.sup();
            let mean = ev.v.iter().sum::<f64>() / ev.v.len() as f64;
            for &v in &ev.v {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            sup_series.push(ev.t, sup);
            mean_series.push(ev.t, mean);
        }
        let snap = ev.snapshot();
        grad_series.push(snap.t, snap.grad_sup());
        if snapshot_times.contains(&target) {
            snapshots.push(snap);
        }
    }
    if snapshots.is_empty() {
        snapshots.push(ev.snapshot());
    }
    Ok(CellSolution {
        base,
        snapshots,
        sup_series,
        grad_sup_series: grad_series,
        mean_series,
        min_max: (base + lo, base + hi),
        steps: ev.steps,
    })
}

/// Exponential fits of `||u~||_inf` and `||grad u~||_inf`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellDecay {
    pub sup: DecaySeries,
    pub grad: DecaySeries,
    /// `false` when either fit has `R^2 < 0.98`.
    pub exponential: bool,
}

impl CellDecay {
    pub fn rate(&self) -> Option<f64> {
        self.sup.outcome.as_ref().and_then(|o| o.fit()).map(|f| f.rate())
    }
}

/// Fits `c_bar` on `window` (peak-to-floor window when `None`). Series of
/// zeros give the already-converged marker.
pub fn cell_decay_rate(sol: &CellSolution, window: Option<(f64, f64)>) -> Result<CellDecay> {
    let snap_times = sol.times();
    let sup_at_snaps = Series::new(snap_times.clone(), sol.snapshots.iter().map(|s| s.sup()).collect());
    let grad_at_snaps = Series::new(snap_times, sol.snapshots.iter().map(|s| s.grad_sup()).collect());
    let sup = DecaySeries::exponential("cell_sup", sup_at_snaps, window)?;
    let grad = DecaySeries::exponential("cell_grad_sup", grad_at_snaps, window)?;
    let good = |d: &DecaySeries| match &d.outcome {
        Some(DecayOutcome::Fitted(f)) => f.r2 >= 0.98 && f.points >= 8,
        _ => true,
    };
    let exponential = good(&sup) && good(&grad);
    Ok(CellDecay { sup, grad, exponential })
}

/// Runs both cell problems `u_-` and `u_+` with a shared `V0`.
pub fn solve_cell_pair(
    model: &CellModel,
    u_minus: f64,
    u_plus: f64,
    v0: &PeriodicPerturbation,
    t_end: f64,
    snapshot_times: &[f64],
) -> Result<(CellSolution, CellSolution)> {
    let exec = model.exec;
    let mut out = par::map_indices(exec, 2, |k| {
        let base = if k == 0 { u_minus } else { u_plus };
        solve_cell(model, base, v0, t_end, snapshot_times)
    });
    let plus = out.pop().unwrap()?;
    let minus = out.pop().unwrap()?;
    Ok((minus, plus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model(a: DiffusionTensor) -> CellModel {
        CellModel {
            flux: FluxSpec::convex(),
            transverse: TransverseFluxSet::burgers(a.dim()),
            diffusion: a,
            scheme: Scheme::Central,
            exec: Exec::Parallel,
        }
    }

    #[test]
    fn empty_modes_give_zero() {
        let g = TorusGrid::uniform(2, 16).unwrap();
        let p = make_perturbation(&g, &[], Some(0.01)).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert_eq!(p.epsilon, 0.0);
    }

    #[test]
    fn single_cosine_keeps_amplitude() {
        let g = TorusGrid::uniform(2, 32).unwrap();
        let p = make_perturbation(&g, &[Mode::cos(vec![0, 1], 0.3)], None).unwrap();
        assert!(p.mean().abs() < 1e-14 * 0.3);
        assert_relative_eq!(p.sup(), 0.3, epsilon = 1e-14);
    }

    #[test]
    fn two_mode_norm_matches_coefficients() {
        let g = TorusGrid::uniform(2, 32).unwrap();
        let (a, b) = (0.2, 0.05);
        let p = make_perturbation(&g, &[Mode::cos(vec![1, 0], a), Mode::sin(vec![1, 2], b)], None).unwrap();
        // each real mode splits into two coefficients of modulus amp/2
        let w1 = 1.0 + 4.0 * PI * PI * 1.0;
        let w2 = 1.0 + 4.0 * PI * PI * 5.0;
        let oracle = (2.0 * (w1 * a / 2.0).powi(2) + 2.0 * (w2 * b / 2.0).powi(2)).sqrt();
        assert_relative_eq!(p.epsilon, oracle, max_relative = 1e-12);
        let scaled = make_perturbation(&g, &[Mode::cos(vec![1, 0], a), Mode::sin(vec![1, 2], b)], Some(0.01)).unwrap();
        assert_relative_eq!(scaled.epsilon, 0.01, max_relative = 1e-12);
    }

    #[test]
    fn rejects_zero_and_unresolved_modes() {
        let g = TorusGrid::uniform(2, 8).unwrap();
        assert!(make_perturbation(&g, &[Mode::cos(vec![0, 0], 1.0)], None).is_err());
        assert!(make_perturbation(&g, &[Mode::cos(vec![0, 4], 1.0)], None).is_err());
        assert!(make_perturbation(&g, &[Mode::cos(vec![1], 1.0)], None).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = TorusGrid::uniform(2, 16).unwrap();
        let m = model(DiffusionTensor::identity(2));
        let sol = solve_cell(&m, 1.0, &PeriodicPerturbation::zero(g), 0.5, &[0.0, 0.25, 0.5]).unwrap();
        assert!(sol.snapshots.iter().all(|s| s.values.iter().all(|&v| v == 0.0)));
        let d = cell_decay_rate(&sol, None).unwrap();
        assert_eq!(d.sup.outcome, Some(DecayOutcome::AlreadyConverged));
    }

    #[test]
    fn gradient_is_fourth_order() {
        let errs: Vec<f64> = [16usize, 32]
            .iter()
            .map(|&n| {
                let g = TorusGrid::uniform(1, n).unwrap();
                let v: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
                let d = periodic_gradient(&g, &v, 0);
                (0..n)
                    .map(|i| (d[i] - 2.0 * PI * (2.0 * PI * i as f64 / n as f64).cos()).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!((errs[0] / errs[1]).log2() > 3.9);
    }

    #[test]
    fn cole_hopf_profile_has_zero_mean_and_consistent_slope() {
        let c = ColeHopfCell::new(1.0, 0.8, 0.3, 1).unwrap();
        let n = 4096;
        let mean: f64 = (0..n).map(|i| c.profile(i as f64 / n as f64, 0.1).0).sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-15);
        let h = 1e-6;
        let fd = (c.profile(0.3 + h, 0.1).0 - c.profile(0.3 - h, 0.1).0) / (2.0 * h);
        assert_relative_eq!(c.profile(0.3, 0.1).1, fd, max_relative = 1e-7);
    }

    #[test]
    fn snapshot_interpolation_is_exact_at_nodes() {
        let g = TorusGrid::uniform(2, 8).unwrap();
        let p = make_perturbation(&g, &[Mode::cos(vec![1, 1], 0.1)], None).unwrap();
        let s = CellSnapshot::new(g.clone(), 0.0, p.values.clone());
        let l = g.layout();
        for i1 in 0..8 {
            for i2 in 0..8 {
                let (v, _) = s.interpolate([i1 as f64 / 8.0, i2 as f64 / 8.0, 0.0]);
                assert!((v - p.values[l.index(i1, i2, 0)]).abs() < 1e-15);
            }
        }
        // periodic wrap
        let (v, _) = s.interpolate([1.0 + 3.0 / 8.0, -5.0 / 8.0, 0.0]);
        assert!((v - p.values[l.index(3, 3, 0)]).abs() < 1e-15);
    }
}
