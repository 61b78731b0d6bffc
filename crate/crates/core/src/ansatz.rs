//! The weight `eta`, the background state
//! `ubar = (1 - eta) u~_- + eta u~_+ + uhat`, the interaction term `N`, and
//! the source `J = J1 + J2` by which `ubar` fails to solve the PDE.

use serde::{Deserialize, Serialize};

use crate::cell::CellField;
use crate::decay::lp_norm;
use crate::error::{Error, Result};
use crate::flux::{DiffusionTensor, FluxLaw, FluxSpec, TransverseFluxSet};
use crate::grid::ChannelGrid;
use crate::par::{self, Exec};
use crate::profiles::{PNorm, ProfileSet};

/// `eta` and its derivatives at one point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EtaPoint {
    pub value: f64,
    pub dx: f64,
    pub dxx: f64,
    pub dt: f64,
}

/// `eta = (u^c - u_-) / |u_-|`.
pub fn eta(x1: f64, t: f64, profiles: &ProfileSet) -> f64 {
    eta_point(x1, t, profiles).value
}

pub fn eta_point(x1: f64, t: f64, profiles: &ProfileSet) -> EtaPoint {
    let um = profiles.endpoints.u_minus;
    let c = profiles.contact(x1, t);
    let s = um.abs();
    EtaPoint {
        value: ((c.u - um) / s).clamp(0.0, 1.0),
        dx: c.dx / s,
        dxx: c.dxx / s,
        dt: c.dt / s,
    }
}

/// `N(u^c, u^r) = -(f1'(u^c + u^r) - f1'(u^r)) u^r_x - f1'(u^c + u^r) u^c_x
/// + a11 u^r_xx`, so that `uhat_t + f1(uhat)_x = a11 uhat_xx - N`.
pub fn interaction_terms(flux: &FluxSpec, a11: f64, ur: f64, ur_x: f64, ur_xx: f64, uc: f64, uc_x: f64) -> f64 {
    let fh = flux.f1_prime(uc + ur);
    -(fh - flux.f1_prime(ur)) * ur_x - fh * uc_x + a11 * ur_xx
}

/// `N` at `(x1, t)` for the composite wave of `profiles`.
pub fn interaction_n(x1: f64, t: f64, profiles: &ProfileSet) -> f64 {
    let r = profiles.rarefaction(x1, t);
    let c = profiles.contact(x1, t);
    let rxx = profiles.rarefaction_dxx(x1, t);
    interaction_terms(&profiles.flux, profiles.a11, r.u, r.dx, rxx, c.u, c.dx)
}

/// Profile quantities needed on one `x1` line.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProfileRow {
    pub x1: f64,
    pub eta: EtaPoint,
    pub u_hat: f64,
    pub du_hat: f64,
    /// `J2 = -N`.
    pub j2: f64,
}

pub fn profile_row(x1: f64, t: f64, profiles: &ProfileSet) -> ProfileRow {
    let r = profiles.rarefaction(x1, t);
    let c = profiles.contact(x1, t);
    let rxx = profiles.rarefaction_dxx(x1, t);
    let n = interaction_terms(&profiles.flux, profiles.a11, r.u, r.dx, rxx, c.u, c.dx);
    ProfileRow {
        x1,
        eta: eta_point(x1, t, profiles),
        u_hat: r.u + c.u,
        du_hat: r.dx + c.dx,
        j2: -n,
    }
}

/// Fluxes, viscosity and far-field states used to evaluate `J`.
#[derive(Clone, Debug)]
pub struct SourceModel {
    pub flux: FluxSpec,
    laws: Vec<FluxLaw>,
    a: [[f64; 3]; 3],
    ndim: usize,
    pub u_minus: f64,
    pub u_plus: f64,
    /// Count the `(1,1)` cross term `a11 eta_x (u~_+ - u~_-)_x1` once
    /// instead of once per cross sum.
    pub merge_diagonal_cross: bool,
}

impl SourceModel {
    pub fn new(profiles: &ProfileSet, transverse: &TransverseFluxSet, a: &DiffusionTensor) -> Result<Self> {
        let ndim = a.dim();
        if transverse.len() + 1 != ndim {
            return Err(Error::InvalidArgument("one transverse flux per transverse direction".into()));
        }
        if (a.a11() - profiles.a11).abs() > 1e-15 * a.a11() {
            return Err(Error::InvalidArgument("profiles built with a different a11".into()));
        }
        let mut laws = vec![profiles.flux.law().clone()];
        laws.extend(transverse.laws().iter().cloned());
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate().take(ndim) {
            for (j, v) in row.iter_mut().enumerate().take(ndim) {
                *v = a.get(i, j);
            }
        }
        Ok(Self {
            flux: profiles.flux.clone(),
            laws,
            a: m,
            ndim,
            u_minus: profiles.endpoints.u_minus,
            u_plus: profiles.endpoints.u_plus,
            merge_diagonal_cross: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.ndim
    }

    pub fn flux_value(&self, d: usize, u: f64) -> f64 {
        self.laws[d].value(u)
    }

    fn fp(&self, d: usize, u: f64) -> f64 {
        self.laws[d].d1(u)
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    /// `ubar` at one point.
    pub fn ubar(&self, row: &ProfileRow, um: f64, up: f64) -> f64 {
        let e = row.eta.value;
        (1.0 - e) * um + e * up + row.u_hat
    }

    /// `(J1, J2)` at one point from the profile row and the two cell
    /// samples `(u~, grad u~)`.
    pub fn source_parts(&self, row: &ProfileRow, um: f64, gm: [f64; 3], up: f64, gp: [f64; 3]) -> (f64, f64) {
        let e = row.eta;
        let d = up - um;
        let ubar = self.ubar(row, um, up);
        let (bm, bp) = (self.u_minus + um, self.u_plus + up);
        let mut flux_terms = 0.0;
        for i in 0..self.ndim {
            let mut ubar_i = (1.0 - e.value) * gm[i] + e.value * gp[i];
            if i == 0 {
                ubar_i += e.dx * d + row.du_hat;
            }
            flux_terms += self.fp(i, ubar) * ubar_i
                - (1.0 - e.value) * self.fp(i, bm) * gm[i]
                - e.value * self.fp(i, bp) * gp[i];
        }
        flux_terms -= self.fp(0, row.u_hat) * row.du_hat;
        let mut cross = 0.0;
        for i in 0..self.ndim {
            let dd = gp[i] - gm[i];
            cross -= self.a[i][0] * e.dx * dd;
            if !(self.merge_diagonal_cross && i == 0) {
                cross -= self.a[0][i] * e.dx * dd;
            }
        }
        let j1 = flux_terms + cross - self.a[0][0] * e.dxx * d + e.dt * d;
        (j1, row.j2)
    }

    /// `J` assembled in one pass from the defect of each piece, without
    /// splitting off the interaction term; must equal `J1 + J2`.
    pub fn source_direct(
        &self,
        profiles: &ProfileSet,
        t: f64,
        x1: f64,
        um: f64,
        gm: [f64; 3],
        up: f64,
        gp: [f64; 3],
    ) -> f64 {
        let r = profiles.rarefaction(x1, t);
        let c = profiles.contact(x1, t);
        let rxx = profiles.rarefaction_dxx(x1, t);
        let e = eta_point(x1, t, profiles);
        let d = up - um;
        let ubar = (1.0 - e.value) * um + e.value * up + r.u + c.u;
        let (bm, bp) = (self.u_minus + um, self.u_plus + up);
        let mut div = 0.0;
        for i in 0..self.ndim {
            let mut gi = (1.0 - e.value) * gm[i] + e.value * gp[i];
            if i == 0 {
                gi += e.dx * d + r.dx + c.dx;
            }
            div += self.fp(i, ubar) * gi;
            div -= (1.0 - e.value) * self.fp(i, bm) * gm[i] + e.value * self.fp(i, bp) * gp[i];
        }
        let mut visc = self.a[0][0] * e.dxx * d;
        for i in 0..self.ndim {
            let w = if self.merge_diagonal_cross && i == 0 { 1.0 } else { 2.0 };
            let sym = if i == 0 { w * self.a[0][0] } else { self.a[i][0] + self.a[0][i] };
            visc += sym * e.dx * (gp[i] - gm[i]);
        }
        // uhat_t - a11 uhat_xx = -f1'(u^r) u^r_x - a11 u^r_xx
        div + e.dt * d - visc - self.flux.f1_prime(r.u) * r.dx - profiles.a11 * rxx
    }
}

/// Background state on a channel grid at one time.
#[derive(Clone, Debug)]
pub struct AnsatzState {
    pub t: f64,
    pub grid: ChannelGrid,
    pub rows: Vec<ProfileRow>,
    pub u_minus_tilde: Vec<f64>,
    pub u_plus_tilde: Vec<f64>,
    pub grad_minus: Vec<[f64; 3]>,
    pub grad_plus: Vec<[f64; 3]>,
    pub ubar: Vec<f64>,
}

impl AnsatzState {
    pub fn u_hat(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.u_hat).collect()
    }

    pub fn du_hat(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.du_hat).collect()
    }

    pub fn eta(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.eta.value).collect()
    }

    /// `max |ubar - uhat|`.
    pub fn deviation_sup(&self) -> f64 {
        let m = self.grid.row_len();
        self.ubar
            .iter()
            .enumerate()
            .fold(0.0, |a, (k, &v)| a.max((v - self.rows[k / m].u_hat).abs()))
    }
}

/// Coordinates `(x1, x2, x3)` of flat index `k` on the channel grid.
pub fn channel_point(grid: &ChannelGrid, k: usize) -> [f64; 3] {
    let l = grid.layout();
    let i1 = k / l.row_len();
    let r = k % l.row_len();
    let (i2, i3) = (r / l.n3, r % l.n3);
    let mut x = [grid.x1(i1), 0.0, 0.0];
    if grid.transverse.len() > 0 {
        x[1] = grid.transverse_coord(0, i2);
    }
    if grid.transverse.len() > 1 {
        x[2] = grid.transverse_coord(1, i3);
    }
    x
}

/// Minimum half-width for the fans at time `t`; the same envelope the
/// config validation applies at `t_end`.
pub fn required_half_width(profiles: &ProfileSet, t: f64) -> f64 {
    crate::config::containment_half_width(profiles.lambda_plus(), profiles.a11, t)
}

/// Assembles `ubar` and everything `J` needs at time `t`.
pub fn build_ansatz(
    t: f64,
    profiles: &ProfileSet,
    cell_minus: &dyn CellField,
    cell_plus: &dyn CellField,
    grid: &ChannelGrid,
) -> Result<AnsatzState> {
    let need = required_half_width(profiles, t);
    if grid.half_width < need {
        return Err(Error::InvalidArgument(format!(
            "channel half-width {} is narrower than the fan envelope {need:.1} at t = {t}",
            grid.half_width
        )));
    }
    let rows = par::map_indices(Exec::Parallel, grid.n1, |i| profile_row(grid.x1(i), t, profiles));
    let m = grid.row_len();
    let samples = par::map_rows(Exec::Parallel, grid.n1, |i| {
        (0..m)
            .map(|j| {
                let x = channel_point(grid, i * m + j);
                (cell_minus.sample(x, t), cell_plus.sample(x, t))
            })
            .collect::<Vec<_>>()
    });
    let n = grid.len();
    let mut um = Vec::with_capacity(n);
    let mut up = Vec::with_capacity(n);
    let mut gm = Vec::with_capacity(n);
    let mut gp = Vec::with_capacity(n);
    let mut ubar = Vec::with_capacity(n);
    for (i, row) in samples.into_iter().enumerate() {
        let pr = &rows[i];
        for ((vm, gmk), (vp, gpk)) in row {
            um.push(vm);
            up.push(vp);
            gm.push(gmk);
            gp.push(gpk);
            let e = pr.eta.value;
            ubar.push((1.0 - e) * vm + e * vp + pr.u_hat);
        }
    }
    Ok(AnsatzState {
        t,
        grid: grid.clone(),
        rows,
        u_minus_tilde: um,
        u_plus_tilde: up,
        grad_minus: gm,
        grad_plus: gp,
        ubar,
    })
}

/// `J` on the grid with its parts and norms.
#[derive(Clone, Debug)]
pub struct SourceField {
    pub t: f64,
    pub j: Vec<f64>,
    pub j1: Vec<f64>,
    /// One value per `x1` line.
    pub j2: Vec<f64>,
    pub norms: Vec<(PNorm, f64)>,
}

impl SourceField {
    pub fn norm(&self, p: PNorm) -> Option<f64> {
        self.norms.iter().find(|(q, _)| *q == p).map(|(_, v)| *v)
    }
}

pub fn compute_j(ansatz: &AnsatzState, model: &SourceModel, p_list: &[PNorm]) -> Result<SourceField> {
    let grid = &ansatz.grid;
    let m = grid.row_len();
    let parts = par::map_rows(Exec::Parallel, grid.n1, |i| {
        let row = &ansatz.rows[i];
        (i * m..(i + 1) * m)
            .map(|k| {
                model
                    .source_parts(
                        row,
                        ansatz.u_minus_tilde[k],
                        ansatz.grad_minus[k],
                        ansatz.u_plus_tilde[k],
                        ansatz.grad_plus[k],
                    )
                    .0
            })
            .collect::<Vec<_>>()
    });
    let j1: Vec<f64> = parts.into_iter().flatten().collect();
    let j2: Vec<f64> = ansatz.rows.iter().map(|r| r.j2).collect();
    let j: Vec<f64> = j1.iter().enumerate().map(|(k, &a)| a + j2[k / m]).collect();
    if let Some(k) = j.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "J at grid index {k} (x1 = {}) is not finite",
            grid.x1(k / m)
        )));
    }
    let norms = p_list
        .iter()
        .map(|&p| lp_norm(&j, p, grid).map(|v| (p, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SourceField { t: ansatz.t, j, j1, j2, norms })
}

/// Sample points and time for the ansatz residual.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualProbe {
    pub t: f64,
    pub x1_range: (f64, f64),
    pub n_x1: usize,
    /// Points per transverse direction.
    pub n_transverse: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualLevel {
    pub h: f64,
    pub l1: f64,
    pub linf: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualReport {
    pub probe: ResidualProbe,
    pub merge_diagonal_cross: bool,
    pub levels: Vec<ResidualLevel>,
    /// `log2` ratios between consecutive levels.
    pub orders_l1: Vec<f64>,
    pub orders_linf: Vec<f64>,
}

impl ResidualReport {
    pub fn min_order_l1(&self) -> f64 {
        self.orders_l1.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn ubar_at(profiles: &ProfileSet, cm: &dyn CellField, cp: &dyn CellField, x: [f64; 3], t: f64) -> f64 {
    let e = eta(x[0], t, profiles);
    let (vm, _) = cm.sample(x, t);
    let (vp, _) = cp.sample(x, t);
    (1.0 - e) * vm + e * vp + profiles.composite(x[0], t)
}

/// Discrete residual of `ubar_t + sum_i f_i(ubar)_{x_i} - sum_ij a_ij
/// ubar_{x_i x_j} - J` at the probe points, with central differences of
/// step `h` in space and time, for each `h` in `steps`.
pub fn ansatz_residual(
    model: &SourceModel,
    profiles: &ProfileSet,
    cell_minus: &dyn CellField,
    cell_plus: &dyn CellField,
    probe: &ResidualProbe,
    steps: &[f64],
) -> Result<ResidualReport> {
    if probe.t <= *steps.iter().fold(&0.0, |a, b| if b > a { b } else { a }) {
        return Err(Error::InvalidArgument("probe time must exceed the largest step".into()));
    }
    let nd = model.dim();
    let nt = if nd > 1 { probe.n_transverse } else { 1 };
    let n3 = if nd > 2 { probe.n_transverse } else { 1 };
    let (a, b) = probe.x1_range;
    let t = probe.t;
    let points: Vec<[f64; 3]> = (0..probe.n_x1)
        .flat_map(|i| {
            let x1 = a + (b - a) * (i as f64 + 0.5) / probe.n_x1 as f64;
            (0..nt).flat_map(move |j| {
                (0..n3).map(move |k| [x1, (j as f64 + 0.25) / nt as f64, (k as f64 + 0.25) / n3 as f64])
            })
        })
        .collect();
    let mut levels = Vec::new();
    for &h in steps {
        let res = par::map_indices(Exec::Parallel, points.len(), |q| {
            let x = points[q];
            let u = |dx: [f64; 3], dt: f64| {
                ubar_at(profiles, cell_minus, cell_plus, [x[0] + dx[0], x[1] + dx[1], x[2] + dx[2]], t + dt)
            };
            let e = |d: usize, s: f64| {
                let mut v = [0.0; 3];
                v[d] = s;
                v
            };
            let u0 = u([0.0; 3], 0.0);
            let mut r = (u([0.0; 3], h) - u([0.0; 3], -h)) / (2.0 * h);
            let mut plus = [0.0; 3];
            let mut minus = [0.0; 3];
            for d in 0..nd {
                plus[d] = u(e(d, h), 0.0);
                minus[d] = u(e(d, -h), 0.0);
                r += (model.flux_value(d, plus[d]) - model.flux_value(d, minus[d])) / (2.0 * h);
                r -= model.a(d, d) * (plus[d] - 2.0 * u0 + minus[d]) / (h * h);
            }
            for d in 0..nd {
                for f in d + 1..nd {
                    let s = model.a(d, f) + model.a(f, d);
                    if s == 0.0 {
                        continue;
                    }
                    let mut pp = [0.0; 3];
                    pp[d] = h;
                    pp[f] = h;
                    let mut pm = pp;
                    pm[f] = -h;
                    let mut mp = pp;
                    mp[d] = -h;
                    let mut mm = mp;
                    mm[f] = -h;
                    r -= s * (u(pp, 0.0) - u(pm, 0.0) - u(mp, 0.0) + u(mm, 0.0)) / (4.0 * h * h);
                }
            }
            let row = profile_row(x[0], t, profiles);
            let (vm, gm) = cell_minus.sample(x, t);
            let (vp, gp) = cell_plus.sample(x, t);
            let (j1, j2) = model.source_parts(&row, vm, gm, vp, gp);
            r - j1 - j2
        });
        let measure = b - a;
        let l1 = res.iter().map(|v| v.abs()).sum::<f64>() / res.len() as f64 * measure;
        let linf = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        levels.push(ResidualLevel { h, l1, linf });
    }
    let orders = |f: fn(&ResidualLevel) -> f64| -> Vec<f64> {
        levels
            .windows(2)
            .map(|w| (f(&w[0]) / f(&w[1])).log2() / (w[0].h / w[1].h).log2())
            .collect()
    };
    let orders_l1 = orders(|l| l.l1);
    let orders_linf = orders(|l| l.linf);
    Ok(ResidualReport {
        probe: probe.clone(),
        merge_diagonal_cross: model.merge_diagonal_cross,
        levels,
        orders_l1,
        orders_linf,
    })
}
