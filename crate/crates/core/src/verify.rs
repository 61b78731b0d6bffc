//! Scheme verification and structural property checks.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cell::{make_perturbation, solve_cell, CellModel, Mode};
use crate::channel::ChannelSolver;
use crate::decay::{fit_exponential, lp_norm_with, nonzero_mode, zero_mode};
use crate::error::Result;
use crate::flux::{DiffusionTensor, FluxLaw, FluxSpec, TransverseFluxSet};
use crate::grid::{ChannelGrid, TorusGrid};
use crate::kernel::Scheme;
use crate::par::{self, Exec};
use crate::profiles::PNorm;

/// Observed order between consecutive levels.
pub fn observed_orders(h: &[f64], err: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(err.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
}

impl ConvergenceReport {
    fn new(h: Vec<f64>, errors: Vec<f64>) -> Self {
        let orders = observed_orders(&h, &errors);
        Self { h, errors, orders }
    }

    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `u = 1/2 + 0.2 e^{-t/2} sin(x1 + 0.3) + 0.1 e^{-t} sin(x1) cos(2 pi x2)`
/// with its first and second derivatives.
struct Manufactured;

impl Manufactured {
    fn eval(&self, x1: f64, x2: f64, t: f64) -> [f64; 7] {
        let ep = 0.2 * (-0.5 * t).exp();
        let eq = 0.1 * (-t).exp();
        let (s1, c1) = x1.sin_cos();
        let (sp, cp) = (x1 + 0.3).sin_cos();
        let (s2, c2) = (2.0 * PI * x2).sin_cos();
        let p = ep * sp;
        let q = eq * s1 * c2;
        let u = 0.5 + p + q;
        let ut = -0.5 * p - q;
        let u1 = ep * cp + eq * c1 * c2;
        let u2 = -2.0 * PI * eq * s1 * s2;
        let u11 = -p - q;
        let u22 = -4.0 * PI * PI * q;
        let u12 = -2.0 * PI * eq * c1 * s2;
        [u, ut, u1, u2, u11, u22, u12]
    }

    fn forcing(&self, x1: f64, x2: f64, t: f64, a: &DiffusionTensor) -> f64 {
        let [u, ut, u1, u2, u11, u22, u12] = self.eval(x1, x2, t);
        let f1p = u + 0.5 * u * u;
        ut + f1p * u1 + u * u2
            - a.get(0, 0) * u11
            - (a.get(0, 1) + a.get(1, 0)) * u12
            - a.get(1, 1) * u22
    }
}

/// Channel solver against a manufactured solution with the convex flux,
/// Burgers transverse flux and a full diffusion tensor; refines `x1` and
/// `x2` together and reports max-norm errors at `t_end`.
pub fn manufactured_convergence(a: &DiffusionTensor, levels: &[usize], t_end: f64, exec: Exec) -> Result<ConvergenceReport> {
    let ms = Manufactured;
    let mut h = Vec::new();
    let mut errors = Vec::new();
    for &k in levels {
        let grid = ChannelGrid::new(PI, 8 * k + 1, vec![2 * k])?;
        let m = grid.row_len();
        let mut solver = ChannelSolver::new(&grid, vec![FluxLaw::ConvexDegenerate, FluxLaw::Burgers], a, Scheme::Central, exec)?;
        let x2 = |j: usize| grid.transverse_coord(0, j);
        let mut u: Vec<f64> = (0..grid.len()).map(|c| ms.eval(grid.x1(c / m), x2(c % m), 0.0)[0]).collect();
        let ghosts = |t: f64| {
            let row = |r: isize| (0..m).map(move |j| (r, j));
            let n1 = grid.n1 as isize;
            let left: Vec<f64> = row(-2).chain(row(-1)).map(|(r, j)| ms.eval(grid.x1_ext(r), x2(j), t)[0]).collect();
            let right: Vec<f64> = row(n1).chain(row(n1 + 1)).map(|(r, j)| ms.eval(grid.x1_ext(r), x2(j), t)[0]).collect();
            (left, right)
        };
        let coords: Vec<(f64, f64)> = (0..grid.len()).map(|c| (grid.x1(c / m), x2(c % m))).collect();
        let source = |t: f64, out: &mut [f64]| {
            for (o, &(y1, y2)) in out.iter_mut().zip(&coords) {
                *o += ms.forcing(y1, y2, t, a);
            }
        };
        let steps = (t_end / (0.5 * solver.stable_dt(&u))).ceil() as usize;
        let dt = t_end / steps as f64;
        let mut now = ghosts(0.0);
        for s in 0..steps {
            let t = s as f64 * dt;
            let next = ghosts(t + dt);
            solver.step(&mut u, t, dt, (&now.0, &now.1), (&next.0, &next.1), Some(&source));
            now = next;
        }
        let err = par::map_indices(exec, grid.len(), |c| {
            let (y1, y2) = coords[c];
            (u[c] - ms.eval(y1, y2, t_end)[0]).abs()
        })
        .into_iter()
        .fold(0.0, f64::max);
        h.push(grid.h1());
        errors.push(err);
    }
    Ok(ConvergenceReport::new(h, errors))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeatModeCheck {
    pub k: Vec<i64>,
    pub analytic: f64,
    pub measured: f64,
    pub rel_error: f64,
}

/// Pure diffusion on the torus (`f = 0`, `A = I`): decay rate of single
/// modes against `|2 pi k|^2`.
pub fn heat_mode_rates(points: usize, modes: &[Vec<i64>], exec: Exec) -> Result<Vec<HeatModeCheck>> {
    let a = DiffusionTensor::identity(2);
    let grid = TorusGrid::new(vec![points, points])?;
    let model = CellModel {
        flux: FluxSpec::new("zero", FluxLaw::Zero),
        transverse: TransverseFluxSet::new(vec![FluxLaw::Zero]),
        diffusion: a.clone(),
        scheme: Scheme::Central,
        exec,
    };
    modes
        .iter()
        .map(|k| {
            let analytic = 4.0 * PI * PI * k.iter().map(|&c| (c * c) as f64).sum::<f64>();
            let v0 = make_perturbation(&grid, &[Mode::cos(k.clone(), 1e-3)], None)?;
            let t_end = 4.0 / analytic;
            let snaps: Vec<f64> = (1..=20).map(|i| t_end * i as f64 / 20.0).collect();
            let sol = solve_cell(&model, 0.0, &v0, t_end, &snaps)?;
            let fit = fit_exponential(&sol.sup_series, None)?;
            let measured = fit.rate();
            Ok(HeatModeCheck { k: k.clone(), analytic, measured, rel_error: (measured - analytic).abs() / analytic })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionCheck {
    pub fields: usize,
    /// Largest `| ||f||^2 - ||D0 f||^2 - ||Dn f||^2 | / ||f||^2`.
    pub pythagoras: f64,
    /// Largest `|D0 Dn f|`.
    pub projection: f64,
}

/// Pythagoras and projection identities on seeded random fields.
pub fn decomposition_identities(grid: &ChannelGrid, fields: usize, seed: u64) -> Result<DecompositionCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pyth = 0.0f64;
    let mut proj = 0.0f64;
    for _ in 0..fields {
        let f: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d0 = zero_mode(&f, grid)?;
        let dn = nonzero_mode(&f, grid)?;
        let l2 = |v: &[f64]| lp_norm_with(Exec::Sequential, v, PNorm::Finite(2.0), grid);
        let (nf, n0, nn) = (l2(&f)?, l2(&d0)?, l2(&dn)?);
        pyth = pyth.max((nf * nf - n0 * n0 - nn * nn).abs() / (nf * nf));
        proj = proj.max(zero_mode(&dn, grid)?.iter().fold(0.0, |a, v| a.max(v.abs())));
    }
    Ok(DecompositionCheck { fields, pythagoras: pyth, projection: proj })
}
