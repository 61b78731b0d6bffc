//! Explicit finite-difference kernel shared by the periodic cells and the
//! channel.
//!
//! Convective terms are in divergence form (central or MUSCL/Rusanov
//! interface fluxes), diffusion uses centered second differences with the
//! mixed stencil for `a_ij`, `i != j`, and time stepping is Heun's method
//! (two-stage SSP Runge-Kutta). The field is padded with two ghost rows in
//! `x1` on each side; transverse directions wrap periodically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{DiffusionTensor, FluxLaw};
use crate::grid::Layout;
use crate::par::{self, Exec};

pub const C_ADV: f64 = 0.9;
pub const C_DIFF: f64 = 0.9;
const GHOST: usize = 2;

/// Convective discretization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Central,
    /// MUSCL-minmod reconstruction with Rusanov interface fluxes.
    Limited,
}

/// How the `x1` ghost rows are filled.
#[derive(Clone, Copy, Debug)]
pub enum Ghosts<'a> {
    Periodic,
    /// Two rows on each side: `left` holds rows `-2, -1`, `right` holds rows
    /// `n1, n1 + 1`.
    Dirichlet { left: &'a [f64], right: &'a [f64] },
}

/// Forcing added to the right-hand side: `source(t, rhs)`.
pub type Source<'a> = &'a (dyn Fn(f64, &mut [f64]) + Sync);

#[derive(Clone, Debug)]
pub struct Operator {
    layout: Layout,
    h: [f64; 3],
    ndim: usize,
    fluxes: Vec<FluxLaw>,
    base: f64,
    a: [[f64; 3]; 3],
    scheme: Scheme,
    pub exec: Exec,
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

impl Operator {
    /// `fluxes[d]` is the flux in direction `d`; the kernel evolves
    /// `v = u - base` with shifted fluxes `f(base + v) - f(base)`.
    pub fn new(
        layout: Layout,
        h: [f64; 3],
        fluxes: Vec<FluxLaw>,
        base: f64,
        diffusion: &DiffusionTensor,
        scheme: Scheme,
        exec: Exec,
    ) -> Result<Self> {
        let ndim = diffusion.dim();
        if fluxes.len() != ndim {
            return Err(Error::InvalidArgument(format!(
                "{} fluxes for a {ndim}-dimensional diffusion tensor",
                fluxes.len()
            )));
        }
        let dims = [layout.n1, layout.n2, layout.n3];
        if dims.iter().skip(ndim).any(|&m| m != 1) {
            return Err(Error::InvalidArgument("layout has more directions than the tensor".into()));
        }
        if h.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidArgument("grid spacings must be positive".into()));
        }
        let mut a = [[0.0; 3]; 3];
        for (i, row) in a.iter_mut().enumerate().take(ndim) {
            for (j, v) in row.iter_mut().enumerate().take(ndim) {
                *v = diffusion.get(i, j);
            }
        }
        Ok(Self {
            layout,
            h,
            ndim,
            fluxes,
            base,
            a,
            scheme,
            exec,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn padded_len(&self) -> usize {
        (self.layout.n1 + 2 * GHOST) * self.layout.row_len()
    }

    fn dims(&self) -> [usize; 3] {
        [self.layout.n1, self.layout.n2, self.layout.n3]
    }

    /// Copies `u` into the padded buffer and fills the ghost rows.
    pub fn pad(&self, u: &[f64], ghosts: &Ghosts, padded: &mut [f64]) {
        let m = self.layout.row_len();
        let n1 = self.layout.n1;
        padded[GHOST * m..(GHOST + n1) * m].copy_from_slice(u);
        match ghosts {
            Ghosts::Periodic => {
                for g in 0..GHOST {
                    // row -(g+1) <- row n1-(g+1) (mod n1); row n1+g <- row g (mod n1)
                    let src_l = (n1 - (g + 1) % n1) % n1;
                    let dst_l = GHOST - 1 - g;
                    padded[dst_l * m..(dst_l + 1) * m].copy_from_slice(&u[src_l * m..(src_l + 1) * m]);
                    let src_r = g % n1;
                    let dst_r = GHOST + n1 + g;
                    padded[dst_r * m..(dst_r + 1) * m].copy_from_slice(&u[src_r * m..(src_r + 1) * m]);
                }
            }
            Ghosts::Dirichlet { left, right } => {
                assert_eq!(left.len(), GHOST * m);
                assert_eq!(right.len(), GHOST * m);
                padded[..GHOST * m].copy_from_slice(left);
                padded[(GHOST + n1) * m..].copy_from_slice(right);
            }
        }
    }

    #[inline]
    fn g(&self, d: usize, v: f64) -> f64 {
        self.fluxes[d].shifted(self.base, v)
    }

    #[inline]
    fn gp(&self, d: usize, v: f64) -> f64 {
        self.fluxes[d].d1(self.base + v)
    }

    fn rusanov(&self, d: usize, um: f64, u0: f64, u1: f64, u2: f64) -> f64 {
        let ul = u0 + 0.5 * minmod(u0 - um, u1 - u0);
        let ur = u1 - 0.5 * minmod(u1 - u0, u2 - u1);
        let alpha = self.gp(d, ul).abs().max(self.gp(d, ur).abs());
        0.5 * (self.g(d, ul) + self.g(d, ur)) - 0.5 * alpha * (ur - ul)
    }

    /// Evaluates the spatial operator on the interior rows of `padded`.
    /// `fbuf` is scratch of `ndim` buffers of padded length.
    pub fn rhs(&self, padded: &[f64], out: &mut [f64], fbuf: &mut [Vec<f64>]) {
        let l = self.layout;
        let m = l.row_len();
        let dims = self.dims();
        if self.scheme == Scheme::Central {
            for (d, buf) in fbuf.iter_mut().enumerate().take(self.ndim) {
                if dims[d] == 1 {
                    continue;
                }
                par::for_each_row_mut(self.exec, buf, m, |r, row| {
                    let src = &padded[r * m..(r + 1) * m];
                    for (o, &v) in row.iter_mut().zip(src) {
                        *o = self.g(d, v);
                    }
                });
            }
        }
        let fbuf: &[Vec<f64>] = fbuf;
        let (n2, n3) = (l.n2, l.n3);
        let [h1, h2, h3] = self.h;
        let a = self.a;
        let active = [dims[0] > 1, dims[1] > 1, dims[2] > 1];
        let central = self.scheme == Scheme::Central;
        par::for_each_row_mut(self.exec, out, m, |i, row| {
            let p = i + GHOST;
            let at = |r: usize, j2: usize, j3: usize| r * m + j2 * n3 + j3;
            for j2 in 0..n2 {
                let j2p = (j2 + 1) % n2;
                let j2m = (j2 + n2 - 1) % n2;
                let j2pp = (j2 + 2) % n2;
                let j2mm = (j2 + 2 * n2 - 2) % n2;
                for j3 in 0..n3 {
                    let j3p = (j3 + 1) % n3;
                    let j3m = (j3 + n3 - 1) % n3;
                    let j3pp = (j3 + 2) % n3;
                    let j3mm = (j3 + 2 * n3 - 2) % n3;
                    let c = at(p, j2, j3);
                    let u0 = padded[c];
                    let mut acc = 0.0;
                    // x1
                    if active[0] {
                        let (cm, cp) = (at(p - 1, j2, j3), at(p + 1, j2, j3));
                        if central {
                            acc -= (fbuf[0][cp] - fbuf[0][cm]) / (2.0 * h1);
                        } else {
                            let (cmm, cpp) = (at(p - 2, j2, j3), at(p + 2, j2, j3));
                            let fr = self.rusanov(0, padded[cm], u0, padded[cp], padded[cpp]);
                            let fl = self.rusanov(0, padded[cmm], padded[cm], u0, padded[cp]);
                            acc -= (fr - fl) / h1;
                        }
                        acc += a[0][0] * (padded[cp] - 2.0 * u0 + padded[cm]) / (h1 * h1);
                    }
                    if active[1] {
                        let (cm, cp) = (at(p, j2m, j3), at(p, j2p, j3));
                        if central {
                            acc -= (fbuf[1][cp] - fbuf[1][cm]) / (2.0 * h2);
                        } else {
                            let (cmm, cpp) = (at(p, j2mm, j3), at(p, j2pp, j3));
                            let fr = self.rusanov(1, padded[cm], u0, padded[cp], padded[cpp]);
                            let fl = self.rusanov(1, padded[cmm], padded[cm], u0, padded[cp]);
                            acc -= (fr - fl) / h2;
                        }
                        acc += a[1][1] * (padded[cp] - 2.0 * u0 + padded[cm]) / (h2 * h2);
                    }
                    if active[2] {
                        let (cm, cp) = (at(p, j2, j3m), at(p, j2, j3p));
                        if central {
                            acc -= (fbuf[2][cp] - fbuf[2][cm]) / (2.0 * h3);
                        } else {
                            let (cmm, cpp) = (at(p, j2, j3mm), at(p, j2, j3pp));
                            let fr = self.rusanov(2, padded[cm], u0, padded[cp], padded[cpp]);
                            let fl = self.rusanov(2, padded[cmm], padded[cm], u0, padded[cp]);
                            acc -= (fr - fl) / h3;
                        }
                        acc += a[2][2] * (padded[cp] - 2.0 * u0 + padded[cm]) / (h3 * h3);
                    }
                    // mixed derivatives
                    if active[0] && active[1] {
                        let s = a[0][1] + a[1][0];
                        if s != 0.0 {
                            let d = padded[at(p + 1, j2p, j3)] - padded[at(p + 1, j2m, j3)]
                                - padded[at(p - 1, j2p, j3)]
                                + padded[at(p - 1, j2m, j3)];
                            acc += s * d / (4.0 * h1 * h2);
                        }
                    }
                    if active[0] && active[2] {
                        let s = a[0][2] + a[2][0];
                        if s != 0.0 {
                            let d = padded[at(p + 1, j2, j3p)] - padded[at(p + 1, j2, j3m)]
                                - padded[at(p - 1, j2, j3p)]
                                + padded[at(p - 1, j2, j3m)];
                            acc += s * d / (4.0 * h1 * h3);
                        }
                    }
                    if active[1] && active[2] {
                        let s = a[1][2] + a[2][1];
                        if s != 0.0 {
                            let d = padded[at(p, j2p, j3p)] - padded[at(p, j2p, j3m)]
                                - padded[at(p, j2m, j3p)]
                                + padded[at(p, j2m, j3m)];
                            acc += s * d / (4.0 * h2 * h3);
                        }
                    }
                    row[j2 * n3 + j3] = acc;
                }
            }
        });
    }

    /// Largest `|f_d'(base + v)|` per direction over the field.
    pub fn max_speeds(&self, v: &[f64]) -> [f64; 3] {
        let m = self.layout.row_len();
        let rows = par::map_rows(self.exec, v.len() / m, |r| {
            let mut s = [0.0f64; 3];
            for &x in &v[r * m..(r + 1) * m] {
                for (d, sd) in s.iter_mut().enumerate().take(self.ndim) {
                    *sd = sd.max(self.gp(d, x).abs());
                }
            }
            s
        });
        rows.into_iter().fold([0.0; 3], |a, b| [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])])
    }

    /// `min(C_adv / sum_d(max|f_d'| / h_d), C_diff / (2 sum_d a_dd / h_d^2))`
    /// over directions with more than one point.
    pub fn stable_dt(&self, v: &[f64]) -> f64 {
        let speeds = self.max_speeds(v);
        let dims = self.dims();
        let mut adv = 0.0;
        let mut diff = 0.0;
        for d in 0..self.ndim {
            if dims[d] > 1 {
                adv += speeds[d] / self.h[d];
                diff += self.a[d][d] / (self.h[d] * self.h[d]);
            }
        }
        let dt_adv = if adv > 0.0 { C_ADV / adv } else { f64::INFINITY };
        let dt_diff = if diff > 0.0 { C_DIFF / (2.0 * diff) } else { f64::INFINITY };
        dt_adv.min(dt_diff)
    }
}

/// Operator plus scratch buffers for Heun steps.
#[derive(Clone, Debug)]
pub struct Stepper {
    pub op: Operator,
    padded: Vec<f64>,
    stage: Vec<f64>,
    k: Vec<f64>,
    fbuf: Vec<Vec<f64>>,
}

impl Stepper {
    pub fn new(op: Operator) -> Self {
        let n = op.layout.len();
        let np = op.padded_len();
        let nd = op.ndim;
        Self {
            op,
            padded: vec![0.0; np],
            stage: vec![0.0; n],
            k: vec![0.0; n],
            fbuf: vec![vec![0.0; np]; nd],
        }
    }

    /// Right-hand side at one state; used by residual and order tests.
    pub fn eval_rhs(&mut self, u: &[f64], ghosts: &Ghosts, out: &mut [f64]) {
        self.op.pad(u, ghosts, &mut self.padded);
        self.op.rhs(&self.padded, out, &mut self.fbuf);
    }

    /// One Heun step from `t` to `t + dt`. `ghosts_now` and `ghosts_next`
    /// are the boundary rows at the two stage times.
    pub fn heun_step(
        &mut self,
        u: &mut [f64],
        t: f64,
        dt: f64,
        ghosts_now: &Ghosts,
        ghosts_next: &Ghosts,
        source: Option<Source>,
    ) {
        let m = self.op.layout.row_len();
        let exec = self.op.exec;
        self.op.pad(u, ghosts_now, &mut self.padded);
        self.op.rhs(&self.padded, &mut self.k, &mut self.fbuf);
        if let Some(s) = source {
            s(t, &mut self.k);
        }
        {
            let k = &self.k;
            let u0: &[f64] = u;
            par::for_each_row_mut(exec, &mut self.stage, m, |r, row| {
                for (j, v) in row.iter_mut().enumerate() {
                    let c = r * m + j;
                    *v = u0[c] + dt * k[c];
                }
            });
        }
        self.op.pad(&self.stage, ghosts_next, &mut self.padded);
        self.op.rhs(&self.padded, &mut self.k, &mut self.fbuf);
        if let Some(s) = source {
            s(t + dt, &mut self.k);
        }
        let k = &self.k;
        let stage = &self.stage;
        par::for_each_row_mut(exec, u, m, |r, row| {
            for (j, v) in row.iter_mut().enumerate() {
                let c = r * m + j;
                *v = 0.5 * (*v + stage[c] + dt * k[c]);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::DiffusionTensor;
    use std::f64::consts::PI;

    fn torus_op(n: usize, fluxes: Vec<FluxLaw>, a: &DiffusionTensor, scheme: Scheme) -> Operator {
        Operator::new(
            Layout { n1: n, n2: n, n3: 1 },
            [1.0 / n as f64, 1.0 / n as f64, 1.0],
            fluxes,
            0.0,
            a,
            scheme,
            Exec::Parallel,
        )
        .unwrap()
    }

    #[test]
    fn constant_state_is_steady() {
        let a = DiffusionTensor::new(&[vec![1.0, 0.1], vec![0.1, 1.0]]).unwrap();
        for scheme in [Scheme::Central, Scheme::Limited] {
            let op = torus_op(8, vec![FluxLaw::Cubic, FluxLaw::Burgers], &a, scheme);
            let mut st = Stepper::new(op);
            let mut u = vec![0.7; 64];
            st.heun_step(&mut u, 0.0, 1e-3, &Ghosts::Periodic, &Ghosts::Periodic, None);
            assert!(u.iter().all(|&v| v == 0.7));
        }
    }

    #[test]
    fn sequential_and_parallel_steps_agree() {
        let a = DiffusionTensor::new(&[vec![1.0, 0.3], vec![0.1, 0.8]]).unwrap();
        let n = 16;
        let mut u1: Vec<f64> = (0..n * n)
            .map(|k| (2.0 * PI * (k / n) as f64 / n as f64).sin() * 0.3 + ((k % n) as f64 * 0.7).cos() * 0.1)
            .collect();
        let mut u2 = u1.clone();
        let mut op = torus_op(n, vec![FluxLaw::ConvexDegenerate, FluxLaw::Burgers], &a, Scheme::Central);
        let mut s1 = Stepper::new(op.clone());
        op.exec = Exec::Sequential;
        let mut s2 = Stepper::new(op);
        for k in 0..5 {
            let t = k as f64 * 1e-3;
            s1.heun_step(&mut u1, t, 1e-3, &Ghosts::Periodic, &Ghosts::Periodic, None);
            s2.heun_step(&mut u2, t, 1e-3, &Ghosts::Periodic, &Ghosts::Periodic, None);
        }
        assert_eq!(u1, u2);
    }

    #[test]
    fn mixed_stencil_is_exact_on_bilinear_products() {
        // u = sin(2 pi x) sin(2 pi y): discrete u_xy = s^2 cos cos with s = sin(2 pi h)/h
        let n = 32;
        let h = 1.0 / n as f64;
        let a = DiffusionTensor::new(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let op = torus_op(n, vec![FluxLaw::Zero, FluxLaw::Zero], &a, Scheme::Central);
        let mut st = Stepper::new(op);
        let u: Vec<f64> = (0..n * n)
            .map(|k| (2.0 * PI * (k / n) as f64 * h).sin() * (2.0 * PI * (k % n) as f64 * h).sin())
            .collect();
        let mut out = vec![0.0; n * n];
        st.eval_rhs(&u, &Ghosts::Periodic, &mut out);
        let s = (2.0 * PI * h).sin() / h;
        for k in 0..n * n {
            let (x, y) = ((k / n) as f64 * h, (k % n) as f64 * h);
            let exact = s * s * (2.0 * PI * x).cos() * (2.0 * PI * y).cos();
            let lambda = 2.0 * (1.0 - (2.0 * PI * h).cos()) / (h * h);
            assert!((out[k] + 2.0 * lambda * u[k] - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn dt_rule() {
        let a = DiffusionTensor::identity(2);
        let op = torus_op(10, vec![FluxLaw::Burgers, FluxLaw::Zero], &a, Scheme::Central);
        let v = vec![2.0; 100];
        let dt = op.stable_dt(&v);
        let diff = C_DIFF / (2.0 * 200.0);
        let adv = C_ADV / (2.0 / 0.1);
        assert!((dt - diff.min(adv)).abs() < 1e-15);
    }
}
