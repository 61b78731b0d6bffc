//! Wave profiles: the smooth rarefaction `u^r`, the viscous contact wave
//! `u^c`, the composite `u_hat = u^c + u^r`, and the interface curve `X(t)`.
//!
//! `u^r(x1, t) = (f1')^{-1}(w(x1, t))` where `w` solves inviscid Burgers with
//! `tanh` data between `0` and `f1'(u_+)`; `w` is obtained pointwise from the
//! implicit characteristic relation `w = w0(x1 - w t)`. The contact wave is
//! the error-function solution of `U_t = a11 U_xx` shifted by one unit of
//! time, with contact speed zero.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::decay::{fit_power, FitResult, Series};
use crate::error::{Error, Result};
use crate::flux::FluxSpec;
use crate::par::{self, Exec};
use crate::quadrature::integrate;
use crate::roots::{bisect, monotone_root};

/// Far-field states of the composite wave, `u_- < 0 < u_+`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveEndpoints {
    pub u_minus: f64,
    pub u_plus: f64,
}

impl WaveEndpoints {
    pub fn new(u_minus: f64, u_plus: f64) -> Result<Self> {
        if !(u_minus < 0.0 && u_plus > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "endpoints must satisfy u_- < 0 < u_+, got ({u_minus}, {u_plus})"
            )));
        }
        Ok(Self { u_minus, u_plus })
    }

    pub fn jump(&self) -> f64 {
        self.u_plus - self.u_minus
    }
}

/// `(sigma(y), 1 - sigma(y))` for `sigma(y) = (1 + tanh y) / 2`, both
/// without cancellation.
#[inline]
fn logistic_pair(y: f64) -> (f64, f64) {
    if y >= 0.0 {
        let e = (-2.0 * y).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = (2.0 * y).exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

fn check_burgers_args(t: f64, w_minus: f64, w_plus: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    if !(w_plus > w_minus) {
        return Err(Error::InvalidArgument(format!(
            "need w_- < w_+, got ({w_minus}, {w_plus})"
        )));
    }
    Ok(())
}

/// Returns `(w, w0'(y))` with `y = x1 - w t`.
fn burgers_solve(x1: f64, t: f64, w_minus: f64, w_plus: f64) -> Result<(f64, f64)> {
    check_burgers_args(t, w_minus, w_plus)?;
    let jump = w_plus - w_minus;
    // unknown: offset d = w - w_minus in [0, jump]
    let g = |d: f64| {
        let (s, _) = logistic_pair(x1 - (w_minus + d) * t);
        d - jump * s
    };
    let dg = |d: f64| {
        let (s, c) = logistic_pair(x1 - (w_minus + d) * t);
        1.0 + t * jump * 2.0 * s * c
    };
    let d = if t == 0.0 {
        jump * logistic_pair(x1).0
    } else {
        let g0 = g(0.0);
        let g1 = g(jump);
        if g0 >= 0.0 {
            0.0
        } else if g1 <= 0.0 {
            jump
        } else {
            monotone_root(g, dg, 0.0, jump, 1e-14, 1e-300)?
        }
    };
    let w = w_minus + d;
    let (s, c) = logistic_pair(x1 - w * t);
    Ok((w, 2.0 * jump * s * c))
}

/// Solution of `w_t + (w^2/2)_x = 0` with `w(x, 0) = (w_+ + w_-)/2 +
/// (w_+ - w_-)/2 tanh(x)`.
pub fn burgers_profile(x1: f64, t: f64, w_minus: f64, w_plus: f64) -> Result<f64> {
    burgers_solve(x1, t, w_minus, w_plus).map(|(w, _)| w)
}

/// `d/dx1` of [`burgers_profile`] by implicit differentiation.
pub fn burgers_profile_dx(x1: f64, t: f64, w_minus: f64, w_plus: f64) -> Result<f64> {
    let (_, w0p) = burgers_solve(x1, t, w_minus, w_plus)?;
    Ok(w0p / (1.0 + t * w0p))
}

/// Smooth rarefaction `u^r(x1, t; 0, u_+)` and its `x1`-derivative.
pub fn rarefaction(x1: f64, t: f64, flux: &FluxSpec, u_plus: f64) -> Result<(f64, f64)> {
    if !(u_plus > 0.0) {
        return Err(Error::InvalidArgument(format!("u_+ must be positive, got {u_plus}")));
    }
    let s_minus = flux.f1_prime(0.0);
    let s_plus = flux.f1_prime(u_plus);
    let (w, w0p) = burgers_solve(x1, t, s_minus, s_plus)?;
    let wx = w0p / (1.0 + t * w0p);
    let u = flux.branch_inverse(w);
    let curv = flux.f1_second(u);
    let ux = if curv > 0.0 { wx / curv } else { 0.0 };
    Ok((u, ux))
}

/// `Phi(xi) = (1/sqrt(pi)) int_{-inf}^{xi} exp(-s^2) ds`, returned together
/// with `1 - Phi`.
#[inline]
pub fn gaussian_cdf_pair(xi: f64) -> (f64, f64) {
    if xi >= 0.0 {
        let tail = 0.5 * libm::erfc(xi);
        (1.0 - tail, tail)
    } else {
        let head = 0.5 * libm::erfc(-xi);
        (head, 1.0 - head)
    }
}

/// Contact wave value and derivatives at one point.
#[derive(Clone, Copy, Debug)]
pub struct ContactPoint {
    pub u: f64,
    pub dx: f64,
    pub dxx: f64,
    pub dt: f64,
}

fn contact_point(x1: f64, t: f64, v_minus: f64, v_plus: f64, a11: f64) -> ContactPoint {
    let scale = (4.0 * a11 * (1.0 + t)).sqrt();
    let xi = x1 / scale;
    let jump = v_plus - v_minus;
    let (phi, tail) = gaussian_cdf_pair(xi);
    let u = if xi >= 0.0 {
        v_plus - jump * tail
    } else {
        v_minus + jump * phi
    };
    let dx = jump * (-xi * xi).exp() / (PI.sqrt() * scale);
    let dxx = -2.0 * xi / scale * dx;
    ContactPoint {
        u,
        dx,
        dxx,
        dt: a11 * dxx,
    }
}

/// Viscous contact wave `u^c(x1, t; v_-, v_+)` and its `x1`-derivative.
pub fn contact(x1: f64, t: f64, v_minus: f64, v_plus: f64, a11: f64) -> Result<(f64, f64)> {
    if !(a11 > 0.0) {
        return Err(Error::InvalidArgument(format!("a11 must be positive, got {a11}")));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    if !(v_minus < v_plus) {
        return Err(Error::InvalidArgument("need v_- < v_+".into()));
    }
    let c = contact_point(x1, t, v_minus, v_plus, a11);
    Ok((c.u, c.dx))
}

/// Rarefaction value and derivatives at one point.
#[derive(Clone, Copy, Debug)]
pub struct RarefactionPoint {
    pub u: f64,
    pub dx: f64,
}

/// All profile quantities at `(x1, t)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProfilePoint {
    pub u_r: f64,
    pub du_r: f64,
    pub u_c: f64,
    pub du_c: f64,
    pub u_hat: f64,
    pub du_hat: f64,
}

/// Evaluators for the composite wave built from one flux and one pair of
/// far-field states.
#[derive(Clone, Debug)]
pub struct ProfileSet {
    pub endpoints: WaveEndpoints,
    pub flux: FluxSpec,
    pub a11: f64,
    s_plus: f64,
}

impl ProfileSet {
    pub fn new(endpoints: WaveEndpoints, flux: FluxSpec, a11: f64) -> Result<Self> {
        if !(a11 > 0.0) {
            return Err(Error::InvalidArgument(format!("a11 must be positive, got {a11}")));
        }
        let s_plus = flux.f1_prime(endpoints.u_plus);
        if !(s_plus > flux.f1_prime(0.0)) {
            return Err(Error::InvalidArgument(
                "f1' must increase on [0, u_+]".into(),
            ));
        }
        Ok(Self {
            endpoints,
            flux,
            a11,
            s_plus,
        })
    }

    /// Right edge speed of the rarefaction fan, `f1'(u_+)`.
    pub fn lambda_plus(&self) -> f64 {
        self.s_plus
    }

    /// Left edge speed, `f1'(0) = 0`.
    pub fn lambda_minus(&self) -> f64 {
        self.flux.f1_prime(0.0)
    }

    pub fn rarefaction(&self, x1: f64, t: f64) -> RarefactionPoint {
        let (w, w0p) = burgers_solve(x1, t, self.lambda_minus(), self.s_plus)
            .expect("validated profile arguments");
        let wx = w0p / (1.0 + t * w0p);
        let u = self.flux.branch_inverse(w);
        let curv = self.flux.f1_second(u);
        RarefactionPoint {
            u,
            dx: if curv > 0.0 { wx / curv } else { 0.0 },
        }
    }

    /// `d^2 u^r / dx1^2` by Richardson-extrapolated central differences of
    /// the analytic first derivative, step `1e-4 (1 + t)`.
    pub fn rarefaction_dxx(&self, x1: f64, t: f64) -> f64 {
        let h = 1e-4 * (1.0 + t);
        let d = |h: f64| (self.rarefaction(x1 + h, t).dx - self.rarefaction(x1 - h, t).dx) / (2.0 * h);
        (4.0 * d(0.5 * h) - d(h)) / 3.0
    }

    /// `d u^r / dt = -f1'(u^r) u^r_x`.
    pub fn rarefaction_dt(&self, x1: f64, t: f64) -> f64 {
        let r = self.rarefaction(x1, t);
        -self.flux.f1_prime(r.u) * r.dx
    }

    /// Contact wave connecting `u_-` to `0`.
    pub fn contact(&self, x1: f64, t: f64) -> ContactPoint {
        contact_point(x1, t, self.endpoints.u_minus, 0.0, self.a11)
    }

    pub fn composite(&self, x1: f64, t: f64) -> f64 {
        self.contact(x1, t).u + self.rarefaction(x1, t).u
    }

    pub fn eval(&self, x1: f64, t: f64) -> ProfilePoint {
        let r = self.rarefaction(x1, t);
        let c = self.contact(x1, t);
        ProfilePoint {
            u_r: r.u,
            du_r: r.dx,
            u_c: c.u,
            du_c: c.dx,
            u_hat: r.u + c.u,
            du_hat: r.dx + c.dx,
        }
    }

    /// Smallest symmetric half-width beyond which both fans are flat to
    /// round-off at time `t`.
    pub fn support_radius(&self, t: f64) -> f64 {
        self.lambda_plus() * (1.0 + t) + 20.0 * (4.0 * self.a11 * (1.0 + t)).sqrt() + 40.0
    }
}

/// Root `X(t)` of `u_hat(., t)` at each sample with diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InterfaceCurve {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `|(f1')^{-1}(X/(1+t)) - |u_-| (1 - Phi(X / sqrt(4 a11 (1+t))))|`.
    pub asymptotic_residuals: Vec<f64>,
    /// Whether `sqrt(4 a11 (1+t)) <= X(t) <= lambda_+ (1+t)` at each sample.
    pub bounds_hold: Vec<bool>,
    /// First sampled time at which the bounds hold.
    pub t0: Option<f64>,
}

pub fn interface_point(profiles: &ProfileSet, t: f64) -> Result<f64> {
    let f = |x: f64| profiles.composite(x, t);
    let hi = profiles.lambda_plus() * (1.0 + t) + 10.0;
    let mut lo = 0.0;
    let step = 10.0 + 10.0 * (4.0 * profiles.a11 * (1.0 + t)).sqrt();
    let mut tries = 0;
    while f(lo) > 0.0 {
        lo -= step;
        tries += 1;
        if tries > 50 {
            return Err(Error::RootFinding(format!(
                "u_hat(., {t}) has no sign change; endpoints inconsistent"
            )));
        }
    }
    if !(f(hi) > 0.0) {
        return Err(Error::RootFinding(format!(
            "u_hat(., {t}) not positive at the right bracket end {hi}"
        )));
    }
    bisect(f, lo, hi, 1e-13 * hi.abs().max(1.0))
}

pub fn interface_curve(t_samples: &[f64], profiles: &ProfileSet) -> Result<InterfaceCurve> {
    let xs = par::map_indices(Exec::Parallel, t_samples.len(), |k| {
        interface_point(profiles, t_samples[k])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let tol = 1e-10 * profiles.endpoints.jump();
    let mut residuals = Vec::with_capacity(xs.len());
    let mut asym = Vec::with_capacity(xs.len());
    let mut bounds = Vec::with_capacity(xs.len());
    for (&t, &x) in t_samples.iter().zip(&xs) {
        let r = profiles.composite(x, t).abs();
        if r > tol {
            return Err(Error::RootFinding(format!(
                "interface residual {r:.3e} above {tol:.3e} at t = {t}"
            )));
        }
        residuals.push(r);
        let scale = (4.0 * profiles.a11 * (1.0 + t)).sqrt();
        let inviscid = profiles.flux.branch_inverse((x / (1.0 + t)).max(0.0));
        let (_, tail) = gaussian_cdf_pair(x / scale);
        asym.push((inviscid - profiles.endpoints.u_minus.abs() * tail).abs());
        bounds.push(scale <= x && x <= profiles.lambda_plus() * (1.0 + t));
    }
    let t0 = t_samples
        .iter()
        .zip(&bounds)
        .find(|(_, &b)| b)
        .map(|(&t, _)| t);
    Ok(InterfaceCurve {
        times: t_samples.to_vec(),
        x: xs,
        residuals,
        asymptotic_residuals: asym,
        bounds_hold: bounds,
        t0,
    })
}

/// Exponent `p` of an `L^p` norm; `Inf` is the sup norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PNorm {
    Finite(f64),
    Inf,
}

impl PNorm {
    pub fn validate(self) -> Result<Self> {
        match self {
            PNorm::Finite(p) if !(p >= 1.0) => Err(Error::InvalidArgument(format!(
                "p = {p} is not >= 1"
            ))),
            other => Ok(other),
        }
    }

    /// `1/p`, zero for the sup norm.
    pub fn reciprocal(self) -> f64 {
        match self {
            PNorm::Finite(p) => 1.0 / p,
            PNorm::Inf => 0.0,
        }
    }

    pub fn label(self) -> String {
        match self {
            PNorm::Finite(p) => format!("{p}"),
            PNorm::Inf => "inf".into(),
        }
    }
}

/// Which profile derivative a norm series measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileQuantity {
    RarefactionDx,
    RarefactionDxx,
    ContactDx,
}

impl ProfileQuantity {
    /// Decay exponent in `(1+t)` claimed for the given `p`.
    pub fn target_exponent(self, p: PNorm) -> f64 {
        let q = p.reciprocal();
        match self {
            ProfileQuantity::RarefactionDx => -1.0 + q,
            ProfileQuantity::RarefactionDxx => -1.0,
            ProfileQuantity::ContactDx => -0.5 * (1.0 - q),
        }
    }
}

/// `L^p(R)` norm of one profile derivative at time `t`.
pub fn profile_norm(profiles: &ProfileSet, quantity: ProfileQuantity, p: PNorm, t: f64) -> Result<f64> {
    let g = |x: f64| match quantity {
        ProfileQuantity::RarefactionDx => profiles.rarefaction(x, t).dx,
        ProfileQuantity::RarefactionDxx => profiles.rarefaction_dxx(x, t),
        ProfileQuantity::ContactDx => profiles.contact(x, t).dx,
    };
    let fan_right = profiles.lambda_plus() * t;
    let width = (4.0 * profiles.a11 * (1.0 + t)).sqrt();
    // features: rarefaction corners near -ln(1+t)/2 and lambda_+ t, contact width
    let mut pts = vec![
        -(1.0 + t).ln(),
        -width,
        0.0,
        width,
        0.25 * fan_right,
        0.5 * fan_right,
        0.75 * fan_right,
        fan_right,
        fan_right + 5.0,
    ];
    let power = match p {
        PNorm::Finite(p) => p,
        PNorm::Inf => 1.0,
    };
    let cut = |x: f64| g(x).abs().powf(power) < 1e-16;
    let mut left = pts.iter().copied().fold(f64::INFINITY, f64::min) - 10.0;
    while !(cut(left) && cut(left - 1.0)) {
        left -= 10.0 + left.abs();
        if left < -1e9 {
            return Err(Error::Quadrature("left tail does not decay".into()));
        }
    }
    let mut right = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 10.0;
    while !(cut(right) && cut(right + 1.0)) {
        right += 10.0 + right.abs();
        if right > 1e9 {
            return Err(Error::Quadrature("right tail does not decay".into()));
        }
    }
    pts.push(left);
    pts.push(right);
    pts.retain(|x| x.is_finite());
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    match p {
        PNorm::Inf => {
            let n = 20_000;
            let mut best = (0.0f64, left);
            for k in 0..=n {
                let x = left + (right - left) * k as f64 / n as f64;
                let v = g(x).abs();
                if v > best.0 {
                    best = (v, x);
                }
            }
            // golden-section refinement around the best sample
            let h = (right - left) / n as f64;
            let (mut a, mut b) = (best.1 - h, best.1 + h);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..80 {
                let c = b - phi * (b - a);
                let d = a + phi * (b - a);
                if g(c).abs() > g(d).abs() {
                    b = d;
                } else {
                    a = c;
                }
            }
            Ok(best.0.max(g(0.5 * (a + b)).abs()))
        }
        PNorm::Finite(pw) => {
            let r = integrate(|x| g(x).abs().powf(pw), &pts, 1e-11, 0.0)?;
            Ok(r.value.powf(1.0 / pw))
        }
    }
}

/// One fitted norm series of the profile report.
#[derive(Clone, Debug, Serialize)]
pub struct NormFit {
    pub quantity: ProfileQuantity,
    pub p: PNorm,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub target_exponent: f64,
    pub fit: Option<FitResult>,
}

/// Supremum of the weighted far-field ratios in the exponential-tail
/// estimate at one time.
#[derive(Clone, Debug, Serialize)]
pub struct TailCheck {
    pub t: f64,
    pub right_ratio: f64,
    pub left_ratio: f64,
    pub fan_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub fits: Vec<NormFit>,
    pub tails: Vec<TailCheck>,
    pub delta: f64,
    /// Fitted growth exponent of the largest tail ratio (should be <= 0).
    pub tail_growth: Option<f64>,
}

fn tail_check(profiles: &ProfileSet, t: f64, delta: f64) -> TailCheck {
    let lp = profiles.lambda_plus();
    let up = profiles.endpoints.u_plus;
    let weight = (1.0 + t).powf(1.0 - delta);
    let n = 4000;
    let span = 60.0 / delta;
    let mut right = 0.0f64;
    let mut left = 0.0f64;
    for k in 0..=n {
        let d = span * k as f64 / n as f64;
        let xr = lp * t + d;
        right = right.max((profiles.rarefaction(xr, t).u - up).abs() * (delta * d).exp() * weight);
        let xl = profiles.lambda_minus() * t - d;
        left = left.max(profiles.rarefaction(xl, t).u.abs() * (delta * d).exp() * weight);
    }
    let mut fan = 0.0f64;
    if t >= 1.0 {
        for k in 0..=n {
            let x = lp * t * k as f64 / n as f64;
            let inviscid = profiles.flux.branch_inverse(x / t);
            fan = fan.max((profiles.rarefaction(x, t).u - inviscid).abs() * weight);
        }
    }
    TailCheck {
        t,
        right_ratio: right,
        left_ratio: left,
        fan_ratio: fan,
    }
}

/// Norm series of the profile derivatives with fitted power laws, plus
/// the tail checks at `delta = 1/2`.
pub fn check_profile_lemmas(profiles: &ProfileSet, p_list: &[PNorm], t_grid: &[f64]) -> Result<LemmaReport> {
    if t_grid.iter().any(|&t| !(t >= 1.0)) {
        return Err(Error::InvalidArgument("t_grid must lie in [1, inf)".into()));
    }
    for p in p_list {
        p.validate()?;
    }
    let mut fits = Vec::new();
    for quantity in [
        ProfileQuantity::RarefactionDx,
        ProfileQuantity::RarefactionDxx,
        ProfileQuantity::ContactDx,
    ] {
        for &p in p_list {
            let norms = par::map_indices(Exec::Parallel, t_grid.len(), |k| {
                profile_norm(profiles, quantity, p, t_grid[k])
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let series = Series::new(t_grid.to_vec(), norms.clone());
            let fit = fit_power(&series, None).ok();
            fits.push(NormFit {
                quantity,
                p,
                times: t_grid.to_vec(),
                norms,
                target_exponent: quantity.target_exponent(p),
                fit,
            });
        }
    }
    let delta = 0.5;
    let tails: Vec<TailCheck> = par::map_indices(Exec::Parallel, t_grid.len(), |k| {
        tail_check(profiles, t_grid[k], delta)
    });
    let worst: Vec<f64> = tails
        .iter()
        .map(|c| c.right_ratio.max(c.left_ratio).max(c.fan_ratio))
        .collect();
    let tail_growth = fit_power(&Series::new(t_grid.to_vec(), worst), None)
        .ok()
        .map(|f| f.exponent());
    Ok(LemmaReport {
        fits,
        tails,
        delta,
        tail_growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_profiles() -> ProfileSet {
        ProfileSet::new(WaveEndpoints::new(-1.0, 1.0).unwrap(), FluxSpec::convex(), 1.0).unwrap()
    }

    #[test]
    fn burgers_initial_data() {
        assert_eq!(burgers_profile(0.0, 0.0, -1.0, 1.0).unwrap(), 0.0);
        for &x in &[-3.0, -0.5, 0.7, 4.0] {
            let w = burgers_profile(x, 0.0, -0.5, 2.0).unwrap();
            assert_relative_eq!(w, 0.75 + 1.25 * f64::tanh(x), epsilon = 1e-14);
        }
    }

    #[test]
    fn burgers_matches_bisection_oracle() {
        // independent oracle: plain bisection on w in [0, 1] of w - (1 + tanh(3 - w))/2
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m - 0.5 * (1.0 + (3.0 - m).tanh()) < 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let w = burgers_profile(3.0, 1.0, 0.0, 1.0).unwrap();
        assert!((w - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn burgers_dx_examples() {
        assert_relative_eq!(burgers_profile_dx(0.0, 0.0, -1.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        let h = 1e-5;
        let fd = (burgers_profile(3.0 + h, 1.0, 0.0, 1.0).unwrap()
            - burgers_profile(3.0 - h, 1.0, 0.0, 1.0).unwrap())
            / (2.0 * h);
        assert_relative_eq!(burgers_profile_dx(3.0, 1.0, 0.0, 1.0).unwrap(), fd, max_relative = 1e-6);
        // large-time slope bound 1/t
        for &t in &[10.0, 100.0, 1000.0] {
            for k in 0..200 {
                let x = -5.0 + (t + 10.0) * k as f64 / 200.0;
                assert!(burgers_profile_dx(x, t, 0.0, 1.0).unwrap() <= 1.0 / t);
            }
        }
    }

    #[test]
    fn burgers_rejects_bad_arguments() {
        assert!(burgers_profile(0.0, -1.0, 0.0, 1.0).is_err());
        assert!(burgers_profile(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(burgers_profile_dx(0.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn rarefaction_examples() {
        let f = crate::flux::make_default_flux();
        let (u, _) = rarefaction(0.0, 0.0, &f, 1.0).unwrap();
        assert_relative_eq!(u, 0.5f64.sqrt(), epsilon = 1e-15);
        for &t in &[0.0, 5.0, 50.0] {
            let (u, _) = rarefaction(50.0 + 3.0 * t, t, &f, 1.0).unwrap();
            assert!((u - 1.0).abs() < 1e-6);
        }
        assert!(rarefaction(0.0, 0.0, &f, -1.0).is_err());
    }

    #[test]
    fn contact_examples() {
        let (u, _) = contact(0.0, 3.0, -1.0, 0.0, 2.0).unwrap();
        assert_eq!(u, -0.5);
        let (u, _) = contact(-1e4, 3.0, -1.0, 0.0, 2.0).unwrap();
        assert_eq!(u, -1.0);
        assert!(contact(0.0, 1.0, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn contact_at_one_scale_length_matches_quadrature_oracle() {
        // Phi(1) = 1/2 + (1/sqrt(pi)) int_0^1 exp(-s^2) ds, composite Simpson with 20000 panels
        let n = 20_000;
        let h = 1.0 / n as f64;
        let mut s = 0.0;
        for k in 0..=n {
            let x = k as f64 * h;
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * (-x * x).exp();
        }
        let phi1 = 0.5 + s * h / 3.0 / PI.sqrt();
        let (a11, t) = (0.7f64, 2.5f64);
        let (u, _) = contact((4.0 * a11 * (1.0 + t)).sqrt(), t, -1.0, 0.0, a11).unwrap();
        assert!((u - (-1.0 + phi1)).abs() < 1e-14);
    }

    #[test]
    fn composite_far_fields() {
        let p = default_profiles();
        for &t in &[0.0, 1.0, 10.0, 100.0] {
            let s = (1.0 + t as f64).sqrt();
            assert!((p.composite(-50.0 * s, t) + 1.0).abs() < 1e-6);
            assert!((p.composite(p.lambda_plus() * (1.0 + t) + 50.0 * s, t) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn interface_root_and_bounds() {
        let p = default_profiles();
        let ts: Vec<f64> = (0..30).map(|k| 10f64.powf(k as f64 / 10.0)).collect();
        let c = interface_curve(&ts, &p).unwrap();
        for (&x, &t) in c.x.iter().zip(&ts) {
            assert!(p.composite(x, t).abs() <= 2e-10);
        }
        let t0 = c.t0.expect("bounds hold eventually");
        for (k, &t) in ts.iter().enumerate() {
            if t >= t0 {
                assert!(c.bounds_hold[k], "bounds fail at t = {t}");
            }
        }
    }

    #[test]
    fn contact_l1_norm_is_total_variation() {
        let p = default_profiles();
        for &t in &[1.0, 10.0, 1000.0] {
            let n = profile_norm(&p, ProfileQuantity::ContactDx, PNorm::Finite(1.0), t).unwrap();
            assert!((n - 1.0).abs() < 1e-10, "t = {t}: {n}");
        }
    }

    #[test]
    fn contact_l2_norm_matches_closed_form() {
        // ||u^c_x||_2^2 = (dv / (sqrt(pi) s))^2 s sqrt(pi/2), s = sqrt(4 a11 (1+t))
        let p = default_profiles();
        for &t in &[1.0, 30.0] {
            let s = (4.0 * (1.0 + t as f64)).sqrt();
            let exact = ((1.0 / (PI.sqrt() * s)).powi(2) * s * (PI / 2.0).sqrt()).sqrt();
            let n = profile_norm(&p, ProfileQuantity::ContactDx, PNorm::Finite(2.0), t).unwrap();
            assert_relative_eq!(n, exact, max_relative = 1e-9);
        }
    }
}
