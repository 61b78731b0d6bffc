//! Flux functions and the viscosity matrix.
//!
//! The longitudinal flux `f1` is degenerate: it vanishes identically on
//! `u <= 0` and is strictly convex on `u > 0`. The flat half-line carries the
//! contact wave, the convex half-line the rarefaction.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied flux law given by closures.
#[derive(Clone)]
pub struct CustomLaw {
    pub value: ScalarFn,
    pub d1: ScalarFn,
    pub d2: ScalarFn,
    /// Inverse of `d1` on the branch `u >= 0`, when one exists.
    pub inverse_d1: Option<ScalarFn>,
}

/// A scalar flux `g(u)` with its first two derivatives.
///
/// The built-in laws are plain enum variants so the stencil kernels can
/// inline them; [`FluxLaw::Custom`] covers black-box fluxes.
#[derive(Clone)]
pub enum FluxLaw {
    /// `u^3` for `u >= 0`, `0` otherwise.
    Cubic,
    /// `u^2/2 + u^3/6` for `u >= 0`, `0` otherwise (`f'' (0+) = 1`).
    ConvexDegenerate,
    /// `u^2 / 2` everywhere (Burgers).
    Burgers,
    /// `c u`.
    Linear(f64),
    Zero,
    Custom(CustomLaw),
}

impl fmt::Debug for FluxLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FluxLaw::Cubic => write!(f, "Cubic"),
            FluxLaw::ConvexDegenerate => write!(f, "ConvexDegenerate"),
            FluxLaw::Burgers => write!(f, "Burgers"),
            FluxLaw::Linear(c) => write!(f, "Linear({c})"),
            FluxLaw::Zero => write!(f, "Zero"),
            FluxLaw::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl FluxLaw {
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match self {
            FluxLaw::Cubic => {
                if u > 0.0 {
                    u * u * u
                } else {
                    0.0
                }
            }
            FluxLaw::ConvexDegenerate => {
                if u > 0.0 {
                    u * u * (0.5 + u / 6.0)
                } else {
                    0.0
                }
            }
            FluxLaw::Burgers => 0.5 * u * u,
            FluxLaw::Linear(c) => c * u,
            FluxLaw::Zero => 0.0,
            FluxLaw::Custom(c) => (c.value)(u),
        }
    }

    #[inline]
    pub fn d1(&self, u: f64) -> f64 {
        match self {
            FluxLaw::Cubic => {
                if u > 0.0 {
                    3.0 * u * u
                } else {
                    0.0
                }
            }
            FluxLaw::ConvexDegenerate => {
                if u > 0.0 {
                    u + 0.5 * u * u
                } else {
                    0.0
                }
            }
            FluxLaw::Burgers => u,
            FluxLaw::Linear(c) => *c,
            FluxLaw::Zero => 0.0,
            FluxLaw::Custom(c) => (c.d1)(u),
        }
    }

    #[inline]
    pub fn d2(&self, u: f64) -> f64 {
        match self {
            FluxLaw::Cubic => {
                if u > 0.0 {
                    6.0 * u
                } else {
                    0.0
                }
            }
            FluxLaw::ConvexDegenerate => {
                if u > 0.0 {
                    1.0 + u
                } else {
                    0.0
                }
            }
            FluxLaw::Burgers => 1.0,
            FluxLaw::Linear(_) | FluxLaw::Zero => 0.0,
            FluxLaw::Custom(c) => (c.d2)(u),
        }
    }

    /// Inverse of `d1` restricted to `u >= 0`; `None` if the law has none.
    pub fn inverse_d1(&self, s: f64) -> Option<f64> {
        match self {
            FluxLaw::Cubic => Some((s.max(0.0) / 3.0).sqrt()),
            // u + u^2/2 = s  =>  u = sqrt(1 + 2 s) - 1, written without cancellation
            FluxLaw::ConvexDegenerate => {
                let s = s.max(0.0);
                Some(2.0 * s / ((1.0 + 2.0 * s).sqrt() + 1.0))
            }
            FluxLaw::Burgers => Some(s),
            FluxLaw::Linear(_) | FluxLaw::Zero => None,
            FluxLaw::Custom(c) => c.inverse_d1.as_ref().map(|g| g(s)),
        }
    }

    /// Flux value shifted to a base state: `g(base + v) - g(base)`.
    #[inline]
    pub fn shifted(&self, base: f64, v: f64) -> f64 {
        self.value(base + v) - self.value(base)
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "cubic" => Some(FluxLaw::Cubic),
            "convex" => Some(FluxLaw::ConvexDegenerate),
            "burgers" => Some(FluxLaw::Burgers),
            "zero" => Some(FluxLaw::Zero),
            _ => label
                .strip_prefix("linear:")
                .and_then(|c| c.parse().ok())
                .map(FluxLaw::Linear),
        }
    }
}

/// The degenerate longitudinal flux `f1` with its derivatives and branch
/// inverse.
#[derive(Clone, Debug)]
pub struct FluxSpec {
    pub label: String,
    law: FluxLaw,
}

impl FluxSpec {
    pub fn new(label: impl Into<String>, law: FluxLaw) -> Self {
        Self {
            label: label.into(),
            law,
        }
    }

    /// `f1(u) = u^3` on `u >= 0`. Only `C^2` at the origin and `f1''(0) = 0`.
    pub fn cubic() -> Self {
        Self::new("cubic", FluxLaw::Cubic)
    }

    /// `f1(u) = u^2/2 + u^3/6` on `u >= 0`; strictly convex on the closed
    /// half-line, `C^1` at the origin.
    pub fn convex() -> Self {
        Self::new("convex", FluxLaw::ConvexDegenerate)
    }

    pub fn from_label(label: &str) -> Result<Self> {
        match label {
            "cubic" | "convex" => Ok(Self::new(label, FluxLaw::from_label(label).unwrap())),
            _ => Err(Error::InvalidArgument(format!(
                "unknown flux label `{label}` (expected `cubic` or `convex`)"
            ))),
        }
    }

    pub fn law(&self) -> &FluxLaw {
        &self.law
    }

    #[inline]
    pub fn f1(&self, u: f64) -> f64 {
        self.law.value(u)
    }

    #[inline]
    pub fn f1_prime(&self, u: f64) -> f64 {
        self.law.d1(u)
    }

    #[inline]
    pub fn f1_second(&self, u: f64) -> f64 {
        self.law.d2(u)
    }

    /// Inverse of `f1'` on `u >= 0`.
    pub fn branch_inverse(&self, s: f64) -> f64 {
        self.law
            .inverse_d1(s)
            .expect("flux without a branch inverse used as f1")
    }
}

/// The canonical representative of the degenerate class: `f1 = u^3 [u >= 0]`.
pub fn make_default_flux() -> FluxSpec {
    FluxSpec::cubic()
}

/// Outcome of one sampled invariant.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub worst_violation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FluxReport {
    pub label: String,
    pub checks: Vec<InvariantCheck>,
}

impl FluxReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_VANISHING: &str = "vanishing on negative axis";
pub const CHECK_ORIGIN: &str = "origin values";
pub const CHECK_CONVEXITY: &str = "strict convexity on positive axis";
pub const CHECK_INVERSE: &str = "inverse consistency";

const INVERSE_RTOL: f64 = 1e-10;

/// Samples the structural assumptions on `f1` over `u_range` with `samples`
/// equispaced points. Violations are reported, never raised.
pub fn validate_flux(spec: &FluxSpec, u_range: (f64, f64), samples: usize) -> Result<FluxReport> {
    if samples < 2 {
        return Err(Error::InvalidArgument("validate_flux needs >= 2 samples".into()));
    }
    let (lo, hi) = u_range;
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi}]")));
    }
    let pts: Vec<f64> = (0..samples)
        .map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64)
        .collect();

    let mut vanish = 0.0f64;
    let mut convex = 0.0f64;
    let mut inverse = 0.0f64;
    for &u in &pts {
        if u <= 0.0 {
            vanish = vanish.max(spec.f1(u).abs()).max(spec.f1_prime(u).abs());
        } else {
            let c = spec.f1_second(u);
            if !(c > 0.0) {
                convex = convex.max(if c.is_finite() { -c } else { f64::INFINITY });
            }
        }
        if u >= 0.0 {
            let back = spec.law.inverse_d1(spec.f1_prime(u));
            let err = match back {
                Some(b) => (b - u).abs() / u.abs().max(f64::MIN_POSITIVE),
                None => f64::INFINITY,
            };
            // exact zero maps back to exact zero; relative error is meaningless there
            let err = if u == 0.0 { back.map_or(f64::INFINITY, f64::abs) } else { err };
            inverse = inverse.max(err);
        }
    }
    let origin = spec.f1(0.0).abs().max(spec.f1_prime(0.0).abs());

    let checks = vec![
        InvariantCheck {
            name: CHECK_VANISHING.into(),
            passed: vanish == 0.0,
            worst_violation: vanish,
        },
        InvariantCheck {
            name: CHECK_ORIGIN.into(),
            passed: origin == 0.0,
            worst_violation: origin,
        },
        InvariantCheck {
            name: CHECK_CONVEXITY.into(),
            passed: convex == 0.0,
            worst_violation: convex,
        },
        InvariantCheck {
            name: CHECK_INVERSE.into(),
            passed: inverse <= INVERSE_RTOL,
            worst_violation: inverse,
        },
    ];
    Ok(FluxReport {
        label: spec.label.clone(),
        checks,
    })
}

/// Transverse fluxes `f_i`, `i = 2..n`.
#[derive(Clone, Debug)]
pub struct TransverseFluxSet {
    laws: Vec<FluxLaw>,
}

impl TransverseFluxSet {
    pub fn new(laws: Vec<FluxLaw>) -> Self {
        Self { laws }
    }

    /// `f_i(u) = u^2/2` for each of the `n - 1` transverse directions.
    pub fn burgers(n: usize) -> Self {
        Self::new(vec![FluxLaw::Burgers; n.saturating_sub(1)])
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }

    pub fn laws(&self) -> &[FluxLaw] {
        &self.laws
    }

    /// Checks that every `f_i`, `f_i'`, `f_i''` is finite on `[u_lo, u_hi]`.
    pub fn validate(&self, u_lo: f64, u_hi: f64, samples: usize) -> Result<()> {
        for (i, law) in self.laws.iter().enumerate() {
            for k in 0..samples.max(2) {
                let u = u_lo + (u_hi - u_lo) * k as f64 / (samples.max(2) - 1) as f64;
                if !(law.value(u).is_finite() && law.d1(u).is_finite() && law.d2(u).is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "transverse flux f_{} not finite at u = {u}",
                        i + 2
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Constant viscosity matrix `A = (a_ij)`.
#[derive(Clone, Debug, Serialize)]
pub struct DiffusionTensor {
    n: usize,
    entries: Vec<f64>,
    lower_bound: f64,
}

impl DiffusionTensor {
    /// Builds and validates `A` from row-major rows.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Viscosity("matrix must be square and non-empty".into()));
        }
        let entries: Vec<f64> = rows.iter().flatten().copied().collect();
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Viscosity("non-finite entry".into()));
        }
        if !(entries[0] > 0.0) {
            return Err(Error::Viscosity(format!("a11 = {} must be positive", entries[0])));
        }
        let b = symmetric_min_eigenvalue(n, &entries);
        if !(b > 0.0) {
            return Err(Error::Viscosity(format!(
                "symmetric part has eigenvalue {b:.6e} <= 0"
            )));
        }
        Ok(Self {
            n,
            entries,
            lower_bound: b,
        })
    }

    pub fn identity(n: usize) -> Self {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(&rows).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn a11(&self) -> f64 {
        self.entries[0]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Smallest eigenvalue `b` of the symmetric part.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// `k^T A k`.
    pub fn quadratic_form(&self, k: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j) * k[i] * k[j];
            }
        }
        s
    }
}

fn symmetric_min_eigenvalue(n: usize, entries: &[f64]) -> f64 {
    let a = DMatrix::from_row_slice(n, n, entries);
    let sym = (&a + a.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Lower bound `b` with `sum a_ij xi_i xi_j >= b |xi|^2`.
pub fn diffusion_lower_bound(a: &DiffusionTensor) -> f64 {
    a.lower_bound()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cubic_examples() {
        let f = make_default_flux();
        assert_eq!(f.f1(-2.0), 0.0);
        assert_eq!(f.f1(1.0), 1.0);
        assert_eq!(f.f1_prime(1.0), 3.0);
        assert_eq!(f.branch_inverse(3.0), 1.0);
    }

    #[test]
    fn default_flux_passes_validation() {
        for f in [FluxSpec::cubic(), FluxSpec::convex()] {
            let r = validate_flux(&f, (-2.0, 2.0), 1000).unwrap();
            assert!(r.all_passed(), "{r:?}");
        }
    }

    #[test]
    fn square_flux_fails_vanishing_check() {
        let law = FluxLaw::Custom(CustomLaw {
            value: Arc::new(|u| u * u),
            d1: Arc::new(|u| 2.0 * u),
            d2: Arc::new(|_| 2.0),
            inverse_d1: Some(Arc::new(|s| s / 2.0)),
        });
        let r = validate_flux(&FluxSpec::new("square", law), (-2.0, 2.0), 1000).unwrap();
        let v = r.check(CHECK_VANISHING).unwrap();
        assert!(!v.passed);
        assert!(v.worst_violation >= 1.0);
        assert!(r.check(CHECK_ORIGIN).unwrap().passed);
    }

    #[test]
    fn inverse_consistency_on_five_points() {
        let r = validate_flux(&make_default_flux(), (0.0, 1.0), 5).unwrap();
        let c = r.check(CHECK_INVERSE).unwrap();
        // oracle: evaluate the composition directly at 0, 1/4, 1/2, 3/4, 1
        let f = make_default_flux();
        let worst = [0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&u| (f.branch_inverse(f.f1_prime(u)) - u).abs() / u)
            .fold(0.0, f64::max);
        assert!(c.worst_violation <= 1e-10);
        assert_relative_eq!(c.worst_violation, worst, epsilon = 1e-16);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(validate_flux(&make_default_flux(), (0.0, 1.0), 1).is_err());
    }

    #[test]
    fn convex_inverse_matches_closed_form() {
        let f = FluxSpec::convex();
        for k in 0..50 {
            let u = k as f64 * 0.1;
            assert_relative_eq!(f.branch_inverse(f.f1_prime(u)), u, max_relative = 1e-14, epsilon = 1e-300);
        }
        assert_relative_eq!(f.branch_inverse(1.5), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn lower_bound_examples() {
        assert_relative_eq!(diffusion_lower_bound(&DiffusionTensor::identity(2)), 1.0);
        let a = DiffusionTensor::new(&[vec![1.0, 0.1], vec![0.1, 1.0]]).unwrap();
        assert_relative_eq!(diffusion_lower_bound(&a), 0.9, epsilon = 1e-14);
        let a = DiffusionTensor::new(&[vec![1.0, 0.4], vec![0.0, 1.0]]).unwrap();
        assert_relative_eq!(diffusion_lower_bound(&a), 0.8, epsilon = 1e-14);
    }

    #[test]
    fn indefinite_matrix_rejected() {
        assert!(matches!(
            DiffusionTensor::new(&[vec![1.0, 2.0], vec![2.0, 1.0]]),
            Err(Error::Viscosity(_))
        ));
        assert!(DiffusionTensor::new(&[vec![-1.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(DiffusionTensor::new(&[vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn transverse_burgers_finite() {
        TransverseFluxSet::burgers(3).validate(-2.0, 2.0, 100).unwrap();
        assert_eq!(TransverseFluxSet::burgers(3).len(), 2);
    }
}
