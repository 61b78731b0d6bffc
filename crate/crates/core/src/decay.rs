//! Mode decomposition, grid norms, the `Q2` diagnostic, and decay-rate
//! regression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ChannelGrid;
use crate::par::{self, Exec};
use crate::profiles::PNorm;

/// A `(t, value)` series.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len(), "series length mismatch");
        Self { times, values }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, v: f64) {
        self.times.push(t);
        self.values.push(v);
    }

    fn windowed(&self, window: Option<(f64, f64)>) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(&t, _)| t >= lo && t <= hi)
            .map(|(&t, &v)| (t, v))
            .unzip()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    Power,
    Exponential,
}

/// Least-squares line through `(log(1+t), log v)` (power) or `(t, log v)`
/// (exponential).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: FitKind,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub points: usize,
}

impl FitResult {
    /// Power-law exponent (the slope).
    pub fn exponent(&self) -> f64 {
        self.slope
    }

    /// Exponential decay rate `c` in `e^{-c t}` (minus the slope).
    pub fn rate(&self) -> f64 {
        -self.slope
    }
}

fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let n = x.len();
    let distinct = {
        let mut xs = x.to_vec();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.len()
    };
    if distinct <= 2 {
        return Err(Error::DegenerateFit(format!(
            "{distinct} distinct abscissae in fit window"
        )));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let stderr = (ssr / (n as f64 - 2.0) / sxx).sqrt();
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok((slope, intercept, stderr, r2))
}

fn fit(series: &Series, window: Option<(f64, f64)>, kind: FitKind) -> Result<FitResult> {
    let (t, v) = series.windowed(window);
    if let Some(bad) = v.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateFit(format!(
            "non-positive value {bad:e} in fit window"
        )));
    }
    let x: Vec<f64> = match kind {
        FitKind::Power => t.iter().map(|t| (1.0 + t).ln()).collect(),
        FitKind::Exponential => t.clone(),
    };
    let y: Vec<f64> = v.iter().map(|v| v.ln()).collect();
    let (slope, intercept, stderr, r2) = linear_fit(&x, &y)?;
    Ok(FitResult {
        kind,
        slope,
        intercept,
        stderr,
        r2,
        window: (t[0], t[t.len() - 1]),
        points: t.len(),
    })
}

/// Fits `value ~ C (1+t)^slope` on the window (all samples if `None`).
pub fn fit_power(series: &Series, window: Option<(f64, f64)>) -> Result<FitResult> {
    fit(series, window, FitKind::Power)
}

/// Fits `value ~ C e^{slope t}` on the window.
pub fn fit_exponential(series: &Series, window: Option<(f64, f64)>) -> Result<FitResult> {
    fit(series, window, FitKind::Exponential)
}

/// Window from the series peak to the last sample above both
/// `rel * peak` and `abs`.
pub fn decay_window(series: &Series, rel: f64, abs: f64) -> Option<(f64, f64)> {
    let (kmax, &peak) = series
        .values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(peak > 0.0) {
        return None;
    }
    let last = (kmax..series.len())
        .take_while(|&k| series.values[k] > (rel * peak).max(abs))
        .last()?;
    Some((series.times[kmax], series.times[last]))
}

/// Outcome of a decay fit that may have nothing to fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DecayOutcome {
    /// Every sample is zero: the state started (and stayed) at rest.
    AlreadyConverged,
    Fitted(FitResult),
}

impl DecayOutcome {
    pub fn fit(&self) -> Option<&FitResult> {
        match self {
            DecayOutcome::Fitted(f) => Some(f),
            DecayOutcome::AlreadyConverged => None,
        }
    }
}

/// A series plus its fit, as written to reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecaySeries {
    pub name: String,
    pub series: Series,
    pub outcome: Option<DecayOutcome>,
}

impl DecaySeries {
    /// Exponential fit over `window`, or from the peak down to
    /// `1e-11 * peak` when no window is given.
    pub fn exponential(name: &str, series: Series, window: Option<(f64, f64)>) -> Result<Self> {
        let outcome = if series.values.iter().all(|&v| v == 0.0) {
            DecayOutcome::AlreadyConverged
        } else {
            let w = window.or_else(|| decay_window(&series, 1e-11, 0.0));
            DecayOutcome::Fitted(fit_exponential(&series, w)?)
        };
        Ok(Self {
            name: name.into(),
            series,
            outcome: Some(outcome),
        })
    }

    pub fn power(name: &str, series: Series, window: Option<(f64, f64)>) -> Result<Self> {
        let outcome = if series.values.iter().all(|&v| v == 0.0) {
            DecayOutcome::AlreadyConverged
        } else {
            DecayOutcome::Fitted(fit_power(&series, window)?)
        };
        Ok(Self {
            name: name.into(),
            series,
            outcome: Some(outcome),
        })
    }
}

fn check_field(field: &[f64], grid: &ChannelGrid) -> Result<()> {
    if field.len() != grid.len() {
        return Err(Error::Shape {
            expected: grid.len(),
            got: field.len(),
        });
    }
    Ok(())
}

/// Transverse average `D0 f` on each `x1` line.
pub fn zero_mode(field: &[f64], grid: &ChannelGrid) -> Result<Vec<f64>> {
    check_field(field, grid)?;
    let m = grid.row_len();
    let w = grid.transverse_weight();
    Ok(field.chunks(m).map(|row| row.iter().sum::<f64>() * w).collect())
}

/// `D_neq f = f - D0 f`.
pub fn nonzero_mode(field: &[f64], grid: &ChannelGrid) -> Result<Vec<f64>> {
    let zero = zero_mode(field, grid)?;
    let m = grid.row_len();
    let mut out = field.to_vec();
    for (row, z) in out.chunks_mut(m).zip(&zero) {
        for v in row {
            *v -= z;
        }
    }
    Ok(out)
}

/// Spreads an `x1` profile over the transverse directions.
pub fn embed_profile(profile: &[f64], grid: &ChannelGrid) -> Result<Vec<f64>> {
    if profile.len() != grid.n1 {
        return Err(Error::Shape {
            expected: grid.n1,
            got: profile.len(),
        });
    }
    let m = grid.row_len();
    Ok(profile.iter().flat_map(|&v| std::iter::repeat(v).take(m)).collect())
}

/// `L^p` norm over the channel: trapezoid in `x1`, uniform transverse
/// weights. A slice of length `n1` is treated as an `x'`-independent field.
pub fn lp_norm(field: &[f64], p: PNorm, grid: &ChannelGrid) -> Result<f64> {
    lp_norm_with(Exec::Parallel, field, p, grid)
}

pub fn lp_norm_with(exec: Exec, field: &[f64], p: PNorm, grid: &ChannelGrid) -> Result<f64> {
    let p = p.validate()?;
    let m = if field.len() == grid.n1 {
        1
    } else {
        check_field(field, grid)?;
        grid.row_len()
    };
    let tw = 1.0 / m as f64;
    let xw = grid.x1_weights();
    let rows = par::map_rows(exec, grid.n1, |i| {
        let row = &field[i * m..(i + 1) * m];
        match p {
            PNorm::Inf => row.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            PNorm::Finite(q) if q == 1.0 => row.iter().map(|v| v.abs()).sum::<f64>() * tw * xw[i],
            PNorm::Finite(q) if q == 2.0 => row.iter().map(|v| v * v).sum::<f64>() * tw * xw[i],
            PNorm::Finite(q) => row.iter().map(|v| v.abs().powf(q)).sum::<f64>() * tw * xw[i],
        }
    });
    Ok(match p {
        PNorm::Inf => rows.into_iter().fold(0.0, f64::max),
        PNorm::Finite(q) => rows.into_iter().sum::<f64>().powf(1.0 / q),
    })
}

/// The three regional integrals of the `Q2` functional and their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyQ2 {
    pub t: f64,
    /// `ubar + phi > 0, ubar > 0`: `phi^2 d_x1 uhat`.
    pub both_positive: f64,
    /// `ubar + phi > 0, ubar <= 0`: `(ubar + phi)^2 d_x1 uhat`.
    pub crossing_up: f64,
    /// `ubar + phi <= 0, ubar > 0`: `ubar^2 d_x1 uhat`.
    pub crossing_down: f64,
    pub total: f64,
}

impl EnergyQ2 {
    pub fn parts(&self) -> [f64; 3] {
        [self.both_positive, self.crossing_up, self.crossing_down]
    }
}

/// Pointwise integrand classification of `Q2`.
#[inline]
pub fn q2_integrand(phi: f64, ubar: f64, uhat_dx1: f64) -> (usize, f64) {
    let u = ubar + phi;
    if u > 0.0 && ubar > 0.0 {
        (0, phi * phi * uhat_dx1)
    } else if u > 0.0 {
        (1, u * u * uhat_dx1)
    } else if ubar > 0.0 {
        (2, ubar * ubar * uhat_dx1)
    } else {
        (3, 0.0)
    }
}

pub fn q2_energy(phi: &[f64], ubar: &[f64], uhat_dx1: &[f64], grid: &ChannelGrid) -> Result<EnergyQ2> {
    check_field(phi, grid)?;
    check_field(ubar, grid)?;
    if uhat_dx1.len() != grid.n1 {
        return Err(Error::Shape {
            expected: grid.n1,
            got: uhat_dx1.len(),
        });
    }
    let m = grid.row_len();
    let tw = grid.transverse_weight();
    let xw = grid.x1_weights();
    let rows = par::map_rows(Exec::Parallel, grid.n1, |i| {
        let mut acc = [0.0; 4];
        for k in i * m..(i + 1) * m {
            let (region, v) = q2_integrand(phi[k], ubar[k], uhat_dx1[i]);
            acc[region] += v;
        }
        acc.map(|a| a * tw * xw[i])
    });
    let mut parts = [0.0; 3];
    for r in rows {
        for j in 0..3 {
            parts[j] += r[j];
        }
    }
    Ok(EnergyQ2 {
        t: 0.0,
        both_positive: parts[0],
        crossing_up: parts[1],
        crossing_down: parts[2],
        total: parts.iter().sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> ChannelGrid {
        ChannelGrid::new(5.0, 41, vec![8]).unwrap()
    }

    #[test]
    fn power_fit_exact() {
        let t: Vec<f64> = (0..12).map(|k| 10.0 * 1.5f64.powi(k)).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (1.0 + t).powf(-0.5)).collect();
        let f = fit_power(&Series::new(t, v), None).unwrap();
        assert_relative_eq!(f.exponent(), -0.5, epsilon = 1e-12);
        assert!(f.stderr < 1e-12);
        assert_relative_eq!(f.r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_series_has_zero_exponent() {
        let t: Vec<f64> = (1..10).map(|k| k as f64).collect();
        let f = fit_power(&Series::new(t.clone(), vec![2.0; 9]), None).unwrap();
        assert!(f.exponent().abs() < 1e-14);
        let e = fit_exponential(&Series::new(t, vec![2.0; 9]), None).unwrap();
        assert!(e.rate().abs() < 1e-14);
    }

    #[test]
    fn exponential_fit_exact() {
        let t: Vec<f64> = (0..20).map(|k| 0.1 * k as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| (-3.0 * t).exp()).collect();
        let f = fit_exponential(&Series::new(t, v), None).unwrap();
        assert_relative_eq!(f.rate(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_window_rejected() {
        let s = Series::new(vec![1.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]);
        assert!(matches!(fit_power(&s, None), Err(Error::DegenerateFit(_))));
        let s = Series::new(vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 0.0, 3.0, 1.0]);
        assert!(fit_power(&s, None).is_err());
    }

    #[test]
    fn zero_series_is_converged() {
        let s = Series::new(vec![0.0, 1.0, 2.0], vec![0.0; 3]);
        let d = DecaySeries::exponential("x", s, None).unwrap();
        assert_eq!(d.outcome, Some(DecayOutcome::AlreadyConverged));
    }

    #[test]
    fn zero_mode_of_pure_sine_vanishes() {
        let g = grid();
        let m = g.row_len();
        let f: Vec<f64> = (0..g.len())
            .map(|k| (2.0 * std::f64::consts::PI * g.transverse_coord(0, k % m)).sin())
            .collect();
        assert!(zero_mode(&f, &g).unwrap().iter().all(|v| v.abs() < 1e-15));
        let line: Vec<f64> = (0..g.n1).map(|i| g.x1(i).cos()).collect();
        let emb = embed_profile(&line, &g).unwrap();
        let z = zero_mode(&emb, &g).unwrap();
        for (a, b) in z.iter().zip(&line) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(nonzero_mode(&emb, &g).unwrap().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn unit_bump_norms() {
        let g = ChannelGrid::new(10.0, 2001, vec![4]).unwrap();
        let prof: Vec<f64> = g.x1_nodes().iter().map(|&x| if x.abs() <= 1.0 { 1.0 } else { 0.0 }).collect();
        for p in [1.0, 2.0, 3.0] {
            let n = lp_norm(&prof, PNorm::Finite(p), &g).unwrap();
            assert!((n - 2f64.powf(1.0 / p)).abs() < 0.02);
        }
        assert_eq!(lp_norm(&prof, PNorm::Inf, &g).unwrap(), 1.0);
        assert!(lp_norm(&prof, PNorm::Finite(0.5), &g).is_err());
    }

    #[test]
    fn q2_single_region() {
        let g = grid();
        let phi = vec![0.1; g.len()];
        let ubar = vec![0.5; g.len()];
        let dx = vec![2.0; g.n1];
        let q = q2_energy(&phi, &ubar, &dx, &g).unwrap();
        assert_relative_eq!(q.both_positive, 0.01 * 2.0 * 10.0, epsilon = 1e-12);
        assert_eq!(q.crossing_up, 0.0);
        assert_eq!(q.crossing_down, 0.0);
        let zero = q2_energy(&vec![0.0; g.len()], &ubar, &dx, &g).unwrap();
        assert_eq!(zero.total, 0.0);
    }
}
