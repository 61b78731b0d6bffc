//! Stage orchestration, output files and the acceptance checks.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ansatz::{
    ansatz_residual, build_ansatz, compute_j, ResidualProbe, ResidualReport, SourceModel,
};
use crate::cell::{
    cell_decay_rate, linear_decay_rate, make_perturbation, solve_cell_pair, CellDecay, CellModel, CellSolution,
    ColeHopfCell, HeatModeCell, PeriodicPerturbation,
};
use crate::channel::{simulate, SimulationSetup, SimulationTrace};
use crate::config::RunConfig;
use crate::decay::{decay_window, fit_power, lp_norm, DecayOutcome, DecaySeries, FitResult, Series};
use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, TorusGrid};
use crate::io::{self, CheckSummary, RunManifest};
use crate::par::Exec;
use crate::profiles::{check_profile_lemmas, interface_curve, InterfaceCurve, LemmaReport, PNorm, ProfileQuantity};
use crate::verify::{self, ConvergenceReport, DecompositionCheck, HeatModeCheck};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Profiles,
    Cell,
    Ansatz,
    Simulate,
    Analyze,
    VerifyAll,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Profiles => "profiles",
            Stage::Cell => "cell",
            Stage::Ansatz => "ansatz",
            Stage::Simulate => "simulate",
            Stage::Analyze => "analyze",
            Stage::VerifyAll => "verify-all",
        }
    }
}

/// `n` log-spaced samples on `[a, b]`.
pub fn log_times(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|k| match k {
            0 => a,
            _ if k + 1 == n => b,
            _ => (la + (lb - la) * k as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

fn check(id: &str, name: &str, pass: bool, detail: String) -> CheckSummary {
    CheckSummary { id: id.into(), name: name.into(), pass, detail }
}

fn fitted(d: &DecaySeries) -> Option<&FitResult> {
    d.outcome.as_ref().and_then(DecayOutcome::fit)
}

// ---------------------------------------------------------------- profiles

#[derive(Clone, Debug, Serialize)]
pub struct ProfilesReport {
    pub lemmas: LemmaReport,
    pub interface: InterfaceCurve,
    pub interface_residual_fit: Option<FitResult>,
    /// Largest deviation of `||d_x1 u^c||_1` from `|u_-|`.
    pub contact_l1_defect: f64,
}

impl ProfilesReport {
    pub fn checks(&self, cfg: &RunConfig) -> Vec<CheckSummary> {
        let tol = &cfg.tolerances;
        let mut out = Vec::new();
        for f in &self.lemmas.fits {
            let (id, tol_exp) = match (f.quantity, f.p) {
                (ProfileQuantity::RarefactionDx, _) => ("C1", tol.profile_exponent),
                (ProfileQuantity::ContactDx, PNorm::Finite(q)) if q == 1.0 => continue,
                (ProfileQuantity::ContactDx, _) => ("C2", tol.contact_exponent),
                _ => continue,
            };
            let (pass, detail) = match &f.fit {
                Some(fit) => (
                    (fit.exponent() - f.target_exponent).abs() <= tol_exp,
                    format!(
                        "exponent {:.4} (target {:.4} +/- {tol_exp}), R2 {:.5}",
                        fit.exponent(),
                        f.target_exponent,
                        fit.r2
                    ),
                ),
                None => (false, "no fit".into()),
            };
            out.push(check(&format!("{id}.{:?}.{}", f.quantity, f.p.label()), "profile decay", pass, detail));
        }
        out.push(check(
            "C2.ContactDx.L1",
            "contact L1 norm constant",
            self.contact_l1_defect <= tol.contact_l1,
            format!("max | ||d u^c||_1 - |u_-| | = {:.3e} (tol {:.0e})", self.contact_l1_defect, tol.contact_l1),
        ));
        let t0 = self.interface.t0;
        out.push(check(
            "C3.bounds",
            "interface bounds",
            t0.is_some(),
            match t0 {
                Some(t) => format!(
                    "sqrt(4 a11 (1+t)) <= X(t) <= lambda_+ (1+t) at every sample in [{t:.3}, {:.0}]",
                    self.interface.times.last().copied().unwrap_or(0.0)
                ),
                None => "bounds fail at the last sample".into(),
            },
        ));
        let (pass, detail) = match &self.interface_residual_fit {
            Some(f) => (
                f.exponent() <= tol.interface_residual_exponent,
                format!("residual exponent {:.4} (<= {})", f.exponent(), tol.interface_residual_exponent),
            ),
            None => (false, "no fit".into()),
        };
        out.push(check("C3.residual", "interface asymptotics", pass, detail));
        out
    }
}

// ---------------------------------------------------------------- cell

#[derive(Clone, Debug, Serialize)]
pub struct CellSideReport {
    pub base: f64,
    pub decay: CellDecay,
    pub mean_drift: f64,
    pub min_max: (f64, f64),
    pub steps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CellReport {
    pub points: Vec<usize>,
    pub epsilon: f64,
    /// Slowest linear decay rate `4 pi^2 min_k k^T A k`.
    pub analytic_rate: Option<f64>,
    pub minus: CellSideReport,
    pub plus: CellSideReport,
}

impl CellReport {
    pub fn checks(&self, cfg: &RunConfig) -> Vec<CheckSummary> {
        let tol = &cfg.tolerances;
        [("C4.minus", &self.minus), ("C4.plus", &self.plus)]
            .into_iter()
            .map(|(id, side)| {
                let drift_ok = side.mean_drift <= tol.cell_mean_drift;
                match (fitted(&side.decay.sup), fitted(&side.decay.grad)) {
                    (Some(s), Some(g)) => {
                        let rate = s.rate();
                        let disp = self.analytic_rate.map(|a| (rate - a).abs() / a);
                        let pass = rate > 0.0
                            && g.rate() > 0.0
                            && s.r2 >= tol.cell_r2
                            && g.r2 >= tol.cell_r2
                            && drift_ok
                            && disp.is_some_and(|d| d <= tol.cell_dispersion);
                        check(
                            id,
                            "cell decay",
                            pass,
                            format!(
                                "sup rate {rate:.4} (R2 {:.5}), grad rate {:.4} (R2 {:.5}), analytic {:.4}, rel diff {:.2e}, mean drift {:.1e}",
                                s.r2,
                                g.rate(),
                                g.r2,
                                self.analytic_rate.unwrap_or(f64::NAN),
                                disp.unwrap_or(f64::NAN),
                                side.mean_drift
                            ),
                        )
                    }
                    _ => check(
                        id,
                        "cell decay",
                        drift_ok,
                        format!("already converged; mean drift {:.1e}", side.mean_drift),
                    ),
                }
            })
            .collect()
    }
}

// ---------------------------------------------------------------- ansatz

#[derive(Clone, Debug, Serialize)]
pub struct AnsatzReport {
    pub source: Vec<DecaySeries>,
    pub residual: ResidualReport,
}

impl AnsatzReport {
    pub fn checks(&self, cfg: &RunConfig) -> Vec<CheckSummary> {
        let tol = &cfg.tolerances;
        let mut out = Vec::new();
        for (name, p) in [("J_L1", 1.0), ("J_L2", 2.0)] {
            let target = -0.5 * (1.0 + 1.0 / p);
            let d = self.source.iter().find(|d| d.name == name);
            let (pass, detail) = match d.and_then(fitted) {
                Some(f) => (
                    f.exponent() <= target + tol.source_exponent,
                    format!("exponent {:.4} (<= {:.4}), R2 {:.5}", f.exponent(), target + tol.source_exponent, f.r2),
                ),
                None => (false, "no fit".into()),
            };
            out.push(check(&format!("C5.{name}"), "source decay", pass, detail));
        }
        let r = &self.residual;
        let min = r.min_order_l1();
        out.push(check(
            "C6",
            "ansatz residual order",
            min >= tol.residual_order,
            format!(
                "L1 orders {:?}, Linf orders {:?} (>= {})",
                r.orders_l1.iter().map(|o| (o * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                r.orders_linf.iter().map(|o| (o * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                tol.residual_order
            ),
        ));
        out
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Clone, Debug, Serialize)]
pub struct SimulateReport {
    pub steps: usize,
    pub epsilon: f64,
    pub monitor: (f64, f64),
    pub monitor_bounds: (f64, f64),
    pub collapsed_at: Option<f64>,
    pub min_q2_part: f64,
    pub max_boundary_dx1: f64,
    pub phi_at_zero: f64,
}

impl SimulateReport {
    fn new(trace: &SimulationTrace) -> Self {
        let min_q2 = trace
            .q2
            .iter()
            .flat_map(|q| q.parts())
            .fold(f64::INFINITY, f64::min);
        let series = |n: &str| trace.get(n).cloned().unwrap_or_default();
        Self {
            steps: trace.steps,
            epsilon: trace.epsilon,
            monitor: (trace.monitor_min, trace.monitor_max),
            monitor_bounds: (trace.monitor_lower, trace.monitor_upper),
            collapsed_at: trace.collapsed_at,
            min_q2_part: min_q2,
            max_boundary_dx1: series("boundary_dx1").values.iter().fold(0.0, |a, &v| a.max(v)),
            phi_at_zero: series("phi_inf").values.first().copied().unwrap_or(f64::NAN),
        }
    }

    pub fn checks(&self, cfg: &RunConfig) -> Vec<CheckSummary> {
        let tol = &cfg.tolerances;
        vec![
            check(
                "C9.max_principle",
                "maximum principle",
                self.monitor.0 >= self.monitor_bounds.0 && self.monitor.1 <= self.monitor_bounds.1,
                format!(
                    "u in [{:.8}, {:.8}] within [{:.8}, {:.8}] over {} steps",
                    self.monitor.0, self.monitor.1, self.monitor_bounds.0, self.monitor_bounds.1, self.steps
                ),
            ),
            check(
                "C9.q2",
                "Q2 parts nonnegative",
                self.min_q2_part >= 0.0,
                format!("smallest regional integral {:.3e}", self.min_q2_part),
            ),
            check(
                "INV.phi0",
                "phi(., 0) = 0",
                self.phi_at_zero == 0.0,
                format!("||phi(., 0)||_inf = {:e}", self.phi_at_zero),
            ),
            check(
                "INV.containment",
                "boundary containment",
                self.max_boundary_dx1 <= tol.boundary_dx1,
                format!("max |d_x1 u| at x1 = +-L: {:.3e} (<= {:.0e})", self.max_boundary_dx1, tol.boundary_dx1),
            ),
        ]
    }
}

// ---------------------------------------------------------------- analyze

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub main: DecaySeries,
    pub nonzero: DecaySeries,
    pub zero: DecaySeries,
    pub l1: DecaySeries,
}

impl AnalyzeReport {
    pub fn checks(&self, cfg: &RunConfig) -> Vec<CheckSummary> {
        let tol = &cfg.tolerances;
        let (lo, hi) = tol.main_exponent;
        let power = |d: &DecaySeries, id: &str, name: &str, ok: &dyn Fn(f64) -> bool, bound: String| match &d.outcome {
            Some(DecayOutcome::Fitted(f)) => check(
                id,
                name,
                ok(f.exponent()),
                format!("exponent {:.4} ({bound}), R2 {:.5}, window [{}, {}]", f.exponent(), f.r2, f.window.0, f.window.1),
            ),
            _ => check(id, name, true, "already converged".into()),
        };
        let mut out = vec![power(
            &self.main,
            "C7",
            "||u - uhat||_inf decay",
            &|e| (lo..=hi).contains(&e),
            format!("in [{lo}, {hi}]"),
        )];
        out.push(match &self.nonzero.outcome {
            Some(DecayOutcome::Fitted(f)) => check(
                "C8.nonzero",
                "||Dn phi||_2 exponential",
                f.rate() > 0.0 && f.r2 >= tol.nonzero_r2,
                format!(
                    "rate {:.4}, R2 {:.5} (>= {}), window [{:.3}, {:.3}], {} points",
                    f.rate(),
                    f.r2,
                    tol.nonzero_r2,
                    f.window.0,
                    f.window.1,
                    f.points
                ),
            ),
            _ => check("C8.nonzero", "||Dn phi||_2 exponential", true, "already converged".into()),
        });
        let z = tol.zero_mode_exponent;
        out.push(power(
            &self.zero,
            "C8.zero",
            "||D0 phi||_2 decay",
            &|e| (e + 0.25).abs() <= z,
            format!("target -0.25 +/- {z}"),
        ));
        let g = tol.l1_growth;
        out.push(power(&self.l1, "C8.l1", "||phi||_1 growth", &|e| e <= g, format!("<= {g}")));
        out
    }
}

/// Fits of the channel norm series.
pub fn analyze_series(cfg: &RunConfig, series: &[(String, Series)]) -> Result<AnalyzeReport> {
    let get = |name: &str| -> Result<Series> {
        series
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.clone())
            .ok_or_else(|| Error::InvalidArgument(format!("norm series `{name}` missing")))
    };
    let f = &cfg.fits;
    let window = (f.power_window.0, f.power_window.1.min(cfg.t_end));
    let nonzero = get("dnphi_l2")?;
    let ewin = f.exponential_window.or_else(|| decay_window(&nonzero, f.floor_rel, f.floor_abs));
    Ok(AnalyzeReport {
        main: DecaySeries::power("u_minus_uhat_inf", get("u_minus_uhat_inf")?, Some(window))?,
        nonzero: DecaySeries::exponential("dnphi_l2", nonzero, ewin)?,
        zero: DecaySeries::power("d0phi_l2", get("d0phi_l2")?, Some(window))?,
        l1: DecaySeries::power("phi_l1", get("phi_l1")?, Some(window))?,
    })
}

// ---------------------------------------------------------------- scheme

#[derive(Clone, Debug, Serialize)]
pub struct SchemeReport {
    pub manufactured: ConvergenceReport,
    pub heat: Vec<HeatModeCheck>,
    pub decomposition: DecompositionCheck,
}

impl SchemeReport {
    pub fn checks(&self, cfg: &RunConfig) -> Vec<CheckSummary> {
        let tol = &cfg.tolerances;
        let d = &self.decomposition;
        let heat_err = self.heat.iter().fold(0.0f64, |a, h| a.max(h.rel_error));
        vec![
            check(
                "C9.pythagoras",
                "Pythagoras identity",
                d.pythagoras <= tol.pythagoras,
                format!("max relative defect {:.2e} over {} fields", d.pythagoras, d.fields),
            ),
            check(
                "C9.projection",
                "D0 Dn = 0",
                d.projection <= tol.projection,
                format!("max |D0 Dn f| = {:.2e}", d.projection),
            ),
            check(
                "C10.manufactured",
                "manufactured solution order",
                self.manufactured.min_order() >= tol.mms_order,
                format!(
                    "errors {:?}, orders {:?}",
                    self.manufactured.errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
                    self.manufactured.orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>()
                ),
            ),
            check(
                "C10.heat",
                "single-mode diffusion rate",
                heat_err <= tol.heat_rate,
                format!("max relative rate error {heat_err:.2e} over {} modes", self.heat.len()),
            ),
        ]
    }
}

// ---------------------------------------------------------------- driver

/// One criterion line of the acceptance table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionLine {
    pub criterion: u32,
    pub pass: bool,
    pub checks: Vec<String>,
}

/// Groups checks `C<n>.*` by criterion number.
pub fn criteria_table(checks: &[CheckSummary]) -> Vec<CriterionLine> {
    (1..=10)
        .filter_map(|n| {
            let prefix = format!("C{n}");
            let mine: Vec<&CheckSummary> = checks
                .iter()
                .filter(|c| c.id == prefix || c.id.starts_with(&format!("{prefix}.")))
                .collect();
            (!mine.is_empty()).then(|| CriterionLine {
                criterion: n,
                pass: mine.iter().all(|c| c.pass),
                checks: mine
                    .iter()
                    .map(|c| format!("{} {}: {}", if c.pass { "pass" } else { "FAIL" }, c.id, c.detail))
                    .collect(),
            })
        })
        .collect()
}

pub struct Pipeline {
    pub config: RunConfig,
    pub out: PathBuf,
    pub exec: Exec,
    pub manifest: RunManifest,
    cells: Option<(CellSolution, CellSolution)>,
}

impl Pipeline {
    pub fn new(config: RunConfig, out: &Path) -> Result<Self> {
        io::ensure_dir(out)?;
        std::fs::write(out.join("config.json"), config.canonical() + "\n").map_err(|e| Error::io(out, e))?;
        let manifest = RunManifest::new(config.hash());
        Ok(Self { config, out: out.to_path_buf(), exec: Exec::default(), manifest, cells: None })
    }

    fn record(&mut self, stage: &str, checks: Vec<CheckSummary>) {
        self.manifest.stages.push(stage.into());
        self.manifest.checks.extend(checks);
    }

    fn cell_model(&self) -> Result<CellModel> {
        let c = &self.config;
        Ok(CellModel {
            flux: c.flux_spec()?,
            transverse: c.transverse(),
            diffusion: c.diffusion_tensor()?,
            scheme: c.scheme,
            exec: self.exec,
        })
    }

    fn perturbation(&self, grid: &TorusGrid) -> Result<PeriodicPerturbation> {
        if self.config.modes.is_empty() {
            return Ok(PeriodicPerturbation::zero(grid.clone()));
        }
        make_perturbation(grid, &self.config.mode_list(), self.config.epsilon_target())
    }

    pub fn profiles(&mut self) -> Result<ProfilesReport> {
        let c = &self.config;
        let ps = c.profile_set()?;
        let pc = &c.profiles;
        let t_grid = log_times(pc.t_min, pc.t_max, pc.samples);
        let lemmas = check_profile_lemmas(&ps, &[PNorm::Finite(1.0), PNorm::Finite(2.0), PNorm::Inf], &t_grid)?;
        let t_if = log_times(1.0, pc.t_max, pc.interface_samples);
        let interface = interface_curve(&t_if, &ps)?;
        let res = Series::new(interface.times.clone(), interface.asymptotic_residuals.clone());
        let interface_residual_fit = fit_power(&res, Some((pc.t_min, pc.t_max))).ok();
        let contact_l1_defect = lemmas
            .fits
            .iter()
            .filter(|f| f.quantity == ProfileQuantity::ContactDx && f.p == PNorm::Finite(1.0))
            .flat_map(|f| f.norms.iter())
            .fold(0.0f64, |a, &v| a.max((v - c.u_minus.abs()).abs()));

        let mut rows = Vec::new();
        for &t in &pc.table_times {
            let r = ps.support_radius(t);
            for k in 0..pc.table_points {
                let x = -r + 2.0 * r * k as f64 / (pc.table_points - 1) as f64;
                let p = ps.eval(x, t);
                rows.push(vec![t, x, p.u_r, p.du_r, p.u_c, p.du_c, p.u_hat, p.du_hat]);
            }
        }
        io::write_table_csv(
            &self.out.join("profiles.csv"),
            &["t", "x1", "u_r", "du_r", "u_c", "du_c", "u_hat", "du_hat"],
            &rows,
        )?;
        let norm_series: Vec<(String, Series)> = lemmas
            .fits
            .iter()
            .map(|f| (format!("{:?}_{}", f.quantity, f.p.label()), Series::new(f.times.clone(), f.norms.clone())))
            .collect();
        let refs: Vec<(&str, &Series)> = norm_series.iter().map(|(n, s)| (n.as_str(), s)).collect();
        io::write_series_csv(&self.out.join("profile_norms.csv"), &refs)?;
        let lp = ps.lambda_plus();
        let if_rows: Vec<Vec<f64>> = interface
            .times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                vec![
                    t,
                    interface.x[k],
                    interface.residuals[k],
                    interface.asymptotic_residuals[k],
                    (4.0 * ps.a11 * (1.0 + t)).sqrt(),
                    lp * (1.0 + t),
                ]
            })
            .collect();
        io::write_table_csv(
            &self.out.join("interface.csv"),
            &["t", "x", "residual", "asymptotic_residual", "lower", "upper"],
            &if_rows,
        )?;
        let report = ProfilesReport { lemmas, interface, interface_residual_fit, contact_l1_defect };
        io::write_json(&self.out.join("profiles.json"), &report)?;
        let checks = report.checks(&self.config);
        self.record("profiles", checks);
        Ok(report)
    }

    fn solve_cells(&mut self) -> Result<(CellSolution, CellSolution, PeriodicPerturbation)> {
        let c = &self.config;
        let grid = TorusGrid::new(c.cell_points())?;
        let v0 = self.perturbation(&grid)?;
        let n = c.cell.snapshots;
        let snaps: Vec<f64> = (1..n).map(|k| c.cell.t_end * k as f64 / (n - 1) as f64).collect();
        let (m, p) = solve_cell_pair(&self.cell_model()?, c.u_minus, c.u_plus, &v0, c.cell.t_end, &snaps)?;
        Ok((m, p, v0))
    }

    pub fn cell(&mut self) -> Result<CellReport> {
        let (m, p, v0) = self.solve_cells()?;
        let c = &self.config;
        let a = c.diffusion_tensor()?;
        let analytic_rate = c
            .modes
            .iter()
            .map(|m| linear_decay_rate(&a, &m.k))
            .min_by(f64::total_cmp);
        let side = |sol: &CellSolution| -> Result<CellSideReport> {
            let window = c
                .fits
                .exponential_window
                .or_else(|| decay_window(&sol.sup_series, c.fits.floor_rel, 0.0));
            Ok(CellSideReport {
                base: sol.base,
                decay: cell_decay_rate(sol, window)?,
                mean_drift: sol.mean_drift(),
                min_max: sol.min_max,
                steps: sol.steps,
            })
        };
        let report = CellReport {
            points: c.cell_points(),
            epsilon: v0.epsilon,
            analytic_rate,
            minus: side(&m)?,
            plus: side(&p)?,
        };
        let mut named: Vec<(String, &Series)> = Vec::new();
        for (tag, sol) in [("minus", &m), ("plus", &p)] {
            named.push((format!("cell_{tag}_sup"), &sol.sup_series));
            named.push((format!("cell_{tag}_grad_sup"), &sol.grad_sup_series));
            named.push((format!("cell_{tag}_mean"), &sol.mean_series));
        }
        let refs: Vec<(&str, &Series)> = named.iter().map(|(n, s)| (n.as_str(), *s)).collect();
        io::write_series_csv(&self.out.join("cell_series.csv"), &refs)?;
        io::write_json(&self.out.join("cell.json"), &report)?;
        let checks = report.checks(&self.config);
        self.record("cell", checks);
        self.cells = Some((m, p));
        Ok(report)
    }

    pub fn ansatz(&mut self) -> Result<AnsatzReport> {
        if self.cells.is_none() {
            let (m, p, _) = self.solve_cells()?;
            self.cells = Some((m, p));
        }
        let c = self.config.clone();
        let (cm, cp) = self.cells.as_ref().expect("cells solved");
        let ps = c.profile_set()?;
        let a = c.diffusion_tensor()?;
        let mut model = SourceModel::new(&ps, &c.transverse(), &a)?;
        model.merge_diagonal_cross = c.ansatz.merge_diagonal_cross;
        let an = &c.ansatz;
        let transverse = if an.source_transverse.is_empty() { c.grid.transverse.clone() } else { an.source_transverse.clone() };
        let mut series = [Series::default(), Series::default(), Series::default(), Series::default()];
        for t in log_times(an.source_t_min, an.source_t_max, an.source_samples) {
            // five diffusion widths past the fan so the tails of J are negligible
            let l = ps.lambda_plus() * (1.0 + t) + 5.0 * (4.0 * ps.a11 * (1.0 + t)).sqrt();
            let n1 = (2.0 * l * an.source_density).ceil() as usize + 1;
            let grid = ChannelGrid::new(l, n1, transverse.clone())?;
            let state = build_ansatz(t, &ps, cm, cp, &grid)?;
            let j = compute_j(&state, &model, &[PNorm::Finite(1.0), PNorm::Finite(2.0)])?;
            series[0].push(t, j.norm(PNorm::Finite(1.0)).unwrap_or(f64::NAN));
            series[1].push(t, j.norm(PNorm::Finite(2.0)).unwrap_or(f64::NAN));
            series[2].push(t, lp_norm(&j.j1, PNorm::Finite(1.0), &grid)?);
            series[3].push(t, lp_norm(&j.j2, PNorm::Finite(1.0), &grid)?);
        }
        let names = ["J_L1", "J_L2", "J1_L1", "J2_L1"];
        let refs: Vec<(&str, &Series)> = names.iter().copied().zip(series.iter()).collect();
        io::write_series_csv(&self.out.join("source_norms.csv"), &refs)?;
        let window = Some((an.source_t_min, an.source_t_max));
        let source = names[..2]
            .iter()
            .zip(series.iter())
            .map(|(n, s)| DecaySeries::power(n, s.clone(), window))
            .collect::<Result<Vec<_>>>()?;

        let n = a.dim();
        let mut k1 = vec![0i64; n];
        k1[0] = 1;
        let heat = HeatModeCell::new(&a, an.residual_heat_delta, &k1)?;
        let burgers = ColeHopfCell::new(c.u_plus, a.get(1, 1), an.residual_burgers_delta, 1)?;
        let probe = ResidualProbe {
            t: an.residual_t,
            x1_range: (-an.residual_half_width, an.residual_half_width),
            n_x1: an.residual_n_x1,
            n_transverse: an.residual_n_transverse,
        };
        let residual = ansatz_residual(&model, &ps, &heat, &burgers, &probe, &an.residual_steps)?;
        io::write_json(&self.out.join("residual.json"), &residual)?;

        let grid = c.channel_grid()?;
        let state0 = build_ansatz(0.0, &ps, cm, cp, &grid)?;
        let fields = self.out.join("fields");
        io::ensure_dir(&fields)?;
        io::write_field(
            &fields,
            "ansatz_t0",
            &grid,
            0.0,
            &[("ubar", &state0.ubar), ("u_minus_tilde", &state0.u_minus_tilde), ("u_plus_tilde", &state0.u_plus_tilde)],
        )?;
        let report = AnsatzReport { source, residual };
        io::write_json(&self.out.join("ansatz.json"), &report)?;
        let checks = report.checks(&self.config);
        self.record("ansatz", checks);
        Ok(report)
    }

    pub fn simulate(&mut self) -> Result<SimulateReport> {
        let c = &self.config;
        let setup = SimulationSetup {
            profiles: c.profile_set()?,
            transverse: c.transverse(),
            diffusion: c.diffusion_tensor()?,
            grid: c.channel_grid()?,
            cell_n1: c.grid.cell_n1,
            modes: c.mode_list(),
            epsilon: c.epsilon_target(),
            t_end: c.t_end,
            record_times: c.cadence.record_times(c.t_end),
            snapshot_times: c.cadence.snapshot_times(c.t_end),
            scheme: c.scheme,
            exec: self.exec,
            dt_scale: 1.0,
            collapse_tol: c.collapse_tol,
        };
        let fields = self.out.join("fields");
        io::ensure_dir(&fields)?;
        let mut sink = |s: crate::channel::FieldSnapshot| {
            io::write_field(&fields, &format!("u_t{:09.3}", s.t), s.grid, s.t, &[("u", s.u), ("phi", s.phi)])
        };
        let trace = simulate(&setup, &mut sink)?;
        let refs: Vec<(&str, &Series)> = trace.names.iter().map(String::as_str).zip(trace.series.iter()).collect();
        io::write_series_csv(&self.out.join("norms.csv"), &refs)?;
        let q2_rows: Vec<Vec<f64>> = trace
            .q2
            .iter()
            .map(|q| vec![q.t, q.both_positive, q.crossing_up, q.crossing_down, q.total])
            .collect();
        io::write_table_csv(
            &self.out.join("q2.csv"),
            &["t", "both_positive", "crossing_up", "crossing_down", "total"],
            &q2_rows,
        )?;
        let report = SimulateReport::new(&trace);
        io::write_json(&self.out.join("trace.json"), &report)?;
        let checks = report.checks(&self.config);
        self.record("simulate", checks);
        Ok(report)
    }

    pub fn analyze(&mut self) -> Result<AnalyzeReport> {
        let series = io::read_series_csv(&self.out.join("norms.csv"))?;
        let report = analyze_series(&self.config, &series)?;
        io::write_json(&self.out.join("fits.json"), &report)?;
        let checks = report.checks(&self.config);
        self.record("analyze", checks);
        Ok(report)
    }

    pub fn scheme(&mut self) -> Result<SchemeReport> {
        let c = &self.config;
        let a = c.diffusion_tensor()?;
        let plane = crate::flux::DiffusionTensor::new(&[vec![a.get(0, 0), a.get(0, 1)], vec![a.get(1, 0), a.get(1, 1)]])?;
        let manufactured = verify::manufactured_convergence(&plane, &[4, 8, 16, 32], 0.1, self.exec)?;
        let heat = verify::heat_mode_rates(64, &[vec![1, 0], vec![0, 1], vec![1, 1], vec![2, 1]], self.exec)?;
        let grid = ChannelGrid::new(10.0, 65, c.grid.transverse.iter().map(|&m| m.min(16)).collect())?;
        let decomposition = verify::decomposition_identities(&grid, 100, c.seed)?;
        let report = SchemeReport { manufactured, heat, decomposition };
        io::write_json(&self.out.join("scheme.json"), &report)?;
        let checks = report.checks(&self.config);
        self.record("scheme", checks);
        Ok(report)
    }

    /// Runs `stage` (and what it depends on).
    pub fn run(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Profiles => self.profiles().map(drop),
            Stage::Cell => self.cell().map(drop),
            Stage::Ansatz => {
                self.cell()?;
                self.ansatz().map(drop)
            }
            Stage::Simulate => self.simulate().map(drop),
            Stage::Analyze => self.analyze().map(drop),
            Stage::VerifyAll => {
                self.profiles()?;
                self.cell()?;
                self.ansatz()?;
                self.simulate()?;
                self.analyze()?;
                self.scheme()?;
                let table = criteria_table(&self.manifest.checks);
                io::write_json(&self.out.join("acceptance.json"), &table)
            }
        }
    }

    /// Writes the manifest, also after a failed stage.
    pub fn finish(mut self, outcome: Result<()>) -> Result<RunManifest> {
        match &outcome {
            Ok(()) => self.manifest.complete = true,
            Err(e) => self.manifest.error = Some(e.to_string()),
        }
        self.manifest.finish(&self.out)?;
        outcome.map(|_| self.manifest)
    }
}

/// Runs a stage into `out` and writes the manifest.
pub fn run_pipeline(config: &RunConfig, stage: Stage, out: &Path) -> Result<RunManifest> {
    let mut p = Pipeline::new(config.clone(), out)?;
    let outcome = p.run(stage);
    p.finish(outcome)
}
