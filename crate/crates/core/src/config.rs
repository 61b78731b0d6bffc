//! Run configuration: typed, bounds-checked, with a canonical JSON form.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::cell::{Mode, ModeKind};
use crate::error::{Error, Result};
use crate::flux::{DiffusionTensor, FluxSpec, TransverseFluxSet};
use crate::grid::ChannelGrid;
use crate::kernel::Scheme;
use crate::profiles::{ProfileSet, WaveEndpoints};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub k: Vec<i64>,
    pub amplitude: f64,
    #[serde(default = "default_kind")]
    pub kind: ModeKind,
}

fn default_kind() -> ModeKind {
    ModeKind::Cos
}

impl ModeConfig {
    pub fn to_mode(&self) -> Mode {
        Mode { k: self.k.clone(), amplitude: self.amplitude, kind: self.kind }
    }
}

/// Channel discretisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n1: usize,
    pub transverse: Vec<usize>,
    pub half_width: f64,
    /// `x1` points of the periodic cells (1 when all modes are transverse).
    #[serde(default = "one")]
    pub cell_n1: usize,
}

fn one() -> usize {
    1
}

/// Recording times of the channel run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CadenceConfig {
    pub early_dt: f64,
    pub early_until: f64,
    pub dt: f64,
    /// Field snapshots every `snapshot_dt`; 0 disables them.
    pub snapshot_dt: f64,
}

impl Default for CadenceConfig {
    fn default() -> Self {
        Self { early_dt: 0.025, early_until: 2.0, dt: 0.5, snapshot_dt: 50.0 }
    }
}

impl CadenceConfig {
    pub fn record_times(&self, t_end: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let t = k as f64 * self.early_dt;
            if t > self.early_until.min(t_end) + 1e-12 {
                break;
            }
            out.push(t);
            k += 1;
        }
        let start = out.last().copied().unwrap_or(0.0);
        let mut k = 1usize;
        loop {
            let t = (start / self.dt).floor() * self.dt + k as f64 * self.dt;
            if t > t_end + 1e-9 {
                break;
            }
            if t > start + 1e-12 {
                out.push(t);
            }
            k += 1;
        }
        if out.last().is_some_and(|&t| t < t_end - 1e-9) {
            out.push(t_end);
        }
        out
    }

    pub fn snapshot_times(&self, t_end: f64) -> Vec<f64> {
        if self.snapshot_dt <= 0.0 {
            return Vec::new();
        }
        let n = (t_end / self.snapshot_dt + 1e-9).floor() as usize;
        (0..=n).map(|k| k as f64 * self.snapshot_dt).collect()
    }
}

/// Profile-stage sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileStageConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    /// Samples of the interface curve over the same range.
    pub interface_samples: usize,
    /// Times at which profiles are tabulated.
    pub table_times: Vec<f64>,
    pub table_points: usize,
}

impl Default for ProfileStageConfig {
    fn default() -> Self {
        Self {
            t_min: 10.0,
            t_max: 1000.0,
            samples: 17,
            interface_samples: 81,
            table_times: vec![0.0, 10.0, 100.0, 1000.0],
            table_points: 801,
        }
    }
}

/// Stand-alone cell run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellStageConfig {
    /// Torus points per direction; empty means `[cell_n1, transverse...]`.
    #[serde(default)]
    pub points: Vec<usize>,
    pub t_end: f64,
    pub snapshots: usize,
}

impl Default for CellStageConfig {
    fn default() -> Self {
        Self { points: Vec::new(), t_end: 1.0, snapshots: 201 }
    }
}

/// Source norms and the residual probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzStageConfig {
    pub source_t_min: f64,
    pub source_t_max: f64,
    pub source_samples: usize,
    /// `x1` points per unit length of the source grid.
    pub source_density: f64,
    /// Transverse points of the source grids; empty means `grid.transverse`.
    #[serde(default)]
    pub source_transverse: Vec<usize>,
    pub residual_t: f64,
    pub residual_half_width: f64,
    pub residual_n_x1: usize,
    pub residual_n_transverse: usize,
    pub residual_steps: Vec<f64>,
    pub residual_heat_delta: f64,
    pub residual_burgers_delta: f64,
    pub merge_diagonal_cross: bool,
}

impl Default for AnsatzStageConfig {
    fn default() -> Self {
        Self {
            source_t_min: 100.0,
            source_t_max: 10000.0,
            source_samples: 9,
            source_density: 4.0,
            source_transverse: vec![8],
            residual_t: 0.05,
            residual_half_width: 8.0,
            residual_n_x1: 400,
            residual_n_transverse: 16,
            residual_steps: vec![0.02, 0.01, 0.005, 0.0025],
            residual_heat_delta: 0.3,
            residual_burgers_delta: 0.02,
            merge_diagonal_cross: false,
        }
    }
}

/// Fit windows; `None` means data-driven.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub power_window: (f64, f64),
    pub exponential_window: Option<(f64, f64)>,
    /// Exponential fits end at the last sample above `floor_rel * peak`
    /// and `floor_abs`.
    pub floor_rel: f64,
    pub floor_abs: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { power_window: (10.0, 200.0), exponential_window: None, floor_rel: 1e-11, floor_abs: 1e-12 }
    }
}

/// Acceptance tolerances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub profile_exponent: f64,
    pub contact_exponent: f64,
    pub contact_l1: f64,
    pub interface_residual_exponent: f64,
    pub cell_r2: f64,
    pub cell_mean_drift: f64,
    pub cell_dispersion: f64,
    pub source_exponent: f64,
    pub residual_order: f64,
    pub main_exponent: (f64, f64),
    pub nonzero_r2: f64,
    pub zero_mode_exponent: f64,
    pub l1_growth: f64,
    pub pythagoras: f64,
    pub projection: f64,
    pub mms_order: f64,
    pub heat_rate: f64,
    pub boundary_dx1: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            profile_exponent: 0.1,
            contact_exponent: 0.05,
            contact_l1: 1e-10,
            interface_residual_exponent: -0.6,
            cell_r2: 0.99,
            cell_mean_drift: 1e-12,
            cell_dispersion: 0.05,
            source_exponent: 0.1,
            residual_order: 1.9,
            main_exponent: (-0.75, -0.35),
            nonzero_r2: 0.98,
            zero_mode_exponent: 0.15,
            l1_growth: 0.15,
            pythagoras: 1e-12,
            projection: 1e-13,
            mms_order: 1.9,
            heat_rate: 0.01,
            boundary_dx1: 1e-6,
        }
    }
}

/// Everything a run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub flux: String,
    pub u_minus: f64,
    pub u_plus: f64,
    pub diffusion: Vec<Vec<f64>>,
    pub grid: GridConfig,
    pub t_end: f64,
    pub epsilon: f64,
    pub modes: Vec<ModeConfig>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub cadence: CadenceConfig,
    #[serde(default = "default_collapse")]
    pub collapse_tol: Option<f64>,
    #[serde(default)]
    pub profiles: ProfileStageConfig,
    #[serde(default)]
    pub cell: CellStageConfig,
    #[serde(default)]
    pub ansatz: AnsatzStageConfig,
    #[serde(default)]
    pub fits: FitConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn default_collapse() -> Option<f64> {
    Some(1e-13)
}

const REQUIRED: [&str; 9] = ["flux", "u_minus", "u_plus", "diffusion", "grid", "t_end", "epsilon", "modes", "grid.n1"];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            flux: "convex".into(),
            u_minus: -1.0,
            u_plus: 1.0,
            diffusion: vec![vec![1.0, 0.1], vec![0.1, 1.0]],
            grid: GridConfig { n1: 2048, transverse: vec![64], half_width: 400.0, cell_n1: 1 },
            t_end: 200.0,
            epsilon: 0.01,
            modes: vec![
                ModeConfig { k: vec![0, 1], amplitude: 1.0, kind: ModeKind::Cos },
                ModeConfig { k: vec![0, 2], amplitude: 0.5, kind: ModeKind::Sin },
            ],
            scheme: Scheme::Central,
            cadence: CadenceConfig::default(),
            collapse_tol: default_collapse(),
            profiles: ProfileStageConfig::default(),
            cell: CellStageConfig::default(),
            ansatz: AnsatzStageConfig::default(),
            fits: FitConfig::default(),
            tolerances: Tolerances::default(),
            seed: 0,
            out_dir: None,
        }
    }
}

/// Half-width needed to keep both fans inside `[-L, L]` up to `t`:
/// the interface envelope `lambda_+ (1 + t)` plus three diffusion widths.
pub fn containment_half_width(lambda_plus: f64, a11: f64, t: f64) -> f64 {
    lambda_plus * (1.0 + t) + 3.0 * (4.0 * a11 * (1.0 + t)).sqrt()
}

fn get_path<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |acc, key| acc.get(key))
}

/// Applies `key=value` overrides (dotted keys, JSON or bare-string values).
pub fn apply_overrides(raw: &mut Value, overrides: &[String]) -> Result<()> {
    let mut errors = Vec::new();
    for o in overrides {
        let Some((key, val)) = o.split_once('=') else {
            errors.push(format!("override `{o}`: expected key=value"));
            continue;
        };
        let parsed: Value = serde_json::from_str(val).unwrap_or_else(|_| Value::String(val.to_string()));
        let mut cur = &mut *raw;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let Some(obj) = cur.as_object_mut() else {
                errors.push(format!("override `{key}`: `{}` is not an object", parts[..i].join(".")));
                break;
            };
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), parsed.clone());
                break;
            }
            cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(errors))
    }
}

/// Parses and checks a configuration, reporting every violated constraint.
pub fn validate_config(text: &str) -> Result<RunConfig> {
    validate_with_overrides(text, &[])
}

pub fn validate_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut raw: Value = serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("not valid JSON: {e}")]))?;
    if !raw.is_object() {
        return Err(Error::Config(vec!["top level must be an object".into()]));
    }
    apply_overrides(&mut raw, overrides)?;
    let mut errors: Vec<String> = REQUIRED
        .iter()
        .filter(|k| get_path(&raw, k).is_none())
        .filter(|k| !(k.starts_with("grid.") && get_path(&raw, "grid").is_none()))
        .map(|k| format!("{k}: missing required key"))
        .collect();
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    let cfg: RunConfig = serde_json::from_value(raw).map_err(|e| Error::Config(vec![format!("type error: {e}")]))?;
    errors.extend(check(&cfg));
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

fn check(cfg: &RunConfig) -> Vec<String> {
    let mut e = Vec::new();
    let flux = FluxSpec::from_label(&cfg.flux);
    if let Err(err) = &flux {
        e.push(format!("flux: {err}"));
    }
    let ends = WaveEndpoints::new(cfg.u_minus, cfg.u_plus);
    if let Err(err) = &ends {
        e.push(format!("u_minus/u_plus: {err}"));
    }
    let a = DiffusionTensor::new(&cfg.diffusion);
    if let Err(err) = &a {
        e.push(format!("diffusion: {err}"));
    }
    let n = cfg.grid.transverse.len() + 1;
    if let Ok(a) = &a {
        if a.dim() != n {
            e.push(format!("diffusion: {}x{} tensor for a {n}-dimensional channel", a.dim(), a.dim()));
        }
    }
    if !(2..=3).contains(&n) {
        e.push(format!("grid.transverse: need 1 or 2 transverse directions, got {}", n - 1));
    }
    if cfg.grid.n1 < 16 {
        e.push(format!("grid.n1: need at least 16 points, got {}", cfg.grid.n1));
    }
    if cfg.grid.transverse.iter().any(|&m| m == 0) {
        e.push("grid.transverse: sizes must be positive".into());
    }
    if cfg.grid.cell_n1 == 0 {
        e.push("grid.cell_n1: must be positive".into());
    }
    if !(cfg.grid.half_width > 0.0) {
        e.push(format!("grid.half_width: must be positive, got {}", cfg.grid.half_width));
    }
    if !(cfg.t_end > 0.0) {
        e.push(format!("t_end: must be positive, got {}", cfg.t_end));
    }
    if !(cfg.epsilon >= 0.0) || !cfg.epsilon.is_finite() {
        e.push(format!("epsilon: must be finite and >= 0, got {}", cfg.epsilon));
    }
    for (i, m) in cfg.modes.iter().enumerate() {
        if m.k.len() != n {
            e.push(format!("modes[{i}].k: need {n} components, got {}", m.k.len()));
        } else if m.k.iter().all(|&k| k == 0) {
            e.push(format!("modes[{i}].k: the zero mode is not a perturbation"));
        } else {
            if m.k[0] != 0 && cfg.grid.cell_n1 < 2 {
                e.push(format!("modes[{i}].k: x1 mode needs grid.cell_n1 > 1"));
            }
            for (d, &k) in m.k.iter().enumerate().skip(1) {
                if let Some(&pts) = cfg.grid.transverse.get(d - 1) {
                    if 2 * k.unsigned_abs() as usize >= pts {
                        e.push(format!("modes[{i}].k: component {d} unresolved by {pts} points"));
                    }
                }
            }
        }
        if !m.amplitude.is_finite() {
            e.push(format!("modes[{i}].amplitude: must be finite"));
        }
    }
    let c = &cfg.cadence;
    if !(c.early_dt > 0.0) || !(c.dt > 0.0) || !(c.early_until >= 0.0) || !(c.snapshot_dt >= 0.0) {
        e.push("cadence: early_dt and dt must be positive, early_until and snapshot_dt nonnegative".into());
    }
    if let Some(tol) = cfg.collapse_tol {
        if !(tol > 0.0) {
            e.push("collapse_tol: must be positive or null".into());
        }
    }
    let p = &cfg.profiles;
    if !(p.t_min >= 1.0 && p.t_max > p.t_min) || p.samples < 8 || p.interface_samples < 8 {
        e.push("profiles: need 1 <= t_min < t_max and at least 8 samples".into());
    }
    if p.table_times.iter().any(|&t| !(t >= 0.0)) || p.table_points < 2 {
        e.push("profiles.table_times: times must be >= 0 with at least 2 points".into());
    }
    if !(cfg.cell.t_end > 0.0) || cfg.cell.snapshots < 8 {
        e.push("cell: t_end must be positive with at least 8 snapshots".into());
    }
    if !cfg.cell.points.is_empty() && cfg.cell.points.len() != n {
        e.push(format!("cell.points: need {n} sizes, got {}", cfg.cell.points.len()));
    }
    if !cfg.cell.points.is_empty() && cfg.cell.points[1..] != cfg.grid.transverse[..] {
        e.push("cell.points: transverse sizes must equal grid.transverse".into());
    }
    let an = &cfg.ansatz;
    if !(an.source_t_min > 0.0 && an.source_t_max > an.source_t_min) || an.source_samples < 8 {
        e.push("ansatz: need 0 < source_t_min < source_t_max and at least 8 samples".into());
    }
    if !(an.source_density > 0.0) {
        e.push("ansatz.source_density: must be positive".into());
    }
    if !an.source_transverse.is_empty() && (an.source_transverse.len() != n - 1 || an.source_transverse.contains(&0)) {
        e.push(format!("ansatz.source_transverse: need {} positive sizes", n - 1));
    }
    if an.residual_steps.len() < 4 || an.residual_steps.windows(2).any(|w| !(w[1] < w[0])) {
        e.push("ansatz.residual_steps: need at least 4 decreasing steps".into());
    } else if !(an.residual_t > an.residual_steps[0]) {
        e.push("ansatz.residual_t: must exceed the largest residual step".into());
    }
    if !(an.residual_half_width > 0.0) || an.residual_n_x1 < 2 || an.residual_n_transverse < 1 {
        e.push("ansatz: residual probe sizes must be positive".into());
    }
    let f = &cfg.fits;
    if !(f.power_window.1 > f.power_window.0) {
        e.push("fits.power_window: empty window".into());
    }
    if !(f.floor_rel > 0.0 && f.floor_abs >= 0.0) {
        e.push("fits: floors must be positive".into());
    }
    if let (Ok(flux), Ok(ends), Ok(a)) = (&flux, &ends, &a) {
        if let Ok(prof) = ProfileSet::new(*ends, flux.clone(), a.a11()) {
            let need = containment_half_width(prof.lambda_plus(), a.a11(), cfg.t_end);
            if cfg.grid.half_width < need {
                e.push(format!(
                    "grid.half_width: {} does not contain the wave fans up to t_end = {}; the interface envelope \
                     lambda_+ (1 + t) + 3 sqrt(4 a11 (1 + t)) requires L >= {need:.3}",
                    cfg.grid.half_width, cfg.t_end
                ));
            }
        }
    }
    e
}

impl RunConfig {
    pub fn canonical(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn flux_spec(&self) -> Result<FluxSpec> {
        FluxSpec::from_label(&self.flux)
    }

    pub fn diffusion_tensor(&self) -> Result<DiffusionTensor> {
        DiffusionTensor::new(&self.diffusion)
    }

    pub fn profile_set(&self) -> Result<ProfileSet> {
        ProfileSet::new(WaveEndpoints::new(self.u_minus, self.u_plus)?, self.flux_spec()?, self.diffusion_tensor()?.a11())
    }

    pub fn transverse(&self) -> TransverseFluxSet {
        TransverseFluxSet::burgers(self.grid.transverse.len() + 1)
    }

    pub fn channel_grid(&self) -> Result<ChannelGrid> {
        ChannelGrid::new(self.grid.half_width, self.grid.n1, self.grid.transverse.clone())
    }

    pub fn mode_list(&self) -> Vec<Mode> {
        self.modes.iter().map(ModeConfig::to_mode).collect()
    }

    /// `None` when there is nothing to scale (no modes or `epsilon = 0`).
    pub fn epsilon_target(&self) -> Option<f64> {
        (self.epsilon > 0.0 && !self.modes.is_empty()).then_some(self.epsilon)
    }

    pub fn cell_points(&self) -> Vec<usize> {
        if self.cell.points.is_empty() {
            std::iter::once(self.grid.cell_n1).chain(self.grid.transverse.iter().copied()).collect()
        } else {
            self.cell.points.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = RunConfig::default();
        let text = c.canonical();
        let back = validate_config(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.canonical(), text);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn missing_epsilon_is_named() {
        let mut v: Value = serde_json::to_value(RunConfig::default()).unwrap();
        v.as_object_mut().unwrap().remove("epsilon");
        let err = validate_config(&v.to_string()).unwrap_err();
        let Error::Config(list) = err else { panic!() };
        assert!(list.iter().any(|m| m.starts_with("epsilon")), "{list:?}");
    }

    #[test]
    fn small_half_width_cites_envelope() {
        let text = RunConfig::default().canonical();
        let err = validate_with_overrides(&text, &["grid.half_width=100".into()]).unwrap_err();
        let Error::Config(list) = err else { panic!() };
        assert_eq!(list.len(), 1);
        assert!(list[0].contains("lambda_+ (1 + t)"));
    }

    #[test]
    fn errors_are_collected() {
        let text = RunConfig::default().canonical();
        let err = validate_with_overrides(&text, &["t_end=-1".into(), "grid.n1=3".into()]).unwrap_err();
        let Error::Config(list) = err else { panic!() };
        assert!(list.len() >= 2, "{list:?}");
    }

    #[test]
    fn overrides_parse_json_or_string() {
        let text = RunConfig::default().canonical();
        let c = validate_with_overrides(&text, &["flux=cubic".into(), "cadence.dt=1.0".into(), "grid.half_width=800".into()]).unwrap();
        assert_eq!(c.flux, "cubic");
        assert_eq!(c.cadence.dt, 1.0);
    }

    #[test]
    fn record_times_cover_run() {
        let c = CadenceConfig::default();
        let t = c.record_times(200.0);
        assert_eq!(t[0], 0.0);
        assert_eq!(*t.last().unwrap(), 200.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(t.len(), 81 + 396);
    }
}
