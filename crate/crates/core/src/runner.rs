//! Experiment orchestration: configs, time loops, sweeps, norms, CSV.

use crate::chandrasekhar::{kernel, KernelKind, KernelTable};
use crate::collision::{assemble_l, CollisionOperator, CrossSection};
use crate::error::{Error, Result};
use crate::grid_state::{init_state, BoundaryData, MMState, SpatialGrid, StaggeredMasks};
use crate::reference;
use crate::scheme_lme::{self, LmeWorkspace};
use crate::scheme_naive::{self, dt_rule, NaiveWorkspace};
use crate::vquad::{gauss_grid, VelocityGrid};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Inflow data profile in v; evaluated on the incoming half-range only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundarySpec {
    Zero,
    Constant { c: f64 },
    LinearV,
    Polynomial { coefficients: Vec<f64> },
}

impl BoundarySpec {
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            BoundarySpec::Zero => 0.0,
            BoundarySpec::Constant { c } => *c,
            BoundarySpec::LinearV => v,
            BoundarySpec::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, &c| acc * v + c)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            BoundarySpec::Constant { c } if !c.is_finite() => {
                Err(Error::config(format!("boundary constant must be finite, got {c}")))
            }
            BoundarySpec::Polynomial { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    Err(Error::config(
                        "polynomial boundary data needs finite, nonempty coefficients",
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Lme,
    Naive,
    Explicit,
    Diffusion,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scheme::Lme => "lme",
            Scheme::Naive => "naive",
            Scheme::Explicit => "explicit",
            Scheme::Diffusion => "diffusion",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sigma: CrossSection,
    pub f_left: BoundarySpec,
    pub f_right: BoundarySpec,
    pub epsilon: f64,
    #[serde(rename = "N_space")]
    pub n_space: usize,
    #[serde(rename = "M_velocity")]
    pub m_velocity: usize,
    pub t_final: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let cfg: ExperimentConfig = serde_json::from_reader(std::io::BufReader::new(file))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sigma.validate()?;
        self.f_left.validate()?;
        self.f_right.validate()?;
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::config(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::config(format!(
                "t_final must be positive and finite, got {}",
                self.t_final
            )));
        }
        self.snapshot_targets()?;
        Ok(())
    }

    /// Validated snapshot list with t_final appended when absent.
    fn snapshot_targets(&self) -> Result<Vec<f64>> {
        let mut targets = Vec::with_capacity(self.snapshot_times.len() + 1);
        for &t in &self.snapshot_times {
            if !(t > 0.0 && t <= self.t_final + 1e-13) {
                return Err(Error::config(format!(
                    "snapshot time {t} outside (0, {}]",
                    self.t_final
                )));
            }
            if let Some(&last) = targets.last() {
                if t <= last + 1e-13 {
                    return Err(Error::config(
                        "snapshot times must be strictly increasing",
                    ));
                }
            }
            targets.push(t);
        }
        if targets.last().map_or(true, |&l| l < self.t_final - 1e-13) {
            targets.push(self.t_final);
        }
        Ok(targets)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSnapshot {
    pub time: f64,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
}

/// Wall densities per snapshot. For the matched scheme these are the
/// diffusion-consistent reconstructed values rather than the raw state at
/// the wall nodes; the naive scheme has no wall values at all.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryValues {
    pub time: f64,
    pub left: Option<f64>,
    pub right: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaSample {
    pub time: f64,
    pub lambda_left: f64,
    pub lambda_right: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormEntry {
    pub time: f64,
    pub norm: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: Scheme,
    pub epsilon: f64,
    pub kappa: f64,
    pub profiles: Vec<ProfileSnapshot>,
    pub boundary_values: Vec<BoundaryValues>,
    pub lambda_history: Vec<LambdaSample>,
    /// filled by compare(), empty right after a run
    pub norms: Vec<NormEntry>,
}

impl RunReport {
    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

fn boundary_vectors(config: &ExperimentConfig, vgrid: &VelocityGrid) -> Result<BoundaryData> {
    let m = vgrid.len();
    let fl = DVector::from_fn(m, |k, _| config.f_left.eval(vgrid.nodes[k]));
    let fr = DVector::from_fn(m, |k, _| config.f_right.eval(vgrid.nodes[k]));
    BoundaryData::new(vgrid, fl, fr)
}

enum MmWorkspace {
    Lme(LmeWorkspace),
    Naive(NaiveWorkspace),
}

impl MmWorkspace {
    fn build(
        scheme: Scheme,
        op: &CollisionOperator,
        sgrid: &SpatialGrid,
        masks: &StaggeredMasks,
        eps: f64,
        dt: f64,
    ) -> Result<Self> {
        match scheme {
            Scheme::Lme => Ok(MmWorkspace::Lme(LmeWorkspace::new(op, sgrid, masks, eps, dt)?)),
            Scheme::Naive => Ok(MmWorkspace::Naive(NaiveWorkspace::new(
                op, sgrid, masks, eps, dt,
            )?)),
            _ => Err(Error::invalid("not a micro-macro scheme")),
        }
    }

    fn step(
        &self,
        st: &mut MMState,
        op: &CollisionOperator,
        sgrid: &SpatialGrid,
        masks: &StaggeredMasks,
        bd: &BoundaryData,
    ) -> Result<()> {
        match self {
            MmWorkspace::Lme(ws) => scheme_lme::step_lme(st, op, sgrid, masks, bd, ws),
            MmWorkspace::Naive(ws) => scheme_naive::step_naive(st, op, sgrid, masks, bd, ws),
        }
    }
}

fn run_micro_macro(config: &ExperimentConfig, op: &CollisionOperator) -> Result<RunReport> {
    let sgrid = SpatialGrid::new(config.n_space)?;
    let masks = StaggeredMasks::build(&sgrid, &op.grid)?;
    let bd = boundary_vectors(config, &op.grid)?;
    let mut st = init_state(&|_, _| 0.0, &op.grid, &sgrid, &masks, &bd, config.epsilon)?;
    let targets = config.snapshot_targets()?;
    let dt_full = dt_rule(sgrid.dx, config.epsilon);

    let mut cache: HashMap<u64, MmWorkspace> = HashMap::new();
    let mut profiles = Vec::new();
    let mut boundary_values = Vec::new();
    let mut lambda_history = Vec::new();
    for &target in &targets {
        while st.time < target - 1e-13 {
            let dtc = dt_full.min(target - st.time);
            let key = dtc.to_bits();
            if !cache.contains_key(&key) {
                let ws = MmWorkspace::build(config.scheme, op, &sgrid, &masks, config.epsilon, dtc)?;
                cache.insert(key, ws);
            }
            cache[&key].step(&mut st, op, &sgrid, &masks, &bd)?;
            if config.scheme == Scheme::Lme {
                lambda_history.push(LambdaSample {
                    time: st.time,
                    lambda_left: st.lambda_left,
                    lambda_right: st.lambda_right,
                });
            }
        }
        st.time = target; // clear the 1e-13 landing slack

        match config.scheme {
            Scheme::Lme => {
                profiles.push(ProfileSnapshot {
                    time: target,
                    x: sgrid.nodes.clone(),
                    rho: st.rho.clone(),
                });
                boundary_values.push(BoundaryValues {
                    time: target,
                    left: Some(scheme_lme::reconstruct_boundary_value(
                        op,
                        bd.rhobar_left,
                        &st.g_left,
                    )?),
                    right: Some(scheme_lme::reconstruct_boundary_value(
                        op,
                        bd.rhobar_right,
                        &st.g_right,
                    )?),
                });
            }
            Scheme::Naive => {
                // the naive scheme never computes wall densities
                profiles.push(ProfileSnapshot {
                    time: target,
                    x: sgrid.nodes[1..=sgrid.n].to_vec(),
                    rho: st.rho[1..=sgrid.n].to_vec(),
                });
                boundary_values.push(BoundaryValues {
                    time: target,
                    left: None,
                    right: None,
                });
            }
            _ => unreachable!(),
        }
    }
    Ok(RunReport {
        scheme: config.scheme,
        epsilon: config.epsilon,
        kappa: op.kappa,
        profiles,
        boundary_values,
        lambda_history,
        norms: Vec::new(),
    })
}

fn run_explicit_reference(config: &ExperimentConfig, op: &CollisionOperator) -> Result<RunReport> {
    let bd = boundary_vectors(config, &op.grid)?;
    // cells = N+1 intervals puts the kinetic nodes on the micro-macro grid
    let cells = config.n_space + 1;
    let targets = config.snapshot_targets()?;
    let run = reference::run_explicit(op, &bd, cells, config.epsilon, config.t_final, &targets, None)?;
    let profiles: Vec<ProfileSnapshot> = run
        .snapshots
        .iter()
        .map(|(t, rho)| ProfileSnapshot {
            time: *t,
            x: run.x.clone(),
            rho: rho.clone(),
        })
        .collect();
    let boundary_values = profiles
        .iter()
        .map(|p| BoundaryValues {
            time: p.time,
            left: Some(p.rho[0]),
            right: Some(*p.rho.last().unwrap()),
        })
        .collect();
    Ok(RunReport {
        scheme: config.scheme,
        epsilon: config.epsilon,
        kappa: op.kappa,
        profiles,
        boundary_values,
        lambda_history: Vec::new(),
        norms: Vec::new(),
    })
}

/// Dirichlet values for the diffusion reference from the exact Milne kernel
/// of the cross section; errors when no kernel is available.
pub fn diffusion_boundary_values(
    config: &ExperimentConfig,
    sigma: &CrossSection,
) -> Result<(f64, f64)> {
    let kind = match sigma {
        CrossSection::Constant => KernelKind::K0,
        CrossSection::Multiplicative { .. } => KernelKind::Ksigma,
        CrossSection::Pairwise { .. } => {
            return Err(Error::config(
                "the diffusion reference needs a Chandrasekhar boundary kernel, which exists \
                 only for constant or multiplicative sigma; use the explicit scheme instead",
            ))
        }
    };
    let table = kernel(kind, sigma)?;
    let left = table.boundary_value(|v| config.f_left.eval(v));
    // the right wall sees the reflected datum f_r(-v) on v > 0
    let right = table.boundary_value(|v| config.f_right.eval(-v));
    Ok((left, right))
}

fn run_diffusion_reference(config: &ExperimentConfig, op: &CollisionOperator) -> Result<RunReport> {
    let bc = diffusion_boundary_values(config, &op.sigma)?;
    let nodes = config.n_space + 2;
    let targets = config.snapshot_targets()?;
    let run = reference::run_diffusion(op.kappa, nodes, bc, config.t_final, &targets)?;
    let profiles: Vec<ProfileSnapshot> = run
        .snapshots
        .iter()
        .map(|(t, rho)| ProfileSnapshot {
            time: *t,
            x: run.x.clone(),
            rho: rho.clone(),
        })
        .collect();
    let boundary_values = profiles
        .iter()
        .map(|p| BoundaryValues {
            time: p.time,
            left: Some(bc.0),
            right: Some(bc.1),
        })
        .collect();
    Ok(RunReport {
        scheme: config.scheme,
        epsilon: config.epsilon,
        kappa: op.kappa,
        profiles,
        boundary_values,
        lambda_history: Vec::new(),
        norms: Vec::new(),
    })
}

/// Runs one configured experiment and, when output_path is set, writes the
/// profile CSVs and report.json there.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let vgrid = gauss_grid(config.m_velocity)?;
    let op = assemble_l(&config.sigma, &vgrid)?;
    let report = match config.scheme {
        Scheme::Lme | Scheme::Naive => run_micro_macro(config, &op)?,
        Scheme::Explicit => run_explicit_reference(config, &op)?,
        Scheme::Diffusion => run_diffusion_reference(config, &op)?,
    };
    if let Some(dir) = &config.output_path {
        write_outputs(&report, dir)?;
    }
    Ok(report)
}

/// Writes rho_t<time>.csv per profile plus report.json into `dir`.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for p in &report.profiles {
        let path = dir.join(format!("rho_t{}.csv", p.time));
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "x,rho")?;
        for (x, r) in p.x.iter().zip(&p.rho) {
            writeln!(out, "{x},{r}")?;
        }
    }
    let file = std::fs::File::create(dir.join("report.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), report)?;
    Ok(())
}

/// One row of an epsilon sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// wall density estimate at the left wall: the reconstructed value for
    /// the matched scheme, the 2 rho_1 - rho_2 extrapolation for the naive
    pub boundary_value: f64,
    /// sup over 100 aligned steps of the interior distance to the scheme's
    /// own eps -> 0 limit trajectory
    pub sup_distance: f64,
}

/// Distance-to-limit sweep at fixed (N, M) across decreasing epsilons.
///
/// Both trajectories are aligned after one warm-up step of the kinetic
/// scheme (the first step carries an eps-independent O(dt) transient from
/// the zero initial data that would otherwise mask the eps scaling); the
/// limit trajectory then advances with the explicit heat stencil and the
/// scheme's own limit wall values.
///
/// When both walls carry the same constant equilibrium datum the sweep
/// starts on that fixed point instead of zero, so the distances measure
/// pure scheme drift (machine zero) rather than a data transient.
pub fn epsilon_sweep(config: &ExperimentConfig, eps_list: &[f64]) -> Result<Vec<SweepRow>> {
    config.validate()?;
    if eps_list.is_empty() {
        return Err(Error::invalid("epsilon sweep needs at least one epsilon"));
    }
    for pair in eps_list.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(Error::invalid("epsilon list must be strictly decreasing"));
        }
    }
    if !(eps_list[eps_list.len() - 1] > 0.0) {
        return Err(Error::invalid("epsilons must be positive"));
    }
    if !matches!(config.scheme, Scheme::Lme | Scheme::Naive) {
        return Err(Error::invalid(
            "epsilon sweep applies to the micro-macro schemes only",
        ));
    }

    let vgrid = gauss_grid(config.m_velocity)?;
    let op = assemble_l(&config.sigma, &vgrid)?;
    let sgrid = SpatialGrid::new(config.n_space)?;
    let masks = StaggeredMasks::build(&sgrid, &vgrid)?;
    let bd = boundary_vectors(config, &vgrid)?;
    let n = sgrid.n;

    let (val_l, val_r) = match config.scheme {
        Scheme::Lme => {
            let (l, r) = scheme_lme::limit_values(&op, &bd)?;
            (l.rho_hat, r.rho_hat)
        }
        Scheme::Naive => scheme_naive::limit_boundary_values_naive(&op, &bd)?,
        _ => unreachable!(),
    };
    let c0 = bd.f_left[0];
    let equilibrium = bd.f_left.iter().all(|&x| x == c0) && bd.f_right.iter().all(|&x| x == c0);
    let init = if equilibrium { c0 } else { 0.0 };

    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let dt = dt_rule(sgrid.dx, eps);
        let ws = MmWorkspace::build(config.scheme, &op, &sgrid, &masks, eps, dt)?;
        let mut st = init_state(&|_, _| init, &vgrid, &sgrid, &masks, &bd, eps)?;
        ws.step(&mut st, &op, &sgrid, &masks, &bd)?; // warm-up alignment
        let mut rho_hat = st.rho.clone();
        rho_hat[0] = val_l;
        rho_hat[n + 1] = val_r;
        let mut dist = 0.0_f64;
        for _ in 0..100 {
            ws.step(&mut st, &op, &sgrid, &masks, &bd)?;
            reference::step_diffusion(&mut rho_hat, op.kappa, dt, (val_l, val_r))?;
            for i in 1..=n {
                dist = dist.max((st.rho[i] - rho_hat[i]).abs());
            }
        }

        // steady wall estimate from a fresh 1000-step run
        let mut st2 = init_state(&|_, _| init, &vgrid, &sgrid, &masks, &bd, eps)?;
        for _ in 0..1000 {
            ws.step(&mut st2, &op, &sgrid, &masks, &bd)?;
        }
        let boundary_value = match config.scheme {
            Scheme::Lme => scheme_lme::reconstruct_boundary_value(&op, bd.rhobar_left, &st2.g_left)?,
            Scheme::Naive => 2.0 * st2.rho[1] - st2.rho[2],
            _ => unreachable!(),
        };
        rows.push(SweepRow {
            epsilon: eps,
            boundary_value,
            sup_distance: dist,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Sup,
    L2,
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sup" => Ok(NormKind::Sup),
            "l2" => Ok(NormKind::L2),
            other => Err(Error::invalid(format!("unknown norm {other:?}; use sup or l2"))),
        }
    }
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormKind::Sup => "sup",
            NormKind::L2 => "l2",
        })
    }
}

/// Piecewise-linear evaluation of (xs, ys) at x, clamped at the ends.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let mut lo = 0;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if xs[mid] <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + t * (ys[hi] - ys[lo])
}

/// Norm of the profile difference at every common snapshot time, evaluated
/// on the finer of the two grids restricted to the overlap of their spans.
pub fn compare(a: &RunReport, b: &RunReport, norm: NormKind) -> Result<Vec<NormEntry>> {
    let mut entries = Vec::new();
    for pa in &a.profiles {
        let Some(pb) = b
            .profiles
            .iter()
            .find(|pb| (pb.time - pa.time).abs() <= 1e-9)
        else {
            continue;
        };
        let fine = if pa.x.len() >= pb.x.len() { &pa.x } else { &pb.x };
        let lo = pa.x[0].max(pb.x[0]);
        let hi = pa.x[pa.x.len() - 1].min(pb.x[pb.x.len() - 1]);
        let pts: Vec<f64> = fine.iter().copied().filter(|&x| x >= lo && x <= hi).collect();
        if pts.len() < 2 {
            return Err(Error::invalid("profiles do not overlap in x"));
        }
        let diffs: Vec<f64> = pts
            .iter()
            .map(|&x| interp_linear(&pa.x, &pa.rho, x) - interp_linear(&pb.x, &pb.rho, x))
            .collect();
        let value = match norm {
            NormKind::Sup => diffs.iter().fold(0.0_f64, |m, d| m.max(d.abs())),
            NormKind::L2 => {
                // composite trapezoid of diff^2 over the overlap
                let mut s = 0.0;
                for i in 0..pts.len() - 1 {
                    let h = pts[i + 1] - pts[i];
                    s += 0.5 * h * (diffs[i] * diffs[i] + diffs[i + 1] * diffs[i + 1]);
                }
                s.sqrt()
            }
        };
        entries.push(NormEntry {
            time: pa.time,
            norm: norm.to_string(),
            value,
        });
    }
    if entries.is_empty() {
        return Err(Error::invalid(
            "the reports share no snapshot times to compare",
        ));
    }
    Ok(entries)
}

/// Kernel tables for the CLI: the closed-form family for constant sigma,
/// the exact/surrogate pair for multiplicative sigma.
pub fn kernel_tables(sigma: &CrossSection) -> Result<Vec<KernelTable>> {
    match sigma {
        CrossSection::Constant => Ok(vec![
            kernel(KernelKind::K0, sigma)?,
            kernel(KernelKind::K1, sigma)?,
            kernel(KernelKind::K2, sigma)?,
            kernel(KernelKind::K3, sigma)?,
        ]),
        CrossSection::Multiplicative { .. } => Ok(vec![
            kernel(KernelKind::Ksigma, sigma)?,
            kernel(KernelKind::KsigmaApp, sigma)?,
        ]),
        CrossSection::Pairwise { .. } => Err(Error::config(
            "no Chandrasekhar kernel exists for pairwise sigma",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn base_config(scheme: Scheme) -> ExperimentConfig {
        ExperimentConfig {
            sigma: CrossSection::Constant,
            f_left: BoundarySpec::Constant { c: 1.0 },
            f_right: BoundarySpec::Zero,
            epsilon: 1.0,
            n_space: 4,
            m_velocity: 8,
            t_final: 0.013,
            snapshot_times: vec![0.005, 0.013],
            scheme,
            output_path: None,
        }
    }

    #[test]
    fn sigma_json_matches_the_documented_encoding() {
        let cases = [
            (CrossSection::Constant, r#"{"kind":"constant"}"#),
            (
                CrossSection::Multiplicative {
                    p: crate::collision::Profile::AbsPow { q: 1.5 },
                },
                r#"{"kind":"multiplicative","p":"abs_pow","q":1.5}"#,
            ),
            (
                CrossSection::Multiplicative {
                    p: crate::collision::Profile::OneMinusV2Pow { q: -0.75 },
                },
                r#"{"kind":"multiplicative","p":"one_minus_v2_pow","q":-0.75}"#,
            ),
            (
                CrossSection::Pairwise {
                    phi: crate::collision::PairProfile::AbsDiffPow { q: 5.0 },
                },
                r#"{"kind":"pairwise","form":"abs_diff_pow","q":5.0}"#,
            ),
        ];
        for (sigma, json) in cases {
            assert_eq!(serde_json::to_string(&sigma).unwrap(), json);
            let back: CrossSection = serde_json::from_str(json).unwrap();
            assert_eq!(back, sigma);
        }
        // invalid exponents are rejected at parse time
        assert!(serde_json::from_str::<CrossSection>(
            r#"{"kind":"multiplicative","p":"abs_pow","q":5.0}"#
        )
        .is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = base_config(Scheme::Lme);
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("\"N_space\":4") && s.contains("\"M_velocity\":8"));
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn snapshot_validation_rejects_bad_lists() {
        let mut cfg = base_config(Scheme::Lme);
        cfg.snapshot_times = vec![0.02]; // beyond t_final
        assert!(cfg.validate().is_err());
        cfg.snapshot_times = vec![0.01, 0.005]; // not increasing
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn snapshots_land_exactly_and_profiles_match_the_grid() {
        let cfg = base_config(Scheme::Lme);
        let report = run(&cfg).unwrap();
        assert_eq!(report.profiles.len(), 2);
        assert_eq!(report.profiles[0].time, 0.005);
        assert_eq!(report.profiles[1].time, 0.013);
        for p in &report.profiles {
            assert_eq!(p.x.len(), 6); // N + 2 nodes
            assert_eq!(p.rho.len(), 6);
        }
        assert!(report.boundary_values.iter().all(|b| b.left.is_some()));
        assert!(!report.lambda_history.is_empty());
    }

    #[test]
    fn naive_report_omits_wall_values() {
        let cfg = base_config(Scheme::Naive);
        let report = run(&cfg).unwrap();
        for p in &report.profiles {
            assert_eq!(p.x.len(), 4); // interior nodes only
            assert!(p.x[0] > 0.0 && p.x[3] < 1.0);
        }
        assert!(report
            .boundary_values
            .iter()
            .all(|b| b.left.is_none() && b.right.is_none()));
        assert!(report.lambda_history.is_empty());
    }

    #[test]
    fn identical_reports_compare_to_zero() {
        let cfg = base_config(Scheme::Lme);
        let report = run(&cfg).unwrap();
        for norm in [NormKind::Sup, NormKind::L2] {
            let entries = compare(&report, &report, norm).unwrap();
            assert_eq!(entries.len(), 2);
            assert!(entries.iter().all(|e| e.value == 0.0));
        }
    }

    #[test]
    fn disjoint_snapshot_times_error() {
        let cfg = base_config(Scheme::Lme);
        let mut cfg2 = base_config(Scheme::Lme);
        cfg2.t_final = 0.012;
        cfg2.snapshot_times = vec![0.003, 0.012];
        let a = run(&cfg).unwrap();
        let b = run(&cfg2).unwrap();
        assert!(compare(&a, &b, NormKind::Sup).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = base_config(Scheme::Lme);
        let a = serde_json::to_string(&run(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn equilibrium_sweep_distances_are_machine_zero() {
        let mut cfg = base_config(Scheme::Lme);
        cfg.f_left = BoundarySpec::Constant { c: 0.7 };
        cfg.f_right = BoundarySpec::Constant { c: 0.7 };
        cfg.n_space = 8;
        cfg.m_velocity = 16;
        for scheme in [Scheme::Lme, Scheme::Naive] {
            cfg.scheme = scheme;
            let rows = epsilon_sweep(&cfg, &[1e-2, 1e-4]).unwrap();
            for row in rows {
                assert!(row.sup_distance <= 1e-12, "dist = {}", row.sup_distance);
                assert_abs_diff_eq!(row.boundary_value, 0.7, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn diffusion_scheme_requires_a_kernel() {
        let mut cfg = base_config(Scheme::Diffusion);
        cfg.sigma = CrossSection::Pairwise {
            phi: crate::collision::PairProfile::AbsDiffPow { q: 5.0 },
        };
        let err = run(&cfg).unwrap_err().to_string();
        assert!(err.contains("kernel"), "unexpected message: {err}");
    }

    #[test]
    fn sweep_rejects_non_decreasing_lists() {
        let cfg = base_config(Scheme::Lme);
        assert!(epsilon_sweep(&cfg, &[1e-4, 1e-2]).is_err());
        assert!(epsilon_sweep(&cfg, &[]).is_err());
    }
}
