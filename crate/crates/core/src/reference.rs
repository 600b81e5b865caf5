//! Resolved reference solvers the scheme tests compare against.
//!
//! The kinetic oracle integrates the unsplit equation
//! `eps df/dt + v df/dx = (1/eps) L f`
//! with first-order upwinding and an explicit collision term, which is
//! stable only under a time step resolving both the transport and the
//! stiff collision scales. The diffusion oracle integrates
//! `drho/dt = kappa d2rho/dx2`
//! with the explicit three-point stencil and Dirichlet walls. Both are
//! deliberately plain: their value is being too simple to be wrong.

use crate::collision::CollisionOperator;
use crate::error::{Error, Result};
use crate::grid_state::BoundaryData;
use nalgebra::DMatrix;

/// Density snapshots of a resolved run on the uniform node grid.
#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub x: Vec<f64>,
    /// (time, rho) at each requested snapshot time, in request order
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub rho: Vec<f64>,
    pub time: f64,
}

/// Largest stable explicit step: the harmonic transport-collision bound,
/// capped by the pure advection CFL and by the collision spectral radius.
pub fn explicit_dt(op: &CollisionOperator, cells: usize, eps: f64) -> f64 {
    let dxr = 1.0 / cells as f64;
    let vmax = op.grid.nodes.amax();
    let a = 0.9 / (vmax / (eps * dxr) + op.nu_max() / (eps * eps));
    let b = eps * dxr / vmax;
    let c = 0.9 * eps * eps / op.lam_min().abs();
    a.min(b).min(c)
}

fn sanitize_targets(t_end: f64, snapshot_times: &[f64]) -> Result<Vec<f64>> {
    if !(t_end > 0.0) {
        return Err(Error::invalid(format!("t_end must be positive, got {t_end}")));
    }
    let mut targets = Vec::with_capacity(snapshot_times.len() + 1);
    for &t in snapshot_times {
        if !(t > 0.0 && t <= t_end + 1e-13) {
            return Err(Error::invalid(format!(
                "snapshot time {t} outside (0, {t_end}]"
            )));
        }
        if let Some(&last) = targets.last() {
            if t <= last + 1e-13 {
                return Err(Error::invalid(
                    "snapshot times must be strictly increasing",
                ));
            }
        }
        targets.push(t);
    }
    if targets.last().map_or(true, |&last| last < t_end - 1e-13) {
        targets.push(t_end);
    }
    Ok(targets)
}

/// Runs the explicit kinetic solver from f = 0 with the incoming wall rows
/// pinned to the data. `cells` counts spatial intervals, so the node grid
/// i/cells matches a micro-macro grid with N = cells - 1 interior nodes.
///
/// `dt_override`, when given, must not exceed the stability bound.
pub fn run_explicit(
    op: &CollisionOperator,
    bd: &BoundaryData,
    cells: usize,
    eps: f64,
    t_end: f64,
    snapshot_times: &[f64],
    dt_override: Option<f64>,
) -> Result<ReferenceRun> {
    if cells < 2 {
        return Err(Error::invalid(format!("need at least 2 cells, got {cells}")));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let targets = sanitize_targets(t_end, snapshot_times)?;
    let bound = explicit_dt(op, cells, eps);
    let dt = match dt_override {
        Some(d) => {
            if !(d > 0.0) || d > bound * (1.0 + 1e-9) {
                return Err(Error::invalid(format!(
                    "dt = {d:.6e} violates the explicit stability bound {bound:.6e}"
                )));
            }
            d
        }
        None => bound,
    };

    let m = op.len();
    let v = &op.grid.nodes;
    let nr = cells + 1;
    let mut f = DMatrix::zeros(nr, m);
    for j in 0..m {
        if v[j] > 0.0 {
            f[(0, j)] = bd.f_left[j];
        } else {
            f[(nr - 1, j)] = bd.f_right[j];
        }
    }
    let lt = op.matrix.transpose();
    let mut coll = DMatrix::zeros(nr, m);
    let mut fnew = f.clone();
    let dxr = 1.0 / cells as f64;

    let x: Vec<f64> = (0..nr).map(|i| i as f64 / cells as f64).collect();
    let mut snapshots = Vec::new();
    let mut t = 0.0_f64;
    for &target in &targets {
        while t < target - 1e-13 {
            let dtc = dt.min(target - t);
            f.mul_to(&lt, &mut coll);
            let c1 = dtc / (eps * dxr);
            let c2 = dtc / (eps * eps);
            for j in 0..m {
                let vj = v[j];
                if vj > 0.0 {
                    for i in 1..nr {
                        fnew[(i, j)] =
                            f[(i, j)] - c1 * vj * (f[(i, j)] - f[(i - 1, j)]) + c2 * coll[(i, j)];
                    }
                    fnew[(0, j)] = bd.f_left[j];
                } else {
                    for i in 0..nr - 1 {
                        fnew[(i, j)] =
                            f[(i, j)] - c1 * vj * (f[(i + 1, j)] - f[(i, j)]) + c2 * coll[(i, j)];
                    }
                    fnew[(nr - 1, j)] = bd.f_right[j];
                }
            }
            std::mem::swap(&mut f, &mut fnew);
            t += dtc;
        }
        t = target; // clear the 1e-13 landing slack
        if snapshot_times.iter().any(|&s| (s - target).abs() < 1e-12) {
            snapshots.push((target, density(&f, op)));
        }
    }
    Ok(ReferenceRun {
        x,
        snapshots,
        rho: density(&f, op),
        time: t,
    })
}

fn density(f: &DMatrix<f64>, op: &CollisionOperator) -> Vec<f64> {
    let rho = f * &op.grid.mu_weights;
    rho.iter().copied().collect()
}

/// One explicit heat step with Dirichlet walls re-pinned afterwards.
///
/// `rho` lives on the uniform node grid of 1/(len-1) spacing; requires the
/// parabolic bound kappa dt / dx^2 <= 1/2.
pub fn step_diffusion(rho: &mut [f64], kappa: f64, dt: f64, bc: (f64, f64)) -> Result<()> {
    let n = rho.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "diffusion step needs at least 3 nodes, got {n}"
        )));
    }
    if !(kappa > 0.0) || !(dt > 0.0) {
        return Err(Error::invalid(format!(
            "diffusion step needs kappa > 0 and dt > 0, got kappa = {kappa}, dt = {dt}"
        )));
    }
    let dx = 1.0 / (n - 1) as f64;
    let lam = kappa * dt / (dx * dx);
    if lam > 0.5 + 1e-12 {
        return Err(Error::invalid(format!(
            "kappa dt/dx^2 = {lam:.6} violates the explicit heat bound 1/2"
        )));
    }
    #[cfg(debug_assertions)]
    let (lo, hi) = {
        let mut lo = bc.0.min(bc.1);
        let mut hi = bc.0.max(bc.1);
        for &r in rho.iter() {
            lo = lo.min(r);
            hi = hi.max(r);
        }
        (lo, hi)
    };
    let mut prev = rho[0];
    for i in 1..n - 1 {
        let cur = rho[i];
        rho[i] = cur + lam * (rho[i + 1] - 2.0 * cur + prev);
        prev = cur;
    }
    rho[0] = bc.0;
    rho[n - 1] = bc.1;
    #[cfg(debug_assertions)]
    for &r in rho.iter() {
        debug_assert!(
            r >= lo - 1e-12 && r <= hi + 1e-12,
            "explicit heat step violated the discrete maximum principle"
        );
    }
    Ok(())
}

/// Integrates the heat equation from rho = 0 with fixed wall values.
pub fn run_diffusion(
    kappa: f64,
    nodes: usize,
    bc: (f64, f64),
    t_end: f64,
    snapshot_times: &[f64],
) -> Result<ReferenceRun> {
    if nodes < 3 {
        return Err(Error::invalid(format!(
            "diffusion run needs at least 3 nodes, got {nodes}"
        )));
    }
    if !(kappa > 0.0) {
        return Err(Error::invalid(format!("kappa must be positive, got {kappa}")));
    }
    let targets = sanitize_targets(t_end, snapshot_times)?;
    let dx = 1.0 / (nodes - 1) as f64;
    let dt = 0.45 * dx * dx / kappa;
    let x: Vec<f64> = (0..nodes).map(|i| i as f64 * dx).collect();
    let mut rho = vec![0.0; nodes];
    rho[0] = bc.0;
    rho[nodes - 1] = bc.1;
    let mut snapshots = Vec::new();
    let mut t = 0.0_f64;
    for &target in &targets {
        while t < target - 1e-13 {
            let dtc = dt.min(target - t);
            step_diffusion(&mut rho, kappa, dtc, bc)?;
            t += dtc;
        }
        t = target;
        if snapshot_times.iter().any(|&s| (s - target).abs() < 1e-12) {
            snapshots.push((target, rho.clone()));
        }
    }
    Ok(ReferenceRun {
        x,
        snapshots,
        rho,
        time: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{assemble_l, CrossSection};
    use crate::vquad::gauss_grid;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn setup(m: usize, fl: f64, fr: f64) -> (CollisionOperator, BoundaryData) {
        let g = gauss_grid(m).unwrap();
        let op = assemble_l(&CrossSection::Constant, &g).unwrap();
        let bd = BoundaryData::new(
            &g,
            DVector::from_element(m, fl),
            DVector::from_element(m, fr),
        )
        .unwrap();
        (op, bd)
    }

    #[test]
    fn constant_data_relaxes_to_equilibrium() {
        let (op, bd) = setup(8, 1.0, 1.0);
        let run = run_explicit(&op, &bd, 20, 0.5, 8.0, &[2.0, 4.0, 6.0, 8.0], None).unwrap();
        assert_abs_diff_eq!(run.time, 8.0, epsilon = 1e-12);
        let dev = |rho: &[f64]| rho.iter().fold(0.0_f64, |a, &r| a.max((r - 1.0).abs()));
        // the slowest mode decays cleanly: each 2 time units shrink the
        // deviation by an order of magnitude
        for w in run.snapshots.windows(2) {
            assert!(dev(&w[1].1) < 0.2 * dev(&w[0].1));
        }
        for &r in &run.rho {
            assert_abs_diff_eq!(r, 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn snapshots_land_exactly_and_stay_bounded() {
        let (op, bd) = setup(8, 1.0, 0.0);
        let run = run_explicit(&op, &bd, 25, 0.3, 0.1, &[0.05, 0.1], None).unwrap();
        assert_eq!(run.snapshots.len(), 2);
        assert_abs_diff_eq!(run.snapshots[0].0, 0.05, epsilon = 1e-13);
        assert_abs_diff_eq!(run.snapshots[1].0, 0.1, epsilon = 1e-13);
        for (_, rho) in &run.snapshots {
            assert!(rho.iter().all(|&r| (-1e-12..=1.0 + 1e-12).contains(&r)));
        }
        // the profile decreases from the hot wall to the cold wall
        assert!(run.rho[0] > run.rho[24]);
    }

    #[test]
    fn oversized_dt_is_rejected() {
        let (op, bd) = setup(8, 1.0, 0.0);
        let bound = explicit_dt(&op, 25, 0.3);
        assert!(run_explicit(&op, &bd, 25, 0.3, 0.1, &[], Some(10.0 * bound)).is_err());
        assert!(run_explicit(&op, &bd, 25, 0.3, 0.1, &[], Some(0.5 * bound)).is_ok());
    }

    #[test]
    fn heat_step_rejects_unstable_lambda() {
        let mut rho = vec![0.0; 11];
        // dx = 0.1, so dt = 0.03 gives lambda = 3 > 1/2
        assert!(step_diffusion(&mut rho, 1.0, 0.03, (0.0, 0.0)).is_err());
        assert!(step_diffusion(&mut rho, 1.0, 0.004, (0.0, 0.0)).is_ok());
    }

    #[test]
    fn heat_run_approaches_the_linear_steady_state() {
        let run = run_diffusion(1.0 / 3.0, 21, (1.0, 0.0), 5.0, &[]).unwrap();
        for (i, &xi) in run.x.iter().enumerate() {
            assert_abs_diff_eq!(run.rho[i], 1.0 - xi, epsilon = 1e-6);
        }
    }

    #[test]
    fn heat_step_preserves_the_maximum_principle() {
        let mut s = 12345_u64;
        let mut rho: Vec<f64> = (0..31)
            .map(|_| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((s >> 11) as f64) / (1u64 << 53) as f64
            })
            .collect();
        let lo = rho.iter().cloned().fold(f64::INFINITY, f64::min).min(0.3);
        let hi = rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.6);
        for _ in 0..50 {
            step_diffusion(&mut rho, 1.0, 0.0004, (0.3, 0.6)).unwrap();
            assert!(rho
                .iter()
                .all(|&r| r >= lo - 1e-12 && r <= hi + 1e-12));
        }
    }
}
