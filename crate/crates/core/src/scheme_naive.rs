//! Micro-macro scheme that leaves the boundary layer to the spatial grid.
//!
//! One step advances, in order: the fluctuation g at every midpoint by an
//! implicit collision solve with upwinded transport, then the density rho
//! at interior nodes by the conservative flux difference, then rhobar by
//! the midpoint-average identity. Incoming data enters through ghost
//! midpoints mirrored across the wall; outgoing ghost entries are never
//! read (they are poisoned with NaN so that any masking bug surfaces as a
//! hard error instead of a silently wrong profile).
//!
//! The scheme needs no wall unknowns, which is exactly why its eps -> 0
//! boundary values are wrong: they converge to the half-range average of
//! the data instead of the kernel-weighted value. [`limit_kernel_naive`]
//! tabulates the kernel the scheme actually converges to.

use crate::chandrasekhar::{KernelKind, KernelTable};
use crate::collision::{CollisionOperator, RegularizedSolver};
use crate::error::{Error, Result};
use crate::grid_state::{BoundaryData, MMState, SpatialGrid, StaggeredMasks};
use crate::vquad::bracket_half;
use nalgebra::DVector;

/// Factorizations shared by every step at a fixed (eps, dt).
pub struct NaiveWorkspace {
    pub eps: f64,
    pub dt: f64,
    /// stiffness parameter eps^2/dt of the implicit collision solves
    pub alpha: f64,
    solvers: Vec<RegularizedSolver>,
}

impl NaiveWorkspace {
    pub fn new(
        op: &CollisionOperator,
        sgrid: &SpatialGrid,
        masks: &StaggeredMasks,
        eps: f64,
        dt: f64,
    ) -> Result<Self> {
        if !(eps > 0.0) || !(dt > 0.0) {
            return Err(Error::invalid(format!(
                "workspace needs eps > 0 and dt > 0, got eps = {eps}, dt = {dt}"
            )));
        }
        // parabolic scale check; the step still runs when violated
        if dt > sgrid.dx * sgrid.dx + eps * sgrid.dx {
            eprintln!(
                "warning: dt = {dt:.3e} exceeds the transport-diffusion scale {:.3e}; \
                 the micro-macro step may lose accuracy",
                sgrid.dx * sgrid.dx + eps * sgrid.dx
            );
        }
        let alpha = eps * eps / dt;
        let solvers = masks
            .mid
            .iter()
            .map(|mask| RegularizedSolver::new(alpha, &op.assemble_ltilde(mask)))
            .collect::<Result<Vec<_>>>()?;
        Ok(NaiveWorkspace {
            eps,
            dt,
            alpha,
            solvers,
        })
    }
}

/// Time step dt = (dx^2/2 + eps dx)/2 used by both micro-macro schemes.
pub fn dt_rule(dx: f64, eps: f64) -> f64 {
    0.5 * (dx * dx / 2.0 + eps * dx)
}

/// Advances the state by one naive micro-macro step.
pub fn step_naive(
    state: &mut MMState,
    op: &CollisionOperator,
    sgrid: &SpatialGrid,
    masks: &StaggeredMasks,
    bd: &BoundaryData,
    ws: &NaiveWorkspace,
) -> Result<()> {
    let n = sgrid.n;
    let m = op.len();
    let dx = sgrid.dx;
    let eps = ws.eps;
    if state.epsilon != eps {
        return Err(Error::invalid(format!(
            "state eps = {} does not match workspace eps = {eps}",
            state.epsilon
        )));
    }
    if state.g_mid.len() != n + 1 || state.rho.len() != n + 2 {
        return Err(Error::invalid("state shape does not match the grid"));
    }
    let v = &op.grid.nodes;
    let mask0 = masks.left();
    let mask1 = masks.right();

    // ghost midpoints across each wall carry the incoming data by linear
    // reflection; outgoing entries stay NaN and must never be read
    let mut ghost_l = DVector::from_element(m, f64::NAN);
    let mut ghost_r = DVector::from_element(m, f64::NAN);
    for k in 0..m {
        if mask0.minus[k] {
            ghost_l[k] = 2.0 * bd.phi_left[k] - state.g_mid[0][k];
        }
        if mask1.minus[k] {
            ghost_r[k] = 2.0 * bd.phi_right[k] - state.g_mid[n][k];
        }
    }
    let rb = |i: usize| -> f64 {
        if i == 0 {
            bd.rhobar_left
        } else if i == n + 1 {
            bd.rhobar_right
        } else {
            state.rhobar[i]
        }
    };

    let mut g_new: Vec<DVector<f64>> = Vec::with_capacity(n + 1);
    let mut src = DVector::zeros(m);
    for i in 0..=n {
        let drb = (rb(i + 1) - rb(i)) / dx;
        for k in 0..m {
            let vk = v[k];
            let adv = if vk > 0.0 {
                let prev = if i == 0 { ghost_l[k] } else { state.g_mid[i - 1][k] };
                vk * (state.g_mid[i][k] - prev) / dx
            } else {
                let next = if i == n { ghost_r[k] } else { state.g_mid[i + 1][k] };
                vk * (next - state.g_mid[i][k]) / dx
            };
            src[k] = adv + vk * drb;
            if !src[k].is_finite() {
                return Err(Error::numerical(format!(
                    "transport term read a poisoned ghost entry at midpoint {i}, node {k}"
                )));
            }
        }
        let mean = bracket_half(&op.grid, &src, &masks.mid[i])?;
        let rhs = DVector::from_fn(m, |k, _| {
            ws.alpha * state.g_mid[i][k] - eps * (src[k] - mean)
        });
        let gi = ws.solvers[i].solve(&rhs)?;
        if !gi.iter().all(|x| x.is_finite()) {
            return Err(Error::numerical(format!(
                "micro solve produced non-finite values at midpoint {i}"
            )));
        }
        g_new.push(gi);
    }

    // conservative macro update on interior nodes; walls stay untouched
    let flux: Vec<f64> = g_new.iter().map(|g| op.grid.flux_bracket(g)).collect();
    let gmean: Vec<f64> = g_new.iter().map(|g| op.grid.bracket(g)).collect();
    let c = ws.dt / (eps * dx);
    for i in 1..=n {
        state.rho[i] -= c * (flux[i] - flux[i - 1]);
        state.rhobar[i] = state.rho[i] - 0.5 * (gmean[i] + gmean[i - 1]);
    }
    state.g_mid = g_new;
    state.time += ws.dt;
    Ok(())
}

/// Discrete eps -> 0 boundary kernel of the naive scheme.
///
/// Superposition over incoming basis data f = e_k, v_k > 0: the scheme's
/// limit wall density is rho(0) = -(2/kappa) <v L^+((I - Pi)(v^+ f))>;
/// dividing by the node's dv weight 2 w_k gives the kernel sample.
pub fn limit_kernel_naive(op: &CollisionOperator) -> Result<KernelTable> {
    let m = op.len();
    let v = &op.grid.nodes;
    let w = &op.grid.mu_weights;
    let mut nodes = Vec::with_capacity(m / 2);
    let mut weights = Vec::with_capacity(m / 2);
    let mut samples = Vec::with_capacity(m / 2);
    for k in 0..m {
        if v[k] <= 0.0 {
            continue;
        }
        let mut h = DVector::zeros(m);
        h[k] = v[k];
        let mean = op.grid.bracket(&h);
        for j in 0..m {
            h[j] -= mean;
        }
        let u = op.pseudo_inverse_apply(&h)?;
        let val = -(2.0 / op.kappa) * op.grid.flux_bracket(&u);
        nodes.push(v[k]);
        weights.push(2.0 * w[k]);
        samples.push(val / (2.0 * w[k]));
    }
    KernelTable::from_samples(KernelKind::KLimitNaive, nodes, weights, samples, None)
}

/// Limit wall densities of the naive scheme for the given inflow data,
/// right wall via the exact node reflection of the symmetric grid.
pub fn limit_boundary_values_naive(op: &CollisionOperator, bd: &BoundaryData) -> Result<(f64, f64)> {
    let m = op.len();
    let v = &op.grid.nodes;
    let value = |f: &DVector<f64>| -> Result<f64> {
        let mut h = DVector::zeros(m);
        for k in 0..m {
            if v[k] > 0.0 {
                h[k] = v[k] * f[k];
            }
        }
        let mean = op.grid.bracket(&h);
        for k in 0..m {
            h[k] -= mean;
        }
        let u = op.pseudo_inverse_apply(&h)?;
        Ok(-(2.0 / op.kappa) * op.grid.flux_bracket(&u))
    };
    let left = value(&bd.f_left)?;
    let fr_ref = DVector::from_fn(m, |k, _| bd.f_right[m - 1 - k]);
    let right = value(&fr_ref)?;
    Ok((left, right))
}
