//! Micro-macro scheme with matched boundary unknowns at the walls.
//!
//! On top of the midpoint fluctuations this scheme carries one full-range
//! unknown g at each wall node. Its incoming half is pinned to the data
//! trace phi; its outgoing half solves the stationary half-range equation
//! driven by the neighbouring midpoints; the remaining scalar freedom, a
//! multiple lambda of the half-range solution of (I - Pi)(v E), is fixed by
//! discrete flux balance across the wall. The wall density is then
//! rho(wall) = rhobar(wall) + <g(wall)>, which tracks the kinetic boundary
//! layer instead of the naive half-range average.
//!
//! The eps -> 0 fixed point of the wall construction is computed directly
//! by [`limit_values`] and column-by-column by [`limit_kernel_lme`].

use crate::chandrasekhar::{KernelKind, KernelTable};
use crate::collision::{CollisionOperator, HalfRangeSolver, RegularizedSolver};
use crate::error::{Error, Result};
use crate::grid_state::{BoundaryData, MMState, SpatialGrid, StaggeredMasks};
use crate::vquad::{bracket_half, project_minus_complement, HalfRangeMask};
use nalgebra::{DMatrix, DVector};

/// Factorizations shared by every step at a fixed (eps, dt).
pub struct LmeWorkspace {
    pub eps: f64,
    pub dt: f64,
    /// stiffness parameter eps^2/dt of the implicit collision solves
    pub alpha: f64,
    mid_solvers: Vec<RegularizedSolver>,
    lt_left: DMatrix<f64>,
    lt_right: DMatrix<f64>,
    half_left: HalfRangeSolver,
    half_right: HalfRangeSolver,
    /// half-range responses to (I - Pi_-)(v E); the flux-balance direction
    b_left: DVector<f64>,
    b_right: DVector<f64>,
}

impl LmeWorkspace {
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
        if dt > sgrid.dx * sgrid.dx + eps * sgrid.dx {
            eprintln!(
                "warning: dt = {dt:.3e} exceeds the transport-diffusion scale {:.3e}; \
                 the micro-macro step may lose accuracy",
                sgrid.dx * sgrid.dx + eps * sgrid.dx
            );
        }
        let alpha = eps * eps / dt;
        let mid_solvers = masks
            .mid
            .iter()
            .map(|mask| RegularizedSolver::new(alpha, &op.assemble_ltilde(mask)))
            .collect::<Result<Vec<_>>>()?;
        let lt_left = op.assemble_ltilde(masks.left());
        let lt_right = op.assemble_ltilde(masks.right());
        let half_left = HalfRangeSolver::new(alpha, &lt_left, masks.left())?;
        let half_right = HalfRangeSolver::new(alpha, &lt_right, masks.right())?;
        let v = op.grid.nodes.clone();
        let b_left = half_left.solve(&project_minus_complement(&op.grid, &v, masks.left())?)?;
        let b_right = half_right.solve(&project_minus_complement(&op.grid, &v, masks.right())?)?;
        Ok(LmeWorkspace {
            eps,
            dt,
            alpha,
            mid_solvers,
            lt_left,
            lt_right,
            half_left,
            half_right,
            b_left,
            b_right,
        })
    }
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

/// Solves the wall-node update: pins the incoming half to phi, solves the
/// outgoing half implicitly, and fixes the flux-balance multiplier lambda.
#[allow(clippy::too_many_arguments)]
fn wall_solve(
    op: &CollisionOperator,
    side: Side,
    mask: &HalfRangeMask,
    half: &HalfRangeSolver,
    lt: &DMatrix<f64>,
    b: &DVector<f64>,
    phi: &DVector<f64>,
    ws: &LmeWorkspace,
    dx: f64,
    g_node_old: &DVector<f64>,
    g_mid_old: &DVector<f64>,
    g_mid_new: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let m = op.len();
    let v = &op.grid.nodes;
    let trans_arg = DVector::from_fn(m, |k, _| match side {
        Side::Left => v[k] * (g_mid_old[k] - g_node_old[k]),
        Side::Right => v[k] * (g_node_old[k] - g_mid_old[k]),
    });
    let mut trans = project_minus_complement(&op.grid, &trans_arg, mask)?;
    trans *= 2.0 * ws.eps / dx;

    let mut rhs_full = lt * phi;
    rhs_full.axpy(ws.alpha, g_node_old, 1.0);
    rhs_full -= &trans;
    // phi vanishes on V_+ and the half-range solution on V_-, so the sum
    // is the pinned-incoming, solved-outgoing wall vector
    let q = phi + half.solve(&rhs_full)?;

    let c = 2.0 / (ws.eps * dx);
    let wb = op.grid.bracket(b);
    let wvb = op.grid.flux_bracket(b);
    let dq = &q - g_node_old;
    let (d_coef, r_coef) = match side {
        Side::Left => (
            -wb / ws.dt + c * wvb,
            op.grid.bracket(&dq) / ws.dt
                + c * (op.grid.flux_bracket(g_mid_new) - op.grid.flux_bracket(&q)),
        ),
        Side::Right => (
            -wb / ws.dt - c * wvb,
            op.grid.bracket(&dq) / ws.dt
                + c * (op.grid.flux_bracket(&q) - op.grid.flux_bracket(g_mid_new)),
        ),
    };
    if d_coef.abs() < 1e-14 {
        return Err(Error::numerical(
            "flux-balance closure at the wall is singular",
        ));
    }
    let lam = -r_coef / d_coef;
    if !lam.is_finite() {
        return Err(Error::numerical(
            "flux-balance multiplier is not finite",
        ));
    }
    let mut g_new = q;
    g_new.axpy(-lam, b, 1.0);
    Ok((g_new, lam))
}

/// Advances the state by one matched micro-macro step.
pub fn step_lme(
    state: &mut MMState,
    op: &CollisionOperator,
    sgrid: &SpatialGrid,
    masks: &StaggeredMasks,
    bd: &BoundaryData,
    ws: &LmeWorkspace,
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
    if state.g_mid.len() != n + 1 || state.rho.len() != n + 2 || state.g_left.len() != m {
        return Err(Error::invalid("state shape does not match the grid"));
    }
    let v = &op.grid.nodes;
    let rb = |i: usize| -> f64 {
        if i == 0 {
            bd.rhobar_left
        } else if i == n + 1 {
            bd.rhobar_right
        } else {
            state.rhobar[i]
        }
    };
    let drb: Vec<f64> = (0..=n).map(|i| rb(i + 1) - rb(i)).collect();

    // wall-adjacent midpoints: centered slope between the wall node and the
    // averaged next node, all other midpoints upwind inside the interior
    let mut g_new: Vec<DVector<f64>> = vec![DVector::zeros(0); n + 1];
    {
        let g1n = (&state.g_mid[0] + &state.g_mid[1]) * 0.5;
        let src = DVector::from_fn(m, |k, _| {
            v[k] * (g1n[k] - state.g_left[k]) + v[k] * drb[0]
        });
        let p = project_minus_complement(&op.grid, &src, &masks.mid[0])?;
        let mut rhs = state.g_mid[0].clone() * ws.alpha;
        rhs.axpy(-eps / dx, &p, 1.0);
        g_new[0] = ws.mid_solvers[0].solve(&rhs)?;
    }
    {
        let gnn = (&state.g_mid[n - 1] + &state.g_mid[n]) * 0.5;
        let src = DVector::from_fn(m, |k, _| {
            v[k] * (state.g_right[k] - gnn[k]) + v[k] * drb[n]
        });
        let p = project_minus_complement(&op.grid, &src, &masks.mid[n])?;
        let mut rhs = state.g_mid[n].clone() * ws.alpha;
        rhs.axpy(-eps / dx, &p, 1.0);
        g_new[n] = ws.mid_solvers[n].solve(&rhs)?;
    }

    let (g_left_new, lam_l) = wall_solve(
        op,
        Side::Left,
        masks.left(),
        &ws.half_left,
        &ws.lt_left,
        &ws.b_left,
        &bd.phi_left,
        ws,
        dx,
        &state.g_left,
        &state.g_mid[0],
        &g_new[0],
    )?;
    let (g_right_new, lam_r) = wall_solve(
        op,
        Side::Right,
        masks.right(),
        &ws.half_right,
        &ws.lt_right,
        &ws.b_right,
        &bd.phi_right,
        ws,
        dx,
        &state.g_right,
        &state.g_mid[n],
        &g_new[n],
    )?;

    for i in 1..n {
        let mut src = DVector::zeros(m);
        for k in 0..m {
            let vk = v[k];
            let upw = if vk > 0.0 {
                vk * (state.g_mid[i][k] - state.g_mid[i - 1][k])
            } else {
                vk * (state.g_mid[i + 1][k] - state.g_mid[i][k])
            };
            src[k] = (upw + vk * drb[i]) / dx;
        }
        let p = project_minus_complement(&op.grid, &src, &masks.mid[i])?;
        let mut rhs = state.g_mid[i].clone() * ws.alpha;
        rhs.axpy(-eps, &p, 1.0);
        g_new[i] = ws.mid_solvers[i].solve(&rhs)?;
    }
    for (i, g) in g_new.iter().enumerate() {
        if !g.iter().all(|x| x.is_finite()) {
            return Err(Error::numerical(format!(
                "micro solve produced non-finite values at midpoint {i}"
            )));
        }
    }

    // wall densities from the matched nodes, interior from flux balance
    state.rho[0] = bd.rhobar_left + op.grid.bracket(&g_left_new);
    state.rho[n + 1] = bd.rhobar_right + op.grid.bracket(&g_right_new);
    let flux: Vec<f64> = g_new.iter().map(|g| op.grid.flux_bracket(g)).collect();
    let gmean: Vec<f64> = g_new.iter().map(|g| op.grid.bracket(g)).collect();
    let c = ws.dt / (eps * dx);
    for i in 1..=n {
        state.rho[i] -= c * (flux[i] - flux[i - 1]);
        state.rhobar[i] = state.rho[i] - 0.5 * (gmean[i] + gmean[i - 1]);
    }
    state.rhobar[0] = bd.rhobar_left;
    state.rhobar[n + 1] = bd.rhobar_right;
    state.g_mid = g_new;
    state.g_left = g_left_new;
    state.g_right = g_right_new;
    state.lambda_left = lam_l;
    state.lambda_right = lam_r;
    state.time += ws.dt;
    Ok(())
}

/// Limit wall state of the matched scheme for one incoming trace.
#[derive(Clone, Copy, Debug)]
pub struct LimitBoundary {
    /// flux-balance multiplier of the limiting wall problem
    pub lambda: f64,
    /// limiting wall density rhobar + <g>
    pub rho_hat: f64,
}

/// Both walls at once; the right wall reuses the left-oriented solve on the
/// velocity-reflected data, which is exact because the quadrature nodes are
/// symmetric and sigma is reflection invariant.
pub fn limit_values(op: &CollisionOperator, bd: &BoundaryData) -> Result<(LimitBoundary, LimitBoundary)> {
    if !op.sigma.is_reflection_symmetric() {
        return Err(Error::invalid(
            "right-wall reflection needs sigma(-v,-w) = sigma(v,w)",
        ));
    }
    let m = op.len();
    let mask0 = HalfRangeMask::at(0.0, &op.grid)?;
    let left = limit_boundary(op, &mask0, &bd.f_left)?;
    let fr_ref = DVector::from_fn(m, |k, _| bd.f_right[m - 1 - k]);
    let refl = limit_boundary(op, &mask0, &fr_ref)?;
    let right = LimitBoundary {
        lambda: -refl.lambda,
        rho_hat: refl.rho_hat,
    };
    Ok((left, right))
}

/// Flux-balance multiplier of the limiting wall problem alone.
///
/// `rhobar_b` must be the V_- average of `f_in` under `mask`; it is taken
/// as an argument because every caller already has it.
pub fn limit_lambda(
    op: &CollisionOperator,
    mask: &HalfRangeMask,
    f_in: &DVector<f64>,
    rhobar_b: f64,
) -> Result<f64> {
    Ok(limit_boundary_with(op, mask, f_in, rhobar_b)?.lambda)
}

/// Left-oriented limit wall solve with rhobar derived from the data.
pub fn limit_boundary(
    op: &CollisionOperator,
    mask: &HalfRangeMask,
    f_in: &DVector<f64>,
) -> Result<LimitBoundary> {
    let rb = bracket_half(&op.grid, f_in, mask)?;
    limit_boundary_with(op, mask, f_in, rb)
}

/// Data-independent pieces of the limit wall problem, shared across the
/// per-velocity kernel loop where rebuilding them per basis vector would
/// dominate the cost.
struct LimitSolve {
    lt: DMatrix<f64>,
    half: HalfRangeSolver,
    yb: DVector<f64>,
    den: f64,
}

impl LimitSolve {
    fn new(op: &CollisionOperator, mask: &HalfRangeMask) -> Result<Self> {
        let m = op.len();
        let v = &op.grid.nodes;
        let w = &op.grid.mu_weights;
        let lt = op.assemble_ltilde(mask);
        let half = HalfRangeSolver::new(0.0, &lt, mask)?;
        // the limit problem inverts the V_+ restriction of Ltilde itself;
        // the shared solver factors (alpha I - Ltilde), which at alpha = 0
        // is its negative, hence the sign flips on this and the y1 solve
        let pve = project_minus_complement(&op.grid, &v.clone_owned(), mask)?;
        let mut yb = half.solve(&pve)?;
        yb.neg_mut();
        let mut den = 0.0;
        for k in 0..m {
            if !mask.minus[k] {
                den += w[k] * v[k] * yb[k];
            }
        }
        if den.abs() < 1e-14 {
            return Err(Error::numerical(
                "limit flux-balance closure is singular",
            ));
        }
        Ok(LimitSolve { lt, half, yb, den })
    }

    fn boundary(
        &self,
        op: &CollisionOperator,
        mask: &HalfRangeMask,
        f_in: &DVector<f64>,
        rb: f64,
    ) -> Result<LimitBoundary> {
        let m = op.len();
        let v = &op.grid.nodes;
        let w = &op.grid.mu_weights;
        let phi = DVector::from_fn(m, |k, _| if mask.minus[k] { f_in[k] - rb } else { 0.0 });
        let mut y1 = self.half.solve(&(&self.lt * &phi))?;
        y1.neg_mut();

        let mut num = 0.0;
        for k in 0..m {
            if mask.minus[k] {
                num -= w[k] * v[k] * phi[k];
            } else {
                num += w[k] * v[k] * y1[k];
            }
        }
        let lambda = num / self.den;
        let mut g0p = self.yb.clone() * lambda;
        g0p -= &y1;

        // rho_hat = rb - (1/kappa) <v Lplus (I - Pi)(v g)> for the full wall
        // trace g = phi + g0p, split exactly as the two linear terms
        let term = |h: &DVector<f64>| -> Result<f64> {
            let mean = op.grid.bracket(h);
            let z = DVector::from_fn(m, |k, _| h[k] - mean);
            let u = op.pseudo_inverse_apply(&z)?;
            Ok(op.grid.flux_bracket(&u))
        };
        let vphi = DVector::from_fn(m, |k, _| v[k] * phi[k]);
        let vg0p = DVector::from_fn(m, |k, _| v[k] * g0p[k]);
        let rho_hat = rb - (term(&vphi)? + term(&vg0p)?) / op.kappa;
        Ok(LimitBoundary { lambda, rho_hat })
    }
}

fn limit_boundary_with(
    op: &CollisionOperator,
    mask: &HalfRangeMask,
    f_in: &DVector<f64>,
    rb: f64,
) -> Result<LimitBoundary> {
    LimitSolve::new(op, mask)?.boundary(op, mask, f_in, rb)
}

/// Discrete eps -> 0 boundary kernel of the matched scheme: the limit wall
/// density of each incoming basis datum e_k, divided by its dv weight.
pub fn limit_kernel_lme(op: &CollisionOperator) -> Result<KernelTable> {
    let m = op.len();
    let v = &op.grid.nodes;
    let w = &op.grid.mu_weights;
    let mask0 = HalfRangeMask::at(0.0, &op.grid)?;
    let solve = LimitSolve::new(op, &mask0)?;
    let mut nodes = Vec::with_capacity(m / 2);
    let mut weights = Vec::with_capacity(m / 2);
    let mut samples = Vec::with_capacity(m / 2);
    for k in 0..m {
        if !mask0.minus[k] {
            continue;
        }
        let e_k = DVector::from_fn(m, |j, _| if j == k { 1.0 } else { 0.0 });
        let rb = bracket_half(&op.grid, &e_k, &mask0)?;
        let lb = solve.boundary(op, &mask0, &e_k, rb)?;
        nodes.push(v[k]);
        weights.push(2.0 * w[k]);
        samples.push(lb.rho_hat / (2.0 * w[k]));
    }
    KernelTable::from_samples(KernelKind::KLimitLme, nodes, weights, samples, None)
}

/// Diffusion-consistent wall density from the current wall fluctuation:
/// rhobar_b - (1/kappa) <v Lplus (I - Pi)(v g_b)>. The same expression
/// serves both walls.
pub fn reconstruct_boundary_value(
    op: &CollisionOperator,
    rhobar_b: f64,
    g_node: &DVector<f64>,
) -> Result<f64> {
    let m = op.len();
    let v = &op.grid.nodes;
    let vg = DVector::from_fn(m, |k, _| v[k] * g_node[k]);
    let mean = op.grid.bracket(&vg);
    let z = DVector::from_fn(m, |k, _| vg[k] - mean);
    let u = op.pseudo_inverse_apply(&z)?;
    Ok(rhobar_b - op.grid.flux_bracket(&u) / op.kappa)
}
