//! Velocity grid, angular brackets and position-dependent half ranges.
//!
//! Velocities live on V = [-1,1] with the normalized measure dmu = dv/2, so
//! <1> = 1 and <v^2> = 1/3. All integrals in the crate are Gauss-Legendre
//! sums on a shared grid of even size M; even size keeps v = 0 off the grid
//! and makes the node set exactly symmetric, which the reflection arguments
//! at the right wall rely on.

use crate::error::{Error, Result};
use nalgebra::DVector;

/// Gauss-Legendre grid on [-1,1] carrying the dmu = dv/2 weights.
///
/// `nodes` are strictly increasing and symmetric: nodes[m-1-k] == -nodes[k]
/// bit for bit. `mu_weights` sum to 1 up to rounding. `equilibrium` is the
/// constant function E == 1 stored once so operator code can take linear
/// combinations without allocating.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    pub nodes: DVector<f64>,
    pub mu_weights: DVector<f64>,
    pub equilibrium: DVector<f64>,
}

/// Legendre P_m and its derivative at x by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let kf = k as f64;
        let pk = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = pk;
    }
    let dp = (m as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes and dv-weights of the M-point Gauss-Legendre rule on [-1,1].
///
/// Newton iteration from the Chebyshev-like initial guess; each positive
/// root is mirrored so the returned arrays are exactly symmetric.
pub(crate) fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    // roots come out in decreasing order of the guess index; fill both halves
    for i in 0..m / 2 {
        let mut xi = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, xi);
            dp = d;
            let dx = p / d;
            xi -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre(m, xi);
                dp = d2;
                xi -= p2 / d2;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - xi * xi) * dp * dp);
        // guess index 0 is the largest root
        x[m - 1 - i] = xi;
        w[m - 1 - i] = wi;
        x[i] = -xi;
        w[i] = wi;
    }
    (x, w)
}

/// Builds the shared velocity grid with dmu weights (Gauss weights / 2).
///
/// M must be even and at least 2: even keeps 0 off the grid so every node
/// has a definite sign, and the pairs (v, -v) match exactly.
pub fn gauss_grid(m: usize) -> Result<VelocityGrid> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::invalid(format!(
            "velocity grid size must be even and >= 2, got {m}"
        )));
    }
    let (x, w) = gauss_legendre(m);
    let nodes = DVector::from_vec(x);
    let mu_weights = DVector::from_vec(w) * 0.5;
    let equilibrium = DVector::from_element(m, 1.0);
    Ok(VelocityGrid {
        nodes,
        mu_weights,
        equilibrium,
    })
}

impl VelocityGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Full bracket <h> = Integral h dmu.
    pub fn bracket(&self, h: &DVector<f64>) -> f64 {
        self.mu_weights.dot(h)
    }

    /// <v h>, the flux moment.
    pub fn flux_bracket(&self, h: &DVector<f64>) -> f64 {
        let mut s = 0.0;
        for k in 0..self.len() {
            s += self.mu_weights[k] * self.nodes[k] * h[k];
        }
        s
    }
}

/// Sign function selecting the incoming half range.
///
/// omega(x,v) = (2x-1) v - x(1-x). V_-(x) = { omega < 0 }; ties go to V_+.
/// At the walls this reduces to the physical incoming sets: V_-(0) = {v > 0},
/// V_-(1) = {v < 0}; at x = 1/2 all of V is in V_-.
pub fn omega(x: f64, v: f64) -> f64 {
    (2.0 * x - 1.0) * v - x * (1.0 - x)
}

/// Membership table of V_-(x) on the grid, tagged with its location.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfRangeMask {
    pub minus: Vec<bool>,
    pub location: f64,
}

impl HalfRangeMask {
    /// Evaluates omega(x, v_k) < 0 at every node. x must lie in [0,1].
    pub fn at(x: f64, grid: &VelocityGrid) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid(format!(
                "half-range location must lie in [0,1], got {x}"
            )));
        }
        let minus = grid.nodes.iter().map(|&v| omega(x, v) < 0.0).collect();
        Ok(HalfRangeMask { minus, location: x })
    }

    pub fn count_minus(&self) -> usize {
        self.minus.iter().filter(|&&b| b).count()
    }

    /// Indices of V_+ nodes, in increasing node order.
    pub fn plus_indices(&self) -> Vec<usize> {
        (0..self.minus.len()).filter(|&k| !self.minus[k]).collect()
    }
}

/// Half-range average <h>_{V_-(x)} = Integral_{V_-} h dmu / Integral_{V_-} dmu.
///
/// Errors if the discrete minus set is empty (cannot happen for x in [0,1]
/// with an even grid, but the guard keeps the contract honest).
pub fn bracket_half(grid: &VelocityGrid, h: &DVector<f64>, mask: &HalfRangeMask) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..grid.len() {
        if mask.minus[k] {
            num += grid.mu_weights[k] * h[k];
            den += grid.mu_weights[k];
        }
    }
    if den <= 0.0 {
        return Err(Error::numerical(format!(
            "empty half range V_- at x = {}",
            mask.location
        )));
    }
    Ok(num / den)
}

/// Half-range projector Pi_{V_-} h = <h>_{V_-(x)} E (a constant function).
pub fn project_minus(
    grid: &VelocityGrid,
    h: &DVector<f64>,
    mask: &HalfRangeMask,
) -> Result<DVector<f64>> {
    let mean = bracket_half(grid, h, mask)?;
    Ok(&grid.equilibrium * mean)
}

/// Complement projection (I - Pi_{V_-}) h; its V_- average vanishes.
pub fn project_minus_complement(
    grid: &VelocityGrid,
    h: &DVector<f64>,
    mask: &HalfRangeMask,
) -> Result<DVector<f64>> {
    let mean = bracket_half(grid, h, mask)?;
    Ok(h - &grid.equilibrium * mean)
}
