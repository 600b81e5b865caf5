//! Staggered spatial grid, wall data and the micro-macro state vector.
//!
//! Space is [0,1] with N interior nodes: dx = 1/(N+1), nodes x_i = i dx for
//! i = 0..N+1 and midpoints x_{i+1/2} = (i+1/2) dx for i = 0..N. Densities
//! rho and rhobar live on nodes, the fluctuation g on midpoints; the
//! layer-matched scheme additionally carries full-range unknowns g_0 and
//! g_{N+1} at the wall nodes. Every unknown is decomposed with the half
//! range V_-(x) of its own location.

use crate::error::{Error, Result};
use crate::vquad::{bracket_half, project_minus_complement, HalfRangeMask, VelocityGrid};
use nalgebra::DVector;
use std::io::Write as _;
use std::path::Path;

/// Node/midpoint layout on [0,1] for N interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    pub n: usize,
    pub dx: f64,
    /// x_i = i/(N+1), i = 0..N+1; both ends land on 0 and 1 exactly.
    pub nodes: Vec<f64>,
    /// x_{i+1/2} = (i+1/2)/(N+1), i = 0..N.
    pub midpoints: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!(
                "spatial grid needs at least 2 interior nodes, got {n}"
            )));
        }
        let den = (n + 1) as f64;
        // i/(N+1) rather than i*dx so that the last node is exactly 1
        let nodes = (0..=n + 1).map(|i| i as f64 / den).collect();
        let midpoints = (0..=n).map(|i| (i as f64 + 0.5) / den).collect();
        Ok(SpatialGrid {
            n,
            dx: 1.0 / den,
            nodes,
            midpoints,
        })
    }
}

/// Half-range masks for every node and midpoint of a spatial grid.
#[derive(Debug, Clone)]
pub struct StaggeredMasks {
    /// masks.node[i] belongs to x_i; node[0] and node[N+1] are the walls.
    pub node: Vec<HalfRangeMask>,
    /// masks.mid[i] belongs to x_{i+1/2}.
    pub mid: Vec<HalfRangeMask>,
}

impl StaggeredMasks {
    pub fn build(sgrid: &SpatialGrid, vgrid: &VelocityGrid) -> Result<Self> {
        let node = sgrid
            .nodes
            .iter()
            .map(|&x| HalfRangeMask::at(x, vgrid))
            .collect::<Result<Vec<_>>>()?;
        let mid = sgrid
            .midpoints
            .iter()
            .map(|&x| HalfRangeMask::at(x, vgrid))
            .collect::<Result<Vec<_>>>()?;
        Ok(StaggeredMasks { node, mid })
    }

    /// Wall mask at x = 0: V_- = {v > 0}.
    pub fn left(&self) -> &HalfRangeMask {
        &self.node[0]
    }

    /// Wall mask at x = 1: V_- = {v < 0}.
    pub fn right(&self) -> &HalfRangeMask {
        self.node.last().unwrap()
    }
}

/// Inflow data and its half-range moments at the two walls.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub f_left: DVector<f64>,
    pub f_right: DVector<f64>,
    /// <f_left>_{V_-(0)}; pinned into rhobar[0] at all times.
    pub rhobar_left: f64,
    pub rhobar_right: f64,
    /// 1_{V_-(0)} (f_left - rhobar_left E): the incoming trace of g at x=0.
    pub phi_left: DVector<f64>,
    pub phi_right: DVector<f64>,
}

impl BoundaryData {
    pub fn new(vgrid: &VelocityGrid, f_left: DVector<f64>, f_right: DVector<f64>) -> Result<Self> {
        let m = vgrid.len();
        if f_left.len() != m || f_right.len() != m {
            return Err(Error::invalid(
                "boundary data length does not match the velocity grid",
            ));
        }
        let mask0 = HalfRangeMask::at(0.0, vgrid)?;
        let mask1 = HalfRangeMask::at(1.0, vgrid)?;
        let rb_l = bracket_half(vgrid, &f_left, &mask0)?;
        let rb_r = bracket_half(vgrid, &f_right, &mask1)?;
        let mut phi_l = DVector::zeros(m);
        let mut phi_r = DVector::zeros(m);
        for k in 0..m {
            if mask0.minus[k] {
                phi_l[k] = f_left[k] - rb_l;
            }
            if mask1.minus[k] {
                phi_r[k] = f_right[k] - rb_r;
            }
        }
        Ok(BoundaryData {
            f_left,
            f_right,
            rhobar_left: rb_l,
            rhobar_right: rb_r,
            phi_left: phi_l,
            phi_right: phi_r,
        })
    }
}

/// Wall half-range averages of the two inflow profiles.
pub fn boundary_moments(
    f_left: &DVector<f64>,
    f_right: &DVector<f64>,
    vgrid: &VelocityGrid,
) -> Result<(f64, f64)> {
    let bd = BoundaryData::new(vgrid, f_left.clone(), f_right.clone())?;
    Ok((bd.rhobar_left, bd.rhobar_right))
}

/// Full unknown set of the micro-macro schemes at one time level.
#[derive(Debug, Clone)]
pub struct MMState {
    /// <f> at nodes 0..N+1. The naive scheme never updates the end entries.
    pub rho: Vec<f64>,
    /// <f>_{V_-(x_i)} at nodes; entries 0 and N+1 always equal the wall data.
    pub rhobar: Vec<f64>,
    /// fluctuation at midpoints 0..N, each with <g>_{V_-(x_{i+1/2})} = 0.
    pub g_mid: Vec<DVector<f64>>,
    /// full-range node unknowns of the layer-matched scheme.
    pub g_left: DVector<f64>,
    pub g_right: DVector<f64>,
    pub lambda_left: f64,
    pub lambda_right: f64,
    pub time: f64,
    pub epsilon: f64,
}

/// Discretizes f_init into the micro-macro unknowns at t = 0.
///
/// rhobar at the walls is pinned to the inflow moments immediately (the
/// schemes treat those entries as data); the multipliers start at zero.
pub fn init_state(
    f_init: &dyn Fn(f64, f64) -> f64,
    vgrid: &VelocityGrid,
    sgrid: &SpatialGrid,
    masks: &StaggeredMasks,
    bd: &BoundaryData,
    epsilon: f64,
) -> Result<MMState> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let m = vgrid.len();
    let sample = |x: f64| DVector::from_fn(m, |k, _| f_init(x, vgrid.nodes[k]));

    let mut rho = Vec::with_capacity(sgrid.n + 2);
    let mut rhobar = Vec::with_capacity(sgrid.n + 2);
    for (i, &x) in sgrid.nodes.iter().enumerate() {
        let f = sample(x);
        rho.push(vgrid.bracket(&f));
        rhobar.push(bracket_half(vgrid, &f, &masks.node[i])?);
    }
    rhobar[0] = bd.rhobar_left;
    rhobar[sgrid.n + 1] = bd.rhobar_right;

    let mut g_mid = Vec::with_capacity(sgrid.n + 1);
    for (i, &x) in sgrid.midpoints.iter().enumerate() {
        let f = sample(x);
        g_mid.push(project_minus_complement(vgrid, &f, &masks.mid[i])?);
    }

    let g_left = project_minus_complement(vgrid, &sample(0.0), masks.left())?;
    let g_right = project_minus_complement(vgrid, &sample(1.0), masks.right())?;

    Ok(MMState {
        rho,
        rhobar,
        g_mid,
        g_left,
        g_right,
        lambda_left: 0.0,
        lambda_right: 0.0,
        time: 0.0,
        epsilon,
    })
}

/// Writes the nodal state as CSV with columns x,rho,rhobar.
pub fn write_state_csv(path: &Path, sgrid: &SpatialGrid, state: &MMState) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x,rho,rhobar")?;
    for i in 0..sgrid.nodes.len() {
        writeln!(out, "{},{},{}", sgrid.nodes[i], state.rho[i], state.rhobar[i])?;
    }
    Ok(())
}
