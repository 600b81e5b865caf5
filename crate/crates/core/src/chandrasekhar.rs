//! H-functions and the diffusion-limit boundary kernels.
//!
//! For isotropic scattering the limit boundary density carries the kernel
//! K0(v) = (sqrt(3)/2) v H(v) built from the Chandrasekhar H-function,
//! the fixed point of
//!
//! ```text
//! H(v) = 1 + (v H(v) / (2 alpha)) Integral_0^1 p(w)^2 H(w) / (v p(w) + w p(v)) dw,
//! ```
//!
//! with alpha = Integral_0^1 p dv (p == 1 and alpha = 1 in the isotropic
//! case). Multiplicative cross sections sigma = p(v)p(w) get the scaled
//! kernel Ksigma = v H / (2 sqrt(alpha gamma)) and a rational surrogate
//! Kapp = a v^2/p + b v + c p + d. Three polynomial stand-ins K1..K3 of the
//! isotropic kernel are tabulated alongside.
//!
//! Each profile family gets the quadrature its singularities demand:
//! - p == 1: plain Gauss on (0,1); every integrand is smooth.
//! - p = |v|^q, q > 1: H blows up like v^(-1/2) at 0. Substituting v = s^2
//!   makes all integrands smooth in s, so Gauss in s is exponentially
//!   accurate and the moment identities hold to machine precision.
//! - p = (1-v^2)^q, q < 0: p is steep at the grazing end; tanh-sinh nodes
//!   with 1-v tracked separately resolve it without cancellation.
//!
//! The iteration rescales each Picard sweep to enforce the exact moment
//! identity Integral p H dv = 2 alpha. With alpha taken as the solve grid's
//! own discrete moment, the rescaled map has the plain fixed point (the
//! rescale factor converges to 1), and the rescaling removes the neutral
//! direction that makes plain Picard stall near its double root.

use crate::collision::{CrossSection, Profile};
use crate::error::{Error, Result};
use crate::vquad::gauss_legendre;
use nalgebra::{DMatrix, DVector};
use std::io::Write as _;
use std::path::Path;

/// Sup-change threshold between rescaled sweeps.
const PICARD_TOL: f64 = 1e-13;
/// Iteration cap before declaring non-convergence.
const PICARD_CAP: usize = 100_000;
/// Residual contract on the returned fixed point.
const RESIDUAL_TOL: f64 = 1e-12;
/// Dedicated kernel report grid size.
const REPORT_NODES: usize = 64;
/// tanh-sinh half count and span: nodes j = -160..160, t = 3.7 j / 160.
const TS_HALF: usize = 160;
const TS_SPAN: f64 = 4.6;

/// Quadrature rule for Integral_0^1 f(v) dv with 1-v carried separately.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfUnitQuad {
    pub nodes: Vec<f64>,
    /// plain dv weights (not the dmu = dv/2 convention of the solver grid)
    pub weights: Vec<f64>,
    /// 1 - nodes[k] computed without cancellation
    pub one_minus: Vec<f64>,
}

impl HalfUnitQuad {
    /// Gauss-Legendre mapped to (0,1).
    pub fn gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let nodes: Vec<f64> = x.iter().map(|&xi| 0.5 * (1.0 + xi)).collect();
        let one_minus = x.iter().map(|&xi| 0.5 * (1.0 - xi)).collect();
        let weights = w.iter().map(|&wi| 0.5 * wi).collect();
        HalfUnitQuad {
            nodes,
            weights,
            one_minus,
        }
    }

    /// Gauss in s with v = s^2: dv = 2 s ds, clustering nodes at v = 0.
    pub fn gauss_sqrt(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut one_minus = Vec::with_capacity(n);
        for k in 0..n {
            let s = 0.5 * (1.0 + x[k]);
            let oms = 0.5 * (1.0 - x[k]);
            nodes.push(s * s);
            weights.push(2.0 * s * (0.5 * w[k]));
            one_minus.push(oms * (1.0 + s)); // 1 - s^2 = (1-s)(1+s)
        }
        HalfUnitQuad {
            nodes,
            weights,
            one_minus,
        }
    }

    /// tanh-sinh rule on (0,1): x(t) = 1/(1+exp(-pi sinh t)) up to the
    /// doubling convention below; resolves endpoint singularities.
    pub fn tanh_sinh(half: usize, span: f64) -> Self {
        let n = 2 * half + 1;
        let h = span / half as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut one_minus = Vec::with_capacity(n);
        for j in -(half as i64)..=(half as i64) {
            let t = j as f64 * h;
            let u = std::f64::consts::FRAC_PI_2 * t.sinh();
            let x = 1.0 / (1.0 + (-2.0 * u).exp());
            let omx = 1.0 / (1.0 + (2.0 * u).exp());
            let w = h * std::f64::consts::FRAC_PI_2 * t.cosh() * 2.0 * x * omx;
            nodes.push(x);
            weights.push(w);
            one_minus.push(omx);
        }
        HalfUnitQuad {
            nodes,
            weights,
            one_minus,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        (0..self.len()).map(|k| self.weights[k] * f(self.nodes[k])).sum()
    }
}

/// Either p == 1 or a profile; lets constant cross sections reuse the
/// general machinery (they reduce to it exactly).
#[derive(Debug, Clone, Copy)]
enum PFun {
    One,
    Prof(Profile),
}

impl PFun {
    fn eval01(&self, x: f64, one_minus_x: f64) -> f64 {
        match self {
            PFun::One => 1.0,
            PFun::Prof(p) => p.eval01(x, one_minus_x),
        }
    }

    fn for_sigma(sigma: &CrossSection) -> Result<PFun> {
        match sigma {
            CrossSection::Constant => Ok(PFun::One),
            CrossSection::Multiplicative { p } => Ok(PFun::Prof(*p)),
            CrossSection::Pairwise { .. } => Err(Error::invalid(
                "pairwise cross sections have no factor profile; no exact boundary kernel is tabulated",
            )),
        }
    }

    /// Quadrature matched to the profile's singularity structure.
    fn route(&self) -> HalfUnitQuad {
        match self {
            PFun::One => HalfUnitQuad::gauss(REPORT_NODES),
            PFun::Prof(Profile::AbsPow { .. }) => HalfUnitQuad::gauss_sqrt(REPORT_NODES),
            PFun::Prof(Profile::OneMinusV2Pow { .. }) => {
                HalfUnitQuad::tanh_sinh(TS_HALF, TS_SPAN)
            }
        }
    }
}

/// Converged H-function on its solve grid.
#[derive(Debug, Clone)]
pub struct HFunction {
    pub quad: HalfUnitQuad,
    pub values: Vec<f64>,
    /// sup norm of H - T(H) over the solve grid
    pub residual: f64,
    pub iterations: usize,
    /// discrete alpha = sum(w p) of the solve grid
    pub alpha: f64,
    p_values: Vec<f64>,
}

fn picard_solve(quad: HalfUnitQuad, p_values: Vec<f64>) -> Result<HFunction> {
    let n = quad.len();
    let v = &quad.nodes;
    let w = &quad.weights;
    let p = &p_values;
    let alpha: f64 = (0..n).map(|k| w[k] * p[k]).sum();
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::numerical(format!(
            "profile moment alpha = {alpha} is unusable"
        )));
    }
    // kernel matrix of the nonlinear integral term
    let kmat = DMatrix::from_fn(n, n, |i, j| w[j] * p[j] * p[j] / (v[i] * p[j] + v[j] * p[i]));
    let wp = DVector::from_fn(n, |k, _| w[k] * p[k]);

    let mut h = DVector::from_element(n, 1.0);
    let mut integral = DVector::zeros(n);
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=PICARD_CAP {
        kmat.mul_to(&h, &mut integral);
        let mut hn = DVector::from_fn(n, |k, _| 1.0 + v[k] * h[k] * integral[k] / (2.0 * alpha));
        let scale = 2.0 * alpha / wp.dot(&hn);
        hn *= scale;
        let mut change = 0.0_f64;
        for k in 0..n {
            change = change.max((hn[k] - h[k]).abs());
        }
        h = hn;
        iterations = it;
        if change <= PICARD_TOL {
            converged = true;
            break;
        }
    }
    kmat.mul_to(&h, &mut integral);
    let mut residual = 0.0_f64;
    for k in 0..n {
        let t = 1.0 + v[k] * h[k] * integral[k] / (2.0 * alpha);
        residual = residual.max((h[k] - t).abs());
    }
    if !converged {
        return Err(Error::numerical(format!(
            "H-function iteration hit the cap of {PICARD_CAP} sweeps; residual {residual:.3e}"
        )));
    }
    if residual > RESIDUAL_TOL {
        return Err(Error::numerical(format!(
            "H-function residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e} after {iterations} sweeps"
        )));
    }
    Ok(HFunction {
        quad,
        values: h.iter().copied().collect(),
        residual,
        iterations,
        alpha,
        p_values,
    })
}

/// H for isotropic scattering (p == 1) on the dedicated report grid.
pub fn solve_h_constant() -> Result<HFunction> {
    let quad = HalfUnitQuad::gauss(REPORT_NODES);
    let p = vec![1.0; quad.len()];
    picard_solve(quad, p)
}

/// H for a multiplicative profile on its matched quadrature route.
pub fn solve_h_general(p: &Profile) -> Result<HFunction> {
    let pf = PFun::Prof(*p);
    let quad = pf.route();
    let pv = (0..quad.len())
        .map(|k| pf.eval01(quad.nodes[k], quad.one_minus[k]))
        .collect();
    picard_solve(quad, pv)
}

impl HFunction {
    /// Evaluates H off the solve grid through the rearranged fixed-point
    /// form H(v) = 1 / (1 - v I(v) / (2 alpha)); p_v is p at v.
    ///
    /// Well defined for v in [0,1]: the denominator lives in (0,1]. An
    /// infinite p_v (grazing-singular profiles at v = 1) gives I = 0 and
    /// the exact limit H(1) = 1.
    pub fn evaluate_with(&self, v: f64, p_v: f64) -> Result<f64> {
        let mut i_v = 0.0;
        for j in 0..self.quad.len() {
            let pj = self.p_values[j];
            let den = v * pj + self.quad.nodes[j] * p_v;
            let term = self.quad.weights[j] * pj * pj * self.values[j] / den;
            if term.is_finite() {
                i_v += term;
            }
        }
        let den = 1.0 - v * i_v / (2.0 * self.alpha);
        if !(den > 1e-14) {
            return Err(Error::numerical(format!(
                "H-function evaluation denominator {den:.3e} at v = {v}"
            )));
        }
        Ok(1.0 / den)
    }
}

/// Kernel families the crate can tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// exact isotropic kernel (sqrt(3)/2) v H(v)
    K0,
    /// (3/2) v^2 + v
    K1,
    /// 3 v^2
    K2,
    /// (3/2) v^2 + (15/14) v - 1/28; the isotropic rational surrogate
    K3,
    /// exact kernel v H / (2 sqrt(alpha gamma)) for multiplicative sigma
    Ksigma,
    /// rational surrogate a v^2/p + b v + c p + d
    KsigmaApp,
    /// discrete limit kernel of the naive scheme
    KLimitNaive,
    /// discrete limit kernel of the layer-matched scheme
    KLimitLme,
}

impl KernelKind {
    pub fn column_name(&self) -> &'static str {
        match self {
            KernelKind::K0 => "K0",
            KernelKind::K1 => "K1",
            KernelKind::K2 => "K2",
            KernelKind::K3 => "K3",
            KernelKind::Ksigma => "Ksigma",
            KernelKind::KsigmaApp => "Ksigma_app",
            KernelKind::KLimitNaive => "K_L_naive",
            KernelKind::KLimitLme => "K_L_lme",
        }
    }
}

/// Sampled boundary kernel.
///
/// `nodes`/`samples` are the report view written to CSV (the dedicated
/// 64-point grid for the H-based kinds). Moments integrate on the solve
/// grid kept alongside, which differs from the report view only for
/// singular profile routes where the report grid cannot reach 1e-8.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub kind: KernelKind,
    pub nodes: Vec<f64>,
    pub samples: Vec<f64>,
    /// (a, b, c, d) of a v^2/p + b v + c p + d when the kind has them
    pub coefficients: Option<[f64; 4]>,
    quad_nodes: Vec<f64>,
    quad_weights: Vec<f64>,
    quad_samples: Vec<f64>,
}

impl KernelTable {
    /// Table whose report view doubles as its quadrature (scheme limit
    /// kernels on the solver's positive nodes, dv weights 2 w_k).
    pub fn from_samples(
        kind: KernelKind,
        nodes: Vec<f64>,
        dv_weights: Vec<f64>,
        samples: Vec<f64>,
        coefficients: Option<[f64; 4]>,
    ) -> Result<Self> {
        if nodes.len() != dv_weights.len() || nodes.len() != samples.len() {
            return Err(Error::invalid("kernel table arrays must share a length"));
        }
        Ok(KernelTable {
            kind,
            quad_nodes: nodes.clone(),
            quad_weights: dv_weights,
            quad_samples: samples.clone(),
            nodes,
            samples,
            coefficients,
        })
    }

    /// Dirichlet datum Integral_0^1 K(v) f(v) dv for inflow profile f.
    pub fn boundary_value(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut s = 0.0;
        for k in 0..self.quad_nodes.len() {
            s += self.quad_weights[k] * self.quad_samples[k] * f(self.quad_nodes[k]);
        }
        s
    }

    /// Integral of the kernel itself; 1 for every admissible kernel.
    pub fn normalization(&self) -> f64 {
        self.boundary_value(|_| 1.0)
    }

    /// Barycentric Lagrange interpolation on the report nodes.
    ///
    /// Weights are formed in log space; only their ratios matter, so the
    /// huge dynamic range of the node-difference products cancels.
    pub fn interpolate(&self, v: f64) -> f64 {
        let n = self.nodes.len();
        for k in 0..n {
            if v == self.nodes[k] {
                return self.samples[k];
            }
        }
        let mut logw = vec![0.0_f64; n];
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if j != k {
                    s -= (self.nodes[k] - self.nodes[j]).abs().ln();
                }
            }
            logw[k] = s;
        }
        let lmax = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..n {
            // nodes sorted ascending: the sign of the weight alternates
            let sign = if (n - 1 - k) % 2 == 0 { 1.0 } else { -1.0 };
            let lam = sign * (logw[k] - lmax).exp();
            let c = lam / (v - self.nodes[k]);
            num += c * self.samples[k];
            den += c;
        }
        num / den
    }
}

/// Free-function alias of [`KernelTable::boundary_value`].
pub fn boundary_value(table: &KernelTable, f: impl Fn(f64) -> f64) -> f64 {
    table.boundary_value(f)
}

/// Coefficients and moments of the rational kernel surrogate.
///
/// beta is tabulated with its siblings but enters none of the formulas;
/// it is kept because the coefficient construction produces it anyway.
#[derive(Debug, Clone, Copy)]
pub struct KappCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Integral_0^1 v Kapp dv in closed form
    pub moment: f64,
    /// Integral_0^1 Kapp dv in closed form; equals 1 identically
    pub norm: f64,
}

fn kapp_coefficients_pf(pf: PFun) -> KappCoefficients {
    // the profile moment integrals all live on the tanh-sinh rule, which
    // absorbs both the |v|^(1-q) kink and the grazing singularities
    let q = HalfUnitQuad::tanh_sinh(TS_HALF, TS_SPAN);
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    let mut delta = 0.0;
    let mut m3 = 0.0; // Integral v^3 / p
    let mut m1p = 0.0; // Integral v p
    for k in 0..q.len() {
        let v = q.nodes[k];
        let w = q.weights[k];
        let p = pf.eval01(v, q.one_minus[k]);
        alpha += w * p;
        beta += w * v / p;
        gamma += w * v * v / p;
        delta += w * v * v * v / (p * p);
        m3 += w * v * v * v / p;
        m1p += w * v * p;
    }
    let a = 1.0 / (2.0 * gamma);
    let den = gamma * (1.0 + 4.0 * alpha * gamma);
    let b = (gamma + 2.0 * alpha * delta) / den;
    let c = (2.0 * gamma * gamma - delta) / den;
    let d = 0.0;
    let moment = a * m3 + b / 3.0 + c * m1p + d / 2.0;
    let norm = a * gamma + b / 2.0 + c * alpha + d;
    KappCoefficients {
        a,
        b,
        c,
        d,
        alpha,
        beta,
        gamma,
        delta,
        moment,
        norm,
    }
}

/// Surrogate coefficients for a multiplicative profile.
pub fn kapp_coefficients(p: &Profile) -> KappCoefficients {
    kapp_coefficients_pf(PFun::Prof(*p))
}

fn closed_form_table(kind: KernelKind, f: impl Fn(f64) -> f64, coeff: Option<[f64; 4]>) -> KernelTable {
    let quad = HalfUnitQuad::gauss(REPORT_NODES);
    let samples: Vec<f64> = quad.nodes.iter().map(|&v| f(v)).collect();
    KernelTable {
        kind,
        nodes: quad.nodes.clone(),
        samples: samples.clone(),
        coefficients: coeff,
        quad_nodes: quad.nodes,
        quad_weights: quad.weights,
        quad_samples: samples,
    }
}

/// Tabulates one kernel for the given cross section.
///
/// K0..K3 ignore sigma (they belong to the isotropic problem); Ksigma and
/// KsigmaApp need a constant or multiplicative cross section. The scheme
/// limit kernels are produced by the scheme modules, not here.
pub fn kernel(kind: KernelKind, sigma: &CrossSection) -> Result<KernelTable> {
    match kind {
        KernelKind::K1 => Ok(closed_form_table(kind, |v| 1.5 * v * v + v, None)),
        KernelKind::K2 => Ok(closed_form_table(kind, |v| 3.0 * v * v, None)),
        KernelKind::K3 => Ok(closed_form_table(
            kind,
            |v| 1.5 * v * v + (15.0 / 14.0) * v - 1.0 / 28.0,
            Some([1.5, 15.0 / 14.0, -1.0 / 28.0, 0.0]),
        )),
        KernelKind::K0 => {
            let h = solve_h_constant()?;
            let samples: Vec<f64> = (0..h.quad.len())
                .map(|k| 0.5 * 3.0_f64.sqrt() * h.quad.nodes[k] * h.values[k])
                .collect();
            Ok(KernelTable {
                kind,
                nodes: h.quad.nodes.clone(),
                samples: samples.clone(),
                coefficients: None,
                quad_nodes: h.quad.nodes.clone(),
                quad_weights: h.quad.weights.clone(),
                quad_samples: samples,
            })
        }
        KernelKind::Ksigma => {
            let pf = PFun::for_sigma(sigma)?;
            let co = kapp_coefficients_pf(pf);
            let scale = 0.5 / (co.alpha * co.gamma).sqrt();
            let h = match pf {
                PFun::One => solve_h_constant()?,
                PFun::Prof(p) => solve_h_general(&p)?,
            };
            // solve-grid samples carry the moments
            let quad_samples: Vec<f64> = (0..h.quad.len())
                .map(|k| scale * h.quad.nodes[k] * h.values[k])
                .collect();
            // report view on the dedicated grid via the rearranged form
            let report = HalfUnitQuad::gauss(REPORT_NODES);
            let mut samples = Vec::with_capacity(report.len());
            for k in 0..report.len() {
                let v = report.nodes[k];
                let pv = pf.eval01(v, report.one_minus[k]);
                samples.push(scale * v * h.evaluate_with(v, pv)?);
            }
            Ok(KernelTable {
                kind,
                nodes: report.nodes,
                samples,
                coefficients: None,
                quad_nodes: h.quad.nodes.clone(),
                quad_weights: h.quad.weights.clone(),
                quad_samples,
            })
        }
        KernelKind::KsigmaApp => {
            let pf = PFun::for_sigma(sigma)?;
            let co = kapp_coefficients_pf(pf);
            let kapp = |v: f64, omv: f64| {
                let p = pf.eval01(v, omv);
                co.a * v * v / p + co.b * v + co.c * p + co.d
            };
            let solve = pf.route();
            let quad_samples: Vec<f64> = (0..solve.len())
                .map(|k| kapp(solve.nodes[k], solve.one_minus[k]))
                .collect();
            let report = HalfUnitQuad::gauss(REPORT_NODES);
            let samples: Vec<f64> = (0..report.len())
                .map(|k| kapp(report.nodes[k], report.one_minus[k]))
                .collect();
            Ok(KernelTable {
                kind,
                nodes: report.nodes,
                samples,
                coefficients: Some([co.a, co.b, co.c, co.d]),
                quad_nodes: solve.nodes,
                quad_weights: solve.weights,
                quad_samples,
            })
        }
        KernelKind::KLimitNaive | KernelKind::KLimitLme => Err(Error::invalid(
            "scheme limit kernels are tabulated by the scheme modules",
        )),
    }
}

/// CSV with columns v,<kind>,... for tables sharing the same report nodes.
pub fn write_kernel_csv(path: &Path, tables: &[&KernelTable]) -> Result<()> {
    if tables.is_empty() {
        return Err(Error::invalid("no kernel tables to write"));
    }
    let nodes = &tables[0].nodes;
    for t in tables {
        if t.nodes != *nodes {
            return Err(Error::invalid(format!(
                "kernel tables {} and {} are sampled on different grids",
                tables[0].kind.column_name(),
                t.kind.column_name()
            )));
        }
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "v")?;
    for t in tables {
        write!(out, ",{}", t.kind.column_name())?;
    }
    writeln!(out)?;
    for i in 0..nodes.len() {
        write!(out, "{}", nodes[i])?;
        for t in tables {
            write!(out, ",{}", t.samples[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
