//! Cross sections, the discrete collision matrix and its solvers.
//!
//! L f(v) = (1/2) Integral sigma(v,w) (f(w) - f(v)) dw on the shared velocity
//! grid. Conservation <L f> = 0 holds row by row in exact arithmetic, the
//! kernel is spanned by the equilibrium E, and the weighted matrix w_k L_kj
//! is symmetric, so L is negative semidefinite in the dmu inner product.
//!
//! Beyond the matrix itself this module owns the pieces every scheme needs:
//! the pseudo-inverse on mean-zero data (bordered solve), the diffusion
//! coefficient kappa = -<v L^+(v E)>, the half-range-projected operator
//! Ltilde = (I - Pi)L(I - Pi), and regularized / half-range solvers.

use crate::error::{Error, Result};
use crate::vquad::{HalfRangeMask, VelocityGrid};
use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Velocity profile p(v) entering multiplicative cross sections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// p(v) = |v|^q. Degenerate at v = 0 for q > 0.
    AbsPow { q: f64 },
    /// p(v) = (1 - v^2)^q. Singular at the grazing ends for q < 0.
    OneMinusV2Pow { q: f64 },
}

impl Profile {
    pub fn eval(&self, v: f64) -> f64 {
        match *self {
            Profile::AbsPow { q } => v.abs().powf(q),
            Profile::OneMinusV2Pow { q } => (1.0 - v * v).powf(q),
        }
    }

    /// Evaluation on (0,1) from x and a separately tracked 1-x.
    ///
    /// Near the grazing end 1 - v^2 loses all precision if formed directly;
    /// quadratures that resolve that end carry 1-x alongside x.
    pub fn eval01(&self, x: f64, one_minus_x: f64) -> f64 {
        match *self {
            Profile::AbsPow { q } => x.powf(q),
            Profile::OneMinusV2Pow { q } => (one_minus_x * (1.0 + x)).powf(q),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Profile::AbsPow { q } => {
                // q <= 0 makes p non-degenerate (constant-like); q >= 2 breaks
                // the delta = Integral v^3/p^2 coefficient integral.
                if !(0.0 < q && q < 2.0) {
                    return Err(Error::invalid(format!(
                        "abs_pow profile needs 0 < q < 2, got {q}"
                    )));
                }
            }
            Profile::OneMinusV2Pow { q } => {
                // integrability of p itself needs q > -1
                if !(-1.0 < q && q < 0.0) {
                    return Err(Error::invalid(format!(
                        "one_minus_v2_pow profile needs -1 < q < 0, got {q}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Pair interaction phi(v,w) for cross sections that do not factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairProfile {
    /// phi(v,w) = |v - w|^q. Integrable against dw for q > -1.
    AbsDiffPow { q: f64 },
}

impl PairProfile {
    pub fn eval(&self, v: f64, w: f64) -> f64 {
        match *self {
            PairProfile::AbsDiffPow { q } => (v - w).abs().powf(q),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PairProfile::AbsDiffPow { q } => {
                if q <= -1.0 {
                    return Err(Error::invalid(format!(
                        "abs_diff_pow needs q > -1 for an integrable kernel, got {q}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Scattering cross section sigma(v,w), symmetric and nonnegative.
///
/// JSON form: {"kind":"constant"},
/// {"kind":"multiplicative","p":"abs_pow","q":1.5},
/// {"kind":"multiplicative","p":"one_minus_v2_pow","q":-0.75},
/// {"kind":"pairwise","form":"abs_diff_pow","q":5.0}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SigmaRepr", into = "SigmaRepr")]
pub enum CrossSection {
    /// sigma == 1; kappa = 1/3 exactly, also on the discrete grid.
    Constant,
    /// sigma(v,w) = p(v) p(w).
    Multiplicative { p: Profile },
    /// sigma(v,w) = phi(v,w), e.g. |v-w|^q.
    Pairwise { phi: PairProfile },
}

/// Flat JSON image of a cross section.
#[derive(Serialize, Deserialize)]
struct SigmaRepr {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    form: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
}

impl TryFrom<SigmaRepr> for CrossSection {
    type Error = String;

    fn try_from(r: SigmaRepr) -> std::result::Result<Self, String> {
        let sigma = match r.kind.as_str() {
            "constant" => CrossSection::Constant,
            "multiplicative" => {
                let q = r.q.ok_or("multiplicative sigma needs a field q")?;
                let p = match r.p.as_deref() {
                    Some("abs_pow") => Profile::AbsPow { q },
                    Some("one_minus_v2_pow") => Profile::OneMinusV2Pow { q },
                    Some(other) => return Err(format!("unknown profile p = {other:?}")),
                    None => return Err("multiplicative sigma needs a field p".into()),
                };
                CrossSection::Multiplicative { p }
            }
            "pairwise" => {
                let q = r.q.ok_or("pairwise sigma needs a field q")?;
                let phi = match r.form.as_deref() {
                    Some("abs_diff_pow") => PairProfile::AbsDiffPow { q },
                    Some(other) => return Err(format!("unknown pair form = {other:?}")),
                    None => return Err("pairwise sigma needs a field form".into()),
                };
                CrossSection::Pairwise { phi }
            }
            other => return Err(format!("unknown sigma kind = {other:?}")),
        };
        sigma.validate().map_err(|e| e.to_string())?;
        Ok(sigma)
    }
}

impl From<CrossSection> for SigmaRepr {
    fn from(s: CrossSection) -> SigmaRepr {
        match s {
            CrossSection::Constant => SigmaRepr {
                kind: "constant".into(),
                p: None,
                form: None,
                q: None,
            },
            CrossSection::Multiplicative { p } => {
                let (name, q) = match p {
                    Profile::AbsPow { q } => ("abs_pow", q),
                    Profile::OneMinusV2Pow { q } => ("one_minus_v2_pow", q),
                };
                SigmaRepr {
                    kind: "multiplicative".into(),
                    p: Some(name.into()),
                    form: None,
                    q: Some(q),
                }
            }
            CrossSection::Pairwise { phi } => {
                let PairProfile::AbsDiffPow { q } = phi;
                SigmaRepr {
                    kind: "pairwise".into(),
                    p: None,
                    form: Some("abs_diff_pow".into()),
                    q: Some(q),
                }
            }
        }
    }
}

impl CrossSection {
    pub fn eval(&self, v: f64, w: f64) -> f64 {
        match self {
            CrossSection::Constant => 1.0,
            CrossSection::Multiplicative { p } => p.eval(v) * p.eval(w),
            CrossSection::Pairwise { phi } => phi.eval(v, w),
        }
    }

    /// The factor profile, when sigma(v,w) = p(v) p(w). Constant counts with
    /// p == 1 handled by the closed-form kernels, so it returns None here.
    pub fn profile(&self) -> Option<Profile> {
        match self {
            CrossSection::Multiplicative { p } => Some(*p),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CrossSection::Constant => Ok(()),
            CrossSection::Multiplicative { p } => p.validate(),
            CrossSection::Pairwise { phi } => phi.validate(),
        }
    }

    /// All supported kinds satisfy sigma(-v,-w) = sigma(v,w); the right-wall
    /// limit problems are solved by reflecting the left-wall ones.
    pub fn is_reflection_symmetric(&self) -> bool {
        true
    }
}

/// Assembled collision matrix with its derived quantities.
///
/// Immutable after assembly; the factorization needed by the pseudo-inverse
/// is computed eagerly, the spectral bound lazily (only the explicit
/// reference stepper asks for it).
pub struct CollisionOperator {
    pub matrix: DMatrix<f64>,
    pub kappa: f64,
    pub grid: VelocityGrid,
    pub sigma: CrossSection,
    /// max_k |L_kk|, the stiffest relaxation rate on the diagonal.
    nu_max: f64,
    /// LU of the bordered system [[L, E], [w^T, 0]].
    pinv_lu: LU<f64, Dyn, Dyn>,
    lam_min: OnceLock<f64>,
}

impl std::fmt::Debug for CollisionOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CollisionOperator")
            .field("m", &self.grid.len())
            .field("sigma", &self.sigma)
            .field("kappa", &self.kappa)
            .field("nu_max", &self.nu_max)
            .finish()
    }
}

/// Builds L on the given grid and precomputes kappa and the bordered LU.
///
/// The j == k term is always skipped: the integrand carries f(w) - f(v),
/// which vanishes at w = v, so the diagonal pair contributes nothing even
/// when sigma(v,v) itself is singular (pairwise kinds with q < 0).
pub fn assemble_l(sigma: &CrossSection, grid: &VelocityGrid) -> Result<CollisionOperator> {
    sigma.validate()?;
    let m = grid.len();
    let v = &grid.nodes;
    let w = &grid.mu_weights;
    let mut l = DMatrix::zeros(m, m);
    for k in 0..m {
        let mut row_sum = 0.0;
        for j in 0..m {
            if j == k {
                continue;
            }
            let s = sigma.eval(v[k], v[j]);
            if !s.is_finite() || s < 0.0 {
                return Err(Error::numerical(format!(
                    "cross section evaluated to {s} at (v,w) = ({}, {})",
                    v[k], v[j]
                )));
            }
            l[(k, j)] = s * w[j];
            row_sum += s * w[j];
        }
        l[(k, k)] = -row_sum;
    }
    let nu_max = (0..m).map(|k| l[(k, k)].abs()).fold(0.0, f64::max);

    // bordered system: solving [[L, E], [w^T, 0]] [u; c] = [h; 0] picks the
    // unique mean-zero u with L u = h for mean-zero h
    let mut bord = DMatrix::zeros(m + 1, m + 1);
    bord.view_mut((0, 0), (m, m)).copy_from(&l);
    for k in 0..m {
        bord[(k, m)] = 1.0;
        bord[(m, k)] = w[k];
    }
    let pinv_lu = LU::new(bord);

    let mut op = CollisionOperator {
        matrix: l,
        kappa: 0.0,
        grid: grid.clone(),
        sigma: *sigma,
        nu_max,
        pinv_lu,
        lam_min: OnceLock::new(),
    };

    // kappa = -<v u> with L u = v E, <u> = 0
    let ve = DVector::from_fn(m, |k, _| v[k]);
    let u = op.pseudo_inverse_apply(&ve)?;
    let kappa = -op.grid.flux_bracket(&u);
    if !kappa.is_finite() || kappa <= 0.0 {
        return Err(Error::numerical(format!(
            "diffusion coefficient came out nonpositive: {kappa}"
        )));
    }
    op.kappa = kappa;
    Ok(op)
}

/// The diffusion coefficient of the eps -> 0 limit, kappa = -<v L^+(v E)>.
pub fn diffusion_kappa(op: &CollisionOperator) -> f64 {
    op.kappa
}

impl CollisionOperator {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Stiffest diagonal relaxation rate max_k |L_kk|.
    pub fn nu_max(&self) -> f64 {
        self.nu_max
    }

    /// u = L^+ h: the unique mean-zero solution of L u = h.
    ///
    /// Requires <h> = 0 up to 1e-10 relative to the sup of h; the bordered
    /// solve would silently project otherwise and hide caller bugs.
    pub fn pseudo_inverse_apply(&self, h: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.len();
        let mean = self.grid.bracket(h);
        let scale = h.amax().max(1.0);
        if mean.abs() > 1e-10 * scale {
            return Err(Error::invalid(format!(
                "pseudo-inverse input has nonzero mean {mean:.3e} (scale {scale:.3e})"
            )));
        }
        let mut rhs = DVector::zeros(m + 1);
        rhs.rows_mut(0, m).copy_from(h);
        let sol = self
            .pinv_lu
            .solve(&rhs)
            .ok_or_else(|| Error::numerical("bordered collision system is singular"))?;
        Ok(sol.rows(0, m).into_owned())
    }

    /// Most negative eigenvalue of L, computed on first use.
    ///
    /// L is self-adjoint under the dmu weights; conjugating by diag(sqrt w)
    /// gives a symmetric matrix with the same spectrum.
    pub fn lam_min(&self) -> f64 {
        *self.lam_min.get_or_init(|| {
            let m = self.len();
            let w = &self.grid.mu_weights;
            let mut s = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    s[(i, j)] = (w[i] / w[j]).sqrt() * self.matrix[(i, j)];
                }
            }
            // symmetrize away rounding before the eigensolve
            let sym = (&s + s.transpose()) * 0.5;
            let eig = sym.symmetric_eigenvalues();
            eig.iter().fold(f64::INFINITY, |a, &b| a.min(b))
        })
    }

    /// Ltilde = (I - Pi)L(I - Pi) with Pi the half-range projector at the
    /// mask location. Annihilates E and keeps ranges inside the mean-zero
    /// complement: <Ltilde f>_{V_-} = 0 for every f.
    pub fn assemble_ltilde(&self, mask: &HalfRangeMask) -> DMatrix<f64> {
        let m = self.len();
        let w = &self.grid.mu_weights;
        let s_minus: f64 = (0..m).filter(|&k| mask.minus[k]).map(|k| w[k]).sum();
        let mut p = DMatrix::identity(m, m);
        for j in 0..m {
            if mask.minus[j] {
                let c = w[j] / s_minus;
                for i in 0..m {
                    p[(i, j)] -= c;
                }
            }
        }
        &p * (&self.matrix * &p)
    }
}

/// Solves (alpha I - Ltilde) u = rhs for alpha > 0 and checks the residual.
pub fn solve_regularized(
    alpha: f64,
    ltilde: &DMatrix<f64>,
    rhs: &DVector<f64>,
) -> Result<DVector<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!(
            "regularized solve needs alpha > 0, got {alpha}"
        )));
    }
    let solver = RegularizedSolver::new(alpha, ltilde)?;
    let u = solver.solve(rhs)?;
    let mut res = ltilde * &u;
    res.axpy(alpha, &u, -1.0); // res = alpha u - Ltilde u
    res -= rhs;
    let scale = alpha * u.amax() + rhs.amax() + 1.0;
    if res.amax() > 1e-10 * scale {
        return Err(Error::numerical(format!(
            "regularized solve residual {:.3e} exceeds tolerance",
            res.amax()
        )));
    }
    Ok(u)
}

/// Factored (alpha I - Ltilde), reused across a whole time step sweep.
pub struct RegularizedSolver {
    lu: LU<f64, Dyn, Dyn>,
}

impl RegularizedSolver {
    pub fn new(alpha: f64, ltilde: &DMatrix<f64>) -> Result<Self> {
        let m = ltilde.nrows();
        let mut a = -ltilde.clone();
        for k in 0..m {
            a[(k, k)] += alpha;
        }
        Ok(RegularizedSolver { lu: LU::new(a) })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu
            .solve(rhs)
            .ok_or_else(|| Error::numerical("regularized system is singular"))
    }
}

/// Factored restriction of (alpha I - Ltilde) to the V_+ rows and columns.
///
/// Solutions are supported on V_+; only the V_+ entries of the right-hand
/// side enter (the V_- rows of the half-range equation are not imposed).
pub struct HalfRangeSolver {
    lu: LU<f64, Dyn, Dyn>,
    plus: Vec<usize>,
    m: usize,
}

impl HalfRangeSolver {
    /// alpha may be zero: the restricted operator stays invertible.
    pub fn new(alpha: f64, ltilde: &DMatrix<f64>, mask: &HalfRangeMask) -> Result<Self> {
        if alpha < 0.0 {
            return Err(Error::invalid(format!(
                "half-range solve needs alpha >= 0, got {alpha}"
            )));
        }
        let plus = mask.plus_indices();
        if plus.is_empty() {
            return Err(Error::invalid(
                "half-range solve with empty V_+ set",
            ));
        }
        let n = plus.len();
        let mut a = DMatrix::zeros(n, n);
        for (r, &i) in plus.iter().enumerate() {
            for (c, &j) in plus.iter().enumerate() {
                a[(r, c)] = -ltilde[(i, j)];
                if i == j {
                    a[(r, c)] += alpha;
                }
            }
        }
        Ok(HalfRangeSolver {
            lu: LU::new(a),
            plus,
            m: ltilde.nrows(),
        })
    }

    /// Solves on V_+ reading only the V_+ entries of `rhs_full`; the result
    /// is zero on V_-.
    pub fn solve(&self, rhs_full: &DVector<f64>) -> Result<DVector<f64>> {
        let r = DVector::from_iterator(self.plus.len(), self.plus.iter().map(|&k| rhs_full[k]));
        let sol = self
            .lu
            .solve(&r)
            .ok_or_else(|| Error::numerical("half-range system is singular"))?;
        let mut full = DVector::zeros(self.m);
        for (c, &k) in self.plus.iter().enumerate() {
            full[k] = sol[c];
        }
        Ok(full)
    }
}

/// One-shot half-range solve with the documented support contract enforced:
/// rhs must vanish on V_- (tolerance 1e-12 relative).
pub fn solve_halfrange(
    alpha: f64,
    ltilde: &DMatrix<f64>,
    mask: &HalfRangeMask,
    rhs: &DVector<f64>,
) -> Result<DVector<f64>> {
    let scale = rhs.amax().max(1.0);
    for k in 0..rhs.len() {
        if mask.minus[k] && rhs[k].abs() > 1e-12 * scale {
            return Err(Error::invalid(format!(
                "half-range right-hand side is not supported on V_+ (entry {k} = {:.3e})",
                rhs[k]
            )));
        }
    }
    HalfRangeSolver::new(alpha, ltilde, mask)?.solve(rhs)
}
