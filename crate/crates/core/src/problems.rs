//! Per-agent objectives.
//!
//! [`Objective`] is what the algorithm consumes: local values and gradients
//! plus, when known, the minimizer of the sum. [`RidgeProblem`] is the
//! ridge-regression benchmark `f_j(x) = ||M_j x - v_j||^2 + r ||x||^2`;
//! [`QuadraticProblem`] is a small separable toy used in tests.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fmt::Write as _;
use std::path::Path;

/// Gradient residual accepted by [`solve_optimum`].
pub const OPTIMUM_RESIDUAL_TOL: f64 = 1e-8;

pub trait Objective: Send + Sync {
    fn agents(&self) -> usize;

    fn dim(&self) -> usize;

    fn value(&self, agent: usize, x: &[f64]) -> f64;

    /// Writes `grad f_agent(x)` into `out`. Both slices have length `dim()`.
    fn grad_into(&self, agent: usize, x: &[f64], out: &mut [f64]);

    /// Minimizer of `sum_j f_j`, if known.
    fn optimum(&self) -> Option<&[f64]>;

    fn grad(&self, agent: usize, x: &[f64]) -> Result<Vec<f64>> {
        if agent >= self.agents() {
            return Err(Error::InvalidInput(format!(
                "agent {agent} out of range for {} agents",
                self.agents()
            )));
        }
        if x.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "point has length {}, expected {}",
                x.len(),
                self.dim()
            )));
        }
        let mut out = vec![0.0; self.dim()];
        self.grad_into(agent, x, &mut out);
        Ok(out)
    }

    /// `sum_j grad f_j(x)`.
    fn total_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim()];
        let mut g = vec![0.0; self.dim()];
        for j in 0..self.agents() {
            self.grad_into(j, x, &mut g);
            acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        acc
    }
}

/// Data of a ridge-regression instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeInstance {
    /// Per-agent measurement matrices, `d1 x d`.
    pub m: Vec<DMatrix<f64>>,
    /// Per-agent measurements, length `d1`.
    pub v: Vec<DVector<f64>>,
    pub r: f64,
    /// Ground truth used to synthesize `v`; unknown for instances read from file.
    pub x_tilde: Option<DVector<f64>>,
    /// Measurement noise used to synthesize `v`.
    pub nu: Option<Vec<DVector<f64>>>,
}

/// Coordinates of the ground truth, evenly spaced across `[lo, hi]`.
pub fn evenly_spaced(d: usize, lo: f64, hi: f64) -> DVector<f64> {
    if d == 1 {
        return DVector::from_element(1, 0.5 * (lo + hi));
    }
    DVector::from_fn(d, |j, _| lo + (hi - lo) * j as f64 / (d - 1) as f64)
}

/// Draws `M_i ~ U[0,1]^{d1 x d}`, `nu_i ~ N(0, I)` and sets
/// `v_i = M_i x_tilde + nu_i`.
pub fn generate_ridge(n: usize, d1: usize, d: usize, r: f64, bounds: (f64, f64), seed: u64) -> Result<RidgeInstance> {
    if n == 0 || d1 == 0 || d == 0 {
        return Err(Error::InvalidInput(format!(
            "ridge dimensions must be positive: n={n}, d1={d1}, d={d}"
        )));
    }
    if !(r >= 0.0) {
        return Err(Error::InvalidInput(format!("regularizer must be >= 0, got {r}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_tilde = evenly_spaced(d, bounds.0, bounds.1);
    let mut m = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut nu = Vec::with_capacity(n);
    for _ in 0..n {
        let mi = DMatrix::from_fn(d1, d, |_, _| rng.random::<f64>());
        let ni = DVector::from_fn(d1, |_, _| rng.sample::<f64, _>(StandardNormal));
        v.push(&mi * &x_tilde + &ni);
        m.push(mi);
        nu.push(ni);
    }
    Ok(RidgeInstance {
        m,
        v,
        r,
        x_tilde: Some(x_tilde),
        nu: Some(nu),
    })
}

impl RidgeInstance {
    pub fn from_parts(m: Vec<DMatrix<f64>>, v: Vec<DVector<f64>>, r: f64) -> Result<Self> {
        let inst = Self {
            m,
            v,
            r,
            x_tilde: None,
            nu: None,
        };
        inst.check_shapes()?;
        Ok(inst)
    }

    fn check_shapes(&self) -> Result<()> {
        if self.m.is_empty() || self.m.len() != self.v.len() {
            return Err(Error::InvalidInput(format!(
                "{} measurement matrices for {} measurement vectors",
                self.m.len(),
                self.v.len()
            )));
        }
        let (d1, d) = self.m[0].shape();
        if d1 == 0 || d == 0 {
            return Err(Error::InvalidInput("empty measurement matrix".into()));
        }
        for (i, (mi, vi)) in self.m.iter().zip(&self.v).enumerate() {
            if mi.shape() != (d1, d) || vi.len() != d1 {
                return Err(Error::InvalidInput(format!("agent {} has inconsistent shapes", i + 1)));
            }
        }
        if !(self.r >= 0.0) {
            return Err(Error::InvalidInput(format!("regularizer must be >= 0, got {}", self.r)));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.m.len()
    }

    pub fn rows(&self) -> usize {
        self.m[0].nrows()
    }

    pub fn dim(&self) -> usize {
        self.m[0].ncols()
    }

    pub fn value(&self, i: usize, x: &DVector<f64>) -> f64 {
        (&self.m[i] * x - &self.v[i]).norm_squared() + self.r * x.norm_squared()
    }

    /// `2 M_i^T (M_i x - v_i) + 2 r x`.
    pub fn grad(&self, i: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        if i >= self.n() {
            return Err(Error::InvalidInput(format!(
                "agent {i} out of range for {} agents",
                self.n()
            )));
        }
        if x.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "point has length {}, expected {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.m[i].tr_mul(&(&self.m[i] * x - &self.v[i])) * 2.0 + x * (2.0 * self.r))
    }

    /// Text format: header `n d1 d r`, then for each agent `d1` rows of `M_i`
    /// followed by one line holding `v_i`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {} {:.17e}\n", self.n(), self.rows(), self.dim(), self.r);
        let join = |it: &mut dyn Iterator<Item = f64>| it.map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(" ");
        for (mi, vi) in self.m.iter().zip(&self.v) {
            for row in mi.row_iter() {
                let _ = writeln!(out, "{}", join(&mut row.iter().copied()));
            }
            let _ = writeln!(out, "{}", join(&mut vi.iter().copied()));
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty problem file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 {
            return Err(Error::Parse(format!("expected header `n d1 d r`, got {header:?}")));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let (n, d1, d) = (int(h[0])?, int(h[1])?, int(h[2])?);
        let r = h[3]
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("{:?}: {e}", h[3])))?;
        let mut row = |len: usize| -> Result<Vec<f64>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("problem file truncated".into()))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                .collect::<Result<_>>()?;
            if vals.len() != len {
                return Err(Error::Parse(format!(
                    "expected {len} values, got {}: {line:?}",
                    vals.len()
                )));
            }
            Ok(vals)
        };
        let mut m = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            let mut data = Vec::with_capacity(d1 * d);
            for _ in 0..d1 {
                data.extend(row(d)?);
            }
            m.push(DMatrix::from_row_slice(d1, d, &data));
            v.push(DVector::from_vec(row(d1)?));
        }
        Self::from_parts(m, v, r)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Closed-form minimizer `(sum M^T M + n r I)^{-1} sum M^T v`, accepted only
/// if the summed gradient there is at most [`OPTIMUM_RESIDUAL_TOL`].
pub fn solve_optimum(inst: &RidgeInstance) -> Result<DVector<f64>> {
    let d = inst.dim();
    let n = inst.n() as f64;
    let mut a = DMatrix::identity(d, d) * (n * inst.r);
    let mut b = DVector::zeros(d);
    for (mi, vi) in inst.m.iter().zip(&inst.v) {
        a += mi.tr_mul(mi);
        b += mi.tr_mul(vi);
    }
    let chol = a.clone().cholesky().ok_or_else(|| Error::NumericalFailure {
        what: "normal equations are singular".into(),
        residual: f64::INFINITY,
    })?;
    let mut x = chol.solve(&b);
    let mut residual = f64::INFINITY;
    // a couple of refinement sweeps absorb rounding on ill-conditioned data
    for _ in 0..3 {
        let r = &b - &a * &x;
        residual = 2.0 * r.norm();
        if residual <= OPTIMUM_RESIDUAL_TOL {
            break;
        }
        x += chol.solve(&r);
    }
    if !(residual <= OPTIMUM_RESIDUAL_TOL) {
        return Err(Error::NumericalFailure {
            what: "ridge optimum gradient residual".into(),
            residual,
        });
    }
    Ok(x)
}

/// `L = max_i 2 (lambda_max(M_i^T M_i) + r)` and
/// `mu = 2 (lambda_min(sum_i M_i^T M_i) / n + r)`, the latter for the
/// averaged objective.
pub fn smoothness_constants(inst: &RidgeInstance) -> (f64, f64) {
    let d = inst.dim();
    let mut lip: f64 = 0.0;
    let mut gram = DMatrix::zeros(d, d);
    for mi in &inst.m {
        let g = mi.tr_mul(mi);
        let lmax = g.clone().symmetric_eigenvalues().max();
        lip = lip.max(2.0 * (lmax + inst.r));
        gram += g;
    }
    let lmin = gram.symmetric_eigenvalues().min() / inst.n() as f64;
    (lip, 2.0 * (lmin.max(0.0) + inst.r))
}

/// Ridge instance bundled with its optimum and curvature constants.
#[derive(Debug, Clone)]
pub struct RidgeProblem {
    pub instance: RidgeInstance,
    pub x_star: DVector<f64>,
    pub lipschitz: f64,
    pub strong_convexity: f64,
}

impl RidgeProblem {
    pub fn new(instance: RidgeInstance) -> Result<Self> {
        instance.check_shapes()?;
        let x_star = solve_optimum(&instance)?;
        let (lipschitz, strong_convexity) = smoothness_constants(&instance);
        Ok(Self {
            instance,
            x_star,
            lipschitz,
            strong_convexity,
        })
    }
}

impl Objective for RidgeProblem {
    fn agents(&self) -> usize {
        self.instance.n()
    }

    fn dim(&self) -> usize {
        self.instance.dim()
    }

    fn value(&self, agent: usize, x: &[f64]) -> f64 {
        self.instance.value(agent, &DVector::from_column_slice(x))
    }

    fn grad_into(&self, agent: usize, x: &[f64], out: &mut [f64]) {
        // hand-unrolled so the hot loop does not allocate
        let m = &self.instance.m[agent];
        let v = &self.instance.v[agent];
        let (d1, d) = m.shape();
        out.iter_mut()
            .zip(x)
            .for_each(|(o, &xi)| *o = 2.0 * self.instance.r * xi);
        for row in 0..d1 {
            let mut res = -v[row];
            for col in 0..d {
                res += m[(row, col)] * x[col];
            }
            for col in 0..d {
                out[col] += 2.0 * m[(row, col)] * res;
            }
        }
    }

    fn optimum(&self) -> Option<&[f64]> {
        Some(self.x_star.as_slice())
    }
}

/// `f_i(x) = (scale / 2) ||x - c_i||^2`; the minimizer is the mean center.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    centers: Vec<Vec<f64>>,
    scale: f64,
    x_star: Vec<f64>,
}

impl QuadraticProblem {
    pub fn new(centers: Vec<Vec<f64>>, scale: f64) -> Result<Self> {
        let d = centers.first().map(Vec::len).unwrap_or(0);
        if d == 0 || centers.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidInput(
                "quadratic centers must be nonempty and equal length".into(),
            ));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidInput(format!("scale must be positive, got {scale}")));
        }
        let n = centers.len() as f64;
        let x_star = (0..d).map(|k| centers.iter().map(|c| c[k]).sum::<f64>() / n).collect();
        Ok(Self { centers, scale, x_star })
    }
}

impl Objective for QuadraticProblem {
    fn agents(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        self.x_star.len()
    }

    fn value(&self, agent: usize, x: &[f64]) -> f64 {
        0.5 * self.scale
            * x.iter()
                .zip(&self.centers[agent])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
    }

    fn grad_into(&self, agent: usize, x: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(x).zip(&self.centers[agent]) {
            *o = self.scale * (a - b);
        }
    }

    fn optimum(&self) -> Option<&[f64]> {
        Some(&self.x_star)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn identity_instance(d: usize, v: Vec<f64>, r: f64) -> RidgeInstance {
        RidgeInstance::from_parts(vec![DMatrix::identity(v.len(), d)], vec![DVector::from_vec(v)], r).unwrap()
    }

    #[test]
    fn benchmark_family_shapes() {
        let inst = generate_ridge(100, 3, 2, 0.05, (1.0, 10.0), 0).unwrap();
        assert_eq!((inst.n(), inst.rows(), inst.dim()), (100, 3, 2));
        assert_eq!(inst.x_tilde.as_ref().unwrap().as_slice(), &[1.0, 10.0]);
        assert!(inst.m.iter().all(|m| m.iter().all(|&x| (0.0..1.0).contains(&x))));
        let nu = inst.nu.as_ref().unwrap();
        for ((m, v), noise) in inst.m.iter().zip(&inst.v).zip(nu) {
            let rebuilt = m * inst.x_tilde.as_ref().unwrap() + noise;
            assert_abs_diff_eq!((rebuilt - v).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_ridge(10, 3, 2, 0.05, (1.0, 10.0), 17).unwrap();
        let b = generate_ridge(10, 3, 2, 0.05, (1.0, 10.0), 17).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_ridge(10, 3, 2, 0.05, (1.0, 10.0), 18).unwrap());
    }

    #[test]
    fn evenly_spaced_ground_truth() {
        assert_eq!(evenly_spaced(1, 1.0, 10.0).as_slice(), &[5.5]);
        assert_eq!(evenly_spaced(4, 1.0, 10.0).as_slice(), &[1.0, 4.0, 7.0, 10.0]);
    }

    #[test]
    fn noiseless_identity_measurement_recovers_truth() {
        let x = DVector::from_vec(vec![3.0, -1.0]);
        let inst = identity_instance(2, (DMatrix::<f64>::identity(2, 2) * &x).as_slice().to_vec(), 0.0);
        assert_eq!(inst.v[0], x);
        assert_abs_diff_eq!(inst.grad(0, &x).unwrap().norm(), 0.0);
    }

    #[test]
    fn gradient_of_squared_norm() {
        let inst = identity_instance(2, vec![0.0, 0.0], 0.0);
        let g = inst.grad(0, &DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_eq!(g.as_slice(), &[2.0, 4.0]);
        assert!(matches!(inst.grad(0, &DVector::zeros(3)), Err(Error::InvalidInput(_))));
        assert!(matches!(inst.grad(1, &DVector::zeros(2)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn objective_grad_matches_instance_grad() {
        let p = RidgeProblem::new(generate_ridge(5, 3, 2, 0.05, (1.0, 10.0), 4).unwrap()).unwrap();
        let x = [0.3, -2.0];
        for i in 0..5 {
            let a = p.grad(i, &x).unwrap();
            let b = p.instance.grad(i, &DVector::from_column_slice(&x)).unwrap();
            assert_abs_diff_eq!(a.as_slice(), b.as_slice(), epsilon = 1e-12);
        }
        assert!(p.grad(5, &x).is_err());
        assert!(p.grad(0, &[1.0]).is_err());
    }

    #[test]
    fn single_agent_padded_identity_optimum() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let inst = RidgeInstance::from_parts(vec![m], vec![DVector::from_vec(vec![1.0, 1.0, 0.0])], 0.0).unwrap();
        let x = solve_optimum(&inst).unwrap();
        assert_abs_diff_eq!(x.as_slice(), &[1.0, 1.0][..], epsilon = 1e-14);
    }

    #[test]
    fn singular_system_is_rejected() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let inst = RidgeInstance::from_parts(vec![m], vec![DVector::from_vec(vec![1.0])], 0.0).unwrap();
        assert!(matches!(solve_optimum(&inst), Err(Error::NumericalFailure { .. })));
    }

    #[test]
    fn regularization_shrinks_optimum() {
        let base = generate_ridge(20, 3, 2, 0.05, (1.0, 10.0), 8).unwrap();
        let norms: Vec<f64> = [0.05, 0.5, 5.0]
            .iter()
            .map(|&r| solve_optimum(&RidgeInstance { r, ..base.clone() }).unwrap().norm())
            .collect();
        assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
    }

    #[test]
    fn identity_smoothness_constants() {
        let inst = identity_instance(2, vec![0.0, 0.0], 0.0);
        let (l, mu) = smoothness_constants(&inst);
        assert_abs_diff_eq!(l, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu, 2.0, epsilon = 1e-12);
        let (l, mu) = smoothness_constants(&identity_instance(2, vec![0.0, 0.0], 0.05));
        assert_abs_diff_eq!(l, 2.1, epsilon = 1e-12);
        assert_abs_diff_eq!(mu, 2.1, epsilon = 1e-12);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let inst = generate_ridge(4, 3, 2, 0.05, (1.0, 10.0), 2).unwrap();
        let back = RidgeInstance::parse_text(&inst.to_text()).unwrap();
        assert_eq!(back.m, inst.m);
        assert_eq!(back.v, inst.v);
        assert_eq!(back.r, inst.r);
        assert!(RidgeInstance::parse_text("1 1 1\n").is_err());
        assert!(RidgeInstance::parse_text("1 1 1 0.0\n1.0\n").is_err());
    }

    #[test]
    fn quadratic_optimum_is_mean_center() {
        let q = QuadraticProblem::new(vec![vec![1.0, 0.0], vec![3.0, 2.0]], 2.0).unwrap();
        assert_eq!(q.optimum().unwrap(), &[2.0, 1.0]);
        assert_abs_diff_eq!(q.total_grad(&[2.0, 1.0]).as_slice(), &[0.0, 0.0][..]);
    }
}
