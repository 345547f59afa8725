//! Directed communication topologies and the weight matrices derived from them.
//!
//! Edge convention: an ordered pair `(i, j)` means agent `j` can send to
//! agent `i`, so `j` is an in-neighbor of `i` and information flows `j -> i`.
//! Agents are 0-indexed in memory and 1-indexed in the edge-list file format.

use crate::report::ValidationReport;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

pub const EIGEN_TOL: f64 = 1e-10;
pub const EIGEN_MAX_ITER: usize = 100_000;
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Radii within this of 1 count as unit modulus.
pub const CONTRACTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Digraph {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTopology("graph needs at least one agent".into()));
        }
        Ok(Self {
            n,
            edges: BTreeSet::new(),
        })
    }

    /// Builds a graph from 0-indexed `(receiver, sender)` pairs.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::new(n)?;
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<bool> {
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidTopology(format!(
                "edge ({}, {}) out of range for n = {}",
                i + 1,
                j + 1,
                self.n
            )));
        }
        if i == j {
            return Err(Error::InvalidTopology(format!("self-loop at agent {}", i + 1)));
        }
        Ok(self.edges.insert((i, j)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i, j))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((i, 0)..(i + 1, 0)).map(|&(_, j)| j)
    }

    pub fn out_neighbors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |&&(_, s)| s == j).map(|&(i, _)| i)
    }

    /// Same vertex set with every edge flipped.
    pub fn reversed(&self) -> Self {
        Self {
            n: self.n,
            edges: self.edges.iter().map(|&(i, j)| (j, i)).collect(),
        }
    }

    /// Directed cycle `1 -> 2 -> ... -> n -> 1`.
    pub fn directed_cycle(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidTopology(format!("cycle needs n >= 2, got {n}")));
        }
        Self::from_edges(n, (0..n).map(|s| ((s + 1) % n, s)))
    }

    /// Every ordered pair except self-loops.
    pub fn complete(n: usize) -> Result<Self> {
        Self::from_edges(
            n,
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))),
        )
    }

    /// `center` sends to every other agent; nothing flows back.
    pub fn out_star(n: usize, center: usize) -> Result<Self> {
        Self::from_edges(n, (0..n).filter(|&i| i != center).map(|i| (i, center)))
    }

    /// Induced graph of a nonnegative matrix: `(i, j)` iff `w[(i, j)] > 0`, `i != j`.
    pub fn induced(w: &DMatrix<f64>) -> Result<Self> {
        let n = w.nrows();
        let mut g = Self::new(n)?;
        for i in 0..n {
            for j in 0..n {
                if i != j && w[(i, j)] > 0.0 {
                    g.edges.insert((i, j));
                }
            }
        }
        Ok(g)
    }

    /// Reads the edge-list format: a header `n <count>` followed by one
    /// 1-indexed `i j` pair per line. Blank lines and `#` comments are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty graph file".into()))?;
        let mut parts = header.split_whitespace();
        let n = match (parts.next(), parts.next(), parts.next()) {
            (Some("n"), Some(count), None) => count
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad agent count {count:?}: {e}")))?,
            _ => return Err(Error::Parse(format!("expected header `n <count>`, got {header:?}"))),
        };
        let mut g = Self::new(n)?;
        for (lineno, line) in lines {
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            match nums.as_slice() {
                &[i, j] if i >= 1 && j >= 1 => {
                    g.add_edge(i - 1, j - 1)?;
                }
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected two 1-indexed agents, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(g)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{} {}", i + 1, j + 1);
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }
}

/// Directed ring `i -> i+1 (mod n)` plus every other ordered pair independently
/// with probability `p`. Deterministic per seed.
pub fn ring_plus_random(n: usize, p: f64, seed: u64) -> Result<Digraph> {
    if n < 2 {
        return Err(Error::InvalidTopology(format!("ring needs n >= 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("link probability {p} not in [0, 1]")));
    }
    let mut g = Digraph::directed_cycle(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        for j in 0..n {
            if i == j || g.has_edge(i, j) {
                continue;
            }
            if rng.random_bool(p) {
                g.edges.insert((i, j));
            }
        }
    }
    Ok(g)
}

/// Agents from which every agent is reachable along information flow.
pub fn spanning_tree_roots(g: &Digraph) -> BTreeSet<usize> {
    let n = g.n();
    let mut out_adj = vec![Vec::new(); n];
    for (i, j) in g.edges() {
        out_adj[j].push(i);
    }
    (0..n)
        .filter(|&root| {
            let mut seen = vec![false; n];
            seen[root] = true;
            let mut reached = 1;
            let mut queue = VecDeque::from([root]);
            while let Some(j) = queue.pop_front() {
                for &i in &out_adj[j] {
                    if !seen[i] {
                        seen[i] = true;
                        reached += 1;
                        queue.push_back(i);
                    }
                }
            }
            reached == n
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption2Report {
    /// Roots of `G_R`, 0-indexed.
    pub roots_r: BTreeSet<usize>,
    /// Roots of `G_{C^T}`, 0-indexed.
    pub roots_ct: BTreeSet<usize>,
    pub common: BTreeSet<usize>,
    pub pass: bool,
}

impl Assumption2Report {
    pub fn to_report(&self) -> ValidationReport {
        let fmt = |s: &BTreeSet<usize>| {
            let v: Vec<String> = s.iter().take(12).map(|i| (i + 1).to_string()).collect();
            let more = if s.len() > 12 { ", ..." } else { "" };
            format!("{} roots {{{}{}}}", s.len(), v.join(", "), more)
        };
        let mut r = ValidationReport::new("network connectivity (spanning trees)");
        r.push("G_R has a spanning tree", !self.roots_r.is_empty(), fmt(&self.roots_r));
        r.push(
            "G_C^T has a spanning tree",
            !self.roots_ct.is_empty(),
            fmt(&self.roots_ct),
        );
        r.push("common root exists", !self.common.is_empty(), fmt(&self.common));
        r
    }
}

/// `g_r` is the pull graph (induced by R), `g_c` the push graph (induced by C).
/// `G_{C^T}` is `g_c` with information flow reversed.
pub fn check_assumption2(g_r: &Digraph, g_c: &Digraph) -> Result<Assumption2Report> {
    if g_r.n() != g_c.n() {
        return Err(Error::InvalidInput(format!(
            "pull graph has {} agents, push graph has {}",
            g_r.n(),
            g_c.n()
        )));
    }
    let roots_r = spanning_tree_roots(g_r);
    let roots_ct = spanning_tree_roots(&g_c.reversed());
    let common: BTreeSet<usize> = roots_r.intersection(&roots_ct).copied().collect();
    let pass = !common.is_empty();
    Ok(Assumption2Report {
        roots_r,
        roots_ct,
        common,
        pass,
    })
}

/// Row-stochastic pull matrix `R` and column-stochastic push matrix `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPair {
    r: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl WeightPair {
    /// Wraps user-supplied matrices after checking stochasticity, nonnegativity
    /// and positive diagonals.
    pub fn from_matrices(r: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let w = Self { r, c };
        let report = w.stochasticity_report();
        if !report.passed() {
            return Err(Error::InvalidInput(format!("invalid weight pair:\n{report}")));
        }
        Ok(w)
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.r.nrows()
    }

    /// `(1 - beta) I + beta R`.
    pub fn r_mixed(&self, beta: f64) -> DMatrix<f64> {
        lazy_mix(&self.r, beta)
    }

    /// `(1 - gamma) I + gamma C`.
    pub fn c_mixed(&self, gamma: f64) -> DMatrix<f64> {
        lazy_mix(&self.c, gamma)
    }

    pub fn max_row_sum_deviation(&self) -> f64 {
        self.r.row_iter().map(|row| (row.sum() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn max_col_sum_deviation(&self) -> f64 {
        self.c
            .column_iter()
            .map(|col| (col.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn stochasticity_report(&self) -> ValidationReport {
        let mut rep = ValidationReport::new("weight matrices");
        let square = self.r.is_square() && self.c.is_square() && self.r.shape() == self.c.shape();
        rep.push(
            "R, C square and same size",
            square,
            format!("R {:?}, C {:?}", self.r.shape(), self.c.shape()),
        );
        if !square {
            return rep;
        }
        let nonneg = self.r.iter().chain(self.c.iter()).all(|&x| x >= 0.0 && x.is_finite());
        rep.push("R, C nonnegative", nonneg, "");
        let dr = self.max_row_sum_deviation();
        rep.push(
            "R row-stochastic",
            dr <= STOCHASTIC_TOL,
            format!("max |row sum - 1| = {dr:.3e}"),
        );
        let dc = self.max_col_sum_deviation();
        rep.push(
            "C column-stochastic",
            dc <= STOCHASTIC_TOL,
            format!("max |col sum - 1| = {dc:.3e}"),
        );
        let diag = (0..self.n()).all(|i| self.r[(i, i)] > 0.0 && self.c[(i, i)] > 0.0);
        rep.push("diagonals positive", diag, "");
        rep
    }
}

fn lazy_mix(w: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = w.nrows();
    DMatrix::identity(n, n) * (1.0 - t) + w * t
}

/// Uniform in/out-degree weights on a single graph (`G_R = G_C = g`).
pub fn build_weights(g: &Digraph) -> WeightPair {
    build_weights_pair(g, g).expect("same graph on both sides")
}

/// `R_ij = 1/(|N_in(i)|+1)` on the pull graph, `C_ji = 1/(|N_out(i)|+1)` on
/// the push graph; diagonals absorb the remainder.
pub fn build_weights_pair(g_r: &Digraph, g_c: &Digraph) -> Result<WeightPair> {
    if g_r.n() != g_c.n() {
        return Err(Error::InvalidInput("pull and push graphs differ in size".into()));
    }
    let n = g_r.n();
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        let inn: Vec<usize> = g_r.in_neighbors(i).collect();
        let w = 1.0 / (inn.len() as f64 + 1.0);
        let mut off = 0.0;
        for &j in &inn {
            r[(i, j)] = w;
            off += w;
        }
        r[(i, i)] = 1.0 - off;
    }
    let mut out_adj = vec![Vec::new(); n];
    for (i, j) in g_c.edges() {
        out_adj[j].push(i);
    }
    let mut c = DMatrix::zeros(n, n);
    for (i, outs) in out_adj.iter().enumerate() {
        let w = 1.0 / (outs.len() as f64 + 1.0);
        let mut off = 0.0;
        for &j in outs {
            c[(j, i)] = w;
            off += w;
        }
        c[(i, i)] = 1.0 - off;
    }
    Ok(WeightPair { r, c })
}

/// Left Perron vector `u` of `R` and right Perron vector `v` of `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// `u^T R = u^T`, `u^T 1 = n`.
    pub u: DVector<f64>,
    /// `C v = v`, `1^T v = n`.
    pub v: DVector<f64>,
    pub residual_u: f64,
    pub residual_v: f64,
    pub iterations: usize,
}

impl EigenPair {
    pub fn uv(&self) -> f64 {
        self.u.dot(&self.v)
    }
}

pub fn perron_vectors(w: &WeightPair, tol: f64, max_iter: usize) -> Result<EigenPair> {
    let ones = DVector::from_element(w.n(), 1.0);
    perron_vectors_from(w, &ones, &ones, tol, max_iter)
}

/// Power iteration started from the given (nonnegative, nonzero) vectors.
pub fn perron_vectors_from(
    w: &WeightPair,
    start_u: &DVector<f64>,
    start_v: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair> {
    let rt = w.r().transpose();
    let (u, residual_u, it_u) = power_iterate(&rt, start_u, tol, max_iter, "left Perron vector of R")?;
    let (v, residual_v, it_v) = power_iterate(w.c(), start_v, tol, max_iter, "right Perron vector of C")?;
    let e = EigenPair {
        u,
        v,
        residual_u,
        residual_v,
        iterations: it_u.max(it_v),
    };
    if e.uv() <= 0.0 {
        return Err(Error::NumericalFailure {
            what: "Perron vectors have u^T v <= 0 (no common spanning-tree root)".into(),
            residual: e.uv(),
        });
    }
    Ok(e)
}

/// Iterates `x <- A x` with `1^T x = n` until `||A x - x|| <= tol`.
fn power_iterate(
    a: &DMatrix<f64>,
    start: &DVector<f64>,
    tol: f64,
    max_iter: usize,
    what: &str,
) -> Result<(DVector<f64>, f64, usize)> {
    let n = a.nrows() as f64;
    let normalize = |x: &mut DVector<f64>| -> bool {
        let s = x.sum();
        if s.is_finite() && s > 0.0 {
            *x *= n / s;
            true
        } else {
            false
        }
    };
    let mut x = start.clone();
    if x.len() != a.nrows() || !normalize(&mut x) {
        return Err(Error::InvalidInput(format!(
            "{what}: start vector must be nonnegative with positive sum"
        )));
    }
    let mut ax = a * &x;
    let mut residual = (&ax - &x).norm();
    for it in 0..=max_iter {
        if residual <= tol {
            return Ok(polish(a, x, residual, it));
        }
        if it == max_iter {
            break;
        }
        x = ax;
        normalize(&mut x);
        ax = a * &x;
        residual = (&ax - &x).norm();
    }
    Err(Error::NumericalFailure {
        what: format!("{what} after {max_iter} iterations"),
        residual,
    })
}

/// Replaces a converged power iterate of the column-stochastic `a` by the
/// direct solution of `(a - I) x = 0`, `1^T x = n`, when that is at least as
/// accurate. A small residual alone leaves an error of order
/// `residual / (1 - |lambda_2|)`, which the solve removes.
fn polish(a: &DMatrix<f64>, x: DVector<f64>, residual: f64, it: usize) -> (DVector<f64>, f64, usize) {
    let n = a.nrows();
    let mut m = a - DMatrix::identity(n, n);
    m.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = n as f64;
    if let Some(mut y) = m.lu().solve(&rhs) {
        y.iter_mut().for_each(|v| *v = v.max(0.0));
        let r = (a * &y - &y).norm();
        if r.is_finite() && r <= residual && (&y - &x).amax() <= 1e-3 * n as f64 {
            return (y, r, it);
        }
    }
    (x, residual, it)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadii {
    /// Spectral radius of `C_gamma - v 1^T / n`.
    pub push: f64,
    /// Spectral radius of `R - 1 u^T / n`.
    pub pull: f64,
}

impl SpectralRadii {
    pub fn contractive(&self) -> bool {
        self.push_contractive() && self.pull_contractive()
    }

    pub fn push_contractive(&self) -> bool {
        self.push < 1.0 - CONTRACTION_TOL
    }

    pub fn pull_contractive(&self) -> bool {
        self.pull < 1.0 - CONTRACTION_TOL
    }
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Numerical stand-in for the analytic contraction constants of the mixing
/// matrices once their consensus component is removed.
pub fn contraction_check(w: &WeightPair, gamma: f64, e: &EigenPair) -> SpectralRadii {
    let n = w.n();
    let nf = n as f64;
    let ones = DVector::from_element(n, 1.0);
    let push = w.c_mixed(gamma) - &e.v * ones.transpose() / nf;
    let pull = w.r() - &ones * e.u.transpose() / nf;
    SpectralRadii {
        push: spectral_radius(&push),
        pull: spectral_radius(&pull),
    }
}
