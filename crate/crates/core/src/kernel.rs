//! Values of `e^{τM} v` (or `e^{τMᵀ} v`) at Gauss–Legendre nodes of a
//! geometrically graded τ-grid, for integrals over `[0, ∞)` or `[0, t]`.
//!
//! Level ℓ holds `p` panels of width `w0·2^ℓ`, so every panel spans about
//! `1/p` of its distance from the origin. Node matrices `e^{ξ_j w M}` are
//! carried from level to level by squaring, and rebuilt from scratch every
//! few levels to keep the squaring error (which grows with the number of
//! squarings) near machine precision.

use nalgebra::{DMatrix, DVector};

use num_complex::Complex64;

use crate::dynamics::SystemMatrix;
use crate::error::{Error, Result};
use crate::linalg::expm_scaled;
use crate::quadrature::GaussLegendre;

/// Relative truncation level of integrals over `[0, ∞)`.
pub(crate) const EPS: f64 = 1e-14;

const RESTART_EVERY: u32 = 8;
const MAX_LEVELS: u32 = 400;

/// `e^{wM}` stored as its blocks `[[A, X], [0, diag(d)]]`.
#[derive(Clone)]
struct BlockExp {
    a: DMatrix<f64>,
    x: DMatrix<f64>,
    d: DVector<f64>,
}

impl BlockExp {
    fn new(sys: &SystemMatrix, w: f64) -> Self {
        let n = sys.n_edges();
        let full = expm_scaled(sys.matrix(), w);
        Self {
            a: full.view((0, 0), (n, n)).into_owned(),
            x: full.view((0, n), (n, n)).into_owned(),
            d: DVector::from_iterator(n, sys.h().iter().map(|h| (-h * w).exp())),
        }
    }

    fn square(&mut self) {
        let ax = &self.a * &self.x;
        let mut xd = self.x.clone();
        for (j, mut col) in xd.column_iter_mut().enumerate() {
            col *= self.d[j];
        }
        self.x = ax + xd;
        self.a = &self.a * &self.a;
        self.d.apply(|v| *v *= *v);
    }

    fn apply(&self, v: &DMatrix<f64>, transposed: bool) -> DMatrix<f64> {
        let n = self.d.len();
        let q = v.rows(0, n);
        let r = v.rows(n, n);
        let mut out = DMatrix::zeros(2 * n, v.ncols());
        if transposed {
            out.rows_mut(0, n).copy_from(&(self.a.tr_mul(&q)));
            let mut low = self.x.tr_mul(&q);
            for i in 0..n {
                for c in 0..v.ncols() {
                    low[(i, c)] += self.d[i] * r[(i, c)];
                }
            }
            out.rows_mut(n, n).copy_from(&low);
        } else {
            out.rows_mut(0, n).copy_from(&(&self.a * q + &self.x * r));
            let mut low = r.into_owned();
            for i in 0..n {
                for c in 0..v.ncols() {
                    low[(i, c)] *= self.d[i];
                }
            }
            out.rows_mut(n, n).copy_from(&low);
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum End {
    /// Integrate over `[0, ∞)`: stop once τ passes `min_tau` and the values
    /// on the last panel have fallen below `tol` times their peak.
    Decay { min_tau: f64, tol: f64 },
    /// Integrate over `[0, t]` exactly.
    At(f64),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Grid {
    pub w0: f64,
    pub panels: usize,
    pub end: End,
}

impl Grid {
    /// Grid resolving the fastest rate of `sys` from τ = 0.
    pub fn new(sys: &SystemMatrix, panels: usize, end: End) -> Self {
        Self { w0: 1e-6 / sys.max_rate(), panels, end }
    }

    /// Truncation for integrands decaying like `(e^{−κτ})^α` with κ the
    /// slowest rate, to relative level `eps`.
    pub fn decaying(sys: &SystemMatrix, panels: usize, alpha: f64, eps: f64) -> Self {
        let a = alpha.min(1.0);
        let min_tau = (1.0 / eps).ln() / (sys.min_rate() * a);
        Self::new(sys, panels, End::Decay { min_tau, tol: eps.powf(1.0 / a) })
    }
}

/// Visits every node as `visit(τ, weight, values)` where `values` is
/// `e^{τM} v0` (or `e^{τMᵀ} v0`), and returns the propagated `v0` at the
/// end of the grid.
pub(crate) fn walk<F>(sys: &SystemMatrix, v0: &DMatrix<f64>, transposed: bool, grid: Grid, mut visit: F) -> DMatrix<f64>
where
    F: FnMut(f64, f64, &DMatrix<f64>),
{
    let gl = GaussLegendre::gl32();
    let mut v = v0.clone();
    let mut tau = 0.0;
    let mut w = grid.w0;
    if let End::At(t) = grid.end {
        if t <= 0.0 {
            return v;
        }
    }
    let build = |w: f64| -> (Vec<BlockExp>, BlockExp) {
        (gl.nodes.iter().map(|&x| BlockExp::new(sys, w * x)).collect(), BlockExp::new(sys, w))
    };
    let (mut nodes, mut step) = build(w);
    let mut peak: f64 = 0.0;
    let mut level = 0u32;
    loop {
        let mut last: f64 = 0.0;
        for _ in 0..grid.panels {
            if let End::At(t) = grid.end {
                if tau + w >= t {
                    let part = t - tau;
                    if part > 0.0 {
                        for (&x, &wt) in gl.nodes.iter().zip(&gl.weights) {
                            let val = BlockExp::new(sys, part * x).apply(&v, transposed);
                            visit(tau + part * x, wt * part, &val);
                        }
                        v = BlockExp::new(sys, part).apply(&v, transposed);
                    }
                    return v;
                }
            }
            for (j, (&x, &wt)) in gl.nodes.iter().zip(&gl.weights).enumerate() {
                let val = nodes[j].apply(&v, transposed);
                let m = val.amax();
                peak = peak.max(m);
                last = last.max(m);
                visit(tau + w * x, wt * w, &val);
            }
            v = step.apply(&v, transposed);
            tau += w;
        }
        if let End::Decay { min_tau, tol } = grid.end {
            if tau >= min_tau && last <= tol * peak {
                return v;
            }
        }
        level += 1;
        assert!(level < MAX_LEVELS, "graded grid failed to reach its end");
        w *= 2.0;
        if level % RESTART_EVERY == 0 {
            (nodes, step) = build(w);
        } else {
            for e in nodes.iter_mut() {
                e.square();
            }
            step.square();
        }
    }
}

/// Kernel values tabulated at the nodes of one graded grid.
pub(crate) struct Table {
    pub tau: Vec<f64>,
    pub weight: Vec<f64>,
    pub stride: usize,
    pub data: Vec<f64>,
}

impl Table {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.stride..(i + 1) * self.stride]
    }
}

/// `M_e(τ)` for every edge: the Q-half of `e^{τM}[0; Ha]`. `alpha` sets the
/// truncation for integrands behaving like `M^alpha`.
pub(crate) fn uniform_table(sys: &SystemMatrix, jump: &DVector<f64>, panels: usize, alpha: f64) -> Table {
    let n = sys.n_edges();
    let v0 = DMatrix::from_column_slice(2 * n, 1, jump.as_slice());
    let mut t = Table { tau: Vec::new(), weight: Vec::new(), stride: n, data: Vec::new() };
    walk(sys, &v0, false, Grid::decaying(sys, panels, alpha, EPS), |tau, w, v| {
        t.tau.push(tau);
        t.weight.push(w);
        t.data.extend(v.view((0, 0), (n, 1)).iter());
    });
    t
}

/// Per-hillslope response of edge `e`: `H_{e′} a_{e′} m(τ)_{e′,e}` for
/// every e′, the R-half of `e^{τMᵀ}[1_e; 0]` scaled by `Ha`.
pub(crate) fn edge_table(sys: &SystemMatrix, ha: &[f64], e: usize, panels: usize, alpha: f64) -> Table {
    let n = sys.n_edges();
    let mut v0 = DMatrix::zeros(2 * n, 1);
    v0[(e, 0)] = 1.0;
    let mut t = Table { tau: Vec::new(), weight: Vec::new(), stride: n, data: Vec::new() };
    walk(sys, &v0, true, Grid::decaying(sys, panels, alpha, EPS), |tau, w, v| {
        t.tau.push(tau);
        t.weight.push(w);
        t.data.extend((0..n).map(|i| v[(n + i, 0)] * ha[i]));
    });
    t
}

/// Panel counts tried by [`refine`].
pub(crate) const PANELS: [usize; 6] = [4, 8, 16, 32, 64, 128];

/// Evaluates `f(panels)` on successively finer grids until two agree to
/// `rtol`.
pub(crate) fn refine<F>(rtol: f64, mut f: F) -> Result<Complex64>
where
    F: FnMut(usize) -> Result<Complex64>,
{
    let mut prev = f(PANELS[0])?;
    for &p in &PANELS[1..] {
        let cur = f(p)?;
        if (cur - prev).norm() <= rtol * cur.norm() {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Quadrature(format!("graded grid did not settle to {rtol:e} (last value {prev})")))
}
