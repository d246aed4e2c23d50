//! Laplace transforms of the transition and invariant laws, and their
//! numerical inversion to densities.
//!
//! With `u = e^{−H_r τ}` every integral over `u ∈ (0, 1]` becomes an
//! integral over `τ ∈ [0, ∞)`; the invariant transform reads
//! `g̃(s) = exp{−λ ∫₀^∞ (1 − f̃_Y((e^{τMᵀ}s)_R)) dτ}`, where `f̃_Y` is the
//! transform of the hillslope jump `Y = H(a∘P)` and `(·)_R` the R-half.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dynamics::{build_m, unit_jump, HydraulicParams, SystemMatrix};
use crate::error::{Error, Result};
use crate::kernel::{self, edge_table, refine, uniform_table, Grid, Table};
use crate::network::RiverNetwork;
use crate::rainfall::{cexpm1, check_invariance_condition, cln1p, MarkDistribution, RainfallModel, SpatialMode};

/// Default relative tolerance of the τ-integrals.
pub const DEFAULT_RTOL: f64 = 1e-10;

type Cache<K> = Mutex<HashMap<K, Arc<Table>>>;

/// Transforms bound to one network, parameter set and rainfall model.
pub struct TransformEvaluator {
    net: RiverNetwork,
    rain: RainfallModel,
    sys: SystemMatrix,
    jump: DVector<f64>,
    ha: Vec<f64>,
    rtol: f64,
    alpha: f64,
    uniform: Cache<usize>,
    edges: Cache<(usize, usize)>,
}

impl TransformEvaluator {
    pub fn new(net: &RiverNetwork, params: &HydraulicParams, rain: &RainfallModel) -> Result<Self> {
        if !check_invariance_condition(net, params, rain)? {
            return Err(Error::NoInvariantLaw("jump law lacks a logarithmic moment".into()));
        }
        let sys = build_m(net, params)?;
        let jump = unit_jump(net, params);
        let n = net.len();
        let ha = (0..n).map(|e| params.h[e] * net.area(e)).collect();
        // Integrands behave like (kernel)^α near zero for Pareto marks with α < 1.
        let alpha = (0..n)
            .map(|e| match *rain.mark(e) {
                MarkDistribution::Pareto { alpha, .. } => alpha.min(1.0),
                _ => 1.0,
            })
            .fold(1.0, f64::min);
        Ok(Self {
            net: net.clone(),
            rain: rain.clone(),
            sys,
            jump,
            ha,
            rtol: DEFAULT_RTOL,
            alpha,
            uniform: Mutex::new(HashMap::new()),
            edges: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    pub fn network(&self) -> &RiverNetwork {
        &self.net
    }

    pub fn rain(&self) -> &RainfallModel {
        &self.rain
    }

    fn dim(&self) -> usize {
        2 * self.net.len()
    }

    fn uniform_kernel(&self, panels: usize) -> Arc<Table> {
        let mut cache = self.uniform.lock().expect("cache lock");
        cache
            .entry(panels)
            .or_insert_with(|| Arc::new(uniform_table(&self.sys, &self.jump, panels, self.alpha)))
            .clone()
    }

    fn edge_kernel(&self, e: usize, panels: usize) -> Arc<Table> {
        let mut cache = self.edges.lock().expect("cache lock");
        cache
            .entry((e, panels))
            .or_insert_with(|| Arc::new(edge_table(&self.sys, &self.ha, e, panels, self.alpha)))
            .clone()
    }

    /// `1 − f̃_Y(v)` where `v_e` multiplies `H_e a_e P_e`; `scaled` holds
    /// `v_e H_e a_e` directly.
    fn jump_complement(&self, scaled: &[Complex64]) -> Result<Complex64> {
        match self.rain.mode {
            SpatialMode::Uniform => {
                let total: Complex64 = scaled.iter().sum();
                self.rain.marks[0].complement(total)
            }
            SpatialMode::Independent => {
                let mut log = Complex64::new(0.0, 0.0);
                for (e, z) in scaled.iter().enumerate() {
                    if *z == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    log += cln1p(-self.rain.mark(e).complement(*z)?);
                }
                Ok(-cexpm1(log))
            }
        }
    }

    fn check_s(&self, s: &[Complex64]) -> Result<()> {
        if s.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: s.len() });
        }
        if let Some(bad) = s.iter().find(|z| !(z.re >= 0.0) || !z.im.is_finite()) {
            return Err(Error::InvalidArgument(format!("transform argument needs Re >= 0, got {bad}")));
        }
        Ok(())
    }

    /// `∫ (1 − f̃_Y(...)) dτ` over `[0, end]` for the 2n-vector `s`, plus
    /// `e^{end·Mᵀ}s` at the end of the grid.
    fn state_integral(&self, s: &[Complex64], end: Option<f64>) -> Result<(Complex64, Vec<Complex64>)> {
        let n = self.net.len();
        let mut v0 = DMatrix::zeros(2 * n, 2);
        for (i, z) in s.iter().enumerate() {
            v0[(i, 0)] = z.re;
            v0[(i, 1)] = z.im;
        }
        let mut last = DMatrix::zeros(2 * n, 2);
        let mut failure = None;
        let integral = refine(self.rtol, |panels| {
            let grid = match end {
                Some(t) => Grid::new(&self.sys, panels, kernel::End::At(t)),
                None => Grid::decaying(&self.sys, panels, self.alpha, kernel::EPS),
            };
            let mut acc = Complex64::new(0.0, 0.0);
            let mut scaled = vec![Complex64::new(0.0, 0.0); n];
            last = kernel::walk(&self.sys, &v0, true, grid, |_, w, v| {
                for i in 0..n {
                    scaled[i] = Complex64::new(v[(n + i, 0)], v[(n + i, 1)]) * self.ha[i];
                }
                match self.jump_complement(&scaled) {
                    Ok(c) => acc += c * w,
                    Err(e) => failure = Some(e),
                }
            });
            match failure.take() {
                Some(e) => Err(e),
                None => Ok(acc),
            }
        })?;
        let end_vec = (0..2 * n).map(|i| Complex64::new(last[(i, 0)], last[(i, 1)])).collect();
        Ok((integral, end_vec))
    }

    /// Invariant transform `g̃(s)` at a 2n-vector `s = [s_Q; s_R]`.
    pub fn g_tilde(&self, s: &[Complex64]) -> Result<Complex64> {
        self.check_s(s)?;
        if s.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let (integral, _) = self.state_integral(s, None)?;
        Ok((-self.rain.lambda * integral).exp())
    }

    pub fn g_tilde_real(&self, s: &[f64]) -> Result<f64> {
        let s: Vec<Complex64> = s.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Ok(self.g_tilde(&s)?.re)
    }

    /// `λ ∫₀^∞ (1 − f̃(...)) dτ = −ln g̃_e(s)` for the discharge at edge `e`.
    pub fn ge_exponent(&self, e: usize, s: Complex64) -> Result<Complex64> {
        self.net.check_index(e)?;
        if !(s.re >= 0.0) || !s.im.is_finite() {
            return Err(Error::InvalidArgument(format!("transform argument needs Re >= 0, got {s}")));
        }
        if s == Complex64::new(0.0, 0.0) {
            return Ok(s);
        }
        let integral = match self.rain.mode {
            SpatialMode::Uniform => {
                let mark = &self.rain.marks[0];
                refine(self.rtol, |panels| {
                    let t = self.uniform_kernel(panels);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..t.len() {
                        acc += mark.complement(s * t.row(i)[e])? * t.weight[i];
                    }
                    Ok(acc)
                })?
            }
            SpatialMode::Independent => refine(self.rtol, |panels| {
                let t = self.edge_kernel(e, panels);
                let mut acc = Complex64::new(0.0, 0.0);
                let mut scaled = vec![Complex64::new(0.0, 0.0); self.net.len()];
                for i in 0..t.len() {
                    for (z, &m) in scaled.iter_mut().zip(t.row(i)) {
                        *z = s * m;
                    }
                    acc += self.jump_complement(&scaled)? * t.weight[i];
                }
                Ok(acc)
            })?,
        };
        Ok(self.rain.lambda * integral)
    }

    /// Invariant transform of the discharge `Q_e` alone.
    pub fn ge_tilde(&self, e: usize, s: Complex64) -> Result<Complex64> {
        Ok((-self.ge_exponent(e, s)?).exp())
    }

    pub fn ge_tilde_real(&self, e: usize, s: f64) -> Result<f64> {
        Ok(self.ge_tilde(e, Complex64::new(s, 0.0))?.re)
    }

    /// Transform of the transition law from state `x` after time `t`.
    pub fn p_tilde(&self, t: f64, x: &[f64], s: &[Complex64]) -> Result<Complex64> {
        self.check_s(s)?;
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("t must be finite and >= 0, got {t}")));
        }
        if t == 0.0 {
            let xs: Complex64 = x.iter().zip(s).map(|(a, b)| b * *a).sum();
            return Ok((-xs).exp());
        }
        let (integral, end) = self.state_integral(s, Some(t))?;
        let xs: Complex64 = x.iter().zip(&end).map(|(a, b)| b * *a).sum();
        Ok((-xs - self.rain.lambda * integral).exp())
    }

    /// Inverted invariant density of `Q_e` on a grid of positive discharges
    /// (m³/s), by Euler-summed Fourier series. Refused for Pareto marks.
    pub fn density_profile(&self, e: usize, xs: &[f64]) -> Result<Inversion> {
        self.net.check_index(e)?;
        if self.rain.marks.iter().any(|m| !m.supports_complex()) {
            return Err(Error::Unsupported("density inversion needs complex transforms; not offered for Pareto marks".into()));
        }
        inversion_gate()?;
        invert_density_euler(|s| self.ge_tilde(e, s), xs)
    }
}

/// Zakian's pole/weight pairs, one from each conjugate pair.
#[derive(Debug, Clone)]
pub struct ZakianConstants {
    pub alpha: Vec<Complex64>,
    pub k: Vec<Complex64>,
}

pub fn zakian_constants() -> &'static ZakianConstants {
    static C: OnceLock<ZakianConstants> = OnceLock::new();
    C.get_or_init(|| {
        let text = include_str!("../data/zakian_n5.txt");
        let mut c = ZakianConstants { alpha: Vec::new(), k: Vec::new() };
        for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
            let v: Vec<f64> = line.split_whitespace().map(|x| x.parse().expect("numeric constant")).collect();
            c.alpha.push(Complex64::new(v[0], v[1]));
            c.k.push(Complex64::new(v[2], v[3]));
        }
        assert_eq!(c.alpha.len(), 5, "five constant pairs");
        c
    })
}

/// Inverted density values. `clipped` counts negative outputs set to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub values: Vec<f64>,
    pub clipped: usize,
}

/// Zakian inversion `f(x) ≈ (2/x) Σ Re[K_i F(α_i/x)]` at each `x > 0`.
pub fn invert_density<F>(mut f: F, xs: &[f64]) -> Result<Inversion>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let c = zakian_constants();
    let mut out = Inversion { values: Vec::with_capacity(xs.len()), clipped: 0 };
    for &x in xs {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::InvalidArgument(format!("inversion points must be positive, got {x}")));
        }
        let mut sum = 0.0;
        for (a, k) in c.alpha.iter().zip(&c.k) {
            sum += (k * f(a / x)?).re;
        }
        let v = 2.0 * sum / x;
        if v < 0.0 {
            out.clipped += 1;
            out.values.push(0.0);
        } else {
            out.values.push(v);
        }
    }
    Ok(out)
}

/// Worst relative error of the three analytic gate pairs:
/// `1/s ↔ 1` on [0.1, 10], `1/(s+1) ↔ e^{−x}` on [0.1, 5], `1/s² ↔ x` on [0.1, 10].
pub fn zakian_gate_error() -> f64 {
    gate_error(|f, xs| invert_density(|s| Ok(f(s)), xs).expect("analytic transforms"))
}

fn gate_error(invert: impl Fn(fn(Complex64) -> Complex64, &[f64]) -> Inversion) -> f64 {
    let grid = |lo: f64, hi: f64| -> Vec<f64> { (0..=50).map(|i| lo + (hi - lo) * i as f64 / 50.0).collect() };
    let pairs: [(fn(Complex64) -> Complex64, fn(f64) -> f64, f64, f64); 3] = [
        (|s| 1.0 / s, |_| 1.0, 0.1, 10.0),
        (|s| 1.0 / (s + 1.0), |x| (-x).exp(), 0.1, 5.0),
        (|s| 1.0 / (s * s), |x| x, 0.1, 10.0),
    ];
    let mut worst: f64 = 0.0;
    for (f, exact, lo, hi) in pairs {
        let xs = grid(lo, hi);
        let inv = invert(f, &xs);
        for (x, v) in xs.iter().zip(&inv.values) {
            worst = worst.max(((v - exact(*x)) / exact(*x)).abs());
        }
    }
    worst
}

/// Refuses density work unless the inversion constants pass the gate.
pub fn zakian_gate() -> Result<()> {
    static GATE: OnceLock<f64> = OnceLock::new();
    let err = *GATE.get_or_init(zakian_gate_error);
    if err <= 1e-4 {
        Ok(())
    } else {
        Err(Error::Quadrature(format!("Zakian constants fail the analytic gate (error {err:e})")))
    }
}

/// Bromwich-line offset: discretisation error about `e^{−A}`.
pub const EULER_A: f64 = 18.4;
/// Initial number of partial sums before binomial averaging.
pub const EULER_N: usize = 24;
/// Binomial averaging depth.
pub const EULER_M: usize = 12;
/// Cap on the partial-sum count.
pub const EULER_N_MAX: usize = 3072;

/// Abate–Whitt Euler inversion on the line `Re s = A/(2x)`:
/// `f(x) ≈ (e^{A/2}/x)[F(A/2x)/2 + Σ_k (−1)^k Re F((A + 2kπi)/2x)]`, with the
/// alternating tail averaged binomially over partial sums `N..N+M`.
///
/// `N` doubles until two estimates agree to `1e−9` relative or `1e−10/x`
/// absolute, so narrow densities far from their mode get more terms.
pub fn invert_density_euler<F>(mut f: F, xs: &[f64]) -> Result<Inversion>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let weights: Vec<f64> = {
        let mut w = vec![1.0; EULER_M + 1];
        for j in 1..=EULER_M {
            w[j] = w[j - 1] * (EULER_M + 1 - j) as f64 / j as f64;
        }
        let scale = 0.5f64.powi(EULER_M as i32);
        w.iter().map(|v| v * scale).collect()
    };
    let mut out = Inversion { values: Vec::with_capacity(xs.len()), clipped: 0 };
    for &x in xs {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::InvalidArgument(format!("inversion points must be positive, got {x}")));
        }
        let pre = (EULER_A / 2.0).exp() / x;
        // partial[k] is the alternating sum through term k.
        let mut partial = vec![0.5 * f(Complex64::new(EULER_A / (2.0 * x), 0.0))?.re];
        let mut extend = |partial: &mut Vec<f64>, upto: usize| -> Result<()> {
            for k in partial.len()..=upto {
                let s = Complex64::new(EULER_A, 2.0 * std::f64::consts::PI * k as f64) / (2.0 * x);
                let term = f(s)?.re;
                let last = partial[k - 1];
                partial.push(if k % 2 == 0 { last + term } else { last - term });
            }
            Ok(())
        };
        let estimate = |partial: &[f64], n: usize| -> f64 {
            pre * weights.iter().zip(&partial[n..=n + EULER_M]).map(|(w, s)| w * s).sum::<f64>()
        };
        let mut n = EULER_N;
        extend(&mut partial, n + EULER_M)?;
        let mut v = estimate(&partial, n);
        while n < EULER_N_MAX {
            n *= 2;
            extend(&mut partial, n + EULER_M)?;
            let next = estimate(&partial, n);
            let settled = (next - v).abs() <= 1e-9 * next.abs() + 1e-10 / x;
            v = next;
            if settled {
                break;
            }
        }
        if v < 0.0 {
            out.clipped += 1;
            out.values.push(0.0);
        } else {
            out.values.push(v);
        }
    }
    Ok(out)
}

/// [`zakian_gate_error`] for the Euler inverter.
pub fn euler_gate_error() -> f64 {
    gate_error(|f, xs| invert_density_euler(|s| Ok(f(s)), xs).expect("analytic transforms"))
}

/// Refuses density work unless both inverters pass the analytic gate.
pub fn inversion_gate() -> Result<()> {
    zakian_gate()?;
    static GATE: OnceLock<f64> = OnceLock::new();
    let err = *GATE.get_or_init(euler_gate_error);
    if err <= 1e-4 {
        Ok(())
    } else {
        Err(Error::Quadrature(format!("Euler inversion fails the analytic gate (error {err:e})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_network_file;
    use crate::quadrature;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn single(k: f64, h: f64, mark: MarkDistribution) -> TransformEvaluator {
        let net = RiverNetwork::single("r", 1.0).unwrap();
        let p = HydraulicParams::new(vec![k], vec![h]).unwrap();
        let rain = RainfallModel::uniform(0.5, mark).unwrap();
        TransformEvaluator::new(&net, &p, &rain).unwrap()
    }

    fn three(mode: SpatialMode) -> (RiverNetwork, HydraulicParams, RainfallModel) {
        let f = parse_network_file("edge r - 1e-6 2 0.5\nedge a r 2e-6 1.5 0.3\nedge b r 5e-7 3 0.1").unwrap();
        let mark = MarkDistribution::Exponential { sigma: 2.0 };
        let rain = match mode {
            SpatialMode::Uniform => RainfallModel::uniform(0.8, mark).unwrap(),
            SpatialMode::Independent => RainfallModel::independent(
                0.8,
                vec![mark, MarkDistribution::Gamma { shape: 2.0, scale: 0.3 }, MarkDistribution::Deterministic { depth: 0.4 }],
            )
            .unwrap(),
        };
        // Rates per second of order one keep the test fast and well scaled.
        let p = HydraulicParams::new(vec![2.0, 1.5, 3.0], vec![0.5, 0.3, 0.1]).unwrap();
        (f.network, p, rain)
    }

    #[test]
    fn zakian_pairs() {
        let err = zakian_gate_error();
        assert!(err < 1e-4, "{err}");
        assert!(zakian_gate().is_ok());
        assert!(invert_density(|s| Ok(1.0 / s), &[0.0]).is_err());
        assert!(euler_gate_error() < 1e-6);
        assert!(inversion_gate().is_ok());
    }

    #[test]
    fn euler_resolves_narrow_gamma() {
        // Gamma(100, 1/100): mean 1, CV 0.1; the 5-term rule rings here. The
        // floor is the e^{−A} aliasing term.
        let shape = 100.0;
        let f = |s: Complex64| Ok((1.0 + s / shape).powf(-shape));
        let xs: Vec<f64> = (1..=300).map(|i| i as f64 * 0.01).collect();
        let inv = invert_density_euler(f, &xs).unwrap();
        let ln_norm = shape * shape.ln() - statrs::function::gamma::ln_gamma(shape);
        let peak = (ln_norm + (shape - 1.0) * (1.0 - 1.0 / shape).ln() - (shape - 1.0)).exp();
        for (x, v) in xs.iter().zip(&inv.values) {
            let exact = (ln_norm + (shape - 1.0) * x.ln() - shape * x).exp();
            assert!((v - exact).abs() < 2e-8 * peak, "x={x}: {v} vs {exact}");
        }
    }

    #[test]
    fn normalisation() {
        for mode in [SpatialMode::Uniform, SpatialMode::Independent] {
            let (net, p, rain) = three(mode);
            let ev = TransformEvaluator::new(&net, &p, &rain).unwrap();
            assert_eq!(ev.g_tilde(&[c(0.0); 6]).unwrap(), c(1.0));
            assert_eq!(ev.ge_tilde(1, c(0.0)).unwrap(), c(1.0));
            assert_eq!(ev.p_tilde(3.0, &[1.0; 6], &[c(0.0); 6]).unwrap(), c(1.0));
        }
    }

    #[test]
    fn single_edge_deterministic_against_u_space() {
        let (k, h, d) = (2.0, 0.7, 0.3);
        let ev = single(k, h, MarkDistribution::Deterministic { depth: d });
        for &s in &[0.1, 1.0, 10.0, 300.0] {
            let got = -ev.ge_tilde_real(0, s).unwrap().ln();
            // (λ/H) ∫₀¹ (1 − e^{−s d H a K (u − u^{K/H})/(K−H)}) du/u
            let amp = s * d * h * k / (k - h);
            let want = 0.5 / h
                * quadrature::adaptive(|u| -(-amp * (u - u.powf(k / h))).exp_m1() / u, 0.0, 1.0, 1e-13, 0.0)
                    .unwrap();
            assert!(((got - want) / want).abs() < 1e-10, "s={s}: {got} vs {want}");
        }
    }

    #[test]
    fn root_marginal_is_projection() {
        for mode in [SpatialMode::Uniform, SpatialMode::Independent] {
            let (net, p, rain) = three(mode);
            let ev = TransformEvaluator::new(&net, &p, &rain).unwrap();
            for &s in &[0.05, 0.7, 4.0] {
                for e in 0..3 {
                    let mut v = vec![c(0.0); 6];
                    v[e] = c(s);
                    let a = ev.g_tilde(&v).unwrap();
                    let b = ev.ge_tilde(e, c(s)).unwrap();
                    assert!((a - b).norm() < 1e-10 * b.norm(), "{mode:?} e={e} s={s}: {a} vs {b}");
                }
            }
            // Complex arguments too.
            let z = Complex64::new(0.3, 2.0);
            let mut v = vec![c(0.0); 6];
            v[0] = z;
            assert!((ev.g_tilde(&v).unwrap() - ev.ge_tilde(0, z).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn mean_from_log_derivative() {
        for mode in [SpatialMode::Uniform, SpatialMode::Independent] {
            let (net, p, rain) = three(mode);
            let ev = TransformEvaluator::new(&net, &p, &rain).unwrap();
            for e in 0..3 {
                let want: f64 = net.upstream(e).iter().map(|&i| rain.lambda * net.area(i) * rain.mark(i).mean()).sum();
                let h = 1e-5 / want;
                let l = |s: f64| ev.ge_exponent(e, c(s)).unwrap().re;
                let slope = (4.0 * l(h) - l(2.0 * h)) / (2.0 * h);
                assert!(((slope - want) / want).abs() < 1e-7, "{mode:?} e={e}: {slope} vs {want}");
            }
        }
    }

    #[test]
    fn decreasing_and_log_convex() {
        let (net, p, rain) = three(SpatialMode::Uniform);
        let ev = TransformEvaluator::new(&net, &p, &rain).unwrap();
        let s: Vec<f64> = (0..30).map(|i| 0.01 * 1.3f64.powi(i)).collect();
        let lg: Vec<f64> = s.iter().map(|&x| -ev.ge_exponent(0, c(x)).unwrap().re).collect();
        for w in lg.windows(2) {
            assert!(w[1] < w[0]);
        }
        for i in 1..s.len() - 1 {
            let t = (s[i] - s[i - 1]) / (s[i + 1] - s[i - 1]);
            assert!(lg[i] <= lg[i - 1] + t * (lg[i + 1] - lg[i - 1]) + 1e-12);
        }
    }

    #[test]
    fn transition_limits() {
        let (net, p, rain) = three(SpatialMode::Uniform);
        let ev = TransformEvaluator::new(&net, &p, &rain).unwrap();
        let x = [0.3, 0.1, 0.2, 0.05, 0.4, 0.0];
        let s: Vec<Complex64> = [0.5, 0.0, 1.0, 0.2, 0.0, 0.3].iter().map(|&v| c(v)).collect();
        let at0 = ev.p_tilde(0.0, &x, &s).unwrap();
        let want = (-x.iter().zip(&s).map(|(a, b)| a * b.re).sum::<f64>()).exp();
        assert!((at0.re - want).abs() < 1e-15);
        let kappa = 0.1f64.min(0.8);
        let far = ev.p_tilde(50.0 / kappa, &x, &s).unwrap();
        let g = ev.g_tilde(&s).unwrap();
        assert!((far - g).norm() < 1e-6, "{far} vs {g}");
        // At intermediate t it lies strictly between the two.
        let mid = ev.p_tilde(1.0, &x, &s).unwrap().re;
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn density_of_single_link_normalised() {
        let ev = single(2.0, 0.5, MarkDistribution::Exponential { sigma: 1.0 });
        // Mean discharge λ a E P = 0.5.
        let mean = 0.5;
        let n = 400;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * 10.0 * mean / n as f64).collect();
        let inv = ev.density_profile(0, &xs).unwrap();
        let dx = 10.0 * mean / n as f64;
        let mass: f64 = inv.values.iter().sum::<f64>() * dx;
        let first: f64 = inv.values.iter().zip(&xs).map(|(f, x)| f * x).sum::<f64>() * dx;
        assert!((mass - 1.0).abs() < 0.01, "{mass}");
        assert!((first / mean - 1.0).abs() < 0.02, "{first}");
    }

    #[test]
    fn pareto_density_refused() {
        let ev = single(2.0, 0.5, MarkDistribution::Pareto { alpha: 0.5, k: 1.0 });
        assert!(matches!(ev.density_profile(0, &[1.0]), Err(Error::Unsupported(_))));
        // Real-axis transforms still work.
        let g = ev.ge_tilde_real(0, 0.1).unwrap();
        assert!(g > 0.0 && g < 1.0);
    }
}
