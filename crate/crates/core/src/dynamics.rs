//! The linear reservoir system on a tree: the block matrix, its flow map,
//! the geomorphological kernels and unit hydrographs.
//!
//! State ordering is `X = [Q; R]` with the network's canonical edge order in
//! each half.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{expm, expm_scaled};
use crate::network::{upstream_indicator, RiverNetwork};

/// Inverse residence times per edge, 1/s.
#[derive(Debug, Clone, PartialEq)]
pub struct HydraulicParams {
    pub k: Vec<f64>,
    pub h: Vec<f64>,
}

impl HydraulicParams {
    pub fn new(k: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if k.len() != h.len() {
            return Err(Error::Dimension { expected: k.len(), got: h.len() });
        }
        if let Some(bad) = k.iter().chain(&h).find(|x| !(**x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("rates must be positive and finite, got {bad}")));
        }
        Ok(Self { k, h })
    }

    /// Same rates on every edge.
    pub fn uniform(n: usize, k: f64, h: f64) -> Result<Self> {
        Self::new(vec![k; n], vec![h; n])
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// Rates of the listed edges, in that order.
    pub fn restrict(&self, edges: &[usize]) -> Self {
        Self {
            k: edges.iter().map(|&e| self.k[e]).collect(),
            h: edges.iter().map(|&e| self.h[e]).collect(),
        }
    }

    pub fn max_rate(&self) -> f64 {
        self.k.iter().chain(&self.h).copied().fold(0.0, f64::max)
    }

    pub fn min_rate(&self) -> f64 {
        self.k.iter().chain(&self.h).copied().fold(f64::INFINITY, f64::min)
    }
}

/// The 2n×2n matrix `[[−KΛ, K], [0, −H]]`.
///
/// In canonical edge order it is upper triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    n: usize,
    m: DMatrix<f64>,
    k: Vec<f64>,
    h: Vec<f64>,
}

impl SystemMatrix {
    pub fn n_edges(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Eigenvalues read off the triangular diagonal: −K then −H.
    pub fn spectrum(&self) -> Vec<f64> {
        self.m.diagonal().iter().copied().collect()
    }

    pub fn max_rate(&self) -> f64 {
        self.k.iter().chain(&self.h).copied().fold(0.0, f64::max)
    }

    pub fn min_rate(&self) -> f64 {
        self.k.iter().chain(&self.h).copied().fold(f64::INFINITY, f64::min)
    }

    /// Solves `M y = b` by back substitution.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.m
            .solve_upper_triangular(b)
            .expect("diagonal entries are strictly negative")
    }

    /// `e^{Mt}`.
    pub fn flow(&self, t: f64) -> Result<DMatrix<f64>> {
        flow_map(self, t)
    }
}

pub fn build_m(net: &RiverNetwork, params: &HydraulicParams) -> Result<SystemMatrix> {
    let n = net.len();
    if params.len() != n {
        return Err(Error::Dimension { expected: n, got: params.len() });
    }
    HydraulicParams::new(params.k.clone(), params.h.clone())?;
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for e in 0..n {
        let k = params.k[e];
        m[(e, e)] = -k;
        for &t in net.tributaries(e) {
            m[(e, t)] = k;
        }
        m[(e, n + e)] = k;
        m[(n + e, n + e)] = -params.h[e];
    }
    Ok(SystemMatrix { n, m, k: params.k.clone(), h: params.h.clone() })
}

/// `e^{Mt}` for `t ≥ 0`.
pub fn flow_map(sys: &SystemMatrix, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("flow map needs finite t >= 0, got {t}")));
    }
    Ok(expm_scaled(&sys.m, t))
}

/// The vector `[0; H a]`, the state jump of a unit-depth uniform storm.
pub fn unit_jump(net: &RiverNetwork, params: &HydraulicParams) -> DVector<f64> {
    let n = net.len();
    let mut v = DVector::zeros(2 * n);
    for e in 0..n {
        v[n + e] = params.h[e] * net.area(e);
    }
    v
}

fn tau_of_u(u: f64, h_root: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::InvalidArgument(format!("u must lie in (0, 1], got {u}")));
    }
    Ok(-u.ln() / h_root)
}

/// The n×n kernel `m(u)`: lower-left block of `exp(τ Mᵀ)` with
/// `u = e^{−H_r τ}`, i.e. the transposed upper-right block of `e^{τM}`.
pub fn m_matrix(net: &RiverNetwork, params: &HydraulicParams, u: f64) -> Result<DMatrix<f64>> {
    let sys = build_m(net, params)?;
    let tau = tau_of_u(u, params.h[0])?;
    let n = net.len();
    let phi = expm_scaled(&sys.m, tau);
    Ok(phi.view((0, n), (n, n)).transpose())
}

/// Closed form of `m(u)` when all K and all H are equal, with β = H/K:
/// `{[Λ − βI]⁻¹ [uI − u^{Λ/β}]}ᵀ`.
///
/// For β < 1 it is summed as `Σ_j c_j Nʲ` with `N = I − Λ` nilpotent and
/// `c_j = u (1−β)^{−j−1} P(Poisson(μ) > j)`, `μ = −ln u (1−β)/β`, a sum of
/// positive terms.
pub fn m_homogeneous(net: &RiverNetwork, beta: f64, u: f64) -> Result<DMatrix<f64>> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::InvalidArgument(format!("u must lie in (0, 1], got {u}")));
    }
    if ((beta - 1.0) / beta).abs() < 1e-9 {
        return Err(Error::Singular("beta coincides with the eigenvalue 1 of the incidence matrix".into()));
    }
    let n = net.len();
    let lam = net.incidence_matrix().to_f64();
    if beta < 1.0 {
        let nil = DMatrix::identity(n, n) - &lam;
        let tails = poisson_upper_tails(-u.ln() * (1.0 - beta) / beta, n);
        let mut out = DMatrix::zeros(n, n);
        let mut power = DMatrix::identity(n, n);
        for (j, tail) in tails.iter().enumerate() {
            if power.amax() == 0.0 {
                break;
            }
            if *tail > 0.0 {
                let c = (u.ln() - (j as f64 + 1.0) * (1.0 - beta).ln() + tail.ln()).exp();
                out += &power * c;
            }
            power = &power * &nil;
        }
        return Ok(out.transpose());
    }
    let shifted = &lam - DMatrix::identity(n, n) * beta;
    let power = expm(&(&lam * (u.ln() / beta)));
    let rhs = DMatrix::identity(n, n) * u - power;
    let sol = shifted
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Singular("Λ − βI".into()))?;
    Ok(sol.transpose())
}

/// `P(Poisson(μ) > j)` for `j < count`, summed downward from the far tail.
fn poisson_upper_tails(mu: f64, count: usize) -> Vec<f64> {
    if mu == 0.0 {
        return vec![0.0; count];
    }
    let kmax = (mu + 40.0 * mu.sqrt() + 60.0).max(count as f64 + 1.0) as usize;
    let mut log_pmf = Vec::with_capacity(kmax + 1);
    log_pmf.push(-mu);
    for k in 1..=kmax {
        log_pmf.push(log_pmf[k - 1] + mu.ln() - (k as f64).ln());
    }
    let mut tails = vec![0.0; kmax + 1];
    for k in (0..kmax).rev() {
        tails[k] = tails[k + 1] + log_pmf[k + 1].exp();
    }
    tails.truncate(count);
    tails
}

/// Small-β limit of the kernel: `(Λ⁻¹)ᵀ u`.
pub fn m_zero(net: &RiverNetwork, u: f64) -> DMatrix<f64> {
    upstream_indicator(net).to_f64().transpose() * u
}

/// `M_e(τ) = (e^{τM}[0; Ha])_{Q_e}` for every edge at once, the discharge
/// response at time τ to a unit-depth uniform storm.
pub fn me_at_tau(sys: &SystemMatrix, jump: &DVector<f64>, tau: f64) -> DVector<f64> {
    let n = sys.n;
    let y = expm_scaled(&sys.m, tau) * jump;
    y.rows(0, n).into_owned()
}

/// `M_e(u) = Σ_{e′} H_{e′} a_{e′} m(u)_{e′,e}` on a grid of `u ∈ [0, 1]`.
pub fn me_profile(net: &RiverNetwork, params: &HydraulicParams, e: usize, us: &[f64]) -> Result<Vec<f64>> {
    net.check_index(e)?;
    let sys = build_m(net, params)?;
    let jump = unit_jump(net, params);
    us.iter()
        .map(|&u| {
            if u == 0.0 {
                return Ok(0.0);
            }
            let tau = tau_of_u(u, params.h[0])?;
            Ok(me_at_tau(&sys, &jump, tau)[e])
        })
        .collect()
}

/// Unit hydrograph in matrix-exponential form, `e^{Mt}[0; Ha/a]`.
pub fn hydrograph_exp(net: &RiverNetwork, params: &HydraulicParams, t: f64) -> Result<DVector<f64>> {
    let sys = build_m(net, params)?;
    let phi = flow_map(&sys, t)?;
    Ok(phi * unit_jump(net, params) / net.total_area())
}

/// Unit hydrograph at edge `e` as a sum over upstream hillslopes of
/// convolved exponential travel-time densities along each flow path.
pub fn hydrograph_conv(net: &RiverNetwork, params: &HydraulicParams, e: usize, t: f64) -> Result<f64> {
    net.check_index(e)?;
    if params.len() != net.len() {
        return Err(Error::Dimension { expected: net.len(), got: params.len() });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let total = net.total_area();
    let mut sum = 0.0;
    for src in net.upstream(e) {
        let path = net.flow_path(src, e).expect("upstream edge drains through e");
        let mut rates = Vec::with_capacity(path.len() + 1);
        rates.push(params.h[src]);
        rates.extend(path.iter().map(|&p| params.k[p]));
        sum += net.area(src) / total * hypoexponential_density(&rates, t);
    }
    Ok(sum)
}

/// Relative tolerance under which two rates are treated as one repeated rate.
pub const RATE_MERGE_RTOL: f64 = 1e-9;

/// Density at `t` of a sum of independent exponentials with the given rates.
///
/// Rates equal within [`RATE_MERGE_RTOL`] are merged into a repeated pole and
/// handled by the confluent partial-fraction expansion.
pub fn hypoexponential_density(rates: &[f64], t: f64) -> f64 {
    if t <= 0.0 {
        return if rates.len() == 1 && t == 0.0 { rates[0] } else { 0.0 };
    }
    // Distinct rates with multiplicities.
    let mut poles: Vec<(f64, usize)> = Vec::new();
    for &r in rates {
        match poles.iter_mut().find(|(p, _)| ((r - *p) / p).abs() <= RATE_MERGE_RTOL) {
            Some(slot) => slot.1 += 1,
            None => poles.push((r, 1)),
        }
    }
    let log_prod: f64 = rates.iter().map(|r| r.ln()).sum();
    let mut total = 0.0;
    for (p, &(rho, k)) in poles.iter().enumerate() {
        // Taylor coefficients in ε of Π_{q≠p} (ρ_q − ρ_p + ε)^{−k_q}, to degree k−1.
        let mut g = vec![0.0; k];
        g[0] = 1.0;
        let mut base = 1.0;
        for (q, &(rq, kq)) in poles.iter().enumerate() {
            if q == p {
                continue;
            }
            let d = rq - rho;
            base /= d.powi(kq as i32);
            // (1 + ε/d)^{−kq} = Σ_m binom(kq+m−1, m) (−1/d)^m ε^m
            let mut series = vec![0.0; k];
            let mut c = 1.0;
            for (m, s) in series.iter_mut().enumerate() {
                if m > 0 {
                    c *= -((kq + m - 1) as f64) / (m as f64 * d);
                }
                *s = c;
            }
            let mut next = vec![0.0; k];
            for i in 0..k {
                for j in 0..k - i {
                    next[i + j] += g[i] * series[j];
                }
            }
            g = next;
        }
        let mut term = 0.0;
        let mut fact = 1.0;
        // j = k−1 gives t⁰/0!; walk downwards in powers of t.
        for j in (0..k).rev() {
            let power = k - 1 - j;
            if power > 0 {
                fact *= power as f64;
            }
            term += g[j] * t.powi(power as i32) / fact;
        }
        total += base * term * (-rho * t).exp();
    }
    total * log_prod.exp()
}
