//! Invariant moments of discharge and tail asymptotics.
//!
//! With `M_e(τ)` the discharge response at edge e to a unit uniform storm,
//! the geomorphological coefficients are
//! `c_α = H_r ∫₀^∞ (M_e(τ)/(K_r a))^α dτ` and the invariant moments are
//! `E Qⁿ = (a K_r)ⁿ Σ_k (λ/H_r)^k B_{n,k}(m₁c₁, m₂c₂, …)` with `m_i` the mark
//! moments and `B_{n,k}` the partial Bell polynomials. For edges other than
//! the root the same normalisation `(a K_r, H_r)` is kept and `M_e` supplies
//! the edge's response.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::dynamics::{build_m, me_at_tau, unit_jump, HydraulicParams, SystemMatrix};
use crate::error::{Error, Result};
use crate::kernel::{refine, uniform_table};
use crate::network::RiverNetwork;
use crate::rainfall::{MarkDistribution, RainfallModel, SpatialMode};

/// Partial Bell polynomial `B_{n,k}(x₁, …, x_{n−k+1})`.
///
/// Sums `n!/(Π j_i! (i!)^{j_i}) Π x_i^{j_i}` over index vectors with
/// `Σ j_i = k` and `Σ i j_i = n`.
pub fn bell_polynomial(n: usize, k: usize, x: &[f64]) -> Result<f64> {
    if k < 1 || k > n {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= n, got n={n}, k={k}")));
    }
    let len = n - k + 1;
    if x.len() < len {
        return Err(Error::Dimension { expected: len, got: x.len() });
    }
    if n > 30 {
        return Err(Error::InvalidArgument("Bell polynomial order above 30 overflows exact coefficients".into()));
    }
    let fact: Vec<u128> = (0..=n as u128).scan(1u128, |f, i| {
        if i > 0 {
            *f *= i;
        }
        Some(*f)
    }).collect();
    let mut total = 0.0;
    let mut j = vec![0usize; len + 1];
    // Depth-first over i = len, len−1, …, 1 with the remaining parts and weight.
    fn dfs(i: usize, parts: usize, weight: usize, j: &mut [usize], x: &[f64], fact: &[u128], n: usize, total: &mut f64) {
        if i == 0 {
            if parts == 0 && weight == 0 {
                let mut denom: u128 = 1;
                let mut prod = 1.0;
                for (idx, &ji) in j.iter().enumerate().skip(1) {
                    if ji == 0 {
                        continue;
                    }
                    denom *= fact[ji] * fact[idx].pow(ji as u32);
                    prod *= x[idx - 1].powi(ji as i32);
                }
                *total += (fact[n] / denom) as f64 * prod;
            }
            return;
        }
        let max = parts.min(weight / i);
        for ji in 0..=max {
            j[i] = ji;
            dfs(i - 1, parts - ji, weight - i * ji, j, x, fact, n, total);
        }
        j[i] = 0;
    }
    dfs(len, k, n, &mut j, x, &fact, n, &mut total);
    Ok(total)
}

fn root_scale(net: &RiverNetwork, params: &HydraulicParams) -> f64 {
    params.k[0] * net.total_area()
}

fn check(net: &RiverNetwork, params: &HydraulicParams, e: usize) -> Result<SystemMatrix> {
    net.check_index(e)?;
    build_m(net, params)
}

/// `c_α` for edge `e`, by adaptive quadrature over the graded τ-grid.
pub fn c_coefficient(net: &RiverNetwork, params: &HydraulicParams, e: usize, alpha: f64) -> Result<f64> {
    Ok(c_coefficients(net, params, e, &[alpha])?[0])
}

/// `c_α` for several exponents at once (one kernel tabulation).
pub fn c_coefficients(net: &RiverNetwork, params: &HydraulicParams, e: usize, alphas: &[f64]) -> Result<Vec<f64>> {
    let sys = check(net, params, e)?;
    if let Some(bad) = alphas.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {bad}")));
    }
    let jump = unit_jump(net, params);
    let scale = root_scale(net, params);
    let amin = alphas.iter().copied().fold(1.0, f64::min);
    alphas
        .iter()
        .map(|&alpha| {
            let v = refine(1e-11, |panels| {
                let t = uniform_table(&sys, &jump, panels, amin);
                let mut acc = 0.0;
                for i in 0..t.len() {
                    let m = t.row(i)[e].max(0.0) / scale;
                    acc += t.weight[i] * m.powf(alpha);
                }
                Ok(Complex64::new(acc, 0.0))
            })?;
            Ok(params.h[0] * v.re)
        })
        .collect()
}

/// `c₁ = (H_r/K_r)(a_{Γ_e}/a)` in closed form: `∫₀^∞ M_e dτ` is the volume
/// of a unit storm on the subnetwork draining through e.
pub fn c_one(net: &RiverNetwork, params: &HydraulicParams, e: usize) -> Result<f64> {
    net.check_index(e)?;
    Ok(params.h[0] / params.k[0] * net.upstream_area(e) / net.total_area())
}

/// Invariant moments `E Q_eⁿ` for `n = 1..=n_max`, with their coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub edge_id: String,
    pub n_max: usize,
    /// `values[n−1] = E Qⁿ` in (m³/s)ⁿ; `+∞` where the mark moment diverges.
    pub values: Vec<f64>,
    /// `c[i−1] = c_i`.
    pub c: Vec<f64>,
}

pub fn moment_table(
    net: &RiverNetwork,
    params: &HydraulicParams,
    rain: &RainfallModel,
    e: usize,
    n_max: usize,
) -> Result<MomentTable> {
    net.check_index(e)?;
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    if rain.mode != SpatialMode::Uniform {
        return Err(Error::Unsupported("moments are implemented for spatially uniform rain".into()));
    }
    rain.check_network(net)?;
    let mark = rain.marks[0];
    let mut c = vec![c_one(net, params, e)?];
    if n_max >= 2 {
        let alphas: Vec<f64> = (2..=n_max).map(|i| i as f64).collect();
        c.extend(c_coefficients(net, params, e, &alphas)?);
    }
    let ratio = rain.lambda / params.h[0];
    let scale = root_scale(net, params);
    let mut values = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        if !mark.moment(n as u32).is_finite() {
            values.push(f64::INFINITY);
            continue;
        }
        let x: Vec<f64> = (1..=n).map(|i| mark.moment(i as u32) * c[i - 1]).collect();
        let mut sum = 0.0;
        for k in 1..=n {
            sum += ratio.powi(k as i32) * bell_polynomial(n, k, &x)?;
        }
        values.push(scale.powi(n as i32) * sum);
    }
    Ok(MomentTable { edge_id: net.edge(e).id.clone(), n_max, values, c })
}

/// `E Q_eⁿ`; `+∞` when the marks lack an n-th moment.
pub fn moment_n(net: &RiverNetwork, params: &HydraulicParams, rain: &RainfallModel, e: usize, n: usize) -> Result<f64> {
    Ok(moment_table(net, params, rain, e, n)?.values[n - 1])
}

/// Pareto tail `P(Q_e > x) ~ C x^{−α}`: returns `(C, α)` with
/// `C = λ (k a K_r)^α c_α / H_r`.
pub fn pareto_tail(net: &RiverNetwork, params: &HydraulicParams, rain: &RainfallModel, e: usize) -> Result<(f64, f64)> {
    if rain.mode != SpatialMode::Uniform {
        return Err(Error::Unsupported("tail constants are implemented for spatially uniform rain".into()));
    }
    let MarkDistribution::Pareto { alpha, k } = rain.marks[0] else {
        return Err(Error::InvalidArgument("Pareto tail needs Pareto marks".into()));
    };
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("Pareto tail needs 0 < alpha < 1, got {alpha}")));
    }
    let c = c_coefficient(net, params, e, alpha)?;
    let coeff = rain.lambda * (k * root_scale(net, params)).powf(alpha) * c / params.h[0];
    Ok((coeff, alpha))
}

/// Exponential tail `log P(Q_e > x) ~ −(σ/M_e*) x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTail {
    /// σ/M_e*, s/m³.
    pub rate: f64,
    /// Peak of `M_e(u)` over `u ∈ [0, 1]`.
    pub m_star: f64,
    pub u_star: f64,
}

/// Scan resolution of `u ∈ [0, 1]`.
pub const PEAK_SCAN_POINTS: usize = 1024;

/// Peak of `M_e(u)` for each listed edge: a uniform scan in `u` followed by
/// golden-section refinement to 1e−10 in `u`.
pub fn me_peaks(net: &RiverNetwork, params: &HydraulicParams, edges: &[usize]) -> Result<Vec<(f64, f64)>> {
    let sys = build_m(net, params)?;
    for &e in edges {
        net.check_index(e)?;
    }
    let jump = unit_jump(net, params);
    let hr = params.h[0];
    let eval = |u: f64| -> DVector<f64> {
        if u <= 0.0 || u >= 1.0 {
            return DVector::zeros(net.len());
        }
        me_at_tau(&sys, &jump, -u.ln() / hr)
    };
    let grid: Vec<DVector<f64>> = (0..=PEAK_SCAN_POINTS).map(|i| eval(i as f64 / PEAK_SCAN_POINTS as f64)).collect();
    let h = 1.0 / PEAK_SCAN_POINTS as f64;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut out = Vec::with_capacity(edges.len());
    for &e in edges {
        let best = (0..=PEAK_SCAN_POINTS)
            .max_by(|&a, &b| grid[a][e].total_cmp(&grid[b][e]))
            .expect("non-empty scan");
        let f = |u: f64| eval(u)[e];
        let (mut a, mut b) = (((best as f64) - 1.0).max(0.0) * h, ((best as f64) + 1.0).min(PEAK_SCAN_POINTS as f64) * h);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        while b - a > 1e-10 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = f(d);
            }
        }
        let u = 0.5 * (a + b);
        let mut m = f(u);
        let mut u_star = u;
        if grid[best][e] > m {
            m = grid[best][e];
            u_star = best as f64 * h;
        }
        out.push((m, u_star));
    }
    Ok(out)
}

pub fn exp_tail_rate(net: &RiverNetwork, params: &HydraulicParams, rain: &RainfallModel, e: usize) -> Result<ExpTail> {
    Ok(exp_tail_rates(net, params, rain, &[e])?[0])
}

/// [`exp_tail_rate`] for several edges sharing one scan.
pub fn exp_tail_rates(net: &RiverNetwork, params: &HydraulicParams, rain: &RainfallModel, edges: &[usize]) -> Result<Vec<ExpTail>> {
    if rain.mode != SpatialMode::Uniform {
        return Err(Error::Unsupported("tail rates are implemented for spatially uniform rain".into()));
    }
    let MarkDistribution::Exponential { sigma } = rain.marks[0] else {
        return Err(Error::InvalidArgument("exponential tail needs exponential marks".into()));
    };
    Ok(me_peaks(net, params, edges)?
        .into_iter()
        .map(|(m_star, u_star)| ExpTail { rate: sigma / m_star, m_star, u_star })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariant::TransformEvaluator;
    use crate::network::{generate_network, parse_network_file};
    use crate::pdmp_sim::invariant_mean;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_bell(n: usize, k: usize, x: &[f64]) -> f64 {
        // Recursion B_{n,k} = Σ_i C(n−1, i−1) x_i B_{n−i,k−1}.
        if n == 0 && k == 0 {
            return 1.0;
        }
        if n == 0 || k == 0 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 1..=n - k + 1 {
            let mut binom = 1.0;
            for j in 0..i - 1 {
                binom = binom * (n - 1 - j) as f64 / (j + 1) as f64;
            }
            s += binom * x[i - 1] * brute_bell(n - i, k - 1, x);
        }
        s
    }

    #[test]
    fn bell_examples() {
        let x = [1.3, -0.7, 2.1, 0.4, 1.9, -1.1, 0.8, 0.3, 1.7, 0.9];
        for n in 1..=10 {
            assert!((bell_polynomial(n, 1, &x).unwrap() - x[n - 1]).abs() < 1e-12);
            assert!((bell_polynomial(n, n, &x).unwrap() - x[0].powi(n as i32)).abs() < 1e-9);
            for k in 1..=n {
                let a = bell_polynomial(n, k, &x).unwrap();
                let b = brute_bell(n, k, &x);
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "n={n} k={k}: {a} vs {b}");
            }
        }
        assert_eq!(bell_polynomial(3, 2, &[2.0, 5.0]).unwrap(), 30.0);
        assert!(bell_polynomial(3, 0, &x).is_err());
        assert!(bell_polynomial(3, 4, &x).is_err());
        // All-ones arguments give Stirling numbers of the second kind.
        assert_eq!(bell_polynomial(10, 3, &[1.0; 8]).unwrap(), 9330.0);
    }

    fn single(k: f64, h: f64) -> (RiverNetwork, HydraulicParams) {
        (RiverNetwork::single("r", 1.0).unwrap(), HydraulicParams::new(vec![k], vec![h]).unwrap())
    }

    #[test]
    fn c_single_edge_closed_forms() {
        let (net, p) = single(2.0, 1.0);
        assert!((c_coefficient(&net, &p, 0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        for &(k, h) in &[(2.0, 1.0), (1.0, 0.01), (3.0, 2.5)] {
            let (net, p) = single(k, h);
            let integral = 1.0 / (2.0 * h) - 2.0 / (h + k) + 1.0 / (2.0 * k);
            let want = h * h * h / (k - h).powi(2) * integral;
            let got = c_coefficient(&net, &p, 0, 2.0).unwrap();
            assert!(((got - want) / want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn c_one_identity_on_random_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..8 {
            let order = rng.random_range(1..4);
            let net = generate_network(order, &mut rng, 1.0).unwrap();
            let n = net.len();
            let k: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..3.0)).collect();
            let h: Vec<f64> = (0..n).map(|_| k[0] * rng.random_range(1e-3..1.0)).collect();
            let p = HydraulicParams::new(k, h).unwrap();
            for e in 0..n {
                let got = c_coefficient(&net, &p, e, 1.0).unwrap();
                let want = c_one(&net, &p, e).unwrap();
                assert!(((got - want) / want).abs() < 1e-9, "e={e}: {got} vs {want}");
            }
        }
    }

    fn romberg<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, levels: usize) -> f64 {
        let mut r = vec![vec![0.0; levels]; levels];
        r[0][0] = 0.5 * (b - a) * (f(a) + f(b));
        for i in 1..levels {
            let n = 1usize << (i - 1);
            let h = (b - a) / (2 * n) as f64;
            let s: f64 = (0..n).map(|j| f(a + (2 * j + 1) as f64 * h)).sum();
            r[i][0] = 0.5 * r[i - 1][0] + h * s;
            for j in 1..=i {
                let p = 4f64.powi(j as i32);
                r[i][j] = (p * r[i][j - 1] - r[i - 1][j - 1]) / (p - 1.0);
            }
        }
        r[levels - 1][levels - 1]
    }

    #[test]
    fn c_half_against_romberg() {
        let (k, h) = (2.0, 0.3);
        let (net, p) = single(k, h);
        let alpha = 0.5;
        // u = v^{1/α} removes the u^{α−1} endpoint singularity.
        let integrand = |v: f64| {
            if v == 0.0 {
                return (h / (k - h)).powf(alpha) / alpha;
            }
            let u = v.powf(1.0 / alpha);
            let beta_m = h * (u - u.powf(k / h)) / (k - h);
            beta_m.powf(alpha) / (alpha * v)
        };
        let want = romberg(integrand, 0.0, 1.0, 15);
        let got = c_coefficient(&net, &p, 0, alpha).unwrap();
        assert!(((got - want) / want).abs() < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn first_moment_is_mean() {
        let f = parse_network_file("edge r - 0.6 2 0.01\nedge a r 0.6 1.5 0.02\nedge b r 0.6 1 0.005").unwrap();
        let rain = RainfallModel::uniform(1e-5, MarkDistribution::exponential_mean(0.005).unwrap()).unwrap();
        let mean = invariant_mean(&f.network, &f.params, &rain).unwrap();
        for e in 0..3 {
            let m1 = moment_n(&f.network, &f.params, &rain, e, 1).unwrap();
            assert!(((m1 - mean[e]) / mean[e]).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_positive_jensen_lyapunov() {
        let f = parse_network_file("edge r - 0.6 2 0.1\nedge a r 0.6 1.5 0.2\nedge b r 0.6 1 0.05").unwrap();
        let rain = RainfallModel::uniform(1e-4, MarkDistribution::exponential_mean(0.005).unwrap()).unwrap();
        let t = moment_table(&f.network, &f.params, &rain, 0, 10).unwrap();
        assert!(t.values.iter().all(|&v| v > 0.0 && v.is_finite()));
        assert!(t.values[1] >= t.values[0].powi(2));
        for n in 1..9 {
            assert!(t.values[n].powi(2) <= t.values[n - 1] * t.values[n + 1] * (1.0 + 1e-12));
        }
        let heavy = RainfallModel::uniform(1e-4, MarkDistribution::Pareto { alpha: 2.5, k: 0.001 }).unwrap();
        let t = moment_table(&f.network, &f.params, &heavy, 0, 3).unwrap();
        assert!(t.values[1].is_finite() && t.values[2].is_infinite());
    }

    #[test]
    fn second_moment_against_transform() {
        let (net, p) = single(2.0, 0.3);
        let rain = RainfallModel::uniform(0.2, MarkDistribution::Exponential { sigma: 1.5 }).unwrap();
        let ev = TransformEvaluator::new(&net, &p, &rain).unwrap();
        let m1 = moment_n(&net, &p, &rain, 0, 1).unwrap();
        let m2 = moment_n(&net, &p, &rain, 0, 2).unwrap();
        // −ln g̃ = κ₁ s − κ₂ s²/2 + O(s⁴); a cubic fit through the origin.
        let l = |s: f64| ev.ge_exponent(0, Complex64::new(s, 0.0)).unwrap().re;
        let h = 1e-2 / m1;
        let k2 = -(4.0 * l(2.0 * h) - 5.0 * l(h) - l(3.0 * h)) / (h * h);
        let var = m2 - m1 * m1;
        assert!(((k2 - var) / var).abs() < 1e-3, "{k2} vs {var}");
    }

    #[test]
    fn pareto_tail_scaling() {
        let (net, p) = single(2.0, 0.3);
        let r1 = RainfallModel::uniform(0.2, MarkDistribution::Pareto { alpha: 0.5, k: 1.0 }).unwrap();
        let r2 = RainfallModel::uniform(0.2, MarkDistribution::Pareto { alpha: 0.5, k: 2.0 }).unwrap();
        let (c1, a) = pareto_tail(&net, &p, &r1, 0).unwrap();
        let (c2, _) = pareto_tail(&net, &p, &r2, 0).unwrap();
        assert_eq!(a, 0.5);
        assert!((c2 / c1 - 2f64.sqrt()).abs() < 1e-12);
        let bad = RainfallModel::uniform(0.2, MarkDistribution::Pareto { alpha: 1.5, k: 1.0 }).unwrap();
        assert!(pareto_tail(&net, &p, &bad, 0).is_err());
    }

    #[test]
    fn exp_tail_single_edge() {
        let (net, p) = single(2.0, 1.0);
        let a = net.total_area();
        let rain = RainfallModel::uniform(0.1, MarkDistribution::Exponential { sigma: 3.0 }).unwrap();
        let t = exp_tail_rate(&net, &p, &rain, 0).unwrap();
        assert!((t.m_star - 0.5 * a).abs() < 1e-8);
        assert!((t.u_star - 0.5).abs() < 1e-6);
        assert!((t.rate - 2.0 * 3.0 / a).abs() < 1e-8);
    }

    #[test]
    fn exp_tail_symmetric_leaves() {
        let f = parse_network_file("edge r - 1 2 0.5\nedge a r 1 2 0.5\nedge b r 1 2 0.5").unwrap();
        let rain = RainfallModel::uniform(0.1, MarkDistribution::Exponential { sigma: 3.0 }).unwrap();
        let t = exp_tail_rates(&f.network, &f.params, &rain, &[0, 1, 2]).unwrap();
        assert!((t[1].m_star - t[2].m_star).abs() < 1e-12 * t[1].m_star);
        for x in &t {
            assert!(x.m_star > 0.0 && x.u_star > 0.0 && x.u_star < 1.0);
        }
    }
}
