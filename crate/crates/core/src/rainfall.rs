//! Storm arrivals and storm depths.
//!
//! Storms arrive as a Poisson process of rate λ (1/s). Each storm drops a
//! depth (m) on every hillslope: the same draw everywhere in
//! [`SpatialMode::Uniform`], or independent draws per edge in
//! [`SpatialMode::Independent`].

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Pareto};

use crate::dynamics::HydraulicParams;
use crate::error::{Error, Result};
use crate::network::RiverNetwork;
use crate::quadrature;
use crate::units;

/// Storm depth distribution. Depths are in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkDistribution {
    /// Rate σ in 1/m; mean depth 1/σ.
    Exponential { sigma: f64 },
    /// Survival `(k/x)^α` for `x ≥ k`.
    Pareto { alpha: f64, k: f64 },
    Gamma { shape: f64, scale: f64 },
    Deterministic { depth: f64 },
}

impl MarkDistribution {
    pub fn exponential_mean(mean: f64) -> Result<Self> {
        Self::Exponential { sigma: 1.0 / mean }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        let good = match self {
            Self::Exponential { sigma } => ok(sigma),
            Self::Pareto { alpha, k } => ok(alpha) && ok(k),
            Self::Gamma { shape, scale } => ok(shape) && ok(scale),
            Self::Deterministic { depth } => ok(depth),
        };
        if good {
            Ok(self)
        } else {
            Err(Error::InvalidArgument(format!("mark parameters must be positive and finite: {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exp",
            Self::Pareto { .. } => "pareto",
            Self::Gamma { .. } => "gamma",
            Self::Deterministic { .. } => "det",
        }
    }

    /// `E[P^i]`, or `+∞` when the moment diverges.
    pub fn moment(&self, i: u32) -> f64 {
        mark_moment(self, i)
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// Whether the transform can be evaluated off the real axis.
    pub fn supports_complex(&self) -> bool {
        !matches!(self, Self::Pareto { .. })
    }

    /// `E[e^{−sP}]` for `Re s ≥ 0`.
    pub fn transform(&self, s: Complex64) -> Result<Complex64> {
        mark_transform(self, s)
    }

    /// `1 − E[e^{−sP}]`, accurate when the transform is close to 1.
    pub fn complement(&self, s: Complex64) -> Result<Complex64> {
        check_domain(self, s)?;
        Ok(match *self {
            Self::Exponential { sigma } => s / (s + sigma),
            Self::Gamma { shape, scale } => -cexpm1(-shape * cln1p(s * scale)),
            Self::Deterministic { depth } => -cexpm1(-s * depth),
            Self::Pareto { alpha, k } => Complex64::new(pareto_complement(alpha, k * s.re)?, 0.0),
        })
    }

    /// Real-argument shorthand for [`MarkDistribution::complement`].
    pub fn complement_real(&self, s: f64) -> Result<f64> {
        Ok(self.complement(Complex64::new(s, 0.0))?.re)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { sigma } => Exp::new(sigma).expect("validated").sample(rng),
            Self::Pareto { alpha, k } => Pareto::new(k, alpha).expect("validated").sample(rng),
            Self::Gamma { shape, scale } => Gamma::new(shape, scale).expect("validated").sample(rng),
            Self::Deterministic { depth } => depth,
        }
    }
}

fn check_domain(dist: &MarkDistribution, s: Complex64) -> Result<()> {
    if !(s.re >= 0.0) || !s.im.is_finite() || !s.re.is_finite() {
        return Err(Error::InvalidArgument(format!("transform needs Re(s) >= 0, got {s}")));
    }
    if matches!(dist, MarkDistribution::Pareto { .. }) && s.im != 0.0 {
        return Err(Error::Unsupported("Pareto transform is evaluated for real arguments only".into()));
    }
    Ok(())
}

/// `E[e^{−sP}]`.
pub fn mark_transform(dist: &MarkDistribution, s: Complex64) -> Result<Complex64> {
    check_domain(dist, s)?;
    Ok(match *dist {
        MarkDistribution::Exponential { sigma } => sigma / (s + sigma),
        MarkDistribution::Gamma { shape, scale } => (-shape * cln1p(s * scale)).exp(),
        MarkDistribution::Deterministic { depth } => (-s * depth).exp(),
        MarkDistribution::Pareto { alpha, k } => {
            let c = k * s.re;
            let v = if c >= 1.0 { pareto_upper(alpha, c)? } else { 1.0 - pareto_complement(alpha, c)? };
            Complex64::new(v, 0.0)
        }
    })
}

/// `E[P^i]`, `+∞` when it diverges.
pub fn mark_moment(dist: &MarkDistribution, i: u32) -> f64 {
    let fi = i as f64;
    match *dist {
        MarkDistribution::Exponential { sigma } => (1..=i).map(|j| j as f64).product::<f64>() / sigma.powi(i as i32),
        MarkDistribution::Gamma { shape, scale } => {
            (0..i).map(|j| shape + j as f64).product::<f64>() * scale.powi(i as i32)
        }
        MarkDistribution::Deterministic { depth } => depth.powi(i as i32),
        MarkDistribution::Pareto { alpha, k } => {
            if fi < alpha {
                alpha * k.powi(i as i32) / (alpha - fi)
            } else {
                f64::INFINITY
            }
        }
    }
}

// Upper limit of the log-space quadrature; beyond it e^{−z} is negligible.
const PARETO_Z_MAX: f64 = 60.0;

/// `1 − f̃` for Pareto marks at `c = k s ≥ 0`:
/// `α c^α ∫_c^∞ z^{−α−1}(1 − e^{−z}) dz`.
fn pareto_complement(alpha: f64, c: f64) -> Result<f64> {
    if c == 0.0 {
        return Ok(0.0);
    }
    if c >= 1.0 {
        return Ok(1.0 - pareto_upper(alpha, c)?);
    }
    // z = e^y: the integrand becomes z^{−α}(1 − e^{−z}).
    let body = quadrature::adaptive(
        |y| {
            let z = y.exp();
            z.powf(-alpha) * -(-z).exp_m1()
        },
        c.ln(),
        PARETO_Z_MAX.ln(),
        1e-12,
        0.0,
    )?;
    let tail = PARETO_Z_MAX.powf(-alpha) / alpha;
    Ok(alpha * c.powf(alpha) * (body + tail))
}

/// `α c^α ∫_c^∞ z^{−α−1} e^{−z} dz` for `c ≥ 1`.
fn pareto_upper(alpha: f64, c: f64) -> Result<f64> {
    // z = c + w
    let body = quadrature::adaptive(
        |w| ((c + w) / c).powf(-alpha - 1.0) * (-w).exp(),
        0.0,
        PARETO_Z_MAX,
        1e-12,
        0.0,
    )?;
    Ok(alpha / c * (-c).exp() * body)
}

/// `ln(1 + z)` without cancellation for small `z`.
pub fn cln1p(z: Complex64) -> Complex64 {
    let w = Complex64::new(1.0, 0.0) + z;
    let d = w - 1.0;
    if d == Complex64::new(0.0, 0.0) {
        return z;
    }
    w.ln() * (z / d)
}

/// `e^z − 1` without cancellation for small `z`.
pub fn cexpm1(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let half = (0.5 * y).sin();
    Complex64::new(x.exp_m1() * y.cos() - 2.0 * half * half, x.exp() * y.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialMode {
    Uniform,
    Independent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RainfallModel {
    /// Storm rate, 1/s.
    pub lambda: f64,
    pub mode: SpatialMode,
    /// One shared marginal, or one per edge in independent mode.
    pub marks: Vec<MarkDistribution>,
}

impl RainfallModel {
    pub fn uniform(lambda: f64, mark: MarkDistribution) -> Result<Self> {
        Self::new(lambda, SpatialMode::Uniform, vec![mark])
    }

    pub fn independent(lambda: f64, marks: Vec<MarkDistribution>) -> Result<Self> {
        Self::new(lambda, SpatialMode::Independent, marks)
    }

    pub fn new(lambda: f64, mode: SpatialMode, marks: Vec<MarkDistribution>) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("storm rate must be positive, got {lambda}")));
        }
        if marks.is_empty() {
            return Err(Error::InvalidArgument("no mark distribution".into()));
        }
        if mode == SpatialMode::Uniform && marks.len() != 1 {
            return Err(Error::InvalidArgument("uniform rain takes exactly one marginal".into()));
        }
        let marks = marks.into_iter().map(|m| m.validated()).collect::<Result<_>>()?;
        Ok(Self { lambda, mode, marks })
    }

    /// Marginal of the depth on edge `e`.
    pub fn mark(&self, e: usize) -> &MarkDistribution {
        if self.marks.len() == 1 {
            &self.marks[0]
        } else {
            &self.marks[e]
        }
    }

    /// Checks that per-edge marginals, if any, match the network size.
    pub fn check_network(&self, net: &RiverNetwork) -> Result<()> {
        if self.marks.len() != 1 && self.marks.len() != net.len() {
            return Err(Error::Dimension { expected: net.len(), got: self.marks.len() });
        }
        Ok(())
    }

    /// Mean depth per edge, m.
    pub fn mean_depths(&self, n: usize) -> Vec<f64> {
        (0..n).map(|e| self.mark(e).mean()).collect()
    }

    /// Expected number of storms over `horizon` seconds.
    pub fn expected_storms(&self, horizon: f64) -> f64 {
        self.lambda * horizon
    }
}

/// Whether the jump vector `Y = H(a∘P)` satisfies `E log(1 + |Y|) < ∞`
/// (max norm), the condition for an invariant law to exist.
///
/// Every built-in family has a finite logarithmic moment: exponential and
/// gamma tails, bounded deterministic depths, and Pareto with `α > 0`, where
/// `∫ log(y) y^{−1−α} dy` converges.
pub fn check_invariance_condition(net: &RiverNetwork, params: &HydraulicParams, model: &RainfallModel) -> Result<bool> {
    model.check_network(net)?;
    if params.len() != net.len() {
        return Err(Error::Dimension { expected: net.len(), got: params.len() });
    }
    Ok((0..net.len()).all(|e| {
        let ha = params.h[e] * net.area(e);
        let finite_log_moment = match *model.mark(e) {
            MarkDistribution::Exponential { .. }
            | MarkDistribution::Gamma { .. }
            | MarkDistribution::Deterministic { .. } => true,
            MarkDistribution::Pareto { alpha, .. } => alpha > 0.0,
        };
        ha.is_finite() && finite_log_moment
    }))
}

/// Depth per edge for one storm.
pub fn sample_storm<R: Rng + ?Sized>(model: &RainfallModel, net: &RiverNetwork, rng: &mut R) -> Vec<f64> {
    let n = net.len();
    match model.mode {
        SpatialMode::Uniform => vec![model.marks[0].sample(rng); n],
        SpatialMode::Independent => (0..n).map(|e| model.mark(e).sample(rng)).collect(),
    }
}

/// Stable mixing of a seed with a domain label and an index (SplitMix64
/// finaliser applied to each word in turn).
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(seed) ^ domain) ^ index)
}

/// Named random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    pub seed: u64,
}

impl RngStreams {
    pub const ARRIVALS: u64 = 1;
    pub const MARKS: u64 = 2;
    pub const PARAMETERS: u64 = 3;
    pub const NETWORK: u64 = 4;

    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn stream(&self, domain: u64, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(self.seed, domain, index))
    }

    pub fn arrivals(&self) -> ChaCha8Rng {
        self.stream(Self::ARRIVALS, 0)
    }

    /// Depths of storm `storm`. Keyed by storm index, and by edge through the
    /// ChaCha stream id in independent mode.
    pub fn storm_depths(&self, model: &RainfallModel, n: usize, storm: u64) -> Vec<f64> {
        let mut rng = self.stream(Self::MARKS, storm);
        match model.mode {
            SpatialMode::Uniform => vec![model.marks[0].sample(&mut rng); n],
            SpatialMode::Independent => (0..n)
                .map(|e| {
                    rng.set_stream(e as u64);
                    rng.set_word_pos(0);
                    model.mark(e).sample(&mut rng)
                })
                .collect(),
        }
    }
}

/// Key=value rainfall configuration (interface units: hours and mm).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RainfallConfig {
    values: BTreeMap<String, String>,
}

const RAIN_KEYS: [&str; 9] =
    ["lambda_per_hour", "spatial", "marginal", "mean_mm", "alpha", "k_mm", "shape", "scale_mm", "depth_mm"];

impl RainfallConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected key=value, got '{line}'") })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        }
        Ok(cfg)
    }

    /// Sets or overrides one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !RAIN_KEYS.contains(&key) {
            return Err(Error::InvalidArgument(format!("unknown rainfall key '{key}'")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn number(&self, key: &str) -> Result<f64> {
        let v = self.get(key).ok_or_else(|| Error::InvalidArgument(format!("missing rainfall key '{key}'")))?;
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::InvalidArgument(format!("bad value for '{key}': '{v}'")))
    }

    /// Canonical text, one sorted `key=value` per line.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn build(&self) -> Result<RainfallModel> {
        let lambda = units::per_hour_to_per_second(self.number("lambda_per_hour")?);
        let mode = match self.get("spatial").unwrap_or("uniform") {
            "uniform" => SpatialMode::Uniform,
            "independent" => SpatialMode::Independent,
            other => return Err(Error::InvalidArgument(format!("spatial must be uniform or independent, got '{other}'"))),
        };
        let mm = |key: &str| -> Result<f64> { Ok(units::mm_to_m(self.number(key)?)) };
        let mark = match self.get("marginal").unwrap_or("exp") {
            "exp" => MarkDistribution::Exponential { sigma: 1.0 / mm("mean_mm")? },
            "pareto" => MarkDistribution::Pareto { alpha: self.number("alpha")?, k: mm("k_mm")? },
            "gamma" => MarkDistribution::Gamma { shape: self.number("shape")?, scale: mm("scale_mm")? },
            "det" => MarkDistribution::Deterministic { depth: mm("depth_mm")? },
            other => return Err(Error::InvalidArgument(format!("unknown marginal '{other}'"))),
        };
        RainfallModel::new(lambda, mode, vec![mark])
    }
}

/// Parses and builds a rainfall model from its key=value text.
pub fn parse_rainfall(text: &str) -> Result<RainfallModel> {
    RainfallConfig::parse(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn families() -> Vec<MarkDistribution> {
        vec![
            MarkDistribution::Exponential { sigma: 200.0 },
            MarkDistribution::Gamma { shape: 2.5, scale: 0.002 },
            MarkDistribution::Deterministic { depth: 0.004 },
            MarkDistribution::Pareto { alpha: 0.5, k: 0.001 },
            MarkDistribution::Pareto { alpha: 2.5, k: 0.001 },
        ]
    }

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn normalisation_and_closed_forms() {
        for d in families() {
            assert_eq!(d.transform(c(0.0)).unwrap(), c(1.0), "{d:?}");
            assert_eq!(d.complement_real(0.0).unwrap(), 0.0);
        }
        let e = MarkDistribution::exponential_mean(0.005).unwrap();
        assert!((e.transform(c(200.0)).unwrap().re - 0.5).abs() < 1e-15);
        assert!((e.moment(2) - 5e-5).abs() < 1e-18);
        let d = MarkDistribution::Deterministic { depth: 0.3 };
        assert!((d.moment(3) - 0.027).abs() < 1e-15);
        assert_eq!(MarkDistribution::Pareto { alpha: 0.5, k: 1.0 }.moment(1), f64::INFINITY);
        let p = MarkDistribution::Pareto { alpha: 2.5, k: 2.0 };
        assert!((p.moment(2) - 2.5 * 4.0 / 0.5).abs() < 1e-12);
        let g = MarkDistribution::Gamma { shape: 2.0, scale: 3.0 };
        assert!((g.moment(2) - 6.0 * 9.0).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        let e = MarkDistribution::Exponential { sigma: 1.0 };
        assert!(e.transform(c(-1.0)).is_err());
        let p = MarkDistribution::Pareto { alpha: 0.5, k: 1.0 };
        assert!(matches!(p.transform(Complex64::new(1.0, 1.0)), Err(Error::Unsupported(_))));
        assert!(MarkDistribution::Gamma { shape: 0.0, scale: 1.0 }.validated().is_err());
    }

    #[test]
    fn pareto_small_s_expansion() {
        let (alpha, k) = (0.5, 0.002);
        let p = MarkDistribution::Pareto { alpha, k };
        let g = statrs::function::gamma::gamma(1.0 - alpha);
        for &s in &[1e-4, 1e-3, 1e-2, 1e-1] {
            let comp = p.complement_real(s).unwrap();
            let lead = g * (k * s).powf(alpha);
            // Next term of the expansion is α k s / (1 − α) = O(s).
            let next = alpha * k * s / (1.0 - alpha);
            assert!((comp - (lead - next)).abs() < 1e-2 * next + 1e-15, "s={s}: {comp} vs {lead}");
        }
    }

    #[test]
    fn pareto_against_closed_form_for_alpha_one_half() {
        // α = 1/2: f̃(s) = e^{−c} − √(πc) erfc(√c), c = ks, tabulated at 30 digits.
        let p = MarkDistribution::Pareto { alpha: 0.5, k: 1.0 };
        let table = [
            (1.0e-6, 0.99822854614892781734),
            (0.01, 0.8327379815166837209),
            (0.3, 0.31504099062351856038),
            (0.99, 0.090480660609329727574),
            (1.0, 0.089073855890780345096),
            (2.0, 0.021283035250828595341),
            (10.0, 1.9936646885982470661e-6),
            (40.0, 5.1227664932447288589e-20),
        ];
        for (cc, want) in table {
            let got = p.transform(c(cc)).unwrap().re;
            assert!((got - want).abs() < 1e-11 * want, "c={cc}: {got} vs {want}");
            let comp = p.complement_real(cc).unwrap();
            assert!((comp - (1.0 - want)).abs() < 1e-11 * (1.0 - want) + 1e-16, "c={cc}");
        }
    }

    #[test]
    fn complex_complements_match_transforms() {
        for d in families().into_iter().filter(|d| d.supports_complex()) {
            for &(re, im) in &[(1.0, 2.0), (100.0, -30.0), (1e-8, 1e-7), (0.0, 5.0)] {
                let s = Complex64::new(re, im);
                let a = d.complement(s).unwrap();
                let b = Complex64::new(1.0, 0.0) - d.transform(s).unwrap();
                assert!((a - b).norm() < 1e-12, "{d:?} {s}");
            }
        }
    }

    #[test]
    fn mean_by_finite_difference() {
        for d in families() {
            let mean = d.mean();
            if !mean.is_finite() {
                continue;
            }
            let h = 1e-6 / mean;
            // Richardson-combined difference of 1 − f̃ cancels the O(h) term.
            let central = (4.0 * d.complement_real(h).unwrap() - d.complement_real(2.0 * h).unwrap()) / (2.0 * h);
            assert!(((central - mean) / mean).abs() < 1e-6, "{d:?}: {central} vs {mean}");
        }
    }

    #[test]
    fn completely_monotone_on_grid() {
        for d in families() {
            let s: Vec<f64> = (0..60).map(|i| 10f64.powf(-1.0 + i as f64 * 0.1)).collect();
            let f: Vec<f64> = s.iter().map(|&x| d.transform(c(x)).unwrap().re).collect();
            assert!(f.iter().all(|&v| v >= 0.0));
            for w in f.windows(2) {
                assert!(w[1] <= w[0] + 1e-15, "{d:?}");
            }
            for i in 1..s.len() - 1 {
                // Convexity on a non-uniform grid.
                let (x0, x1, x2) = (s[i - 1], s[i], s[i + 1]);
                let interp = f[i - 1] + (f[i + 1] - f[i - 1]) * (x1 - x0) / (x2 - x0);
                assert!(f[i] <= interp + 1e-12, "{d:?} at {x1}");
            }
        }
    }

    #[test]
    fn sampling_matches_transform() {
        let streams = RngStreams::new(17);
        for d in families() {
            let mut rng = streams.stream(99, 0);
            let n = 200_000;
            let draws: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            let scale = match d {
                MarkDistribution::Pareto { k, .. } => k,
                _ => d.mean(),
            };
            for &m in &[0.1, 0.5, 1.0, 2.0, 5.0] {
                let s = m / scale;
                let vals: Vec<f64> = draws.iter().map(|x| (-s * x).exp()).collect();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let se = (var / n as f64).sqrt().max(1e-12);
                let want = d.transform(c(s)).unwrap().re;
                assert!((mean - want).abs() < 3.0 * se + 1e-12, "{d:?} s={s}: {mean} vs {want} (se {se})");
            }
        }
    }

    #[test]
    fn exponential_sample_mean() {
        let d = MarkDistribution::exponential_mean(0.005).unwrap();
        let mut rng = RngStreams::new(4).stream(7, 0);
        let n = 1_000_000;
        let mean = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean / 0.005 - 1.0).abs() < 0.005);
    }

    #[test]
    fn storms_by_mode() {
        let net = crate::network::parse_network("edge r - 1 1 1\nedge a r 1 1 1\nedge b r 1 1 1").unwrap();
        let mark = MarkDistribution::Exponential { sigma: 100.0 };
        let uni = RainfallModel::uniform(1.0, mark).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = sample_storm(&uni, &net, &mut rng);
        assert!(v.iter().all(|&x| x == v[0]));
        let det = RainfallModel::uniform(1.0, MarkDistribution::Deterministic { depth: 0.2 }).unwrap();
        assert_eq!(sample_storm(&det, &net, &mut rng), vec![0.2; 3]);
        let ind = RainfallModel::independent(1.0, vec![mark; 3]).unwrap();
        let v = sample_storm(&ind, &net, &mut rng);
        assert!(v[0] != v[1] && v[1] != v[2]);
        let streams = RngStreams::new(5);
        assert_eq!(streams.storm_depths(&ind, 3, 12), streams.storm_depths(&ind, 3, 12));
        assert_ne!(streams.storm_depths(&ind, 3, 12), streams.storm_depths(&ind, 3, 13));
    }

    #[test]
    fn invariance_condition_holds_for_builtins() {
        let net = crate::network::parse_network("edge r - 1 1 1").unwrap();
        let p = HydraulicParams::uniform(1, 1.0, 1.0).unwrap();
        for d in families() {
            let m = RainfallModel::uniform(1.0, d).unwrap();
            assert!(check_invariance_condition(&net, &p, &m).unwrap());
        }
    }

    #[test]
    fn config_parsing() {
        let text = "# storms\nlambda_per_hour=0.0416666\nspatial=uniform\nmarginal=exp\nmean_mm=5\n";
        let m = parse_rainfall(text).unwrap();
        assert!((m.lambda - 0.0416666 / 3600.0).abs() < 1e-18);
        assert!((m.marks[0].mean() - 0.005).abs() < 1e-15);
        let mut cfg = RainfallConfig::parse(text).unwrap();
        cfg.set("marginal", "pareto").unwrap();
        cfg.set("alpha", "0.5").unwrap();
        cfg.set("k_mm", "2").unwrap();
        assert_eq!(cfg.build().unwrap().marks[0], MarkDistribution::Pareto { alpha: 0.5, k: 0.002 });
        assert!(cfg.set("bogus", "1").is_err());
        assert!(matches!(RainfallConfig::parse("lambda_per_hour 3"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_rainfall("lambda_per_hour=1\nmarginal=exp").is_err());
        assert!(parse_rainfall("lambda_per_hour=-1\nmean_mm=1").is_err());
    }

    proptest! {
        #[test]
        fn derive_seed_is_deterministic(seed in any::<u64>(), d in 0u64..8, i in any::<u64>()) {
            prop_assert_eq!(derive_seed(seed, d, i), derive_seed(seed, d, i));
            prop_assert_ne!(derive_seed(seed, d, i), derive_seed(seed, d, i.wrapping_add(1)));
        }
    }
}
