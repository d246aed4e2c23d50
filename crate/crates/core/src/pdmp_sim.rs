//! Exact event-driven simulation of `X = [Q; R]`.
//!
//! Between storms the state follows `X(t) = e^{M(t−Tₙ)} X(Tₙ)`; at a storm
//! every `R_e` jumps by `H_e a_e P_e`. Paths store post-jump states only; any
//! intermediate time is recovered through the flow map, so no time-stepping
//! error enters.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::dynamics::{build_m, HydraulicParams, SystemMatrix};
use crate::error::{Error, Result};
use crate::linalg::expm_scaled;
use crate::network::RiverNetwork;
use crate::quadrature::GaussLegendre;
use crate::rainfall::{RainfallModel, RngStreams};

/// Fewer expected storms than this make time averages unreliable.
pub const MIN_STORMS_FOR_AVERAGE: f64 = 100.0;

/// A simulated path. Event 0 is the initial state at `t = 0`; every later
/// event is a storm.
#[derive(Debug, Clone)]
pub struct StatePath {
    n: usize,
    sys: SystemMatrix,
    areas: Vec<f64>,
    lambda: f64,
    pub horizon: f64,
    pub event_times: Vec<f64>,
    states: Vec<f64>,
    depths: Vec<f64>,
}

impl StatePath {
    pub fn n_edges(&self) -> usize {
        self.n
    }

    pub fn n_events(&self) -> usize {
        self.event_times.len()
    }

    pub fn n_storms(&self) -> usize {
        self.event_times.len() - 1
    }

    /// Post-jump state at event `i` (length 2n).
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * 2 * self.n..(i + 1) * 2 * self.n]
    }

    /// Depths (m) of storm `j`, counted from 0, per edge.
    pub fn storm_depths(&self, j: usize) -> &[f64] {
        &self.depths[j * self.n..(j + 1) * self.n]
    }

    pub fn system(&self) -> &SystemMatrix {
        &self.sys
    }

    /// Warning text when the horizon holds too few expected storms.
    pub fn horizon_warning(&self) -> Option<String> {
        let expected = self.lambda * self.horizon;
        (expected < MIN_STORMS_FOR_AVERAGE).then(|| {
            format!("horizon covers only {expected:.1} expected storms; time averages need at least {MIN_STORMS_FOR_AVERAGE}")
        })
    }

    /// State at the horizon.
    pub fn final_state(&self) -> DVector<f64> {
        let last = self.n_events() - 1;
        let phi = expm_scaled(self.sys.matrix(), self.horizon - self.event_times[last]);
        phi * DVector::from_column_slice(self.state(last))
    }

    fn interval_end(&self, i: usize) -> f64 {
        self.event_times.get(i + 1).copied().unwrap_or(self.horizon)
    }
}

/// Invariant mean `λ[Λ⁻¹(a∘E P); a∘E P]` (m³/s).
pub fn invariant_mean(net: &RiverNetwork, params: &HydraulicParams, rain: &RainfallModel) -> Result<DVector<f64>> {
    rain.check_network(net)?;
    if params.len() != net.len() {
        return Err(Error::Dimension { expected: net.len(), got: params.len() });
    }
    let n = net.len();
    let inflow: Vec<f64> = (0..n).map(|e| rain.lambda * net.area(e) * rain.mark(e).mean()).collect();
    if inflow.iter().any(|v| !v.is_finite()) {
        return Err(Error::InfiniteMean);
    }
    let mut out = DVector::zeros(2 * n);
    // Λ⁻¹ sums over upstream edges; children carry larger indices.
    for e in (0..n).rev() {
        out[e] = inflow[e] + net.tributaries(e).iter().map(|&t| out[t]).sum::<f64>();
        out[n + e] = inflow[e];
    }
    Ok(out)
}

/// The invariant mean, or zero when the marks have no mean.
pub fn default_initial_state(net: &RiverNetwork, params: &HydraulicParams, rain: &RainfallModel) -> Result<DVector<f64>> {
    match invariant_mean(net, params, rain) {
        Err(Error::InfiniteMean) => Ok(DVector::zeros(2 * net.len())),
        other => other,
    }
}

/// Simulates over `[0, horizon]` from `x0`. Storm times come from the
/// arrivals stream of `streams`, depths from per-storm streams.
pub fn simulate(
    net: &RiverNetwork,
    params: &HydraulicParams,
    rain: &RainfallModel,
    horizon: f64,
    x0: &[f64],
    streams: &RngStreams,
) -> Result<StatePath> {
    let mut arrivals = streams.arrivals();
    simulate_with(net, params, rain, horizon, x0, &mut arrivals, |j| streams.storm_depths(rain, net.len(), j as u64))
}

/// Simulation with an explicit arrival generator and depth source.
pub fn simulate_with<R, D>(
    net: &RiverNetwork,
    params: &HydraulicParams,
    rain: &RainfallModel,
    horizon: f64,
    x0: &[f64],
    arrivals: &mut R,
    mut depths: D,
) -> Result<StatePath>
where
    R: Rng + ?Sized,
    D: FnMut(usize) -> Vec<f64>,
{
    let n = net.len();
    rain.check_network(net)?;
    let sys = build_m(net, params)?;
    if x0.len() != 2 * n {
        return Err(Error::Dimension { expected: 2 * n, got: x0.len() });
    }
    if let Some(bad) = x0.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("initial state must be finite and nonnegative, got {bad}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let gap = Exp::new(rain.lambda).expect("positive rate");
    let areas = net.areas();
    let mut path = StatePath {
        n,
        sys,
        areas,
        lambda: rain.lambda,
        horizon,
        event_times: vec![0.0],
        states: x0.to_vec(),
        depths: Vec::new(),
    };
    let mut x = DVector::from_column_slice(x0);
    let mut t = 0.0;
    loop {
        let dt = gap.sample(arrivals);
        if t + dt > horizon {
            break;
        }
        // The gap is taken from the stored times so that re-propagating a
        // stored path reproduces it bit for bit.
        let next = t + dt;
        let gap = next - t;
        t = next;
        let storm = path.n_storms();
        let p = depths(storm);
        x = expm_scaled(path.sys.matrix(), gap) * x;
        for e in 0..n {
            // Round-off can leave −0.0-level values; the exact flow is nonnegative.
            x[e] = x[e].max(0.0);
            x[n + e] = x[n + e].max(0.0) + params.h[e] * path.areas[e] * p[e];
        }
        path.event_times.push(t);
        path.states.extend(x.iter());
        path.depths.extend(&p);
    }
    Ok(path)
}

/// States at the given times (rows), each `e^{M(t−Tₖ)} X(Tₖ)` from the
/// latest event `Tₖ ≤ t`.
pub fn sample_path(path: &StatePath, times: &[f64]) -> Result<DMatrix<f64>> {
    let dim = 2 * path.n;
    let mut out = DMatrix::zeros(times.len(), dim);
    // Consecutive samples in one interval reuse a cached step matrix.
    let mut cache: Option<(f64, DMatrix<f64>)> = None;
    let mut prev: Option<(usize, f64, DVector<f64>)> = None;
    for (row, &t) in times.iter().enumerate() {
        if !(0.0..=path.horizon).contains(&t) {
            return Err(Error::InvalidArgument(format!("time {t} outside [0, {}]", path.horizon)));
        }
        let k = path.event_times.partition_point(|&te| te <= t) - 1;
        let x = match &prev {
            Some((pk, pt, px)) if *pk == k && t >= *pt => {
                let dt = t - pt;
                if cache.as_ref().is_none_or(|(c, _)| *c != dt) {
                    cache = Some((dt, expm_scaled(path.sys.matrix(), dt)));
                }
                &cache.as_ref().unwrap().1 * px
            }
            _ => {
                let base = DVector::from_column_slice(path.state(k));
                let dt = t - path.event_times[k];
                if dt == 0.0 {
                    base
                } else {
                    expm_scaled(path.sys.matrix(), dt) * base
                }
            }
        };
        out.row_mut(row).copy_from(&x.transpose());
        prev = Some((k, t, x));
    }
    Ok(out)
}

/// Time-averaged quantity along a path.
pub enum Observable<'a> {
    /// `w·X + c`, integrated in closed form.
    Linear { weights: Vec<f64>, offset: f64 },
    /// Any function of the state, integrated by graded Gauss–Legendre panels.
    Nonlinear(&'a dyn Fn(&[f64]) -> f64),
}

impl Observable<'_> {
    /// The single state component `i`.
    pub fn component(dim: usize, i: usize) -> Self {
        let mut weights = vec![0.0; dim];
        weights[i] = 1.0;
        Observable::Linear { weights, offset: 0.0 }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Observable::Linear { weights: vec![0.0; dim], offset: c }
    }
}

/// `∫₀^T w·X dt` in closed form: `w·M⁻¹(e^{MΔ} − I)x` per interval.
pub fn integrate_linear(path: &StatePath, weights: &[f64]) -> Result<f64> {
    let dim = 2 * path.n;
    if weights.len() != dim {
        return Err(Error::Dimension { expected: dim, got: weights.len() });
    }
    let mut total = 0.0;
    for i in 0..path.n_events() {
        let dt = path.interval_end(i) - path.event_times[i];
        if dt <= 0.0 {
            continue;
        }
        let x = DVector::from_column_slice(path.state(i));
        let diff = expm_scaled(path.sys.matrix(), dt) * &x - &x;
        let y = path.sys.solve(&diff);
        total += weights.iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(total)
}

fn integrate_nonlinear(path: &StatePath, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let gl = GaussLegendre::gl16();
    let w0 = 0.5 / path.sys.max_rate();
    // Graded panels [0, w0], [w0, 3w0], [3w0, 7w0], … with cached node maps.
    let mut panels: Vec<(f64, f64, Vec<DMatrix<f64>>)> = Vec::new();
    let mut total = 0.0;
    let mut buf = vec![0.0; 2 * path.n];
    for i in 0..path.n_events() {
        let dt = path.interval_end(i) - path.event_times[i];
        if dt <= 0.0 {
            continue;
        }
        let x = DVector::from_column_slice(path.state(i));
        let mut lo = 0.0;
        let mut k = 0;
        loop {
            let hi_std = if k == 0 { w0 } else { 2.0 * lo + w0 };
            if hi_std >= dt {
                break;
            }
            if k == panels.len() {
                let maps = gl.nodes.iter().map(|&s| expm_scaled(path.sys.matrix(), lo + s * (hi_std - lo))).collect();
                panels.push((lo, hi_std, maps));
            }
            let (a, b, maps) = &panels[k];
            for (m, &wt) in maps.iter().zip(&gl.weights) {
                let y = m * &x;
                buf.copy_from_slice(y.as_slice());
                total += wt * (b - a) * f(&buf);
            }
            lo = hi_std;
            k += 1;
        }
        // Remaining stretch [lo, dt].
        let width = dt - lo;
        let start = expm_scaled(path.sys.matrix(), lo) * &x;
        for (&s, &wt) in gl.nodes.iter().zip(&gl.weights) {
            let y = expm_scaled(path.sys.matrix(), s * width) * &start;
            buf.copy_from_slice(y.as_slice());
            total += wt * width * f(&buf);
        }
    }
    total
}

/// Time average of `obs` over `[0, horizon]`.
pub fn ergodic_average(path: &StatePath, obs: &Observable) -> Result<f64> {
    let integral = match obs {
        Observable::Linear { weights, offset } => integrate_linear(path, weights)? + offset * path.horizon,
        Observable::Nonlinear(f) => integrate_nonlinear(path, *f),
    };
    Ok(integral / path.horizon)
}

/// Terms of the storage–outflow identity `S(T) − S(0) + ∫Q_r = rain volume`
/// with storage `S = Σ_e (Q_e/K_e + R_e/H_e)` (m³).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeBalance {
    pub storage_change: f64,
    pub outflow: f64,
    pub rain_volume: f64,
}

impl VolumeBalance {
    pub fn relative_error(&self) -> f64 {
        let lhs = self.storage_change + self.outflow;
        let scale = self.rain_volume.abs().max(self.outflow.abs()).max(self.storage_change.abs());
        if scale == 0.0 {
            0.0
        } else {
            (lhs - self.rain_volume).abs() / scale
        }
    }
}

pub fn volume_balance(path: &StatePath) -> Result<VolumeBalance> {
    let n = path.n;
    let storage = |x: &[f64]| -> f64 {
        (0..n).map(|e| x[e] / path.sys.k()[e] + x[n + e] / path.sys.h()[e]).sum()
    };
    let end = path.final_state();
    let mut root = vec![0.0; 2 * n];
    root[0] = 1.0;
    let outflow = integrate_linear(path, &root)?;
    let rain_volume: f64 = (0..path.n_storms())
        .map(|j| path.storm_depths(j).iter().zip(&path.areas).map(|(p, a)| p * a).sum::<f64>())
        .sum();
    Ok(VolumeBalance { storage_change: storage(end.as_slice()) - storage(path.state(0)), outflow, rain_volume })
}
