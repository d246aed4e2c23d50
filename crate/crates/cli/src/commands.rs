use anyhow::{bail, Context, Result};
use drainage::dynamics::hydrograph_exp;
use drainage::moments::{exp_tail_rates, moment_table, pareto_tail};
use drainage::network::horton_orders;
use drainage::pdmp_sim::{default_initial_state, invariant_mean, sample_path, simulate as run_simulation};
use drainage::rainfall::{check_invariance_condition, RngStreams};
use drainage::units::{m2_to_km2, m3s_to_lps, per_second_to_per_hour, seconds_to_hours, SECONDS_PER_HOUR};
use drainage::{HydraulicParams, MarkDistribution, TransformEvaluator};
use rand::Rng;

use crate::config::{parse_range, Experiment};
use crate::output::{num, par_map, CsvOut};
use crate::Common;

/// Ranges outside which rate ratios draw a warning.
const RATIO_RANGE: (f64, f64) = (1e-3, 1.0);

fn load(common: &Common) -> Result<Experiment> {
    Experiment::load(&common.network, common.rain.as_deref(), &common.rain_set)
}

fn opts(pairs: &[(&str, String)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn report(path: std::path::PathBuf) {
    println!("wrote {}", path.display());
}

pub fn validate(common: &Common) -> Result<()> {
    let exp = load(common)?;
    let net = &exp.network;
    let p = &exp.params;
    let orders = horton_orders(net);
    println!(
        "network: {} edges, root '{}', total area {} km², Horton order {}",
        net.len(),
        net.edge(net.root()).id,
        m2_to_km2(net.total_area()),
        orders[net.root()]
    );
    let mut warnings = 0;
    let in_range = |r: f64| (RATIO_RANGE.0..=RATIO_RANGE.1).contains(&r);
    for e in 0..net.len() {
        let ratio = p.h[e] / p.k[e];
        if !in_range(ratio) {
            warnings += 1;
            println!(
                "warning: edge '{}': H/K = {ratio:.6e} outside the typical range [{}, {}]",
                net.edge(e).id,
                RATIO_RANGE.0,
                RATIO_RANGE.1
            );
        }
    }
    if exp.rain_config.is_some() {
        let rain = exp.rain()?;
        for e in 0..net.len() {
            let ratio = rain.lambda / p.h[e];
            if !in_range(ratio) {
                warnings += 1;
                println!(
                    "warning: edge '{}': lambda/H = {ratio:.6e} outside the typical range [{}, {}]",
                    net.edge(e).id,
                    RATIO_RANGE.0,
                    RATIO_RANGE.1
                );
            }
        }
        if !check_invariance_condition(net, p, &rain)? {
            bail!("the rainfall marks violate the logarithmic-moment condition; no invariant law exists");
        }
        println!(
            "rain: {} marks, {} mode, lambda {} per hour; invariant law exists",
            rain.marks[0].name(),
            match rain.mode {
                drainage::SpatialMode::Uniform => "uniform",
                drainage::SpatialMode::Independent => "independent",
            },
            per_second_to_per_hour(rain.lambda)
        );
    }
    println!("OK ({warnings} warning{})", if warnings == 1 { "" } else { "s" });
    Ok(())
}

pub fn simulate(common: &Common, horizon_hours: f64, step_hours: f64, start: &str) -> Result<()> {
    if !(horizon_hours > 0.0 && step_hours > 0.0) {
        bail!("horizon and step must be positive");
    }
    let exp = load(common)?;
    let rain = exp.rain()?;
    let (net, p) = (&exp.network, &exp.params);
    let n = net.len();
    let x0 = match start {
        "zero" => vec![0.0; 2 * n],
        _ => default_initial_state(net, p, &rain)?.iter().copied().collect(),
    };
    let horizon = horizon_hours * SECONDS_PER_HOUR;
    let path = run_simulation(net, p, &rain, horizon, &x0, &RngStreams::new(common.seed))?;
    if let Some(w) = path.horizon_warning() {
        eprintln!("warning: {w}");
    }
    let steps = (horizon_hours / step_hours + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=steps).map(|i| (i as f64 * step_hours * SECONDS_PER_HOUR).min(horizon)).collect();
    let states = sample_path(&path, &times)?;
    let hash = exp.hash(&opts(&[
        ("command", "simulate".into()),
        ("horizon_hours", num(horizon_hours)),
        ("step_hours", num(step_hours)),
        ("start", start.into()),
    ]));
    let mut columns = vec!["t_hours".to_string(), "storm_flag".to_string()];
    for e in 0..n {
        columns.push(format!("{}:Q_lps", net.edge(e).id));
        columns.push(format!("{}:R_lps", net.edge(e).id));
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let notes = vec![
        format!("storms: {} in {} h", path.n_storms(), horizon_hours),
        "storm_flag: 1 if a storm fell in (t - step, t]".to_string(),
    ];
    let mut out = CsvOut::create(&common.out, "simulate", &hash, common.seed, &notes, &cols)?;
    let storms = &path.event_times[1..];
    let mut next = 0;
    for (i, &t) in times.iter().enumerate() {
        let mut flag = 0;
        while next < storms.len() && storms[next] <= t {
            if i > 0 {
                flag = 1;
            }
            next += 1;
        }
        let mut row = vec![num(seconds_to_hours(t)), flag.to_string()];
        for e in 0..n {
            row.push(num(m3s_to_lps(states[(i, e)])));
            row.push(num(m3s_to_lps(states[(i, n + e)])));
        }
        out.row(&row)?;
    }
    report(out.finish()?);
    Ok(())
}

pub fn density(common: &Common, edges: Option<&str>, points: usize, x_max_factor: f64) -> Result<()> {
    if points == 0 || !(x_max_factor > 0.0) {
        bail!("need points >= 1 and a positive x-max-factor");
    }
    let exp = load(common)?;
    let rain = exp.rain()?;
    let (net, p) = (&exp.network, &exp.params);
    let edges = exp.edges(edges)?;
    let means = invariant_mean(net, p, &rain).context("density needs a finite mean")?;
    let ev = TransformEvaluator::new(net, p, &rain)?;
    let hash = exp.hash(&opts(&[
        ("command", "density".into()),
        ("edges", edge_list(&exp, &edges)),
        ("points", points.to_string()),
        ("x_max_factor", num(x_max_factor)),
    ]));
    let mut out = CsvOut::create(
        &common.out,
        "density",
        &hash,
        common.seed,
        &["grid: x = x_max_factor * E Q_e * i / points, i = 1..points".to_string()],
        &["edge_id", "x_lps", "density_per_lps"],
    )?;
    for &e in &edges {
        let xs: Vec<f64> = (1..=points).map(|i| x_max_factor * means[e] * i as f64 / points as f64).collect();
        let values = par_map(&xs, |&x| ev.density_profile(e, &[x]).map(|inv| inv.values[0]));
        for (x, v) in xs.iter().zip(values) {
            let v = v?;
            out.row([net.edge(e).id.clone(), num(m3s_to_lps(*x)), num(v / m3s_to_lps(1.0))])?;
        }
    }
    report(out.finish()?);
    Ok(())
}

pub fn moments(common: &Common, edges: Option<&str>, n_max: usize) -> Result<()> {
    if n_max == 0 {
        bail!("n-max must be at least 1");
    }
    let exp = load(common)?;
    let rain = exp.rain()?;
    let edges = exp.edges(edges)?;
    let hash = exp.hash(&opts(&[
        ("command", "moments".into()),
        ("edges", edge_list(&exp, &edges)),
        ("n_max", n_max.to_string()),
    ]));
    let mut out = CsvOut::create(
        &common.out,
        "moments",
        &hash,
        common.seed,
        &["moment_si: E Q^n in (m^3/s)^n; inf where the rainfall moment diverges".to_string()],
        &["edge_id", "n", "moment_si", "c_n"],
    )?;
    for &e in &edges {
        let table = moment_table(&exp.network, &exp.params, &rain, e, n_max)?;
        for n in 1..=n_max {
            out.row([table.edge_id.clone(), n.to_string(), num(table.values[n - 1]), num(table.c[n - 1])])?;
        }
    }
    report(out.finish()?);
    Ok(())
}

pub fn tails(common: &Common, edges: Option<&str>) -> Result<()> {
    let exp = load(common)?;
    let rain = exp.rain()?;
    let (net, p) = (&exp.network, &exp.params);
    let edges = exp.edges(edges)?;
    let hash = exp.hash(&opts(&[("command", "tails".into()), ("edges", edge_list(&exp, &edges))]));
    let notes = [
        "pareto: P(Q > x) ~ coefficient * x^-exponent, x in L/s".to_string(),
        "exponential: log P(Q > x) ~ -rate * x^exponent, x in L/s".to_string(),
    ];
    let mut out = CsvOut::create(&common.out, "tails", &hash, common.seed, &notes, &["edge_id", "model", "coefficient_or_rate", "exponent"])?;
    let lps = m3s_to_lps(1.0);
    match rain.marks[0] {
        MarkDistribution::Pareto { .. } => {
            for &e in &edges {
                let (c, alpha) = pareto_tail(net, p, &rain, e)?;
                out.row([net.edge(e).id.clone(), "pareto".into(), num(c * lps.powf(alpha)), num(alpha)])?;
            }
        }
        MarkDistribution::Exponential { .. } => {
            for (&e, t) in edges.iter().zip(exp_tail_rates(net, p, &rain, &edges)?) {
                out.row([net.edge(e).id.clone(), "exponential".into(), num(t.rate / lps), num(1.0)])?;
            }
        }
        ref other => bail!("tail asymptotics are available for exponential or Pareto marks, not {}", other.name()),
    }
    report(out.finish()?);
    Ok(())
}

pub fn hydrograph(common: &Common, edges: Option<&str>, t_max_hours: f64, points: usize) -> Result<()> {
    if points < 2 || !(t_max_hours > 0.0) {
        bail!("need points >= 2 and a positive t-max-hours");
    }
    let exp = load(common)?;
    let (net, p) = (&exp.network, &exp.params);
    let edges = exp.edges(edges)?;
    let n = net.len();
    let hash = exp.hash(&opts(&[
        ("command", "hydrograph".into()),
        ("edges", edge_list(&exp, &edges)),
        ("t_max_hours", num(t_max_hours)),
        ("points", points.to_string()),
    ]));
    let notes = ["t in hours; theta in 1/h, response to a unit uniform storm divided by the total area".to_string()];
    let mut out = CsvOut::create(&common.out, "hydrograph", &hash, common.seed, &notes, &["t", "edge_id", "theta_Q", "theta_R"])?;
    let ts: Vec<f64> = (0..points).map(|i| t_max_hours * i as f64 / (points - 1) as f64).collect();
    let values = par_map(&ts, |&t| hydrograph_exp(net, p, t * SECONDS_PER_HOUR));
    for (t, v) in ts.iter().zip(values) {
        let v = v?;
        for &e in &edges {
            out.row([num(*t), net.edge(e).id.clone(), num(v[e] * SECONDS_PER_HOUR), num(v[n + e] * SECONDS_PER_HOUR)])?;
        }
    }
    report(out.finish()?);
    Ok(())
}

pub fn heterogeneity(
    common: &Common,
    edges: Option<&str>,
    eps_k: &str,
    eps_h: &str,
    points: usize,
    x_max: f64,
) -> Result<()> {
    if points == 0 || !(x_max > 0.0) {
        bail!("need points >= 1 and a positive x-max");
    }
    let (k_range, h_range) = (parse_range(eps_k)?, parse_range(eps_h)?);
    let exp = load(common)?;
    let rain = exp.rain()?;
    if !rain.marks.iter().all(|m| matches!(m, MarkDistribution::Exponential { .. })) {
        bail!("heterogeneity runs need exponential marks");
    }
    let net = &exp.network;
    let edges = exp.edges(edges)?;
    let mut rng = RngStreams::new(common.seed).stream(RngStreams::PARAMETERS, 0);
    let mut draw = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    let mut k = Vec::with_capacity(net.len());
    let mut h = Vec::with_capacity(net.len());
    for e in 0..net.len() {
        k.push(exp.params.k[e] * draw(k_range));
        h.push(exp.params.h[e] * draw(h_range));
    }
    let p = HydraulicParams::new(k, h)?;
    let means = invariant_mean(net, &p, &rain)?;
    let ev = TransformEvaluator::new(net, &p, &rain)?;
    let orders = horton_orders(net);
    let hash = exp.hash(&opts(&[
        ("command", "heterogeneity".into()),
        ("edges", edge_list(&exp, &edges)),
        ("eps_k", format!("{},{}", k_range.0, k_range.1)),
        ("eps_h", format!("{},{}", h_range.0, h_range.1)),
        ("points", points.to_string()),
        ("x_max", num(x_max)),
    ]));
    let notes = [
        "x_normalized = Q_e / E Q_e; density_normalized = E Q_e * g_e(x_normalized * E Q_e)".to_string(),
        format!("multipliers: eps_K ~ U[{},{}], eps_H ~ U[{},{}]", k_range.0, k_range.1, h_range.0, h_range.1),
    ];
    let mut out = CsvOut::create(
        &common.out,
        "heterogeneity",
        &hash,
        common.seed,
        &notes,
        &["edge_id", "horton_order", "x_normalized", "density_normalized"],
    )?;
    let ys: Vec<f64> = (1..=points).map(|i| x_max * i as f64 / points as f64).collect();
    for &e in &edges {
        let values = par_map(&ys, |&y| ev.density_profile(e, &[y * means[e]]).map(|inv| inv.values[0]));
        for (y, v) in ys.iter().zip(values) {
            out.row([net.edge(e).id.clone(), orders[e].to_string(), num(*y), num(v? * means[e])])?;
        }
    }
    report(out.finish()?);
    Ok(())
}

fn edge_list(exp: &Experiment, edges: &[usize]) -> String {
    edges.iter().map(|&e| exp.network.edge(e).id.as_str()).collect::<Vec<_>>().join(",")
}
