//! River-network topology.
//!
//! A [`RiverNetwork`] is a rooted tree of stream links. Edges are stored in a
//! canonical breadth-first order with the root at index 0 and tributaries in
//! the order they were declared, so every edge index is strictly smaller than
//! the indices of its tributaries. That ordering makes the incidence matrix
//! unit upper triangular.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;

use crate::dynamics::HydraulicParams;
use crate::error::{Error, Result};
use crate::units;

/// Hillslope area used by [`generate_network`] when none is given (0.6 km²).
pub const DEFAULT_GENERATED_AREA_M2: f64 = 6.0e5;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub id: String,
    pub parent: Option<usize>,
    /// Hillslope area draining into the link, m².
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiverNetwork {
    edges: Vec<EdgeRecord>,
    tributaries: Vec<Vec<usize>>,
}

/// An edge declaration before canonical ordering.
#[derive(Debug, Clone)]
pub struct EdgeSpec {
    pub id: String,
    pub parent: Option<String>,
    pub area: f64,
    /// Source line, used in error messages. Zero when not parsed from text.
    pub line: usize,
}

impl RiverNetwork {
    /// Builds a network from declarations in arbitrary order.
    pub fn from_specs(specs: &[EdgeSpec]) -> Result<Self> {
        Ok(Self::from_specs_with_order(specs)?.0)
    }

    /// Same as [`RiverNetwork::from_specs`], also returning for every
    /// canonical edge the index of its declaration in `specs`.
    pub fn from_specs_with_order(specs: &[EdgeSpec]) -> Result<(Self, Vec<usize>)> {
        let err = |line: usize, message: String| {
            if line > 0 {
                Error::Parse { line, message }
            } else {
                Error::Network(message)
            }
        };
        if specs.is_empty() {
            return Err(Error::Network("network has no edges".into()));
        }

        let mut index: HashMap<&str, usize> = HashMap::with_capacity(specs.len());
        for (i, s) in specs.iter().enumerate() {
            if index.insert(s.id.as_str(), i).is_some() {
                return Err(err(s.line, format!("duplicate edge id '{}'", s.id)));
            }
            if !(s.area > 0.0) || !s.area.is_finite() {
                return Err(err(
                    s.line,
                    format!("edge '{}' has non-positive area {}", s.id, s.area),
                ));
            }
        }

        let mut root = None;
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); specs.len()];
        for (i, s) in specs.iter().enumerate() {
            match &s.parent {
                None => {
                    if root.is_some() {
                        return Err(err(s.line, format!("second root edge '{}'", s.id)));
                    }
                    root = Some(i);
                }
                Some(p) => {
                    let Some(&pi) = index.get(p.as_str()) else {
                        return Err(err(
                            s.line,
                            format!("edge '{}' has unknown parent '{}'", s.id, p),
                        ));
                    };
                    children[pi].push(i);
                    if children[pi].len() > 2 {
                        return Err(err(
                            s.line,
                            format!("edge '{}' would have more than 2 tributaries", p),
                        ));
                    }
                }
            }
        }
        let root = root.ok_or_else(|| Error::Network("no root edge (parent '-')".into()))?;

        // Breadth-first canonical order. Declarations never reached lie on a
        // parent cycle, since every edge has exactly one parent.
        let mut order = Vec::with_capacity(specs.len());
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            queue.extend(children[i].iter().copied());
        }
        if order.len() != specs.len() {
            let mut seen = vec![false; specs.len()];
            for &i in &order {
                seen[i] = true;
            }
            let bad = (0..specs.len()).find(|&i| !seen[i]).unwrap();
            return Err(err(
                specs[bad].line,
                format!("edge '{}' lies on a cycle", specs[bad].id),
            ));
        }

        let mut position = vec![0usize; specs.len()];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let edges = order
            .iter()
            .map(|&old| EdgeRecord {
                id: specs[old].id.clone(),
                parent: specs[old].parent.as_ref().map(|p| position[index[p.as_str()]]),
                area: specs[old].area,
            })
            .collect();
        let tributaries = order
            .iter()
            .map(|&old| children[old].iter().map(|&c| position[c]).collect())
            .collect();
        Ok((Self { edges, tributaries }, order))
    }

    /// Builds a network from a parent array in any order. `parents[i] = None`
    /// marks the root.
    pub fn from_parents(
        ids: &[String],
        parents: &[Option<usize>],
        areas: &[f64],
    ) -> Result<Self> {
        if ids.len() != parents.len() || ids.len() != areas.len() {
            return Err(Error::Dimension {
                expected: ids.len(),
                got: parents.len().min(areas.len()),
            });
        }
        let mut specs = Vec::with_capacity(ids.len());
        for i in 0..ids.len() {
            let parent = match parents[i] {
                None => None,
                Some(p) if p < ids.len() => Some(ids[p].clone()),
                Some(p) => return Err(Error::EdgeOutOfRange { index: p, len: ids.len() }),
            };
            specs.push(EdgeSpec { id: ids[i].clone(), parent, area: areas[i], line: 0 });
        }
        Self::from_specs(&specs)
    }

    /// Single-edge network.
    pub fn single(id: &str, area: f64) -> Result<Self> {
        Self::from_specs(&[EdgeSpec { id: id.into(), parent: None, area, line: 0 }])
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &EdgeRecord {
        &self.edges[e]
    }

    pub fn parent(&self, e: usize) -> Option<usize> {
        self.edges[e].parent
    }

    pub fn tributaries(&self, e: usize) -> &[usize] {
        &self.tributaries[e]
    }

    pub fn area(&self, e: usize) -> f64 {
        self.edges[e].area
    }

    pub fn areas(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.area).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.edges.iter().map(|e| e.area).sum()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn check_index(&self, e: usize) -> Result<()> {
        if e < self.len() {
            Ok(())
        } else {
            Err(Error::EdgeOutOfRange { index: e, len: self.len() })
        }
    }

    /// Edges with exactly one tributary. The model is stated for binary
    /// trees; pass-through links are accepted and summed additively.
    pub fn non_binary_edges(&self) -> Vec<usize> {
        (0..self.len()).filter(|&e| self.tributaries[e].len() == 1).collect()
    }

    /// Edges of the subnetwork draining through `e`, in canonical order of
    /// that subnetwork (so `e` comes first).
    pub fn upstream(&self, e: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut queue = VecDeque::from([e]);
        while let Some(i) = queue.pop_front() {
            out.push(i);
            queue.extend(self.tributaries[i].iter().copied());
        }
        out
    }

    /// Total area of the subnetwork draining through `e`.
    pub fn upstream_area(&self, e: usize) -> f64 {
        self.upstream(e).iter().map(|&i| self.edges[i].area).sum()
    }

    /// Flow path from `from` down to `to`, both included. `None` when `to` is
    /// not downstream of `from`.
    pub fn flow_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let mut path = vec![from];
        let mut cur = from;
        while cur != to {
            cur = self.edges[cur].parent?;
            path.push(cur);
        }
        Some(path)
    }

    pub fn incidence_matrix(&self) -> IncidenceMatrix {
        incidence_matrix(self)
    }
}

/// Dense integer incidence matrix: unit diagonal and −1 at (e, e′) when e′ is
/// a tributary of e.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    n: usize,
    entries: Vec<i64>,
}

impl IncidenceMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.entries[row * self.n + col]
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j) as f64)
    }

    pub fn is_upper_triangular(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == 0))
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> i128 {
        let n = self.n;
        if n == 0 {
            return 1;
        }
        let mut a: Vec<i128> = self.entries.iter().map(|&x| x as i128).collect();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n - 1 {
            if a[k * n + k] == 0 {
                let Some(p) = (k + 1..n).find(|&r| a[r * n + k] != 0) else {
                    return 0;
                };
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    a[i * n + j] = (a[i * n + j] * a[k * n + k] - a[i * n + k] * a[k * n + j]) / prev;
                }
            }
            prev = a[k * n + k];
        }
        sign * a[n * n - 1]
    }

    /// Integer matrix product, used to check inverses exactly.
    pub fn mul(&self, other: &Self) -> Vec<i64> {
        let n = self.n;
        let mut out = vec![0i64; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }
}

pub fn incidence_matrix(net: &RiverNetwork) -> IncidenceMatrix {
    let n = net.len();
    let mut entries = vec![0i64; n * n];
    for e in 0..n {
        entries[e * n + e] = 1;
        for &t in net.tributaries(e) {
            entries[e * n + t] = -1;
        }
    }
    IncidenceMatrix { n, entries }
}

/// Inverse of the incidence matrix: the upstream-membership indicator,
/// `(Λ⁻¹)[e][e′] = 1` iff e′ drains through e.
pub fn upstream_indicator(net: &RiverNetwork) -> IncidenceMatrix {
    let n = net.len();
    let mut entries = vec![0i64; n * n];
    for e in 0..n {
        for u in net.upstream(e) {
            entries[e * n + u] = 1;
        }
    }
    IncidenceMatrix { n, entries }
}

/// Horton–Strahler order of every edge.
pub fn horton_orders(net: &RiverNetwork) -> Vec<u32> {
    let mut order = vec![0u32; net.len()];
    // Tributaries always carry larger indices.
    for e in (0..net.len()).rev() {
        let trib = net.tributaries(e);
        order[e] = match trib {
            [] => 1,
            [t] => order[*t],
            [a, b] => {
                let (oa, ob) = (order[*a], order[*b]);
                oa.max(ob) + u32::from(oa == ob)
            }
            _ => unreachable!("at most two tributaries"),
        };
    }
    order
}

/// The subnetwork with `e` as its outlet, re-indexed canonically. Edge ids
/// are preserved.
pub fn subnetwork(net: &RiverNetwork, e: usize) -> Result<RiverNetwork> {
    Ok(subnetwork_with_map(net, e)?.0)
}

/// Like [`subnetwork`], also returning the original index of every edge of
/// the subnetwork.
pub fn subnetwork_with_map(net: &RiverNetwork, e: usize) -> Result<(RiverNetwork, Vec<usize>)> {
    net.check_index(e)?;
    let members = net.upstream(e);
    let mut position = vec![usize::MAX; net.len()];
    for (new, &old) in members.iter().enumerate() {
        position[old] = new;
    }
    let edges = members
        .iter()
        .enumerate()
        .map(|(new, &old)| EdgeRecord {
            id: net.edge(old).id.clone(),
            parent: if new == 0 { None } else { net.parent(old).map(|p| position[p]) },
            area: net.area(old),
        })
        .collect();
    let tributaries = members
        .iter()
        .map(|&old| net.tributaries(old).iter().map(|&t| position[t]).collect())
        .collect();
    Ok((RiverNetwork { edges, tributaries }, members))
}

/// Random binary tree whose root has Horton–Strahler order `order`.
///
/// A link of order ω ≥ 2 either splits into two links of order ω − 1, or
/// (with probability 1/2) continues as a link of order ω that receives a side
/// tributary of uniformly chosen lower order. Every edge gets area `area`.
pub fn generate_network<R: Rng + ?Sized>(order: u32, rng: &mut R, area: f64) -> Result<RiverNetwork> {
    if order < 1 {
        return Err(Error::InvalidArgument("network order must be at least 1".into()));
    }
    if !(area > 0.0) {
        return Err(Error::InvalidArgument(format!("area must be positive, got {area}")));
    }
    let mut parents: Vec<Option<usize>> = Vec::new();
    // Explicit stack of (requested order, parent) to avoid deep recursion.
    let mut stack = vec![(order, None)];
    while let Some((w, parent)) = stack.pop() {
        let me = parents.len();
        parents.push(parent);
        if w == 1 {
            continue;
        }
        let (a, b) = if rng.random_bool(0.5) {
            (w - 1, w - 1)
        } else {
            let side = rng.random_range(1..w);
            if rng.random_bool(0.5) { (w, side) } else { (side, w) }
        };
        // Pushed in reverse so the first child is generated (and declared) first.
        stack.push((b, Some(me)));
        stack.push((a, Some(me)));
    }
    let ids: Vec<String> = (0..parents.len()).map(|i| format!("g{i}")).collect();
    let net = RiverNetwork::from_parents(&ids, &parents, &vec![area; parents.len()])?;
    // Relabel in canonical order so ids read root-first.
    let ids: Vec<String> = (0..net.len()).map(|i| format!("e{i}")).collect();
    let parents: Vec<Option<usize>> = (0..net.len()).map(|i| net.parent(i)).collect();
    RiverNetwork::from_parents(&ids, &parents, &net.areas())
}

/// A parsed network file: topology plus the per-edge rates it carries.
#[derive(Debug, Clone)]
pub struct NetworkFile {
    pub network: RiverNetwork,
    pub params: HydraulicParams,
}

/// Parses the topology of a network file. See [`parse_network_file`].
pub fn parse_network(text: &str) -> Result<RiverNetwork> {
    Ok(parse_network_file(text)?.network)
}

/// Parses a network file.
///
/// One `edge <id> <parent-id|-> <area_km2> <K_per_hour> <H_per_hour>` per
/// line; `#` starts a comment line and blank lines are ignored.
pub fn parse_network_file(text: &str) -> Result<NetworkFile> {
    let mut specs = Vec::new();
    let mut rates = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields[0] != "edge" {
            return Err(Error::Parse { line, message: format!("unknown record '{}'", fields[0]) });
        }
        if fields.len() != 6 {
            return Err(Error::Parse {
                line,
                message: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let number = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, message: format!("bad {what} '{s}'") })
        };
        let area = parse_km2_as_m2(fields[3])
            .ok_or_else(|| Error::Parse { line, message: format!("bad area '{}'", fields[3]) })?;
        let k = number(fields[4], "K")?;
        let h = number(fields[5], "H")?;
        if !(k > 0.0) || !(h > 0.0) {
            return Err(Error::Parse {
                line,
                message: format!("rates must be positive (K={k}, H={h})"),
            });
        }
        specs.push(EdgeSpec {
            id: fields[1].to_string(),
            parent: (fields[2] != "-").then(|| fields[2].to_string()),
            area,
            line,
        });
        rates.push((units::per_hour_to_per_second(k), units::per_hour_to_per_second(h)));
    }
    let (network, order) = RiverNetwork::from_specs_with_order(&specs)?;
    let k = order.iter().map(|&o| rates[o].0).collect();
    let h = order.iter().map(|&o| rates[o].1).collect();
    Ok(NetworkFile { network, params: HydraulicParams::new(k, h)? })
}

/// Writes a network in the file format, canonical order. Areas round-trip
/// exactly; rates round-trip to within an ulp.
pub fn serialize_network(net: &RiverNetwork, params: &HydraulicParams) -> String {
    let mut out = String::from("# edge <id> <parent|-> <area_km2> <K_per_hour> <H_per_hour>\n");
    for (e, rec) in net.edges().iter().enumerate() {
        let parent = rec.parent.map_or("-".to_string(), |p| net.edge(p).id.clone());
        let _ = writeln!(
            out,
            "edge {} {} {} {} {}",
            rec.id,
            parent,
            format_m2_as_km2(rec.area),
            units::per_second_to_per_hour(params.k[e]),
            units::per_second_to_per_hour(params.h[e]),
        );
    }
    out
}

// km² <-> m² is a decimal shift, done on the text so it is exact.
fn parse_km2_as_m2(s: &str) -> Option<f64> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    mantissa.parse::<f64>().ok()?;
    format!("{mantissa}e{}", exp + 6).parse::<f64>().ok().filter(|v| v.is_finite())
}

fn format_m2_as_km2(a: f64) -> String {
    let plain = format!("{}", a / units::M2_PER_KM2);
    if parse_km2_as_m2(&plain) == Some(a) {
        return plain;
    }
    let sci = format!("{a:e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    format!("{mantissa}e{}", exp.parse::<i32>().expect("exponent") - 6)
}
