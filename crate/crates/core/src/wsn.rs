//! Weighted unit-disk network model.
//!
//! A [`Wsn`] is a connected undirected graph of sensors with a designated
//! sink. Every node carries `rho`, the units of raw data it generates per
//! period. Node ids are dense: a network of `n` nodes uses ids `0..n`, so
//! the id order doubles as the index order everywhere in the crate.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unique sensor identity. Ordered by its integer value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TopologyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("node {0} declared more than once")]
    DuplicateNode(NodeId),
    #[error("network is disconnected: {unreachable} node(s) cannot reach the sink")]
    Disconnected { unreachable: usize },
    #[error("no connected deployment found in {attempts} attempts (density too low)")]
    Deployment { attempts: u32 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn parse_err(line: usize, msg: impl Into<String>) -> TopologyError {
    TopologyError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Connected weighted unit-disk network.
#[derive(Clone, Debug, PartialEq)]
pub struct Wsn {
    sink: NodeId,
    rho: Vec<u32>,
    adj: Vec<Vec<NodeId>>,
    positions: Option<Vec<(f64, f64)>>,
    range: Option<f64>,
}

impl Wsn {
    /// Builds a network from an explicit edge list.
    ///
    /// `rho[i]` is the data generated by node `i`. Duplicate edges are merged;
    /// self-loops and unknown endpoints are rejected.
    pub fn from_edges(
        sink: NodeId,
        rho: Vec<u32>,
        edges: &[(NodeId, NodeId)],
    ) -> Result<Wsn, TopologyError> {
        let n = rho.len();
        check_sink(sink, &rho)?;
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u.index() >= n || v.index() >= n {
                return Err(TopologyError::InvalidParameter(format!(
                    "edge ({u}, {v}) references an undeclared node"
                )));
            }
            if u == v {
                return Err(TopologyError::InvalidParameter(format!(
                    "self-loop on node {u}"
                )));
            }
            adj[u.index()].push(v);
            adj[v.index()].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let w = Wsn {
            sink,
            rho,
            adj,
            positions: None,
            range: None,
        };
        w.check_connected()?;
        Ok(w)
    }

    /// Builds a network whose edges follow the unit-disk rule: two nodes are
    /// linked iff their euclidean distance is at most `range`.
    pub fn from_positions(
        sink: NodeId,
        rho: Vec<u32>,
        positions: Vec<(f64, f64)>,
        range: f64,
    ) -> Result<Wsn, TopologyError> {
        if rho.len() != positions.len() {
            return Err(TopologyError::InvalidParameter(
                "rho and positions differ in length".into(),
            ));
        }
        if range.is_nan() || range <= 0.0 {
            return Err(TopologyError::InvalidParameter(
                "transmission range must be positive".into(),
            ));
        }
        check_sink(sink, &rho)?;
        let w = Wsn {
            sink,
            adj: unit_disk_adjacency(&positions, range),
            rho,
            positions: Some(positions),
            range: Some(range),
        };
        w.check_connected()?;
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.len()).map(NodeId::from)
    }

    pub fn rho(&self, v: NodeId) -> u32 {
        self.rho[v.index()]
    }

    pub fn rho_all(&self) -> &[u32] {
        &self.rho
    }

    /// Total units generated per period, i.e. what the sink must collect.
    pub fn total_rho(&self) -> u64 {
        self.rho.iter().map(|&r| u64::from(r)).sum()
    }

    /// Sorted neighbor list.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v.index()]
    }

    pub fn adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.adj[u.index()].binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(smaller, larger)`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, list)| {
            let u = NodeId::from(u);
            list.iter().filter(move |&&v| u < v).map(move |&v| (u, v))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn positions(&self) -> Option<&[(f64, f64)]> {
        self.positions.as_deref()
    }

    pub fn range(&self) -> Option<f64> {
        self.range
    }

    fn check_connected(&self) -> Result<(), TopologyError> {
        let dist = bfs_distances(self, self.sink, u32::MAX);
        let unreachable = dist.iter().filter(|&&d| d == u32::MAX).count();
        if unreachable > 0 {
            return Err(TopologyError::Disconnected { unreachable });
        }
        Ok(())
    }

    /// Renders the network as a topology document. Networks with positions
    /// are written with `range` and no edge lines.
    pub fn to_document(&self) -> String {
        let mut out = format!("wsn {} {}", self.len(), self.sink);
        if let Some(r) = self.range {
            out.push_str(&format!(" range {r}"));
        }
        out.push('\n');
        for v in self.nodes() {
            out.push_str(&format!("node {v} {}", self.rho(v)));
            if let Some(p) = &self.positions {
                let (x, y) = p[v.index()];
                out.push_str(&format!(" {x} {y}"));
            }
            out.push('\n');
        }
        if self.positions.is_none() {
            for (u, v) in self.edges() {
                out.push_str(&format!("edge {u} {v}\n"));
            }
        }
        out
    }
}

fn check_sink(sink: NodeId, rho: &[u32]) -> Result<(), TopologyError> {
    if sink.index() >= rho.len() {
        return Err(TopologyError::InvalidParameter(format!(
            "sink {sink} is not a node of the network"
        )));
    }
    if rho[sink.index()] != 0 {
        return Err(TopologyError::InvalidParameter(
            "the sink must not generate data (rho = 0)".into(),
        ));
    }
    Ok(())
}

fn unit_disk_adjacency(positions: &[(f64, f64)], range: f64) -> Vec<Vec<NodeId>> {
    let n = positions.len();
    let r2 = range * range;
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        let (xi, yi) = positions[i];
        for j in (i + 1)..n {
            let (xj, yj) = positions[j];
            let (dx, dy) = (xi - xj, yi - yj);
            if dx * dx + dy * dy <= r2 {
                adj[i].push(NodeId::from(j));
                adj[j].push(NodeId::from(i));
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

impl FromStr for Wsn {
    type Err = TopologyError;

    /// Parses the line-oriented topology document:
    ///
    /// ```text
    /// wsn <node-count> <sink-id> [range <R_t>]
    /// node <id> <rho> [<x> <y>]
    /// edge <id> <id>
    /// ```
    ///
    /// `#` starts a comment. With `range`, every node needs a position and
    /// edges are derived by the unit-disk rule.
    fn from_str(doc: &str) -> Result<Self, Self::Err> {
        let mut header: Option<(usize, NodeId, Option<f64>)> = None;
        let mut rho: Vec<Option<u32>> = Vec::new();
        let mut pos: Vec<Option<(f64, f64)>> = Vec::new();
        let mut edges = Vec::new();
        let mut last_line = 0;

        for (i, raw) in doc.lines().enumerate() {
            let ln = i + 1;
            last_line = ln;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            match tok[0] {
                "wsn" => {
                    if header.is_some() {
                        return Err(parse_err(ln, "duplicate header"));
                    }
                    let range = match tok.len() {
                        3 => None,
                        5 if tok[3] == "range" => Some(parse_num::<f64>(tok[4], ln)?),
                        _ => {
                            return Err(parse_err(
                                ln,
                                "expected `wsn <node-count> <sink-id> [range <R_t>]`",
                            ))
                        }
                    };
                    let n: usize = parse_num(tok[1], ln)?;
                    let sink: u32 = parse_num(tok[2], ln)?;
                    rho = vec![None; n];
                    pos = vec![None; n];
                    header = Some((n, NodeId(sink), range));
                }
                "node" => {
                    let (n, _, _) = header.ok_or_else(|| parse_err(ln, "node before header"))?;
                    if tok.len() != 3 && tok.len() != 5 {
                        return Err(parse_err(ln, "expected `node <id> <rho> [<x> <y>]`"));
                    }
                    let id: u32 = parse_num(tok[1], ln)?;
                    if id as usize >= n {
                        return Err(parse_err(ln, format!("node id {id} out of range 0..{n}")));
                    }
                    if rho[id as usize].is_some() {
                        return Err(TopologyError::DuplicateNode(NodeId(id)));
                    }
                    rho[id as usize] = Some(parse_num(tok[2], ln)?);
                    if tok.len() == 5 {
                        pos[id as usize] = Some((parse_num(tok[3], ln)?, parse_num(tok[4], ln)?));
                    }
                }
                "edge" => {
                    if header.is_none() {
                        return Err(parse_err(ln, "edge before header"));
                    }
                    if tok.len() != 3 {
                        return Err(parse_err(ln, "expected `edge <id> <id>`"));
                    }
                    let u: u32 = parse_num(tok[1], ln)?;
                    let v: u32 = parse_num(tok[2], ln)?;
                    edges.push((ln, NodeId(u), NodeId(v)));
                }
                other => return Err(parse_err(ln, format!("unknown directive `{other}`"))),
            }
        }

        let (n, sink, range) = header.ok_or_else(|| parse_err(last_line.max(1), "missing header"))?;
        let rho: Vec<u32> = rho
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| parse_err(last_line, format!("node {i} not declared"))))
            .collect::<Result<_, _>>()?;
        if sink.index() >= n {
            return Err(parse_err(1, format!("sink {sink} is not a declared node")));
        }
        for &(ln, u, v) in &edges {
            if u.index() >= n || v.index() >= n {
                return Err(parse_err(ln, "edge references an undeclared node"));
            }
            if u == v {
                return Err(parse_err(ln, "self-loop"));
            }
        }
        if rho[sink.index()] != 0 {
            return Err(parse_err(1, "the sink must have rho = 0"));
        }

        match range {
            Some(r) => {
                if let Some(&(ln, _, _)) = edges.first() {
                    return Err(parse_err(ln, "edge lines are not allowed with `range`"));
                }
                let positions = pos
                    .into_iter()
                    .enumerate()
                    .map(|(i, p)| p.ok_or_else(|| parse_err(last_line, format!("node {i} has no position"))))
                    .collect::<Result<Vec<_>, _>>()?;
                Wsn::from_positions(sink, rho, positions, r)
            }
            None => {
                let edges: Vec<_> = edges.into_iter().map(|(_, u, v)| (u, v)).collect();
                Wsn::from_edges(sink, rho, &edges)
            }
        }
    }
}

fn parse_num<T: FromStr>(s: &str, line: usize) -> Result<T, TopologyError> {
    s.parse()
        .map_err(|_| parse_err(line, format!("invalid number `{s}`")))
}

/// Parameters of a uniform random deployment in an `area_side` x `area_side` square.
#[derive(Clone, Debug, PartialEq)]
pub struct DeploymentParams {
    pub sensors: usize,
    pub area_side: f64,
    pub range: f64,
    pub beta: u32,
    pub retry_budget: u32,
}

impl DeploymentParams {
    pub const DEFAULT_RETRY_BUDGET: u32 = 100_000;

    pub fn new(sensors: usize, area_side: f64, range: f64, beta: u32) -> Self {
        DeploymentParams {
            sensors,
            area_side,
            range,
            beta,
            retry_budget: Self::DEFAULT_RETRY_BUDGET,
        }
    }
}

/// Places `sensors` nodes uniformly at random, links them by the unit-disk
/// rule and draws `rho` uniformly from `1..=beta` (the sink, node 0, gets 0).
/// Disconnected layouts are discarded and redrawn as a whole.
pub fn random_unit_disk_deployment(p: &DeploymentParams, seed: u64) -> Result<Wsn, TopologyError> {
    if p.sensors == 0 {
        return Err(TopologyError::InvalidParameter("need at least one node".into()));
    }
    if p.area_side.is_nan() || p.area_side <= 0.0 || p.range.is_nan() || p.range <= 0.0 {
        return Err(TopologyError::InvalidParameter(
            "area side and range must be positive".into(),
        ));
    }
    if p.beta == 0 {
        return Err(TopologyError::InvalidParameter("beta must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sink = NodeId(0);
    for _ in 0..p.retry_budget.max(1) {
        let positions: Vec<(f64, f64)> = (0..p.sensors)
            .map(|_| (rng.gen_range(0.0..=p.area_side), rng.gen_range(0.0..=p.area_side)))
            .collect();
        let rho: Vec<u32> = (0..p.sensors)
            .map(|i| if i == 0 { 0 } else { rng.gen_range(1..=p.beta) })
            .collect();
        match Wsn::from_positions(sink, rho, positions, p.range) {
            Ok(w) => return Ok(w),
            Err(TopologyError::Disconnected { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(TopologyError::Deployment {
        attempts: p.retry_budget.max(1),
    })
}

/// BFS distances from `from`, stopping at depth `limit`. Unreached nodes
/// get `u32::MAX`.
pub fn bfs_distances(w: &Wsn, from: NodeId, limit: u32) -> Vec<u32> {
    let mut dist = vec![u32::MAX; w.len()];
    let mut queue = VecDeque::new();
    dist[from.index()] = 0;
    queue.push_back(from);
    while let Some(u) = queue.pop_front() {
        let d = dist[u.index()];
        if d >= limit {
            continue;
        }
        for &v in w.neighbors(u) {
            if dist[v.index()] == u32::MAX {
                dist[v.index()] = d + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Minimum hop count of every node to the sink.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HopMap {
    hop: Vec<u32>,
}

impl HopMap {
    pub fn hop(&self, v: NodeId) -> u32 {
        self.hop[v.index()]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.hop
    }

    pub fn max_hop(&self) -> u32 {
        self.hop.iter().copied().max().unwrap_or(0)
    }
}

pub fn compute_hops(w: &Wsn) -> HopMap {
    HopMap {
        hop: bfs_distances(w, w.sink(), u32::MAX),
    }
}

/// Induced neighborhood of `center` within `k` hops.
///
/// Holds every node at graph distance `<= k`, and every edge with at least
/// one endpoint at distance `<= k - 1`. Edges between two nodes on the
/// boundary ring are left out.
#[derive(Clone, Debug)]
pub struct SubgraphView {
    center: NodeId,
    k: u32,
    dist: Vec<u32>,
    nodes: Vec<NodeId>,
}

impl SubgraphView {
    pub fn center(&self) -> NodeId {
        self.center
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.dist[v.index()] <= self.k
    }

    /// Distance from the center, if within the view.
    pub fn distance(&self, v: NodeId) -> Option<u32> {
        let d = self.dist[v.index()];
        (d <= self.k).then_some(d)
    }

    pub fn contains_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.k > 0
            && self.contains(u)
            && self.contains(v)
            && self.dist[u.index()].min(self.dist[v.index()]) < self.k
    }

    pub fn edges<'a>(&'a self, w: &'a Wsn) -> impl Iterator<Item = (NodeId, NodeId)> + 'a {
        w.edges().filter(move |&(u, v)| self.contains_edge(u, v))
    }
}

pub fn k_hop_subgraph(w: &Wsn, center: NodeId, k: u32) -> SubgraphView {
    let dist = bfs_distances(w, center, k);
    let nodes = (0..w.len())
        .filter(|&i| dist[i] <= k)
        .map(NodeId::from)
        .collect();
    SubgraphView {
        center,
        k,
        dist,
        nodes,
    }
}
