use std::collections::{HashMap, VecDeque};

use rand::Rng;

use super::{make_errors, AdversaryStrategy, Channel, ChannelError, StageOutcome, StageParams};
use crate::field::Field;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRole {
    Source,
    Sink,
    Adversary,
    Relay,
}

impl NodeRole {
    fn from_name(name: &str) -> Self {
        match name {
            "SRC" => NodeRole::Source,
            "SINK" => NodeRole::Sink,
            n if n.starts_with("ADV") => NodeRole::Adversary,
            _ => NodeRole::Relay,
        }
    }
}

#[derive(Debug, Clone)]
struct HyperEdge {
    tx: usize,
    rx: Vec<usize>,
}

/// Directed hypergraph network: each hyperedge carries one packet per
/// stage from its transmitter to every receiver.
///
/// Adversary nodes (`ADV*`) do not forward honest traffic; every hyperedge
/// they transmit on carries one injected packet.
#[derive(Debug, Clone)]
pub struct Hypergraph {
    names: Vec<String>,
    roles: Vec<NodeRole>,
    edges: Vec<HyperEdge>,
    order: Vec<usize>,
    source: usize,
    sink: usize,
    honest_cut: usize,
    adversary_cut: usize,
}

impl Hypergraph {
    /// Parses the edge-list format: one hyperedge per line,
    /// `tx -> rx[,rx...]`. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, ChannelError> {
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: &str| ChannelError::Parse {
                line: i + 1,
                message: message.to_string(),
            };
            let (tx, rx) = line
                .split_once("->")
                .ok_or_else(|| parse_err("expected `tx -> rx[,rx...]`"))?;
            let tx = tx.trim();
            let rx: Vec<&str> = rx.split(',').map(str::trim).collect();
            if tx.is_empty() || rx.iter().any(|r| r.is_empty()) {
                return Err(parse_err("empty node name"));
            }
            edges.push((tx.to_string(), rx.into_iter().map(String::from).collect()));
        }
        Self::from_edges(edges)
    }

    pub fn from_edges(edges: Vec<(String, Vec<String>)>) -> Result<Self, ChannelError> {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut names = Vec::new();
        let mut intern = |name: &str, names: &mut Vec<String>| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };
        let mut hyper = Vec::with_capacity(edges.len());
        for (tx, rx) in &edges {
            let tx = intern(tx, &mut names);
            let rx: Vec<usize> = rx.iter().map(|r| intern(r, &mut names)).collect();
            if rx.contains(&tx) {
                return Err(ChannelError::Topology(format!(
                    "self loop at `{}`",
                    names[tx]
                )));
            }
            hyper.push(HyperEdge { tx, rx });
        }
        let roles: Vec<NodeRole> = names.iter().map(|n| NodeRole::from_name(n)).collect();
        let find = |role| roles.iter().position(|&r| r == role);
        let source = find(NodeRole::Source)
            .ok_or_else(|| ChannelError::Topology("missing SRC node".into()))?;
        let sink =
            find(NodeRole::Sink).ok_or_else(|| ChannelError::Topology("missing SINK node".into()))?;
        let order = topological_order(names.len(), &hyper)?;

        let mut g = Hypergraph {
            names,
            roles,
            edges: hyper,
            order,
            source,
            sink,
            honest_cut: 0,
            adversary_cut: 0,
        };
        g.honest_cut = g.max_flow(&[source], false);
        if g.honest_cut == 0 {
            return Err(ChannelError::DisconnectedSink);
        }
        let adversaries: Vec<usize> = (0..g.names.len())
            .filter(|&v| g.roles[v] == NodeRole::Adversary)
            .collect();
        g.adversary_cut = g.max_flow(&adversaries, true);
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Source-to-sink min cut, not counting paths through adversary nodes.
    pub fn honest_min_cut(&self) -> usize {
        self.honest_cut
    }

    /// Min cut from the adversary nodes to the sink.
    pub fn adversary_min_cut(&self) -> usize {
        self.adversary_cut
    }

    pub fn source_out_degree(&self) -> usize {
        self.edges.iter().filter(|e| e.tx == self.source).count()
    }

    /// Number of hyperedges driven by adversary nodes; one injected packet
    /// per such edge.
    pub fn adversary_edge_count(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| self.roles[e.tx] == NodeRole::Adversary)
            .count()
    }

    /// Stage parameters realized by this topology.
    pub fn stage_params(&self) -> StageParams {
        StageParams {
            capacity: self.honest_cut,
            adversary: self.adversary_cut,
            opportunities: self.source_out_degree(),
        }
    }

    /// Unit-capacity max flow to the sink from `sources`. Hyperedges are
    /// split through an auxiliary node so each carries at most one unit.
    fn max_flow(&self, sources: &[usize], include_adversary: bool) -> usize {
        let n = self.names.len();
        let super_src = n + self.edges.len();
        let total = super_src + 1;
        let mut cap: Vec<HashMap<usize, usize>> = vec![HashMap::new(); total];
        let big = self.edges.len() + 1;
        let add = |cap: &mut Vec<HashMap<usize, usize>>, u: usize, v: usize, c: usize| {
            *cap[u].entry(v).or_insert(0) += c;
            cap[v].entry(u).or_insert(0);
        };
        for (i, e) in self.edges.iter().enumerate() {
            let adversarial = self.roles[e.tx] == NodeRole::Adversary
                || e.rx.iter().any(|&r| self.roles[r] == NodeRole::Adversary);
            if adversarial && !include_adversary {
                continue;
            }
            let hub = n + i;
            add(&mut cap, e.tx, hub, 1);
            for &r in &e.rx {
                add(&mut cap, hub, r, 1);
            }
        }
        for &s in sources {
            add(&mut cap, super_src, s, big);
        }

        let mut flow = 0;
        loop {
            let mut prev = vec![usize::MAX; total];
            prev[super_src] = super_src;
            let mut queue = VecDeque::from([super_src]);
            while let Some(u) = queue.pop_front() {
                if u == self.sink {
                    break;
                }
                let mut next: Vec<usize> = cap[u]
                    .iter()
                    .filter(|&(_, &c)| c > 0)
                    .map(|(&v, _)| v)
                    .collect();
                next.sort_unstable();
                for v in next {
                    if prev[v] == usize::MAX {
                        prev[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if prev[self.sink] == usize::MAX {
                return flow;
            }
            let mut v = self.sink;
            while v != super_src {
                let u = prev[v];
                *cap[u].get_mut(&v).expect("edge") -= 1;
                *cap[v].get_mut(&u).expect("reverse edge") += 1;
                v = u;
            }
            flow += 1;
        }
    }

    /// Checks that declared stage parameters match the topology's min cuts.
    pub fn check_params(&self, params: &StageParams) -> Result<(), ChannelError> {
        let actual = self.stage_params();
        if params.capacity != actual.capacity || params.adversary != actual.adversary {
            return Err(ChannelError::Topology(format!(
                "declared (M, z) = ({}, {}) but topology has ({}, {})",
                params.capacity, params.adversary, actual.capacity, actual.adversary
            )));
        }
        Ok(())
    }
}

fn topological_order(n: usize, edges: &[HyperEdge]) -> Result<Vec<usize>, ChannelError> {
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in edges {
        for &r in &e.rx {
            indeg[r] += 1;
            out[e.tx].push(r);
        }
    }
    let mut ready: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_front() {
        order.push(v);
        for &w in &out[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.push_back(w);
            }
        }
    }
    if order.len() != n {
        return Err(ChannelError::Topology("topology contains a cycle".into()));
    }
    Ok(order)
}

/// Runs one stage of random linear network coding over `g`.
///
/// The source mixes the rows of `stage_inputs` onto each of its hyperedges;
/// relays mix whatever they received; the `k`-th adversary hyperedge carries
/// row `k` of `adversary_inputs` (which may have zero rows for an inactive
/// adversary). Global coding vectors are tracked per packet so that the
/// returned outcome satisfies `Y = T X + Q Z` exactly.
pub fn hypergraph_transfer<F: Field, R: Rng + ?Sized>(
    g: &Hypergraph,
    stage_inputs: &Matrix<F>,
    adversary_inputs: &Matrix<F>,
    rng: &mut R,
) -> Result<StageOutcome<F>, ChannelError> {
    let c = stage_inputs.rows();
    let zr = adversary_inputs.rows();
    if zr != 0 && zr != g.adversary_edge_count() {
        return Err(ChannelError::InvalidParams(format!(
            "{} injected packets for {} adversary hyperedges",
            zr,
            g.adversary_edge_count()
        )));
    }
    if zr != 0 && adversary_inputs.cols() != stage_inputs.cols() {
        return Err(ChannelError::InvalidParams(
            "injected and honest packets differ in length".into(),
        ));
    }
    let width = c + zr;
    let mut inbox: Vec<Vec<Vec<F>>> = vec![Vec::new(); g.node_count()];
    inbox[g.source] = (0..c)
        .map(|i| {
            let mut v = vec![F::ZERO; width];
            v[i] = F::ONE;
            v
        })
        .collect();
    let mut by_tx: Vec<Vec<usize>> = vec![Vec::new(); g.node_count()];
    for (i, e) in g.edges.iter().enumerate() {
        by_tx[e.tx].push(i);
    }
    let mut injected = 0;
    for &v in &g.order {
        if v == g.sink {
            continue;
        }
        for &ei in &by_tx[v] {
            let mut packet = vec![F::ZERO; width];
            if g.roles[v] == NodeRole::Adversary {
                if zr > 0 {
                    packet[c + injected] = F::ONE;
                }
                injected += 1;
            } else {
                for incoming in &inbox[v] {
                    let coeff = F::random(rng);
                    for (p, &x) in packet.iter_mut().zip(incoming) {
                        *p += coeff * x;
                    }
                }
            }
            for &r in &g.edges[ei].rx {
                inbox[r].push(packet.clone());
            }
        }
    }
    let received = &inbox[g.sink];
    let m = received.len();
    let t = Matrix::from_fn(m, c, |r, k| received[r][k]);
    let q = Matrix::from_fn(m, zr, |r, k| received[r][c + k]);
    let honest = t.mul(stage_inputs)?;
    let y = if zr > 0 {
        honest.add(&q.mul(adversary_inputs)?)?
    } else {
        honest
    };
    Ok(StageOutcome {
        y,
        t,
        q,
        z: adversary_inputs.clone(),
    })
}

/// Channel that routes every stage through a fixed hypergraph.
#[derive(Debug, Clone)]
pub struct HypergraphChannel {
    pub graph: Hypergraph,
    pub strategy: AdversaryStrategy,
}

impl HypergraphChannel {
    pub fn new(graph: Hypergraph, strategy: AdversaryStrategy) -> Self {
        HypergraphChannel { graph, strategy }
    }
}

impl<F: Field> Channel<F> for HypergraphChannel {
    fn adversary_active(&self) -> bool {
        self.strategy.is_active() && self.graph.adversary_edge_count() > 0
    }

    fn transmit<R: Rng + ?Sized>(
        &self,
        _params: &StageParams,
        x: &Matrix<F>,
        header: usize,
        rng: &mut R,
    ) -> Result<StageOutcome<F>, ChannelError> {
        let zr = if self.strategy.is_active() {
            self.graph.adversary_edge_count()
        } else {
            0
        };
        let z = match self.strategy {
            AdversaryStrategy::None => Matrix::zeros(0, x.cols()),
            s => make_errors(s, zr, x.cols(), header, Some(x), rng),
        };
        hypergraph_transfer(&self.graph, x, &z, rng)
    }
}
