//! Network topology: undirected capacitated links over dense integer node
//! ids, JSON loading, and deterministic minimum-hop routing.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const DEFAULT_BUFFER_PKTS: usize = 64;

fn default_buffer_pkts() -> usize {
    DEFAULT_BUFFER_PKTS
}

/// One bidirectional link. `capacity_bps` and `buffer_pkts` apply to each
/// direction independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDef {
    pub id: usize,
    pub src: usize,
    pub dst: usize,
    pub capacity_bps: f64,
    pub prop_delay_s: f64,
    #[serde(default = "default_buffer_pkts")]
    pub buffer_pkts: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyFile {
    name: String,
    nodes: usize,
    links: Vec<LinkDef>,
}

#[derive(Debug, thiserror::Error)]
pub enum TopologyError {
    #[error("failed to read topology file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse topology file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("topology needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("link ids must be dense 0..{expected}, link {idx} has id {got}")]
    NonDenseLinkIds { expected: usize, idx: usize, got: usize },
    #[error("link {link} references node {node}, but the topology has {nodes} nodes")]
    UnknownNode { link: usize, node: usize, nodes: usize },
    #[error("link {0} connects a node to itself")]
    SelfLoop(usize),
    #[error("link {0} has non-positive capacity")]
    BadCapacity(usize),
    #[error("link {0} has negative propagation delay")]
    BadPropDelay(usize),
    #[error("link {0} has a zero-packet buffer")]
    BadBuffer(usize),
    #[error("origin and destination are both node {0}")]
    SameEndpoints(usize),
    #[error("node {0} is out of range")]
    NodeOutOfRange(usize),
    #[error("no path from node {from} to node {to}")]
    Unreachable { from: usize, to: usize },
}

/// Validated topology with a per-node adjacency index.
#[derive(Debug, Clone)]
pub struct TopologyGraph {
    pub name: String,
    nodes: usize,
    links: Vec<LinkDef>,
    /// For each node, `(neighbor, link_id)` sorted ascending. The sort order
    /// is what makes routing tie-breaks deterministic.
    adj: Vec<Vec<(usize, usize)>>,
}

impl TopologyGraph {
    pub fn new(name: String, nodes: usize, links: Vec<LinkDef>) -> Result<Self, TopologyError> {
        if nodes < 2 {
            return Err(TopologyError::TooFewNodes(nodes));
        }
        for (idx, l) in links.iter().enumerate() {
            if l.id != idx {
                return Err(TopologyError::NonDenseLinkIds { expected: links.len(), idx, got: l.id });
            }
            for node in [l.src, l.dst] {
                if node >= nodes {
                    return Err(TopologyError::UnknownNode { link: l.id, node, nodes });
                }
            }
            if l.src == l.dst {
                return Err(TopologyError::SelfLoop(l.id));
            }
            if !(l.capacity_bps > 0.0 && l.capacity_bps.is_finite()) {
                return Err(TopologyError::BadCapacity(l.id));
            }
            if !(l.prop_delay_s >= 0.0 && l.prop_delay_s.is_finite()) {
                return Err(TopologyError::BadPropDelay(l.id));
            }
            if l.buffer_pkts == 0 {
                return Err(TopologyError::BadBuffer(l.id));
            }
        }
        let mut adj = vec![Vec::new(); nodes];
        for l in &links {
            adj[l.src].push((l.dst, l.id));
            adj[l.dst].push((l.src, l.id));
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        Ok(Self { name, nodes, links, adj })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TopologyError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        let file: TopologyFile = serde_json::from_str(text)?;
        Self::new(file.name, file.nodes, file.links)
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[LinkDef] {
        &self.links
    }

    pub fn link(&self, id: usize) -> &LinkDef {
        &self.links[id]
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adj[node]
    }

    /// Minimum-hop path from `from` to `to` as a vector of link ids.
    ///
    /// Among all minimum-hop paths the one with the lexicographically
    /// smallest node sequence is returned; parallel links between the same
    /// node pair are resolved to the smallest link id.
    pub fn shortest_path(&self, from: usize, to: usize) -> Result<Vec<usize>, TopologyError> {
        for node in [from, to] {
            if node >= self.nodes {
                return Err(TopologyError::NodeOutOfRange(node));
            }
        }
        if from == to {
            return Err(TopologyError::SameEndpoints(from));
        }
        let dist = self.bfs_dist(to);
        if dist[from] == usize::MAX {
            return Err(TopologyError::Unreachable { from, to });
        }
        let mut path = Vec::with_capacity(dist[from]);
        let mut at = from;
        while at != to {
            let remaining = dist[at];
            // adj is sorted by (neighbor, link_id), so the first hit is both
            // the smallest next node and the smallest link id to it.
            let &(next, link) = self.adj[at]
                .iter()
                .find(|&&(v, _)| dist[v] + 1 == remaining)
                .expect("BFS distance field guarantees a descending neighbor");
            path.push(link);
            at = next;
        }
        Ok(path)
    }

    /// Node sequence visited when walking `path` starting at `from`.
    pub fn walk_nodes(&self, from: usize, path: &[usize]) -> Vec<usize> {
        let mut nodes = Vec::with_capacity(path.len() + 1);
        nodes.push(from);
        let mut at = from;
        for &lid in path {
            let l = &self.links[lid];
            at = if l.src == at { l.dst } else { l.src };
            nodes.push(at);
        }
        nodes
    }

    pub fn path_prop_delay(&self, path: &[usize]) -> f64 {
        path.iter().map(|&l| self.links[l].prop_delay_s).sum()
    }

    fn bfs_dist(&self, target: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.nodes];
        dist[target] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(target);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}
