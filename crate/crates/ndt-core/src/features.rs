//! Feature extraction: per-flow and per-link feature vectors, the
//! heterogeneous flow-link hypergraph consumed by the delay model, and
//! z-score normalization.
//!
//! Raw (unnormalized) features live in the graph; the model stores the
//! normalization statistics fitted on its training split and applies them
//! on the way in, so every weights version carries the scaling it was
//! trained with.

use serde::{Deserialize, Serialize};

use crate::sim::{simulate, SimError, SimResult};
use crate::topology::TopologyGraph;
use crate::traffic::FlowSpec;

/// Standard-deviation floor guarding constant feature columns.
pub const ZSCORE_EPS: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("z-score fit needs at least 2 examples, got {0}")]
    TooFewExamples(usize),
    #[error("incidence duality violated: flow {flow} and link slot {link} disagree")]
    DualityViolation { flow: usize, link: usize },
}

/// Per-flow feature vector, 5 entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowFeatures {
    pub avg_traffic_rate_bps: f64,
    pub path_prop_delay_s: f64,
    /// Hop count of the route.
    pub flow_length: f64,
    /// Packets sent over the flow lifetime.
    pub avg_pkts_sent: f64,
    pub avg_pkt_loss_pps: f64,
}

impl FlowFeatures {
    pub const DIM: usize = 5;

    pub fn to_array(self) -> [f64; 5] {
        [
            self.avg_traffic_rate_bps,
            self.path_prop_delay_s,
            self.flow_length,
            self.avg_pkts_sent,
            self.avg_pkt_loss_pps,
        ]
    }
}

/// Per-link feature vector, 2 entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkFeatures {
    pub capacity_bps: f64,
    pub load: f64,
}

impl LinkFeatures {
    pub const DIM: usize = 2;

    pub fn to_array(self) -> [f64; 2] {
        [self.capacity_bps, self.load]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowNode {
    pub features: FlowFeatures,
    /// Graph-local link indices of the route, in path order.
    pub links: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkNode {
    pub features: LinkFeatures,
    /// Graph-local indices of the flows crossing this link, ascending.
    pub flows: Vec<usize>,
}

/// Bipartite flow-link structure: each flow lists the links of its path,
/// each link lists the flows crossing it, and the two views agree exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroGraph {
    pub flows: Vec<FlowNode>,
    pub links: Vec<LinkNode>,
    /// Topology link id of each graph-local link.
    pub link_ids: Vec<usize>,
}

impl HeteroGraph {
    pub fn validate_duality(&self) -> Result<(), FeatureError> {
        for (fi, f) in self.flows.iter().enumerate() {
            for &li in &f.links {
                if li >= self.links.len() || !self.links[li].flows.contains(&fi) {
                    return Err(FeatureError::DualityViolation { flow: fi, link: li });
                }
            }
        }
        for (li, l) in self.links.iter().enumerate() {
            for &fi in &l.flows {
                if fi >= self.flows.len() || !self.flows[fi].links.contains(&li) {
                    return Err(FeatureError::DualityViolation { flow: fi, link: li });
                }
            }
        }
        Ok(())
    }
}

fn flow_features(res: &SimResult, idx: usize, g: &TopologyGraph) -> FlowFeatures {
    let f = &res.flows[idx];
    FlowFeatures {
        avg_traffic_rate_bps: f.avg_traffic_rate_bps(),
        path_prop_delay_s: g.path_prop_delay(&f.path),
        flow_length: f.path.len() as f64,
        avg_pkts_sent: f.sent as f64,
        avg_pkt_loss_pps: f.avg_pkt_loss_pps(),
    }
}

/// Hypergraph of an entire simulation: every flow, and every link crossed
/// by at least one flow. Link loads are whole-horizon busy fractions.
pub fn build_hypergraph(res: &SimResult, g: &TopologyGraph) -> HeteroGraph {
    let mut link_ids: Vec<usize> = (0..res.links.len())
        .filter(|&l| !res.links[l].flows.is_empty())
        .collect();
    link_ids.sort_unstable();
    let local: std::collections::BTreeMap<usize, usize> =
        link_ids.iter().enumerate().map(|(i, &l)| (l, i)).collect();

    let flows = res
        .flows
        .iter()
        .enumerate()
        .map(|(i, f)| FlowNode {
            features: flow_features(res, i, g),
            links: f.path.iter().map(|l| local[l]).collect(),
        })
        .collect();
    let links = link_ids
        .iter()
        .map(|&l| LinkNode {
            features: LinkFeatures {
                capacity_bps: g.link(l).capacity_bps,
                load: res.links[l].load,
            },
            flows: res.links[l].flows.clone(),
        })
        .collect();
    HeteroGraph { flows, links, link_ids }
}

/// One link of a labeled record's path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLink {
    pub link_id: usize,
    pub features: LinkFeatures,
}

/// One labeled example: the flow's features, its path's link features
/// (loads taken over the flow's own active window), and the ground-truth
/// mean packet delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub flow_id: u64,
    pub src: usize,
    pub dst: usize,
    pub start_s: f64,
    pub flow: FlowFeatures,
    pub links: Vec<PathLink>,
    pub y: f64,
}

/// Single-flow hypergraph of one labeled record, the unit of inference
/// and training.
pub fn micro_graph(rec: &LabeledRecord) -> HeteroGraph {
    HeteroGraph {
        flows: vec![FlowNode {
            features: rec.flow,
            links: (0..rec.links.len()).collect(),
        }],
        links: rec
            .links
            .iter()
            .map(|l| LinkNode { features: l.features, flows: vec![0] })
            .collect(),
        link_ids: rec.links.iter().map(|l| l.link_id).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct LabeledSet {
    /// In flow order (ascending start time for generated scenarios).
    pub records: Vec<LabeledRecord>,
    /// Flows that delivered nothing and therefore have no delay label.
    pub excluded: Vec<u64>,
}

/// Simulate `flows` on `g` and emit one labeled record per flow that
/// delivered at least one packet.
pub fn label_dataset(
    g: &TopologyGraph,
    flows: &[FlowSpec],
    seed: u64,
) -> Result<LabeledSet, SimError> {
    let res = simulate(g, flows, seed)?;
    let mut records = Vec::with_capacity(flows.len());
    let mut excluded = Vec::new();
    for (i, out) in res.flows.iter().enumerate() {
        let Some(y) = out.avg_delay_s() else {
            excluded.push(out.flow_id);
            continue;
        };
        let links = out
            .path
            .iter()
            .map(|&l| PathLink {
                link_id: l,
                features: LinkFeatures {
                    capacity_bps: g.link(l).capacity_bps,
                    load: res.links[l].windowed_load(out.start_s, out.start_s + out.duration_s),
                },
            })
            .collect();
        records.push(LabeledRecord {
            flow_id: out.flow_id,
            src: flows[i].src,
            dst: flows[i].dst,
            start_s: out.start_s,
            flow: flow_features(&res, i, g),
            links,
            y,
        });
    }
    Ok(LabeledSet { records, excluded })
}

/// Per-feature mean and population standard deviation for both node kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScoreStats {
    pub flow_mean: [f64; 5],
    pub flow_std: [f64; 5],
    pub link_mean: [f64; 2],
    pub link_std: [f64; 2],
}

impl ZScoreStats {
    /// Identity scaling; placeholder for weights that have not been fitted.
    pub fn identity() -> Self {
        ZScoreStats {
            flow_mean: [0.0; 5],
            flow_std: [1.0; 5],
            link_mean: [0.0; 2],
            link_std: [1.0; 2],
        }
    }

    pub fn normalize_flow(&self, x: &FlowFeatures) -> [f64; 5] {
        let raw = x.to_array();
        std::array::from_fn(|i| (raw[i] - self.flow_mean[i]) / self.flow_std[i].max(ZSCORE_EPS))
    }

    pub fn normalize_link(&self, x: &LinkFeatures) -> [f64; 2] {
        let raw = x.to_array();
        std::array::from_fn(|i| (raw[i] - self.link_mean[i]) / self.link_std[i].max(ZSCORE_EPS))
    }
}

fn column_stats<const D: usize>(rows: &[[f64; D]]) -> ([f64; D], [f64; D]) {
    let n = rows.len() as f64;
    let mut mean = [0.0; D];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = [0.0; D];
    for r in rows {
        for i in 0..D {
            let d = r[i] - mean[i];
            var[i] += d * d;
        }
    }
    let std = std::array::from_fn(|i| (var[i] / n).sqrt());
    (mean, std)
}

/// Fit normalization statistics over the flow features of `records` and the
/// link features of every path position they contain.
pub fn zscore_fit(records: &[LabeledRecord]) -> Result<ZScoreStats, FeatureError> {
    if records.len() < 2 {
        return Err(FeatureError::TooFewExamples(records.len()));
    }
    let flow_rows: Vec<[f64; 5]> = records.iter().map(|r| r.flow.to_array()).collect();
    let link_rows: Vec<[f64; 2]> = records
        .iter()
        .flat_map(|r| r.links.iter().map(|l| l.features.to_array()))
        .collect();
    let (flow_mean, flow_std) = column_stats(&flow_rows);
    let (link_mean, link_std) = column_stats(&link_rows);
    Ok(ZScoreStats { flow_mean, flow_std, link_mean, link_std })
}
