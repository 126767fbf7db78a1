//! Event-driven FIFO queueing simulator: the ground-truth side of the twin.
//!
//! Each undirected topology link carries two directed queues. A packet
//! traverses its flow's path hop by hop; at every hop it waits for the
//! queue ahead of it, occupies the transmitter for size/capacity seconds,
//! then propagates to the next node. Queues tail-drop when the buffer
//! (which counts the packet in service) is full.
//!
//! Packets within one flow are emitted at evenly spaced instants at a rate
//! drawn once per flow, the first packet exactly at the flow start. Keeping
//! individual flows smooth is what lets an uncontended path reproduce the
//! closed-form transmission + propagation delay exactly; queueing arises
//! from the superposition of flows with random rates, sizes, and phases.
//!
//! Every flow consumes its own seeded RNG stream, so adding or removing a
//! flow never perturbs the emissions of the others.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::topology::{TopologyError, TopologyGraph};
use crate::traffic::{sample_packet_size, FlowSpec, TrafficError};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("flow {flow_id}: {source}")]
    Unroutable {
        flow_id: u64,
        #[source]
        source: TopologyError,
    },
    #[error("flow {flow_id}: {source}")]
    BadDistribution {
        flow_id: u64,
        #[source]
        source: TrafficError,
    },
    #[error("flow {flow_id}: start and duration must be finite and non-negative")]
    BadWindow { flow_id: u64 },
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub flow_id: u64,
    /// Links of the route, in path order.
    pub path: Vec<usize>,
    pub start_s: f64,
    pub duration_s: f64,
    /// Packet rate drawn for this flow, packets per second.
    pub rate_pps: f64,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub sent_bits: u64,
    /// Sum of end-to-end delays over delivered packets.
    pub delay_sum_s: f64,
}

impl FlowOutcome {
    /// Mean packet delay over delivered packets; the ground-truth label.
    /// None when every packet was lost.
    pub fn avg_delay_s(&self) -> Option<f64> {
        (self.delivered > 0).then(|| self.delay_sum_s / self.delivered as f64)
    }

    /// Offered traffic averaged over the flow lifetime, bits per second.
    pub fn avg_traffic_rate_bps(&self) -> f64 {
        self.sent_bits as f64 / self.duration_s
    }

    pub fn avg_pkt_loss_pps(&self) -> f64 {
        self.dropped as f64 / self.duration_s
    }
}

#[derive(Debug, Clone)]
pub struct LinkOutcome {
    /// Flows routed over this link (either direction), ascending.
    pub flows: Vec<usize>,
    /// Packets that arrived at either directed queue.
    pub offered: u64,
    pub dropped: u64,
    /// Busy-time fraction over [0, horizon], worst direction.
    pub load: f64,
    /// Busy seconds per one-second bucket, one vector per direction.
    busy: [Vec<f64>; 2],
}

impl LinkOutcome {
    /// Busy fraction of the worst direction over [t0, t1]. Sub-second window
    /// edges attribute a bucket's busy time proportionally to the overlap.
    pub fn windowed_load(&self, t0: f64, t1: f64) -> f64 {
        if !(t1 > t0) {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for dir in &self.busy {
            let mut acc = 0.0;
            let lo = t0.floor().max(0.0) as usize;
            for (idx, &b) in dir.iter().enumerate().skip(lo) {
                let bucket_start = idx as f64;
                if bucket_start >= t1 {
                    break;
                }
                let overlap = (t1.min(bucket_start + 1.0) - t0.max(bucket_start)).max(0.0);
                acc += b * overlap;
            }
            worst = worst.max(acc / (t1 - t0));
        }
        worst.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct SimResult {
    /// End of the offered-traffic window: max over flows of start + duration.
    pub horizon_s: f64,
    pub flows: Vec<FlowOutcome>,
    pub links: Vec<LinkOutcome>,
}

// ---------------------------------------------------------------------------
// event machinery

#[derive(Debug, Clone, Copy)]
enum EventKind {
    /// Flow emits its next packet (and schedules the one after).
    Emit { flow: u32 },
    /// A packet arrives at the queue of hop `hop` of its flow's path.
    Arrival { flow: u32, hop: u32, size_bits: u64, emitted_s: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we want earliest-first,
        // ties broken by insertion order
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

struct DirectedQueue {
    /// Departure times of packets in the system (waiting + in service).
    in_system: VecDeque<f64>,
    busy_until: f64,
    busy: Vec<f64>,
    offered: u64,
    dropped: u64,
}

impl DirectedQueue {
    fn new() -> Self {
        DirectedQueue {
            in_system: VecDeque::new(),
            busy_until: 0.0,
            busy: Vec::new(),
            offered: 0,
            dropped: 0,
        }
    }

    fn add_busy(&mut self, mut t0: f64, t1: f64) {
        while t0 < t1 {
            let idx = t0.floor() as usize;
            let end = ((idx + 1) as f64).min(t1);
            if idx >= self.busy.len() {
                self.busy.resize(idx + 1, 0.0);
            }
            self.busy[idx] += end - t0;
            t0 = end;
        }
    }
}

struct FlowRuntime {
    spec: FlowSpec,
    /// (link id, direction, capacity bps, prop delay) per hop.
    hops: Vec<(usize, usize, f64, f64)>,
    rate_pps: f64,
    /// Packets emitted so far; emission k happens at start + k/rate, which
    /// avoids accumulating float error across thousands of packets.
    emitted: u64,
    rng: ChaCha8Rng,
}

impl FlowRuntime {
    fn emission_time(&self, k: u64) -> Option<f64> {
        let t = self.spec.start_s + k as f64 / self.rate_pps;
        (t < self.spec.start_s + self.spec.duration_s).then_some(t)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stable per-entity seed derivation, so entity streams are independent of
/// one another and of iteration order.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Run the queueing simulation of `flows` over `g`. Deterministic in
/// (g, flows, seed).
pub fn simulate(g: &TopologyGraph, flows: &[FlowSpec], seed: u64) -> Result<SimResult, SimError> {
    let mut runtimes = Vec::with_capacity(flows.len());
    let mut outcomes = Vec::with_capacity(flows.len());
    let mut link_flows: Vec<Vec<usize>> = vec![Vec::new(); g.link_count()];
    let mut horizon = 0.0f64;

    for (idx, spec) in flows.iter().enumerate() {
        if !(spec.start_s >= 0.0 && spec.duration_s > 0.0)
            || !spec.start_s.is_finite()
            || !spec.duration_s.is_finite()
        {
            return Err(SimError::BadWindow { flow_id: spec.flow_id });
        }
        spec.packet_size
            .validate()
            .and_then(|_| spec.packet_rate.validate())
            .map_err(|source| SimError::BadDistribution { flow_id: spec.flow_id, source })?;
        let path = g
            .shortest_path(spec.src, spec.dst)
            .map_err(|source| SimError::Unroutable { flow_id: spec.flow_id, source })?;
        let nodes = g.walk_nodes(spec.src, &path);
        let mut hops = Vec::with_capacity(path.len());
        for (h, &lid) in path.iter().enumerate() {
            let link = g.link(lid);
            let dir = if link.src == nodes[h] { 0 } else { 1 };
            hops.push((lid, dir, link.capacity_bps, link.prop_delay_s));
            link_flows[lid].push(idx);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, spec.flow_id));
        let rate_pps = sample_packet_size(&spec.packet_rate, &mut rng) as f64;
        horizon = horizon.max(spec.start_s + spec.duration_s);
        outcomes.push(FlowOutcome {
            flow_id: spec.flow_id,
            path,
            start_s: spec.start_s,
            duration_s: spec.duration_s,
            rate_pps,
            sent: 0,
            delivered: 0,
            dropped: 0,
            sent_bits: 0,
            delay_sum_s: 0.0,
        });
        runtimes.push(FlowRuntime { spec: spec.clone(), hops, rate_pps, emitted: 0, rng });
    }

    let mut queues: Vec<[DirectedQueue; 2]> = (0..g.link_count())
        .map(|_| [DirectedQueue::new(), DirectedQueue::new()])
        .collect();

    let mut heap: BinaryHeap<Event> = BinaryHeap::with_capacity(flows.len() * 2);
    let mut seq = 0u64;
    let push = |heap: &mut BinaryHeap<Event>, seq: &mut u64, time: f64, kind: EventKind| {
        heap.push(Event { time, seq: *seq, kind });
        *seq += 1;
    };
    for (idx, rt) in runtimes.iter().enumerate() {
        if let Some(t) = rt.emission_time(0) {
            push(&mut heap, &mut seq, t, EventKind::Emit { flow: idx as u32 });
        }
    }

    while let Some(ev) = heap.pop() {
        match ev.kind {
            EventKind::Emit { flow } => {
                let rt = &mut runtimes[flow as usize];
                let size_bits = sample_packet_size(&rt.spec.packet_size, &mut rt.rng) * 8;
                let out = &mut outcomes[flow as usize];
                out.sent += 1;
                out.sent_bits += size_bits;
                push(
                    &mut heap,
                    &mut seq,
                    ev.time,
                    EventKind::Arrival { flow, hop: 0, size_bits, emitted_s: ev.time },
                );
                rt.emitted += 1;
                if let Some(next) = rt.emission_time(rt.emitted) {
                    push(&mut heap, &mut seq, next, EventKind::Emit { flow });
                }
            }
            EventKind::Arrival { flow, hop, size_bits, emitted_s } => {
                let rt = &runtimes[flow as usize];
                let (lid, dir, capacity, prop) = rt.hops[hop as usize];
                let q = &mut queues[lid][dir];
                let now = ev.time;
                while q.in_system.front().is_some_and(|&dep| dep <= now) {
                    q.in_system.pop_front();
                }
                q.offered += 1;
                if q.in_system.len() >= g.link(lid).buffer_pkts {
                    q.dropped += 1;
                    outcomes[flow as usize].dropped += 1;
                    continue;
                }
                let start = now.max(q.busy_until);
                let dep = start + size_bits as f64 / capacity;
                q.in_system.push_back(dep);
                q.busy_until = dep;
                q.add_busy(start, dep);
                if (hop as usize) + 1 < rt.hops.len() {
                    push(
                        &mut heap,
                        &mut seq,
                        dep + prop,
                        EventKind::Arrival { flow, hop: hop + 1, size_bits, emitted_s },
                    );
                } else {
                    let out = &mut outcomes[flow as usize];
                    out.delivered += 1;
                    out.delay_sum_s += dep + prop - emitted_s;
                }
            }
        }
    }

    let links = queues
        .into_iter()
        .enumerate()
        .map(|(lid, [a, b])| {
            let mut fl = std::mem::take(&mut link_flows[lid]);
            fl.sort_unstable();
            fl.dedup();
            let mut out = LinkOutcome {
                flows: fl,
                offered: a.offered + b.offered,
                dropped: a.dropped + b.dropped,
                load: 0.0,
                busy: [a.busy, b.busy],
            };
            out.load = out.windowed_load(0.0, horizon);
            out
        })
        .collect();

    Ok(SimResult { horizon_s: horizon, flows: outcomes, links })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::{default_drift_schedule, generate_flows, DistributionSpec};
    use rand::SeedableRng;

    fn two_node_graph(capacity_bps: f64, prop_s: f64, buffer: usize) -> TopologyGraph {
        let json = format!(
            r#"{{"name":"pair","nodes":2,"links":[
                {{"id":0,"src":0,"dst":1,"capacity_bps":{capacity_bps},"prop_delay_s":{prop_s},"buffer_pkts":{buffer}}}]}}"#
        );
        TopologyGraph::from_json(&json).unwrap()
    }

    fn det_flow(id: u64, rate: f64, size: f64, start: f64, duration: f64) -> FlowSpec {
        FlowSpec {
            flow_id: id,
            src: 0,
            dst: 1,
            start_s: start,
            duration_s: duration,
            packet_size: DistributionSpec::Deterministic { value: size },
            packet_rate: DistributionSpec::Deterministic { value: rate },
        }
    }

    fn small8() -> TopologyGraph {
        TopologyGraph::load(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../topologies/small8.json"
        ))
        .unwrap()
    }

    #[test]
    fn uncontended_flow_matches_closed_form() {
        let g = two_node_graph(1e6, 0.001, 64);
        let flows = [det_flow(0, 10.0, 512.0, 0.0, 10.0)];
        let res = simulate(&g, &flows, 1).unwrap();
        let f = &res.flows[0];
        assert_eq!(f.sent, 100);
        assert_eq!(f.delivered, 100);
        assert_eq!(f.dropped, 0);
        let expected = 0.001 + 512.0 * 8.0 / 1e6;
        assert!(
            (f.avg_delay_s().unwrap() - expected).abs() < 1e-9,
            "avg delay {} vs closed form {expected}",
            f.avg_delay_s().unwrap()
        );
    }

    #[test]
    fn zero_flows_give_empty_result() {
        let g = two_node_graph(1e6, 0.001, 64);
        let res = simulate(&g, &[], 1).unwrap();
        assert!(res.flows.is_empty());
        assert_eq!(res.horizon_s, 0.0);
        assert_eq!(res.links[0].offered, 0);
        assert_eq!(res.links[0].load, 0.0);
    }

    #[test]
    fn overload_causes_loss_and_saturates_load() {
        // two flows at 92 pkt/s x 1024 B = 1.507 Mbit/s joint offered load
        // on a 1 Mbit/s link: 1.5x capacity
        let g = two_node_graph(1e6, 0.001, 64);
        let flows = [
            det_flow(0, 92.0, 1024.0, 0.0, 10.0),
            det_flow(1, 92.0, 1024.0, 0.005, 10.0),
        ];
        let res = simulate(&g, &flows, 2).unwrap();
        let link = &res.links[0];
        assert!(link.dropped > 0, "overload must drop packets");
        assert!(res.flows.iter().all(|f| f.dropped > 0));
        // a third of the offered packets cannot fit through the link
        let loss = link.dropped as f64 / link.offered as f64;
        assert!((0.2..0.45).contains(&loss), "loss ratio {loss}");
        assert!(link.load > 0.999, "saturated link load {} below 1", link.load);
        assert!(link.load <= 1.0);
        // delivered packets experienced near-full-buffer queueing delays
        let y = res.flows[0].avg_delay_s().unwrap();
        assert!(y > 0.2, "expected deep-queue delays, got {y}");
    }

    #[test]
    fn conservation_per_flow_and_per_link() {
        let g = small8();
        let sched = default_drift_schedule(40.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let flows = generate_flows(&g, &sched, 2.0, &mut rng).unwrap();
        let res = simulate(&g, &flows, 3).unwrap();
        let mut flow_drops = 0;
        for f in &res.flows {
            assert_eq!(f.sent, f.delivered + f.dropped, "flow {} leaks packets", f.flow_id);
            flow_drops += f.dropped;
        }
        let link_drops: u64 = res.links.iter().map(|l| l.dropped).sum();
        assert_eq!(flow_drops, link_drops);
        for l in &res.links {
            assert!(l.dropped <= l.offered);
            assert!((0.0..=1.0).contains(&l.load));
        }
    }

    #[test]
    fn incidence_lists_match_flow_paths() {
        let g = small8();
        let sched = default_drift_schedule(20.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let flows = generate_flows(&g, &sched, 2.0, &mut rng).unwrap();
        let res = simulate(&g, &flows, 4).unwrap();
        for (lid, l) in res.links.iter().enumerate() {
            for &fi in &l.flows {
                assert!(res.flows[fi].path.contains(&lid));
            }
        }
        for (fi, f) in res.flows.iter().enumerate() {
            for &lid in &f.path {
                assert!(res.links[lid].flows.contains(&fi));
            }
        }
    }

    #[test]
    fn delay_never_below_propagation() {
        let g = small8();
        let sched = default_drift_schedule(20.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let flows = generate_flows(&g, &sched, 3.0, &mut rng).unwrap();
        let res = simulate(&g, &flows, 5).unwrap();
        for f in &res.flows {
            if let Some(y) = f.avg_delay_s() {
                let prop = g.path_prop_delay(&f.path);
                assert!(y >= prop - 1e-12, "flow {} delay {y} below propagation {prop}", f.flow_id);
            }
        }
    }

    #[test]
    fn adding_a_flow_never_speeds_up_the_other() {
        let g = two_node_graph(1e6, 0.001, 1024);
        let a = det_flow(0, 50.0, 1000.0, 0.0, 10.0);
        let b = det_flow(1, 40.0, 500.0, 0.05, 10.0);
        let alone = simulate(&g, &[a.clone()], 7).unwrap();
        let shared = simulate(&g, &[a, b], 7).unwrap();
        // per-flow RNG streams: emissions of flow 0 are untouched by flow 1
        assert_eq!(alone.flows[0].sent, shared.flows[0].sent);
        assert_eq!(alone.flows[0].sent_bits, shared.flows[0].sent_bits);
        assert!(
            shared.flows[0].avg_delay_s().unwrap()
                >= alone.flows[0].avg_delay_s().unwrap() - 1e-12
        );
    }

    #[test]
    fn same_seed_reproduces_bitwise() {
        let g = small8();
        let sched = default_drift_schedule(20.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let flows = generate_flows(&g, &sched, 3.0, &mut rng).unwrap();
        let r1 = simulate(&g, &flows, 11).unwrap();
        let r2 = simulate(&g, &flows, 11).unwrap();
        for (a, b) in r1.flows.iter().zip(&r2.flows) {
            assert_eq!(a.delay_sum_s.to_bits(), b.delay_sum_s.to_bits());
            assert_eq!(a.sent_bits, b.sent_bits);
            assert_eq!(a.delivered, b.delivered);
        }
        for (a, b) in r1.links.iter().zip(&r2.links) {
            assert_eq!(a.load.to_bits(), b.load.to_bits());
        }
    }

    #[test]
    fn windowed_load_of_smooth_flow_is_exact() {
        let g = two_node_graph(1e6, 0.001, 64);
        let flows = [det_flow(0, 10.0, 512.0, 0.0, 10.0)];
        let res = simulate(&g, &flows, 9).unwrap();
        // 10 pkt/s x 4096 bits / 1e6 bps = 0.04096 busy fraction
        let load = res.links[0].windowed_load(0.0, 10.0);
        assert!((load - 0.04096).abs() < 1e-9, "load {load}");
        assert_eq!(res.links[0].load, load);
        assert_eq!(res.links[0].windowed_load(3.0, 3.0), 0.0);
    }

    #[test]
    fn unroutable_flow_is_an_error() {
        // node 2 exists but is isolated by constructing a 3-node graph with
        // a single 0-1 link: flow 0 -> 2 cannot route
        let json = r#"{"name":"gap","nodes":3,"links":[
            {"id":0,"src":0,"dst":1,"capacity_bps":1e6,"prop_delay_s":0.001}]}"#;
        let g = TopologyGraph::from_json(json).unwrap();
        let flows = [FlowSpec {
            flow_id: 0,
            src: 0,
            dst: 2,
            start_s: 0.0,
            duration_s: 1.0,
            packet_size: DistributionSpec::Deterministic { value: 512.0 },
            packet_rate: DistributionSpec::Deterministic { value: 10.0 },
        }];
        assert!(matches!(simulate(&g, &flows, 1), Err(SimError::Unroutable { flow_id: 0, .. })));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            // random micro-scenarios: conservation, load bounds, and the
            // propagation floor hold regardless of rates and sizes
            #[test]
            fn queueing_invariants(
                seed in 0u64..1000,
                nflows in 1usize..10,
                rate in 5.0f64..400.0,
                size in 64.0f64..2048.0,
            ) {
                let g = two_node_graph(5e5, 0.002, 16);
                let flows: Vec<FlowSpec> = (0..nflows)
                    .map(|i| det_flow(i as u64, rate, size, 0.1 * i as f64, 2.0))
                    .collect();
                let res = simulate(&g, &flows, seed).unwrap();
                let mut drops = 0;
                for f in &res.flows {
                    prop_assert_eq!(f.sent, f.delivered + f.dropped);
                    drops += f.dropped;
                    if let Some(y) = f.avg_delay_s() {
                        prop_assert!(y >= 0.002 - 1e-12);
                    }
                }
                prop_assert_eq!(drops, res.links[0].dropped);
                prop_assert!((0.0..=1.0).contains(&res.links[0].load));
            }
        }
    }
}
