//! Discrete-event model of the O(N) multi-node UWB ranging cycle.
//!
//! Every cycle each mobile node transmits one UWB packet in its own slot and
//! every other node timestamps the reception on its local clock. In TDOA mode
//! a synch node transmits first and receive-only anchors timestamp everything.
//! Local clocks carry a constant offset plus a frequency error that is reset
//! by a narrowband synchronization every `sync_period_cycles` cycles.
//!
//! Timestamps are integer ticks of 1e-21 s, so differences are exact and
//! constant clock offsets cancel bit-for-bit.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::rng::stream;
use crate::scenario::{Kinematics, RangeDiffSample, RangeSample};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const TICKS_PER_SECOND: f64 = 1e21;
const TICKS_PER_NS: i128 = 1_000_000_000_000;

/// Default per-stamp noise: a two-way range combines four stamps, so its
/// standard deviation is `c * sigma_t`; this gives 0.08 m.
pub const DEFAULT_TIMESTAMP_NOISE: f64 = 0.08 / SPEED_OF_LIGHT;

/// A local-clock reading in ticks of 1e-21 s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Stamp(pub i128);

impl Stamp {
    pub fn ticks_to_seconds(ticks: i128) -> f64 {
        ticks as f64 / TICKS_PER_SECOND
    }

    pub fn as_ns_string(self) -> String {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let per = TICKS_PER_NS as u128;
        format!("{sign}{}.{:012}", abs / per, abs % per)
    }
}

fn seconds_to_ticks(s: f64) -> i128 {
    (s * TICKS_PER_SECOND).round() as i128
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolMode {
    TwoWay,
    Tdoa,
}

impl std::str::FromStr for ProtocolMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_way" | "two-way" | "twoway" => Ok(Self::TwoWay),
            "tdoa" => Ok(Self::Tdoa),
            other => Err(Error::Config(format!("unknown protocol mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Mobile nodes (tags in TDOA mode).
    pub n_nodes: usize,
    /// Seconds between consecutive transmissions within a cycle.
    pub slot_length: f64,
    pub cycles: usize,
    pub sync_period_cycles: usize,
    pub mode: ProtocolMode,
    /// Receive-only anchor positions (TDOA mode).
    pub anchors: Vec<Vec2>,
    pub synch: Option<Vec2>,
    /// Standard deviation of the Gaussian noise on every stamp, seconds.
    pub timestamp_noise_std: f64,
    /// Standard deviation of the residual frequency error after a sync, ppm.
    pub residual_freq_ppm: f64,
    pub freq_cap_ppm: f64,
    /// Initial clock offsets are uniform in `[-offset_spread, offset_spread]` seconds.
    pub offset_spread: f64,
    /// Per-node initial offsets in seconds; overrides `offset_spread`.
    pub explicit_offsets: Option<Vec<f64>>,
    /// Use the literal cross-cycle stamp pattern instead of round-minus-reply.
    pub legacy_indexing: bool,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n_nodes: 6,
            slot_length: 1e-3,
            cycles: 100,
            sync_period_cycles: 100,
            mode: ProtocolMode::TwoWay,
            anchors: Vec::new(),
            synch: None,
            timestamp_noise_std: DEFAULT_TIMESTAMP_NOISE,
            residual_freq_ppm: 0.1,
            freq_cap_ppm: 100.0,
            offset_spread: 1e-3,
            explicit_offsets: None,
            legacy_indexing: false,
            seed: 0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: &str| Err(Error::Config(m.to_string()));
        if self.sync_period_cycles == 0 {
            return cfg_err("sync_period_cycles must be >= 1");
        }
        if !(self.slot_length > 0.0) {
            return cfg_err("slot_length must be positive");
        }
        if self.n_nodes == 0 {
            return cfg_err("at least one mobile node is required");
        }
        if self.timestamp_noise_std < 0.0 || self.residual_freq_ppm < 0.0 {
            return cfg_err("noise parameters must be non-negative");
        }
        match self.mode {
            ProtocolMode::TwoWay => {
                if self.n_nodes < 2 {
                    return cfg_err("two-way mode needs at least two nodes");
                }
                if !self.anchors.is_empty() || self.synch.is_some() {
                    return cfg_err("anchors and synch node are only used in tdoa mode");
                }
            }
            ProtocolMode::Tdoa => {
                if self.synch.is_none() || self.anchors.len() < 2 {
                    return cfg_err("tdoa mode needs a synch node and at least two anchors");
                }
            }
        }
        if let Some(o) = &self.explicit_offsets {
            if o.len() != self.total_nodes() {
                return cfg_err("explicit_offsets must list one offset per node");
            }
        }
        Ok(())
    }

    /// Mobile nodes, then anchors, then the synch node.
    pub fn total_nodes(&self) -> usize {
        self.n_nodes + self.anchors.len() + usize::from(self.synch.is_some())
    }

    pub fn anchor_id(&self, k: usize) -> usize {
        self.n_nodes + k
    }

    pub fn synch_id(&self) -> Option<usize> {
        self.synch.map(|_| self.n_nodes + self.anchors.len())
    }

    /// Transmitters in slot order.
    fn transmitters(&self) -> Vec<usize> {
        match self.mode {
            ProtocolMode::TwoWay => (0..self.n_nodes).collect(),
            ProtocolMode::Tdoa => std::iter::once(self.synch_id().expect("validated"))
                .chain(0..self.n_nodes)
                .collect(),
        }
    }

    fn is_receiver(&self, node: usize) -> bool {
        match self.mode {
            ProtocolMode::TwoWay => node < self.n_nodes,
            ProtocolMode::Tdoa => node >= self.n_nodes && node < self.n_nodes + self.anchors.len(),
        }
    }

    /// The node whose narrowband beacon defines the reference frequency.
    fn reference_node(&self) -> usize {
        match self.mode {
            ProtocolMode::TwoWay => 0,
            ProtocolMode::Tdoa => self.synch_id().expect("validated"),
        }
    }
}

/// Local clock state of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeClock {
    /// Local minus global time at the last sync, seconds.
    pub offset: f64,
    pub freq_error_ppm: f64,
    pub last_sync_cycle: usize,
    offset_ticks: i128,
    sync_global: i128,
}

impl NodeClock {
    fn local(&self, global: i128) -> i128 {
        let elapsed = (global - self.sync_global) as f64;
        global + self.offset_ticks + (self.freq_error_ppm * 1e-6 * elapsed).round() as i128
    }

    fn resync(&mut self, global: i128, cycle: usize, freq_error_ppm: f64) {
        let now = self.local(global);
        self.offset_ticks = now - global;
        self.offset = Stamp::ticks_to_seconds(self.offset_ticks);
        self.sync_global = global;
        self.freq_error_ppm = freq_error_ppm;
        self.last_sync_cycle = cycle;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UwbPacket {
    pub exchange_number: usize,
    pub transmitter_id: usize,
}

/// Stamps of one cycle; `rx[receiver][transmitter]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleStamps {
    pub tx: Vec<Option<Stamp>>,
    pub rx: Vec<Vec<Option<Stamp>>>,
    /// Global transmit time of each transmitter, seconds.
    pub tx_global: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimestampLog {
    pub cycles: Vec<CycleStamps>,
    pub packets: Vec<UwbPacket>,
    pub n_nodes: usize,
    pub total_nodes: usize,
    pub legacy_indexing: bool,
}

impl TimestampLog {
    pub fn packets_in_cycle(&self, cycle: usize) -> usize {
        self.packets
            .iter()
            .filter(|p| p.exchange_number == cycle)
            .count()
    }

    fn cycle(&self, n: usize) -> Result<&CycleStamps> {
        self.cycles.get(n).ok_or(Error::MissingStamp {
            cycle: n,
            node: 0,
            from: 0,
            kind: "cycle",
        })
    }

    fn tx(&self, n: usize, node: usize) -> Result<i128> {
        self.cycle(n)?.tx[node]
            .map(|s| s.0)
            .ok_or(Error::MissingStamp {
                cycle: n,
                node,
                from: node,
                kind: "tx",
            })
    }

    fn rx(&self, n: usize, node: usize, from: usize) -> Result<i128> {
        self.cycle(n)?.rx[node][from]
            .map(|s| s.0)
            .ok_or(Error::MissingStamp {
                cycle: n,
                node,
                from,
                kind: "rx",
            })
    }

    /// Trace CSV `cycle,node,kind,from,stamp_ns`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cycle,node,kind,from,stamp_ns\n");
        for (n, c) in self.cycles.iter().enumerate() {
            for node in 0..self.total_nodes {
                if let Some(s) = c.tx[node] {
                    let _ = writeln!(out, "{n},{node},tx,{node},{}", s.as_ns_string());
                }
                for (from, s) in c.rx[node].iter().enumerate() {
                    if let Some(s) = s {
                        let _ = writeln!(out, "{n},{node},rx,{from},{}", s.as_ns_string());
                    }
                }
            }
        }
        out
    }
}

/// Runs `cfg.cycles` ranging cycles over the mobile-node motion `geometry`.
pub fn run_cycles(cfg: &ProtocolConfig, geometry: &impl Kinematics) -> Result<TimestampLog> {
    cfg.validate()?;
    if geometry.n_agents() != cfg.n_nodes {
        return Err(Error::Config(format!(
            "geometry has {} agents but the protocol expects {}",
            geometry.n_agents(),
            cfg.n_nodes
        )));
    }
    let total = cfg.total_nodes();
    let mut offset_rng = stream(cfg.seed, 0);
    let mut freq_rng = stream(cfg.seed, 1);
    let mut noise_rng = stream(cfg.seed, 2);
    let noise = (cfg.timestamp_noise_std > 0.0)
        .then(|| Normal::new(0.0, cfg.timestamp_noise_std * TICKS_PER_SECOND).expect("finite"));
    let freq = (cfg.residual_freq_ppm > 0.0)
        .then(|| Normal::new(0.0, cfg.residual_freq_ppm).expect("finite"));

    let mut clocks: Vec<NodeClock> = (0..total)
        .map(|k| {
            let offset = match &cfg.explicit_offsets {
                Some(o) => o[k],
                None if cfg.offset_spread > 0.0 => {
                    offset_rng.random_range(-cfg.offset_spread..=cfg.offset_spread)
                }
                None => 0.0,
            };
            NodeClock {
                offset,
                freq_error_ppm: 0.0,
                last_sync_cycle: 0,
                offset_ticks: seconds_to_ticks(offset),
                sync_global: 0,
            }
        })
        .collect();

    let order = cfg.transmitters();
    let slot = seconds_to_ticks(cfg.slot_length);
    let cycle_len = slot * (order.len() as i128 + 1);
    let reference = cfg.reference_node();
    let static_pos = |node: usize| -> Option<Vec2> {
        if node >= cfg.n_nodes && node < cfg.n_nodes + cfg.anchors.len() {
            Some(cfg.anchors[node - cfg.n_nodes])
        } else if Some(node) == cfg.synch_id() {
            cfg.synch
        } else {
            None
        }
    };

    let mut log = TimestampLog {
        cycles: Vec::with_capacity(cfg.cycles),
        packets: Vec::new(),
        n_nodes: cfg.n_nodes,
        total_nodes: total,
        legacy_indexing: cfg.legacy_indexing,
    };
    for n in 0..cfg.cycles {
        let start = cycle_len * n as i128;
        if n % cfg.sync_period_cycles == 0 {
            for (k, c) in clocks.iter_mut().enumerate() {
                let e = match &freq {
                    Some(d) if k != reference => d
                        .sample(&mut freq_rng)
                        .clamp(-cfg.freq_cap_ppm, cfg.freq_cap_ppm),
                    _ => 0.0,
                };
                c.resync(start, n, e);
            }
        }
        let mut stamps = CycleStamps {
            tx: vec![None; total],
            rx: vec![vec![None; total]; total],
            tx_global: vec![None; total],
        };
        for (s, &tx_node) in order.iter().enumerate() {
            let t_tx = start + slot * s as i128;
            let t_sec = Stamp::ticks_to_seconds(t_tx);
            let positions = geometry.positions(t_sec);
            let pos_of = |node: usize| static_pos(node).unwrap_or_else(|| positions[node]);
            let p_tx = pos_of(tx_node);
            log.packets.push(UwbPacket {
                exchange_number: n,
                transmitter_id: tx_node,
            });
            let jitter = |rng: &mut crate::rng::SimRng| {
                noise.as_ref().map_or(0, |d| d.sample(rng).round() as i128)
            };
            stamps.tx[tx_node] = Some(Stamp(clocks[tx_node].local(t_tx) + jitter(&mut noise_rng)));
            stamps.tx_global[tx_node] = Some(t_sec);
            for rx_node in (0..total).filter(|&r| r != tx_node && cfg.is_receiver(r)) {
                let flight = seconds_to_ticks(p_tx.distance(pos_of(rx_node)) / SPEED_OF_LIGHT);
                let local = clocks[rx_node].local(t_tx + flight);
                stamps.rx[rx_node][tx_node] = Some(Stamp(local + jitter(&mut noise_rng)));
            }
        }
        log.cycles.push(stamps);
    }
    Ok(log)
}

/// Two-way range between mobile nodes `i` and `j` in cycle `n`, meters.
///
/// The earlier transmitter's round trip minus the later transmitter's reply
/// time; each difference is taken on a single clock so constant offsets cancel.
/// With `legacy_indexing` the literal cross-cycle pattern is evaluated instead.
pub fn two_way_range(log: &TimestampLog, i: usize, j: usize, n: usize) -> Result<f64> {
    let (late, early) = if i > j { (i, j) } else { (j, i) };
    let ticks = if log.legacy_indexing {
        if n == 0 {
            return Err(Error::MissingStamp {
                cycle: 0,
                node: early,
                from: early,
                kind: "previous-cycle tx",
            });
        }
        (log.rx(n, early, late)? - log.tx(n - 1, early)?)
            - (log.rx(n, late, early)? - log.rx(n - 1, late, early)?)
    } else {
        let round = log.rx(n, early, late)? - log.tx(n, early)?;
        let reply = log.tx(n, late)? - log.rx(n, late, early)?;
        round - reply
    };
    Ok(0.5 * SPEED_OF_LIGHT * Stamp::ticks_to_seconds(ticks))
}

/// Range difference `D_a - D_b` of `tag` at anchors `a`, `b` (indices into
/// `cfg.anchors`) in cycle `n`.
pub fn range_difference(
    log: &TimestampLog,
    cfg: &ProtocolConfig,
    a: usize,
    b: usize,
    tag: usize,
    n: usize,
) -> Result<f64> {
    let synch = cfg
        .synch_id()
        .ok_or_else(|| Error::Config("range differences need a synch node".into()))?;
    let synch_pos = cfg.synch.expect("synch id implies position");
    let (ia, ib) = (cfg.anchor_id(a), cfg.anchor_id(b));
    let ticks = (log.rx(n, ia, tag)? - log.rx(n, ia, synch)?)
        - (log.rx(n, ib, tag)? - log.rx(n, ib, synch)?);
    Ok(
        SPEED_OF_LIGHT * Stamp::ticks_to_seconds(ticks) + cfg.anchors[a].distance(synch_pos)
            - cfg.anchors[b].distance(synch_pos),
    )
}

/// All pairwise two-way ranges, timestamped at the midpoint of each exchange.
pub fn extract_ranges(log: &TimestampLog) -> Result<Vec<RangeSample>> {
    let first = usize::from(log.legacy_indexing);
    let mut out = Vec::new();
    for n in first..log.cycles.len() {
        let c = &log.cycles[n];
        for i in 0..log.n_nodes {
            for j in (i + 1)..log.n_nodes {
                let t = match (c.tx_global[i], c.tx_global[j]) {
                    (Some(a), Some(b)) => 0.5 * (a + b),
                    _ => continue,
                };
                out.push(RangeSample {
                    i,
                    j,
                    t,
                    delta: two_way_range(log, i, j, n)?,
                });
            }
        }
    }
    Ok(out)
}

/// Range differences of every tag, referenced to anchor 0 (TDOA mode).
pub fn extract_range_differences(
    log: &TimestampLog,
    cfg: &ProtocolConfig,
) -> Result<Vec<RangeDiffSample>> {
    let mut out = Vec::new();
    for n in 0..log.cycles.len() {
        for tag in 0..cfg.n_nodes {
            let Some(t) = log.cycles[n].tx_global[tag] else {
                continue;
            };
            for m in 1..cfg.anchors.len() {
                let ddiff = range_difference(log, cfg, m, 0, tag, n)?;
                out.push(RangeDiffSample {
                    tag,
                    anchor_a: m,
                    anchor_b: 0,
                    t,
                    ddiff,
                });
            }
        }
    }
    Ok(out)
}
