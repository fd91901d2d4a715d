//! Seeded request streams.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ServiceRequest, DEFAULT_PACKET_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadParams {
    pub n_bs: usize,
    pub n_requests: usize,
    pub seed: u64,
    /// Class name and relative weight.
    pub class_mix: Vec<(String, f64)>,
    /// Target share of the backhaul capacity offered by each base station.
    pub load_fraction: f64,
    pub backhaul_gbps: f64,
    pub packet_size_bytes: f64,
    /// Per-request offered rates, drawn uniformly.
    pub bitrates_gbps: Vec<f64>,
    /// Mean request arrivals per second over the whole network.
    pub arrival_rate: f64,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        WorkloadParams {
            n_bs: 50,
            n_requests: 10_000,
            seed: 42,
            class_mix: default_mix(),
            load_fraction: 0.6,
            backhaul_gbps: 20.0,
            packet_size_bytes: DEFAULT_PACKET_SIZE,
            bitrates_gbps: vec![0.5, 1.0, 1.5, 2.0],
            arrival_rate: 1000.0,
        }
    }
}

pub fn default_mix() -> Vec<(String, f64)> {
    ["physical", "mac_lower", "mac_upper", "network"]
        .into_iter()
        .map(|c| (c.to_string(), 1.0))
        .collect()
}

/// Exponential inter-arrivals, uniform origins over base stations `0..n_bs`,
/// classes from the mix. Every request carries the same volume, scaled so
/// that the offered traffic per backhaul link averaged over the arrival
/// horizon equals `load_fraction` of the backhaul rate. The holding time
/// follows from the volume and the drawn bit-rate.
pub fn generate_workload(p: &WorkloadParams) -> Result<Vec<ServiceRequest>> {
    if p.n_bs == 0 || p.n_requests == 0 {
        return Err(Error::Invalid("workload needs at least one base station and one request".into()));
    }
    if !(p.load_fraction > 0.0 && p.load_fraction < 1.0) {
        return Err(Error::Invalid(format!("load fraction {} outside (0, 1)", p.load_fraction)));
    }
    if p.bitrates_gbps.is_empty() || p.bitrates_gbps.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::Invalid("bit-rates must be positive".into()));
    }
    if !(p.arrival_rate > 0.0 && p.packet_size_bytes > 0.0 && p.backhaul_gbps > 0.0) {
        return Err(Error::Invalid("workload rates and sizes must be positive".into()));
    }
    let weights = WeightedIndex::new(p.class_mix.iter().map(|(_, w)| *w))
        .map_err(|e| Error::Invalid(format!("class mix: {e}")))?;
    let gap = Exp::new(p.arrival_rate).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let mut t = 0.0;
    let mut drafts = Vec::with_capacity(p.n_requests);
    for _ in 0..p.n_requests {
        t += gap.sample(&mut rng);
        let origin = rng.random_range(0..p.n_bs);
        let class = weights.sample(&mut rng);
        let bitrate = p.bitrates_gbps[rng.random_range(0..p.bitrates_gbps.len())];
        drafts.push((t, origin, class, bitrate));
    }
    let horizon = t;
    let bits_per_packet = p.packet_size_bytes * 8.0;
    let target_bits = p.load_fraction * p.backhaul_gbps * 1e9 * p.n_bs as f64 * horizon;
    let volume = (target_bits / (p.n_requests as f64 * bits_per_packet)).max(1.0);

    Ok(drafts
        .into_iter()
        .enumerate()
        .map(|(i, (arrival, origin, class, bitrate))| ServiceRequest {
            id: i as u64,
            origin,
            class: p.class_mix[class].0.clone(),
            volume_packets: volume,
            packet_size_bytes: p.packet_size_bytes,
            arrival_time: arrival,
            holding_time: volume * bits_per_packet / (bitrate * 1e9),
        })
        .collect())
}

/// Offered bits per second per backhaul link, averaged over the arrival horizon.
pub fn mean_offered_gbps(requests: &[ServiceRequest], n_bs: usize) -> f64 {
    let horizon = requests.iter().map(|r| r.arrival_time).fold(0.0, f64::max);
    let bits: f64 = requests.iter().map(|r| r.volume_bytes() * 8.0).sum();
    bits / (n_bs as f64 * horizon) / 1e9
}
