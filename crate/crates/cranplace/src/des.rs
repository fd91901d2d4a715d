//! Packet-level simulation of single queues and tandem paths, used to check
//! the closed-form delays.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::queueing::QueueLoad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discipline {
    MM1,
    MD1,
}

impl FromStr for Discipline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mm1" => Ok(Discipline::MM1),
            "md1" => Ok(Discipline::MD1),
            _ => Err(Error::Invalid(format!("unknown discipline `{s}`"))),
        }
    }
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            Discipline::MM1 => "mm1",
            Discipline::MD1 => "md1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimResult {
    /// Seconds.
    pub mean_sojourn: f64,
    pub ci95_halfwidth: f64,
    pub packets_served: u64,
    pub drops: u64,
    /// Time-averaged number in system over the measured window.
    pub mean_in_system: f64,
    /// Served packets per second over the measured window.
    pub throughput: f64,
}

impl SimResult {
    /// Relative gap between L and λW; near zero for a correct run.
    pub fn little_gap(&self) -> f64 {
        let lw = self.throughput * self.mean_sojourn;
        (self.mean_in_system - lw).abs() / lw
    }
}

pub const BATCHES: usize = 30;
pub const WARMUP_FRACTION: f64 = 0.1;
/// Student t quantile, 29 degrees of freedom, two-sided 95%.
const T_29: f64 = 2.045;
pub const DEFAULT_PACKET_BYTES: f64 = 1024.0;

struct Service {
    exp: Option<Exp<f64>>,
    fixed: f64,
}

impl Service {
    fn new(discipline: Discipline, mu: f64) -> Result<Service> {
        Ok(match discipline {
            Discipline::MM1 => Service {
                exp: Some(Exp::new(mu).map_err(|e| Error::Invalid(e.to_string()))?),
                fixed: 0.0,
            },
            Discipline::MD1 => Service {
                exp: None,
                fixed: 1.0 / mu,
            },
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match &self.exp {
            Some(d) => d.sample(rng),
            None => self.fixed,
        }
    }
}

fn check_stable(load: &QueueLoad) -> Result<()> {
    if !(load.service_rate > 0.0 && load.arrival_rate >= 0.0 && load.arrival_rate < load.service_rate) {
        return Err(Error::StabilityViolation {
            arrival: load.arrival_rate,
            service: load.service_rate,
            at: None,
        });
    }
    Ok(())
}

fn batch_stats(sojourns: &[f64]) -> (f64, f64) {
    let kept = &sojourns[(sojourns.len() as f64 * WARMUP_FRACTION) as usize..];
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    let size = kept.len() / BATCHES;
    if size == 0 {
        return (mean, 0.0);
    }
    let means: Vec<f64> = kept
        .chunks_exact(size)
        .take(BATCHES)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (means.len() - 1) as f64;
    (mean, T_29 * (var / means.len() as f64).sqrt())
}

/// FIFO single-server queue with Poisson arrivals and a drop-tail buffer of
/// `buffer_bytes` (packets of `DEFAULT_PACKET_BYTES`).
pub fn simulate_queue(
    discipline: Discipline,
    load: QueueLoad,
    n_packets: usize,
    buffer_bytes: f64,
    seed: u64,
) -> Result<SimResult> {
    check_stable(&load)?;
    if n_packets < BATCHES {
        return Err(Error::Invalid(format!("need at least {BATCHES} packets")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let service = Service::new(discipline, load.service_rate)?;
    let capacity = (buffer_bytes / DEFAULT_PACKET_BYTES).floor().max(1.0) as usize;
    let gap = (load.arrival_rate > 0.0)
        .then(|| Exp::new(load.arrival_rate))
        .transpose()
        .map_err(|e| Error::Invalid(e.to_string()))?;

    let warm = (n_packets as f64 * WARMUP_FRACTION) as usize;
    let mut in_system: VecDeque<f64> = VecDeque::new();
    let mut sojourns = Vec::with_capacity(n_packets);
    let mut t = 0.0;
    let mut last_departure: f64 = 0.0;
    let mut drops = 0u64;
    // area under N(t) from the first measured arrival on
    let mut area = 0.0;
    let mut clock = 0.0;
    let mut window_start = None;
    let mut arrivals = 0usize;

    while sojourns.len() < n_packets {
        match &gap {
            Some(g) => t += g.sample(&mut rng),
            // no traffic: each packet finds the system empty
            None => t = t.max(last_departure),
        }
        while let Some(&d) = in_system.front() {
            if d > t {
                break;
            }
            in_system.pop_front();
            if window_start.is_some() {
                area += (in_system.len() + 1) as f64 * (d - clock);
            }
            clock = d;
        }
        if window_start.is_some() {
            area += in_system.len() as f64 * (t - clock);
        }
        clock = t;
        arrivals += 1;
        if arrivals == warm + 1 {
            window_start = Some(t);
        }
        if in_system.len() >= capacity {
            drops += 1;
            continue;
        }
        let start = last_departure.max(t);
        let done = start + service.draw(&mut rng);
        last_departure = done;
        in_system.push_back(done);
        sojourns.push(done - t);
    }
    // drain: packets still in system finish at their departure times
    if window_start.is_some() {
        while let Some(d) = in_system.pop_front() {
            area += (in_system.len() + 1) as f64 * (d - clock);
            clock = d;
        }
    }
    let (mean, half) = batch_stats(&sojourns);
    let span = clock - window_start.unwrap_or(0.0);
    let measured = (n_packets - warm) as f64;
    Ok(SimResult {
        mean_sojourn: mean,
        ci95_halfwidth: half,
        packets_served: sojourns.len() as u64,
        drops,
        mean_in_system: if span > 0.0 { area / span } else { 0.0 },
        throughput: if span > 0.0 { measured / span } else { 0.0 },
    })
}

/// Packets cross the queues in order; each queue is FIFO with unlimited buffer.
pub fn simulate_tandem(links: &[QueueLoad], discipline: Discipline, n_packets: usize, seed: u64) -> Result<SimResult> {
    let Some(first) = links.first() else {
        return Err(Error::Invalid("tandem needs at least one queue".into()));
    };
    for l in links {
        check_stable(l)?;
    }
    if links.len() == 1 {
        return simulate_queue(discipline, *first, n_packets, f64::INFINITY, seed);
    }
    if n_packets < BATCHES {
        return Err(Error::Invalid(format!("need at least {BATCHES} packets")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let services = links
        .iter()
        .map(|l| Service::new(discipline, l.service_rate))
        .collect::<Result<Vec<_>>>()?;
    let gap = (first.arrival_rate > 0.0)
        .then(|| Exp::new(first.arrival_rate))
        .transpose()
        .map_err(|e| Error::Invalid(e.to_string()))?;
    let mut free_at = vec![0.0f64; links.len()];
    let mut t = 0.0;
    let mut sojourns = Vec::with_capacity(n_packets);
    let mut first_measured = 0.0;
    let mut last_done: f64 = 0.0;
    let warm = (n_packets as f64 * WARMUP_FRACTION) as usize;
    for i in 0..n_packets {
        match &gap {
            Some(g) => t += g.sample(&mut rng),
            None => t = t.max(last_done),
        }
        if i == warm {
            first_measured = t;
        }
        let mut at = t;
        for (q, s) in services.iter().enumerate() {
            at = at.max(free_at[q]) + s.draw(&mut rng);
            free_at[q] = at;
        }
        last_done = last_done.max(at);
        sojourns.push(at - t);
    }
    let (mean, half) = batch_stats(&sojourns);
    let span = last_done - first_measured;
    let measured = (n_packets - warm) as f64;
    let sum: f64 = sojourns[warm..].iter().sum();
    Ok(SimResult {
        mean_sojourn: mean,
        ci95_halfwidth: half,
        packets_served: n_packets as u64,
        drops: 0,
        mean_in_system: if span > 0.0 { sum / span } else { 0.0 },
        throughput: if span > 0.0 { measured / span } else { 0.0 },
    })
}
