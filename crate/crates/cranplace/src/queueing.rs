//! Closed-form queue delays: M/M/1 for clouds, M/D/1 for links.

use crate::error::{Error, Result};
use crate::model::{LinkId, Topology};
use crate::paths::PathTable;
use crate::state::PlacementState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueLoad {
    pub arrival_rate: f64,
    pub service_rate: f64,
}

impl QueueLoad {
    pub fn new(arrival_rate: f64, service_rate: f64) -> Self {
        QueueLoad {
            arrival_rate,
            service_rate,
        }
    }

    pub fn utilization(&self) -> f64 {
        self.arrival_rate / self.service_rate
    }

    fn check(&self, at: Option<usize>) -> Result<f64> {
        let rho = self.utilization();
        if !(self.service_rate > 0.0) || !(rho < 1.0) {
            return Err(Error::StabilityViolation {
                arrival: self.arrival_rate,
                service: self.service_rate,
                at,
            });
        }
        Ok(rho)
    }
}

/// Mean sojourn time of an M/M/1 queue, seconds.
pub fn mm1_delay(load: QueueLoad) -> Result<f64> {
    let rho = load.check(None)?;
    Ok((1.0 / load.service_rate) / (1.0 - rho))
}

/// Mean sojourn time of an M/D/1 queue, seconds.
pub fn md1_delay(load: QueueLoad) -> Result<f64> {
    let rho = load.check(None)?;
    Ok(md1_unchecked(rho, load.service_rate))
}

#[inline]
pub(crate) fn md1_unchecked(rho: f64, mu: f64) -> f64 {
    (1.0 / (2.0 * mu)) * (2.0 - rho) / (1.0 - rho)
}

/// Sum of M/D/1 delays over the loaded links of a path. `link_load` is
/// indexed by link id (packets/s).
pub fn path_delay(t: &Topology, links: &[LinkId], link_load: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &l in links {
        let link = t.link(l);
        if link.ignored_for_load {
            continue;
        }
        let q = QueueLoad::new(link_load[l], link.service_rate_mu);
        let rho = q.check(Some(l))?;
        total += md1_unchecked(rho, link.service_rate_mu);
    }
    Ok(total)
}

/// Path delay with `extra` packets/s added on the links listed in `bumped`.
pub(crate) fn path_delay_with(
    t: &Topology,
    links: &[LinkId],
    link_load: &[f64],
    bumped: &[LinkId],
    extra: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for &l in links {
        let link = t.link(l);
        if link.ignored_for_load {
            continue;
        }
        let mut lam = link_load[l];
        if bumped.contains(&l) {
            lam += extra;
        }
        let q = QueueLoad::new(lam, link.service_rate_mu);
        let rho = q.check(Some(l))?;
        total += md1_unchecked(rho, link.service_rate_mu);
    }
    Ok(total)
}

/// Per-path traffic recomputed from the live allocations.
pub fn accumulate_path_loads(state: &PlacementState, table: &PathTable) -> Result<Vec<f64>> {
    let mut load = vec![0.0; table.paths.len()];
    for a in state.allocations.values() {
        *load.get_mut(a.path).ok_or(Error::DanglingAllocation(a.request))? += a.rate;
    }
    Ok(load)
}
