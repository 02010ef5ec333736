//! Inter-server task migration over backhaul links.
//!
//! A link is a delay/capacity pipe: delay 0 or 1 stands for a wired
//! interconnect, longer delays for store-carry-forward transport by
//! vehicles. Tasks in transit keep ageing toward their deadline.

use crate::config::ValidatedConfig;
use crate::dynamics::tasks_for_cores;
use crate::model::{DropReason, Migration, SystemState, TaskEntry, TaskLocation, TransitBatch};

/// Threshold-halving migration plan for the current state.
///
/// For each link (j, j′) the more loaded side sends
/// `min(capacity, ⌊(B_j − B_j′)/2⌋)` tasks when the imbalance exceeds
/// `δ + 2·delay·μ_j′`, where μ_j′ is the destination's full-core service
/// rate. Tasks leave from the largest per-MD queue first. Links are handled
/// in configuration order and see the backlogs left by earlier links.
pub fn plan_migrations(state: &SystemState, cfg: &ValidatedConfig, threshold: f64) -> Vec<Migration> {
    let jn = cfg.num_ess();
    let mut backlog: Vec<i64> = (0..jn).map(|j| state.es_backlog(j) as i64).collect();
    let mut available: Vec<u32> = state.k_es.clone();
    let mut plan = Vec::new();
    for link in &cfg.cfg.backhaul_links {
        for (from, to) in [(link.es_a, link.es_b), (link.es_b, link.es_a)] {
            let diff = backlog[from] - backlog[to];
            let service = tasks_for_cores(cfg.cores[to], cfg) as f64;
            let delay_adjust = link.delay_slots as f64 * service;
            if diff <= 0 || (diff as f64) <= threshold + 2.0 * delay_adjust {
                continue;
            }
            let mut remaining = (link.capacity_tasks_per_slot as i64).min(diff / 2) as u32;
            while remaining > 0 {
                let Some(md) = (0..state.num_mds)
                    .filter(|&i| available[state.pair(i, from)] > 0)
                    .max_by_key(|&i| (available[state.pair(i, from)], std::cmp::Reverse(i)))
                else {
                    break;
                };
                let idx = state.pair(md, from);
                let count = remaining.min(available[idx]);
                available[idx] -= count;
                remaining -= count;
                backlog[from] -= count as i64;
                backlog[to] += count as i64;
                plan.push(Migration { from, to, md, count });
            }
            // at most one direction per link per slot
            break;
        }
    }
    plan
}

/// Move migrating tasks from their ES queues onto the backhaul. Returns the
/// number of tasks that departed.
pub(crate) fn depart(state: &mut SystemState, migrations: &[Migration], cfg: &ValidatedConfig) -> u32 {
    let t = state.slot;
    let mut moved = 0;
    for m in migrations {
        let link = cfg
            .cfg
            .backhaul_links
            .iter()
            .position(|l| (l.es_a, l.es_b) == (m.from, m.to) || (l.es_b, l.es_a) == (m.from, m.to))
            .expect("validated migration");
        let arrive_slot = t + cfg.cfg.backhaul_links[link].delay_slots;
        let idx = state.pair(m.md, m.from);
        // Service earlier in the slot may have shrunk the queue.
        let n = m.count.min(state.k_es[idx]);
        if n == 0 {
            continue;
        }
        let tasks: Vec<TaskEntry> = state.ledger.es[idx]
            .drain(..n as usize)
            .map(|mut task| {
                task.move_to(TaskLocation::InTransitBackhaul { link, arrive_slot });
                task
            })
            .collect();
        state.k_es[idx] -= n;
        state.in_transit.push(TransitBatch {
            link,
            to_es: m.to,
            md: m.md,
            arrive_slot,
            tasks,
        });
        moved += n;
    }
    moved
}

/// Deliver every batch due by the current slot to its destination queue,
/// preserving batch order. Returns the number of delivered tasks.
pub fn advance_in_transit(
    state: &mut SystemState,
    cfg: &ValidatedConfig,
    finished: &mut Vec<TaskEntry>,
    drops_overflow: &mut [u32],
) -> u32 {
    let t = state.slot;
    if state.in_transit.iter().all(|b| b.arrive_slot > t) {
        return 0;
    }
    let caps = cfg.cfg.queue_caps;
    let (due, pending): (Vec<_>, Vec<_>) = std::mem::take(&mut state.in_transit)
        .into_iter()
        .partition(|b| b.arrive_slot <= t);
    state.in_transit = pending;
    let mut delivered = 0;
    for batch in due {
        let idx = state.pair(batch.md, batch.to_es);
        for mut task in batch.tasks {
            if caps.is_some_and(|c| state.k_es[idx] >= c.k_max) {
                task.move_to(TaskLocation::Dropped(t, DropReason::Overflow));
                drops_overflow[task.owner_md] += 1;
                finished.push(task);
                continue;
            }
            task.move_to(TaskLocation::EsQueue(batch.to_es));
            state.ledger.es[idx].push_back(task);
            state.k_es[idx] += 1;
            delivered += 1;
        }
    }
    delivered
}
