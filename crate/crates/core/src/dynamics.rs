//! One-slot evolution of the communication-computing tandem queues.
//!
//! Within slot `t` the order is fixed:
//!
//! 1. channels step their Markov chains;
//! 2. transmission and computing rates are derived from the action;
//! 3. each computing queue completes `min(K_ij, c_ij)` oldest tasks;
//! 4. each MD moves `min(Q_i, r_i)` oldest tasks to its associated ES;
//! 5. migrations depart and in-transit batches due by `t` are delivered;
//! 6. local queues are served;
//! 7. arrivals are drawn and enqueued;
//! 8. tasks that could no longer finish within the deadline are dropped;
//! 9. energy is charged and the slot record emitted.
//!
//! Step 4 transfers `min(Q_i, r_i)` rather than `r_i`, so a half-empty
//! transmission queue never creates tasks at the server.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::config::{ArrivalKind, ValidatedConfig};
use crate::model::{Action, DropReason, SystemState, TaskEntry, TaskLocation};
use crate::multihop;
use crate::rng::{slot_rng, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("invalid action at slot {slot}: {reason}")]
    ActionInvalid { slot: u64, reason: String },
}

/// Rates granted by an action and what was actually moved with them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateRealization {
    /// Transmission rate r_i in tasks per slot.
    pub r: Vec<u32>,
    /// Computing rate c_ij in tasks per slot, row-major.
    pub c: Vec<u32>,
    pub actual_uplink: Vec<u32>,
    pub actual_served: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalRealization {
    pub counts: Vec<u32>,
}

/// Everything measured in one slot. Queue fields are post-step.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub action: Action,
    pub rates: RateRealization,
    pub arrivals: Vec<u32>,
    pub local_served: Vec<u32>,
    pub migrated: u32,
    pub delivered: u32,
    pub drops_deadline: Vec<u32>,
    pub drops_overflow: Vec<u32>,
    pub energy: Vec<f64>,
    /// Tasks that completed or were dropped in this slot.
    pub finished: Vec<TaskEntry>,
    pub q_md: Vec<u32>,
    pub k_es: Vec<u32>,
    pub q_local: Vec<u32>,
    pub channel_idx: Vec<u8>,
    pub in_transit: u64,
}

impl SlotRecord {
    pub fn completions(&self) -> u64 {
        self.finished
            .iter()
            .filter(|t| matches!(t.location, TaskLocation::Completed(_)))
            .count() as u64
    }

    pub fn total_arrivals(&self) -> u64 {
        self.arrivals.iter().map(|&a| a as u64).sum()
    }

    pub fn total_drops(&self) -> u64 {
        self.drops_deadline
            .iter()
            .chain(&self.drops_overflow)
            .map(|&d| d as u64)
            .sum()
    }
}

pub fn draw_arrivals(cfg: &ValidatedConfig, slot: u64) -> ArrivalRealization {
    let mut rng = slot_rng(cfg.cfg.rng_seed, Stream::Arrivals, slot);
    let counts = cfg
        .arrival_rates
        .iter()
        .map(|&rate| match cfg.cfg.arrival_kind {
            ArrivalKind::Bernoulli => u32::from(rng.random::<f64>() < rate),
            ArrivalKind::Poisson if rate > 0.0 => {
                let d = Poisson::new(rate).expect("validated rate");
                d.sample(&mut rng) as u32
            }
            ArrivalKind::Poisson => 0,
        })
        .collect();
    ArrivalRealization { counts }
}

/// Step every (MD, ES) fading chain once.
pub fn evolve_channels(channel_idx: &mut [u8], cfg: &ValidatedConfig, slot: u64) {
    let ch = &cfg.cfg.channel_states;
    if ch.num_states() == 1 {
        return;
    }
    let mut rng = slot_rng(cfg.cfg.rng_seed, Stream::Channels, slot);
    for idx in channel_idx.iter_mut() {
        let row = &ch.transition[*idx as usize];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = row.len() - 1;
        for (k, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = k;
                break;
            }
        }
        // Skip zero-probability tail states that rounding could select.
        while row[next] == 0.0 && next > 0 {
            next -= 1;
        }
        *idx = next as u8;
    }
}

/// Whole tasks per slot delivered by Shannon capacity over `share` Hz.
pub fn shannon_tasks(power: f64, gain: f64, share_hz: f64, cfg: &ValidatedConfig) -> u32 {
    if power <= 0.0 || share_hz <= 0.0 {
        return 0;
    }
    let c = &cfg.cfg;
    let snr = power * gain / (c.noise_psd * share_hz);
    let bits = c.slot_duration * share_hz * (1.0 + snr).log2();
    // Representation error must not knock an exact integer one task down.
    ((bits / c.task_size_bits) * (1.0 + 1e-12)).floor() as u32
}

/// Instantaneous gain ḡ_ij times the current fading multiplier.
pub fn link_gain(state: &SystemState, cfg: &ValidatedConfig, md: usize, es: usize) -> f64 {
    let fade = cfg.cfg.channel_states.multipliers[state.channel_idx[state.pair(md, es)] as usize];
    cfg.gain(md, es) * fade
}

/// Number of transmitting MDs associated with each ES.
pub fn associated_counts(action: &Action, num_ess: usize) -> Vec<u32> {
    let mut n = vec![0u32; num_ess];
    for (assoc, &p) in action.assoc.iter().zip(&action.power) {
        if let (Some(j), true) = (assoc, p > 0.0) {
            n[*j] += 1;
        }
    }
    n
}

pub fn transmission_rate(state: &SystemState, action: &Action, cfg: &ValidatedConfig) -> Vec<u32> {
    let n = associated_counts(action, cfg.num_ess());
    (0..cfg.num_mds())
        .map(|i| match (action.assoc[i], action.power[i]) {
            (Some(j), p) if p > 0.0 => {
                let share = cfg.cfg.bandwidth_hz / n[j] as f64;
                shannon_tasks(p, link_gain(state, cfg, i, j), share, cfg)
            }
            _ => 0,
        })
        .collect()
}

pub fn computing_rate(action: &Action, cfg: &ValidatedConfig) -> Vec<u32> {
    let (u, jn) = (cfg.num_mds(), cfg.num_ess());
    let mut c = vec![0u32; u * jn];
    for (j, alloc) in action.cores.iter().enumerate() {
        for (i, &cores) in alloc.iter().enumerate() {
            c[i * jn + j] = tasks_for_cores(cores, cfg);
        }
    }
    c
}

pub fn tasks_for_cores(cores: u32, cfg: &ValidatedConfig) -> u32 {
    (cores as f64 * cfg.core_cycles_per_slot / cfg.cfg.task_cycles).floor() as u32
}

/// Advance `state` by one slot under `action`.
pub fn step(state: &mut SystemState, action: &Action, cfg: &ValidatedConfig) -> Result<SlotRecord, StepError> {
    let t = state.slot;
    action.validate(state, cfg).map_err(|v| StepError::ActionInvalid {
        slot: t,
        reason: v.0,
    })?;
    let (u, jn) = (cfg.num_mds(), cfg.num_ess());
    let c = &cfg.cfg;
    let caps = c.queue_caps;
    let mut finished = Vec::new();
    let mut drops_deadline = vec![0u32; u];
    let mut drops_overflow = vec![0u32; u];
    let mut energy = vec![0.0; u];

    // (1) channels
    evolve_channels(&mut state.channel_idx, cfg, t);

    // (2) rates
    let r = transmission_rate(state, action, cfg);
    let cr = computing_rate(action, cfg);

    // (3) computing service, FIFO
    let mut served = vec![0u32; u * jn];
    for idx in 0..u * jn {
        let n = state.k_es[idx].min(cr[idx]);
        for _ in 0..n {
            let mut task = state.ledger.es[idx].pop_front().expect("coherent ledger");
            task.move_to(TaskLocation::Completed(t));
            finished.push(task);
        }
        state.k_es[idx] -= n;
        served[idx] = n;
    }

    // (4) uplink
    let mut uplink = vec![0u32; u];
    for i in 0..u {
        let p = action.power[i];
        if p > 0.0 {
            energy[i] += p * c.slot_duration;
        }
        let Some(j) = action.assoc[i] else { continue };
        let moved = state.q_md[i].min(r[i]);
        if moved == 0 {
            continue;
        }
        let share = energy[i] / moved as f64;
        let idx = i * jn + j;
        for _ in 0..moved {
            let mut task = state.ledger.md[i].pop_front().expect("coherent ledger");
            task.energy_spent += share;
            if caps.is_some_and(|cap| state.k_es[idx] >= cap.k_max) {
                task.move_to(TaskLocation::Dropped(t, DropReason::Overflow));
                drops_overflow[i] += 1;
                finished.push(task);
            } else {
                task.move_to(TaskLocation::EsQueue(j));
                state.ledger.es[idx].push_back(task);
                state.k_es[idx] += 1;
            }
        }
        state.q_md[i] -= moved;
        uplink[i] = moved;
    }

    // (5) backhaul
    let migrated = multihop::depart(state, &action.migrate, cfg);
    let delivered = multihop::advance_in_transit(state, cfg, &mut finished, &mut drops_overflow);

    // (6) local computing
    let mut local_served = vec![0u32; u];
    if let Some(lc) = &c.local_compute {
        let rate = cfg.local_tasks_per_slot();
        for i in 0..u {
            if state.q_local[i] == 0 {
                continue;
            }
            let joules = lc.local_energy_coeff * lc.local_core_speed_hz.powi(3) * c.slot_duration;
            energy[i] += joules;
            let n = state.q_local[i].min(rate);
            for _ in 0..n {
                let mut task = state.ledger.local[i].pop_front().expect("coherent ledger");
                task.energy_spent += joules / n as f64;
                task.move_to(TaskLocation::Completed(t));
                finished.push(task);
            }
            state.q_local[i] -= n;
            local_served[i] = n;
        }
    }

    // (7) arrivals
    let arrivals = draw_arrivals(cfg, t).counts;
    for i in 0..u {
        for k in 0..arrivals[i] {
            let to_local = k < action.local_admit[i];
            let (len, loc) = if to_local {
                (state.q_local[i], TaskLocation::LocalQueue)
            } else {
                (state.q_md[i], TaskLocation::MdQueue)
            };
            let mut task = state.mint(i, t, TaskLocation::MdQueue);
            if caps.is_some_and(|cap| len >= cap.q_max) {
                task.move_to(TaskLocation::Dropped(t, DropReason::Overflow));
                drops_overflow[i] += 1;
                finished.push(task);
            } else if to_local {
                task.move_to(loc);
                state.ledger.local[i].push_back(task);
                state.q_local[i] += 1;
            } else {
                state.ledger.md[i].push_back(task);
                state.q_md[i] += 1;
            }
        }
    }

    // (8) deadline expiry
    if c.deadline_slots > 0 {
        expire(state, t, c.deadline_slots, &mut finished, &mut drops_deadline);
    }

    state.slot = t + 1;
    Ok(SlotRecord {
        slot: t,
        action: action.clone(),
        rates: RateRealization {
            r,
            c: cr,
            actual_uplink: uplink,
            actual_served: served,
        },
        arrivals,
        local_served,
        migrated,
        delivered,
        drops_deadline,
        drops_overflow,
        energy,
        finished,
        q_md: state.q_md.clone(),
        k_es: state.k_es.clone(),
        q_local: state.q_local.clone(),
        channel_idx: state.channel_idx.clone(),
        in_transit: state.in_transit_count(),
    })
}

/// Drop every task whose age at the start of the next slot exceeds the
/// deadline; such a task could not complete in time.
fn expire(state: &mut SystemState, t: u64, deadline: u64, finished: &mut Vec<TaskEntry>, drops: &mut [u32]) {
    let expired = |task: &TaskEntry| t + 1 - task.born_slot > deadline;
    let mut dropped: Vec<TaskEntry> = Vec::new();
    for i in 0..state.num_mds {
        while state.ledger.md[i].front().is_some_and(expired) {
            dropped.push(state.ledger.md[i].pop_front().unwrap());
            state.q_md[i] -= 1;
        }
        while state.ledger.local[i].front().is_some_and(expired) {
            dropped.push(state.ledger.local[i].pop_front().unwrap());
            state.q_local[i] -= 1;
        }
    }
    // ES queues may hold late-delivered migrated tasks behind younger ones.
    for idx in 0..state.ledger.es.len() {
        let queue = &mut state.ledger.es[idx];
        if queue.iter().any(expired) {
            let before = queue.len();
            let (old, keep): (Vec<_>, Vec<_>) = queue.drain(..).partition(expired);
            queue.extend(keep);
            state.k_es[idx] -= (before - queue.len()) as u32;
            dropped.extend(old);
        }
    }
    for batch in &mut state.in_transit {
        if batch.tasks.iter().any(expired) {
            let (old, keep): (Vec<_>, Vec<_>) = batch.tasks.drain(..).partition(expired);
            batch.tasks = keep;
            dropped.extend(old);
        }
    }
    state.in_transit.retain(|b| !b.tasks.is_empty());
    dropped.sort_by_key(|task| (task.born_slot, task.task_id));
    for mut task in dropped {
        drops[task.owner_md] += 1;
        task.move_to(TaskLocation::Dropped(t, DropReason::Deadline));
        finished.push(task);
    }
}
