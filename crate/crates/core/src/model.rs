//! Shared domain types: the task ledger, the per-slot system state and the
//! per-slot control action.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ValidatedConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Deadline,
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskLocation {
    MdQueue,
    EsQueue(usize),
    InTransitBackhaul { link: usize, arrive_slot: u64 },
    LocalQueue,
    Completed(u64),
    Dropped(u64, DropReason),
}

impl TaskLocation {
    pub fn is_terminal(&self) -> bool {
        matches!(self, TaskLocation::Completed(_) | TaskLocation::Dropped(..))
    }

    /// Whether a task may move from `self` to `next`. Tasks never return to
    /// the MD queue and never leave a terminal location.
    pub fn can_transition_to(&self, next: &TaskLocation) -> bool {
        use TaskLocation::*;
        match (self, next) {
            (_, MdQueue) => false,
            (Completed(_) | Dropped(..), _) => false,
            (MdQueue, _) => true,
            (EsQueue(_), EsQueue(_) | LocalQueue) => false,
            (EsQueue(_), _) => true,
            (InTransitBackhaul { .. }, EsQueue(_) | Dropped(..)) => true,
            (InTransitBackhaul { .. }, _) => false,
            (LocalQueue, Completed(_) | Dropped(..)) => true,
            (LocalQueue, _) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub task_id: u64,
    pub owner_md: usize,
    pub born_slot: u64,
    pub location: TaskLocation,
    /// Joules attributed to this task so far.
    pub energy_spent: f64,
}

impl TaskEntry {
    pub(crate) fn move_to(&mut self, next: TaskLocation) {
        debug_assert!(
            self.location.can_transition_to(&next),
            "illegal task move {:?} -> {:?}",
            self.location,
            next
        );
        self.location = next;
    }
}

/// A group of tasks travelling over one backhaul link.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitBatch {
    pub link: usize,
    pub to_es: usize,
    pub md: usize,
    pub arrive_slot: u64,
    pub tasks: Vec<TaskEntry>,
}

/// FIFO task lists behind every scalar queue length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ledger {
    pub md: Vec<VecDeque<TaskEntry>>,
    /// Row-major `i * J + j`.
    pub es: Vec<VecDeque<TaskEntry>>,
    pub local: Vec<VecDeque<TaskEntry>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub slot: u64,
    pub num_mds: usize,
    pub num_ess: usize,
    /// Transmission queue lengths Q_i.
    pub q_md: Vec<u32>,
    /// Computing queue lengths K_ij, row-major `i * J + j`.
    pub k_es: Vec<u32>,
    pub q_local: Vec<u32>,
    /// Fading state index per (MD, ES), row-major.
    pub channel_idx: Vec<u8>,
    pub in_transit: Vec<TransitBatch>,
    pub ledger: Ledger,
    pub(crate) next_task_id: u64,
}

impl SystemState {
    /// Empty queues, every channel in state 0.
    pub fn new(num_mds: usize, num_ess: usize) -> Self {
        SystemState {
            slot: 0,
            num_mds,
            num_ess,
            q_md: vec![0; num_mds],
            k_es: vec![0; num_mds * num_ess],
            q_local: vec![0; num_mds],
            channel_idx: vec![0; num_mds * num_ess],
            in_transit: Vec::new(),
            ledger: Ledger {
                md: vec![VecDeque::new(); num_mds],
                es: vec![VecDeque::new(); num_mds * num_ess],
                local: vec![VecDeque::new(); num_mds],
            },
            next_task_id: 0,
        }
    }

    pub fn initial(cfg: &ValidatedConfig) -> Self {
        Self::new(cfg.num_mds(), cfg.num_ess())
    }

    /// Build a state with the given queue lengths; every task is minted as
    /// born at `slot`.
    pub fn from_counts(
        num_mds: usize,
        num_ess: usize,
        slot: u64,
        q_md: &[u32],
        k_es: &[u32],
        channel_idx: &[u8],
    ) -> Self {
        assert_eq!(q_md.len(), num_mds);
        assert_eq!(k_es.len(), num_mds * num_ess);
        assert_eq!(channel_idx.len(), num_mds * num_ess);
        let mut s = Self::new(num_mds, num_ess);
        s.slot = slot;
        s.channel_idx.copy_from_slice(channel_idx);
        for (i, &n) in q_md.iter().enumerate() {
            for _ in 0..n {
                let t = s.mint(i, slot, TaskLocation::MdQueue);
                s.ledger.md[i].push_back(t);
            }
            s.q_md[i] = n;
        }
        for (idx, &n) in k_es.iter().enumerate() {
            let (i, j) = (idx / num_ess, idx % num_ess);
            for _ in 0..n {
                let t = s.mint(i, slot, TaskLocation::EsQueue(j));
                s.ledger.es[idx].push_back(t);
            }
            s.k_es[idx] = n;
        }
        s
    }

    pub(crate) fn mint(&mut self, owner_md: usize, born_slot: u64, location: TaskLocation) -> TaskEntry {
        let id = self.next_task_id;
        self.next_task_id += 1;
        TaskEntry {
            task_id: id,
            owner_md,
            born_slot,
            location,
            energy_spent: 0.0,
        }
    }

    /// Number of tasks ever created in this state's history.
    pub fn tasks_minted(&self) -> u64 {
        self.next_task_id
    }

    #[inline]
    pub fn pair(&self, md: usize, es: usize) -> usize {
        md * self.num_ess + es
    }

    #[inline]
    pub fn k(&self, md: usize, es: usize) -> u32 {
        self.k_es[md * self.num_ess + es]
    }

    /// Total computing backlog Σ_i K_ij at one ES.
    pub fn es_backlog(&self, es: usize) -> u64 {
        (0..self.num_mds).map(|i| self.k(i, es) as u64).sum()
    }

    pub fn in_transit_count(&self) -> u64 {
        self.in_transit.iter().map(|b| b.tasks.len() as u64).sum()
    }

    /// Tasks currently held anywhere in the system.
    pub fn population(&self) -> u64 {
        let sum = |v: &[u32]| v.iter().map(|&x| x as u64).sum::<u64>();
        sum(&self.q_md) + sum(&self.k_es) + sum(&self.q_local) + self.in_transit_count()
    }

    /// Scalar queue lengths agree with the ledger and every task sits where
    /// its location says.
    pub fn check_coherence(&self) -> Result<(), String> {
        for i in 0..self.num_mds {
            if self.ledger.md[i].len() != self.q_md[i] as usize {
                return Err(format!("Q_{i} = {} but ledger holds {}", self.q_md[i], self.ledger.md[i].len()));
            }
            if self.ledger.local[i].len() != self.q_local[i] as usize {
                return Err(format!("local_{i} mismatch"));
            }
            if self.ledger.md[i].iter().any(|t| t.location != TaskLocation::MdQueue || t.owner_md != i) {
                return Err(format!("misplaced task in MD queue {i}"));
            }
            for j in 0..self.num_ess {
                let idx = self.pair(i, j);
                if self.ledger.es[idx].len() != self.k_es[idx] as usize {
                    return Err(format!("K_{i}{j} = {} but ledger holds {}", self.k_es[idx], self.ledger.es[idx].len()));
                }
                if self.ledger.es[idx].iter().any(|t| t.location != TaskLocation::EsQueue(j) || t.owner_md != i) {
                    return Err(format!("misplaced task in ES queue ({i},{j})"));
                }
            }
        }
        Ok(())
    }
}

/// Move of `count` tasks of MD `md` from the queue at `from` to the queue at
/// `to` over the backhaul link joining them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Migration {
    pub from: usize,
    pub to: usize,
    pub md: usize,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    /// Transmit power p_i in watts, drawn from the configured levels.
    pub power: Vec<f64>,
    /// Association η_i: at most one ES per MD.
    pub assoc: Vec<Option<usize>>,
    /// Cores per ES per MD, `cores[j][i]`.
    pub cores: Vec<Vec<u32>>,
    /// How many of this slot's arrivals go to the local queue, first-come.
    pub local_admit: Vec<u32>,
    pub migrate: Vec<Migration>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct ActionViolation(pub String);

impl Action {
    pub fn idle(num_mds: usize, num_ess: usize) -> Self {
        Action {
            power: vec![0.0; num_mds],
            assoc: vec![None; num_mds],
            cores: vec![vec![0; num_mds]; num_ess],
            local_admit: vec![0; num_mds],
            migrate: Vec::new(),
        }
    }

    pub fn validate(&self, state: &SystemState, cfg: &ValidatedConfig) -> Result<(), ActionViolation> {
        let (u, j_count) = (cfg.num_mds(), cfg.num_ess());
        let bad = |m: String| Err(ActionViolation(m));
        if self.power.len() != u || self.assoc.len() != u || self.local_admit.len() != u {
            return bad("per-MD vectors must have one entry per MD".into());
        }
        if self.cores.len() != j_count || self.cores.iter().any(|c| c.len() != u) {
            return bad("core allocation must be J x U".into());
        }
        for i in 0..u {
            let p = self.power[i];
            if !cfg.cfg.power_levels.contains(&p) {
                return bad(format!("MD {i}: power {p} is not a configured level"));
            }
            match self.assoc[i] {
                Some(j) if j >= j_count => return bad(format!("MD {i}: ES {j} out of range")),
                None if p > 0.0 => return bad(format!("MD {i}: transmits at {p} W without association")),
                _ => {}
            }
            if self.local_admit[i] > 0 && cfg.cfg.local_compute.is_none() {
                return bad(format!("MD {i}: local admission without local compute"));
            }
        }
        for (j, alloc) in self.cores.iter().enumerate() {
            let used: u64 = alloc.iter().map(|&c| c as u64).sum();
            if used > cfg.cores[j] as u64 {
                return bad(format!("ES {j}: {used} cores allocated, {} available", cfg.cores[j]));
            }
        }
        let links = &cfg.cfg.backhaul_links;
        let mut link_load = vec![0u64; links.len()];
        let mut link_dir: Vec<Option<(usize, usize)>> = vec![None; links.len()];
        let mut taken = vec![0u64; u * j_count];
        for m in &self.migrate {
            if m.md >= u || m.from >= j_count || m.to >= j_count {
                return bad(format!("migration {m:?} out of range"));
            }
            let Some(l) = links
                .iter()
                .position(|l| (l.es_a, l.es_b) == (m.from, m.to) || (l.es_b, l.es_a) == (m.from, m.to))
            else {
                return bad(format!("no backhaul link between ES {} and ES {}", m.from, m.to));
            };
            match link_dir[l] {
                Some(dir) if dir != (m.from, m.to) => {
                    return bad(format!("link {l} used in both directions"));
                }
                _ => link_dir[l] = Some((m.from, m.to)),
            }
            link_load[l] += m.count as u64;
            if link_load[l] > links[l].capacity_tasks_per_slot as u64 {
                return bad(format!("link {l} over capacity"));
            }
            let idx = state.pair(m.md, m.from);
            taken[idx] += m.count as u64;
            if taken[idx] > state.k_es[idx] as u64 {
                return bad(format!("migration takes {} of K_{}{} = {}", taken[idx], m.md, m.from, state.k_es[idx]));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{tests::tiny, validate_config, BackhaulLink};
    use TaskLocation::*;

    #[test]
    fn locations_move_forward_only() {
        assert!(MdQueue.can_transition_to(&EsQueue(0)));
        assert!(MdQueue.can_transition_to(&LocalQueue));
        assert!(EsQueue(0).can_transition_to(&InTransitBackhaul { link: 0, arrive_slot: 3 }));
        assert!(InTransitBackhaul { link: 0, arrive_slot: 3 }.can_transition_to(&EsQueue(1)));
        assert!(EsQueue(1).can_transition_to(&Completed(4)));
        assert!(!EsQueue(0).can_transition_to(&MdQueue));
        assert!(!LocalQueue.can_transition_to(&EsQueue(0)));
        assert!(!Completed(1).can_transition_to(&Dropped(2, DropReason::Deadline)));
        assert!(!Dropped(1, DropReason::Overflow).can_transition_to(&MdQueue));
    }

    #[test]
    fn from_counts_is_coherent() {
        let s = SystemState::from_counts(2, 2, 4, &[3, 0], &[1, 2, 0, 5], &[0, 1, 0, 0]);
        s.check_coherence().unwrap();
        assert_eq!(s.population(), 11);
        assert_eq!(s.es_backlog(1), 7);
        assert_eq!(s.tasks_minted(), 11);
    }

    #[test]
    fn action_validation_catches_each_invariant() {
        let mut c = tiny();
        c.num_ess = 2;
        c.cores_per_es = crate::config::PerNode::All(2);
        c.backhaul_links = vec![BackhaulLink { es_a: 0, es_b: 1, delay_slots: 0, capacity_tasks_per_slot: 2 }];
        let cfg = validate_config(c).unwrap();
        let s = SystemState::from_counts(1, 2, 0, &[2], &[3, 0], &[0, 0]);
        let ok = Action::idle(1, 2);
        ok.validate(&s, &cfg).unwrap();

        let mut a = ok.clone();
        a.power[0] = 0.05;
        assert!(a.validate(&s, &cfg).is_err());
        a.power[0] = 0.1;
        assert!(a.validate(&s, &cfg).is_err(), "power without association");
        a.assoc[0] = Some(1);
        a.validate(&s, &cfg).unwrap();

        let mut a = ok.clone();
        a.cores[0][0] = 3;
        assert!(a.validate(&s, &cfg).is_err());

        let mut a = ok.clone();
        a.local_admit[0] = 1;
        assert!(a.validate(&s, &cfg).is_err());

        let mut a = ok.clone();
        a.migrate.push(Migration { from: 0, to: 1, md: 0, count: 3 });
        assert!(a.validate(&s, &cfg).is_err(), "over link capacity");
        a.migrate[0].count = 2;
        a.validate(&s, &cfg).unwrap();
        a.migrate.push(Migration { from: 1, to: 0, md: 0, count: 0 });
        assert!(a.validate(&s, &cfg).is_err(), "both directions");
    }
}
