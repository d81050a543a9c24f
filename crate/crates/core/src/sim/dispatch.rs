use std::collections::{BTreeSet, VecDeque};

use rand::Rng;

use super::SimError;
use crate::models::Policy;
use crate::rng::{rng_from_seed, SimRng};

const ABSENT: u32 = u32::MAX;

/// Set of server indices with O(1) insert, remove and uniform sampling.
#[derive(Debug, Clone)]
pub struct IdleSet {
    members: Vec<u32>,
    pos: Vec<u32>,
}

impl IdleSet {
    pub fn empty(n: u32) -> IdleSet {
        IdleSet { members: Vec::with_capacity(n as usize), pos: vec![ABSENT; n as usize] }
    }

    pub fn full(n: u32) -> IdleSet {
        IdleSet { members: (0..n).collect(), pos: (0..n).collect() }
    }

    /// Returns false if `i` was already present.
    pub fn insert(&mut self, i: u32) -> bool {
        if self.pos[i as usize] != ABSENT {
            return false;
        }
        self.pos[i as usize] = self.members.len() as u32;
        self.members.push(i);
        true
    }

    /// Returns false if `i` was absent.
    pub fn remove(&mut self, i: u32) -> bool {
        let p = self.pos[i as usize];
        if p == ABSENT {
            return false;
        }
        let last = self.members.pop().unwrap();
        if last != i {
            self.members[p as usize] = last;
            self.pos[last as usize] = p;
        }
        self.pos[i as usize] = ABSENT;
        true
    }

    pub fn contains(&self, i: u32) -> bool {
        self.pos[i as usize] != ABSENT
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn sample(&self, rng: &mut SimRng) -> Option<u32> {
        if self.members.is_empty() {
            None
        } else {
            Some(self.members[rng.random_range(0..self.members.len())])
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Server {
    pub queue: VecDeque<u32>,
    pub in_service: Option<u32>,
    /// Instant at which all work currently assigned here is done.
    pub free_at: f64,
    pub busy_time: f64,
}

/// Servers of one stage plus the indices the dispatchers consult.
#[derive(Debug, Clone)]
pub struct Pool {
    pub(crate) servers: Vec<Server>,
    idle: IdleSet,
    /// Busy servers ordered by `free_at` (non-negative floats order like
    /// their bit patterns).
    busy: BTreeSet<(u64, u32)>,
}

impl Pool {
    pub fn new(n: u32) -> Pool {
        let server = Server { queue: VecDeque::new(), in_service: None, free_at: 0.0, busy_time: 0.0 };
        Pool { servers: vec![server; n as usize], idle: IdleSet::full(n), busy: BTreeSet::new() }
    }

    /// Snapshot at time 0 where server `i` has `backlogs[i]` seconds of
    /// unfinished work.
    pub fn with_backlogs(backlogs: &[f64]) -> Pool {
        let mut pool = Pool::new(backlogs.len() as u32);
        for (i, &u) in backlogs.iter().enumerate() {
            if u > 0.0 {
                pool.mark_busy(i as u32, u);
                pool.servers[i].in_service = Some(u32::MAX);
            }
        }
        pool
    }

    pub fn len(&self) -> u32 {
        self.servers.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.servers.is_empty()
    }

    pub fn is_idle(&self, i: u32) -> bool {
        self.idle.contains(i)
    }

    pub fn any_idle(&self) -> bool {
        !self.idle.is_empty()
    }

    pub fn backlog(&self, i: u32, now: f64) -> f64 {
        (self.servers[i as usize].free_at - now).max(0.0)
    }

    /// Uniform over idle servers if any, else uniform over the busy
    /// servers sharing the earliest `free_at`.
    pub fn least_loaded(&self, rng: &mut SimRng) -> u32 {
        if let Some(i) = self.idle.sample(rng) {
            return i;
        }
        let &(key, first) = self.busy.first().expect("no servers");
        let ties: Vec<u32> = self.busy.range((key, 0)..(key + 1, 0)).map(|&(_, i)| i).collect();
        if ties.len() == 1 {
            first
        } else {
            ties[rng.random_range(0..ties.len())]
        }
    }

    pub(crate) fn mark_busy(&mut self, i: u32, free_at: f64) {
        let s = &mut self.servers[i as usize];
        if self.idle.remove(i) {
            s.free_at = free_at;
        } else {
            self.busy.remove(&(s.free_at.to_bits(), i));
            s.free_at = free_at;
        }
        self.busy.insert((free_at.to_bits(), i));
    }

    pub(crate) fn mark_idle(&mut self, i: u32) {
        let s = &self.servers[i as usize];
        self.busy.remove(&(s.free_at.to_bits(), i));
        self.idle.insert(i);
    }

    pub(crate) fn busy_time(&self) -> f64 {
        self.servers.iter().map(|s| s.busy_time).sum()
    }
}

/// Per-dispatcher state: the RR counter, the JIQ idle-bit table and the
/// random stream used for tie-breaking.
#[derive(Debug, Clone)]
pub struct Dispatcher {
    policy: Policy,
    n: u32,
    dispatched: u64,
    idle_bits: IdleSet,
    messages: u64,
    rng: SimRng,
}

impl Dispatcher {
    /// All servers start idle, so every JIQ bit starts set.
    pub fn new(policy: Policy, n: u32, seed: u64) -> Dispatcher {
        Dispatcher { policy, n, dispatched: 0, idle_bits: IdleSet::full(n), messages: 0, rng: rng_from_seed(seed) }
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn messages(&self) -> u64 {
        self.messages
    }

    pub fn idle_bit(&self, i: u32) -> bool {
        self.idle_bits.contains(i)
    }

    /// Picks the server for the next unit.
    ///
    /// RR sends the k-th unit (from 0) to `k mod n`. JIQ takes a uniformly
    /// random set bit and clears it, or any server uniformly when no bit is
    /// set. LWL takes the least unfinished work, ties uniform.
    pub fn select(&mut self, pool: &Pool) -> u32 {
        let k = self.dispatched;
        self.dispatched += 1;
        match self.policy {
            Policy::RR => (k % self.n as u64) as u32,
            Policy::JIQ => match self.idle_bits.sample(&mut self.rng) {
                Some(i) => {
                    self.idle_bits.remove(i);
                    i
                }
                None => self.rng.random_range(0..self.n),
            },
            Policy::LWL => pool.least_loaded(&mut self.rng),
        }
    }

    /// A server reports it has just gone idle. Only JIQ keeps the table;
    /// a bit that is already set means the engine lost track of state.
    pub fn notify_idle(&mut self, server: u32) -> Result<(), SimError> {
        if self.policy != Policy::JIQ {
            return Ok(());
        }
        if !self.idle_bits.insert(server) {
            return Err(SimError::Internal(format!("idle bit of server {server} already set")));
        }
        self.messages += 1;
        Ok(())
    }
}

/// Indices attaining the minimum backlog.
pub fn least_work_choices(backlogs: &[f64]) -> Vec<usize> {
    let min = backlogs.iter().cloned().fold(f64::INFINITY, f64::min);
    (0..backlogs.len()).filter(|&i| backlogs[i] == min).collect()
}

/// Minimum unfinished work over all servers after adding `x` to server
/// `choice`.
pub fn min_after_assignment(backlogs: &[f64], choice: usize, x: f64) -> f64 {
    backlogs
        .iter()
        .enumerate()
        .map(|(i, &u)| if i == choice { u + x } else { u })
        .fold(f64::INFINITY, f64::min)
}
