//! Idealized TDMA: a global scheduler that hands out exclusive slots with no
//! control overhead.
//!
//! Every MAC registers at start-up and pushes its queue length whenever it
//! changes. At each frame start the scheduler walks the registry round-robin,
//! continuing after the last node it served in the previous frame, and gives
//! one slot per visit to every node that still has unserved demand.

use std::collections::VecDeque;

use thiserror::Error;

use crate::engine::SimTime;
use crate::traffic::Packet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TdmaError {
    #[error("node {0} is already registered")]
    DuplicateRegistration(usize),
    #[error("node {0} is not registered")]
    UnknownNode(usize),
    #[error("slot duration must be positive, got {0} s")]
    InvalidSlotDuration(f64),
    #[error("a frame needs at least one slot")]
    NoSlots,
    #[error("{0} retransmission attempts requested; only 0 is supported")]
    UnsupportedRetransmissions(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TdmaConfig {
    pub slot_duration: SimTime,
    pub slots_per_frame: usize,
    pub retransmission_attempts: u32,
}

impl TdmaConfig {
    pub fn new(slot_duration: SimTime, slots_per_frame: usize, retransmission_attempts: u32) -> Result<Self, TdmaError> {
        if slot_duration == SimTime::ZERO {
            return Err(TdmaError::InvalidSlotDuration(0.0));
        }
        if slots_per_frame == 0 {
            return Err(TdmaError::NoSlots);
        }
        if retransmission_attempts != 0 {
            return Err(TdmaError::UnsupportedRetransmissions(retransmission_attempts));
        }
        Ok(TdmaConfig {
            slot_duration,
            slots_per_frame,
            retransmission_attempts,
        })
    }

    pub fn frame_duration(&self) -> SimTime {
        SimTime::from_nanos(self.slot_duration.as_nanos() * self.slots_per_frame as u64)
    }

    pub fn frame_start(&self, frame: u64) -> SimTime {
        SimTime::from_nanos(self.frame_duration().as_nanos() * frame)
    }

    pub fn slot_start(&self, frame: u64, slot: usize) -> SimTime {
        SimTime::from_nanos(self.frame_start(frame).as_nanos() + self.slot_duration.as_nanos() * slot as u64)
    }
}

impl Default for TdmaConfig {
    /// 10 ms slots, 10 slots per frame, no retransmissions.
    fn default() -> Self {
        TdmaConfig {
            slot_duration: SimTime::from_nanos(10_000_000),
            slots_per_frame: 10,
            retransmission_attempts: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BufferReport {
    pub node: usize,
    pub queued: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TdmaSchedule {
    pub frame_index: u64,
    /// One entry per slot; `None` is an empty slot.
    pub assignments: Vec<Option<usize>>,
}

impl TdmaSchedule {
    pub fn slots_of(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignments
            .iter()
            .enumerate()
            .filter_map(move |(slot, a)| (*a == Some(node)).then_some(slot))
    }

    pub fn count_for(&self, node: usize) -> usize {
        self.slots_of(node).count()
    }

    pub fn is_idle(&self) -> bool {
        self.assignments.iter().all(Option::is_none)
    }
}

#[derive(Clone, Debug, Default)]
pub struct TdmaScheduler {
    registry: Vec<usize>,
    // indexed by registry position
    demand: Vec<u32>,
    // registry position to start the next round-robin walk from
    cursor: usize,
}

impl TdmaScheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, node: usize) -> Result<(), TdmaError> {
        if self.registry.contains(&node) {
            return Err(TdmaError::DuplicateRegistration(node));
        }
        self.registry.push(node);
        self.demand.push(0);
        Ok(())
    }

    pub fn registry(&self) -> &[usize] {
        &self.registry
    }

    fn position(&self, node: usize) -> Result<usize, TdmaError> {
        self.registry
            .iter()
            .position(|&n| n == node)
            .ok_or(TdmaError::UnknownNode(node))
    }

    /// Latest report wins.
    pub fn report_buffer(&mut self, report: BufferReport) -> Result<(), TdmaError> {
        let idx = self.position(report.node)?;
        self.demand[idx] = report.queued;
        Ok(())
    }

    pub fn reported(&self, node: usize) -> Result<u32, TdmaError> {
        Ok(self.demand[self.position(node)?])
    }

    pub fn compute_schedule(&mut self, frame_index: u64, slots_per_frame: usize) -> TdmaSchedule {
        let mut assignments = vec![None; slots_per_frame];
        let count = self.registry.len();
        if count == 0 {
            return TdmaSchedule {
                frame_index,
                assignments,
            };
        }
        let mut remaining = self.demand.clone();
        let mut outstanding: u64 = remaining.iter().map(|&d| u64::from(d)).sum();
        let mut pos = self.cursor % count;
        let mut slot = 0;
        while slot < slots_per_frame && outstanding > 0 {
            if remaining[pos] > 0 {
                remaining[pos] -= 1;
                outstanding -= 1;
                assignments[slot] = Some(self.registry[pos]);
                slot += 1;
                self.cursor = (pos + 1) % count;
            }
            pos = (pos + 1) % count;
        }
        TdmaSchedule {
            frame_index,
            assignments,
        }
    }
}

/// A slot this MAC will transmit in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotTransmission {
    pub slot: usize,
    pub at: SimTime,
    /// Last slot of this node in the frame; the MAC reports its buffer after it.
    pub last_in_frame: bool,
}

/// Per-node FIFO transmit queue.
#[derive(Clone, Debug)]
pub struct MacQueue {
    node: usize,
    queue: VecDeque<Packet>,
}

impl MacQueue {
    pub fn new(node: usize) -> Self {
        MacQueue {
            node,
            queue: VecDeque::new(),
        }
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.queue.iter()
    }

    /// Appends a packet and returns the report to push to the scheduler.
    pub fn enqueue(&mut self, packet: Packet) -> BufferReport {
        self.queue.push_back(packet);
        self.report()
    }

    pub fn report(&self) -> BufferReport {
        BufferReport {
            node: self.node,
            queued: u32::try_from(self.queue.len()).unwrap_or(u32::MAX),
        }
    }

    /// Transmission times for this node's slots in `schedule`.
    pub fn on_schedule(&self, schedule: &TdmaSchedule, config: &TdmaConfig) -> Vec<SlotTransmission> {
        let slots: Vec<usize> = schedule.slots_of(self.node).collect();
        let last = slots.last().copied();
        slots
            .into_iter()
            .map(|slot| SlotTransmission {
                slot,
                at: config.slot_start(schedule.frame_index, slot),
                last_in_frame: Some(slot) == last,
            })
            .collect()
    }

    /// Head-of-line packet for the current slot. `None` leaves the slot idle.
    pub fn dequeue_for_slot(&mut self) -> Option<Packet> {
        self.queue.pop_front()
    }
}
