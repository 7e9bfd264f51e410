//! Simulated message passing under a communication-range constraint.
//!
//! Robots never share memory: every piece of inter-robot data travels through
//! a [`Message`] dropped into a per-robot mailbox, delivered only when sender
//! and recipient are within range at send time. Delivery is instantaneous
//! within a simulation step; drops are a modeled outcome, not an error.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::estimator::Observation;
use crate::geometry::Point2;
use crate::{CellIndex, RobotId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("unknown robot id {0}")]
    UnknownRobot(RobotId),
}

/// Maximum distance at which two robots can exchange messages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CommRange {
    Unlimited,
    /// Inclusive bound, in meters.
    Limited(f64),
}

impl CommRange {
    /// Whether a separation distance is within range (inclusive).
    pub fn contains(&self, distance: f64) -> bool {
        match *self {
            CommRange::Unlimited => true,
            CommRange::Limited(r) => distance <= r,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkConfig {
    pub comm_range: CommRange,
}

impl NetworkConfig {
    pub fn unlimited() -> Self {
        NetworkConfig {
            comm_range: CommRange::Unlimited,
        }
    }

    pub fn limited(range: f64) -> Self {
        NetworkConfig {
            comm_range: CommRange::Limited(range),
        }
    }
}

/// Robots within communication range of `robot`, ascending by id.
pub fn neighbors(
    robot: RobotId,
    positions: &[Point2],
    cfg: &NetworkConfig,
) -> Result<Vec<RobotId>, NetError> {
    if robot >= positions.len() {
        return Err(NetError::UnknownRobot(robot));
    }
    Ok((0..positions.len())
        .filter(|&j| j != robot && cfg.comm_range.contains(positions[robot].distance(positions[j])))
        .collect())
}

/// Connected components of the communication graph. Each component is sorted
/// ascending and components are ordered by their smallest member.
pub fn connected_components(positions: &[Point2], cfg: &NetworkConfig) -> Vec<Vec<RobotId>> {
    let members: Vec<RobotId> = (0..positions.len()).collect();
    connected_components_of(&members, positions, cfg)
}

/// Connected components of the subgraph induced by `members`. Robots outside
/// the member list are ignored even when in range.
pub fn connected_components_of(
    members: &[RobotId],
    positions: &[Point2],
    cfg: &NetworkConfig,
) -> Vec<Vec<RobotId>> {
    let mut seen: alloc::collections::BTreeSet<RobotId> = alloc::collections::BTreeSet::new();
    let mut components = Vec::new();
    for &start in members {
        if seen.contains(&start) {
            continue;
        }
        let mut component = Vec::new();
        let mut queue = VecDeque::new();
        queue.push_back(start);
        seen.insert(start);
        while let Some(i) = queue.pop_front() {
            component.push(i);
            for &j in members {
                if !seen.contains(&j)
                    && cfg.comm_range.contains(positions[i].distance(positions[j]))
                {
                    seen.insert(j);
                    queue.push_back(j);
                }
            }
        }
        component.sort_unstable();
        components.push(component);
    }
    components
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Recipient {
    Unicast(RobotId),
    Broadcast,
}

/// The protocol vocabulary of the distributed assignment and the estimator
/// exchange. Payload shapes are fixed per kind by construction.
#[derive(Clone, Debug, PartialEq)]
pub enum MessageKind {
    /// Ask a robot for its current assignment.
    RequestAssignment,
    /// Deliver an assignment (initializer to group member).
    SendAssignment { cells: Vec<CellIndex> },
    /// Deliver position and assignment for a swap exchange.
    SendStateAndCells { position: Point2, cells: Vec<CellIndex> },
    /// Return the post-swap assignment to the pair partner.
    SwappedAssignment { cells: Vec<CellIndex> },
    /// Announce that the sender wants the team to re-partition.
    RepartitionRequest,
    /// Share the sender's observation store.
    ObservationShare {
        observations: Vec<(CellIndex, Point2, Observation)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub from: RobotId,
    pub to: Recipient,
    pub kind: MessageKind,
}

/// Step-scoped mailbox network owned by the engine loop. Single-threaded
/// delivery; all inter-robot data flows through here.
#[derive(Debug)]
pub struct Network {
    cfg: NetworkConfig,
    mailboxes: Vec<VecDeque<Message>>,
    sent: u64,
    delivered: u64,
    dropped: u64,
}

impl Network {
    pub fn new(cfg: NetworkConfig, robot_count: usize) -> Self {
        Network {
            cfg,
            mailboxes: (0..robot_count).map(|_| VecDeque::new()).collect(),
            sent: 0,
            delivered: 0,
            dropped: 0,
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn robot_count(&self) -> usize {
        self.mailboxes.len()
    }

    /// Send a message given the robots' current positions. Unicasts to an
    /// out-of-range recipient are dropped and counted; broadcasts deliver to
    /// every current neighbor. Returns the number of deliveries.
    pub fn send(&mut self, msg: Message, positions: &[Point2]) -> usize {
        self.sent += 1;
        match msg.to {
            Recipient::Unicast(to) => {
                let in_range = to < positions.len()
                    && to != msg.from
                    && self
                        .cfg
                        .comm_range
                        .contains(positions[msg.from].distance(positions[to]));
                if in_range {
                    self.mailboxes[to].push_back(msg);
                    self.delivered += 1;
                    1
                } else {
                    self.dropped += 1;
                    0
                }
            }
            Recipient::Broadcast => {
                let targets =
                    neighbors(msg.from, positions, &self.cfg).unwrap_or_default();
                if targets.is_empty() {
                    self.dropped += 1;
                    return 0;
                }
                let n = targets.len();
                for to in targets {
                    self.mailboxes[to].push_back(msg.clone());
                }
                self.delivered += n as u64;
                n
            }
        }
    }

    /// Pop the oldest pending message for a robot.
    pub fn recv(&mut self, robot: RobotId) -> Option<Message> {
        self.mailboxes[robot].pop_front()
    }

    /// Drain everything pending for a robot.
    pub fn drain(&mut self, robot: RobotId) -> Vec<Message> {
        self.mailboxes[robot].drain(..).collect()
    }

    pub fn messages_sent(&self) -> u64 {
        self.sent
    }

    pub fn messages_delivered(&self) -> u64 {
        self.delivered
    }

    pub fn messages_dropped(&self) -> u64 {
        self.dropped
    }
}
