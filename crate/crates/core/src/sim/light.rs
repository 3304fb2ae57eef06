use super::network::Axis;

/// Yellow transition length in physics ticks (3 s).
pub const YELLOW_TICKS: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    EwGreen,
    NsGreen,
}

impl Phase {
    pub fn opposite(self) -> Self {
        match self {
            Phase::EwGreen => Phase::NsGreen,
            Phase::NsGreen => Phase::EwGreen,
        }
    }

    /// One-hot `[EW, NS]`.
    pub fn one_hot(self) -> [f64; 2] {
        match self {
            Phase::EwGreen => [1.0, 0.0],
            Phase::NsGreen => [0.0, 1.0],
        }
    }

    pub fn index(self) -> usize {
        match self {
            Phase::EwGreen => 0,
            Phase::NsGreen => 1,
        }
    }
}

/// Binary agent action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Action {
    #[default]
    Keep,
    Switch,
}

impl Action {
    pub const COUNT: usize = 2;

    pub fn index(self) -> usize {
        match self {
            Action::Keep => 0,
            Action::Switch => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::Keep
        } else {
            Action::Switch
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficLight {
    pub intersection: usize,
    /// Committed phase. During yellow this is the phase being left.
    pub phase: Phase,
    /// Remaining yellow ticks, `None` outside transitions.
    pub yellow_remaining: Option<u32>,
    /// Ticks since the last committed phase change.
    pub phase_duration_ticks: u64,
    /// Committed changes since the counter was last drained.
    pub phase_change_count_window: u32,
}

impl TrafficLight {
    pub fn new(intersection: usize) -> Self {
        Self {
            intersection,
            phase: Phase::EwGreen,
            yellow_remaining: None,
            phase_duration_ticks: 0,
            phase_change_count_window: 0,
        }
    }

    pub fn in_yellow(&self) -> bool {
        self.yellow_remaining.is_some()
    }

    /// Whether traffic along `axis` may cross the stop line. Yellow counts as
    /// red for both directions.
    pub fn allows(&self, axis: Axis) -> bool {
        if self.in_yellow() {
            return false;
        }
        matches!(
            (self.phase, axis),
            (Phase::EwGreen, Axis::Horizontal) | (Phase::NsGreen, Axis::Vertical)
        )
    }

    /// Applies an agent action. Requests arriving mid-yellow are ignored.
    pub fn set_phase(&mut self, action: Action) {
        if self.in_yellow() {
            return;
        }
        if action == Action::Switch {
            self.yellow_remaining = Some(YELLOW_TICKS);
        }
    }

    /// Advances one physics tick. Returns true when a phase change commits.
    pub fn tick(&mut self) -> bool {
        match self.yellow_remaining {
            Some(remaining) if remaining <= 1 => {
                self.yellow_remaining = None;
                self.phase = self.phase.opposite();
                self.phase_duration_ticks = 0;
                self.phase_change_count_window += 1;
                true
            }
            Some(remaining) => {
                self.yellow_remaining = Some(remaining - 1);
                self.phase_duration_ticks += 1;
                false
            }
            None => {
                self.phase_duration_ticks += 1;
                false
            }
        }
    }

    pub fn phase_duration_secs(&self) -> f64 {
        self.phase_duration_ticks as f64 * super::idm::DT
    }
}
