//! Analysis cells: one (action, time role, modality, condition) combination.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::complexity::ModalityFilter;
use crate::series::{Condition, SeriesAction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Pause,
    Dropout,
    Rewind,
    Skip,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Pause, Action::Dropout, Action::Rewind, Action::Skip];

    /// Time roles reported for this action.
    pub fn time_roles(self) -> &'static [TimeRole] {
        match self {
            Action::Pause | Action::Dropout => &[TimeRole::None],
            Action::Rewind | Action::Skip => &[TimeRole::From, TimeRole::To],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Pause => "pause",
            Action::Dropout => "dropout",
            Action::Rewind => "rewind",
            Action::Skip => "skip",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeRole {
    #[serde(rename = "n/a")]
    None,
    From,
    To,
}

impl TimeRole {
    pub fn label(self) -> &'static str {
        match self {
            TimeRole::None => "",
            TimeRole::From => "from",
            TimeRole::To => "to",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub action: Action,
    pub time_role: TimeRole,
    pub modality: ModalityFilter,
    pub condition: Condition,
}

impl Cell {
    /// Every cell for the given actions, modalities and conditions, in
    /// report order.
    pub fn grid(
        actions: &[Action],
        modalities: &[ModalityFilter],
        conditions: &[Condition],
    ) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &action in actions {
            for &time_role in action.time_roles() {
                for &modality in modalities {
                    for &condition in conditions {
                        cells.push(Cell {
                            action,
                            time_role,
                            modality,
                            condition,
                        });
                    }
                }
            }
        }
        cells
    }

    pub fn response_action(&self) -> SeriesAction {
        match (self.action, self.time_role) {
            (Action::Pause, _) => SeriesAction::Pause,
            (Action::Dropout, _) => SeriesAction::Dropout,
            (Action::Rewind, TimeRole::To) => SeriesAction::RewindTo,
            (Action::Rewind, _) => SeriesAction::RewindFrom,
            (Action::Skip, TimeRole::To) => SeriesAction::SkipTo,
            (Action::Skip, _) => SeriesAction::SkipFrom,
        }
    }

    /// Stable identifier used for seeds and file names.
    pub fn key(&self) -> String {
        let role = match self.time_role {
            TimeRole::None => String::new(),
            r => format!("-{}", r.label()),
        };
        let modality = match self.modality {
            ModalityFilter::Textual => "T",
            ModalityFilter::InfoVis => "V",
            ModalityFilter::Both => "TV",
        };
        let condition = match self.condition {
            Condition::Binary => "binary",
            Condition::VisCom => "viscom",
        };
        format!("{}{role}_{modality}_{condition}", self.action)
    }
}
