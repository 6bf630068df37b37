use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a log event (template). Dense `0..m` for mined templates;
/// [`EventId::UNSEEN`] marks messages that matched no template of a frozen
/// store and always sorts last.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub u32);

impl EventId {
    pub const UNSEEN: EventId = EventId(u32::MAX);

    pub fn is_unseen(self) -> bool {
        self == Self::UNSEEN
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unseen() {
            f.write_str("E<unseen>")
        } else {
            write!(f, "E{}", self.0)
        }
    }
}

/// Ground-truth label of a message or a sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    #[default]
    Normal,
    Anomalous,
}

impl Label {
    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }

    /// Accepts the spellings used by the public label tables
    /// (`Normal`/`Anomaly`, `0`/`1`, `-`/alert tags are handled by the caller).
    pub fn parse(s: &str) -> Option<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "0" | "false" => Some(Label::Normal),
            "anomaly" | "anomalous" | "abnormal" | "1" | "true" => Some(Label::Anomalous),
            _ => None,
        }
    }
}

impl std::ops::BitOr for Label {
    type Output = Label;

    fn bitor(self, rhs: Label) -> Label {
        if self.is_anomalous() || rhs.is_anomalous() {
            Label::Anomalous
        } else {
            Label::Normal
        }
    }
}
