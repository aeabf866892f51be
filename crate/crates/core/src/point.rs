//! Structural program points: the anchors for trace samples and properties.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Kind of a program point within a function. Loop points are numbered by a
/// preorder walk of the function body, dense from 0.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum PointKind {
    Entry,
    Loop(u32),
    Exit,
}

impl fmt::Display for PointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointKind::Entry => write!(f, "ENTRY"),
            PointKind::Loop(k) => write!(f, "LOOP {k}"),
            PointKind::Exit => write!(f, "EXIT"),
        }
    }
}

impl PointKind {
    pub fn parse(kind: &str, ordinal: Option<&str>) -> Option<PointKind> {
        match kind {
            "ENTRY" => Some(PointKind::Entry),
            "EXIT" => Some(PointKind::Exit),
            "LOOP" => ordinal?.parse().ok().map(PointKind::Loop),
            _ => None,
        }
    }
}

/// Version-independent identity of a snapshot location: structural, not
/// line-based, so it survives edits between program versions.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct ProgramPoint {
    pub function: String,
    pub kind: PointKind,
}

impl ProgramPoint {
    pub fn new(function: impl Into<String>, kind: PointKind) -> Self {
        ProgramPoint {
            function: function.into(),
            kind,
        }
    }

    pub fn entry(function: impl Into<String>) -> Self {
        Self::new(function, PointKind::Entry)
    }

    pub fn exit(function: impl Into<String>) -> Self {
        Self::new(function, PointKind::Exit)
    }

    pub fn loop_head(function: impl Into<String>, ordinal: u32) -> Self {
        Self::new(function, PointKind::Loop(ordinal))
    }
}

impl fmt::Display for ProgramPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.function, self.kind)
    }
}
