//! Motion graph: instance nodes with canonical motion labels, joined by
//! directed spatial or dynamic relations.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

/// Canonical motion label carried by every instance node.
///
/// The derived ordering is the predicate priority: `NonRigid > Rigid > Motionless`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MotionCategory {
    Motionless,
    Rigid,
    NonRigid,
}

impl MotionCategory {
    pub const ALL: [MotionCategory; 3] = [Self::Motionless, Self::Rigid, Self::NonRigid];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Motionless => "motionless",
            Self::Rigid => "rigid",
            Self::NonRigid => "nonrigid",
        }
    }
}

impl fmt::Display for MotionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MotionCategory {
    type Err = UnknownLabel;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "motionless" => Ok(Self::Motionless),
            "rigid" => Ok(Self::Rigid),
            "nonrigid" | "non-rigid" => Ok(Self::NonRigid),
            _ => Err(UnknownLabel),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownLabel;

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("unknown label")
    }
}

impl core::error::Error for UnknownLabel {}

macro_rules! labelled_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $(Self::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownLabel;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($label => Ok(Self::$variant),)+
                    _ => Err(UnknownLabel),
                }
            }
        }
    };
}

labelled_enum! {
    /// Speed class of a predicate, mapped to canvas units per frame by the layout planner.
    SpeedClass { Slow => "slow", Medium => "medium", Fast => "fast" }
}

labelled_enum! {
    /// Boundary oscillation pattern used for non-rigid instances.
    OscillationClass {
        None => "none",
        Sway => "sway",
        Wave => "wave",
        Pulse => "pulse",
        Stride => "stride",
        Jump => "jump",
    }
}

labelled_enum! {
    /// Heading on the canvas. `Up` decreases y.
    Direction { None => "none", Left => "left", Right => "right", Up => "up", Down => "down" }
}

labelled_enum! {
    RelationKind { Spatial => "spatial", Dynamic => "dynamic" }
}

labelled_enum! {
    /// Where the source of a relation sits relative to its target in frame 1.
    PlacementHint {
        LeftOf => "left-of",
        RightOf => "right-of",
        Above => "above",
        Below => "below",
        Near => "near",
        Toward => "toward",
        Away => "away",
    }
}

impl Direction {
    /// Unit vector in canvas coordinates; `None` maps to zero.
    pub fn unit(self) -> crate::math::Vec2 {
        use crate::math::Vec2;
        match self {
            Self::None => Vec2::ZERO,
            Self::Left => Vec2::new(-1.0, 0.0),
            Self::Right => Vec2::new(1.0, 0.0),
            Self::Up => Vec2::new(0.0, -1.0),
            Self::Down => Vec2::new(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KinematicHint {
    pub speed: SpeedClass,
    pub oscillation: OscillationClass,
    pub direction: Direction,
}

impl Default for KinematicHint {
    fn default() -> Self {
        Self { speed: SpeedClass::Medium, oscillation: OscillationClass::None, direction: Direction::None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceNode {
    pub id: u32,
    pub noun_phrase: String,
    pub motion_attributes: Vec<String>,
    pub category: MotionCategory,
    pub hint: KinematicHint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationEdge {
    pub src: u32,
    pub dst: u32,
    pub kind: RelationKind,
    pub phrase: String,
    pub placement: Option<PlacementHint>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotionGraph {
    pub nodes: Vec<InstanceNode>,
    pub edges: Vec<RelationEdge>,
    pub source_prompt: String,
}

/// One violated graph invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphIssue {
    DuplicateId { id: u32 },
    DanglingEdge { edge: usize, missing: u32 },
    SelfLoop { edge: usize, id: u32 },
}

impl fmt::Display for GraphIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateId { id } => write!(f, "duplicate node id {id}"),
            Self::DanglingEdge { edge, missing } => {
                write!(f, "edge {edge} references missing node {missing}")
            }
            Self::SelfLoop { edge, id } => write!(f, "edge {edge} loops on node {id}"),
        }
    }
}

impl MotionGraph {
    pub fn node(&self, id: u32) -> Option<&InstanceNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Lists every violated invariant; an empty report means the graph is valid.
    pub fn validate(&self) -> Vec<GraphIssue> {
        let mut issues = Vec::new();
        let mut seen: Vec<u32> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            if seen.contains(&node.id) {
                issues.push(GraphIssue::DuplicateId { id: node.id });
            } else {
                seen.push(node.id);
            }
        }
        for (i, edge) in self.edges.iter().enumerate() {
            for end in [edge.src, edge.dst] {
                if !seen.contains(&end) {
                    issues.push(GraphIssue::DanglingEdge { edge: i, missing: end });
                }
            }
            if edge.src == edge.dst {
                issues.push(GraphIssue::SelfLoop { edge: i, id: edge.src });
            }
        }
        issues
    }
}

/// Free-function form of [`MotionGraph::validate`].
pub fn validate_graph(graph: &MotionGraph) -> Vec<GraphIssue> {
    graph.validate()
}
