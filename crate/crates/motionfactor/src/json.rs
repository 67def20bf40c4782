//! JSON documents for motion graphs and scene layouts.

use motionfactor_core::graph::{
    GraphIssue, InstanceNode, KinematicHint, MotionCategory, MotionGraph, PlacementHint, RelationEdge, RelationKind,
};
use motionfactor_core::layout::{BoundingBox, BoxRepair, LayoutError, SceneLayout, Track};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum JsonError {
    #[error("malformed JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("unknown {field} label {value:?}")]
    Label { field: &'static str, value: String },
    #[error("invalid graph: {}", join(.0))]
    Graph(Vec<GraphIssue>),
    #[error("invalid layout: {0}")]
    Layout(#[from] LayoutError),
}

fn join(issues: &[GraphIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn label<T: std::str::FromStr>(field: &'static str, value: &str) -> Result<T, JsonError> {
    value.parse().map_err(|_| JsonError::Label { field, value: value.to_string() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintDoc {
    #[serde(default = "medium")]
    pub speed: String,
    #[serde(default = "none")]
    pub oscillation: String,
    #[serde(default = "none")]
    pub direction: String,
}

fn medium() -> String {
    "medium".into()
}
fn none() -> String {
    "none".into()
}

impl Default for HintDoc {
    fn default() -> Self {
        Self { speed: medium(), oscillation: none(), direction: none() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: u32,
    pub noun: String,
    #[serde(default)]
    pub attributes: Vec<String>,
    pub category: String,
    #[serde(default)]
    pub hint: HintDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub src: u32,
    pub dst: u32,
    pub kind: String,
    pub phrase: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub prompt: String,
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub edges: Vec<EdgeDoc>,
}

impl From<&MotionGraph> for GraphDoc {
    fn from(g: &MotionGraph) -> Self {
        Self {
            prompt: g.source_prompt.clone(),
            nodes: g
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id,
                    noun: n.noun_phrase.clone(),
                    attributes: n.motion_attributes.clone(),
                    category: n.category.as_str().into(),
                    hint: HintDoc {
                        speed: n.hint.speed.as_str().into(),
                        oscillation: n.hint.oscillation.as_str().into(),
                        direction: n.hint.direction.as_str().into(),
                    },
                })
                .collect(),
            edges: g
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    src: e.src,
                    dst: e.dst,
                    kind: e.kind.as_str().into(),
                    phrase: e.phrase.clone(),
                    placement: e.placement.map(|p| p.as_str().into()),
                })
                .collect(),
        }
    }
}

impl GraphDoc {
    /// Converts and validates; dangling edges, duplicate ids and unknown
    /// labels are all rejected.
    pub fn into_graph(self) -> Result<MotionGraph, JsonError> {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for n in self.nodes {
            nodes.push(InstanceNode {
                id: n.id,
                noun_phrase: n.noun,
                motion_attributes: n.attributes,
                category: label::<MotionCategory>("category", &n.category)?,
                hint: KinematicHint {
                    speed: label("speed", &n.hint.speed)?,
                    oscillation: label("oscillation", &n.hint.oscillation)?,
                    direction: label("direction", &n.hint.direction)?,
                },
            });
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in self.edges {
            edges.push(RelationEdge {
                src: e.src,
                dst: e.dst,
                kind: label::<RelationKind>("kind", &e.kind)?,
                phrase: e.phrase,
                placement: e.placement.as_deref().map(|p| label::<PlacementHint>("placement", p)).transpose()?,
            });
        }
        let graph = MotionGraph { nodes, edges, source_prompt: self.prompt };
        let issues = graph.validate();
        if issues.is_empty() {
            Ok(graph)
        } else {
            Err(JsonError::Graph(issues))
        }
    }
}

pub fn graph_to_json(graph: &MotionGraph) -> String {
    serde_json::to_string_pretty(&GraphDoc::from(graph)).expect("graph documents always serialize")
}

pub fn graph_from_json(text: &str) -> Result<MotionGraph, JsonError> {
    serde_json::from_str::<GraphDoc>(text)?.into_graph()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackDoc {
    pub id: u32,
    pub category: String,
    pub boxes: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDoc {
    pub frames: usize,
    pub tracks: Vec<TrackDoc>,
}

impl From<&SceneLayout> for LayoutDoc {
    fn from(l: &SceneLayout) -> Self {
        Self {
            frames: l.frames,
            tracks: l
                .tracks
                .iter()
                .map(|t| TrackDoc {
                    id: t.id,
                    category: t.category.as_str().into(),
                    boxes: t.boxes.iter().map(BoundingBox::to_array).collect(),
                })
                .collect(),
        }
    }
}

/// A box that had to be repaired while reading a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairNote {
    pub track: u32,
    /// 1-based frame number.
    pub frame: usize,
    pub repairs: Vec<BoxRepair>,
}

impl LayoutDoc {
    /// Strict conversion: every box must already be valid.
    pub fn into_layout(self) -> Result<SceneLayout, JsonError> {
        self.convert(|raw| {
            let [x0, y0, x1, y1] = raw;
            Ok((BoundingBox::new(x0, y0, x1, y1)?, Vec::new()))
        })
        .map(|(layout, _)| layout)
    }

    /// Lenient conversion: reversed, out-of-canvas or degenerate boxes are
    /// repaired and reported.
    pub fn into_layout_repaired(self) -> Result<(SceneLayout, Vec<RepairNote>), JsonError> {
        self.convert(BoundingBox::repair)
    }

    fn convert(
        self,
        make: impl Fn([f64; 4]) -> Result<(BoundingBox, Vec<BoxRepair>), LayoutError>,
    ) -> Result<(SceneLayout, Vec<RepairNote>), JsonError> {
        let mut notes = Vec::new();
        let mut tracks = Vec::with_capacity(self.tracks.len());
        for t in self.tracks {
            let mut boxes = Vec::with_capacity(t.boxes.len());
            for (i, raw) in t.boxes.into_iter().enumerate() {
                let (b, repairs) = make(raw)?;
                if !repairs.is_empty() {
                    notes.push(RepairNote { track: t.id, frame: i + 1, repairs });
                }
                boxes.push(b);
            }
            tracks.push(Track { id: t.id, category: label("category", &t.category)?, boxes });
        }
        let layout = SceneLayout { frames: self.frames, tracks };
        layout.validate()?;
        Ok((layout, notes))
    }
}

pub fn layout_to_json(layout: &SceneLayout) -> String {
    serde_json::to_string_pretty(&LayoutDoc::from(layout)).expect("layout documents always serialize")
}

pub fn layout_from_json(text: &str) -> Result<SceneLayout, JsonError> {
    serde_json::from_str::<LayoutDoc>(text)?.into_layout()
}

#[cfg(test)]
mod tests {
    use super::*;
    use motionfactor_core::lexicon::Lexicon;
    use motionfactor_core::parser::parse_prompt;

    #[test]
    fn graph_round_trip() {
        let g = parse_prompt("a parked car next to a tree", &Lexicon::builtin()).unwrap();
        let text = graph_to_json(&g);
        assert!(text.contains("\"category\": \"motionless\""));
        assert_eq!(graph_from_json(&text).unwrap(), g);
    }

    #[test]
    fn graph_rejects_dangling_edge() {
        let text = r#"{"nodes":[{"id":0,"noun":"car","category":"rigid"}],
            "edges":[{"src":0,"dst":7,"kind":"spatial","phrase":"next to"}]}"#;
        match graph_from_json(text) {
            Err(JsonError::Graph(issues)) => assert_eq!(issues, vec![GraphIssue::DanglingEdge { edge: 0, missing: 7 }]),
            other => panic!("unexpected {other:?}"),
        }
        let bad_label = r#"{"nodes":[{"id":0,"noun":"car","category":"wobbly"}]}"#;
        assert!(matches!(graph_from_json(bad_label), Err(JsonError::Label { field: "category", .. })));
    }

    #[test]
    fn layout_round_trip_and_repair() {
        let text =
            r#"{"frames":2,"tracks":[{"id":3,"category":"rigid","boxes":[[0.1,0.2,0.3,0.4],[0.2,0.2,0.4,0.4]]}]}"#;
        let l = layout_from_json(text).unwrap();
        assert_eq!(layout_from_json(&layout_to_json(&l)).unwrap(), l);

        let reversed = r#"{"frames":1,"tracks":[{"id":0,"category":"rigid","boxes":[[0.5,0.1,0.2,0.4]]}]}"#;
        assert!(layout_from_json(reversed).is_err());
        let doc: LayoutDoc = serde_json::from_str(reversed).unwrap();
        let (l, notes) = doc.into_layout_repaired().unwrap();
        assert_eq!(l.tracks[0].boxes[0].to_array(), [0.2, 0.1, 0.5, 0.4]);
        assert_eq!(notes, vec![RepairNote { track: 0, frame: 1, repairs: vec![BoxRepair::SwappedX] }]);
    }
}
