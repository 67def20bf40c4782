//! Spatial-temporal layout planning: one bounding-box track per instance,
//! propagated over `F` frames according to the instance's motion category.
//!
//! Frame numbers in this module are 1-based (`1..=F`), matching the way
//! tracks are described; every other module indexes frames from 0.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::fmt;

use crate::graph::{
    Direction, GraphIssue, InstanceNode, KinematicHint, MotionCategory, MotionGraph, OscillationClass, PlacementHint,
    SpeedClass,
};
use crate::math::{self, Vec2};

/// Smallest side length a repaired box may have.
pub const MIN_EXTENT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum LayoutError {
    InvalidBox { coords: [f64; 4] },
    ZeroFrames,
    FrameOutOfRange { frame: usize, frames: usize },
    EmptyWindow,
    WrongCategory { expected: MotionCategory, found: MotionCategory },
    TooManyInstances { count: usize },
    InvalidGraph(Vec<GraphIssue>),
    TrackLength { id: u32, expected: usize, found: usize },
    DuplicateTrack { id: u32 },
}

impl fmt::Display for LayoutError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidBox { coords } => write!(f, "invalid box {coords:?}"),
            Self::ZeroFrames => f.write_str("frame count must be at least 1"),
            Self::FrameOutOfRange { frame, frames } => {
                write!(f, "frame {frame} outside 1..={frames}")
            }
            Self::EmptyWindow => f.write_str("kinematics window is empty"),
            Self::WrongCategory { expected, found } => {
                write!(f, "expected a {expected} instance, found {found}")
            }
            Self::TooManyInstances { count } => {
                write!(f, "{count} instances do not fit on the canvas at minimum box size")
            }
            Self::InvalidGraph(issues) => {
                f.write_str("invalid motion graph:")?;
                for issue in issues {
                    write!(f, " {issue};")?;
                }
                Ok(())
            }
            Self::TrackLength { id, expected, found } => {
                write!(f, "track {id} has {found} boxes, expected {expected}")
            }
            Self::DuplicateTrack { id } => write!(f, "duplicate track id {id}"),
        }
    }
}

impl core::error::Error for LayoutError {}

/// Axis-aligned box in normalized canvas coordinates, y growing downward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

/// What [`BoundingBox::repair`] had to change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxRepair {
    SwappedX,
    SwappedY,
    Clamped,
    Widened,
}

impl fmt::Display for BoxRepair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SwappedX => "swapped reversed x bounds",
            Self::SwappedY => "swapped reversed y bounds",
            Self::Clamped => "clamped to the canvas",
            Self::Widened => "widened a degenerate side",
        })
    }
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, LayoutError> {
        let b = Self { x_min, y_min, x_max, y_max };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(LayoutError::InvalidBox { coords: b.to_array() })
        }
    }

    pub fn from_center(center: Vec2, width: f64, height: f64) -> Result<Self, LayoutError> {
        Self::new(center.x - width / 2.0, center.y - height / 2.0, center.x + width / 2.0, center.y + height / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        let a = self.to_array();
        a.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) && self.x_min < self.x_max && self.y_min < self.y_max
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn translated(&self, d: Vec2) -> Self {
        Self { x_min: self.x_min + d.x, y_min: self.y_min + d.y, x_max: self.x_max + d.x, y_max: self.y_max + d.y }
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.x_min < other.x_max && other.x_min < self.x_max && self.y_min < other.y_max && other.y_min < self.y_max
    }

    /// Turns arbitrary finite coordinates into a valid box, reporting each fix.
    pub fn repair(raw: [f64; 4]) -> Result<(Self, Vec<BoxRepair>), LayoutError> {
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(LayoutError::InvalidBox { coords: raw });
        }
        let [mut x0, mut y0, mut x1, mut y1] = raw;
        let mut repairs = Vec::new();
        if x1 < x0 {
            core::mem::swap(&mut x0, &mut x1);
            repairs.push(BoxRepair::SwappedX);
        }
        if y1 < y0 {
            core::mem::swap(&mut y0, &mut y1);
            repairs.push(BoxRepair::SwappedY);
        }
        let clamped = [x0, y0, x1, y1].map(|v| v.clamp(0.0, 1.0));
        if clamped != [x0, y0, x1, y1] {
            repairs.push(BoxRepair::Clamped);
        }
        let [x0, y0, x1, y1] = clamped;
        let (x0, x1, wx) = widen(x0, x1);
        let (y0, y1, wy) = widen(y0, y1);
        if wx || wy {
            repairs.push(BoxRepair::Widened);
        }
        Ok((Self { x_min: x0, y_min: y0, x_max: x1, y_max: y1 }, repairs))
    }
}

/// Ensures `hi - lo >= MIN_EXTENT` inside `[0, 1]`.
fn widen(lo: f64, hi: f64) -> (f64, f64, bool) {
    if hi - lo >= MIN_EXTENT {
        return (lo, hi, false);
    }
    let mid = ((lo + hi) / 2.0).clamp(MIN_EXTENT / 2.0, 1.0 - MIN_EXTENT / 2.0);
    (mid - MIN_EXTENT / 2.0, mid + MIN_EXTENT / 2.0, true)
}

/// Shifts `[lo, hi]` inside `[0, 1]`, shrinking it to the canvas if wider.
/// Returns whether anything moved.
fn shift_inside(lo: &mut f64, hi: &mut f64) -> bool {
    if *hi - *lo >= 1.0 {
        let moved = *lo != 0.0 || *hi != 1.0;
        *lo = 0.0;
        *hi = 1.0;
        return moved;
    }
    if *lo < 0.0 {
        *hi -= *lo;
        *lo = 0.0;
        true
    } else if *hi > 1.0 {
        *lo -= *hi - 1.0;
        *hi = 1.0;
        true
    } else {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u32,
    pub category: MotionCategory,
    pub boxes: Vec<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneLayout {
    pub frames: usize,
    pub tracks: Vec<Track>,
}

impl SceneLayout {
    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.frames == 0 {
            return Err(LayoutError::ZeroFrames);
        }
        let mut ids = BTreeSet::new();
        for t in &self.tracks {
            if !ids.insert(t.id) {
                return Err(LayoutError::DuplicateTrack { id: t.id });
            }
            if t.boxes.len() != self.frames {
                return Err(LayoutError::TrackLength { id: t.id, expected: self.frames, found: t.boxes.len() });
            }
            if let Some(b) = t.boxes.iter().find(|b| !b.is_valid()) {
                return Err(LayoutError::InvalidBox { coords: b.to_array() });
            }
        }
        Ok(())
    }

    pub fn track(&self, id: u32) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }
}

/// How a rigid track's velocity evolves between frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RigidUpdate {
    /// `u <- u + a` after every step.
    #[default]
    Integrate,
    /// Refit `(u, a)` on the sliding window once it holds three centers.
    Reestimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub window: usize,
    pub rigid_update: RigidUpdate,
    pub default_box_size: f64,
    pub min_box_size: f64,
    pub gap: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { window: 5, rigid_update: RigidUpdate::Integrate, default_box_size: 0.3, min_box_size: 0.1, gap: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicsState {
    /// Canvas units per frame.
    pub velocity: Vec2,
    /// Canvas units per frame squared.
    pub acceleration: Vec2,
    window: VecDeque<Vec2>,
    window_len: usize,
}

impl KinematicsState {
    pub fn new(velocity: Vec2, acceleration: Vec2, window_len: usize) -> Self {
        Self { velocity, acceleration, window: VecDeque::new(), window_len: window_len.max(1) }
    }

    pub fn with_center(mut self, center: Vec2) -> Self {
        self.push_center(center);
        self
    }

    pub fn window(&self) -> impl ExactSizeIterator<Item = &Vec2> {
        self.window.iter()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    fn push_center(&mut self, c: Vec2) {
        if self.window.len() == self.window_len {
            self.window.pop_front();
        }
        self.window.push_back(c);
    }
}

/// Canvas units per frame for a speed class.
pub fn speed_per_frame(speed: SpeedClass) -> f64 {
    match speed {
        SpeedClass::Slow => 0.01,
        SpeedClass::Medium => 0.02,
        SpeedClass::Fast => 0.04,
    }
}

/// Motionless instances keep their first box in every frame.
pub fn step_motionless(first: BoundingBox, frame: usize) -> Result<BoundingBox, LayoutError> {
    if frame == 0 {
        return Err(LayoutError::FrameOutOfRange { frame, frames: usize::MAX });
    }
    Ok(first)
}

/// One rigid step: translate by `u + a/2`, then `u <- u + a`.
///
/// A box pushed off the canvas is projected back inside and the velocity
/// component along the clamped axis is zeroed.
pub fn step_rigid(prev: BoundingBox, state: &KinematicsState) -> (BoundingBox, KinematicsState) {
    let shift = state.velocity + state.acceleration * 0.5;
    let mut b = prev.translated(shift);
    let mut next = state.clone();
    next.velocity = state.velocity + state.acceleration;
    if shift_inside(&mut b.x_min, &mut b.x_max) {
        next.velocity.x = 0.0;
    }
    if shift_inside(&mut b.y_min, &mut b.y_max) {
        next.velocity.y = 0.0;
    }
    next.push_center(b.center());
    (b, next)
}

/// Velocity and acceleration from the recent centers.
///
/// With three or more centers this is the least-squares quadratic
/// `c(t) = c0 + b t + g t^2` over `t = 0..n-1`; the returned velocity is
/// the tangent `b + 2 g (n-1)` at the newest center (the displacement the
/// next step should apply before the `a/2` term) and `a = 2 g`. With fewer
/// centers the hint's speed class along its direction is used and `a = 0`.
pub fn estimate_kinematics(
    window: &[Vec2],
    hint: &KinematicHint,
    window_len: usize,
) -> Result<KinematicsState, LayoutError> {
    if window.is_empty() {
        return Err(LayoutError::EmptyWindow);
    }
    let mut state = KinematicsState::new(Vec2::ZERO, Vec2::ZERO, window_len);
    let recent = &window[window.len().saturating_sub(state.window_len)..];
    for &c in recent {
        state.push_center(c);
    }
    if recent.len() < 3 {
        state.velocity = hint.direction.unit() * speed_per_frame(hint.speed);
        return Ok(state);
    }
    let xs: Vec<f64> = recent.iter().map(|c| c.x).collect();
    let ys: Vec<f64> = recent.iter().map(|c| c.y).collect();
    let (bx, gx) = quadratic_fit(&xs);
    let (by, gy) = quadratic_fit(&ys);
    let last = (recent.len() - 1) as f64;
    state.velocity = Vec2::new(bx + 2.0 * gx * last, by + 2.0 * gy * last);
    state.acceleration = Vec2::new(2.0 * gx, 2.0 * gy);
    Ok(state)
}

/// Least-squares `v(t) ~ c + b t + g t^2` for `t = 0..n-1`, `n >= 3`; returns `(b, g)`.
fn quadratic_fit(values: &[f64]) -> (f64, f64) {
    // Centered abscissa keeps the normal equations well conditioned.
    let n = values.len() as f64;
    let mid = (n - 1.0) / 2.0;
    let (mut s2, mut s4, mut sy, mut sty, mut st2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        let t = i as f64 - mid;
        s2 += t * t;
        s4 += t * t * t * t;
        sy += v;
        sty += t * v;
        st2y += t * t * v;
    }
    // Odd moments vanish for a symmetric abscissa:
    // [n  0  s2] [c']   [sy  ]
    // [0  s2 0 ] [b'] = [sty ]
    // [s2 0  s4] [g ]   [st2y]
    let b_centered = sty / s2;
    let g = (n * st2y - s2 * sy) / (n * s4 - s2 * s2);
    // Undo the shift t' = t - mid: b = b' - 2 g mid.
    (b_centered - 2.0 * g * mid, g)
}

/// Signed per-frame boundary shifts for a non-rigid instance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryDisplacement {
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
}

/// Shift each boundary by its own displacement, then repair: boxes stay
/// valid, inside the canvas, with area in `[25%, 400%]` of the first frame.
pub fn step_nonrigid(prev: BoundingBox, disp: &BoundaryDisplacement, first: &BoundingBox) -> BoundingBox {
    let mut x0 = prev.x_min + disp.left;
    let mut x1 = prev.x_max + disp.right;
    let mut y0 = prev.y_min + disp.top;
    let mut y1 = prev.y_max + disp.bottom;
    if x1 < x0 {
        let m = (x0 + x1) / 2.0;
        (x0, x1) = (m, m);
    }
    if y1 < y0 {
        let m = (y0 + y1) / 2.0;
        (y0, y1) = (m, m);
    }
    (x0, x1) = (x0.clamp(0.0, 1.0), x1.clamp(0.0, 1.0));
    (y0, y1) = (y0.clamp(0.0, 1.0), y1.clamp(0.0, 1.0));
    (x0, x1, _) = widen(x0, x1);
    (y0, y1, _) = widen(y0, y1);

    let reference = first.area();
    let (floor, ceiling) = (0.25 * reference, 4.0 * reference);
    let area = (x1 - x0) * (y1 - y0);
    let target = if area < floor {
        Some(floor)
    } else if area > ceiling {
        Some(ceiling)
    } else {
        None
    };
    if let Some(target) = target {
        let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        let s = math::sqrt(target / area);
        let mut w = ((x1 - x0) * s).min(1.0);
        let mut h = ((y1 - y0) * s).min(1.0);
        if w * h < target {
            if w < 1.0 {
                w = (target / h).min(1.0);
            } else {
                h = (target / w).min(1.0);
            }
        }
        (x0, x1) = (cx - w / 2.0, cx + w / 2.0);
        (y0, y1) = (cy - h / 2.0, cy + h / 2.0);
        shift_inside(&mut x0, &mut x1);
        shift_inside(&mut y0, &mut y1);
    }
    BoundingBox { x_min: x0, y_min: y0, x_max: x1, y_max: y1 }
}

/// Per-side `(amplitude, phase)` and a shared period, in frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationProfile {
    pub period: f64,
    pub left: (f64, f64),
    pub right: (f64, f64),
    pub top: (f64, f64),
    pub bottom: (f64, f64),
}

/// Boundary schedule per oscillation class. `None` uses the sway profile.
pub fn oscillation_profile(class: OscillationClass) -> OscillationProfile {
    let zero = (0.0, 0.0);
    match class {
        OscillationClass::None | OscillationClass::Sway => {
            OscillationProfile { period: 8.0, left: (0.01, PI), right: (0.01, 0.0), top: zero, bottom: zero }
        }
        OscillationClass::Wave => {
            OscillationProfile { period: 6.0, left: (0.005, PI), right: (0.005, 0.0), top: (0.01, PI), bottom: zero }
        }
        OscillationClass::Pulse => OscillationProfile {
            period: 10.0,
            left: (0.008, PI),
            right: (0.008, 0.0),
            top: (0.008, PI),
            bottom: (0.008, 0.0),
        },
        OscillationClass::Stride => {
            OscillationProfile { period: 8.0, left: (0.01, PI), right: (0.01, 0.0), top: zero, bottom: (0.004, 0.0) }
        }
        OscillationClass::Jump => {
            OscillationProfile { period: 8.0, left: zero, right: zero, top: (0.015, PI), bottom: (0.005, 0.0) }
        }
    }
}

/// `delta_side(f) = A_side * sin(2 pi f / T + phase_side)` from the node's oscillation class.
pub fn derive_boundary_displacements(
    node: &InstanceNode,
    frame: usize,
    frames: usize,
) -> Result<BoundaryDisplacement, LayoutError> {
    if node.category != MotionCategory::NonRigid {
        return Err(LayoutError::WrongCategory { expected: MotionCategory::NonRigid, found: node.category });
    }
    if frame == 0 || frame > frames {
        return Err(LayoutError::FrameOutOfRange { frame, frames });
    }
    let p = oscillation_profile(node.hint.oscillation);
    let theta = TAU * frame as f64 / p.period;
    let side = |(amp, phase): (f64, f64)| amp * math::sin(theta + phase);
    Ok(BoundaryDisplacement { left: side(p.left), right: side(p.right), top: side(p.top), bottom: side(p.bottom) })
}

/// Frame-1 boxes. Spatial placement hints put the source of each relation
/// next to its target on a slot lattice; unrelated groups are packed into
/// a near-square grid; the lattice is then scaled onto the canvas.
pub fn place_initial_boxes(
    graph: &MotionGraph,
    config: &PlannerConfig,
) -> Result<BTreeMap<u32, BoundingBox>, LayoutError> {
    let issues = graph.validate();
    if !issues.is_empty() {
        return Err(LayoutError::InvalidGraph(issues));
    }
    let n = graph.nodes.len();
    let mut out = BTreeMap::new();
    if n == 0 {
        return Ok(out);
    }

    let offset = |hint: Option<PlacementHint>| -> (i32, i32) {
        match hint {
            Some(PlacementHint::RightOf) => (1, 0),
            Some(PlacementHint::Above) => (0, -1),
            Some(PlacementHint::Below) => (0, 1),
            _ => (-1, 0),
        }
    };

    // Slot assignment per connected component.
    let mut placed: BTreeMap<u32, (i32, i32)> = BTreeMap::new();
    let mut components: Vec<Vec<(u32, (i32, i32))>> = Vec::new();
    for root in &graph.nodes {
        if placed.contains_key(&root.id) {
            continue;
        }
        let mut occupied: BTreeSet<(i32, i32)> = BTreeSet::new();
        let mut comp = vec![(root.id, (0, 0))];
        placed.insert(root.id, (0, 0));
        occupied.insert((0, 0));
        let mut queue = VecDeque::from([root.id]);
        while let Some(u) = queue.pop_front() {
            let here = placed[&u];
            for e in &graph.edges {
                let (other, step) = if e.dst == u {
                    (e.src, offset(e.placement))
                } else if e.src == u {
                    let (dx, dy) = offset(e.placement);
                    (e.dst, (-dx, -dy))
                } else {
                    continue;
                };
                if placed.contains_key(&other) {
                    continue;
                }
                let mut slot = (here.0 + step.0, here.1 + step.1);
                while occupied.contains(&slot) {
                    slot = (slot.0 + step.0, slot.1 + step.1);
                }
                occupied.insert(slot);
                placed.insert(other, slot);
                comp.push((other, slot));
                queue.push_back(other);
            }
        }
        let min_c = comp.iter().map(|(_, s)| s.0).min().unwrap_or(0);
        let min_r = comp.iter().map(|(_, s)| s.1).min().unwrap_or(0);
        for (_, s) in comp.iter_mut() {
            *s = (s.0 - min_c, s.1 - min_r);
        }
        components.push(comp);
    }

    // Pack components into rows.
    let target_cols = {
        let mut c = 1usize;
        while c * c < n {
            c += 1;
        }
        c as i32
    };
    let (mut cursor_c, mut cursor_r, mut row_h) = (0i32, 0i32, 0i32);
    let (mut cols, mut rows) = (0i32, 0i32);
    let mut slots: Vec<(u32, (i32, i32))> = Vec::with_capacity(n);
    for comp in &components {
        let w = comp.iter().map(|(_, s)| s.0).max().unwrap_or(0) + 1;
        let h = comp.iter().map(|(_, s)| s.1).max().unwrap_or(0) + 1;
        if cursor_c > 0 && cursor_c + w > target_cols {
            cursor_r += row_h;
            cursor_c = 0;
            row_h = 0;
        }
        for &(id, (c, r)) in comp {
            slots.push((id, (cursor_c + c, cursor_r + r)));
        }
        cursor_c += w;
        row_h = row_h.max(h);
        cols = cols.max(cursor_c);
        rows = rows.max(cursor_r + row_h);
    }

    let gap = config.gap;
    let fit = |k: i32| (1.0 - gap * (k - 1) as f64) / k as f64;
    let size = config.default_box_size.min(fit(cols)).min(fit(rows));
    if size < config.min_box_size {
        return Err(LayoutError::TooManyInstances { count: n });
    }
    let span = |k: i32| k as f64 * size + (k - 1) as f64 * gap;
    let x0 = (1.0 - span(cols)) / 2.0;
    let y0 = (1.0 - span(rows)) / 2.0;
    for (id, (c, r)) in slots {
        let x = x0 + c as f64 * (size + gap);
        let y = y0 + r as f64 * (size + gap);
        out.insert(id, BoundingBox { x_min: x, y_min: y, x_max: x + size, y_max: y + size });
    }
    Ok(out)
}

/// `frames` boxes of a rigid track starting at `first` with the given kinematics.
pub fn rigid_track(first: BoundingBox, state: KinematicsState, frames: usize, update: RigidUpdate) -> Vec<BoundingBox> {
    let mut boxes = Vec::with_capacity(frames);
    if frames == 0 {
        return boxes;
    }
    boxes.push(first);
    let mut state = state;
    if state.window.is_empty() {
        state.push_center(first.center());
    }
    let mut prev = first;
    for _ in 1..frames {
        let (b, mut next) = step_rigid(prev, &state);
        if update == RigidUpdate::Reestimate && next.window.len() >= 3 {
            let centers: Vec<Vec2> = next.window.iter().copied().collect();
            if let Ok(fit) = estimate_kinematics(&centers, &KinematicHint::default(), next.window_len) {
                next = fit;
            }
        }
        boxes.push(b);
        prev = b;
        state = next;
    }
    boxes
}

fn initial_rigid_state(
    node: &InstanceNode,
    graph: &MotionGraph,
    initial: &BTreeMap<u32, BoundingBox>,
    config: &PlannerConfig,
) -> Result<KinematicsState, LayoutError> {
    let first = initial[&node.id];
    let mut hint = node.hint;
    if hint.direction == Direction::None {
        hint.direction = Direction::Right;
    }
    let mut state = estimate_kinematics(&[first.center()], &hint, config.window)?;
    let heading = graph.edges.iter().find_map(|e| match e.placement {
        Some(PlacementHint::Toward) if e.src == node.id => Some((e.dst, 1.0)),
        Some(PlacementHint::Away) if e.src == node.id => Some((e.dst, -1.0)),
        _ => None,
    });
    if let Some((target, sign)) = heading {
        let d = initial[&target].center() - first.center();
        let len = d.norm();
        if len > 0.0 {
            state.velocity = d * (sign * speed_per_frame(hint.speed) / len);
        }
    }
    Ok(state)
}

/// Full layout: frame-1 placement, then each track stepped by its category.
pub fn plan_layout(graph: &MotionGraph, frames: usize, config: &PlannerConfig) -> Result<SceneLayout, LayoutError> {
    if frames == 0 {
        return Err(LayoutError::ZeroFrames);
    }
    let initial = place_initial_boxes(graph, config)?;
    let mut tracks = Vec::with_capacity(graph.nodes.len());
    for node in &graph.nodes {
        let first = initial[&node.id];
        let boxes = match node.category {
            MotionCategory::Motionless => {
                (1..=frames).map(|f| step_motionless(first, f)).collect::<Result<Vec<_>, _>>()?
            }
            MotionCategory::Rigid => {
                let state = initial_rigid_state(node, graph, &initial, config)?;
                rigid_track(first, state, frames, config.rigid_update)
            }
            MotionCategory::NonRigid => {
                let mut boxes = Vec::with_capacity(frames);
                boxes.push(first);
                let mut prev = first;
                for f in 2..=frames {
                    let disp = derive_boundary_displacements(node, f, frames)?;
                    prev = step_nonrigid(prev, &disp, &first);
                    boxes.push(prev);
                }
                boxes
            }
        };
        tracks.push(Track { id: node.id, category: node.category, boxes });
    }
    let layout = SceneLayout { frames, tracks };
    layout.validate()?;
    Ok(layout)
}
