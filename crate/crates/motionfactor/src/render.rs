//! Layout inspection: SVG panels or ASCII frames.

use std::fmt::Write;
use std::str::FromStr;

use motionfactor_core::graph::MotionCategory;
use motionfactor_core::layout::SceneLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderStyle {
    Svg,
    Ascii,
}

impl FromStr for RenderStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "svg" => Ok(Self::Svg),
            "ascii" => Ok(Self::Ascii),
            other => Err(format!("unknown render style {other:?} (expected svg or ascii)")),
        }
    }
}

const PANEL: f64 = 160.0;
const MARGIN: f64 = 12.0;
const COLUMNS: usize = 4;

fn color(category: MotionCategory) -> &'static str {
    match category {
        MotionCategory::Motionless => "#4c72b0",
        MotionCategory::Rigid => "#dd8452",
        MotionCategory::NonRigid => "#55a868",
    }
}

pub fn render(layout: &SceneLayout, style: RenderStyle) -> String {
    match style {
        RenderStyle::Svg => render_svg(layout),
        RenderStyle::Ascii => render_ascii(layout, 32, 16),
    }
}

/// One panel per frame in rows of four; boxes are outlined in their
/// category colour and labelled with the track id.
pub fn render_svg(layout: &SceneLayout) -> String {
    let cols = layout.frames.clamp(1, COLUMNS);
    let rows = layout.frames.div_ceil(COLUMNS).max(1);
    let width = cols as f64 * (PANEL + MARGIN) + MARGIN;
    let height = rows as f64 * (PANEL + MARGIN + 14.0) + MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="monospace" font-size="10">"#
    );
    for f in 0..layout.frames {
        let x0 = MARGIN + (f % COLUMNS) as f64 * (PANEL + MARGIN);
        let y0 = MARGIN + 14.0 + (f / COLUMNS) as f64 * (PANEL + MARGIN + 14.0);
        let _ = writeln!(s, r#"  <g class="frame" data-frame="{}">"#, f + 1);
        let _ = writeln!(s, r#"    <text x="{x0:.2}" y="{:.2}">frame {}</text>"#, y0 - 3.0, f + 1);
        let _ = writeln!(
            s,
            r##"    <rect x="{x0:.2}" y="{y0:.2}" width="{PANEL:.2}" height="{PANEL:.2}" fill="#fafafa" stroke="#999999"/>"##
        );
        for t in &layout.tracks {
            let b = &t.boxes[f];
            let (bx, by) = (x0 + b.x_min * PANEL, y0 + b.y_min * PANEL);
            let c = color(t.category);
            let _ = writeln!(
                s,
                r#"    <rect class="box {}" x="{bx:.2}" y="{by:.2}" width="{:.2}" height="{:.2}" fill="{c}" fill-opacity="0.25" stroke="{c}"/>"#,
                t.category,
                b.width() * PANEL,
                b.height() * PANEL
            );
            let _ = writeln!(s, r#"    <text x="{:.2}" y="{:.2}" fill="{c}">{}</text>"#, bx + 2.0, by + 10.0, t.id);
        }
        let _ = writeln!(s, "  </g>");
    }
    s.push_str("</svg>\n");
    s
}

/// Character grids, one per frame. Box outlines use `m`, `r` or `n` by
/// category; the track id is written at the top-left corner.
pub fn render_ascii(layout: &SceneLayout, cols: usize, rows: usize) -> String {
    let mut out = String::new();
    for f in 0..layout.frames {
        let mut grid = vec![vec!['.'; cols]; rows];
        for t in &layout.tracks {
            let b = &t.boxes[f];
            let c0 = ((b.x_min * cols as f64) as usize).min(cols - 1);
            let c1 = ((b.x_max * cols as f64).ceil() as usize).clamp(c0 + 1, cols) - 1;
            let r0 = ((b.y_min * rows as f64) as usize).min(rows - 1);
            let r1 = ((b.y_max * rows as f64).ceil() as usize).clamp(r0 + 1, rows) - 1;
            let mark = match t.category {
                MotionCategory::Motionless => 'm',
                MotionCategory::Rigid => 'r',
                MotionCategory::NonRigid => 'n',
            };
            grid[r0][c0..=c1].fill(mark);
            grid[r1][c0..=c1].fill(mark);
            for row in grid.iter_mut().take(r1 + 1).skip(r0) {
                row[c0] = mark;
                row[c1] = mark;
            }
            for (i, ch) in t.id.to_string().chars().enumerate() {
                if c0 + i <= c1 {
                    grid[r0][c0 + i] = ch;
                }
            }
        }
        let _ = writeln!(out, "frame {}", f + 1);
        for row in grid {
            out.extend(row);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use motionfactor_core::layout::{BoundingBox, Track};

    fn layout() -> SceneLayout {
        let b = BoundingBox::new(0.25, 0.25, 0.5, 0.5).unwrap();
        SceneLayout { frames: 2, tracks: vec![Track { id: 7, category: MotionCategory::Rigid, boxes: vec![b, b] }] }
    }

    #[test]
    fn svg_has_one_panel_and_box_per_frame() {
        let svg = render_svg(&layout());
        assert_eq!(svg.matches(r#"class="frame""#).count(), 2);
        assert_eq!(svg.matches(r#"class="box rigid""#).count(), 2);
        assert_eq!(svg, render_svg(&layout()));
    }

    #[test]
    fn ascii_outline() {
        let text = render_ascii(&layout(), 8, 4);
        let first: Vec<&str> = text.lines().take(5).collect();
        assert_eq!(first, ["frame 1", "........", "..7r....", "........", "........"]);
    }

    #[test]
    fn style_parsing() {
        assert_eq!("svg".parse::<RenderStyle>().unwrap(), RenderStyle::Svg);
        assert!("png".parse::<RenderStyle>().is_err());
    }
}
