//! Map drawings of learned models.
//!
//! States are placed by a least-squares embedding of the relation means,
//! weighted by transition probabilities. The most likely successor of each
//! state gets a solid arrow and other successors with probability at least
//! [`DASHED_THRESHOLD`] get dashed ones.

use std::fmt::Write as _;

use crate::estimation::{project_headings, solve_positions, Edge};
use crate::error::Result;
use crate::model::{transform_point, CoordinateMode, GeoHmm};

pub const DASHED_THRESHOLD: f64 = 0.2;

/// Weight given to every pair so the embedding graph is connected.
const BASE_WEIGHT: f64 = 1e-6;

const CANVAS: f64 = 800.0;
const MARGIN: f64 = 60.0;

/// Global poses `(x, y, θ)` of every state, with state 0 at the origin.
pub fn layout(model: &GeoHmm) -> Result<Vec<(f64, f64, f64)>> {
    let n = model.n_states();
    let a = &model.transitions;
    let weight = |i: usize, j: usize| a[i][j] + BASE_WEIGHT;
    let raw: Vec<Vec<f64>> = model.relations.iter().map(|row| row.iter().map(|e| e.mu_theta).collect()).collect();
    let w: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { weight(i, j) }).collect()).collect();
    let theta = project_headings(&raw, &w, f64::INFINITY).theta;
    let mut ex = Vec::new();
    let mut ey = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let e = &model.relations[i][j];
            let d = match model.mode {
                CoordinateMode::Global => (e.mu_x, e.mu_y),
                CoordinateMode::Relative => transform_point(theta[i], (e.mu_x, e.mu_y)),
            };
            ex.push(Edge::new(i, j, d.0, weight(i, j)));
            ey.push(Edge::new(i, j, d.1, weight(i, j)));
        }
    }
    let x = solve_positions(&ex, n, 0)?;
    let y = solve_positions(&ey, n, 0)?;
    Ok((0..n).map(|i| (x[i], y[i], theta[i])).collect())
}

/// SVG drawing of the model's states and likely transitions.
pub fn render_svg(model: &GeoHmm) -> Result<String> {
    let poses = layout(model)?;
    let n = poses.len();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &poses {
        x0 = x0.min(p.0);
        x1 = x1.max(p.0);
        y0 = y0.min(p.1);
        y1 = y1.max(p.1);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let scale = (CANVAS - 2.0 * MARGIN) / span;
    let px = |p: &(f64, f64, f64)| (MARGIN + (p.0 - x0) * scale, CANVAS - MARGIN - (p.1 - y0) * scale);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{c}" height="{c}" viewBox="0 0 {c} {c}">"#,
        c = CANVAS
    );
    svg.push_str(
        r#"<defs><marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="6" markerHeight="6" orient="auto-start-reverse"><path d="M 0 0 L 10 5 L 0 10 z"/></marker></defs>"#,
    );
    svg.push('\n');
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    const R: f64 = 8.0;
    for i in 0..n {
        let row = &model.transitions[i];
        let best = (0..n).filter(|&j| j != i).max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)));
        for j in (0..n).filter(|&j| j != i) {
            let solid = Some(j) == best;
            if !solid && row[j] < DASHED_THRESHOLD {
                continue;
            }
            let (a, b) = (px(&poses[i]), px(&poses[j]));
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            if len < 2.0 * R {
                continue;
            }
            let (ux, uy) = ((b.0 - a.0) / len, (b.1 - a.1) / len);
            let dash = if solid { "" } else { r#" stroke-dasharray="6,4""# };
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1.5"{dash} marker-end="url(#arrow)"><title>{i}→{j} p={:.3}</title></line>"#,
                a.0 + ux * R,
                a.1 + uy * R,
                b.0 - ux * R,
                b.1 - uy * R,
                row[j]
            );
        }
    }
    for (i, p) in poses.iter().enumerate() {
        let (cx, cy) = px(p);
        let r = if i == model.start_state { 1.6 * R } else { R };
        // heading tick: θ = 0 points along +y, which is up on the canvas
        let (hx, hy) = (-p.2.sin(), -p.2.cos());
        let _ = writeln!(
            svg,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.1}" fill="lightsteelblue" stroke="black"/><line x1="{cx:.2}" y1="{cy:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick"/><text x="{:.2}" y="{:.2}" font-size="11" font-family="sans-serif">{i}</text>"#,
            cx + hx * r,
            cy + hy * r,
            cx + r + 2.0,
            cy - r - 2.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
