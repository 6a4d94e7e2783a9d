//! Occurrence histograms and day-by-slot timelines as CSV and SVG.
//!
//! Output is built from sorted data with fixed number formatting, so equal
//! inputs always give equal bytes.

use std::fmt::Write as _;

use crate::model::NodeGrid;
use crate::pattern::PatternSet;

/// Pattern colours; pattern `id` uses entry `id % PALETTE.len()`.
pub const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#e7ba52",
];

pub fn palette_colour(id: usize) -> &'static str {
    PALETTE[id % PALETTE.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistogramRow {
    pub pattern: usize,
    pub days: usize,
    pub nodes: usize,
}

/// Number of distinct days each pattern occurs on.
pub fn histogram(set: &PatternSet) -> Vec<HistogramRow> {
    set.patterns
        .iter()
        .map(|p| HistogramRow {
            pattern: p.id,
            days: p.days().len(),
            nodes: p.nodes.len(),
        })
        .collect()
}

pub fn histogram_csv(rows: &[HistogramRow]) -> String {
    let mut out = String::from("pattern_id,days,nodes\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.pattern, r.days, r.nodes);
    }
    out
}

const BAR_W: usize = 32;
const BAR_GAP: usize = 8;
const CHART_H: usize = 200;
const MARGIN: usize = 40;

pub fn histogram_svg(rows: &[HistogramRow]) -> String {
    let max_days = rows.iter().map(|r| r.days).max().unwrap_or(0).max(1);
    let width = 2 * MARGIN + rows.len().max(1) * (BAR_W + BAR_GAP);
    let height = CHART_H + 2 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"##
    );
    let _ = writeln!(s, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);
    let base = MARGIN + CHART_H;
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{base}" x2="{}" y2="{base}" stroke="#000000"/>"##,
        width - MARGIN
    );
    for (i, r) in rows.iter().enumerate() {
        let h = r.days * CHART_H / max_days;
        let x = MARGIN + i * (BAR_W + BAR_GAP) + BAR_GAP / 2;
        let _ = writeln!(
            s,
            r##"<rect x="{x}" y="{}" width="{BAR_W}" height="{h}" fill="{}"><title>pattern {}: {} days</title></rect>"##,
            base - h,
            palette_colour(r.pattern),
            r.pattern,
            r.days
        );
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" font-size="10" text-anchor="middle">{}</text>"##,
            x + BAR_W / 2,
            base + 14,
            r.pattern
        );
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" font-size="10" text-anchor="middle">{}</text>"##,
            x + BAR_W / 2,
            base - h - 4,
            r.days
        );
    }
    s.push_str("</svg>\n");
    s
}

const CELL: usize = 12;

/// One row per grid day, one column per slot. Cells of a pattern take its
/// palette colour; unassigned and missing slots stay blank.
pub fn timeline_svg(set: &PatternSet, grid: &NodeGrid) -> String {
    let left = 80;
    let top = 20;
    let slots = grid.slots_per_day();
    let width = left + slots * CELL + 10;
    let height = top + grid.n_days() * CELL + 10;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"##
    );
    let _ = writeln!(s, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);
    for (d, date) in grid.days.iter().enumerate() {
        let _ = writeln!(
            s,
            r##"<text x="4" y="{}" font-size="10">{}</text>"##,
            top + d * CELL + CELL - 2,
            date.format("%Y-%m-%d")
        );
    }
    let hours = slots as u32 * grid.slot_minutes / 60;
    for h in (0..hours).step_by(3) {
        let x = left + (h * 60 / grid.slot_minutes) as usize * CELL;
        let _ = writeln!(s, r##"<text x="{x}" y="12" font-size="10">{h:02}h</text>"##);
    }
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="#cccccc"/>"##,
        slots * CELL,
        grid.n_days() * CELL
    );
    for p in &set.patterns {
        for k in &p.nodes {
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}" data-pattern="{}"/>"##,
                left + k.slot * CELL,
                top + k.day * CELL,
                palette_colour(p.id),
                p.id
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
