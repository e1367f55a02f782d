//! Nonzero patterns of `N, N^2, ..., N^p` as ASCII or SVG panels.

use std::fmt::Write;

use nalgebra::DMatrix;

use crate::chebmat::{grid, MatrixFunction};
use crate::error::{Error, Result};

/// Pattern of one power: `cells[i][j]` is set when the entry exceeds the
/// threshold anywhere on the sampling grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Panel {
    pub power: usize,
    pub cells: Vec<Vec<bool>>,
}

impl Panel {
    pub fn nonzeros(&self) -> usize {
        self.cells.iter().flatten().filter(|&&c| c).count()
    }

    fn size(&self) -> usize {
        self.cells.len()
    }
}

fn pattern(values: &[DMatrix<f64>], threshold: f64) -> Vec<Vec<bool>> {
    let (r, c) = values[0].shape();
    (0..r)
        .map(|i| {
            (0..c)
                .map(|j| values.iter().any(|v| v[(i, j)].abs() > threshold))
                .collect()
        })
        .collect()
}

/// Panels for powers `1..=powers`, sampled on `grid_size` nodes (a single
/// sample for constant input).
pub fn panels(
    n: &MatrixFunction,
    powers: usize,
    threshold: f64,
    grid_size: usize,
) -> Result<Vec<Panel>> {
    if !n.is_square() {
        return Err(Error::dim(
            "spy",
            format!("matrix is {}x{}, need a square matrix", n.rows(), n.cols()),
        ));
    }
    let ts = if n.is_constant() {
        vec![n.interval().mid()]
    } else {
        grid(n.interval(), grid_size)
    };
    let base = n.values_on(&ts);
    let mut cur = base.clone();
    let mut out = Vec::with_capacity(powers);
    for p in 1..=powers {
        out.push(Panel {
            power: p,
            cells: pattern(&cur, threshold),
        });
        cur = cur.iter().zip(&base).map(|(a, b)| a * b).collect();
    }
    Ok(out)
}

pub fn ascii(panels: &[Panel]) -> String {
    let mut out = String::new();
    for p in panels {
        let _ = writeln!(out, "N^{} ({} nonzeros)", p.power, p.nonzeros());
        for row in &p.cells {
            let line: String = row.iter().map(|&c| if c { '#' } else { '.' }).collect();
            let _ = writeln!(out, "{line}");
        }
        out.push('\n');
    }
    out
}

const CELL: usize = 8;
const GAP: usize = 24;
const TITLE: usize = 20;

/// One row of panels; byte-for-byte deterministic for a given input.
pub fn svg(panels: &[Panel]) -> String {
    let n = panels.first().map_or(0, Panel::size);
    let side = n * CELL;
    let width = GAP + panels.len() * (side + GAP);
    let height = TITLE + side + GAP;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##
    );
    for (k, p) in panels.iter().enumerate() {
        let x0 = GAP + k * (side + GAP);
        let y0 = TITLE;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="12" text-anchor="middle">N^{} ({})</text>"#,
            x0 + side / 2,
            TITLE - 6,
            p.power,
            p.nonzeros()
        );
        let _ = writeln!(
            out,
            r##"<rect x="{x0}" y="{y0}" width="{side}" height="{side}" fill="none" stroke="#000000" stroke-width="1"/>"##
        );
        for (i, row) in p.cells.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c {
                    let _ = writeln!(
                        out,
                        r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="#1f3a93"/>"##,
                        x0 + j * CELL,
                        y0 + i * CELL
                    );
                }
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
