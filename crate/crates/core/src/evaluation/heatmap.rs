//! Spatial aggregation of per-point power on a regular grid.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dataset::SamplePair;
use crate::metrics::{pair_powers, Estimator};
use crate::scalar::Scalar;

/// Display range of the colour scale, dB.
pub const HEATMAP_RANGE_DB: (f64, f64) = (-15.0, 0.0);

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    /// Sum of linear powers.
    pub sum: f64,
    pub count: usize,
}

impl HeatmapCell {
    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }

    pub fn mean_db(&self) -> Option<f64> {
        self.mean().map(|p| 10.0 * p.log10())
    }
}

/// Cells of side `cell_size` starting at `min`; cell `(i, j)` covers
/// `[min_x + i c, min_x + (i + 1) c) x [min_y + j c, min_y + (j + 1) c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub cell_size: f64,
    pub min: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    /// Row-major in `y`: index `j * nx + i`.
    pub cells: Vec<HeatmapCell>,
}

impl HeatmapGrid {
    pub fn cell(&self, i: usize, j: usize) -> &HeatmapCell {
        &self.cells[j * self.nx + i]
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.min[0] + (i as f64 + 0.5) * self.cell_size,
            self.min[1] + (j as f64 + 0.5) * self.cell_size,
        ]
    }

    pub fn total_count(&self) -> usize {
        self.cells.iter().map(|c| c.count).sum()
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|c| c.count > 0).count()
    }

    /// `cell_x,cell_y,mean_p_db,count` with cell centres in metres; empty cells
    /// have an empty mean. Means are written unclamped.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cell_x,cell_y,mean_p_db,count\n");
        for j in 0..self.ny {
            for i in 0..self.nx {
                let c = self.cell(i, j);
                let [x, y] = self.center(i, j);
                let mean = c.mean_db().map(|v| v.to_string()).unwrap_or_default();
                let _ = writeln!(s, "{x},{y},{mean},{}", c.count);
            }
        }
        s
    }

    /// Top view with `+y` up, occupied cells coloured over [`HEATMAP_RANGE_DB`].
    pub fn to_svg(&self) -> String {
        let px_per_cell = (480.0 / self.nx.max(self.ny) as f64).clamp(2.0, 40.0);
        let (gw, gh) = (self.nx as f64 * px_per_cell, self.ny as f64 * px_per_cell);
        let (margin, bar) = (40.0, 70.0);
        let (w, h) = (gw + 2.0 * margin + bar, gh + 2.0 * margin);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(
            s,
            r##"<rect width="{w}" height="{h}" fill="white"/><rect x="{margin}" y="{margin}" width="{gw}" height="{gh}" fill="#f4f4f4" stroke="black"/>"##
        );
        for j in 0..self.ny {
            for i in 0..self.nx {
                if let Some(db) = self.cell(i, j).mean_db() {
                    let x = margin + i as f64 * px_per_cell;
                    let y = margin + gh - (j as f64 + 1.0) * px_per_cell;
                    let _ = writeln!(
                        s,
                        r#"<rect x="{x:.2}" y="{y:.2}" width="{px_per_cell:.2}" height="{px_per_cell:.2}" fill="{}"/>"#,
                        color_for_db(db)
                    );
                }
            }
        }
        let bx = margin + gw + 20.0;
        let steps = 30;
        let sh = gh / steps as f64;
        for k in 0..steps {
            let db = HEATMAP_RANGE_DB.1 - (k as f64 + 0.5) / steps as f64 * (HEATMAP_RANGE_DB.1 - HEATMAP_RANGE_DB.0);
            let _ = writeln!(
                s,
                r#"<rect x="{bx:.2}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#,
                margin + k as f64 * sh,
                sh + 0.5,
                color_for_db(db)
            );
        }
        for (label, frac) in [(HEATMAP_RANGE_DB.1, 0.0), ((HEATMAP_RANGE_DB.0 + HEATMAP_RANGE_DB.1) / 2.0, 0.5), (HEATMAP_RANGE_DB.0, 1.0)] {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">{label} dB</text>"#,
                bx + 18.0,
                margin + frac * gh + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{margin}" y="{:.2}">x {:.2} .. {:.2} m, y {:.2} .. {:.2} m</text>"#,
            h - 12.0,
            self.min[0],
            self.min[0] + self.nx as f64 * self.cell_size,
            self.min[1],
            self.min[1] + self.ny as f64 * self.cell_size
        );
        s.push_str("</svg>\n");
        s
    }
}

const VIRIDIS: [(f64, f64, f64); 9] = [
    (68.0, 1.0, 84.0),
    (71.0, 44.0, 122.0),
    (59.0, 81.0, 139.0),
    (44.0, 113.0, 142.0),
    (33.0, 144.0, 141.0),
    (39.0, 173.0, 129.0),
    (92.0, 200.0, 99.0),
    (170.0, 220.0, 50.0),
    (253.0, 231.0, 37.0),
];

/// Viridis colour of `db`, clamped to [`HEATMAP_RANGE_DB`].
pub fn color_for_db(db: f64) -> String {
    let (lo, hi) = HEATMAP_RANGE_DB;
    let t = ((db - lo) / (hi - lo)).clamp(0.0, 1.0);
    let x = t * (VIRIDIS.len() - 1) as f64;
    let k = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - k as f64;
    let (a, b) = (VIRIDIS[k], VIRIDIS[k + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Aggregates `(position, linear power)` points into cells spanning their bounding box.
pub fn heatmap_from_powers(points: &[([f64; 3], f64)], cell_size: f64) -> Result<HeatmapGrid, EvalError> {
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(EvalError::Config(format!("cell size {cell_size} must be positive")));
    }
    let Some(first) = points.first() else {
        return Err(EvalError::EmptySubset {
            side: "heatmap",
            a: cell_size,
        });
    };
    let mut min = [first.0[0], first.0[1]];
    let mut max = min;
    for (p, _) in points {
        for k in 0..2 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    let n = |k: usize| ((max[k] - min[k]) / cell_size).floor() as usize + 1;
    let (nx, ny) = (n(0), n(1));
    let mut cells = vec![HeatmapCell::default(); nx * ny];
    for (p, v) in points {
        let i = (((p[0] - min[0]) / cell_size).floor() as usize).min(nx - 1);
        let j = (((p[1] - min[1]) / cell_size).floor() as usize).min(ny - 1);
        let c = &mut cells[j * nx + i];
        c.sum += v;
        c.count += 1;
    }
    Ok(HeatmapGrid {
        cell_size,
        min,
        nx,
        ny,
        cells,
    })
}

/// Per-cell mean power of `estimator` over `pairs`.
pub fn heatmap<T: Scalar, E: Estimator<T> + ?Sized>(
    pairs: &[SamplePair<T>],
    estimator: &E,
    cell_size: f64,
) -> Result<HeatmapGrid, EvalError> {
    let powers = pair_powers(pairs, estimator)?;
    let points: Vec<([f64; 3], f64)> = pairs
        .iter()
        .zip(&powers)
        .map(|(p, v)| (p.position.map(|x| x.as_f64()), v.as_f64()))
        .collect();
    heatmap_from_powers(&points, cell_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_power_is_zero_db() {
        let pts: Vec<_> = (0..50).map(|i| ([i as f64 * 0.1, (i % 7) as f64 * 0.3, 0.0], 1.0)).collect();
        let g = heatmap_from_powers(&pts, 0.5).unwrap();
        assert_eq!(g.total_count(), 50);
        for c in &g.cells {
            if let Some(db) = c.mean_db() {
                assert_eq!(db, 0.0);
            }
        }
    }

    #[test]
    fn single_cell() {
        let pts = vec![([1.0, 1.0, 0.0], 0.5), ([1.1, 1.2, 0.0], 0.25)];
        let g = heatmap_from_powers(&pts, 1.0).unwrap();
        assert_eq!((g.nx, g.ny, g.occupied()), (1, 1, 1));
        assert!((g.cells[0].mean().unwrap() - 0.375).abs() < 1e-15);
        let csv = g.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(g.to_svg().contains("<rect"));
        assert!(heatmap_from_powers(&pts, 0.0).is_err());
    }

    #[test]
    fn empty_cells_have_blank_mean() {
        let pts = vec![([0.0, 0.0, 0.0], 0.5), ([2.5, 0.0, 0.0], 0.5)];
        let g = heatmap_from_powers(&pts, 1.0).unwrap();
        assert_eq!(g.nx, 3);
        assert!(g.to_csv().contains("1.5,0.5,,0"));
    }

    #[test]
    fn colour_scale_is_clamped() {
        assert_eq!(color_for_db(-40.0), color_for_db(-15.0));
        assert_eq!(color_for_db(3.0), "#fde725");
        assert_eq!(color_for_db(-15.0), "#440154");
    }
}
