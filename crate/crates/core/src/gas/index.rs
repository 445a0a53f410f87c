//! Uniform grid bucket index over automaton locations.

use std::collections::BTreeSet;

use super::georef::{GeoRefConvention, Location, Metric, NeighborhoodSpec};
use crate::ids::EntityId;

#[derive(Debug, Clone)]
enum Buckets {
    Lattice {
        width: usize,
        height: usize,
        cells: Vec<Vec<EntityId>>,
    },
    Continuous {
        cell: f64,
        nx: usize,
        ny: usize,
        buckets: Vec<Vec<(EntityId, Location)>>,
    },
}

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    georef: GeoRefConvention,
    buckets: Buckets,
    items: Vec<(EntityId, Location)>,
}

impl SpatialIndex {
    /// `bucket_hint` sizes continuous buckets; lattices bucket per cell.
    pub fn build<I>(georef: &GeoRefConvention, items: I, bucket_hint: f64) -> Self
    where
        I: IntoIterator<Item = (EntityId, Location)>,
    {
        let mut items: Vec<(EntityId, Location)> = items.into_iter().collect();
        items.sort_by_key(|(id, _)| *id);
        let buckets = match *georef {
            GeoRefConvention::Lattice { width, height, .. } => {
                let (w, h) = (width as usize, height as usize);
                let mut cells = vec![Vec::new(); w * h];
                for (id, loc) in &items {
                    if let Location::Cell(x, y) = *loc {
                        if (0..w as i64).contains(&x) && (0..h as i64).contains(&y) {
                            cells[y as usize * w + x as usize].push(*id);
                        }
                    }
                }
                Buckets::Lattice {
                    width: w,
                    height: h,
                    cells,
                }
            }
            GeoRefConvention::Continuous { min_x, min_y, .. } => {
                let (w, h) = georef.extent();
                let fallback = w.max(h) / 16.0;
                let cell = if bucket_hint.is_finite() && bucket_hint > 0.0 {
                    bucket_hint.max(w.max(h) / 1024.0)
                } else {
                    fallback
                };
                let nx = ((w / cell).ceil() as usize).clamp(1, 1024);
                let ny = ((h / cell).ceil() as usize).clamp(1, 1024);
                let mut buckets = vec![Vec::new(); nx * ny];
                for (id, loc) in &items {
                    let bx = (((loc.x() - min_x) / cell).floor().max(0.0) as usize).min(nx - 1);
                    let by = (((loc.y() - min_y) / cell).floor().max(0.0) as usize).min(ny - 1);
                    buckets[by * nx + bx].push((*id, *loc));
                }
                Buckets::Continuous { cell, nx, ny, buckets }
            }
        };
        Self {
            georef: *georef,
            buckets,
            items,
        }
    }

    pub fn georef(&self) -> &GeoRefConvention {
        &self.georef
    }

    /// All indexed automata in id order.
    pub fn items(&self) -> &[(EntityId, Location)] {
        &self.items
    }

    pub fn occupants(&self, x: i64, y: i64) -> &[EntityId] {
        match &self.buckets {
            Buckets::Lattice { width, height, cells } => {
                if (0..*width as i64).contains(&x) && (0..*height as i64).contains(&y) {
                    &cells[y as usize * width + x as usize]
                } else {
                    &[]
                }
            }
            Buckets::Continuous { .. } => &[],
        }
    }

    pub fn is_vacant(&self, x: i64, y: i64) -> bool {
        self.occupants(x, y).is_empty()
    }

    /// Lattice cells at metric distance in `(0, reach]` from `center`.
    pub fn ring_cells(&self, center: (i64, i64), metric: Metric, reach: f64) -> BTreeSet<(i64, i64)> {
        let mut out = BTreeSet::new();
        if reach <= 0.0 || !self.georef.is_lattice() {
            return out;
        }
        let r = reach.floor() as i64;
        let here = Location::Cell(center.0, center.1);
        for dy in -r..=r {
            for dx in -r..=r {
                if metric.measure(dx as f64, dy as f64) > reach {
                    continue;
                }
                let Some(cell) = self.georef.offset_cell(center.0, center.1, dx, dy) else {
                    continue;
                };
                if cell == center {
                    continue;
                }
                let d = self.georef.distance(&here, &Location::Cell(cell.0, cell.1), metric);
                if d > 0.0 && d <= reach {
                    out.insert(cell);
                }
            }
        }
        out
    }

    /// Automata whose distance from `center` lies in `(0, reach]` under the
    /// spec's metric, sorted by id, with their distances.
    pub fn within(&self, center: &Location, spec: &NeighborhoodSpec) -> Vec<(EntityId, f64)> {
        let metric = spec.metric(&self.georef);
        let reach = spec.reach();
        if reach <= 0.0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        match &self.buckets {
            Buckets::Lattice { .. } => {
                let Location::Cell(cx, cy) = *center else {
                    return out;
                };
                for (x, y) in self.ring_cells((cx, cy), metric, reach) {
                    let d = self.georef.distance(center, &Location::Cell(x, y), metric);
                    out.extend(self.occupants(x, y).iter().map(|id| (*id, d)));
                }
            }
            Buckets::Continuous { cell, nx, ny, buckets } => {
                let GeoRefConvention::Continuous { min_x, min_y, .. } = self.georef else {
                    return out;
                };
                let span = (reach / cell).ceil() as i64 + 1;
                let bx = ((center.x() - min_x) / cell).floor() as i64;
                let by = ((center.y() - min_y) / cell).floor() as i64;
                let torus = self.georef.boundary() == super::Boundary::Torus;
                let mut seen = BTreeSet::new();
                for oy in -span..=span {
                    for ox in -span..=span {
                        let (mut x, mut y) = (bx + ox, by + oy);
                        if torus {
                            x = x.rem_euclid(*nx as i64);
                            y = y.rem_euclid(*ny as i64);
                        } else if x < 0 || y < 0 || x >= *nx as i64 || y >= *ny as i64 {
                            continue;
                        }
                        if !seen.insert((x, y)) {
                            continue;
                        }
                        for (id, loc) in &buckets[y as usize * nx + x as usize] {
                            let d = self.georef.distance(center, loc, metric);
                            if d > 0.0 && d <= reach {
                                out.push((*id, d));
                            }
                        }
                    }
                }
            }
        }
        out.sort_by_key(|(id, _)| *id);
        out
    }

    /// Every unoccupied lattice cell in row-major order.
    pub fn vacant_cells(&self) -> Vec<(i64, i64)> {
        match &self.buckets {
            Buckets::Lattice { width, cells, .. } => cells
                .iter()
                .enumerate()
                .filter(|(_, c)| c.is_empty())
                .map(|(i, _)| ((i % width) as i64, (i / width) as i64))
                .collect(),
            Buckets::Continuous { .. } => Vec::new(),
        }
    }
}
