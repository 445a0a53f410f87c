use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Position of an automaton: an integer cell on a lattice or a point in
/// continuous model units. Serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Location {
    Cell(i64, i64),
    Point(f64, f64),
}

impl Location {
    pub fn x(&self) -> f64 {
        match *self {
            Location::Cell(x, _) => x as f64,
            Location::Point(x, _) => x,
        }
    }

    pub fn y(&self) -> f64 {
        match *self {
            Location::Cell(_, y) => y as f64,
            Location::Point(_, y) => y,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Cell(x, y) => write!(f, "({x}, {y})"),
            Location::Point(x, y) => write!(f, "({x}, {y})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Clamp,
    Torus,
}

impl Boundary {
    pub fn keyword(self) -> &'static str {
        match self {
            Boundary::Clamp => "clamp",
            Boundary::Torus => "torus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Chebyshev,
    Manhattan,
    Euclidean,
}

impl Metric {
    pub fn measure(self, dx: f64, dy: f64) -> f64 {
        match self {
            Metric::Chebyshev => dx.abs().max(dy.abs()),
            Metric::Manhattan => dx.abs() + dy.abs(),
            Metric::Euclidean => dx.hypot(dy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("lattice dimensions must be positive, got {0}x{1}")]
    EmptyLattice(u32, u32),
    #[error("degenerate bounding box")]
    DegenerateBox,
    #[error("location {0} is outside the model bounds")]
    OutOfBounds(Location),
    #[error("location {0} does not match the georeferencing kind")]
    WrongKind(Location),
}

/// The georeferencing convention (L) of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeoRefConvention {
    Lattice {
        width: u32,
        height: u32,
        boundary: Boundary,
    },
    Continuous {
        min_x: f64,
        min_y: f64,
        max_x: f64,
        max_y: f64,
        boundary: Boundary,
    },
}

impl GeoRefConvention {
    pub fn lattice(width: u32, height: u32, boundary: Boundary) -> Self {
        GeoRefConvention::Lattice {
            width,
            height,
            boundary,
        }
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        match *self {
            GeoRefConvention::Lattice { width, height, .. } => {
                if width == 0 || height == 0 {
                    return Err(GeoError::EmptyLattice(width, height));
                }
            }
            GeoRefConvention::Continuous {
                min_x,
                min_y,
                max_x,
                max_y,
                ..
            } => {
                let ok = [min_x, min_y, max_x, max_y].iter().all(|v| v.is_finite()) && max_x > min_x && max_y > min_y;
                if !ok {
                    return Err(GeoError::DegenerateBox);
                }
            }
        }
        Ok(())
    }

    pub fn boundary(&self) -> Boundary {
        match *self {
            GeoRefConvention::Lattice { boundary, .. } | GeoRefConvention::Continuous { boundary, .. } => boundary,
        }
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self, GeoRefConvention::Lattice { .. })
    }

    pub fn default_metric(&self) -> Metric {
        if self.is_lattice() {
            Metric::Chebyshev
        } else {
            Metric::Euclidean
        }
    }

    pub fn check(&self, loc: &Location) -> Result<(), GeoError> {
        match (*self, *loc) {
            (GeoRefConvention::Lattice { width, height, .. }, Location::Cell(x, y)) => {
                if (0..i64::from(width)).contains(&x) && (0..i64::from(height)).contains(&y) {
                    Ok(())
                } else {
                    Err(GeoError::OutOfBounds(*loc))
                }
            }
            (
                GeoRefConvention::Continuous {
                    min_x,
                    min_y,
                    max_x,
                    max_y,
                    boundary,
                },
                Location::Point(x, y),
            ) => {
                let inside_x = match boundary {
                    Boundary::Clamp => x >= min_x && x <= max_x,
                    Boundary::Torus => x >= min_x && x < max_x,
                };
                let inside_y = match boundary {
                    Boundary::Clamp => y >= min_y && y <= max_y,
                    Boundary::Torus => y >= min_y && y < max_y,
                };
                if inside_x && inside_y {
                    Ok(())
                } else {
                    Err(GeoError::OutOfBounds(*loc))
                }
            }
            _ => Err(GeoError::WrongKind(*loc)),
        }
    }

    pub fn contains(&self, loc: &Location) -> bool {
        self.check(loc).is_ok()
    }

    /// Brings arbitrary coordinates into bounds: clamped or wrapped per the
    /// boundary mode, and rounded to the nearest cell on a lattice.
    pub fn normalize(&self, x: f64, y: f64) -> Location {
        match *self {
            GeoRefConvention::Lattice {
                width,
                height,
                boundary,
            } => {
                let (w, h) = (i64::from(width), i64::from(height));
                let cx = x.round().clamp(-9.0e15, 9.0e15) as i64;
                let cy = y.round().clamp(-9.0e15, 9.0e15) as i64;
                match boundary {
                    Boundary::Clamp => Location::Cell(cx.clamp(0, w - 1), cy.clamp(0, h - 1)),
                    Boundary::Torus => Location::Cell(cx.rem_euclid(w), cy.rem_euclid(h)),
                }
            }
            GeoRefConvention::Continuous {
                min_x,
                min_y,
                max_x,
                max_y,
                boundary,
            } => match boundary {
                Boundary::Clamp => Location::Point(x.clamp(min_x, max_x), y.clamp(min_y, max_y)),
                Boundary::Torus => {
                    let wrap = |v: f64, lo: f64, hi: f64| {
                        let r = lo + (v - lo).rem_euclid(hi - lo);
                        if r >= hi {
                            lo
                        } else {
                            r
                        }
                    };
                    Location::Point(wrap(x, min_x, max_x), wrap(y, min_y, max_y))
                }
            },
        }
    }

    /// Cell reached by an integer offset from `(x, y)`; `None` when it falls
    /// off a clamped lattice.
    pub fn offset_cell(&self, x: i64, y: i64, dx: i64, dy: i64) -> Option<(i64, i64)> {
        let GeoRefConvention::Lattice {
            width,
            height,
            boundary,
        } = *self
        else {
            return None;
        };
        let (w, h) = (i64::from(width), i64::from(height));
        let (nx, ny) = (x + dx, y + dy);
        match boundary {
            Boundary::Torus => Some((nx.rem_euclid(w), ny.rem_euclid(h))),
            Boundary::Clamp => ((0..w).contains(&nx) && (0..h).contains(&ny)).then_some((nx, ny)),
        }
    }

    /// Displacement from `a` to `b`, using the minimal image on a torus.
    pub fn delta(&self, a: &Location, b: &Location) -> (f64, f64) {
        let (dx, dy) = (b.x() - a.x(), b.y() - a.y());
        if self.boundary() == Boundary::Clamp {
            return (dx, dy);
        }
        let (w, h) = self.extent();
        let wrap = |d: f64, span: f64| {
            let r = d.rem_euclid(span);
            if r > span / 2.0 {
                r - span
            } else {
                r
            }
        };
        (wrap(dx, w), wrap(dy, h))
    }

    pub fn distance(&self, a: &Location, b: &Location, metric: Metric) -> f64 {
        let (dx, dy) = self.delta(a, b);
        metric.measure(dx, dy)
    }

    pub fn extent(&self) -> (f64, f64) {
        match *self {
            GeoRefConvention::Lattice { width, height, .. } => (f64::from(width), f64::from(height)),
            GeoRefConvention::Continuous {
                min_x,
                min_y,
                max_x,
                max_y,
                ..
            } => (max_x - min_x, max_y - min_y),
        }
    }
}

/// Neighborhood specification (N) of an automaton type. A neighbor lies at
/// a distance in `(0, reach]`; co-located automata are not neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodSpec {
    None,
    Moore(u32),
    VonNeumann(u32),
    Radius(f64),
}

impl NeighborhoodSpec {
    pub fn metric(&self, georef: &GeoRefConvention) -> Metric {
        match self {
            NeighborhoodSpec::None => georef.default_metric(),
            NeighborhoodSpec::Moore(_) => Metric::Chebyshev,
            NeighborhoodSpec::VonNeumann(_) => Metric::Manhattan,
            NeighborhoodSpec::Radius(_) => Metric::Euclidean,
        }
    }

    pub fn reach(&self) -> f64 {
        match *self {
            NeighborhoodSpec::None => 0.0,
            NeighborhoodSpec::Moore(r) | NeighborhoodSpec::VonNeumann(r) => f64::from(r),
            NeighborhoodSpec::Radius(r) => r,
        }
    }
}
