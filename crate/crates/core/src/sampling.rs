//! Integration node sets: interior points with volume weights plus named
//! boundary groups carrying edge-length weights and outward unit normals.
//!
//! All generators place nodes at cell centroids, so every weight is strictly
//! positive and no corner is counted twice.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub x: [f64; 2],
    pub weight: f64,
    pub normal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGroup {
    pub name: String,
    pub nodes: Vec<BoundaryNode>,
}

impl BoundaryGroup {
    pub fn length(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.nodes.iter().map(|n| n.x).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub dim: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub boundaries: Vec<BoundaryGroup>,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn boundary(&self, name: &str) -> Result<&BoundaryGroup> {
        self.boundaries
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| Error::MissingBoundary(name.to_string()))
    }

    /// Weighted sum of `f` over interior nodes.
    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    /// Keeps only interior nodes satisfying `keep`; boundary groups are dropped.
    pub fn filter(&self, keep: impl Fn([f64; 2]) -> bool) -> NodeSet {
        let (points, weights) = self
            .points
            .iter()
            .zip(&self.weights)
            .filter(|(&p, _)| keep(p))
            .map(|(&p, &w)| (p, w))
            .unzip();
        NodeSet {
            dim: self.dim,
            points,
            weights,
            boundaries: Vec::new(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        for (p, &wt) in self.points.iter().zip(&self.weights) {
            w.serialize(CsvRow {
                x1: p[0],
                x2: p[1],
                w: wt,
                group: INTERIOR.into(),
                n1: 0.0,
                n2: 0.0,
            })
            .map_err(csv_err)?;
        }
        for g in &self.boundaries {
            for n in &g.nodes {
                w.serialize(CsvRow {
                    x1: n.x[0],
                    x2: n.x[1],
                    w: n.weight,
                    group: g.name.clone(),
                    n1: n.normal[0],
                    n2: n.normal[1],
                })
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, dim: usize) -> Result<NodeSet> {
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let mut set = NodeSet {
            dim,
            points: Vec::new(),
            weights: Vec::new(),
            boundaries: Vec::new(),
        };
        for row in r.deserialize() {
            let row: CsvRow = row.map_err(csv_err)?;
            if row.group == INTERIOR {
                set.points.push([row.x1, row.x2]);
                set.weights.push(row.w);
                continue;
            }
            let node = BoundaryNode {
                x: [row.x1, row.x2],
                weight: row.w,
                normal: [row.n1, row.n2],
            };
            match set.boundaries.iter_mut().find(|g| g.name == row.group) {
                Some(g) => g.nodes.push(node),
                None => set.boundaries.push(BoundaryGroup {
                    name: row.group,
                    nodes: vec![node],
                }),
            }
        }
        Ok(set)
    }
}

const INTERIOR: &str = "interior";

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    x1: f64,
    x2: f64,
    w: f64,
    group: String,
    n1: f64,
    n2: f64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn point_group(name: &str, x: [f64; 2], weight: f64, normal: [f64; 2]) -> BoundaryGroup {
    BoundaryGroup {
        name: name.into(),
        nodes: vec![BoundaryNode { x, weight, normal }],
    }
}

/// `n` midpoint nodes on `[0, 1]`, each weighing `1/n`, plus unit-weight end
/// groups `left` and `right` for point loads.
pub fn uniform_1d(n: usize) -> Result<NodeSet> {
    if n < 2 {
        return Err(Error::Config(format!("1D node set needs n >= 2, got {n}")));
    }
    let h = 1.0 / n as f64;
    Ok(NodeSet {
        dim: 1,
        points: (0..n).map(|i| [(i as f64 + 0.5) * h, 0.0]).collect(),
        weights: vec![h; n],
        boundaries: vec![
            point_group("left", [0.0, 0.0], 1.0, [-1.0, 0.0]),
            point_group("right", [1.0, 0.0], 1.0, [1.0, 0.0]),
        ],
    })
}

/// Cell-centred `nx × ny` grid on `[0, L] × [0, 3L]` with `bottom`, `top`,
/// `left` and `right` edge groups.
pub fn uniform_grid_2d(nx: usize, ny: usize, length: f64) -> Result<NodeSet> {
    if nx < 2 || ny < 2 {
        return Err(Error::Config(format!("2D grid needs nx, ny >= 2, got {nx} x {ny}")));
    }
    if length <= 0.0 {
        return Err(Error::Config(format!("plate width must be positive, got {length}")));
    }
    let height = 3.0 * length;
    let (hx, hy) = (length / nx as f64, height / ny as f64);
    let mut points = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            points.push([(i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy]);
        }
    }
    let edge = |name: &str, count: usize, h: f64, at: &dyn Fn(f64) -> [f64; 2], normal: [f64; 2]| BoundaryGroup {
        name: name.into(),
        nodes: (0..count)
            .map(|k| BoundaryNode {
                x: at((k as f64 + 0.5) * h),
                weight: h,
                normal,
            })
            .collect(),
    };
    Ok(NodeSet {
        dim: 2,
        weights: vec![hx * hy; points.len()],
        points,
        boundaries: vec![
            edge("bottom", nx, hx, &|s| [s, 0.0], [0.0, -1.0]),
            edge("top", nx, hx, &|s| [s, height], [0.0, 1.0]),
            edge("left", ny, hy, &|s| [0.0, s], [-1.0, 0.0]),
            edge("right", ny, hy, &|s| [length, s], [1.0, 0.0]),
        ],
    })
}

/// Quarter plate `[0, side]²` minus the disc of `radius` at the origin.
///
/// A graded polar band (geometric radial spacing) hugs the hole out to
/// `band = min(3 radius, side / 2)`; beyond it a Cartesian grid of
/// `resolution × resolution` cells is clipped against the band circle, each
/// clipped cell keeping the exact-ish area and centroid of its outer part.
/// Groups: `hole` (normals toward the centre), `right`, `top`, `left`,
/// `bottom`.
pub fn plate_with_hole(radius: f64, side: f64, resolution: usize) -> Result<NodeSet> {
    if !(radius > 0.0 && radius < side) {
        return Err(Error::Config(format!("hole radius {radius} must lie in (0, side = {side})")));
    }
    if resolution < 4 {
        return Err(Error::Config(format!("plate resolution must be >= 4, got {resolution}")));
    }
    let band = (3.0 * radius).min(0.5 * side);
    let n_theta = ((resolution * 3) / 5).max(8);
    let n_r = (resolution / 4).max(4);
    let d_theta = FRAC_PI_2 / n_theta as f64;
    let radii: Vec<f64> = (0..=n_r)
        .map(|k| radius * (band / radius).powf(k as f64 / n_r as f64))
        .collect();

    let mut points = Vec::new();
    let mut weights = Vec::new();
    for k in 0..n_r {
        let (r0, r1) = (radii[k], radii[k + 1]);
        let rm = 0.5 * (r0 + r1);
        let area = 0.5 * (r1 * r1 - r0 * r0) * d_theta;
        for j in 0..n_theta {
            let t = (j as f64 + 0.5) * d_theta;
            points.push([rm * t.cos(), rm * t.sin()]);
            weights.push(area);
        }
    }

    let h = side / resolution as f64;
    const SUB: usize = 16;
    for jy in 0..resolution {
        for ix in 0..resolution {
            let (x0, y0) = (ix as f64 * h, jy as f64 * h);
            let far = (x0 * x0 + y0 * y0).sqrt();
            if far >= band {
                points.push([x0 + 0.5 * h, y0 + 0.5 * h]);
                weights.push(h * h);
                continue;
            }
            let (x1, y1) = (x0 + h, y0 + h);
            if (x1 * x1 + y1 * y1).sqrt() <= band {
                continue;
            }
            let hs = h / SUB as f64;
            let (mut count, mut cx, mut cy) = (0usize, 0.0, 0.0);
            for sy in 0..SUB {
                for sx in 0..SUB {
                    let px = x0 + (sx as f64 + 0.5) * hs;
                    let py = y0 + (sy as f64 + 0.5) * hs;
                    if px * px + py * py >= band * band {
                        count += 1;
                        cx += px;
                        cy += py;
                    }
                }
            }
            if count > 0 {
                points.push([cx / count as f64, cy / count as f64]);
                weights.push(count as f64 * hs * hs);
            }
        }
    }

    let hole = BoundaryGroup {
        name: "hole".into(),
        nodes: (0..n_theta)
            .map(|j| {
                let t = (j as f64 + 0.5) * d_theta;
                BoundaryNode {
                    x: [radius * t.cos(), radius * t.sin()],
                    weight: radius * d_theta,
                    normal: [-t.cos(), -t.sin()],
                }
            })
            .collect(),
    };
    let outer = |name: &str, at: &dyn Fn(f64) -> [f64; 2], normal: [f64; 2]| BoundaryGroup {
        name: name.into(),
        nodes: (0..resolution)
            .map(|k| BoundaryNode {
                x: at((k as f64 + 0.5) * h),
                weight: h,
                normal,
            })
            .collect(),
    };
    // symmetry edges run from the hole to the outer boundary
    let symmetry = |name: &str, at: &dyn Fn(f64) -> [f64; 2], normal: [f64; 2]| {
        let mut nodes: Vec<BoundaryNode> = radii
            .windows(2)
            .map(|r| BoundaryNode {
                x: at(0.5 * (r[0] + r[1])),
                weight: r[1] - r[0],
                normal,
            })
            .collect();
        for k in 0..resolution {
            let (s0, s1) = ((k as f64 * h).max(band), (k + 1) as f64 * h);
            if s1 > s0 {
                nodes.push(BoundaryNode {
                    x: at(0.5 * (s0 + s1)),
                    weight: s1 - s0,
                    normal,
                });
            }
        }
        BoundaryGroup {
            name: name.into(),
            nodes,
        }
    };
    Ok(NodeSet {
        dim: 2,
        points,
        weights,
        boundaries: vec![
            hole,
            outer("right", &|s| [side, s], [1.0, 0.0]),
            outer("top", &|s| [s, side], [0.0, 1.0]),
            symmetry("left", &|s| [0.0, s], [-1.0, 0.0]),
            symmetry("bottom", &|s| [s, 0.0], [0.0, -1.0]),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn uniform_1d_basics() {
        let s = uniform_1d(2).unwrap();
        assert_eq!(s.points, vec![[0.25, 0.0], [0.75, 0.0]]);
        assert_eq!(s.measure(), 1.0);
        let s = uniform_1d(50).unwrap();
        assert_eq!(s.len(), 50);
        assert!((s.measure() - 1.0).abs() < 1e-12);
        assert!(s.weights.iter().all(|&w| w == s.weights[0]));
        let right = s.boundary("right").unwrap();
        assert_eq!(right.nodes[0].x, [1.0, 0.0]);
        assert_eq!(right.nodes[0].weight, 1.0);
        assert!(uniform_1d(1).is_err());
    }

    #[test]
    fn grid_basics() {
        let s = uniform_grid_2d(10, 30, 1.0).unwrap();
        assert!((s.measure() - 3.0).abs() < 1e-12);
        let top = s.boundary("top").unwrap();
        assert!(top.nodes.iter().all(|n| n.x[1] == 3.0 && n.normal == [0.0, 1.0]));
        assert!((top.length() - 1.0).abs() < 1e-15);
        assert!((s.boundary("bottom").unwrap().length() - 1.0).abs() < 1e-15);
        assert!(s.boundary("nope").is_err());
        assert!(uniform_grid_2d(1, 5, 1.0).is_err());
    }

    #[test]
    fn plate_area_and_geometry() {
        let s = plate_with_hole(0.1, 0.5, 40).unwrap();
        let exact = 0.25 - PI * 0.01 / 4.0;
        assert!((s.measure() - exact).abs() < 0.01 * exact, "{} vs {exact}", s.measure());
        let min_r = s.points.iter().map(|p| p[0].hypot(p[1])).fold(f64::MAX, f64::min);
        assert!(min_r >= 0.1);
        for n in &s.boundary("hole").unwrap().nodes {
            // normal points from the node toward the centre
            let dot = n.normal[0] * n.x[0] + n.normal[1] * n.x[1];
            assert!(dot < 0.0);
        }
        assert!(plate_with_hole(0.6, 0.5, 40).is_err());

        let s = plate_with_hole(0.1, 1.0, 60).unwrap();
        let exact = 1.0 - PI * 0.01 / 4.0;
        assert!((s.measure() - exact).abs() < 0.01 * exact);
        assert!((s.boundary("hole").unwrap().length() - PI * 0.05).abs() < 1e-12);
        assert!((s.boundary("left").unwrap().length() - 0.9).abs() < 1e-12);
        assert!(s.len() > 3000 && s.len() < 5000, "{}", s.len());
    }

    #[test]
    fn normals_are_unit() {
        for s in [
            uniform_1d(10).unwrap(),
            uniform_grid_2d(4, 12, 1.0).unwrap(),
            plate_with_hole(0.1, 1.0, 20).unwrap(),
        ] {
            assert!(s.weights.iter().all(|&w| w > 0.0));
            for g in &s.boundaries {
                for n in &g.nodes {
                    assert!((n.normal[0].hypot(n.normal[1]) - 1.0).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn linear_functions_integrate_within_tolerance() {
        let f = |p: [f64; 2]| 1.0 + 2.0 * p[0] - 0.5 * p[1];
        let s = uniform_grid_2d(8, 24, 1.0).unwrap();
        // mean over [0,1]×[0,3] is 1 + 1 − 0.75
        assert!((s.integrate(f) - 3.0 * 1.25).abs() < 1e-12);

        let s = plate_with_hole(0.1, 1.0, 40).unwrap();
        // ∫ over the square minus ∫ over the quarter disc (r³/3 · 1 for x and y each)
        let disc_x = 0.001 / 3.0;
        let exact = (1.0 - PI * 0.01 / 4.0) + 2.0 * (0.5 - disc_x) - 0.5 * (0.5 - disc_x);
        assert!((s.integrate(f) - exact).abs() < 0.01 * exact);
    }

    #[test]
    fn refinement_reduces_quadrature_error() {
        let f = |p: [f64; 2]| (PI * p[0]).sin() * (PI * p[1] / 3.0).sin();
        let exact = (2.0 / PI) * (6.0 / PI);
        let coarse = (uniform_grid_2d(5, 15, 1.0).unwrap().integrate(f) - exact).abs();
        let fine = (uniform_grid_2d(10, 30, 1.0).unwrap().integrate(f) - exact).abs();
        assert!(coarse / fine >= 3.0, "{coarse} / {fine}");

        let g = |p: [f64; 2]| (PI * p[0]).sin();
        let coarse = (uniform_1d(10).unwrap().integrate(g) - 2.0 / PI).abs();
        let fine = (uniform_1d(20).unwrap().integrate(g) - 2.0 / PI).abs();
        assert!(coarse / fine >= 3.0);
    }

    #[test]
    fn csv_round_trip() {
        let s = plate_with_hole(0.1, 1.0, 12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nodes.csv");
        s.write_csv(&path).unwrap();
        let back = NodeSet::read_csv(&path, 2).unwrap();
        assert_eq!(back, s);
    }
}
