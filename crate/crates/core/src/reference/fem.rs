//! Bilinear quadrilateral finite elements on a structured rectangle: steady
//! heat conduction and plane-stress thermo-elasticity, solved by a banded
//! Cholesky factorization. Properties are taken at element centroids.

use crate::error::{Error, Result};
use crate::physics::{Grading, MaterialModel, Voigt};

const XI: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const ETA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];
const GAUSS: f64 = 0.577_350_269_189_625_8;

/// `nx × ny` equal elements on `[0, width] × [0, height]`, nodes numbered
/// row by row from the bottom-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectMesh {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
}

impl RectMesh {
    pub fn new(nx: usize, ny: usize, width: f64, height: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || !(width > 0.0) || !(height > 0.0) {
            return Err(Error::Config(format!("bad mesh {nx} x {ny} on {width} x {height}")));
        }
        Ok(Self { nx, ny, width, height })
    }

    pub fn hx(&self) -> f64 {
        self.width / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.height / self.ny as f64
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn coord(&self, id: usize) -> [f64; 2] {
        let (i, j) = (id % (self.nx + 1), id / (self.nx + 1));
        [i as f64 * self.hx(), j as f64 * self.hy()]
    }

    /// Counter-clockwise from the lower-left node.
    pub fn element(&self, ex: usize, ey: usize) -> [usize; 4] {
        [
            self.node(ex, ey),
            self.node(ex + 1, ey),
            self.node(ex + 1, ey + 1),
            self.node(ex, ey + 1),
        ]
    }

    pub fn centroid(&self, ex: usize, ey: usize) -> [f64; 2] {
        [(ex as f64 + 0.5) * self.hx(), (ey as f64 + 0.5) * self.hy()]
    }

    fn elements(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.ny).flat_map(move |ey| (0..self.nx).map(move |ex| (ex, ey)))
    }

    /// Element containing `x` and the local coordinates of `x` in it.
    fn locate(&self, x: [f64; 2]) -> (usize, usize, f64, f64) {
        let fx = (x[0] / self.hx()).clamp(0.0, self.nx as f64);
        let fy = (x[1] / self.hy()).clamp(0.0, self.ny as f64);
        let ex = (fx.floor() as usize).min(self.nx - 1);
        let ey = (fy.floor() as usize).min(self.ny - 1);
        (ex, ey, 2.0 * (fx - ex as f64) - 1.0, 2.0 * (fy - ey as f64) - 1.0)
    }
}

fn shape(xi: f64, eta: f64) -> [f64; 4] {
    std::array::from_fn(|a| 0.25 * (1.0 + XI[a] * xi) * (1.0 + ETA[a] * eta))
}

/// Physical shape-function gradients `[∂N/∂x, ∂N/∂y]` on an `hx × hy` cell.
fn shape_grad(xi: f64, eta: f64, hx: f64, hy: f64) -> [[f64; 2]; 4] {
    std::array::from_fn(|a| {
        [
            0.25 * XI[a] * (1.0 + ETA[a] * eta) * 2.0 / hx,
            0.25 * ETA[a] * (1.0 + XI[a] * xi) * 2.0 / hy,
        ]
    })
}

fn gauss_points() -> [(f64, f64); 4] {
    [(-GAUSS, -GAUSS), (GAUSS, -GAUSS), (GAUSS, GAUSS), (-GAUSS, GAUSS)]
}

/// Engineering-shear strain-displacement matrix, 3 × 8.
fn b_matrix(g: &[[f64; 2]; 4]) -> [[f64; 8]; 3] {
    let mut b = [[0.0; 8]; 3];
    for a in 0..4 {
        b[0][2 * a] = g[a][0];
        b[1][2 * a + 1] = g[a][1];
        b[2][2 * a] = g[a][1];
        b[2][2 * a + 1] = g[a][0];
    }
    b
}

/// Plane-stress matrix for unit modulus in engineering shear.
fn unit_d(nu: f64) -> [[f64; 3]; 3] {
    let c = 1.0 / (1.0 - nu * nu);
    [[c, nu * c, 0.0], [nu * c, c, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu) * c]]
}

/// Symmetric positive definite band matrix, lower half stored row-wise.
#[derive(Debug, Clone)]
struct Band {
    n: usize,
    bw: usize,
    a: Vec<f64>,
}

impl Band {
    fn new(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            a: vec![0.0; n * (bw + 1)],
        }
    }

    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        (i - j <= self.bw).then(|| i * (self.bw + 1) + (i - j))
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |k| self.a[k])
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        if i >= j {
            let k = self.idx(i, j).expect("entry outside band");
            self.a[k] += v;
        }
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        if let Some(k) = self.idx(i, j) {
            self.a[k] = v;
        }
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=i {
                let v = self.a[i * (self.bw + 1) + (i - j)];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    /// In-place Cholesky `A = L Lᵀ`.
    fn factor(mut self) -> Result<Self> {
        let w = self.bw + 1;
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=i {
                let lo = i.saturating_sub(self.bw).max(j.saturating_sub(self.bw));
                let orig = self.a[i * w + (i - j)];
                let mut s = orig;
                for k in lo..j {
                    s -= self.a[i * w + (i - k)] * self.a[j * w + (j - k)];
                }
                if i == j {
                    // rigid modes show up as pivots cancelled down to rounding level
                    if !(s > 1e-10 * orig.abs()) {
                        return Err(Error::Singular(format!(
                            "stiffness is not positive definite at dof {i}; add constraints"
                        )));
                    }
                    self.a[i * w] = s.sqrt();
                } else {
                    self.a[i * w + (i - j)] = s / self.a[j * w];
                }
            }
        }
        Ok(self)
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let w = self.bw + 1;
        let mut y = b.to_vec();
        for i in 0..self.n {
            let mut s = y[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.a[i * w + (i - k)] * y[k];
            }
            y[i] = s / self.a[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + self.bw + 1).min(self.n) {
                s -= self.a[k * w + (k - i)] * y[k];
            }
            y[i] = s / self.a[i * w];
        }
        y
    }
}

/// Applies `u[d] = g` by elimination, keeping the system symmetric.
fn constrain(k: &mut Band, f: &mut [f64], fixed: &[(usize, f64)]) {
    for &(d, g) in fixed {
        for r in d.saturating_sub(k.bw)..(d + k.bw + 1).min(k.n) {
            if r != d {
                f[r] -= k.get(r, d) * g;
                k.set(r, d, 0.0);
            }
        }
        k.set(d, d, 1.0);
        f[d] = g;
    }
}

fn solve_system(k: Band, mut f: Vec<f64>, fixed: &[(usize, f64)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let original = k.clone();
    let f0 = f.clone();
    let mut k = k;
    constrain(&mut k, &mut f, fixed);
    let u = k.factor()?.solve(&f);
    let ku = original.mul(&u);
    let reactions = ku.iter().zip(&f0).map(|(a, b)| a - b).collect();
    Ok((u, reactions))
}

/// Nodal temperatures for `∇·(k∇T) = 0` with the given nodal Dirichlet data
/// and insulated elsewhere.
pub fn solve_thermal(
    mesh: &RectMesh,
    conductivity: &Grading,
    fixed: &dyn Fn([f64; 2]) -> Option<f64>,
) -> Result<Vec<f64>> {
    let (hx, hy) = (mesh.hx(), mesh.hy());
    let det = 0.25 * hx * hy;
    let mut k0 = [[0.0; 4]; 4];
    for (xi, eta) in gauss_points() {
        let g = shape_grad(xi, eta, hx, hy);
        for a in 0..4 {
            for b in 0..4 {
                k0[a][b] += (g[a][0] * g[b][0] + g[a][1] * g[b][1]) * det;
            }
        }
    }
    let n = mesh.node_count();
    let mut k = Band::new(n, mesh.nx + 2);
    for (ex, ey) in mesh.elements() {
        let c = conductivity.at(mesh.centroid(ex, ey));
        let ids = mesh.element(ex, ey);
        for a in 0..4 {
            for b in 0..4 {
                k.add(ids[a], ids[b], c * k0[a][b]);
            }
        }
    }
    let bc: Vec<(usize, f64)> = (0..n).filter_map(|id| fixed(mesh.coord(id)).map(|v| (id, v))).collect();
    if bc.is_empty() {
        return Err(Error::Singular("thermal problem has no prescribed temperature".into()));
    }
    Ok(solve_system(k, vec![0.0; n], &bc)?.0)
}

/// Loads for [`solve_elastic`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeTractions {
    pub bottom: Option<[f64; 2]>,
    pub top: Option<[f64; 2]>,
    pub left: Option<[f64; 2]>,
    pub right: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticSolution {
    pub displacement: Vec<[f64; 2]>,
    /// Nodal reaction forces; zero away from constrained dofs.
    pub reactions: Vec<[f64; 2]>,
    /// Largest out-of-balance force `|K u − f|` over unconstrained dofs.
    pub residual: f64,
    /// Elastic strain (tensor shear) at element centroids, row by row.
    pub element_strain: Vec<Voigt>,
    pub element_stress: Vec<Voigt>,
}

/// Plane-stress displacement for the prescribed components returned by
/// `fixed`, constant edge tractions, a constant body force and an optional
/// nodal temperature field.
pub fn solve_elastic(
    mesh: &RectMesh,
    material: &MaterialModel,
    fixed: &dyn Fn([f64; 2]) -> [Option<f64>; 2],
    tractions: EdgeTractions,
    body_force: Option<[f64; 2]>,
    temperature: Option<&[f64]>,
) -> Result<ElasticSolution> {
    let nu = material.poisson;
    if !(nu > -1.0 && nu < 0.5) {
        return Err(Error::Config(format!("Poisson ratio {nu} outside (-1, 0.5)")));
    }
    let n = mesh.node_count();
    if let Some(t) = temperature {
        if t.len() != n {
            return Err(Error::Shape(format!("{} temperatures for {n} nodes", t.len())));
        }
    }
    let (hx, hy) = (mesh.hx(), mesh.hy());
    let det = 0.25 * hx * hy;
    let d = unit_d(nu);

    // unit-modulus stiffness and per-gauss-point B, shared by all elements
    let mut k0 = [[0.0; 8]; 8];
    let mut bs = Vec::with_capacity(4);
    for (xi, eta) in gauss_points() {
        let b = b_matrix(&shape_grad(xi, eta, hx, hy));
        for p in 0..8 {
            for q in 0..8 {
                let mut s = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        s += b[i][p] * d[i][j] * b[j][q];
                    }
                }
                k0[p][q] += s * det;
            }
        }
        bs.push((shape(xi, eta), b));
    }

    let mut k = Band::new(2 * n, 2 * (mesh.nx + 2) + 1);
    let mut f = vec![0.0; 2 * n];
    for (ex, ey) in mesh.elements() {
        let e = material.e(mesh.centroid(ex, ey));
        let ids = mesh.element(ex, ey);
        let dof = |p: usize| 2 * ids[p / 2] + p % 2;
        for p in 0..8 {
            for q in 0..8 {
                k.add(dof(p), dof(q), e * k0[p][q]);
            }
        }
        if let Some(t) = temperature {
            for (nsh, b) in &bs {
                let tg: f64 = (0..4).map(|a| nsh[a] * t[ids[a]]).sum();
                let th = material.thermal_strain(tg);
                // D ε_th with ε_th = th (1, 1, 0)
                let s = [e * th * (d[0][0] + d[0][1]), e * th * (d[1][0] + d[1][1]), 0.0];
                for p in 0..8 {
                    f[dof(p)] += (b[0][p] * s[0] + b[1][p] * s[1] + b[2][p] * s[2]) * det;
                }
            }
        }
        if let Some(bf) = body_force {
            for p in 0..8 {
                f[dof(p)] += 0.25 * hx * hy * bf[p % 2];
            }
        }
    }

    let mut edge = |t: Option<[f64; 2]>, nodes: Vec<usize>, h: f64| {
        if let Some(t) = t {
            for w in nodes.windows(2) {
                for &id in w {
                    f[2 * id] += 0.5 * h * t[0];
                    f[2 * id + 1] += 0.5 * h * t[1];
                }
            }
        }
    };
    edge(tractions.bottom, (0..=mesh.nx).map(|i| mesh.node(i, 0)).collect(), hx);
    edge(tractions.top, (0..=mesh.nx).map(|i| mesh.node(i, mesh.ny)).collect(), hx);
    edge(tractions.left, (0..=mesh.ny).map(|j| mesh.node(0, j)).collect(), hy);
    edge(tractions.right, (0..=mesh.ny).map(|j| mesh.node(mesh.nx, j)).collect(), hy);

    let mut bc = Vec::new();
    for id in 0..n {
        for (c, v) in fixed(mesh.coord(id)).into_iter().enumerate() {
            if let Some(v) = v {
                bc.push((2 * id + c, v));
            }
        }
    }
    let (u, r) = solve_system(k, f, &bc)?;
    let constrained: std::collections::HashSet<usize> = bc.iter().map(|b| b.0).collect();
    let displacement = (0..n).map(|i| [u[2 * i], u[2 * i + 1]]).collect();
    let reactions = (0..n)
        .map(|i| std::array::from_fn(|c| if constrained.contains(&(2 * i + c)) { r[2 * i + c] } else { 0.0 }))
        .collect();
    let residual = (0..2 * n)
        .filter(|d| !constrained.contains(d))
        .map(|d| r[d].abs())
        .fold(0.0, f64::max);

    let b0 = b_matrix(&shape_grad(0.0, 0.0, hx, hy));
    let mut element_strain = Vec::with_capacity(mesh.nx * mesh.ny);
    let mut element_stress = Vec::with_capacity(mesh.nx * mesh.ny);
    for (ex, ey) in mesh.elements() {
        let ids = mesh.element(ex, ey);
        let ue: Vec<f64> = ids.iter().flat_map(|&i| [u[2 * i], u[2 * i + 1]]).collect();
        let eng: [f64; 3] = std::array::from_fn(|r| (0..8).map(|p| b0[r][p] * ue[p]).sum());
        let th = temperature.map_or(0.0, |t| material.thermal_strain(ids.iter().map(|&i| t[i]).sum::<f64>() / 4.0));
        let el = [eng[0] - th, eng[1] - th, eng[2]];
        let e = material.e(mesh.centroid(ex, ey));
        let s: [f64; 3] = std::array::from_fn(|r| e * (0..3).map(|c| d[r][c] * el[c]).sum::<f64>());
        element_strain.push(Voigt([el[0], el[1], 0.5 * el[2]]));
        element_stress.push(Voigt(s));
    }
    Ok(ElasticSolution {
        displacement,
        reactions,
        residual,
        element_strain,
        element_stress,
    })
}

/// Interpolable nodal fields on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FemSolution {
    pub mesh: RectMesh,
    pub elastic: ElasticSolution,
    pub temperature: Option<Vec<f64>>,
    pub nodal_strain: Vec<Voigt>,
    pub nodal_stress: Vec<Voigt>,
}

/// Fields at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FemSample {
    pub displacement: [f64; 2],
    pub temperature: Option<f64>,
    pub elastic_strain: Voigt,
    pub stress: Voigt,
}

impl FemSolution {
    pub fn new(mesh: RectMesh, elastic: ElasticSolution, temperature: Option<Vec<f64>>) -> Self {
        let average = |values: &[Voigt]| {
            let mut sum = vec![[0.0; 3]; mesh.node_count()];
            let mut count = vec![0usize; mesh.node_count()];
            for (k, (ex, ey)) in mesh.elements().enumerate() {
                for id in mesh.element(ex, ey) {
                    for c in 0..3 {
                        sum[id][c] += values[k].0[c];
                    }
                    count[id] += 1;
                }
            }
            sum.into_iter()
                .zip(count)
                .map(|(s, c)| Voigt(s.map(|v| v / c as f64)))
                .collect::<Vec<_>>()
        };
        let nodal_strain = average(&elastic.element_strain);
        let nodal_stress = average(&elastic.element_stress);
        Self {
            mesh,
            elastic,
            temperature,
            nodal_strain,
            nodal_stress,
        }
    }

    /// Bilinear interpolation of the nodal fields.
    pub fn sample(&self, x: [f64; 2]) -> FemSample {
        let (ex, ey, xi, eta) = self.mesh.locate(x);
        let ids = self.mesh.element(ex, ey);
        let n = shape(xi, eta);
        let mix = |f: &dyn Fn(usize) -> f64| (0..4).map(|a| n[a] * f(ids[a])).sum::<f64>();
        let u = &self.elastic.displacement;
        FemSample {
            displacement: [mix(&|i| u[i][0]), mix(&|i| u[i][1])],
            temperature: self.temperature.as_ref().map(|t| mix(&|i| t[i])),
            elastic_strain: Voigt(std::array::from_fn(|c| mix(&|i| self.nodal_strain[i].0[c]))),
            stress: Voigt(std::array::from_fn(|c| mix(&|i| self.nodal_stress[i].0[c]))),
        }
    }

    /// Sum of the reaction forces over all constrained nodes.
    pub fn total_reaction(&self) -> [f64; 2] {
        self.elastic
            .reactions
            .iter()
            .fold([0.0; 2], |acc, r| [acc[0] + r[0], acc[1] + r[1]])
    }
}
