//! Concentrated, rotationally twisted triangulation of the annulus
//! `r_min <= |x| <= r_max`.
//!
//! Points are placed on `N_c` concentric circles with `N_p` points each.
//! Circle `j` is rotated by `-j π / N_p` so that each band between two
//! consecutive circles is tiled by isosceles triangles, alternately pointing
//! inward and outward. Radial spacing is a symmetric quadratic profile that is
//! finest around the middle of the ring.
//!
//! Triangle `K` of band `b`, angular slot `k` and type `l` (0: apex on the inner
//! circle, 1: apex on the outer circle) has index `(b * N_p + k) * 2 + l`.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Vec2};

/// Relative tolerance for geometric exactness checks.
pub const GEOMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    pub r_min: f64,
    pub r_max: f64,
    /// Target step size.
    pub h: f64,
    /// Explicit number of circles, overriding the value derived from `h`.
    pub n_circles: Option<usize>,
    /// Explicit number of points per circle, overriding the value derived from `h`.
    pub n_points: Option<usize>,
    /// Add one circle so that the triangle count is `2 * N_p * N_c`.
    pub match_paper_counts: bool,
}

impl MeshParams {
    pub fn new(r_min: f64, r_max: f64, h: f64) -> Self {
        MeshParams {
            r_min,
            r_max,
            h,
            n_circles: None,
            n_points: None,
            match_paper_counts: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_radii(self.r_min, self.r_max)?;
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::param("h", format!("must be positive, got {}", self.h)));
        }
        if let Some(nc) = self.n_circles {
            if nc < 2 {
                return Err(Error::param("n_circles", format!("must be >= 2, got {nc}")));
            }
        }
        if let Some(np) = self.n_points {
            if np < 3 {
                return Err(Error::param("n_points", format!("must be >= 3, got {np}")));
            }
        }
        Ok(())
    }

    /// Resolved `(circles, points per circle)` actually used to build the mesh.
    pub fn resolved_counts(&self) -> Result<(usize, usize)> {
        self.validate()?;
        let (nc, np) = derive_mesh_counts(self.h, self.r_min, self.r_max)?;
        let nc = self.n_circles.unwrap_or(nc);
        let np = self.n_points.unwrap_or(np);
        let circles = if self.match_paper_counts { nc + 1 } else { nc };
        Ok((circles, np))
    }
}

fn validate_radii(r_min: f64, r_max: f64) -> Result<()> {
    if !(r_min > 0.0) || !r_min.is_finite() {
        return Err(Error::param("r_min", format!("must be positive, got {r_min}")));
    }
    if !(r_max > r_min) || !r_max.is_finite() {
        return Err(Error::param(
            "r_max",
            format!("must exceed r_min = {r_min}, got {r_max}"),
        ));
    }
    Ok(())
}

/// Number of circles and points per circle guaranteeing acute triangles.
///
/// `N_c = ceil((r_max - r_min) / h)` clamped to at least 2 and
/// `N_p = ceil(2π√2 N_c / (1 - r_min / r_max))`.
pub fn derive_mesh_counts(h: f64, r_min: f64, r_max: f64) -> Result<(usize, usize)> {
    validate_radii(r_min, r_max)?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::param("h", format!("must be positive, got {h}")));
    }
    let nc = (((r_max - r_min) / h).ceil() as usize).max(2);
    let np = (2.0 * PI * SQRT_2 * nc as f64 / (1.0 - r_min / r_max)).ceil() as usize;
    Ok((nc, np.max(3)))
}

/// Quadratic concentration coefficient for `n_circles` circles.
pub fn concentration_alpha(n_circles: usize, r_min: f64, r_max: f64) -> f64 {
    let n = n_circles as f64;
    6.0 * n / (n * n + 2.0) * (r_max - r_min)
}

/// Circle radii, finest near the middle of the ring.
///
/// The `n_circles - 1` increments follow `f(k / N_c)` with
/// `f(x) = α (x - 1/2)^2 + (r_max - r_min) / (2 N_c)`, rescaled by one common
/// factor so that the first radius is `r_min` and the last is `r_max`.
pub fn compute_radii(n_circles: usize, r_min: f64, r_max: f64) -> Result<Vec<f64>> {
    validate_radii(r_min, r_max)?;
    if n_circles < 2 {
        return Err(Error::param(
            "n_circles",
            format!("must be >= 2, got {n_circles}"),
        ));
    }
    let n = n_circles as f64;
    let width = r_max - r_min;
    let alpha = concentration_alpha(n_circles, r_min, r_max);
    let increments: Vec<f64> = (1..n_circles)
        .map(|k| {
            let x = k as f64 / n - 0.5;
            alpha * x * x + width / (2.0 * n)
        })
        .collect();
    let scale = width / increments.iter().sum::<f64>();
    let mut radii = Vec::with_capacity(n_circles);
    let mut r = r_min;
    radii.push(r);
    for inc in &increments[..increments.len() - 1] {
        r += scale * inc;
        radii.push(r);
    }
    radii.push(r_max);
    Ok(radii)
}

/// One edge of the triangulation. Orientation data is relative to `inner`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub length: f64,
    /// Triangle `K` the normal points out of.
    pub inner: usize,
    /// Neighbor `L` across the edge, `None` on the boundary.
    pub outer: Option<usize>,
    /// `|x_K - x_L|` for interior edges, distance from `x_K` to the edge otherwise.
    pub distance: f64,
    /// Unit normal pointing out of `inner`.
    pub normal: Vec2,
    /// Unit tangent with `(normal, tangent)` positively oriented.
    pub tangent: Vec2,
    pub midpoint: Vec2,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.outer.is_none()
    }

    /// The triangle on the other side of the edge as seen from `k`.
    pub fn neighbor_of(&self, k: usize) -> Option<usize> {
        if k == self.inner {
            self.outer
        } else {
            Some(self.inner)
        }
    }

    /// +1 if `k` is the triangle the stored normal points out of, else -1.
    pub fn orientation(&self, k: usize) -> f64 {
        if k == self.inner {
            1.0
        } else {
            -1.0
        }
    }
}

/// Structured layout of a ring mesh, absent for hand-built meshes.
#[derive(Debug, Clone, PartialEq)]
pub struct RingLayout {
    pub n_points: usize,
    pub n_bands: usize,
    pub radii: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
}

/// A triangulation with the finite-volume geometry attached.
#[derive(Debug, Clone)]
pub struct RingMesh {
    pub vertices: Vec<Vec2>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub circumcenters: Vec<Vec2>,
    pub areas: Vec<f64>,
    pub edges: Vec<Edge>,
    /// Edge ids of each triangle.
    pub triangle_edges: Vec<[usize; 3]>,
    /// Triangles sharing an edge with each triangle.
    pub edge_neighbors: Vec<Vec<usize>>,
    /// Triangles sharing at least one vertex with each triangle.
    pub vertex_neighbors: Vec<Vec<usize>>,
    pub layout: Option<RingLayout>,
    id: u64,
}

impl RingMesh {
    /// Build the concentrated ring triangulation.
    pub fn build(params: &MeshParams) -> Result<RingMesh> {
        let (n_circles, n_points) = params.resolved_counts()?;
        let radii = compute_radii(n_circles, params.r_min, params.r_max)?;
        let np = n_points as f64;

        let mut vertices = Vec::with_capacity(n_circles * n_points);
        for (j, &r) in radii.iter().enumerate() {
            for k in 0..n_points {
                let theta = 2.0 * PI * k as f64 / np - PI * j as f64 / np;
                vertices.push(Vec2::from_polar(r, theta));
            }
        }
        let vid = |j: usize, k: usize| j * n_points + k % n_points;

        let n_bands = n_circles - 1;
        let mut triangles = Vec::with_capacity(2 * n_bands * n_points);
        for b in 0..n_bands {
            for k in 0..n_points {
                // apex on the inner circle
                triangles.push([vid(b, k), vid(b + 1, k), vid(b + 1, k + 1)]);
                // apex on the outer circle
                triangles.push([vid(b, k), vid(b + 1, k + 1), vid(b, k + 1)]);
            }
        }

        let layout = RingLayout {
            n_points,
            n_bands,
            radii,
            r_min: params.r_min,
            r_max: params.r_max,
        };
        let mesh = RingMesh::from_triangles(vertices, triangles, Some(layout))?;
        let report = verify_admissibility(&mesh);
        if !report.pass {
            return Err(Error::NotAdmissible(format!(
                "max angle {:.6} rad (limit π/2), orthogonality defect {:.3e}",
                report.max_angle, report.max_orthogonality_defect
            )));
        }
        Ok(mesh)
    }

    /// Assemble the geometry of an arbitrary triangulation. Triangles are
    /// reoriented counter-clockwise.
    pub fn from_triangles(
        vertices: Vec<Vec2>,
        mut triangles: Vec<[usize; 3]>,
        layout: Option<RingLayout>,
    ) -> Result<RingMesh> {
        let nv = vertices.len();
        for t in &mut triangles {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::param("triangles", "vertex index out of range"));
            }
            let area = geometry::signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if area == 0.0 || !area.is_finite() {
                return Err(Error::param("triangles", "degenerate triangle"));
            }
            if area < 0.0 {
                t.swap(1, 2);
            }
        }
        let circumcenters: Vec<Vec2> = triangles
            .iter()
            .map(|t| geometry::circumcenter(vertices[t[0]], vertices[t[1]], vertices[t[2]]))
            .collect();
        let areas: Vec<f64> = triangles
            .iter()
            .map(|t| geometry::signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]))
            .collect();

        // Collect edges in first-seen order so ids are deterministic.
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edge_owners: Vec<(usize, Option<usize>, [usize; 2], usize)> = Vec::new();
        let mut triangle_edges = vec![[0usize; 3]; triangles.len()];
        for (ti, t) in triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                let opposite = t[(e + 2) % 3];
                let key = (a.min(b), a.max(b));
                let id = match edge_index.get(&key) {
                    Some(&id) => {
                        let owner = &mut edge_owners[id];
                        if owner.1.is_some() {
                            return Err(Error::param("triangles", "edge shared by more than two triangles"));
                        }
                        owner.1 = Some(ti);
                        id
                    }
                    None => {
                        let id = edge_owners.len();
                        edge_index.insert(key, id);
                        edge_owners.push((ti, None, [a, b], opposite));
                        id
                    }
                };
                triangle_edges[ti][e] = id;
            }
        }

        let edges = edge_owners
            .into_iter()
            .map(|(inner, outer, [a, b], opposite)| {
                let (pa, pb) = (vertices[a], vertices[b]);
                let length = pa.distance(pb);
                let midpoint = (pa + pb) * 0.5;
                let mut normal = (pb - pa).perp().normalized();
                if normal.dot(midpoint - vertices[opposite]) < 0.0 {
                    normal = -normal;
                }
                let xk = circumcenters[inner];
                let distance = match outer {
                    Some(l) => xk.distance(circumcenters[l]),
                    None => (midpoint - xk).dot(normal),
                };
                Edge {
                    vertices: [a, b],
                    length,
                    inner,
                    outer,
                    distance,
                    normal,
                    tangent: normal.perp(),
                    midpoint,
                }
            })
            .collect::<Vec<_>>();

        let edge_neighbors = triangle_edges
            .iter()
            .enumerate()
            .map(|(ti, es)| es.iter().filter_map(|&e| edges[e].neighbor_of(ti)).collect())
            .collect();

        let mut vertex_triangles = vec![Vec::new(); nv];
        for (ti, t) in triangles.iter().enumerate() {
            for &v in t {
                vertex_triangles[v].push(ti);
            }
        }
        let vertex_neighbors = triangles
            .iter()
            .enumerate()
            .map(|(ti, t)| {
                let mut ns: Vec<usize> = t
                    .iter()
                    .flat_map(|&v| vertex_triangles[v].iter().copied())
                    .filter(|&o| o != ti)
                    .collect();
                ns.sort_unstable();
                ns.dedup();
                ns
            })
            .collect();

        let mut hasher = DefaultHasher::new();
        triangles.hash(&mut hasher);
        for v in &vertices {
            v.x.to_bits().hash(&mut hasher);
            v.y.to_bits().hash(&mut hasher);
        }
        let id = hasher.finish();

        Ok(RingMesh {
            vertices,
            triangles,
            circumcenters,
            areas,
            edges,
            triangle_edges,
            edge_neighbors,
            vertex_neighbors,
            layout,
            id,
        })
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Content fingerprint used to reject fields from another mesh.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Triangles touching the boundary through an edge.
    pub fn is_boundary_triangle(&self, k: usize) -> bool {
        self.triangle_edges[k].iter().any(|&e| self.edges[e].is_boundary())
    }

    pub fn circumcenter_radius(&self, k: usize) -> f64 {
        self.circumcenters[k].norm()
    }

    pub fn circumcenter_angle(&self, k: usize) -> f64 {
        self.circumcenters[k].angle()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(0.0, f64::max)
    }

    pub fn max_area(&self) -> f64 {
        self.areas.iter().copied().fold(0.0, f64::max)
    }

    /// Index permutation induced by rotating the mesh by `shift · 2π / N_p`:
    /// triangle `K` is mapped onto triangle `perm[K]`.
    pub fn rotation_permutation(&self, shift: usize) -> Option<Vec<usize>> {
        let layout = self.layout.as_ref()?;
        let np = layout.n_points;
        Some(
            (0..self.n_triangles())
                .map(|t| {
                    let (l, slot) = (t % 2, t / 2);
                    let (b, k) = (slot / np, slot % np);
                    (b * np + (k + shift) % np) * 2 + l
                })
                .collect(),
        )
    }

    /// Permutation sending each triangle to the triangle whose circumcenter is
    /// the image of its own circumcenter under `map`, if every image is found.
    pub fn point_permutation(&self, map: impl Fn(Vec2) -> Vec2) -> Option<Vec<usize>> {
        let layout = self.layout.as_ref()?;
        let np = layout.n_points;
        let step = 2.0 * PI / np as f64;
        let tol = GEOMETRY_TOL * 10.0 * layout.r_max;
        // (radius, angle of slot 0) for each (band, type) class
        let classes: Vec<(usize, f64, f64)> = (0..layout.n_bands)
            .flat_map(|b| (0..2).map(move |l| (b, l)))
            .map(|(b, l)| {
                let t = b * np * 2 + l;
                (t, self.circumcenter_radius(t), self.circumcenter_angle(t))
            })
            .collect();
        let mut perm = Vec::with_capacity(self.n_triangles());
        for &c in &self.circumcenters {
            let p = map(c);
            let r = p.norm();
            let found = classes.iter().find_map(|&(t0, rc, a0)| {
                if (r - rc).abs() > tol {
                    return None;
                }
                let k = ((p.angle() - a0) / step).round().rem_euclid(np as f64) as usize % np;
                let cand = t0 + 2 * k;
                (self.circumcenters[cand].distance(p) <= tol).then_some(cand)
            })?;
            perm.push(found);
        }
        Some(perm)
    }
}

/// Geometric quality report of a triangulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub max_angle: f64,
    /// Smallest barycentric coordinate of any circumcenter in its triangle;
    /// positive when every circumcenter is strictly inside.
    pub min_containment_margin: f64,
    /// Largest `|cos|` of the angle between `[x_K, x_L]` and the shared edge.
    pub max_orthogonality_defect: f64,
    /// Smallest `d_{K,L}` or `d_{K,σ}`.
    pub min_distance: f64,
    pub pass: bool,
}

pub fn verify_admissibility(mesh: &RingMesh) -> AdmissibilityReport {
    let mut max_angle: f64 = 0.0;
    let mut margin = f64::INFINITY;
    for (t, c) in mesh.triangles.iter().zip(&mesh.circumcenters) {
        let [a, b, d] = [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]];
        max_angle = geometry::triangle_angles(a, b, d).into_iter().fold(max_angle, f64::max);
        margin = geometry::barycentric(*c, a, b, d).into_iter().fold(margin, f64::min);
    }
    let mut defect: f64 = 0.0;
    let mut min_distance = f64::INFINITY;
    for e in &mesh.edges {
        min_distance = min_distance.min(e.distance);
        if let Some(l) = e.outer {
            let link = mesh.circumcenters[l] - mesh.circumcenters[e.inner];
            let dir = mesh.vertices[e.vertices[1]] - mesh.vertices[e.vertices[0]];
            let cos = link.dot(dir) / (link.norm() * dir.norm());
            if cos.is_finite() {
                defect = defect.max(cos.abs());
            }
        }
    }
    AdmissibilityReport {
        max_angle,
        min_containment_margin: margin,
        max_orthogonality_defect: defect,
        min_distance,
        pass: max_angle < FRAC_PI_2 && defect < GEOMETRY_TOL && min_distance > 0.0,
    }
}

/// Shells `S_0 = {K}, S_1, ..., S_{λ_max}` of triangles at graph distance
/// exactly `λ` from `K` in the vertex-sharing adjacency graph.
pub fn triangle_shells(mesh: &RingMesh, k: usize, lambda_max: usize) -> Vec<Vec<usize>> {
    let mut depth = HashMap::new();
    depth.insert(k, 0usize);
    let mut shells = vec![vec![k]];
    let mut queue = VecDeque::from([k]);
    while let Some(t) = queue.pop_front() {
        let d = depth[&t];
        if d == lambda_max {
            continue;
        }
        for &n in &mesh.vertex_neighbors[t] {
            if let std::collections::hash_map::Entry::Vacant(slot) = depth.entry(n) {
                slot.insert(d + 1);
                if shells.len() <= d + 1 {
                    shells.push(Vec::new());
                }
                shells[d + 1].push(n);
                queue.push_back(n);
            }
        }
    }
    shells.resize(lambda_max + 1, Vec::new());
    shells
}
