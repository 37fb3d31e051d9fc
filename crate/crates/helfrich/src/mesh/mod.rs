//! Closed oriented triangle meshes: construction, canonical shapes, and
//! structural validation.
//!
//! Faces are wound counter-clockwise as seen from outside, so the geometric
//! face normals point outward; the analysis convention (interior normals)
//! is applied in [`crate::geometry`].

mod lattice;

pub use lattice::sphere_lattice_with_necks;

use std::collections::HashMap;

use nalgebra::Vector3;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Faces with area below this are rejected as degenerate (container scale
/// is the unit of length, so this is absolute).
pub const DEGENERATE_FACE_AREA: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("face {face} references vertex {vertex} out of range ({len} vertices)")]
    IndexOutOfRange { face: usize, vertex: usize, len: usize },
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFiniteVertex { vertex: usize },
    #[error("edge ({a},{b}) is shared by {count} faces, expected 2")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("edge ({a},{b}) is traversed twice in the same direction")]
    InconsistentOrientation { a: usize, b: usize },
    #[error("face {face} is degenerate (area {area:.3e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error("neck size {neck_size} too large for lattice (must be < {limit})")]
    NeckTooLarge { neck_size: f64, limit: f64 },
}

/// Closed oriented triangulated surface.
///
/// Immutable after construction; every constructor goes through the same
/// manifold/orientation/degeneracy validation.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    /// Undirected edge (min,max) -> the two incident faces.
    edge_faces: HashMap<(usize, usize), [usize; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshQualityReport {
    pub min_face_area: f64,
    pub max_face_area: f64,
    pub min_angle: f64,
    pub max_valence: usize,
    pub euler_characteristic: i64,
    pub genus: i64,
    pub self_intersecting: bool,
}

impl TriMesh {
    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_faces.len()
    }

    pub fn edge_faces(&self) -> &HashMap<(usize, usize), [usize; 2]> {
        &self.edge_faces
    }

    /// Rebuild with new vertex positions on the same connectivity.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<TriMesh, MeshError> {
        assert_eq!(vertices.len(), self.vertices.len());
        build_mesh(vertices, self.faces.clone())
    }

    /// Positions moved without re-validation; used by optimizer inner loops
    /// where trial steps may transiently degrade quality.
    pub(crate) fn with_vertices_unchecked(&self, vertices: Vec<Vec3>) -> TriMesh {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        TriMesh {
            vertices,
            faces: self.faces.clone(),
            edge_faces: self.edge_faces.clone(),
        }
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [i, j, k] = self.faces[f];
        let e1 = self.vertices[j] - self.vertices[i];
        let e2 = self.vertices[k] - self.vertices[i];
        0.5 * e1.cross(&e2).norm()
    }

    /// Outward face normal (unnormalized, length = 2 * area).
    pub fn face_normal_raw(&self, f: usize) -> Vec3 {
        let [i, j, k] = self.faces[f];
        let e1 = self.vertices[j] - self.vertices[i];
        let e2 = self.vertices[k] - self.vertices[i];
        e1.cross(&e2)
    }

    pub fn scaled(&self, t: f64) -> TriMesh {
        self.with_vertices_unchecked(self.vertices.iter().map(|v| v * t).collect())
    }

    pub fn translated(&self, d: Vec3) -> TriMesh {
        self.with_vertices_unchecked(self.vertices.iter().map(|v| v + d).collect())
    }
}

/// Validate and assemble a closed oriented mesh.
pub fn build_mesh(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<TriMesh, MeshError> {
    for (vi, v) in vertices.iter().enumerate() {
        if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
            return Err(MeshError::NonFiniteVertex { vertex: vi });
        }
    }
    for (fi, f) in faces.iter().enumerate() {
        for &v in f {
            if v >= vertices.len() {
                return Err(MeshError::IndexOutOfRange { face: fi, vertex: v, len: vertices.len() });
            }
        }
    }
    for (fi, f) in faces.iter().enumerate() {
        let e1 = vertices[f[1]] - vertices[f[0]];
        let e2 = vertices[f[2]] - vertices[f[0]];
        let area = 0.5 * e1.cross(&e2).norm();
        if !(area > DEGENERATE_FACE_AREA) {
            return Err(MeshError::DegenerateFace { face: fi, area });
        }
    }

    // Directed edges: each must occur exactly once and its reverse exactly
    // once; that is simultaneously the two-faces-per-edge and the
    // consistent-orientation condition.
    let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * faces.len());
    for (fi, f) in faces.iter().enumerate() {
        for e in 0..3 {
            let a = f[e];
            let b = f[(e + 1) % 3];
            if directed.insert((a, b), fi).is_some() {
                // The same directed edge twice means two faces traverse it
                // in the same direction.
                let undirected_count = faces
                    .iter()
                    .flat_map(|g| (0..3).map(move |e| (g[e], g[(e + 1) % 3])))
                    .filter(|&(x, y)| (x.min(y), x.max(y)) == (a.min(b), a.max(b)))
                    .count();
                if undirected_count != 2 {
                    return Err(MeshError::NonManifoldEdge { a, b, count: undirected_count });
                }
                return Err(MeshError::InconsistentOrientation { a, b });
            }
        }
    }
    let mut edge_faces: HashMap<(usize, usize), [usize; 2]> =
        HashMap::with_capacity(directed.len() / 2);
    for (&(a, b), &fi) in &directed {
        if a < b {
            match directed.get(&(b, a)) {
                Some(&fj) => {
                    edge_faces.insert((a, b), [fi, fj]);
                }
                None => return Err(MeshError::NonManifoldEdge { a, b, count: 1 }),
            }
        }
    }

    Ok(TriMesh { vertices, faces, edge_faces })
}

/// Geodesic icosphere: subdivided icosahedron projected to the sphere.
///
/// `faces = 20 * 4^subdivisions`; antipodal vertex pairs are preserved by
/// the central symmetry of the icosahedron, so the mesh diameter is exactly
/// `2 * radius`.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
    assert!(radius > 0.0, "icosphere radius must be positive");
    assert!(subdivisions <= 8, "icosphere subdivisions capped at 8");

    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = vec![
        Vec3::new(-1.0, phi, 0.0),
        Vec3::new(1.0, phi, 0.0),
        Vec3::new(-1.0, -phi, 0.0),
        Vec3::new(1.0, -phi, 0.0),
        Vec3::new(0.0, -1.0, phi),
        Vec3::new(0.0, 1.0, phi),
        Vec3::new(0.0, -1.0, -phi),
        Vec3::new(0.0, 1.0, -phi),
        Vec3::new(phi, 0.0, -1.0),
        Vec3::new(phi, 0.0, 1.0),
        Vec3::new(-phi, 0.0, -1.0),
        Vec3::new(-phi, 0.0, 1.0),
    ];
    for v in &mut vertices {
        v.normalize_mut();
    }
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut new_faces = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0usize; 3];
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[e] = *midpoint.entry(key).or_insert_with(|| {
                    let m = (vertices[a] + vertices[b]).normalize();
                    vertices.push(m);
                    vertices.len() - 1
                });
            }
            new_faces.push([f[0], mid[0], mid[2]]);
            new_faces.push([f[1], mid[1], mid[0]]);
            new_faces.push([f[2], mid[2], mid[1]]);
            new_faces.push([mid[0], mid[1], mid[2]]);
        }
        faces = new_faces;
    }

    for v in &mut vertices {
        *v *= radius;
    }
    build_mesh(vertices, faces).expect("icosphere construction is always valid")
}

/// Icosphere scaled anisotropically to the given semi-axes.
pub fn ellipsoid(semi_axes: Vec3, subdivisions: u32) -> TriMesh {
    assert!(
        semi_axes.x > 0.0 && semi_axes.y > 0.0 && semi_axes.z > 0.0,
        "ellipsoid semi-axes must be positive"
    );
    let unit = icosphere(1.0, subdivisions);
    let vertices = unit
        .vertices()
        .iter()
        .map(|v| Vec3::new(v.x * semi_axes.x, v.y * semi_axes.y, v.z * semi_axes.z))
        .collect();
    unit.with_vertices(vertices).expect("anisotropic scaling preserves validity")
}

/// Structural quality report; `validate` never fails, it measures.
pub fn validate(mesh: &TriMesh) -> MeshQualityReport {
    let mut min_face_area = f64::INFINITY;
    let mut max_face_area = 0.0_f64;
    let mut min_angle = f64::INFINITY;
    for f in 0..mesh.face_count() {
        let area = mesh.face_area(f);
        min_face_area = min_face_area.min(area);
        max_face_area = max_face_area.max(area);
        let [i, j, k] = mesh.faces()[f];
        let (a, b, c) = (mesh.vertices()[i], mesh.vertices()[j], mesh.vertices()[k]);
        for (p, q, r) in [(a, b, c), (b, c, a), (c, a, b)] {
            let u = q - p;
            let w = r - p;
            let cos = (u.dot(&w) / (u.norm() * w.norm())).clamp(-1.0, 1.0);
            min_angle = min_angle.min(cos.acos());
        }
    }
    let mut valence = vec![0usize; mesh.vertex_count()];
    for f in mesh.faces() {
        for &v in f {
            valence[v] += 1;
        }
    }
    let max_valence = valence.iter().copied().max().unwrap_or(0);

    let v = mesh.vertex_count() as i64;
    let e = mesh.edge_count() as i64;
    let f = mesh.face_count() as i64;
    let chi = v - e + f;
    let genus = (2 - chi) / 2;

    MeshQualityReport {
        min_face_area,
        max_face_area,
        min_angle,
        max_valence,
        euler_characteristic: chi,
        genus,
        self_intersecting: has_self_intersection(mesh),
    }
}

/// Broad-phase spatial hash + edge-against-triangle narrow phase.
///
/// A transversal intersection of two triangles implies an edge of one
/// piercing the interior of the other; coplanar overlaps are not detected.
fn has_self_intersection(mesh: &TriMesh) -> bool {
    let verts = mesh.vertices();
    let faces = mesh.faces();
    if faces.is_empty() {
        return false;
    }

    let mut lo = verts[0];
    let mut hi = verts[0];
    for v in verts {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let mut mean_edge = 0.0;
    for (&(a, b), _) in mesh.edge_faces() {
        mean_edge += (verts[a] - verts[b]).norm();
    }
    mean_edge /= mesh.edge_count() as f64;
    let cell = (mean_edge * 2.0).max(1e-12);

    let key = |p: &Vec3| -> (i64, i64, i64) {
        (
            ((p.x - lo.x) / cell).floor() as i64,
            ((p.y - lo.y) / cell).floor() as i64,
            ((p.z - lo.z) / cell).floor() as i64,
        )
    };
    let _ = hi;

    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        let (mut flo, mut fhi) = (verts[f[0]], verts[f[0]]);
        for &v in &f[1..] {
            flo = flo.inf(&verts[v]);
            fhi = fhi.sup(&verts[v]);
        }
        let (k0, k1) = (key(&flo), key(&fhi));
        for x in k0.0..=k1.0 {
            for y in k0.1..=k1.1 {
                for z in k0.2..=k1.2 {
                    grid.entry((x, y, z)).or_default().push(fi);
                }
            }
        }
    }

    let mut seen: Vec<usize> = vec![usize::MAX; faces.len()];
    for (&(a, b), _) in mesh.edge_faces() {
        let (p0, p1) = (verts[a], verts[b]);
        let (mut elo, mut ehi) = (p0.inf(&p1), p0.sup(&p1));
        elo.apply(|x| *x -= 1e-12);
        ehi.apply(|x| *x += 1e-12);
        let (k0, k1) = (key(&elo), key(&ehi));
        let marker = a * mesh.vertex_count() + b;
        for x in k0.0..=k1.0 {
            for y in k0.1..=k1.1 {
                for z in k0.2..=k1.2 {
                    let Some(cands) = grid.get(&(x, y, z)) else { continue };
                    for &fi in cands {
                        if seen[fi] == marker {
                            continue;
                        }
                        seen[fi] = marker;
                        let f = faces[fi];
                        if f.contains(&a) || f.contains(&b) {
                            continue;
                        }
                        if segment_hits_triangle(p0, p1, verts[f[0]], verts[f[1]], verts[f[2]]) {
                            return true;
                        }
                    }
                }
            }
        }
    }
    false
}

fn segment_hits_triangle(p0: Vec3, p1: Vec3, v0: Vec3, v1: Vec3, v2: Vec3) -> bool {
    // Moller-Trumbore with the ray clamped to the segment.
    let dir = p1 - p0;
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-16 {
        return false;
    }
    let inv = 1.0 / det;
    let s = p0 - v0;
    let u = inv * s.dot(&h);
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let v = inv * dir.dot(&q);
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    let t = inv * e2.dot(&q);
    let eps = 1e-10;
    t > eps && t < 1.0 - eps && u > eps && v > eps && u + v < 1.0 - eps
}
