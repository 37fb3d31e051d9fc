//! Discrete differential operators on closed triangle meshes.
//!
//! Sign convention: normals are the *interior* unit normals, so a sphere of
//! radius `r` has mean curvature `+2/r` and positive enclosed volume under
//! `V = -(1/3) sum A_v (nu_v . x_v)`.

use thiserror::Error;

use crate::mesh::{TriMesh, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("face {face} is too close to degenerate for cotangent weights")]
    NearDegenerateTriangle { face: usize },
}

/// Per-vertex discrete geometry.
#[derive(Debug, Clone)]
pub struct VertexGeometry {
    /// Mixed Voronoi areas (barycentric thirds on obtuse triangles).
    pub area: Vec<f64>,
    /// Interior unit normals (angle-weighted face average, negated).
    pub inner_normal: Vec<Vec3>,
    /// Signed scalar mean curvature H = H_vec . nu.
    pub mean_curvature: Vec<f64>,
    /// Mean curvature vector H_vec = (cotangent Laplacian of position) / area.
    pub mean_curvature_vector: Vec<Vec3>,
    /// Angle defect divided by vertex area.
    pub gauss_curvature: Vec<f64>,
}

impl VertexGeometry {
    pub fn total_area(&self) -> f64 {
        self.area.iter().sum()
    }
}

/// Per-face quantities shared by the geometry and gradient assembly.
pub(crate) struct FaceCorners {
    pub cot: [f64; 3],
    pub angle: [f64; 3],
    pub area: f64,
    /// Outward unit face normal.
    pub unit_normal: Vec3,
    pub obtuse: bool,
    /// Mixed-area contribution per corner.
    pub mixed: [f64; 3],
}

pub(crate) fn face_corners(p: [Vec3; 3]) -> Option<FaceCorners> {
    let e = [p[2] - p[1], p[0] - p[2], p[1] - p[0]]; // edge opposite each corner
    let cross = e[2].cross(&(-e[1])); // (p1-p0) x (p2-p0)
    let cross_norm = cross.norm();
    if cross_norm <= 0.0 {
        return None;
    }
    let area = 0.5 * cross_norm;
    let unit_normal = cross / cross_norm;

    let mut cot = [0.0; 3];
    let mut angle = [0.0; 3];
    for c in 0..3 {
        let u = p[(c + 1) % 3] - p[c];
        let w = p[(c + 2) % 3] - p[c];
        let dot = u.dot(&w);
        cot[c] = dot / cross_norm;
        angle[c] = cross_norm.atan2(dot).max(0.0);
    }

    let obtuse = cot.iter().any(|&c| c < 0.0);
    let mut mixed = [0.0; 3];
    if obtuse {
        for m in &mut mixed {
            *m = area / 3.0;
        }
    } else {
        for c in 0..3 {
            let lj = e[(c + 1) % 3].norm_squared(); // edge (c, c+2)
            let lk = e[(c + 2) % 3].norm_squared(); // edge (c, c+1)
            mixed[c] = 0.125 * (lj * cot[(c + 1) % 3] + lk * cot[(c + 2) % 3]);
        }
    }
    Some(FaceCorners { cot, angle, area, unit_normal, obtuse, mixed })
}

const COT_LIMIT: f64 = 1e8;

pub fn compute_geometry(mesh: &TriMesh) -> Result<VertexGeometry, GeometryError> {
    let nv = mesh.vertex_count();
    let verts = mesh.vertices();
    let mut area = vec![0.0; nv];
    let mut laplace = vec![Vec3::zeros(); nv]; // integrated cotangent Laplacian
    let mut normal_acc = vec![Vec3::zeros(); nv];
    let mut angle_sum = vec![0.0; nv];

    for (fi, f) in mesh.faces().iter().enumerate() {
        let p = [verts[f[0]], verts[f[1]], verts[f[2]]];
        let fc = face_corners(p).ok_or(GeometryError::NearDegenerateTriangle { face: fi })?;
        if fc.cot.iter().any(|c| c.abs() > COT_LIMIT) {
            return Err(GeometryError::NearDegenerateTriangle { face: fi });
        }
        for c in 0..3 {
            let i = f[c];
            let j = f[(c + 1) % 3];
            let k = f[(c + 2) % 3];
            area[i] += fc.mixed[c];
            // edge (i,j) carries cot at k, edge (i,k) carries cot at j
            laplace[i] += 0.5
                * (fc.cot[(c + 2) % 3] * (verts[j] - verts[i])
                    + fc.cot[(c + 1) % 3] * (verts[k] - verts[i]));
            normal_acc[i] += fc.angle[c] * fc.unit_normal;
            angle_sum[i] += fc.angle[c];
        }
    }

    let mut inner_normal = vec![Vec3::zeros(); nv];
    let mut mean_curvature_vector = vec![Vec3::zeros(); nv];
    let mut mean_curvature = vec![0.0; nv];
    let mut gauss_curvature = vec![0.0; nv];
    for v in 0..nv {
        inner_normal[v] = -normal_acc[v].normalize();
        mean_curvature_vector[v] = laplace[v] / area[v];
        mean_curvature[v] = mean_curvature_vector[v].dot(&inner_normal[v]);
        gauss_curvature[v] = (2.0 * std::f64::consts::PI - angle_sum[v]) / area[v];
    }

    Ok(VertexGeometry { area, inner_normal, mean_curvature, mean_curvature_vector, gauss_curvature })
}

pub fn surface_area(mesh: &TriMesh) -> f64 {
    (0..mesh.face_count()).map(|f| mesh.face_area(f)).sum()
}

/// Algebraic enclosed volume, -(1/3) sum A_v (nu_v . x_v); positive for
/// consistently oriented closed surfaces.
pub fn enclosed_volume(mesh: &TriMesh) -> f64 {
    let geo = compute_geometry(mesh).expect("volume needs computable geometry");
    enclosed_volume_with(mesh, &geo)
}

pub fn enclosed_volume_with(mesh: &TriMesh, geo: &VertexGeometry) -> f64 {
    let verts = mesh.vertices();
    -(1.0 / 3.0)
        * (0..mesh.vertex_count())
            .map(|v| geo.area[v] * geo.inner_normal[v].dot(&verts[v]))
            .sum::<f64>()
}

/// Integral of the scalar mean curvature.
pub fn total_mean_curvature(mesh: &TriMesh) -> f64 {
    let geo = compute_geometry(mesh).expect("total mean curvature needs computable geometry");
    total_mean_curvature_with(&geo)
}

pub fn total_mean_curvature_with(geo: &VertexGeometry) -> f64 {
    (0..geo.area.len()).map(|v| geo.mean_curvature[v] * geo.area[v]).sum()
}

/// Maximal vertex-pair distance.
pub fn diameter(mesh: &TriMesh) -> f64 {
    let verts = mesh.vertices();
    let mut best = 0.0_f64;
    for i in 0..verts.len() {
        for j in (i + 1)..verts.len() {
            best = best.max((verts[i] - verts[j]).norm_squared());
        }
    }
    best.sqrt()
}
