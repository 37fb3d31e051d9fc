//! Bending, area, volume, and total-mean-curvature functionals with exact
//! gradients of the discrete quantities.
//!
//! The gradients differentiate the discrete energies themselves (including
//! the obtuse-triangle branch of the mixed areas, each branch taken as
//! evaluated), so line searches see a consistent objective/derivative pair.

use crate::geometry::{compute_geometry, face_corners, GeometryError};
use crate::mesh::{TriMesh, Vec3};

/// Spontaneous curvature and constraint multipliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// Spontaneous curvature H0 (1/length).
    pub h0: f64,
    /// Area multiplier.
    pub lambda: f64,
    /// Volume multiplier.
    pub rho: f64,
    /// Total-mean-curvature multiplier.
    pub theta: f64,
    /// Prescribed area, when the area constraint is active.
    pub target_area: Option<f64>,
}

impl EnergyParams {
    pub fn bending(h0: f64) -> EnergyParams {
        EnergyParams { h0, lambda: 0.0, rho: 0.0, theta: 0.0, target_area: None }
    }

    pub fn with_target_area(mut self, a: f64) -> EnergyParams {
        assert!(a > 0.0, "prescribed area must be positive");
        self.target_area = Some(a);
        self
    }
}

/// Per-vertex variation of a functional with respect to vertex positions.
#[derive(Debug, Clone)]
pub struct GradientField(pub Vec<Vec3>);

impl GradientField {
    pub fn dot(&self, dir: &[Vec3]) -> f64 {
        self.0.iter().zip(dir).map(|(g, d)| g.dot(d)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    Helfrich { h0: f64 },
    Area,
    Volume,
    TotalMeanCurvature,
}

/// Quarter integral of (H - H0)^2 over the mesh.
pub fn helfrich_energy(mesh: &TriMesh, h0: f64) -> f64 {
    let geo = compute_geometry(mesh).expect("helfrich energy needs computable geometry");
    (0..mesh.vertex_count())
        .map(|v| 0.25 * (geo.mean_curvature[v] - h0).powi(2) * geo.area[v])
        .sum()
}

pub fn willmore_energy(mesh: &TriMesh) -> f64 {
    helfrich_energy(mesh, 0.0)
}

pub fn evaluate(mesh: &TriMesh, functional: Functional) -> f64 {
    match functional {
        Functional::Helfrich { h0 } => helfrich_energy(mesh, h0),
        Functional::Area => crate::geometry::surface_area(mesh),
        Functional::Volume => crate::geometry::enclosed_volume(mesh),
        Functional::TotalMeanCurvature => crate::geometry::total_mean_curvature(mesh),
    }
}

/// Derivative of t -> E_H0(t * mesh) at t = 1, from the scaling identity
/// of the bending energy: -(H0/2) * integral of (H - H0).
pub fn scaling_derivative(mesh: &TriMesh, h0: f64) -> f64 {
    let geo = compute_geometry(mesh).expect("scaling derivative needs computable geometry");
    let total_h = crate::geometry::total_mean_curvature_with(&geo);
    let area = geo.total_area();
    -(h0 / 2.0) * (total_h - h0 * area)
}

/// Exact gradient of the discrete functional with respect to vertex
/// positions.
pub fn gradient(mesh: &TriMesh, functional: Functional) -> Result<GradientField, GeometryError> {
    match functional {
        Functional::Area => area_gradient(mesh),
        _ => curvature_gradient(mesh, functional),
    }
}

fn area_gradient(mesh: &TriMesh) -> Result<GradientField, GeometryError> {
    let verts = mesh.vertices();
    let mut grad = vec![Vec3::zeros(); mesh.vertex_count()];
    for f in mesh.faces() {
        let p = [verts[f[0]], verts[f[1]], verts[f[2]]];
        let cross = (p[1] - p[0]).cross(&(p[2] - p[0]));
        let n = cross.norm();
        if n <= 0.0 {
            return Err(GeometryError::NearDegenerateTriangle { face: 0 });
        }
        let nh = cross / n;
        // d area / d p_m = 0.5 * nh x e_m with e_m the opposite edge
        let e = [p[2] - p[1], p[0] - p[2], p[1] - p[0]];
        for c in 0..3 {
            grad[f[c]] += 0.5 * nh.cross(&e[c]);
        }
    }
    Ok(GradientField(grad))
}

/// Shared reverse pass for the functionals that run through vertex areas,
/// cotangent Laplacians, and angle-weighted normals.
fn curvature_gradient(
    mesh: &TriMesh,
    functional: Functional,
) -> Result<GradientField, GeometryError> {
    let nv = mesh.vertex_count();
    let verts = mesh.vertices();

    // Forward pass: per-vertex accumulators.
    let mut area = vec![0.0; nv];
    let mut lap = vec![Vec3::zeros(); nv]; // integrated Laplacian M_v
    let mut nacc = vec![Vec3::zeros(); nv]; // angle-weighted outward normals U_v
    for (fi, f) in mesh.faces().iter().enumerate() {
        let p = [verts[f[0]], verts[f[1]], verts[f[2]]];
        let fc = face_corners(p).ok_or(GeometryError::NearDegenerateTriangle { face: fi })?;
        for c in 0..3 {
            let (i, j, k) = (f[c], f[(c + 1) % 3], f[(c + 2) % 3]);
            area[i] += fc.mixed[c];
            lap[i] += 0.5
                * (fc.cot[(c + 2) % 3] * (verts[j] - verts[i])
                    + fc.cot[(c + 1) % 3] * (verts[k] - verts[i]));
            nacc[i] += fc.angle[c] * fc.unit_normal;
        }
    }

    // Per-vertex adjoints of (area, M, U) plus any direct position term.
    let mut abar = vec![0.0; nv];
    let mut mbar = vec![Vec3::zeros(); nv];
    let mut ubar = vec![Vec3::zeros(); nv];
    let mut grad = vec![Vec3::zeros(); nv];

    for v in 0..nv {
        let un = nacc[v].norm();
        let uhat = nacc[v] / un;
        let nu = -uhat; // interior normal
        let mut nubar = Vec3::zeros();
        match functional {
            Functional::Helfrich { h0 } => {
                let h = lap[v].dot(&nu) / area[v];
                let hbar = 0.5 * (h - h0) * area[v];
                abar[v] += 0.25 * (h - h0) * (h - h0);
                mbar[v] += hbar * nu / area[v];
                nubar += hbar * lap[v] / area[v];
                abar[v] += -hbar * h / area[v];
            }
            Functional::Volume => {
                // V = -(1/3) sum A_v (nu_v . x_v)
                abar[v] += -(1.0 / 3.0) * nu.dot(&verts[v]);
                nubar += -(1.0 / 3.0) * area[v] * verts[v];
                grad[v] += -(1.0 / 3.0) * area[v] * nu;
            }
            Functional::TotalMeanCurvature => {
                // sum H_v A_v = sum M_v . nu_v
                mbar[v] += nu;
                nubar += lap[v];
            }
            Functional::Area => unreachable!(),
        }
        // nu = -U/|U|  =>  Ubar = -(I - uhat uhat^T) nubar / |U|
        ubar[v] = -(nubar - uhat * uhat.dot(&nubar)) / un;
    }

    // Reverse pass over faces.
    for (fi, f) in mesh.faces().iter().enumerate() {
        let p = [verts[f[0]], verts[f[1]], verts[f[2]]];
        let fc = face_corners(p).ok_or(GeometryError::NearDegenerateTriangle { face: fi })?;
        let e = [p[2] - p[1], p[0] - p[2], p[1] - p[0]];
        let cn = 2.0 * fc.area;

        // Local adjoints of the face-level primitives.
        let mut cotbar = [0.0; 3];
        let mut cnbar = 0.0;
        let mut nhat_bar = Vec3::zeros();
        let mut pbar = [Vec3::zeros(); 3];

        for c in 0..3 {
            let (i, j, k) = (f[c], f[(c + 1) % 3], f[(c + 2) % 3]);

            // M_i += 0.5 (cot_{c+2} (p_j - p_i) + cot_{c+1} (p_k - p_i))
            let mb = mbar[i];
            cotbar[(c + 2) % 3] += 0.5 * mb.dot(&(verts[j] - verts[i]));
            cotbar[(c + 1) % 3] += 0.5 * mb.dot(&(verts[k] - verts[i]));
            pbar[(c + 1) % 3] += 0.5 * fc.cot[(c + 2) % 3] * mb;
            pbar[(c + 2) % 3] += 0.5 * fc.cot[(c + 1) % 3] * mb;
            pbar[c] -= 0.5 * (fc.cot[(c + 2) % 3] + fc.cot[(c + 1) % 3]) * mb;

            // U_i += angle_c * nhat
            let ub = ubar[i];
            let anglebar = ub.dot(&fc.unit_normal);
            nhat_bar += fc.angle[c] * ub;
            // angle_c = atan2(cn, d_c) with d_c = u.w; cn^2 + d^2 = |u|^2 |w|^2
            let u = p[(c + 1) % 3] - p[c];
            let w = p[(c + 2) % 3] - p[c];
            let d = u.dot(&w);
            let denom = cn * cn + d * d;
            cnbar += anglebar * d / denom;
            let dbar = -anglebar * cn / denom;
            pbar[(c + 1) % 3] += dbar * w;
            pbar[(c + 2) % 3] += dbar * u;
            pbar[c] -= dbar * (u + w);

            // A_i += mixed_c
            let ab = abar[i];
            if fc.obtuse {
                // mixed_c = cn / 6
                cnbar += ab / 6.0;
            } else {
                // mixed_c = (|e_{c+1}|^2 cot_{c+1} + |e_{c+2}|^2 cot_{c+2}) / 8
                let lj = e[(c + 1) % 3].norm_squared();
                let lk = e[(c + 2) % 3].norm_squared();
                cotbar[(c + 1) % 3] += ab * lj / 8.0;
                cotbar[(c + 2) % 3] += ab * lk / 8.0;
                // |e_m|^2 gradients: e_{c+1} = p_c - p_{c+2}, e_{c+2} = p_{c+1} - p_c
                let ebar_j = ab * fc.cot[(c + 1) % 3] / 4.0 * e[(c + 1) % 3];
                pbar[c] += ebar_j;
                pbar[(c + 2) % 3] -= ebar_j;
                let ebar_k = ab * fc.cot[(c + 2) % 3] / 4.0 * e[(c + 2) % 3];
                pbar[(c + 1) % 3] += ebar_k;
                pbar[c] -= ebar_k;
            }
        }

        // cot_c = d_c / cn
        for c in 0..3 {
            if cotbar[c] == 0.0 {
                continue;
            }
            let u = p[(c + 1) % 3] - p[c];
            let w = p[(c + 2) % 3] - p[c];
            let d = u.dot(&w);
            let dbar = cotbar[c] / cn;
            cnbar += -cotbar[c] * d / (cn * cn);
            pbar[(c + 1) % 3] += dbar * w;
            pbar[(c + 2) % 3] += dbar * u;
            pbar[c] -= dbar * (u + w);
        }

        // nhat = C / cn, cn = |C|, dC/dp_m . v = e_m x v
        let cbar_from_nhat = (nhat_bar - fc.unit_normal * fc.unit_normal.dot(&nhat_bar)) / cn;
        let cbar = cbar_from_nhat + cnbar * fc.unit_normal;
        for c in 0..3 {
            pbar[c] += cbar.cross(&e[c]);
        }

        for c in 0..3 {
            grad[f[c]] += pbar[c];
        }
    }

    Ok(GradientField(grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::test_fixtures::torus;
    use crate::mesh::{build_mesh, ellipsoid, icosphere, sphere_lattice_with_necks};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn jittered_icosphere(subdiv: u32, amount: f64, seed: u64) -> TriMesh {
        let base = icosphere(1.0, subdiv);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let verts = base
            .vertices()
            .iter()
            .map(|v| {
                let d = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                v + amount * d
            })
            .collect();
        build_mesh(verts, base.faces().to_vec()).expect("jitter keeps mesh valid")
    }

    fn random_direction(nv: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
        let mut dir: Vec<Vec3> = (0..nv)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let norm = dir.iter().map(|d| d.norm_squared()).sum::<f64>().sqrt();
        for d in &mut dir {
            *d /= norm;
        }
        dir
    }

    fn fd_directional(mesh: &TriMesh, functional: Functional, dir: &[Vec3], h: f64) -> f64 {
        let shift = |sign: f64| -> TriMesh {
            let verts = mesh
                .vertices()
                .iter()
                .zip(dir)
                .map(|(v, d)| v + sign * h * d)
                .collect();
            mesh.with_vertices(verts).expect("perturbed mesh valid")
        };
        (evaluate(&shift(1.0), functional) - evaluate(&shift(-1.0), functional)) / (2.0 * h)
    }

    fn check_gradient(mesh: &TriMesh, functional: Functional, dirs: usize, tol: f64) {
        let grad = gradient(mesh, functional).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..dirs {
            let dir = random_direction(mesh.vertex_count(), &mut rng);
            let analytic = grad.dot(&dir);
            let numeric = fd_directional(mesh, functional, &dir, 1e-6);
            let scale = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic - numeric).abs() / scale < tol,
                "{functional:?} dir {trial}: analytic {analytic} vs fd {numeric}"
            );
        }
    }

    #[test]
    fn sphere_bending_energies_match_closed_form() {
        let s1 = icosphere(1.0, 4);
        let e0 = helfrich_energy(&s1, 0.0);
        assert!((e0 - 4.0 * PI).abs() < 0.02 * 4.0 * PI, "E_0 = {e0}");
        let e2 = helfrich_energy(&s1, 2.0);
        assert!(e2 < 0.15, "E_2 = {e2}");
        let s23 = icosphere(2.0 / 3.0, 4);
        let e3 = helfrich_energy(&s23, 3.0);
        assert!(e3 < 0.05, "E_3 at r=2/3: {e3}");
    }

    #[test]
    fn willmore_energy_is_scale_invariant_on_spheres() {
        for r in [0.5, 1.0] {
            let w = willmore_energy(&icosphere(r, 4));
            assert!((w - 4.0 * PI).abs() < 0.02 * 4.0 * PI, "W(r={r}) = {w}");
        }
    }

    #[test]
    fn ellipsoid_exceeds_willmore_bound() {
        let w = willmore_energy(&ellipsoid(Vec3::new(1.0, 1.0, 0.5), 4));
        assert!(w > 4.0 * PI);
    }

    #[test]
    fn willmore_lower_bound_over_corpus() {
        let corpus: Vec<TriMesh> = vec![
            icosphere(1.0, 3),
            icosphere(0.5, 3),
            ellipsoid(Vec3::new(0.9, 0.6, 0.6), 3),
            jittered_icosphere(3, 0.01, 7),
            sphere_lattice_with_necks(2, 1e-3).unwrap(),
        ];
        for mesh in &corpus {
            let w = willmore_energy(mesh);
            assert!(w >= 4.0 * PI * 0.98, "Willmore bound violated: {w}");
        }
    }

    #[test]
    fn lattice_willmore_superadditive() {
        let mesh = sphere_lattice_with_necks(2, 1e-3).unwrap();
        let w = willmore_energy(&mesh);
        assert!(w >= 8.0 * 4.0 * PI * 0.98, "lattice Willmore {w}");
    }

    #[test]
    fn gradients_match_finite_differences_on_icosphere() {
        let mesh = icosphere(1.0, 3);
        for functional in [
            Functional::Area,
            Functional::Volume,
            Functional::TotalMeanCurvature,
            Functional::Helfrich { h0: 0.0 },
            Functional::Helfrich { h0: 1.0 },
        ] {
            check_gradient(&mesh, functional, 5, 1e-4);
        }
    }

    #[test]
    fn gradients_match_finite_differences_on_jittered_mesh() {
        let mesh = jittered_icosphere(2, 0.05, 3);
        for functional in [
            Functional::Area,
            Functional::Volume,
            Functional::TotalMeanCurvature,
            Functional::Helfrich { h0: 1.5 },
        ] {
            check_gradient(&mesh, functional, 5, 1e-4);
        }
    }

    #[test]
    fn volume_gradient_points_outward_with_vertex_area() {
        let mesh = icosphere(1.0, 3);
        let geo = compute_geometry(&mesh).unwrap();
        let grad = gradient(&mesh, Functional::Volume).unwrap();
        for v in 0..mesh.vertex_count() {
            let expected = -geo.area[v] * geo.inner_normal[v];
            let err = (grad.0[v] - expected).norm() / expected.norm();
            assert!(err < 0.05, "volume gradient off by {err}");
        }
    }

    #[test]
    fn willmore_gradient_nearly_vanishes_on_sphere() {
        // Round spheres are Willmore-critical; the discrete gradient is
        // pure discretization residual. It converges under refinement and
        // its radial mean vanishes by symmetry.
        let mut prev_max = f64::INFINITY;
        for k in [3u32, 4, 5] {
            let mesh = icosphere(1.0, k);
            let geo = compute_geometry(&mesh).unwrap();
            let grad = gradient(&mesh, Functional::Helfrich { h0: 0.0 }).unwrap();
            let mean_area = geo.total_area() / mesh.vertex_count() as f64;
            let max_norm = grad.0.iter().map(|g| g.norm()).fold(0.0, f64::max);
            assert!(max_norm < 0.2 * mean_area, "max |grad| = {max_norm}, A = {mean_area}");
            assert!(max_norm < prev_max, "no refinement decay at level {k}");
            prev_max = max_norm;

            let radial_mean: f64 = grad
                .0
                .iter()
                .zip(mesh.vertices())
                .map(|(g, v)| g.dot(&v.normalize()))
                .sum::<f64>()
                / mesh.vertex_count() as f64;
            assert!(radial_mean.abs() < 1e-12, "radial mean {radial_mean}");
        }
    }

    #[test]
    fn gradients_sum_to_zero_by_translation_invariance() {
        let mesh = jittered_icosphere(2, 0.05, 11);
        for functional in [
            Functional::Area,
            Functional::TotalMeanCurvature,
            Functional::Helfrich { h0: 1.0 },
        ] {
            let grad = gradient(&mesh, functional).unwrap();
            let total: Vec3 = grad.0.iter().sum();
            assert!(total.norm() < 1e-9, "{functional:?} drift {total:?}");
        }
        // The vertex-based volume is translation invariant only up to the
        // discrete closure defect; its gradient sums to -(1/3) sum A_v nu_v
        // exactly.
        let geo = compute_geometry(&mesh).unwrap();
        let closure: Vec3 = (0..mesh.vertex_count())
            .map(|v| geo.area[v] * geo.inner_normal[v])
            .sum();
        let grad = gradient(&mesh, Functional::Volume).unwrap();
        let total: Vec3 = grad.0.iter().sum();
        assert!((total + closure / 3.0).norm() < 1e-10, "volume drift identity violated");
    }

    #[test]
    fn scaling_derivative_matches_finite_difference() {
        let mesh = icosphere(1.0, 4);
        // H0 = 0: exactly zero by scale invariance
        assert_eq!(scaling_derivative(&mesh, 0.0), 0.0);

        let h0 = 1.0;
        let analytic = scaling_derivative(&mesh, h0);
        let e_plus = helfrich_energy(&mesh.scaled(1.001), h0);
        let e_minus = helfrich_energy(&mesh.scaled(0.999), h0);
        let numeric = (e_plus - e_minus) / 0.002;
        assert!(
            (analytic - numeric).abs() / numeric.abs() < 0.005,
            "scaling derivative {analytic} vs fd {numeric}"
        );
        // reference value -(1/2)(2 - 1)(4 pi) = -2 pi for the unit sphere
        assert!((analytic + 2.0 * PI).abs() < 0.02 * 2.0 * PI, "got {analytic}");
    }

    #[test]
    fn scaling_derivative_vanishes_at_optimal_radius() {
        for h0 in [1.0, 3.0] {
            let mesh = icosphere(2.0 / h0, 4);
            let d = scaling_derivative(&mesh, h0);
            assert!(d.abs() < 0.05, "d/dt at zero-energy sphere (H0={h0}): {d}");
        }
    }

    #[test]
    fn deficit_comparison_inequality_over_corpus() {
        // E_H0(S) - (2-H0)^2 a / 4 >= (2-H0)/2 (E_0(S) - a), slack >= -2% * 4pi
        let corpus: Vec<TriMesh> = vec![
            icosphere(1.0, 3),
            ellipsoid(Vec3::new(0.9, 0.6, 0.6), 3),
            jittered_icosphere(3, 0.02, 5),
            torus(1.0, 0.35, 24, 12),
        ];
        for mesh in &corpus {
            let a = crate::geometry::surface_area(mesh);
            let e0 = willmore_energy(mesh);
            for h0 in [0.0, 0.5, 1.0, 1.5, 2.0] {
                let eh = helfrich_energy(mesh, h0);
                let lhs = eh - 0.25 * (2.0 - h0) * (2.0 - h0) * a;
                let rhs = (2.0 - h0) / 2.0 * (e0 - a);
                assert!(
                    lhs - rhs >= -0.02 * 4.0 * PI,
                    "deficit comparison violated at H0={h0}: lhs {lhs} rhs {rhs}"
                );
            }
        }
    }

    #[test]
    fn translation_leaves_functionals_unchanged_and_gradients_equivariant() {
        let mesh = jittered_icosphere(2, 0.03, 9);
        let shift = Vec3::new(0.7, -2.0, 1.3);
        let moved = mesh.translated(shift);
        for functional in [
            Functional::Area,
            Functional::TotalMeanCurvature,
            Functional::Helfrich { h0: 1.0 },
        ] {
            let delta = (evaluate(&moved, functional) - evaluate(&mesh, functional)).abs();
            let scale = evaluate(&mesh, functional).abs().max(1.0);
            assert!(delta < 1e-9 * scale, "{functional:?} moved by {delta}");
            let ga = gradient(&mesh, functional).unwrap();
            let gb = gradient(&moved, functional).unwrap();
            for v in 0..mesh.vertex_count() {
                assert!((ga.0[v] - gb.0[v]).norm() < 1e-8);
            }
        }
        // Volume shifts by exactly -(1/3) shift . sum A_v nu_v.
        let geo = compute_geometry(&mesh).unwrap();
        let closure: Vec3 = (0..mesh.vertex_count())
            .map(|v| geo.area[v] * geo.inner_normal[v])
            .sum();
        let predicted = -shift.dot(&closure) / 3.0;
        let delta = evaluate(&moved, Functional::Volume) - evaluate(&mesh, Functional::Volume);
        assert!((delta - predicted).abs() < 1e-10, "volume shift {delta} vs {predicted}");
    }
}
