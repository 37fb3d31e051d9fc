//! Lattice of near-touching spheres joined by catenoidal necks along a
//! spanning tree, producing a single closed genus-0 surface inside the
//! closed unit ball.
//!
//! Geometry: a cube of side 1/2 centered at the origin is split into N^3
//! subcubes of side 1/(2N); each carries the inscribed sphere of radius
//! r = 1/(4N). Tree-adjacent spheres are connected by a neck whose profile
//! is a constant-mean-curvature (Delaunay) arc: near the waist it is the
//! catenoid of waist radius `neck_size`, and its mean curvature is tuned by
//! shooting so the arc meets the node spheres tangentially. The splice
//! circles are the 16-fold (doubled to 32) angular rings required by the
//! sphere grids.

use std::collections::HashMap;

use super::{build_mesh, MeshError, TriMesh, Vec3};

const RING: usize = 32;
const RING_HALF: usize = 16;
/// Colatitude step for the sphere grids (radians).
const RING_STEP: f64 = 0.10;
/// Inner colatitude of the polar cap on faces without a neck.
const PLAIN_CAP: f64 = 0.22;
/// Meridian turning-angle budget per neck tube station.
const TUBE_PSI_STEP: f64 = 0.20;

/// Closed genus-0 sphere lattice with catenoidal necks, contained in the
/// closed unit ball; surface area is N*pi/4 up to neck corrections.
pub fn sphere_lattice_with_necks(n: usize, neck_size: f64) -> Result<TriMesh, MeshError> {
    assert!(n >= 2, "lattice needs at least 2 cells per axis");
    let limit = 1.0 / (8.0 * n as f64);
    if !(neck_size > 0.0 && neck_size < limit) {
        return Err(MeshError::NeckTooLarge { neck_size, limit });
    }
    let r = 1.0 / (4.0 * n as f64);

    let profile = NeckProfile::solve(r, neck_size)
        .ok_or(MeshError::NeckTooLarge { neck_size, limit })?;

    // Spanning tree over the subcube grid in lexicographic order: every
    // cell after the first links to its predecessor neighbor.
    let cell = |i: usize, j: usize, k: usize| -> usize { (i * n + j) * n + k };
    let mut links: Vec<(usize, usize, usize)> = Vec::new(); // (cell_a, cell_b, axis dim)
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if k > 0 {
                    links.push((cell(i, j, k - 1), cell(i, j, k), 2));
                } else if j > 0 {
                    links.push((cell(i, j - 1, 0), cell(i, j, 0), 1));
                } else if i > 0 {
                    links.push((cell(i - 1, 0, 0), cell(i, 0, 0), 0));
                }
            }
        }
    }

    // The neck inserts a little axial length, so tree-linked centers sit
    // 2 * half_spacing apart (slightly more than the kissing distance 2r);
    // using that pitch uniformly keeps every link coaxial and exact.
    let pitch = 2.0 * profile.half_spacing;
    let offset = 0.5 * (n as f64 - 1.0) * pitch;
    let mut centers = vec![Vec3::zeros(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                centers[cell(i, j, k)] = Vec3::new(
                    i as f64 * pitch - offset,
                    j as f64 * pitch - offset,
                    k as f64 * pitch - offset,
                );
            }
        }
    }
    let corner = centers[cell(n - 1, n - 1, n - 1)].norm() + r;
    if corner > 1.0 {
        return Err(MeshError::NeckTooLarge { neck_size, limit });
    }

    // Neck directions per cell: axis index 0..6 encoding +x,-x,+y,-y,+z,-z.
    let mut necked: Vec<[bool; 6]> = vec![[false; 6]; n * n * n];
    for &(a, b, dim) in &links {
        necked[a][2 * dim] = true; // +axis on a
        necked[b][2 * dim + 1] = true; // -axis on b
    }

    let mut mesh = MeshBuffers::default();
    // rims[cell][axis_code] = the 32 splice-ring vertex ids of that face.
    let mut rims: Vec<[Option<Vec<usize>>; 6]> = vec![Default::default(); n * n * n];

    for c in 0..centers.len() {
        let mut node = NodeBuilder::new(&mut mesh, centers[c], r);
        for code in 0..6 {
            let rim = node.build_face(SignedAxis::from_code(code), &profile, necked[c][code]);
            rims[c][code] = rim;
        }
    }

    for &(a, b, dim) in &links {
        let rim_a = rims[a][2 * dim].take().expect("rim built for +axis face");
        let rim_b = rims[b][2 * dim + 1].take().expect("rim built for -axis face");
        let axis = SignedAxis { dim, neg: false };
        let waist = 0.5 * (centers[a] + centers[b]);
        build_tube(&mut mesh, &profile, waist, axis, &rim_a, &rim_b);
    }

    build_mesh(mesh.vertices, mesh.faces)
}

#[derive(Default)]
struct MeshBuffers {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl MeshBuffers {
    fn push_vertex(&mut self, p: Vec3) -> usize {
        self.vertices.push(p);
        self.vertices.len() - 1
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
struct SignedAxis {
    dim: usize,
    neg: bool,
}

impl SignedAxis {
    fn from_code(code: usize) -> SignedAxis {
        SignedAxis { dim: code / 2, neg: code % 2 == 1 }
    }

    fn vector(self) -> Vec3 {
        let mut v = Vec3::zeros();
        v[self.dim] = if self.neg { -1.0 } else { 1.0 };
        v
    }

    /// Right-handed azimuth frame (u, v) with u x v = axis.
    fn frame(self) -> (Vec3, Vec3) {
        let (a, b) = ((self.dim + 1) % 3, (self.dim + 2) % 3);
        let mut u = Vec3::zeros();
        let mut v = Vec3::zeros();
        if self.neg {
            u[b] = 1.0;
            v[a] = 1.0;
        } else {
            u[a] = 1.0;
            v[b] = 1.0;
        }
        (u, v)
    }
}

/// Catenoidal (constant-mean-curvature) neck profile in meridian
/// coordinates.
///
/// `states` run from the waist (xi = 0, rho = waist radius) to the splice
/// circle; the mean curvature is the unduloid value 2/(r + eps), whose
/// bulge radius equals the node sphere radius r. The arc inserts a little
/// axial length relative to touching spheres, so the node center sits at
/// `half_spacing` from the waist (slightly more than r) and tree-linked
/// sphere centers are `2 * half_spacing` apart.
struct NeckProfile {
    states: Vec<ProfileState>,
    theta_cap: f64,
    half_spacing: f64,
    sphere_r: f64,
}

#[derive(Clone, Copy, Debug)]
struct ProfileState {
    s: f64,
    xi: f64,
    rho: f64,
    psi: f64,
}

impl NeckProfile {
    fn solve(r: f64, eps: f64) -> Option<NeckProfile> {
        // Splice colatitude: wide enough to clear the waist, narrow enough
        // that rings of orthogonal necks on one node never meet.
        let theta_cap = 0.436_f64.max((1.4 * eps / r).asin());
        if !(theta_cap < 0.78) {
            return None;
        }
        let rho_splice = r * theta_cap.sin();

        let h = 2.0 / (r + eps);
        let mut states = integrate_profile(eps, h, rho_splice, 2.5 * r)?;

        // Interpolate the last step onto rho = rho_splice exactly.
        let n = states.len();
        if n < 2 {
            return None;
        }
        let (a, b) = (states[n - 2], states[n - 1]);
        let t = (rho_splice - a.rho) / (b.rho - a.rho);
        let last = ProfileState {
            s: a.s + t * (b.s - a.s),
            xi: a.xi + t * (b.xi - a.xi),
            rho: rho_splice,
            psi: a.psi + t * (b.psi - a.psi),
        };
        states[n - 1] = last;

        let half_spacing = last.xi + r * theta_cap.cos();
        Some(NeckProfile { states, theta_cap, half_spacing, sphere_r: r })
    }

    /// Station states for the tube mesh, from the waist outward, spaced by
    /// meridian turning angle and arclength.
    fn stations(&self) -> Vec<ProfileState> {
        let mut out = vec![self.states[0]];
        let mut last = self.states[0];
        for (i, st) in self.states.iter().enumerate().skip(1) {
            let is_end = i + 1 == self.states.len();
            let due = (st.psi - last.psi).abs() > TUBE_PSI_STEP
                || st.s - last.s > 0.45 * st.rho.max(last.rho)
                || st.s - last.s > 0.12 * self.sphere_r;
            if is_end || due {
                out.push(*st);
                last = *st;
            }
        }
        // Drop the station just before the splice if it crowds the rim.
        if out.len() >= 3 {
            let m = out.len() - 2;
            let gap = out[out.len() - 1].s - out[m].s;
            if gap < 0.25 * (out[m].s - out[m - 1].s) {
                out.remove(m);
            }
        }
        out
    }
}

/// Integrate the meridian ODE of a surface of revolution with constant
/// mean curvature `h` from the waist until the radius reaches `rho_stop`.
fn integrate_profile(
    eps: f64,
    h: f64,
    rho_stop: f64,
    xi_max: f64,
) -> Option<Vec<ProfileState>> {
    let mut xi = 0.0_f64;
    let mut rho = eps;
    let mut psi = 0.0_f64;
    let mut s = 0.0_f64;
    let mut states = vec![ProfileState { s, xi, rho, psi }];

    let rhs = |rho: f64, psi: f64| -> (f64, f64, f64) {
        (psi.cos(), psi.sin(), psi.cos() / rho - h)
    };

    for _ in 0..400_000 {
        let kappa = (psi.cos() / rho - h).abs();
        let ds = 0.05 / (kappa + 2.0 * h);
        let (k1x, k1r, k1p) = rhs(rho, psi);
        let (k2x, k2r, k2p) = rhs(rho + 0.5 * ds * k1r, psi + 0.5 * ds * k1p);
        let (k3x, k3r, k3p) = rhs(rho + 0.5 * ds * k2r, psi + 0.5 * ds * k2p);
        let (k4x, k4r, k4p) = rhs(rho + ds * k3r, psi + ds * k3p);
        xi += ds / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        rho += ds / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
        psi += ds / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        s += ds;
        states.push(ProfileState { s, xi, rho, psi });

        if rho >= rho_stop {
            return Some(states);
        }
        if psi <= 0.0 || !rho.is_finite() || xi > xi_max {
            break;
        }
    }
    None
}

/// Per-node sphere builder: six polar face grids sharing canonical
/// boundary vertices along the spherical cube edges.
struct NodeBuilder<'a> {
    mesh: &'a mut MeshBuffers,
    center: Vec3,
    r: f64,
    edge_points: HashMap<((SignedAxis, SignedAxis), i32), usize>,
    corner_points: HashMap<(i8, i8, i8), usize>,
}

impl<'a> NodeBuilder<'a> {
    fn new(mesh: &'a mut MeshBuffers, center: Vec3, r: f64) -> Self {
        NodeBuilder { mesh, center, r, edge_points: HashMap::new(), corner_points: HashMap::new() }
    }

    fn on_sphere(&self, dir: Vec3) -> Vec3 {
        self.center + self.r * dir.normalize()
    }

    fn face_point(&self, axis: SignedAxis, theta: f64, phi: f64) -> Vec3 {
        let a = axis.vector();
        let (u, v) = axis.frame();
        self.center
            + self.r * (theta.cos() * a + theta.sin() * (phi.cos() * u + phi.sin() * v))
    }

    /// Outer-ring vertex on the spherical cube boundary, deduplicated
    /// across faces through canonical edge/corner keys.
    fn boundary_vertex(&mut self, axis: SignedAxis, m: usize) -> usize {
        let phi = 2.0 * std::f64::consts::PI * m as f64 / RING as f64;
        let (c, sn) = (phi.cos(), phi.sin());
        if (c.abs() - sn.abs()).abs() < 1e-9 {
            // Cube corner shared by three faces.
            let (u, v) = axis.frame();
            let dir = axis.vector() + c.signum() * u + sn.signum() * v;
            let key = (dir.x.signum() as i8, dir.y.signum() as i8, dir.z.signum() as i8);
            if let Some(&id) = self.corner_points.get(&key) {
                return id;
            }
            let p = self.on_sphere(Vec3::new(key.0 as f64, key.1 as f64, key.2 as f64));
            let id = self.mesh.push_vertex(p);
            self.corner_points.insert(key, id);
            return id;
        }

        let (u, v) = axis.frame();
        let (u_axis, v_axis) = (axis_of(u), axis_of(v));
        let (partner, free, t) = if c.abs() > sn.abs() {
            (signed(u_axis, c < 0.0), v_axis, sn / c.abs())
        } else {
            (signed(v_axis, sn < 0.0), u_axis, c / sn.abs())
        };
        // Quantize the edge parameter to the shared angular grid.
        let t_idx = (t.atan() * RING as f64 / (2.0 * std::f64::consts::PI)).round() as i32;
        let mut pair = [axis, partner];
        pair.sort();
        let key = ((pair[0], pair[1]), t_idx);
        if let Some(&id) = self.edge_points.get(&key) {
            return id;
        }
        let t_canon = (t_idx as f64 * 2.0 * std::f64::consts::PI / RING as f64).tan();
        let mut dir = pair[0].vector() + pair[1].vector();
        dir[free] = t_canon;
        let id = self.mesh.push_vertex(self.on_sphere(dir));
        self.edge_points.insert(key, id);
        id
    }

    /// One polar face grid. Returns the 32-ring at the splice circle when
    /// the face hosts a neck (to be welded with the tube).
    fn build_face(
        &mut self,
        axis: SignedAxis,
        profile: &NeckProfile,
        has_neck: bool,
    ) -> Option<Vec<usize>> {
        let theta_in = if has_neck { profile.theta_cap } else { PLAIN_CAP };

        let inner: Vec<usize> = (0..RING)
            .map(|m| {
                let phi = 2.0 * std::f64::consts::PI * m as f64 / RING as f64;
                self.mesh.push_vertex(self.face_point(axis, theta_in, phi))
            })
            .collect();

        if !has_neck {
            // Pole cap: apex fan to a 16-ring, then a doubling row to the
            // inner 32-ring.
            let pole = self.mesh.push_vertex(self.center + self.r * axis.vector());
            let half: Vec<usize> = (0..RING_HALF)
                .map(|l| {
                    let phi = 2.0 * std::f64::consts::PI * l as f64 / RING_HALF as f64;
                    self.mesh.push_vertex(self.face_point(axis, 0.5 * theta_in, phi))
                })
                .collect();
            for l in 0..RING_HALF {
                self.mesh.faces.push([pole, half[l], half[(l + 1) % RING_HALF]]);
            }
            emit_coarse_to_fine(&mut self.mesh.faces, &half, &inner);
        }

        let theta_b: Vec<f64> = (0..RING)
            .map(|m| {
                let phi = 2.0 * std::f64::consts::PI * m as f64 / RING as f64;
                (1.0 / phi.cos().abs().max(phi.sin().abs())).atan()
            })
            .collect();
        let theta_b_max = theta_b.iter().cloned().fold(0.0, f64::max);
        let k_rings = (((theta_b_max - theta_in) / RING_STEP).ceil() as usize).max(2);

        let mut prev = inner.clone();
        for k in 1..=k_rings {
            let ring: Vec<usize> = if k == k_rings {
                (0..RING).map(|m| self.boundary_vertex(axis, m)).collect()
            } else {
                (0..RING)
                    .map(|m| {
                        let phi = 2.0 * std::f64::consts::PI * m as f64 / RING as f64;
                        let theta = theta_in + (theta_b[m] - theta_in) * k as f64 / k_rings as f64;
                        self.mesh.push_vertex(self.face_point(axis, theta, phi))
                    })
                    .collect()
            };
            for m in 0..RING {
                let m1 = (m + 1) % RING;
                self.mesh.faces.push([prev[m], ring[m], ring[m1]]);
                self.mesh.faces.push([prev[m], ring[m1], prev[m1]]);
            }
            prev = ring;
        }

        has_neck.then_some(inner)
    }
}

fn axis_of(unit: Vec3) -> usize {
    (0..3).find(|&d| unit[d] != 0.0).expect("frame vectors are coordinate axes")
}

fn signed(dim: usize, neg: bool) -> SignedAxis {
    SignedAxis { dim, neg }
}

/// Doubling row on a face grid: coarse 16-ring nearer the pole, fine
/// 32-ring farther out.
fn emit_coarse_to_fine(faces: &mut Vec<[usize; 3]>, coarse: &[usize], fine: &[usize]) {
    for l in 0..RING_HALF {
        let l1 = (l + 1) % RING_HALF;
        let b0 = fine[2 * l];
        let b1 = fine[2 * l + 1];
        let b2 = fine[(2 * l + 2) % RING];
        faces.push([coarse[l], b0, b1]);
        faces.push([coarse[l], b1, coarse[l1]]);
        faces.push([coarse[l1], b1, b2]);
    }
}

/// Neck tube between two splice rings, mirror-symmetric about the waist.
fn build_tube(
    mesh: &mut MeshBuffers,
    profile: &NeckProfile,
    waist: Vec3,
    axis: SignedAxis,
    rim_a: &[usize],
    rim_b: &[usize],
) {
    let d = axis.vector();
    let (u, v) = axis.frame();
    let stations = profile.stations();
    let n_st = stations.len();
    // Ring size per station: 16 near the waist (catenoid segment), 32
    // outward; switch where the radius reaches 60% of the splice radius.
    let rho_switch = 0.6 * stations[n_st - 1].rho;
    let ring_of = |st: &ProfileState, is_end: bool| -> usize {
        if is_end || st.rho >= rho_switch {
            RING
        } else {
            RING_HALF
        }
    };

    let point = |xi: f64, rho: f64, m: usize, size: usize| -> Vec3 {
        let phi = 2.0 * std::f64::consts::PI * m as f64 / size as f64;
        waist + xi * d + rho * (phi.cos() * u + phi.sin() * v)
    };

    // Station list from rim_a (s = -s*) through the waist to rim_b (s = +s*).
    // Entries: (ring ids, size).
    let mut rings: Vec<(Vec<usize>, usize)> = Vec::new();
    rings.push((rim_a.to_vec(), RING));
    for i in (1..n_st - 1).rev() {
        let st = &stations[i];
        let size = ring_of(st, false);
        let ids = (0..size).map(|m| mesh.push_vertex(point(-st.xi, st.rho, m, size))).collect();
        rings.push((ids, size));
    }
    {
        let st = &stations[0];
        let size = RING_HALF;
        let ids = (0..size).map(|m| mesh.push_vertex(point(st.xi, st.rho, m, size))).collect();
        rings.push((ids, size));
    }
    for i in 1..n_st - 1 {
        let st = &stations[i];
        let size = ring_of(st, false);
        let ids = (0..size).map(|m| mesh.push_vertex(point(st.xi, st.rho, m, size))).collect();
        rings.push((ids, size));
    }
    // Entering rim_b: tube azimuth m corresponds to the partner face's
    // azimuth (8 - m) mod 32, which reverses traversal as required.
    let remapped_b: Vec<usize> =
        (0..RING).map(|m| rim_b[(8 + RING - m) % RING]).collect();
    rings.push((remapped_b, RING));

    for w in 0..rings.len() - 1 {
        let (lo, lo_size) = (&rings[w].0, rings[w].1);
        let (hi, hi_size) = (&rings[w + 1].0, rings[w + 1].1);
        if lo_size == hi_size {
            for m in 0..lo_size {
                let m1 = (m + 1) % lo_size;
                mesh.faces.push([lo[m], lo[m1], hi[m1]]);
                mesh.faces.push([lo[m], hi[m1], hi[m]]);
            }
        } else if lo_size > hi_size {
            // fine below, coarse above
            for l in 0..RING_HALF {
                let l1 = (l + 1) % RING_HALF;
                let b0 = lo[2 * l];
                let b1 = lo[2 * l + 1];
                let b2 = lo[(2 * l + 2) % RING];
                mesh.faces.push([b0, b1, hi[l]]);
                mesh.faces.push([b1, hi[l1], hi[l]]);
                mesh.faces.push([b1, b2, hi[l1]]);
            }
        } else {
            // coarse below, fine above
            for l in 0..RING_HALF {
                let l1 = (l + 1) % RING_HALF;
                let b0 = hi[2 * l];
                let b1 = hi[2 * l + 1];
                let b2 = hi[(2 * l + 2) % RING];
                mesh.faces.push([lo[l], b1, b0]);
                mesh.faces.push([lo[l], lo[l1], b1]);
                mesh.faces.push([lo[l1], b2, b1]);
            }
        }
    }
}
