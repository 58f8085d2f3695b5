//! Conic-reduction geometry at points of the cone locus
//! `Phi^{-1}(C(O_nu))`: the scale `varsigma`, chamber alignment, the
//! splitting of the tangent space into leaf (`val(t^0)`), normal
//! (`J val(t^0)`) and horizontal directions, the matrix `D^phi`, the density
//! `Psi_nu`, and the reduced structures `g1`, `g2 = g1/varsigma`,
//! `omega2 = omega1/varsigma`.
//!
//! All reduced quantities are evaluated pointwise on frames; the quotient
//! manifolds are never built globally. Tangent vectors are ambient
//! horizontal lifts (see the geometry module), so `g`, `omega` and `J` are
//! the flat Hermitian operations and the horizontal frame is unitary.

use num_complex::Complex64;

use crate::geometry::{
    heisenberg_chart, heisenberg_chart_with_frame, HeisenbergChart, LinearAction, SpherePoint,
    Tangent,
};
use crate::lie::{
    coadjoint_orbit_data, dualize, CoadjointOrbitData, GroupElement, GroupKind, GroupModel,
    WeightVector,
};
use crate::{Error, Result};

/// Everything the asymptotic and immersion checks need at one locus point.
#[derive(Clone, Debug)]
pub struct ReductionPointData {
    pub point: SpherePoint,
    pub varsigma: f64,
    /// h_m with Phi(m) = varsigma Coad_{h_m} nu.
    pub align_element: GroupElement,
    /// phi-orthonormal basis of t^0_m (reference-basis coordinates).
    pub t0_basis: Vec<Vec<f64>>,
    /// Unitary basis of the horizontal tangent space (complex dimension
    /// d - (r_G - 1)).
    pub horizontal_frame: Vec<Tangent>,
    /// val_m of the t^0 basis (leaf directions).
    pub perp_frame: Vec<Tangent>,
    /// J of the perp frame (normal bundle directions).
    pub normal_frame: Vec<Tangent>,
    /// Gram matrix of the perp frame under g (the matrix D^phi(m)).
    pub d_matrix: Vec<Vec<f64>>,
    pub det_d: f64,
    pub psi_value: f64,
    /// Reduced structures on the real horizontal frame (u_1, i u_1, ...).
    pub g1: Vec<Vec<f64>>,
    pub g2: Vec<Vec<f64>>,
    pub omega2: Vec<Vec<f64>>,
    /// Condition number of the concatenated (horizontal | perp | normal)
    /// real frame of T_m M.
    pub frame_condition: f64,
    /// Moment map coordinates at the point.
    pub moment: Vec<f64>,
    pub nu: WeightVector,
    pub orbit: CoadjointOrbitData,
}

impl ReductionPointData {
    /// Complex dimension of the horizontal space.
    pub fn horizontal_dim(&self) -> usize {
        self.horizontal_frame.len()
    }

    /// Heisenberg chart whose leading frame vectors are the horizontal
    /// frame, completed by the (complex-orthonormalized) leaf directions.
    pub fn chart(&self) -> Result<HeisenbergChart> {
        let mut frame = self.horizontal_frame.clone();
        for p in &self.perp_frame {
            let mut v = p.clone();
            for b in &frame {
                let ip = v.inner(b);
                v = v.add_scaled(-ip, b);
            }
            let n = v.norm();
            if n < 1e-10 {
                return Err(Error::FrameDegenerate("leaf direction inside horizontal".into()));
            }
            v = v.scale(Complex64::new(1.0 / n, 0.0));
            frame.push(v);
        }
        heisenberg_chart_with_frame(&self.point, frame)
    }
}

/// Squared Euclidean distance from the moment value to the cone through the
/// coadjoint orbit of nu (in dual coordinates).
pub fn cone_distance_sq(group: &GroupModel, nu: &WeightVector, phi: &[f64]) -> f64 {
    match group.kind {
        GroupKind::Torus(_) => {
            let nu_c = nu.dual_coordinates(group);
            let nn: f64 = nu_c.iter().map(|a| a * a).sum::<f64>().sqrt();
            let dot: f64 = phi.iter().zip(&nu_c).map(|(a, b)| a * b).sum::<f64>() / nn;
            let t = dot.max(0.0);
            phi.iter().zip(&nu_c).map(|(a, b)| (a - t * b / nn).powi(2)).sum()
        }
        GroupKind::Su2 => {
            // the orbit of a regular nu is a sphere, so the cone is all of
            // g* minus the origin
            let n: f64 = phi.iter().map(|a| a * a).sum();
            if n < 1e-20 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Finds a locus point from a seed by projected descent on the squared cone
/// distance (closed-form bypass when the seed already lies on the cone),
/// then assembles frames, `D^phi`, `Psi_nu` and the reduced structures.
pub fn locus_point(
    action: &LinearAction,
    nu: &WeightVector,
    seed: &SpherePoint,
) -> Result<ReductionPointData> {
    if nu.is_zero() {
        return Err(Error::InvalidWeight("nu = 0".into()));
    }
    let point = solve_to_cone(action, nu, seed)?;
    let margin = action.free_action_margin(&point);
    if margin < 1e-8 {
        return Err(Error::NonFreeAction { sigma_min: margin });
    }
    assemble(action, nu, point)
}

fn solve_to_cone(
    action: &LinearAction,
    nu: &WeightVector,
    seed: &SpherePoint,
) -> Result<SpherePoint> {
    let group = &action.group;
    let tol = 1e-24;
    let phi0 = action.moment_map(seed);
    if cone_distance_sq(group, nu, &phi0) < tol {
        check_cone_positivity(group, nu, &phi0)?;
        return Ok(seed.clone());
    }
    // projected gradient descent with Armijo backtracking
    let mut z = seed.clone();
    let mut f = cone_distance_sq(group, nu, &action.moment_map(&z));
    let mut step = 0.5;
    let max_iter = 10_000;
    for it in 0..max_iter {
        if f < tol {
            let phi = action.moment_map(&z);
            check_cone_positivity(group, nu, &phi)?;
            return Ok(z);
        }
        let grad = cone_gradient(action, nu, &z);
        let gnorm2: f64 = grad
            .factors
            .iter()
            .map(|fv| fv.iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum();
        if gnorm2 < 1e-32 {
            return Err(Error::LocusSolveFailed { iterations: it, residual: f.sqrt() });
        }
        let mut accepted = false;
        for _ in 0..60 {
            let trial = retract(&z, &grad, -step);
            let ft = cone_distance_sq(group, nu, &action.moment_map(&trial));
            if ft <= f - 0.3 * step * gnorm2 {
                z = trial;
                f = ft;
                step = (step * 1.8).min(4.0);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // stagnated below Armijo resolution; accept at round-off scale
            if f < 1e-20 {
                let phi = action.moment_map(&z);
                check_cone_positivity(group, nu, &phi)?;
                return Ok(z);
            }
            return Err(Error::LocusSolveFailed { iterations: it, residual: f.sqrt() });
        }
    }
    Err(Error::LocusSolveFailed { iterations: max_iter, residual: f.sqrt() })
}

fn check_cone_positivity(group: &GroupModel, nu: &WeightVector, phi: &[f64]) -> Result<()> {
    let nu_c = nu.dual_coordinates(group);
    let dot: f64 = phi.iter().zip(&nu_c).map(|(a, b)| a * b).sum();
    if matches!(group.kind, GroupKind::Torus(_)) && dot <= 0.0 {
        return Err(Error::LocusSolveFailed { iterations: 0, residual: dot.abs() });
    }
    Ok(())
}

/// Riemannian gradient (as a horizontal ambient field) of the squared cone
/// distance; torus ray version (SU(2) seeds are already on the cone).
fn cone_gradient(action: &LinearAction, nu: &WeightVector, z: &SpherePoint) -> Tangent {
    let group = &action.group;
    let phi = action.moment_map(z);
    let nu_c = nu.dual_coordinates(group);
    let nn: f64 = nu_c.iter().map(|a| a * a).sum::<f64>().sqrt();
    let dot: f64 = phi.iter().zip(&nu_c).map(|(a, b)| a * b).sum::<f64>() / nn;
    let t = dot.max(0.0);
    let resid: Vec<f64> = phi.iter().zip(&nu_c).map(|(a, b)| a - t * b / nn).collect();
    // gradient of 1/2 |resid|^2: sum_l resid_l grad Phi_l with
    // grad Phi_l = 2 (w_{jl} z_j)_j for the torus
    let r = group.rank();
    let weights = action.effective_weights();
    let mut ambient: Vec<Vec<Complex64>> =
        z.factors.iter().map(|f| vec![Complex64::new(0.0, 0.0); f.len()]).collect();
    let mut idx = 0;
    for (fa, fz) in ambient.iter_mut().zip(&z.factors) {
        for (a, c) in fa.iter_mut().zip(fz) {
            let coeff: f64 = (0..r).map(|l| resid[l] * weights[idx][l] as f64).sum();
            *a = 2.0 * coeff * c;
            idx += 1;
        }
    }
    Tangent::project_horizontal(&ambient, z)
}

fn retract(z: &SpherePoint, dir: &Tangent, step: f64) -> SpherePoint {
    let factors = z
        .factors
        .iter()
        .zip(&dir.factors)
        .map(|(zf, df)| {
            let moved: Vec<Complex64> = zf.iter().zip(df).map(|(a, b)| a + step * b).collect();
            let n = moved.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            moved.into_iter().map(|c| c / n).collect()
        })
        .collect();
    SpherePoint { factors }
}

fn assemble(
    action: &LinearAction,
    nu: &WeightVector,
    point: SpherePoint,
) -> Result<ReductionPointData> {
    let group = &action.group;
    let moment = action.moment_map(&point);
    let nu_norm = nu.norm(group);
    let phi_norm = group.covector_norm(&moment);
    let varsigma = phi_norm / nu_norm;
    if !(varsigma > 0.0) {
        return Err(Error::LocusSolveFailed { iterations: 0, residual: varsigma });
    }
    let align_element = alignment_element(group, nu, &moment)?;
    // residual of Phi = varsigma Coad_h nu
    {
        let coad = align_element.adjoint_matrix(group);
        let nu_c = nu.dual_coordinates(group);
        let dim = group.dim_g();
        for a in 0..dim {
            let img: f64 = (0..dim).map(|b| coad[a][b] * nu_c[b]).sum();
            if (moment[a] - varsigma * img).abs() > 1e-10 * phi_norm.max(1.0) {
                return Err(Error::LocusSolveFailed {
                    iterations: 0,
                    residual: (moment[a] - varsigma * img).abs(),
                });
            }
        }
    }
    let t0_basis = t0_subspace(group, &moment)?;
    let perp_frame: Vec<Tangent> = t0_basis.iter().map(|lam| action.val_m(lam, &point)).collect();
    let normal_frame: Vec<Tangent> = perp_frame.iter().map(|p| p.complex_structure()).collect();
    // D^phi: Gram of the perp frame under g
    let rr = perp_frame.len();
    let mut d_matrix = vec![vec![0.0; rr]; rr];
    for (i, p) in perp_frame.iter().enumerate() {
        for (j, q) in perp_frame.iter().enumerate() {
            d_matrix[i][j] = p.metric(q);
        }
    }
    let det_d = if rr == 0 { 1.0 } else { det_small(&d_matrix) };
    if det_d <= 0.0 {
        return Err(Error::FrameDegenerate(format!("det D = {det_d} not positive")));
    }
    // horizontal frame: complex-orthonormal complement of the perp span
    // inside the per-factor horizontal space (pivoted Gram-Schmidt; rank
    // <= 2 groups keep the perp span at most one complex line, so the
    // single-pass projection is exact)
    let base = heisenberg_chart(&point).frame;
    let mut horizontal_frame: Vec<Tangent> = Vec::new();
    let dim_h = action.model.dim_complex() - rr;
    let pool: Vec<Tangent> = base;
    for _ in 0..dim_h {
        let mut best: Option<(f64, Tangent)> = None;
        for cand in &pool {
            let mut v = cand.clone();
            for p in &perp_frame {
                let pn = p.norm();
                let pu = p.scale(Complex64::new(1.0 / pn, 0.0));
                let ip = v.inner(&pu);
                v = v.add_scaled(-ip, &pu);
            }
            for b in &horizontal_frame {
                let ip = v.inner(b);
                v = v.add_scaled(-ip, b);
            }
            let n = v.norm();
            if best.as_ref().map_or(true, |(bn, _)| n > *bn) {
                best = Some((n, v));
            }
        }
        let (n, v) = best.ok_or_else(|| Error::FrameDegenerate("horizontal pool empty".into()))?;
        if n < 1e-8 {
            return Err(Error::FrameDegenerate(format!("horizontal rank deficit ({n:.2e})")));
        }
        horizontal_frame.push(v.scale(Complex64::new(1.0 / n, 0.0)));
    }

    // reduced structures on the real frame (u_a, i u_a)
    let m = horizontal_frame.len();
    let real_frame: Vec<Tangent> =
        horizontal_frame.iter().flat_map(|u| [u.clone(), u.complex_structure()]).collect();
    let mut g1 = vec![vec![0.0; 2 * m]; 2 * m];
    let mut omega1 = vec![vec![0.0; 2 * m]; 2 * m];
    for (i, u) in real_frame.iter().enumerate() {
        for (j, v) in real_frame.iter().enumerate() {
            g1[i][j] = u.metric(v);
            omega1[i][j] = u.symplectic(v);
        }
    }
    let g2: Vec<Vec<f64>> =
        g1.iter().map(|row| row.iter().map(|x| x / varsigma).collect()).collect();
    let omega2: Vec<Vec<f64>> =
        omega1.iter().map(|row| row.iter().map(|x| x / varsigma).collect()).collect();

    // condition number of the full splitting frame of T_m M
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for t in real_frame.iter().chain(&perp_frame).chain(&normal_frame) {
        cols.push(crate::geometry::flatten_ambient(&t.factors));
    }
    let frame_condition = condition_number(&cols);

    let orbit = coadjoint_orbit_data(group, nu)?;
    let psi_value = psi_nu_from_parts(group, &orbit, phi_norm, det_d, rr);

    Ok(ReductionPointData {
        point,
        varsigma,
        align_element,
        t0_basis,
        horizontal_frame,
        perp_frame,
        normal_frame,
        d_matrix,
        det_d,
        psi_value,
        g1,
        g2,
        omega2,
        frame_condition,
        moment,
        nu: nu.clone(),
        orbit,
    })
}

/// h_m with Phi(m) = varsigma Coad_{h_m}(nu): identity for tori, the
/// axis-angle rotation taking the chamber direction to Phi for SU(2).
fn alignment_element(
    group: &GroupModel,
    nu: &WeightVector,
    moment: &[f64],
) -> Result<GroupElement> {
    match group.kind {
        GroupKind::Torus(_) => Ok(GroupElement::identity(group)),
        GroupKind::Su2 => {
            let nu_c = nu.dual_coordinates(group);
            let nn: f64 = nu_c.iter().map(|a| a * a).sum::<f64>().sqrt();
            let pn: f64 = moment.iter().map(|a| a * a).sum::<f64>().sqrt();
            let u = [nu_c[0] / nn, nu_c[1] / nn, nu_c[2] / nn];
            let v = [moment[0] / pn, moment[1] / pn, moment[2] / pn];
            // rotation with axis u x v and angle arccos(u . v); Ad_{exp(a)}
            // rotates the X-basis coordinates about the axis of a
            let dot = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]).clamp(-1.0, 1.0);
            let angle = dot.acos();
            let axis =
                [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
            let an: f64 = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
            let g = if an < 1e-13 {
                if dot > 0.0 {
                    GroupElement::identity(group)
                } else {
                    // antipodal: rotate by pi about any orthogonal axis
                    let ortho =
                        if u[0].abs() < 0.9 { [0.0, -u[2], u[1]] } else { [-u[2], 0.0, u[0]] };
                    let on: f64 = ortho.iter().map(|a| a * a).sum::<f64>().sqrt();
                    GroupElement::from_algebra(
                        group,
                        &[
                            std::f64::consts::PI * ortho[0] / on,
                            std::f64::consts::PI * ortho[1] / on,
                            std::f64::consts::PI * ortho[2] / on,
                        ],
                    )
                }
            } else {
                GroupElement::from_algebra(
                    group,
                    &[angle * axis[0] / an, angle * axis[1] / an, angle * axis[2] / an],
                )
            };
            // orientation of Ad under the quaternion convention may flip;
            // pick the element that actually aligns
            for cand in [g.clone(), g.inverse(group)] {
                let m = cand.adjoint_matrix(group);
                let img: Vec<f64> =
                    (0..3).map(|a| (0..3).map(|b| m[a][b] * u[b]).sum()).collect();
                let err: f64 = img.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum();
                if err < 1e-16 {
                    return Ok(cand);
                }
            }
            Err(Error::LocusSolveFailed { iterations: 0, residual: 1.0 })
        }
    }
}

/// phi-orthonormal basis of
/// `t^0_m = { lambda : [Phi^phi, lambda] = 0, <Phi, lambda> = 0 }`,
/// computed as an SVD nullspace of the stacked constraints.
fn t0_subspace(group: &GroupModel, moment: &[f64]) -> Result<Vec<Vec<f64>>> {
    let dim = group.dim_g();
    let expected = group.rank() - 1;
    let mut rows: Vec<Vec<f64>> = vec![moment.to_vec()];
    if matches!(group.kind, GroupKind::Su2) {
        let phi_dual = dualize(group, moment);
        // ad_v in the X-basis is the cross product v x .
        for out in 0..3 {
            let mut row = vec![0.0; dim];
            for a in 0..3 {
                let mut e = [0.0; 3];
                e[a] = 1.0;
                let br = [
                    phi_dual[1] * e[2] - phi_dual[2] * e[1],
                    phi_dual[2] * e[0] - phi_dual[0] * e[2],
                    phi_dual[0] * e[1] - phi_dual[1] * e[0],
                ];
                row[a] = br[out];
            }
            rows.push(row);
        }
    }
    let basis = nullspace(&rows, dim, 1e-10);
    if basis.len() != expected {
        return Err(Error::FrameDegenerate(format!(
            "dim t^0 = {} (expected {expected})",
            basis.len()
        )));
    }
    // phi-orthonormalize (phi = scale * euclid)
    let s = group.phi_scale.sqrt();
    Ok(basis
        .into_iter()
        .map(|v| {
            let n: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.into_iter().map(|a| a / (n * s)).collect()
        })
        .collect())
}

/// Orthonormal basis of the nullspace of the row system, via the
/// eigendecomposition of A^T A (the row count may be below the ambient
/// dimension).
fn nullspace(rows: &[Vec<f64>], dim: usize, tol: f64) -> Vec<Vec<f64>> {
    let mut ata = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    for row in rows {
        for a in 0..dim {
            for b in 0..dim {
                ata[(a, b)] += row[a] * row[b];
            }
        }
    }
    let scale = ata.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-300);
    let eig = nalgebra::SymmetricEigen::new(ata);
    let mut basis = Vec::new();
    for i in 0..dim {
        if eig.eigenvalues[i].abs() / scale < tol {
            basis.push((0..dim).map(|c| eig.eigenvectors[(c, i)]).collect::<Vec<f64>>());
        }
    }
    basis
}

fn det_small(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        n => nalgebra::DMatrix::from_fn(n, n, |r, c| m[r][c]).determinant(),
    }
}

fn condition_number(cols: &[Vec<f64>]) -> f64 {
    if cols.is_empty() {
        return 1.0;
    }
    let rows = cols[0].len();
    let mat = nalgebra::DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
    let svd = mat.svd(false, false);
    let max = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = svd.singular_values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    max / min
}

/// `Psi_nu(m) = 2^{1+(r-1)/2} pi (||Phi|| sqrt(det D))^{-1}
///  vol(O_nu)^2 / |det S_nu| * vol(T) / vol(G)^2`
/// with the 0-dimensional conventions.
pub fn psi_nu(data: &ReductionPointData, group: &GroupModel, orbit: &CoadjointOrbitData) -> f64 {
    psi_nu_from_parts(
        group,
        orbit,
        group.covector_norm(&data.moment),
        data.det_d,
        data.t0_basis.len(),
    )
}

fn psi_nu_from_parts(
    group: &GroupModel,
    orbit: &CoadjointOrbitData,
    phi_norm: f64,
    det_d: f64,
    t0_dim: usize,
) -> f64 {
    let r = group.rank() as f64;
    debug_assert_eq!(t0_dim, group.rank() - 1);
    2f64.powf(1.0 + (r - 1.0) / 2.0) * std::f64::consts::PI / (phi_norm * det_d.sqrt())
        * orbit.volume.powi(2)
        / orbit.det_s
        * group.volume_t()
        / group.volume_g().powi(2)
}

/// Smallest singular value of the stacked map
/// `(dPhi(T_m M) | tangent of the cone) -> g*`; strictly positive iff the
/// transversality condition holds at the point.
pub fn transversality_margin(action: &LinearAction, point: &SpherePoint) -> f64 {
    let group = &action.group;
    let r = group.rank();
    let chart = heisenberg_chart(point);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for f in &chart.frame {
        for v in [f.clone(), f.complex_structure()] {
            cols.push(action.moment_derivative(point, &v));
        }
    }
    // cone tangent at Phi(m): the ray direction plus the orbit tangent
    let phi = action.moment_map(point);
    let pn: f64 = phi.iter().map(|a| a * a).sum::<f64>().sqrt();
    if pn > 1e-14 {
        cols.push(phi.iter().map(|a| a / pn).collect());
    }
    if matches!(group.kind, GroupKind::Su2) {
        let u = [phi[0] / pn, phi[1] / pn, phi[2] / pn];
        let seed = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let t1 = [
            u[1] * seed[2] - u[2] * seed[1],
            u[2] * seed[0] - u[0] * seed[2],
            u[0] * seed[1] - u[1] * seed[0],
        ];
        let n1: f64 = t1.iter().map(|a| a * a).sum::<f64>().sqrt();
        let t1 = [t1[0] / n1, t1[1] / n1, t1[2] / n1];
        let t2 = [
            u[1] * t1[2] - u[2] * t1[1],
            u[2] * t1[0] - u[0] * t1[2],
            u[0] * t1[1] - u[1] * t1[0],
        ];
        cols.push(t1.to_vec());
        cols.push(t2.to_vec());
    }
    let dim_g = group.dim_g();
    let _ = r;
    let mat = nalgebra::DMatrix::from_fn(dim_g, cols.len(), |row, c| cols[c][row]);
    let svd = mat.svd(false, false);
    svd.singular_values.iter().fold(f64::INFINITY, |a, &b| a.min(b))
}

/// The reduced structure matrices (g1, g2, omega2) on the real horizontal
/// frame.
pub fn reduced_metrics(
    data: &ReductionPointData,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    (data.g1.clone(), data.g2.clone(), data.omega2.clone())
}

/// Tangent space to the characteristic leaf through m by the co-normal
/// construction `val_m(h_f)`, `h_f = { xi in g_f : <f, xi> = 0 }` with
/// `f = Phi(m)`; must agree with `val_m(t^0_m)` as a subspace.
pub fn characteristic_leaf_tangent(
    action: &LinearAction,
    data: &ReductionPointData,
) -> Result<Vec<Tangent>> {
    let group = &action.group;
    let f = &data.moment;
    let dim = group.dim_g();
    // g_f: nullspace of xi -> ad*_xi f (coadjoint stabilizer algebra)
    let mut rows: Vec<Vec<f64>> = Vec::new();
    if matches!(group.kind, GroupKind::Su2) {
        // ad*_xi f in coordinates is xi x f
        for out in 0..3 {
            let mut row = vec![0.0; 3];
            for a in 0..3 {
                let mut e = [0.0; 3];
                e[a] = 1.0;
                let cr = [
                    e[1] * f[2] - e[2] * f[1],
                    e[2] * f[0] - e[0] * f[2],
                    e[0] * f[1] - e[1] * f[0],
                ];
                row[a] = cr[out];
            }
            rows.push(row);
        }
    }
    rows.push(f.clone());
    let h_f = nullspace(&rows, dim, 1e-10);
    if h_f.len() != data.t0_basis.len() {
        return Err(Error::FrameDegenerate(format!(
            "co-normal space dimension {} vs t^0 {}",
            h_f.len(),
            data.t0_basis.len()
        )));
    }
    let tangents: Vec<Tangent> = h_f.iter().map(|lam| action.val_m(lam, &data.point)).collect();
    let angle = max_principal_angle(&tangents, &data.perp_frame);
    if angle > 1e-8 {
        return Err(Error::FrameDegenerate(format!(
            "leaf-tangent constructions disagree (angle {angle:.2e})"
        )));
    }
    Ok(tangents)
}

fn max_principal_angle(a: &[Tangent], b: &[Tangent]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.len() != b.len() {
        return std::f64::consts::FRAC_PI_2;
    }
    let flat = |ts: &[Tangent]| -> Vec<Vec<f64>> {
        ts.iter().map(|t| crate::geometry::flatten_ambient(&t.factors)).collect()
    };
    let ortho = |cols: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for mut v in cols {
            for b in &out {
                let ip: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= ip * y;
                }
            }
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-14 {
                out.push(v.into_iter().map(|x| x / n).collect());
            }
        }
        out
    };
    let qa = ortho(flat(a));
    let qb = ortho(flat(b));
    let m = nalgebra::DMatrix::from_fn(qa.len(), qb.len(), |r, c| {
        qa[r].iter().zip(&qb[c]).map(|(x, y)| x * y).sum::<f64>()
    });
    let svd = m.svd(false, false);
    let smin = svd.singular_values.iter().fold(f64::INFINITY, |x, &y| x.min(y));
    smin.min(1.0).acos()
}

/// Integrates the leaf field val_m(t^0) with fixed-step RK4 on the sphere
/// coordinates; diagnostics only.
pub fn integrate_leaf_curve(
    action: &LinearAction,
    start: &SpherePoint,
    t_total: f64,
    step: f64,
) -> Result<SpherePoint> {
    let group = &action.group;
    if group.rank() < 2 {
        return Ok(start.clone());
    }
    let field = |z: &SpherePoint| -> Result<Tangent> {
        let phi = action.moment_map(z);
        let basis = t0_subspace(group, &phi)?;
        Ok(action.val_m(&basis[0], z))
    };
    let mut z = start.clone();
    let steps = (t_total / step).round() as usize;
    for _ in 0..steps {
        let k1 = field(&z)?;
        let k2 = field(&retract(&z, &k1, 0.5 * step))?;
        let k3 = field(&retract(&z, &k2, 0.5 * step))?;
        let k4 = field(&retract(&z, &k3, step))?;
        let combo = k1
            .add_scaled(Complex64::new(2.0, 0.0), &k2)
            .add_scaled(Complex64::new(2.0, 0.0), &k3)
            .add_scaled(Complex64::new(1.0, 0.0), &k4);
        z = retract(&z, &combo, step / 6.0);
    }
    Ok(z)
}

/// The locus circle action at m: the flow of
/// `exp(theta (Coad_{h_m} nu)^phi)`, 2 pi periodic on base points for
/// integral weights. Returns the base displacement at the given theta.
pub fn locus_circle_displacement(
    action: &LinearAction,
    data: &ReductionPointData,
    theta: f64,
) -> f64 {
    let group = &action.group;
    let coad = data.align_element.adjoint_matrix(group);
    let nu_c = data.nu.dual_coordinates(group);
    let dim = group.dim_g();
    let aligned: Vec<f64> =
        (0..dim).map(|a| (0..dim).map(|b| coad[a][b] * nu_c[b]).sum()).collect();
    let gen = dualize(group, &aligned);
    let g =
        GroupElement::from_algebra(group, &gen.iter().map(|a| a * theta).collect::<Vec<_>>());
    let moved = action.act(&g, &data.point);
    // phase-aligned chordal displacement of the base points (well
    // conditioned at coincidence, unlike arccos of the inner product)
    let mut total = 0.0f64;
    for (pf, qf) in data.point.factors.iter().zip(&moved.factors) {
        let ip: Complex64 = pf.iter().zip(qf).map(|(a, b)| a * b.conj()).sum();
        let phase = if ip.norm() > 1e-14 { ip / ip.norm() } else { Complex64::new(1.0, 0.0) };
        let chord: f64 =
            pf.iter().zip(qf).map(|(a, b)| (a - phase * b).norm_sqr()).sum::<f64>();
        total += chord;
    }
    total.sqrt()
}
