//! Compact groups of rank <= 2: tori T^r and SU(2).
//!
//! Conventions used throughout the crate:
//!
//! * The Ad-invariant product on the Lie algebra is `phi = phi_scale * <.,.>`
//!   where `<.,.>` is the standard product in the reference basis below.
//!   All volumes (`vol(G)`, `vol(T)`) are induced by `phi`; Haar quadrature
//!   weights are probability-normalized (total mass 1) with the phi-induced
//!   total volume kept separately.
//! * Torus T^r: the Lie algebra is R^r with the standard basis; `exp` has
//!   period 2pi in each coordinate, so `vol(T^r) = (2pi sqrt(phi_scale))^r`.
//! * SU(2): the Lie algebra basis is `X_a = -(i/2) sigma_a` (Pauli matrices),
//!   which satisfies so(3) brackets `[X_1, X_2] = X_3` (cyclic) and is
//!   orthonormal for `phi_scale * (-2 Tr(xi eta))`. Group elements are stored
//!   as unit quaternions `q0 + i(q1 s1 + q2 s2 + q3 s3)` in hyperspherical
//!   angles. The maximal torus is `t(theta) = diag(e^{i theta}, e^{-i theta})`
//!   (quaternion `(cos theta, 0, 0, sin theta)`), traversed with period 2pi;
//!   its phi-length is `4pi sqrt(phi_scale)`. With these conventions
//!   `vol(SU(2)) = 16 pi^2 phi_scale^{3/2}` (the round 3-sphere of radius
//!   `2 sqrt(phi_scale)`).
//! * Weights: a torus weight is an integer tuple; the SU(2) weight `n >= 0`
//!   labels the (n+1)-dimensional irreducible representation. As a covector
//!   the SU(2) weight pairs to `n` against the torus generator `H = -2 X_3`,
//!   so its coordinates in the dual basis are `(0, 0, -n/2)` and its dual
//!   norm is `n / (2 sqrt(phi_scale))`.
//! * Characters are evaluated on conjugacy classes: `e^{i k nu . t}` for the
//!   torus and `sin((m+1) theta) / sin(theta)` for SU(2) (eigenvalues
//!   `e^{+-i theta}`, `m = k n`).

use num_complex::Complex64;

use crate::{Error, Result};

/// Angle threshold below which SU(2) characters switch to the limiting
/// polynomial form (the Weyl denominator degenerates).
pub const WEYL_SINGULAR_THRESHOLD: f64 = 1e-6;

/// Which group a [`GroupModel`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    /// Torus of the given rank (1 or 2).
    Torus(usize),
    /// SU(2); rank 1, dim g = 3.
    Su2,
}

/// A compact group together with the scale of its Ad-invariant product.
#[derive(Clone, Copy, Debug)]
pub struct GroupModel {
    pub kind: GroupKind,
    /// Multiplier on the standard bi-invariant product; all volumes derive
    /// from it.
    pub phi_scale: f64,
}

impl GroupModel {
    pub fn torus(rank: usize) -> Result<Self> {
        if rank == 0 || rank > 2 {
            return Err(Error::InvalidModel(format!(
                "torus rank {rank} unsupported (want 1 or 2)"
            )));
        }
        Ok(Self { kind: GroupKind::Torus(rank), phi_scale: 1.0 })
    }

    pub fn su2() -> Self {
        Self { kind: GroupKind::Su2, phi_scale: 1.0 }
    }

    pub fn with_phi_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidModel(format!("phi_scale {scale} must be positive")));
        }
        self.phi_scale = scale;
        Ok(self)
    }

    pub fn rank(&self) -> usize {
        match self.kind {
            GroupKind::Torus(r) => r,
            GroupKind::Su2 => 1,
        }
    }

    pub fn dim_g(&self) -> usize {
        match self.kind {
            GroupKind::Torus(r) => r,
            GroupKind::Su2 => 3,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.kind, GroupKind::Torus(_))
    }

    /// phi-induced volume of the group.
    pub fn volume_g(&self) -> f64 {
        let s = self.phi_scale.sqrt();
        match self.kind {
            GroupKind::Torus(r) => (2.0 * std::f64::consts::PI * s).powi(r as i32),
            GroupKind::Su2 => 16.0 * std::f64::consts::PI.powi(2) * s.powi(3),
        }
    }

    /// phi-induced volume of the maximal torus.
    pub fn volume_t(&self) -> f64 {
        let s = self.phi_scale.sqrt();
        match self.kind {
            GroupKind::Torus(r) => (2.0 * std::f64::consts::PI * s).powi(r as i32),
            GroupKind::Su2 => 4.0 * std::f64::consts::PI * s,
        }
    }

    /// phi-norm of a Lie-algebra vector given by coordinates in the
    /// reference basis.
    pub fn algebra_norm(&self, xi: &[f64]) -> f64 {
        (self.phi_scale * xi.iter().map(|x| x * x).sum::<f64>()).sqrt()
    }

    /// Dual (covector) norm induced by phi.
    pub fn covector_norm(&self, lambda: &[f64]) -> f64 {
        (lambda.iter().map(|x| x * x).sum::<f64>() / self.phi_scale).sqrt()
    }
}

/// Highest weight in the closed positive Weyl chamber.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightVector {
    pub components: Vec<i64>,
}

impl WeightVector {
    pub fn new(group: &GroupModel, components: Vec<i64>) -> Result<Self> {
        match group.kind {
            GroupKind::Torus(r) => {
                if components.len() != r {
                    return Err(Error::InvalidWeight(format!(
                        "torus rank {r} weight needs {r} components, got {}",
                        components.len()
                    )));
                }
            }
            GroupKind::Su2 => {
                if components.len() != 1 || components[0] < 0 {
                    return Err(Error::InvalidWeight(
                        "SU(2) weight is a single nonnegative integer".into(),
                    ));
                }
            }
        }
        Ok(Self { components })
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|&c| c == 0)
    }

    /// Scale by a positive integer (the ladder k nu).
    pub fn scaled(&self, k: u64) -> Vec<i64> {
        self.components.iter().map(|&c| c * k as i64).collect()
    }

    /// Dual norm ||nu||_phi.
    pub fn norm(&self, group: &GroupModel) -> f64 {
        group.covector_norm(&self.dual_coordinates(group))
    }

    /// Coordinates of nu as a covector in the reference dual basis.
    ///
    /// Torus: the components themselves. SU(2): `(0, 0, -n/2)` (see module
    /// docs for the sign).
    pub fn dual_coordinates(&self, group: &GroupModel) -> Vec<f64> {
        match group.kind {
            GroupKind::Torus(_) => self.components.iter().map(|&c| c as f64).collect(),
            GroupKind::Su2 => vec![0.0, 0.0, -(self.components[0] as f64) / 2.0],
        }
    }
}

/// A group element as a tuple of angles.
///
/// Torus: one angle per circle factor. SU(2): hyperspherical angles
/// `(chi, theta, phi)` of the unit quaternion
/// `(cos chi, sin chi sin theta cos phi, sin chi sin theta sin phi,
///   sin chi cos theta)`.
#[derive(Clone, Debug)]
pub struct GroupElement {
    pub angles: Vec<f64>,
}

impl GroupElement {
    pub fn identity(group: &GroupModel) -> Self {
        Self { angles: vec![0.0; if group.is_torus() { group.rank() } else { 3 }] }
    }

    pub fn torus(angles: Vec<f64>) -> Self {
        Self { angles }
    }

    /// SU(2) element from a quaternion (normalized here).
    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        let q = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
        let chi = q[0].clamp(-1.0, 1.0).acos();
        let s = chi.sin();
        let (theta, phi) = if s.abs() < 1e-14 {
            (0.0, 0.0)
        } else {
            let u = [q[1] / s, q[2] / s, q[3] / s];
            (u[2].clamp(-1.0, 1.0).acos(), u[1].atan2(u[0]))
        };
        Self { angles: vec![chi, theta, phi] }
    }

    /// Quaternion components of an SU(2) element.
    pub fn quaternion(&self) -> [f64; 4] {
        let (chi, theta, phi) = (self.angles[0], self.angles[1], self.angles[2]);
        let (sc, cc) = (chi.sin(), chi.cos());
        let (st, ct) = (theta.sin(), theta.cos());
        [cc, sc * st * phi.cos(), sc * st * phi.sin(), sc * ct]
    }

    /// 2x2 unitary matrix of an SU(2) element, row-major.
    pub fn su2_matrix(&self) -> [[Complex64; 2]; 2] {
        let q = self.quaternion();
        let i = Complex64::i();
        [
            [Complex64::new(q[0], q[3]), i * q[1] + q[2]],
            [i * q[1] - q[2], Complex64::new(q[0], -q[3])],
        ]
    }

    /// Conjugacy-class angle: torus elements are their own classes; for
    /// SU(2) the eigenvalues are e^{+-i theta} with cos(theta) = q0.
    pub fn conjugacy_angle(&self, group: &GroupModel) -> f64 {
        match group.kind {
            GroupKind::Torus(_) => self.angles[0],
            GroupKind::Su2 => self.quaternion()[0].clamp(-1.0, 1.0).acos(),
        }
    }

    pub fn multiply(&self, group: &GroupModel, other: &GroupElement) -> GroupElement {
        match group.kind {
            GroupKind::Torus(_) => GroupElement::torus(
                self.angles
                    .iter()
                    .zip(&other.angles)
                    .map(|(a, b)| (a + b).rem_euclid(2.0 * std::f64::consts::PI))
                    .collect(),
            ),
            GroupKind::Su2 => {
                let a = self.quaternion();
                let b = other.quaternion();
                GroupElement::from_quaternion([
                    a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                    a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                    a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                    a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
                ])
            }
        }
    }

    pub fn inverse(&self, group: &GroupModel) -> GroupElement {
        match group.kind {
            GroupKind::Torus(_) => {
                GroupElement::torus(self.angles.iter().map(|a| -a).collect())
            }
            GroupKind::Su2 => {
                let q = self.quaternion();
                GroupElement::from_quaternion([q[0], -q[1], -q[2], -q[3]])
            }
        }
    }

    /// exp of a Lie-algebra vector given in the reference basis.
    pub fn from_algebra(group: &GroupModel, xi: &[f64]) -> GroupElement {
        match group.kind {
            GroupKind::Torus(_) => GroupElement::torus(xi.to_vec()),
            GroupKind::Su2 => {
                // exp(sum a_i X_i) = cos(|a|/2) - i sin(|a|/2) (a_hat . sigma)
                let n = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
                if n < 1e-300 {
                    return GroupElement::identity(group);
                }
                let half = 0.5 * n;
                let s = -half.sin() / n;
                GroupElement::from_quaternion([half.cos(), s * xi[0], s * xi[1], s * xi[2]])
            }
        }
    }

    /// Adjoint action on the Lie algebra in the reference basis (SO(3)
    /// rotation for SU(2), identity for a torus). Coadjoint action on dual
    /// coordinates uses the same matrix.
    pub fn adjoint_matrix(&self, group: &GroupModel) -> Vec<Vec<f64>> {
        match group.kind {
            GroupKind::Torus(r) => {
                let mut m = vec![vec![0.0; r]; r];
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = 1.0;
                }
                m
            }
            GroupKind::Su2 => {
                let u = self.su2_matrix();
                let basis = su2_algebra_basis();
                let mut m = vec![vec![0.0; 3]; 3];
                for (b, xb) in basis.iter().enumerate() {
                    let gx = mat2_mul(&u, xb);
                    let gxg = mat2_mul(&gx, &mat2_dagger(&u));
                    for (a, xa) in basis.iter().enumerate() {
                        // phi_1(X_a, Ad_g X_b) with phi_1 = -2 Tr
                        m[a][b] = -2.0 * mat2_trace_product(xa, &gxg).re;
                    }
                }
                m
            }
        }
    }
}

/// The matrices X_a = -(i/2) sigma_a.
pub fn su2_algebra_basis() -> [[[Complex64; 2]; 2]; 3] {
    let z = Complex64::new(0.0, 0.0);
    let mi = Complex64::new(0.0, -0.5);
    [
        [[z, mi], [mi, z]],
        [[z, -Complex64::new(0.5, 0.0)], [Complex64::new(0.5, 0.0), z]],
        [[mi, z], [z, -mi]],
    ]
}

/// Matrix of sum_a xi_a X_a.
pub fn su2_algebra_matrix(xi: &[f64]) -> [[Complex64; 2]; 2] {
    let basis = su2_algebra_basis();
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (a, xa) in basis.iter().enumerate() {
        for r in 0..2 {
            for c in 0..2 {
                m[r][c] += xi[a] * xa[r][c];
            }
        }
    }
    m
}

fn mat2_mul(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            m[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    m
}

fn mat2_dagger(a: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn mat2_trace_product(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> Complex64 {
    a[0][0] * b[0][0] + a[0][1] * b[1][0] + a[1][0] * b[0][1] + a[1][1] * b[1][1]
}

/// Dimension d_{k nu} of the irreducible representation with highest weight
/// k nu. Tori have 1-dimensional irreducibles; SU(2) with nu = n gives
/// k n + 1.
pub fn weyl_dimension(group: &GroupModel, nu: &WeightVector, k: u64) -> Result<u64> {
    match group.kind {
        GroupKind::Torus(_) => Ok(1),
        GroupKind::Su2 => {
            let n = nu.components[0];
            if n < 0 {
                return Err(Error::InvalidWeight("SU(2) weight outside the chamber".into()));
            }
            Ok(k * n as u64 + 1)
        }
    }
}

/// Weyl character of the representation k nu at a group element (class
/// function). Near Weyl-denominator zeros (|sin theta| below
/// [`WEYL_SINGULAR_THRESHOLD`]) the SU(2) branch switches to the limiting
/// form `(m+1) cos((m+1) theta) / cos(theta)`.
pub fn character(
    group: &GroupModel,
    nu: &WeightVector,
    k: u64,
    element: &GroupElement,
) -> Complex64 {
    match group.kind {
        GroupKind::Torus(r) => {
            let knu = nu.scaled(k);
            let phase: f64 =
                (0..r).map(|l| knu[l] as f64 * element.angles[l]).sum();
            Complex64::from_polar(1.0, phase)
        }
        GroupKind::Su2 => {
            let m = (k as i64 * nu.components[0]) as f64;
            let theta = element.conjugacy_angle(group);
            let denom = theta.sin();
            if denom.abs() < WEYL_SINGULAR_THRESHOLD {
                Complex64::new((m + 1.0) * ((m + 1.0) * theta).cos() / theta.cos(), 0.0)
            } else {
                Complex64::new(((m + 1.0) * theta).sin() / denom, 0.0)
            }
        }
    }
}

/// Which functions a Haar rule integrates exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    /// Product trapezoid rule on a torus (exact for all functions of bounded
    /// frequency, class or not).
    TorusProduct,
    /// SU(2) Weyl-integration rule for class functions only.
    Su2Class,
    /// Full Haar rule on SU(2) (exact for matrix coefficients).
    Su2Full,
}

/// Quadrature rule for Haar integration, probability-normalized.
#[derive(Clone, Debug)]
pub struct HaarQuadrature {
    pub nodes: Vec<GroupElement>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
    pub kind: RuleKind,
}

impl HaarQuadrature {
    /// Integrate a function over the group.
    pub fn integrate<F: FnMut(&GroupElement) -> Complex64>(&self, mut f: F) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (node, w) in self.nodes.iter().zip(&self.weights) {
            acc += *w * f(node);
        }
        acc
    }
}

/// Haar quadrature exact for class-function content up to `exact_degree`.
///
/// Torus: product equispaced rule with N = degree + 1 nodes per circle,
/// exact on e^{i m theta} for |m| <= N - 1. SU(2): the Weyl integration
/// rule (2/pi) int f(theta) sin^2(theta) dtheta discretized by an
/// equispaced rule on the full circle with weight sin^2, exact for
/// trigonometric class functions up to the requested degree.
pub fn haar_quadrature(group: &GroupModel, exact_degree: usize) -> HaarQuadrature {
    let degree = exact_degree.max(1);
    match group.kind {
        GroupKind::Torus(r) => {
            let n = degree + 1;
            let step = 2.0 * std::f64::consts::PI / n as f64;
            let mut nodes = Vec::with_capacity(n.pow(r as u32));
            let mut weights = Vec::with_capacity(n.pow(r as u32));
            let mut idx = vec![0usize; r];
            loop {
                nodes.push(GroupElement::torus(
                    idx.iter().map(|&i| i as f64 * step).collect(),
                ));
                weights.push(1.0 / (n as f64).powi(r as i32));
                // odometer over the product grid
                let mut carry = true;
                for d in idx.iter_mut() {
                    *d += 1;
                    if *d < n {
                        carry = false;
                        break;
                    }
                    *d = 0;
                }
                if carry {
                    break;
                }
            }
            HaarQuadrature { nodes, weights, exact_degree: n - 1, kind: RuleKind::TorusProduct }
        }
        GroupKind::Su2 => {
            let n = degree + 3;
            let mut nodes = Vec::with_capacity(n);
            let mut weights = Vec::with_capacity(n);
            for i in 0..n {
                let chi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                nodes.push(GroupElement { angles: vec![chi, 0.0, 0.0] });
                weights.push(2.0 / n as f64 * chi.sin().powi(2));
            }
            HaarQuadrature { nodes, weights, exact_degree: n - 3, kind: RuleKind::Su2Class }
        }
    }
}

/// Full Haar rule on SU(2), exact for polynomials of degree `exact_degree`
/// in the quaternion coordinates (matrix coefficients of spin j have degree
/// 2j). Product of the class rule in chi, Gauss-Legendre in cos(theta) and
/// an equispaced rule in phi.
pub fn haar_quadrature_full(group: &GroupModel, exact_degree: usize) -> HaarQuadrature {
    match group.kind {
        GroupKind::Torus(_) => haar_quadrature(group, exact_degree),
        GroupKind::Su2 => {
            let l = exact_degree.max(1);
            let n_chi = l + 3;
            let n_phi = l + 1;
            let (gl_nodes, gl_weights) = gauss_legendre(l / 2 + 1);
            let mut nodes = Vec::new();
            let mut weights = Vec::new();
            for i in 0..n_chi {
                let chi = 2.0 * std::f64::consts::PI * i as f64 / n_chi as f64;
                let w_chi = 2.0 / n_chi as f64 * chi.sin().powi(2);
                for (u, wu) in gl_nodes.iter().zip(&gl_weights) {
                    let theta = u.clamp(-1.0, 1.0).acos();
                    for p in 0..n_phi {
                        let phi = 2.0 * std::f64::consts::PI * p as f64 / n_phi as f64;
                        nodes.push(GroupElement { angles: vec![chi, theta, phi] });
                        weights.push(w_chi * wu / 2.0 / n_phi as f64);
                    }
                }
            }
            HaarQuadrature { nodes, weights, exact_degree: l, kind: RuleKind::Su2Full }
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] (weights sum to 2).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let n = n.max(1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton iteration from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Coadjoint-orbit data for a weight: dimension, Kostant-Kirillov volume and
/// |det S_nu|, with the 0-dimensional conventions vol = 1, det = 1.
#[derive(Clone, Debug)]
pub struct CoadjointOrbitData {
    pub weight: WeightVector,
    pub orbit_dim: usize,
    pub volume: f64,
    pub det_s: f64,
}

/// Computes orbit data. Torus orbits are points (conventions apply). For
/// SU(2) the orbit through nu is the sphere of coordinate radius n/2 in g*;
/// its symplectic volume is obtained by quadrature of the Kostant-Kirillov
/// form sigma(u1, u2) = lambda . (u1 x u2) / |lambda|^2 over the sphere.
pub fn coadjoint_orbit_data(group: &GroupModel, nu: &WeightVector) -> Result<CoadjointOrbitData> {
    if nu.is_zero() {
        return Err(Error::InvalidWeight("nu = 0 excluded (0 not in Phi(M))".into()));
    }
    match group.kind {
        GroupKind::Torus(_) => Ok(CoadjointOrbitData {
            weight: nu.clone(),
            orbit_dim: 0,
            volume: 1.0,
            det_s: 1.0,
        }),
        GroupKind::Su2 => {
            let n = nu.components[0] as f64;
            let r = n / 2.0;
            // Quadrature of the KK 2-form over the radius-r sphere,
            // parametrized by (theta, phi); exact for this integrand.
            let (gl_nodes, gl_weights) = gauss_legendre(8);
            let n_phi = 16usize;
            let mut volume = 0.0;
            for (u, wu) in gl_nodes.iter().zip(&gl_weights) {
                let st = (1.0 - u * u).max(0.0).sqrt();
                for p in 0..n_phi {
                    let phi = 2.0 * std::f64::consts::PI * p as f64 / n_phi as f64;
                    let lambda = [r * st * phi.cos(), r * st * phi.sin(), r * u];
                    // Tangent vectors d lambda / d theta (unscaled by the
                    // Jacobian, handled by the measure du dphi) and
                    // d lambda / d phi.
                    let dtheta = [r * u * phi.cos(), r * u * phi.sin(), -r * st];
                    let dphi = [-r * st * phi.sin(), r * st * phi.cos(), 0.0];
                    let cross = [
                        dtheta[1] * dphi[2] - dtheta[2] * dphi[1],
                        dtheta[2] * dphi[0] - dtheta[0] * dphi[2],
                        dtheta[0] * dphi[1] - dtheta[1] * dphi[0],
                    ];
                    let sigma = (lambda[0] * cross[0] + lambda[1] * cross[1] + lambda[2] * cross[2])
                        / (r * r);
                    // d(cos theta) absorbs one sin(theta); sigma above is the
                    // KK form on (d theta, d phi), so divide by sin(theta).
                    if st > 1e-14 {
                        volume += wu * (2.0 * std::f64::consts::PI / n_phi as f64) * sigma / st;
                    }
                }
            }
            // S_nu = ad_{nu^phi} restricted to t-perp = span{X_1, X_2}.
            let s = group.phi_scale;
            let v3 = n / (2.0 * s);
            let det_s = v3 * v3;
            Ok(CoadjointOrbitData { weight: nu.clone(), orbit_dim: 2, volume, det_s })
        }
    }
}

/// The dual vector lambda^phi with phi(lambda^phi, .) = lambda, in
/// reference-basis coordinates.
pub fn dualize(group: &GroupModel, lambda: &[f64]) -> Vec<f64> {
    lambda.iter().map(|x| x / group.phi_scale).collect()
}
