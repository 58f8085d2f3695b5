//! Model quantized manifolds: CP^d and two-factor products, with the unit
//! circle bundle realized as the unit sphere(s) of the homogeneous
//! coordinates.
//!
//! Normalization. The symplectic form is `omega = (i/2) ddbar log(1+|w|^2)`
//! in affine charts (so vol(CP^1) = pi and the curvature of the quantizing
//! bundle is -2i omega), and `g = omega(., J.)`. With this scale the
//! projection from the unit sphere is a Riemannian submersion: a tangent
//! vector of M at [z] is represented throughout by its horizontal lift, an
//! ambient vector complex-orthogonal to the factor coordinates, on which
//! `g = Re<.,.>`, `omega = -Im<.,.>` and `J = i`.
//!
//! The L^2 structure on the circle bundle X uses the round measure divided
//! by 2 pi per factor, i.e. unit-mass circle fibers; this is the measure for
//! which the level-k kernels obey `Pi_k(x,x) ~ (k/pi)^d`.
//!
//! Moment maps. A group element `t` acts on torus-weighted coordinates by
//! `z_j -> e^{-i w_j . t} z_j` and an SU(2) element acts by its defining
//! matrix; with these signs the contact-lift bookkeeping gives
//! `<Phi(z), xi> = i z* rho(xi) z` (per-factor unit vectors), which for a
//! torus is the quadratic moment `Phi_l = sum_j w_{jl} |z_j|^2`. Note that
//! `Phi` generates the lifted flow with respect to `d alpha = 2 omega`:
//! `d Phi^xi = 2 iota(xi_M) omega` in the normalization above.

use num_complex::Complex64;
use rand::Rng;

use crate::lie::{su2_algebra_matrix, GroupElement, GroupKind, GroupModel};
use crate::{Error, Result};

/// Heisenberg chart radius in coordinate norm.
pub const CHART_RADIUS: f64 = 0.5;

/// Default central-difference step for first derivatives (used with one
/// Richardson extrapolation step). Second derivatives of kernel data use
/// k-scaled steps instead; see the immersion module.
pub const FD_H1: f64 = 1e-4;

/// A product of projective spaces CP^{d_1} x ... with a symplectic scale.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedModel {
    /// Complex dimensions of the projective factors.
    pub factors: Vec<usize>,
    /// Multiplier on (omega, g) relative to the curvature normalization.
    /// Kernel machinery requires 1.
    pub scale: f64,
}

impl QuantizedModel {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|&d| d == 0) || factors.len() > 2 {
            return Err(Error::InvalidModel(format!(
                "factors {factors:?}: need 1 or 2 projective factors of dimension >= 1"
            )));
        }
        Ok(Self { factors, scale: 1.0 })
    }

    /// Total complex dimension d.
    pub fn dim_complex(&self) -> usize {
        self.factors.iter().sum()
    }

    /// Number of homogeneous coordinates per factor.
    pub fn coords_per_factor(&self) -> Vec<usize> {
        self.factors.iter().map(|&d| d + 1).collect()
    }

    pub fn num_coords(&self) -> usize {
        self.factors.iter().map(|&d| d + 1).sum()
    }

    /// Riemannian volume of the product of unit spheres,
    /// prod_i 2 pi^{d_i+1} / d_i!.
    pub fn total_sphere_volume(&self) -> f64 {
        self.factors
            .iter()
            .map(|&d| {
                2.0 * std::f64::consts::PI.powi(d as i32 + 1)
                    / (1..=d).map(|j| j as f64).product::<f64>()
            })
            .product()
    }
}

/// A point of the circle bundle: one unit vector per projective factor.
#[derive(Clone, Debug)]
pub struct SpherePoint {
    pub factors: Vec<Vec<Complex64>>,
}

impl SpherePoint {
    /// Builds a point, normalizing each factor. Rejects zero factors.
    pub fn new(model: &QuantizedModel, factors: Vec<Vec<Complex64>>) -> Result<Self> {
        let dims = model.coords_per_factor();
        if factors.len() != dims.len()
            || factors.iter().zip(&dims).any(|(f, &m)| f.len() != m)
        {
            return Err(Error::InvalidModel("coordinate tuple shape mismatch".into()));
        }
        let mut out = Vec::with_capacity(factors.len());
        for f in factors {
            let n = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n < 1e-14 {
                return Err(Error::InvalidModel("zero factor coordinates".into()));
            }
            out.push(f.into_iter().map(|z| z / n).collect());
        }
        Ok(Self { factors: out })
    }

    pub fn random<R: Rng>(model: &QuantizedModel, rng: &mut R) -> Self {
        let factors = model
            .coords_per_factor()
            .iter()
            .map(|&m| {
                (0..m)
                    .map(|_| {
                        Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
                    })
                    .collect()
            })
            .collect();
        Self::new(model, factors).expect("random point")
    }

    /// Structure circle action r_theta: the phase acts on the first factor.
    pub fn structure_phase(&self, theta: f64) -> SpherePoint {
        let mut out = self.clone();
        let ph = Complex64::from_polar(1.0, theta);
        for z in out.factors[0].iter_mut() {
            *z *= ph;
        }
        out
    }

    /// Hermitian inner products per factor, sum_j x_j conj(y_j).
    pub fn factor_inner(&self, other: &SpherePoint) -> Vec<Complex64> {
        self.factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y.conj()).sum())
            .collect()
    }

    pub fn norm_residual(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| (f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Fubini-Study distance of the underlying base points.
    pub fn base_distance(&self, other: &SpherePoint) -> f64 {
        self.factor_inner(other)
            .iter()
            .map(|ip| ip.norm().min(1.0).acos().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Riemannian distance on X. Only single-factor models, where X is
    /// exactly the round unit sphere.
    pub fn bundle_distance(&self, other: &SpherePoint) -> Result<f64> {
        if self.factors.len() != 1 {
            return Err(Error::InvalidModel(
                "bundle distance implemented for single-factor models only".into(),
            ));
        }
        let ip: Complex64 =
            self.factors[0].iter().zip(&other.factors[0]).map(|(x, y)| x * y.conj()).sum();
        Ok(ip.re.clamp(-1.0, 1.0).acos())
    }
}

/// Ambient representative of a tangent vector of M (horizontal lift):
/// per-factor components, each complex-orthogonal to the factor coordinates.
#[derive(Clone, Debug)]
pub struct Tangent {
    pub factors: Vec<Vec<Complex64>>,
}

impl Tangent {
    pub fn zero_like(x: &SpherePoint) -> Self {
        Self { factors: x.factors.iter().map(|f| vec![Complex64::new(0.0, 0.0); f.len()]).collect() }
    }

    pub fn inner(&self, other: &Tangent) -> Complex64 {
        self.factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>())
            .sum()
    }

    /// Riemannian metric g(u, v) = Re<u, v>.
    pub fn metric(&self, other: &Tangent) -> f64 {
        self.inner(other).re
    }

    /// Symplectic form omega(u, v) = -Im<u, v>.
    pub fn symplectic(&self, other: &Tangent) -> f64 {
        -self.inner(other).im
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.sqrt()
    }

    /// Complex structure J = multiplication by i.
    pub fn complex_structure(&self) -> Tangent {
        self.scale(Complex64::i())
    }

    pub fn scale(&self, c: Complex64) -> Tangent {
        Tangent {
            factors: self.factors.iter().map(|f| f.iter().map(|z| c * z).collect()).collect(),
        }
    }

    pub fn add_scaled(&self, c: Complex64, other: &Tangent) -> Tangent {
        Tangent {
            factors: self
                .factors
                .iter()
                .zip(&other.factors)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + c * y).collect())
                .collect(),
        }
    }

    /// Projects an ambient tuple to the horizontal space at x (removes the
    /// per-factor complex component along the coordinates).
    pub fn project_horizontal(ambient: &[Vec<Complex64>], x: &SpherePoint) -> Tangent {
        let factors = ambient
            .iter()
            .zip(&x.factors)
            .map(|(v, z)| {
                let ip: Complex64 = v.iter().zip(z).map(|(a, b)| a * b.conj()).sum();
                v.iter().zip(z).map(|(a, b)| a - ip * b).collect()
            })
            .collect();
        Tangent { factors }
    }
}

/// Heisenberg local chart centered at a point of X: a unitary horizontal
/// frame plus the structure phase. `chart_point(c, 0, theta)` is
/// `e^{i theta} x` and the frame normalizes the level kernels to the
/// near-diagonal Gaussian form (see the hardy module tests).
#[derive(Clone, Debug)]
pub struct HeisenbergChart {
    pub center: SpherePoint,
    pub frame: Vec<Tangent>,
    pub angle_origin: f64,
}

/// Canonical chart: completes each factor's coordinate vector to a unitary
/// basis by Gram-Schmidt over the standard basis, skipping near-parallel
/// pivots.
pub fn heisenberg_chart(x: &SpherePoint) -> HeisenbergChart {
    let mut frame = Vec::new();
    for (fi, z) in x.factors.iter().enumerate() {
        let m = z.len();
        let mut basis: Vec<Vec<Complex64>> = vec![z.clone()];
        for j in 0..m {
            if basis.len() == m {
                break;
            }
            let mut v: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); m];
            v[j] = Complex64::new(1.0, 0.0);
            for b in &basis {
                let ip: Complex64 = v.iter().zip(b).map(|(a, c)| a * c.conj()).sum();
                for (a, c) in v.iter_mut().zip(b) {
                    *a -= ip * c;
                }
            }
            let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if n > 0.3 {
                for a in v.iter_mut() {
                    *a /= n;
                }
                basis.push(v);
            }
        }
        for b in basis.into_iter().skip(1) {
            let mut t = Tangent::zero_like(x);
            t.factors[fi] = b;
            frame.push(t);
        }
    }
    HeisenbergChart { center: x.clone(), frame, angle_origin: 0.0 }
}

/// Chart with a caller-provided horizontal frame (orthonormality is
/// verified).
pub fn heisenberg_chart_with_frame(x: &SpherePoint, frame: Vec<Tangent>) -> Result<HeisenbergChart> {
    for (i, u) in frame.iter().enumerate() {
        for (j, v) in frame.iter().enumerate() {
            let ip = u.inner(v);
            let expect = if i == j { 1.0 } else { 0.0 };
            if (ip - expect).norm() > 1e-12 {
                return Err(Error::FrameDegenerate(format!(
                    "frame not unitary: <f_{i}, f_{j}> = {ip}"
                )));
            }
        }
        // orthogonality to the center's complex line, per factor
        for (uf, zf) in u.factors.iter().zip(&x.factors) {
            let ip: Complex64 = uf.iter().zip(zf).map(|(a, b)| a * b.conj()).sum();
            if ip.norm() > 1e-13 {
                return Err(Error::FrameDegenerate("frame vector not horizontal".into()));
            }
        }
    }
    Ok(HeisenbergChart { center: x.clone(), frame, angle_origin: 0.0 })
}

/// Random unitary horizontal frame (for frame-independence tests).
pub fn random_chart<R: Rng>(x: &SpherePoint, rng: &mut R) -> HeisenbergChart {
    let base = heisenberg_chart(x);
    let d = base.frame.len();
    // Random complex matrix, orthonormalized against the base frame.
    let mut new_frame: Vec<Tangent> = Vec::with_capacity(d);
    for _ in 0..d {
        let coeffs: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let mut v = Tangent::zero_like(x);
        for (c, f) in coeffs.iter().zip(&base.frame) {
            v = v.add_scaled(*c, f);
        }
        for b in &new_frame {
            let ip = v.inner(b);
            v = v.add_scaled(-ip, b);
        }
        let n = v.norm();
        v = v.scale(Complex64::new(1.0 / n, 0.0));
        new_frame.push(v);
    }
    HeisenbergChart { center: x.clone(), frame: new_frame, angle_origin: 0.0 }
}

/// The chart map x + (v, theta): displaces along the frame, renormalizes per
/// factor, applies the structure phase.
pub fn chart_point(chart: &HeisenbergChart, v: &[Complex64], theta: f64) -> Result<SpherePoint> {
    let vnorm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if vnorm > CHART_RADIUS {
        return Err(Error::ChartRadius { norm: vnorm, radius: CHART_RADIUS });
    }
    if v.len() != chart.frame.len() {
        return Err(Error::InvalidModel("chart displacement length mismatch".into()));
    }
    let mut displaced: Vec<Vec<Complex64>> = chart.center.factors.clone();
    for (c, f) in v.iter().zip(&chart.frame) {
        for (df, ff) in displaced.iter_mut().zip(&f.factors) {
            for (a, b) in df.iter_mut().zip(ff) {
                *a += c * b;
            }
        }
    }
    let mut out = Vec::with_capacity(displaced.len());
    for f in displaced {
        let n = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        out.push(f.into_iter().map(|z| z / n).collect::<Vec<_>>());
    }
    let p = SpherePoint { factors: out };
    Ok(p.structure_phase(theta + chart.angle_origin))
}

/// Fubini-Study structure matrices in the standard affine chart at a base
/// point, as real 2d x 2d matrices in the basis (e_1, i e_1, e_2, ...).
#[derive(Clone, Debug)]
pub struct FsStructures {
    pub omega: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub j: Vec<Vec<f64>>,
    /// Pivot coordinate used for the affine chart of each factor.
    pub pivots: Vec<usize>,
}

/// Computes (omega, g, J) at the base point of `x`. The Hermitian
/// coefficient matrix per factor is
/// `h_ab = scale * [delta_ab / (1+|w|^2) - conj(w_a) w_b / (1+|w|^2)^2]`
/// in affine coordinates `w` at the largest-modulus pivot.
pub fn fubini_study(model: &QuantizedModel, x: &SpherePoint) -> FsStructures {
    let d = model.dim_complex();
    let mut omega = vec![vec![0.0; 2 * d]; 2 * d];
    let mut g = vec![vec![0.0; 2 * d]; 2 * d];
    let mut j = vec![vec![0.0; 2 * d]; 2 * d];
    let mut pivots = Vec::new();
    let mut offset = 0usize; // complex coordinate offset into the chart
    for z in &x.factors {
        let m = z.len();
        let p = (0..m)
            .max_by(|&a, &b| z[a].norm().partial_cmp(&z[b].norm()).unwrap())
            .unwrap();
        pivots.push(p);
        let w: Vec<Complex64> = (0..m).filter(|&a| a != p).map(|a| z[a] / z[p]).collect();
        let df = m - 1;
        let w2 = 1.0 + w.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let mut h = vec![vec![Complex64::new(0.0, 0.0); df]; df];
        for a in 0..df {
            for b in 0..df {
                let mut v = -w[a].conj() * w[b] / (w2 * w2);
                if a == b {
                    v += 1.0 / w2;
                }
                h[a][b] = model.scale * v;
            }
        }
        // s(u, v) = sum h_ab u_a conj(v_b); g = Re s, omega = -Im s.
        let basis = |idx: usize| -> Vec<Complex64> {
            let mut u = vec![Complex64::new(0.0, 0.0); df];
            u[idx / 2] = if idx % 2 == 0 { Complex64::new(1.0, 0.0) } else { Complex64::i() };
            u
        };
        for a in 0..2 * df {
            for b in 0..2 * df {
                let (ua, ub) = (basis(a), basis(b));
                let mut s = Complex64::new(0.0, 0.0);
                for (r, hr) in h.iter().enumerate() {
                    for (c, hv) in hr.iter().enumerate() {
                        s += hv * ua[r] * ub[c].conj();
                    }
                }
                g[2 * offset + a][2 * offset + b] = s.re;
                omega[2 * offset + a][2 * offset + b] = -s.im;
            }
        }
        for a in 0..df {
            let re = 2 * (offset + a);
            j[re + 1][re] = 1.0;
            j[re][re + 1] = -1.0;
        }
        offset += df;
    }
    FsStructures { omega, g, j, pivots }
}

/// How the group acts on one projective factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ActionBlock {
    /// Integer weight row per homogeneous coordinate (torus groups).
    Torus(Vec<Vec<i64>>),
    /// Defining representation of SU(2); the factor must be a CP^1.
    Su2Defining,
    /// The group fixes the factor pointwise.
    Trivial,
}

/// A linear (unitary) group action on the model together with the
/// linearization shift. Torus elements act by
/// `z_j -> e^{-i w~_j . t} z_j` with effective weights
/// `w~_j = w_j + shift` on the first factor; SU(2) elements act by their
/// defining matrix on the designated CP^1 factor.
#[derive(Clone, Debug)]
pub struct LinearAction {
    pub group: GroupModel,
    pub model: QuantizedModel,
    pub blocks: Vec<ActionBlock>,
    pub shift: Vec<i64>,
    min_moment_norm: f64,
}

impl LinearAction {
    /// Validates shapes, applies the shift, and checks Assumption
    /// 0 not-in Phi(M) by minimizing |Phi| over a dense simplex grid.
    pub fn new(
        group: GroupModel,
        model: QuantizedModel,
        blocks: Vec<ActionBlock>,
        shift: Vec<i64>,
    ) -> Result<Self> {
        if blocks.len() != model.factors.len() {
            return Err(Error::InvalidAction("one action block per factor required".into()));
        }
        let rank = group.rank();
        if shift.len() != rank {
            return Err(Error::InvalidAction(format!("shift needs {rank} components")));
        }
        match group.kind {
            GroupKind::Torus(_) => {
                for (b, &df) in blocks.iter().zip(&model.factors) {
                    match b {
                        ActionBlock::Torus(rows) => {
                            if rows.len() != df + 1 || rows.iter().any(|r| r.len() != rank) {
                                return Err(Error::InvalidAction(
                                    "weight matrix shape mismatch".into(),
                                ));
                            }
                        }
                        ActionBlock::Trivial => {}
                        ActionBlock::Su2Defining => {
                            return Err(Error::InvalidAction(
                                "SU(2) block under a torus group".into(),
                            ));
                        }
                    }
                }
            }
            GroupKind::Su2 => {
                if shift.iter().any(|&s| s != 0) {
                    return Err(Error::InvalidAction(
                        "SU(2) admits no nontrivial linearization character".into(),
                    ));
                }
                let defining: Vec<usize> = blocks
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| matches!(b, ActionBlock::Su2Defining))
                    .map(|(i, _)| i)
                    .collect();
                if defining.len() != 1 || model.factors[defining[0]] != 1 {
                    return Err(Error::InvalidAction(
                        "SU(2) actions: exactly one defining block on a CP^1 factor".into(),
                    ));
                }
                if blocks.iter().any(|b| matches!(b, ActionBlock::Torus(_))) {
                    return Err(Error::InvalidAction("torus block under SU(2)".into()));
                }
            }
        }
        let mut action =
            Self { group, model, blocks, shift, min_moment_norm: 0.0 };
        let min_norm = action.minimize_moment_norm();
        if min_norm < 1e-9 {
            return Err(Error::MomentMapVanishes { min_norm });
        }
        action.min_moment_norm = min_norm;
        Ok(action)
    }

    /// Effective weight rows (shift folded into the first factor), one per
    /// global coordinate; zero rows for non-torus blocks.
    pub fn effective_weights(&self) -> Vec<Vec<i64>> {
        let rank = self.group.rank();
        let mut rows = Vec::with_capacity(self.model.num_coords());
        for (fi, (block, &df)) in self.blocks.iter().zip(&self.model.factors).enumerate() {
            for c in 0..=df {
                let mut row = match block {
                    ActionBlock::Torus(w) => w[c].clone(),
                    _ => vec![0; rank],
                };
                if fi == 0 {
                    for (r, s) in row.iter_mut().zip(&self.shift) {
                        *r += s;
                    }
                }
                rows.push(row);
            }
        }
        rows
    }

    pub fn min_moment_norm(&self) -> f64 {
        self.min_moment_norm
    }

    fn su2_factor(&self) -> Option<usize> {
        self.blocks.iter().position(|b| matches!(b, ActionBlock::Su2Defining))
    }

    /// Moment map coordinates in the dual reference basis,
    /// `<Phi(z), xi> = i z* rho(xi) z`.
    pub fn moment_map(&self, z: &SpherePoint) -> Vec<f64> {
        match self.group.kind {
            GroupKind::Torus(r) => {
                let weights = self.effective_weights();
                let mut phi = vec![0.0; r];
                let mut idx = 0;
                for f in &z.factors {
                    for c in f {
                        let a = c.norm_sqr();
                        for l in 0..r {
                            phi[l] += weights[idx][l] as f64 * a;
                        }
                        idx += 1;
                    }
                }
                phi
            }
            GroupKind::Su2 => {
                let fi = self.su2_factor().expect("validated");
                let zf = &z.factors[fi];
                // Phi_a = (1/2) z* sigma_a z
                vec![
                    (zf[0].conj() * zf[1]).re,
                    (zf[0].conj() * zf[1]).im,
                    0.5 * (zf[0].norm_sqr() - zf[1].norm_sqr()),
                ]
            }
        }
    }

    /// phi-dual norm of the moment value.
    pub fn moment_norm(&self, z: &SpherePoint) -> f64 {
        self.group.covector_norm(&self.moment_map(z))
    }

    /// Group action on bundle points.
    pub fn act(&self, g: &GroupElement, x: &SpherePoint) -> SpherePoint {
        match self.group.kind {
            GroupKind::Torus(r) => {
                let weights = self.effective_weights();
                let mut out = x.clone();
                let mut idx = 0;
                for f in out.factors.iter_mut() {
                    for c in f.iter_mut() {
                        let phase: f64 =
                            (0..r).map(|l| -(weights[idx][l] as f64) * g.angles[l]).sum();
                        *c *= Complex64::from_polar(1.0, phase);
                        idx += 1;
                    }
                }
                out
            }
            GroupKind::Su2 => {
                let fi = self.su2_factor().expect("validated");
                let u = g.su2_matrix();
                let mut out = x.clone();
                let zf = &x.factors[fi];
                out.factors[fi] = vec![
                    u[0][0] * zf[0] + u[0][1] * zf[1],
                    u[1][0] * zf[0] + u[1][1] * zf[1],
                ];
                out
            }
        }
    }

    /// Ambient generator field of xi at z (the derivative of the action
    /// along exp(t xi), not projected).
    pub fn infinitesimal(&self, xi: &[f64], z: &SpherePoint) -> Vec<Vec<Complex64>> {
        match self.group.kind {
            GroupKind::Torus(r) => {
                let weights = self.effective_weights();
                let mut out = Vec::with_capacity(z.factors.len());
                let mut idx = 0;
                for f in &z.factors {
                    let mut vf = Vec::with_capacity(f.len());
                    for c in f {
                        let rate: f64 = (0..r).map(|l| weights[idx][l] as f64 * xi[l]).sum();
                        vf.push(Complex64::new(0.0, -rate) * c);
                        idx += 1;
                    }
                    out.push(vf);
                }
                out
            }
            GroupKind::Su2 => {
                let fi = self.su2_factor().expect("validated");
                let m = su2_algebra_matrix(xi);
                let mut out: Vec<Vec<Complex64>> = z
                    .factors
                    .iter()
                    .map(|f| vec![Complex64::new(0.0, 0.0); f.len()])
                    .collect();
                let zf = &z.factors[fi];
                out[fi] = vec![
                    m[0][0] * zf[0] + m[0][1] * zf[1],
                    m[1][0] * zf[0] + m[1][1] * zf[1],
                ];
                out
            }
        }
    }

    /// The vector field xi_M at the base point of z (horizontal lift
    /// representative).
    pub fn val_m(&self, xi: &[f64], z: &SpherePoint) -> Tangent {
        Tangent::project_horizontal(&self.infinitesimal(xi, z), z)
    }

    /// Directional derivative of the moment map along an ambient tangent
    /// tuple (exact formulas).
    pub fn moment_derivative(&self, z: &SpherePoint, u: &Tangent) -> Vec<f64> {
        match self.group.kind {
            GroupKind::Torus(r) => {
                let weights = self.effective_weights();
                let mut out = vec![0.0; r];
                let mut idx = 0;
                for (f, uf) in z.factors.iter().zip(&u.factors) {
                    for (c, du) in f.iter().zip(uf) {
                        let v = 2.0 * (du * c.conj()).re;
                        for l in 0..r {
                            out[l] += weights[idx][l] as f64 * v;
                        }
                        idx += 1;
                    }
                }
                out
            }
            GroupKind::Su2 => {
                let fi = self.su2_factor().expect("validated");
                let zf = &z.factors[fi];
                let uf = &u.factors[fi];
                let pair = |sx: [[Complex64; 2]; 2]| -> f64 {
                    let sz = [sx[0][0] * zf[0] + sx[0][1] * zf[1], sx[1][0] * zf[0] + sx[1][1] * zf[1]];
                    (uf[0].conj() * sz[0] + uf[1].conj() * sz[1]).re
                };
                let o = Complex64::new(0.0, 0.0);
                let one = Complex64::new(1.0, 0.0);
                let i = Complex64::i();
                vec![
                    pair([[o, one], [one, o]]),
                    pair([[o, -i], [i, o]]),
                    pair([[one, o], [o, -one]]),
                ]
            }
        }
    }

    /// Smallest singular value of the evaluation map on X,
    /// xi -> xi_X(x); a positive value certifies a free action at x.
    pub fn free_action_margin(&self, x: &SpherePoint) -> f64 {
        let dim_g = self.group.dim_g();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim_g);
        for a in 0..dim_g {
            let mut xi = vec![0.0; dim_g];
            xi[a] = 1.0;
            cols.push(flatten_ambient(&self.infinitesimal(&xi, x)));
        }
        // For product models, X quotients the per-factor phase torus by the
        // anti-diagonal circles; project those directions out.
        let n_f = x.factors.len();
        let mut quotient_dirs: Vec<Vec<f64>> = Vec::new();
        for f in 1..n_f {
            let mut amb: Vec<Vec<Complex64>> =
                x.factors.iter().map(|zf| vec![Complex64::new(0.0, 0.0); zf.len()]).collect();
            for (a, b) in amb[0].iter_mut().zip(&x.factors[0]) {
                *a = Complex64::i() * b;
            }
            for (a, b) in amb[f].iter_mut().zip(&x.factors[f]) {
                *a = -Complex64::i() * b;
            }
            quotient_dirs.push(flatten_ambient(&amb));
        }
        for q in &quotient_dirs {
            let qn: f64 = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            for col in cols.iter_mut() {
                let dot: f64 = col.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / (qn * qn);
                for (c, qv) in col.iter_mut().zip(q) {
                    *c -= dot * qv;
                }
            }
        }
        smallest_singular_value(&cols)
    }

    fn minimize_moment_norm(&self) -> f64 {
        match self.group.kind {
            GroupKind::Torus(_) => {
                // |Phi| over products of simplices; grid search over each
                // factor simplex.
                let weights = self.effective_weights();
                let rank = self.group.rank();
                let offsets: Vec<usize> = {
                    let mut off = vec![0];
                    for &m in &self.model.coords_per_factor() {
                        off.push(off.last().unwrap() + m);
                    }
                    off
                };
                let grids: Vec<Vec<Vec<f64>>> = self
                    .model
                    .coords_per_factor()
                    .iter()
                    .map(|&m| simplex_grid(m, 24))
                    .collect();
                let mut best = f64::INFINITY;
                let mut stack = vec![vec![0.0; rank]];
                for (fi, grid) in grids.iter().enumerate() {
                    let mut next = Vec::with_capacity(stack.len() * grid.len());
                    for acc in &stack {
                        for tau in grid {
                            let mut phi = acc.clone();
                            for (c, t) in tau.iter().enumerate() {
                                for l in 0..rank {
                                    phi[l] += weights[offsets[fi] + c][l] as f64 * t;
                                }
                            }
                            next.push(phi);
                        }
                    }
                    stack = next;
                }
                for phi in &stack {
                    let n = self.group.covector_norm(phi);
                    if n < best {
                        best = n;
                    }
                }
                best
            }
            GroupKind::Su2 => {
                // |Phi| = 1/2 |Bloch| = 1/(2 sqrt(phi_scale)), constant for
                // the defining block; confirmed on a small grid.
                let mut best = f64::INFINITY;
                let fi = self.su2_factor().expect("validated");
                for i in 0..16 {
                    let a = i as f64 / 15.0;
                    for p in 0..8 {
                        let ph = 2.0 * std::f64::consts::PI * p as f64 / 8.0;
                        let mut factors: Vec<Vec<Complex64>> = self
                            .model
                            .coords_per_factor()
                            .iter()
                            .map(|&m| {
                                let mut v = vec![Complex64::new(0.0, 0.0); m];
                                v[0] = Complex64::new(1.0, 0.0);
                                v
                            })
                            .collect();
                        factors[fi] = vec![
                            Complex64::new((1.0 - a).sqrt(), 0.0),
                            Complex64::from_polar(a.sqrt(), ph),
                        ];
                        let z = SpherePoint::new(&self.model, factors).unwrap();
                        best = best.min(self.moment_norm(&z));
                    }
                }
                best
            }
        }
    }
}

/// Barycentric grid on the (m-1)-simplex with `res` subdivisions.
fn simplex_grid(m: usize, res: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; m];
    fn rec(m: usize, res: usize, pos: usize, left: usize, idx: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if pos == m - 1 {
            idx[pos] = left;
            out.push(idx.iter().map(|&i| i as f64 / res as f64).collect());
            return;
        }
        for i in 0..=left {
            idx[pos] = i;
            rec(m, res, pos + 1, left - i, idx, out);
        }
    }
    rec(m, res, 0, res, &mut idx, &mut out);
    out
}

pub(crate) fn flatten_ambient(amb: &[Vec<Complex64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for f in amb {
        for c in f {
            out.push(c.re);
            out.push(c.im);
        }
    }
    out
}

/// Smallest singular value of the matrix with the given columns.
pub(crate) fn smallest_singular_value(cols: &[Vec<f64>]) -> f64 {
    if cols.is_empty() {
        return 0.0;
    }
    let rows = cols[0].len();
    let m = nalgebra::DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
    let svd = m.svd(false, false);
    svd.singular_values.iter().fold(f64::INFINITY, |a, &b| a.min(b))
}
