//! Hardy spaces on the model sphere bundles: monomial sections, level
//! kernels in closed form, isotype bases H(X)_{k nu}, and the equivariant
//! kernel computed by two independent routes (orthonormal basis sum and
//! character-weighted Haar quadrature).
//!
//! With the L^2 structure of the geometry module (round measure over 2 pi
//! per factor) the monomial z^alpha on a CP^d factor at level n = |alpha|
//! has `||z^alpha||^2 = pi^d alpha! / (n+d)!`, and the level-k kernel is
//!
//! ```text
//! Pi_k(x, y) = prod_factors (k+d)! / (k! pi^d) <x, y>^k .
//! ```
//!
//! Isotypes are taken across all structure-circle levels: a monomial of
//! common per-factor level n and torus weight `sum_j alpha_j w~_j` belongs
//! to H(X)_{k nu} iff its weight equals k nu. For SU(2) the level splits
//! into weight spaces and the isotype multiplicity comes from weight counts;
//! for the supported defining-block actions a level is either disjoint from
//! the isotype or entirely contained in it.

use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use crate::geometry::{LinearAction, QuantizedModel, SpherePoint};
use crate::lie::{character, weyl_dimension, GroupKind, HaarQuadrature, RuleKind, WeightVector};
use crate::{Error, Result};

/// Haar normalization used in the character-route projector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HaarConvention {
    /// Probability Haar (total mass 1); the convention under which
    /// `d_nu int conj(chi) rho dV` is a projection.
    Probability,
    /// phi-induced Haar (total mass vol_phi(G)).
    PhiInduced,
}

/// A monomial section of the Hardy space, L^2-normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialSection {
    /// Global multi-index across all factor coordinates.
    pub alpha: Vec<u64>,
    /// Common per-factor level n.
    pub level: u64,
    /// ln of the squared L^2 norm of the raw monomial.
    pub log_norm_sq: f64,
    /// Torus weight of the section (None for SU(2) actions).
    pub weight: Option<Vec<i64>>,
}

impl MonomialSection {
    pub fn new(model: &QuantizedModel, alpha: Vec<u64>) -> Result<Self> {
        let dims = model.coords_per_factor();
        if alpha.len() != model.num_coords() {
            return Err(Error::InvalidModel("multi-index length mismatch".into()));
        }
        let mut offset = 0;
        let mut level: Option<u64> = None;
        let mut log_norm_sq = 0.0;
        for (&m, &d) in dims.iter().zip(&model.factors) {
            let part = &alpha[offset..offset + m];
            let n: u64 = part.iter().sum();
            if let Some(l) = level {
                if l != n {
                    return Err(Error::InvalidModel(
                        "per-factor levels must agree on the product bundle".into(),
                    ));
                }
            }
            level = Some(n);
            log_norm_sq += d as f64 * std::f64::consts::PI.ln()
                + part.iter().map(|&a| ln_gamma(a as f64 + 1.0)).sum::<f64>()
                - ln_gamma((n + d as u64) as f64 + 1.0);
            offset += m;
        }
        Ok(Self { alpha, level: level.unwrap(), log_norm_sq, weight: None })
    }

    /// Evaluates the normalized section at a bundle point (log-gamma
    /// arithmetic, stable through k ~ 2000).
    pub fn eval(&self, x: &SpherePoint) -> Complex64 {
        let mut log_sum = Complex64::new(-0.5 * self.log_norm_sq, 0.0);
        let mut idx = 0;
        for f in &x.factors {
            for z in f {
                let a = self.alpha[idx];
                idx += 1;
                if a == 0 {
                    continue;
                }
                if z.norm_sqr() == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                log_sum += (a as f64) * z.ln();
            }
        }
        log_sum.exp()
    }
}

/// Orthonormal basis of the isotype H(X)_{k nu}.
#[derive(Clone, Debug)]
pub struct IsotypeBasis {
    pub nu: WeightVector,
    pub k: u64,
    pub members: Vec<MonomialSection>,
}

impl IsotypeBasis {
    pub fn dimension(&self) -> usize {
        self.members.len()
    }

    /// Distinct structure-circle levels present, ascending.
    pub fn levels(&self) -> Vec<u64> {
        let mut out: Vec<u64> = Vec::new();
        for m in &self.members {
            if out.last() != Some(&m.level) {
                out.push(m.level);
            }
        }
        out
    }

    pub fn max_level(&self) -> u64 {
        self.members.iter().map(|m| m.level).max().unwrap_or(0)
    }
}

/// Upper bound for the structure-circle levels that can meet the k nu
/// isotype, from ||sum alpha w~|| >= n * min |Phi|.
pub fn level_bound(action: &LinearAction, nu: &WeightVector, k: u64) -> usize {
    let target_norm = action.group.covector_norm(
        &nu.scaled(k).iter().map(|&c| c as f64).collect::<Vec<_>>(),
    );
    let c0 = 0.8 * action.min_moment_norm();
    ((target_norm / c0).ceil() as usize).max(4) + 2
}

/// Builds the isotype basis by level enumeration. `level_filter` optionally
/// restricts the admitted levels (sensitivity analysis hook). Fails loudly
/// if the enumeration bound is exceeded.
pub fn isotype_basis(
    action: &LinearAction,
    nu: &WeightVector,
    k: u64,
    level_filter: Option<(u64, u64)>,
) -> Result<IsotypeBasis> {
    let model = &action.model;
    let bound = level_bound(action, nu, k);
    if bound > 200_000 {
        return Err(Error::EnumerationBound { bound });
    }
    let admit = |n: u64| level_filter.map_or(true, |(lo, hi)| n >= lo && n <= hi);
    let mut members = Vec::new();
    match action.group.kind {
        GroupKind::Torus(_) => {
            let weights = action.effective_weights();
            let target = nu.scaled(k);
            for n in 0..=bound as u64 {
                if !admit(n) {
                    continue;
                }
                for alpha in enumerate_weighted_monomials(model, &weights, &target, n) {
                    let mut s = MonomialSection::new(model, alpha)?;
                    s.weight = Some(target.clone());
                    members.push(s);
                }
            }
        }
        GroupKind::Su2 => {
            let n_nu = nu.components[0] as u64;
            for n in 0..=bound as u64 {
                if !admit(n) {
                    continue;
                }
                let mult = su2_level_multiplicity(model, action, n, k * n_nu);
                if mult == 0 {
                    continue;
                }
                let level_dim = level_dimension(model, n);
                let d_knu = weyl_dimension(&action.group, nu, k)? as usize;
                if mult * d_knu != level_dim {
                    return Err(Error::InvalidAction(format!(
                        "level {n}: partial SU(2) isotype (mult {mult} of {level_dim}) unsupported"
                    )));
                }
                for alpha in enumerate_level(model, n) {
                    members.push(MonomialSection::new(model, alpha)?);
                }
            }
        }
    }
    Ok(IsotypeBasis { nu: nu.clone(), k, members })
}

/// Multiplicity of the SU(2) irrep with highest weight `m` inside the level
/// space H_n, from integer weight counts: mult = c_m - c_{m+2} where c_w
/// counts weight-w monomial T-eigenvectors.
fn su2_level_multiplicity(model: &QuantizedModel, action: &LinearAction, n: u64, m: u64) -> usize {
    let fi = action
        .blocks
        .iter()
        .position(|b| matches!(b, crate::geometry::ActionBlock::Su2Defining))
        .expect("validated");
    // weights of the defining-factor monomials z0^a z1^b: b - a
    let count = |w: i64| -> usize {
        // a + b = n, b - a = w  =>  b = (n + w)/2
        let nw = n as i64 + w;
        if nw < 0 || nw % 2 != 0 || nw / 2 > n as i64 {
            0
        } else {
            1
        }
    };
    let trivial_dim: usize = model
        .factors
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != fi)
        .map(|(_, &d)| binomial(n + d as u64, d as u64))
        .product();
    (count(m as i64) - count(m as i64 + 2)) * trivial_dim
}

/// dim of the level-n space (degree-(n,..,n) monomials).
pub fn level_dimension(model: &QuantizedModel, n: u64) -> usize {
    model.factors.iter().map(|&d| binomial(n + d as u64, d as u64)).product()
}

fn binomial(n: u64, k: u64) -> usize {
    let mut out = 1u64;
    for j in 0..k {
        out = out * (n - j) / (j + 1);
    }
    out as usize
}

/// All global multi-indices of common level n (per-factor degree n),
/// lexicographic.
pub fn enumerate_level(model: &QuantizedModel, n: u64) -> Vec<Vec<u64>> {
    let dims = model.coords_per_factor();
    let mut out: Vec<Vec<u64>> = vec![Vec::new()];
    for &m in &dims {
        let comps = compositions(n, m);
        let mut next = Vec::with_capacity(out.len() * comps.len());
        for head in &out {
            for c in &comps {
                let mut v = head.clone();
                v.extend_from_slice(c);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn compositions(n: u64, m: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = vec![0u64; m];
    fn rec(n: u64, m: usize, pos: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if pos == m - 1 {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for i in 0..=left {
            cur[pos] = i;
            rec(n, m, pos + 1, left - i, cur, out);
        }
    }
    rec(n, m, 0, n, &mut cur, &mut out);
    out
}

/// Multi-indices of common level n with torus weight exactly `target`.
/// Recursion over coordinates with interval pruning on the reachable weight.
fn enumerate_weighted_monomials(
    model: &QuantizedModel,
    weights: &[Vec<i64>],
    target: &[i64],
    n: u64,
) -> Vec<Vec<u64>> {
    let rank = target.len();
    let dims = model.coords_per_factor();
    // suffix min/max of each weight component within each factor
    let mut offsets = vec![0usize];
    for &m in &dims {
        offsets.push(offsets.last().unwrap() + m);
    }
    let mut out = Vec::new();
    let mut alpha = vec![0u64; weights.len()];
    let mut acc = vec![0i64; rank];

    struct Ctx<'a> {
        weights: &'a [Vec<i64>],
        target: &'a [i64],
        dims: &'a [usize],
        offsets: &'a [usize],
        rank: usize,
        n: u64,
    }

    fn reachable(ctx: &Ctx, fi: usize, pos: usize, left: u64, acc: &[i64]) -> bool {
        // interval check: remaining degrees (left in factor fi, n in later
        // factors) times coordinate weight ranges must cover target - acc
        for l in 0..ctx.rank {
            let mut lo = acc[l];
            let mut hi = acc[l];
            let mut add = |cnt: u64, range: (i64, i64)| {
                lo += cnt as i64 * range.0;
                hi += cnt as i64 * range.1;
            };
            let range_of = |a: usize, b: usize| -> (i64, i64) {
                let mut mn = i64::MAX;
                let mut mx = i64::MIN;
                for j in a..b {
                    mn = mn.min(ctx.weights[j][l]);
                    mx = mx.max(ctx.weights[j][l]);
                }
                if mn > mx {
                    (0, 0)
                } else {
                    (mn, mx)
                }
            };
            if pos < ctx.offsets[fi + 1] {
                add(left, range_of(pos, ctx.offsets[fi + 1]));
            }
            for f2 in fi + 1..ctx.dims.len() {
                add(ctx.n, range_of(ctx.offsets[f2], ctx.offsets[f2 + 1]));
            }
            if ctx.target[l] < lo || ctx.target[l] > hi {
                return false;
            }
        }
        true
    }

    fn rec(
        ctx: &Ctx,
        fi: usize,
        pos: usize,
        left: u64,
        alpha: &mut Vec<u64>,
        acc: &mut Vec<i64>,
        out: &mut Vec<Vec<u64>>,
    ) {
        if fi == ctx.dims.len() {
            if acc == ctx.target {
                out.push(alpha.clone());
            }
            return;
        }
        if !reachable(ctx, fi, pos, left, acc) {
            return;
        }
        let last_of_factor = pos + 1 == ctx.offsets[fi + 1];
        let choices = if last_of_factor { left..=left } else { 0..=left };
        for a in choices {
            alpha[pos] = a;
            for l in 0..ctx.rank {
                acc[l] += a as i64 * ctx.weights[pos][l];
            }
            if last_of_factor {
                rec(ctx, fi + 1, pos + 1, ctx.n, alpha, acc, out);
            } else {
                rec(ctx, fi, pos + 1, left - a, alpha, acc, out);
            }
            for l in 0..ctx.rank {
                acc[l] -= a as i64 * ctx.weights[pos][l];
            }
            alpha[pos] = 0;
        }
    }

    let ctx = Ctx { weights, target, dims: &dims, offsets: &offsets, rank, n };
    rec(&ctx, 0, 0, n, &mut alpha, &mut acc, &mut out);
    out
}

/// Level-k Szego kernel in closed form,
/// `prod_factors (k+d)!/(k! pi^d) <x_f, y_f>^k`.
pub fn szego_level_kernel(
    model: &QuantizedModel,
    k: u64,
    x: &SpherePoint,
    y: &SpherePoint,
) -> Complex64 {
    let mut out = Complex64::new(1.0, 0.0);
    for ((&d, xf), yf) in model.factors.iter().zip(&x.factors).zip(&y.factors) {
        let ip: Complex64 = xf.iter().zip(yf).map(|(a, b)| a * b.conj()).sum();
        let mut c = 1.0;
        for j in 1..=d as u64 {
            c *= (k + j) as f64;
        }
        c /= std::f64::consts::PI.powi(d as i32);
        out *= c * complex_power(ip, k);
    }
    out
}

fn complex_power(z: Complex64, k: u64) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if z.norm_sqr() == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    (Complex64::new(k as f64, 0.0) * z.ln()).exp()
}

/// Level kernel as an explicit orthonormal monomial sum (oracle route for
/// the closed form; small k only).
pub fn szego_level_kernel_basis_sum(
    model: &QuantizedModel,
    k: u64,
    x: &SpherePoint,
    y: &SpherePoint,
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for alpha in enumerate_level(model, k) {
        let s = MonomialSection::new(model, alpha)?;
        acc += s.eval(x) * s.eval(y).conj();
    }
    Ok(acc)
}

/// Equivariant kernel as the orthonormal-basis sum
/// `Pi_{k nu}(x, y) = sum_j s_j(x) conj(s_j(y))`.
pub fn equivariant_kernel(basis: &IsotypeBasis, x: &SpherePoint, y: &SpherePoint) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for s in &basis.members {
        acc += s.eval(x) * s.eval(y).conj();
    }
    acc
}

/// Exact-quadrature degree required by the character route.
pub fn required_character_degree(
    action: &LinearAction,
    nu: &WeightVector,
    k: u64,
    max_level: u64,
) -> usize {
    match action.group.kind {
        GroupKind::Torus(r) => {
            let weights = action.effective_weights();
            let knu = nu.scaled(k);
            let mut need = 0usize;
            for l in 0..r {
                let w_max =
                    weights.iter().map(|row| row[l].unsigned_abs()).max().unwrap_or(0);
                need = need.max((max_level * w_max + knu[l].unsigned_abs()) as usize);
            }
            need
        }
        GroupKind::Su2 => (k * nu.components[0] as u64 + max_level) as usize,
    }
}

/// Equivariant kernel by character-weighted group quadrature of the Szego
/// kernel,
/// `Pi_{k nu}(x,y) = d_{k nu} int conj(chi_{k nu}(g)) Pi(mu_{g^-1} x, y) dV(g)`,
/// with `Pi` truncated exactly to the levels meeting the isotype. This is
/// the independent cross-validation route.
pub fn equivariant_kernel_by_characters(
    action: &LinearAction,
    nu: &WeightVector,
    k: u64,
    x: &SpherePoint,
    y: &SpherePoint,
    rule: &HaarQuadrature,
    convention: HaarConvention,
) -> Result<Complex64> {
    let basis = isotype_basis(action, nu, k, None)?;
    let levels = basis.levels();
    let max_level = basis.max_level();
    let need = required_character_degree(action, nu, k, max_level);
    if rule.exact_degree < need {
        return Err(Error::QuadratureDegree { have: rule.exact_degree, need });
    }
    if matches!(action.group.kind, GroupKind::Su2) && rule.kind != RuleKind::Su2Full {
        return Err(Error::QuadratureDegree { have: 0, need });
    }
    let group = &action.group;
    let model = &action.model;
    let d_knu = weyl_dimension(group, nu, k)? as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for (node, w) in rule.nodes.iter().zip(&rule.weights) {
        let gx = action.act(&node.inverse(group), x);
        let mut pi = Complex64::new(0.0, 0.0);
        for &n in &levels {
            pi += szego_level_kernel(model, n, &gx, y);
        }
        acc += *w * character(group, nu, k, node).conj() * pi;
    }
    let scale = match convention {
        HaarConvention::Probability => 1.0,
        HaarConvention::PhiInduced => group.volume_g(),
    };
    Ok(d_knu * scale * acc)
}

/// Isotype dimension by both routes; they must agree exactly after
/// rounding.
pub fn isotype_dimension(action: &LinearAction, nu: &WeightVector, k: u64) -> Result<usize> {
    let by_enum = isotype_basis(action, nu, k, None)?.dimension();
    let by_char = isotype_dimension_by_characters(action, nu, k)?;
    if by_enum != by_char {
        return Err(Error::DimensionMismatch { enumeration: by_enum, character: by_char });
    }
    Ok(by_enum)
}

/// Character-quadrature dimension:
/// `dim = d_{k nu} sum_n int conj(chi_{k nu}) Tr rho|_{H_n} dV`,
/// levels bounded by the moment positivity bound (independent of the
/// enumeration route).
pub fn isotype_dimension_by_characters(
    action: &LinearAction,
    nu: &WeightVector,
    k: u64,
) -> Result<usize> {
    let group = &action.group;
    let model = &action.model;
    let bound = level_bound(action, nu, k) as u64;
    let need = required_character_degree(action, nu, k, bound);
    let rule = crate::lie::haar_quadrature(group, need);
    let d_knu = weyl_dimension(group, nu, k)? as f64;
    let dims = model.coords_per_factor();
    let weights = action.effective_weights();
    let mut total = Complex64::new(0.0, 0.0);
    for (node, w) in rule.nodes.iter().zip(&rule.weights) {
        // trace of rho(node) on each level, summed over levels <= bound
        let tr_levels: Vec<Complex64> = match group.kind {
            GroupKind::Torus(r) => {
                // per factor, cumulative complete homogeneous sums of the
                // coordinate phases e^{i w~_j . t}
                let mut per_level = vec![Complex64::new(1.0, 0.0); bound as usize + 1];
                let mut idx = 0;
                for &m in &dims {
                    let mut h = vec![Complex64::new(0.0, 0.0); bound as usize + 1];
                    h[0] = Complex64::new(1.0, 0.0);
                    for _ in 0..m {
                        let phase: f64 =
                            (0..r).map(|l| weights[idx][l] as f64 * node.angles[l]).sum();
                        let xj = Complex64::from_polar(1.0, phase);
                        for lev in 1..h.len() {
                            let inc = xj * h[lev - 1];
                            h[lev] += inc;
                        }
                        idx += 1;
                    }
                    for (p, hv) in per_level.iter_mut().zip(&h) {
                        *p *= hv;
                    }
                }
                per_level
            }
            GroupKind::Su2 => {
                let theta = node.conjugacy_angle(group);
                let fi = action
                    .blocks
                    .iter()
                    .position(|b| matches!(b, crate::geometry::ActionBlock::Su2Defining))
                    .expect("validated");
                (0..=bound)
                    .map(|n| {
                        let mut tr = Complex64::new(0.0, 0.0);
                        for a in 0..=n {
                            let wgt = n as i64 - 2 * a as i64;
                            tr += Complex64::from_polar(1.0, wgt as f64 * theta);
                        }
                        let trivial: usize = model
                            .factors
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != fi)
                            .map(|(_, &d)| binomial(n + d as u64, d as u64))
                            .product();
                        tr * trivial as f64
                    })
                    .collect()
            }
        };
        let tr_sum: Complex64 = tr_levels.iter().sum();
        total += *w * character(group, nu, k, node).conj() * tr_sum;
    }
    let val = (d_knu * total).re;
    let rounded = val.round();
    if (val - rounded).abs() > 1e-6 || rounded < -0.5 {
        return Err(Error::DimensionMismatch {
            enumeration: usize::MAX,
            character: val as usize,
        });
    }
    Ok(rounded as usize)
}

/// Product quadrature on the model sphere bundle, exact for pairs of
/// monomials with per-factor level <= `max_level`, against the L^2(X)
/// measure of the geometry module.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub nodes: Vec<SpherePoint>,
    pub weights: Vec<f64>,
}

pub fn sphere_quadrature(model: &QuantizedModel, max_level: usize) -> SphereRule {
    let l = max_level.max(1);
    // per-factor node lists (coords, weight)
    let mut per_factor: Vec<Vec<(Vec<Complex64>, f64)>> = Vec::new();
    for &d in &model.factors {
        let m = d + 1;
        let n_phi = l + 1;
        let phase_step = 2.0 * std::f64::consts::PI / n_phi as f64;
        // simplex nodes for |z_j|^2 with the Dirichlet factorization
        let simplex: Vec<(Vec<f64>, f64)> = match d {
            1 => {
                let (gn, gw) = crate::lie::gauss_legendre(l / 2 + 2);
                gn.iter()
                    .zip(&gw)
                    .map(|(t, w)| {
                        let tau = 0.5 * (t + 1.0);
                        (vec![1.0 - tau, tau], 0.5 * w)
                    })
                    .collect()
            }
            2 => {
                let (gn, gw) = crate::lie::gauss_legendre(l / 2 + 2);
                let mut out = Vec::new();
                for (tu, wu) in gn.iter().zip(&gw) {
                    let u = 0.5 * (tu + 1.0);
                    for (tv, wv) in gn.iter().zip(&gw) {
                        let v = 0.5 * (tv + 1.0);
                        // tau = (1-u, u(1-v), u v), Jacobian u
                        out.push((
                            vec![1.0 - u, u * (1.0 - v), u * v],
                            0.25 * wu * wv * u,
                        ));
                    }
                }
                out
            }
            _ => unreachable!("validated factors"),
        };
        let mut nodes = Vec::new();
        // 2^{-d} / (2 pi) from the measure, (2 pi / N)^m from the phases
        let measure = 0.5f64.powi(d as i32) / (2.0 * std::f64::consts::PI)
            * (2.0 * std::f64::consts::PI / n_phi as f64).powi(m as i32);
        let mut phase_idx = vec![0usize; m];
        loop {
            for (tau, wt) in &simplex {
                let coords: Vec<Complex64> = (0..m)
                    .map(|j| {
                        Complex64::from_polar(tau[j].max(0.0).sqrt(), phase_idx[j] as f64 * phase_step)
                    })
                    .collect();
                nodes.push((coords, measure * wt));
            }
            let mut carry = true;
            for p in phase_idx.iter_mut() {
                *p += 1;
                if *p < n_phi {
                    carry = false;
                    break;
                }
                *p = 0;
            }
            if carry {
                break;
            }
        }
        per_factor.push(nodes);
    }
    // product across factors
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut idx = vec![0usize; per_factor.len()];
    loop {
        let mut coords = Vec::new();
        let mut w = 1.0;
        for (f, &i) in per_factor.iter().zip(&idx) {
            coords.push(f[i].0.clone());
            w *= f[i].1;
        }
        nodes.push(SpherePoint { factors: coords });
        weights.push(w);
        let mut carry = true;
        for (d, f) in idx.iter_mut().zip(&per_factor) {
            *d += 1;
            if *d < f.len() {
                carry = false;
                break;
            }
            *d = 0;
        }
        if carry {
            break;
        }
    }
    SphereRule { nodes, weights }
}

/// Stable cache key for a basis, from the model shape, effective weights,
/// nu and k (and the level filter when present).
pub fn basis_cache_key(
    action: &LinearAction,
    nu: &WeightVector,
    k: u64,
    level_filter: Option<(u64, u64)>,
) -> String {
    let mut key = String::new();
    key.push_str(&format!(
        "f{}",
        action.model.factors.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("_")
    ));
    match action.group.kind {
        GroupKind::Torus(r) => {
            key.push_str(&format!("-t{r}-w"));
            for row in action.effective_weights() {
                key.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("_"));
                key.push('.');
            }
        }
        GroupKind::Su2 => key.push_str("-su2"),
    }
    key.push_str(&format!(
        "-nu{}",
        nu.components.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("_")
    ));
    key.push_str(&format!("-k{k}"));
    if let Some((lo, hi)) = level_filter {
        key.push_str(&format!("-l{lo}_{hi}"));
    }
    key
}

/// Persists a basis as a flat file: integer multi-indices plus the exact
/// bits of the binary64 log-norms.
pub fn write_basis_cache(path: &std::path::Path, basis: &IsotypeBasis) -> Result<()> {
    let mut out = String::from("# schema=szegolab.basis.v1\n");
    for m in &basis.members {
        let alpha = m.alpha.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",");
        let weight = m
            .weight
            .as_ref()
            .map(|w| w.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            .unwrap_or_default();
        out.push_str(&format!(
            "{alpha}|{:016x}|{weight}\n",
            m.log_norm_sq.to_bits()
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a persisted basis back (norm bits restored exactly).
pub fn read_basis_cache(
    path: &std::path::Path,
    model: &QuantizedModel,
    nu: &WeightVector,
    k: u64,
) -> Result<IsotypeBasis> {
    let text = std::fs::read_to_string(path)?;
    let mut members = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('|');
        let (alpha_s, bits_s, weight_s) = (
            parts.next().ok_or_else(|| Error::Config("bad cache line".into()))?,
            parts.next().ok_or_else(|| Error::Config("bad cache line".into()))?,
            parts.next().unwrap_or(""),
        );
        let alpha: Vec<u64> = alpha_s
            .split(',')
            .map(|t| t.parse().map_err(|_| Error::Config("bad cache index".into())))
            .collect::<Result<_>>()?;
        let mut section = MonomialSection::new(model, alpha)?;
        let bits = u64::from_str_radix(bits_s, 16)
            .map_err(|_| Error::Config("bad cache norm bits".into()))?;
        section.log_norm_sq = f64::from_bits(bits);
        if !weight_s.is_empty() {
            section.weight = Some(
                weight_s
                    .split(',')
                    .map(|t| t.parse().map_err(|_| Error::Config("bad cache weight".into())))
                    .collect::<Result<_>>()?,
            );
        }
        members.push(section);
    }
    Ok(IsotypeBasis { nu: nu.clone(), k, members })
}

/// Builds a basis, going through the flat-file cache when the
/// `SZEGOLAB_CACHE` directory is set.
pub fn cached_isotype_basis(
    action: &LinearAction,
    nu: &WeightVector,
    k: u64,
    level_filter: Option<(u64, u64)>,
) -> Result<IsotypeBasis> {
    if let Ok(dir) = std::env::var("SZEGOLAB_CACHE") {
        let dir = std::path::PathBuf::from(dir);
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{}.basis", basis_cache_key(action, nu, k, level_filter)));
        if path.exists() {
            if let Ok(basis) = read_basis_cache(&path, &action.model, nu, k) {
                return Ok(basis);
            }
        }
        let basis = isotype_basis(action, nu, k, level_filter)?;
        write_basis_cache(&path, &basis)?;
        return Ok(basis);
    }
    isotype_basis(action, nu, k, level_filter)
}

/// Writes a kernel Gram matrix on the given points as CSV (diagnostics
/// export).
pub fn kernel_matrix_csv(basis: &IsotypeBasis, points: &[SpherePoint]) -> String {
    let mut out = String::from("# schema=szegolab.kernel_matrix.v1\n");
    for x in points {
        let row: Vec<String> = points
            .iter()
            .map(|y| {
                let v = equivariant_kernel(basis, x, y);
                format!("{:.16e}{:+.16e}i", v.re, v.im)
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        chart_point, heisenberg_chart, ActionBlock, QuantizedModel, SpherePoint,
    };
    use crate::lie::{haar_quadrature, haar_quadrature_full, GroupElement, GroupModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cp1() -> QuantizedModel {
        QuantizedModel::new(vec![1]).unwrap()
    }

    fn torus1_12() -> LinearAction {
        LinearAction::new(
            GroupModel::torus(1).unwrap(),
            cp1(),
            vec![ActionBlock::Torus(vec![vec![1], vec![2]])],
            vec![0],
        )
        .unwrap()
    }

    fn torus2_cp2() -> LinearAction {
        LinearAction::new(
            GroupModel::torus(2).unwrap(),
            QuantizedModel::new(vec![2]).unwrap(),
            vec![ActionBlock::Torus(vec![vec![1, 0], vec![0, 1], vec![1, 1]])],
            vec![0, 0],
        )
        .unwrap()
    }

    fn su2_cp1() -> LinearAction {
        LinearAction::new(GroupModel::su2(), cp1(), vec![ActionBlock::Su2Defining], vec![0])
            .unwrap()
    }

    fn nu1(action: &LinearAction) -> WeightVector {
        WeightVector::new(&action.group, vec![1; action.group.rank()]).unwrap()
    }

    #[test]
    fn monomial_norms_match_sphere_quadrature() {
        for model in [cp1(), QuantizedModel::new(vec![2]).unwrap()] {
            let rule = sphere_quadrature(&model, 5);
            for alpha in enumerate_level(&model, 3) {
                let s = MonomialSection::new(&model, alpha).unwrap();
                let mut norm = 0.0;
                for (p, w) in rule.nodes.iter().zip(&rule.weights) {
                    norm += w * s.eval(p).norm_sqr();
                }
                assert!((norm - 1.0).abs() < 1e-12, "normalized monomial norm {norm}");
            }
        }
    }

    #[test]
    fn distinct_monomials_orthogonal_under_quadrature() {
        let model = cp1();
        let rule = sphere_quadrature(&model, 6);
        let l3 = enumerate_level(&model, 3);
        let l5 = enumerate_level(&model, 5);
        let s1 = MonomialSection::new(&model, l3[1].clone()).unwrap();
        let s2 = MonomialSection::new(&model, l3[2].clone()).unwrap();
        let s3 = MonomialSection::new(&model, l5[0].clone()).unwrap();
        for (a, b) in [(&s1, &s2), (&s1, &s3), (&s2, &s3)] {
            let mut ip = Complex64::new(0.0, 0.0);
            for (p, w) in rule.nodes.iter().zip(&rule.weights) {
                ip += *w * a.eval(p) * b.eval(p).conj();
            }
            assert!(ip.norm() < 1e-13, "gram {ip}");
        }
    }

    #[test]
    fn closed_form_matches_basis_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for model in [cp1(), QuantizedModel::new(vec![2]).unwrap(), QuantizedModel::new(vec![1, 1]).unwrap()] {
            for _ in 0..5 {
                let x = SpherePoint::random(&model, &mut rng);
                let y = SpherePoint::random(&model, &mut rng);
                for k in [0u64, 1, 2, 5, 9] {
                    let a = szego_level_kernel(&model, k, &x, &y);
                    let b = szego_level_kernel_basis_sum(&model, k, &x, &y).unwrap();
                    // scale-relative: |Pi(x,y)| <= sqrt(Pi(x,x) Pi(y,y))
                    let scale = (szego_level_kernel(&model, k, &x, &x).re
                        * szego_level_kernel(&model, k, &y, &y).re)
                        .sqrt();
                    assert!((a - b).norm() / scale < 1e-10, "k={k}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn level_kernel_orthogonal_points_and_fourier_equivariance() {
        let model = cp1();
        let x = SpherePoint::new(&model, vec![vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]]).unwrap();
        let y = SpherePoint::new(&model, vec![vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]]).unwrap();
        for k in [1u64, 2, 7] {
            assert_eq!(szego_level_kernel(&model, k, &x, &y).norm(), 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = SpherePoint::random(&model, &mut rng);
        let y = SpherePoint::random(&model, &mut rng);
        let th = 0.83;
        let k = 6u64;
        let lhs = szego_level_kernel(&model, k, &x.structure_phase(th), &y);
        let rhs = Complex64::from_polar(1.0, k as f64 * th) * szego_level_kernel(&model, k, &x, &y);
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm().max(1.0));
    }

    #[test]
    fn diagonal_level_kernel_value() {
        // Pi_k(x, x) = (k+1)/pi on CP^1 (independent of x)
        let model = cp1();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = SpherePoint::random(&model, &mut rng);
        for k in [0u64, 3, 64] {
            let v = szego_level_kernel(&model, k, &x, &x);
            let expect = (k + 1) as f64 / std::f64::consts::PI;
            assert!((v.re - expect).abs() < 1e-10 * expect && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn isotype_dimensions_examples() {
        let action = torus1_12();
        let nu = nu1(&action);
        // alpha_0 + 2 alpha_1 = k with common level: dimension floor(k/2)+1
        let b4 = isotype_basis(&action, &nu, 4, None).unwrap();
        assert_eq!(b4.dimension(), 3);
        let expected: Vec<Vec<u64>> = vec![vec![0, 2], vec![2, 1], vec![4, 0]];
        let mut alphas: Vec<Vec<u64>> = b4.members.iter().map(|m| m.alpha.clone()).collect();
        alphas.sort();
        assert_eq!(alphas, expected);
        let b0 = isotype_basis(&action, &nu, 0, None).unwrap();
        assert_eq!(b0.dimension(), 1);
        for k in 1..=50u64 {
            let d = isotype_dimension(&action, &nu, k).unwrap();
            assert_eq!(d, (k / 2 + 1) as usize, "k={k}");
        }
    }

    #[test]
    fn isotype_dimensions_cp2_torus2() {
        let action = torus2_cp2();
        let nu = nu1(&action);
        for k in 1..=12u64 {
            let d = isotype_dimension(&action, &nu, k).unwrap();
            assert_eq!(d, (k + 1) as usize, "k={k}");
        }
    }

    #[test]
    fn isotype_dimensions_su2() {
        let action = su2_cp1();
        let nu = nu1(&action);
        for k in 1..=20u64 {
            let d = isotype_dimension(&action, &nu, k).unwrap();
            assert_eq!(d, (k + 1) as usize, "k={k}");
        }
        // SU(2) x trivial factor: multiplicity of the spin-k irrep times the
        // degree-n sections of the trivial CP^1 factor
        let model = QuantizedModel::new(vec![1, 1]).unwrap();
        let action = LinearAction::new(
            GroupModel::su2(),
            model,
            vec![ActionBlock::Su2Defining, ActionBlock::Trivial],
            vec![0],
        )
        .unwrap();
        for k in 1..=10u64 {
            let d = isotype_dimension(&action, &nu, k).unwrap();
            assert_eq!(d, ((k + 1) * (k + 1)) as usize, "k={k}");
        }
    }

    #[test]
    fn su2_isotype_is_single_level_kernel() {
        let action = su2_cp1();
        let nu = WeightVector::new(&action.group, vec![2]).unwrap();
        let k = 5u64;
        let basis = isotype_basis(&action, &nu, k, None).unwrap();
        assert_eq!(basis.levels(), vec![10]);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = SpherePoint::random(&action.model, &mut rng);
        let y = SpherePoint::random(&action.model, &mut rng);
        let a = equivariant_kernel(&basis, &x, &y);
        let b = szego_level_kernel(&action.model, 10, &x, &y);
        assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
    }

    #[test]
    fn equivariant_kernel_hermitian_positive_invariant() {
        let action = torus1_12();
        let nu = nu1(&action);
        let basis = isotype_basis(&action, &nu, 8, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rule = haar_quadrature(&action.group, 12);
        for _ in 0..10 {
            let x = SpherePoint::random(&action.model, &mut rng);
            let y = SpherePoint::random(&action.model, &mut rng);
            let k_xy = equivariant_kernel(&basis, &x, &y);
            let k_yx = equivariant_kernel(&basis, &y, &x);
            assert!((k_xy - k_yx.conj()).norm() < 1e-12 * k_xy.norm().max(1.0));
            assert!(equivariant_kernel(&basis, &x, &x).re >= 0.0);
            // G-invariance on quadrature nodes
            for node in rule.nodes.iter().step_by(4) {
                let gx = action.act(node, &x);
                let gy = action.act(node, &y);
                let k_g = equivariant_kernel(&basis, &gx, &gy);
                assert!((k_g - k_xy).norm() < 1e-10 * k_xy.norm().max(1.0));
            }
        }
    }

    #[test]
    fn two_route_kernels_agree_torus() {
        let action = torus1_12();
        let nu = nu1(&action);
        let k = 12u64;
        let basis = isotype_basis(&action, &nu, k, None).unwrap();
        let need = required_character_degree(&action, &nu, k, basis.max_level());
        let rule = haar_quadrature(&action.group, need);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let x = SpherePoint::random(&action.model, &mut rng);
            let y = SpherePoint::random(&action.model, &mut rng);
            let a = equivariant_kernel(&basis, &x, &y);
            let b = equivariant_kernel_by_characters(
                &action,
                &nu,
                k,
                &x,
                &y,
                &rule,
                HaarConvention::Probability,
            )
            .unwrap();
            assert!((a - b).norm() < 1e-9 * a.norm().max(1e-6), "{a} vs {b}");
        }
    }

    #[test]
    fn two_route_kernels_agree_su2_and_phi_convention_scales() {
        let action = su2_cp1();
        let nu = nu1(&action);
        let k = 6u64;
        let basis = isotype_basis(&action, &nu, k, None).unwrap();
        let need = required_character_degree(&action, &nu, k, basis.max_level());
        let rule = haar_quadrature_full(&action.group, need);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let x = SpherePoint::random(&action.model, &mut rng);
        let y = SpherePoint::random(&action.model, &mut rng);
        let a = equivariant_kernel(&basis, &x, &y);
        let b = equivariant_kernel_by_characters(
            &action,
            &nu,
            k,
            &x,
            &y,
            &rule,
            HaarConvention::Probability,
        )
        .unwrap();
        assert!((a - b).norm() < 1e-9 * a.norm().max(1e-6), "{a} vs {b}");
        // the phi-induced convention rescales by vol(G)
        let c = equivariant_kernel_by_characters(
            &action,
            &nu,
            k,
            &x,
            &y,
            &rule,
            HaarConvention::PhiInduced,
        )
        .unwrap();
        let ratio = (c / b).re;
        assert!((ratio - action.group.volume_g()).abs() < 1e-6 * action.group.volume_g());
        // class rule rejected for SU(2) kernels
        let class_rule = haar_quadrature(&action.group, need);
        assert!(equivariant_kernel_by_characters(
            &action,
            &nu,
            k,
            &x,
            &y,
            &class_rule,
            HaarConvention::Probability,
        )
        .is_err());
    }

    #[test]
    fn wrong_isotype_projector_annihilates() {
        let action = torus1_12();
        let nu = nu1(&action);
        let k = 6u64;
        let basis = isotype_basis(&action, &nu, k, None).unwrap();
        let s = &basis.members[1];
        let nu_other = WeightVector::new(&action.group, vec![2]).unwrap();
        let need = required_character_degree(&action, &nu_other, k, basis.max_level());
        let rule = haar_quadrature(&action.group, need + 8);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let x = SpherePoint::random(&action.model, &mut rng);
            // P_{nu'} s (x) = d int conj(chi_{k nu'}) s(mu_{g^-1} x) dV
            let val = rule.integrate(|g| {
                character(&action.group, &nu_other, k, g).conj()
                    * s.eval(&action.act(&g.inverse(&action.group), &x))
            });
            assert!(val.norm() < 1e-11, "{val}");
            // while the matching projector reproduces the section
            let same = rule.integrate(|g| {
                character(&action.group, &nu, k, g).conj()
                    * s.eval(&action.act(&g.inverse(&action.group), &x))
            });
            assert!((same - s.eval(&x)).norm() < 1e-11);
        }
    }

    #[test]
    fn su2_members_pass_character_projection() {
        let action = su2_cp1();
        let nu = nu1(&action);
        let k = 4u64;
        let basis = isotype_basis(&action, &nu, k, None).unwrap();
        let need = required_character_degree(&action, &nu, k, basis.max_level());
        let rule = haar_quadrature_full(&action.group, need);
        let d = weyl_dimension(&action.group, &nu, k).unwrap() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let x = SpherePoint::random(&action.model, &mut rng);
        for s in basis.members.iter().take(3) {
            let val = rule.integrate(|g| {
                character(&action.group, &nu, k, g).conj()
                    * s.eval(&action.act(&g.inverse(&action.group), &x))
            });
            assert!((d * val - s.eval(&x)).norm() < 1e-10, "{val}");
        }
    }

    #[test]
    fn reproducing_property_and_idempotence() {
        let action = torus1_12();
        let nu = nu1(&action);
        let k = 8u64;
        let basis = isotype_basis(&action, &nu, k, None).unwrap();
        let rule = sphere_quadrature(&action.model, basis.max_level() as usize);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x = SpherePoint::random(&action.model, &mut rng);
        for s in basis.members.iter().take(3) {
            let mut acc = Complex64::new(0.0, 0.0);
            for (p, w) in rule.nodes.iter().zip(&rule.weights) {
                acc += *w * equivariant_kernel(&basis, &x, p) * s.eval(p);
            }
            let expect = s.eval(&x);
            assert!(
                (acc - expect).norm() <= 1e-8 * expect.norm().max(1e-3),
                "{acc} vs {expect}"
            );
        }
        // Pi o Pi = Pi through the same rule
        let y = SpherePoint::random(&action.model, &mut rng);
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += *w * equivariant_kernel(&basis, &x, p) * equivariant_kernel(&basis, p, &y);
        }
        let expect = equivariant_kernel(&basis, &x, &y);
        assert!((acc - expect).norm() <= 1e-8 * expect.norm().max(1e-3));
    }

    #[test]
    fn untwisted_near_diagonal_law() {
        // k^{-d} Pi_k(x + v/sqrt k, x + w/sqrt k) -> (1/pi^d) e^{v.conj(w) - (|v|^2+|w|^2)/2}
        let model = cp1();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let x = SpherePoint::random(&model, &mut rng);
        let chart = heisenberg_chart(&x);
        let v = [Complex64::new(0.9, -0.4)];
        let w = [Complex64::new(-0.3, 1.1)];
        let psi = v[0] * w[0].conj() - 0.5 * (v[0].norm_sqr() + w[0].norm_sqr());
        let mut errs = Vec::new();
        for &k in &[64u64, 128, 256, 512] {
            let s = (k as f64).sqrt();
            let xv = chart_point(&chart, &[v[0] / s], 0.0).unwrap();
            let xw = chart_point(&chart, &[w[0] / s], 0.0).unwrap();
            let val = szego_level_kernel(&model, k, &xv, &xw);
            let limit = psi.exp() / std::f64::consts::PI;
            let err = (val / (k as f64) - limit).norm() / limit.norm();
            errs.push(err);
        }
        // fitted decay rate in log k at least 0.4
        let rate = fit_rate(&[64.0, 128.0, 256.0, 512.0], &errs);
        assert!(rate >= 0.4, "rate {rate}, errs {errs:?}");
    }

    #[test]
    fn distance_lower_bound_by_squared_group_norm() {
        // dist_X(mu_{e^-xi}(x+w), x+v) >= delta |xi|^2 on sampled grids
        for action in [torus1_12(), su2_cp1()] {
            let mut rng = ChaCha8Rng::seed_from_u64(47);
            let x = SpherePoint::random(&action.model, &mut rng);
            let chart = heisenberg_chart(&x);
            let dim = action.group.dim_g();
            let mut min_ratio = f64::INFINITY;
            for _ in 0..40 {
                let scale = 0.05 + 0.25 * rng.gen::<f64>();
                let mut xi: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
                let n = (xi.iter().map(|a| a * a).sum::<f64>()).sqrt();
                for a in xi.iter_mut() {
                    *a *= scale / n;
                }
                let v = [Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.14];
                let w = [Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.14];
                let xw = chart_point(&chart, &w, 0.0).unwrap();
                let xv = chart_point(&chart, &v, 0.0).unwrap();
                let neg_xi: Vec<f64> = xi.iter().map(|a| -a).collect();
                let g = GroupElement::from_algebra(&action.group, &neg_xi);
                let moved = action.act(&g, &xw);
                let dist = moved.bundle_distance(&xv).unwrap();
                let norm_sq = action.group.phi_scale * xi.iter().map(|a| a * a).sum::<f64>();
                min_ratio = min_ratio.min(dist / norm_sq);
            }
            assert!(min_ratio > 0.01, "delta estimate {min_ratio}");
        }
    }

    #[test]
    fn enumeration_bound_guards() {
        let action = torus1_12();
        let nu = nu1(&action);
        assert!(level_bound(&action, &nu, 12) >= 12);
        // a filter restricted to absent levels empties the basis
        let basis = isotype_basis(&action, &nu, 12, Some((0, 2))).unwrap();
        assert_eq!(basis.dimension(), 0);
    }

    pub(super) fn fit_rate(ks: &[f64], errs: &[f64]) -> f64 {
        let xs: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.max(1e-300).ln()).collect();
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        -slope
    }
}
