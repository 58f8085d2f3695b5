//! Scaling-asymptotics engine: the rescaled equivariant kernel, the
//! leading-term formula
//!
//! ```text
//! Psi_nu(m) (k / (varsigma pi))^{d + (1-r_G)/2} e^{psi_2(w, v) / varsigma},
//! ```
//!
//! the Gaussian integral over the leaf algebra, and least-squares fitting
//! of exponents, constants and remainder rates over k-sweeps.

use num_complex::Complex64;

use crate::geometry::{chart_point, HeisenbergChart};
use crate::hardy::{equivariant_kernel, IsotypeBasis};
use crate::lie::gauss_legendre;
use crate::reduction::ReductionPointData;
use crate::{Error, Result};

/// Window constants for rescaled displacements: |v| <= WINDOW_C * k^WINDOW_EPS
/// with the exponent strictly below 1/6.
pub const WINDOW_C: f64 = 2.0;
pub const WINDOW_EPS: f64 = 0.125;

/// The universal quadratic off-diagonal exponent
/// `psi_2(w, v) = -i omega(w, v) - |w - v|^2 / 2` with the chart-normalized
/// standard structures (`omega(w, v) = -Im<w, v>`, Euclidean norm). Equals
/// `<w, v> - (|w|^2 + |v|^2)/2` in closed form.
pub fn psi2(w: &[Complex64], v: &[Complex64]) -> Complex64 {
    let omega: f64 = -w.iter().zip(v).map(|(a, b)| (a * b.conj()).im).sum::<f64>();
    let diff_sq: f64 = w.iter().zip(v).map(|(a, b)| (a - b).norm_sqr()).sum();
    Complex64::new(-0.5 * diff_sq, -omega)
}

/// Leading term of the near-diagonal expansion at a locus point, for
/// horizontal displacements given in the horizontal-frame coordinates.
pub fn leading_term(data: &ReductionPointData, w: &[Complex64], v: &[Complex64], k: u64) -> Complex64 {
    let d = data.horizontal_dim() + data.t0_basis.len();
    let r = data.t0_basis.len() + 1;
    let exponent = d as f64 + (1.0 - r as f64) / 2.0;
    let power = (k as f64 / (data.varsigma * std::f64::consts::PI)).powf(exponent);
    data.psi_value * power * (psi2(w, v) / data.varsigma).exp()
}

/// The exact isotype kernel at chart-displaced points
/// `Pi_{k nu}(x + w/sqrt k, x + v/sqrt k)`. Displacements are coefficient
/// vectors in the chart frame and must respect the k^epsilon window.
pub fn rescaled_kernel(
    basis: &IsotypeBasis,
    chart: &HeisenbergChart,
    w: &[Complex64],
    v: &[Complex64],
    k: u64,
) -> Result<Complex64> {
    let bound = WINDOW_C * (k as f64).powf(WINDOW_EPS);
    for disp in [w, v] {
        let n = disp.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if n > bound {
            return Err(Error::WindowViolation { norm: n, bound });
        }
    }
    let s = (k as f64).sqrt();
    let pad = |disp: &[Complex64]| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); chart.frame.len()];
        for (o, c) in out.iter_mut().zip(disp) {
            *o = c / s;
        }
        out
    };
    let xw = chart_point(chart, &pad(w), 0.0)?;
    let xv = chart_point(chart, &pad(v), 0.0)?;
    Ok(equivariant_kernel(basis, &xw, &xv))
}

/// Closed form of the Gaussian leaf integral,
/// `(2 pi varsigma)^{(r-1)/2} / sqrt(det D^phi)`; the linear terms of the
/// integrand vanish for horizontal v, w by the tangent splitting.
pub fn gaussian_factor(data: &ReductionPointData) -> f64 {
    let r1 = data.t0_basis.len();
    (2.0 * std::f64::consts::PI * data.varsigma).powf(r1 as f64 / 2.0) / data.det_d.sqrt()
}

/// Quadrature oracle for the leaf integral: integrates
/// `exp((1/varsigma)[g(xi_M, v-w) + i omega(xi_M, v+w) - |xi_M|^2/2])`
/// over t^0 in phi-coordinates. Horizontal `v`, `w` are given in the
/// horizontal frame; their coupling terms are evaluated honestly (and vanish
/// by the splitting). Supports dim t^0 <= 1.
pub fn gaussian_factor_quadrature(
    action: &crate::geometry::LinearAction,
    data: &ReductionPointData,
    v: &[Complex64],
    w: &[Complex64],
) -> Result<Complex64> {
    let r1 = data.t0_basis.len();
    if r1 == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    if r1 > 1 {
        return Err(Error::InvalidModel("leaf quadrature supports rank <= 2 groups".into()));
    }
    // horizontal displacement tangents
    let mk_tangent = |coeffs: &[Complex64]| {
        let mut t = crate::geometry::Tangent::zero_like(&data.point);
        for (c, f) in coeffs.iter().zip(&data.horizontal_frame) {
            t = t.add_scaled(*c, f);
        }
        t
    };
    let tv = mk_tangent(v);
    let tw = mk_tangent(w);
    let diff = tv.add_scaled(Complex64::new(-1.0, 0.0), &tw);
    let sum = tv.add_scaled(Complex64::new(1.0, 0.0), &tw);
    let lam = &data.t0_basis[0];
    let xi_m = action.val_m(lam, &data.point);
    let dd = data.d_matrix[0][0];
    let sigma = (data.varsigma / dd).sqrt();
    let half_width = 10.0 * sigma;
    let (nodes, weights) = gauss_legendre(96);
    let mut acc = Complex64::new(0.0, 0.0);
    for (t, wt) in nodes.iter().zip(&weights) {
        let s = t * half_width;
        let xi_s = xi_m.scale(Complex64::new(s, 0.0));
        let g_term = xi_s.metric(&diff);
        let om_term = xi_s.symplectic(&sum);
        let norm_sq = s * s * dd;
        let expo = (Complex64::new(g_term, om_term)
            - Complex64::new(0.5 * norm_sq, 0.0))
            / data.varsigma;
        acc += wt * half_width * expo.exp();
    }
    Ok(acc)
}

/// Sweep data and fitted asymptotics over a k-grid.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ConvergenceReport {
    pub k_grid: Vec<u64>,
    pub observed: Vec<(f64, f64)>,
    pub predicted: Vec<(f64, f64)>,
    pub fitted_exponent: f64,
    pub fitted_log_constant: f64,
    pub remainder_rate: f64,
    pub r_squared: f64,
    pub fit_failure: bool,
}

/// Least-squares fits of `log|observed| = alpha log k + beta` and the decay
/// rate of `|observed/predicted - 1|`. Requires a strictly increasing grid
/// of length >= 4; flags `r^2 < 0.99` as fit failure.
pub fn convergence_report(
    k_grid: &[u64],
    observed: &[Complex64],
    predicted: &[Complex64],
) -> Result<ConvergenceReport> {
    if k_grid.len() < 4 || observed.len() != k_grid.len() || predicted.len() != k_grid.len() {
        return Err(Error::Config("k grid must have length >= 4 with matching samples".into()));
    }
    if k_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("k grid must be strictly increasing".into()));
    }
    let xs: Vec<f64> = k_grid.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = observed.iter().map(|o| o.norm().max(1e-300).ln()).collect();
    let (alpha, beta, r2) = linear_fit(&xs, &ys);
    let rem: Vec<f64> = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| ((o / p) - 1.0).norm().max(1e-300).ln())
        .collect();
    let (rem_slope, _, _) = linear_fit(&xs, &rem);
    Ok(ConvergenceReport {
        k_grid: k_grid.to_vec(),
        observed: observed.iter().map(|c| (c.re, c.im)).collect(),
        predicted: predicted.iter().map(|c| (c.re, c.im)).collect(),
        fitted_exponent: alpha,
        fitted_log_constant: beta,
        remainder_rate: -rem_slope,
        r_squared: r2,
        fit_failure: r2 < 0.99,
    })
}

/// Ordinary least squares y = a x + b; returns (a, b, r^2).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let a = (n * sxy - sx * sy) / denom;
    let b = (sy - a * sx) / n;
    let mean = sy / n;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a * x - b).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (a, b, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ActionBlock, LinearAction, QuantizedModel, SpherePoint};
    use crate::hardy::isotype_basis;
    use crate::lie::{GroupModel, WeightVector};
    use crate::reduction::locus_point;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cp1_action() -> LinearAction {
        LinearAction::new(
            GroupModel::torus(1).unwrap(),
            QuantizedModel::new(vec![1]).unwrap(),
            vec![ActionBlock::Torus(vec![vec![1], vec![2]])],
            vec![0],
        )
        .unwrap()
    }

    fn cp2_action() -> LinearAction {
        LinearAction::new(
            GroupModel::torus(2).unwrap(),
            QuantizedModel::new(vec![2]).unwrap(),
            vec![ActionBlock::Torus(vec![vec![1, 0], vec![0, 1], vec![1, 1]])],
            vec![0, 0],
        )
        .unwrap()
    }

    fn point(model: &QuantizedModel, coords: &[(f64, f64)]) -> SpherePoint {
        SpherePoint::new(model, vec![coords.iter().map(|&(r, i)| Complex64::new(r, i)).collect()])
            .unwrap()
    }

    #[test]
    fn psi2_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let w = [Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)];
            let v = [Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)];
            assert!(psi2(&w, &w).norm() < 1e-15);
            let p0 = psi2(&w, &[Complex64::new(0.0, 0.0)]);
            assert!((p0 - Complex64::new(-0.5 * w[0].norm_sqr(), 0.0)).norm() < 1e-15);
            let ab = psi2(&w, &v);
            let ba = psi2(&v, &w);
            assert!((ab.conj() - ba).norm() < 1e-15);
            // closed form <w, v> - (|w|^2 + |v|^2)/2
            let closed = w[0] * v[0].conj()
                - 0.5 * (w[0].norm_sqr() + v[0].norm_sqr());
            assert!((ab - closed).norm() < 1e-15);
        }
    }

    #[test]
    fn leading_term_values_and_scaling() {
        let action = cp1_action();
        let nu = WeightVector::new(&action.group, vec![1]).unwrap();
        let seed = point(&action.model, &[(1.0, 0.0), (1.0, 0.0)]);
        let data = locus_point(&action, &nu, &seed).unwrap();
        let zero = [Complex64::new(0.0, 0.0)];
        // at varsigma = 1.5, d = 1, k = 100: (1/1.5)(100/(1.5 pi))
        let lt = leading_term(&data, &zero, &zero, 100);
        let expect = (1.0 / 1.5) * (100.0 / (1.5 * std::f64::consts::PI));
        assert!((lt.re - expect).abs() < 1e-12 && lt.im.abs() < 1e-15);
        // power-law scaling k -> 4k multiplies by 4^{d + (1-r)/2} = 4
        let l1 = leading_term(&data, &zero, &zero, 64);
        let l4 = leading_term(&data, &zero, &zero, 256);
        assert!((l4.re / l1.re - 4.0).abs() < 1e-12);
        // w = v = 0 reduces to Psi (k/(varsigma pi))^{d+(1-r)/2}
        assert!((l1.re - data.psi_value * (64.0 / (1.5 * std::f64::consts::PI))).abs() < 1e-12);
    }

    #[test]
    fn leading_term_invariant_under_frame_rotation() {
        // scalars only depend on frame-invariant data; rotate the horizontal
        // frame by a phase and compare at correspondingly rotated coefficients
        let action = cp1_action();
        let nu = WeightVector::new(&action.group, vec![1]).unwrap();
        let seed = point(&action.model, &[(0.9, 0.1), (0.5, -0.3)]);
        let mut data = locus_point(&action, &nu, &seed).unwrap();
        let w = [Complex64::new(0.4, -0.2)];
        let v = [Complex64::new(-0.1, 0.5)];
        let a = leading_term(&data, &w, &v, 128);
        let phase = Complex64::from_polar(1.0, 0.77);
        data.horizontal_frame = vec![data.horizontal_frame[0].scale(phase)];
        // coefficients transform contravariantly
        let wp = [w[0] * phase.conj()];
        let vp = [v[0] * phase.conj()];
        let b = leading_term(&data, &wp, &vp, 128);
        assert!((a - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn rescaled_kernel_window_and_symmetry() {
        let action = cp1_action();
        let nu = WeightVector::new(&action.group, vec![1]).unwrap();
        let seed = point(&action.model, &[(1.0, 0.0), (1.0, 0.0)]);
        let data = locus_point(&action, &nu, &seed).unwrap();
        let chart = data.chart().unwrap();
        let k = 64u64;
        let basis = isotype_basis(&action, &nu, k, None).unwrap();
        let w = [Complex64::new(0.7, 0.2)];
        let v = [Complex64::new(-0.4, 0.1)];
        let k_wv = rescaled_kernel(&basis, &chart, &w, &v, k).unwrap();
        let k_vw = rescaled_kernel(&basis, &chart, &v, &w, k).unwrap();
        assert!((k_wv - k_vw.conj()).norm() < 1e-10 * k_wv.norm());
        // v = w = 0 is the diagonal kernel
        let zero = [Complex64::new(0.0, 0.0)];
        let diag = rescaled_kernel(&basis, &chart, &zero, &zero, k).unwrap();
        let direct = equivariant_kernel(&basis, &data.point, &data.point);
        assert!((diag - direct).norm() < 1e-12 * direct.norm());
        // window enforcement
        let huge = [Complex64::new(9.0, 0.0)];
        assert!(matches!(
            rescaled_kernel(&basis, &chart, &huge, &zero, k),
            Err(Error::WindowViolation { .. })
        ));
    }

    #[test]
    fn diagonal_ratio_tends_to_leading_term() {
        // observed / leading -> 1 along the grid
        let action = cp1_action();
        let nu = WeightVector::new(&action.group, vec![1]).unwrap();
        let seed = point(&action.model, &[(1.0, 0.0), (1.0, 0.0)]);
        let data = locus_point(&action, &nu, &seed).unwrap();
        let chart = data.chart().unwrap();
        let zero = [Complex64::new(0.0, 0.0)];
        let mut prev_err = f64::INFINITY;
        for &k in &[64u64, 128, 256, 512] {
            let basis = isotype_basis(&action, &nu, k, None).unwrap();
            let obs = rescaled_kernel(&basis, &chart, &zero, &zero, k).unwrap();
            let lead = leading_term(&data, &zero, &zero, k);
            let err = (obs / lead - 1.0).norm();
            assert!(err < prev_err, "no decay at k={k}: {err} vs {prev_err}");
            prev_err = err;
        }
        assert!(prev_err < 0.01, "final ratio error {prev_err}");
    }

    #[test]
    fn gaussian_factor_closed_form_and_oracle() {
        // rank 1: trivial factor
        let action = cp1_action();
        let nu = WeightVector::new(&action.group, vec![1]).unwrap();
        let seed = point(&action.model, &[(1.0, 0.0), (1.0, 0.0)]);
        let data = locus_point(&action, &nu, &seed).unwrap();
        assert_eq!(gaussian_factor(&data), 1.0);
        let q = gaussian_factor_quadrature(&action, &data, &[], &[]).unwrap();
        assert!((q.re - 1.0).abs() < 1e-14);

        // rank 2 on CP^2: closed form (2 pi varsigma)^{1/2}/sqrt(det D)
        let action = cp2_action();
        let nu = WeightVector::new(&action.group, vec![1, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let data =
                locus_point(&action, &nu, &SpherePoint::random(&action.model, &mut rng)).unwrap();
            let closed = gaussian_factor(&data);
            let v = [Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)];
            let w = [Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)];
            let q = gaussian_factor_quadrature(&action, &data, &v, &w).unwrap();
            assert!(
                (q.re - closed).abs() < 1e-6 * closed && q.im.abs() < 1e-9 * closed,
                "{q} vs {closed}"
            );
            // the linear coupling terms vanish for horizontal displacements
            let xi_m = action.val_m(&data.t0_basis[0], &data.point);
            let tv = data.horizontal_frame[0].scale(v[0]);
            let tw = data.horizontal_frame[0].scale(w[0]);
            let diff = tv.add_scaled(Complex64::new(-1.0, 0.0), &tw);
            let sum = tv.add_scaled(Complex64::new(1.0, 0.0), &tw);
            assert!(xi_m.metric(&diff).abs() < 1e-12);
            assert!(xi_m.symplectic(&sum).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_factor_example_value() {
        // r = 2, D = 1, varsigma = 2 gives sqrt(4 pi)
        let val = (2.0 * std::f64::consts::PI * 2.0f64).powf(0.5) / 1.0f64.sqrt();
        assert!((val - (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn frozen_diagonal_constants() {
        // Laplace analysis of the diagonal sums gives closed-form leading
        // constants; frozen here as independent oracles.
        //
        // Weights (1,2) on CP^1, nu = 1, over [1:1]: the peak of
        // 2^{-n} (n+1)! / (alpha_0! alpha_1!) sits at alpha_1 = k/3 and
        //   Pi_{k nu}(x, x) -> (4/9) k / pi .
        let action = cp1_action();
        let nu = WeightVector::new(&action.group, vec![1]).unwrap();
        let x = point(&action.model, &[(1.0, 0.0), (1.0, 0.0)]);
        let k = 2048u64; // log-gamma arithmetic range
        let basis = isotype_basis(&action, &nu, k, None).unwrap();
        let diag = equivariant_kernel(&basis, &x, &x).re;
        let limit = 4.0 / 9.0 * k as f64 / std::f64::consts::PI;
        assert!((diag / limit - 1.0).abs() < 5e-3, "{diag} vs {limit}");

        // Weights (1,0),(0,1),(1,1) on CP^2, nu = (1,1), over [1:1:1]:
        // peak at alpha_2 = k/2 and
        //   Pi_{k nu}(x, x) -> 27/(8 sqrt 2) k^{3/2} / pi^{5/2} .
        let action = cp2_action();
        let nu = WeightVector::new(&action.group, vec![1, 1]).unwrap();
        let x = point(&action.model, &[(1.0, 0.0), (1.0, 0.0), (1.0, 0.0)]);
        let k = 1024u64;
        let basis = isotype_basis(&action, &nu, k, None).unwrap();
        let diag = equivariant_kernel(&basis, &x, &x).re;
        let limit = 27.0 / (8.0 * 2f64.sqrt()) * (k as f64).powf(1.5)
            / std::f64::consts::PI.powf(2.5);
        assert!((diag / limit - 1.0).abs() < 1e-2, "{diag} vs {limit}");
    }

    #[test]
    fn su2_diagonal_is_exact_dimension_count() {
        // For the defining action the isotype is the level-(k n) kernel, so
        // the diagonal equals (k n + 1)/pi exactly and the leading term
        // reproduces k n / pi.
        let model = QuantizedModel::new(vec![1]).unwrap();
        let action =
            LinearAction::new(GroupModel::su2(), model.clone(), vec![ActionBlock::Su2Defining], vec![0])
                .unwrap();
        let nu = WeightVector::new(&action.group, vec![2]).unwrap();
        let x = point(&model, &[(0.6, 0.2), (0.7, -0.33)]);
        let data = locus_point(&action, &nu, &x).unwrap();
        let k = 50u64;
        let basis = isotype_basis(&action, &nu, k, None).unwrap();
        let diag = equivariant_kernel(&basis, &x, &x).re;
        let exact = (2 * k + 1) as f64 / std::f64::consts::PI;
        assert!((diag - exact).abs() < 1e-9 * exact);
        let lead = leading_term(&data, &[], &[], k).re;
        assert!((lead - (2 * k) as f64 / std::f64::consts::PI).abs() < 1e-9 * lead);
    }

    #[test]
    fn convergence_report_validation_and_fit() {
        // synthetic power law with k^{-1} remainder
        let k_grid: Vec<u64> = vec![64, 128, 256, 512, 1024];
        let observed: Vec<Complex64> = k_grid
            .iter()
            .map(|&k| Complex64::new(0.7 * (k as f64).powf(1.5) * (1.0 + 2.0 / k as f64), 0.0))
            .collect();
        let predicted: Vec<Complex64> =
            k_grid.iter().map(|&k| Complex64::new(0.7 * (k as f64).powf(1.5), 0.0)).collect();
        let rep = convergence_report(&k_grid, &observed, &predicted).unwrap();
        // the k^{-1} term biases slope and intercept slightly
        assert!((rep.fitted_exponent - 1.5).abs() < 0.02, "{}", rep.fitted_exponent);
        assert!((rep.fitted_log_constant - 0.7f64.ln()).abs() < 0.1);
        assert!((rep.remainder_rate - 1.0).abs() < 0.01);
        assert!(rep.r_squared > 0.999 && !rep.fit_failure);

        assert!(convergence_report(&[64, 128, 256], &observed[..3], &predicted[..3]).is_err());
        assert!(convergence_report(
            &[64, 64, 128, 256],
            &observed[..4],
            &predicted[..4]
        )
        .is_err());
    }
}
