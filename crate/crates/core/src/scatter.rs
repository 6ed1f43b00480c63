//! Threshold physics of free pairs: field-free s-wave scattering length,
//! generalized p-wave scattering volume from asymptotic fits, determinant
//! pole location, widths, scans and the (intensity, x00) singularity map.

use crate::angular::CouplingMatrix;
use crate::asymptotic::AsymptoticSeries;
use crate::error::{Error, Result};
use crate::radial::{
    build_grid, node_positions, propagate, Boundary, GridSpec, NodalLineModel, PotentialSpec,
    RecordSpec, SolutionSet,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

// ---------------------------------------------------------------------------
// small shared numerics
// ---------------------------------------------------------------------------

/// Column-scaled least squares via SVD; returns (coefficients, relative rms
/// residual, design condition number).
fn lstsq(design: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64, f64)> {
    let ncol = design.ncols();
    let mut scaled = design.clone();
    let mut col_scale = vec![1.0; ncol];
    for j in 0..ncol {
        let norm = scaled.column(j).norm();
        if norm == 0.0 {
            return Err(Error::numerical("zero column in design matrix"));
        }
        col_scale[j] = norm;
        for r in 0..scaled.nrows() {
            scaled[(r, j)] /= norm;
        }
    }
    let svd = scaled.clone().svd(true, true);
    let cond = svd.singular_values.max() / svd.singular_values.min();
    let sol = svd
        .solve(rhs, 1e-13)
        .map_err(|e| Error::numerical(format!("SVD solve failed: {e}")))?;
    let fit = &scaled * &sol;
    let res = (rhs - &fit).norm() / rhs.norm().max(1e-300);
    let mut coefs = sol;
    for j in 0..ncol {
        coefs[j] /= col_scale[j];
    }
    Ok((coefs, res, cond))
}

/// Bracketed root refinement: bisection with secant acceleration.
pub(crate) fn brent_root(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    tol: f64,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::bracket(format!("no sign change on [{a}, {b}]")));
    }
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mut m = b - fb * (b - a) / (fb - fa);
        let lo = a + 0.1 * (b - a);
        let hi = b - 0.1 * (b - a);
        if !m.is_finite() || m < lo.min(hi) || m > lo.max(hi) {
            m = 0.5 * (a + b);
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    Ok(0.5 * (a + b))
}

/// Geometric ladder of fit points in [x_max/4, x_max].
pub fn fit_window_points(x_max: f64, n_points: usize) -> Vec<f64> {
    let lo = x_max / 4.0;
    let ratio = (x_max / lo).powf(1.0 / (n_points as f64 - 1.0));
    (0..n_points).map(|k| lo * ratio.powi(k as i32)).collect()
}

// ---------------------------------------------------------------------------
// s-wave calibration
// ---------------------------------------------------------------------------

fn swave_spec() -> PotentialSpec {
    let coupling = CouplingMatrix::from_parts(vec![0], DMatrix::zeros(1, 1));
    PotentialSpec::new(0.0, coupling, 0.0, 0.0).unwrap()
}

/// Field-free s-wave scattering length from the nodal parameter: integrate
/// the l = 0 threshold equation outward from u(x00) = 0 and fit u -> C(x - a).
pub fn s_wave_scattering_length(x00: f64, gs: &GridSpec) -> Result<f64> {
    if !(0.10..0.20).contains(&x00) {
        return Err(Error::invalid(format!(
            "x00 = {x00} outside the working range (0.10, 0.20)"
        )));
    }
    let spec = swave_spec();
    let model = NodalLineModel::fixed(x00);
    let window = fit_window_points(gs.x_max, 8);
    let grid = build_grid(&spec, x00, &window, gs)?;
    let sol = propagate(
        &spec,
        &model,
        &grid,
        Boundary::OutwardFromNodes,
        &RecordSpec::at(window.clone()),
    )?;
    let iref = sol.x.len() - 1;
    let ref_scale = sol.log_scale[iref].clone();
    let mut design = DMatrix::zeros(window.len(), 2);
    let mut rhs = DVector::zeros(window.len());
    for (r, &x) in window.iter().enumerate() {
        let i = sol
            .index_of(x)
            .ok_or_else(|| Error::numerical("window point missing"))?;
        design[(r, 0)] = x;
        design[(r, 1)] = 1.0;
        rhs[r] = sol.values_rescaled(i, &ref_scale)[(0, 0)];
    }
    let (coefs, res, _) = lstsq(&design, &rhs)?;
    if res > 1e-6 {
        return Err(Error::numerical(format!(
            "s-wave asymptote not linear (residual {res:.2e})"
        )));
    }
    Ok(-coefs[1] / coefs[0])
}

/// Inverse map a -> x00 over one quasi-period of the nodal parameter. The
/// scattering length increases monotonically from -inf to +inf between
/// consecutive poles (~0.14216 and ~0.15213 for the default model).
pub fn x00_for_scattering_length(a_target: f64, gs: &GridSpec) -> Result<f64> {
    let (lo, hi) = (0.14230, 0.15200);
    let mut f = |x: f64| s_wave_scattering_length(x, gs).map(|a| a - a_target);
    let fa = f(lo)?;
    let fb = f(hi)?;
    if fa.signum() == fb.signum() {
        return Err(Error::bracket(format!(
            "scattering length {a_target} not reached inside the quasi-period"
        )));
    }
    brent_root(&mut f, lo, hi, fa, fb, 1e-10)
}

// ---------------------------------------------------------------------------
// threshold solution and volume extraction
// ---------------------------------------------------------------------------

/// Extraction configuration: the p-wave channel of the physical solution is
/// reported on the expansion {x^2, x, 1, ln(x)/x, 1/x}, whose x, 1 and log
/// coefficients follow analytically from the coupled asymptotics; the 1/x
/// coefficient carries the generalized scattering volume.
#[derive(Debug, Clone)]
pub struct AsymptoticFitBasis {
    /// diagnostic window (residual reporting), a geometric ladder by default
    pub window: Vec<f64>,
    /// radius at which Wronskians against the reference series are taken
    pub eval_x: f64,
    /// reject extractions whose reference series have not converged
    pub max_condition: f64,
}

impl AsymptoticFitBasis {
    pub fn default_for(x_max: f64, n_channels: usize) -> Self {
        let n_pts = 8usize.max(n_channels + 4);
        AsymptoticFitBasis {
            window: fit_window_points(x_max, n_pts),
            eval_x: 6.0,
            max_condition: 1e12,
        }
    }
}

/// Physical threshold combination: the unique (up to norm) combination of
/// node-vanishing solutions whose channels l' != 1 carry no growing
/// x^{l'+1} component, normalized to unit x^2 coefficient in the p wave.
///
/// Growth and decay coefficients of each column are read off by Wronskian
/// pairing against analytic asymptotic reference solutions; no least-squares
/// step enters the combination.
#[derive(Debug)]
pub struct ThresholdSolution {
    pub solutions: SolutionSet,
    pub coefs: DVector<f64>,
    pub ref_scale: Vec<f64>,
    /// growth (g) and decay (ss) coefficients per column, rows = channels
    g_mat: DMatrix<f64>,
    s_mat: DMatrix<f64>,
    /// p-wave growing-reference coefficients (x, const, log) for reporting
    series_x: f64,
    series_const: f64,
    series_log: f64,
    /// reciprocal condition number of the constraint system
    pub rcond: f64,
    /// near-singular constraints signal a bound state at threshold
    pub degenerate: bool,
    pub window: Vec<f64>,
    short_range: Vec<f64>,
}

pub fn threshold_solution(
    spec: &PotentialSpec,
    model: &NodalLineModel,
    gs: &GridSpec,
    basis: &AsymptoticFitBasis,
) -> Result<ThresholdSolution> {
    if spec.trap_beta != 0.0 {
        return Err(Error::invalid("threshold solutions require trap_beta = 0"));
    }
    if spec.energy != 0.0 {
        return Err(Error::invalid("threshold solutions are defined at E = 0"));
    }
    let n = spec.n();
    let nodes = node_positions(spec, model)?;
    let x_start = nodes.iter().cloned().fold(f64::INFINITY, f64::min);

    // short-range ladder for channel weights
    let sr_max = 5.0_f64.min(gs.x_max * 0.5);
    let n_sr = 60;
    let short_range: Vec<f64> = (0..n_sr)
        .map(|k| x_start * (sr_max / x_start).powf(k as f64 / (n_sr - 1) as f64))
        .collect();

    let x_eval = basis.eval_x.min(gs.x_max / 4.0).max(2.0 * x_start);
    let mut required = basis.window.clone();
    required.extend(short_range.iter().copied());
    required.extend(nodes.iter().copied());
    required.push(x_eval - 0.55);
    required.push(x_eval + 0.55);

    let grid = build_grid(spec, x_start, &required, gs)?;
    let mut record = basis.window.clone();
    record.extend(short_range.iter().copied());
    let record = RecordSpec::at(record).with_range(x_eval - 0.5, x_eval + 0.5);
    let sol = propagate(spec, model, &grid, Boundary::OutwardFromNodes, &record)?;

    // evaluation index: closest recorded point to x_eval with a uniform
    // 5-point neighborhood
    let mut i_eval = None;
    let mut best = f64::INFINITY;
    for i in 2..sol.x.len().saturating_sub(2) {
        let h = sol.x[i + 1] - sol.x[i];
        let uniform = (0..4).all(|k| {
            let hk = sol.x[i - 1 + k] - sol.x[i - 2 + k];
            ((hk - h) / h).abs() < 1e-9
        });
        if uniform && (sol.x[i] - x_eval).abs() < best {
            best = (sol.x[i] - x_eval).abs();
            i_eval = Some(i);
        }
    }
    let i_eval = i_eval.ok_or_else(|| Error::numerical("no uniform stencil near the evaluation point"))?;
    if best > 0.5 {
        return Err(Error::numerical("evaluation point not recorded"));
    }
    let x_used = sol.x[i_eval];
    let ref_scale = sol.log_scale[i_eval].clone();

    // asymptotic references and their pairing matrix at the evaluation point
    let phis: Vec<AsymptoticSeries> = (0..n).map(|c| AsymptoticSeries::growing(spec, c)).collect();
    let psis: Vec<AsymptoticSeries> = (0..n).map(|c| AsymptoticSeries::decaying(spec, c)).collect();
    for r in phis.iter().chain(psis.iter()) {
        if r.tail_estimate(x_used) > 1e-9 {
            return Err(Error::numerical(
                "asymptotic reference series not converged at the evaluation point; increase x_max or the evaluation radius",
            ));
        }
    }
    let refs: Vec<(DVector<f64>, DVector<f64>)> = phis
        .iter()
        .chain(psis.iter())
        .map(|s| s.eval(x_used))
        .collect();
    let mut pairing = DMatrix::zeros(2 * n, 2 * n);
    for m in 0..2 * n {
        for i in 0..2 * n {
            pairing[(m, i)] = refs[m].0.dot(&refs[i].1) - refs[m].1.dot(&refs[i].0);
        }
    }

    // Wronskians of every column against every reference -> (g, s) coefficients
    let du = sol.derivative_at(spec, i_eval)?;
    let vals = &sol.values[i_eval];
    let mut g_mat = DMatrix::zeros(n, n);
    let mut s_mat = DMatrix::zeros(n, n);
    let pt = pairing.transpose();
    let lu = pt.lu();
    for j in 0..n {
        let mut w = DVector::zeros(2 * n);
        for i in 0..2 * n {
            w[i] = vals.column(j).dot(&refs[i].1) - du.column(j).dot(&refs[i].0);
        }
        let coef = lu
            .solve(&w)
            .ok_or_else(|| Error::numerical("singular reference pairing matrix"))?;
        for d in 0..n {
            g_mat[(d, j)] = coef[d];
            s_mat[(d, j)] = coef[n + d];
        }
    }

    // constraints: zero growth in channels != 0, unit growth in the p wave
    let mut con = DMatrix::zeros(n, n);
    let mut target = DVector::zeros(n);
    for j in 0..n {
        for d in 1..n {
            con[(d - 1, j)] = g_mat[(d, j)];
        }
        con[(n - 1, j)] = g_mat[(0, j)];
    }
    target[n - 1] = 1.0;
    for r in 0..n {
        let norm = con.row(r).norm();
        if norm > 0.0 {
            for c in 0..n {
                con[(r, c)] /= norm;
            }
            target[r] /= norm;
        }
    }
    let svd = con.svd(true, true);
    let rcond = svd.singular_values.min() / svd.singular_values.max();
    let degenerate = rcond < 1e-11;
    let coefs = svd
        .solve(&target, 1e-300)
        .map_err(|e| Error::numerical(format!("constraint solve failed: {e}")))?;

    Ok(ThresholdSolution {
        solutions: sol,
        coefs,
        ref_scale,
        g_mat,
        s_mat,
        series_x: phis[0].coef(1, 0)[0],
        series_const: phis[0].coef(2, 0)[0],
        series_log: phis[0].coef(3, 1)[0],
        rcond,
        degenerate,
        window: basis.window.clone(),
        short_range,
    })
}

/// Extracted generalized scattering volume with diagnostics.
#[derive(Debug, Clone)]
pub struct VolumeResult {
    /// M in the convention u ~ x^2 - M/x
    pub m_value: f64,
    /// relative rms residual of the 5-function fit
    pub residual: f64,
    /// fitted coefficients of {x^2, x, 1, ln x/x, 1/x}
    pub p_wave_coefs: [f64; 5],
    /// short-range channel probability weights of the physical combination
    pub channel_weights: Vec<f64>,
    /// channel label with the largest short-range weight
    pub ell_tilde: u32,
    /// set when the extraction is unreliable (near-pole or bad fit)
    pub flagged: bool,
}

pub fn extract_volume(ts: &ThresholdSolution, basis: &AsymptoticFitBasis) -> Result<VolumeResult> {
    let sol = &ts.solutions;
    let n = sol.n_channels();
    // combination growth/decay coefficients
    let g = &ts.g_mat * &ts.coefs;
    let ss = &ts.s_mat * &ts.coefs;
    let a2 = g[0];
    let m_value = -ss[0] / a2;

    // residual: p-wave channel of the combination against its asymptotic
    // reconstruction over the fit window
    let mut num = 0.0;
    let mut den = 0.0;
    for &x in &basis.window {
        if let Some(i) = sol.index_of(x) {
            let z = sol.combination_at(i, &ts.coefs, &ts.ref_scale);
            let recon = a2
                * (x * x
                    + ts.series_x * x
                    + ts.series_const
                    + ts.series_log * x.ln() / x)
                - ss[0] / x;
            num += (z[0] - recon) * (z[0] - recon);
            den += z[0] * z[0];
        }
    }
    let residual = if den > 0.0 { (num / den).sqrt() } else { f64::NAN };

    let mut weights = vec![0.0; n];
    let mut prev: Option<(f64, DVector<f64>)> = None;
    for &x in &ts.short_range {
        if let Some(i) = sol.index_of(x) {
            let z = sol.combination_at(i, &ts.coefs, &ts.ref_scale);
            if let Some((xp, zp)) = prev.take() {
                let dx = x - xp;
                for c in 0..n {
                    weights[c] += 0.5 * dx * (z[c] * z[c] + zp[c] * zp[c]);
                }
            }
            prev = Some((x, z));
        }
    }
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        for w in &mut weights {
            *w /= total;
        }
    }
    let (imax, _) = weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let flagged = ts.degenerate || residual > 1e-6 || !m_value.is_finite();
    Ok(VolumeResult {
        m_value,
        residual,
        p_wave_coefs: [
            a2,
            a2 * ts.series_x,
            a2 * ts.series_const,
            a2 * ts.series_log,
            ss[0],
        ],
        channel_weights: weights,
        ell_tilde: sol.ells[imax],
        flagged,
    })
}

/// One-call generalized scattering volume.
pub fn generalized_volume(
    coupling: &CouplingMatrix,
    intensity: f64,
    model: &NodalLineModel,
    gs: &GridSpec,
) -> Result<VolumeResult> {
    let spec = PotentialSpec::new(intensity, coupling.clone(), 0.0, 0.0)?;
    let basis = AsymptoticFitBasis::default_for(gs.x_max, spec.n());
    let ts = threshold_solution(&spec, model, gs, &basis)?;
    extract_volume(&ts, &basis)
}

// ---------------------------------------------------------------------------
// determinant of the threshold decaying-solution matching condition
// ---------------------------------------------------------------------------

/// Determinant (column-normalized, sign-carrying) of the matching matrix of
/// inward-decaying solutions evaluated on the nodal lines. Zeros mark bound
/// states sitting exactly at threshold.
pub fn threshold_bound_det(
    coupling: &CouplingMatrix,
    intensity: f64,
    model: &NodalLineModel,
    gs: &GridSpec,
) -> Result<f64> {
    bound_det_at_energy(coupling, intensity, model, gs, 0.0)
}

/// The same matching determinant at E <= 0 with the damped free asymptote.
pub fn bound_det_at_energy(
    coupling: &CouplingMatrix,
    intensity: f64,
    model: &NodalLineModel,
    gs: &GridSpec,
    energy: f64,
) -> Result<f64> {
    let spec = PotentialSpec::new(intensity, coupling.clone(), 0.0, energy)?;
    let nodes = node_positions(&spec, model)?;
    let x_start = nodes.iter().cloned().fold(f64::INFINITY, f64::min);
    let grid = build_grid(&spec, x_start, &nodes, gs)?;
    let sol = propagate(
        &spec,
        model,
        &grid,
        Boundary::InwardDecaying,
        &RecordSpec::at(nodes.clone()),
    )?;
    matching_det(&sol, &nodes)
}

fn matching_det(sol: &SolutionSet, nodes: &[f64]) -> Result<f64> {
    let n = sol.n_channels();
    let iref = 0; // innermost recorded point carries the largest scales
    let ref_scale = sol.log_scale[iref].clone();
    let mut m = DMatrix::zeros(n, n);
    for c in 0..n {
        let i = sol
            .index_of(nodes[c])
            .ok_or_else(|| Error::numerical("node not recorded"))?;
        for j in 0..n {
            m[(c, j)] = sol.values[i][(c, j)] * (sol.log_scale[i][j] - ref_scale[j]).exp();
        }
    }
    for j in 0..n {
        let norm = m.column(j).amax();
        if norm > 0.0 {
            for r in 0..n {
                m[(r, j)] /= norm;
            }
        }
    }
    Ok(m.determinant())
}

/// Channel weights over the short range of the threshold-bound combination
/// (the null vector of the matching matrix at a determinant zero).
pub fn bound_state_weights(
    coupling: &CouplingMatrix,
    intensity: f64,
    model: &NodalLineModel,
    gs: &GridSpec,
) -> Result<(Vec<f64>, u32)> {
    let spec = PotentialSpec::new(intensity, coupling.clone(), 0.0, 0.0)?;
    let nodes = node_positions(&spec, model)?;
    let x_start = nodes.iter().cloned().fold(f64::INFINITY, f64::min);
    let upper = 5.0_f64.min(gs.x_max / 2.0);
    let probes: Vec<f64> = (0..50)
        .map(|k| x_start * (upper / x_start).powf(k as f64 / 49.0))
        .collect();
    let mut required = nodes.clone();
    required.extend(probes.iter().copied());
    let grid = build_grid(&spec, x_start, &required, gs)?;
    let mut record = probes.clone();
    record.extend(nodes.iter().copied());
    let sol = propagate(
        &spec,
        model,
        &grid,
        Boundary::InwardDecaying,
        &RecordSpec::at(record),
    )?;

    let n = spec.n();
    let iref = 0;
    let ref_scale = sol.log_scale[iref].clone();
    let mut m = DMatrix::zeros(n, n);
    for c in 0..n {
        let i = sol.index_of(nodes[c]).unwrap();
        for j in 0..n {
            m[(c, j)] = sol.values[i][(c, j)] * (sol.log_scale[i][j] - ref_scale[j]).exp();
        }
    }
    let mut col_norm = vec![1.0; n];
    for j in 0..n {
        let norm = m.column(j).amax().max(1e-300);
        col_norm[j] = norm;
        for r in 0..n {
            m[(r, j)] /= norm;
        }
    }
    let svd = m.svd(true, true);
    let vt = svd.v_t.as_ref().unwrap();
    let null: DVector<f64> = vt.row(n - 1).transpose().into_owned();

    let mut weights = vec![0.0; n];
    let mut prev: Option<(f64, DVector<f64>)> = None;
    for &x in &probes {
        if let Some(i) = sol.index_of(x) {
            let vals = sol.values_rescaled(i, &ref_scale);
            let mut z = DVector::zeros(n);
            for j in 0..n {
                for r in 0..n {
                    z[r] += vals[(r, j)] / col_norm[j] * null[j];
                }
            }
            if let Some((xp, zp)) = prev.take() {
                let dx = x - xp;
                for c in 0..n {
                    weights[c] += 0.5 * dx * (z[c] * z[c] + zp[c] * zp[c]);
                }
            }
            prev = Some((x, z));
        }
    }
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        for w in &mut weights {
            *w /= total;
        }
    }
    let (imax, _) = weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    Ok((weights, sol.ells[imax]))
}

// ---------------------------------------------------------------------------
// poles, widths, scans, maps
// ---------------------------------------------------------------------------

/// Scan/refinement axis of a pole search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    X00,
    Intensity,
}

/// A located singularity of the generalized scattering volume.
#[derive(Debug, Clone)]
pub struct PoleRecord {
    pub axis: ScanAxis,
    pub location: f64,
    /// w of the local law M ~ w/(s - s_p)
    pub width: f64,
    pub ell_tilde: u32,
    pub channel_weights: Vec<f64>,
}

/// Problem bundle for pole searches and scans.
#[derive(Debug, Clone)]
pub struct ScatterProblem {
    pub coupling: CouplingMatrix,
    pub intensity: f64,
    pub model: NodalLineModel,
    pub grid: GridSpec,
}

impl ScatterProblem {
    fn with_axis(&self, axis: ScanAxis, value: f64) -> (f64, NodalLineModel) {
        match axis {
            ScanAxis::Intensity => (value, self.model),
            ScanAxis::X00 => {
                let mut m = self.model;
                m.x00 = value;
                (self.intensity, m)
            }
        }
    }

    pub fn det_at(&self, axis: ScanAxis, value: f64) -> Result<f64> {
        let (i, m) = self.with_axis(axis, value);
        threshold_bound_det(&self.coupling, i, &m, &self.grid)
    }

    pub fn volume_at(&self, axis: ScanAxis, value: f64) -> Result<VolumeResult> {
        let (i, m) = self.with_axis(axis, value);
        generalized_volume(&self.coupling, i, &m, &self.grid)
    }
}

/// Locate one determinant zero inside the bracket and fit the local width of
/// the volume divergence from both flanks.
pub fn find_pole(problem: &ScatterProblem, axis: ScanAxis, bracket: (f64, f64)) -> Result<PoleRecord> {
    let (lo, hi) = bracket;
    if !(hi > lo) {
        return Err(Error::invalid("empty bracket"));
    }
    let n_probe = 24;
    let mut probes = Vec::with_capacity(n_probe + 1);
    for k in 0..=n_probe {
        let s = lo + (hi - lo) * k as f64 / n_probe as f64;
        probes.push((s, problem.det_at(axis, s)?));
    }
    let mut changes = Vec::new();
    for w in probes.windows(2) {
        if w[0].1.signum() != w[1].1.signum() {
            changes.push((w[0], w[1]));
        }
    }
    match changes.len() {
        0 => return Err(Error::bracket(format!("no determinant zero in [{lo}, {hi}]"))),
        1 => {}
        k => return Err(Error::bracket(format!("{k} determinant zeros in [{lo}, {hi}]"))),
    }
    let ((a, fa), (b, fb)) = changes[0];
    let tol = 1e-9 * hi.abs().max(1.0);
    let mut f = |s: f64| problem.det_at(axis, s);
    let location = brent_root(&mut f, a, b, fa, fb, tol)?;

    let width = pole_width(problem, axis, location, 0.02 * (hi - lo))?;
    let (weights, ell_tilde) = {
        let (i, m) = problem.with_axis(axis, location);
        bound_state_weights(&problem.coupling, i, &m, &problem.grid)?
    };
    Ok(PoleRecord { axis, location, width, ell_tilde, channel_weights: weights })
}

/// Width of the local law M ~ w/(s - s_p) from flank samples:
/// (s - s_p) M = w + b (s - s_p).
pub fn pole_width(
    problem: &ScatterProblem,
    axis: ScanAxis,
    location: f64,
    delta_scale: f64,
) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for sign in [-1.0, 1.0] {
        for k in 1..=3 {
            let d = sign * delta_scale * k as f64;
            let v = problem.volume_at(axis, location + d)?;
            if v.m_value.is_finite() {
                xs.push(d);
                ys.push(d * v.m_value);
            }
        }
    }
    if xs.len() < 4 {
        return Err(Error::numerical("too few flank samples for a width fit"));
    }
    let mut design = DMatrix::zeros(xs.len(), 2);
    let mut rhs = DVector::zeros(xs.len());
    for (r, (&d, &y)) in xs.iter().zip(ys.iter()).enumerate() {
        design[(r, 0)] = 1.0;
        design[(r, 1)] = d;
        rhs[r] = y;
    }
    let (coefs, _, _) = lstsq(&design, &rhs)?;
    Ok(coefs[0])
}

/// One row of a volume scan.
#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub axis_value: f64,
    pub m_value: f64,
    pub residual: f64,
    pub det: f64,
    pub flagged: bool,
}

/// Dense scan of the generalized scattering volume along an axis; pole
/// neighborhoods are flagged via the determinant and the fit residual.
pub fn volume_scan(
    problem: &ScatterProblem,
    axis: ScanAxis,
    range: (f64, f64),
    n_points: usize,
) -> Result<Vec<ScanPoint>> {
    if n_points < 2 || !(range.1 > range.0) {
        return Err(Error::invalid("scan range must be non-empty with at least 2 points"));
    }
    let values: Vec<f64> = (0..n_points)
        .map(|k| range.0 + (range.1 - range.0) * k as f64 / (n_points - 1) as f64)
        .collect();
    let mut out: Vec<(usize, ScanPoint)> = values
        .par_iter()
        .enumerate()
        .map(|(idx, &s)| -> Result<(usize, ScanPoint)> {
            let v = problem.volume_at(axis, s)?;
            let det = problem.det_at(axis, s)?;
            Ok((
                idx,
                ScanPoint {
                    axis_value: s,
                    m_value: v.m_value,
                    residual: v.residual,
                    det,
                    flagged: v.flagged || det.abs() < 1e-9,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|(i, _)| *i);
    Ok(out.into_iter().map(|(_, p)| p).collect())
}

/// One singularity curve in the (intensity, x00) plane.
#[derive(Debug, Clone)]
pub struct PoleCurve {
    pub ell_tilde: u32,
    /// (intensity, x00, width in x00)
    pub points: Vec<(f64, f64, f64)>,
    /// set when continuation lost the branch before the scan edge
    pub truncated: bool,
}

/// Map of det = 0 curves over an intensity grid: each slice scans the x00
/// quasi-period, roots are refined and labeled, and points are linked into
/// curves by continuity in x00 at fixed label.
pub fn singularity_map(
    problem: &ScatterProblem,
    intensities: &[f64],
    x00_range: (f64, f64),
    n_x00: usize,
    with_widths: bool,
) -> Result<Vec<PoleCurve>> {
    #[derive(Clone)]
    struct RootPt {
        intensity: f64,
        x00: f64,
        width: f64,
        ell: u32,
    }
    let slices: Vec<Vec<RootPt>> = intensities
        .par_iter()
        .map(|&ii| -> Result<Vec<RootPt>> {
            let mut prob = problem.clone();
            prob.intensity = ii;
            let mut roots = Vec::new();
            let mut prev: Option<(f64, f64)> = None;
            for k in 0..n_x00 {
                let x = x00_range.0 + (x00_range.1 - x00_range.0) * k as f64 / (n_x00 - 1) as f64;
                let d = prob.det_at(ScanAxis::X00, x)?;
                if let Some((xp, dp)) = prev {
                    if dp.signum() != d.signum() {
                        let mut f = |s: f64| prob.det_at(ScanAxis::X00, s);
                        let root = brent_root(&mut f, xp, x, dp, d, 1e-10)?;
                        let model = {
                            let mut m = prob.model;
                            m.x00 = root;
                            m
                        };
                        let (_, ell) = bound_state_weights(&prob.coupling, ii, &model, &prob.grid)?;
                        let width = if with_widths {
                            pole_width(&prob, ScanAxis::X00, root, 2e-4).unwrap_or(f64::NAN)
                        } else {
                            f64::NAN
                        };
                        roots.push(RootPt { intensity: ii, x00: root, width, ell });
                    }
                }
                prev = Some((x, d));
            }
            Ok(roots)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut curves: Vec<PoleCurve> = Vec::new();
    let mut open: Vec<(PoleCurve, f64)> = Vec::new();
    let jump_tol = (x00_range.1 - x00_range.0) * 0.15;
    for slice in slices {
        let mut used = vec![false; slice.len()];
        for (curve, last_x) in open.iter_mut() {
            let mut best: Option<(usize, f64)> = None;
            for (k, r) in slice.iter().enumerate() {
                if used[k] || r.ell != curve.ell_tilde {
                    continue;
                }
                let d = (r.x00 - *last_x).abs();
                if d < jump_tol && best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((k, d));
                }
            }
            if let Some((k, _)) = best {
                used[k] = true;
                let r = &slice[k];
                curve.points.push((r.intensity, r.x00, r.width));
                *last_x = r.x00;
            } else {
                curve.truncated = true;
            }
        }
        let (dead, alive): (Vec<_>, Vec<_>) = open.drain(..).partition(|(c, _)| c.truncated);
        curves.extend(dead.into_iter().map(|(c, _)| c));
        open = alive;
        for (k, r) in slice.iter().enumerate() {
            if !used[k] {
                open.push((
                    PoleCurve {
                        ell_tilde: r.ell,
                        points: vec![(r.intensity, r.x00, r.width)],
                        truncated: false,
                    },
                    r.x00,
                ));
            }
        }
    }
    curves.extend(open.into_iter().map(|(c, _)| c));
    curves.sort_by(|a, b| {
        a.ell_tilde
            .cmp(&b.ell_tilde)
            .then(a.points[0].1.partial_cmp(&b.points[0].1).unwrap())
    });
    Ok(curves)
}
