//! Coupled-channel radial problem: potential matrix, nodal-line boundary
//! model, adaptive grid and the renormalized Numerov propagator.
//!
//! The working equation, in van der Waals reduced units, is
//!
//! ```text
//! u''(x) = W(x) u(x),   W = V(x) - E,
//! V_{ll'}(x) = d_{ll'} [ l(l+1)/x^2 - 1/x^6 + bw^4 x^2 ] - I q_{ll'}/x^3.
//! ```
//!
//! Solutions are propagated column-wise with per-column renormalization so
//! that deeply classically forbidden regions do not overflow.

use crate::angular::CouplingMatrix;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Coupled potential specification in van der Waals reduced units.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    /// Reduced non-resonant intensity I >= 0
    pub intensity: f64,
    /// Anisotropy coupling matrix (carries the channel l-list)
    pub coupling: CouplingMatrix,
    /// Trap parameter bw; 0 disables the trap term
    pub trap_beta: f64,
    /// Energy E in vdW reduced units
    pub energy: f64,
    /// Disable to obtain pure-oscillator reference configurations
    pub include_vdw: bool,
}

impl PotentialSpec {
    pub fn new(
        intensity: f64,
        coupling: CouplingMatrix,
        trap_beta: f64,
        energy: f64,
    ) -> Result<Self> {
        if intensity < 0.0 {
            return Err(Error::invalid("intensity must be >= 0"));
        }
        if trap_beta < 0.0 {
            return Err(Error::invalid("trap_beta must be >= 0"));
        }
        Ok(PotentialSpec { intensity, coupling, trap_beta, energy, include_vdw: true })
    }

    pub fn with_energy(&self, energy: f64) -> Self {
        let mut s = self.clone();
        s.energy = energy;
        s
    }

    pub fn n(&self) -> usize {
        self.coupling.n()
    }
    pub fn ells(&self) -> &[u32] {
        &self.coupling.ells()
    }

    /// V(x); symmetric n x n.
    pub fn potential_matrix(&self, x: f64) -> Result<DMatrix<f64>> {
        if x <= 0.0 {
            return Err(Error::invalid("potential requested at x <= 0"));
        }
        Ok(self.v_unchecked(x))
    }

    fn v_unchecked(&self, x: f64) -> DMatrix<f64> {
        let x2 = x * x;
        let x3 = x2 * x;
        let x6 = x3 * x3;
        let vdw = if self.include_vdw { 1.0 / x6 } else { 0.0 };
        let trap = self.trap_beta.powi(4) * x2;
        let mut v = self.coupling.q() * (-self.intensity / x3);
        for (i, &l) in self.ells().iter().enumerate() {
            let lf = l as f64;
            v[(i, i)] += lf * (lf + 1.0) / x2 - vdw + trap;
        }
        v
    }

    /// W(x) = V(x) - E.
    pub fn w_matrix(&self, x: f64) -> DMatrix<f64> {
        let mut w = self.v_unchecked(x);
        for i in 0..self.n() {
            w[(i, i)] -= self.energy;
        }
        w
    }

    /// dW/dx (= dV/dx).
    pub fn w_matrix_deriv(&self, x: f64) -> DMatrix<f64> {
        let x2 = x * x;
        let x3 = x2 * x;
        let x4 = x2 * x2;
        let x7 = x4 * x3;
        let vdw = if self.include_vdw { 6.0 / x7 } else { 0.0 };
        let mut v = self.coupling.q() * (3.0 * self.intensity / x4);
        for (i, &l) in self.ells().iter().enumerate() {
            let lf = l as f64;
            v[(i, i)] += -2.0 * lf * (lf + 1.0) / x3 + vdw + 2.0 * self.trap_beta.powi(4) * x;
        }
        v
    }

    /// d2W/dx2.
    pub fn w_matrix_deriv2(&self, x: f64) -> DMatrix<f64> {
        let x2 = x * x;
        let x4 = x2 * x2;
        let x5 = x4 * x;
        let x8 = x4 * x4;
        let vdw = if self.include_vdw { 42.0 / x8 } else { 0.0 };
        let mut v = self.coupling.q() * (-12.0 * self.intensity / x5);
        for (i, &l) in self.ells().iter().enumerate() {
            let lf = l as f64;
            v[(i, i)] += 6.0 * lf * (lf + 1.0) / x4 - vdw + 2.0 * self.trap_beta.powi(4);
        }
        v
    }

    /// Local rate scale for the step policy: the fastest channel wins, so
    /// both oscillation in the well and stiff under-barrier growth are
    /// resolved. k^2 = max_l |E - V_ll(x)| + I q_max / x^3.
    fn k_eff(&self, x: f64) -> f64 {
        let x2 = x * x;
        let x3 = x2 * x;
        let vdw = if self.include_vdw { 1.0 / (x3 * x3) } else { 0.0 };
        let trap = self.trap_beta.powi(4) * x2;
        let qmax = self.coupling.q().iter().fold(0.0_f64, |acc, q| acc.max(q.abs()));
        let mut k2 = 0.0_f64;
        for &l in self.ells() {
            let lf = l as f64;
            let diag = lf * (lf + 1.0) / x2 - vdw + trap;
            k2 = k2.max((self.energy - diag).abs());
        }
        (k2 + self.intensity * qmax / x3).sqrt().max(1e-3)
    }
}

/// Short-range boundary: node position x0(E, l, I), linear in its arguments.
#[derive(Debug, Clone, Copy)]
pub struct NodalLineModel {
    pub x00: f64,
    /// d x0 / d E
    pub slope_energy: f64,
    /// d x0 / d [l(l+1)]
    pub slope_l2: f64,
    /// d x0 / d I
    pub slope_intensity: f64,
}

impl NodalLineModel {
    /// Fixed node at x00 (all slopes zero).
    pub fn fixed(x00: f64) -> Self {
        NodalLineModel { x00, slope_energy: 0.0, slope_l2: 0.0, slope_intensity: 0.0 }
    }

    pub fn node_position(&self, energy: f64, ell: u32, intensity: f64) -> Result<f64> {
        let lf = ell as f64;
        let x0 = self.x00
            + self.slope_energy * energy
            + self.slope_l2 * lf * (lf + 1.0)
            + self.slope_intensity * intensity;
        if x0 <= 0.0 {
            return Err(Error::invalid(format!("node position {x0} <= 0")));
        }
        Ok(x0)
    }
}

/// Step-size policy and outer radius for the radial grid.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub x_max: f64,
    /// Grid points per local wavelength (>= 8)
    pub points_per_wavelength: f64,
    /// Absolute step cap
    pub max_step: f64,
    /// Integration never starts below this radius
    pub guard_x_min: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { x_max: 200.0, points_per_wavelength: 40.0, max_step: 0.05, guard_x_min: 0.10 }
    }
}

impl GridSpec {
    /// Trap default: x_max = max(8/bw, 200).
    pub fn for_trap(trap_beta: f64) -> Self {
        let mut gs = GridSpec::default();
        if trap_beta > 0.0 {
            gs.x_max = (8.0 / trap_beta).max(200.0);
        }
        gs
    }

    /// High-accuracy variant for oracle-grade comparisons.
    pub fn high_accuracy() -> Self {
        GridSpec { x_max: 200.0, points_per_wavelength: 600.0, max_step: 0.005, guard_x_min: 0.10 }
    }

    pub fn with_x_max(mut self, x_max: f64) -> Self {
        self.x_max = x_max;
        self
    }
}

/// One uniform-step stretch: points x0 + i h for i = 0..=n.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub x0: f64,
    pub h: f64,
    pub n: usize,
}

impl Segment {
    pub fn x_end(&self) -> f64 {
        self.x0 + self.h * self.n as f64
    }
}

/// Contiguous ascending segments covering [x_start, x_max].
#[derive(Debug, Clone)]
pub struct Grid {
    pub segments: Vec<Segment>,
}

impl Grid {
    pub fn x_start(&self) -> f64 {
        self.segments[0].x0
    }
    pub fn x_end(&self) -> f64 {
        self.segments.last().unwrap().x_end()
    }
    pub fn n_points(&self) -> usize {
        1 + self.segments.iter().map(|s| s.n).sum::<usize>()
    }

    /// All grid points, ascending (shared segment boundaries appear once).
    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_points());
        out.push(self.segments[0].x0);
        for s in &self.segments {
            for i in 1..=s.n {
                out.push(s.x0 + s.h * i as f64);
            }
        }
        out
    }
}

fn step_policy(spec: &PotentialSpec, gs: &GridSpec, x: f64) -> f64 {
    let lambda = 2.0 * std::f64::consts::PI / spec.k_eff(x);
    (lambda / gs.points_per_wavelength).min(gs.max_step)
}

/// Build a grid from `x_start` to `gs.x_max` whose boundaries include every
/// point in `required`, with steps following the local-wavelength policy.
pub fn build_grid(
    spec: &PotentialSpec,
    x_start: f64,
    required: &[f64],
    gs: &GridSpec,
) -> Result<Grid> {
    if gs.points_per_wavelength < 8.0 {
        return Err(Error::numerical(
            "grid too coarse: points_per_wavelength must be at least 8",
        ));
    }
    if x_start < 0.75 * gs.guard_x_min {
        return Err(Error::invalid(format!(
            "start radius {x_start} below overflow guard {}",
            gs.guard_x_min
        )));
    }
    if x_start >= gs.x_max {
        return Err(Error::invalid("x_start must lie below x_max"));
    }
    let mut bounds: Vec<f64> = vec![x_start, gs.x_max];
    bounds.extend(
        required
            .iter()
            .copied()
            .filter(|&x| x > x_start * (1.0 + 1e-12) && x < gs.x_max * (1.0 - 1e-12)),
    );
    bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bounds.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * b.abs().max(1.0));

    // split each interval until the step policy varies by < 60% across it
    let mut edges = vec![bounds[0]];
    for w in bounds.windows(2) {
        let mut intervals = vec![(w[0], w[1])];
        let mut done = Vec::new();
        while let Some((a, b)) = intervals.pop() {
            let ha = step_policy(spec, gs, a);
            let hb = step_policy(spec, gs, b);
            let ratio = (ha / hb).max(hb / ha);
            if ratio > 1.6 && (b - a) > 4.0 * ha.min(hb) && done.len() + intervals.len() < 400 {
                let m = 0.5 * (a + b);
                intervals.push((m, b));
                intervals.push((a, m));
            } else {
                done.push((a, b));
            }
        }
        done.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        for (_, b) in done {
            edges.push(b);
        }
    }

    let mut segments = Vec::new();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h_want = step_policy(spec, gs, a)
            .min(step_policy(spec, gs, b))
            .min(step_policy(spec, gs, 0.5 * (a + b)));
        // at least 4 steps so join stencils always sit inside one segment
        let n = ((b - a) / h_want).ceil().max(4.0) as usize;
        segments.push(Segment { x0: a, h: (b - a) / n as f64, n });
    }
    Ok(Grid { segments })
}

/// Boundary pedigree of a propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// n columns; column c vanishes at its channel node with unit derivative.
    OutwardFromNodes,
    /// Inward from x_max with f_{l'}(x_max) = d_{l l'} exp(-bw^2 x_max^2 / 2).
    InwardGaussian,
    /// Inward from x_max with the decaying free solution (x^-l at E = 0,
    /// exponentially damped Riccati k_l for E < 0).
    InwardDecaying,
}

/// What to keep from a propagation.
#[derive(Debug, Clone, Default)]
pub struct RecordSpec {
    /// Record every grid point.
    pub full: bool,
    /// Specific x values (must be grid points; pass them to `build_grid`).
    pub points: Vec<f64>,
    /// Record every grid point inside these intervals.
    pub ranges: Vec<(f64, f64)>,
}

impl RecordSpec {
    pub fn full() -> Self {
        RecordSpec { full: true, points: vec![], ranges: vec![] }
    }
    pub fn at(points: Vec<f64>) -> Self {
        RecordSpec { full: false, points, ranges: vec![] }
    }
    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.ranges.push((lo, hi));
        self
    }
}

/// Matrices of coupled radial solutions on selected grid points.
///
/// Column j of `values[i]`, multiplied by exp(log_scale[i][j]), is solution j
/// at x[i]. Columns renormalize independently during propagation.
#[derive(Debug, Clone)]
pub struct SolutionSet {
    pub ells: Vec<u32>,
    pub pedigree: Boundary,
    pub x: Vec<f64>,
    pub values: Vec<DMatrix<f64>>,
    pub log_scale: Vec<Vec<f64>>,
}

impl SolutionSet {
    pub fn n_channels(&self) -> usize {
        self.ells.len()
    }
    pub fn n_cols(&self) -> usize {
        self.values[0].ncols()
    }

    /// Index of a recorded point at x (relative tolerance 1e-9).
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let tol = 1e-9 * x.abs().max(1.0);
        let i = self.x.partition_point(|&p| p < x - tol);
        if i < self.x.len() && (self.x[i] - x).abs() <= tol {
            Some(i)
        } else {
            None
        }
    }

    /// Stored values at index i brought to the given per-column reference
    /// scales (true value = stored * exp(log_scale - ref_scale)).
    pub fn values_rescaled(&self, i: usize, ref_scale: &[f64]) -> DMatrix<f64> {
        let mut m = self.values[i].clone();
        for j in 0..m.ncols() {
            let f = (self.log_scale[i][j] - ref_scale[j]).exp();
            for r in 0..m.nrows() {
                m[(r, j)] *= f;
            }
        }
        m
    }

    /// Linear combination of columns at index i with coefficients defined at
    /// `ref_scale`.
    pub fn combination_at(
        &self,
        i: usize,
        coefs: &DVector<f64>,
        ref_scale: &[f64],
    ) -> DVector<f64> {
        self.values_rescaled(i, ref_scale) * coefs
    }

    /// 2-norm condition number of the column-normalized value matrix at i.
    pub fn condition_at(&self, i: usize) -> f64 {
        let mut m = self.values[i].clone();
        for j in 0..m.ncols() {
            let norm = m.column(j).norm();
            if norm > 0.0 {
                for r in 0..m.nrows() {
                    m[(r, j)] /= norm;
                }
            }
        }
        let svd = m.svd(false, false);
        svd.singular_values.max() / svd.singular_values.min()
    }

    /// Numerov-consistent derivative of all columns at recorded index i.
    /// Requires full recording and a uniform 5-point neighborhood.
    pub fn derivative_at(&self, spec: &PotentialSpec, i: usize) -> Result<DMatrix<f64>> {
        if i < 2 || i + 2 >= self.x.len() {
            return Err(Error::invalid("derivative stencil out of range"));
        }
        let h = self.x[i + 1] - self.x[i];
        for k in 0..4 {
            let hk = self.x[i - 1 + k] - self.x[i - 2 + k];
            if ((hk - h) / h).abs() > 1e-9 {
                return Err(Error::invalid("derivative needs a uniform stencil"));
            }
        }
        let n = self.n_channels();
        let mut out = DMatrix::zeros(n, self.n_cols());
        for j in 0..self.n_cols() {
            let ref_s = self.log_scale[i][j];
            let mut us: Vec<DVector<f64>> = Vec::with_capacity(5);
            for k in 0..5 {
                let idx = i - 2 + k;
                let f = (self.log_scale[idx][j] - ref_s).exp();
                us.push(self.values[idx].column(j).into_owned() * f);
            }
            let gs: Vec<DVector<f64>> = (0..5)
                .map(|k| spec.w_matrix(self.x[i - 2 + k]) * &us[k])
                .collect();
            let d = derivative_5pt(
                &[us[0].clone(), us[1].clone(), us[2].clone(), us[3].clone(), us[4].clone()],
                &[gs[0].clone(), gs[1].clone(), gs[2].clone(), gs[3].clone(), gs[4].clone()],
                h,
            );
            out.set_column(j, &d);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// propagation
// ---------------------------------------------------------------------------

const RENORM_THRESHOLD: f64 = 1e120;

struct Column {
    active: bool,
    /// node position for pending outward columns
    start_x: f64,
    /// first loop index this column steps at, within the current segment
    start_t: usize,
    u_prev: DVector<f64>,
    u_cur: DVector<f64>,
    f_prev: DVector<f64>,
    log_scale: f64,
    window: Vec<DVector<f64>>,
    join_deriv: Option<DVector<f64>>,
}

impl Column {
    fn inactive(n: usize, start_x: f64) -> Self {
        Column {
            active: false,
            start_x,
            start_t: 1,
            u_prev: DVector::zeros(n),
            u_cur: DVector::zeros(n),
            f_prev: DVector::zeros(n),
            log_scale: 0.0,
            window: Vec::new(),
            join_deriv: None,
        }
    }

    fn renormalize(&mut self) {
        let m = self
            .u_cur
            .iter()
            .chain(self.u_prev.iter())
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        if m > RENORM_THRESHOLD {
            let s = 1.0 / m;
            self.u_prev *= s;
            self.u_cur *= s;
            self.f_prev *= s;
            for w in &mut self.window {
                *w *= s;
            }
            self.log_scale += m.ln();
        }
    }

    fn push_window(&mut self, v: DVector<f64>) {
        self.window.push(v);
        if self.window.len() > 6 {
            self.window.remove(0);
        }
    }
}

/// 5-point derivative at the center of the stencil; g_i = W_i u_i.
fn derivative_5pt(us: &[DVector<f64>; 5], gs: &[DVector<f64>; 5], h: f64) -> DVector<f64> {
    let d0 = (&us[3] - &us[1]) * (1.0 / (2.0 * h));
    let d1 = (&gs[3] - &gs[1]) * (h / 12.0);
    let g3 = (&gs[4] - &gs[3] * 2.0 + &gs[1] * 2.0 - &gs[0]) * (7.0 * h / 720.0);
    d0 - d1 + g3
}

/// Taylor advance of (u, u') by s using W, W', W'' at the expansion point.
fn taylor_value(
    u: &DVector<f64>,
    du: &DVector<f64>,
    w: &DMatrix<f64>,
    w1: &DMatrix<f64>,
    w2: &DMatrix<f64>,
    s: f64,
) -> DVector<f64> {
    let wu = w * u;
    u + du * s
        + &wu * (s * s / 2.0)
        + (w * du + w1 * u) * (s * s * s / 6.0)
        + (w2 * u + (w1 * du) * 2.0 + w * &wu) * (s * s * s * s / 24.0)
}


/// Node positions per channel, ordered like the channel list.
pub fn node_positions(spec: &PotentialSpec, model: &NodalLineModel) -> Result<Vec<f64>> {
    spec.ells()
        .iter()
        .map(|&l| model.node_position(spec.energy, l, spec.intensity))
        .collect()
}

pub fn propagate(
    spec: &PotentialSpec,
    model: &NodalLineModel,
    grid: &Grid,
    boundary: Boundary,
    record: &RecordSpec,
) -> Result<SolutionSet> {
    let outward = match boundary {
        Boundary::OutwardFromNodes => true,
        Boundary::InwardGaussian => {
            if spec.trap_beta <= 0.0 {
                return Err(Error::invalid("InwardGaussian requires trap_beta > 0"));
            }
            false
        }
        Boundary::InwardDecaying => {
            if spec.energy > 0.0 {
                return Err(Error::invalid("InwardDecaying requires E <= 0"));
            }
            false
        }
    };

    let n = spec.n();
    let nodes = node_positions(spec, model)?;

    let mut segs: Vec<Segment> = grid.segments.clone();
    if !outward {
        segs.reverse();
    }

    let is_near = |p: f64, x: f64| (p - x).abs() <= 1e-9 * p.abs().max(1.0);
    let want_record = |x: f64| {
        record.full
            || record.points.iter().any(|&p| is_near(p, x))
            || record.ranges.iter().any(|&(lo, hi)| x >= lo && x <= hi)
    };

    let mut cols: Vec<Column> = (0..n)
        .map(|c| {
            let start = if boundary == Boundary::OutwardFromNodes { nodes[c] } else { grid.x_end() };
            Column::inactive(n, start)
        })
        .collect();

    // records keyed by the bit pattern of x (positive floats sort correctly)
    let mut rec: std::collections::BTreeMap<u64, (f64, DMatrix<f64>, Vec<f64>)> =
        std::collections::BTreeMap::new();

    macro_rules! record_now {
        ($x:expr, $cols:expr) => {{
            let mut vals = DMatrix::zeros(n, n);
            let mut scales = vec![0.0; n];
            for (j, c) in $cols.iter().enumerate() {
                if c.active {
                    vals.set_column(j, &c.u_cur);
                    scales[j] = c.log_scale;
                }
            }
            rec.insert(($x as f64).to_bits(), ($x, vals, scales));
        }};
    }

    // prime a column from (u0, u'0) at x0 into the two-point state for a main
    // step h_signed: four Numerov sub-steps of h_signed/4
    let prime = |col: &mut Column, x0: f64, u0: DVector<f64>, du0: DVector<f64>, h_signed: f64| -> Result<()> {
        let w = spec.w_matrix(x0);
        let w1 = spec.w_matrix_deriv(x0);
        let w2 = spec.w_matrix_deriv2(x0);
        let sub = h_signed / 4.0;
        let sub2 = sub * sub;
        let mut u_a = u0.clone();
        let mut u_b = taylor_value(&u0, &du0, &w, &w1, &w2, sub);
        let mut f_a = &u_a - (&w * &u_a) * (sub2 / 12.0);
        for t in 2..=4usize {
            let x_prev = x0 + sub * (t - 1) as f64;
            let x_next = x0 + sub * t as f64;
            let w_prev = spec.w_matrix(x_prev);
            let w_next = spec.w_matrix(x_next);
            let f_next = &u_b * 2.0 + (&w_prev * &u_b) * (10.0 * sub2 / 12.0) - &f_a;
            let b_next = DMatrix::identity(n, n) - &w_next * (sub2 / 12.0);
            let u_next = b_next
                .lu()
                .solve(&f_next)
                .ok_or_else(|| Error::numerical("singular Numerov step matrix"))?;
            f_a = &u_b - (&w_prev * &u_b) * (sub2 / 12.0);
            u_a = std::mem::replace(&mut u_b, u_next);
        }
        let _ = u_a;
        col.f_prev = &u0 - (&w * &u0) * (h_signed * h_signed / 12.0);
        col.u_prev = u0.clone();
        col.u_cur = u_b;
        col.window.clear();
        col.window.push(u0);
        col.window.push(col.u_cur.clone());
        col.start_t = 2;
        col.active = true;
        col.join_deriv = None;
        Ok(())
    };

    // --- initial boundary values ---
    let x_first = if outward { grid.x_start() } else { grid.x_end() };
    let h0_signed = if outward { segs[0].h } else { -segs[0].h };
    match boundary {
        Boundary::OutwardFromNodes => {
            for c in 0..n {
                if is_near(nodes[c], x_first) {
                    let mut du0 = DVector::zeros(n);
                    du0[c] = 1.0;
                    let mut col = Column::inactive(n, nodes[c]);
                    prime(&mut col, x_first, DVector::zeros(n), du0, h0_signed)?;
                    cols[c] = col;
                }
            }
            if !cols.iter().any(|c| c.active) {
                return Err(Error::invalid("no channel node at the grid start"));
            }
        }
        Boundary::InwardGaussian => {
            let bw2 = spec.trap_beta * spec.trap_beta;
            let g = |x: f64| (-0.5 * bw2 * x * x).exp();
            for (c, col) in cols.iter_mut().enumerate() {
                let mut u0 = DVector::zeros(n);
                u0[c] = g(x_first);
                let mut u1 = DVector::zeros(n);
                u1[c] = g(x_first + h0_signed);
                seed_two_point(col, spec, x_first, h0_signed, u0, u1);
            }
        }
        Boundary::InwardDecaying => {
            let kappa = (-spec.energy).max(0.0).sqrt();
            for (c, col) in cols.iter_mut().enumerate() {
                let l = spec.ells()[c];
                let shape = |x: f64| -> f64 {
                    if kappa == 0.0 {
                        (x / x_first).powi(-(l as i32))
                    } else {
                        crate::special::riccati_k_scaled(l, kappa * x)
                            / crate::special::riccati_k_scaled(l, kappa * x_first)
                            * (-kappa * (x - x_first)).exp()
                    }
                };
                let mut u0 = DVector::zeros(n);
                u0[c] = 1.0;
                let mut u1 = DVector::zeros(n);
                u1[c] = shape(x_first + h0_signed);
                seed_two_point(col, spec, x_first, h0_signed, u0, u1);
            }
        }
    }
    if want_record(x_first) {
        // just-initialized columns hold u(x_first) in u_prev (u_cur is one
        // step ahead after priming)
        let mut vals = DMatrix::zeros(n, n);
        let mut scales = vec![0.0; n];
        for (j, c) in cols.iter().enumerate() {
            if c.active {
                vals.set_column(j, &c.u_prev);
                scales[j] = c.log_scale;
            }
        }
        rec.insert(x_first.to_bits(), (x_first, vals, scales));
    }

    // --- march through segments ---
    for (si, seg) in segs.iter().enumerate() {
        let h_signed = if outward { seg.h } else { -seg.h };
        let h2 = seg.h * seg.h;
        let seg_first = if outward { seg.x0 } else { seg.x_end() };

        if si > 0 {
            let prev_h = segs[si - 1].h;
            let same_h = ((prev_h - seg.h) / seg.h).abs() <= 1e-12;
            for col in cols.iter_mut() {
                if !col.active {
                    continue;
                }
                if same_h {
                    // seamless continuation: rebuild f_prev for this segment
                    let x_prev = seg_first - h_signed;
                    let w = spec.w_matrix(x_prev);
                    col.f_prev = &col.u_prev - (&w * &col.u_prev) * (h2 / 12.0);
                    col.start_t = 1;
                } else {
                    let du = col
                        .join_deriv
                        .take()
                        .ok_or_else(|| Error::numerical("missing join derivative"))?;
                    let u0 = col.u_cur.clone();
                    prime(col, seg_first, u0, du, h_signed)?;
                }
            }
        }

        // outward columns whose node coincides with this segment start
        if boundary == Boundary::OutwardFromNodes {
            for c in 0..n {
                if !cols[c].active && is_near(cols[c].start_x, seg_first) {
                    let mut du0 = DVector::zeros(n);
                    du0[c] = 1.0;
                    let mut col = Column::inactive(n, cols[c].start_x);
                    prime(&mut col, seg_first, DVector::zeros(n), du0, h_signed)?;
                    cols[c] = col;
                }
            }
        }

        // W and inverse step matrices for the segment plus 2 overshoot points
        let n_pts = seg.n + 3;
        let mut ws: Vec<DMatrix<f64>> = Vec::with_capacity(n_pts);
        let mut b_inv: Vec<DMatrix<f64>> = Vec::with_capacity(n_pts);
        for i in 0..n_pts {
            let x = seg_first + h_signed * i as f64;
            let w = spec.w_matrix(x.max(1e-3));
            let b = DMatrix::identity(n, n) - &w * (h2 / 12.0);
            b_inv.push(
                b.try_inverse()
                    .ok_or_else(|| Error::numerical("singular Numerov step matrix"))?,
            );
            ws.push(w);
        }

        for t in 1..=seg.n + 2 {
            let x_t = seg_first + h_signed * t as f64;
            for col in cols.iter_mut() {
                if !col.active || t < col.start_t {
                    continue;
                }
                let w_cur = &ws[t - 1];
                let f_next = &col.u_cur * 2.0 + (w_cur * &col.u_cur) * (10.0 * h2 / 12.0)
                    - &col.f_prev;
                let u_next = &b_inv[t] * f_next;
                col.f_prev = &col.u_cur - (w_cur * &col.u_cur) * (h2 / 12.0);
                col.u_prev = std::mem::replace(&mut col.u_cur, u_next);
                col.push_window(col.u_cur.clone());
                col.renormalize();
            }
            if t <= seg.n && want_record(x_t) {
                record_now!(x_t, cols);
            }
        }

        // join derivative at the segment end (stencil centered two steps back
        // from the overshoot tip), then roll the overshoot back
        for col in cols.iter_mut() {
            if !col.active {
                continue;
            }
            let wl = col.window.len();
            if wl < 5 {
                return Err(Error::numerical("segment too short for join bookkeeping"));
            }
            let us: [DVector<f64>; 5] = [
                col.window[wl - 5].clone(),
                col.window[wl - 4].clone(),
                col.window[wl - 3].clone(),
                col.window[wl - 2].clone(),
                col.window[wl - 1].clone(),
            ];
            let gs: [DVector<f64>; 5] = [
                &ws[seg.n - 2] * &us[0],
                &ws[seg.n - 1] * &us[1],
                &ws[seg.n] * &us[2],
                &ws[seg.n + 1] * &us[3],
                &ws[seg.n + 2] * &us[4],
            ];
            col.join_deriv = Some(derivative_5pt(&us, &gs, h_signed));
            // state back to the segment end
            col.u_cur = col.window[wl - 3].clone();
            col.u_prev = col.window[wl - 4].clone();
            let w_prev = &ws[seg.n - 1];
            col.f_prev = &col.u_prev - (w_prev * &col.u_prev) * (h2 / 12.0);
            col.window.truncate(wl - 2);
        }
    }

    // --- assemble ascending in x ---
    let mut x_out = Vec::new();
    let mut vals = Vec::new();
    let mut scales = Vec::new();
    for (_, (x, v, s)) in rec {
        x_out.push(x);
        vals.push(v);
        scales.push(s);
    }
    if x_out.is_empty() {
        return Err(Error::invalid("record specification selected no grid points"));
    }
    for v in vals.iter().flat_map(|m| m.iter()) {
        if !v.is_finite() {
            return Err(Error::numerical(
                "overflow during propagation; renormalized stepping exhausted",
            ));
        }
    }
    Ok(SolutionSet {
        ells: spec.ells().to_vec(),
        pedigree: boundary,
        x: x_out,
        values: vals,
        log_scale: scales,
    })
}

/// Seed a two-point inward start (values specified on the outer two points).
fn seed_two_point(
    col: &mut Column,
    spec: &PotentialSpec,
    x0: f64,
    h_signed: f64,
    u0: DVector<f64>,
    u1: DVector<f64>,
) {
    let w0 = spec.w_matrix(x0);
    col.f_prev = &u0 - (&w0 * &u0) * (h_signed * h_signed / 12.0);
    col.u_prev = u0.clone();
    col.u_cur = u1;
    col.window.clear();
    col.window.push(u0);
    col.window.push(col.u_cur.clone());
    col.start_t = 2;
    col.active = true;
    col.log_scale = 0.0;
}
