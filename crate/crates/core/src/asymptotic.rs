//! Asymptotic reference solutions of the threshold (E = 0) coupled equations
//!
//! ```text
//! z'' = [ D/x^2 - Q/x^3 - 1/x^6 ] z,   D = diag(l(l+1)),  Q = I q.
//! ```
//!
//! Each reference is a generalized power series around x = infinity,
//!
//! ```text
//! z(x) = sum_{k, p} c_{k,p} x^{m0 - k} ln(x)^p,
//! ```
//!
//! one growing (m0 = l_c + 1) and one decaying (m0 = -l_c) solution per
//! channel. Log powers appear at resonant orders where m(m-1) hits another
//! channel's l(l+1); the free resonant coefficient at p = 0 is set to zero,
//! which fixes the reference convention. Wronskians of numerical solutions
//! against these references isolate individual growth/decay coefficients
//! without any least-squares fitting.

use crate::radial::PotentialSpec;
use nalgebra::{DMatrix, DVector};

const KMAX: usize = 18;
const PMAX: usize = 3;

#[derive(Debug, Clone)]
pub(crate) struct AsymptoticSeries {
    /// leading power
    pub m0: f64,
    /// coefs[k][p] multiplies x^{m0-k} ln^p x
    pub coefs: Vec<Vec<DVector<f64>>>,
}

impl AsymptoticSeries {
    /// Growing reference of channel c: x^{l_c + 1} + ...
    pub fn growing(spec: &PotentialSpec, c: usize) -> Self {
        Self::build(spec, c, spec.ells()[c] as f64 + 1.0)
    }

    /// Decaying reference of channel c: x^{-l_c} + ...
    pub fn decaying(spec: &PotentialSpec, c: usize) -> Self {
        Self::build(spec, c, -(spec.ells()[c] as f64))
    }

    fn build(spec: &PotentialSpec, c: usize, m0: f64) -> Self {
        assert_eq!(spec.energy, 0.0, "asymptotic references are threshold-only");
        assert_eq!(spec.trap_beta, 0.0, "asymptotic references require no trap");
        let n = spec.n();
        let d: Vec<f64> = spec.ells().iter().map(|&l| (l * (l + 1)) as f64).collect();
        let q = spec.coupling.q() * spec.intensity;
        let vdw = if spec.include_vdw { 1.0 } else { 0.0 };

        let mut coefs: Vec<Vec<DVector<f64>>> = Vec::with_capacity(KMAX + 1);
        let mut seed = DVector::zeros(n);
        seed[c] = 1.0;
        coefs.push({
            let mut v = vec![DVector::zeros(n); PMAX + 1];
            v[0] = seed;
            v
        });

        for k in 1..=KMAX {
            let m = m0 - k as f64;
            let mm = m * (m - 1.0);
            // unknowns this order: c_{k,p} for p = 0..PMAX, with resonant
            // p = 0 components pinned to zero; assembled as one linear system
            let dim = n * (PMAX + 1);
            let mut a = DMatrix::zeros(dim, dim);
            let mut rhs = DVector::zeros(dim);
            let idx = |comp: usize, p: usize| p * n + comp;
            for p in 0..=PMAX {
                // [D - m(m-1)] c_{k,p} - (p+1)(2m-1) c_{k,p+1}
                //   - (p+2)(p+1) c_{k,p+2} = Q c_{k-1,p} + vdw c_{k-4,p}
                for comp in 0..n {
                    let row = idx(comp, p);
                    let diag = d[comp] - mm;
                    let resonant = diag.abs() < 1e-9;
                    if resonant && p == PMAX {
                        // the level-PMAX equation would determine an
                        // out-of-range log power; it is replaced by the pin
                        // of the free resonant coefficient, c_{k,0} = 0
                        a[(row, idx(comp, 0))] = 1.0;
                        rhs[row] = 0.0;
                        continue;
                    }
                    a[(row, idx(comp, p))] = diag;
                    if p + 1 <= PMAX {
                        a[(row, idx(comp, p + 1))] = -((p + 1) as f64) * (2.0 * m - 1.0);
                    }
                    if p + 2 <= PMAX {
                        a[(row, idx(comp, p + 2))] = -(((p + 2) * (p + 1)) as f64);
                    }
                    let mut r = 0.0;
                    for cc in 0..n {
                        r += q[(comp, cc)] * coefs[k - 1][p][cc];
                    }
                    if k >= 4 {
                        r += vdw * coefs[k - 4][p][comp];
                    }
                    rhs[row] = r;
                }
            }
            let sol = a
                .lu()
                .solve(&rhs)
                .expect("asymptotic recurrence is block-triangular and solvable");
            let mut level = vec![DVector::zeros(n); PMAX + 1];
            for p in 0..=PMAX {
                for comp in 0..n {
                    level[p][comp] = sol[idx(comp, p)];
                }
            }
            coefs.push(level);
        }
        AsymptoticSeries { m0, coefs }
    }

    /// Value and derivative vectors at x.
    pub fn eval(&self, x: f64) -> (DVector<f64>, DVector<f64>) {
        let n = self.coefs[0][0].len();
        let mut val = DVector::zeros(n);
        let mut der = DVector::zeros(n);
        let lx = x.ln();
        for (k, level) in self.coefs.iter().enumerate() {
            let m = self.m0 - k as f64;
            let xm = x.powf(m);
            let xm1 = x.powf(m - 1.0);
            for (p, cv) in level.iter().enumerate() {
                if cv.amax() == 0.0 {
                    continue;
                }
                let lp = lx.powi(p as i32);
                let dlp = if p == 0 { 0.0 } else { (p as f64) * lx.powi(p as i32 - 1) };
                for comp in 0..n {
                    val[comp] += cv[comp] * xm * lp;
                    der[comp] += cv[comp] * (m * xm1 * lp + xm1 * dlp);
                }
            }
        }
        (val, der)
    }

    /// Coefficient vector of x^{m0-k} ln^p x.
    pub fn coef(&self, k: usize, p: usize) -> &DVector<f64> {
        &self.coefs[k][p]
    }

    /// Largest relative size of the last retained order at x, a convergence
    /// diagnostic for the evaluation point.
    pub fn tail_estimate(&self, x: f64) -> f64 {
        let k = KMAX;
        let m = self.m0 - k as f64;
        let mut t: f64 = 0.0;
        for p in 0..=PMAX {
            t = t.max(self.coefs[k][p].amax() * x.powf(m) * x.ln().powi(p as i32));
        }
        t / x.powf(self.m0).max(1e-300)
    }
}

/// Wronskian u^T v' - u'^T v of a numerical column (u, u') against a
/// reference series evaluated at the same point.
pub(crate) fn wronskian_with_series(
    u: &DVector<f64>,
    du: &DVector<f64>,
    series_val: &DVector<f64>,
    series_der: &DVector<f64>,
) -> f64 {
    u.dot(series_der) - du.dot(series_val)
}

/// Wronskian of two reference series at x.
pub(crate) fn series_pair_wronskian(a: &AsymptoticSeries, b: &AsymptoticSeries, x: f64) -> f64 {
    let (va, da) = a.eval(x);
    let (vb, db) = b.eval(x);
    va.dot(&db) - da.dot(&vb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::{coupling_matrix, ChannelSet};
    use crate::radial::PotentialSpec;

    fn spec3() -> PotentialSpec {
        let ch = ChannelSet::new(1, vec![1, 3, 5]).unwrap();
        PotentialSpec::new(6.0, coupling_matrix(&ch), 0.0, 0.0).unwrap()
    }

    #[test]
    fn series_satisfies_the_ode() {
        // numerical second derivative of the series vs W * series
        let spec = spec3();
        for s in [
            AsymptoticSeries::growing(&spec, 0),
            AsymptoticSeries::decaying(&spec, 0),
            AsymptoticSeries::growing(&spec, 2),
            AsymptoticSeries::decaying(&spec, 1),
        ] {
            for x in [5.0, 8.0, 20.0] {
                let h = 1e-3;
                let (vm, _) = s.eval(x - h);
                let (v0, _) = s.eval(x);
                let (vp, _) = s.eval(x + h);
                let d2 = (vp + vm - &v0 * 2.0) / (h * h);
                let w = spec.w_matrix(x) * &v0;
                for c in 0..3 {
                    let scale = w.amax().max(v0.amax());
                    assert!(
                        (d2[c] - w[c]).abs() <= 1e-6 * scale,
                        "ODE residual at x={x}, comp {c}: {} vs {}",
                        d2[c],
                        w[c]
                    );
                }
            }
        }
    }

    #[test]
    fn single_channel_cascade_coefficients() {
        // l = 1 alone: x-coef c3/2, const c3^2/4, log c3^3/12 with c3 = I q11
        let ch = ChannelSet::new(0, vec![1]).unwrap();
        let spec = PotentialSpec::new(6.0, coupling_matrix(&ch), 0.0, 0.0).unwrap();
        let c3 = 6.0 * 4.0 / 15.0;
        let s = AsymptoticSeries::growing(&spec, 0);
        assert!((s.coef(1, 0)[0] - c3 / 2.0).abs() < 1e-14);
        assert!((s.coef(2, 0)[0] - c3 * c3 / 4.0).abs() < 1e-14);
        assert!((s.coef(3, 1)[0] - c3 * c3 * c3 / 12.0).abs() < 1e-13);
        // pure vdW (I = 0): the only k = 4 content is the -1/4 x^{-2} term
        let free = PotentialSpec::new(0.0, coupling_matrix(&ch), 0.0, 0.0).unwrap();
        let s0 = AsymptoticSeries::growing(&free, 0);
        assert!((s0.coef(4, 0)[0] + 0.25).abs() < 1e-14);
        assert!((s0.coef(1, 0)[0]).abs() < 1e-15);
    }

    #[test]
    fn growth_decay_pairings() {
        // pairings are x-independent; psi-psi pairings vanish identically and
        // the diagonal psi-phi pairing equals 2l + 1
        let spec = spec3();
        let phis: Vec<_> = (0..3).map(|c| AsymptoticSeries::growing(&spec, c)).collect();
        let psis: Vec<_> = (0..3).map(|c| AsymptoticSeries::decaying(&spec, c)).collect();
        for c in 0..3 {
            let l = spec.ells()[c] as f64;
            let expect = 2.0 * l + 1.0;
            let w6 = series_pair_wronskian(&psis[c], &phis[c], 6.0);
            assert!((w6 - expect).abs() < 1e-8 * expect, "diag pairing {c}: {w6} vs {expect}");
            for dd in 0..3 {
                let a = series_pair_wronskian(&psis[c], &phis[dd], 6.0);
                let b = series_pair_wronskian(&psis[c], &phis[dd], 9.0);
                assert!((a - b).abs() < 1e-8 * a.abs().max(1.0), "pairing drift ({c},{dd})");
                let pp = series_pair_wronskian(&psis[c], &psis[dd], 7.0);
                assert!(pp.abs() < 1e-9, "psi-psi pairing ({c},{dd}) = {pp}");
            }
        }
    }
}
