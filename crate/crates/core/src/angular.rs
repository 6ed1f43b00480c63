//! Odd-parity channel bases and the anisotropy coupling matrices of the
//! operator (cos^2 theta - 1/3), for fixed m and for a fixed orientation
//! alpha of the interparticle axis.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Odd partial waves coupled at fixed |m|.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    m_abs: u32,
    ells: Vec<u32>,
}

impl ChannelSet {
    /// `ells` must be odd, strictly increasing and >= |m|.
    pub fn new(m: i32, ells: Vec<u32>) -> Result<Self> {
        let m_abs = m.unsigned_abs();
        if ells.is_empty() {
            return Err(Error::invalid("channel set must not be empty"));
        }
        for w in ells.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::invalid("channel l-list must be strictly increasing"));
            }
        }
        for &l in &ells {
            if l % 2 == 0 {
                return Err(Error::invalid(format!("even l = {l} in odd-parity channel set")));
            }
            if l < m_abs {
                return Err(Error::invalid(format!("l = {l} below |m| = {m_abs}")));
            }
        }
        Ok(ChannelSet { m_abs, ells })
    }

    /// Odd l from max(1, |m| rounded up to odd) through `ell_max`.
    pub fn odd_up_to(m: i32, ell_max: u32) -> Result<Self> {
        let m_abs = m.unsigned_abs();
        let start = if m_abs <= 1 { 1 } else if m_abs % 2 == 1 { m_abs } else { m_abs + 1 };
        let ells: Vec<u32> = (start..=ell_max).step_by(2).collect();
        Self::new(m as i32, ells)
    }

    pub fn m_abs(&self) -> u32 {
        self.m_abs
    }
    pub fn ells(&self) -> &[u32] {
        &self.ells
    }
    pub fn n(&self) -> usize {
        self.ells.len()
    }
}

/// Matrix elements of (cos^2 theta - 1/3) over the channel basis.
/// Banded: nonzero only for l' = l, l +- 2.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    ells: Vec<u32>,
    q: DMatrix<f64>,
}

impl CouplingMatrix {
    pub fn ells(&self) -> &[u32] {
        &self.ells
    }
    pub fn n(&self) -> usize {
        self.ells.len()
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }

    /// Coupling matrix for a bare l-list without parity restriction (used by
    /// single-channel reference problems, e.g. the l = 0 calibration).
    pub fn from_parts(ells: Vec<u32>, q: DMatrix<f64>) -> Self {
        CouplingMatrix { ells, q }
    }
}

fn ladder_coefficient(ell: u32, m_abs: u32) -> f64 {
    // <Y_{l+1,m} | cos theta | Y_{l,m}>
    let l = ell as f64;
    let m2 = (m_abs * m_abs) as f64;
    (((l + 1.0) * (l + 1.0) - m2) / ((2.0 * l + 1.0) * (2.0 * l + 3.0))).sqrt()
}

/// <Y_{l,m} | cos^2 theta - 1/3 | Y_{l',m}>; zero unless |l - l'| is 0 or 2.
pub fn p2_element(ell: u32, ell_p: u32, m: i32) -> Result<f64> {
    let m_abs = m.unsigned_abs();
    if m_abs > ell.min(ell_p) {
        return Err(Error::invalid(format!("|m| = {m_abs} exceeds min(l, l') = {}", ell.min(ell_p))));
    }
    let (lo, hi) = if ell <= ell_p { (ell, ell_p) } else { (ell_p, ell) };
    Ok(match hi - lo {
        0 => {
            let l = ell as f64;
            let m2 = (m_abs * m_abs) as f64;
            2.0 / 3.0 * (l * (l + 1.0) - 3.0 * m2) / ((2.0 * l - 1.0) * (2.0 * l + 3.0))
        }
        2 => ladder_coefficient(lo, m_abs) * ladder_coefficient(lo + 1, m_abs),
        _ => 0.0,
    })
}

/// Full banded matrix of `p2_element` values over a channel set.
pub fn coupling_matrix(channels: &ChannelSet) -> CouplingMatrix {
    let n = channels.n();
    let ells = channels.ells().to_vec();
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // channel sets guarantee l >= |m|, so this cannot fail
            q[(i, j)] = p2_element(ells[i], ells[j], channels.m_abs() as i32).unwrap();
        }
    }
    CouplingMatrix { ells, q }
}

/// Coupling for a fixed interparticle-axis orientation alpha:
/// q^alpha = cos^2(alpha) q^{m=0} + sin^2(alpha) q^{|m|=1}.
pub fn alpha_weighted_matrix(
    alpha: f64,
    channels_m0: &ChannelSet,
    channels_m1: &ChannelSet,
) -> Result<CouplingMatrix> {
    if channels_m0.ells() != channels_m1.ells() {
        return Err(Error::invalid("alpha mixing requires identical l-lists"));
    }
    let q0 = coupling_matrix(channels_m0);
    let q1 = coupling_matrix(channels_m1);
    let (c, s) = (alpha.cos(), alpha.sin());
    let q = q0.q * (c * c) + q1.q * (s * s);
    Ok(CouplingMatrix { ells: channels_m0.ells().to_vec(), q })
}

pub mod harmonics {
    //! Real spherical harmonics on the phi = 0 half-plane, extended smoothly
    //! over the full circle in the Z-X plane (signed sin^m factor), so that
    //! polar-plot tables can be evaluated for theta in [0, 2 pi).

    /// Derivative part of the associated Legendre function:
    /// d^m/dx^m P_l(x), computed by recurrence.
    fn legendre_diff(l: u32, m: u32, x: f64) -> f64 {
        // P_m^m-derived seed: d^m/dx^m P_m(x) = (2m-1)!!
        let mut dfact = 1.0;
        for k in 1..=m {
            dfact *= (2 * k - 1) as f64;
        }
        if l == m {
            return dfact;
        }
        // upward recurrence in l for fixed m:
        // (l - m) f_l = (2l - 1) x f_{l-1} - (l - 1 + m) f_{l-2}
        let mut fm2 = dfact; // l = m
        let mut fm1 = (2.0 * m as f64 + 1.0) * x * dfact; // l = m + 1
        if l == m + 1 {
            return fm1;
        }
        for ll in (m + 2)..=l {
            let llf = ll as f64;
            let mf = m as f64;
            let f = ((2.0 * llf - 1.0) * x * fm1 - (llf - 1.0 + mf) * fm2) / (llf - mf);
            fm2 = fm1;
            fm1 = f;
        }
        fm1
    }

    /// Y_{l,m}(theta, phi=0) with Condon-Shortley phase, real for all m with
    /// the signed (sin theta)^|m| continuation; Y_{l,-m} = (-1)^m Y_{l,m}.
    pub fn real_y_lm(l: u32, m: i32, theta: f64) -> f64 {
        let m_abs = m.unsigned_abs();
        assert!(m_abs <= l, "|m| must not exceed l");
        let ct = theta.cos();
        let st = theta.sin();
        // normalization sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!)
        let mut ratio = 1.0; // (l-m)!/(l+m)!
        for k in (l - m_abs + 1)..=(l + m_abs) {
            ratio /= k as f64;
        }
        let norm = ((2.0 * l as f64 + 1.0) / (4.0 * std::f64::consts::PI) * ratio).sqrt();
        let plm = legendre_diff(l, m_abs, ct) * st.powi(m_abs as i32);
        let cs = if m_abs % 2 == 1 { -1.0 } else { 1.0 }; // Condon-Shortley
        let val = cs * norm * plm;
        if m < 0 && m_abs % 2 == 1 {
            -val
        } else {
            val
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Independent oracle: adaptive Simpson quadrature of
    /// 2 pi Int Y_{lm} Y_{l'm} (cos^2 - 1/3) sin theta d theta on [0, pi].
    fn quadrature_oracle(l: u32, lp: u32, m: i32) -> f64 {
        let f = |t: f64| {
            harmonics::real_y_lm(l, m, t)
                * harmonics::real_y_lm(lp, m, t)
                * (t.cos() * t.cos() - 1.0 / 3.0)
                * t.sin()
        };
        2.0 * std::f64::consts::PI * adaptive_simpson(&f, 0.0, std::f64::consts::PI, 1e-14, 40)
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, right, tol / 2.0, depth - 1)
            }
        }
        rec(f, a, b, simpson(f, a, b), tol, depth)
    }

    #[test]
    fn p2_exact_p_wave_entries() {
        assert_eq!(p2_element(1, 1, 0).unwrap(), 4.0 / 15.0);
        assert_eq!(p2_element(1, 1, 1).unwrap(), -2.0 / 15.0);
    }

    #[test]
    fn p2_against_quadrature_oracle() {
        for m in 0..=3i32 {
            for l in (1..=17u32).filter(|l| *l as i32 >= m) {
                for lp in (1..=17u32).filter(|l| *l as i32 >= m) {
                    let got = p2_element(l, lp, m).unwrap();
                    let want = quadrature_oracle(l, lp, m);
                    assert!(
                        (got - want).abs() <= 1e-12,
                        "p2({l},{lp},{m}) = {got}, quadrature {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn p2_specific_offdiagonal() {
        // (3,5,1) checked against the quadrature oracle at tight tolerance
        let got = p2_element(3, 5, 1).unwrap();
        let want = quadrature_oracle(3, 5, 1);
        assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn p2_rejects_m_above_min_l() {
        assert!(p2_element(1, 3, 2).is_err());
    }

    #[test]
    fn coupling_matrix_structure() {
        let ch = ChannelSet::new(1, vec![1, 3, 5]).unwrap();
        let q = coupling_matrix(&ch);
        assert_eq!(q.n(), 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(q.entry(i, j), q.entry(j, i));
                if (ch.ells()[i] as i32 - ch.ells()[j] as i32).abs() > 2 {
                    assert_eq!(q.entry(i, j), 0.0);
                }
            }
        }
        let single = coupling_matrix(&ChannelSet::new(0, vec![1]).unwrap());
        assert_eq!(single.entry(0, 0), 4.0 / 15.0);
    }

    #[test]
    fn trace_is_ordering_invariant() {
        let ch = ChannelSet::new(0, vec![1, 3, 5, 7]).unwrap();
        let q = coupling_matrix(&ch);
        let tr: f64 = (0..4).map(|i| q.entry(i, i)).sum();
        let by_hand: f64 = [7, 1, 5, 3].iter().map(|&l| p2_element(l, l, 0).unwrap()).sum();
        assert_relative_eq!(tr, by_hand, max_relative = 1e-15);
    }

    #[test]
    fn alpha_weighting_limits() {
        let m0 = ChannelSet::new(0, vec![1, 3, 5]).unwrap();
        let m1 = ChannelSet::new(1, vec![1, 3, 5]).unwrap();
        let q0 = coupling_matrix(&m0);
        let qa = alpha_weighted_matrix(0.0, &m0, &m1).unwrap();
        assert_eq!(qa.q(), q0.q());

        // quasi-long-range angle: cos^2 = 1/3 cancels the (1,1) entry exactly
        let a_ql = (1.0f64 / 3.0).sqrt().acos();
        let qql = alpha_weighted_matrix(a_ql, &m0, &m1).unwrap();
        assert!(qql.entry(0, 0).abs() < 1e-16);

        let qpi4 = alpha_weighted_matrix(std::f64::consts::FRAC_PI_4, &m0, &m1).unwrap();
        assert_relative_eq!(qpi4.entry(0, 0), 1.0 / 15.0, max_relative = 1e-14);

        let bad = ChannelSet::new(1, vec![1, 3]).unwrap();
        assert!(alpha_weighted_matrix(0.3, &m0, &bad).is_err());
    }

    #[test]
    fn channel_set_validation() {
        assert!(ChannelSet::new(0, vec![2]).is_err());
        assert!(ChannelSet::new(0, vec![3, 1]).is_err());
        assert!(ChannelSet::new(3, vec![1, 3]).is_err());
        assert!(ChannelSet::new(0, vec![]).is_err());
        let c = ChannelSet::odd_up_to(1, 17).unwrap();
        assert_eq!(c.ells(), &[1, 3, 5, 7, 9, 11, 13, 15, 17]);
        let c2 = ChannelSet::odd_up_to(3, 9).unwrap();
        assert_eq!(c2.ells(), &[3, 5, 7, 9]);
    }

    proptest! {
        #[test]
        fn p2_m_sign_symmetry(l in 1u32..18, lp in 1u32..18, m in 0i32..6) {
            prop_assume!(m <= l.min(lp) as i32);
            let plus = p2_element(l, lp, m).unwrap();
            let minus = p2_element(l, lp, -m).unwrap();
            prop_assert_eq!(plus.to_bits(), minus.to_bits());
        }

        #[test]
        fn p2_selection_rule(l in 1u32..18, lp in 1u32..18, m in 0i32..2) {
            prop_assume!(m <= l.min(lp) as i32);
            if (l as i32 - lp as i32).abs() >= 4 {
                prop_assert_eq!(p2_element(l, lp, m).unwrap(), 0.0);
            }
        }
    }
}
