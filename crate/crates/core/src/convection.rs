//! Skew-symmetric discrete convection form on a uniform grid of
//! piecewise-linear elements.
//!
//! With `c(u, v, w) = ∫ u v_x w` integrated exactly for P1 fields, the form is
//!
//! ```text
//! b(u, v, w) = (1/3) [ c(u, v, w) - c(u, w, v) ]
//! ```
//!
//! which is exactly antisymmetric in `(v, w)` and satisfies
//! `b(u, u, w) = ∫ u u_x w` for smooth `u`. The first slot is the advecting
//! field; the Leray models filter exactly that slot.

use crate::snapshot::BoundaryCondition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Convection {
    n: usize,
    periodic: bool,
}

impl Convection {
    pub fn new(n: usize, bc: BoundaryCondition) -> Self {
        Convection {
            n,
            periodic: bc == BoundaryCondition::Periodic,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn elements(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let count = if self.periodic {
            if self.n >= 2 { self.n } else { 0 }
        } else {
            self.n.saturating_sub(1)
        };
        (0..count).map(move |e| (e, (e + 1) % self.n))
    }

    /// `c(u, v, w) = ∫ u v_x w`, exact for P1 fields (the element length cancels).
    pub fn advective(&self, u: &[f64], v: &[f64], w: &[f64]) -> f64 {
        self.elements()
            .map(|(a, b)| {
                (v[b] - v[a]) / 6.0
                    * (2.0 * u[a] * w[a] + u[a] * w[b] + u[b] * w[a] + 2.0 * u[b] * w[b])
            })
            .sum()
    }

    /// `b(u, v, w)`.
    pub fn trilinear(&self, u: &[f64], v: &[f64], w: &[f64]) -> f64 {
        (self.advective(u, v, w) - self.advective(u, w, v)) / 3.0
    }

    /// `out_i = b(u, v, e_i)` for every nodal test function `e_i`.
    pub fn tested_into(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (a, b) in self.elements() {
            let dv = (v[b] - v[a]) / 6.0;
            let q = (2.0 * u[a] * v[a] + u[a] * v[b] + u[b] * v[a] + 2.0 * u[b] * v[b]) / 6.0;
            out[a] += dv * (2.0 * u[a] + u[b]) + q;
            out[b] += dv * (u[a] + 2.0 * u[b]) - q;
        }
        out.iter_mut().for_each(|o| *o /= 3.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(n: usize, k: f64, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * k * i as f64 / n as f64 + phase).sin())
            .collect()
    }

    #[test]
    fn tested_vector_matches_trilinear() {
        let c = Convection::new(12, BoundaryCondition::Periodic);
        let u = wave(12, 1.0, 0.3);
        let v = wave(12, 2.0, 1.1);
        let mut out = vec![0.0; 12];
        c.tested_into(&u, &v, &mut out);
        for i in 0..12 {
            let mut e = vec![0.0; 12];
            e[i] = 1.0;
            assert!((out[i] - c.trilinear(&u, &v, &e)).abs() < 1e-14);
        }
    }

    #[test]
    fn skew_in_last_two_slots() {
        for bc in [BoundaryCondition::Periodic, BoundaryCondition::Dirichlet] {
            let c = Convection::new(10, bc);
            let u = wave(10, 1.0, 0.2);
            let v = wave(10, 3.0, 0.4);
            let w = wave(10, 2.0, 2.0);
            assert!((c.trilinear(&u, &v, &w) + c.trilinear(&u, &w, &v)).abs() < 1e-14);
            assert!(c.trilinear(&u, &v, &v).abs() < 1e-14);
        }
    }

    #[test]
    fn consistent_with_u_ux_on_smooth_fields() {
        // u = sin(2πx): u u_x = π sin(4πx), so tested against sin(4πx) gives π/2.
        let n = 400;
        let c = Convection::new(n, BoundaryCondition::Periodic);
        let u = wave(n, 1.0, 0.0);
        let w = wave(n, 2.0, 0.0);
        let val = c.trilinear(&u, &u, &w);
        assert!((val - std::f64::consts::FRAC_PI_2).abs() < 1e-3, "{val}");
    }
}
