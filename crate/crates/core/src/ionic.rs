//! Aliev-Panfilov ionic kinetics and the initial stimulus.
//!
//! ```text
//! f(u, w) = A u (u - a)(u - 1) + u w
//! g(u, w) = eps (A u (u - 1 - a) + w)
//! ```

use crate::error::{Error, Result};
use crate::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlievPanfilovParams {
    /// Excitation strength `A`.
    pub a_strength: f64,
    /// Excitation threshold `a`, in `(0, 1)`.
    pub threshold: f64,
    /// Recovery time-scale ratio `eps`.
    pub eps: f64,
    /// Scalar (isotropic) conductivity.
    pub conductivity: f64,
}

impl Default for AlievPanfilovParams {
    fn default() -> Self {
        AlievPanfilovParams {
            a_strength: 8.0,
            threshold: 0.15,
            eps: 0.2,
            conductivity: 1.0,
        }
    }
}

impl AlievPanfilovParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_strength > 0.0 && self.a_strength.is_finite()) {
            return Err(Error::param("model.A", "must be positive"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::param("model.a", "must satisfy 0 < a < 1"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::param("model.eps", "must be positive"));
        }
        if !(self.conductivity > 0.0 && self.conductivity.is_finite()) {
            return Err(Error::param("model.M", "must be positive"));
        }
        Ok(())
    }

    /// Upper bound of the invariant region for `w`: `A (1 + a)^2 / 4`.
    pub fn w_max(&self) -> f64 {
        self.a_strength * (1.0 + self.threshold).powi(2) / 4.0
    }
}

/// Values of both reaction terms and their four partial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReactionEval {
    pub f: f64,
    pub g: f64,
    pub f_u: f64,
    pub f_w: f64,
    pub g_u: f64,
    pub g_w: f64,
}

pub fn react(u: f64, w: f64, p: &AlievPanfilovParams) -> ReactionEval {
    let (big_a, a, eps) = (p.a_strength, p.threshold, p.eps);
    ReactionEval {
        f: big_a * u * (u - a) * (u - 1.0) + u * w,
        g: eps * (big_a * u * (u - 1.0 - a) + w),
        f_u: big_a * (3.0 * u * u - 2.0 * (1.0 + a) * u + a) + w,
        f_w: u,
        g_u: eps * big_a * (2.0 * u - 1.0 - a),
        g_w: eps,
    }
}

/// The reaction model driving a run. `Off` zeroes both terms, leaving a pure
/// Neumann heat equation for `u` and a frozen `w`; used for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reaction {
    AlievPanfilov(AlievPanfilovParams),
    Off,
}

impl Reaction {
    #[inline]
    pub fn eval(&self, u: f64, w: f64) -> ReactionEval {
        match self {
            Reaction::AlievPanfilov(p) => react(u, w, p),
            Reaction::Off => ReactionEval::default(),
        }
    }
}

/// Initial data `u0 = exp(-((x-1)^2 + y^2) / 0.25)`, `w0 = 0`.
pub fn initial_data(x: Point) -> (f64, f64) {
    let r2 = (x[0] - 1.0).powi(2) + x[1].powi(2);
    ((-r2 / 0.25).exp(), 0.0)
}

/// Largest `|grad f|` and `|grad g|` over a uniform grid of the box
/// `[-delta, 1+delta] x [-delta, w_max+delta]`, i.e. Lipschitz constants of
/// the kinetics on the a priori invariant region.
pub fn lipschitz_on_box(p: &AlievPanfilovParams, delta: f64, samples: usize) -> (f64, f64) {
    let (u_lo, u_hi) = (-delta, 1.0 + delta);
    let (w_lo, w_hi) = (-delta, p.w_max() + delta);
    let mut kf: f64 = 0.0;
    let mut kg: f64 = 0.0;
    for i in 0..=samples {
        let u = u_lo + (u_hi - u_lo) * i as f64 / samples as f64;
        for j in 0..=samples {
            let w = w_lo + (w_hi - w_lo) * j as f64 / samples as f64;
            let r = react(u, w, p);
            kf = kf.max(r.f_u.hypot(r.f_w));
            kg = kg.max(r.g_u.hypot(r.g_w));
        }
    }
    (kf, kg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P: AlievPanfilovParams = AlievPanfilovParams {
        a_strength: 8.0,
        threshold: 0.15,
        eps: 0.2,
        conductivity: 1.0,
    };

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-14
    }

    #[test]
    fn origin_is_equilibrium() {
        let r = react(0.0, 0.0, &P);
        assert_eq!((r.f, r.g), (0.0, 0.0));
    }

    #[test]
    fn excited_state_values() {
        let r = react(1.0, 0.0, &P);
        assert!(close(r.f, 0.0));
        assert!(close(r.g, -0.24));
    }

    #[test]
    fn midpoint_values() {
        let r = react(0.5, 0.2, &P);
        assert!(close(r.f, -0.6), "f = {}", r.f);
        assert!(close(r.g, -0.48), "g = {}", r.g);
    }

    #[test]
    fn derivatives_at_origin() {
        let r = react(0.0, 0.0, &P);
        assert!(close(r.f_u, 1.2));
        assert!(close(r.g_u, -1.84));
        assert!(close(r.g_w, 0.2));
        assert!(close(react(0.7, -3.0, &P).g_w, 0.2));
    }

    #[test]
    fn roots_of_f_at_zero_recovery() {
        for u in [0.0, P.threshold, 1.0] {
            assert!(react(u, 0.0, &P).f.abs() < 1e-15);
        }
        // and nowhere else on a fine sample
        for i in 0..=1000 {
            let u = -0.5 + 2.0 * i as f64 / 1000.0;
            let near_root = [0.0, P.threshold, 1.0].iter().any(|r| (u - r).abs() < 1e-9);
            if !near_root {
                assert!(react(u, 0.0, &P).f.abs() > 0.0);
            }
        }
    }

    #[test]
    fn initial_data_values() {
        assert_eq!(initial_data([1.0, 0.0]), (1.0, 0.0));
        let corner = (-4.0f64).exp();
        assert!((initial_data([0.0, 0.0]).0 - corner).abs() < 1e-17);
        assert!((initial_data([1.0, 1.0]).0 - corner).abs() < 1e-17);
        assert!((initial_data([0.0, 0.0]).0 - 0.018316).abs() < 1e-6);
    }

    #[test]
    fn parameter_validation() {
        assert!(P.validate().is_ok());
        assert!(AlievPanfilovParams {
            threshold: 1.5,
            ..P
        }
        .validate()
        .is_err());
        assert!(AlievPanfilovParams { eps: 0.0, ..P }.validate().is_err());
    }

    #[test]
    fn lipschitz_constants_are_finite() {
        let (kf, kg) = lipschitz_on_box(&P, 0.1, 200);
        assert!(kf.is_finite() && kf > 0.0);
        assert!(kg.is_finite() && kg > 0.0);
    }

    #[test]
    fn reaction_off_is_zero() {
        assert_eq!(Reaction::Off.eval(0.3, 0.7), ReactionEval::default());
    }

    fn rel_close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0)
    }

    proptest! {
        #[test]
        fn jacobian_matches_central_differences(u in -0.5f64..1.5, w in -0.5f64..2.5) {
            let h = 1e-6;
            let r = react(u, w, &P);
            let du = |s: f64| react(u + s, w, &P);
            let dw = |s: f64| react(u, w + s, &P);
            prop_assert!(rel_close(r.f_u, (du(h).f - du(-h).f) / (2.0 * h)));
            prop_assert!(rel_close(r.f_w, (dw(h).f - dw(-h).f) / (2.0 * h)));
            prop_assert!(rel_close(r.g_u, (du(h).g - du(-h).g) / (2.0 * h)));
            prop_assert!(rel_close(r.g_w, (dw(h).g - dw(-h).g) / (2.0 * h)));
        }
    }
}
