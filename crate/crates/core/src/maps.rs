//! On-site maps.

use crate::error::{Error, Result};

/// A local map `x ↦ f(x)` applied independently at every lattice site.
pub trait OnSiteMap: Sync {
    /// Evaluates the map without input validation. The engine guards
    /// divergence separately, so the hot loop uses this form.
    fn apply(&self, x: f64) -> f64;

    fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::domain("x", x, "finite"));
        }
        Ok(self.apply(x))
    }
}

/// `f(x) = exp(-nu·x²) + beta`, bounded in `[beta, 1 + beta]` for `nu > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMap {
    nu: f64,
    beta: f64,
}

impl GaussMap {
    pub const DEFAULT_NU: f64 = 7.5;

    pub fn new(nu: f64, beta: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::domain("nu", nu, "0 < nu < inf"));
        }
        if !beta.is_finite() {
            return Err(Error::domain("beta", beta, "finite"));
        }
        Ok(GaussMap { nu, beta })
    }

    pub fn with_beta(beta: f64) -> Result<Self> {
        Self::new(Self::DEFAULT_NU, beta)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl OnSiteMap for GaussMap {
    #[inline]
    fn apply(&self, x: f64) -> f64 {
        (-self.nu * x * x).exp() + self.beta
    }
}

/// Plain iteration `x(t+1) = f(x(t))`, returning `steps + 1` values.
pub fn classical_iterate<M: OnSiteMap>(map: &M, x0: f64, steps: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0;
    out.push(x);
    for _ in 0..steps {
        x = map.eval(x)?;
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gauss_examples() {
        let f = GaussMap::with_beta(-0.4).unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 0.6);
        let f = GaussMap::with_beta(-0.5).unwrap();
        assert!((f.eval(100.0).unwrap() + 0.5).abs() <= 1e-15);
        let f = GaussMap::with_beta(-0.9).unwrap();
        // exp(-0.3) - 0.9
        assert!((f.eval(0.2).unwrap() - (-0.159_181_779_318_282_2)).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_input_and_bad_params() {
        let f = GaussMap::with_beta(-0.4).unwrap();
        assert!(f.eval(f64::NAN).is_err());
        assert!(f.eval(f64::INFINITY).is_err());
        assert!(GaussMap::new(-7.5, -0.4).is_err());
        assert!(GaussMap::new(0.0, -0.4).is_err());
        assert!(GaussMap::new(7.5, f64::NAN).is_err());
    }

    #[test]
    fn iterate_examples() {
        let f = GaussMap::with_beta(-0.4).unwrap();
        assert_eq!(classical_iterate(&f, 0.0, 1).unwrap(), vec![0.0, 0.6]);
        assert_eq!(classical_iterate(&f, 0.123, 0).unwrap(), vec![0.123]);
    }

    #[test]
    fn fixed_point_is_stationary() {
        // Bisection on h(x) = exp(-7.5 x²) - 0.5 - x over [-0.5, 0.5].
        let h = |x: f64| (-7.5 * x * x).exp() - 0.5 - x;
        let (mut lo, mut hi) = (-0.5_f64, 0.5_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(lo) * h(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let fixed = 0.5 * (lo + hi);
        let f = GaussMap::with_beta(-0.5).unwrap();
        let seq = classical_iterate(&f, fixed, 10).unwrap();
        assert_eq!(seq.len(), 11);
        for x in seq {
            // |f'(x*)| ≈ 2.27, so ten steps amplify the bisection residual ~4e3 times.
            assert!((x - fixed).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn bounded_and_even(x in -1e3f64..1e3, beta in -1.0f64..0.0, nu in 0.1f64..20.0) {
            let f = GaussMap::new(nu, beta).unwrap();
            let y = f.eval(x).unwrap();
            prop_assert!(y.abs() <= beta.abs().max((1.0 + beta).abs()));
            prop_assert!(y >= beta && y <= 1.0 + beta);
            prop_assert_eq!(y, f.eval(-x).unwrap());
        }
    }
}
