//! Computable forms of the finite-time loss-bound machinery: the
//! decreasing diameter `delta(h)`, the ball-volume ratio, the worst- and
//! best-case stretched-exponential bounds for the trisection division
//! strategy, and the width-effect ratio surfaces.

use crate::error::{Error, Result};

/// Smoothness gauge `b * ||x - y||_p^alpha` together with the constants
/// the trisection division strategy induces from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessParams {
    pub b: f64,
    pub alpha: f64,
    pub p: f64,
    pub dim: u32,
}

impl SmoothnessParams {
    pub fn new(b: f64, alpha: f64, p: f64, dim: u32) -> Result<Self> {
        if !(b > 0.0) || !(alpha > 0.0) || !(p >= 1.0) || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "need b > 0, alpha > 0, p >= 1, dim >= 1; got b={b}, alpha={alpha}, p={p}, dim={dim}"
            )));
        }
        Ok(Self { b, alpha, p, dim })
    }

    /// Per-depth shrink rate `3^-alpha`, in (0, 1).
    pub fn gamma(&self) -> f64 {
        3f64.powf(-self.alpha)
    }

    /// Diameter scale `b * 3^alpha * D^(alpha/p)`.
    pub fn c(&self) -> f64 {
        self.b * 3f64.powf(self.alpha) * (self.dim as f64).powf(self.alpha / self.p)
    }

    /// Ball-radius fraction `3^-2alpha * D^(-alpha/p)`, in (0, 1).
    pub fn nu(&self) -> f64 {
        3f64.powf(-2.0 * self.alpha) * (self.dim as f64).powf(-self.alpha / self.p)
    }

    /// Packing constant for the zero near-optimality-dimension case:
    /// `nu^-D`.
    pub fn default_big_c(&self) -> f64 {
        self.nu().powi(-(self.dim as i32))
    }
}

/// Everything the bound formulas consume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub smoothness: SmoothnessParams,
    /// Near-optimality packing constant; defaults to `nu^-D`.
    pub big_c: f64,
    pub w: u32,
    /// 1 under the `sqrt(n) - w` depth cap, `w` under `w*sqrt(n) - w`.
    pub w_prime: u32,
}

impl BoundParams {
    pub fn new(smoothness: SmoothnessParams, w: u32, w_prime: u32) -> Result<Self> {
        Self::with_big_c(smoothness, smoothness.default_big_c(), w, w_prime)
    }

    pub fn with_big_c(
        smoothness: SmoothnessParams,
        big_c: f64,
        w: u32,
        w_prime: u32,
    ) -> Result<Self> {
        if !(big_c > 0.0) || w == 0 || w_prime == 0 {
            return Err(Error::InvalidArgument(format!(
                "need C > 0 and w, w' >= 1; got C={big_c}, w={w}, w'={w_prime}"
            )));
        }
        Ok(Self {
            smoothness,
            big_c,
            w,
            w_prime,
        })
    }
}

/// Decreasing diameter `delta(h) = c * gamma^(h/D)`.
pub fn delta(h: u32, params: &SmoothnessParams) -> f64 {
    params.c() * params.gamma().powf(h as f64 / params.dim as f64)
}

/// Ball-volume ratio `(delta(h-w+1) / delta(h))^D = gamma^-(w-1)`.
/// Defined for `h >= w - 1`.
pub fn ball_ratio(h: u32, w: u32, params: &SmoothnessParams) -> Result<f64> {
    if w == 0 || h + 1 < w {
        return Err(Error::InvalidArgument(format!(
            "ball ratio needs 1 <= w <= h + 1, got h={h}, w={w}"
        )));
    }
    Ok(params.gamma().powi(-((w - 1) as i32)))
}

/// Worst-case loss bound after `n` divisions:
/// `c * exp(-min(sqrt(n) * (w/(w'C)) / q(w) - 2, w'*sqrt(n) - w) * (w/D) * ln(1/gamma))`
/// with `q(w) = (gamma^-w - 1)/(gamma^-1 - 1)`.
pub fn theorem2_bound(n: u64, params: &BoundParams) -> f64 {
    bound_with_sum_factor(n, params, geometric_sum_factor(params))
}

/// Best-case variant: identical shape with the geometric-sum factor
/// replaced by 1. Its extra domination assumption is not checkable, so it
/// never gates anything; it is exposed for side-by-side bound tables.
pub fn theorem3_bound(n: u64, params: &BoundParams) -> f64 {
    bound_with_sum_factor(n, params, 1.0)
}

fn geometric_sum_factor(params: &BoundParams) -> f64 {
    let g = params.smoothness.gamma();
    (g.powi(-(params.w as i32)) - 1.0) / (g.recip() - 1.0)
}

fn bound_with_sum_factor(n: u64, params: &BoundParams, factor: f64) -> f64 {
    let s = &params.smoothness;
    let (w, wp) = (params.w as f64, params.w_prime as f64);
    let root = (n as f64).sqrt();
    let refine_term = root * (w / (wp * params.big_c)) / factor - 2.0;
    let cap_term = wp * root - w;
    s.c() * (-refine_term.min(cap_term) * (w / s.dim as f64) * (1.0 / s.gamma()).ln()).exp()
}

/// Width-effect ratio for zero near-optimality dimension:
/// `w^2 (gamma^-1 - 1) / (gamma^-w - 1)`, the coefficient ratio of the
/// width-`w` bound against width 1. At most `w` on the considered domain.
pub fn w_effect_ratio_d0(w: u32, gamma: f64) -> f64 {
    let w = w as f64;
    w * w * (gamma.recip() - 1.0) / (gamma.powf(-w) - 1.0)
}

/// Width-effect ratio for positive near-optimality dimension `d`:
/// the width-`w` element of the polynomial-rate bound against width 1,
/// both taken to the `-1/d` power.
pub fn w_effect_ratio_dpos(w: u32, gamma: f64, d: f64, dim: u32) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ratio is defined for d > 0, got {d}"
        )));
    }
    Ok(ln_w_effect_ratio_dpos(w, gamma, d, dim)?.exp())
}

/// Natural log of [`w_effect_ratio_dpos`]. The ratio grows like
/// `exp(k/d)` towards small `gamma` and `d`, past what an `f64` can hold,
/// so the log form is the one that stays finite over the whole domain.
pub fn ln_w_effect_ratio_dpos(w: u32, gamma: f64, d: f64, dim: u32) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ratio is defined for d > 0, got {d}"
        )));
    }
    let (wf, dimf) = (w as f64, dim as f64);
    let factor = (gamma.powf(-wf) - 1.0) / (gamma.recip() - 1.0);
    let width_element =
        wf * wf * (gamma.powf(wf * d / dimf) - gamma.powf(2.0 * wf * d / dimf)) / factor;
    let base_element = gamma.powf(d / dimf) - gamma.powf(2.0 * d / dimf);
    Ok((base_element.ln() - width_element.ln()) / d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64, tol: f64) {
        let scale = b.abs().max(1e-300);
        assert!((a - b).abs() / scale <= tol, "{a} vs {b} (rel tol {tol})");
    }

    fn unit_smoothness() -> SmoothnessParams {
        SmoothnessParams::new(1.0, 1.0, 2.0, 1).unwrap()
    }

    #[test]
    fn derived_constants() {
        let s = unit_smoothness();
        rel(s.gamma(), 1.0 / 3.0, 1e-15);
        rel(s.c(), 3.0, 1e-15);
        rel(s.nu(), 1.0 / 9.0, 1e-15);
        rel(s.default_big_c(), 9.0, 1e-15);

        let s2 = SmoothnessParams::new(2.0, 0.5, 2.0, 4).unwrap();
        assert!(s2.gamma() > 0.0 && s2.gamma() < 1.0);
        assert!(s2.nu() > 0.0 && s2.nu() < 1.0);
        assert!(s2.c() > 0.0);
    }

    #[test]
    fn delta_decreases_from_c() {
        let s = unit_smoothness();
        assert_eq!(delta(0, &s), s.c());
        rel(delta(s.dim, &s), s.c() * s.gamma(), 1e-15);
        for h in 1..=100 {
            assert!(delta(h, &s) <= delta(h - 1, &s));
        }
    }

    #[test]
    fn ball_ratio_closed_form() {
        let s = unit_smoothness();
        for h in 0..10 {
            rel(ball_ratio(h, 1, &s).unwrap(), 1.0, 0.0);
        }
        // w = 2 at gamma = 1/3: one extra depth of radius = ratio 3.
        rel(ball_ratio(5, 2, &s).unwrap(), 3.0, 1e-15);
        assert!(ball_ratio(0, 2, &s).is_err());
        // Increasing in w at fixed gamma < 1.
        let mut prev = 0.0;
        for w in 1..=8 {
            let r = ball_ratio(10, w, &s).unwrap();
            assert!(r > prev);
            prev = r;
        }
    }

    /// Frozen values from an independent high-precision evaluation of the
    /// bound formula (b=1, alpha=1, p=2, D=1, C=nu^-1=9, w=w'=1).
    #[test]
    fn theorem2_bound_matches_independent_evaluation() {
        let params = BoundParams::new(unit_smoothness(), 1, 1).unwrap();
        let expected = [
            (1u64, 2.38973801059294253e+01),
            (2, 2.27191140658640265e+01),
            (5, 2.05504830840729333e+01),
            (10, 1.83535653963459531e+01),
            (20, 1.56415687032876942e+01),
            (50, 1.13894277362115020e+01),
            (100, 7.96579336864314236e+00),
            (400, 2.35014311081181715e+00),
            (1000, 5.68761981544867234e-01),
            (10000, 1.34901410161783296e-04),
        ];
        for (n, want) in expected {
            rel(theorem2_bound(n, &params), want, 1e-12);
        }

        let s2 = SmoothnessParams::new(2.5, 0.8, 3.0, 2).unwrap();
        let params2 = BoundParams::new(s2, 3, 3).unwrap();
        let expected2 = [
            (1u64, 1.00861475004584108e+02),
            (10, 1.00222048931993456e+02),
            (100, 9.82265626631200490e+01),
            (1000, 9.21740283586497640e+01),
            (100000, 3.99081392418650296e+01),
        ];
        for (n, want) in expected2 {
            rel(theorem2_bound(n, &params2), want, 1e-12);
        }
    }

    #[test]
    fn theorem2_bound_w1_reduces_to_simple_form() {
        // With w = w' = 1 the geometric-sum factor cancels, so the bound
        // collapses to c * exp(-min(sqrt(n)/C - 2, sqrt(n) - 1) / D * ln(1/gamma)).
        let s = SmoothnessParams::new(1.7, 0.6, 2.0, 3).unwrap();
        let params = BoundParams::new(s, 1, 1).unwrap();
        for n in [1u64, 7, 64, 900, 40000] {
            let root = (n as f64).sqrt();
            let direct = s.c()
                * (-(root / s.default_big_c() - 2.0).min(root - 1.0) / s.dim as f64
                    * (1.0 / s.gamma()).ln())
                .exp();
            rel(theorem2_bound(n, &params), direct, 1e-14);
        }
    }

    #[test]
    fn theorem2_bound_eventually_monotone_and_vanishing() {
        let s = unit_smoothness();
        let params = BoundParams::new(s, 3, 3).unwrap();
        // Tabulate; once the bound starts decreasing it must keep decreasing.
        let mut decreasing = false;
        let mut prev = theorem2_bound(1, &params);
        for n in 2..=10_000u64 {
            let b = theorem2_bound(n, &params);
            if decreasing {
                assert!(b <= prev + 1e-12, "bound rose again at n={n}");
            } else if b < prev {
                decreasing = true;
            }
            prev = b;
        }
        assert!(decreasing);
        assert!(theorem2_bound(1_000_000_000, &params) < 1e-100);
    }

    #[test]
    fn theorem3_bound_at_least_as_tight() {
        let params = BoundParams::new(unit_smoothness(), 4, 4).unwrap();
        for n in [1u64, 10, 100, 1000, 10000] {
            assert!(theorem3_bound(n, &params) <= theorem2_bound(n, &params) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn w_effect_d0_values_and_cap() {
        for gamma in [0.1, 0.3, 0.5, 0.9] {
            rel(w_effect_ratio_d0(1, gamma), 1.0, 1e-15);
        }
        rel(w_effect_ratio_d0(2, 0.5), 4.0 / 3.0, 1e-15);
        for w in 1..=30 {
            for gamma in [0.05, 0.2, 0.5, 0.8, 0.95] {
                let r = w_effect_ratio_d0(w, gamma);
                assert!(r <= w as f64 + 1e-12, "ratio {r} above w={w} at gamma={gamma}");
                assert!(r > 0.0);
            }
        }
    }

    #[test]
    fn w_effect_dpos_values() {
        rel(w_effect_ratio_dpos(1, 0.7, 0.3, 2).unwrap(), 1.0, 1e-12);
        rel(
            w_effect_ratio_dpos(2, 0.5, 0.5, 1).unwrap(),
            0.3860389693210723,
            1e-12,
        );
        assert!(w_effect_ratio_dpos(3, 0.5, 0.0, 1).is_err());
        // Positive over the probe grid, finite in log form (the raw ratio
        // can exceed f64 range toward small gamma and d).
        for w in [2u32, 5, 10, 20] {
            for gamma in [0.06, 0.3, 0.6, 0.94] {
                for d in [0.01, 0.5, 1.0] {
                    let ln_r = ln_w_effect_ratio_dpos(w, gamma, d, 1).unwrap();
                    assert!(ln_r.is_finite(), "w={w} gamma={gamma} d={d} -> ln {ln_r}");
                    let r = w_effect_ratio_dpos(w, gamma, d, 1).unwrap();
                    assert!(r > 0.0, "w={w} gamma={gamma} d={d} -> {r}");
                }
            }
        }
        // Continuity probe in d at an interior grid point.
        let base = w_effect_ratio_dpos(5, 0.5, 0.5, 1).unwrap();
        let nudged = w_effect_ratio_dpos(5, 0.5, 0.5 * (1.0 + 1e-4), 1).unwrap();
        assert!(((base - nudged) / base).abs() < 1e-2);
    }
}
