//! Closed-form laws of the model. All functions are pure.
//!
//! Rates are passed as profiles of the *branching rate* seen by one
//! individual (for the reactant that is `b2` times the catalyst mass); wrap a
//! catalyst path in [`Scaled`] to supply `b2`.

use crate::diffusion::MassProfile;
use crate::error::{input, Result};

/// `factor * inner`, e.g. `b2 * η`.
pub struct Scaled<'a, P: ?Sized>(pub f64, pub &'a P);

impl<P: MassProfile + ?Sized> MassProfile for Scaled<'_, P> {
    fn value_at(&self, t: f64) -> f64 {
        self.0 * self.1.value_at(t)
    }
    fn integral(&self, a: f64, b: f64) -> f64 {
        self.0 * self.1.integral(a, b)
    }
}

/// Probability that a single individual branching at rate `λ(s)` (birth and
/// death rate each) has no descendants alive at `t`: `Λ/(1+Λ)` with
/// `Λ = ∫_0^t λ`.
pub fn extinction_prob<P: MassProfile + ?Sized>(rate: &P, t: f64) -> f64 {
    let l = rate.integral(0.0, t.max(0.0));
    l / (1.0 + l)
}

/// CDF at `h` of the height of the most recent common ancestor of two
/// neighbours at level `t` that belong to the same tree, for an individual
/// branching at rate `λ`. With `A(h) = ∫_h^t λ`,
/// `P(τ ≥ h) = A(h)/(1+A(h)) · (1+A(0))/A(0)`.
pub fn mrca_cdf<P: MassProfile + ?Sized>(rate: &P, t: f64, h: f64) -> Result<f64> {
    if !(0.0..=t).contains(&h) {
        return input(format!("need 0 <= h <= t, got h = {h}, t = {t}"));
    }
    let a0 = rate.integral(0.0, t);
    if !(a0 > 0.0) {
        return input("the rate integrates to zero on [0, t]");
    }
    let a = rate.integral(h, t);
    Ok(1.0 - a / (1.0 + a) * (1.0 + a0) / a0)
}

/// Density of [`mrca_cdf`]: `λ(h)/(1+A(h))² · (1+A(0))/A(0)`.
pub fn mrca_density<P: MassProfile + ?Sized>(rate: &P, t: f64, h: f64) -> f64 {
    let (a0, a) = (rate.integral(0.0, t), rate.integral(h, t));
    rate.value_at(h) / (1.0 + a).powi(2) * (1.0 + a0) / a0
}

/// Expected number of level-`t` neighbour pairs whose common ancestor sits at
/// a height in `(h1, h2]`, given reactant mass `y_t` at level `t`, in the
/// diffusion limit: `y_t/b2 · (1/∫_{h2}^t X − 1/∫_{h1}^t X)`.
/// Diverges as `h2 → t`, so `h2 < t` is required.
pub fn reactant_intensity<P: MassProfile + ?Sized>(x: &P, b2: f64, y_t: f64, t: f64, h1: f64, h2: f64) -> Result<f64> {
    check_window(t, h1, h2)?;
    if h1 == h2 {
        return Ok(0.0);
    }
    Ok(y_t / b2 * (1.0 / x.integral(h2, t) - 1.0 / x.integral(h1, t)))
}

/// The same count for the Brownian forest: `x_t (1/(t−h2) − 1/(t−h1))`.
pub fn brownian_intensity(x_t: f64, t: f64, h1: f64, h2: f64) -> Result<f64> {
    check_window(t, h1, h2)?;
    Ok(x_t * (1.0 / (t - h2) - 1.0 / (t - h1)))
}

fn check_window(t: f64, h1: f64, h2: f64) -> Result<()> {
    if !(0.0 <= h1 && h1 <= h2 && h2 < t) {
        return input(format!("need 0 <= h1 <= h2 < t, got ({h1}, {h2}] with t = {t}"));
    }
    Ok(())
}

/// Stretch map `h ↦ ∫_{t−h}^t x`.
pub fn stretch_map<P: MassProfile + ?Sized>(x: &P, t: f64, h: f64) -> f64 {
    x.integral(t - h, t)
}

/// Inverse of [`stretch_map`] on `[0, t]` by bisection.
pub fn stretch_inverse<P: MassProfile + ?Sized>(x: &P, t: f64, v: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, t);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if stretch_map(x, t, mid) < v {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * t.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `E[exp(−λ Y_t) | Y_0 = y]` for a Feller diffusion `dY = sqrt(2 b(t) Y) dW`:
/// `exp(−yλ / (1 + λ ∫_0^t b))`.
pub fn laplace_branching<P: MassProfile + ?Sized>(y: f64, lambda: f64, b: &P, t: f64) -> f64 {
    (-y * lambda / (1.0 + lambda * b.integral(0.0, t))).exp()
}

/// Probability that two independent uniform points of level `t` lie in
/// different trees, for the Brownian forest started from mass `z`. The level
/// carries Poisson(`μ = z/t`) trees with iid exponential masses, so given `N`
/// trees the mass shares are flat Dirichlet and `E[Σ w²] = 2/(N+1)`, giving
/// `P(N ≥ 1) − 2 E[1/(N+1); N ≥ 1] = (1 − e^{−μ}) − 2((1 − e^{−μ})/μ − e^{−μ})`.
pub fn brownian_comparison(z: f64, t: f64) -> f64 {
    let mu = z / t;
    let alive = -(-mu).exp_m1();
    alive - 2.0 * (alive / mu - (-mu).exp())
}

/// Per-realization different-tree probability of two independent uniform
/// picks (with replacement) among individuals with tree sizes `sizes`;
/// 0 for an empty level.
pub fn different_tree_probability(sizes: &[usize]) -> f64 {
    let k: usize = sizes.iter().sum();
    if k == 0 {
        return 0.0;
    }
    let k = k as f64;
    1.0 - sizes.iter().map(|&s| (s as f64 / k).powi(2)).sum::<f64>()
}

/// Composite Simpson rule with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let m = m + m % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `P(τ⁰ ≤ t)` for `dX = sqrt(2 b1 X) dW` from `x0`: `exp(−x0/(b1 t))`.
pub fn feller_extinction(x0: f64, b1: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (-x0 / (b1 * t)).exp()
}

/// Probability that the reactant dies out strictly before the catalyst:
/// `(4 b1 y0 / (b2 x0²) + 1)^(−1/2)`.
pub fn hitting_probability(b1: f64, b2: f64, x0: f64, y0: f64) -> f64 {
    (4.0 * b1 / b2 * y0 / (x0 * x0) + 1.0).powf(-0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::Constant;
    use crate::particle::MassPath;

    #[test]
    fn extinction_values() {
        assert_eq!(extinction_prob(&Constant(1.0), 1.0), 0.5);
        assert_eq!(extinction_prob(&Constant(1.0), 0.0), 0.0);
        assert!(extinction_prob(&Constant(1.0), 1e12) > 1.0 - 1e-11);
        let steps = MassPath::from_steps(&[(0.0, 1.0), (1.0, 3.0)], 5.0, 1).unwrap();
        assert!((extinction_prob(&steps, 2.0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn mrca_law() {
        let one = Constant(1.0);
        assert!((mrca_cdf(&one, 1.0, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mrca_cdf(&one, 1.0, 0.0).unwrap(), 0.0);
        assert!((mrca_cdf(&one, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let mass = simpson(|h| mrca_density(&one, 1.0, h), 0.0, 1.0, 2000);
        assert!((mass - 1.0).abs() < 1e-6);
        assert!(mrca_cdf(&Constant(0.0), 1.0, 0.5).is_err());
        // Closed form for a constant unit rate.
        for &h in &[0.1, 0.4, 0.9] {
            let f = 1.0 - 2.0 * (1.0 - h) / (2.0 - h);
            assert!((mrca_cdf(&one, 1.0, h).unwrap() - f).abs() < 1e-14);
        }
    }

    #[test]
    fn intensities() {
        let one = Constant(1.0);
        assert!((reactant_intensity(&one, 1.0, 1.0, 1.0, 0.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(reactant_intensity(&one, 1.0, 1.0, 1.0, 0.3, 0.3).unwrap(), 0.0);
        let (a, b) = (reactant_intensity(&one, 1.0, 2.0, 1.0, 0.1, 0.4).unwrap(), reactant_intensity(&one, 1.0, 2.0, 1.0, 0.4, 0.7).unwrap());
        assert!((a + b - reactant_intensity(&one, 1.0, 2.0, 1.0, 0.1, 0.7).unwrap()).abs() < 1e-12);
        assert!((brownian_intensity(1.0, 1.0, 0.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(brownian_intensity(1.0, 1.0, 0.2, 0.2).unwrap(), 0.0);
        assert!(brownian_intensity(1.0, 1.0, 0.2, 1.0).is_err());
        assert_eq!(brownian_intensity(1.7, 1.0, 0.1, 0.6).unwrap(), reactant_intensity(&one, 1.0, 1.7, 1.0, 0.1, 0.6).unwrap());
    }

    #[test]
    fn stretch() {
        assert_eq!(stretch_map(&Constant(2.0), 1.0, 0.25), 0.5);
        assert_eq!(stretch_map(&Constant(2.0), 1.0, 0.0), 0.0);
        assert_eq!(stretch_map(&Constant(1.0), 1.0, 0.7), 0.7);
        let x = MassPath::from_steps(&[(0.0, 1.0), (0.5, 3.0)], 1.0, 1).unwrap();
        for &h in &[0.0, 0.2, 0.6, 1.0] {
            assert!((stretch_inverse(&x, 1.0, stretch_map(&x, 1.0, h)) - h).abs() < 1e-12);
        }
    }

    #[test]
    fn laplace() {
        assert!((laplace_branching(1.0, 1.0, &Constant(1.0), 1.0) - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(laplace_branching(1.0, 0.0, &Constant(1.0), 1.0), 1.0);
    }

    #[test]
    fn comparison_values() {
        assert_eq!(different_tree_probability(&[7]), 0.0);
        assert!((different_tree_probability(&[1, 1, 1, 1]) - 0.75).abs() < 1e-15);
        assert_eq!(different_tree_probability(&[]), 0.0);
        // Palm form: E[Σ w²] = 2μ ∫_0^1 v e^{−μv} dv for Poisson(μ) trees
        // with exponential masses, checked by quadrature.
        for &(z, t) in &[(1.0, 0.5), (0.7, 1.0), (3.0, 2.0)] {
            let mu: f64 = z / t;
            let palm = (1.0 - (-mu).exp()) - 2.0 * mu * simpson(|v| v * (-mu * v).exp(), 0.0, 1.0, 2000);
            assert!((brownian_comparison(z, t) - palm).abs() < 1e-10, "{z} {t}");
        }
        // Sparse and dense limits.
        assert!(brownian_comparison(1e-3, 1.0) < 1e-3);
        assert!(brownian_comparison(200.0, 1.0) > 0.98);
    }

    #[test]
    fn hitting() {
        assert!((hitting_probability(1.0, 1.0, 1.0, 1.0) - 5f64.powf(-0.5)).abs() < 1e-15);
        assert!((feller_extinction(1.0, 1.0, 1.0) - (-1f64).exp()).abs() < 1e-15);
    }
}
