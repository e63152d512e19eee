//! Legendre-Fenchel conjugates `f*(s) = sup_x { s·x − f(x) }`.
//!
//! Closed forms for the affine, power and exponential families, a brute-force
//! grid conjugate, and the separable grid evaluation of the variational form
//! of the KL information cost.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simplex::{Policy, Prior};

/// Uniform 1-D grid `lo, lo + h, …, hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    points: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidGrid(format!(
                "need finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        if points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {points}"
            )));
        }
        Ok(Self { lo, hi, points })
    }

    /// `[−10, 10]` with 10001 points, used for function conjugates.
    pub fn function_default() -> Self {
        Self {
            lo: -10.0,
            hi: 10.0,
            points: 10_001,
        }
    }

    /// `[−20, 5]` with 25001 points, used for adversary cost coordinates.
    pub fn cost_default() -> Self {
        Self {
            lo: -20.0,
            hi: 5.0,
            points: 25_001,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        debug_assert!(i < self.points);
        if i == self.points - 1 {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |i| self.point(i))
    }

    fn is_edge(&self, i: usize) -> bool {
        i == 0 || i == self.points - 1
    }

    fn edge(&self, i: usize) -> Option<Boundary> {
        match i {
            0 => Some(Boundary::Lower),
            _ if i == self.points - 1 => Some(Boundary::Upper),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Lower,
    Upper,
}

/// Grid estimate of `f*(s)`. When `boundary` is set the supremum may lie
/// outside the grid (possibly `+∞`), so `value` is only a lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugateResult {
    pub value: f64,
    pub maximizer: f64,
    pub boundary: Option<Boundary>,
}

impl ConjugateResult {
    pub fn is_trusted(&self) -> bool {
        self.boundary.is_none()
    }
}

/// Conjugate of `f(x) = a·x − b`: `b` at `s = a`, `+∞` elsewhere.
pub fn conjugate_affine(a: f64, b: f64, s: f64) -> f64 {
    if s == a {
        b
    } else {
        f64::INFINITY
    }
}

/// Hölder conjugate exponent `α′` with `1/α + 1/α′ = 1`.
pub fn holder_conjugate(alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(Error::InvalidExponent(alpha));
    }
    Ok(alpha / (alpha - 1.0))
}

/// Conjugate of `f(x) = |x|^α / α`: `|s|^{α′} / α′`.
pub fn conjugate_power(alpha: f64, s: f64) -> Result<f64> {
    let dual = holder_conjugate(alpha)?;
    Ok(s.abs().powf(dual) / dual)
}

/// Conjugate of `f(x) = e^x`: `s log s − s` for `s > 0`, `0` at `s = 0`, `+∞` for `s < 0`.
pub fn conjugate_exp(s: f64) -> f64 {
    if s > 0.0 {
        s * s.ln() - s
    } else if s == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `max_x { s·x − f(x) }` over the grid, lowest index on ties.
pub fn numeric_conjugate<F>(f: F, grid: &Grid1D, s: f64) -> Result<ConjugateResult>
where
    F: Fn(f64) -> f64,
{
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, x) in grid.iter().enumerate() {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::InvalidFunction { point: x });
        }
        let v = s * x - fx;
        if v > best {
            best = v;
            best_i = i;
        }
    }
    Ok(ConjugateResult {
        value: best,
        maximizer: grid.point(best_i),
        boundary: grid.edge(best_i),
    })
}

/// Grid evaluation of the variational form of `−(1/β) KL(p ‖ p₀)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlConjugate {
    pub value: f64,
    /// Per-action grid minimizer of `−p C + p₀ e^{βC}`.
    pub minimizers: Vec<f64>,
}

/// `Σ_x min_C { −p(x) C + p₀(x) e^{βC} } − (1/β)(log β + 1)`, each minimum
/// taken over `cost_grid`. The constant appears once, outside the sum.
///
/// A minimizer on the grid edge means the true minimum may lie outside the
/// grid; that case is reported as [`Error::BoundaryWarning`] carrying the value.
pub fn numeric_kl_conjugate(
    p: &Policy,
    p0: &Prior,
    beta: f64,
    cost_grid: &Grid1D,
) -> Result<KlConjugate> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidBeta {
            beta,
            reason: "the KL conjugate needs beta > 0",
        });
    }
    if p.len() != p0.len() {
        return Err(Error::DimensionMismatch {
            expected: p0.len(),
            found: p.len(),
        });
    }
    if !p0.is_strict() {
        return Err(Error::InvalidDistribution(
            "prior must be strictly positive".into(),
        ));
    }
    let exp_grid: Vec<f64> = cost_grid.iter().map(|c| (beta * c).exp()).collect();
    let mut total = 0.0;
    let mut minimizers = Vec::with_capacity(p.len());
    let mut edges = Vec::new();
    for (x, (&px, &qx)) in p.weights().iter().zip(p0.weights()).enumerate() {
        let mut best_i = 0;
        let mut best = f64::INFINITY;
        for (i, (c, e)) in cost_grid.iter().zip(&exp_grid).enumerate() {
            let v = -px * c + qx * e;
            if v < best {
                best = v;
                best_i = i;
            }
        }
        if cost_grid.is_edge(best_i) {
            edges.push(x);
        }
        total += best;
        minimizers.push(cost_grid.point(best_i));
    }
    let value = total - (beta.ln() + 1.0) / beta;
    if edges.is_empty() {
        Ok(KlConjugate { value, minimizers })
    } else {
        Err(Error::BoundaryWarning {
            value,
            coordinates: edges,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::kl_divergence;
    use approx::assert_relative_eq;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn affine_examples() {
        assert_eq!(conjugate_affine(2.0, 3.0, 2.0), 3.0);
        assert_eq!(conjugate_affine(2.0, 3.0, 2.1), f64::INFINITY);
        assert_eq!(conjugate_affine(0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn power_examples() {
        assert_eq!(conjugate_power(2.0, 2.0).unwrap(), 2.0);
        assert_eq!(conjugate_power(2.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(conjugate_power(4.0, 1.0).unwrap(), 0.75, epsilon = 1e-15);
        assert_relative_eq!(conjugate_power(4.0, -1.0).unwrap(), 0.75, epsilon = 1e-15);
        assert_eq!(conjugate_power(1.0, 1.0), Err(Error::InvalidExponent(1.0)));
        assert_eq!(conjugate_power(0.5, 1.0), Err(Error::InvalidExponent(0.5)));
    }

    #[test]
    fn exp_examples() {
        assert_eq!(conjugate_exp(1.0), -1.0);
        assert_eq!(conjugate_exp(0.0), 0.0);
        assert_relative_eq!(conjugate_exp(E), 0.0, epsilon = 1e-15);
        assert_eq!(conjugate_exp(-0.5), f64::INFINITY);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(1.0, 1.0, 10).is_err());
        assert!(Grid1D::new(0.0, 1.0, 1).is_err());
        assert!(Grid1D::new(f64::NAN, 1.0, 3).is_err());
        let g = Grid1D::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(
            g.iter().collect::<Vec<_>>(),
            vec![-1.0, -0.5, 0.0, 0.5, 1.0]
        );
        assert_eq!(Grid1D::cost_default().step(), 0.001);
    }

    #[test]
    fn numeric_conjugate_examples() {
        let grid = Grid1D::function_default();
        let r = numeric_conjugate(f64::exp, &grid, 1.0).unwrap();
        assert!((r.value + 1.0).abs() < 1e-4);
        assert!(r.is_trusted());

        let r = numeric_conjugate(|x| x * x / 2.0, &grid, 3.0).unwrap();
        assert!((r.value - 4.5).abs() < 1e-4);
        assert!((r.maximizer - 3.0).abs() < grid.step());

        let r = numeric_conjugate(|x| x, &grid, 2.0).unwrap();
        assert_eq!(r.boundary, Some(Boundary::Upper));
        let r = numeric_conjugate(|x| x, &grid, 0.0).unwrap();
        assert_eq!(r.boundary, Some(Boundary::Lower));
        let r = numeric_conjugate(|x| 2.0 * x, &grid, 1.0).unwrap();
        assert_eq!(r.boundary, Some(Boundary::Lower));
    }

    #[test]
    fn numeric_conjugate_rejects_non_finite_function() {
        let grid = Grid1D::new(-1.0, 1.0, 3).unwrap();
        let err = numeric_conjugate(|x| 1.0 / x, &grid, 0.0).unwrap_err();
        assert_eq!(err, Error::InvalidFunction { point: 0.0 });
    }

    #[test]
    fn exp_conjugate_matches_closed_form_at_several_slopes() {
        let grid = Grid1D::function_default();
        for s in [0.1, 0.5, 1.0, 2.0, E] {
            let r = numeric_conjugate(f64::exp, &grid, s).unwrap();
            assert!((r.value - conjugate_exp(s)).abs() < 1e-4, "s={s}");
        }
    }

    #[test]
    fn power_conjugate_matches_closed_form() {
        let grid = Grid1D::function_default();
        for alpha in [1.5, 2.0, 3.0, 4.0] {
            for s in [-1.5, -0.5, 0.25, 1.0, 2.0] {
                let f = |x: f64| x.abs().powf(alpha) / alpha;
                let r = numeric_conjugate(f, &grid, s).unwrap();
                assert!(r.is_trusted());
                let exact = conjugate_power(alpha, s).unwrap();
                assert!((r.value - exact).abs() < 1e-4, "alpha={alpha} s={s}");
            }
        }
    }

    #[test]
    fn biconjugation_recovers_convex_functions() {
        let grid = Grid1D::function_default();
        let h = grid.step();
        let quad = |x: f64| x * x / 2.0;
        let star = |s: f64| numeric_conjugate(quad, &grid, s).unwrap().value;
        let s_grid = Grid1D::new(-10.0, 10.0, 2001).unwrap();
        for x in [-4.0, -1.3, 0.0, 0.7, 2.5] {
            let back = numeric_conjugate(star, &s_grid, x).unwrap();
            assert!((back.value - quad(x)).abs() <= 10.0 * h, "x={x}");
        }

        let exp_star = |s: f64| numeric_conjugate(f64::exp, &grid, s).unwrap().value;
        let s_grid = Grid1D::new(0.01, 10.0, 2001).unwrap();
        for x in [-2.0, -0.5, 0.0, 1.0, 2.0] {
            let back = numeric_conjugate(exp_star, &s_grid, x).unwrap();
            assert!((back.value - x.exp()).abs() <= 10.0 * h, "x={x}");
        }
    }

    #[test]
    fn kl_conjugate_examples() {
        let grid = Grid1D::cost_default();
        let p0 = Prior::uniform(2);
        let v = numeric_kl_conjugate(p0.as_policy(), &p0, 1.0, &grid).unwrap();
        assert!(v.value.abs() < 1e-3);

        let p = Policy::new(vec![0.75, 0.25]).unwrap();
        let v = numeric_kl_conjugate(&p, &p0, 1.0, &grid).unwrap();
        assert!((v.value + 0.130812).abs() < 1e-3);

        let p = Policy::new(vec![E / (1.0 + E), 1.0 / (1.0 + E)]).unwrap();
        let v = numeric_kl_conjugate(&p, &p0, 1.0, &grid).unwrap();
        let exact = -kl_divergence(&p, &p0).unwrap();
        assert!((v.value - exact).abs() < 1e-3);
    }

    #[test]
    fn kl_conjugate_minimizers_approach_best_response() {
        let grid = Grid1D::cost_default();
        let p0 = Prior::new(vec![0.2, 0.3, 0.5]).unwrap();
        let p = Policy::new(vec![0.6, 0.1, 0.3]).unwrap();
        for beta in [0.5, 1.0, 2.0] {
            let v = numeric_kl_conjugate(&p, &p0, beta, &grid).unwrap();
            for ((c, &px), &qx) in v.minimizers.iter().zip(p.weights()).zip(p0.weights()) {
                let exact = (px / (beta * qx)).ln() / beta;
                assert!((c - exact).abs() <= grid.step(), "beta={beta}");
            }
        }
    }

    #[test]
    fn kl_conjugate_boundary_and_errors() {
        let grid = Grid1D::cost_default();
        let p0 = Prior::uniform(2);
        let err = numeric_kl_conjugate(&Policy::delta(2, 0), &p0, 1.0, &grid).unwrap_err();
        assert!(
            matches!(err, Error::BoundaryWarning { ref coordinates, .. } if coordinates == &[1])
        );
        assert!(matches!(
            numeric_kl_conjugate(&Policy::uniform(2), &p0, -1.0, &grid),
            Err(Error::InvalidBeta { .. })
        ));
        assert!(numeric_kl_conjugate(&Policy::uniform(3), &p0, 1.0, &grid).is_err());
    }
}
