//! Forward-mode truncated-Taylor ("jet") arithmetic along one coordinate.
//!
//! A [`Jet`] carries the value of a scalar field together with its pure
//! derivatives with respect to a single input coordinate, up to order 3.
//! Seeding the coordinate of interest with [`Jet::var`] and pushing the seed
//! through ordinary arithmetic plus the Gaussian activation yields the exact
//! derivatives of the composite field, which is how the hidden-basis
//! derivative matrices are obtained.
//!
//! # Coefficient convention
//!
//! `coeffs[k]` stores the *derivative value* `f^(k)(x)`, not the Taylor
//! coefficient `f^(k)(x)/k!`.  All rules below (Leibniz products, Faa di
//! Bruno composition) are written for this convention; conversions to scaled
//! Taylor form, if ever needed, happen at the boundary of this module.
//!
//! Only pure (unmixed) partials are supported: every in-scope differential
//! operator uses per-coordinate derivatives, so differentiation is
//! per-coordinate univariate.  The maximum order is fixed at 3 (enough for a
//! third-order spatial derivative) and is enforced at construction.

/// Highest supported derivative order.
pub const MAX_ORDER: usize = 3;

/// Truncated univariate Taylor jet: value plus derivatives up to `order`.
///
/// Jets are immutable `Copy` values; all arithmetic preserves the order
/// fixed at construction.
///
/// # Panics
///
/// Construction panics on orders outside `1..=3`, and binary operations
/// panic when the operand orders differ.  Both are programmer errors, not
/// runtime conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    coeffs: [f64; MAX_ORDER + 1],
    order: usize,
}

impl Jet {
    /// Seed for the coordinate being differentiated: `[x, 1, 0, ...]`.
    pub fn var(value: f64, order: usize) -> Self {
        let mut jet = Self::constant(value, order);
        jet.coeffs[1] = 1.0;
        jet
    }

    /// A value with no dependence on the differentiation coordinate.
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(
            (1..=MAX_ORDER).contains(&order),
            "unsupported jet order {order}; must be 1..=3"
        );
        let mut coeffs = [0.0; MAX_ORDER + 1];
        coeffs[0] = value;
        Jet { coeffs, order }
    }

    /// Rebuild a jet from raw derivative values `[f, f', f'', ...]`.
    pub fn from_derivatives(values: &[f64]) -> Self {
        assert!(
            (2..=MAX_ORDER + 1).contains(&values.len()),
            "derivative list must have length 2..=4"
        );
        let mut coeffs = [0.0; MAX_ORDER + 1];
        coeffs[..values.len()].copy_from_slice(values);
        Jet {
            coeffs,
            order: values.len() - 1,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The field value `f(x)`.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// The derivative value `f^(k)(x)` for `k <= order`.
    pub fn derivative(&self, k: usize) -> f64 {
        assert!(k <= self.order, "derivative order {k} exceeds jet order");
        self.coeffs[k]
    }

    /// Derivative values `[f, f', ..., f^(order)]`.
    pub fn derivatives(&self) -> &[f64] {
        &self.coeffs[..=self.order]
    }

    /// Multiply every derivative (including the value) by a scalar.
    pub fn scale(mut self, factor: f64) -> Self {
        for c in &mut self.coeffs[..=self.order] {
            *c *= factor;
        }
        self
    }

    fn check_same_order(&self, other: &Jet) {
        assert!(
            self.order == other.order,
            "jet order mismatch: {} vs {}",
            self.order,
            other.order
        );
    }

    /// Compose with the Gaussian activation `sigma(x) = exp(-x^2)`.
    ///
    /// Uses the closed forms `sigma' = -2x sigma`, `sigma'' = (4x^2 - 2)
    /// sigma`, `sigma''' = (12x - 8x^3) sigma` and Faa di Bruno's formula in
    /// derivative-value form:
    ///
    /// ```text
    /// h'   = s1 g'
    /// h''  = s2 g'^2 + s1 g''
    /// h''' = s3 g'^3 + 3 s2 g' g'' + s1 g'''
    /// ```
    pub fn gaussian(self) -> Self {
        let x = self.coeffs[0];
        let s0 = (-x * x).exp();
        let s1 = -2.0 * x * s0;
        let mut out = [0.0; MAX_ORDER + 1];
        out[0] = s0;
        let g1 = self.coeffs[1];
        out[1] = s1 * g1;
        if self.order >= 2 {
            let s2 = (4.0 * x * x - 2.0) * s0;
            let g2 = self.coeffs[2];
            out[2] = s2 * g1 * g1 + s1 * g2;
            if self.order >= 3 {
                let s3 = (12.0 * x - 8.0 * x * x * x) * s0;
                let g3 = self.coeffs[3];
                out[3] = s3 * g1 * g1 * g1 + 3.0 * s2 * g1 * g2 + s1 * g3;
            }
        }
        Jet {
            coeffs: out,
            order: self.order,
        }
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.check_same_order(&rhs);
        for k in 0..=self.order {
            self.coeffs[k] += rhs.coeffs[k];
        }
        self
    }
}

impl std::ops::Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self.check_same_order(&rhs);
        for k in 0..=self.order {
            self.coeffs[k] -= rhs.coeffs[k];
        }
        self
    }
}

impl std::ops::Mul for Jet {
    type Output = Jet;
    /// Leibniz rule on derivative values:
    /// `(ab)'' = a''b + 2a'b' + ab''`, `(ab)''' = a'''b + 3a''b' + 3a'b'' + ab'''`.
    fn mul(self, rhs: Jet) -> Jet {
        self.check_same_order(&rhs);
        let a = &self.coeffs;
        let b = &rhs.coeffs;
        let mut out = [0.0; MAX_ORDER + 1];
        out[0] = a[0] * b[0];
        out[1] = a[1] * b[0] + a[0] * b[1];
        if self.order >= 2 {
            out[2] = a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2];
        }
        if self.order >= 3 {
            out[3] = a[3] * b[0] + 3.0 * a[2] * b[1] + 3.0 * a[1] * b[2] + a[0] * b[3];
        }
        Jet {
            coeffs: out,
            order: self.order,
        }
    }
}

impl std::ops::Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl std::ops::Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn var_seeds() {
        assert_eq!(Jet::var(2.0, 2).derivatives(), &[2.0, 1.0, 0.0]);
        assert_eq!(Jet::var(0.0, 3).derivatives(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn squaring_a_seed_gives_x2_derivatives() {
        let x = Jet::var(2.0, 2);
        assert_eq!((x * x).derivatives(), &[4.0, 4.0, 2.0]);
    }

    #[test]
    fn add_is_coefficientwise() {
        let a = Jet::from_derivatives(&[1.0, 0.0, 0.0]);
        let b = Jet::from_derivatives(&[0.0, 1.0, 0.0]);
        assert_eq!((a + b).derivatives(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn x3_times_x_is_x4() {
        // Derivatives of x^4 at x = 1.5: [5.0625, 13.5, 27, 36].
        let x = Jet::var(1.5, 3);
        let x3 = x * x * x;
        let x4 = x3 * x;
        let expected = [5.0625, 13.5, 27.0, 36.0];
        for (got, want) in x4.derivatives().iter().zip(expected) {
            assert_relative_eq!(got, &want, max_relative = 1e-14);
        }
    }

    #[test]
    fn gaussian_at_zero_and_one() {
        let at0 = Jet::var(0.0, 3).gaussian();
        assert_eq!(at0.derivatives(), &[1.0, 0.0, -2.0, 0.0]);

        let e = (-1.0f64).exp();
        let at1 = Jet::var(1.0, 3).gaussian();
        let expected = [e, -2.0 * e, 2.0 * e, 4.0 * e];
        for (got, want) in at1.derivatives().iter().zip(expected) {
            assert_relative_eq!(got, &want, max_relative = 1e-14);
        }
    }

    #[test]
    fn gaussian_of_constant_is_constant() {
        for x in [-1.7, 0.3, 2.4] {
            let jet = Jet::constant(x, 3).gaussian();
            assert_eq!(jet.derivatives()[1..], [0.0, 0.0, 0.0]);
            assert_relative_eq!(jet.value(), (-x * x).exp(), max_relative = 1e-15);
        }
    }

    #[test]
    #[should_panic(expected = "unsupported jet order")]
    fn order_zero_rejected() {
        Jet::var(1.0, 0);
    }

    #[test]
    #[should_panic(expected = "unsupported jet order")]
    fn order_four_rejected() {
        Jet::var(1.0, 4);
    }

    #[test]
    #[should_panic(expected = "order mismatch")]
    fn mixed_orders_rejected() {
        let _ = Jet::var(1.0, 2) + Jet::var(1.0, 3);
    }

    /// A random polynomial of degree <= 3, evaluated as a jet and in closed
    /// form.  Coefficients c0..c3 give derivatives c1 + 2 c2 x + 3 c3 x^2,
    /// 2 c2 + 6 c3 x, 6 c3.
    fn poly_case(rng: &mut ChaCha20Rng) -> (Jet, [f64; 4]) {
        let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let x = rng.gen_range(-2.0..2.0);
        let xj = Jet::var(x, 3);
        let jet = Jet::constant(c[0], 3) + xj * c[1] + xj * xj * c[2] + xj * xj * xj * c[3];
        let exact = [
            c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x,
            c[1] + 2.0 * c[2] * x + 3.0 * c[3] * x * x,
            2.0 * c[2] + 6.0 * c[3] * x,
            6.0 * c[3],
        ];
        (jet, exact)
    }

    #[test]
    fn polynomial_exactness() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for _ in 0..10_000 {
            let (jet, exact) = poly_case(&mut rng);
            for k in 0..=3 {
                let scale = 1.0 + exact[k].abs();
                assert!(
                    (jet.derivative(k) - exact[k]).abs() <= 1e-13 * scale,
                    "order {k}: jet {} vs exact {}",
                    jet.derivative(k),
                    exact[k]
                );
            }
        }
    }

    /// A random composition of affine transforms and Gaussian activations,
    /// mirroring the layered recurrence the basis evaluation performs.
    fn random_composite(params: &[f64], x: f64, order: usize) -> Jet {
        let mut jet = Jet::var(x, order);
        for chunk in params.chunks_exact(2) {
            jet = (jet * chunk[0] + chunk[1]).gaussian();
        }
        jet
    }

    #[test]
    fn finite_difference_consistency() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let depth = rng.gen_range(1..=3usize);
            let params: Vec<f64> = (0..2 * depth).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let x = rng.gen_range(-2.0..2.0);
            let jet = random_composite(&params, x, 3);
            let f = |x: f64| random_composite(&params, x, 1).value();

            // Central differences: O(h^2) stencils for k = 1, 2; for k = 3
            // a seven-point O(h^4) stencil with base step 1e-2, sharpened by
            // one Richardson extrapolation to tame the large high-order
            // derivatives of deep Gaussian compositions.
            let h = 1e-4;
            let fd1 = (f(x + h) - f(x - h)) / (2.0 * h);
            let fd2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            let stencil3 = |h: f64| {
                (f(x - 3.0 * h) - 8.0 * f(x - 2.0 * h) + 13.0 * f(x - h) - 13.0 * f(x + h)
                    + 8.0 * f(x + 2.0 * h)
                    - f(x + 3.0 * h))
                    / (8.0 * h * h * h)
            };
            let h3 = 1e-2;
            let fd3 = (16.0 * stencil3(h3 / 2.0) - stencil3(h3)) / 15.0;

            for (k, fd) in [(1, fd1), (2, fd2), (3, fd3)] {
                let scale = 1.0 + jet.derivative(k).abs();
                assert!(
                    (jet.derivative(k) - fd).abs() <= 1e-5 * scale,
                    "order {k}: jet {} vs fd {}",
                    jet.derivative(k),
                    fd
                );
            }
        }
    }

    #[test]
    fn chain_rule_under_input_scaling() {
        // d^k/dx^k sigma(c x) = c^k sigma^(k)(c x).
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let c = rng.gen_range(-2.0..2.0);
            let x = rng.gen_range(-1.5..1.5);
            let scaled = (Jet::var(x, 3) * c).gaussian();
            let at_point = Jet::var(c * x, 3).gaussian();
            for k in 0..=3 {
                let want = c.powi(k as i32) * at_point.derivative(k);
                let scale = 1.0 + want.abs();
                assert!((scaled.derivative(k) - want).abs() <= 1e-12 * scale);
            }
        }
    }
}
