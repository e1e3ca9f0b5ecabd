//! Triangle quadrature in barycentric coordinates with weights summing to one
//! (multiply by the triangle area).

#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Seven-point rule exact for polynomials of degree five.
    pub fn degree5() -> Self {
        let s = 15f64.sqrt();
        let (a1, b1) = ((6.0 - s) / 21.0, (9.0 + 2.0 * s) / 21.0);
        let (a2, b2) = ((6.0 + s) / 21.0, (9.0 - 2.0 * s) / 21.0);
        let (w1, w2) = ((155.0 - s) / 1200.0, (155.0 + s) / 1200.0);
        let third = 1.0 / 3.0;
        Self {
            points: vec![
                [third, third, third],
                [a1, a1, b1],
                [a1, b1, a1],
                [b1, a1, a1],
                [a2, a2, b2],
                [a2, b2, a2],
                [b2, a2, a2],
            ],
            weights: vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2],
        }
    }

    /// Collapsed tensor Gauss-Legendre rule with `m` points per direction,
    /// exact for polynomials of degree `2m - 2`.
    pub fn collapsed(m: usize) -> Self {
        let (x, w) = gauss_legendre(m);
        let mut points = Vec::with_capacity(m * m);
        let mut weights = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let u = x[i];
                let v = x[j] * (1.0 - u);
                points.push([1.0 - u - v, u, v]);
                weights.push(2.0 * w[i] * w[j] * (1.0 - u));
            }
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // three-term recurrence for P_m and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 0 { 1.0 } else { p1 };
            let prev = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * p - prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `int_T l1^a l2^b = a! b! / (a + b + 2)!` times twice the area.
    fn monomial_exact(a: u32, b: u32) -> f64 {
        let f = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        2.0 * f(a) * f(b) / f(a + b + 2)
    }

    fn check(rule: &Quadrature, degree: u32) {
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for a in 0..=degree {
            for b in 0..=(degree - a) {
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                    .sum();
                let e = monomial_exact(a, b);
                assert!((q - e).abs() < 1e-14, "degree ({a},{b}): {q} vs {e}");
            }
        }
    }

    #[test]
    fn seven_point_rule_is_degree_five() {
        check(&Quadrature::degree5(), 5);
    }

    #[test]
    fn collapsed_rules() {
        for m in [1, 2, 4, 7] {
            check(&Quadrature::collapsed(m), 2 * m as u32 - 2);
        }
    }

    #[test]
    fn gauss_nodes() {
        let (x, w) = gauss_legendre(2);
        let r = 0.5 / 3f64.sqrt();
        assert!((x[0] - (0.5 - r)).abs() < 1e-15 && (x[1] - (0.5 + r)).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15);
    }
}
