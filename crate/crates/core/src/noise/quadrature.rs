//! Gauss rules for the continuous noise laws.

use std::f64::consts::PI;

const NEWTON_TOL: f64 = 1e-15;
const MAX_NEWTON: usize = 100;

/// Gauss–Legendre nodes and weights on `[-1, 1]` (weights sum to 2).
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let n = order;
    let mut rule = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..MAX_NEWTON {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= NEWTON_TOL {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule[i] = (-z, w);
        rule[n - 1 - i] = (z, w);
    }
    if n % 2 == 1 {
        rule[n / 2].0 = 0.0;
    }
    rule
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
    }
    let dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
    (p1, dp)
}

/// Gauss–Hermite rule for the standard normal density: nodes sorted
/// ascending, weights summing to 1.
pub fn gauss_hermite_standard(order: usize) -> Vec<(f64, f64)> {
    // Newton on orthonormal Hermite functions for the weight exp(-x^2),
    // then rescale x -> sqrt(2) x and w -> w / sqrt(pi).
    let n = order;
    let pim4 = PI.powf(-0.25);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..MAX_NEWTON {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= NEWTON_TOL * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        weights[i] = 2.0 / (pp * pp);
    }
    let scale = 2f64.sqrt();
    let norm = PI.sqrt();
    let mut rule = Vec::with_capacity(n);
    for i in 0..m {
        rule.push((-nodes[i] * scale, weights[i] / norm));
    }
    for i in (0..n / 2).rev() {
        rule.push((nodes[i] * scale, weights[i] / norm));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    if n % 2 == 1 {
        rule[n / 2].0 = 0.0;
    }
    rule
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moment(rule: &[(f64, f64)], k: i32) -> f64 {
        rule.iter().map(|(x, w)| w * x.powi(k)).sum()
    }

    #[test]
    fn legendre_two_point() {
        let rule = gauss_legendre(2);
        let a = 1.0 / 3f64.sqrt();
        assert!((rule[0].0 + a).abs() < 1e-15 && (rule[1].0 - a).abs() < 1e-15);
        assert!((rule[0].1 - 1.0).abs() < 1e-15 && (rule[1].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for order in [1, 3, 8, 64] {
            let rule = gauss_legendre(order);
            for k in 0..(2 * order as i32) {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((moment(&rule, k) - exact).abs() < 1e-13, "order {order} k {k}");
            }
        }
    }

    #[test]
    fn hermite_moments_match_standard_normal() {
        // E[Z^(2m)] = (2m - 1)!!
        for order in [1, 2, 5, 20, 64] {
            let rule = gauss_hermite_standard(order);
            let mut double_fact = 1.0;
            for k in 0..(2 * order as i32).min(16) {
                let exact = if k % 2 == 1 {
                    0.0
                } else {
                    if k >= 2 {
                        double_fact *= (k - 1) as f64;
                    }
                    double_fact
                };
                let got = moment(&rule, k);
                let scale = double_fact * (k.max(1) as f64);
                assert!((got - exact).abs() <= 1e-12 * scale, "order {order} k {k}: {got}");
            }
        }
    }

    #[test]
    fn hermite_single_node_is_mean() {
        let rule = gauss_hermite_standard(1);
        assert_eq!(rule.len(), 1);
        assert_eq!(rule[0].0, 0.0);
        assert!((rule[0].1 - 1.0).abs() < 1e-14, "{rule:?}");
    }
}
