//! Derivative-free minimisation used by the ARIMA and SARIMAX estimators.

/// Nelder-Mead downhill simplex with the standard reflection/expansion/
/// contraction/shrink coefficients (1, 2, 1/2, 1/2).
#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_iter: usize,
    /// Converged once every vertex is within `xtol` of the best one (max norm)...
    pub xtol: f64,
    /// ...and every vertex value is within `ftol` of the best value.
    pub ftol: f64,
    /// Offset along each axis used to build the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            xtol: 1e-7,
            ftol: 1e-10,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn eval<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

impl NelderMead {
    pub fn with_step(mut self, step: f64) -> Self {
        self.initial_step = step;
        self
    }

    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        if n == 0 {
            return Minimum {
                x: Vec::new(),
                f: eval(&mut f, x0),
                iterations: 0,
                converged: true,
            };
        }

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] += self.initial_step;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| eval(&mut f, v)).collect();
        let mut order: Vec<usize> = (0..=n).collect();

        let mut iterations = 0;
        let mut converged = false;
        let mut centroid = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut trial2 = vec![0.0; n];

        while iterations < self.max_iter {
            // stable sort keeps tie handling deterministic
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let best = order[0];
            let worst = order[n];
            let second_worst = order[n - 1];

            let x_spread = simplex
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
                .fold(0.0_f64, f64::max);
            let f_spread = values
                .iter()
                .map(|&v| (v - values[best]).abs())
                .fold(0.0_f64, f64::max);
            if x_spread <= self.xtol && f_spread <= self.ftol {
                converged = true;
                break;
            }
            iterations += 1;

            centroid.iter_mut().for_each(|c| *c = 0.0);
            for &i in &order[..n] {
                for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                    *c += x;
                }
            }
            centroid.iter_mut().for_each(|c| *c /= n as f64);

            for j in 0..n {
                trial[j] = centroid[j] + (centroid[j] - simplex[worst][j]);
            }
            let f_reflect = eval(&mut f, &trial);

            if f_reflect < values[best] {
                for j in 0..n {
                    trial2[j] = centroid[j] + 2.0 * (centroid[j] - simplex[worst][j]);
                }
                let f_expand = eval(&mut f, &trial2);
                if f_expand < f_reflect {
                    simplex[worst].copy_from_slice(&trial2);
                    values[worst] = f_expand;
                } else {
                    simplex[worst].copy_from_slice(&trial);
                    values[worst] = f_reflect;
                }
                continue;
            }
            if f_reflect < values[second_worst] {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = f_reflect;
                continue;
            }

            let outside = f_reflect < values[worst];
            for j in 0..n {
                trial2[j] = if outside {
                    centroid[j] + 0.5 * (trial[j] - centroid[j])
                } else {
                    centroid[j] + 0.5 * (simplex[worst][j] - centroid[j])
                };
            }
            let f_contract = eval(&mut f, &trial2);
            let accept = if outside {
                f_contract <= f_reflect
            } else {
                f_contract < values[worst]
            };
            if accept {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = f_contract;
                continue;
            }

            let anchor = simplex[best].clone();
            for i in 0..=n {
                if i == best {
                    continue;
                }
                for j in 0..n {
                    simplex[i][j] = anchor[j] + 0.5 * (simplex[i][j] - anchor[j]);
                }
                values[i] = eval(&mut f, &simplex[i]);
            }
        }

        let best = (0..=n)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .unwrap_or(0);
        Minimum {
            x: simplex.swap_remove(best),
            f: values[best],
            iterations,
            converged,
        }
    }

    /// Runs from every start and keeps the lowest value. Earlier starts win ties.
    pub fn minimize_multi<F: FnMut(&[f64]) -> f64>(&self, mut f: F, starts: &[Vec<f64>]) -> Minimum {
        let mut best: Option<Minimum> = None;
        for start in starts {
            let m = self.minimize(&mut f, start);
            if best.as_ref().is_none_or(|b| m.f < b.f) {
                best = Some(m);
            }
        }
        best.unwrap_or_else(|| self.minimize(f, &[]))
    }
}

/// The three standard starts: all zeros, all +0.1, all -0.1.
pub fn standard_starts(dim: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; dim], vec![0.1; dim], vec![-0.1; dim]]
}

/// True when `1 - c[0] z - c[1] z^2 - ...` has every root outside the unit circle.
///
/// Uses the step-down (reverse Levinson) recursion: the polynomial is stable
/// iff every reflection coefficient has modulus below one.
pub fn is_stationary(coeffs: &[f64]) -> bool {
    let mut a: Vec<f64> = coeffs.to_vec();
    while let Some(&last) = a.last() {
        if last == 0.0 {
            a.pop();
        } else {
            break;
        }
    }
    while !a.is_empty() {
        let k = a.len();
        let r = a[k - 1];
        if !(r.abs() < 1.0) {
            return false;
        }
        let denom = 1.0 - r * r;
        let prev: Vec<f64> = (0..k - 1)
            .map(|j| (a[j] + r * a[k - 2 - j]) / denom)
            .collect();
        a = prev;
    }
    true
}

/// Invertibility of `1 + c[0] z + ...`: same root condition with negated coefficients.
pub fn is_invertible(coeffs: &[f64]) -> bool {
    let neg: Vec<f64> = coeffs.iter().map(|c| -c).collect();
    is_stationary(&neg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let nm = NelderMead {
            max_iter: 20_000,
            ..Default::default()
        };
        let m = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn quadratic_and_empty() {
        let nm = NelderMead::default();
        let m = nm.minimize(|x| (x[0] - 3.0).powi(2) + 1.0, &[0.0]);
        assert!((m.x[0] - 3.0).abs() < 1e-5);
        let m = nm.minimize(|_| 7.0, &[]);
        assert_eq!(m.f, 7.0);
        assert!(m.converged);
    }

    #[test]
    fn multi_start_never_worse_than_any_start() {
        let f = |x: &[f64]| (x[0] * x[0] - 1.0).powi(2) + 0.1 * x[0] + (x[1] - 0.5).powi(2);
        let starts = standard_starts(2);
        let m = NelderMead::default().minimize_multi(f, &starts);
        for s in &starts {
            assert!(m.f <= f(s));
        }
        assert!(m.x[0] < 0.0, "global minimum sits on the negative branch");
    }

    #[test]
    fn stationarity_check() {
        assert!(is_stationary(&[]));
        assert!(is_stationary(&[0.5]));
        assert!(!is_stationary(&[1.0]));
        assert!(!is_stationary(&[-1.2]));
        // 1 - 1.2z + 0.32z^2 = (1-0.4z)(1-0.8z)
        assert!(is_stationary(&[1.2, -0.32]));
        // (1-0.5z)(1-1.25z) = 1 - 1.75z + 0.625z^2
        assert!(!is_stationary(&[1.75, -0.625]));
        assert!(is_invertible(&[0.9]));
        assert!(!is_invertible(&[-1.1]));
    }
}
