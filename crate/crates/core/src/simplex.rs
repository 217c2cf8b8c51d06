//! Derivative-free Nelder–Mead minimisation with an evaluation budget.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Maximum number of objective evaluations.
    pub max_evaluations: usize,
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
    /// Stop once the spread of objective values across the simplex is
    /// below this (absolute).
    pub f_tol: f64,
    /// Stop once every vertex is within this distance of the best one.
    pub x_tol: f64,
    /// Rebuild the simplex around the best vertex after convergence, up to
    /// this many times; stops early when a restart finds no improvement.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_evaluations: 1000,
            initial_step: 0.25,
            f_tol: 1e-14,
            x_tol: 1e-7,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Budgeted<F> {
    f: F,
    used: usize,
    limit: usize,
}

impl<F: FnMut(&[f64]) -> f64> Budgeted<F> {
    fn call(&mut self, x: &[f64]) -> Option<f64> {
        if self.used >= self.limit {
            return None;
        }
        self.used += 1;
        let v = (self.f)(x);
        // Non-finite values rank last instead of poisoning comparisons.
        Some(if v.is_nan() { f64::INFINITY } else { v })
    }
}

/// Minimises `f` starting from `start` (whose value `start_value` is
/// already known). The returned point is never worse than `start`.
pub fn minimize<F>(f: F, start: &[f64], start_value: f64, options: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut obj = Budgeted {
        f,
        used: 0,
        limit: options.max_evaluations,
    };
    let mut best = (start.to_vec(), start_value);
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..=options.restarts {
        let before = best.1;
        let run = run_once(&mut obj, &best.0, best.1, options, &mut iterations);
        if run.1 < best.1 {
            best = (run.0, run.1);
        }
        converged = run.2;
        if !converged || best.1 >= before {
            break;
        }
    }

    SimplexResult {
        x: best.0,
        value: best.1,
        evaluations: obj.used,
        iterations,
        converged,
    }
}

fn run_once<F: FnMut(&[f64]) -> f64>(
    obj: &mut Budgeted<F>,
    start: &[f64],
    start_value: f64,
    options: &SimplexOptions,
    iterations: &mut usize,
) -> (Vec<f64>, f64, bool) {
    let n = start.len();
    let mut vertices: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    vertices.push((start.to_vec(), start_value));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += options.initial_step;
        match obj.call(&x) {
            Some(v) => vertices.push((x, v)),
            None => return best_of(vertices, false),
        }
    }

    loop {
        vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = vertices[n].1 - vertices[0].1;
        let size = vertices[1..]
            .iter()
            .map(|(x, _)| distance(x, &vertices[0].0))
            .fold(0.0, f64::max);
        if spread.abs() <= options.f_tol && size <= options.x_tol || size <= options.x_tol * 1e-3 {
            return best_of(vertices, true);
        }
        *iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| vertices[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = vertices[n].clone();
        let toward = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = toward(REFLECT);
        let Some(fr) = obj.call(&reflected) else {
            return best_of(vertices, false);
        };

        if fr < vertices[0].1 {
            let expanded = toward(EXPAND);
            let Some(fe) = obj.call(&expanded) else {
                vertices[n] = (reflected, fr);
                return best_of(vertices, false);
            };
            vertices[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < vertices[n - 1].1 {
            vertices[n] = (reflected, fr);
            continue;
        }

        let (contracted, outside) = if fr < worst.1 {
            (toward(CONTRACT * REFLECT), true)
        } else {
            (toward(-CONTRACT), false)
        };
        let Some(fc) = obj.call(&contracted) else {
            return best_of(vertices, false);
        };
        if (outside && fc <= fr) || (!outside && fc < worst.1) {
            vertices[n] = (contracted, fc);
            continue;
        }

        let anchor = vertices[0].0.clone();
        for vertex in vertices.iter_mut().skip(1) {
            let x: Vec<f64> = anchor
                .iter()
                .zip(&vertex.0)
                .map(|(a, v)| a + SHRINK * (v - a))
                .collect();
            let Some(v) = obj.call(&x) else {
                return best_of(vertices, false);
            };
            *vertex = (x, v);
        }
    }
}

fn best_of(vertices: Vec<(Vec<f64>, f64)>, converged: bool) -> (Vec<f64>, f64, bool) {
    let (x, v) = vertices
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("simplex has at least one vertex");
    (x, v, converged)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let start = [-1.2, 1.0];
        let opts = SimplexOptions {
            max_evaluations: 5000,
            initial_step: 0.5,
            ..Default::default()
        };
        let r = minimize(rosenbrock, &start, rosenbrock(&start), &opts);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn quadratic_in_four_dimensions() {
        let target = [0.3, -1.0, 2.0, 0.7];
        let f = |x: &[f64]| {
            x.iter()
                .zip(target)
                .enumerate()
                .map(|(i, (a, b))| (i + 1) as f64 * (a - b).powi(2))
                .sum::<f64>()
        };
        let start = [0.0; 4];
        let r = minimize(f, &start, f(&start), &SimplexOptions::default());
        for (a, b) in r.x.iter().zip(target) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn respects_budget_and_never_worsens() {
        let mut calls = 0;
        let f = |x: &[f64]| {
            calls += 1;
            rosenbrock(x)
        };
        let start = [-1.2, 1.0];
        let opts = SimplexOptions {
            max_evaluations: 7,
            ..Default::default()
        };
        let r = minimize(f, &start, rosenbrock(&start), &opts);
        assert!(r.evaluations <= 7);
        assert!(calls <= 7);
        assert!(r.value <= rosenbrock(&start));

        let none = minimize(rosenbrock, &start, 24.2, &SimplexOptions {
            max_evaluations: 0,
            ..Default::default()
        });
        assert_eq!(none.x, start.to_vec());
        assert_eq!(none.evaluations, 0);
    }

    #[test]
    fn nan_objective_is_ranked_last() {
        let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { (x[0] + 1.0).powi(2) };
        let r = minimize(f, &[0.0], 1.0, &SimplexOptions::default());
        assert!((r.x[0] + 1.0).abs() < 1e-5);
    }
}
