//! Derivative-free minimizers used for bandwidth and variance calibration.

use rayon::prelude::*;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a one-dimensional search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMinimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search for the minimum of `f` over `[lo, hi]` in log space.
///
/// Stops once `hi / lo - 1 < rel_tol`. Both end points are also evaluated and
/// the best point seen is returned, so monotone objectives land exactly on the
/// bound. Non-finite values compare as `+inf`; ties move the bracket upward.
pub fn golden_section_log(f: impl Fn(f64) -> f64, lo: f64, hi: f64, rel_tol: f64) -> LineMinimum {
    let eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut a = lo.ln();
    let mut b = hi.ln();
    let tol = rel_tol.ln_1p();
    let mut best = (lo, eval(lo));
    let mut evaluations = 1;
    let consider = |x: f64, v: f64, best: &mut (f64, f64)| {
        if v < best.1 {
            *best = (x, v);
        }
    };
    let v_hi = eval(hi);
    evaluations += 1;
    consider(hi, v_hi, &mut best);

    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(x1.exp());
    let mut f2 = eval(x2.exp());
    evaluations += 2;
    consider(x1.exp(), f1, &mut best);
    consider(x2.exp(), f2, &mut best);
    while b - a > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1.exp());
            consider(x1.exp(), f1, &mut best);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2.exp());
            consider(x2.exp(), f2, &mut best);
        }
        evaluations += 1;
    }
    LineMinimum { x: best.0, value: best.1, evaluations }
}

/// Exhaustive search over the integers `lo..=hi`; candidates are scored in
/// parallel and the smallest minimizing integer wins.
pub fn exhaustive_integer(f: impl Fn(usize) -> f64 + Sync, lo: usize, hi: usize) -> Option<(usize, f64)> {
    let scores: Vec<(usize, f64)> = (lo..=hi).into_par_iter().map(|j| (j, f(j))).collect();
    scores
        .into_iter()
        .filter(|(_, v)| !v.is_nan())
        .fold(None, |best: Option<(usize, f64)>, (j, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((j, v)),
        })
}

/// Outcome of a Nelder-Mead minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Settings for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Initial displacement along each axis.
    pub step: f64,
    /// Convergence when `max f - min f` over the simplex falls below this.
    pub value_tol: f64,
    pub max_iterations: usize,
    /// Box constraints; points are clamped into the box before evaluation.
    pub bounds: Vec<(f64, f64)>,
}

/// Nelder-Mead simplex minimization with box clamping.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &SimplexOptions) -> SimplexResult {
    let dim = x0.len();
    let clamp = |x: &mut [f64]| {
        for (v, &(lo, hi)) in x.iter_mut().zip(&opts.bounds) {
            *v = v.clamp(lo, hi);
        }
    };
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    clamp(&mut start);
    let mut simplex: Vec<Vec<f64>> = vec![start.clone()];
    for d in 0..dim {
        let mut p = start.clone();
        p[d] += opts.step;
        clamp(&mut p);
        if p[d] == start[d] {
            p[d] -= opts.step;
            clamp(&mut p);
        }
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        // order best to worst; stable on ties
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if (values[dim] - values[0]).abs() < opts.value_tol
            || (values[0].is_infinite() && values[dim].is_infinite())
        {
            converged = values[0].is_finite();
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|d| simplex[..dim].iter().map(|p| p[d]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..dim).map(|d| centroid[d] + t * (simplex[dim][d] - centroid[d])).collect();
            clamp(&mut p);
            p
        };

        let reflected = along(-1.0);
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[dim] = expanded;
                values[dim] = fe;
            } else {
                simplex[dim] = reflected;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[dim] {
            let p = along(-0.5);
            let v = eval(&p);
            (p, v)
        } else {
            let p = along(0.5);
            let v = eval(&p);
            (p, v)
        };
        if fc < values[dim].min(fr) {
            simplex[dim] = contracted;
            values[dim] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=dim {
            let mut p: Vec<f64> = (0..dim).map(|d| simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d])).collect();
            clamp(&mut p);
            values[i] = eval(&p);
            simplex[i] = p;
        }
    }

    let best = (0..=dim).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    SimplexResult {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        evaluations,
        converged,
    }
}
