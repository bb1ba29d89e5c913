//! Reference implementations used only by tests.

/// Best path found so far: (sum, reversed step codes, cells).
type Best = Option<(f64, Vec<u8>, Vec<(usize, usize)>)>;

/// Exhaustive search over every monotone, contiguous path from `(0, 0)` to
/// `(n - 1, n - 1)` whose cells satisfy `0 <= i - j <= window`. Among paths
/// with the minimal summed squared difference, the one whose step sequence
/// read backwards from the end is smallest under diagonal < vertical <
/// horizontal is chosen. Returns `(minimal sum, chosen path)`.
pub fn brute_force_dtw(stimulus: &[f64], response: &[f64], window: usize) -> (f64, Vec<(usize, usize)>) {
    let n = response.len();
    let m = stimulus.len();
    let mut best: Best = None;
    let mut path = vec![(0usize, 0usize)];
    let mut steps: Vec<u8> = Vec::new();
    explore(stimulus, response, window, n, m, &mut path, &mut steps, &mut best);
    let (sum, _, p) = best.expect("a band of width >= 0 always admits the diagonal");
    (sum, p)
}

fn cost(stimulus: &[f64], response: &[f64], path: &[(usize, usize)]) -> f64 {
    path.iter()
        .map(|&(i, j)| (stimulus[j] - response[i]).powi(2))
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn explore(
    stimulus: &[f64],
    response: &[f64],
    window: usize,
    n: usize,
    m: usize,
    path: &mut Vec<(usize, usize)>,
    steps: &mut Vec<u8>,
    best: &mut Best,
) {
    let (i, j) = *path.last().unwrap();
    if (i, j) == (n - 1, m - 1) {
        let sum = cost(stimulus, response, path);
        // step codes: 0 diagonal, 1 vertical, 2 horizontal; compared from the end
        let key: Vec<u8> = steps.iter().rev().copied().collect();
        let better = match best {
            None => true,
            Some((b, k, _)) => sum < *b || (sum == *b && key < *k),
        };
        if better {
            *best = Some((sum, key, path.clone()));
        }
        return;
    }
    for (code, (di, dj)) in [(0u8, (1, 1)), (1, (1, 0)), (2, (0, 1))] {
        let (ni, nj) = (i + di, j + dj);
        if ni >= n || nj >= m || nj > ni || ni - nj > window {
            continue;
        }
        path.push((ni, nj));
        steps.push(code);
        explore(stimulus, response, window, n, m, path, steps, best);
        path.pop();
        steps.pop();
    }
}

/// Upper tail of the chi-square distribution by composite Simpson
/// integration of its density over `[0, x]`.
pub fn chi_square_sf_quadrature(x: f64, df: f64) -> f64 {
    let k = df / 2.0;
    let log_norm = -(k * 2f64.ln()) - ln_gamma_stirling(k);
    let pdf = |t: f64| {
        if t <= 0.0 {
            if df == 2.0 { 0.5 } else if df < 2.0 { f64::INFINITY } else { 0.0 }
        } else {
            ((k - 1.0) * t.ln() - t / 2.0 + log_norm).exp()
        }
    };
    let steps = 200_000usize;
    let h = x / steps as f64;
    let mut acc = pdf(0.0) + pdf(x);
    for s in 1..steps {
        let w = if s % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * pdf(s as f64 * h);
    }
    1.0 - acc * h / 3.0
}

/// ln Γ(k) for the integer or half-integer shapes the quadrature needs.
fn ln_gamma_stirling(k: f64) -> f64 {
    let twice = (2.0 * k).round() as u64;
    assert!((2.0 * k - twice as f64).abs() < 1e-12, "integer or half-integer shape");
    let mut acc = if twice.is_multiple_of(2) { 0.0 } else { 0.5 * std::f64::consts::PI.ln() };
    let mut z = if twice.is_multiple_of(2) { 1.0 } else { 0.5 };
    while z < k - 1e-9 {
        acc += z.ln();
        z += 1.0;
    }
    acc
}

/// One-sample Kolmogorov-Smirnov statistic against Uniform(0, 1).
pub fn ks_uniform_statistic(sample: &[f64]) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(k, &v)| {
            let lo = v - k as f64 / n;
            let hi = (k + 1) as f64 / n - v;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov p-value with the Stephens small-sample correction.
pub fn ks_p_value(statistic: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}
