//! Causally constrained dynamic time warping.
//!
//! Rows index the response series `s2` and columns the stimulus series `s1`.
//! A cell `(i, j)` is admissible only when `0 <= i - j <= window`: a
//! response bin may align with the simultaneous stimulus bin or one at most
//! `window` bins earlier, never a later one. The reported cost is the
//! terminal cumulative cost divided by the length of the backtracked path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum stimulus-to-response lag in bins.
pub const DEFAULT_WINDOW: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("series lengths differ: stimulus {stimulus}, response {response}")]
    LengthMismatch { stimulus: usize, response: usize },
    #[error("cannot align empty series")]
    EmptySeries,
    #[error("series contain non-finite values")]
    NonFinite,
    #[error("no finite warping path")]
    NoFinitePath,
}

/// Dense row-major matrix; `f64::INFINITY` marks cells outside the band.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix");
        Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// Terminal cumulative cost divided by `path_length`.
    pub total_cost: f64,
    pub terminal_cost: f64,
    /// `(response index, stimulus index)` pairs from `(0, 0)` to the end.
    pub path: Vec<(usize, usize)>,
    pub path_length: usize,
    pub window: usize,
}

#[inline]
fn admissible(i: usize, j: usize, window: usize) -> bool {
    i >= j && i - j <= window
}

fn check_inputs(s1: &[f64], s2: &[f64]) -> Result<(), AlignError> {
    if s1.len() != s2.len() {
        return Err(AlignError::LengthMismatch {
            stimulus: s1.len(),
            response: s2.len(),
        });
    }
    if s1.is_empty() {
        return Err(AlignError::EmptySeries);
    }
    if s1.iter().chain(s2).any(|v| !v.is_finite()) {
        return Err(AlignError::NonFinite);
    }
    Ok(())
}

/// Squared differences `(s1[j] - s2[i])^2`, infinite outside the band.
pub fn distance_matrix(s1: &[f64], s2: &[f64], window: usize) -> CostMatrix {
    let mut d = CostMatrix::filled(s2.len(), s1.len(), f64::INFINITY);
    for (i, &r) in s2.iter().enumerate() {
        for (j, &s) in s1.iter().enumerate() {
            if admissible(i, j, window) {
                d.set(i, j, (s - r) * (s - r));
            }
        }
    }
    d
}

/// Cumulative cost with the standard three-predecessor recursion.
pub fn cumulative_cost(d: &CostMatrix) -> CostMatrix {
    let (n, m) = (d.rows, d.cols);
    let mut c = CostMatrix::filled(n, m, f64::INFINITY);
    if n == 0 || m == 0 {
        return c;
    }
    c.set(0, 0, d.get(0, 0));
    for i in 1..n {
        c.set(i, 0, d.get(i, 0) + c.get(i - 1, 0));
    }
    for j in 1..m {
        c.set(0, j, d.get(0, j) + c.get(0, j - 1));
    }
    for i in 1..n {
        for j in 1..m {
            let best = c.get(i - 1, j - 1).min(c.get(i - 1, j)).min(c.get(i, j - 1));
            c.set(i, j, d.get(i, j) + best);
        }
    }
    c
}

/// Recovers the optimal path from a cumulative cost matrix, walking back
/// from the bottom-right cell. Ties prefer the diagonal, then the vertical
/// `(i - 1, j)`, then the horizontal `(i, j - 1)` predecessor.
pub fn backtrack(c: &CostMatrix) -> Result<Vec<(usize, usize)>, AlignError> {
    if c.rows == 0 || c.cols == 0 {
        return Err(AlignError::EmptySeries);
    }
    let (mut i, mut j) = (c.rows - 1, c.cols - 1);
    if !c.get(i, j).is_finite() {
        return Err(AlignError::NoFinitePath);
    }
    let mut path = vec![(i, j)];
    while (i, j) != (0, 0) {
        let mut best: Option<((usize, usize), f64)> = None;
        let candidates = [
            (i > 0 && j > 0).then(|| (i - 1, j - 1)),
            (i > 0).then(|| (i - 1, j)),
            (j > 0).then(|| (i, j - 1)),
        ];
        for cell in candidates.into_iter().flatten() {
            let v = c.get(cell.0, cell.1);
            if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
                best = Some((cell, v));
            }
        }
        let ((pi, pj), _) = best.ok_or(AlignError::NoFinitePath)?;
        i = pi;
        j = pj;
        path.push((i, j));
    }
    path.reverse();
    Ok(path)
}

/// Aligns a response series to a stimulus series of the same length.
pub fn constrained_dtw(
    stimulus: &[f64],
    response: &[f64],
    window: usize,
) -> Result<AlignmentResult, AlignError> {
    check_inputs(stimulus, response)?;
    let c = cumulative_cost(&distance_matrix(stimulus, response, window));
    let path = backtrack(&c)?;
    let terminal_cost = c.get(c.rows - 1, c.cols - 1);
    Ok(AlignmentResult {
        total_cost: terminal_cost / path.len() as f64,
        terminal_cost,
        path_length: path.len(),
        path,
        window,
    })
}

/// Banded evaluator for repeated cost-only alignments of one length.
///
/// Stores only the `window + 1` admissible diagonals per row and reuses its
/// buffer between calls. Produces bit-identical costs to [`constrained_dtw`].
#[derive(Debug, Clone)]
pub struct BandedDtw {
    window: usize,
    band: Vec<f64>,
}

impl BandedDtw {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            band: Vec::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Returns `(total_cost, terminal_cost, path_length)`.
    pub fn align(&mut self, stimulus: &[f64], response: &[f64]) -> Result<(f64, f64, usize), AlignError> {
        check_inputs(stimulus, response)?;
        let n = stimulus.len();
        let width = self.window + 1;
        self.band.clear();
        self.band.resize(n * width, f64::INFINITY);
        let band = &mut self.band;

        // band[i * width + d] holds C[i][i - d]
        for i in 0..n {
            let r = response[i];
            let top = self.window.min(i);
            for d in (0..=top).rev() {
                let j = i - d;
                let diff = stimulus[j] - r;
                let cost = diff * diff;
                let value = if i == 0 {
                    cost
                } else {
                    let diag = if j > 0 { band[(i - 1) * width + d] } else { f64::INFINITY };
                    let vert = if d > 0 { band[(i - 1) * width + d - 1] } else { f64::INFINITY };
                    let horiz = if j > 0 && d < self.window {
                        band[i * width + d + 1]
                    } else {
                        f64::INFINITY
                    };
                    cost + diag.min(vert).min(horiz)
                };
                band[i * width + d] = value;
            }
        }

        let terminal = band[(n - 1) * width];
        if !terminal.is_finite() {
            return Err(AlignError::NoFinitePath);
        }
        let (mut i, mut d) = (n - 1, 0usize);
        let mut length = 1;
        while i > 0 || d > 0 {
            let j = i - d;
            let mut best: Option<(usize, usize, f64)> = None;
            let mut consider = |ci: usize, cd: usize| {
                let v = band[ci * width + cd];
                if v.is_finite() && best.is_none_or(|(_, _, b)| v < b) {
                    best = Some((ci, cd, v));
                }
            };
            if i > 0 && j > 0 {
                consider(i - 1, d);
            }
            if i > 0 && d > 0 {
                consider(i - 1, d - 1);
            }
            if j > 0 && d < self.window {
                consider(i, d + 1);
            }
            let (ni, nd, _) = best.ok_or(AlignError::NoFinitePath)?;
            i = ni;
            d = nd;
            length += 1;
        }
        Ok((terminal / length as f64, terminal, length))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_series_align_on_diagonal() {
        let s = [0.3, -1.0, 2.0, 0.0, 0.5];
        let r = constrained_dtw(&s, &s, 2).unwrap();
        assert_eq!(r.total_cost, 0.0);
        assert_eq!(r.path, (0..5).map(|k| (k, k)).collect::<Vec<_>>());
    }

    #[test]
    fn single_cell() {
        let r = constrained_dtw(&[0.0], &[5.0], 2).unwrap();
        assert_eq!(r.total_cost, 25.0);
        assert_eq!(r.path, vec![(0, 0)]);
        assert_eq!(r.path_length, 1);
    }

    #[test]
    fn errors() {
        assert_eq!(
            constrained_dtw(&[0.0], &[0.0, 1.0], 2),
            Err(AlignError::LengthMismatch { stimulus: 1, response: 2 })
        );
        assert_eq!(constrained_dtw(&[], &[], 2), Err(AlignError::EmptySeries));
        assert_eq!(
            constrained_dtw(&[f64::NAN], &[0.0], 2),
            Err(AlignError::NonFinite)
        );
    }

    #[test]
    fn backtrack_prefers_diagonal() {
        let c = CostMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(backtrack(&c).unwrap(), vec![(0, 0), (1, 1)]);
        // all three predecessors tie
        let c = CostMatrix::from_rows(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(backtrack(&c).unwrap(), vec![(0, 0), (1, 1)]);
        // vertical beats horizontal on a tie
        let inf = f64::INFINITY;
        let c = CostMatrix::from_rows(vec![
            vec![0.0, 1.0, inf],
            vec![1.0, 5.0, 2.0],
            vec![inf, 2.0, 3.0],
        ]);
        assert_eq!(backtrack(&c).unwrap(), vec![(0, 0), (0, 1), (1, 2), (2, 2)]);
    }

    #[test]
    fn backtrack_diagonal_zero_matrix() {
        let n = 6;
        let inf = f64::INFINITY;
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { inf }).collect())
            .collect();
        let path = backtrack(&CostMatrix::from_rows(rows)).unwrap();
        assert_eq!(path.len(), n);
        assert!(path.iter().all(|&(i, j)| i == j));
    }

    #[test]
    fn backtrack_without_finite_path() {
        let inf = f64::INFINITY;
        let c = CostMatrix::from_rows(vec![vec![0.0, inf], vec![inf, inf]]);
        assert_eq!(backtrack(&c), Err(AlignError::NoFinitePath));
        let c = CostMatrix::from_rows(vec![vec![inf, inf], vec![inf, 1.0]]);
        assert_eq!(backtrack(&c), Err(AlignError::NoFinitePath));
    }

    #[test]
    fn infinity_saturates() {
        let big = f64::MAX;
        assert_eq!(f64::INFINITY + big, f64::INFINITY);
        assert_eq!(f64::INFINITY + -big, f64::INFINITY);
        let d = distance_matrix(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4], 1);
        let c = cumulative_cost(&d);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c.get(i, j).is_finite(), admissible(i, j, 1));
            }
        }
    }

    #[test]
    fn band_excludes_future_stimuli() {
        // a response spike one bin before the stimulus spike cannot be matched to it
        let stim = [0.0, 0.0, 1.0, 0.0];
        let early = [0.0, 1.0, 0.0, 0.0];
        let late = [0.0, 0.0, 0.0, 1.0];
        let e = constrained_dtw(&stim, &early, 2).unwrap();
        let l = constrained_dtw(&stim, &late, 2).unwrap();
        assert_eq!((l.terminal_cost, e.terminal_cost), (1.0, 2.0));
    }

    #[test]
    fn banded_matches_dense() {
        let mut banded = BandedDtw::new(2);
        let s1 = [0.5, -1.2, 3.0, 0.1, 0.0, -0.7, 2.2];
        let s2 = [1.0, 0.0, -1.1, 2.9, 0.4, 0.0, 0.2];
        let dense = constrained_dtw(&s1, &s2, 2).unwrap();
        let (total, terminal, len) = banded.align(&s1, &s2).unwrap();
        assert_eq!(total.to_bits(), dense.total_cost.to_bits());
        assert_eq!(terminal.to_bits(), dense.terminal_cost.to_bits());
        assert_eq!(len, dense.path_length);
    }
}
