//! IoU scoring and one-to-one track/detection assignment.
//!
//! Assignment maximizes total IoU by running Kuhn-Munkres on the cost
//! `1 - IoU`. Rectangular inputs are padded to square with cost 1. Pairs that
//! come back below the gating threshold are demoted to unmatched afterwards.

use thiserror::Error;

use crate::model::BoundingBox;

#[derive(Debug, Error, PartialEq)]
pub enum AssocError {
    #[error("score at ({row}, {col}) is {value}, expected a finite value in [0, 1]")]
    InvalidScore { row: usize, col: usize, value: f64 },
    #[error("threshold {0} must be finite and in [0, 1)")]
    InvalidThreshold(f64),
}

/// Intersection over union of two boxes; 0 when they do not overlap.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let iy = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Dense row-major score matrix; keeps its shape even when one side is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged score matrix");
        Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn transpose(&self) -> Self {
        let mut t = ScoreMatrix::new(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }
}

/// IoU of every (predicted track box, detection box) pair.
pub fn score_matrix(tracks: &[BoundingBox], detections: &[BoundingBox]) -> ScoreMatrix {
    let mut m = ScoreMatrix::new(tracks.len(), detections.len());
    for (i, t) in tracks.iter().enumerate() {
        for (j, d) in detections.iter().enumerate() {
            m.set(i, j, iou(t, d));
        }
    }
    m
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// `(track_index, detection_index)`, sorted by track index.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

impl Assignment {
    pub fn total_score(&self, scores: &ScoreMatrix) -> f64 {
        self.pairs.iter().map(|&(i, j)| scores.get(i, j)).sum()
    }

    fn from_row_matches(row_to_col: &[Option<usize>], cols: usize) -> Self {
        let mut col_used = vec![false; cols];
        let mut out = Assignment::default();
        for (i, m) in row_to_col.iter().enumerate() {
            match m {
                Some(j) => {
                    col_used[*j] = true;
                    out.pairs.push((i, *j));
                }
                None => out.unmatched_tracks.push(i),
            }
        }
        out.unmatched_detections = (0..cols).filter(|&j| !col_used[j]).collect();
        out
    }
}

fn check_inputs(scores: &ScoreMatrix, threshold: f64) -> Result<(), AssocError> {
    if !(threshold.is_finite() && (0.0..1.0).contains(&threshold)) {
        return Err(AssocError::InvalidThreshold(threshold));
    }
    for r in 0..scores.rows() {
        for c in 0..scores.cols() {
            let v = scores.get(r, c);
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(AssocError::InvalidScore {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Maximum-total-score matching, then gating: pairs scoring below
/// `threshold` are returned as unmatched on both sides.
pub fn solve_assignment(scores: &ScoreMatrix, threshold: f64) -> Result<Assignment, AssocError> {
    check_inputs(scores, threshold)?;
    let (rows, cols) = (scores.rows(), scores.cols());
    let n = rows.max(cols);
    let mut cost = vec![vec![1.0; n]; n];
    for (r, row) in cost.iter_mut().enumerate().take(rows) {
        for (c, cell) in row.iter_mut().enumerate().take(cols) {
            *cell = 1.0 - scores.get(r, c);
        }
    }

    let assignment = hungarian_min(&cost);
    let row_to_col: Vec<Option<usize>> = (0..rows)
        .map(|r| {
            let c = assignment[r];
            (c < cols && scores.get(r, c) >= threshold).then_some(c)
        })
        .collect();
    Ok(Assignment::from_row_matches(&row_to_col, cols))
}

/// Greedy alternative: repeatedly take the highest remaining score, ties to
/// the lowest `(track, detection)` pair, until nothing at or above the
/// threshold is left.
pub fn solve_greedy(scores: &ScoreMatrix, threshold: f64) -> Result<Assignment, AssocError> {
    check_inputs(scores, threshold)?;
    let (rows, cols) = (scores.rows(), scores.cols());
    let mut candidates: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .filter(|&(r, c)| scores.get(r, c) >= threshold && scores.get(r, c) > 0.0)
        .collect();
    candidates.sort_by(|a, b| {
        scores
            .get(b.0, b.1)
            .total_cmp(&scores.get(a.0, a.1))
            .then(a.cmp(b))
    });

    let mut row_to_col = vec![None; rows];
    let mut col_used = vec![false; cols];
    for (r, c) in candidates {
        if row_to_col[r].is_none() && !col_used[c] {
            row_to_col[r] = Some(c);
            col_used[c] = true;
        }
    }
    Ok(Assignment::from_row_matches(&row_to_col, cols))
}

/// Minimum-cost perfect matching on a square matrix (shortest augmenting
/// path with potentials, O(n³)). Returns the column assigned to each row.
///
/// Rows are inserted in index order and strict comparisons keep the lowest
/// column on equal reduced costs, so equal inputs always give equal outputs.
fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based with a virtual column 0, as in the classic formulation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; n];
    for j in 1..=n {
        if row_of_col[j] > 0 {
            col_of_row[row_of_col[j] - 1] = j - 1;
        }
    }
    col_of_row
}
