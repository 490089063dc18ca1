//! Prediction-space distances and optimal bipartite assignment between
//! active tracks and observations.
//!
//! Candidate pairs are scored by comparing whole forecasts, not
//! current-frame positions: the per-step distance is a Mahalanobis distance
//! between two isotropic Gaussians, averaged over the frames both forecasts
//! cover. Because covariances are isotropic diagonals, the matrix inverse
//! collapses to a scalar division.
//!
//! Matching happens in two phases so that positional fallbacks never
//! outrank forecast-based matches: first a global assignment over pairs
//! where both sides carry forecasts, then a positional assignment over the
//! leftovers for pairs where at least one side has none. Gates are applied
//! by demoting over-threshold pairs after each solve, which keeps the
//! assignment globally optimal among feasible pairs.

use crate::retracker::ActiveTrack;
use crate::types::{euclidean, GaussianPoint, Observation, PipelineConfig, PredictedTrajectory};

/// Dense cost matrix with `f64::INFINITY` marking forbidden pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    /// Creates a matrix with every entry forbidden.
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![f64::INFINITY; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        debug_assert!(rows.iter().all(|row| row.len() == c));
        Self {
            rows: r,
            cols: c,
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

    pub fn set(&mut self, row: usize, col: usize, cost: f64) {
        debug_assert!(!cost.is_nan() && cost >= 0.0 || cost == f64::INFINITY);
        self.data[row * self.cols + col] = cost;
    }
}

/// Outcome of one assignment solve.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchResult {
    /// Matched `(row, col)` pairs, ascending by row.
    pub matched: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_observations: Vec<usize>,
}

impl MatchResult {
    fn from_assignment(rows: usize, cols: usize, mut matched: Vec<(usize, usize)>) -> Self {
        matched.sort_unstable();
        let mut row_used = vec![false; rows];
        let mut col_used = vec![false; cols];
        for &(i, j) in &matched {
            row_used[i] = true;
            col_used[j] = true;
        }
        MatchResult {
            matched,
            unmatched_tracks: (0..rows).filter(|&i| !row_used[i]).collect(),
            unmatched_observations: (0..cols).filter(|&j| !col_used[j]).collect(),
        }
    }

    /// Total cost of the matched pairs under `costs`.
    pub fn total_cost(&self, costs: &CostMatrix) -> f64 {
        self.matched.iter().map(|&(i, j)| costs.get(i, j)).sum()
    }
}

/// Mahalanobis distance between two isotropic Gaussian positions:
/// the Euclidean mean distance scaled by `1 / sqrt(var_a + var_b)`.
pub fn step_distance(a: &GaussianPoint, b: &GaussianPoint) -> f64 {
    euclidean(a.mean, b.mean) / (a.var + b.var).sqrt()
}

/// Average per-step distance over the frames covered by both forecasts.
///
/// Returns `None` when the covered frame ranges do not intersect. Note the
/// variance of each forecast at an absolute frame depends on its own
/// origin, so two forecasts made at different frames weigh the same frame
/// differently; that asymmetry of certainty is intentional.
pub fn trajectory_distance(pm: &PredictedTrajectory, po: &PredictedTrajectory) -> Option<f64> {
    let (m0, m1) = (pm.first_frame()?, pm.last_frame()?);
    let (o0, o1) = (po.first_frame()?, po.last_frame()?);
    let lo = m0.max(o0);
    let hi = m1.min(o1);
    if lo > hi {
        return None;
    }
    let mut sum = 0.0;
    for u in lo..=hi {
        let a = pm.gaussian_at(u).expect("frame in covered range");
        let b = po.gaussian_at(u).expect("frame in covered range");
        sum += step_distance(&a, &b);
    }
    Some(sum / (hi - lo + 1) as f64)
}

/// Minimum-cost maximum matching over the finite entries of a rectangular
/// cost matrix.
///
/// Among maximum-cardinality matchings restricted to finite entries, a
/// minimum-total-cost one is returned; remaining ties are broken toward the
/// lexicographically smallest sorted `(row, col)` pair set, so results are
/// reproducible bit for bit.
pub fn hungarian(costs: &CostMatrix) -> MatchResult {
    let (rows, cols) = (costs.rows(), costs.cols());
    if rows == 0 || cols == 0 {
        return MatchResult::from_assignment(rows, cols, Vec::new());
    }

    // Pad to a square matrix, replacing forbidden cells by a value larger
    // than any achievable finite total so they are used only when
    // unavoidable.
    let n = rows.max(cols);
    let finite_sum: f64 = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|(i, j)| costs.get(i, j))
        .filter(|c| c.is_finite())
        .sum();
    let pad = finite_sum + 1.0;
    let mut c = vec![vec![pad; n]; n];
    for (i, row) in c.iter_mut().enumerate().take(rows) {
        for (j, cell) in row.iter_mut().enumerate().take(cols) {
            let v = costs.get(i, j);
            if v.is_finite() {
                *cell = v;
            }
        }
    }

    let (mut row_to_col, u, v) = solve_square(&c);
    canonicalize(costs, &c, &u, &v, &mut row_to_col);

    let matched = (0..rows)
        .filter_map(|i| {
            let j = row_to_col[i];
            (j < cols && costs.get(i, j).is_finite()).then_some((i, j))
        })
        .collect();
    MatchResult::from_assignment(rows, cols, matched)
}

/// Shortest-augmenting-path assignment with potentials on a square,
/// all-finite matrix. Returns the row-to-column assignment and the final
/// dual potentials.
fn solve_square(c: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = c.len();
    let none = n; // "no row" marker
    let vcol = n; // virtual column where each augmentation starts
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_to_row = vec![none; n + 1];
    let mut way = vec![vcol; n + 1];

    for i in 0..n {
        col_to_row[vcol] = i;
        let mut j0 = vcol;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_to_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = vcol;
            for j in 0..n {
                if !used[j] {
                    let cur = c[i0][j] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_to_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_to_row[j0] == none {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_to_row[j0] = col_to_row[j1];
            j0 = j1;
            if j0 == vcol {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 0..n {
        if col_to_row[j] != none {
            row_to_col[col_to_row[j]] = j;
        }
    }
    u.truncate(n);
    v.truncate(n);
    (row_to_col, u, v)
}

/// Rewrites an optimal assignment into the lexicographically smallest
/// optimal one.
///
/// By complementary slackness every optimal assignment uses only edges that
/// are tight under the final potentials, and conversely any perfect
/// matching on the tight-edge graph is optimal. Real cells are visited in
/// row-major order and forced into the matching whenever the tight graph
/// still admits a perfect matching containing all forced pairs, which is
/// exactly the greedy realization of the lexicographic minimum.
fn canonicalize(
    orig: &CostMatrix,
    padded: &[Vec<f64>],
    u: &[f64],
    v: &[f64],
    row_to_col: &mut [usize],
) {
    let n = padded.len();
    let tight = |i: usize, j: usize| -> bool {
        let c = padded[i][j];
        (c - u[i] - v[j]).abs() <= 1e-9 * c.abs().max(1.0)
    };

    let mut col_to_row = vec![0usize; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    // Edges currently in the matching are optimal by construction; keep
    // them usable even if float drift pushed them past the tightness
    // tolerance.
    let in_matching = |rtc: &[usize], i: usize, j: usize| rtc[i] == j;

    let mut row_forced = vec![false; n];
    let mut col_forced = vec![false; n];

    for i in 0..orig.rows() {
        if row_forced[i] {
            continue;
        }
        for j in 0..orig.cols() {
            if row_forced[i] || col_forced[j] {
                continue;
            }
            if !orig.get(i, j).is_finite() {
                continue;
            }
            if !tight(i, j) && !in_matching(row_to_col, i, j) {
                continue;
            }
            if row_to_col[i] == j {
                row_forced[i] = true;
                col_forced[j] = true;
                break;
            }
            // Tentatively take (i, j) and try to re-route the two displaced
            // partners through the tight graph.
            let c_old = row_to_col[i];
            let r_old = col_to_row[j];
            row_to_col[i] = j;
            col_to_row[j] = i;
            row_forced[i] = true;
            col_forced[j] = true;
            let mut visited = vec![false; n];
            if rewire(
                r_old,
                c_old,
                padded,
                u,
                v,
                row_to_col,
                &mut col_to_row,
                &col_forced,
                &mut visited,
            ) {
                break; // row i settled
            }
            // Infeasible: restore.
            row_forced[i] = false;
            col_forced[j] = false;
            row_to_col[i] = c_old;
            col_to_row[j] = r_old;
            col_to_row[c_old] = i;
        }
    }
}

/// Depth-first search for an alternating path from `row` to the single free
/// column `free_col` through tight edges, rewiring matches along the way.
#[allow(clippy::too_many_arguments)]
fn rewire(
    row: usize,
    free_col: usize,
    padded: &[Vec<f64>],
    u: &[f64],
    v: &[f64],
    row_to_col: &mut [usize],
    col_to_row: &mut [usize],
    col_forced: &[bool],
    visited: &mut [bool],
) -> bool {
    let n = padded.len();
    for j in 0..n {
        if visited[j] || col_forced[j] {
            continue;
        }
        let c = padded[row][j];
        if (c - u[row] - v[j]).abs() > 1e-9 * c.abs().max(1.0) {
            continue;
        }
        visited[j] = true;
        if j == free_col
            || rewire(
                col_to_row[j],
                free_col,
                padded,
                u,
                v,
                row_to_col,
                col_to_row,
                col_forced,
                visited,
            )
        {
            row_to_col[row] = j;
            col_to_row[j] = row;
            return true;
        }
    }
    false
}

/// Builds the forecast-space cost matrix over pairs where both sides carry
/// a forecast. Pairs with no covered-frame overlap (or a missing forecast)
/// stay forbidden.
fn forecast_costs(tracks: &[ActiveTrack], observations: &[Observation]) -> CostMatrix {
    let mut costs = CostMatrix::new(tracks.len(), observations.len());
    for (i, track) in tracks.iter().enumerate() {
        let Some(pm) = track.prediction() else {
            continue;
        };
        for (j, obs) in observations.iter().enumerate() {
            let Some(po) = &obs.prediction else {
                continue;
            };
            if let Some(d) = trajectory_distance(pm, po) {
                costs.set(i, j, d);
            }
        }
    }
    costs
}

/// Two-phase gated assignment between active tracks and observations.
///
/// Phase one assigns on forecast distances and demotes pairs whose cost
/// exceeds `d_min`. Phase two assigns the leftovers on plain positional
/// distance, gated at `d_min * sqrt(sigma2)`, but only for pairs where at
/// least one side has no forecast: a pair that already lost a
/// forecast-based comparison is not given a positional second chance.
pub fn gate_and_match(
    tracks: &[ActiveTrack],
    observations: &[Observation],
    cfg: &PipelineConfig,
) -> MatchResult {
    let costs1 = forecast_costs(tracks, observations);
    let phase1 = hungarian(&costs1);

    let mut matched: Vec<(usize, usize)> = Vec::new();
    let mut free_tracks: Vec<usize> = Vec::new();
    let mut free_obs: Vec<usize> = Vec::new();
    for &(i, j) in &phase1.matched {
        if costs1.get(i, j) <= cfg.d_min {
            matched.push((i, j));
        } else {
            free_tracks.push(i);
            free_obs.push(j);
        }
    }
    free_tracks.extend(&phase1.unmatched_tracks);
    free_obs.extend(&phase1.unmatched_observations);
    free_tracks.sort_unstable();
    free_obs.sort_unstable();

    // Phase two: positional fallback on the leftovers.
    let gate = cfg.positional_gate();
    let mut costs2 = CostMatrix::new(free_tracks.len(), free_obs.len());
    for (ri, &ti) in free_tracks.iter().enumerate() {
        let track = &tracks[ti];
        for (ci, &oi) in free_obs.iter().enumerate() {
            let obs = &observations[oi];
            if track.prediction().is_some() && obs.prediction.is_some() {
                continue;
            }
            costs2.set(ri, ci, euclidean(track.last_pos(), obs.pos));
        }
    }
    let phase2 = hungarian(&costs2);
    for &(ri, ci) in &phase2.matched {
        if costs2.get(ri, ci) <= gate {
            matched.push((free_tracks[ri], free_obs[ci]));
        }
    }

    MatchResult::from_assignment(tracks.len(), observations.len(), matched)
}
