//! Sparse symmetric positive definite solver: reverse Cuthill-McKee ordering
//! with an envelope (skyline) Cholesky factorization.
//!
//! The meshes produced in this crate are long thin strips or moderate cells,
//! so the RCM envelope stays narrow and a direct factorization is fast and
//! deterministic. The pattern is built once per mesh; Newton iterations only
//! refill the values and refactorize.

use crate::error::{Error, Result};

/// Reverse Cuthill-McKee ordering of an undirected graph given as adjacency
/// lists. Returns `perm` with `perm[old] = new`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order: Vec<usize> = Vec::with_capacity(n); // new -> old
    let mut visited = vec![false; n];
    let degree = |v: usize| adj[v].len();

    let bfs_levels = |start: usize, visited: &[bool]| -> Vec<usize> {
        // returns the last BFS level from `start` within the unvisited component
        let mut seen = visited.to_vec();
        let mut level = vec![start];
        seen[start] = true;
        let mut last = level.clone();
        while !level.is_empty() {
            last = level.clone();
            let mut next = Vec::new();
            for &v in &level {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        next.push(w);
                    }
                }
            }
            level = next;
        }
        last
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start: two rounds of "farthest node" refinement
        let mut start = seed;
        for _ in 0..2 {
            let last = bfs_levels(start, &visited);
            let far = *last.iter().min_by_key(|&&v| degree(v)).unwrap();
            if far == start {
                break;
            }
            start = far;
        }
        // Cuthill-McKee breadth-first sweep with degree-sorted neighbors
        let mut queue = std::collections::VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_unstable_by_key(|&w| (degree(w), w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }

    order.reverse();
    let mut perm = vec![0usize; n];
    for (new, &old) in order.iter().enumerate() {
        perm[old] = new;
    }
    perm
}

/// Envelope Cholesky solver for a fixed sparsity pattern.
pub struct SkylineSolver {
    n: usize,
    perm: Vec<usize>,
    iperm: Vec<usize>,
    /// first stored column of each permuted row
    first: Vec<usize>,
    /// start of each permuted row in the value arrays; row i spans
    /// `ptr[i] .. ptr[i] + (i - first[i] + 1)`
    ptr: Vec<usize>,
    vals: Vec<f64>,
    factor: Vec<f64>,
    factorized: bool,
}

impl SkylineSolver {
    /// Builds the pattern from the undirected edges of the matrix graph
    /// (diagonal entries are implied; self-loops and duplicates are fine).
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut iperm = vec![0usize; n];
        for (old, &new) in perm.iter().enumerate() {
            iperm[new] = old;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            let pi = perm[i];
            for &j in &adj[i] {
                let pj = perm[j];
                if pj < pi {
                    first[pi] = first[pi].min(pj);
                }
            }
        }
        let mut ptr = vec![0usize; n + 1];
        for i in 0..n {
            ptr[i + 1] = ptr[i] + (i - first[i] + 1);
        }
        let nnz = ptr[n];
        Self {
            n,
            perm,
            iperm,
            first,
            ptr,
            vals: vec![0.0; nnz],
            factor: vec![0.0; nnz],
            factorized: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Envelope size (stored entries of the factor).
    pub fn envelope_len(&self) -> usize {
        self.vals.len()
    }

    /// Clears the assembled values.
    pub fn reset(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
        self.factorized = false;
    }

    /// Adds `v` at (i, j) of the symmetric matrix (original indices; either
    /// triangle may be passed).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (pi, pj) = (self.perm[i], self.perm[j]);
        let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
        debug_assert!(c >= self.first[r], "entry outside the envelope");
        let idx = self.ptr[r] + (c - self.first[r]);
        self.vals[idx] += v;
    }

    /// Cholesky factorization of the assembled matrix.
    pub fn factorize(&mut self) -> Result<()> {
        self.factor.copy_from_slice(&self.vals);
        let n = self.n;
        for i in 0..n {
            let fi = self.first[i];
            let (done, row_i) = self.factor.split_at_mut(self.ptr[i]);
            let row_i = &mut row_i[..i - fi + 1];
            for j in fi..i {
                let fj = self.first[j];
                let row_j = &done[self.ptr[j]..self.ptr[j] + (j - fj + 1)];
                let lo = fi.max(fj);
                let dot: f64 = row_i[(lo - fi)..(j - fi)]
                    .iter()
                    .zip(&row_j[(lo - fj)..(j - fj)])
                    .map(|(a, b)| a * b)
                    .sum();
                let djj = row_j[j - fj];
                row_i[j - fi] = (row_i[j - fi] - dot) / djj;
            }
            let sq: f64 = row_i[..i - fi].iter().map(|v| v * v).sum();
            let piv = row_i[i - fi] - sq;
            if !(piv > 0.0) || !piv.is_finite() {
                self.factorized = false;
                return Err(Error::SingularJacobian { row: i, pivot: piv });
            }
            row_i[i - fi] = piv.sqrt();
        }
        self.factorized = true;
        Ok(())
    }

    /// The assembled lower-triangle entries in original indices.
    pub fn lower_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            let fi = self.first[i];
            for j in fi..=i {
                let v = self.vals[self.ptr[i] + (j - fi)];
                if v != 0.0 {
                    let (oi, oj) = (self.iperm[i], self.iperm[j]);
                    out.push((oi.max(oj), oi.min(oj), v));
                }
            }
        }
        out
    }

    /// Solves `A x = b` with the current factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert!(self.factorized, "factorize before solving");
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = b[self.iperm[i]];
        }
        // forward: L y = b
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.factor[self.ptr[i]..self.ptr[i] + (i - fi + 1)];
            let dot: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - dot) / row[i - fi];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.factor[self.ptr[i]..self.ptr[i] + (i - fi + 1)];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (k, &l) in row[..i - fi].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = y[self.perm[i]];
        }
        x
    }
}
