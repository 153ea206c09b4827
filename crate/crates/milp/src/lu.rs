//! Sparse LU factorization of a simplex basis.
//!
//! Left-looking elimination (Gilbert-Peierls) with partial pivoting. Columns
//! are processed sparsest first, which puts the many unit columns of a
//! typical basis up front and keeps fill low.

/// Compressed sparse columns.
#[derive(Debug, Clone, Default)]
pub(crate) struct Csc {
    pub start: Vec<usize>,
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csc {
    pub fn with_capacity(cols: usize, nnz: usize) -> Self {
        let mut start = Vec::with_capacity(cols + 1);
        start.push(0);
        Csc {
            start,
            idx: Vec::with_capacity(nnz),
            val: Vec::with_capacity(nnz),
        }
    }

    pub fn push_col(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (i, v) in entries {
            self.idx.push(i);
            self.val.push(v);
        }
        self.start.push(self.idx.len());
    }

    pub fn ncols(&self) -> usize {
        self.start.len() - 1
    }

    #[inline]
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.start[j], self.start[j + 1]);
        (&self.idx[a..b], &self.val[a..b])
    }
}

/// Returned when some basis columns are linearly dependent on the others.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    /// Basis positions whose column could not be pivoted.
    pub positions: Vec<usize>,
    /// Rows left without a pivot, one per entry of `positions`.
    pub rows: Vec<usize>,
}

const ABS_PIVOT_TOL: f64 = 1e-11;
const REL_PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct LuFactor {
    m: usize,
    pivot_row: Vec<usize>,
    pos_of_step: Vec<usize>,
    pivot_val: Vec<f64>,
    l: Csc,
    /// U columns; `idx` holds step numbers, not rows.
    u: Csc,
}

impl LuFactor {
    /// Factorizes the `m x m` basis whose column at position `p` is
    /// `cols.col(basis[p])`.
    pub fn factorize(m: usize, cols: &Csc, basis: &[usize]) -> Result<Self, Singular> {
        debug_assert_eq!(basis.len(), m);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&p| {
            let (idx, _) = cols.col(basis[p]);
            idx.len()
        });

        let mut step_of_row = vec![usize::MAX; m];
        let mut pivot_row = Vec::with_capacity(m);
        let mut pos_of_step = Vec::with_capacity(m);
        let mut pivot_val = Vec::with_capacity(m);
        let mut l = Csc::with_capacity(m, 2 * m);
        let mut u = Csc::with_capacity(m, 2 * m);

        let mut work = vec![0.0; m];
        let mut mark = vec![0u32; m];
        let mut generation = 0u32;
        let mut topo: Vec<usize> = Vec::with_capacity(m);
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut failed: Vec<usize> = Vec::new();

        for &pos in &order {
            let (idx, val) = cols.col(basis[pos]);
            generation = generation.wrapping_add(1);
            if generation == 0 {
                mark.iter_mut().for_each(|g| *g = 0);
                generation = 1;
            }
            // Nonzero pattern of L^{-1} a in topological order.
            topo.clear();
            for &start in idx {
                if mark[start] == generation {
                    continue;
                }
                mark[start] = generation;
                stack.push((start, 0));
                while let Some(top) = stack.len().checked_sub(1) {
                    let (node, mut child) = stack[top];
                    let step = step_of_row[node];
                    let mut next = None;
                    if step != usize::MAX {
                        let (lidx, _) = l.col(step);
                        while child < lidx.len() {
                            let cand = lidx[child];
                            child += 1;
                            if mark[cand] != generation {
                                next = Some(cand);
                                break;
                            }
                        }
                        stack[top].1 = child;
                    }
                    match next {
                        Some(cand) => {
                            mark[cand] = generation;
                            stack.push((cand, 0));
                        }
                        None => {
                            stack.pop();
                            topo.push(node);
                        }
                    }
                }
            }
            for (&i, &v) in idx.iter().zip(val) {
                work[i] = v;
            }
            for &i in topo.iter().rev() {
                let step = step_of_row[i];
                if step == usize::MAX {
                    continue;
                }
                let xi = work[i];
                if xi != 0.0 {
                    let (lidx, lval) = l.col(step);
                    for (&r, &lv) in lidx.iter().zip(lval) {
                        work[r] -= lv * xi;
                    }
                }
            }
            let mut best = usize::MAX;
            let mut best_abs = 0.0;
            let mut col_max = 0.0f64;
            for &i in &topo {
                let a = work[i].abs();
                col_max = col_max.max(a);
                if step_of_row[i] == usize::MAX && a > best_abs {
                    best_abs = a;
                    best = i;
                }
            }
            if best == usize::MAX || best_abs <= ABS_PIVOT_TOL.max(REL_PIVOT_TOL * col_max) {
                for &i in &topo {
                    work[i] = 0.0;
                }
                failed.push(pos);
                continue;
            }
            let piv = work[best];
            let step = pivot_row.len();
            u.push_col(topo.iter().filter_map(|&i| {
                let s = step_of_row[i];
                (s != usize::MAX && work[i] != 0.0).then_some((s, work[i]))
            }));
            l.push_col(topo.iter().filter_map(|&i| {
                (step_of_row[i] == usize::MAX && i != best && work[i] != 0.0)
                    .then_some((i, work[i] / piv))
            }));
            for &i in &topo {
                work[i] = 0.0;
            }
            step_of_row[best] = step;
            pivot_row.push(best);
            pos_of_step.push(pos);
            pivot_val.push(piv);
        }

        if !failed.is_empty() {
            let rows = (0..m).filter(|&r| step_of_row[r] == usize::MAX).collect();
            return Err(Singular {
                positions: failed,
                rows,
            });
        }
        Ok(LuFactor {
            m,
            pivot_row,
            pos_of_step,
            pivot_val,
            l,
            u,
        })
    }

    /// Solves `B w = rhs`. `rhs` is indexed by row and is destroyed; the
    /// result is written to `out`, indexed by basis position.
    pub fn ftran(&self, rhs: &mut [f64], out: &mut [f64]) {
        for s in 0..self.m {
            let xr = rhs[self.pivot_row[s]];
            if xr != 0.0 {
                let (idx, val) = self.l.col(s);
                for (&i, &lv) in idx.iter().zip(val) {
                    rhs[i] -= lv * xr;
                }
            }
        }
        for s in (0..self.m).rev() {
            let r = self.pivot_row[s];
            let w = rhs[r] / self.pivot_val[s];
            rhs[r] = 0.0;
            out[self.pos_of_step[s]] = w;
            if w != 0.0 {
                let (idx, val) = self.u.col(s);
                for (&j, &uv) in idx.iter().zip(val) {
                    rhs[self.pivot_row[j]] -= uv * w;
                }
            }
        }
        rhs.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Solves `B^T y = rhs`. `rhs` is indexed by basis position; `out` by row.
    pub fn btran(&self, rhs: &[f64], out: &mut [f64]) {
        for s in 0..self.m {
            let (idx, val) = self.u.col(s);
            let mut sum = rhs[self.pos_of_step[s]];
            for (&j, &uv) in idx.iter().zip(val) {
                sum -= uv * out[self.pivot_row[j]];
            }
            out[self.pivot_row[s]] = sum / self.pivot_val[s];
        }
        for s in (0..self.m).rev() {
            let (idx, val) = self.l.col(s);
            let mut t = 0.0;
            for (&i, &lv) in idx.iter().zip(val) {
                t += lv * out[i];
            }
            if t != 0.0 {
                out[self.pivot_row[s]] -= t;
            }
        }
    }
}
