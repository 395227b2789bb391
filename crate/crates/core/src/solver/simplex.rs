use super::{LinearProgram, LpError, LpSolution, LpStatus, Relation, SimplexOptions};

/// How an original variable maps onto non-negative tableau columns.
#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// `x = lo + x'`
    Shift { col: usize, lo: f64 },
    /// `x = hi - x'`
    Mirror { col: usize, hi: f64 },
    /// `x = x⁺ - x⁻`
    Split { pos: usize, neg: usize },
}

#[derive(Clone)]
struct Tableau {
    rows: usize,
    /// Number of columns, excluding the right-hand side.
    cols: usize,
    /// Row-major, `rows × (cols + 1)`; the last entry of a row is its rhs.
    a: Vec<f64>,
    /// Reduced costs `z_j - c_j`; the last entry is the objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
    pivot_limit: usize,
}

impl Tableau {
    #[inline]
    fn stride(&self) -> usize {
        self.cols + 1
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.stride() + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.a[r * self.stride() + self.cols]
    }

    fn reset_pivot_limit(&mut self) {
        self.pivot_limit = self.pivots + 50 * (self.rows + self.cols) + 1000;
    }

    fn pivot(&mut self, r: usize, c: usize) -> Result<(), LpError> {
        self.pivots += 1;
        if self.pivots > self.pivot_limit {
            return Err(LpError::NumericBreakdown(format!(
                "no convergence after {} pivots",
                self.pivots - 1
            )));
        }
        let stride = self.stride();
        let piv = self.a[r * stride + c];
        let (before, rest) = self.a.split_at_mut(r * stride);
        let (prow, after) = rest.split_at_mut(stride);
        let inv = 1.0 / piv;
        for v in prow.iter_mut() {
            *v *= inv;
        }
        prow[c] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[c] = 0.0;
            }
        };
        for row in before.chunks_exact_mut(stride) {
            eliminate(row);
        }
        for row in after.chunks_exact_mut(stride) {
            eliminate(row);
        }
        eliminate(&mut self.obj);
        self.basis[r] = c;
        Ok(())
    }

    /// Runs primal simplex iterations on the first `allowed` columns until
    /// optimal (`Ok(true)`) or an unbounded ray is found (`Ok(false)`).
    fn optimize(&mut self, allowed: usize, opts: &SimplexOptions) -> Result<bool, LpError> {
        let mut bland = false;
        let mut streak = 0usize;
        loop {
            let mut enter = None;
            let mut best = -opts.optimality_tol;
            for j in 0..allowed {
                let d = self.obj[j];
                if bland {
                    if d < -opts.optimality_tol {
                        enter = Some(j);
                        break;
                    }
                } else if d < best {
                    best = d;
                    enter = Some(j);
                }
            }
            let Some(c) = enter else {
                return Ok(true);
            };

            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, c);
                if a <= opts.pivot_tol {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        if ratio < bratio - 1e-12
                            || (ratio <= bratio + 1e-12 && self.basis[r] < self.basis[br])
                        {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            if ratio <= 1e-12 {
                streak += 1;
                if streak > opts.degenerate_streak {
                    bland = true;
                }
            } else {
                streak = 0;
            }
            self.pivot(r, c)?;
        }
    }

    /// Dual simplex from a dual-feasible basis: restores primal
    /// feasibility. Returns `Ok(false)` if the rows are infeasible.
    fn dual_optimize(&mut self, opts: &SimplexOptions) -> Result<bool, LpError> {
        loop {
            let mut leave = None;
            let mut worst = -opts.feasibility_tol;
            for r in 0..self.rows {
                let b = self.rhs(r);
                if b < worst {
                    worst = b;
                    leave = Some(r);
                }
            }
            let Some(r) = leave else {
                return Ok(true);
            };
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.cols {
                let a = self.at(r, j);
                if a >= -opts.pivot_tol {
                    continue;
                }
                let ratio = self.obj[j].max(0.0) / -a;
                if enter.is_none_or(|(_, b)| ratio < b - 1e-12) {
                    enter = Some((j, ratio));
                }
            }
            let Some((c, _)) = enter else {
                return Ok(false);
            };
            self.pivot(r, c)?;
        }
    }

    fn remove_row(&mut self, r: usize) {
        let stride = self.stride();
        self.a.drain(r * stride..(r + 1) * stride);
        self.basis.remove(r);
        self.rows -= 1;
    }

    /// Drops columns `from..cols`, which must all be non-basic.
    fn truncate_cols(&mut self, from: usize) {
        let old = self.stride();
        let new = from + 1;
        let mut a = Vec::with_capacity(self.rows * new);
        for r in 0..self.rows {
            a.extend_from_slice(&self.a[r * old..r * old + from]);
            a.push(self.a[r * old + self.cols]);
        }
        self.a = a;
        let z = self.obj[self.cols];
        self.obj.truncate(from);
        self.obj.push(z);
        self.cols = from;
    }

    /// Appends a row `coeffs · x + s = rhs` with a fresh basic slack `s`,
    /// expressed in the current basis.
    fn push_row(&mut self, coeffs: &[f64], rhs: f64) {
        let old = self.stride();
        let cols = self.cols + 1;
        let stride = cols + 1;
        let mut a = Vec::with_capacity((self.rows + 1) * stride);
        for r in 0..self.rows {
            a.extend_from_slice(&self.a[r * old..r * old + self.cols]);
            a.push(0.0);
            a.push(self.a[r * old + self.cols]);
        }
        let mut row = vec![0.0; stride];
        row[..coeffs.len()].copy_from_slice(coeffs);
        row[cols - 1] = 1.0;
        row[cols] = rhs;
        for r in 0..self.rows {
            let f = row[self.basis[r]];
            if f != 0.0 {
                let base = &a[r * stride..(r + 1) * stride];
                for (x, p) in row.iter_mut().zip(base) {
                    *x -= f * p;
                }
                row[self.basis[r]] = 0.0;
            }
        }
        a.extend_from_slice(&row);
        self.a = a;
        let z = self.obj[self.cols];
        self.obj.truncate(self.cols);
        self.obj.push(0.0);
        self.obj.push(z);
        self.basis.push(cols - 1);
        self.rows += 1;
        self.cols = cols;
    }
}

/// An optimal simplex tableau that accepts further rows and re-optimizes
/// from the previous basis with the dual simplex.
#[derive(Clone)]
pub struct WarmSimplex {
    lp: LinearProgram,
    maps: Vec<VarMap>,
    /// Columns holding structural variables; slacks follow.
    structural: usize,
    tab: Tableau,
    opts: SimplexOptions,
}

/// Solves with default tolerances.
pub fn simplex_maximize(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    simplex_maximize_with(lp, &SimplexOptions::default())
}

pub fn simplex_maximize_with(
    lp: &LinearProgram,
    opts: &SimplexOptions,
) -> Result<LpSolution, LpError> {
    WarmSimplex::solve(lp.clone(), opts).map(|(s, _)| s)
}

impl WarmSimplex {
    /// Solves `lp` from scratch. The warm state is returned only when the
    /// program is optimal.
    pub fn solve(
        lp: LinearProgram,
        opts: &SimplexOptions,
    ) -> Result<(LpSolution, Option<WarmSimplex>), LpError> {
        lp.check_shape()?;

        let mut maps = Vec::with_capacity(lp.num_vars());
        let mut ncols = 0usize;
        let mut upper_rows: Vec<(usize, f64)> = Vec::new();
        for &(lo, hi) in &lp.bounds {
            if lo.is_finite() {
                maps.push(VarMap::Shift { col: ncols, lo });
                if hi.is_finite() {
                    upper_rows.push((ncols, hi - lo));
                }
                ncols += 1;
            } else if hi.is_finite() {
                maps.push(VarMap::Mirror { col: ncols, hi });
                ncols += 1;
            } else {
                maps.push(VarMap::Split {
                    pos: ncols,
                    neg: ncols + 1,
                });
                ncols += 2;
            }
        }

        let mut cost = vec![0.0; ncols];
        for (j, map) in maps.iter().enumerate() {
            let c = lp.objective[j];
            match *map {
                VarMap::Shift { col, .. } => cost[col] += c,
                VarMap::Mirror { col, .. } => cost[col] -= c,
                VarMap::Split { pos, neg } => {
                    cost[pos] += c;
                    cost[neg] -= c;
                }
            }
        }

        // Rows in terms of tableau columns, oriented so that a slack can
        // start in the basis wherever possible.
        let mut rows: Vec<(Vec<f64>, Relation, f64)> =
            Vec::with_capacity(lp.constraints.len() + upper_rows.len());
        for con in &lp.constraints {
            let (coeffs, rhs) = map_row(&maps, ncols, con.coeffs.iter().copied().enumerate(), con.rhs);
            rows.push((coeffs, con.relation, rhs));
        }
        for &(col, ub) in &upper_rows {
            let mut coeffs = vec![0.0; ncols];
            coeffs[col] = 1.0;
            rows.push((coeffs, Relation::Le, ub));
        }
        for (coeffs, rel, rhs) in &mut rows {
            if *rhs < 0.0 || (*rhs == 0.0 && *rel == Relation::Ge) {
                for a in coeffs.iter_mut() {
                    *a = -*a;
                }
                *rhs = -*rhs;
                *rel = match *rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }

        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let cols = ncols + n_slack + n_art;
        let stride = cols + 1;
        let art_start = ncols + n_slack;

        let mut a = vec![0.0; m * stride];
        let mut basis = vec![0usize; m];
        let mut slack = ncols;
        let mut art = art_start;
        for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
            let row = &mut a[i * stride..(i + 1) * stride];
            row[..ncols].copy_from_slice(coeffs);
            row[cols] = *rhs;
            match rel {
                Relation::Le => {
                    row[slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }

        let mut t = Tableau {
            rows: m,
            cols,
            a,
            obj: vec![0.0; stride],
            basis,
            pivots: 0,
            pivot_limit: 0,
        };
        t.reset_pivot_limit();

        // Phase 1: maximize -Σ artificials.
        if n_art > 0 {
            for r in 0..m {
                if t.basis[r] >= art_start {
                    for j in 0..stride {
                        t.obj[j] -= t.a[r * stride + j];
                    }
                }
            }
            for j in art_start..cols {
                t.obj[j] += 1.0;
            }
            t.optimize(cols, opts)?;
            let infeasibility: f64 = (0..t.rows)
                .filter(|&r| t.basis[r] >= art_start)
                .map(|r| t.rhs(r).max(0.0))
                .sum();
            let scale = rows.iter().map(|r| r.2.abs()).fold(1.0, f64::max);
            if infeasibility > opts.feasibility_tol * scale {
                return Ok((infeasible(t.pivots), None));
            }
            // Drive remaining (zero-valued) artificials out of the basis.
            let mut r = 0;
            while r < t.rows {
                if t.basis[r] < art_start {
                    r += 1;
                    continue;
                }
                let mut best: Option<(usize, f64)> = None;
                for j in 0..art_start {
                    let v = t.at(r, j).abs();
                    if v > opts.pivot_tol && best.is_none_or(|(_, b)| v > b) {
                        best = Some((j, v));
                    }
                }
                match best {
                    Some((j, _)) => {
                        t.pivot(r, j)?;
                        r += 1;
                    }
                    None => t.remove_row(r),
                }
            }
            t.truncate_cols(art_start);
        }

        // Phase 2.
        let cols = t.cols;
        let mut full_cost = vec![0.0; cols];
        full_cost[..ncols].copy_from_slice(&cost);
        let stride = t.stride();
        for j in 0..stride {
            let mut z = 0.0;
            for r in 0..t.rows {
                let cb = full_cost[t.basis[r]];
                if cb != 0.0 {
                    z += cb * t.a[r * stride + j];
                }
            }
            t.obj[j] = if j < cols { z - full_cost[j] } else { z };
        }
        if !t.optimize(cols, opts)? {
            return Ok((
                LpSolution {
                    status: LpStatus::Unbounded,
                    values: Vec::new(),
                    objective_value: f64::INFINITY,
                    pivots: t.pivots,
                },
                None,
            ));
        }

        let mut warm = WarmSimplex {
            lp,
            maps,
            structural: ncols,
            tab: t,
            opts: *opts,
        };
        let sol = warm.extract()?;
        Ok((sol, Some(warm)))
    }

    pub fn lp(&self) -> &LinearProgram {
        &self.lp
    }

    /// Adds `Σ coef·x {≤,≥} rhs`. Equality rows are not supported here.
    pub fn add_row(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) -> Result<(), LpError> {
        let sign = match relation {
            Relation::Le => 1.0,
            Relation::Ge => -1.0,
            Relation::Eq => {
                return Err(LpError::Malformed("warm rows must be inequalities".into()));
            }
        };
        if terms.iter().any(|&(j, a)| j >= self.lp.num_vars() || !a.is_finite()) || !rhs.is_finite() {
            return Err(LpError::Malformed("row refers to unknown variable or is not finite".into()));
        }
        self.lp.add_row(terms, relation, rhs);
        let (mut coeffs, mapped_rhs) = map_row(
            &self.maps,
            self.structural,
            terms.iter().copied(),
            rhs,
        );
        for a in &mut coeffs {
            *a *= sign;
        }
        let mut full = vec![0.0; self.tab.cols];
        full[..self.structural].copy_from_slice(&coeffs);
        self.tab.push_row(&full, sign * mapped_rhs);
        Ok(())
    }

    /// Re-optimizes after [`WarmSimplex::add_row`]. On anything but an
    /// optimal result the state should be discarded.
    pub fn reoptimize(&mut self) -> Result<LpSolution, LpError> {
        self.tab.reset_pivot_limit();
        if !self.tab.dual_optimize(&self.opts)? {
            return Ok(infeasible(self.tab.pivots));
        }
        // Clean up reduced costs that drifted below zero.
        let cols = self.tab.cols;
        if !self.tab.optimize(cols, &self.opts)? {
            return Err(LpError::NumericBreakdown("bounded program became unbounded".into()));
        }
        self.extract()
    }

    fn extract(&mut self) -> Result<LpSolution, LpError> {
        let t = &self.tab;
        let mut std_vals = vec![0.0; t.cols];
        for r in 0..t.rows {
            std_vals[t.basis[r]] = t.rhs(r).max(0.0);
        }
        let mut values: Vec<f64> = self
            .maps
            .iter()
            .map(|map| match *map {
                VarMap::Shift { col, lo } => lo + std_vals[col],
                VarMap::Mirror { col, hi } => hi - std_vals[col],
                VarMap::Split { pos, neg } => std_vals[pos] - std_vals[neg],
            })
            .collect();
        verify(&self.lp, &mut values, &self.opts)?;
        let objective_value = self
            .lp
            .objective
            .iter()
            .zip(&values)
            .map(|(c, x)| c * x)
            .sum();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            values,
            objective_value,
            pivots: t.pivots,
        })
    }
}

fn infeasible(pivots: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        values: Vec::new(),
        objective_value: f64::NAN,
        pivots,
    }
}

/// Rewrites a row over original variables in terms of tableau columns.
fn map_row(
    maps: &[VarMap],
    ncols: usize,
    terms: impl Iterator<Item = (usize, f64)>,
    rhs: f64,
) -> (Vec<f64>, f64) {
    let mut coeffs = vec![0.0; ncols];
    let mut rhs = rhs;
    for (j, a) in terms {
        if a == 0.0 {
            continue;
        }
        match maps[j] {
            VarMap::Shift { col, lo } => {
                coeffs[col] += a;
                rhs -= a * lo;
            }
            VarMap::Mirror { col, hi } => {
                coeffs[col] -= a;
                rhs -= a * hi;
            }
            VarMap::Split { pos, neg } => {
                coeffs[pos] += a;
                coeffs[neg] -= a;
            }
        }
    }
    (coeffs, rhs)
}

/// Checks the recovered point against the original rows and bounds; tiny
/// bound violations are clamped, anything beyond tolerance is an error.
fn verify(lp: &LinearProgram, values: &mut [f64], opts: &SimplexOptions) -> Result<(), LpError> {
    for (j, (&(lo, hi), x)) in lp.bounds.iter().zip(values.iter_mut()).enumerate() {
        let tol = opts.feasibility_tol * x.abs().max(1.0);
        if *x < lo - tol || *x > hi + tol {
            return Err(LpError::NumericBreakdown(format!(
                "variable {j} = {x} violates [{lo}, {hi}]"
            )));
        }
        *x = x.clamp(lo, hi);
    }
    for (i, c) in lp.constraints.iter().enumerate() {
        let lhs: f64 = c.coeffs.iter().zip(values.iter()).map(|(a, x)| a * x).sum();
        let tol = opts.feasibility_tol * c.rhs.abs().max(1.0);
        let ok = match c.relation {
            Relation::Le => lhs <= c.rhs + tol,
            Relation::Ge => lhs >= c.rhs - tol,
            Relation::Eq => (lhs - c.rhs).abs() <= tol,
        };
        if !ok {
            return Err(LpError::NumericBreakdown(format!(
                "row {i}: {lhs} {} {} violated",
                c.relation, c.rhs
            )));
        }
    }
    Ok(())
}
