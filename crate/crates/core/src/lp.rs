//! Dense two-phase simplex for the small feasibility problems behind the
//! theorem of the alternative and the criticality test.
//!
//! Bland's rule is used throughout, so the method terminates on degenerate
//! problems; the instances here have at most a few dozen columns.

const EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
struct Constraint {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

/// `maximize c.x` subject to linear constraints. Variables are nonnegative
/// unless marked free.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    free: Vec<bool>,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            free: vec![false; num_vars],
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.free[var] = true;
        self
    }

    pub fn maximize(&mut self, objective: Vec<f64>) -> &mut Self {
        assert_eq!(objective.len(), self.free.len());
        self.objective = objective;
        self
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.free.len());
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    /// `rows x (cols + 1)`; the last column is the right-hand side and the
    /// last row the objective row (`-c`, so its rhs is the current value).
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Column index of the positive and (for free variables) negative part.
    var_cols: Vec<(usize, Option<usize>)>,
    first_artificial: usize,
    cols: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let mut var_cols = Vec::with_capacity(lp.free.len());
        let mut next = 0;
        for &free in &lp.free {
            if free {
                var_cols.push((next, Some(next + 1)));
                next += 2;
            } else {
                var_cols.push((next, None));
                next += 1;
            }
        }
        let structural = next;
        let n_slack = lp
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        let first_artificial = structural + n_slack;
        // Rows that cannot start with their slack basic need an artificial.
        let needs_artificial: Vec<bool> = lp
            .constraints
            .iter()
            .map(|c| {
                let flipped = c.rhs < 0.0;
                !matches!(
                    (c.relation, flipped),
                    (Relation::Le, false) | (Relation::Ge, true)
                )
            })
            .collect();
        let n_art = needs_artificial.iter().filter(|&&b| b).count();
        let cols = first_artificial + n_art;
        let rows = lp.constraints.len();

        let mut t = vec![vec![0.0; cols + 1]; rows + 1];
        let mut basis = vec![0; rows];
        let mut slack = structural;
        let mut art = first_artificial;
        for (i, c) in lp.constraints.iter().enumerate() {
            let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
            for (j, &a) in c.coeffs.iter().enumerate() {
                let (pos, neg) = var_cols[j];
                t[i][pos] = sign * a;
                if let Some(neg) = neg {
                    t[i][neg] = -sign * a;
                }
            }
            t[i][cols] = sign * c.rhs;
            match c.relation {
                Relation::Le => {
                    t[i][slack] = sign;
                    if !needs_artificial[i] {
                        basis[i] = slack;
                    }
                    slack += 1;
                }
                Relation::Ge => {
                    t[i][slack] = -sign;
                    if !needs_artificial[i] {
                        basis[i] = slack;
                    }
                    slack += 1;
                }
                Relation::Eq => {}
            }
            if needs_artificial[i] {
                t[i][art] = 1.0;
                basis[i] = art;
                art += 1;
            }
        }
        Tableau {
            t,
            basis,
            var_cols,
            first_artificial,
            cols,
        }
    }

    fn obj(&self) -> usize {
        self.t.len() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Optimize the current objective row over columns `< allowed`.
    /// Returns false when unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        let obj = self.obj();
        let rhs = self.cols;
        loop {
            let Some(enter) = (0..allowed).find(|&j| self.t[obj][j] < -EPS) else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..obj {
                let a = self.t[i][enter];
                if a > EPS {
                    let ratio = self.t[i][rhs] / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - EPS
                                || (ratio <= best + EPS && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, enter),
                None => return false,
            }
        }
    }

    fn set_objective(&mut self, costs: &[f64]) {
        let obj = self.obj();
        let rhs = self.cols;
        for j in 0..=rhs {
            self.t[obj][j] = if j < costs.len() { -costs[j] } else { 0.0 };
        }
        for i in 0..obj {
            let b = self.basis[i];
            let factor = self.t[obj][b];
            if factor != 0.0 {
                for j in 0..=rhs {
                    self.t[obj][j] -= factor * self.t[i][j];
                }
            }
        }
    }

    fn run(mut self, lp: &LinearProgram) -> LpOutcome {
        let rhs = self.cols;
        if self.cols > self.first_artificial {
            let mut phase1 = vec![0.0; self.cols];
            for c in &mut phase1[self.first_artificial..] {
                *c = -1.0;
            }
            self.set_objective(&phase1);
            self.optimize(self.cols);
            let obj = self.obj();
            if self.t[obj][rhs] < -1e-9 {
                return LpOutcome::Infeasible;
            }
            // Drive zero-level artificials out of the basis where possible.
            for i in 0..obj {
                if self.basis[i] >= self.first_artificial {
                    if let Some(j) = (0..self.first_artificial).find(|&j| self.t[i][j].abs() > 1e-9)
                    {
                        self.pivot(i, j);
                    }
                }
            }
        }
        let mut costs = vec![0.0; self.first_artificial];
        for (j, &c) in lp.objective.iter().enumerate() {
            let (pos, neg) = self.var_cols[j];
            costs[pos] = c;
            if let Some(neg) = neg {
                costs[neg] = -c;
            }
        }
        self.set_objective(&costs);
        if !self.optimize(self.first_artificial) {
            return LpOutcome::Unbounded;
        }
        let mut col_values = vec![0.0; self.cols];
        for (i, &b) in self.basis.iter().enumerate() {
            col_values[b] = self.t[i][rhs];
        }
        let x: Vec<f64> = self
            .var_cols
            .iter()
            .map(|&(pos, neg)| col_values[pos] - neg.map_or(0.0, |n| col_values[n]))
            .collect();
        let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpOutcome::Optimal { x, value }
    }
}
