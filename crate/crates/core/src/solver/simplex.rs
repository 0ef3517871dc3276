//! Dense bounded-variable primal simplex.
//!
//! Rows are turned into equalities with one slack each; slack bounds carry
//! the row sense. A first phase drives artificial variables out, the second
//! optimises the real objective. Dantzig pricing switches to Bland's rule
//! after a run of degenerate pivots.

use crate::milp::{MilpModel, Sense};

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const DEGENERATE_RUN: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub enum LpStatus {
    Optimal { objective: f64, values: Vec<f64> },
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// `min c·x` subject to `rows` and per-variable bounds.
#[derive(Clone, Debug)]
pub struct Lp {
    pub cost: Vec<f64>,
    pub rows: Vec<(Vec<(usize, f64)>, Sense, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Lp {
    /// Linear relaxation of a model (binaries relaxed to [0,1]).
    pub fn relaxation(model: &MilpModel) -> Lp {
        let n = model.variables.len();
        let mut cost = vec![0.0; n];
        for &(v, c) in &model.objective {
            cost[v] += c;
        }
        Lp {
            cost,
            rows: model.constraints.iter().map(|c| (c.terms.clone(), c.sense, c.rhs)).collect(),
            lower: model.variables.iter().map(|v| v.lower).collect(),
            upper: model.variables.iter().map(|v| v.upper).collect(),
        }
    }

    pub fn solve(&self) -> LpStatus {
        Tableau::new(self).run(self)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

struct Tableau {
    m: usize,
    cols: usize,
    /// Row-major `m x cols`: the current `B^-1 A`.
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    value: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    structural: usize,
    first_artificial: usize,
}

impl Tableau {
    fn new(lp: &Lp) -> Tableau {
        let n = lp.cost.len();
        let m = lp.rows.len();
        let cols = n + 2 * m;
        let mut t = vec![0.0; m * cols];
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut value = vec![0.0; cols];
        let mut status = vec![Status::AtLower; cols];
        for j in 0..n {
            (value[j], status[j]) = if lower[j].is_finite() {
                (lower[j], Status::AtLower)
            } else if upper[j].is_finite() {
                (upper[j], Status::AtUpper)
            } else {
                (0.0, Status::Free)
            };
        }
        let mut basis = vec![0; m];
        for (r, (terms, sense, rhs)) in lp.rows.iter().enumerate() {
            let row = &mut t[r * cols..(r + 1) * cols];
            let mut resid = *rhs;
            for &(v, c) in terms {
                row[v] += c;
                resid -= c * value[v];
            }
            let s = n + r;
            row[s] = 1.0;
            let (sl, su) = match sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(sl);
            upper.push(su);
            let a = n + m + r;
            if resid >= sl - FEAS_TOL && resid <= su + FEAS_TOL {
                basis[r] = s;
                status[s] = Status::Basic;
                value[s] = resid;
                status[a] = Status::AtLower;
            } else {
                // artificial carries the residual; flip the row so it is positive
                value[s] = 0.0;
                status[s] = if sl == 0.0 { Status::AtLower } else { Status::AtUpper };
                if resid < 0.0 {
                    for x in row.iter_mut() {
                        *x = -*x;
                    }
                }
                row[a] = 1.0;
                basis[r] = a;
                status[a] = Status::Basic;
                value[a] = resid.abs();
            }
        }
        for _ in 0..m {
            lower.push(0.0);
            upper.push(f64::INFINITY);
        }
        Tableau { m, cols, t, lower, upper, value, status, basis, structural: n, first_artificial: n + m }
    }

    fn run(mut self, lp: &Lp) -> LpStatus {
        let limit = 50 * (self.m + self.cols) + 1000;
        let mut phase1 = vec![0.0; self.cols];
        for c in phase1.iter_mut().skip(self.first_artificial) {
            *c = 1.0;
        }
        if self.basis.iter().any(|&b| b >= self.first_artificial) {
            match self.optimize(&phase1, limit) {
                Ok(()) => {}
                Err(s) => return s,
            }
            let infeas: f64 = self.value[self.first_artificial..].iter().sum();
            if infeas > 1e-7 {
                return LpStatus::Infeasible;
            }
        }
        // artificials may stay basic at zero; pin them there
        for j in self.first_artificial..self.cols {
            self.upper[j] = 0.0;
            if self.status[j] != Status::Basic {
                self.value[j] = 0.0;
                self.status[j] = Status::AtLower;
            }
        }
        let mut cost = vec![0.0; self.cols];
        cost[..self.structural].copy_from_slice(&lp.cost);
        if let Err(s) = self.optimize(&cost, limit) {
            return s;
        }
        let values = self.value[..self.structural].to_vec();
        let objective = lp.cost.iter().zip(&values).map(|(c, x)| c * x).sum();
        LpStatus::Optimal { objective, values }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                let row = &self.t[r * self.cols..(r + 1) * self.cols];
                for (dj, &a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn optimize(&mut self, cost: &[f64], limit: usize) -> Result<(), LpStatus> {
        let mut d = self.reduced_costs(cost);
        let mut degenerate = 0;
        for iter in 0..limit {
            let bland = degenerate >= DEGENERATE_RUN;
            let Some((j, dir)) = self.entering(&d, bland) else {
                return Ok(());
            };
            let step = self.ratio_test(j, dir, bland);
            let (theta, leave) = match step {
                None => return Err(LpStatus::Unbounded),
                Some(s) => s,
            };
            degenerate = if theta <= FEAS_TOL { degenerate + 1 } else { 0 };
            for r in 0..self.m {
                let a = self.t[r * self.cols + j];
                if a != 0.0 {
                    self.value[self.basis[r]] -= dir * theta * a;
                }
            }
            self.value[j] += dir * theta;
            match leave {
                None => {
                    self.status[j] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                    self.value[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    self.status[out] = if to_upper { Status::AtUpper } else { Status::AtLower };
                    self.value[out] = if to_upper { self.upper[out] } else { self.lower[out] };
                    self.pivot(r, j, &mut d);
                }
            }
            if iter % 200 == 199 {
                d = self.reduced_costs(cost);
            }
        }
        Err(LpStatus::IterationLimit)
    }

    fn entering(&self, d: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.cols {
            let dir = match self.status[j] {
                Status::Basic => continue,
                Status::AtLower if d[j] < -COST_TOL && self.upper[j] > self.lower[j] => 1.0,
                Status::AtUpper if d[j] > COST_TOL && self.upper[j] > self.lower[j] => -1.0,
                Status::Free if d[j].abs() > COST_TOL => -d[j].signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = d[j].abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    /// Step length and the leaving row (with the bound it stops at), or a
    /// bound flip of the entering variable (`None` row).
    #[allow(clippy::type_complexity)]
    fn ratio_test(&self, j: usize, dir: f64, bland: bool) -> Option<(f64, Option<(usize, bool)>)> {
        let mut theta = self.upper[j] - self.lower[j];
        let mut leave: Option<(usize, bool)> = None;
        let mut best_pivot = 0.0;
        for r in 0..self.m {
            let a = self.t[r * self.cols + j];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[r];
            // basic value moves by -dir * a * step
            let rate = -dir * a;
            let (room, to_upper) = if rate < 0.0 {
                ((self.value[b] - self.lower[b]) / -rate, false)
            } else {
                ((self.upper[b] - self.value[b]) / rate, true)
            };
            if !room.is_finite() {
                continue;
            }
            let room = room.max(0.0);
            let better = if room < theta - 1e-12 {
                true
            } else if room <= theta + 1e-12 && leave.is_some() {
                if bland {
                    b < self.basis[leave.unwrap().0]
                } else {
                    a.abs() > best_pivot
                }
            } else {
                false
            };
            if better {
                theta = room;
                leave = Some((r, to_upper));
                best_pivot = a.abs();
            }
        }
        if theta.is_infinite() {
            None
        } else {
            Some((theta, leave))
        }
    }

    fn pivot(&mut self, r: usize, j: usize, d: &mut [f64]) {
        let cols = self.cols;
        let piv = self.t[r * cols + j];
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for x in row.iter_mut() {
                *x /= piv;
            }
        }
        let prow: Vec<f64> = self.t[r * cols..(r + 1) * cols].to_vec();
        let nz: Vec<usize> = (0..cols).filter(|&k| prow[k] != 0.0).collect();
        for k in 0..self.m {
            if k == r {
                continue;
            }
            let f = self.t[k * cols + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[k * cols..(k + 1) * cols];
            for &c in &nz {
                row[c] -= f * prow[c];
            }
            row[j] = 0.0;
        }
        let f = d[j];
        if f != 0.0 {
            for &c in &nz {
                d[c] -= f * prow[c];
            }
            d[j] = 0.0;
        }
        self.basis[r] = j;
        self.status[j] = Status::Basic;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(cost: Vec<f64>, rows: Vec<(Vec<(usize, f64)>, Sense, f64)>, lower: Vec<f64>, upper: Vec<f64>) -> Lp {
        Lp { cost, rows, lower, upper }
    }

    fn optimum(s: LpStatus) -> (f64, Vec<f64>) {
        match s {
            LpStatus::Optimal { objective, values } => (objective, values),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18
        let p = lp(
            vec![-3.0, -5.0],
            vec![
                (vec![(0, 1.0)], Sense::Le, 4.0),
                (vec![(1, 2.0)], Sense::Le, 12.0),
                (vec![(0, 3.0), (1, 2.0)], Sense::Le, 18.0),
            ],
            vec![0.0, 0.0],
            vec![f64::INFINITY; 2],
        );
        let (obj, x) = optimum(p.solve());
        assert!((obj + 36.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn needs_phase_one() {
        // min x + y, x + y >= 2, x - y = 0
        let p = lp(
            vec![1.0, 1.0],
            vec![(vec![(0, 1.0), (1, 1.0)], Sense::Ge, 2.0), (vec![(0, 1.0), (1, -1.0)], Sense::Eq, 0.0)],
            vec![0.0, 0.0],
            vec![f64::INFINITY; 2],
        );
        let (obj, x) = optimum(p.solve());
        assert!((obj - 2.0).abs() < 1e-9);
        assert!((x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bounds_and_flips() {
        // min -x - y, x,y in [0,1], x + y <= 1.5
        let p = lp(vec![-1.0, -1.0], vec![(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.5)], vec![0.0, 0.0], vec![1.0, 1.0]);
        let (obj, _) = optimum(p.solve());
        assert!((obj + 1.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = lp(vec![1.0], vec![(vec![(0, 1.0)], Sense::Ge, 2.0)], vec![0.0], vec![1.0]);
        assert_eq!(p.solve(), LpStatus::Infeasible);
        let p = lp(vec![-1.0], vec![(vec![(0, 1.0)], Sense::Ge, 2.0)], vec![0.0], vec![f64::INFINITY]);
        assert_eq!(p.solve(), LpStatus::Unbounded);
    }

    #[test]
    fn free_variable() {
        // min y, y >= x - 3, y >= -x + 1, x free, y free
        let p = lp(
            vec![0.0, 1.0],
            vec![(vec![(1, 1.0), (0, -1.0)], Sense::Ge, -3.0), (vec![(1, 1.0), (0, 1.0)], Sense::Ge, 1.0)],
            vec![f64::NEG_INFINITY; 2],
            vec![f64::INFINITY; 2],
        );
        let (obj, x) = optimum(p.solve());
        assert!((obj + 1.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9);
    }
}
