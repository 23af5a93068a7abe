//! Exact feasibility of small linear systems over the rationals.
//!
//! Phase-1 simplex on a dense tableau with Bland's rule. Every returned
//! solution is checked by substitution.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<BigRational>,
    pub rel: Relation,
    pub rhs: BigRational,
}

impl Constraint {
    pub fn new(coeffs: Vec<BigRational>, rel: Relation, rhs: BigRational) -> Self {
        Constraint { coeffs, rel, rhs }
    }

    pub fn holds(&self, x: &[BigRational]) -> bool {
        let lhs: BigRational = self
            .coeffs
            .iter()
            .zip(x)
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, v)| c * v)
            .sum();
        match self.rel {
            Relation::Le => lhs <= self.rhs,
            Relation::Eq => lhs == self.rhs,
            Relation::Ge => lhs >= self.rhs,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub n_vars: usize,
    /// All variables implicitly non-negative; otherwise they are free.
    pub nonnegative: bool,
    pub constraints: Vec<Constraint>,
}

impl LinearSystem {
    pub fn new(n_vars: usize, nonnegative: bool) -> Self {
        LinearSystem {
            n_vars,
            nonnegative,
            constraints: Vec::new(),
        }
    }

    pub fn push(&mut self, coeffs: Vec<BigRational>, rel: Relation, rhs: BigRational) {
        self.constraints.push(Constraint::new(coeffs, rel, rhs));
    }

    pub fn is_satisfied_by(&self, x: &[BigRational]) -> bool {
        x.len() == self.n_vars
            && (!self.nonnegative || x.iter().all(|v| !v.is_negative()))
            && self.constraints.iter().all(|c| c.holds(x))
    }
}

/// A solution of the system, or `None` if it is infeasible.
pub fn lp_feasible(system: &LinearSystem) -> Result<Option<Vec<BigRational>>> {
    for (i, c) in system.constraints.iter().enumerate() {
        if c.coeffs.len() != system.n_vars {
            return Err(Error::MalformedSystem(format!(
                "constraint {i} has {} coefficients, expected {}",
                c.coeffs.len(),
                system.n_vars
            )));
        }
    }
    // Free variables are split as x = x+ - x-.
    let split = !system.nonnegative;
    let nx = if split { 2 * system.n_vars } else { system.n_vars };
    let rows: Vec<(Vec<BigRational>, Relation, BigRational)> = system
        .constraints
        .iter()
        .map(|c| {
            let mut a = Vec::with_capacity(nx);
            a.extend(c.coeffs.iter().cloned());
            if split {
                a.extend(c.coeffs.iter().map(|v| -v));
            }
            (a, c.rel, c.rhs.clone())
        })
        .collect();
    let Some(y) = phase_one(nx, rows) else {
        return Ok(None);
    };
    let x: Vec<BigRational> = if split {
        (0..system.n_vars)
            .map(|i| &y[i] - &y[i + system.n_vars])
            .collect()
    } else {
        y
    };
    if !system.is_satisfied_by(&x) {
        return Err(Error::MalformedSystem(
            "internal error: simplex solution failed verification".into(),
        ));
    }
    Ok(Some(x))
}

/// Feasibility of `{a_i x (rel_i) b_i, x >= 0}`.
fn phase_one(nx: usize, rows: Vec<(Vec<BigRational>, Relation, BigRational)>) -> Option<Vec<BigRational>> {
    let m = rows.len();
    if m == 0 {
        return Some(vec![BigRational::zero(); nx]);
    }
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    // columns: x | slacks | artificials | rhs
    let n_cols = nx + n_slack + m;
    let mut t: Vec<Vec<BigRational>> = Vec::with_capacity(m + 1);
    let mut basis = Vec::with_capacity(m);
    let mut slack = nx;
    for (i, (a, rel, b)) in rows.into_iter().enumerate() {
        let mut row = vec![BigRational::zero(); n_cols + 1];
        for (j, v) in a.into_iter().enumerate() {
            row[j] = v;
        }
        match rel {
            Relation::Le => {
                row[slack] = BigRational::one();
                slack += 1;
            }
            Relation::Ge => {
                row[slack] = -BigRational::one();
                slack += 1;
            }
            Relation::Eq => {}
        }
        row[n_cols] = b;
        if row[n_cols].is_negative() {
            for v in row.iter_mut() {
                *v = -&*v;
            }
        }
        row[nx + n_slack + i] = BigRational::one();
        basis.push(nx + n_slack + i);
        t.push(row);
    }
    // Objective: minimize the sum of artificials; reduced costs row.
    let mut obj = vec![BigRational::zero(); n_cols + 1];
    for row in &t {
        for (j, v) in row.iter().enumerate() {
            if j < nx + n_slack || j == n_cols {
                obj[j] -= v;
            }
        }
    }
    t.push(obj);
    loop {
        let z = &t[m];
        let Some(enter) = (0..n_cols).find(|&j| z[j].is_negative()) else {
            break;
        };
        let mut leave: Option<(usize, BigRational)> = None;
        for i in 0..m {
            let a = &t[i][enter];
            if a.is_positive() {
                let ratio = &t[i][n_cols] / a;
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // Phase 1 is bounded below by zero.
        let (r, _) = leave.expect("phase one is bounded");
        pivot(&mut t, r, enter);
        basis[r] = enter;
    }
    if !t[m][n_cols].is_zero() {
        return None;
    }
    let mut x = vec![BigRational::zero(); nx];
    for (i, &b) in basis.iter().enumerate() {
        if b < nx {
            x[b] = t[i][n_cols].clone();
        }
    }
    Some(x)
}

fn pivot(t: &mut [Vec<BigRational>], r: usize, c: usize) {
    let p = t[r][c].clone();
    for v in t[r].iter_mut() {
        if !v.is_zero() {
            *v /= &p;
        }
    }
    let pivot_row = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i == r || row[c].is_zero() {
            continue;
        }
        let f = row[c].clone();
        for (v, pv) in row.iter_mut().zip(&pivot_row) {
            if !pv.is_zero() {
                *v -= &f * pv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn trivial_systems() {
        let mut s = LinearSystem::new(1, false);
        s.push(vec![q(1)], Relation::Ge, q(0));
        s.push(vec![q(1)], Relation::Ge, q(1));
        let x = lp_feasible(&s).unwrap().unwrap();
        assert!(x[0] >= q(1));

        let mut s = LinearSystem::new(1, false);
        s.push(vec![q(1)], Relation::Ge, q(0));
        s.push(vec![q(1)], Relation::Le, q(-1));
        assert!(lp_feasible(&s).unwrap().is_none());

        let mut s = LinearSystem::new(2, false);
        s.push(vec![q(1)], Relation::Ge, q(0));
        assert!(matches!(lp_feasible(&s), Err(Error::MalformedSystem(_))));
    }

    #[test]
    fn free_variables_go_negative() {
        let mut s = LinearSystem::new(2, false);
        s.push(vec![q(1), q(1)], Relation::Eq, q(-3));
        s.push(vec![q(1), q(-1)], Relation::Eq, q(1));
        let x = lp_feasible(&s).unwrap().unwrap();
        assert_eq!(x, vec![q(-1), q(-2)]);
    }

    /// Solves a square system exactly; `None` if singular.
    fn gauss(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
        let n = b.len();
        for col in 0..n {
            let p = (col..n).find(|&r| !a[r][col].is_zero())?;
            a.swap(col, p);
            b.swap(col, p);
            for r in 0..n {
                if r != col && !a[r][col].is_zero() {
                    let f = &a[r][col] / &a[col][col];
                    for k in 0..n {
                        let d = &f * &a[col][k];
                        a[r][k] -= d;
                    }
                    let d = &f * &b[col];
                    b[r] -= d;
                }
            }
        }
        Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
    }

    /// A non-empty pointed polyhedron has a vertex; try every choice of
    /// `n` tight rows among the constraints and the bounds `x >= 0`.
    fn vertex_oracle(s: &LinearSystem) -> bool {
        let n = s.n_vars;
        let mut rows: Vec<(Vec<BigRational>, BigRational)> = s
            .constraints
            .iter()
            .map(|c| (c.coeffs.clone(), c.rhs.clone()))
            .collect();
        for i in 0..n {
            let mut e = vec![q(0); n];
            e[i] = q(1);
            rows.push((e, q(0)));
        }
        let k = rows.len();
        for mask in 0u32..(1 << k) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let pick: Vec<_> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            let a = pick.iter().map(|&i| rows[i].0.clone()).collect();
            let b = pick.iter().map(|&i| rows[i].1.clone()).collect();
            if let Some(x) = gauss(a, b) {
                if s.is_satisfied_by(&x) {
                    return true;
                }
            }
        }
        false
    }

    fn rel_of(r: u8) -> Relation {
        match r % 3 {
            0 => Relation::Le,
            1 => Relation::Eq,
            _ => Relation::Ge,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn matches_vertex_enumeration(
            n in 1usize..=4,
            rows in proptest::collection::vec((proptest::collection::vec(-3i64..=3, 4), 0u8..3, -4i64..=4), 0..=6)
        ) {
            let mut s = LinearSystem::new(n, true);
            for (a, r, b) in rows {
                s.push(a[..n].iter().map(|&v| q(v)).collect(), rel_of(r), q(b));
            }
            let got = lp_feasible(&s).unwrap();
            prop_assert_eq!(got.is_some(), vertex_oracle(&s));
            if let Some(x) = got {
                prop_assert!(s.is_satisfied_by(&x));
            }
        }
    }
}
