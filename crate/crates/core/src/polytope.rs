use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::exactlin::{fmt_rational, parse_rational, QVector, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("certificate index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LinForm {
    coeffs: BTreeMap<String, Rational>,
    constant: Rational,
}

impl LinForm {
    pub fn zero() -> Self {
        LinForm::default()
    }

    pub fn constant(c: Rational) -> Self {
        LinForm {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(name: &str) -> Self {
        Self::term(Rational::one(), name)
    }

    pub fn term(c: Rational, name: &str) -> Self {
        let mut f = LinForm::zero();
        f.add_term(c, name);
        f
    }

    pub fn add_term(&mut self, c: Rational, name: &str) {
        let e = self.coeffs.entry(name.to_string()).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            self.coeffs.remove(name);
        }
    }

    pub fn add_constant(&mut self, c: &Rational) {
        self.constant += c;
    }

    pub fn coeff(&self, name: &str) -> Rational {
        self.coeffs.get(name).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn coeffs(&self) -> &BTreeMap<String, Rational> {
        &self.coeffs
    }

    pub fn constant_term(&self) -> &Rational {
        &self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn variables(&self) -> impl Iterator<Item = &String> {
        self.coeffs.keys()
    }

    pub fn plus(&self, other: &LinForm) -> LinForm {
        let mut out = self.clone();
        for (v, c) in &other.coeffs {
            out.add_term(c.clone(), v);
        }
        out.constant += &other.constant;
        out
    }

    pub fn minus(&self, other: &LinForm) -> LinForm {
        self.plus(&other.scaled(&-Rational::one()))
    }

    pub fn scaled(&self, c: &Rational) -> LinForm {
        if c.is_zero() {
            return LinForm::zero();
        }
        LinForm {
            coeffs: self.coeffs.iter().map(|(v, x)| (v.clone(), x * c)).collect(),
            constant: &self.constant * c,
        }
    }

    pub fn neg(&self) -> LinForm {
        self.scaled(&-Rational::one())
    }

    pub fn eval(&self, point: &BTreeMap<String, Rational>) -> Rational {
        let mut s = self.constant.clone();
        for (v, c) in &self.coeffs {
            if let Some(x) = point.get(v) {
                s += c * x;
            }
        }
        s
    }

    /// Replaces `name` by the form `by`.
    pub fn substitute(&self, name: &str, by: &LinForm) -> LinForm {
        let c = self.coeff(name);
        if c.is_zero() {
            return self.clone();
        }
        let mut base = self.clone();
        base.coeffs.remove(name);
        base.plus(&by.scaled(&c))
    }
}

impl fmt::Display for LinForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let mut push = |c: &Rational, v: Option<&str>| {
            if c.is_zero() {
                return;
            }
            let a = c.abs();
            let sign = if c.is_negative() { "-" } else { "+" };
            if out.is_empty() {
                if c.is_negative() {
                    out.push('-');
                }
            } else {
                out.push_str(&format!(" {sign} "));
            }
            match v {
                Some(v) if a.is_one() => out.push_str(v),
                Some(v) => out.push_str(&format!("{}*{}", fmt_rational(&a), v)),
                None => out.push_str(&fmt_rational(&a)),
            }
        };
        for (v, c) in &self.coeffs {
            push(c, Some(v));
        }
        push(&self.constant, None);
        if out.is_empty() {
            out.push('0');
        }
        write!(f, "{out}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Ge,
    Gt,
    Eq,
}

impl Relation {
    pub fn symbol(&self) -> &'static str {
        match self {
            Relation::Ge => ">=",
            Relation::Gt => ">",
            Relation::Eq => "=",
        }
    }
}

/// `form rel 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub form: LinForm,
    pub rel: Relation,
}

impl Constraint {
    pub fn ge(form: LinForm) -> Self {
        Constraint { form, rel: Relation::Ge }
    }

    pub fn gt(form: LinForm) -> Self {
        Constraint { form, rel: Relation::Gt }
    }

    pub fn eq(form: LinForm) -> Self {
        Constraint { form, rel: Relation::Eq }
    }

    pub fn is_strict(&self) -> bool {
        self.rel == Relation::Gt
    }

    pub fn holds(&self, point: &BTreeMap<String, Rational>) -> bool {
        let v = self.form.eval(point);
        match self.rel {
            Relation::Ge => !v.is_negative(),
            Relation::Gt => v.is_positive(),
            Relation::Eq => v.is_zero(),
        }
    }

    /// The complement of the solution set, as a disjunction of constraints.
    pub fn negations(&self) -> Vec<Constraint> {
        match self.rel {
            Relation::Ge => vec![Constraint::gt(self.form.neg())],
            Relation::Gt => vec![Constraint::ge(self.form.neg())],
            Relation::Eq => vec![Constraint::gt(self.form.clone()), Constraint::gt(self.form.neg())],
        }
    }

    fn closure(&self) -> Constraint {
        match self.rel {
            Relation::Gt => Constraint::ge(self.form.clone()),
            _ => self.clone(),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} 0", self.form, self.rel.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ConstraintSystem {
    variables: Vec<String>,
    constraints: Vec<Constraint>,
}

impl ConstraintSystem {
    pub fn new<S: AsRef<str>>(variables: &[S]) -> Self {
        let mut s = ConstraintSystem::default();
        for v in variables {
            s.declare(v.as_ref());
        }
        s
    }

    pub fn declare(&mut self, v: &str) {
        if !self.variables.iter().any(|x| x == v) {
            self.variables.push(v.to_string());
        }
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn push(&mut self, c: Constraint) -> Result<(), PolyError> {
        if let Some(v) = c.form.variables().find(|v| !self.variables.contains(v)) {
            return Err(PolyError::UnknownVariable(v.clone()));
        }
        self.constraints.push(c);
        Ok(())
    }

    /// Declares any new variables of `c` and appends it.
    pub fn push_declaring(&mut self, c: Constraint) {
        let vars: Vec<String> = c.form.variables().cloned().collect();
        for v in vars {
            self.declare(&v);
        }
        self.constraints.push(c);
    }

    pub fn with(&self, extra: &[Constraint]) -> ConstraintSystem {
        let mut s = self.clone();
        for c in extra {
            s.push_declaring(c.clone());
        }
        s
    }

    pub fn point(&self, x: &QVector) -> BTreeMap<String, Rational> {
        self.variables.iter().cloned().zip(x.iter().cloned()).collect()
    }

    pub fn satisfied_by(&self, x: &QVector) -> bool {
        let p = self.point(x);
        self.constraints.iter().all(|c| c.holds(&p))
    }

    pub fn has_strict(&self) -> bool {
        self.constraints.iter().any(|c| c.is_strict())
    }

    /// One constraint per line, `<p/q>*<var> + ... + <p/q> >= 0 | > 0 | = 0`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in &self.constraints {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }

    pub fn restore(text: &str) -> Result<ConstraintSystem, PolyError> {
        let mut s = ConstraintSystem::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            s.push_declaring(parse_constraint(line)?);
        }
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Conclusion {
    /// The combination is identically zero and uses a strict constraint.
    ZeroGtZero,
    /// The combination is a negative constant and uses a strict constraint.
    ZeroGeEps,
    /// The combination is a negative constant.
    NegativeGeZero,
}

impl fmt::Display for Conclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Conclusion::ZeroGtZero => "0 > 0",
            Conclusion::ZeroGeEps => "0 >= eps > 0",
            Conclusion::NegativeGeZero => "negative >= 0",
        };
        write!(f, "{s}")
    }
}

/// Multipliers on `= 0` constraints may be negative; all others are nonnegative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FarkasCertificate {
    pub multipliers: Vec<(usize, Rational)>,
    pub conclusion: Conclusion,
}

impl fmt::Display for FarkasCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .multipliers
            .iter()
            .map(|(i, y)| format!("{}*[{}]", fmt_rational(y), i))
            .collect();
        write!(f, "{} => {}", parts.join(" + "), self.conclusion)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Feasibility {
    Feasible(QVector),
    Infeasible(FarkasCertificate),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoundResult {
    Value { value: Rational, witness: QVector },
    Unbounded,
    Infeasible,
}

impl BoundResult {
    pub fn value(&self) -> Option<&Rational> {
        match self {
            BoundResult::Value { value, .. } => Some(value),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Simplex core: maximize obj.x subject to rows (a.x + c >= 0 or = 0).

#[derive(Clone, Debug)]
struct Lp {
    nvars: usize,
    nonneg: Vec<bool>,
    rows: Vec<(Vec<Rational>, Rational, bool)>,
    obj: Vec<Rational>,
}

enum LpOutcome {
    Optimal(Vec<Rational>, Rational),
    Unbounded,
    Infeasible,
}

struct Tableau {
    t: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.t[r][c].clone();
        if !piv.is_one() {
            for x in self.t[r].iter_mut() {
                if !x.is_zero() {
                    *x /= &piv;
                }
            }
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, p) in row.iter_mut().zip(&prow) {
                if !p.is_zero() {
                    *x -= &f * p;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Largest reduced cost first, then Bland's rule once pivots run long (reduced costs stored as obj - z, maximize).
    fn run(&mut self, allowed: &dyn Fn(usize) -> bool) -> bool {
        let m = self.basis.len();
        let rhs = self.ncols;
        let mut pivots = 0usize;
        loop {
            let candidates = (0..self.ncols).filter(|&j| allowed(j) && self.t[m][j].is_positive());
            let entering = if pivots < 4 * (m + self.ncols) {
                candidates.max_by(|&a, &b| self.t[m][a].cmp(&self.t[m][b]).then(b.cmp(&a)))
            } else {
                candidates.min()
            };
            let Some(c) = entering else {
                return true;
            };
            pivots += 1;
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..m {
                if self.t[i][c].is_positive() {
                    let ratio = &self.t[i][rhs] / &self.t[i][c];
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => {
                            ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi])
                        }
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

impl Lp {
    fn solve(&self) -> LpOutcome {
        // Column layout: structural (x+ then x- for free vars), one slack per >= row, one artificial per row.
        let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(self.nvars);
        let mut ncols = 0;
        for j in 0..self.nvars {
            if self.nonneg[j] {
                col_of.push((ncols, None));
                ncols += 1;
            } else {
                col_of.push((ncols, Some(ncols + 1)));
                ncols += 2;
            }
        }
        let nstruct = ncols;
        let m = self.rows.len();
        let nslack = self.rows.iter().filter(|r| !r.2).count();
        // a >= row with c >= 0 starts with its slack basic; every other row gets an artificial
        let needs_art: Vec<bool> = self.rows.iter().map(|(_, c, eq)| *eq || c.is_negative()).collect();
        let art0 = nstruct + nslack;
        let total = art0 + needs_art.iter().filter(|&&b| b).count();
        let mut t = vec![vec![Rational::zero(); total + 1]; m + 1];
        let mut basis = Vec::with_capacity(m);
        let mut slack = nstruct;
        let mut art = art0;
        for (i, (a, c, is_eq)) in self.rows.iter().enumerate() {
            // a.x - s = -c
            let row = &mut t[i];
            for (j, aj) in a.iter().enumerate() {
                if aj.is_zero() {
                    continue;
                }
                let (p, n) = col_of[j];
                row[p] = aj.clone();
                if let Some(n) = n {
                    row[n] = -aj;
                }
            }
            let my_slack = (!*is_eq).then_some(slack);
            if !*is_eq {
                row[slack] = -Rational::one();
                slack += 1;
            }
            row[total] = -c;
            if row[total].is_negative() || (!needs_art[i] && row[total].is_zero()) {
                for x in row.iter_mut() {
                    *x = -x.clone();
                }
            }
            if needs_art[i] {
                row[art] = Rational::one();
                basis.push(art);
                art += 1;
            } else {
                basis.push(my_slack.expect("inequality row"));
            }
        }
        // Phase I objective: maximize -sum(artificials); reduced costs = sum of artificial rows.
        for i in (0..m).filter(|&i| needs_art[i]) {
            for j in 0..art0 {
                let v = t[i][j].clone();
                t[m][j] += v;
            }
            let v = t[i][total].clone();
            t[m][total] += v;
        }
        let mut tab = Tableau {
            t,
            basis,
            ncols: total,
        };
        tab.run(&|_| true);
        if tab.t[m][total].is_positive() {
            return LpOutcome::Infeasible;
        }
        // Drive remaining artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] >= art0 {
                if let Some(c) = (0..art0).find(|&j| !tab.t[i][j].is_zero()) {
                    tab.pivot(i, c);
                }
            }
        }
        // Phase II objective row.
        let mut cost = vec![Rational::zero(); total + 1];
        for j in 0..self.nvars {
            let (p, n) = col_of[j];
            cost[p] = self.obj[j].clone();
            if let Some(n) = n {
                cost[n] = -self.obj[j].clone();
            }
        }
        let mut zrow = cost.clone();
        for i in 0..m {
            let b = tab.basis[i];
            if b < total && !cost[b].is_zero() {
                let cb = cost[b].clone();
                for (z, x) in zrow.iter_mut().zip(&tab.t[i]) {
                    if !x.is_zero() {
                        *z -= &cb * x;
                    }
                }
            }
        }
        tab.t[m] = zrow;
        if !tab.run(&|j| j < art0) {
            return LpOutcome::Unbounded;
        }
        let mut colval = vec![Rational::zero(); total];
        for i in 0..m {
            colval[tab.basis[i]] = tab.t[i][total].clone();
        }
        let x: Vec<Rational> = (0..self.nvars)
            .map(|j| {
                let (p, n) = col_of[j];
                match n {
                    Some(n) => &colval[p] - &colval[n],
                    None => colval[p].clone(),
                }
            })
            .collect();
        let value = x.iter().zip(&self.obj).map(|(a, b)| a * b).sum();
        LpOutcome::Optimal(x, value)
    }
}

fn build_lp(sys: &ConstraintSystem, extra_vars: usize) -> (Lp, Vec<usize>) {
    let n = sys.variables.len();
    let idx: BTreeMap<&str, usize> = sys
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_str(), i))
        .collect();
    let mut nonneg = vec![false; n + extra_vars];
    let mut skipped = Vec::new();
    for (k, c) in sys.constraints.iter().enumerate() {
        if c.rel == Relation::Ge && c.form.constant.is_zero() && c.form.coeffs.len() == 1 {
            let (v, a) = c.form.coeffs.iter().next().unwrap();
            if a.is_positive() {
                nonneg[idx[v.as_str()]] = true;
                skipped.push(k);
            }
        }
    }
    let mut rows = Vec::new();
    let mut row_of = Vec::new();
    for (k, c) in sys.constraints.iter().enumerate() {
        if skipped.binary_search(&k).is_ok() {
            continue;
        }
        let mut a = vec![Rational::zero(); n + extra_vars];
        for (v, x) in &c.form.coeffs {
            a[idx[v.as_str()]] = x.clone();
        }
        rows.push((a, c.form.constant.clone(), c.rel == Relation::Eq));
        row_of.push(k);
    }
    (
        Lp {
            nvars: n + extra_vars,
            nonneg,
            rows,
            obj: vec![Rational::zero(); n + extra_vars],
        },
        row_of,
    )
}

fn objective(sys: &ConstraintSystem, f: &LinForm) -> Result<Vec<Rational>, PolyError> {
    let mut o = vec![Rational::zero(); sys.variables.len()];
    for (v, c) in &f.coeffs {
        let i = sys
            .variables
            .iter()
            .position(|x| x == v)
            .ok_or_else(|| PolyError::UnknownVariable(v.clone()))?;
        o[i] = c.clone();
    }
    Ok(o)
}

/// Exact feasibility with a witness or a Farkas certificate.
pub fn is_feasible(sys: &ConstraintSystem) -> Feasibility {
    let n = sys.variables.len();
    let (mut lp, row_of) = build_lp(sys, 1);
    // Strict rows get an epsilon slack; maximize epsilon with epsilon <= 1.
    lp.nonneg[n] = true;
    for (r, &k) in row_of.iter().enumerate() {
        if sys.constraints[k].is_strict() {
            lp.rows[r].0[n] = -Rational::one();
        }
    }
    if sys.has_strict() {
        let mut cap = vec![Rational::zero(); n + 1];
        cap[n] = -Rational::one();
        lp.rows.push((cap, Rational::one(), false));
        lp.obj[n] = Rational::one();
    }
    match lp.solve() {
        LpOutcome::Optimal(x, value) => {
            if !sys.has_strict() || value.is_positive() {
                let w = QVector::new(x[..n].to_vec());
                debug_assert!(sys.satisfied_by(&w));
                return Feasibility::Feasible(w);
            }
        }
        LpOutcome::Unbounded => unreachable!("epsilon is capped"),
        LpOutcome::Infeasible => {}
    }
    Feasibility::Infeasible(farkas(sys))
}

/// Searches for multipliers proving infeasibility; only called on infeasible systems.
fn farkas(sys: &ConstraintSystem) -> FarkasCertificate {
    let m = sys.constraints.len();
    // Variables: y_k (>= 0) for every constraint, plus y'_k for equalities (y_k - y'_k signed).
    let eqs: Vec<usize> = (0..m).filter(|&k| sys.constraints[k].rel == Relation::Eq).collect();
    let ny = m + eqs.len();
    let coeff_of = |k: usize, v: &str| sys.constraints[k].form.coeff(v);
    let mut rows = Vec::new();
    for v in &sys.variables {
        let mut a = vec![Rational::zero(); ny];
        for k in 0..m {
            a[k] = coeff_of(k, v);
        }
        for (e, &k) in eqs.iter().enumerate() {
            a[m + e] = -coeff_of(k, v);
        }
        rows.push((a, Rational::zero(), true));
    }
    rows.push((vec![-Rational::one(); ny], Rational::one(), false));
    let mut consts = vec![Rational::zero(); ny];
    for k in 0..m {
        consts[k] = sys.constraints[k].form.constant.clone();
    }
    for (e, &k) in eqs.iter().enumerate() {
        consts[m + e] = -sys.constraints[k].form.constant.clone();
    }
    let collect = |y: &[Rational]| -> Vec<(usize, Rational)> {
        let mut out = Vec::new();
        for k in 0..m {
            let mut v = y[k].clone();
            if let Some(e) = eqs.iter().position(|&q| q == k) {
                v -= &y[m + e];
            }
            if !v.is_zero() {
                out.push((k, v));
            }
        }
        out
    };
    let strict_used = |mult: &[(usize, Rational)]| {
        mult.iter()
            .any(|(k, y)| sys.constraints[*k].is_strict() && y.is_positive())
    };

    let lp1 = Lp {
        nvars: ny,
        nonneg: vec![true; ny],
        rows: rows.clone(),
        obj: consts.iter().map(|c| -c).collect(),
    };
    if let LpOutcome::Optimal(y, value) = lp1.solve() {
        if value.is_positive() {
            let mult = collect(&y);
            let conclusion = if strict_used(&mult) {
                Conclusion::ZeroGeEps
            } else {
                Conclusion::NegativeGeZero
            };
            return FarkasCertificate {
                multipliers: mult,
                conclusion,
            };
        }
    }
    let mut rows2 = rows;
    rows2.push((consts, Rational::zero(), true));
    let mut obj = vec![Rational::zero(); ny];
    for k in 0..m {
        if sys.constraints[k].is_strict() {
            obj[k] = Rational::one();
        }
    }
    let lp2 = Lp {
        nvars: ny,
        nonneg: vec![true; ny],
        rows: rows2,
        obj,
    };
    match lp2.solve() {
        LpOutcome::Optimal(y, value) if value.is_positive() => FarkasCertificate {
            multipliers: collect(&y),
            conclusion: Conclusion::ZeroGtZero,
        },
        _ => panic!("no Farkas certificate for a system the simplex reported infeasible"),
    }
}

/// Recomputes the combination from scratch and checks the declared conclusion.
pub fn verify_certificate(sys: &ConstraintSystem, cert: &FarkasCertificate) -> Result<bool, PolyError> {
    let mut sum = LinForm::zero();
    let mut strict = false;
    for (k, y) in &cert.multipliers {
        let c = sys
            .constraints
            .get(*k)
            .ok_or(PolyError::IndexOutOfRange(*k))?;
        if y.is_negative() && c.rel != Relation::Eq {
            return Ok(false);
        }
        if c.is_strict() && y.is_positive() {
            strict = true;
        }
        sum = sum.plus(&c.form.scaled(y));
    }
    if !sum.is_constant() {
        return Ok(false);
    }
    let k = &sum.constant;
    Ok(match cert.conclusion {
        Conclusion::ZeroGtZero => k.is_zero() && strict,
        Conclusion::ZeroGeEps => k.is_negative() && strict,
        Conclusion::NegativeGeZero => k.is_negative(),
    })
}

/// Optimum of `f` over the closure of the solution set (the supremum when strict constraints are present).
pub fn bound(sys: &ConstraintSystem, f: &LinForm, sense: Sense) -> Result<BoundResult, PolyError> {
    let mut o = objective(sys, f)?;
    if sys.has_strict() && !is_feasible(sys).is_feasible() {
        return Ok(BoundResult::Infeasible);
    }
    let closed = ConstraintSystem {
        variables: sys.variables.clone(),
        constraints: sys.constraints.iter().map(|c| c.closure()).collect(),
    };
    let (mut lp, _) = build_lp(&closed, 0);
    if sense == Sense::Min {
        o.iter_mut().for_each(|x| *x = -x.clone());
    }
    lp.obj = o;
    Ok(match lp.solve() {
        LpOutcome::Infeasible => BoundResult::Infeasible,
        LpOutcome::Unbounded => BoundResult::Unbounded,
        LpOutcome::Optimal(x, v) => {
            let v = if sense == Sense::Min { -v } else { v };
            BoundResult::Value {
                value: v + &f.constant,
                witness: QVector::new(x),
            }
        }
    })
}

pub fn bound_var(sys: &ConstraintSystem, v: &str, sense: Sense) -> Result<BoundResult, PolyError> {
    bound(sys, &LinForm::var(v), sense)
}

/// True iff `sys` together with any negation of `c` is infeasible.
pub fn implied(sys: &ConstraintSystem, c: &Constraint) -> bool {
    c.negations()
        .into_iter()
        .all(|neg| !is_feasible(&sys.with(&[neg])).is_feasible())
}

// ---------------------------------------------------------------------------
// Fourier–Motzkin.

fn normalize(c: &Constraint) -> Constraint {
    let scale = c
        .form
        .coeffs
        .values()
        .next()
        .map(|x| x.abs())
        .unwrap_or_else(|| {
            if c.form.constant.is_zero() {
                Rational::one()
            } else {
                c.form.constant.abs()
            }
        });
    Constraint {
        form: c.form.scaled(&scale.recip()),
        rel: c.rel,
    }
}

fn trivially_true(c: &Constraint) -> bool {
    c.form.is_constant()
        && match c.rel {
            Relation::Ge => !c.form.constant.is_negative(),
            Relation::Gt => c.form.constant.is_positive(),
            Relation::Eq => c.form.constant.is_zero(),
        }
}

fn dedupe(cs: Vec<Constraint>) -> Vec<Constraint> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut out: Vec<Constraint> = Vec::new();
    for c in cs {
        if trivially_true(&c) {
            continue;
        }
        let n = normalize(&c);
        // a strict copy subsumes the non-strict one with the same form
        let key_ge = format!("{} >=", n.form);
        let key_gt = format!("{} >", n.form);
        match n.rel {
            Relation::Gt => {
                if seen.contains(&key_gt) {
                    continue;
                }
                if seen.remove(&key_ge) {
                    out.retain(|o| !(o.rel == Relation::Ge && o.form == n.form));
                }
                seen.insert(key_gt);
            }
            Relation::Ge => {
                if seen.contains(&key_gt) || seen.contains(&key_ge) {
                    continue;
                }
                seen.insert(key_ge);
            }
            Relation::Eq => {
                let key = format!("{} =", n.form);
                if !seen.insert(key) {
                    continue;
                }
            }
        }
        out.push(n);
    }
    out
}

/// Projects out `v`, keeping strictness: a strict and a non-strict parent give a strict child.
pub fn eliminate(sys: &ConstraintSystem, v: &str) -> Result<ConstraintSystem, PolyError> {
    if !sys.variables.iter().any(|x| x == v) {
        return Err(PolyError::UnknownVariable(v.to_string()));
    }
    let variables: Vec<String> = sys.variables.iter().filter(|x| *x != v).cloned().collect();
    if let Some(eq) = sys
        .constraints
        .iter()
        .find(|c| c.rel == Relation::Eq && !c.form.coeff(v).is_zero())
    {
        let a = eq.form.coeff(v);
        let mut rest = eq.form.clone();
        rest.coeffs.remove(v);
        let by = rest.scaled(&(-a.recip()));
        let constraints = sys
            .constraints
            .iter()
            .filter(|c| !std::ptr::eq(*c, eq))
            .map(|c| Constraint {
                form: c.form.substitute(v, &by),
                rel: c.rel,
            })
            .collect();
        return Ok(ConstraintSystem {
            variables,
            constraints: dedupe(constraints),
        });
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut out = Vec::new();
    for c in &sys.constraints {
        let a = c.form.coeff(v);
        if a.is_zero() {
            out.push(c.clone());
        } else if a.is_positive() {
            pos.push((a, c));
        } else {
            neg.push((-a, c));
        }
    }
    for (p, cp) in &pos {
        for (n, cn) in &neg {
            let form = cp.form.scaled(n).plus(&cn.form.scaled(p));
            let rel = if cp.is_strict() || cn.is_strict() {
                Relation::Gt
            } else {
                Relation::Ge
            };
            let mut form = form;
            form.coeffs.remove(v);
            out.push(Constraint { form, rel });
        }
    }
    Ok(ConstraintSystem {
        variables,
        constraints: dedupe(out),
    })
}

fn fm_constant_feasible(sys: &ConstraintSystem) -> bool {
    sys.constraints.iter().all(trivially_true)
}

/// Feasibility decided purely by elimination.
pub fn fm_is_feasible(sys: &ConstraintSystem) -> bool {
    let mut s = sys.clone();
    for v in sys.variables.clone() {
        s = eliminate(&s, &v).expect("declared");
    }
    fm_constant_feasible(&s)
}

/// Optimum by eliminating every variable except a fresh objective variable.
pub fn fm_bound(sys: &ConstraintSystem, f: &LinForm, sense: Sense) -> Result<BoundResult, PolyError> {
    objective(sys, f)?;
    if !fm_is_feasible(sys) {
        return Ok(BoundResult::Infeasible);
    }
    let z = "__objective";
    let mut s = ConstraintSystem {
        variables: sys.variables.clone(),
        constraints: sys.constraints.iter().map(|c| c.closure()).collect(),
    };
    s.declare(z);
    s.push(Constraint::eq(LinForm::var(z).minus(f)))?;
    for v in sys.variables.clone() {
        s = eliminate(&s, &v)?;
    }
    let mut best: Option<Rational> = None;
    for c in &s.constraints {
        let a = c.form.coeff(z);
        let eq = c.rel == Relation::Eq && !a.is_zero();
        let limits_max = (eq || a.is_negative()) && sense == Sense::Max;
        let limits_min = (eq || a.is_positive()) && sense == Sense::Min;
        if !(limits_max || limits_min) {
            continue;
        }
        let lim = -&c.form.constant / &a;
        let tighter = match (&best, sense) {
            (None, _) => true,
            (Some(b), Sense::Max) => lim < *b,
            (Some(b), Sense::Min) => lim > *b,
        };
        if tighter {
            best = Some(lim);
        }
    }
    Ok(match best {
        Some(value) => BoundResult::Value {
            value,
            witness: QVector::zeros(0),
        },
        None => BoundResult::Unbounded,
    })
}

// ---------------------------------------------------------------------------
// Text forms.

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Sym(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>, PolyError> {
    let mut out = Vec::new();
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let st = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Tok::Num(cs[st..i].iter().collect()));
        } else if c.is_alphabetic() || c == '_' {
            let st = i;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_' || cs[i] == '\'') {
                i += 1;
            }
            out.push(Tok::Ident(cs[st..i].iter().collect()));
        } else if "+-*/".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(PolyError::Parse(format!("unexpected {c:?} in {s:?}")));
        }
    }
    Ok(out)
}

/// Parses sums of terms `c*x`, `c x`, `x` or `c`, where `c` is `p` or `p/q`.
pub fn parse_linform(s: &str) -> Result<LinForm, PolyError> {
    let toks = tokenize(s)?;
    let err = || PolyError::Parse(format!("bad linear expression {s:?}"));
    let mut f = LinForm::zero();
    let mut i = 0;
    if toks.is_empty() {
        return Err(err());
    }
    while i < toks.len() {
        let mut sign = Rational::one();
        while let Some(Tok::Sym(c @ ('+' | '-'))) = toks.get(i) {
            if *c == '-' {
                sign = -sign;
            }
            i += 1;
        }
        let mut coef: Option<Rational> = None;
        if let Some(Tok::Num(n)) = toks.get(i) {
            let mut text = n.clone();
            i += 1;
            if let (Some(Tok::Sym('/')), Some(Tok::Num(d))) = (toks.get(i), toks.get(i + 1)) {
                text = format!("{text}/{d}");
                i += 2;
            }
            coef = Some(parse_rational(&text).map_err(|_| err())?);
            if let Some(Tok::Sym('*')) = toks.get(i) {
                i += 1;
            }
        }
        match toks.get(i) {
            Some(Tok::Ident(v)) => {
                f.add_term(sign * coef.unwrap_or_else(Rational::one), v);
                i += 1;
            }
            _ => match coef {
                Some(c) => f.add_constant(&(sign * c)),
                None => return Err(err()),
            },
        }
        match toks.get(i) {
            None | Some(Tok::Sym('+' | '-')) => {}
            _ => return Err(err()),
        }
    }
    Ok(f)
}

/// Parses `lhs op rhs` with op among `>=`, `>`, `<=`, `<`, `=`.
pub fn parse_constraint(s: &str) -> Result<Constraint, PolyError> {
    for op in [">=", "<=", ">", "<", "="] {
        if let Some((l, r)) = s.split_once(op) {
            let l = parse_linform(l)?;
            let r = parse_linform(r)?;
            return Ok(match op {
                ">=" => Constraint::ge(l.minus(&r)),
                "<=" => Constraint::ge(r.minus(&l)),
                ">" => Constraint::gt(l.minus(&r)),
                "<" => Constraint::gt(r.minus(&l)),
                _ => Constraint::eq(l.minus(&r)),
            });
        }
    }
    Err(PolyError::Parse(format!("no relation in {s:?}")))
}
