use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::blowup::{fixture_points, lct_pair, BlowupError};
use crate::exactlin::{fmt_rational, int, parse_rational, ratio, Rational};
use crate::polytope::{
    bound, implied, is_feasible, parse_constraint, parse_linform, verify_certificate, BoundResult,
    Constraint, ConstraintSystem, FarkasCertificate, Feasibility, LinForm, PolyError, Relation, Sense,
};
use crate::surface::{
    decompose_anticanonical, nonneg_constraints, split_fields, DivisorClass, SurfaceConfig,
    SurfaceError,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertifyError {
    #[error("{script} line {line}: {msg}")]
    Script {
        script: String,
        line: usize,
        msg: String,
    },
    #[error("chain depth {k} exceeds the declared maximum {max}")]
    DepthExceeded { k: usize, max: usize },
    #[error("unknown variable {0} in script")]
    UnknownVariable(String),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Blowup(#[from] BlowupError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

// ---------------------------------------------------------------------------
// Expressions in k.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KExpr(String);

impl KExpr {
    pub fn parse(s: &str) -> Result<Self, String> {
        let e = KExpr(s.trim().to_string());
        e.eval(1)?;
        Ok(e)
    }

    pub fn eval(&self, k: usize) -> Result<Rational, String> {
        let toks: Vec<char> = self.0.chars().filter(|c| !c.is_whitespace()).collect();
        let mut p = KParser { toks: &toks, i: 0, k: int(k as i64) };
        let v = p.sum()?;
        if p.i != toks.len() {
            return Err(format!("trailing input in {:?}", self.0));
        }
        Ok(v)
    }
}

impl fmt::Display for KExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

struct KParser<'a> {
    toks: &'a [char],
    i: usize,
    k: Rational,
}

impl KParser<'_> {
    fn peek(&self) -> Option<char> {
        self.toks.get(self.i).copied()
    }

    fn sum(&mut self) -> Result<Rational, String> {
        let mut v = self.product()?;
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.i += 1;
            let r = self.product()?;
            v = if c == '+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<Rational, String> {
        let mut v = self.atom()?;
        while let Some(c @ ('*' | '/')) = self.peek() {
            self.i += 1;
            let r = self.atom()?;
            if c == '*' {
                v *= r;
            } else {
                if r.is_zero() {
                    return Err("division by zero".into());
                }
                v /= r;
            }
        }
        Ok(v)
    }

    fn atom(&mut self) -> Result<Rational, String> {
        match self.peek() {
            Some('-') => {
                self.i += 1;
                Ok(-self.atom()?)
            }
            Some('(') => {
                self.i += 1;
                let v = self.sum()?;
                if self.peek() != Some(')') {
                    return Err("missing ')'".into());
                }
                self.i += 1;
                Ok(v)
            }
            Some('k') => {
                self.i += 1;
                Ok(self.k.clone())
            }
            Some(c) if c.is_ascii_digit() => {
                let st = self.i;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.i += 1;
                }
                let s: String = self.toks[st..self.i].iter().collect();
                parse_rational(&s).map_err(|e| e.to_string())
            }
            other => Err(format!("unexpected {other:?}")),
        }
    }
}

// ---------------------------------------------------------------------------
// Scripts.

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CaseSpec {
    /// Every exceptional curve and every adjacent pair, optionally within one label family.
    Auto { block: Option<char> },
    /// A point on the listed curves, with extra constraints that may mention `r`.
    At {
        curves: Vec<String>,
        extra: Vec<Constraint>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClaimSpec {
    pub lhs: LinForm,
    pub rel: Relation,
    pub rhs: KExpr,
}

impl ClaimSpec {
    pub fn at(&self, k: usize) -> Result<Constraint, String> {
        let f = self.lhs.minus(&LinForm::constant(self.rhs.eval(k)?));
        Ok(Constraint { form: f, rel: self.rel })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainSpec {
    pub center: (String, String),
    pub depth_max: usize,
    pub claims: Vec<ClaimSpec>,
    pub extra: Vec<Constraint>,
    pub closed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Axiom {
    pub name: String,
    pub note: String,
}

/// An explicit divisor closing the cases at `at` (or none, if only checked).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TerminalSpec {
    pub curves: Vec<String>,
    pub at: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LemmaScript {
    pub name: String,
    pub surface: String,
    pub target: Rational,
    pub override_r: Option<Rational>,
    pub not_in_support: Vec<String>,
    pub assumptions: Vec<Constraint>,
    pub disjunction_groups: Vec<Vec<Vec<Constraint>>>,
    pub cases: Vec<CaseSpec>,
    pub chains: Vec<ChainSpec>,
    pub axioms: Vec<Axiom>,
    pub terminals: Vec<TerminalSpec>,
    pub expect_locations: Option<usize>,
    pub bounds: Vec<(LinForm, Rational)>,
    /// Bounds are taken over the surface inequalities alone unless this is set.
    pub bounds_with_assumptions: bool,
}

fn parse_ineq_list(s: &str) -> Result<Vec<Constraint>, String> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| parse_constraint(x).map_err(|e| e.to_string()))
        .collect()
}

fn parse_claim(s: &str) -> Result<ClaimSpec, String> {
    for (op, rel, flip) in [
        (">=", Relation::Ge, false),
        ("<=", Relation::Ge, true),
        (">", Relation::Gt, false),
        ("<", Relation::Gt, true),
    ] {
        if let Some((l, r)) = s.split_once(op) {
            let lhs = parse_linform(l).map_err(|e| e.to_string())?;
            let rhs = KExpr::parse(r)?;
            if flip {
                // lhs < rhs(k) is -lhs > -rhs(k)
                let neg = KExpr::parse(&format!("-({})", rhs.0))?;
                return Ok(ClaimSpec { lhs: lhs.neg(), rel, rhs: neg });
            }
            return Ok(ClaimSpec { lhs, rel, rhs });
        }
    }
    Err(format!("claim needs a comparison: {s:?}"))
}

pub fn parse_lemma(name: &str, source: &str) -> Result<LemmaScript, CertifyError> {
    let mut s = LemmaScript {
        name: name.to_string(),
        surface: String::new(),
        target: Rational::one(),
        override_r: None,
        not_in_support: Vec::new(),
        assumptions: Vec::new(),
        disjunction_groups: Vec::new(),
        cases: Vec::new(),
        chains: Vec::new(),
        axioms: Vec::new(),
        terminals: Vec::new(),
        expect_locations: None,
        bounds: Vec::new(),
        bounds_with_assumptions: false,
    };
    let mut seen_header = false;
    for (ln, raw) in source.lines().enumerate() {
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let err = |msg: String| CertifyError::Script {
            script: name.to_string(),
            line: ln + 1,
            msg,
        };
        let (tag, body) = text
            .strip_prefix('[')
            .and_then(|r| r.split_once(']'))
            .ok_or_else(|| err("expected [section]".into()))?;
        let body = body.trim();
        let (flags, kv) = split_fields(body, &["auto", "not-in-support", "closed", "with-assumptions"]);
        let get = |k: &str| kv.iter().find(|(a, _)| a == k).map(|(_, v)| v.trim());
        let rat = |k: &str| -> Result<Rational, CertifyError> {
            let v = get(k).ok_or_else(|| err(format!("missing {k}=")))?;
            parse_rational(v).map_err(|e| err(e.to_string()))
        };
        match tag {
            "lemma" => {
                seen_header = true;
                s.surface = get("surface").ok_or_else(|| err("missing surface=".into()))?.to_string();
                s.target = rat("target")?;
                if !s.target.is_positive() || s.target > Rational::one() {
                    return Err(err("target must lie in (0, 1]".into()));
                }
                if get("override").is_some() {
                    s.override_r = Some(rat("override")?);
                }
            }
            "assume" => {
                if let Some(rest) = body.strip_prefix("disjunction:") {
                    let mut group = Vec::new();
                    for alt in rest.split('|') {
                        group.push(parse_ineq_list(alt).map_err(err)?);
                    }
                    s.disjunction_groups.push(group);
                } else if let Some(c) = get("curve") {
                    if !flags.iter().any(|f| f == "not-in-support") {
                        return Err(err("only not-in-support assumptions are supported".into()));
                    }
                    s.not_in_support.push(c.to_string());
                } else {
                    s.assumptions.extend(parse_ineq_list(body).map_err(err)?);
                }
            }
            "case" => {
                if flags.iter().any(|f| f == "auto") {
                    let block = get("block").and_then(|b| b.chars().next());
                    s.cases.push(CaseSpec::Auto { block });
                } else {
                    let at = get("at").ok_or_else(|| err("case needs auto or at=".into()))?;
                    let curves = at.split(',').map(|c| c.trim().to_string()).collect();
                    let extra = match get("extra") {
                        Some(e) => parse_ineq_list(e).map_err(err)?,
                        None => Vec::new(),
                    };
                    s.cases.push(CaseSpec::At { curves, extra });
                }
            }
            "chain" => {
                let c = get("center").ok_or_else(|| err("chain needs center=".into()))?;
                let (x, y) = c.split_once(',').ok_or_else(|| err("center needs two curves".into()))?;
                let depth_max: usize = get("depth")
                    .ok_or_else(|| err("chain needs depth=".into()))?
                    .parse()
                    .map_err(|_| err("bad depth".into()))?;
                if depth_max == 0 {
                    return Err(err("depth must be at least 1".into()));
                }
                let mut claims = Vec::new();
                for (k, v) in &kv {
                    if k == "claim(k)" {
                        claims.push(parse_claim(v).map_err(err)?);
                    }
                }
                let extra = match get("extra") {
                    Some(e) => parse_ineq_list(e).map_err(err)?,
                    None => Vec::new(),
                };
                s.chains.push(ChainSpec {
                    center: (x.trim().to_string(), y.trim().to_string()),
                    depth_max,
                    claims,
                    extra,
                    closed: flags.iter().any(|f| f == "closed"),
                });
            }
            "axiom" => s.axioms.push(Axiom {
                name: get("name").ok_or_else(|| err("axiom needs name=".into()))?.to_string(),
                note: get("note").unwrap_or("").to_string(),
            }),
            "terminal" => {
                let c = get("curves").ok_or_else(|| err("terminal needs curves=".into()))?;
                let at = get("at").map(|a| a.split(',').map(|x| x.trim().to_string()).collect());
                s.terminals.push(TerminalSpec {
                    curves: c.split(',').map(|x| x.trim().to_string()).collect(),
                    at,
                });
            }
            "expect" => {
                let n = get("locations").ok_or_else(|| err("expect needs locations=".into()))?;
                s.expect_locations = Some(n.parse().map_err(|_| err("bad count".into()))?);
            }
            "bounds" => {
                s.bounds_with_assumptions |= flags.iter().any(|f| f == "with-assumptions");
                for (k, v) in &kv {
                    let f = parse_linform(k).map_err(|e| err(e.to_string()))?;
                    let v = parse_rational(v.trim()).map_err(|e| err(e.to_string()))?;
                    s.bounds.push((f, v));
                }
            }
            other => return Err(err(format!("unknown section [{other}]"))),
        }
    }
    if !seen_header {
        return Err(CertifyError::Script {
            script: name.to_string(),
            line: 1,
            msg: "missing [lemma] line".into(),
        });
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Cases.

fn with_r(c: &Constraint, r: &Rational) -> Constraint {
    Constraint {
        form: c.form.substitute("r", &LinForm::constant(r.clone())),
        rel: c.rel,
    }
}

/// Intersection form of the strict transform of D with a named curve.
fn dot_with(cfg: &SurfaceConfig, curve: &str) -> Option<LinForm> {
    if let Some(i) = cfg.label_index(curve) {
        return Some(cfg.dot_form(i));
    }
    cfg.curve(curve).ok().map(|c| cfg.curve_form(c))
}

/// Coefficient of a curve in the pulled-back pair; curves outside the support have none.
fn coef_of(cfg: &SurfaceConfig, curve: &str) -> LinForm {
    match cfg.label_index(curve) {
        Some(i) => cfg.coef_form(i),
        None => LinForm::zero(),
    }
}

/// Adjunction along each curve through a point of the minimal resolution: `D~.S + sum coef > r`.
pub fn adjunction_at(cfg: &SurfaceConfig, curves: &[String], r: &Rational) -> Vec<Constraint> {
    let mut out = Vec::new();
    for s in curves {
        let Some(mut f) = dot_with(cfg, s) else { continue };
        for g in curves.iter().filter(|g| *g != s) {
            f = f.plus(&coef_of(cfg, g));
        }
        f.add_constant(&-r.clone());
        out.push(Constraint::gt(f));
    }
    out
}

pub fn location_name(curves: &[String]) -> String {
    curves.join("∩")
}

pub fn adjunction_cases(cfg: &SurfaceConfig, t: &Rational) -> Vec<(String, Vec<Constraint>)> {
    auto_locations(cfg, None)
        .into_iter()
        .map(|loc| {
            let cs = adjunction_at(cfg, &loc, &(Rational::one() / t));
            (location_name(&loc), cs)
        })
        .collect()
}

fn auto_locations(cfg: &SurfaceConfig, block: Option<char>) -> Vec<Vec<String>> {
    let keep = |i: usize| block.is_none_or(|b| cfg.labels[i].starts_with(b));
    let mut out: Vec<Vec<String>> = (0..cfg.n_exceptional())
        .filter(|&i| keep(i))
        .map(|i| vec![cfg.labels[i].clone()])
        .collect();
    for (i, j) in cfg.edges() {
        if keep(i) && keep(j) {
            out.push(vec![cfg.labels[i].clone(), cfg.labels[j].clone()]);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Infeasible { cert: FarkasCertificate, verified: bool },
    Gap { witness: BTreeMap<String, Rational> },
    /// A divisor of lct at least the target lets one of its curves leave the support;
    /// one sub-case per curve.
    Split { parts: Vec<(String, Outcome)> },
}

impl Outcome {
    pub fn discharged(&self) -> bool {
        match self {
            Outcome::Infeasible { verified, .. } => *verified,
            Outcome::Gap { .. } => false,
            Outcome::Split { parts } => parts.iter().all(|(_, o)| o.discharged()),
        }
    }

    /// Every leaf is a verified Farkas certificate.
    pub fn farkas_only(&self) -> bool {
        match self {
            Outcome::Infeasible { verified, .. } => *verified,
            Outcome::Gap { .. } => false,
            Outcome::Split { parts } => parts.iter().all(|(_, o)| o.farkas_only()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseResult {
    pub location: String,
    pub r: Rational,
    pub disjunct: usize,
    pub outcome: Outcome,
}

impl CaseResult {
    pub fn ok(&self) -> bool {
        self.outcome.discharged()
    }
}

fn run_system(sys: &ConstraintSystem) -> Outcome {
    match is_feasible(sys) {
        Feasibility::Feasible(x) => Outcome::Gap { witness: sys.point(&x) },
        Feasibility::Infeasible(cert) => {
            let verified = verify_certificate(sys, &cert).unwrap_or(false);
            Outcome::Infeasible { cert, verified }
        }
    }
}

/// Every disjunct of `base ∪ disjunct ∪ case` must be infeasible.
pub fn check_case(
    base: &ConstraintSystem,
    case: &[Constraint],
    disjuncts: &[Vec<Constraint>],
) -> Vec<Outcome> {
    let trivial = [Vec::new()];
    let ds: &[Vec<Constraint>] = if disjuncts.is_empty() { &trivial } else { disjuncts };
    ds.iter()
        .map(|d| run_system(&base.with(d).with(case)))
        .collect()
}

// ---------------------------------------------------------------------------
// Chains.

fn m_var(j: usize) -> String {
    format!("m{j}")
}

fn msum(k: usize) -> LinForm {
    let mut f = LinForm::zero();
    for j in 1..=k {
        f.add_term(Rational::one(), &m_var(j));
    }
    f
}

struct ChainForms {
    cx: LinForm,
    cy: LinForm,
    dx: LinForm,
    dy: LinForm,
}

fn chain_forms(cfg: &SurfaceConfig, spec: &ChainSpec) -> Result<ChainForms, CertifyError> {
    let (x, y) = &spec.center;
    let unknown = |c: &str| CertifyError::Surface(SurfaceError::UnknownCurve(c.to_string()));
    let ix = cfg.label_index(x).ok_or_else(|| unknown(x))?;
    let iy = cfg.label_index(y).ok_or_else(|| unknown(y))?;
    Ok(ChainForms {
        cx: cfg.coef_form(ix),
        cy: cfg.coef_form(iy),
        dx: cfg.dot_form(ix),
        dy: cfg.dot_form(iy),
    })
}

/// Coefficient of F_k in the pullback of D after k blow-ups along the center.
fn big_m(f: &ChainForms, k: usize) -> LinForm {
    f.cx.plus(&f.cy.scaled(&int(k as i64))).plus(&msum(k))
}

pub fn extend_chain(
    cfg: &SurfaceConfig,
    base: &ConstraintSystem,
    spec: &ChainSpec,
    k: usize,
) -> Result<ConstraintSystem, CertifyError> {
    if k > spec.depth_max {
        return Err(CertifyError::DepthExceeded { k, max: spec.depth_max });
    }
    if k == 0 {
        return Ok(base.clone());
    }
    let f = chain_forms(cfg, spec)?;
    let mut cs = vec![
        Constraint::ge(f.dx.minus(&LinForm::var(&m_var(1)))),
        Constraint::ge(f.dy.minus(&msum(k))),
    ];
    for j in 1..k {
        cs.push(Constraint::ge(LinForm::var(&m_var(j)).minus(&LinForm::var(&m_var(j + 1)))));
    }
    cs.push(Constraint::ge(LinForm::var(&m_var(k))));
    cs.extend(spec.extra.iter().cloned());
    Ok(base.with(&cs))
}

/// The three kinds of point on F_k: next to the previous curve, general, and on the center's second curve.
fn step_cases(f: &ChainForms, k: usize, r: &Rational) -> [(String, Vec<Constraint>); 3] {
    let mk = LinForm::var(&m_var(k));
    let prev_m = if k == 1 { f.cx.clone() } else { big_m(f, k - 1) };
    let prev_dot = if k == 1 {
        f.dx.minus(&LinForm::var(&m_var(1)))
    } else {
        LinForm::var(&m_var(k - 1)).minus(&mk)
    };
    let kr = r * int(k as i64);
    let k1r = r * int(k as i64 + 1);
    let gt = |form: LinForm, c: &Rational| Constraint::gt(form.minus(&LinForm::constant(c.clone())));
    let prev = if k == 1 { "E~".to_string() } else { format!("F{}", k - 1) };
    [
        (
            format!("F{k}∩{prev}"),
            vec![gt(mk.plus(&prev_m), &kr), gt(prev_dot.plus(&big_m(f, k)), &k1r)],
        ),
        (format!("F{k}"), vec![gt(mk.clone(), r)]),
        (
            format!("F{k}∩Y~"),
            vec![gt(mk.plus(&f.cy), r), gt(f.dy.minus(&msum(k)).plus(&big_m(f, k)), &k1r)],
        ),
    ]
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainStep {
    pub k: usize,
    pub disjunct: usize,
    pub side_ok: bool,
    pub cases: Vec<CaseResult>,
    pub claims_ok: bool,
    pub survivor_feasible: bool,
    pub max_mk: Option<Rational>,
}

impl ChainStep {
    pub fn ok(&self) -> bool {
        self.side_ok && self.claims_ok && self.cases.iter().all(CaseResult::ok)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainReport {
    pub center: (String, String),
    pub steps: Vec<ChainStep>,
    pub monotone: bool,
    pub closed_ok: bool,
}

impl ChainReport {
    pub fn ok(&self) -> bool {
        self.monotone && self.closed_ok && self.steps.iter().all(ChainStep::ok)
    }
}

fn chain_survivors(cfg: &SurfaceConfig, spec: &ChainSpec, r: &Rational) -> Result<Vec<Constraint>, CertifyError> {
    let (x, y) = &spec.center;
    Ok(adjunction_at(cfg, &[x.clone(), y.clone()], r))
}

pub fn check_inductive_chain(
    cfg: &SurfaceConfig,
    base: &ConstraintSystem,
    disjuncts: &[Vec<Constraint>],
    spec: &ChainSpec,
    t: &Rational,
    r: &Rational,
    depth: usize,
) -> Result<ChainReport, CertifyError> {
    if depth > spec.depth_max {
        return Err(CertifyError::DepthExceeded { k: depth, max: spec.depth_max });
    }
    let f = chain_forms(cfg, spec)?;
    let trivial = [Vec::new()];
    let ds: &[Vec<Constraint>] = if disjuncts.is_empty() { &trivial } else { disjuncts };
    let mut steps = Vec::new();
    let mut monotone = true;
    let mut closed_ok = !spec.closed;
    for (di, d) in ds.iter().enumerate() {
        let extra: Vec<Constraint> = spec.extra.iter().map(|c| with_r(c, r)).collect();
        let spec_r = ChainSpec { extra, ..spec.clone() };
        let mut survivors = chain_survivors(cfg, spec, r)?;
        survivors.extend(d.iter().cloned());
        let mut last_max: Option<Rational> = None;
        let mut closed_at = None;
        for k in 1..=depth {
            let sk = extend_chain(cfg, base, &spec_r, k)?.with(&survivors);
            let side = Constraint::ge(
                LinForm::constant(int(k as i64 + 1)).minus(&big_m(&f, k).scaled(t)),
            );
            let side_ok = implied(&sk, &side);
            let cases = step_cases(&f, k, r);
            let mut results = Vec::new();
            for (loc, cs) in cases.iter().take(2) {
                results.push(CaseResult {
                    location: loc.clone(),
                    r: r.clone(),
                    disjunct: di,
                    outcome: run_system(&sk.with(cs)),
                });
            }
            let survivor_feasible = is_feasible(&sk.with(&cases[2].1)).is_feasible();
            let mut claims_ok = true;
            for c in &spec.claims {
                let c = c.at(k).map_err(|e| CertifyError::Script {
                    script: String::new(),
                    line: 0,
                    msg: e,
                })?;
                claims_ok &= implied(&sk, &c);
            }
            let max_mk = match bound(&sk, &LinForm::var(&m_var(k)), Sense::Max)? {
                BoundResult::Value { value, .. } => Some(value),
                _ => None,
            };
            if let (Some(prev), Some(cur)) = (&last_max, &max_mk) {
                monotone &= cur <= prev;
            }
            if max_mk.is_some() {
                last_max = max_mk.clone();
            }
            steps.push(ChainStep {
                k,
                disjunct: di,
                side_ok,
                cases: results,
                claims_ok,
                survivor_feasible,
                max_mk,
            });
            if !survivor_feasible {
                closed_at = Some(k);
                break;
            }
            survivors.extend(cases[2].1.iter().cloned());
        }
        if spec.closed {
            closed_ok = closed_at.is_some();
        }
    }
    Ok(ChainReport {
        center: spec.center.clone(),
        steps,
        monotone,
        closed_ok,
    })
}

// ---------------------------------------------------------------------------
// Replay.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SideCheck {
    pub description: String,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundCheck {
    pub form: LinForm,
    pub expected: Rational,
    pub computed: Option<Rational>,
}

impl BoundCheck {
    pub fn ok(&self) -> bool {
        self.computed.as_ref() == Some(&self.expected)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TerminalCheck {
    pub curves: Vec<String>,
    pub weights: Vec<Rational>,
    pub lct: Option<Rational>,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationReport {
    pub script: String,
    pub target: Rational,
    pub locations: usize,
    pub cases: Vec<CaseResult>,
    pub chains: Vec<ChainReport>,
    pub side_checks: Vec<SideCheck>,
    pub bounds: Vec<BoundCheck>,
    pub terminals: Vec<TerminalCheck>,
    pub axioms: Vec<Axiom>,
}

impl VerificationReport {
    /// The lower bound is certified. Printed bounds are regression data and do not affect this.
    pub fn pass(&self) -> bool {
        self.cases.iter().all(CaseResult::ok)
            && self.chains.iter().all(ChainReport::ok)
            && self.side_checks.iter().all(|s| s.ok)
            && self.terminals.iter().all(|t| t.ok)
    }

    pub fn bounds_match(&self) -> bool {
        self.bounds.iter().all(BoundCheck::ok)
    }

    pub fn gaps(&self) -> Vec<&CaseResult> {
        let mut out: Vec<&CaseResult> = self.cases.iter().filter(|c| !c.ok()).collect();
        for ch in &self.chains {
            for s in &ch.steps {
                out.extend(s.cases.iter().filter(|c| !c.ok()));
            }
        }
        out
    }

    pub fn summary(&self) -> String {
        let status = match (self.pass(), self.axioms.is_empty()) {
            (false, _) => "FAIL".to_string(),
            (true, true) => "PASS".to_string(),
            (true, false) => {
                let names: Vec<&str> = self.axioms.iter().map(|a| a.name.as_str()).collect();
                format!("PASS (axioms: {})", names.join(", "))
            }
        };
        let bad = self.bounds.iter().filter(|b| !b.ok()).count();
        let bounds = if bad == 0 { String::new() } else { format!(" ({bad} printed bounds differ)") };
        format!(
            "{} t={} cases={} chains={} {}{}",
            self.script,
            fmt_rational(&self.target),
            self.cases.len(),
            self.chains.len(),
            status,
            bounds
        )
    }
}

/// Base system of a script: the surface inequalities plus its assumptions.
pub fn base_system(cfg: &SurfaceConfig, script: &LemmaScript) -> Result<ConstraintSystem, CertifyError> {
    let mut sys = nonneg_constraints(cfg);
    for name in &script.not_in_support {
        let c = cfg.curve(name)?;
        if !c.assume_not_in_support {
            sys.push(Constraint::ge(cfg.curve_form(c)))?;
        }
    }
    for c in &script.assumptions {
        sys.push(c.clone()).map_err(|_| unknown_var(c))?;
    }
    Ok(sys)
}

fn unknown_var(c: &Constraint) -> CertifyError {
    CertifyError::UnknownVariable(c.form.variables().cloned().collect::<Vec<_>>().join(","))
}

/// Cartesian product of the disjunction groups.
pub fn disjuncts(script: &LemmaScript) -> Vec<Vec<Constraint>> {
    let mut out: Vec<Vec<Constraint>> = vec![Vec::new()];
    for group in &script.disjunction_groups {
        let mut next = Vec::new();
        for prefix in &out {
            for alt in group {
                let mut v = prefix.clone();
                v.extend(alt.iter().cloned());
                next.push(v);
            }
        }
        out = next;
    }
    if script.disjunction_groups.is_empty() {
        Vec::new()
    } else {
        out
    }
}

fn check_vars(cfg: &SurfaceConfig, cs: &[Constraint], extra_ok: &BTreeSet<String>) -> Result<(), CertifyError> {
    let vars: BTreeSet<String> = cfg.variables().into_iter().collect();
    for c in cs {
        if let Some(v) = c.form.variables().find(|v| !vars.contains(*v) && !extra_ok.contains(*v)) {
            return Err(CertifyError::UnknownVariable(v.clone()));
        }
    }
    Ok(())
}

pub fn replay_lemma(
    cfg: &SurfaceConfig,
    script: &LemmaScript,
    chain_depth: Option<usize>,
) -> Result<VerificationReport, CertifyError> {
    let base = base_system(cfg, script)?;
    let ds = disjuncts(script);
    let r_target = Rational::one() / &script.target;
    let mut rs = vec![r_target.clone()];
    if let Some(o) = &script.override_r {
        if *o != r_target {
            rs.insert(0, o.clone());
        }
    }
    let r_chain = rs[0].clone();

    let r_ok: BTreeSet<String> = ["r".to_string()].into();
    for d in &ds {
        check_vars(cfg, d, &BTreeSet::new())?;
    }
    for case in &script.cases {
        if let CaseSpec::At { extra, .. } = case {
            check_vars(cfg, extra, &r_ok)?;
        }
    }

    let centers: BTreeSet<(String, String)> = script
        .chains
        .iter()
        .flat_map(|c| {
            let (x, y) = c.center.clone();
            [(x.clone(), y.clone()), (y, x)]
        })
        .collect();

    let mut locations: Vec<(Vec<String>, Vec<Constraint>)> = Vec::new();
    let mut n_auto = 0;
    for case in &script.cases {
        match case {
            CaseSpec::Auto { block } => {
                for loc in auto_locations(cfg, *block) {
                    n_auto += 1;
                    if loc.len() == 2 && centers.contains(&(loc[0].clone(), loc[1].clone())) {
                        continue;
                    }
                    locations.push((loc, Vec::new()));
                }
            }
            CaseSpec::At { curves, extra } => {
                for c in curves {
                    if cfg.label_index(c).is_none() {
                        cfg.curve(c)?;
                    }
                }
                locations.push((curves.clone(), extra.clone()));
            }
        }
    }

    let mut terminals = Vec::new();
    for spec in &script.terminals {
        let curves = &spec.curves;
        let names: Vec<&str> = curves.iter().map(String::as_str).collect();
        let w = decompose_anticanonical(cfg, &names)?;
        let terms: Vec<(String, Rational)> = curves.iter().cloned().zip(w.iter().cloned()).collect();
        let d = DivisorClass::new(cfg, &terms)?;
        let lct = lct_pair(cfg, &d, &fixture_points(cfg)).ok().map(|r| r.value);
        let ok = w.iter().all(|x| !x.is_negative()) && lct.as_ref().is_some_and(|v| *v >= script.target);
        terminals.push(TerminalCheck {
            curves: curves.clone(),
            weights: w.into_inner(),
            lct,
            ok,
        });
    }

    let closed_at: BTreeMap<String, Vec<String>> = script
        .terminals
        .iter()
        .zip(&terminals)
        .filter(|(_, t)| t.ok)
        .filter_map(|(spec, t)| spec.at.as_ref().map(|a| (location_name(a), t.curves.clone())))
        .collect();

    let mut cases = Vec::new();
    let mut side_checks = Vec::new();
    let monotone_steps = [ratio(1, 100), ratio(1, 2), int(1)];
    for (loc, extra) in &locations {
        let mut probe_rs = rs.clone();
        probe_rs.extend(monotone_steps.iter().map(|d| &r_target + d));
        for (ri, r) in probe_rs.iter().enumerate() {
            let mut cs = adjunction_at(cfg, loc, r);
            cs.extend(extra.iter().map(|c| with_r(c, r)));
            let outs = check_case(&base, &cs, &ds);
            for (di, mut outcome) in outs.into_iter().enumerate() {
                if let (Outcome::Gap { .. }, Some(curves)) = (&outcome, closed_at.get(&location_name(loc))) {
                    let mut parts = Vec::new();
                    for c in curves {
                        let mut sub = cs.clone();
                        sub.extend(ds.get(di).into_iter().flatten().cloned());
                        sub.push(Constraint::ge(cfg.curve_form(cfg.curve(c)?)));
                        parts.push((c.clone(), run_system(&base.with(&sub))));
                    }
                    outcome = Outcome::Split { parts };
                }
                let res = CaseResult {
                    location: location_name(loc),
                    r: r.clone(),
                    disjunct: di,
                    outcome,
                };
                if ri < rs.len() {
                    cases.push(res);
                } else if !res.ok() {
                    side_checks.push(SideCheck {
                        description: format!(
                            "monotonicity at {} r={}",
                            res.location,
                            fmt_rational(r)
                        ),
                        ok: false,
                    });
                }
            }
        }
    }

    // adjunction needs every exceptional coefficient of the pair to be at most 1
    let covered: BTreeSet<usize> = locations
        .iter()
        .flat_map(|(loc, _)| loc.iter())
        .chain(centers.iter().flat_map(|(x, y)| [x, y]))
        .filter_map(|l| cfg.label_index(l))
        .collect();
    let trivial = [Vec::new()];
    let dsr: &[Vec<Constraint>] = if ds.is_empty() { &trivial } else { &ds };
    for (di, d) in dsr.iter().enumerate() {
        let sys = base.with(d);
        let ok = covered.iter().all(|&i| {
            let c = Constraint::ge(
                LinForm::constant(Rational::one()).minus(&cfg.coef_form(i).scaled(&script.target)),
            );
            implied(&sys, &c)
        });
        side_checks.push(SideCheck {
            description: format!("t*c_E <= 1 on every case curve (disjunct {di})"),
            ok,
        });
    }

    if let Some(n) = script.expect_locations {
        side_checks.push(SideCheck {
            description: format!("auto locations {n_auto}, expected {n}"),
            ok: n == n_auto,
        });
    }

    let mut chains = Vec::new();
    for spec in &script.chains {
        let m_ok: BTreeSet<String> = (1..=spec.depth_max).map(m_var).chain(["r".to_string()]).collect();
        check_vars(cfg, &spec.extra, &m_ok)?;
        let depth = chain_depth.unwrap_or(spec.depth_max).min(spec.depth_max);
        chains.push(check_inductive_chain(cfg, &base, &ds, spec, &script.target, &r_chain, depth)?);
    }

    let mut bounds = Vec::new();
    let bound_base = if script.bounds_with_assumptions { base.clone() } else { nonneg_constraints(cfg) };
    for (form, expected) in &script.bounds {
        check_vars(cfg, &[Constraint::ge(form.clone())], &BTreeSet::new())?;
        let computed = match bound(&bound_base, form, Sense::Max)? {
            BoundResult::Value { value, .. } => Some(value),
            _ => None,
        };
        bounds.push(BoundCheck {
            form: form.clone(),
            expected: expected.clone(),
            computed,
        });
    }

    Ok(VerificationReport {
        script: script.name.clone(),
        target: script.target.clone(),
        locations: locations.len(),
        cases,
        chains,
        side_checks,
        bounds,
        terminals,
        axioms: script.axioms.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactlin::ratio;
    use crate::surface::load_surface;

    const A3: &str = "\
[surface] name=A3.deg1 degree=1
[singularity] type=A3 labels=E1..E3
[anticanonical] name=Z profile=E1=1,E3=1
";

    fn a3() -> SurfaceConfig {
        load_surface(A3).unwrap()
    }

    #[test]
    fn kexpr() {
        let e = KExpr::parse("2*k/(2*k+1)").unwrap();
        assert_eq!(e.eval(3).unwrap(), ratio(6, 7));
        assert_eq!(KExpr::parse("6/5*(3*k)/(3*k+1)").unwrap().eval(1).unwrap(), ratio(9, 10));
        assert!(KExpr::parse("k/(k-2)").unwrap().eval(2).is_err());
        assert!(KExpr::parse("k +").is_err());
    }

    #[test]
    fn a3_case_forms() {
        let cfg = a3();
        let cases = adjunction_cases(&cfg, &int(1));
        assert_eq!(cases.len(), 5);
        assert_eq!(cases[0].1, vec![parse_constraint("2a1 - a2 > 1").unwrap()]);
        assert_eq!(cases[3].0, "E1∩E2");
        assert_eq!(
            cases[3].1,
            vec![
                parse_constraint("2a1 - a2 + a2 > 1").unwrap(),
                parse_constraint("2a2 - a1 - a3 + a1 > 1").unwrap()
            ]
        );
    }

    #[test]
    fn a3_interior_case_infeasible() {
        let cfg = a3();
        let base = nonneg_constraints(&cfg);
        let case = parse_constraint("2a1 - a2 > 1").unwrap();
        let outs = check_case(&base, &[case], &[]);
        assert!(outs[0].discharged());
    }

    #[test]
    fn weakened_base_gives_gap() {
        let cfg = a3();
        let full = nonneg_constraints(&cfg);
        let weak = ConstraintSystem::restore(
            &full.constraints()[1..].iter().map(|c| c.to_string()).collect::<Vec<_>>().join("\n"),
        )
        .unwrap();
        let case = adjunction_at(&cfg, &["E2".into()], &int(1));
        assert!(matches!(check_case(&weak, &case, &[])[0], Outcome::Gap { .. }));
        assert!(check_case(&full, &case, &[])[0].discharged());
    }

    #[test]
    fn chain_k1_bound() {
        let cfg = a3();
        let base = nonneg_constraints(&cfg);
        let spec = ChainSpec {
            center: ("E1".into(), "E2".into()),
            depth_max: 12,
            claims: vec![],
            extra: vec![],
            closed: false,
        };
        let s1 = extend_chain(&cfg, &base, &spec, 1).unwrap();
        assert_eq!(s1.len(), base.len() + 3);
        assert_eq!(bound(&s1, &LinForm::var("m1"), Sense::Max).unwrap().value(), Some(&ratio(1, 2)));
        let s2 = extend_chain(&cfg, &base, &spec, 2).unwrap();
        assert!(s2.constraints().contains(&parse_constraint("m1 - m2 >= 0").unwrap()));
        assert_eq!(extend_chain(&cfg, &base, &spec, 0).unwrap(), base);
        assert!(matches!(
            extend_chain(&cfg, &base, &spec, 13),
            Err(CertifyError::DepthExceeded { .. })
        ));
    }

    #[test]
    fn script_parse() {
        let src = "\
[lemma] surface=A3.deg1 target=1
[assume] disjunction: a3 <= 1 | a1 <= 1
[case] auto
[case] at=E2 extra=a2 >= r
[chain] center=E1,E2 depth=4 claim(k)=a2 > 2*k/(2*k+1) extra=m1 + a2 <= 2 closed
[axiom] name=connectedness note=LCS is connected
[bounds] a1=3/4 a2=1
";
        let s = parse_lemma("A3", src).unwrap();
        assert_eq!(s.disjunction_groups[0].len(), 2);
        assert_eq!(s.cases.len(), 2);
        assert!(s.chains[0].closed);
        assert_eq!(s.chains[0].extra.len(), 1);
        assert_eq!(s.chains[0].claims[0].at(1).unwrap(), parse_constraint("a2 > 2/3").unwrap());
        assert_eq!(s.axioms[0].note, "LCS is connected");
        assert_eq!(s.bounds.len(), 2);
        assert!(parse_lemma("x", "[case] auto\n").is_err());
        assert!(parse_lemma("x", "[lemma] surface=A target=3/2\n").is_err());
    }
}
