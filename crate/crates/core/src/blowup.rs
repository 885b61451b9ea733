use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::exactlin::{fmt_rational, Rational};
use crate::surface::{DivisorClass, Membership, PointDecl, SurfaceConfig, SurfaceError};

pub const DEFAULT_BUDGET: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlowupError {
    #[error("unknown curve {0}")]
    UnknownCurve(String),
    #[error("inconsistent tangency: {0}")]
    InconsistentTangency(String),
    #[error("point {0} is not a current incidence")]
    UnknownPoint(String),
    #[error("resolution did not reach normal crossings within {0} blow-ups")]
    BudgetExceeded(usize),
    #[error("divisor has no component with positive multiplicity")]
    ZeroDivisor,
    #[error("surface declares no candidate divisor")]
    NoCandidates,
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSpec {
    pub incident: BTreeSet<String>,
    /// Contact orders of unordered pairs, keyed with the smaller name first; absent means 1.
    pub tangency: BTreeMap<(String, String), u32>,
}

impl PointSpec {
    pub fn transversal<S: AsRef<str>>(curves: &[S]) -> Self {
        PointSpec {
            incident: curves.iter().map(|c| c.as_ref().to_string()).collect(),
            tangency: BTreeMap::new(),
        }
    }

    pub fn with_contact(mut self, a: &str, b: &str, order: u32) -> Self {
        self.tangency.insert(key(a, b), order);
        self
    }

    pub fn contact(&self, a: &str, b: &str) -> u32 {
        self.tangency.get(&key(a, b)).copied().unwrap_or(1)
    }

    fn is_snc(&self) -> bool {
        self.incident.len() <= 2 && self.tangency.values().all(|&c| c <= 1)
    }

    fn validate(&self) -> Result<(), BlowupError> {
        if self.incident.is_empty() {
            return Err(BlowupError::InconsistentTangency("empty point".into()));
        }
        for ((a, b), c) in &self.tangency {
            if *c == 0 || !self.incident.contains(a) || !self.incident.contains(b) || a == b {
                return Err(BlowupError::InconsistentTangency(format!("{a}/{b}:{c} at {self}")));
            }
        }
        Ok(())
    }
}

fn key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl fmt::Display for PointSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v: Vec<&str> = self.incident.iter().map(String::as_str).collect();
        write!(f, "{{{}}}", v.join(","))
    }
}

impl From<&PointDecl> for PointSpec {
    fn from(p: &PointDecl) -> Self {
        PointSpec {
            incident: p.curves.clone(),
            tangency: p.contact.iter().filter(|(_, &c)| c != 1).map(|(k, v)| (k.clone(), *v)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurveData {
    pub m: Rational,
    pub a: Rational,
    pub exceptional: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlowupState {
    pub curves: BTreeMap<String, CurveData>,
    pub incidences: Vec<PointSpec>,
    pub history: Vec<PointSpec>,
    pub trace: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LctResult {
    pub value: Rational,
    pub witness: String,
    pub resolution_depth: usize,
}

pub fn init_state(
    cfg: &SurfaceConfig,
    divisor: &DivisorClass,
    points: &[PointSpec],
) -> Result<BlowupState, BlowupError> {
    let mut curves = BTreeMap::new();
    for (i, l) in cfg.labels.iter().enumerate() {
        curves.insert(
            l.clone(),
            CurveData {
                m: divisor.exceptional_part[i].clone(),
                a: Rational::zero(),
                exceptional: true,
            },
        );
    }
    for (name, w) in &divisor.strict_part {
        cfg.curve(name)?;
        curves.insert(
            name.clone(),
            CurveData {
                m: w.clone(),
                a: Rational::zero(),
                exceptional: false,
            },
        );
    }
    let mut incidences = Vec::new();
    for p in points {
        p.validate()?;
        for c in &p.incident {
            if !curves.contains_key(c) && cfg.curve(c).is_err() {
                return Err(BlowupError::UnknownCurve(c.clone()));
            }
        }
        // curves outside the divisor do not affect the pair
        let incident: BTreeSet<String> = p
            .incident
            .iter()
            .filter(|c| curves.get(*c).is_some_and(|d| d.m.is_positive()))
            .cloned()
            .collect();
        let tangency = p
            .tangency
            .iter()
            .filter(|((a, b), _)| incident.contains(a) && incident.contains(b))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        if incident.len() >= 2 {
            incidences.push(PointSpec { incident, tangency });
        }
    }
    Ok(BlowupState {
        curves,
        incidences,
        history: Vec::new(),
        trace: Vec::new(),
    })
}

fn next_name(state: &BlowupState) -> String {
    let mut k = state.history.len() + 1;
    loop {
        let n = format!("F_{k}");
        if !state.curves.contains_key(&n) {
            return n;
        }
        k += 1;
    }
}

pub fn blowup(state: &BlowupState, p: &PointSpec) -> Result<BlowupState, BlowupError> {
    let idx = state
        .incidences
        .iter()
        .position(|q| q == p)
        .ok_or_else(|| BlowupError::UnknownPoint(p.to_string()))?;
    let mut m = Rational::zero();
    let mut a = Rational::one();
    for c in &p.incident {
        let d = state.curves.get(c).ok_or_else(|| BlowupError::UnknownCurve(c.clone()))?;
        m += &d.m;
        if d.exceptional {
            a += &d.a;
        }
    }
    let name = next_name(state);
    let mut out = state.clone();
    out.incidences.remove(idx);
    out.trace.push(format!(
        "step {}: point {} -> {} m={} a={}",
        state.history.len() + 1,
        p,
        name,
        fmt_rational(&m),
        fmt_rational(&a)
    ));
    out.history.push(p.clone());
    out.curves.insert(
        name.clone(),
        CurveData {
            m,
            a,
            exceptional: true,
        },
    );

    // Branches with contact >= 2 stay together on the new curve; contact drops by one.
    let mut classes: Vec<BTreeSet<String>> = Vec::new();
    for ((x, y), c) in &p.tangency {
        if *c < 2 {
            continue;
        }
        let hits: Vec<usize> = (0..classes.len())
            .filter(|&i| classes[i].contains(x) || classes[i].contains(y))
            .collect();
        let mut merged: BTreeSet<String> = [x.clone(), y.clone()].into();
        for &i in hits.iter().rev() {
            merged.extend(classes.remove(i));
        }
        classes.push(merged);
    }
    for class in classes {
        let mut tangency = BTreeMap::new();
        for ((x, y), c) in &p.tangency {
            if *c > 2 && class.contains(x) && class.contains(y) {
                tangency.insert((x.clone(), y.clone()), c - 1);
            }
        }
        let mut incident = class;
        incident.insert(name.clone());
        out.incidences.push(PointSpec { incident, tangency });
    }
    Ok(out)
}

fn weight(state: &BlowupState, p: &PointSpec) -> Rational {
    p.incident
        .iter()
        .map(|c| state.curves.get(c).map(|d| d.m.clone()).unwrap_or_else(Rational::zero))
        .fold(Rational::zero(), |s, x| s + x)
}

/// The non-normal-crossing point with the largest total multiplicity, ties to the smallest name list.
pub fn worst_point(state: &BlowupState) -> Option<&PointSpec> {
    let mut best: Option<(&PointSpec, Rational)> = None;
    for p in state.incidences.iter().filter(|p| !p.is_snc()) {
        let w = weight(state, p);
        best = match best {
            None => Some((p, w)),
            Some((q, wq)) => {
                if w > wq || (w == wq && p.incident < q.incident) {
                    Some((p, w))
                } else {
                    Some((q, wq))
                }
            }
        };
    }
    best.map(|(p, _)| p)
}

pub fn resolve_to_snc(state: &BlowupState, budget: usize) -> Result<BlowupState, BlowupError> {
    let mut s = state.clone();
    let mut used = 0;
    while let Some(p) = worst_point(&s).cloned() {
        if used == budget {
            return Err(BlowupError::BudgetExceeded(budget));
        }
        s = blowup(&s, &p)?;
        used += 1;
    }
    Ok(s)
}

/// Minimum of (a+1)/m over the curves of an already resolved state.
pub fn lct_of_state(state: &BlowupState) -> Result<LctResult, BlowupError> {
    let mut best: Option<(Rational, &String)> = None;
    for (name, d) in &state.curves {
        if !d.m.is_positive() {
            continue;
        }
        let v = (&d.a + Rational::one()) / &d.m;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, name));
        }
    }
    let (value, witness) = best.ok_or(BlowupError::ZeroDivisor)?;
    Ok(LctResult {
        value,
        witness: witness.clone(),
        resolution_depth: state.history.len(),
    })
}

pub fn lct_pair(
    cfg: &SurfaceConfig,
    divisor: &DivisorClass,
    points: &[PointSpec],
) -> Result<LctResult, BlowupError> {
    Ok(lct_pair_traced(cfg, divisor, points)?.0)
}

pub fn lct_pair_traced(
    cfg: &SurfaceConfig,
    divisor: &DivisorClass,
    points: &[PointSpec],
) -> Result<(LctResult, Vec<String>), BlowupError> {
    let s0 = init_state(cfg, divisor, points)?;
    let s = resolve_to_snc(&s0, DEFAULT_BUDGET)?;
    Ok((lct_of_state(&s)?, s.trace))
}

pub fn fixture_points(cfg: &SurfaceConfig) -> Vec<PointSpec> {
    cfg.points.iter().map(PointSpec::from).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpperBound {
    pub value: Rational,
    pub candidate: Membership,
    pub witness: String,
}

/// The divisor `(1/n) sum w_i L_i` for a relation `sum w_i L_i ~ nK`.
pub fn candidate_divisor(cfg: &SurfaceConfig, m: &Membership) -> Result<DivisorClass, BlowupError> {
    let inv = Rational::one() / &m.multiple;
    let terms: Vec<(String, Rational)> = m.terms.iter().map(|(c, w)| (c.clone(), w * &inv)).collect();
    Ok(DivisorClass::new(cfg, &terms)?)
}

pub fn global_lct_upper(cfg: &SurfaceConfig) -> Result<UpperBound, BlowupError> {
    let points = fixture_points(cfg);
    let mut best: Option<UpperBound> = None;
    for m in &cfg.memberships {
        let d = candidate_divisor(cfg, m)?;
        let r = lct_pair(cfg, &d, &points)?;
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(UpperBound {
                value: r.value,
                candidate: m.clone(),
                witness: r.witness,
            });
        }
    }
    best.ok_or(BlowupError::NoCandidates)
}
