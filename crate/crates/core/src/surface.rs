use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::dynkin::{intersection_matrix, DynkinError, SingularityType};
use crate::exactlin::{
    fmt_rational, is_negative_definite, parse_rational, solve_linear, LinError, QMatrix, QVector,
    Rational,
};
use crate::polytope::{Constraint, ConstraintSystem, LinForm};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SurfaceError {
    #[error("line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("invalid surface: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown curve {0}")]
    UnknownCurve(String),
    #[error("singular Gram matrix")]
    SingularGram,
    #[error(transparent)]
    Lin(#[from] LinError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub ty: SingularityType,
    pub labels: Vec<String>,
    /// The coefficient of label i in the pullback of D is `scale[i]` times its variable.
    pub scale: Vec<Rational>,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuxCurve {
    pub name: String,
    pub antican_degree: Rational,
    pub profile: QVector,
    pub self_int_strict: Rational,
    pub assume_not_in_support: bool,
    /// Printed pullback coefficients as (exceptional index, value); unlisted labels are not checked.
    pub declared_coeffs: Vec<(usize, Rational)>,
    pub anticanonical: bool,
}

/// `sum w_i L_i` lies in `|-n K_X|`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Membership {
    pub terms: Vec<(String, Rational)>,
    pub multiple: Rational,
}

impl fmt::Display for Membership {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t: Vec<String> = self
            .terms
            .iter()
            .map(|(c, w)| {
                if w.is_one() {
                    c.clone()
                } else {
                    format!("{}*{}", fmt_rational(w), c)
                }
            })
            .collect();
        if self.multiple.is_one() {
            write!(f, "{} ~ K", t.join(" + "))
        } else {
            write!(f, "{} ~ {}K", t.join(" + "), fmt_rational(&self.multiple))
        }
    }
}

/// A special point on the resolution: the named curves pass through it, with optional contact orders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointDecl {
    pub curves: BTreeSet<String>,
    pub contact: BTreeMap<(String, String), u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurfaceConfig {
    pub name: String,
    pub degree: Rational,
    pub blocks: Vec<Block>,
    pub labels: Vec<String>,
    pub exceptional_matrix: QMatrix,
    pub curves: Vec<AuxCurve>,
    pub memberships: Vec<Membership>,
    pub meets: BTreeMap<(String, String), Rational>,
    pub points: Vec<PointDecl>,
    pub flags: BTreeSet<String>,
    pub notes: Vec<String>,
}

fn letter_var(label: &str) -> String {
    let mut cs = label.chars();
    let head = cs.next().unwrap_or('E');
    let v = match head {
        'E' => 'a',
        'F' => 'b',
        'G' => 'c',
        'H' => 'd',
        other => other.to_ascii_lowercase(),
    };
    format!("{v}{}", cs.as_str())
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl SurfaceConfig {
    pub fn n_exceptional(&self) -> usize {
        self.labels.len()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn variable(&self, i: usize) -> String {
        letter_var(&self.labels[i])
    }

    pub fn variables(&self) -> Vec<String> {
        (0..self.n_exceptional()).map(|i| self.variable(i)).collect()
    }

    pub fn scale(&self, i: usize) -> Rational {
        for b in &self.blocks {
            if i >= b.offset && i < b.offset + b.labels.len() {
                return b.scale[i - b.offset].clone();
            }
        }
        Rational::one()
    }

    /// The true coefficient of exceptional curve `i` in the pullback of D.
    pub fn coef_form(&self, i: usize) -> LinForm {
        LinForm::term(self.scale(i), &self.variable(i))
    }

    /// `D~ . E_j = -sum_i c_i M_ij`.
    pub fn dot_form(&self, j: usize) -> LinForm {
        let mut f = LinForm::zero();
        for i in 0..self.n_exceptional() {
            let m = self.exceptional_matrix.get(i, j);
            if !m.is_zero() {
                f = f.minus(&self.coef_form(i).scaled(m));
            }
        }
        f
    }

    /// `D~ . L~ = -K.L - sum_i c_i p_i`.
    pub fn curve_form(&self, c: &AuxCurve) -> LinForm {
        let mut f = LinForm::constant(c.antican_degree.clone());
        for (i, p) in c.profile.iter().enumerate() {
            if !p.is_zero() {
                f = f.minus(&self.coef_form(i).scaled(p));
            }
        }
        f
    }

    pub fn curve(&self, name: &str) -> Result<&AuxCurve, SurfaceError> {
        self.curves
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| SurfaceError::UnknownCurve(name.to_string()))
    }

    pub fn meets(&self, a: &str, b: &str) -> Rational {
        self.meets
            .get(&pair_key(a, b))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Adjacent exceptional curves, as index pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_exceptional();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if !self.exceptional_matrix.get(i, j).is_zero() {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn singularity_summary(&self) -> Vec<SingularityType> {
        let mut v: Vec<SingularityType> = self.blocks.iter().map(|b| b.ty).collect();
        v.sort_by(|a, b| b.cmp(a));
        v
    }
}

/// A Q-divisor `sum w_i L_i` on X, with the exceptional coefficients of its pullback.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivisorClass {
    pub strict_part: BTreeMap<String, Rational>,
    pub exceptional_part: QVector,
}

impl DivisorClass {
    pub fn new(cfg: &SurfaceConfig, weights: &[(String, Rational)]) -> Result<Self, SurfaceError> {
        let mut strict_part: BTreeMap<String, Rational> = BTreeMap::new();
        let mut exc = QVector::zeros(cfg.n_exceptional());
        for (name, w) in weights {
            let c = cfg.curve(name)?;
            let pull = solve_pullback(cfg, &c.profile)?;
            exc = exc.add(&pull.scale(w))?;
            *strict_part.entry(name.clone()).or_insert_with(Rational::zero) += w;
        }
        strict_part.retain(|_, w| !w.is_zero());
        Ok(DivisorClass {
            strict_part,
            exceptional_part: exc,
        })
    }

    pub fn empty(cfg: &SurfaceConfig) -> Self {
        DivisorClass {
            strict_part: BTreeMap::new(),
            exceptional_part: QVector::zeros(cfg.n_exceptional()),
        }
    }

    pub fn scaled(&self, w: &Rational) -> Self {
        DivisorClass {
            strict_part: self
                .strict_part
                .iter()
                .map(|(k, v)| (k.clone(), v * w))
                .filter(|(_, v)| !v.is_zero())
                .collect(),
            exceptional_part: self.exceptional_part.scale(w),
        }
    }
}

pub fn solve_pullback(cfg: &SurfaceConfig, profile: &QVector) -> Result<QVector, SurfaceError> {
    if profile.len() != cfg.n_exceptional() {
        return Err(SurfaceError::DimensionMismatch(format!(
            "profile of length {} for {} exceptional curves",
            profile.len(),
            cfg.n_exceptional()
        )));
    }
    let rhs = profile.scale(&-Rational::one());
    Ok(solve_linear(&cfg.exceptional_matrix, &rhs)?)
}

pub fn nonneg_constraints(cfg: &SurfaceConfig) -> ConstraintSystem {
    let mut sys = ConstraintSystem::new(&cfg.variables());
    for c in cfg.curves.iter().filter(|c| c.assume_not_in_support) {
        sys.push(Constraint::ge(cfg.curve_form(c))).expect("declared");
    }
    for j in 0..cfg.n_exceptional() {
        sys.push(Constraint::ge(cfg.dot_form(j))).expect("declared");
    }
    for v in cfg.variables() {
        sys.push(Constraint::ge(LinForm::var(&v))).expect("declared");
    }
    sys
}

pub fn pushforward_intersection(
    cfg: &SurfaceConfig,
    l1: &str,
    l2: &str,
) -> Result<Rational, SurfaceError> {
    let c1 = cfg.curve(l1)?;
    let c2 = cfg.curve(l2)?;
    let pull2 = solve_pullback(cfg, &c2.profile)?;
    let strict = if l1 == l2 {
        c1.self_int_strict.clone()
    } else {
        cfg.meets(l1, l2)
    };
    Ok(strict + c1.profile.dot(&pull2)?)
}

pub fn decompose_anticanonical(cfg: &SurfaceConfig, curves: &[&str]) -> Result<QVector, SurfaceError> {
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for a in curves {
        let mut row = Vec::new();
        for b in curves {
            row.push(pushforward_intersection(cfg, a, b)?);
        }
        rows.push(row);
        rhs.push(cfg.curve(a)?.antican_degree.clone());
    }
    let gram = QMatrix::new(rows)?;
    solve_linear(&gram, &QVector::new(rhs)).map_err(|e| match e {
        LinError::SingularMatrix => SurfaceError::SingularGram,
        other => SurfaceError::Lin(other),
    })
}

/// Intersection number of two combinations of auxiliary curves on X.
pub fn combination_product(
    cfg: &SurfaceConfig,
    a: &[(String, Rational)],
    b: &[(String, Rational)],
) -> Result<Rational, SurfaceError> {
    let mut s = Rational::zero();
    for (x, wx) in a {
        for (y, wy) in b {
            s += wx * wy * pushforward_intersection(cfg, x, y)?;
        }
    }
    Ok(s)
}

pub fn validate_config(cfg: &SurfaceConfig) -> Vec<String> {
    let mut out = Vec::new();
    match is_negative_definite(&cfg.exceptional_matrix) {
        Ok(true) => {}
        Ok(false) => out.push("exceptional intersection matrix is not negative definite".into()),
        Err(e) => out.push(format!("exceptional intersection matrix: {e}")),
    }
    if !cfg.degree.is_positive() {
        out.push(format!("degree {} is not positive", fmt_rational(&cfg.degree)));
    }
    for c in &cfg.curves {
        if c.profile.len() != cfg.n_exceptional() {
            out.push(format!("profile of {} has length {}", c.name, c.profile.len()));
            continue;
        }
        if !c.antican_degree.is_positive() {
            out.push(format!("curve {} has non-positive anticanonical degree", c.name));
        }
        if c.profile.iter().any(|p| p.is_negative() || !p.is_integer()) {
            out.push(format!("profile of {} must be nonnegative integers", c.name));
        }
        let Ok(pull) = solve_pullback(cfg, &c.profile) else {
            out.push(format!("cannot solve pullback of {}", c.name));
            continue;
        };
        for (i, want) in &c.declared_coeffs {
            if pull[*i] != *want {
                out.push(format!(
                    "pullback mismatch at {} for {}: declared {}, computed {}",
                    cfg.labels[*i],
                    c.name,
                    fmt_rational(want),
                    fmt_rational(&pull[*i])
                ));
            }
        }
    }
    for m in &cfg.memberships {
        if let Some(e) = membership_violation(cfg, m) {
            out.push(e);
        }
    }
    out
}

/// A class D with D.(-K) = n K^2 and D^2 = n^2 K^2 is numerically -nK by the Hodge index theorem.
fn membership_violation(cfg: &SurfaceConfig, m: &Membership) -> Option<String> {
    let mut deg = Rational::zero();
    for (c, w) in &m.terms {
        match cfg.curve(c) {
            Ok(curve) => deg += w * &curve.antican_degree,
            Err(e) => return Some(format!("relation {m}: {e}")),
        }
    }
    let want_deg = &m.multiple * &cfg.degree;
    if deg != want_deg {
        return Some(format!(
            "relation {m}: anticanonical degree {} but expected {}",
            fmt_rational(&deg),
            fmt_rational(&want_deg)
        ));
    }
    let sq = match combination_product(cfg, &m.terms, &m.terms) {
        Ok(s) => s,
        Err(e) => return Some(format!("relation {m}: {e}")),
    };
    let want_sq = &m.multiple * &m.multiple * &cfg.degree;
    if sq != want_sq {
        return Some(format!(
            "relation {m}: self-intersection {} but expected {}",
            fmt_rational(&sq),
            fmt_rational(&want_sq)
        ));
    }
    None
}

// ---------------------------------------------------------------------------
// Config text format.

struct Fields {
    flags: Vec<String>,
    kv: Vec<(String, String)>,
}

impl Fields {
    fn get(&self, k: &str) -> Option<&str> {
        self.kv.iter().find(|(a, _)| a == k).map(|(_, v)| v.as_str())
    }

    fn has(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

fn is_key(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_lowercase())
        && cs.all(|c| c.is_ascii_alphanumeric() || "()_-".contains(c))
}

/// Splits `key=value` fields; a value runs until the next token that starts a new field.
pub(crate) fn split_fields(body: &str, known_flags: &[&str]) -> (Vec<String>, Vec<(String, String)>) {
    let mut flags = Vec::new();
    let mut kv: Vec<(String, String)> = Vec::new();
    for tok in body.split_whitespace() {
        if let Some((k, v)) = tok.split_once('=') {
            if is_key(k) {
                kv.push((k.to_string(), v.to_string()));
                continue;
            }
        }
        if known_flags.contains(&tok) {
            flags.push(tok.to_string());
        } else if let Some(last) = kv.last_mut() {
            last.1.push(' ');
            last.1.push_str(tok);
        } else {
            flags.push(tok.to_string());
        }
    }
    (flags, kv)
}

fn expand_labels(spec: &str) -> Option<Vec<String>> {
    if let Some((a, b)) = spec.split_once("..") {
        let letter = a.chars().next()?;
        let lo: usize = a[1..].parse().ok()?;
        let hi: usize = b.trim_start_matches(letter).parse().ok()?;
        return Some((lo..=hi).map(|i| format!("{letter}{i}")).collect());
    }
    Some(spec.split(',').map(|s| s.trim().to_string()).collect())
}

struct Parser<'a> {
    line: usize,
    text: &'a str,
}

impl Parser<'_> {
    fn err(&self, needle: &str, msg: impl Into<String>) -> SurfaceError {
        let col = self.text.find(needle).map_or(1, |c| c + 1);
        SurfaceError::Parse {
            line: self.line,
            col,
            msg: msg.into(),
        }
    }

    fn rational(&self, s: &str) -> Result<Rational, SurfaceError> {
        parse_rational(s).map_err(|_| self.err(s, format!("bad rational {s:?}")))
    }

    fn require<'f>(&self, f: &'f Fields, k: &str) -> Result<&'f str, SurfaceError> {
        f.get(k).ok_or_else(|| self.err("", format!("missing {k}=")))
    }
}

fn label_map(
    p: &Parser,
    spec: &str,
    labels: &[String],
) -> Result<Vec<(usize, Rational)>, SurfaceError> {
    let mut out = Vec::new();
    for item in spec.split(',') {
        let item = item.trim();
        let (l, v) = item
            .split_once('=')
            .ok_or_else(|| p.err(item, format!("expected label=value, got {item:?}")))?;
        let i = labels
            .iter()
            .position(|x| x == l.trim())
            .ok_or_else(|| p.err(l, format!("unknown exceptional curve {l}")))?;
        out.push((i, p.rational(v)?));
    }
    Ok(out)
}

/// Parses `w*C + D ~ nK`.
fn parse_membership(p: &Parser, body: &str) -> Result<Membership, SurfaceError> {
    let (lhs, rhs) = body
        .split_once('~')
        .ok_or_else(|| p.err(body, "relation needs '~'"))?;
    let rhs = rhs.trim();
    let n = rhs
        .strip_suffix('K')
        .ok_or_else(|| p.err(rhs, "relation right-hand side must be nK"))?;
    let multiple = if n.is_empty() { Rational::one() } else { p.rational(n)? };
    let mut terms = Vec::new();
    for t in lhs.split('+') {
        let t = t.trim();
        let (w, c) = match t.split_once('*') {
            Some((w, c)) => (p.rational(w)?, c.trim()),
            None => (Rational::one(), t),
        };
        terms.push((c.to_string(), w));
    }
    Ok(Membership { terms, multiple })
}

pub fn load_surface(source: &str) -> Result<SurfaceConfig, SurfaceError> {
    let cfg = parse_surface(source)?;
    let v = validate_config(&cfg);
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(SurfaceError::Validation(v))
    }
}

/// Parses without running `validate_config`.
pub fn parse_surface(source: &str) -> Result<SurfaceConfig, SurfaceError> {
    let mut name = None;
    let mut degree = None;
    let mut blocks: Vec<Block> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut pending_curves: Vec<(usize, String)> = Vec::new();
    let mut pending_anti: Vec<(usize, String)> = Vec::new();
    let mut pending_rel: Vec<(usize, String)> = Vec::new();
    let mut pending_meets: Vec<(usize, String)> = Vec::new();
    let mut pending_points: Vec<(usize, String)> = Vec::new();
    let mut pending_overrides: Vec<(usize, String)> = Vec::new();
    let mut flags = BTreeSet::new();
    let mut notes = Vec::new();

    for (ln, raw) in source.lines().enumerate() {
        let line = ln + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if let Some(note) = raw.trim().strip_prefix("# note:") {
            notes.push(note.trim().to_string());
        }
        if text.is_empty() {
            continue;
        }
        let p = Parser { line, text: raw };
        let Some(rest) = text.strip_prefix('[') else {
            return Err(p.err(text, "expected [section]"));
        };
        let (tag, body) = rest
            .split_once(']')
            .ok_or_else(|| p.err(text, "unterminated section tag"))?;
        let body = body.trim();
        match tag {
            "surface" => {
                let (_, kv) = split_fields(body, &[]);
                let f = Fields { flags: vec![], kv };
                name = Some(p.require(&f, "name")?.to_string());
                degree = Some(p.rational(p.require(&f, "degree")?)?);
            }
            "singularity" => {
                let (_, kv) = split_fields(body, &[]);
                let f = Fields { flags: vec![], kv };
                let ty: SingularityType = p
                    .require(&f, "type")?
                    .parse()
                    .map_err(|e: DynkinError| p.err("type", e.to_string()))?;
                let ls = expand_labels(p.require(&f, "labels")?)
                    .ok_or_else(|| p.err("labels", "bad label list"))?;
                if ls.len() != ty.rank() {
                    return Err(p.err("labels", format!("{ty} needs {} labels", ty.rank())));
                }
                if let Some(dup) = ls.iter().find(|l| labels.contains(l)) {
                    return Err(p.err(dup, format!("duplicate label {dup}")));
                }
                let scale = match f.get("scale") {
                    Some(s) => {
                        let v: Result<Vec<_>, _> = s.split(',').map(|x| p.rational(x)).collect();
                        let v = v?;
                        if v.len() != ty.rank() {
                            return Err(p.err("scale", "scale length differs from rank"));
                        }
                        v
                    }
                    None => vec![Rational::one(); ty.rank()],
                };
                blocks.push(Block {
                    ty,
                    labels: ls.clone(),
                    scale,
                    offset: labels.len(),
                });
                labels.extend(ls);
            }
            "curve" => pending_curves.push((line, raw.to_string())),
            "anticanonical" => pending_anti.push((line, raw.to_string())),
            "relation" => pending_rel.push((line, raw.to_string())),
            "meets" => pending_meets.push((line, raw.to_string())),
            "point" => pending_points.push((line, raw.to_string())),
            "intersection" => pending_overrides.push((line, raw.to_string())),
            "flag" => {
                for t in body.split_whitespace() {
                    flags.insert(t.to_string());
                }
            }
            other => return Err(p.err(other, format!("unknown section [{other}]"))),
        }
    }
    let name = name.ok_or(SurfaceError::Parse {
        line: 1,
        col: 1,
        msg: "missing [surface] line".into(),
    })?;
    let degree = degree.expect("set with name");
    let mats: Vec<QMatrix> = blocks.iter().map(|b| intersection_matrix(b.ty)).collect();
    let mut exceptional_matrix = QMatrix::block_diag(&mats);
    let n = labels.len();

    let body_of = |raw: &str| -> String {
        let t = raw.split('#').next().unwrap_or("").trim();
        t.split_once(']').map(|x| x.1.trim().to_string()).unwrap_or_default()
    };

    for (line, raw) in &pending_overrides {
        let p = Parser { line: *line, text: raw };
        let mut rows: Vec<Vec<Rational>> = exceptional_matrix.rows().to_vec();
        for item in body_of(raw).split_whitespace() {
            let (pair, v) = item
                .split_once('=')
                .ok_or_else(|| p.err(item, "expected Ei,Ej=value"))?;
            let (a, b) = pair.split_once(',').ok_or_else(|| p.err(pair, "expected Ei,Ej"))?;
            let i = labels.iter().position(|x| x == a).ok_or_else(|| p.err(a, "unknown label"))?;
            let j = labels.iter().position(|x| x == b).ok_or_else(|| p.err(b, "unknown label"))?;
            let v = p.rational(v)?;
            rows[i][j] = v.clone();
            rows[j][i] = v;
        }
        exceptional_matrix = QMatrix::new(rows)?;
    }

    let mut cfg = SurfaceConfig {
        name,
        degree,
        blocks,
        labels: labels.clone(),
        exceptional_matrix,
        curves: Vec::new(),
        memberships: Vec::new(),
        meets: BTreeMap::new(),
        points: Vec::new(),
        flags,
        notes,
    };

    let curve_flags = ["not-in-support"];
    for (is_anti, (line, raw)) in pending_anti
        .iter()
        .map(|x| (true, x))
        .chain(pending_curves.iter().map(|x| (false, x)))
    {
        let p = Parser { line: *line, text: raw };
        let (fl, kv) = split_fields(&body_of(raw), &curve_flags);
        let f = Fields { flags: fl, kv };
        let cname = f.get("name").unwrap_or(if is_anti { "Z" } else { "" }).to_string();
        if cname.is_empty() {
            return Err(p.err("", "curve needs name="));
        }
        if cfg.curves.iter().any(|c| c.name == cname) {
            return Err(p.err(&cname, format!("duplicate curve {cname}")));
        }
        let mut profile = QVector::zeros(n).into_inner();
        for (i, v) in label_map(&p, p.require(&f, "profile")?, &labels)? {
            profile[i] = v;
        }
        let profile = QVector::new(profile);
        let declared_coeffs = match f.get("coeffs") {
            Some(s) => label_map(&p, s, &labels)?,
            None => Vec::new(),
        };
        let (antican_degree, self_int_strict) = if is_anti {
            let pull = solve_pullback(&cfg, &profile).map_err(|e| p.err("profile", e.to_string()))?;
            let s = &cfg.degree - profile.dot(&pull)?;
            (cfg.degree.clone(), s)
        } else {
            (
                p.rational(p.require(&f, "antican")?)?,
                p.rational(f.get("selfint").unwrap_or("-1"))?,
            )
        };
        cfg.curves.push(AuxCurve {
            name: cname.clone(),
            antican_degree,
            profile,
            self_int_strict,
            assume_not_in_support: is_anti || f.has("not-in-support"),
            declared_coeffs,
            anticanonical: is_anti,
        });
        if is_anti {
            cfg.memberships.push(Membership {
                terms: vec![(cname.clone(), Rational::one())],
                multiple: Rational::one(),
            });
        }
        if let Some(r) = f.get("relation") {
            cfg.memberships.push(parse_membership(&p, r)?);
        }
    }

    for (line, raw) in &pending_rel {
        let p = Parser { line: *line, text: raw };
        let m = parse_membership(&p, &body_of(raw))?;
        for (c, _) in &m.terms {
            if cfg.curve(c).is_err() {
                return Err(p.err(c, format!("unknown curve {c}")));
            }
        }
        cfg.memberships.push(m);
    }

    for (line, raw) in &pending_meets {
        let p = Parser { line: *line, text: raw };
        for item in body_of(raw).split_whitespace() {
            let (pair, v) = item
                .split_once('=')
                .ok_or_else(|| p.err(item, "expected A,B=value"))?;
            let (a, b) = pair.split_once(',').ok_or_else(|| p.err(pair, "expected A,B"))?;
            for c in [a, b] {
                if cfg.curve(c).is_err() {
                    return Err(p.err(c, format!("unknown curve {c}")));
                }
            }
            cfg.meets.insert(pair_key(a, b), p.rational(v)?);
        }
    }

    for (line, raw) in &pending_points {
        let p = Parser { line: *line, text: raw };
        let (_, kv) = split_fields(&body_of(raw), &[]);
        let f = Fields { flags: vec![], kv };
        let mut curves = BTreeSet::new();
        for c in p.require(&f, "curves")?.split(',') {
            let c = c.trim();
            if cfg.curve(c).is_err() && !labels.iter().any(|l| l == c) {
                return Err(p.err(c, format!("unknown curve {c}")));
            }
            curves.insert(c.to_string());
        }
        let mut contact = BTreeMap::new();
        if let Some(s) = f.get("contact") {
            for item in s.split(',') {
                let (pair, v) = item
                    .split_once(':')
                    .ok_or_else(|| p.err(item, "expected A/B:order"))?;
                let (a, b) = pair.split_once('/').ok_or_else(|| p.err(pair, "expected A/B"))?;
                let v: u32 = v.parse().map_err(|_| p.err(v, "bad contact order"))?;
                contact.insert(pair_key(a, b), v);
            }
        }
        cfg.points.push(PointDecl { curves, contact });
    }
    Ok(cfg)
}
