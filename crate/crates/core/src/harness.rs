use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use num_traits::{One, Signed};
use thiserror::Error;

use crate::blowup::{global_lct_upper, BlowupError, UpperBound};
use crate::certify::{parse_lemma, replay_lemma, CertifyError, LemmaScript, VerificationReport};
use crate::dynkin::SingularityType;
use crate::exactlin::{fmt_rational, parse_rational, ratio, Rational};
use crate::surface::{load_surface, SurfaceConfig, SurfaceError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{file} line {line}: {msg}")]
    Table { file: String, line: usize, msg: String },
    #[error("surface {name}: {source}")]
    Surface { name: String, source: SurfaceError },
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error(transparent)]
    Blowup(#[from] BlowupError),
}

pub fn default_fixtures_dir() -> PathBuf {
    match std::env::var_os("LCTDV_FIXTURES") {
        Some(p) => PathBuf::from(p),
        None => PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures")),
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_named_surface(dir: &Path, name: &str) -> Result<SurfaceConfig, HarnessError> {
    let text = read(&dir.join(format!("{name}.surface")))?;
    load_surface(&text).map_err(|source| HarnessError::Surface {
        name: name.to_string(),
        source,
    })
}

pub fn load_named_lemma(dir: &Path, name: &str) -> Result<LemmaScript, HarnessError> {
    let text = read(&dir.join(format!("{name}.lemma")))?;
    Ok(parse_lemma(name, &text)?)
}

fn stems(dir: &Path, ext: &str) -> Result<Vec<String>, HarnessError> {
    let rd = fs::read_dir(dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut out: Vec<String> = rd
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let n = e.file_name().to_string_lossy().to_string();
            n.strip_suffix(&format!(".{ext}")).map(str::to_string)
        })
        .collect();
    out.sort();
    Ok(out)
}

pub fn surface_names(dir: &Path) -> Result<Vec<String>, HarnessError> {
    stems(dir, "surface")
}

pub fn lemma_names(dir: &Path) -> Result<Vec<String>, HarnessError> {
    stems(dir, "lemma")
}

/// Replays a named script against its surface.
pub fn replay_named(dir: &Path, name: &str, depth: Option<usize>) -> Result<VerificationReport, HarnessError> {
    let script = load_named_lemma(dir, name)?;
    let cfg = load_named_surface(dir, &script.surface)?;
    Ok(replay_lemma(&cfg, &script, depth)?)
}

// ---------------------------------------------------------------------------
// Tables.

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SingularityKey(pub Vec<SingularityType>);

impl SingularityKey {
    pub fn parse(s: &str) -> Result<Self, String> {
        let mut v = Vec::new();
        if s.trim() != "smooth" {
            for part in s.split('+') {
                let part = part.trim();
                let digits = part.chars().take_while(|c| c.is_ascii_digit()).count();
                let n: usize = if digits == 0 { 1 } else { part[..digits].parse().map_err(|_| part.to_string())? };
                let ty: SingularityType = part[digits..].parse().map_err(|e| format!("{e}"))?;
                v.extend(std::iter::repeat_n(ty, n));
            }
        }
        v.sort_by(|a, b| b.cmp(a));
        Ok(SingularityKey(v))
    }
}

impl fmt::Display for SingularityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("smooth");
        }
        let mut parts: Vec<String> = Vec::new();
        let mut i = 0;
        while i < self.0.len() {
            let mut j = i;
            while j < self.0.len() && self.0[j] == self.0[i] {
                j += 1;
            }
            let n = j - i;
            parts.push(if n == 1 { self.0[i].to_string() } else { format!("{n}{}", self.0[i]) });
            i = j;
        }
        f.write_str(&parts.join("+"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableEntry {
    pub degree: u32,
    pub singularities: SingularityKey,
    pub condition: Option<String>,
    pub expected_lct: Rational,
    pub source: String,
}

impl TableEntry {
    pub fn label(&self) -> String {
        match &self.condition {
            Some(c) => format!("deg{} {} [{}]", self.degree, self.singularities, c),
            None => format!("deg{} {}", self.degree, self.singularities),
        }
    }

    fn key(&self) -> (u32, SingularityKey, Option<String>) {
        (self.degree, self.singularities.clone(), self.condition.clone())
    }
}

fn tsv_rows(file: &str, text: &str) -> Vec<(usize, Vec<String>)> {
    let _ = file;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.split('\t').map(|c| c.trim().to_string()).collect()))
        .collect()
}

fn cond(s: &str) -> Option<String> {
    if s == "-" || s.is_empty() {
        None
    } else {
        Some(s.to_string())
    }
}

/// `degree<TAB>singularities<TAB>condition<TAB>lct[<TAB>source]`.
pub fn parse_tables(file: &str, text: &str) -> Result<Vec<TableEntry>, HarnessError> {
    let mut out = Vec::new();
    for (line, cols) in tsv_rows(file, text) {
        let err = |msg: String| HarnessError::Table { file: file.to_string(), line, msg };
        if cols.len() < 4 {
            return Err(err(format!("expected 4 columns, got {}", cols.len())));
        }
        let degree: u32 = cols[0].parse().map_err(|_| err(format!("bad degree {:?}", cols[0])))?;
        let singularities = SingularityKey::parse(&cols[1]).map_err(err)?;
        let expected_lct = parse_rational(&cols[3]).map_err(|e| err(e.to_string()))?;
        if !expected_lct.is_positive() || expected_lct > Rational::one() {
            return Err(err("expected lct outside (0, 1]".into()));
        }
        out.push(TableEntry {
            degree,
            singularities,
            condition: cond(&cols[2]),
            expected_lct,
            source: cols.get(4).cloned().unwrap_or_default(),
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum LedgerStatus {
    KnownIssue,
    Skipped,
    ReferenceOnly,
}

impl fmt::Display for LedgerStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LedgerStatus::KnownIssue => "KNOWN-ISSUE",
            LedgerStatus::Skipped => "SKIPPED",
            LedgerStatus::ReferenceOnly => "REFERENCE-ONLY",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerEntry {
    pub status: LedgerStatus,
    pub degree: u32,
    pub singularities: SingularityKey,
    pub condition: Option<String>,
    pub note: String,
}

/// `STATUS<TAB>degree<TAB>singularities<TAB>condition<TAB>note`.
pub fn parse_ledger(file: &str, text: &str) -> Result<Vec<LedgerEntry>, HarnessError> {
    let mut out = Vec::new();
    for (line, cols) in tsv_rows(file, text) {
        let err = |msg: String| HarnessError::Table { file: file.to_string(), line, msg };
        if cols.len() < 4 {
            return Err(err("expected at least 4 columns".into()));
        }
        let status = match cols[0].as_str() {
            "KNOWN-ISSUE" => LedgerStatus::KnownIssue,
            "SKIPPED" => LedgerStatus::Skipped,
            "REFERENCE-ONLY" => LedgerStatus::ReferenceOnly,
            other => return Err(err(format!("unknown status {other:?}"))),
        };
        out.push(LedgerEntry {
            status,
            degree: cols[1].parse().map_err(|_| err("bad degree".into()))?,
            singularities: SingularityKey::parse(&cols[2]).map_err(err)?,
            condition: cond(&cols[3]),
            note: cols.get(4).cloned().unwrap_or_default(),
        });
    }
    Ok(out)
}

pub fn ke_criterion(lct: &Rational) -> bool {
    *lct > ratio(2, 3)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EntryStatus {
    Match,
    Mismatch,
    KnownIssue,
    Skipped { allowlisted: bool },
    ReferenceOnly,
}

impl fmt::Display for EntryStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntryStatus::Match => "MATCH",
            EntryStatus::Mismatch => "MISMATCH",
            EntryStatus::KnownIssue => "KNOWN-ISSUE",
            EntryStatus::Skipped { .. } => "SKIPPED",
            EntryStatus::ReferenceOnly => "REFERENCE-ONLY",
        })
    }
}

#[derive(Clone, Debug)]
pub struct EntryReport {
    pub entry: TableEntry,
    pub status: EntryStatus,
    pub surface: Option<String>,
    pub upper: Option<UpperBound>,
    /// Scripts for the surface whose target is the expected value, with their outcome.
    pub lemmas: Vec<(String, bool, usize)>,
    pub certified_lct: Option<Rational>,
    pub note: String,
}

impl EntryReport {
    pub fn ke(&self) -> Option<bool> {
        self.certified_lct.as_ref().map(ke_criterion)
    }

    pub fn line(&self) -> String {
        let upper = self
            .upper
            .as_ref()
            .map(|u| format!("{} via {} at {}", fmt_rational(&u.value), u.candidate, u.witness))
            .unwrap_or_else(|| "-".into());
        let lemmas: Vec<String> = self
            .lemmas
            .iter()
            .map(|(n, ok, ax)| {
                let s = if *ok { "pass" } else { "FAIL" };
                if *ax > 0 {
                    format!("{n}:{s}+{ax}axioms")
                } else {
                    format!("{n}:{s}")
                }
            })
            .collect();
        let lemmas = if lemmas.is_empty() { "-".to_string() } else { lemmas.join(",") };
        let ke = match self.ke() {
            Some(true) => "KE",
            Some(false) => "-",
            None => "?",
        };
        let mut s = format!(
            "{}\t{}\texpected={}\tupper={}\tlower={}\tke={}",
            self.status,
            self.entry.label(),
            fmt_rational(&self.entry.expected_lct),
            upper,
            lemmas,
            ke
        );
        if !self.note.is_empty() {
            s.push('\t');
            s.push_str(&self.note);
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub entries: Vec<EntryReport>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        let bad = self.entries.iter().any(|e| {
            matches!(e.status, EntryStatus::Mismatch | EntryStatus::Skipped { allowlisted: false })
        });
        i32::from(bad)
    }

    pub fn count(&self, st: &EntryStatus) -> usize {
        self.entries.iter().filter(|e| &e.status == st).count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.line());
            out.push('\n');
        }
        out.push_str(&format!(
            "entries={} match={} mismatch={} known-issue={} skipped={} reference-only={}\n",
            self.entries.len(),
            self.count(&EntryStatus::Match),
            self.count(&EntryStatus::Mismatch),
            self.count(&EntryStatus::KnownIssue),
            self.entries.iter().filter(|e| matches!(e.status, EntryStatus::Skipped { .. })).count(),
            self.count(&EntryStatus::ReferenceOnly),
        ));
        out
    }
}

fn surface_key(cfg: &SurfaceConfig) -> Option<(u32, SingularityKey, Option<String>)> {
    if !cfg.degree.is_integer() {
        return None;
    }
    let degree = u32::try_from(cfg.degree.to_integer()).ok()?;
    let cond = match cfg.flags.len() {
        0 => None,
        1 => cfg.flags.iter().next().cloned(),
        _ => return None,
    };
    Some((degree, SingularityKey(cfg.singularity_summary()), cond))
}

pub fn reproduce_tables(
    dir: &Path,
    entries: &[TableEntry],
    ledger: &[LedgerEntry],
) -> Result<RunReport, HarnessError> {
    let mut surfaces = BTreeMap::new();
    for name in surface_names(dir)? {
        let cfg = load_named_surface(dir, &name)?;
        if let Some(k) = surface_key(&cfg) {
            surfaces.insert(k, cfg);
        }
    }
    let mut scripts: Vec<LemmaScript> = Vec::new();
    for name in lemma_names(dir)? {
        scripts.push(load_named_lemma(dir, &name)?);
    }
    let mut replayed: BTreeMap<String, (bool, usize)> = BTreeMap::new();
    let mut out = Vec::new();
    for e in entries {
        let led = ledger.iter().find(|l| {
            l.degree == e.degree && l.singularities == e.singularities && l.condition == e.condition
        });
        let mut rep = EntryReport {
            entry: e.clone(),
            status: EntryStatus::Mismatch,
            surface: None,
            upper: None,
            lemmas: Vec::new(),
            certified_lct: None,
            note: led.map(|l| l.note.clone()).unwrap_or_default(),
        };
        match led.map(|l| l.status) {
            Some(LedgerStatus::ReferenceOnly) => {
                rep.status = EntryStatus::ReferenceOnly;
                out.push(rep);
                continue;
            }
            Some(LedgerStatus::Skipped) => {
                rep.status = EntryStatus::Skipped { allowlisted: true };
                out.push(rep);
                continue;
            }
            _ => {}
        }
        let Some(cfg) = surfaces.get(&e.key()) else {
            rep.status = EntryStatus::Skipped { allowlisted: false };
            rep.note = "no surface fixture".into();
            out.push(rep);
            continue;
        };
        rep.surface = Some(cfg.name.clone());
        rep.upper = global_lct_upper(cfg).ok();
        // every script at the upper bound has to pass; one script per singular point
        let mut at_upper = 0;
        let mut failed_at_upper = false;
        for s in scripts.iter().filter(|s| s.surface == cfg.name) {
            let (ok, n_axioms) = match replayed.get(&s.name) {
                Some(v) => *v,
                None => {
                    let r = replay_lemma(cfg, s, None)?;
                    let v = (r.pass(), r.axioms.len());
                    replayed.insert(s.name.clone(), v);
                    v
                }
            };
            let hit_expected = s.target == e.expected_lct;
            let hit_upper = rep.upper.as_ref().is_some_and(|u| u.value == s.target);
            if hit_upper {
                at_upper += 1;
                failed_at_upper |= !ok;
            }
            if hit_expected || hit_upper {
                rep.lemmas.push((s.name.clone(), ok, n_axioms));
            }
        }
        let lower_at_upper = at_upper > 0 && !failed_at_upper;
        if lower_at_upper {
            rep.certified_lct = rep.upper.as_ref().map(|u| u.value.clone());
        }
        let upper_ok = rep.upper.as_ref().is_some_and(|u| u.value == e.expected_lct);
        let matched = upper_ok && lower_at_upper;
        rep.status = if led.is_some_and(|l| l.status == LedgerStatus::KnownIssue) {
            EntryStatus::KnownIssue
        } else if matched {
            EntryStatus::Match
        } else {
            EntryStatus::Mismatch
        };
        out.push(rep);
    }
    Ok(RunReport { entries: out })
}

pub fn reproduce_default(dir: &Path) -> Result<RunReport, HarnessError> {
    let t = dir.join("tables.tsv");
    let l = dir.join("ledger.tsv");
    let entries = parse_tables(&t.display().to_string(), &read(&t)?)?;
    let ledger = parse_ledger(&l.display().to_string(), &read(&l)?)?;
    reproduce_tables(dir, &entries, &ledger)
}
