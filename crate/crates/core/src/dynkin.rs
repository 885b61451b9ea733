use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed};
use thiserror::Error;

use crate::exactlin::{int, QMatrix, QVector, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DynkinError {
    #[error("invalid rank {rank} for type {kind}")]
    InvalidRank { kind: Kind, rank: usize },
    #[error("cannot parse singularity type {0:?}")]
    BadType(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    A,
    D,
    E,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Kind::A => 'A',
            Kind::D => 'D',
            Kind::E => 'E',
        };
        write!(f, "{c}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SingularityType {
    kind: Kind,
    rank: usize,
}

impl SingularityType {
    pub fn new(kind: Kind, rank: usize) -> Result<Self, DynkinError> {
        let ok = match kind {
            Kind::A => rank >= 1,
            Kind::D => rank >= 4,
            Kind::E => (6..=8).contains(&rank),
        };
        if ok {
            Ok(SingularityType { kind, rank })
        } else {
            Err(DynkinError::InvalidRank { kind, rank })
        }
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Every supported type up to the given rank.
    pub fn catalog(max_rank: usize) -> Vec<SingularityType> {
        let mut out = Vec::new();
        for r in 1..=max_rank {
            out.push(SingularityType { kind: Kind::A, rank: r });
        }
        for r in 4..=max_rank {
            out.push(SingularityType { kind: Kind::D, rank: r });
        }
        for r in 6..=max_rank.min(8) {
            out.push(SingularityType { kind: Kind::E, rank: r });
        }
        out
    }
}

impl fmt::Display for SingularityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind, self.rank)
    }
}

impl FromStr for SingularityType {
    type Err = DynkinError;
    fn from_str(s: &str) -> Result<Self, DynkinError> {
        let s = s.trim();
        let bad = || DynkinError::BadType(s.to_string());
        let mut chars = s.chars();
        let kind = match chars.next() {
            Some('A') => Kind::A,
            Some('D') => Kind::D,
            Some('E') => Kind::E,
            _ => return Err(bad()),
        };
        let rank: usize = chars.as_str().parse().map_err(|_| bad())?;
        SingularityType::new(kind, rank)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynkinGraph {
    pub node_labels: Vec<String>,
    /// Zero-based node index pairs, smaller index first.
    pub edges: Vec<(usize, usize)>,
}

impl DynkinGraph {
    pub fn of(t: SingularityType) -> DynkinGraph {
        let n = t.rank;
        let node_labels = (1..=n).map(|i| format!("E{i}")).collect();
        let mut edges = Vec::new();
        match t.kind {
            Kind::A => {
                for i in 0..n - 1 {
                    edges.push((i, i + 1));
                }
            }
            Kind::D => {
                edges.push((0, 2));
                edges.push((1, 2));
                for i in 2..n - 1 {
                    edges.push((i, i + 1));
                }
            }
            Kind::E => {
                edges.push((0, 1));
                edges.push((1, 2));
                edges.push((2, 3));
                edges.push((2, 4));
                for i in 4..n - 1 {
                    edges.push((i, i + 1));
                }
            }
        }
        DynkinGraph { node_labels, edges }
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges.contains(&(a, b))
    }
}

pub fn intersection_matrix(t: SingularityType) -> QMatrix {
    let g = DynkinGraph::of(t);
    let n = t.rank;
    let mut rows = vec![vec![int(0); n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = int(-2);
    }
    for &(i, j) in &g.edges {
        rows[i][j] = int(1);
        rows[j][i] = int(1);
    }
    QMatrix::new(rows).expect("square by construction")
}

/// Laufer's algorithm: start from the reduced cycle and add any E_i with positive intersection.
pub fn fundamental_cycle(t: SingularityType) -> QVector {
    let m = intersection_matrix(t);
    let n = t.rank;
    let mut z: Vec<Rational> = vec![Rational::one(); n];
    loop {
        let mz = m.mul_vec(&QVector::new(z.clone())).expect("dimensions agree");
        match mz.iter().position(|x| x.is_positive()) {
            Some(i) => z[i] += Rational::one(),
            None => return QVector::new(z),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactlin::is_negative_definite;

    fn t(s: &str) -> SingularityType {
        s.parse().unwrap()
    }

    #[test]
    fn a3_matrix() {
        let want = QMatrix::from_ints(&[vec![-2, 1, 0], vec![1, -2, 1], vec![0, 1, -2]]).unwrap();
        assert_eq!(intersection_matrix(t("A3")), want);
    }

    #[test]
    fn d4_and_e8_edges() {
        assert_eq!(DynkinGraph::of(t("D4")).edges, vec![(0, 2), (1, 2), (2, 3)]);
        assert_eq!(
            DynkinGraph::of(t("E8")).edges,
            vec![(0, 1), (1, 2), (2, 3), (2, 4), (4, 5), (5, 6), (6, 7)]
        );
    }

    #[test]
    fn cycles() {
        assert_eq!(fundamental_cycle(t("A5")), QVector::from_ints(&[1; 5]));
        assert_eq!(fundamental_cycle(t("D4")), QVector::from_ints(&[1, 1, 2, 1]));
        assert_eq!(fundamental_cycle(t("D7")), QVector::from_ints(&[1, 1, 2, 2, 2, 2, 1]));
        assert_eq!(fundamental_cycle(t("E6")), QVector::from_ints(&[1, 2, 3, 2, 2, 1]));
        assert_eq!(fundamental_cycle(t("E7")), QVector::from_ints(&[2, 3, 4, 2, 3, 2, 1]));
        assert_eq!(
            fundamental_cycle(t("E8")),
            QVector::from_ints(&[2, 4, 6, 3, 5, 4, 3, 2])
        );
    }

    #[test]
    fn invalid_ranks() {
        assert!(SingularityType::new(Kind::D, 3).is_err());
        assert!(SingularityType::new(Kind::E, 9).is_err());
        assert!(SingularityType::new(Kind::A, 0).is_err());
        assert!("X4".parse::<SingularityType>().is_err());
    }

    #[test]
    fn all_negative_definite() {
        for ty in SingularityType::catalog(8) {
            assert!(is_negative_definite(&intersection_matrix(ty)).unwrap(), "{ty}");
        }
    }
}
