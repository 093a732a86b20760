//! Exact finite probability primitives: variables, domains, distributions, CPTs.
//!
//! Everything here is rational-exact. Enumeration orders are fixed and
//! reproducible; they double as the tie-breaking orders used by the game
//! solver, so changing them is a behavioural change, not a refactor.

use std::fmt;
use std::sync::Arc;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = BigRational;

/// Default cap on how many deterministic CPTs a single enumeration may produce.
pub const DEFAULT_CPT_GUARD: usize = 4096;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("distribution masses must sum to exactly 1, got {got}")]
    BadMass { got: String },
    #[error("negative probability {got}")]
    NegativeMass { got: String },
    #[error("empty domain")]
    EmptyDomain,
    #[error("domain labels must be distinct: duplicate `{0}`")]
    DuplicateLabel(String),
    #[error("deterministic-CPT space for `{var}` has {count} functions, exceeding the guard of {guard}")]
    CptGuardExceeded {
        var: Var,
        count: num::BigUint,
        guard: usize,
    },
    #[error("CPT for `{var}` expects {expected} rows, got {got}")]
    RowCount { var: Var, expected: usize, got: usize },
    #[error("row {row} of CPT for `{var}`: {source}")]
    BadRow {
        var: Var,
        row: usize,
        source: Box<CoreError>,
    },
    #[error("distributions range over different outcome spaces ({0} vs {1})")]
    OutcomeSpaceMismatch(usize, usize),
    #[error("cannot parse `{0}` as an exact rational")]
    BadRational(String),
}

/// Interned variable name. Cloning is cheap; ordering is lexicographic.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: impl AsRef<str>) -> Self {
        assert!(!name.as_ref().is_empty(), "variable names must be non-empty");
        Var(Arc::from(name.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var({})", self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

/// Ordered outcome labels of a finite variable. The declared order is the
/// tie-breaking order everywhere downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    labels: Vec<String>,
}

impl Domain {
    pub fn new(labels: Vec<String>) -> Result<Self, CoreError> {
        if labels.is_empty() {
            return Err(CoreError::EmptyDomain);
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(CoreError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Domain { labels })
    }

    pub fn binary() -> Self {
        Domain {
            labels: vec!["0".into(), "1".into()],
        }
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Parse an exact rational from `"3/4"`, `"0.75"` or `"2"` forms.
pub fn parse_rational(s: &str) -> Result<Rational, CoreError> {
    let s = s.trim();
    let bad = || CoreError::BadRational(s.to_string());
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.trim_start().starts_with('-');
        let int: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| bad())?
        };
        let num: BigInt = frac.parse().map_err(|_| bad())?;
        let den = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_part = Rational::new(num, den);
        let int_part = Rational::from_integer(int);
        return Ok(if negative {
            int_part - frac_part
        } else {
            int_part + frac_part
        });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// Render a rational as `n` or `n/d`.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Exact distribution over the outcome indices of one finite domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dist {
    probs: Vec<Rational>,
}

impl Dist {
    pub fn new(probs: Vec<Rational>) -> Result<Self, CoreError> {
        if probs.is_empty() {
            return Err(CoreError::EmptyDomain);
        }
        if let Some(neg) = probs.iter().find(|p| p.is_negative()) {
            return Err(CoreError::NegativeMass {
                got: format_rational(neg),
            });
        }
        let total: Rational = probs.iter().sum();
        if !total.is_one() {
            return Err(CoreError::BadMass {
                got: format_rational(&total),
            });
        }
        Ok(Dist { probs })
    }

    /// Point mass at outcome `i` of a size-`n` domain.
    pub fn point(n: usize, i: usize) -> Self {
        assert!(i < n);
        let mut probs = vec![Rational::zero(); n];
        probs[i] = Rational::one();
        Dist { probs }
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        Dist {
            probs: vec![Rational::new(BigInt::one(), BigInt::from(n)); n],
        }
    }

    pub fn size(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, i: usize) -> &Rational {
        &self.probs[i]
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn is_point_mass(&self) -> bool {
        self.probs.iter().filter(|p| !p.is_zero()).count() == 1
    }

    /// The unique supported outcome, when this is a point mass.
    pub fn point_outcome(&self) -> Option<usize> {
        if self.is_point_mass() {
            self.probs.iter().position(|p| !p.is_zero())
        } else {
            None
        }
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(i, _)| i)
    }
}

/// Exact mass comparison. Distinct outcome-space sizes are an error.
pub fn distributions_equal(d1: &Dist, d2: &Dist) -> Result<bool, CoreError> {
    if d1.size() != d2.size() {
        return Err(CoreError::OutcomeSpaceMismatch(d1.size(), d2.size()));
    }
    Ok(d1 == d2)
}

/// Conditional probability table: one exact row per parent assignment, rows
/// in lexicographic parent order (first parent most significant).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cpt {
    pub child: Var,
    pub parents: Vec<Var>,
    pub parent_sizes: Vec<usize>,
    // Shared: CPTs are immutable once built and cloned hot in discovery.
    rows: Arc<Vec<Dist>>,
}

impl Cpt {
    pub fn new(
        child: Var,
        parents: Vec<Var>,
        parent_sizes: Vec<usize>,
        rows: Vec<Dist>,
    ) -> Result<Self, CoreError> {
        assert_eq!(parents.len(), parent_sizes.len());
        let expected: usize = parent_sizes.iter().product();
        if rows.len() != expected {
            return Err(CoreError::RowCount {
                var: child,
                expected,
                got: rows.len(),
            });
        }
        let child_size = rows.first().map(Dist::size).unwrap_or(0);
        if rows.iter().any(|r| r.size() != child_size) {
            return Err(CoreError::OutcomeSpaceMismatch(
                child_size,
                rows.iter().map(Dist::size).find(|&s| s != child_size).unwrap(),
            ));
        }
        Ok(Cpt {
            child,
            parents,
            parent_sizes,
            rows: Arc::new(rows),
        })
    }

    /// A CPT whose rows are all `dist`, keeping the given parent signature.
    pub fn constant(
        child: Var,
        parents: Vec<Var>,
        parent_sizes: Vec<usize>,
        dist: Dist,
    ) -> Self {
        let n: usize = parent_sizes.iter().product();
        Cpt {
            child,
            parents,
            parent_sizes,
            rows: Arc::new(vec![dist; n]),
        }
    }

    pub fn child_size(&self) -> usize {
        self.rows[0].size()
    }

    pub fn rows(&self) -> &[Dist] {
        self.rows.as_slice()
    }

    pub fn row_index(&self, parent_values: &[usize]) -> usize {
        debug_assert_eq!(parent_values.len(), self.parent_sizes.len());
        let mut idx = 0;
        for (v, s) in parent_values.iter().zip(&self.parent_sizes) {
            debug_assert!(v < s);
            idx = idx * s + v;
        }
        idx
    }

    pub fn row(&self, parent_values: &[usize]) -> &Dist {
        &self.rows[self.row_index(parent_values)]
    }

    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().all(Dist::is_point_mass)
    }

    pub fn is_constant(&self) -> bool {
        self.rows.iter().all(|r| r == &self.rows[0])
    }
}

/// Iterator over the product space of the given sizes, lexicographic with the
/// first coordinate most significant. Yields exactly one empty vector for an
/// empty size list.
pub fn enumerate_indices(sizes: &[usize]) -> IndexProduct {
    IndexProduct {
        sizes: sizes.to_vec(),
        next: Some(vec![0; sizes.len()]),
    }
}

pub struct IndexProduct {
    sizes: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for IndexProduct {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.sizes.iter().any(|&s| s == 0) {
            return None;
        }
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut pos = self.sizes.len();
        loop {
            if pos == 0 {
                break; // exhausted
            }
            pos -= 1;
            succ[pos] += 1;
            if succ[pos] < self.sizes[pos] {
                self.next = Some(succ);
                break;
            }
            succ[pos] = 0;
        }
        Some(current)
    }
}

/// All assignments of `vars` (by outcome index) in lexicographic order of
/// (variable order, outcome index).
pub fn enumerate_assignments(
    vars: &[Var],
    sizes: &[usize],
) -> impl Iterator<Item = Vec<(Var, usize)>> {
    let vars = vars.to_vec();
    enumerate_indices(sizes).map(move |idxs| {
        vars.iter().cloned().zip(idxs).collect::<Vec<_>>()
    })
}

/// All deterministic CPTs for `child` given `parents`, in lexicographic order
/// over row outcome choices (first row most significant). This order is the
/// canonical decision-rule preference order.
pub fn enumerate_deterministic_cpts(
    child: &Var,
    child_size: usize,
    parents: &[Var],
    parent_sizes: &[usize],
    guard: usize,
) -> Result<Vec<Cpt>, CoreError> {
    let n_rows: usize = parent_sizes.iter().product();
    let count = num::BigUint::from(child_size).pow(n_rows as u32);
    if count > num::BigUint::from(guard) {
        return Err(CoreError::CptGuardExceeded {
            var: child.clone(),
            count,
            guard,
        });
    }
    let mut out = Vec::new();
    for choice in enumerate_indices(&vec![child_size; n_rows]) {
        let rows: Vec<Dist> = choice
            .iter()
            .map(|&o| Dist::point(child_size, o))
            .collect();
        out.push(Cpt {
            child: child.clone(),
            parents: parents.to_vec(),
            parent_sizes: parent_sizes.to_vec(),
            rows: Arc::new(rows),
        });
    }
    Ok(out)
}

/// One constant CPT per outcome of `child` (hard settings / structural
/// mechanism interventions), keeping the declared parent signature so the
/// result is a subset of `enumerate_deterministic_cpts`.
pub fn constant_cpts(
    child: &Var,
    child_size: usize,
    parents: &[Var],
    parent_sizes: &[usize],
) -> Vec<Cpt> {
    (0..child_size)
        .map(|o| {
            Cpt::constant(
                child.clone(),
                parents.to_vec(),
                parent_sizes.to_vec(),
                Dist::point(child_size, o),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn enumerate_two_binary() {
        let all: Vec<_> = enumerate_indices(&[2, 2]).collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn enumerate_empty_is_single_empty() {
        let all: Vec<_> = enumerate_indices(&[]).collect();
        assert_eq!(all, vec![Vec::<usize>::new()]);
    }

    #[test]
    fn enumerate_mixed_sizes() {
        let all: Vec<_> = enumerate_indices(&[2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[5], vec![1, 2]);
    }

    #[test]
    fn rational_parsing_exact() {
        assert_eq!(r("0.75"), r("3/4"));
        assert_eq!(r("0.1"), Rational::new(1.into(), 10.into()));
        assert_eq!(r("2"), Rational::from_integer(2.into()));
        assert_eq!(r("-0.5"), r("-1/2"));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("0.x").is_err());
    }

    #[test]
    fn distribution_mass_checked() {
        assert!(Dist::new(vec![r("1/2"), r("1/2")]).is_ok());
        assert!(Dist::new(vec![r("1/2"), r("1/3")]).is_err());
        assert!(Dist::new(vec![r("3/2"), r("-1/2")]).is_err());
    }

    #[test]
    fn distributions_equal_canonicalises() {
        let a = Dist::new(vec![r("7/10"), r("3/10")]).unwrap();
        let b = Dist::new(vec![r("70/100"), r("30/100")]).unwrap();
        assert!(distributions_equal(&a, &b).unwrap());
        let c = Dist::new(vec![r("3/10"), r("7/10")]).unwrap();
        assert!(!distributions_equal(&a, &c).unwrap());
        let d = Dist::new(vec![r("1")]).unwrap();
        assert!(distributions_equal(&a, &d).is_err());
    }

    #[test]
    fn deterministic_cpt_counts() {
        let x = Var::new("X");
        let d = Var::new("D");
        assert_eq!(
            enumerate_deterministic_cpts(&x, 2, &[], &[], 4096).unwrap().len(),
            2
        );
        assert_eq!(
            enumerate_deterministic_cpts(&x, 2, &[d.clone()], &[2], 4096)
                .unwrap()
                .len(),
            4
        );
        let e = Var::new("E");
        assert_eq!(
            enumerate_deterministic_cpts(&x, 2, &[d, e], &[2, 2], 4096)
                .unwrap()
                .len(),
            16
        );
    }

    #[test]
    fn deterministic_guard_names_variable() {
        let x = Var::new("X");
        let ps: Vec<Var> = (0..13).map(|i| Var::new(format!("P{i}"))).collect();
        let sizes = vec![2usize; 13];
        let err = enumerate_deterministic_cpts(&x, 2, &ps, &sizes, 4096).unwrap_err();
        assert!(err.to_string().contains("`X`"));
    }

    #[test]
    fn constants_subset_of_deterministic() {
        let x = Var::new("X");
        let d = Var::new("D");
        let consts = constant_cpts(&x, 2, &[d.clone()], &[2]);
        let dets = enumerate_deterministic_cpts(&x, 2, &[d], &[2], 4096).unwrap();
        assert_eq!(consts.len(), 2);
        for c in &consts {
            assert!(c.is_constant() && c.is_deterministic());
            assert!(dets.contains(c));
        }
    }

    #[test]
    fn cpt_row_addressing() {
        let c = Var::new("C");
        let a = Var::new("A");
        let b = Var::new("B");
        // rows keyed (a, b) with a most significant
        let rows = vec![
            Dist::point(2, 0),
            Dist::point(2, 1),
            Dist::point(2, 1),
            Dist::point(2, 0),
        ];
        let cpt = Cpt::new(c, vec![a, b], vec![2, 2], rows).unwrap();
        assert_eq!(cpt.row(&[0, 1]).point_outcome(), Some(1));
        assert_eq!(cpt.row(&[1, 0]).point_outcome(), Some(1));
        assert_eq!(cpt.row(&[1, 1]).point_outcome(), Some(0));
    }

    #[test]
    fn enumeration_reproducible() {
        let x = Var::new("X");
        let d = Var::new("D");
        let a = enumerate_deterministic_cpts(&x, 3, &[d.clone()], &[2], 4096).unwrap();
        let b = enumerate_deterministic_cpts(&x, 3, &[d], &[2], 4096).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 9);
        // first CPT maps every parent value to outcome 0
        assert!(a[0].rows().iter().all(|r| r.point_outcome() == Some(0)));
    }
}
