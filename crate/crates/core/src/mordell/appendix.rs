//! The tabulated integral points and their desk-scale verification.
//!
//! File format: one record per line, `a b m j B` followed by `x y` pairs,
//! whitespace separated, `#` starting a comment. A negative `y` is accepted
//! and replaced by `|y|` (points come in `±y` pairs).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use log::info;
use num_bigint::BigInt;
use num_traits::Signed;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{bounded_point_search, curve_for, AppendixRow, IntegralPoint, MordellError};
use crate::curious::FamilyKey;

/// Environment variable overriding the bundled data file.
pub const APPENDIX_ENV: &str = "CURIOUS_APPENDIX_PATH";

const BUNDLED: &str = include_str!("../../data/integral_points.txt");

/// Default search bound; above the largest tabulated x (8,959,776).
pub const DEFAULT_X_MAX: i64 = 10_000_000;

#[derive(Debug, Error)]
pub enum AppendixError {
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Parsed appendix data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Appendix {
    pub rows: Vec<AppendixRow>,
    /// `(line, family, j, x)` for each point whose `y` sign was dropped.
    pub normalized: Vec<(usize, FamilyKey, u8, BigInt)>,
}

impl Appendix {
    pub fn parse(text: &str) -> Result<Self, AppendixError> {
        let mut rows = Vec::new();
        let mut normalized = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |detail: String| AppendixError::Parse { line, detail };
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() < 5 || fields.len().is_multiple_of(2) {
                return Err(err(format!("expected `a b m j B` and x/y pairs, got {} fields", fields.len())));
            }
            let small = |i: usize| -> Result<u32, AppendixError> {
                fields[i].parse().map_err(|_| err(format!("field {} ({:?}) is not a small integer", i + 1, fields[i])))
            };
            let big = |s: &str| -> Result<BigInt, AppendixError> {
                s.parse().map_err(|_| err(format!("{s:?} is not an integer")))
            };
            let (a, b, m, j) = (small(0)?, small(1)?, small(2)?, small(3)?);
            let digit = |v: u32| u8::try_from(v).map_err(|_| err(format!("{v} is not a digit")));
            let family = FamilyKey::new(digit(a)?, digit(b)?, m).map_err(|e| err(e.to_string()))?;
            let j = u8::try_from(j).ok().filter(|j| *j <= 2).ok_or_else(|| err(format!("j = {j} outside 0..=2")))?;
            let constant = big(fields[4])?;
            let mut points = Vec::new();
            for pair in fields[5..].chunks(2) {
                let x = big(pair[0])?;
                let mut y = big(pair[1])?;
                if y.is_negative() {
                    info!("line {line}: point ({x}, {y}) on ({family}, j={j}) stored with |y|");
                    normalized.push((line, family, j, x.clone()));
                    y = -y;
                }
                points.push(IntegralPoint { x, y });
            }
            rows.push(AppendixRow { family, j, constant, points });
        }
        Ok(Self { rows, normalized })
    }

    /// The data file compiled into the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled appendix parses")
    }

    pub fn bundled_text() -> &'static str {
        BUNDLED
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AppendixError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| AppendixError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// `$CURIOUS_APPENDIX_PATH` if set, otherwise the bundled file.
    pub fn from_env() -> Result<Self, AppendixError> {
        match std::env::var_os(APPENDIX_ENV) {
            Some(path) => Self::load(path),
            None => Ok(Self::bundled()),
        }
    }

    /// The rows of `f`, one per `j` in order, if all three are present.
    pub fn rows_for(&self, f: &FamilyKey) -> Option<Vec<AppendixRow>> {
        let rows: Vec<AppendixRow> =
            (0..3).filter_map(|j| self.rows.iter().find(|r| r.family == *f && r.j == j).cloned()).collect();
        (rows.len() == 3).then_some(rows)
    }

    pub fn families(&self) -> BTreeSet<FamilyKey> {
        self.rows.iter().map(|r| r.family).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AppendixCheck {
    /// One row per (family, j) for exactly the expected families.
    Coverage,
    /// Each `B` equals `N²·10^(2j)·M`.
    Constant,
    /// Each listed point satisfies the curve equation.
    OnCurve,
    /// No point with `x ≤ x_max` is missing from a row.
    Completeness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AppendixFailure {
    pub check: AppendixCheck,
    pub row: Option<(FamilyKey, u8)>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowSearch {
    pub family: FamilyKey,
    pub j: u8,
    pub tabulated: usize,
    pub found: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AppendixReport {
    pub rows: usize,
    pub x_max: i64,
    #[serde(with = "crate::serde_decimal::bigint")]
    pub max_tabulated_x: BigInt,
    pub searches: Vec<RowSearch>,
    pub failures: Vec<AppendixFailure>,
}

impl AppendixReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn failed_checks(&self) -> BTreeSet<AppendixCheck> {
        self.failures.iter().map(|f| f.check).collect()
    }
}

/// Runs the four checks over `rows`; the completeness check searches every
/// curve for points with `x ≤ x_max`.
pub fn verify_appendix(rows: &[AppendixRow], families: &[FamilyKey], x_max: i64) -> AppendixReport {
    let mut failures = Vec::new();

    let mut seen: BTreeMap<(FamilyKey, u8), usize> = BTreeMap::new();
    for r in rows {
        *seen.entry((r.family, r.j)).or_default() += 1;
    }
    for f in families {
        for j in 0..3 {
            match seen.get(&(*f, j)).copied().unwrap_or(0) {
                1 => {}
                0 => failures.push(AppendixFailure {
                    check: AppendixCheck::Coverage,
                    row: Some((*f, j)),
                    detail: "row missing".into(),
                }),
                c => failures.push(AppendixFailure {
                    check: AppendixCheck::Coverage,
                    row: Some((*f, j)),
                    detail: format!("row listed {c} times"),
                }),
            }
        }
    }
    for key in seen.keys().filter(|(f, _)| !families.contains(f)) {
        failures.push(AppendixFailure {
            check: AppendixCheck::Coverage,
            row: Some(*key),
            detail: "family not among the expected families".into(),
        });
    }

    let per_row: Vec<(Vec<AppendixFailure>, Option<RowSearch>)> = rows
        .par_iter()
        .map(|row| {
            let key = Some((row.family, row.j));
            let mut out = Vec::new();
            let curve = match curve_for(&row.family, row.j) {
                Ok(c) => c,
                Err(e) => {
                    out.push(AppendixFailure { check: AppendixCheck::Constant, row: key, detail: e.to_string() });
                    return (out, None);
                }
            };
            if let Err(MordellError::ConstantMismatch { expected, found, .. }) = row.check() {
                out.push(AppendixFailure {
                    check: AppendixCheck::Constant,
                    row: key,
                    detail: format!("B = {found}, expected {expected}"),
                });
            }
            for p in row.points.iter().filter(|p| !curve.contains(p)) {
                out.push(AppendixFailure {
                    check: AppendixCheck::OnCurve,
                    row: key,
                    detail: format!("({}, {}) is not on y² = x³ + {}", p.x, p.y, curve.constant()),
                });
            }
            let listed: BTreeSet<&IntegralPoint> = row.points.iter().collect();
            let found = bounded_point_search(&curve, x_max);
            for p in found.iter().filter(|p| !listed.contains(p)) {
                out.push(AppendixFailure {
                    check: AppendixCheck::Completeness,
                    row: key,
                    detail: format!("({}, {}) is on the curve but not listed", p.x, p.y),
                });
            }
            let search = RowSearch { family: row.family, j: row.j, tabulated: row.points.len(), found: found.len() };
            (out, Some(search))
        })
        .collect();

    let mut searches = Vec::new();
    for (f, s) in per_row {
        failures.extend(f);
        searches.extend(s);
    }
    failures.sort_by_key(|x| (x.check, x.row));
    let max_tabulated_x = rows.iter().flat_map(|r| r.points.iter().map(|p| p.x.clone())).max().unwrap_or_default();
    AppendixReport { rows: rows.len(), x_max, max_tabulated_x, searches, failures }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_file_shape() {
        let a = Appendix::bundled();
        assert_eq!(a.rows.len(), 39);
        assert_eq!(a.families().len(), 13);
        let f = FamilyKey::new(9, 8, 1).unwrap();
        assert_eq!(a.normalized, vec![(a.normalized[0].0, f, 2, BigInt::from(8400))]);
        let rows = a.rows_for(&f).unwrap();
        assert!(rows[2].points.contains(&IntegralPoint::new(8400, 775_000)));
        for row in &a.rows {
            row.check().unwrap();
        }
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = Appendix::parse("# header\n4 2 1 0\n").unwrap_err();
        assert!(matches!(e, AppendixError::Parse { line: 2, .. }), "{e}");
        let e = Appendix::parse("4 2 1 5 2310400\n").unwrap_err();
        assert!(matches!(e, AppendixError::Parse { line: 1, .. }));
        let e = Appendix::parse("4 2 1 0 2310400 80\n").unwrap_err();
        assert!(matches!(e, AppendixError::Parse { line: 1, .. }));
        let e = Appendix::parse("4 2 1 0 23x0400\n").unwrap_err();
        assert!(matches!(e, AppendixError::Parse { line: 1, .. }));
    }

    #[test]
    fn small_bound_verification() {
        let a = Appendix::bundled();
        let families: Vec<FamilyKey> = a.families().into_iter().collect();
        let report = verify_appendix(&a.rows, &families, 2000);
        assert!(report.passed(), "{:?}", report.failures);
        assert_eq!(report.max_tabulated_x, BigInt::from(8_959_776));

        let report = verify_appendix(&a.rows, &families[1..], 10);
        assert_eq!(report.failed_checks(), BTreeSet::from([AppendixCheck::Coverage]));
    }

    #[test]
    fn perturbations_are_caught() {
        let text = Appendix::bundled_text();
        let families: Vec<FamilyKey> = Appendix::bundled().families().into_iter().collect();

        let altered = Appendix::parse(&text.replace("4 2 1 0 2310400 ", "4 2 1 0 2310401 ")).unwrap();
        let report = verify_appendix(&altered.rows, &families, 100);
        assert!(report.failed_checks().contains(&AppendixCheck::Constant));
        assert!(report.failures.iter().any(|f| f.row == Some((FamilyKey::new(4, 2, 1).unwrap(), 0))));

        let missing = Appendix::parse(&text.replace("  80 1680", "")).unwrap();
        let report = verify_appendix(&missing.rows, &families, 100);
        assert_eq!(report.failed_checks(), BTreeSet::from([AppendixCheck::Completeness]));
        assert!(report.failures[0].detail.contains("(80, 1680)"));

        let shifted = Appendix::parse(&text.replace("80 1680", "80 1681")).unwrap();
        let report = verify_appendix(&shifted.rows, &families, 100);
        assert!(report.failed_checks().contains(&AppendixCheck::OnCurve));
    }
}
