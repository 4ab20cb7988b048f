//! Land-cover shares over a classification matrix: the whole grid or a
//! rectangular block of tiles, optionally with some classes excluded.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{LandCoverClass, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::scanner::ClassificationMatrix;

/// Half-open block of tile rows `[r0, r1)` and columns `[c0, c1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub r0: usize,
    pub r1: usize,
    pub c0: usize,
    pub c1: usize,
}

impl Region {
    pub fn full(matrix: &ClassificationMatrix) -> Self {
        Self { r0: 0, r1: matrix.rows(), c0: 0, c1: matrix.cols() }
    }

    pub fn validate(&self, matrix: &ClassificationMatrix) -> Result<()> {
        if self.r0 >= self.r1 || self.c0 >= self.c1 {
            return Err(Error::InvalidRegion(format!("rows {}..{} / cols {}..{} is empty", self.r0, self.r1, self.c0, self.c1)));
        }
        if self.r1 > matrix.rows() || self.c1 > matrix.cols() {
            return Err(Error::InvalidRegion(format!(
                "rows {}..{} / cols {}..{} exceeds the {}x{} grid",
                self.r0,
                self.r1,
                self.c0,
                self.c1,
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        (self.r1 - self.r0) * (self.c1 - self.c0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub index: usize,
    pub class: String,
    pub count: u64,
    /// Percent of the included cells; `None` for excluded classes.
    pub share: Option<f64>,
    /// `share` rounded half-up to two decimals with a `%` suffix.
    pub display: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandCoverReport {
    pub region: Region,
    pub excluded: Vec<String>,
    /// Cells whose class is not excluded.
    pub total: u64,
    /// One entry per class in class-index order.
    pub classes: Vec<ClassShare>,
}

/// Hundredths of a percent of `count / total`, rounded half-up, using exact
/// integer arithmetic.
pub fn share_hundredths(count: u64, total: u64) -> u64 {
    assert!(total > 0);
    let (c, t) = (count as u128, total as u128);
    ((2 * 10_000 * c + t) / (2 * t)) as u64
}

/// `"65.01%"`-style rendering of `count / total`.
pub fn format_share(count: u64, total: u64) -> String {
    let h = share_hundredths(count, total);
    format!("{}.{:02}%", h / 100, h % 100)
}

pub fn class_shares(
    matrix: &ClassificationMatrix,
    region: Option<Region>,
    exclude: &[LandCoverClass],
) -> Result<LandCoverReport> {
    let region = region.unwrap_or_else(|| Region::full(matrix));
    region.validate(matrix)?;
    let mut counts = [0u64; NUM_CLASSES];
    for r in region.r0..region.r1 {
        for &label in &matrix.labels()[r * matrix.cols() + region.c0..r * matrix.cols() + region.c1] {
            counts[label.index()] += 1;
        }
    }
    let is_excluded = |c: LandCoverClass| exclude.contains(&c);
    let total: u64 = LandCoverClass::ALL.iter().filter(|&&c| !is_excluded(c)).map(|c| counts[c.index()]).sum();
    if total == 0 {
        return Err(Error::EmptyRegion);
    }
    let classes = LandCoverClass::ALL
        .iter()
        .map(|&c| {
            let count = counts[c.index()];
            let included = !is_excluded(c);
            ClassShare {
                index: c.index(),
                class: c.display_name().to_string(),
                count,
                share: included.then(|| 100.0 * count as f64 / total as f64),
                display: included.then(|| format_share(count, total)),
            }
        })
        .collect();
    let excluded = LandCoverClass::ALL
        .iter()
        .filter(|&&c| is_excluded(c))
        .map(|c| c.display_name().to_string())
        .collect();
    Ok(LandCoverReport { region, excluded, total, classes })
}

/// One table row: class name, cell count, rendered share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub class: String,
    pub count: u64,
    pub share: String,
}

/// Rows for the included classes, in class-index order.
pub fn report_to_table(report: &LandCoverReport) -> Vec<TableRow> {
    report
        .classes
        .iter()
        .filter_map(|c| c.display.as_ref().map(|d| TableRow { class: c.class.clone(), count: c.count, share: d.clone() }))
        .collect()
}

impl LandCoverReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `class,count,share_percent`; excluded classes have an empty share.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,count,share_percent\n");
        for c in &self.classes {
            let share = c.share.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", c.class, c.count, share);
        }
        out
    }

    /// Aligned plain-text table of the included classes.
    pub fn to_table_string(&self) -> String {
        let rows = report_to_table(self);
        let width = rows.iter().map(|r| r.class.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}  {:>8}  {:>8}\n", "class", "cells", "share");
        for r in &rows {
            let _ = writeln!(out, "{:<width$}  {:>8}  {:>8}", r.class, r.count, r.share);
        }
        out
    }

    pub fn count(&self, class: LandCoverClass) -> u64 {
        self.classes[class.index()].count
    }

    pub fn share(&self, class: LandCoverClass) -> Option<f64> {
        self.classes[class.index()].share
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use LandCoverClass::*;

    fn m2x2() -> ClassificationMatrix {
        ClassificationMatrix::from_labels(2, 2, vec![Forest, Forest, River, SeaLake]).unwrap()
    }

    #[test]
    fn counting() {
        let r = class_shares(&m2x2(), None, &[]).unwrap();
        assert_eq!(r.share(Forest), Some(50.0));
        assert_eq!(r.share(River), Some(25.0));
        assert_eq!(r.share(SeaLake), Some(25.0));
        assert_eq!(r.share(Highway), Some(0.0));
        assert_eq!(r.total, 4);
    }

    #[test]
    fn exclusion_renormalizes() {
        let r = class_shares(&m2x2(), None, &[SeaLake]).unwrap();
        assert_eq!(r.share(Forest), Some(200.0 / 3.0));
        assert_eq!(r.share(River), Some(100.0 / 3.0));
        assert_eq!(r.share(SeaLake), None);
        assert_eq!(r.count(SeaLake), 1);
        assert_eq!(r.excluded, vec!["Sea Lake"]);
        let table = report_to_table(&r);
        assert_eq!(table.len(), 9);
        assert_eq!(table[1].share, "66.67%");
    }

    #[test]
    fn everything_excluded() {
        assert!(matches!(class_shares(&m2x2(), None, &[Forest, River, SeaLake]), Err(Error::EmptyRegion)));
    }

    #[test]
    fn regions() {
        let m = m2x2();
        let r = class_shares(&m, Some(Region { r0: 1, r1: 2, c0: 0, c1: 2 }), &[]).unwrap();
        assert_eq!((r.count(River), r.count(SeaLake), r.total), (1, 1, 2));
        for bad in [Region { r0: 1, r1: 1, c0: 0, c1: 1 }, Region { r0: 0, r1: 3, c0: 0, c1: 1 }] {
            assert!(matches!(class_shares(&m, Some(bad), &[]), Err(Error::InvalidRegion(_))));
        }
    }

    #[test]
    fn half_up_rendering() {
        assert_eq!(format_share(65013, 100_000), "65.01%");
        assert_eq!(format_share(5, 100_000), "0.01%");
        assert_eq!(format_share(4, 100_000), "0.00%");
        assert_eq!(format_share(1, 1), "100.00%");
        assert_eq!(format_share(1, 3), "33.33%");
        assert_eq!(format_share(2, 3), "66.67%");
    }

    #[test]
    fn rounded_shares_may_drift() {
        // The published table's rounded shares add to 100.01.
        let table: [u64; 10] = [7, 17, 3340, 48, 13, 3, 11, 32, 29, 6501];
        assert_eq!(table.iter().sum::<u64>(), 10001);
    }

    #[test]
    fn csv_and_table() {
        let r = class_shares(&m2x2(), None, &[SeaLake]).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("class,count,share_percent\nAnnual Crop,0,0\nForest,2,66.66666666666667\n"));
        assert!(csv.ends_with("Sea Lake,1,\n"));
        assert!(r.to_table_string().contains("Forest"));
        assert!(!r.to_table_string().contains("Sea Lake"));
    }
}
