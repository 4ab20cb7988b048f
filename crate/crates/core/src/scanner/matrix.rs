use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{LandCoverClass, NUM_CLASSES};
use crate::error::{Error, Result};

use super::tiling::TilingPlan;

pub const MATRIX_FORMAT_VERSION: u32 = 1;

/// Grid of predicted labels, one per tile, aligned with the source image.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationMatrix {
    source: String,
    rows: usize,
    cols: usize,
    labels: Vec<LandCoverClass>,
    confidences: Vec<f32>,
    plan: Option<TilingPlan>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    version: u32,
    source: String,
    rows: usize,
    cols: usize,
    classes: Vec<String>,
    labels: Vec<usize>,
    confidences: Vec<f32>,
}

impl ClassificationMatrix {
    pub fn new(
        source: impl Into<String>,
        rows: usize,
        cols: usize,
        labels: Vec<LandCoverClass>,
        confidences: Vec<f32>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!("matrix must be at least 1x1, got {rows}x{cols}")));
        }
        if labels.len() != rows * cols || confidences.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} cells, got {} labels and {} confidences",
                rows * cols,
                labels.len(),
                confidences.len()
            )));
        }
        if let Some(c) = confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::shape(format!("confidence {c} outside [0, 1]")));
        }
        Ok(Self { source: source.into(), rows, cols, labels, confidences, plan: None })
    }

    /// A matrix with every confidence set to 1.
    pub fn from_labels(rows: usize, cols: usize, labels: Vec<LandCoverClass>) -> Result<Self> {
        let n = labels.len();
        Self::new("", rows, cols, labels, vec![1.0; n])
    }

    pub fn with_plan(mut self, plan: TilingPlan) -> Result<Self> {
        if (plan.rows(), plan.cols()) != (self.rows, self.cols) {
            return Err(Error::PlanMismatch { expected: (plan.rows(), plan.cols()), actual: (self.rows, self.cols) });
        }
        self.plan = Some(plan);
        Ok(self)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[LandCoverClass] {
        &self.labels
    }

    pub fn confidences(&self) -> &[f32] {
        &self.confidences
    }

    pub fn plan(&self) -> Option<&TilingPlan> {
        self.plan.as_ref()
    }

    pub fn label(&self, row: usize, col: usize) -> LandCoverClass {
        self.labels[row * self.cols + col]
    }

    pub fn confidence(&self, row: usize, col: usize) -> f32 {
        self.confidences[row * self.cols + col]
    }

    pub fn to_json(&self) -> Result<String> {
        let file = MatrixFile {
            version: MATRIX_FORMAT_VERSION,
            source: self.source.clone(),
            rows: self.rows,
            cols: self.cols,
            classes: LandCoverClass::ALL.iter().map(|c| c.display_name().to_string()).collect(),
            labels: self.labels.iter().map(|l| l.index()).collect(),
            confidences: self.confidences.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MatrixFile = serde_json::from_str(text)?;
        if file.version != MATRIX_FORMAT_VERSION {
            return Err(Error::Config(format!("unsupported matrix version {}", file.version)));
        }
        if file.classes.len() != NUM_CLASSES
            || file.classes.iter().zip(LandCoverClass::ALL).any(|(n, c)| n != c.display_name())
        {
            return Err(Error::Config(format!("matrix class table {:?} does not match", file.classes)));
        }
        let labels = file.labels.iter().map(|&i| LandCoverClass::from_index(i)).collect::<Result<Vec<_>>>()?;
        Self::new(file.source, file.rows, file.cols, labels, file.confidences)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use LandCoverClass::*;

    #[test]
    fn json_round_trip() {
        let m = ClassificationMatrix::new("a.png", 1, 2, vec![Forest, SeaLake], vec![0.5, 0.25]).unwrap();
        let text = m.to_json().unwrap();
        assert!(text.starts_with(r#"{"version":1,"source":"a.png","rows":1,"cols":2,"classes":["Annual Crop""#));
        assert!(text.ends_with(r#""labels":[1,9],"confidences":[0.5,0.25]}"#));
        assert_eq!(ClassificationMatrix::from_json(&text).unwrap(), m);
    }

    #[test]
    fn rejects_bad_cells() {
        assert!(ClassificationMatrix::from_labels(2, 2, vec![Forest; 3]).is_err());
        assert!(ClassificationMatrix::new("", 1, 1, vec![Forest], vec![1.5]).is_err());
        let bad = r#"{"version":1,"source":"","rows":1,"cols":1,"classes":[],"labels":[0],"confidences":[1]}"#;
        assert!(ClassificationMatrix::from_json(bad).is_err());
    }
}
