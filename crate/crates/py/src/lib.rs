//! Python module `terracover`.
//!
//! Build with `cargo build -p terracover-py --release --features extension-module`
//! and copy the resulting shared library to `terracover.so` on `PYTHONPATH`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use terracover::data::{load_dataset, split_dataset, write_synthetic_dataset, LandCoverClass, SplitRatios};
use terracover::nn::{ArchitectureSpec, SatelliteNetOptions};
use terracover::scanner::{default_palette, plan_tiling, render_map, scan_image};
use terracover::stats::{class_shares, Region};
use terracover::training::{evaluate, train, TrainingConfig};
use terracover::{Checkpoint, ClassificationMatrix, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn classes_from(names: Option<Vec<String>>) -> PyResult<Vec<LandCoverClass>> {
    names
        .unwrap_or_default()
        .iter()
        .map(|n| LandCoverClass::from_display_name(n).map_err(py_err))
        .collect()
}

/// Trained classifier loaded from a checkpoint file.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: Checkpoint,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: Checkpoint::load(&path).map_err(py_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    /// Class display names in output order.
    fn classes(&self) -> Vec<String> {
        self.inner.classes.iter().map(|c| c.name.clone()).collect()
    }

    /// Classifies every tile of the image at `path`.
    fn scan(&self, path: PathBuf) -> PyResult<PyMatrix> {
        let img = image::open(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?.to_rgb8();
        let source = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(PyMatrix { inner: scan_image(&self.inner, &img, &source).map_err(py_err)? })
    }

    /// Accuracy in `[0, 1]` over every image under a dataset root.
    fn accuracy(&self, root: PathBuf) -> PyResult<f64> {
        let loaded = load_dataset(&root).map_err(py_err)?;
        Ok(evaluate(&self.inner, &loaded.samples).map_err(py_err)?.accuracy)
    }
}

/// Grid of per-tile class predictions.
#[pyclass(name = "Matrix", frozen)]
struct PyMatrix {
    inner: ClassificationMatrix,
}

#[pymethods]
impl PyMatrix {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: ClassificationMatrix::from_json(text).map_err(py_err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: ClassificationMatrix::load(&path).map_err(py_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    #[getter]
    fn source(&self) -> String {
        self.inner.source().to_string()
    }

    fn label(&self, row: usize, col: usize) -> PyResult<String> {
        if row >= self.inner.rows() || col >= self.inner.cols() {
            return Err(PyValueError::new_err(format!("cell ({row}, {col}) outside the matrix")));
        }
        Ok(self.inner.label(row, col).display_name().to_string())
    }

    /// Share report as JSON. `region` is `(r0, r1, c0, c1)` with exclusive ends.
    #[pyo3(signature = (exclude=None, region=None))]
    fn stats(&self, exclude: Option<Vec<String>>, region: Option<(usize, usize, usize, usize)>) -> PyResult<String> {
        let exclude = classes_from(exclude)?;
        let region = region.map(|(r0, r1, c0, c1)| Region { r0, r1, c0, c1 });
        class_shares(&self.inner, region, &exclude).and_then(|r| r.to_json()).map_err(py_err)
    }

    /// Writes the colour-coded map as PNG.
    #[pyo3(signature = (path, scale=4))]
    fn render(&self, path: PathBuf, scale: u32) -> PyResult<()> {
        let (img, _) = render_map(&self.inner, &default_palette(), scale).map_err(py_err)?;
        img.save(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))
    }
}

/// Column and row boundaries of the tile grid; tile `c` spans `xs[c]..xs[c + 1]`.
#[pyfunction]
fn tiling(width: usize, height: usize) -> PyResult<(Vec<usize>, Vec<usize>)> {
    let plan = plan_tiling(width, height).map_err(py_err)?;
    Ok((plan.x_offsets, plan.y_offsets))
}

/// Satellite-Net architecture as JSON, for the `architecture` field of a training config.
#[pyfunction]
#[pyo3(signature = (conv_channels=[32, 32, 64, 128], hidden_units=512, dropout=0.5))]
fn satellite_net(conv_channels: [usize; 4], hidden_units: usize, dropout: f64) -> PyResult<String> {
    let opts = SatelliteNetOptions { conv_channels, hidden_units, dropout, ..Default::default() };
    serde_json::to_string(&ArchitectureSpec::satellite_net(&opts)).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn class_names() -> Vec<&'static str> {
    LandCoverClass::ALL.iter().map(|c| c.display_name()).collect()
}

/// Writes procedurally generated tiles in the EuroSAT folder layout.
#[pyfunction]
#[pyo3(signature = (root, per_class, classes=None, seed=0))]
fn write_synthetic(root: PathBuf, per_class: usize, classes: Option<Vec<String>>, seed: u64) -> PyResult<usize> {
    let classes = match classes {
        Some(_) => classes_from(classes)?,
        None => LandCoverClass::ALL.to_vec(),
    };
    write_synthetic_dataset(&root, per_class, &classes, seed).map_err(py_err)
}

/// Trains on a dataset root and returns the best model with its history CSV.
/// `config` is a JSON training configuration; omitted fields take defaults.
#[pyfunction]
#[pyo3(signature = (root, config=None))]
fn fit(py: Python<'_>, root: PathBuf, config: Option<&str>) -> PyResult<(PyModel, String)> {
    let cfg: TrainingConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => TrainingConfig::default(),
    };
    py.detach(|| {
        let loaded = load_dataset(&root)?;
        let split = split_dataset(loaded.samples, SplitRatios::default(), cfg.seed)?;
        train(&cfg, &split)
    })
    .map(|(ckpt, history)| (PyModel { inner: ckpt }, history.to_csv()))
    .map_err(py_err)
}

#[pymodule(name = "terracover")]
fn terracover_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyMatrix>()?;
    m.add_function(wrap_pyfunction!(tiling, m)?)?;
    m.add_function(wrap_pyfunction!(class_names, m)?)?;
    m.add_function(wrap_pyfunction!(satellite_net, m)?)?;
    m.add_function(wrap_pyfunction!(write_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add("TILE_SIZE", terracover::TILE_SIZE)?;
    Ok(())
}
