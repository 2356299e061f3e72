use pyo3::prelude::*;

#[pymodule]
fn oulab_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
