use crate::error::{Error, Result};
use crate::kernel::{median_bandwidth, rbf, Bandwidth};
use crate::matrix::{norm2, Matrix};

fn mean_kernel(a: &Matrix, b: &Matrix, h: Bandwidth) -> f64 {
    let mut total = 0.0;
    for x in a.iter_rows() {
        let mut row = 0.0;
        for y in b.iter_rows() {
            row += rbf(x, y, h);
        }
        total += row;
    }
    total / (a.rows() * b.rows()) as f64
}

/// Square root of the biased (V-statistic) MMD estimate with bandwidth `h`.
pub fn mmd(a: &Matrix, b: &Matrix, h: Bandwidth) -> Result<f64> {
    if a.cols() != b.cols() {
        return Err(Error::invalid(format!(
            "sample dimensions differ: {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::invalid("mmd of an empty sample set"));
    }
    let v = mean_kernel(a, a, h) + mean_kernel(b, b, h) - 2.0 * mean_kernel(a, b, h);
    Ok(v.max(0.0).sqrt())
}

/// [`mmd`] with the median bandwidth of the reference set `reference`.
pub fn mmd_to_reference(samples: &Matrix, reference: &Matrix) -> Result<f64> {
    let h = median_bandwidth(reference)?;
    mmd(samples, reference, h)
}

/// `|estimate - truth| / |truth|` over matching grid values.
pub fn rel_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::invalid("fields are on different grids"));
    }
    let t = norm2(truth);
    if t == 0.0 {
        return Err(Error::invalid("true field has zero norm"));
    }
    let diff: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t) * (e - t))
        .sum::<f64>()
        .sqrt();
    Ok(diff / t)
}
