use super::integrate::SimulationTrace;
use crate::error::{Error, Result};

fn check_grids(reference: &SimulationTrace, other: &SimulationTrace) -> Result<()> {
    if reference.times.len() != other.times.len() {
        return Err(Error::Dimension {
            what: "trace instants",
            expected: reference.times.len(),
            got: other.times.len(),
        });
    }
    for (a, b) in reference.times.iter().zip(&other.times) {
        if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "trace time grids differ ({a} vs {b})"
            )));
        }
    }
    for (ra, rb) in reference.states.iter().zip(&other.states) {
        if ra.len() != rb.len() {
            return Err(Error::Dimension {
                what: "trace nodes",
                expected: ra.len(),
                got: rb.len(),
            });
        }
    }
    Ok(())
}

/// Relative root-mean-square error in percent:
/// `100/x̄ · sqrt(Σ (y − x)² / (N·n))`, with `x̄` the mean reference value.
pub fn rrmse(reference: &SimulationTrace, lifted: &SimulationTrace) -> Result<f64> {
    check_grids(reference, lifted)?;
    let (mut sq, mut sum, mut count) = (0.0, 0.0, 0usize);
    for (ra, rb) in reference.states.iter().zip(&lifted.states) {
        for (x, y) in ra.iter().zip(rb) {
            sq += (y - x).powi(2);
            sum += x;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidArgument("traces hold no samples".into()));
    }
    let mean = sum / count as f64;
    Ok(100.0 / mean * (sq / count as f64).sqrt())
}

/// `|y − x|` laid out nodes × instants.
pub fn abs_error(reference: &SimulationTrace, lifted: &SimulationTrace) -> Result<Vec<Vec<f64>>> {
    check_grids(reference, lifted)?;
    let nodes = reference.states.first().map_or(0, Vec::len);
    Ok((0..nodes)
        .map(|i| {
            reference
                .states
                .iter()
                .zip(&lifted.states)
                .map(|(a, b)| (b[i] - a[i]).abs())
                .collect()
        })
        .collect())
}
