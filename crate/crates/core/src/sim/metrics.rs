//! Scalar summaries of logged trajectories.

use nalgebra::DVector;

use super::TrajectoryLog;
use crate::control::{ControlError, Model};
use crate::scalar::Real;

/// `‖f_d − f(q_k)‖` for every logged step.
pub fn tip_error_norms<T: Real>(log: &TrajectoryLog<T>, model: &Model<T>, target: &[T]) -> Result<Vec<T>, ControlError> {
    let fd = DVector::from_column_slice(target);
    log.rows
        .iter()
        .map(|r| Ok((&fd - model.tip(&r.q, &r.qd)?.f).norm()))
        .collect()
}

/// Steps at which any of `joints` reverses its velocity and lands above
/// `threshold` in magnitude.
pub fn chatter_count<T: Real>(log: &TrajectoryLog<T>, joints: &[usize], threshold: T) -> usize {
    log.rows
        .windows(2)
        .filter(|w| {
            joints.iter().any(|&j| {
                let (a, b) = (w[0].qd[j], w[1].qd[j]);
                a * b < T::zero() && b.abs() > threshold
            })
        })
        .count()
}

/// Largest rise of a series above its running minimum.
pub fn max_rebound<T: Real>(series: &[T]) -> T {
    let mut lowest = match series.first() {
        Some(&v) => v,
        None => return T::zero(),
    };
    let mut best = T::zero();
    for &v in series {
        lowest = lowest.min(v);
        best = best.max(v - lowest);
    }
    best
}

/// `max_k |E_k − E_0|` of the total energy along the log.
pub fn energy_drift<T: Real>(log: &TrajectoryLog<T>, model: &Model<T>) -> Result<T, ControlError> {
    let mut e0 = None;
    let mut worst = T::zero();
    for r in &log.rows {
        let e = model.total_energy(&r.q, &r.qd)?;
        let base = *e0.get_or_insert(e);
        worst = worst.max((e - base).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rebound_of_monotone_series_is_zero() {
        assert_eq!(max_rebound(&[3.0, 2.0, 1.0]), 0.0);
        assert_eq!(max_rebound(&[3.0, 1.0, 1.5, 0.5, 2.0]), 1.5);
        assert_eq!(max_rebound::<f64>(&[]), 0.0);
    }
}
