use super::{NumericError, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter index, flat coordinate)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    /// `(analytic, numeric)` at the worst coordinate.
    pub worst_values: Option<(f64, f64)>,
    pub coordinates: usize,
    pub passed: bool,
}

/// Compares analytic gradients against central differences.
///
/// `f` returns the scalar value and one gradient per parameter. The relative
/// error per coordinate is `|a − n| / max(1e-8, |a| + |n|)`.
pub fn grad_check<F>(
    mut f: F,
    params: &[Tensor],
    h: f64,
    tol: f64,
) -> Result<GradCheckReport, NumericError>
where
    F: FnMut(&[Tensor]) -> Result<(f64, Vec<Tensor>), NumericError>,
{
    let (_, analytic) = f(params)?;
    if analytic.len() != params.len() {
        return Err(NumericError::InvalidArgument {
            op: "grad_check",
            reason: format!(
                "{} gradients for {} parameters",
                analytic.len(),
                params.len()
            ),
        });
    }
    let mut work = params.to_vec();
    let mut max_rel_error: f64 = 0.0;
    let mut worst = None;
    let mut worst_values = None;
    let mut coordinates = 0;
    for (pi, grad) in analytic.iter().enumerate() {
        if grad.shape() != params[pi].shape() {
            return Err(NumericError::Shape {
                op: "grad_check",
                lhs: params[pi].shape(),
                rhs: grad.shape(),
            });
        }
        for k in 0..params[pi].len() {
            let x0 = params[pi].data()[k];
            work[pi].data_mut()[k] = x0 + h;
            let (fp, _) = f(&work)?;
            work[pi].data_mut()[k] = x0 - h;
            let (fm, _) = f(&work)?;
            work[pi].data_mut()[k] = x0;
            let numeric = (fp - fm) / (2.0 * h);
            let a = grad.data()[k];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            coordinates += 1;
            if rel > max_rel_error || worst.is_none() {
                max_rel_error = max_rel_error.max(rel);
                worst = Some((pi, k));
                worst_values = Some((a, numeric));
            }
        }
    }
    Ok(GradCheckReport {
        max_rel_error,
        worst,
        worst_values,
        coordinates,
        passed: max_rel_error < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Tape;

    #[test]
    fn quadratic_form_is_exact() {
        // f(x) = xᵀ x: central differences are exact for quadratics up to rounding.
        let x = Tensor::new(3, 1, vec![0.5, -1.5, 2.0]).unwrap();
        let report = grad_check(
            |p| {
                let mut tape = Tape::new();
                let v = tape.param(p[0].clone());
                let sq = tape.mul(v, v)?;
                let s = tape.sum(sq);
                let g = tape.backward(s)?;
                Ok((tape.value(s).item()?, vec![g.get(v).unwrap().clone()]))
            },
            &[x],
            1e-3,
            1e-9,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.coordinates, 3);
    }

    #[test]
    fn constant_function_has_zero_error() {
        let report = grad_check(
            |p| Ok((4.2, vec![Tensor::zeros(p[0].rows(), p[0].cols())])),
            &[Tensor::filled(2, 2, 1.0)],
            1e-5,
            1e-12,
        )
        .unwrap();
        assert_eq!(report.max_rel_error, 0.0);
        assert!(report.passed);
    }
}
