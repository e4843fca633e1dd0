use super::Parameters;

/// Largest relative error between `analytic` and central finite differences
/// of `loss` with step `step`, over every parameter.
///
/// The relative error of one entry is `|a − n| / max(|a|, |n|, floor)`; the
/// floor keeps entries that are zero in both from dividing by zero.
pub fn max_relative_error<P, F>(params: &P, analytic: &[&[f64]], step: f64, floor: f64, loss: F) -> f64
where
    P: Parameters + Clone,
    F: Fn(&P) -> f64,
{
    let mut work = params.clone();
    let mut worst = 0.0f64;
    for (t, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let orig = work.param_slices_mut()[t][i];
            work.param_slices_mut()[t][i] = orig + step;
            let up = loss(&work);
            work.param_slices_mut()[t][i] = orig - step;
            let down = loss(&work);
            work.param_slices_mut()[t][i] = orig;
            let n = (up - down) / (2.0 * step);
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(floor));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn quadratic_gradient_is_exact() {
        let w = DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5]);
        let g: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
        let err = max_relative_error(&w, &[&g], 1e-5, 1e-8, |w| w.norm_squared());
        assert!(err < 1e-9, "{err}");
        let wrong: Vec<f64> = g.iter().map(|v| v * 1.1).collect();
        assert!(max_relative_error(&w, &[&wrong], 1e-5, 1e-8, |w| w.norm_squared()) > 0.05);
    }
}
