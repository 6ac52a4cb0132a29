use super::{GradError, Tape, Var};

/// Outcome of comparing tape gradients with central finite differences.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// max over coordinates of `|analytic − numeric| / (|numeric| + 1e-12)`
    pub max_rel_error: f64,
}

impl GradCheck {
    pub fn worst_coordinate(&self) -> usize {
        self.rel_errors()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, e)| if e > best.1 { (i, e) } else { best })
            .0
    }

    pub fn rel_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.analytic
            .iter()
            .zip(&self.numeric)
            .map(|(a, n)| (a - n).abs() / (n.abs() + 1e-12))
    }
}

/// Differentiates `f` at `point` on a tape and by central differences with
/// step `h`. `f` receives one leaf per coordinate.
pub fn check_gradients<F>(f: F, point: &[f64], h: f64) -> Result<GradCheck, GradError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let xs = tape.leaves(point);
    let root = f(&tape, &xs);
    let analytic = tape.backward(root)?.leaves();

    let eval = |x: &[f64]| -> Result<f64, GradError> {
        let t = Tape::new();
        let v = t.leaves(x);
        let r = f(&t, &v);
        t.check()?;
        Ok(r.value())
    };

    let mut numeric = Vec::with_capacity(point.len());
    let mut x = point.to_vec();
    for i in 0..point.len() {
        x[i] = point[i] + h;
        let up = eval(&x)?;
        x[i] = point[i] - h;
        let down = eval(&x)?;
        x[i] = point[i];
        numeric.push((up - down) / (2.0 * h));
    }
    let mut check = GradCheck {
        analytic,
        numeric,
        max_rel_error: 0.0,
    };
    check.max_rel_error = check.rel_errors().fold(0.0, f64::max);
    Ok(check)
}
