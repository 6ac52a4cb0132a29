use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Named regressor columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Design {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_intercept(rows: usize) -> Self {
        Self::new().column("intercept", vec![1.0; rows])
    }

    pub fn column(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.names.push(name.into());
        self.columns.push(values);
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn has_intercept(&self) -> bool {
        self.columns.iter().any(|c| c.iter().all(|&v| v == 1.0))
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows(), self.cols(), |i, j| self.columns[j][i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    pub n: usize,
}

impl RegressionFit {
    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coefficients[i])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.std_errors[i])
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Fitted value for one row given in the design's column order.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum()
    }

    pub fn fitted(&self, design: &Design) -> Vec<f64> {
        (0..design.rows())
            .map(|i| {
                design
                    .columns
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(c, b)| c[i] * b)
                    .sum()
            })
            .collect()
    }
}

/// Columns with `|R_jj|` below this fraction of their own norm are treated
/// as linear combinations of earlier columns.
const RANK_TOL: f64 = 1e-10;

/// Least squares through a Householder QR factorisation.
pub fn solve_ols(design: &Design, target: &[f64]) -> Result<RegressionFit, AnalysisError> {
    let (n, p) = (design.rows(), design.cols());
    if p == 0 {
        return Err(AnalysisError::Shape("design has no columns".into()));
    }
    if design.columns.iter().any(|c| c.len() != n) || target.len() != n {
        return Err(AnalysisError::Shape(format!(
            "design columns and target must all have {n} rows"
        )));
    }
    if n < p {
        return Err(AnalysisError::Shape(format!("{n} rows for {p} columns")));
    }
    if target.iter().chain(design.columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(AnalysisError::Shape("non-finite value in design or target".into()));
    }
    let x = design.matrix();
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..p {
        let norm = x.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm {
            return Err(rank_error(design, &r, j));
        }
    }
    let mut qty = DVector::from_column_slice(target);
    qr.q_tr_mul(&mut qty);
    let qty_head = qty.rows(0, p).into_owned();
    let beta = r
        .solve_upper_triangular(&qty_head)
        .ok_or_else(|| AnalysisError::Shape("singular triangular factor".into()))?;

    let y = DVector::from_column_slice(target);
    let resid = &y - &x * &beta;
    let rss = resid.norm_squared();
    let mean = target.iter().sum::<f64>() / n as f64;
    let tss: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };

    let std_errors = if n > p {
        let sigma2 = rss / (n - p) as f64;
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .ok_or_else(|| AnalysisError::Shape("singular triangular factor".into()))?;
        // cov = σ² R⁻¹ R⁻ᵀ, diagonal = squared row norms of R⁻¹
        (0..p).map(|i| (sigma2 * r_inv.row(i).norm_squared()).sqrt()).collect()
    } else {
        vec![f64::NAN; p]
    };
    Ok(RegressionFit {
        names: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        std_errors,
        residuals: resid.iter().copied().collect(),
        r_squared,
        n,
    })
}

fn rank_error(design: &Design, r: &DMatrix<f64>, j: usize) -> AnalysisError {
    // express column j through the earlier columns: R[..j, ..j] c = R[..j, j]
    let mut collinear_with = Vec::new();
    if j > 0 {
        let head = r.view((0, 0), (j, j)).into_owned();
        let rhs = r.view((0, j), (j, 1)).into_owned();
        if let Some(c) = head.solve_upper_triangular(&rhs) {
            let scale = c.amax().max(f64::MIN_POSITIVE);
            for (k, v) in c.iter().enumerate() {
                if v.abs() > 1e-8 * scale {
                    collinear_with.push(design.names[k].clone());
                }
            }
        }
    }
    AnalysisError::RankDeficient {
        column: design.names[j].clone(),
        collinear_with,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn exact_line() {
        let d = Design::new().column("x", vec![0.0, 1.0]).column("intercept", vec![1.0, 1.0]);
        let f = solve_ols(&d, &[1.0, 3.0]).unwrap();
        assert_relative_eq!(f.coefficients[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.coefficients[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_target_gives_zero_slope() {
        let x = vec![-1.0, 1.0, -1.0, 1.0];
        let y = vec![5.0, 5.0, 7.0, 7.0];
        let f = solve_ols(&Design::with_intercept(4).column("x", x), &y).unwrap();
        assert!(f.coef("x").unwrap().abs() < 1e-12);
        assert_relative_eq!(f.coef("intercept").unwrap(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let n = 50;
        let mut d = Design::with_intercept(n);
        for k in 0..3 {
            d = d.column(format!("x{k}"), (0..n).map(|_| rng.random_range(-2.0..2.0)).collect());
        }
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let f = solve_ols(&d, &y).unwrap();

        // oracle: (XᵀX)⁻¹Xᵀy by Gaussian elimination with partial pivoting
        let p = d.cols();
        let mut a = vec![vec![0.0; p + 1]; p];
        for i in 0..p {
            for j in 0..p {
                a[i][j] = (0..n).map(|r| d.columns[i][r] * d.columns[j][r]).sum();
            }
            a[i][p] = (0..n).map(|r| d.columns[i][r] * y[r]).sum();
        }
        for c in 0..p {
            let piv = (c..p).max_by(|&x, &z| a[x][c].abs().total_cmp(&a[z][c].abs())).unwrap();
            a.swap(c, piv);
            for r in 0..p {
                if r != c {
                    let m = a[r][c] / a[c][c];
                    for k in c..=p {
                        a[r][k] -= m * a[c][k];
                    }
                }
            }
        }
        for i in 0..p {
            assert!((f.coefficients[i] - a[i][p] / a[i][i]).abs() < 1e-8);
        }
        let resid_mean = f.residuals.iter().sum::<f64>() / n as f64;
        assert!(resid_mean.abs() < 1e-9);
    }

    #[test]
    fn standard_errors_match_closed_form_for_simple_regression() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.5 * v + (v * 1.3).sin()).collect();
        let f = solve_ols(&Design::with_intercept(20).column("x", x.clone()), &y).unwrap();
        let mx = x.iter().sum::<f64>() / 20.0;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        let s2 = f.residuals.iter().map(|r| r * r).sum::<f64>() / 18.0;
        assert_relative_eq!(f.se("x").unwrap(), (s2 / sxx).sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![0.0, 1.0, 0.0, 1.0];
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - y).collect();
        let d = Design::with_intercept(4).column("a", a).column("b", b).column("c", c);
        match solve_ols(&d, &[1.0, 2.0, 3.0, 5.0]) {
            Err(AnalysisError::RankDeficient { column, collinear_with }) => {
                assert_eq!(column, "c");
                assert_eq!(collinear_with, vec!["a".to_string(), "b".to_string()]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shape_errors() {
        assert!(solve_ols(&Design::with_intercept(3), &[1.0, 2.0]).is_err());
        assert!(solve_ols(&Design::new(), &[]).is_err());
        let wide = Design::with_intercept(1).column("x", vec![2.0]);
        assert!(solve_ols(&wide, &[1.0]).is_err());
    }
}
