//! Quadratic least-squares fits of a network measure against team size or age.
//!
//! Fits use a Householder QR factorization of the column-equilibrated design.
//! Coefficient p-values come from Student's t and the overall fit from the F
//! distribution, both evaluated through the regularized incomplete beta function.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use thiserror::Error;

use crate::format::sig6;
use crate::metrics::MetricsRow;

pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RegressionError {
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("design matrix is rank deficient")]
    SingularDesign,
    #[error("xs and ys differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite observation at index {0}")]
    NonFinite(usize),
    #[error("no rows selected")]
    NoData,
    #[error("incomplete beta domain error: a={a}, b={b}, x={x}")]
    Domain { a: f64, b: f64, x: f64 },
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection keeps the series in its accurate range
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + k as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64, RegressionError> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() && (0.0..=1.0).contains(&x)) {
        return Err(RegressionError::Domain { a, b, x });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp();
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).unwrap_or(f64::NAN)
}

/// Upper tail `P(F > f)` of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_upper_tail(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).unwrap_or(f64::NAN)
}

/// Ordinary least-squares fit with an intercept and `k` slope terms.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    /// Intercept first, then one coefficient per power of x.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub f_stat: f64,
    pub f_prob: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub n_obs: usize,
    pub residuals: Vec<f64>,
}

/// Householder QR of a column-major `n × p` matrix. Returns `R` (p × p, row-major)
/// and `Qᵀ y`.
fn householder_qr(mut cols: Vec<Vec<f64>>, mut y: Vec<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = y.len();
    let p = cols.len();
    for k in 0..p {
        let norm = cols[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if cols[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let reflect = |target: &mut [f64]| {
            let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
            let scale = 2.0 * dot / vnorm2;
            for (t, vi) in target.iter_mut().zip(&v) {
                *t -= scale * vi;
            }
        };
        for col in cols.iter_mut().skip(k) {
            reflect(&mut col[k..n]);
        }
        reflect(&mut y[k..n]);
    }
    let r = (0..p)
        .map(|row| (0..p).map(|c| if c >= row { cols[c][row] } else { 0.0 }).collect())
        .collect();
    (r, y)
}

fn upper_triangular_inverse(r: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = r.len();
    let mut inv = vec![vec![0.0; p]; p];
    for col in 0..p {
        for row in (0..=col).rev() {
            let rhs = if row == col { 1.0 } else { 0.0 };
            let acc: f64 = ((row + 1)..=col).map(|k| r[row][k] * inv[k][col]).sum();
            inv[row][col] = (rhs - acc) / r[row][row];
        }
    }
    inv
}

/// Fits `y = β0 + β1 x + … + β_degree x^degree`.
pub fn fit_polynomial_ols(xs: &[f64], ys: &[f64], degree: usize) -> Result<RegressionResult, RegressionError> {
    if xs.len() != ys.len() {
        return Err(RegressionError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    let p = degree + 1;
    if n < p + 1 {
        return Err(RegressionError::InsufficientData { needed: p + 1, got: n });
    }
    if let Some(k) = xs.iter().chain(ys).position(|v| !v.is_finite()) {
        return Err(RegressionError::NonFinite(k % n));
    }
    let distinct: BTreeSet<u64> = xs.iter().map(|x| x.to_bits()).collect();
    if distinct.len() < p {
        return Err(RegressionError::SingularDesign);
    }

    let mut cols: Vec<Vec<f64>> = (0..p).map(|k| xs.iter().map(|x| x.powi(k as i32)).collect()).collect();
    let scales: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    if scales.contains(&0.0) {
        return Err(RegressionError::SingularDesign);
    }
    for (c, s) in cols.iter_mut().zip(&scales) {
        c.iter_mut().for_each(|v| *v /= s);
    }

    let (r, qty) = householder_qr(cols, ys.to_vec());
    let diag_max = (0..p).map(|k| r[k][k].abs()).fold(0.0, f64::max);
    if (0..p).any(|k| r[k][k].abs() <= 1e-10 * diag_max) {
        return Err(RegressionError::SingularDesign);
    }
    let r_inv = upper_triangular_inverse(&r);
    let scaled_beta: Vec<f64> = (0..p).map(|row| (row..p).map(|k| r_inv[row][k] * qty[k]).sum()).collect();
    let coefficients: Vec<f64> = scaled_beta.iter().zip(&scales).map(|(b, s)| b / s).collect();

    let residuals: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - coefficients.iter().enumerate().map(|(k, b)| b * x.powi(k as i32)).sum::<f64>())
        .collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let tss: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let scale2: f64 = ys.iter().map(|y| y * y).sum();

    let df_resid = (n - p) as f64;
    let df_model = (p - 1) as f64;
    let sigma2 = rss / df_resid;

    let mut std_errors = Vec::with_capacity(p);
    let mut t_stats = Vec::with_capacity(p);
    let mut p_values = Vec::with_capacity(p);
    for k in 0..p {
        // diag of (XᵀX)⁻¹ = diag(R⁻¹ R⁻ᵀ) / s_k²
        let v: f64 = (k..p).map(|c| r_inv[k][c] * r_inv[k][c]).sum::<f64>() / (scales[k] * scales[k]);
        let se = (sigma2 * v).sqrt();
        let t = if se > 0.0 {
            coefficients[k] / se
        } else if coefficients[k] == 0.0 {
            0.0
        } else {
            coefficients[k].signum() * f64::INFINITY
        };
        std_errors.push(se);
        t_stats.push(t);
        p_values.push(student_t_two_sided(t, df_resid));
    }

    let degenerate = tss <= 1e-24 * scale2;
    let (r_squared, f_stat, f_prob) = if degenerate {
        (0.0, 0.0, 1.0)
    } else {
        let r2 = (1.0 - rss / tss).clamp(0.0, 1.0);
        let f = if rss > 0.0 {
            ((tss - rss) / df_model) / sigma2
        } else {
            f64::INFINITY
        };
        (r2, f.max(0.0), f_upper_tail(f.max(0.0), df_model, df_resid))
    };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / df_resid;

    Ok(RegressionResult {
        coefficients,
        std_errors,
        t_stats,
        p_values,
        f_stat,
        f_prob,
        r_squared,
        adj_r_squared,
        n_obs: n,
        residuals,
    })
}

/// `y = β0 + β1 x + β2 x²`.
pub fn fit_quadratic_ols(xs: &[f64], ys: &[f64]) -> Result<RegressionResult, RegressionError> {
    fit_polynomial_ols(xs, ys, 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predictor {
    TeamSize,
    ArtifactAge,
}

impl Predictor {
    pub const ALL: [Predictor; 2] = [Predictor::TeamSize, Predictor::ArtifactAge];

    pub fn name(self) -> &'static str {
        match self {
            Predictor::TeamSize => "team_size",
            Predictor::ArtifactAge => "artifact_age",
        }
    }

    pub fn value(self, row: &MetricsRow) -> f64 {
        match self {
            Predictor::TeamSize => row.n_nodes as f64,
            Predictor::ArtifactAge => row.age_months as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Response {
    AvgDegree,
    AvgClustering,
    AvgShortestPath,
    BetweennessCentralization,
}

impl Response {
    pub const ALL: [Response; 4] = [
        Response::AvgDegree,
        Response::AvgClustering,
        Response::AvgShortestPath,
        Response::BetweennessCentralization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Response::AvgDegree => "avg_degree",
            Response::AvgClustering => "avg_clustering",
            Response::AvgShortestPath => "avg_shortest_path",
            Response::BetweennessCentralization => "betweenness_centralization",
        }
    }

    pub fn value(self, row: &MetricsRow) -> f64 {
        match self {
            Response::AvgDegree => row.avg_degree,
            Response::AvgClustering => row.avg_clustering,
            Response::AvgShortestPath => row.avg_shortest_path,
            Response::BetweennessCentralization => row.betweenness_centralization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DesignSpec {
    pub predictor: Predictor,
    pub response: Response,
    pub category: String,
}

impl DesignSpec {
    pub fn model_name(&self) -> String {
        let x = self.predictor.name();
        format!("{} ~ {x} + {x}^2", self.response.name())
    }
}

impl fmt::Display for DesignSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.model_name(), self.category)
    }
}

/// Fits one table cell from the rows of `spec.category`.
pub fn run_table(rows: &[MetricsRow], spec: &DesignSpec) -> Result<RegressionResult, RegressionError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.category() == spec.category)
        .map(|r| (spec.predictor.value(r), spec.response.value(r)))
        .unzip();
    if xs.is_empty() {
        return Err(RegressionError::NoData);
    }
    fit_quadratic_ols(&xs, &ys)
}

/// `≪ 0.001*` below 0.001, otherwise six significant digits, starred when significant.
pub fn render_p(p: f64) -> String {
    if p < 0.001 {
        "≪ 0.001*".to_string()
    } else if p < SIGNIFICANCE {
        format!("{}*", sig6(p))
    } else {
        sig6(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableEntry {
    pub spec: DesignSpec,
    pub outcome: Result<RegressionResult, RegressionError>,
}

/// Every (category × response) cell for one predictor, categories in sorted order.
pub fn regression_table(rows: &[MetricsRow], predictor: Predictor, categories: &[String]) -> Vec<TableEntry> {
    let mut cats: Vec<&String> = categories.iter().collect();
    cats.sort();
    cats.dedup();
    let mut out = Vec::new();
    for response in Response::ALL {
        for cat in &cats {
            let spec = DesignSpec {
                predictor,
                response,
                category: (*cat).clone(),
            };
            let outcome = run_table(rows, &spec);
            out.push(TableEntry { spec, outcome });
        }
    }
    out
}

pub const REGRESSION_HEADER: [&str; 16] = [
    "model",
    "category",
    "n_obs",
    "beta0",
    "beta1",
    "beta2",
    "linear_p",
    "quadratic_p",
    "f_prob",
    "r_squared",
    "adj_r_squared",
    "linear_p_display",
    "quadratic_p_display",
    "f_prob_display",
    "status",
    "predictor",
];

pub fn write_regression_csv<W: Write>(out: W, entries: &[TableEntry]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(REGRESSION_HEADER)?;
    for e in entries {
        let mut record = vec![e.spec.model_name(), e.spec.category.clone()];
        match &e.outcome {
            Ok(r) => {
                record.push(r.n_obs.to_string());
                record.extend(r.coefficients.iter().map(|b| sig6(*b)));
                record.push(sig6(r.p_values[1]));
                record.push(sig6(r.p_values[2]));
                record.push(sig6(r.f_prob));
                record.push(sig6(r.r_squared));
                record.push(sig6(r.adj_r_squared));
                record.push(render_p(r.p_values[1]));
                record.push(render_p(r.p_values[2]));
                record.push(render_p(r.f_prob));
                record.push("ok".to_string());
            }
            Err(err) => {
                let n = match err {
                    RegressionError::InsufficientData { got, .. } => got.to_string(),
                    RegressionError::NoData => "0".to_string(),
                    _ => String::new(),
                };
                record.push(n);
                record.extend(std::iter::repeat_n(String::new(), 11));
                record.push(err.to_string());
            }
        }
        record.push(e.spec.predictor.name().to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incomplete_beta_examples() {
        for x in [0.0, 0.1, 0.37, 0.5, 0.93, 1.0] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x).unwrap() - x).abs() < 1e-12);
        }
        for a in [0.5, 1.0, 3.0, 17.5, 200.0] {
            assert!((regularized_incomplete_beta(a, a, 0.5).unwrap() - 0.5).abs() < 1e-10);
        }
        assert!((regularized_incomplete_beta(2.0, 3.0, 0.3).unwrap() - 0.3483).abs() < 1e-10);
        assert!(regularized_incomplete_beta(0.0, 1.0, 0.5).is_err());
        assert!(regularized_incomplete_beta(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..20 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-10, "n={n}");
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn distribution_tails() {
        // t = 2.228 is the two-sided 5% point for 10 df
        assert!((student_t_two_sided(2.228_138_851_986, 10.0) - 0.05).abs() < 1e-9);
        assert_eq!(student_t_two_sided(0.0, 5.0), 1.0);
        // F(2, 10) upper 5% point 4.102821
        assert!((f_upper_tail(4.102_821_015_130_4, 2.0, 10.0) - 0.05).abs() < 1e-9);
        assert_eq!(f_upper_tail(0.0, 2.0, 10.0), 1.0);
    }

    #[test]
    fn exact_linear_data() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 2.0 * x).collect();
        let r = fit_quadratic_ols(&xs, &ys).unwrap();
        assert!((r.coefficients[0] - 3.0).abs() < 1e-10);
        assert!((r.coefficients[1] - 2.0).abs() < 1e-10);
        assert!(r.coefficients[2].abs() < 1e-10);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let r = fit_quadratic_ols(&xs, &[0.1; 6]).unwrap();
        assert!(r.coefficients[1].abs() < 1e-12 && r.coefficients[2].abs() < 1e-12);
        assert_eq!(r.r_squared, 0.0);
        assert_eq!(r.f_prob, 1.0);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(
            fit_quadratic_ols(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(RegressionError::InsufficientData { needed: 4, got: 3 })
        );
        assert_eq!(
            fit_quadratic_ols(&[1.0, 1.0, 2.0, 2.0], &[1.0, 2.0, 3.0, 4.0]),
            Err(RegressionError::SingularDesign)
        );
        assert!(matches!(fit_quadratic_ols(&[1.0], &[]), Err(RegressionError::LengthMismatch(1, 0))));
    }

    #[test]
    fn p_rendering() {
        assert_eq!(render_p(0.0001), "≪ 0.001*");
        assert_eq!(render_p(0.012), "0.012*");
        assert_eq!(render_p(0.5), "0.5");
    }
}
