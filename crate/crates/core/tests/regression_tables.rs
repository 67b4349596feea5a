use cocreate::ingest::{ArticleRef, Category};
use cocreate::metrics::MetricsRow;
use cocreate::regression::{
    fit_polynomial_ols, fit_quadratic_ols, regression_table, run_table, DesignSpec, Predictor, RegressionError,
    Response,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn row(category: &str, window: usize, n_nodes: usize, age: u32, degree: f64) -> MetricsRow {
    MetricsRow {
        article: ArticleRef::new("Some Article", Category::parse(category).unwrap()).unwrap(),
        window_index: window,
        n_nodes,
        n_edges: n_nodes,
        avg_degree: degree,
        avg_clustering: 0.5,
        avg_shortest_path: 1.5,
        betweenness_centralization: 0.1,
        age_months: age,
        edge_retention: 1.0,
    }
}

fn spec(predictor: Predictor, response: Response, category: &str) -> DesignSpec {
    DesignSpec {
        predictor,
        response,
        category: category.to_string(),
    }
}

// Reference values from statsmodels 0.14 OLS on the same data.
#[test]
fn matches_reference_fit() {
    let xs = [3.0, 4.0, 4.0, 5.0, 6.0, 6.0, 7.0, 8.0, 9.0, 11.0];
    let ys = [2.1, 2.9, 2.6, 3.4, 3.3, 3.9, 3.6, 3.8, 3.5, 3.1];
    let fit = fit_quadratic_ols(&xs, &ys).unwrap();
    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * b.abs().max(1e-300);
    let beta = [-0.4825268817204289, 1.0959005376344066, -0.070676523297491];
    let se = [0.5161636490270237, 0.16178595578025526, 0.01156008288546051];
    let p = [3.8099264571908564e-01, 2.593242938898339e-4, 4.8443360844474987e-04];
    for k in 0..3 {
        assert!(close(fit.coefficients[k], beta[k], 1e-10), "beta{k} = {}", fit.coefficients[k]);
        assert!(close(fit.std_errors[k], se[k], 1e-10), "se{k} = {}", fit.std_errors[k]);
        assert!(close(fit.p_values[k], p[k], 1e-8), "p{k} = {}", fit.p_values[k]);
    }
    assert!(close(fit.f_stat, 28.026092377362804, 1e-10));
    assert!(close(fit.f_prob, 0.00045592420760693785, 1e-8));
    assert!(close(fit.r_squared, 0.888980849319811, 1e-10));
    assert!(close(fit.adj_r_squared, 0.8572610919826141, 1e-10));
    assert_eq!(fit.n_obs, 10);
}

#[test]
fn planted_quadratic_in_team_size() {
    let rows: Vec<MetricsRow> = (4..16)
        .map(|n| {
            let x = n as f64;
            row("politics", n, n, 0, 1.0 + 0.5 * x - 0.02 * x * x)
        })
        .collect();
    let fit = run_table(&rows, &spec(Predictor::TeamSize, Response::AvgDegree, "politics")).unwrap();
    assert!((fit.coefficients[2] + 0.02).abs() < 1e-10);
    assert!((fit.coefficients[1] - 0.5).abs() < 1e-9);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    assert!(fit.p_values[2] < 0.05);
}

#[test]
fn noisy_planted_quadratic_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rows: Vec<MetricsRow> = (0..60)
        .map(|k| {
            let n = 4 + k % 20;
            let x = n as f64;
            row("tech", k, n, 0, 2.0 + 0.8 * x - 0.03 * x * x + rng.gen_range(-0.2..0.2))
        })
        .collect();
    let fit = run_table(&rows, &spec(Predictor::TeamSize, Response::AvgDegree, "tech")).unwrap();
    assert!(fit.coefficients[2] < 0.0);
    assert!(fit.p_values[2] < 0.05, "p = {}", fit.p_values[2]);
    assert!(fit.f_prob < 0.001);
}

#[test]
fn null_age_effect_is_rarely_significant() {
    let mut rejected = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<MetricsRow> = (0..40)
            .map(|k| row("disasters", k, 5, rng.gen_range(0..60), rng.gen_range(1.0..4.0)))
            .collect();
        let fit = run_table(&rows, &spec(Predictor::ArtifactAge, Response::AvgDegree, "disasters")).unwrap();
        if fit.f_prob <= 0.05 {
            rejected += 1;
        }
    }
    assert!(rejected <= 10, "{rejected} of 100 null fits were significant");
}

#[test]
fn missing_category_is_no_data() {
    let rows = vec![row("politics", 0, 5, 0, 2.0)];
    let err = run_table(&rows, &spec(Predictor::TeamSize, Response::AvgDegree, "tech")).unwrap_err();
    assert_eq!(err, RegressionError::NoData);
    assert_eq!(
        run_table(&[], &spec(Predictor::ArtifactAge, Response::AvgClustering, "politics")).unwrap_err(),
        RegressionError::NoData
    );
}

#[test]
fn too_few_distinct_predictor_values_is_singular() {
    let rows: Vec<MetricsRow> = (0..6).map(|k| row("politics", k, 4 + k % 2, 0, k as f64)).collect();
    let err = run_table(&rows, &spec(Predictor::TeamSize, Response::AvgDegree, "politics")).unwrap_err();
    assert_eq!(err, RegressionError::SingularDesign);
}

#[test]
fn table_covers_every_response_and_category() {
    let rows: Vec<MetricsRow> = (0..8).map(|k| row("politics", k, 4 + k, k as u32 * 6, k as f64)).collect();
    let cats = vec!["tech".to_string(), "politics".to_string(), "politics".to_string()];
    let table = regression_table(&rows, Predictor::ArtifactAge, &cats);
    assert_eq!(table.len(), 8);
    assert_eq!(table[0].spec.category, "politics");
    assert_eq!(table[1].spec.category, "tech");
    assert!(table[0].outcome.is_ok());
    assert_eq!(table[1].outcome, Err(RegressionError::NoData));
}

fn design() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (6usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-50.0f64..50.0, n),
        )
    })
}

fn spread(xs: &[f64]) -> bool {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup_by(|a, b| (*a - *b).abs() < 0.05);
    sorted.len() >= 4
}

proptest! {
    #[test]
    fn residuals_are_orthogonal_to_the_design((xs, ys) in design()) {
        prop_assume!(spread(&xs));
        let fit = fit_quadratic_ols(&xs, &ys).unwrap();
        let scale: f64 = ys.iter().map(|y| y.abs()).sum::<f64>().max(1.0);
        for power in 0..3 {
            let dot: f64 = xs.iter().zip(&fit.residuals).map(|(x, r)| x.powi(power) * r).sum();
            let norm: f64 = xs.iter().map(|x| x.powi(power).abs()).sum::<f64>();
            prop_assert!(dot.abs() <= 1e-8 * scale * norm.max(1.0), "power {}: {}", power, dot);
        }
    }

    #[test]
    fn quadratic_explains_at_least_as_much_as_linear((xs, ys) in design()) {
        prop_assume!(spread(&xs));
        let quad = fit_quadratic_ols(&xs, &ys).unwrap();
        let lin = fit_polynomial_ols(&xs, &ys, 1).unwrap();
        prop_assert!(quad.r_squared >= lin.r_squared - 1e-10);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&quad.r_squared));
    }

    #[test]
    fn p_values_ignore_affine_rescaling_of_y(
        (xs, ys) in design(),
        a in prop_oneof![-20.0f64..-0.1, 0.1f64..20.0],
        b in -100.0f64..100.0,
    ) {
        prop_assume!(spread(&xs));
        let base = fit_quadratic_ols(&xs, &ys).unwrap();
        let moved: Vec<f64> = ys.iter().map(|y| a * y + b).collect();
        let fit = fit_quadratic_ols(&xs, &moved).unwrap();
        for k in 1..3 {
            prop_assert!((fit.p_values[k] - base.p_values[k]).abs() <= 1e-7, "p{}: {} vs {}", k, fit.p_values[k], base.p_values[k]);
            prop_assert!((fit.coefficients[k] - a * base.coefficients[k]).abs() <= 1e-7 * (a * base.coefficients[k]).abs().max(1.0));
        }
        prop_assert!((fit.f_prob - base.f_prob).abs() <= 1e-7);
        prop_assert!((fit.r_squared - base.r_squared).abs() <= 1e-9);
    }
}
