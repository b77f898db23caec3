use transfer_knn::distributions::closed_form_indices;
use transfer_knn::transfer::{
    estimate_index_with, markov_mass_bound, transfer_closed_form, transfer_monte_carlo,
    transfer_value, transfer_value_with, TransferOptions,
};
use transfer_knn::{DistributionFamily, TransferMethod};

fn pareto(a: f64, s: f64) -> DistributionFamily {
    DistributionFamily::pareto(a, s).unwrap()
}
fn exp(l: f64) -> DistributionFamily {
    DistributionFamily::exponential(l).unwrap()
}
fn quadrature() -> TransferOptions {
    TransferOptions {
        method: Some(TransferMethod::Quadrature),
        ..TransferOptions::default()
    }
}

fn closed_form_pairs() -> Vec<(DistributionFamily, DistributionFamily)> {
    vec![
        (pareto(1.0, 1.0), pareto(1.0, 1.0)),
        (exp(2.0), exp(1.0)),
        (pareto(2.0, 0.5), pareto(3.0, 0.5)),
        (exp(1.0), exp(3.0)),
    ]
}

#[test]
fn quadrature_agrees_with_closed_form() {
    for (p, q) in closed_form_pairs() {
        let g_star = closed_form_indices(&p, &q).unwrap().gamma_star;
        for i in 1..=9 {
            let g = 0.1 * i as f64 * g_star;
            let exact = transfer_closed_form(&p, &q, g).unwrap().unwrap();
            let num = transfer_value_with(&p, &q, g, &quadrature()).unwrap();
            assert!(num.converged, "{p:?} {q:?} {g}");
            let rel = (num.value - exact.value).abs() / exact.value;
            assert!(rel <= 1e-6, "{p:?} {q:?} gamma {g}: rel {rel}");
        }
    }
}

#[test]
fn unequal_pareto_scales_use_quadrature() {
    let ev = transfer_value(&pareto(1.0, 2.0), &pareto(2.0, 1.0), 0.3).unwrap();
    assert_eq!(ev.method, TransferMethod::Quadrature);
    assert!(ev.converged);
}

fn one_d_pairs() -> Vec<(DistributionFamily, DistributionFamily)> {
    let mut v = closed_form_pairs();
    v.push((pareto(1.0, 2.0), pareto(2.0, 1.0)));
    v.push((pareto(1.0, 1.0), exp(1.0)));
    v.push((
        DistributionFamily::uniform(0.0, 2.0).unwrap(),
        DistributionFamily::uniform(0.5, 1.5).unwrap(),
    ));
    v.push((
        DistributionFamily::log_pareto(1.0, 0.0).unwrap(),
        DistributionFamily::log_pareto(1.0, 2.0).unwrap(),
    ));
    v
}

#[test]
fn log_convex_and_interpolation_bound() {
    let grid: Vec<f64> = (0..=30).map(|i| i as f64 * 0.05).collect();
    for (p, q) in one_d_pairs() {
        for opts in [TransferOptions::default(), quadrature()] {
            let vals: Vec<(f64, f64)> = grid
                .iter()
                .map(|&g| transfer_value_with(&p, &q, g, &opts).unwrap())
                .filter(|e| e.converged)
                .map(|e| (e.gamma, e.value))
                .collect();
            assert_eq!(vals[0], (0.0, 1.0));
            for w in vals.windows(3) {
                let (g1, t1) = w[0];
                let (g2, t2) = w[1];
                let (g3, t3) = w[2];
                let lam = (g2 - g1) / (g3 - g1);
                assert!(
                    t2.ln() <= (1.0 - lam) * t1.ln() + lam * t3.ln() + 1e-8,
                    "{p:?} {q:?} at {g2}"
                );
            }
            for &(g, tg) in &vals {
                for &(s, ts) in vals.iter().filter(|(s, _)| *s >= g && *s > 0.0) {
                    assert!(
                        tg <= ts.powf(g / s) + 1e-8,
                        "{p:?} {q:?}: T({g}) > T({s})^(g/s)"
                    );
                }
            }
        }
    }
}

#[test]
fn markov_contract_on_grid() {
    for (p, q) in one_d_pairs() {
        for &g in &[0.0, 0.1, 0.2, 0.4] {
            for &t in &[1e-4, 1e-2, 0.1, 0.5, 1.0, 2.0] {
                match markov_mass_bound(&p, &q, g, t) {
                    Ok((lhs, rhs)) => {
                        assert!(lhs <= rhs + 1e-6, "{p:?} {q:?} g {g} t {t}: {lhs} > {rhs}")
                    }
                    Err(e) => panic!("{p:?} {q:?} g {g}: {e}"),
                }
            }
        }
    }
}

#[test]
fn index_brackets_contain_closed_forms() {
    let grid: Vec<f64> = (0..=60).map(|i| i as f64 * 0.05).collect();
    for (p, q) in closed_form_pairs() {
        let g_star = closed_form_indices(&p, &q).unwrap().gamma_star;
        for opts in [TransferOptions::default(), quadrature()] {
            let est = estimate_index_with(&p, &q, &grid, &opts).unwrap();
            assert!(
                est.lower_confirmed <= g_star && g_star <= est.upper_confirmed,
                "{p:?} {q:?}: {est:?}"
            );
        }
    }
}

#[test]
fn log_pareto_dichotomy() {
    // source x^-2 on [2, inf); targets with log exponent c = 2 and c = 0.5
    let p = DistributionFamily::log_pareto(1.0, 0.0).unwrap();
    let g_star = 0.5;
    let finite = transfer_value(
        &p,
        &DistributionFamily::log_pareto(1.0, 2.0).unwrap(),
        g_star,
    )
    .unwrap();
    assert!(finite.converged && finite.value.is_finite());
    let infinite = transfer_value(
        &p,
        &DistributionFamily::log_pareto(1.0, 0.5).unwrap(),
        g_star,
    )
    .unwrap();
    assert!(infinite.is_divergent());
}

#[test]
fn product_pareto_monte_carlo_matches_product_form() {
    let d = 2;
    let p = DistributionFamily::product_pareto(1.0, 1.0, d).unwrap();
    let q = DistributionFamily::product_pareto(2.0, 1.0, d).unwrap();
    let g = 0.3;
    let one_d = transfer_closed_form(&pareto(1.0, 1.0), &pareto(2.0, 1.0), g)
        .unwrap()
        .unwrap()
        .value;
    let ev = transfer_value(&p, &q, g).unwrap();
    assert_eq!(ev.method, TransferMethod::MonteCarlo);
    assert!(
        (ev.value - one_d.powi(d as i32)).abs() < 4.0 * ev.error_estimate + 1e-3,
        "{ev:?} vs {}",
        one_d.powi(2)
    );
    // gamma* = 2 / (1 + 1) = 1
    assert!(transfer_monte_carlo(&p, &q, 1.0, 1000, 1).is_divergent());
}
