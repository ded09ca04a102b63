use hybridclust::functional::{bhattacharyya_coeff, gauss_bhat_closed, gauss_kl_closed, kl_information, IntegrationContext};
use hybridclust::mixture::{GaussianComponent, MixtureDensity};

const GAPS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];
const SDS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

fn uni(m: f64, sd: f64) -> (GaussianComponent, MixtureDensity) {
    let g = GaussianComponent::univariate(m, sd).unwrap();
    (g.clone(), MixtureDensity::single(g))
}

#[test]
fn closed_forms_match_quadrature_on_grid() {
    let ctx = IntegrationContext::quadrature();
    let mut checked = 0;
    for gap in GAPS {
        for sa in SDS {
            for sb in SDS {
                let (ga, pa) = uni(0.0, sa);
                let (gb, pb) = uni(gap, sb);
                let kl = gauss_kl_closed(&ga, &gb).unwrap();
                let klq = kl_information(&pa, &pb, &ctx).unwrap().value;
                assert!((kl - klq).abs() < 1e-6, "KL gap {gap} sd {sa}/{sb}: {kl} vs {klq}");
                let bh = gauss_bhat_closed(&ga, &gb).unwrap();
                let bhq = -bhattacharyya_coeff(&pa, &pb, &ctx).unwrap().value.ln();
                assert!((bh - bhq).abs() < 1e-6, "Bhat gap {gap} sd {sa}/{sb}: {bh} vs {bhq}");
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 125);
}

#[test]
fn mode_rate_values() {
    let ctx = IntegrationContext::quadrature();
    let (_, narrow) = uni(0.0, 0.5);
    let (_, wide) = uni(0.0, 1.0);
    let a = kl_information(&narrow, &wide, &ctx).unwrap().value;
    let b = kl_information(&wide, &narrow, &ctx).unwrap().value;
    assert!((a - 0.318_147).abs() < 1e-6, "{a}");
    assert!((b - 0.806_853).abs() < 1e-6, "{b}");
}

#[test]
fn two_dimensional_closed_forms_match_quadrature() {
    let ctx = IntegrationContext::quadrature();
    let a = GaussianComponent::from_parts(vec![0.0, 0.0], &[1.0, 0.3, 0.3, 0.5]).unwrap();
    let b = GaussianComponent::from_parts(vec![1.0, -0.5], &[2.0, -0.4, -0.4, 1.0]).unwrap();
    let (pa, pb) = (MixtureDensity::single(a.clone()), MixtureDensity::single(b.clone()));
    let kl = kl_information(&pa, &pb, &ctx).unwrap().value;
    assert!((kl - gauss_kl_closed(&a, &b).unwrap()).abs() < 1e-6);
    let rho = bhattacharyya_coeff(&pa, &pb, &ctx).unwrap().value;
    assert!((-rho.ln() - gauss_bhat_closed(&a, &b).unwrap()).abs() < 1e-6);
}

#[test]
fn importance_sampling_agrees_in_two_dimensions() {
    let a = GaussianComponent::from_parts(vec![0.0, 0.0], &[1.0, 0.3, 0.3, 0.5]).unwrap();
    let b = GaussianComponent::from_parts(vec![1.0, -0.5], &[2.0, -0.4, -0.4, 1.0]).unwrap();
    let (pa, pb) = (MixtureDensity::single(a.clone()), MixtureDensity::single(b.clone()));
    let est = kl_information(&pa, &pb, &IntegrationContext::importance(100_000, 3)).unwrap();
    let exact = gauss_kl_closed(&a, &b).unwrap();
    assert!((est.value - exact).abs() < 4.0 * est.std_error + 1e-3, "{} ± {} vs {exact}", est.value, est.std_error);
}
