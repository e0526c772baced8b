use brwlab::barrier::{closed_form_s, euler_curve};
use brwlab::brw::{count_below_barrier, exact_offset};
use brwlab::counter::{derive, unit_f64};
use brwlab::harness::csv::{fmt_f64, parse_f64};
use brwlab::ldtool::{ld_profile, offset_constant, rate_function};
use brwlab::{StepDistribution, TreeRandomness, TubeRegion};
use proptest::prelude::*;

fn any_dist() -> impl Strategy<Value = StepDistribution> {
    prop_oneof![
        (-3.0..3.0f64, 0.1..5.0f64).prop_map(|(m, v)| StepDistribution::gaussian(m, v).unwrap()),
        (-3.0..0.0f64, 0.1..3.0f64, 0.05..0.95f64)
            .prop_map(|(a, w, p)| StepDistribution::two_point(a, a + w, p).unwrap()),
        prop::collection::vec((-4.0..4.0f64, 0.05..1.0f64), 3..6).prop_filter_map("distinct atoms", |atoms| {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            let atoms: Vec<(f64, f64)> = atoms.into_iter().map(|(v, w)| (v, w / total)).collect();
            StepDistribution::discrete(atoms).ok().filter(|d| d.variance() > 1e-3)
        }),
    ]
}

/// Laws with both tilt parameters for b = 2: a Gaussian or a three-point law
/// whose extreme atoms each have mass below 1/4, so b ≤ 4 also works.
fn profiled_dist() -> impl Strategy<Value = StepDistribution> {
    prop_oneof![
        (-2.0..2.0f64, 0.2..4.0f64).prop_map(|(m, v)| StepDistribution::gaussian(m, v).unwrap()),
        (0.5..2.0f64, 0.5..2.0f64, 0.05..0.2f64, 0.05..0.2f64).prop_map(|(l, r, pl, pr)| {
            StepDistribution::discrete(vec![(-l, pl), (0.0, 1.0 - pl - pr), (r, pr)]).unwrap()
        }),
    ]
}

fn centered_gauss() -> StepDistribution {
    ld_profile(&StepDistribution::gaussian(0.0, 1.0).unwrap(), 2).unwrap().centered
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_mgf_vanishes_at_zero(d in any_dist()) {
        prop_assert_eq!(d.log_mgf(0.0), 0.0);
    }

    #[test]
    fn log_mgf_convex(d in any_dist(), l1 in -3.0..3.0f64, gap1 in 0.01..2.0f64, gap2 in 0.01..2.0f64) {
        let (l2, l3) = (l1 + gap1, l1 + gap1 + gap2);
        let t = gap1 / (gap1 + gap2);
        let chord = (1.0 - t) * d.log_mgf(l1) + t * d.log_mgf(l3);
        prop_assert!(d.log_mgf(l2) <= chord + 1e-12 * (1.0 + chord.abs()));
        prop_assert!(d.log_mgf_derivs(l2).2 > 0.0);
    }

    #[test]
    fn tilt_composes(d in any_dist(), a in -1.5..1.5f64, b in -1.5..1.5f64) {
        let twice = d.tilt(a).tilt(b);
        let once = d.tilt(a + b);
        for i in -10..=10 {
            let l = i as f64 * 0.2;
            let (x, y) = (twice.log_mgf(l), once.log_mgf(l));
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()), "λ={}: {} vs {}", l, x, y);
        }
    }

    #[test]
    fn tilted_mean_is_slope(d in any_dist(), a in -2.0..2.0f64) {
        let slope = d.log_mgf_derivs(a).1;
        prop_assert!((d.tilt(a).mean() - slope).abs() <= 1e-9 * (1.0 + slope.abs()));
    }

    #[test]
    fn profile_duality(d in profiled_dist()) {
        let p = ld_profile(&d, 2).unwrap();
        prop_assert!((rate_function(&d, p.min_speed) - 2f64.ln()).abs() < 1e-8);
        prop_assert!((rate_function(&d, p.max_speed) - 2f64.ln()).abs() < 1e-8);
        prop_assert!(p.lambda_minus < 0.0 && p.lambda_plus > 0.0);
        prop_assert!(p.tilted().mean().abs() < 1e-9);
        prop_assert!((p.sigma_q_sq - p.tilted().variance()).abs() < 1e-9 * p.sigma_q_sq.max(1.0));
    }

    #[test]
    fn centering_is_idempotent(d in profiled_dist(), b in 2u32..5) {
        let p = ld_profile(&d, b).unwrap();
        let again = ld_profile(&p.centered, b).unwrap();
        prop_assert!(again.min_speed.abs() < 1e-9);
        prop_assert!((again.lambda_minus - p.lambda_minus).abs() < 1e-9);
        prop_assert!((again.l0 - p.l0).abs() < 1e-9);
    }

    #[test]
    fn offset_constant_monotone(s in 0.1..5.0f64, ds in 0.01..1.0f64, lm in -4.0..-0.1f64, dl in 0.01..1.0f64) {
        prop_assert!(offset_constant(s + ds, lm) > offset_constant(s, lm));
        prop_assert!(offset_constant(s, lm - dl) < offset_constant(s, lm));
    }

    #[test]
    fn euler_end_below_closed_forms(excess in 0.05..2.0f64, delta in 0.001..1.0f64, inv in 10usize..400) {
        let p = ld_profile(&StepDistribution::gaussian(0.0, 1.0).unwrap(), 2).unwrap();
        let l2 = p.l0 + excess;
        let c = euler_curve(&p, l2, delta, inv).unwrap();
        let a = closed_form_s(l2 + delta, p.sigma_q_sq, p.lambda_minus, 1.0);
        let b = closed_form_s(l2, p.sigma_q_sq, p.lambda_minus, 1.0);
        prop_assert!(c.s[inv] < a && a < b && b < l2);
        prop_assert!(c.w.iter().all(|&w| w >= delta));
    }

    #[test]
    fn closed_form_increasing_convex(excess in 0.01..3.0f64) {
        let p = ld_profile(&StepDistribution::gaussian(0.0, 1.0).unwrap(), 2).unwrap();
        let alpha = p.l0 + excess;
        let s: Vec<f64> = (0..=100).map(|i| closed_form_s(alpha, 1.0, p.lambda_minus, i as f64 / 100.0)).collect();
        let d: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
        prop_assert!(d.iter().all(|&x| x > 0.0));
        prop_assert!(d.windows(2).all(|w| w[1] > w[0] - 1e-15));
    }

    #[test]
    fn count_monotone_in_barrier(seed in any::<u64>(), lo in -1.0..6.0f64, gap in 0.0..4.0f64) {
        let d = centered_gauss();
        let rand = TreeRandomness::new(seed, 2);
        let a = count_below_barrier(&d, &rand, 12, lo, u64::MAX);
        let b = count_below_barrier(&d, &rand, 12, lo + gap, u64::MAX);
        prop_assert!(a.count <= b.count);
    }

    #[test]
    fn count_brackets_offset(seed in any::<u64>(), n in 1usize..14, b in 2usize..4) {
        let d = centered_gauss();
        let rand = TreeRandomness::new(seed, b);
        let r = exact_offset(&d, &rand, n, u64::MAX);
        let tiny = 1e-9 * r.l_n.abs().max(1.0);
        prop_assert_eq!(count_below_barrier(&d, &rand, n, r.l_n - tiny, u64::MAX).count, 0);
        prop_assert!(count_below_barrier(&d, &rand, n, r.l_n + tiny, u64::MAX).count >= 1);
    }

    #[test]
    fn h2_increases_when_narrowed(w1 in 0.1..5.0f64, w2 in 0.1..5.0f64, cut in 0.01..0.9f64, t in 0.05..0.95f64) {
        let g = TubeRegion::new(vec![0.0, t, 1.0], vec![0.0, 0.0], vec![w1, w2]).unwrap();
        let narrower = TubeRegion::new(vec![0.0, t, 1.0], vec![0.0, 0.0], vec![w1 * (1.0 - cut), w2]).unwrap();
        prop_assert!(narrower.h2() > g.h2());
        prop_assert!(g.h2_widened(cut) < g.h2());
    }

    #[test]
    fn uniforms_open(word in any::<u64>()) {
        let u = unit_f64(word);
        prop_assert!(u > 0.0 && u < 1.0);
    }

    #[test]
    fn float_format_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(parse_f64(&fmt_f64(x)), Some(x));
    }

    #[test]
    fn parse_display_round_trip(d in any_dist(), shift in -2.0..2.0f64) {
        let d = d.with_shift(shift);
        let back: StepDistribution = d.to_string().parse().unwrap();
        prop_assert_eq!(back, d);
    }
}

#[test]
fn gaussian_scale_covariance() {
    let base = ld_profile(&StepDistribution::gaussian(0.0, 1.0).unwrap(), 2).unwrap();
    for sigma in [0.5, 1.0, 2.0] {
        let p = ld_profile(&StepDistribution::gaussian(0.0, sigma * sigma).unwrap(), 2).unwrap();
        assert!((p.lambda_minus * sigma - base.lambda_minus).abs() < 1e-10);
        assert!((p.min_speed / sigma - base.min_speed).abs() < 1e-10);
    }
}

#[test]
fn sample_mean_matches_slope_at_zero() {
    let laws = [
        StepDistribution::gaussian(0.3, 2.0).unwrap(),
        StepDistribution::two_point(-1.0, 2.0, 0.3).unwrap(),
        StepDistribution::discrete(vec![(-1.0, 0.2), (0.0, 0.6), (1.5, 0.2)]).unwrap(),
    ];
    for (i, d) in laws.iter().enumerate() {
        let n = 1_000_000u64;
        let (mut s, mut s2) = (0.0, 0.0);
        for k in 0..n {
            let x = d.sample(unit_f64(derive(i as u64, k)));
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let want = d.log_mgf_derivs(0.0).1;
        assert!((mean - want).abs() <= 4.0 * se, "{d}: {mean} vs {want}");
    }
}
