use lerchkit::data::FrequencyTable;
use lerchkit::dist::{LerchDist, LerchParams, Truncation};
use lerchkit::gof::{pearson_chi2, ClassGroup, GroupingSpec};
use lerchkit::sampler::{first_guess, Direction, SamplerState};
use proptest::prelude::*;

/// Groups consecutive classes from the left until each holds ≥ 5 expected
/// draws; the last group takes the whole upper tail.
fn grouping_for(d: &LerchDist, n: f64) -> GroupingSpec {
    let a = d.truncation().lower;
    let b = d.truncation().upper;
    let mut groups = Vec::new();
    let mut lo = a;
    let mut acc = 0.0;
    let mut x = a;
    loop {
        acc += n * d.pmf(x as i64);
        let rest = n * d.survival(x as i64 + 1).unwrap();
        if b == Some(x) || rest < 5.0 {
            groups.push(ClassGroup { lo, hi: x });
            break;
        }
        if acc >= 5.0 {
            groups.push(ClassGroup { lo, hi: x });
            lo = x + 1;
            acc = 0.0;
        }
        x += 1;
    }
    GroupingSpec::new(groups, true).unwrap()
}

fn exactness_p_value(d: LerchDist, seed: u64, n: usize) -> f64 {
    let xs = SamplerState::seeded(d.clone(), seed).sample_n(n).unwrap();
    let table = FrequencyTable::from_samples("draws", &xs).unwrap();
    let mut g = grouping_for(&d, n as f64);
    // tabulated classes above the last group belong to the folded tail
    let top = table.max_class();
    let last = g.groups.len() - 1;
    if g.groups[last].hi < top {
        g.groups[last].hi = top;
    }
    pearson_chi2(&table, &d, &g, 0).unwrap().p_value
}

#[test]
fn draws_pass_chi2_exactness() {
    let cases = [
        (LerchParams::new(0.5, 2.0, 1.0), Truncation::NONE),
        (LerchParams::new(0.913315, 2.37621, 9.63785), Truncation::NONE),
        (LerchParams::new(0.00773867, -8.26894, 1.11633), Truncation::NONE),
        (LerchParams::new(0.7, 0.0, 3.0), Truncation::zero_truncated()),
        (LerchParams::new(0.219158, -0.214704, -0.998437), Truncation::new(1, Some(6)).unwrap()),
    ];
    for (i, (p, t)) in cases.into_iter().enumerate() {
        let d = LerchDist::new(p, t).unwrap();
        let pv = exactness_p_value(d, 1000 + i as u64, 100_000);
        assert!(pv > 0.001, "case {i}: p = {pv}");
    }
}

#[test]
fn empirical_cdf_within_kolmogorov_band() {
    let d = LerchDist::untruncated(0.5, 2.0, 1.0).unwrap();
    let n = 100_000;
    let mut xs = SamplerState::seeded(d.clone(), 99).sample_n(n).unwrap();
    xs.sort_unstable();
    let mut worst: f64 = 0.0;
    let mut i = 0;
    for x in 0..=xs[n - 1] {
        while i < n && xs[i] <= x {
            i += 1;
        }
        worst = worst.max((i as f64 / n as f64 - d.cdf(x).unwrap()).abs());
    }
    assert!(worst <= 3.0 * 1.36 / (n as f64).sqrt(), "{worst}");
}

#[test]
fn sowbug_fit_sample_mean() {
    let d = LerchDist::untruncated(0.913315, 2.37621, 9.63785).unwrap();
    let n = 100_000;
    let xs = SamplerState::seeded(d.clone(), 5).sample_n(n).unwrap();
    let mean = xs.iter().sum::<i64>() as f64 / n as f64;
    let sd = d.variance().unwrap().sqrt();
    assert!((mean - d.mean().unwrap()).abs() <= 4.0 * sd / (n as f64).sqrt());
}

#[test]
fn geometric_draws_invert_in_closed_form() {
    let z: f64 = 0.37;
    let d = LerchDist::untruncated(z, 0.0, 2.5).unwrap();
    let mut st = SamplerState::seeded(d, 0);
    for k in 1..2000 {
        let u = k as f64 / 2000.0;
        let want = ((-u).ln_1p() / z.ln()).ceil() as i64 - 1;
        assert_eq!(st.invert(u).unwrap(), want.max(0));
    }
    assert_eq!(st.stats().steps_up + st.stats().steps_down, 0);
}

#[test]
fn empty_request_draws_nothing() {
    let d = LerchDist::untruncated(0.5, 1.0, 1.0).unwrap();
    assert!(SamplerState::seeded(d, 1).sample_n(0).unwrap().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn envelope_orders_cdf_by_sign_of_s(z in 0.05f64..0.95, s in -6.0f64..6.0, v in 0.05f64..15.0) {
        let d = LerchDist::untruncated(z, s, v).unwrap();
        for x in 0..=60i64 {
            let f = d.cdf(x).unwrap();
            let h = 1.0 - z.powi(x as i32 + 1);
            // F ≥ H for s > 0 and F ≤ H for s < 0
            prop_assert!((f - h) * s.signum() >= -1e-12, "x={x}: F={f} H={h}");
        }
    }

    #[test]
    fn search_never_moves_against_direction(z in 0.05f64..0.95, s in -6.0f64..6.0, v in 0.05f64..15.0, seed in any::<u64>()) {
        let d = LerchDist::untruncated(z, s, v).unwrap();
        let mut st = SamplerState::seeded(d, seed);
        st.sample_n(300).unwrap();
        let stats = st.stats();
        match st.direction() {
            Direction::Down => prop_assert_eq!(stats.steps_up, 0),
            Direction::Up => prop_assert_eq!(stats.steps_down, 0),
            Direction::Exact => prop_assert_eq!(stats.steps_up + stats.steps_down, 0),
            Direction::Both => unreachable!(),
        }
    }

    #[test]
    fn first_guess_brackets_the_answer(z in 0.05f64..0.95, s in -6.0f64..6.0, v in 0.05f64..15.0, u in 0.0001f64..0.9999) {
        let d = LerchDist::untruncated(z, s, v).unwrap();
        let x0 = first_guess(&d, u);
        let x = d.quantile(u).unwrap();
        if s > 0.0 {
            prop_assert!(x0 >= x);
        } else if s < 0.0 {
            prop_assert!(x0 <= x);
        } else {
            prop_assert_eq!(x0, x);
        }
    }

    #[test]
    fn seeded_streams_repeat(seed in any::<u64>()) {
        let d = LerchDist::untruncated(0.6, -1.0, 2.0).unwrap();
        let a = SamplerState::seeded(d.clone(), seed).sample_n(50).unwrap();
        let b = SamplerState::seeded(d, seed).sample_n(50).unwrap();
        prop_assert_eq!(a, b);
    }
}
