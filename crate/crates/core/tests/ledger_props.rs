use proptest::prelude::*;
use selab_core::ledger::{brute_force_stats, dispersion_bound};
use selab_core::sources::{take_sites, SourceSpec};
use selab_core::{LatticeSite, LocalTimeLedger};

fn sites_strategy() -> impl Strategy<Value = (usize, Vec<Vec<i64>>)> {
    (1usize..=3).prop_flat_map(|d| {
        (
            Just(d),
            prop::collection::vec(prop::collection::vec(-4i64..=4, d), 1..300),
        )
    })
}

fn to_sites(raw: &[Vec<i64>]) -> Vec<LatticeSite> {
    raw.iter().map(|c| LatticeSite::new(c).unwrap()).collect()
}

fn ledger(d: usize, sites: &[LatticeSite]) -> LocalTimeLedger {
    let mut l = LocalTimeLedger::new(d).unwrap();
    l.extend(sites.iter().copied()).unwrap();
    l
}

proptest! {
    #[test]
    fn streaming_equals_brute((d, raw) in sites_strategy()) {
        let sites = to_sites(&raw);
        let l = ledger(d, &sites);
        let b = brute_force_stats(&sites).unwrap();
        prop_assert_eq!(l.self_intersections(), b.self_intersections);
        prop_assert_eq!(l.max_count(), b.max_count);
        prop_assert_eq!(l.range() as usize, b.counts.len());
        for (s, &c) in &b.counts {
            prop_assert_eq!(l.count(s), c);
        }
        prop_assert!(l.verify_rescan());
    }

    #[test]
    fn elementary_inequalities((d, raw) in sites_strategy()) {
        let sites = to_sites(&raw);
        let l = ledger(d, &sites);
        let (n, m, v) = (l.n() as u128, l.max_count() as u128, l.self_intersections());
        prop_assert!(n <= v && v <= n * n);
        prop_assert!(m * m <= v && v <= n * m);
        prop_assert!(l.range_lower_bound().le_integer(v));
        let r = l.m2_over_v();
        prop_assert!(r > 0.0 && r <= 1.0);
    }

    #[test]
    fn subset_bound_below_v((d, raw) in sites_strategy(), pick in prop::collection::vec(0usize..300, 1..20)) {
        let sites = to_sites(&raw);
        let l = ledger(d, &sites);
        let subset: Vec<LatticeSite> = pick.iter().map(|&i| sites[i % sites.len()]).collect();
        prop_assert!(l.subset_lower_bound(&subset).unwrap().le_integer(l.self_intersections()));
    }

    #[test]
    fn dispersion_bound_below_v(raw in prop::collection::vec(-50i64..=50, 1..400)) {
        let sites: Vec<LatticeSite> = raw.iter().map(|&x| LatticeSite::scalar(x)).collect();
        let l = ledger(1, &sites);
        let db = dispersion_bound(&raw).unwrap();
        prop_assert!(db.bound <= l.self_intersections() as f64 * (1.0 + 1e-12));
        if let (Some(a), Some(b)) = (db.one_ninth_bound, db.nine_eightieths_bound) {
            prop_assert!(b <= l.self_intersections() as f64 * (1.0 + 1e-12));
            prop_assert!(a > 0.0);
        }
    }

    #[test]
    fn superadditive_split((d, raw) in sites_strategy(), cut in 0usize..300) {
        let sites = to_sites(&raw);
        let cut = cut % (sites.len() + 1);
        let whole = ledger(d, &sites).self_intersections();
        let (a, b) = sites.split_at(cut);
        let va = if a.is_empty() { 0 } else { ledger(d, a).self_intersections() };
        let vb = if b.is_empty() { 0 } else { ledger(d, b).self_intersections() };
        prop_assert!(whole >= va + vb);
    }

    #[test]
    fn snapshots_are_monotone(seed in any::<u64>(), d in 1usize..=3) {
        let mut src = SourceSpec::SimpleWalk { dim: d }.build(seed).unwrap();
        let sites = take_sites(&mut *src, 500).unwrap();
        let mut l = LocalTimeLedger::new(d).unwrap();
        let mut prev = l.snapshot();
        for s in sites {
            l.record(s).unwrap();
            let cur = l.snapshot();
            prop_assert!(cur.self_intersections > prev.self_intersections);
            prop_assert!(cur.max_count >= prev.max_count && cur.range >= prev.range);
            prop_assert!(cur.pqd_partial_sum >= prev.pqd_partial_sum);
            prev = cur;
        }
    }
}
