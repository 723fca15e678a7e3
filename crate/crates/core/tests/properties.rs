use std::collections::BTreeMap;

use twtl::monitor::{eta_interval, rho_interval, EtaExtremes, Monitor, MonitorOptions, Prefix};
use twtl::oracle::{
    completion_bounds, oracle_bool, oracle_eta, oracle_rho, InstanceGen, ValueGrid,
};
use twtl::semantics::{bool_sat, eta, rho, EvalConfig};
use twtl::{horizon, Word};

const TOL: f64 = 1e-9;

#[test]
fn rho_and_eta_are_sound() {
    let mut g = InstanceGen::new(1);
    let cfg = EvalConfig::default();
    for n in 0..2000 {
        let inst = g.instance();
        let t = g.table();
        let sat = bool_sat(&inst.word, &inst.formula, t).unwrap();
        let r = rho(&inst.word, &inst.formula, t, &cfg).unwrap();
        let e = eta(&inst.word, &inst.formula, t, &cfg).unwrap();
        let ctx = || format!("#{n}: {} on {:?}", inst.formula, inst.word);
        assert!(r <= 0.0 || sat, "{}", ctx());
        assert!(r >= 0.0 || !sat, "{}", ctx());
        assert!((-1.0..=1.0).contains(&e), "{}", ctx());
        if r.abs() > TOL {
            assert_eq!(e > 0.0, r > 0.0, "{} rho={r} eta={e}", ctx());
            assert_eq!(e < 0.0, r < 0.0, "{} rho={r} eta={e}", ctx());
        }
    }
}

#[test]
fn memoized_matches_oracle() {
    let mut g = InstanceGen::new(2).with_max_len(8);
    let cfg = EvalConfig::default();
    for _ in 0..1000 {
        let inst = g.instance();
        let t = g.table();
        assert_eq!(
            bool_sat(&inst.word, &inst.formula, t).unwrap(),
            oracle_bool(&inst.word, &inst.formula, t).unwrap()
        );
        let r = rho(&inst.word, &inst.formula, t, &cfg).unwrap();
        assert!((r - oracle_rho(&inst.word, &inst.formula, t, &cfg).unwrap()).abs() <= TOL);
        let e = eta(&inst.word, &inst.formula, t, &cfg).unwrap();
        assert!((e - oracle_eta(&inst.word, &inst.formula, t).unwrap()).abs() <= TOL);
    }
}

#[test]
fn monitor_intervals_contain_grid_completions() {
    let mut g = InstanceGen::new(3).with_max_horizon(3).with_max_depth(3);
    let cfg = EvalConfig::default();
    let grid = ValueGrid::uniform(["x", "y"], &[0.0, 4.5, 8.0]).unwrap();
    assert!(grid.covers_bounds(&InstanceGen::standard_table()));
    for _ in 0..40 {
        let f = g.formula_over(&["x"]);
        let total = horizon(&f, 1.0).value() as usize + 1;
        let word = g.word_over(&["x"], total);
        let t = g.table().clone();
        let mut prev: Option<(twtl::RobustnessInterval, twtl::RobustnessInterval)> = None;
        for p in 1..=total {
            let prefix = Prefix::new(word.truncated(p), total).unwrap();
            let ri = rho_interval(&prefix, &f, &t, &cfg).unwrap();
            let ei = eta_interval(&prefix, &f, &t, &cfg, EtaExtremes::PerAtom).unwrap();
            let b = completion_bounds(&prefix, &f, &t, &cfg, &grid, 100_000).unwrap();
            assert!(
                ri.contains(b.rho.0, TOL) && ri.contains(b.rho.1, TOL),
                "{f} p={p} {ri} {:?}",
                b.rho
            );
            assert!(
                ei.contains(b.eta.0, TOL) && ei.contains(b.eta.1, TOL),
                "{f} p={p} {ei} {:?}",
                b.eta
            );
            if let Some((pr, pe)) = prev {
                assert!(
                    ri.is_subset_of(&pr, TOL) && ei.is_subset_of(&pe, TOL),
                    "{f} p={p}"
                );
            }
            prev = Some((ri, ei));
        }
        let (ri, ei) = prev.unwrap();
        assert!(ri.is_singleton() && ei.is_singleton());
        assert!((ri.lo() - rho(&word, &f, &t, &cfg).unwrap()).abs() <= TOL);
        assert!((ei.lo() - eta(&word, &f, &t, &cfg).unwrap()).abs() <= TOL);
    }
}

#[test]
fn incremental_monitor_matches_batch_intervals() {
    let mut g = InstanceGen::new(4).with_max_horizon(8);
    let cfg = EvalConfig::default();
    for _ in 0..100 {
        let f = g.formula();
        let t = g.table().clone();
        let total = horizon(&f, 1.0).value() as usize + 1;
        let word = g.word_over(&["x", "y"], total);
        let mut m = Monitor::new(&f, &t, cfg, MonitorOptions::default()).unwrap();
        assert_eq!(m.horizon_samples(), total);
        for k in 0..total {
            let sample: BTreeMap<String, f64> = ["x", "y"]
                .iter()
                .map(|s| (s.to_string(), word.value(s, k).unwrap()))
                .collect();
            let record = m.step(&sample).unwrap();
            let prefix = Prefix::new(word.truncated(k + 1), total).unwrap();
            assert_eq!(record.rho, rho_interval(&prefix, &f, &t, &cfg).unwrap());
            assert_eq!(
                record.eta,
                eta_interval(&prefix, &f, &t, &cfg, EtaExtremes::PerAtom).unwrap()
            );
        }
        assert!(m.is_final());
        let last = m.last().unwrap();
        assert_eq!(last.rho.lo(), rho(&word, &f, &t, &cfg).unwrap());
        assert_eq!(last.eta.lo(), eta(&word, &f, &t, &cfg).unwrap());
    }
}

#[test]
fn conservative_extremes_enclose_per_atom_intervals() {
    let mut g = InstanceGen::new(5).with_max_horizon(6);
    let cfg = EvalConfig::default();
    for _ in 0..100 {
        let f = g.formula();
        let t = g.table().clone();
        let total = horizon(&f, 1.0).value() as usize + 1;
        let word: Word = g.word_over(&["x", "y"], total);
        for p in 1..=total {
            let prefix = Prefix::new(word.truncated(p), total).unwrap();
            let tight = eta_interval(&prefix, &f, &t, &cfg, EtaExtremes::PerAtom).unwrap();
            let loose = eta_interval(&prefix, &f, &t, &cfg, EtaExtremes::Conservative).unwrap();
            assert!(
                tight.is_subset_of(&loose, TOL),
                "{f} p={p}: {tight} vs {loose}"
            );
        }
    }
}
