use std::path::PathBuf;

use ghzsim::config::{AxisValues, GridSpec, PointSpec, RunConfig, Settings};
use ghzsim::netlist_file::{parse_netlist, NetlistFile};
use ghzsim::output::{pct, read_sweep_csv, write_sweep_csv};
use ghzsim::{commands, BranchCache, Error};
use ghzsim_core::analysis::{Param, Regime};
use ghzsim_core::circuit::Element;
use ghzsim_core::canonical_ghz_netlist;

fn canonical_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("netlists/canonical.json")
}

#[test]
fn shipped_canonical_netlist_matches_the_builtin() {
    let expected = NetlistFile::from_netlist(&canonical_ghz_netlist()).to_json();
    let path = canonical_path();
    if std::env::var_os("GHZSIM_BLESS").is_some() {
        std::fs::write(&path, &expected).unwrap();
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, expected);
    let n = parse_netlist(&text).unwrap();
    // the 45 degree waveplates come back as exactly pi/4
    assert_eq!(n, canonical_ghz_netlist());
    assert_eq!(NetlistFile::from_netlist(&n).to_json(), text);
}

#[test]
fn netlist_errors_name_the_problem() {
    let mut f = NetlistFile::from_netlist(&canonical_ghz_netlist());
    f.sources[0] = "nowhere".into();
    let e = f.to_netlist().unwrap_err();
    assert!(e.to_string().contains("nowhere"), "{e}");

    let mut f = NetlistFile::from_netlist(&canonical_ghz_netlist());
    f.elements.push(ghzsim::netlist_file::ElementFile::Wp { channel: "d1".into(), angle_deg: 10.0 });
    let e = parse_netlist(&f.to_json()).unwrap_err();
    assert!(e.to_string().contains("DetectorNotTerminal"), "{e}");

    assert!(parse_netlist(r#"{"channels": [], "bogus": 1}"#).is_err());
}

#[test]
fn grid_spec_forms() {
    let g = GridSpec::parse("ovl:0.97..0.99/3, g2:0.01|0.02,p_l:/5,p_det:0..0.1@0.05").unwrap();
    assert_eq!(g.axes[0], (Param::Ovl, AxisValues::Linspace { min: 0.97, max: 0.99, n: 3 }));
    assert_eq!(g.axes[1], (Param::G2, AxisValues::List(vec![0.01, 0.02])));
    assert_eq!(g.axes[2], (Param::PL, AxisValues::Range(5)));
    let axes = g.resolve(&Regime::spdc()).unwrap();
    assert_eq!(axes[2].values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(axes[3].values, vec![0.0, 0.05, 0.1]);
    for bad in ["", "ovl", "zz:1", "ovl:0.1..0.2", "ovl:a|b", "ovl:/x"] {
        assert!(GridSpec::parse(bad).is_err(), "{bad}");
    }
}

#[test]
fn config_rules() {
    let regime = Settings { regime: Some("spdc".into()), ..Settings::default() };
    let cfg = RunConfig::resolve(regime.clone(), false).unwrap();
    assert_eq!(cfg.point.params().unwrap(), Regime::spdc().defaults());
    assert_eq!(cfg.netlist, "canonical");

    // regime and explicit parameters exclude each other
    let both = Settings { ovl: Some(0.9), ..regime.clone() };
    assert!(matches!(RunConfig::resolve(both, false), Err(Error::Config(_))));
    assert!(matches!(RunConfig::resolve(regime.clone(), true), Err(Error::Config(_))));
    assert!(matches!(RunConfig::resolve(Settings::default(), false), Err(Error::Config(_))));

    let out = Settings { g2: Some(1.5), ..Settings::default() };
    let e = RunConfig::resolve(out, false).unwrap_err();
    assert!(e.to_string().contains("g2"), "{e}");

    let simple = Settings { p_l: Some(1.0), ..regime.clone() };
    let cfg = RunConfig::resolve(simple, false).unwrap();
    assert!(cfg.point.simplified_loss());
    let p = cfg.point.params().unwrap();
    assert_eq!((p.p_prep, p.p_ops, p.p_det), (0.15, 0.02, 0.15));

    let partial = Settings { ovl: Some(0.97), ..Settings::default() };
    match RunConfig::resolve(partial, false).unwrap().point {
        PointSpec::Explicit(p) => assert_eq!((p.ovl, p.g2, p.p_det), (0.97, 0.0, 0.0)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"regime": "solid-state", "coverage": 0.9, "threads": 2}"#).unwrap();
    let file = Settings::load(&path).unwrap();
    let flags = Settings { coverage: Some(0.95), ..Settings::default() };
    let cfg = RunConfig::resolve(flags.over(file), false).unwrap();
    assert_eq!(cfg.coverage, 0.95);
    assert_eq!(cfg.threads, Some(2));
    assert_eq!(cfg.point.regime().name, "solid-state");

    std::fs::write(&path, r#"{"regime": "spdc", "colour": 1}"#).unwrap();
    assert!(Settings::load(&path).is_err());
}

#[test]
fn percentages_have_four_significant_digits() {
    assert_eq!(pct(1.0 / 32.0), "3.125%");
    assert_eq!(pct(0.948), "94.80%");
    assert_eq!(pct(1.0), "100.0%");
    assert_eq!(pct(0.000123456), "0.01235%");
}

fn sweep_config(grid: &str, cache: Option<PathBuf>) -> RunConfig {
    let s = Settings {
        regime: Some("close-to-optimal".into()),
        grid: Some(grid.into()),
        coverage: Some(0.95),
        cache,
        threads: Some(1),
        ..Settings::default()
    };
    RunConfig::resolve(s, false).unwrap()
}

#[test]
fn sweep_csv_round_trips() {
    let cfg = sweep_config("ovl:0.99|0.995|1,g2:0.0..0.02/3,p_l:0|1", None);
    let (grid, _) = commands::sweep(&cfg).unwrap();
    assert_eq!(grid.len(), 18);
    let mut buf = Vec::new();
    write_sweep_csv(&grid, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("ovl,g2,p_prep,p_ops,p_det,p_L,fidelity,success,success_normalized,covered_mass\n"));
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().count(), 19);
    assert_eq!(read_sweep_csv(&text).unwrap(), grid);
}

#[test]
fn one_point_sweep_has_one_row() {
    let cfg = sweep_config("ovl:0.995", None);
    let (grid, _) = commands::sweep(&cfg).unwrap();
    let mut buf = Vec::new();
    write_sweep_csv(&grid, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
}

#[test]
fn cache_is_transparent() {
    let dir = tempfile::tempdir().unwrap();
    let grid = "ovl:0.99|1,g2:0|0.02,p_l:0|0.5|1";
    let (plain, _) = commands::sweep(&sweep_config(grid, None)).unwrap();
    let (cold, s0) = commands::sweep(&sweep_config(grid, Some(dir.path().into()))).unwrap();
    let (warm, s1) = commands::sweep(&sweep_config(grid, Some(dir.path().into()))).unwrap();
    assert!(s0.built_groups > 0 && s0.hit_groups == 0);
    assert_eq!((s1.built_groups, s1.hit_groups), (0, s0.built_groups));
    // bit-identical, not merely close
    assert_eq!(plain, cold);
    assert_eq!(cold, warm);

    // a wider request reuses what is there and builds the rest
    let (_, s2) = commands::sweep(&sweep_config("ovl:1,g2:0.01,p_l:0.25", Some(dir.path().into()))).unwrap();
    assert!(s2.hit_groups > 0);
    let (_, s3) = commands::sweep(&sweep_config("ovl:1,g2:0.01,p_l:0.25", Some(dir.path().into()))).unwrap();
    assert_eq!(s3.built_groups, 0);
}

#[test]
fn stale_or_corrupt_cache_entries_are_rebuilt() {
    let dir = tempfile::tempdir().unwrap();
    let grid = "ovl:1,g2:0.01,p_l:0.5";
    let (first, _) = commands::sweep(&sweep_config(grid, Some(dir.path().into()))).unwrap();
    let n = canonical_ghz_netlist();
    let cache = BranchCache::new(dir.path());
    let path = cache.path_for(&BranchCache::key(&n, "six-fold"));
    std::fs::write(&path, "{not json").unwrap();
    let (again, s) = commands::sweep(&sweep_config(grid, Some(dir.path().into()))).unwrap();
    assert_eq!(s.hit_groups, 0);
    assert_eq!(first, again);

    // a different circuit gets a different key
    let mut other = n.clone();
    if let Some(Element::Waveplate { angle, .. }) = other.elements.iter_mut().find(|e| matches!(e, Element::Waveplate { .. })) {
        *angle += 1e-12;
    }
    assert_ne!(BranchCache::key(&n, "six-fold"), BranchCache::key(&other, "six-fold"));
    assert_ne!(BranchCache::key(&n, "six-fold"), BranchCache::key(&n, "herald"));
}

#[test]
fn thread_count_does_not_change_results() {
    let grid = "ovl:0.99|1,g2:0|0.02,p_l:0|1";
    let (one, _) = commands::sweep(&sweep_config(grid, None)).unwrap();
    let mut cfg = sweep_config(grid, None);
    cfg.threads = Some(3);
    let (three, _) = commands::sweep(&cfg).unwrap();
    assert_eq!(one, three);
}
