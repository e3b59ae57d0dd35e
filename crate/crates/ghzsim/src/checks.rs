//! Self-checks of a netlist and of the simulator, as run by `validate`.

use ghzsim_core::analysis::{evaluate_with, Engine, Params, Sequential};
use ghzsim_core::circuit::{self, lossless_mode_unitary, oracle_amplitude, validate_netlist, Netlist};
use ghzsim_core::fock::{make_basis_state, ModeKey, Polarization};
use ghzsim_core::herald::{self, Acceptance, HeraldError, IDEAL_SUCCESS};
use ghzsim_core::sources::{build_input_state, gram_coefficients, EmissionEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check { name, passed, detail }
    }
}

pub const ORACLE_CONFIGS: usize = 120;
const TOL: f64 = 1e-9;

pub fn netlist_invariants(n: &Netlist) -> Check {
    let v = validate_netlist(n);
    let detail = if v.is_empty() {
        "no violations".to_string()
    } else {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
    };
    Check::new("netlist invariants", v.is_empty(), detail)
}

/// Sign table calibration and, per detection pattern, the ideal success
/// `1/256` and unit fidelity.
pub fn ideal_patterns(n: &Netlist) -> Check {
    let name = "ideal circuit per pattern";
    let signs = match herald::derive_sign_table(n) {
        Ok(s) => s,
        Err(HeraldError::SignCalibration(d)) => return Check::new(name, false, format!("sign calibration failed: {d}")),
        Err(e) => return Check::new(name, false, e.to_string()),
    };
    let run = || -> Result<Vec<(String, f64, f64)>, HeraldError> {
        let g = gram_coefficients(1.0, n.sources.len())?;
        let input = build_input_state(EmissionEvent::singles(), &g, n)?;
        let out = circuit::run(n, &input, &[])?;
        let mut rows = Vec::new();
        for (outcome, part) in herald::classify(&out, n, Acceptance::SixFold)? {
            let m = herald::branch_measures(&part, n, &signs, Acceptance::SixFold)?;
            rows.push((outcome.pattern(), m.success, m.fidelity_numerator / m.success));
        }
        rows.sort_by_key(|r| r.0);
        Ok(rows
            .into_iter()
            .map(|(p, s, f)| (p.map(|p| p.to_string()).unwrap_or_else(|| "?".into()), s, f))
            .collect())
    };
    match run() {
        Ok(rows) => {
            let total: f64 = rows.iter().map(|r| r.1).sum();
            let ok = rows.len() == 8
                && (total - IDEAL_SUCCESS).abs() <= TOL
                && rows.iter().all(|r| (r.1 - IDEAL_SUCCESS / 8.0).abs() <= TOL && (r.2 - 1.0).abs() <= TOL);
            let detail = rows.iter().map(|(p, s, f)| format!("{p}: success {s:.9} fidelity {f:.12}")).collect::<Vec<_>>();
            Check::new(name, ok, format!("{} patterns, total success {total:.12}; {}", rows.len(), detail.join(", ")))
        }
        Err(e) => Check::new(name, false, e.to_string()),
    }
}

/// Ideal-point mixture measures through the branch engine.
pub fn ideal_point(engine: &Engine<'_>) -> Check {
    let name = "ideal point";
    match evaluate_with(engine, &Params::IDEAL, 1.0, &Sequential) {
        Ok(m) => {
            let ok = (m.success - IDEAL_SUCCESS).abs() <= TOL && (m.fidelity - 1.0).abs() <= TOL;
            Check::new(name, ok, format!("success {:.12} (1/32 = 0.03125), fidelity {:.12}", m.success, m.fidelity))
        }
        Err(e) => Check::new(name, false, e.to_string()),
    }
}

/// Stepper amplitudes against permanents of the lossless transfer matrix,
/// for random single-photon inputs on the netlist's sources.
pub fn oracle_equivalence(n: &Netlist, configs: usize, seed: u64) -> Check {
    let name = "stepper vs permanent oracle";
    let u = lossless_mode_unitary(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut missing: f64 = 0.0;
    for _ in 0..configs {
        let k = rng.gen_range(1..=n.sources.len());
        let mut srcs = n.sources.clone();
        for i in 0..k {
            let j = rng.gen_range(i..srcs.len());
            srcs.swap(i, j);
        }
        let photons: Vec<ModeKey> = srcs[..k]
            .iter()
            .map(|&c| {
                let pol = if rng.gen_bool(0.5) { Polarization::V } else { Polarization::H };
                ModeKey::new(c, pol, rng.gen_range(0..3))
            })
            .collect();
        let input = match make_basis_state(&photons) {
            Ok(s) => s,
            Err(e) => return Check::new(name, false, e.to_string()),
        };
        let out = match circuit::run(n, &input, &[]) {
            Ok(s) => s,
            Err(e) => return Check::new(name, false, e.to_string()),
        };
        let basis = input.terms()[0].0;
        let mut mass = 0.0;
        for &(b, amp) in out.iter() {
            let o = oracle_amplitude(&u, &basis, &b);
            worst = worst.max((o - amp).norm());
            mass += o.norm_sqr();
        }
        missing = missing.max((1.0 - mass).abs());
    }
    let ok = worst <= TOL && missing <= TOL;
    Check::new(name, ok, format!("{configs} configurations, max deviation {worst:.3e}, max missing mass {missing:.3e}"))
}

/// With indistinguishable photons and no double emission, loss only lowers
/// the success probability: the fidelity stays 1 on a 5x5 loss grid.
pub fn loss_invariance(engine: &Engine<'_>, coverage: f64) -> Check {
    let name = "loss leaves post-selected fidelity at 1";
    let mut worst: f64 = 0.0;
    for a in [0.0, 0.025, 0.05, 0.1, 0.15] {
        for b in [0.0, 0.005, 0.01, 0.015, 0.02] {
            let p = Params { ovl: 1.0, g2: 0.0, p_prep: a, p_ops: b, p_det: a };
            match evaluate_with(engine, &p, coverage, &Sequential) {
                Ok(m) => worst = worst.max((m.fidelity - 1.0).abs()),
                Err(e) => return Check::new(name, false, e.to_string()),
            }
        }
    }
    Check::new(name, worst <= TOL, format!("25 loss points, max |F - 1| = {worst:.3e}"))
}

/// Without loss, double emissions are rejected by the six-fold
/// post-selection: fidelity 1 for `g2` in {0.5%, 1%, 2%}.
pub fn higher_order_invariance(engine: &Engine<'_>) -> Check {
    let name = "double emission leaves post-selected fidelity at 1";
    let mut worst: f64 = 0.0;
    for g2 in [0.005, 0.01, 0.02] {
        let p = Params { g2, ..Params::IDEAL };
        match evaluate_with(engine, &p, 1.0, &Sequential) {
            Ok(m) => worst = worst.max((m.fidelity - 1.0).abs()),
            Err(e) => return Check::new(name, false, e.to_string()),
        }
    }
    Check::new(name, worst <= TOL, format!("g2 in {{0.5%, 1%, 2%}}, max |F - 1| = {worst:.3e}"))
}

/// All checks; later ones are skipped when the netlist itself is invalid.
pub fn run_all(n: &Netlist, seed: u64) -> Vec<Check> {
    let mut out = vec![netlist_invariants(n)];
    if !out[0].passed {
        return out;
    }
    out.push(ideal_patterns(n));
    out.push(oracle_equivalence(n, ORACLE_CONFIGS, seed));
    match Engine::new(n, Acceptance::SixFold) {
        Ok(engine) => {
            out.push(ideal_point(&engine));
            out.push(loss_invariance(&engine, 0.98));
            out.push(higher_order_invariance(&engine));
        }
        Err(e) => out.push(Check::new("branch engine", false, e.to_string())),
    }
    out
}
