use std::fs;
use std::path::Path;

use ghzsim_core::analysis::{
    Axis, Engine, EvalSettings, InfluencePlan, InfluenceReport, InfluenceSpec, MeasureGrid, Param, PointMeasures,
    SweepPlan, SweepSpec,
};
use ghzsim_core::circuit::Netlist;
use serde::Serialize;

use crate::cache::{build_table, CacheStats};
use crate::checks::{self, Check};
use crate::config::{PointSpec, RunConfig};
use crate::netlist_file::resolve_netlist;
use crate::output::{influence_text, pct, write_influence_csv, write_sweep_csv};
use crate::{Error, Parallel};

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Setup {
    netlist: Netlist,
    runner: Parallel,
}

fn setup(cfg: &RunConfig) -> Result<Setup, Error> {
    Ok(Setup { netlist: resolve_netlist(&cfg.netlist)?, runner: Parallel::new(cfg.threads)? })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulateReport {
    pub netlist: String,
    pub regime: Option<String>,
    pub acceptance: String,
    pub ovl: f64,
    pub g2: f64,
    pub p_prep: f64,
    pub p_ops: f64,
    pub p_det: f64,
    pub p_l: Option<f64>,
    pub coverage: f64,
    pub fidelity: f64,
    pub success: f64,
    pub success_normalized: f64,
    pub covered_mass: f64,
    pub selected_events: u128,
    pub live_events: usize,
}

impl SimulateReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        if let Some(r) = &self.regime {
            s += &format!("regime: {r}\n");
        }
        s += &format!(
            "parameters: ovl {} g2 {} p_prep {} p_ops {} p_det {}",
            pct(self.ovl),
            pct(self.g2),
            pct(self.p_prep),
            pct(self.p_ops),
            pct(self.p_det)
        );
        if let Some(t) = self.p_l {
            s += &format!(" (simplified loss p_L {})", pct(t));
        }
        s += "\n";
        s += &format!("fidelity: {}\n", pct(self.fidelity));
        s += &format!(
            "success probability: {} (normalized to 1/32 = 3.125%: {})\n",
            pct(self.success),
            pct(self.success_normalized)
        );
        s += &format!("covered mass: {} (coverage target {})\n", pct(self.covered_mass), pct(self.coverage));
        s += &format!("branches: {} selected events, {} accepted\n", self.selected_events, self.live_events);
        s
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<(SimulateReport, CacheStats), Error> {
    let su = setup(cfg)?;
    let engine = Engine::new(&su.netlist, cfg.acceptance)?;
    let params = cfg.point.params()?;
    params.validate()?;
    let sel = engine.select(params.g2, params.losses(), cfg.coverage)?;
    let mut demand = ghzsim_core::analysis::Demand::new();
    demand.add(&sel);
    let (table, stats) = build_table(cfg.cache().as_ref(), &engine, demand, &su.runner)?;
    let m = PointMeasures::try_from(table.measures(&sel, params.ovl)?)?;
    let (regime, p_l) = match &cfg.point {
        PointSpec::Regime { regime, p_l } => (Some(regime.name.clone()), *p_l),
        PointSpec::Explicit(_) => (None, None),
    };
    let report = SimulateReport {
        netlist: cfg.netlist.clone(),
        regime,
        acceptance: cfg.acceptance.name().to_string(),
        ovl: params.ovl,
        g2: params.g2,
        p_prep: params.p_prep,
        p_ops: params.p_ops,
        p_det: params.p_det,
        p_l,
        coverage: cfg.coverage,
        fidelity: m.fidelity,
        success: m.success,
        success_normalized: m.success_normalized,
        covered_mass: m.covered_mass,
        selected_events: sel.event_count(),
        live_events: table.events().len(),
    };
    if let Some(out) = &cfg.out {
        let mut json = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
        json.push('\n');
        write_file(out, json.as_bytes())?;
    }
    Ok((report, stats))
}

/// Axes of a sweep: the configured grid, plus a fixed `p_L` axis when the
/// point uses the simplified loss model and the grid does not say otherwise.
pub fn sweep_spec(cfg: &RunConfig) -> Result<SweepSpec, Error> {
    let grid = cfg.grid.as_ref().ok_or_else(|| Error::Config("sweep needs --grid".into()))?;
    let regime = cfg.point.regime();
    let mut axes = grid.resolve(&regime)?;
    if let PointSpec::Regime { p_l: Some(t), .. } = cfg.point {
        let touches_loss = axes.iter().any(|a| a.param == Param::PL || Param::LOSSES.contains(&a.param));
        if !touches_loss {
            axes.push(Axis::fixed(Param::PL, t)?);
        }
    }
    Ok(SweepSpec::new(regime, axes)?)
}

pub fn sweep(cfg: &RunConfig) -> Result<(MeasureGrid, CacheStats), Error> {
    let su = setup(cfg)?;
    let engine = Engine::new(&su.netlist, cfg.acceptance)?;
    let spec = sweep_spec(cfg)?;
    let settings = EvalSettings { coverage: cfg.coverage, acceptance: cfg.acceptance };
    let plan = SweepPlan::new(&engine, spec, &settings, &su.runner)?;
    let (table, stats) = build_table(cfg.cache().as_ref(), &engine, plan.demand().clone(), &su.runner)?;
    let grid = plan.evaluate(&table, &su.runner)?;
    if let Some(out) = &cfg.out {
        let mut buf = Vec::new();
        write_sweep_csv(&grid, &mut buf)?;
        write_file(out, &buf)?;
    }
    Ok((grid, stats))
}

/// `points == 0` uses the full resolution (see [`InfluenceSpec::full`]), otherwise at most
/// `points` values per axis.
pub fn influence(cfg: &RunConfig, points: usize) -> Result<(InfluenceReport, CacheStats), Error> {
    let PointSpec::Regime { regime, .. } = &cfg.point else {
        return Err(Error::Config("influence needs --regime".into()));
    };
    let su = setup(cfg)?;
    let engine = Engine::new(&su.netlist, cfg.acceptance)?;
    let spec = if points == 0 { InfluenceSpec::full() } else { InfluenceSpec::coarse(points) };
    let settings = EvalSettings { coverage: cfg.coverage, acceptance: cfg.acceptance };
    let plan = InfluencePlan::new(&engine, regime, &spec, &settings, &su.runner)?;
    let (table, stats) = build_table(cfg.cache().as_ref(), &engine, plan.demand().clone(), &su.runner)?;
    let (report, _) = plan.evaluate(&table, &su.runner)?;
    if let Some(out) = &cfg.out {
        let mut buf = Vec::new();
        write_influence_csv(&report, &mut buf)?;
        write_file(out, &buf)?;
        write_file(&out.with_extension("txt"), influence_text(&report).as_bytes())?;
    }
    Ok((report, stats))
}

pub fn validate(netlist: &str, seed: u64) -> Result<Vec<Check>, Error> {
    let n = resolve_netlist(netlist).or_else(|e| match e {
        // an invalid circuit is reported as a failed check, not an error
        Error::Netlist(_) if netlist != "canonical" => {
            let text = fs::read_to_string(netlist).map_err(|e| Error::io(Path::new(netlist), e))?;
            let file: crate::netlist_file::NetlistFile =
                serde_json::from_str(&text).map_err(|e| Error::Netlist(e.to_string()))?;
            file.to_netlist()
        }
        e => Err(e),
    })?;
    Ok(checks::run_all(&n, seed))
}
