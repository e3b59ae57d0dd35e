//! Text and CSV emission.

use std::io::Write;

use ghzsim_core::analysis::{Axis, GridPoint, InfluenceReport, Measure, MeasureGrid, Param, Params, PointMeasures};

use crate::Error;

pub const SWEEP_HEADER: [&str; 10] =
    ["ovl", "g2", "p_prep", "p_ops", "p_det", "p_L", "fidelity", "success", "success_normalized", "covered_mass"];

/// A fraction as a percentage with four significant digits.
pub fn pct(x: f64) -> String {
    let v = x * 100.0;
    if v == 0.0 || !v.is_finite() {
        return format!("{v}%");
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (3 - mag).max(0) as usize;
    format!("{v:.decimals$}%")
}

/// Sweep rows in grid order; floats use the shortest round-trip form.
pub fn write_sweep_csv<W: Write>(grid: &MeasureGrid, w: W) -> Result<(), Error> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(SWEEP_HEADER).map_err(|e| Error::Csv(e.to_string()))?;
    for p in &grid.points {
        let q = &p.params;
        let m = &p.measures;
        let pl = p.p_l.map(|x| x.to_string()).unwrap_or_default();
        let row = [
            q.ovl.to_string(),
            q.g2.to_string(),
            q.p_prep.to_string(),
            q.p_ops.to_string(),
            q.p_det.to_string(),
            pl,
            m.fidelity.to_string(),
            m.success.to_string(),
            m.success_normalized.to_string(),
            m.covered_mass.to_string(),
        ];
        out.write_record(&row).map_err(|e| Error::Csv(e.to_string()))?;
    }
    out.flush().map_err(|e| Error::Csv(e.to_string()))
}

/// Parses a sweep file back into a grid. Axes are the columns that vary,
/// ordered by how often they change (the last axis varies fastest), so
/// single-valued axes are not recovered.
pub fn read_sweep_csv(text: &str) -> Result<MeasureGrid, Error> {
    let mut rd = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    if header.iter().ne(SWEEP_HEADER.iter().copied()) {
        return Err(Error::Csv(format!("unexpected header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Csv(format!("bad number {s:?}")));
    let mut points = Vec::new();
    for rec in rd.records() {
        let r = rec.map_err(|e| Error::Csv(e.to_string()))?;
        let p_l = if r[5].is_empty() { None } else { Some(num(&r[5])?) };
        points.push(GridPoint {
            params: Params { ovl: num(&r[0])?, g2: num(&r[1])?, p_prep: num(&r[2])?, p_ops: num(&r[3])?, p_det: num(&r[4])? },
            p_l,
            measures: PointMeasures {
                fidelity: num(&r[6])?,
                success: num(&r[7])?,
                success_normalized: num(&r[8])?,
                covered_mass: num(&r[9])?,
            },
        });
    }
    let simplified = points.first().is_some_and(|p| p.p_l.is_some());
    let candidates: Vec<Param> =
        if simplified { Param::SIMPLIFIED.to_vec() } else { Param::FULL.to_vec() };
    let mut varying: Vec<(usize, Axis)> = Vec::new();
    for p in candidates {
        let vals: Vec<f64> = points.iter().map(|g| g.value(p).unwrap_or(0.0)).collect();
        let changes = vals.windows(2).filter(|w| w[0] != w[1]).count();
        if changes > 0 {
            varying.push((changes, Axis::new(p, vals)?));
        }
    }
    varying.sort_by_key(|(c, _)| *c);
    Ok(MeasureGrid { axes: varying.into_iter().map(|(_, a)| a).collect(), points })
}

fn measure_label(m: Measure) -> &'static str {
    match m {
        Measure::Fidelity => "fidelity",
        Measure::Success => "success",
    }
}

/// Row label as printed in the influence tables.
pub fn row_label(quantity: &str, p: Param) -> String {
    let arg = match (quantity, p) {
        ("Corr", Param::G2) => "1-g2",
        ("Corr", Param::PL) => "1-p_L",
        (_, Param::PPrep) => "p_L.Prep",
        (_, Param::POps) => "p_L.Ops",
        (_, Param::PDet) => "p_L.Det",
        _ => p.name(),
    };
    format!("{quantity}({arg}, .)")
}

fn rows(r: &InfluenceReport) -> Vec<(String, &'static str, Param, [Option<f64>; 2])> {
    let mut out = Vec::new();
    let get = |v: &[ghzsim_core::analysis::Entry], p: Param, m: Measure| {
        v.iter().find(|e| e.param == p && e.measure == m).map(|e| e.value)
    };
    for p in Param::SIMPLIFIED {
        out.push((row_label("Corr", p), "Corr", p, [get(&r.corr, p, Measure::Fidelity), get(&r.corr, p, Measure::Success)]));
    }
    for p in Param::SIMPLIFIED {
        out.push((row_label("Delta", p), "Delta", p, [get(&r.delta, p, Measure::Fidelity), get(&r.delta, p, Measure::Success)]));
    }
    for p in Param::LOSSES {
        out.push((
            row_label("Delta", p),
            "Delta",
            p,
            [get(&r.loss_delta, p, Measure::Fidelity), get(&r.loss_delta, p, Measure::Success)],
        ));
    }
    out
}

pub fn influence_text(r: &InfluenceReport) -> String {
    let mut s = format!("influence: {} ({} grid points, {} live events)\n", r.regime, r.grid_points, r.live_events);
    s += &format!("{:<22} {:>10} {:>10}\n", "", "fidelity", "success");
    for (label, _, _, v) in rows(r) {
        let f = |x: Option<f64>| x.map(pct).unwrap_or_else(|| "-".into());
        s += &format!("{:<22} {:>10} {:>10}\n", label, f(v[0]), f(v[1]));
    }
    let d = &r.defaults;
    s += &format!("defaults: fidelity {} success {}\n", pct(d.fidelity), pct(d.success_normalized));
    s += &format!(
        "corner range: fidelity {} - {}, success {} - {}\n",
        pct(r.corner_extremes[0].0),
        pct(r.corner_extremes[0].1),
        pct(r.corner_extremes[1].0),
        pct(r.corner_extremes[1].1)
    );
    s += &format!("min covered mass: {}\n", pct(r.min_covered_mass));
    s
}

pub fn write_influence_csv<W: Write>(r: &InfluenceReport, w: W) -> Result<(), Error> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let err = |e: csv::Error| Error::Csv(e.to_string());
    out.write_record(["regime", "row", "quantity", "param", "measure", "value"]).map_err(err)?;
    for (label, quantity, p, v) in rows(r) {
        for (m, x) in Measure::ALL.iter().zip(v) {
            if let Some(x) = x {
                out.write_record([r.regime.as_str(), &label, quantity, p.name(), measure_label(*m), &x.to_string()])
                    .map_err(err)?;
            }
        }
    }
    out.flush().map_err(|e| Error::Csv(e.to_string()))
}
