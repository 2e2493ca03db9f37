//! CSV output. Every file has a one-line header.

use std::io::{Read, Write};

use anyhow::{anyhow, bail, Context, Result};
use decomm_core::lgo::{GoalAssignment, LgoMechanism, LgoProblem, SweepStats};
use decomm_core::msbpi::{GeneralMechanism, IterationStats};
use decomm_core::myopic::CommPolicy;
use decomm_core::{DecMdpCom, ValueTable};

use crate::sim::SimResult;

fn state_name(m: &DecMdpCom, idx: usize) -> String {
    let (x, y) = m.unindex(idx);
    format!("{}/{}", m.agents[0].states[x], m.agents[1].states[y])
}

/// Columns `state,t,g1,g2,k,V`; behaviours are written by label.
pub fn write_lgo_mechanism<W: Write>(w: W, p: &LgoProblem<'_>, mech: &LgoMechanism) -> Result<()> {
    let m = p.model;
    let n = m.num_global();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["state", "t", "g1", "g2", "k", "V"])?;
    for t in 0..m.horizon {
        for idx in 0..n {
            let a = mech.assign[t * n + idx];
            out.write_record([
                state_name(m, idx),
                t.to_string(),
                p.behaviors[0][a.g1].label(),
                p.behaviors[1][a.g2].label(),
                a.k.to_string(),
                mech.values.get(idx, t).to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Inverse of [`write_lgo_mechanism`].
pub fn read_lgo_mechanism<R: Read>(r: R, p: &LgoProblem<'_>) -> Result<LgoMechanism> {
    let m = p.model;
    let n = m.num_global();
    let labels: [Vec<String>; 2] = [
        p.behaviors[0].iter().map(|b| b.label()).collect(),
        p.behaviors[1].iter().map(|b| b.label()).collect(),
    ];
    let names: std::collections::HashMap<String, usize> = (0..n).map(|i| (state_name(m, i), i)).collect();
    let mut assign: Vec<Option<GoalAssignment>> = vec![None; n * m.horizon];
    let mut values = ValueTable::new(m);
    let mut rd = csv::Reader::from_reader(r);
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let ctx = || format!("mechanism row {}", line + 2);
        if rec.len() != 6 {
            bail!("{}: expected 6 columns", ctx());
        }
        let idx = *names.get(&rec[0]).ok_or_else(|| anyhow!("{}: unknown state {}", ctx(), &rec[0]))?;
        let t: usize = rec[1].parse().with_context(ctx)?;
        if t >= m.horizon {
            bail!("{}: time {} is past the horizon", ctx(), t);
        }
        let find = |i: usize, l: &str| {
            labels[i].iter().position(|x| x == l).ok_or_else(|| anyhow!("{}: unknown behaviour {}", ctx(), l))
        };
        let a = GoalAssignment { g1: find(0, &rec[2])?, g2: find(1, &rec[3])?, k: rec[4].parse().with_context(ctx)? };
        if a.k == 0 || t + a.k > m.horizon {
            bail!("{}: window {} does not fit the horizon", ctx(), a.k);
        }
        assign[t * n + idx] = Some(a);
        values.set(idx, t, rec[5].parse().with_context(ctx)?);
    }
    let assign = assign
        .into_iter()
        .enumerate()
        .map(|(i, a)| a.ok_or_else(|| anyhow!("mechanism has no row for {} at t = {}", state_name(m, i % n), i / n)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LgoMechanism { assign, values })
}

/// Columns `state,t,option1,option2,V`; trees use the indented text form
/// with lines joined by ` | `.
pub fn write_general_mechanism<W: Write>(w: W, m: &DecMdpCom, mech: &GeneralMechanism) -> Result<()> {
    let n = m.num_global();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["state", "t", "option1", "option2", "V"])?;
    let flat = |s: String| s.trim_end().replace('\n', " | ");
    for t in 0..m.horizon {
        for idx in 0..n {
            let (x, y) = m.unindex(idx);
            let (o1, o2) = mech.pair(m, x, y, t);
            out.write_record([
                state_name(m, idx),
                t.to_string(),
                flat(o1.tree().to_text(&m.agents[0])),
                flat(o2.tree().to_text(&m.agents[1])),
                mech.values.get(idx, t).to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Columns `state,t,V` for `t = 0..=T`.
pub fn write_values<W: Write>(w: W, m: &DecMdpCom, v: &ValueTable) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["state", "t", "V"])?;
    for t in 0..=m.horizon {
        for idx in 0..m.num_global() {
            out.write_record([state_name(m, idx), t.to_string(), v.get(idx, t).to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_msbpi_iterations<W: Write>(w: W, it: &[IterationStats]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iteration", "initial_value", "total_value", "improved_cells", "nodes"])?;
    for s in it {
        out.write_record([
            s.iteration.to_string(),
            s.initial_value.to_string(),
            s.total_value.to_string(),
            s.improved_cells.to_string(),
            s.nodes.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_lgo_sweeps<W: Write>(w: W, sweeps: &[SweepStats]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["sweep", "initial_value", "candidates", "evaluations", "changed"])?;
    for (i, s) in sweeps.iter().enumerate() {
        out.write_record([
            i.to_string(),
            s.initial_value.to_string(),
            s.candidates.to_string(),
            s.evaluations.to_string(),
            s.changed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Rows `p_u`, columns distances `1..=max`; `never` where no exchange pays.
pub fn write_comm_tables<W: Write>(w: W, rows: &[(f64, f64, CommPolicy)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let max = rows.iter().map(|r| r.2.max_distance()).max().unwrap_or(0);
    let mut header = vec!["comm_cost".to_string(), "p_u".to_string()];
    header.extend((1..=max).map(|d| d.to_string()));
    out.write_record(&header)?;
    for (c, p, pol) in rows {
        let mut rec = vec![c.to_string(), p.to_string()];
        rec.extend((1..=max).map(|d| pol.get(d).map_or("never".to_string(), |t| t.to_string())));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// One simulated sweep point.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub domain: String,
    pub strategy: String,
    pub param: String,
    pub result: SimResult,
}

pub fn write_results<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["domain", "strategy", "param", "mean", "var", "comm", "steps", "episodes", "seed"])?;
    for r in rows {
        let s = &r.result;
        out.write_record([
            r.domain.clone(),
            r.strategy.clone(),
            r.param.clone(),
            s.mean.to_string(),
            s.variance.to_string(),
            s.comm_mean.to_string(),
            s.steps_mean.to_string(),
            s.episodes.to_string(),
            s.seed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
