//! Report and CSV writing.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::Value;

use itrp::{FitResult, ItrpReport, IterationTrail, ProfileCurve, RadialProfile};

pub struct CsvTable {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        String::new()
    }
}

pub fn write_outputs(dir: &Path, report: &Value, tables: &[CsvTable]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    for t in tables {
        let path = dir.join(&t.file);
        std::fs::write(&path, t.render()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn starts_table(file: &str, names: &[String], fit: &FitResult) -> CsvTable {
    let mut header = vec!["start".to_string(), "value".into(), "iterations".into(), "termination".into()];
    header.extend(names.iter().map(|n| format!("start_{n}")));
    header.extend(names.iter().cloned());
    let rows = fit
        .starts
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = vec![i.to_string(), num(s.value), s.iterations.to_string(), termination(&s.termination)];
            r.extend(s.start.iter().map(|&v| num(v)));
            r.extend(s.theta.iter().map(|&v| num(v)));
            r
        })
        .collect();
    CsvTable { file: file.into(), header, rows }
}

fn termination(t: &itrp::optimize::Termination) -> String {
    let mut s = String::new();
    let _ = write!(s, "{t:?}");
    s.split('(').next().unwrap_or_default().to_lowercase()
}

pub fn penalized_starts_table(file: &str, rep: &ItrpReport) -> CsvTable {
    starts_table(file, &rep.parameters, &rep.fit)
}

pub fn profile_table(names: &[String], c: &ProfileCurve) -> CsvTable {
    let mut header = vec![c.parameter.clone(), "objective".into(), "delta".into()];
    header.extend(names.iter().cloned());
    let rows = c
        .values
        .iter()
        .zip(&c.objective)
        .zip(&c.theta)
        .map(|((&p, &v), th)| {
            let mut r = vec![num(p), num(v), num(v - c.v_hat)];
            r.extend(th.iter().map(|&x| num(x)));
            r
        })
        .collect();
    CsvTable { file: format!("profile_{}.csv", c.parameter), header, rows }
}

/// V(R) and the parameter paths.
pub fn radial_table(rp: &RadialProfile) -> CsvTable {
    let mut header = vec!["radius".to_string(), "v_tot".into(), "v_data".into(), "delta_v".into()];
    header.extend(rp.parameters.iter().cloned());
    header.extend(rp.parameters.iter().map(|n| format!("d_{n}")));
    let rows = (0..rp.radii.len())
        .map(|k| {
            let mut r = vec![num(rp.radii[k]), num(rp.v_tot[k]), num(rp.v_data[k]), num(rp.v_tot[k] - rp.v_hat)];
            r.extend(rp.theta[k].iter().map(|&x| num(x)));
            r.extend(rp.theta[k].iter().zip(&rp.theta_hat).map(|(&a, &b)| num(a - b)));
            r
        })
        .collect();
    CsvTable { file: "radial_profile.csv".into(), header, rows }
}

pub fn trail_table(trail: &IterationTrail) -> CsvTable {
    let header = ["step", "fixed", "value", "delta_v", "verdict", "least_identifiable"].map(String::from).to_vec();
    let mut rows = vec![vec![
        "0".into(),
        String::new(),
        String::new(),
        num(trail.initial.delta_v),
        trail.initial.verdict.to_string(),
        trail.initial.least_identifiable_name.clone(),
    ]];
    for (i, s) in trail.steps.iter().enumerate() {
        let (dv, verdict, least) = match &s.report {
            Some(r) => (num(r.delta_v), r.verdict.to_string(), r.least_identifiable_name.clone()),
            None => (String::new(), String::new(), String::new()),
        };
        rows.push(vec![(i + 1).to_string(), s.fixed.clone(), num(s.value), dv, verdict, least]);
    }
    CsvTable { file: "trail.csv".into(), header, rows }
}
