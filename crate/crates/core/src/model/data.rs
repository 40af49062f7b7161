use std::path::Path;

use crate::error::{Error, Result};

use super::Model;

/// One measurement with its own observable, condition and time.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub observable: usize,
    pub condition: usize,
    pub time: f64,
    pub value: f64,
    /// Fixed noise level; takes precedence over the observable's error model.
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<DataPoint>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks the points against a model and wraps them.
    pub fn new(points: Vec<DataPoint>, model: &Model) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        for (i, p) in points.iter().enumerate() {
            let obs = model
                .observables
                .get(p.observable)
                .ok_or_else(|| Error::Data(format!("row {i}: observable index {} out of range", p.observable)))?;
            if p.condition >= model.conditions.len() {
                return Err(Error::Data(format!("row {i}: condition index {} out of range", p.condition)));
            }
            if !(p.time >= 0.0) || !p.time.is_finite() {
                return Err(Error::Data(format!("row {i}: time {} must be finite and non-negative", p.time)));
            }
            if !p.value.is_finite() {
                return Err(Error::Data(format!("row {i}: non-finite value")));
            }
            match p.sigma {
                Some(s) if !(s > 0.0) || !s.is_finite() => {
                    return Err(Error::Data(format!("row {i}: sigma must be positive, got {s}")));
                }
                None if obs.error.is_none() => {
                    return Err(Error::Data(format!(
                        "row {i}: observable `{}` takes sigma from the data but the row has none",
                        obs.id
                    )));
                }
                _ => {}
            }
        }
        Ok(Self { points })
    }

    /// Earliest and latest measurement times.
    pub fn time_span(&self) -> (f64, f64) {
        self.points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.time), hi.max(p.time)))
    }
}

/// Parses CSV with header `observable,condition,time,value[,sigma]`.
/// Empty `sigma` cells mean "use the error model".
pub fn parse_data(text: &str, model: &Model) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(c_obs), Some(c_cond), Some(c_time), Some(c_val)) =
        (col("observable"), col("condition"), col("time"), col("value"))
    else {
        return Err(Error::Data(
            "header must contain observable, condition, time and value columns".into(),
        ));
    };
    let c_sigma = col("sigma");

    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("row {i}: {e}")))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let num = |c: usize, what: &str| -> Result<f64> {
            field(c).parse::<f64>().map_err(|_| Error::Data(format!("row {i}: bad {what} `{}`", field(c))))
        };
        let obs_id = field(c_obs);
        let observable = model
            .observable_index(obs_id)
            .ok_or_else(|| Error::Data(format!("row {i}: unknown observable `{obs_id}`")))?;
        let cond_id = field(c_cond);
        let condition = model
            .condition_index(cond_id)
            .ok_or_else(|| Error::Data(format!("row {i}: unknown condition `{cond_id}`")))?;
        let sigma = match c_sigma.map(field) {
            None | Some("") => None,
            Some(_) => Some(num(c_sigma.unwrap(), "sigma")?),
        };
        points.push(DataPoint { observable, condition, time: num(c_time, "time")?, value: num(c_val, "value")?, sigma });
    }
    Dataset::new(points, model)
}

/// Writes points in the format read by [`parse_data`]. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_data(points: &[DataPoint], model: &Model) -> String {
    let mut out = String::from("observable,condition,time,value,sigma\n");
    for p in points {
        let sigma = p.sigma.map(|s| format!("{s:?}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:?},{:?},{}\n",
            model.observables[p.observable].id, model.conditions[p.condition].id, p.time, p.value, sigma
        ));
    }
    out
}

pub fn load_data(path: impl AsRef<Path>, model: &Model) -> Result<Dataset> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_data(&text, model)
}
