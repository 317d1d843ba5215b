use std::io::Write;

use serde::{Deserialize, Serialize};

/// One long-format measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub scenario: String,
    pub hash: String,
    pub version: String,
    pub h: usize,
    pub horizon: usize,
    /// Grid seed, before the master-seed shift.
    pub seed: u64,
    /// Decision epoch for time-resolved metrics.
    pub t: Option<usize>,
    pub metric: String,
    pub value: f64,
}

/// Summary of one (h, horizon, metric, t) cell across seeds. Non-finite values count as
/// missing and are left out of every statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub h: usize,
    pub horizon: usize,
    pub metric: String,
    pub t: Option<usize>,
    pub count: usize,
    pub missing: usize,
    pub mean: f64,
    /// Standard error of the mean.
    pub std_err: f64,
    pub median: f64,
    pub q05: f64,
    pub q25: f64,
    pub q75: f64,
    pub q95: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

impl Aggregate {
    fn from_values(h: usize, horizon: usize, metric: &str, t: Option<usize>, values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = if n == 0 { f64::NAN } else { v.iter().sum::<f64>() / n as f64 };
        let std_err = if n < 2 {
            f64::NAN
        } else {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Aggregate {
            h,
            horizon,
            metric: metric.to_string(),
            t,
            count: n,
            missing: values.len() - n,
            mean,
            std_err,
            median: quantile(&v, 0.5),
            q05: quantile(&v, 0.05),
            q25: quantile(&v, 0.25),
            q75: quantile(&v, 0.75),
            q95: quantile(&v, 0.95),
            min: v.first().copied().unwrap_or(f64::NAN),
            max: v.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricFrame {
    pub records: Vec<MetricRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl MetricFrame {
    /// Groups by (h, horizon, metric, t) in order of first appearance.
    pub fn from_records(records: Vec<MetricRecord>) -> Self {
        let mut keys: Vec<(usize, usize, &str, Option<usize>)> = Vec::new();
        let mut groups: Vec<Vec<f64>> = Vec::new();
        for r in &records {
            let key = (r.h, r.horizon, r.metric.as_str(), r.t);
            match keys.iter().position(|k| *k == key) {
                Some(g) => groups[g].push(r.value),
                None => {
                    keys.push(key);
                    groups.push(vec![r.value]);
                }
            }
        }
        let aggregates = keys
            .iter()
            .zip(&groups)
            .map(|(&(h, horizon, metric, t), v)| Aggregate::from_values(h, horizon, metric, t, v))
            .collect();
        MetricFrame { records, aggregates }
    }

    pub fn values(&self, h: usize, horizon: usize, metric: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.h == h && r.horizon == horizon && r.metric == metric && r.t.is_none())
            .map(|r| r.value)
            .collect()
    }

    /// Aggregate of the untimed records of one cell.
    pub fn aggregate(&self, h: usize, horizon: usize, metric: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.h == h && a.horizon == horizon && a.metric == metric && a.t.is_none())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scenario", "hash", "version", "h", "horizon", "seed", "t", "metric", "value"])?;
        for r in &self.records {
            w.write_record([
                r.scenario.clone(),
                r.hash.clone(),
                r.version.clone(),
                r.h.to_string(),
                r.horizon.to_string(),
                r.seed.to_string(),
                r.t.map(|t| t.to_string()).unwrap_or_default(),
                r.metric.clone(),
                r.value.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Pretty JSON of the aggregates; NaN statistics become `null`.
    pub fn aggregates_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.aggregates).expect("aggregates serialize");
        s.push('\n');
        s
    }
}
