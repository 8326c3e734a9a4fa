use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HealthReport;
use crate::error::{Error, Result};
use crate::profiles::MotionTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Lli,
    Lam,
    SeiNominal,
    SeiCrack,
    Plating,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Lli, Metric::Lam, Metric::SeiNominal, Metric::SeiCrack, Metric::Plating];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Lli => "lli",
            Metric::Lam => "lam",
            Metric::SeiNominal => "sei_nom",
            Metric::SeiCrack => "sei_crack",
            Metric::Plating => "plating",
        }
    }

    /// LAM is reported for the negative electrode, where cracking acts.
    pub fn of(self, r: &HealthReport) -> f64 {
        match self {
            Metric::Lli => r.lli,
            Metric::Lam => r.lam_n,
            Metric::SeiNominal => r.loss_sei_nominal,
            Metric::SeiCrack => r.loss_sei_crack,
            Metric::Plating => r.loss_plating,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fitted points.
    pub rms_residual: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
    /// Largest |y - fit| / fit over the fitted points where the fit is
    /// positive; the bound on how far a baseline can normalize away from 1.
    /// Points where the fit is not positive cannot be normalized at all.
    pub relative_bound: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFit {
    /// (energy_consumed Wh, metric value) per metric.
    pub points: BTreeMap<Metric, Vec<(f64, f64)>>,
    pub fits: BTreeMap<Metric, LinearFit>,
}

fn least_squares(points: &[(f64, f64)]) -> LinearFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut fit = LinearFit {
        slope,
        intercept,
        rms_residual: 0.0,
        max_residual: 0.0,
        relative_bound: 0.0,
    };
    let mut ss = 0.0;
    for &(x, y) in points {
        let yhat = fit.predict(x);
        let r = y - yhat;
        ss += r * r;
        fit.max_residual = fit.max_residual.max(r.abs());
        if yhat > 0.0 {
            fit.relative_bound = fit.relative_bound.max(r.abs() / yhat);
        }
    }
    fit.rms_residual = (ss / n).sqrt();
    fit
}

/// Least-squares lines of every metric against energy consumed.
pub fn fit_baselines(reports: &[HealthReport]) -> Result<BaselineFit> {
    let cc: Vec<&HealthReport> = reports.iter().filter(|r| r.motion == MotionTag::Cc).collect();
    if cc.len() < 2 {
        return Err(Error::input(format!(
            "baseline fit needs at least two constant-current reports, got {}",
            cc.len()
        )));
    }
    for (i, a) in cc.iter().enumerate() {
        for b in &cc[i + 1..] {
            if a.energy_consumed == b.energy_consumed {
                return Err(Error::input(format!(
                    "baselines {} and {} have the same energy {} Wh",
                    a.tag, b.tag, a.energy_consumed
                )));
            }
        }
    }
    let mut points = BTreeMap::new();
    let mut fits = BTreeMap::new();
    for m in Metric::ALL {
        let pts: Vec<(f64, f64)> = cc.iter().map(|r| (r.energy_consumed, m.of(r))).collect();
        fits.insert(m, least_squares(&pts));
        points.insert(m, pts);
    }
    Ok(BaselineFit { points, fits })
}

/// Metric divided by the baseline line at the report's energy.
pub fn normalize_metric(report: &HealthReport, fit: &BaselineFit, metric: Metric) -> Result<f64> {
    let line = fit
        .fits
        .get(&metric)
        .ok_or_else(|| Error::input(format!("fit does not cover {}", metric.name())))?;
    let prediction = line.predict(report.energy_consumed);
    if !(prediction > 0.0) {
        return Err(Error::Normalization {
            metric: metric.name().to_string(),
            prediction,
        });
    }
    Ok(metric.of(report) / prediction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMetric {
    pub metric: Metric,
    pub raw: f64,
    pub baseline: f64,
    /// Absent when the baseline prediction is not positive.
    pub normalized: Option<f64>,
}

pub fn normalize(report: &HealthReport, fit: &BaselineFit) -> Vec<NormalizedMetric> {
    Metric::ALL
        .iter()
        .map(|&m| NormalizedMetric {
            metric: m,
            raw: m.of(report),
            baseline: fit.fits.get(&m).map_or(f64::NAN, |f| f.predict(report.energy_consumed)),
            normalized: normalize_metric(report, fit, m).ok(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub tag: String,
    pub energy_wh: f64,
    pub lli_norm: Option<f64>,
    pub lam_norm: Option<f64>,
    pub sei_nom_norm: Option<f64>,
    pub sei_crack_norm: Option<f64>,
    pub plating_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

pub const TABLE_COLUMNS: [&str; 7] = [
    "tag",
    "energy_wh",
    "lli_norm",
    "lam_norm",
    "sei_nom_norm",
    "sei_crack_norm",
    "plating_norm",
];

/// One normalized row per report, sorted by energy ascending.
pub fn motion_report(reports: &[HealthReport], fit: &BaselineFit) -> Result<ComparisonTable> {
    if reports.is_empty() {
        return Err(Error::input("no reports to compare"));
    }
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| {
            let n = |m| normalize_metric(r, fit, m).ok();
            ComparisonRow {
                tag: r.tag.clone(),
                energy_wh: r.energy_consumed,
                lli_norm: n(Metric::Lli),
                lam_norm: n(Metric::Lam),
                sei_nom_norm: n(Metric::SeiNominal),
                sei_crack_norm: n(Metric::SeiCrack),
                plating_norm: n(Metric::Plating),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.energy_wh.total_cmp(&b.energy_wh).then_with(|| a.tag.cmp(&b.tag)));
    Ok(ComparisonTable { rows })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ComparisonTable {
    /// Missing normalizations are written as empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TABLE_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.tag.clone(),
                r.energy_wh.to_string(),
                cell(r.lli_norm),
                cell(r.lam_norm),
                cell(r.sei_nom_norm),
                cell(r.sei_crack_norm),
                cell(r.plating_norm),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<table>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Tidy `series,x,y` plot data for one metric: every report as a point in its
/// own series, plus the baseline line sampled at the baseline energies.
pub fn plot_data(reports: &[HealthReport], fit: &BaselineFit, metric: Metric) -> String {
    let mut out = String::from("series,x,y\n");
    let mut sorted: Vec<&HealthReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.energy_consumed.total_cmp(&b.energy_consumed));
    for r in sorted {
        out.push_str(&format!("{},{},{}\n", r.tag, r.energy_consumed, metric.of(r)));
    }
    if let (Some(line), Some(points)) = (fit.fits.get(&metric), fit.points.get(&metric)) {
        let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        for x in xs {
            out.push_str(&format!("baseline_fit,{},{}\n", x, line.predict(x)));
        }
    }
    out
}
