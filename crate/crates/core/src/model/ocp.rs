//! Open-circuit potentials from tabulated curves with monotone cubic
//! (Fritsch-Carlson) interpolation.

use std::path::Path;

use crate::error::{Error, Result};
use crate::params::Electrode;

const GRAPHITE_TABLE: &str = include_str!("../../data/ocp_graphite.csv");
const NMC_TABLE: &str = include_str!("../../data/ocp_nmc.csv");

/// A tabulated half-cell potential curve, V vs Li/Li+.
#[derive(Debug, Clone, PartialEq)]
pub struct OcpCurve {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl OcpCurve {
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("OCP table is empty"));
        }
        let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::input("OCP table contains non-finite values"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("OCP stoichiometries must be strictly increasing"));
        }
        let slope = pchip_slopes(&x, &y);
        Ok(Self { x, y, slope })
    }

    /// Parse a two-column `stoichiometry,volts` CSV; a header row is optional.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut points = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::Parse {
                    row: row + 1,
                    reason: format!("expected 2 columns, found {}", record.len()),
                });
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(a), Ok(b)) => points.push((a, b)),
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::Parse {
                        row: row + 1,
                        reason: "non-numeric OCP entry".into(),
                    })
                }
            }
        }
        Self::from_points(&points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn graphite() -> Self {
        Self::from_csv_str(GRAPHITE_TABLE).expect("bundled graphite table is valid")
    }

    pub fn nmc() -> Self {
        Self::from_csv_str(NMC_TABLE).expect("bundled NMC table is valid")
    }

    /// Potential and its stoichiometry derivative. Outside the tabulated span the
    /// curve continues linearly with the end slope.
    pub fn eval_with_slope(&self, theta: f64) -> (f64, f64) {
        let n = self.x.len();
        if n == 1 {
            return (self.y[0], 0.0);
        }
        if theta <= self.x[0] {
            return (self.y[0] + self.slope[0] * (theta - self.x[0]), self.slope[0]);
        }
        if theta >= self.x[n - 1] {
            return (
                self.y[n - 1] + self.slope[n - 1] * (theta - self.x[n - 1]),
                self.slope[n - 1],
            );
        }
        let k = match self.x.partition_point(|&v| v <= theta) {
            0 => 0,
            i => (i - 1).min(n - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let t = (theta - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.slope[k], self.slope[k + 1]);
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1;
        let dvalue = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * h * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * h * d1)
            / h;
        (value, dvalue)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_with_slope(theta).0
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![0.0];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// The pair of half-cell curves used by a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct OcpSet {
    pub pos: OcpCurve,
    pub neg: OcpCurve,
}

impl Default for OcpSet {
    fn default() -> Self {
        Self {
            pos: OcpCurve::nmc(),
            neg: OcpCurve::graphite(),
        }
    }
}

impl OcpSet {
    pub fn curve(&self, electrode: Electrode) -> &OcpCurve {
        match electrode {
            Electrode::Pos => &self.pos,
            Electrode::Neg => &self.neg,
        }
    }

    /// Half-cell open-circuit potential; stoichiometry must lie in [0, 1].
    pub fn ocp(&self, electrode: Electrode, theta: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Domain {
                electrode: electrode.name(),
                value: theta,
            });
        }
        Ok(self.curve(electrode).eval(theta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParameterSet;

    #[test]
    fn negative_curve_strictly_decreasing() {
        let set = OcpSet::default();
        let mut theta = 0.0;
        while theta + 0.05 <= 1.0 {
            let a = set.ocp(Electrode::Neg, theta).unwrap();
            let b = set.ocp(Electrode::Neg, theta + 0.05).unwrap();
            assert!(a > b, "neg OCP not decreasing at {theta}");
            theta += 0.01;
        }
    }

    #[test]
    fn positive_curve_decreasing_over_window() {
        let set = OcpSet::default();
        let p = ParameterSet::default();
        let n = 400;
        let mut prev = f64::INFINITY;
        for i in 0..=n {
            let theta = p.theta_p_min + (p.theta_p_max - p.theta_p_min) * i as f64 / n as f64;
            let v = set.ocp(Electrode::Pos, theta).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn full_cell_ocv_at_full_charge_is_plausible() {
        let set = OcpSet::default();
        let p = ParameterSet::default();
        let ocv = set.ocp(Electrode::Pos, p.theta_p_min).unwrap()
            - set.ocp(Electrode::Neg, p.theta_n_max).unwrap();
        assert!((2.5..=4.4).contains(&ocv), "OCV {ocv}");
    }

    #[test]
    fn single_point_table_is_identity_lookup() {
        let curve = OcpCurve::from_points(&[(0.5, 3.6)]).unwrap();
        let set = OcpSet {
            pos: curve.clone(),
            neg: curve,
        };
        assert_eq!(set.ocp(Electrode::Pos, 0.5).unwrap(), 3.6);
    }

    #[test]
    fn interpolant_passes_through_nodes() {
        let curve = OcpCurve::from_csv_str("x,v\n0.0,1.0\n0.3,0.7\n0.6,0.65\n1.0,0.1\n").unwrap();
        for (x, y) in [(0.0, 1.0), (0.3, 0.7), (0.6, 0.65), (1.0, 0.1)] {
            assert!((curve.eval(x) - y).abs() < 1e-14);
        }
    }

    #[test]
    fn slope_matches_finite_difference() {
        let curve = OcpCurve::graphite();
        for &theta in &[0.05, 0.123, 0.41, 0.77, 0.93] {
            let h = 1e-7;
            let fd = (curve.eval(theta + h) - curve.eval(theta - h)) / (2.0 * h);
            let (_, d) = curve.eval_with_slope(theta);
            assert!((fd - d).abs() < 1e-4 * d.abs().max(1.0), "{theta}: {fd} vs {d}");
        }
    }

    #[test]
    fn out_of_range_names_electrode() {
        let set = OcpSet::default();
        let err = set.ocp(Electrode::Neg, 1.2).unwrap_err();
        assert!(err.to_string().contains("negative"));
        assert!(err.to_string().contains("1.2"));
    }

    #[test]
    fn monotone_data_gives_monotone_interpolant() {
        let curve =
            OcpCurve::from_points(&[(0.0, 4.0), (0.1, 3.9), (0.2, 3.89), (0.5, 3.5), (1.0, 3.0)])
                .unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=1000 {
            let v = curve.eval(i as f64 / 1000.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }
}
