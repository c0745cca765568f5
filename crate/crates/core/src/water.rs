//! Water-demand case study.
//!
//! Each household consumes water as an inhomogeneous compound Poisson
//! process: events arrive with an hour-of-day dependent rate and each event
//! draws a volume from a normal distribution truncated at zero. A meter is
//! read at t = 0 and then at the times of a homogeneous Poisson process, and
//! only the cumulative volume at those times is kept.
//!
//! Fitting treats every pair of consecutive readings as a window whose
//! incidence over the 24 hour-of-day cells is the (fractional) number of
//! hours it spends in each cell. With the time weights fixed by physical
//! length, only the hourly means remain unknown; they solve one NNLS
//! problem over all windows, refit with weights that account for longer
//! increments being noisier. For a compound Poisson process the variance of
//! an increment is its mean times `E[X²]/E[X]`, so a single dispersion
//! factor, estimated from the squared residuals, gives every hourly
//! variance.
//!
//! Timestamps are whole seconds since the Unix epoch, so the hour of day is
//! the UTC hour.

use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use crate::error::{Error, Result};
use crate::nnls;
use crate::seeding::{derive_seed_str, rng};

pub const HOURS: usize = 24;
const SECONDS_PER_HOUR: i64 = 3600;
const SECONDS_PER_DAY: i64 = 86_400;
/// Reweighted least-squares passes after the unweighted fit.
const REWEIGHT_PASSES: usize = 2;
/// Smallest fitted interval volume used for weighting, relative to the mean.
const VOLUME_FLOOR: f64 = 1e-3;
/// 2024-01-01T00:00:00Z.
pub const SIMULATION_START: i64 = 1_704_067_200;

const TWO_PEAK: &str = include_str!("../profiles/two_peak.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    /// Events per hour for each hour of the day.
    pub hourly_rate: Vec<f64>,
    /// Mean and standard deviation of the volume per event, in liters,
    /// before truncation at zero.
    pub jump_mean: f64,
    pub jump_sd: f64,
    pub horizon_days: u32,
}

impl DemandProfile {
    /// Default profile with a morning and an evening peak.
    pub fn two_peak() -> Self {
        serde_json::from_str(TWO_PEAK).expect("bundled profile is valid")
    }

    pub fn from_json<R: Read>(reader: R) -> Result<Self> {
        let p: DemandProfile = serde_json::from_reader(reader).map_err(|e| Error::Parse(format!("profile: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hourly_rate.len() != HOURS {
            return Err(Error::InvalidParameter(format!("{} hourly rates, expected {HOURS}", self.hourly_rate.len())));
        }
        if self.hourly_rate.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidParameter("hourly rates must be finite and non-negative".into()));
        }
        if !(self.jump_mean > 0.0 && self.jump_mean.is_finite()) || !(self.jump_sd >= 0.0 && self.jump_sd.is_finite()) {
            return Err(Error::InvalidParameter("need jump_mean > 0 and jump_sd ≥ 0".into()));
        }
        if self.horizon_days == 0 {
            return Err(Error::InvalidParameter("horizon_days must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub cumulative_liters: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterLog {
    pub household_id: String,
    pub readings: Vec<Reading>,
}

impl MeterLog {
    /// Timestamps strictly increasing, volumes non-decreasing.
    pub fn validate(&self) -> Result<()> {
        for w in self.readings.windows(2) {
            if w[1].timestamp <= w[0].timestamp || w[1].cumulative_liters < w[0].cumulative_liters {
                return Err(Error::InvalidParameter(format!(
                    "household {}: readings at {} and {} are out of order or decreasing",
                    self.household_id, w[0].timestamp, w[1].timestamp
                )));
            }
        }
        Ok(())
    }
}

/// Simulated logs plus the true consumption per household and absolute
/// hour (`households × 24·days`, liters).
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub logs: Vec<MeterLog>,
    pub hourly_consumption: DMatrix<f64>,
}

impl Simulation {
    /// Total consumption of the given households per absolute hour.
    pub fn community_series(&self, households: &[usize]) -> Vec<f64> {
        (0..self.hourly_consumption.ncols())
            .map(|k| households.iter().map(|&i| self.hourly_consumption[(i, k)]).sum())
            .collect()
    }

    /// Mean consumption per household for each hour of the day.
    pub fn hourly_mean(&self, households: &[usize]) -> Vec<f64> {
        let series = self.community_series(households);
        let days = series.len() / HOURS;
        (0..HOURS)
            .map(|h| (0..days).map(|d| series[d * HOURS + h]).sum::<f64>() / (days * households.len()) as f64)
            .collect()
    }
}

pub fn household_id(index: usize) -> String {
    format!("h{index:05}")
}

fn sample_jump<R: Rng + ?Sized>(profile: &DemandProfile, rng: &mut R) -> f64 {
    if profile.jump_sd == 0.0 {
        return profile.jump_mean;
    }
    let normal = Normal::new(profile.jump_mean, profile.jump_sd).expect("validated parameters");
    loop {
        let v = normal.sample(rng);
        if v >= 0.0 {
            return v;
        }
    }
}

fn simulate_one(profile: &DemandProfile, index: usize, report_rate: f64, seed: u64) -> (MeterLog, Vec<f64>) {
    let id = household_id(index);
    let mut rng = rng(derive_seed_str(seed, &id));
    let horizon_h = f64::from(profile.horizon_days) * HOURS as f64;
    let mut hourly = vec![0.0; profile.horizon_days as usize * HOURS];

    // Events by thinning a homogeneous process at the peak rate.
    let mut events: Vec<(f64, f64)> = Vec::new();
    let peak = profile.hourly_rate.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        let gap = Exp::new(peak).expect("positive rate");
        let mut t = 0.0;
        loop {
            t += gap.sample(&mut rng);
            if t >= horizon_h {
                break;
            }
            let k = t.floor() as usize;
            if rng.random::<f64>() * peak < profile.hourly_rate[k % HOURS] {
                let v = sample_jump(profile, &mut rng);
                hourly[k] += v;
                events.push((t * SECONDS_PER_HOUR as f64, v));
            }
        }
    }

    let mut times = vec![0i64];
    let gap = Exp::new(report_rate / SECONDS_PER_DAY as f64).expect("positive rate");
    let horizon_s = horizon_h * SECONDS_PER_HOUR as f64;
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        if t >= horizon_s {
            break;
        }
        let s = t.round() as i64;
        if s > *times.last().unwrap() && (s as f64) < horizon_s {
            times.push(s);
        }
    }

    let mut readings = Vec::with_capacity(times.len());
    let mut total = 0.0;
    let mut e = 0;
    for s in times {
        while e < events.len() && events[e].0 < s as f64 {
            total += events[e].1;
            e += 1;
        }
        readings.push(Reading { timestamp: SIMULATION_START + s, cumulative_liters: total });
    }
    (MeterLog { household_id: id, readings }, hourly)
}

/// Simulates `n_households` meters over the profile's horizon, reading each
/// at start and then at `report_rate` readings per day on average.
pub fn simulate_households(
    profile: &DemandProfile,
    n_households: usize,
    report_rate: f64,
    seed: u64,
) -> Result<Simulation> {
    profile.validate()?;
    if n_households == 0 {
        return Err(Error::InvalidParameter("need at least one household".into()));
    }
    if !(report_rate > 0.0 && report_rate.is_finite()) {
        return Err(Error::InvalidParameter(format!("report rate must be positive, got {report_rate}")));
    }
    let per: Vec<(MeterLog, Vec<f64>)> =
        (0..n_households).into_par_iter().map(|i| simulate_one(profile, i, report_rate, seed)).collect();
    let hours = profile.horizon_days as usize * HOURS;
    let mut hourly_consumption = DMatrix::zeros(n_households, hours);
    let mut logs = Vec::with_capacity(n_households);
    for (i, (log, h)) in per.into_iter().enumerate() {
        for (k, v) in h.into_iter().enumerate() {
            hourly_consumption[(i, k)] = v;
        }
        logs.push(log);
    }
    Ok(Simulation { logs, hourly_consumption })
}

/// Hours spent in each hour-of-day cell by the interval `[t0, t1)`.
pub fn hour_coverage(t0: i64, t1: i64) -> [f64; HOURS] {
    let mut c = [0.0; HOURS];
    let mut k = t0.div_euclid(SECONDS_PER_HOUR);
    while k * SECONDS_PER_HOUR < t1 {
        let lo = t0.max(k * SECONDS_PER_HOUR);
        let hi = t1.min((k + 1) * SECONDS_PER_HOUR);
        c[k.rem_euclid(HOURS as i64) as usize] += (hi - lo) as f64 / SECONDS_PER_HOUR as f64;
        k += 1;
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandEstimate {
    /// Liters per household per hour.
    pub hourly_mean: Vec<f64>,
    pub hourly_var: Vec<f64>,
    /// Variance-to-mean ratio of hourly consumption, `E[X²]/E[X]` for event
    /// volume `X`.
    pub dispersion: f64,
    /// Households used for the fit.
    pub community_size: usize,
}

/// Fits hourly means and variances from meter logs.
pub fn fit_demand(logs: &[MeterLog]) -> Result<DemandEstimate> {
    if logs.is_empty() {
        return Err(Error::EmptyInput("no meter logs"));
    }
    let mut rows: Vec<[f64; HOURS]> = Vec::new();
    let mut volumes = Vec::new();
    for log in logs {
        if log.readings.len() < 2 {
            return Err(Error::InsufficientReadings { household: log.household_id.clone() });
        }
        log.validate()?;
        for w in log.readings.windows(2) {
            rows.push(hour_coverage(w[0].timestamp, w[1].timestamp));
            volumes.push(w[1].cumulative_liters - w[0].cumulative_liters);
        }
    }
    let a = DMatrix::from_fn(rows.len(), HOURS, |i, h| rows[i][h]);
    let b = DVector::from_vec(volumes);
    let solve = |a: &DMatrix<f64>, b: &DVector<f64>| nnls::nnls(a, b, 10 * HOURS, nnls::DEFAULT_TOL).map(|r| r.x);
    let mut mean = solve(&a, &b)?;
    for _ in 0..REWEIGHT_PASSES {
        // An increment's variance is proportional to its expected volume, so
        // rows are weighted by the inverse square root of the fitted volume.
        let expected = &a * &mean;
        let floor = VOLUME_FLOOR * expected.mean().max(f64::MIN_POSITIVE);
        let weight = expected.map(|v| 1.0 / v.max(floor).sqrt());
        let aw = DMatrix::from_fn(a.nrows(), HOURS, |i, h| weight[i] * a[(i, h)]);
        mean = solve(&aw, &b.component_mul(&weight))?;
    }
    let expected = &a * &mean;
    let resid = &b - &expected;
    let total = expected.sum();
    let dispersion = if total > 0.0 { resid.norm_squared() / total } else { 0.0 };
    let var = &mean * dispersion;
    Ok(DemandEstimate {
        hourly_mean: mean.iter().copied().collect(),
        hourly_var: var.iter().copied().collect(),
        dispersion,
        community_size: logs.len(),
    })
}

/// Mean and quantile of community consumption for each hour of the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityPrediction {
    pub households: usize,
    pub quantile: f64,
    pub mean: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CommunityPrediction {
    /// Largest hourly quantile.
    pub fn peak(&self) -> f64 {
        self.upper.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Models community consumption per hour as normal with mean `n·μ_h` and
/// variance `n·σ²_h`.
pub fn predict_community(estimate: &DemandEstimate, n_households: usize, quantile: f64) -> Result<CommunityPrediction> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::InvalidParameter(format!("quantile must lie in (0, 1), got {quantile}")));
    }
    let z = StatNormal::standard().inverse_cdf(quantile);
    let n = n_households as f64;
    let mean: Vec<f64> = estimate.hourly_mean.iter().map(|m| n * m).collect();
    let upper = mean
        .iter()
        .zip(&estimate.hourly_var)
        .map(|(m, v)| if quantile == 0.5 { *m } else { m + z * (n * v).sqrt() })
        .collect();
    Ok(CommunityPrediction { households: n_households, quantile, mean, upper })
}

/// Empirical `q`-quantile (linear interpolation between order statistics).
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn format_timestamp(t: i64) -> Result<String> {
    DateTime::<Utc>::from_timestamp(t, 0)
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Secs, true))
        .ok_or_else(|| Error::InvalidParameter(format!("timestamp {t} out of range")))
}

#[derive(Serialize, Deserialize)]
struct LogRow {
    household_id: String,
    timestamp: String,
    cumulative_liters: f64,
}

/// Writes logs as CSV: `household_id,timestamp,cumulative_liters`.
pub fn write_logs_csv<W: Write>(logs: &[MeterLog], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for log in logs {
        for r in &log.readings {
            w.serialize(LogRow {
                household_id: log.household_id.clone(),
                timestamp: format_timestamp(r.timestamp)?,
                cumulative_liters: r.cumulative_liters,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads logs written by [`write_logs_csv`]. Rows of one household must be
/// contiguous; households keep their first-appearance order.
pub fn read_logs_csv<R: Read>(reader: R) -> Result<Vec<MeterLog>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut logs: Vec<MeterLog> = Vec::new();
    for (line, row) in r.deserialize::<LogRow>().enumerate() {
        let row = row?;
        let t = DateTime::parse_from_rfc3339(&row.timestamp)
            .map_err(|e| Error::Parse(format!("row {}: timestamp `{}`: {e}", line + 1, row.timestamp)))?
            .timestamp();
        let reading = Reading { timestamp: t, cumulative_liters: row.cumulative_liters };
        match logs.last_mut() {
            Some(log) if log.household_id == row.household_id => log.readings.push(reading),
            _ => {
                if logs.iter().any(|l| l.household_id == row.household_id) {
                    return Err(Error::Parse(format!("rows of household {} are not contiguous", row.household_id)));
                }
                logs.push(MeterLog { household_id: row.household_id, readings: vec![reading] });
            }
        }
    }
    for log in &logs {
        log.validate()?;
    }
    Ok(logs)
}

/// Writes a prediction as a CSV curve: `hour,mean,quantile`.
pub fn write_prediction_csv<W: Write>(pred: &CommunityPrediction, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["hour", "mean", "quantile"])?;
    for h in 0..HOURS {
        w.write_record([h.to_string(), format!("{}", pred.mean[h]), format!("{}", pred.upper[h])])?;
    }
    w.flush()?;
    Ok(())
}
