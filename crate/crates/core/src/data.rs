//! Futures panels: ingestion, roll-adjusted returns, constant-maturity returns, descriptive
//! statistics and a synthetic panel generator.
//!
//! Time is measured in ACT/365 year fractions from the first date of the panel.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::statespace::MeasurementMode;

pub const TRADING_DAYS: f64 = 252.0;
pub const DAYS_PER_YEAR: f64 = 365.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    pub price: f64,
    pub maturity: NaiveDate,
}

/// Daily prices per contract slot (c1 = nearest expiry).
#[derive(Debug, Clone)]
pub struct FuturesPanel {
    pub dates: Vec<NaiveDate>,
    pub slots: Vec<String>,
    /// `quotes[date][slot]`.
    pub quotes: Vec<Vec<Option<Quote>>>,
}

#[derive(Debug, Deserialize)]
struct Row {
    date: String,
    slot: String,
    price: String,
    maturity: String,
}

fn parse_date(s: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::data(Some(line), format!("bad date '{s}': {e}")))
}

/// Orders slot labels by their numeric suffix (c2 before c10), then lexically.
fn slot_key(s: &str) -> (u64, String) {
    let digits: String = s.chars().rev().take_while(|c| c.is_ascii_digit()).collect();
    let n = digits.chars().rev().collect::<String>().parse().unwrap_or(u64::MAX);
    (n, s.to_string())
}

pub fn ingest(path: impl AsRef<Path>) -> Result<FuturesPanel> {
    let f = std::fs::File::open(path)?;
    ingest_reader(f)
}

/// Reads `date,slot,price,maturity` rows. Dates must appear in non-decreasing order.
pub fn ingest_reader<R: Read>(reader: R) -> Result<FuturesPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in ["date", "slot", "price", "maturity"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::data(Some(1), format!("missing column '{col}'")));
        }
    }
    let mut rows: Vec<(usize, NaiveDate, String, Quote)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut last: Option<NaiveDate> = None;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: Row = rec
            .deserialize(Some(&headers))
            .map_err(|e| Error::data(Some(line), e.to_string()))?;
        let date = parse_date(&row.date, line)?;
        let maturity = parse_date(&row.maturity, line)?;
        let price: f64 = row
            .price
            .trim()
            .parse()
            .map_err(|_| Error::data(Some(line), format!("bad price '{}'", row.price)))?;
        if !(price > 0.0) || !price.is_finite() {
            return Err(Error::data(Some(line), format!("price must be > 0, got {price}")));
        }
        if maturity < date {
            return Err(Error::data(Some(line), format!("maturity {maturity} before date {date}")));
        }
        if let Some(prev) = last {
            if date < prev {
                return Err(Error::data(Some(line), format!("date {date} after {prev} is out of order")));
            }
        }
        last = Some(date);
        if !seen.insert((date, row.slot.clone())) {
            return Err(Error::data(Some(line), format!("duplicate ({date}, {})", row.slot)));
        }
        rows.push((line, date, row.slot, Quote { price, maturity }));
    }
    if rows.is_empty() {
        return Err(Error::data(None, "no observations"));
    }
    let mut slots: Vec<String> = rows.iter().map(|r| r.2.clone()).collect();
    slots.sort_by_key(|s| slot_key(s));
    slots.dedup();
    let slot_idx: HashMap<&str, usize> = slots.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut dates: Vec<NaiveDate> = rows.iter().map(|r| r.1).collect();
    dates.dedup();
    let date_idx: HashMap<NaiveDate, usize> = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut quotes = vec![vec![None; slots.len()]; dates.len()];
    let mut lines = vec![vec![0usize; slots.len()]; dates.len()];
    for (line, date, slot, q) in &rows {
        let (i, s) = (date_idx[date], slot_idx[slot.as_str()]);
        quotes[i][s] = Some(*q);
        lines[i][s] = *line;
    }
    for (i, day) in quotes.iter().enumerate() {
        let mut prev: Option<NaiveDate> = None;
        for (s, q) in day.iter().enumerate() {
            if let Some(q) = q {
                if prev.is_some_and(|p| q.maturity <= p) {
                    return Err(Error::data(
                        Some(lines[i][s]),
                        format!("maturities not increasing across slots on {}", dates[i]),
                    ));
                }
                prev = Some(q.maturity);
            }
        }
    }
    Ok(FuturesPanel { dates, slots, quotes })
}

impl FuturesPanel {
    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn n_observations(&self) -> usize {
        self.quotes.iter().flatten().filter(|q| q.is_some()).count()
    }

    /// ACT/365 year fraction of `date` from the first panel date.
    pub fn year_fraction(&self, date: NaiveDate) -> f64 {
        (date - self.dates[0]).num_days() as f64 / DAYS_PER_YEAR
    }

    /// Price of the contract maturing at `maturity` on date index `i`, in whatever slot it
    /// occupies that day.
    pub fn price_of(&self, i: usize, maturity: NaiveDate) -> Option<f64> {
        self.quotes[i]
            .iter()
            .flatten()
            .find(|q| q.maturity == maturity)
            .map(|q| q.price)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "slot", "price", "maturity"])?;
        for (i, day) in self.quotes.iter().enumerate() {
            for (s, q) in day.iter().enumerate() {
                if let Some(q) = q {
                    w.write_record([
                        self.dates[i].to_string(),
                        self.slots[s].clone(),
                        format!("{}", q.price),
                        q.maturity.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    LogPrices,
    LogReturns,
    ConstantMaturityReturns,
}

/// Observation panel ready for the filter. Entry `[i][s]` belongs to observation date `i`
/// and series `s`; the anchor date preceding the first observation sits at `origin_time`.
#[derive(Debug, Clone)]
pub struct ObservationSeries {
    pub kind: SeriesKind,
    pub labels: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub origin_time: f64,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub valid: Vec<Vec<bool>>,
    /// Set where a contract enters the panel and its return is defined as zero.
    pub entered: Vec<Vec<bool>>,
    /// Absolute maturity (year fraction) carried by each entry.
    pub maturities: Vec<Vec<f64>>,
    /// Initial log-price offsets (log-price series only).
    pub offsets: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl ObservationSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_series(&self) -> usize {
        self.labels.len()
    }

    pub fn measurement_mode(&self) -> MeasurementMode {
        match self.kind {
            SeriesKind::LogPrices => MeasurementMode::LogPrices,
            _ => MeasurementMode::LogReturns,
        }
    }

    fn empty(kind: SeriesKind, labels: Vec<String>, origin_time: f64) -> Self {
        Self {
            kind,
            labels,
            dates: Vec::new(),
            origin_time,
            times: Vec::new(),
            values: Vec::new(),
            valid: Vec::new(),
            entered: Vec::new(),
            maturities: Vec::new(),
            offsets: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Builds a series directly from arrays (all entries valid, zero offsets).
    pub fn from_values(
        kind: SeriesKind,
        origin_time: f64,
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
        maturities: Vec<Vec<f64>>,
    ) -> Self {
        let k = values.first().map_or(0, Vec::len);
        let n = values.len();
        let epoch = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        Self {
            kind,
            labels: (1..=k).map(|i| format!("c{i}")).collect(),
            dates: times
                .iter()
                .map(|t| epoch + Duration::days((t * DAYS_PER_YEAR).round() as i64))
                .collect(),
            origin_time,
            times,
            values,
            valid: vec![vec![true; k]; n],
            entered: vec![vec![false; k]; n],
            maturities,
            offsets: vec![vec![0.0; k]; n],
            warnings: Vec::new(),
        }
    }

    /// Keeps only observations `range` (the anchor moves to the preceding date).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let origin_time = if range.start == 0 {
            self.origin_time
        } else {
            self.times[range.start - 1]
        };
        Self {
            kind: self.kind,
            labels: self.labels.clone(),
            dates: self.dates[range.clone()].to_vec(),
            origin_time,
            times: self.times[range.clone()].to_vec(),
            values: self.values[range.clone()].to_vec(),
            valid: self.valid[range.clone()].to_vec(),
            entered: self.entered[range.clone()].to_vec(),
            maturities: self.maturities[range.clone()].to_vec(),
            offsets: self.offsets[range].to_vec(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "series", "value", "valid", "entered", "maturity"])?;
        for i in 0..self.len() {
            for s in 0..self.n_series() {
                w.write_record([
                    self.dates[i].to_string(),
                    self.labels[s].clone(),
                    format!("{}", self.values[i][s]),
                    (self.valid[i][s] as u8).to_string(),
                    (self.entered[i][s] as u8).to_string(),
                    format!("{}", self.maturities[i][s]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Log returns per slot. On a roll date each slot's return is taken on the contract it
/// holds today, against that same contract's price yesterday; a contract with no price
/// yesterday (the newly listed one) gets a zero return and is flagged in `entered`.
pub fn to_returns(panel: &FuturesPanel) -> Result<ObservationSeries> {
    if panel.n_dates() < 2 {
        return Err(Error::Domain("returns need at least two dates".into()));
    }
    let k = panel.n_slots();
    let mut out = ObservationSeries::empty(SeriesKind::LogReturns, panel.slots.clone(), 0.0);
    for i in 1..panel.n_dates() {
        let mut vals = vec![0.0; k];
        let mut valid = vec![false; k];
        let mut entered = vec![false; k];
        let mut mats = vec![f64::NAN; k];
        for s in 0..k {
            let Some(q) = panel.quotes[i][s] else { continue };
            mats[s] = panel.year_fraction(q.maturity);
            valid[s] = true;
            match panel.price_of(i - 1, q.maturity) {
                Some(p) => vals[s] = (q.price / p).ln(),
                None => entered[s] = true,
            }
        }
        out.dates.push(panel.dates[i]);
        out.times.push(panel.year_fraction(panel.dates[i]));
        out.values.push(vals);
        out.valid.push(valid);
        out.entered.push(entered);
        out.maturities.push(mats);
        out.offsets.push(vec![0.0; k]);
    }
    Ok(out)
}

/// Log prices for dates after the first, with each contract's first-date log price as
/// offset. Contracts not quoted on the first date are masked out.
pub fn to_log_prices(panel: &FuturesPanel) -> Result<ObservationSeries> {
    if panel.n_dates() < 2 {
        return Err(Error::Domain("log-price series need at least two dates".into()));
    }
    let k = panel.n_slots();
    let mut out = ObservationSeries::empty(SeriesKind::LogPrices, panel.slots.clone(), 0.0);
    for i in 1..panel.n_dates() {
        let mut vals = vec![0.0; k];
        let mut valid = vec![false; k];
        let mut mats = vec![f64::NAN; k];
        let mut offs = vec![0.0; k];
        for s in 0..k {
            let Some(q) = panel.quotes[i][s] else { continue };
            mats[s] = panel.year_fraction(q.maturity);
            vals[s] = q.price.ln();
            if let Some(p0) = panel.price_of(0, q.maturity) {
                offs[s] = p0.ln();
                valid[s] = true;
            }
        }
        out.dates.push(panel.dates[i]);
        out.times.push(panel.year_fraction(panel.dates[i]));
        out.values.push(vals);
        out.valid.push(valid);
        out.entered.push(vec![false; k]);
        out.maturities.push(mats);
        out.offsets.push(offs);
    }
    Ok(out)
}

/// Convex interpolation weights for `target` among sorted times to maturity: returns
/// (lower index, upper index, lower weight, upper weight), or None if unbracketed.
pub fn interpolation_weights(ttm: &[f64], target: f64) -> Option<(usize, usize, f64, f64)> {
    for (i, &t) in ttm.iter().enumerate() {
        if (t - target).abs() < 1e-12 {
            return Some((i, i, 1.0, 0.0));
        }
    }
    for i in 0..ttm.len().saturating_sub(1) {
        let (lo, hi) = (ttm[i], ttm[i + 1]);
        if lo < target && target < hi {
            let wl = (hi - target) / (hi - lo);
            return Some((i, i + 1, wl, 1.0 - wl));
        }
    }
    None
}

/// Constant-maturity returns: for each target time to maturity (years), the convex
/// combination, linear in time to maturity, of the same-contract returns of the two
/// bracketing contracts. Unbracketed targets are masked with a warning.
pub fn to_constant_maturity(panel: &FuturesPanel, targets: &[f64]) -> Result<ObservationSeries> {
    if targets.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Domain("target maturities must be > 0".into()));
    }
    let rets = to_returns(panel)?;
    let labels = targets.iter().map(|t| format!("cm{t}")).collect();
    let mut out = ObservationSeries::empty(SeriesKind::ConstantMaturityReturns, labels, 0.0);
    let m = targets.len();
    let mut unbracketed = vec![0usize; m];
    for i in 0..rets.len() {
        let t = rets.times[i];
        let live: Vec<(f64, f64)> = (0..rets.n_series())
            .filter(|&s| rets.valid[i][s] && !rets.entered[i][s])
            .map(|s| (rets.maturities[i][s] - t, rets.values[i][s]))
            .collect();
        let ttm: Vec<f64> = live.iter().map(|x| x.0).collect();
        let mut vals = vec![0.0; m];
        let mut valid = vec![false; m];
        for (j, &tau) in targets.iter().enumerate() {
            match interpolation_weights(&ttm, tau) {
                Some((a, b, wa, wb)) => {
                    vals[j] = wa * live[a].1 + wb * live[b].1;
                    valid[j] = true;
                }
                None => unbracketed[j] += 1,
            }
        }
        out.dates.push(rets.dates[i]);
        out.times.push(t);
        out.values.push(vals);
        out.valid.push(valid);
        out.entered.push(vec![false; m]);
        out.maturities.push(targets.iter().map(|tau| t + tau).collect());
        out.offsets.push(vec![0.0; m]);
    }
    for (j, n) in unbracketed.iter().enumerate() {
        if *n > 0 {
            out.warnings.push(format!(
                "target {} unbracketed on {n} dates; masked",
                targets[j]
            ));
        }
    }
    Ok(out)
}

/// Descriptive statistics in the layout of the data-description tables.
#[derive(Debug, Clone)]
pub struct PanelSummary {
    pub name: String,
    pub n_dates: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub n_futures: usize,
    pub min_price: f64,
    pub max_price: f64,
    pub avg_price: f64,
    /// Mean of the per-slot volatilities.
    pub avg_vol: f64,
    /// Annualised volatility of roll-adjusted returns per slot.
    pub slot_vols: Vec<(String, f64)>,
    /// Annualised volatility of the first slot's returns per calendar month (1..=12);
    /// NaN for months without returns.
    pub month_vols: Vec<f64>,
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn summarize(panel: &FuturesPanel, name: &str) -> Result<PanelSummary> {
    let rets = to_returns(panel)?;
    let prices: Vec<f64> = panel.quotes.iter().flatten().flatten().map(|q| q.price).collect();
    let ann = TRADING_DAYS.sqrt();
    let slot_vols: Vec<(String, f64)> = (0..panel.n_slots())
        .map(|s| {
            let xs: Vec<f64> = (0..rets.len())
                .filter(|&i| rets.valid[i][s] && !rets.entered[i][s])
                .map(|i| rets.values[i][s])
                .collect();
            (panel.slots[s].clone(), std_dev(&xs) * ann)
        })
        .collect();
    let mut by_month: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for i in 0..rets.len() {
        if rets.valid[i][0] && !rets.entered[i][0] {
            by_month.entry(rets.dates[i].month()).or_default().push(rets.values[i][0]);
        }
    }
    let month_vols = (1..=12)
        .map(|m| by_month.get(&m).map_or(f64::NAN, |xs| std_dev(xs) * ann))
        .collect();
    let finite: Vec<f64> = slot_vols.iter().map(|x| x.1).filter(|v| v.is_finite()).collect();
    Ok(PanelSummary {
        name: name.to_string(),
        n_dates: panel.n_dates(),
        start: panel.dates[0],
        end: *panel.dates.last().unwrap(),
        n_futures: panel.n_slots(),
        min_price: prices.iter().copied().fold(f64::INFINITY, f64::min),
        max_price: prices.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        avg_price: prices.iter().sum::<f64>() / prices.len() as f64,
        avg_vol: finite.iter().sum::<f64>() / finite.len().max(1) as f64,
        slot_vols,
        month_vols,
    })
}

const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];

impl PanelSummary {
    /// `name,dates,start_date,end_date,futures,min_price,max_price,avg_price,avg_vol`
    pub fn write_description<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "name", "dates", "start_date", "end_date", "futures", "min_price", "max_price",
            "avg_price", "avg_vol",
        ])?;
        w.write_record([
            self.name.clone(),
            self.n_dates.to_string(),
            self.start.format("%d/%m/%y").to_string(),
            self.end.format("%d/%m/%y").to_string(),
            self.n_futures.to_string(),
            format!("{:.2}", self.min_price),
            format!("{:.2}", self.max_price),
            format!("{:.2}", self.avg_price),
            format!("{:.2}%", 100.0 * self.avg_vol),
        ])?;
        w.flush()?;
        Ok(())
    }

    /// `contract,<name>` with one row per slot.
    pub fn write_slot_vols<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["contract", self.name.as_str()])?;
        for (s, v) in &self.slot_vols {
            w.write_record([s.clone(), format!("{:.2}%", 100.0 * v)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `calendar_month,<name>` with one row per month.
    pub fn write_month_vols<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["calendar_month", self.name.as_str()])?;
        for (m, v) in MONTHS.iter().zip(&self.month_vols) {
            let cell = if v.is_finite() { format!("{:.2}%", 100.0 * v) } else { "-".into() };
            w.write_record([m.to_string(), cell])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Settings for a simulated futures panel.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub start: NaiveDate,
    /// Number of business days (weekends skipped).
    pub n_dates: usize,
    pub n_slots: usize,
    /// Listed expiry months, e.g. [3, 6, 9, 12].
    pub expiry_months: Vec<u32>,
    pub expiry_day: u32,
    pub initial_price: f64,
    /// Standard deviation of i.i.d. noise added to log prices.
    pub noise: f64,
    pub substeps: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2010, 1, 4).unwrap(),
            n_dates: 500,
            n_slots: 5,
            expiry_months: vec![3, 6, 9, 12],
            expiry_day: 15,
            initial_price: 100.0,
            noise: 5e-4,
            substeps: 4,
            seed: 1,
        }
    }
}

/// Simulated panel plus the variance path that produced it.
#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub panel: FuturesPanel,
    /// `variance[date][factor]`.
    pub variance: Vec<Vec<f64>>,
}

pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

fn listed_expiries(spec: &SyntheticSpec, from: NaiveDate, to: NaiveDate) -> Result<Vec<NaiveDate>> {
    if spec.expiry_months.is_empty() || spec.expiry_months.iter().any(|m| !(1..=12).contains(m)) {
        return Err(Error::Config("expiry months must be in 1..=12".into()));
    }
    let mut out = Vec::new();
    for y in from.year()..=to.year() + 1 + spec.n_slots as i32 {
        for &m in &spec.expiry_months {
            let d = NaiveDate::from_ymd_opt(y, m, spec.expiry_day)
                .ok_or_else(|| Error::Config(format!("invalid expiry day {}", spec.expiry_day)))?;
            if d > from {
                out.push(d);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Simulates a panel under the physical measure. Factor states (s₁, s₂, v) follow an Euler
/// scheme with full truncation on `substeps` sub-intervals per day, and every listed
/// contract is priced off the same states, so the panel is internally consistent.
pub fn simulate_panel(params: &ModelParams, spec: &SyntheticSpec) -> Result<SyntheticPanel> {
    for f in &params.factors {
        f.validate()?;
    }
    if spec.n_dates < 2 || spec.n_slots == 0 || spec.substeps == 0 {
        return Err(Error::Config("synthetic panel needs >= 2 dates, >= 1 slot, >= 1 substep".into()));
    }
    if !(spec.initial_price > 0.0) || spec.noise < 0.0 {
        return Err(Error::Config("initial price must be > 0 and noise >= 0".into()));
    }
    let dates = business_days(spec.start, spec.n_dates);
    let expiries = listed_expiries(spec, dates[0] - Duration::days(1), *dates.last().unwrap())?;
    let yf = |d: NaiveDate| (d - dates[0]).num_days() as f64 / DAYS_PER_YEAR;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(0);
    let mut noise_rng = ChaCha20Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(1);
    let n = params.n_factors();
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    let mut v: Vec<f64> = params.factors.iter().map(|f| f.v0).collect();
    let ln0 = spec.initial_price.ln();
    let mut quotes = Vec::with_capacity(dates.len());
    let mut variance = Vec::with_capacity(dates.len());
    for (i, &d) in dates.iter().enumerate() {
        if i > 0 {
            let (t0, t1) = (yf(dates[i - 1]), yf(d));
            let h = (t1 - t0) / spec.substeps as f64;
            let sq = h.sqrt();
            for k in 0..spec.substeps {
                let t = t0 + k as f64 * h;
                for (j, p) in params.factors.iter().enumerate() {
                    let z1: f64 = StandardNormal.sample(&mut rng);
                    let z2: f64 = StandardNormal.sample(&mut rng);
                    let vp = v[j].max(0.0);
                    let sv = vp.sqrt();
                    let dw2 = p.rho * z1 + (1.0 - p.rho * p.rho).sqrt() * z2;
                    s1[j] += (-p.lambda * s1[j] + p.pi_f * vp) * h + sv * sq * z1;
                    s2[j] += (-2.0 * p.lambda * s2[j] + vp) * h;
                    v[j] += (p.kappa * (p.season.theta(t) - vp) + p.sigma * p.pi_v * vp) * h
                        + p.sigma * sv * sq * dw2;
                }
            }
        }
        variance.push(v.iter().map(|x| x.max(0.0)).collect());
        let t = yf(d);
        let live: Vec<NaiveDate> = expiries.iter().copied().filter(|e| *e > d).take(spec.n_slots).collect();
        let row = live
            .iter()
            .map(|&e| {
                let tau = yf(e) - t;
                let mut lf = ln0;
                for (j, p) in params.factors.iter().enumerate() {
                    let damp = (-p.lambda * tau).exp();
                    lf += damp * s1[j] - 0.5 * damp * damp * s2[j];
                }
                let eps: f64 = StandardNormal.sample(&mut noise_rng);
                Some(Quote {
                    price: (lf + spec.noise * eps).exp(),
                    maturity: e,
                })
            })
            .collect();
        quotes.push(row);
    }
    Ok(SyntheticPanel {
        panel: FuturesPanel {
            dates,
            slots: (1..=spec.n_slots).map(|i| format!("c{i}")).collect(),
            quotes,
        },
        variance,
    })
}
