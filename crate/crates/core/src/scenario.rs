//! Hourly generation and load data, CSV ingestion, and the synthetic
//! storm-day generator.

use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use gridmpc_milp::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_SIMULATION_HOURS: usize = 72;
pub const DEFAULT_LOOKAHEAD: usize = 24;
/// Shortest series a scenario file may hold.
pub const MIN_SCENARIO_HOURS: usize = DEFAULT_SIMULATION_HOURS + DEFAULT_LOOKAHEAD;

pub const CSV_HEADER: [&str; 7] = [
    "hour",
    "wind_kw",
    "solar_kw",
    "essential_kw",
    "regular_kw",
    "hilp",
    "comm_loss",
];

/// Immutable hourly series. All powers are kW and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTimeSeries<T> {
    wind: Vec<T>,
    solar: Vec<T>,
    essential: Vec<T>,
    regular: Vec<T>,
    hilp: Vec<bool>,
    comm_loss: Vec<bool>,
}

impl<T: Scalar> ScenarioTimeSeries<T> {
    pub fn new(
        wind: Vec<T>,
        solar: Vec<T>,
        essential: Vec<T>,
        regular: Vec<T>,
        hilp: Vec<bool>,
        comm_loss: Vec<bool>,
    ) -> Result<Self> {
        let n = wind.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        let lens = [solar.len(), essential.len(), regular.len(), hilp.len(), comm_loss.len()];
        if let Some(&bad) = lens.iter().find(|&&l| l != n) {
            return Err(Error::LengthMismatch(n, bad));
        }
        for (name, col) in [
            ("wind_kw", &wind),
            ("solar_kw", &solar),
            ("essential_kw", &essential),
            ("regular_kw", &regular),
        ] {
            if let Some(h) = col.iter().position(|v| !(v.is_finite() && *v >= T::zero())) {
                return Err(Error::Parse {
                    row: h + 1,
                    column: name.into(),
                    message: format!("power must be finite and nonnegative, got {}", col[h]),
                });
            }
        }
        Ok(Self {
            wind,
            solar,
            essential,
            regular,
            hilp,
            comm_loss,
        })
    }

    pub fn hours(&self) -> usize {
        self.wind.len()
    }

    pub fn wind(&self) -> &[T] {
        &self.wind
    }

    pub fn solar(&self) -> &[T] {
        &self.solar
    }

    pub fn essential(&self) -> &[T] {
        &self.essential
    }

    pub fn regular(&self) -> &[T] {
        &self.regular
    }

    pub fn generation(&self, hour: usize) -> T {
        self.wind[hour] + self.solar[hour]
    }

    pub fn is_hilp(&self, hour: usize) -> bool {
        self.hilp[hour]
    }

    pub fn is_comm_loss(&self, hour: usize) -> bool {
        self.comm_loss[hour]
    }

    pub fn hilp_hours(&self) -> Vec<usize> {
        flagged(&self.hilp)
    }

    pub fn comm_loss_hours(&self) -> Vec<usize> {
        flagged(&self.comm_loss)
    }

    /// Same data with the comm-loss flags replaced.
    pub fn with_comm_loss(&self, hours: &[usize]) -> Result<Self> {
        let mut flags = vec![false; self.hours()];
        for &h in hours {
            *flags.get_mut(h).ok_or_else(|| {
                Error::Scenario(format!("comm-loss hour {h} beyond series end {}", self.hours()))
            })? = true;
        }
        Ok(Self {
            comm_loss: flags,
            ..self.clone()
        })
    }

    /// First `hours` hours.
    pub fn truncated(&self, hours: usize) -> Result<Self> {
        if hours == 0 || hours > self.hours() {
            return Err(Error::Scenario(format!(
                "cannot truncate {} hours to {hours}",
                self.hours()
            )));
        }
        Ok(Self {
            wind: self.wind[..hours].to_vec(),
            solar: self.solar[..hours].to_vec(),
            essential: self.essential[..hours].to_vec(),
            regular: self.regular[..hours].to_vec(),
            hilp: self.hilp[..hours].to_vec(),
            comm_loss: self.comm_loss[..hours].to_vec(),
        })
    }

    /// Parses scenario CSV. Hours must run 0, 1, 2, ... and there must be at
    /// least [`MIN_SCENARIO_HOURS`] of them.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::Scenario(format!(
                "header must be `{}`",
                CSV_HEADER.join(",")
            )));
        }
        let mut cols: [Vec<T>; 4] = Default::default();
        let mut flags: [Vec<bool>; 2] = Default::default();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let cell = |c: usize| -> Result<&str> {
                rec.get(c).ok_or_else(|| Error::Parse {
                    row,
                    column: CSV_HEADER[c].into(),
                    message: "missing value".into(),
                })
            };
            let bad = |c: usize, message: String| Error::Parse {
                row,
                column: CSV_HEADER[c].into(),
                message,
            };
            let hour: usize = cell(0)?
                .parse()
                .map_err(|_| bad(0, format!("`{}` is not an hour index", cell(0).unwrap_or(""))))?;
            if hour != i {
                return Err(bad(0, format!("expected hour {i}, found {hour}")));
            }
            for (k, col) in cols.iter_mut().enumerate() {
                let raw = cell(k + 1)?;
                let v: T = raw
                    .parse()
                    .map_err(|_| bad(k + 1, format!("`{raw}` is not a number")))?;
                if !(v.is_finite() && v >= T::zero()) {
                    return Err(bad(k + 1, format!("power must be nonnegative, got {raw}")));
                }
                col.push(v);
            }
            for (k, col) in flags.iter_mut().enumerate() {
                let c = k + 5;
                col.push(match cell(c)? {
                    "0" => false,
                    "1" => true,
                    other => return Err(bad(c, format!("flag must be 0 or 1, got `{other}`"))),
                });
            }
        }
        let n = cols[0].len();
        if n < MIN_SCENARIO_HOURS {
            return Err(Error::TooShort {
                found: n,
                required: MIN_SCENARIO_HOURS,
            });
        }
        if let Some(h) = flags[1].iter().rposition(|&f| f) {
            if h >= n - DEFAULT_LOOKAHEAD {
                return Err(Error::Scenario(format!(
                    "comm-loss hour {h} lies outside the simulated range"
                )));
            }
        }
        let [wind, solar, essential, regular] = cols;
        let [hilp, comm_loss] = flags;
        Self::new(wind, solar, essential, regular, hilp, comm_loss)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        let flag = |b: bool| if b { "1" } else { "0" }.to_string();
        for h in 0..self.hours() {
            w.write_record([
                h.to_string(),
                self.wind[h].to_string(),
                self.solar[h].to_string(),
                self.essential[h].to_string(),
                self.regular[h].to_string(),
                flag(self.hilp[h]),
                flag(self.comm_loss[h]),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn flagged(flags: &[bool]) -> Vec<usize> {
    flags.iter().enumerate().filter(|(_, &f)| f).map(|(h, _)| h).collect()
}

pub fn load_scenario<T: Scalar>(path: &Path) -> Result<ScenarioTimeSeries<T>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ScenarioTimeSeries::read_csv(std::io::BufReader::new(file))
}

/// A read-only view of `len` hours starting at `start`. Load values for hours
/// after `known_through` that fall in a comm-loss period are flagged
/// unavailable; generation is always available.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioWindow<'a, T> {
    series: &'a ScenarioTimeSeries<T>,
    start: usize,
    len: usize,
    known_through: Option<usize>,
}

pub fn window<T: Scalar>(
    series: &ScenarioTimeSeries<T>,
    start: usize,
    len: usize,
    known_through: Option<usize>,
) -> Result<ScenarioWindow<'_, T>> {
    if len == 0 || start + len > series.hours() {
        return Err(Error::Scenario(format!(
            "window [{start}, {}) outside series of {} hours",
            start + len,
            series.hours()
        )));
    }
    Ok(ScenarioWindow {
        series,
        start,
        len,
        known_through,
    })
}

impl<'a, T: Scalar> ScenarioWindow<'a, T> {
    pub fn series(&self) -> &'a ScenarioTimeSeries<T> {
        self.series
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn known_through(&self) -> Option<usize> {
        self.known_through
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }

    pub fn wind(&self) -> &'a [T] {
        &self.series.wind[self.range()]
    }

    pub fn solar(&self) -> &'a [T] {
        &self.series.solar[self.range()]
    }

    /// Actual essential load, whether or not the controller may see it.
    pub fn essential(&self) -> &'a [T] {
        &self.series.essential[self.range()]
    }

    pub fn regular(&self) -> &'a [T] {
        &self.series.regular[self.range()]
    }

    pub fn generation(&self, k: usize) -> T {
        self.series.generation(self.start + k)
    }

    /// Whether the loads of absolute hour `hour` are visible from this window.
    pub fn hour_available(&self, hour: usize) -> bool {
        !self.series.comm_loss[hour] || self.known_through.is_some_and(|kt| hour <= kt)
    }

    /// Availability of window offset `k`.
    pub fn available(&self, k: usize) -> bool {
        self.hour_available(self.start + k)
    }
}

/// Knobs of the synthetic scenario. Powers are kW before the final rescaling
/// that matches mean generation to mean load.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub hours: usize,
    pub hilp: RangeInclusive<usize>,
    pub comm_loss: Option<RangeInclusive<usize>>,
    /// Clock hour of hour 0.
    pub start_clock: usize,
    pub essential_kw: f64,
    pub regular_kw: f64,
    /// Relative amplitude of the regular load's daily swing.
    pub regular_swing: f64,
    pub wind_kw: f64,
    pub solar_peak_kw: f64,
    /// Solar output kept during the event.
    pub hilp_solar_factor: f64,
    /// Wind in the hours adjacent to the event relative to the baseline mean.
    pub storm_front_factor: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            hours: MIN_SCENARIO_HOURS,
            hilp: 27..=39,
            comm_loss: Some(27..=39),
            start_clock: 0,
            essential_kw: 1.2,
            regular_kw: 1.6,
            regular_swing: 0.45,
            wind_kw: 2.0,
            solar_peak_kw: 3.0,
            hilp_solar_factor: 0.3,
            storm_front_factor: 1.35,
        }
    }
}

/// Hours on either side of the event with strengthened wind.
pub const STORM_FRONT_HOURS: usize = 3;

pub fn generate_synthetic<T: Scalar>(seed: u64, config: &GeneratorConfig) -> Result<ScenarioTimeSeries<T>> {
    let n = config.hours;
    if n == 0 {
        return Err(Error::Empty);
    }
    if config.hilp.is_empty() || *config.hilp.end() >= n {
        return Err(Error::Scenario(format!(
            "event window {:?} outside series of {n} hours",
            config.hilp
        )));
    }
    if let Some(cl) = &config.comm_loss {
        if cl.is_empty() || *cl.end() >= n {
            return Err(Error::Scenario(format!(
                "comm-loss window {cl:?} outside series of {n} hours"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    let clock = |h: usize| ((h + config.start_clock) % 24) as f64;
    let in_hilp = |h: usize| config.hilp.contains(&h);
    let (h0, h1) = (*config.hilp.start(), *config.hilp.end());
    let in_front = |h: usize| {
        !in_hilp(h) && h + STORM_FRONT_HOURS >= h0 && h <= h1 + STORM_FRONT_HOURS
    };

    // Wind: slowly wandering around the baseline, zero through the event.
    let mut wind = vec![0.0; n];
    let mut drift = 0.0;
    for w in wind.iter_mut() {
        drift = 0.7 * drift + 0.3 * rng.gen_range(-1.0..1.0);
        *w = config.wind_kw * (1.0 + 0.5 * drift);
    }
    let baseline: Vec<f64> = (0..n)
        .filter(|&h| !in_hilp(h) && !in_front(h))
        .map(|h| wind[h])
        .collect();
    let base_mean = if baseline.is_empty() {
        config.wind_kw
    } else {
        baseline.iter().sum::<f64>() / baseline.len() as f64
    };
    for (h, w) in wind.iter_mut().enumerate() {
        if in_hilp(h) {
            *w = 0.0;
        } else if in_front(h) {
            *w = base_mean * (config.storm_front_factor + 0.1 * rng.gen_range(0.0..1.0));
        }
    }

    let solar: Vec<f64> = (0..n)
        .map(|h| {
            let c = clock(h);
            let bell = if (6.0..=18.0).contains(&c) {
                (std::f64::consts::PI * (c - 6.0) / 12.0).sin()
            } else {
                0.0
            };
            let cloud = 1.0 - 0.2 * rng.gen_range(0.0..1.0);
            let storm = if in_hilp(h) { config.hilp_solar_factor } else { 1.0 };
            config.solar_peak_kw * bell * cloud * storm
        })
        .collect();

    let essential: Vec<f64> = (0..n)
        .map(|_| config.essential_kw * (1.0 + 0.02 * rng.gen_range(-1.0..1.0)))
        .collect();
    let regular: Vec<f64> = (0..n)
        .map(|h| {
            let daily = 1.0 + config.regular_swing * (tau * (clock(h) - 19.0) / 24.0).cos();
            config.regular_kw * daily * (1.0 + 0.08 * rng.gen_range(-1.0..1.0))
        })
        .collect();

    let load_mean = (essential.iter().sum::<f64>() + regular.iter().sum::<f64>()) / n as f64;
    let gen_mean = (wind.iter().sum::<f64>() + solar.iter().sum::<f64>()) / n as f64;
    let scale = if gen_mean > 0.0 { load_mean / gen_mean } else { 1.0 };

    // Rounded to 1e-4 kW so the CSV stays readable.
    let conv = |v: f64| T::lit((v * 1e4).round() / 1e4);
    let comm_loss = (0..n)
        .map(|h| config.comm_loss.as_ref().is_some_and(|r| r.contains(&h)))
        .collect();
    ScenarioTimeSeries::new(
        wind.iter().map(|&w| conv(w * scale)).collect(),
        solar.iter().map(|&s| conv(s * scale)).collect(),
        essential.into_iter().map(conv).collect(),
        regular.into_iter().map(conv).collect(),
        (0..n).map(in_hilp).collect(),
        comm_loss,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioTimeSeries<f64> {
        let n = 6;
        ScenarioTimeSeries::new(
            vec![1.0; n],
            vec![0.5; n],
            vec![1.0; n],
            vec![2.0; n],
            vec![false; n],
            vec![false, false, true, true, false, false],
        )
        .unwrap()
    }

    #[test]
    fn window_flags_follow_known_through() {
        let s = tiny();
        let w = window(&s, 2, 4, Some(1)).unwrap();
        assert_eq!((0..4).map(|k| w.available(k)).collect::<Vec<_>>(), [false, false, true, true]);
        let w = window(&s, 2, 4, Some(2)).unwrap();
        assert_eq!((0..4).map(|k| w.available(k)).collect::<Vec<_>>(), [true, false, true, true]);
        assert!(window(&s, 3, 4, None).is_err());
        assert_eq!(w.regular(), &[2.0; 4]);
    }

    #[test]
    fn negative_power_rejected_at_construction() {
        let err = ScenarioTimeSeries::new(
            vec![-1.0],
            vec![0.0],
            vec![0.0],
            vec![0.0],
            vec![false],
            vec![false],
        )
        .unwrap_err();
        assert!(err.to_string().contains("wind_kw"));
    }

    #[test]
    fn generator_rejects_event_past_end() {
        let cfg = GeneratorConfig {
            hilp: 90..=100,
            ..GeneratorConfig::default()
        };
        assert!(generate_synthetic::<f64>(1, &cfg).is_err());
    }
}
