//! Seeded noisy-sine OHLCV series for benchmarks and tests.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pipeline::OhlcvSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub rows: usize,
    pub seed: u64,
    pub level: f64,
    pub amplitude: f64,
    /// Sine period in trading days.
    pub period: f64,
    /// Standard deviation of the additive close noise.
    pub noise: f64,
    pub start: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rows: 1200,
            seed: 42,
            level: 60.0,
            amplitude: 15.0,
            period: 250.0,
            noise: 0.8,
            start: NaiveDate::from_ymd_opt(2015, 1, 2).expect("valid date"),
        }
    }
}

fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

pub fn noisy_sine(cfg: &SynthConfig) -> Result<OhlcvSeries> {
    if cfg.rows == 0 || cfg.period <= 0.0 || cfg.noise < 0.0 {
        return Err(Error::InvalidArgument(
            "synthetic series needs rows >= 1, period > 0 and noise >= 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let tau = std::f64::consts::TAU;

    let mut columns: [Vec<f64>; 5] = std::array::from_fn(|_| Vec::with_capacity(cfg.rows));
    let mut prev_close = cfg.level;
    for t in 0..cfg.rows {
        let phase = tau * t as f64 / cfg.period;
        let close = cfg.level + cfg.amplitude * phase.sin() + cfg.noise * unit.sample(&mut rng);
        let open = prev_close + 0.3 * cfg.noise * unit.sample(&mut rng);
        let high = open.max(close) + 0.5 * cfg.noise * unit.sample(&mut rng).abs();
        let low = open.min(close) - 0.5 * cfg.noise * unit.sample(&mut rng).abs();
        let volume = (1.0e6 * (1.0 + 0.3 * (phase * 3.0).cos()) + 5.0e4 * unit.sample(&mut rng)).round();
        for (c, v) in [open, high, low, close, volume].into_iter().enumerate() {
            columns[c].push(v);
        }
        prev_close = close;
    }
    OhlcvSeries::from_complete(business_days(cfg.start, cfg.rows), columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let cfg = SynthConfig { rows: 50, ..SynthConfig::default() };
        let a = noisy_sine(&cfg).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a, noisy_sine(&cfg).unwrap());
        assert!(a.dates.iter().all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
        for r in 0..50 {
            let [o, h, l, c, _] = std::array::from_fn(|k| a.columns[k][r].unwrap());
            assert!(h >= o.max(c) && l <= o.min(c));
        }
        let other = noisy_sine(&SynthConfig { seed: 7, ..cfg }).unwrap();
        assert_ne!(a, other);
    }
}
