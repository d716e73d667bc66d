//! Hop latency, jitter and loss.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::Deserialize;
use thiserror::Error;

use crate::time::Duration;

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("unknown link preset `{0}` (expected lan, wifi or lte)")]
    UnknownPreset(String),
    #[error("invalid link model: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Jitter {
    None,
    /// Normal around the base latency.
    Normal { sd: Duration },
    /// Log-normal with the base latency as mean.
    LogNormal { sd: Duration },
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkModel {
    pub base_latency: Duration,
    pub jitter: Jitter,
    #[serde(default)]
    pub drop_probability: f64,
    pub ack_timeout: Duration,
}

impl LinkModel {
    pub fn preset(name: &str) -> Result<Self, LinkError> {
        let (base, jitter, ack) = match name {
            "lan" => (
                Duration::from_millis(1),
                Jitter::Normal { sd: Duration::from_micros(200) },
                Duration::from_millis(5),
            ),
            "wifi" => (
                Duration::from_millis(8),
                Jitter::Normal { sd: Duration::from_millis(2) },
                Duration::from_millis(40),
            ),
            "lte" => (
                Duration::from_millis(38),
                Jitter::LogNormal { sd: Duration::from_millis(10) },
                Duration::from_millis(200),
            ),
            other => return Err(LinkError::UnknownPreset(other.to_string())),
        };
        Ok(LinkModel {
            base_latency: base,
            jitter,
            drop_probability: 0.0,
            ack_timeout: ack,
        })
    }

    /// Fixed latency, no loss.
    pub fn constant(latency: Duration) -> Self {
        LinkModel {
            base_latency: latency,
            jitter: Jitter::None,
            drop_probability: 0.0,
            ack_timeout: latency * 4,
        }
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        if self.base_latency <= Duration::ZERO {
            return Err(LinkError::Invalid(format!("base_latency must be positive, got {}", self.base_latency)));
        }
        if !(0.0..1.0).contains(&self.drop_probability) {
            return Err(LinkError::Invalid(format!(
                "drop_probability must be in [0, 1), got {}",
                self.drop_probability
            )));
        }
        if self.ack_timeout <= Duration::ZERO {
            return Err(LinkError::Invalid("ack_timeout must be positive".into()));
        }
        match self.jitter {
            Jitter::Normal { sd } | Jitter::LogNormal { sd } if sd.is_negative() => {
                Err(LinkError::Invalid("jitter sd must be non-negative".into()))
            }
            _ => Ok(()),
        }
    }

    /// One hop latency, truncated below at a tenth of the base latency.
    pub fn sample_latency<R: Rng + ?Sized>(&self, rng: &mut R) -> Duration {
        let base = self.base_latency.as_nanos_f64();
        let x = match self.jitter {
            Jitter::None => base,
            Jitter::Normal { sd } => Normal::new(base, sd.as_nanos_f64())
                .map(|d| d.sample(rng))
                .unwrap_or(base),
            Jitter::LogNormal { sd } => {
                let s2 = (1.0 + (sd.as_nanos_f64() / base).powi(2)).ln();
                LogNormal::new(base.ln() - s2 / 2.0, s2.sqrt())
                    .map(|d| d.sample(rng))
                    .unwrap_or(base)
            }
        };
        Duration(x.max(0.1 * base).round() as i64)
    }

    /// Latency of a delivered message, or `None` if it was dropped.
    pub fn transmit<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Duration> {
        let dropped = self.drop_probability > 0.0 && rng.gen_bool(self.drop_probability);
        let latency = self.sample_latency(rng);
        (!dropped).then_some(latency)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mean_sd(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v.sqrt())
    }

    #[test]
    fn lte_preset_has_38ms_mean() {
        let l = LinkModel::preset("lte").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..50_000).map(|_| l.sample_latency(&mut rng).as_nanos_f64()).collect();
        let (m, sd) = mean_sd(&xs);
        assert!((m - 38e6).abs() < 0.3e6, "mean {m}");
        assert!((sd - 10e6).abs() < 0.5e6, "sd {sd}");
    }

    #[test]
    fn truncation_floor() {
        let l = LinkModel {
            jitter: Jitter::Normal { sd: Duration::from_millis(5) },
            ..LinkModel::preset("lan").unwrap()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!((0..10_000).all(|_| l.sample_latency(&mut rng) >= Duration::from_micros(100)));
    }

    #[test]
    fn drop_fraction_within_binomial_bound() {
        let l = LinkModel {
            drop_probability: 0.5,
            ..LinkModel::preset("wifi").unwrap()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000.0;
        let fails = (0..10_000).filter(|_| l.transmit(&mut rng).is_none()).count() as f64;
        let sigma = (n * 0.25f64).sqrt();
        assert!((fails - n / 2.0).abs() <= 3.0 * sigma);
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert_eq!(LinkModel::preset("5g"), Err(LinkError::UnknownPreset("5g".into())));
    }
}
