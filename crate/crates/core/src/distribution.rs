//! Concrete distribution families used for service times, resources,
//! environment sojourns and renewal interarrival times.
//!
//! Every family has a closed-form CDF (both one-sided limits), mean, LST and a
//! sampler. `cdf` is right-continuous, `P(X <= x)`; `cdf_left` is `P(X < x)`.
//! The two only differ at the atom of a deterministic law.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Deterministic { value: f64 },
    Exponential { rate: f64 },
    /// `shape` is carried as a real so that a non-integer shape in a model
    /// file is reported as a bad distribution rather than a syntax error.
    Erlang { shape: f64, rate: f64 },
    Hyperexponential { probs: Vec<f64>, rates: Vec<f64> },
    Uniform { low: f64, high: f64 },
}

impl DistributionSpec {
    pub fn deterministic(value: f64) -> Self {
        DistributionSpec::Deterministic { value }
    }

    pub fn exponential(rate: f64) -> Self {
        DistributionSpec::Exponential { rate }
    }

    pub fn erlang(shape: u32, rate: f64) -> Self {
        DistributionSpec::Erlang { shape: shape as f64, rate }
    }

    pub fn uniform(low: f64, high: f64) -> Self {
        DistributionSpec::Uniform { low, high }
    }

    pub fn hyperexponential(probs: Vec<f64>, rates: Vec<f64>) -> Self {
        DistributionSpec::Hyperexponential { probs, rates }
    }

    pub fn family(&self) -> &'static str {
        match self {
            DistributionSpec::Deterministic { .. } => "deterministic",
            DistributionSpec::Exponential { .. } => "exponential",
            DistributionSpec::Erlang { .. } => "erlang",
            DistributionSpec::Hyperexponential { .. } => "hyperexponential",
            DistributionSpec::Uniform { .. } => "uniform",
        }
    }

    /// Checks the family constraints; the error names the offending parameter.
    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be a positive finite number, got {x}"))
            }
        };
        match self {
            DistributionSpec::Deterministic { value } => positive("value", *value),
            DistributionSpec::Exponential { rate } => positive("rate", *rate),
            DistributionSpec::Erlang { shape, rate } => {
                positive("rate", *rate)?;
                if !(shape.is_finite() && *shape >= 1.0 && shape.fract() == 0.0) {
                    return Err(format!("shape must be a positive integer, got {shape}"));
                }
                Ok(())
            }
            DistributionSpec::Hyperexponential { probs, rates } => {
                if probs.is_empty() || probs.len() != rates.len() {
                    return Err("probs and rates must be nonempty and of equal length".into());
                }
                for &r in rates {
                    positive("rate", r)?;
                }
                if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err("mixture weights must lie in [0, 1]".into());
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(format!("mixture weights sum to {total}, not 1"));
                }
                Ok(())
            }
            DistributionSpec::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && *low >= 0.0 && high > low) {
                    return Err(format!("need 0 <= low < high, got [{low}, {high}]"));
                }
                Ok(())
            }
        }
    }

    fn erlang_shape(shape: f64) -> u32 {
        shape as u32
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            DistributionSpec::Deterministic { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionSpec::Exponential { rate } => -(-rate * x).exp_m1(),
            DistributionSpec::Erlang { shape, rate } => {
                let n = Self::erlang_shape(*shape);
                let y = rate * x;
                let mut term = 1.0;
                let mut sum = 1.0;
                for k in 1..n {
                    term *= y / k as f64;
                    sum += term;
                }
                (1.0 - (-y).exp() * sum).max(0.0)
            }
            DistributionSpec::Hyperexponential { probs, rates } => probs
                .iter()
                .zip(rates)
                .map(|(p, r)| p * -(-r * x).exp_m1())
                .sum(),
            DistributionSpec::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
        }
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            DistributionSpec::Deterministic { value } => {
                if x > *value {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.cdf(x),
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    pub fn mean(&self) -> f64 {
        match self {
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::Exponential { rate } => 1.0 / rate,
            DistributionSpec::Erlang { shape, rate } => shape / rate,
            DistributionSpec::Hyperexponential { probs, rates } => {
                probs.iter().zip(rates).map(|(p, r)| p / r).sum()
            }
            DistributionSpec::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    /// `E[min(X, u)]`, the integral of the survival function over `[0, u]`.
    pub fn integrated_survival(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match self {
            DistributionSpec::Deterministic { value } => value.min(u),
            DistributionSpec::Exponential { rate } => -(-rate * u).exp_m1() / rate,
            DistributionSpec::Erlang { shape, rate } => {
                let n = Self::erlang_shape(*shape);
                (1..=n)
                    .map(|k| DistributionSpec::erlang(k, *rate).cdf(u))
                    .sum::<f64>()
                    / rate
            }
            DistributionSpec::Hyperexponential { probs, rates } => probs
                .iter()
                .zip(rates)
                .map(|(p, r)| p * -(-r * u).exp_m1() / r)
                .sum(),
            DistributionSpec::Uniform { low, high } => {
                if u <= *low {
                    u
                } else if u < *high {
                    u - (u - low).powi(2) / (2.0 * (high - low))
                } else {
                    0.5 * (low + high)
                }
            }
        }
    }

    /// Laplace-Stieltjes transform `E[exp(-s X)]` for `s >= 0`.
    pub fn lst(&self, s: f64) -> f64 {
        match self {
            DistributionSpec::Deterministic { value } => (-s * value).exp(),
            DistributionSpec::Exponential { rate } => rate / (rate + s),
            DistributionSpec::Erlang { shape, rate } => (rate / (rate + s)).powf(*shape),
            DistributionSpec::Hyperexponential { probs, rates } => {
                probs.iter().zip(rates).map(|(p, r)| p * r / (r + s)).sum()
            }
            DistributionSpec::Uniform { low, high } => {
                let width = high - low;
                if s * width < 1e-8 {
                    (-s * 0.5 * (low + high)).exp()
                } else {
                    ((-s * low).exp() - (-s * high).exp()) / (s * width)
                }
            }
        }
    }

    /// Location of the single atom, if the law has one.
    pub fn atom(&self) -> Option<f64> {
        match self {
            DistributionSpec::Deterministic { value } => Some(*value),
            _ => None,
        }
    }

    /// Smallest `x` (up to bisection accuracy) with `P(X > x) < tol`.
    pub fn tail_quantile(&self, tol: f64) -> f64 {
        match self {
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::Exponential { rate } => (1.0 / tol).ln() / rate,
            DistributionSpec::Uniform { high, .. } => *high,
            _ => {
                let mut hi = self.mean().max(1e-12);
                while self.survival(hi) >= tol {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.survival(mid) >= tol {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// Draws one variate. Exponential and Erlang laws use `rand_distr`;
    /// the hyperexponential law samples its branch first (composition).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::Exponential { rate } => {
                Exp::new(*rate).expect("validated rate").sample(rng)
            }
            DistributionSpec::Erlang { shape, rate } => Gamma::new(*shape, 1.0 / rate)
                .expect("validated parameters")
                .sample(rng),
            DistributionSpec::Hyperexponential { probs, rates } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut branch = rates.len() - 1;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        branch = k;
                        break;
                    }
                }
                Exp::new(rates[branch]).expect("validated rate").sample(rng)
            }
            DistributionSpec::Uniform { low, high } => rng.random_range(*low..*high),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn families() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::deterministic(3.0),
            DistributionSpec::exponential(2.0),
            DistributionSpec::erlang(2, 2.0),
            DistributionSpec::erlang(5, 1.5),
            DistributionSpec::hyperexponential(vec![0.3, 0.7], vec![0.5, 4.0]),
            DistributionSpec::uniform(0.2, 1.4),
        ]
    }

    // Mean as the integral of the survival function, composite Simpson on a
    // fine mesh up to the 1e-16 tail point.
    fn integrated_mean(d: &DistributionSpec) -> f64 {
        let upper = d.tail_quantile(1e-16);
        let n = 200_000usize;
        let h = upper / n as f64;
        let f = |x: f64| d.survival(x);
        let mut acc = f(0.0) + f(upper);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn integrated_mean_matches_closed_form() {
        for d in families() {
            if d.atom().is_some() {
                // survival is a step; the integral is exactly the atom location
                continue;
            }
            let m = integrated_mean(&d);
            assert!((m - d.mean()).abs() < 1e-8, "{}: {m} vs {}", d.family(), d.mean());
        }
    }

    #[test]
    fn integrated_survival_matches_quadrature() {
        for d in families() {
            for &u in &[0.3, 1.0, 2.7] {
                let n = 20_000;
                let h = u / n as f64;
                let trap: f64 = (0..n)
                    .map(|k| 0.5 * h * (d.survival(k as f64 * h) + d.survival((k + 1) as f64 * h)))
                    .sum();
                assert!((trap - d.integrated_survival(u)).abs() < 1e-6, "{} at {u}", d.family());
            }
            assert!((d.integrated_survival(1e6) - d.mean()).abs() < 1e-9);
        }
    }

    #[test]
    fn lst_is_one_at_zero() {
        for d in families() {
            assert!((d.lst(0.0) - 1.0).abs() < 1e-15, "{}", d.family());
        }
    }

    #[test]
    fn lst_slope_is_minus_mean() {
        for d in families() {
            let h = 1e-5;
            let slope = (d.lst(h) - d.lst(0.0)) / h;
            assert!((slope + d.mean()).abs() < 1e-3 * d.mean().max(1.0), "{}", d.family());
        }
    }

    #[test]
    fn deterministic_limits() {
        let d = DistributionSpec::deterministic(1.0);
        assert_eq!(d.cdf(1.0), 1.0);
        assert_eq!(d.cdf_left(1.0), 0.0);
        assert_eq!(d.cdf(0.999), 0.0);
    }

    #[test]
    fn erlang_shape_must_be_integer() {
        let d = DistributionSpec::Erlang { shape: 2.5, rate: 1.0 };
        assert!(d.validate().unwrap_err().contains("integer"));
        assert!(DistributionSpec::erlang(2, 1.0).validate().is_ok());
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(DistributionSpec::exponential(0.0).validate().is_err());
        assert!(DistributionSpec::uniform(1.0, 1.0).validate().is_err());
        assert!(DistributionSpec::hyperexponential(vec![0.5, 0.4], vec![1.0, 2.0])
            .validate()
            .is_err());
    }

    #[test]
    fn sampler_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(DistributionSpec::deterministic(3.0).sample(&mut rng), 3.0);
        let n = 1_000_000;
        for d in [
            DistributionSpec::exponential(2.0),
            DistributionSpec::erlang(2, 2.0),
            DistributionSpec::hyperexponential(vec![0.3, 0.7], vec![0.5, 4.0]),
            DistributionSpec::uniform(0.2, 1.4),
        ] {
            let draws: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - d.mean()).abs() < 4.0 * se, "{}: {mean} vs {}", d.family(), d.mean());
            assert!(draws.iter().all(|&x| x >= 0.0));
        }
    }
}
