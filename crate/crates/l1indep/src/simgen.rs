//! Seeded random generators for the simulation scenarios (all bivariate,
//! `p = 2`, `d_1 = d_2 = 1`).
//!
//! Independence variants are produced by sampling the dependent scenario
//! and then shuffling the second coordinate with a seeded permutation,
//! which preserves both marginals exactly while destroying dependence.
//! Shape parameters for the geometric scenarios are pinned in
//! [`ScenarioParams`] and can be emitted as a key = value config file.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::data::{BlockSpec, Sample};
use crate::error::{Error, Result};

/// Scenario family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    /// Independent standard normals.
    IndNorm,
    /// Gaussian clouds at the four corners, cloud signs linked.
    FourClouds,
    /// W-shaped curve with uniform noise.
    W,
    /// Uniform on the unit diamond `|x| + |y| <= 1`.
    Diamond,
    /// `y = x^2` plus uniform noise.
    Parabola,
    /// `y = (x^2 + noise) * sign`.
    TwoParabolas,
    /// Uniform on the unit circle with radial Gaussian noise.
    Circle,
    /// `Y = X * eps`, both standard normal.
    YeqXEps,
    /// `X = W + Z1`, `Y = X + F + Z2` (Weibull, truncated Frechet).
    Gev1,
    /// `X = W + Z1`, `Y = 3W + Z2`.
    Gev2,
    /// Sinusoidal density `(1 + sin(lx) sin(ly)) / (4 pi^2)` on `[-pi, pi]^2`.
    Sinusoid { l: u32 },
    /// `(1 + theta (1 - 2 ind{x^2+y^2 <= 2/pi})) / 4` on `[-1, 1]^2`.
    CircleIndicator { theta: f64 },
    /// `X ~ U[-1,1]`, `Y = |X|^rho * eps`.
    PowerNoise { rho: f64 },
}

impl Scenario {
    pub fn parse(name: &str, param: Option<f64>) -> Result<Self> {
        let sc = match name {
            "ind-norm" => Scenario::IndNorm,
            "four-clouds" => Scenario::FourClouds,
            "w" => Scenario::W,
            "diamond" => Scenario::Diamond,
            "parabola" => Scenario::Parabola,
            "two-parabolas" => Scenario::TwoParabolas,
            "circle" => Scenario::Circle,
            "y-eq-x-eps" => Scenario::YeqXEps,
            "gev1" => Scenario::Gev1,
            "gev2" => Scenario::Gev2,
            "sinusoid" => {
                let l = param
                    .ok_or_else(|| Error::InvalidScenarioParam("sinusoid needs a parameter".into()))?;
                if l < 1.0 || l.fract() != 0.0 {
                    return Err(Error::InvalidScenarioParam(format!(
                        "sinusoid parameter {l} must be a positive integer"
                    )));
                }
                Scenario::Sinusoid { l: l as u32 }
            }
            "circle-indicator" => {
                let theta = param.ok_or_else(|| {
                    Error::InvalidScenarioParam("circle-indicator needs a parameter".into())
                })?;
                if !(0.0..=1.0).contains(&theta) {
                    return Err(Error::InvalidScenarioParam(format!(
                        "circle-indicator parameter {theta} must be in [0, 1]"
                    )));
                }
                Scenario::CircleIndicator { theta }
            }
            "power-noise" => {
                let rho = param.ok_or_else(|| {
                    Error::InvalidScenarioParam("power-noise needs a parameter".into())
                })?;
                if rho < 0.0 {
                    return Err(Error::InvalidScenarioParam(format!(
                        "power-noise parameter {rho} must be nonnegative"
                    )));
                }
                Scenario::PowerNoise { rho }
            }
            other => return Err(Error::UnknownScenario(other.into())),
        };
        Ok(sc)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::IndNorm => "ind-norm",
            Scenario::FourClouds => "four-clouds",
            Scenario::W => "w",
            Scenario::Diamond => "diamond",
            Scenario::Parabola => "parabola",
            Scenario::TwoParabolas => "two-parabolas",
            Scenario::Circle => "circle",
            Scenario::YeqXEps => "y-eq-x-eps",
            Scenario::Gev1 => "gev1",
            Scenario::Gev2 => "gev2",
            Scenario::Sinusoid { .. } => "sinusoid",
            Scenario::CircleIndicator { .. } => "circle-indicator",
            Scenario::PowerNoise { .. } => "power-noise",
        }
    }

    pub fn param(&self) -> Option<f64> {
        match self {
            Scenario::Sinusoid { l } => Some(*l as f64),
            Scenario::CircleIndicator { theta } => Some(*theta),
            Scenario::PowerNoise { rho } => Some(*rho),
            _ => None,
        }
    }
}

/// Pinned shape parameters for the geometric scenarios.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// cloud center magnitude for four-clouds
    pub cloud_center: f64,
    /// within-cloud Gaussian noise sd
    pub cloud_sd: f64,
    /// probability the two cloud signs agree
    pub cloud_link_prob: f64,
    /// half-width of the uniform noise on the W curve
    pub w_noise: f64,
    /// half-width of the uniform noise on the parabola
    pub parabola_noise: f64,
    /// width of the one-sided uniform noise on the two parabolas
    pub two_parabolas_noise: f64,
    /// sd of the radial noise on the circle
    pub circle_radial_sd: f64,
    /// sd of the additive normals in the GEV models
    pub gev_noise_sd: f64,
    /// truncation quantile of the Frechet draw in GEV model 1
    pub frechet_truncation: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            cloud_center: 1.0,
            cloud_sd: 0.2,
            cloud_link_prob: 0.9,
            w_noise: 0.1,
            parabola_noise: 0.1,
            two_parabolas_noise: 0.1,
            circle_radial_sd: 0.1,
            gev_noise_sd: 0.2,
            frechet_truncation: 0.999,
        }
    }
}

impl ScenarioParams {
    /// key = value text, emitted alongside simulation results.
    pub fn to_config_text(&self) -> String {
        format!(
            "cloud_center = {}\ncloud_sd = {}\ncloud_link_prob = {}\nw_noise = {}\n\
             parabola_noise = {}\ntwo_parabolas_noise = {}\ncircle_radial_sd = {}\n\
             gev_noise_sd = {}\nfrechet_truncation = {}\n",
            self.cloud_center,
            self.cloud_sd,
            self.cloud_link_prob,
            self.w_noise,
            self.parabola_noise,
            self.two_parabolas_noise,
            self.circle_radial_sd,
            self.gev_noise_sd,
            self.frechet_truncation
        )
    }
}

/// Derives an independent per-replication seed from a master seed
/// (splitmix64 over the pair).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Draws `n` i.i.d. observations of the scenario. `dependent = false`
/// shuffles the second coordinate to break dependence while keeping the
/// marginals.
pub fn sample_scenario(
    sc: Scenario,
    params: &ScenarioParams,
    dependent: bool,
    n: usize,
    seed: u64,
) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, y) = draw_pair(sc, params, &mut rng);
        xs.push(x);
        ys.push(y);
    }
    if !dependent && !matches!(sc, Scenario::IndNorm) {
        ys.shuffle(&mut rng);
    }
    let values: Vec<f64> = xs.into_iter().zip(ys).flat_map(|(x, y)| [x, y]).collect();
    Sample::from_rows(values, n, BlockSpec::new(vec![1, 1])?)
}

fn draw_pair(sc: Scenario, p: &ScenarioParams, rng: &mut ChaCha8Rng) -> (f64, f64) {
    match sc {
        Scenario::IndNorm => (rng.sample(StandardNormal), rng.sample(StandardNormal)),
        Scenario::FourClouds => {
            let sx: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let sy = if rng.gen_bool(p.cloud_link_prob) { sx } else { -sx };
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            (
                sx * p.cloud_center + p.cloud_sd * nx,
                sy * p.cloud_center + p.cloud_sd * ny,
            )
        }
        Scenario::W => {
            let x: f64 = rng.gen_range(-1.0..=1.0);
            let y = 4.0 * (x * x - 0.5).powi(2) + rng.gen_range(-p.w_noise..=p.w_noise);
            (x, y)
        }
        Scenario::Diamond => {
            let u = rng.gen_range(-1.0..=1.0);
            let v = rng.gen_range(-1.0..=1.0);
            ((u + v) / 2.0, (u - v) / 2.0)
        }
        Scenario::Parabola => {
            let x = rng.gen_range(-1.0..=1.0);
            (x, x * x + rng.gen_range(-p.parabola_noise..=p.parabola_noise))
        }
        Scenario::TwoParabolas => {
            let x = rng.gen_range(-1.0..=1.0);
            let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (x, (x * x + rng.gen_range(0.0..=p.two_parabolas_noise)) * s)
        }
        Scenario::Circle => {
            let angle = rng.gen_range(0.0..2.0 * PI);
            let noise: f64 = rng.sample(StandardNormal);
            let r = 1.0 + p.circle_radial_sd * noise;
            (r * angle.cos(), r * angle.sin())
        }
        Scenario::YeqXEps => {
            let x: f64 = rng.sample(StandardNormal);
            let eps: f64 = rng.sample(StandardNormal);
            (x, x * eps)
        }
        Scenario::Gev1 => {
            let w: f64 = rng.sample(Exp1);
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let x = w + p.gev_noise_sd * z1;
            // Frechet(1) by inverse CDF, truncated at its upper quantile
            let u = rng.gen_range(0.0..p.frechet_truncation);
            let f = -1.0 / (u.max(f64::MIN_POSITIVE)).ln();
            (x, x + f + p.gev_noise_sd * z2)
        }
        Scenario::Gev2 => {
            let w: f64 = rng.sample(Exp1);
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            (w + p.gev_noise_sd * z1, 3.0 * w + p.gev_noise_sd * z2)
        }
        Scenario::Sinusoid { l } => {
            // rejection from the uniform envelope; density bound 2/(4 pi^2)
            let lf = l as f64;
            loop {
                let x = rng.gen_range(-PI..=PI);
                let y = rng.gen_range(-PI..=PI);
                let accept = (1.0 + (lf * x).sin() * (lf * y).sin()) / 2.0;
                if rng.gen_range(0.0..1.0) < accept {
                    return (x, y);
                }
            }
        }
        Scenario::CircleIndicator { theta } => loop {
            let x = rng.gen_range(-1.0..=1.0);
            let y = rng.gen_range(-1.0..=1.0);
            let ind = if x * x + y * y <= 2.0 / PI { 1.0 } else { 0.0 };
            let accept = (1.0 + theta * (1.0 - 2.0 * ind)) / (1.0 + theta);
            if rng.gen_range(0.0..1.0) < accept {
                return (x, y);
            }
        },
        Scenario::PowerNoise { rho } => {
            let x = rng.gen_range(-1.0..=1.0);
            let eps: f64 = rng.sample(StandardNormal);
            (x, x.abs().powf(rho) * eps)
        }
    }
}

/// Exact density for the closed-form scenarios, zero outside the support.
pub fn density_oracle(sc: Scenario, x: f64, y: f64) -> Result<f64> {
    match sc {
        Scenario::Sinusoid { l } => {
            if x.abs() > PI || y.abs() > PI {
                return Ok(0.0);
            }
            let lf = l as f64;
            Ok((1.0 + (lf * x).sin() * (lf * y).sin()) / (4.0 * PI * PI))
        }
        Scenario::CircleIndicator { theta } => {
            if x.abs() > 1.0 || y.abs() > 1.0 {
                return Ok(0.0);
            }
            let ind = if x * x + y * y <= 2.0 / PI { 1.0 } else { 0.0 };
            Ok((1.0 + theta * (1.0 - 2.0 * ind)) / 4.0)
        }
        other => Err(Error::InvalidScenarioParam(format!(
            "{} has no closed-form density",
            other.name()
        ))),
    }
}
