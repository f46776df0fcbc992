//! Simultaneous confidence bands for cumulative hazard and survival curves.
//!
//! Both band families rest on the weak convergence of the normalized
//! estimator to a transformed Brownian bridge W0 on x = n sigma2 / (1 + n
//! sigma2). The critical value K_{q,alpha}(c1, c2) is the upper-alpha
//! quantile of sup_{x in [c1,c2]} |q(x) W0(x)| with q(x) = sqrt(x(1-x)) for
//! the equal-precision band and q = 1 for the Hall-Wellner band, estimated
//! by seeded Monte Carlo over bridge paths. Bands are reported at the
//! curve's jump times inside [t_lo, t_hi]:
//!
//! * hazard: A(t) +- K (1 + n sigma2(t)) / (sqrt(n) q(c(t)))
//! * survival, equal precision: S(t) +- d_alpha S(t) sigma(t)
//! * survival, Hall-Wellner: S(t) +- e_alpha (1 + n sigma2(t)) S(t) / sqrt(n)
//!
//! Survival bands are clipped to [0, 1].

use super::{check_conf_level, CurveEstimate, CurveKind};
use crate::error::{Error, Result};
use crate::stats::standard_normal;
use crate::threads;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Weight family for the simultaneous band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandType {
    EqualPrecision,
    HallWellner,
}

impl std::str::FromStr for BandType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ep" => Ok(BandType::EqualPrecision),
            "hw" => Ok(BandType::HallWellner),
            other => Err(format!("unknown band type '{other}' (expected ep or hw)")),
        }
    }
}

/// Specification of a simultaneous band computation.
#[derive(Debug, Clone, Serialize)]
pub struct BandSpec {
    pub band_type: BandType,
    pub conf_level: f64,
    /// Band interval [t_lo, t_hi]; must lie inside the observed range with
    /// events before t_lo contributing variance at t_hi still finite.
    pub t_lo: f64,
    pub t_hi: f64,
    /// Monte Carlo replicates for the critical value.
    pub mc_reps: usize,
    /// Bridge discretization points across [c1, c2].
    pub grid_points: usize,
    /// RNG seed; identical seeds give bitwise-identical critical values.
    pub seed: u64,
}

impl BandSpec {
    pub fn new(band_type: BandType, conf_level: f64, t_lo: f64, t_hi: f64, seed: u64) -> Self {
        BandSpec {
            band_type,
            conf_level,
            t_lo,
            t_hi,
            mc_reps: 100_000,
            grid_points: 1000,
            seed,
        }
    }
}

/// A simultaneous confidence band over [t_lo, t_hi].
#[derive(Debug, Clone, Serialize)]
pub struct Band {
    pub band_type: BandType,
    pub conf_level: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Bridge-scale interval endpoints c_i = n sigma2(t_i)/(1 + n sigma2(t_i)).
    pub c_lo: f64,
    pub c_hi: f64,
    pub critical_value: f64,
    /// Jump times of the curve inside [t_lo, t_hi].
    pub times: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

fn band_weight(band_type: BandType, x: f64) -> f64 {
    match band_type {
        BandType::EqualPrecision => (x * (1.0 - x)).sqrt(),
        BandType::HallWellner => 1.0,
    }
}

/// Monte Carlo critical value K_{q,alpha}(c1, c2): the upper-alpha quantile
/// of sup_{x in [c1, c2]} |q(x) W0(x)| over seeded Brownian-bridge paths.
///
/// The bridge is discretized on `grid_points` equally spaced points spanning
/// [c1, c2] (sequential conditional sampling, inverse-CDF normal draws).
/// Work is chunked with independently seeded RNG streams and reduced in
/// chunk order, so the result is bitwise-deterministic for a fixed seed
/// regardless of thread count.
pub fn band_critical_value(
    band_type: BandType,
    c_lo: f64,
    c_hi: f64,
    conf_level: f64,
    mc_reps: usize,
    grid_points: usize,
    seed: u64,
) -> Result<f64> {
    if !(0.0 <= c_lo && c_lo < c_hi && c_hi <= 1.0) {
        return Err(Error::domain(format!(
            "band interval needs 0 <= c1 < c2 <= 1, got ({c_lo}, {c_hi})"
        )));
    }
    check_conf_level(conf_level)?;
    if mc_reps < 100 {
        return Err(Error::domain("band Monte Carlo needs at least 100 replicates"));
    }
    if grid_points < 2 {
        return Err(Error::domain("band grid needs at least 2 points"));
    }

    let m = grid_points;
    let xs: Vec<f64> = (0..m)
        .map(|j| c_lo + (c_hi - c_lo) * j as f64 / (m - 1) as f64)
        .collect();
    let weights: Vec<f64> = xs.iter().map(|&x| band_weight(band_type, x)).collect();

    const CHUNK: usize = 1024;
    let n_chunks = mc_reps.div_ceil(CHUNK);
    let sups: Vec<f64> = threads::pool().install(|| {
        (0..n_chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(chunk as u64 + 1);
                let lo = chunk * CHUNK;
                let hi = (lo + CHUNK).min(mc_reps);
                let mut out = Vec::with_capacity(hi - lo);
                for _ in lo..hi {
                    out.push(bridge_sup(&xs, &weights, &mut rng));
                }
                out
            })
            .flatten_iter()
            .collect()
    });

    let mut sups = sups;
    sups.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Upper-alpha empirical quantile: k-th smallest with k = ceil(conf * R).
    let k = ((conf_level * mc_reps as f64).ceil() as usize).clamp(1, mc_reps);
    Ok(sups[k - 1])
}

/// One weighted bridge supremum over the grid.
fn bridge_sup(xs: &[f64], weights: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let mut sup = 0.0f64;
    let mut w = 0.0f64; // W0 at the previous grid point
    let mut prev_x = 0.0f64;
    for (j, &x) in xs.iter().enumerate() {
        if x > prev_x {
            // W0(x) | W0(prev) is normal with mean W0(prev)(1-x)/(1-prev)
            // and variance (x-prev)(1-x)/(1-prev).
            let gap = 1.0 - prev_x;
            let mean = w * (1.0 - x) / gap;
            let var = (x - prev_x) * (1.0 - x) / gap;
            w = mean + var.sqrt() * standard_normal(rng);
        } else if x == 0.0 {
            w = 0.0;
        }
        let v = (weights[j] * w).abs();
        if v > sup {
            sup = v;
        }
        prev_x = x;
    }
    sup
}

/// Simultaneous confidence band for a fitted curve.
pub fn simultaneous_band(curve: &CurveEstimate, spec: &BandSpec) -> Result<Band> {
    check_conf_level(spec.conf_level)?;
    if !(spec.t_lo >= 0.0 && spec.t_lo < spec.t_hi) {
        return Err(Error::domain(format!(
            "band interval needs 0 <= t_lo < t_hi, got ({}, {})",
            spec.t_lo, spec.t_hi
        )));
    }
    if spec.t_hi > curve.last_observed {
        return Err(Error::domain(format!(
            "band endpoint {} lies beyond the observed range (last observation at {})",
            spec.t_hi, curve.last_observed
        )));
    }
    let n = curve.n as f64;
    let sig2_lo = curve.sigma2.value(spec.t_lo);
    let sig2_hi = curve.sigma2.value(spec.t_hi);
    if !sig2_hi.is_finite() {
        return Err(Error::domain(
            "band endpoint lies at or beyond an exhausted risk set (infinite variance)",
        ));
    }
    let c_lo = n * sig2_lo / (1.0 + n * sig2_lo);
    let c_hi = n * sig2_hi / (1.0 + n * sig2_hi);
    if !(c_hi > c_lo) {
        return Err(Error::domain(
            "band interval contains no variance increase (no events between t_lo and t_hi)",
        ));
    }
    let k = band_critical_value(
        spec.band_type,
        c_lo,
        c_hi,
        spec.conf_level,
        spec.mc_reps,
        spec.grid_points,
        spec.seed,
    )?;

    let mut times = Vec::new();
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let est_values = curve.estimate.values_at_jumps();
    let sig_values = curve.sigma2.values_at_jumps();
    for (i, &t) in curve.times().iter().enumerate() {
        if t < spec.t_lo || t > spec.t_hi {
            continue;
        }
        let est = est_values[i];
        let sig2 = sig_values[i];
        let half = match curve.kind {
            CurveKind::CumulativeHazard => {
                let c = n * sig2 / (1.0 + n * sig2);
                k * (1.0 + n * sig2) / (n.sqrt() * band_weight(spec.band_type, c))
            }
            CurveKind::Survival => match spec.band_type {
                BandType::EqualPrecision => k * est * sig2.sqrt(),
                BandType::HallWellner => k * (1.0 + n * sig2) * est / n.sqrt(),
            },
        };
        times.push(t);
        match curve.kind {
            CurveKind::CumulativeHazard => {
                lo.push((est - half).max(0.0));
                hi.push(est + half);
            }
            CurveKind::Survival => {
                lo.push((est - half).max(0.0));
                hi.push((est + half).min(1.0));
            }
        }
    }

    Ok(Band {
        band_type: spec.band_type,
        conf_level: spec.conf_level,
        t_lo: spec.t_lo,
        t_hi: spec.t_hi,
        c_lo,
        c_hi,
        critical_value: k,
        times,
        lo,
        hi,
    })
}
