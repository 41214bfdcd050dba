//! Continuous-time Monte Carlo of the forward exclusion process.
//!
//! Only state-changing bonds are ever drawn: the holding time is
//! `Exp(lambda * #enabled)` and the fired bond is uniform among the enabled
//! ones, which has the same law as independent rate-`lambda` bond clocks.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{run_replicas, run_scalar, Estimate};
use crate::lattice::{Configuration, ModelParams, PointSet};
use crate::rng::RngStream;

/// Fires one enabled bond and returns the elapsed holding time.
///
/// # Panics
/// If no bond is enabled, which the pinned reservoirs rule out.
pub fn step_ctmc<R: Rng + ?Sized>(
    config: &mut Configuration,
    params: &ModelParams,
    rng: &mut R,
) -> f64 {
    let enabled = config.enabled_count();
    assert!(enabled > 0, "configuration {config} has no enabled bond");
    let elapsed: f64 = rng.sample::<f64, _>(Exp1) / (params.rate() * enabled as f64);
    let pick = rng.random_range(0..enabled);
    let bond = config.nth_enabled(pick).expect("index below enabled count");
    config.swap_in_place(bond);
    elapsed
}

/// Advances `config` to model time `t`; returns the number of jumps.
pub fn run_until<R: Rng + ?Sized>(
    config: &mut Configuration,
    params: &ModelParams,
    t: f64,
    rng: &mut R,
) -> u64 {
    let mut now = 0.0;
    let mut jumps = 0;
    loop {
        let enabled = config.enabled_count();
        let hold: f64 = rng.sample::<f64, _>(Exp1) / (params.rate() * enabled as f64);
        if now + hold > t {
            return jumps;
        }
        now += hold;
        let bond = config
            .nth_enabled(rng.random_range(0..enabled))
            .expect("index below enabled count");
        config.swap_in_place(bond);
        jumps += 1;
    }
}

/// Sampling plan for stationary estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSchedule {
    pub burn_in_time: f64,
    pub sample_interval: f64,
    pub n_samples: u64,
    pub n_replicas: u64,
}

impl SimSchedule {
    /// Burn-in of `10 S^2 / lambda`, one sample per unit of `1/lambda`.
    pub fn default_for(params: &ModelParams) -> Self {
        let s = params.size() as f64;
        Self {
            burn_in_time: 10.0 * s * s / params.rate(),
            sample_interval: 1.0 / params.rate(),
            n_samples: 1000,
            n_replicas: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.burn_in_time.is_finite() && self.burn_in_time >= 0.0) {
            return Err(Error::validation(
                "burn-in time must be finite and nonnegative",
            ));
        }
        if !(self.sample_interval.is_finite() && self.sample_interval > 0.0) {
            return Err(Error::validation("sample interval must be positive"));
        }
        if self.n_samples == 0 || self.n_replicas == 0 {
            return Err(Error::validation(
                "sample and replica counts must be positive",
            ));
        }
        Ok(())
    }
}

/// Stationary estimates together with the number of simulated jumps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryEstimates {
    pub estimates: Vec<Estimate>,
    pub total_jumps: u64,
}

/// Time-sampled stationary estimates of `m(points)` for several point sets
/// at once, sharing trajectories.
///
/// Each replica starts from [`Configuration::right_half_filled`], discards
/// `burn_in_time`, then averages the indicators over `n_samples` equally
/// spaced sample times. Standard errors are between replicas.
pub fn estimate_stationary_moments(
    params: &ModelParams,
    sets: &[PointSet],
    schedule: &SimSchedule,
    stream: RngStream,
) -> Result<StationaryEstimates> {
    schedule.validate()?;
    for set in sets {
        if set.is_empty() {
            return Err(Error::validation("empty point set"));
        }
        set.require_interior(params.size())?;
    }
    let initial = Configuration::right_half_filled(params.size())?;
    let total_jumps = AtomicU64::new(0);
    let accs = run_replicas(schedule.n_replicas, stream, sets.len(), |rng, out| {
        let mut config = initial.clone();
        let mut now = 0.0;
        let mut next_sample = schedule.burn_in_time;
        let mut taken = 0u64;
        let mut jumps = 0u64;
        while taken < schedule.n_samples {
            let enabled = config.enabled_count();
            let hold: f64 = rng.sample::<f64, _>(Exp1) / (params.rate() * enabled as f64);
            while taken < schedule.n_samples && now + hold > next_sample {
                for (slot, set) in out.iter_mut().zip(sets) {
                    if set.iter().all(|x| config.occupied(x)) {
                        *slot += 1.0;
                    }
                }
                taken += 1;
                next_sample = schedule.burn_in_time + taken as f64 * schedule.sample_interval;
            }
            now += hold;
            let bond = config
                .nth_enabled(rng.random_range(0..enabled))
                .expect("index below enabled count");
            config.swap_in_place(bond);
            jumps += 1;
        }
        let n = schedule.n_samples as f64;
        out.iter_mut().for_each(|v| *v /= n);
        total_jumps.fetch_add(jumps, Ordering::Relaxed);
    });
    Ok(StationaryEstimates {
        estimates: accs.iter().map(|a| a.estimate()).collect(),
        total_jumps: total_jumps.into_inner(),
    })
}

/// Stationary estimate of `m(points)` for one interior point set.
pub fn estimate_stationary_moment(
    params: &ModelParams,
    points: &PointSet,
    schedule: &SimSchedule,
    stream: RngStream,
) -> Result<Estimate> {
    let run = estimate_stationary_moments(params, std::slice::from_ref(points), schedule, stream)?;
    Ok(run.estimates[0])
}

/// Monte Carlo estimate of `E prod_{x in points} xi_t(x)` started from `initial`.
pub fn transient_moment(
    params: &ModelParams,
    initial: &Configuration,
    t: f64,
    points: &PointSet,
    n_replicas: u64,
    stream: RngStream,
) -> Result<Estimate> {
    if initial.size() != params.size() {
        return Err(Error::validation(format!(
            "configuration has {} interior sites, model has {}",
            initial.size(),
            params.size()
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::validation("time must be finite and nonnegative"));
    }
    if n_replicas == 0 {
        return Err(Error::validation("replica count must be positive"));
    }
    // validates the range of `points`
    initial.product_over(points)?;
    Ok(run_scalar(n_replicas, stream, |rng| {
        let mut config = initial.clone();
        run_until(&mut config, params, t, rng);
        if points.iter().all(|x| config.occupied(x)) {
            1.0
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(s: usize) -> ModelParams {
        ModelParams::with_size(s).unwrap()
    }

    #[test]
    fn single_site_alternates() {
        let p = params(1);
        let mut rng = RngStream::new(1, 0).rng();
        let mut c = Configuration::parse_interior("1").unwrap();
        let mut times = Vec::new();
        for expected in ["0", "1", "0", "1"] {
            times.push(step_ctmc(&mut c, &p, &mut rng));
            assert_eq!(c.to_string(), expected);
        }
        assert!(times.iter().all(|&t| t > 0.0));
    }

    #[test]
    fn holding_time_scales_with_rate() {
        // single enabled bond: mean holding time 1/lambda
        let fast = ModelParams::new(1, 4.0, 0).unwrap();
        let est = run_scalar(20_000, RngStream::new(3, 0), |rng| {
            let mut c = Configuration::parse_interior("1").unwrap();
            step_ctmc(&mut c, &fast, rng)
        });
        assert!(est.within(0.25, 4.0), "{est:?}");
    }

    #[test]
    fn s2_state_10_moves_uniformly() {
        let p = params(2);
        let accs = run_replicas(30_000, RngStream::new(5, 0), 3, |rng, out| {
            let mut c = Configuration::parse_interior("10").unwrap();
            step_ctmc(&mut c, &p, rng);
            let slot = match c.to_string().as_str() {
                "00" => 0,
                "01" => 1,
                "11" => 2,
                other => panic!("unexpected successor {other}"),
            };
            out[slot] = 1.0;
        });
        for acc in accs {
            assert!(acc.estimate().within(1.0 / 3.0, 4.0), "{acc:?}");
        }
    }

    #[test]
    fn transient_at_time_zero_is_exact() {
        let p = params(4);
        let c = Configuration::parse_interior("0110").unwrap();
        let e = transient_moment(
            &p,
            &c,
            0.0,
            &PointSet::pair(2, 3).unwrap(),
            100,
            RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!((e.mean, e.stderr), (1.0, 0.0));
        let e = transient_moment(
            &p,
            &c,
            0.0,
            &PointSet::pair(1, 2).unwrap(),
            100,
            RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!((e.mean, e.stderr), (0.0, 0.0));
    }

    #[test]
    fn right_reservoir_always_full() {
        let p = params(4);
        let c = Configuration::empty(4).unwrap();
        let e = transient_moment(
            &p,
            &c,
            3.0,
            &PointSet::singleton(5),
            500,
            RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!(e.mean, 1.0);
        assert!(transient_moment(
            &p,
            &c,
            3.0,
            &PointSet::singleton(6),
            5,
            RngStream::new(0, 0)
        )
        .is_err());
        assert!(transient_moment(
            &p,
            &c,
            -1.0,
            &PointSet::singleton(2),
            5,
            RngStream::new(0, 0)
        )
        .is_err());
    }

    #[test]
    fn stationary_rejects_boundary_points() {
        let p = params(4);
        let sched = SimSchedule::default_for(&p);
        let err =
            estimate_stationary_moment(&p, &PointSet::singleton(5), &sched, RngStream::new(0, 0));
        assert!(matches!(err, Err(Error::Validation(_))));
        let bad = SimSchedule {
            n_replicas: 0,
            ..sched
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn stationary_s2_pair_and_reproducible() {
        let p = params(2);
        let sched = SimSchedule {
            burn_in_time: 20.0,
            sample_interval: 1.0,
            n_samples: 400,
            n_replicas: 64,
        };
        let set = PointSet::pair(1, 2).unwrap();
        let a = estimate_stationary_moment(&p, &set, &sched, RngStream::new(11, 1)).unwrap();
        let b = estimate_stationary_moment(&p, &set, &sched, RngStream::new(11, 1)).unwrap();
        assert_eq!(a, b);
        assert!(a.within(1.0 / 6.0, 3.0), "{a:?}");
    }

    #[test]
    fn stationary_singleton_linear_profile() {
        let p = params(4);
        let sched = SimSchedule {
            burn_in_time: 80.0,
            sample_interval: 1.0,
            n_samples: 500,
            n_replicas: 64,
        };
        let e =
            estimate_stationary_moment(&p, &PointSet::singleton(2), &sched, RngStream::new(2, 0))
                .unwrap();
        assert!(e.within(0.4, 3.0), "{e:?}");
    }

    #[test]
    fn stationary_rate_invariant_limit() {
        let set = PointSet::singleton(1);
        let slow = params(3);
        let fast = ModelParams::new(3, 2.0, 0).unwrap();
        let e1 = estimate_stationary_moment(
            &slow,
            &set,
            &SimSchedule::default_for(&slow),
            RngStream::new(4, 0),
        )
        .unwrap();
        let e2 = estimate_stationary_moment(
            &fast,
            &set,
            &SimSchedule::default_for(&fast),
            RngStream::new(4, 1),
        )
        .unwrap();
        assert!(e1.z_score(&e2).abs() < 3.0, "{e1:?} vs {e2:?}");
        assert!(e2.within(0.25, 3.0));
    }
}
