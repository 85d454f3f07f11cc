//! Rayon drivers. Chunks are mapped in parallel and merged with the core's
//! fixed-shape `reduce`, so results match the serial estimators bit for bit.

use bidstack_core::mc::{
    forward_kernel, moment_kernel, reduce, run_chunk, simulate_path, spread_kernel, Estimate, Moments, PathPoint, PathSpec, SimConfig,
};
use bidstack_core::plant::{plant_value, plant_value_margrabe, sweep_demand, MargrabeCompanion, PlantMode, PlantSpec, SweepPoint};
use bidstack_core::spread::SpreadSpec;
use bidstack_core::{Error, PricingInputs, Result, ScenarioSpec, SpikeParams};
use rayon::prelude::*;

pub fn par_estimate<const D: usize, F: Fn(&[f64; D]) -> f64 + Sync>(cfg: &SimConfig, f: &F) -> Result<Estimate> {
    cfg.validate()?;
    let parts: Vec<Moments> = (0..cfg.chunks()).into_par_iter().map(|c| run_chunk(cfg, c, f)).collect();
    Ok(reduce(&parts).estimate())
}

pub fn par_mc_forward(inputs: &PricingInputs, cfg: &SimConfig) -> Result<Estimate> {
    inputs.validate()?;
    par_estimate(cfg, &forward_kernel(*inputs))
}

pub fn par_mc_spread(inputs: &PricingInputs, spec: &SpreadSpec, cfg: &SimConfig) -> Result<Estimate> {
    inputs.validate()?;
    par_estimate(cfg, &spread_kernel(*inputs, *spec))
}

pub fn par_mc_moment(n: i32, inputs: &PricingInputs, cfg: &SimConfig) -> Result<Estimate> {
    if n < 1 {
        return Err(Error::InvalidParameter { name: "n", reason: "moment order must be at least 1" });
    }
    inputs.validate()?;
    par_estimate(cfg, &moment_kernel(n, *inputs))
}

pub fn par_simulate_spot_paths(spec: &PathSpec, cfg: &SimConfig) -> Result<Vec<Vec<PathPoint>>> {
    spec.validate(cfg)?;
    Ok((0..cfg.n_paths).into_par_iter().map(|i| simulate_path(spec, cfg, i)).collect())
}

pub fn par_plant_sweep(plant: &PlantSpec, scenario: &ScenarioSpec, grid: &[f64], spike: Option<SpikeParams>, mode: PlantMode) -> Result<Vec<SweepPoint>> {
    non_empty(grid)?;
    grid.par_iter()
        .map(|&mu_d| Ok(SweepPoint { mu_d, value: plant_value(plant, scenario, &sweep_demand(scenario, mu_d)?, spike, mode)? }))
        .collect()
}

pub fn par_plant_sweep_margrabe(plant: &PlantSpec, scenario: &ScenarioSpec, grid: &[f64], companion: &MargrabeCompanion, mode: PlantMode) -> Result<Vec<SweepPoint>> {
    non_empty(grid)?;
    grid.par_iter()
        .map(|&mu_d| Ok(SweepPoint { mu_d, value: plant_value_margrabe(plant, scenario, &sweep_demand(scenario, mu_d)?, companion, mode)? }))
        .collect()
}

fn non_empty(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        Err(Error::InvalidParameter { name: "mu_d grid", reason: "must not be empty" })
    } else {
        Ok(())
    }
}

/// Independent seed for task `index` of a run seeded with `seed` (SplitMix64 finaliser).
pub fn task_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bidstack_core::mc::{mc_forward, mc_spread, simulate_spot_paths, DemandOu};
    use bidstack_core::spread::Leg;
    use bidstack_core::{MarketParams, ScenarioId};

    fn inputs() -> PricingInputs {
        PricingInputs::from_scenario(&ScenarioSpec::preset(ScenarioId::I, MarketParams::symmetric(0.3)), 1.0).unwrap()
    }

    fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
    }

    #[test]
    fn parallel_equals_serial() {
        let inp = inputs();
        let cfg = SimConfig::new(50_001, 9);
        let serial = mc_forward(&inp, &cfg).unwrap();
        for threads in [1, 3, 8] {
            assert_eq!(in_pool(threads, || par_mc_forward(&inp, &cfg).unwrap()), serial);
        }
        let spec = SpreadSpec::new(Leg::Spark, 9.0, 1.0);
        assert_eq!(par_mc_spread(&inp, &spec, &cfg).unwrap(), mc_spread(&inp, &spec, &cfg).unwrap());
    }

    #[test]
    fn paths_match_serial() {
        let p = MarketParams::symmetric(0.0);
        let spec = PathSpec {
            stack: p.stack,
            dynamics: p.dynamics,
            demand: DemandOu { kappa: 5.0, level: 0.5, nu: 0.5, x0: 0.5, cap: 1.0 },
            seasonal: None,
            spike: None,
            horizon: 1.0,
        };
        let cfg = SimConfig { n_paths: 6, n_steps: 50, seed: 3, antithetic: true };
        assert_eq!(in_pool(4, || par_simulate_spot_paths(&spec, &cfg).unwrap()), simulate_spot_paths(&spec, &cfg).unwrap());
    }

    #[test]
    fn task_seeds_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| task_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
