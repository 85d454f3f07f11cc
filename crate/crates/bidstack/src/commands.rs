//! Command implementations. Each returns a table plus an optional JSON summary;
//! nothing touches the filesystem here.

use bidstack_core::forward::{forward_price_closed, forward_price_quadrature};
use bidstack_core::market::scenario_build;
use bidstack_core::mc::{DemandOu, PathSpec, SimConfig};
use bidstack_core::plant::{hourly_maturities, MargrabeCompanion, PlantMode, PlantSpec, HOURS_PER_YEAR};
use bidstack_core::reference::{
    cointegration_kernel, effective_targets, implied_correlation, stack_power_moments, CointegrationSpec, MargrabeSetup, MomentTarget,
    CORRELATION_EDGE,
};
use bidstack_core::spread::{spread_price_closed, Leg, SpreadSpec};
use bidstack_core::{PricingInputs, ScenarioId};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Cell, Table};
use crate::parallel::{par_estimate, par_mc_forward, par_plant_sweep, par_plant_sweep_margrabe, par_simulate_spot_paths, task_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub exact_hours: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub table: Table,
    pub summary: Option<Value>,
}

impl From<Table> for Output {
    fn from(table: Table) -> Self {
        Self { table, summary: None }
    }
}

/// Relative closed/quadrature tolerance used for the agreement flag.
pub const TRIANGLE_REL_TOL: f64 = 1e-8;
/// MC agreement band in standard errors.
pub const MC_BAND: f64 = 3.0;

fn nonempty<T>(xs: &[T], name: &str) -> Result<(), CliError> {
    if xs.is_empty() {
        Err(CliError::Config(format!("{name} must not be empty")))
    } else {
        Ok(())
    }
}

pub fn price_spot(cfg: &RunConfig) -> Result<Output, CliError> {
    let stack = cfg.market.params(cfg.market.varrho)?.stack;
    let q = cfg.spot;
    let (price, region) = match cfg.spike_params()? {
        Some(sp) => {
            let (p, r) = stack.spot_price_extended(q.demand, q.s_c, q.s_g, &sp)?;
            (p, r.to_string())
        }
        None => {
            let (p, r) = stack.spot_price_tagged(q.demand, q.s_c, q.s_g)?;
            (p, r.to_string())
        }
    };
    let mut t = Table::new(&["demand", "s_c", "s_g", "price", "region"]);
    t.push(vec![q.demand.into(), q.s_c.into(), q.s_g.into(), price.into(), region.as_str().into()]);
    Ok(t.into())
}

pub fn price_forward(cfg: &RunConfig) -> Result<Output, CliError> {
    nonempty(&cfg.maturities, "maturities")?;
    let spike = cfg.spike_params()?;
    let mut jobs = Vec::new();
    for v in cfg.varrho_list() {
        let spec = cfg.scenario_spec(v)?;
        for &t in &cfg.maturities {
            jobs.push((v, t, PricingInputs::from_scenario(&spec, t)?.with_spike(spike)));
        }
    }
    let rows: Vec<Vec<Cell>> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, (v, t, inp))| {
            let closed = forward_price_closed(inp)?;
            let quad = forward_price_quadrature(inp, &inp.demand)?;
            let mc = if cfg.mc.enabled { Some(par_mc_forward(inp, &cfg.sim_config(cfg.mc.paths, task_seed(cfg.mc.seed, i as u64)))?) } else { None };
            let agree = (closed - quad).abs() <= TRIANGLE_REL_TOL * closed.abs() && mc.is_none_or(|e| e.within(closed, MC_BAND));
            Ok(vec![(*t).into(), (*v).into(), closed.into(), quad.into(), mc.map(|e| e.value).into(), mc.map(|e| e.std_error).into(), agree.into()])
        })
        .collect::<Result<_, CliError>>()?;
    let mut t = Table::new(&["T", "varrho", "closed", "quadrature", "mc", "mc_se", "agree"]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t.into())
}

struct SpreadJob {
    leg: Leg,
    varrho: f64,
    h: f64,
    inputs: PricingInputs,
    setup: MargrabeSetup,
}

fn spread_jobs(cfg: &RunConfig) -> Result<Vec<SpreadJob>, CliError> {
    nonempty(&cfg.maturities, "maturities")?;
    nonempty(&cfg.heat_rates, "heat_rates")?;
    nonempty(&cfg.legs, "legs")?;
    let spike = cfg.spike_params()?;
    let policy = cfg.margrabe.policy.into();
    let mut jobs = Vec::new();
    for &leg in &cfg.legs {
        for v in cfg.varrho_list() {
            let spec = cfg.scenario_spec(v)?;
            let history = match cfg.margrabe.history {
                Some(h) => cfg.scenario_with(h, v)?,
                None => spec.clone(),
            };
            for &t in &cfg.maturities {
                let inputs = PricingInputs::from_scenario(&spec, t)?.with_spike(spike);
                let target = moment_target(&inputs)?;
                let mut reference_inputs = PricingInputs::from_scenario(&history, t)?;
                reference_inputs.demand = inputs.demand;
                let reference = moment_target(&reference_inputs)?;
                let m = effective_targets(&[target], &[reference], policy)?[0];
                for &h in &cfg.heat_rates {
                    let setup = MargrabeSetup::from_moments(m.mean, m.variance, &inputs.law, leg.into(), h, inputs.rate, t)?;
                    jobs.push(SpreadJob { leg: leg.into(), varrho: v, h, inputs, setup });
                }
            }
        }
    }
    Ok(jobs)
}

fn moment_target(inputs: &PricingInputs) -> Result<MomentTarget, CliError> {
    let (mean, variance) = stack_power_moments(inputs)?;
    Ok(MomentTarget { maturity: inputs.maturity, mean, variance })
}

pub fn price_spread(cfg: &RunConfig) -> Result<Output, CliError> {
    let jobs = spread_jobs(cfg)?;
    let rows: Vec<Vec<Cell>> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, j)| {
            let spec = SpreadSpec::new(j.leg, j.h, j.inputs.maturity);
            let stack = spread_price_closed(&j.inputs, &spec)?;
            let rho = cfg.margrabe.rho_pi.unwrap_or(j.varrho);
            let margrabe = j.setup.price(rho)?;
            let coint = if cfg.cointegration.enabled {
                let cs = CointegrationSpec::matched(&j.inputs)?;
                let sim = cfg.sim_config(cfg.cointegration.paths, task_seed(cfg.mc.seed, i as u64));
                Some(par_estimate(&sim, &cointegration_kernel(cs, j.inputs.law, spec, j.inputs.rate))?)
            } else {
                None
            };
            let implied = implied_correlation(stack, &j.setup)?.value();
            Ok(vec![
                j.leg.name().into(),
                j.varrho.into(),
                j.inputs.maturity.into(),
                j.h.into(),
                stack.into(),
                margrabe.into(),
                coint.map(|e| e.value).into(),
                coint.map(|e| e.std_error).into(),
                implied.into(),
            ])
        })
        .collect::<Result<_, CliError>>()?;
    let mut t = Table::new(&["leg", "varrho", "T", "h", "stack", "margrabe", "cointegration", "cointegration_se", "implied_corr"]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t.into())
}

pub fn implied_corr(cfg: &RunConfig) -> Result<Output, CliError> {
    let jobs = spread_jobs(cfg)?;
    let rows: Vec<Vec<Cell>> = jobs
        .par_iter()
        .map(|j| {
            let stack = spread_price_closed(&j.inputs, &SpreadSpec::new(j.leg, j.h, j.inputs.maturity))?;
            let lo = j.setup.price(CORRELATION_EDGE)?;
            let hi = j.setup.price(-CORRELATION_EDGE)?;
            let implied = implied_correlation(stack, &j.setup)?.value();
            let status = if implied.is_some() { "exists" } else { "nonexistent" };
            Ok(vec![
                j.leg.name().into(),
                j.varrho.into(),
                j.inputs.maturity.into(),
                j.h.into(),
                stack.into(),
                lo.into(),
                hi.into(),
                implied.into(),
                status.into(),
            ])
        })
        .collect::<Result<_, CliError>>()?;
    let mut t = Table::new(&["leg", "varrho", "T", "h", "stack", "margrabe_min", "margrabe_max", "implied_corr", "status"]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t.into())
}

pub fn value_plant(cfg: &RunConfig, opts: RunOptions) -> Result<Output, CliError> {
    let p = &cfg.plant;
    nonempty(&p.mu_d, "plant.mu_d")?;
    let scenario = cfg.scenario_spec(cfg.varrho_list()[0])?;
    let plant = PlantSpec {
        leg: p.leg.into(),
        heat_rate: p.heat_rate,
        capacity_mw: p.capacity_mw,
        hours: hourly_maturities(p.years),
        rate: p.rate.unwrap_or(cfg.market.rate),
    };
    let mode = if opts.exact_hours { PlantMode::Exact } else { PlantMode::Cached { step: p.cache_hours / HOURS_PER_YEAR } };
    let history = p.history.map(|h| cfg.scenario_with(h, scenario.base.dynamics.varrho)).transpose()?;
    let companion = MargrabeCompanion { rho_pi: p.rho_pi, history };
    let stack = par_plant_sweep(&plant, &scenario, &p.mu_d, cfg.spike_params()?, mode)?;
    let margrabe = par_plant_sweep_margrabe(&plant, &scenario, &p.mu_d, &companion, mode)?;

    let label = scenario.id.label();
    let mut t = Table::new(&["mu_d", "scenario", "model", "value"]);
    for (s, m) in stack.iter().zip(&margrabe) {
        t.push(vec![s.mu_d.into(), label.into(), "stack".into(), s.value.into()]);
        t.push(vec![m.mu_d.into(), label.into(), "margrabe".into(), m.value.into()]);
    }
    let crossover = stack.iter().zip(&margrabe).any(|(s, m)| s.value > m.value);
    let summary = json!({
        "scenario": label,
        "leg": plant.leg.name(),
        "hours": plant.hours.len(),
        "exact_hours": opts.exact_hours,
        "crossover": crossover,
        "margrabe_dominates": !crossover,
    });
    Ok(Output { table: t, summary: Some(summary) })
}

pub fn simulate(cfg: &RunConfig) -> Result<Output, CliError> {
    let s = &cfg.simulate;
    let scenario = cfg.scenario_spec(cfg.varrho_list()[0])?;
    let stack = scenario.base.stack;
    let season = s.seasonal.map(|b| move |t: f64| b.at(t));
    let spec = PathSpec {
        stack,
        dynamics: scenario.dynamics(),
        demand: DemandOu { kappa: s.demand_kappa, level: s.demand_level, nu: s.demand_nu, x0: s.demand_x0, cap: stack.capacity() },
        seasonal: season.as_ref().map(|f| f as &(dyn Fn(f64) -> f64 + Sync)),
        spike: cfg.spike_params()?,
        horizon: s.horizon,
    };
    let sim = SimConfig { n_paths: s.paths, n_steps: s.steps, seed: cfg.mc.seed, antithetic: s.antithetic };
    let paths = par_simulate_spot_paths(&spec, &sim)?;
    let mut t = Table::new(&["path", "t", "s_c", "s_g", "x", "d", "p"]);
    for (i, path) in paths.iter().enumerate() {
        for q in path {
            t.push(vec![i.into(), q.t.into(), q.s_c.into(), q.s_g.into(), q.x.into(), q.d.into(), q.p.into()]);
        }
    }
    Ok(t.into())
}

pub fn scenario_list(cfg: &RunConfig) -> Result<Output, CliError> {
    let mut t = Table::new(&["scenario", "description", "forward_c_1y", "forward_g_1y"]);
    for id in ScenarioId::ALL {
        let name = match id {
            ScenarioId::I => crate::config::ScenarioName::I,
            ScenarioId::II => crate::config::ScenarioName::II,
            ScenarioId::III => crate::config::ScenarioName::III,
        };
        let spec = cfg.scenario_with(name, cfg.market.varrho)?;
        let (fc, fg) = scenario_build(&spec, 1.0)?.forwards;
        t.push(vec![id.label().into(), id.description().into(), fc.into(), fg.into()]);
    }
    Ok(t.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.mc.paths = 20_000;
        cfg.cointegration.paths = 20_000;
        cfg
    }

    fn num(c: &Cell) -> f64 {
        match c {
            Cell::Num(x) => *x,
            other => panic!("not a number: {other:?}"),
        }
    }

    #[test]
    fn spot_reference_point() {
        let out = price_spot(&RunConfig::default()).unwrap();
        let row = &out.table.rows[0];
        assert!((num(&row[3]) - 10.0 * 2.25f64.exp()).abs() < 1e-12);
        assert_eq!(row[4], Cell::Text("P5".into()));
    }

    #[test]
    fn spot_zero_demand_is_floor() {
        let mut cfg = RunConfig::default();
        cfg.spot.demand = 0.0;
        cfg.spot.s_g = 12.0;
        let row = &price_spot(&cfg).unwrap().table.rows[0];
        assert!((num(&row[3]) - 10.0 * 2f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn forward_triangle_flags() {
        let mut cfg = quick();
        cfg.varrho = vec![-0.8, 0.0, 0.8];
        let out = price_forward(&cfg).unwrap();
        assert_eq!(out.table.rows.len(), 9);
        let col = out.table.column("agree").unwrap();
        assert!(out.table.rows.iter().all(|r| r[col] == Cell::Flag(true)));
    }

    #[test]
    fn scenario_two_forwards_echo_inputs() {
        let mut cfg = quick();
        cfg.scenario = crate::config::ScenarioName::II;
        cfg.mc.enabled = false;
        let list = scenario_list(&cfg).unwrap();
        let row = &list.table.rows[1];
        assert!((num(&row[2]) - (10.0 - 2.4)).abs() < 1e-9);
        assert!((num(&row[3]) - (10.0 + 2.4)).abs() < 1e-9);
    }

    #[test]
    fn spread_rows_and_empty_grid() {
        let mut cfg = quick();
        cfg.legs = vec![crate::config::LegName::Dark, crate::config::LegName::Spark];
        let out = price_spread(&cfg).unwrap();
        assert_eq!(out.table.rows.len(), 2 * 3 * 3);
        cfg.heat_rates.clear();
        assert!(price_spread(&cfg).is_err());
    }

    #[test]
    fn implied_status_consistent() {
        let cfg = quick();
        for r in implied_corr(&cfg).unwrap().table.rows {
            let exists = r[8] == Cell::Text("exists".into());
            assert_eq!(exists, r[7] != Cell::Empty);
            let (stack, lo, hi) = (num(&r[4]), num(&r[5]), num(&r[6]));
            assert_eq!(exists, stack >= lo && stack <= hi);
        }
    }

    #[test]
    fn plant_sweep_layout() {
        let mut cfg = quick();
        cfg.plant.years = 0.25;
        cfg.plant.mu_d = vec![0.3, 0.6];
        let out = value_plant(&cfg, RunOptions::default()).unwrap();
        assert_eq!(out.table.rows.len(), 4);
        assert_eq!(out.summary.unwrap()["crossover"], json!(false));
    }

    #[test]
    fn simulate_layout_and_determinism() {
        let mut cfg = quick();
        cfg.simulate.steps = 10;
        let a = simulate(&cfg).unwrap();
        assert_eq!(a.table.rows.len(), cfg.simulate.paths * 11);
        assert_eq!(a, simulate(&cfg).unwrap());
    }
}
