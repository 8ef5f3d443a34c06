//! Declarative experiments over a dataset: a single settlement, loyalty
//! sweeps, per-service bandwidth price tables, peering-order comparisons and
//! ISP-against-ISP comparisons.
//!
//! A scenario names a dataset, applies overrides, replays an ordered list of
//! peering events on a fresh market and settles the focal pair at its event,
//! using the states immediately before and after it.

use std::collections::HashSet;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::churn::{establish_peering, ChurnReport, ChurnReportView, PeeringAction, PeeringEvent};
use crate::dataset::{resolve_dataset, MarketDataset, SCHEMA_VERSION};
use crate::economics::{
    bandwidth_price, settle, BargainOutcome, Bilateral, BilateralAccounts,
    RevenueBasis,
};
use crate::error::{Error, Result, Violation};
use crate::market::{Market, MarketState, StateSnapshot};

/// Upper bound on evaluated cells per request.
pub const MAX_CELLS: usize = 10_000;

/// A dataset by built-in id or path, or given inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    Named(String),
    Inline(Box<MarketDataset>),
}

impl Default for DatasetRef {
    fn default() -> Self {
        DatasetRef::Named(crate::dataset::US2013.into())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Loyalty `β` applied to every access ISP.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isp_loyalty: Option<f64>,
    /// Loyalty `θ` applied to every content provider.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csp_loyalty: Option<f64>,
    /// Name of one of the dataset's uplift scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uplift: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cdn: Option<bool>,
    /// Restricts every event to these services.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub services: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revenue_basis: Option<RevenueBasis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isp_profit_attribution: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocalPair {
    pub isp: String,
    pub csp: String,
}

/// Loyalty grids. Cells are visited `beta`-major, in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceTableSpec {
    /// Services to price; empty means every service the focal CSP offers.
    #[serde(default)]
    pub services: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ordering {
    pub label: String,
    /// Permutation of indices into the scenario's `events`.
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSpec {
    pub orderings: Vec<Ordering>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    /// ISPs put in the focal ISP's place, one run each.
    pub isps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub dataset: DatasetRef,
    #[serde(default)]
    pub overrides: Overrides,
    pub events: Vec<PeeringEvent>,
    pub focal: FocalPair,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_table: Option<PriceTableSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSpec>,
    /// Attach every churn flow of every event to the run result.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub include_flows: bool,
    /// Attach the final market state to the run result.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub include_state: bool,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("scenario", &e))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// A minimal spec: one event for the focal pair on the named dataset.
    pub fn single(name: &str, dataset: &str, event: PeeringEvent) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            description: String::new(),
            dataset: DatasetRef::Named(dataset.into()),
            overrides: Overrides::default(),
            focal: FocalPair {
                isp: event.isp.clone(),
                csp: event.csp.clone(),
            },
            events: vec![event],
            sweep: None,
            price_table: None,
            timing: None,
            compare: None,
            include_flows: false,
            include_state: false,
        }
    }
}

fn in_unit(v: f64) -> bool {
    v.is_finite() && (0.0..=1.0).contains(&v)
}

/// A spec bound to its dataset with overrides applied and checked.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: ScenarioSpec,
    pub dataset: MarketDataset,
    pub events: Vec<PeeringEvent>,
    pub focal_index: usize,
}

/// Resolves the dataset, applies overrides and validates the whole spec.
pub fn prepare(spec: &ScenarioSpec) -> Result<Prepared> {
    let mut v = Vec::new();
    if spec.schema_version != SCHEMA_VERSION {
        v.push(Violation::new(
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", spec.schema_version),
        ));
    }
    for (field, value) in [
        ("isp_loyalty", spec.overrides.isp_loyalty),
        ("csp_loyalty", spec.overrides.csp_loyalty),
    ] {
        if let Some(x) = value {
            if !in_unit(x) {
                v.push(Violation::new(
                    format!("overrides.{field}"),
                    format!("loyalty must be in [0, 1], got {x}"),
                ));
            }
        }
    }
    if let Some(sweep) = &spec.sweep {
        if sweep.beta.is_none() && sweep.theta.is_none() {
            v.push(Violation::new("sweep", "at least one axis (beta, theta) is required"));
        }
        for (axis, grid) in [("beta", &sweep.beta), ("theta", &sweep.theta)] {
            let Some(grid) = grid else { continue };
            if grid.is_empty() {
                v.push(Violation::new(format!("sweep.{axis}"), "grid must not be empty"));
            }
            for (k, x) in grid.iter().enumerate() {
                if !in_unit(*x) {
                    v.push(Violation::new(
                        format!("sweep.{axis}[{k}]"),
                        format!("loyalty must be in [0, 1], got {x}"),
                    ));
                }
            }
        }
    }
    if spec.events.is_empty() {
        v.push(Violation::new("events", "at least one peering event is required"));
    }
    let focal_index = spec
        .events
        .iter()
        .position(|e| e.isp == spec.focal.isp && e.csp == spec.focal.csp);
    if focal_index.is_none() && !spec.events.is_empty() {
        v.push(Violation::new(
            "focal",
            format!(
                "no event peers `{}` with `{}`",
                spec.focal.isp, spec.focal.csp
            ),
        ));
    }
    if let Some(timing) = &spec.timing {
        if timing.orderings.is_empty() {
            v.push(Violation::new("timing.orderings", "at least one ordering is required"));
        }
        for (k, o) in timing.orderings.iter().enumerate() {
            let mut sorted = o.order.clone();
            sorted.sort_unstable();
            if sorted != (0..spec.events.len()).collect::<Vec<_>>() {
                v.push(Violation::new(
                    format!("timing.orderings[{k}].order"),
                    format!("must be a permutation of 0..{}", spec.events.len()),
                ));
            }
        }
    }
    if let Some(compare) = &spec.compare {
        if compare.isps.is_empty() {
            v.push(Violation::new("compare.isps", "at least one ISP is required"));
        }
    }

    let mut dataset = match &spec.dataset {
        DatasetRef::Named(reference) => resolve_dataset(reference)?,
        DatasetRef::Inline(ds) => {
            let problems = ds.validate();
            if !problems.is_empty() {
                return Err(Error::InvalidDataset(
                    problems
                        .into_iter()
                        .map(|p| Violation::new(format!("dataset.{}", p.path), p.message))
                        .collect(),
                ));
            }
            (**ds).clone()
        }
    };

    if let Some(name) = &spec.overrides.uplift {
        if let Err(e) = dataset.apply_uplift(name) {
            v.extend(e.violations().iter().cloned());
        }
    }
    if let Some(cdn) = spec.overrides.cdn {
        dataset.cost_model.cdn_enabled = cdn;
    }
    if let Some(basis) = spec.overrides.revenue_basis {
        dataset.accounting.revenue_basis = basis;
    }
    if let Some(attr) = spec.overrides.isp_profit_attribution {
        dataset.accounting.isp_profit_attribution = attr;
    }
    set_loyalties(&mut dataset, spec.overrides.isp_loyalty, spec.overrides.csp_loyalty);

    let service_ids: HashSet<&str> = dataset.services.iter().map(|s| s.id.as_str()).collect();
    let isp_ids: HashSet<&str> = dataset.isps.iter().map(|s| s.id.as_str()).collect();
    let csp_ids: HashSet<&str> = dataset.csps.iter().map(|s| s.id.as_str()).collect();
    if let Some(subset) = &spec.overrides.services {
        for (k, s) in subset.iter().enumerate() {
            if !service_ids.contains(s.as_str()) {
                v.push(Violation::new(
                    format!("overrides.services[{k}]"),
                    format!("unknown service `{s}`"),
                ));
            }
        }
    }
    if !isp_ids.contains(spec.focal.isp.as_str()) {
        v.push(Violation::new("focal.isp", format!("unknown access ISP `{}`", spec.focal.isp)));
    }
    if !csp_ids.contains(spec.focal.csp.as_str()) {
        v.push(Violation::new(
            "focal.csp",
            format!("unknown content provider `{}`", spec.focal.csp),
        ));
    }
    if let Some(compare) = &spec.compare {
        for (k, isp) in compare.isps.iter().enumerate() {
            if !isp_ids.contains(isp.as_str()) {
                v.push(Violation::new(
                    format!("compare.isps[{k}]"),
                    format!("unknown access ISP `{isp}`"),
                ));
            }
        }
    }
    if let Some(table) = &spec.price_table {
        for (k, s) in table.services.iter().enumerate() {
            if !service_ids.contains(s.as_str()) {
                v.push(Violation::new(
                    format!("price_table.services[{k}]"),
                    format!("unknown service `{s}`"),
                ));
            }
        }
    }

    let mut events = Vec::with_capacity(spec.events.len());
    for (k, event) in spec.events.iter().enumerate() {
        let path = format!("events[{k}]");
        if event.action == PeeringAction::Remove {
            v.push(Violation::new(
                format!("{path}.action"),
                "peering removal is not supported",
            ));
        }
        let isp = dataset.isps.iter().find(|i| i.id == event.isp);
        match isp {
            None => v.push(Violation::new(
                format!("{path}.isp"),
                format!("unknown access ISP `{}`", event.isp),
            )),
            Some(i) if i.passive => v.push(Violation::new(
                format!("{path}.isp"),
                format!("access ISP `{}` is passive and never peers", event.isp),
            )),
            Some(_) => {}
        }
        let Some(csp) = dataset.csps.iter().find(|c| c.id == event.csp) else {
            v.push(Violation::new(
                format!("{path}.csp"),
                format!("unknown content provider `{}`", event.csp),
            ));
            continue;
        };
        for (n, s) in event.services.iter().enumerate() {
            if !service_ids.contains(s.as_str()) {
                v.push(Violation::new(
                    format!("{path}.services[{n}]"),
                    format!("unknown service `{s}`"),
                ));
            } else if !csp.offers(s) {
                v.push(Violation::new(
                    format!("{path}.services[{n}]"),
                    format!("`{}` does not offer `{s}`", event.csp),
                ));
            }
        }
        let mut services: Vec<String> = if event.services.is_empty() {
            dataset
                .services
                .iter()
                .filter(|s| csp.offers(&s.id))
                .map(|s| s.id.clone())
                .collect()
        } else {
            event.services.clone()
        };
        if let Some(subset) = &spec.overrides.services {
            services.retain(|s| subset.contains(s));
            if services.is_empty() {
                v.push(Violation::new(
                    format!("{path}.services"),
                    "no service left after applying overrides.services",
                ));
            }
        }
        events.push(PeeringEvent {
            services,
            ..event.clone()
        });
    }

    if !v.is_empty() {
        return Err(Error::InvalidScenario(v));
    }
    let dataset_problems = dataset.validate();
    if !dataset_problems.is_empty() {
        return Err(Error::InvalidDataset(dataset_problems));
    }
    Ok(Prepared {
        spec: spec.clone(),
        dataset,
        events,
        focal_index: focal_index.expect("checked above"),
    })
}

fn set_loyalties(dataset: &mut MarketDataset, beta: Option<f64>, theta: Option<f64>) {
    if let Some(b) = beta {
        dataset.isps.iter_mut().for_each(|i| i.loyalty = b);
    }
    if let Some(t) = theta {
        dataset.csps.iter_mut().for_each(|c| c.loyalty = t);
    }
}

/// Everything computed for one replay of an event sequence.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub reports: Vec<ChurnReport>,
    pub initial: MarketState,
    pub before_focal: MarketState,
    pub after_focal: MarketState,
    pub final_state: MarketState,
    pub scope: Bilateral,
    pub accounts: BilateralAccounts,
    pub outcome: BargainOutcome,
}

impl Evaluation {
    pub fn bandwidth_price(&self) -> Option<f64> {
        bandwidth_price(
            self.outcome.payment_usd_per_month,
            self.accounts.traffic_before_gbps,
            self.accounts.traffic_after_gbps,
        )
        .ok()
    }
}

/// Replays `events` on a fresh market and settles the event at `focal`.
pub fn evaluate(
    market: &Market,
    dataset: &MarketDataset,
    events: &[PeeringEvent],
    focal: usize,
) -> Result<Evaluation> {
    let initial = market.initialize();
    let mut state = initial.clone();
    let mut reports = Vec::with_capacity(events.len());
    let mut around = None;
    for (k, event) in events.iter().enumerate() {
        let (next, report) = establish_peering(market, &state, event)?;
        if k == focal {
            around = Some((state.clone(), next.clone(), report.event.clone()));
        }
        state = next;
        reports.push(report);
    }
    let (before, after, event) = around.ok_or_else(|| {
        Error::InvalidScenario(vec![Violation::new("focal", "focal event index out of range")])
    })?;
    let scope = Bilateral {
        isp: event.isp,
        csp: event.csp,
        services: event.services,
    };
    let (accounts, outcome) = settle(
        market,
        &before,
        &after,
        &scope,
        &dataset.cost_model,
        &dataset.accounting,
    )?;
    Ok(Evaluation {
        reports,
        initial,
        before_focal: before,
        after_focal: after,
        final_state: state,
        scope,
        accounts,
        outcome,
    })
}

impl Prepared {
    /// Market with the given loyalties applied on top of the overrides.
    pub fn market_with(&self, beta: Option<f64>, theta: Option<f64>) -> Result<(MarketDataset, Market)> {
        let mut ds = self.dataset.clone();
        set_loyalties(&mut ds, beta, theta);
        let market = ds.market()?;
        Ok((ds, market))
    }

    fn evaluate_cell(
        &self,
        beta: Option<f64>,
        theta: Option<f64>,
        events: &[PeeringEvent],
        focal: usize,
    ) -> Result<Evaluation> {
        let (ds, market) = self.market_with(beta, theta)?;
        evaluate(&market, &ds, events, focal)
    }

    fn focal_services(&self) -> &[String] {
        &self.events[self.focal_index].services
    }

    fn with_focal_services(&self, services: Vec<String>) -> Vec<PeeringEvent> {
        let mut events = self.events.clone();
        events[self.focal_index].services = services;
        events
    }

    fn grid(&self) -> Vec<(Option<f64>, Option<f64>)> {
        let sweep = self.spec.sweep.clone().unwrap_or_default();
        let betas: Vec<Option<f64>> = match sweep.beta {
            Some(g) => g.into_iter().map(Some).collect(),
            None => vec![None],
        };
        let thetas: Vec<Option<f64>> = match sweep.theta {
            Some(g) => g.into_iter().map(Some).collect(),
            None => vec![None],
        };
        betas
            .iter()
            .flat_map(|b| thetas.iter().map(move |t| (*b, *t)))
            .collect()
    }

    fn effective_beta(&self, beta: Option<f64>) -> f64 {
        beta.unwrap_or_else(|| {
            self.dataset
                .isps
                .iter()
                .find(|i| i.id == self.spec.focal.isp)
                .map(|i| i.loyalty)
                .unwrap_or(f64::NAN)
        })
    }

    fn effective_theta(&self, theta: Option<f64>) -> f64 {
        theta.unwrap_or_else(|| {
            self.dataset
                .csps
                .iter()
                .find(|c| c.id == self.spec.focal.csp)
                .map(|c| c.loyalty)
                .unwrap_or(f64::NAN)
        })
    }
}

fn check_cells(cells: usize) -> Result<()> {
    if cells > MAX_CELLS {
        return Err(Error::InvalidScenario(vec![Violation::new(
            "sweep",
            format!("{cells} cells requested, the limit is {MAX_CELLS}"),
        )]));
    }
    Ok(())
}

/// Summary of one applied peering event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub isp: String,
    pub csp: String,
    pub services: Vec<String>,
    /// Services that were not yet peered and triggered churn.
    pub new_services: Vec<String>,
    pub phase1_customers: f64,
    pub phase2_customers: f64,
    pub phase1_flow_count: usize,
    pub phase2_flow_count: usize,
}

impl EventSummary {
    fn from_report(market: &Market, report: &ChurnReport) -> Self {
        let names = |ids: &[usize]| -> Vec<String> {
            ids.iter().map(|&s| market.services()[s].id.clone()).collect()
        };
        Self {
            isp: market.isps()[report.event.isp].id.clone(),
            csp: market.csps()[report.event.csp].id.clone(),
            services: names(&report.event.services),
            new_services: names(&report.new_services),
            phase1_customers: report.phase1_total(),
            phase2_customers: report.phase2_total(),
            phase1_flow_count: report.phase1.len(),
            phase2_flow_count: report.phase2.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IspPopulation {
    pub isp: String,
    pub customers_before: f64,
    pub customers_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocalSummary {
    pub isp: String,
    pub csp: String,
    pub services: Vec<String>,
    pub event_index: usize,
}

/// Settlement of the focal pair when it peers for a single service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceSettlement {
    pub service: String,
    pub payment_usd_per_month: f64,
    pub surplus_usd_per_month: f64,
    pub deal: bool,
    pub traffic_before_gbps: f64,
    pub traffic_after_gbps: f64,
    /// Absent when the peering adds no traffic.
    pub bandwidth_price_usd_per_gbps_per_month: Option<f64>,
}

impl ServiceSettlement {
    fn from_evaluation(service: &str, e: &Evaluation) -> Self {
        Self {
            service: service.into(),
            payment_usd_per_month: e.outcome.payment_usd_per_month,
            surplus_usd_per_month: e.outcome.surplus_usd_per_month,
            deal: e.outcome.deal,
            traffic_before_gbps: e.accounts.traffic_before_gbps,
            traffic_after_gbps: e.accounts.traffic_after_gbps,
            bandwidth_price_usd_per_gbps_per_month: e.bandwidth_price(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub dataset: String,
    pub focal: FocalSummary,
    pub outcome: BargainOutcome,
    pub accounts: BilateralAccounts,
    pub bandwidth_price_usd_per_gbps_per_month: Option<f64>,
    /// One standalone single-service settlement per peered service.
    pub per_service: Vec<ServiceSettlement>,
    pub events: Vec<EventSummary>,
    pub populations: Vec<IspPopulation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flows: Option<Vec<ChurnReportView>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_state: Option<StateSnapshot>,
}

/// Settles the focal pair once, with the spec's overrides.
pub fn run(spec: &ScenarioSpec) -> Result<RunResult> {
    let prepared = prepare(spec)?;
    run_prepared(&prepared)
}

pub fn run_prepared(p: &Prepared) -> Result<RunResult> {
    let (ds, market) = p.market_with(None, None)?;
    let main = evaluate(&market, &ds, &p.events, p.focal_index)?;
    let services = p.focal_services().to_vec();
    let per_service = if services.len() == 1 {
        vec![ServiceSettlement::from_evaluation(&services[0], &main)]
    } else {
        services
            .par_iter()
            .map(|s| {
                let events = p.with_focal_services(vec![s.clone()]);
                let e = evaluate(&market, &ds, &events, p.focal_index)?;
                Ok(ServiceSettlement::from_evaluation(s, &e))
            })
            .collect::<Result<Vec<_>>>()?
    };
    let events = main
        .reports
        .iter()
        .map(|r| EventSummary::from_report(&market, r))
        .collect();
    let populations = market
        .isps()
        .iter()
        .enumerate()
        .map(|(k, isp)| IspPopulation {
            isp: isp.id.clone(),
            customers_before: main.initial.population(&market, k),
            customers_after: main.final_state.population(&market, k),
        })
        .collect();
    Ok(RunResult {
        scenario: p.spec.name.clone(),
        dataset: ds.id.clone(),
        focal: FocalSummary {
            isp: p.spec.focal.isp.clone(),
            csp: p.spec.focal.csp.clone(),
            services,
            event_index: p.focal_index,
        },
        outcome: main.outcome,
        accounts: main.accounts,
        bandwidth_price_usd_per_gbps_per_month: main.bandwidth_price(),
        per_service,
        events,
        populations,
        flows: p
            .spec
            .include_flows
            .then(|| main.reports.iter().map(|r| r.view(&market)).collect()),
        final_state: p.spec.include_state.then(|| main.final_state.snapshot(&market)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub theta: f64,
    pub payment_usd_per_month: f64,
    pub surplus_usd_per_month: f64,
    pub deal: bool,
    pub isp_profit_after_usd_per_month: f64,
    pub csp_profit_after_usd_per_month: f64,
    pub traffic_before_gbps: f64,
    pub traffic_after_gbps: f64,
    pub bandwidth_price_usd_per_gbps_per_month: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario: String,
    pub dataset: String,
    pub focal: FocalSummary,
    pub beta_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

/// Runs the scenario for every `(β, θ)` cell of the sweep grid.
pub fn sweep(spec: &ScenarioSpec) -> Result<SweepResult> {
    let p = prepare(spec)?;
    if p.spec.sweep.is_none() {
        return Err(Error::InvalidScenario(vec![Violation::new(
            "sweep",
            "a sweep needs at least one axis (beta or theta)",
        )]));
    }
    let grid = p.grid();
    check_cells(grid.len())?;
    let rows = grid
        .par_iter()
        .map(|&(b, t)| {
            let e = p.evaluate_cell(b, t, &p.events, p.focal_index)?;
            Ok(SweepRow {
                beta: p.effective_beta(b),
                theta: p.effective_theta(t),
                payment_usd_per_month: e.outcome.payment_usd_per_month,
                surplus_usd_per_month: e.outcome.surplus_usd_per_month,
                deal: e.outcome.deal,
                isp_profit_after_usd_per_month: e.outcome.v_isp_after_usd_per_month,
                csp_profit_after_usd_per_month: e.outcome.v_csp_after_usd_per_month,
                traffic_before_gbps: e.accounts.traffic_before_gbps,
                traffic_after_gbps: e.accounts.traffic_after_gbps,
                bandwidth_price_usd_per_gbps_per_month: e.bandwidth_price(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sweep = p.spec.sweep.clone().unwrap_or_default();
    Ok(SweepResult {
        scenario: p.spec.name.clone(),
        dataset: p.dataset.id.clone(),
        focal: focal_summary(&p),
        beta_grid: sweep.beta.unwrap_or_default(),
        theta_grid: sweep.theta.unwrap_or_default(),
        rows,
    })
}

fn focal_summary(p: &Prepared) -> FocalSummary {
    FocalSummary {
        isp: p.spec.focal.isp.clone(),
        csp: p.spec.focal.csp.clone(),
        services: p.focal_services().to_vec(),
        event_index: p.focal_index,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceCell {
    pub payment_usd_per_month: f64,
    pub deal: bool,
    pub traffic_before_gbps: f64,
    pub traffic_after_gbps: f64,
    /// Absent when the peering adds no traffic.
    pub bandwidth_price_usd_per_gbps_per_month: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRow {
    pub beta: f64,
    pub theta: f64,
    /// Keyed by service id, in dataset order.
    pub prices: IndexMap<String, PriceCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub scenario: String,
    pub dataset: String,
    pub isp: String,
    pub csp: String,
    pub cdn: bool,
    pub services: Vec<String>,
    pub rows: Vec<PriceRow>,
}

/// Prices every service separately: the focal event is reduced to that one
/// service and its payment divided by the extra traffic.
pub fn price_table(spec: &ScenarioSpec) -> Result<PriceTable> {
    let p = prepare(spec)?;
    let csp = p
        .dataset
        .csps
        .iter()
        .find(|c| c.id == p.spec.focal.csp)
        .expect("validated");
    let requested = p.spec.price_table.clone().unwrap_or_default().services;
    let services: Vec<String> = p
        .dataset
        .services
        .iter()
        .map(|s| s.id.clone())
        .filter(|s| csp.offers(s))
        .filter(|s| requested.is_empty() || requested.contains(s))
        .filter(|s| match &p.spec.overrides.services {
            Some(subset) => subset.contains(s),
            None => true,
        })
        .collect();
    if services.is_empty() {
        return Err(Error::InvalidScenario(vec![Violation::new(
            "price_table.services",
            format!("`{}` offers none of the requested services", csp.id),
        )]));
    }
    let grid = p.grid();
    check_cells(grid.len() * services.len())?;
    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..services.len()).map(move |s| (g, s)))
        .collect();
    let evaluated = cells
        .par_iter()
        .map(|&(g, s)| {
            let (b, t) = grid[g];
            let events = p.with_focal_services(vec![services[s].clone()]);
            let e = p.evaluate_cell(b, t, &events, p.focal_index)?;
            Ok(PriceCell {
                payment_usd_per_month: e.outcome.payment_usd_per_month,
                deal: e.outcome.deal,
                traffic_before_gbps: e.accounts.traffic_before_gbps,
                traffic_after_gbps: e.accounts.traffic_after_gbps,
                bandwidth_price_usd_per_gbps_per_month: e.bandwidth_price(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut iter = evaluated.into_iter();
    for &(b, t) in &grid {
        let prices = services
            .iter()
            .map(|s| (s.clone(), iter.next().expect("one cell per service")))
            .collect();
        rows.push(PriceRow {
            beta: p.effective_beta(b),
            theta: p.effective_theta(t),
            prices,
        });
    }
    Ok(PriceTable {
        scenario: p.spec.name.clone(),
        dataset: p.dataset.id.clone(),
        isp: p.spec.focal.isp.clone(),
        csp: p.spec.focal.csp.clone(),
        cdn: p.dataset.cost_model.cdn_enabled,
        services,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub label: String,
    /// Zero-based position of the focal event in this ordering.
    pub focal_position: usize,
    pub events: Vec<String>,
    pub isp_customers_before: f64,
    pub isp_customers_after: f64,
    pub isp_profit_before_usd_per_month: f64,
    pub isp_profit_after_usd_per_month: f64,
    pub payment_usd_per_month: f64,
    pub deal: bool,
    pub isp_final_customers: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingResult {
    pub scenario: String,
    pub dataset: String,
    pub isp: String,
    pub csp: String,
    pub rows: Vec<TimingRow>,
}

/// Replays the events in each ordering and settles the focal pair where it
/// falls in that ordering.
pub fn timing_experiment(spec: &ScenarioSpec) -> Result<TimingResult> {
    let p = prepare(spec)?;
    let orderings = match &p.spec.timing {
        Some(t) => t.orderings.clone(),
        None => {
            return Err(Error::InvalidScenario(vec![Violation::new(
                "timing",
                "a timing experiment needs at least one ordering",
            )]))
        }
    };
    check_cells(orderings.len())?;
    let (ds, market) = p.market_with(None, None)?;
    let isp_index = market.isp_index(&p.spec.focal.isp)?;
    let rows = orderings
        .par_iter()
        .map(|o| {
            let events: Vec<PeeringEvent> = o.order.iter().map(|&k| p.events[k].clone()).collect();
            let focal = o
                .order
                .iter()
                .position(|&k| k == p.focal_index)
                .expect("permutation contains the focal event");
            let e = evaluate(&market, &ds, &events, focal)?;
            Ok(TimingRow {
                label: o.label.clone(),
                focal_position: focal,
                events: events.iter().map(|e| format!("{}-{}", e.isp, e.csp)).collect(),
                isp_customers_before: e.accounts.isp.customers_before,
                isp_customers_after: e.accounts.isp.customers_after,
                isp_profit_before_usd_per_month: e.outcome.v_isp_before_usd_per_month,
                isp_profit_after_usd_per_month: e.outcome.v_isp_after_usd_per_month,
                payment_usd_per_month: e.outcome.payment_usd_per_month,
                deal: e.outcome.deal,
                isp_final_customers: e.final_state.population(&market, isp_index),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TimingResult {
        scenario: p.spec.name.clone(),
        dataset: ds.id.clone(),
        isp: p.spec.focal.isp.clone(),
        csp: p.spec.focal.csp.clone(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub beta: f64,
    pub theta: f64,
    /// Payment to each compared ISP, keyed by ISP id in request order.
    pub payments_usd_per_month: IndexMap<String, f64>,
    pub deals: IndexMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub scenario: String,
    pub dataset: String,
    pub csp: String,
    pub isps: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Runs the scenario once per listed ISP, each taking the focal ISP's place
/// in the focal event, over the sweep grid when one is given.
pub fn pair_comparison(spec: &ScenarioSpec) -> Result<ComparisonResult> {
    let p = prepare(spec)?;
    let isps = match &p.spec.compare {
        Some(c) => c.isps.clone(),
        None => {
            return Err(Error::InvalidScenario(vec![Violation::new(
                "compare",
                "a comparison needs a list of ISPs",
            )]))
        }
    };
    for (k, isp) in isps.iter().enumerate() {
        if p.dataset.isps.iter().any(|i| &i.id == isp && i.passive) {
            return Err(Error::InvalidScenario(vec![Violation::new(
                format!("compare.isps[{k}]"),
                format!("access ISP `{isp}` is passive and never peers"),
            )]));
        }
    }
    let grid = p.grid();
    check_cells(grid.len() * isps.len())?;
    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..isps.len()).map(move |i| (g, i)))
        .collect();
    let evaluated = cells
        .par_iter()
        .map(|&(g, i)| {
            let (b, t) = grid[g];
            let mut events = p.events.clone();
            events[p.focal_index].isp = isps[i].clone();
            let e = p.evaluate_cell(b, t, &events, p.focal_index)?;
            Ok((e.outcome.payment_usd_per_month, e.outcome.deal))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = evaluated.into_iter();
    let rows = grid
        .iter()
        .map(|&(b, t)| {
            let mut payments = IndexMap::new();
            let mut deals = IndexMap::new();
            for isp in &isps {
                let (pay, deal) = iter.next().expect("one cell per ISP");
                payments.insert(isp.clone(), pay);
                deals.insert(isp.clone(), deal);
            }
            ComparisonRow {
                beta: p.effective_beta(b),
                theta: p.effective_theta(t),
                payments_usd_per_month: payments,
                deals,
            }
        })
        .collect();
    Ok(ComparisonResult {
        scenario: p.spec.name.clone(),
        dataset: p.dataset.id.clone(),
        csp: p.spec.focal.csp.clone(),
        isps,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{toy_dataset, TOY};

    fn toy_spec() -> ScenarioSpec {
        ScenarioSpec::single("toy", TOY, PeeringEvent::new("ISP1", "CSP1"))
    }

    #[test]
    fn toy_run_settles_both_services() {
        let r = run(&toy_spec()).unwrap();
        assert_eq!(r.focal.services, vec!["search", "video"]);
        assert_eq!(r.per_service.len(), 2);
        assert_eq!(r.events[0].phase1_customers, 36.0);
        assert_eq!(r.events[0].phase2_customers, 24.0);
        let isp1 = &r.populations[0];
        assert_eq!(isp1.customers_before, 120.0);
        assert_eq!(isp1.customers_after, 156.0);
        let total = r.outcome.isp_gain() + r.outcome.csp_gain();
        assert!((total - r.outcome.surplus_usd_per_month).abs() < 1e-9);
    }

    #[test]
    fn run_is_deterministic() {
        let a = serde_json::to_string(&run(&toy_spec()).unwrap()).unwrap();
        let b = serde_json::to_string(&run(&toy_spec()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flows_and_state_on_request() {
        let mut spec = toy_spec();
        spec.include_flows = true;
        spec.include_state = true;
        let r = run(&spec).unwrap();
        let flows = r.flows.unwrap();
        assert_eq!(flows[0].phase1_flows.len(), 4);
        assert_eq!(flows[0].phase2_flows.len(), 4);
        assert_eq!(r.final_state.unwrap().counts.len(), 16);
    }

    #[test]
    fn no_churn_no_uplift_means_no_payment() {
        let mut spec = toy_spec();
        spec.overrides.isp_loyalty = Some(1.0);
        spec.overrides.csp_loyalty = Some(1.0);
        spec.overrides.uplift = Some("none".into());
        let r = run(&spec).unwrap();
        assert_eq!(r.outcome.payment_usd_per_month, 0.0);
    }

    #[test]
    fn sweep_rows_follow_grid_order() {
        let mut spec = toy_spec();
        spec.sweep = Some(SweepAxes {
            beta: Some(vec![0.1, 0.9]),
            theta: Some(vec![0.0, 0.5, 1.0]),
        });
        let s = sweep(&spec).unwrap();
        assert_eq!(s.rows.len(), 6);
        let order: Vec<(f64, f64)> = s.rows.iter().map(|r| (r.beta, r.theta)).collect();
        assert_eq!(
            order,
            vec![(0.1, 0.0), (0.1, 0.5), (0.1, 1.0), (0.9, 0.0), (0.9, 0.5), (0.9, 1.0)]
        );
    }

    #[test]
    fn single_cell_sweep_matches_run() {
        let mut spec = toy_spec();
        spec.overrides.isp_loyalty = Some(0.3);
        let r = run(&spec).unwrap();
        spec.overrides.isp_loyalty = None;
        spec.sweep = Some(SweepAxes {
            beta: Some(vec![0.3]),
            theta: None,
        });
        let s = sweep(&spec).unwrap();
        assert_eq!(s.rows[0].payment_usd_per_month, r.outcome.payment_usd_per_month);
    }

    #[test]
    fn invalid_specs_name_fields() {
        let mut spec = toy_spec();
        spec.overrides.isp_loyalty = Some(1.5);
        spec.focal.csp = "CSP2".into();
        spec.events.push(PeeringEvent::new("ISP9", "CSP1"));
        let err = run(&spec).unwrap_err();
        let paths: Vec<&str> = err.violations().iter().map(|v| v.path.as_str()).collect();
        assert!(paths.contains(&"overrides.isp_loyalty"), "{paths:?}");
        assert!(paths.contains(&"focal"), "{paths:?}");
        assert!(paths.contains(&"events[1].isp"), "{paths:?}");
    }

    #[test]
    fn cell_cap_is_enforced() {
        let mut spec = toy_spec();
        let grid: Vec<f64> = (0..101).map(|k| k as f64 / 100.0).collect();
        spec.sweep = Some(SweepAxes {
            beta: Some(grid.clone()),
            theta: Some(grid),
        });
        let err = sweep(&spec).unwrap_err();
        assert!(err.to_string().contains("limit"));
    }

    #[test]
    fn timing_single_ordering_matches_run() {
        let mut spec = toy_spec();
        spec.timing = Some(TimingSpec {
            orderings: vec![Ordering {
                label: "only".into(),
                order: vec![0],
            }],
        });
        let t = timing_experiment(&spec).unwrap();
        let r = run(&spec).unwrap();
        assert_eq!(t.rows[0].payment_usd_per_month, r.outcome.payment_usd_per_month);
    }

    #[test]
    fn timing_rejects_non_permutations() {
        let mut spec = toy_spec();
        spec.timing = Some(TimingSpec {
            orderings: vec![Ordering {
                label: "bad".into(),
                order: vec![0, 0],
            }],
        });
        assert!(timing_experiment(&spec).is_err());
    }

    #[test]
    fn cloned_isps_get_identical_payments() {
        let mut ds = toy_dataset();
        let mut twin = ds.isps[0].clone();
        twin.id = "ISP1b".into();
        ds.isps.push(twin);
        let mut spec = toy_spec();
        spec.dataset = DatasetRef::Inline(Box::new(ds));
        spec.compare = Some(CompareSpec {
            isps: vec!["ISP1".into(), "ISP1b".into()],
        });
        let c = pair_comparison(&spec).unwrap();
        let pay = &c.rows[0].payments_usd_per_month;
        assert!((pay["ISP1"] - pay["ISP1b"]).abs() <= 1e-9 * pay["ISP1"].abs().max(1.0));
    }

    #[test]
    fn price_table_has_one_column_per_offered_service() {
        let mut spec = toy_spec();
        spec.sweep = Some(SweepAxes {
            beta: None,
            theta: Some(vec![0.0, 1.0]),
        });
        let t = price_table(&spec).unwrap();
        assert_eq!(t.services, vec!["search", "video"]);
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows.iter().all(|r| r.prices.len() == 2));
    }

    #[test]
    fn spec_round_trip() {
        let mut spec = toy_spec();
        spec.sweep = Some(SweepAxes {
            beta: None,
            theta: Some(vec![0.0, 0.2]),
        });
        spec.overrides.uplift = Some("none".into());
        let text = spec.to_json().unwrap();
        assert_eq!(ScenarioSpec::from_json(&text).unwrap(), spec);
    }

    #[test]
    fn unknown_spec_fields_are_rejected() {
        let text = r#"{"schema_version":1,"name":"x","dataset":"toy","events":[],"focal":{"isp":"ISP1","csp":"CSP1"},"colour":1}"#;
        assert!(matches!(ScenarioSpec::from_json(text), Err(Error::Parse { .. })));
    }
}
