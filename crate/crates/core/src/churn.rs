//! Two-phase churn triggered by a new premium peering.
//!
//! Phase 1 moves customers between ISPs: customers of other ISPs whose
//! preferred service is now premium at the peering ISP follow it. Phase 2
//! moves customers between CSPs inside the peering ISP: customers whose
//! preferred service comes from a non-premium competitor switch to the
//! peering CSP. Each phase computes every delta from the state it starts
//! with and applies them afterwards, so flows never cascade within a phase.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{CustomerType, Market, MarketState, Provider};

/// Services delivered at premium quality, per `(isp, csp)` pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PeeringLedger {
    entries: BTreeMap<(usize, usize), BTreeSet<usize>>,
}

impl PeeringLedger {
    pub fn has(&self, isp: usize, csp: usize, service: usize) -> bool {
        self.entries
            .get(&(isp, csp))
            .is_some_and(|set| set.contains(&service))
    }

    pub fn services(&self, isp: usize, csp: usize) -> impl Iterator<Item = usize> + '_ {
        self.entries.get(&(isp, csp)).into_iter().flatten().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of `(isp, csp, service)` premium entries.
    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }

    fn extend(&mut self, isp: usize, csp: usize, services: &[usize]) {
        if services.is_empty() {
            return;
        }
        self.entries
            .entry((isp, csp))
            .or_default()
            .extend(services.iter().copied());
    }

    pub fn entries(&self, market: &Market) -> Vec<LedgerEntry> {
        self.entries
            .iter()
            .map(|(&(isp, csp), services)| LedgerEntry {
                isp: market.isps()[isp].id.clone(),
                csp: market.csps()[csp].id.clone(),
                services: services
                    .iter()
                    .map(|&s| market.services()[s].id.clone())
                    .collect(),
            })
            .collect()
    }

    /// True if every entry of `self` is also present in `other`.
    pub fn is_subset(&self, other: &PeeringLedger) -> bool {
        self.entries.iter().all(|(key, services)| {
            other
                .entries
                .get(key)
                .is_some_and(|theirs| services.is_subset(theirs))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub isp: String,
    pub csp: String,
    pub services: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeeringAction {
    #[default]
    Establish,
    Remove,
}

fn is_establish(action: &PeeringAction) -> bool {
    *action == PeeringAction::Establish
}

/// A change in network connectivity between one ISP and one CSP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeeringEvent {
    pub isp: String,
    pub csp: String,
    /// Services upgraded to premium; empty means every service the CSP offers.
    #[serde(default)]
    pub services: Vec<String>,
    #[serde(default, skip_serializing_if = "is_establish")]
    pub action: PeeringAction,
}

impl PeeringEvent {
    pub fn new(isp: impl Into<String>, csp: impl Into<String>) -> Self {
        Self {
            isp: isp.into(),
            csp: csp.into(),
            services: Vec::new(),
            action: PeeringAction::Establish,
        }
    }

    pub fn with_services<I, S>(mut self, services: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.services = services.into_iter().map(Into::into).collect();
        self
    }
}

/// An event with ids resolved to indices; services sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedEvent {
    pub isp: usize,
    pub csp: usize,
    pub services: Vec<usize>,
}

pub fn resolve_event(market: &Market, event: &PeeringEvent) -> Result<ResolvedEvent> {
    if event.action == PeeringAction::Remove {
        return Err(Error::RemovalUnsupported {
            isp: event.isp.clone(),
            csp: event.csp.clone(),
        });
    }
    let isp = market.isp_index(&event.isp)?;
    let csp = market.csp_index(&event.csp)?;
    if market.isps()[isp].passive {
        return Err(Error::PassiveIsp(event.isp.clone()));
    }
    let services = if event.services.is_empty() {
        market.offered_services(csp)
    } else {
        let mut resolved = BTreeSet::new();
        for id in &event.services {
            let service = market.service_index(id)?;
            if !market.offers(csp, service) {
                return Err(Error::ServiceNotOffered {
                    csp: event.csp.clone(),
                    service: id.clone(),
                });
            }
            resolved.insert(service);
        }
        resolved.into_iter().collect()
    };
    Ok(ResolvedEvent { isp, csp, services })
}

/// Customers leaving `from_isp` for `to_isp`, keeping their `(s, T)` profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IspFlow {
    pub from_isp: usize,
    pub to_isp: usize,
    /// Type index of the source.
    pub source: usize,
    pub amount: f64,
}

/// Customers of one ISP switching the provider of their preferred service.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProviderFlow {
    pub isp: usize,
    pub service: usize,
    pub from_csp: usize,
    pub to_csp: usize,
    /// Type index of the source.
    pub source: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChurnReport {
    pub event: ResolvedEvent,
    /// Services newly added to the ledger by this event.
    pub new_services: Vec<usize>,
    pub phase1: Vec<IspFlow>,
    pub phase2: Vec<ProviderFlow>,
}

impl ChurnReport {
    pub fn is_empty(&self) -> bool {
        self.phase1.is_empty() && self.phase2.is_empty()
    }

    pub fn phase1_total(&self) -> f64 {
        self.phase1.iter().map(|f| f.amount).sum()
    }

    pub fn phase2_total(&self) -> f64 {
        self.phase2.iter().map(|f| f.amount).sum()
    }

    pub fn view(&self, market: &Market) -> ChurnReportView {
        let isp_id = |i: usize| market.isps()[i].id.clone();
        let csp_id = |c: usize| market.csps()[c].id.clone();
        ChurnReportView {
            isp: isp_id(self.event.isp),
            csp: csp_id(self.event.csp),
            services: self
                .new_services
                .iter()
                .map(|&s| market.services()[s].id.clone())
                .collect(),
            phase1_flows: self
                .phase1
                .iter()
                .map(|f| IspFlowRecord {
                    from_isp: isp_id(f.from_isp),
                    to_isp: isp_id(f.to_isp),
                    customer_type: market.customer_type(f.source),
                    amount: f.amount,
                })
                .collect(),
            phase2_flows: self
                .phase2
                .iter()
                .map(|f| ProviderFlowRecord {
                    isp: isp_id(f.isp),
                    from_provider: csp_id(f.from_csp),
                    to_provider: csp_id(f.to_csp),
                    service: market.services()[f.service].id.clone(),
                    customer_type: market.customer_type(f.source),
                    amount: f.amount,
                })
                .collect(),
        }
    }
}

/// JSON form of a [`ChurnReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChurnReportView {
    pub isp: String,
    pub csp: String,
    pub services: Vec<String>,
    pub phase1_flows: Vec<IspFlowRecord>,
    pub phase2_flows: Vec<ProviderFlowRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IspFlowRecord {
    pub from_isp: String,
    pub to_isp: String,
    pub customer_type: CustomerType,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderFlowRecord {
    pub isp: String,
    pub from_provider: String,
    pub to_provider: String,
    pub service: String,
    pub customer_type: CustomerType,
    pub amount: f64,
}

fn check_offered(market: &Market, csp: usize, services: &[usize]) -> Result<()> {
    for &s in services {
        if s >= market.services().len() {
            return Err(Error::UnknownService(s.to_string()));
        }
        if !market.offers(csp, s) {
            return Err(Error::ServiceNotOffered {
                csp: market.csps()[csp].id.clone(),
                service: market.services()[s].id.clone(),
            });
        }
    }
    Ok(())
}

fn check_pair(market: &Market, isp: usize, csp: usize) -> Result<()> {
    if isp >= market.isps().len() {
        return Err(Error::UnknownIsp(isp.to_string()));
    }
    if csp >= market.csps().len() {
        return Err(Error::UnknownCsp(csp.to_string()));
    }
    Ok(())
}

/// Churn across ISPs towards `isp`, which now peers with `csp` on `services`.
///
/// A customer of another ISP `i` moves when their preferred service is in
/// `services`, they get it from `csp`, and `i` has no premium peering with
/// `csp` for it. The moving fraction is `(1 - loyalty(i)) * isp_churn_prob(s)`.
pub fn phase1_churn(
    market: &Market,
    state: &MarketState,
    isp: usize,
    csp: usize,
    services: &[usize],
) -> Result<(MarketState, Vec<IspFlow>)> {
    check_pair(market, isp, csp)?;
    check_offered(market, csp, services)?;
    let space = market.space();
    let target = Provider::Csp(csp);
    let mut services = services.to_vec();
    services.sort_unstable();
    services.dedup();

    let mut flows = Vec::new();
    for (from, source_isp) in market.isps().iter().enumerate() {
        if from == isp {
            continue;
        }
        for &s in &services {
            if state.ledger.has(from, csp, s) {
                continue;
            }
            let rate = (1.0 - source_isp.loyalty) * market.services()[s].isp_churn_prob;
            if rate <= 0.0 {
                continue;
            }
            let start = space.block_start(from, s);
            for source in start..start + space.provider_vectors() {
                if space.provider_of(source, s) != target {
                    continue;
                }
                let amount = state.counts[source] * rate;
                if amount > 0.0 {
                    flows.push(IspFlow {
                        from_isp: from,
                        to_isp: isp,
                        source,
                        amount,
                    });
                }
            }
        }
    }

    let mut next = state.clone();
    for flow in &flows {
        next.counts[flow.source] -= flow.amount;
        next.counts[space.at_isp(flow.source, flow.to_isp)] += flow.amount;
    }
    Ok((next, flows))
}

/// Churn across CSPs inside `isp`, towards `csp`, for customers preferring
/// one of `services`.
///
/// Customers getting their preferred service from a competitor without
/// premium peering at `isp` switch with probability
/// `(1 - loyalty(competitor)) * csp_churn_prob(s)`. Unserved customers never
/// move.
pub fn phase2_churn(
    market: &Market,
    state: &MarketState,
    isp: usize,
    csp: usize,
    services: &[usize],
) -> Result<(MarketState, Vec<ProviderFlow>)> {
    check_pair(market, isp, csp)?;
    check_offered(market, csp, services)?;
    let space = market.space();
    let mut services = services.to_vec();
    services.sort_unstable();
    services.dedup();

    let mut flows = Vec::new();
    for &s in &services {
        let g = market.services()[s].csp_churn_prob;
        let start = space.block_start(isp, s);
        for source in start..start + space.provider_vectors() {
            let from_csp = match space.provider_of(source, s) {
                Provider::Csp(c) if c != csp => c,
                _ => continue,
            };
            if state.ledger.has(isp, from_csp, s) {
                continue;
            }
            let rate = (1.0 - market.csps()[from_csp].loyalty) * g;
            let amount = state.counts[source] * rate;
            if amount > 0.0 {
                flows.push(ProviderFlow {
                    isp,
                    service: s,
                    from_csp,
                    to_csp: csp,
                    source,
                    amount,
                });
            }
        }
    }

    let mut next = state.clone();
    for flow in &flows {
        let option = space
            .option_of(flow.service, Provider::Csp(flow.to_csp))
            .expect("offered services have an option");
        next.counts[flow.source] -= flow.amount;
        next.counts[space.with_option(flow.source, flow.service, option)] += flow.amount;
    }
    Ok((next, flows))
}

/// Applies a peering event: phase 1, then phase 2 on the resulting state,
/// for the services not yet premium for this pair. Repeating an event is a
/// no-op with an empty report.
pub fn establish_peering(
    market: &Market,
    state: &MarketState,
    event: &PeeringEvent,
) -> Result<(MarketState, ChurnReport)> {
    let resolved = resolve_event(market, event)?;
    establish_resolved(market, state, resolved)
}

pub fn establish_resolved(
    market: &Market,
    state: &MarketState,
    event: ResolvedEvent,
) -> Result<(MarketState, ChurnReport)> {
    let new_services: Vec<usize> = event
        .services
        .iter()
        .copied()
        .filter(|&s| !state.ledger.has(event.isp, event.csp, s))
        .collect();
    if new_services.is_empty() {
        return Ok((
            state.clone(),
            ChurnReport {
                event,
                new_services,
                phase1: Vec::new(),
                phase2: Vec::new(),
            },
        ));
    }
    let (after_phase1, phase1) = phase1_churn(market, state, event.isp, event.csp, &new_services)?;
    let (mut next, phase2) =
        phase2_churn(market, &after_phase1, event.isp, event.csp, &new_services)?;
    next.ledger.extend(event.isp, event.csp, &new_services);
    Ok((
        next,
        ChurnReport {
            event,
            new_services,
            phase1,
            phase2,
        },
    ))
}

/// Applies events strictly in order. No churn happens between events.
pub fn simulate_sequence(
    market: &Market,
    state: &MarketState,
    events: &[PeeringEvent],
) -> Result<(MarketState, Vec<ChurnReport>)> {
    let mut current = state.clone();
    let mut reports = Vec::with_capacity(events.len());
    for event in events {
        let (next, report) = establish_peering(market, &current, event)?;
        current = next;
        reports.push(report);
    }
    Ok((current, reports))
}

/// Peering removal has no defined reverse churn rule.
pub fn remove_peering(
    _market: &Market,
    _state: &MarketState,
    isp: &str,
    csp: &str,
) -> Result<MarketState> {
    Err(Error::RemovalUnsupported {
        isp: isp.to_string(),
        csp: csp.to_string(),
    })
}
