//! Customer-type state space and market state.
//!
//! A customer type is `(isp, preferred service, provider vector)`: the access
//! ISP the customer subscribes to, the service they value most, and which
//! content provider (or nobody) delivers each service to them. Counts are
//! real-valued because churn moves fractions of customers.
//!
//! Types are enumerated in a fixed order: by ISP (dataset order), then by
//! preferred service (dataset order), then lexicographically by provider
//! vector where service 0 is the most significant digit. Within one service
//! the providers follow CSP declaration order, with the unserved remainder
//! last.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::churn::{LedgerEntry, PeeringLedger};
use crate::error::{Error, Result, Violation};

/// Id used for the implicit provider holding the unserved share of a service.
pub const NONE_PROVIDER: &str = "NONE";

/// Share sums and remainders below this are treated as zero.
pub const SHARE_EPSILON: f64 = 1e-9;

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    pub id: String,
    /// Probability that a customer preferring this service switches ISP, `h(s)`.
    pub isp_churn_prob: f64,
    /// Probability that a customer preferring this service switches CSP, `g(s)`.
    pub csp_churn_prob: f64,
    pub engagement_min_per_day: f64,
    pub post_engagement_min_per_day: f64,
    pub traffic_mb_per_min: f64,
    pub post_traffic_mb_per_min: f64,
    /// Click-through rate times revenue per click, per engagement minute.
    pub ad_rate_usd_per_min: f64,
    pub post_ad_rate_usd_per_min: f64,
    pub subscription_usd_per_month: f64,
    pub post_subscription_usd_per_month: f64,
    /// Fraction of customers whose most valued service is this one.
    pub importance_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessIsp {
    pub id: String,
    pub subscribers: f64,
    pub profit_per_customer_usd_per_month: f64,
    pub post_profit_per_customer_usd_per_month: f64,
    pub loyalty: f64,
    /// Falls back to the cost model default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transit_unit_cost: Option<f64>,
    /// Passive ISPs lose customers to churn but never peer.
    #[serde(default, skip_serializing_if = "is_false")]
    pub passive: bool,
}

/// Per-provider replacement for a service's revenue terms. Applies to both
/// the pre- and post-peering values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceTerms {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subscription_usd_per_month: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ad_rate_usd_per_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentProvider {
    pub id: String,
    pub loyalty: f64,
    /// Fraction of users served per service id; absent means zero.
    pub service_shares: IndexMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transit_unit_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub service_terms: IndexMap<String, ServiceTerms>,
}

impl ContentProvider {
    pub fn share(&self, service: &str) -> f64 {
        self.service_shares.get(service).copied().unwrap_or(0.0)
    }

    pub fn offers(&self, service: &str) -> bool {
        self.share(service) > 0.0
    }
}

/// Provider of one service slot in a customer type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provider {
    Csp(usize),
    Unserved,
}

/// A customer type with ids resolved, used at the API boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomerType {
    pub isp: String,
    pub preferred: String,
    /// Service id to provider id (or `NONE`), in service order.
    pub providers: IndexMap<String, String>,
}

/// Enumeration of every customer type with a dense index.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeSpace {
    isp_count: usize,
    /// Per service, the providers a customer can be assigned to.
    options: Vec<Vec<Provider>>,
    /// Population share of each option, aligned with `options`.
    shares: Vec<Vec<f64>>,
    /// Mixed-radix place values for the provider vector.
    strides: Vec<usize>,
    combos: usize,
}

impl TypeSpace {
    /// Enumerates provider options per service. Zero-share providers are left
    /// out; a remainder above [`SHARE_EPSILON`] becomes the unserved option.
    /// A service without any provider is an error: nobody could use it.
    pub fn build(
        services: &[ServiceSpec],
        csps: &[ContentProvider],
        isp_count: usize,
    ) -> Result<Self> {
        check_unique("service", services.iter().map(|s| s.id.as_str()))?;
        check_unique("content provider", csps.iter().map(|c| c.id.as_str()))?;
        for csp in csps {
            if csp.id == NONE_PROVIDER {
                return Err(Error::DuplicateId {
                    kind: "content provider (reserved)",
                    id: csp.id.clone(),
                });
            }
            for service in csp.service_shares.keys() {
                if !services.iter().any(|s| &s.id == service) {
                    return Err(Error::UnknownService(service.clone()));
                }
            }
        }

        let mut options = Vec::with_capacity(services.len());
        let mut shares = Vec::with_capacity(services.len());
        for service in services {
            let mut opts = Vec::new();
            let mut opt_shares = Vec::new();
            let mut total = 0.0;
            for (idx, csp) in csps.iter().enumerate() {
                let share = csp.share(&service.id);
                if share > 0.0 {
                    opts.push(Provider::Csp(idx));
                    opt_shares.push(share);
                    total += share;
                }
            }
            if total > 1.0 + SHARE_EPSILON {
                return Err(Error::InvalidDataset(vec![Violation::new(
                    format!("services.{}", service.id),
                    format!("provider shares sum to {total}, above 1"),
                )]));
            }
            if opts.is_empty() {
                return Err(Error::UnusedService(service.id.clone()));
            }
            let remainder = 1.0 - total;
            if remainder > SHARE_EPSILON {
                opts.push(Provider::Unserved);
                opt_shares.push(remainder);
            }
            options.push(opts);
            shares.push(opt_shares);
        }

        let mut strides = vec![1; services.len()];
        let mut combos = 1usize;
        for k in (0..services.len()).rev() {
            strides[k] = combos;
            combos *= options[k].len();
        }

        Ok(Self {
            isp_count,
            options,
            shares,
            strides,
            combos,
        })
    }

    pub fn service_count(&self) -> usize {
        self.options.len()
    }

    pub fn isp_count(&self) -> usize {
        self.isp_count
    }

    /// Number of distinct provider vectors.
    pub fn provider_vectors(&self) -> usize {
        self.combos
    }

    pub fn types_per_isp(&self) -> usize {
        self.service_count() * self.combos
    }

    pub fn len(&self) -> usize {
        self.isp_count * self.types_per_isp()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn options(&self, service: usize) -> &[Provider] {
        &self.options[service]
    }

    pub fn option_shares(&self, service: usize) -> &[f64] {
        &self.shares[service]
    }

    pub fn option_of(&self, service: usize, provider: Provider) -> Option<usize> {
        self.options[service].iter().position(|&p| p == provider)
    }

    pub fn isp_of(&self, idx: usize) -> usize {
        idx / self.types_per_isp()
    }

    pub fn preferred_of(&self, idx: usize) -> usize {
        (idx % self.types_per_isp()) / self.combos
    }

    fn digit(&self, idx: usize, service: usize) -> usize {
        (idx % self.combos) / self.strides[service] % self.options[service].len()
    }

    pub fn provider_of(&self, idx: usize, service: usize) -> Provider {
        self.options[service][self.digit(idx, service)]
    }

    /// Index of the same `(s, T)` profile at another ISP.
    pub fn at_isp(&self, idx: usize, isp: usize) -> usize {
        isp * self.types_per_isp() + idx % self.types_per_isp()
    }

    /// Index of the type obtained by switching one service to another option.
    pub fn with_option(&self, idx: usize, service: usize, option: usize) -> usize {
        let current = self.digit(idx, service);
        idx - current * self.strides[service] + option * self.strides[service]
    }

    /// First index of the types of `isp` preferring `service`.
    pub fn block_start(&self, isp: usize, preferred: usize) -> usize {
        isp * self.types_per_isp() + preferred * self.combos
    }

    /// `base` times each option share of the vector, multiplied in service
    /// order. Folding from the population keeps round figures exact where
    /// the shares allow it (120 x 1/4 x 2/3 x 3/5 comes out as 12).
    pub fn apportion(&self, idx: usize, base: f64) -> f64 {
        (0..self.service_count()).fold(base, |acc, k| acc * self.shares[k][self.digit(idx, k)])
    }

    /// Initial share of the provider vector encoded in `idx`.
    pub fn vector_share(&self, idx: usize) -> f64 {
        (0..self.service_count())
            .map(|k| self.shares[k][self.digit(idx, k)])
            .product()
    }
}

fn check_unique<'a>(kind: &'static str, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId {
                kind,
                id: id.to_string(),
            });
        }
    }
    Ok(())
}

/// The immutable population model: services, providers and the type space.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    services: Vec<ServiceSpec>,
    isps: Vec<AccessIsp>,
    csps: Vec<ContentProvider>,
    space: TypeSpace,
}

impl Market {
    pub fn new(
        services: Vec<ServiceSpec>,
        isps: Vec<AccessIsp>,
        csps: Vec<ContentProvider>,
    ) -> Result<Self> {
        if services.is_empty() {
            return Err(Error::InvalidDataset(vec![Violation::new(
                "services",
                "at least one service is required",
            )]));
        }
        check_unique("access ISP", isps.iter().map(|i| i.id.as_str()))?;
        let space = TypeSpace::build(&services, &csps, isps.len())?;
        Ok(Self {
            services,
            isps,
            csps,
            space,
        })
    }

    pub fn services(&self) -> &[ServiceSpec] {
        &self.services
    }

    pub fn isps(&self) -> &[AccessIsp] {
        &self.isps
    }

    pub fn csps(&self) -> &[ContentProvider] {
        &self.csps
    }

    pub fn space(&self) -> &TypeSpace {
        &self.space
    }

    pub fn isp_index(&self, id: &str) -> Result<usize> {
        self.isps
            .iter()
            .position(|i| i.id == id)
            .ok_or_else(|| Error::UnknownIsp(id.to_string()))
    }

    pub fn csp_index(&self, id: &str) -> Result<usize> {
        self.csps
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| Error::UnknownCsp(id.to_string()))
    }

    pub fn service_index(&self, id: &str) -> Result<usize> {
        self.services
            .iter()
            .position(|s| s.id == id)
            .ok_or_else(|| Error::UnknownService(id.to_string()))
    }

    /// True if `csp` has a positive share for `service`.
    pub fn offers(&self, csp: usize, service: usize) -> bool {
        self.space.option_of(service, Provider::Csp(csp)).is_some()
    }

    /// Services with a positive share at `csp`, in service order.
    pub fn offered_services(&self, csp: usize) -> Vec<usize> {
        (0..self.services.len())
            .filter(|&s| self.offers(csp, s))
            .collect()
    }

    pub fn provider_id(&self, provider: Provider) -> &str {
        match provider {
            Provider::Csp(idx) => &self.csps[idx].id,
            Provider::Unserved => NONE_PROVIDER,
        }
    }

    pub fn customer_type(&self, idx: usize) -> CustomerType {
        let providers = self
            .services
            .iter()
            .enumerate()
            .map(|(k, s)| {
                (
                    s.id.clone(),
                    self.provider_id(self.space.provider_of(idx, k)).to_string(),
                )
            })
            .collect();
        CustomerType {
            isp: self.isps[self.space.isp_of(idx)].id.clone(),
            preferred: self.services[self.space.preferred_of(idx)].id.clone(),
            providers,
        }
    }

    /// All customer types in the stable enumeration order.
    pub fn customer_types(&self) -> impl Iterator<Item = CustomerType> + '_ {
        (0..self.space.len()).map(|idx| self.customer_type(idx))
    }

    /// Initial distribution: every ISP gets the same type mix, with the
    /// service usage of each customer independent across services.
    pub fn initialize(&self) -> MarketState {
        let space = &self.space;
        let mut counts = vec![0.0; space.len()];
        for (idx, n) in counts.iter_mut().enumerate() {
            let isp = &self.isps[space.isp_of(idx)];
            let service = &self.services[space.preferred_of(idx)];
            *n = space.apportion(idx, isp.subscribers * service.importance_weight);
        }
        MarketState {
            counts,
            ledger: PeeringLedger::default(),
        }
    }
}

/// Customer counts over the type space plus the peering ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    pub(crate) counts: Vec<f64>,
    pub(crate) ledger: PeeringLedger,
}

impl MarketState {
    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn ledger(&self) -> &PeeringLedger {
        &self.ledger
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// `n(i)`: all customers of an ISP, by index.
    pub fn population(&self, market: &Market, isp: usize) -> f64 {
        let per = market.space.types_per_isp();
        self.counts[isp * per..(isp + 1) * per].iter().sum()
    }

    /// `n(i)_{ξ=x}`: customers of `isp` whose provider for `service` is `csp`.
    pub fn served_by(&self, market: &Market, isp: usize, csp: usize, service: usize) -> f64 {
        let space = &market.space;
        let target = Provider::Csp(csp);
        (0..space.service_count())
            .flat_map(|s| {
                let start = space.block_start(isp, s);
                start..start + space.provider_vectors()
            })
            .filter(|&idx| space.provider_of(idx, service) == target)
            .map(|idx| self.counts[idx])
            .sum()
    }

    /// Customers of `isp` who prefer `service` and get it from `csp`.
    pub fn preferring_served_by(
        &self,
        market: &Market,
        isp: usize,
        csp: usize,
        service: usize,
    ) -> f64 {
        let space = &market.space;
        let start = space.block_start(isp, service);
        let target = Provider::Csp(csp);
        (start..start + space.provider_vectors())
            .filter(|&idx| space.provider_of(idx, service) == target)
            .map(|idx| self.counts[idx])
            .sum()
    }

    /// Total number of customers whose most valued service is `service`.
    pub fn preferring(&self, market: &Market, service: usize) -> f64 {
        let space = &market.space;
        (0..space.isp_count())
            .map(|isp| {
                let start = space.block_start(isp, service);
                self.counts[start..start + space.provider_vectors()]
                    .iter()
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn count_of(&self, market: &Market, ty: &CustomerType) -> Result<f64> {
        let space = &market.space;
        let isp = market.isp_index(&ty.isp)?;
        let preferred = market.service_index(&ty.preferred)?;
        let mut idx = space.block_start(isp, preferred);
        for (k, service) in market.services.iter().enumerate() {
            let provider_id = ty
                .providers
                .get(&service.id)
                .ok_or_else(|| Error::UnknownService(service.id.clone()))?;
            let provider = if provider_id == NONE_PROVIDER {
                Provider::Unserved
            } else {
                Provider::Csp(market.csp_index(provider_id)?)
            };
            let option = space
                .option_of(k, provider)
                .ok_or_else(|| Error::ServiceNotOffered {
                    csp: provider_id.clone(),
                    service: service.id.clone(),
                })?;
            idx = space.with_option(idx, k, option);
        }
        Ok(self.counts[idx])
    }

    pub fn snapshot(&self, market: &Market) -> StateSnapshot {
        let counts = self
            .counts
            .iter()
            .enumerate()
            .map(|(idx, &n)| {
                let ty = market.customer_type(idx);
                TypeCount {
                    isp: ty.isp,
                    preferred: ty.preferred,
                    providers: ty.providers,
                    n,
                }
            })
            .collect();
        StateSnapshot {
            counts,
            ledger: self.ledger.entries(market),
        }
    }
}

/// `n(i)_{ξ=x}` by ids.
pub fn customers_of(
    market: &Market,
    state: &MarketState,
    isp: &str,
    csp: &str,
    service: &str,
) -> Result<f64> {
    Ok(state.served_by(
        market,
        market.isp_index(isp)?,
        market.csp_index(csp)?,
        market.service_index(service)?,
    ))
}

/// `n(i)` by id.
pub fn isp_population(market: &Market, state: &MarketState, isp: &str) -> Result<f64> {
    Ok(state.population(market, market.isp_index(isp)?))
}

/// JSON shape of a market state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub counts: Vec<TypeCount>,
    pub ledger: Vec<LedgerEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeCount {
    pub isp: String,
    pub preferred: String,
    pub providers: IndexMap<String, String>,
    pub n: f64,
}
