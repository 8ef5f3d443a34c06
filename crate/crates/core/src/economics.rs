//! Bilateral profits before and after a premium peering, the Nash bargaining
//! settlement between the two parties, and conversion of the resulting
//! payment into a bandwidth price.
//!
//! All money is USD per month. Engagement and traffic are given per day and
//! scaled by [`CostModel::days_per_month`]. Traffic volumes are turned into
//! an average rate in Gbps (decimal megabytes, decimal gigabits).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::market::{Market, MarketState};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const BYTES_PER_MB: f64 = 1.0e6;
pub const MONTHS_PER_QUARTER: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    /// Transit price used when an ISP or CSP has no own value, USD/Gbps/month.
    pub transit_unit_cost_default: f64,
    /// IXP membership, USD/year, paid by each party.
    pub ixp_annual_membership: f64,
    /// USD/year per port.
    pub ixp_port_annual_fee: f64,
    pub ixp_port_capacity_gbps: f64,
    /// Provisioned capacity over average rate, used to size ports.
    pub headroom_factor: f64,
    /// In-network CDN price, USD/Gbps/month, borne by the access ISP.
    pub cdn_unit_cost: f64,
    #[serde(default)]
    pub cdn_enabled: bool,
    pub days_per_month: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            transit_unit_cost_default: 1000.0,
            ixp_annual_membership: 2700.0,
            ixp_port_annual_fee: 14_000.0,
            ixp_port_capacity_gbps: 10.0,
            headroom_factor: 1.0,
            cdn_unit_cost: 4000.0,
            cdn_enabled: false,
            days_per_month: 30.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self, path: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        let nonneg = [
            ("transit_unit_cost_default", self.transit_unit_cost_default),
            ("ixp_annual_membership", self.ixp_annual_membership),
            ("ixp_port_annual_fee", self.ixp_port_annual_fee),
            ("cdn_unit_cost", self.cdn_unit_cost),
        ];
        for (field, value) in nonneg {
            if !(value.is_finite() && value >= 0.0) {
                out.push(Violation::new(
                    format!("{path}.{field}"),
                    format!("must be a finite value >= 0, got {value}"),
                ));
            }
        }
        if !(self.ixp_port_capacity_gbps.is_finite() && self.ixp_port_capacity_gbps > 0.0) {
            out.push(Violation::new(
                format!("{path}.ixp_port_capacity_gbps"),
                "must be > 0",
            ));
        }
        if !(self.headroom_factor.is_finite() && self.headroom_factor >= 1.0) {
            out.push(Violation::new(
                format!("{path}.headroom_factor"),
                format!("must be >= 1, got {}", self.headroom_factor),
            ));
        }
        if !(self.days_per_month.is_finite() && self.days_per_month > 0.0) {
            out.push(Violation::new(format!("{path}.days_per_month"), "must be > 0"));
        }
        out
    }

    fn seconds_per_month(&self) -> f64 {
        self.days_per_month * SECONDS_PER_DAY
    }

    /// Average rate in Gbps of a daily volume given in MB.
    pub fn mb_per_day_to_gbps(&self, mb_per_day: f64) -> f64 {
        let bytes_per_month = mb_per_day * self.days_per_month * BYTES_PER_MB;
        bytes_per_month * 8.0 / (self.seconds_per_month() * 1.0e9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pre,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    AccessIsp,
    ContentProvider,
}

/// Which customers generate a CSP's revenue for service `ξ`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevenueBasis {
    /// Customers whose most valued service is `ξ` and who get it from the CSP.
    #[default]
    PreferredService,
    /// Every customer getting `ξ` from the CSP.
    AllUsers,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Accounting {
    #[serde(default)]
    pub revenue_basis: RevenueBasis,
    /// Scale the ISP's subscriber profit by the summed importance of the
    /// services in scope.
    #[serde(default)]
    pub isp_profit_attribution: bool,
}

/// The `(isp, csp)` pair and the services whose revenues and traffic count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bilateral {
    pub isp: usize,
    pub csp: usize,
    pub services: Vec<usize>,
}

fn check_scope(market: &Market, scope: &Bilateral) -> Result<()> {
    if scope.isp >= market.isps().len() {
        return Err(Error::UnknownIsp(scope.isp.to_string()));
    }
    if scope.csp >= market.csps().len() {
        return Err(Error::UnknownCsp(scope.csp.to_string()));
    }
    if let Some(&s) = scope.services.iter().find(|&&s| s >= market.services().len()) {
        return Err(Error::UnknownService(s.to_string()));
    }
    Ok(())
}

/// Average traffic between the pair, Gbps: `Σ φ(ξ)·τ(ξ)·n(i)_{ξ=x}`, with
/// post-peering rates and engagement for [`Phase::Post`].
pub fn bilateral_traffic_gbps(
    market: &Market,
    state: &MarketState,
    scope: &Bilateral,
    phase: Phase,
    cost: &CostModel,
) -> Result<f64> {
    check_scope(market, scope)?;
    let mb_per_day: f64 = scope
        .services
        .iter()
        .map(|&s| {
            let spec = &market.services()[s];
            let (rate, minutes) = match phase {
                Phase::Pre => (spec.traffic_mb_per_min, spec.engagement_min_per_day),
                Phase::Post => (spec.post_traffic_mb_per_min, spec.post_engagement_min_per_day),
            };
            rate * minutes * state.served_by(market, scope.isp, scope.csp, s)
        })
        .sum();
    Ok(cost.mb_per_day_to_gbps(mb_per_day))
}

pub fn transit_cost(traffic_gbps: f64, unit_cost: f64) -> f64 {
    traffic_gbps * unit_cost
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeeringCost {
    pub ports: u64,
    pub ixp_usd_per_month: f64,
    pub cdn_usd_per_month: f64,
    pub total_usd_per_month: f64,
}

/// Monthly cost of direct peering for one party. At least one port is always
/// provisioned. The CDN surcharge applies to the access ISP only.
pub fn peering_cost_breakdown(traffic_gbps: f64, cost: &CostModel, party: Party) -> PeeringCost {
    let needed = (traffic_gbps * cost.headroom_factor / cost.ixp_port_capacity_gbps).ceil();
    let ports = needed.max(1.0) as u64;
    let ixp = (cost.ixp_annual_membership + ports as f64 * cost.ixp_port_annual_fee) / 12.0;
    let cdn = if cost.cdn_enabled && party == Party::AccessIsp {
        cost.cdn_unit_cost * traffic_gbps
    } else {
        0.0
    };
    PeeringCost {
        ports,
        ixp_usd_per_month: ixp,
        cdn_usd_per_month: cdn,
        total_usd_per_month: ixp + cdn,
    }
}

pub fn peering_cost(traffic_gbps: f64, cost: &CostModel, party: Party) -> f64 {
    peering_cost_breakdown(traffic_gbps, cost, party).total_usd_per_month
}

fn isp_transit_unit(market: &Market, isp: usize, cost: &CostModel) -> f64 {
    market.isps()[isp]
        .transit_unit_cost
        .unwrap_or(cost.transit_unit_cost_default)
}

fn csp_transit_unit(market: &Market, csp: usize, cost: &CostModel) -> f64 {
    market.csps()[csp]
        .transit_unit_cost
        .unwrap_or(cost.transit_unit_cost_default)
}

/// Delivery cost for one party: transit before peering, peering after.
pub fn delivery_cost(
    market: &Market,
    state: &MarketState,
    scope: &Bilateral,
    phase: Phase,
    cost: &CostModel,
    party: Party,
) -> Result<f64> {
    let traffic = bilateral_traffic_gbps(market, state, scope, phase, cost)?;
    Ok(match phase {
        Phase::Pre => {
            let unit = match party {
                Party::AccessIsp => isp_transit_unit(market, scope.isp, cost),
                Party::ContentProvider => csp_transit_unit(market, scope.csp, cost),
            };
            transit_cost(traffic, unit)
        }
        Phase::Post => peering_cost(traffic, cost, party),
    })
}

/// Revenue per customer per month the CSP earns on one service.
pub fn revenue_per_customer(
    market: &Market,
    csp: usize,
    service: usize,
    phase: Phase,
    cost: &CostModel,
) -> f64 {
    let spec = &market.services()[service];
    let terms = market.csps()[csp].service_terms.get(&spec.id);
    let (subscription, ad_rate, minutes) = match phase {
        Phase::Pre => (
            spec.subscription_usd_per_month,
            spec.ad_rate_usd_per_min,
            spec.engagement_min_per_day,
        ),
        Phase::Post => (
            spec.post_subscription_usd_per_month,
            spec.post_ad_rate_usd_per_min,
            spec.post_engagement_min_per_day,
        ),
    };
    let subscription = terms
        .and_then(|t| t.subscription_usd_per_month)
        .unwrap_or(subscription);
    let ad_rate = terms.and_then(|t| t.ad_rate_usd_per_min).unwrap_or(ad_rate);
    subscription + ad_rate * minutes * cost.days_per_month
}

/// Customers counted towards the CSP's revenue for one service.
pub fn revenue_customers(
    market: &Market,
    state: &MarketState,
    scope: &Bilateral,
    service: usize,
    basis: RevenueBasis,
) -> f64 {
    match basis {
        RevenueBasis::PreferredService => {
            state.preferring_served_by(market, scope.isp, scope.csp, service)
        }
        RevenueBasis::AllUsers => state.served_by(market, scope.isp, scope.csp, service),
    }
}

pub fn csp_revenue(
    market: &Market,
    state: &MarketState,
    scope: &Bilateral,
    phase: Phase,
    cost: &CostModel,
    accounting: &Accounting,
) -> Result<f64> {
    check_scope(market, scope)?;
    Ok(scope
        .services
        .iter()
        .map(|&s| {
            revenue_per_customer(market, scope.csp, s, phase, cost)
                * revenue_customers(market, state, scope, s, accounting.revenue_basis)
        })
        .sum())
}

/// `V_x` (pre) or `V̂_x` (post) restricted to the pair and the services in scope.
pub fn csp_profit(
    market: &Market,
    state: &MarketState,
    scope: &Bilateral,
    phase: Phase,
    cost: &CostModel,
    accounting: &Accounting,
) -> Result<f64> {
    let revenue = csp_revenue(market, state, scope, phase, cost, accounting)?;
    let delivery = delivery_cost(market, state, scope, phase, cost, Party::ContentProvider)?;
    Ok(revenue - delivery)
}

pub fn isp_revenue(
    market: &Market,
    state: &MarketState,
    scope: &Bilateral,
    phase: Phase,
    accounting: &Accounting,
) -> Result<f64> {
    check_scope(market, scope)?;
    let isp = &market.isps()[scope.isp];
    let unit = match phase {
        Phase::Pre => isp.profit_per_customer_usd_per_month,
        Phase::Post => isp.post_profit_per_customer_usd_per_month,
    };
    let attribution = if accounting.isp_profit_attribution {
        scope
            .services
            .iter()
            .map(|&s| market.services()[s].importance_weight)
            .sum()
    } else {
        1.0
    };
    Ok(state.population(market, scope.isp) * unit * attribution)
}

/// `V_i = n(i)·u(i) − c_t(i)` (pre) or `V̂_i = n̂(i)·û(i) − c_p(i)` (post).
pub fn isp_profit(
    market: &Market,
    state: &MarketState,
    scope: &Bilateral,
    phase: Phase,
    cost: &CostModel,
    accounting: &Accounting,
) -> Result<f64> {
    let revenue = isp_revenue(market, state, scope, phase, accounting)?;
    let delivery = delivery_cost(market, state, scope, phase, cost, Party::AccessIsp)?;
    Ok(revenue - delivery)
}

/// Result of bilateral Nash bargaining over the peering surplus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BargainOutcome {
    pub v_isp_before_usd_per_month: f64,
    pub v_isp_after_usd_per_month: f64,
    pub v_csp_before_usd_per_month: f64,
    pub v_csp_after_usd_per_month: f64,
    pub surplus_usd_per_month: f64,
    /// Transfer from CSP to ISP; negative when the ISP pays the CSP.
    pub payment_usd_per_month: f64,
    /// Fair total profit of the ISP, `z_i`.
    pub fair_isp_profit_usd_per_month: f64,
    /// Fair total profit of the CSP, `z_x`.
    pub fair_csp_profit_usd_per_month: f64,
    pub deal: bool,
}

impl BargainOutcome {
    /// The same transfer seen from the ISP side.
    pub fn isp_payment_to_csp(&self) -> f64 {
        -self.payment_usd_per_month
    }

    pub fn isp_gain(&self) -> f64 {
        self.v_isp_after_usd_per_month - self.v_isp_before_usd_per_month
    }

    pub fn csp_gain(&self) -> f64 {
        self.v_csp_after_usd_per_month - self.v_csp_before_usd_per_month
    }
}

/// Splits the surplus `U = ΔV_i + ΔV_x` equally. The peering only happens
/// when `U >= 0`; otherwise no deal and no transfer.
pub fn nash_settlement(
    v_isp: f64,
    v_isp_after: f64,
    v_csp: f64,
    v_csp_after: f64,
) -> Result<BargainOutcome> {
    for (name, value) in [
        ("v_isp_before", v_isp),
        ("v_isp_after", v_isp_after),
        ("v_csp_before", v_csp),
        ("v_csp_after", v_csp_after),
    ] {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
    }
    let isp_gain = v_isp_after - v_isp;
    let csp_gain = v_csp_after - v_csp;
    let surplus = isp_gain + csp_gain;
    let deal = surplus >= 0.0;
    let (payment, fair_isp, fair_csp) = if deal {
        (
            0.5 * (csp_gain - isp_gain),
            v_isp + surplus / 2.0,
            v_csp + surplus / 2.0,
        )
    } else {
        (0.0, v_isp, v_csp)
    };
    Ok(BargainOutcome {
        v_isp_before_usd_per_month: v_isp,
        v_isp_after_usd_per_month: v_isp_after,
        v_csp_before_usd_per_month: v_csp,
        v_csp_after_usd_per_month: v_csp_after,
        surplus_usd_per_month: surplus,
        payment_usd_per_month: payment,
        fair_isp_profit_usd_per_month: fair_isp,
        fair_csp_profit_usd_per_month: fair_csp,
        deal,
    })
}

/// Payment per Gbps of extra traffic the peering induces.
pub fn bandwidth_price(payment_usd_per_month: f64, pre_gbps: f64, post_gbps: f64) -> Result<f64> {
    if !(post_gbps > pre_gbps) {
        return Err(Error::UndefinedPrice {
            pre_gbps,
            post_gbps,
        });
    }
    Ok(payment_usd_per_month / (post_gbps - pre_gbps))
}

/// Revenue, cost and profit of one party before and after the peering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartyAccounts {
    pub customers_before: f64,
    pub customers_after: f64,
    pub revenue_before_usd_per_month: f64,
    pub revenue_after_usd_per_month: f64,
    pub cost_before_usd_per_month: f64,
    pub cost_after_usd_per_month: f64,
    pub profit_before_usd_per_month: f64,
    pub profit_after_usd_per_month: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilateralAccounts {
    pub traffic_before_gbps: f64,
    pub traffic_after_gbps: f64,
    pub peering_ports: u64,
    pub isp: PartyAccounts,
    pub csp: PartyAccounts,
}

/// Computes both parties' accounts from the states immediately before and
/// after a peering and settles the surplus.
pub fn settle(
    market: &Market,
    before: &MarketState,
    after: &MarketState,
    scope: &Bilateral,
    cost: &CostModel,
    accounting: &Accounting,
) -> Result<(BilateralAccounts, BargainOutcome)> {
    check_scope(market, scope)?;
    let traffic_before = bilateral_traffic_gbps(market, before, scope, Phase::Pre, cost)?;
    let traffic_after = bilateral_traffic_gbps(market, after, scope, Phase::Post, cost)?;

    let isp = PartyAccounts {
        customers_before: before.population(market, scope.isp),
        customers_after: after.population(market, scope.isp),
        revenue_before_usd_per_month: isp_revenue(market, before, scope, Phase::Pre, accounting)?,
        revenue_after_usd_per_month: isp_revenue(market, after, scope, Phase::Post, accounting)?,
        cost_before_usd_per_month: transit_cost(
            traffic_before,
            isp_transit_unit(market, scope.isp, cost),
        ),
        cost_after_usd_per_month: peering_cost(traffic_after, cost, Party::AccessIsp),
        profit_before_usd_per_month: 0.0,
        profit_after_usd_per_month: 0.0,
    };
    let counted = |state: &MarketState| -> f64 {
        scope
            .services
            .iter()
            .map(|&s| revenue_customers(market, state, scope, s, accounting.revenue_basis))
            .sum()
    };
    let csp = PartyAccounts {
        customers_before: counted(before),
        customers_after: counted(after),
        revenue_before_usd_per_month: csp_revenue(market, before, scope, Phase::Pre, cost, accounting)?,
        revenue_after_usd_per_month: csp_revenue(market, after, scope, Phase::Post, cost, accounting)?,
        cost_before_usd_per_month: transit_cost(
            traffic_before,
            csp_transit_unit(market, scope.csp, cost),
        ),
        cost_after_usd_per_month: peering_cost(traffic_after, cost, Party::ContentProvider),
        profit_before_usd_per_month: 0.0,
        profit_after_usd_per_month: 0.0,
    };
    let finish = |mut p: PartyAccounts| {
        p.profit_before_usd_per_month = p.revenue_before_usd_per_month - p.cost_before_usd_per_month;
        p.profit_after_usd_per_month = p.revenue_after_usd_per_month - p.cost_after_usd_per_month;
        p
    };
    let isp = finish(isp);
    let csp = finish(csp);
    let outcome = nash_settlement(
        isp.profit_before_usd_per_month,
        isp.profit_after_usd_per_month,
        csp.profit_before_usd_per_month,
        csp.profit_after_usd_per_month,
    )?;
    let accounts = BilateralAccounts {
        traffic_before_gbps: traffic_before,
        traffic_after_gbps: traffic_after,
        peering_ports: peering_cost_breakdown(traffic_after, cost, Party::AccessIsp).ports,
        isp,
        csp,
    };
    Ok((accounts, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::toy_dataset;
    use crate::market::{AccessIsp, ContentProvider, ServiceSpec};

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
    }

    /// One ISP, one CSP with the whole market, one service.
    fn single_service_market(
        subscribers: f64,
        service: ServiceSpec,
        csp_terms: Option<(&str, crate::market::ServiceTerms)>,
    ) -> Market {
        let id = service.id.clone();
        let mut csp = ContentProvider {
            id: "X".into(),
            loyalty: 0.5,
            service_shares: [(id, 1.0)].into_iter().collect(),
            transit_unit_cost: None,
            service_terms: Default::default(),
        };
        if let Some((sid, terms)) = csp_terms {
            csp.service_terms.insert(sid.to_string(), terms);
        }
        Market::new(
            vec![service],
            vec![AccessIsp {
                id: "I".into(),
                subscribers,
                profit_per_customer_usd_per_month: 10.71,
                post_profit_per_customer_usd_per_month: 10.71,
                loyalty: 0.5,
                transit_unit_cost: None,
                passive: false,
            }],
            vec![csp],
        )
        .unwrap()
    }

    fn service(id: &str) -> ServiceSpec {
        ServiceSpec {
            id: id.into(),
            isp_churn_prob: 0.2,
            csp_churn_prob: 0.3,
            engagement_min_per_day: 11.8,
            post_engagement_min_per_day: 11.8,
            traffic_mb_per_min: 7.5,
            post_traffic_mb_per_min: 7.5,
            ad_rate_usd_per_min: 0.0,
            post_ad_rate_usd_per_min: 0.0,
            subscription_usd_per_month: 0.0,
            post_subscription_usd_per_month: 0.0,
            importance_weight: 1.0,
        }
    }

    fn scope() -> Bilateral {
        Bilateral {
            isp: 0,
            csp: 0,
            services: vec![0],
        }
    }

    #[test]
    fn traffic_of_one_million_video_users() {
        let market = single_service_market(1.0e6, service("video"), None);
        let state = market.initialize();
        let cost = CostModel::default();
        let gbps = bilateral_traffic_gbps(&market, &state, &scope(), Phase::Pre, &cost).unwrap();
        // 7.5 * 11.8 * 1e6 MB/day * 30 = 2.655e9 MB/month
        // 2.655e15 bytes * 8 / (30 * 86400 s) / 1e9
        let expected = 2.655e9 * 1.0e6 * 8.0 / (30.0 * 86_400.0) / 1.0e9;
        assert!(close(gbps, expected, 1e-12));
        assert!(close(gbps, 8.1944, 1e-4));
    }

    #[test]
    fn traffic_is_zero_without_customers() {
        let market = single_service_market(0.0, service("video"), None);
        let state = market.initialize();
        let gbps =
            bilateral_traffic_gbps(&market, &state, &scope(), Phase::Post, &CostModel::default())
                .unwrap();
        assert_eq!(gbps, 0.0);
    }

    #[test]
    fn uplifted_video_traffic_is_four_point_two_times() {
        let mut svc = service("video");
        svc.post_traffic_mb_per_min = 2.1 * svc.traffic_mb_per_min;
        svc.post_engagement_min_per_day = 2.0 * svc.engagement_min_per_day;
        let market = single_service_market(1.0e6, svc, None);
        let state = market.initialize();
        let cost = CostModel::default();
        let pre = bilateral_traffic_gbps(&market, &state, &scope(), Phase::Pre, &cost).unwrap();
        let post = bilateral_traffic_gbps(&market, &state, &scope(), Phase::Post, &cost).unwrap();
        assert!(close(post, 4.2 * pre, 1e-12));
    }

    #[test]
    fn transit_cost_is_linear() {
        assert!(close(transit_cost(8.196, 1000.0), 8196.0, 1e-12));
        assert_eq!(transit_cost(0.0, 1000.0), 0.0);
        assert_eq!(transit_cost(4.0, 900.0), 2.0 * transit_cost(2.0, 900.0));
    }

    #[test]
    fn peering_cost_examples() {
        let cost = CostModel::default();
        let zero = peering_cost(0.0, &cost, Party::AccessIsp);
        assert!(close(zero, 16_700.0 / 12.0, 1e-12));
        assert!(close(zero, 1391.67, 1e-5));
        assert!(close(peering_cost(25.0, &cost, Party::ContentProvider), 3725.0, 1e-12));

        let cdn = CostModel {
            cdn_enabled: true,
            ..CostModel::default()
        };
        let isp = peering_cost_breakdown(10.0, &cdn, Party::AccessIsp);
        assert_eq!(isp.ports, 1);
        assert!(close(isp.total_usd_per_month, 16_700.0 / 12.0 + 40_000.0, 1e-12));
        // the CDN is provisioned inside the access network
        assert!(close(
            peering_cost(10.0, &cdn, Party::ContentProvider),
            16_700.0 / 12.0,
            1e-12
        ));
    }

    #[test]
    fn peering_cost_uses_headroom() {
        let cost = CostModel {
            headroom_factor: 2.0,
            ..CostModel::default()
        };
        assert_eq!(peering_cost_breakdown(9.0, &cost, Party::AccessIsp).ports, 2);
    }

    #[test]
    fn ad_powered_revenue() {
        let mut svc = service("search");
        svc.ad_rate_usd_per_min = 0.01002;
        svc.engagement_min_per_day = 6.72;
        let market = single_service_market(1.0e6, svc, None);
        let state = market.initialize();
        let revenue = csp_revenue(
            &market,
            &state,
            &scope(),
            Phase::Pre,
            &CostModel::default(),
            &Accounting::default(),
        )
        .unwrap();
        assert!(close(revenue, 2_020_032.0, 1e-12));
    }

    #[test]
    fn subscription_revenue_and_provider_terms() {
        let mut svc = service("movies");
        svc.subscription_usd_per_month = 7.99;
        let market = single_service_market(1.0e6, svc.clone(), None);
        let state = market.initialize();
        let cost = CostModel::default();
        let revenue =
            csp_revenue(&market, &state, &scope(), Phase::Pre, &cost, &Accounting::default())
                .unwrap();
        assert!(close(revenue, 7_990_000.0, 1e-12));

        let terms = crate::market::ServiceTerms {
            subscription_usd_per_month: Some(8.25),
            ad_rate_usd_per_min: None,
        };
        let market = single_service_market(1.0e6, svc, Some(("movies", terms)));
        let revenue =
            csp_revenue(&market, &state, &scope(), Phase::Post, &cost, &Accounting::default())
                .unwrap();
        assert!(close(revenue, 8_250_000.0, 1e-12));
    }

    #[test]
    fn profit_without_customers_is_minus_cost() {
        let market = single_service_market(0.0, service("video"), None);
        let state = market.initialize();
        let cost = CostModel::default();
        let acc = Accounting::default();
        assert_eq!(
            csp_profit(&market, &state, &scope(), Phase::Pre, &cost, &acc).unwrap(),
            0.0
        );
        let post = csp_profit(&market, &state, &scope(), Phase::Post, &cost, &acc).unwrap();
        assert!(close(post, -16_700.0 / 12.0, 1e-12));
        let isp = isp_profit(&market, &state, &scope(), Phase::Post, &cost, &acc).unwrap();
        assert!(close(isp, -16_700.0 / 12.0, 1e-12));
    }

    #[test]
    fn isp_profit_of_comcast_sized_base() {
        let mut svc = service("video");
        svc.traffic_mb_per_min = 0.0;
        svc.post_traffic_mb_per_min = 0.0;
        let market = single_service_market(19_025_000.0, svc, None);
        let state = market.initialize();
        let acc = Accounting::default();
        let cost = CostModel::default();
        let v = isp_profit(&market, &state, &scope(), Phase::Pre, &cost, &acc).unwrap();
        assert!(close(v, 19_025_000.0 * 10.71, 1e-12));
        assert!(close(v, 203_757_750.0, 1e-9));
        // with u = û the post value only differs through n̂ and costs
        let post = isp_profit(&market, &state, &scope(), Phase::Post, &cost, &acc).unwrap();
        assert!(close(v - post, 16_700.0 / 12.0, 1e-9));
    }

    #[test]
    fn attribution_scales_isp_revenue() {
        let market = toy_dataset().market().unwrap();
        let state = market.initialize();
        let acc = Accounting {
            isp_profit_attribution: true,
            ..Accounting::default()
        };
        let search_only = Bilateral {
            isp: 0,
            csp: 0,
            services: vec![0],
        };
        let full = isp_revenue(&market, &state, &search_only, Phase::Pre, &Accounting::default())
            .unwrap();
        let scaled = isp_revenue(&market, &state, &search_only, Phase::Pre, &acc).unwrap();
        assert!(close(scaled, 0.75 * full, 1e-12));
    }

    #[test]
    fn revenue_basis_selects_customers() {
        let market = toy_dataset().market().unwrap();
        let state = market.initialize();
        let search = Bilateral {
            isp: 0,
            csp: 0,
            services: vec![0],
        };
        // CSP1 search at ISP1: 80 users, of which 60 prefer search
        assert_eq!(
            revenue_customers(&market, &state, &search, 0, RevenueBasis::AllUsers),
            80.0
        );
        assert_eq!(
            revenue_customers(&market, &state, &search, 0, RevenueBasis::PreferredService),
            60.0
        );
    }

    #[test]
    fn nash_examples() {
        let o = nash_settlement(0.0, 0.0, 0.0, 10.0).unwrap();
        assert_eq!(o.surplus_usd_per_month, 10.0);
        assert_eq!(o.payment_usd_per_month, 5.0);
        assert!(o.deal);

        let o = nash_settlement(100.0, 107.0, 3.0, 10.0).unwrap();
        assert_eq!(o.payment_usd_per_month, 0.0);

        let o = nash_settlement(0.0, 2.0, 0.0, -4.0).unwrap();
        assert_eq!(o.surplus_usd_per_month, -2.0);
        assert!(!o.deal);
        assert_eq!(o.payment_usd_per_month, 0.0);
    }

    #[test]
    fn nash_rejects_non_finite() {
        assert!(matches!(
            nash_settlement(f64::NAN, 0.0, 0.0, 0.0),
            Err(Error::NonFinite("v_isp_before"))
        ));
        assert!(nash_settlement(0.0, 0.0, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn bandwidth_price_examples() {
        assert_eq!(bandwidth_price(1000.0, 1.0, 3.0).unwrap(), 500.0);
        assert_eq!(bandwidth_price(0.0, 1.0, 3.0).unwrap(), 0.0);
        assert_eq!(bandwidth_price(-1000.0, 1.0, 3.0).unwrap(), -500.0);
        assert!(matches!(
            bandwidth_price(1000.0, 3.0, 3.0),
            Err(Error::UndefinedPrice { .. })
        ));
        assert!(bandwidth_price(1000.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn cost_model_validation() {
        assert!(CostModel::default().validate("cost_model").is_empty());
        let bad = CostModel {
            headroom_factor: 0.5,
            days_per_month: 0.0,
            cdn_unit_cost: -1.0,
            ..CostModel::default()
        };
        let v = bad.validate("cost_model");
        assert_eq!(v.len(), 3);
        assert!(v.iter().any(|v| v.path == "cost_model.headroom_factor"));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn peering_cost_is_monotone(a in 0.0f64..500.0, b in 0.0f64..500.0) {
                let cost = CostModel::default();
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(
                    peering_cost(lo, &cost, Party::AccessIsp) <= peering_cost(hi, &cost, Party::AccessIsp)
                );
            }

            #[test]
            fn settlement_splits_surplus_evenly(
                vi in -1e7f64..1e7, dvi in -1e6f64..1e6,
                vx in -1e7f64..1e7, dvx in -1e6f64..1e6,
            ) {
                let o = nash_settlement(vi, vi + dvi, vx, vx + dvx).unwrap();
                if o.deal {
                    let isp_net = o.v_isp_after_usd_per_month + o.payment_usd_per_month - vi;
                    let csp_net = o.v_csp_after_usd_per_month - o.payment_usd_per_month - vx;
                    prop_assert!((isp_net - csp_net).abs() <= 1e-6 * (1.0 + o.surplus_usd_per_month.abs()));
                } else {
                    prop_assert_eq!(o.payment_usd_per_month, 0.0);
                }
            }
        }
    }
}
