//! Market datasets: the built-in US parameterization, a small toy market,
//! JSON loading and validation, and the derivations behind some of the
//! built-in values.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::economics::{Accounting, CostModel, MONTHS_PER_QUARTER};
use crate::error::{Error, Result, Violation};
use crate::market::{
    AccessIsp, ContentProvider, Market, ServiceSpec, ServiceTerms, NONE_PROVIDER, SHARE_EPSILON,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const US2013: &str = "us2013";
pub const TOY: &str = "toy";
/// Environment variable naming an extra directory searched for dataset files.
pub const DATASET_DIR_ENV: &str = "PEERBARGAIN_DATASET_DIR";

/// Tolerance on the sum of importance weights.
const WEIGHT_EPSILON: f64 = 1e-9;

/// Linear churn-probability schedule.
///
/// `isp_churn_order[k]` gets `h = h_base - k·mu`; `csp_churn_order[k]` gets
/// `g = g_base - k·nu`. Aliased services copy another service's values.
/// Overrides are applied last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChurnSchedule {
    pub h_base: f64,
    pub mu: f64,
    pub g_base: f64,
    pub nu: f64,
    pub isp_churn_order: Vec<String>,
    pub csp_churn_order: Vec<String>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub aliases: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub overrides: IndexMap<String, ChurnOverride>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChurnOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChurnProbabilities {
    pub h: f64,
    pub g: f64,
}

/// Post-peering multipliers for one service. Without a traffic factor the
/// service's own post-peering traffic rate is kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Uplift {
    pub engagement_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoyaltyBounds {
    pub beta_low: f64,
    pub beta_high: f64,
    pub theta_low: f64,
    pub theta_high: f64,
}

impl Default for LoyaltyBounds {
    fn default() -> Self {
        Self {
            beta_low: 0.0,
            beta_high: 1.0,
            theta_low: 0.0,
            theta_high: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketDataset {
    pub schema_version: u32,
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub services: Vec<ServiceSpec>,
    pub isps: Vec<AccessIsp>,
    pub csps: Vec<ContentProvider>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub churn_schedule: Option<ChurnSchedule>,
    #[serde(default)]
    pub uplift_scenarios: IndexMap<String, IndexMap<String, Uplift>>,
    #[serde(default)]
    pub cost_model: CostModel,
    #[serde(default)]
    pub loyalty_bounds: LoyaltyBounds,
    #[serde(default)]
    pub accounting: Accounting,
    /// Source note per value group.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub provenance: IndexMap<String, String>,
}

impl MarketDataset {
    /// Builds the market model. Only structural problems are reported here;
    /// call [`MarketDataset::validate`] for the full rule set.
    pub fn market(&self) -> Result<Market> {
        Market::new(self.services.clone(), self.isps.clone(), self.csps.clone())
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    /// Validated market, failing with every violation found.
    pub fn checked_market(&self) -> Result<Market> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidDataset(violations));
        }
        self.market()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("dataset", &e))
    }

    /// Sets the post-peering engagement (and optionally traffic) of every
    /// service from the named uplift scenario.
    pub fn apply_uplift(&mut self, name: &str) -> Result<()> {
        let Some(uplift) = self.uplift_scenarios.get(name) else {
            return Err(Error::InvalidScenario(vec![Violation::new(
                "overrides.uplift",
                format!(
                    "unknown uplift scenario `{name}` (dataset has: {})",
                    self.uplift_scenarios
                        .keys()
                        .cloned()
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            )]));
        };
        for service in &mut self.services {
            let factors = uplift.get(&service.id).copied().unwrap_or(Uplift {
                engagement_factor: 1.0,
                traffic_factor: None,
            });
            service.post_engagement_min_per_day =
                service.engagement_min_per_day * factors.engagement_factor;
            if let Some(t) = factors.traffic_factor {
                service.post_traffic_mb_per_min = service.traffic_mb_per_min * t;
            }
        }
        Ok(())
    }
}

fn unit_interval(value: f64) -> bool {
    value.is_finite() && (0.0..=1.0).contains(&value)
}

fn non_negative(value: f64) -> bool {
    value.is_finite() && value >= 0.0
}

fn duplicates<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = HashSet::new();
    ids.filter(|id| !seen.insert(*id)).collect()
}

/// Every rule a dataset must satisfy. An empty list means the dataset is valid.
pub fn validate(ds: &MarketDataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |path: String, message: String| out.push(Violation::new(path, message));

    if ds.schema_version != SCHEMA_VERSION {
        push(
            "schema_version".into(),
            format!("unsupported version {} (expected {SCHEMA_VERSION})", ds.schema_version),
        );
    }
    if ds.id.trim().is_empty() {
        push("id".into(), "must not be empty".into());
    }
    if ds.services.is_empty() {
        push("services".into(), "at least one service is required".into());
    }
    if ds.isps.is_empty() {
        push("isps".into(), "at least one access ISP is required".into());
    }

    for id in duplicates(ds.services.iter().map(|s| s.id.as_str())) {
        push("services".into(), format!("duplicate service id `{id}`"));
    }
    for id in duplicates(ds.isps.iter().map(|s| s.id.as_str())) {
        push("isps".into(), format!("duplicate access ISP id `{id}`"));
    }
    for id in duplicates(ds.csps.iter().map(|s| s.id.as_str())) {
        push("csps".into(), format!("duplicate content provider id `{id}`"));
    }

    let service_ids: HashSet<&str> = ds.services.iter().map(|s| s.id.as_str()).collect();
    let mut weight_sum = 0.0;
    for (k, s) in ds.services.iter().enumerate() {
        let base = format!("services[{k}]");
        for (field, value) in [
            ("isp_churn_prob", s.isp_churn_prob),
            ("csp_churn_prob", s.csp_churn_prob),
            ("importance_weight", s.importance_weight),
        ] {
            if !unit_interval(value) {
                push(format!("{base}.{field}"), format!("must be in [0, 1], got {value}"));
            }
        }
        for (field, value) in [
            ("engagement_min_per_day", s.engagement_min_per_day),
            ("post_engagement_min_per_day", s.post_engagement_min_per_day),
            ("traffic_mb_per_min", s.traffic_mb_per_min),
            ("post_traffic_mb_per_min", s.post_traffic_mb_per_min),
            ("ad_rate_usd_per_min", s.ad_rate_usd_per_min),
            ("post_ad_rate_usd_per_min", s.post_ad_rate_usd_per_min),
            ("subscription_usd_per_month", s.subscription_usd_per_month),
            ("post_subscription_usd_per_month", s.post_subscription_usd_per_month),
        ] {
            if !non_negative(value) {
                push(format!("{base}.{field}"), format!("must be >= 0, got {value}"));
            }
        }
        weight_sum += s.importance_weight;
    }
    if !ds.services.is_empty() && (weight_sum - 1.0).abs() > WEIGHT_EPSILON {
        push(
            "services".into(),
            format!("importance weights sum to {weight_sum}, expected 1"),
        );
    }

    for (k, isp) in ds.isps.iter().enumerate() {
        let base = format!("isps[{k}]");
        if !non_negative(isp.subscribers) {
            push(format!("{base}.subscribers"), format!("must be >= 0, got {}", isp.subscribers));
        }
        if !unit_interval(isp.loyalty) {
            push(format!("{base}.loyalty"), format!("must be in [0, 1], got {}", isp.loyalty));
        }
        for (field, value) in [
            ("profit_per_customer_usd_per_month", isp.profit_per_customer_usd_per_month),
            ("post_profit_per_customer_usd_per_month", isp.post_profit_per_customer_usd_per_month),
        ] {
            if !value.is_finite() {
                push(format!("{base}.{field}"), "must be finite".into());
            }
        }
        if let Some(t) = isp.transit_unit_cost {
            if !non_negative(t) {
                push(format!("{base}.transit_unit_cost"), format!("must be >= 0, got {t}"));
            }
        }
    }

    let mut totals: IndexMap<&str, f64> = ds.services.iter().map(|s| (s.id.as_str(), 0.0)).collect();
    for (k, csp) in ds.csps.iter().enumerate() {
        let base = format!("csps[{k}]");
        if csp.id == NONE_PROVIDER {
            push(format!("{base}.id"), format!("`{NONE_PROVIDER}` is reserved"));
        }
        if !unit_interval(csp.loyalty) {
            push(format!("{base}.loyalty"), format!("must be in [0, 1], got {}", csp.loyalty));
        }
        if let Some(t) = csp.transit_unit_cost {
            if !non_negative(t) {
                push(format!("{base}.transit_unit_cost"), format!("must be >= 0, got {t}"));
            }
        }
        for (service, &share) in &csp.service_shares {
            let path = format!("{base}.service_shares.{service}");
            if !service_ids.contains(service.as_str()) {
                push(path.clone(), format!("unknown service `{service}`"));
            }
            if !unit_interval(share) {
                push(path, format!("must be in [0, 1], got {share}"));
            } else if let Some(t) = totals.get_mut(service.as_str()) {
                *t += share;
            }
        }
        for (service, terms) in &csp.service_terms {
            let path = format!("{base}.service_terms.{service}");
            if !service_ids.contains(service.as_str()) {
                push(path.clone(), format!("unknown service `{service}`"));
            }
            for (field, value) in [
                ("subscription_usd_per_month", terms.subscription_usd_per_month),
                ("ad_rate_usd_per_min", terms.ad_rate_usd_per_min),
            ] {
                if let Some(v) = value {
                    if !non_negative(v) {
                        push(format!("{path}.{field}"), format!("must be >= 0, got {v}"));
                    }
                }
            }
        }
    }
    for (service, total) in &totals {
        if *total > 1.0 + SHARE_EPSILON {
            push(
                format!("services.{service}"),
                format!("provider shares for `{service}` sum to {total}, above 1"),
            );
        }
        let used = ds.csps.iter().any(|c| c.share(service) > 0.0);
        if !used {
            push(
                format!("services.{service}"),
                format!("no content provider offers `{service}`"),
            );
        }
    }

    if let Some(schedule) = &ds.churn_schedule {
        let ids: Vec<String> = ds.services.iter().map(|s| s.id.clone()).collect();
        for (name, order) in [
            ("isp_churn_order", &schedule.isp_churn_order),
            ("csp_churn_order", &schedule.csp_churn_order),
        ] {
            for id in order {
                if !ids.contains(id) {
                    push(format!("churn_schedule.{name}"), format!("unknown service `{id}`"));
                }
            }
        }
        for (from, to) in &schedule.aliases {
            if !ids.contains(from) || !ids.contains(to) {
                push(
                    format!("churn_schedule.aliases.{from}"),
                    format!("alias `{from}` -> `{to}` names an unknown service"),
                );
            }
        }
        match churn_schedule_values(schedule, &ids) {
            Ok(values) => {
                for (k, s) in ds.services.iter().enumerate() {
                    let v = values[&s.id];
                    if (v.h - s.isp_churn_prob).abs() > 1e-12 {
                        push(
                            format!("services[{k}].isp_churn_prob"),
                            format!("{} differs from the churn schedule value {}", s.isp_churn_prob, v.h),
                        );
                    }
                    if (v.g - s.csp_churn_prob).abs() > 1e-12 {
                        push(
                            format!("services[{k}].csp_churn_prob"),
                            format!("{} differs from the churn schedule value {}", s.csp_churn_prob, v.g),
                        );
                    }
                }
            }
            Err(e) => {
                for v in e.violations() {
                    push(v.path.clone(), v.message.clone());
                }
            }
        }
    }

    for (name, scenario) in &ds.uplift_scenarios {
        for (service, uplift) in scenario {
            let path = format!("uplift_scenarios.{name}.{service}");
            if !service_ids.contains(service.as_str()) {
                push(path.clone(), format!("unknown service `{service}`"));
            }
            if !non_negative(uplift.engagement_factor) {
                push(format!("{path}.engagement_factor"), "must be >= 0".into());
            }
            if let Some(t) = uplift.traffic_factor {
                if !non_negative(t) {
                    push(format!("{path}.traffic_factor"), "must be >= 0".into());
                }
            }
        }
    }

    for v in ds.cost_model.validate("cost_model") {
        push(v.path, v.message);
    }

    let b = &ds.loyalty_bounds;
    for (field, value) in [
        ("beta_low", b.beta_low),
        ("beta_high", b.beta_high),
        ("theta_low", b.theta_low),
        ("theta_high", b.theta_high),
    ] {
        if !unit_interval(value) {
            push(format!("loyalty_bounds.{field}"), format!("must be in [0, 1], got {value}"));
        }
    }
    if b.beta_low > b.beta_high {
        push("loyalty_bounds".into(), "beta_low exceeds beta_high".into());
    }
    if b.theta_low > b.theta_high {
        push("loyalty_bounds".into(), "theta_low exceeds theta_high".into());
    }
    out
}

/// Evaluates the linear schedule for `services`, in that order.
pub fn churn_schedule_values(
    schedule: &ChurnSchedule,
    services: &[String],
) -> Result<IndexMap<String, ChurnProbabilities>> {
    let mut violations = Vec::new();
    let mut h: IndexMap<&str, f64> = IndexMap::new();
    let mut g: IndexMap<&str, f64> = IndexMap::new();
    for (k, id) in schedule.isp_churn_order.iter().enumerate() {
        h.insert(id, schedule.h_base - k as f64 * schedule.mu);
    }
    for (k, id) in schedule.csp_churn_order.iter().enumerate() {
        g.insert(id, schedule.g_base - k as f64 * schedule.nu);
    }
    let mut values = IndexMap::new();
    for id in services {
        let target = schedule.aliases.get(id).unwrap_or(id);
        let mut hv = h.get(target.as_str()).copied();
        let mut gv = g.get(target.as_str()).copied();
        if let Some(o) = schedule.overrides.get(id) {
            hv = o.h.or(hv);
            gv = o.g.or(gv);
        }
        match (hv, gv) {
            (Some(hv), Some(gv)) => {
                for (p, v) in [("h", hv), ("g", gv)] {
                    if !unit_interval(v) {
                        violations.push(Violation::new(
                            format!("churn_schedule.{id}"),
                            format!("generated {p} = {v} is outside [0, 1]"),
                        ));
                    }
                }
                values.insert(id.clone(), ChurnProbabilities { h: hv, g: gv });
            }
            _ => violations.push(Violation::new(
                format!("churn_schedule.{id}"),
                "service has no place in the schedule, no alias and no override",
            )),
        }
    }
    if violations.is_empty() {
        Ok(values)
    } else {
        Err(Error::InvalidDataset(violations))
    }
}

/// Monthly profit per broadband customer: price minus provisioning cost.
pub fn derive_isp_unit_profit(price_usd: f64, provisioning_cost_fraction: f64) -> f64 {
    price_usd * (1.0 - provisioning_cost_fraction)
}

/// Inputs to [`derive_ad_rates`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdRateInputs {
    /// Quarterly US profits of the ad-powered providers, USD.
    pub csp_quarterly_profits_usd: IndexMap<String, f64>,
    /// Fraction of the aggregate profit earned by each service.
    pub ad_format_split: IndexMap<String, f64>,
    pub engagement_min_per_day: IndexMap<String, f64>,
    /// Audience the per-minute profit is spread over.
    pub population: f64,
    pub days_per_month: f64,
}

/// Profit per engagement minute per service: aggregate quarterly profit to
/// monthly, split by ad format, over total monthly minutes of the audience.
pub fn derive_ad_rates(inputs: &AdRateInputs) -> Result<IndexMap<String, f64>> {
    let monthly: f64 =
        inputs.csp_quarterly_profits_usd.values().sum::<f64>() / MONTHS_PER_QUARTER;
    let mut rates = IndexMap::new();
    for (service, fraction) in &inputs.ad_format_split {
        let minutes = inputs
            .engagement_min_per_day
            .get(service)
            .copied()
            .ok_or_else(|| Error::UnknownService(service.clone()))?;
        let denominator = minutes * inputs.days_per_month * inputs.population;
        if !(denominator > 0.0 && denominator.is_finite()) {
            return Err(Error::InvalidDataset(vec![Violation::new(
                format!("engagement_min_per_day.{service}"),
                "engagement, days and population must be positive",
            )]));
        }
        rates.insert(service.clone(), monthly * fraction / denominator);
    }
    Ok(rates)
}

pub const COMCAST: &str = "Comcast";
pub const TIME_WARNER: &str = "Time Warner";
pub const CABLEVISION: &str = "Cablevision";
pub const GOOGLE: &str = "Google";
pub const NETFLIX: &str = "Netflix";

pub const USER_VIDEO: &str = "user_video";
pub const OSN: &str = "osn";
pub const SEARCH: &str = "search";
pub const GAMING: &str = "gaming";
pub const COMMERCIAL_VIDEO: &str = "commercial_video";

/// Ad-format split of the aggregate CSP profit.
pub const AD_FORMAT_SPLIT: [(&str, f64); 4] = [
    (SEARCH, 0.43),
    (USER_VIDEO, 0.07),
    (OSN, 0.22 * 0.8),
    (GAMING, 0.22 * 0.2),
];

/// Ad-rate derivation inputs for the US market. The audience is the
/// subscriber base of the two largest access ISPs, which reproduces the
/// embedded per-minute rates to within about one percent.
pub fn us2013_ad_rate_inputs() -> AdRateInputs {
    let profits = [
        (GOOGLE, 294.29),
        ("AOL", 2.42),
        ("Microsoft", 37.15),
        ("Yahoo", 23.39),
        ("Facebook", 68.02),
    ];
    AdRateInputs {
        csp_quarterly_profits_usd: profits
            .iter()
            .map(|(k, v)| (k.to_string(), v * 1.0e6))
            .collect(),
        ad_format_split: AD_FORMAT_SPLIT.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        engagement_min_per_day: [(USER_VIDEO, 11.8), (OSN, 15.2), (SEARCH, 6.72), (GAMING, 7.45)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect(),
        population: 19_025_000.0 + 11_306_000.0,
        days_per_month: 30.0,
    }
}

fn shares(pairs: &[(&str, f64)]) -> IndexMap<String, f64> {
    pairs
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|(k, v)| (k.to_string(), *v))
        .collect()
}

fn us_service(
    id: &str,
    churn: ChurnProbabilities,
    engagement: f64,
    traffic: f64,
    post_traffic_factor: f64,
    ad_rate: f64,
    subscription: f64,
    importance: f64,
) -> ServiceSpec {
    ServiceSpec {
        id: id.into(),
        isp_churn_prob: churn.h,
        csp_churn_prob: churn.g,
        engagement_min_per_day: engagement,
        post_engagement_min_per_day: engagement,
        traffic_mb_per_min: traffic,
        post_traffic_mb_per_min: traffic * post_traffic_factor,
        ad_rate_usd_per_min: ad_rate,
        post_ad_rate_usd_per_min: ad_rate,
        subscription_usd_per_month: subscription,
        post_subscription_usd_per_month: subscription,
        importance_weight: importance,
    }
}

fn us_churn_schedule() -> ChurnSchedule {
    ChurnSchedule {
        h_base: 0.4,
        mu: 0.1,
        g_base: 0.4,
        nu: 0.1,
        isp_churn_order: [GAMING, OSN, USER_VIDEO, SEARCH].map(String::from).to_vec(),
        csp_churn_order: [SEARCH, USER_VIDEO, OSN, GAMING].map(String::from).to_vec(),
        aliases: [(COMMERCIAL_VIDEO.to_string(), USER_VIDEO.to_string())]
            .into_iter()
            .collect(),
        overrides: IndexMap::new(),
    }
}

/// Default loyalties of the built-in dataset: the upper bounds.
pub const US_DEFAULT_BETA: f64 = 0.95;
pub const US_DEFAULT_THETA: f64 = 0.80;

/// Hulu Plus ad revenue per minute: a CPM of $27.61 with one impression
/// every two minutes of viewing.
pub const HULU_AD_RATE_USD_PER_MIN: f64 = 27.61 / 1000.0 / 2.0;

/// The US broadband and online-services market around 2013.
pub fn builtin_us_dataset() -> MarketDataset {
    let schedule = us_churn_schedule();
    let ids = [USER_VIDEO, OSN, SEARCH, GAMING, COMMERCIAL_VIDEO].map(String::from);
    let churn = churn_schedule_values(&schedule, &ids).expect("built-in schedule is valid");

    let services = vec![
        us_service(USER_VIDEO, churn[USER_VIDEO], 11.8, 7.5, 2.1, 0.00092, 0.0, 0.1469),
        us_service(OSN, churn[OSN], 15.2, 0.84, 1.0, 0.00181, 0.0, 0.1895),
        us_service(SEARCH, churn[SEARCH], 6.72, 0.054, 1.0, 0.01002, 0.0, 0.0836),
        us_service(GAMING, churn[GAMING], 7.45, 0.051, 1.0, 0.00092, 0.0, 0.0927),
        us_service(COMMERCIAL_VIDEO, churn[COMMERCIAL_VIDEO], 39.14, 22.5, 4.0, 0.0, 7.99, 0.4873),
    ];

    let unit_profit = derive_isp_unit_profit(20.0, 0.4645);
    let isp = |id: &str, subscribers: f64, passive: bool| AccessIsp {
        id: id.into(),
        subscribers,
        profit_per_customer_usd_per_month: unit_profit,
        post_profit_per_customer_usd_per_month: unit_profit,
        loyalty: US_DEFAULT_BETA,
        transit_unit_cost: None,
        passive,
    };
    let isps = vec![
        isp(COMCAST, 19_025_000.0, false),
        isp(TIME_WARNER, 11_306_000.0, false),
        isp("Cox", 4_590_000.0, false),
        isp("Charter", 3_917_000.0, false),
        isp(CABLEVISION, 3_060_000.0, false),
        isp("Others", 3_872_800.0, true),
    ];

    // Social network shares are rescaled so they sum to one.
    let osn_total = 0.296 + 0.0406 + 0.6895;
    let csp = |id: &str, s: IndexMap<String, f64>| ContentProvider {
        id: id.into(),
        loyalty: US_DEFAULT_THETA,
        service_shares: s,
        transit_unit_cost: None,
        service_terms: IndexMap::new(),
    };
    let ad_csp = |id: &str, video: f64, osn: f64, search: f64, gaming: f64| {
        csp(
            id,
            shares(&[
                (USER_VIDEO, video),
                (OSN, osn / osn_total),
                (SEARCH, search),
                (GAMING, gaming),
            ]),
        )
    };
    let mut amazon = csp("Amazon Prime", shares(&[(COMMERCIAL_VIDEO, 0.13)]));
    amazon.service_terms.insert(
        COMMERCIAL_VIDEO.into(),
        ServiceTerms {
            subscription_usd_per_month: Some(8.25),
            ad_rate_usd_per_min: None,
        },
    );
    let mut hulu = csp("Hulu Plus", shares(&[(COMMERCIAL_VIDEO, 0.06)]));
    hulu.service_terms.insert(
        COMMERCIAL_VIDEO.into(),
        ServiceTerms {
            subscription_usd_per_month: Some(7.99),
            ad_rate_usd_per_min: Some(HULU_AD_RATE_USD_PER_MIN),
        },
    );
    let csps = vec![
        ad_csp(GOOGLE, 0.3939, 0.296, 0.6916, 0.20),
        ad_csp("Microsoft", 0.0889, 0.0, 0.1885, 0.20),
        ad_csp("Yahoo", 0.1319, 0.0406, 0.1056, 0.20),
        ad_csp("Facebook", 0.2201, 0.6895, 0.0, 0.20),
        ad_csp("AOL", 0.1652, 0.0, 0.0143, 0.20),
        csp(NETFLIX, shares(&[(COMMERCIAL_VIDEO, 0.38)])),
        amazon,
        hulu,
    ];

    let uplift = |pairs: &[(&str, f64)], traffic: Option<f64>| -> IndexMap<String, Uplift> {
        pairs
            .iter()
            .map(|(k, v)| {
                (
                    k.to_string(),
                    Uplift {
                        engagement_factor: *v,
                        traffic_factor: traffic,
                    },
                )
            })
            .collect()
    };
    let all = |v: f64| ids.iter().map(|s| (s.as_str(), v)).collect::<Vec<_>>();
    let mut uplift_scenarios = IndexMap::new();
    uplift_scenarios.insert("none".to_string(), uplift(&all(1.0), Some(1.0)));
    uplift_scenarios.insert(
        "conservative".to_string(),
        uplift(&[(USER_VIDEO, 1.0748), (SEARCH, 1.002)], None),
    );
    uplift_scenarios.insert("optimistic".to_string(), uplift(&all(2.0), None));

    let provenance = [
        ("services.engagement_min_per_day", "daily minutes on YouTube, Facebook, Google search and online movies (statisticbrain, Netflix viewing time scaled by its 38% coverage)"),
        ("services.importance_weight", "share of daily engagement time per service category"),
        ("services.traffic_mb_per_min", "480p user video 7.5 MB/min, DVD-quality movies 22.5 MB/min, measured rates for the remaining services"),
        ("services.post_traffic_mb_per_min", "user video moves to 720p (x2.1), movies to HD (x4)"),
        ("services.ad_rate_usd_per_min", "profit per engagement minute derived from 2014-Q2 CSP net incomes and the IAB ad-format split"),
        ("services.churn", "linear schedule h=0.4, mu=0.1 and g=0.4, nu=0.1; commercial video copies user video"),
        ("services.commercial_video.subscription_usd_per_month", "Netflix monthly fee $7.99"),
        ("isps.subscribers", "Leichtman Research Group, US broadband subscribers Q3 2012"),
        ("isps.profit_per_customer_usd_per_month", "ITU average US broadband price $20.00 less 46.45% provisioning cost"),
        ("isps.Others.passive", "assumption: the residual bucket loses customers but never peers"),
        ("csps.service_shares", "comScore search and video rankings 2014, socialfresh OSN report (rescaled to sum to 1), uniform gaming split (assumption); Nielsen 2013 for subscription video"),
        ("csps.Amazon Prime.service_terms", "Prime membership $99/year = $8.25/month"),
        ("csps.Hulu Plus.service_terms", "assumption: $7.99/month plus a $27.61 CPM at one impression per two minutes"),
        ("cost_model", "transit $1000/Gbps/month (fiercewireless), IXP membership $2700/year and $14000/year per 10G port (ESpanix), CDN $4000/Gbps/month"),
        ("loyalty_bounds", "max/min market-share ratios 2009-13: Cablevision 0.77, Time Warner 0.95, AOL search 0.36, Microsoft video 0.80"),
        ("uplift_scenarios", "conservative: user video +7.48%, search +0.2% engagement; optimistic: engagement doubles"),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();

    MarketDataset {
        schema_version: SCHEMA_VERSION,
        id: US2013.into(),
        description: "US residential broadband and online services market, 2013".into(),
        services,
        isps,
        csps,
        churn_schedule: Some(schedule),
        uplift_scenarios,
        cost_model: CostModel::default(),
        loyalty_bounds: LoyaltyBounds {
            beta_low: 0.77,
            beta_high: 0.95,
            theta_low: 0.36,
            theta_high: 0.80,
        },
        accounting: Accounting::default(),
        provenance,
    }
}

/// Two ISPs, two CSPs, two services and 300 customers. Loyalties are zero
/// and the churn probabilities are 1/3 (ISP) and 1/2 (CSP).
pub fn toy_dataset() -> MarketDataset {
    let service = |id: &str, importance: f64, ad_rate: f64, traffic: f64| ServiceSpec {
        id: id.into(),
        isp_churn_prob: 1.0 / 3.0,
        csp_churn_prob: 0.5,
        engagement_min_per_day: 10.0,
        post_engagement_min_per_day: 20.0,
        traffic_mb_per_min: traffic,
        post_traffic_mb_per_min: traffic,
        ad_rate_usd_per_min: ad_rate,
        post_ad_rate_usd_per_min: ad_rate,
        subscription_usd_per_month: 0.0,
        post_subscription_usd_per_month: 0.0,
        importance_weight: importance,
    };
    let isp = |id: &str, subscribers: f64| AccessIsp {
        id: id.into(),
        subscribers,
        profit_per_customer_usd_per_month: 10.0,
        post_profit_per_customer_usd_per_month: 10.0,
        loyalty: 0.0,
        transit_unit_cost: None,
        passive: false,
    };
    let csp = |id: &str, search: f64, video: f64| ContentProvider {
        id: id.into(),
        loyalty: 0.0,
        service_shares: shares(&[("search", search), ("video", video)]),
        transit_unit_cost: None,
        service_terms: IndexMap::new(),
    };
    let mut uplift_scenarios = IndexMap::new();
    uplift_scenarios.insert(
        "none".to_string(),
        ["search", "video"]
            .iter()
            .map(|s| {
                (
                    s.to_string(),
                    Uplift {
                        engagement_factor: 1.0,
                        traffic_factor: Some(1.0),
                    },
                )
            })
            .collect(),
    );
    MarketDataset {
        schema_version: SCHEMA_VERSION,
        id: TOY.into(),
        description: "Two ISPs, two providers, two services, 300 customers".into(),
        services: vec![
            service("search", 0.75, 0.01, 0.05),
            service("video", 0.25, 0.001, 7.5),
        ],
        isps: vec![isp("ISP1", 120.0), isp("ISP2", 180.0)],
        csps: vec![
            csp("CSP1", 2.0 / 3.0, 2.0 / 5.0),
            csp("CSP2", 1.0 / 3.0, 3.0 / 5.0),
        ],
        churn_schedule: None,
        uplift_scenarios,
        cost_model: CostModel::default(),
        loyalty_bounds: LoyaltyBounds::default(),
        accounting: Accounting::default(),
        provenance: IndexMap::new(),
    }
}

/// Ids of the datasets compiled into the library.
pub fn builtin_ids() -> Vec<&'static str> {
    vec![US2013, TOY]
}

pub fn builtin(id: &str) -> Option<MarketDataset> {
    match id {
        US2013 => Some(builtin_us_dataset()),
        TOY => Some(toy_dataset()),
        _ => None,
    }
}

/// Reads and validates a dataset file.
pub fn load_dataset(path: &Path) -> Result<MarketDataset> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        context: format!("reading dataset {}", path.display()),
        source,
    })?;
    let ds = MarketDataset::from_json(&text).map_err(|e| match e {
        Error::Parse {
            line,
            column,
            message,
            ..
        } => Error::Parse {
            context: format!("dataset {}", path.display()),
            line,
            column,
            message,
        },
        other => other,
    })?;
    let violations = ds.validate();
    if violations.is_empty() {
        Ok(ds)
    } else {
        Err(Error::InvalidDataset(violations))
    }
}

fn candidate_paths(reference: &str) -> Vec<PathBuf> {
    let mut out = vec![PathBuf::from(reference)];
    if let Some(dir) = std::env::var_os(DATASET_DIR_ENV) {
        let dir = PathBuf::from(dir);
        out.push(dir.join(reference));
        out.push(dir.join(format!("{reference}.json")));
    }
    out
}

/// Resolves a dataset reference: a built-in id or a file path, also looked
/// up in the directory named by `PEERBARGAIN_DATASET_DIR`.
pub fn resolve_dataset(reference: &str) -> Result<MarketDataset> {
    if let Some(ds) = builtin(reference) {
        return Ok(ds);
    }
    for path in candidate_paths(reference) {
        if path.is_file() {
            return load_dataset(&path);
        }
    }
    Err(Error::InvalidScenario(vec![Violation::new(
        "dataset",
        format!(
            "`{reference}` is neither a built-in dataset ({}) nor a readable file",
            builtin_ids().join(", ")
        ),
    )]))
}
