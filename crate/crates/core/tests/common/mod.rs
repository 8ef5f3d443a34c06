//! Shared helpers for the integration tests: a seeded random market
//! generator and an independent brute-force churn implementation.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use peerbargain::churn::PeeringEvent;
use peerbargain::market::{AccessIsp, ContentProvider, Market, MarketState, ServiceSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NONE: usize = usize::MAX;

pub fn service(id: &str, h: f64, g: f64, weight: f64) -> ServiceSpec {
    ServiceSpec {
        id: id.into(),
        isp_churn_prob: h,
        csp_churn_prob: g,
        engagement_min_per_day: 10.0,
        post_engagement_min_per_day: 20.0,
        traffic_mb_per_min: 1.0,
        post_traffic_mb_per_min: 2.0,
        ad_rate_usd_per_min: 0.001,
        post_ad_rate_usd_per_min: 0.001,
        subscription_usd_per_month: 0.0,
        post_subscription_usd_per_month: 0.0,
        importance_weight: weight,
    }
}

pub fn isp(id: &str, subscribers: f64, loyalty: f64) -> AccessIsp {
    AccessIsp {
        id: id.into(),
        subscribers,
        profit_per_customer_usd_per_month: 10.0,
        post_profit_per_customer_usd_per_month: 10.0,
        loyalty,
        transit_unit_cost: None,
        passive: false,
    }
}

pub fn csp(id: &str, loyalty: f64, shares: &[(&str, f64)]) -> ContentProvider {
    ContentProvider {
        id: id.into(),
        loyalty,
        service_shares: shares
            .iter()
            .filter(|(_, v)| *v > 0.0)
            .map(|(k, v)| (k.to_string(), *v))
            .collect(),
        transit_unit_cost: None,
        service_terms: Default::default(),
    }
}

/// A probability that is sometimes exactly 0 or 1.
fn prob(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random::<f64>(),
    }
}

/// A raw market description with up to `max` ISPs, CSPs and services.
#[derive(Debug, Clone)]
pub struct RandomMarket {
    pub services: Vec<ServiceSpec>,
    pub isps: Vec<AccessIsp>,
    pub csps: Vec<ContentProvider>,
}

impl RandomMarket {
    pub fn generate(seed: u64, max: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_isp = rng.random_range(1..=max);
        let n_csp = rng.random_range(1..=max);
        let n_svc = rng.random_range(1..=max);

        let raw: Vec<f64> = (0..n_svc).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let services: Vec<ServiceSpec> = raw
            .iter()
            .enumerate()
            .map(|(k, w)| service(&format!("s{k}"), prob(&mut rng), prob(&mut rng), w / total))
            .collect();

        let isps = (0..n_isp)
            .map(|i| isp(&format!("I{i}"), rng.random_range(1.0..1.0e6), prob(&mut rng)))
            .collect();

        let mut shares = vec![vec![0.0; n_svc]; n_csp];
        for k in 0..n_svc {
            let mut weights: Vec<f64> = (0..n_csp)
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
                .collect();
            if weights.iter().all(|&w| w == 0.0) {
                let x = rng.random_range(0..n_csp);
                weights[x] = 1.0;
            }
            let sum: f64 = weights.iter().sum();
            // Half the services leave some users unserved.
            let coverage = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.3..0.95) };
            for x in 0..n_csp {
                shares[x][k] = weights[x] / sum * coverage;
            }
        }
        let csps = (0..n_csp)
            .map(|x| {
                let pairs: Vec<(String, f64)> =
                    (0..n_svc).map(|k| (format!("s{k}"), shares[x][k])).collect();
                let refs: Vec<(&str, f64)> = pairs.iter().map(|(k, v)| (k.as_str(), *v)).collect();
                csp(&format!("X{x}"), prob(&mut rng), &refs)
            })
            .collect();
        Self {
            services,
            isps,
            csps,
        }
    }

    pub fn market(&self) -> Market {
        Market::new(self.services.clone(), self.isps.clone(), self.csps.clone())
            .expect("generated market is valid")
    }

    /// A random event sequence that may repeat pairs and services.
    pub fn events(&self, seed: u64, max_len: usize) -> Vec<PeeringEvent> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let len = rng.random_range(1..=max_len);
        (0..len)
            .map(|_| {
                let i = rng.random_range(0..self.isps.len());
                let x = rng.random_range(0..self.csps.len());
                let offered: Vec<&String> = self.csps[x].service_shares.keys().collect();
                let chosen: Vec<String> = offered
                    .iter()
                    .filter(|_| rng.random_bool(0.6))
                    .map(|s| s.to_string())
                    .collect();
                let event = PeeringEvent::new(&self.isps[i].id, &self.csps[x].id);
                if chosen.is_empty() {
                    event
                } else {
                    event.with_services(chosen)
                }
            })
            .collect()
    }
}

/// Type key: (isp, preferred service, provider per service; `NONE` for the
/// unserved remainder).
pub type Key = (usize, usize, Vec<usize>);

/// Rule-by-rule churn over an explicit map of every customer type.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub raw: RandomMarket,
    pub counts: BTreeMap<Key, f64>,
    pub ledger: BTreeSet<(usize, usize, usize)>,
}

impl Oracle {
    pub fn new(raw: &RandomMarket) -> Self {
        // Options per service: providers with a positive share in CSP order,
        // then the unserved remainder when it exceeds 1e-9.
        let mut options: Vec<Vec<(usize, f64)>> = Vec::new();
        for s in &raw.services {
            let mut opts = Vec::new();
            let mut total = 0.0;
            for (x, c) in raw.csps.iter().enumerate() {
                let share = c.service_shares.get(&s.id).copied().unwrap_or(0.0);
                if share > 0.0 {
                    opts.push((x, share));
                    total += share;
                }
            }
            if 1.0 - total > 1e-9 {
                opts.push((NONE, 1.0 - total));
            }
            options.push(opts);
        }
        let mut vectors: Vec<(Vec<usize>, Vec<f64>)> = vec![(Vec::new(), Vec::new())];
        for opts in &options {
            let mut next = Vec::new();
            for (v, p) in &vectors {
                for &(x, share) in opts {
                    let (mut v, mut p) = (v.clone(), p.clone());
                    v.push(x);
                    p.push(share);
                    next.push((v, p));
                }
            }
            vectors = next;
        }
        // N = n(i) * importance(s) * share(T_1) * ... * share(T_K), left to right.
        let mut counts = BTreeMap::new();
        for (i, isp) in raw.isps.iter().enumerate() {
            for (s, svc) in raw.services.iter().enumerate() {
                for (v, p) in &vectors {
                    let n = p.iter().fold(isp.subscribers * svc.importance_weight, |a, b| a * b);
                    counts.insert((i, s, v.clone()), n);
                }
            }
        }
        Self {
            raw: raw.clone(),
            counts,
            ledger: BTreeSet::new(),
        }
    }

    fn resolve(&self, event: &PeeringEvent) -> (usize, usize, Vec<usize>) {
        let j = self.raw.isps.iter().position(|i| i.id == event.isp).unwrap();
        let x = self.raw.csps.iter().position(|c| c.id == event.csp).unwrap();
        let mut services: Vec<usize> = if event.services.is_empty() {
            (0..self.raw.services.len())
                .filter(|&s| self.raw.csps[x].service_shares.contains_key(&self.raw.services[s].id))
                .collect()
        } else {
            event
                .services
                .iter()
                .map(|id| self.raw.services.iter().position(|s| &s.id == id).unwrap())
                .collect()
        };
        services.sort_unstable();
        services.dedup();
        (j, x, services)
    }

    fn apply(&mut self, moves: Vec<(Key, Key, f64)>) {
        for (from, to, amount) in moves {
            *self.counts.get_mut(&from).unwrap() -= amount;
            *self.counts.get_mut(&to).unwrap() += amount;
        }
    }

    pub fn establish(&mut self, event: &PeeringEvent) {
        let (j, x, services) = self.resolve(event);
        let fresh: Vec<usize> = services
            .into_iter()
            .filter(|&s| !self.ledger.contains(&(j, x, s)))
            .collect();
        if fresh.is_empty() {
            return;
        }

        // Phase 1: customers of every other ISP whose preferred service is
        // peered and who get it from x move to j, unless their ISP already
        // has premium peering with x for it. Rates are formed first, as the
        // engine does, so the two agree bit for bit.
        let mut moves = Vec::new();
        for i in 0..self.raw.isps.len() {
            if i == j {
                continue;
            }
            for &s in &fresh {
                if self.ledger.contains(&(i, x, s)) {
                    continue;
                }
                let rate = (1.0 - self.raw.isps[i].loyalty) * self.raw.services[s].isp_churn_prob;
                for (key, &n) in &self.counts {
                    if key.0 == i && key.1 == s && key.2[s] == x {
                        let to = (j, s, key.2.clone());
                        moves.push((key.clone(), to, n * rate));
                    }
                }
            }
        }
        self.apply(moves);

        // Phase 2, on the post-phase-1 counts: inside j, customers getting
        // their preferred service from another real provider without premium
        // peering at j switch to x.
        let mut moves = Vec::new();
        for &s in &fresh {
            let g = self.raw.services[s].csp_churn_prob;
            for (key, &n) in &self.counts {
                let c = key.2[s];
                if key.0 != j || key.1 != s || c == x || c == NONE {
                    continue;
                }
                if self.ledger.contains(&(j, c, s)) {
                    continue;
                }
                let rate = (1.0 - self.raw.csps[c].loyalty) * g;
                let mut providers = key.2.clone();
                providers[s] = x;
                moves.push((key.clone(), (j, s, providers), n * rate));
            }
        }
        self.apply(moves);

        for s in fresh {
            self.ledger.insert((j, x, s));
        }
    }

    /// Maps an engine state onto oracle keys.
    pub fn keyed(&self, market: &Market, state: &MarketState) -> BTreeMap<Key, f64> {
        let snap = state.snapshot(market);
        snap.counts
            .iter()
            .map(|tc| {
                let i = self.raw.isps.iter().position(|x| x.id == tc.isp).unwrap();
                let s = self.raw.services.iter().position(|x| x.id == tc.preferred).unwrap();
                let v = self
                    .raw
                    .services
                    .iter()
                    .map(|svc| {
                        let p = &tc.providers[&svc.id];
                        self.raw.csps.iter().position(|c| &c.id == p).unwrap_or(NONE)
                    })
                    .collect();
                ((i, s, v), tc.n)
            })
            .collect()
    }
}

/// Relative closeness with an absolute floor for values near zero.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// The shipped scenario specs, at the repository root.
pub fn scenario_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn scenario(name: &str) -> peerbargain::scenario::ScenarioSpec {
    let path = scenario_dir().join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    peerbargain::scenario::ScenarioSpec::from_json(&text).unwrap()
}

/// Every shipped spec file, sorted by name.
pub fn scenario_files() -> Vec<std::path::PathBuf> {
    let mut files: Vec<_> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files
}

/// True when `value` is within a factor of `factor` of `target`.
pub fn within_factor(value: f64, target: f64, factor: f64) -> bool {
    value > 0.0 && target > 0.0 && value <= target * factor && value >= target / factor
}
