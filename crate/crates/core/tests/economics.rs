mod common;

use common::{csp, isp, service};
use peerbargain::dataset::derive_isp_unit_profit;
use peerbargain::economics::{
    bilateral_traffic_gbps, csp_revenue, isp_profit, peering_cost, peering_cost_breakdown,
    transit_cost, Accounting, Bilateral, CostModel, Party, Phase,
};
use peerbargain::market::{Market, ServiceSpec};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-12)
}

/// One ISP, one CSP serving everyone, one service.
fn single(svc: ServiceSpec, subscribers: f64) -> Market {
    let id = svc.id.clone();
    Market::new(
        vec![svc],
        vec![isp("I", subscribers, 1.0)],
        vec![csp("X", 1.0, &[(&id, 1.0)])],
    )
    .unwrap()
}

fn scope() -> Bilateral {
    Bilateral {
        isp: 0,
        csp: 0,
        services: vec![0],
    }
}

#[test]
fn traffic_in_average_gbps() {
    let mut svc = service("video", 0.0, 0.0, 1.0);
    svc.traffic_mb_per_min = 7.5;
    svc.engagement_min_per_day = 11.8;
    svc.post_traffic_mb_per_min = 7.5 * 2.1;
    svc.post_engagement_min_per_day = 11.8 * 2.0;
    let market = single(svc, 1.0e6);
    let state = market.initialize();
    let cost = CostModel::default();

    // 7.5 MB x 11.8 min x 1e6 users x 30 days, in bits over the month's seconds.
    let mb_per_month = 7.5 * 11.8 * 1.0e6 * 30.0;
    assert!(close(mb_per_month, 2_655_000_000.0, 1e-12));
    let expected = mb_per_month * 1.0e6 * 8.0 / (30.0 * 86_400.0) / 1.0e9;
    let pre = bilateral_traffic_gbps(&market, &state, &scope(), Phase::Pre, &cost).unwrap();
    assert!(close(pre, expected, 1e-12));
    assert!((pre - 8.196).abs() < 0.002);

    let post = bilateral_traffic_gbps(&market, &state, &scope(), Phase::Post, &cost).unwrap();
    assert!(close(post / pre, 4.2, 1e-12));

    assert!(close(transit_cost(pre, 1000.0), expected * 1000.0, 1e-12));
    assert!(close(transit_cost(8.196, 1000.0), 8196.0, 1e-12));
}

#[test]
fn peering_cost_arithmetic() {
    let cost = CostModel::default();
    assert!(close(peering_cost(0.0, &cost, Party::AccessIsp), (2700.0 + 14000.0) / 12.0, 1e-12));
    let b = peering_cost_breakdown(25.0, &cost, Party::ContentProvider);
    assert_eq!(b.ports, 3);
    assert!(close(b.total_usd_per_month, 3725.0, 1e-12));

    let cdn = CostModel {
        cdn_enabled: true,
        ..CostModel::default()
    };
    let isp_side = peering_cost(10.0, &cdn, Party::AccessIsp);
    let csp_side = peering_cost(10.0, &cdn, Party::ContentProvider);
    assert!(close(isp_side, (2700.0 + 14000.0) / 12.0 + 40_000.0, 1e-12));
    assert!(close(csp_side, (2700.0 + 14000.0) / 12.0, 1e-12));
}

#[test]
fn csp_revenue_arithmetic() {
    let cost = CostModel::default();
    let accounting = Accounting::default();

    let mut search = service("search", 0.0, 0.0, 1.0);
    search.ad_rate_usd_per_min = 0.01002;
    search.engagement_min_per_day = 6.72;
    let market = single(search, 1.0e6);
    let state = market.initialize();
    let r = csp_revenue(&market, &state, &scope(), Phase::Pre, &cost, &accounting).unwrap();
    assert!(close(r, 0.01002 * 6.72 * 30.0 * 1.0e6, 1e-12));
    assert!(close(r, 2_020_032.0, 1e-9));

    let mut movies = service("movies", 0.0, 0.0, 1.0);
    movies.ad_rate_usd_per_min = 0.0;
    movies.subscription_usd_per_month = 7.99;
    let market = single(movies, 1.0e6);
    let state = market.initialize();
    let r = csp_revenue(&market, &state, &scope(), Phase::Pre, &cost, &accounting).unwrap();
    assert!(close(r, 7_990_000.0, 1e-12));
}

#[test]
fn isp_profit_arithmetic() {
    let u = derive_isp_unit_profit(20.0, 0.4645);
    assert!(close(u, 20.0 * (1.0 - 0.4645), 1e-12));
    assert!(close(u, 10.71, 1e-12));

    let mut svc = service("search", 0.0, 0.0, 1.0);
    svc.traffic_mb_per_min = 0.0;
    let mut market_isp = isp("Comcast", 19_025_000.0, 1.0);
    market_isp.profit_per_customer_usd_per_month = u;
    let market = Market::new(
        vec![svc],
        vec![market_isp],
        vec![csp("X", 1.0, &[("search", 1.0)])],
    )
    .unwrap();
    let state = market.initialize();
    let v = isp_profit(
        &market,
        &state,
        &scope(),
        Phase::Pre,
        &CostModel::default(),
        &Accounting::default(),
    )
    .unwrap();
    // Zero traffic, so zero transit.
    assert!(close(v, 203_757_750.0, 1e-12));
}
