use peerbargain::economics::{bandwidth_price, nash_settlement};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Profits spanning several orders of magnitude, either sign.
fn profit(rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = 10f64.powf(rng.random_range(0.0..9.0));
    if rng.random_bool(0.8) {
        magnitude
    } else {
        -magnitude
    }
}

fn near(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

#[test]
fn identities_hold_on_ten_thousand_tuples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut deals = 0;
    for _ in 0..10_000 {
        let (vi, vi2, vx, vx2) = (profit(&mut rng), profit(&mut rng), profit(&mut rng), profit(&mut rng));
        let scale = [vi, vi2, vx, vx2].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let o = nash_settlement(vi, vi2, vx, vx2).unwrap();

        // Oracle: the surplus splits evenly, the transfer closes the gap.
        let u = (vi2 - vi) + (vx2 - vx);
        assert!(near(o.surplus_usd_per_month, u, scale));
        assert_eq!(o.deal, u >= 0.0);
        if o.deal {
            deals += 1;
            let (zi, zx) = (o.fair_isp_profit_usd_per_month, o.fair_csp_profit_usd_per_month);
            assert!(near(zi + zx, vi + vx + u, scale));
            assert!(near(zi - vi, zx - vx, scale));
            assert!(zi >= vi - 1e-9 * scale && zx >= vx - 1e-9 * scale);
            let w = o.payment_usd_per_month;
            assert!(near(w, ((vx2 - vx) - (vi2 - vi)) / 2.0, scale));
            assert!(near(vi2 + w, zi, scale));
            assert!(near(vx2 - w, zx, scale));
        } else {
            assert_eq!(o.payment_usd_per_month, 0.0);
            assert_eq!(o.fair_isp_profit_usd_per_month, vi);
            assert_eq!(o.fair_csp_profit_usd_per_month, vx);
        }

        // Swapping the roles flips the transfer.
        let swapped = nash_settlement(vx, vx2, vi, vi2).unwrap();
        assert!(near(swapped.payment_usd_per_month, -o.payment_usd_per_month, scale));

        // Shifting a party's profits by a constant changes nothing.
        let (ci, cx) = (profit(&mut rng), profit(&mut rng));
        let shifted = nash_settlement(vi + ci, vi2 + ci, vx + cx, vx2 + cx).unwrap();
        let s2 = scale + ci.abs() + cx.abs();
        if (u.abs()) > 1e-6 * s2 {
            assert_eq!(shifted.deal, o.deal);
            assert!(near(shifted.payment_usd_per_month, o.payment_usd_per_month, s2));
        }
    }
    assert!(deals > 1000 && deals < 9000, "both branches exercised: {deals}");
}

#[test]
fn non_finite_inputs_are_rejected() {
    assert!(nash_settlement(f64::NAN, 0.0, 0.0, 0.0).is_err());
    assert!(nash_settlement(0.0, f64::INFINITY, 0.0, 0.0).is_err());
}

#[test]
fn price_is_payment_over_extra_traffic() {
    assert_eq!(bandwidth_price(1000.0, 2.0, 4.0).unwrap(), 500.0);
    assert!(bandwidth_price(1000.0, 4.0, 4.0).is_err());
    assert!(bandwidth_price(1000.0, 5.0, 4.0).is_err());
}

proptest! {
    #[test]
    fn prop_zero_gains_mean_zero_transfer(vi in -1e9f64..1e9, vx in -1e9f64..1e9) {
        let o = nash_settlement(vi, vi, vx, vx).unwrap();
        prop_assert!(o.deal);
        prop_assert_eq!(o.payment_usd_per_month, 0.0);
    }

    #[test]
    fn prop_net_gains_equal(
        vi in -1e8f64..1e8, di in -1e6f64..1e6,
        vx in -1e8f64..1e8, dx in -1e6f64..1e6,
    ) {
        let o = nash_settlement(vi, vi + di, vx, vx + dx).unwrap();
        if o.deal {
            let gi = o.fair_isp_profit_usd_per_month - vi;
            let gx = o.fair_csp_profit_usd_per_month - vx;
            prop_assert!((gi - gx).abs() <= 1e-9 * (vi.abs() + vx.abs()).max(1.0));
            prop_assert!(gi >= -1e-9 * vi.abs().max(1.0));
        }
    }

    #[test]
    fn prop_price_scales_with_payment(w in -1e7f64..1e7, pre in 0.0f64..1e3, extra in 1e-3f64..1e3) {
        let p = bandwidth_price(w, pre, pre + extra).unwrap();
        let p2 = bandwidth_price(2.0 * w, pre, pre + extra).unwrap();
        prop_assert!((p2 - 2.0 * p).abs() <= 1e-9 * p.abs().max(1.0));
    }
}
