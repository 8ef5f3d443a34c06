//! Rendering of scenario results as JSON, CSV or Markdown.
//!
//! JSON is pretty-printed with a trailing newline and is the exact byte
//! stream served by the HTTP API. CSV has a single header row followed by
//! one row per table cell. Markdown tables put money in millions of USD per
//! month and bandwidth prices in thousands of USD per Gbps per month.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{
    pair_comparison, price_table, run, sweep, timing_experiment, ComparisonResult, PriceTable,
    RunResult, ScenarioSpec, SweepResult, TimingResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Markdown,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(Error::UnknownFormat(s.into())),
        }
    }
}

/// Tabular renderings of a result.
pub trait Tabular {
    fn header(&self) -> Vec<String>;
    fn records(&self) -> Vec<Vec<String>>;
    fn markdown(&self) -> String;
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn to_csv(header: Vec<String>, records: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io {
        context: "writing csv".into(),
        source: std::io::Error::other(e),
    };
    w.write_record(&header).map_err(io)?;
    for r in records {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        context: "writing csv".into(),
        source: std::io::Error::other(e.to_string()),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit_report<T: Serialize + Tabular>(result: &T, format: Format) -> Result<String> {
    match format {
        Format::Json => to_json(result),
        Format::Csv => to_csv(result.header(), result.records()),
        Format::Markdown => Ok(result.markdown()),
    }
}

/// The experiments a scenario spec can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Run,
    Sweep,
    PriceTable,
    Timing,
    Compare,
}

/// Runs `experiment` on `spec` and renders the result. The CLI and the HTTP
/// API both go through here, which is what keeps their outputs identical.
pub fn execute(experiment: Experiment, spec: &ScenarioSpec, format: Format) -> Result<String> {
    match experiment {
        Experiment::Run => emit_report(&run(spec)?, format),
        Experiment::Sweep => emit_report(&sweep(spec)?, format),
        Experiment::PriceTable => emit_report(&price_table(spec)?, format),
        Experiment::Timing => emit_report(&timing_experiment(spec)?, format),
        Experiment::Compare => emit_report(&pair_comparison(spec)?, format),
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn musd(x: f64) -> String {
    format!("{:.4}", x / 1.0e6)
}

fn kusd(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.2}", v / 1.0e3),
        None => "n/a".into(),
    }
}

fn table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(
        out,
        "|{}|",
        header.iter().map(|_| "---").collect::<Vec<_>>().join("|")
    );
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Tabular for RunResult {
    fn header(&self) -> Vec<String> {
        strings(&[
            "scope",
            "payment_usd_per_month",
            "surplus_usd_per_month",
            "deal",
            "traffic_before_gbps",
            "traffic_after_gbps",
            "bandwidth_price_usd_per_gbps_per_month",
        ])
    }

    fn records(&self) -> Vec<Vec<String>> {
        let mut rows = vec![vec![
            "all".to_string(),
            num(self.outcome.payment_usd_per_month),
            num(self.outcome.surplus_usd_per_month),
            self.outcome.deal.to_string(),
            num(self.accounts.traffic_before_gbps),
            num(self.accounts.traffic_after_gbps),
            opt(self.bandwidth_price_usd_per_gbps_per_month),
        ]];
        for s in &self.per_service {
            rows.push(vec![
                s.service.clone(),
                num(s.payment_usd_per_month),
                num(s.surplus_usd_per_month),
                s.deal.to_string(),
                num(s.traffic_before_gbps),
                num(s.traffic_after_gbps),
                opt(s.bandwidth_price_usd_per_gbps_per_month),
            ]);
        }
        rows
    }

    fn markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "## {}: {} and {} ({})\n",
            self.scenario,
            self.focal.isp,
            self.focal.csp,
            self.focal.services.join(", ")
        );
        let o = &self.outcome;
        let direction = if !o.deal {
            "no deal"
        } else if o.payment_usd_per_month > 0.0 {
            "CSP pays ISP"
        } else if o.payment_usd_per_month < 0.0 {
            "ISP pays CSP"
        } else {
            "no transfer"
        };
        table(
            &mut out,
            &strings(&["", "ISP", "CSP"]),
            &[
                vec![
                    "profit before (M$/month)".into(),
                    musd(o.v_isp_before_usd_per_month),
                    musd(o.v_csp_before_usd_per_month),
                ],
                vec![
                    "profit after (M$/month)".into(),
                    musd(o.v_isp_after_usd_per_month),
                    musd(o.v_csp_after_usd_per_month),
                ],
            ],
        );
        let _ = writeln!(
            out,
            "\nSurplus {} M$/month, payment {} M$/month ({direction}).\n",
            musd(o.surplus_usd_per_month),
            musd(o.payment_usd_per_month)
        );
        let rows: Vec<Vec<String>> = self
            .per_service
            .iter()
            .map(|s| {
                vec![
                    s.service.clone(),
                    musd(s.payment_usd_per_month),
                    kusd(s.bandwidth_price_usd_per_gbps_per_month),
                ]
            })
            .collect();
        table(
            &mut out,
            &strings(&["service", "M$/month", "K$ per Gbps/month"]),
            &rows,
        );
        out
    }
}

impl Tabular for SweepResult {
    fn header(&self) -> Vec<String> {
        strings(&[
            "beta",
            "theta",
            "payment_usd_per_month",
            "surplus_usd_per_month",
            "deal",
            "isp_profit_after_usd_per_month",
            "csp_profit_after_usd_per_month",
            "traffic_before_gbps",
            "traffic_after_gbps",
            "bandwidth_price_usd_per_gbps_per_month",
        ])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    num(r.beta),
                    num(r.theta),
                    num(r.payment_usd_per_month),
                    num(r.surplus_usd_per_month),
                    r.deal.to_string(),
                    num(r.isp_profit_after_usd_per_month),
                    num(r.csp_profit_after_usd_per_month),
                    num(r.traffic_before_gbps),
                    num(r.traffic_after_gbps),
                    opt(r.bandwidth_price_usd_per_gbps_per_month),
                ]
            })
            .collect()
    }

    fn markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "## {}: payments from {} to {} ({})\n",
            self.scenario,
            self.focal.csp,
            self.focal.isp,
            self.focal.services.join(", ")
        );
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    format!("{}", r.beta),
                    format!("{}", r.theta),
                    musd(r.payment_usd_per_month),
                    if r.deal { "yes" } else { "no" }.into(),
                ]
            })
            .collect();
        table(
            &mut out,
            &strings(&["ISP loyalty", "CSP loyalty", "M$/month", "deal"]),
            &rows,
        );
        out
    }
}

impl Tabular for PriceTable {
    fn header(&self) -> Vec<String> {
        strings(&[
            "beta",
            "theta",
            "service",
            "payment_usd_per_month",
            "deal",
            "traffic_before_gbps",
            "traffic_after_gbps",
            "bandwidth_price_usd_per_gbps_per_month",
        ])
    }

    fn records(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for r in &self.rows {
            for (service, c) in &r.prices {
                out.push(vec![
                    num(r.beta),
                    num(r.theta),
                    service.clone(),
                    num(c.payment_usd_per_month),
                    c.deal.to_string(),
                    num(c.traffic_before_gbps),
                    num(c.traffic_after_gbps),
                    opt(c.bandwidth_price_usd_per_gbps_per_month),
                ]);
            }
        }
        out
    }

    fn markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "## {}: K$ per Gbps/month paid by {} to {}{}\n",
            self.scenario,
            self.csp,
            self.isp,
            if self.cdn { ", with CDN" } else { "" }
        );
        let mut header = strings(&["ISP loyalty", "CSP loyalty"]);
        header.extend(self.services.iter().cloned());
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![format!("{}", r.beta), format!("{}", r.theta)];
                row.extend(
                    r.prices
                        .values()
                        .map(|c| kusd(c.bandwidth_price_usd_per_gbps_per_month)),
                );
                row
            })
            .collect();
        table(&mut out, &header, &rows);
        out
    }
}

impl Tabular for TimingResult {
    fn header(&self) -> Vec<String> {
        strings(&[
            "label",
            "focal_position",
            "isp_customers_before",
            "isp_customers_after",
            "isp_profit_before_usd_per_month",
            "isp_profit_after_usd_per_month",
            "payment_usd_per_month",
            "deal",
            "isp_final_customers",
        ])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.label.clone(),
                    r.focal_position.to_string(),
                    num(r.isp_customers_before),
                    num(r.isp_customers_after),
                    num(r.isp_profit_before_usd_per_month),
                    num(r.isp_profit_after_usd_per_month),
                    num(r.payment_usd_per_month),
                    r.deal.to_string(),
                    num(r.isp_final_customers),
                ]
            })
            .collect()
    }

    fn markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "## {}: peering order of {} with {}\n",
            self.scenario, self.isp, self.csp
        );
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.label.clone(),
                    (r.focal_position + 1).to_string(),
                    musd(r.isp_profit_after_usd_per_month),
                    musd(r.payment_usd_per_month),
                ]
            })
            .collect();
        table(
            &mut out,
            &strings(&[
                "ordering",
                "position",
                "ISP profit after (M$/month)",
                "payment (M$/month)",
            ]),
            &rows,
        );
        out
    }
}

impl Tabular for ComparisonResult {
    fn header(&self) -> Vec<String> {
        strings(&["beta", "theta", "isp", "payment_usd_per_month", "deal"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for r in &self.rows {
            for (isp, pay) in &r.payments_usd_per_month {
                out.push(vec![
                    num(r.beta),
                    num(r.theta),
                    isp.clone(),
                    num(*pay),
                    r.deals[isp].to_string(),
                ]);
            }
        }
        out
    }

    fn markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "## {}: M$ per month paid by {}\n",
            self.scenario, self.csp
        );
        let mut header = strings(&["ISP loyalty", "CSP loyalty"]);
        header.extend(self.isps.iter().cloned());
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![format!("{}", r.beta), format!("{}", r.theta)];
                row.extend(r.payments_usd_per_month.values().map(|p| musd(*p)));
                row
            })
            .collect();
        table(&mut out, &header, &rows);
        out
    }
}
