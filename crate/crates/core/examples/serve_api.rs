//! Start the HTTP service on a local port. Try:
//!
//! ```text
//! curl localhost:8080/api/v1/datasets
//! curl -H 'content-type: application/json' \
//!      --data @scenarios/comcast-google-search.json \
//!      localhost:8080/api/v1/scenarios:run
//! ```

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let port: u16 = std::env::var("PORT").ok().and_then(|p| p.parse().ok()).unwrap_or(8080);
    peerbargain::api::serve(([127, 0, 0, 1], port).into()).await?;
    Ok(())
}
