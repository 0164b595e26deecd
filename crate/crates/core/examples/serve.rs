//! Start the service on 127.0.0.1:8080 serving files from the current
//! directory; stop with Ctrl-C. Same as `hapview serve`.

use hapview::service::{serve, AppState, ServiceConfig};

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:8080").await?;
    println!("listening on http://{}", listener.local_addr()?);
    let state = AppState::new(ServiceConfig::default());
    serve(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
