use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, Request, StatusCode};
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::Router;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::api::{handle, parse_query_string, ApiState, Response};

async fn dispatch(State(state): State<Arc<ApiState>>, req: Request<Body>) -> HttpResponse {
    if req.method() != Method::GET {
        return Response { status: 405, body: serde_json::json!({"api_version": 1, "error": {"status": 405, "message": "only GET is supported"}}) }
            .into_http();
    }
    let path = req.uri().path().to_string();
    let params = parse_query_string(req.uri().query());
    match tokio::task::spawn_blocking(move || handle(&state, &path, &params)).await {
        Ok(r) => r.into_http(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

impl Response {
    pub fn into_http(self) -> HttpResponse {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, [(header::CONTENT_TYPE, "application/json; charset=utf-8")], self.to_bytes()).into_response()
    }
}

/// Every path goes through [`handle`]; CORS headers only for listed origins.
pub fn router(state: Arc<ApiState>, cors_allowlist: &[String]) -> Router {
    let app = Router::new().fallback(dispatch).with_state(state);
    if cors_allowlist.is_empty() {
        return app;
    }
    let origins: Vec<HeaderValue> = cors_allowlist.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
    app.layer(CorsLayer::new().allow_origin(AllowOrigin::list(origins)).allow_methods([Method::GET]))
}

/// Serve until Ctrl-C. The index is loaded by `load` on a blocking thread;
/// until it finishes every endpoint answers 503.
pub async fn serve<F>(addr: SocketAddr, state: Arc<ApiState>, cors_allowlist: &[String], load: F) -> anyhow::Result<()>
where
    F: FnOnce() -> anyhow::Result<Arc<geomove_core::SearchIndex>> + Send + 'static,
{
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    let loader_state = state.clone();
    let loader = tokio::task::spawn_blocking(move || -> anyhow::Result<()> {
        let index = load()?;
        tracing::info!(statements = index.snapshot().len(), "index ready");
        loader_state.set_index(index);
        Ok(())
    });
    let app = router(state, cors_allowlist);
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    loader.await??;
    server.await??;
    Ok(())
}
