//! HTTP endpoint answering `POST /estimate`.

use std::sync::Arc;

use anyhow::{Context, Result};
use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};

use crate::commands::{EstimateRequest, LoadedEstimator};
use crate::config::PipelineConfig;

fn error(status: StatusCode, message: String) -> Response {
    (status, Json(serde_json::json!({ "error": message }))).into_response()
}

async fn estimate(State(estimator): State<Arc<LoadedEstimator>>, body: Result<Json<EstimateRequest>, JsonRejection>) -> Response {
    let request = match body {
        Ok(Json(r)) => r,
        Err(rejection) => return error(rejection.status(), rejection.body_text()),
    };
    let result = tokio::task::spawn_blocking(move || estimator.estimate(&request.text)).await;
    match result {
        Ok(Ok(response)) => Json(response).into_response(),
        Ok(Err(e)) => error(StatusCode::UNPROCESSABLE_ENTITY, format!("{e:#}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

pub fn app(estimator: Arc<LoadedEstimator>) -> Router {
    Router::new().route("/estimate", post(estimate)).with_state(estimator)
}

pub fn serve(config: &PipelineConfig, bind: &str) -> Result<()> {
    let estimator = Arc::new(LoadedEstimator::load(config)?);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting the async runtime")?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .with_context(|| format!("binding {bind}"))?;
        println!("listening on {}", listener.local_addr()?);
        axum::serve(listener, app(estimator)).await.context("serving")
    })
}
