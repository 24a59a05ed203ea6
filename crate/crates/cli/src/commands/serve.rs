use std::time::Duration;

use anyhow::{Context, Result};

use super::load_manifest;
use crate::args::ServeArgs;
use crate::service::{serve as serve_http, AppState, ServiceConfig, SystemClock};
use crate::Invalid;

pub fn serve(a: &ServeArgs) -> Result<()> {
    if !a.images.is_dir() {
        return Err(Invalid(format!("image directory {} does not exist", a.images.display())).into());
    }
    if a.session_ttl_secs == 0 {
        return Err(Invalid("--session-ttl-secs must be >= 1".into()).into());
    }
    let manifest = load_manifest(&a.data)?;
    let config = ServiceConfig {
        images_dir: a.images.clone(),
        crops_dir: a.crops.clone().unwrap_or_else(|| a.images.join("crops")),
        store_path: a
            .store
            .clone()
            .unwrap_or_else(|| a.common.out_dir.join("labels.human.jsonl")),
        session_ttl: Duration::from_secs(a.session_ttl_secs),
    };
    let (state, recovery) = AppState::new(&manifest, config.clone(), SystemClock)?;
    if recovery.truncated_bytes > 0 {
        eprintln!(
            "label store {}: dropped {} bytes of a torn final record",
            config.store_path.display(),
            recovery.truncated_bytes
        );
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting the async runtime")?;
    runtime.block_on(async {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        println!(
            "serving {} instances ({} already labelled) on http://{}",
            manifest.len(),
            manifest.len() - state.remaining(),
            listener.local_addr()?
        );
        serve_http(listener, state).await.context("http server")
    })
}
