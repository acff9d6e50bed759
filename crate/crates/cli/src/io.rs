use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use unified_ie::harness::{BaselineBackend, Gazetteer, HttpBackend, HttpConfig, MockGoldBackend};
use unified_ie::{read_jsonl, Backend, DatasetFile, TaskSpec};

use crate::config::Config;
use crate::{BackendArgs, Usage};

/// Lines of `path`, or of stdin when `path` is `None` or `-`.
pub fn read_lines(path: Option<&Path>) -> Result<Vec<String>> {
    let reader: Box<dyn Read> = match path {
        Some(p) if p != Path::new("-") => {
            Box::new(fs::File::open(p).with_context(|| format!("opening {}", p.display()))?)
        }
        _ => Box::new(std::io::stdin()),
    };
    BufReader::new(reader)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .context("reading input")
}

/// Writes to `path`, or to stdout when `path` is `None` or `-`.
pub fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => {
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn load_dataset(path: &Path) -> Result<DatasetFile> {
    read_jsonl(path).with_context(|| format!("loading dataset {}", path.display()))
}

pub fn build_backend(
    config: &Config,
    args: &BackendArgs,
    dataset: Option<&DatasetFile>,
    spec: &TaskSpec,
) -> Result<Box<dyn Backend>> {
    let kind = args
        .backend
        .clone()
        .or_else(|| config.backend.kind.clone())
        .ok_or_else(|| Usage("no backend: pass --backend or set backend.kind".into()))?;
    match kind.as_str() {
        "mock-gold" => {
            let reference = match &args.reference {
                Some(p) => load_dataset(p)?,
                None => dataset
                    .cloned()
                    .ok_or_else(|| Usage("mock-gold needs --reference".into()))?,
            };
            Ok(Box::new(MockGoldBackend::new(&reference)?))
        }
        "baseline" => {
            let path = args
                .gazetteer
                .as_ref()
                .or(config.backend.gazetteer.as_ref())
                .ok_or_else(|| Usage("baseline needs --gazetteer".into()))?;
            let gaz = Gazetteer::load(path)
                .with_context(|| format!("loading gazetteer {}", path.display()))?;
            Ok(Box::new(BaselineBackend::new(gaz, spec.clone())))
        }
        "http" => {
            let mut http = match (&config.backend.http, &args.base_url, &args.model) {
                (Some(c), _, _) => c.clone(),
                (None, Some(url), Some(model)) => HttpConfig::new(url, model),
                _ => {
                    return Err(Usage(
                        "http needs --base-url and --model, or a [backend.http] table".into(),
                    )
                    .into())
                }
            };
            if let Some(url) = &args.base_url {
                http.base_url = url.clone();
            }
            if let Some(model) = &args.model {
                http.model = model.clone();
            }
            if let Some(var) = &args.auth_env {
                http.auth_env_var = Some(var.clone());
            }
            if let Some(t) = args.timeout {
                http.timeout_secs = t;
            }
            if let Some(r) = args.retries {
                http.retries = r;
            }
            Ok(Box::new(HttpBackend::new(http)?))
        }
        other => Err(Usage(format!(
            "unknown backend {other:?} (expected mock-gold, baseline or http)"
        ))
        .into()),
    }
}
