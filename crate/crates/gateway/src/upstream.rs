use gaia_core::UploadBatch;

use crate::gateway::{Gateway, UploadOutcome};

#[derive(Debug, thiserror::Error)]
#[error("upload failed: {0}")]
pub struct UploadError(pub String);

/// Destination for upload batches. `Ok` means the server acknowledged the
/// whole batch.
pub trait Upstream {
    fn upload(&mut self, batch: &UploadBatch) -> Result<(), UploadError>;
}

impl<F> Upstream for F
where
    F: FnMut(&UploadBatch) -> Result<(), UploadError>,
{
    fn upload(&mut self, batch: &UploadBatch) -> Result<(), UploadError> {
        self(batch)
    }
}

/// Posts batches as JSON to the ingest endpoint with the gateway token header.
pub struct HttpUpstream {
    agent: ureq::Agent,
    url: String,
    token: String,
}

impl HttpUpstream {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: &str, token: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(std::time::Duration::from_secs(30)))
            .build()
            .new_agent();
        HttpUpstream {
            agent,
            url: format!("{}/api/v1/ingest", base.trim_end_matches('/')),
            token: token.into(),
        }
    }
}

impl Upstream for HttpUpstream {
    fn upload(&mut self, batch: &UploadBatch) -> Result<(), UploadError> {
        self.agent
            .post(&self.url)
            .header("X-Gateway-Token", &self.token)
            .send_json(batch)
            .map(|_| ())
            .map_err(|e| UploadError(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PumpStats {
    pub uploaded: usize,
    pub failed: usize,
}

/// Uploads every batch that is due at `now` until none is left or one fails.
/// With `drain`, partial batches are cut regardless of the size and age triggers.
pub fn pump(gateway: &Gateway, upstream: &mut dyn Upstream, now: u64, drain: bool) -> PumpStats {
    let mut stats = PumpStats::default();
    loop {
        let next = if drain {
            gateway.drain(now)
        } else {
            gateway.flush(now)
        };
        let Some(batch) = next else { break };
        let outcome = match upstream.upload(&batch) {
            Ok(()) => UploadOutcome::Success,
            Err(_) => UploadOutcome::Failure,
        };
        gateway
            .handle_upload_result(&batch.batch_id, outcome, now)
            .expect("batch was just handed out");
        match outcome {
            UploadOutcome::Success => stats.uploaded += 1,
            UploadOutcome::Failure => {
                stats.failed += 1;
                break;
            }
        }
    }
    stats
}
