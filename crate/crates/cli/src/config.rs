use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use rdm_core::{Error, Result};

#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub bind: SocketAddr,
    /// Bearer token; `None` disables authentication (loopback only).
    pub token: Option<String>,
    pub journal: PathBuf,
    pub blob_root: PathBuf,
    pub scheduler_interval: Option<Duration>,
    /// Allow reads without a token.
    pub public_read: bool,
}

impl ApiConfig {
    /// A non-loopback bind address requires a non-empty token.
    pub fn validate(&self) -> Result<()> {
        let token_set = self.token.as_deref().is_some_and(|t| !t.is_empty());
        if !self.bind.ip().is_loopback() && !token_set {
            return Err(Error::Domain(format!(
                "binding {} requires a bearer token (--token or RDM_TOKEN)",
                self.bind
            )));
        }
        if self.scheduler_interval.is_some_and(|d| d.is_zero()) {
            return Err(Error::Domain("scheduler interval must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(bind: &str, token: Option<&str>) -> ApiConfig {
        ApiConfig {
            bind: bind.parse().unwrap(),
            token: token.map(str::to_string),
            journal: "j".into(),
            blob_root: "b".into(),
            scheduler_interval: None,
            public_read: false,
        }
    }

    #[test]
    fn token_required_off_loopback() {
        assert!(config("127.0.0.1:8080", None).validate().is_ok());
        assert!(config("[::1]:8080", None).validate().is_ok());
        assert!(config("0.0.0.0:8080", None).validate().is_err());
        assert!(config("0.0.0.0:8080", Some("")).validate().is_err());
        assert!(config("0.0.0.0:8080", Some("s3cret")).validate().is_ok());
    }
}
