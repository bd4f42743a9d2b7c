//! Generic news article fetcher.
//!
//! Pages are retrieved over HTTP and turned into a title and body by an
//! [`Extractor`]. Timeouts, HTTP status errors and empty extractions are
//! reported as typed errors.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use scraper::{Html, Selector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FetchError {
    #[error("invalid url {0:?}")]
    InvalidUrl(String),
    #[error("{0} was not found (HTTP 404)")]
    NotFound(String),
    #[error("{url} answered HTTP {code}")]
    Status { url: String, code: u16 },
    #[error("request to {0} timed out")]
    Timeout(String),
    #[error("network error fetching {url}: {reason}")]
    Network { url: String, reason: String },
    #[error("could not extract an article from {url}: {reason}")]
    Extraction { url: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub url: String,
    pub title: String,
    pub body: String,
    /// Seconds since the Unix epoch.
    pub fetched_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    #[serde(with = "seconds")]
    pub timeout: Duration,
    pub user_agent: String,
    pub max_redirects: u32,
    pub max_body_bytes: u64,
    /// Upper bound on simultaneous requests in [`fetch_all`].
    pub max_concurrent: usize,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(15),
            user_agent: concat!("fairtext-news/", env!("CARGO_PKG_VERSION")).into(),
            max_redirects: 5,
            max_body_bytes: 10 * 1024 * 1024,
            max_concurrent: 4,
        }
    }
}

mod seconds {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

/// Turns an HTML page into `(title, body)`.
pub trait Extractor: Send + Sync {
    fn extract(&self, html: &str) -> Result<(String, String), String>;
}

/// Title from `<title>` (falling back to the first `<h1>`), body from the
/// text of the `<p>` elements, one paragraph per line.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParagraphExtractor;

fn collapse(text: impl Iterator<Item = impl AsRef<str>>) -> String {
    let joined: Vec<String> = text.map(|t| t.as_ref().to_string()).collect();
    joined
        .concat()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

impl Extractor for ParagraphExtractor {
    fn extract(&self, html: &str) -> Result<(String, String), String> {
        let doc = Html::parse_document(html);
        let select = |s: &str| Selector::parse(s).expect("static selector");
        let title = doc
            .select(&select("title"))
            .chain(doc.select(&select("h1")))
            .map(|e| collapse(e.text()))
            .find(|t| !t.is_empty())
            .unwrap_or_default();
        let paragraphs: Vec<String> = doc
            .select(&select("p"))
            .map(|p| collapse(p.text()))
            .filter(|t| !t.is_empty())
            .collect();
        if paragraphs.is_empty() {
            return Err("page has no paragraph text".into());
        }
        Ok((title, paragraphs.join("\n")))
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn classify(url: &str, err: ureq::Error) -> FetchError {
    match err {
        ureq::Error::StatusCode(404) => FetchError::NotFound(url.to_string()),
        ureq::Error::StatusCode(code) => FetchError::Status {
            url: url.to_string(),
            code,
        },
        ureq::Error::Timeout(_) => FetchError::Timeout(url.to_string()),
        ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => {
            FetchError::Timeout(url.to_string())
        }
        ureq::Error::BadUri(reason) => FetchError::InvalidUrl(format!("{url}: {reason}")),
        other => FetchError::Network {
            url: url.to_string(),
            reason: other.to_string(),
        },
    }
}

/// Blocking HTTP client with a pluggable extractor.
pub struct NewsClient<E = ParagraphExtractor> {
    agent: ureq::Agent,
    config: ClientConfig,
    extractor: E,
}

impl NewsClient<ParagraphExtractor> {
    pub fn new(config: ClientConfig) -> Self {
        Self::with_extractor(config, ParagraphExtractor)
    }
}

impl<E: Extractor> NewsClient<E> {
    pub fn with_extractor(config: ClientConfig, extractor: E) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .user_agent(config.user_agent.as_str())
            .max_redirects(config.max_redirects)
            .http_status_as_error(true)
            .build()
            .into();
        Self {
            agent,
            config,
            extractor,
        }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    /// Raw page text.
    pub fn fetch_html(&self, url: &str) -> Result<String, FetchError> {
        let trimmed = url.trim();
        if !(trimmed.starts_with("http://") || trimmed.starts_with("https://")) {
            return Err(FetchError::InvalidUrl(url.to_string()));
        }
        log::debug!("GET {trimmed}");
        let mut response = self
            .agent
            .get(trimmed)
            .call()
            .map_err(|e| classify(trimmed, e))?;
        response
            .body_mut()
            .with_config()
            .limit(self.config.max_body_bytes)
            .read_to_string()
            .map_err(|e| classify(trimmed, e))
    }

    pub fn fetch(&self, url: &str) -> Result<NewsArticle, FetchError> {
        let html = self.fetch_html(url)?;
        let (title, body) =
            self.extractor
                .extract(&html)
                .map_err(|reason| FetchError::Extraction {
                    url: url.to_string(),
                    reason,
                })?;
        Ok(NewsArticle {
            url: url.trim().to_string(),
            title,
            body,
            fetched_at: now(),
        })
    }
}

pub fn fetch_article(url: &str, config: &ClientConfig) -> Result<NewsArticle, FetchError> {
    NewsClient::new(config.clone()).fetch(url)
}

/// Fetches every url with at most `config.max_concurrent` requests in
/// flight. Results are in input order.
pub fn fetch_all<E: Extractor>(
    client: &NewsClient<E>,
    urls: &[String],
) -> Vec<Result<NewsArticle, FetchError>> {
    let results: Vec<Mutex<Option<Result<NewsArticle, FetchError>>>> =
        urls.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = client.config.max_concurrent.clamp(1, urls.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(url) = urls.get(i) else { break };
                let result = client.fetch(url);
                *results[i].lock().expect("result slot") = Some(result);
            });
        }
    });
    results
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("result slot")
                .expect("every url is fetched")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_title_and_paragraphs() {
        let html = "<html><head><title> Storm  season </title><script>var x = '<p>no</p>';</script></head>\
                    <body><h1>Ignored</h1><p>First &amp; <b>bold</b>\n line.</p><div>skip</div><p></p><p>Second.</p></body></html>";
        let (title, body) = ParagraphExtractor.extract(html).unwrap();
        assert_eq!(title, "Storm season");
        assert_eq!(body, "First & bold line.\nSecond.");
    }

    #[test]
    fn falls_back_to_h1_title() {
        let (title, _) = ParagraphExtractor
            .extract("<h1>Headline</h1><p>Body.</p>")
            .unwrap();
        assert_eq!(title, "Headline");
    }

    #[test]
    fn page_without_paragraphs_fails() {
        assert!(ParagraphExtractor
            .extract("<title>t</title><div>x</div>")
            .is_err());
    }

    #[test]
    fn rejects_non_http_urls() {
        let client = NewsClient::new(ClientConfig::default());
        assert!(matches!(
            client.fetch("ftp://example.com/a"),
            Err(FetchError::InvalidUrl(_))
        ));
        assert!(matches!(client.fetch(""), Err(FetchError::InvalidUrl(_))));
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = ClientConfig {
            timeout: Duration::from_millis(1500),
            ..ClientConfig::default()
        };
        let json = serde_json::to_string(&config).unwrap();
        assert!(json.contains("\"timeout\":1.5"));
        assert_eq!(serde_json::from_str::<ClientConfig>(&json).unwrap(), config);
    }
}
