//! Minimal MediaWiki `action=query&prop=revisions` client.
//!
//! Pages are requested oldest-first and continuation tokens are echoed back until
//! the server stops returning a `continue` object. Every request to an endpoint goes
//! through one shared [`RateLimiter`], so concurrent article fetches stay serialized.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde_json::Value;

use super::{parse_timestamp, sort_revisions, ArticleRef, EditorId, IngestError, RevisionRecord};

/// Enforces a minimum spacing between consecutive requests.
#[derive(Debug)]
pub struct RateLimiter {
    delay: Duration,
    last: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(delay: Duration) -> Self {
        RateLimiter {
            delay,
            last: Mutex::new(None),
        }
    }

    /// Blocks until `delay` has elapsed since the previous call returned.
    pub fn wait(&self) {
        let mut last = self.last.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.delay {
                thread::sleep(self.delay - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    /// `rvlimit` per request.
    pub page_limit: u32,
    pub request_delay: Duration,
    pub max_retries: u32,
    /// First retry waits this long; each further retry doubles it.
    pub backoff_base: Duration,
    pub include_content: bool,
    pub user_agent: String,
    pub timeout: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            page_limit: 500,
            request_delay: Duration::from_millis(200),
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            include_content: false,
            user_agent: concat!("cocreate/", env!("CARGO_PKG_VERSION"), " (research crawler)").to_string(),
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MediaWikiClient {
    endpoint: String,
    http: reqwest::blocking::Client,
    limiter: Arc<RateLimiter>,
    options: FetchOptions,
}

impl MediaWikiClient {
    pub fn new(endpoint: &str, options: FetchOptions) -> Result<Self, IngestError> {
        let limiter = Arc::new(RateLimiter::new(options.request_delay));
        Self::with_limiter(endpoint, options, limiter)
    }

    /// Builds a client that shares `limiter` with other clients of the same endpoint.
    pub fn with_limiter(endpoint: &str, options: FetchOptions, limiter: Arc<RateLimiter>) -> Result<Self, IngestError> {
        let http = reqwest::blocking::Client::builder()
            .user_agent(options.user_agent.clone())
            .timeout(options.timeout)
            .build()
            .map_err(|e| IngestError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(MediaWikiClient {
            endpoint: endpoint.to_string(),
            http,
            limiter,
            options,
        })
    }

    pub fn limiter(&self) -> Arc<RateLimiter> {
        Arc::clone(&self.limiter)
    }

    /// Fetches every revision of `article` with `start <= timestamp < end`.
    pub fn fetch(
        &self,
        article: &ArticleRef,
        start: DateTime<Utc>,
        end: DateTime<Utc>,
    ) -> Result<Vec<RevisionRecord>, IngestError> {
        if start >= end {
            return Err(IngestError::InvalidRange { start, end });
        }
        let mut rvprop = String::from("ids|timestamp|user|comment");
        if self.options.include_content {
            rvprop.push_str("|content");
        }
        let base: Vec<(String, String)> = [
            ("action", "query".to_string()),
            ("format", "json".to_string()),
            ("formatversion", "2".to_string()),
            ("prop", "revisions".to_string()),
            ("titles", article.title.clone()),
            ("rvprop", rvprop),
            ("rvslots", "main".to_string()),
            ("rvdir", "newer".to_string()),
            ("rvlimit", self.options.page_limit.max(1).to_string()),
            ("rvstart", start.format("%Y-%m-%dT%H:%M:%SZ").to_string()),
            ("rvend", end.format("%Y-%m-%dT%H:%M:%SZ").to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();

        let mut records = Vec::new();
        let mut continuation: Option<BTreeMap<String, String>> = None;
        loop {
            let mut params = base.clone();
            if let Some(cont) = &continuation {
                params.extend(cont.iter().map(|(k, v)| (k.clone(), v.clone())));
            }
            let body = self.get(&params)?;
            let page = parse_revisions_page(&body, &article.title)?;
            records.extend(page.records);
            match page.continuation {
                Some(next) => continuation = Some(next),
                None => break,
            }
        }

        // rvend is inclusive on the server side
        records.retain(|r| r.timestamp >= start && r.timestamp < end);
        sort_revisions(&mut records);
        records.dedup_by_key(|r| r.revision_id);
        Ok(records)
    }

    fn get(&self, params: &[(String, String)]) -> Result<String, IngestError> {
        let mut attempt = 0u32;
        loop {
            self.limiter.wait();
            let outcome = self
                .http
                .get(&self.endpoint)
                .query(params)
                .send()
                .and_then(|resp| {
                    let status = resp.status();
                    resp.text().map(|body| (status, body))
                });
            match outcome {
                Ok((status, body)) => {
                    if !status.is_success() {
                        return Err(IngestError::Endpoint { status: status.as_u16() });
                    }
                    return Ok(body);
                }
                Err(e) => {
                    if attempt >= self.options.max_retries {
                        return Err(IngestError::Transport {
                            attempts: attempt + 1,
                            message: e.to_string(),
                        });
                    }
                    let backoff = self.options.backoff_base * 2u32.pow(attempt);
                    log::warn!("request failed ({e}); retrying in {backoff:?}");
                    thread::sleep(backoff);
                    attempt += 1;
                }
            }
        }
    }
}

/// One-shot fetch with default options apart from `page_limit`.
pub fn fetch_revisions(
    article: &ArticleRef,
    start: DateTime<Utc>,
    end: DateTime<Utc>,
    endpoint: &str,
    page_limit: u32,
) -> Result<Vec<RevisionRecord>, IngestError> {
    let options = FetchOptions {
        page_limit,
        ..FetchOptions::default()
    };
    MediaWikiClient::new(endpoint, options)?.fetch(article, start, end)
}

#[derive(Debug)]
pub struct RevisionsPage {
    pub records: Vec<RevisionRecord>,
    pub continuation: Option<BTreeMap<String, String>>,
}

fn parse_err(field: &str, revision_id: Option<u64>, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        field: field.to_string(),
        revision_id,
        message: message.into(),
    }
}

/// Parses one `formatversion=2` response body.
pub fn parse_revisions_page(body: &str, title: &str) -> Result<RevisionsPage, IngestError> {
    let root: Value = serde_json::from_str(body).map_err(|e| parse_err("<body>", None, e.to_string()))?;
    if let Some(err) = root.get("error") {
        return Err(IngestError::Api {
            code: err.get("code").and_then(Value::as_str).unwrap_or("unknown").to_string(),
            info: err.get("info").and_then(Value::as_str).unwrap_or("").to_string(),
        });
    }

    let continuation = match root.get("continue") {
        None | Some(Value::Null) => None,
        Some(Value::Object(map)) => {
            let mut out = BTreeMap::new();
            for (k, v) in map {
                let v = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                out.insert(k.clone(), v);
            }
            Some(out)
        }
        Some(_) => return Err(parse_err("continue", None, "expected an object")),
    };

    let pages = match root.get("query").and_then(|q| q.get("pages")) {
        Some(Value::Array(pages)) => pages.clone(),
        Some(Value::Object(map)) => map.values().cloned().collect(),
        // a continuation-only batch can omit the query block
        None => Vec::new(),
        Some(_) => return Err(parse_err("query.pages", None, "expected an array")),
    };

    let mut records = Vec::new();
    for page in &pages {
        if page.get("missing").is_some_and(|m| m != &Value::Bool(false)) {
            return Err(IngestError::MissingPage(title.to_string()));
        }
        let Some(revs) = page.get("revisions") else {
            continue;
        };
        let revs = revs
            .as_array()
            .ok_or_else(|| parse_err("revisions", None, "expected an array"))?;
        for rev in revs {
            if let Some(r) = parse_revision(rev)? {
                records.push(r);
            }
        }
    }
    Ok(RevisionsPage { records, continuation })
}

fn parse_revision(rev: &Value) -> Result<Option<RevisionRecord>, IngestError> {
    let revision_id = rev
        .get("revid")
        .and_then(Value::as_u64)
        .filter(|id| *id > 0)
        .ok_or_else(|| parse_err("revid", None, "missing or not a positive integer"))?;
    let id = Some(revision_id);

    // suppressed usernames cannot be attributed to anyone
    if rev.get("userhidden").is_some_and(|v| v != &Value::Bool(false)) {
        return Ok(None);
    }
    let user = rev
        .get("user")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_err("user", id, "missing or not a string"))?;
    let editor = EditorId::new(user).map_err(|e| parse_err("user", id, e.to_string()))?;

    let raw_ts = rev
        .get("timestamp")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_err("timestamp", id, "missing or not a string"))?;
    let timestamp = parse_timestamp(raw_ts).map_err(|e| parse_err("timestamp", id, format!("`{raw_ts}`: {e}")))?;

    let comment = match rev.get("comment") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(parse_err("comment", id, "not a string")),
    };

    let content = rev
        .get("slots")
        .and_then(|s| s.get("main"))
        .and_then(|m| m.get("content"))
        .or_else(|| rev.get("content"))
        .and_then(Value::as_str)
        .map(str::to_string);

    Ok(Some(RevisionRecord::new(revision_id, editor, timestamp, comment, content)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_page_with_continuation() {
        let body = r#"{"continue":{"rvcontinue":"20200101000000|5","continue":"||"},
            "query":{"pages":[{"pageid":1,"title":"X","revisions":[
              {"revid":5,"user":"A","timestamp":"2020-01-01T00:00:00Z","comment":"/* Intro */ hi"},
              {"revid":6,"user":"10.0.0.1","timestamp":"2020-01-01T01:00:00Z","comment":"",
               "slots":{"main":{"content":"== Intro =="}}},
              {"revid":7,"userhidden":true,"timestamp":"2020-01-01T02:00:00Z","comment":""}
            ]}]}}"#;
        let page = parse_revisions_page(body, "X").unwrap();
        assert_eq!(page.records.len(), 2);
        assert_eq!(page.records[0].section_marker.as_deref(), Some("Intro"));
        assert_eq!(page.records[1].content.as_deref(), Some("== Intro =="));
        let cont = page.continuation.unwrap();
        assert_eq!(cont["rvcontinue"], "20200101000000|5");
    }

    #[test]
    fn bad_timestamp_names_revision() {
        let body = r#"{"query":{"pages":[{"revisions":[
            {"revid":77,"user":"A","timestamp":"not-a-date","comment":""}]}]}}"#;
        let err = parse_revisions_page(body, "X").unwrap_err();
        match &err {
            IngestError::Parse { field, revision_id, .. } => {
                assert_eq!(field, "timestamp");
                assert_eq!(*revision_id, Some(77));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("77"));
    }

    #[test]
    fn api_error_and_missing_page() {
        let err = parse_revisions_page(r#"{"error":{"code":"badvalue","info":"nope"}}"#, "X").unwrap_err();
        assert!(matches!(err, IngestError::Api { .. }));
        let err = parse_revisions_page(r#"{"query":{"pages":[{"title":"X","missing":true}]}}"#, "X").unwrap_err();
        assert!(matches!(err, IngestError::MissingPage(_)));
    }

    #[test]
    fn rate_limiter_spaces_calls() {
        let limiter = RateLimiter::new(Duration::from_millis(30));
        let start = Instant::now();
        for _ in 0..3 {
            limiter.wait();
        }
        assert!(start.elapsed() >= Duration::from_millis(60));
    }
}
