//! HTTP execution of input sequences.
//!
//! The executor owns a cookie jar per execution, follows redirects by hand
//! (so the post-redirect session cookie is observable), and maps an
//! action's channel to the configured port pair when the target simulates
//! TLS with a second plain port.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;
use url::Url;

use crate::config::TargetConfig;
use crate::model::{Action, InputSequence, OutputSequence, Page, RequestFingerprint};

/// Environment variable naming an HTTP proxy for all executor traffic.
pub const PROXY_ENV: &str = "SMRLMT_PROXY";

const MAX_REDIRECTS: usize = 10;

/// Anything that can turn an input sequence into an output sequence. The
/// engine depends on this trait so tests can substitute recorded outputs.
pub trait SequenceExecutor {
    fn execute(&self, seq: &InputSequence, fresh_session: bool) -> OutputSequence;
}

/// Returns the request fingerprints `execute` would issue, without
/// executing anything. Redirect targets are unknowable offline, so only
/// the explicit actions are fingerprinted.
pub fn record_requests(seq: &InputSequence) -> BTreeSet<RequestFingerprint> {
    seq.actions.iter().map(RequestFingerprint::of).collect()
}

#[derive(Serialize)]
struct TranscriptEntry<'a> {
    sequence: &'a str,
    position: usize,
    method: &'a str,
    url: &'a str,
    status: u16,
    body_bytes: usize,
    session: &'a str,
}

/// Live HTTP executor backed by one shared client with keep-alive
/// connections. Cookies are managed here, not by the client, so each
/// `execute` starts from a clean or carried-over jar as requested.
pub struct HttpExecutor {
    config: TargetConfig,
    client: reqwest::blocking::Client,
    jar: RefCell<Option<String>>,
    transcript: Option<RefCell<File>>,
}

impl HttpExecutor {
    pub fn new(config: TargetConfig) -> Result<Self, reqwest::Error> {
        let mut builder = reqwest::blocking::Client::builder()
            .connect_timeout(Duration::from_secs(config.connect_timeout_secs))
            .timeout(Duration::from_secs(config.response_timeout_secs))
            .redirect(reqwest::redirect::Policy::none());
        if let Ok(proxy) = std::env::var(PROXY_ENV) {
            if !proxy.is_empty() {
                builder = builder.proxy(reqwest::Proxy::all(&proxy)?);
            }
        }
        Ok(HttpExecutor {
            config,
            client: builder.build()?,
            jar: RefCell::new(None),
            transcript: None,
        })
    }

    /// Appends one line of newline-delimited JSON per request to `path`.
    pub fn with_transcript(mut self, path: &Path) -> std::io::Result<Self> {
        self.transcript = Some(RefCell::new(File::create(path)?));
        Ok(self)
    }

    /// Maps a logical URL to its transport form. With simulated TLS the
    /// wire scheme is always plain HTTP and the logical scheme picks the
    /// port; otherwise the URL goes out as addressed. Pages and redirects
    /// stay in logical space so recorded URLs never leak the port mapping.
    fn transport_url(&self, logical: &Url) -> Url {
        let mut url = logical.clone();
        if self.config.simulated_tls {
            let port = match logical.scheme() {
                "https" => self.config.secure_port,
                _ => self.config.insecure_port,
            };
            let _ = url.set_scheme("http");
            let _ = url.set_port(Some(port));
        }
        url
    }

    fn apply_set_cookie(&self, response: &reqwest::blocking::Response) {
        for value in response.headers().get_all(reqwest::header::SET_COOKIE) {
            let Ok(text) = value.to_str() else { continue };
            let Some(pair) = text.split(';').next() else { continue };
            if let Some((name, v)) = pair.split_once('=') {
                if name.trim() == self.config.session_cookie {
                    *self.jar.borrow_mut() = Some(v.trim().to_string());
                }
            }
        }
    }

    fn session_id(&self) -> String {
        self.jar.borrow().clone().unwrap_or_default()
    }

    /// Executes one action, following redirects, and returns the final
    /// page. Transport failures yield the synthetic status-0 page.
    fn perform(&self, action: &Action) -> Page {
        let mut method = action.method.clone();
        let mut logical = action.url.clone();
        if !action.query_params.is_empty() {
            let mut qp = logical.query_pairs_mut();
            qp.clear();
            for (n, v) in &action.query_params {
                qp.append_pair(n, v);
            }
        }
        let mut form: Option<Vec<(String, String)>> = if action.form_data.is_empty() {
            None
        } else {
            Some(action.form_data.clone())
        };

        for _hop in 0..=MAX_REDIRECTS {
            let transport = self.transport_url(&logical);
            let mut request = self.client.request(
                method.parse().unwrap_or(reqwest::Method::GET),
                transport.clone(),
            );
            if let Some(sid) = self.jar.borrow().as_ref() {
                request = request.header(
                    reqwest::header::COOKIE,
                    format!("{}={}", self.config.session_cookie, sid),
                );
            }
            for (name, value) in &action.headers {
                request = request.header(name.as_str(), value.as_str());
            }
            if let Some(fields) = &form {
                request = request.form(fields);
            }

            let response = match request.send() {
                Ok(r) => r,
                Err(_) => return Page::transport_error(logical.as_str(), &self.session_id()),
            };
            self.apply_set_cookie(&response);
            let status = response.status().as_u16();

            if (300..400).contains(&status) && status != 304 {
                let location = response
                    .headers()
                    .get(reqwest::header::LOCATION)
                    .and_then(|v| v.to_str().ok())
                    .and_then(|loc| logical.join(loc).ok());
                if let Some(mut next) = location {
                    // An absolute Location naming the wire address is
                    // folded back into logical space.
                    if self.config.simulated_tls
                        && next.host_str() == transport.host_str()
                        && next.port_or_known_default() == transport.port_or_known_default()
                    {
                        let _ = next.set_scheme(logical.scheme());
                        let _ = next.set_port(logical.port());
                    }
                    // 307/308 preserve the method and body; the rest
                    // degrade to GET, as browsers do.
                    if !(status == 307 || status == 308) {
                        method = "GET".to_string();
                        form = None;
                    }
                    logical = next;
                    continue;
                }
            }

            let content_type = response
                .headers()
                .get(reqwest::header::CONTENT_TYPE)
                .and_then(|v| v.to_str().ok())
                .unwrap_or_default()
                .to_string();
            let final_url = logical.to_string();
            let body = response.bytes().map(|b| b.to_vec()).unwrap_or_default();
            return Page::new(body, status, &self.session_id(), &content_type, &final_url)
                .unwrap_or_else(|_| Page::transport_error(&final_url, &self.session_id()));
        }
        Page::transport_error(logical.as_str(), &self.session_id())
    }

    fn log(&self, seq: &InputSequence, position: usize, action: &Action, page: &Page) {
        if let Some(out) = &self.transcript {
            let entry = TranscriptEntry {
                sequence: &seq.id,
                position,
                method: &action.method,
                url: action.url.as_str(),
                status: page.status,
                body_bytes: page.body.len(),
                session: &page.session_id,
            };
            if let Ok(line) = serde_json::to_string(&entry) {
                let _ = writeln!(out.borrow_mut(), "{line}");
            }
        }
    }
}

impl SequenceExecutor for HttpExecutor {
    fn execute(&self, seq: &InputSequence, fresh_session: bool) -> OutputSequence {
        if fresh_session {
            *self.jar.borrow_mut() = None;
        }
        let mut pages = Vec::with_capacity(seq.actions.len());
        for (i, action) in seq.actions.iter().enumerate() {
            let page = self.perform(action);
            self.log(seq, i + 1, action, &page);
            pages.push(page);
        }
        OutputSequence {
            input: seq.id.clone(),
            pages,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{self, SiteConfig};
    use crate::model::{Channel, Provenance};

    fn test_config(insecure: u16, secure: u16) -> TargetConfig {
        let mut config = TargetConfig::for_tests("https://127.0.0.1/");
        config.insecure_port = insecure;
        config.secure_port = secure;
        config
    }

    fn get(url: &str) -> Action {
        Action::request("GET", url).unwrap()
    }

    fn login(url: &str, user: &str, password: &str) -> Action {
        let mut a = Action::form_submit(
            "POST",
            url,
            vec![
                ("username".to_string(), user.to_string()),
                ("password".to_string(), password.to_string()),
            ],
        )
        .unwrap();
        a.set_auth_flags(true, false).unwrap();
        a
    }

    fn seq(id: &str, actions: Vec<Action>) -> InputSequence {
        InputSequence::new(id, actions, Provenance::Crawled, None).unwrap()
    }

    #[test]
    fn executes_sequences_with_sessions_and_redirects() {
        let handle = fixture::serve(SiteConfig::patched(), 0, 0).unwrap();
        let config = test_config(handle.insecure_port, handle.secure_port);
        let exec = HttpExecutor::new(config).unwrap();

        let s = seq(
            "s1",
            vec![
                get("https://127.0.0.1/"),
                login("https://127.0.0.1/login", "tester", "tester-pw-1"),
                get("https://127.0.0.1/echo"),
            ],
        );
        let out = exec.execute(&s, true);
        assert_eq!(out.pages.len(), 3);
        assert_eq!(out.pages[0].status, 200);
        // The login redirect was followed to /home.
        assert_eq!(out.pages[1].status, 200);
        assert!(out.pages[1].final_url.ends_with("/home"));
        assert!(out.pages[1].body_text().contains("tester role"));
        assert_eq!(out.pages[1].session_id, "u-tester");
        assert!(out.pages[2].body_text().contains("u-tester"));

        // Replay fidelity: a second run is page-equal action by action.
        let again = exec.execute(&s, true);
        for (a, b) in out.pages.iter().zip(&again.pages) {
            assert_eq!(a.status, b.status);
            assert_eq!(a.body, b.body);
        }
        handle.shutdown();
    }

    #[test]
    fn fresh_sessions_do_not_share_cookies() {
        let handle = fixture::serve(SiteConfig::patched(), 0, 0).unwrap();
        let config = test_config(handle.insecure_port, handle.secure_port);
        let exec = HttpExecutor::new(config).unwrap();

        let login_seq = seq(
            "s1",
            vec![login("https://127.0.0.1/login", "devel", "devel-pw-1")],
        );
        let echo_seq = seq("s2", vec![get("https://127.0.0.1/echo")]);

        let logged_in = exec.execute(&login_seq, true);
        assert_eq!(logged_in.pages[0].session_id, "u-devel");
        let echoed = exec.execute(&echo_seq, true);
        assert_eq!(echoed.pages[0].session_id, "");
        assert!(echoed.pages[0].body_text().contains("anonymous"));
        handle.shutdown();
    }

    #[test]
    fn channel_selects_the_port() {
        let handle = fixture::serve(SiteConfig::patched(), 0, 0).unwrap();
        let config = test_config(handle.insecure_port, handle.secure_port);
        let exec = HttpExecutor::new(config).unwrap();

        let mut plain = login("https://127.0.0.1/login", "tester", "tester-pw-1");
        plain.set_channel(Channel::Http);
        let rejected = exec.execute(&seq("s1", vec![plain]), true);
        assert_eq!(rejected.pages[0].status, 403);

        let secure = login("https://127.0.0.1/login", "tester", "tester-pw-1");
        let accepted = exec.execute(&seq("s2", vec![secure]), true);
        assert_eq!(accepted.pages[0].status, 200);
        assert!(accepted.pages[0].final_url.ends_with("/home"));
        handle.shutdown();
    }

    #[test]
    fn unreachable_host_yields_status_zero_pages() {
        // Bind then drop a listener so the port is very likely closed.
        let port = {
            let l = std::net::TcpListener::bind(("127.0.0.1", 0)).unwrap();
            l.local_addr().unwrap().port()
        };
        let config = test_config(port, port);
        let exec = HttpExecutor::new(config).unwrap();
        let out = exec.execute(
            &seq(
                "s1",
                vec![get("https://127.0.0.1/a"), get("https://127.0.0.1/b")],
            ),
            true,
        );
        assert_eq!(out.pages.len(), 2);
        assert!(out.pages.iter().all(|p| p.status == 0));
    }

    #[test]
    fn record_requests_fingerprints_without_executing() {
        let a = get("https://127.0.0.1/a");
        let mut b = Action::form_submit(
            "POST",
            "https://127.0.0.1/b",
            vec![("x".to_string(), "1".to_string())],
        )
        .unwrap();
        let prints = record_requests(&seq("s1", vec![a.clone(), b.clone()]));
        assert_eq!(prints.len(), 2);
        assert!(prints
            .iter()
            .any(|f| f.method == "POST" && f.params == vec![("x".to_string(), "1".to_string())]));

        // Param order does not matter.
        b.form_data = vec![
            ("z".to_string(), "2".to_string()),
            ("x".to_string(), "1".to_string()),
        ];
        let mut c = b.clone();
        c.form_data.reverse();
        assert_eq!(
            record_requests(&seq("s2", vec![b])),
            record_requests(&seq("s3", vec![c]))
        );
    }
}
