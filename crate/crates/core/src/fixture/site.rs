//! Request handling for the fixture application, a small continuous
//! integration front-end called Minibuild. Routing is a pure function of
//! the request, the session cookie and the vulnerability toggles, so every
//! response body is byte-deterministic.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

/// Seeded vulnerability toggles. All off means fully patched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Vuln {
    /// `/admin/startSlave` ignores the role check.
    V1,
    /// Login succeeds on the insecure port.
    V2,
    /// `/download` serves any known path, not just the whitelist.
    V3,
    /// The session cookie is not rotated on signup.
    V4,
}

impl FromStr for Vuln {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "V1" => Ok(Vuln::V1),
            "V2" => Ok(Vuln::V2),
            "V3" => Ok(Vuln::V3),
            "V4" => Ok(Vuln::V4),
            other => Err(format!("unknown vulnerability toggle {other:?}")),
        }
    }
}

impl fmt::Display for Vuln {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vuln::V1 => write!(f, "V1"),
            Vuln::V2 => write!(f, "V2"),
            Vuln::V3 => write!(f, "V3"),
            Vuln::V4 => write!(f, "V4"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SiteConfig {
    pub vulns: BTreeSet<Vuln>,
}

impl SiteConfig {
    pub fn patched() -> Self {
        SiteConfig::default()
    }

    pub fn with_vulns(vulns: &[Vuln]) -> Self {
        SiteConfig {
            vulns: vulns.iter().copied().collect(),
        }
    }

    fn on(&self, v: Vuln) -> bool {
        self.vulns.contains(&v)
    }
}

/// A parsed request as the site logic sees it.
#[derive(Debug, Clone)]
pub struct SiteRequest {
    pub method: String,
    pub path: String,
    pub query: Vec<(String, String)>,
    pub form: Vec<(String, String)>,
    pub session: Option<String>,
    /// True when the request arrived on the port designated as secure.
    pub secure: bool,
}

impl SiteRequest {
    fn query_value(&self, name: &str) -> Option<&str> {
        self.query
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    fn form_value(&self, name: &str) -> Option<&str> {
        self.form
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SiteResponse {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
    pub set_cookie: Option<String>,
    pub location: Option<String>,
}

impl SiteResponse {
    fn html(status: u16, body: String) -> Self {
        SiteResponse {
            status,
            content_type: "text/html; charset=utf-8",
            body: body.into_bytes(),
            set_cookie: None,
            location: None,
        }
    }
}

const USERS: &[(&str, &str, &str)] = &[
    ("admin", "admin-pw-1", "admin"),
    ("devel", "devel-pw-1", "devel"),
    ("tester", "tester-pw-1", "tester"),
];

/// The read-only file tree backing `/download`.
pub const FILES: &[(&str, &str)] = &[
    (
        "welcome.txt",
        "Welcome to Minibuild. This build coordinator schedules compile and test \
         jobs across the worker fleet. Consult the manual for agent enrolment, \
         artifact retention rules, and the meaning of each status column on the \
         stats page. Build results are kept for thirty days.",
    ),
    (
        "manual.txt",
        "Minibuild operator manual. Chapter 1 covers installing the coordinator \
         and registering build agents. Chapter 2 explains pipelines, triggers and \
         artifact uploads. Chapter 3 documents the permission model: each account \
         holds exactly one role and dashboards are per-role. Chapter 4 lists the \
         maintenance endpoints reserved for administrators.",
    ),
    (
        "secret/credentials.txt",
        "agent enrolment key: MB-4477-AXXE-0031\ncoordinator admin token: tok-9ce2ab7751\n",
    ),
    (
        "secret/backup-plan.txt",
        "Nightly backup copies the job database to the standby coordinator. \
         Restore requires the admin token from credentials.txt.\n",
    ),
];

const DOWNLOAD_WHITELIST: &[&str] = &["welcome.txt", "manual.txt"];

/// The built-in accounts as (username, password, role) triples.
pub fn accounts() -> &'static [(&'static str, &'static str, &'static str)] {
    USERS
}

/// Deterministic session-id rotation used on signup.
pub fn rotate_session(current: &str) -> String {
    if current.is_empty() {
        "fresh-1".to_string()
    } else {
        format!("{current}+r")
    }
}

/// The account owning a session id, if any. Login issues `u-<name>`, and
/// each signup rotation appends `+r`, so ownership survives rotation.
pub fn session_owner(sid: &str) -> Option<&'static str> {
    let base = sid.trim_end_matches("+r");
    let name = base.strip_prefix("u-")?;
    USERS.iter().find(|(u, _, _)| *u == name).map(|(u, _, _)| *u)
}

fn role_of(username: &str) -> Option<&'static str> {
    USERS
        .iter()
        .find(|(u, _, _)| *u == username)
        .map(|(_, _, role)| *role)
}

fn page(title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n\
         <title>Minibuild - {title}</title>\n</head>\n<body>\n\
         <div class=\"masthead\"><h1>Minibuild continuous integration</h1>\
         <p class=\"tagline\">coordinating compile and test jobs for every team</p></div>\n\
         {body}\n\
         <div class=\"footer\"><p>Minibuild coordinator, reference deployment. \
         All build artifacts are retained for thirty days.</p></div>\n\
         </body>\n</html>\n"
    )
}

fn error_page(status: u16, title: &str, detail: &str) -> SiteResponse {
    SiteResponse::html(
        status,
        page(
            title,
            &format!(
                "<div class=\"error\"><h2>Error: {title}</h2>\n<p>{detail}</p>\n\
                 <p>If you believe this is a mistake, contact the build \
                 coordinator operators and quote the exact request you made.</p></div>"
            ),
        ),
    )
}

fn forbidden() -> SiteResponse {
    error_page(
        403,
        "forbidden",
        "You are not allowed to view this page with your current role or \
         session. Sign in from the front page first.",
    )
}

fn not_found() -> SiteResponse {
    error_page(
        404,
        "not found",
        "No page or file exists at the requested location. Check the address \
         for typos and try again from the home page.",
    )
}

fn method_not_allowed() -> SiteResponse {
    error_page(
        405,
        "method not allowed",
        "The requested resource exists but does not accept this HTTP method. \
         Use the links and forms provided by the interface.",
    )
}

fn login_page() -> SiteResponse {
    SiteResponse::html(
        200,
        page(
            "sign in",
            "<h2>Sign in to your build account</h2>\n\
             <p>Enter the account name and password assigned by your team lead. \
             New team members can request an account instead.</p>\n\
             <form action=\"/login\" method=\"post\">\n\
             <label>Account <input type=\"text\" name=\"username\"></label>\n\
             <label>Password <input type=\"password\" name=\"password\"></label>\n\
             <input type=\"submit\" value=\"Sign in\">\n\
             </form>\n\
             <p><a href=\"/signup\">Request a new account</a></p>",
        ),
    )
}

fn home_page(role: &str) -> SiteResponse {
    let mut links = String::new();
    links.push_str("<li><a href=\"/stats\">Build statistics</a></li>\n");
    links.push_str(&format!(
        "<li><a href=\"/dashboard/{role}\">Your {role} dashboard</a></li>\n"
    ));
    links.push_str("<li><a href=\"/download?path=welcome.txt\">Welcome note</a></li>\n");
    links.push_str("<li><a href=\"/signup\">Request an account for a colleague</a></li>\n");
    if role == "admin" {
        links.push_str("<li><a href=\"/download?path=manual.txt\">Operator manual</a></li>\n");
        links.push_str("<li><a href=\"/admin/startSlave\">Start a build agent</a></li>\n");
    }
    SiteResponse::html(
        200,
        page(
            "home",
            &format!(
                "<h2>Signed in with the {role} role</h2>\n\
                 <p>Pick a destination below. Pages you lack permission for are \
                 hidden from this list.</p>\n<ul>\n{links}</ul>"
            ),
        ),
    )
}

fn stats_page() -> SiteResponse {
    SiteResponse::html(
        200,
        page(
            "statistics",
            "<h2>Build statistics</h2>\n\
             <table><tr><th>pipeline</th><th>runs</th><th>green</th></tr>\n\
             <tr><td>core-compile</td><td>412</td><td>401</td></tr>\n\
             <tr><td>integration-suite</td><td>377</td><td>348</td></tr>\n\
             <tr><td>nightly-release</td><td>96</td><td>96</td></tr>\n\
             </table>\n<p>Counters reset at the start of each quarter; the \
             nightly release pipeline has been green since the last reset.</p>",
        ),
    )
}

fn dashboard_page(role: &str) -> SiteResponse {
    let detail = match role {
        "admin" => {
            "Administrator view: fleet capacity planning, account role changes, \
             retention overrides and coordinator upgrade scheduling all start \
             here. Changes are applied immediately and logged to the audit trail."
        }
        "devel" => {
            "Developer view: queue a compile job, inspect your branch pipelines, \
             bisect a red build and download intermediate artifacts of your own \
             jobs. Requests for more agent time go through your team lead."
        }
        _ => {
            "Tester view: browse the matrix of test suites per platform, retry \
             flaky suites, tag regressions and export failure listings for the \
             weekly quality review meeting."
        }
    };
    SiteResponse::html(
        200,
        page(
            &format!("{role} dashboard"),
            &format!("<h2>The {role} dashboard</h2>\n<p>{detail}</p>"),
        ),
    )
}

fn start_slave_page() -> SiteResponse {
    SiteResponse::html(
        200,
        page(
            "agent control",
            "<h2>Start a build agent</h2>\n\
             <p>A warm standby agent has been attached to the worker fleet and \
             will pick up queued jobs within one scheduling cycle. Remember to \
             detach idle agents after the load spike is over; every attached \
             agent consumes a fleet licence seat.</p>",
        ),
    )
}

fn signup_form_page() -> SiteResponse {
    SiteResponse::html(
        200,
        page(
            "request account",
            "<h2>Request a build account</h2>\n\
             <p>Fill in the desired account name and an initial password. A \
             coordinator operator reviews every request before the account can \
             queue jobs, usually within one working day.</p>\n\
             <form action=\"/signup\" method=\"post\">\n\
             <label>Desired account name <input type=\"text\" name=\"username\"></label>\n\
             <label>Initial password <input type=\"password\" name=\"password\"></label>\n\
             <input type=\"submit\" value=\"Submit request\">\n\
             </form>",
        ),
    )
}

fn signup_done_page() -> SiteResponse {
    SiteResponse::html(
        200,
        page(
            "request received",
            "<h2>Your account request was recorded</h2>\n\
             <p>A coordinator operator will review the request and activate the \
             account if it meets the naming policy. You will be able to sign in \
             from the front page once that happens. No further action is needed \
             from your side right now.</p>",
        ),
    )
}

/// Routes one request. `config` selects which vulnerabilities are present.
pub fn respond(req: &SiteRequest, config: &SiteConfig) -> SiteResponse {
    let sid = req.session.clone().unwrap_or_default();
    let owner = session_owner(&sid);
    let role = owner.and_then(role_of);

    match (req.method.as_str(), req.path.as_str()) {
        ("GET", "/") | ("HEAD", "/") => login_page(),
        ("POST", "/login") => {
            if !req.secure && !config.on(Vuln::V2) {
                return error_page(
                    403,
                    "insecure channel",
                    "Sign-in is only accepted over the secure channel. This \
                     port transmits credentials in the clear, so the request \
                     was rejected before checking them.",
                );
            }
            let username = req.form_value("username").unwrap_or_default();
            let password = req.form_value("password").unwrap_or_default();
            let valid = USERS
                .iter()
                .any(|(u, p, _)| *u == username && *p == password);
            if valid {
                let mut resp = SiteResponse::html(
                    302,
                    page(
                        "redirecting",
                        "<p>Sign-in accepted, taking you to your home page.</p>",
                    ),
                );
                resp.location = Some("/home".to_string());
                resp.set_cookie = Some(format!("u-{username}"));
                resp
            } else {
                error_page(
                    403,
                    "sign-in failed",
                    "The account name and password did not match any build \
                     account. Passwords are case-sensitive.",
                )
            }
        }
        ("GET", "/home") | ("HEAD", "/home") => match role {
            Some(r) => home_page(r),
            None => forbidden(),
        },
        ("GET", "/stats") | ("HEAD", "/stats") => match role {
            Some(_) => stats_page(),
            None => forbidden(),
        },
        ("GET", p) | ("HEAD", p) if p.starts_with("/dashboard/") => {
            let wanted = &p["/dashboard/".len()..];
            match role {
                Some(r) if r == wanted => dashboard_page(r),
                _ => forbidden(),
            }
        }
        ("GET", "/admin/startSlave") | ("HEAD", "/admin/startSlave") => {
            let allowed = if config.on(Vuln::V1) {
                role.is_some()
            } else {
                role == Some("admin")
            };
            if allowed {
                start_slave_page()
            } else {
                forbidden()
            }
        }
        ("GET", "/signup") | ("HEAD", "/signup") => signup_form_page(),
        ("POST", "/signup") => {
            let mut resp = signup_done_page();
            if !config.on(Vuln::V4) {
                resp.set_cookie = Some(rotate_session(&sid));
            }
            resp
        }
        ("GET", "/download") | ("HEAD", "/download") => {
            let path = req.query_value("path").unwrap_or_default();
            let allowed = if config.on(Vuln::V3) {
                true
            } else {
                DOWNLOAD_WHITELIST.contains(&path)
            };
            if !allowed {
                return not_found();
            }
            match FILES.iter().find(|(name, _)| *name == path) {
                Some((_, content)) => SiteResponse {
                    status: 200,
                    content_type: "text/plain; charset=utf-8",
                    body: content.as_bytes().to_vec(),
                    set_cookie: None,
                    location: None,
                },
                None => not_found(),
            }
        }
        ("GET", "/echo") | ("HEAD", "/echo") => SiteResponse::html(
            200,
            page(
                "session echo",
                &format!(
                    "<h2>Session diagnostics</h2>\n\
                     <p>This maintenance page reports what the coordinator knows \
                     about the calling session so operators can debug cookie \
                     handling.</p>\n\
                     <p>session-id: <code>{sid}</code></p>\n\
                     <p>account: <code>{}</code></p>",
                    owner.unwrap_or("anonymous")
                ),
            ),
        ),
        (
            _,
            "/" | "/login" | "/home" | "/stats" | "/signup" | "/download" | "/echo"
            | "/admin/startSlave",
        ) => method_not_allowed(),
        (_, p) if p.starts_with("/dashboard/") => method_not_allowed(),
        _ => not_found(),
    }
}
