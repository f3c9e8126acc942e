//! Domain model: users, sessions, actions, input/output sequences and
//! failure records.
//!
//! Everything here serializes with serde so that collected data can be
//! written to a pool directory and reloaded later. Invariants that cannot
//! be expressed in the type system are enforced by constructors.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::ModelError;

/// A system account the toolkit may act as.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: String,
    pub username: String,
    pub password: String,
    pub role: String,
}

impl User {
    pub fn new(username: &str, password: &str, role: &str) -> Self {
        User {
            id: username.to_string(),
            username: username.to_string(),
            password: password.to_string(),
            role: role.to_string(),
        }
    }
}

/// A server-side session, identified by the value of the session cookie.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    /// User that owns the session, if known. Empty-id sessions are anonymous.
    pub owner: Option<String>,
}

impl Session {
    pub fn anonymous() -> Self {
        Session {
            id: String::new(),
            owner: None,
        }
    }

    pub fn is_anonymous(&self) -> bool {
        self.id.is_empty()
    }
}

/// Transport channel of an action. Derived from the URL scheme but kept
/// mutable so relations can force an action onto the plain channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Http,
    Https,
}

impl Channel {
    pub fn scheme(self) -> &'static str {
        match self {
            Channel::Http => "http",
            Channel::Https => "https",
        }
    }

    pub fn from_scheme(scheme: &str) -> Self {
        if scheme.eq_ignore_ascii_case("https") {
            Channel::Https
        } else {
            Channel::Http
        }
    }
}

/// How an action is performed against the system under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionKind {
    Request,
    FormSubmit,
}

/// One recorded interaction: a plain request or a form submission.
///
/// The URL never carries a query string; query parameters live in
/// `query_params` so they can be compared and rewritten positionally.
/// Parameter lists are ordered for execution but compare as multisets.
#[derive(Debug, Clone, Eq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub method: String,
    pub url: Url,
    pub channel: Channel,
    pub query_params: Vec<(String, String)>,
    pub form_data: Vec<(String, String)>,
    /// Locator of the page element that produced this action, when crawled.
    pub element_locator: Option<String>,
    /// Session under which the action was recorded.
    pub session: Session,
    /// Id of the user the action was recorded for, if any.
    pub user: Option<String>,
    pub is_login: bool,
    pub is_signup: bool,
    /// Extra request headers (set by manual scripts).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub headers: Vec<(String, String)>,
}

impl Action {
    /// Builds a plain request action. The query string of `url` is split
    /// off into `query_params`.
    pub fn request(method: &str, url: &str) -> Result<Self, ModelError> {
        let (url, query) = split_query(url)?;
        Ok(Action {
            kind: ActionKind::Request,
            method: method.to_ascii_uppercase(),
            channel: Channel::from_scheme(url.scheme()),
            url,
            query_params: query,
            form_data: Vec::new(),
            element_locator: None,
            session: Session::anonymous(),
            user: None,
            is_login: false,
            is_signup: false,
            headers: Vec::new(),
        })
    }

    /// Builds a form submission carrying `form_data`.
    pub fn form_submit(
        method: &str,
        url: &str,
        form_data: Vec<(String, String)>,
    ) -> Result<Self, ModelError> {
        let mut action = Action::request(method, url)?;
        action.kind = ActionKind::FormSubmit;
        action.form_data = form_data;
        Ok(action)
    }

    /// Marks the action as a login or signup submission. The two flags are
    /// mutually exclusive; signup wins when both patterns match upstream.
    pub fn set_auth_flags(&mut self, is_login: bool, is_signup: bool) -> Result<(), ModelError> {
        if is_login && is_signup {
            return Err(ModelError::LoginSignupOverlap);
        }
        self.is_login = is_login;
        self.is_signup = is_signup;
        Ok(())
    }

    /// Moves the action onto another channel. Only the URL scheme is
    /// rewritten; host, port, path and parameters stay untouched.
    pub fn set_channel(&mut self, channel: Channel) {
        self.channel = channel;
        // Both schemes are "special" in the URL standard, so this cannot
        // fail for http(s) URLs.
        let _ = self.url.set_scheme(channel.scheme());
    }

    /// Query parameters followed by form fields, in recorded order.
    pub fn all_params(&self) -> Vec<(String, String)> {
        let mut out = self.query_params.clone();
        out.extend(self.form_data.iter().cloned());
        out
    }

    pub fn param_count(&self) -> usize {
        self.query_params.len() + self.form_data.len()
    }

    /// Rewrites the value of the 1-based `pos`th parameter, counting query
    /// parameters first and form fields after them.
    pub fn set_param_value(&mut self, pos: usize, value: &str) -> Result<(), ModelError> {
        if pos == 0 || pos > self.param_count() {
            return Err(ModelError::Url(format!(
                "parameter position {pos} out of range 1..={}",
                self.param_count()
            )));
        }
        let idx = pos - 1;
        let slot = if idx < self.query_params.len() {
            &mut self.query_params[idx]
        } else {
            &mut self.form_data[idx - self.query_params.len()]
        };
        slot.1 = value.to_string();
        Ok(())
    }

    /// URL without query string, used for reachability checks and request
    /// fingerprints.
    pub fn normalized_url(&self) -> String {
        let mut u = self.url.clone();
        u.set_query(None);
        u.set_fragment(None);
        u.to_string()
    }
}

fn split_query(raw: &str) -> Result<(Url, Vec<(String, String)>), ModelError> {
    let mut url = Url::parse(raw).map_err(|e| ModelError::Url(format!("{raw}: {e}")))?;
    if url.cannot_be_a_base() {
        return Err(ModelError::Url(format!("{raw}: not an absolute http url")));
    }
    let query = url
        .query_pairs()
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect();
    url.set_query(None);
    url.set_fragment(None);
    Ok((url, query))
}

fn multiset(params: &[(String, String)]) -> Vec<&(String, String)> {
    let mut v: Vec<&(String, String)> = params.iter().collect();
    v.sort();
    v
}

impl PartialEq for Action {
    /// Parameter lists compare as (name, value) multisets; everything else
    /// compares structurally. Recorded headers and locators are metadata
    /// and do not participate.
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.method == other.method
            && self.url == other.url
            && self.channel == other.channel
            && multiset(&self.query_params) == multiset(&other.query_params)
            && multiset(&self.form_data) == multiset(&other.form_data)
            && self.is_login == other.is_login
            && self.is_signup == other.is_signup
    }
}

/// Where an input sequence came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Crawled,
    Script,
    FollowUp,
}

/// An ordered, replayable list of actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSequence {
    pub id: String,
    pub actions: Vec<Action>,
    pub provenance: Provenance,
    /// Source sequence this one was derived from. Required for follow-ups.
    pub parent: Option<String>,
}

impl InputSequence {
    pub fn new(
        id: &str,
        actions: Vec<Action>,
        provenance: Provenance,
        parent: Option<String>,
    ) -> Result<Self, ModelError> {
        if actions.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        if provenance == Provenance::FollowUp && parent.is_none() {
            return Err(ModelError::MissingParent);
        }
        Ok(InputSequence {
            id: id.to_string(),
            actions,
            provenance,
            parent,
        })
    }

    /// Structural equality over the actions alone: ids and provenance are
    /// bookkeeping, two sequences performing the same requests are equal.
    pub fn content_eq(&self, other: &Self) -> bool {
        self.actions == other.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// One observed response page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub body: Vec<u8>,
    /// HTTP status, or 0 for a transport error (unreachable host, timeout).
    pub status: u16,
    /// Session cookie value in effect after this response; empty if none.
    pub session_id: String,
    pub content_type: String,
    /// URL the response was finally served from, after redirects.
    pub final_url: String,
}

impl Page {
    pub fn new(
        body: Vec<u8>,
        status: u16,
        session_id: &str,
        content_type: &str,
        final_url: &str,
    ) -> Result<Self, ModelError> {
        if status != 0 && !(100..=599).contains(&status) {
            return Err(ModelError::StatusRange(status));
        }
        Ok(Page {
            body,
            status,
            session_id: session_id.to_string(),
            content_type: content_type.to_string(),
            final_url: final_url.to_string(),
        })
    }

    /// Synthetic page recorded when the transport layer failed.
    pub fn transport_error(url: &str, session_id: &str) -> Self {
        Page {
            body: Vec::new(),
            status: 0,
            session_id: session_id.to_string(),
            content_type: String::new(),
            final_url: url.to_string(),
        }
    }

    pub fn body_text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

/// The pages produced by executing one input sequence, one per action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSequence {
    /// Id of the executed input sequence.
    pub input: String,
    pub pages: Vec<Page>,
}

/// Identity of an HTTP request for failure deduplication: method, URL
/// without query, and the sorted parameter multiset (query and form).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RequestFingerprint {
    pub method: String,
    pub url: String,
    pub params: Vec<(String, String)>,
}

impl RequestFingerprint {
    pub fn of(action: &Action) -> Self {
        let mut params = action.all_params();
        params.sort();
        RequestFingerprint {
            method: action.method.clone(),
            url: action.normalized_url(),
            params,
        }
    }
}

/// A reported relation violation with everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    /// Qualified name of the violated relation.
    pub relation: String,
    pub source_inputs: Vec<InputSequence>,
    pub follow_up_inputs: Vec<InputSequence>,
    pub outputs: Vec<OutputSequence>,
    /// Provider view offset per input type at the failing run.
    pub view_indices: BTreeMap<String, usize>,
    /// Requests of this failure not seen in previously reported failures.
    /// Never empty: failures without novel requests are deduplicated away.
    pub novel_requests: BTreeSet<RequestFingerprint>,
}

impl FailureRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        relation: &str,
        source_inputs: Vec<InputSequence>,
        follow_up_inputs: Vec<InputSequence>,
        outputs: Vec<OutputSequence>,
        view_indices: BTreeMap<String, usize>,
        novel_requests: BTreeSet<RequestFingerprint>,
    ) -> Option<Self> {
        if novel_requests.is_empty() {
            return None;
        }
        Some(FailureRecord {
            relation: relation.to_string(),
            source_inputs,
            follow_up_inputs,
            outputs,
            view_indices,
            novel_requests,
        })
    }
}
