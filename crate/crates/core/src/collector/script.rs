//! Ingestion of manually written test scripts. A script is a line-oriented
//! description of a browsing session; it is replayed live against the
//! target while it is parsed, so `click` and `submit` can resolve their
//! selectors against the page the preceding actions actually produce.
//!
//! Verbs:
//!
//! ```text
//! user <name>             attribute the script to a configured user
//! header <Name>: <value>  send this header on every following request
//! visit <url-or-path>     GET a page (paths resolve against the base URL)
//! fill <name>=<value> ... stage form values for the next submit
//! click <selector>        follow an anchor of the current page, e.g. a[2]
//! submit [selector]       submit a form of the current page, default form[1]
//! # ...                   comment
//! ```

use url::Url;

use crate::collector::html;
use crate::config::{DetectionRules, TargetConfig};
use crate::error::ScriptError;
use crate::executor::SequenceExecutor;
use crate::model::{Action, ActionKind, InputSequence, OutputSequence, Page, Provenance, User};

/// A replayed script: the derived sequence, its recorded output, and the
/// user it ran as (when the script named one).
#[derive(Debug)]
pub struct ScriptIngest {
    pub owner: Option<String>,
    pub sequence: InputSequence,
    pub output: OutputSequence,
}

fn malformed(line: usize, message: impl Into<String>) -> ScriptError {
    ScriptError::Malformed {
        line,
        message: message.into(),
    }
}

/// Parses and replays `text`, returning the sequence under id `id`.
pub fn ingest(
    config: &TargetConfig,
    executor: &dyn SequenceExecutor,
    id: &str,
    text: &str,
) -> Result<ScriptIngest, ScriptError> {
    let rules = config.rules()?;
    let mut run = Run {
        config,
        executor,
        rules,
        owner: None,
        headers: Vec::new(),
        pending: Vec::new(),
        pending_line: 0,
        actions: Vec::new(),
        probes: 0,
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = raw.trim();
        if stripped.is_empty() || stripped.starts_with('#') {
            continue;
        }
        let (verb, rest) = match stripped.split_once(char::is_whitespace) {
            Some((v, r)) => (v, r.trim()),
            None => (stripped, ""),
        };
        match verb {
            "user" => run.set_user(line, rest)?,
            "header" => run.add_header(line, rest)?,
            "visit" => run.visit(line, rest)?,
            "fill" => run.fill(line, rest)?,
            "click" => run.click(line, rest)?,
            "submit" => run.submit(line, rest)?,
            _ => {
                return Err(ScriptError::UnknownVerb {
                    line,
                    verb: verb.to_string(),
                })
            }
        }
    }

    if !run.pending.is_empty() {
        return Err(malformed(run.pending_line, "fill without a following submit"));
    }
    if run.actions.is_empty() {
        return Err(ScriptError::Empty);
    }
    let owner = run.owner.map(|u| u.username);
    let sequence = InputSequence::new(id, run.actions, Provenance::Script, None)?;
    let output = executor.execute(&sequence, true);
    Ok(ScriptIngest {
        owner,
        sequence,
        output,
    })
}

struct Run<'a> {
    config: &'a TargetConfig,
    executor: &'a dyn SequenceExecutor,
    rules: DetectionRules,
    owner: Option<User>,
    headers: Vec<(String, String)>,
    pending: Vec<(String, String)>,
    pending_line: usize,
    actions: Vec<Action>,
    probes: usize,
}

impl Run<'_> {
    fn set_user(&mut self, line: usize, rest: &str) -> Result<(), ScriptError> {
        if rest.is_empty() {
            return Err(malformed(line, "user takes a username"));
        }
        let user = self
            .config
            .users()
            .into_iter()
            .find(|u| u.username == rest)
            .ok_or_else(|| malformed(line, format!("no credentials for user {rest}")))?;
        self.owner = Some(user);
        Ok(())
    }

    fn add_header(&mut self, line: usize, rest: &str) -> Result<(), ScriptError> {
        let (name, value) = rest
            .split_once(':')
            .ok_or_else(|| malformed(line, "header takes `Name: value`"))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(malformed(line, "header name is empty"));
        }
        self.headers
            .push((name.to_string(), value.trim().to_string()));
        Ok(())
    }

    fn visit(&mut self, line: usize, rest: &str) -> Result<(), ScriptError> {
        if rest.is_empty() {
            return Err(malformed(line, "visit takes a URL or path"));
        }
        let base = match self.actions.is_empty() {
            true => Url::parse(&self.config.base_url),
            false => self.current_page(line)?.final_url.parse(),
        }
        .map_err(|e| malformed(line, format!("no base URL to resolve against: {e}")))?;
        let url = base
            .join(rest)
            .map_err(|e| malformed(line, format!("bad URL {rest:?}: {e}")))?;
        let mut action = Action::request("GET", url.as_str())?;
        let is_login = self.rules.login_url.is_match(url.as_str());
        let is_signup = self.rules.signup_url.is_match(url.as_str());
        action.set_auth_flags(is_login && !is_signup, is_signup)?;
        self.push(action);
        Ok(())
    }

    fn fill(&mut self, line: usize, rest: &str) -> Result<(), ScriptError> {
        if rest.is_empty() {
            return Err(malformed(line, "fill takes `name=value` pairs"));
        }
        for token in rest.split_whitespace() {
            let (name, value) = token
                .split_once('=')
                .ok_or_else(|| malformed(line, format!("fill pair {token:?} lacks `=`")))?;
            self.pending.push((name.to_string(), value.to_string()));
        }
        self.pending_line = line;
        Ok(())
    }

    fn click(&mut self, line: usize, rest: &str) -> Result<(), ScriptError> {
        if rest.is_empty() {
            return Err(malformed(line, "click takes a selector, e.g. a[1]"));
        }
        if !self.pending.is_empty() {
            return Err(malformed(line, "pending fill values; submit them first"));
        }
        let action = self.element(line, rest)?;
        self.push(action);
        Ok(())
    }

    fn submit(&mut self, line: usize, rest: &str) -> Result<(), ScriptError> {
        let selector = if rest.is_empty() { "form[1]" } else { rest };
        let mut action = self.element(line, selector)?;
        for (name, value) in self.pending.drain(..) {
            set_field(&mut action, &name, &value);
        }
        self.push(action);
        Ok(())
    }

    /// Replays the actions so far and extracts the element `selector`
    /// refers to from the page they land on.
    fn element(&mut self, line: usize, selector: &str) -> Result<Action, ScriptError> {
        let page = self.current_page(line)?;
        let base = Url::parse(&page.final_url)
            .map_err(|e| malformed(line, format!("current page has no usable URL: {e}")))?;
        let anonymous = User::new("", "", "");
        let user = self.owner.as_ref().unwrap_or(&anonymous);
        let candidates = html::extract_actions(
            &page.body_text(),
            &base,
            user,
            &self.rules,
            &self.config.forms,
        );
        candidates
            .into_iter()
            .find(|a| a.element_locator.as_deref() == Some(selector))
            .ok_or_else(|| malformed(line, format!("no element {selector} on the current page")))
    }

    fn current_page(&mut self, line: usize) -> Result<Page, ScriptError> {
        if self.actions.is_empty() {
            return Err(malformed(line, "no current page; visit one first"));
        }
        self.probes += 1;
        let seq = InputSequence::new(
            &format!("script-probe-{}", self.probes),
            self.actions.clone(),
            Provenance::Script,
            None,
        )?;
        let output = self.executor.execute(&seq, true);
        let page = output
            .pages
            .last()
            .filter(|p| p.status != 0)
            .cloned()
            .ok_or_else(|| malformed(line, "current page did not load"))?;
        Ok(page)
    }

    fn push(&mut self, mut action: Action) {
        action.headers = self.headers.clone();
        action.user = self.owner.as_ref().map(|u| u.username.clone());
        self.actions.push(action);
    }
}

/// Sets a form or query parameter by name, appending when the page did
/// not declare the field.
fn set_field(action: &mut Action, name: &str, value: &str) {
    let slot = action
        .form_data
        .iter_mut()
        .chain(action.query_params.iter_mut())
        .find(|(n, _)| n == name);
    match slot {
        Some(pair) => pair.1 = value.to_string(),
        None if action.kind == ActionKind::FormSubmit => {
            action.form_data.push((name.to_string(), value.to_string()))
        }
        None => action
            .query_params
            .push((name.to_string(), value.to_string())),
    }
}
