//! Candidate-action extraction from HTML pages. A deliberately small
//! regex-based reader: anchors become GET requests, forms become
//! submissions with their fields filled by type and by the credential
//! patterns of the target config.

use std::sync::OnceLock;

use regex::Regex;
use url::Url;

use crate::config::{DetectionRules, FormDefaults};
use crate::model::{Action, User};

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static pattern compiles"))
}

fn anchor_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(&RE, r"(?is)<a\b[^>]*>")
}

fn form_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(&RE, r"(?is)<form\b[^>]*>.*?</form>")
}

fn input_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(&RE, r"(?is)<input\b[^>]*>")
}

fn select_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(&RE, r"(?is)<select\b[^>]*>.*?</select>")
}

fn option_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(&RE, r"(?is)<option\b[^>]*>")
}

fn textarea_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(&RE, r"(?is)<textarea\b[^>]*>(.*?)</textarea>")
}

fn attr_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(
        &RE,
        r#"(?is)([a-z][a-z0-9-]*)\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s>]+))"#,
    )
}

/// Attribute values of one opening tag, lowercased keys, first wins.
fn attrs(tag: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    for cap in attr_re().captures_iter(tag) {
        let key = cap[1].to_ascii_lowercase();
        let value = cap
            .get(2)
            .or_else(|| cap.get(3))
            .or_else(|| cap.get(4))
            .map(|m| m.as_str().to_string())
            .unwrap_or_default();
        if !out.iter().any(|(k, _)| *k == key) {
            out.push((key, value));
        }
    }
    out
}

fn attr(tag: &str, name: &str) -> Option<String> {
    attrs(tag).into_iter().find(|(k, _)| k == name).map(|(_, v)| v)
}

#[derive(Debug, Clone)]
struct Field {
    name: String,
    kind: String,
    value: Option<String>,
}

fn form_fields(form_html: &str) -> Vec<Field> {
    // Fields keep document order across the three element kinds, so
    // replayed submissions match what a browser would send.
    let mut fields: Vec<(usize, Field)> = Vec::new();
    for m in input_re().find_iter(form_html) {
        let tag = m.as_str();
        let Some(name) = attr(tag, "name") else { continue };
        fields.push((
            m.start(),
            Field {
                name,
                kind: attr(tag, "type").unwrap_or_else(|| "text".into()).to_ascii_lowercase(),
                value: attr(tag, "value"),
            },
        ));
    }
    for m in select_re().find_iter(form_html) {
        let select = m.as_str();
        let open_end = select.find('>').map(|i| i + 1).unwrap_or(select.len());
        let Some(name) = attr(&select[..open_end], "name") else { continue };
        let value = option_re()
            .find(select)
            .and_then(|o| attr(o.as_str(), "value"));
        fields.push((
            m.start(),
            Field {
                name,
                kind: "select".into(),
                value,
            },
        ));
    }
    for cap in textarea_re().captures_iter(form_html) {
        let whole = cap.get(0).expect("match exists");
        let open = whole.as_str();
        let open_end = open.find('>').map(|i| i + 1).unwrap_or(open.len());
        let Some(name) = attr(&open[..open_end], "name") else { continue };
        fields.push((
            whole.start(),
            Field {
                name,
                kind: "textarea".into(),
                value: cap.get(1).map(|m| m.as_str().trim().to_string()),
            },
        ));
    }
    fields.sort_by_key(|(offset, _)| *offset);
    fields.into_iter().map(|(_, f)| f).collect()
}

/// Fills one field. Credential patterns win on login and signup forms;
/// otherwise explicit values are kept and empty ones take the defaults
/// for their type.
fn fill_field(
    field: &Field,
    credentials: bool,
    user: &User,
    rules: &DetectionRules,
    defaults: &FormDefaults,
) -> Option<(String, String)> {
    match field.kind.as_str() {
        "submit" | "button" | "image" | "reset" => {
            let v = field.value.clone()?;
            return Some((field.name.clone(), v));
        }
        "checkbox" => {
            if !defaults.check_boxes {
                return None;
            }
            return Some((
                field.name.clone(),
                field.value.clone().unwrap_or_else(|| "on".into()),
            ));
        }
        _ => {}
    }
    if credentials && rules.password_field.is_match(&field.name) {
        return Some((field.name.clone(), user.password.clone()));
    }
    if credentials && rules.username_field.is_match(&field.name) {
        return Some((field.name.clone(), user.username.clone()));
    }
    if let Some(v) = &field.value {
        if !v.is_empty() {
            return Some((field.name.clone(), v.clone()));
        }
    }
    let filled = match field.kind.as_str() {
        "email" => defaults.email.clone(),
        "number" => defaults.number.clone(),
        "password" => user.password.clone(),
        "hidden" => String::new(),
        _ => defaults.text.clone(),
    };
    Some((field.name.clone(), filled))
}

fn resolve(base: &Url, raw: &str) -> Option<Url> {
    let joined = base.join(raw).ok()?;
    if !matches!(joined.scheme(), "http" | "https") {
        return None;
    }
    // Stay on the target: links to other hosts are not candidates.
    if joined.host_str() != base.host_str() {
        return None;
    }
    Some(joined)
}

/// Extracts candidate actions from an HTML body in document order:
/// same-host anchors as GET requests and forms as submissions, pre-filled
/// for `user`. Element locators record the 1-based document position per
/// element kind (`a[2]`, `form[1]`).
pub fn extract_actions(
    html: &str,
    base: &Url,
    user: &User,
    rules: &DetectionRules,
    defaults: &FormDefaults,
) -> Vec<Action> {
    let mut found: Vec<(usize, Action)> = Vec::new();

    for (i, m) in anchor_re().find_iter(html).enumerate() {
        let Some(href) = attr(m.as_str(), "href") else { continue };
        let Some(url) = resolve(base, &href) else { continue };
        let Ok(mut action) = Action::request("GET", url.as_str()) else { continue };
        action.element_locator = Some(format!("a[{}]", i + 1));
        action.user = Some(user.username.clone());
        found.push((m.start(), action));
    }

    for (i, m) in form_re().find_iter(html).enumerate() {
        let form_html = m.as_str();
        let open_end = form_html.find('>').map(|x| x + 1).unwrap_or(form_html.len());
        let open_tag = &form_html[..open_end];
        let target = attr(open_tag, "action").unwrap_or_default();
        let target = if target.is_empty() { base.as_str().to_string() } else { target };
        let Some(url) = resolve(base, &target) else { continue };
        let method = attr(open_tag, "method")
            .unwrap_or_else(|| "GET".into())
            .to_ascii_uppercase();

        let is_login = rules.login_url.is_match(url.as_str());
        let is_signup = rules.signup_url.is_match(url.as_str());
        let credentials = is_login;
        let fields: Vec<(String, String)> = form_fields(form_html)
            .iter()
            .filter_map(|f| fill_field(f, credentials, user, rules, defaults))
            .collect();

        let action = if method == "GET" {
            // A GET form encodes its fields as query parameters.
            let mut with_query = url.clone();
            with_query.query_pairs_mut().clear().extend_pairs(&fields);
            Action::request("GET", with_query.as_str())
        } else {
            Action::form_submit(&method, url.as_str(), fields)
        };
        let Ok(mut action) = action else { continue };
        action.element_locator = Some(format!("form[{}]", i + 1));
        action.user = Some(user.username.clone());
        // Registration wins when a URL matches both patterns.
        let ok = if is_signup {
            action.set_auth_flags(false, true)
        } else {
            action.set_auth_flags(is_login, false)
        };
        if ok.is_err() {
            continue;
        }
        found.push((m.start(), action));
    }

    found.sort_by_key(|(pos, _)| *pos);
    found.into_iter().map(|(_, a)| a).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Detection, TargetConfig};

    fn setup() -> (Url, User, DetectionRules, FormDefaults) {
        let base = Url::parse("https://127.0.0.1:8443/home").unwrap();
        let user = User::new("tester", "tester-pw-1", "tester");
        let rules = DetectionRules::compile(&Detection::default()).unwrap();
        (base, user, rules, FormDefaults::default())
    }

    #[test]
    fn anchors_resolve_and_keep_document_order() {
        let (base, user, rules, defaults) = setup();
        let html = r#"
            <p><a href="/stats">stats</a></p>
            <a href='https://127.0.0.1:8443/dashboard/tester'>dash</a>
            <a href="https://other.example/evil">offsite</a>
            <a href="mailto:x@example.com">mail</a>
        "#;
        let actions = extract_actions(html, &base, &user, &rules, &defaults);
        assert_eq!(actions.len(), 2);
        assert_eq!(actions[0].url.as_str(), "https://127.0.0.1:8443/stats");
        assert_eq!(actions[0].element_locator.as_deref(), Some("a[1]"));
        assert_eq!(actions[1].url.path(), "/dashboard/tester");
        assert_eq!(actions[1].element_locator.as_deref(), Some("a[2]"));
    }

    #[test]
    fn login_forms_take_the_credentials() {
        let (base, user, rules, defaults) = setup();
        let html = r#"
            <form action="/login" method="post">
              <input type="text" name="username">
              <input type="password" name="password">
              <input type="submit" value="go">
            </form>
        "#;
        let actions = extract_actions(html, &base, &user, &rules, &defaults);
        assert_eq!(actions.len(), 1);
        let a = &actions[0];
        assert_eq!(a.method, "POST");
        assert!(a.is_login);
        assert!(!a.is_signup);
        assert_eq!(
            a.form_data,
            vec![
                ("username".to_string(), "tester".to_string()),
                ("password".to_string(), "tester-pw-1".to_string()),
            ]
        );
    }

    #[test]
    fn signup_forms_use_defaults_not_credentials() {
        let (base, user, rules, defaults) = setup();
        let html = r#"
            <form action="/signup" method="POST">
              <input name="username">
              <input type="password" name="password">
              <input type="email" name="email">
            </form>
        "#;
        let actions = extract_actions(html, &base, &user, &rules, &defaults);
        assert_eq!(actions.len(), 1);
        let a = &actions[0];
        assert!(a.is_signup);
        assert!(!a.is_login);
        let username = a.form_data.iter().find(|(k, _)| k == "username").unwrap();
        assert_eq!(username.1, "test");
        let email = a.form_data.iter().find(|(k, _)| k == "email").unwrap();
        assert_eq!(email.1, "test@example.com");
    }

    #[test]
    fn get_forms_become_query_requests() {
        let (base, user, rules, defaults) = setup();
        let html = r#"
            <form action="/download">
              <input type="hidden" name="path" value="welcome.txt">
            </form>
        "#;
        let actions = extract_actions(html, &base, &user, &rules, &defaults);
        assert_eq!(actions.len(), 1);
        let a = &actions[0];
        assert_eq!(a.method, "GET");
        assert_eq!(a.kind, crate::model::ActionKind::Request);
        assert_eq!(a.normalized_url(), "https://127.0.0.1:8443/download");
        assert_eq!(
            a.query_params,
            vec![("path".to_string(), "welcome.txt".to_string())]
        );
    }

    #[test]
    fn mixed_fields_selects_textareas_and_checkboxes() {
        let (base, user, rules, defaults) = setup();
        let html = r#"
            <form action="/profile" method="post">
              <select name="color"><option value="red">red</option><option value="blue">b</option></select>
              <textarea name="bio">hello</textarea>
              <input type="checkbox" name="notify">
              <input type="number" name="age">
            </form>
        "#;
        let actions = extract_actions(html, &base, &user, &rules, &defaults);
        assert_eq!(actions.len(), 1);
        assert_eq!(
            actions[0].form_data,
            vec![
                ("color".to_string(), "red".to_string()),
                ("bio".to_string(), "hello".to_string()),
                ("notify".to_string(), "on".to_string()),
                ("age".to_string(), "1".to_string()),
            ]
        );
    }

    #[test]
    fn fixture_config_patterns_drive_filling() {
        let config = TargetConfig::for_tests("https://127.0.0.1:8443/");
        let rules = config.rules().unwrap();
        let user = config.users().remove(2);
        assert_eq!(user.username, "tester");
        let base = Url::parse("https://127.0.0.1:8443/").unwrap();
        let html = r#"<form action="/login" method="post">
            <input name="username"><input type="password" name="password"></form>"#;
        let actions = extract_actions(html, &base, &user, &rules, &config.forms);
        assert_eq!(actions[0].form_data[0].1, "tester");
        assert_eq!(actions[0].form_data[1].1, "tester-pw-1");
    }
}
