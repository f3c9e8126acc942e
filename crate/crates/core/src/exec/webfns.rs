//! Web-specific functions callable from relations. Each either inspects
//! collected data (reachability, supervision, error pages) or derives a
//! follow-up input from a source input.

use url::Url;

use crate::error::EvalError;
use crate::exec::context::ExecutionContext;
use crate::exec::value::{ActionView, Value};
use crate::model::{Action, Channel, InputSequence, Page, Provenance, User};

pub fn call(
    ctx: &mut ExecutionContext<'_>,
    name: &str,
    args: Vec<Value>,
) -> Result<Value, EvalError> {
    match name {
        "changeCredentials" => change_credentials(ctx, args),
        "copyActionTo" => copy_action_to(ctx, args),
        "cannotReachThroughGUI" => cannot_reach_through_gui(ctx, args),
        "isSupervisorOf" => is_supervisor_of(ctx, args),
        "isLogin" => action_flag(args, "isLogin", |v| v.action.is_login),
        "afterLogin" => action_flag(args, "afterLogin", |v| v.after_login),
        "isSignup" => action_flag(args, "isSignup", |v| v.action.is_signup),
        "isError" => is_error(ctx, args),
        "userCanRetrieveContent" => user_can_retrieve_content(ctx, args),
        "setChannel" => set_channel(ctx, args),
        "setParameterValue" => set_parameter_value(ctx, args),
        "parameterCount" => {
            let [v] = take::<1>(args, "parameterCount")?;
            Ok(Value::Int(as_action(v, "parameterCount")?.action.param_count() as i64))
        }
        "sessionIdOf" => {
            let [v] = take::<1>(args, "sessionIdOf")?;
            Ok(Value::Str(as_page(v, "sessionIdOf")?.session_id))
        }
        other => Err(EvalError::UnknownFunction(other.to_string())),
    }
}

fn take<const N: usize>(args: Vec<Value>, name: &str) -> Result<[Value; N], EvalError> {
    let got = args.len();
    args.try_into()
        .map_err(|_| EvalError::Unsupported(format!("{name} takes {N} arguments, got {got}")))
}

fn kind_err(context: &str, expected: &str, got: &Value) -> EvalError {
    EvalError::Kind {
        context: context.to_string(),
        expected: expected.to_string(),
        got: got.kind().to_string(),
    }
}

fn as_input(v: Value, context: &str) -> Result<InputSequence, EvalError> {
    match v {
        Value::Input(seq) => Ok(seq),
        other => Err(kind_err(context, "input sequence", &other)),
    }
}

fn as_user(v: Value, context: &str) -> Result<User, EvalError> {
    match v {
        Value::User(u) => Ok(u),
        other => Err(kind_err(context, "user", &other)),
    }
}

fn as_action(v: Value, context: &str) -> Result<ActionView, EvalError> {
    match v {
        Value::Action(a) => Ok(a),
        other => Err(kind_err(context, "action", &other)),
    }
}

fn as_page(v: Value, context: &str) -> Result<Page, EvalError> {
    match v {
        Value::Page(p) => Ok(p),
        other => Err(kind_err(context, "page", &other)),
    }
}

fn as_int(v: Value, context: &str) -> Result<i64, EvalError> {
    match v {
        Value::Int(n) => Ok(n),
        other => Err(kind_err(context, "integer", &other)),
    }
}

fn as_str(v: Value, context: &str) -> Result<String, EvalError> {
    match v {
        Value::Str(s) => Ok(s),
        other => Err(kind_err(context, "string", &other)),
    }
}

fn follow_up(
    ctx: &mut ExecutionContext<'_>,
    parent: &InputSequence,
    actions: Vec<Action>,
) -> Result<Value, EvalError> {
    let id = ctx.next_follow_up_id();
    let seq = InputSequence::new(&id, actions, Provenance::FollowUp, Some(parent.id.clone()))?;
    Ok(Value::Input(seq))
}

fn action_flag(
    args: Vec<Value>,
    name: &str,
    f: impl Fn(&ActionView) -> bool,
) -> Result<Value, EvalError> {
    let [v] = take::<1>(args, name)?;
    Ok(Value::Bool(f(&as_action(v, name)?)))
}

/// Rewrites the credential fields of every login submission in the
/// sequence to those of `user`. Sequences without a login submission come
/// back content-identical.
fn change_credentials(
    ctx: &mut ExecutionContext<'_>,
    args: Vec<Value>,
) -> Result<Value, EvalError> {
    let [seq, user] = take::<2>(args, "changeCredentials")?;
    let seq = as_input(seq, "changeCredentials")?;
    let user = as_user(user, "changeCredentials")?;
    let mut actions = seq.actions.clone();
    for action in actions.iter_mut().filter(|a| a.is_login) {
        for params in [&mut action.form_data, &mut action.query_params] {
            for (field, value) in params.iter_mut() {
                if ctx.rules.password_field.is_match(field) {
                    *value = user.password.clone();
                } else if ctx.rules.username_field.is_match(field) {
                    *value = user.username.clone();
                }
            }
        }
    }
    follow_up(ctx, &seq, actions)
}

/// Copies the action at 1-based position `from` so that it also runs at
/// position `to`, shifting later actions down.
fn copy_action_to(ctx: &mut ExecutionContext<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let [seq, from, to] = take::<3>(args, "copyActionTo")?;
    let seq = as_input(seq, "copyActionTo")?;
    let from = as_int(from, "copyActionTo")?;
    let to = as_int(to, "copyActionTo")?;
    let len = seq.actions.len() as i64;
    if from < 1 || from > len {
        return Err(EvalError::Index(format!(
            "copyActionTo: source position {from} outside 1..={len}"
        )));
    }
    if to < 1 || to > len + 1 {
        return Err(EvalError::Index(format!(
            "copyActionTo: target position {to} outside 1..={}",
            len + 1
        )));
    }
    let mut actions = seq.actions.clone();
    let copied = actions[(from - 1) as usize].clone();
    actions.insert((to - 1) as usize, copied);
    follow_up(ctx, &seq, actions)
}

fn normalize_url(raw: &str) -> String {
    match Url::parse(raw) {
        Ok(mut u) => {
            u.set_query(None);
            u.set_fragment(None);
            u.to_string()
        }
        Err(_) => raw.to_string(),
    }
}

/// True when `url` appears on no page the user can navigate to.
fn cannot_reach_through_gui(
    ctx: &mut ExecutionContext<'_>,
    args: Vec<Value>,
) -> Result<Value, EvalError> {
    let [user, url] = take::<2>(args, "cannotReachThroughGUI")?;
    let user = as_user(user, "cannotReachThroughGUI")?;
    let url = normalize_url(&as_str(url, "cannotReachThroughGUI")?);
    let reachable = ctx.pool.reachable_urls(&user.username);
    Ok(Value::Bool(!reachable.contains(&url)))
}

/// Supervision comes from the config when declared; otherwise a user
/// supervises another when their navigable URLs are a superset.
fn is_supervisor_of(ctx: &mut ExecutionContext<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let [a, b] = take::<2>(args, "isSupervisorOf")?;
    let a = as_user(a, "isSupervisorOf")?;
    let b = as_user(b, "isSupervisorOf")?;
    if let Some(supervision) = &ctx.config.supervision {
        let pair = (a.username.clone(), b.username.clone());
        return Ok(Value::Bool(supervision.pairs.contains(&pair)));
    }
    let of_a = ctx.pool.reachable_urls(&a.username);
    let of_b = ctx.pool.reachable_urls(&b.username);
    Ok(Value::Bool(of_b.is_subset(&of_a)))
}

/// A page is an error when the transport failed, the status is 4xx/5xx,
/// or the body matches a configured error pattern.
fn is_error(ctx: &mut ExecutionContext<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    let [page] = take::<1>(args, "isError")?;
    let page = as_page(page, "isError")?;
    if page.status == 0 || page.status >= 400 {
        return Ok(Value::Bool(true));
    }
    let text = page.body_text();
    Ok(Value::Bool(
        ctx.rules.error_regexes.iter().any(|re| re.is_match(&text)),
    ))
}

/// True when some page collected for the user is equal to `page`, i.e.
/// the content is part of what the user may legitimately see.
fn user_can_retrieve_content(
    ctx: &mut ExecutionContext<'_>,
    args: Vec<Value>,
) -> Result<Value, EvalError> {
    let [user, page] = take::<2>(args, "userCanRetrieveContent")?;
    let user = as_user(user, "userCanRetrieveContent")?;
    let page = as_page(page, "userCanRetrieveContent")?;
    let ok = ctx
        .pool
        .pages_for(&user.username)
        .iter()
        .any(|candidate| ctx.pages_equal(candidate, &page));
    Ok(Value::Bool(ok))
}

fn parse_channel(s: &str) -> Result<Channel, EvalError> {
    match s {
        "http" => Ok(Channel::Http),
        "https" => Ok(Channel::Https),
        other => Err(EvalError::Unsupported(format!(
            "setChannel: unknown channel {other:?}, expected \"http\" or \"https\""
        ))),
    }
}

/// Two forms: `setChannel(action, channel)` rewrites a single action,
/// `setChannel(input, position, channel)` derives a follow-up sequence
/// with the action at 1-based `position` moved to the channel.
fn set_channel(ctx: &mut ExecutionContext<'_>, args: Vec<Value>) -> Result<Value, EvalError> {
    match args.first() {
        Some(Value::Action(_)) => {
            let [action, channel] = take::<2>(args, "setChannel")?;
            let mut view = as_action(action, "setChannel")?;
            let channel = parse_channel(&as_str(channel, "setChannel")?)?;
            view.action.set_channel(channel);
            Ok(Value::Action(view))
        }
        _ => {
            let [seq, pos, channel] = take::<3>(args, "setChannel")?;
            let seq = as_input(seq, "setChannel")?;
            let pos = as_int(pos, "setChannel")?;
            let channel = parse_channel(&as_str(channel, "setChannel")?)?;
            let len = seq.actions.len() as i64;
            if pos < 1 || pos > len {
                return Err(EvalError::Index(format!(
                    "setChannel: position {pos} outside 1..={len}"
                )));
            }
            let mut actions = seq.actions.clone();
            actions[(pos - 1) as usize].set_channel(channel);
            follow_up(ctx, &seq, actions)
        }
    }
}

/// Derives a follow-up with the `param`th parameter of the `pos`th action
/// set to `value`.
fn set_parameter_value(
    ctx: &mut ExecutionContext<'_>,
    args: Vec<Value>,
) -> Result<Value, EvalError> {
    let [seq, pos, param, value] = take::<4>(args, "setParameterValue")?;
    let seq = as_input(seq, "setParameterValue")?;
    let pos = as_int(pos, "setParameterValue")?;
    let param = as_int(param, "setParameterValue")?;
    let value = as_str(value, "setParameterValue")?;
    let len = seq.actions.len() as i64;
    if pos < 1 || pos > len {
        return Err(EvalError::Index(format!(
            "setParameterValue: position {pos} outside 1..={len}"
        )));
    }
    if param < 1 {
        return Err(EvalError::Index(format!(
            "setParameterValue: parameter position {param} must be at least 1"
        )));
    }
    let mut actions = seq.actions.clone();
    actions[(pos - 1) as usize].set_param_value(param as usize, &value)?;
    follow_up(ctx, &seq, actions)
}
