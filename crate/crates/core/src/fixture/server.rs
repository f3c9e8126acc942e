//! A minimal HTTP/1.1 server hosting the fixture site on two ports: one
//! plain and one designated "secure" (also plain TCP; the executor treats
//! it as the TLS endpoint so tests need no certificates).

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::site::{self, SiteConfig, SiteRequest, SiteResponse};

/// A running fixture instance. Dropping the handle stops both listeners.
pub struct FixtureHandle {
    pub insecure_port: u16,
    pub secure_port: u16,
    stop: Arc<AtomicBool>,
    accept_threads: Vec<JoinHandle<()>>,
}

impl FixtureHandle {
    pub fn shutdown(mut self) {
        self.stop_listeners();
    }

    fn stop_listeners(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Unblock the accept loops with one throwaway connection each.
        for port in [self.insecure_port, self.secure_port] {
            let _ = TcpStream::connect(("127.0.0.1", port));
        }
        for handle in self.accept_threads.drain(..) {
            let _ = handle.join();
        }
    }
}

impl Drop for FixtureHandle {
    fn drop(&mut self) {
        if !self.accept_threads.is_empty() {
            self.stop_listeners();
        }
    }
}

/// Binds both listeners and serves until the handle is dropped. Port 0
/// requests an ephemeral port; the bound ports are reported on the handle.
pub fn serve(
    config: SiteConfig,
    insecure_port: u16,
    secure_port: u16,
) -> io::Result<FixtureHandle> {
    let insecure = TcpListener::bind(("127.0.0.1", insecure_port))?;
    let secure = TcpListener::bind(("127.0.0.1", secure_port))?;
    let insecure_port = insecure.local_addr()?.port();
    let secure_port = secure.local_addr()?.port();
    let stop = Arc::new(AtomicBool::new(false));
    let config = Arc::new(config);

    let mut accept_threads = Vec::new();
    for (listener, is_secure) in [(insecure, false), (secure, true)] {
        let stop = Arc::clone(&stop);
        let config = Arc::clone(&config);
        accept_threads.push(thread::spawn(move || {
            accept_loop(listener, is_secure, config, stop)
        }));
    }

    Ok(FixtureHandle {
        insecure_port,
        secure_port,
        stop,
        accept_threads,
    })
}

fn accept_loop(
    listener: TcpListener,
    is_secure: bool,
    config: Arc<SiteConfig>,
    stop: Arc<AtomicBool>,
) {
    for conn in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let stream = match conn {
            Ok(s) => s,
            Err(_) => continue,
        };
        let _ = stream.set_nodelay(true);
        let config = Arc::clone(&config);
        let stop = Arc::clone(&stop);
        thread::spawn(move || {
            let _ = serve_connection(stream, is_secure, &config, &stop);
        });
    }
}

/// Handles one keep-alive connection until the peer closes it, asks for
/// close, or the server shuts down.
fn serve_connection(
    stream: TcpStream,
    is_secure: bool,
    config: &SiteConfig,
    stop: &AtomicBool,
) -> io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_millis(250)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    loop {
        let request = match read_request(&mut reader, is_secure, stop) {
            Ok(Some(r)) => r,
            Ok(None) => return Ok(()),
            Err(_) => return Ok(()),
        };
        let response = site::respond(&request.site, config);
        let close = request.close;
        write_response(&mut writer, &request.site.method, &response, close)?;
        if close {
            return Ok(());
        }
    }
}

struct ParsedRequest {
    site: SiteRequest,
    close: bool,
}

/// Reads one request, tolerating read timeouts between requests so the
/// shutdown flag is observed on idle connections.
fn read_request(
    reader: &mut BufReader<TcpStream>,
    is_secure: bool,
    stop: &AtomicBool,
) -> io::Result<Option<ParsedRequest>> {
    let request_line = loop {
        match read_line(reader) {
            Ok(None) => return Ok(None),
            Ok(Some(line)) if line.is_empty() => continue,
            Ok(Some(line)) => break line,
            Err(e)
                if e.kind() == io::ErrorKind::WouldBlock
                    || e.kind() == io::ErrorKind::TimedOut =>
            {
                if stop.load(Ordering::SeqCst) {
                    return Ok(None);
                }
            }
            Err(e) => return Err(e),
        }
    };

    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let target = parts.next().unwrap_or("/").to_string();
    if method.is_empty() {
        return Ok(None);
    }

    let mut content_length = 0usize;
    let mut cookie_sid = None;
    let mut close = false;
    loop {
        let line = match read_line_blocking(reader, stop)? {
            Some(l) => l,
            None => return Ok(None),
        };
        if line.is_empty() {
            break;
        }
        let (name, value) = match line.split_once(':') {
            Some((n, v)) => (n.trim().to_ascii_lowercase(), v.trim().to_string()),
            None => continue,
        };
        match name.as_str() {
            "content-length" => content_length = value.parse().unwrap_or(0),
            "connection" => close = value.eq_ignore_ascii_case("close"),
            "cookie" => {
                for pair in value.split(';') {
                    if let Some((n, v)) = pair.trim().split_once('=') {
                        if n.trim() == "sid" {
                            cookie_sid = Some(v.trim().to_string());
                        }
                    }
                }
            }
            _ => {}
        }
    }

    let mut body = vec![0u8; content_length];
    if content_length > 0 {
        read_exact_blocking(reader, &mut body, stop)?;
    }

    let (path, query_str) = match target.split_once('?') {
        Some((p, q)) => (p.to_string(), q.to_string()),
        None => (target, String::new()),
    };
    let query = url::form_urlencoded::parse(query_str.as_bytes())
        .map(|(n, v)| (n.into_owned(), v.into_owned()))
        .collect();
    let form = url::form_urlencoded::parse(&body)
        .map(|(n, v)| (n.into_owned(), v.into_owned()))
        .collect();

    Ok(Some(ParsedRequest {
        site: SiteRequest {
            method,
            path,
            query,
            form,
            session: cookie_sid,
            secure: is_secure,
        },
        close,
    }))
}

fn read_line(reader: &mut BufReader<TcpStream>) -> io::Result<Option<String>> {
    let mut line = String::new();
    let n = reader.read_line(&mut line)?;
    if n == 0 {
        return Ok(None);
    }
    Ok(Some(line.trim_end_matches(['\r', '\n']).to_string()))
}

fn read_line_blocking(
    reader: &mut BufReader<TcpStream>,
    stop: &AtomicBool,
) -> io::Result<Option<String>> {
    loop {
        match read_line(reader) {
            Err(e)
                if e.kind() == io::ErrorKind::WouldBlock
                    || e.kind() == io::ErrorKind::TimedOut =>
            {
                if stop.load(Ordering::SeqCst) {
                    return Ok(None);
                }
            }
            other => return other,
        }
    }
}

fn read_exact_blocking(
    reader: &mut BufReader<TcpStream>,
    buf: &mut [u8],
    stop: &AtomicBool,
) -> io::Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => filled += n,
            Err(e)
                if e.kind() == io::ErrorKind::WouldBlock
                    || e.kind() == io::ErrorKind::TimedOut =>
            {
                if stop.load(Ordering::SeqCst) {
                    return Err(io::ErrorKind::Interrupted.into());
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

fn write_response(
    writer: &mut TcpStream,
    method: &str,
    response: &SiteResponse,
    close: bool,
) -> io::Result<()> {
    let reason = match response.status {
        200 => "OK",
        302 => "Found",
        403 => "Forbidden",
        404 => "Not Found",
        405 => "Method Not Allowed",
        _ => "OK",
    };
    let mut head = format!("HTTP/1.1 {} {}\r\n", response.status, reason);
    head.push_str(&format!("Content-Type: {}\r\n", response.content_type));
    head.push_str(&format!("Content-Length: {}\r\n", response.body.len()));
    if let Some(location) = &response.location {
        head.push_str(&format!("Location: {location}\r\n"));
    }
    if let Some(sid) = &response.set_cookie {
        head.push_str(&format!("Set-Cookie: sid={sid}; Path=/\r\n"));
    }
    head.push_str(if close {
        "Connection: close\r\n"
    } else {
        "Connection: keep-alive\r\n"
    });
    head.push_str("\r\n");
    // One write per response: splitting head and body across writes lets
    // Nagle hold the body until the peer's delayed ACK, stalling every
    // request by tens of milliseconds.
    let mut wire = head.into_bytes();
    if method != "HEAD" {
        wire.extend_from_slice(&response.body);
    }
    writer.write_all(&wire)?;
    writer.flush()
}
