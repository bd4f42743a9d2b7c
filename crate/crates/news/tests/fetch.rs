use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener};
use std::thread;
use std::time::{Duration, Instant};

use fairtext_news::{fetch_all, fetch_article, ClientConfig, FetchError, NewsClient};

const ARTICLE: &str = "<!doctype html><html><head><title>Council approves budget</title>\
<style>p { color: red }</style></head><body><nav><p>Home</p></nav>\
<h1>Council approves budget</h1><p>The council approved the annual budget on Monday.</p>\
<script>document.write('<p>injected</p>')</script><p>Members debated for three hours.</p></body></html>";

/// Serves one canned response per path. `/slow` waits before answering.
fn serve() -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                }
                let path = request_line
                    .split_whitespace()
                    .nth(1)
                    .unwrap_or("/")
                    .to_string();
                let (status, body) = match path.as_str() {
                    "/article" => ("200 OK", ARTICLE.to_string()),
                    "/empty" => (
                        "200 OK",
                        "<html><body><div>nothing</div></body></html>".into(),
                    ),
                    "/error" => ("500 Internal Server Error", "boom".into()),
                    "/slow" => {
                        thread::sleep(Duration::from_secs(3));
                        ("200 OK", ARTICLE.to_string())
                    }
                    _ => ("404 Not Found", "missing".into()),
                };
                let response = format!(
                    "HTTP/1.1 {status}\r\nContent-Type: text/html; charset=utf-8\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(response.as_bytes());
            });
        }
    });
    addr
}

fn config() -> ClientConfig {
    ClientConfig {
        timeout: Duration::from_secs(5),
        ..ClientConfig::default()
    }
}

#[test]
fn fetches_and_extracts_fixture_article() {
    let addr = serve();
    let url = format!("http://{addr}/article");
    let article = fetch_article(&url, &config()).unwrap();
    assert_eq!(article.url, url);
    assert_eq!(article.title, "Council approves budget");
    assert_eq!(
        article.body,
        "Home\nThe council approved the annual budget on Monday.\nMembers debated for three hours."
    );
    assert!(article.fetched_at > 1_600_000_000);
}

#[test]
fn missing_page_is_not_found() {
    let addr = serve();
    let url = format!("http://{addr}/nowhere");
    assert_eq!(
        fetch_article(&url, &config()),
        Err(FetchError::NotFound(url))
    );
}

#[test]
fn server_error_reports_status() {
    let addr = serve();
    let url = format!("http://{addr}/error");
    assert_eq!(
        fetch_article(&url, &config()),
        Err(FetchError::Status { url, code: 500 })
    );
}

#[test]
fn page_without_text_is_an_extraction_error() {
    let addr = serve();
    let url = format!("http://{addr}/empty");
    assert!(matches!(
        fetch_article(&url, &config()),
        Err(FetchError::Extraction { .. })
    ));
}

#[test]
fn slow_server_times_out() {
    let addr = serve();
    let url = format!("http://{addr}/slow");
    let config = ClientConfig {
        timeout: Duration::from_millis(300),
        ..ClientConfig::default()
    };
    let started = Instant::now();
    assert_eq!(fetch_article(&url, &config), Err(FetchError::Timeout(url)));
    assert!(started.elapsed() < Duration::from_secs(2));
}

#[test]
fn refused_connection_is_a_network_error() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let url = format!("http://127.0.0.1:{port}/article");
    assert!(matches!(
        fetch_article(&url, &config()),
        Err(FetchError::Network { .. })
    ));
}

#[test]
fn fetch_all_keeps_input_order() {
    let addr = serve();
    let urls: Vec<String> = ["/article", "/nowhere", "/article", "/error", "/article"]
        .iter()
        .map(|p| format!("http://{addr}{p}"))
        .collect();
    let client = NewsClient::new(ClientConfig {
        max_concurrent: 2,
        ..config()
    });
    let results = fetch_all(&client, &urls);
    assert_eq!(results.len(), 5);
    assert!(results[0].is_ok() && results[2].is_ok() && results[4].is_ok());
    assert!(matches!(results[1], Err(FetchError::NotFound(_))));
    assert!(matches!(
        results[3],
        Err(FetchError::Status { code: 500, .. })
    ));
    assert!(fetch_all(&client, &[]).is_empty());
}
