use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use judgerag::providers::{HttpEmbedder, HttpGenerator};
use judgerag::providers::{embed, generate, FailureKind, GenerationRequest, RetryPolicy};

/// Serves `responses` in order, one per connection, and records request bodies.
fn stub_server(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in responses {
            let Ok((stream, _)) = listener.accept() else {
                return;
            };
            log.lock().unwrap().push(read_body(&stream));
            respond(stream, status, &body);
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn read_body(stream: &TcpStream) -> String {
    let mut reader = BufReader::new(stream);
    let mut len = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    String::from_utf8(body).unwrap()
}

fn respond(mut stream: TcpStream, status: u16, body: &str) {
    let reply = format!(
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(reply.as_bytes()).unwrap();
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        max_attempts: 3,
        initial_backoff: Duration::from_millis(1),
        multiplier: 2,
    }
}

#[test]
fn generator_round_trip() {
    let (url, seen) = stub_server(vec![(200, r#"{"text":"The appeal is dismissed."}"#.into())]);
    let g = HttpGenerator::new(url, "pegasus-legal").with_retry_policy(fast_retry());
    let req = GenerationRequest::new("Summarize this.", 64, 0.0).unwrap();
    assert_eq!(generate(&g, &req).unwrap(), "The appeal is dismissed.");
    let sent: serde_json::Value = serde_json::from_str(&seen.lock().unwrap()[0]).unwrap();
    assert_eq!(sent["model"], "pegasus-legal");
    assert_eq!(sent["prompt"], "Summarize this.");
    assert_eq!(sent["params"]["max_output_tokens"], 64);
}

#[test]
fn server_errors_are_retried() {
    let (url, seen) = stub_server(vec![
        (503, "{}".into()),
        (200, r#"{"text":"ok"}"#.into()),
    ]);
    let g = HttpGenerator::new(url, "m").with_retry_policy(fast_retry());
    let req = GenerationRequest::with_prompt("p").unwrap();
    assert_eq!(generate(&g, &req).unwrap(), "ok");
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn embedder_round_trip_and_dimension_check() {
    let (url, _) = stub_server(vec![
        (200, r#"{"vectors":[[1.0,0.0,0.0],[0.0,2.0,0.0]]}"#.into()),
        (200, r#"{"vectors":[[1.0,0.0]]}"#.into()),
        (200, r#"{"vectors":[[1.0,0.0]]}"#.into()),
        (200, r#"{"vectors":[[1.0,0.0]]}"#.into()),
    ]);
    let e = HttpEmbedder::new(url, "legal-embed", 3).with_retry_policy(fast_retry());
    let v = embed(&e, &["a", "b"]).unwrap();
    assert_eq!(v.len(), 2);
    assert_eq!(v[1].values(), &[0.0, 2.0, 0.0]);
    let err = embed(&e, &["a"]).unwrap_err();
    assert!(matches!(err.kind, FailureKind::DimensionMismatch { expected: 3, actual: 2 }));
}

#[test]
fn unreachable_endpoint_is_a_transport_failure() {
    // bind then drop to get a port with nothing listening
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let g = HttpGenerator::new(format!("http://127.0.0.1:{port}/"), "m")
        .with_retry_policy(fast_retry())
        .with_timeout(Duration::from_secs(2));
    let err = generate(&g, &GenerationRequest::with_prompt("p").unwrap()).unwrap_err();
    assert_eq!(err.attempts, 3);
    assert!(matches!(err.kind, FailureKind::Transport(_)), "{err:?}");
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = stub_server(vec![(400, r#"{"error":"bad"}"#.into())]);
    let g = HttpGenerator::new(url, "m").with_retry_policy(fast_retry());
    let err = generate(&g, &GenerationRequest::with_prompt("p").unwrap()).unwrap_err();
    assert!(matches!(err.kind, FailureKind::Provider { status: Some(400), .. }));
    assert_eq!(err.attempts, 1);
    assert_eq!(seen.lock().unwrap().len(), 1);
}
