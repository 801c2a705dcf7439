use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use dfpo_core::router::{evaluate, AnswerValue, EvalKind, EvalSpec, HttpJudge, JudgeConfig, RouterError};

struct Captured {
    request_line: String,
    headers: Vec<String>,
    body: String,
}

/// Serves `responses.len()` requests, one per connection, and reports them.
fn serve(responses: Vec<(u16, &'static str)>) -> (String, mpsc::Receiver<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/judge", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut headers = Vec::new();
            let mut len = 0;
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                let h = h.trim_end().to_string();
                if h.is_empty() {
                    break;
                }
                if let Some(v) = h.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push(h);
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let mut stream = stream;
            stream.write_all(reply.as_bytes()).unwrap();
            tx.send(Captured { request_line, headers, body: String::from_utf8(buf).unwrap() }).unwrap();
        }
    });
    (url, rx)
}

fn config(endpoint: String, credential_env: Option<&str>) -> JudgeConfig {
    JudgeConfig {
        endpoint,
        model: "judge-small".into(),
        timeout_secs: 5,
        credential_env: credential_env.map(String::from),
        max_in_flight: 2,
    }
}

#[test]
fn verdict_round_trip_with_bearer_credential() {
    let (url, rx) = serve(vec![(200, r#"{"verdict":"8"}"#)]);
    std::env::set_var("DFPO_TEST_JUDGE_TOKEN", "s3cret");
    let judge = HttpJudge::new(config(url, Some("DFPO_TEST_JUDGE_TOKEN")));
    let spec = EvalSpec::leaf(EvalKind::ReferenceAnswerWithLlm);
    let o =
        evaluate(&spec, &AnswerValue::text("blue whale"), &AnswerValue::text("the blue whale"), Some(&judge)).unwrap();
    assert!((o.score - 0.8).abs() < 1e-12);
    assert_eq!(o.binary, 1);

    let req = rx.recv().unwrap();
    assert!(req.request_line.starts_with("POST /judge"));
    assert!(req.headers.iter().any(|h| h == "Authorization: Bearer s3cret" || h == "authorization: Bearer s3cret"));
    let body: serde_json::Value = serde_json::from_str(&req.body).unwrap();
    assert_eq!(body["model"], "judge-small");
    assert_eq!(body["temperature"], 0.0);
    assert!(body["prompt"].as_str().unwrap().contains("blue whale"));
}

#[test]
fn plain_text_verdicts_are_accepted() {
    let (url, _rx) = serve(vec![(200, "Score: 3.5 out of 10")]);
    let judge = HttpJudge::new(config(url, None));
    let spec = EvalSpec::leaf(EvalKind::Scidqa);
    let o = evaluate(&spec, &AnswerValue::text("a"), &AnswerValue::text("b"), Some(&judge)).unwrap();
    assert!((o.score - 0.35).abs() < 1e-12);
    assert_eq!(o.binary, 0);
}

#[test]
fn server_errors_and_missing_credentials_fail_cleanly() {
    let (url, _rx) = serve(vec![(500, "{}")]);
    let judge = HttpJudge::new(config(url.clone(), None));
    let spec = EvalSpec::leaf(EvalKind::Scidqa);
    let err = evaluate(&spec, &AnswerValue::text("a"), &AnswerValue::text("b"), Some(&judge)).unwrap_err();
    assert!(matches!(err, RouterError::JudgeUnavailable(_)), "{err}");

    let judge = HttpJudge::new(config(url, Some("DFPO_TEST_UNSET_VARIABLE")));
    let err = evaluate(&spec, &AnswerValue::text("a"), &AnswerValue::text("b"), Some(&judge)).unwrap_err();
    assert!(err.to_string().contains("DFPO_TEST_UNSET_VARIABLE"), "{err}");
}

#[test]
fn unparseable_verdicts_are_errors() {
    let (url, _rx) = serve(vec![(200, r#"{"verdict":"excellent"}"#)]);
    let judge = HttpJudge::new(config(url, None));
    let spec = EvalSpec::leaf(EvalKind::Scidqa);
    let err = evaluate(&spec, &AnswerValue::text("a"), &AnswerValue::text("b"), Some(&judge)).unwrap_err();
    assert!(matches!(err, RouterError::JudgeParse { .. }), "{err}");
}
