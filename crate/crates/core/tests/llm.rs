//! Chat-completion client against a local mock server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use mmforge_core::scenario_text::{
    llm_generate_batch, llm_generate_prompts, LlmEndpoint, PromptSource, PromptStyle, ScenarioRequest, SynonymLexicon,
};
use mmforge_core::Error;

/// Serve `replies` (status, body) to successive connections; requests are
/// captured as (headers, body).
type Seen = Arc<Mutex<Vec<(String, String)>>>;

fn mock(replies: Vec<(u16, String)>) -> (String, Seen) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut headers = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push_str(&line);
            }
            let mut req = vec![0; len];
            reader.read_exact(&mut req).unwrap();
            log.lock().unwrap().push((headers, String::from_utf8(req).unwrap()));
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn chat(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

fn endpoint(url: &str) -> LlmEndpoint {
    LlmEndpoint {
        base_url: url.into(),
        initial_backoff_ms: 1,
        timeout_s: 5.0,
        token_env: "MMFORGE_TEST_TOKEN_UNSET".into(),
        ..LlmEndpoint::default()
    }
}

fn request(count: usize) -> ScenarioRequest {
    ScenarioRequest::new("gym: walk, jump", count, PromptStyle::Diverse).unwrap()
}

#[test]
fn three_lines_become_three_prompts() {
    let (url, seen) = mock(vec![(
        200,
        chat("1. A person walks forward.\n2) A person jumps up, then walks away.\n- Someone hops in place."),
    )]);
    let lex = SynonymLexicon::builtin();
    let prompts = llm_generate_prompts(&request(3), &endpoint(&url), &lex, 5).unwrap();
    assert_eq!(prompts.len(), 3);
    assert!(prompts.iter().all(|p| p.provenance == PromptSource::Llm));
    assert_eq!(prompts[0].text, "A person walks forward.");
    assert_eq!(prompts[1].atomic_actions, vec!["jumps up", "walks away"]);
    assert_eq!(prompts[2].text, "Someone hops in place.");

    let seen = seen.lock().unwrap();
    assert!(seen[0].0.starts_with("POST /v1/chat/completions"));
    let body: serde_json::Value = serde_json::from_str(&seen[0].1).unwrap();
    assert_eq!(body["messages"][1]["content"], "Scenario: gym: walk, jump");
    assert!(!seen[0].0.to_ascii_lowercase().contains("authorization"));
}

#[test]
fn server_errors_are_retried() {
    let (url, seen) = mock(vec![
        (503, "busy".into()),
        (429, "slow down".into()),
        (200, chat("A person walks.")),
    ]);
    let prompts = llm_generate_prompts(&request(1), &endpoint(&url), &SynonymLexicon::builtin(), 1).unwrap();
    assert_eq!(prompts[0].text, "A person walks.");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_are_fatal() {
    let (url, seen) = mock(vec![(401, "no".into()), (200, chat("unused"))]);
    let err = llm_generate_prompts(&request(1), &endpoint(&url), &SynonymLexicon::builtin(), 1).unwrap_err();
    assert!(matches!(err, Error::Network { .. }), "{err}");
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn empty_body_is_malformed() {
    let (url, _) = mock(vec![(200, String::new())]);
    let err = llm_generate_prompts(&request(2), &endpoint(&url), &SynonymLexicon::builtin(), 1).unwrap_err();
    assert!(matches!(err, Error::MalformedResponse { .. }), "{err}");
    let (url, _) = mock(vec![(200, chat("\n  \n"))]);
    let err = llm_generate_prompts(&request(2), &endpoint(&url), &SynonymLexicon::builtin(), 1).unwrap_err();
    assert_eq!(err.kind(), "malformed_response");
}

fn dead_url() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", l.local_addr().unwrap());
    drop(l);
    url
}

#[test]
fn unreachable_endpoint_falls_back_to_grammar() {
    let ep = endpoint(&dead_url());
    let prompts = llm_generate_prompts(&request(4), &ep, &SynonymLexicon::builtin(), 9).unwrap();
    assert_eq!(prompts.len(), 4);
    assert!(prompts.iter().all(|p| p.provenance == PromptSource::Grammar));

    let strict = LlmEndpoint {
        fallback_to_grammar: false,
        max_attempts: 2,
        ..ep
    };
    match llm_generate_prompts(&request(1), &strict, &SynonymLexicon::builtin(), 9) {
        Err(Error::Network { attempts, .. }) => assert_eq!(attempts, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn token_is_sent_as_bearer() {
    let (url, seen) = mock(vec![(200, chat("A person walks."))]);
    let var = "MMFORGE_TEST_TOKEN_SET";
    std::env::set_var(var, "sekrit");
    let ep = LlmEndpoint {
        token_env: var.into(),
        ..endpoint(&url)
    };
    llm_generate_prompts(&request(1), &ep, &SynonymLexicon::builtin(), 1).unwrap();
    assert!(seen.lock().unwrap()[0].0.to_ascii_lowercase().contains("authorization: bearer sekrit"));
}

#[test]
fn batch_keeps_request_order() {
    let replies = (0..5).map(|_| (200, chat("A person walks."))).collect();
    let (url, seen) = mock(replies);
    let ep = LlmEndpoint {
        max_in_flight: 2,
        ..endpoint(&url)
    };
    let reqs: Vec<_> = (1..=5).map(request).collect();
    let out = llm_generate_batch(&reqs, &ep, &SynonymLexicon::builtin(), 3);
    assert_eq!(out.len(), 5);
    let seeds: Vec<u64> = out.iter().map(|r| r.as_ref().unwrap()[0].seed).collect();
    for (i, s) in seeds.iter().enumerate() {
        assert_eq!(*s, mmforge_core::rng::derive_seed(3, &i.to_string()));
    }
    assert_eq!(seen.lock().unwrap().len(), 5);
}
