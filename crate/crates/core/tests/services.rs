use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use pocfuse::corpus::{Aspect, AspectValue, ContentKind, PocReport, SourceId};
use pocfuse::extract::{extract_structured_aspects, HttpExtractor, PatternExtractor};
use pocfuse::link::{classify_pair, HeuristicClassifier, HttpClassifier};
use serde_json::Value;

/// Serves `responses` in order, one per connection, and hands back each
/// request body. A response of `None` sleeps past any sane deadline.
fn mock(responses: Vec<Option<(u16, String)>>) -> (String, mpsc::Receiver<Value>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for response in responses {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let _ = tx.send(serde_json::from_slice(&body).unwrap_or(Value::Null));
            match response {
                Some((status, body)) => {
                    let _ = write!(
                        stream,
                        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                        body.len()
                    );
                }
                None => thread::sleep(Duration::from_secs(3)),
            }
        }
    });
    (url, rx)
}

fn closed_port_url() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    format!("http://{}/", l.local_addr().unwrap())
}

fn text_report(content: &str) -> PocReport {
    let mut r = PocReport::new("doc-1", SourceId::Seebug, content);
    r.content_kind = ContentKind::Text;
    r
}

fn titles(x: &pocfuse::extract::StructuredExtraction) -> Vec<&str> {
    x.get(Aspect::Title).iter().map(|s| s.text.as_str()).collect()
}

const DOC: &str = "Café Überflow 2.0\nAuthor: jdoe\n";

#[test]
fn extractor_spans_are_used_when_valid() {
    let body = r#"{"title":[{"text":"Überflow","start":5,"end":13}],"author":[],"software":[{"text":"Café","start":0,"end":4}]}"#;
    let (url, requests) = mock(vec![Some((200, body.into()))]);
    let out = extract_structured_aspects(&text_report(DOC), &HttpExtractor::new(url, Duration::from_secs(5)));
    assert!(out.degradation.is_none(), "{:?}", out.degradation);
    assert_eq!(titles(&out.extraction), ["Überflow"]);
    assert_eq!(out.extraction.software[0].text, "Café");
    let request = requests.recv().unwrap();
    assert_eq!(request["id"], "doc-1");
    assert_eq!(request["content"], DOC);
    assert_eq!(request["schema_version"], 1);
}

#[test]
fn span_past_the_end_falls_back() {
    let body = r#"{"title":[{"text":"x","start":5,"end":500}]}"#;
    let (url, _) = mock(vec![Some((200, body.into()))]);
    let out = extract_structured_aspects(&text_report(DOC), &HttpExtractor::new(url, Duration::from_secs(5)));
    assert!(out.degradation.unwrap().contains("contract"));
    assert_eq!(out.extraction, PatternExtractor.extract_infallible(&text_report(DOC)));
}

#[test]
fn span_text_mismatch_falls_back() {
    let body = r#"{"author":[{"text":"someone else","start":0,"end":4}]}"#;
    let (url, _) = mock(vec![Some((200, body.into()))]);
    let out = extract_structured_aspects(&text_report(DOC), &HttpExtractor::new(url, Duration::from_secs(5)));
    assert!(out.degradation.is_some());
    assert_eq!(titles(&out.extraction), ["Café Überflow 2.0"]);
}

#[test]
fn malformed_or_failing_service_falls_back() {
    for response in [(200, "not json".to_string()), (500, "{}".to_string()), (200, r#"{"colour":[]}"#.to_string())] {
        let (url, _) = mock(vec![Some(response.clone())]);
        let out = extract_structured_aspects(&text_report(DOC), &HttpExtractor::new(url, Duration::from_secs(5)));
        assert!(out.degradation.is_some(), "{response:?} accepted");
        assert_eq!(titles(&out.extraction), ["Café Überflow 2.0"]);
    }
}

#[test]
fn unreachable_extractor_falls_back() {
    let out = extract_structured_aspects(&text_report(DOC), &HttpExtractor::new(closed_port_url(), Duration::from_secs(2)));
    assert!(out.degradation.unwrap().contains("unreachable"));
}

#[test]
fn slow_extractor_is_cut_off_at_the_deadline() {
    let (url, _) = mock(vec![None]);
    let start = Instant::now();
    let out = extract_structured_aspects(&text_report(DOC), &HttpExtractor::new(url, Duration::from_millis(300)));
    assert!(out.degradation.is_some());
    assert!(start.elapsed() < Duration::from_secs(2), "{:?}", start.elapsed());
}

fn titled(id: &str, title: &str) -> PocReport {
    let mut r = text_report("send a long PASS argument to port 110");
    r.id = id.into();
    r.aspects.push(Aspect::Title, AspectValue::original(title).unwrap());
    r.software = vec!["SLMail".into()];
    r
}

#[test]
fn classifier_verdict_is_used_when_valid() {
    let (url, requests) = mock(vec![Some((200, r#"{"same":false,"confidence":0.2}"#.into()))]);
    let a = titled("a", "SLMail 5.5 overflow");
    let b = titled("b", "SLMail 5.5 overflow");
    let out = classify_pair(&HttpClassifier::new(url, Duration::from_secs(5)), &HeuristicClassifier::default(), &a, &b).unwrap();
    assert!(out.degradation.is_none());
    assert!(!out.verdict.same);
    assert_eq!(out.verdict.confidence, 0.2);
    let request = requests.recv().unwrap();
    assert_eq!(request["title_a"], "SLMail 5.5 overflow");
    assert_eq!(request["content_b"], "send a long PASS argument to port 110");
}

#[test]
fn classifier_failures_fall_back_to_heuristic() {
    let a = titled("a", "SLMail 5.5 overflow");
    let b = titled("b", "SLMail 5.5 overflow");
    let heuristic = HeuristicClassifier::default();
    let expected = classify_pair(&heuristic, &heuristic, &a, &b).unwrap().verdict;
    let (bad_confidence, _) = mock(vec![Some((200, r#"{"same":true,"confidence":1.5}"#.into()))]);
    let (garbage, _) = mock(vec![Some((200, "[]".into()))]);
    for url in [bad_confidence, garbage, closed_port_url()] {
        let out = classify_pair(&HttpClassifier::new(url.clone(), Duration::from_secs(2)), &heuristic, &a, &b).unwrap();
        assert!(out.degradation.is_some(), "{url}");
        assert_eq!(out.verdict, expected);
    }
}
