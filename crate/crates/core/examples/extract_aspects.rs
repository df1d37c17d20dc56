//! Runs rule and header extraction over one advisory and prints every slot.
//!
//! cargo run -p pocfuse --example extract_aspects

use pocfuse::classify::categorize;
use pocfuse::corpus::{Aspect, PocReport, SourceId};
use pocfuse::extract::{extract_all, PatternExtractor, Rules};

const ADVISORY: &str = "\
FooCMS 2.1 Stored XSS

Author: jdoe
Published: 2021-03-04
Affected version: 2.1
Platform: Ubuntu 20.04
Tracked as CVE-2021-1234.

Steps to reproduce:
1. log in as an editor
2. save a post titled <script>alert(1)</script>
3. open the post as admin

Expected result:
    an alert box pops up in the admin session

References:
https://vendor.example.com/advisories/77.
";

fn main() -> pocfuse::Result<()> {
    let report = categorize(&PocReport::new("adv-1", SourceId::CxSecurity, ADVISORY))?;
    let done = extract_all(&report, &Rules::default(), &PatternExtractor)?.report;
    println!("kind: {:?}  cves: {:?}", done.content_kind, done.cve_ids);
    for aspect in Aspect::ALL {
        for v in done.aspects.get(aspect) {
            println!("[{}]\n{}\n", aspect.name(), v.text());
        }
    }
    Ok(())
}
