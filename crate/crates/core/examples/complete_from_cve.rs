//! Fills a report's empty version and platform slots from its CVE entry and
//! prints the audit records.
//!
//! cargo run -p pocfuse --example complete_from_cve

use pocfuse::complete::complete_from_cve;
use pocfuse::corpus::{Aspect, AspectValue, ContentKind, CveEntry, PocReport, Product, SourceId};

fn main() -> pocfuse::Result<()> {
    let mut report = PocReport::new("edb-638", SourceId::ExploitDb, "SLMail PASS overflow");
    report.content_kind = ContentKind::Text;
    report.add_cve_id("CVE-2003-0264")?;
    report.software = vec!["SLMail".into()];
    report.aspects.push(Aspect::SoftwareVersion, AspectValue::original("5.5")?);

    let entry = CveEntry {
        cve_id: "CVE-2003-0264".into(),
        products: vec![Product { name: "SLMail".into(), versions: vec!["5.1".into(), "5.5".into()] }],
        platforms: vec!["Windows".into()],
    };
    let (done, records) = complete_from_cve(&report, &entry, "example")?;
    for rec in &records {
        println!("{} {} <- {:?} ({:?})", rec.target, rec.slot.name(), rec.value, rec.origin);
    }
    for aspect in [Aspect::SoftwareVersion, Aspect::TestPlatform] {
        let values: Vec<&str> = done.aspects.get(aspect).iter().map(|v| v.text()).collect();
        println!("{}: {values:?}", aspect.name());
    }
    Ok(())
}
