//! Labels hostnames against a hosts-format blocklist and groups them by
//! registrable domain.

use mhealth_audit::hostclass::{registrable_domain, HostsList, MatchMode, PublicSuffixList};

fn main() -> mhealth_audit::Result<()> {
    let list = HostsList::parse(
        b"# blocklist\n0.0.0.0 graph.facebook.com\n0.0.0.0 app-measurement.com\n0.0.0.0 doubleclick.net\n",
    );
    let psl = PublicSuffixList::embedded();
    for host in [
        "graph.facebook.com",
        "app-measurement.com",
        "ad.doubleclick.net",
        "api.example.co.uk",
    ] {
        let exact = list.classify(host, MatchMode::Exact)?;
        let suffix = list.classify(host, MatchMode::Suffix)?;
        println!(
            "{host:<22} exact={:<11} suffix={:<11} domain={}",
            exact.as_str(),
            suffix.as_str(),
            registrable_domain(host, Some(&psl))?
        );
    }
    Ok(())
}
