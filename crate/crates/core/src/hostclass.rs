//! Hosts-blocklist parsing, tracker classification of contacted hosts and
//! registrable-domain grouping.

use std::collections::BTreeSet;
use std::net::IpAddr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const PSL_SNAPSHOT: &str = include_str!("../data/psl_snapshot.txt");

const LOOPBACK_NAMES: &[&str] = &[
    "localhost",
    "localhost.localdomain",
    "local",
    "broadcasthost",
    "ip6-localhost",
    "ip6-loopback",
    "ip6-localnet",
    "ip6-mcastprefix",
    "ip6-allnodes",
    "ip6-allrouters",
    "ip6-allhosts",
    "0.0.0.0",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HostLabel {
    NonTracker,
    Tracker,
}

impl HostLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            HostLabel::Tracker => "tracker",
            HostLabel::NonTracker => "non_tracker",
        }
    }

    pub fn is_tracker(self) -> bool {
        self == HostLabel::Tracker
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    Exact,
    Suffix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostsList {
    entries: BTreeSet<String>,
    /// SHA-256 of the parsed input, hex.
    pub source_digest: String,
    /// Non-comment lines that could not be parsed.
    pub malformed_lines: usize,
}

fn is_hostname_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_')
}

impl HostsList {
    pub fn parse(text: &[u8]) -> Self {
        let source_digest = hex::encode(Sha256::digest(text));
        let text = String::from_utf8_lossy(text);
        let mut entries = BTreeSet::new();
        let mut malformed = 0;
        for line in text.lines() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut fields = content.split_whitespace();
            let ip = fields.next().unwrap_or("");
            if ip.parse::<IpAddr>().is_err() {
                malformed += 1;
                continue;
            }
            let mut any = false;
            for host in fields {
                let host = host.trim_end_matches('.').to_ascii_lowercase();
                if host.is_empty() || !host.chars().all(is_hostname_char) {
                    malformed += 1;
                    any = true;
                    break;
                }
                any = true;
                if LOOPBACK_NAMES.contains(&host.as_str()) {
                    continue;
                }
                entries.insert(host);
            }
            if !any {
                malformed += 1;
            }
        }
        HostsList {
            entries,
            source_digest,
            malformed_lines: malformed,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&bytes))
    }

    pub fn from_hosts<I, S>(hosts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let text = hosts
            .into_iter()
            .map(|h| format!("0.0.0.0 {}\n", h.as_ref()))
            .collect::<String>();
        Self::parse(text.as_bytes())
    }

    pub fn entries(&self) -> &BTreeSet<String> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, host: &str) -> bool {
        self.entries.contains(host)
    }

    /// Hosts-file rendering of the entries, one `0.0.0.0 host` per line.
    pub fn to_hosts_text(&self) -> String {
        self.entries
            .iter()
            .map(|h| format!("0.0.0.0 {h}\n"))
            .collect()
    }

    pub fn classify(&self, hostname: &str, mode: MatchMode) -> Result<HostLabel> {
        classify_host(self, hostname, mode)
    }
}

fn validate_hostname(hostname: &str) -> Result<()> {
    if hostname.is_empty() || hostname.chars().any(char::is_whitespace) {
        return Err(Error::InvalidHostname(hostname.to_string()));
    }
    Ok(())
}

fn parse_ip(hostname: &str) -> Option<IpAddr> {
    hostname
        .trim_start_matches('[')
        .trim_end_matches(']')
        .parse()
        .ok()
}

/// Exact: listed iff the hostname itself is an entry. Suffix: also listed if
/// any parent domain obtained by stripping leading labels is an entry. IP
/// literals are only ever matched exactly.
pub fn classify_host(list: &HostsList, hostname: &str, mode: MatchMode) -> Result<HostLabel> {
    validate_hostname(hostname)?;
    let host = hostname.trim_end_matches('.');
    let listed = match mode {
        MatchMode::Exact => list.contains(host),
        MatchMode::Suffix if parse_ip(host).is_some() => list.contains(host),
        MatchMode::Suffix => {
            let mut candidate = host;
            loop {
                if list.contains(candidate) {
                    break true;
                }
                match candidate.split_once('.') {
                    Some((_, rest)) if !rest.is_empty() => candidate = rest,
                    _ => break false,
                }
            }
        }
    };
    Ok(if listed {
        HostLabel::Tracker
    } else {
        HostLabel::NonTracker
    })
}

/// Public suffix rules: plain, wildcard (`*.ck`) and exception (`!www.ck`).
#[derive(Debug, Clone, Default)]
pub struct PublicSuffixList {
    rules: BTreeSet<String>,
    wildcards: BTreeSet<String>,
    exceptions: BTreeSet<String>,
}

impl PublicSuffixList {
    pub fn parse(text: &str) -> Self {
        let mut psl = PublicSuffixList::default();
        for line in text.lines() {
            let rule = line.split_whitespace().next().unwrap_or("");
            if rule.is_empty() || rule.starts_with("//") {
                continue;
            }
            let rule = rule.to_ascii_lowercase();
            if let Some(rest) = rule.strip_prefix('!') {
                psl.exceptions.insert(rest.to_string());
            } else if let Some(rest) = rule.strip_prefix("*.") {
                psl.wildcards.insert(rest.to_string());
            } else {
                psl.rules.insert(rule);
            }
        }
        psl
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    /// The small multi-label snapshot shipped with the crate.
    pub fn embedded() -> Self {
        Self::parse(PSL_SNAPSHOT)
    }

    pub fn len(&self) -> usize {
        self.rules.len() + self.wildcards.len() + self.exceptions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of labels in the public suffix of `labels` (at least one:
    /// an unlisted TLD is its own suffix).
    fn suffix_len(&self, labels: &[&str]) -> usize {
        let n = labels.len();
        let mut best = 1;
        for k in 1..=n {
            let candidate = labels[n - k..].join(".");
            if self.exceptions.contains(&candidate) {
                return k - 1;
            }
            if self.rules.contains(&candidate) {
                best = best.max(k);
            }
            if k < n {
                let parent = labels[n - k..].join(".");
                if self.wildcards.contains(&parent) {
                    best = best.max(k + 1);
                }
            }
        }
        best.max(1)
    }
}

/// Registrable domain of `hostname`: public suffix plus one label when a
/// suffix list is given, the last two labels otherwise. IP literals and
/// hosts that are themselves public suffixes come back unchanged.
pub fn registrable_domain(hostname: &str, psl: Option<&PublicSuffixList>) -> Result<String> {
    validate_hostname(hostname)?;
    let host = hostname.trim_end_matches('.');
    if parse_ip(host).is_some() {
        return Ok(host.to_string());
    }
    let labels: Vec<&str> = host.split('.').collect();
    if labels.iter().any(|l| l.is_empty()) {
        return Err(Error::InvalidHostname(hostname.to_string()));
    }
    let keep = match psl {
        Some(psl) => psl.suffix_len(&labels) + 1,
        None => 2,
    };
    if labels.len() <= keep {
        return Ok(host.to_string());
    }
    Ok(labels[labels.len() - keep..].join("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_hosts_syntax() {
        let l = HostsList::parse(b"0.0.0.0 app-measurement.com");
        assert!(l.contains("app-measurement.com"));

        let l = HostsList::parse(b"# comment\n\n0.0.0.0 a.example  b.example");
        let v: Vec<_> = l.entries().iter().cloned().collect();
        assert_eq!(v, vec!["a.example", "b.example"]);

        let l = HostsList::parse(
            b"127.0.0.1 localhost\n::1 ip6-localhost\n255.255.255.255 broadcasthost",
        );
        assert!(l.is_empty());
        assert_eq!(l.malformed_lines, 0);
    }

    #[test]
    fn malformed_lines_counted() {
        let l = HostsList::parse(
            b"garbage line\n0.0.0.0\n0.0.0.0 Ok.Example # trailing\n0.0.0.0 bad/host",
        );
        assert_eq!(l.malformed_lines, 3);
        assert!(l.contains("ok.example"));
    }

    #[test]
    fn exact_and_suffix() {
        let l = HostsList::from_hosts(["app-measurement.com", "doubleclick.net"]);
        assert_eq!(
            classify_host(&l, "app-measurement.com", MatchMode::Exact).unwrap(),
            HostLabel::Tracker
        );
        assert_eq!(
            classify_host(&l, "stats.g.doubleclick.net", MatchMode::Suffix).unwrap(),
            HostLabel::Tracker
        );
        assert_eq!(
            classify_host(&l, "stats.g.doubleclick.net", MatchMode::Exact).unwrap(),
            HostLabel::NonTracker
        );
        for mode in [MatchMode::Exact, MatchMode::Suffix] {
            assert_eq!(
                classify_host(&l, "api.clinic-portal.example", mode).unwrap(),
                HostLabel::NonTracker
            );
        }
        assert!(classify_host(&l, "", MatchMode::Exact).is_err());
        assert!(classify_host(&l, "a b.com", MatchMode::Exact).is_err());
    }

    #[test]
    fn suffix_does_not_strip_into_ip_octets() {
        let l = HostsList::from_hosts(["0.2.7"]);
        assert_eq!(
            classify_host(&l, "192.0.2.7", MatchMode::Suffix).unwrap(),
            HostLabel::NonTracker
        );
    }

    #[test]
    fn registrable_domains() {
        assert_eq!(
            registrable_domain("stats.g.doubleclick.net", None).unwrap(),
            "doubleclick.net"
        );
        let psl = PublicSuffixList::parse("// c\nco.uk\nuk\n");
        assert_eq!(
            registrable_domain("cdn.firm.co.uk", Some(&psl)).unwrap(),
            "firm.co.uk"
        );
        assert_eq!(registrable_domain("192.0.2.7", None).unwrap(), "192.0.2.7");
        assert_eq!(
            registrable_domain("[2001:db8::1]", Some(&psl)).unwrap(),
            "[2001:db8::1]"
        );
        assert_eq!(registrable_domain("co.uk", Some(&psl)).unwrap(), "co.uk");
        assert_eq!(registrable_domain("localhost", None).unwrap(), "localhost");
    }

    #[test]
    fn wildcard_and_exception_rules() {
        let psl = PublicSuffixList::parse("*.ck\n!www.ck\n");
        assert_eq!(
            registrable_domain("a.b.foo.ck", Some(&psl)).unwrap(),
            "b.foo.ck"
        );
        assert_eq!(
            registrable_domain("x.www.ck", Some(&psl)).unwrap(),
            "www.ck"
        );
    }

    #[test]
    fn embedded_snapshot_size() {
        let psl = PublicSuffixList::embedded();
        assert!(psl.len() >= 50);
        assert_eq!(
            registrable_domain("api.shop.com.au", Some(&psl)).unwrap(),
            "shop.com.au"
        );
    }
}
