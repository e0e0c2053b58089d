//! Grouping of near-identical clones for review.
//!
//! Clone text is first canonicalized (literals and, optionally, identifiers
//! replaced by placeholders), then digested with a context-triggered piecewise
//! hash in the spamsum style. Clones whose digests score at or above the
//! threshold are linked, and connected components become clusters.
//!
//! Canonicalization rules, applied in one left-to-right pass:
//!
//! | pattern | replacement |
//! |---|---|
//! | existing `#ID`, `#N`, `#S` prefixes | kept |
//! | `"..."` or `'...'` with backslash escapes | `#S` |
//! | hex `0x..` or decimal/float numbers, with C suffixes | `#N` |
//! | identifiers `[A-Za-z_][A-Za-z0-9_]*` | `#ID` when enabled, else kept |
//! | other word runs such as `0A` | kept |
//! | runs of whitespace | one space, ends trimmed |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use crate::clonediff::CloneMatch;

static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(concat!(
        r"(?s)(?P<ph>#(?:ID|N|S))",
        r#"|(?P<s>"(?:\\.|[^"\\])*"|'(?:\\.|[^'\\])*')"#,
        r"|(?P<n>\b(?:0[xX][0-9a-fA-F]+|\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)[uUlLfF]*\b)",
        r"|(?P<id>\b[A-Za-z_][A-Za-z0-9_]*\b)",
        r"|(?P<w>\w+)",
    ))
    .expect("static regex")
});
static WS_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").expect("static regex"));

/// Applies the placeholder rules. Idempotent.
pub fn canonicalize(text: &str, identifiers: bool) -> String {
    let replaced = TOKEN_RE.replace_all(text, |c: &Captures| {
        if c.name("s").is_some() {
            "#S".to_string()
        } else if c.name("n").is_some() {
            "#N".to_string()
        } else if identifiers && c.name("id").is_some() {
            "#ID".to_string()
        } else {
            c[0].to_string()
        }
    });
    WS_RE.replace_all(&replaced, " ").trim().to_string()
}

const ROLLING_WINDOW: usize = 7;
const MIN_BLOCKSIZE: u32 = 3;
const HASH_PRIME: u32 = 0x0100_0193;
const HASH_INIT: u32 = 0x2802_1967;
const SPAMSUM_LENGTH: usize = 64;
const B64: &[u8; 64] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

#[derive(Default)]
struct Roll {
    window: [u8; ROLLING_WINDOW],
    h1: u32,
    h2: u32,
    h3: u32,
    n: usize,
}

impl Roll {
    fn push(&mut self, c: u8) -> u32 {
        let c32 = c as u32;
        self.h2 = self.h2.wrapping_sub(self.h1);
        self.h2 = self
            .h2
            .wrapping_add((ROLLING_WINDOW as u32).wrapping_mul(c32));
        self.h1 = self.h1.wrapping_add(c32);
        self.h1 = self
            .h1
            .wrapping_sub(self.window[self.n % ROLLING_WINDOW] as u32);
        self.window[self.n % ROLLING_WINDOW] = c;
        self.n += 1;
        self.h3 = (self.h3 << 5) ^ c32;
        self.h1.wrapping_add(self.h2).wrapping_add(self.h3)
    }
}

fn sum_hash(c: u8, h: u32) -> u32 {
    h.wrapping_mul(HASH_PRIME) ^ c as u32
}

/// A fuzzy digest: block size plus signatures at that size and at twice it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ctph {
    pub block_size: u32,
    pub sig1: String,
    pub sig2: String,
}

impl fmt::Display for Ctph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.block_size, self.sig1, self.sig2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed fuzzy digest {0:?}")]
pub struct BadDigest(pub String);

impl FromStr for Ctph {
    type Err = BadDigest;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadDigest(s.to_string());
        let mut parts = s.splitn(3, ':');
        let bs: u32 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let sig1 = parts.next().ok_or_else(bad)?;
        let sig2 = parts.next().ok_or_else(bad)?;
        if bs < MIN_BLOCKSIZE || sig2.contains(':') {
            return Err(bad());
        }
        Ok(Ctph {
            block_size: bs,
            sig1: sig1.to_string(),
            sig2: sig2.to_string(),
        })
    }
}

impl Serialize for Ctph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ctph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Digest of `data`. The block size starts at the smallest power-of-two
/// multiple of 3 whose 64 blocks cover the input, and halves while the
/// first signature stays under 32 characters.
pub fn ctph(data: &[u8]) -> Ctph {
    let mut bs = MIN_BLOCKSIZE;
    while (bs as usize) * SPAMSUM_LENGTH < data.len() {
        bs *= 2;
    }
    loop {
        let mut roll = Roll::default();
        let (mut h1, mut h2) = (HASH_INIT, HASH_INIT);
        let (mut sig1, mut sig2) = (String::new(), String::new());
        for &c in data {
            h1 = sum_hash(c, h1);
            h2 = sum_hash(c, h2);
            let rh = roll.push(c);
            if rh % bs == bs - 1 && sig1.len() < SPAMSUM_LENGTH - 1 {
                sig1.push(B64[(h1 % 64) as usize] as char);
                h1 = HASH_INIT;
            }
            if rh % (2 * bs) == 2 * bs - 1 && sig2.len() < SPAMSUM_LENGTH / 2 - 1 {
                sig2.push(B64[(h2 % 64) as usize] as char);
                h2 = HASH_INIT;
            }
        }
        if h1 != HASH_INIT {
            sig1.push(B64[(h1 % 64) as usize] as char);
        }
        if h2 != HASH_INIT {
            sig2.push(B64[(h2 % 64) as usize] as char);
        }
        if bs > MIN_BLOCKSIZE && sig1.len() < SPAMSUM_LENGTH / 2 {
            bs /= 2;
            continue;
        }
        return Ctph {
            block_size: bs,
            sig1,
            sig2,
        };
    }
}

/// Runs of more than three equal characters carry little information.
fn squeeze(s: &str) -> Vec<u8> {
    let b = s.as_bytes();
    let mut out = Vec::with_capacity(b.len());
    for (i, &c) in b.iter().enumerate() {
        if i >= 3 && c == b[i - 1] && c == b[i - 2] && c == b[i - 3] {
            continue;
        }
        out.push(c);
    }
    out
}

fn has_common_substring(a: &[u8], b: &[u8]) -> bool {
    if a.len() < ROLLING_WINDOW || b.len() < ROLLING_WINDOW {
        return false;
    }
    let grams: std::collections::HashSet<&[u8]> = a.windows(ROLLING_WINDOW).collect();
    b.windows(ROLLING_WINDOW).any(|w| grams.contains(w))
}

/// Edit distance with unit insert/delete and substitution cost 2.
fn edit_distance(a: &[u8], b: &[u8]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + if ca == cb { 0 } else { 2 };
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn score_strings(s1: &str, s2: &str) -> u32 {
    let (a, b) = (squeeze(s1), squeeze(s2));
    if !has_common_substring(&a, &b) {
        return 0;
    }
    let total = a.len() + b.len();
    let d = edit_distance(&a, &b) * SPAMSUM_LENGTH / total;
    let d = d * 100 / SPAMSUM_LENGTH;
    100u32.saturating_sub(d as u32)
}

/// Similarity in 0..=100. Digests must have equal or adjacent block sizes.
pub fn similarity(a: &Ctph, b: &Ctph) -> u32 {
    if a == b {
        return 100;
    }
    let (x, y) = (a.block_size, b.block_size);
    if x == y {
        score_strings(&a.sig1, &b.sig1).max(score_strings(&a.sig2, &b.sig2))
    } else if x == 2 * y {
        score_strings(&a.sig1, &b.sig2)
    } else if y == 2 * x {
        score_strings(&a.sig2, &b.sig1)
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloneDigest {
    pub clone_id: usize,
    pub canonical_text: String,
    pub ctph: Ctph,
}

pub fn digest(clone_id: usize, text: &str, identifiers: bool) -> CloneDigest {
    let canonical_text = canonicalize(text, identifiers);
    let ctph = ctph(canonical_text.as_bytes());
    CloneDigest {
        clone_id,
        canonical_text,
        ctph,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageCluster {
    pub id: usize,
    pub members: Vec<usize>,
    pub representative: String,
    #[serde(default)]
    pub label: Option<String>,
}

/// Single-linkage grouping over pairwise digest similarity. The threshold is
/// clamped to 0..=100. Every digest lands in exactly one cluster; clusters
/// are ordered by their smallest clone id.
pub fn group(digests: &[CloneDigest], threshold: i64) -> Vec<TriageCluster> {
    let threshold = threshold.clamp(0, 100) as u32;
    let n = digests.len();
    let edges: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..n)
                .filter(move |&j| similarity(&digests[i].ctph, &digests[j].ctph) >= threshold)
                .map(move |j| (i, j))
        })
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri.max(rj)] = ri.min(rj);
        }
    }
    let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        comps.entry(r).or_default().push(i);
    }
    let mut clusters: Vec<TriageCluster> = comps
        .into_values()
        .map(|idx| {
            let mut members: Vec<usize> = idx.iter().map(|&i| digests[i].clone_id).collect();
            members.sort_unstable();
            let rep = idx
                .iter()
                .min_by_key(|&&i| digests[i].clone_id)
                .copied()
                .unwrap_or(0);
            TriageCluster {
                id: 0,
                members,
                representative: digests[rep].canonical_text.clone(),
                label: None,
            }
        })
        .collect();
    clusters.sort_by_key(|c| c.members[0]);
    for (i, c) in clusters.iter_mut().enumerate() {
        c.id = i;
    }
    clusters
}

/// Copies analyst labels from an earlier run: each new cluster takes the
/// label of the old cluster sharing most members with it.
pub fn carry_labels(previous: &[TriageCluster], next: &mut [TriageCluster]) {
    for c in next.iter_mut() {
        let best = previous
            .iter()
            .filter(|p| p.label.is_some())
            .map(|p| {
                (
                    p.members
                        .iter()
                        .filter(|m| c.members.binary_search(m).is_ok())
                        .count(),
                    p,
                )
            })
            .filter(|(shared, _)| *shared > 0)
            .max_by(|(sa, pa), (sb, pb)| sa.cmp(sb).then(pb.id.cmp(&pa.id)));
        if let Some((_, p)) = best {
            c.label = p.label.clone();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageOptions {
    pub threshold: i64,
    pub identifiers: bool,
}

impl Default for TriageOptions {
    fn default() -> Self {
        TriageOptions {
            threshold: 90,
            identifiers: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageReport {
    pub threshold: i64,
    pub identifiers: bool,
    pub clones: usize,
    pub clusters: Vec<TriageCluster>,
}

/// Clone ids are positions in `clones`.
pub fn triage(clones: &[CloneMatch], opts: &TriageOptions) -> TriageReport {
    let digests: Vec<CloneDigest> = clones
        .par_iter()
        .enumerate()
        .map(|(i, c)| digest(i, &c.normalized_text, opts.identifiers))
        .collect();
    TriageReport {
        threshold: opts.threshold.clamp(0, 100),
        identifiers: opts.identifiers,
        clones: clones.len(),
        clusters: group(&digests, opts.threshold),
    }
}
