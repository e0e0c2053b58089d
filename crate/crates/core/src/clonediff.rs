//! Textual clone detection.
//!
//! Each file is normalized line by line (all whitespace removed, lowercased,
//! empty lines dropped), then every cross-sample pair of files in the same
//! language is decomposed into matching blocks by recursive longest common
//! run search over lines. Blocks at least `min_sloc` lines long are clones.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LanguageId, SourceFile};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedFile {
    pub sample_id: String,
    pub path: PathBuf,
    pub language: LanguageId,
    pub lines: Vec<String>,
    /// 1-based original line number of each entry in `lines`.
    pub origin_map: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineMode {
    /// Strip whitespace and lowercase each line.
    #[default]
    Normalized,
    /// Keep lines verbatim; only whitespace-only lines are dropped.
    Raw,
}

pub fn normalize_line(line: &str) -> String {
    line.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

fn build(file: &SourceFile, f: impl Fn(&str) -> String) -> NormalizedFile {
    let mut lines = Vec::new();
    let mut origin_map = Vec::new();
    for (i, line) in file.text.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        lines.push(f(line));
        origin_map.push(i + 1);
    }
    NormalizedFile {
        sample_id: file.sample_id.clone(),
        path: file.rel_path.clone(),
        language: file.language,
        lines,
        origin_map,
    }
}

pub fn normalize(file: &SourceFile) -> NormalizedFile {
    build(file, normalize_line)
}

pub fn raw_lines(file: &SourceFile) -> NormalizedFile {
    build(file, |l| l.trim_end_matches('\r').to_string())
}

pub fn prepare(file: &SourceFile, mode: LineMode) -> NormalizedFile {
    match mode {
        LineMode::Normalized => normalize(file),
        LineMode::Raw => raw_lines(file),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingBlock {
    pub start_a: usize,
    pub start_b: usize,
    pub len: usize,
}

struct Matcher<'a> {
    a: &'a [u32],
    b2j: HashMap<u32, Vec<usize>>,
}

impl Matcher<'_> {
    /// Longest run `a[i..i+k] == b[j..j+k]` inside the window; earliest `i`, then earliest `j`, on ties.
    fn longest(&self, alo: usize, ahi: usize, blo: usize, bhi: usize) -> MatchingBlock {
        let mut best = MatchingBlock {
            start_a: alo,
            start_b: blo,
            len: 0,
        };
        let mut j2len: HashMap<usize, usize> = HashMap::new();
        for i in alo..ahi {
            let mut next: HashMap<usize, usize> = HashMap::new();
            if let Some(js) = self.b2j.get(&self.a[i]) {
                for &j in js {
                    if j < blo {
                        continue;
                    }
                    if j >= bhi {
                        break;
                    }
                    let k = j
                        .checked_sub(1)
                        .and_then(|p| j2len.get(&p))
                        .copied()
                        .unwrap_or(0)
                        + 1;
                    next.insert(j, k);
                    if k > best.len {
                        best = MatchingBlock {
                            start_a: i + 1 - k,
                            start_b: j + 1 - k,
                            len: k,
                        };
                    }
                }
            }
            j2len = next;
        }
        best
    }
}

/// Ratcliff-Obershelp style decomposition: the longest common run, then the
/// same recursively on both sides of it. Blocks come back ordered and disjoint
/// in both sequences, with adjacent blocks merged.
pub fn matching_blocks<'s, T: Eq + std::hash::Hash>(a: &'s [T], b: &'s [T]) -> Vec<MatchingBlock> {
    let mut ids: HashMap<&'s T, u32> = HashMap::new();
    let mut intern = |x: &'s T| -> u32 {
        let n = ids.len() as u32;
        *ids.entry(x).or_insert(n)
    };
    let ia: Vec<u32> = a.iter().map(&mut intern).collect();
    let ib: Vec<u32> = b.iter().map(&mut intern).collect();

    let mut b2j: HashMap<u32, Vec<usize>> = HashMap::new();
    for (j, &x) in ib.iter().enumerate() {
        b2j.entry(x).or_default().push(j);
    }
    let m = Matcher { a: &ia, b2j };

    let mut queue = vec![(0, ia.len(), 0, ib.len())];
    let mut blocks = Vec::new();
    while let Some((alo, ahi, blo, bhi)) = queue.pop() {
        let blk = m.longest(alo, ahi, blo, bhi);
        if blk.len == 0 {
            continue;
        }
        if alo < blk.start_a && blo < blk.start_b {
            queue.push((alo, blk.start_a, blo, blk.start_b));
        }
        if blk.start_a + blk.len < ahi && blk.start_b + blk.len < bhi {
            queue.push((blk.start_a + blk.len, ahi, blk.start_b + blk.len, bhi));
        }
        blocks.push(blk);
    }
    blocks.sort_by_key(|b| (b.start_a, b.start_b));

    let mut merged: Vec<MatchingBlock> = Vec::with_capacity(blocks.len());
    for blk in blocks {
        if let Some(last) = merged.last_mut() {
            if last.start_a + last.len == blk.start_a && last.start_b + last.len == blk.start_b {
                last.len += blk.len;
                continue;
            }
        }
        merged.push(blk);
    }
    merged
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FileRef {
    pub sample_id: String,
    pub path: PathBuf,
}

/// Inclusive, 1-based original line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineRange {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloneMatch {
    pub file_a: FileRef,
    pub file_b: FileRef,
    pub range_a: LineRange,
    pub range_b: LineRange,
    pub length_sloc: usize,
    pub language: LanguageId,
    pub normalized_text: String,
}

impl CloneMatch {
    fn sort_key(&self) -> (&str, &str, &PathBuf, &PathBuf, usize, usize) {
        (
            &self.file_a.sample_id,
            &self.file_b.sample_id,
            &self.file_a.path,
            &self.file_b.path,
            self.range_a.start,
            self.range_b.start,
        )
    }

    /// Same clone seen from the other file.
    pub fn swapped(&self) -> CloneMatch {
        CloneMatch {
            file_a: self.file_b.clone(),
            file_b: self.file_a.clone(),
            range_a: self.range_b,
            range_b: self.range_a,
            ..self.clone()
        }
    }
}

pub fn detect_pair(a: &NormalizedFile, b: &NormalizedFile, min_sloc: usize) -> Vec<CloneMatch> {
    let min_sloc = min_sloc.max(1);
    matching_blocks(&a.lines, &b.lines)
        .into_iter()
        .filter(|blk| blk.len >= min_sloc)
        .map(|blk| CloneMatch {
            file_a: FileRef {
                sample_id: a.sample_id.clone(),
                path: a.path.clone(),
            },
            file_b: FileRef {
                sample_id: b.sample_id.clone(),
                path: b.path.clone(),
            },
            range_a: LineRange {
                start: a.origin_map[blk.start_a],
                end: a.origin_map[blk.start_a + blk.len - 1],
            },
            range_b: LineRange {
                start: b.origin_map[blk.start_b],
                end: b.origin_map[blk.start_b + blk.len - 1],
            },
            length_sloc: blk.len,
            language: a.language,
            normalized_text: a.lines[blk.start_a..blk.start_a + blk.len].join("\n"),
        })
        .collect()
}

/// Minimum clone length in normalized lines, per language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloneThresholds {
    pub per_language: BTreeMap<LanguageId, usize>,
    pub default: usize,
}

impl Default for CloneThresholds {
    fn default() -> Self {
        CloneThresholds {
            per_language: [
                (LanguageId::Assembly, 10),
                (LanguageId::C, 5),
                (LanguageId::Cpp, 5),
            ]
            .into_iter()
            .collect(),
            default: 5,
        }
    }
}

impl CloneThresholds {
    pub fn for_language(&self, lang: LanguageId) -> usize {
        self.per_language
            .get(&lang)
            .copied()
            .unwrap_or(self.default)
    }
}

fn comparable(a: LanguageId, b: LanguageId) -> bool {
    a != LanguageId::Unknown && (a == b || (a.is_c_family() && b.is_c_family()))
}

/// Every cross-sample file pair of comparable language; intra-sample pairs are skipped.
/// Output is sorted by sample ids, paths and start lines, with `sample_a < sample_b`.
pub fn detect_corpus(
    corpus: &Corpus,
    thresholds: &CloneThresholds,
    mode: LineMode,
) -> Vec<CloneMatch> {
    let prepared: Vec<Vec<NormalizedFile>> = corpus
        .samples
        .iter()
        .map(|s| {
            s.files
                .par_iter()
                .filter(|f| f.language != LanguageId::Unknown)
                .map(|f| prepare(f, mode))
                .collect()
        })
        .collect();

    let mut pairs = Vec::new();
    for (i, si) in prepared.iter().enumerate() {
        for sj in &prepared[i + 1..] {
            for fa in si {
                for fb in sj {
                    if comparable(fa.language, fb.language) {
                        let (x, y) = if fa.sample_id <= fb.sample_id {
                            (fa, fb)
                        } else {
                            (fb, fa)
                        };
                        pairs.push((x, y));
                    }
                }
            }
        }
    }

    let mut out: Vec<CloneMatch> = pairs
        .par_iter()
        .flat_map_iter(|(a, b)| detect_pair(a, b, thresholds.for_language(a.language)))
        .collect();
    out.sort_by(|x, y| x.sort_key().cmp(&y.sort_key()));
    out
}

/// Reads one clone per line.
pub fn read_jsonl(text: &str) -> Result<Vec<CloneMatch>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

pub fn write_jsonl(matches: &[CloneMatch]) -> String {
    let mut out = String::new();
    for m in matches {
        let value = serde_json::to_value(m).expect("clone match serializes");
        out.push_str(&serde_json::to_string(&value).expect("value serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_longest<T: Eq>(a: &[T], b: &[T]) -> usize {
        let mut best = 0;
        for i in 0..a.len() {
            for j in 0..b.len() {
                let mut k = 0;
                while i + k < a.len() && j + k < b.len() && a[i + k] == b[j + k] {
                    k += 1;
                }
                best = best.max(k);
            }
        }
        best
    }

    fn nf(lines: &[&str]) -> NormalizedFile {
        normalize(&SourceFile::from_text(
            "s",
            "f.c",
            LanguageId::C,
            &lines.join("\n"),
        ))
    }

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_line("  X = 1 ;  "), "x=1;");
        assert_eq!(normalize_line("mov eax,1"), "moveax,1");
        let n = nf(&["a", "\t\t", "  B  "]);
        assert_eq!(n.lines, vec!["a", "b"]);
        assert_eq!(n.origin_map, vec![1, 3]);
    }

    #[test]
    fn block_examples() {
        let ten: Vec<String> = (0..10).map(|i| format!("l{i}")).collect();
        assert_eq!(
            matching_blocks(&ten, &ten),
            vec![MatchingBlock {
                start_a: 0,
                start_b: 0,
                len: 10
            }]
        );
        assert!(matching_blocks(&["a", "b"], &["c", "d"]).is_empty());
        let a = ["p", "q", "r", "s", "t"];
        let b = ["x", "q", "r", "s", "y"];
        assert_eq!(brute_longest(&a, &b), 3);
        assert_eq!(
            matching_blocks(&a, &b),
            vec![MatchingBlock {
                start_a: 1,
                start_b: 1,
                len: 3
            }]
        );
    }

    #[test]
    fn recursion_finds_both_sides() {
        let a = ["a", "b", "X", "c", "d", "e"];
        let b = ["a", "b", "Y", "Z", "c", "d", "e"];
        let blocks = matching_blocks(&a, &b);
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].len, 2);
        assert_eq!(
            (blocks[1].start_a, blocks[1].start_b, blocks[1].len),
            (3, 4, 3)
        );
    }

    #[test]
    fn pair_thresholds_and_ranges() {
        let plant = [
            "int i;",
            "for(i=0;i<n;i++){",
            "buf[i]^=key;",
            "key+=3;",
            "}",
            "send(s,buf,n,0);",
            "close(s);",
        ];
        let mut a: Vec<&str> = vec!["int alpha;", "", "int beta;"];
        a.extend(plant);
        let mut b: Vec<&str> = vec!["void x(void);"];
        b.extend(plant);
        b.push("int tail;");
        let (na, nb) = (nf(&a), nf(&b));
        let m = detect_pair(&na, &nb, 5);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].length_sloc, 7);
        assert_eq!(m[0].range_a, LineRange { start: 4, end: 10 });
        assert_eq!(m[0].range_b, LineRange { start: 2, end: 8 });
        assert!(detect_pair(&na, &nb, 10).is_empty());
    }

    #[test]
    fn jsonl_round_trip() {
        let a = nf(&["a", "b", "c", "d", "e"]);
        let m = detect_pair(&a, &a, 5);
        let back = read_jsonl(&write_jsonl(&m)).unwrap();
        assert_eq!(back, m);
    }

    fn small_seq() -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(0u8..4, 0..30)
    }

    proptest! {
        #[test]
        fn blocks_are_ordered_disjoint_and_bounded(a in small_seq(), b in small_seq()) {
            let blocks = matching_blocks(&a, &b);
            let mut end_a = 0;
            let mut end_b = 0;
            let mut total = 0;
            for blk in &blocks {
                prop_assert!(blk.len > 0);
                prop_assert!(blk.start_a >= end_a && blk.start_b >= end_b);
                prop_assert_eq!(&a[blk.start_a..blk.start_a + blk.len], &b[blk.start_b..blk.start_b + blk.len]);
                end_a = blk.start_a + blk.len;
                end_b = blk.start_b + blk.len;
                total += blk.len;
            }
            prop_assert!(total <= a.len().min(b.len()));
            let longest = blocks.iter().map(|b| b.len).max().unwrap_or(0);
            prop_assert_eq!(longest, brute_longest(&a, &b));
        }

        #[test]
        fn symmetric(a in small_seq(), b in small_seq()) {
            let to_lines = |v: &Vec<u8>| v.iter().map(|x| format!("line{x}")).collect::<Vec<_>>();
            let fa = NormalizedFile { sample_id: "a".into(), path: "a".into(), language: LanguageId::C, origin_map: (1..=a.len()).collect(), lines: to_lines(&a) };
            let fb = NormalizedFile { sample_id: "b".into(), path: "b".into(), language: LanguageId::C, origin_map: (1..=b.len()).collect(), lines: to_lines(&b) };
            let ab: usize = detect_pair(&fa, &fb, 1).iter().map(|m| m.length_sloc).sum();
            let ba: usize = detect_pair(&fb, &fa, 1).iter().map(|m| m.length_sloc).sum();
            let longest_ab = detect_pair(&fa, &fb, 1).iter().map(|m| m.length_sloc).max();
            let longest_ba = detect_pair(&fb, &fa, 1).iter().map(|m| m.length_sloc).max();
            prop_assert_eq!(longest_ab, longest_ba);
            prop_assert!(ab <= a.len().min(b.len()) && ba <= a.len().min(b.len()));
        }

        #[test]
        fn whitespace_and_case_invariant(lines in proptest::collection::vec("[a-z=;(){}0-9]{1,12}", 1..20), pad in "[ \t]{0,3}") {
            let a: Vec<String> = lines.clone();
            let b: Vec<String> = lines.iter().map(|l| format!("{pad}{}{pad}", l.to_uppercase())).collect();
            let fa = normalize(&SourceFile::from_text("a", "a.c", LanguageId::C, &a.join("\n")));
            let fb = normalize(&SourceFile::from_text("b", "b.c", LanguageId::C, &b.join("\n")));
            prop_assert_eq!(&fa.lines, &fb.lines);
            prop_assert_eq!(detect_pair(&fa, &fb, 1).len(), 1);
        }
    }
}
