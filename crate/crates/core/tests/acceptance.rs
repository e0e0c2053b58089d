//! Acceptance criteria 1-11. Run with `cargo test -p srcmetry --test acceptance`
//! to see one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use srcmetry::cloneast;
use srcmetry::clonediff::{self, FileRef};
use srcmetry::clonetriage;
use srcmetry::cocomo::{estimate, CoefficientTable, ProjectClass};
use srcmetry::report::{self, RunConfig, Tables};
use srcmetry::structure::{
    cfg_cyclomatic, maintainability_index, module_quality, ControlFlowGraph,
};
use srcmetry::trends::{
    self, chi_square_hist, exp_fit, ks_permutation_p, ks_two_sample, Histogram, TimeSeriesPoint,
};
use srcmetry::{Corpus, LanguageId, SourceFile};

// Tolerances and sizes from the acceptance table.
const EFFORT_TOL: f64 = 0.5;
const DURATION_TOL: f64 = 0.05;
const PEOPLE_TOL: f64 = 0.05;
const MI_TOL: f64 = 0.01;
const CFG_PROGRAMS: usize = 1000;
const GROWTH_TOL: f64 = 1e-6;
const DOUBLING_TOL: f64 = 0.01;
const PERM_AGREEMENT: f64 = 0.05;
const ALPHA: f64 = 0.05;
const NOT_REJECTED_MIN: usize = 90;
const FAMILIES: usize = 10;
const FAMILY_SLACK: usize = 2;

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    check: fn(),
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        title: "COCOMO organic reproduction",
        budget: Duration::from_millis(100),
        check: cocomo_reproduction,
    },
    Criterion {
        id: 2,
        title: "backfiring 970 C + 500 C++ + 240 Python = 30 FP",
        budget: Duration::from_secs(1),
        check: backfiring,
    },
    Criterion {
        id: 3,
        title: "decision-count CC equals E - N + 2P",
        budget: Duration::from_secs(10),
        check: cyclomatic_oracle,
    },
    Criterion {
        id: 4,
        title: "maintainability index values and monotonicity",
        budget: Duration::from_millis(100),
        check: mi_formula,
    },
    Criterion {
        id: 5,
        title: "textual clone engine planted blocks",
        budget: Duration::from_secs(1),
        check: textual_clones,
    },
    Criterion {
        id: 6,
        title: "structural engine clusters renamed fragments",
        budget: Duration::from_secs(1),
        check: structural_clones,
    },
    Criterion {
        id: 7,
        title: "vectors ignore types and constant values",
        budget: Duration::from_secs(1),
        check: rename_false_positive,
    },
    Criterion {
        id: 8,
        title: "planted 14% annual growth recovered",
        budget: Duration::from_millis(100),
        check: trend_regression,
    },
    Criterion {
        id: 9,
        title: "KS and chi-square behaviour",
        budget: Duration::from_secs(30),
        check: distribution_tests,
    },
    Criterion {
        id: 10,
        title: "triage compresses 100 clones into 10 families",
        budget: Duration::from_secs(5),
        check: triage_compression,
    },
    Criterion {
        id: 11,
        title: "pipeline artifacts byte-identical across reruns",
        budget: Duration::from_secs(60),
        check: determinism,
    },
];

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for c in CRITERIA {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.check));
        let took = start.elapsed();
        let verdict = match outcome {
            Err(_) => "FAIL",
            Ok(()) if took > c.budget => "FAIL (over time budget)",
            Ok(()) => "PASS",
        };
        // Written past the test harness capture so the lines show in every run.
        let _ = writeln!(
            std::io::stdout(),
            "[{verdict}] criterion {:>2}: {} ({:.3}s, budget {:?})",
            c.id,
            c.title,
            took.as_secs_f64(),
            c.budget
        );
        if verdict != "PASS" {
            failed.push(c.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

fn close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got}, want {want} ± {tol}"
    );
}

// 1 -------------------------------------------------------------------------

fn cocomo_reproduction() {
    let organic = CoefficientTable::default().get(ProjectClass::Organic);
    for (kloc, e, d, p) in [(61.752, 182.14, 18.07, 10.08), (33.170, 94.84, 14.10, 6.73)] {
        let est = estimate(kloc, &organic).unwrap();
        close(est.effort_man_months, e, EFFORT_TOL, "effort");
        close(est.duration_months, d, DURATION_TOL, "duration");
        close(est.people, p, PEOPLE_TOL, "people");
    }
}

// 2 -------------------------------------------------------------------------

fn write_sample(dir: &Path, files: &[(&str, String)]) {
    fs::create_dir_all(dir).unwrap();
    for (name, text) in files {
        fs::write(dir.join(name), text).unwrap();
    }
}

fn manifest(dir: &Path, rows: &[(&str, i32, &str)]) -> std::path::PathBuf {
    let entries: Vec<String> = rows
        .iter()
        .map(|(id, year, cat)| format!(r#"{{"id": "{id}", "name": "{id}", "year": {year}, "category": "{cat}", "root": "{id}"}}"#))
        .collect();
    let path = dir.join("corpus.json");
    fs::write(&path, format!("[{}]", entries.join(",\n"))).unwrap();
    path
}

fn backfiring() {
    let tmp = tempfile::tempdir().unwrap();
    let code =
        |n: usize, f: &dyn Fn(usize) -> String| (0..n).map(f).collect::<Vec<_>>().join("\n") + "\n";
    write_sample(
        &tmp.path().join("s"),
        &[
            (
                "a.c",
                format!(
                    "/* header */\n\n{}",
                    code(970, &|i| format!("int c{i} = {i};"))
                ),
            ),
            (
                "b.cpp",
                format!(
                    "// header\n{}",
                    code(500, &|i| format!("static int k{i} = {i};"))
                ),
            ),
            (
                "c.py",
                format!("# header\n\n{}", code(240, &|i| format!("v{i} = {i}"))),
            ),
        ],
    );
    let corpus = Corpus::load(&manifest(tmp.path(), &[("s", 2010, "V")])).unwrap();
    let r = report::sample_report(
        &corpus.samples[0],
        &Tables::default(),
        ProjectClass::Organic,
    )
    .unwrap();
    assert_eq!(r.lines.per_language[&LanguageId::C].sloc, 970);
    assert_eq!(r.lines.per_language[&LanguageId::Cpp].sloc, 500);
    assert_eq!(r.lines.per_language[&LanguageId::Python].sloc, 240);
    for lang in [LanguageId::C, LanguageId::Cpp, LanguageId::Python] {
        assert_eq!(r.function_points.per_language[&lang], 10.0, "{lang:?}");
    }
    assert_eq!(r.function_points.total, 30.0);
}

// 3 -------------------------------------------------------------------------
//
// Random structured programs are emitted as C text while their control-flow
// graph is built independently from the same tree. Atomic conditions are
// nodes with a true and a false edge; `&&`/`||` wire the short circuits.

#[derive(Default)]
struct Graph {
    nodes: u64,
    edges: Vec<(u64, u64)>,
}

impl Graph {
    fn node(&mut self) -> u64 {
        self.nodes += 1;
        self.nodes
    }
    fn link(&mut self, from: &[u64], to: u64) {
        self.edges.extend(from.iter().map(|&f| (f, to)));
    }
    /// Weakly connected components.
    fn components(&self) -> u64 {
        let mut parent: Vec<u64> = (0..=self.nodes).collect();
        fn root(p: &mut [u64], mut x: u64) -> u64 {
            while p[x as usize] != x {
                p[x as usize] = p[p[x as usize] as usize];
                x = p[x as usize];
            }
            x
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
            parent[ra as usize] = rb;
        }
        (1..=self.nodes)
            .filter(|&n| root(&mut parent, n) == n)
            .count() as u64
    }
}

/// Entry node plus dangling true/false edge sources.
struct Cond {
    entry: u64,
    t: Vec<u64>,
    f: Vec<u64>,
}

/// Entry node plus dangling exit edge sources.
struct Flow {
    entry: u64,
    exits: Vec<u64>,
}

struct Gen<'g> {
    rng: ChaCha8Rng,
    g: &'g mut Graph,
    out: String,
}

impl Gen<'_> {
    fn cond(&mut self, depth: u32) -> Cond {
        let pick = if depth >= 2 {
            0
        } else {
            self.rng.random_range(0..5)
        };
        match pick {
            0..=2 => {
                let n = self.g.node();
                let atoms = ["x > 3", "y != 0", "!z", "x < y", "n == 7"];
                let a = atoms[self.rng.random_range(0..atoms.len())];
                self.out.push_str(a);
                Cond {
                    entry: n,
                    t: vec![n],
                    f: vec![n],
                }
            }
            k => {
                let and = k == 3;
                self.out.push('(');
                let a = self.cond(depth + 1);
                self.out.push_str(if and { " && " } else { " || " });
                let b = self.cond(depth + 1);
                self.out.push(')');
                let mut t;
                let mut f;
                if and {
                    self.g.link(&a.t, b.entry);
                    t = b.t;
                    f = a.f;
                    f.extend(b.f);
                } else {
                    self.g.link(&a.f, b.entry);
                    f = b.f;
                    t = a.t;
                    t.extend(b.t);
                }
                Cond {
                    entry: a.entry,
                    t,
                    f,
                }
            }
        }
    }

    fn simple(&mut self) -> Flow {
        let n = self.g.node();
        let k = self.rng.random_range(1..9);
        self.out.push_str(&format!("x = x + {k};\n"));
        Flow {
            entry: n,
            exits: vec![n],
        }
    }

    fn block(&mut self, depth: u32, breaks: &mut Option<Vec<u64>>) -> Flow {
        let len = self.rng.random_range(1..4);
        let first = self.stmt(depth, breaks);
        let mut exits = first.exits;
        for _ in 1..len {
            let next = self.stmt(depth, breaks);
            self.g.link(&exits, next.entry);
            exits = next.exits;
        }
        Flow {
            entry: first.entry,
            exits,
        }
    }

    fn stmt(&mut self, depth: u32, breaks: &mut Option<Vec<u64>>) -> Flow {
        let kinds = if depth >= 4 { 1 } else { 10 };
        match self.rng.random_range(0..kinds) {
            0 => self.simple(),
            1 | 2 => {
                let else_branch = self.rng.random_bool(0.5);
                self.out.push_str("if (");
                let c = self.cond(0);
                self.out.push_str(") {\n");
                let then = self.block(depth + 1, breaks);
                self.g.link(&c.t, then.entry);
                self.out.push('}');
                let mut exits = then.exits;
                if else_branch {
                    self.out.push_str(" else {\n");
                    let other = self.block(depth + 1, breaks);
                    self.g.link(&c.f, other.entry);
                    exits.extend(other.exits);
                    self.out.push('}');
                } else {
                    exits.extend(c.f);
                }
                self.out.push('\n');
                Flow {
                    entry: c.entry,
                    exits,
                }
            }
            3 => {
                self.out.push_str("while (");
                let c = self.cond(0);
                self.out.push_str(") {\n");
                let mut inner = Some(Vec::new());
                let body = self.block(depth + 1, &mut inner);
                self.out.push_str("}\n");
                self.g.link(&c.t, body.entry);
                self.g.link(&body.exits, c.entry);
                let mut exits = c.f;
                exits.extend(inner.unwrap());
                Flow {
                    entry: c.entry,
                    exits,
                }
            }
            4 => {
                self.out.push_str("do {\n");
                let mut inner = Some(Vec::new());
                let body = self.block(depth + 1, &mut inner);
                self.out.push_str("} while (");
                let c = self.cond(0);
                self.out.push_str(");\n");
                self.g.link(&body.exits, c.entry);
                self.g.link(&c.t, body.entry);
                let mut exits = c.f;
                exits.extend(inner.unwrap());
                Flow {
                    entry: body.entry,
                    exits,
                }
            }
            5 => {
                let init = self.g.node();
                self.out.push_str("for (i = 0; ");
                let c = self.cond(0);
                self.out.push_str("; i++) {\n");
                let mut inner = Some(Vec::new());
                let body = self.block(depth + 1, &mut inner);
                self.out.push_str("}\n");
                let step = self.g.node();
                self.g.link(&[init], c.entry);
                self.g.link(&c.t, body.entry);
                self.g.link(&body.exits, step);
                self.g.link(&[step], c.entry);
                let mut exits = c.f;
                exits.extend(inner.unwrap());
                Flow { entry: init, exits }
            }
            6 => {
                let s = self.g.node();
                let cases = self.rng.random_range(1..4);
                let with_default = self.rng.random_bool(0.5);
                self.out.push_str("switch (n) {\n");
                let mut exits = Vec::new();
                for k in 0..cases + usize::from(with_default) {
                    if k < cases {
                        self.out.push_str(&format!("case {k}:\n"));
                    } else {
                        self.out.push_str("default:\n");
                    }
                    let body = self.block(depth + 1, &mut None);
                    self.g.link(&[s], body.entry);
                    exits.extend(body.exits);
                    self.out.push_str("break;\n");
                }
                self.out.push_str("}\n");
                if !with_default {
                    exits.push(s);
                }
                Flow { entry: s, exits }
            }
            7 => {
                self.out.push_str("x = (");
                let c = self.cond(0);
                self.out.push_str(") ? 1 : 2;\n");
                let (a, b) = (self.g.node(), self.g.node());
                self.g.link(&c.t, a);
                self.g.link(&c.f, b);
                Flow {
                    entry: c.entry,
                    exits: vec![a, b],
                }
            }
            8 if breaks.is_some() => {
                self.out.push_str("if (");
                let c = self.cond(0);
                self.out.push_str(") break;\n");
                breaks.as_mut().unwrap().extend(c.t);
                Flow {
                    entry: c.entry,
                    exits: c.f,
                }
            }
            _ => self.simple(),
        }
    }
}

fn cyclomatic_oracle() {
    let (mut checked, mut max_cc, mut short_circuits) = (0, 0, 0);
    for seed in 0..CFG_PROGRAMS as u64 {
        let mut graphs = Vec::new();
        let mut text = String::new();
        for f in 0..1 + (seed % 3) {
            let mut g = Graph::default();
            let mut gen = Gen {
                rng: ChaCha8Rng::seed_from_u64(seed * 7 + f),
                g: &mut g,
                out: String::new(),
            };
            let start = gen.g.node();
            let body = gen.block(0, &mut None);
            let end = gen.g.node();
            gen.g.link(&[start], body.entry);
            gen.g.link(&body.exits, end);
            text.push_str(&format!(
                "int f{f}(int x, int y, int z, int n) {{\nint i;\n{}return x;\n}}\n\n",
                gen.out
            ));
            graphs.push(g);
        }
        short_circuits += usize::from(text.contains("&&") || text.contains("||"));
        let file = SourceFile::from_text("s", "p.c", LanguageId::C, &text);
        let q = module_quality(&file).unwrap();
        assert_eq!(q.functions.len(), graphs.len(), "program {seed}:\n{text}");
        for (func, g) in q.functions.iter().zip(&graphs) {
            assert_eq!(g.components(), 1);
            let oracle = cfg_cyclomatic(
                &ControlFlowGraph::new(g.nodes, g.edges.len() as u64, g.components()).unwrap(),
            );
            assert_eq!(
                func.cc as i64, oracle,
                "program {seed}, {}:\n{text}",
                func.name
            );
            checked += 1;
            max_cc = max_cc.max(func.cc);
        }
    }
    assert!(checked >= CFG_PROGRAMS);
    assert!(
        max_cc >= 15 && short_circuits >= CFG_PROGRAMS / 4,
        "generator too tame: max cc {max_cc}, {short_circuits} with && or ||"
    );
}

// 4 -------------------------------------------------------------------------

fn mi_formula() {
    let hand = 100.0 * (171.0 - 5.2 * 100f64.ln() - 0.23 * 5.0 - 16.2 * 100f64.ln()) / 171.0;
    let mi = maintainability_index(100.0, 5.0, 100.0).unwrap().value;
    close(mi, hand, 1e-9, "MI vs hand evaluation");
    close(mi, 41.70, MI_TOL, "MI(100,5,100)");
    assert_eq!(maintainability_index(1.0, 0.0, 1.0).unwrap().value, 100.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let (v, m, s) = (
            rng.random_range(1.0..1e5),
            rng.random_range(0.0..50.0),
            rng.random_range(1.0..1e4),
        );
        let base = maintainability_index(v, m, s).unwrap().value;
        let h = 1e-3;
        assert!(maintainability_index(v + h * v, m, s).unwrap().value < base);
        assert!(maintainability_index(v, m + h, s).unwrap().value < base);
        assert!(maintainability_index(v, m, s + h * s).unwrap().value < base);
    }
}

// 5 -------------------------------------------------------------------------

fn textual_clones() {
    let planted = [
        "for (i = 0; i < len; i++) {",
        "    key[i] ^= 0x5A;",
        "    key[i] = (key[i] << 3) | (key[i] >> 5);",
        "}",
        "memcpy(out, key, len);",
        "out[len] = 0;",
        "return send(sock, out, len, 0);",
    ];
    let mutated: Vec<String> = planted
        .iter()
        .map(|l| format!("  {}  ", l.to_uppercase().replace(' ', "   ")))
        .collect();
    let a = format!(
        "int first(int q) {{\n  q += 1;\n{}\n  return q;\n}}\n",
        planted.join("\n")
    );
    let b = format!(
        "static void second(void) {{\n  puts(\"x\");\n  abort();\n{}\n}}\n",
        mutated.join("\n")
    );
    let na = clonediff::normalize(&SourceFile::from_text("a", "a.c", LanguageId::C, &a));
    let nb = clonediff::normalize(&SourceFile::from_text("b", "b.c", LanguageId::C, &b));
    let at5 = clonediff::detect_pair(&na, &nb, 5);
    assert_eq!(at5.len(), 1, "{at5:?}");
    assert_eq!(at5[0].length_sloc, 7);
    assert!(clonediff::detect_pair(&na, &nb, 10).is_empty());

    let asm: Vec<String> = (0..12)
        .map(|i| format!("    mov eax, [ebp+{}]\n    xor eax, {i}", 4 * i))
        .collect();
    let asm: Vec<String> = asm
        .join("\n")
        .lines()
        .take(12)
        .map(str::to_string)
        .collect();
    let x = format!("start:\n    push ebp\n{}\n    ret\n", asm.join("\n"));
    let y = format!(
        "entry:\n    nop\n    nop\n{}\n    int 0x80\n",
        asm.join("\n")
    );
    let nx = clonediff::normalize(&SourceFile::from_text(
        "x",
        "x.asm",
        LanguageId::Assembly,
        &x,
    ));
    let ny = clonediff::normalize(&SourceFile::from_text(
        "y",
        "y.asm",
        LanguageId::Assembly,
        &y,
    ));
    let threshold = clonediff::CloneThresholds::default().for_language(LanguageId::Assembly);
    assert_eq!(threshold, 10);
    let found = clonediff::detect_pair(&nx, &ny, threshold);
    assert_eq!(found.len(), 1, "{found:?}");
    assert_eq!(found[0].length_sloc, 12);
}

// 6 -------------------------------------------------------------------------

const INFECT_EXES: &str = "int InfectExes(void){
WIN32_FIND_DATA d32;
char MyFile[256];
GetFileName(MyFile,sizeof(MyFile));
";

const INFECT_FILES: &str = "int InfectFiles(void){
WIN32_FIND_DATA w32;
char FileName[256];
GetFileName(FileName,sizeof(FileName));
";

/// The fragments stop after four lines; these bodies finish both functions
/// with the same renaming so they reach the default 100-token minimum.
const EXES_TAIL: &str = "HANDLE hFind = FindFirstFile(\"*.exe\", &d32);
if (hFind == INVALID_HANDLE_VALUE) return 0;
SetFileAttributes(MyFile, FILE_ATTRIBUTE_HIDDEN);
do {
  if (strcmp(d32.cFileName, MyFile) != 0) {
    CopyFile(MyFile, d32.cFileName, FALSE);
  }
} while (FindNextFile(hFind, &d32));
FindClose(hFind);
return 1;
}
";

const FILES_TAIL: &str = "HANDLE hSearch = FindFirstFile(\"*.scr\", &w32);
if (hSearch == INVALID_HANDLE_VALUE) return 0;
SetFileAttributes(FileName, FILE_ATTRIBUTE_HIDDEN);
do {
  if (strcmp(w32.cFileName, FileName) != 0) {
    CopyFile(FileName, w32.cFileName, FALSE);
  }
} while (FindNextFile(hSearch, &w32));
FindClose(hSearch);
return 1;
}
";

fn ast_clusters(a: &str, b: &str, params: &cloneast::AstParams) -> Vec<cloneast::VectorCluster> {
    let mut vectors = Vec::new();
    for (id, text) in [("a", a), ("b", b)] {
        let parsed = cloneast::parse_source(text, LanguageId::Cpp);
        let at = FileRef {
            sample_id: id.into(),
            path: format!("{id}.cpp").into(),
        };
        vectors.extend(cloneast::vectorize(
            &parsed.tree,
            &at,
            params.min_tokens,
            params.stride,
        ));
    }
    cloneast::cluster(&vectors, params.similarity)
}

fn spans_both(c: &cloneast::VectorCluster) -> bool {
    let ids: std::collections::BTreeSet<_> = c
        .members
        .iter()
        .map(|m| m.source.sample_id.as_str())
        .collect();
    ids.len() == 2
}

fn structural_clones() {
    let defaults = cloneast::AstParams::default();
    assert_eq!(
        (defaults.min_tokens, defaults.stride, defaults.similarity),
        (100, 2, 1.0)
    );
    let (a, b) = (
        format!("{INFECT_EXES}{EXES_TAIL}"),
        format!("{INFECT_FILES}{FILES_TAIL}"),
    );

    let full = ast_clusters(&a, &b, &defaults);
    let whole_fn = full
        .iter()
        .find(|c| spans_both(c) && c.members.iter().all(|m| m.source.span.start == 1));
    assert!(
        whole_fn.is_some(),
        "completed functions not clustered: {full:?}"
    );

    // The verbatim four-line fragments are short, so lower the token floor.
    let small = cloneast::AstParams {
        min_tokens: 10,
        ..defaults
    };
    let frag = ast_clusters(INFECT_EXES, INFECT_FILES, &small);
    assert!(
        frag.iter().any(spans_both),
        "fragments not clustered: {frag:?}"
    );

    let threshold = clonediff::CloneThresholds::default().for_language(LanguageId::Cpp);
    for (x, y) in [(a.as_str(), b.as_str()), (INFECT_EXES, INFECT_FILES)] {
        let nx = clonediff::normalize(&SourceFile::from_text("a", "a.cpp", LanguageId::Cpp, x));
        let ny = clonediff::normalize(&SourceFile::from_text("b", "b.cpp", LanguageId::Cpp, y));
        assert!(clonediff::detect_pair(&nx, &ny, threshold).is_empty());
    }
}

// 7 -------------------------------------------------------------------------

fn rename_false_positive() {
    let vec_of = |text: &str| {
        let parsed = cloneast::parse_source(text, LanguageId::C);
        let at = FileRef {
            sample_id: "s".into(),
            path: "x.c".into(),
        };
        let v = cloneast::vectorize(&parsed.tree, &at, 1, 2);
        assert!(!v.is_empty());
        v.into_iter().map(|v| v.counts).collect::<Vec<_>>()
    };
    assert_eq!(
        vec_of("int a[] = {1, 2, 3};"),
        vec_of("char b[] = {'x', 'y', 'z'};")
    );
    assert_eq!(
        vec_of("long t[] = {7, 8};"),
        vec_of("double u[] = {0.5, 1e3};")
    );
}

// 8 -------------------------------------------------------------------------

fn trend_regression() {
    let exact: Vec<_> = (2000..=2020)
        .map(|y| TimeSeriesPoint {
            year: y,
            value: 5_000.0 * 1.14f64.powi(y - 2000),
        })
        .collect();
    // Three samples per year with noise that cancels in log space.
    let noisy: Vec<_> = exact
        .iter()
        .flat_map(|p| {
            [-0.3, 0.0, 0.3].map(|d: f64| TimeSeriesPoint {
                year: p.year,
                value: p.value * d.exp(),
            })
        })
        .collect();
    for pts in [&exact, &noisy] {
        let fit = exp_fit(pts).unwrap();
        close(fit.annual_factor, 1.14, GROWTH_TOL, "annual factor");
        close(
            fit.doubling_years.unwrap(),
            5.29,
            DOUBLING_TOL,
            "doubling years",
        );
    }
    let yearly = trends::aggregate(&noisy, trends::Aggregation::YearlyMean);
    assert_eq!(yearly.len(), 21);
}

// 9 -------------------------------------------------------------------------

fn distribution_tests() {
    let same: Vec<f64> = (0..40).map(|i| (i % 7) as f64).collect();
    let r = ks_two_sample(&same, &same).unwrap();
    assert_eq!((r.d, r.p_value), (0.0, 1.0));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for trial in 0..10 {
        let a: Vec<f64> = (0..50).map(|_| rng.random_range(1..=1000) as f64).collect();
        let shift = (trial % 3) as f64 * 60.0;
        let b: Vec<f64> = (0..50)
            .map(|_| rng.random_range(1..=1000) as f64 + shift)
            .collect();
        let asym = ks_two_sample(&a, &b).unwrap().p_value;
        let perm = ks_permutation_p(&a, &b, 5_000, trial).unwrap();
        worst = worst.max((asym - perm).abs());
    }
    assert!(
        worst <= PERM_AGREEMENT,
        "asymptotic vs permutation p differ by {worst}"
    );

    // Function CC drawn from a geometric-like law: 1 + failures before success.
    let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let mut cc = 1;
                while cc < 60 && rng.random_bool(0.7) {
                    cc += 1;
                }
                cc as f64
            })
            .collect()
    };
    let mut kept = 0;
    for _ in 0..100 {
        let (a, b) = (draw(&mut rng, 300), draw(&mut rng, 300));
        let hi = a.iter().chain(&b).fold(1.0f64, |m, &v| m.max(v)) as i64;
        let r = chi_square_hist(
            &Histogram::integer(&a, 1, hi),
            &Histogram::integer(&b, 1, hi),
        )
        .unwrap();
        if r.p_value >= ALPHA {
            kept += 1;
        }
    }
    assert!(
        kept >= NOT_REJECTED_MIN,
        "only {kept}/100 same-distribution trials kept"
    );

    let low: Vec<f64> = (0..60).map(|i| 1.0 + (i % 4) as f64).collect();
    let high: Vec<f64> = (0..60).map(|i| 20.0 + (i % 9) as f64).collect();
    assert!(ks_two_sample(&low, &high).unwrap().p_value < ALPHA);
}

// 10 ------------------------------------------------------------------------

fn family_base(rng: &mut ChaCha8Rng, family: usize) -> Vec<String> {
    let calls = [
        "memcpy",
        "strcpy",
        "send",
        "recv",
        "CreateFile",
        "WriteFile",
        "RegSetValue",
        "connect",
        "socket",
        "closesocket",
    ];
    let ops = ["+", "^", "|", "&", "-", "<<", ">>"];
    (0..36)
        .map(|i| match rng.random_range(0..4) {
            0 => format!(
                "v{i} = v{} {} {};",
                rng.random_range(0..36),
                ops[rng.random_range(0..ops.len())],
                rng.random_range(0..999)
            ),
            1 => format!(
                "if (v{i} > {}) {{ {}(v{i}, buf{family}, {}); }}",
                rng.random_range(0..99),
                calls[rng.random_range(0..calls.len())],
                rng.random_range(1..64)
            ),
            2 => format!(
                "for (k = 0; k < {}; k++) v{i} += tbl[k];",
                rng.random_range(2..40)
            ),
            _ => format!(
                "{}(h{i}, \"{}\", v{i});",
                calls[rng.random_range(0..calls.len())],
                ["cfg", "key", "run", "log", "tmp"][rng.random_range(0..5)]
            ),
        })
        .collect()
}

fn mutate(rng: &mut ChaCha8Rng, base: &[String], variant: usize) -> String {
    let mut lines: Vec<String> = base.to_vec();
    // Identifier renames and new constants are erased by canonicalization.
    let suffix = format!("_{variant}");
    for l in &mut lines {
        *l = l
            .replace("v", &format!("val{suffix}"))
            .replace("buf", "buffer");
        if rng.random_bool(0.3) {
            *l = l.replace(" 1", " 7").replace("2", "9");
        }
    }
    // One structural edit.
    let at = rng.random_range(0..lines.len());
    match variant % 3 {
        0 => {
            lines.remove(at);
        }
        1 => lines.insert(at, format!("x{variant} = 0;")),
        _ => lines[at].push_str(" y = 1;"),
    }
    lines.join(if variant.is_multiple_of(2) {
        "\n"
    } else {
        "\n  "
    })
}

fn triage_compression() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut digests = Vec::new();
    let mut family_of = Vec::new();
    for family in 0..FAMILIES {
        let base = family_base(&mut rng, family);
        for variant in 0..10 {
            let text = mutate(&mut rng, &base, variant);
            digests.push(clonetriage::digest(digests.len(), &text, true));
            family_of.push(family);
        }
    }
    let clusters = clonetriage::group(&digests, clonetriage::TriageOptions::default().threshold);
    assert_eq!(clonetriage::TriageOptions::default().threshold, 90);
    assert!(
        clusters.len().abs_diff(FAMILIES) <= FAMILY_SLACK,
        "{} clusters: {:?}",
        clusters.len(),
        clusters
            .iter()
            .map(|c| c.members.iter().map(|&m| family_of[m]).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    );
    for c in &clusters {
        let fams: std::collections::BTreeSet<_> = c.members.iter().map(|&m| family_of[m]).collect();
        assert_eq!(fams.len(), 1, "cluster mixes families {fams:?}");
    }
}

// 11 ------------------------------------------------------------------------

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    walk(dir, dir)
}

fn walk(root: &Path, dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(root, &p));
        } else {
            out.insert(
                p.strip_prefix(root).unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            );
        }
    }
    out
}

fn determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let shared: String = (0..12)
        .map(|i| format!("  total = total * 31 + data[{i}];\n"))
        .collect();
    let mut rows = Vec::new();
    for s in 0..6 {
        let id = format!("s{s}");
        let c = format!(
            "/* sample {s} */\nint work{s}(const int *data) {{\n  int total = {s};\n{shared}  if (total > {s} && data[0]) total--;\n  return total;\n}}\n"
        );
        let asm: String = (0..14).map(|i| format!("    mov eax, {i}\n")).collect();
        let py =
            format!("# helper\ndef h{s}(x):\n    if x or {s}:\n        return x\n    return 0\n");
        write_sample(
            &tmp.path().join(&id),
            &[
                ("main.c", c),
                ("boot.asm", format!("start:\n{asm}    ret\n")),
                ("tool.py", py),
            ],
        );
        rows.push((id, 2000 + 3 * s, ["V", "W", "B"][s as usize % 3]));
    }
    let rows: Vec<(&str, i32, &str)> = rows.iter().map(|(a, b, c)| (a.as_str(), *b, *c)).collect();
    let manifest = manifest(tmp.path(), &rows);

    let mut snaps = Vec::new();
    for (i, jobs) in [8, 8, 1].into_iter().enumerate() {
        let mut cfg = RunConfig::new(&manifest, tmp.path().join(format!("out{i}")));
        cfg.jobs = Some(jobs);
        cfg.svg = true;
        cfg.ast.min_tokens = 20;
        report::run(&cfg).unwrap();
        snaps.push(snapshot(&cfg.output_dir));
    }
    assert!(snaps[0].len() >= 10, "{:?}", snaps[0].keys());
    assert!(!String::from_utf8_lossy(&snaps[0]["clones.jsonl"]).is_empty());
    assert_eq!(snaps[0], snaps[1], "two --jobs 8 runs differ");
    assert_eq!(snaps[0], snaps[2], "--jobs 8 and --jobs 1 differ");
}
