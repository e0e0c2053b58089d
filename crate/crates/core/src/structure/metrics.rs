use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageId;
use crate::lexer::{Token, TokenKind};

use super::FunctionSpan;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("control-flow graph needs N >= 1, P >= 1 and E >= N - P (got N={nodes}, E={edges}, P={components})")]
    InvalidGraph {
        nodes: u64,
        edges: u64,
        components: u64,
    },
    #[error(
        "maintainability index needs positive average volume and SLOC (V={volume}, SLOC={sloc})"
    )]
    Domain { volume: f64, sloc: f64 },
}

/// Decision keywords of brace languages. `default` adds nothing.
const BRACE_DECISIONS: &[&str] = &[
    "if", "for", "while", "case", "catch", "foreach", "elseif", "?", "&&", "||",
];
const PY_DECISIONS: &[&str] = &["if", "elif", "for", "while", "except", "and", "or"];

fn is_decision(lang: LanguageId, t: &Token) -> bool {
    if !matches!(
        t.kind,
        TokenKind::Keyword | TokenKind::Ident | TokenKind::Punct
    ) {
        return false;
    }
    let table = if lang == LanguageId::Python {
        PY_DECISIONS
    } else {
        BRACE_DECISIONS
    };
    table.contains(&t.text.as_str())
}

/// Decision points in a token stream.
pub fn decision_count(lang: LanguageId, tokens: &[Token]) -> u32 {
    tokens.iter().filter(|t| is_decision(lang, t)).count() as u32
}

/// McCabe complexity by decision counting: `1 + decisions`.
pub fn cyclomatic(span: &FunctionSpan) -> u32 {
    1 + decision_count(span.language, &span.tokens)
}

/// Summary of a control-flow graph: node, edge and connected-component counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlFlowGraph {
    nodes: u64,
    edges: u64,
    components: u64,
}

impl ControlFlowGraph {
    pub fn new(nodes: u64, edges: u64, components: u64) -> Result<Self, MetricError> {
        if nodes < 1 || components < 1 || components > nodes || edges + components < nodes {
            return Err(MetricError::InvalidGraph {
                nodes,
                edges,
                components,
            });
        }
        Ok(ControlFlowGraph {
            nodes,
            edges,
            components,
        })
    }

    pub fn nodes(&self) -> u64 {
        self.nodes
    }
    pub fn edges(&self) -> u64 {
        self.edges
    }
    pub fn components(&self) -> u64 {
        self.components
    }
}

/// `E - N + 2P`.
pub fn cfg_cyclomatic(g: &ControlFlowGraph) -> i64 {
    g.edges as i64 - g.nodes as i64 + 2 * g.components as i64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalsteadCounts {
    pub distinct_operators: usize,
    pub distinct_operands: usize,
    pub total_operators: usize,
    pub total_operands: usize,
}

impl HalsteadCounts {
    pub fn of(tokens: &[Token]) -> Self {
        let mut ops = HashSet::new();
        let mut opnds = HashSet::new();
        let mut c = HalsteadCounts::default();
        for t in tokens {
            match t.kind {
                TokenKind::Preproc => {}
                _ if t.is_operand() => {
                    c.total_operands += 1;
                    opnds.insert(t.text.as_str());
                }
                _ => {
                    c.total_operators += 1;
                    ops.insert(t.text.as_str());
                }
            }
        }
        c.distinct_operators = ops.len();
        c.distinct_operands = opnds.len();
        c
    }

    pub fn length(&self) -> usize {
        self.total_operators + self.total_operands
    }

    pub fn vocabulary(&self) -> usize {
        self.distinct_operators + self.distinct_operands
    }

    /// `V = N · log2(n)`; zero for an empty or single-symbol stream.
    pub fn volume(&self) -> f64 {
        halstead_volume_from(self.length(), self.vocabulary())
    }
}

pub fn halstead_volume_from(length: usize, vocabulary: usize) -> f64 {
    if vocabulary <= 1 {
        0.0
    } else {
        length as f64 * (vocabulary as f64).log2()
    }
}

pub fn halstead_volume(span: &FunctionSpan) -> f64 {
    HalsteadCounts::of(&span.tokens).volume()
}

/// Modules below this index are flagged as hard to maintain.
pub const LOW_MAINTAINABILITY: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaintainabilityIndex {
    pub value: f64,
    pub low_maintainability: bool,
}

fn mi_raw(v_term: f64, m_bar: f64, sloc_bar: f64) -> f64 {
    100.0 * (171.0 - v_term - 0.23 * m_bar - 16.2 * sloc_bar.ln()) / 171.0
}

/// `100 · (171 − 5.2·ln V̄ − 0.23·M̄ − 16.2·ln SLOC̄) / 171`, unclamped.
pub fn maintainability_index(
    v_bar: f64,
    m_bar: f64,
    sloc_bar: f64,
) -> Result<MaintainabilityIndex, MetricError> {
    if !(v_bar > 0.0 && sloc_bar > 0.0) {
        return Err(MetricError::Domain {
            volume: v_bar,
            sloc: sloc_bar,
        });
    }
    let value = mi_raw(5.2 * v_bar.ln(), m_bar, sloc_bar);
    Ok(MaintainabilityIndex {
        value,
        low_maintainability: value < LOW_MAINTAINABILITY,
    })
}

/// The same index with the volume term dropped. Since `ln V̄ ≥ 0` whenever
/// `V̄ ≥ 1`, this bounds the full index from above.
pub fn maintainability_upper_bound(
    m_bar: f64,
    sloc_bar: f64,
) -> Result<MaintainabilityIndex, MetricError> {
    if sloc_bar.is_nan() || sloc_bar <= 0.0 {
        return Err(MetricError::Domain {
            volume: f64::NAN,
            sloc: sloc_bar,
        });
    }
    let value = mi_raw(0.0, m_bar, sloc_bar);
    Ok(MaintainabilityIndex {
        value,
        low_maintainability: value < LOW_MAINTAINABILITY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::tokenize;
    use proptest::prelude::*;

    fn span(src: &str, lang: LanguageId) -> FunctionSpan {
        FunctionSpan {
            file: "t".into(),
            name: "t".into(),
            start_line: 1,
            end_line: 1,
            language: lang,
            tokens: tokenize(src, lang),
        }
    }

    #[test]
    fn straight_line_is_one() {
        assert_eq!(
            cyclomatic(&span("int f() { int a = 1; return a; }", LanguageId::C)),
            1
        );
    }

    #[test]
    fn single_if_is_two() {
        assert_eq!(
            cyclomatic(&span(
                "int f(int a) { if (a) return 1; return 0; }",
                LanguageId::C
            )),
            2
        );
    }

    #[test]
    fn if_for_and() {
        let s = span(
            "void f(int a, int b) { if (a && b) { g(); } for (int i = 0; i < a; i++) { h(); } }",
            LanguageId::C,
        );
        assert_eq!(cyclomatic(&s), 4);
    }

    #[test]
    fn switch_counts_cases_not_default() {
        let s = span(
            "int f(int k) { switch (k) { case 1: return 1; case 2: return 2; default: return 0; } }",
            LanguageId::C,
        );
        assert_eq!(cyclomatic(&s), 3);
    }

    #[test]
    fn python_decisions() {
        let s = span(
            "def f(a, b):\n    if a and b:\n        pass\n    elif a or b:\n        pass\n    try:\n        g()\n    except E:\n        pass\n",
            LanguageId::Python,
        );
        assert_eq!(cyclomatic(&s), 6);
    }

    #[test]
    fn cfg_formula() {
        assert_eq!(cfg_cyclomatic(&ControlFlowGraph::new(2, 1, 1).unwrap()), 1);
        assert_eq!(cfg_cyclomatic(&ControlFlowGraph::new(4, 4, 1).unwrap()), 2);
        assert_eq!(cfg_cyclomatic(&ControlFlowGraph::new(4, 2, 2).unwrap()), 2);
        assert!(ControlFlowGraph::new(0, 0, 1).is_err());
        assert!(ControlFlowGraph::new(4, 1, 1).is_err());
        assert!(ControlFlowGraph::new(2, 1, 0).is_err());
    }

    #[test]
    fn halstead_examples() {
        assert_eq!(HalsteadCounts::of(&[]).volume(), 0.0);
        assert_eq!(halstead_volume_from(10, 4), 20.0);
        let single = span("x", LanguageId::C);
        assert_eq!(halstead_volume(&single), 0.0);

        // a = b + a ;  -> operators {=,+,;} x3, operands {a,b} x3
        let c = HalsteadCounts::of(&tokenize("a = b + a;", LanguageId::C));
        assert_eq!(
            c,
            HalsteadCounts {
                distinct_operators: 3,
                distinct_operands: 2,
                total_operators: 3,
                total_operands: 3
            }
        );
        assert!((c.volume() - 6.0 * 5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn mi_examples() {
        let mi = maintainability_index(100.0, 5.0, 100.0).unwrap();
        // 100 * (171 - 5.2*4.60517 - 1.15 - 16.2*4.60517) / 171
        let hand =
            100.0 * (171.0 - 5.2 * 4.605_170_186 - 0.23 * 5.0 - 16.2 * 4.605_170_186) / 171.0;
        assert!((mi.value - hand).abs() < 1e-6);
        assert!((mi.value - 41.70).abs() < 0.01);
        assert!(!mi.low_maintainability);

        assert_eq!(maintainability_index(1.0, 0.0, 1.0).unwrap().value, 100.0);

        let low = maintainability_index(50_000.0, 40.0, 5_000.0).unwrap();
        assert!(low.value < 20.0 && low.low_maintainability);

        assert!(maintainability_index(0.0, 1.0, 1.0).is_err());
        assert!(maintainability_index(1.0, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn mi_decreasing(v in 1.0f64..1e6, m in 1.0f64..100.0, s in 1.0f64..1e5) {
            let base = maintainability_index(v, m, s).unwrap().value;
            let h = 1e-3;
            prop_assert!(maintainability_index(v * (1.0 + h), m, s).unwrap().value < base);
            prop_assert!(maintainability_index(v, m + h, s).unwrap().value < base);
            prop_assert!(maintainability_index(v, m, s * (1.0 + h)).unwrap().value < base);
            prop_assert!(maintainability_upper_bound(m, s).unwrap().value >= base);
        }

        #[test]
        fn cc_ignores_renaming(a in "[a-z]{1,6}", b in "[a-z]{1,6}") {
            prop_assume!(!crate::lexer::is_keyword(LanguageId::C, &a));
            prop_assume!(!crate::lexer::is_keyword(LanguageId::C, &b));
            let template = |x: &str, y: &str| format!("int {x}(int {y}) {{ if ({y} > 0 && {y} < 9) return {y}; while ({y}) {y}--; return 0; }}");
            let base = cyclomatic(&span(&template("f", "q"), LanguageId::C));
            prop_assert_eq!(cyclomatic(&span(&template(&a, &b), LanguageId::C)), base);
        }
    }
}
