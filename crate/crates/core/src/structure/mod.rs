//! Function segmentation and quality metrics: cyclomatic complexity,
//! Halstead volume and the maintainability index.
//!
//! A "module" for the averages is one source file. Only languages with
//! function metrics take part; Assembly never does.

mod metrics;
mod segment;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::{LanguageId, SourceFile};
use crate::lexer::{tokenize, TokenKind};
use crate::linecount::{tally_lines, LanguageSyntax};

pub use metrics::{
    cfg_cyclomatic, cyclomatic, decision_count, halstead_volume, halstead_volume_from,
    maintainability_index, maintainability_upper_bound, ControlFlowGraph, HalsteadCounts,
    MaintainabilityIndex, MetricError, LOW_MAINTAINABILITY,
};
pub use segment::{segment_functions, FunctionSpan, SegmentWarning, Segmentation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionComplexity {
    pub file: PathBuf,
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
    pub cc: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleQuality {
    pub file: PathBuf,
    pub language: LanguageId,
    pub sloc: u64,
    pub halstead_volume: f64,
    pub functions: Vec<FunctionComplexity>,
    pub warnings: Vec<SegmentWarning>,
}

/// Per-file metrics. `None` when the language has no function metrics.
pub fn module_quality(file: &SourceFile) -> Option<ModuleQuality> {
    if !file.language.has_function_metrics() {
        return None;
    }
    let syntax = LanguageSyntax::for_language(file.language)?;
    let sloc = tally_lines(&file.text, &syntax).tally.sloc;
    let tokens: Vec<_> = tokenize(&file.joined_text(), file.language)
        .into_iter()
        .filter(|t| t.kind != TokenKind::Preproc)
        .collect();
    let volume = HalsteadCounts::of(&tokens).volume();
    let seg = segment::segment_tokens(&file.rel_path, file.language, tokens.clone(), &file.text);

    let mut functions: Vec<FunctionComplexity> = seg
        .spans
        .iter()
        .map(|s| FunctionComplexity {
            file: s.file.clone(),
            name: s.name.clone(),
            start_line: s.start_line,
            end_line: s.end_line,
            cc: cyclomatic(s),
        })
        .collect();
    // Script files with only top-level code count as one unit.
    let script = matches!(
        file.language,
        LanguageId::Python | LanguageId::JavaScript | LanguageId::Php
    );
    if functions.is_empty() && script && !tokens.is_empty() {
        functions.push(FunctionComplexity {
            file: file.rel_path.clone(),
            name: "<module>".into(),
            start_line: tokens[0].line,
            end_line: tokens[tokens.len() - 1].line,
            cc: 1 + decision_count(file.language, &tokens),
        });
    }
    Some(ModuleQuality {
        file: file.rel_path.clone(),
        language: file.language,
        sloc,
        halstead_volume: volume,
        functions,
        warnings: seg.warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub per_function_cc: Vec<FunctionComplexity>,
    /// Mean cyclomatic complexity per function.
    pub avg_cc: f64,
    /// Mean Halstead volume per module.
    pub avg_halstead_volume: f64,
    pub avg_sloc_per_module: f64,
    pub modules: usize,
    /// Index from all three averages; absent when the volume or SLOC average is zero.
    pub mi: Option<MaintainabilityIndex>,
    /// Index without the volume term.
    pub mi_upper_bound: Option<MaintainabilityIndex>,
    pub warnings: Vec<(PathBuf, SegmentWarning)>,
}

/// Aggregates module metrics. `None` when no module has any function.
pub fn quality_report(modules: &[ModuleQuality]) -> Option<QualityReport> {
    let per_function_cc: Vec<FunctionComplexity> = modules
        .iter()
        .flat_map(|m| m.functions.iter().cloned())
        .collect();
    if per_function_cc.is_empty() {
        return None;
    }
    let n = modules.len() as f64;
    let avg_cc =
        per_function_cc.iter().map(|f| f.cc as f64).sum::<f64>() / per_function_cc.len() as f64;
    let avg_halstead_volume = modules.iter().map(|m| m.halstead_volume).sum::<f64>() / n;
    let avg_sloc_per_module = modules.iter().map(|m| m.sloc as f64).sum::<f64>() / n;
    Some(QualityReport {
        avg_cc,
        avg_halstead_volume,
        avg_sloc_per_module,
        modules: modules.len(),
        mi: maintainability_index(avg_halstead_volume, avg_cc, avg_sloc_per_module).ok(),
        mi_upper_bound: maintainability_upper_bound(avg_cc, avg_sloc_per_module).ok(),
        warnings: modules
            .iter()
            .flat_map(|m| m.warnings.iter().map(move |w| (m.file.clone(), w.clone())))
            .collect(),
        per_function_cc,
    })
}
