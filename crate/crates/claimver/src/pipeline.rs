//! Composes retrieval, rationale selection, and label prediction into
//! full-system predictions, and runs the oracle-ablation grid.
//!
//! Claims are processed independently (in parallel under rayon) and merged
//! in ascending claim-id order, so output is deterministic for a fixed
//! configuration regardless of thread count.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;

use crate::data::{Claim, ClaimId, Corpus, DocId, GoldEvidence, Label, PredictedEntry, Prediction};
use crate::error::{Error, Result};
use crate::metrics::{self, CapPolicy, MetricReport};
use crate::retrieval::{self, FieldMode, NgramRange, TfIdfIndex};
use crate::stages::{
    ExternalProbsLabeler, ExternalScoreSelector, FirstSentenceSelector, FixedLabeler,
    LabelPredictor, LabelerSpec, LastSentenceSelector, OracleLabeler, OracleSelector,
    RationaleSelector, SelectionRule, SelectorSpec, TfIdfSelector, DEFAULT_THRESHOLD,
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// The abstract-retrieval stage: TF-IDF top-k, or the gold evidence oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalSpec {
    TfIdf { k: usize },
    Oracle,
}

impl RetrievalSpec {
    pub fn requires_gold(&self) -> bool {
        matches!(self, RetrievalSpec::Oracle)
    }
}

impl Default for RetrievalSpec {
    fn default() -> RetrievalSpec {
        RetrievalSpec::TfIdf {
            k: retrieval::DEFAULT_K,
        }
    }
}

impl std::str::FromStr for RetrievalSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<RetrievalSpec> {
        match s.split_once(':') {
            None if s == "oracle" => Ok(RetrievalSpec::Oracle),
            None if s == "tfidf" => Ok(RetrievalSpec::default()),
            Some(("tfidf", k)) => {
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::usage(format!("tfidf: bad k {k:?}")))?;
                if k == 0 {
                    return Err(Error::usage("tfidf: k must be at least 1"));
                }
                Ok(RetrievalSpec::TfIdf { k })
            }
            _ => Err(Error::usage(format!("unknown retrieval spec {s:?}"))),
        }
    }
}

/// TF-IDF featurization options shared by retrieval and sentence ranking.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IndexOptions {
    pub ngram_range: NgramRange,
    pub field_mode: FieldMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub retrieval: RetrievalSpec,
    pub selector: SelectorSpec,
    pub labeler: LabelerSpec,
    /// Sentence-score file backing `threshold:`/`topk:` selectors.
    pub score_file: Option<PathBuf>,
    /// Reserved for future stochastic stages; all shipped stages are
    /// deterministic.
    pub seed: u64,
    pub index: IndexOptions,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            retrieval: RetrievalSpec::default(),
            selector: SelectorSpec::TfIdfTopK(retrieval::DEFAULT_K),
            labeler: LabelerSpec::Always(Label::Supports),
            score_file: None,
            seed: 0,
            index: IndexOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn requires_gold(&self) -> bool {
        self.retrieval.requires_gold()
            || self.selector.requires_gold()
            || self.labeler.requires_gold()
    }
}

// ---------------------------------------------------------------------------
// Stage construction
// ---------------------------------------------------------------------------

fn build_selector(
    config: &PipelineConfig,
    corpus: &Corpus,
    gold: Option<&[GoldEvidence]>,
    index: Option<&Arc<TfIdfIndex>>,
) -> Result<Box<dyn RationaleSelector>> {
    let external_scores = |path: &PathBuf| crate::io::load_sentence_scores(path, corpus);
    match &config.selector {
        SelectorSpec::Oracle => {
            let gold = gold.ok_or_else(|| Error::usage("--selector oracle requires gold evidence"))?;
            Ok(Box::new(OracleSelector::new(gold)))
        }
        SelectorSpec::First => Ok(Box::new(FirstSentenceSelector)),
        SelectorSpec::Last => Ok(Box::new(LastSentenceSelector)),
        SelectorSpec::TfIdfThreshold(t) => Ok(Box::new(TfIdfSelector::new(
            Arc::clone(index.expect("index built for tfidf selector")),
            SelectionRule::Threshold(*t),
        ))),
        SelectorSpec::TfIdfTopK(k) => Ok(Box::new(TfIdfSelector::new(
            Arc::clone(index.expect("index built for tfidf selector")),
            SelectionRule::TopK(*k),
        ))),
        SelectorSpec::Threshold(t) => {
            let path = config.score_file.as_ref().ok_or_else(|| {
                Error::usage("--selector threshold:<t> requires --scores <file>")
            })?;
            Ok(Box::new(ExternalScoreSelector::new(
                external_scores(path)?,
                SelectionRule::Threshold(*t),
            )))
        }
        SelectorSpec::TopK(k) => {
            let path = config.score_file.as_ref().ok_or_else(|| {
                Error::usage("--selector topk:<k> requires --scores <file>")
            })?;
            Ok(Box::new(ExternalScoreSelector::new(
                external_scores(path)?,
                SelectionRule::TopK(*k),
            )))
        }
        SelectorSpec::External(path) => Ok(Box::new(ExternalScoreSelector::new(
            external_scores(path)?,
            SelectionRule::Threshold(DEFAULT_THRESHOLD),
        ))),
    }
}

fn build_labeler(
    config: &PipelineConfig,
    gold: Option<&[GoldEvidence]>,
) -> Result<Box<dyn LabelPredictor>> {
    match &config.labeler {
        LabelerSpec::Oracle => {
            let gold = gold.ok_or_else(|| Error::usage("--labeler oracle requires gold evidence"))?;
            Ok(Box::new(OracleLabeler::new(gold)))
        }
        LabelerSpec::External(path) => Ok(Box::new(ExternalProbsLabeler::new(
            crate::io::load_label_probs(path)?,
        ))),
        LabelerSpec::Always(label) => Ok(Box::new(FixedLabeler(*label))),
    }
}

// ---------------------------------------------------------------------------
// Pipeline execution
// ---------------------------------------------------------------------------

/// Runs retrieval, selection, and labeling for every claim. Candidates
/// labeled `NotEnoughInfo` are dropped, so a claim whose candidates all
/// come back NEI yields an empty entry map. Output is sorted by claim id.
pub fn run_pipeline(
    corpus: &Corpus,
    claims: &[Claim],
    gold: Option<&[GoldEvidence]>,
    config: &PipelineConfig,
) -> Result<Vec<Prediction>> {
    if config.requires_gold() && gold.is_none() {
        return Err(Error::usage(
            "oracle stages require gold evidence (provide --gold or a claim file with evidence)",
        ));
    }
    {
        let mut ids = std::collections::BTreeSet::new();
        for claim in claims {
            if !ids.insert(claim.id) {
                return Err(Error::invalid(format!("duplicate claim id {}", claim.id)));
            }
        }
    }

    let needs_index =
        matches!(config.retrieval, RetrievalSpec::TfIdf { .. }) || config.selector.requires_index();
    let index = if needs_index {
        Some(Arc::new(retrieval::build_index(
            corpus,
            config.index.ngram_range,
            config.index.field_mode,
        )?))
    } else {
        None
    };

    let selector = build_selector(config, corpus, gold, index.as_ref())?;
    let labeler = build_labeler(config, gold)?;

    let gold_map: HashMap<ClaimId, &GoldEvidence> = match gold {
        Some(gold) => {
            let mut map = HashMap::with_capacity(gold.len());
            for ev in gold {
                if map.insert(ev.claim_id, ev).is_some() {
                    return Err(Error::invalid(format!(
                        "duplicate gold evidence record for claim {}",
                        ev.claim_id
                    )));
                }
            }
            map
        }
        None => HashMap::new(),
    };

    let mut predictions = claims
        .par_iter()
        .map(|claim| -> Result<Prediction> {
            let candidates: Vec<DocId> = match config.retrieval {
                RetrievalSpec::TfIdf { k } => index
                    .as_ref()
                    .expect("index built for tfidf retrieval")
                    .retrieve(&claim.text, k)
                    .into_iter()
                    .map(|(doc_id, _)| doc_id)
                    .collect(),
                RetrievalSpec::Oracle => gold_map
                    .get(&claim.id)
                    .map(|ev| ev.entries.keys().copied().collect())
                    .unwrap_or_default(),
            };

            let mut prediction = Prediction::new(claim.id);
            for doc_id in candidates {
                let doc = corpus.get(doc_id).ok_or_else(|| {
                    Error::invalid(format!(
                        "claim {}: candidate doc {doc_id} absent from corpus",
                        claim.id
                    ))
                })?;
                let selection = selector.select(claim, doc);
                let label = labeler.predict(claim, doc, &selection.sentences);
                if label == Label::NotEnoughInfo {
                    continue;
                }
                let mut entry = PredictedEntry::new(label, selection.sentences.iter().copied());
                entry.scores = selection.scores;
                prediction.entries.insert(doc_id, entry);
            }
            Ok(prediction)
        })
        .collect::<Result<Vec<Prediction>>>()?;

    predictions.sort_by_key(|p| p.claim_id);
    Ok(predictions)
}

// ---------------------------------------------------------------------------
// Ablation grid
// ---------------------------------------------------------------------------

/// One row of the ablation table: which stages ran as oracles, and the
/// resulting metrics at both levels.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub retrieval_oracle: bool,
    pub selection_oracle: bool,
    pub label_oracle: bool,
    pub sentence: MetricReport,
    pub abstract_level: MetricReport,
}

impl AblationRow {
    pub fn stage_names(&self) -> (&'static str, &'static str, &'static str) {
        let name = |oracle: bool| if oracle { "oracle" } else { "system" };
        (
            name(self.retrieval_oracle),
            name(self.selection_oracle),
            name(self.label_oracle),
        )
    }
}

/// The eight {system, oracle}^3 grid rows: triple oracle first, then the
/// double-oracle rows, the single-oracle rows, and the full system.
const GRID: [(bool, bool, bool); 8] = [
    (true, true, true),
    (false, true, true),
    (true, false, true),
    (true, true, false),
    (true, false, false),
    (false, true, false),
    (false, false, true),
    (false, false, false),
];

/// Runs every oracle/system combination of the three stages and evaluates
/// each run at both levels. `base_config` supplies the system stages and
/// must not itself contain oracle stages.
pub fn ablation_grid(
    corpus: &Corpus,
    claims: &[Claim],
    gold: &[GoldEvidence],
    base_config: &PipelineConfig,
    cap: CapPolicy,
) -> Result<Vec<AblationRow>> {
    if base_config.requires_gold() {
        return Err(Error::usage(
            "ablation base config must use system (non-oracle) stages",
        ));
    }
    GRID.iter()
        .map(|&(retrieval_oracle, selection_oracle, label_oracle)| {
            let mut config = base_config.clone();
            if retrieval_oracle {
                config.retrieval = RetrievalSpec::Oracle;
            }
            if selection_oracle {
                config.selector = SelectorSpec::Oracle;
            }
            if label_oracle {
                config.labeler = LabelerSpec::Oracle;
            }
            let preds = run_pipeline(corpus, claims, Some(gold), &config)?;
            Ok(AblationRow {
                retrieval_oracle,
                selection_oracle,
                label_oracle,
                sentence: metrics::evaluate_sentence_level(gold, &preds, corpus)?,
                abstract_level: metrics::evaluate_abstract_level(gold, &preds, corpus, cap)?,
            })
        })
        .collect()
}
