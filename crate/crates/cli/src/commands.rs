use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use rex_core::eval::{
    answer_mode_for, evaluate, ic_distribution, match_ground_truth_metapaths, run_ablation,
    write_metrics_csv, AblationRow, AblationSetup, KnownAnswers, Metrics, Rank, VARIANTS,
};
use rex_core::explanation::{
    build_explanation, explanatory_paths, group_and_select, parse_metapaths, write_metapaths,
    ExplanationSubgraph, Metapath, OntologyHierarchy,
};
use rex_core::info::{
    compute_ic_table, default_cluster_count, fallback_embeddings, kmeans, read_embeddings, IcTable,
};
use rex_core::kg::{
    read_entity_types, read_hypotheses, read_triples, write_triples, Hypothesis, KnowledgeGraph,
    Path as KgPath,
};
use rex_core::pathfinder::{
    beam_search_infer, sample_rollouts, train, BeamConfig, Checkpoint, Policy, Query, TrainConfig,
    Trainer,
};
use rex_core::seed::{derive, derive_indexed};

use crate::config::RunConfig;
use crate::error::{data, runtime, CliError};
use crate::output::Staging;

pub const GRAPH_FILE: &str = "graph.tsv";
pub const CLUSTERS_FILE: &str = "clusters.tsv";
pub const IC_TABLE_FILE: &str = "ic_table.tsv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";

fn apply_types(kg: &mut KnowledgeGraph, cfg: &RunConfig) -> Result<(), CliError> {
    if let Some(p) = &cfg.entity_types {
        let (types, warnings) =
            read_entity_types(p, kg).map_err(data(format!("reading {}", p.display())))?;
        for w in warnings {
            warn!("{}: {w}", p.display());
        }
        kg.set_entity_types(types);
    }
    Ok(())
}

/// Loads triples, inverse-augments them, clusters entity embeddings and scores
/// information content. Writes the augmented graph, the cluster assignment and
/// the IC table.
pub fn preprocess(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let raw = read_triples(&cfg.triples).map_err(data(format!("reading {}", cfg.triples.display())))?;
    let mut kg = if cfg.add_inverse_edges {
        raw.add_inverse_edges()
    } else {
        raw
    };
    apply_types(&mut kg, cfg)?;
    info!("graph: {} triples, {} entities, {} relations", kg.len(), kg.num_entities(), kg.num_relations());

    let emb = match &cfg.embeddings {
        Some(p) => read_embeddings(p, &kg).map_err(data(format!("reading {}", p.display())))?,
        None => fallback_embeddings(&kg, cfg.clustering.fallback_dim, cfg.embedding_seed())
            .map_err(data("fallback embeddings"))?,
    };
    let k = cfg.clustering.k.unwrap_or_else(|| default_cluster_count(kg.num_entities()));
    let km = kmeans(&emb, k, cfg.cluster_seed(), cfg.clustering.max_iters)
        .map_err(data("clustering"))?;
    info!("k-means: k={k}, {} iterations", km.iterations);
    let clusters = km.assignment;
    let table = compute_ic_table(
        &kg,
        cfg.ic.mode,
        Some(&clusters),
        cfg.ic.normalization,
    )
    .map_err(data("information content"))?;

    let mut out = Staging::new(&cfg.output_dir)?;
    out.write(GRAPH_FILE, |w| write_triples(&kg, w))?;
    out.write(CLUSTERS_FILE, |w| clusters.write_tsv(&kg, w))?;
    out.write(IC_TABLE_FILE, |w| table.write_tsv(&kg, w))?;
    out.commit()
}

struct Prepared {
    kg: KnowledgeGraph,
    table: IcTable,
}

fn artifact(cfg: &RunConfig, name: &str) -> Result<PathBuf, CliError> {
    let p = cfg.output_dir.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(CliError::Data(format!(
            "`{}` not found; run `rex preprocess` with this config first",
            p.display()
        )))
    }
}

fn load_prepared(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let gp = artifact(cfg, GRAPH_FILE)?;
    let mut kg = read_triples(&gp).map_err(data(format!("reading {}", gp.display())))?;
    apply_types(&mut kg, cfg)?;
    let tp = artifact(cfg, IC_TABLE_FILE)?;
    let text = std::fs::read_to_string(&tp).map_err(data(format!("reading {}", tp.display())))?;
    let table = IcTable::parse_tsv(&text, &kg).map_err(data(format!("reading {}", tp.display())))?;
    Ok(Prepared { kg, table })
}

fn hypotheses(path: &Path, kg: &KnowledgeGraph) -> Result<Vec<Hypothesis>, CliError> {
    read_hypotheses(path, kg).map_err(data(format!("reading {}", path.display())))
}

fn load_checkpoint(cfg: &RunConfig, kg: &KnowledgeGraph) -> Result<Checkpoint, CliError> {
    let p = artifact(cfg, CHECKPOINT_FILE)?;
    let ckpt = Checkpoint::read(&p).map_err(data(format!("reading {}", p.display())))?;
    ckpt.check_vocabulary(kg).map_err(data(format!("checkpoint {}", p.display())))?;
    Ok(ckpt)
}

fn beam_for(cfg: &RunConfig, trained_with: &TrainConfig) -> BeamConfig {
    BeamConfig {
        beam_width: cfg.beam.beam_width,
        max_len: trained_with.max_len,
        answer_mode: answer_mode_for(trained_with),
    }
}

/// Trains a policy, or continues the stored one with `resume`. Writes the
/// checkpoint and the training log (appended to on resume).
pub fn train_cmd(cfg: &RunConfig, resume: bool) -> Result<Vec<PathBuf>, CliError> {
    let p = load_prepared(cfg)?;
    let train_path = cfg.require("train_split", &cfg.train_split)?;
    let hyps = hypotheses(train_path, &p.kg)?;
    let tcfg = cfg.training_for(cfg.seed);
    let (mut trainer, previous_log) = if resume {
        let ckpt = load_checkpoint(cfg, &p.kg)?;
        let log_path = cfg.output_dir.join(TRAIN_LOG_FILE);
        let log = std::fs::read_to_string(&log_path).unwrap_or_default();
        let trainer = ckpt.into_trainer(&p.kg).map_err(data("checkpoint"))?;
        info!("resuming at epoch {}, {} updates", trainer.epoch, trainer.updates);
        (trainer, Some(log))
    } else {
        let policy = Policy::init(
            cfg.policy,
            p.kg.num_entities(),
            p.kg.num_relations(),
            cfg.policy_seed(cfg.seed),
        );
        (Trainer::new(policy, tcfg.optimizer), None)
    };
    let log = train(&p.kg, &p.table, &hyps, &mut trainer, &tcfg).map_err(runtime("training"))?;
    if let Some(r) = log.last_mean_reward() {
        info!("epoch {}: last batch mean reward {r:.4}", trainer.epoch);
    }
    let ckpt = Checkpoint::from_trainer(&trainer, &p.kg, &tcfg);

    let mut out = Staging::new(&cfg.output_dir)?;
    out.write_str(CHECKPOINT_FILE, &ckpt.to_json())?;
    out.write(TRAIN_LOG_FILE, |w| match previous_log.filter(|l| !l.is_empty()) {
        Some(prev) => {
            w.write_all(prev.as_bytes())?;
            let mut fresh = Vec::new();
            log.write_csv(&mut fresh)?;
            let body = fresh.splitn(2, |&b| b == b'\n').nth(1).unwrap_or_default();
            w.write_all(body)
        }
        None => log.write_csv(w),
    })?;
    out.commit()
}

fn resolve_hypothesis(kg: &KnowledgeGraph, labels: &[String]) -> Result<Hypothesis, CliError> {
    let [s, r, o] = labels else {
        return Err(CliError::Config("--hypothesis takes SUBJECT RELATION OBJECT".into()));
    };
    let entity = |l: &String| kg.entity_id(l).ok_or_else(|| CliError::Data(format!("unknown entity `{l}`")));
    let h = Hypothesis {
        subject: entity(s)?,
        relation: kg
            .relation_id(r)
            .ok_or_else(|| CliError::Data(format!("unknown relation `{r}`")))?,
        object: entity(o)?,
    };
    if h.subject == h.object {
        return Err(CliError::Data("hypothesis subject equals object".into()));
    }
    Ok(h)
}

struct Explained {
    subgraph: ExplanationSubgraph,
    paths: Vec<KgPath>,
}

/// Builds one explanation per hypothesis (`--hypothesis`, else the test split)
/// under `explanations/`, plus the selected metapaths, the relevance histogram
/// of all explanatory paths and, with a ground-truth file, the match summary.
pub fn explain(cfg: &RunConfig, hypothesis: Option<&[String]>) -> Result<Vec<PathBuf>, CliError> {
    let p = load_prepared(cfg)?;
    let ckpt = load_checkpoint(cfg, &p.kg)?;
    let policy = ckpt.policy(&p.kg).map_err(data("checkpoint"))?;
    let ontology = match &cfg.ontology {
        Some(o) => {
            let (ont, warnings) = OntologyHierarchy::load(&o.class_edges, &o.annotations, &p.kg)
                .map_err(data("reading ontology"))?;
            for w in warnings {
                warn!("ontology: {w}");
            }
            Some(ont)
        }
        None => None,
    };
    let ground_truth = match &cfg.ground_truth_metapaths {
        Some(gp) => {
            let text = std::fs::read_to_string(gp).map_err(data(format!("reading {}", gp.display())))?;
            Some(parse_metapaths(&text).map_err(data(format!("reading {}", gp.display())))?)
        }
        None => None,
    };
    let hyps = match hypothesis {
        Some(labels) => vec![resolve_hypothesis(&p.kg, labels)?],
        None => hypotheses(cfg.require("test_split", &cfg.test_split)?, &p.kg)?,
    };
    let trained_with = TrainConfig {
        max_len: ckpt.train_config.max_len,
        use_early_stop: ckpt.train_config.use_early_stop,
        ..cfg.training.clone()
    };
    let beam = beam_for(cfg, &trained_with);
    let stream = derive(cfg.seed, "explain");

    let explained: Vec<Explained> = hyps
        .par_iter()
        .enumerate()
        .map(|(i, h)| {
            let found = beam_search_infer(&p.kg, &policy, &Query::from(h), &beam, Some(h))
                .map_err(runtime("beam search"))?;
            let rollouts =
                sample_rollouts(&p.kg, &policy, h, &trained_with, derive_indexed(stream, &[i as u64]))
                    .map_err(runtime("rollouts"))?;
            let paths = explanatory_paths(h.object, Some(&found), &rollouts);
            let selected = group_and_select(&p.kg, &p.table, &paths).map_err(runtime("relevance"))?;
            let subgraph = build_explanation(&p.kg, h, &selected, ontology.as_ref());
            Ok(Explained { subgraph, paths })
        })
        .collect::<Result<_, CliError>>()?;

    let mut out = Staging::new(&cfg.output_dir)?;
    let mut index = String::from("id\tsubject\trelation\tobject\tstatus\tpaths\n");
    let mut found: Vec<Metapath> = Vec::new();
    let mut all_paths = Vec::new();
    for (i, e) in explained.iter().enumerate() {
        let g = &e.subgraph;
        let id = format!("{i:04}");
        out.write_str(format!("explanations/{id}.json"), &g.to_json())?;
        out.write(format!("explanations/{id}.dot"), |w| g.write_dot(w))?;
        index.push_str(&format!(
            "{id}\t{}\t{}\t{}\t{}\t{}\n",
            g.hypothesis.subject,
            g.hypothesis.relation,
            g.hypothesis.object,
            g.status,
            g.paths.len()
        ));
        found.extend(g.paths.iter().map(|p| p.metapath.clone()));
        all_paths.extend(e.paths.iter().cloned());
        info!("{} {} {}: {}", g.hypothesis.subject, g.hypothesis.relation, g.hypothesis.object, g.status);
    }
    out.write_str("explanations/index.tsv", &index)?;
    out.write("metapaths.txt", |w| write_metapaths(&found, w))?;
    if all_paths.is_empty() {
        warn!("no explanatory paths; relevance histogram skipped");
    } else {
        let h = ic_distribution(&p.table, &all_paths, cfg.evaluation.histogram_bins)
            .map_err(runtime("relevance histogram"))?;
        out.write("ic_distribution.csv", |w| h.write_csv(w))?;
    }
    if let Some(gt) = ground_truth {
        let m = match_ground_truth_metapaths(&found, &gt, Some(&p.kg));
        for w in &m.warnings {
            warn!("ground truth: {w}");
        }
        let names = |s: &std::collections::BTreeSet<Metapath>| {
            s.iter().map(|m| m.to_string()).collect::<Vec<_>>()
        };
        let counts: serde_json::Map<String, serde_json::Value> =
            m.counts.iter().map(|(k, v)| (k.to_string(), (*v).into())).collect();
        let doc = serde_json::json!({
            "matched": names(&m.matched),
            "novel": names(&m.novel),
            "missed": names(&m.missed),
            "counts": counts,
            "warnings": m.warnings,
        });
        out.write_str("metapath_match.json", &serde_json::to_string_pretty(&doc).expect("json"))?;
    }
    out.commit()
}

fn variant_name(t: &TrainConfig) -> &'static str {
    VARIANTS
        .iter()
        .find(|v| v.use_early_stop == t.use_early_stop && v.use_relevance == t.use_relevance)
        .map(|v| v.name)
        .expect("every flag pair is a variant")
}

fn single_row(variant: &str, m: Metrics) -> AblationRow {
    AblationRow {
        variant: variant.to_string(),
        mean: m,
        std: Metrics::default(),
        runs: 1,
    }
}

fn rank_text(r: Rank) -> String {
    r.map_or_else(|| "inf".to_string(), |r| r.to_string())
}

fn known_answers(
    kg: &KnowledgeGraph,
    cfg: &RunConfig,
    test: &[Hypothesis],
) -> Result<KnownAnswers, CliError> {
    let mut known = KnownAnswers::from_graph(kg);
    if let Some(tp) = &cfg.train_split {
        known.add_hypotheses(&hypotheses(tp, kg)?);
    }
    known.add_hypotheses(test);
    Ok(known)
}

/// Ranks every test hypothesis with the stored policy. Writes filtered and raw
/// metrics and per-query ranks.
pub fn evaluate_cmd(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let p = load_prepared(cfg)?;
    let ckpt = load_checkpoint(cfg, &p.kg)?;
    let policy = ckpt.policy(&p.kg).map_err(data("checkpoint"))?;
    let test = hypotheses(cfg.require("test_split", &cfg.test_split)?, &p.kg)?;
    let known = known_answers(&p.kg, cfg, &test)?;
    let beam = beam_for(cfg, &ckpt.train_config);
    let report = evaluate(&p.kg, &policy, &test, &known, &beam, cfg.seed).map_err(runtime("evaluation"))?;
    let name = variant_name(&ckpt.train_config);
    let m = report.filtered.metrics;
    info!(
        "filtered: hits@1 {:.4} hits@3 {:.4} hits@10 {:.4} mrr {:.4}",
        m.hits1, m.hits3, m.hits10, m.mrr
    );

    let mut out = Staging::new(&cfg.output_dir)?;
    out.write("metrics.csv", |w| write_metrics_csv(&[single_row(name, m)], w))?;
    out.write("metrics_raw.csv", |w| {
        write_metrics_csv(&[single_row(name, report.raw.metrics)], w)
    })?;
    let mut ranks = String::from("subject\trelation\tobject\tfiltered_rank\traw_rank\n");
    for ((h, f), r) in test.iter().zip(&report.filtered.ranks).zip(&report.raw.ranks) {
        ranks.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            p.kg.entity_label(h.subject),
            p.kg.relation_label(h.relation),
            p.kg.entity_label(h.object),
            rank_text(*f),
            rank_text(*r)
        ));
    }
    out.write_str("ranks.tsv", &ranks)?;
    out.commit()
}

/// Trains and evaluates the four reward/early-stop variants over
/// `evaluation.runs` seeds derived from `seed`.
pub fn ablate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let p = load_prepared(cfg)?;
    let train_h = hypotheses(cfg.require("train_split", &cfg.train_split)?, &p.kg)?;
    let test = hypotheses(cfg.require("test_split", &cfg.test_split)?, &p.kg)?;
    let known = known_answers(&p.kg, cfg, &test)?;
    let setup = AblationSetup {
        kg: &p.kg,
        table: &p.table,
        train: &train_h,
        test: &test,
        known: &known,
        policy: cfg.policy,
        training: &cfg.training,
        beam: beam_for(cfg, &cfg.training),
    };
    let seeds: Vec<u64> = (0..cfg.evaluation.runs as u64)
        .map(|i| derive_indexed(cfg.seed, &[i]))
        .collect();
    let rows = run_ablation(&setup, &seeds).map_err(runtime("ablation"))?;
    for r in &rows {
        info!("{}: mrr {:.4} ± {:.4}", r.variant, r.mean.mrr, r.std.mrr);
    }
    let mut out = Staging::new(&cfg.output_dir)?;
    out.write("ablation.csv", |w| write_metrics_csv(&rows, w))?;
    out.write_str(
        "ablation.json",
        &serde_json::to_string_pretty(&rows).expect("rows serialize"),
    )?;
    out.commit()
}
