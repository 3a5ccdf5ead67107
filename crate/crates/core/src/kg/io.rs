use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use super::{EntityId, GraphError, Hypothesis, KnowledgeGraph};

/// Yields `(line number, fields)` for every non-blank, non-comment line.
pub fn tab_records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').collect()))
        }
    })
}

fn arity_error(line: usize, want: usize, got: usize) -> GraphError {
    GraphError::Parse {
        line,
        message: format!("expected {want} tab-separated fields, found {got}"),
    }
}

fn three_fields<'a>(line: usize, fields: &[&'a str]) -> Result<[&'a str; 3], GraphError> {
    match fields {
        [s, r, o] if !s.is_empty() && !r.is_empty() && !o.is_empty() => Ok([s, r, o]),
        [_, _, _] => Err(GraphError::Parse {
            line,
            message: "empty field".into(),
        }),
        _ => Err(arity_error(line, 3, fields.len())),
    }
}

/// Parses `subject<TAB>relation<TAB>object` lines into an indexed graph.
pub fn parse_triples(text: &str) -> Result<KnowledgeGraph, GraphError> {
    let mut builder = KnowledgeGraph::builder();
    for (line, fields) in tab_records(text) {
        let [s, r, o] = three_fields(line, &fields)?;
        builder.add(s, r, o);
    }
    builder.build()
}

pub fn read_triples(path: impl AsRef<Path>) -> Result<KnowledgeGraph, GraphError> {
    parse_triples(&std::fs::read_to_string(path)?)
}

/// Writes the graph in its triple-file form, ordered by id.
pub fn write_triples(kg: &KnowledgeGraph, mut out: impl Write) -> std::io::Result<()> {
    for t in kg.triples() {
        writeln!(
            out,
            "{}\t{}\t{}",
            kg.entity_label(t.subject),
            kg.relation_label(t.relation),
            kg.entity_label(t.object)
        )?;
    }
    Ok(())
}

/// Parses a hypothesis split. Labels must resolve in `kg`; duplicates collapse
/// (first occurrence kept) and hypotheses with subject = object are rejected.
pub fn parse_hypotheses(text: &str, kg: &KnowledgeGraph) -> Result<Vec<Hypothesis>, GraphError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, fields) in tab_records(text) {
        let [s, r, o] = three_fields(line, &fields)?;
        let resolve = |label: &str| {
            kg.entity_id(label).ok_or_else(|| GraphError::Parse {
                line,
                message: format!("unknown entity `{label}`"),
            })
        };
        let subject = resolve(s)?;
        let object = resolve(o)?;
        let relation = kg.relation_id(r).ok_or_else(|| GraphError::Parse {
            line,
            message: format!("unknown relation `{r}`"),
        })?;
        if subject == object {
            return Err(GraphError::Parse {
                line,
                message: format!("degenerate hypothesis: subject equals object `{s}`"),
            });
        }
        let h = Hypothesis {
            subject,
            relation,
            object,
        };
        if seen.insert(h) {
            out.push(h);
        }
    }
    if out.is_empty() {
        return Err(GraphError::Empty);
    }
    Ok(out)
}

pub fn read_hypotheses(
    path: impl AsRef<Path>,
    kg: &KnowledgeGraph,
) -> Result<Vec<Hypothesis>, GraphError> {
    parse_hypotheses(&std::fs::read_to_string(path)?, kg)
}

/// Parses `entity<TAB>type` lines. Returns one slot per entity (`None` = unmapped)
/// and a warning per label that does not resolve.
pub fn parse_entity_types(
    text: &str,
    kg: &KnowledgeGraph,
) -> Result<(Vec<Option<String>>, Vec<String>), GraphError> {
    let mut types = vec![None; kg.num_entities()];
    let mut warnings = Vec::new();
    for (line, fields) in tab_records(text) {
        let [label, tag] = fields[..] else {
            return Err(arity_error(line, 2, fields.len()));
        };
        match kg.entity_id(label) {
            Some(EntityId(i)) => types[i as usize] = Some(tag.to_string()),
            None => warnings.push(format!("line {line}: unknown entity `{label}`")),
        }
    }
    Ok((types, warnings))
}

pub fn read_entity_types(
    path: impl AsRef<Path>,
    kg: &KnowledgeGraph,
) -> Result<(Vec<Option<String>>, Vec<String>), GraphError> {
    parse_entity_types(&std::fs::read_to_string(path)?, kg)
}
