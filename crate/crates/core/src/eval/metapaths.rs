use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use super::EvalError;
use crate::explanation::Metapath;
use crate::info::{path_relevance, IcTable};
use crate::kg::{EntityId, KnowledgeGraph, Path};

/// Equal-width bins over `[0, 1]`; 1.0 falls in the last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        let w = 1.0 / self.counts.len() as f64;
        (i as f64 * w, if i + 1 == self.counts.len() { 1.0 } else { (i + 1) as f64 * w })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "bin_low,bin_high,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            let (lo, hi) = self.bounds(i);
            writeln!(out, "{lo},{hi},{c}")?;
        }
        Ok(())
    }
}

fn bin_of(v: f64, bins: usize) -> usize {
    ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
}

/// Histogram of path relevance.
pub fn ic_distribution(table: &IcTable, paths: &[Path], bins: usize) -> Result<Histogram, EvalError> {
    if bins == 0 {
        return Err(EvalError::InvalidBins);
    }
    if paths.is_empty() {
        return Err(EvalError::EmptyPaths);
    }
    let mut counts = vec![0; bins];
    for p in paths {
        counts[bin_of(path_relevance(table, p.triples())?, bins)] += 1;
    }
    Ok(Histogram { counts })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetapathMatch {
    /// Found metapaths present in the ground truth.
    pub matched: BTreeSet<Metapath>,
    /// Found metapaths absent from the ground truth.
    pub novel: BTreeSet<Metapath>,
    /// Ground-truth metapaths never found.
    pub missed: BTreeSet<Metapath>,
    /// How often each found metapath occurs.
    pub counts: BTreeMap<Metapath, usize>,
    pub warnings: Vec<String>,
}

/// Exact-sequence comparison of found metapaths (with multiplicity) against a
/// ground-truth set. With `vocabulary`, elements naming no entity type or
/// relation of that graph produce warnings.
pub fn match_ground_truth_metapaths(
    found: &[Metapath],
    ground_truth: &[Metapath],
    vocabulary: Option<&KnowledgeGraph>,
) -> MetapathMatch {
    let gt: BTreeSet<&Metapath> = ground_truth.iter().collect();
    let mut m = MetapathMatch::default();
    for f in found {
        *m.counts.entry(f.clone()).or_default() += 1;
        if gt.contains(f) {
            m.matched.insert(f.clone());
        } else {
            m.novel.insert(f.clone());
        }
    }
    m.missed = gt
        .into_iter()
        .filter(|g| !m.matched.contains(*g))
        .cloned()
        .collect();
    if let Some(kg) = vocabulary {
        let types: HashSet<&str> = (0..kg.num_entities() as u32)
            .map(|i| kg.entity_type(EntityId(i)))
            .collect();
        let relations: HashSet<&str> = kg.relations().iter().map(|r| r.label.as_str()).collect();
        let mut reported = BTreeSet::new();
        for mp in ground_truth.iter().chain(found) {
            for (i, el) in mp.elements().iter().enumerate() {
                let (known, kind) = if i % 2 == 0 {
                    (types.contains(el.as_str()), "entity type")
                } else {
                    (relations.contains(el.as_str()), "relation")
                };
                if !known && reported.insert((kind, el.clone())) {
                    m.warnings.push(format!("unknown {kind} `{el}` in metapath {mp}"));
                }
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::{compute_ic_table, IcMode, Normalization};
    use crate::kg::{parse_entity_types, parse_triples, Triple};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mp(s: &str) -> Metapath {
        s.parse().unwrap()
    }

    #[test]
    fn identical_and_disjoint() {
        let a = [mp("A|r|B"), mp("B|s|C")];
        let m = match_ground_truth_metapaths(&a, &a, None);
        assert_eq!(m.matched.len(), 2);
        assert!(m.novel.is_empty() && m.missed.is_empty());
        let m = match_ground_truth_metapaths(&a, &[mp("X|q|Y")], None);
        assert!(m.matched.is_empty());
        assert_eq!(m.novel.len(), 2);
        assert_eq!(m.missed.len(), 1);
    }

    #[test]
    fn counts_and_warnings() {
        let mut kg = parse_triples("a\tbinds\tb\n").unwrap();
        let (t, _) = parse_entity_types("a\tCompound\nb\tGene\n", &kg).unwrap();
        kg.set_entity_types(t);
        let found = [mp("Compound|binds|Gene"), mp("Compound|binds|Gene"), mp("Gene|binds|Organ")];
        let m = match_ground_truth_metapaths(&found, &[mp("Compound|likes|Gene")], Some(&kg));
        assert_eq!(m.counts[&mp("Compound|binds|Gene")], 2);
        assert_eq!(m.warnings.len(), 2);
        assert!(m.warnings.iter().any(|w| w.contains("`likes`")));
        assert!(m.warnings.iter().any(|w| w.contains("`Organ`")));
    }

    #[test]
    fn histogram_single_bin_and_total() {
        let kg = parse_triples("a\tr\tb\nc\tr\td\n").unwrap();
        let table = compute_ic_table(&kg, IcMode::Ic, None, Normalization::Fixed(4f64.ln()))
            .unwrap();
        // Every entity has degree 1 of |G| = 2: raw ln 2, normalized 0.5.
        let paths: Vec<Path> = kg
            .triples()
            .iter()
            .map(|t| Path::new(t.subject, vec![*t]).unwrap())
            .collect();
        let h = ic_distribution(&table, &paths, 10).unwrap();
        assert_eq!(h.total(), 2);
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        let mut csv = Vec::new();
        h.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 11);
        assert!(ic_distribution(&table, &paths, 0).is_err());
        assert!(ic_distribution(&table, &[], 3).is_err());
        assert_eq!(h.bounds(9), (0.9, 1.0));
        assert_eq!(bin_of(1.0, 10), 9);
        assert_eq!(bin_of(0.0, 10), 0);
    }

    #[test]
    fn histogram_matches_manual_binning() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut text = String::new();
        for _ in 0..80 {
            let (s, o) = (rng.random_range(0..25), rng.random_range(0..25));
            if s != o {
                text.push_str(&format!("n{s}\tr\tn{o}\n"));
            }
        }
        let kg = parse_triples(&text).unwrap();
        let table = compute_ic_table(&kg, IcMode::Ic, None, Normalization::MaxSurprisal).unwrap();
        let mut paths = Vec::new();
        while paths.len() < 20 {
            let t: Triple = kg.triples()[rng.random_range(0..kg.len())];
            let mut ts = vec![t];
            if let Some(n) = kg
                .outgoing(t.object)
                .iter()
                .find(|n| n.object != t.subject)
            {
                ts.push(*n);
            }
            paths.push(Path::new(t.subject, ts).unwrap());
        }
        let bins = 7;
        let h = ic_distribution(&table, &paths, bins).unwrap();
        let mut manual = vec![0; bins];
        for p in &paths {
            let v = path_relevance(&table, p.triples()).unwrap();
            let i = (0..bins)
                .find(|&i| {
                    let lo = i as f64 / bins as f64;
                    let hi = (i + 1) as f64 / bins as f64;
                    v >= lo && (v < hi || i == bins - 1)
                })
                .unwrap();
            manual[i] += 1;
        }
        assert_eq!(h.counts, manual);
    }
}
