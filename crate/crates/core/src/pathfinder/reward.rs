use serde::{Deserialize, Serialize};

use super::{PathfinderError, Trajectory};
use crate::info::{path_relevance, IcTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reward {
    pub fidelity: f64,
    pub relevance: f64,
    pub total: f64,
}

/// 1 iff the walk ended on the hypothesis object.
pub fn reward_fidelity(traj: &Trajectory) -> Result<f64, PathfinderError> {
    if !traj.is_terminal() {
        return Err(PathfinderError::NotTerminal);
    }
    Ok(if traj.success() { 1.0 } else { 0.0 })
}

/// Mean normalized edge IC of the walk; 0 for an immediate STOP.
pub fn reward_relevance(table: &IcTable, traj: &Trajectory) -> Result<f64, PathfinderError> {
    if !traj.is_terminal() {
        return Err(PathfinderError::NotTerminal);
    }
    if traj.path.is_empty() {
        return Ok(0.0);
    }
    Ok(path_relevance(table, traj.path.triples())?)
}

/// Fidelity × relevance, or fidelity alone when `use_relevance` is off.
pub fn reward_final(
    table: &IcTable,
    traj: &Trajectory,
    use_relevance: bool,
) -> Result<Reward, PathfinderError> {
    let fidelity = reward_fidelity(traj)?;
    let relevance = reward_relevance(table, traj)?;
    let total = if use_relevance {
        fidelity * relevance
    } else {
        fidelity
    };
    Ok(Reward {
        fidelity,
        relevance,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::{compute_ic_table, edge_ic, IcMode, Normalization};
    use crate::kg::{parse_triples, Hypothesis, KnowledgeGraph, Path};
    use crate::pathfinder::Status;

    fn setup() -> (KnowledgeGraph, IcTable) {
        let kg = parse_triples("a\tr\tb\nb\tr\tc\nh\tr\tc\nh\tr\tx\nh\tt\ta\n").unwrap();
        let t = compute_ic_table(&kg, IcMode::Ic, None, Normalization::MaxSurprisal).unwrap();
        (kg, t)
    }

    fn traj(kg: &KnowledgeGraph, hops: &[usize], status: Option<Status>) -> Trajectory {
        let triples: Vec<_> = hops.iter().map(|&i| kg.triples()[i]).collect();
        let a = kg.entity_id("a").unwrap();
        Trajectory {
            hypothesis: Hypothesis {
                subject: a,
                relation: kg.relation_id("t").unwrap(),
                object: kg.entity_id("c").unwrap(),
            },
            steps: Vec::new(),
            path: Path::new(a, triples).unwrap(),
            status,
            reward: None,
        }
    }

    #[test]
    fn fidelity_cases() {
        let (kg, _) = setup();
        // triples sorted: (a,r,b)=0 (b,r,c)=1
        assert_eq!(reward_fidelity(&traj(&kg, &[0, 1], Some(Status::Reached))).unwrap(), 1.0);
        assert_eq!(reward_fidelity(&traj(&kg, &[0], Some(Status::Stopped))).unwrap(), 0.0);
        assert_eq!(reward_fidelity(&traj(&kg, &[0], Some(Status::Horizon))).unwrap(), 0.0);
        assert!(reward_fidelity(&traj(&kg, &[0], None)).is_err());
    }

    #[test]
    fn relevance_and_product() {
        let (kg, t) = setup();
        let stop = traj(&kg, &[], Some(Status::Stopped));
        assert_eq!(reward_relevance(&t, &stop).unwrap(), 0.0);
        let ok = traj(&kg, &[0, 1], Some(Status::Reached));
        let expect = (edge_ic(&t, &kg.triples()[0]).unwrap() + edge_ic(&t, &kg.triples()[1]).unwrap()) / 2.0;
        let r = reward_final(&t, &ok, true).unwrap();
        assert!((r.relevance - expect).abs() < 1e-15);
        assert_eq!(r.total, r.relevance);
        assert_eq!(reward_final(&t, &ok, false).unwrap().total, 1.0);
        let miss = traj(&kg, &[0], Some(Status::Stopped));
        let r = reward_final(&t, &miss, true).unwrap();
        assert!(r.relevance > 0.0);
        assert_eq!(r.total, 0.0);
    }

    #[test]
    fn max_ic_edge_normalizes_to_one() {
        // both endpoints of the only edge have degree 1 in a graph of |G| = 3
        let kg = parse_triples("a\tr\tb\nc\tr\td\ne\tr\tf\n").unwrap();
        let t = compute_ic_table(&kg, IcMode::Ic, None, Normalization::MaxSurprisal).unwrap();
        let a = kg.entity_id("a").unwrap();
        let tr = Trajectory {
            hypothesis: Hypothesis {
                subject: a,
                relation: kg.relation_id("r").unwrap(),
                object: kg.entity_id("b").unwrap(),
            },
            steps: Vec::new(),
            path: Path::new(a, vec![kg.triples()[0]]).unwrap(),
            status: Some(Status::Reached),
            reward: None,
        };
        assert!((reward_relevance(&t, &tr).unwrap() - 1.0).abs() < 1e-15);
    }
}
