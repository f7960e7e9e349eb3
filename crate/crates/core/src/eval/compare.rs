use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Entity, EntitySet};
use crate::error::{Error, Result};

/// Gold entities split by which of two systems recovered them exactly.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disagreement {
    pub a_only: Vec<Entity>,
    pub b_only: Vec<Entity>,
    pub both: Vec<Entity>,
    pub neither: Vec<Entity>,
}

impl Disagreement {
    /// `(a_only, b_only, both, neither)`
    pub fn counts(&self) -> (usize, usize, usize, usize) {
        (self.a_only.len(), self.b_only.len(), self.both.len(), self.neither.len())
    }
}

pub fn compare_models(gold: &EntitySet, pred_a: &EntitySet, pred_b: &EntitySet) -> Result<Disagreement> {
    for (name, p) in [("A", pred_a), ("B", pred_b)] {
        if p.doc_ids != gold.doc_ids {
            let missing: Vec<_> = gold.doc_ids.symmetric_difference(&p.doc_ids).take(3).collect();
            return Err(Error::InvalidArgument(format!(
                "system {name} covers different documents than gold (e.g. {missing:?})"
            )));
        }
    }
    let a: HashSet<&Entity> = pred_a.entities.iter().collect();
    let b: HashSet<&Entity> = pred_b.entities.iter().collect();
    let mut out = Disagreement::default();
    let mut sorted: Vec<&Entity> = gold.entities.iter().collect();
    sorted.sort();
    for g in sorted {
        let bucket = match (a.contains(g), b.contains(g)) {
            (true, false) => &mut out.a_only,
            (false, true) => &mut out.b_only,
            (true, true) => &mut out.both,
            (false, false) => &mut out.neither,
        };
        bucket.push(g.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(es: &[Entity]) -> EntitySet {
        EntitySet {
            doc_ids: ["d".to_string()].into_iter().collect(),
            entities: es.to_vec(),
        }
    }

    #[test]
    fn identical_systems() {
        let g = set(&[Entity::new("d", 0, 1, "a")]);
        let p = set(&[Entity::new("d", 0, 1, "a")]);
        let d = compare_models(&g, &p, &p).unwrap();
        assert!(d.a_only.is_empty() && d.b_only.is_empty());
    }

    #[test]
    fn perfect_versus_empty() {
        let g = set(&[Entity::new("d", 0, 1, "a"), Entity::new("d", 2, 3, "b")]);
        let d = compare_models(&g, &g, &set(&[])).unwrap();
        assert_eq!(d.counts(), (2, 0, 0, 0));
    }

    #[test]
    fn three_entity_fixture() {
        let e1 = Entity::new("d", 0, 1, "a");
        let e2 = Entity::new("d", 2, 3, "a");
        let e3 = Entity::new("d", 4, 6, "b");
        let g = set(&[e1.clone(), e2.clone(), e3.clone()]);
        let a = set(&[e1, e2.clone()]);
        let b = set(&[e2, e3]);
        assert_eq!(compare_models(&g, &a, &b).unwrap().counts(), (1, 1, 1, 0));
    }

    #[test]
    fn document_mismatch() {
        let g = set(&[]);
        let mut other = set(&[]);
        other.doc_ids.insert("extra".into());
        assert!(compare_models(&g, &other, &g).is_err());
    }
}
