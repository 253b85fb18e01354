use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::lintrun::reports::TypeMapping;
use crate::lintrun::Tool;

const EQUIVALENCE_TABLE: &str = include_str!("../../data/equivalence.json");

/// Reserved multi-label output for methods without issues.
pub const NO_ISSUE: &str = "NOISSUE";

#[derive(Debug, Deserialize)]
struct EquivalenceFile {
    groups: BTreeMap<String, BTreeSet<String>>,
}

/// Base ids, equivalence groups and the effective ids derived from them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVocabulary {
    pub base_ids: BTreeSet<String>,
    pub equivalence_groups: BTreeMap<String, BTreeSet<String>>,
    pub effective_ids: BTreeSet<String>,
    #[serde(default)]
    pub frequency: BTreeMap<String, usize>,
}

impl LabelVocabulary {
    pub fn new(
        base_ids: BTreeSet<String>,
        equivalence_groups: BTreeMap<String, BTreeSet<String>>,
    ) -> Result<Self, DatasetError> {
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for (gid, members) in &equivalence_groups {
            if base_ids.contains(gid) {
                return Err(DatasetError::Vocabulary(format!("group id {gid} is also a base id")));
            }
            for m in members {
                if !base_ids.contains(m) {
                    return Err(DatasetError::UnknownLabel(m.clone()));
                }
                if let Some(prev) = owner.insert(m, gid) {
                    return Err(DatasetError::Vocabulary(format!(
                        "{m} belongs to both {prev} and {gid}"
                    )));
                }
            }
        }
        let effective_ids = base_ids
            .iter()
            .filter(|id| !owner.contains_key(id.as_str()))
            .chain(equivalence_groups.keys())
            .cloned()
            .collect();
        Ok(LabelVocabulary {
            base_ids,
            equivalence_groups,
            effective_ids,
            frequency: BTreeMap::new(),
        })
    }

    /// Ids from both shipped mapping tables and the shipped equivalence groups.
    pub fn builtin() -> Self {
        let base = [Tool::Infer, Tool::Spotbugs]
            .into_iter()
            .flat_map(|t| TypeMapping::builtin(t).ids().map(str::to_string).collect::<Vec<_>>())
            .collect();
        let groups: EquivalenceFile =
            serde_json::from_str(EQUIVALENCE_TABLE).expect("shipped equivalence table is valid");
        Self::new(base, groups.groups).expect("shipped tables are consistent")
    }

    pub fn with_mappings(mappings: &[TypeMapping], groups_file: Option<&Path>) -> Result<Self, DatasetError> {
        let base = mappings
            .iter()
            .flat_map(|m| m.ids().map(str::to_string).collect::<Vec<_>>())
            .collect();
        let groups: EquivalenceFile = match groups_file {
            Some(p) => {
                let raw = std::fs::read_to_string(p)
                    .map_err(|e| DatasetError::Vocabulary(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&raw)
                    .map_err(|e| DatasetError::Vocabulary(format!("{}: {e}", p.display())))?
            }
            None => serde_json::from_str(EQUIVALENCE_TABLE).expect("shipped equivalence table is valid"),
        };
        Self::new(base, groups.groups)
    }

    /// Effective id for a base id (or an effective id, unchanged).
    pub fn effective_id<'a>(&'a self, id: &'a str) -> Result<&'a str, DatasetError> {
        if self.equivalence_groups.contains_key(id) {
            return Ok(id);
        }
        if !self.base_ids.contains(id) {
            return Err(DatasetError::UnknownLabel(id.to_string()));
        }
        Ok(self
            .equivalence_groups
            .iter()
            .find(|(_, members)| members.contains(id))
            .map(|(gid, _)| gid.as_str())
            .unwrap_or(id))
    }
}

/// Replaces grouped base ids by their group id. Already-effective ids pass
/// through, so the mapping is idempotent.
pub fn apply_equivalence<'a, I>(labels: I, vocab: &LabelVocabulary) -> Result<BTreeSet<String>, DatasetError>
where
    I: IntoIterator<Item = &'a str>,
{
    labels
        .into_iter()
        .map(|l| vocab.effective_id(l).map(str::to_string))
        .collect()
}
