//! Enumeration of the variable subsets entering the additive decomposition.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A non-empty subset of the input variables, stored as sorted 1-based
/// indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Group {
    vars: Vec<usize>,
}

impl Group {
    /// Builds a group from 1-based variable indices; they must be strictly
    /// increasing and at least 1.
    pub fn new(vars: Vec<usize>) -> Result<Self> {
        if vars.is_empty() {
            return Err(Error::invalid("group must contain at least one variable"));
        }
        if vars[0] == 0 || !vars.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid(format!(
                "group indices must be strictly increasing 1-based, got {vars:?}"
            )));
        }
        Ok(Group { vars })
    }

    /// 1-based variable indices, strictly increasing.
    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.binary_search(&var).is_ok()
    }

    /// Canonical name: "v" followed by the indices joined by dots, e.g.
    /// "v1", "v1.3", "v1.2.3".
    pub fn name(&self) -> String {
        let mut s = String::from("v");
        for (i, v) in self.vars.iter().enumerate() {
            if i > 0 {
                s.push('.');
            }
            s.push_str(&v.to_string());
        }
        s
    }

    /// Inverse of [`Group::name`]. A trailing dot is tolerated since some
    /// tables print group names that way.
    pub fn parse_name(name: &str) -> Result<Self> {
        let rest = name
            .strip_prefix('v')
            .ok_or_else(|| Error::parse(format!("group name {name:?} must start with 'v'")))?;
        let rest = rest.strip_suffix('.').unwrap_or(rest);
        let vars = rest
            .split('.')
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| Error::parse(format!("bad index {tok:?} in group name {name:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Group::new(vars)
    }
}

/// All groups of size 1..=dmax over d variables, in the canonical order:
/// cardinality ascending, then lexicographic on the index tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSet {
    d: usize,
    dmax: usize,
    groups: Vec<Group>,
}

impl GroupSet {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dmax(&self) -> usize {
        self.dmax
    }

    /// Number of groups, vMax = sum_{j=1..dmax} C(d, j).
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group(&self, v: usize) -> &Group {
        &self.groups[v]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Group> {
        self.groups.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.groups.iter().map(Group::name).collect()
    }

    /// Position of a group in the canonical order.
    pub fn position(&self, group: &Group) -> Option<usize> {
        self.groups.iter().position(|g| g == group)
    }
}

/// Enumerates the group set for `d` variables up to interaction order
/// `dmax`.
pub fn build_group_set(d: usize, dmax: usize) -> Result<GroupSet> {
    if d == 0 {
        return Err(Error::invalid("d must be at least 1"));
    }
    if dmax < 1 || dmax > d {
        return Err(Error::invalid(format!("dmax must satisfy 1 <= dmax <= d, got dmax={dmax}, d={d}")));
    }
    let mut groups = Vec::new();
    for size in 1..=dmax {
        // combinations() yields lexicographic order for a sorted input range
        for vars in (1..=d).combinations(size) {
            groups.push(Group { vars });
        }
    }
    Ok(GroupSet { d, dmax, groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_d3_dmax2() {
        let gs = build_group_set(3, 2).unwrap();
        let names = gs.names();
        assert_eq!(names, vec!["v1", "v2", "v3", "v1.2", "v1.3", "v2.3"]);
    }

    #[test]
    fn vmax_counts() {
        assert_eq!(build_group_set(5, 3).unwrap().len(), 25);
        assert_eq!(build_group_set(10, 3).unwrap().len(), 175);
        assert_eq!(build_group_set(7, 3).unwrap().len(), 63);
    }

    #[test]
    fn rejects_bad_dmax() {
        assert!(build_group_set(3, 0).is_err());
        assert!(build_group_set(3, 4).is_err());
    }

    #[test]
    fn name_round_trip() {
        let gs = build_group_set(6, 3).unwrap();
        for g in gs.iter() {
            assert_eq!(&Group::parse_name(&g.name()).unwrap(), g);
        }
        // trailing-dot display form parses to the same group
        assert_eq!(Group::parse_name("v1.").unwrap(), Group::new(vec![1]).unwrap());
        assert_eq!(Group::parse_name("v1.2.3").unwrap(), Group::new(vec![1, 2, 3]).unwrap());
        assert!(Group::parse_name("w1").is_err());
        assert!(Group::parse_name("v2.1").is_err());
    }
}
