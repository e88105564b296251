//! Finite plane (ordered, rooted) trees.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::EnergyModel;

/// Largest order accepted by full enumeration unless the caller raises it.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 16;

/// A plane tree as the ordered list of its root's subtrees.
///
/// The textual form is balanced parentheses: a vertex is `(` followed by its
/// children and `)`, so `"(()())"` is a root with two leaf children.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PlaneTree {
    children: Vec<PlaneTree>,
}

impl PlaneTree {
    pub fn leaf() -> Self {
        PlaneTree::default()
    }

    pub fn from_children(children: Vec<PlaneTree>) -> Self {
        PlaneTree { children }
    }

    /// A path on `order` vertices.
    pub fn path(order: usize) -> Self {
        assert!(order >= 1);
        let mut t = PlaneTree::leaf();
        for _ in 1..order {
            t = PlaneTree::from_children(vec![t]);
        }
        t
    }

    /// A root with `degree` leaf children.
    pub fn star(degree: usize) -> Self {
        PlaneTree::from_children(vec![PlaneTree::leaf(); degree])
    }

    pub fn children(&self) -> &[PlaneTree] {
        &self.children
    }

    pub fn degree(&self) -> usize {
        self.children.len()
    }

    /// Number of vertices.
    pub fn order(&self) -> usize {
        1 + self.children.iter().map(PlaneTree::order).sum::<usize>()
    }

    pub fn height(&self) -> usize {
        self.children
            .iter()
            .map(|c| 1 + c.height())
            .max()
            .unwrap_or(0)
    }

    pub fn max_out_degree(&self) -> usize {
        self.children
            .iter()
            .map(PlaneTree::max_out_degree)
            .fold(self.degree(), usize::max)
    }

    /// `χ_i`: number of vertices with exactly `i` children, for `i = 0..=max_degree`.
    ///
    /// Panics if some vertex exceeds `max_degree`.
    pub fn degree_counts(&self, max_degree: usize) -> Vec<usize> {
        let mut counts = vec![0; max_degree + 1];
        self.visit_preorder(&mut |t| counts[t.degree()] += 1);
        counts
    }

    pub fn visit_preorder<F: FnMut(&PlaneTree)>(&self, f: &mut F) {
        f(self);
        for c in &self.children {
            c.visit_preorder(f);
        }
    }

    /// Subtree spanned by vertices at height at most `radius`.
    pub fn truncate(&self, radius: usize) -> PlaneTree {
        if radius == 0 {
            return PlaneTree::leaf();
        }
        PlaneTree::from_children(self.children.iter().map(|c| c.truncate(radius - 1)).collect())
    }

    /// Out-degrees of each level, left to right: entry `h` lists the number of
    /// children of every vertex at height `h`.
    pub fn level_degrees(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut level: Vec<&PlaneTree> = vec![self];
        while !level.is_empty() {
            out.push(level.iter().map(|t| t.degree()).collect());
            level = level.iter().flat_map(|t| t.children.iter()).collect();
        }
        out
    }

    /// Rebuild a tree from its per-level out-degree lists (inverse of [`level_degrees`]).
    ///
    /// [`level_degrees`]: PlaneTree::level_degrees
    pub fn from_level_degrees(levels: &[Vec<usize>]) -> Result<PlaneTree> {
        if levels.first().map(Vec::len) != Some(1) {
            return Err(Error::Domain("level 0 must contain exactly the root".into()));
        }
        // Build bottom-up.
        let mut below: Vec<PlaneTree> = Vec::new();
        for (h, degrees) in levels.iter().enumerate().rev() {
            let needed: usize = degrees.iter().sum();
            if needed != below.len() {
                return Err(Error::Domain(format!(
                    "level {h} has {needed} children but level {} has {} vertices",
                    h + 1,
                    below.len()
                )));
            }
            let mut rest = below.into_iter();
            below = degrees
                .iter()
                .map(|&d| PlaneTree::from_children(rest.by_ref().take(d).collect()))
                .collect();
        }
        Ok(below.pop().expect("root present"))
    }
}

impl fmt::Display for PlaneTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for c in &self.children {
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

impl FromStr for PlaneTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bytes = s.trim().as_bytes();
        let mut stack: Vec<Vec<PlaneTree>> = Vec::new();
        let mut done: Option<PlaneTree> = None;
        for (pos, &b) in bytes.iter().enumerate() {
            if done.is_some() {
                return Err(Error::Domain(format!("trailing input at byte {pos}")));
            }
            match b {
                b'(' => stack.push(Vec::new()),
                b')' => {
                    let children = stack
                        .pop()
                        .ok_or_else(|| Error::Domain(format!("unbalanced ')' at byte {pos}")))?;
                    let t = PlaneTree::from_children(children);
                    match stack.last_mut() {
                        Some(parent) => parent.push(t),
                        None => done = Some(t),
                    }
                }
                _ => return Err(Error::Domain(format!("unexpected byte {b:#x} at {pos}"))),
            }
        }
        done.ok_or_else(|| Error::Domain("unbalanced or empty parenthesis string".into()))
    }
}

/// `E(T) = Σ_v E_{deg(v)}`.
pub fn tree_energy(tree: &PlaneTree, model: &EnergyModel) -> Result<f64> {
    let d = tree.max_out_degree();
    if d > model.max_degree() {
        return Err(Error::Domain(format!(
            "tree has a vertex of out-degree {d} > D = {}",
            model.max_degree()
        )));
    }
    let mut energy = 0.0;
    tree.visit_preorder(&mut |t| energy += model.energy(t.degree()));
    Ok(energy)
}

/// Stream of all plane trees on `order` vertices with out-degrees at most
/// `max_degree`.
///
/// Canonical order: by root degree ascending, then by the vector of child
/// subtree sizes in lexicographic order, then recursively by the children,
/// with the last child varying fastest.
pub fn enumerate_trees(order: usize, max_degree: usize) -> Result<TreeStream> {
    enumerate_trees_with_limit(order, max_degree, DEFAULT_ENUMERATION_LIMIT)
}

pub fn enumerate_trees_with_limit(order: usize, max_degree: usize, limit: usize) -> Result<TreeStream> {
    if order == 0 {
        return Err(Error::Domain("trees have at least one vertex".into()));
    }
    if order > limit {
        return Err(Error::Resource(format!(
            "full enumeration of order {order} exceeds the limit {limit}"
        )));
    }
    if max_degree == 0 && order > 1 {
        return Err(Error::Domain("max_degree 0 only admits the single vertex".into()));
    }
    Ok(TreeStream::new(order, max_degree))
}

/// Lazy canonical-order enumerator returned by [`enumerate_trees`].
#[derive(Debug)]
pub struct TreeStream {
    order: usize,
    max_degree: usize,
    state: StreamState,
}

#[derive(Debug)]
enum StreamState {
    Fresh,
    Active {
        sizes: Vec<usize>,
        streams: Vec<TreeStream>,
        current: Vec<PlaneTree>,
    },
    Done,
}

impl TreeStream {
    fn new(order: usize, max_degree: usize) -> Self {
        TreeStream {
            order,
            max_degree,
            state: StreamState::Fresh,
        }
    }

    /// First composition of `total` into `parts` positive parts in lex order.
    fn first_composition(total: usize, parts: usize) -> Option<Vec<usize>> {
        if parts == 0 || parts > total {
            return None;
        }
        let mut c = vec![1; parts];
        c[parts - 1] = total - (parts - 1);
        Some(c)
    }

    /// Lexicographic successor among compositions with the same sum and length.
    fn next_composition(c: &mut [usize]) -> bool {
        let k = c.len();
        if k < 2 {
            return false;
        }
        // Find rightmost position i < k-1 that can grow: the suffix after it must
        // still hold at least one unit per part.
        for i in (0..k - 1).rev() {
            let suffix: usize = c[i + 1..].iter().sum();
            if suffix > k - 1 - i {
                c[i] += 1;
                let rest = suffix - 1;
                for x in c[i + 1..].iter_mut() {
                    *x = 1;
                }
                c[k - 1] = rest - (k - 2 - i);
                return true;
            }
        }
        false
    }

    fn start_composition(&mut self, sizes: Vec<usize>) -> PlaneTree {
        let mut streams: Vec<TreeStream> = sizes
            .iter()
            .map(|&s| TreeStream::new(s, self.max_degree))
            .collect();
        let current: Vec<PlaneTree> = streams
            .iter_mut()
            .map(|s| s.next().expect("every positive order has a tree"))
            .collect();
        let tree = PlaneTree::from_children(current.clone());
        self.state = StreamState::Active {
            sizes,
            streams,
            current,
        };
        tree
    }

    fn first_for_degree_from(&mut self, mut degree: usize) -> Option<PlaneTree> {
        let top = self.max_degree.min(self.order - 1);
        while degree <= top {
            if let Some(sizes) = Self::first_composition(self.order - 1, degree) {
                return Some(self.start_composition(sizes));
            }
            degree += 1;
        }
        self.state = StreamState::Done;
        None
    }
}

impl Iterator for TreeStream {
    type Item = PlaneTree;

    fn next(&mut self) -> Option<PlaneTree> {
        match &mut self.state {
            StreamState::Done => None,
            StreamState::Fresh => {
                if self.order == 1 {
                    self.state = StreamState::Done;
                    return Some(PlaneTree::leaf());
                }
                self.first_for_degree_from(1)
            }
            StreamState::Active {
                sizes,
                streams,
                current,
            } => {
                // Odometer over the children, last child fastest.
                for i in (0..streams.len()).rev() {
                    if let Some(t) = streams[i].next() {
                        current[i] = t;
                        for j in i + 1..streams.len() {
                            streams[j] = TreeStream::new(sizes[j], self.max_degree);
                            current[j] = streams[j].next().expect("nonempty");
                        }
                        return Some(PlaneTree::from_children(current.clone()));
                    }
                }
                let mut sizes = std::mem::take(sizes);
                if Self::next_composition(&mut sizes) {
                    return Some(self.start_composition(sizes));
                }
                let degree = sizes.len();
                self.first_for_degree_from(degree + 1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn catalan(n: u64) -> u64 {
        // C_n = binom(2n, n) / (n + 1), computed incrementally
        let mut c = 1u64;
        for i in 0..n {
            c = c * 2 * (2 * i + 1) / (i + 2);
        }
        c
    }

    #[test]
    fn parens_round_trip_and_errors() {
        let t: PlaneTree = "(()())".parse().unwrap();
        assert_eq!(t.degree(), 2);
        assert_eq!(t.order(), 3);
        assert_eq!(t.to_string(), "(()())");
        assert!("(()".parse::<PlaneTree>().is_err());
        assert!("())".parse::<PlaneTree>().is_err());
        assert!("()()".parse::<PlaneTree>().is_err());
        assert!("(x)".parse::<PlaneTree>().is_err());
        assert!("".parse::<PlaneTree>().is_err());
    }

    #[test]
    fn order_four_has_five_trees() {
        assert_eq!(enumerate_trees(4, 3).unwrap().count(), 5);
        assert_eq!(enumerate_trees(4, 1).unwrap().count(), 1);
    }

    #[test]
    fn canonical_order_is_frozen() {
        let shown: Vec<String> = enumerate_trees(4, 3).unwrap().map(|t| t.to_string()).collect();
        assert_eq!(
            shown,
            vec!["(((())))", "((()()))", "(()(()))", "((())())", "(()()())"]
        );
    }

    #[test]
    fn catalan_counts_and_uniqueness() {
        for n in 1..=12usize {
            let trees: Vec<PlaneTree> = enumerate_trees(n, n.saturating_sub(1).max(1))
                .unwrap()
                .collect();
            assert_eq!(trees.len() as u64, catalan(n as u64 - 1), "order {n}");
            let set: HashSet<_> = trees.iter().collect();
            assert_eq!(set.len(), trees.len());
            assert!(trees.iter().all(|t| t.order() == n));
        }
        assert_eq!(enumerate_trees(6, 5).unwrap().count(), 42);
    }

    #[test]
    fn bounded_degree_respected() {
        for t in enumerate_trees(9, 2).unwrap() {
            assert!(t.max_out_degree() <= 2);
        }
        // Motzkin numbers count unary-binary trees: M_8 = 323
        assert_eq!(enumerate_trees(9, 2).unwrap().count(), 323);
    }

    #[test]
    fn enumeration_limit() {
        assert!(matches!(enumerate_trees(17, 3), Err(Error::Resource(_))));
        assert!(enumerate_trees(0, 3).is_err());
    }

    #[test]
    fn energies_of_path_and_star() {
        let m = EnergyModel::new(2, vec![5.0, 7.0, 0.0], 1.0).unwrap();
        assert_eq!(tree_energy(&PlaneTree::path(4), &m).unwrap(), 26.0);
        let m3 = EnergyModel::new(3, vec![0.0, 0.0, 0.0, 1.0], 1.0).unwrap();
        assert_eq!(tree_energy(&PlaneTree::star(3), &m3).unwrap(), 1.0);
        assert!(matches!(tree_energy(&PlaneTree::star(3), &m), Err(Error::Domain(_))));
    }

    #[test]
    fn degree_counts_identities() {
        for t in enumerate_trees(8, 3).unwrap() {
            let chi = t.degree_counts(3);
            assert_eq!(chi.iter().sum::<usize>(), 8);
            assert_eq!(chi.iter().enumerate().map(|(i, c)| i * c).sum::<usize>(), 7);
        }
    }

    #[test]
    fn level_degrees_round_trip() {
        for t in enumerate_trees(7, 3).unwrap() {
            let levels = t.level_degrees();
            assert_eq!(PlaneTree::from_level_degrees(&levels).unwrap(), t);
            assert_eq!(levels.len(), t.height() + 1);
        }
    }

    #[test]
    fn truncation() {
        let t: PlaneTree = "((()())(()))".parse().unwrap();
        assert_eq!(t.truncate(1).to_string(), "(()())");
        assert_eq!(t.truncate(0).to_string(), "()");
        assert_eq!(t.truncate(5), t);
    }
}
