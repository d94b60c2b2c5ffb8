//! Causal DAGs, d-separation and the backdoor criterion.
//!
//! The production d-separation test is a Bayes-ball style reachability
//! search, linear in the graph size per query. An independent brute-force
//! path-enumeration oracle lives in [`crate::scm`] and cross-checks it in
//! tests.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("directed cycle detected through node `{0}`")]
    Cycle(String),
    #[error("self edge `{0} -> {0}`")]
    SelfEdge(String),
    #[error("duplicate edge `{0} -> {1}`")]
    DuplicateEdge(String, String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("treatment `{0}` equals outcome")]
    TreatmentIsOutcome(String),
    #[error("missing `{0}:` directive and no explicit value supplied")]
    MissingDirective(&'static str),
    #[error("malformed line {line}: `{text}`")]
    MalformedLine { line: usize, text: String },
    #[error("empty node name on line {0}")]
    EmptyName(usize),
    #[error("adjustment set must not contain treatment or outcome, found `{0}`")]
    ForbiddenMember(String),
    #[error("query nodes must be distinct from each other and the conditioning set")]
    OverlappingQuery,
}

/// A validated causal DAG with designated treatment and outcome.
///
/// Immutable after construction; all queries are read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalDag {
    nodes: Vec<String>,
    /// Adjacency by node index, each list sorted ascending.
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    edges: BTreeSet<(usize, usize)>,
    treatment: usize,
    outcome: usize,
}

/// A set of covariates to adjust for, with the rule that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjustmentSet {
    pub members: BTreeSet<String>,
    pub kind: AdjustmentKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjustmentKind {
    /// Direct parents of the treatment node.
    Parent,
    /// Inclusion-minimal set satisfying the backdoor criterion.
    MinimalBackdoor,
}

impl CausalDag {
    /// Build a DAG from named edges. Node order is first-appearance order.
    pub fn new(
        node_decls: &[String],
        edges: &[(String, String)],
        treatment: &str,
        outcome: &str,
    ) -> Result<Self, GraphError> {
        let mut nodes: Vec<String> = Vec::new();
        let index_of = |name: &str, nodes: &mut Vec<String>| -> usize {
            match nodes.iter().position(|n| n == name) {
                Some(i) => i,
                None => {
                    nodes.push(name.to_string());
                    nodes.len() - 1
                }
            }
        };
        for d in node_decls {
            index_of(d, &mut nodes);
        }
        let mut edge_idx: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfEdge(a.clone()));
            }
            let ia = index_of(a, &mut nodes);
            let ib = index_of(b, &mut nodes);
            edge_idx.push((ia, ib));
        }
        let mut edge_set: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &(a, b) in &edge_idx {
            if !edge_set.insert((a, b)) {
                return Err(GraphError::DuplicateEdge(nodes[a].clone(), nodes[b].clone()));
            }
        }
        let n = nodes.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(a, b) in &edge_set {
            children[a].push(b);
            parents[b].push(a);
        }
        for l in parents.iter_mut().chain(children.iter_mut()) {
            l.sort_unstable();
        }

        if treatment == outcome {
            return Err(GraphError::TreatmentIsOutcome(treatment.to_string()));
        }
        let t = nodes
            .iter()
            .position(|x| x == treatment)
            .ok_or_else(|| GraphError::UnknownNode(treatment.to_string()))?;
        let y = nodes
            .iter()
            .position(|x| x == outcome)
            .ok_or_else(|| GraphError::UnknownNode(outcome.to_string()))?;

        let dag = CausalDag { nodes, parents, children, edges: edge_set, treatment: t, outcome: y };
        if let Some(cyclic) = dag.find_cycle_node() {
            return Err(GraphError::Cycle(dag.nodes[cyclic].clone()));
        }
        Ok(dag)
    }

    /// Kahn's algorithm; returns a node on a cycle if one exists.
    fn find_cycle_node(&self) -> Option<usize> {
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.parents[i].len()).collect();
        let mut queue: VecDeque<usize> =
            (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0usize;
        while let Some(v) = queue.pop_front() {
            seen += 1;
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if seen == n {
            None
        } else {
            (0..n).find(|&i| indeg[i] > 0)
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn treatment(&self) -> &str {
        &self.nodes[self.treatment]
    }

    pub fn outcome(&self) -> &str {
        &self.nodes[self.outcome]
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match (self.index(from), self.index(to)) {
            (Ok(a), Ok(b)) => self.edges.contains(&(a, b)),
            _ => false,
        }
    }

    /// Edges as (cause, effect) name pairs, in deterministic node order.
    pub fn edge_names(&self) -> Vec<(String, String)> {
        let mut out = Vec::with_capacity(self.edges.len());
        for a in 0..self.nodes.len() {
            for &b in &self.children[a] {
                out.push((self.nodes[a].clone(), self.nodes[b].clone()));
            }
        }
        out
    }

    pub fn index(&self, name: &str) -> Result<usize, GraphError> {
        self.nodes
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub fn parents_of(&self, name: &str) -> Result<Vec<String>, GraphError> {
        let i = self.index(name)?;
        Ok(self.parents[i].iter().map(|&p| self.nodes[p].clone()).collect())
    }

    /// Strict descendants of a node (the node itself excluded).
    pub fn descendants(&self, name: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.index(name)?;
        Ok(self
            .descendant_indices(i)
            .into_iter()
            .filter(|&d| d != i)
            .map(|d| self.nodes[d].clone())
            .collect())
    }

    /// Descendants including the node itself.
    fn descendant_indices(&self, i: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![i];
        while let Some(v) = stack.pop() {
            if out.insert(v) {
                stack.extend(self.children[v].iter().copied());
            }
        }
        out
    }

    /// Nodes in a topological order (stable: smallest index first among ready nodes).
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.parents[i].len()).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }

    /// d-separation of `x` and `y` given `z`, by reachability over the
    /// active-trail state graph (node, direction of arrival).
    pub fn d_separated(
        &self,
        x: &str,
        y: &str,
        z: &BTreeSet<String>,
    ) -> Result<bool, GraphError> {
        let xi = self.index(x)?;
        let yi = self.index(y)?;
        let mut zi = BTreeSet::new();
        for name in z {
            zi.insert(self.index(name)?);
        }
        if xi == yi || zi.contains(&xi) || zi.contains(&yi) {
            return Err(GraphError::OverlappingQuery);
        }
        Ok(self.d_separated_idx(xi, yi, &zi))
    }

    pub(crate) fn d_separated_idx(&self, x: usize, y: usize, z: &BTreeSet<usize>) -> bool {
        // Ancestors of z, inclusive: a collider is open iff it is in here.
        let mut anc_z = BTreeSet::new();
        let mut stack: Vec<usize> = z.iter().copied().collect();
        while let Some(v) = stack.pop() {
            if anc_z.insert(v) {
                stack.extend(self.parents[v].iter().copied());
            }
        }

        // State: (node, arrived_descending). arrived_descending=true means the
        // previous step traversed an edge parent->node.
        let n = self.nodes.len();
        let mut visited = vec![[false; 2]; n];
        let mut queue: VecDeque<(usize, bool)> = VecDeque::new();
        // From x we may start in any direction; x is never in z by contract.
        queue.push_back((x, true));
        queue.push_back((x, false));
        while let Some((v, descending)) = queue.pop_front() {
            if v == y {
                return false;
            }
            let slot = usize::from(descending);
            if visited[v][slot] {
                continue;
            }
            visited[v][slot] = true;
            if descending {
                // parent -> v. Continue to children unless v blocks as a
                // non-collider; turn back up through parents iff v is an
                // open collider (v in ancestors-of-z inclusive).
                if !z.contains(&v) {
                    for &c in &self.children[v] {
                        queue.push_back((c, true));
                    }
                }
                if anc_z.contains(&v) {
                    for &p in &self.parents[v] {
                        queue.push_back((p, false));
                    }
                }
            } else {
                // child -> v (ascending). v acts as a chain or fork node:
                // blocked exactly when v is in z.
                if !z.contains(&v) {
                    for &p in &self.parents[v] {
                        queue.push_back((p, false));
                    }
                    for &c in &self.children[v] {
                        queue.push_back((c, true));
                    }
                }
            }
        }
        true
    }

    /// Backdoor criterion for adjustment set `z`: no member of `z` is a
    /// descendant of the treatment, and `z` d-separates treatment and
    /// outcome once every edge out of the treatment is removed.
    pub fn backdoor_satisfied(&self, z: &BTreeSet<String>) -> Result<bool, GraphError> {
        let mut zi = BTreeSet::new();
        for name in z {
            let i = self.index(name)?;
            if i == self.treatment || i == self.outcome {
                return Err(GraphError::ForbiddenMember(name.clone()));
            }
            zi.insert(i);
        }
        Ok(self.backdoor_satisfied_idx(&zi))
    }

    fn backdoor_satisfied_idx(&self, zi: &BTreeSet<usize>) -> bool {
        let desc = self.descendant_indices(self.treatment);
        if zi.iter().any(|m| *m != self.treatment && desc.contains(m)) {
            return false;
        }
        let trimmed = self.without_edges_out_of(self.treatment);
        trimmed.d_separated_idx(self.treatment, self.outcome, zi)
    }

    fn without_edges_out_of(&self, node: usize) -> CausalDag {
        let mut out = self.clone();
        for &c in &self.children[node] {
            out.edges.remove(&(node, c));
            out.parents[c].retain(|&p| p != node);
        }
        out.children[node].clear();
        out
    }

    /// The parent adjustment set: direct parents of the treatment.
    ///
    /// Always satisfies the backdoor criterion in a DAG without latent
    /// confounders (no parent of the treatment is its descendant).
    pub fn parent_adjustment_set(&self) -> AdjustmentSet {
        let members = self.parents[self.treatment]
            .iter()
            .filter(|&&p| p != self.outcome)
            .map(|&p| self.nodes[p].clone())
            .collect();
        AdjustmentSet { members, kind: AdjustmentKind::Parent }
    }

    /// All inclusion-minimal backdoor sets of size at most `max_size`,
    /// ordered by (size, lexicographic members).
    pub fn minimal_backdoor_sets(&self, max_size: usize) -> Vec<AdjustmentSet> {
        let desc = self.descendant_indices(self.treatment);
        let candidates: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| i != self.treatment && i != self.outcome && !desc.contains(&i))
            .collect();
        let mut valid: Vec<BTreeSet<usize>> = Vec::new();
        let mut minimal: Vec<BTreeSet<usize>> = Vec::new();
        let cap = max_size.min(candidates.len());
        for size in 0..=cap {
            for combo in combinations(&candidates, size) {
                let set: BTreeSet<usize> = combo.into_iter().collect();
                if !self.backdoor_satisfied_idx(&set) {
                    continue;
                }
                if !valid.iter().any(|v| v.is_subset(&set) && v != &set) {
                    minimal.push(set.clone());
                }
                valid.push(set);
            }
        }
        let mut out: Vec<AdjustmentSet> = minimal
            .into_iter()
            .map(|s| AdjustmentSet {
                members: s.into_iter().map(|i| self.nodes[i].clone()).collect(),
                kind: AdjustmentKind::MinimalBackdoor,
            })
            .collect();
        out.sort_by(|a, b| {
            a.members
                .len()
                .cmp(&b.members.len())
                .then_with(|| a.members.cmp(&b.members))
        });
        out
    }

    /// Serialize to the `.dag` edge-list format. Round-trips through
    /// [`parse_dag`] to an identical graph.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "treatment: {}", self.treatment());
        let _ = writeln!(s, "outcome: {}", self.outcome());
        // Declaring every node up front preserves node order (and isolated
        // nodes) across the round trip.
        for name in &self.nodes {
            let _ = writeln!(s, "{name}");
        }
        for a in 0..self.nodes.len() {
            for &b in &self.children[a] {
                let _ = writeln!(s, "{} -> {}", self.nodes[a], self.nodes[b]);
            }
        }
        s
    }
}

/// Parse the `.dag` edge-list format.
///
/// One `A -> B` per line; `#` starts a comment; blank lines ignored;
/// `treatment:` / `outcome:` header directives; a bare name declares an
/// isolated node. LF and CRLF both accepted. Explicit `treatment` /
/// `outcome` arguments override the file directives.
pub fn parse_dag(
    text: &str,
    treatment: Option<&str>,
    outcome: Option<&str>,
) -> Result<CausalDag, GraphError> {
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut decls: Vec<String> = Vec::new();
    let mut file_treatment: Option<String> = None;
    let mut file_outcome: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("treatment:") {
            file_treatment = Some(rest.trim().to_string());
            continue;
        }
        if let Some(rest) = line.strip_prefix("outcome:") {
            file_outcome = Some(rest.trim().to_string());
            continue;
        }
        if let Some((a, b)) = line.split_once("->") {
            let a = a.trim();
            let b = b.trim();
            if a.is_empty() || b.is_empty() {
                return Err(GraphError::EmptyName(lineno + 1));
            }
            if a.contains(char::is_whitespace) || b.contains(char::is_whitespace) {
                return Err(GraphError::MalformedLine { line: lineno + 1, text: raw.to_string() });
            }
            edges.push((a.to_string(), b.to_string()));
        } else if line.contains(char::is_whitespace) {
            return Err(GraphError::MalformedLine { line: lineno + 1, text: raw.to_string() });
        } else {
            decls.push(line.to_string());
        }
    }
    let t = treatment
        .map(str::to_string)
        .or(file_treatment)
        .ok_or(GraphError::MissingDirective("treatment"))?;
    let y = outcome
        .map(str::to_string)
        .or(file_outcome)
        .ok_or(GraphError::MissingDirective("outcome"))?;
    CausalDag::new(&decls, &edges, &t, &y)
}

fn combinations(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(size);
    fn rec(items: &[usize], size: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        for i in start..items.len() {
            current.push(items[i]);
            rec(items, size, i + 1, current, out);
            current.pop();
        }
    }
    rec(items, size, 0, &mut current, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn chain() -> CausalDag {
        parse_dag("A -> B\nB -> C", Some("A"), Some("C")).unwrap()
    }

    #[test]
    fn parses_chain() {
        let dag = chain();
        assert_eq!(dag.node_count(), 3);
        assert_eq!(dag.edge_count(), 2);
        assert_eq!(dag.nodes(), ["A", "B", "C"]);
    }

    #[test]
    fn two_cycle_rejected() {
        let err = parse_dag("A -> B\nB -> A", Some("A"), Some("B")).unwrap_err();
        assert!(matches!(err, GraphError::Cycle(_)));
    }

    #[test]
    fn duplicate_edge_rejected() {
        let err = parse_dag("A -> B\nA -> B", Some("A"), Some("B")).unwrap_err();
        assert_eq!(err, GraphError::DuplicateEdge("A".into(), "B".into()));
    }

    #[test]
    fn self_edge_rejected() {
        let err = parse_dag("A -> A\nA -> B", Some("A"), Some("B")).unwrap_err();
        assert_eq!(err, GraphError::SelfEdge("A".into()));
    }

    #[test]
    fn malformed_line_reported_with_number() {
        let err = parse_dag("A -> B\nB => C", Some("A"), Some("B")).unwrap_err();
        assert!(matches!(err, GraphError::MalformedLine { line: 2, .. }));
    }

    #[test]
    fn unknown_treatment_rejected() {
        let err = parse_dag("A -> B", Some("Q"), Some("B")).unwrap_err();
        assert_eq!(err, GraphError::UnknownNode("Q".into()));
    }

    #[test]
    fn directives_and_comments() {
        let dag = parse_dag(
            "# malnutrition toy\ntreatment: A\noutcome: C\nA -> B # edge\nB -> C\n",
            None,
            None,
        )
        .unwrap();
        assert_eq!(dag.treatment(), "A");
        assert_eq!(dag.outcome(), "C");
    }

    #[test]
    fn crlf_tolerated() {
        let dag = parse_dag("A -> B\r\nB -> C\r\n", Some("A"), Some("C")).unwrap();
        assert_eq!(dag.edge_count(), 2);
    }

    #[test]
    fn chain_blocked_by_middle() {
        let dag = chain();
        assert!(dag.d_separated("A", "C", &set(&["B"])).unwrap());
        assert!(!dag.d_separated("A", "C", &set(&[])).unwrap());
    }

    #[test]
    fn collider_opens_when_conditioned() {
        let dag = parse_dag("A -> C\nB -> C", Some("A"), Some("B")).unwrap();
        assert!(dag.d_separated("A", "B", &set(&[])).unwrap());
        assert!(!dag.d_separated("A", "B", &set(&["C"])).unwrap());
    }

    #[test]
    fn collider_descendant_opens() {
        let dag = parse_dag("A -> C\nB -> C\nC -> D", Some("A"), Some("B")).unwrap();
        assert!(!dag.d_separated("A", "B", &set(&["D"])).unwrap());
    }

    #[test]
    fn query_overlap_rejected() {
        let dag = chain();
        assert_eq!(dag.d_separated("A", "A", &set(&[])).unwrap_err(), GraphError::OverlappingQuery);
        assert_eq!(
            dag.d_separated("A", "C", &set(&["A", "B"])).unwrap_err(),
            GraphError::OverlappingQuery
        );
    }

    #[test]
    fn confounding_triangle_backdoor() {
        let dag = parse_dag("X -> T\nX -> Y\nT -> Y", Some("T"), Some("Y")).unwrap();
        assert!(dag.backdoor_satisfied(&set(&["X"])).unwrap());
        assert!(!dag.backdoor_satisfied(&set(&[])).unwrap());
    }

    #[test]
    fn mediator_fails_backdoor() {
        let dag = parse_dag("T -> M\nM -> Y", Some("T"), Some("Y")).unwrap();
        assert!(!dag.backdoor_satisfied(&set(&["M"])).unwrap());
    }

    #[test]
    fn backdoor_rejects_treatment_member() {
        let dag = chain();
        assert!(matches!(
            dag.backdoor_satisfied(&set(&["A"])),
            Err(GraphError::ForbiddenMember(_))
        ));
    }

    #[test]
    fn parent_set_of_chain() {
        let dag = parse_dag("A -> T\nT -> Y", Some("T"), Some("Y")).unwrap();
        let z = dag.parent_adjustment_set();
        assert_eq!(z.members, set(&["A"]));
        assert_eq!(z.kind, AdjustmentKind::Parent);
        assert!(dag.backdoor_satisfied(&z.members).unwrap());
    }

    #[test]
    fn parent_set_empty_when_no_parents() {
        let dag = parse_dag("T -> Y", Some("T"), Some("Y")).unwrap();
        assert!(dag.parent_adjustment_set().members.is_empty());
    }

    #[test]
    fn minimal_sets_confounding_triangle() {
        let dag = parse_dag("X -> T\nX -> Y\nT -> Y", Some("T"), Some("Y")).unwrap();
        let sets = dag.minimal_backdoor_sets(3);
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].members, set(&["X"]));
    }

    #[test]
    fn minimal_sets_empty_set_valid() {
        let dag = parse_dag("T -> Y\nN", Some("T"), Some("Y")).unwrap();
        let sets = dag.minimal_backdoor_sets(2);
        assert_eq!(sets.len(), 1);
        assert!(sets[0].members.is_empty());
    }

    #[test]
    fn minimal_sets_parallel_confounders() {
        let dag =
            parse_dag("X1 -> T\nX1 -> Y\nX2 -> T\nX2 -> Y\nT -> Y", Some("T"), Some("Y")).unwrap();
        let sets = dag.minimal_backdoor_sets(3);
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].members, set(&["X1", "X2"]));
    }

    #[test]
    fn serialize_round_trips() {
        let dag = parse_dag("A -> T\nT -> Y\nB", Some("T"), Some("Y")).unwrap();
        let text = dag.serialize();
        let back = parse_dag(&text, None, None).unwrap();
        assert_eq!(dag, back);
    }
}
