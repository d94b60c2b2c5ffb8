//! Synthetic structural causal models with known ground-truth effects.
//!
//! This is the toolkit's verification backbone: ancestral sampling gives
//! benchmark datasets, `true_ate` gives the ground truth (closed form for
//! linear mechanisms, shared-noise Monte-Carlo otherwise), and
//! `brute_force_d_separated` is the independent oracle for the graph
//! module's reachability-based test.
//!
//! Sampling is seed-deterministic and platform-independent: all noise is
//! drawn from ChaCha8 streams derived per the scheme in [`crate::seed`],
//! converted to standard normals by inverse-CDF of uniforms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::graph::{parse_dag, CausalDag, GraphError};
use crate::seed;
use crate::tabular::{Cell, ColumnKind, Table};

#[derive(Debug, Error)]
pub enum ScmError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("node `{node}` mechanism expects {expected} parent coefficients, has {got}")]
    CoefficientMismatch { node: String, expected: usize, got: usize },
    #[error("node `{0}` has no mechanism")]
    MissingMechanism(String),
    #[error("negative noise sigma on node `{0}`")]
    NegativeNoise(String),
    #[error("path enumeration limited to 12 nodes, graph has {0}")]
    NodeBudget(usize),
    #[error("unknown benchmark spec `{0}`")]
    UnknownBenchmark(String),
    #[error("malformed mechanism line {line}: `{text}`")]
    MalformedLine { line: usize, text: String },
}

/// How a node's value is produced from its parents (in DAG parent order)
/// and an exogenous standard-normal noise term.
#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    /// intercept + coeffs . parents + noise * eps
    Linear { intercept: f64, coeffs: Vec<f64>, noise: f64 },
    /// Binary: 1 if intercept + coeffs . parents + noise * eps > 0.
    ThresholdLinear { intercept: f64, coeffs: Vec<f64>, noise: f64 },
    /// Binary: Bernoulli(sigmoid(intercept + coeffs . parents)).
    BernoulliLogistic { intercept: f64, coeffs: Vec<f64> },
    /// scale * sigmoid(intercept + coeffs . parents + noise * eps);
    /// keeps outcomes inside (0, scale).
    SigmoidScaled { intercept: f64, coeffs: Vec<f64>, noise: f64, scale: f64 },
    /// Linear plus one product term coeff * parent_a * parent_b
    /// (indices into the parent list); used for heterogeneous effects.
    LinearInteraction {
        intercept: f64,
        coeffs: Vec<f64>,
        pair: (usize, usize, f64),
        noise: f64,
    },
}

impl Mechanism {
    fn coeff_len(&self) -> usize {
        match self {
            Mechanism::Linear { coeffs, .. }
            | Mechanism::ThresholdLinear { coeffs, .. }
            | Mechanism::BernoulliLogistic { coeffs, .. }
            | Mechanism::SigmoidScaled { coeffs, .. }
            | Mechanism::LinearInteraction { coeffs, .. } => coeffs.len(),
        }
    }

    fn noise_sigma(&self) -> f64 {
        match self {
            Mechanism::Linear { noise, .. }
            | Mechanism::ThresholdLinear { noise, .. }
            | Mechanism::SigmoidScaled { noise, .. }
            | Mechanism::LinearInteraction { noise, .. } => *noise,
            Mechanism::BernoulliLogistic { .. } => 0.0,
        }
    }

    fn eval(&self, parents: &[f64], eps: f64, uniform: f64) -> f64 {
        let lin = |intercept: f64, coeffs: &[f64]| {
            intercept + coeffs.iter().zip(parents).map(|(c, p)| c * p).sum::<f64>()
        };
        match self {
            Mechanism::Linear { intercept, coeffs, noise } => lin(*intercept, coeffs) + noise * eps,
            Mechanism::ThresholdLinear { intercept, coeffs, noise } => {
                f64::from(lin(*intercept, coeffs) + noise * eps > 0.0)
            }
            Mechanism::BernoulliLogistic { intercept, coeffs } => {
                let p = 1.0 / (1.0 + (-lin(*intercept, coeffs)).exp());
                f64::from(uniform < p)
            }
            Mechanism::SigmoidScaled { intercept, coeffs, noise, scale } => {
                scale / (1.0 + (-(lin(*intercept, coeffs) + noise * eps)).exp())
            }
            Mechanism::LinearInteraction { intercept, coeffs, pair, noise } => {
                lin(*intercept, coeffs) + pair.2 * parents[pair.0] * parents[pair.1] + noise * eps
            }
        }
    }
}

/// A DAG plus one mechanism per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmSpec {
    dag: CausalDag,
    mechanisms: BTreeMap<String, Mechanism>,
}

impl ScmSpec {
    pub fn new(dag: CausalDag, mechanisms: BTreeMap<String, Mechanism>) -> Result<Self, ScmError> {
        for node in dag.nodes() {
            let mech = mechanisms
                .get(node)
                .ok_or_else(|| ScmError::MissingMechanism(node.clone()))?;
            let expected = dag.parents_of(node)?.len();
            if mech.coeff_len() != expected {
                return Err(ScmError::CoefficientMismatch {
                    node: node.clone(),
                    expected,
                    got: mech.coeff_len(),
                });
            }
            if mech.noise_sigma() < 0.0 {
                return Err(ScmError::NegativeNoise(node.clone()));
            }
        }
        Ok(ScmSpec { dag, mechanisms })
    }

    pub fn dag(&self) -> &CausalDag {
        &self.dag
    }

    pub fn mechanism(&self, node: &str) -> Option<&Mechanism> {
        self.mechanisms.get(node)
    }

    /// Ancestral sampling in topological order; deterministic under seed.
    pub fn sample(&self, n: usize, seed_value: u64) -> Table {
        assert!(n >= 1);
        let (noise, uniforms) = self.draw_noise(n, seed_value);
        let values = self.evaluate(&noise, &uniforms, None);
        self.to_table(values)
    }

    /// Standard-normal noise and uniforms, one pair per (row, node).
    fn draw_noise(&self, n: usize, seed_value: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let v = self.dag.node_count();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = seed::rng(seed_value, "scm-sample");
        let mut noise = vec![vec![0.0; v]; n];
        let mut uniforms = vec![vec![0.0; v]; n];
        for row in 0..n {
            for node in 0..v {
                // inverse-CDF keeps the stream portable across platforms
                let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                noise[row][node] = normal.inverse_cdf(u);
                uniforms[row][node] = rng.gen_range(0.0..1.0);
            }
        }
        (noise, uniforms)
    }

    /// Evaluate all nodes on the given noise, optionally forcing the
    /// treatment node to a fixed value (the do-intervention).
    fn evaluate(
        &self,
        noise: &[Vec<f64>],
        uniforms: &[Vec<f64>],
        do_treatment: Option<f64>,
    ) -> Vec<Vec<f64>> {
        let order = self.dag.topological_order();
        let nodes = self.dag.nodes();
        let t_idx = self.dag.index(self.dag.treatment()).unwrap();
        let n = noise.len();
        let mut values = vec![vec![0.0; nodes.len()]; n];
        for row in 0..n {
            for &i in &order {
                if let Some(forced) = do_treatment {
                    if i == t_idx {
                        values[row][i] = forced;
                        continue;
                    }
                }
                let name = &nodes[i];
                let parent_names = self.dag.parents_of(name).unwrap();
                let parents: Vec<f64> = parent_names
                    .iter()
                    .map(|p| values[row][self.dag.index(p).unwrap()])
                    .collect();
                values[row][i] =
                    self.mechanisms[name].eval(&parents, noise[row][i], uniforms[row][i]);
            }
        }
        values
    }

    fn to_table(&self, values: Vec<Vec<f64>>) -> Table {
        let columns: Vec<(String, ColumnKind)> =
            self.dag.nodes().iter().map(|n| (n.clone(), ColumnKind::Numeric)).collect();
        let rows = values
            .into_iter()
            .map(|r| r.into_iter().map(Cell::Num).collect())
            .collect();
        Table::new(columns, rows)
    }

    /// Ground-truth ATE of the treatment on the outcome.
    ///
    /// For fully linear downstream mechanisms this is the closed-form
    /// total effect: the sum over directed treatment-to-outcome paths of
    /// the products of edge coefficients. Otherwise the truth is
    /// Monte-Carlo on shared noise: evaluate the outcome under both
    /// interventions with identical exogenous draws and average the
    /// difference.
    pub fn true_ate(&self, n_mc: usize, seed_value: u64) -> f64 {
        if let Some(effect) = self.closed_form_total_effect() {
            return effect;
        }
        assert!(n_mc >= 10_000, "Monte-Carlo path requires n_mc >= 10000");
        let (noise, uniforms) = self.draw_noise(n_mc, seed_value);
        let y_idx = self.dag.index(self.dag.outcome()).unwrap();
        let y1 = self.evaluate(&noise, &uniforms, Some(1.0));
        let y0 = self.evaluate(&noise, &uniforms, Some(0.0));
        y1.iter().zip(&y0).map(|(a, b)| a[y_idx] - b[y_idx]).sum::<f64>() / n_mc as f64
    }

    /// Sum over directed T->Y paths of edge-coefficient products, if every
    /// node strictly between T and Y (and Y itself) is linear.
    fn closed_form_total_effect(&self) -> Option<f64> {
        let t = self.dag.treatment();
        let y = self.dag.outcome();
        // derivative of node w.r.t. treatment, holding noise fixed
        let mut deriv: BTreeMap<&str, f64> = BTreeMap::new();
        for &i in &self.dag.topological_order() {
            let node = &self.dag.nodes()[i];
            if node == t {
                deriv.insert(node, 1.0);
                continue;
            }
            let parent_names = self.dag.parents_of(node).ok()?;
            let relevant: Vec<(usize, f64)> = parent_names
                .iter()
                .enumerate()
                .filter_map(|(k, p)| deriv.get(p.as_str()).map(|&d| (k, d)))
                .filter(|&(_, d)| d != 0.0)
                .collect();
            if relevant.is_empty() {
                deriv.insert(node, 0.0);
                continue;
            }
            // node depends on the treatment: must be linear for closed form
            let Mechanism::Linear { coeffs, .. } = &self.mechanisms[node] else {
                return None;
            };
            let d: f64 = relevant.iter().map(|&(k, dp)| coeffs[k] * dp).sum();
            deriv.insert(node, d);
        }
        deriv.get(y).copied()
    }

    /// Serialize to the declarative mechanism format (see `parse`).
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "treatment: {}", self.dag.treatment());
        let _ = writeln!(s, "outcome: {}", self.dag.outcome());
        for node in self.dag.nodes() {
            let parents = self.dag.parents_of(node).unwrap();
            let mech = &self.mechanisms[node];
            let header = format!("{node}({})", parents.join(","));
            let body = match mech {
                Mechanism::Linear { intercept, coeffs, noise } => {
                    format!("linear {intercept} [{}] {noise}", join(coeffs))
                }
                Mechanism::ThresholdLinear { intercept, coeffs, noise } => {
                    format!("threshold {intercept} [{}] {noise}", join(coeffs))
                }
                Mechanism::BernoulliLogistic { intercept, coeffs } => {
                    format!("bernoulli {intercept} [{}]", join(coeffs))
                }
                Mechanism::SigmoidScaled { intercept, coeffs, noise, scale } => {
                    format!("sigmoid {intercept} [{}] {noise} {scale}", join(coeffs))
                }
                Mechanism::LinearInteraction { intercept, coeffs, pair, noise } => format!(
                    "interaction {intercept} [{}] {noise} {}*{}:{}",
                    join(coeffs),
                    pair.0,
                    pair.1,
                    pair.2
                ),
            };
            let _ = writeln!(s, "{header} = {body}");
        }
        s
    }

    /// Parse the mechanism format written by [`ScmSpec::serialize`]:
    /// `treatment:`/`outcome:` directives, then one
    /// `Node(Parent1,Parent2) = kind intercept [c1,c2] sigma ...` per line.
    pub fn parse(text: &str) -> Result<ScmSpec, ScmError> {
        let mut treatment = None;
        let mut outcome = None;
        let mut decls: Vec<String> = Vec::new();
        let mut edges: Vec<(String, String)> = Vec::new();
        let mut mechanisms: BTreeMap<String, Mechanism> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("treatment:") {
                treatment = Some(rest.trim().to_string());
                continue;
            }
            if let Some(rest) = line.strip_prefix("outcome:") {
                outcome = Some(rest.trim().to_string());
                continue;
            }
            let malformed = || ScmError::MalformedLine { line: lineno + 1, text: raw.to_string() };
            let (head, body) = line.split_once('=').ok_or_else(malformed)?;
            let head = head.trim();
            let open = head.find('(').ok_or_else(malformed)?;
            if !head.ends_with(')') {
                return Err(malformed());
            }
            let node = head[..open].trim().to_string();
            let parents: Vec<String> = head[open + 1..head.len() - 1]
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            decls.push(node.clone());
            for p in &parents {
                edges.push((p.clone(), node.clone()));
            }

            let tokens: Vec<&str> = body.trim().split_whitespace().collect();
            let parse_f = |s: &str| s.parse::<f64>().map_err(|_| malformed());
            let parse_coeffs = |s: &str| -> Result<Vec<f64>, ScmError> {
                let inner = s.strip_prefix('[').and_then(|x| x.strip_suffix(']')).ok_or_else(malformed)?;
                inner
                    .split(',')
                    .map(str::trim)
                    .filter(|x| !x.is_empty())
                    .map(|x| x.parse::<f64>().map_err(|_| malformed()))
                    .collect()
            };
            let mech = match tokens.as_slice() {
                ["linear", i, c, s] => Mechanism::Linear {
                    intercept: parse_f(i)?,
                    coeffs: parse_coeffs(c)?,
                    noise: parse_f(s)?,
                },
                ["threshold", i, c, s] => Mechanism::ThresholdLinear {
                    intercept: parse_f(i)?,
                    coeffs: parse_coeffs(c)?,
                    noise: parse_f(s)?,
                },
                ["bernoulli", i, c] => Mechanism::BernoulliLogistic {
                    intercept: parse_f(i)?,
                    coeffs: parse_coeffs(c)?,
                },
                ["sigmoid", i, c, s, scale] => Mechanism::SigmoidScaled {
                    intercept: parse_f(i)?,
                    coeffs: parse_coeffs(c)?,
                    noise: parse_f(s)?,
                    scale: parse_f(scale)?,
                },
                ["interaction", i, c, s, pair] => {
                    let (ab, coef) = pair.split_once(':').ok_or_else(malformed)?;
                    let (a, b) = ab.split_once('*').ok_or_else(malformed)?;
                    Mechanism::LinearInteraction {
                        intercept: parse_f(i)?,
                        coeffs: parse_coeffs(c)?,
                        pair: (
                            a.parse().map_err(|_| malformed())?,
                            b.parse().map_err(|_| malformed())?,
                            parse_f(coef)?,
                        ),
                        noise: parse_f(s)?,
                    }
                }
                _ => return Err(malformed()),
            };
            mechanisms.insert(node, mech);
        }
        let dag = CausalDag::new(
            &decls,
            &edges,
            &treatment.ok_or(GraphError::MissingDirective("treatment"))?,
            &outcome.ok_or(GraphError::MissingDirective("outcome"))?,
        )?;
        ScmSpec::new(dag, mechanisms)
    }
}

fn join(coeffs: &[f64]) -> String {
    coeffs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Brute-force d-separation: enumerate all simple undirected paths and
/// apply the blocking rules per path. Independent oracle for
/// [`CausalDag::d_separated`]; limited to 12 nodes.
pub fn brute_force_d_separated(
    dag: &CausalDag,
    x: &str,
    y: &str,
    z: &BTreeSet<String>,
) -> Result<bool, ScmError> {
    if dag.node_count() > 12 {
        return Err(ScmError::NodeBudget(dag.node_count()));
    }
    let xi = dag.index(x)?;
    let yi = dag.index(y)?;
    let zi: BTreeSet<usize> = z.iter().map(|n| dag.index(n)).collect::<Result<_, _>>()?;

    // descendants-inclusive per node, for the collider rule
    let n = dag.node_count();
    let nodes = dag.nodes().to_vec();
    let desc_inclusive: Vec<BTreeSet<usize>> = (0..n)
        .map(|i| {
            let mut set: BTreeSet<usize> = dag
                .descendants(&nodes[i])
                .unwrap()
                .iter()
                .map(|d| dag.index(d).unwrap())
                .collect();
            set.insert(i);
            set
        })
        .collect();
    let edge = |a: usize, b: usize| dag.has_edge(&nodes[a], &nodes[b]);

    // enumerate simple undirected paths xi -> yi
    let mut all_blocked = true;
    let mut path = vec![xi];
    let mut on_path = vec![false; n];
    on_path[xi] = true;
    fn dfs(
        at: usize,
        target: usize,
        n: usize,
        edge: &dyn Fn(usize, usize) -> bool,
        path: &mut Vec<usize>,
        on_path: &mut Vec<bool>,
        check: &mut dyn FnMut(&[usize]) -> bool,
        all_blocked: &mut bool,
    ) {
        if at == target {
            if !check(path) {
                *all_blocked = false;
            }
            return;
        }
        for next in 0..n {
            if !on_path[next] && (edge(at, next) || edge(next, at)) {
                path.push(next);
                on_path[next] = true;
                dfs(next, target, n, edge, path, on_path, check, all_blocked);
                on_path[next] = false;
                path.pop();
            }
        }
    }
    let mut check = |p: &[usize]| -> bool {
        // blocked iff some intermediate node blocks
        for w in 1..p.len() - 1 {
            let (a, v, b) = (p[w - 1], p[w], p[w + 1]);
            let collider = edge(a, v) && edge(b, v);
            if collider {
                if desc_inclusive[v].is_disjoint(&zi) {
                    return true;
                }
            } else if zi.contains(&v) {
                return true;
            }
        }
        false
    };
    dfs(xi, yi, n, &edge, &mut path, &mut on_path, &mut check, &mut all_blocked);
    Ok(all_blocked)
}

/// The shipped benchmark SCMs, keyed by name.
pub fn benchmark_suite() -> Vec<(String, ScmSpec)> {
    vec![
        ("confounded-linear".to_string(), confounded_linear()),
        ("null".to_string(), null_effect()),
        ("heterogeneous".to_string(), heterogeneous()),
        ("somalia-shaped".to_string(), somalia_shaped()),
    ]
}

pub fn benchmark(name: &str) -> Result<ScmSpec, ScmError> {
    benchmark_suite()
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, s)| s)
        .ok_or_else(|| ScmError::UnknownBenchmark(name.to_string()))
}

/// The bundled 9-node malnutrition DAG.
pub fn somalia_dag_text() -> &'static str {
    include_str!("../fixtures/somalia.dag")
}

fn confounder_dag() -> CausalDag {
    // node declarations pin the parent order the mechanisms rely on
    parse_dag(
        "X1\nX2\nX3\nT\nY\nX1 -> T\nX2 -> T\nX3 -> T\nX1 -> Y\nX2 -> Y\nX3 -> Y\nT -> Y\n",
        Some("T"),
        Some("Y"),
    )
    .unwrap()
}

/// Three confounders drive both arms; true ATE exactly 2.0.
/// Confounding is strong enough that the naive arm-mean difference is
/// biased by far more than 0.3; treatment assignment is logistic so the
/// propensity model is well specified.
fn confounded_linear() -> ScmSpec {
    let dag = confounder_dag();
    let mut m = BTreeMap::new();
    for x in ["X1", "X2", "X3"] {
        m.insert(x.to_string(), Mechanism::Linear { intercept: 0.0, coeffs: vec![], noise: 1.0 });
    }
    m.insert(
        "T".to_string(),
        Mechanism::BernoulliLogistic { intercept: 0.0, coeffs: vec![0.6, 0.6, 0.6] },
    );
    m.insert(
        "Y".to_string(),
        // parents of Y in node-index order: X1, X2, X3, T
        Mechanism::Linear { intercept: 1.0, coeffs: vec![1.5, 1.5, 1.5, 2.0], noise: 1.0 },
    );
    ScmSpec::new(dag, m).unwrap()
}

/// Treatment assigned from the confounders, outcome independent of it:
/// true ATE exactly 0.
fn null_effect() -> ScmSpec {
    let dag = parse_dag(
        "X1\nX2\nX3\nT\nY\nX1 -> T\nX2 -> T\nX3 -> T\nX1 -> Y\nX2 -> Y\nX3 -> Y\n",
        Some("T"),
        Some("Y"),
    )
    .unwrap();
    let mut m = BTreeMap::new();
    for x in ["X1", "X2", "X3"] {
        m.insert(x.to_string(), Mechanism::Linear { intercept: 0.0, coeffs: vec![], noise: 1.0 });
    }
    m.insert(
        "T".to_string(),
        Mechanism::BernoulliLogistic { intercept: 0.0, coeffs: vec![0.6, 0.6, 0.6] },
    );
    m.insert(
        "Y".to_string(),
        Mechanism::Linear { intercept: 0.0, coeffs: vec![1.0, 1.0, 1.0], noise: 1.0 },
    );
    ScmSpec::new(dag, m).unwrap()
}

/// Effect varies with X1 (interaction term); truth via Monte-Carlo.
fn heterogeneous() -> ScmSpec {
    let dag = parse_dag(
        "X1\nX2\nT\nY\nX1 -> T\nX2 -> T\nX1 -> Y\nX2 -> Y\nT -> Y",
        Some("T"),
        Some("Y"),
    )
    .unwrap();
    let mut m = BTreeMap::new();
    for x in ["X1", "X2"] {
        m.insert(x.to_string(), Mechanism::Linear { intercept: 0.0, coeffs: vec![], noise: 1.0 });
    }
    m.insert(
        "T".to_string(),
        Mechanism::BernoulliLogistic { intercept: 0.0, coeffs: vec![0.7, 0.7] },
    );
    m.insert(
        "Y".to_string(),
        // parents in node order: X1, X2, T; tau(x1) = 1 + 0.8 * x1
        Mechanism::LinearInteraction {
            intercept: 0.0,
            coeffs: vec![1.0, 1.0, 1.0],
            pair: (2, 0, 0.8),
            noise: 0.5,
        },
    );
    ScmSpec::new(dag, m).unwrap()
}

/// The bundled 9-node malnutrition DAG with plausible linear mechanisms;
/// generates the synthetic district-level study fixture.
pub fn somalia_shaped() -> ScmSpec {
    let dag = parse_dag(somalia_dag_text(), None, None).unwrap();
    let mut m = BTreeMap::new();
    m.insert("ENSO".to_string(), Mechanism::Linear { intercept: 0.0, coeffs: vec![], noise: 1.0 });
    m.insert(
        "SPI".to_string(),
        Mechanism::Linear { intercept: 0.0, coeffs: vec![-0.6], noise: 0.8 },
    );
    m.insert(
        "Fatalities".to_string(),
        Mechanism::Linear { intercept: 2.0, coeffs: vec![], noise: 1.0 },
    );
    m.insert(
        "Population".to_string(),
        Mechanism::Linear { intercept: 0.0, coeffs: vec![], noise: 1.0 },
    );
    // parents in node order as declared in the .dag file
    m.insert(
        "SorghumProduction".to_string(),
        Mechanism::Linear { intercept: 1.0, coeffs: vec![0.8], noise: 0.5 }, // SPI
    );
    m.insert(
        "Displacement".to_string(),
        // SPI, Fatalities
        Mechanism::Linear { intercept: 1.0, coeffs: vec![-0.7, 0.5], noise: 0.5 },
    );
    m.insert(
        "MarketPrices".to_string(),
        // SPI, Fatalities
        Mechanism::Linear { intercept: 3.0, coeffs: vec![-0.5, 0.4], noise: 0.5 },
    );
    m.insert(
        "Cash".to_string(),
        // Fatalities, SorghumProduction, Displacement, MarketPrices, Population
        Mechanism::Linear {
            intercept: 0.0,
            coeffs: vec![0.3, -0.2, 0.5, 0.3, 0.2],
            noise: 0.8,
        },
    );
    m.insert(
        "GAM".to_string(),
        // Fatalities, SorghumProduction, Displacement, MarketPrices, Population, Cash
        Mechanism::SigmoidScaled {
            intercept: -2.0,
            coeffs: vec![0.25, -0.3, 0.35, 0.3, 0.0, -0.2],
            noise: 0.3,
            scale: 0.4,
        },
    );
    ScmSpec::new(dag, m).unwrap()
}

/// Generate the bundled district-level monthly study fixture: 57
/// districts x 7 years (2016-2022) x 12 months, one row per
/// (district, month), with the columns of the bundled DAG plus the
/// district/date keys.
///
/// Twenty-one (district, year) pairs — never Baidoa — carry a missing
/// outcome for the whole year, so annual aggregation followed by
/// listwise deletion leaves 399 - 21 = 378 complete district-years.
pub fn somalia_fixture(seed_value: u64) -> Table {
    let districts: Vec<String> = std::iter::once("Baidoa".to_string())
        .chain((1..=56).map(|i| format!("District{i:02}")))
        .collect();
    let years = 2016..=2022;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rng = seed::rng(seed_value, "somalia-fixture");
    let eps = move |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
        normal.inverse_cdf(rng.gen_range(f64::EPSILON..1.0))
    };

    // static district populations
    let pop: Vec<f64> =
        (0..districts.len()).map(|_| (30_000.0 + rng.gen_range(0.0_f64..470_000.0)).round()).collect();
    // one global climate index value per calendar month
    let enso: BTreeMap<(i32, u32), f64> = years
        .clone()
        .flat_map(|y| (1..=12).map(move |m| (y, m)))
        .map(|key| {
            let v = eps(&mut rng);
            (key, v)
        })
        .collect();
    // outcome-missing mask: 21 non-Baidoa district-years
    let masked: BTreeSet<(usize, i32)> =
        (1..=21).map(|d| (d, 2016 + ((d as i32 * 3) % 7))).collect();

    let sigmoid = |z: f64| 1.0 / (1.0 + (-z).exp());
    let relu = |z: f64| z.max(0.0);
    let columns = vec![
        ("district".to_string(), ColumnKind::Categorical),
        ("date".to_string(), ColumnKind::Date),
        ("ENSO".to_string(), ColumnKind::Numeric),
        ("SPI".to_string(), ColumnKind::Numeric),
        ("Fatalities".to_string(), ColumnKind::Numeric),
        ("SorghumProduction".to_string(), ColumnKind::Numeric),
        ("Displacement".to_string(), ColumnKind::Numeric),
        ("MarketPrices".to_string(), ColumnKind::Numeric),
        ("Population".to_string(), ColumnKind::Numeric),
        ("Cash".to_string(), ColumnKind::Numeric),
        ("GAM".to_string(), ColumnKind::Numeric),
    ];
    let mut rows = Vec::new();
    for (di, district) in districts.iter().enumerate() {
        for year in years.clone() {
            for month in 1..=12u32 {
                let e = enso[&(year, month)];
                let spi = -0.6 * e + 0.8 * eps(&mut rng);
                let fat = (30.0 * (0.5 * eps(&mut rng)).exp() * (1.0 + 0.4 * relu(-spi))).round();
                let sorghum = (pop[di] * relu(0.05 + 0.02 * spi + 0.01 * eps(&mut rng))).round();
                let disp_frac =
                    sigmoid(-3.0 + 0.8 * relu(-spi) + 0.004 * fat + 0.3 * eps(&mut rng));
                let displacement = (pop[di] * disp_frac).round();
                let market =
                    (1.2 - 0.25 * spi + 0.002 * fat + 0.15 * eps(&mut rng)).exp();
                let cash_frac = sigmoid(
                    -2.5 + 0.004 * fat + 0.2 * (market - 3.0) + 2.0 * disp_frac
                        + 0.4 * eps(&mut rng),
                );
                let cash = (pop[di] * cash_frac).round();
                let gam = 0.5
                    * sigmoid(
                        -2.2 + 0.5 * relu(-spi) + 0.003 * fat + 0.15 * (market - 3.0)
                            + 2.0 * disp_frac
                            - 3.0 * cash_frac
                            + 0.2 * eps(&mut rng),
                    );
                let gam_cell = if masked.contains(&(di, year)) {
                    Cell::Missing
                } else {
                    Cell::Num(gam)
                };
                rows.push(vec![
                    Cell::Text(district.clone()),
                    Cell::Date(crate::tabular::Date { year, month: Some(month), day: None }),
                    Cell::Num(e),
                    Cell::Num(spi),
                    Cell::Num(fat),
                    Cell::Num(sorghum),
                    Cell::Num(displacement),
                    Cell::Num(market),
                    Cell::Num(pop[di]),
                    Cell::Num(cash),
                    gam_cell,
                ]);
            }
        }
    }
    Table::new(columns, rows)
}

/// Sample a benchmark SCM into an analysis-ready frame: the treatment
/// node must be binary, covariates are the parent adjustment set.
pub fn benchmark_frame(spec: &ScmSpec, n: usize, seed_value: u64) -> crate::tabular::StudyFrame {
    let table = spec.sample(n, seed_value);
    let pull = |name: &str| -> Vec<f64> {
        table.numeric_column(name).unwrap().into_iter().map(Option::unwrap).collect()
    };
    let t: Vec<bool> = pull(spec.dag().treatment()).into_iter().map(|v| v == 1.0).collect();
    let y = pull(spec.dag().outcome());
    let z_names: Vec<String> = spec.dag().parent_adjustment_set().members.into_iter().collect();
    let cols: Vec<Vec<f64>> = z_names.iter().map(|z| pull(z)).collect();
    let covariates: Vec<Vec<f64>> =
        (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    crate::tabular::StudyFrame::from_parts(t, y, covariates, z_names).unwrap()
}

/// Generate a random DAG over `n` nodes named N0..N{n-1}, with each
/// forward pair independently edged with probability `p`. Test helper.
pub fn random_dag(n: usize, p: f64, seed_value: u64) -> CausalDag {
    assert!(n >= 2);
    let names: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    let mut rng = seed::rng(seed_value, "random-dag");
    // random topological permutation, then forward edges only
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_range(0.0..1.0) < p {
                edges.push((names[perm[i]].clone(), names[perm[j]].clone()));
            }
        }
    }
    CausalDag::new(&names, &edges, &names[0], &names[1]).unwrap()
}
