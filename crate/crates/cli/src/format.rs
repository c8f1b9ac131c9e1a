//! JSON game files.
//!
//! ```json
//! {
//!   "name": "pennies-triangle",
//!   "agents": ["a", "b", "c"],
//!   "edges": [{"u": "a", "v": "b", "game": "mp"}, ...],
//!   "games": {
//!     "mp": {"root": "r", "nodes": [
//!       {"id": "r", "owner": "player1", "infoset": "coin",
//!        "actions": [{"name": "heads", "child": "h"}, {"name": "tails", "child": "t"}]},
//!       ...
//!       {"id": "hh", "owner": "terminal", "payoffs": [1, -1]}
//!     ]},
//!     "k": {"template": "kuhn"}
//!   },
//!   "expect": {"zero_sum": true, "consistent": true}
//! }
//! ```
//!
//! The first agent of an edge plays seat one. Chance nodes carry `chance_probs` keyed by
//! action name.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use nzefg_core::efg::Action;
use nzefg_core::library::template;
use nzefg_core::network::Metadata;
use nzefg_core::{Edge, GameTree, NetworkDescription, Node, Owner, Seat};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub agents: Vec<String>,
    pub edges: Vec<EdgeRecord>,
    pub games: BTreeMap<String, GameRecord>,
    #[serde(default)]
    pub expect: Expectations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub u: String,
    pub v: String,
    pub game: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameRecord {
    Template {
        template: String,
    },
    Tree {
        root: String,
        nodes: Vec<NodeRecord>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: String,
    pub owner: OwnerName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infoset: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<ActionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chance_probs: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OwnerName {
    Player1,
    Player2,
    Chance,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRecord {
    pub name: String,
    pub child: String,
}

/// Properties the file claims; `verify` fails when a claimed property does not hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    #[serde(default = "yes")]
    pub zero_sum: bool,
    #[serde(default = "yes")]
    pub consistent: bool,
}

fn yes() -> bool {
    true
}

impl Default for Expectations {
    fn default() -> Self {
        Self {
            zero_sum: true,
            consistent: true,
        }
    }
}

/// A description plus the file-level node ids of every edge game, for reporting.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub description: NetworkDescription,
    /// `node_ids[edge][node index]`
    pub node_ids: Vec<Arc<Vec<String>>>,
    /// Game id of every edge.
    pub game_ids: Vec<String>,
}

impl Loaded {
    /// Wraps an in-memory description; node ids are the node indices.
    pub fn from_description(description: NetworkDescription) -> Self {
        let node_ids = description
            .edges
            .iter()
            .map(|e| Arc::new((0..e.game.len()).map(|i| i.to_string()).collect()))
            .collect();
        let game_ids = (0..description.edges.len())
            .map(|k| format!("edge{k}"))
            .collect();
        Self {
            description,
            node_ids,
            game_ids,
        }
    }
}

pub fn read_game_file(path: &Path) -> Result<Loaded> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: GameFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing game file {}", path.display()))?;
    file.load()
        .with_context(|| format!("in game file {}", path.display()))
}

impl GameFile {
    pub fn load(&self) -> Result<Loaded> {
        let mut agent_index = HashMap::new();
        for (i, a) in self.agents.iter().enumerate() {
            if agent_index.insert(a.as_str(), i).is_some() {
                bail!("agent `{a}` is listed twice");
            }
        }
        let mut trees: HashMap<&str, (Arc<GameTree>, Arc<Vec<String>>)> = HashMap::new();
        for (id, rec) in &self.games {
            let (tree, ids) = rec.to_tree().with_context(|| format!("game `{id}`"))?;
            trees.insert(id.as_str(), (Arc::new(tree), Arc::new(ids)));
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut node_ids = Vec::with_capacity(self.edges.len());
        let mut game_ids = Vec::with_capacity(self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            let endpoint = |name: &str| {
                agent_index
                    .get(name)
                    .copied()
                    .ok_or_else(|| anyhow!("edge {k} names unknown agent `{name}`"))
            };
            let (u, v) = (endpoint(&e.u)?, endpoint(&e.v)?);
            let (game, ids) = trees
                .get(e.game.as_str())
                .ok_or_else(|| anyhow!("edge {k} references undefined game `{}`", e.game))?;
            edges.push(Edge {
                u,
                v,
                game: game.clone(),
            });
            node_ids.push(ids.clone());
            game_ids.push(e.game.clone());
        }
        Ok(Loaded {
            description: NetworkDescription {
                agents: self.agents.clone(),
                edges,
                metadata: Metadata {
                    name: self.name.clone().unwrap_or_default(),
                    zero_sum: self.expect.zero_sum,
                    consistent: self.expect.consistent,
                },
            },
            node_ids,
            game_ids,
        })
    }

    /// Writes a description as a file, sharing one game record between edges that
    /// share a tree.
    pub fn from_description(desc: &NetworkDescription) -> Self {
        let mut games = BTreeMap::new();
        let mut seen: Vec<(Arc<GameTree>, String)> = Vec::new();
        let mut edges = Vec::with_capacity(desc.edges.len());
        for (k, e) in desc.edges.iter().enumerate() {
            let id = match seen.iter().find(|(g, _)| Arc::ptr_eq(g, &e.game)) {
                Some((_, id)) => id.clone(),
                None => {
                    let id = format!("g{k}");
                    games.insert(id.clone(), GameRecord::from_tree(&e.game));
                    seen.push((e.game.clone(), id.clone()));
                    id
                }
            };
            edges.push(EdgeRecord {
                u: desc.agents[e.u].clone(),
                v: desc.agents[e.v].clone(),
                game: id,
            });
        }
        Self {
            name: (!desc.metadata.name.is_empty()).then(|| desc.metadata.name.clone()),
            agents: desc.agents.clone(),
            edges,
            games,
            expect: Expectations {
                zero_sum: desc.metadata.zero_sum,
                consistent: desc.metadata.consistent,
            },
        }
    }
}

impl GameRecord {
    /// The tree and the file id of every node, in node-index order.
    pub fn to_tree(&self) -> Result<(GameTree, Vec<String>)> {
        match self {
            GameRecord::Template { template: name } => {
                let tree = template(name).ok_or_else(|| {
                    anyhow!("unknown template `{name}` (expected kuhn or matching-pennies)")
                })?;
                let ids = (0..tree.len()).map(|i| i.to_string()).collect();
                Ok((tree, ids))
            }
            GameRecord::Tree { root, nodes } => {
                let mut index = HashMap::new();
                for (i, n) in nodes.iter().enumerate() {
                    if index.insert(n.id.as_str(), i).is_some() {
                        bail!("node id `{}` is used twice", n.id);
                    }
                }
                let lookup = |id: &str| {
                    index
                        .get(id)
                        .copied()
                        .ok_or_else(|| anyhow!("unknown node `{id}`"))
                };
                let mut out = Vec::with_capacity(nodes.len());
                for n in nodes {
                    out.push(
                        n.to_node(&lookup)
                            .with_context(|| format!("node `{}`", n.id))?,
                    );
                }
                let root = lookup(root).context("root")?;
                Ok((
                    GameTree::new(out, root),
                    nodes.iter().map(|n| n.id.clone()).collect(),
                ))
            }
        }
    }

    pub fn from_tree(tree: &GameTree) -> Self {
        let id = |i: usize| format!("n{i}");
        let nodes = tree
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| NodeRecord {
                id: id(i),
                owner: match n.owner {
                    Owner::Player(Seat::One) => OwnerName::Player1,
                    Owner::Player(Seat::Two) => OwnerName::Player2,
                    Owner::Chance => OwnerName::Chance,
                    Owner::Terminal => OwnerName::Terminal,
                },
                infoset: n.infoset.clone(),
                actions: n
                    .actions
                    .iter()
                    .map(|a| ActionRecord {
                        name: a.name.clone(),
                        child: id(a.child),
                    })
                    .collect(),
                chance_probs: n.chance_probs.as_ref().map(|p| {
                    n.actions
                        .iter()
                        .zip(p)
                        .map(|(a, &v)| (a.name.clone(), v))
                        .collect()
                }),
                payoffs: n.payoffs,
            })
            .collect();
        GameRecord::Tree {
            root: id(tree.root()),
            nodes,
        }
    }
}

impl NodeRecord {
    fn to_node(&self, lookup: &dyn Fn(&str) -> Result<usize>) -> Result<Node> {
        let actions = self
            .actions
            .iter()
            .map(|a| {
                Ok(Action {
                    name: a.name.clone(),
                    child: lookup(&a.child)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let chance_probs = match &self.chance_probs {
            None => None,
            Some(map) => {
                if map.len() != actions.len() {
                    bail!(
                        "chance_probs has {} entries for {} actions",
                        map.len(),
                        actions.len()
                    );
                }
                Some(
                    actions
                        .iter()
                        .map(|a| {
                            map.get(&a.name).copied().ok_or_else(|| {
                                anyhow!("no chance probability for action `{}`", a.name)
                            })
                        })
                        .collect::<Result<Vec<f64>>>()?,
                )
            }
        };
        // placement of infosets, probabilities and payoffs is left to the validator
        Ok(Node {
            owner: match self.owner {
                OwnerName::Player1 => Owner::Player(Seat::One),
                OwnerName::Player2 => Owner::Player(Seat::Two),
                OwnerName::Chance => Owner::Chance,
                OwnerName::Terminal => Owner::Terminal,
            },
            infoset: self.infoset.clone(),
            actions,
            chance_probs,
            payoffs: self.payoffs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nzefg_core::{kuhn_poker, network_of, Topology};

    #[test]
    fn round_trip_through_json() {
        let desc = network_of(&Topology::Ring, 3, kuhn_poker()).unwrap();
        let file = GameFile::from_description(&desc);
        assert_eq!(file.games.len(), 1);
        let text = serde_json::to_string_pretty(&file).unwrap();
        let back: GameFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        let loaded = back.load().unwrap().description;
        assert_eq!(loaded.agents, desc.agents);
        for (a, b) in loaded.edges.iter().zip(&desc.edges) {
            assert_eq!((a.u, a.v), (b.u, b.v));
            assert_eq!(*a.game, *b.game);
        }
    }

    #[test]
    fn templates_and_expectations() {
        let text = r#"{"agents": ["x", "y"], "edges": [{"u": "x", "v": "y", "game": "k"}],
                       "games": {"k": {"template": "kuhn"}}, "expect": {"zero_sum": false}}"#;
        let file: GameFile = serde_json::from_str(text).unwrap();
        let loaded = file.load().unwrap();
        assert!(!loaded.description.metadata.zero_sum && loaded.description.metadata.consistent);
        assert_eq!(loaded.description.edges[0].game.len(), kuhn_poker().len());
    }

    #[test]
    fn reference_errors() {
        let bad_agent = r#"{"agents": ["x", "y"], "edges": [{"u": "x", "v": "z", "game": "k"}],
                            "games": {"k": {"template": "kuhn"}}}"#;
        let err = serde_json::from_str::<GameFile>(bad_agent)
            .unwrap()
            .load()
            .unwrap_err();
        assert!(format!("{err:#}").contains("unknown agent `z`"));
        let bad_child = r#"{"agents": ["x", "y"], "edges": [{"u": "x", "v": "y", "game": "g"}],
            "games": {"g": {"root": "r", "nodes": [
              {"id": "r", "owner": "player1", "infoset": "i", "actions": [{"name": "a", "child": "nope"}]}]}}}"#;
        let err = serde_json::from_str::<GameFile>(bad_child)
            .unwrap()
            .load()
            .unwrap_err();
        assert!(format!("{err:#}").contains("unknown node `nope`"));
        let unknown_field = r#"{"agents": [], "edges": [], "games": {}, "extra": 1}"#;
        assert!(serde_json::from_str::<GameFile>(unknown_field).is_err());
    }
}
