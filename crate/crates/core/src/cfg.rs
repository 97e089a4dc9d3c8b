//! Control-flow graph helpers: dominators, reachability, natural loops.

use crate::ir::{Block, Function};
use petgraph::algo::dominators::{simple_fast, Dominators};
use petgraph::graph::{DiGraph, NodeIndex};
use std::collections::{HashMap, HashSet};

pub struct Cfg {
    /// Block label -> index into `Function::blocks`.
    pub index: HashMap<String, usize>,
    pub preds: Vec<Vec<usize>>,
    pub succs: Vec<Vec<usize>>,
    doms: Dominators<NodeIndex>,
    nodes: Vec<NodeIndex>,
    reachable: Vec<bool>,
}

impl Cfg {
    pub fn new(f: &Function) -> Cfg {
        let mut index = HashMap::new();
        for (i, b) in f.blocks.iter().enumerate() {
            index.insert(b.label.clone(), i);
        }
        let n = f.blocks.len();
        let mut graph: DiGraph<usize, ()> = DiGraph::new();
        let nodes: Vec<NodeIndex> = (0..n).map(|i| graph.add_node(i)).collect();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for (i, b) in f.blocks.iter().enumerate() {
            for s in b.successors() {
                if let Some(&j) = index.get(s) {
                    graph.add_edge(nodes[i], nodes[j], ());
                    succs[i].push(j);
                    preds[j].push(i);
                }
            }
        }
        let doms = simple_fast(&graph, nodes[0]);
        let mut reachable = vec![false; n];
        for i in 0..n {
            if i == 0 || doms.immediate_dominator(nodes[i]).is_some() {
                reachable[i] = true;
            }
        }
        Cfg {
            index,
            preds,
            succs,
            doms,
            nodes,
            reachable,
        }
    }

    pub fn is_reachable(&self, block: usize) -> bool {
        self.reachable[block]
    }

    /// Whether block `a` dominates block `b`. Only defined for reachable
    /// blocks; unreachable blocks dominate nothing and are dominated by all.
    pub fn dominates(&self, a: usize, b: usize) -> bool {
        if !self.reachable[b] {
            return true;
        }
        if !self.reachable[a] {
            return false;
        }
        let mut cur = self.nodes[b];
        let target = self.nodes[a];
        loop {
            if cur == target {
                return true;
            }
            match self.doms.immediate_dominator(cur) {
                Some(d) => cur = d,
                None => return false,
            }
        }
    }

    /// Whether the program point (block, inst index) `a` dominates point `b`.
    pub fn point_dominates(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        if a.0 == b.0 {
            a.1 < b.1
        } else {
            self.dominates(a.0, b.0) && !self.dominates(b.0, a.0)
        }
    }

    /// Natural loops, one per back edge, as (header, body set including header).
    pub fn natural_loops(&self) -> Vec<(usize, HashSet<usize>)> {
        let mut loops: Vec<(usize, HashSet<usize>)> = Vec::new();
        for (from, succs) in self.succs.iter().enumerate() {
            if !self.reachable[from] {
                continue;
            }
            for &to in succs {
                if self.dominates(to, from) {
                    // Back edge from -> to; walk predecessors up to the header.
                    let mut body: HashSet<usize> = HashSet::new();
                    body.insert(to);
                    let mut stack = vec![from];
                    while let Some(b) = stack.pop() {
                        if body.insert(b) {
                            for &p in &self.preds[b] {
                                stack.push(p);
                            }
                        }
                    }
                    if let Some(existing) = loops.iter_mut().find(|(h, _)| *h == to) {
                        existing.1.extend(body);
                    } else {
                        loops.push((to, body));
                    }
                }
            }
        }
        loops
    }
}

/// Remove blocks unreachable from the entry, and prune phi inputs that
/// reference removed predecessors.
pub fn prune_unreachable(f: &mut Function) {
    let cfg = Cfg::new(f);
    let keep: Vec<bool> = (0..f.blocks.len()).map(|i| cfg.is_reachable(i)).collect();
    if keep.iter().all(|&k| k) {
        return;
    }
    let removed: HashSet<String> = f
        .blocks
        .iter()
        .enumerate()
        .filter(|(i, _)| !keep[*i])
        .map(|(_, b)| b.label.clone())
        .collect();
    let blocks: Vec<Block> = f
        .blocks
        .drain(..)
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(_, b)| b)
        .collect();
    f.blocks = blocks;
    for b in &mut f.blocks {
        for inst in &mut b.insts {
            if inst.opcode == crate::ir::Opcode::Phi {
                let mut ops = Vec::new();
                for pair in inst.operands.chunks(2) {
                    let label = pair[1].as_label().unwrap_or_default();
                    if !removed.contains(label) {
                        ops.push(pair[0].clone());
                        ops.push(pair[1].clone());
                    }
                }
                inst.operands = ops;
            }
        }
    }
}
