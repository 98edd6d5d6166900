//! Dynamic stochastic block model with one diminishing community.
//!
//! Nodes start in equal contiguous blocks. During a diminishing event of
//! `diminish_len` steps starting at a seeded time, `swaps_per_step` random
//! members of one seeded community move to other communities each step and
//! stay there. Every timestep then draws each node pair independently with
//! probability `p_in` (same community) or `p_out` (different communities).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, EdgeData, NodeDictionary, StaticGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SbmConfig {
    pub nodes: usize,
    pub communities: usize,
    pub timesteps: usize,
    /// Length of the diminishing event in steps; 0 disables it.
    pub diminish_len: usize,
    pub swaps_per_step: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            nodes: 150,
            communities: 3,
            timesteps: 100,
            diminish_len: 10,
            swaps_per_step: 2,
            p_in: 0.1,
            p_out: 0.01,
            seed: 42,
        }
    }
}

impl SbmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) || self.p_out >= self.p_in {
            return bad(format!(
                "probabilities must satisfy 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            ));
        }
        if self.communities < 2 || self.nodes < self.communities {
            return bad("need at least 2 communities and one node per community".into());
        }
        if self.timesteps == 0 {
            return bad("timesteps must be >= 1".into());
        }
        if self.diminish_len > 20 || self.diminish_len > self.timesteps {
            return bad(format!("diminish_len {} exceeds 20 or the timeline", self.diminish_len));
        }
        let smallest = self.nodes / self.communities;
        if self.diminish_len * self.swaps_per_step >= smallest {
            return bad("diminishing event would empty a community".into());
        }
        Ok(())
    }
}

/// Generates the dynamic graph.
pub fn synth_dynamic_sbm(cfg: &SbmConfig) -> Result<DynamicGraph> {
    Ok(synth_dynamic_sbm_with_memberships(cfg)?.0)
}

/// Generates the dynamic graph together with each timestep's community
/// assignment (`memberships[t][node]`).
pub fn synth_dynamic_sbm_with_memberships(cfg: &SbmConfig) -> Result<(DynamicGraph, Vec<Vec<u32>>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.nodes;
    let mut member: Vec<u32> = (0..n).map(|i| (i * cfg.communities / n) as u32).collect();
    let shrinking = rng.gen_range(0..cfg.communities) as u32;
    let event_start = rng.gen_range(0..=cfg.timesteps - cfg.diminish_len);
    let event = event_start..event_start + cfg.diminish_len;

    let mut dictionary = NodeDictionary::new();
    for i in 0..n {
        dictionary.intern(&format!("n{i:03}"));
    }
    let mut graphs = Vec::with_capacity(cfg.timesteps);
    let mut memberships = Vec::with_capacity(cfg.timesteps);
    for t in 0..cfg.timesteps {
        if event.contains(&t) {
            let pool: Vec<usize> = (0..n).filter(|&v| member[v] == shrinking).collect();
            for &v in pool.choose_multiple(&mut rng, cfg.swaps_per_step) {
                let mut to = rng.gen_range(0..cfg.communities as u32 - 1);
                if to >= shrinking {
                    to += 1;
                }
                member[v] = to;
            }
        }
        let mut g = StaticGraph::new();
        for v in 0..n as u32 {
            g.add_node(v);
        }
        for u in 0..n {
            for v in (u + 1)..n {
                let p = if member[u] == member[v] { cfg.p_in } else { cfg.p_out };
                if rng.gen::<f64>() < p {
                    g.add_edge(u as u32, v as u32, EdgeData::single(Default::default()));
                }
            }
        }
        graphs.push(g);
        memberships.push(member.clone());
    }
    Ok((
        DynamicGraph {
            graphs,
            bucket_width: 3600,
            origin: 0,
            dictionary,
        },
        memberships,
    ))
}
