use std::collections::BTreeMap;

use thiserror::Error;

use crate::frontend::{ChannelRef, Program};
use crate::lattice::{Lattice, Level};
use crate::value::BaseType;

/// Type of a variable or local channel: `σ@ℓ`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct VarType {
    pub ty: BaseType,
    pub level: Level,
}

/// Type of a network channel: its message sort, mode label, value label and
/// the potential `r` of the receiving handler.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ChannelType {
    pub ty: BaseType,
    pub mode: Level,
    pub val: Level,
    pub potential: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("node `{0}` is declared twice")]
    DuplicateNode(String),
    #[error("node `{node}` uses a different security lattice than `{first}`")]
    LatticeMismatch { node: String, first: String },
}

/// The network channel environment, assembled from every program in a
/// system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelEnv {
    pub lattice: Lattice,
    pub channels: BTreeMap<ChannelRef, ChannelType>,
}

impl ChannelEnv {
    pub fn build(programs: &[Program]) -> Result<ChannelEnv, EnvError> {
        let lattice = programs.first().map(|p| p.lattice.clone()).unwrap_or_default();
        let mut channels = BTreeMap::new();
        let mut nodes: Vec<&str> = Vec::new();
        for p in programs {
            if nodes.contains(&p.node.as_str()) {
                return Err(EnvError::DuplicateNode(p.node.clone()));
            }
            nodes.push(&p.node);
            if p.lattice != lattice {
                return Err(EnvError::LatticeMismatch {
                    node: p.node.clone(),
                    first: programs[0].node.clone(),
                });
            }
            for h in &p.handlers {
                channels.insert(
                    p.channel(h),
                    ChannelType {
                        ty: h.param_ty,
                        mode: h.mode,
                        val: h.param_level,
                        potential: h.potential,
                    },
                );
            }
        }
        Ok(ChannelEnv { lattice, channels })
    }

    pub fn get(&self, ch: &ChannelRef) -> Option<&ChannelType> {
        self.channels.get(ch)
    }

    /// Largest potential annotation over all channels.
    pub fn max_potential(&self) -> u64 {
        self.channels.values().map(|c| c.potential).max().unwrap_or(0)
    }
}

/// Γ, Π, Λ and (while checking a handler) Δ.
#[derive(Clone, Debug)]
pub struct TypeEnvs {
    pub lattice: Lattice,
    pub gamma: BTreeMap<String, VarType>,
    pub pi: BTreeMap<String, VarType>,
    pub lambda: ChannelEnv,
    pub delta: Option<(String, VarType)>,
}

impl TypeEnvs {
    /// Environments for `p` with an empty Δ. The program's lattice must be
    /// Λ's lattice.
    pub fn for_program(p: &Program, lambda: &ChannelEnv) -> TypeEnvs {
        TypeEnvs {
            lattice: lambda.lattice.clone(),
            gamma: p
                .globals
                .iter()
                .map(|g| (g.name.clone(), VarType { ty: g.ty, level: g.level }))
                .collect(),
            pi: p
                .locals
                .iter()
                .map(|l| (l.name.clone(), VarType { ty: l.ty, level: l.level }))
                .collect(),
            lambda: lambda.clone(),
            delta: None,
        }
    }

    pub fn with_param(&self, name: &str, ty: VarType) -> TypeEnvs {
        let mut e = self.clone();
        e.delta = Some((name.to_string(), ty));
        e
    }

    /// Variable lookup; Δ shadows Γ.
    pub fn var(&self, name: &str) -> Option<VarType> {
        match &self.delta {
            Some((x, t)) if x == name => Some(*t),
            _ => self.gamma.get(name).copied(),
        }
    }

    pub fn is_param(&self, name: &str) -> bool {
        matches!(&self.delta, Some((x, _)) if x == name)
    }
}
