//! Runtime pc-stack tracking.
//!
//! Shadows the bit-stack with a stack of program-counter labels and checks
//! after every step that both stacks stay well-formed: the pc-stack starts at
//! the handler's mode label and only grows more secret; every layer above
//! the bottom is non-public; a phantom bottom bit needs a non-public bottom
//! pc. Dummy sends on public-mode channels are flagged as well.

use crate::frontend::{ChannelRef, Expr};
use crate::lattice::Level;
use crate::typing::{type_expr, TypeEnvs};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonitorViolation {
    pub step: u64,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct Monitor {
    envs: TypeEnvs,
    handler_pc: Level,
    pcs: Vec<Level>,
    step: u64,
    violations: Vec<MonitorViolation>,
}

impl Monitor {
    /// `envs` must already bind the handler parameter.
    pub fn new(envs: TypeEnvs, handler_pc: Level) -> Monitor {
        Monitor {
            envs,
            handler_pc,
            pcs: vec![handler_pc],
            step: 0,
            violations: Vec::new(),
        }
    }

    pub fn pcs(&self) -> &[Level] {
        &self.pcs
    }

    pub fn violations(&self) -> &[MonitorViolation] {
        &self.violations
    }

    pub fn into_violations(self) -> Vec<MonitorViolation> {
        self.violations
    }

    fn flag(&mut self, detail: String) {
        self.violations.push(MonitorViolation { step: self.step, detail });
    }

    pub(crate) fn on_oblif(&mut self, guard: &Expr) {
        let top = *self.pcs.last().unwrap_or(&self.handler_pc);
        match type_expr(&self.envs, guard) {
            Ok((_, l)) => {
                let pc = self.envs.lattice.lub(top, l);
                self.pcs.push(pc);
                self.pcs.push(pc);
            }
            Err(e) => {
                self.flag(format!("untypable oblif guard: {e}"));
                self.pcs.push(top);
                self.pcs.push(top);
            }
        }
    }

    pub(crate) fn on_pop(&mut self) {
        if self.pcs.pop().is_none() {
            self.flag("pop on an empty pc-stack".into());
        }
    }

    pub(crate) fn on_send(&mut self, ch: &ChannelRef, bit: bool) {
        if bit {
            return;
        }
        match self.envs.lambda.get(ch) {
            Some(t) if self.envs.lattice.is_bottom(t.mode) => {
                self.flag(format!("dummy message on public-mode channel {ch}"))
            }
            None => self.flag(format!("send on unknown channel {ch}")),
            _ => {}
        }
    }

    pub(crate) fn on_phantom_low(&mut self, what: &str) {
        self.flag(format!("{what} reached in phantom mode"));
    }

    /// Checks both stacks against each other; called after every step.
    pub(crate) fn check(&mut self, bits: &[bool]) {
        self.step += 1;
        let lat = &self.envs.lattice;
        let mut problems = Vec::new();
        if self.pcs.first() != Some(&self.handler_pc) {
            problems.push("pc-stack bottom is not the handler label".to_string());
        }
        for w in self.pcs.windows(2) {
            if lat.is_bottom(w[1]) {
                problems.push("public label above the pc-stack bottom".to_string());
            }
            if !lat.leq(w[0], w[1]) {
                problems.push(format!(
                    "pc-stack not monotone: {} below {}",
                    lat.name(w[0]),
                    lat.name(w[1])
                ));
            }
        }
        if bits.len() != self.pcs.len() {
            problems.push(format!(
                "bit-stack depth {} but pc-stack depth {}",
                bits.len(),
                self.pcs.len()
            ));
        } else if let (Some(&b), Some(&pc)) = (bits.first(), self.pcs.first()) {
            if lat.is_bottom(pc) && !b {
                problems.push("phantom bit under a public handler label".to_string());
            }
        }
        for p in problems {
            self.flag(p);
        }
    }
}
