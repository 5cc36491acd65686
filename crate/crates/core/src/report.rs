use serde::Serialize;

use crate::geometry::Menu;
use crate::verify::Certificate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Ia,
    Contract,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    /// Acquisition is free; the zero menu is returned.
    Trivial,
    /// An elicitability or informativeness test landed close to its threshold.
    ToleranceMarginal,
    /// The menu elicits the target strictly.
    Strict,
}

/// A solved menu with its objective and certificate.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub regime: Regime,
    pub menu: Menu,
    pub objective: f64,
    /// Labels of constraints holding with equality (within the certificate tolerance).
    pub binding: Vec<String>,
    pub certificate: Certificate,
    pub flags: Vec<Flag>,
}

impl SolveReport {
    pub fn new(regime: Regime, menu: Menu, objective: f64, certificate: Certificate) -> Self {
        let binding = certificate.binding();
        Self { regime, menu, objective, binding, certificate, flags: Vec::new() }
    }

    pub fn with_flag(mut self, flag: Flag) -> Self {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
        self
    }

    pub fn certified(&self) -> bool {
        self.certificate.passed()
    }
}
