use std::collections::BTreeMap;

use super::{BalanceController, ControlError, FipController, LipController, VhipController};
use crate::qp::QpSettings;

/// Parameters shared by controller factories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    /// Velocity scaling of the DCM–eCMP law, s.
    pub b: f64,
    pub qp: QpSettings,
}

pub type ControllerFactory = fn(&ControllerParams) -> Box<dyn BalanceController>;

/// Controllers by name.
#[derive(Clone)]
pub struct ControllerRegistry {
    factories: BTreeMap<String, ControllerFactory>,
}

impl ControllerRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry holding `lip`, `fip` and `vhip`.
    pub fn with_builtins() -> Self {
        let mut registry = Self::empty();
        registry.register("lip", |_| Box::new(LipController));
        registry.register("fip", |p| Box::new(FipController::new(p.b)));
        registry.register("vhip", |p| Box::new(VhipController::new(p.qp)));
        registry
    }

    /// Registers a factory, replacing any previous one under the same name.
    pub fn register(&mut self, name: &str, factory: ControllerFactory) {
        self.factories.insert(name.to_owned(), factory);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str, params: &ControllerParams) -> Result<Box<dyn BalanceController>, ControlError> {
        match self.factories.get(name) {
            Some(factory) => Ok(factory(params)),
            None => Err(ControlError::UnknownController {
                name: name.to_owned(),
                available: self.names().collect::<Vec<_>>().join(", "),
            }),
        }
    }
}

impl Default for ControllerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
