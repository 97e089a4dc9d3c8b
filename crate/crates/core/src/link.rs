//! Module linking: merge translation units, resolving declarations against
//! definitions.
//!
//! Functions: the first definition wins for linkonce symbols; two ordinary
//! definitions of the same symbol are an error. Vtables keep the strongest
//! linkage seen (definition > optimization-only > declaration), which is how
//! an optimization-only vtable in one unit is backed by the key-function
//! unit's definition at link time.

use crate::ir::{Linkage, Module};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinkError {
    #[error("duplicate definition of '@{0}'")]
    DuplicateDefinition(String),
}

fn rank(l: Linkage) -> u8 {
    match l {
        Linkage::Definition => 2,
        Linkage::OptimizationOnly => 1,
        Linkage::Declaration => 0,
    }
}

pub fn link_modules(modules: &[Module]) -> Result<Module, LinkError> {
    let mut out = Module::new(
        modules
            .first()
            .map(|m| m.name.clone())
            .unwrap_or_else(|| "linked".to_string()),
    );
    for m in modules {
        for f in &m.functions {
            match out.functions.iter().position(|g| g.name == f.name) {
                Some(i) => {
                    if out.functions[i].linkonce && f.linkonce {
                        continue; // keep the first copy
                    }
                    if !f.linkonce && out.functions[i].linkonce {
                        out.functions[i] = f.clone();
                        continue;
                    }
                    if f.linkonce {
                        continue;
                    }
                    return Err(LinkError::DuplicateDefinition(f.name.clone()));
                }
                None => out.functions.push(f.clone()),
            }
        }
        for vt in &m.vtables {
            match out.vtables.iter().position(|v| v.name == vt.name) {
                Some(i) => {
                    if rank(vt.linkage) > rank(out.vtables[i].linkage) {
                        out.vtables[i] = vt.clone();
                    }
                }
                None => out.vtables.push(vt.clone()),
            }
        }
        for d in &m.declarations {
            if out.declarations.iter().all(|x| x.name != d.name) {
                out.declarations.push(d.clone());
            }
        }
    }
    // Declarations satisfied by a definition drop out.
    let defined: Vec<String> = out.functions.iter().map(|f| f.name.clone()).collect();
    out.declarations.retain(|d| !defined.contains(&d.name));
    Ok(out)
}
