//! Class hierarchy analysis: layout, vtable slot assignment, override
//! resolution, key functions, and opportunistic vtable emission.

use super::ast::*;
use crate::diag::SourceError;
use crate::ir::{Linkage, VTable, SLOT_SIZE};
use indexmap::IndexMap;

#[derive(Debug, Clone)]
pub struct SlotInfo {
    /// Method name for this vtable slot.
    pub method: String,
    /// The class whose implementation fills the slot after override
    /// resolution.
    pub impl_class: String,
}

#[derive(Debug, Clone)]
pub struct ClassInfo {
    pub name: String,
    pub base: Option<String>,
    /// Has a virtual method, own or inherited.
    pub dynamic: bool,
    pub size: i64,
    /// Field name -> byte offset, inherited fields included.
    pub field_offsets: IndexMap<String, i64>,
    pub vtable_slots: Vec<SlotInfo>,
    /// Name of the key function (first non-inline virtual method), if any.
    pub key_function: Option<String>,
    /// Whether the key function is defined in this compilation input.
    pub has_key_function: bool,
}

impl ClassInfo {
    pub fn vtable_symbol(&self) -> String {
        format!("{}::vtable", self.name)
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedMethod {
    /// Class whose declaration binds the call (nearest in the chain).
    pub decl_class: String,
    pub is_virtual: bool,
    /// Slot index when virtual.
    pub slot: Option<usize>,
    pub arity: usize,
    pub ret: Option<TypeRef>,
}

pub struct ClassTable {
    pub classes: IndexMap<String, ClassInfo>,
    pub unions: IndexMap<String, UnionInfo>,
}

#[derive(Debug, Clone)]
pub struct UnionInfo {
    pub name: String,
    pub alternatives: Vec<String>,
    pub size: i64,
}

fn find_class<'a>(p: &'a SourceProgram, name: &str) -> Option<&'a ClassDecl> {
    p.classes.iter().find(|c| c.name == name)
}

fn find_method<'a>(c: &'a ClassDecl, name: &str) -> Option<&'a MethodDecl> {
    c.methods.iter().find(|m| m.name == name)
}

impl ClassTable {
    pub fn build(p: &SourceProgram) -> Result<ClassTable, SourceError> {
        let mut table = ClassTable {
            classes: IndexMap::new(),
            unions: IndexMap::new(),
        };
        for c in &p.classes {
            if table.classes.contains_key(&c.name) {
                return Err(SourceError::new(c.line, c.col, format!("duplicate class '{}'", c.name)));
            }
            let info = build_class(p, c)?;
            table.classes.insert(c.name.clone(), info);
        }
        for u in &p.unions {
            let mut size = 0;
            for alt in &u.alternatives {
                let cls = table.classes.get(alt).ok_or_else(|| {
                    SourceError::new(u.line, u.col, format!("unknown union alternative '{alt}'"))
                })?;
                size = size.max(cls.size);
            }
            if table.unions.contains_key(&u.name) || table.classes.contains_key(&u.name) {
                return Err(SourceError::new(u.line, u.col, format!("duplicate type '{}'", u.name)));
            }
            table.unions.insert(
                u.name.clone(),
                UnionInfo {
                    name: u.name.clone(),
                    alternatives: u.alternatives.clone(),
                    size,
                },
            );
        }
        Ok(table)
    }

    pub fn class(&self, name: &str) -> Option<&ClassInfo> {
        self.classes.get(name)
    }

    /// Resolve a method call on static type `class`, walking up the chain.
    pub fn resolve_method(
        &self,
        p: &SourceProgram,
        class: &str,
        method: &str,
    ) -> Option<ResolvedMethod> {
        let mut cur = Some(class.to_string());
        while let Some(cname) = cur {
            let decl = find_class(p, &cname)?;
            if let Some(m) = find_method(decl, method) {
                let info = self.classes.get(class)?;
                let slot = info
                    .vtable_slots
                    .iter()
                    .position(|s| s.method == method);
                let is_virtual = slot.is_some() && effective_virtual(p, &cname, method);
                return Some(ResolvedMethod {
                    decl_class: cname,
                    is_virtual,
                    slot: if is_virtual { slot } else { None },
                    arity: m.params.len(),
                    ret: m.ret.clone(),
                });
            }
            cur = decl.base.clone();
        }
        None
    }
}

/// A method is virtual if it or any base declaration of the same name is
/// marked virtual (overrides are implicitly virtual).
fn effective_virtual(p: &SourceProgram, class: &str, method: &str) -> bool {
    let mut cur = Some(class.to_string());
    while let Some(cname) = cur {
        let Some(decl) = find_class(p, &cname) else { return false };
        if let Some(m) = find_method(decl, method) {
            if m.is_virtual {
                return true;
            }
        }
        cur = decl.base.clone();
    }
    false
}

fn base_chain<'a>(p: &'a SourceProgram, c: &'a ClassDecl) -> Result<Vec<&'a ClassDecl>, SourceError> {
    // Root-first chain, cycle-checked.
    let mut chain = vec![c];
    let mut cur = c;
    while let Some(base) = &cur.base {
        let b = find_class(p, base).ok_or_else(|| {
            SourceError::new(cur.line, cur.col, format!("unknown base class '{base}'"))
        })?;
        if chain.iter().any(|x| x.name == b.name) {
            return Err(SourceError::new(c.line, c.col, format!("inheritance cycle through '{}'", c.name)));
        }
        chain.push(b);
        cur = b;
    }
    chain.reverse();
    Ok(chain)
}

fn build_class(p: &SourceProgram, c: &ClassDecl) -> Result<ClassInfo, SourceError> {
    let chain = base_chain(p, c)?;

    // Virtual slot assignment: base slots first, overrides in place.
    let mut slots: Vec<SlotInfo> = Vec::new();
    let mut any_virtual = false;
    for cls in &chain {
        for m in &cls.methods {
            let inherited_slot = slots.iter().position(|s| s.method == m.name);
            let base_virtual = chain
                .iter()
                .take_while(|x| x.name != cls.name)
                .any(|x| find_method(x, &m.name).is_some_and(|bm| bm.is_virtual));
            let base_nonvirtual = chain
                .iter()
                .take_while(|x| x.name != cls.name)
                .any(|x| find_method(x, &m.name).is_some_and(|bm| !bm.is_virtual && !base_virtual));
            if base_nonvirtual && !m.is_virtual {
                return Err(SourceError::new(
                    m.line,
                    m.col,
                    format!("override of non-virtual method '{}' in class '{}'", m.name, cls.name),
                ));
            }
            if m.is_virtual || base_virtual {
                any_virtual = true;
                // Check override arity against the introducing declaration.
                if let Some(idx) = inherited_slot {
                    let intro_class = &slots[idx].impl_class;
                    if let Some(intro) = find_class(p, intro_class).and_then(|x| find_method(x, &m.name)) {
                        if intro.params.len() != m.params.len() {
                            return Err(SourceError::new(
                                m.line,
                                m.col,
                                format!(
                                    "override arity mismatch for '{}::{}'",
                                    cls.name, m.name
                                ),
                            ));
                        }
                    }
                    slots[idx] = SlotInfo {
                        method: m.name.clone(),
                        impl_class: cls.name.clone(),
                    };
                } else {
                    slots.push(SlotInfo {
                        method: m.name.clone(),
                        impl_class: cls.name.clone(),
                    });
                }
            }
        }
    }

    // Layout: vptr at offset 0 for dynamic classes, then fields base-first.
    let dynamic = any_virtual;
    let mut field_offsets = IndexMap::new();
    let mut next = if dynamic { SLOT_SIZE } else { 0 };
    for cls in &chain {
        for f in &cls.fields {
            if field_offsets.contains_key(f) {
                return Err(SourceError::new(
                    cls.line,
                    cls.col,
                    format!("duplicate field '{f}' in hierarchy of '{}'", c.name),
                ));
            }
            field_offsets.insert(f.clone(), next);
            next += SLOT_SIZE;
        }
    }
    let size = next.max(SLOT_SIZE);

    // Key function: first non-inline virtual method in this class's own
    // declaration order.
    let key = c
        .methods
        .iter()
        .find(|m| (m.is_virtual || effective_virtual(p, &c.name, &m.name)) && m.placement != Placement::Inline);
    let key_function = key.map(|m| m.name.clone());
    let has_key_function = key.is_some_and(|m| m.defined_here());

    Ok(ClassInfo {
        name: c.name.clone(),
        base: c.base.clone(),
        dynamic,
        size,
        field_offsets,
        vtable_slots: slots,
        key_function,
        has_key_function,
    })
}

/// Whether the body of `class::method` is present in this compilation input.
pub fn method_body_available(p: &SourceProgram, class: &str, method: &str) -> bool {
    find_class(p, class)
        .and_then(|c| find_method(c, method))
        .is_some_and(|m| m.defined_here())
}

/// Emit one vtable global per dynamic class, choosing linkage per the
/// key-function and opportunistic-emission rules.
pub fn emit_vtables_for(
    p: &SourceProgram,
    table: &ClassTable,
    force_emit: bool,
) -> Vec<VTable> {
    let mut out = Vec::new();
    for info in table.classes.values() {
        if !info.dynamic {
            continue;
        }
        let all_available = info
            .vtable_slots
            .iter()
            .all(|s| method_body_available(p, &s.impl_class, &s.method));
        let linkage = if info.has_key_function {
            Linkage::Definition
        } else if all_available || force_emit {
            Linkage::OptimizationOnly
        } else {
            Linkage::Declaration
        };
        let slots = if linkage == Linkage::Declaration {
            Vec::new()
        } else {
            info.vtable_slots
                .iter()
                .map(|s| format!("{}::{}", s.impl_class, s.method))
                .collect()
        };
        out.push(VTable {
            name: info.vtable_symbol(),
            class_name: info.name.clone(),
            slots,
            linkage,
        });
    }
    out
}
