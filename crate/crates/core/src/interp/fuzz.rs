//! Deterministic MiniOO program generator for differential testing.
//!
//! Programs draw from a fixed class template (two classes with outline
//! virtual methods, so vtables get definition linkage and survive codegen
//! lowering, plus a union) and a statement grammar covering placement new,
//! launder, virtual calls, pointer comparisons, casts, loops, and delete.
//!
//! Even-indexed programs are UB-free by construction: the generator tracks
//! allocation groups and staleness syntactically and only ever touches live,
//! current pointers. Odd-indexed programs may (with some probability) use a
//! stale or freed pointer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRELUDE: &str = "\
class A {
  int f;
  virtual fn virt_meth() -> int;
  virtual fn other_meth() -> int;
}
fn A::virt_meth() -> int { return 1; }
fn A::other_meth() -> int { return 10; }
class B : A {
  virtual fn virt_meth() -> int;
}
fn B::virt_meth() -> int { return 2; }
union U { A; B; }
";

pub fn enumerate_fuzz_programs(seed: u64, count: usize) -> Vec<String> {
    (0..count).map(|i| gen_program(seed, i)).collect()
}

#[derive(Clone)]
struct PtrVar {
    name: String,
    /// Index of the allocation this pointer lives in.
    group: usize,
    /// Stale pointers predate a placement new in their group.
    stale: bool,
}

struct Gen {
    rng: ChaCha8Rng,
    allow_ub: bool,
    lines: Vec<String>,
    indent: usize,
    ptrs: Vec<PtrVar>,
    /// Liveness per allocation group.
    groups: Vec<bool>,
    ints: Vec<String>,
    next: usize,
    /// Statements emitted inside a loop body must not allocate unboundedly;
    /// keep bodies to prints, field ops, and virtual calls.
    in_loop: bool,
}

fn gen_program(seed: u64, idx: usize) -> String {
    let mix = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(idx as u64 + 1);
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(mix),
        allow_ub: idx % 2 == 1,
        lines: Vec::new(),
        indent: 1,
        ptrs: Vec::new(),
        groups: Vec::new(),
        ints: Vec::new(),
        next: 0,
        in_loop: false,
    };
    g.emit_new(); // always at least one object
    let n = g.rng.random_range(4..12);
    for _ in 0..n {
        g.stmt();
    }
    // Always observe something.
    if let Some(p) = g.pick_live() {
        let name = p.name.clone();
        g.line(&format!("print({name}.virt_meth());"));
    }
    let mut out = String::from(PRELUDE);
    out.push_str("fn main() {\n");
    for l in &g.lines {
        out.push_str(l);
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

impl Gen {
    fn fresh(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next)
    }

    fn line(&mut self, s: &str) {
        let pad = "  ".repeat(self.indent);
        self.lines.push(format!("{pad}{s}"));
    }

    fn class(&mut self) -> &'static str {
        if self.rng.random_bool(0.5) {
            "A"
        } else {
            "B"
        }
    }

    /// A live, non-stale pointer, unless UB is allowed and the dice say
    /// otherwise.
    fn pick_live(&mut self) -> Option<PtrVar> {
        if self.allow_ub && !self.ptrs.is_empty() && self.rng.random_bool(0.2) {
            let i = self.rng.random_range(0..self.ptrs.len());
            return Some(self.ptrs[i].clone());
        }
        let ok: Vec<PtrVar> = self
            .ptrs
            .iter()
            .filter(|p| !p.stale && self.groups[p.group])
            .cloned()
            .collect();
        if ok.is_empty() {
            return None;
        }
        let i = self.rng.random_range(0..ok.len());
        Some(ok[i].clone())
    }

    fn int_expr(&mut self) -> String {
        match self.rng.random_range(0..5) {
            0 => self.rng.random_range(0..100i64).to_string(),
            1 if !self.ints.is_empty() => {
                let i = self.rng.random_range(0..self.ints.len());
                self.ints[i].clone()
            }
            2 => match self.pick_live() {
                Some(p) => format!("{}.f", p.name),
                None => "7".into(),
            },
            3 => match self.pick_live() {
                Some(p) => {
                    if self.rng.random_bool(0.5) {
                        format!("{}.virt_meth()", p.name)
                    } else {
                        format!("{}.other_meth()", p.name)
                    }
                }
                None => "3".into(),
            },
            _ => {
                let a = self.rng.random_range(0..50i64);
                let b = self.rng.random_range(1..9i64);
                let op = ["+", "-", "*"][self.rng.random_range(0..3)];
                format!("{a} {op} {b}")
            }
        }
    }

    fn emit_new(&mut self) {
        let cls = self.class();
        let name = self.fresh("p");
        self.line(&format!("var {name} = new {cls};"));
        let group = self.groups.len();
        self.groups.push(true);
        self.ptrs.push(PtrVar {
            name,
            group,
            stale: false,
        });
    }

    fn stmt(&mut self) {
        let choice = self.rng.random_range(0..100);
        match choice {
            0..14 if !self.in_loop => self.emit_new(),
            14..26 => {
                // print something
                let e = self.int_expr();
                self.line(&format!("print({e});"));
            }
            26..36 => {
                // field write
                if let Some(p) = self.pick_live() {
                    let e = self.int_expr();
                    self.line(&format!("{}.f = {e};", p.name));
                }
            }
            36..44 => {
                // int binding
                let e = self.int_expr();
                let name = self.fresh("i");
                self.line(&format!("var {name} = {e};"));
                self.ints.push(name);
            }
            44..52 if !self.in_loop => {
                // placement new: the target pointer goes stale, the result
                // is the fresh current pointer for the group.
                if let Some(p) = self.pick_live() {
                    let cls = self.class();
                    let name = self.fresh("p");
                    self.line(&format!("var {name} = new({}) {cls};", p.name));
                    for q in &mut self.ptrs {
                        if q.group == p.group {
                            q.stale = true;
                        }
                    }
                    self.ptrs.push(PtrVar {
                        name,
                        group: p.group,
                        stale: false,
                    });
                }
            }
            52..58 if !self.in_loop => {
                // launder keeps validity
                if let Some(p) = self.pick_live() {
                    let name = self.fresh("p");
                    self.line(&format!("var {name} = launder({});", p.name));
                    self.ptrs.push(PtrVar {
                        name,
                        group: p.group,
                        stale: p.stale,
                    });
                }
            }
            58..64 if !self.in_loop => {
                // int round trip
                if let Some(p) = self.pick_live() {
                    let h = self.fresh("i");
                    let name = self.fresh("p");
                    self.line(&format!("var {h} = ptr2int({});", p.name));
                    self.line(&format!("var {name} = int2ptr({h}) as A;"));
                    self.ptrs.push(PtrVar {
                        name,
                        group: p.group,
                        stale: p.stale,
                    });
                }
            }
            64..70 if !self.in_loop => {
                // union allocation constructed in place
                let u = self.fresh("p");
                let cls = self.class();
                let name = self.fresh("p");
                self.line(&format!("var {u} = new U;"));
                self.line(&format!("var {name} = new({u}) {cls};"));
                let group = self.groups.len();
                self.groups.push(true);
                self.ptrs.push(PtrVar {
                    name,
                    group,
                    stale: false,
                });
            }
            70..78 => {
                // pointer comparison
                let (a, b) = (self.pick_live(), self.pick_live());
                if let (Some(a), Some(b)) = (a, b) {
                    self.line(&format!("print({} == {});", a.name, b.name));
                }
            }
            78..86 if !self.in_loop => {
                // bounded loop
                let c = self.fresh("i");
                let k = self.rng.random_range(2..5);
                self.line(&format!("var {c} = 0;"));
                self.line(&format!("while ({c} != {k}) {{"));
                self.indent += 1;
                self.in_loop = true;
                let scope = self.ints.len();
                let body = self.rng.random_range(1..3);
                for _ in 0..body {
                    self.stmt();
                }
                self.line(&format!("{c} = {c} + 1;"));
                self.ints.truncate(scope); // body-scoped bindings
                self.in_loop = false;
                self.indent -= 1;
                self.line("}");
            }
            86..93 => {
                // branch
                let a = self.int_expr();
                let b = self.int_expr();
                self.line(&format!("if ({a} == {b}) {{"));
                self.indent += 1;
                let e = self.int_expr();
                self.line(&format!("print({e});"));
                self.indent -= 1;
                self.line("} else {");
                self.indent += 1;
                let e = self.int_expr();
                self.line(&format!("print({e});"));
                self.indent -= 1;
                self.line("}");
            }
            _ if !self.in_loop => {
                // delete an entire group
                if let Some(p) = self.pick_live() {
                    if self.groups[p.group] {
                        self.line(&format!("delete {};", p.name));
                        self.groups[p.group] = false;
                    }
                }
            }
            _ => {
                let e = self.int_expr();
                self.line(&format!("print({e});"));
            }
        }
    }
}
