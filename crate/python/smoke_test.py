#!/usr/bin/env python3
"""Smoke test for the invar_opt extension module.

Builds the cdylib if needed, loads it, and exercises the main entry
points end to end.
"""

import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent

G_SOURCE = """\
class A { virtual fn virt_meth() -> int; }
fn A::virt_meth() -> int { return 1; }
class B : A { virtual fn virt_meth() -> int; }
fn B::virt_meth() -> int { return 2; }
fn main() {
  var a = new A;
  print(a.virt_meth());
  var b = new(a) B;
  if (a == b) {
    print(b.virt_meth());
  }
}
"""


def load_module():
    lib = ROOT / "target" / "debug" / "libinvar_opt.so"
    if not lib.exists():
        subprocess.run(["cargo", "build", "-p", "invar-python"], cwd=ROOT, check=True)
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "invar_opt.so")
    sys.path.insert(0, str(tmp))
    import invar_opt

    return invar_opt


def main():
    invar_opt = load_module()

    ir = invar_opt.compile_source(G_SOURCE)
    assert "!invariant.group" in ir and "strip" in ir
    assert invar_opt.verify_ir(ir) == []

    lax = invar_opt.compile_source(G_SOURCE, strict=False)
    assert "!invariant" not in lax

    opt_ir, report = invar_opt.optimize_ir(ir)
    assert "!invariant" not in opt_ir, "lowering must erase metadata"
    assert report["devirtualized_calls"] >= 1, report

    trace = invar_opt.run_ir(ir)
    assert trace == "print 1\nprint 2\n", trace
    assert invar_opt.run_ir(opt_ir, mode="raw") == trace

    assert invar_opt.diff_source(G_SOURCE) == "equal"

    vts = invar_opt.emit_vtables(G_SOURCE)
    assert [(v[1], v[2]) for v in vts] == [("A", "definition"), ("B", "definition")]

    user = "class C {\n  extern ctor;\n  virtual fn m() -> int;\n}\nfn C::m() -> int { return 7; }\nfn main() { var c = new C; print(c.m()); }\n"
    impl = "class C {\n  ctor;\n  virtual extern fn m() -> int;\n}\nfn C::ctor() { }\n"
    assert invar_opt.diff_source(user, support=[impl]) == "equal"
    linked = invar_opt.link_ir(
        [invar_opt.compile_source(user), invar_opt.compile_source(impl)]
    )
    assert invar_opt.run_ir(linked) == "print 7\n"

    programs = invar_opt.fuzz_programs(seed=3, count=5)
    assert len(programs) == 5
    assert programs == invar_opt.fuzz_programs(seed=3, count=5)
    for src in programs:
        assert invar_opt.diff_source(src) in ("equal", "skipped-ub")

    print("smoke test ok")


if __name__ == "__main__":
    main()
