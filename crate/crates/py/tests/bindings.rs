use std::sync::Once;

use pyo3::prelude::*;
use pyo3::types::PyDict;

use pbmst_py::pbmst_py;

static INIT: Once = Once::new();

fn run(code: &str) {
    INIT.call_once(|| {
        pyo3::append_to_inittab!(pbmst_py);
        Python::initialize();
    });
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals.set_item("pb", py.import("pbmst_py").unwrap()).unwrap();
        let code = std::ffi::CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.display(py);
            panic!("python check failed");
        }
    });
}

#[test]
fn python_surface() {
    run(r#"
g = pb.Group.cyclic(5)
assert g.order == 5 and g.add(3, 4) == 2 and g.neg(2) == 3
h = pb.Group.z3z3()
assert h.add(1, 2) == 0 and h.add(3, 6) == 0

cb = pb.Codebook("a2", 2.26, [-0.15, -0.087])
assert cb.order == 9 and cb.dim == 2 and len(cb.points()) == 9
assert cb.labels()[0] == "o"
idx = cb.quantize([p for pt in cb.points() for p in pt])
assert idx == list(range(9))

lim = pb.limits(3.05, 2, 0.188)
assert abs(lim.constrained_snr_db - 2.7366) < 1e-3
assert lim.opta_snr_db < lim.constrained_snr_db

code = pb.ComponentCode("repetition", 2, pb.Group.cyclic(3), blocks=2)
assert code.k == 2 and code.parity_len == 2
assert code.encode([1, 2]) == [1, 2]
info, parity = code.map_decode([[0.2, 0.5, 0.3]] * 2, [[0.6, 0.3, 0.1]] * 2)
assert all(abs(a - b) < 1e-12 for a, b in zip(info[0], [0.6, 0.3, 0.1]))

for bad in (lambda: pb.Group.cyclic(1), lambda: pb.Codebook("z7x", 1.0), lambda: code.encode([3, 0])):
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError("accepted bad input")
"#);
}

#[test]
fn python_experiment() {
    run(r#"
cfg = """
schema_version = 1
seed = 3
snr_db = [1.0, 9.0]
frames = 2
blocks = 4
memory = 1
window = 2

[codebook]
lattice = "z5"
alpha = 0.83
samples = 10000

[code]
kind = "repetition"
n = 2
blocks = 30
"""
exp = pb.Experiment(cfg)
res = exp.run(1)
assert len(res.points) == 2 and res.points[0].frames == 2
assert res.curve_csv.startswith("snr_db,distortion,sdr_db,ci95,ser,mean_iters,frames\n")
assert "[limits]" in res.report
assert res.points[1].distortion >= res.frame_quantizer_distortion - 1e-9
assert len(exp.trace(9.0, 1)) > 0
"#);
}
