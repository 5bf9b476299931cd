use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module(body: &str) {
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(sagad_py::sagad_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("sg", module).unwrap();
        let code = std::ffi::CString::new(body).unwrap();
        py.run(&code, Some(&globals), None).unwrap_or_else(|e| {
            panic!(
                "{e}\n{}",
                e.traceback(py).map(|t| t.format().unwrap()).unwrap_or_default()
            )
        });
    });
}

#[test]
fn metrics_match_fixtures() {
    with_module(
        r#"
s = [0.9, 0.8, 0.3, 0.1]
y = [True, False, True, False]
assert sg.auroc(s, y) == 0.75
assert abs(sg.average_precision(s, y) - 5 / 6) < 1e-12
assert sg.rec_at_k(s, y, 2) == 0.5
try:
    sg.auroc([0.1, 0.2], [True, True])
except ValueError:
    pass
else:
    raise AssertionError("single-class input must raise")
"#,
    );
}

#[test]
fn dataset_round_trip_and_sampler() {
    let dir = tempfile::tempdir().unwrap();
    with_module(&format!(
        r#"
ds = sg.Dataset.from_edges(4, [(0, 1), (0, 2), (0, 3)], [[1.0], [1.0], [0.9], [-1.0]], [0, 0, 0, 1],
                           splits=[([0, 3], [1], [2])])
ds.save({dir:?})
back = sg.Dataset.load({dir:?})
assert back.edges() == ds.edges() and back.labels() == [0, 0, 0, 1]
assert back.splits() == [([0, 3], [1], [2])]
nodes, rq = sg.max_rq_subgraph(back, 0, search="exhaustive")
assert nodes == [0, 3] and abs(rq - 4.0 / 2.0) < 1e-6
basis = sg.ChebCache.build(back, 3)
assert (basis.order, basis.num_nodes, basis.dim) == (3, 4, 1)
try:
    sg.Dataset.from_edges(2, [(0, 5)], [[0.0], [0.0]], [0, 1])
except ValueError:
    pass
else:
    raise AssertionError("out-of-range edge must raise")
"#,
        dir = dir.path().join("ds").to_str().unwrap()
    ));
}

#[test]
fn unknown_config_key_is_rejected() {
    with_module(
        r#"
try:
    sg.generate_dataset('{"no_such_key": 1}')
except ValueError as e:
    assert "no_such_key" in str(e)
else:
    raise AssertionError("unknown key must raise")
"#,
    );
}
