use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;

/// Runs `code` with the extension importable as `dpsr`.
fn run_python(code: &str) {
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(dpsr::dpsr)(py);
        py.import("sys")
            .unwrap()
            .getattr("modules")
            .unwrap()
            .set_item("dpsr", module)
            .unwrap();
        let globals = PyDict::new(py);
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed: {e}");
        }
    });
}

#[test]
fn tree_and_buffer() {
    run_python(
        r#"
import dpsr
t = dpsr.PrefixSumTree(4)
for i, w in enumerate([1.0, 0.0, 2.0, 1.0]):
    t.set_weight(i, w)
assert t.total == 4.0
assert [t.find_prefix(u) for u in (0.0, 0.999, 1.0, 2.999, 3.0)] == [0, 0, 2, 2, 3]
try:
    t.set_weight(0, -1.0)
    raise AssertionError("negative weight accepted")
except ValueError:
    pass

b = dpsr.ReplayBuffer(4, alpha=1.0, gamma=1.0, seed=3)
assert b.append([0.0], 0, 0.0, [1.0], False, priority=None) == 0
assert b.priorities() == [1.0]
for i, p in enumerate([2.0, 3.0, 4.0]):
    b.append([0.0], 1, 0.0, [1.0], False, birth_step=i + 1, priority=p)
assert b.is_full() and len(b) == 4
assert abs(b.sample_probability(3) - 0.4) < 1e-12
batch = b.sample(64, beta=0.5)
assert len(batch) == 64 and all(0.0 < w <= 1.0 for _, w in batch)
cands = b.replacement_candidates(4)
assert sorted(cands) == [0, 1, 2, 3]
b.update_priority(0, -0.5)
assert abs(b.experience(0)["priority"] - (0.5 + 1e-6)) < 1e-15
assert b.debug_csv().startswith("slot,birth_step,priority,action,reward,terminal\n")
try:
    b.experience(9)
    raise AssertionError("missing slot accepted")
except IndexError:
    pass
"#,
    );
}

#[test]
fn environments_and_snapshots() {
    run_python(
        r#"
import dpsr
assert set(dpsr.ENVIRONMENTS) == {"forked_corridor", "cartpole", "chain"}
env = dpsr.Environment("cartpole", seed=5)
env.reset()
for a in (0, 1, 1):
    env.step(a)
snap = env.snapshot()
twin = snap.spawn()
for a in (1, 0, 0, 1):
    assert env.step(a) == twin.step(a)
assert snap.env_name == "cartpole"

corridor = dpsr.Environment("forked_corridor")
corridor.reset()
obs, reward, done = corridor.step(1)
assert reward == 1.0 and not done
try:
    dpsr.Environment("atari")
    raise AssertionError("unknown env accepted")
except ValueError:
    pass
q = dpsr.chain_q_star(2, 0.9)
assert abs(q[0][1] - 0.9) < 1e-9
"#,
    );
}

#[test]
fn network_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().display();
    run_python(&format!(
        r#"
import dpsr
net = dpsr.DenseQNet(4, 2, seed=1)
assert net.layers == [4, 64, 64, 2]
q = net.q_values([0.1, -0.2, 0.3, 0.0])
assert len(q) == 2
path = r"{dir}/net.bin"
net.save(path)
back = dpsr.DenseQNet.load(path)
assert back.params() == net.params()
assert back.greedy_action([0.1, -0.2, 0.3, 0.0]) == (0 if q[0] >= q[1] else 1)
"#
    ));
}

#[test]
fn training_and_experiments() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().display();
    run_python(&format!(
        r#"
import dpsr
small = {{"total_steps": 300, "buffer_size": 64, "learning_starts": 32,
          "candidates_common": 16, "candidates_recycle": 4, "recycle_every": 50,
          "eval_episodes": 2, "max_priority_recycle": True}}
cfg = dpsr.default_config("forked_corridor", small)
assert cfg["max_priority_recycle"] == "true" and cfg["buffer_size"] == "64"
a = dpsr.train("forked_corridor", "dpsr", 4, small)
b = dpsr.train("forked_corridor", "dpsr", 4, small)
assert a == b and len(a["eval_returns"]) == 2
try:
    dpsr.train("forked_corridor", "dpsr", 0, {{"k": "lots"}})
    raise AssertionError("bad override accepted")
except ValueError as e:
    assert "`k`" in str(e)

spec = "env=chain\nmodes=per,dpsr\nseeds=0,1\n" + "\n".join(f"{{k}}={{str(v).lower()}}" for k, v in small.items())
resolved = dpsr.parse_spec(spec)
assert dpsr.parse_spec(resolved) == resolved
rows = dpsr.run_experiment(spec, r"{dir}/chain", jobs=1)
assert [(r["mode"], r["seed"]) for r in rows] == [("per", 0), ("per", 1), ("dpsr", 0), ("dpsr", 1)]
report = dpsr.compare([r"{dir}/chain/summary.csv"], "per", "per")
assert "chain" in report
"#
    ));
}
