//! Random provision / write / sync schedules over two namespaces, checked
//! against an in-memory model of the repository.

use std::collections::BTreeMap;

use fuzzgate_core::pipeline::Workspace;
use fuzzgate_core::SharedRepository;
use proptest::prelude::*;

pub const NAMESPACES: [&str; 2] = ["bench-a", "bench-b"];
const PATHS: [&str; 4] = ["constraints.xmlish", "drivers/d1.cc", "drivers/d2.cc", "notes/x.txt"];

#[derive(Debug, Clone)]
pub enum Op {
    Provision(usize),
    /// (workspace slot, path, content seed)
    Write(usize, usize, u8),
    Sync(usize),
}

pub fn schedule() -> impl Strategy<Value = Vec<Op>> {
    let op = prop_oneof![
        (0..NAMESPACES.len()).prop_map(Op::Provision),
        (0..4usize, 0..PATHS.len(), any::<u8>()).prop_map(|(w, p, c)| Op::Write(w, p, c)),
        (0..4usize).prop_map(Op::Sync),
    ];
    prop::collection::vec(op, 1..24)
}

type Files = BTreeMap<String, String>;

struct ModelWs {
    ws: Workspace,
    ns: usize,
    baseline: Files,
    current: Files,
}

/// Runs one schedule. Workspace slots refer to live workspaces in creation
/// order (modulo how many exist); ops on an empty slot list are skipped.
pub fn run_schedule(ops: &[Op]) -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let repo = SharedRepository::open(dir.path().join("repo")).map_err(|e| e.to_string())?;
    let mut model: Vec<Files> = vec![Files::new(); NAMESPACES.len()];
    let mut live: Vec<ModelWs> = Vec::new();
    for (step, op) in ops.iter().enumerate() {
        match op {
            Op::Provision(ns) => {
                let ws = repo.provision(NAMESPACES[*ns]).map_err(|e| e.to_string())?;
                // everything synced so far must be visible to the new stage
                for (path, content) in &model[*ns] {
                    let got = ws.read(path).map_err(|e| e.to_string())?;
                    if got.as_deref() != Some(content.as_str()) {
                        let ns = NAMESPACES[*ns];
                        return Err(format!("step {step}: {path} in {ns} reads {got:?}, expected {content:?}"));
                    }
                }
                for path in PATHS {
                    if !model[*ns].contains_key(path) && ws.exists(path) {
                        return Err(format!("step {step}: unexpected {path} in {}", NAMESPACES[*ns]));
                    }
                }
                live.push(ModelWs {
                    ws,
                    ns: *ns,
                    baseline: model[*ns].clone(),
                    current: model[*ns].clone(),
                });
            }
            Op::Write(slot, path, seed) => {
                if live.is_empty() {
                    continue;
                }
                let n = live.len();
                let m = &mut live[slot % n];
                let content = format!("{} {} {seed}\n", NAMESPACES[m.ns], PATHS[*path]);
                m.ws.write(PATHS[*path], &content).map_err(|e| e.to_string())?;
                m.current.insert(PATHS[*path].to_string(), content);
            }
            Op::Sync(slot) => {
                if live.is_empty() {
                    continue;
                }
                let n = live.len();
                let m = live.remove(slot % n);
                repo.sync(NAMESPACES[m.ns], &m.ws).map_err(|e| e.to_string())?;
                for (path, content) in &m.current {
                    if m.baseline.get(path) != Some(content) {
                        model[m.ns].insert(path.clone(), content.clone());
                    }
                }
            }
        }
        for (i, ns) in NAMESPACES.iter().enumerate() {
            for path in PATHS {
                let got = repo.read(ns, path).map_err(|e| e.to_string())?;
                let want = model[i].get(path).map(|s| s.as_bytes().to_vec());
                if got != want {
                    return Err(format!("step {step}: {ns}/{path} is {got:?}, model says {want:?}"));
                }
                if let Some(bytes) = &got {
                    if !String::from_utf8_lossy(bytes).starts_with(ns) {
                        return Err(format!("step {step}: {ns}/{path} holds another namespace's data"));
                    }
                }
            }
            if !repo.verify(ns).map_err(|e| e.to_string())? {
                return Err(format!("step {step}: manifest of {ns} does not match disk"));
            }
        }
    }
    Ok(())
}
