//! Random object graphs for deep copy checks.

use std::collections::{BTreeMap, HashMap};

use mob_core::collect::{code_collect, CodeRepo};
use mob_core::machine::copy::{copy_seq, CopyOutcome};
use mob_core::machine::{Closure, Content, Heap, HeapCell, Value};
use mob_core::names::{AgentKey, LocalRef, QualifiedRef};
use mob_core::syntax::parse_source;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SRC: AgentKey = AgentKey(0);
pub const DST: AgentKey = AgentKey(1);
pub const FOREIGN: AgentKey = AgentKey(7);

const ATTRS: [&str; 3] = ["left", "right", "val"];
const MAX_DEPTH: usize = 5;

pub struct Graph {
    pub code: CodeRepo,
    pub heap: Heap,
    pub roots: Vec<Value>,
    /// First free cell number in the source heap.
    pub next_cell: u32,
}

pub fn code() -> CodeRepo {
    let program = parse_source(
        "class Node(left, right, val) { get() { return (val); } }
         agent Holder() { main() { } }
         exit;",
    )
    .unwrap();
    code_collect(&program.definitions).unwrap()
}

fn cell(n: u32) -> Value {
    Value::Ref(QualifiedRef::new(SRC, LocalRef::Cell(n)))
}

/// Nodes are laid out in at most six layers. Forward edges go one layer
/// down, back edges go anywhere above, so every graph has depth at most
/// five and most have cycles.
pub fn graph(seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut heap = Heap::new();
    let mut layers: Vec<Vec<u32>> = Vec::new();
    let mut next = 0u32;
    let holder = next;
    next += 1;
    heap.insert(
        LocalRef::Cell(holder),
        HeapCell::unlocked(Content::Closure(Closure {
            is_agent: true,
            env: [("self".to_string(), cell(holder))].into(),
            class: "Holder".into(),
        })),
    );
    let depth = rng.gen_range(1..=MAX_DEPTH + 1);
    for _ in 0..depth {
        let width = rng.gen_range(1..=3);
        layers.push((next..next + width).collect());
        next += width;
    }
    let mut boxes = Vec::new();
    for (i, layer) in layers.iter().enumerate() {
        for &n in layer {
            let mut env = BTreeMap::new();
            env.insert("self".to_string(), cell(n));
            for attr in ATTRS {
                let v = match rng.gen_range(0..8) {
                    0 | 1 if i + 1 < layers.len() => {
                        let below = &layers[i + 1];
                        cell(below[rng.gen_range(0..below.len())])
                    }
                    2 => {
                        let up = &layers[rng.gen_range(0..=i)];
                        cell(up[rng.gen_range(0..up.len())])
                    }
                    3 => cell(holder),
                    4 => Value::Ref(QualifiedRef::new(FOREIGN, LocalRef::Cell(rng.gen_range(0..4)))),
                    5 => {
                        let b = next;
                        next += 1;
                        boxes.push((b, Value::Int(rng.gen_range(0..1000))));
                        cell(b)
                    }
                    6 => Value::str(format!("s{}", rng.gen_range(0..10))),
                    _ => Value::Int(rng.gen_range(-5..5)),
                };
                env.insert(attr.to_string(), v);
            }
            heap.insert(
                LocalRef::Cell(n),
                HeapCell::unlocked(Content::Closure(Closure {
                    is_agent: false,
                    env,
                    class: "Node".into(),
                })),
            );
        }
    }
    for (b, v) in boxes {
        heap.insert(LocalRef::Cell(b), HeapCell::unlocked(Content::Value(v)));
    }
    let mut roots = vec![cell(layers[0][0])];
    if rng.gen_bool(0.5) {
        let last = layers.last().unwrap();
        roots.push(cell(last[rng.gen_range(0..last.len())]));
    }
    if rng.gen_bool(0.3) {
        roots.push(Value::Int(3));
    }
    Graph {
        code: code(),
        heap,
        roots,
        next_cell: next,
    }
}

pub fn copy(g: &Graph, dst_next: &mut u32) -> CopyOutcome {
    copy_seq(&g.code, &g.heap, SRC, DST, dst_next, &g.roots).expect("copy succeeds")
}

/// Checks that the copy is an isomorphic image of the part of the source
/// graph reachable from the roots, that it mentions no source object,
/// and that agent and foreign references are passed through unchanged.
pub fn check_isolated_copy(g: &Graph, out: &CopyOutcome) -> Result<(), String> {
    let mut map: HashMap<LocalRef, LocalRef> = HashMap::new();
    let mut todo: Vec<(Value, Value)> = g.roots.iter().cloned().zip(out.values.iter().cloned()).collect();
    if out.values.len() != g.roots.len() {
        return Err("value count changed".into());
    }
    while let Some((s, d)) = todo.pop() {
        let (sr, dr) = match (&s, &d) {
            (Value::Ref(sr), Value::Ref(dr)) if sr.agent == SRC => (*sr, *dr),
            _ if s == d => continue,
            _ => return Err(format!("{s:?} became {d:?}")),
        };
        let src_cell = &g.heap[&sr.local];
        if matches!(&src_cell.content, Content::Closure(k) if k.is_agent) {
            if s != d {
                return Err(format!("agent ref {s:?} became {d:?}"));
            }
            continue;
        }
        if dr.agent != DST {
            return Err(format!("object {s:?} copied as {d:?}"));
        }
        match map.get(&sr.local) {
            Some(prev) if *prev == dr.local => continue,
            Some(prev) => return Err(format!("{s:?} maps to {prev:?} and {:?}", dr.local)),
            None => {
                if map.values().any(|v| *v == dr.local) {
                    return Err(format!("{:?} is the image of two cells", dr.local));
                }
                map.insert(sr.local, dr.local);
            }
        }
        let dst_cell = out
            .heap
            .get(&dr.local)
            .ok_or_else(|| format!("{d:?} missing from the copied heap"))?;
        match (&src_cell.content, &dst_cell.content) {
            (Content::Closure(a), Content::Closure(b)) => {
                if a.class != b.class || b.is_agent {
                    return Err(format!("closure of {s:?} changed kind"));
                }
                if !a.env.keys().eq(b.env.keys()) {
                    return Err(format!("attributes of {s:?} changed"));
                }
                for (x, y) in a.env.values().zip(b.env.values()) {
                    todo.push((x.clone(), y.clone()));
                }
            }
            (Content::Value(a), Content::Value(b)) => todo.push((a.clone(), b.clone())),
            _ => return Err(format!("cell kind of {s:?} changed")),
        }
    }
    if map.len() != out.heap.len() {
        return Err(format!("{} cells copied but {} reachable", out.heap.len(), map.len()));
    }
    for c in out.heap.values() {
        let values: Vec<&Value> = match &c.content {
            Content::Closure(k) => k.env.values().collect(),
            Content::Value(v) => vec![v],
        };
        for v in values {
            if let Value::Ref(r) = v {
                let agent_ref = r.agent == SRC
                    && matches!(g.heap.get(&r.local).map(|c| &c.content), Some(Content::Closure(k)) if k.is_agent);
                if r.agent == SRC && !agent_ref {
                    return Err(format!("copy still points at source object {r:?}"));
                }
            }
        }
    }
    if !map.is_empty() && !out.code.contains_key("Node") {
        return Err("class code not copied".into());
    }
    Ok(())
}
