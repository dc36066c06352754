#![allow(dead_code)]

use std::path::PathBuf;

pub mod gen;
pub mod graphs;
pub mod oracle;

use mob_core::driver::{self, RunConfig, RunReport};

pub fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

pub fn read_corpus(name: &str) -> String {
    std::fs::read_to_string(corpus(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn config(name: &str) -> RunConfig {
    RunConfig::load(&corpus(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Runs a corpus config, optionally overriding its seed and return mode.
pub fn run(name: &str, seed: Option<u64>, strict_returns: bool) -> RunReport {
    let mut c = config(name);
    if seed.is_some() {
        c.seed = seed;
    }
    c.strict_returns |= strict_returns;
    let (machine, _) = driver::prepare_from_files(&c).unwrap_or_else(|e| panic!("{name}: {e}"));
    driver::run_machine(machine, c.max_steps)
}

pub fn rule_names(report: &RunReport) -> Vec<&'static str> {
    report.trace.iter().map(|e| e.rule.as_str()).collect()
}

/// Whether `wanted` occurs in `seen` as a (not necessarily contiguous)
/// subsequence.
pub fn is_subsequence(wanted: &[&str], seen: &[&str]) -> bool {
    let mut it = seen.iter();
    wanted.iter().all(|w| it.any(|s| s == w))
}

pub fn mutants() -> Vec<(String, String, String)> {
    let dir = corpus("mutants");
    let mut out = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "mob"))
        .collect();
    entries.sort();
    for path in entries {
        let source = std::fs::read_to_string(&path).unwrap();
        let expected = source
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("// expect: "))
            .unwrap_or_else(|| panic!("{} lacks an expect header", path.display()))
            .to_string();
        out.push((
            path.file_name().unwrap().to_string_lossy().into_owned(),
            expected,
            source,
        ));
    }
    out
}

pub const LISTINGS: [&str; 4] = [
    "time_server.mob",
    "time_client.mob",
    "messenger_server.mob",
    "messenger_client.mob",
];

pub const GOLDEN_RULES: [&str; 11] = [
    "NewAgent",
    "Exit",
    "AgentGC",
    "BindAny",
    "Go",
    "RemoteInvoke",
    "LocalInvoke",
    "LocalReturn",
    "NotifyThread",
    "RemoteReturn",
    "NotifyThread",
];
