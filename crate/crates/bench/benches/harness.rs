use std::collections::BTreeMap;
use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use ragbench_core::env::{open_session, ArgValue, ToolCall};
use ragbench_core::knowledge::{load_knowledge_base, Domain, MatchMode, RecordKind};
use ragbench_core::scoring::{classify_response, token_f1};
use ragbench_core::taskgen::{build_pool, load_templates};
use ragbench_core::workflows::{Interruption, WorkflowTrace};

fn fixture(name: &str) -> String {
    format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn bench_token_f1(c: &mut Criterion) {
    let pred = "gradient descent is an iterative optimization method following the slope";
    let gold = "an iterative optimization method that follows the negative slope of a function";
    c.bench_function("token_f1", |b| {
        b.iter(|| token_f1(black_box(pred), black_box(gold)))
    });
}

fn bench_find_records(c: &mut Criterion) {
    let kb = load_knowledge_base(fixture("mini-aminer.jsonl"), Domain::Aminer).unwrap();
    let query = BTreeMap::from([
        ("name".to_string(), "alice zhang".to_string()),
        ("organization".to_string(), "institute".to_string()),
    ]);
    c.bench_function("find_records_fuzzy", |b| {
        b.iter(|| {
            kb.find_records(black_box(&query), RecordKind::Scholar, MatchMode::Fuzzy)
                .unwrap()
        })
    });
}

fn bench_invoke_search(c: &mut Criterion) {
    let kb = Arc::new(load_knowledge_base(fixture("mini-wiki.jsonl"), Domain::Wiki).unwrap());
    c.bench_function("env_search_and_lookup", |b| {
        b.iter(|| {
            let mut session = open_session(Arc::clone(&kb), None);
            let search = ToolCall::new(
                "Search",
                BTreeMap::from([("entity".to_string(), ArgValue::text("Gradient Descent"))]),
                1,
            );
            session.invoke(black_box(&search));
            let lookup = ToolCall::new(
                "Lookup",
                BTreeMap::from([("keyword".to_string(), ArgValue::text("gradient"))]),
                2,
            );
            session.invoke(black_box(&lookup))
        })
    });
}

fn bench_classify(c: &mut Criterion) {
    let trace = WorkflowTrace {
        steps: Vec::new(),
        scratchpad: "interest: AI, Machine Learning, Computer Vision, Robotics".to_string(),
        response: Some("AI, Machine Learning, Computer Vision".to_string()),
        interruption: None::<Interruption>,
        wall_time_secs: 0.0,
        step_count: 3,
        nodes_expanded: 0,
    };
    c.bench_function("classify_response", |b| {
        b.iter(|| classify_response(black_box(&trace), black_box("AI, Machine Learning"), 0.7))
    });
}

fn bench_build_pool(c: &mut Criterion) {
    let kb = load_knowledge_base(fixture("mini-aminer.jsonl"), Domain::Aminer).unwrap();
    let templates = load_templates(format!(
        "{}/../../templates/aminer_ks.jsonl",
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap();
    c.bench_function("build_pool_100", |b| {
        b.iter(|| build_pool(black_box(&templates), black_box(&kb), 100, 7).unwrap())
    });
}

criterion_group!(
    benches,
    bench_token_f1,
    bench_find_records,
    bench_invoke_search,
    bench_classify,
    bench_build_pool
);
criterion_main!(benches);
